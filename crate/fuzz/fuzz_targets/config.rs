#![no_main]

use libfuzzer_sys::fuzz_target;
use rotorfall::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = Config::from_toml_str(text) {
        // Anything accepted must survive its own echo.
        let echo = cfg.to_toml_string();
        let again = Config::from_toml_str(&echo).expect("reparse echo");
        assert_eq!(cfg, again);
    }
});
