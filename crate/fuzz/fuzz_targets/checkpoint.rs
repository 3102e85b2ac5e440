#![no_main]

use libfuzzer_sys::fuzz_target;
use rotorfall::checkpoint::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_slice(data) {
        // A decoded checkpoint re-encodes and decodes to the same thing.
        let json = ck.to_json();
        Checkpoint::from_slice(json.as_bytes()).expect("decode re-encoded checkpoint");
    }
});
