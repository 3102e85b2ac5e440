use super::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_cfg() -> SacConfig {
    SacConfig {
        hidden_width: 8,
        batch_size: 4,
        ..SacConfig::default()
    }
}

fn agent(obs_dim: usize, act_dim: usize, seed: u64) -> SacAgent {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SacAgent::new(obs_dim, act_dim, vec![1.0; obs_dim], &small_cfg(), &mut rng).unwrap()
}

/// Network whose output is the constant `value`.
fn constant_net(sizes: &[usize], value: f64) -> MlpParams {
    let mut net = MlpParams::zeros(sizes).unwrap();
    let last = net.num_layers() - 1;
    net.layer_mut(last).1[0] = value;
    net
}

fn batch(rows: usize, obs_dim: usize, act_dim: usize, seed: u64) -> Batch {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let items: Vec<Transition> = (0..rows)
        .map(|_| Transition {
            s: (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            a: uniform_action(act_dim, &mut rng),
            r: rng.random_range(-2.0..0.0),
            s_next: (0..obs_dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            d: false,
        })
        .collect();
    Batch::from_transitions(&items)
}

#[test]
fn soft_target_hand_values() {
    assert!((soft_target(1.0, 0.0, 0.99, 2.0, 0.2, -3.0) - 3.574).abs() < 1e-12);
    assert_eq!(soft_target(1.5, 1.0, 0.99, 2.0, 0.2, -3.0), 1.5);
    assert_eq!(soft_target(1.5, 0.0, 0.0, 2.0, 0.2, -3.0), 1.5);
}

#[test]
fn terminal_or_undiscounted_targets_equal_reward() {
    let a = agent(3, 2, 1);
    let mut b = batch(5, 3, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let myopic = a.compute_target(&b, 0.0, &mut rng).unwrap();
    assert_eq!(myopic, b.rewards);
    b.dones = vec![1.0; 5];
    let terminal = a.compute_target(&b, 0.99, &mut rng).unwrap();
    assert_eq!(terminal, b.rewards);
}

#[test]
fn target_uses_smaller_twin() {
    let mut a = agent(3, 2, 1);
    a.target1 = constant_net(a.target1.layer_sizes(), 5.0);
    a.target2 = constant_net(a.target2.layer_sizes(), 3.0);
    a.log_alpha = f64::NEG_INFINITY;
    let b = batch(4, 3, 2, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let t = a.compute_target(&b, 0.5, &mut rng).unwrap();
    for (ti, ri) in t.iter().zip(&b.rewards) {
        assert!((ti - (ri + 0.5 * 3.0)).abs() < 1e-12);
    }
    std::mem::swap(&mut a.target1, &mut a.target2);
    assert_eq!(a.compute_target(&b, 0.5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap(), t);
}

#[test]
fn single_sample_loss_is_squared_error() {
    let mut a = agent(2, 1, 4);
    a.critic1 = constant_net(a.critic1.layer_sizes(), 0.75);
    a.critic2 = constant_net(a.critic2.layer_sizes(), -0.25);
    let b = batch(1, 2, 1, 5);
    let (l1, l2) = a.critic_update(&b, &[2.0]).unwrap();
    assert!((l1 - 1.25f64.powi(2)).abs() < 1e-12);
    assert!((l2 - 2.25f64.powi(2)).abs() < 1e-12);
}

#[test]
fn exact_critics_have_zero_loss_and_stay_put() {
    let mut a = agent(2, 1, 4);
    a.critic1 = constant_net(a.critic1.layer_sizes(), 1.5);
    a.critic2 = constant_net(a.critic2.layer_sizes(), 1.5);
    let before = (a.critic1.clone(), a.critic2.clone());
    let b = batch(6, 2, 1, 5);
    let (l1, l2) = a.critic_update(&b, &[1.5; 6]).unwrap();
    assert_eq!((l1, l2), (0.0, 0.0));
    assert_eq!((a.critic1.clone(), a.critic2.clone()), before);
}

#[test]
fn critic_loss_decreases_on_fixed_batch() {
    let mut a = agent(4, 2, 6);
    let b = batch(32, 4, 2, 7);
    let targets: Vec<f64> = (0..32).map(|i| (i as f64 * 0.37).sin()).collect();
    let mut prev = f64::INFINITY;
    for _ in 0..100 {
        let (l1, l2) = a.critic_update(&b, &targets).unwrap();
        assert!(l1 + l2 < prev, "{} >= {prev}", l1 + l2);
        prev = l1 + l2;
    }
}

#[test]
fn non_finite_target_aborts_critic_update() {
    let mut a = agent(2, 1, 4);
    let before = a.clone();
    let b = batch(2, 2, 1, 5);
    let err = a.critic_update(&b, &[f64::NAN, 0.0]).unwrap_err();
    assert_eq!(err, SacError::NonFiniteLoss { what: "q1" });
    assert_eq!(a, before);
}

#[test]
fn flat_critic_without_entropy_gives_no_signal() {
    let mut a = agent(3, 2, 8);
    a.critic1 = constant_net(a.critic1.layer_sizes(), 2.0);
    a.critic2 = constant_net(a.critic2.layer_sizes(), 2.0);
    a.log_alpha = f64::NEG_INFINITY;
    let actor = a.actor.clone();
    a.actor_update(&batch(8, 3, 2, 9), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert_eq!(a.actor, actor);
}

#[test]
fn actor_uses_smaller_twin() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut a = agent(3, 2, 10);
    a.critic2 = MlpParams::new(a.critic1.layer_sizes(), &mut rng).unwrap();
    let mut reference = a.clone();
    // critic1 is far above critic2, so only critic2 can be the minimum
    a.critic1 = constant_net(a.critic1.layer_sizes(), 1e3);
    reference.critic1 = reference.critic2.clone();
    let b = batch(8, 3, 2, 12);
    let (la, _) = a.actor_update(&b, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let (lr, _) = reference.actor_update(&b, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    assert_eq!(la, lr);
    assert_eq!(a.actor, reference.actor);
}

/// Q(s, a) = −(a − 0.5)² with its exact action gradient.
fn quadratic_critic(input: &Matrix) -> Result<(Vec<f64>, Matrix), SacError> {
    let n = input.rows();
    let a_col = input.cols() - 1;
    let q = (0..n).map(|i| -(input.get(i, a_col) - 0.5).powi(2)).collect();
    let dq = (0..n).map(|i| -2.0 * (input.get(i, a_col) - 0.5)).collect();
    Ok((q, Matrix::from_vec(n, 1, dq)))
}

#[test]
fn actor_mean_moves_to_quadratic_optimum() {
    let mut a = agent(1, 1, 13);
    a.log_alpha = f64::NEG_INFINITY;
    a.actor_opt.lr = 3e-3;
    let b = Batch::from_transitions(&vec![
        Transition {
            s: vec![1.0],
            a: vec![0.0],
            r: 0.0,
            s_next: vec![1.0],
            d: true,
        };
        64
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mode = |a: &SacAgent| a.act(&[1.0], ActMode::Deterministic, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap()[0];
    let start = (mode(&a) - 0.5).abs();
    for _ in 0..1500 {
        a.actor_step(&b, &mut rng, quadratic_critic).unwrap();
    }
    let end = (mode(&a) - 0.5).abs();
    assert!(end < 0.05 && end < start, "start {start}, end {end}");
    let raw = a.actor.forward(&[1.0]).unwrap();
    assert!((raw[0] - 0.5f64.atanh()).abs() < 0.1);
}

#[test]
fn entropy_alone_widens_the_policy() {
    let mut a = agent(1, 1, 15);
    a.critic1 = constant_net(a.critic1.layer_sizes(), 0.0);
    a.critic2 = constant_net(a.critic2.layer_sizes(), 0.0);
    a.actor_opt.lr = 1e-3;
    // Start narrow: the squashed density's entropy peaks at a finite σ of
    // order one, so a wide initial policy would rightly shrink instead.
    let last = a.actor.num_layers() - 1;
    a.actor.layer_mut(last).1[1] = -2.0;
    let b = batch(64, 1, 1, 16);
    let log_std = |a: &SacAgent| a.actor.forward(&[0.3]).unwrap()[1];
    let before = log_std(&a);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..200 {
        a.actor_update(&b, &mut rng).unwrap();
    }
    assert!(log_std(&a) > before + 0.05, "{before} -> {}", log_std(&a));
}

#[test]
fn temperature_responds_to_entropy_gap() {
    let mut a = agent(1, 2, 18);
    let h = a.target_entropy;
    assert_eq!(h, -2.0);
    let start = a.log_alpha;
    // entropy exactly at target: log π = −H̄
    a.alpha_update(&[-h, -h]).unwrap();
    assert_eq!(a.log_alpha, start);
    // entropy below target (log π large) → α grows
    a.alpha_update(&[5.0, 5.0]).unwrap();
    assert!(a.log_alpha > start);
    let mut b = agent(1, 2, 18);
    b.alpha_update(&[-10.0, -10.0]).unwrap();
    assert!(b.log_alpha < start);
    assert!(b.alpha() > 0.0);
}

#[test]
fn polyak_extremes() {
    let mut a = agent(2, 1, 19);
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    a.critic1 = MlpParams::new(a.critic1.layer_sizes(), &mut rng).unwrap();
    let before = a.target1.clone();
    a.polyak_update(1e-300);
    assert_ne!(a.target1, a.critic1);
    a.target1 = before.clone();
    a.polyak_update(1.0);
    assert_eq!(a.target1, a.critic1);
    assert_eq!(a.target2, a.critic2);
}

#[test]
fn targets_only_move_through_polyak() {
    let mut a = agent(3, 2, 21);
    let targets = (a.target1.clone(), a.target2.clone());
    let b = batch(8, 3, 2, 22);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let t = a.compute_target(&b, 0.99, &mut rng).unwrap();
    a.critic_update(&b, &t).unwrap();
    let (_, lp) = a.actor_update(&b, &mut rng).unwrap();
    a.alpha_update(&lp).unwrap();
    assert_eq!((a.target1.clone(), a.target2.clone()), targets);
    a.polyak_update(0.05);
    assert_ne!(a.target1, targets.0);
}

#[test]
fn deterministic_action_of_zero_mean_is_zero() {
    let mut a = agent(3, 4, 24);
    a.actor = MlpParams::zeros(a.actor.layer_sizes()).unwrap();
    let act = a.act(&[0.1, 0.2, 0.3], ActMode::Deterministic, 1.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    assert_eq!(act, vec![0.0; 4]);
}

#[test]
fn full_exploration_is_uniform() {
    let a = agent(2, 4, 25);
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let n = 100_000;
    let mut sum = [0.0; 4];
    for _ in 0..n {
        let act = a.act(&[0.0, 0.0], ActMode::Stochastic, 1.0, &mut rng).unwrap();
        for (s, v) in sum.iter_mut().zip(&act) {
            assert!(v.abs() < 1.0);
            *s += v;
        }
    }
    for s in sum {
        assert!((s / n as f64).abs() < 0.01);
    }
}

#[test]
fn seeded_stochastic_actions_repeat() {
    let a = agent(2, 4, 27);
    let draw = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..50)
            .map(|_| a.act(&[0.4, -0.2], ActMode::Stochastic, 0.1, &mut rng).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
}

#[test]
fn act_rejects_wrong_observation_length() {
    let a = agent(2, 4, 28);
    assert!(a.act(&[0.0], ActMode::Deterministic, 0.0, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn seeded_updates_are_reproducible() {
    let run = || {
        let mut a = agent(3, 2, 29);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let cfg = small_cfg();
        for k in 0..20 {
            a.update(&batch(8, 3, 2, k), &cfg, &mut rng).unwrap();
        }
        a
    };
    assert_eq!(run(), run());
}
