use adr_core::env::{
    self, is_terminal, observe, randomize_mission_config, reset, valid_action_mask, Action,
    EnvError, MissionConfig, MissionState,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Episode {
    actions: Vec<Action>,
    final_state: MissionState,
    total_return: f64,
}

// Uniform-random masked episode that checks every step invariant on the way.
fn fuzz_episode(config: &MissionConfig, seed: u64, rng: &mut ChaCha8Rng) -> Episode {
    let mut s = reset(config, seed);
    let n = s.n_debris();
    let mut actions = Vec::new();
    let mut total = 0.0;
    let (mut rdv, mut refuels) = (0usize, 0usize);
    loop {
        let mask = valid_action_mask(&s);
        if s.visited_count == 0 {
            assert!(!mask[n], "refuel offered before any rendezvous");
        }
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                let a = Action::from_index(i, n).unwrap();
                assert!(matches!(env::step(&s, a), Err(EnvError::MaskedAction(_))));
            }
        }
        let valid: Vec<usize> = (0..=n).filter(|&i| mask[i]).collect();
        let (terminal, _) = is_terminal(&s);
        assert_eq!(terminal, valid.is_empty() || s.visited_count == n);
        if terminal {
            break;
        }
        let i = *valid.choose(rng).unwrap();
        let a = Action::from_index(i, n).unwrap();
        let before = s.visited_count;
        let t = s.apply(a).expect("mask-valid action executes");
        total += t.reward;
        match a {
            Action::Rendezvous(_) => {
                rdv += 1;
                assert_eq!(s.visited_count, before + 1);
            }
            Action::Refuel => {
                refuels += 1;
                assert_eq!(s.visited_count, before);
            }
        }
        assert!(s.remaining_dv >= 0.0 && s.remaining_dv <= s.config.dv_max);
        assert!(s.elapsed_time >= 0.0 && s.elapsed_time <= s.config.mission_duration);
        assert_eq!(s.visited_count, s.debris.iter().filter(|d| d.visited).count());
        actions.push(a);
    }
    assert_eq!(total, rdv as f64 - 0.5 * refuels as f64);
    let obs = observe(&s);
    assert_eq!(obs.len(), 9 + 5 * n);
    assert!(obs.iter().all(|v| v.is_finite()));
    Episode {
        actions,
        final_state: s,
        total_return: total,
    }
}

#[test]
fn random_rollout_fuzz_keeps_budgets_and_mask_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xF022);
    let mut refuels = 0;
    for ep in 0..10_000u64 {
        let mut config = randomize_mission_config(&mut rng);
        // Smaller fields keep ten thousand episodes quick.
        config.n_debris = rng.gen_range(1..=12);
        let e = fuzz_episode(&config, ep, &mut rng);
        refuels += e.final_state.refuel_count;
    }
    assert!(refuels > 0, "fuzzing never exercised refuel");
}

#[test]
fn nominal_fields_fuzz() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for ep in 0..50u64 {
        fuzz_episode(&MissionConfig::nominal(), ep, &mut rng);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trajectory_is_determined_by_config_seed_and_actions(
        seed in any::<u64>(),
        walk in any::<u64>(),
        dv in 0.5f64..3.5,
        days in 0.5f64..7.0,
        n in 1usize..15,
    ) {
        let config = MissionConfig::nominal().with_budget(dv, days).with_debris(n);
        let mut rng = ChaCha8Rng::seed_from_u64(walk);
        let e = fuzz_episode(&config, seed, &mut rng);
        let mut replay = reset(&config, seed);
        let mut ret = 0.0;
        for &a in &e.actions {
            ret += replay.apply(a).unwrap().reward;
        }
        prop_assert_eq!(&replay, &e.final_state);
        prop_assert_eq!(ret, e.total_return);
    }

    #[test]
    fn debris_fields_respect_bounds(seed in any::<u64>(), n in 0usize..80) {
        let field = env::generate_debris_field(seed, n);
        prop_assert_eq!(field.len(), n);
        for d in field {
            let alt = d.elements.altitude();
            prop_assert!((700.0..=800.0).contains(&alt));
            prop_assert!((94.0..=98.0).contains(&d.elements.inc));
            prop_assert!(d.elements.ecc < 0.01);
        }
    }
}
