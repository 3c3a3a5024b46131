use super::*;
use proptest::prelude::*;

fn row(scenario: &str, planner: &str, seed: u64, visited: usize) -> CaseResult {
    CaseResult {
        scenario: scenario.into(),
        planner: planner.into(),
        seed,
        debris_visited: visited,
        refuels: 0,
        dv_used_kms: 0.0,
        episode_return: visited as f64,
        wall_time_s: 0.5,
        mean_decision_latency_s: 0.01,
    }
}

fn strip_timing(mut rows: Vec<CaseResult>) -> Vec<CaseResult> {
    for r in &mut rows {
        r.wall_time_s = 0.0;
        r.mean_decision_latency_s = 0.0;
    }
    rows
}

fn small(kind: ScenarioKind, n_cases: usize) -> Scenario {
    Scenario::preset(kind, n_cases).with_debris(8)
}

#[test]
fn scenario_presets() {
    let all = Scenario::all(100);
    let budgets: Vec<(f64, f64)> = all.iter().map(|s| (s.dv_max, s.mission_days)).collect();
    assert_eq!(budgets, [(3.0, 7.0), (3.0, 3.0), (1.0, 7.0)]);
    assert!(all.iter().all(|s| s.n_cases == 100 && s.n_debris == 50));
    let bases: Vec<u64> = all.iter().map(|s| s.seed_base(5)).collect();
    assert_eq!(bases, [5, 1_000_005, 2_000_005]);
}

#[test]
fn summarize_examples() {
    let s = summarize(&[row("nominal", "mcts", 0, 5)]).unwrap();
    assert_eq!(s.len(), 1);
    assert_eq!((s[0].min, s[0].max, s[0].mean, s[0].std), (5.0, 5.0, 5.0, 0.0));

    let s = summarize(&[row("nominal", "mcts", 0, 2), row("nominal", "mcts", 1, 4)]).unwrap();
    assert_eq!((s[0].min, s[0].max, s[0].mean, s[0].std), (2.0, 4.0, 3.0, 1.0));
    assert_eq!(s[0].mean_pm_std(), "3.0 ± 1.0");

    assert!(matches!(summarize(&[]), Err(EvalError::Empty)));
    assert!(matches!(timing_report(&[]), Err(EvalError::Empty)));
}

#[test]
fn summary_and_timing_group_by_scenario_and_planner() {
    let rows = vec![
        row("nominal", "mcts", 0, 3),
        row("nominal", "random", 0, 1),
        row("dv_limited", "mcts", 0, 2),
        row("nominal", "mcts", 1, 5),
    ];
    let s = summarize(&rows).unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(s[0].n_cases, 2);
    assert_eq!(s[0].mean, 4.0);
    assert_eq!(timing_report(&rows).unwrap().len(), 3);

    let one = timing_report(&rows[..1]).unwrap();
    assert_eq!(one[0].mean_wall_time_s, 0.5);
    assert_eq!(one[0].max_decision_latency_s, 0.01);
}

proptest! {
    #[test]
    fn summaries_are_permutation_invariant(
        visits in prop::collection::vec(0usize..50, 1..40),
        shuffle_seed in any::<u64>(),
    ) {
        let rows: Vec<CaseResult> = visits.iter().enumerate()
            .map(|(i, &v)| row("nominal", "p", i as u64, v))
            .collect();
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let a = summarize(&rows).unwrap();
        let b = summarize(&shuffled).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert!(a[0].min <= a[0].mean && a[0].mean <= a[0].max);
    }
}

#[test]
fn random_cases_hold_budget_invariants() {
    for kind in ScenarioKind::ALL {
        let scenario = Scenario::preset(kind, 4);
        let rows = run_scenario(&Planner::Random, &scenario, 10, 1).unwrap();
        assert_eq!(rows.len(), 4);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.seed, 10 + i as u64);
            assert!(r.debris_visited <= 50);
            assert_eq!(r.episode_return, r.debris_visited as f64 - 0.5 * r.refuels as f64);
            // Each refuel cycle is bounded by one full tank.
            assert!(r.dv_used_kms <= scenario.dv_max * (r.refuels + 1) as f64 + 1e-12);
            assert!(r.wall_time_s >= 0.0);
        }
    }
}

#[test]
fn single_case_scenario_and_zero_cases() {
    let s = small(ScenarioKind::Nominal, 1);
    assert_eq!(run_scenario(&Planner::Random, &s, 0, 1).unwrap().len(), 1);
    let none = small(ScenarioKind::Nominal, 0);
    assert!(matches!(
        run_scenario(&Planner::Random, &none, 0, 1),
        Err(EvalError::NoCases)
    ));
}

#[test]
fn mcts_case_is_reproducible() {
    let planner = Planner::Mcts(MctsConfig {
        simulations_per_step: 30,
        ..Default::default()
    });
    let s = small(ScenarioKind::DvLimited, 1);
    let a = run_case(&planner, &s, 77).unwrap();
    let b = run_case(&planner, &s, 77).unwrap();
    assert_eq!(strip_timing(vec![a]), strip_timing(vec![b]));
}

#[test]
fn parallel_matches_sequential() {
    let planner = Planner::Mcts(MctsConfig {
        simulations_per_step: 20,
        ..Default::default()
    });
    let s = small(ScenarioKind::TimeLimited, 6);
    let seq = run_scenario(&planner, &s, 3, 1).unwrap();
    let par = run_scenario(&planner, &s, 3, 4).unwrap();
    assert_eq!(strip_timing(seq), strip_timing(par));
}

#[test]
fn ppo_planner_checks_observation_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let s = small(ScenarioKind::Nominal, 2);
    let cfg = s.mission_config();
    let good = PolicyParams::init(cfg.observation_len(), 8, cfg.n_actions(), &mut rng);
    let rows = run_scenario(&Planner::ppo("ppo_test", good), &s, 0, 1).unwrap();
    assert!(rows.iter().all(|r| r.planner == "ppo_test"));
    let bad = PolicyParams::init(cfg.observation_len() + 5, 8, cfg.n_actions(), &mut rng);
    assert!(matches!(
        run_case(&Planner::ppo("bad", bad), &s, 0),
        Err(EvalError::ObservationMismatch { .. })
    ));
}

#[test]
fn battery_uses_disjoint_scenario_seeds() {
    let scenarios: Vec<Scenario> = ScenarioKind::ALL.iter().map(|&k| small(k, 2)).collect();
    let rows = run_battery(&[Planner::Random], &scenarios, 0, 1).unwrap();
    assert_eq!(rows.len(), 6);
    let seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    assert_eq!(seeds, [0, 1, 1_000_000, 1_000_001, 2_000_000, 2_000_001]);
}

#[test]
fn csv_roundtrip_and_header() {
    assert_eq!(results_to_csv(&[]).unwrap(), format!("{RESULTS_CSV_HEADER}\n"));
    let s = small(ScenarioKind::Nominal, 3);
    let rows = run_scenario(&Planner::Random, &s, 0, 1).unwrap();
    let text = results_to_csv(&rows).unwrap();
    assert_eq!(text.lines().next().unwrap(), RESULTS_CSV_HEADER);
    assert_eq!(parse_results_csv(&text).unwrap(), rows);
    assert!(parse_results_csv("a,b\n1,2\n").is_err());
}

#[test]
fn written_bundle_is_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios: Vec<Scenario> = ScenarioKind::ALL.iter().map(|&k| small(k, 5)).collect();
    let rows = run_battery(&[Planner::Random], &scenarios, 9, 1).unwrap();
    let paths = write_results(dir.path(), &rows).unwrap();
    assert_eq!(paths.len(), 6);
    let json = std::fs::read_to_string(dir.path().join("results.json")).unwrap();
    let bundle: ResultsBundle = serde_json::from_str(&json).unwrap();
    assert_eq!(bundle.results, rows);
    assert_eq!(bundle.histograms.len(), 3);
    for h in &bundle.histograms {
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
    }
    let table = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(table.contains("population"));
    assert_eq!(table.lines().count(), 2 + 3);
}
