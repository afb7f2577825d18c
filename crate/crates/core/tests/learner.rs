//! End-to-end behavior of the learner on generated games.

use std::path::PathBuf;

use csapo::confidence::epoch_cap;
use csapo::game::{generate_random_game, GameSpec};
use csapo::harness::{benchmark_spec, header_line, write_run_csv, ExperimentConfig};
use csapo::hindsight::Budget;
use csapo::lagrangian::{run_ucb_csapo, EpisodeLog, Mode, Params, RunOptions};

fn run(spec: &GameSpec, episodes: usize, seed: u64, mode: Mode) -> EpisodeLog {
    let game = generate_random_game(spec).unwrap();
    let params = Params::theorem_defaults(game.horizon(), episodes);
    run_ucb_csapo(&game, &params, episodes, seed, mode, &RunOptions::default()).unwrap()
}

#[test]
fn maximal_budget_keeps_the_multiplier_at_zero() {
    let spec = GameSpec {
        budget: 6.0,
        ..GameSpec::default()
    };
    let log = run(&spec, 400, 2, Mode::Coupled);
    let last = log.records.last().unwrap().lambda.0;
    assert!(last <= 0.05 * 3.0, "final multiplier {last}");
}

#[test]
fn run_invariants_hold_in_both_modes() {
    let spec = benchmark_spec();
    let game = generate_random_game(&spec).unwrap();
    for mode in [Mode::Coupled, Mode::Side] {
        let log = run(&spec, 300, 4, mode);
        assert_eq!(log.len(), 300);
        let cap = epoch_cap(game.min_space(), 300).min(epoch_cap(game.max_space(), 300));
        let mut prev = (1, 1);
        for (i, rec) in log.records.iter().enumerate() {
            assert_eq!(rec.t, i + 1);
            assert!(rec.lambda.0 >= 0.0 && rec.lambda.1 >= 0.0);
            if mode == Mode::Coupled {
                assert_eq!(rec.lambda.0, rec.lambda.1);
            }
            assert!(rec.epoch1 >= prev.0 && rec.epoch2 >= prev.1);
            assert!((rec.epoch1.max(rec.epoch2) as f64) <= cap);
            prev = (rec.epoch1, rec.epoch2);
            for policy in [&rec.policy1, &rec.policy2] {
                for row in policy.layers().iter().flat_map(|l| l.chunks(2)) {
                    assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
                }
            }
        }
        let est = log.estimates.as_ref().unwrap();
        assert_eq!(est.len(), 300);
        assert!(est
            .iter()
            .all(|(a, b)| a.validate().passes(1e-9) && b.validate().passes(1e-9)));
    }
}

#[test]
fn seeds_change_the_trajectories() {
    let spec = benchmark_spec();
    let a = run(&spec, 50, 1, Mode::Coupled);
    let b = run(&spec, 50, 2, Mode::Coupled);
    assert_ne!(
        a.records.iter().map(|r| &r.trajectory1).collect::<Vec<_>>(),
        b.records.iter().map(|r| &r.trajectory1).collect::<Vec<_>>()
    );
    assert_eq!(a, run(&spec, 50, 1, Mode::Coupled));
}

fn golden_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/run_T4096_seed7.csv")
}

/// Regenerate with `CSAPO_BLESS=1 cargo test --test learner golden`.
#[test]
fn golden_run_csv_is_reproduced() {
    let spec = benchmark_spec();
    let game = generate_random_game(&spec).unwrap();
    let config = ExperimentConfig {
        episodes: 4096,
        seeds: vec![7],
        ..ExperimentConfig::default()
    };
    let params = config.params(game.horizon(), 4096);
    let options = RunOptions { keep_estimates: false };
    let log = run_ucb_csapo(&game, &params, 4096, 7, Mode::Coupled, &options).unwrap();
    let mut csv = Vec::new();
    let budget = Budget::for_mode(&game, Mode::Coupled).unwrap();
    write_run_csv(&log, &budget, &header_line(&config.hash()), false, None, &mut csv).unwrap();
    let path = golden_path();
    if std::env::var_os("CSAPO_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, &csv).unwrap();
    }
    let golden = std::fs::read(&path).expect("golden file present");
    assert!(golden == csv, "run CSV differs from {}", path.display());
}
