//! Regret, violation and decomposition on constructed logs.

use csapo::game::{generate_random_game, GameSpec, LayeredGame};
use csapo::harness::{benchmark_spec, comparator_for, matching_pennies};
use csapo::hindsight::{HindsightOptions, SaddleSolution};
use csapo::lagrangian::{run_ucb_csapo, EpisodeLog, Mode, Params, RunOptions};
use csapo::metrics::*;
use csapo::occupancy::policy_of;
use csapo::Error;
use proptest::prelude::*;

fn learn(game: &LayeredGame, episodes: usize, seed: u64, mode: Mode) -> EpisodeLog {
    let params = Params::theorem_defaults(game.horizon(), episodes);
    run_ucb_csapo(game, &params, episodes, seed, mode, &RunOptions::default()).unwrap()
}

fn comparator(game: &LayeredGame, mode: Mode, episodes: usize) -> SaddleSolution {
    comparator_for(game, mode, episodes, &HindsightOptions::default()).unwrap()
}

#[test]
fn violation_accumulates_when_every_episode_violates() {
    let game = generate_random_game(&benchmark_spec()).unwrap();
    let log = learn(&game, 80, 1, Mode::Coupled);
    let strict = LayeredGame {
        budget: 1e-6,
        ..game.clone()
    };
    let v = violation(&log, &strict).unwrap();
    assert!(v.realized[0].terms.iter().all(|&x| x > 0.0));
    let series = v.violation(0);
    assert!(series.windows(2).all(|w| w[1] >= w[0]));
    assert_eq!(series, v.realized[0].cumulative);
}

#[test]
fn violation_vanishes_at_the_largest_budget_and_without_utilities() {
    let game = generate_random_game(&benchmark_spec()).unwrap();
    let log = learn(&game, 80, 2, Mode::Coupled);
    let loose = LayeredGame {
        budget: 2.0 * game.horizon() as f64,
        ..game.clone()
    };
    let v = violation(&log, &loose).unwrap();
    assert!(v.violation(0).iter().all(|&x| x == 0.0));
    assert_eq!(v.realized[0].total().max(0.0), v.final_violation(0));

    let pennies = matching_pennies().unwrap();
    let log = learn(&pennies, 40, 3, Mode::Coupled);
    assert!(violation(&log, &pennies)
        .unwrap()
        .violation(0)
        .iter()
        .all(|&x| x == 0.0));
}

#[test]
fn playing_the_comparator_has_no_regret() {
    let game = generate_random_game(&benchmark_spec()).unwrap();
    let star = comparator(&game, Mode::Coupled, 60);
    let mut log = learn(&game, 60, 4, Mode::Coupled);
    for rec in log.records.iter_mut() {
        rec.policy1 = policy_of(&star.q1);
        rec.policy2 = policy_of(&star.q2);
    }
    let reg = regret(&log, &star, &game).unwrap();
    let tol = game.horizon() as f64 * 60.0 * 1e-9;
    assert!(reg.cumulative.iter().all(|v| v.abs() <= tol));
}

#[test]
fn single_action_game_has_zero_regret() {
    let spec = GameSpec {
        min_actions: 1,
        max_actions: 1,
        ..GameSpec::default()
    };
    let game = generate_random_game(&spec).unwrap();
    let log = learn(&game, 40, 5, Mode::Coupled);
    let star = comparator(&game, Mode::Coupled, 40);
    assert!(regret(&log, &star, &game).unwrap().terms.iter().all(|&v| v == 0.0));
}

#[test]
fn exact_estimates_leave_no_estimation_error() {
    let game = generate_random_game(&benchmark_spec()).unwrap();
    let star = comparator(&game, Mode::Coupled, 50);
    let mut log = learn(&game, 50, 6, Mode::Coupled);
    log.estimates = Some(played_occupancies(&log, &game).unwrap());
    let d = decomposition_diagnostics(&log, &star, &game).unwrap();
    for s in [
        &d.err1,
        &d.err2,
        &d.err3,
        &d.err4,
        &d.estimation_l1.0,
        &d.estimation_l1.1,
    ] {
        assert!(s.terms.iter().all(|&v| v == 0.0));
    }
    let reg = regret(&log, &star, &game).unwrap();
    assert_eq!(reg.terms, d.hat_regret.terms);

    log.estimates = None;
    assert!(matches!(
        decomposition_diagnostics(&log, &star, &game),
        Err(Error::Unavailable(_))
    ));
}

#[test]
fn decomposition_identity_and_pure_recomputation() {
    let game = generate_random_game(&benchmark_spec()).unwrap();
    for mode in [Mode::Coupled, Mode::Side] {
        let star = comparator(&game, mode, 200);
        let log = learn(&game, 200, 7, mode);
        let eval = evaluate(&log, &game, &star).unwrap();
        let d = eval.decomposition.as_ref().unwrap();
        for t in 0..eval.len() {
            let parts = d.hat_regret.cumulative[t] + d.err1.cumulative[t] + d.err2.cumulative[t];
            assert!((eval.regret.cumulative[t] - parts).abs() <= 1e-9);
        }
        assert_eq!(eval.violation.realized.len(), if mode == Mode::Side { 2 } else { 1 });
        assert_eq!(eval, evaluate(&log, &game, &star).unwrap());
    }
}

#[test]
fn comparator_of_the_other_mode_is_rejected() {
    let game = generate_random_game(&benchmark_spec()).unwrap();
    let log = learn(&game, 10, 8, Mode::Coupled);
    let side = comparator(&game, Mode::Side, 10);
    assert!(matches!(evaluate(&log, &game, &side), Err(Error::ShapeMismatch(_))));
}

#[test]
fn rate_fit_reference_series() {
    let grid = [100.0, 400.0, 1600.0];
    let fit = |f: fn(f64) -> f64| rate_fit(&grid.map(f), &grid).unwrap();
    assert!((fit(f64::sqrt).slope - 0.5).abs() <= 1e-12);
    assert!(fit(|_| 3.0).slope.abs() <= 1e-12);
    assert!((fit(|t| t).slope - 1.0).abs() <= 1e-12);
    let zeros = rate_fit(&[0.0, 1.0, 2.0], &grid).unwrap();
    assert!(zeros.clamped);
    assert!(rate_fit(&[1.0, 2.0], &grid[..2]).is_err());
}

proptest! {
    #[test]
    fn cumulative_series_are_partial_sums(terms in prop::collection::vec(-10.0f64..10.0, 0..200)) {
        let s = MetricSeries::from_terms(terms.clone());
        prop_assert_eq!(s.len(), terms.len());
        let mut acc = 0.0;
        for (t, c) in terms.iter().zip(&s.cumulative) {
            acc += t;
            prop_assert_eq!(acc, *c);
        }
        prop_assert!(s.positive_part().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rate_fit_recovers_power_laws(c in 0.01f64..100.0, p in -1.0f64..2.0) {
        let grid = [64.0, 256.0, 1024.0, 4096.0];
        let fit = rate_fit(&grid.map(|t: f64| c * t.powf(p)), &grid).unwrap();
        prop_assert!((fit.slope - p).abs() <= 1e-9);
        prop_assert!((fit.intercept - c.ln()).abs() <= 1e-8);
        prop_assert!(fit.r2 > 1.0 - 1e-9 && !fit.clamped);
    }
}
