mod common;

use common::*;
use csapo::confidence::OccupancyDomain;
use csapo::occupancy::{occupancy_from_policy, Occupancy};
use csapo::optimizer::{
    dual_objective, kl_project, mixing_step, player_update, ProjectionDuals, ProjectionProblem, SolverOptions,
    StepSizes,
};
use csapo::{Kernel, LayeredSpace, StateActionTable};

#[test]
fn dual_gradient_matches_central_differences() {
    for seed in 0..40 {
        let inst = projection_instance(seed);
        let space = inst.mixed.space().clone();
        let prob = ProjectionProblem::new(&inst.mixed, &inst.phi, inst.eta, &inst.domain).unwrap();
        let mut rng = rng(1000 + seed);
        let duals = random_duals(&space, &mut rng);
        let (_, grad) = dual_objective(&duals, &prob).unwrap();
        let h = 1e-6;
        let f = |d: &ProjectionDuals| dual_objective(d, &prob).unwrap().0;
        let check = |analytic: f64, plus: ProjectionDuals, minus: ProjectionDuals| {
            let fd = (f(&plus) - f(&minus)) / (2.0 * h);
            let scale = analytic.abs().max(fd.abs()).max(1e-3);
            assert!(
                (fd - analytic).abs() / scale < 1e-5,
                "seed {seed}: fd {fd} vs {analytic}"
            );
        };
        for l in 1..space.horizon() {
            for x in 0..space.layer_size(l) {
                let (mut p, mut m) = (duals.clone(), duals.clone());
                p.beta[l][x] += h;
                m.beta[l][x] -= h;
                check(grad.beta[l][x], p, m);
            }
        }
        for l in 0..space.horizon() {
            for k in 0..space.triple_len(l) {
                let (mut p, mut m) = (duals.clone(), duals.clone());
                p.mu_plus[l][k] += h;
                m.mu_plus[l][k] -= h;
                check(grad.mu_plus[l][k], p, m);
                let (mut p, mut m) = (duals.clone(), duals.clone());
                p.mu_minus[l][k] += h;
                m.mu_minus[l][k] -= h;
                check(grad.mu_minus[l][k], p, m);
            }
        }
    }
}

#[test]
fn dual_objective_is_convex_along_segments() {
    for seed in 0..40 {
        let inst = projection_instance(seed);
        let space = inst.mixed.space().clone();
        let prob = ProjectionProblem::new(&inst.mixed, &inst.phi, inst.eta, &inst.domain).unwrap();
        let mut rng = rng(2000 + seed);
        let a = random_duals(&space, &mut rng);
        let b = random_duals(&space, &mut rng);
        let mid = ProjectionDuals {
            beta: avg(&a.beta, &b.beta),
            mu_plus: avg(&a.mu_plus, &b.mu_plus),
            mu_minus: avg(&a.mu_minus, &b.mu_minus),
        };
        let f = |d: &ProjectionDuals| dual_objective(d, &prob).unwrap().0;
        assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-12);
    }
}

fn avg(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| 0.5 * (p + q)).collect())
        .collect()
}

#[test]
fn projection_matches_barrier_oracle() {
    let options = SolverOptions {
        record_trace: true,
        ..SolverOptions::default()
    };
    for seed in 0..30 {
        let inst = projection_instance(seed);
        let prob = ProjectionProblem::new(&inst.mixed, &inst.phi, inst.eta, &inst.domain).unwrap();
        let proj = kl_project(&prob, None, &options).unwrap();
        let report = inst.domain.contains(&proj.q);
        assert!(report.validity.max_residual() <= 1e-7, "seed {seed}: {report:?}");
        assert!(report.max_confidence_residual() <= 1e-6, "seed {seed}");
        let ours = prob.primal_objective(&proj.q);
        let target = prob.target();
        let (_, oracle) = barrier_projection(prob.space(), target.layers(), &inst.domain);
        assert!(
            (ours - oracle).abs() <= 1e-6,
            "seed {seed}: ours {ours} oracle {oracle}"
        );
        // Strong duality.
        let gap = ours - prob.dual_function(proj.diagnostics.dual_value);
        assert!((-1e-9..=1e-5).contains(&gap), "seed {seed}: duality gap {gap}");
        // Accepted steps never increase the dual objective.
        for w in proj.diagnostics.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }
}

#[test]
fn feasible_target_is_a_fixed_point() {
    let mut rng = rng(7);
    for _ in 0..10 {
        let space = random_space(&mut rng, 3, 3, 2);
        let kernel = random_kernel(&space, &mut rng);
        let q = occupancy_from_policy(&random_policy(&space, &mut rng), &kernel).unwrap();
        let domain = OccupancyDomain::point(&kernel);
        let prob = ProjectionProblem::new(&q, &StateActionTable::zeros(&space), 1.0, &domain).unwrap();
        let proj = kl_project(&prob, None, &SolverOptions::default()).unwrap();
        assert!(proj.q.max_abs_difference(&q) <= 1e-6);
    }
}

#[test]
fn zero_width_chain_gives_softmax_policy() {
    let space = LayeredSpace::chain(3, 3).unwrap();
    let kernel = Kernel::uniform(&space);
    let domain = OccupancyDomain::point(&kernel);
    let phi = StateActionTable::from_fn(&space, |l, _, a| (l as f64 - 1.0) * a as f64 + 0.3 * a as f64);
    let eta = 0.7;
    let prob = ProjectionProblem::new(&Occupancy::uniform(&space), &phi, eta, &domain).unwrap();
    let proj = kl_project(&prob, None, &SolverOptions::default()).unwrap();
    for l in 0..3 {
        let z: f64 = (0..3).map(|a| (-eta * phi.get(l, 0, a)).exp()).sum();
        for a in 0..3 {
            let expect = (-eta * phi.get(l, 0, a)).exp() / z;
            assert!((proj.q.pair(l, 0, a) - expect).abs() <= 1e-9);
        }
    }
}

#[test]
fn per_layer_constant_in_loss_does_not_move_the_projection() {
    for seed in 0..10 {
        let inst = projection_instance(300 + seed);
        let space = inst.mixed.space().clone();
        let shifted = StateActionTable::from_fn(&space, |l, x, a| inst.phi.get(l, x, a) + 1.5 * l as f64 - 0.4);
        let opts = SolverOptions::default();
        let p1 = ProjectionProblem::new(&inst.mixed, &inst.phi, inst.eta, &inst.domain).unwrap();
        let p2 = ProjectionProblem::new(&inst.mixed, &shifted, inst.eta, &inst.domain).unwrap();
        let a = kl_project(&p1, None, &opts).unwrap();
        let b = kl_project(&p2, None, &opts).unwrap();
        assert!(a.q.max_abs_difference(&b.q) <= 1e-10, "seed {seed}");
    }
}

#[test]
fn zero_losses_with_vacuous_domain() {
    let mut rng = rng(11);
    for _ in 0..10 {
        let space = random_space(&mut rng, 3, 3, 2);
        let kernel = random_kernel(&space, &mut rng);
        let prev = occupancy_from_policy(&random_policy(&space, &mut rng), &kernel).unwrap();
        let domain = OccupancyDomain::vacuous(&kernel);
        let zero = StateActionTable::zeros(&space);
        let opts = SolverOptions::default();
        let mut steps = StepSizes {
            v: 0.0,
            eta: 0.1,
            theta: 0.0,
        };
        // Without mixing the previous iterate is already feasible.
        let out = player_update(&prev, &zero, steps, &domain, None, &opts).unwrap();
        assert!(out.q.max_abs_difference(&prev) <= 1e-9);
        // Mixing breaks flow conservation; the step is the plain KL projection
        // of the mixture onto the occupancy polytope.
        steps.theta = 0.05;
        let out = player_update(&prev, &zero, steps, &domain, None, &opts).unwrap();
        let mixed = mixing_step(&prev, 0.05).unwrap();
        let (_, oracle) = barrier_projection(&space, mixed.layers(), &domain);
        assert!((kl(&flat(&out.q), &flat(&mixed)) - oracle).abs() <= 1e-6);
    }
}

fn flat(q: &Occupancy) -> Vec<f64> {
    q.layers().iter().flatten().copied().collect()
}

#[test]
fn single_action_projection_fits_transitions() {
    let mut rng = rng(21);
    for _ in 0..10 {
        let space = random_space(&mut rng, 3, 3, 1);
        let q = random_occupancy(&space, &mut rng);
        let domain = random_domain(&space, &mut rng);
        let prob = ProjectionProblem::new(&q, &StateActionTable::zeros(&space), 1.0, &domain).unwrap();
        let proj = kl_project(&prob, None, &SolverOptions::default()).unwrap();
        let pi = csapo::occupancy::policy_of(&proj.q);
        assert!(pi.layers().iter().flatten().all(|&p| p == 1.0));
        let (_, oracle) = barrier_projection(&space, prob.target().layers(), &domain);
        assert!((prob.primal_objective(&proj.q) - oracle).abs() <= 1e-6);
    }
}

#[test]
fn warm_start_reaches_the_same_projection() {
    let inst = projection_instance(77);
    let prob = ProjectionProblem::new(&inst.mixed, &inst.phi, inst.eta, &inst.domain).unwrap();
    let opts = SolverOptions::default();
    let cold = kl_project(&prob, None, &opts).unwrap();
    let warm = kl_project(&prob, Some(&cold.duals), &opts).unwrap();
    assert!(warm.diagnostics.iterations <= 1);
    assert!(warm.q.max_abs_difference(&cold.q) <= 1e-8);
}
