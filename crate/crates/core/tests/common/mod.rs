//! Shared fixtures and independent oracles for the integration tests.
#![allow(dead_code)]

use csapo::confidence::OccupancyDomain;
use csapo::occupancy::{occupancy_from_policy, Occupancy};
use csapo::optimizer::{mixing_step, ProjectionDuals};
use csapo::{Kernel, LayeredSpace, Policy, StateActionTable};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.gen_range(1e-12f64..1.0).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

pub fn random_space<R: Rng>(rng: &mut R, max_layers: usize, max_states: usize, actions: usize) -> LayeredSpace {
    let horizon = rng.gen_range(1..=max_layers);
    let mut sizes = vec![1];
    for _ in 1..horizon {
        sizes.push(rng.gen_range(1..=max_states));
    }
    sizes.push(1);
    LayeredSpace::new(sizes, actions).unwrap()
}

pub fn random_kernel<R: Rng>(space: &LayeredSpace, rng: &mut R) -> Kernel {
    let mut p = space.zero_triples();
    for l in 0..space.horizon() {
        let next = space.layer_size(l + 1);
        for row in p[l].chunks_mut(next) {
            row.copy_from_slice(&simplex(next, rng));
        }
    }
    Kernel::new(space.clone(), p).unwrap()
}

pub fn random_policy<R: Rng>(space: &LayeredSpace, rng: &mut R) -> Policy {
    let a = space.actions();
    let mut pi = space.zero_pairs();
    for row in pi.iter_mut() {
        for chunk in row.chunks_mut(a) {
            chunk.copy_from_slice(&simplex(a, rng));
        }
    }
    Policy::new(space.clone(), pi).unwrap()
}

pub fn random_occupancy<R: Rng>(space: &LayeredSpace, rng: &mut R) -> Occupancy {
    occupancy_from_policy(&random_policy(space, rng), &random_kernel(space, rng)).unwrap()
}

pub fn random_table<R: Rng>(space: &LayeredSpace, lo: f64, hi: f64, rng: &mut R) -> StateActionTable {
    StateActionTable::from_fn(space, |_, _, _| rng.gen_range(lo..=hi))
}

/// Random confidence domain: some rows unvisited (zero center, width 2),
/// some centers with exact zeros, widths between 0.02 and 0.8.
pub fn random_domain<R: Rng>(space: &LayeredSpace, rng: &mut R) -> OccupancyDomain {
    let mut p_bar = space.zero_triples();
    let mut eps = space.zero_pairs();
    for l in 0..space.horizon() {
        let next = space.layer_size(l + 1);
        for (i, row) in p_bar[l].chunks_mut(next).enumerate() {
            if rng.gen_bool(0.15) {
                eps[l][i] = 2.0;
                continue;
            }
            let mut v = simplex(next, rng);
            if next > 1 && rng.gen_bool(0.2) {
                let j = rng.gen_range(0..next);
                v[j] = 0.0;
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
            }
            row.copy_from_slice(&v);
            eps[l][i] = rng.gen_range(0.02..0.8);
        }
    }
    OccupancyDomain::new(space.clone(), p_bar, eps).unwrap()
}

/// Unnormalized KL divergence `sum q ln(q/t) - q + t`.
pub fn kl(q: &[f64], t: &[f64]) -> f64 {
    q.iter()
        .zip(t)
        .map(|(&a, &b)| if a > 0.0 { a * (a / b).ln() - a + b } else { b })
        .sum()
}

/// Log-barrier interior-point solver for
/// `min KL(q || target)` over occupancies whose conditionals lie in the
/// L1 balls of `domain`, written explicitly with per-triple slacks:
///
/// ```text
/// q(x,a,x') - pbar q(x,a) <= s(x,a,x'),  pbar q(x,a) - q(x,a,x') <= s(x,a,x'),
/// sum_x' s(x,a,x') <= eps q(x,a),  mass of layer 0 = 1,  flow conservation.
/// ```
///
/// Returns the flattened optimal `q` (layer-major) and its objective value.
pub fn barrier_projection(space: &LayeredSpace, target: &[Vec<f64>], domain: &OccupancyDomain) -> (Vec<f64>, f64) {
    let horizon = space.horizon();
    let na = space.actions();
    let mut offsets = vec![0];
    for l in 0..horizon {
        offsets.push(offsets[l] + space.triple_len(l));
    }
    let nq = offsets[horizon];
    let nvar = 2 * nq;
    let t_flat: Vec<f64> = target.iter().flatten().copied().collect();

    // Inequalities a_i . z <= 0 (all homogeneous).
    let mut ineq: Vec<Vec<(usize, f64)>> = Vec::new();
    for l in 0..horizon {
        let next = space.layer_size(l + 1);
        for i in 0..space.pair_len(l) {
            let base = offsets[l] + i * next;
            let eps = domain.eps[l][i];
            for j in 0..next {
                let pb = domain.p_bar[l][i * next + j];
                let mut up = vec![(nq + base + j, -1.0)];
                let mut down = vec![(nq + base + j, -1.0)];
                for k in 0..next {
                    let coef = if k == j { 1.0 } else { 0.0 } - pb;
                    up.push((base + k, coef));
                    down.push((base + k, -coef));
                }
                ineq.push(up);
                ineq.push(down);
            }
            let mut budget: Vec<(usize, f64)> = (0..next).map(|k| (nq + base + k, 1.0)).collect();
            budget.extend((0..next).map(|k| (base + k, -eps)));
            ineq.push(budget);
        }
    }
    // Equalities: layer-0 mass and flow at interior states.
    let mut eq_rows: Vec<Vec<f64>> = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut row = vec![0.0; nvar];
    for k in 0..space.triple_len(0) {
        row[k] = 1.0;
    }
    eq_rows.push(row);
    eq_rhs.push(1.0);
    for l in 1..horizon {
        let n = space.layer_size(l);
        let next = space.layer_size(l + 1);
        let prev_next = n;
        for x in 0..n {
            let mut row = vec![0.0; nvar];
            for i in 0..space.pair_len(l - 1) {
                row[offsets[l - 1] + i * prev_next + x] += 1.0;
            }
            for a in 0..na {
                for j in 0..next {
                    row[offsets[l] + (x * na + a) * next + j] -= 1.0;
                }
            }
            eq_rows.push(row);
            eq_rhs.push(0.0);
        }
    }
    let neq = eq_rows.len();

    // Strictly feasible start: uniform policy with the centers as kernel.
    let mut z = vec![0.0; nvar];
    let mut d = vec![1.0];
    for l in 0..horizon {
        let next = space.layer_size(l + 1);
        let mut nd = vec![0.0; next];
        for x in 0..space.layer_size(l) {
            for a in 0..na {
                let i = x * na + a;
                let center = &domain.p_bar[l][i * next..(i + 1) * next];
                let mass: f64 = center.iter().sum();
                let qa = d[x] / na as f64;
                let blend = (domain.eps[l][i] / 4.0).min(0.5);
                for j in 0..next {
                    let uniform = 1.0 / next as f64;
                    let p = if mass > 0.5 {
                        (1.0 - blend) * center[j] + blend * uniform
                    } else {
                        uniform
                    };
                    z[offsets[l] + i * next + j] = qa * p;
                    nd[j] += qa * p;
                }
                let dev: Vec<f64> = (0..next)
                    .map(|j| (z[offsets[l] + i * next + j] - center[j] * qa).abs())
                    .collect();
                let spare = domain.eps[l][i] * qa - dev.iter().sum::<f64>();
                assert!(spare > 0.0, "start point not strictly feasible");
                for j in 0..next {
                    z[nq + offsets[l] + i * next + j] = dev[j] + spare / (2 * next) as f64;
                }
            }
        }
        d = nd;
    }

    let slack = |z: &[f64]| -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(ineq.len());
        for a in &ineq {
            let v: f64 = a.iter().map(|&(k, c)| c * z[k]).sum();
            if v >= 0.0 {
                return None;
            }
            out.push(-v);
        }
        if z[..nq].iter().any(|&q| q <= 0.0) {
            return None;
        }
        Some(out)
    };
    let barrier = |z: &[f64], t: f64| -> f64 {
        match slack(z) {
            None => f64::INFINITY,
            Some(s) => t * kl(&z[..nq], &t_flat) - s.iter().map(|v| v.ln()).sum::<f64>(),
        }
    };

    let m = ineq.len() as f64;
    let mut t = 1.0;
    while m / t > 1e-10 {
        for _ in 0..200 {
            let s = slack(&z).unwrap();
            let mut grad: DVector<f64> = DVector::zeros(nvar);
            let mut hess: DMatrix<f64> = DMatrix::zeros(nvar, nvar);
            for k in 0..nq {
                grad[k] += t * (z[k] / t_flat[k]).ln();
                hess[(k, k)] += t / z[k];
            }
            for (a, &sv) in ineq.iter().zip(&s) {
                for &(k, c) in a {
                    grad[k] += c / sv;
                }
                for &(k1, c1) in a {
                    for &(k2, c2) in a {
                        hess[(k1, k2)] += c1 * c2 / (sv * sv);
                    }
                }
            }
            let mut kkt: DMatrix<f64> = DMatrix::zeros(nvar + neq, nvar + neq);
            kkt.view_mut((0, 0), (nvar, nvar)).copy_from(&hess);
            for (r, row) in eq_rows.iter().enumerate() {
                for (k, &c) in row.iter().enumerate() {
                    kkt[(nvar + r, k)] = c;
                    kkt[(k, nvar + r)] = c;
                }
            }
            let mut rhs: DVector<f64> = DVector::zeros(nvar + neq);
            for k in 0..nvar {
                rhs[k] = -grad[k];
            }
            for (r, row) in eq_rows.iter().enumerate() {
                let v: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
                rhs[nvar + r] = eq_rhs[r] - v;
            }
            let sol = kkt.lu().solve(&rhs).expect("KKT system is singular");
            let dz: Vec<f64> = (0..nvar).map(|k| sol[k]).collect();
            let decrement: f64 = -(0..nvar).map(|k| grad[k] * dz[k]).sum::<f64>();
            if decrement.abs() < 1e-14 {
                break;
            }
            let f0 = barrier(&z, t);
            let mut step = 1.0;
            loop {
                let cand: Vec<f64> = z.iter().zip(&dz).map(|(a, b)| a + step * b).collect();
                let f = barrier(&cand, t);
                if f.is_finite() && f <= f0 - 0.25 * step * decrement {
                    z = cand;
                    break;
                }
                step *= 0.5;
                if step < 1e-16 {
                    break;
                }
            }
            if step < 1e-16 {
                break;
            }
        }
        t *= 10.0;
    }
    let q = z[..nq].to_vec();
    let obj = kl(&q, &t_flat);
    (q, obj)
}

/// A mixed occupancy, a loss, a step size and a domain for one projection.
pub struct ProjectionInstance {
    pub mixed: Occupancy,
    pub phi: StateActionTable,
    pub eta: f64,
    pub domain: OccupancyDomain,
}

/// Small random instance: at most 3 layers, 3 states per layer, 2 actions.
pub fn projection_instance(seed: u64) -> ProjectionInstance {
    let mut rng = rng(seed);
    let space = random_space(&mut rng, 3, 3, 2);
    let q = random_occupancy(&space, &mut rng);
    ProjectionInstance {
        mixed: mixing_step(&q, 0.1).unwrap(),
        phi: random_table(&space, -2.0, 2.0, &mut rng),
        eta: rng.gen_range(0.2..1.5),
        domain: random_domain(&space, &mut rng),
    }
}

pub fn random_duals(space: &LayeredSpace, rng: &mut impl Rng) -> ProjectionDuals {
    let mut d = ProjectionDuals::zeros(space);
    for l in 1..space.horizon() {
        for b in d.beta[l].iter_mut() {
            *b = rng.gen_range(-1.0..1.0);
        }
    }
    for v in d.mu_plus.iter_mut().flatten().chain(d.mu_minus.iter_mut().flatten()) {
        *v = rng.gen_range(0.0..1.0);
    }
    d
}
