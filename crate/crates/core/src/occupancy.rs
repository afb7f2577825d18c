//! Occupancy measures `q(x, a, x')` over layered MDPs: validity, conversions
//! to and from `(policy, transition)` pairs, and the reward/utility functionals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Kernel, LayeredSpace, Policy, RewardTable, StateActionTable};

/// Residual tolerance for the occupancy conditions.
pub const VALIDITY_TOLERANCE: f64 = 1e-9;
/// Denominators below this are treated as zero in [`policy_of`] / [`transition_of`].
pub const DENOMINATOR_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Occupancy {
    space: LayeredSpace,
    q: Vec<Vec<f64>>,
}

impl Occupancy {
    pub fn new(space: LayeredSpace, q: Vec<Vec<f64>>) -> Result<Self> {
        check_triple_shape(&space, &q)?;
        Ok(Occupancy { space, q })
    }

    pub(crate) fn from_raw(space: LayeredSpace, q: Vec<Vec<f64>>) -> Self {
        Occupancy { space, q }
    }

    /// `q(x, a, x') = 1 / (|X_l| |A| |X_{l+1}|)`.
    pub fn uniform(space: &LayeredSpace) -> Self {
        let q = (0..space.horizon())
            .map(|l| vec![1.0 / space.triple_len(l) as f64; space.triple_len(l)])
            .collect();
        Occupancy {
            space: space.clone(),
            q,
        }
    }

    pub fn space(&self) -> &LayeredSpace {
        &self.space
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.q
    }

    pub fn get(&self, layer: usize, x: usize, a: usize, next: usize) -> f64 {
        self.q[layer][self.space.triple_index(layer, x, a, next)]
    }

    /// `q(x, a) = sum_{x'} q(x, a, x')`.
    pub fn pair(&self, layer: usize, x: usize, a: usize) -> f64 {
        let n = self.space.layer_size(layer + 1);
        let start = self.space.triple_index(layer, x, a, 0);
        self.q[layer][start..start + n].iter().sum()
    }

    /// All `(x, a)` marginals as per-layer pair tables.
    pub fn pair_marginals(&self) -> Vec<Vec<f64>> {
        pair_marginals(&self.space, &self.q)
    }

    /// State visitation `d(x)` for every layer including the terminal one.
    pub fn state_distribution(&self) -> Vec<Vec<f64>> {
        let s = &self.space;
        let mut d: Vec<Vec<f64>> = s.layer_sizes().iter().map(|&n| vec![0.0; n]).collect();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for (i, &v) in self.q[l].iter().enumerate() {
                d[l][i / (s.actions() * next)] += v;
                d[l + 1][i % next] += v;
            }
        }
        // Layer l's mass was counted from both sides except at the ends.
        for layer in d.iter_mut().take(s.horizon()).skip(1) {
            for v in layer.iter_mut() {
                *v *= 0.5;
            }
        }
        d
    }

    /// `alpha * self + (1 - alpha) * other`.
    pub fn mix(&self, alpha: f64, other: &Occupancy) -> Occupancy {
        debug_assert_eq!(self.space, other.space);
        let q = self
            .q
            .iter()
            .zip(&other.q)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect())
            .collect();
        Occupancy {
            space: self.space.clone(),
            q,
        }
    }

    pub fn l1_distance(&self, other: &Occupancy) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .sum()
    }

    pub fn max_abs_difference(&self, other: &Occupancy) -> f64 {
        self.q
            .iter()
            .zip(&other.q)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> ValidityReport {
        validity_residuals(&self.space, &self.q)
    }

    /// Debug dump with columns `layer,x,a,x_next,value`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["layer", "x", "a", "x_next", "value"])?;
        let s = &self.space;
        for l in 0..s.horizon() {
            for x in 0..s.layer_size(l) {
                for a in 0..s.actions() {
                    for n in 0..s.layer_size(l + 1) {
                        w.write_record([
                            l.to_string(),
                            x.to_string(),
                            a.to_string(),
                            n.to_string(),
                            format!("{:e}", self.get(l, x, a, n)),
                        ])?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io("<occupancy csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(space: &LayeredSpace, input: R) -> Result<Occupancy> {
        let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
        let mut q = space.zero_triples();
        for rec in r.deserialize::<(usize, usize, usize, usize, f64)>() {
            let (l, x, a, n, v) = rec?;
            if l >= space.horizon() || x >= space.layer_size(l) || a >= space.actions() || n >= space.layer_size(l + 1)
            {
                return Err(Error::ShapeMismatch(format!(
                    "occupancy csv entry ({l},{x},{a},{n}) outside the space"
                )));
            }
            q[l][space.triple_index(l, x, a, n)] = v;
        }
        Ok(Occupancy {
            space: space.clone(),
            q,
        })
    }
}

fn check_triple_shape(space: &LayeredSpace, q: &[Vec<f64>]) -> Result<()> {
    if q.len() != space.horizon() || q.iter().enumerate().any(|(l, r)| r.len() != space.triple_len(l)) {
        return Err(Error::ShapeMismatch(format!(
            "occupancy table does not match layers {:?} with {} actions",
            space.layer_sizes(),
            space.actions()
        )));
    }
    Ok(())
}

pub(crate) fn pair_marginals(space: &LayeredSpace, q: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..space.horizon())
        .map(|l| {
            let next = space.layer_size(l + 1);
            q[l].chunks(next).map(|c| c.iter().sum()).collect()
        })
        .collect()
}

/// Residuals of the per-layer mass condition and the flow-conservation condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidityReport {
    /// `|sum_{x,a,x'} q(x,a,x') - 1|` per decision layer.
    pub layer_mass: Vec<f64>,
    /// `|inflow(x') - outflow(x')|` for each interior layer `1..L-1`, per state.
    pub flow: Vec<Vec<f64>>,
    /// Most negative entry (0 if none).
    pub min_entry: f64,
}

impl ValidityReport {
    pub fn max_mass_residual(&self) -> f64 {
        self.layer_mass.iter().copied().fold(0.0, f64::max)
    }

    pub fn max_flow_residual(&self) -> f64 {
        self.flow.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.max_mass_residual()
            .max(self.max_flow_residual())
            .max(-self.min_entry)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// Residual report for a raw triple table; errors when the shape does not match.
pub fn validate(space: &LayeredSpace, q: &[Vec<f64>]) -> Result<ValidityReport> {
    check_triple_shape(space, q)?;
    Ok(validity_residuals(space, q))
}

fn validity_residuals(space: &LayeredSpace, q: &[Vec<f64>]) -> ValidityReport {
    let layer_mass = q.iter().map(|row| (row.iter().sum::<f64>() - 1.0).abs()).collect();
    let mut flow = Vec::new();
    for l in 1..space.horizon() {
        let n = space.layer_size(l);
        let mut inflow = vec![0.0; n];
        for (i, &v) in q[l - 1].iter().enumerate() {
            inflow[i % n] += v;
        }
        let per_state = space.actions() * space.layer_size(l + 1);
        let outflow: Vec<f64> = q[l].chunks(per_state).map(|c| c.iter().sum()).collect();
        flow.push(inflow.iter().zip(&outflow).map(|(i, o)| (i - o).abs()).collect());
    }
    let min_entry = q.iter().flatten().copied().fold(0.0, f64::min);
    ValidityReport {
        layer_mass,
        flow,
        min_entry,
    }
}

/// Forward recursion `d(x_0) = 1`, `q(x,a,x') = d(x) pi(a|x) P(x'|x,a)`.
pub fn occupancy_from_policy(policy: &Policy, kernel: &Kernel) -> Result<Occupancy> {
    let space = kernel.space();
    if policy.space() != space {
        return Err(Error::ShapeMismatch("policy and kernel spaces differ".into()));
    }
    let mut q = space.zero_triples();
    let mut d = vec![1.0];
    for l in 0..space.horizon() {
        let next_n = space.layer_size(l + 1);
        let mut next = vec![0.0; next_n];
        for (x, &dx) in d.iter().enumerate() {
            for a in 0..space.actions() {
                let w = dx * policy.prob(l, x, a);
                let row = kernel.row(l, x, a);
                let base = space.triple_index(l, x, a, 0);
                for (n, &p) in row.iter().enumerate() {
                    let v = w * p;
                    q[l][base + n] = v;
                    next[n] += v;
                }
            }
        }
        d = next;
    }
    Ok(Occupancy::from_raw(space.clone(), q))
}

/// `pi(a|x) = q(x,a) / sum_b q(x,b)`, uniform where the state carries no mass.
pub fn policy_of(q: &Occupancy) -> Policy {
    let space = q.space();
    let na = space.actions();
    let marg = q.pair_marginals();
    let mut pi = space.zero_pairs();
    for l in 0..space.horizon() {
        for x in 0..space.layer_size(l) {
            let row = &marg[l][x * na..(x + 1) * na];
            let total: f64 = row.iter().sum();
            for a in 0..na {
                pi[l][x * na + a] = if total < DENOMINATOR_FLOOR {
                    1.0 / na as f64
                } else {
                    row[a] / total
                };
            }
        }
    }
    Policy::new(space.clone(), pi).expect("shape follows the occupancy")
}

/// `P(x'|x,a) = q(x,a,x') / q(x,a)`, uniform where `(x,a)` carries no mass.
pub fn transition_of(q: &Occupancy) -> Kernel {
    let space = q.space();
    let mut p = space.zero_triples();
    for l in 0..space.horizon() {
        let next = space.layer_size(l + 1);
        for (src, dst) in q.layers()[l].chunks(next).zip(p[l].chunks_mut(next)) {
            let total: f64 = src.iter().sum();
            if total < DENOMINATOR_FLOOR {
                dst.fill(1.0 / next as f64);
            } else {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d = s / total;
                }
            }
        }
    }
    Kernel::from_raw(space.clone(), p)
}

/// `sum_l sum_{x,y,a,b} q1(x,a) q2(y,b) r(x,y,a,b)`.
pub fn bilinear_reward(q1: &Occupancy, q2: &Occupancy, r: &RewardTable) -> Result<f64> {
    if r.min_space() != q1.space() || r.max_space() != q2.space() {
        return Err(Error::ShapeMismatch(
            "reward table does not match the occupancy spaces".into(),
        ));
    }
    Ok(bilinear_pairs(&q1.pair_marginals(), &q2.pair_marginals(), r))
}

pub(crate) fn bilinear_pairs(m1: &[Vec<f64>], m2: &[Vec<f64>], r: &RewardTable) -> f64 {
    let loss = r.contract_max(m2);
    dot_pairs(m1, loss.layers())
}

/// `sum_l sum_{x,a} q(x,a) u(x,a)`.
pub fn linear_utility(q: &Occupancy, u: &StateActionTable) -> Result<f64> {
    if u.space() != q.space() {
        return Err(Error::ShapeMismatch(
            "utility table does not match the occupancy space".into(),
        ));
    }
    Ok(dot_pairs(&q.pair_marginals(), u.layers()))
}

pub(crate) fn dot_pairs(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .sum()
}
