//! Epoch-based transition estimates and the optimistic occupancy domain.
//!
//! Visits are counted per epoch; when some pair's in-epoch count catches up
//! with its count from all previous epochs the epoch closes, the counts are
//! folded in and the empirical kernel and L1 confidence widths are refreshed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::Trajectory;
use crate::occupancy::{Occupancy, ValidityReport, DENOMINATOR_FLOOR};
use crate::space::{Kernel, LayeredSpace};

/// Widths are clipped to the L1 diameter of the simplex.
pub const MAX_WIDTH: f64 = 2.0;

/// When an epoch closes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdvanceRule {
    /// Some pair has `n >= N`. Pairs never visited before trigger on every
    /// check, so epochs close every episode while any pair is unvisited and
    /// the epoch cap can be exceeded when some pair is rarely reached.
    CountReachesPrior,
    /// Some pair has `n >= max(1, N)`: an unvisited pair triggers once, on its
    /// first visit.
    #[default]
    FirstVisitOrDoubling,
}

/// `sqrt(2 |X_{l+1}| ln(T |A| |X| / delta) / max(1, N))`, unclipped.
pub fn confidence_width(
    next_layer_size: usize,
    count: u64,
    episodes: usize,
    actions: usize,
    states: usize,
    delta: f64,
) -> f64 {
    let log_term = (episodes as f64 * actions as f64 * states as f64 / delta).ln();
    (2.0 * next_layer_size as f64 * log_term / count.max(1) as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochState {
    space: LayeredSpace,
    epoch: usize,
    /// In-epoch counts `n(x,a)` and `m(x,a,x')`.
    n: Vec<Vec<u64>>,
    m: Vec<Vec<u64>>,
    /// Counts from all closed epochs, `N(x,a)` and `M(x,a,x')`.
    big_n: Vec<Vec<u64>>,
    big_m: Vec<Vec<u64>>,
    p_bar: Vec<Vec<f64>>,
    eps: Vec<Vec<f64>>,
    episodes: usize,
    delta: f64,
    rule: AdvanceRule,
}

impl EpochState {
    /// Fresh state in epoch 1 for a run of `episodes` episodes.
    pub fn new(space: &LayeredSpace, episodes: usize, delta: f64, rule: AdvanceRule) -> Result<Self> {
        if episodes == 0 {
            return Err(Error::InvalidParameter("episode count must be positive".into()));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
        }
        let zeros_p: Vec<Vec<u64>> = (0..space.horizon()).map(|l| vec![0; space.pair_len(l)]).collect();
        let zeros_t: Vec<Vec<u64>> = (0..space.horizon()).map(|l| vec![0; space.triple_len(l)]).collect();
        let mut state = EpochState {
            space: space.clone(),
            epoch: 1,
            n: zeros_p.clone(),
            m: zeros_t.clone(),
            big_n: zeros_p,
            big_m: zeros_t,
            p_bar: space.zero_triples(),
            eps: space.zero_pairs(),
            episodes,
            delta,
            rule,
        };
        state.refresh();
        Ok(state)
    }

    pub fn space(&self) -> &LayeredSpace {
        &self.space
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn rule(&self) -> AdvanceRule {
        self.rule
    }

    pub fn in_epoch_count(&self, layer: usize, x: usize, a: usize) -> u64 {
        self.n[layer][self.space.pair_index(layer, x, a)]
    }

    pub fn prior_count(&self, layer: usize, x: usize, a: usize) -> u64 {
        self.big_n[layer][self.space.pair_index(layer, x, a)]
    }

    pub fn in_epoch_transitions(&self) -> &[Vec<u64>] {
        &self.m
    }

    pub fn prior_transitions(&self) -> &[Vec<u64>] {
        &self.big_m
    }

    pub fn in_epoch_counts(&self) -> &[Vec<u64>] {
        &self.n
    }

    pub fn prior_counts(&self) -> &[Vec<u64>] {
        &self.big_n
    }

    /// Empirical kernel `M / max(1, N)` as of the last epoch change; rows of
    /// unvisited pairs are zero.
    pub fn empirical_kernel(&self) -> &[Vec<f64>] {
        &self.p_bar
    }

    /// Clipped widths `eps(x, a)`.
    pub fn widths(&self) -> &[Vec<f64>] {
        &self.eps
    }

    pub fn width(&self, layer: usize, x: usize, a: usize) -> f64 {
        self.eps[layer][self.space.pair_index(layer, x, a)]
    }

    pub fn record_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        let s = &self.space;
        if traj.actions.len() != s.horizon() || traj.states.len() != s.horizon() + 1 {
            return Err(Error::ShapeMismatch(
                "trajectory length does not match the horizon".into(),
            ));
        }
        for l in 0..s.horizon() {
            let (x, a, next) = (traj.states[l], traj.actions[l], traj.states[l + 1]);
            if x >= s.layer_size(l) || a >= s.actions() || next >= s.layer_size(l + 1) {
                return Err(Error::ShapeMismatch(format!("trajectory step {l} leaves the space")));
            }
            self.n[l][s.pair_index(l, x, a)] += 1;
            self.m[l][s.triple_index(l, x, a, next)] += 1;
        }
        Ok(())
    }

    pub fn should_advance(&self) -> bool {
        let floor = match self.rule {
            AdvanceRule::CountReachesPrior => 0,
            AdvanceRule::FirstVisitOrDoubling => 1,
        };
        self.n
            .iter()
            .flatten()
            .zip(self.big_n.iter().flatten())
            .any(|(&n, &big)| n >= big.max(floor))
    }

    pub fn advance_epoch(&mut self) -> Result<()> {
        if !self.should_advance() {
            return Err(Error::ContractViolation(
                "advance_epoch called while no pair met the doubling condition".into(),
            ));
        }
        for (big, small) in self.big_n.iter_mut().flatten().zip(self.n.iter_mut().flatten()) {
            *big += *small;
            *small = 0;
        }
        for (big, small) in self.big_m.iter_mut().flatten().zip(self.m.iter_mut().flatten()) {
            *big += *small;
            *small = 0;
        }
        self.epoch += 1;
        self.refresh();
        Ok(())
    }

    fn refresh(&mut self) {
        let s = &self.space;
        let states = s.state_count();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for i in 0..s.pair_len(l) {
                let count = self.big_n[l][i];
                let denom = count.max(1) as f64;
                for j in 0..next {
                    self.p_bar[l][i * next + j] = self.big_m[l][i * next + j] as f64 / denom;
                }
                self.eps[l][i] =
                    confidence_width(next, count, self.episodes, s.actions(), states, self.delta).min(MAX_WIDTH);
            }
        }
    }

    /// Snapshot of the current optimistic domain.
    pub fn domain(&self) -> OccupancyDomain {
        OccupancyDomain {
            space: self.space.clone(),
            p_bar: self.p_bar.clone(),
            eps: self.eps.clone(),
        }
    }

    /// `|X| |A| log2(8T / (|X| |A|)) + |X| |A|`, the largest epoch count the
    /// doubling rule can produce over the run.
    pub fn epoch_cap(&self) -> f64 {
        epoch_cap(&self.space, self.episodes)
    }
}

pub fn epoch_cap(space: &LayeredSpace, episodes: usize) -> f64 {
    let xa = (space.state_count() * space.actions()) as f64;
    xa * (8.0 * episodes as f64 / xa).log2() + xa
}

/// Occupancies whose conditionals stay within `eps(x, a)` (L1) of `p_bar`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyDomain {
    pub space: LayeredSpace,
    pub p_bar: Vec<Vec<f64>>,
    pub eps: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DomainReport {
    pub validity: ValidityReport,
    /// `max(0, ||q(.|x,a) - p_bar(.|x,a)||_1 - eps(x,a))` per pair.
    pub confidence: Vec<Vec<f64>>,
}

impl DomainReport {
    pub fn max_confidence_residual(&self) -> f64 {
        self.confidence.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn max_residual(&self) -> f64 {
        self.validity.max_residual().max(self.max_confidence_residual())
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

impl OccupancyDomain {
    pub fn new(space: LayeredSpace, p_bar: Vec<Vec<f64>>, eps: Vec<Vec<f64>>) -> Result<Self> {
        let triples_ok =
            p_bar.len() == space.horizon() && p_bar.iter().enumerate().all(|(l, r)| r.len() == space.triple_len(l));
        let pairs_ok =
            eps.len() == space.horizon() && eps.iter().enumerate().all(|(l, r)| r.len() == space.pair_len(l));
        if !triples_ok || !pairs_ok {
            return Err(Error::ShapeMismatch("domain tables do not match the space".into()));
        }
        if eps.iter().flatten().any(|&e| !(e >= 0.0)) {
            return Err(Error::InvalidParameter("confidence widths must be non-negative".into()));
        }
        Ok(OccupancyDomain { space, p_bar, eps })
    }

    /// The single-kernel domain `{P}` (zero widths).
    pub fn point(kernel: &Kernel) -> Self {
        let space = kernel.space().clone();
        OccupancyDomain {
            eps: space.zero_pairs(),
            p_bar: kernel.layers().to_vec(),
            space,
        }
    }

    /// Domain that constrains nothing beyond the occupancy conditions.
    pub fn vacuous(kernel: &Kernel) -> Self {
        let space = kernel.space().clone();
        OccupancyDomain {
            eps: (0..space.horizon())
                .map(|l| vec![MAX_WIDTH; space.pair_len(l)])
                .collect(),
            p_bar: kernel.layers().to_vec(),
            space,
        }
    }

    pub fn width(&self, layer: usize, x: usize, a: usize) -> f64 {
        self.eps[layer][self.space.pair_index(layer, x, a)]
    }

    pub fn row(&self, layer: usize, x: usize, a: usize) -> &[f64] {
        let n = self.space.layer_size(layer + 1);
        let start = self.space.triple_index(layer, x, a, 0);
        &self.p_bar[layer][start..start + n]
    }

    /// Whether every row of `kernel` lies in its confidence ball.
    pub fn contains_kernel(&self, kernel: &Kernel) -> bool {
        self.kernel_excess(kernel) <= 0.0
    }

    /// Largest `||P(.|x,a) - p_bar(.|x,a)||_1 - eps(x,a)` over all pairs.
    pub fn kernel_excess(&self, kernel: &Kernel) -> f64 {
        let s = &self.space;
        let mut worst = f64::NEG_INFINITY;
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            for (i, (p, pb)) in kernel.layers()[l]
                .chunks(next)
                .zip(self.p_bar[l].chunks(next))
                .enumerate()
            {
                let dist: f64 = p.iter().zip(pb).map(|(a, b)| (a - b).abs()).sum();
                worst = worst.max(dist - self.eps[l][i]);
            }
        }
        worst
    }

    /// Residuals of the occupancy conditions and the confidence condition.
    pub fn contains(&self, q: &Occupancy) -> DomainReport {
        let s = &self.space;
        let mut confidence = s.zero_pairs();
        for l in 0..s.horizon() {
            let next = s.layer_size(l + 1);
            let uniform = 1.0 / next as f64;
            for (i, (row, pb)) in q.layers()[l].chunks(next).zip(self.p_bar[l].chunks(next)).enumerate() {
                let total: f64 = row.iter().sum();
                let dist: f64 = if total < DENOMINATOR_FLOOR {
                    pb.iter().map(|b| (uniform - b).abs()).sum()
                } else {
                    row.iter().zip(pb).map(|(a, b)| (a / total - b).abs()).sum()
                };
                confidence[l][i] = (dist - self.eps[l][i]).max(0.0);
            }
        }
        DomainReport {
            validity: q.validate(),
            confidence,
        }
    }
}
