//! The learning loop: per episode, a primal step for both players against
//! their optimistic domains, a multiplier update, play, and bookkeeping.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::confidence::{AdvanceRule, EpochState};
use crate::error::{Error, Result};
use crate::game::{derive_seed, sample_unchecked, stream_rng, LayeredGame, Trajectory};
use crate::occupancy::{linear_utility, policy_of, Occupancy};
use crate::optimizer::{primal_update, PrimalInputs, ProjectionDuals, SolverOptions, StepSizes};
use crate::space::{Policy, RewardTable, StateActionTable};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// One budget on the sum of both players' utilities, one shared multiplier.
    #[default]
    Coupled,
    /// A budget per player, one multiplier each.
    Side,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coupled" => Ok(Mode::Coupled),
            "side" => Ok(Mode::Side),
            other => Err(Error::InvalidParameter(format!(
                "unknown mode {other:?} (expected coupled or side)"
            ))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Coupled => "coupled",
            Mode::Side => "side",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Weight on the reward term of the losses.
    pub v: f64,
    /// Mirror-descent step size.
    pub eta: f64,
    /// Mixing weight toward the uniform occupancy.
    pub theta: f64,
    /// Confidence level of the transition estimates.
    pub delta: f64,
    pub advance_rule: AdvanceRule,
    pub solver: SolverOptions,
}

impl Params {
    /// `V = L sqrt(T)`, `eta = 1 / (T L)`, `theta = 1 / T`, `delta = 0.1`.
    pub fn theorem_defaults(horizon: usize, episodes: usize) -> Self {
        let (l, t) = (horizon as f64, episodes as f64);
        Params {
            v: l * t.sqrt(),
            eta: 1.0 / (t * l),
            theta: 1.0 / t,
            delta: 0.1,
            advance_rule: AdvanceRule::default(),
            solver: SolverOptions::default(),
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.v >= 0.0 && self.v.is_finite()) {
            return Err(Error::InvalidParameter(format!("V = {} must be non-negative", self.v)));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta = {} must be positive", self.eta)));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter(format!(
                "theta = {} outside [0, 1]",
                self.theta
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} outside (0, 1)",
                self.delta
            )));
        }
        Ok(())
    }

    fn steps(&self) -> StepSizes {
        StepSizes {
            v: self.v,
            eta: self.eta,
            theta: self.theta,
        }
    }
}

/// `max(lambda + <q1, g> + <q2, h> - b, 0)`.
pub fn dual_update(
    lambda: f64,
    q1: &Occupancy,
    q2: &Occupancy,
    g: &StateActionTable,
    h: &StateActionTable,
    budget: f64,
) -> Result<f64> {
    let excess = linear_utility(q1, g)? + linear_utility(q2, h)? - budget;
    Ok((lambda + excess).max(0.0))
}

/// Per-player `max(lambda_i + <q_i, u_i> - b_i, 0)`.
#[allow(clippy::too_many_arguments)]
pub fn dual_update_side(
    lambda: (f64, f64),
    q1: &Occupancy,
    q2: &Occupancy,
    g: &StateActionTable,
    h: &StateActionTable,
    budgets: (f64, f64),
) -> Result<(f64, f64)> {
    Ok((
        (lambda.0 + linear_utility(q1, g)? - budgets.0).max(0.0),
        (lambda.1 + linear_utility(q2, h)? - budgets.1).max(0.0),
    ))
}

/// The learner's iterate between episodes.
#[derive(Clone, Debug)]
pub struct LearnerState {
    pub q1: Occupancy,
    pub q2: Occupancy,
    /// `(lambda, lambda)` in the coupled mode, `(lambda1, lambda2)` in the side mode.
    pub lambda: (f64, f64),
    pub epochs1: EpochState,
    pub epochs2: EpochState,
    pub duals1: Option<ProjectionDuals>,
    pub duals2: Option<ProjectionDuals>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub residual: f64,
    pub dual_value: f64,
}

/// Everything observed in one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord {
    pub t: usize,
    pub policy1: Policy,
    pub policy2: Policy,
    pub trajectory1: Trajectory,
    pub trajectory2: Trajectory,
    /// Multiplier(s) after this episode's update.
    pub lambda: (f64, f64),
    /// Epoch indices in force while the episode was played.
    pub epoch1: usize,
    pub epoch2: usize,
    /// Realized trajectory utilities `sum_l g^t(x_l, a_l)` and `sum_l h^t(y_l, b_l)`.
    pub realized_utility: (f64, f64),
    pub solver: (SolverStats, SolverStats),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeLog {
    pub mode: Mode,
    pub params: Params,
    pub episodes: usize,
    pub seed: u64,
    /// Seed of the utility-noise sequence (derived from `seed`).
    pub noise_seed: u64,
    pub records: Vec<EpisodeRecord>,
    /// Estimated occupancies `(qhat1^t, qhat2^t)` per episode, when kept.
    pub estimates: Option<Vec<(Occupancy, Occupancy)>>,
}

impl EpisodeLog {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep `(qhat1^t, qhat2^t)` for every episode.
    pub keep_estimates: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { keep_estimates: true }
    }
}

/// Stream tags for the sub-seeds of one run.
const TRAJECTORY_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

pub fn noise_seed_for(seed: u64) -> u64 {
    derive_seed(seed, NOISE_STREAM)
}

fn trajectory_utility(u: &StateActionTable, traj: &Trajectory) -> f64 {
    (0..traj.horizon())
        .map(|l| u.get(l, traj.states[l], traj.actions[l]))
        .sum()
}

/// Runs `episodes` episodes of the learner on `game`.
pub fn run_ucb_csapo(
    game: &LayeredGame,
    params: &Params,
    episodes: usize,
    seed: u64,
    mode: Mode,
    options: &RunOptions,
) -> Result<EpisodeLog> {
    params.check()?;
    if episodes == 0 {
        return Err(Error::InvalidParameter("episode count must be positive".into()));
    }
    let budgets = match mode {
        Mode::Coupled => (game.budget, game.budget),
        Mode::Side => game
            .side_budgets
            .ok_or_else(|| Error::InvalidParameter("side mode needs per-player budgets in the game".into()))?,
    };
    let (sx, sy) = (game.min_space(), game.max_space());
    let mut state = LearnerState {
        q1: Occupancy::uniform(sx),
        q2: Occupancy::uniform(sy),
        lambda: (0.0, 0.0),
        epochs1: EpochState::new(sx, episodes, params.delta, params.advance_rule)?,
        epochs2: EpochState::new(sy, episodes, params.delta, params.advance_rule)?,
        duals1: None,
        duals2: None,
    };
    let cap1 = state.epochs1.epoch_cap();
    let cap2 = state.epochs2.epoch_cap();
    let noise_seed = noise_seed_for(seed);
    let mut rng = stream_rng(derive_seed(seed, TRAJECTORY_STREAM), 0);

    // Functions revealed by the previous episode; zero before the first.
    let mut prev_r = RewardTable::constant(sx, sy, 0.0)?;
    let mut prev_g = StateActionTable::zeros(sx);
    let mut prev_h = StateActionTable::zeros(sy);

    let mut records = Vec::with_capacity(episodes);
    let mut estimates = options.keep_estimates.then(|| Vec::with_capacity(episodes));
    for t in 1..=episodes {
        let step = (|| -> Result<EpisodeRecord> {
            let domain1 = state.epochs1.domain();
            let domain2 = state.epochs2.domain();
            let (u1, u2) = primal_update(&PrimalInputs {
                q1: &state.q1,
                q2: &state.q2,
                r: &prev_r,
                g: &prev_g,
                h: &prev_h,
                lambda: state.lambda,
                steps: params.steps(),
                domain1: &domain1,
                domain2: &domain2,
                warm1: state.duals1.as_ref(),
                warm2: state.duals2.as_ref(),
                options: &params.solver,
            })?;
            state.lambda = match mode {
                Mode::Coupled => {
                    let l = dual_update(state.lambda.0, &u1.q, &u2.q, &prev_g, &prev_h, game.budget)?;
                    (l, l)
                }
                Mode::Side => dual_update_side(state.lambda, &u1.q, &u2.q, &prev_g, &prev_h, budgets)?,
            };
            let policy1 = policy_of(&u1.q);
            let policy2 = policy_of(&u2.q);
            let trajectory1 = sample_unchecked(&policy1, &game.min_player.kernel, &mut rng);
            let trajectory2 = sample_unchecked(&policy2, &game.max_player.kernel, &mut rng);
            let real = game.realize_functions(t, noise_seed);
            let realized_utility = (
                trajectory_utility(&real.g, &trajectory1),
                trajectory_utility(&real.h, &trajectory2),
            );
            let record = EpisodeRecord {
                t,
                policy1,
                policy2,
                trajectory1,
                trajectory2,
                lambda: state.lambda,
                epoch1: state.epochs1.epoch(),
                epoch2: state.epochs2.epoch(),
                realized_utility,
                solver: (stats(&u1.diagnostics), stats(&u2.diagnostics)),
            };
            state.epochs1.record_trajectory(&record.trajectory1)?;
            state.epochs2.record_trajectory(&record.trajectory2)?;
            for (epochs, cap) in [(&mut state.epochs1, cap1), (&mut state.epochs2, cap2)] {
                if epochs.should_advance() {
                    epochs.advance_epoch()?;
                    if epochs.epoch() as f64 > cap {
                        return Err(Error::EpochCap {
                            epochs: epochs.epoch(),
                            cap,
                        });
                    }
                }
            }
            prev_r = real.r.into_owned();
            prev_g = real.g;
            prev_h = real.h;
            state.duals1 = Some(u1.duals);
            state.duals2 = Some(u2.duals);
            if let Some(est) = estimates.as_mut() {
                est.push((u1.q.clone(), u2.q.clone()));
            }
            state.q1 = u1.q;
            state.q2 = u2.q;
            Ok(record)
        })();
        records.push(step.map_err(|e| Error::Episode {
            episode: t,
            source: Box::new(e),
        })?);
    }
    Ok(EpisodeLog {
        mode,
        params: *params,
        episodes,
        seed,
        noise_seed,
        records,
        estimates,
    })
}

fn stats(d: &crate::optimizer::SolverDiagnostics) -> SolverStats {
    SolverStats {
        iterations: d.iterations,
        residual: d.residual,
        dual_value: d.dual_value,
    }
}

/// Draws a random episode seed; convenience for callers that do not care.
pub fn random_seed<R: Rng>(rng: &mut R) -> u64 {
    rng.gen()
}
