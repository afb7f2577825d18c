//! Post-hoc evaluation of a run: regret against the comparator, constraint
//! violation, the estimation-error decomposition, and log-log rate fits.
//!
//! Every quantity uses the occupancies the played policies induce under the
//! true kernels, recomputed from the log.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::LayeredGame;
use crate::hindsight::{Budget, SaddleSolution};
use crate::lagrangian::{EpisodeLog, Mode};
use crate::occupancy::{bilinear_reward, linear_utility, occupancy_from_policy, Occupancy};

/// Per-episode terms and their running sums.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub terms: Vec<f64>,
    pub cumulative: Vec<f64>,
}

impl MetricSeries {
    pub fn from_terms(terms: Vec<f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = terms
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        MetricSeries { terms, cumulative }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Final cumulative value (0 for an empty series).
    pub fn total(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// `max(cumulative, 0)` per episode.
    pub fn positive_part(&self) -> Vec<f64> {
        self.cumulative.iter().map(|v| v.max(0.0)).collect()
    }
}

/// True-kernel occupancies of the played policies, one pair per episode.
pub fn played_occupancies(log: &EpisodeLog, game: &LayeredGame) -> Result<Vec<(Occupancy, Occupancy)>> {
    log.records
        .iter()
        .map(|rec| {
            Ok((
                occupancy_from_policy(&rec.policy1, &game.min_player.kernel)?,
                occupancy_from_policy(&rec.policy2, &game.max_player.kernel)?,
            ))
        })
        .collect()
}

fn regret_terms(
    played: &[(Occupancy, Occupancy)],
    comparator: &SaddleSolution,
    game: &LayeredGame,
) -> Result<Vec<f64>> {
    played
        .iter()
        .enumerate()
        .map(|(i, (q1, q2))| {
            let r = game.reward.table_at(i + 1);
            Ok(bilinear_reward(q1, &comparator.q2, &r)? - bilinear_reward(&comparator.q1, q2, &r)?)
        })
        .collect()
}

/// `sum_t <q1^t q2*, r^t> - <q1* q2^t, r^t>`.
pub fn regret(log: &EpisodeLog, comparator: &SaddleSolution, game: &LayeredGame) -> Result<MetricSeries> {
    Ok(MetricSeries::from_terms(regret_terms(
        &played_occupancies(log, game)?,
        comparator,
        game,
    )?))
}

/// Constraint excess per constraint: one series in the coupled mode, one
/// per player in the side mode. The violation is the positive part of the
/// cumulative sums.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViolationSeries {
    /// Excess measured with the realized utilities of each episode.
    pub realized: Vec<MetricSeries>,
    /// Excess measured with the utility means.
    pub mean_variant: Vec<MetricSeries>,
}

impl ViolationSeries {
    /// Realized violation per episode of constraint `k`.
    pub fn violation(&self, k: usize) -> Vec<f64> {
        self.realized[k].positive_part()
    }

    pub fn final_violation(&self, k: usize) -> f64 {
        self.realized[k].total().max(0.0)
    }
}

fn excess(mode: Mode, game: &LayeredGame, u1: f64, u2: f64) -> Result<Vec<f64>> {
    match mode {
        Mode::Coupled => Ok(vec![u1 + u2 - game.budget]),
        Mode::Side => {
            let (b1, b2) = game
                .side_budgets
                .ok_or_else(|| Error::InvalidParameter("side mode needs per-player budgets in the game".into()))?;
            Ok(vec![u1 - b1, u2 - b2])
        }
    }
}

fn violation_from(played: &[(Occupancy, Occupancy)], log: &EpisodeLog, game: &LayeredGame) -> Result<ViolationSeries> {
    let k = if log.mode == Mode::Side { 2 } else { 1 };
    let mut realized = vec![Vec::with_capacity(played.len()); k];
    let mut mean = vec![Vec::with_capacity(played.len()); k];
    let (g, h) = (&game.min_player.utility_mean, &game.max_player.utility_mean);
    for (i, (q1, q2)) in played.iter().enumerate() {
        let real = game.realize_functions(i + 1, log.noise_seed);
        let ex = excess(
            log.mode,
            game,
            linear_utility(q1, &real.g)?,
            linear_utility(q2, &real.h)?,
        )?;
        let ex_mean = excess(log.mode, game, linear_utility(q1, g)?, linear_utility(q2, h)?)?;
        for j in 0..k {
            realized[j].push(ex[j]);
            mean[j].push(ex_mean[j]);
        }
    }
    Ok(ViolationSeries {
        realized: realized.into_iter().map(MetricSeries::from_terms).collect(),
        mean_variant: mean.into_iter().map(MetricSeries::from_terms).collect(),
    })
}

/// Violation of the run's budget(s), realized and mean-utility forms.
pub fn violation(log: &EpisodeLog, game: &LayeredGame) -> Result<ViolationSeries> {
    violation_from(&played_occupancies(log, game)?, log, game)
}

/// Regret and violation split into the learner's own estimated terms and
/// the estimation errors of its occupancies.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    /// `<qhat1^t q2* - q1* qhat2^t, r^t>`.
    pub hat_regret: MetricSeries,
    /// `<(q1^t - qhat1^t) q2*, r^t>`.
    pub err1: MetricSeries,
    /// `<q1* (qhat2^t - q2^t), r^t>`.
    pub err2: MetricSeries,
    /// `<q1^t - qhat1^t, g^t>`.
    pub err3: MetricSeries,
    /// `<q2^t - qhat2^t, h^t>`.
    pub err4: MetricSeries,
    /// Constraint excess of the estimated occupancies, per constraint.
    pub hat_violation: Vec<MetricSeries>,
    /// `||qhat_i^t - q_i^t||_1` for each player.
    pub estimation_l1: (MetricSeries, MetricSeries),
}

fn decomposition_from(
    played: &[(Occupancy, Occupancy)],
    log: &EpisodeLog,
    comparator: &SaddleSolution,
    game: &LayeredGame,
) -> Result<Decomposition> {
    let estimates = log
        .estimates
        .as_ref()
        .ok_or_else(|| Error::Unavailable("the run did not keep its estimated occupancies".into()))?;
    let n = played.len();
    let mut t: Vec<Vec<f64>> = (0..7).map(|_| Vec::with_capacity(n)).collect();
    let k = if log.mode == Mode::Side { 2 } else { 1 };
    let mut hat_violation: Vec<Vec<f64>> = (0..k).map(|_| Vec::with_capacity(n)).collect();
    let (s1, s2) = (&comparator.q1, &comparator.q2);
    for (i, ((q1, q2), (e1, e2))) in played.iter().zip(estimates).enumerate() {
        let r = game.reward.table_at(i + 1);
        let real = game.realize_functions(i + 1, log.noise_seed);
        t[0].push(bilinear_reward(e1, s2, &r)? - bilinear_reward(s1, e2, &r)?);
        t[1].push(bilinear_reward(q1, s2, &r)? - bilinear_reward(e1, s2, &r)?);
        t[2].push(bilinear_reward(s1, e2, &r)? - bilinear_reward(s1, q2, &r)?);
        let (hu1, hu2) = (linear_utility(e1, &real.g)?, linear_utility(e2, &real.h)?);
        t[3].push(linear_utility(q1, &real.g)? - hu1);
        t[4].push(linear_utility(q2, &real.h)? - hu2);
        t[5].push(q1.l1_distance(e1));
        t[6].push(q2.l1_distance(e2));
        for (j, v) in excess(log.mode, game, hu1, hu2)?.into_iter().enumerate() {
            hat_violation[j].push(v);
        }
    }
    let mut it = t.into_iter().map(MetricSeries::from_terms);
    let mut next = || it.next().expect("seven series");
    Ok(Decomposition {
        hat_regret: next(),
        err1: next(),
        err2: next(),
        err3: next(),
        err4: next(),
        estimation_l1: (next(), next()),
        hat_violation: hat_violation.into_iter().map(MetricSeries::from_terms).collect(),
    })
}

/// Needs a log that kept its estimated occupancies.
pub fn decomposition_diagnostics(
    log: &EpisodeLog,
    comparator: &SaddleSolution,
    game: &LayeredGame,
) -> Result<Decomposition> {
    decomposition_from(&played_occupancies(log, game)?, log, comparator, game)
}

/// Least-squares line through `(ln t, ln value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Some value was not positive and was fitted as `1e-9`.
    pub clamped: bool,
}

pub const RATE_FLOOR: f64 = 1e-9;

pub fn rate_fit(values: &[f64], t_grid: &[f64]) -> Result<RateFit> {
    if values.len() != t_grid.len() || values.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 3 matching points (got {} values, {} times)",
            values.len(),
            t_grid.len()
        )));
    }
    if t_grid.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidParameter("rate fit times must be positive".into()));
    }
    let clamped = values.iter().any(|&v| !(v > 0.0));
    let xs: Vec<f64> = t_grid.iter().map(|t| t.ln()).collect();
    let ys: Vec<f64> = values
        .iter()
        .map(|&v| if v > 0.0 { v } else { RATE_FLOOR }.ln())
        .collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter("rate fit needs distinct times".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        r2,
        clamped,
    })
}

/// All metrics of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mode: Mode,
    pub regret: MetricSeries,
    pub violation: ViolationSeries,
    pub decomposition: Option<Decomposition>,
    /// Multiplier(s) after each episode.
    pub lambda: Vec<(f64, f64)>,
}

/// Computes regret, violation, and (when the log kept estimates) the decomposition.
pub fn evaluate(log: &EpisodeLog, game: &LayeredGame, comparator: &SaddleSolution) -> Result<Evaluation> {
    let expected = Budget::for_mode(game, log.mode)?;
    if expected != comparator.budget {
        return Err(Error::ShapeMismatch(format!(
            "comparator budget {:?} does not match the run's {:?}",
            comparator.budget, expected
        )));
    }
    let played = played_occupancies(log, game)?;
    let decomposition = match log.estimates {
        Some(_) => Some(decomposition_from(&played, log, comparator, game)?),
        None => None,
    };
    Ok(Evaluation {
        mode: log.mode,
        regret: MetricSeries::from_terms(regret_terms(&played, comparator, game)?),
        violation: violation_from(&played, log, game)?,
        decomposition,
        lambda: log.records.iter().map(|r| r.lambda).collect(),
    })
}

impl Evaluation {
    pub fn len(&self) -> usize {
        self.regret.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regret.is_empty()
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "regret_cum".into()];
        match self.mode {
            Mode::Coupled => h.extend(["violation_cum".into(), "violation_mean_variant".into()]),
            Mode::Side => {
                for i in 1..=2 {
                    h.push(format!("violation{i}_cum"));
                    h.push(format!("violation{i}_mean_variant"));
                }
            }
        }
        h.extend(["hat_regret_cum", "err1", "err2", "err3", "err4"].map(String::from));
        match self.mode {
            Mode::Coupled => h.push("lambda".into()),
            Mode::Side => h.extend(["lambda1".into(), "lambda2".into()]),
        }
        h
    }

    /// Writes the per-episode metrics table. Cumulative columns hold running
    /// sums; violation columns hold their positive parts. Decomposition
    /// columns are empty when the run kept no estimates.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        let k = self.violation.realized.len();
        for i in 0..self.len() {
            let mut row = vec![(i + 1).to_string(), self.regret.cumulative[i].to_string()];
            for j in 0..k {
                row.push(self.violation.realized[j].cumulative[i].max(0.0).to_string());
                row.push(self.violation.mean_variant[j].cumulative[i].max(0.0).to_string());
            }
            match &self.decomposition {
                Some(d) => {
                    for s in [&d.hat_regret, &d.err1, &d.err2, &d.err3, &d.err4] {
                        row.push(s.cumulative[i].to_string());
                    }
                }
                None => row.extend(std::iter::repeat_n(String::new(), 5)),
            }
            let (l1, l2) = self.lambda[i];
            row.push(l1.to_string());
            if self.mode == Mode::Side {
                row.push(l2.to_string());
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("metrics csv", e))?;
        Ok(())
    }
}
