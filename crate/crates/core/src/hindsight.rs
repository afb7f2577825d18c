//! The comparator: a constrained saddle point of the game with known
//! transitions.
//!
//! Building blocks are exact backward induction on the layered MDPs and a
//! constrained best response (multiplier bisection over backward induction,
//! then an occupancy-level mix of the two bracketing deterministic policies).
//!
//! The default solver scalarizes the constraints with multipliers, solves
//! each scalarized zero-sum game with per-state regret matching (with
//! alternation and linear averaging), and searches the multipliers by
//! bisection until complementary slackness holds. The coupled budget uses a
//! single shared multiplier, so the pair it returns satisfies both players'
//! constrained-optimality conditions at once. A best-response averaging
//! solver is kept for comparison. Either way the result is gated on its
//! exploitability.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::LayeredGame;
use crate::lagrangian::Mode;
use crate::occupancy::{bilinear_reward, linear_utility, occupancy_from_policy, policy_of, Occupancy};
use crate::space::{Kernel, LayeredSpace, Policy, RewardTable, StateActionTable};

/// Slack allowed when testing `<q, u> <= budget`.
const FEASIBILITY_TOLERANCE: f64 = 1e-12;
/// Bisection tolerance and iteration limit for multipliers.
const MULTIPLIER_TOLERANCE: f64 = 1e-10;
const MULTIPLIER_ITERATIONS: usize = 50;
/// Doublings tried when looking for a feasible upper multiplier.
const MULTIPLIER_DOUBLINGS: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Minimize,
    Maximize,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Minimize => -1.0,
            Direction::Maximize => 1.0,
        }
    }
}

/// Optimal state values `V[l][x]` of the layered MDP maximizing `reward`,
/// including the terminal layer (zero).
pub fn optimal_values(kernel: &Kernel, reward: &StateActionTable) -> Result<Vec<Vec<f64>>> {
    Ok(solve_mdp(kernel, reward)?.1)
}

/// Greedy action per state and optimal values per layer.
type MdpSolution = (Vec<Vec<usize>>, Vec<Vec<f64>>);

fn solve_mdp(kernel: &Kernel, reward: &StateActionTable) -> Result<MdpSolution> {
    let s = kernel.space();
    if reward.space() != s {
        return Err(Error::ShapeMismatch("reward table does not match the kernel".into()));
    }
    let horizon = s.horizon();
    let mut values: Vec<Vec<f64>> = (0..=horizon).map(|l| vec![0.0; s.layer_size(l)]).collect();
    let mut choice: Vec<Vec<usize>> = (0..horizon).map(|l| vec![0; s.layer_size(l)]).collect();
    for l in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut(l + 1);
        let next = &tail[0];
        for x in 0..s.layer_size(l) {
            let mut best = f64::NEG_INFINITY;
            for a in 0..s.actions() {
                let q = reward.get(l, x, a) + dot(kernel.row(l, x, a), next);
                // Strict comparison keeps the smallest index on ties.
                if q > best {
                    best = q;
                    choice[l][x] = a;
                }
            }
            head[l][x] = best;
        }
    }
    Ok((choice, values))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Deterministic optimal policy maximizing the expected sum of `reward`,
/// with ties broken toward the smallest action, and its value.
pub fn backward_induction(kernel: &Kernel, reward: &StateActionTable) -> Result<(Policy, f64)> {
    let (choice, values) = solve_mdp(kernel, reward)?;
    Ok((Policy::deterministic(kernel.space(), &choice), values[0][0]))
}

fn best_occupancy(kernel: &Kernel, reward: &StateActionTable) -> Result<(Occupancy, f64)> {
    let (policy, value) = backward_induction(kernel, reward)?;
    Ok((occupancy_from_policy(&policy, kernel)?, value))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstrainedResponse {
    pub q: Occupancy,
    /// `<q, objective>`.
    pub value: f64,
    /// `<q, constraint>`.
    pub utility: f64,
    /// Multiplier at which the response was found (0 when the budget is slack).
    pub multiplier: f64,
}

/// Smallest achievable `<q, u>` over the player's occupancies.
pub fn min_utility(kernel: &Kernel, u: &StateActionTable) -> Result<f64> {
    Ok(-backward_induction(kernel, &u.map(|v| -v))?.1)
}

/// Optimizes `<q, objective>` in `direction` subject to `<q, constraint> <= budget`.
pub fn constrained_best_response(
    kernel: &Kernel,
    objective: &StateActionTable,
    constraint: &StateActionTable,
    budget: f64,
    direction: Direction,
) -> Result<ConstrainedResponse> {
    let s = kernel.space();
    if objective.space() != s || constraint.space() != s {
        return Err(Error::ShapeMismatch("tables do not match the kernel".into()));
    }
    let floor = min_utility(kernel, constraint)?;
    if floor > budget + FEASIBILITY_TOLERANCE {
        return Err(Error::InfeasibleBudget {
            budget,
            min_utility: floor,
        });
    }
    let sign = direction.sign();
    let respond = |kappa: f64| -> Result<ConstrainedResponse> {
        let table = StateActionTable::from_fn(s, |l, x, a| {
            sign * objective.get(l, x, a) - kappa * constraint.get(l, x, a)
        });
        let (q, _) = best_occupancy(kernel, &table)?;
        Ok(ConstrainedResponse {
            value: linear_utility(&q, objective)?,
            utility: linear_utility(&q, constraint)?,
            q,
            multiplier: kappa,
        })
    };
    let feasible = |r: &ConstrainedResponse| r.utility <= budget + FEASIBILITY_TOLERANCE;

    let mut lo = respond(0.0)?;
    if feasible(&lo) {
        return Ok(lo);
    }
    let mut hi = None;
    let mut kappa = 1.0;
    for _ in 0..MULTIPLIER_DOUBLINGS {
        let r = respond(kappa)?;
        if feasible(&r) {
            hi = Some(r);
            break;
        }
        lo = r;
        kappa *= 2.0;
    }
    let mut hi = match hi {
        Some(hi) => hi,
        // Only the utility floor itself meets the budget: take the utility
        // minimizer, which is feasible by the check above.
        None => {
            let (q, _) = best_occupancy(kernel, &constraint.map(|v| -v))?;
            ConstrainedResponse {
                value: linear_utility(&q, objective)?,
                utility: linear_utility(&q, constraint)?,
                q,
                multiplier: f64::INFINITY,
            }
        }
    };
    if hi.multiplier.is_finite() {
        for _ in 0..MULTIPLIER_ITERATIONS {
            if hi.multiplier - lo.multiplier <= MULTIPLIER_TOLERANCE {
                break;
            }
            let mid = respond(0.5 * (lo.multiplier + hi.multiplier))?;
            if feasible(&mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    // Mix so the budget binds exactly.
    let alpha = ((budget - hi.utility) / (lo.utility - hi.utility)).clamp(0.0, 1.0);
    let q = lo.q.mix(alpha, &hi.q);
    Ok(ConstrainedResponse {
        value: linear_utility(&q, objective)?,
        utility: linear_utility(&q, constraint)?,
        q,
        multiplier: hi.multiplier,
    })
}

/// Budget(s) the comparator has to respect.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Budget {
    /// `<q1, g> + <q2, h> <= b`.
    Coupled { b: f64 },
    /// `<q1, g> <= b1` and `<q2, h> <= b2`.
    Side { b1: f64, b2: f64 },
}

impl Budget {
    pub fn for_mode(game: &LayeredGame, mode: Mode) -> Result<Budget> {
        match mode {
            Mode::Coupled => Ok(Budget::Coupled { b: game.budget }),
            Mode::Side => {
                let (b1, b2) = game
                    .side_budgets
                    .ok_or_else(|| Error::InvalidParameter("side mode needs per-player budgets in the game".into()))?;
                Ok(Budget::Side { b1, b2 })
            }
        }
    }

    /// Budgets left to each player given the opponent's utility.
    fn player_budgets(&self, u1: f64, u2: f64) -> (f64, f64) {
        match *self {
            Budget::Coupled { b } => (b - u2, b - u1),
            Budget::Side { b1, b2 } => (b1, b2),
        }
    }

    /// Smallest slack over the constraints.
    pub fn slack(&self, u1: f64, u2: f64) -> f64 {
        match *self {
            Budget::Coupled { b } => b - u1 - u2,
            Budget::Side { b1, b2 } => (b1 - u1).min(b2 - u2),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HindsightMethod {
    /// Multiplier bisection over regret-matching solves of the scalarized game.
    #[default]
    MultiplierSearch,
    /// Alternating constrained best responses against running averages.
    BestResponseAveraging,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HindsightOptions {
    /// Exploitability the returned pair must certify.
    pub tol: f64,
    pub method: HindsightMethod,
    /// Rounds of best-response averaging.
    pub max_rounds: usize,
    /// Target duality gap of each scalarized game, per unit of scale.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
}

impl Default for HindsightOptions {
    fn default() -> Self {
        HindsightOptions {
            tol: 1e-3,
            method: HindsightMethod::default(),
            max_rounds: 10_000,
            inner_tol: 1e-7,
            inner_max_iters: 50_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SaddleSolution {
    pub q1: Occupancy,
    pub q2: Occupancy,
    /// `<q1 q2, r>`.
    pub value: f64,
    pub exploitability: f64,
    /// Smallest constraint slack (see [`Budget::slack`]).
    pub constraint_slack: f64,
    pub budget: Budget,
    /// Multipliers of the scalarized game, when the method uses them.
    pub multipliers: (f64, f64),
    /// Scalarized-game solves or best-response rounds spent.
    pub work: usize,
}

/// Players' constrained best-response gaps against each other.
pub fn exploitability_parts(
    q1: &Occupancy,
    q2: &Occupancy,
    game: &LayeredGame,
    r: &RewardTable,
    budget: &Budget,
) -> Result<(f64, f64)> {
    let (g, h) = (&game.min_player.utility_mean, &game.max_player.utility_mean);
    let value = bilinear_reward(q1, q2, r)?;
    let (u1, u2) = (linear_utility(q1, g)?, linear_utility(q2, h)?);
    let (b1, b2) = budget.player_budgets(u1, u2);
    let loss1 = r.contract_max(&q2.pair_marginals());
    let gain2 = r.contract_min(&q1.pair_marginals());
    let br1 = constrained_best_response(&game.min_player.kernel, &loss1, g, b1, Direction::Minimize)?;
    let br2 = constrained_best_response(&game.max_player.kernel, &gain2, h, b2, Direction::Maximize)?;
    Ok((value - br1.value, br2.value - value))
}

/// Sum of both players' constrained best-response gaps.
pub fn exploitability(
    q1: &Occupancy,
    q2: &Occupancy,
    game: &LayeredGame,
    r: &RewardTable,
    budget: &Budget,
) -> Result<f64> {
    let (a, b) = exploitability_parts(q1, q2, game, r, budget)?;
    Ok(a + b)
}

/// Computes a constrained saddle point of the game with reward `r`.
pub fn solve_hindsight(
    game: &LayeredGame,
    r: &RewardTable,
    budget: &Budget,
    options: &HindsightOptions,
) -> Result<SaddleSolution> {
    if r.min_space() != game.min_space() || r.max_space() != game.max_space() {
        return Err(Error::ShapeMismatch("reward table does not match the game".into()));
    }
    let (q1, q2, multipliers, work) = match options.method {
        HindsightMethod::MultiplierSearch => multiplier_search(game, r, budget, options)?,
        HindsightMethod::BestResponseAveraging => best_response_averaging(game, r, budget, options)?,
    };
    // Averaged iterates carry rounding drift; re-derive exact occupancies of
    // the true kernels from their policies.
    let q1 = occupancy_from_policy(&policy_of(&q1), &game.min_player.kernel)?;
    let q2 = occupancy_from_policy(&policy_of(&q2), &game.max_player.kernel)?;
    let (g, h) = (&game.min_player.utility_mean, &game.max_player.utility_mean);
    let slack = budget.slack(linear_utility(&q1, g)?, linear_utility(&q2, h)?);
    let exploitability = exploitability(&q1, &q2, game, r, budget)?;
    if !(exploitability <= options.tol) || slack < -1e-6 {
        return Err(Error::ComparatorNonConverged { exploitability });
    }
    Ok(SaddleSolution {
        value: bilinear_reward(&q1, &q2, r)?,
        q1,
        q2,
        exploitability,
        constraint_slack: slack,
        budget: *budget,
        multipliers,
        work,
    })
}

type Solved = (Occupancy, Occupancy, (f64, f64), usize);

/// Per-state regret matching+ for one player of the scalarized game.
struct RegretMatcher {
    regrets: Vec<Vec<f64>>,
    policy: Policy,
}

impl RegretMatcher {
    fn new(space: &LayeredSpace) -> Self {
        RegretMatcher {
            regrets: space.zero_pairs(),
            policy: Policy::uniform(space),
        }
    }

    /// Accumulates the advantages of `gain` under the current policy and
    /// moves the policy to the positive part of the regrets.
    fn observe(&mut self, kernel: &Kernel, gain: &StateActionTable) {
        let s = kernel.space();
        let na = s.actions();
        let mut v_next = vec![0.0; s.layer_size(s.horizon())];
        let mut pi = self.policy.layers().to_vec();
        let mut qv = vec![0.0; na];
        for l in (0..s.horizon()).rev() {
            let mut v = vec![0.0; s.layer_size(l)];
            for x in 0..s.layer_size(l) {
                for a in 0..na {
                    qv[a] = gain.get(l, x, a) + dot(kernel.row(l, x, a), &v_next);
                }
                let row = &mut pi[l][x * na..(x + 1) * na];
                v[x] = dot(row, &qv);
                let reg = &mut self.regrets[l][x * na..(x + 1) * na];
                let mut total = 0.0;
                for a in 0..na {
                    reg[a] = (reg[a] + qv[a] - v[x]).max(0.0);
                    total += reg[a];
                }
                for a in 0..na {
                    row[a] = if total > 0.0 { reg[a] / total } else { 1.0 / na as f64 };
                }
            }
            v_next = v;
        }
        self.policy = Policy::new(s.clone(), pi).expect("policy shape is preserved");
    }
}

/// The zero-sum game `<q1 q2, r> + k1 <q1, g> - k2 <q2, h>`.
struct Scalarized<'a> {
    game: &'a LayeredGame,
    r: &'a RewardTable,
    kappa: (f64, f64),
}

struct ScalarizedSolution {
    q1: Occupancy,
    q2: Occupancy,
    kappa: (f64, f64),
}

impl Scalarized<'_> {
    fn min_gain(&self, q2: &Occupancy) -> StateActionTable {
        let g = &self.game.min_player.utility_mean;
        self.r
            .contract_max(&q2.pair_marginals())
            .add_scaled(self.kappa.0, g)
            .map(|v| -v)
    }

    fn max_gain(&self, q1: &Occupancy) -> StateActionTable {
        let h = &self.game.max_player.utility_mean;
        self.r.contract_min(&q1.pair_marginals()).add_scaled(-self.kappa.1, h)
    }

    /// Duality gap of the pair in the scalarized game.
    fn gap(&self, q1: &Occupancy, q2: &Occupancy) -> Result<f64> {
        let (k1, k2) = (&self.game.min_player.kernel, &self.game.max_player.kernel);
        let best2 = backward_induction(k2, &self.max_gain(q1))?.1
            + self.kappa.0 * linear_utility(q1, &self.game.min_player.utility_mean)?;
        let best1 = -backward_induction(k1, &self.min_gain(q2))?.1
            - self.kappa.1 * linear_utility(q2, &self.game.max_player.utility_mean)?;
        Ok(best2 - best1)
    }

    fn solve(&self, options: &HindsightOptions) -> Result<ScalarizedSolution> {
        const CHECK_EVERY: usize = 16;
        let (k1, k2) = (&self.game.min_player.kernel, &self.game.max_player.kernel);
        let (s1, s2) = (k1.space(), k2.space());
        let scale = self.r.horizon() as f64 * (1.0 + self.kappa.0 + self.kappa.1);
        let mut m1 = RegretMatcher::new(s1);
        let mut m2 = RegretMatcher::new(s2);
        let mut cur2 = occupancy_from_policy(&m2.policy, k2)?;
        let mut sum1 = s1.zero_triples();
        let mut sum2 = s2.zero_triples();
        let mut weight = 0.0;
        let average = |sum: &[Vec<f64>], w: f64, s: &LayeredSpace| {
            Occupancy::from_raw(
                s.clone(),
                sum.iter().map(|l| l.iter().map(|v| v / w).collect()).collect(),
            )
        };
        for it in 1..=options.inner_max_iters {
            m1.observe(k1, &self.min_gain(&cur2));
            let cur1 = occupancy_from_policy(&m1.policy, k1)?;
            m2.observe(k2, &self.max_gain(&cur1));
            cur2 = occupancy_from_policy(&m2.policy, k2)?;
            let w = it as f64;
            accumulate(&mut sum1, w, &cur1);
            accumulate(&mut sum2, w, &cur2);
            weight += w;
            if it % CHECK_EVERY == 0 || it == options.inner_max_iters {
                let (a1, a2) = (average(&sum1, weight, s1), average(&sum2, weight, s2));
                if self.gap(&a1, &a2)? <= options.inner_tol * scale || it == options.inner_max_iters {
                    return Ok(ScalarizedSolution {
                        q1: a1,
                        q2: a2,
                        kappa: self.kappa,
                    });
                }
            }
        }
        Err(Error::InvalidParameter("inner iteration limit must be positive".into()))
    }
}

fn accumulate(sum: &mut [Vec<f64>], w: f64, q: &Occupancy) {
    for (s, l) in sum.iter_mut().zip(q.layers()) {
        for (a, b) in s.iter_mut().zip(l) {
            *a += w * b;
        }
    }
}

struct Candidate {
    q1: Occupancy,
    q2: Occupancy,
    kappa: (f64, f64),
    solves: usize,
}

/// Finds the smallest multiplier whose candidate meets `budget`, bisects,
/// and mixes the bracketing candidates so the budget binds.
fn search_multiplier(
    mut solve: impl FnMut(f64) -> Result<Candidate>,
    utility: impl Fn(&Candidate) -> Result<f64>,
    budget: f64,
) -> Result<Candidate> {
    let mut solves = 0;
    let mut run = |kappa: f64, solves: &mut usize| -> Result<(f64, Candidate, f64)> {
        let c = solve(kappa)?;
        *solves += c.solves;
        let u = utility(&c)?;
        Ok((kappa, c, u))
    };
    let mut lo = run(0.0, &mut solves)?;
    if lo.2 <= budget + FEASIBILITY_TOLERANCE {
        lo.1.solves = solves;
        return Ok(lo.1);
    }
    let mut hi = None;
    let mut kappa = 1.0;
    for _ in 0..MULTIPLIER_DOUBLINGS {
        let c = run(kappa, &mut solves)?;
        if c.2 <= budget + FEASIBILITY_TOLERANCE {
            hi = Some(c);
            break;
        }
        lo = c;
        kappa *= 2.0;
    }
    let Some(mut hi) = hi else {
        return Err(Error::InfeasibleBudget {
            budget,
            min_utility: lo.2,
        });
    };
    for _ in 0..MULTIPLIER_ITERATIONS {
        if hi.0 - lo.0 <= MULTIPLIER_TOLERANCE * hi.0.max(1.0) {
            break;
        }
        let mid = run(0.5 * (lo.0 + hi.0), &mut solves)?;
        if mid.2 <= budget + FEASIBILITY_TOLERANCE {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let alpha = ((budget - hi.2) / (lo.2 - hi.2)).clamp(0.0, 1.0);
    let mix = |a: (f64, f64), b: (f64, f64)| (alpha * a.0 + (1.0 - alpha) * b.0, alpha * a.1 + (1.0 - alpha) * b.1);
    Ok(Candidate {
        q1: lo.1.q1.mix(alpha, &hi.1.q1),
        q2: lo.1.q2.mix(alpha, &hi.1.q2),
        kappa: mix(lo.1.kappa, hi.1.kappa),
        solves,
    })
}

fn multiplier_search(
    game: &LayeredGame,
    r: &RewardTable,
    budget: &Budget,
    options: &HindsightOptions,
) -> Result<Solved> {
    let (g, h) = (&game.min_player.utility_mean, &game.max_player.utility_mean);
    let solve = |kappa: (f64, f64)| -> Result<Candidate> {
        let s = Scalarized { game, r, kappa }.solve(options)?;
        Ok(Candidate {
            q1: s.q1,
            q2: s.q2,
            kappa: s.kappa,
            solves: 1,
        })
    };
    let c = match *budget {
        Budget::Coupled { b } => search_multiplier(
            |k| solve((k, k)),
            |c| Ok(linear_utility(&c.q1, g)? + linear_utility(&c.q2, h)?),
            b,
        )?,
        Budget::Side { b1, b2 } => search_multiplier(
            |k1| search_multiplier(|k2| solve((k1, k2)), |c| linear_utility(&c.q2, h), b2),
            |c| linear_utility(&c.q1, g),
            b1,
        )?,
    };
    Ok((c.q1, c.q2, c.kappa, c.solves))
}

fn best_response_averaging(
    game: &LayeredGame,
    r: &RewardTable,
    budget: &Budget,
    options: &HindsightOptions,
) -> Result<Solved> {
    let (g, h) = (&game.min_player.utility_mean, &game.max_player.utility_mean);
    let (k1, k2) = (&game.min_player.kernel, &game.max_player.kernel);
    let mut avg1 = occupancy_from_policy(&game.witness.min_policy, k1)?;
    let mut avg2 = occupancy_from_policy(&game.witness.max_policy, k2)?;
    let mut best = (f64::INFINITY, avg1.clone(), avg2.clone());
    for round in 1..=options.max_rounds {
        let (b1, b2) = budget.player_budgets(linear_utility(&avg1, g)?, linear_utility(&avg2, h)?);
        let loss1 = r.contract_max(&avg2.pair_marginals());
        let gain2 = r.contract_min(&avg1.pair_marginals());
        let br1 = constrained_best_response(k1, &loss1, g, b1, Direction::Minimize)?;
        let br2 = constrained_best_response(k2, &gain2, h, b2, Direction::Maximize)?;
        let w = 1.0 / (round as f64 + 1.0);
        avg1 = br1.q.mix(w, &avg1);
        avg2 = br2.q.mix(w, &avg2);
        let slack = budget.slack(linear_utility(&avg1, g)?, linear_utility(&avg2, h)?);
        if slack >= -1e-6 {
            if let Ok(e) = exploitability(&avg1, &avg2, game, r, budget) {
                if e < best.0 {
                    best = (e, avg1.clone(), avg2.clone());
                }
                if e <= options.tol {
                    return Ok((avg1, avg2, (0.0, 0.0), round));
                }
            }
        }
    }
    Ok((best.1, best.2, (0.0, 0.0), options.max_rounds))
}

/// On-disk form of a comparator.
#[derive(Serialize, Deserialize)]
struct SolutionFile {
    min_layers: Vec<usize>,
    max_layers: Vec<usize>,
    actions: [usize; 2],
    q1: Vec<Vec<f64>>,
    q2: Vec<Vec<f64>>,
    value: f64,
    exploitability: f64,
    constraint_slack: f64,
    budget: Budget,
    multipliers: (f64, f64),
    work: usize,
}

impl SaddleSolution {
    pub fn to_json(&self) -> Result<String> {
        let (sx, sy) = (self.q1.space(), self.q2.space());
        Ok(serde_json::to_string_pretty(&SolutionFile {
            min_layers: sx.layer_sizes().to_vec(),
            max_layers: sy.layer_sizes().to_vec(),
            actions: [sx.actions(), sy.actions()],
            q1: self.q1.layers().to_vec(),
            q2: self.q2.layers().to_vec(),
            value: self.value,
            exploitability: self.exploitability,
            constraint_slack: self.constraint_slack,
            budget: self.budget,
            multipliers: self.multipliers,
            work: self.work,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: SolutionFile = serde_json::from_str(text)?;
        let sx = LayeredSpace::new(f.min_layers, f.actions[0])?;
        let sy = LayeredSpace::new(f.max_layers, f.actions[1])?;
        Ok(SaddleSolution {
            q1: Occupancy::new(sx, f.q1)?,
            q2: Occupancy::new(sy, f.q2)?,
            value: f.value,
            exploitability: f.exploitability,
            constraint_slack: f.constraint_slack,
            budget: f.budget,
            multipliers: f.multipliers,
            work: f.work,
        })
    }
}
