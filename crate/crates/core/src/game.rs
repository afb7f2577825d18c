//! Environments: two independent layered MDPs, the reward and utility
//! processes, trajectory sampling, and a generator of random feasible games.

use std::borrow::Cow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::occupancy::{linear_utility, occupancy_from_policy};
use crate::space::{Kernel, LayeredSpace, Policy, RewardTable, StateActionTable};

/// Deterministic generator for one `(seed, stream)` pair.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// splitmix64 finalizer; derives independent sub-seeds from one seed.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One player's side of the game.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlayerModel {
    pub kernel: Kernel,
    pub utility_mean: StateActionTable,
}

impl PlayerModel {
    pub fn new(kernel: Kernel, utility_mean: StateActionTable) -> Result<Self> {
        if utility_mean.space() != kernel.space() {
            return Err(Error::ShapeMismatch(
                "utility table and kernel live on different spaces".into(),
            ));
        }
        if utility_mean
            .layers()
            .iter()
            .flatten()
            .any(|&v| !(0.0..=1.0).contains(&v))
        {
            return Err(Error::InvalidParameter("utility means must lie in [0, 1]".into()));
        }
        Ok(PlayerModel { kernel, utility_mean })
    }

    pub fn space(&self) -> &LayeredSpace {
        self.kernel.space()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardProcess {
    /// Episode `t` sees `tables[t mod len]`.
    Fixed { tables: Vec<RewardTable> },
    /// Episode `t` sees `clamp(base + U(-amplitude, amplitude), 0, 1)` entrywise,
    /// drawn from a generator keyed by `(seed, t)`.
    Adversarial {
        base: RewardTable,
        amplitude: f64,
        seed: u64,
    },
}

impl RewardProcess {
    pub fn stationary(table: RewardTable) -> Self {
        RewardProcess::Fixed { tables: vec![table] }
    }

    pub fn table_at(&self, t: usize) -> Cow<'_, RewardTable> {
        match self {
            RewardProcess::Fixed { tables } => Cow::Borrowed(&tables[t % tables.len()]),
            RewardProcess::Adversarial { base, amplitude, seed } => {
                let mut rng = stream_rng(*seed, t as u64);
                let w = *amplitude;
                Cow::Owned(base.map(|v| {
                    let u: f64 = rng.gen_range(-1.0..=1.0);
                    (v + w * u).clamp(0.0, 1.0)
                }))
            }
        }
    }

    /// Average of the tables seen in episodes `1..=episodes`.
    pub fn aggregate(&self, episodes: usize) -> RewardTable {
        match self {
            RewardProcess::Fixed { tables } if tables.len() == 1 => tables[0].clone(),
            RewardProcess::Fixed { tables } => {
                let n = tables.len();
                let mut counts = vec![0usize; n];
                for t in 1..=episodes {
                    counts[t % n] += 1;
                }
                let total = episodes.max(1) as f64;
                let mut acc = tables[0].map(|_| 0.0);
                let mut layers: Vec<Vec<f64>> = acc.layers().to_vec();
                for (table, &c) in tables.iter().zip(&counts) {
                    for (dst, src) in layers.iter_mut().zip(table.layers()) {
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += c as f64 * s / total;
                        }
                    }
                }
                acc = RewardTable::new(acc.min_space().clone(), acc.max_space().clone(), layers)
                    .expect("shape follows the stored tables");
                acc
            }
            RewardProcess::Adversarial { base, .. } => {
                let mut layers: Vec<Vec<f64>> = base.map(|_| 0.0).layers().to_vec();
                let total = episodes.max(1) as f64;
                for t in 1..=episodes {
                    let table = self.table_at(t);
                    for (dst, src) in layers.iter_mut().zip(table.layers()) {
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += s / total;
                        }
                    }
                }
                RewardTable::new(base.min_space().clone(), base.max_space().clone(), layers)
                    .expect("shape follows the base table")
            }
        }
    }
}

/// Additive uniform noise on the utility means, clamped to `[0, 1]` afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityNoise {
    pub half_width: f64,
    /// One draw per episode applied to every entry of both players' tables;
    /// otherwise every entry gets its own draw.
    pub shared: bool,
}

impl Default for UtilityNoise {
    fn default() -> Self {
        UtilityNoise {
            half_width: 0.05,
            shared: true,
        }
    }
}

impl UtilityNoise {
    pub fn none() -> Self {
        UtilityNoise {
            half_width: 0.0,
            shared: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub min_policy: Policy,
    pub max_policy: Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayeredGame {
    pub min_player: PlayerModel,
    pub max_player: PlayerModel,
    pub reward: RewardProcess,
    pub noise: UtilityNoise,
    /// Coupled budget `b` on the sum of both players' utilities.
    pub budget: f64,
    /// Per-player budgets for the side-constraint variant.
    pub side_budgets: Option<(f64, f64)>,
    /// Feasibility margin the witness is guaranteed to achieve.
    pub margin: f64,
    pub witness: Witness,
    pub seed: u64,
}

/// Functions revealed at the end of one episode.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization<'a> {
    pub r: Cow<'a, RewardTable>,
    pub g: StateActionTable,
    pub h: StateActionTable,
    /// The shared noise draw (0 when noise is per-entry or absent).
    pub xi: f64,
}

impl LayeredGame {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        min_player: PlayerModel,
        max_player: PlayerModel,
        reward: RewardProcess,
        noise: UtilityNoise,
        budget: f64,
        margin: f64,
        witness: Witness,
        seed: u64,
    ) -> Result<Self> {
        let game = LayeredGame {
            min_player,
            max_player,
            reward,
            noise,
            budget,
            side_budgets: None,
            margin,
            witness,
            seed,
        };
        game.check()?;
        Ok(game)
    }

    pub fn horizon(&self) -> usize {
        self.min_player.space().horizon()
    }

    pub fn min_space(&self) -> &LayeredSpace {
        self.min_player.space()
    }

    pub fn max_space(&self) -> &LayeredSpace {
        self.max_player.space()
    }

    /// Structural checks; does not evaluate the witness.
    pub fn check(&self) -> Result<()> {
        let (sx, sy) = (self.min_space(), self.max_space());
        sx.check()?;
        sy.check()?;
        self.min_player.kernel.check_rows(crate::space::ROW_TOLERANCE)?;
        self.max_player.kernel.check_rows(crate::space::ROW_TOLERANCE)?;
        if sx.horizon() != sy.horizon() {
            return Err(Error::ShapeMismatch("players have different horizons".into()));
        }
        let tables: Vec<&RewardTable> = match &self.reward {
            RewardProcess::Fixed { tables } => {
                if tables.is_empty() {
                    return Err(Error::InvalidParameter("empty reward sequence".into()));
                }
                tables.iter().collect()
            }
            RewardProcess::Adversarial { base, amplitude, .. } => {
                if !(*amplitude >= 0.0) {
                    return Err(Error::InvalidParameter("negative reward amplitude".into()));
                }
                vec![base]
            }
        };
        for t in tables {
            if t.min_space() != sx || t.max_space() != sy {
                return Err(Error::ShapeMismatch("reward table does not match the players".into()));
            }
            if t.layers().iter().flatten().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::InvalidParameter("reward values must lie in [0, 1]".into()));
            }
        }
        let two_l = 2.0 * sx.horizon() as f64;
        if !(self.budget > 0.0 && self.budget <= two_l) {
            return Err(Error::InfeasibleSpec(format!(
                "budget {} outside (0, {two_l}]",
                self.budget
            )));
        }
        if !(self.noise.half_width >= 0.0 && self.noise.half_width.is_finite()) {
            return Err(Error::InvalidParameter("noise half-width must be non-negative".into()));
        }
        if self.witness.min_policy.space() != sx || self.witness.max_policy.space() != sy {
            return Err(Error::ShapeMismatch("witness policies do not match the players".into()));
        }
        Ok(())
    }

    /// Expected utilities of the witness pair.
    pub fn witness_utilities(&self) -> Result<(f64, f64)> {
        let q1 = occupancy_from_policy(&self.witness.min_policy, &self.min_player.kernel)?;
        let q2 = occupancy_from_policy(&self.witness.max_policy, &self.max_player.kernel)?;
        Ok((
            linear_utility(&q1, &self.min_player.utility_mean)?,
            linear_utility(&q2, &self.max_player.utility_mean)?,
        ))
    }

    /// `b - (<q1, g> + <q2, h>)` for the witness; at least the margin on a valid game.
    pub fn witness_slack(&self) -> Result<f64> {
        let (u1, u2) = self.witness_utilities()?;
        Ok(self.budget - u1 - u2)
    }

    /// Reward and realized utilities of episode `t`; `noise_seed` selects the
    /// noise sequence and is usually derived from the run seed.
    pub fn realize_functions(&self, t: usize, noise_seed: u64) -> Realization<'_> {
        let r = self.reward.table_at(t);
        let w = self.noise.half_width;
        let mean1 = &self.min_player.utility_mean;
        let mean2 = &self.max_player.utility_mean;
        if w == 0.0 {
            return Realization {
                r,
                g: mean1.clone(),
                h: mean2.clone(),
                xi: 0.0,
            };
        }
        let mut rng = stream_rng(noise_seed, t as u64);
        if self.noise.shared {
            let xi: f64 = rng.gen_range(-w..=w);
            Realization {
                r,
                g: mean1.map(|v| (v + xi).clamp(0.0, 1.0)),
                h: mean2.map(|v| (v + xi).clamp(0.0, 1.0)),
                xi,
            }
        } else {
            let mut draw = |v: f64| (v + rng.gen_range(-w..=w)).clamp(0.0, 1.0);
            let g = perturb(mean1, &mut draw);
            let h = perturb(mean2, &mut draw);
            Realization { r, g, h, xi: 0.0 }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&GameFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GameFile = serde_json::from_str(text)?;
        file.into_game()
    }
}

fn perturb(table: &StateActionTable, draw: &mut impl FnMut(f64) -> f64) -> StateActionTable {
    let mut out = table.clone();
    for row in out.layers_mut() {
        for v in row.iter_mut() {
            *v = draw(*v);
        }
    }
    out
}

/// On-disk game document.
#[derive(Serialize, Deserialize)]
struct GameFile {
    layers: [Vec<usize>; 2],
    actions: [usize; 2],
    #[serde(rename = "P1")]
    p1: Vec<Vec<f64>>,
    #[serde(rename = "P2")]
    p2: Vec<Vec<f64>>,
    g_mean: Vec<Vec<f64>>,
    h_mean: Vec<Vec<f64>>,
    reward_mode: RewardFile,
    noise: UtilityNoise,
    b: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    side_budgets: Option<(f64, f64)>,
    xi: f64,
    witness: WitnessFile,
    seed: u64,
    #[serde(default)]
    meta: serde_json::Value,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RewardFile {
    Fixed {
        tables: Vec<Vec<Vec<f64>>>,
    },
    Adversarial {
        base: Vec<Vec<f64>>,
        amplitude: f64,
        seed: u64,
    },
}

#[derive(Serialize, Deserialize)]
struct WitnessFile {
    min_policy: Vec<Vec<f64>>,
    max_policy: Vec<Vec<f64>>,
}

impl From<&LayeredGame> for GameFile {
    fn from(g: &LayeredGame) -> Self {
        let (sx, sy) = (g.min_space(), g.max_space());
        let reward_mode = match &g.reward {
            RewardProcess::Fixed { tables } => RewardFile::Fixed {
                tables: tables.iter().map(|t| t.layers().to_vec()).collect(),
            },
            RewardProcess::Adversarial { base, amplitude, seed } => RewardFile::Adversarial {
                base: base.layers().to_vec(),
                amplitude: *amplitude,
                seed: *seed,
            },
        };
        GameFile {
            layers: [sx.layer_sizes().to_vec(), sy.layer_sizes().to_vec()],
            actions: [sx.actions(), sy.actions()],
            p1: g.min_player.kernel.layers().to_vec(),
            p2: g.max_player.kernel.layers().to_vec(),
            g_mean: g.min_player.utility_mean.layers().to_vec(),
            h_mean: g.max_player.utility_mean.layers().to_vec(),
            reward_mode,
            noise: g.noise,
            b: g.budget,
            side_budgets: g.side_budgets,
            xi: g.margin,
            witness: WitnessFile {
                min_policy: g.witness.min_policy.layers().to_vec(),
                max_policy: g.witness.max_policy.layers().to_vec(),
            },
            seed: g.seed,
            meta: serde_json::json!({
                "generator": "csapo",
                "version": crate::VERSION,
                "witness_slack": g.witness_slack().ok(),
            }),
        }
    }
}

impl GameFile {
    fn into_game(self) -> Result<LayeredGame> {
        let [lx, ly] = self.layers;
        let sx = LayeredSpace::new(lx, self.actions[0])?;
        let sy = LayeredSpace::new(ly, self.actions[1])?;
        let min_player = PlayerModel::new(
            Kernel::new(sx.clone(), self.p1)?,
            StateActionTable::new(sx.clone(), self.g_mean)?,
        )?;
        let max_player = PlayerModel::new(
            Kernel::new(sy.clone(), self.p2)?,
            StateActionTable::new(sy.clone(), self.h_mean)?,
        )?;
        let reward = match self.reward_mode {
            RewardFile::Fixed { tables } => RewardProcess::Fixed {
                tables: tables
                    .into_iter()
                    .map(|t| RewardTable::new(sx.clone(), sy.clone(), t))
                    .collect::<Result<_>>()?,
            },
            RewardFile::Adversarial { base, amplitude, seed } => RewardProcess::Adversarial {
                base: RewardTable::new(sx.clone(), sy.clone(), base)?,
                amplitude,
                seed,
            },
        };
        let witness = Witness {
            min_policy: checked_policy(sx, self.witness.min_policy)?,
            max_policy: checked_policy(sy, self.witness.max_policy)?,
        };
        let mut game = LayeredGame::new(
            min_player, max_player, reward, self.noise, self.b, self.xi, witness, self.seed,
        )?;
        game.side_budgets = self.side_budgets;
        Ok(game)
    }
}

fn checked_policy(space: LayeredSpace, pi: Vec<Vec<f64>>) -> Result<Policy> {
    let p = Policy::new(space, pi)?;
    p.check()?;
    Ok(p)
}

/// A realized path `x_0, a_0, x_1, ..., a_{L-1}, x_L` (state indices within layers).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

pub fn sample_trajectory<R: Rng + ?Sized>(policy: &Policy, kernel: &Kernel, rng: &mut R) -> Result<Trajectory> {
    if policy.space() != kernel.space() {
        return Err(Error::ShapeMismatch("policy and kernel spaces differ".into()));
    }
    policy.check()?;
    Ok(sample_unchecked(policy, kernel, rng))
}

pub(crate) fn sample_unchecked<R: Rng + ?Sized>(policy: &Policy, kernel: &Kernel, rng: &mut R) -> Trajectory {
    let horizon = kernel.space().horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut x = 0;
    states.push(x);
    for l in 0..horizon {
        let a = categorical(policy.row(l, x), rng);
        x = categorical(kernel.row(l, x, a), rng);
        actions.push(a);
        states.push(x);
    }
    Trajectory { states, actions }
}

/// Inverse-CDF draw; rounding slack falls on the last positive entry.
fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardSpec {
    /// One table for every episode.
    Stationary,
    /// A cycle of `len` independent tables.
    Sequence { len: usize },
    /// A base table perturbed per episode by uniform noise of this amplitude.
    Adversarial { amplitude: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GameSpec {
    pub min_layers: Vec<usize>,
    pub max_layers: Vec<usize>,
    pub min_actions: usize,
    pub max_actions: usize,
    pub budget: f64,
    pub margin: f64,
    pub seed: u64,
    pub noise: UtilityNoise,
    /// Range the utility means are drawn from before any rescaling.
    pub utility_range: (f64, f64),
    pub reward: RewardSpec,
    pub side_budgets: Option<(f64, f64)>,
}

impl Default for GameSpec {
    /// Three decision layers, two states per interior layer, two actions,
    /// budget `L`, margin 0.1.
    fn default() -> Self {
        GameSpec {
            min_layers: vec![1, 2, 2, 1],
            max_layers: vec![1, 2, 2, 1],
            min_actions: 2,
            max_actions: 2,
            budget: 3.0,
            margin: 0.1,
            seed: 0,
            noise: UtilityNoise::default(),
            utility_range: (0.1, 0.9),
            reward: RewardSpec::Stationary,
            side_budgets: None,
        }
    }
}

fn random_kernel<R: Rng>(space: &LayeredSpace, rng: &mut R) -> Kernel {
    let mut p = space.zero_triples();
    for l in 0..space.horizon() {
        let n = space.layer_size(l + 1);
        for row in p[l].chunks_mut(n) {
            for v in row.iter_mut() {
                *v = rng.sample::<f64, _>(Exp1);
            }
            let s: f64 = row.iter().sum();
            for v in row.iter_mut() {
                *v /= s;
            }
        }
    }
    Kernel::from_raw(space.clone(), p)
}

fn random_table<R: Rng>(space: &LayeredSpace, range: (f64, f64), rng: &mut R) -> StateActionTable {
    StateActionTable::from_fn(space, |_, _, _| rng.gen_range(range.0..=range.1))
}

/// Factor that brings a witness utility `u >= 0` down to at most `target`,
/// or `None` when the target is negative.
fn fit_to_budget(u: f64, target: f64) -> Option<f64> {
    if u <= target {
        Some(1.0)
    } else if target < 0.0 {
        None
    } else {
        // Shave a few ulps so rounding cannot push the witness over the target.
        Some(target / u * (1.0 - 1e-12))
    }
}

/// Draws a random game whose uniform-policy witness satisfies the budget(s)
/// with the requested margin; utility means are rescaled when necessary.
pub fn generate_random_game(spec: &GameSpec) -> Result<LayeredGame> {
    let sx = LayeredSpace::new(spec.min_layers.clone(), spec.min_actions)?;
    let sy = LayeredSpace::new(spec.max_layers.clone(), spec.max_actions)?;
    if sx.horizon() != sy.horizon() {
        return Err(Error::InfeasibleSpec("players need the same horizon".into()));
    }
    let horizon = sx.horizon() as f64;
    if !(spec.budget > 0.0 && spec.budget <= 2.0 * horizon) {
        return Err(Error::InfeasibleSpec(format!(
            "budget {} outside (0, {}]",
            spec.budget,
            2.0 * horizon
        )));
    }
    if !(spec.margin > 0.0) {
        return Err(Error::InfeasibleSpec("margin must be positive".into()));
    }
    let (lo, hi) = spec.utility_range;
    if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
        return Err(Error::InvalidParameter("utility range must be inside [0, 1]".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let p1 = random_kernel(&sx, &mut rng);
    let p2 = random_kernel(&sy, &mut rng);
    let mut g = random_table(&sx, spec.utility_range, &mut rng);
    let mut h = random_table(&sy, spec.utility_range, &mut rng);
    let draw_reward = |rng: &mut ChaCha8Rng| {
        RewardTable::from_fn(&sx, &sy, |_, _, _, _, _| rng.gen_range(0.0..=1.0)).expect("players share the horizon")
    };
    let reward = match spec.reward {
        RewardSpec::Stationary => RewardProcess::stationary(draw_reward(&mut rng)),
        RewardSpec::Sequence { len } => {
            if len == 0 {
                return Err(Error::InvalidParameter(
                    "reward sequence length must be positive".into(),
                ));
            }
            RewardProcess::Fixed {
                tables: (0..len).map(|_| draw_reward(&mut rng)).collect(),
            }
        }
        RewardSpec::Adversarial { amplitude } => RewardProcess::Adversarial {
            base: draw_reward(&mut rng),
            amplitude,
            seed: rng.gen(),
        },
    };

    let witness = Witness {
        min_policy: Policy::uniform(&sx),
        max_policy: Policy::uniform(&sy),
    };
    let q1 = occupancy_from_policy(&witness.min_policy, &p1)?;
    let q2 = occupancy_from_policy(&witness.max_policy, &p2)?;
    let mut u1 = linear_utility(&q1, &g)?;
    let mut u2 = linear_utility(&q2, &h)?;

    if let Some((b1, b2)) = spec.side_budgets {
        for (bi, who) in [(b1, "min"), (b2, "max")] {
            if !(bi > 0.0 && bi <= horizon) {
                return Err(Error::InfeasibleSpec(format!(
                    "{who}-player budget {bi} outside (0, {horizon}]"
                )));
            }
        }
        let s1 = fit_to_budget(u1, b1 - spec.margin)
            .ok_or_else(|| Error::InfeasibleSpec(format!("min-player budget {b1} is below the margin")))?;
        let s2 = fit_to_budget(u2, b2 - spec.margin)
            .ok_or_else(|| Error::InfeasibleSpec(format!("max-player budget {b2} is below the margin")))?;
        g = g.map(|v| v * s1);
        h = h.map(|v| v * s2);
        u1 *= s1;
        u2 *= s2;
    }
    let scale = fit_to_budget(u1 + u2, spec.budget - spec.margin).ok_or_else(|| {
        Error::InfeasibleSpec(format!(
            "budget {} cannot accommodate margin {}",
            spec.budget, spec.margin
        ))
    })?;
    if scale < 1.0 {
        g = g.map(|v| v * scale);
        h = h.map(|v| v * scale);
    }

    let mut game = LayeredGame::new(
        PlayerModel::new(p1, g)?,
        PlayerModel::new(p2, h)?,
        reward,
        spec.noise,
        spec.budget,
        spec.margin,
        witness,
        spec.seed,
    )?;
    game.side_budgets = spec.side_budgets;
    let slack = game.witness_slack()?;
    if slack < spec.margin - 1e-12 {
        return Err(Error::InfeasibleSpec(format!(
            "witness slack {slack} below margin {}",
            spec.margin
        )));
    }
    Ok(game)
}
