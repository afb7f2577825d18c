//! Layered (loop-free) state spaces and the dense per-layer tables built on them.
//!
//! States are addressed by `(layer, index-within-layer)`. Every table is stored
//! as one flat `Vec<f64>` per layer, ragged across layers:
//!
//! * triples `(x, a, x')` of layer `l` live at `(x * A + a) * n_{l+1} + x'`,
//! * pairs `(x, a)` of layer `l` live at `x * A + a`,
//! * joint reward entries `(x, y, a, b)` live at `((x * n_y + y) * A + a) * B + b`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance accepted for kernels and policies read from outside.
pub const ROW_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayeredSpace {
    layer_sizes: Vec<usize>,
    actions: usize,
}

impl LayeredSpace {
    /// `layer_sizes[l]` is `|X_l|`; the first and last layers must be singletons.
    pub fn new(layer_sizes: Vec<usize>, actions: usize) -> Result<Self> {
        let space = LayeredSpace { layer_sizes, actions };
        space.check()?;
        Ok(space)
    }

    /// A single path `x_0 -> x_1 -> ... -> x_L`.
    pub fn chain(horizon: usize, actions: usize) -> Result<Self> {
        Self::new(vec![1; horizon + 1], actions)
    }

    pub fn check(&self) -> Result<()> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least two layers, got {}",
                sizes.len()
            )));
        }
        if sizes[0] != 1 || sizes[sizes.len() - 1] != 1 {
            return Err(Error::InvalidSpace("first and last layers must be singletons".into()));
        }
        if let Some(l) = sizes.iter().position(|&n| n == 0) {
            return Err(Error::InvalidSpace(format!("layer {l} is empty")));
        }
        if self.actions == 0 {
            return Err(Error::InvalidSpace("action count must be positive".into()));
        }
        Ok(())
    }

    /// Number of decision layers `L`.
    pub fn horizon(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layer_size(&self, layer: usize) -> usize {
        self.layer_sizes[layer]
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    /// `|X|`, terminal state included.
    pub fn state_count(&self) -> usize {
        self.layer_sizes.iter().sum()
    }

    /// Number of `(x, a)` pairs with `x` non-terminal.
    pub fn pair_count(&self) -> usize {
        (0..self.horizon()).map(|l| self.pair_len(l)).sum()
    }

    pub fn pair_len(&self, layer: usize) -> usize {
        self.layer_sizes[layer] * self.actions
    }

    pub fn triple_len(&self, layer: usize) -> usize {
        self.layer_sizes[layer] * self.actions * self.layer_sizes[layer + 1]
    }

    #[inline]
    pub fn pair_index(&self, _layer: usize, x: usize, a: usize) -> usize {
        x * self.actions + a
    }

    #[inline]
    pub fn triple_index(&self, layer: usize, x: usize, a: usize, next: usize) -> usize {
        (x * self.actions + a) * self.layer_sizes[layer + 1] + next
    }

    pub fn zero_pairs(&self) -> Vec<Vec<f64>> {
        (0..self.horizon()).map(|l| vec![0.0; self.pair_len(l)]).collect()
    }

    pub fn zero_triples(&self) -> Vec<Vec<f64>> {
        (0..self.horizon()).map(|l| vec![0.0; self.triple_len(l)]).collect()
    }

    fn check_pairs(&self, table: &[Vec<f64>], what: &str) -> Result<()> {
        if table.len() != self.horizon() || table.iter().enumerate().any(|(l, row)| row.len() != self.pair_len(l)) {
            return Err(Error::ShapeMismatch(format!(
                "{what}: expected per-layer pair tables for layers {:?} with {} actions",
                self.layer_sizes, self.actions
            )));
        }
        Ok(())
    }

    fn check_triples(&self, table: &[Vec<f64>], what: &str) -> Result<()> {
        if table.len() != self.horizon() || table.iter().enumerate().any(|(l, row)| row.len() != self.triple_len(l)) {
            return Err(Error::ShapeMismatch(format!(
                "{what}: expected per-layer triple tables for layers {:?} with {} actions",
                self.layer_sizes, self.actions
            )));
        }
        Ok(())
    }
}

/// True transition kernel `P(x' | x, a)`; support only on the next layer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    space: LayeredSpace,
    p: Vec<Vec<f64>>,
}

impl Kernel {
    pub fn new(space: LayeredSpace, p: Vec<Vec<f64>>) -> Result<Self> {
        space.check_triples(&p, "kernel")?;
        let kernel = Kernel { space, p };
        kernel.check_rows(ROW_TOLERANCE)?;
        Ok(kernel)
    }

    pub(crate) fn from_raw(space: LayeredSpace, p: Vec<Vec<f64>>) -> Self {
        Kernel { space, p }
    }

    pub fn uniform(space: &LayeredSpace) -> Self {
        let p = (0..space.horizon())
            .map(|l| vec![1.0 / space.layer_size(l + 1) as f64; space.triple_len(l)])
            .collect();
        Kernel {
            space: space.clone(),
            p,
        }
    }

    /// Kernel with one-hot rows; `next(l, x, a)` picks the successor.
    pub fn deterministic(space: &LayeredSpace, mut next: impl FnMut(usize, usize, usize) -> usize) -> Self {
        let mut p = space.zero_triples();
        for l in 0..space.horizon() {
            for x in 0..space.layer_size(l) {
                for a in 0..space.actions() {
                    let n = next(l, x, a);
                    p[l][space.triple_index(l, x, a, n)] = 1.0;
                }
            }
        }
        Kernel {
            space: space.clone(),
            p,
        }
    }

    pub fn check_rows(&self, tol: f64) -> Result<()> {
        let s = &self.space;
        for l in 0..s.horizon() {
            for x in 0..s.layer_size(l) {
                for a in 0..s.actions() {
                    let row = self.row(l, x, a);
                    if row.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                        return Err(Error::InvalidKernel(format!(
                            "negative or non-finite entry at layer {l}, state {x}, action {a}"
                        )));
                    }
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > tol {
                        return Err(Error::InvalidKernel(format!(
                            "row (layer {l}, state {x}, action {a}) sums to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &LayeredSpace {
        &self.space
    }

    pub fn prob(&self, layer: usize, x: usize, a: usize, next: usize) -> f64 {
        self.p[layer][self.space.triple_index(layer, x, a, next)]
    }

    pub fn row(&self, layer: usize, x: usize, a: usize) -> &[f64] {
        let n = self.space.layer_size(layer + 1);
        let start = self.space.triple_index(layer, x, a, 0);
        &self.p[layer][start..start + n]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.p
    }
}

/// Markov policy `pi(a | x)` for the non-terminal layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    space: LayeredSpace,
    pi: Vec<Vec<f64>>,
}

impl Policy {
    /// Builds a policy without checking row sums; see [`Policy::check`].
    pub fn new(space: LayeredSpace, pi: Vec<Vec<f64>>) -> Result<Self> {
        space.check_pairs(&pi, "policy")?;
        Ok(Policy { space, pi })
    }

    pub fn uniform(space: &LayeredSpace) -> Self {
        let pi = (0..space.horizon())
            .map(|l| vec![1.0 / space.actions() as f64; space.pair_len(l)])
            .collect();
        Policy {
            space: space.clone(),
            pi,
        }
    }

    /// Deterministic policy from one chosen action per state.
    pub fn deterministic(space: &LayeredSpace, choice: &[Vec<usize>]) -> Self {
        let mut pi = space.zero_pairs();
        for (l, row) in choice.iter().enumerate() {
            for (x, &a) in row.iter().enumerate() {
                pi[l][space.pair_index(l, x, a)] = 1.0;
            }
        }
        Policy {
            space: space.clone(),
            pi,
        }
    }

    pub fn check(&self) -> Result<()> {
        let s = &self.space;
        for l in 0..s.horizon() {
            for x in 0..s.layer_size(l) {
                let row = self.row(l, x);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(Error::InvalidPolicy {
                        layer: l,
                        state: x,
                        sum,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn space(&self) -> &LayeredSpace {
        &self.space
    }

    pub fn prob(&self, layer: usize, x: usize, a: usize) -> f64 {
        self.pi[layer][self.space.pair_index(layer, x, a)]
    }

    pub fn row(&self, layer: usize, x: usize) -> &[f64] {
        let a = self.space.actions();
        &self.pi[layer][x * a..(x + 1) * a]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.pi
    }
}

/// A real-valued table over `(x, a)` pairs: utilities, losses, objectives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateActionTable {
    space: LayeredSpace,
    v: Vec<Vec<f64>>,
}

impl StateActionTable {
    pub fn new(space: LayeredSpace, v: Vec<Vec<f64>>) -> Result<Self> {
        space.check_pairs(&v, "state-action table")?;
        Ok(StateActionTable { space, v })
    }

    pub fn zeros(space: &LayeredSpace) -> Self {
        StateActionTable {
            space: space.clone(),
            v: space.zero_pairs(),
        }
    }

    pub fn constant(space: &LayeredSpace, c: f64) -> Self {
        let v = (0..space.horizon()).map(|l| vec![c; space.pair_len(l)]).collect();
        StateActionTable {
            space: space.clone(),
            v,
        }
    }

    pub fn from_fn(space: &LayeredSpace, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut v = space.zero_pairs();
        for l in 0..space.horizon() {
            for x in 0..space.layer_size(l) {
                for a in 0..space.actions() {
                    v[l][space.pair_index(l, x, a)] = f(l, x, a);
                }
            }
        }
        StateActionTable {
            space: space.clone(),
            v,
        }
    }

    pub fn space(&self) -> &LayeredSpace {
        &self.space
    }

    pub fn get(&self, layer: usize, x: usize, a: usize) -> f64 {
        self.v[layer][self.space.pair_index(layer, x, a)]
    }

    pub fn set(&mut self, layer: usize, x: usize, a: usize, value: f64) {
        let i = self.space.pair_index(layer, x, a);
        self.v[layer][i] = value;
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.v
    }

    pub fn layers_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.v
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        StateActionTable {
            space: self.space.clone(),
            v: self.v.iter().map(|row| row.iter().map(|&x| f(x)).collect()).collect(),
        }
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &StateActionTable) -> Self {
        debug_assert_eq!(self.space, other.space);
        StateActionTable {
            space: self.space.clone(),
            v: self
                .v
                .iter()
                .zip(&other.v)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + c * y).collect())
                .collect(),
        }
    }
}

/// Joint reward `r(x, y, a, b)` over layer-aligned state pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    min_space: LayeredSpace,
    max_space: LayeredSpace,
    r: Vec<Vec<f64>>,
}

impl RewardTable {
    pub fn new(min_space: LayeredSpace, max_space: LayeredSpace, r: Vec<Vec<f64>>) -> Result<Self> {
        Self::check_spaces(&min_space, &max_space)?;
        let table = RewardTable {
            min_space,
            max_space,
            r,
        };
        if table.r.len() != table.horizon() || (0..table.horizon()).any(|l| table.r[l].len() != table.layer_len(l)) {
            return Err(Error::ShapeMismatch("reward table layer sizes".into()));
        }
        Ok(table)
    }

    fn check_spaces(min_space: &LayeredSpace, max_space: &LayeredSpace) -> Result<()> {
        if min_space.horizon() != max_space.horizon() {
            return Err(Error::ShapeMismatch(format!(
                "players have different horizons ({} vs {})",
                min_space.horizon(),
                max_space.horizon()
            )));
        }
        Ok(())
    }

    pub fn from_fn(
        min_space: &LayeredSpace,
        max_space: &LayeredSpace,
        mut f: impl FnMut(usize, usize, usize, usize, usize) -> f64,
    ) -> Result<Self> {
        Self::check_spaces(min_space, max_space)?;
        let mut r = Vec::with_capacity(min_space.horizon());
        for l in 0..min_space.horizon() {
            let (nx, ny) = (min_space.layer_size(l), max_space.layer_size(l));
            let (na, nb) = (min_space.actions(), max_space.actions());
            let mut layer = Vec::with_capacity(nx * ny * na * nb);
            for x in 0..nx {
                for y in 0..ny {
                    for a in 0..na {
                        for b in 0..nb {
                            layer.push(f(l, x, y, a, b));
                        }
                    }
                }
            }
            r.push(layer);
        }
        Ok(RewardTable {
            min_space: min_space.clone(),
            max_space: max_space.clone(),
            r,
        })
    }

    pub fn constant(min_space: &LayeredSpace, max_space: &LayeredSpace, c: f64) -> Result<Self> {
        Self::from_fn(min_space, max_space, |_, _, _, _, _| c)
    }

    pub fn horizon(&self) -> usize {
        self.min_space.horizon()
    }

    pub fn min_space(&self) -> &LayeredSpace {
        &self.min_space
    }

    pub fn max_space(&self) -> &LayeredSpace {
        &self.max_space
    }

    fn layer_len(&self, l: usize) -> usize {
        self.min_space.layer_size(l)
            * self.max_space.layer_size(l)
            * self.min_space.actions()
            * self.max_space.actions()
    }

    #[inline]
    pub fn index(&self, layer: usize, x: usize, y: usize, a: usize, b: usize) -> usize {
        let ny = self.max_space.layer_size(layer);
        ((x * ny + y) * self.min_space.actions() + a) * self.max_space.actions() + b
    }

    pub fn get(&self, layer: usize, x: usize, y: usize, a: usize, b: usize) -> f64 {
        self.r[layer][self.index(layer, x, y, a, b)]
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.r
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        RewardTable {
            min_space: self.min_space.clone(),
            max_space: self.max_space.clone(),
            r: self.r.iter().map(|row| row.iter().map(|&v| f(v)).collect()).collect(),
        }
    }

    /// Entrywise average of equally-shaped tables.
    pub fn average<'a>(tables: impl IntoIterator<Item = &'a RewardTable>) -> Option<Self> {
        let mut iter = tables.into_iter();
        let first = iter.next()?;
        let mut acc = first.clone();
        let mut count = 1.0;
        for t in iter {
            for (dst, src) in acc.r.iter_mut().zip(&t.r) {
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += s;
                }
            }
            count += 1.0;
        }
        Some(acc.map(|v| v / count))
    }

    /// Loss seen by the min-player: `(x, a) -> sum_{y,b} w(y, b) r(x, y, a, b)`.
    pub fn contract_max(&self, max_weights: &[Vec<f64>]) -> StateActionTable {
        let (sx, sy) = (&self.min_space, &self.max_space);
        let (na, nb) = (sx.actions(), sy.actions());
        let mut out = sx.zero_pairs();
        for l in 0..self.horizon() {
            let r = &self.r[l];
            let w = &max_weights[l];
            let ny = sy.layer_size(l);
            for x in 0..sx.layer_size(l) {
                for a in 0..na {
                    let mut acc = 0.0;
                    for y in 0..ny {
                        let base = ((x * ny + y) * na + a) * nb;
                        let wy = &w[y * nb..(y + 1) * nb];
                        for b in 0..nb {
                            acc += wy[b] * r[base + b];
                        }
                    }
                    out[l][x * na + a] = acc;
                }
            }
        }
        StateActionTable {
            space: sx.clone(),
            v: out,
        }
    }

    /// Gain seen by the max-player: `(y, b) -> sum_{x,a} w(x, a) r(x, y, a, b)`.
    pub fn contract_min(&self, min_weights: &[Vec<f64>]) -> StateActionTable {
        let (sx, sy) = (&self.min_space, &self.max_space);
        let (na, nb) = (sx.actions(), sy.actions());
        let mut out = sy.zero_pairs();
        for l in 0..self.horizon() {
            let r = &self.r[l];
            let w = &min_weights[l];
            let ny = sy.layer_size(l);
            for x in 0..sx.layer_size(l) {
                for y in 0..ny {
                    for a in 0..na {
                        let wxa = w[x * na + a];
                        if wxa == 0.0 {
                            continue;
                        }
                        let base = ((x * ny + y) * na + a) * nb;
                        for b in 0..nb {
                            out[l][y * nb + b] += wxa * r[base + b];
                        }
                    }
                }
            }
        }
        StateActionTable {
            space: sy.clone(),
            v: out,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_rejects_bad_layers() {
        assert!(LayeredSpace::new(vec![1], 2).is_err());
        assert!(LayeredSpace::new(vec![2, 1], 2).is_err());
        assert!(LayeredSpace::new(vec![1, 0, 1], 2).is_err());
        assert!(LayeredSpace::new(vec![1, 2, 1], 0).is_err());
        let s = LayeredSpace::new(vec![1, 2, 3, 1], 2).unwrap();
        assert_eq!(s.horizon(), 3);
        assert_eq!(s.state_count(), 7);
        assert_eq!(s.pair_count(), 2 + 4 + 6);
        assert_eq!(s.triple_len(1), 12);
    }

    #[test]
    fn kernel_rows_are_checked() {
        let s = LayeredSpace::new(vec![1, 2, 1], 1).unwrap();
        assert!(Kernel::new(s.clone(), vec![vec![0.5, 0.4], vec![1.0, 1.0]]).is_err());
        assert!(Kernel::new(s.clone(), vec![vec![0.5, 0.5], vec![1.0, 1.0]]).is_ok());
        assert!(Kernel::new(s, vec![vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn contractions_agree_with_direct_sum() {
        let sx = LayeredSpace::new(vec![1, 2, 1], 2).unwrap();
        let sy = LayeredSpace::new(vec![1, 3, 1], 3).unwrap();
        let r = RewardTable::from_fn(&sx, &sy, |l, x, y, a, b| {
            ((l + 1) * 7 + x * 5 + y * 3 + a * 2 + b) as f64 / 50.0
        })
        .unwrap();
        let wy = StateActionTable::from_fn(&sy, |l, y, b| (1 + l + y + b) as f64 / 10.0);
        let wx = StateActionTable::from_fn(&sx, |l, x, a| (2 + l + x * a) as f64 / 10.0);
        let lx = r.contract_max(wy.layers());
        let ly = r.contract_min(wx.layers());
        for l in 0..2 {
            for x in 0..sx.layer_size(l) {
                for a in 0..2 {
                    let mut d = 0.0;
                    for y in 0..sy.layer_size(l) {
                        for b in 0..3 {
                            d += wy.get(l, y, b) * r.get(l, x, y, a, b);
                        }
                    }
                    assert!((d - lx.get(l, x, a)).abs() < 1e-14);
                }
            }
            for y in 0..sy.layer_size(l) {
                for b in 0..3 {
                    let mut d = 0.0;
                    for x in 0..sx.layer_size(l) {
                        for a in 0..2 {
                            d += wx.get(l, x, a) * r.get(l, x, y, a, b);
                        }
                    }
                    assert!((d - ly.get(l, y, b)).abs() < 1e-14);
                }
            }
        }
    }
}
