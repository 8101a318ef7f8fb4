//! One-sided full shift on `d` symbols with the metric `d_γ(x, y) = γ^{i(x,y)}`,
//! where `i(x,y)` is the first (0-based) index at which `x` and `y` differ.
//!
//! Finite-depth objects are dense tables indexed by words encoded in base `d`,
//! first symbol most significant, so table order is lexicographic word order.
//! Public APIs take and return 1-based symbols.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

const MASS_TOL: f64 = 1e-12;
const LIP_SLACK: f64 = 1e-9;
/// Largest table (number of words) any depth-n object may allocate.
pub const MAX_TABLE: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpace {
    d: usize,
    gamma: f64,
}

impl ShiftSpace {
    pub fn new(d: usize, gamma: f64) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", format!("alphabet size {d} < 2")));
        }
        let cap = 1.0 / (d as f64 + 1.0);
        if !(gamma > 0.0 && gamma < cap) {
            return Err(invalid("gamma", format!("{gamma} not in (0, 1/(d+1)) = (0, {cap})")));
        }
        Ok(Self { d, gamma })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Contraction rate `r = (d+1)γ < 1`.
    pub fn rate(&self) -> f64 {
        (self.d as f64 + 1.0) * self.gamma
    }

    /// Number of words of length `n`, or an error when the table would be too large.
    pub fn words(&self, n: usize) -> Result<usize> {
        let mut size: usize = 1;
        for _ in 0..n {
            size = size
                .checked_mul(self.d)
                .filter(|&s| s <= MAX_TABLE)
                .ok_or_else(|| Error::TooLarge(format!("{}^{n} words", self.d)))?;
        }
        Ok(size)
    }

    pub(crate) fn check_same(&self, other: &ShiftSpace) -> Result<()> {
        if self.d != other.d || self.gamma != other.gamma {
            return Err(Error::SpaceMismatch(self.d, self.gamma, other.d, other.gamma));
        }
        Ok(())
    }
}

/// A finite word over `{1..d}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word(Vec<usize>);

impl Word {
    pub fn new(symbols: Vec<usize>, d: usize) -> Result<Self> {
        if let Some(s) = symbols.iter().find(|&&s| s < 1 || s > d) {
            return Err(invalid("word", format!("symbol {s} outside 1..={d}")));
        }
        Ok(Self(symbols))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Base-`d` table index, first symbol most significant.
    pub fn code(&self, d: usize) -> usize {
        self.0.iter().fold(0, |acc, &s| acc * d + (s - 1))
    }

    pub fn from_code(code: usize, n: usize, d: usize) -> Self {
        let mut s = vec![0; n];
        let mut c = code;
        for slot in s.iter_mut().rev() {
            *slot = c % d + 1;
            c /= d;
        }
        Self(s)
    }
}

/// `γ^i` for the first differing 0-based index `i`; `0` for equal words.
pub fn word_metric(u: &Word, v: &Word, space: &ShiftSpace) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::LengthMismatch(u.len(), v.len()));
    }
    Ok(match u.0.iter().zip(&v.0).position(|(a, b)| a != b) {
        Some(i) => space.gamma.powi(i as i32),
        None => 0.0,
    })
}

/// Index of the first differing symbol between two depth-`n` codes.
pub(crate) fn first_difference(a: usize, b: usize, n: usize, d: usize) -> Option<usize> {
    if a == b {
        return None;
    }
    let mut scale = d.pow(n as u32);
    for i in 0..n {
        scale /= d;
        if a / scale != b / scale {
            return Some(i);
        }
    }
    None
}

/// `d_γ` between two depth-`n` codes.
pub(crate) fn code_distance(a: usize, b: usize, n: usize, space: &ShiftSpace) -> f64 {
    first_difference(a, b, n, space.d).map_or(0.0, |i| space.gamma.powi(i as i32))
}

// ============================================================================
// Cylinder measures
// ============================================================================

/// A probability on the words of length `depth`, i.e. the masses of all
/// depth-`n` cylinders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CylinderMeasure {
    d: usize,
    gamma: f64,
    depth: usize,
    masses: Vec<f64>,
}

impl CylinderMeasure {
    pub fn new(space: &ShiftSpace, depth: usize, masses: Vec<f64>) -> Result<Self> {
        let size = space.words(depth)?;
        if masses.len() != size {
            return Err(Error::LengthMismatch(masses.len(), size));
        }
        if let Some(m) = masses.iter().find(|m| m.is_nan() || **m < 0.0 || !m.is_finite()) {
            return Err(Error::InvalidProbability(format!("mass {m}")));
        }
        let s: f64 = masses.iter().sum();
        if (s - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidProbability(format!("masses sum to {s}")));
        }
        Ok(Self { d: space.d, gamma: space.gamma, depth, masses })
    }

    pub(crate) fn from_raw(space: &ShiftSpace, depth: usize, masses: Vec<f64>) -> Self {
        Self { d: space.d, gamma: space.gamma, depth, masses }
    }

    pub fn uniform(space: &ShiftSpace, depth: usize) -> Result<Self> {
        let size = space.words(depth)?;
        Ok(Self::from_raw(space, depth, vec![1.0 / size as f64; size]))
    }

    /// The product measure `p ⊗ p ⊗ …` truncated at `depth`.
    pub fn bernoulli(space: &ShiftSpace, p: &[f64], depth: usize) -> Result<Self> {
        Self::product(space, &vec![p.to_vec(); depth])
    }

    /// The inhomogeneous product `p_1 ⊗ p_2 ⊗ … ⊗ p_n`.
    pub fn product(space: &ShiftSpace, factors: &[Vec<f64>]) -> Result<Self> {
        space.words(factors.len())?;
        let mut masses = vec![1.0];
        for p in factors {
            if p.len() != space.d {
                return Err(Error::LengthMismatch(p.len(), space.d));
            }
            masses = masses.iter().flat_map(|m| p.iter().map(move |q| m * q)).collect();
        }
        Self::new(space, factors.len(), masses)
    }

    pub fn point_mass(space: &ShiftSpace, word: &Word) -> Result<Self> {
        let size = space.words(word.len())?;
        let mut masses = vec![0.0; size];
        masses[Word::new(word.0.clone(), space.d)?.code(space.d)] = 1.0;
        Ok(Self::from_raw(space, word.len(), masses))
    }

    /// A random measure with i.i.d. exponential weights; `sparsity` is the
    /// probability of zeroing a word (at least one word keeps its mass).
    pub fn random<R: Rng>(space: &ShiftSpace, depth: usize, sparsity: f64, rng: &mut R) -> Result<Self> {
        let size = space.words(depth)?;
        let mut w: Vec<f64> = (0..size)
            .map(|_| if rng.gen::<f64>() < sparsity { 0.0 } else { -rng.gen::<f64>().max(1e-300).ln() })
            .collect();
        if w.iter().all(|&x| x == 0.0) {
            let i = rng.gen_range(0..size);
            w[i] = 1.0;
        }
        let s: f64 = w.iter().sum();
        Ok(Self::from_raw(space, depth, w.into_iter().map(|x| x / s).collect()))
    }

    pub fn space(&self) -> ShiftSpace {
        ShiftSpace { d: self.d, gamma: self.gamma }
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, word: &Word) -> Result<f64> {
        if word.len() > self.depth {
            return Err(Error::DepthMismatch(word.len(), self.depth));
        }
        let c = self.coarsen_to(word.len())?;
        Ok(c.masses[word.code(self.d)])
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Splits every cylinder uniformly among its `d` children.
    pub fn refine(&self) -> Result<Self> {
        self.space().words(self.depth + 1)?;
        let d = self.d as f64;
        let masses = self.masses.iter().flat_map(|&m| std::iter::repeat_n(m / d, self.d)).collect();
        Ok(Self { depth: self.depth + 1, masses, ..*self })
    }

    /// Marginal on words of length `depth − 1`.
    pub fn coarsen(&self) -> Result<Self> {
        if self.depth == 0 {
            return Err(Error::DepthMismatch(0, 1));
        }
        let masses = self.masses.chunks(self.d).map(|c| c.iter().sum()).collect();
        Ok(Self { depth: self.depth - 1, masses, ..*self })
    }

    pub fn coarsen_to(&self, depth: usize) -> Result<Self> {
        if depth > self.depth {
            return Err(Error::DepthMismatch(depth, self.depth));
        }
        let block = self.d.pow((self.depth - depth) as u32);
        let masses = self.masses.chunks(block).map(|c| c.iter().sum()).collect();
        Ok(Self { depth, masses, ..*self })
    }

    /// `∫ f dμ` for `f` of depth at most `depth(μ)`.
    pub fn integrate(&self, f: &DepthKFunction) -> Result<f64> {
        if f.d != self.d {
            return Err(Error::LengthMismatch(f.d, self.d));
        }
        let c = self.coarsen_to(f.depth)?;
        Ok(c.masses.iter().zip(&f.values).map(|(m, v)| m * v).sum())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("measure serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: CylinderMeasure =
            serde_json::from_str(s).map_err(|e| Error::Precondition(format!("bad measure JSON: {e}")))?;
        let space = ShiftSpace::new(raw.d, raw.gamma)?;
        Self::new(&space, raw.depth, raw.masses)
    }
}

// ============================================================================
// Finite-depth functions and Jacobians
// ============================================================================

/// A function on the shift that depends only on the first `depth` symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthKFunction {
    d: usize,
    depth: usize,
    values: Vec<f64>,
}

impl DepthKFunction {
    pub fn new(d: usize, depth: usize, values: Vec<f64>) -> Result<Self> {
        if d < 2 {
            return Err(invalid("d", "alphabet size < 2"));
        }
        let size = d
            .checked_pow(depth as u32)
            .filter(|&s| s <= MAX_TABLE)
            .ok_or_else(|| Error::TooLarge(format!("{d}^{depth} words")))?;
        if values.len() != size {
            return Err(Error::LengthMismatch(values.len(), size));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("function value".into()));
        }
        Ok(Self { d, depth, values })
    }

    pub fn constant(d: usize, c: f64) -> Self {
        Self { d, depth: 0, values: vec![c] }
    }

    pub fn from_fn(d: usize, depth: usize, f: impl Fn(&Word) -> f64) -> Result<Self> {
        let size = d.pow(depth as u32);
        Self::new(d, depth, (0..size).map(|c| f(&Word::from_code(c, depth, d))).collect())
    }

    /// Uniform random values in `[lo, hi]`.
    pub fn random<R: Rng>(d: usize, depth: usize, lo: f64, hi: f64, rng: &mut R) -> Result<Self> {
        let size = d.pow(depth as u32);
        Self::new(d, depth, (0..size).map(|_| rng.gen_range(lo..=hi)).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on any word of length at least `depth`.
    pub fn eval(&self, word: &Word) -> Result<f64> {
        if word.len() < self.depth {
            return Err(Error::WordTooShort { needed: self.depth, got: word.len() });
        }
        let w = Word(word.0[..self.depth].to_vec());
        Ok(self.values[w.code(self.d)])
    }

    /// Value at the word with code `code` of length `n ≥ depth`.
    pub(crate) fn at_code(&self, code: usize, n: usize) -> f64 {
        self.values[code / self.d.pow((n - self.depth) as u32)]
    }

    /// The same function tabulated at a larger depth.
    pub fn lift(&self, depth: usize) -> Result<Self> {
        if depth < self.depth {
            return Err(Error::DepthMismatch(depth, self.depth));
        }
        let size = self.d.pow(depth as u32);
        Self::new(self.d, depth, (0..size).map(|c| self.at_code(c, depth)).collect())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect(), ..self.clone() }
    }

    pub fn sup_distance(&self, other: &Self) -> Result<f64> {
        if self.d != other.d || self.depth != other.depth {
            return Err(Error::DepthMismatch(self.depth, other.depth));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }
}

/// `sup_{x≠y} |f(x) − f(y)| / d_γ(x, y)`.
///
/// Pairs sharing a prefix of length `i` are at distance at most `γ^i`, so the
/// constant is the largest value range inside a prefix block of length `i`
/// divided by `γ^i`.
pub fn lipschitz_constant(f: &DepthKFunction, space: &ShiftSpace) -> f64 {
    let mut best: f64 = 0.0;
    for i in 0..f.depth {
        let block = f.d.pow((f.depth - i) as u32);
        let scale = space.gamma.powi(i as i32);
        for chunk in f.values.chunks(block) {
            let (lo, hi) = chunk.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            best = best.max((hi - lo) / scale);
        }
    }
    best
}

/// A normalized non-negative weight function of finite depth `k ≥ 1`:
/// `Σ_a J(a·w) = 1` for every word `w` of length `k − 1`, and `Lip(J) ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jacobian {
    f: DepthKFunction,
    space: ShiftSpace,
}

impl Jacobian {
    pub fn new(f: DepthKFunction, space: &ShiftSpace) -> Result<Self> {
        if f.d != space.d {
            return Err(Error::LengthMismatch(f.d, space.d));
        }
        if f.depth < 1 {
            return Err(Error::InvalidJacobian("depth must be at least 1".into()));
        }
        if let Some(v) = f.values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidJacobian(format!("value {v} outside [0, 1]")));
        }
        let tail = f.d.pow((f.depth - 1) as u32);
        for w in 0..tail {
            let s: f64 = (0..f.d).map(|a| f.values[a * tail + w]).sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidJacobian(format!(
                    "sum over preimages of {:?} is {s}",
                    Word::from_code(w, f.depth - 1, f.d).symbols()
                )));
            }
        }
        let lip = lipschitz_constant(&f, space);
        if lip > 1.0 + LIP_SLACK {
            return Err(Error::InvalidJacobian(format!("Lipschitz constant {lip} > 1")));
        }
        Ok(Self { f, space: *space })
    }

    /// The depth-1 Jacobian `J(a·x) = p_a`.
    pub fn bernoulli(p: &[f64], space: &ShiftSpace) -> Result<Self> {
        Self::new(DepthKFunction::new(space.d, 1, p.to_vec())?, space)
    }

    /// A random Jacobian of depth `k`.
    ///
    /// `J(a·w) = λ Σ_j c_j q_{w_1..w_j}(a) + (1 − λ)/d` mixes random
    /// probability vectors attached to the prefixes of `w`; the tail sums of
    /// `c_j` equal `γ^i`, which keeps `Lip(J) ≤ 1`.
    pub fn random<R: Rng>(space: &ShiftSpace, k: usize, rng: &mut R) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidJacobian("depth must be at least 1".into()));
        }
        let d = space.d;
        let g = space.gamma;
        let coef: Vec<f64> = (0..k)
            .map(|j| if j + 1 == k { g.powi(j as i32) } else { (1.0 - g) * g.powi(j as i32) })
            .collect();
        let rand_prob = |rng: &mut R| -> Vec<f64> {
            let w: Vec<f64> = (0..d).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        };
        // q[j][u] for every prefix u of length j
        let q: Vec<Vec<Vec<f64>>> =
            (0..k).map(|j| (0..d.pow(j as u32)).map(|_| rand_prob(rng)).collect()).collect();
        let lambda: f64 = rng.gen();
        let tail = d.pow((k - 1) as u32);
        let mut values = vec![0.0; d * tail];
        for a in 0..d {
            for w in 0..tail {
                let mixed: f64 = (0..k)
                    .map(|j| coef[j] * q[j][w / d.pow((k - 1 - j) as u32)][a])
                    .sum();
                values[a * tail + w] = lambda * mixed + (1.0 - lambda) / d as f64;
            }
        }
        // renormalize away rounding so the 1e-12 check is comfortable
        for w in 0..tail {
            let s: f64 = (0..d).map(|a| values[a * tail + w]).sum();
            for a in 0..d {
                values[a * tail + w] /= s;
            }
        }
        Self::new(DepthKFunction::new(d, k, values)?, space)
    }

    pub fn function(&self) -> &DepthKFunction {
        &self.f
    }

    pub fn depth(&self) -> usize {
        self.f.depth
    }

    pub fn space(&self) -> &ShiftSpace {
        &self.space
    }

    pub fn lipschitz(&self) -> f64 {
        lipschitz_constant(&self.f, &self.space)
    }

    /// Tabulated at a larger depth; still a Jacobian.
    pub fn lift(&self, depth: usize) -> Result<Self> {
        Ok(Self { f: self.f.lift(depth)?, space: self.space })
    }

    /// `‖J1 − J2‖_∞` at the larger of the two depths.
    pub fn sup_distance(&self, other: &Jacobian) -> Result<f64> {
        let k = self.depth().max(other.depth());
        self.f.lift(k)?.sup_distance(&other.f.lift(k)?)
    }
}

/// The depth-1 Jacobian `(p, 1 − p)` on two symbols; `Lip = |2p − 1|`.
pub fn make_bernoulli_jacobian(p: f64, space: &ShiftSpace) -> Result<Jacobian> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(format!("p = {p}")));
    }
    if space.d != 2 {
        return Err(invalid("d", "the two-symbol Jacobian needs d = 2"));
    }
    Jacobian::bernoulli(&[p, 1.0 - p], space)
}

// ============================================================================
// Operators
// ============================================================================

/// `L_J f(x) = Σ_a J(a·x) f(a·x)`, tabulated at depth `max(k_f, k_J) − 1`
/// (a constant when both depths are at most 1).
pub fn transfer_apply(j: &Jacobian, f: &DepthKFunction) -> Result<DepthKFunction> {
    if f.d != j.f.d {
        return Err(Error::LengthMismatch(f.d, j.f.d));
    }
    let d = f.d;
    let k = j.depth().max(f.depth);
    let m = k - 1;
    let size = d.pow(m as u32);
    let values = (0..size)
        .map(|x| {
            (0..d)
                .map(|a| {
                    let ax = a * size + x;
                    j.f.at_code(ax, k) * f.values[ax / d.pow((k - f.depth) as u32)]
                })
                .sum()
        })
        .collect();
    DepthKFunction::new(d, m, values)
}

/// The dual `L_J^*`: `ν[a·w] = J(a·w_{1..k−1}) μ[w]` at depth `n + 1`.
pub fn dual_apply(j: &Jacobian, mu: &CylinderMeasure) -> Result<CylinderMeasure> {
    let space = mu.space();
    space.check_same(j.space())?;
    let n = mu.depth;
    if j.depth() > n + 1 {
        return Err(Error::JacobianTooDeep { jacobian: j.depth(), measure: n });
    }
    let size = space.words(n + 1)?;
    let tail = mu.masses.len();
    let shrink = space.d.pow((n + 1 - j.depth()) as u32);
    let masses = (0..size).map(|aw| j.f.values[aw / shrink] * mu.masses[aw % tail]).collect();
    Ok(CylinderMeasure::from_raw(&space, n + 1, masses))
}

/// `L_J^*` followed by the marginal back to depth `depth(μ)`. The result is the
/// exact depth-`n` marginal of `L_J^* μ`.
pub fn dual_apply_fixed(j: &Jacobian, mu: &CylinderMeasure) -> Result<CylinderMeasure> {
    dual_apply(j, mu)?.coarsen()
}

/// The shift pushforward `σ^♯`: `ν[w] = Σ_a μ[a·w]` at depth `n − 1`.
pub fn pushforward_apply(mu: &CylinderMeasure) -> Result<CylinderMeasure> {
    if mu.depth == 0 {
        return Err(Error::DepthMismatch(0, 1));
    }
    let tail = mu.masses.len() / mu.d;
    let masses = (0..tail).map(|w| (0..mu.d).map(|a| mu.masses[a * tail + w]).sum()).collect();
    Ok(CylinderMeasure::from_raw(&mu.space(), mu.depth - 1, masses))
}

/// Result of iterating duals.
#[derive(Clone, Debug, PartialEq)]
pub struct ComposeResult {
    /// `L*_{J_1} ∘ … ∘ L*_{J_N}(ν₀)` at depth `depth(ν₀)`.
    pub measure: CylinderMeasure,
    /// `W1(ρ_k, ρ_{k+1})` for `k = 1..N−1`, where `ρ_k = L*_{J_1} ∘ … ∘ L*_{J_k}(ν₀)`.
    pub trace: Vec<f64>,
}

/// Applies `L*_{J_1} ∘ … ∘ L*_{J_N}` to `ν₀` (so `J_N` acts first), keeping
/// the working depth fixed at `depth(ν₀)`.
pub fn compose_duals(js: &[Jacobian], nu0: &CylinderMeasure, space: &ShiftSpace) -> Result<ComposeResult> {
    if js.is_empty() {
        return Err(invalid("js", "empty Jacobian sequence"));
    }
    space.check_same(&nu0.space())?;
    let apply_prefix = |k: usize| -> Result<CylinderMeasure> {
        let mut cur = nu0.clone();
        for j in js[..k].iter().rev() {
            cur = dual_apply_fixed(j, &cur)?;
        }
        Ok(cur)
    };
    let rhos: Vec<CylinderMeasure> = (1..=js.len()).map(apply_prefix).collect::<Result<_>>()?;
    let trace = rhos
        .windows(2)
        .map(|w| crate::transport::w1_tree(&w[0], &w[1], space))
        .collect::<Result<_>>()?;
    Ok(ComposeResult { measure: rhos.into_iter().last().expect("nonempty"), trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::any;
    use proptest::{prop_assert, prop_assert_eq, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp(d: usize, g: f64) -> ShiftSpace {
        ShiftSpace::new(d, g).unwrap()
    }

    fn w(s: &[usize]) -> Word {
        Word::new(s.to_vec(), 3).unwrap()
    }

    #[test]
    fn space_validation() {
        assert!(ShiftSpace::new(1, 0.1).is_err());
        assert!(ShiftSpace::new(2, 1.0 / 3.0).is_err());
        assert!(ShiftSpace::new(2, 0.0).is_err());
        assert!((sp(2, 0.3).rate() - 0.9).abs() < 1e-15);
    }

    #[test]
    fn metric_examples() {
        let s = sp(2, 0.3);
        assert_eq!(word_metric(&w(&[1, 1]), &w(&[1, 1]), &s).unwrap(), 0.0);
        assert_eq!(word_metric(&w(&[1, 1]), &w(&[2, 1]), &s).unwrap(), 1.0);
        assert_eq!(word_metric(&w(&[1, 1]), &w(&[1, 2]), &s).unwrap(), 0.3);
        assert!(word_metric(&w(&[1]), &w(&[1, 2]), &s).is_err());
    }

    fn brute_lipschitz(f: &DepthKFunction, s: &ShiftSpace) -> f64 {
        let n = f.values.len();
        let mut best: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                if a != b {
                    let r = (f.values[a] - f.values[b]).abs() / code_distance(a, b, f.depth, s);
                    best = best.max(r);
                }
            }
        }
        best
    }

    #[test]
    fn lipschitz_examples() {
        let s = sp(2, 0.3);
        assert_eq!(lipschitz_constant(&DepthKFunction::new(2, 2, vec![4.0; 4]).unwrap(), &s), 0.0);
        assert_eq!(lipschitz_constant(&DepthKFunction::new(2, 1, vec![0.0, 1.0]).unwrap(), &s), 1.0);
        let c = 0.05;
        let f = DepthKFunction::new(2, 2, vec![0.0, 0.0, 0.0, c]).unwrap();
        assert!((lipschitz_constant(&f, &s) - c / 0.3).abs() < 1e-15);
        assert!((brute_lipschitz(&f, &s) - c / 0.3).abs() < 1e-15);
    }

    #[test]
    fn lipschitz_matches_pair_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (d, g, k) in [(2, 0.3, 4), (3, 0.2, 3), (4, 0.15, 2)] {
            let s = sp(d, g);
            for _ in 0..20 {
                let f = DepthKFunction::random(d, k, -1.0, 1.0, &mut rng).unwrap();
                assert!((lipschitz_constant(&f, &s) - brute_lipschitz(&f, &s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bernoulli_jacobian() {
        let s = sp(2, 0.3);
        let j = make_bernoulli_jacobian(0.5, &s).unwrap();
        assert_eq!(j.lipschitz(), 0.0);
        let j = make_bernoulli_jacobian(0.3, &s).unwrap();
        assert_eq!(j.function().values(), &[0.3, 0.7]);
        assert!((j.lipschitz() - 0.4).abs() < 1e-15);
        assert!(make_bernoulli_jacobian(1.2, &s).is_err());
    }

    #[test]
    fn jacobian_validation() {
        let s = sp(2, 0.3);
        let unnormalized = DepthKFunction::new(2, 1, vec![0.3, 0.3]).unwrap();
        assert!(Jacobian::new(unnormalized, &s).is_err());
        // normalized but too steep in the second coordinate
        let steep = DepthKFunction::new(2, 2, vec![0.1, 0.9, 0.9, 0.1]).unwrap();
        assert!(Jacobian::new(steep, &s).is_err());
    }

    #[test]
    fn random_jacobians_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (d, g) in [(2, 0.3), (3, 0.2), (2, 0.05)] {
            for k in 1..=4 {
                for _ in 0..10 {
                    let j = Jacobian::random(&sp(d, g), k, &mut rng).unwrap();
                    assert!(j.lipschitz() <= 1.0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn transfer_examples() {
        let s = sp(2, 0.3);
        let j = make_bernoulli_jacobian(0.3, &s).unwrap();
        let one = DepthKFunction::new(2, 3, vec![1.0; 8]).unwrap();
        let l = transfer_apply(&j, &one).unwrap();
        assert_eq!(l.depth(), 2);
        assert!(l.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let f = DepthKFunction::new(2, 1, vec![2.0, -1.0]).unwrap();
        let l = transfer_apply(&j, &f).unwrap();
        assert_eq!(l.depth(), 0);
        assert!((l.values()[0] - (0.3 * 2.0 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn transfer_contracts_lipschitz_seminorm() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sp(2, 0.3);
        for _ in 0..200 {
            let j = Jacobian::random(&s, rng.gen_range(1..=3), &mut rng).unwrap();
            let f = DepthKFunction::random(2, rng.gen_range(1..=4), 0.0, 1.0, &mut rng).unwrap();
            let f = f.shifted(-f.min());
            let lf = transfer_apply(&j, &f).unwrap();
            assert!(lipschitz_constant(&lf, &s) <= s.rate() * lipschitz_constant(&f, &s) + 1e-10);
        }
    }

    #[test]
    fn duality_of_transfer_and_dual() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = sp(3, 0.2);
        for _ in 0..50 {
            let j = Jacobian::random(&s, 2, &mut rng).unwrap();
            let mu = CylinderMeasure::random(&s, 2, 0.2, &mut rng).unwrap();
            let f = DepthKFunction::random(3, 3, -1.0, 1.0, &mut rng).unwrap();
            let lhs = dual_apply(&j, &mu).unwrap().integrate(&f).unwrap();
            let rhs = mu.integrate(&transfer_apply(&j, &f).unwrap()).unwrap();
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn product_formula() {
        let s = sp(2, 0.3);
        let j3 = make_bernoulli_jacobian(0.3, &s).unwrap();
        let j6 = make_bernoulli_jacobian(0.6, &s).unwrap();
        let nu0 = CylinderMeasure::point_mass(&s, &Word::new(vec![2, 1], 2).unwrap()).unwrap();
        let m = dual_apply(&j3, &nu0).unwrap();
        assert!((m.coarsen_to(1).unwrap().masses()[0] - 0.3).abs() < 1e-15);
        let r = compose_duals(&[j3, j6], &nu0, &s).unwrap();
        let expect = [0.18, 0.12, 0.42, 0.28];
        for (a, b) in r.measure.masses().iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_refuses_deep_jacobian() {
        let s = sp(2, 0.3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let j = Jacobian::random(&s, 3, &mut rng).unwrap();
        let mu = CylinderMeasure::uniform(&s, 1).unwrap();
        assert!(matches!(dual_apply(&j, &mu), Err(Error::JacobianTooDeep { .. })));
        assert!(dual_apply(&j, &mu.refine().unwrap()).is_ok());
    }

    #[test]
    fn bernoulli_is_fixed_and_shift_invariant() {
        let s = sp(2, 0.3);
        let j = make_bernoulli_jacobian(0.3, &s).unwrap();
        let b3 = CylinderMeasure::bernoulli(&s, &[0.3, 0.7], 3).unwrap();
        let b2 = CylinderMeasure::bernoulli(&s, &[0.3, 0.7], 2).unwrap();
        let img = dual_apply(&j, &b2).unwrap();
        for (a, b) in img.masses().iter().zip(b3.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
        let push = pushforward_apply(&b3).unwrap();
        for (a, b) in push.masses().iter().zip(b2.masses()) {
            assert!((a - b).abs() < 1e-15);
        }
        // an inhomogeneous product is not shift invariant
        let prod = CylinderMeasure::product(&s, &[vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        let push = pushforward_apply(&prod).unwrap();
        assert!((push.masses()[0] - 0.6).abs() < 1e-15);
        assert!((prod.coarsen().unwrap().masses()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn compose_converges_to_bernoulli() {
        let s = sp(2, 0.3);
        let js = vec![make_bernoulli_jacobian(0.3, &s).unwrap(); 12];
        let a = CylinderMeasure::point_mass(&s, &Word::new(vec![1; 5], 2).unwrap()).unwrap();
        let b = CylinderMeasure::point_mass(&s, &Word::new(vec![2; 5], 2).unwrap()).unwrap();
        let ra = compose_duals(&js, &a, &s).unwrap();
        let rb = compose_duals(&js, &b, &s).unwrap();
        let target = CylinderMeasure::bernoulli(&s, &[0.3, 0.7], 5).unwrap();
        // depth-5 marginal is exact after five steps
        for (x, y) in ra.measure.masses().iter().zip(target.masses()) {
            assert!((x - y).abs() < 1e-14);
        }
        let gap = crate::transport::w1_tree(&ra.measure, &rb.measure, &s).unwrap();
        assert!(gap <= s.rate().powi(12) + 1e-15);
        for pair in ra.trace.windows(2) {
            assert!(pair[1] <= s.rate() * pair[0] + 1e-15);
        }
    }

    #[test]
    fn refine_then_coarsen_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mu = CylinderMeasure::random(&sp(3, 0.2), 3, 0.3, &mut rng).unwrap();
        let back = mu.refine().unwrap().coarsen().unwrap();
        for (a, b) in back.masses().iter().zip(mu.masses()) {
            assert!((a - b).abs() <= 1e-16);
        }
        let mu = CylinderMeasure::random(&sp(2, 0.3), 4, 0.3, &mut rng).unwrap();
        assert_eq!(mu.refine().unwrap().coarsen().unwrap(), mu);
    }

    proptest! {
        #[test]
        fn section_identity(seed in any::<u64>(), d in 2usize..4, n in 0usize..4, k in 1usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sp(d, 0.9 / (d as f64 + 1.0));
            let k = k.min(n + 1);
            let j = Jacobian::random(&s, k, &mut rng).unwrap();
            let mu = CylinderMeasure::random(&s, n, 0.3, &mut rng).unwrap();
            let nu = dual_apply(&j, &mu).unwrap();
            prop_assert!((nu.total_mass() - 1.0).abs() < 1e-12);
            let back = pushforward_apply(&nu).unwrap();
            for (a, b) in back.masses().iter().zip(mu.masses()) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn json_round_trip(seed in any::<u64>(), n in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = CylinderMeasure::random(&sp(3, 0.2), n, 0.2, &mut rng).unwrap();
            let back = CylinderMeasure::from_json(&mu.to_json()).unwrap();
            prop_assert_eq!(back, mu);
        }
    }
}
