//! Invariant idempotent pressures.
//!
//! * A finite family of Jacobians with weights `q_J ≤ 0`, `max q_J = 0`. Words
//!   `w = (w_1..w_N)` over the family give measures
//!   `μ_w = L*_{J_{w_1}} ∘ … ∘ L*_{J_{w_N}}(ν₀)` of weight `Σ q_{J_{w_i}}`;
//!   the invariant pressure is `ℓ(g) = max_w [weight(w) + g(μ_w)]` up to the
//!   contraction error `L_g r^N / (1 − r)`.
//! * Invariance of a density on a simplex grid under a pushforward `T^♯`.
//! * A max-plus IFS on an opaque finite point set: the Ruelle operator, the
//!   transfer operator on densities, the Markov operator on pressures, and
//!   the inverse problem.

use std::collections::HashMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::maxplus::{Bottom, DensitySample, Finite, IdempotentPressure, MaxPlusValue};
use crate::shift::{dual_apply_fixed, CylinderMeasure, Jacobian, ShiftSpace};
use crate::simplex::ProbVector;
use crate::transport::w1_tree;

/// Default cap on the number of enumerated words.
pub const DEFAULT_BUDGET: u128 = 1 << 20;
const NORM_TOL: f64 = 1e-12;

// ============================================================================
// Weighted Jacobian families
// ============================================================================

#[derive(Clone, Debug, PartialEq)]
pub struct WeightedJacobianFamily {
    jacobians: Vec<Jacobian>,
    weights: Vec<f64>,
    space: ShiftSpace,
}

impl WeightedJacobianFamily {
    pub fn new(jacobians: Vec<Jacobian>, weights: Vec<f64>) -> Result<Self> {
        if jacobians.is_empty() {
            return Err(invalid("jacobians", "empty family"));
        }
        if jacobians.len() != weights.len() {
            return Err(Error::LengthMismatch(jacobians.len(), weights.len()));
        }
        let space = *jacobians[0].space();
        for j in &jacobians[1..] {
            space.check_same(j.space())?;
        }
        if let Some(q) = weights.iter().find(|q| !q.is_finite() || **q > 0.0) {
            return Err(invalid("weights", format!("weight {q} is not a finite value <= 0")));
        }
        let top = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top.abs() > NORM_TOL {
            return Err(invalid("weights", format!("max weight is {top}, not 0")));
        }
        Ok(Self { jacobians, weights, space })
    }

    pub fn jacobians(&self) -> &[Jacobian] {
        &self.jacobians
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn space(&self) -> &ShiftSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.jacobians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jacobians.is_empty()
    }

    pub fn max_depth(&self) -> usize {
        self.jacobians.iter().map(Jacobian::depth).max().unwrap_or(1)
    }

    /// `L*_{J_{w_1}} ∘ … ∘ L*_{J_{w_N}}(ν₀)` at depth `depth(ν₀)`, with 1-based indices.
    pub fn apply_word(&self, word: &[usize], nu0: &CylinderMeasure) -> Result<CylinderMeasure> {
        let mut cur = nu0.clone();
        for &i in word.iter().rev() {
            let j = self.jacobians.get(i.wrapping_sub(1)).ok_or_else(|| invalid("word", format!("index {i}")))?;
            cur = dual_apply_fixed(j, &cur)?;
        }
        Ok(cur)
    }

    pub fn word_weight(&self, word: &[usize]) -> f64 {
        word.iter().map(|&i| self.weights[i - 1]).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorOptions {
    /// Merge tolerance; `None` means `max(r^N, γ^depth)`.
    pub epsilon: Option<f64>,
    /// Drop branches whose cumulative weight falls below this floor.
    pub weight_floor: Option<f64>,
    pub budget: u128,
    /// Cluster leaves within `epsilon`.
    pub merge: bool,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        Self { epsilon: None, weight_floor: None, budget: DEFAULT_BUDGET, merge: true }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Leaf {
    /// 1-based family indices; `word[0]` is applied last.
    pub word: Vec<usize>,
    pub weight: f64,
    pub measure: CylinderMeasure,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cluster {
    /// Leaf index of the representative.
    pub representative: usize,
    pub members: Vec<usize>,
    /// Largest member weight.
    pub weight: f64,
    /// Largest W1 from the representative to a member; the diameter is at most twice this.
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttractorSample {
    pub space: ShiftSpace,
    pub depth: usize,
    pub n_steps: usize,
    pub epsilon: f64,
    pub rate: f64,
    /// Leaves in lexicographic word order.
    pub leaves: Vec<Leaf>,
    pub clusters: Vec<Cluster>,
    pub weight_floor: Option<f64>,
    pub pruned: u64,
}

fn check_budget(m: usize, n: usize, budget: u128) -> Result<()> {
    let leaves = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if leaves > budget {
        let suggested = if m <= 1 { n } else { ((budget as f64).ln() / (m as f64).ln()).floor() as usize };
        return Err(Error::OverBudget { leaves, budget, suggested });
    }
    Ok(())
}

/// All words of length `n` with their measures, in lexicographic order.
fn enumerate_leaves(
    fam: &WeightedJacobianFamily,
    n: usize,
    nu0: &CylinderMeasure,
    floor: Option<f64>,
) -> Result<(Vec<Leaf>, u64)> {
    if fam.max_depth() > nu0.depth() + 1 {
        return Err(Error::JacobianTooDeep { jacobian: fam.max_depth(), measure: nu0.depth() });
    }
    // grow words to the left: the innermost map is the last symbol
    #[allow(clippy::too_many_arguments)]
    fn grow(
        fam: &WeightedJacobianFamily,
        suffix: Vec<usize>,
        weight: f64,
        measure: CylinderMeasure,
        n: usize,
        floor: Option<f64>,
        out: &mut Vec<Leaf>,
        pruned: &mut u64,
    ) -> Result<()> {
        if suffix.len() == n {
            out.push(Leaf { word: suffix, weight, measure });
            return Ok(());
        }
        for (i, j) in fam.jacobians.iter().enumerate() {
            let w = weight + fam.weights[i];
            if floor.is_some_and(|f| w < f) {
                *pruned += 1;
                continue;
            }
            let mut word = Vec::with_capacity(suffix.len() + 1);
            word.push(i + 1);
            word.extend_from_slice(&suffix);
            grow(fam, word, w, dual_apply_fixed(j, &measure)?, n, floor, out, pruned)?;
        }
        Ok(())
    }
    let parts: Vec<Result<(Vec<Leaf>, u64)>> = (0..fam.len())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            let mut pruned = 0;
            let w = fam.weights[i];
            if floor.is_some_and(|f| w < f) {
                return Ok((out, 1));
            }
            let first = dual_apply_fixed(&fam.jacobians[i], nu0)?;
            grow(fam, vec![i + 1], w, first, n, floor, &mut out, &mut pruned)?;
            Ok((out, pruned))
        })
        .collect();
    let mut leaves = Vec::new();
    let mut pruned = 0;
    for part in parts {
        let (l, p) = part?;
        leaves.extend(l);
        pruned += p;
    }
    leaves.sort_by(|a, b| a.word.cmp(&b.word));
    Ok((leaves, pruned))
}

/// Enumerates all words of length `n_steps` (optionally pruned by weight) and
/// clusters the resulting measures.
pub fn attractor_build(
    fam: &WeightedJacobianFamily,
    n_steps: usize,
    nu0: &CylinderMeasure,
    space: &ShiftSpace,
    options: &AttractorOptions,
) -> Result<AttractorSample> {
    if n_steps < 1 {
        return Err(invalid("N", "need at least one step"));
    }
    space.check_same(fam.space())?;
    space.check_same(&nu0.space())?;
    check_budget(fam.len(), n_steps, options.budget)?;
    let rate = space.rate();
    let depth = nu0.depth();
    let epsilon = options
        .epsilon
        .unwrap_or_else(|| rate.powi(n_steps as i32).max(space.gamma().powi(depth as i32)));
    let (leaves, pruned) = enumerate_leaves(fam, n_steps, nu0, options.weight_floor)?;
    let clusters = if options.merge { cluster_leaves(&leaves, epsilon, space)? } else { Vec::new() };
    Ok(AttractorSample {
        space: *space,
        depth,
        n_steps,
        epsilon,
        rate,
        leaves,
        clusters,
        weight_floor: options.weight_floor,
        pruned,
    })
}

/// Greedy single pass in leaf order: a leaf joins the first cluster whose
/// representative is within `eps`, otherwise it opens a new cluster.
fn cluster_leaves(leaves: &[Leaf], eps: f64, space: &ShiftSpace) -> Result<Vec<Cluster>> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, leaf) in leaves.iter().enumerate() {
        let mut joined = false;
        for c in clusters.iter_mut() {
            let dist = w1_tree(&leaves[c.representative].measure, &leaf.measure, space)?;
            if dist <= eps {
                c.members.push(i);
                c.weight = c.weight.max(leaf.weight);
                c.radius = c.radius.max(dist);
                joined = true;
                break;
            }
        }
        if !joined {
            clusters.push(Cluster { representative: i, members: vec![i], weight: leaf.weight, radius: 0.0 });
        }
    }
    Ok(clusters)
}

impl AttractorSample {
    /// Largest excess of `W1(μ_u, μ_v)` over `r^k + 2γ^depth` for leaves sharing
    /// a length-`k` prefix, over at most `max_pairs` pairs in leaf order.
    pub fn prefix_contraction_excess(&self, max_pairs: usize) -> Result<f64> {
        let slack = 2.0 * self.space.gamma().powi(self.depth as i32);
        let mut worst = f64::NEG_INFINITY;
        let mut count = 0;
        'outer: for a in 0..self.leaves.len() {
            for b in (a + 1)..self.leaves.len() {
                if count >= max_pairs {
                    break 'outer;
                }
                count += 1;
                let (u, v) = (&self.leaves[a], &self.leaves[b]);
                let k = u.word.iter().zip(&v.word).take_while(|(x, y)| x == y).count();
                let w = w1_tree(&u.measure, &v.measure, &self.space)?;
                worst = worst.max(w - (self.rate.powi(k as i32) + slack));
            }
        }
        Ok(worst)
    }

    pub fn to_json(&self) -> String {
        let mut table: Vec<CylinderMeasure> = Vec::new();
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        let measures = self
            .leaves
            .iter()
            .map(|l| {
                let key: Vec<u64> = l.measure.masses().iter().map(|m| m.to_bits()).collect();
                *seen.entry(key).or_insert_with(|| {
                    table.push(l.measure.clone());
                    table.len() - 1
                })
            })
            .collect();
        let out = AttractorJson {
            d: self.space.d(),
            gamma: self.space.gamma(),
            depth: self.depth,
            words: self.leaves.iter().map(|l| l.word.clone()).collect(),
            weights: self.leaves.iter().map(|l| l.weight).collect(),
            measures,
            measure_table: table,
            clusters: self.clusters.iter().map(|c| c.representative).collect(),
            epsilon: self.epsilon,
            n: self.n_steps,
            r: self.rate,
        };
        serde_json::to_string(&out).expect("attractor serializes")
    }
}

/// Serialized form of an [`AttractorSample`]; `measures[i]` indexes `measure_table`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttractorJson {
    pub d: usize,
    pub gamma: f64,
    pub depth: usize,
    pub words: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    pub measures: Vec<usize>,
    pub measure_table: Vec<CylinderMeasure>,
    /// Leaf index of each cluster representative.
    pub clusters: Vec<usize>,
    pub epsilon: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub r: f64,
}

/// Density entropy at a measure, from a finite attractor sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EntropyEstimate {
    /// Largest leaf weight within `ε`; extending that word by a zero-weight
    /// map gives an infinite sequence with this weight whose limit lies within
    /// `ε + drift`.
    pub value: MaxPlusValue,
    /// Largest leaf weight within `ε + r^N`: no infinite sequence whose limit
    /// is within `ε` can weigh more.
    pub upper: MaxPlusValue,
    /// `r^N / (1 − r)`.
    pub drift: f64,
    pub matched: usize,
}

pub fn density_entropy_estimate(sample: &AttractorSample, mu: &CylinderMeasure) -> Result<EntropyEstimate> {
    let tail = sample.rate.powi(sample.n_steps as i32);
    let mut value = Bottom;
    let mut upper = Bottom;
    let mut matched = 0;
    for leaf in &sample.leaves {
        let dist = w1_tree(&leaf.measure, mu, &sample.space)?;
        if dist <= sample.epsilon {
            matched += 1;
            value = value.oplus(Finite(leaf.weight));
        }
        if dist <= sample.epsilon + tail {
            upper = upper.oplus(Finite(leaf.weight));
        }
    }
    Ok(EntropyEstimate { value, upper, drift: tail / (1.0 - sample.rate), matched })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvariantPressure {
    /// `max_w [weight(w) + g(μ_w)]` over words of length `N`.
    pub value: f64,
    pub argmax: Vec<usize>,
    /// `L_g r^N / (1 − r)`.
    pub error_bound: f64,
    /// `max_J [q_J + ℓ(g ∘ L*_J)]` on the same sample.
    pub fixed_point_value: f64,
    pub fixed_point_residual: f64,
    pub leaves: usize,
}

/// The invariant pressure `ℓ(g)` of a weighted family, for an observable `g`
/// with Lipschitz constant `lip_g` with respect to W1.
pub fn invariant_pressure_solve(
    fam: &WeightedJacobianFamily,
    g: &dyn Fn(&CylinderMeasure) -> f64,
    lip_g: f64,
    n_steps: usize,
    nu0: &CylinderMeasure,
    space: &ShiftSpace,
    budget: u128,
) -> Result<InvariantPressure> {
    if n_steps < 1 {
        return Err(invalid("N", "need at least one step"));
    }
    space.check_same(fam.space())?;
    space.check_same(&nu0.space())?;
    check_budget(fam.len(), n_steps + 1, budget)?;
    let (leaves, _) = enumerate_leaves(fam, n_steps, nu0, None)?;
    let mut best = f64::NEG_INFINITY;
    let mut argmax = Vec::new();
    for leaf in &leaves {
        let v = leaf.weight + g(&leaf.measure);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("g at word {:?}", leaf.word)));
        }
        if v > best {
            best = v;
            argmax = leaf.word.clone();
        }
    }
    let mut fixed = f64::NEG_INFINITY;
    for (j, q) in fam.jacobians.iter().zip(&fam.weights) {
        for leaf in &leaves {
            fixed = fixed.max(q + leaf.weight + g(&dual_apply_fixed(j, &leaf.measure)?));
        }
    }
    let r = space.rate();
    Ok(InvariantPressure {
        value: best,
        argmax,
        error_bound: lip_g * r.powi(n_steps as i32) / (1.0 - r),
        fixed_point_value: fixed,
        fixed_point_residual: (fixed - best).abs(),
        leaves: leaves.len(),
    })
}

// ============================================================================
// Pushforward invariance on a simplex grid
// ============================================================================

/// `T^♯ p` for a map `T` on symbols given 1-based: `(T^♯ p)_j = Σ_{T(i)=j} p_i`.
pub fn pushforward_prob(t: &[usize], p: &ProbVector) -> Result<ProbVector> {
    let d = p.dim();
    if t.len() != d {
        return Err(Error::LengthMismatch(t.len(), d));
    }
    let mut out = vec![0.0; d];
    for (i, &ti) in t.iter().enumerate() {
        if ti < 1 || ti > d {
            return Err(invalid("T", format!("image {ti} outside 1..={d}")));
        }
        out[ti - 1] += p.masses()[i];
    }
    ProbVector::new(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushforwardReport {
    /// `max_g |ℓ(g ∘ T^♯) − ℓ(g)|` over the test family (infinite when one side is bottom).
    pub pressure_residual: f64,
    /// Name of the observable that attains `pressure_residual`.
    pub witness: Option<String>,
    /// Whether `h(ν) = sup_{T^♯ μ = ν} h(μ)` at every grid point.
    pub density_holds: bool,
    pub pressure_holds: bool,
    pub tests: usize,
}

fn value_gap(a: MaxPlusValue, b: MaxPlusValue) -> f64 {
    match (a, b) {
        (Bottom, Bottom) => 0.0,
        (Finite(x), Finite(y)) => (x - y).abs(),
        _ => f64::INFINITY,
    }
}

/// Compares `ℓ(g ∘ T^♯)` with `ℓ(g)` on `random` random tables and on the
/// delta observables (0 at one grid point, `−K` elsewhere), and checks the
/// fiber characterization of invariant densities.
pub fn pushforward_invariance_check<R: Rng>(
    h: &DensitySample<ProbVector>,
    t: &[usize],
    random: usize,
    tol: f64,
    rng: &mut R,
) -> Result<PushforwardReport> {
    let pts = h.points();
    let n = pts.len();
    let image: Vec<usize> = pts
        .iter()
        .map(|p| {
            let q = pushforward_prob(t, p)?;
            pts.iter()
                .position(|x| x.linf_distance(&q) <= 1e-12)
                .ok_or_else(|| Error::GridNotClosed(format!("{:?} has no grid point", q.masses())))
        })
        .collect::<Result<_>>()?;

    let ell = IdempotentPressure::new(h.clone());
    let finite: Vec<f64> = h.values().iter().filter_map(|v| v.finite()).collect();
    let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - finite.iter().copied().fold(f64::INFINITY, f64::min);
    // random tables live in [-1, 1]; keep the delta gaps larger than theirs
    let k = 2.0 * spread + 3.0;

    let mut family: Vec<(String, Vec<f64>)> = (0..n)
        .map(|i| (format!("delta at {:?}", pts[i].masses()), (0..n).map(|j| if i == j { 0.0 } else { -k }).collect()))
        .collect();
    for r in 0..random {
        family.push((format!("random table #{r}"), (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()));
    }
    let mut residual: f64 = 0.0;
    let mut witness = None;
    for (name, g) in &family {
        let lhs = ell.eval_table(&image.iter().map(|&j| g[j]).collect::<Vec<_>>())?;
        let rhs = ell.eval_table(g)?;
        let gap = value_gap(lhs, rhs);
        if gap > residual {
            residual = gap;
            witness = Some(name.clone());
        }
    }

    // fiber sup h'(ν) = max_{T^♯ μ = ν} h(μ)
    let mut fiber = vec![Bottom; n];
    for (i, &j) in image.iter().enumerate() {
        fiber[j] = fiber[j].oplus(h.values()[i]);
    }
    let density_holds = fiber.iter().zip(h.values()).all(|(a, b)| value_gap(*a, *b) <= tol);
    Ok(PushforwardReport {
        pressure_residual: residual,
        witness: if residual > tol { witness } else { None },
        density_holds,
        pressure_holds: residual <= tol,
        tests: family.len(),
    })
}

// ============================================================================
// Max-plus IFS on an opaque finite point set
// ============================================================================

/// Points are `0..n`. `maps[ν][μ] = φ_ν(μ)` and `weights[ν][μ] = q_ν(μ) ≤ 0`
/// with `max_ν q_ν(μ) = 0` for every `μ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MpIFSSystem {
    n: usize,
    maps: Vec<Vec<usize>>,
    weights: Vec<Vec<f64>>,
}

impl MpIFSSystem {
    pub fn new(n: usize, maps: Vec<Vec<usize>>, weights: Vec<Vec<f64>>) -> Result<Self> {
        if n == 0 || maps.is_empty() {
            return Err(invalid("points", "need at least one point and one map"));
        }
        if maps.len() != weights.len() {
            return Err(Error::LengthMismatch(maps.len(), weights.len()));
        }
        for (m, q) in maps.iter().zip(&weights) {
            if m.len() != n || q.len() != n {
                return Err(Error::LengthMismatch(m.len().min(q.len()), n));
            }
            if let Some(x) = m.iter().find(|&&x| x >= n) {
                return Err(invalid("maps", format!("target {x} outside 0..{n}")));
            }
            if let Some(x) = q.iter().find(|x| !x.is_finite() || **x > 0.0) {
                return Err(invalid("weights", format!("{x} is not a finite value <= 0")));
            }
        }
        for mu in 0..n {
            let top = weights.iter().map(|q| q[mu]).fold(f64::NEG_INFINITY, f64::max);
            if top.abs() > NORM_TOL {
                return Err(invalid("weights", format!("max over maps at point {mu} is {top}, not 0")));
            }
        }
        Ok(Self { n, maps, weights })
    }

    /// Index set equal to the points, `φ_ν ≡ ν`; `weights[ν][μ] = q_ν(μ)`.
    pub fn constant_maps(weights: Vec<Vec<f64>>) -> Result<Self> {
        let n = weights.len();
        let maps = (0..n).map(|nu| vec![nu; n]).collect();
        Self::new(n, maps, weights)
    }

    /// Random maps (or constant ones) with weights in `[-2, 0]`, one zero per point.
    pub fn random<R: Rng>(n: usize, n_maps: usize, constant: bool, rng: &mut R) -> Result<Self> {
        let n_maps = if constant { n } else { n_maps };
        let maps: Vec<Vec<usize>> = (0..n_maps)
            .map(|nu| (0..n).map(|_| if constant { nu } else { rng.gen_range(0..n) }).collect())
            .collect();
        let mut weights: Vec<Vec<f64>> =
            (0..n_maps).map(|_| (0..n).map(|_| -2.0 * rng.gen::<f64>()).collect()).collect();
        for mu in 0..n {
            let nu = rng.gen_range(0..n_maps);
            weights[nu][mu] = 0.0;
        }
        Self::new(n, maps, weights)
    }

    pub fn n_points(&self) -> usize {
        self.n
    }

    pub fn n_maps(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[Vec<usize>] {
        &self.maps
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    /// The points as a density support.
    pub fn points(&self) -> Vec<usize> {
        (0..self.n).collect()
    }
}

/// `𝓛f(μ) = max_ν [q_ν(μ) + f(φ_ν(μ))]`.
pub fn mpifs_ruelle(f: &[f64], sys: &MpIFSSystem) -> Result<Vec<f64>> {
    if f.len() != sys.n {
        return Err(Error::LengthMismatch(f.len(), sys.n));
    }
    Ok((0..sys.n)
        .map(|mu| {
            sys.maps
                .iter()
                .zip(&sys.weights)
                .map(|(m, q)| q[mu] + f[m[mu]])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// `Lλ(μ) = max_{φ_ν(η) = μ} [q_ν(η) + λ(η)]`, bottom on an empty fiber.
pub fn mpifs_transfer(lambda: &DensitySample<usize>, sys: &MpIFSSystem) -> Result<DensitySample<usize>> {
    if lambda.len() != sys.n {
        return Err(Error::LengthMismatch(lambda.len(), sys.n));
    }
    let mut out = vec![Bottom; sys.n];
    for (m, q) in sys.maps.iter().zip(&sys.weights) {
        for eta in 0..sys.n {
            let v = lambda.values()[eta].odot(Finite(q[eta]));
            out[m[eta]] = out[m[eta]].oplus(v);
        }
    }
    DensitySample::new(sys.points(), out)
}

/// `𝓜(ℓ)(f) = max_ν ℓ(q_ν + f ∘ φ_ν)`, evaluating `ℓ` as a black box.
pub fn mpifs_markov(ell: &IdempotentPressure<usize>, f: &[f64], sys: &MpIFSSystem) -> Result<MaxPlusValue> {
    if f.len() != sys.n {
        return Err(Error::LengthMismatch(f.len(), sys.n));
    }
    let mut out = Bottom;
    for (m, q) in sys.maps.iter().zip(&sys.weights) {
        let g: Vec<f64> = (0..sys.n).map(|eta| q[eta] + f[m[eta]]).collect();
        out = out.oplus(ell.eval_table(&g)?);
    }
    Ok(out)
}

/// Observables that are 0 at one point and `−K` elsewhere, with `K` larger
/// than every value spread involved in comparing `λ` with `Lλ`.
pub fn mpifs_delta_family(lambda: &DensitySample<usize>, sys: &MpIFSSystem) -> Result<Vec<Vec<f64>>> {
    let image = mpifs_transfer(lambda, sys)?;
    let finite: Vec<f64> =
        lambda.values().iter().chain(image.values()).filter_map(|v| v.finite()).collect();
    let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - finite.iter().copied().fold(f64::INFINITY, f64::min);
    let k = 2.0 * spread + 1.0;
    Ok((0..sys.n).map(|i| (0..sys.n).map(|j| if i == j { 0.0 } else { -k }).collect()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MpInvarianceReport {
    /// `max_f |𝓜(ℓ)(f) − ℓ(f)|`.
    pub markov_residual: f64,
    /// `max_μ |Lλ(μ) − λ(μ)|`.
    pub transfer_residual: f64,
    /// `max_f |ℓ(𝓛f) − ℓ(f)|`.
    pub ruelle_residual: f64,
    /// `max_f` of the spread between `ℓ_{Lλ}(f)`, `𝓜(ℓ)(f)` and `ℓ(𝓛f)`.
    pub duality_residual: f64,
    pub tol: f64,
}

impl MpInvarianceReport {
    pub fn conditions(&self) -> [bool; 3] {
        [self.markov_residual <= self.tol, self.transfer_residual <= self.tol, self.ruelle_residual <= self.tol]
    }

    /// All three conditions pass or all fail.
    pub fn agree(&self) -> bool {
        let c = self.conditions();
        c[0] == c[1] && c[1] == c[2]
    }

    pub fn invariant(&self) -> bool {
        self.conditions().iter().all(|&c| c)
    }
}

pub fn mpifs_invariance_check(
    lambda: &DensitySample<usize>,
    sys: &MpIFSSystem,
    f_family: &[Vec<f64>],
    tol: f64,
) -> Result<MpInvarianceReport> {
    let ell = IdempotentPressure::new(lambda.clone());
    let image = mpifs_transfer(lambda, sys)?;
    let ell_image = IdempotentPressure::new(image.clone());
    let transfer_residual = image
        .values()
        .iter()
        .zip(lambda.values())
        .map(|(a, b)| value_gap(*a, *b))
        .fold(0.0, f64::max);
    let (mut markov_residual, mut ruelle_residual, mut duality_residual) = (0.0f64, 0.0f64, 0.0f64);
    for f in f_family {
        let base = ell.eval_table(f)?;
        let m = mpifs_markov(&ell, f, sys)?;
        let r = ell.eval_table(&mpifs_ruelle(f, sys)?)?;
        let t = ell_image.eval_table(f)?;
        markov_residual = markov_residual.max(value_gap(m, base));
        ruelle_residual = ruelle_residual.max(value_gap(r, base));
        duality_residual = duality_residual.max(value_gap(m, r)).max(value_gap(m, t));
    }
    Ok(MpInvarianceReport { markov_residual, transfer_residual, ruelle_residual, duality_residual, tol })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValueIteration {
    pub fixed_point: DensitySample<usize>,
    pub iterations: usize,
    pub converged: bool,
    /// Each iterate was pointwise at most the previous one.
    pub monotone: bool,
}

/// Iterates `λ ← Lλ` from `λ₀ ≡ 0` until the table stops changing (within `tol`).
pub fn mpifs_value_iteration(sys: &MpIFSSystem, max_iter: usize, tol: f64) -> Result<ValueIteration> {
    let mut cur = DensitySample::new(sys.points(), vec![Finite(0.0); sys.n])?;
    let mut monotone = true;
    for it in 1..=max_iter {
        let next = mpifs_transfer(&cur, sys)?;
        monotone &= next.values().iter().zip(cur.values()).all(|(a, b)| *a <= *b || value_gap(*a, *b) <= tol);
        let change = next.values().iter().zip(cur.values()).map(|(a, b)| value_gap(*a, *b)).fold(0.0, f64::max);
        cur = next;
        if change <= tol {
            return Ok(ValueIteration { fixed_point: cur, iterations: it, converged: true, monotone });
        }
    }
    Ok(ValueIteration { fixed_point: cur, iterations: max_iter, converged: false, monotone })
}

#[derive(Clone, Debug, PartialEq)]
pub struct InverseSolution {
    /// Constant maps with `q_μ(η) = h(μ)`.
    pub system: MpIFSSystem,
    /// `max_μ |h(μ) − max_η [q_μ(η) + h(η)]|`.
    pub equation_residual: f64,
    /// `max_μ |max_ν q_ν(μ)|`: the per-point normalization.
    pub pointwise_normalization: f64,
    /// `|max_ν max_η q_ν(η)|`: the normalization over the whole family.
    pub family_normalization: f64,
    /// Finite-difference bound on `|q_ν(μ1) − q_ν(μ2)|`; zero since `q_ν` is constant in `μ`.
    pub lipschitz_bound: f64,
}

/// Solves `h(μ) = max_η [q_μ(η) + h(η)]` with `q_μ(η) = h(μ)`.
pub fn inverse_problem_solve(h: &[f64]) -> Result<InverseSolution> {
    if h.is_empty() {
        return Err(Error::EmptyDensity);
    }
    if let Some(x) = h.iter().find(|x| !x.is_finite() || **x > 0.0) {
        return Err(Error::Precondition(format!("h must be finite and <= 0, found {x}")));
    }
    let top = h.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top != 0.0 {
        return Err(Error::Precondition(format!("max h must be 0, found {top}")));
    }
    let n = h.len();
    let weights: Vec<Vec<f64>> = (0..n).map(|mu| vec![h[mu]; n]).collect();
    let system = MpIFSSystem::constant_maps(weights.clone())?;
    let equation_residual = (0..n)
        .map(|mu| {
            let rhs = (0..n).map(|eta| weights[mu][eta] + h[eta]).fold(f64::NEG_INFINITY, f64::max);
            (h[mu] - rhs).abs()
        })
        .fold(0.0, f64::max);
    let pointwise_normalization = (0..n)
        .map(|mu| weights.iter().map(|q| q[mu]).fold(f64::NEG_INFINITY, f64::max).abs())
        .fold(0.0, f64::max);
    let family_normalization =
        weights.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max).abs();
    let lipschitz_bound = weights
        .iter()
        .map(|q| {
            let lo = q.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            hi - lo
        })
        .fold(0.0, f64::max);
    Ok(InverseSolution { system, equation_residual, pointwise_normalization, family_normalization, lipschitz_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shift::{make_bernoulli_jacobian, Word};
    use crate::simplex::{shannon_density, SimplexGrid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sp() -> ShiftSpace {
        ShiftSpace::new(2, 0.3).unwrap()
    }

    fn two_maps(q: [f64; 2]) -> WeightedJacobianFamily {
        let s = sp();
        WeightedJacobianFamily::new(
            vec![make_bernoulli_jacobian(0.3, &s).unwrap(), make_bernoulli_jacobian(0.7, &s).unwrap()],
            q.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn family_validation() {
        let s = sp();
        let j = make_bernoulli_jacobian(0.3, &s).unwrap();
        assert!(WeightedJacobianFamily::new(vec![j.clone()], vec![-0.5]).is_err());
        assert!(WeightedJacobianFamily::new(vec![j.clone()], vec![0.5]).is_err());
        assert!(WeightedJacobianFamily::new(vec![j], vec![0.0]).is_ok());
    }

    #[test]
    fn single_jacobian_attractor() {
        let s = sp();
        let fam = WeightedJacobianFamily::new(vec![make_bernoulli_jacobian(0.3, &s).unwrap()], vec![0.0]).unwrap();
        let nu0 = CylinderMeasure::uniform(&s, 4).unwrap();
        let a = attractor_build(&fam, 5, &nu0, &s, &AttractorOptions::default()).unwrap();
        assert_eq!(a.leaves.len(), 1);
        assert_eq!(a.leaves[0].weight, 0.0);
        let b = CylinderMeasure::bernoulli(&s, &[0.3, 0.7], 4).unwrap();
        assert!(w1_tree(&a.leaves[0].measure, &b, &s).unwrap() < 1e-15);
        let e = density_entropy_estimate(&a, &b).unwrap();
        assert_eq!(e.value, Finite(0.0));
        let far = CylinderMeasure::point_mass(&s, &Word::new(vec![1; 4], 2).unwrap()).unwrap();
        assert_eq!(density_entropy_estimate(&a, &far).unwrap().value, Bottom);
    }

    #[test]
    fn two_map_attractor_counts() {
        let s = sp();
        let fam = two_maps([0.0, 0.0]);
        let nu0 = CylinderMeasure::uniform(&s, 6).unwrap();
        let opts = AttractorOptions { epsilon: Some(1e-9), ..Default::default() };
        let mut counts = Vec::new();
        for n in 1..=6 {
            let a = attractor_build(&fam, n, &nu0, &s, &opts).unwrap();
            assert_eq!(a.leaves.len(), 1 << n);
            assert!(a.leaves.iter().all(|l| l.weight == 0.0));
            assert!(a.prefix_contraction_excess(usize::MAX).unwrap() <= 1e-12);
            counts.push(a.clusters.len());
        }
        assert!(counts.windows(2).all(|w| w[1] > w[0]), "{counts:?}");
    }

    #[test]
    fn pruning_and_budget() {
        let s = sp();
        let fam = two_maps([0.0, -1.0]);
        let nu0 = CylinderMeasure::uniform(&s, 3).unwrap();
        let opts = AttractorOptions { weight_floor: Some(-1.5), ..Default::default() };
        let a = attractor_build(&fam, 4, &nu0, &s, &opts).unwrap();
        // words with at most one use of the second map
        assert_eq!(a.leaves.len(), 5);
        assert!(a.pruned > 0);
        let tight = AttractorOptions { budget: 100, ..Default::default() };
        match attractor_build(&fam, 10, &nu0, &s, &tight) {
            Err(Error::OverBudget { suggested, .. }) => assert_eq!(suggested, 6),
            other => panic!("{other:?}"),
        }
    }

    fn brute_force(fam: &WeightedJacobianFamily, n: usize, nu0: &CylinderMeasure, g: &dyn Fn(&CylinderMeasure) -> f64) -> f64 {
        let m = fam.len();
        let mut best = f64::NEG_INFINITY;
        for code in 0..m.pow(n as u32) {
            let mut word = vec![0; n];
            let mut c = code;
            for slot in word.iter_mut().rev() {
                *slot = c % m + 1;
                c /= m;
            }
            // innermost map is the last letter
            let mut mu = nu0.clone();
            for &i in word.iter().rev() {
                mu = crate::shift::dual_apply(&fam.jacobians()[i - 1], &mu).unwrap().coarsen().unwrap();
            }
            let wt: f64 = word.iter().map(|&i| fam.weights()[i - 1]).sum();
            best = best.max(wt + g(&mu));
        }
        best
    }

    #[test]
    fn invariant_pressure_matches_brute_force() {
        let s = sp();
        let fam = two_maps([0.0, -1.0]);
        let nu0 = CylinderMeasure::uniform(&s, 3).unwrap();
        let g = |mu: &CylinderMeasure| mu.masses()[..4].iter().sum::<f64>();
        for n in 1..=8 {
            let sol = invariant_pressure_solve(&fam, &g, 1.0, n, &nu0, &s, DEFAULT_BUDGET).unwrap();
            assert_eq!(sol.value, brute_force(&fam, n, &nu0, &g));
            assert!(sol.fixed_point_residual <= sol.error_bound);
        }
        let zero = invariant_pressure_solve(&fam, &|_: &CylinderMeasure| 0.0, 0.0, 5, &nu0, &s, DEFAULT_BUDGET).unwrap();
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn single_bernoulli_pressure() {
        let s = sp();
        let fam = WeightedJacobianFamily::new(vec![make_bernoulli_jacobian(0.3, &s).unwrap()], vec![0.0]).unwrap();
        let nu0 = CylinderMeasure::uniform(&s, 2).unwrap();
        let g = |mu: &CylinderMeasure| mu.masses()[0] + mu.masses()[1];
        let sol = invariant_pressure_solve(&fam, &g, 1.0, 6, &nu0, &s, DEFAULT_BUDGET).unwrap();
        assert!((sol.value - 0.3).abs() <= sol.error_bound);
    }

    #[test]
    fn swap_invariance_of_shannon() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = SimplexGrid::new(2, 40).unwrap().points().to_vec();
        let h = DensitySample::from_fn(pts.clone(), shannon_density).unwrap();
        let r = pushforward_invariance_check(&h, &[2, 1], 20, 1e-12, &mut rng).unwrap();
        assert!(r.pressure_holds && r.density_holds, "{r:?}");

        let inv = DensitySample::from_fn(pts.clone(), |p| {
            if (p.masses()[0] - 0.5).abs() < 1e-12 { Finite(0.0) } else { Bottom }
        })
        .unwrap();
        let r = pushforward_invariance_check(&inv, &[2, 1], 20, 1e-12, &mut rng).unwrap();
        assert!(r.pressure_holds && r.density_holds);

        // T collapses everything onto symbol 1; h lives only at the uniform point
        let r = pushforward_invariance_check(&inv, &[1, 1], 20, 1e-12, &mut rng).unwrap();
        assert!(!r.pressure_holds && !r.density_holds);
        assert!(r.witness.unwrap().starts_with("delta at [1.0, 0.0]"));
    }

    #[test]
    fn grid_must_be_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = vec![ProbVector::new(vec![0.3, 0.7]).unwrap()];
        let h = DensitySample::from_fn(pts, shannon_density).unwrap();
        assert!(matches!(
            pushforward_invariance_check(&h, &[2, 1], 1, 1e-12, &mut rng),
            Err(Error::GridNotClosed(_))
        ));
    }

    #[test]
    fn ruelle_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sys = MpIFSSystem::random(6, 3, false, &mut rng).unwrap();
        assert!(mpifs_ruelle(&[0.0; 6], &sys).unwrap().iter().all(|&v| v == 0.0));
        let sys = MpIFSSystem::random(5, 0, true, &mut rng).unwrap();
        let f: Vec<f64> = (0..5).map(|i| i as f64 * 0.3).collect();
        let l = mpifs_ruelle(&f, &sys).unwrap();
        for mu in 0..5 {
            let want = (0..5).map(|nu| sys.weights()[nu][mu] + f[nu]).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(l[mu], want);
        }
        let single = MpIFSSystem::new(1, vec![vec![0]], vec![vec![0.0]]).unwrap();
        assert_eq!(mpifs_ruelle(&[2.5], &single).unwrap(), vec![2.5]);
    }

    #[test]
    fn transfer_off_image_is_bottom() {
        let sys = MpIFSSystem::new(3, vec![vec![0, 0, 1]], vec![vec![0.0; 3]]).unwrap();
        let zero = DensitySample::new(sys.points(), vec![Finite(0.0); 3]).unwrap();
        let out = mpifs_transfer(&zero, &sys).unwrap();
        assert_eq!(out.values(), &[Finite(0.0), Finite(0.0), Bottom]);
    }

    #[test]
    fn duality_and_invariance_on_random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..30 {
            let n = rng.gen_range(1..=20);
            let sys = MpIFSSystem::random(n, rng.gen_range(1..=4), trial % 2 == 0, &mut rng).unwrap();
            let lambda = DensitySample::new(sys.points(), (0..n).map(|_| Finite(-rng.gen::<f64>())).collect()).unwrap();
            let mut fam = mpifs_delta_family(&lambda, &sys).unwrap();
            fam.extend((0..5).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<f64>>()));
            let r = mpifs_invariance_check(&lambda, &sys, &fam, 1e-12).unwrap();
            assert!(r.duality_residual <= 1e-12);
            assert!(r.agree(), "{r:?}");

            if trial % 2 == 0 {
                let vi = mpifs_value_iteration(&sys, 10_000, 0.0).unwrap();
                assert!(vi.converged && vi.monotone);
                let fam = mpifs_delta_family(&vi.fixed_point, &sys).unwrap();
                let r = mpifs_invariance_check(&vi.fixed_point, &sys, &fam, 1e-12).unwrap();
                assert!(r.invariant(), "{r:?}");
            }
        }
    }

    #[test]
    fn inverse_problem() {
        let sol = inverse_problem_solve(&[0.0, -1.0, -2.0]).unwrap();
        assert_eq!(sol.equation_residual, 0.0);
        assert_eq!(sol.pointwise_normalization, 0.0);
        assert_eq!(sol.family_normalization, 0.0);
        assert_eq!(sol.lipschitz_bound, 0.0);
        assert_eq!(sol.system.weights()[1], vec![-1.0; 3]);
        let zero = inverse_problem_solve(&[0.0; 4]).unwrap();
        assert!(zero.system.weights().iter().flatten().all(|&q| q == 0.0));
        assert!(inverse_problem_solve(&[-0.5, -1.0]).is_err());
        assert!(inverse_problem_solve(&[0.5, 0.0]).is_err());

        let h = [0.0, -1.0, -2.0];
        let lambda = DensitySample::new(vec![0, 1, 2], h.iter().map(|&x| Finite(x)).collect()).unwrap();
        let fam = mpifs_delta_family(&lambda, &sol.system).unwrap();
        assert!(mpifs_invariance_check(&lambda, &sol.system, &fam, 1e-12).unwrap().invariant());
    }
}
