//! Pressures on the probability simplex of a finite alphabet `X = {1..d}`.
//!
//! Level-1 observables are vectors `φ ∈ ℝ^d`; level-2 observables are
//! functions of a probability vector. The canonical inclusion
//! `j(φ)(μ) = Σ φ_j μ_j` links the two, and `Γ_ℓ(φ) = ℓ(j(φ))` projects an
//! idempotent pressure onto a convex (level-1) pressure. Entropies are
//! recovered from `Γ` through the dual formula `inf_φ { Γ(φ) − ∫φ dμ }`.

use std::cell::Cell;
use std::collections::HashMap;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::maxplus::{Bottom, Finite, MaxPlusValue, DEFAULT_ARGMAX_TOL};
use crate::search::{
    composition_neighbors, compositions, maximize, simplex_move, stencil_offsets, Landscape,
    SearchOptions,
};

const SUM_TOL: f64 = 1e-12;
/// Masses below this are exact zeros in `p log p`.
const ZERO_MASS: f64 = 1e-15;

// ============================================================================
// Probability vectors and observables
// ============================================================================

/// A probability vector on `{1..d}`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidProbability("empty vector".into()));
        }
        if let Some(m) = masses.iter().find(|m| !(0.0..=1.0).contains(*m)) {
            return Err(Error::InvalidProbability(format!("mass {m} outside [0, 1]")));
        }
        let s: f64 = masses.iter().sum();
        if (s - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidProbability(format!("masses sum to {s}")));
        }
        Ok(Self(masses))
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![1.0 / d as f64; d])
    }

    /// The point mass on the 0-based symbol index `i`.
    pub fn point_mass(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self(v)
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Image under a permutation of symbols (`perm[i]` is the image of symbol `i`).
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut v = vec![0.0; self.0.len()];
        for (i, &m) in self.0.iter().enumerate() {
            v[perm[i]] += m;
        }
        Self(v)
    }

    pub fn linf_distance(&self, other: &ProbVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `−Σ p_j log p_j` with `0·log 0 = 0`.
pub fn shannon_entropy(p: &ProbVector) -> f64 {
    entropy_of(p.masses())
}

pub(crate) fn entropy_of(masses: &[f64]) -> f64 {
    -masses
        .iter()
        .filter(|&&m| m > ZERO_MASS)
        .map(|&m| m * m.ln())
        .sum::<f64>()
}

/// Shannon entropy as a density entropy on the simplex.
pub fn shannon_density(p: &ProbVector) -> MaxPlusValue {
    Finite(shannon_entropy(p))
}

/// A function on `X = {1..d}`, i.e. a level-1 observable.
#[derive(Clone, Debug, PartialEq)]
pub struct Level1Observable(Vec<f64>);

impl Level1Observable {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("observable coefficient".into()));
        }
        Ok(Self(coefficients))
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `∫ φ dμ`.
    pub fn integrate(&self, mu: &ProbVector) -> f64 {
        self.0.iter().zip(mu.masses()).map(|(a, b)| a * b).sum()
    }

    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| x + c).collect())
    }

    /// Pointwise maximum, the level-1 max operation.
    pub fn pointwise_max(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a.max(*b)).collect())
    }

    pub fn combination(t: f64, a: &Self, b: &Self) -> Self {
        Self(a.0.iter().zip(&b.0).map(|(x, y)| t * x + (1.0 - t) * y).collect())
    }
}

/// The canonical inclusion `j(φ)(μ) = ∫ φ dμ`.
pub fn inclusion_j(phi: &Level1Observable) -> impl Fn(&ProbVector) -> f64 + '_ {
    move |mu| phi.integrate(mu)
}

/// `log Σ exp(x_j)`, stable.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// The Gibbs probability `p_j = e^{g_j} / Σ_k e^{g_k}`.
pub fn gibbs_solution(g: &Level1Observable) -> ProbVector {
    let z = log_sum_exp(g.coefficients());
    let p: Vec<f64> = g.coefficients().iter().map(|x| (x - z).exp()).collect();
    let s: f64 = p.iter().sum();
    ProbVector(p.into_iter().map(|x| x / s).collect())
}

// ============================================================================
// Grid search on the simplex
// ============================================================================

/// A uniform grid of resolution `m` on the `d`-simplex plus optional extra
/// points, searched by coarse evaluation followed by local refinement.
#[derive(Clone, Debug)]
pub struct SimplexGrid {
    d: usize,
    m: u32,
    options: SearchOptions,
    points: Vec<ProbVector>,
    comps: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl SimplexGrid {
    pub fn new(d: usize, m: u32) -> Result<Self> {
        if d < 1 {
            return Err(invalid("d", "dimension must be at least 1"));
        }
        if m < 1 {
            return Err(invalid("m", "resolution must be at least 1"));
        }
        let comps = compositions(m, d);
        let points = comps
            .iter()
            .map(|c| ProbVector(c.iter().map(|&k| k as f64 / m as f64).collect()))
            .collect();
        let index = comps.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        Ok(Self { d, m, options: SearchOptions::default(), points, comps, index })
    }

    pub fn with_options(mut self, options: SearchOptions) -> Self {
        self.options = options;
        self
    }

    /// Adds points evaluated on the coarse pass (e.g. known candidates).
    pub fn with_extra_points(mut self, extra: impl IntoIterator<Item = ProbVector>) -> Self {
        self.points.extend(extra);
        self
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn resolution(&self) -> u32 {
        self.m
    }

    pub fn options(&self) -> &SearchOptions {
        &self.options
    }

    pub fn points(&self) -> &[ProbVector] {
        &self.points
    }

    /// Index of the grid point whose masses are `counts / m`.
    pub fn index_of_counts(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    pub fn counts(&self, i: usize) -> Option<&[u32]> {
        self.comps.get(i).map(|c| c.as_slice())
    }
}

impl Landscape for SimplexGrid {
    type Point = ProbVector;

    fn coarse(&self) -> &[ProbVector] {
        &self.points
    }

    fn coarse_neighbors(&self, i: usize) -> Vec<usize> {
        if i >= self.comps.len() {
            return Vec::new();
        }
        composition_neighbors(&self.comps, &self.index, i)
    }

    fn coarse_step(&self) -> f64 {
        1.0 / self.m as f64
    }

    fn stencil(&self, center: &ProbVector, step: f64, radius: i64) -> Vec<ProbVector> {
        stencil_offsets(self.d - 1, radius)
            .iter()
            .map(|off| ProbVector(simplex_move(center.masses(), off, step)))
            .collect()
    }

    fn distance(&self, a: &ProbVector, b: &ProbVector) -> f64 {
        a.linf_distance(b)
    }
}

/// Pressure value and equilibrium set of a level-2 maximization.
#[derive(Clone, Debug)]
pub struct Equilibria {
    pub value: MaxPlusValue,
    /// The single best point found.
    pub best: Option<ProbVector>,
    /// All near-maximizers; not necessarily convex, not necessarily a singleton.
    pub states: Vec<ProbVector>,
}

impl Equilibria {
    /// Groups the equilibrium states into clusters of L∞ diameter scale `radius`;
    /// returns one representative per cluster (the first met in state order).
    pub fn clusters(&self, radius: f64) -> Vec<ProbVector> {
        cluster_points(&self.states, radius, |a, b| a.linf_distance(b))
    }
}

pub(crate) fn cluster_points<P: Clone>(
    points: &[P],
    radius: f64,
    dist: impl Fn(&P, &P) -> f64,
) -> Vec<P> {
    // single linkage via union-find
    let n = points.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if dist(&points[i], &points[j]) <= radius {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[b.max(a)] = a.min(b);
                }
            }
        }
    }
    let mut reps = Vec::new();
    let mut seen = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if !seen.contains(&r) {
            seen.push(r);
            reps.push(points[i].clone());
        }
    }
    reps
}

/// `ℓ_h(g) = max_p [h(p) + g(p)]` over the simplex with the equilibrium set at
/// absolute tolerance `tol`.
pub fn level2_pressure(
    h: &dyn Fn(&ProbVector) -> MaxPlusValue,
    g: &dyn Fn(&ProbVector) -> f64,
    grid: &SimplexGrid,
    tol: f64,
) -> Equilibria {
    let res = maximize(
        grid,
        |p| match h(p) {
            Bottom => Bottom,
            Finite(x) => Finite(x + g(p)),
        },
        grid.options(),
        tol,
    );
    Equilibria { value: res.value, best: res.best, states: res.near_max }
}

/// `Γ_ℓ(φ) = ℓ(j(φ))`.
pub fn convex_pressure_gamma(
    h: &dyn Fn(&ProbVector) -> MaxPlusValue,
    phi: &Level1Observable,
    grid: &SimplexGrid,
) -> f64 {
    let g = inclusion_j(phi);
    level2_pressure(h, &g, grid, DEFAULT_ARGMAX_TOL).value.to_f64()
}

/// Worst violations of monotonicity, translation invariance and convexity
/// observed over random trials.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PressureAxiomsReport {
    pub monotonicity: f64,
    pub translation: f64,
    pub convexity: f64,
    pub trials: usize,
}

impl PressureAxiomsReport {
    pub fn worst(&self) -> f64 {
        self.monotonicity.max(self.translation).max(self.convexity)
    }
}

/// Property-checks C1 (monotone), C2 (translation) and C3 (convex) for `Γ_h`
/// on random observables with coefficients in `[-scale, scale]`.
pub fn pressure_axioms_c1c2c3<R: Rng>(
    h: &dyn Fn(&ProbVector) -> MaxPlusValue,
    grid: &SimplexGrid,
    trials: usize,
    scale: f64,
    rng: &mut R,
) -> PressureAxiomsReport {
    let d = grid.dim();
    let mut rnd = |s: f64| -> Level1Observable {
        Level1Observable((0..d).map(|_| rng.gen_range(-s..=s)).collect())
    };
    let mut report = PressureAxiomsReport { trials, ..Default::default() };
    for _ in 0..trials {
        let phi = rnd(scale);
        let bump = rnd(scale);
        let psi_dominating = Level1Observable(
            phi.0.iter().zip(&bump.0).map(|(a, b)| a + b.abs()).collect(),
        );
        let other = rnd(scale);
        let gp = convex_pressure_gamma(h, &phi, grid);
        let gq = convex_pressure_gamma(h, &psi_dominating, grid);
        report.monotonicity = report.monotonicity.max(gp - gq);

        let c = bump.0[0] * 3.0;
        let gc = convex_pressure_gamma(h, &phi.shifted(c), grid);
        report.translation = report.translation.max((gc - gp - c).abs());

        let t = (bump.0[d - 1].abs() / scale).min(1.0);
        let go = convex_pressure_gamma(h, &other, grid);
        let gm = convex_pressure_gamma(h, &Level1Observable::combination(t, &phi, &other), grid);
        report.convexity = report.convexity.max(gm - (t * gp + (1.0 - t) * go));
    }
    report
}

/// Level-1 observables `(s_1, …, s_{d−1}, 0)` with each `s_i` on a uniform
/// grid of `steps` values over `[-radius, radius]`. Translation invariance of
/// `Γ` makes the last coordinate redundant.
pub fn coefficient_family(d: usize, radius: f64, steps: usize) -> Vec<Level1Observable> {
    let vals: Vec<f64> = (0..steps)
        .map(|i| -radius + 2.0 * radius * i as f64 / (steps.max(2) - 1) as f64)
        .collect();
    let mut out = vec![vec![]];
    for _ in 0..d.saturating_sub(1) {
        let mut next = Vec::new();
        for prefix in &out {
            for &v in &vals {
                let mut p: Vec<f64> = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter()
        .map(|mut v| {
            v.push(0.0);
            Level1Observable(v)
        })
        .collect()
}

/// `φ_j = log μ_j`, the minimizer of `Γ(φ) − ∫φ dμ` when `Γ` is log-sum-exp.
/// Zero masses are floored at `exp(-700)`.
pub fn shannon_dual_minimizer(mu: &ProbVector) -> Level1Observable {
    Level1Observable(mu.masses().iter().map(|&m| m.max(1e-304).ln().max(-700.0)).collect())
}

/// Upper approximation of the concave entropy `𝔥(μ) = inf_φ {Γ(φ) − ∫φ dμ}`
/// over a finite family of observables.
pub fn entropy_recovery(
    h: &dyn Fn(&ProbVector) -> MaxPlusValue,
    mu: &ProbVector,
    phi_family: &[Level1Observable],
    grid: &SimplexGrid,
) -> f64 {
    phi_family
        .iter()
        .map(|phi| convex_pressure_gamma(h, phi, grid) - phi.integrate(mu))
        .fold(f64::INFINITY, f64::min)
}

pub type BoxedObservable = Box<dyn Fn(&ProbVector) -> f64>;

/// `min_g { ℓ(g) − g(μ) }` over a finite family of level-2 observables; equals
/// `h(μ)` in the limit when `h` is concave and upper semi-continuous.
pub fn concave_density_identity(
    h: &dyn Fn(&ProbVector) -> MaxPlusValue,
    mu: &ProbVector,
    g_family: &[BoxedObservable],
    grid: &SimplexGrid,
) -> f64 {
    g_family
        .iter()
        .map(|g| level2_pressure(h, g.as_ref(), grid, DEFAULT_ARGMAX_TOL).value.to_f64() - g(mu))
        .fold(f64::INFINITY, f64::min)
}

/// The upper concave envelope of a density on the 1-simplex (`d = 2`), as a
/// function of `p_1`, built from the upper convex hull of its graph over a
/// uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ConcaveEnvelope {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl ConcaveEnvelope {
    pub fn build(h: &dyn Fn(&ProbVector) -> MaxPlusValue, m: usize) -> Result<Self> {
        if m < 1 {
            return Err(invalid("m", "need at least two grid points"));
        }
        let mut hull: Vec<(f64, f64)> = Vec::new();
        for i in 0..=m {
            let x = i as f64 / m as f64;
            let Finite(y) = h(&ProbVector(vec![x, 1.0 - x])) else { continue };
            while hull.len() >= 2 {
                let (x1, y1) = hull[hull.len() - 2];
                let (x2, y2) = hull[hull.len() - 1];
                // drop the middle point when it lies on or below the chord
                if (y2 - y1) * (x - x1) <= (y - y1) * (x2 - x1) {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push((x, y));
        }
        if hull.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Self { xs: hull.iter().map(|p| p.0).collect(), ys: hull.iter().map(|p| p.1).collect() })
    }

    /// Hull vertices as `(p_1, value)`.
    pub fn vertices(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.ys.iter().copied())
    }

    pub fn eval(&self, p: &ProbVector) -> MaxPlusValue {
        let x = p.masses()[0];
        let n = self.xs.len();
        if x < self.xs[0] - 1e-15 || x > self.xs[n - 1] + 1e-15 {
            return Bottom;
        }
        if n == 1 {
            return Finite(self.ys[0]);
        }
        let k = self.xs.partition_point(|&v| v < x).clamp(1, n - 1);
        let (x0, x1) = (self.xs[k - 1], self.xs[k]);
        let (y0, y1) = (self.ys[k - 1], self.ys[k]);
        let t = ((x - x0) / (x1 - x0)).clamp(0.0, 1.0);
        Finite(y0 + t * (y1 - y0))
    }
}

// ============================================================================
// Nonlinear pressure over Bernoulli and Markov families
// ============================================================================

/// `P_F(A) = sup_μ { h(μ) + F(∫ A dμ) }`.
pub struct NonlinearSpec {
    pub f: Box<dyn Fn(f64) -> f64>,
    pub a: Level1Observable,
}

/// Shift-invariant measure families with closed-form entropy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MeasureFamily {
    /// i.i.d. measures, searched on a simplex grid of resolution `m`.
    Bernoulli { d: usize, m: u32 },
    /// Stationary 1-step Markov measures; each transition row is searched on a
    /// simplex grid of resolution `m`.
    Markov { d: usize, m: u32 },
}

/// A member of a [`MeasureFamily`].
#[derive(Clone, Debug, PartialEq)]
pub enum FamilyMember {
    Bernoulli(ProbVector),
    Markov { transition: Vec<Vec<f64>>, stationary: ProbVector },
}

impl FamilyMember {
    /// The one-symbol marginal.
    pub fn marginal(&self) -> &ProbVector {
        match self {
            FamilyMember::Bernoulli(p) => p,
            FamilyMember::Markov { stationary, .. } => stationary,
        }
    }

    /// Kolmogorov–Sinai entropy `−Σ_i π_i Σ_j P_ij log P_ij`.
    pub fn ks_entropy(&self) -> f64 {
        match self {
            FamilyMember::Bernoulli(p) => shannon_entropy(p),
            FamilyMember::Markov { transition, stationary } => stationary
                .masses()
                .iter()
                .zip(transition)
                .map(|(pi, row)| pi * entropy_of(row))
                .sum(),
        }
    }

    /// Relabels symbols by the permutation `perm`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        match self {
            FamilyMember::Bernoulli(p) => FamilyMember::Bernoulli(p.permuted(perm)),
            FamilyMember::Markov { transition, stationary } => {
                let d = transition.len();
                let mut t = vec![vec![0.0; d]; d];
                for i in 0..d {
                    for j in 0..d {
                        t[perm[i]][perm[j]] = transition[i][j];
                    }
                }
                FamilyMember::Markov { transition: t, stationary: stationary.permuted(perm) }
            }
        }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        match (self, other) {
            (FamilyMember::Bernoulli(a), FamilyMember::Bernoulli(b)) => a.linf_distance(b),
            (
                FamilyMember::Markov { transition: a, stationary: pa },
                FamilyMember::Markov { transition: b, stationary: pb },
            ) => a
                .iter()
                .flatten()
                .zip(b.iter().flatten())
                .map(|(x, y)| (x - y).abs())
                .fold(pa.linf_distance(pb), f64::max),
            _ => f64::INFINITY,
        }
    }
}

/// Stationary distribution of a row-stochastic matrix. Reducible chains get
/// the Cesàro limit started from the uniform distribution.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> ProbVector {
    let d = transition.len();
    if d == 2 {
        let (a, b) = (transition[0][1], transition[1][0]);
        if a + b > 0.0 {
            return ProbVector(vec![b / (a + b), a / (a + b)]);
        }
        return ProbVector(vec![0.5, 0.5]);
    }
    // Solve π (P − I) = 0, Σ π = 1 by Gaussian elimination on the transposed system.
    let mut a = vec![vec![0.0; d + 1]; d];
    for (i, row) in a.iter_mut().enumerate().take(d - 1) {
        for j in 0..d {
            row[j] = transition[j][i] - if i == j { 1.0 } else { 0.0 };
        }
    }
    for j in 0..d {
        a[d - 1][j] = 1.0;
    }
    a[d - 1][d] = 1.0;
    let mut singular = false;
    for col in 0..d {
        let piv = (col..d).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        if a[piv][col].abs() < 1e-12 {
            singular = true;
            break;
        }
        a.swap(col, piv);
        for r in 0..d {
            if r != col {
                let f = a[r][col] / a[col][col];
                for c in col..=d {
                    a[r][c] -= f * a[col][c];
                }
            }
        }
    }
    if !singular {
        let pi: Vec<f64> = (0..d).map(|i| (a[i][d] / a[i][i]).max(0.0)).collect();
        let s: f64 = pi.iter().sum();
        return ProbVector(pi.into_iter().map(|x| x / s).collect());
    }
    let mut cur = vec![1.0 / d as f64; d];
    let mut acc = vec![0.0; d];
    let steps = 4000;
    for _ in 0..steps {
        for (s, c) in acc.iter_mut().zip(&cur) {
            *s += c;
        }
        let mut next = vec![0.0; d];
        for i in 0..d {
            for j in 0..d {
                next[j] += cur[i] * transition[i][j];
            }
        }
        cur = next;
    }
    let s: f64 = acc.iter().sum();
    ProbVector(acc.into_iter().map(|x| x / s).collect())
}

struct MarkovLandscape {
    d: usize,
    m: u32,
    rows: Vec<Vec<u32>>,
    row_index: HashMap<Vec<u32>, usize>,
    points: Vec<FamilyMember>,
    combos: Vec<Vec<usize>>,
}

impl MarkovLandscape {
    fn new(d: usize, m: u32) -> Result<Self> {
        let rows = compositions(m, d);
        let total = (rows.len() as u128).pow(d as u32);
        if total > 2_000_000 {
            return Err(Error::TooLarge(format!(
                "{total} Markov grid points; lower the resolution m"
            )));
        }
        let row_index = rows.iter().cloned().enumerate().map(|(i, c)| (c, i)).collect();
        let mut combos = vec![vec![]];
        for _ in 0..d {
            let mut next = Vec::new();
            for c in &combos {
                for r in 0..rows.len() {
                    let mut v: Vec<usize> = c.clone();
                    v.push(r);
                    next.push(v);
                }
            }
            combos = next;
        }
        let points = combos
            .iter()
            .map(|c| {
                let t: Vec<Vec<f64>> = c
                    .iter()
                    .map(|&r| rows[r].iter().map(|&k| k as f64 / m as f64).collect())
                    .collect();
                markov_member(t)
            })
            .collect();
        Ok(Self { d, m, rows, row_index, points, combos })
    }
}

fn markov_member(transition: Vec<Vec<f64>>) -> FamilyMember {
    let stationary = stationary_distribution(&transition);
    FamilyMember::Markov { transition, stationary }
}

impl Landscape for MarkovLandscape {
    type Point = FamilyMember;

    fn coarse(&self) -> &[FamilyMember] {
        &self.points
    }

    fn coarse_neighbors(&self, i: usize) -> Vec<usize> {
        let combo = &self.combos[i];
        let n = self.rows.len();
        let mut out = Vec::new();
        for (slot, &r) in combo.iter().enumerate() {
            for nr in composition_neighbors(&self.rows, &self.row_index, r) {
                // combos enumerate the first row as the most significant digit
                let weight = n.pow((self.d - 1 - slot) as u32);
                out.push(i - r * weight + nr * weight);
            }
        }
        out
    }

    fn coarse_step(&self) -> f64 {
        1.0 / self.m as f64
    }

    fn stencil(&self, center: &FamilyMember, step: f64, radius: i64) -> Vec<FamilyMember> {
        let FamilyMember::Markov { transition, .. } = center else { return Vec::new() };
        let dims = self.d * (self.d - 1);
        let offsets = stencil_offsets(dims, radius);
        offsets
            .iter()
            .map(|off| {
                let t: Vec<Vec<f64>> = transition
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        simplex_move(row, &off[i * (self.d - 1)..(i + 1) * (self.d - 1)], step)
                    })
                    .collect();
                markov_member(t)
            })
            .collect()
    }

    fn distance(&self, a: &FamilyMember, b: &FamilyMember) -> f64 {
        a.distance(b)
    }
}

/// Value and maximizer set of a nonlinear pressure.
#[derive(Clone, Debug)]
pub struct NonlinearEquilibria {
    pub value: f64,
    pub best: FamilyMember,
    pub maximizers: Vec<FamilyMember>,
}

impl NonlinearEquilibria {
    pub fn clusters(&self, radius: f64) -> Vec<FamilyMember> {
        cluster_points(&self.maximizers, radius, |a, b| a.distance(b))
    }
}

/// Maximizes `h_KS(μ) + F(∫ A dμ)` over a measure family.
pub fn nonlinear_pressure(
    spec: &NonlinearSpec,
    family: MeasureFamily,
    options: SearchOptions,
    tol: f64,
) -> Result<NonlinearEquilibria> {
    let bad = Cell::new(None::<f64>);
    let objective = |member: &FamilyMember| -> MaxPlusValue {
        let x = spec.a.integrate(member.marginal());
        let fx = (spec.f)(x);
        if !fx.is_finite() {
            bad.set(Some(x));
            return Bottom;
        }
        Finite(member.ks_entropy() + fx)
    };
    let res = match family {
        MeasureFamily::Bernoulli { d, m } => {
            if spec.a.dim() != d {
                return Err(Error::LengthMismatch(spec.a.dim(), d));
            }
            let grid = SimplexGrid::new(d, m)?.with_options(options);
            let r = maximize(&grid, |p| objective(&FamilyMember::Bernoulli(p.clone())), &options, tol);
            crate::search::SearchResult {
                value: r.value,
                best: r.best.map(FamilyMember::Bernoulli),
                near_max: r.near_max.into_iter().map(FamilyMember::Bernoulli).collect(),
            }
        }
        MeasureFamily::Markov { d, m } => {
            if spec.a.dim() != d {
                return Err(Error::LengthMismatch(spec.a.dim(), d));
            }
            if d < 2 {
                return Err(invalid("d", "Markov family needs d >= 2"));
            }
            let land = MarkovLandscape::new(d, m)?;
            maximize(&land, objective, &options, tol)
        }
    };
    if let Some(x) = bad.get() {
        return Err(Error::NonFinite(format!("F is not finite at {x}")));
    }
    match (res.value, res.best) {
        (Finite(value), Some(best)) => {
            Ok(NonlinearEquilibria { value, best, maximizers: res.near_max })
        }
        _ => Err(Error::EmptySupport),
    }
}
