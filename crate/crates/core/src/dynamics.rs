//! Max-plus Birkhoff sums `f(x) ⊕ f(σx) ⊕ … ⊕ f(σ^{n−1}x)` under the shift,
//! the partition function `c_n(t) = (1/n) log ∫ e^{n t (f ⊕ … ⊕ f∘σ^{n−1})} dμ`
//! and the resulting large-deviation upper bound `inf_{t≥0} [tb + c(−t)]`.
//!
//! The two-symbol example uses symbol 2 for the symbol of mass `p` (where
//! `f = 0`) and symbol 1 for the other one (where `f = 1`). Then
//! `∫ e^{−nt·maxsum} dμ = e^{−nt}(1 − p^n) + p^n`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::maxplus::{Bottom, Finite, MaxPlusValue};
use crate::shift::{DepthKFunction, Word};
use crate::simplex::log_sum_exp;

const PROB_TOL: f64 = 1e-12;
/// Stream reserved for bootstrap resampling; orbits use streams `0..orbits`.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

/// A shift-invariant measure on `{1..d}^ℕ` that can be sampled.
#[derive(Clone, Debug, PartialEq)]
pub enum SymbolMeasure {
    Bernoulli(Vec<f64>),
    /// Memory-`k` chain: `initial` is a law on words of length `k`, and
    /// `transition[w]` the law of the next symbol after the length-`k` word `w`.
    Markov { d: usize, memory: usize, initial: Vec<f64>, transition: Vec<Vec<f64>> },
}

fn check_prob(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !(0.0..=1.0).contains(x)) || (p.iter().sum::<f64>() - 1.0).abs() > PROB_TOL {
        return Err(Error::InvalidProbability(format!("{what}: {p:?}")));
    }
    Ok(())
}

impl SymbolMeasure {
    pub fn bernoulli(p: Vec<f64>) -> Result<Self> {
        if p.len() < 2 {
            return Err(invalid("d", "need at least two symbols"));
        }
        check_prob(&p, "Bernoulli law")?;
        Ok(Self::Bernoulli(p))
    }

    /// The two-symbol law with mass `p` on symbol 2.
    pub fn two_symbol(p: f64) -> Result<Self> {
        Self::bernoulli(vec![1.0 - p, p])
    }

    pub fn markov(d: usize, memory: usize, initial: Vec<f64>, transition: Vec<Vec<f64>>) -> Result<Self> {
        if d < 2 || memory < 1 {
            return Err(invalid("markov", "need d >= 2 and memory >= 1"));
        }
        let states = d.pow(memory as u32);
        if initial.len() != states || transition.len() != states {
            return Err(Error::LengthMismatch(initial.len().min(transition.len()), states));
        }
        check_prob(&initial, "initial law")?;
        for row in &transition {
            if row.len() != d {
                return Err(Error::LengthMismatch(row.len(), d));
            }
            check_prob(row, "transition row")?;
        }
        Ok(Self::Markov { d, memory, initial, transition })
    }

    pub fn d(&self) -> usize {
        match self {
            Self::Bernoulli(p) => p.len(),
            Self::Markov { d, .. } => *d,
        }
    }

    /// Every cylinder has positive mass.
    pub fn positive_on_cylinders(&self) -> bool {
        match self {
            Self::Bernoulli(p) => p.iter().all(|&x| x > 0.0),
            Self::Markov { initial, transition, .. } => {
                initial.iter().all(|&x| x > 0.0) && transition.iter().flatten().all(|&x| x > 0.0)
            }
        }
    }

    pub fn min_probability(&self) -> f64 {
        match self {
            Self::Bernoulli(p) => p.iter().copied().fold(f64::INFINITY, f64::min),
            Self::Markov { initial, transition, .. } => {
                initial.iter().chain(transition.iter().flatten()).copied().fold(f64::INFINITY, f64::min)
            }
        }
    }

    /// Mass of the cylinder of a 0-based word.
    pub fn cylinder_mass(&self, word: &[usize]) -> f64 {
        match self {
            Self::Bernoulli(p) => word.iter().map(|&a| p[a]).product(),
            Self::Markov { d, memory, initial, transition } => {
                let k = *memory;
                if word.len() < k {
                    // marginal of the initial law
                    let head = word.iter().fold(0, |acc, &a| acc * d + a);
                    let block = d.pow((k - word.len()) as u32);
                    return initial[head * block..(head + 1) * block].iter().sum();
                }
                let mut state = word[..k].iter().fold(0, |acc, &a| acc * d + a);
                let mut mass = initial[state];
                let top = d.pow(k as u32 - 1);
                for &a in &word[k..] {
                    mass *= transition[state][a];
                    state = (state % top) * d + a;
                }
                mass
            }
        }
    }

    fn draw<R: Rng>(law: &[f64], rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, &p) in law.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left a sliver above the total; take the last positive entry
        law.iter().rposition(|&p| p > 0.0).unwrap_or(law.len() - 1)
    }

    /// A 0-based symbol sequence of length `len`.
    pub fn sample<R: Rng>(&self, len: usize, rng: &mut R) -> Vec<usize> {
        match self {
            Self::Bernoulli(p) => (0..len).map(|_| Self::draw(p, rng)).collect(),
            Self::Markov { d, memory, initial, transition } => {
                let k = *memory;
                let start = Self::draw(initial, rng);
                let mut out: Vec<usize> = Word::from_code(start, k, *d).symbols().iter().map(|s| s - 1).collect();
                let top = d.pow(k as u32 - 1);
                let mut state = start;
                while out.len() < len {
                    let a = Self::draw(&transition[state], rng);
                    out.push(a);
                    state = (state % top) * d + a;
                }
                out.truncate(len);
                out
            }
        }
    }
}

/// Seeded orbit source; orbit `i` uses stream `i` of a ChaCha8 generator, so
/// results do not depend on the number of threads.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitSampler {
    pub measure: SymbolMeasure,
    pub n: usize,
    pub orbits: usize,
    pub seed: u64,
}

impl OrbitSampler {
    pub fn new(measure: SymbolMeasure, n: usize, orbits: usize, seed: u64) -> Result<Self> {
        if n < 1 || orbits < 1 {
            return Err(invalid("sampler", "need n >= 1 and at least one orbit"));
        }
        Ok(Self { measure, n, orbits, seed })
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    /// Orbit `i` as a 0-based symbol sequence of length `len`.
    pub fn orbit(&self, i: usize, len: usize) -> Vec<usize> {
        self.measure.sample(len, &mut self.rng(i as u64))
    }
}

/// `max_{0≤i<n} f(σ^i x)`.
pub fn maxplus_birkhoff(f: &DepthKFunction, x: &Word, n: usize) -> Result<f64> {
    let k = f.depth();
    let needed = n + k.saturating_sub(1);
    if n < 1 || x.len() < needed {
        return Err(Error::WordTooShort { needed: needed.max(1), got: x.len() });
    }
    let zero_based: Vec<usize> = x.symbols().iter().map(|s| s - 1).collect();
    Ok(birkhoff_codes(f, &zero_based, n))
}

fn birkhoff_codes(f: &DepthKFunction, x: &[usize], n: usize) -> f64 {
    let k = f.depth();
    let d = f.d();
    let vals = f.values();
    if k == 0 {
        return vals[0];
    }
    let modulus = d.pow(k as u32);
    let mut code = x[..k - 1].iter().fold(0, |acc, &a| acc * d + a);
    let mut best = f64::NEG_INFINITY;
    for i in 0..n {
        code = (code * d + x[i + k - 1]) % modulus;
        best = best.max(vals[code]);
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct BirkhoffReport {
    pub sup_f: f64,
    pub tol: f64,
    /// First `n` with `f ⊕ … ⊕ f∘σ^{n−1} ≥ sup f − tol`, per orbit.
    pub first_hits: Vec<Option<usize>>,
    pub attained_fraction: f64,
}

impl BirkhoffReport {
    pub fn all_attained(&self) -> bool {
        self.first_hits.iter().all(Option::is_some)
    }

    /// Fraction of orbits that have attained the supremum by time `n`.
    pub fn fraction_by(&self, n: usize) -> f64 {
        let hit = self.first_hits.iter().filter(|h| h.is_some_and(|m| m <= n)).count();
        hit as f64 / self.first_hits.len() as f64
    }
}

/// Follows each sampled orbit until the running max-plus sum comes within
/// `tol` of `sup f`.
pub fn birkhoff_limit_test(sampler: &OrbitSampler, f: &DepthKFunction, tol: f64) -> Result<BirkhoffReport> {
    if !sampler.measure.positive_on_cylinders() {
        return Err(Error::Precondition("sampler measure must charge every cylinder".into()));
    }
    if f.d() != sampler.measure.d() {
        return Err(Error::LengthMismatch(f.d(), sampler.measure.d()));
    }
    let sup_f = f.max();
    let k = f.depth();
    let len = sampler.n + k.saturating_sub(1);
    let first_hits: Vec<Option<usize>> = (0..sampler.orbits)
        .into_par_iter()
        .map(|i| {
            let x = sampler.orbit(i, len);
            let d = f.d();
            if k == 0 {
                return Some(1);
            }
            let modulus = d.pow(k as u32);
            let mut code = x[..k - 1].iter().fold(0, |acc, &a| acc * d + a);
            for step in 0..sampler.n {
                code = (code * d + x[step + k - 1]) % modulus;
                if f.values()[code] >= sup_f - tol {
                    return Some(step + 1);
                }
            }
            None
        })
        .collect();
    let attained = first_hits.iter().filter(|h| h.is_some()).count();
    Ok(BirkhoffReport { sup_f, tol, attained_fraction: attained as f64 / sampler.orbits as f64, first_hits })
}

// ============================================================================
// Partition functions
// ============================================================================

/// Exact value for the two-symbol example.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartitionValue {
    /// `log ∫ e^{−nt·maxsum} dμ`.
    pub log_integral: f64,
    /// `c_n(−t)`.
    pub c: f64,
}

impl PartitionValue {
    pub fn integral(&self) -> f64 {
        self.log_integral.exp()
    }
}

/// `e^{−nt}(1 − p^n) + p^n` and `c_n(−t)`, computed in log space; valid for any real `t`.
pub fn partition_function_exact(p: f64, t: f64, n: usize) -> Result<PartitionValue> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidProbability(format!("p = {p}")));
    }
    if n < 1 {
        return Err(invalid("n", "need n >= 1"));
    }
    let nf = n as f64;
    let log_pn = nf * p.ln();
    // log(1 − p^n) without cancellation
    let log_rest = if p == 1.0 { f64::NEG_INFINITY } else { (-(log_pn.exp())).ln_1p() };
    let log_integral = if (nf * t).abs() <= 1.0 {
        // 1 + (e^{−nt} − 1)(1 − p^n), exact at t = 0
        ((-nf * t).exp_m1() * log_rest.exp()).ln_1p()
    } else {
        log_sum_exp(&[-nf * t + log_rest, log_pn])
    };
    Ok(PartitionValue { log_integral, c: log_integral / nf })
}

/// `lim_n c_n(−t) = max{−t, log p}` for `t ≥ 0`.
pub fn partition_limit(p: f64, t: f64) -> f64 {
    (-t).max(p.ln())
}

/// `(1/n) log Σ_w μ[w] e^{n t·maxsum(w)}` summed over all words of length
/// `n + k − 1`, for small `n`.
pub fn partition_function_enumerated(measure: &SymbolMeasure, f: &DepthKFunction, t: f64, n: usize) -> Result<f64> {
    Ok(partition_function_enumerated_many(measure, f, &[t], n)?[0])
}

/// [`partition_function_enumerated`] at several `t`, enumerating the words once.
pub fn partition_function_enumerated_many(
    measure: &SymbolMeasure,
    f: &DepthKFunction,
    ts: &[f64],
    n: usize,
) -> Result<Vec<f64>> {
    let d = measure.d();
    if f.d() != d {
        return Err(Error::LengthMismatch(f.d(), d));
    }
    if n < 1 {
        return Err(invalid("n", "need n >= 1"));
    }
    let len = n + f.depth().saturating_sub(1);
    let total = (d as u128).checked_pow(len as u32).unwrap_or(u128::MAX);
    if total > 1 << 24 {
        return Err(Error::TooLarge(format!("{total} words")));
    }
    let (log_mass, maxsum): (Vec<f64>, Vec<f64>) = (0..total as usize)
        .into_par_iter()
        .map_init(
            || vec![0; len],
            |w, code| {
                let mut c = code;
                for slot in w.iter_mut().rev() {
                    *slot = c % d;
                    c /= d;
                }
                (measure.cylinder_mass(w).ln(), birkhoff_codes(f, w, n))
            },
        )
        .unzip();
    let nf = n as f64;
    Ok(ts
        .iter()
        .map(|&t| {
            let terms: Vec<f64> = log_mass.iter().zip(&maxsum).map(|(lm, m)| lm + nf * t * m).collect();
            log_sum_exp(&terms) / nf
        })
        .collect())
}

/// Max-plus Birkhoff sums of sampled orbits; `c_n` of the empirical law.
#[derive(Clone, Debug, PartialEq)]
pub struct MaxSumSample {
    pub n: usize,
    pub seed: u64,
    pub maxsums: Vec<f64>,
}

impl MaxSumSample {
    pub fn draw(sampler: &OrbitSampler, f: &DepthKFunction) -> Result<Self> {
        if f.d() != sampler.measure.d() {
            return Err(Error::LengthMismatch(f.d(), sampler.measure.d()));
        }
        let n = sampler.n;
        let len = n + f.depth().saturating_sub(1);
        let maxsums = (0..sampler.orbits)
            .into_par_iter()
            .map(|i| birkhoff_codes(f, &sampler.orbit(i, len), n))
            .collect();
        Ok(Self { n, seed: sampler.seed, maxsums })
    }

    fn c_of(&self, t: f64, idx: impl Iterator<Item = usize>) -> f64 {
        let nf = self.n as f64;
        let xs: Vec<f64> = idx.map(|i| nf * t * self.maxsums[i]).collect();
        (log_sum_exp(&xs) - (xs.len() as f64).ln()) / nf
    }

    /// `c_n(t)` of the empirical law.
    pub fn c(&self, t: f64) -> f64 {
        self.c_of(t, 0..self.maxsums.len())
    }

    /// Point estimate with a bootstrap percentile interval.
    pub fn estimate(&self, t: f64, resamples: usize, level: f64) -> McEstimate {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(BOOTSTRAP_STREAM);
        let m = self.maxsums.len();
        let mut boot: Vec<f64> = (0..resamples)
            .map(|_| {
                let idx: Vec<usize> = (0..m).map(|_| rng.gen_range(0..m)).collect();
                self.c_of(t, idx.into_iter())
            })
            .collect();
        boot.sort_by(f64::total_cmp);
        let value = self.c(t);
        let (ci_low, ci_high) = if boot.is_empty() {
            (value, value)
        } else {
            let q = |a: f64| boot[((a * (boot.len() - 1) as f64).round() as usize).min(boot.len() - 1)];
            (q((1.0 - level) / 2.0), q((1.0 + level) / 2.0))
        };
        McEstimate { value, ci_low, ci_high, samples: m }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McEstimate {
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }
}

/// Monte Carlo `c_n(t)` with a 95% bootstrap interval from 200 resamples.
pub fn partition_function_mc(sampler: &OrbitSampler, f: &DepthKFunction, t: f64) -> Result<McEstimate> {
    Ok(MaxSumSample::draw(sampler, f)?.estimate(t, 200, 0.95))
}

// ============================================================================
// Large deviations
// ============================================================================

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LdpBound {
    pub t_star: f64,
    pub bound: f64,
}

/// Minimizes `t ↦ tb + c(−t)` over `[0, t_max]` by golden-section search.
pub fn ldp_upper_bound(c_neg: &dyn Fn(f64) -> f64, b: f64, sup_f: f64, t_max: f64, tol: f64) -> Result<LdpBound> {
    if b >= sup_f {
        return Err(Error::Precondition(format!("threshold b = {b} must be below sup f = {sup_f}")));
    }
    if t_max.is_nan() || t_max <= 0.0 {
        return Err(invalid("t_max", format!("{t_max}")));
    }
    let obj = |t: f64| t * b + c_neg(t);
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (0.0, t_max);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (obj(x1), obj(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = obj(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = obj(x2);
        }
    }
    let mut t_star = 0.5 * (lo + hi);
    let mut bound = obj(t_star);
    // the bracket ends are candidates too
    for t in [0.0, t_max] {
        if obj(t) < bound {
            t_star = t;
            bound = obj(t);
        }
    }
    Ok(LdpBound { t_star, bound })
}

/// The bound for the two-symbol example with `c(−t) = max{−t, log p}`,
/// searched on `[0, 10 |log min(p, 1 − p)|]`.
pub fn two_symbol_ldp_bound(p: f64, b: f64) -> Result<LdpBound> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(format!("p = {p} must lie in (0, 1)")));
    }
    let t_max = 10.0 * p.min(1.0 - p).ln().abs();
    ldp_upper_bound(&|t| partition_limit(p, t), b, 1.0, t_max, 1e-11)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RateEstimate {
    pub b: f64,
    /// `(n, (1/n) log μ{maxsum ≤ b})`.
    pub per_n: Vec<(usize, MaxPlusValue)>,
    /// Value at the largest `n`.
    pub limit: MaxPlusValue,
    /// `2 r(n) − r(n/2)` at the largest `n` with `n/2` also listed.
    pub richardson: Option<MaxPlusValue>,
    /// `None` when `b ≥ sup f`.
    pub bound: Option<LdpBound>,
}

impl RateEstimate {
    /// Rate strictly below the bound at every `n`.
    pub fn strict_gap(&self) -> bool {
        match self.bound {
            Some(b) => self.per_n.iter().all(|(_, r)| *r < Finite(b.bound)),
            None => false,
        }
    }
}

/// Exact rates in the two-symbol example: `μ{maxsum ≤ b} = p^n` for `0 ≤ b < 1`.
pub fn empirical_rate(p: f64, b: f64, n_list: &[usize]) -> Result<RateEstimate> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidProbability(format!("p = {p} must lie in (0, 1)")));
    }
    if n_list.contains(&0) {
        return Err(invalid("n", "n must be positive"));
    }
    // (1/n) log p^n does not depend on n
    let rate = if b >= 1.0 {
        Finite(0.0)
    } else if b < 0.0 {
        Bottom
    } else {
        Finite(p.ln())
    };
    let per_n: Vec<(usize, MaxPlusValue)> = n_list.iter().map(|&n| (n, rate)).collect();
    let n_max = n_list.iter().copied().max().ok_or_else(|| invalid("n_list", "empty"))?;
    let richardson = n_list.contains(&(n_max / 2)).then_some(match rate {
        Finite(a) => Finite(2.0 * a - a),
        Bottom => Bottom,
    });
    let bound = if b < 1.0 { Some(two_symbol_ldp_bound(p, b)?) } else { None };
    Ok(RateEstimate { b, per_n, limit: rate, richardson, bound })
}

/// `(log μ{maxsum ≤ b}, log[e^{ntb} ∫ e^{−nt·maxsum} dμ])` in the two-symbol
/// example; the first never exceeds the second.
pub fn chebyshev_step(p: f64, b: f64, t: f64, n: usize) -> Result<(f64, f64)> {
    let nf = n as f64;
    let lhs = if b >= 1.0 {
        0.0
    } else if b < 0.0 {
        f64::NEG_INFINITY
    } else {
        nf * p.ln()
    };
    Ok((lhs, nf * t * b + partition_function_exact(p, t, n)?.log_integral))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConvexityReport {
    /// `|c(s ⊕ t) − c(s) ⊕ c(t)|`.
    pub max_residual: f64,
    /// `c((α ⊙ t) ⊕ (β ⊙ s)) − [(α ⊙ c(t)) ⊕ (β ⊙ c(s))]`; at most 0 when the inequality holds.
    pub convexity_excess: f64,
}

impl ConvexityReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_residual <= tol && self.convexity_excess <= tol
    }
}

/// Max-plus convexity of a partition function `c` for an observable with `f ≥ 1`.
pub fn c_maxplus_convexity_check(
    c: &dyn Fn(f64) -> f64,
    f_min: f64,
    s: f64,
    t: f64,
    alpha: MaxPlusValue,
    beta: MaxPlusValue,
) -> Result<ConvexityReport> {
    if f_min < 1.0 {
        return Err(Error::Precondition(format!("need f >= 1, found min f = {f_min}")));
    }
    if alpha.oplus(beta) != Finite(0.0) {
        return Err(Error::Precondition("need max(alpha, beta) = 0".into()));
    }
    let max_residual = (c(s.max(t)) - c(s).max(c(t))).abs();
    let arg = alpha.odot(Finite(t)).oplus(beta.odot(Finite(s)));
    let lhs = c(arg.finite().expect("alpha or beta is 0"));
    let rhs = alpha.odot(Finite(c(t))).oplus(beta.odot(Finite(c(s))));
    Ok(ConvexityReport { max_residual, convexity_excess: lhs - rhs.to_f64() })
}

/// The example observable: `f(1) = 1`, `f(2) = 0`.
pub fn two_symbol_indicator() -> DepthKFunction {
    DepthKFunction::new(2, 1, vec![1.0, 0.0]).expect("valid table")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &[usize]) -> Word {
        Word::new(s.to_vec(), 2).unwrap()
    }

    #[test]
    fn birkhoff_examples() {
        let f = two_symbol_indicator();
        assert_eq!(maxplus_birkhoff(&f, &w(&[1, 2]), 1).unwrap(), 1.0);
        assert_eq!(maxplus_birkhoff(&f, &w(&[2, 2, 1, 2]), 3).unwrap(), 1.0);
        assert_eq!(maxplus_birkhoff(&f, &w(&[2, 2, 1, 2]), 2).unwrap(), 0.0);
        assert_eq!(maxplus_birkhoff(&f, &w(&[2; 9]), 9).unwrap(), 0.0);
        let g = DepthKFunction::new(2, 2, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(maxplus_birkhoff(&g, &w(&[1, 2]), 2), Err(Error::WordTooShort { .. })));
        assert_eq!(maxplus_birkhoff(&g, &w(&[1, 2, 2]), 2).unwrap(), 3.0);
    }

    #[test]
    fn partition_examples() {
        let v = partition_function_exact(0.5, 2f64.ln(), 1).unwrap();
        assert!((v.integral() - 0.75).abs() < 1e-15);
        assert!((v.c - 0.75f64.ln()).abs() < 1e-15);
        for n in [1, 5, 100] {
            assert_eq!(partition_function_exact(0.3, 0.0, n).unwrap().c, 0.0);
        }
        let far = partition_function_exact(0.5, 0.2, 100_000).unwrap();
        assert!((far.c - partition_limit(0.5, 0.2)).abs() < 1e-4);
        assert!((partition_limit(0.5, 0.2) + 0.2).abs() < 1e-15);
    }

    #[test]
    fn enumeration_matches_closed_form() {
        let f = two_symbol_indicator();
        let m = SymbolMeasure::two_symbol(0.3).unwrap();
        for n in 1..=12 {
            for t in [0.0, 0.4, 2.0, -1.0] {
                let exact = partition_function_exact(0.3, t, n).unwrap().c;
                let sum = partition_function_enumerated(&m, &f, -t, n).unwrap();
                assert!((exact - sum).abs() < 1e-12, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn markov_masses_and_sampling() {
        let t = vec![vec![0.9, 0.1], vec![0.2, 0.8]];
        let m = SymbolMeasure::markov(2, 1, vec![2.0 / 3.0, 1.0 / 3.0], t).unwrap();
        let total: f64 = (0..8)
            .map(|c| m.cylinder_mass(&Word::from_code(c, 3, 2).symbols().iter().map(|s| s - 1).collect::<Vec<_>>()))
            .sum();
        assert!((total - 1.0).abs() < 1e-15);
        let sampler = OrbitSampler::new(m, 50_000, 1, 7).unwrap();
        let x = sampler.orbit(0, 50_000);
        let freq = x.iter().filter(|&&a| a == 0).count() as f64 / x.len() as f64;
        assert!((freq - 2.0 / 3.0).abs() < 0.02);
        // memory two
        let rows = vec![vec![0.5, 0.5], vec![0.1, 0.9], vec![0.6, 0.4], vec![0.3, 0.7]];
        let m2 = SymbolMeasure::markov(2, 2, vec![0.25; 4], rows).unwrap();
        assert_eq!(m2.sample(7, &mut ChaCha8Rng::seed_from_u64(1)).len(), 7);
    }

    #[test]
    fn sampler_is_reproducible() {
        let s = OrbitSampler::new(SymbolMeasure::two_symbol(0.5).unwrap(), 10, 4, 42).unwrap();
        assert_eq!(s.orbit(3, 10), s.orbit(3, 10));
        assert_ne!(s.orbit(2, 10), s.orbit(3, 10));
    }

    #[test]
    fn birkhoff_limit() {
        let s = OrbitSampler::new(SymbolMeasure::two_symbol(0.5).unwrap(), 10_000, 100, 1).unwrap();
        let r = birkhoff_limit_test(&s, &two_symbol_indicator(), 1e-12).unwrap();
        assert!(r.all_attained());
        assert!(r.fraction_by(1) < r.fraction_by(40));
        let r = birkhoff_limit_test(&s, &DepthKFunction::constant(2, 3.0), 0.0).unwrap();
        assert!(r.first_hits.iter().all(|h| *h == Some(1)));
        let degenerate = OrbitSampler::new(SymbolMeasure::two_symbol(1.0).unwrap(), 10, 1, 1).unwrap();
        assert!(birkhoff_limit_test(&degenerate, &two_symbol_indicator(), 0.0).is_err());
    }

    #[test]
    fn monte_carlo_matches_exact() {
        let s = OrbitSampler::new(SymbolMeasure::two_symbol(0.5).unwrap(), 8, 100_000, 3).unwrap();
        let f = two_symbol_indicator();
        let sample = MaxSumSample::draw(&s, &f).unwrap();
        let est = sample.estimate(-0.5, 200, 0.95);
        let exact = partition_function_exact(0.5, 0.5, 8).unwrap().c;
        assert!(est.contains(exact), "{est:?} vs {exact}");
        // c_n(t) ≥ t sup f ... bounded by it for t ≥ 0 since maxsum ≤ 1
        assert!(sample.c(1.0) <= 1.0 + 1e-15);
        assert!(sample.c(-1.0) >= -1.0 - 1e-15);
        assert_eq!(sample.c(0.0), 0.0);
    }

    #[test]
    fn ldp_examples() {
        let r = two_symbol_ldp_bound(0.5, 0.5).unwrap();
        assert!((r.bound + 0.5 * 2f64.ln()).abs() < 1e-8);
        assert!((r.t_star - 2f64.ln()).abs() < 1e-8);
        for p in [0.2, 0.7, 0.9] {
            for b in [0.1, 0.5, 0.9] {
                let r = two_symbol_ldp_bound(p, b).unwrap();
                assert!((r.bound - (1.0 - b) * p.ln()).abs() < 1e-8);
                assert!((r.t_star + p.ln()).abs() < 1e-8);
            }
        }
        let near_zero = two_symbol_ldp_bound(0.4, 1e-9).unwrap();
        assert!((near_zero.bound - 0.4f64.ln()).abs() < 1e-8);
        assert!(two_symbol_ldp_bound(0.5, 1.0).is_err());
    }

    #[test]
    fn rates() {
        let r = empirical_rate(0.5, 0.5, &[5, 10, 20]).unwrap();
        for (_, v) in &r.per_n {
            assert_eq!(*v, Finite(0.5f64.ln()));
        }
        assert!(r.strict_gap());
        assert_eq!(r.richardson, Some(Finite(0.5f64.ln())));
        let all = empirical_rate(0.5, 1.0, &[10]).unwrap();
        assert_eq!(all.limit, Finite(0.0));
        assert!(all.bound.is_none());
        assert_eq!(empirical_rate(0.5, -0.1, &[10]).unwrap().limit, Bottom);
        for n in [1, 10, 50] {
            for t in [0.0, 0.3, 2.0] {
                let (lhs, rhs) = chebyshev_step(0.3, 0.4, t, n).unwrap();
                assert!(lhs <= rhs + 1e-12);
            }
        }
    }

    #[test]
    fn convexity_examples() {
        let p = 0.5;
        let n = 50;
        // f + 1 shifts c_n(u) by u
        let c = |u: f64| u + partition_function_exact(p, -u, n).unwrap().c;
        let r = c_maxplus_convexity_check(&c, 1.0, -0.3, -0.3, Finite(0.0), Finite(-0.5)).unwrap();
        assert!(r.holds(1e-12));
        let r = c_maxplus_convexity_check(&c, 1.0, 0.7, -1.2, Finite(0.0), Bottom).unwrap();
        assert!(r.holds(1e-12) && r.convexity_excess.abs() < 1e-15);
        for (s, t, b) in [(0.4, -0.9, -0.2), (-2.0, 1.0, -1.5), (1.0, 0.2, -0.05)] {
            let r = c_maxplus_convexity_check(&c, 1.0, s, t, Finite(0.0), Finite(b)).unwrap();
            assert!(r.holds(1e-12), "{r:?}");
        }
        assert!(c_maxplus_convexity_check(&c, 0.0, 0.0, 0.0, Finite(0.0), Bottom).is_err());
        assert!(c_maxplus_convexity_check(&c, 1.0, 0.0, 0.0, Finite(-1.0), Bottom).is_err());
    }
}
