//! The idempotent semiring ℝ_max = ℝ ∪ {−∞} with `⊕ = max` and `⊙ = +`, and
//! idempotent pressure functionals represented by a finite density entropy:
//!
//! ```text
//! ℓ(g) = ⊕_z  g(z) ⊙ h(z) = max_z [ g(z) + h(z) ]
//! ```
//!
//! The point type is left abstract so the same evaluation serves simplex
//! points, cylinder measures and opaque indices.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default absolute tolerance used to collect near-maximizers.
pub const DEFAULT_ARGMAX_TOL: f64 = 1e-9;

/// An element of ℝ_max. The bottom element is a tag, never a sentinel float.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MaxPlusValue {
    Bottom,
    Finite(f64),
}

pub use MaxPlusValue::{Bottom, Finite};

impl MaxPlusValue {
    /// The neutral element of `⊙`.
    pub const ONE: MaxPlusValue = Finite(0.0);
    /// The neutral element of `⊕`.
    pub const ZERO: MaxPlusValue = Bottom;

    /// Maps `-inf` to bottom. Panics on NaN or `+inf`, which are not elements of ℝ_max.
    pub fn from_f64(x: f64) -> Self {
        assert!(!x.is_nan() && x != f64::INFINITY, "{x} is not an element of R_max");
        if x == f64::NEG_INFINITY {
            Bottom
        } else {
            Finite(x)
        }
    }

    pub fn is_bottom(self) -> bool {
        matches!(self, Bottom)
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Bottom => None,
            Finite(x) => Some(x),
        }
    }

    /// Lossy view as a float (`-inf` for bottom), for printing and plotting only.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::NEG_INFINITY)
    }

    pub fn oplus(self, other: Self) -> Self {
        oplus(self, other)
    }

    pub fn odot(self, other: Self) -> Self {
        odot(self, other)
    }
}

impl From<f64> for MaxPlusValue {
    fn from(x: f64) -> Self {
        MaxPlusValue::from_f64(x)
    }
}

impl PartialOrd for MaxPlusValue {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match (self, other) {
            (Bottom, Bottom) => Some(Ordering::Equal),
            (Bottom, Finite(_)) => Some(Ordering::Less),
            (Finite(_), Bottom) => Some(Ordering::Greater),
            (Finite(a), Finite(b)) => a.partial_cmp(b),
        }
    }
}

impl fmt::Display for MaxPlusValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bottom => write!(f, "-inf"),
            Finite(x) => write!(f, "{x}"),
        }
    }
}

/// `a ⊕ b = max(a, b)`; bottom is neutral.
pub fn oplus(a: MaxPlusValue, b: MaxPlusValue) -> MaxPlusValue {
    match (a, b) {
        (Bottom, x) | (x, Bottom) => x,
        (Finite(x), Finite(y)) => Finite(x.max(y)),
    }
}

/// `a ⊙ b = a + b`; bottom is absorbing.
pub fn odot(a: MaxPlusValue, b: MaxPlusValue) -> MaxPlusValue {
    match (a, b) {
        (Bottom, _) | (_, Bottom) => Bottom,
        (Finite(x), Finite(y)) => Finite(x + y),
    }
}

/// `⊕` over an iterator; bottom for an empty iterator.
pub fn oplus_all<I: IntoIterator<Item = MaxPlusValue>>(values: I) -> MaxPlusValue {
    values.into_iter().fold(Bottom, oplus)
}

/// A finite tabulation of a density entropy `h: points → ℝ_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensitySample<P> {
    points: Vec<P>,
    values: Vec<MaxPlusValue>,
}

impl<P> DensitySample<P> {
    /// Requires at least one finite value.
    pub fn new(points: Vec<P>, values: Vec<MaxPlusValue>) -> Result<Self> {
        if points.len() != values.len() {
            return Err(Error::LengthMismatch(points.len(), values.len()));
        }
        if points.is_empty() {
            return Err(Error::EmptyDensity);
        }
        if values.iter().all(|v| v.is_bottom()) {
            return Err(Error::EmptySupport);
        }
        Ok(Self { points, values })
    }

    /// Tabulates `h` on the given points.
    pub fn from_fn(points: Vec<P>, h: impl Fn(&P) -> MaxPlusValue) -> Result<Self> {
        let values = points.iter().map(&h).collect();
        Self::new(points, values)
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn values(&self) -> &[MaxPlusValue] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `⊕_z h(z)`.
    pub fn max_value(&self) -> MaxPlusValue {
        oplus_all(self.values.iter().copied())
    }

    pub fn is_normalized(&self) -> bool {
        self.max_value() == Finite(0.0)
    }

    /// Shifts all finite values so that the maximum is 0.
    pub fn normalized(&self) -> Self
    where
        P: Clone,
    {
        let top = self.max_value().finite().expect("support is nonempty");
        let values = self.values.iter().map(|v| odot(*v, Finite(-top))).collect();
        Self { points: self.points.clone(), values }
    }
}

/// The result of a pressure evaluation: the value and every point within the
/// caller's tolerance of it (the equilibrium states).
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: MaxPlusValue,
    pub argmax: Vec<usize>,
}

/// An idempotent pressure functional `ℓ(g) = max_z [g(z) + h(z)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct IdempotentPressure<P> {
    density: DensitySample<P>,
}

impl<P> IdempotentPressure<P> {
    pub fn new(density: DensitySample<P>) -> Self {
        Self { density }
    }

    pub fn density(&self) -> &DensitySample<P> {
        &self.density
    }

    /// `ℓ(g)` and the argmax set at absolute tolerance `tol`.
    pub fn eval_with(&self, g: impl Fn(&P) -> f64, tol: f64) -> Evaluation {
        let scores: Vec<MaxPlusValue> = self
            .density
            .points
            .iter()
            .zip(&self.density.values)
            .map(|(p, h)| odot(Finite(g(p)), *h))
            .collect();
        let value = oplus_all(scores.iter().copied());
        let argmax = match value {
            Bottom => Vec::new(),
            Finite(top) => scores
                .iter()
                .enumerate()
                .filter_map(|(i, s)| match s {
                    Finite(x) if *x >= top - tol => Some(i),
                    _ => None,
                })
                .collect(),
        };
        Evaluation { value, argmax }
    }

    /// `ℓ(g)` alone.
    pub fn eval(&self, g: impl Fn(&P) -> f64) -> MaxPlusValue {
        self.density
            .points
            .iter()
            .zip(&self.density.values)
            .map(|(p, h)| odot(Finite(g(p)), *h))
            .fold(Bottom, oplus)
    }

    /// `ℓ(g)` for an observable tabulated in point order.
    pub fn eval_table(&self, g: &[f64]) -> Result<MaxPlusValue> {
        if g.len() != self.density.len() {
            return Err(Error::LengthMismatch(g.len(), self.density.len()));
        }
        Ok(g.iter()
            .zip(&self.density.values)
            .map(|(x, h)| odot(Finite(*x), *h))
            .fold(Bottom, oplus))
    }
}

/// Evaluates `ℓ(g)` for a density sample; errors when the sample is empty.
pub fn pressure_eval<P>(
    ell: &IdempotentPressure<P>,
    g: impl Fn(&P) -> f64,
    tol: f64,
) -> Result<Evaluation> {
    if ell.density.is_empty() {
        return Err(Error::EmptyDensity);
    }
    Ok(ell.eval_with(g, tol))
}

/// Residuals of the two max-plus linearity axioms:
/// `ℓ(c ⊙ g) = c ⊙ ℓ(g)` and `ℓ(g ⊕ g') = ℓ(g) ⊕ ℓ(g')`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxiomReport {
    pub homogeneity_residual: f64,
    pub additivity_residual: f64,
}

impl AxiomReport {
    pub fn max_residual(&self) -> f64 {
        self.homogeneity_residual.max(self.additivity_residual)
    }
}

fn residual(a: MaxPlusValue, b: MaxPlusValue) -> f64 {
    match (a, b) {
        (Bottom, Bottom) => 0.0,
        (Finite(x), Finite(y)) => (x - y).abs(),
        _ => f64::INFINITY,
    }
}

pub fn axioms_check<P>(
    ell: &IdempotentPressure<P>,
    g: impl Fn(&P) -> f64,
    g2: impl Fn(&P) -> f64,
    c: f64,
) -> AxiomReport {
    let lg = ell.eval(&g);
    let lg2 = ell.eval(&g2);
    let scaled = ell.eval(|p| c + g(p));
    let joined = ell.eval(|p| g(p).max(g2(p)));
    AxiomReport {
        homogeneity_residual: residual(scaled, odot(Finite(c), lg)),
        additivity_residual: residual(joined, oplus(lg, lg2)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn oplus_examples() {
        assert_eq!(oplus(Finite(2.0), Bottom), Finite(2.0));
        assert_eq!(oplus(Finite(3.0), Finite(3.0)), Finite(3.0));
        assert_eq!(oplus(Finite(-1.5), Finite(2.5)), Finite(2.5));
    }

    #[test]
    fn odot_examples() {
        assert_eq!(odot(Bottom, Finite(5.0)), Bottom);
        assert_eq!(odot(Finite(2.0), Finite(3.0)), Finite(5.0));
        assert_eq!(odot(Finite(0.0), Finite(-7.25)), Finite(-7.25));
    }

    #[test]
    fn neg_infinity_maps_to_bottom() {
        assert_eq!(MaxPlusValue::from(f64::NEG_INFINITY), Bottom);
        assert!(Bottom < Finite(-1e308));
    }

    #[test]
    fn pure_max() {
        let ell = IdempotentPressure::new(
            DensitySample::new(vec![0usize, 1], vec![Finite(0.0), Finite(0.0)]).unwrap(),
        );
        let g = [1.0, 4.0];
        let ev = pressure_eval(&ell, |&i| g[i], DEFAULT_ARGMAX_TOL).unwrap();
        assert_eq!(ev.value, Finite(4.0));
        assert_eq!(ev.argmax, vec![1]);
    }

    #[test]
    fn bottom_excludes_point() {
        let ell = IdempotentPressure::new(
            DensitySample::new(vec![0usize, 1], vec![Finite(0.0), Bottom]).unwrap(),
        );
        let g = [1.0, 100.0];
        let ev = pressure_eval(&ell, |&i| g[i], DEFAULT_ARGMAX_TOL).unwrap();
        assert_eq!(ev.value, Finite(1.0));
        assert_eq!(ev.argmax, vec![0]);
    }

    #[test]
    fn empty_density_is_rejected() {
        assert_eq!(
            DensitySample::<usize>::new(vec![], vec![]).unwrap_err(),
            Error::EmptyDensity
        );
        assert_eq!(
            DensitySample::new(vec![0usize], vec![Bottom]).unwrap_err(),
            Error::EmptySupport
        );
    }

    #[test]
    fn idempotency_and_identity_scalar() {
        let ell = IdempotentPressure::new(
            DensitySample::new(vec![0usize, 1, 2], vec![Finite(-1.0), Finite(0.0), Bottom])
                .unwrap(),
        );
        let g = [0.3, -2.0, 5.0];
        let r = axioms_check(&ell, |&i| g[i], |&i| g[i], 0.0);
        assert_eq!(r.max_residual(), 0.0);
    }

    #[test]
    fn normalized_density_on_constants() {
        let d = DensitySample::new(vec![0usize, 1, 2], vec![Finite(-3.0), Finite(1.5), Bottom])
            .unwrap()
            .normalized();
        assert!(d.is_normalized());
        let ell = IdempotentPressure::new(d);
        assert_eq!(ell.eval(|_| 0.0), Finite(0.0));
        assert_eq!(ell.eval(|_| 2.5), Finite(2.5));
    }

    fn mp() -> impl Strategy<Value = MaxPlusValue> {
        prop_oneof![
            1 => Just(Bottom),
            6 => (-1e3f64..1e3).prop_map(Finite),
        ]
    }

    proptest! {
        #[test]
        fn semiring_laws(a in mp(), b in mp(), c in mp()) {
            prop_assert_eq!(oplus(a, oplus(b, c)), oplus(oplus(a, b), c));
            prop_assert_eq!(oplus(a, b), oplus(b, a));
            prop_assert_eq!(oplus(a, a), a);
            prop_assert_eq!(odot(a, b), odot(b, a));
            // ⊙ is float addition, so associativity and distributivity hold up to rounding
            let lhs = odot(a, oplus(b, c));
            let rhs = oplus(odot(a, b), odot(a, c));
            prop_assert!(residual(lhs, rhs) <= 1e-12);
            prop_assert!(residual(odot(a, odot(b, c)), odot(odot(a, b), c)) <= 1e-9);
        }

        #[test]
        fn axioms_hold_on_random_densities(
            h in proptest::collection::vec(mp(), 10),
            g in proptest::collection::vec(-50f64..50.0, 10),
            g2 in proptest::collection::vec(-50f64..50.0, 10),
            c in -10f64..10.0,
        ) {
            prop_assume!(h.iter().any(|v| !v.is_bottom()));
            let ell = IdempotentPressure::new(DensitySample::new((0..10).collect(), h).unwrap());
            let r = axioms_check(&ell, |&i: &usize| g[i], |&i: &usize| g2[i], c);
            prop_assert!(r.max_residual() <= 1e-12, "{:?}", r);
        }
    }
}
