//! One-dimensional Lévy measures as atomic + piecewise-density mixtures, and
//! the integral functionals evaluated against them.

use std::fmt;
use std::ops::Bound;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_positive, IntegralResult, QuadConfig};
use crate::report::{Component, CriterionReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Density families, evaluated at `|x|`.
#[derive(Clone)]
pub enum DensityLaw {
    /// `c |x|^{-alpha}`
    Power { c: f64, alpha: f64 },
    /// `c e^{-rate |x|}`
    Exponential { c: f64, rate: f64 },
    /// `c |x|^{-1-alpha} e^{-lambda |x|}`; with `lambda = 0` a stable density
    /// truncated to the piece's interval.
    TruncatedStable { c: f64, alpha: f64, lambda: f64 },
    /// Arbitrary density supplied from code (never from config).
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl DensityLaw {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        match self {
            DensityLaw::Power { c, alpha } => c * ax.powf(-alpha),
            DensityLaw::Exponential { c, rate } => c * (-rate * ax).exp(),
            DensityLaw::TruncatedStable { c, alpha, lambda } => {
                c * ax.powf(-1.0 - alpha) * (-lambda * ax).exp()
            }
            DensityLaw::Custom(f) => f(x),
        }
    }

    /// Exponent `α` with density `≍ |x|^{-α}` near 0, when known from the family.
    fn natural_hint(&self) -> Option<f64> {
        match self {
            DensityLaw::Power { alpha, .. } => Some(*alpha),
            DensityLaw::Exponential { .. } => Some(0.0),
            DensityLaw::TruncatedStable { alpha, .. } => Some(1.0 + alpha),
            DensityLaw::Custom(_) => None,
        }
    }
}

impl fmt::Debug for DensityLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DensityLaw::Power { c, alpha } => write!(f, "Power {{ c: {c}, alpha: {alpha} }}"),
            DensityLaw::Exponential { c, rate } => write!(f, "Exponential {{ c: {c}, rate: {rate} }}"),
            DensityLaw::TruncatedStable { c, alpha, lambda } => {
                write!(f, "TruncatedStable {{ c: {c}, alpha: {alpha}, lambda: {lambda} }}")
            }
            DensityLaw::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// A density on the open interval `(lo, hi)`, which must not contain 0.
#[derive(Debug, Clone)]
pub struct DensityPiece {
    pub lo: f64,
    pub hi: f64,
    pub law: DensityLaw,
    /// Exponent `α` of the `|x|^{-α}` behaviour near 0, if the piece touches 0.
    pub integrability_hint: Option<f64>,
}

impl DensityPiece {
    pub fn new(lo: f64, hi: f64, law: DensityLaw) -> Self {
        let integrability_hint = if lo == 0.0 || hi == 0.0 {
            law.natural_hint()
        } else {
            None
        };
        DensityPiece {
            lo,
            hi,
            law,
            integrability_hint,
        }
    }

    pub fn touches_zero(&self) -> bool {
        self.lo == 0.0 || self.hi == 0.0
    }

    fn validate(&self, idx: usize) -> Result<()> {
        let bad = |reason: String| Error::InvalidMeasure {
            component: format!("densities[{idx}]"),
            reason,
        };
        if self.lo.is_nan() || self.hi.is_nan() || !(self.lo < self.hi) {
            return Err(bad(format!("interval ({}, {}) is empty or malformed", self.lo, self.hi)));
        }
        if self.lo < 0.0 && self.hi > 0.0 {
            return Err(bad(format!("interval ({}, {}) contains 0", self.lo, self.hi)));
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(bad(format!("{name} must be finite and > 0, got {v}")))
            }
        };
        match &self.law {
            DensityLaw::Power { c, alpha } => {
                positive("c", *c)?;
                if !alpha.is_finite() {
                    return Err(bad(format!("alpha must be finite, got {alpha}")));
                }
            }
            DensityLaw::Exponential { c, rate } => {
                positive("c", *c)?;
                if !rate.is_finite() || *rate < 0.0 {
                    return Err(bad(format!("rate must be finite and >= 0, got {rate}")));
                }
            }
            DensityLaw::TruncatedStable { c, alpha, lambda } => {
                positive("c", *c)?;
                if !alpha.is_finite() {
                    return Err(bad(format!("alpha must be finite, got {alpha}")));
                }
                if !lambda.is_finite() || *lambda < 0.0 {
                    return Err(bad(format!("lambda must be finite and >= 0, got {lambda}")));
                }
            }
            DensityLaw::Custom(_) => {}
        }
        Ok(())
    }
}

/// Integration domain on the real line, with open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub lo: Bound<f64>,
    pub hi: Bound<f64>,
}

impl Domain {
    pub const ALL: Domain = Domain {
        lo: Bound::Unbounded,
        hi: Bound::Unbounded,
    };

    /// `(y, ∞)`
    pub fn above(y: f64) -> Self {
        Domain {
            lo: Bound::Excluded(y),
            hi: Bound::Unbounded,
        }
    }

    /// `(-∞, y)`
    pub fn below(y: f64) -> Self {
        Domain {
            lo: Bound::Unbounded,
            hi: Bound::Excluded(y),
        }
    }

    pub fn closed(a: f64, b: f64) -> Self {
        Domain {
            lo: Bound::Included(a),
            hi: Bound::Included(b),
        }
    }

    pub fn open(a: f64, b: f64) -> Self {
        Domain {
            lo: Bound::Excluded(a),
            hi: Bound::Excluded(b),
        }
    }

    /// `(a, b]`
    pub fn left_open(a: f64, b: f64) -> Self {
        Domain {
            lo: Bound::Excluded(a),
            hi: Bound::Included(b),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = match self.lo {
            Bound::Included(a) => x >= a,
            Bound::Excluded(a) => x > a,
            Bound::Unbounded => true,
        };
        let hi_ok = match self.hi {
            Bound::Included(b) => x <= b,
            Bound::Excluded(b) => x < b,
            Bound::Unbounded => true,
        };
        lo_ok && hi_ok
    }

    fn lo_value(&self) -> f64 {
        match self.lo {
            Bound::Included(a) | Bound::Excluded(a) => a,
            Bound::Unbounded => f64::NEG_INFINITY,
        }
    }

    fn hi_value(&self) -> f64 {
        match self.hi {
            Bound::Included(b) | Bound::Excluded(b) => b,
            Bound::Unbounded => f64::INFINITY,
        }
    }
}

/// A σ-finite jump measure on `ℝ∖{0}`: finitely many atoms plus density pieces.
#[derive(Debug, Clone, Default)]
pub struct LevyMeasure {
    atoms: Vec<Atom>,
    densities: Vec<DensityPiece>,
}

impl LevyMeasure {
    pub fn zero() -> Self {
        LevyMeasure::default()
    }

    pub fn new(atoms: Vec<Atom>, densities: Vec<DensityPiece>) -> Result<Self> {
        for (i, a) in atoms.iter().enumerate() {
            let bad = |reason: String| Error::InvalidMeasure {
                component: format!("atoms[{i}]"),
                reason,
            };
            if !a.location.is_finite() {
                return Err(bad(format!("location must be finite, got {}", a.location)));
            }
            if a.location == 0.0 {
                return Err(bad("atom at 0 is not allowed".into()));
            }
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(bad(format!("mass must be finite and > 0, got {}", a.mass)));
            }
        }
        for (i, d) in densities.iter().enumerate() {
            d.validate(i)?;
        }
        Ok(LevyMeasure { atoms: merge_atoms(atoms), densities })
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        let atoms = atoms
            .into_iter()
            .map(|(location, mass)| Atom { location, mass })
            .collect();
        LevyMeasure::new(atoms, Vec::new())
    }

    pub fn atom(location: f64, mass: f64) -> Result<Self> {
        LevyMeasure::from_atoms([(location, mass)])
    }

    pub fn density(piece: DensityPiece) -> Result<Self> {
        LevyMeasure::new(Vec::new(), vec![piece])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn densities(&self) -> &[DensityPiece] {
        &self.densities
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.is_empty() && self.densities.is_empty()
    }

    pub fn is_atomic(&self) -> bool {
        self.densities.is_empty()
    }

    /// `∫_domain f dm` with the default quadrature settings and tolerance `tol`.
    pub fn integrate<F>(&self, f: F, domain: Domain, tol: f64) -> IntegralResult
    where
        F: Fn(f64) -> f64,
    {
        let cfg = QuadConfig {
            abs_tol: tol,
            ..QuadConfig::default()
        };
        self.integrate_with(&f, domain, &cfg)
    }

    pub fn integrate_with(&self, f: &dyn Fn(f64) -> f64, domain: Domain, cfg: &QuadConfig) -> IntegralResult {
        let atomic: f64 = self
            .atoms
            .iter()
            .filter(|a| domain.contains(a.location))
            .map(|a| a.mass * f(a.location))
            .sum();
        let mut out = if atomic.is_nan() {
            IntegralResult::indeterminate(f64::NEG_INFINITY, f64::INFINITY)
        } else if atomic.is_infinite() {
            IntegralResult::divergent(atomic)
        } else {
            IntegralResult::exact(atomic)
        };
        let pieces: Vec<(f64, f64, &DensityPiece)> = self
            .densities
            .iter()
            .filter_map(|d| {
                let lo = d.lo.max(domain.lo_value());
                let hi = d.hi.min(domain.hi_value());
                (lo < hi).then_some((lo, hi, d))
            })
            .collect();
        if pieces.is_empty() {
            return out;
        }
        let tol = cfg.abs_tol / pieces.len() as f64;
        let mut evals = 0usize;
        for (lo, hi, d) in pieces {
            let r = if lo >= 0.0 {
                let g = |x: f64| f(x) * d.law.eval(x);
                integrate_positive(&g, lo, hi, tol, cfg, &mut evals)
            } else {
                // Mirror the negative half-line onto (−hi, −lo).
                let g = |u: f64| f(-u) * d.law.eval(-u);
                integrate_positive(&g, -hi, -lo, tol, cfg, &mut evals)
            };
            out = out.combine(r);
        }
        out
    }

    /// `m((y, ∞))` for `y > 0`.
    pub fn tail_mass(&self, y: f64) -> Result<IntegralResult> {
        if !(y > 0.0) || !y.is_finite() {
            return Err(Error::arg("y", format!("must be finite and > 0, got {y}")));
        }
        Ok(self.integrate(|_| 1.0, Domain::above(y), QuadConfig::default().abs_tol))
    }

    /// Mass of `{|x| > eps}`.
    pub fn mass_outside(&self, eps: f64, cfg: &QuadConfig) -> IntegralResult {
        let right = self.integrate_with(&|_| 1.0, Domain::above(eps), cfg);
        let left = self.integrate_with(&|_| 1.0, Domain::below(-eps), cfg);
        right.combine(left)
    }

    /// Image of the measure under `x ↦ c x` for `c ≠ 0`; atomic measures only.
    pub fn scaled_atoms(&self, c: f64) -> Result<LevyMeasure> {
        if !self.is_atomic() {
            return Err(Error::arg("measure", "scaling is only supported for atomic measures"));
        }
        LevyMeasure::from_atoms(self.atoms.iter().map(|a| (c * a.location, a.mass)))
    }
}

/// Sorts by location and merges atoms sitting at the same point.
fn merge_atoms(mut atoms: Vec<Atom>) -> Vec<Atom> {
    atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
    let mut out: Vec<Atom> = Vec::with_capacity(atoms.len());
    for a in atoms {
        match out.last_mut() {
            Some(last) if last.location == a.location => last.mass += a.mass,
            _ => out.push(a),
        }
    }
    out
}

/// Checks `∫(x²∧1) Λ₁(dx) < ∞` and `∫(|y|∧1) Λ₂(dy) < ∞`.
pub fn validate_standing_assumptions(lambda1: &LevyMeasure, lambda2: &LevyMeasure) -> CriterionReport {
    let tol = QuadConfig::default().abs_tol;
    let small1 = lambda1.integrate(|x| x * x, Domain::closed(-1.0, 1.0), tol);
    let large1 = lambda1.integrate(|_| 1.0, Domain::above(1.0), tol).combine(lambda1.integrate(
        |_| 1.0,
        Domain::below(-1.0),
        tol,
    ));
    let i1 = small1.combine(large1);
    let small2 = lambda2.integrate(|y| y.abs(), Domain::closed(-1.0, 1.0), tol);
    let large2 = lambda2.integrate(|_| 1.0, Domain::above(1.0), tol).combine(lambda2.integrate(
        |_| 1.0,
        Domain::below(-1.0),
        tol,
    ));
    let i2 = small2.combine(large2);
    CriterionReport::from_components(
        "standing_assumptions",
        vec![
            Component::finite_integral("lambda1_x2_wedge_1", i1.computed(), i1.abs_error_bound)
                .with_note(format!("method: {:?}", i1.method)),
            Component::finite_integral("lambda2_abs_y_wedge_1", i2.computed(), i2.abs_error_bound)
                .with_note(format!("method: {:?}", i2.method)),
        ],
    )
}
