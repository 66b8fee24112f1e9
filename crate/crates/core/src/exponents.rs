//! Analytic functions the criteria are phrased in: the Laplace exponent of
//! `X`, the truncated-tail function `A`, the branching cumulant `κ` and the
//! spine exponent `Ψ`.

use num_complex::Complex64;

use crate::branching::BranchingChars;
use crate::error::{Error, Result};
use crate::measures::{validate_standing_assumptions, Domain, LevyMeasure};
use crate::quadrature::{IntegralResult, QuadConfig};
use crate::report::Verdict;

/// Joint jump `(i, j)` of `(X, Z)` with intensity `mass`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointAtom {
    pub x: f64,
    pub y: f64,
    pub mass: f64,
}

/// Characteristics of the bivariate process: `X = vB + bt + (compensated
/// jumps in [-1,1]) + (large jumps)` with jump measure `Λ₁`, and the
/// drift-free bounded-variation `Z` with jump measure `Λ₂`.
///
/// Jumps of `X` and `Z` are either independent (never simultaneous) or given
/// by a finite coupled atomic measure on `ℝ²`, in which case `Λ₁`, `Λ₂` are
/// its marginals.
#[derive(Debug, Clone)]
pub struct LevyTriplet {
    v2: f64,
    b: f64,
    lambda1: LevyMeasure,
    lambda2: LevyMeasure,
    coupling: Option<Vec<JointAtom>>,
}

impl LevyTriplet {
    pub fn new(v2: f64, b: f64, lambda1: LevyMeasure, lambda2: LevyMeasure) -> Result<Self> {
        check_scalars(v2, b)?;
        let report = validate_standing_assumptions(&lambda1, &lambda2);
        if report.verdict == Verdict::Fails {
            let failing: Vec<&str> = report
                .components
                .iter()
                .filter(|c| c.verdict == Verdict::Fails)
                .map(|c| c.name.as_str())
                .collect();
            return Err(Error::InvalidTriplet(format!(
                "standing integrability assumption violated: {}",
                failing.join(", ")
            )));
        }
        Ok(LevyTriplet {
            v2,
            b,
            lambda1,
            lambda2,
            coupling: None,
        })
    }

    /// No jumps: `X_t = vB_t + bt`, `Z ≡ 0`.
    pub fn gaussian(v2: f64, b: f64) -> Result<Self> {
        LevyTriplet::new(v2, b, LevyMeasure::zero(), LevyMeasure::zero())
    }

    /// Coupled atomic jump measure. Atoms with both coordinates zero are
    /// dropped; the marginals drop zero coordinates.
    pub fn coupled(v2: f64, b: f64, atoms: Vec<JointAtom>) -> Result<Self> {
        check_scalars(v2, b)?;
        for (i, a) in atoms.iter().enumerate() {
            if !(a.x.is_finite() && a.y.is_finite()) {
                return Err(Error::InvalidMeasure {
                    component: format!("coupled[{i}]"),
                    reason: format!("coordinates must be finite, got ({}, {})", a.x, a.y),
                });
            }
            if !(a.mass.is_finite() && a.mass > 0.0) {
                return Err(Error::InvalidMeasure {
                    component: format!("coupled[{i}]"),
                    reason: format!("mass must be finite and > 0, got {}", a.mass),
                });
            }
        }
        let atoms: Vec<JointAtom> = atoms.into_iter().filter(|a| a.x != 0.0 || a.y != 0.0).collect();
        let lambda1 = LevyMeasure::from_atoms(atoms.iter().filter(|a| a.x != 0.0).map(|a| (a.x, a.mass)))?;
        let lambda2 = LevyMeasure::from_atoms(atoms.iter().filter(|a| a.y != 0.0).map(|a| (a.y, a.mass)))?;
        Ok(LevyTriplet {
            v2,
            b,
            lambda1,
            lambda2,
            coupling: Some(atoms),
        })
    }

    pub fn v2(&self) -> f64 {
        self.v2
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn lambda1(&self) -> &LevyMeasure {
        &self.lambda1
    }

    pub fn lambda2(&self) -> &LevyMeasure {
        &self.lambda2
    }

    pub fn coupling(&self) -> Option<&[JointAtom]> {
        self.coupling.as_deref()
    }
}

fn check_scalars(v2: f64, b: f64) -> Result<()> {
    if !(v2.is_finite() && v2 >= 0.0) {
        return Err(Error::InvalidTriplet(format!("v2 must be finite and >= 0, got {v2}")));
    }
    if !b.is_finite() {
        return Err(Error::InvalidTriplet(format!("b must be finite, got {b}")));
    }
    Ok(())
}

/// `e^u − 1 − u` without cancellation for small `u`.
#[inline]
pub(crate) fn exp_compensated(u: f64) -> f64 {
    if u.abs() < 1e-2 {
        let mut term = u * u / 2.0;
        let mut sum = term;
        for k in 3..12 {
            term *= u / k as f64;
            sum += term;
        }
        sum
    } else {
        u.exp_m1() - u
    }
}

/// `ψ(p) = log E e^{-pX_1} = v²p²/2 − bp + ∫(e^{-px} − 1 + px 1_{[-1,1]}(x)) Λ₁(dx)`.
///
/// Divergence of the jump integral (negative jumps too heavy) comes back as
/// `+∞` with [`crate::Method::DivergenceDetected`].
pub fn laplace_exponent_x(t: &LevyTriplet, p: f64) -> IntegralResult {
    laplace_exponent_with(t, p, &QuadConfig::default())
}

pub fn laplace_exponent_with(t: &LevyTriplet, p: f64, cfg: &QuadConfig) -> IntegralResult {
    let gauss = 0.5 * t.v2 * p * p - t.b * p;
    if p == 0.0 {
        return IntegralResult::exact(0.0);
    }
    let l1 = &t.lambda1;
    let small = l1.integrate_with(&|x| exp_compensated(-p * x), Domain::closed(-1.0, 1.0), cfg);
    let large = l1
        .integrate_with(&|x| (-p * x).exp_m1(), Domain::above(1.0), cfg)
        .combine(l1.integrate_with(&|x| (-p * x).exp_m1(), Domain::below(-1.0), cfg));
    let jumps = small.combine(large);
    jumps.combine(IntegralResult::exact(gauss))
}

/// `A(x) = 1 + ∫_1^x Λ₁((y,∞)) dy = 1 + ∫(x∧z − 1)_+ Λ₁(dz)` for `x ≥ 1`.
pub fn a_function(lambda1: &LevyMeasure, x: f64) -> Result<IntegralResult> {
    if !(x >= 1.0) {
        return Err(Error::arg("x", format!("must be >= 1, got {x}")));
    }
    if x == 1.0 {
        return Ok(IntegralResult::exact(1.0));
    }
    if x.is_infinite() {
        return Err(Error::arg("x", "must be finite"));
    }
    let tol = QuadConfig::default().abs_tol;
    let ramp = lambda1.integrate(|z| z - 1.0, Domain::left_open(1.0, x), tol);
    let flat = lambda1.integrate(|_| x - 1.0, Domain::above(x), tol);
    Ok(IntegralResult::exact(1.0).combine(ramp).combine(flat))
}

/// `e^{zx}` for `z = re + i·im`, assembled from `e^{re·x}(cos(im·x), sin(im·x))`.
#[inline]
fn cexp_mul(re: f64, im: f64, x: f64) -> Complex64 {
    let m = (re * x).exp();
    Complex64::new(m * (im * x).cos(), m * (im * x).sin())
}

/// Cumulant `κ(z) = σ²z²/2 + az + ∫(Σ_k e^{z x_k} − 1 − z x_1 1_{(−1,1)}(x_1)) Π(dx)`.
/// Entries equal to `−∞` contribute nothing.
pub fn kappa(c: &BranchingChars, z: Complex64) -> Complex64 {
    let mut acc = 0.5 * c.sigma2 * z * z + c.a * z;
    for at in &c.pi {
        let mut s = Complex64::new(-1.0, 0.0);
        for &x in at.positions() {
            s += cexp_mul(z.re, z.im, x);
        }
        if let Some(x1) = at.first() {
            if x1.abs() < 1.0 {
                s -= z * x1;
            }
        }
        acc += at.rate * s;
    }
    acc
}

/// `κ` on the real line.
pub fn kappa_real(c: &BranchingChars, z: f64) -> f64 {
    let mut acc = 0.5 * c.sigma2 * z * z + c.a * z;
    for at in &c.pi {
        let mut s = -1.0;
        for &x in at.positions() {
            s += (z * x).exp();
        }
        if let Some(x1) = at.first() {
            if x1.abs() < 1.0 {
                s -= z * x1;
            }
        }
        acc += at.rate * s;
    }
    acc
}

/// `κ′(z) = σ²z + a + ∫(Σ_k x_k e^{z x_k} − x_1 1_{(−1,1)}(x_1)) Π(dx)`.
pub fn kappa_prime(c: &BranchingChars, z: f64) -> f64 {
    let mut acc = c.sigma2 * z + c.a;
    for at in &c.pi {
        let mut s: f64 = at.positions().iter().map(|&x| x * (z * x).exp()).sum();
        if let Some(x1) = at.first() {
            if x1.abs() < 1.0 {
                s -= x1;
            }
        }
        acc += at.rate * s;
    }
    acc
}

/// Central-difference `κ′` with step `h`.
pub fn kappa_prime_fd(c: &BranchingChars, z: f64, h: f64) -> f64 {
    (kappa_real(c, z + h) - kappa_real(c, z - h)) / (2.0 * h)
}

/// `Ψ(s) = κ(θ + is) − κ(θ)`.
pub fn psi_spine(c: &BranchingChars, s: f64) -> Complex64 {
    kappa(c, Complex64::new(c.theta, s)) - kappa(c, Complex64::new(c.theta, 0.0))
}

/// Positive root `p*` of `ψ(p) = 0` on `(0, p_max]`, by bisection to `1e-10`.
///
/// Returns `None` when `ψ < 0` on the whole range. Errors when `ψ` is `+∞`
/// everywhere or never negative.
pub fn critical_moment(t: &LevyTriplet, p_max: f64) -> Result<Option<f64>> {
    if !(p_max.is_finite() && p_max > 0.0) {
        return Err(Error::arg("p_max", format!("must be finite and > 0, got {p_max}")));
    }
    let psi = |p: f64| -> f64 {
        let r = laplace_exponent_x(t, p);
        if r.is_finite() {
            r.value
        } else if r.is_divergent() {
            f64::INFINITY
        } else {
            f64::NAN
        }
    };
    let at_max = psi(p_max);
    if at_max.is_nan() {
        return Err(Error::Numeric(format!("ψ({p_max}) could not be evaluated")));
    }
    if at_max < 0.0 {
        return Ok(None);
    }
    // Find δ with ψ(δ) < 0; convexity and ψ(0) = 0 put the root in (δ, p_max].
    let mut lo = None;
    let mut any_finite = at_max.is_finite();
    let mut p = p_max;
    for _ in 0..64 {
        p *= 0.5;
        let v = psi(p);
        any_finite |= v.is_finite();
        if v < 0.0 {
            lo = Some(p);
            break;
        }
    }
    let Some(mut lo) = lo else {
        return if any_finite {
            Err(Error::ExponentUndefined(
                "ψ is non-negative on (0, p_max]; E e^{-pX_1} < 1 nowhere".into(),
            ))
        } else {
            Err(Error::ExponentUndefined("ψ = +∞ on (0, p_max]".into()))
        };
    };
    let mut hi = p_max;
    while hi - lo > 1e-11 {
        let mid = 0.5 * (lo + hi);
        if psi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::OffspringAtom;
    use crate::measures::{DensityLaw, DensityPiece};
    use std::f64::consts::E;

    #[test]
    fn gaussian_closed_form() {
        let t = LevyTriplet::gaussian(1.0, 1.0).unwrap();
        assert_eq!(laplace_exponent_x(&t, 2.0).value, 0.0);
        assert!((laplace_exponent_x(&t, 1e-9).value).abs() < 1e-8);
    }

    #[test]
    fn single_atom_exponent() {
        let t = LevyTriplet::new(0.0, 0.0, LevyMeasure::atom(1.0, 1.0).unwrap(), LevyMeasure::zero()).unwrap();
        let r = laplace_exponent_x(&t, 1.0);
        assert!((r.value - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn heavy_negative_tail_diverges() {
        let l1 = LevyMeasure::density(DensityPiece::new(
            f64::NEG_INFINITY,
            -1.0,
            DensityLaw::Exponential { c: 1.0, rate: 1.0 },
        ))
        .unwrap();
        let t = LevyTriplet::new(0.0, 0.0, l1, LevyMeasure::zero()).unwrap();
        assert!(laplace_exponent_x(&t, 0.5).is_finite());
        assert!(laplace_exponent_x(&t, 2.0).is_divergent());
    }

    #[test]
    fn a_function_examples() {
        let a = LevyMeasure::atom(1.0, 1.0).unwrap();
        assert_eq!(a_function(&a, 5.0).unwrap().value, 1.0);
        let b = LevyMeasure::atom(3.0, 2.0).unwrap();
        assert_eq!(a_function(&b, 2.0).unwrap().value, 3.0);
        assert_eq!(a_function(&b, 1.0).unwrap().value, 1.0);
        assert!(a_function(&b, 0.5).is_err());
    }

    #[test]
    fn kappa_examples() {
        let bbm = BranchingChars::bbm(1.0);
        for z in [-1.0, 0.3, 2.0] {
            assert!((kappa_real(&bbm, z) - (z * z / 2.0 + 1.0)).abs() < 1e-14);
        }
        let yule = BranchingChars::yule(1.0);
        assert_eq!(kappa(&yule, Complex64::new(0.7, 3.0)), Complex64::new(1.0, 0.0));
        let drift = BranchingChars::new(0.0, 1.0, vec![], 1.0).unwrap();
        assert_eq!(kappa(&drift, Complex64::new(0.5, 2.0)), Complex64::new(0.5, 2.0));
    }

    #[test]
    fn psi_examples() {
        let bbm = BranchingChars::bbm(1.0);
        for s in [0.0, 0.5, -2.0] {
            let got = psi_spine(&bbm, s);
            assert!((got - Complex64::new(-s * s / 2.0, s)).norm() < 1e-14);
        }
        let yule = BranchingChars::yule(1.3);
        assert_eq!(psi_spine(&yule, 4.0).norm(), 0.0);
    }

    #[test]
    fn kappa_prime_matches_difference() {
        let c = BranchingChars::new(
            0.5,
            -0.2,
            vec![
                OffspringAtom::new(1.0, vec![0.5, -0.5]).unwrap(),
                OffspringAtom::new(0.3, vec![2.0, 1.0, -3.0]).unwrap(),
            ],
            0.7,
        )
        .unwrap();
        for z in [0.2, 0.7, 1.5] {
            assert!((kappa_prime(&c, z) - kappa_prime_fd(&c, z, 1e-6)).abs() < 1e-7);
        }
    }

    #[test]
    fn critical_moment_examples() {
        let t = LevyTriplet::gaussian(1.0, 1.0).unwrap();
        assert!((critical_moment(&t, 10.0).unwrap().unwrap() - 2.0).abs() < 1e-10);
        let t = LevyTriplet::gaussian(1.0, 2.0).unwrap();
        assert!((critical_moment(&t, 10.0).unwrap().unwrap() - 4.0).abs() < 1e-10);
        let t = LevyTriplet::gaussian(0.0, 1.0).unwrap();
        assert_eq!(critical_moment(&t, 10.0).unwrap(), None);
        let t = LevyTriplet::gaussian(1.0, -1.0).unwrap();
        assert!(matches!(critical_moment(&t, 10.0), Err(Error::ExponentUndefined(_))));
    }

    #[test]
    fn a_function_density_matches_tail_route() {
        let l1 = LevyMeasure::density(DensityPiece::new(
            0.5,
            f64::INFINITY,
            DensityLaw::Power { c: 1.0, alpha: 3.0 },
        ))
        .unwrap();
        // Λ₁((y,∞)) = y^{-2}/2 for y ≥ 1, so A(x) = 1 + (1 − 1/x)/2.
        for x in [1.5, 3.0, E] {
            let got = a_function(&l1, x).unwrap().value;
            assert!((got - (1.0 + 0.5 * (1.0 - 1.0 / x))).abs() < 1e-9, "{x}: {got}");
        }
    }

    #[test]
    fn coupled_marginals() {
        let t = LevyTriplet::coupled(
            0.0,
            0.0,
            vec![
                JointAtom { x: 0.0, y: 1.0, mass: 1.0 },
                JointAtom { x: 0.0, y: 1.0, mass: 1.0 },
                JointAtom { x: 0.0, y: 0.0, mass: 4.0 },
            ],
        )
        .unwrap();
        assert!(t.lambda1().is_zero());
        assert_eq!(t.lambda2().atoms().len(), 1);
        assert_eq!(t.lambda2().atoms()[0].mass, 2.0);
        assert_eq!(t.coupling().unwrap().len(), 2);
    }

    #[test]
    fn exp_compensated_continuity() {
        for u in [-1e-2f64, -1e-2 + 1e-15, 1e-2, 1e-2 - 1e-15] {
            let direct = u.exp_m1() - u;
            assert!((exp_compensated(u) - direct).abs() < 1e-16);
        }
    }
}
