//! Exact uniform-integrability and `L_p` criteria for `W`, the spine drift
//! `â` and the triplet of the process driving the spine perpetuity.

use super::chars::{above_e, BranchingChars};
use crate::error::{Error, Result};
use crate::exponents::{kappa_prime, kappa_prime_fd, kappa_real, JointAtom, LevyTriplet};
use crate::report::{Component, Computed, CriterionReport};

/// Threshold below which `θκ′(θ) − κ(θ)` or `κ(pθ) − pκ(θ)` counts as zero.
pub const BOUNDARY_TOLERANCE: f64 = 1e-10;

/// `â = a + θσ² + ∫(Σ_k x_k e^{θx_k} 1_{[−1,1]}(x_k) − x_1 1_{[−1,1]}(x_1)) Π(dx)`.
pub fn hat_a(c: &BranchingChars) -> f64 {
    let closed = |x: f64| x.abs() <= 1.0;
    let sum: f64 = c
        .pi
        .iter()
        .map(|at| {
            let spine: f64 = at
                .positions()
                .iter()
                .filter(|x| closed(**x))
                .map(|x| x * (c.theta * x).exp())
                .sum();
            let eve = at.first().filter(|x| closed(*x)).unwrap_or(0.0);
            at.rate * (spine - eve)
        })
        .sum();
    c.a + c.theta * c.sigma2 + sum
}

/// `Σ_{j≠k} e^{θx_j}` for every entry `k` of every atom, with the atom's
/// size-biased mass `rate·e^{θx_k}`.
fn spine_terms(c: &BranchingChars) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
    c.pi.iter().flat_map(move |at| {
        (0..at.positions().len()).map(move |k| {
            let x = at.positions()[k];
            (x, at.rate * (c.theta * x).exp(), at.others_weight(c.theta, k))
        })
    })
}

/// Triplet of `X_t = −θξ̂_t + tκ(θ)` with the coupled jumps
/// `(−θx_k, Σ_{j≠k} e^{θx_j})` at rate `rate·e^{θx_k}`. Zero coordinates are
/// dropped from the marginals.
pub fn spine_measures(c: &BranchingChars) -> Result<LevyTriplet> {
    let theta = c.theta;
    let atoms: Vec<JointAtom> = spine_terms(c)
        .map(|(x, mass, others)| JointAtom { x: -theta * x, y: others, mass })
        .collect();
    // Between events ξ̂ drifts at θσ² + a − ∫x_1 1_{(−1,1)}(x_1) Π(dx); the
    // triplet's drift adds back the compensator of X's jumps in [−1, 1].
    let between = -theta * (c.sigma2 * theta + c.effective_drift()) + kappa_real(c, theta);
    let compensator: f64 = atoms.iter().filter(|a| a.x.abs() <= 1.0).map(|a| a.x * a.mass).sum();
    LevyTriplet::coupled(theta * theta * c.sigma2, between + compensator, atoms)
}

/// `A(y) = 1 + ∫ Σ_k e^{θx_k} ((−x_k) ∧ y − 1)_+ Π(dx)` for `y ≥ 1`.
pub fn a_spine(c: &BranchingChars, y: f64) -> f64 {
    1.0 + spine_terms(c)
        .map(|(x, mass, _)| mass * ((-x).min(y) - 1.0).max(0.0))
        .sum::<f64>()
}

fn computed(v: f64) -> Computed {
    if v.is_finite() {
        Computed::Finite(v)
    } else {
        Computed::Infinite
    }
}

/// Uniform integrability of `W`: `θξ_t − tκ(θ) → −∞` and
/// `∫ Σ_k e^{θx_k} log s_k / A(log s_k) 1_{(e,∞)}(s_k) Π(dx) < ∞` with
/// `s_k = Σ_{j≠k} e^{θx_j}`.
pub fn check_ui_criterion(c: &BranchingChars) -> CriterionReport {
    let theta = c.theta;
    let k = kappa_real(c, theta);
    // For atomic Π the spine has a finite mean θκ′(θ) − κ(θ), so the limit
    // is decided by its sign.
    let drift = theta * kappa_prime(c, theta) - k;
    let (d1, d2) = (kappa_prime_fd(c, theta, 1e-6), kappa_prime_fd(c, theta, 5e-7));
    let fd = theta * (4.0 * d2 - d1) / 3.0 - k;
    let limit = Component::strict_less("spine_drifts_to_minus_infinity", computed(drift), 0.0, BOUNDARY_TOLERANCE)
        .with_note(format!("θκ′(θ) − κ(θ); Richardson central difference gives {fd:e}"));
    let integral: f64 = spine_terms(c)
        .filter(|(_, _, s)| above_e(*s))
        .map(|(_, mass, s)| mass * s.ln() / a_spine(c, s.ln()))
        .sum();
    CriterionReport::from_components(
        "uniform_integrability",
        vec![limit, Component::finite_integral("log_over_a_integral", computed(integral), 0.0)],
    )
}

/// Convergence of `W` in `L_p`, `p ∈ (1, 2]`: `κ(pθ) < pκ(θ)` and
/// `∫ Σ_k e^{θx_k} s_k^{p−1} 1_{(e,∞)}(s_k) Π(dx) < ∞`.
pub fn check_lp_criterion(c: &BranchingChars, p: f64) -> Result<CriterionReport> {
    if !(p > 1.0 && p <= 2.0) {
        return Err(Error::arg("p", format!("must lie in (1, 2], got {p}")));
    }
    let theta = c.theta;
    let gap = kappa_real(c, p * theta) - p * kappa_real(c, theta);
    let exponent = Component::strict_less("kappa_p_theta_below_p_kappa_theta", computed(gap), 0.0, BOUNDARY_TOLERANCE);
    let integral: f64 = spine_terms(c)
        .filter(|(_, _, s)| above_e(*s))
        .map(|(_, mass, s)| mass * s.powf(p - 1.0))
        .sum();
    Ok(CriterionReport::from_components(
        "lp_convergence",
        vec![exponent, Component::finite_integral("sibling_p_moment", computed(integral), 0.0)],
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::OffspringAtom;
    use crate::exponents::laplace_exponent_x;
    use crate::perpetuity::{drift_to_plus_infinity, log_over_a_integral};
    use crate::report::Verdict;

    fn atom(rate: f64, xs: &[f64]) -> OffspringAtom {
        OffspringAtom::new(rate, xs.to_vec()).unwrap()
    }

    #[test]
    fn hat_a_examples() {
        assert!((hat_a(&BranchingChars::bbm(0.7)) - 0.7).abs() < 1e-15);
        let c = BranchingChars::new(2.0, 0.5, Vec::new(), 0.3).unwrap();
        assert!((hat_a(&c) - 1.1).abs() < 1e-15);
        let c = BranchingChars::new(0.0, 0.0, vec![atom(1.0, &[0.5, -0.5])], 1.0).unwrap();
        let expected = 0.5f64.exp() / 2.0 - (-0.5f64).exp() / 2.0 - 0.5;
        assert!((hat_a(&c) - expected).abs() < 1e-15);
    }

    #[test]
    fn spine_measure_examples() {
        let t = spine_measures(&BranchingChars::bbm(0.8)).unwrap();
        assert!(t.lambda1().is_zero());
        assert_eq!(t.lambda2().atoms().len(), 1);
        assert_eq!((t.lambda2().atoms()[0].location, t.lambda2().atoms()[0].mass), (1.0, 2.0));
        assert!((t.v2() - 0.64).abs() < 1e-15);

        let t = spine_measures(&BranchingChars::new(1.0, 0.0, Vec::new(), 1.0).unwrap()).unwrap();
        assert!(t.lambda1().is_zero() && t.lambda2().is_zero());

        let c = BranchingChars::new(0.0, 0.0, vec![atom(1.0, &[0.0, -1.0])], 1.0).unwrap();
        let t = spine_measures(&c).unwrap();
        let e1 = (-1.0f64).exp();
        let l2: Vec<(f64, f64)> = t.lambda2().atoms().iter().map(|a| (a.location, a.mass)).collect();
        assert_eq!(l2.len(), 2);
        assert!((l2[0].0 - e1).abs() < 1e-15 && (l2[0].1 - 1.0).abs() < 1e-15);
        assert!((l2[1].0 - 1.0).abs() < 1e-15 && (l2[1].1 - e1).abs() < 1e-15);
        // Only the k = 2 event moves the spine (by −1, so X jumps by +θ).
        let l1: Vec<(f64, f64)> = t.lambda1().atoms().iter().map(|a| (a.location, a.mass)).collect();
        assert_eq!(l1.len(), 1);
        assert!((l1[0].0 - 1.0).abs() < 1e-15 && (l1[0].1 - e1).abs() < 1e-15);
    }

    fn grid() -> Vec<BranchingChars> {
        vec![
            BranchingChars::bbm(0.5),
            BranchingChars::new(0.0, 0.0, vec![atom(1.0, &[0.0, -1.0])], 1.0).unwrap(),
            BranchingChars::new(0.4, -0.3, vec![atom(1.5, &[0.8, 0.2, -0.6]), atom(0.5, &[-1.0])], 0.7).unwrap(),
            BranchingChars::new(1.0, 0.2, vec![atom(0.5, &[1.5, -2.0]), atom(2.0, &[]), atom(1.0, &[0.3, 0.3])], 0.6).unwrap(),
            BranchingChars::new(0.0, 1.0, vec![atom(1.0, &[0.0, 0.0, 0.0])], 0.1).unwrap(),
        ]
    }

    #[test]
    fn spine_exponent_identity() {
        for c in grid() {
            let t = spine_measures(&c).unwrap();
            for p in [1.25, 1.5, 2.0] {
                let lhs = laplace_exponent_x(&t, p - 1.0).value;
                let rhs = kappa_real(&c, p * c.theta) - p * kappa_real(&c, c.theta);
                assert!((lhs - rhs).abs() < 1e-10, "{c:?} p={p}: {lhs} vs {rhs}");
            }
        }
    }

    #[test]
    fn spine_mean_matches_kappa_derivative() {
        for c in grid() {
            let t = spine_measures(&c).unwrap();
            let mean = drift_to_plus_infinity(&t).value.finite().unwrap();
            let expected = kappa_real(&c, c.theta) - c.theta * kappa_prime(&c, c.theta);
            assert!((mean - expected).abs() < 1e-12, "{mean} vs {expected}");
        }
    }

    #[test]
    fn bbm_thresholds() {
        let s2 = std::f64::consts::SQRT_2;
        for theta in [0.25, 0.5, 0.99, 1.0, 1.2, s2, 1.5] {
            let c = BranchingChars::bbm(theta);
            let ui = check_ui_criterion(&c);
            assert_eq!(ui.holds(), theta < s2, "θ = {theta}");
            assert_eq!(ui.boundary(), theta == s2);
            let l2 = check_lp_criterion(&c, 2.0).unwrap();
            assert_eq!(l2.holds(), theta < 1.0, "θ = {theta}");
            assert_eq!(l2.boundary(), theta == 1.0);
        }
    }

    #[test]
    fn lp_examples() {
        let c = BranchingChars::new(0.0, 0.0, vec![atom(1.0, &[0.0, 0.0, 0.0])], 0.1).unwrap();
        let r = check_lp_criterion(&c, 2.0).unwrap();
        assert!(r.holds());
        assert_eq!(r.component("sibling_p_moment").unwrap().value, Computed::Finite(0.0));
        assert!(check_lp_criterion(&c, 1.0).is_err());
        assert!(check_lp_criterion(&c, 2.5).is_err());
    }

    #[test]
    fn ui_integral_agrees_with_perpetuity_form() {
        // Large sibling weights so the indicator fires.
        let c = BranchingChars::new(0.5, 0.0, vec![atom(1.0, &[3.0, 2.5, -1.5]), atom(0.3, &[-2.0])], 0.9).unwrap();
        let ui = check_ui_criterion(&c);
        let theorem = ui.component("log_over_a_integral").unwrap();
        assert!(theorem.value.finite().unwrap() > 0.0);
        let perp = log_over_a_integral(&spine_measures(&c).unwrap());
        assert_eq!(perp.verdict, theorem.verdict);
        assert_eq!(perp.verdict, Verdict::Holds);
    }
}
