//! The perpetuity `S = ∫_0^∞ e^{-X_{s-}} dZ_s`: exact finiteness and moment
//! criteria, affine iteration over i.i.d. embedding pairs, and Monte Carlo
//! moment and tail-index estimates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::exponents::{a_function, laplace_exponent_x, LevyTriplet};
use crate::mc::{par_streams, Summary};
use crate::measures::Domain;
use crate::report::{Component, Computed, CriterionReport, Verdict};
use crate::rng::{SeedRecord, StreamRng};
use crate::sampler::{EmbeddingPair, PathSampler, SamplerConfig};

/// Margin below which `E X_1` counts as zero.
pub const MEAN_TOLERANCE: f64 = 1e-12;

/// Floor on the tolerance applied to `ψ(p) < 0`.
pub const EXPONENT_TOLERANCE: f64 = 1e-12;

/// Decides `X_t → +∞` a.s. from the mean `E X_1 = b + ∫_{|x|>1} x Λ₁(dx)`.
///
/// Zero mean fails (oscillation). A non-integrable positive tail with an
/// integrable negative one forces `+∞`; both tails non-integrable is left
/// indeterminate.
pub fn drift_to_plus_infinity(t: &LevyTriplet) -> Component {
    const NAME: &str = "x_drifts_to_plus_infinity";
    let l1 = t.lambda1();
    let tol = 1e-12;
    let up = l1.integrate(|x| x, Domain::above(1.0), tol);
    let down = l1.integrate(|x| -x, Domain::below(-1.0), tol);
    let up_inf = up.is_divergent();
    let down_inf = down.is_divergent();
    if !(up.is_finite() || up_inf) || !(down.is_finite() || down_inf) {
        return Component::new(NAME, Verdict::Indeterminate, Computed::Unknown)
            .with_note("tail integrals of Λ₁ could not be resolved");
    }
    match (up_inf, down_inf) {
        (false, false) => {
            let mean = t.b() + up.value - down.value;
            let err = up.abs_error_bound + down.abs_error_bound;
            // −E X_1 < 0, so the margin convention matches the other components.
            let mut c = Component::strict_less(NAME, Computed::Finite(-mean), 0.0, tol.max(err));
            c.value = Computed::Finite(mean);
            if c.boundary {
                c.note = Some("E X_1 = 0: X oscillates".into());
            }
            c
        }
        (true, false) => Component::new(NAME, Verdict::Holds, Computed::Infinite)
            .with_note("E X_1 = +∞ (negative tail integrable)"),
        (false, true) => {
            let mut c = Component::new(NAME, Verdict::Fails, Computed::Finite(f64::NEG_INFINITY))
                .with_note("E X_1 = −∞ (positive tail integrable)");
            c.margin = Some(f64::INFINITY);
            c
        }
        (true, true) => Component::new(NAME, Verdict::Indeterminate, Computed::Unknown)
            .with_note("E|X_1| = ∞ with both tails non-integrable; no mean-based test applies"),
    }
}

/// `∫_{|y|>e} log|y| / A(log|y|) Λ₂(dy)`.
pub fn log_over_a_integral(t: &LevyTriplet) -> Component {
    let l1 = t.lambda1();
    let integrand = |y: f64| {
        let l = y.abs().ln();
        match a_function(l1, l) {
            Ok(a) if a.is_finite() => l / a.value,
            _ => f64::NAN,
        }
    };
    let tol = 1e-10;
    let r = t
        .lambda2()
        .integrate(integrand, Domain::above(std::f64::consts::E), tol)
        .combine(t.lambda2().integrate(integrand, Domain::below(-std::f64::consts::E), tol));
    Component::finite_integral("log_over_a_integral", r.computed(), r.abs_error_bound)
}

fn degenerate_report(criterion: &str) -> CriterionReport {
    CriterionReport::from_components(criterion, Vec::new())
        .with_note("Λ₂ = 0: S ≡ 0, which is finite with every moment equal to 0")
}

/// A.s. existence and finiteness of `S`: `X_t → +∞` and
/// `∫_{|y|>e} log|y| / A(log|y|) Λ₂(dy) < ∞`. Both conditions are necessary
/// and sufficient, so a failing component means `S` does not converge.
pub fn check_as_finiteness(t: &LevyTriplet) -> CriterionReport {
    if t.lambda2().is_zero() {
        return degenerate_report("as_finiteness");
    }
    CriterionReport::from_components(
        "as_finiteness",
        vec![drift_to_plus_infinity(t), log_over_a_integral(t)],
    )
}

/// `E|S|^p < ∞` iff `ψ(p) < 0` and `∫_{|y|>1} |y|^p Λ₂(dy) < ∞`.
/// `ψ(p) = 0` fails with the boundary flag set.
pub fn check_moment_finiteness(t: &LevyTriplet, p: f64) -> Result<CriterionReport> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::arg("p", format!("must be finite and > 0, got {p}")));
    }
    if t.lambda2().is_zero() {
        return Ok(degenerate_report("moment_finiteness"));
    }
    let psi = laplace_exponent_x(t, p);
    let exponent = Component::strict_less(
        "laplace_exponent_negative",
        psi.computed(),
        0.0,
        EXPONENT_TOLERANCE.max(psi.abs_error_bound),
    );
    let tol = 1e-10;
    let l2 = t.lambda2();
    let tail = l2
        .integrate(|y| y.abs().powf(p), Domain::above(1.0), tol)
        .combine(l2.integrate(|y| y.abs().powf(p), Domain::below(-1.0), tol));
    let payments = Component::finite_integral("lambda2_p_moment", tail.computed(), tail.abs_error_bound);
    Ok(CriterionReport::from_components("moment_finiteness", vec![exponent, payments]))
}

/// Source of i.i.d. pairs `(M, Q)` for the affine recursion.
pub trait PairSource: Sync {
    fn draw(&self, rng: &mut StreamRng) -> EmbeddingPair;

    /// True when `Q ≡ 0`, so every `S_n` vanishes.
    fn is_trivial(&self) -> bool {
        false
    }
}

/// Pairs `(e^{-X_1}, ∫_{[0,1]} e^{-X_{s-}} dZ_s)` sampled from a triplet.
#[derive(Debug, Clone)]
pub struct LevyPairs {
    sampler: PathSampler,
    trivial: bool,
}

impl LevyPairs {
    pub fn new(t: &LevyTriplet, cfg: &SamplerConfig) -> Result<Self> {
        Ok(LevyPairs {
            sampler: PathSampler::new(t, cfg)?,
            trivial: t.lambda2().is_zero(),
        })
    }

    pub fn sampler(&self) -> &PathSampler {
        &self.sampler
    }
}

impl PairSource for LevyPairs {
    fn draw(&self, rng: &mut StreamRng) -> EmbeddingPair {
        self.sampler.sample_mq(rng)
    }

    fn is_trivial(&self) -> bool {
        self.trivial
    }
}

/// Constant pair, for tests and calibration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterministicPairs {
    pub m: f64,
    pub q: f64,
}

impl PairSource for DeterministicPairs {
    fn draw(&self, _: &mut StreamRng) -> EmbeddingPair {
        EmbeddingPair {
            m_star: self.m,
            q_star: self.q,
        }
    }

    fn is_trivial(&self) -> bool {
        self.q == 0.0
    }
}

/// Finitely supported law of `(M, Q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePairs {
    atoms: Vec<(EmbeddingPair, f64)>,
    cum: Vec<f64>,
}

impl DiscretePairs {
    /// `atoms` are `(m, q, probability)`; probabilities must sum to 1.
    pub fn new(atoms: &[(f64, f64, f64)]) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::arg("atoms", "at least one atom is required"));
        }
        let mut cum = Vec::with_capacity(atoms.len());
        let mut total = 0.0;
        for &(m, q, w) in atoms {
            if !(m.is_finite() && q.is_finite() && w.is_finite() && w > 0.0) {
                return Err(Error::arg("atoms", format!("invalid atom ({m}, {q}, {w})")));
            }
            total += w;
            cum.push(total);
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::arg("atoms", format!("probabilities sum to {total}, not 1")));
        }
        Ok(DiscretePairs {
            atoms: atoms
                .iter()
                .map(|&(m, q, w)| (EmbeddingPair { m_star: m, q_star: q }, w))
                .collect(),
            cum,
        })
    }

    /// `E|M|^p < 1` and `E|Q|^p < ∞`, evaluated on the atoms.
    pub fn moment_criterion(&self, p: f64) -> CriterionReport {
        let em: f64 = self.atoms.iter().map(|(a, w)| w * a.m_star.abs().powf(p)).sum();
        let eq: f64 = self.atoms.iter().map(|(a, w)| w * a.q_star.abs().powf(p)).sum();
        CriterionReport::from_components(
            "discrete_moment",
            vec![
                Component::strict_less("m_p_moment_below_one", Computed::Finite(em), 1.0, EXPONENT_TOLERANCE),
                Component::finite_integral("q_p_moment", Computed::Finite(eq), 0.0),
            ],
        )
    }
}

impl PairSource for DiscretePairs {
    fn draw(&self, rng: &mut StreamRng) -> EmbeddingPair {
        let u: f64 = rng.random::<f64>() * *self.cum.last().unwrap();
        let idx = self.cum.partition_point(|&c| c <= u).min(self.atoms.len() - 1);
        self.atoms[idx].0
    }

    fn is_trivial(&self) -> bool {
        self.atoms.iter().all(|(a, _)| a.q_star == 0.0)
    }
}

/// How many affine steps to take.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationRule {
    Fixed(usize),
    /// Stop once `|S_{n+10} − S_n| < tol` at three consecutive checks, or at `n_max`.
    Adaptive { n_max: usize, tol: f64 },
}

impl IterationRule {
    pub fn adaptive() -> Self {
        IterationRule::Adaptive { n_max: 1000, tol: 1e-9 }
    }
}

/// `S_n = Σ_{k=1}^n (Π_{i<k} M_i) Q_k` for one seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerpetuitySample {
    pub value: f64,
    pub n_iterations: usize,
    /// False when an adaptive run stopped at `n_max`.
    pub converged: bool,
    pub seed: SeedRecord,
}

/// Runs the affine recursion on pairs from `source`. Errors if the running
/// product or sum leaves the float range.
pub fn iterate_affine<S: PairSource + ?Sized>(source: &S, rule: IterationRule, seed: SeedRecord) -> Result<PerpetuitySample> {
    let mut rng = seed.rng();
    let (n_max, tol) = match rule {
        IterationRule::Fixed(n) => {
            if n == 0 {
                return Err(Error::arg("n", "must be >= 1"));
            }
            (n, None)
        }
        IterationRule::Adaptive { n_max, tol } => {
            if n_max == 0 {
                return Err(Error::arg("n_max", "must be >= 1"));
            }
            (n_max, Some(tol))
        }
    };
    let mut s = 0.0f64;
    let mut prod = 1.0f64;
    let mut last_check = 0.0;
    let mut quiet = 0;
    for k in 1..=n_max {
        let pair = source.draw(&mut rng);
        s += prod * pair.q_star;
        prod *= pair.m_star;
        if !(s.is_finite() && prod.is_finite()) {
            return Err(Error::Numeric(format!("affine recursion overflowed at step {k}")));
        }
        if let Some(tol) = tol {
            if k % 10 == 0 {
                if k > 10 && (s - last_check).abs() < tol {
                    quiet += 1;
                    if quiet == 3 {
                        return Ok(PerpetuitySample { value: s, n_iterations: k, converged: true, seed });
                    }
                } else {
                    quiet = 0;
                }
                last_check = s;
            }
        }
    }
    Ok(PerpetuitySample {
        value: s,
        n_iterations: n_max,
        converged: tol.is_none(),
        seed,
    })
}

/// Independent perpetuity samples; overflowing seeds are counted and dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct PerpetuityBatch {
    pub samples: Vec<PerpetuitySample>,
    pub n_overflowed: usize,
}

impl PerpetuityBatch {
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.value).collect()
    }
}

/// Draws `n` samples on streams `0..n` of `key`, in parallel.
pub fn sample_perpetuity<S: PairSource + ?Sized>(source: &S, n: usize, rule: IterationRule, key: u64) -> Result<PerpetuityBatch> {
    if let IterationRule::Fixed(0) = rule {
        return Err(Error::arg("n", "must be >= 1"));
    }
    let results = par_streams(key, n, |seed, _| iterate_affine(source, rule, seed));
    let mut samples = Vec::with_capacity(n);
    let mut n_overflowed = 0;
    for r in results {
        match r {
            Ok(s) => samples.push(s),
            Err(Error::Numeric(_)) => n_overflowed += 1,
            Err(e) => return Err(e),
        }
    }
    Ok(PerpetuityBatch { samples, n_overflowed })
}

/// Monte Carlo estimate of `E|S|^p` with a heavy-tail diagnostic.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimate {
    pub p: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub n_overflowed: usize,
    pub mean_iterations: f64,
    /// Means of four contiguous batches of the samples.
    pub batch_means: [f64; 4],
    /// False when the batch means spread more than ten pooled standard errors.
    pub stable: bool,
}

/// Sample mean of `|S|^p` over `n_samples ≥ 100` seeds.
pub fn estimate_abs_moment<S: PairSource + ?Sized>(
    source: &S,
    p: f64,
    n_samples: usize,
    rule: IterationRule,
    key: u64,
) -> Result<MomentEstimate> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::arg("p", format!("must be finite and > 0, got {p}")));
    }
    if n_samples < 100 {
        return Err(Error::arg("n_samples", format!("must be >= 100, got {n_samples}")));
    }
    let batch = sample_perpetuity(source, n_samples, rule, key)?;
    moment_from_batch(&batch, p)
}

/// Moment estimate from an existing batch (e.g. to reuse samples across `p`).
pub fn moment_from_batch(batch: &PerpetuityBatch, p: f64) -> Result<MomentEstimate> {
    let n = batch.samples.len();
    if n == 0 {
        return Err(Error::Degenerate(format!(
            "all {} samples overflowed",
            batch.n_overflowed
        )));
    }
    let values: Vec<f64> = batch.samples.iter().map(|s| s.value.abs().powf(p)).collect();
    let pooled = Summary::from_slice(&values);
    let mut batch_means = [f64::NAN; 4];
    for (b, m) in batch_means.iter_mut().enumerate() {
        let lo = b * n / 4;
        let hi = (b + 1) * n / 4;
        if hi > lo {
            *m = Summary::from_slice(&values[lo..hi]).mean;
        }
    }
    let finite: Vec<f64> = batch_means.iter().copied().filter(|m| m.is_finite()).collect();
    let spread = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - finite.iter().copied().fold(f64::INFINITY, f64::min);
    let se = pooled.std_error();
    let stable = finite.len() < 2 || spread <= 10.0 * se;
    let mean_iterations =
        batch.samples.iter().map(|s| s.n_iterations as f64).sum::<f64>() / n as f64;
    Ok(MomentEstimate {
        p,
        estimate: pooled.mean,
        std_error: se,
        n_samples: n,
        n_overflowed: batch.n_overflowed,
        mean_iterations,
        batch_means,
        stable,
    })
}

/// Hill estimator `k / Σ_{i=1}^k log(|S|_{(n−i+1)} / |S|_{(n−k)})` on the `k`
/// largest absolute values.
pub fn hill_tail_index(samples: &[f64], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::arg("k", "must be >= 1"));
    }
    let mut xs: Vec<f64> = samples.iter().map(|x| x.abs()).filter(|x| *x > 0.0 && x.is_finite()).collect();
    if xs.len() < k + 1 {
        return Err(Error::arg(
            "samples",
            format!("need at least {} positive values, got {}", k + 1, xs.len()),
        ));
    }
    xs.sort_by(|a, b| b.total_cmp(a));
    let threshold = xs[k];
    let sum: f64 = xs[..k].iter().map(|x| (x / threshold).ln()).sum();
    if !(sum > 0.0) {
        return Err(Error::Degenerate("top order statistics coincide; log-sum is zero".into()));
    }
    Ok(k as f64 / sum)
}

/// Convenience: `ψ`-based moment verdicts on a grid of `p`.
pub fn moment_verdicts(t: &LevyTriplet, ps: &[f64]) -> Result<Vec<(f64, CriterionReport)>> {
    ps.iter().map(|&p| Ok((p, check_moment_finiteness(t, p)?))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{DensityLaw, DensityPiece, LevyMeasure};
    use proptest::prelude::*;

    fn light() -> LevyTriplet {
        LevyTriplet::new(1.0, 1.0, LevyMeasure::zero(), LevyMeasure::atom(1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn as_finiteness_examples() {
        assert_eq!(check_as_finiteness(&light()).verdict, Verdict::Holds);
        let down = LevyTriplet::new(0.0, -1.0, LevyMeasure::zero(), LevyMeasure::atom(1.0, 1.0).unwrap()).unwrap();
        assert_eq!(check_as_finiteness(&down).verdict, Verdict::Fails);
        let zero_mean = LevyTriplet::new(1.0, 0.0, LevyMeasure::zero(), LevyMeasure::atom(1.0, 1.0).unwrap()).unwrap();
        let r = check_as_finiteness(&zero_mean);
        assert_eq!(r.verdict, Verdict::Fails);
        assert!(r.boundary());
    }

    #[test]
    fn mean_trichotomy_with_heavy_tails() {
        let cauchy_up = DensityPiece::new(1.0, f64::INFINITY, DensityLaw::Power { c: 1.0, alpha: 2.0 });
        let cauchy_down = DensityPiece::new(f64::NEG_INFINITY, -1.0, DensityLaw::Power { c: 1.0, alpha: 2.0 });
        let l2 = LevyMeasure::atom(1.0, 1.0).unwrap();
        let up = LevyTriplet::new(0.0, -5.0, LevyMeasure::density(cauchy_up.clone()).unwrap(), l2.clone()).unwrap();
        assert_eq!(drift_to_plus_infinity(&up).verdict, Verdict::Holds);
        let down = LevyTriplet::new(0.0, 5.0, LevyMeasure::density(cauchy_down.clone()).unwrap(), l2.clone()).unwrap();
        assert_eq!(drift_to_plus_infinity(&down).verdict, Verdict::Fails);
        let both = LevyTriplet::new(0.0, 0.0, LevyMeasure::new(vec![], vec![cauchy_up, cauchy_down]).unwrap(), l2).unwrap();
        assert_eq!(drift_to_plus_infinity(&both).verdict, Verdict::Indeterminate);
    }

    #[test]
    fn log_integrability_of_payments() {
        // Λ₂ = y^{-1}(log y)^{-2} on (e, ∞), A ≡ 1: ∫ log y · y^{-1} (log y)^{-2} dy = ∫ du/u diverges.
        let l2 = LevyMeasure::density(DensityPiece::new(
            std::f64::consts::E,
            f64::INFINITY,
            DensityLaw::Custom(std::sync::Arc::new(|y: f64| 1.0 / (y * y.ln().powi(2)))),
        ))
        .unwrap();
        let t = LevyTriplet::new(1.0, 1.0, LevyMeasure::zero(), l2).unwrap();
        assert_eq!(check_as_finiteness(&t).verdict, Verdict::Fails);
        // Λ₂ = y^{-1}(log y)^{-3}: ∫_1^∞ du/u² = 1.
        let l2 = LevyMeasure::density(DensityPiece::new(
            std::f64::consts::E,
            f64::INFINITY,
            DensityLaw::Custom(std::sync::Arc::new(|y: f64| 1.0 / (y * y.ln().powi(3)))),
        ))
        .unwrap();
        let t = LevyTriplet::new(1.0, 1.0, LevyMeasure::zero(), l2).unwrap();
        let r = check_as_finiteness(&t);
        assert_eq!(r.verdict, Verdict::Holds);
        let c = r.component("log_over_a_integral").unwrap();
        let v = c.value.finite().unwrap();
        assert!((v - 1.0).abs() <= c.tolerance && c.tolerance < 1e-2, "{v} ± {}", c.tolerance);
    }

    #[test]
    fn moment_examples() {
        let r = check_moment_finiteness(&light(), 1.0).unwrap();
        assert_eq!(r.verdict, Verdict::Holds);
        let psi = r.component("laplace_exponent_negative").unwrap().value.finite().unwrap();
        assert!((psi + 0.5).abs() < 1e-15);
        let r = check_moment_finiteness(&light(), 2.0).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert!(r.boundary());
        let l2 = LevyMeasure::density(DensityPiece::new(1.0, f64::INFINITY, DensityLaw::Power { c: 1.0, alpha: 2.0 })).unwrap();
        let t = LevyTriplet::new(1.0, 1.0, LevyMeasure::zero(), l2).unwrap();
        let r = check_moment_finiteness(&t, 1.5).unwrap();
        assert_eq!(r.verdict, Verdict::Fails);
        assert_eq!(r.component("lambda2_p_moment").unwrap().verdict, Verdict::Fails);
        assert_eq!(r.component("laplace_exponent_negative").unwrap().verdict, Verdict::Holds);
    }

    #[test]
    fn degenerate_payments() {
        let t = LevyTriplet::gaussian(1.0, -1.0).unwrap();
        assert_eq!(check_as_finiteness(&t).verdict, Verdict::Holds);
        assert_eq!(check_moment_finiteness(&t, 3.0).unwrap().verdict, Verdict::Holds);
        let src = LevyPairs::new(&t, &SamplerConfig::default()).unwrap();
        let s = iterate_affine(&src, IterationRule::Fixed(20), SeedRecord::new(1, 0)).unwrap();
        assert_eq!(s.value, 0.0);
        let est = estimate_abs_moment(&src, 1.0, 100, IterationRule::Fixed(5), 2).unwrap();
        assert_eq!(est.estimate, 0.0);
    }

    #[test]
    fn geometric_series() {
        let src = DeterministicPairs { m: 0.5, q: 1.0 };
        let s = iterate_affine(&src, IterationRule::Fixed(10), SeedRecord::new(0, 0)).unwrap();
        assert_eq!(s.value, 1.998046875);
        let est = estimate_abs_moment(&src, 1.0, 100, IterationRule::Fixed(30), 0).unwrap();
        assert_eq!(est.estimate, 2.0 - 2f64.powi(-29));
        assert_eq!(est.std_error, 0.0);
        assert!(est.stable);
        let s = iterate_affine(&src, IterationRule::adaptive(), SeedRecord::new(0, 0)).unwrap();
        assert!(s.converged);
        assert!((s.value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn overflow_is_counted() {
        let src = DeterministicPairs { m: 1e200, q: 1.0 };
        let batch = sample_perpetuity(&src, 10, IterationRule::Fixed(5), 0).unwrap();
        assert_eq!(batch.n_overflowed, 10);
        assert!(matches!(moment_from_batch(&batch, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn discrete_pairs_criterion() {
        let d = DiscretePairs::new(&[(0.5, 1.0, 0.5), (1.5, -1.0, 0.5)]).unwrap();
        assert!(d.moment_criterion(1.0).verdict == Verdict::Fails); // E M = 1
        assert!(d.moment_criterion(1.0).boundary());
        assert!(d.moment_criterion(0.5).holds());
        let mut rng = SeedRecord::new(0, 0).rng();
        let draws: Vec<f64> = (0..1000).map(|_| d.draw(&mut rng).m_star).collect();
        let frac = draws.iter().filter(|&&m| m == 0.5).count() as f64 / 1000.0;
        assert!((frac - 0.5).abs() < 0.06);
    }

    #[test]
    fn hill_on_pareto_grids() {
        let n = 10_000;
        for alpha in [1.0, 2.0] {
            let xs: Vec<f64> = (1..=n).map(|i| (i as f64 / n as f64).powf(-1.0 / alpha)).collect();
            let h = hill_tail_index(&xs, 500).unwrap();
            assert!((h - alpha).abs() < 0.1 * alpha.max(1.0), "{alpha}: {h}");
        }
        assert!(hill_tail_index(&[3.0; 100], 10).is_err());
        assert!(hill_tail_index(&[1.0, 2.0], 5).is_err());
    }

    #[test]
    fn cauchy_convergence() {
        let src = LevyPairs::new(&light(), &SamplerConfig::default()).unwrap();
        let worst = (0..200u64)
            .map(|i| {
                let seed = SeedRecord::new(5, i);
                let a = iterate_affine(&src, IterationRule::Fixed(200), seed).unwrap().value;
                let b = iterate_affine(&src, IterationRule::Fixed(400), seed).unwrap().value;
                (a - b).abs()
            })
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
    }

    fn atomic_triplet(b: f64, x: f64, lx: f64, y: f64, ly: f64) -> LevyTriplet {
        LevyTriplet::new(
            0.5,
            b,
            LevyMeasure::atom(x, lx).unwrap(),
            LevyMeasure::atom(y, ly).unwrap(),
        )
        .unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn moment_verdict_is_monotone(
            b in -2.0f64..3.0,
            x in -2.0f64..2.0,
            lx in 0.1f64..2.0,
            y in 0.5f64..4.0,
            ly in 0.1f64..2.0,
            p in 0.1f64..6.0,
        ) {
            prop_assume!(x != 0.0);
            let t = atomic_triplet(b, x, lx, y, ly);
            let hi = check_moment_finiteness(&t, p).unwrap();
            let lo = check_moment_finiteness(&t, p / 2.0).unwrap();
            if hi.holds() {
                prop_assert!(lo.holds());
            }
        }

        #[test]
        fn doubling_the_horizon_changes_little(
            m in 0.05f64..0.9,
            q in -3.0f64..3.0,
        ) {
            let src = DeterministicPairs { m, q };
            let seed = SeedRecord::new(0, 0);
            let a = iterate_affine(&src, IterationRule::Fixed(200), seed).unwrap().value;
            let b = iterate_affine(&src, IterationRule::Fixed(400), seed).unwrap().value;
            prop_assert!((a - b).abs() <= 1e-6);
            prop_assert!((b - q / (1.0 - m)).abs() <= 1e-9 * (1.0 + b.abs()));
        }
    }
}
