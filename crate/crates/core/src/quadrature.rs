//! Adaptive Gauss–Kronrod quadrature with dyadic shell summation toward
//! singular endpoints (`0` and `∞`).
//!
//! A region `(a, b)` with `0 ≤ a < b ≤ ∞` is cut into a finite core and
//! dyadic shells `[2^-k-1 c, 2^-k c]` toward `0` or `[2^k d, 2^k+1 d]` toward
//! `∞`. Shell contributions are summed until they shrink geometrically below
//! the tolerance (the remaining tail is extrapolated from the observed ratio),
//! stop shrinking (divergence), or the budget runs out (indeterminate).

use std::collections::BinaryHeap;
use std::cmp::Ordering;

/// Knobs for every integral evaluated by the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub max_evals: usize,
    /// Partial sums beyond this magnitude are declared divergent.
    pub divergence_cap: f64,
    pub max_shells: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            abs_tol: 1e-10,
            max_evals: 1_000_000,
            divergence_cap: 1e12,
            max_shells: 4000,
        }
    }
}

/// How an integral value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    ExactAtomic,
    Quadrature,
    DivergenceDetected,
    /// Budget exhausted without a decision; `bounds` carries partial sums.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    /// Finite value, `±∞` when divergent, NaN when indeterminate.
    pub value: f64,
    pub abs_error_bound: f64,
    pub method: Method,
    /// Partial-sum bracket reported for indeterminate results.
    pub bounds: Option<(f64, f64)>,
}

impl IntegralResult {
    pub fn exact(value: f64) -> Self {
        IntegralResult {
            value,
            abs_error_bound: 0.0,
            method: Method::ExactAtomic,
            bounds: None,
        }
    }

    pub fn quadrature(value: f64, err: f64) -> Self {
        IntegralResult {
            value,
            abs_error_bound: err,
            method: Method::Quadrature,
            bounds: None,
        }
    }

    pub fn divergent(sign: f64) -> Self {
        IntegralResult {
            value: if sign < 0.0 { f64::NEG_INFINITY } else { f64::INFINITY },
            abs_error_bound: f64::INFINITY,
            method: Method::DivergenceDetected,
            bounds: None,
        }
    }

    pub fn indeterminate(lo: f64, hi: f64) -> Self {
        IntegralResult {
            value: f64::NAN,
            abs_error_bound: f64::INFINITY,
            method: Method::Indeterminate,
            bounds: Some((lo.min(hi), lo.max(hi))),
        }
    }

    pub fn is_finite(&self) -> bool {
        matches!(self.method, Method::ExactAtomic | Method::Quadrature)
    }

    pub fn is_divergent(&self) -> bool {
        self.method == Method::DivergenceDetected
    }

    pub fn computed(&self) -> crate::report::Computed {
        use crate::report::Computed;
        match self.method {
            Method::ExactAtomic | Method::Quadrature => Computed::Finite(self.value),
            Method::DivergenceDetected if self.value > 0.0 => Computed::Infinite,
            _ => Computed::Unknown,
        }
    }

    /// Sum of two integrals over disjoint pieces.
    pub fn combine(self, other: IntegralResult) -> IntegralResult {
        use Method::*;
        match (self.method, other.method) {
            (DivergenceDetected, DivergenceDetected) => {
                if self.value.signum() == other.value.signum() {
                    self
                } else {
                    IntegralResult::indeterminate(f64::NEG_INFINITY, f64::INFINITY)
                }
            }
            (DivergenceDetected, _) => self,
            (_, DivergenceDetected) => other,
            (Indeterminate, _) | (_, Indeterminate) => {
                let (a0, a1) = self.bracket();
                let (b0, b1) = other.bracket();
                IntegralResult::indeterminate(a0 + b0, a1 + b1)
            }
            (ExactAtomic, ExactAtomic) => IntegralResult::exact(self.value + other.value),
            _ => IntegralResult::quadrature(
                self.value + other.value,
                self.abs_error_bound + other.abs_error_bound,
            ),
        }
    }

    /// Scale by a finite constant.
    pub fn scale(self, c: f64) -> IntegralResult {
        let mut out = self;
        match self.method {
            Method::Indeterminate => {
                let (lo, hi) = self.bracket();
                return IntegralResult::indeterminate(lo * c, hi * c);
            }
            Method::DivergenceDetected => {
                if c == 0.0 {
                    return IntegralResult::exact(0.0);
                }
                out.value = self.value * c.signum();
            }
            _ => {
                out.value = self.value * c;
                out.abs_error_bound = self.abs_error_bound * c.abs();
            }
        }
        out
    }

    fn bracket(&self) -> (f64, f64) {
        match self.method {
            Method::Indeterminate => self.bounds.unwrap_or((f64::NEG_INFINITY, f64::INFINITY)),
            _ => (self.value - self.abs_error_bound, self.value + self.abs_error_bound),
        }
    }
}

// 15-point Kronrod nodes on [-1, 1] (non-negative half) and weights; the
// odd-indexed nodes are the 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Outcome of a finite-interval adaptive integration.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Adaptive {
    pub value: f64,
    pub err: f64,
    pub converged: bool,
}

/// Globally adaptive G7K15 on a finite interval. `evals` is a shared budget counter.
pub(crate) fn adaptive<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    evals: &mut usize,
    max_evals: usize,
) -> Adaptive {
    if a == b {
        return Adaptive { value: 0.0, err: 0.0, converged: true };
    }
    let (v, e) = gk15(f, a, b);
    *evals += 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, err: e });
    let mut total = v;
    let mut total_err = e;
    loop {
        if !total.is_finite() {
            return Adaptive { value: total, err: f64::INFINITY, converged: false };
        }
        let target = tol.max(1e-13 * total.abs());
        if total_err <= target {
            return Adaptive { value: total, err: total_err, converged: true };
        }
        if *evals + 30 > max_evals {
            return Adaptive { value: total, err: total_err, converged: false };
        }
        let seg = heap.pop().expect("heap never empties");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            // Interval collapsed to machine precision; accept what we have.
            heap.push(seg);
            return Adaptive { value: total, err: total_err, converged: total_err.is_finite() };
        }
        let (v1, e1) = gk15(f, seg.a, mid);
        let (v2, e2) = gk15(f, mid, seg.b);
        *evals += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment { a: seg.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, err: e2 });
        // Re-sum occasionally to limit drift from incremental updates.
        if heap.len() % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.err).sum();
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    TowardZero,
    TowardInfinity,
}

/// Sum dyadic shells starting at `anchor`, walking toward `0` (stopping at
/// `limit > 0` if given) or toward `∞` (stopping at finite `limit`).
fn shells<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    anchor: f64,
    dir: Direction,
    tol: f64,
    cfg: &QuadConfig,
    evals: &mut usize,
) -> IntegralResult {
    let shell_tol = tol * 1e-3;
    let mut partial = 0.0;
    let mut err = 0.0;
    let mut prev_abs: Option<f64> = None;
    let mut ratios: Vec<f64> = Vec::new();
    // Shell magnitudes since the last zero shell, for the power-law checks.
    let mut run: Vec<f64> = Vec::new();
    let mut zero_run = 0usize;
    let mut inner = anchor;
    for _ in 0..cfg.max_shells {
        let (a, b) = match dir {
            Direction::TowardZero => (inner * 0.5, inner),
            Direction::TowardInfinity => (inner, inner * 2.0),
        };
        if !(b > a) || a < 1e-290 || b > 1e290 {
            // Ran out of comfortably representable shells.
            break;
        }
        let r = adaptive(f, a, b, shell_tol, evals, cfg.max_evals);
        if r.value.is_nan() {
            return IntegralResult::indeterminate(f64::NEG_INFINITY, f64::INFINITY);
        }
        partial += r.value;
        err += r.err;
        if !partial.is_finite() || partial.abs() > cfg.divergence_cap {
            return IntegralResult::divergent(partial.signum());
        }
        inner = match dir {
            Direction::TowardZero => a,
            Direction::TowardInfinity => b,
        };
        let s = r.value.abs();
        if s == 0.0 || s < 1e-300 {
            zero_run += 1;
            if zero_run >= 3 {
                return IntegralResult::quadrature(partial, err);
            }
            prev_abs = None;
            ratios.clear();
            run.clear();
            continue;
        }
        zero_run = 0;
        if let Some(p) = prev_abs {
            ratios.push(s / p);
        }
        prev_abs = Some(s);
        run.push(s);
        let n = ratios.len();
        if n >= 8 && ratios[n - 8..].iter().all(|&q| q >= 1.0 - 1e-9) {
            return IntegralResult::divergent(partial.signum());
        }
        if let Some(beta) = power_decay(&run) {
            if beta <= 1.0 {
                // Shells shrink no faster than 1/k: harmonic or slower.
                return IntegralResult::divergent(partial.signum());
            }
        }
        if n >= 4 {
            let last = &ratios[n - 4..];
            let rmax = last.iter().cloned().fold(f64::MIN, f64::max);
            let rmin = last.iter().cloned().fold(f64::MAX, f64::min);
            if rmax < 1.0 - 1e-6 {
                let tail = s * rmax / (1.0 - rmax);
                let est = s * ratios[n - 1] / (1.0 - ratios[n - 1]);
                let tail_err =
                    tail * ((rmax - rmin) / (1.0 - rmax)).max(1e-6) + (tail - est).abs() + s * 1e-12;
                if tail_err <= 0.25 * tol {
                    let signed = est * r.value.signum();
                    return IntegralResult::quadrature(partial + signed, err + tail_err);
                }
            }
        }
        if *evals >= cfg.max_evals {
            break;
        }
    }
    // Sub-geometric decay s_k ≍ k^{-β} with β > 1: extrapolate the power tail
    // Σ_{j>n} s_n (n/j)^β ≈ s_n n/(β−1), with the tail itself as error.
    if let (Some(beta), Some(&last)) = (power_decay(&run), run.last()) {
        if beta > 1.05 {
            let n = run.len() as f64;
            let tail = last * n / (beta - 1.0);
            let signed = tail * partial.signum();
            return IntegralResult::quadrature(partial + signed, err + tail);
        }
    }
    let extra = prev_abs.unwrap_or(0.0) * cfg.max_shells as f64;
    IntegralResult::indeterminate(partial, partial + extra * partial.signum())
}

/// Exponent `β` when the shell magnitudes look like `C k^{-β}` over the last
/// three quarters of a long run (two estimates agreeing within 0.05).
fn power_decay(run: &[f64]) -> Option<f64> {
    let n = run.len();
    if n < 64 {
        return None;
    }
    let slope = |k1: usize, k2: usize| (run[k1 - 1] / run[k2 - 1]).ln() / (k2 as f64 / k1 as f64).ln();
    let late = slope(n / 2, n);
    let early = slope(n / 4, n / 2);
    // Geometric decay gives huge, growing slopes; only a stable exponent counts.
    ((late - early).abs() < 0.05 && late.is_finite() && late < 50.0).then_some(late)
}

/// Integrate `f` over `(a, b)` with `0 ≤ a < b ≤ ∞`, handling a possible
/// singularity at `0` and an infinite upper limit by shell summation.
pub(crate) fn integrate_positive<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    cfg: &QuadConfig,
    evals: &mut usize,
) -> IntegralResult {
    debug_assert!(a >= 0.0 && b > a);
    let mut parts: Vec<IntegralResult> = Vec::with_capacity(3);
    let sub_tol = tol / 3.0;
    // Core: finite, away from 0.
    let core_lo = if a > 0.0 { a } else { b.min(1.0) };
    let core_hi = if b.is_finite() { b } else { core_lo.max(1.0) * 2.0 };
    if a == 0.0 {
        parts.push(shells(f, core_lo, Direction::TowardZero, sub_tol, cfg, evals));
    }
    if core_hi > core_lo {
        let r = adaptive(f, core_lo, core_hi, sub_tol, evals, cfg.max_evals);
        parts.push(if r.value.is_nan() {
            IntegralResult::indeterminate(f64::NEG_INFINITY, f64::INFINITY)
        } else if !r.value.is_finite() || r.value.abs() > cfg.divergence_cap {
            IntegralResult::divergent(r.value.signum())
        } else if r.converged {
            IntegralResult::quadrature(r.value, r.err)
        } else {
            IntegralResult::indeterminate(r.value - r.err, r.value + r.err)
        });
    }
    if b.is_infinite() {
        parts.push(shells(f, core_hi, Direction::TowardInfinity, sub_tol, cfg, evals));
    }
    parts
        .into_iter()
        .reduce(IntegralResult::combine)
        .unwrap_or(IntegralResult::quadrature(0.0, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> IntegralResult {
        let cfg = QuadConfig::default();
        let mut evals = 0;
        integrate_positive(f, a, b, cfg.abs_tol, &cfg, &mut evals)
    }

    #[test]
    fn polynomial_is_exact() {
        let r = run(&|x| 3.0 * x * x, 0.5, 2.0);
        assert!((r.value - (8.0 - 0.125)).abs() < 1e-13);
    }

    #[test]
    fn inverse_sqrt_singularity() {
        let r = run(&|x: f64| x.powf(-0.5), 0.0, 1.0);
        assert_eq!(r.method, Method::Quadrature);
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn log_divergence_at_zero() {
        let r = run(&|x: f64| 1.0 / x, 0.0, 1.0);
        assert!(r.is_divergent());
        assert_eq!(r.value, f64::INFINITY);
    }

    #[test]
    fn log_log_divergence_at_infinity() {
        // ∫_e^∞ dy / (y log y) = ∞ although the integrand underflows before the range ends.
        let r = run(&|y: f64| 1.0 / (y * y.ln()), std::f64::consts::E, f64::INFINITY);
        assert!(r.is_divergent(), "{r:?}");
    }

    #[test]
    fn log_squared_tail_converges() {
        let r = run(&|y: f64| 1.0 / (y * y.ln().powi(2)), std::f64::consts::E, f64::INFINITY);
        assert_eq!(r.method, Method::Quadrature);
        assert!((r.value - 1.0).abs() <= r.abs_error_bound.max(1e-12), "{r:?}");
        assert!(r.abs_error_bound < 1e-2);
    }

    #[test]
    fn power_divergence_at_infinity() {
        let r = run(&|x: f64| x.powf(-0.5), 1.0, f64::INFINITY);
        assert!(r.is_divergent());
    }

    #[test]
    fn gamma_two() {
        let r = run(&|x: f64| x * (-x).exp(), 0.0, f64::INFINITY);
        assert!((r.value - 1.0).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn slow_power_tail_extrapolates() {
        // ∫_1^∞ x^{-1.05} dx = 20
        let r = run(&|x: f64| x.powf(-1.05), 1.0, f64::INFINITY);
        assert!(r.is_finite(), "{r:?}");
        assert!((r.value - 20.0).abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn combine_rules() {
        let a = IntegralResult::exact(1.0);
        let b = IntegralResult::quadrature(2.0, 1e-12);
        assert_eq!(a.combine(b).method, Method::Quadrature);
        assert_eq!(a.combine(IntegralResult::exact(2.0)), IntegralResult::exact(3.0));
        assert!(a.combine(IntegralResult::divergent(1.0)).is_divergent());
        let mixed = IntegralResult::divergent(1.0).combine(IntegralResult::divergent(-1.0));
        assert_eq!(mixed.method, Method::Indeterminate);
    }
}
