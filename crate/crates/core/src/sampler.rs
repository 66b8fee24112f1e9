//! Paths of the bivariate Lévy process `(X, Z)` on a finite horizon.
//!
//! Jumps of size `|x| > eps` (resp. `|y| > eps_z`) are drawn as a marked
//! Poisson process; the compensator of the removed small `X`-jumps is folded
//! into the drift. Atoms are never truncated. The Brownian part is sampled
//! exactly at every grid point and jump time.

use std::io::{self, Write};

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::exponents::LevyTriplet;
use crate::io::fmt_f64;
use crate::measures::{DensityLaw, DensityPiece, Domain, LevyMeasure};
use crate::quadrature::{adaptive, integrate_positive, QuadConfig};
use crate::rng::SeedRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Cutoff for small `X`-jumps taken from densities.
    pub eps: f64,
    /// Cutoff for small `Z`-jumps taken from densities.
    pub eps_z: f64,
    /// Brownian grid resolution for [`PathSampler::sample_path`].
    pub grid_steps_per_unit: usize,
    pub quad: QuadConfig,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            eps: 1e-3,
            eps_z: 1e-3,
            grid_steps_per_unit: 1024,
            quad: QuadConfig::default(),
        }
    }
}

impl SamplerConfig {
    pub fn with_eps(eps: f64) -> Self {
        SamplerConfig {
            eps,
            eps_z: eps,
            ..SamplerConfig::default()
        }
    }
}

/// A jump `(τ_k, i_k, j_k)` of `(X, Z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub dx: f64,
    pub dz: f64,
}

/// A sampled trajectory: values at the grid and at every jump time, with the
/// left limit `X_{t-}` kept at jump times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSkeleton {
    pub horizon: f64,
    pub times: Vec<f64>,
    /// `X_t` (after any jump at `t`).
    pub x: Vec<f64>,
    /// `X_{t-}`; equals `x` away from jumps.
    pub x_left: Vec<f64>,
    pub z: Vec<f64>,
    pub is_jump: Vec<bool>,
    pub jumps: Vec<JumpRecord>,
    pub truncation_eps: f64,
    pub truncation_eps_z: f64,
    /// `∫_{|y| ≤ eps_z} |y| Λ₂(dy)`: expected discarded `Z` mass per unit time.
    pub z_bias_bound: f64,
    pub seed: SeedRecord,
}

impl PathSkeleton {
    /// Checks ordering of jump times and `X_τ − X_{τ−} = i_k` at each jump.
    pub fn check_consistency(&self) -> Result<()> {
        let mut last = 0.0;
        for w in self.times.windows(2) {
            if !(w[1] >= w[0]) {
                return Err(Error::Numeric(format!("times not ordered: {} then {}", w[0], w[1])));
            }
        }
        let mut k = 0;
        for (idx, &jump) in self.is_jump.iter().enumerate() {
            if !jump {
                continue;
            }
            let rec = self.jumps.get(k).ok_or_else(|| Error::Numeric("jump list too short".into()))?;
            if rec.time != self.times[idx] || rec.time <= last && k > 0 || rec.time > self.horizon {
                return Err(Error::Numeric(format!("jump {k} time {} inconsistent", rec.time)));
            }
            let dx = self.x[idx] - self.x_left[idx];
            if (dx - rec.dx).abs() > 1e-9 * (1.0 + rec.dx.abs()) {
                return Err(Error::Numeric(format!("jump {k}: X jumped {dx}, recorded {}", rec.dx)));
            }
            last = rec.time;
            k += 1;
        }
        if k != self.jumps.len() {
            return Err(Error::Numeric("unflagged jumps in record".into()));
        }
        Ok(())
    }

    /// CSV with columns `time,X,Z,is_jump,i_k,j_k`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,X,Z,is_jump,i_k,j_k")?;
        let mut k = 0;
        for idx in 0..self.times.len() {
            let (flag, dx, dz) = if self.is_jump[idx] {
                let rec = self.jumps[k];
                k += 1;
                (1, rec.dx, rec.dz)
            } else {
                (0, 0.0, 0.0)
            };
            writeln!(
                w,
                "{},{},{},{},{},{}",
                fmt_f64(self.times[idx]),
                fmt_f64(self.x[idx]),
                fmt_f64(self.z[idx]),
                flag,
                fmt_f64(dx),
                fmt_f64(dz)
            )?;
        }
        Ok(())
    }
}

/// `(M★, Q★) = (e^{-X_1}, ∫_{[0,1]} e^{-X_{s-}} dZ_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingPair {
    pub m_star: f64,
    pub q_star: f64,
}

impl EmbeddingPair {
    /// Reads the pair off a horizon-1 skeleton; `Z` moves only by jumps so the
    /// discounted sum is exact given the skeleton.
    pub fn from_skeleton(path: &PathSkeleton) -> Result<Self> {
        if path.horizon != 1.0 {
            return Err(Error::arg("path", format!("horizon must be 1, got {}", path.horizon)));
        }
        let mut q = 0.0;
        for (idx, &jump) in path.is_jump.iter().enumerate() {
            if jump {
                let dz = path.z[idx] - if idx > 0 { path.z[idx - 1] } else { 0.0 };
                q += (-path.x_left[idx]).exp() * dz;
            }
        }
        let x1 = *path.x.last().ok_or_else(|| Error::Numeric("empty path".into()))?;
        Ok(EmbeddingPair {
            m_star: (-x1).exp(),
            q_star: q,
        })
    }
}

/// Inverse-CDF sampler for one density piece restricted to `(a, b) ⊂ (0, ∞)`
/// (mirrored when the piece sits on the negative half-line).
#[derive(Debug, Clone)]
struct DensitySampler {
    piece: DensityPiece,
    sign: f64,
    /// Sub-intervals of `(a, b)` with cumulative masses.
    cells: Vec<(f64, f64)>,
    cum: Vec<f64>,
}

impl DensitySampler {
    fn new(piece: &DensityPiece, cutoff: f64, cfg: &QuadConfig) -> Result<Option<(f64, Self)>> {
        let (sign, lo, hi) = if piece.lo >= 0.0 {
            (1.0, piece.lo, piece.hi)
        } else {
            (-1.0, -piece.hi, -piece.lo)
        };
        let a = lo.max(cutoff);
        let b = hi;
        if a >= b {
            return Ok(None);
        }
        let dens = |u: f64| piece.law.eval(sign * u);
        let mut evals = 0;
        if a == 0.0 {
            let total = integrate_positive(&dens, a, b, cfg.abs_tol, cfg, &mut evals);
            if !total.is_finite() {
                return Err(Error::InfiniteActivity(
                    "density has infinite mass near 0; choose a truncation eps > 0".into(),
                ));
            }
        }
        // Geometric cells: finite part split into 32, then doubling toward ∞.
        let mut edges = Vec::new();
        let finite_hi = if b.is_finite() { b } else { a.max(1.0) * 2.0 };
        let ratio = if a > 0.0 { (finite_hi / a).powf(1.0 / 32.0) } else { 1.0 };
        if a > 0.0 && ratio > 1.0 + 1e-9 {
            let mut e = a;
            edges.push(e);
            for _ in 0..32 {
                e *= ratio;
                edges.push(e);
            }
            *edges.last_mut().unwrap() = finite_hi;
        } else {
            edges = (0..=32).map(|i| a + (finite_hi - a) * i as f64 / 32.0).collect();
        }
        let mut cells = Vec::new();
        let mut cum = Vec::new();
        let mut total = 0.0;
        for w in edges.windows(2) {
            let r = adaptive(&dens, w[0], w[1], cfg.abs_tol * 1e-3, &mut evals, cfg.max_evals);
            total += r.value;
            cells.push((w[0], w[1]));
            cum.push(total);
        }
        if !b.is_finite() {
            let mut e = finite_hi;
            let mut shell_count = 0;
            loop {
                let r = adaptive(&dens, e, 2.0 * e, cfg.abs_tol * 1e-3, &mut evals, cfg.max_evals);
                total += r.value;
                cells.push((e, 2.0 * e));
                cum.push(total);
                e *= 2.0;
                shell_count += 1;
                if !total.is_finite() || total > cfg.divergence_cap || shell_count > 2000 {
                    return Err(Error::InfiniteActivity(
                        "density tail mass does not converge".into(),
                    ));
                }
                if r.value <= 1e-15 * total && shell_count > 4 {
                    break;
                }
            }
        }
        if !(total.is_finite() && total > 0.0) {
            return Ok(None);
        }
        Ok(Some((
            total,
            DensitySampler {
                piece: piece.clone(),
                sign,
                cells,
                cum,
            },
        )))
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cum.last().unwrap();
        let u: f64 = rng.random::<f64>() * total;
        let idx = self.cum.partition_point(|&c| c < u).min(self.cells.len() - 1);
        let (lo, hi) = self.cells[idx];
        let closed = match self.piece.law {
            DensityLaw::Power { alpha, .. } => Some(power_in_cell(alpha, lo, hi, rng.random())),
            DensityLaw::Exponential { rate, .. } => Some(exponential_in_cell(rate, lo, hi, rng.random())),
            // Power proposal, accepted with probability e^{−λ(v − lo)}.
            DensityLaw::TruncatedStable { alpha, lambda, .. } if lambda >= 0.0 => (0..1000).find_map(|_| {
                let v = power_in_cell(1.0 + alpha, lo, hi, rng.random());
                let keep: f64 = rng.random();
                (keep < (-lambda * (v - lo)).exp()).then_some(v)
            }),
            _ => None,
        };
        if let Some(v) = closed {
            return self.sign * v.clamp(lo, hi);
        }
        let before = if idx == 0 { 0.0 } else { self.cum[idx - 1] };
        let target = (u - before).max(0.0);
        self.sign * self.invert(idx, target, total)
    }

    /// Solves `∫_{lo}^{x} f = target` inside cell `idx`.
    fn invert(&self, idx: usize, target: f64, total: f64) -> f64 {
        let (mut lo, mut hi) = self.cells[idx];
        let dens = |v: f64| self.piece.law.eval(self.sign * v);
        let origin = lo;
        let mass_to = |x: f64| {
            let mut evals = 0;
            adaptive(&dens, origin, x, 1e-14, &mut evals, 100_000).value
        };
        // Safeguarded Newton on F(x) = target within the cell.
        let mut x = 0.5 * (lo + hi);
        for _ in 0..60 {
            let f = mass_to(x) - target;
            if f.abs() <= 1e-13 * total.max(1.0) {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = dens(x);
            let newton = x - f / d;
            x = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo <= 1e-15 * hi.abs() {
                break;
            }
        }
        x
    }
}

/// Inverse CDF of `v^{−alpha}` restricted to `[lo, hi]`.
fn power_in_cell(alpha: f64, lo: f64, hi: f64, u: f64) -> f64 {
    if (alpha - 1.0).abs() < 1e-12 {
        lo * (hi / lo).powf(u)
    } else {
        let k = 1.0 - alpha;
        let (a, b) = (lo.powf(k), hi.powf(k));
        (a + u * (b - a)).powf(1.0 / k)
    }
}

/// Inverse CDF of `e^{−rate v}` restricted to `[lo, hi]`.
fn exponential_in_cell(rate: f64, lo: f64, hi: f64, u: f64) -> f64 {
    if (rate * (hi - lo)).abs() < 1e-12 {
        lo + u * (hi - lo)
    } else {
        lo - (u * (-rate * (hi - lo)).exp_m1()).ln_1p() / rate
    }
}

#[derive(Debug, Clone)]
enum Mark {
    Fixed { dx: f64, dz: f64 },
    XDensity(DensitySampler),
    ZDensity(DensitySampler),
}

/// A triplet prepared for repeated sampling: truncated jump table, adjusted
/// drift and the small-jump bias bound.
#[derive(Debug, Clone)]
pub struct PathSampler {
    v: f64,
    drift: f64,
    rate: f64,
    marks: Vec<Mark>,
    cum: Vec<f64>,
    cfg: SamplerConfig,
    z_bias_bound: f64,
}

impl PathSampler {
    pub fn new(t: &LevyTriplet, cfg: &SamplerConfig) -> Result<Self> {
        if !(cfg.eps >= 0.0 && cfg.eps <= 1.0) || !(cfg.eps_z >= 0.0 && cfg.eps_z <= 1.0) {
            return Err(Error::arg("eps", format!("must lie in [0, 1], got ({}, {})", cfg.eps, cfg.eps_z)));
        }
        let mut marks = Vec::new();
        let mut masses = Vec::new();
        let mut compensator = 0.0;
        match t.coupling() {
            Some(atoms) => {
                for a in atoms {
                    marks.push(Mark::Fixed { dx: a.x, dz: a.y });
                    masses.push(a.mass);
                    if a.x.abs() <= 1.0 {
                        compensator += a.x * a.mass;
                    }
                }
            }
            None => {
                for a in t.lambda1().atoms() {
                    marks.push(Mark::Fixed { dx: a.location, dz: 0.0 });
                    masses.push(a.mass);
                    if a.location.abs() <= 1.0 {
                        compensator += a.location * a.mass;
                    }
                }
                for d in t.lambda1().densities() {
                    if let Some((mass, s)) = DensitySampler::new(d, cfg.eps, &cfg.quad)? {
                        marks.push(Mark::XDensity(s));
                        masses.push(mass);
                    }
                }
                if !t.lambda1().densities().is_empty() {
                    let dens_only = LevyMeasure::new(Vec::new(), t.lambda1().densities().to_vec())?;
                    let mut kept = dens_only
                        .integrate_with(&|x| x, Domain::left_open(cfg.eps, 1.0), &cfg.quad)
                        .combine(dens_only.integrate_with(
                            &|x| x,
                            Domain {
                                lo: std::ops::Bound::Included(-1.0),
                                hi: std::ops::Bound::Excluded(-cfg.eps),
                            },
                            &cfg.quad,
                        ));
                    if cfg.eps == 0.0 {
                        kept = dens_only.integrate_with(&|x| x, Domain::closed(-1.0, 1.0), &cfg.quad);
                    }
                    if !kept.is_finite() {
                        return Err(Error::InfiniteActivity(
                            "small-jump compensator of Λ₁ is not finite at this eps".into(),
                        ));
                    }
                    compensator += kept.value;
                }
                for a in t.lambda2().atoms() {
                    marks.push(Mark::Fixed { dx: 0.0, dz: a.location });
                    masses.push(a.mass);
                }
                for d in t.lambda2().densities() {
                    if let Some((mass, s)) = DensitySampler::new(d, cfg.eps_z, &cfg.quad)? {
                        marks.push(Mark::ZDensity(s));
                        masses.push(mass);
                    }
                }
            }
        }
        let z_bias_bound = if t.lambda2().densities().is_empty() || cfg.eps_z == 0.0 {
            0.0
        } else {
            let dens_only = LevyMeasure::new(Vec::new(), t.lambda2().densities().to_vec())?;
            dens_only
                .integrate_with(&|y| y.abs(), Domain::closed(-cfg.eps_z, cfg.eps_z), &cfg.quad)
                .value
        };
        let mut cum = Vec::with_capacity(masses.len());
        let mut rate = 0.0;
        for m in masses {
            rate += m;
            cum.push(rate);
        }
        if !rate.is_finite() {
            return Err(Error::InfiniteActivity("total jump rate is infinite".into()));
        }
        Ok(PathSampler {
            v: t.v2().sqrt(),
            drift: t.b() - compensator,
            rate,
            marks,
            cum,
            cfg: *cfg,
            z_bias_bound,
        })
    }

    /// Total rate of the retained jumps.
    pub fn jump_rate(&self) -> f64 {
        self.rate
    }

    /// Drift between retained jumps.
    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn z_bias_bound(&self) -> f64 {
        self.z_bias_bound
    }

    fn draw_mark<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random::<f64>() * self.rate;
        let idx = self.cum.partition_point(|&c| c <= u).min(self.marks.len() - 1);
        match &self.marks[idx] {
            Mark::Fixed { dx, dz } => (*dx, *dz),
            Mark::XDensity(s) => (s.sample(rng), 0.0),
            Mark::ZDensity(s) => (0.0, s.sample(rng)),
        }
    }

    #[inline]
    fn advance<R: Rng + ?Sized>(&self, x: &mut f64, dt: f64, rng: &mut R) {
        if dt <= 0.0 {
            return;
        }
        *x += self.drift * dt;
        if self.v > 0.0 {
            let n: f64 = rng.sample(StandardNormal);
            *x += self.v * dt.sqrt() * n;
        }
    }

    /// Core walk over `[0, horizon]`; `grid` is the number of equal Brownian
    /// steps (0 for jump times only).
    fn walk<R: Rng + ?Sized, V: PathVisitor>(&self, horizon: f64, grid: usize, rng: &mut R, v: &mut V) {
        let mut t = 0.0;
        let mut x = 0.0;
        let mut z = 0.0;
        let exp_gap = |rng: &mut R| -> f64 {
            if self.rate > 0.0 {
                let e: f64 = rng.sample(Exp1);
                e / self.rate
            } else {
                f64::INFINITY
            }
        };
        let mut next_jump = exp_gap(rng);
        let grid_dt = if grid > 0 { horizon / grid as f64 } else { f64::INFINITY };
        let mut k = 1usize;
        loop {
            let next_grid = if k < grid { k as f64 * grid_dt } else { f64::INFINITY };
            if next_jump <= horizon && next_jump <= next_grid {
                self.advance(&mut x, next_jump - t, rng);
                t = next_jump;
                let (dx, dz) = self.draw_mark(rng);
                v.jump(t, x, dx, dz, z);
                x += dx;
                z += dz;
                next_jump = t + exp_gap(rng);
            } else if next_grid < horizon {
                self.advance(&mut x, next_grid - t, rng);
                t = next_grid;
                v.grid(t, x, z);
                k += 1;
            } else {
                self.advance(&mut x, horizon - t, rng);
                v.end(horizon, x, z);
                return;
            }
        }
    }

    /// Full skeleton on `[0, horizon]` with the configured Brownian grid.
    pub fn sample_path<R: Rng + ?Sized>(&self, horizon: f64, seed: SeedRecord, rng: &mut R) -> Result<PathSkeleton> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::arg("horizon", format!("must be finite and > 0, got {horizon}")));
        }
        let grid = (horizon * self.cfg.grid_steps_per_unit as f64).ceil() as usize;
        self.skeleton(horizon, grid, seed, rng)
    }

    fn skeleton<R: Rng + ?Sized>(&self, horizon: f64, grid: usize, seed: SeedRecord, rng: &mut R) -> Result<PathSkeleton> {
        let mut rec = SkeletonRecorder::default();
        rec.push(0.0, 0.0, 0.0, 0.0, false);
        self.walk(horizon, grid, rng, &mut rec);
        Ok(PathSkeleton {
            horizon,
            times: rec.times,
            x: rec.x,
            x_left: rec.x_left,
            z: rec.z,
            is_jump: rec.is_jump,
            jumps: rec.jumps,
            truncation_eps: self.cfg.eps,
            truncation_eps_z: self.cfg.eps_z,
            z_bias_bound: self.z_bias_bound,
            seed,
        })
    }

    /// Skeleton on `[0, 1]` sampled at jump times only. Consumes the random
    /// stream exactly like [`PathSampler::sample_mq`].
    pub fn sample_unit_skeleton<R: Rng + ?Sized>(&self, seed: SeedRecord, rng: &mut R) -> Result<PathSkeleton> {
        self.skeleton(1.0, 0, seed, rng)
    }

    /// `(e^{-X_1}, Σ_{τ_k ≤ 1} e^{-X_{τ_k-}} j_k)` without materialising the path.
    pub fn sample_mq<R: Rng + ?Sized>(&self, rng: &mut R) -> EmbeddingPair {
        let mut acc = PairAccumulator::default();
        self.walk(1.0, 0, rng, &mut acc);
        EmbeddingPair {
            m_star: (-acc.x1).exp(),
            q_star: acc.q,
        }
    }
}

trait PathVisitor {
    fn grid(&mut self, t: f64, x: f64, z: f64);
    /// `x_left` is `X_{t-}`, `z_left` is `Z_{t-}`.
    fn jump(&mut self, t: f64, x_left: f64, dx: f64, dz: f64, z_left: f64);
    fn end(&mut self, t: f64, x: f64, z: f64);
}

#[derive(Default)]
struct SkeletonRecorder {
    times: Vec<f64>,
    x: Vec<f64>,
    x_left: Vec<f64>,
    z: Vec<f64>,
    is_jump: Vec<bool>,
    jumps: Vec<JumpRecord>,
}

impl SkeletonRecorder {
    fn push(&mut self, t: f64, x_left: f64, x: f64, z: f64, jump: bool) {
        self.times.push(t);
        self.x_left.push(x_left);
        self.x.push(x);
        self.z.push(z);
        self.is_jump.push(jump);
    }
}

impl PathVisitor for SkeletonRecorder {
    fn grid(&mut self, t: f64, x: f64, z: f64) {
        self.push(t, x, x, z, false);
    }
    fn jump(&mut self, t: f64, x_left: f64, dx: f64, dz: f64, z_left: f64) {
        self.push(t, x_left, x_left + dx, z_left + dz, true);
        self.jumps.push(JumpRecord { time: t, dx, dz });
    }
    fn end(&mut self, t: f64, x: f64, z: f64) {
        self.push(t, x, x, z, false);
    }
}

#[derive(Default)]
struct PairAccumulator {
    q: f64,
    x1: f64,
}

impl PathVisitor for PairAccumulator {
    fn grid(&mut self, _: f64, _: f64, _: f64) {}
    fn jump(&mut self, _: f64, x_left: f64, _: f64, dz: f64, _: f64) {
        if dz != 0.0 {
            self.q += (-x_left).exp() * dz;
        }
    }
    fn end(&mut self, _: f64, x: f64, _: f64) {
        self.x1 = x;
    }
}

/// Samples a path of `t` on `[0, horizon]` from the stream `seed`.
pub fn sample_path(t: &LevyTriplet, horizon: f64, eps: f64, seed: SeedRecord) -> Result<PathSkeleton> {
    let sampler = PathSampler::new(t, &SamplerConfig::with_eps(eps))?;
    sampler.sample_path(horizon, seed, &mut seed.rng())
}

/// Samples `(M★, Q★)` from the stream `seed`.
pub fn sample_mq(t: &LevyTriplet, eps: f64, seed: SeedRecord) -> Result<EmbeddingPair> {
    let sampler = PathSampler::new(t, &SamplerConfig::with_eps(eps))?;
    Ok(sampler.sample_mq(&mut seed.rng()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::JointAtom;
    use std::sync::Arc;
    use crate::rng::stream_rng;

    fn seed(i: u64) -> SeedRecord {
        SeedRecord::new(11, i)
    }

    #[test]
    fn deterministic_drift() {
        let t = LevyTriplet::gaussian(0.0, 1.0).unwrap();
        let p = sample_path(&t, 1.0, 1e-3, seed(0)).unwrap();
        assert!(p.jumps.is_empty());
        for (ti, xi) in p.times.iter().zip(&p.x) {
            assert!((ti - xi).abs() < 1e-12);
        }
        assert_eq!(*p.times.last().unwrap(), 1.0);
        assert_eq!(p.times.len(), 1025);
    }

    #[test]
    fn skeleton_consistency_and_pair_equivalence() {
        let l1 = LevyMeasure::from_atoms([(0.5, 1.0), (-2.0, 0.5)]).unwrap();
        let l2 = LevyMeasure::from_atoms([(1.0, 1.0), (-3.0, 0.3)]).unwrap();
        let t = LevyTriplet::new(0.7, 0.2, l1, l2).unwrap();
        let s = PathSampler::new(&t, &SamplerConfig::default()).unwrap();
        for i in 0..200 {
            let p = s.sample_path(2.5, seed(i), &mut seed(i).rng()).unwrap();
            p.check_consistency().unwrap();
            let unit = s.sample_unit_skeleton(seed(i), &mut seed(i).rng()).unwrap();
            unit.check_consistency().unwrap();
            let pair = s.sample_mq(&mut seed(i).rng());
            let from = EmbeddingPair::from_skeleton(&unit).unwrap();
            assert!((pair.m_star - from.m_star).abs() < 1e-12 * pair.m_star.max(1.0));
            assert!((pair.q_star - from.q_star).abs() < 1e-12 * pair.q_star.abs().max(1.0));
        }
    }

    #[test]
    fn no_payments_without_lambda2() {
        let t = LevyTriplet::new(1.0, 0.5, LevyMeasure::atom(1.0, 2.0).unwrap(), LevyMeasure::zero()).unwrap();
        let s = PathSampler::new(&t, &SamplerConfig::default()).unwrap();
        for i in 0..50 {
            let pair = s.sample_mq(&mut seed(i).rng());
            assert_eq!(pair.q_star, 0.0);
            assert!(pair.m_star > 0.0);
        }
    }

    #[test]
    fn hand_evaluated_pairs() {
        // One Z-jump at 0.4 with X ≡ 0.
        let path = PathSkeleton {
            horizon: 1.0,
            times: vec![0.0, 0.4, 1.0],
            x: vec![0.0; 3],
            x_left: vec![0.0; 3],
            z: vec![0.0, 1.0, 1.0],
            is_jump: vec![false, true, false],
            jumps: vec![JumpRecord { time: 0.4, dx: 0.0, dz: 1.0 }],
            truncation_eps: 1e-3,
            truncation_eps_z: 1e-3,
            z_bias_bound: 0.0,
            seed: seed(0),
        };
        path.check_consistency().unwrap();
        assert_eq!(EmbeddingPair::from_skeleton(&path).unwrap(), EmbeddingPair { m_star: 1.0, q_star: 1.0 });

        // X_t = t, single Z-jump at 0.5.
        let path = PathSkeleton {
            times: vec![0.0, 0.5, 1.0],
            x: vec![0.0, 0.5, 1.0],
            x_left: vec![0.0, 0.5, 1.0],
            jumps: vec![JumpRecord { time: 0.5, dx: 0.0, dz: 1.0 }],
            ..path
        };
        let pair = EmbeddingPair::from_skeleton(&path).unwrap();
        assert!((pair.m_star - (-1.0f64).exp()).abs() < 1e-15);
        assert!((pair.q_star - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn infinite_activity_needs_eps() {
        let l1 = LevyMeasure::density(DensityPiece::new(0.0, 1.0, DensityLaw::Power { c: 1.0, alpha: 2.5 })).unwrap();
        let t = LevyTriplet::new(0.0, 0.0, l1, LevyMeasure::zero()).unwrap();
        let cfg = SamplerConfig { eps: 0.0, ..SamplerConfig::default() };
        assert!(matches!(PathSampler::new(&t, &cfg), Err(Error::InfiniteActivity(_))));
        let s = PathSampler::new(&t, &SamplerConfig::with_eps(0.05)).unwrap();
        // mass of (0.05, 1] under x^{-5/2} = (2/3)(0.05^{-3/2} − 1)
        let expected = (2.0 / 3.0) * (0.05f64.powf(-1.5) - 1.0);
        assert!((s.jump_rate() - expected).abs() < 1e-8);
        // drift absorbs ∫_{(0.05,1]} x · x^{-5/2} dx = 2(0.05^{-1/2} − 1)
        assert!((s.drift() + 2.0 * (0.05f64.powf(-0.5) - 1.0)).abs() < 1e-8);
    }

    #[test]
    fn density_marks_follow_the_law() {
        // Exponential(1) jumps on (0, ∞) with unit rate; mean jump size 1.
        let l2 = LevyMeasure::density(DensityPiece::new(
            0.0,
            f64::INFINITY,
            DensityLaw::Exponential { c: 1.0, rate: 1.0 },
        ))
        .unwrap();
        let t = LevyTriplet::new(0.0, 0.0, LevyMeasure::zero(), l2).unwrap();
        let s = PathSampler::new(&t, &SamplerConfig { eps_z: 0.0, ..SamplerConfig::default() }).unwrap();
        let mut rng = stream_rng(3, 0);
        let n = 20_000;
        let xs: Vec<f64> = (0..n).map(|_| s.draw_mark(&mut rng).1).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 3.0 * 1.0 / (n as f64).sqrt() * 1.5, "{mean}");
        let below_ln2 = xs.iter().filter(|&&x| x < std::f64::consts::LN_2).count() as f64 / n as f64;
        assert!((below_ln2 - 0.5).abs() < 0.015, "{below_ln2}");
    }

    #[test]
    fn every_law_matches_its_cdf() {
        let cut = 1e-3;
        let pieces = [
            DensityPiece::new(-1.0, -0.01, DensityLaw::Power { c: 1.0, alpha: 1.5 }),
            DensityPiece::new(0.5, f64::INFINITY, DensityLaw::Exponential { c: 2.0, rate: 2.0 }),
            DensityPiece::new(0.0, f64::INFINITY, DensityLaw::TruncatedStable { c: 1.0, alpha: 0.5, lambda: 1.0 }),
            DensityPiece::new(0.0, f64::INFINITY, DensityLaw::Custom(Arc::new(|x: f64| (1.0 + x.abs()).powi(-3)))),
        ];
        for (i, piece) in pieces.into_iter().enumerate() {
            let (lo, hi) = (piece.lo, piece.hi);
            let law = piece.law.clone();
            let t = LevyTriplet::new(0.0, 0.0, LevyMeasure::zero(), LevyMeasure::density(piece).unwrap()).unwrap();
            let s = PathSampler::new(&t, &SamplerConfig { eps_z: cut, ..SamplerConfig::default() }).unwrap();
            let mut rng = stream_rng(9, i as u64);
            let n = 20_000;
            let ys: Vec<f64> = (0..n).map(|_| s.draw_mark(&mut rng).1).collect();
            let (a, sign) = if lo < 0.0 { (-hi, -1.0) } else { (lo.max(cut), 1.0) };
            assert!(ys.iter().all(|y| y.abs() >= a && y.signum() == sign), "law {i}");
            let mass = |x: f64| {
                let mut evals = 0;
                adaptive(&|u: f64| law.eval(u), a, x, 1e-12, &mut evals, 1_000_000).value
            };
            let total = s.rate;
            for q in [0.1, 0.5, 0.9] {
                // Bisect for the q-quantile of the truncated law.
                let (mut l, mut r) = (a, a + 1.0);
                while mass(r) < q * total {
                    r *= 2.0;
                }
                for _ in 0..80 {
                    let m = 0.5 * (l + r);
                    if mass(m) < q * total {
                        l = m;
                    } else {
                        r = m;
                    }
                }
                let emp = ys.iter().filter(|y| y.abs() <= l).count() as f64 / n as f64;
                assert!((emp - q).abs() < 0.015, "law {i}, q = {q}: {emp}");
            }
        }
    }

    #[test]
    fn coupled_jumps_move_together() {
        let t = LevyTriplet::coupled(0.0, 0.0, vec![JointAtom { x: 0.5, y: 2.0, mass: 3.0 }]).unwrap();
        let s = PathSampler::new(&t, &SamplerConfig::default()).unwrap();
        let p = s.sample_path(1.0, seed(1), &mut seed(1).rng()).unwrap();
        for j in &p.jumps {
            assert_eq!((j.dx, j.dz), (0.5, 2.0));
        }
        // Drift compensates the small atom: X_t = 0.5 N_t − 1.5 t.
        let last = p.x.last().unwrap();
        assert!((last - (0.5 * p.jumps.len() as f64 - 1.5)).abs() < 1e-12);
    }
}
