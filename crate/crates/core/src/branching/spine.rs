//! The spine under the size-biased law and its perpetuity `S_t`.
//!
//! Branch events arrive at rate `Σ rate·Σ_k e^{θx_k}`; the event `(x, k)` is
//! picked with weight `rate·e^{θx_k}`, the spine follows `x_k` and the other
//! entries become its siblings `Ω_s`.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::chars::BranchingChars;
use super::population::sample_martingale;
use crate::error::{Error, Result};
use crate::exponents::kappa_real;
use crate::mc::{par_streams, Summary};
use crate::rng::{derive_key, SeedRecord, StreamRng};

/// One branch event seen from the spine.
#[derive(Debug, Clone, PartialEq)]
pub struct SpineEvent {
    pub time: f64,
    /// Index into `Π`'s atoms.
    pub atom: usize,
    /// Index of the entry the spine follows (0-based).
    pub k: usize,
    /// `ξ̂_{s−}` and `ξ̂_s`.
    pub spine_before: f64,
    pub spine_after: f64,
    /// Offsets `Ω_s = {x_j : j ≠ k}` of the siblings.
    pub siblings: Vec<f64>,
    /// `S_s` after this event.
    pub s_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpineRealization {
    pub theta: f64,
    pub kappa_theta: f64,
    pub horizon: f64,
    pub events: Vec<SpineEvent>,
    /// `ξ̂_T`.
    pub spine_end: f64,
    /// `S_T`.
    pub s_end: f64,
    pub seed: SeedRecord,
}

impl SpineRealization {
    /// `W*_T = e^{θξ̂_T − Tκ(θ)} + S_T`.
    pub fn w_star(&self) -> f64 {
        (self.theta * self.spine_end - self.horizon * self.kappa_theta).exp() + self.s_end
    }

    /// `(t, ξ̂_t)` at time 0, after every event, and at the horizon.
    pub fn path(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(self.events.len() + 2);
        out.push((0.0, 0.0));
        out.extend(self.events.iter().map(|e| (e.time, e.spine_after)));
        out.push((self.horizon, self.spine_end));
        out
    }
}

/// Event table of the size-biased spine.
struct SpineEngine<'a> {
    chars: &'a BranchingChars,
    /// `(atom, k, weight)` with cumulative weights.
    table: Vec<(usize, usize)>,
    cum: Vec<f64>,
    rate: f64,
    drift: f64,
    sd: f64,
    kappa: f64,
}

impl<'a> SpineEngine<'a> {
    fn new(c: &'a BranchingChars) -> Self {
        let mut table = Vec::new();
        let mut cum = Vec::new();
        let mut rate = 0.0;
        for (ai, at) in c.pi.iter().enumerate() {
            for (k, &x) in at.positions().iter().enumerate() {
                rate += at.rate * (c.theta * x).exp();
                table.push((ai, k));
                cum.push(rate);
            }
        }
        SpineEngine {
            chars: c,
            table,
            cum,
            rate,
            drift: c.sigma2 * c.theta + c.effective_drift(),
            sd: c.sigma2.sqrt(),
            kappa: kappa_real(c, c.theta),
        }
    }

    fn step(&self, dt: f64, rng: &mut StreamRng) -> f64 {
        let mut d = self.drift * dt;
        if self.sd > 0.0 && dt > 0.0 {
            let n: f64 = rng.sample(StandardNormal);
            d += self.sd * dt.sqrt() * n;
        }
        d
    }

    fn run(&self, horizon: f64, seed: SeedRecord, rng: &mut StreamRng) -> SpineRealization {
        let theta = self.chars.theta;
        let mut t = 0.0;
        let mut xi = 0.0;
        let mut s = 0.0;
        let mut events = Vec::new();
        loop {
            let next = if self.rate > 0.0 {
                let e: f64 = rng.sample(Exp1);
                t + e / self.rate
            } else {
                f64::INFINITY
            };
            if next > horizon {
                xi += self.step(horizon - t, rng);
                break;
            }
            xi += self.step(next - t, rng);
            t = next;
            let idx = if self.table.len() == 1 {
                0
            } else {
                let u: f64 = rng.random::<f64>() * self.rate;
                self.cum.partition_point(|&c| c <= u).min(self.table.len() - 1)
            };
            let (ai, k) = self.table[idx];
            let positions = self.chars.pi[ai].positions();
            let siblings: Vec<f64> = positions
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != k)
                .map(|(_, &x)| x)
                .collect();
            let weight: f64 = siblings.iter().map(|z| (theta * z).exp()).sum();
            s += (theta * xi - t * self.kappa).exp() * weight;
            let before = xi;
            xi += positions[k];
            events.push(SpineEvent {
                time: t,
                atom: ai,
                k,
                spine_before: before,
                spine_after: xi,
                siblings,
                s_after: s,
            });
        }
        SpineRealization {
            theta,
            kappa_theta: self.kappa,
            horizon,
            events,
            spine_end: xi,
            s_end: s,
            seed,
        }
    }
}

/// Samples the spine and its perpetuity on `[0, horizon]`.
pub fn simulate_spine(c: &BranchingChars, horizon: f64, seed: SeedRecord) -> Result<SpineRealization> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::arg("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    Ok(SpineEngine::new(c).run(horizon, seed, &mut seed.rng()))
}

/// Many spine realizations on streams `0..n` of `key`.
pub fn sample_spines(c: &BranchingChars, horizon: f64, n: usize, key: u64) -> Result<Vec<SpineRealization>> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::arg("horizon", format!("must be finite and >= 0, got {horizon}")));
    }
    let engine = SpineEngine::new(c);
    Ok(par_streams(key, n, |seed, rng| engine.run(horizon, seed, rng)))
}

/// Spine-side `Ê W*_t` against population-side `E W_t²`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpineIdentityCheck {
    pub spine_mean: f64,
    pub spine_std_error: f64,
    pub population_mean: f64,
    pub population_std_error: f64,
    /// Difference over the joint standard error.
    pub z_score: f64,
    pub n_truncated: usize,
}

/// Compares the two independent estimators, each from `n_samples` draws.
/// Population streams use `derive_key(key, "population")`, spine streams
/// `derive_key(key, "spine")`.
pub fn check_spine_identity(c: &BranchingChars, t: f64, n_samples: usize, max_particles: usize, key: u64) -> Result<SpineIdentityCheck> {
    if n_samples < 2 {
        return Err(Error::arg("n_samples", "must be >= 2"));
    }
    let spines = sample_spines(c, t, n_samples, derive_key(key, "spine"))?;
    let spine = Summary::from_slice(&spines.iter().map(SpineRealization::w_star).collect::<Vec<_>>());
    let (pop, n_truncated) = if t == 0.0 {
        (Summary::from_slice(&vec![1.0; n_samples]), 0)
    } else {
        let batch = sample_martingale(c, &[t], n_samples, max_particles, derive_key(key, "population"))?;
        let squares: Vec<f64> = batch
            .w
            .iter()
            .zip(&batch.truncated)
            .filter(|(_, &tr)| !tr)
            .map(|(row, _)| row[0] * row[0])
            .collect();
        (Summary::from_slice(&squares), batch.n_truncated())
    };
    if pop.n == 0 {
        return Err(Error::Degenerate("every population tree hit the particle cap".into()));
    }
    let joint = (spine.std_error().powi(2) + pop.std_error().powi(2)).sqrt();
    let diff = spine.mean - pop.mean;
    let z = if joint > 0.0 {
        diff / joint
    } else if diff.abs() <= 1e-12 * pop.mean.abs().max(1.0) {
        0.0
    } else {
        f64::INFINITY * diff.signum()
    };
    Ok(SpineIdentityCheck {
        spine_mean: spine.mean,
        spine_std_error: spine.std_error(),
        population_mean: pop.mean,
        population_std_error: pop.std_error(),
        z_score: z,
        n_truncated,
    })
}
