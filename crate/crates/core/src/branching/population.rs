//! Forward simulation of the branching population.
//!
//! Particles are explored depth-first from a stack of unborn children, so
//! memory stays proportional to the number of pending births rather than to
//! the population size. Each particle moves as Brownian motion with drift
//! between its own branch events and is read off at a fixed list of
//! observation times.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use super::chars::BranchingChars;
use crate::error::{Error, Result};
use crate::exponents::kappa_real;
use crate::mc::{median, par_streams, z_score, Summary};
use crate::rng::{SeedRecord, StreamRng};

/// Default cap on the number of particles created per tree.
pub const DEFAULT_MAX_PARTICLES: usize = 1_000_000;

/// Receives the particles of one tree as the simulator creates them.
pub(crate) trait PopulationVisitor {
    /// A particle is born; the return value identifies it in later calls.
    fn born(&mut self, parent: Option<usize>, birth_time: f64, birth_pos: f64) -> usize;
    /// Particle `id` is alive at observation `obs` with position `pos`.
    fn observe(&mut self, id: usize, obs: usize, pos: f64);
    /// Particle `id` is killed at `time` or reaches the horizon.
    fn ended(&mut self, _id: usize, _time: f64, _pos: f64, _killed: bool) {}
}

/// Precomputed event table for one set of characteristics.
#[derive(Debug, Clone)]
pub(crate) struct Engine {
    sd: f64,
    drift: f64,
    rate: f64,
    inv_rate: f64,
    cum: Vec<f64>,
    /// Per atom: the first entry (the parent's jump) or `None` for death,
    /// and the range of its other entries in `children`.
    atoms: Vec<(Option<f64>, usize, usize)>,
    children: Vec<f64>,
}

impl Engine {
    pub(crate) fn new(chars: &BranchingChars) -> Self {
        let mut cum = Vec::with_capacity(chars.pi.len());
        let mut atoms = Vec::with_capacity(chars.pi.len());
        let mut children = Vec::new();
        let mut total = 0.0;
        for at in &chars.pi {
            total += at.rate;
            cum.push(total);
            let lo = children.len();
            children.extend(at.positions().iter().skip(1));
            atoms.push((at.first(), lo, children.len()));
        }
        Engine {
            sd: chars.sigma2.sqrt(),
            drift: chars.effective_drift(),
            rate: total,
            inv_rate: 1.0 / total,
            cum,
            atoms,
            children,
        }
    }


    #[inline]
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cum.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random::<f64>() * self.rate;
        self.cum.partition_point(|&c| c <= u).min(self.cum.len() - 1)
    }

    /// Simulates one tree up to the last of `times` (sorted, non-negative).
    /// Returns the number of particles created and whether the cap was hit.
    pub(crate) fn run<R: Rng + ?Sized, V: PopulationVisitor>(
        &self,
        times: &[f64],
        max_particles: usize,
        rng: &mut R,
        visitor: &mut V,
    ) -> (usize, bool) {
        let horizon = times.last().copied().unwrap_or(0.0);
        let (sd, drift, rate, inv_rate) = (self.sd, self.drift, self.rate, self.inv_rate);
        let step = |dt: f64, rng: &mut R| -> f64 {
            if sd > 0.0 {
                let n: f64 = rng.sample(StandardNormal);
                drift * dt + sd * dt.sqrt() * n
            } else {
                drift * dt
            }
        };
        let obs_time = |i: usize| times.get(i).copied().unwrap_or(f64::INFINITY);
        let mut created = 1usize;
        let mut truncated = false;
        let root = visitor.born(None, 0.0, 0.0);
        // Entries carry the index of the first observation not yet passed.
        let mut stack: Vec<(usize, f64, f64, usize)> = vec![(root, 0.0, 0.0, 0)];
        while let Some((id, birth, pos, first_obs)) = stack.pop() {
            let mut t = birth;
            let mut x = pos;
            let mut obs = first_obs;
            let mut next_obs = obs_time(obs);
            loop {
                let next = if rate > 0.0 {
                    let e: f64 = rng.sample(Exp1);
                    t + e * inv_rate
                } else {
                    f64::INFINITY
                };
                while next_obs < next {
                    x += step(next_obs - t, rng);
                    t = next_obs;
                    visitor.observe(id, obs, x);
                    obs += 1;
                    next_obs = obs_time(obs);
                }
                if next > horizon {
                    visitor.ended(id, horizon, x, false);
                    break;
                }
                x += step(next - t, rng);
                t = next;
                let (first, lo, hi) = self.atoms[self.pick(rng)];
                for &offset in &self.children[lo..hi] {
                    if created >= max_particles {
                        truncated = true;
                        break;
                    }
                    created += 1;
                    let child = visitor.born(Some(id), t, x + offset);
                    stack.push((child, t, x + offset, obs));
                }
                match first {
                    Some(x1) => x += x1,
                    None => {
                        visitor.ended(id, t, x, true);
                        break;
                    }
                }
            }
        }
        (created, truncated)
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::arg("times", "at least one observation time is required"));
    }
    for (i, &s) in times.iter().enumerate() {
        if !(s.is_finite() && s >= 0.0) {
            return Err(Error::arg("times", format!("entry {i} must be finite and >= 0, got {s}")));
        }
        if i > 0 && s <= times[i - 1] {
            return Err(Error::arg("times", "must be strictly increasing"));
        }
    }
    Ok(())
}

/// Ulam–Harris label: the root is `[]`; the `n`-th child (1-based, in birth
/// order) of `u` is `u ++ [n]`. A particle keeps its label across its own
/// branch events.
pub type Label = Vec<u32>;

pub fn format_label(label: &[u32]) -> String {
    if label.is_empty() {
        "root".into()
    } else {
        label.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(".")
    }
}

/// One particle of a materialised tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub label: Label,
    pub parent: Option<usize>,
    pub birth_time: f64,
    pub birth_position: f64,
    /// Kill time, or the horizon when the particle survives.
    pub end_time: f64,
    pub killed: bool,
    /// `(observation index, position)` for each observation time it is alive at.
    pub observed: Vec<(usize, f64)>,
}

/// A fully recorded population on `[0, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTree {
    pub chars: BranchingChars,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub particles: Vec<Particle>,
    pub truncated: bool,
    pub max_particles: usize,
    pub seed: SeedRecord,
}

#[derive(Default)]
struct TreeRecorder {
    particles: Vec<Particle>,
    child_counts: Vec<u32>,
}

impl PopulationVisitor for TreeRecorder {
    fn born(&mut self, parent: Option<usize>, birth_time: f64, birth_pos: f64) -> usize {
        let label = match parent {
            Some(p) => {
                self.child_counts[p] += 1;
                let mut l = self.particles[p].label.clone();
                l.push(self.child_counts[p]);
                l
            }
            None => Vec::new(),
        };
        self.particles.push(Particle {
            label,
            parent,
            birth_time,
            birth_position: birth_pos,
            end_time: f64::NAN,
            killed: false,
            observed: Vec::new(),
        });
        self.child_counts.push(0);
        self.particles.len() - 1
    }

    fn observe(&mut self, id: usize, obs: usize, pos: f64) {
        self.particles[id].observed.push((obs, pos));
    }

    fn ended(&mut self, id: usize, time: f64, _pos: f64, killed: bool) {
        self.particles[id].end_time = time;
        self.particles[id].killed = killed;
    }
}

/// Simulates the population on `[0, horizon]`, recording positions at
/// `horizon` only.
pub fn simulate_population(c: &BranchingChars, horizon: f64, max_particles: usize, seed: SeedRecord) -> Result<PopulationTree> {
    simulate_population_at(c, &[horizon], max_particles, seed)
}

/// Simulates the population up to the last of `times`, recording positions
/// at every time in `times` (strictly increasing). Children beyond
/// `max_particles` are not created and the tree is flagged as truncated.
pub fn simulate_population_at(c: &BranchingChars, times: &[f64], max_particles: usize, seed: SeedRecord) -> Result<PopulationTree> {
    check_times(times)?;
    if max_particles == 0 {
        return Err(Error::arg("max_particles", "must be >= 1"));
    }
    let mut rec = TreeRecorder::default();
    let (_, truncated) = Engine::new(c).run(times, max_particles, &mut seed.rng(), &mut rec);
    Ok(PopulationTree {
        chars: c.clone(),
        horizon: *times.last().unwrap(),
        times: times.to_vec(),
        particles: rec.particles,
        truncated,
        max_particles,
        seed,
    })
}

impl PopulationTree {
    fn obs_index(&self, t: f64) -> Result<Option<usize>> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::arg("t", format!("must lie in [0, {}], got {t}", self.horizon)));
        }
        match self.times.iter().position(|&s| s == t) {
            Some(i) => Ok(Some(i)),
            None if t == 0.0 => Ok(None),
            None => Err(Error::arg("t", format!("{t} is not an observation time of this tree"))),
        }
    }

    /// `(label, X_t(u))` for `u ∈ 𝒩_t`; `t` must be `0` or an observation time.
    pub fn alive_at(&self, t: f64) -> Result<Vec<(&Label, f64)>> {
        match self.obs_index(t)? {
            None => Ok(vec![(&self.particles[0].label, 0.0)]),
            Some(i) => Ok(self
                .particles
                .iter()
                .filter_map(|p| p.observed.iter().find(|(o, _)| *o == i).map(|&(_, x)| (&p.label, x)))
                .collect()),
        }
    }

    /// `|𝒩_t|`.
    pub fn size_at(&self, t: f64) -> Result<usize> {
        Ok(self.alive_at(t)?.len())
    }

    /// CSV with columns `label,birth_time,position_at_t` for `u ∈ 𝒩_t`.
    pub fn write_csv<W: std::io::Write>(&self, t: f64, mut w: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Numeric(format!("write failed: {e}"));
        writeln!(w, "label,birth_time,position_at_t").map_err(io)?;
        let i = self.obs_index(t)?;
        for p in &self.particles {
            let pos = match i {
                None if p.parent.is_none() => Some(0.0),
                None => None,
                Some(i) => p.observed.iter().find(|(o, _)| *o == i).map(|&(_, x)| x),
            };
            if let Some(x) = pos {
                writeln!(
                    w,
                    "{},{},{}",
                    format_label(&p.label),
                    crate::io::fmt_f64(p.birth_time),
                    crate::io::fmt_f64(x)
                )
                .map_err(io)?;
            }
        }
        Ok(())
    }
}

/// `W_t = Σ_{u∈𝒩_t} e^{θX_t(u) − tκ(θ)}`. On a truncated tree this is a lower
/// bound; check [`PopulationTree::truncated`].
pub fn biggins_w(tree: &PopulationTree, t: f64) -> Result<f64> {
    let theta = tree.chars.theta;
    let k = kappa_real(&tree.chars, theta);
    if t == 0.0 {
        tree.obs_index(t)?;
        return Ok(1.0);
    }
    let alive = tree.alive_at(t)?;
    Ok(alive.iter().map(|(_, x)| (theta * x - t * k).exp()).sum())
}

/// Additive functionals `Σ_{u∈𝒩_t} e^{z X_t(u)}` of one tree, on a grid of
/// `z` values and observation times.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveSample {
    /// Row-major `[z index][time index]`.
    pub sums: Vec<f64>,
    pub n_times: usize,
    pub n_particles: usize,
    pub truncated: bool,
    pub seed: SeedRecord,
}

impl AdditiveSample {
    pub fn get(&self, zi: usize, ti: usize) -> f64 {
        self.sums[zi * self.n_times + ti]
    }
}

struct AdditiveAccumulator<'a> {
    zs: &'a [f64],
    sums: Vec<f64>,
    n_times: usize,
}

impl PopulationVisitor for AdditiveAccumulator<'_> {
    fn born(&mut self, _: Option<usize>, _: f64, _: f64) -> usize {
        0
    }

    #[inline]
    fn observe(&mut self, _: usize, obs: usize, pos: f64) {
        for (zi, &z) in self.zs.iter().enumerate() {
            self.sums[zi * self.n_times + obs] += if z == 0.0 { 1.0 } else { (z * pos).exp() };
        }
    }
}

/// Streams one tree and returns its additive functionals without storing
/// particles.
pub fn additive_functionals(
    c: &BranchingChars,
    zs: &[f64],
    times: &[f64],
    max_particles: usize,
    seed: SeedRecord,
    rng: &mut StreamRng,
) -> Result<AdditiveSample> {
    check_times(times)?;
    if zs.is_empty() {
        return Err(Error::arg("zs", "at least one z is required"));
    }
    let mut acc = AdditiveAccumulator {
        zs,
        sums: vec![0.0; zs.len() * times.len()],
        n_times: times.len(),
    };
    let (n_particles, truncated) = Engine::new(c).run(times, max_particles, rng, &mut acc);
    Ok(AdditiveSample {
        sums: acc.sums,
        n_times: times.len(),
        n_particles,
        truncated,
        seed,
    })
}

/// `W_t` at each of `times` for many independent trees.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleBatch {
    pub times: Vec<f64>,
    /// `w[i][j]` is `W_{times[j]}` for tree `i`.
    pub w: Vec<Vec<f64>>,
    pub truncated: Vec<bool>,
}

impl MartingaleBatch {
    pub fn n_truncated(&self) -> usize {
        self.truncated.iter().filter(|&&t| t).count()
    }

    fn column(&self, j: usize) -> Vec<f64> {
        self.w
            .iter()
            .zip(&self.truncated)
            .filter(|(_, &tr)| !tr)
            .map(|(row, _)| row[j])
            .collect()
    }

    /// Mean and standard error of `W_t` over untruncated trees.
    pub fn summaries(&self) -> Vec<Summary> {
        (0..self.times.len()).map(|j| Summary::from_slice(&self.column(j))).collect()
    }

    /// Median of `W_t` over untruncated trees.
    pub fn medians(&self) -> Vec<f64> {
        (0..self.times.len()).map(|j| median(&self.column(j))).collect()
    }
}

/// Simulates `n_trees` trees on streams `0..n_trees` of `key` and records
/// `W_t` at each observation time.
pub fn sample_martingale(c: &BranchingChars, times: &[f64], n_trees: usize, max_particles: usize, key: u64) -> Result<MartingaleBatch> {
    check_times(times)?;
    let theta = c.theta;
    let k = kappa_real(c, theta);
    let rows = par_streams(key, n_trees, |seed, rng| additive_functionals(c, &[theta], times, max_particles, seed, rng));
    let mut w = Vec::with_capacity(n_trees);
    let mut truncated = Vec::with_capacity(n_trees);
    for r in rows {
        let r = r?;
        w.push(
            times
                .iter()
                .enumerate()
                .map(|(j, &t)| r.get(0, j) * (-t * k).exp())
                .collect(),
        );
        truncated.push(r.truncated);
    }
    Ok(MartingaleBatch {
        times: times.to_vec(),
        w,
        truncated,
    })
}

/// Monte Carlo check of `E Σ_{u∈𝒩_t} e^{zX_t(u)} = e^{tκ(z)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManyToOneCheck {
    pub estimate: f64,
    pub std_error: f64,
    pub rhs: f64,
    pub z_score: f64,
    pub n_used: usize,
    pub n_truncated: usize,
}

pub fn verify_many_to_one(c: &BranchingChars, z: f64, t: f64, n_samples: usize, max_particles: usize, key: u64) -> Result<ManyToOneCheck> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::arg("t", format!("must be finite and > 0, got {t}")));
    }
    let k = kappa_real(c, z);
    if !k.is_finite() {
        return Err(Error::ExponentUndefined(format!("κ({z}) is not finite")));
    }
    let rows = par_streams(key, n_samples, |seed, rng| additive_functionals(c, &[z], &[t], max_particles, seed, rng));
    let mut s = Summary::default();
    let mut n_truncated = 0;
    for r in rows {
        let r = r?;
        if r.truncated {
            n_truncated += 1;
        } else {
            s.push(r.get(0, 0));
        }
    }
    if s.n == 0 {
        return Err(Error::Degenerate("every tree hit the particle cap".into()));
    }
    let rhs = (t * k).exp();
    Ok(ManyToOneCheck {
        estimate: s.mean,
        std_error: s.std_error(),
        rhs,
        z_score: z_score(s.mean, rhs, s.std_error()),
        n_used: s.n,
        n_truncated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::OffspringAtom;

    fn drift_only() -> BranchingChars {
        BranchingChars::new(0.0, 1.0, Vec::new(), 1.0).unwrap()
    }

    #[test]
    fn lone_drifting_particle() {
        let tree = simulate_population(&drift_only(), 2.0, 10, SeedRecord::new(0, 0)).unwrap();
        assert_eq!(tree.particles.len(), 1);
        let alive = tree.alive_at(2.0).unwrap();
        assert_eq!(alive.len(), 1);
        assert!((alive[0].1 - 2.0).abs() < 1e-15);
        let tree = simulate_population_at(&drift_only(), &[0.5, 1.0], 10, SeedRecord::new(0, 0)).unwrap();
        assert_eq!(biggins_w(&tree, 0.5).unwrap(), 1.0);
        assert_eq!(biggins_w(&tree, 0.0).unwrap(), 1.0);
        assert!(biggins_w(&tree, 2.0).is_err());
        assert!(biggins_w(&tree, 0.7).is_err());
    }

    #[test]
    fn unary_events_keep_size_one() {
        let c = BranchingChars::new(1.0, 0.0, vec![OffspringAtom::new(3.0, vec![0.0]).unwrap()], 1.0).unwrap();
        for i in 0..20 {
            let tree = simulate_population_at(&c, &[1.0, 5.0], 100, SeedRecord::new(1, i)).unwrap();
            assert_eq!(tree.size_at(1.0).unwrap(), 1);
            assert_eq!(tree.size_at(5.0).unwrap(), 1);
        }
    }

    #[test]
    fn tree_structure() {
        let c = BranchingChars::new(
            0.5,
            0.2,
            vec![
                OffspringAtom::new(1.0, vec![0.3, -0.2]).unwrap(),
                OffspringAtom::new(0.5, vec![]).unwrap(),
            ],
            1.0,
        )
        .unwrap();
        let tree = simulate_population_at(&c, &[1.0, 2.0, 3.0], 10_000, SeedRecord::new(2, 7)).unwrap();
        for p in &tree.particles[1..] {
            let parent = &tree.particles[p.parent.unwrap()];
            assert!(parent.birth_time < p.birth_time && p.birth_time <= tree.horizon);
            assert_eq!(&p.label[..p.label.len() - 1], &parent.label[..]);
            assert!(p.end_time >= p.birth_time);
        }
        let mut labels: Vec<String> = tree.particles.iter().map(|p| format_label(&p.label)).collect();
        labels.sort();
        labels.dedup();
        assert_eq!(labels.len(), tree.particles.len());
    }

    #[test]
    fn streaming_matches_tree() {
        let c = BranchingChars::bbm(0.7);
        let times = [0.5, 1.0, 1.5];
        for i in 0..10 {
            let seed = SeedRecord::new(3, i);
            let tree = simulate_population_at(&c, &times, 100_000, seed).unwrap();
            let s = additive_functionals(&c, &[0.0, 0.7], &times, 100_000, seed, &mut seed.rng()).unwrap();
            let k = kappa_real(&c, 0.7);
            for (j, &t) in times.iter().enumerate() {
                assert_eq!(s.get(0, j), tree.size_at(t).unwrap() as f64);
                let w = biggins_w(&tree, t).unwrap();
                assert!((s.get(1, j) * (-t * k).exp() - w).abs() < 1e-12 * w.max(1.0));
            }
            assert_eq!(s.n_particles, tree.particles.len());
        }
    }

    #[test]
    fn cap_truncates() {
        let c = BranchingChars::yule(1.0);
        let tree = simulate_population(&c, 10.0, 50, SeedRecord::new(4, 0)).unwrap();
        assert!(tree.truncated);
        assert_eq!(tree.particles.len(), 50);
    }

    #[test]
    fn deterministic_many_to_one() {
        let r = verify_many_to_one(&drift_only(), 1.0, 2.0, 50, 10, 0).unwrap();
        assert_eq!(r.std_error, 0.0);
        assert!((r.estimate - 2f64.exp()).abs() < 1e-12);
        assert!((r.rhs - (2.0f64).exp()).abs() < 1e-12);
        assert_eq!(r.z_score, 0.0);
    }

    #[test]
    fn csv_lists_alive_particles() {
        let tree = simulate_population(&BranchingChars::bbm(1.0), 1.0, 1000, SeedRecord::new(5, 0)).unwrap();
        let mut out = Vec::new();
        tree.write_csv(1.0, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 1 + tree.size_at(1.0).unwrap());
        assert!(text.starts_with("label,birth_time,position_at_t\nroot,"));
    }
}
