use std::f64::consts::E;

use crate::error::{Error, Result};
use crate::report::{Component, Computed, CriterionReport};

/// One atom of the reproduction measure `Π`: at rate `rate`, a particle
/// moves by `positions[0]` and begets children at offsets `positions[1..]`.
///
/// Only the finite entries are stored; the sequence is implicitly padded with
/// `-∞` ("not born"). An empty list means the particle is killed.
#[derive(Debug, Clone, PartialEq)]
pub struct OffspringAtom {
    pub rate: f64,
    positions: Vec<f64>,
}

impl OffspringAtom {
    pub fn new(rate: f64, positions: Vec<f64>) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidBranching {
                component: "rate".into(),
                reason: format!("must be finite and > 0, got {rate}"),
            });
        }
        for (i, x) in positions.iter().enumerate() {
            if !x.is_finite() {
                return Err(Error::InvalidBranching {
                    component: format!("sequence[{i}]"),
                    reason: format!("finite entries expected before the -inf padding, got {x}"),
                });
            }
            if i > 0 && *x > positions[i - 1] {
                return Err(Error::InvalidBranching {
                    component: format!("sequence[{i}]"),
                    reason: format!("sequence must be non-increasing ({} then {x})", positions[i - 1]),
                });
            }
        }
        Ok(OffspringAtom { rate, positions })
    }

    /// Parses a sequence where `None` stands for `-∞`. Entries after the first
    /// `-∞` must also be `-∞`.
    pub fn from_padded(rate: f64, seq: &[Option<f64>]) -> Result<Self> {
        let finite = seq.iter().take_while(|x| x.is_some()).count();
        if let Some(i) = seq[finite..].iter().position(|x| x.is_some()) {
            return Err(Error::InvalidBranching {
                component: format!("sequence[{}]", finite + i),
                reason: "sequence must be non-increasing (finite entry after -inf)".into(),
            });
        }
        let positions = seq[..finite].iter().map(|x| x.unwrap()).collect();
        OffspringAtom::new(rate, positions)
    }

    /// Finite entries `x_1 ≥ x_2 ≥ …`.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    /// `x_1`, or `None` when it is `-∞`.
    pub fn first(&self) -> Option<f64> {
        self.positions.first().copied()
    }

    /// `Σ_{j≠k} e^{θ x_j}` over finite entries.
    pub fn others_weight(&self, theta: f64, k: usize) -> f64 {
        self.positions
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != k)
            .map(|(_, x)| (theta * x).exp())
            .sum()
    }
}

/// Characteristics `(σ², a, Π)` of a branching Lévy process with a fixed
/// `θ > 0`, `Π` a finite atomic measure on non-increasing sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchingChars {
    pub sigma2: f64,
    pub a: f64,
    pub pi: Vec<OffspringAtom>,
    pub theta: f64,
}

impl BranchingChars {
    pub fn new(sigma2: f64, a: f64, pi: Vec<OffspringAtom>, theta: f64) -> Result<Self> {
        let bad = |component: &str, reason: String| Error::InvalidBranching {
            component: component.into(),
            reason,
        };
        if !(sigma2.is_finite() && sigma2 >= 0.0) {
            return Err(bad("sigma2", format!("must be finite and >= 0, got {sigma2}")));
        }
        if !a.is_finite() {
            return Err(bad("a", format!("must be finite, got {a}")));
        }
        if !(theta.is_finite() && theta > 0.0) {
            return Err(bad("theta", format!("must be finite and > 0, got {theta}")));
        }
        Ok(BranchingChars { sigma2, a, pi, theta })
    }

    /// Binary branching Brownian motion: `σ² = 1`, `a = 0`, `Π = δ_{(0,0)}`.
    pub fn bbm(theta: f64) -> Self {
        BranchingChars::new(1.0, 0.0, vec![OffspringAtom::new(1.0, vec![0.0, 0.0]).unwrap()], theta)
            .unwrap()
    }

    /// Yule process: no motion, binary splitting at rate 1.
    pub fn yule(theta: f64) -> Self {
        BranchingChars::new(0.0, 0.0, vec![OffspringAtom::new(1.0, vec![0.0, 0.0]).unwrap()], theta)
            .unwrap()
    }

    /// Total branching rate `Π(𝒫)`.
    pub fn total_rate(&self) -> f64 {
        self.pi.iter().map(|at| at.rate).sum()
    }

    /// Drift between branch events once the compensator of the small `x_1`
    /// jumps is folded in: `a − ∫ x_1 1_{(−1,1)}(x_1) Π(dx)`.
    pub fn effective_drift(&self) -> f64 {
        self.a
            - self
                .pi
                .iter()
                .filter_map(|at| at.first().map(|x1| (at.rate, x1)))
                .filter(|(_, x1)| x1.abs() < 1.0)
                .map(|(r, x1)| r * x1)
                .sum::<f64>()
    }
}

/// Checks `∫(x_1²∧1) Π < ∞` and `∫(e^{θx_1}1_{x_1>1} + Σ_{j≥2} e^{θx_j}) Π < ∞`
/// (finite sums for atomic `Π`).
pub fn validate_branching(c: &BranchingChars) -> CriterionReport {
    let eve: f64 = c
        .pi
        .iter()
        .map(|at| at.rate * at.first().map_or(0.0, |x1| (x1 * x1).min(1.0)))
        .sum();
    let exp_moment: f64 = c
        .pi
        .iter()
        .map(|at| {
            let head = at
                .first()
                .filter(|&x1| x1 > 1.0)
                .map_or(0.0, |x1| (c.theta * x1).exp());
            let rest: f64 = at.positions().iter().skip(1).map(|x| (c.theta * x).exp()).sum();
            at.rate * (head + rest)
        })
        .sum();
    let as_computed = |v: f64| {
        if v.is_finite() {
            Computed::Finite(v)
        } else {
            Computed::Infinite
        }
    };
    CriterionReport::from_components(
        "branching_assumptions",
        vec![
            Component::finite_integral("x1_squared_wedge_1", as_computed(eve), 0.0),
            Component::finite_integral("finite_exponential_moment", as_computed(exp_moment), 0.0),
        ],
    )
}

/// Indicator `1_{(e,∞)}`.
pub(crate) fn above_e(y: f64) -> bool {
    y > E
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::report::Verdict;

    #[test]
    fn bbm_is_valid() {
        let r = validate_branching(&BranchingChars::bbm(1.0));
        assert_eq!(r.verdict, Verdict::Holds);
    }

    #[test]
    fn exponential_moment_value() {
        let c = BranchingChars::new(0.0, 0.0, vec![OffspringAtom::new(1.0, vec![2.0, 0.0]).unwrap()], 1.0)
            .unwrap();
        let r = validate_branching(&c);
        assert_eq!(r.verdict, Verdict::Holds);
        let v = r.component("finite_exponential_moment").unwrap().value.finite().unwrap();
        assert!((v - (E * E + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn increasing_sequence_rejected() {
        let e = OffspringAtom::new(1.0, vec![0.0, 1.0]).unwrap_err();
        assert!(e.to_string().contains("non-increasing"));
        let e = OffspringAtom::from_padded(1.0, &[Some(0.0), None, Some(-1.0)]).unwrap_err();
        assert!(e.to_string().contains("sequence[2]"));
    }

    #[test]
    fn padded_sequences() {
        let at = OffspringAtom::from_padded(2.0, &[Some(0.5), None, None]).unwrap();
        assert_eq!(at.positions(), &[0.5]);
        let killed = OffspringAtom::from_padded(1.0, &[None]).unwrap();
        assert_eq!(killed.first(), None);
    }

    #[test]
    fn effective_drift_compensates_small_first_jumps() {
        let c = BranchingChars::new(
            0.0,
            1.0,
            vec![
                OffspringAtom::new(2.0, vec![0.5]).unwrap(),
                OffspringAtom::new(1.0, vec![3.0]).unwrap(),
            ],
            1.0,
        )
        .unwrap();
        assert_eq!(c.effective_drift(), 0.0);
    }
}
