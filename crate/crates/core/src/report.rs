//! Structured verdicts for the analytic criteria.

use std::fmt;

/// Outcome of a single condition or of a whole criterion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Holds,
    Fails,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Fails => "fails",
            Verdict::Indeterminate => "indeterminate",
        }
    }

    /// Conjunction: any failure fails, otherwise any indeterminate wins.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fails, _) | (_, Fails) => Fails,
            (Indeterminate, _) | (_, Indeterminate) => Indeterminate,
            (Holds, Holds) => Holds,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A value that may be `+∞` (divergent integral) or not computable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Computed {
    Finite(f64),
    Infinite,
    Unknown,
}

impl Computed {
    pub fn finite(self) -> Option<f64> {
        match self {
            Computed::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// `+∞` for divergent values, NaN for unknown.
    pub fn to_f64(self) -> f64 {
        match self {
            Computed::Finite(v) => v,
            Computed::Infinite => f64::INFINITY,
            Computed::Unknown => f64::NAN,
        }
    }
}

/// One condition of a criterion.
#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    pub verdict: Verdict,
    pub value: Computed,
    /// Signed distance to the threshold; negative means the strict inequality holds.
    pub margin: Option<f64>,
    pub tolerance: f64,
    /// Set when the value sits on the threshold within `tolerance`.
    pub boundary: bool,
    pub note: Option<String>,
}

impl Component {
    pub fn new(name: impl Into<String>, verdict: Verdict, value: Computed) -> Self {
        Component {
            name: name.into(),
            verdict,
            value,
            margin: None,
            tolerance: 0.0,
            boundary: false,
            note: None,
        }
    }

    /// Decide `value < threshold` strictly. Values within `tolerance` of the
    /// threshold fail with the boundary flag set.
    pub fn strict_less(name: impl Into<String>, value: Computed, threshold: f64, tolerance: f64) -> Self {
        let mut c = Component::new(name, Verdict::Indeterminate, value);
        c.tolerance = tolerance;
        match value {
            Computed::Finite(v) => {
                let margin = v - threshold;
                c.margin = Some(margin);
                if margin.abs() <= tolerance {
                    c.verdict = Verdict::Fails;
                    c.boundary = true;
                } else if margin < 0.0 {
                    c.verdict = Verdict::Holds;
                } else {
                    c.verdict = Verdict::Fails;
                }
            }
            Computed::Infinite => {
                c.verdict = Verdict::Fails;
                c.margin = Some(f64::INFINITY);
            }
            Computed::Unknown => {}
        }
        c
    }

    /// Decide finiteness of an integral.
    pub fn finite_integral(name: impl Into<String>, value: Computed, error_bound: f64) -> Self {
        let verdict = match value {
            Computed::Finite(_) => Verdict::Holds,
            Computed::Infinite => Verdict::Fails,
            Computed::Unknown => Verdict::Indeterminate,
        };
        let mut c = Component::new(name, verdict, value);
        c.tolerance = error_bound;
        c
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Verdict of a criterion together with every condition behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub criterion: String,
    pub verdict: Verdict,
    pub components: Vec<Component>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    /// Builds the report; the verdict is the conjunction of the components.
    pub fn from_components(criterion: impl Into<String>, components: Vec<Component>) -> Self {
        let verdict = components
            .iter()
            .fold(Verdict::Holds, |acc, c| acc.and(c.verdict));
        CriterionReport {
            criterion: criterion.into(),
            verdict,
            components,
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    pub fn component(&self, name: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.name == name)
    }

    /// True when some component failed only because it sits on its threshold.
    pub fn boundary(&self) -> bool {
        self.components.iter().any(|c| c.boundary)
    }
}
