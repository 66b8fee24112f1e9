//! Run configuration: one JSON document per experiment.
//!
//! `±∞` is spelled as the string tokens `"inf"` / `"-inf"` wherever an
//! extended real is allowed (density bounds and offspring sequences).

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lpl_core::branching::{BranchingChars, OffspringAtom};
use lpl_core::exponents::{JointAtom, LevyTriplet};
use lpl_core::{Atom, DensityLaw, DensityPiece, LevyMeasure};

use crate::error::CliError;

/// A real number that may also be `±∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtF64(pub f64);

impl Serialize for ExtF64 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            x if x.is_finite() => s.serialize_f64(x),
            x if x == f64::INFINITY => s.serialize_str("inf"),
            x if x == f64::NEG_INFINITY => s.serialize_str("-inf"),
            _ => s.serialize_str("nan"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtF64 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = ExtF64;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or one of the tokens \"inf\", \"-inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<ExtF64, E> {
                Ok(ExtF64(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<ExtF64, E> {
                Ok(ExtF64(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<ExtF64, E> {
                Ok(ExtF64(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<ExtF64, E> {
                match v {
                    "inf" | "+inf" => Ok(ExtF64(f64::INFINITY)),
                    "-inf" => Ok(ExtF64(f64::NEG_INFINITY)),
                    _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

/// A list that may be written as a single number.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(Option::<OneOrMany>::deserialize(d)?.map(|v| match v {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(xs) => xs,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Validate,
    CriteriaPerpetuity,
    CriteriaBranching,
    SimulatePerpetuity,
    EstimateMoment,
    SimulateBranching,
    VerifyMartingale,
    Spine,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Validate => "validate",
            Mode::CriteriaPerpetuity => "criteria-perpetuity",
            Mode::CriteriaBranching => "criteria-branching",
            Mode::SimulatePerpetuity => "simulate-perpetuity",
            Mode::EstimateMoment => "estimate-moment",
            Mode::SimulateBranching => "simulate-branching",
            Mode::VerifyMartingale => "verify-martingale",
            Mode::Spine => "spine",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawSpec {
    /// `c |x|^{-alpha}`
    Power { c: f64, alpha: f64 },
    /// `c e^{-rate |x|}`
    Exponential { c: f64, rate: f64 },
    /// `c |x|^{-1-alpha} e^{-lambda |x|}`
    TruncatedStable { c: f64, alpha: f64, lambda: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub lo: ExtF64,
    pub hi: ExtF64,
    pub law: LawSpec,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureSpec {
    /// `[location, mass]` pairs.
    pub atoms: Vec<(f64, f64)>,
    pub densities: Vec<DensitySpec>,
}

impl MeasureSpec {
    fn is_empty(&self) -> bool {
        self.atoms.is_empty() && self.densities.is_empty()
    }

    pub(crate) fn build(&self, path: &str) -> Result<LevyMeasure, CliError> {
        let atoms = self
            .atoms
            .iter()
            .map(|&(location, mass)| Atom { location, mass })
            .collect();
        let densities = self
            .densities
            .iter()
            .map(|d| {
                let law = match d.law {
                    LawSpec::Power { c, alpha } => DensityLaw::Power { c, alpha },
                    LawSpec::Exponential { c, rate } => DensityLaw::Exponential { c, rate },
                    LawSpec::TruncatedStable { c, alpha, lambda } => DensityLaw::TruncatedStable { c, alpha, lambda },
                };
                DensityPiece::new(d.lo.0, d.hi.0, law)
            })
            .collect();
        LevyMeasure::new(atoms, densities).map_err(|e| CliError::config(path, e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySpec {
    pub v2: f64,
    pub b: f64,
    #[serde(default, skip_serializing_if = "MeasureSpec::is_empty")]
    pub lambda1: MeasureSpec,
    #[serde(default, skip_serializing_if = "MeasureSpec::is_empty")]
    pub lambda2: MeasureSpec,
    /// Joint atoms `[x, y, mass]`; replaces `lambda1`/`lambda2` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupled: Option<Vec<(f64, f64, f64)>>,
}

impl LevySpec {
    pub fn build(&self) -> Result<LevyTriplet, CliError> {
        if let Some(atoms) = &self.coupled {
            if !(self.lambda1.is_empty() && self.lambda2.is_empty()) {
                return Err(CliError::config(
                    "model.coupled",
                    "give either coupled atoms or lambda1/lambda2, not both",
                ));
            }
            let atoms = atoms.iter().map(|&(x, y, mass)| JointAtom { x, y, mass }).collect();
            return LevyTriplet::coupled(self.v2, self.b, atoms).map_err(|e| CliError::config("model.coupled", e.to_string()));
        }
        let l1 = self.lambda1.build("model.lambda1")?;
        let l2 = self.lambda2.build("model.lambda2")?;
        LevyTriplet::new(self.v2, self.b, l1, l2).map_err(|e| CliError::config("model", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OffspringSpec {
    pub rate: f64,
    /// Non-increasing, padded with `"-inf"`.
    pub sequence: Vec<ExtF64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchingSpec {
    pub sigma2: f64,
    pub a: f64,
    pub theta: f64,
    #[serde(default)]
    pub pi: Vec<OffspringSpec>,
}

impl BranchingSpec {
    pub fn build(&self) -> Result<BranchingChars, CliError> {
        let mut atoms = Vec::with_capacity(self.pi.len());
        for (i, at) in self.pi.iter().enumerate() {
            let mut seq = Vec::with_capacity(at.sequence.len());
            for (j, x) in at.sequence.iter().enumerate() {
                match x.0 {
                    v if v == f64::NEG_INFINITY => seq.push(None),
                    v if v.is_finite() => seq.push(Some(v)),
                    v => {
                        return Err(CliError::config(
                            format!("model.pi[{i}].sequence[{j}]"),
                            format!("entries must be finite or \"-inf\", got {v}"),
                        ))
                    }
                }
            }
            let atom = OffspringAtom::from_padded(at.rate, &seq)
                .map_err(|e| CliError::config(format!("model.pi[{i}]"), e.to_string()))?;
            atoms.push(atom);
        }
        BranchingChars::new(self.sigma2, self.a, atoms, self.theta).map_err(|e| CliError::config("model", e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Model {
    Levy(LevySpec),
    Branching(BranchingSpec),
}

/// Affine iteration count: a fixed `n` or `"adaptive"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterSpec {
    Fixed(usize),
    Adaptive,
}

impl Serialize for IterSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            IterSpec::Fixed(n) => s.serialize_u64(*n as u64),
            IterSpec::Adaptive => s.serialize_str("adaptive"),
        }
    }
}

impl<'de> Deserialize<'de> for IterSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = IterSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive integer or \"adaptive\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<IterSpec, E> {
                if v == 0 {
                    return Err(E::invalid_value(de::Unexpected::Unsigned(v), &self));
                }
                Ok(IterSpec::Fixed(v as usize))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<IterSpec, E> {
                if v <= 0 {
                    return Err(E::invalid_value(de::Unexpected::Signed(v), &self));
                }
                Ok(IterSpec::Fixed(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<IterSpec, E> {
                if v == "adaptive" {
                    Ok(IterSpec::Adaptive)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    #[serde(deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(rename = "T", skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(deserialize_with = "one_or_many", skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_iter: Option<IterSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// Stopping tolerance of the adaptive iteration.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_particles: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hill_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_paths: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: Model,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    model: Value,
    #[serde(default)]
    params: Params,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    output_dir: Option<PathBuf>,
}

fn located<E: fmt::Display>(prefix: &str, e: serde_path_to_error::Error<E>) -> CliError {
    let inner = e.path().to_string();
    let path = match (prefix, inner.as_str()) {
        ("", ".") => "$".to_string(),
        ("", p) => p.to_string(),
        (pre, ".") => pre.to_string(),
        (pre, p) if p.starts_with('[') => format!("{pre}{p}"),
        (pre, p) => format!("{pre}.{p}"),
    };
    CliError::config(path, e.into_inner().to_string())
}

impl RunConfig {
    /// Parses a JSON document, reporting the field path of the first error.
    pub fn parse(text: &str) -> Result<RunConfig, CliError> {
        if text.trim().is_empty() {
            return Err(CliError::config("$", "config is empty"));
        }
        // The tagged `model` enum buffers its content, which loses field
        // paths; decode it separately.
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| located("", e))?;
        let Value::Object(mut spec) = raw.model else {
            return Err(CliError::config("model", "must be an object"));
        };
        let kind = match spec.remove("type") {
            Some(Value::String(s)) => s,
            _ => return Err(CliError::config("model.type", "must be \"levy\" or \"branching\"")),
        };
        let spec = Value::Object(spec);
        let model = match kind.as_str() {
            "levy" => Model::Levy(serde_path_to_error::deserialize(spec).map_err(|e| located("model", e))?),
            "branching" => Model::Branching(serde_path_to_error::deserialize(spec).map_err(|e| located("model", e))?),
            other => {
                return Err(CliError::config(
                    "model.type",
                    format!("unknown model type {other:?}, expected \"levy\" or \"branching\""),
                ))
            }
        };
        Ok(RunConfig {
            mode: raw.mode,
            model,
            params: raw.params,
            seed: raw.seed,
            output_dir: raw.output_dir,
        })
    }

    /// Compact JSON; `parse(emit(c)) == c`.
    pub fn emit(&self) -> String {
        serde_json::to_string(self).expect("config serialises")
    }
}
