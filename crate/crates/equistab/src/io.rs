//! Problem and orbit file formats (JSON, one orbit per file).
//!
//! Coefficient payloads are written as decimal numbers with 17 significant
//! digits, so files round-trip bitwise through the parser. Permutations use
//! one-line notation with 1-based images; time actions are exact rationals.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::action::{FundamentalPath, TrigLoop};
use crate::dynamics::ProblemSpec;
use crate::error::{Error, Result};
use crate::symmetry::{unfold, GroupElement, Permutation, SymmetryGroup, TimeAction};

pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_GROUP_CAP: usize = 2048;

fn default_group_cap() -> usize {
    DEFAULT_GROUP_CAP
}

fn default_min_separation() -> f64 {
    1e-6
}

/// Serialized time action.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TauFile {
    pub kind: String,
    pub num: i64,
    pub den: i64,
}

impl TauFile {
    pub fn to_time_action(&self) -> Result<TimeAction> {
        match self.kind.as_str() {
            "rotation" => TimeAction::rotation(self.num, self.den),
            "reflection" => TimeAction::reflection(self.num, self.den),
            other => Err(Error::SchemaError {
                context: format!("unknown tau kind {other:?} (expected rotation or reflection)"),
            }),
        }
    }

    pub fn from_time_action(tau: &TimeAction) -> Self {
        let frac = tau.fraction();
        Self {
            kind: if tau.is_reflection() {
                "reflection".into()
            } else {
                "rotation".into()
            },
            num: *frac.numer(),
            den: *frac.denom(),
        }
    }
}

/// Serialized group generator: row-major `rho`, one-line `sigma`, rational tau.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GeneratorFile {
    pub rho: Vec<f64>,
    pub sigma: Vec<usize>,
    pub tau: TauFile,
}

impl GeneratorFile {
    pub fn to_element(&self, n: usize, d: usize) -> Result<GroupElement> {
        if self.rho.len() != d * d {
            return Err(Error::SchemaError {
                context: format!("rho must have {} entries (d = {d}), got {}", d * d, self.rho.len()),
            });
        }
        if self.sigma.len() != n {
            return Err(Error::SchemaError {
                context: format!("sigma must have {n} entries, got {}", self.sigma.len()),
            });
        }
        Ok(GroupElement::new(
            DMatrix::from_row_slice(d, d, &self.rho),
            Permutation::from_one_line(&self.sigma)?,
            self.tau.to_time_action()?,
        ))
    }

    pub fn from_element(g: &GroupElement) -> Self {
        let d = g.dimension();
        let mut rho = Vec::with_capacity(d * d);
        for r in 0..d {
            for c in 0..d {
                rho.push(g.rho[(r, c)]);
            }
        }
        Self {
            rho,
            sigma: g.sigma.one_line(),
            tau: TauFile::from_time_action(&g.tau),
        }
    }
}

/// On-disk problem definition.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProblemFile {
    pub format_version: u32,
    pub d: usize,
    pub masses: Vec<f64>,
    pub generators: Vec<GeneratorFile>,
    #[serde(default = "default_group_cap")]
    pub group_cap: usize,
    pub trig_modes: usize,
    pub fundamental_modes: usize,
    pub grid_size: usize,
    #[serde(default = "default_min_separation")]
    pub min_separation: f64,
}

impl ProblemFile {
    pub fn to_spec(&self) -> Result<ProblemSpec> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::SchemaError {
                context: format!(
                    "unsupported format_version {} (expected {FORMAT_VERSION})",
                    self.format_version
                ),
            });
        }
        let n = self.masses.len();
        let generators = self
            .generators
            .iter()
            .map(|g| g.to_element(n, self.d))
            .collect::<Result<Vec<_>>>()?;
        let group = SymmetryGroup::build(n, self.d, generators, self.group_cap)?;
        ProblemSpec::new(
            self.masses.clone(),
            self.d,
            group,
            self.trig_modes,
            self.fundamental_modes,
            self.grid_size,
            self.min_separation,
        )
    }

    pub fn from_spec(spec: &ProblemSpec) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            d: spec.d(),
            masses: spec.masses().to_vec(),
            generators: spec
                .group()
                .generators()
                .iter()
                .map(GeneratorFile::from_element)
                .collect(),
            group_cap: DEFAULT_GROUP_CAP,
            trig_modes: spec.trig_modes(),
            fundamental_modes: spec.fundamental_modes(),
            grid_size: spec.grid_size(),
            min_separation: spec.min_separation(),
        }
    }
}

/// Parse and validate a problem file.
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let file: ProblemFile = serde_json::from_str(text).map_err(schema_error)?;
    file.to_spec()
}

fn schema_error(e: serde_json::Error) -> Error {
    Error::SchemaError {
        context: e.to_string(),
    }
}

/// Orbit representation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Trig,
    Fundamental,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub tool_version: String,
}

impl Provenance {
    pub fn here(seed: Option<u64>, tolerance: Option<f64>) -> Self {
        Self {
            seed,
            tolerance,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Cached indicators, purely informational.
#[derive(Debug, Clone, Serialize, Deserialize, Default, PartialEq)]
pub struct Indicators {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gradient_norm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morse_fundamental: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub morse_period: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_multiplier: Option<f64>,
}

impl Indicators {
    pub fn is_empty(&self) -> bool {
        self.action.is_none()
            && self.gradient_norm.is_none()
            && self.morse_fundamental.is_none()
            && self.morse_period.is_none()
            && self.max_multiplier.is_none()
    }
}

/// One orbit per file: the problem, a representation tag and the
/// coefficient payload, plus provenance and optional cached indicators.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OrbitFile {
    pub format_version: u32,
    pub problem: ProblemFile,
    pub representation: Representation,
    #[serde(
        serialize_with = "serialize_coefficients",
        deserialize_with = "deserialize_coefficients"
    )]
    pub coefficients: Vec<f64>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicators: Option<Indicators>,
}

/// 17-significant-digit decimal serialization: every f64 round-trips
/// bitwise through the text form.
fn serialize_coefficients<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if !x.is_finite() {
            return Err(serde::ser::Error::custom("non-finite coefficient"));
        }
        let raw = serde_json::value::RawValue::from_string(format!("{x:.16e}"))
            .map_err(serde::ser::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

fn deserialize_coefficients<'de, D: Deserializer<'de>>(
    d: D,
) -> std::result::Result<Vec<f64>, D::Error> {
    Vec::<f64>::deserialize(d)
}

impl OrbitFile {
    pub fn from_str(text: &str) -> Result<Self> {
        let file: OrbitFile = serde_json::from_str(text).map_err(schema_error)?;
        Ok(file)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    /// Validate the schema and build the problem spec.
    pub fn spec(&self) -> Result<ProblemSpec> {
        let spec = self.problem.to_spec()?;
        let n = spec.n();
        let d = spec.d();
        let expected = match self.representation {
            Representation::Trig => (2 * spec.trig_modes() + 1) * n * d,
            Representation::Fundamental => (spec.fundamental_modes() + 2) * n * d,
        };
        if self.coefficients.len() != expected {
            return Err(Error::SchemaError {
                context: format!(
                    "coefficient payload has {} entries, expected {expected}",
                    self.coefficients.len()
                ),
            });
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::SchemaError {
                context: "coefficient payload contains non-finite values".into(),
            });
        }
        Ok(spec)
    }

    /// The orbit as a full-period trig loop, unfolding fundamental payloads.
    pub fn trig_loop(&self, spec: &ProblemSpec) -> Result<TrigLoop> {
        match self.representation {
            Representation::Trig => TrigLoop::new(
                spec.n(),
                spec.d(),
                spec.trig_modes(),
                spec.period(),
                DVector::from_vec(self.coefficients.clone()),
            ),
            Representation::Fundamental => {
                let path = FundamentalPath::new(
                    spec.n(),
                    spec.d(),
                    spec.fundamental_modes(),
                    DVector::from_vec(self.coefficients.clone()),
                )?;
                Ok(unfold(&path, spec)?.trig_loop)
            }
        }
    }

    pub fn from_trig_loop(
        spec: &ProblemSpec,
        lp: &TrigLoop,
        provenance: Provenance,
        indicators: Option<Indicators>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            problem: ProblemFile::from_spec(spec),
            representation: Representation::Trig,
            coefficients: lp.coeffs().as_slice().to_vec(),
            provenance,
            indicators,
        }
    }

    pub fn from_fundamental_path(
        spec: &ProblemSpec,
        path: &FundamentalPath,
        provenance: Provenance,
        indicators: Option<Indicators>,
    ) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            problem: ProblemFile::from_spec(spec),
            representation: Representation::Fundamental,
            coefficients: path.coeffs().as_slice().to_vec(),
            provenance,
            indicators,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_problem_json() -> String {
        r#"{
            "format_version": 1,
            "d": 2,
            "masses": [1.0, 1.0],
            "generators": [],
            "trig_modes": 4,
            "fundamental_modes": 4,
            "grid_size": 32
        }"#
        .to_string()
    }

    #[test]
    fn minimal_problem_parses() {
        let spec = parse_problem(&minimal_problem_json()).unwrap();
        assert_eq!(spec.n(), 2);
        assert_eq!(spec.group().order(), 1);
        assert_eq!(spec.min_separation(), 1e-6);
    }

    #[test]
    fn unequal_masses_under_swap_are_rejected() {
        let text = r#"{
            "format_version": 1,
            "d": 2,
            "masses": [1.0, 2.0],
            "generators": [
                {"rho": [1.0, 0.0, 0.0, 1.0], "sigma": [2, 1],
                 "tau": {"kind": "rotation", "num": 0, "den": 1}}
            ],
            "trig_modes": 4,
            "fundamental_modes": 4,
            "grid_size": 32
        }"#;
        assert!(matches!(
            parse_problem(text),
            Err(Error::MassOrbitMismatch { .. })
        ));
    }

    #[test]
    fn malformed_json_reports_schema_error() {
        let err = parse_problem("{ not json").unwrap_err();
        assert!(matches!(err, Error::SchemaError { .. }));
        assert_eq!(err.code(), "SchemaError");
    }

    #[test]
    fn orbit_file_round_trips_bitwise() {
        let spec = parse_problem(&minimal_problem_json()).unwrap();
        let mut lp = TrigLoop::zeros(2, 2, 4, spec.period());
        // Awkward values that stress the decimal round-trip.
        let vals = [0.1, 1.0 / 3.0, -2.0_f64.sqrt(), 1e-17, 6.02e23, -0.0];
        for (i, &v) in vals.iter().enumerate() {
            lp.coeffs_mut()[i] = v;
        }
        let orbit = OrbitFile::from_trig_loop(&spec, &lp, Provenance::here(Some(7), None), None);
        let text = orbit.to_json().unwrap();
        let parsed = OrbitFile::from_str(&text).unwrap();
        assert_eq!(parsed.coefficients.len(), orbit.coefficients.len());
        for (a, b) in orbit.coefficients.iter().zip(&parsed.coefficients) {
            assert_eq!(a.to_bits(), b.to_bits(), "{a} vs {b}");
        }
        // And the payload is decimal text with an exponent, not shortest-form.
        assert!(text.contains("e-1"));
    }

    #[test]
    fn orbit_with_wrong_payload_size_is_rejected() {
        let spec = parse_problem(&minimal_problem_json()).unwrap();
        let lp = TrigLoop::zeros(2, 2, 4, spec.period());
        let mut orbit = OrbitFile::from_trig_loop(&spec, &lp, Provenance::default(), None);
        orbit.coefficients.pop();
        assert!(matches!(orbit.spec(), Err(Error::SchemaError { .. })));
    }
}
