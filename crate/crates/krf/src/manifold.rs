//! JSON form of manifold descriptions, builtin names and classes.

use krf_core::cohomology::{builtin, parse_rational};
use krf_core::{CohomologyClass, Divisor, KahlerCone, ManifoldDescription, PiRational, Rational};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// A rational written as a JSON integer, decimal or `"p/q"` string.
/// Strings may carry a power of π, e.g. `"8*pi"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(serde_json::Number),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Number(n) => n.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }

    pub fn rational(&self) -> Result<Rational, CliError> {
        Ok(parse_rational(&self.text())?)
    }

    pub fn pi_rational(&self) -> Result<PiRational, CliError> {
        Ok(self.text().parse::<PiRational>()?)
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Scalar::Text(s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DivisorSpec {
    pub name: String,
    pub class: Vec<Scalar>,
}

/// `{basis, canonical, divisors, cone, dim}` with optional interior witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitManifold {
    pub basis: Vec<String>,
    pub canonical: Vec<Scalar>,
    #[serde(default)]
    pub divisors: Vec<DivisorSpec>,
    pub cone: Vec<Vec<Scalar>>,
    pub dim: u32,
    #[serde(default)]
    pub witness: Option<Vec<Scalar>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ManifoldSpec {
    /// `"s2-1pt"`, `"s2xs2"` or `"cstar"`.
    Name(String),
    /// `{"builtin": "cpn-k", "n": 2, "k": 1}`.
    Builtin {
        builtin: String,
        #[serde(default)]
        n: Option<u32>,
        #[serde(default)]
        k: Option<u32>,
    },
    Explicit(ExplicitManifold),
}

fn rationals(values: &[Scalar]) -> Result<Vec<Rational>, CliError> {
    values.iter().map(Scalar::rational).collect()
}

fn expand_builtin(name: &str, n: Option<u32>, k: Option<u32>) -> Result<ManifoldDescription, CliError> {
    match name {
        "s2-1pt" => Ok(builtin::s2_one_point()),
        "s2xs2" => Ok(builtin::s2_times_s2()),
        "cstar" => Ok(builtin::cstar()),
        "cpn-k" => match (n, k) {
            (Some(n), Some(k)) if n >= 1 => Ok(builtin::cpn_with_hyperplanes(n, k)),
            _ => Err(CliError::Config(String::from("builtin cpn-k needs integer fields n >= 1 and k"))),
        },
        other => Err(CliError::Config(format!(
            "unknown builtin manifold {other:?} (expected s2-1pt, s2xs2, cpn-k or cstar)"
        ))),
    }
}

impl ManifoldSpec {
    pub fn builtin(name: &str) -> Self {
        ManifoldSpec::Name(name.to_string())
    }

    pub fn cpn(n: u32, k: u32) -> Self {
        ManifoldSpec::Builtin {
            builtin: String::from("cpn-k"),
            n: Some(n),
            k: Some(k),
        }
    }

    /// Short label for file names and summaries.
    pub fn label(&self) -> String {
        match self {
            ManifoldSpec::Name(n) => n.clone(),
            ManifoldSpec::Builtin { builtin, n, k } => match (n, k) {
                (Some(n), Some(k)) => format!("{builtin}(n={n},k={k})"),
                _ => builtin.clone(),
            },
            ManifoldSpec::Explicit(_) => String::from("explicit"),
        }
    }

    pub fn build(&self) -> Result<ManifoldDescription, CliError> {
        match self {
            ManifoldSpec::Name(name) => expand_builtin(name, None, None),
            ManifoldSpec::Builtin { builtin, n, k } => expand_builtin(builtin, *n, *k),
            ManifoldSpec::Explicit(m) => {
                let canonical = CohomologyClass::new(rationals(&m.canonical)?);
                let divisors = m
                    .divisors
                    .iter()
                    .map(|d| {
                        Ok(Divisor {
                            name: d.name.clone(),
                            class: CohomologyClass::new(rationals(&d.class)?),
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                let cone = KahlerCone::new(
                    m.cone
                        .iter()
                        .map(|row| rationals(row))
                        .collect::<Result<Vec<_>, _>>()?,
                )?;
                let desc = ManifoldDescription::new(m.basis.clone(), canonical, divisors, cone, m.dim)?;
                match &m.witness {
                    Some(w) => Ok(desc.with_witness(CohomologyClass::new(rationals(w)?))?),
                    None => Ok(desc),
                }
            }
        }
    }
}

/// Class from scalars sharing one power of π.
pub fn class_from(values: &[Scalar]) -> Result<CohomologyClass, CliError> {
    let scalars = values
        .iter()
        .map(Scalar::pi_rational)
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CohomologyClass::from_scalars(&scalars)?)
}
