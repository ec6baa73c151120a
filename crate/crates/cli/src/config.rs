//! Run configuration files.

use std::fs;
use std::path::Path;

use anyhow::Context;
use ldplab_core::configurations::PointConfiguration;
use ldplab_core::projections::compare_ball_vs_product;
use ldplab_core::verify::{
    run_clt_check, run_dickey_check, run_ldp_configuration, run_ldp_corner, CltReport, DickeyReport,
};
use ldplab_core::{LdpExperiment, SeededRng, SlopeReport};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::UsageError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    pub output_path: String,
    pub experiment: Experiment,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let config: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("{}: {e}", path.display())))?;
        if config.schema_version != SCHEMA_VERSION {
            return Err(UsageError(format!(
                "unsupported schema_version {}, expected {SCHEMA_VERSION}",
                config.schema_version
            ))
            .into());
        }
        Ok(config)
    }
}

/// Parameter block of one experiment, tagged by its name.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    LdpCorner(LdpExperiment),
    LdpConfiguration(ConfigurationExperiment),
    Dickey(DickeyParams),
    Clt(CltParams),
    Compare(CompareParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigurationExperiment {
    pub k: usize,
    pub target: PointConfiguration,
    pub r: f64,
    pub rho: f64,
    pub n_values: Vec<usize>,
    pub samples_per_n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DickeyParams {
    pub k: usize,
    pub m: usize,
    pub n: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltParams {
    pub k: usize,
    #[serde(serialize_with = "write_exponent", deserialize_with = "read_exponent")]
    pub p: f64,
    pub n: usize,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareParams {
    pub k: usize,
    #[serde(serialize_with = "write_exponent", deserialize_with = "read_exponent")]
    pub p: f64,
    pub n_values: Vec<usize>,
    pub count: usize,
}

// JSON has no infinity, so `p = ∞` travels as the string "inf".
pub fn write_exponent<S: Serializer>(p: &f64, s: S) -> Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

fn read_exponent<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(p) => Ok(p),
        Raw::Str(s) => match s.as_str() {
            "inf" | "infinity" => Ok(f64::INFINITY),
            _ => Err(serde::de::Error::custom(format!("bad exponent {s:?}"))),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Outcome {
    Slope(SlopeReport),
    Dickey(DickeyReport),
    Clt(CltReport),
    Compare(Vec<ComparePoint>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComparePoint {
    pub n: usize,
    pub distance: f64,
}

impl Outcome {
    /// Plot-ready table, for the outcomes that have one.
    pub fn to_csv(&self) -> Option<String> {
        match self {
            Outcome::Slope(report) => Some(report.to_csv()),
            Outcome::Compare(points) => {
                let mut out = String::from("n,distance\n");
                for p in points {
                    out.push_str(&format!("{},{}\n", p.n, p.distance));
                }
                Some(out)
            }
            Outcome::Dickey(_) | Outcome::Clt(_) => None,
        }
    }
}

impl Experiment {
    pub fn run(&self, seed: u64) -> ldplab_core::Result<Outcome> {
        let rng = &mut SeededRng::new(seed, 0);
        Ok(match self {
            Experiment::LdpCorner(exp) => Outcome::Slope(run_ldp_corner(rng, exp)?),
            Experiment::LdpConfiguration(exp) => Outcome::Slope(run_ldp_configuration(
                rng,
                exp.k,
                &exp.target,
                exp.r,
                exp.rho,
                &exp.n_values,
                exp.samples_per_n,
            )?),
            Experiment::Dickey(d) => {
                Outcome::Dickey(run_dickey_check(rng, d.k, d.m, d.n, d.samples)?)
            }
            Experiment::Clt(c) => Outcome::Clt(run_clt_check(rng, c.k, c.p, c.n, c.samples)?),
            Experiment::Compare(c) => Outcome::Compare(
                compare_ball_vs_product(rng, c.k, c.p, &c.n_values, c.count)?
                    .into_iter()
                    .map(|(n, distance)| ComparePoint { n, distance })
                    .collect(),
            ),
        })
    }
}
