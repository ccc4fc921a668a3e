//! Experiment configuration: one JSON document per run. Every optional field
//! is filled with its default before the run, and that resolved document is
//! embedded in each output.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use subspace_sim::diagnostics::{ClassificationRule, DEFAULT_SAMPLES_PER_N};
use subspace_sim::shadows::{DEFAULT_BATCHES, DEFAULT_LOCALITY_BUDGET};
use subspace_sim::ParamDistribution;

use crate::error::CliError;

pub const CONFIG_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dla,
    Simulate,
    VarianceScan,
    ShadowsAcquire,
    ShadowsEstimate,
    Compare,
    Leakage,
    SplitAb,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dla => "dla",
            Experiment::Simulate => "simulate",
            Experiment::VarianceScan => "variance-scan",
            Experiment::ShadowsAcquire => "shadows-acquire",
            Experiment::ShadowsEstimate => "shadows-estimate",
            Experiment::Compare => "compare",
            Experiment::Leakage => "leakage",
            Experiment::SplitAb => "split-ab",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    Oracle,
    Gsim,
    Lightcone,
    Hamming,
    Matchgate,
    PauliProp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Builder {
    Hea,
    Matchgate,
    U1,
    Sn,
    TfimHva,
    Qcnn,
    ParityCascade,
}

/// Either a builder with its arguments or a circuit JSON file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builder: Option<Builder>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layers: Option<usize>,
    /// Brickwork offset seed for the HEA builder.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structure_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NamedObservable {
    /// `Z` on qubit 0.
    ZFirst,
    /// `Z` on qubit `n / 2`.
    ZMiddle,
    /// `Z` on every qubit.
    ZAll,
    TotalZ,
    TotalX,
    /// `Z Z` on the two qubits a QCNN keeps.
    QcnnReadout,
}

/// Pauli-sum text (`coeff word` per line) or a size-generic named observable.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Text(String),
    Named { named: NamedObservable },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceSpec {
    MaxWeight(usize),
    Support(Vec<usize>),
    MajoranaDegree(usize),
    ChargeConserving,
    PermutationInvariant,
    /// Span of the circuit's dynamical Lie algebra.
    LieSpan,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_weight: Option<usize>,
    #[serde(default)]
    pub min_coeff: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_terms: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    /// Computational-basis input, qubit 0 first, e.g. `"0110"`; default all zeros.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_bits: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<ParamDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engines: Option<Vec<Engine>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<TruncationSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<ClassificationRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cap: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shadow_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batches: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locality_budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subspace: Option<SubspaceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ks: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn schema_version() -> u32 {
    CONFIG_SCHEMA_VERSION
}

pub const DEFAULT_DIM_CAP: usize = 4096;
pub const DEFAULT_SAMPLES: usize = 20;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_SHOTS: usize = 1000;
pub const DEFAULT_SPLIT_SAMPLES: usize = 2000;
pub const DEFAULT_SHADOW_FILE: &str = "shadows.txt";

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config parses")
    }
}

impl ExperimentConfig {
    /// Parses with field-path diagnostics.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            // syntax errors have no meaningful field path
            let field = if path == "." || inner.is_syntax() || inner.is_eof() { "config".into() } else { path };
            CliError::schema(field, inner)
        })?;
        if cfg.schema_version != CONFIG_SCHEMA_VERSION {
            return Err(CliError::schema(
                "schema_version",
                format!("unsupported version {} (expected {CONFIG_SCHEMA_VERSION})", cfg.schema_version),
            ));
        }
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Fills the defaults the experiment reads, so the embedded config is explicit.
    pub fn resolve(&mut self, experiment: Experiment) -> Result<(), CliError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(CliError::schema(
                    "experiment",
                    format!("config is for `{}` but the command is `{}`", e.name(), experiment.name()),
                ));
            }
        }
        self.experiment = Some(experiment);
        let needs_params = matches!(
            experiment,
            Experiment::Simulate
                | Experiment::Compare
                | Experiment::VarianceScan
                | Experiment::Leakage
                | Experiment::ShadowsAcquire
        );
        if needs_params {
            self.distribution.get_or_insert_with(ParamDistribution::uniform_angle);
        }
        match experiment {
            Experiment::Dla => {
                self.dim_cap.get_or_insert(DEFAULT_DIM_CAP);
            }
            Experiment::Simulate => {
                self.engine.get_or_insert(Engine::Oracle);
                self.samples.get_or_insert(DEFAULT_SAMPLES);
                self.truncation.get_or_insert_with(TruncationSpec::default);
            }
            Experiment::Compare => {
                if self.engines.is_none() {
                    self.engines = Some(vec![self.engine.unwrap_or(Engine::PauliProp), Engine::Oracle]);
                }
                self.engine = None;
                self.samples.get_or_insert(DEFAULT_SAMPLES);
                self.tolerance.get_or_insert(DEFAULT_TOLERANCE);
                self.truncation.get_or_insert_with(TruncationSpec::default);
            }
            Experiment::VarianceScan => {
                self.engine.get_or_insert(Engine::Oracle);
                self.samples.get_or_insert(DEFAULT_SAMPLES_PER_N);
                self.rule.get_or_insert_with(ClassificationRule::default);
                self.truncation.get_or_insert_with(TruncationSpec::default);
            }
            Experiment::ShadowsAcquire => {
                self.shots.get_or_insert(DEFAULT_SHOTS);
                self.shadow_file.get_or_insert_with(|| DEFAULT_SHADOW_FILE.into());
            }
            Experiment::ShadowsEstimate => {
                self.batches.get_or_insert(DEFAULT_BATCHES);
                self.locality_budget.get_or_insert(DEFAULT_LOCALITY_BUDGET);
            }
            Experiment::Leakage => {
                self.samples.get_or_insert(DEFAULT_SAMPLES);
                self.dim_cap.get_or_insert(DEFAULT_DIM_CAP);
            }
            Experiment::SplitAb => {
                self.samples.get_or_insert(DEFAULT_SPLIT_SAMPLES);
                self.ks.get_or_insert_with(|| vec![1, 2, 3, 4]);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolved_config_round_trips() {
        let text = r#"{
            "seed": 9,
            "circuit": {"builder": "hea", "n": 4, "layers": 2},
            "observable": {"named": "z-first"},
            "truncation": {"max_weight": 3},
            "subspace": {"max-weight": 2}
        }"#;
        for e in [Experiment::Simulate, Experiment::Compare, Experiment::VarianceScan, Experiment::Leakage] {
            let mut c = ExperimentConfig::from_json(text).unwrap();
            c.resolve(e).unwrap();
            assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        }
        let mut c =
            ExperimentConfig::from_json(r#"{"observable": "1.0 XZ\n-0.5 YY", "subspace": "lie-span"}"#).unwrap();
        c.resolve(Experiment::Dla).unwrap();
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
    }

    #[test]
    fn schema_errors_carry_field_paths() {
        let err = ExperimentConfig::from_json(r#"{"circuit": {"builder": "hea", "n": "four"}}"#).unwrap_err();
        assert_eq!(err.field(), Some("circuit.n"));
        let err = ExperimentConfig::from_json(r#"{"circuit": {"bogus": 1}}"#).unwrap_err();
        assert_eq!(err.field(), Some("circuit.bogus"));
        let err = ExperimentConfig::from_json(r#"{"schema_version": 7}"#).unwrap_err();
        assert_eq!(err.field(), Some("schema_version"));
        let mut c = ExperimentConfig::from_json(r#"{"experiment": "dla"}"#).unwrap();
        assert_eq!(c.resolve(Experiment::Simulate).unwrap_err().field(), Some("experiment"));
    }
}
