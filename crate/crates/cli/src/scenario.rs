//! Scenario documents: named kernels plus exactly one task.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use maclim::chamber::ChamberConfig;
use maclim::grid::TimeGrid;
use maclim::propagators::{DrudeLags, DrudeModel, DrudeTimeNormalization, DrudeTimeOptions, OscillatorModel};
use maclim::qclt::SingleSystemLaw;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    /// Relative paths resolve against the working directory.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub kernels: BTreeMap<String, KernelDef>,
    pub task: Task,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelDef {
    Drude {
        m: f64,
        lambda: f64,
        cutoff: f64,
        #[serde(default)]
        normalization: DrudeTimeNormalization,
    },
    Oscillator {
        m: f64,
        omega0: f64,
        #[serde(default)]
        epsilon: Option<f64>,
    },
}

/// A kernel definition resolved into a model that can be sampled.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelModel {
    Drude(DrudeLags),
    Oscillator(OscillatorModel),
}

impl KernelDef {
    pub fn model(&self) -> maclim::Result<KernelModel> {
        Ok(match *self {
            KernelDef::Drude {
                m,
                lambda,
                cutoff,
                normalization,
            } => KernelModel::Drude(DrudeLags {
                model: DrudeModel::new(m, lambda, cutoff)?,
                options: DrudeTimeOptions {
                    normalization,
                    ..DrudeTimeOptions::default()
                },
            }),
            KernelDef::Oscillator { m, omega0, epsilon } => KernelModel::Oscillator(match epsilon {
                Some(e) => OscillatorModel::with_epsilon(m, omega0, e)?,
                None => OscillatorModel::new(m, omega0)?,
            }),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub n: usize,
}

impl GridSpec {
    pub fn time_grid(&self) -> maclim::Result<TimeGrid> {
        TimeGrid::new(self.start, self.end, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub kernel: String,
    pub g: f64,
    pub kappa: f64,
}

/// Classical system trajectory fed to the pointer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Signal {
    Sine {
        amplitude: f64,
        omega: f64,
        #[serde(default)]
        phase: f64,
    },
    Constant {
        value: f64,
    },
}

impl Signal {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            Signal::Sine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).sin(),
            Signal::Constant { value } => value,
        }
    }
}

fn default_hbar() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Task {
    /// Monte-Carlo variance of the ensemble average against the Gaussian limit.
    CltSweep {
        law: SingleSystemLaw,
        n_s: Vec<usize>,
        samples: usize,
    },
    /// Single and double observation laws over `(N_s, tau)`.
    TwoObservation {
        kernel: String,
        n_s: Vec<f64>,
        tau: Vec<f64>,
        #[serde(default = "default_hbar")]
        hbar: f64,
    },
    /// Deviation of the dressed apparatus mode from the bare one.
    DressingSweep {
        mode_kernel: String,
        system_kernel: String,
        grid: GridSpec,
        g: f64,
        kappa: f64,
        n_s: Vec<usize>,
    },
    /// Pointer trajectory and variance, optionally for a discrete schedule.
    Pointer {
        system_kernel: String,
        grid: GridSpec,
        modes: Vec<ModeSpec>,
        n_s: usize,
        signal: Signal,
        #[serde(default)]
        measurement_times: Option<Vec<f64>>,
        #[serde(default = "default_hbar")]
        hbar: f64,
    },
    /// Droplet chains over consecutive seeds starting at the scenario seed.
    Chamber { config: ChamberConfig, runs: u64 },
}

impl Task {
    pub fn kind(&self) -> &'static str {
        match self {
            Task::CltSweep { .. } => "clt_sweep",
            Task::TwoObservation { .. } => "two_observation",
            Task::DressingSweep { .. } => "dressing_sweep",
            Task::Pointer { .. } => "pointer",
            Task::Chamber { .. } => "chamber",
        }
    }
}

/// Parsed scenario together with the hash of its source bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub config_hash: String,
    pub path: PathBuf,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load(path: &Path) -> Result<LoadedScenario> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let scenario = parse(&bytes).map_err(|e| match e {
        CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })?;
    Ok(LoadedScenario {
        scenario,
        config_hash: sha256_hex(&bytes),
        path: path.to_path_buf(),
    })
}

pub fn parse(bytes: &[u8]) -> Result<Scenario> {
    let s: Scenario = serde_json::from_slice(bytes).map_err(|e| CliError::Config(e.to_string()))?;
    s.validate()?;
    Ok(s)
}

fn config(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{field}: {msg}"))
}

fn nonempty<T>(field: &str, v: &[T]) -> Result<()> {
    if v.is_empty() {
        Err(config(field, "must not be empty"))
    } else {
        Ok(())
    }
}

impl Scenario {
    pub fn resolve(&self, field: &str, name: &str) -> Result<KernelModel> {
        let def = self
            .kernels
            .get(name)
            .ok_or_else(|| config(field, format!("unknown kernel \"{name}\"")))?;
        def.model().map_err(|e| config(&format!("kernels.{name}"), e))
    }

    /// Checks everything that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() {
            return Err(config("name", "must not be empty"));
        }
        for (name, def) in &self.kernels {
            def.model().map_err(|e| config(&format!("kernels.{name}"), e))?;
        }
        match &self.task {
            Task::CltSweep { law, n_s, samples } => {
                law.validate().map_err(|e| config("task.law", e))?;
                nonempty("task.n_s", n_s)?;
                if n_s.contains(&0) {
                    return Err(config("task.n_s", "ensemble sizes must be positive"));
                }
                if *samples < 2 {
                    return Err(config("task.samples", "need at least two samples"));
                }
            }
            Task::TwoObservation { kernel, n_s, tau, hbar } => {
                self.resolve("task.kernel", kernel)?;
                nonempty("task.n_s", n_s)?;
                nonempty("task.tau", tau)?;
                if n_s.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(config("task.n_s", "ensemble sizes must be positive"));
                }
                if tau.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(config("task.tau", "spacings must be positive"));
                }
                if !hbar.is_finite() || *hbar <= 0.0 {
                    return Err(config("task.hbar", "must be positive"));
                }
            }
            Task::DressingSweep {
                mode_kernel,
                system_kernel,
                grid,
                n_s,
                ..
            } => {
                self.resolve("task.mode_kernel", mode_kernel)?;
                self.resolve("task.system_kernel", system_kernel)?;
                grid.time_grid().map_err(|e| config("task.grid", e))?;
                nonempty("task.n_s", n_s)?;
                if n_s.contains(&0) {
                    return Err(config("task.n_s", "ensemble sizes must be positive"));
                }
            }
            Task::Pointer {
                system_kernel,
                grid,
                modes,
                n_s,
                measurement_times,
                hbar,
                ..
            } => {
                self.resolve("task.system_kernel", system_kernel)?;
                let tg = grid.time_grid().map_err(|e| config("task.grid", e))?;
                nonempty("task.modes", modes)?;
                for (i, m) in modes.iter().enumerate() {
                    self.resolve(&format!("task.modes[{i}].kernel"), &m.kernel)?;
                }
                if *n_s == 0 {
                    return Err(config("task.n_s", "must be positive"));
                }
                if !hbar.is_finite() || *hbar <= 0.0 {
                    return Err(config("task.hbar", "must be positive"));
                }
                if let Some(times) = measurement_times {
                    maclim::measure::MeasurementSchedule::new(times.clone())
                        .map_err(|e| config("task.measurement_times", e))?;
                    if times.iter().any(|&t| t < tg.start() || t > tg.end()) {
                        return Err(config("task.measurement_times", "times must lie on the grid span"));
                    }
                }
            }
            Task::Chamber { config: cfg, runs } => {
                cfg.validate().map_err(|e| config("task.config", e))?;
                if *runs == 0 {
                    return Err(config("task.runs", "must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Scenario files in `dir`, sorted by path.
pub fn discover(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "clt",
        "seed": 1,
        "task": {"type": "clt_sweep", "law": {"law": "uniform", "low": 0, "high": 1}, "n_s": [1, 10], "samples": 100}
    }"#;

    #[test]
    fn minimal_scenario_parses() {
        let s = parse(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.task.kind(), "clt_sweep");
    }

    #[test]
    fn malformed_json_reports_position() {
        let err = parse(b"{\n  \"name\": \"x\",\n  \"seed\": }").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn unknown_kernel_is_named() {
        let doc = r#"{"name": "t", "seed": 0, "task": {"type": "two_observation", "kernel": "nope", "n_s": [1], "tau": [1]}}"#;
        let err = parse(doc.as_bytes()).unwrap_err();
        assert!(
            err.to_string().contains("task.kernel") && err.to_string().contains("nope"),
            "{err}"
        );
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let doc = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"sede\": 2");
        assert!(parse(doc.as_bytes()).is_err());
    }

    #[test]
    fn invalid_model_parameter_is_a_config_error() {
        let doc = r#"{"name": "t", "seed": 0, "kernels": {"k": {"model": "drude", "m": -1, "lambda": 1, "cutoff": 1}},
            "task": {"type": "two_observation", "kernel": "k", "n_s": [1], "tau": [1]}}"#;
        let err = parse(doc.as_bytes()).unwrap_err();
        assert!(err.to_string().contains("kernels.k"), "{err}");
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
