//! Experiment runner behind the `toffoli` binary.
//!
//! Each pipeline writes JSON artifacts (plus a CSV for truth tables) into
//! the output directory and returns a one-line summary. Every stochastic
//! step draws from streams derived from the configured seed, so repeated
//! runs produce identical bytes regardless of thread count.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::certify::{
    enumerate_relevant_paulis, exhaustive_fidelity_with, monte_carlo_fidelity_with,
    CertificationReport, ChoiMatrix, EigenstateTable, McOptions,
};
use crate::error::{Error, Result};
use crate::gates::{
    ccphase_circuit, ccphase_trace, toffoli_circuit, truth_table, truth_table_fidelity, Circuit,
};
use crate::noise::{DeviceConfig, NoiseModel, NoisyCircuit};
use crate::tomography::{
    bootstrap_ci, ml_projection, process_tomography, ChiMatrix, ChiMetadata, ConfidenceInterval,
    Sampling,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    TruthTable,
    ProcessTomo,
    Certify,
    Table1Trace,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::TruthTable => "truth-table",
            Pipeline::ProcessTomo => "process-tomo",
            Pipeline::Certify => "certify",
            Pipeline::Table1Trace => "table1-trace",
        }
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Pipeline::TruthTable,
            Pipeline::ProcessTomo,
            Pipeline::Certify,
            Pipeline::Table1Trace,
        ]
        .into_iter()
        .find(|p| p.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown pipeline `{s}`")))
    }
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NoiseSource {
    Ideal,
    /// Measured device constants, or overrides from a config file.
    Device(Option<PathBuf>),
}

impl NoiseSource {
    pub fn model(&self) -> Result<NoiseModel> {
        match self {
            NoiseSource::Ideal => Ok(NoiseModel::disabled()),
            NoiseSource::Device(None) => Ok(NoiseModel::device()),
            NoiseSource::Device(Some(path)) => DeviceConfig::load(path)?.noise_model(),
        }
    }

    fn describe(&self) -> String {
        match self {
            NoiseSource::Ideal => "ideal".into(),
            NoiseSource::Device(None) => "device".into(),
            NoiseSource::Device(Some(path)) => format!("custom:{}", path.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub pipeline: Pipeline,
    pub noise: NoiseSource,
    /// Repetitions per measurement setting; 0 means exact expectations.
    pub shots: u64,
    /// Monte Carlo draws for certification.
    pub samples: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Bootstrap replicas for the tomography confidence interval.
    pub resamples: usize,
}

impl RunConfig {
    pub fn new(pipeline: Pipeline, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            pipeline,
            noise: NoiseSource::Ideal,
            shots: 0,
            samples: 10_000,
            seed: 0,
            out_dir: out_dir.into(),
            resamples: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.pipeline == Pipeline::Certify && self.samples == 0 {
            return Err(Error::Config("certify needs --samples >= 1".into()));
        }
        if self.pipeline == Pipeline::ProcessTomo && self.shots > 0 && self.resamples < 2 {
            return Err(Error::Config("bootstrap needs at least 2 resamples".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub line: String,
    pub artifacts: Vec<PathBuf>,
}

#[derive(Serialize)]
struct RunInfo<'a> {
    pipeline: &'a str,
    noise: String,
    shots: u64,
    seed: u64,
}

#[derive(Serialize)]
struct TruthTableReport<'a> {
    run: RunInfo<'a>,
    fidelity: f64,
    diagonal: Vec<f64>,
    inputs: Vec<String>,
    matrix: &'a [Vec<f64>],
}

#[derive(Serialize)]
struct TomographyReport<'a> {
    run: RunInfo<'a>,
    fidelity_raw: f64,
    fidelity_ml: f64,
    trace_deficit: f64,
    leakage: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    confidence_interval: Option<ConfidenceInterval>,
}

#[derive(Serialize)]
struct CertifyArtifact<'a> {
    run: RunInfo<'a>,
    #[serde(flatten)]
    report: CertificationReport,
}

struct Writer<'a> {
    dir: &'a Path,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, body)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_string_pretty(value)?;
        body.push('\n');
        self.text(name, &body)
    }
}

/// Runs one pipeline and writes its artifacts.
pub fn run(config: &RunConfig) -> Result<RunSummary> {
    config.validate()?;
    let model = config.noise.model()?;
    fs::create_dir_all(&config.out_dir)?;
    let mut out = Writer {
        dir: &config.out_dir,
        written: Vec::new(),
    };
    let info = || RunInfo {
        pipeline: config.pipeline.name(),
        noise: config.noise.describe(),
        shots: config.shots,
        seed: config.seed,
    };
    let channel = |circuit: Circuit| NoisyCircuit::new(circuit, model.clone());

    let line = match config.pipeline {
        Pipeline::Table1Trace => {
            let circuit = ccphase_circuit();
            out.json("circuit.json", &circuit.to_document())?;
            let trace = ccphase_trace()?;
            out.json("table1_trace.json", &trace)?;
            format!(
                "trace: {} inputs x {} steps",
                trace.len(),
                circuit.ops().len()
            )
        }
        Pipeline::TruthTable => {
            let circuit = toffoli_circuit();
            out.json("circuit.json", &circuit.to_document())?;
            let mut tt = truth_table(&channel(circuit))?;
            if config.shots > 0 {
                tt = tt.sampled(config.shots, config.seed);
            }
            let fidelity = truth_table_fidelity(&tt);
            out.text("truth_table.csv", &tt.to_csv())?;
            out.json(
                "truth_table.json",
                &TruthTableReport {
                    run: info(),
                    fidelity,
                    diagonal: tt.diagonal_weights(),
                    inputs: (0..8).map(|i| format!("{i:03b}")).collect(),
                    matrix: &tt.matrix,
                },
            )?;
            format!("F={fidelity:.4}")
        }
        Pipeline::ProcessTomo => {
            let circuit = toffoli_circuit();
            out.json("circuit.json", &circuit.to_document())?;
            let ideal = ChiMatrix::ideal_toffoli();
            let result = process_tomography(
                &channel(circuit),
                Sampling::from_shots(config.shots),
                config.seed,
            )?;
            let ml = ml_projection(&result.chi)?;
            let ci = if config.shots > 0 {
                Some(bootstrap_ci(
                    &result.records,
                    &ideal,
                    0.95,
                    config.resamples,
                    config.seed,
                )?)
            } else {
                None
            };
            let mut raw_meta = ChiMetadata::describe(&result.chi, "raw", &ideal);
            raw_meta.confidence_interval = ci;
            let ml_meta = ChiMetadata::describe(&ml, "ml", &ideal);
            let (f_raw, f_ml) = (raw_meta.fidelity_to_ideal, ml_meta.fidelity_to_ideal);
            out.json("chi_raw.json", &result.chi.to_document(raw_meta))?;
            out.json("chi_ml.json", &ml.to_document(ml_meta))?;
            out.json(
                "tomography.json",
                &TomographyReport {
                    run: info(),
                    fidelity_raw: f_raw,
                    fidelity_ml: f_ml,
                    trace_deficit: result.trace_deficit(),
                    leakage: &result.leakage,
                    confidence_interval: ci,
                },
            )?;
            match ci {
                Some(ci) => format!(
                    "F={f_ml:.4} (raw {f_raw:.4}, 95% CI [{:.4}, {:.4}])",
                    ci.low, ci.high
                ),
                None => format!("F={f_ml:.4} (raw {f_raw:.4})"),
            }
        }
        Pipeline::Certify => {
            let circuit = toffoli_circuit();
            out.json("circuit.json", &circuit.to_document())?;
            let target = ChoiMatrix::ideal_toffoli();
            let relevant = enumerate_relevant_paulis(&target);
            let table = EigenstateTable::build(&channel(circuit))?;
            let options = McOptions {
                samples: config.samples,
                seed: config.seed,
                sampling: Sampling::from_shots(config.shots),
            };
            let estimate = monte_carlo_fidelity_with(&table, &relevant, options)?;
            let report = CertificationReport {
                relevant_count: relevant.len(),
                estimate: estimate.estimate,
                std_error: estimate.std_error,
                exhaustive: exhaustive_fidelity_with(&table, &relevant),
                seed: config.seed,
                samples: estimate.samples,
                shots: config.shots,
                strings: estimate.per_observable,
            };
            out.json(
                "certify.json",
                &CertifyArtifact {
                    run: info(),
                    report,
                },
            )?;
            format!(
                "F={:.4} ± {:.4} ({} samples over {} strings)",
                estimate.estimate,
                estimate.std_error,
                config.samples,
                relevant.len()
            )
        }
    };
    Ok(RunSummary {
        line: format!("{}: {line}", config.pipeline),
        artifacts: out.written,
    })
}
