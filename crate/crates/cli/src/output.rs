//! Output files and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use polardd::analytic::AnalyticPrediction;
use polardd::engine::DecaySeries;
use polardd::fitting::FitResult;
use polardd::io::{write_analytic_csv, write_decay_csv, DecayCsvOptions};
use polardd::jones::BlochVector;
use polardd::tomography::ReconstructionResult;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::spec::{ExperimentSpec, Format};
use crate::CliError;

fn bloch_json(b: &BlochVector) -> Value {
    json!([b.x, b.y, b.z])
}

pub fn series_bytes(series: &DecaySeries, format: Format, ns_per_round_trip: Option<f64>) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_decay_csv(&mut buf, series, &DecayCsvOptions { ns_per_round_trip })?;
            Ok(buf)
        }
        Format::Json => {
            let records: Vec<Value> = series
                .records
                .iter()
                .map(|r| {
                    let mut v = json!({
                        "n": r.n,
                        "half_cycle": r.half_cycle,
                        "round_trips": series.round_trips(r),
                        "purity": r.purity,
                        "fidelity": r.fidelity,
                        "bloch": bloch_json(&r.bloch),
                    });
                    if let Some(se) = r.purity_se {
                        v["purity_se"] = json!(se);
                    }
                    if let Some(ns) = ns_per_round_trip {
                        v["t_ns"] = json!(ns * series.round_trips(r) as f64);
                    }
                    v
                })
                .collect();
            let doc = json!({
                "label": series.label,
                "layout": series.layout.name(),
                "theta": series.theta,
                "phi0": series.dist.phi0,
                "sigma_phi": series.dist.sigma_phi,
                "method": series.method.name(),
                "input": series.input.as_ref().map(bloch_json),
                "records": records,
            });
            to_json(&doc)
        }
    }
}

pub fn analytic_bytes(pred: &AnalyticPrediction, format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            write_analytic_csv(&mut buf, pred)?;
            Ok(buf)
        }
        Format::Json => {
            let records: Vec<Value> = pred
                .records
                .iter()
                .map(|r| {
                    let rows: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| r.v[(i, j)]).collect()).collect();
                    json!({
                        "n": r.n,
                        "D_n": r.d,
                        "gamma_n": r.gamma,
                        "purity": r.purity,
                        "fidelity": r.fidelity,
                        "v": rows,
                    })
                })
                .collect();
            let c = &pred.coeffs;
            let axis = c.axis();
            let doc = json!({
                "sigma_phi": pred.sigma_phi,
                "input": bloch_json(&pred.input),
                "coefficients": {
                    "alpha0": c.alpha0,
                    "dalpha0": c.dalpha0,
                    "ddalpha0": c.ddalpha0,
                    "axis": [axis.x, axis.y, axis.z],
                    "degenerate": c.degenerate,
                    "trips_per_step": c.trips_per_step,
                },
                "records": records,
            });
            to_json(&doc)
        }
    }
}

pub fn reconstruction_bytes(rows: &[(u64, ReconstructionResult)], format: Format) -> Result<Vec<u8>, CliError> {
    match format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["n_trip", "purity", "px", "py", "pz", "loglik", "iterations", "converged"])?;
            for (n, r) in rows {
                let b = r.bloch();
                wtr.write_record([
                    n.to_string(),
                    r.rho.purity().to_string(),
                    b.x.to_string(),
                    b.y.to_string(),
                    b.z.to_string(),
                    r.loglik.to_string(),
                    r.iterations.to_string(),
                    r.converged.to_string(),
                ])?;
            }
            wtr.into_inner().map_err(|e| CliError::Io(e.into_error()))
        }
        Format::Json => {
            let recs: Vec<Value> = rows
                .iter()
                .map(|(n, r)| {
                    json!({
                        "n_trip": n,
                        "purity": r.rho.purity(),
                        "bloch": bloch_json(&r.bloch()),
                        "loglik": r.loglik,
                        "iterations": r.iterations,
                        "converged": r.converged,
                    })
                })
                .collect();
            to_json(&json!({ "records": recs }))
        }
    }
}

pub fn fit_bytes(fit: &FitResult, format: Format) -> Result<Vec<u8>, CliError> {
    let sd = |i: usize| fit.covariance[(i, i)].max(0.0).sqrt();
    match format {
        Format::Csv => {
            let mut wtr = csv::Writer::from_writer(Vec::new());
            wtr.write_record(["parameter", "value", "std_error"])?;
            wtr.write_record(["sigma_phi".to_string(), fit.sigma_phi.to_string(), sd(0).to_string()])?;
            if let Some(phi0) = fit.phi0 {
                wtr.write_record(["phi0".to_string(), phi0.to_string(), sd(1).to_string()])?;
            }
            wtr.write_record(["residual".to_string(), fit.residual.to_string(), String::new()])?;
            wtr.write_record(["iterations".to_string(), fit.iterations.to_string(), String::new()])?;
            wtr.write_record(["converged".to_string(), fit.converged.to_string(), String::new()])?;
            wtr.into_inner().map_err(|e| CliError::Io(e.into_error()))
        }
        Format::Json => to_json(&json!({
            "sigma_phi": fit.sigma_phi,
            "sigma_phi_std_error": sd(0),
            "phi0": fit.phi0,
            "phi0_std_error": fit.phi0.map(|_| sd(1)),
            "residual": fit.residual,
            "iterations": fit.iterations,
            "converged": fit.converged,
            "history": fit.history,
        })),
    }
}

fn to_json(v: &Value) -> Result<Vec<u8>, CliError> {
    let mut buf = serde_json::to_vec_pretty(v).map_err(|e| CliError::Numerical(format!("cannot encode JSON: {e}")))?;
    buf.push(b'\n');
    Ok(buf)
}

#[derive(Debug, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct InputEntry {
    pub label: String,
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command: `polardd <command> --config
/// manifest.toml` reads the `spec` table back.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub polardd_version: String,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<InputEntry>,
    pub outputs: Vec<OutputEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spec: Option<ExperimentSpec>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Collects output files under one directory and writes the manifest last.
pub struct RunWriter {
    dir: PathBuf,
    started: Instant,
    outputs: Vec<OutputEntry>,
    inputs: Vec<InputEntry>,
}

impl RunWriter {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            started: Instant::now(),
            outputs: Vec::new(),
            inputs: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.outputs.push(OutputEntry {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn record_input(&mut self, label: &str, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputEntry {
            label: label.to_string(),
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    pub fn finish(self, command: &str, preset: Option<String>, spec: Option<ExperimentSpec>) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            preset,
            seed: spec.as_ref().and_then(ExperimentSpec::seed),
            polardd_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            inputs: self.inputs,
            outputs: self.outputs,
            spec,
        };
        let text = toml::to_string(&manifest).map_err(|e| CliError::Numerical(format!("cannot encode manifest: {e}")))?;
        let path = self.dir.join("manifest.toml");
        fs::write(&path, text)?;
        Ok(path)
    }
}
