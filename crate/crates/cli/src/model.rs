//! On-disk model and calibration files.

use std::path::Path;

use clearn::calibration::{CalibrationFit, PlattFit};
use clearn::io::write_atomic;
use clearn::kernels::KernelSpec;
use clearn::select::CvResult;
use clearn::solver::{KernelModel, LinearModel, Scorer, TrainConfig};
use clearn::{Error, Result};
use ndarray::{Array1, Array2, ArrayView2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Kernel,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub kind: ModelKind,
    /// `c_learning` or `svm`.
    pub method: String,
    pub offset: f64,
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    /// Training inputs, one row each (kernel models only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<Vec<Vec<f64>>>,
    pub config: TrainConfig,
    pub converged: bool,
    pub outer_iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<CvResult>,
}

pub enum Model {
    Kernel(KernelModel),
    Linear(LinearModel),
}

impl Model {
    pub fn scores(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        match self {
            Model::Kernel(m) => m.score_rows(x),
            Model::Linear(m) => m.score_rows(x),
        }
    }
}

impl ModelFile {
    pub fn from_kernel(model: &KernelModel, method: &str, config: TrainConfig, converged: bool, outer: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: ModelKind::Kernel,
            method: method.into(),
            offset: model.alpha,
            coefficients: model.beta.to_vec(),
            kernel: Some(model.spec),
            support: Some(model.support.rows().into_iter().map(|r| r.to_vec()).collect()),
            config,
            converged,
            outer_iterations: outer,
            cv: None,
        }
    }

    pub fn from_linear(model: &LinearModel, config: TrainConfig, converged: bool, outer: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            kind: ModelKind::Linear,
            method: "c_learning".into(),
            offset: model.a,
            coefficients: model.b.to_vec(),
            kernel: None,
            support: None,
            config,
            converged,
            outer_iterations: outer,
            cv: None,
        }
    }

    pub fn model(&self) -> Result<Model> {
        let beta = Array1::from(self.coefficients.clone());
        match self.kind {
            ModelKind::Linear => Ok(Model::Linear(LinearModel { a: self.offset, b: beta })),
            ModelKind::Kernel => {
                let spec = self.kernel.ok_or_else(|| invalid("kernel model without kernel spec"))?;
                spec.validate()?;
                let rows = self.support.as_ref().ok_or_else(|| invalid("kernel model without support inputs"))?;
                let d = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|r| r.len() != d) {
                    return Err(invalid("ragged support inputs"));
                }
                let support = Array2::from_shape_vec((rows.len(), d), rows.concat())
                    .map_err(|e| invalid(&format!("support inputs: {e}")))?;
                if support.nrows() != beta.len() {
                    return Err(Error::DimensionMismatch { expected: support.nrows(), found: beta.len() });
                }
                Ok(Model::Kernel(KernelModel { alpha: self.offset, beta, spec, support }))
            }
        }
    }
}

/// Result of `calibrate`: the fitted coherence link plus a Platt fit on the
/// same scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub schema_version: u32,
    pub rho_hat: f64,
    pub ekl: f64,
    pub iterations: usize,
    pub platt: PlattFit,
    pub n: usize,
}

impl CalibrationFile {
    pub fn new(fit: &CalibrationFit, platt: PlattFit, n: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            rho_hat: fit.rho_hat,
            ekl: fit.ekl_value,
            iterations: fit.iterations,
            platt,
            n,
        }
    }
}

fn invalid(msg: &str) -> Error {
    Error::InvalidInput(msg.to_string())
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_atomic(path, s.as_bytes())
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    let version: serde_json::Value = serde_json::from_str(&text)?;
    match version.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(version)?),
        Some(v) => Err(invalid(&format!("{}: unsupported schema version {v}", path.display()))),
        None => Err(invalid(&format!("{}: missing schema_version", path.display()))),
    }
}
