//! K-fold cross-validation over a `(gamma, omega)` grid.

use ndarray::Array1;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{cer, ThresholdMode};

pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub gammas: Vec<f64>,
    pub omegas: Vec<f64>,
}

impl CvGrid {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.omegas.is_empty() {
            return Err(Error::InvalidParameter("empty cross-validation grid".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvCell {
    pub gamma: f64,
    pub omega: f64,
    pub mean_cer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub gamma: f64,
    pub omega: f64,
    pub mean_cer: f64,
    pub cells: Vec<CvCell>,
}

/// Stratified fold assignment: each class is shuffled and dealt round-robin,
/// so every fold sees both classes whenever each class has `k` members.
pub fn kfold_indices(labels: &[f64], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let n = labels.len();
    if k < 2 || k > n {
        return Err(Error::InvalidParameter(format!("cannot make {k} folds from {n} samples")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos: Vec<usize> = (0..n).filter(|&i| labels[i] > 0.0).collect();
    let mut neg: Vec<usize> = (0..n).filter(|&i| labels[i] <= 0.0).collect();
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut folds = vec![Vec::new(); k];
    for (slot, i) in pos.into_iter().chain(neg).enumerate() {
        folds[slot % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Select `(gamma, omega)` by mean validation CER (sign of the score).
///
/// `fit_score(train, valid, gamma, omega)` fits on `train` and returns
/// scores on `valid`. Ties go to the larger `gamma`, then to the earlier
/// `omega` in grid order.
pub fn cv_select<F>(data: &Dataset, grid: &CvGrid, folds: usize, seed: u64, fit_score: F) -> Result<CvResult>
where
    F: Fn(&Dataset, &Dataset, f64, f64) -> Result<Array1<f64>>,
{
    grid.validate()?;
    let assignment = kfold_indices(data.y().as_slice().expect("contiguous labels"), folds, seed)?;
    let splits: Vec<(Dataset, Dataset)> = (0..folds)
        .map(|v| {
            let train: Vec<usize> = (0..folds).filter(|&f| f != v).flat_map(|f| assignment[f].iter().copied()).collect();
            (data.subset(&train, "cv-train"), data.subset(&assignment[v], "cv-valid"))
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.gammas.len() * grid.omegas.len());
    for &gamma in &grid.gammas {
        for &omega in &grid.omegas {
            let mut total = 0.0;
            for (train, valid) in &splits {
                let scores = fit_score(train, valid, gamma, omega)?;
                total += cer(scores.as_slice().expect("contiguous"), valid.y().as_slice().expect("contiguous"), ThresholdMode::Score)?;
            }
            cells.push(CvCell { gamma, omega, mean_cer: total / folds as f64 });
        }
    }
    let mut best = cells[0];
    for c in &cells[1..] {
        if c.mean_cer < best.mean_cer || (c.mean_cer == best.mean_cer && c.gamma > best.gamma) {
            best = *c;
        }
    }
    Ok(CvResult { gamma: best.gamma, omega: best.omega, mean_cer: best.mean_cer, cells })
}
