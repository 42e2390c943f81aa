//! Datasets, the two simulation generators with known class probabilities,
//! CSV persistence and seeded train/test splits.
//!
//! CSV schema: header `f0,...,f{d-1},y[,eta]`, one sample per row, labels
//! in `{-1, 1}`, `eta` the probability of class +1 when known.

use std::f64::consts::PI;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::loss::sigmoid;

/// Feature matrix with ±1 labels and, for simulated data, the true
/// probability of class +1 at each input.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Array2<f64>,
    y: Array1<f64>,
    true_eta: Option<Array1<f64>>,
    pub name: String,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Array1<f64>, true_eta: Option<Array1<f64>>, name: impl Into<String>) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.nrows(), found: y.len() });
        }
        if let Some(bad) = y.iter().find(|&&v| v != 1.0 && v != -1.0) {
            return Err(Error::InvalidInput(format!("label {bad} is not -1 or 1")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("features must be finite".into()));
        }
        if let Some(eta) = &true_eta {
            if eta.len() != y.len() {
                return Err(Error::DimensionMismatch { expected: y.len(), found: eta.len() });
            }
            if let Some(bad) = eta.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::InvalidInput(format!("true eta {bad} outside [0, 1]")));
            }
        }
        Ok(Self { x, y, true_eta, name: name.into() })
    }

    pub fn x(&self) -> &Array2<f64> {
        &self.x
    }

    pub fn y(&self) -> &Array1<f64> {
        &self.y
    }

    pub fn true_eta(&self) -> Option<&Array1<f64>> {
        self.true_eta.as_ref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn has_both_classes(&self) -> bool {
        self.y.iter().any(|&v| v > 0.0) && self.y.iter().any(|&v| v < 0.0)
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize], name: impl Into<String>) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(Axis(0), idx),
            true_eta: self.true_eta.as_ref().map(|e| e.select(Axis(0), idx)),
            name: name.into(),
        }
    }
}

/// Uniform points on the unit disk, labelled by the sign of the first
/// coordinate, with exactly `round(flip_fraction * n)` labels flipped.
pub fn gen_disk(n: usize, flip_fraction: f64, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    if !(0.0..=0.5).contains(&flip_fraction) {
        return Err(Error::InvalidParameter(format!("flip fraction {flip_fraction} outside [0, 0.5]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Array2::zeros((n, 2));
    for mut row in x.rows_mut() {
        loop {
            let a: f64 = rng.random_range(-1.0..=1.0);
            let b: f64 = rng.random_range(-1.0..=1.0);
            if a * a + b * b <= 1.0 {
                row[0] = a;
                row[1] = b;
                break;
            }
        }
    }
    let mut y: Array1<f64> = x.column(0).mapv(|v| if v >= 0.0 { 1.0 } else { -1.0 });
    let n_flip = (flip_fraction * n as f64).round() as usize;
    for i in rand::seq::index::sample(&mut rng, n, n_flip) {
        y[i] = -y[i];
    }
    let eta = x.column(0).mapv(|v| if v >= 0.0 { 1.0 - flip_fraction } else { flip_fraction });
    Dataset::new(x, y, Some(eta), format!("disk-{seed}"))
}

const SINE_NOISE_VAR: f64 = 0.01;

/// `P(Y = +1 | x)` for the sine data: the ratio of normal densities with
/// means `±(sin x1 + 1)` and variance 0.01 at `x2`.
pub fn true_eta_sine(x1: f64, x2: f64) -> f64 {
    let m = x1.sin() + 1.0;
    // log N(x2 | m) - log N(x2 | -m) = 2 x2 m / var
    sigmoid(2.0 * x2 * m / SINE_NOISE_VAR)
}

/// Equiprobable labels, `x1 ~ U[0, 2pi]`, `x2 = y (sin x1 + eps)` with
/// `eps ~ N(1, 0.01)` (variance).
pub fn gen_sine(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(1.0, SINE_NOISE_VAR.sqrt()).expect("valid normal");
    let mut x = Array2::zeros((n, 2));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let label = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let x1 = rng.random_range(0.0..2.0 * PI);
        let eps = noise.sample(&mut rng);
        x[[i, 0]] = x1;
        x[[i, 1]] = label * (x1.sin() + eps);
        y[i] = label;
    }
    let eta = Array1::from_iter(x.rows().into_iter().map(|r| true_eta_sine(r[0], r[1])));
    Dataset::new(x, y, Some(eta), format!("sine-{seed}"))
}

/// Fraction of samples going to the training side, and the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

/// Seeded random partition into `round(train_fraction * n)` training rows
/// and the rest for testing.
pub fn split(ds: &Dataset, spec: SplitSpec) -> Result<(Dataset, Dataset)> {
    let n = ds.len();
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction {} outside (0, 1)", spec.train_fraction)));
    }
    let n_train = (spec.train_fraction * n as f64).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::InvalidParameter(format!(
            "train fraction {} leaves an empty side for n = {n}",
            spec.train_fraction
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    idx.shuffle(&mut rng);
    let (tr, te) = idx.split_at(n_train);
    Ok((ds.subset(tr, format!("{}-train", ds.name)), ds.subset(te, format!("{}-test", ds.name))))
}

/// Render the dataset in the CSV schema described at the module level.
pub fn to_csv_string(ds: &Dataset) -> String {
    let d = ds.dim();
    let mut header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
    header.push("y".into());
    if ds.true_eta.is_some() {
        header.push("eta".into());
    }
    let mut out = header.join(",");
    out.push('\n');
    for i in 0..ds.len() {
        let mut fields: Vec<String> = ds.x.row(i).iter().map(|v| format!("{v}")).collect();
        fields.push(format!("{}", ds.y[i] as i64));
        if let Some(eta) = &ds.true_eta {
            fields.push(format!("{}", eta[i]));
        }
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_atomic(path, to_csv_string(ds).as_bytes())
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<(usize, bool)> {
    let bad = |reason: String| Error::MalformedHeader { path: path.to_path_buf(), line: 1, reason };
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let has_eta = names.last() == Some(&"eta");
    let y_pos = if has_eta { names.len().checked_sub(2) } else { names.len().checked_sub(1) };
    let y_pos = y_pos.ok_or_else(|| bad("missing label column".into()))?;
    if names[y_pos] != "y" {
        return Err(bad(format!("expected label column \"y\", found {:?}", names[y_pos])));
    }
    if y_pos == 0 {
        return Err(bad("no feature columns".into()));
    }
    for (j, name) in names[..y_pos].iter().enumerate() {
        if *name != format!("f{j}") {
            return Err(bad(format!("expected \"f{j}\", found {name:?}")));
        }
    }
    Ok((y_pos, has_eta))
}

/// Read a dataset in the module's CSV schema.
pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path)?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(file);
    let header = rdr.headers()?.clone();
    let (d, has_eta) = parse_header(path, &header)?;
    let width = d + 1 + usize::from(has_eta);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut etas = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != width {
            return Err(Error::RaggedRow { path: path.to_path_buf(), line, expected: width, found: rec.len() });
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::BadNumber { path: path.to_path_buf(), line, value: s.to_string() })
        };
        for j in 0..d {
            xs.push(num(&rec[j])?);
        }
        let label = rec[d].trim();
        let y = match label.parse::<f64>() {
            Ok(v) if v == 1.0 || v == -1.0 => v,
            _ => return Err(Error::BadLabel { path: path.to_path_buf(), line, value: label.to_string() }),
        };
        ys.push(y);
        if has_eta {
            let e = num(&rec[d + 1])?;
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::BadNumber { path: path.to_path_buf(), line, value: rec[d + 1].to_string() });
            }
            etas.push(e);
        }
    }
    let n = ys.len();
    let x = Array2::from_shape_vec((n, d), xs).expect("row-major shape");
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Dataset::new(x, Array1::from(ys), has_eta.then(|| Array1::from(etas)), name)
}

/// Write `ds` as CSV to any writer.
pub fn write_csv<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    w.write_all(to_csv_string(ds).as_bytes())?;
    Ok(())
}
