//! Dataset ingestion, synthetic generators, and deterministic splits.
//!
//! Dataset files are plain CSV: `d` feature columns as decimals, then one
//! integer class label. Loaders remap arbitrary label ids to contiguous
//! 0-based indices and report the mapping.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::seed::rng_for;
use crate::{Error, Result};

/// Disjoint row-index lists covering (a subset of) a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Partition `0..n` by a seeded permutation into train/val/test parts of the
/// given fractions. When the fractions sum to 1, rounding leftovers go to
/// the test part so the union covers every row.
pub fn split(n: usize, fractions: (f64, f64, f64), seed: u64) -> Result<Split> {
    let (ft, fv, fs) = fractions;
    for f in [ft, fv, fs] {
        if !f.is_finite() || f < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "split fraction {f} must be finite and >= 0"
            )));
        }
    }
    let total = ft + fv + fs;
    if total > 1.0 + 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "split fractions sum to {total}, must be <= 1"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_for(seed, "split"));
    let count = |f: f64| ((f * n as f64) + 1e-9).floor() as usize;
    let n_train = count(ft);
    let n_val = count(fv);
    let n_test = if (total - 1.0).abs() <= 1e-9 {
        n - n_train - n_val
    } else {
        count(fs)
    };
    let train = order[..n_train].to_vec();
    let val = order[n_train..n_train + n_val].to_vec();
    let test = order[n_train + n_val..n_train + n_val + n_test].to_vec();
    Ok(Split { train, val, test })
}

/// Rows of `features` selected by `indices`, with the matching labels.
pub fn take_rows(
    features: &Array2<f64>,
    labels: &[usize],
    indices: &[usize],
) -> (Array2<f64>, Vec<usize>) {
    let d = features.ncols();
    let mut out = Array2::zeros((indices.len(), d));
    let mut out_labels = Vec::with_capacity(indices.len());
    for (row, &i) in indices.iter().enumerate() {
        out.row_mut(row).assign(&features.row(i));
        out_labels.push(labels[i]);
    }
    (out, out_labels)
}

/// K Gaussian clusters with unit covariance. Cluster means sit on a seeded
/// random direction frame (orthogonalized while the dimension allows)
/// scaled by `class_separation`; classes are balanced to within one row
/// (row `i` belongs to class `i % k`).
pub fn make_blobs(
    n: usize,
    d: usize,
    k: usize,
    class_separation: f64,
    seed: u64,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if k < 2 {
        return Err(Error::InvalidParameter("need at least 2 classes".into()));
    }
    if d == 0 {
        return Err(Error::InvalidParameter(
            "feature dimension must be positive".into(),
        ));
    }
    if n == 0 {
        return Err(Error::EmptyBatch);
    }
    if !class_separation.is_finite() || class_separation < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "class separation {class_separation} must be finite and >= 0"
        )));
    }
    let mut rng = rng_for(seed, "blobs");
    let standard = Normal::new(0.0, 1.0).expect("unit normal");

    let mut directions: Vec<Array1<f64>> = Vec::with_capacity(k);
    for idx in 0..k {
        loop {
            let mut v = Array1::from_shape_fn(d, |_| standard.sample(&mut rng));
            if idx < d {
                for prev in &directions[..idx.min(directions.len())] {
                    let proj = v.dot(prev);
                    v.scaled_add(-proj, prev);
                }
            }
            let norm = v.dot(&v).sqrt();
            if norm > 1e-8 {
                directions.push(v / norm);
                break;
            }
        }
    }

    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let class = i % k;
        let mean = &directions[class] * class_separation;
        for j in 0..d {
            features[[i, j]] = mean[j] + standard.sample(&mut rng);
        }
        labels.push(class);
    }
    Ok((features, labels))
}

/// A parsed dataset CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub features: Array2<f64>,
    /// Contiguous 0-based labels.
    pub labels: Vec<usize>,
    pub dim: usize,
    pub num_classes: usize,
    /// `label_map[new_id] = original id` as written in the file; identity
    /// when the file already used contiguous 0-based labels.
    pub label_map: Vec<i64>,
}

pub fn read_dataset<R: Read>(input: R) -> Result<LoadedDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    let mut dim: Option<usize> = None;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record
            .position()
            .map(|p| p.line() as usize)
            .unwrap_or(rows.len() + 1);
        if record.len() < 2 {
            return Err(Error::Parse {
                line,
                message: "need at least one feature column and a label".into(),
            });
        }
        let d = record.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(existing) if existing != d => {
                return Err(Error::Parse {
                    line,
                    message: format!("row has {d} feature columns, expected {existing}"),
                });
            }
            _ => {}
        }
        let mut row = Vec::with_capacity(d);
        for field in record.iter().take(d) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid feature value `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("non-finite feature value `{field}`"),
                });
            }
            row.push(v);
        }
        let label_field = record.get(d).expect("bounds checked");
        let label: i64 = label_field.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid label `{label_field}`"),
        })?;
        rows.push(row);
        raw_labels.push(label);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: "empty dataset file".into(),
        });
    }
    let dim = dim.expect("nonempty");
    let mut label_map: Vec<i64> = raw_labels.clone();
    label_map.sort_unstable();
    label_map.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|l| label_map.binary_search(l).expect("present"))
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let features =
        Array2::from_shape_vec((raw_labels.len(), dim), flat).expect("consistent dims");
    Ok(LoadedDataset {
        features,
        labels,
        dim,
        num_classes: label_map.len(),
        label_map,
    })
}

fn csv_error(e: &csv::Error) -> Error {
    let line = match e.kind() {
        csv::ErrorKind::Utf8 { pos, .. } => pos.as_ref().map(|p| p.line() as usize),
        csv::ErrorKind::UnequalLengths { pos, .. } => pos.as_ref().map(|p| p.line() as usize),
        _ => None,
    };
    Error::Parse {
        line: line.unwrap_or(0),
        message: e.to_string(),
    }
}

pub fn load_csv(path: &Path) -> Result<LoadedDataset> {
    let file = File::open(path)?;
    read_dataset(file)
}

pub fn write_dataset<W: Write>(mut out: W, features: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if features.nrows() != labels.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} rows vs {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    for (row, label) in features.rows().into_iter().zip(labels.iter()) {
        for value in row.iter() {
            write!(out, "{value},")?;
        }
        writeln!(out, "{label}")?;
    }
    Ok(())
}

pub fn save_csv(path: &Path, features: &Array2<f64>, labels: &[usize]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    write_dataset(&mut out, features, labels)?;
    out.flush()?;
    Ok(())
}

/// Per-column z-score with moments computed on the training rows only.
/// Constant columns are left centered but unscaled. Returns `(means, stds)`.
pub fn standardize(
    features: &mut Array2<f64>,
    train_rows: &[usize],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if train_rows.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = features.ncols();
    let m = train_rows.len() as f64;
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let mut sum = 0.0;
        for &i in train_rows {
            sum += features[[i, j]];
        }
        let mean = sum / m;
        let mut var = 0.0;
        for &i in train_rows {
            let delta = features[[i, j]] - mean;
            var += delta * delta;
        }
        let std = (var / m).sqrt();
        means[j] = mean;
        stds[j] = if std > 0.0 { std } else { 1.0 };
    }
    for mut row in features.rows_mut() {
        for j in 0..d {
            row[j] = (row[j] - means[j]) / stds[j];
        }
    }
    Ok((means, stds))
}
