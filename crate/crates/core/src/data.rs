//! Dataset types, synthetic generators, splits, and imbalanced
//! subsampling. File IO (paths, gzip) lives in the companion CLI crate;
//! this module parses raw IDX bytes and generates data in memory.

use crate::error::{AlError, Result};
#[allow(unused_imports)] // trait needed by the no_std build only
use crate::math::F64Ext;
use crate::matrix::Matrix;
use crate::rng;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

/// A train/test split with class count and optional per-test-sample
/// group ids.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub name: String,
    pub train_features: Matrix,
    pub train_labels: Vec<usize>,
    pub test_features: Matrix,
    pub test_labels: Vec<usize>,
    /// Group id per test sample, for grouped-accuracy evaluation.
    pub groups: Option<Vec<usize>>,
    pub k: usize,
}

impl DatasetSplit {
    pub fn validate(&self) -> Result<()> {
        if self.train_features.cols() != self.test_features.cols()
            && self.test_features.rows() > 0
        {
            return Err(AlError::Shape(format!(
                "train width {} vs test width {}",
                self.train_features.cols(),
                self.test_features.cols()
            )));
        }
        if self.train_features.rows() != self.train_labels.len() {
            return Err(AlError::Shape("train feature/label count mismatch".into()));
        }
        if self.test_features.rows() != self.test_labels.len() {
            return Err(AlError::Shape("test feature/label count mismatch".into()));
        }
        if self.k < 2 {
            return Err(AlError::Config("need at least 2 classes".into()));
        }
        if let Some(bad) = self
            .train_labels
            .iter()
            .chain(self.test_labels.iter())
            .find(|&&y| y >= self.k)
        {
            return Err(AlError::Config(format!("label {bad} out of range for k={}", self.k)));
        }
        if let Some(g) = &self.groups {
            if g.len() != self.test_labels.len() {
                return Err(AlError::Shape("group/test count mismatch".into()));
            }
        }
        if !self.train_features.is_finite() || !self.test_features.is_finite() {
            return Err(AlError::Config("non-finite feature values".into()));
        }
        Ok(())
    }
}

fn be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    if at + 4 > bytes.len() {
        return Err(AlError::Format("truncated IDX header".into()));
    }
    Ok(u32::from_be_bytes(bytes[at..at + 4].try_into().expect("len 4")))
}

/// Parse an IDX image tensor (big-endian magic 0x00000803) into an
/// n × (rows·cols) matrix with pixels scaled to [0, 1].
pub fn parse_idx_images(bytes: &[u8]) -> Result<Matrix> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(AlError::Format(format!(
            "image file magic {magic:#010x}, expected {IDX_IMAGE_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let d = rows * cols;
    let need = 16 + n * d;
    if bytes.len() != need {
        return Err(AlError::Format(format!(
            "image payload is {} bytes, header implies {need}",
            bytes.len()
        )));
    }
    let data: Vec<f64> = bytes[16..].iter().map(|&b| b as f64 / 255.0).collect();
    Matrix::from_vec(n, d, data)
}

/// Parse an IDX label vector (big-endian magic 0x00000801).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABEL_MAGIC {
        return Err(AlError::Format(format!(
            "label file magic {magic:#010x}, expected {IDX_LABEL_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4)? as usize;
    if bytes.len() != 8 + n {
        return Err(AlError::Format(format!(
            "label payload is {} bytes, header implies {}",
            bytes.len(),
            8 + n
        )));
    }
    Ok(bytes[8..].iter().map(|&b| b as usize).collect())
}

/// Parse paired IDX image and label payloads, checking that their sample
/// counts agree.
pub fn load_idx_bytes(images: &[u8], labels: &[u8]) -> Result<(Matrix, Vec<usize>)> {
    let x = parse_idx_images(images)?;
    let y = parse_idx_labels(labels)?;
    if x.rows() != y.len() {
        return Err(AlError::Format(format!(
            "{} images but {} labels",
            x.rows(),
            y.len()
        )));
    }
    Ok((x, y))
}

/// Keep ⌊ratio_c · count_c⌋ samples of each class, uniformly without
/// replacement, preserving dataset order and feature rows verbatim.
pub fn make_imbalanced(
    features: &Matrix,
    labels: &[usize],
    ratios: &[f64],
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    if features.rows() != labels.len() {
        return Err(AlError::Shape("feature/label count mismatch".into()));
    }
    let k = ratios.len();
    if k == 0 {
        return Err(AlError::Config("empty ratio vector".into()));
    }
    if let Some(bad) = ratios.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(AlError::Config(format!("ratios must lie in (0,1], got {bad}")));
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= k) {
        return Err(AlError::Config(format!(
            "label {bad} out of range for {k} ratios"
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut keep: Vec<usize> = Vec::new();
    for (c, members) in by_class.iter().enumerate() {
        let want = ((ratios[c] * members.len() as f64).floor()) as usize;
        if want == 0 {
            return Err(AlError::Config(format!(
                "class {c} would be empty (count {} × ratio {})",
                members.len(),
                ratios[c]
            )));
        }
        let picks = rng::sample_without_replacement(members.len(), want, &mut rng);
        keep.extend(picks.iter().map(|&p| members[p]));
    }
    keep.sort_unstable();
    let sub_labels: Vec<usize> = keep.iter().map(|&i| labels[i]).collect();
    Ok((features.select_rows(&keep), sub_labels))
}

/// `n_per_class` points per Gaussian component; labels follow the
/// generating component. Rows are grouped by class.
pub fn synth_gaussians(
    n_per_class: usize,
    means: &[Vec<f64>],
    shared_std: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>)> {
    if n_per_class == 0 {
        return Err(AlError::Config("n_per_class must be positive".into()));
    }
    if means.len() < 2 {
        return Err(AlError::Config("need at least 2 component means".into()));
    }
    let dim = means[0].len();
    if dim == 0 || means.iter().any(|m| m.len() != dim) {
        return Err(AlError::Config("component means must share a positive dimension".into()));
    }
    if !(shared_std >= 0.0) || !shared_std.is_finite() {
        return Err(AlError::Config("shared_std must be finite and nonnegative".into()));
    }
    let mut rng = rng::rng_from_seed(seed);
    let n = n_per_class * means.len();
    let mut data = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            for &m in mean {
                data.push(m + shared_std * rng::next_gaussian(&mut rng));
            }
            labels.push(c);
        }
    }
    Ok((Matrix::from_vec(n, dim, data)?, labels))
}

/// XOR task: four unit-square corners, label = parity of the corner,
/// Gaussian jitter of scale `noise`. Corners are cycled so class counts
/// differ by at most 2.
pub fn synth_xor(n: usize, noise: f64, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if n == 0 {
        return Err(AlError::Config("n must be positive".into()));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(AlError::Config("noise must be finite and nonnegative".into()));
    }
    let corners = [(0.0, 0.0, 0usize), (1.0, 1.0, 0), (0.0, 1.0, 1), (1.0, 0.0, 1)];
    let mut rng = rng::rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (cx, cy, y) = corners[i % 4];
        data.push(cx + noise * rng::next_gaussian(&mut rng));
        data.push(cy + noise * rng::next_gaussian(&mut rng));
        labels.push(y);
    }
    Ok((Matrix::from_vec(n, 2, data)?, labels))
}

/// Concentric rings: one class per radius, uniform angle, radial Gaussian
/// jitter of scale `noise`. Rings are cycled for near-equal class counts.
pub fn synth_rings(n: usize, radii: &[f64], noise: f64, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if n == 0 {
        return Err(AlError::Config("n must be positive".into()));
    }
    if radii.len() < 2 {
        return Err(AlError::Config("need at least 2 radii".into()));
    }
    if radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(AlError::Config("radii must be positive and finite".into()));
    }
    if !(noise >= 0.0) || !noise.is_finite() {
        return Err(AlError::Config("noise must be finite and nonnegative".into()));
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut data = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    let two_pi = 2.0 * core::f64::consts::PI;
    for i in 0..n {
        let c = i % radii.len();
        let theta = two_pi * rng.random::<f64>();
        let r = radii[c] + noise * rng::next_gaussian(&mut rng);
        data.push(r * theta.cos());
        data.push(r * theta.sin());
        labels.push(c);
    }
    Ok((Matrix::from_vec(n, 2, data)?, labels))
}

/// Seed-deterministic stratified split: per class, round(fraction·count)
/// samples go to the test side; both sides keep ascending dataset order.
pub fn split(
    features: &Matrix,
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Matrix, Vec<usize>, Matrix, Vec<usize>)> {
    if features.rows() != labels.len() {
        return Err(AlError::Shape("feature/label count mismatch".into()));
    }
    let (train_idx, test_idx) = split_indices(labels, test_fraction, seed)?;
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    Ok((
        features.select_rows(&train_idx),
        train_labels,
        features.select_rows(&test_idx),
        test_labels,
    ))
}

/// The index-level stratified split behind [`split`], for callers that
/// need to carry side information (e.g. group ids) across the split.
/// Both returned index lists are ascending.
pub fn split_indices(
    labels: &[usize],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(0.0..=1.0).contains(&test_fraction) {
        return Err(AlError::Config(format!(
            "test_fraction must lie in [0,1], got {test_fraction}"
        )));
    }
    let k = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = rng::rng_from_seed(seed);
    let mut test_idx: Vec<usize> = Vec::new();
    for members in by_class.iter() {
        if members.is_empty() {
            continue;
        }
        let ntest = (test_fraction * members.len() as f64).round() as usize;
        let picks = rng::sample_without_replacement(members.len(), ntest.min(members.len()), &mut rng);
        test_idx.extend(picks.iter().map(|&p| members[p]));
    }
    test_idx.sort_unstable();
    let mut is_test = vec![false; labels.len()];
    for &i in &test_idx {
        is_test[i] = true;
    }
    let train_idx: Vec<usize> = (0..labels.len()).filter(|&i| !is_test[i]).collect();
    Ok((train_idx, test_idx))
}
