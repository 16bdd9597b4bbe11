//! Acquisition strategies.
//!
//! Every scorer maps model outputs to "larger = more worth labeling";
//! every selector returns an [`AcquisitionBatch`]. Selectors that take
//! per-candidate arrays (scores, probabilities, embeddings) return batch
//! indices that are *positions into those arrays*, i.e. positions in the
//! unlabeled enumeration the caller scored — the experiment loop maps them
//! back to dataset indices. [`select_random`] takes the pool itself and
//! returns dataset indices directly.

use crate::error::{AlError, Result};
use crate::geometry::{kmeans, kmeans_pp_seeding};
use crate::learner::{LearnerSnapshot, McProbTensor};
use crate::math::xlnx;
#[allow(unused_imports)] // trait needed by the no_std build only
use crate::math::F64Ext;
use crate::matrix::{sq_dist, Matrix};
use crate::pool::{AcquisitionBatch, PoolState};
use crate::rng;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

/// Uncertainty scorers defined on a single probability vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointwiseKind {
    Entropy,
    Margin,
    LeastConf,
    VarRatio,
}

fn check_prob_vector(p: &[f64]) -> Result<()> {
    if p.is_empty() {
        return Err(AlError::Shape("empty probability vector".into()));
    }
    let mut sum = 0.0;
    for &v in p {
        if !v.is_finite() || v < 0.0 {
            return Err(AlError::Config(format!(
                "probability entries must be finite and nonnegative, got {v}"
            )));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(AlError::Config(format!(
            "probabilities must sum to 1 (±1e-6), got {sum}"
        )));
    }
    Ok(())
}

/// Top-two probabilities of a vector.
fn top_two(p: &[f64]) -> (f64, f64) {
    let mut first = f64::NEG_INFINITY;
    let mut second = f64::NEG_INFINITY;
    for &v in p {
        if v > first {
            second = first;
            first = v;
        } else if v > second {
            second = v;
        }
    }
    (first, second)
}

/// Entropy −Σ p ln p, margin −(p₁−p₂), least-confidence −p(ŷ), or
/// variation ratio 1−p(ŷ); natural log, larger = more informative.
pub fn score_pointwise(kind: PointwiseKind, p: &[f64]) -> Result<f64> {
    check_prob_vector(p)?;
    Ok(match kind {
        PointwiseKind::Entropy => -p.iter().map(|&v| xlnx(v)).sum::<f64>(),
        PointwiseKind::Margin => {
            if p.len() < 2 {
                return Err(AlError::Config("margin needs at least 2 classes".into()));
            }
            let (first, second) = top_two(p);
            -(first - second)
        }
        PointwiseKind::LeastConf => -top_two(p).0,
        PointwiseKind::VarRatio => 1.0 - top_two(p).0,
    })
}

/// The pointwise score applied to the per-sample mean probability over
/// the MC passes.
pub fn score_mc_pointwise(kind: PointwiseKind, mc: &McProbTensor) -> Result<Vec<f64>> {
    let mean = mc.mean_proba();
    (0..mean.rows())
        .map(|i| score_pointwise(kind, mean.row(i)))
        .collect()
}

/// Per-sample entropy helper used by several strategies.
pub fn entropy_rows(probs: &Matrix) -> Result<Vec<f64>> {
    (0..probs.rows())
        .map(|i| score_pointwise(PointwiseKind::Entropy, probs.row(i)))
        .collect()
}

/// BALD mutual information: H[mean over passes] − mean over passes H[pass].
/// Fewer than 2 passes is degenerate and scores 0 everywhere.
pub fn score_bald(mc: &McProbTensor) -> Result<Vec<f64>> {
    if mc.passes < 2 {
        return Ok(vec![0.0; mc.n]);
    }
    let mean = mc.mean_proba();
    let mut out = Vec::with_capacity(mc.n);
    for i in 0..mc.n {
        let h_mean = score_pointwise(PointwiseKind::Entropy, mean.row(i))?;
        let mut h_pass_sum = 0.0;
        for t in 0..mc.passes {
            h_pass_sum += score_pointwise(PointwiseKind::Entropy, mc.row(t, i))?;
        }
        out.push(h_mean - h_pass_sum / mc.passes as f64);
    }
    Ok(out)
}

/// Mean (over classes) of the population standard deviation (over passes)
/// of each class probability.
pub fn score_meanstd(mc: &McProbTensor) -> Result<Vec<f64>> {
    for t in 0..mc.passes {
        for i in 0..mc.n {
            check_prob_vector(mc.row(t, i))?;
        }
    }
    let mean = mc.mean_proba();
    let mut out = Vec::with_capacity(mc.n);
    for i in 0..mc.n {
        let mrow = mean.row(i);
        let mut acc = 0.0;
        for c in 0..mc.k {
            let mut var = 0.0;
            for t in 0..mc.passes {
                let d = mc.row(t, i)[c] - mrow[c];
                var += d * d;
            }
            acc += (var / mc.passes as f64).sqrt();
        }
        out.push(acc / mc.k as f64);
    }
    Ok(out)
}

/// Positions of the b largest scores, ties broken by smaller position;
/// b larger than the candidate count selects everything.
pub fn select_top_b(scores: &[f64], b: usize) -> Result<AcquisitionBatch> {
    if scores.iter().any(|v| v.is_nan()) {
        return Err(AlError::Config("NaN acquisition score".into()));
    }
    let take = b.min(scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| {
        scores[j]
            .partial_cmp(&scores[i])
            .expect("NaN rejected above")
            .then_with(|| i.cmp(&j))
    });
    order.truncate(take);
    let picked_scores = order.iter().map(|&i| scores[i]).collect();
    Ok(AcquisitionBatch::with_scores(order, picked_scores))
}

/// Uniform sample of min(b, |unlabeled|) pool indices, without
/// replacement, deterministic under `seed`.
pub fn select_random(pool: &PoolState, b: usize, seed: u64) -> AcquisitionBatch {
    let n = pool.unlabeled.len();
    let take = b.min(n);
    let mut r = rng::rng_from_seed(seed);
    let positions = rng::sample_without_replacement(n, take, &mut r);
    AcquisitionBatch::new(positions.iter().map(|&p| pool.unlabeled[p]).collect())
}

/// For each k-means centroid (k-means++ seeding + Lloyd, k = b) return the
/// candidate nearest it, resolving duplicates by taking the next-nearest.
pub fn select_kmeans(embeddings: &Matrix, b: usize, seed: u64) -> Result<AcquisitionBatch> {
    let n = embeddings.rows();
    if n == 0 {
        return Err(AlError::Config("no candidates to cluster".into()));
    }
    let k = b.min(n);
    let result = kmeans(embeddings, k, seed, None)?;
    nearest_per_centroid(embeddings, &result.centroids)
}

/// Nearest candidate to each centroid, skipping already-taken candidates.
fn nearest_per_centroid(points: &Matrix, centroids: &Matrix) -> Result<AcquisitionBatch> {
    let n = points.rows();
    let mut taken = vec![false; n];
    let mut picked = Vec::with_capacity(centroids.rows());
    for c in 0..centroids.rows() {
        let mut best = usize::MAX;
        let mut best_d = f64::INFINITY;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = sq_dist(points.row(i), centroids.row(c));
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        if best == usize::MAX {
            return Err(AlError::State("more centroids than candidates".into()));
        }
        taken[best] = true;
        picked.push(best);
    }
    Ok(AcquisitionBatch::new(picked))
}

/// Greedy k-center over PCA-projected embeddings: repeatedly pick the
/// candidate with the greatest distance to its nearest covered point
/// (labeled ∪ already picked). With no labeled points, the first pick is
/// the candidate maximizing the minimum distance to all other candidates.
pub fn select_kcenter(
    embeddings_labeled: &Matrix,
    embeddings_unlabeled: &Matrix,
    b: usize,
    pca_dim: usize,
) -> Result<AcquisitionBatch> {
    let nl = embeddings_labeled.rows();
    let nu = embeddings_unlabeled.rows();
    if nu == 0 {
        return Err(AlError::Config("no unlabeled candidates".into()));
    }
    if nl > 0 && embeddings_labeled.cols() != embeddings_unlabeled.cols() {
        return Err(AlError::Shape(format!(
            "embedding widths differ: {} vs {}",
            embeddings_labeled.cols(),
            embeddings_unlabeled.cols()
        )));
    }
    if pca_dim == 0 {
        return Err(AlError::Config("pca_dim must be positive".into()));
    }
    let dim = embeddings_unlabeled.cols();
    // Project labeled and unlabeled together so they share one basis.
    let mut all = Vec::with_capacity((nl + nu) * dim);
    for i in 0..nl {
        all.extend_from_slice(embeddings_labeled.row(i));
    }
    for i in 0..nu {
        all.extend_from_slice(embeddings_unlabeled.row(i));
    }
    let stacked = Matrix::from_vec(nl + nu, dim, all)?;
    let (_basis, projected) = crate::geometry::pca(&stacked, pca_dim.min(dim))?;

    let take = b.min(nu);
    let mut picked: Vec<usize> = Vec::with_capacity(take);
    let mut taken = vec![false; nu];
    // Min squared distance from each candidate to the covered set.
    let mut min_d = vec![f64::INFINITY; nu];
    for u in 0..nu {
        let urow = projected.row(nl + u);
        for l in 0..nl {
            let d = sq_dist(urow, projected.row(l));
            if d < min_d[u] {
                min_d[u] = d;
            }
        }
    }
    if nl == 0 {
        // Fallback first pick: maximize min distance to the other candidates.
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for u in 0..nu {
            let mut nearest = f64::INFINITY;
            for v in 0..nu {
                if v == u {
                    continue;
                }
                let d = sq_dist(projected.row(nl + u), projected.row(nl + v));
                if d < nearest {
                    nearest = d;
                }
            }
            if nu == 1 {
                nearest = 0.0;
            }
            if nearest > best_d {
                best_d = nearest;
                best = u;
            }
        }
        picked.push(best);
        taken[best] = true;
        for u in 0..nu {
            let d = sq_dist(projected.row(nl + u), projected.row(nl + best));
            if d < min_d[u] {
                min_d[u] = d;
            }
        }
    }
    while picked.len() < take {
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for u in 0..nu {
            if taken[u] {
                continue;
            }
            if min_d[u] > best_d {
                best_d = min_d[u];
                best = u;
            }
        }
        picked.push(best);
        taken[best] = true;
        for u in 0..nu {
            if taken[u] {
                continue;
            }
            let d = sq_dist(projected.row(nl + u), projected.row(nl + best));
            if d < min_d[u] {
                min_d[u] = d;
            }
        }
    }
    Ok(AcquisitionBatch::new(picked))
}

/// k-means++ seeding over gradient embeddings; the seeded points are the
/// batch.
pub fn select_badge(grad_embeddings: &Matrix, b: usize, seed: u64) -> Result<AcquisitionBatch> {
    let n = grad_embeddings.rows();
    if n == 0 {
        return Err(AlError::Config("no candidates".into()));
    }
    let k = b.min(n);
    let seeds = kmeans_pp_seeding(grad_embeddings, k, seed, None)?;
    Ok(AcquisitionBatch::new(seeds))
}

/// Cluster-Margin: of the ⌈ρ·b⌉ lowest-margin candidates, pick b by
/// visiting their clusters round-robin in ascending cluster-size order
/// (size among the prefiltered members; ties by cluster id), taking the
/// lowest-margin remaining member each visit.
///
/// `margin_scores` are raw top-two probability gaps p(ŷ₁) − p(ŷ₂):
/// lower = more uncertain.
pub fn select_cluster_margin(
    margin_scores: &[f64],
    cluster_assignment: &[usize],
    b: usize,
    rho: f64,
) -> Result<AcquisitionBatch> {
    if margin_scores.len() != cluster_assignment.len() {
        return Err(AlError::Shape(format!(
            "{} margins vs {} cluster ids",
            margin_scores.len(),
            cluster_assignment.len()
        )));
    }
    if margin_scores.iter().any(|v| !v.is_finite()) {
        return Err(AlError::Config("non-finite margin score".into()));
    }
    if !(rho >= 1.0) {
        return Err(AlError::Config(format!("rho must be >= 1, got {rho}")));
    }
    let n = margin_scores.len();
    let take = b.min(n);
    if take == 0 {
        return Ok(AcquisitionBatch::new(Vec::new()));
    }
    let prefilter = (((rho * take as f64).ceil()) as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        margin_scores[i]
            .partial_cmp(&margin_scores[j])
            .expect("finite checked")
            .then_with(|| i.cmp(&j))
    });
    order.truncate(prefilter);
    // Group prefiltered candidates by cluster; members stay margin-sorted.
    let mut clusters: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &order {
        clusters.entry(cluster_assignment[i]).or_default().push(i);
    }
    // Visit ascending by size; equal-size clusters by their most uncertain
    // member (so all-singleton clustering degenerates to margin top-b),
    // then by id for full determinism.
    let mut cluster_order: Vec<usize> = clusters.keys().copied().collect();
    cluster_order.sort_by(|a, b| {
        let (la, lb) = (clusters[a].len(), clusters[b].len());
        la.cmp(&lb)
            .then_with(|| {
                margin_scores[clusters[a][0]]
                    .partial_cmp(&margin_scores[clusters[b][0]])
                    .expect("finite checked")
            })
            .then_with(|| a.cmp(b))
    });
    let mut cursors: BTreeMap<usize, usize> = cluster_order.iter().map(|&c| (c, 0)).collect();
    let mut picked = Vec::with_capacity(take);
    while picked.len() < take {
        let mut advanced = false;
        for &c in &cluster_order {
            if picked.len() == take {
                break;
            }
            let cur = cursors.get_mut(&c).expect("known cluster");
            if *cur < clusters[&c].len() {
                picked.push(clusters[&c][*cur]);
                *cur += 1;
                advanced = true;
            }
        }
        if !advanced {
            break;
        }
    }
    Ok(AcquisitionBatch::new(picked))
}

/// DBAL: prefilter to the top ⌈ρ·b⌉ by uncertainty, weighted k-means
/// (weights = score − min + 1e-12) on their embeddings, then the nearest
/// candidate per centroid.
pub fn select_dbal(
    uncertainty_scores: &[f64],
    embeddings: &Matrix,
    b: usize,
    rho: f64,
    seed: u64,
) -> Result<AcquisitionBatch> {
    if uncertainty_scores.len() != embeddings.rows() {
        return Err(AlError::Shape(format!(
            "{} scores vs {} embedding rows",
            uncertainty_scores.len(),
            embeddings.rows()
        )));
    }
    if uncertainty_scores.iter().any(|v| !v.is_finite()) {
        return Err(AlError::Config("non-finite uncertainty score".into()));
    }
    if !(rho >= 1.0) {
        return Err(AlError::Config(format!("rho must be >= 1, got {rho}")));
    }
    let n = uncertainty_scores.len();
    let take = b.min(n);
    if take == 0 {
        return Ok(AcquisitionBatch::new(Vec::new()));
    }
    let prefilter = (((rho * take as f64).ceil()) as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        uncertainty_scores[j]
            .partial_cmp(&uncertainty_scores[i])
            .expect("finite checked")
            .then_with(|| i.cmp(&j))
    });
    order.truncate(prefilter);
    let sub = embeddings.select_rows(&order);
    let min_score = order
        .iter()
        .map(|&i| uncertainty_scores[i])
        .fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = order
        .iter()
        .map(|&i| uncertainty_scores[i] - min_score + 1e-12)
        .collect();
    let k = take.min(order.len());
    let result = kmeans(&sub, k, seed, Some(&weights))?;
    let local = nearest_per_centroid(&sub, &result.centroids)?;
    Ok(AcquisitionBatch::new(
        local.indices.iter().map(|&i| order[i]).collect(),
    ))
}

/// CEAL: entropy top-b batch plus pseudo-labels argmax(p) for every
/// non-selected candidate with entropy strictly below δ.
pub fn select_ceal(
    probs: &Matrix,
    b: usize,
    delta: f64,
) -> Result<(AcquisitionBatch, BTreeMap<usize, usize>)> {
    if !(delta >= 0.0) {
        return Err(AlError::Config(format!("delta must be >= 0, got {delta}")));
    }
    let scores = entropy_rows(probs)?;
    let batch = select_top_b(&scores, b)?;
    let mut in_batch = vec![false; probs.rows()];
    for &i in &batch.indices {
        in_batch[i] = true;
    }
    let mut pseudo = BTreeMap::new();
    for i in 0..probs.rows() {
        if in_batch[i] || scores[i] >= delta {
            continue;
        }
        let row = probs.row(i);
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        pseudo.insert(i, best);
    }
    Ok((batch, pseudo))
}

/// Exploitation–exploration: greedily add the candidate maximizing
/// entropy(x) − (β/(|S|+1))·Σ_{s∈S} sim(x, s).
pub fn select_exploit_explore(
    entropy_scores: &[f64],
    similarity: &Matrix,
    b: usize,
    beta: f64,
) -> Result<AcquisitionBatch> {
    let n = entropy_scores.len();
    if similarity.rows() != n || similarity.cols() != n {
        return Err(AlError::Shape(format!(
            "similarity must be {n}×{n}, got {}×{}",
            similarity.rows(),
            similarity.cols()
        )));
    }
    if beta < 0.0 || !beta.is_finite() {
        return Err(AlError::Config(format!("beta must be nonnegative, got {beta}")));
    }
    if entropy_scores.iter().any(|v| !v.is_finite()) {
        return Err(AlError::Config("non-finite entropy score".into()));
    }
    let take = b.min(n);
    let mut picked: Vec<usize> = Vec::with_capacity(take);
    let mut taken = vec![false; n];
    let mut sim_sum = vec![0.0; n];
    for _ in 0..take {
        let penalty = beta / (picked.len() + 1) as f64;
        let mut best = usize::MAX;
        let mut best_v = f64::NEG_INFINITY;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let v = entropy_scores[i] - penalty * sim_sum[i];
            if v > best_v {
                best_v = v;
                best = i;
            }
        }
        picked.push(best);
        taken[best] = true;
        for i in 0..n {
            if !taken[i] {
                sim_sum[i] += similarity.get(i, best);
            }
        }
    }
    Ok(AcquisitionBatch::new(picked))
}

/// Cosine-similarity matrix of embedding rows (zero-norm rows yield 0).
pub fn cosine_similarity_matrix(embeddings: &Matrix) -> Matrix {
    let n = embeddings.rows();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            embeddings
                .row(i)
                .iter()
                .map(|v| v * v)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let mut sim = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let denom = norms[i] * norms[j];
            let v = if denom > 0.0 {
                crate::matrix::dot(embeddings.row(i), embeddings.row(j)) / denom
            } else {
                0.0
            };
            sim.set(i, j, v);
        }
    }
    sim
}

/// AdvBIM: score −‖r_x‖₂ per candidate (−∞ when the label never flips)
/// and take the top b, i.e. the smallest perturbations.
pub fn select_adv_bim(
    snap: &LearnerSnapshot,
    unlabeled_features: &Matrix,
    b: usize,
    cfg: &crate::adversarial::BimConfig,
) -> Result<AcquisitionBatch> {
    let n = unlabeled_features.rows();
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let out = crate::adversarial::bim_distance(snap, unlabeled_features.row(i), cfg)?;
        scores.push(if out.flipped {
            -out.r_norm
        } else {
            f64::NEG_INFINITY
        });
    }
    select_top_b(&scores, b)
}

/// LPL: top b by predicted loss.
pub fn select_lpl(predicted_losses: &[f64], b: usize) -> Result<AcquisitionBatch> {
    select_top_b(predicted_losses, b)
}
