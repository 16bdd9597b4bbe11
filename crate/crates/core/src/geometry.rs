//! Clustering and projection primitives shared by the representative
//! selection strategies: k-means++ seeding, weighted Lloyd k-means,
//! average-linkage agglomerative clustering, and PCA.

use crate::error::{AlError, Result};
#[allow(unused_imports)] // trait needed by the no_std build only
use crate::math::F64Ext;
use crate::matrix::{sq_dist, Matrix};
use crate::rng;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

pub const KMEANS_MAX_ITER: usize = 300;
pub const KMEANS_TOL: f64 = 1e-6;

/// Output of [`kmeans`].
#[derive(Debug, Clone)]
pub struct ClusterResult {
    /// k × d centroid matrix.
    pub centroids: Matrix,
    /// Cluster id of each input point (nearest centroid, ties to the
    /// lower cluster id).
    pub assignment: Vec<usize>,
    /// Weighted sum of squared distances to assigned centroids.
    pub inertia: f64,
}

fn check_weights(n: usize, weights: Option<&[f64]>) -> Result<()> {
    if let Some(w) = weights {
        if w.len() != n {
            return Err(AlError::Shape(format!(
                "{} weights for {n} points",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(AlError::Config(
                "weights must be finite and nonnegative".into(),
            ));
        }
    }
    Ok(())
}

/// k-means++ seeding: the first seed is drawn proportional to `weights`
/// (uniform when absent), each next seed proportional to weight · D², with
/// D the distance to the nearest already-chosen seed. Returns `k` distinct
/// point indices. When the remaining probability mass is zero (exact
/// duplicates of chosen seeds, or zero weights), the lowest unchosen index
/// is taken so the result always has `k` distinct entries.
pub fn kmeans_pp_seeding(
    points: &Matrix,
    k: usize,
    seed: u64,
    weights: Option<&[f64]>,
) -> Result<Vec<usize>> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(AlError::Config(format!("k must be in 1..={n}, got {k}")));
    }
    check_weights(n, weights)?;
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let mut r = rng::rng_from_seed(seed);
    let mut chosen = vec![false; n];
    let mut seeds = Vec::with_capacity(k);
    // mass[i] = weight·D²; before any seed exists, mass is just the weight.
    let mut mass: Vec<f64> = (0..n).map(&w).collect();
    let mut d2 = vec![f64::INFINITY; n];
    for _ in 0..k {
        let total: f64 = mass.iter().sum();
        let pick = if total > 0.0 {
            let mut u = r.random::<f64>() * total;
            let mut pick = None;
            for (i, &m) in mass.iter().enumerate() {
                if m <= 0.0 {
                    continue;
                }
                u -= m;
                if u < 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // Guard against accumulated rounding: fall back to the last
            // positive-mass index.
            pick.unwrap_or_else(|| {
                mass.iter().rposition(|&m| m > 0.0).expect("total > 0")
            })
        } else {
            (0..n).find(|&i| !chosen[i]).expect("k <= n")
        };
        chosen[pick] = true;
        seeds.push(pick);
        for i in 0..n {
            let d = sq_dist(points.row(i), points.row(pick));
            if d < d2[i] {
                d2[i] = d;
            }
            mass[i] = if chosen[i] { 0.0 } else { w(i) * d2[i] };
        }
    }
    Ok(seeds)
}

/// Lloyd k-means from k-means++ seeds with the crate-default iteration cap
/// and tolerance.
pub fn kmeans(
    points: &Matrix,
    k: usize,
    seed: u64,
    weights: Option<&[f64]>,
) -> Result<ClusterResult> {
    Ok(kmeans_traced(points, k, seed, KMEANS_MAX_ITER, KMEANS_TOL, weights)?.0)
}

/// Lloyd k-means that also reports the inertia measured at every
/// assignment step (non-increasing; exposed for verification).
pub fn kmeans_traced(
    points: &Matrix,
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
    weights: Option<&[f64]>,
) -> Result<(ClusterResult, Vec<f64>)> {
    let n = points.rows();
    let d = points.cols();
    let seeds = kmeans_pp_seeding(points, k, seed, weights)?;
    let mut centroids = points.select_rows(&seeds);
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);

    let mut assignment = vec![0usize; n];
    let mut trace = Vec::new();
    for _ in 0..max_iter.max(1) {
        // Assignment step (ties to the lower cluster id).
        let mut inertia = 0.0;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dist = sq_dist(points.row(i), centroids.row(c));
                if dist < best_d {
                    best_d = dist;
                    best = c;
                }
            }
            assignment[i] = best;
            inertia += w(i) * best_d;
        }
        trace.push(inertia);

        // Update step: weighted centroid means.
        let mut sums = Matrix::zeros(k, d);
        let mut wsum = vec![0.0; k];
        for i in 0..n {
            let c = assignment[i];
            let wi = w(i);
            wsum[c] += wi;
            let row = sums.row_mut(c);
            for (j, x) in points.row(i).iter().enumerate() {
                row[j] += wi * x;
            }
        }
        let mut new_centroids = Matrix::zeros(k, d);
        let mut empties: Vec<usize> = Vec::new();
        for c in 0..k {
            if wsum[c] > 0.0 {
                let row = new_centroids.row_mut(c);
                for j in 0..d {
                    row[j] = sums.get(c, j) / wsum[c];
                }
            } else {
                empties.push(c);
            }
        }
        // Empty-cluster repair: reseed to the point farthest from its
        // assigned centroid, skipping points already used as repairs.
        let mut used: Vec<usize> = Vec::new();
        for &c in &empties {
            let mut far_i = 0;
            let mut far_d = -1.0;
            for i in 0..n {
                if used.contains(&i) {
                    continue;
                }
                let dist = sq_dist(points.row(i), centroids.row(assignment[i]));
                if dist > far_d {
                    far_d = dist;
                    far_i = i;
                }
            }
            used.push(far_i);
            new_centroids
                .row_mut(c)
                .copy_from_slice(points.row(far_i));
        }

        // Convergence: maximum centroid movement below tol (skipped when a
        // repair happened this iteration, since the repair jump is not a
        // Lloyd step).
        let mut shift: f64 = 0.0;
        for c in 0..k {
            shift = shift.max(sq_dist(centroids.row(c), new_centroids.row(c)).sqrt());
        }
        centroids = new_centroids;
        if empties.is_empty() && shift < tol {
            break;
        }
    }

    // Final assignment against the final centroids so the nearest-centroid
    // invariant holds exactly.
    let mut inertia = 0.0;
    for i in 0..n {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..k {
            let dist = sq_dist(points.row(i), centroids.row(c));
            if dist < best_d {
                best_d = dist;
                best = c;
            }
        }
        assignment[i] = best;
        inertia += w(i) * best_d;
    }
    Ok((
        ClusterResult {
            centroids,
            assignment,
            inertia,
        },
        trace,
    ))
}

/// Average-linkage agglomerative clustering via the nearest-neighbor-chain
/// algorithm (O(n²) time, O(n²) memory for the distance matrix). Merges
/// are replayed in ascending height order until `target_clusters` remain;
/// cluster ids are numbered by first appearance in point order.
pub fn hac_average_linkage(points: &Matrix, target_clusters: usize) -> Result<Vec<usize>> {
    let n = points.rows();
    if target_clusters == 0 || target_clusters > n {
        return Err(AlError::Config(format!(
            "target_clusters must be in 1..={n}, got {target_clusters}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }

    // Pairwise Euclidean distances; slot i starts as singleton {i}.
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = sq_dist(points.row(i), points.row(j)).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut active = vec![true; n];
    let mut size = vec![1usize; n];
    let mut merges: Vec<(usize, usize, f64)> = Vec::with_capacity(n - 1);
    let mut chain: Vec<usize> = Vec::new();
    let mut n_active = n;

    while n_active > 1 {
        if chain.is_empty() {
            let start = (0..n).find(|&i| active[i]).expect("n_active > 1");
            chain.push(start);
        }
        loop {
            let a = *chain.last().expect("chain nonempty");
            // Nearest active neighbor of a, ties to the smaller slot id.
            let mut b = usize::MAX;
            let mut best = f64::INFINITY;
            for c in 0..n {
                if c == a || !active[c] {
                    continue;
                }
                let d = dist[a * n + c];
                if d < best {
                    best = d;
                    b = c;
                }
            }
            if chain.len() >= 2 && b == chain[chain.len() - 2] {
                // Mutual nearest neighbors: merge b into min(a,b)'s slot.
                chain.pop();
                chain.pop();
                let (keep, drop) = if a < b { (a, b) } else { (b, a) };
                let (sa, sb) = (size[keep] as f64, size[drop] as f64);
                for c in 0..n {
                    if active[c] && c != keep && c != drop {
                        let d = (sa * dist[keep * n + c] + sb * dist[drop * n + c]) / (sa + sb);
                        dist[keep * n + c] = d;
                        dist[c * n + keep] = d;
                    }
                }
                size[keep] += size[drop];
                active[drop] = false;
                merges.push((keep, drop, best));
                n_active -= 1;
                break;
            }
            chain.push(b);
        }
    }

    // Replay the first n - target merges in height order (average linkage
    // is monotone, so children always precede parents).
    let mut order: Vec<usize> = (0..merges.len()).collect();
    order.sort_by(|&x, &y| {
        merges[x]
            .2
            .partial_cmp(&merges[y].2)
            .expect("finite heights")
            .then(x.cmp(&y))
    });
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &mi in order.iter().take(n - target_clusters) {
        let (a, b, _) = merges[mi];
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        parent[ra.max(rb)] = ra.min(rb);
    }
    // Number clusters by first appearance.
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    let mut out = vec![0usize; n];
    for i in 0..n {
        let r = find(&mut parent, i);
        if label[r] == usize::MAX {
            label[r] = next;
            next += 1;
        }
        out[i] = label[r];
    }
    Ok(out)
}

/// PCA to `d` components (clamped to the input dimension). Returns the
/// component basis (d × dim, rows = components by descending eigenvalue,
/// sign fixed so each row's largest-magnitude entry is nonnegative) and
/// the mean-centered projection (n × d).
pub fn pca(points: &Matrix, d: usize) -> Result<(Matrix, Matrix)> {
    let n = points.rows();
    let dim = points.cols();
    if n == 0 {
        return Err(AlError::Shape("pca of an empty point set".into()));
    }
    let d = d.min(dim);
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (j, x) in points.row(i).iter().enumerate() {
            mean[j] += x;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut centered = Matrix::zeros(n, dim);
    for i in 0..n {
        let row = centered.row_mut(i);
        for j in 0..dim {
            row[j] = points.get(i, j) - mean[j];
        }
    }
    // Covariance with the 1/(n-1) convention (1/n at n=1 degenerates to 0s).
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    let mut cov = Matrix::zeros(dim, dim);
    for r in 0..n {
        let row = centered.row(r);
        for i in 0..dim {
            let ci = cov.row_mut(i);
            let xi = row[i];
            for j in 0..dim {
                ci[j] += xi * row[j];
            }
        }
    }
    for v in cov.data_mut() {
        *v /= denom;
    }
    let (eigvals, eigvecs) = jacobi_eigen(&cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigvals[b].partial_cmp(&eigvals[a]).expect("finite eigenvalues"));

    let mut basis = Matrix::zeros(d, dim);
    for (r, &e) in order.iter().take(d).enumerate() {
        // Column e of eigvecs is the eigenvector.
        let mut v: Vec<f64> = (0..dim).map(|i| eigvecs.get(i, e)).collect();
        let mut max_i = 0;
        for (i, x) in v.iter().enumerate() {
            if x.abs() > v[max_i].abs() {
                max_i = i;
            }
        }
        if v[max_i] < 0.0 {
            for x in &mut v {
                *x = -*x;
            }
        }
        basis.row_mut(r).copy_from_slice(&v);
    }
    let mut projected = Matrix::zeros(n, d);
    for i in 0..n {
        let row = centered.row(i);
        let out = projected.row_mut(i);
        for (r, o) in out.iter_mut().enumerate() {
            *o = crate::matrix::dot(row, basis.row(r));
        }
    }
    Ok((basis, projected))
}

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Returns
/// (eigenvalues, eigenvector matrix with eigenvectors in columns).
fn jacobi_eigen(sym: &Matrix) -> (Vec<f64>, Matrix) {
    let d = sym.rows();
    let mut a = sym.clone();
    let mut v = Matrix::zeros(d, d);
    for i in 0..d {
        v.set(i, i, 1.0);
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() < 1e-12 {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    1.0 / (theta - (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..d {
                    let aip = a.get(i, p);
                    let aiq = a.get(i, q);
                    a.set(i, p, c * aip - s * aiq);
                    a.set(i, q, s * aip + c * aiq);
                }
                for j in 0..d {
                    let apj = a.get(p, j);
                    let aqj = a.get(q, j);
                    a.set(p, j, c * apj - s * aqj);
                    a.set(q, j, s * apj + c * aqj);
                }
                for i in 0..d {
                    let vip = v.get(i, p);
                    let viq = v.get(i, q);
                    v.set(i, p, c * vip - s * viq);
                    v.set(i, q, s * vip + c * viq);
                }
            }
        }
    }
    let eig: Vec<f64> = (0..d).map(|i| a.get(i, i)).collect();
    (eig, v)
}

/// Squared Euclidean distances between the rows of A and the rows of B.
pub fn pairwise_sq_dist(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    if a.cols() != b.cols() {
        return Err(AlError::Shape(format!(
            "dimension mismatch {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    let mut out = Matrix::zeros(a.rows(), b.rows());
    for i in 0..a.rows() {
        let row = out.row_mut(i);
        for j in 0..b.rows() {
            row[j] = sq_dist(a.row(i), b.row(j));
        }
    }
    Ok(out)
}
