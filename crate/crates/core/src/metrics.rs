//! Evaluation metrics: budget curves, AUBC, grouped accuracy, paired
//! t-tests, and win-tie-loss league tables.

use crate::error::{AlError, Result};
use crate::math::t_two_sided_p;
#[allow(unused_imports)] // trait needed by the no_std build only
use crate::math::F64Ext;
use crate::matrix::Matrix;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

/// Accuracy as a function of labeled-set size. `points` is ordered with
/// strictly increasing labeled counts and is never empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetCurve {
    pub points: Vec<(usize, f64)>,
}

impl BudgetCurve {
    pub fn new(points: Vec<(usize, f64)>) -> Result<BudgetCurve> {
        let c = BudgetCurve { points };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        if self.points.is_empty() {
            return Err(AlError::Config("budget curve needs at least one point".into()));
        }
        for w in self.points.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(AlError::Config(format!(
                    "labeled counts must strictly increase, got {} then {}",
                    w[0].0, w[1].0
                )));
            }
        }
        Ok(())
    }
}

/// Area under the budget curve: trapezoidal integral of accuracy over
/// labeled count, normalized by the count range. A single-point curve
/// returns its accuracy.
pub fn aubc(curve: &BudgetCurve) -> Result<f64> {
    curve.validate()?;
    if curve.points.len() == 1 {
        return Ok(curve.points[0].1);
    }
    let first = curve.points[0].0 as f64;
    let last = curve.points[curve.points.len() - 1].0 as f64;
    let mut area = 0.0;
    for w in curve.points.windows(2) {
        let dx = (w[1].0 - w[0].0) as f64;
        area += dx * (w[0].1 + w[1].1) * 0.5;
    }
    Ok(area / (last - first))
}

/// Accuracy of the last curve point (after the budget is exhausted).
pub fn final_accuracy(curve: &BudgetCurve) -> Result<f64> {
    curve.validate()?;
    Ok(curve.points.last().expect("validated non-empty").1)
}

/// Plain classification accuracy.
pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(AlError::Shape(format!(
            "{} predictions vs {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if predictions.is_empty() {
        return Err(AlError::Config("empty evaluation set".into()));
    }
    let hits = predictions
        .iter()
        .zip(labels.iter())
        .filter(|(p, y)| p == y)
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupedAccuracy {
    /// Accuracy per group id present in `groups`.
    pub per_group: BTreeMap<usize, f64>,
    /// Minimum per-group accuracy.
    pub worst: f64,
    /// Pooled accuracy over the caller-named subset of group ids, when
    /// requested and at least one named group has samples.
    pub subset: Option<f64>,
    /// Subset ids that matched no samples (excluded with a warning left
    /// to the caller to surface).
    pub missing_subset_groups: Vec<usize>,
}

/// Per-group, worst-group, and optional pooled-subset accuracy.
pub fn grouped_accuracy(
    predictions: &[usize],
    labels: &[usize],
    groups: &[usize],
    subset: Option<&[usize]>,
) -> Result<GroupedAccuracy> {
    if predictions.len() != labels.len() || labels.len() != groups.len() {
        return Err(AlError::Shape(format!(
            "length mismatch: {} predictions, {} labels, {} groups",
            predictions.len(),
            labels.len(),
            groups.len()
        )));
    }
    if predictions.is_empty() {
        return Err(AlError::Config("empty evaluation set".into()));
    }
    let mut correct: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for i in 0..labels.len() {
        let e = correct.entry(groups[i]).or_insert((0, 0));
        e.1 += 1;
        if predictions[i] == labels[i] {
            e.0 += 1;
        }
    }
    let per_group: BTreeMap<usize, f64> = correct
        .iter()
        .map(|(&g, &(c, n))| (g, c as f64 / n as f64))
        .collect();
    let worst = per_group.values().fold(f64::INFINITY, |a, &b| a.min(b));
    let (subset_acc, missing) = match subset {
        None => (None, Vec::new()),
        Some(ids) => {
            let mut c = 0usize;
            let mut n = 0usize;
            let mut missing = Vec::new();
            for &g in ids {
                match correct.get(&g) {
                    Some(&(gc, gn)) => {
                        c += gc;
                        n += gn;
                    }
                    None => missing.push(g),
                }
            }
            if n == 0 {
                (None, missing)
            } else {
                (Some(c as f64 / n as f64), missing)
            }
        }
    };
    Ok(GroupedAccuracy {
        per_group,
        worst,
        subset: subset_acc,
        missing_subset_groups: missing,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub p: f64,
    pub df: f64,
}

/// Paired two-sided t-test on the differences a−b, df = n−1.
/// Degenerate-variance sentinels: all differences zero → p=1; zero
/// variance with nonzero mean → p=0.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    if a.len() != b.len() {
        return Err(AlError::Shape(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(AlError::Config("paired t-test needs at least 2 pairs".into()));
    }
    let n = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).collect();
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(AlError::Config("non-finite differences".into()));
    }
    let mean = diffs.iter().sum::<f64>() / n;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let df = n - 1.0;
    let sd = (ss / df).sqrt();
    if sd == 0.0 {
        return if mean == 0.0 {
            Ok(TTestResult { t: 0.0, p: 1.0, df })
        } else {
            Ok(TTestResult {
                t: if mean > 0.0 { f64::INFINITY } else { f64::NEG_INFINITY },
                p: 0.0,
                df,
            })
        };
    }
    let t = mean / (sd / n.sqrt());
    Ok(TTestResult {
        t,
        p: t_two_sided_p(t, df),
        df,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WtlRow {
    pub method: String,
    pub win: usize,
    pub tie: usize,
    pub loss: usize,
    /// 2·win + tie.
    pub score: usize,
    /// 1-based position after sorting by descending score, ties by name.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WinTieLossTable {
    pub rows: Vec<WtlRow>,
}

impl WinTieLossTable {
    /// `method,win,tie,loss,score,rank` with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,win,tie,loss,score,rank\n");
        for r in &self.rows {
            s += &format!(
                "{},{},{},{},{},{}\n",
                r.method, r.win, r.tie, r.loss, r.score, r.rank
            );
        }
        s
    }
}

/// Rank methods from precomputed (win, tie, loss) counts by descending
/// 2·win + tie, breaking score ties by method name.
pub fn rank_counts(counts: &[(String, usize, usize, usize)]) -> WinTieLossTable {
    let mut rows: Vec<WtlRow> = counts
        .iter()
        .map(|(m, w, t, l)| WtlRow {
            method: m.clone(),
            win: *w,
            tie: *t,
            loss: *l,
            score: 2 * w + t,
            rank: 0,
        })
        .collect();
    rows.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.method.cmp(&b.method)));
    for (i, r) in rows.iter_mut().enumerate() {
        r.rank = i + 1;
    }
    WinTieLossTable { rows }
}

/// Pairwise league table over an AUBC matrix (methods × datasets): per
/// dataset, method A beats B when its AUBC exceeds B's by more than
/// `margin` (absolute), ties inside the margin.
pub fn win_tie_loss(
    methods: &[String],
    aubc_values: &Matrix,
    margin: f64,
) -> Result<WinTieLossTable> {
    if methods.len() != aubc_values.rows() {
        return Err(AlError::Shape(format!(
            "{} methods vs {} table rows",
            methods.len(),
            aubc_values.rows()
        )));
    }
    if methods.is_empty() {
        return Err(AlError::Config("empty league table".into()));
    }
    if !(margin >= 0.0) {
        return Err(AlError::Config("margin must be nonnegative".into()));
    }
    let m = methods.len();
    let d = aubc_values.cols();
    let mut counts: Vec<(usize, usize, usize)> = alloc::vec![(0, 0, 0); m];
    for ds in 0..d {
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let ai = aubc_values.get(i, ds);
                let aj = aubc_values.get(j, ds);
                if ai > aj + margin {
                    counts[i].0 += 1;
                } else if ai < aj - margin {
                    counts[i].2 += 1;
                } else {
                    counts[i].1 += 1;
                }
            }
        }
    }
    let rows: Vec<(String, usize, usize, usize)> = methods
        .iter()
        .cloned()
        .zip(counts)
        .map(|(name, (w, t, l))| (name, w, t, l))
        .collect();
    Ok(rank_counts(&rows))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSummary {
    pub mean_aubc: f64,
    pub std_aubc: f64,
    pub mean_final_acc: f64,
}

/// Mean/std AUBC (population std) and mean final accuracy across trials
/// sharing one labeled-count grid.
pub fn summarize_trials(curves: &[BudgetCurve]) -> Result<TrialSummary> {
    if curves.is_empty() {
        return Err(AlError::Config("no trials to summarize".into()));
    }
    let grid: Vec<usize> = curves[0].points.iter().map(|p| p.0).collect();
    for (i, c) in curves.iter().enumerate() {
        let g: Vec<usize> = c.points.iter().map(|p| p.0).collect();
        if g != grid {
            return Err(AlError::Config(format!(
                "trial {i} has a different labeled-count grid"
            )));
        }
    }
    let n = curves.len() as f64;
    let aubcs: Vec<f64> = curves.iter().map(aubc).collect::<Result<_>>()?;
    let mean_aubc = aubcs.iter().sum::<f64>() / n;
    let var = aubcs.iter().map(|a| (a - mean_aubc) * (a - mean_aubc)).sum::<f64>() / n;
    let mean_final = curves
        .iter()
        .map(final_accuracy)
        .collect::<Result<Vec<_>>>()?
        .iter()
        .sum::<f64>()
        / n;
    Ok(TrialSummary {
        mean_aubc,
        std_aubc: var.sqrt(),
        mean_final_acc: mean_final,
    })
}
