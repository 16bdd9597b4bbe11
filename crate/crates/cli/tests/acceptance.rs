//! Acceptance gate: ten criteria covering scorer correctness, gradient
//! integrity, geometric guarantees, desk-scale statistical claims,
//! pseudo-labeling mechanics, metrics fixtures, determinism, boundary
//! consistency, and an optional image-data smoke run.
//!
//! Each test prints one `[PASS]`/`[FAIL]` (or `[SKIP]`) line; run with
//! `cargo test --test acceptance -- --nocapture` to see them all.

// Index loops over parallel arrays match the engine's numeric house style.
#![allow(clippy::needless_range_loop)]

use albench_core::acquisition::{
    score_bald, score_meanstd, score_pointwise, select_kcenter, PointwiseKind,
};
use albench_core::adversarial::{bim_distance, BimConfig, StepNorm};
use albench_core::data::{self, DatasetSplit};
use albench_core::experiment::{run_experiment, StrategyConfig, StrategyKind, TrialConfig};
use albench_core::geometry::{hac_average_linkage, kmeans};
use albench_core::learner::{
    ce_grads, ce_loss, ranking_grads, ranking_loss, train, LearnerConfig, LearnerSnapshot,
    LossHeadParams, McProbTensor, Optimizer,
};
use albench_core::matrix::Matrix;
use albench_core::metrics::{aubc, paired_t_test, rank_counts, win_tie_loss, BudgetCurve};
use albench_core::rng::{next_gaussian, next_uniform, rng_from_seed, ChaCha8Rng};
use std::time::Instant;

fn report(criterion: &str, pass: bool, elapsed: f64, detail: &str) {
    println!(
        "[{}] {criterion} ({elapsed:.1}s) {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

// ---------------------------------------------------------------------------
// 1. Scorer oracle equivalence
// ---------------------------------------------------------------------------

fn random_prob_vector(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut p: Vec<f64> = (0..k).map(|_| next_uniform(rng) + 1e-6).collect();
    let s: f64 = p.iter().sum();
    for v in &mut p {
        *v /= s;
    }
    p
}

fn oracle_entropy(p: &[f64]) -> f64 {
    -p.iter().map(|&v| v * v.ln()).sum::<f64>()
}

fn sorted_desc(p: &[f64]) -> Vec<f64> {
    let mut s = p.to_vec();
    s.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    s
}

#[test]
fn c01_scorer_oracle_equivalence() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for &k in &[2usize, 10, 62] {
        let mut rng = rng_from_seed(1000 + k as u64);
        for _ in 0..1000 {
            let p = random_prob_vector(k, &mut rng);
            let s = sorted_desc(&p);
            let cases = [
                (PointwiseKind::Entropy, oracle_entropy(&p)),
                (PointwiseKind::Margin, -(s[0] - s[1])),
                (PointwiseKind::LeastConf, -s[0]),
                (PointwiseKind::VarRatio, 1.0 - s[0]),
            ];
            for (kind, expect) in cases {
                let got = score_pointwise(kind, &p).unwrap();
                worst = worst.max((got - expect).abs());
            }
        }
        // MC ensembles: BALD via the KL form, MeanSTD via E[p^2] - m^2.
        let mut rng = rng_from_seed(2000 + k as u64);
        for _ in 0..40 {
            let (passes, n) = (7usize, 25usize);
            let mut dat = Vec::with_capacity(passes * n * k);
            for _ in 0..passes * n {
                dat.extend(random_prob_vector(k, &mut rng));
            }
            let mc = McProbTensor {
                passes,
                n,
                k,
                data: dat,
            };
            let bald = score_bald(&mc).unwrap();
            let mstd = score_meanstd(&mc).unwrap();
            for i in 0..n {
                let mut mean = vec![0.0; k];
                for t in 0..passes {
                    for c in 0..k {
                        mean[c] += mc.row(t, i)[c] / passes as f64;
                    }
                }
                let mut mi = 0.0;
                for t in 0..passes {
                    for c in 0..k {
                        let p = mc.row(t, i)[c];
                        mi += p / passes as f64 * (p / mean[c]).ln();
                    }
                }
                worst = worst.max((bald[i] - mi).abs());
                let mut acc = 0.0;
                for c in 0..k {
                    let mut e2 = 0.0;
                    for t in 0..passes {
                        let p = mc.row(t, i)[c];
                        e2 += p * p / passes as f64;
                    }
                    acc += (e2 - mean[c] * mean[c]).max(0.0).sqrt();
                }
                worst = worst.max((mstd[i] - acc / k as f64).abs());
            }
        }
    }
    let el = t0.elapsed().as_secs_f64();
    report(
        "1. scorer oracle equivalence",
        worst <= 1e-9 && el < 5.0,
        el,
        &format!("max |score - oracle| = {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 2. Gradient integrity (central finite differences)
// ---------------------------------------------------------------------------

fn fixed_snapshot(sizes: &[usize], with_head: bool, seed: u64) -> LearnerSnapshot {
    let mut rng = rng_from_seed(seed);
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..sizes.len() - 1 {
        let mut w = Matrix::zeros(sizes[l + 1], sizes[l]);
        for v in w.data_mut() {
            *v = 0.7 * next_gaussian(&mut rng);
        }
        weights.push(w);
        biases.push(
            (0..sizes[l + 1])
                .map(|_| 0.3 * next_gaussian(&mut rng))
                .collect(),
        );
    }
    let head_dim = sizes[sizes.len() - 2];
    LearnerSnapshot {
        config: LearnerConfig {
            layer_sizes: sizes.to_vec(),
            loss_head: with_head,
            ..LearnerConfig::default()
        },
        weights,
        biases,
        loss_head_params: with_head.then(|| LossHeadParams {
            w: (0..head_dim).map(|_| 0.5 * next_gaussian(&mut rng)).collect(),
            b: 0.1,
        }),
        norm_mean: vec![0.0; sizes[0]],
        norm_std: vec![1.0; sizes[0]],
    }
}

fn random_batch(n: usize, d: usize, k: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = rng_from_seed(seed);
    let mut x = Matrix::zeros(n, d);
    for v in x.data_mut() {
        *v = next_gaussian(&mut rng);
    }
    let y = (0..n).map(|i| i % k).collect();
    (x, y)
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6)
}

#[test]
fn c02_gradient_integrity() {
    let t0 = Instant::now();
    let h = 1e-5;
    let mut worst = 0.0f64;

    // Backprop through the trunk.
    {
        let snap = fixed_snapshot(&[2, 4, 3], false, 11);
        let (x, y) = random_batch(6, 2, 3, 12);
        let grads = ce_grads(&snap, &x, &y, None).unwrap();
        for l in 0..snap.weights.len() {
            for r in 0..snap.weights[l].rows() {
                for c in 0..snap.weights[l].cols() {
                    let mut plus = snap.clone();
                    plus.weights[l].row_mut(r)[c] += h;
                    let mut minus = snap.clone();
                    minus.weights[l].row_mut(r)[c] -= h;
                    let fd = (ce_loss(&plus, &x, &y, None).unwrap()
                        - ce_loss(&minus, &x, &y, None).unwrap())
                        / (2.0 * h);
                    worst = worst.max(rel_err(grads.weights[l].row(r)[c], fd));
                }
            }
            for j in 0..snap.biases[l].len() {
                let mut plus = snap.clone();
                plus.biases[l][j] += h;
                let mut minus = snap.clone();
                minus.biases[l][j] -= h;
                let fd = (ce_loss(&plus, &x, &y, None).unwrap()
                    - ce_loss(&minus, &x, &y, None).unwrap())
                    / (2.0 * h);
                worst = worst.max(rel_err(grads.biases[l][j], fd));
            }
        }
    }

    // grad_embedding = d CE(ŷ) / d W_out, one sample at a time.
    {
        let snap = fixed_snapshot(&[2, 5, 3], false, 21);
        let (x, _) = random_batch(4, 2, 3, 22);
        let emb = snap.grad_embedding(&x).unwrap();
        let last = snap.weights.len() - 1;
        let hd = snap.weights[last].cols();
        for i in 0..x.rows() {
            let xi = Matrix::from_rows(&[x.row(i).to_vec()]).unwrap();
            let yhat = snap.predict(&xi).unwrap()[0];
            for c in 0..3 {
                for j in 0..hd {
                    let mut plus = snap.clone();
                    plus.weights[last].row_mut(c)[j] += h;
                    let mut minus = snap.clone();
                    minus.weights[last].row_mut(c)[j] -= h;
                    let fd = (ce_loss(&plus, &xi, &[yhat], None).unwrap()
                        - ce_loss(&minus, &xi, &[yhat], None).unwrap())
                        / (2.0 * h);
                    worst = worst.max(rel_err(emb.row(i)[c * hd + j], fd));
                }
            }
        }
    }

    // input_gradient against raw-input perturbations.
    {
        let snap = fixed_snapshot(&[3, 6, 2], false, 31);
        let (x, _) = random_batch(3, 3, 2, 32);
        for i in 0..x.rows() {
            for target in 0..2 {
                let g = snap.input_gradient(x.row(i), target).unwrap();
                for j in 0..3 {
                    let mut xp = x.row(i).to_vec();
                    xp[j] += h;
                    let mut xm = x.row(i).to_vec();
                    xm[j] -= h;
                    let lp = -snap
                        .predict_proba(&Matrix::from_rows(&[xp]).unwrap())
                        .unwrap()
                        .get(0, target)
                        .ln();
                    let lm = -snap
                        .predict_proba(&Matrix::from_rows(&[xm]).unwrap())
                        .unwrap()
                        .get(0, target)
                        .ln();
                    worst = worst.max(rel_err(g[j], (lp - lm) / (2.0 * h)));
                }
            }
        }
    }

    // Ranking-loss gradients: head parameters and the trunk they reach.
    {
        let snap = fixed_snapshot(&[2, 4, 2], true, 41);
        let (x, _) = random_batch(6, 2, 2, 42);
        let targets: Vec<f64> = (0..6).map(|i| 0.25 * (i as f64) - 0.6).collect();
        let xi = 0.3;
        let base = ranking_loss(&snap, &x, &targets, xi).unwrap();
        assert!(base > 0.0, "fixture must have active ranking pairs");
        let grads = ranking_grads(&snap, &x, &targets, xi).unwrap();
        let head_w = grads.head_w.as_ref().unwrap();
        let head_dim = head_w.len();
        for j in 0..head_dim {
            let mut plus = snap.clone();
            plus.loss_head_params.as_mut().unwrap().w[j] += h;
            let mut minus = snap.clone();
            minus.loss_head_params.as_mut().unwrap().w[j] -= h;
            let fd = (ranking_loss(&plus, &x, &targets, xi).unwrap()
                - ranking_loss(&minus, &x, &targets, xi).unwrap())
                / (2.0 * h);
            worst = worst.max(rel_err(head_w[j], fd));
        }
        {
            let mut plus = snap.clone();
            plus.loss_head_params.as_mut().unwrap().b += h;
            let mut minus = snap.clone();
            minus.loss_head_params.as_mut().unwrap().b -= h;
            let fd = (ranking_loss(&plus, &x, &targets, xi).unwrap()
                - ranking_loss(&minus, &x, &targets, xi).unwrap())
                / (2.0 * h);
            worst = worst.max(rel_err(grads.head_b.unwrap(), fd));
        }
        for l in 0..snap.weights.len() {
            for r in 0..snap.weights[l].rows() {
                for c in 0..snap.weights[l].cols() {
                    let mut plus = snap.clone();
                    plus.weights[l].row_mut(r)[c] += h;
                    let mut minus = snap.clone();
                    minus.weights[l].row_mut(r)[c] -= h;
                    let fd = (ranking_loss(&plus, &x, &targets, xi).unwrap()
                        - ranking_loss(&minus, &x, &targets, xi).unwrap())
                        / (2.0 * h);
                    worst = worst.max(rel_err(grads.weights[l].row(r)[c], fd));
                }
            }
        }
    }

    let el = t0.elapsed().as_secs_f64();
    report(
        "2. gradient integrity vs finite differences",
        worst <= 1e-4 && el < 30.0,
        el,
        &format!("max relative error = {worst:.2e}"),
    );
}

// ---------------------------------------------------------------------------
// 3. Geometric brute-force equivalence
// ---------------------------------------------------------------------------

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn covering_radius(points: &Matrix, centers: &[usize]) -> f64 {
    (0..points.rows())
        .map(|i| {
            centers
                .iter()
                .map(|&c| dist(points.row(i), points.row(c)))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

fn brute_kcenter_radius(points: &Matrix, b: usize) -> f64 {
    let n = points.rows();
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != b {
            continue;
        }
        let centers: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        best = best.min(covering_radius(points, &centers));
    }
    best
}

/// Plain greedy average-linkage agglomeration by exhaustive pair search.
fn brute_hac(points: &Matrix, target: usize) -> Vec<usize> {
    let n = points.rows();
    let mut clusters: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    while clusters.len() > target {
        let (mut bi, mut bj, mut bd) = (0usize, 1usize, f64::INFINITY);
        for i in 0..clusters.len() {
            for j in (i + 1)..clusters.len() {
                let mut s = 0.0;
                for &a in &clusters[i] {
                    for &b in &clusters[j] {
                        s += dist(points.row(a), points.row(b));
                    }
                }
                let d = s / (clusters[i].len() * clusters[j].len()) as f64;
                if d < bd {
                    bd = d;
                    bi = i;
                    bj = j;
                }
            }
        }
        let merged = clusters.remove(bj);
        clusters[bi].extend(merged);
    }
    let mut assign = vec![0usize; n];
    for (id, members) in clusters.iter().enumerate() {
        for &m in members {
            assign[m] = id;
        }
    }
    assign
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len())
            .all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[test]
fn c03_geometric_brute_force_equivalence() {
    let t0 = Instant::now();
    let mut detail = String::new();
    let mut pass = true;

    // k-center: greedy within 2x of the exhaustive optimum, 50 instances.
    let empty = Matrix::zeros(0, 2);
    let mut worst_ratio = 0.0f64;
    for inst in 0..50u64 {
        let mut rng = rng_from_seed(500 + inst);
        let n = 8 + (inst % 5) as usize;
        let b = 2 + (inst % 3) as usize;
        let mut pts = Matrix::zeros(n, 2);
        for v in pts.data_mut() {
            *v = next_uniform(&mut rng);
        }
        let batch = select_kcenter(&empty, &pts, b, 2).unwrap();
        let greedy = covering_radius(&pts, &batch.indices);
        let optimum = brute_kcenter_radius(&pts, b);
        let ratio = if optimum > 0.0 { greedy / optimum } else { 1.0 };
        worst_ratio = worst_ratio.max(ratio);
    }
    if worst_ratio > 2.0 + 1e-9 {
        pass = false;
    }
    detail += &format!("kcenter worst greedy/opt = {worst_ratio:.3}; ");

    // kmeans recovers the two-pair partition.
    let pairs = Matrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.1, 0.0],
        vec![10.0, 0.0],
        vec![10.1, 0.0],
    ])
    .unwrap();
    let res = kmeans(&pairs, 2, 3, None).unwrap();
    let a = &res.assignment;
    let pairs_ok = a[0] == a[1] && a[2] == a[3] && a[0] != a[2];
    if !pairs_ok {
        pass = false;
    }
    detail += &format!("kmeans two-pair ok = {pairs_ok}; ");

    // HAC against the exhaustive merge oracle.
    let five = Matrix::from_rows(&[
        vec![0.0],
        vec![0.1],
        vec![0.2],
        vec![5.0],
        vec![5.1],
    ])
    .unwrap();
    let mut hac_ok = same_partition(
        &hac_average_linkage(&five, 2).unwrap(),
        &brute_hac(&five, 2),
    );
    // General-position random instances across several targets.
    for inst in 0..10u64 {
        let mut rng = rng_from_seed(900 + inst);
        let mut pts = Matrix::zeros(5, 2);
        for v in pts.data_mut() {
            *v = next_uniform(&mut rng);
        }
        for target in 1..=5 {
            hac_ok &= same_partition(
                &hac_average_linkage(&pts, target).unwrap(),
                &brute_hac(&pts, target),
            );
        }
    }
    if !hac_ok {
        pass = false;
    }
    detail += &format!("hac oracle ok = {hac_ok}");

    let el = t0.elapsed().as_secs_f64();
    report(
        "3. geometric brute-force equivalence",
        pass && el < 60.0,
        el,
        &detail,
    );
}

// ---------------------------------------------------------------------------
// 4 & 5. Desk-scale statistical claims on a shared synthetic task
// ---------------------------------------------------------------------------

/// Two overlapping 2D Gaussians (centers ±0.8, unit std) with a 4:1 class
/// imbalance: 4800/1200 points, split 1/3 pool (n=2000) / 2/3 test (4000).
fn desk_task() -> DatasetSplit {
    let means = vec![vec![-0.8, 0.0], vec![0.8, 0.0]];
    let (features, labels) = data::synth_gaussians(4800, &means, 1.0, 42).unwrap();
    let (features, labels) =
        data::make_imbalanced(&features, &labels, &[1.0, 0.25], 7).unwrap();
    let (trf, trl, tef, tel) = data::split(&features, &labels, 2.0 / 3.0, 43).unwrap();
    let ds = DatasetSplit {
        name: "gaussians-overlap".into(),
        train_features: trf,
        train_labels: trl,
        test_features: tef,
        test_labels: tel,
        groups: None,
        k: 2,
    };
    assert_eq!(ds.train_labels.len(), 2000);
    ds
}

fn desk_learner(epochs: usize) -> LearnerConfig {
    LearnerConfig {
        layer_sizes: vec![2, 32, 2],
        dropout_rate: 0.0,
        epochs,
        learning_rate: 0.003,
        optimizer: Optimizer::Adam,
        batch_size_train: 32,
        weight_init_seed: 0,
        loss_head: false,
        standardize: true,
        ranking_xi: 1.0,
    }
}

fn desk_aubcs(ds: &DatasetSplit, kind: StrategyKind, epochs: usize, seeds: u64) -> Vec<f64> {
    (0..seeds)
        .map(|s| {
            let cfg = TrialConfig {
                learner: desk_learner(epochs),
                strategy: StrategyConfig {
                    kind,
                    ..StrategyConfig::default()
                },
                m_init: 20,
                b: 20,
                budget: 400,
                seed: s,
            };
            aubc(&run_experiment(&cfg, ds).unwrap().curve).unwrap()
        })
        .collect()
}

#[test]
fn c04_uncertainty_beats_random_at_desk_scale() {
    let t0 = Instant::now();
    let ds = desk_task();
    let random = desk_aubcs(&ds, StrategyKind::Random, 30, 10);
    let rand_mean = random.iter().sum::<f64>() / random.len() as f64;
    let mut detail = format!("random mean AUBC {rand_mean:.4}; ");
    let mut pass = true;
    for kind in [
        StrategyKind::Entropy,
        StrategyKind::Margin,
        StrategyKind::LeastConf,
    ] {
        let ours = desk_aubcs(&ds, kind, 30, 10);
        let mean = ours.iter().sum::<f64>() / ours.len() as f64;
        let tt = paired_t_test(&ours, &random).unwrap();
        let diff = mean - rand_mean;
        let ok = diff >= 0.005 && tt.p < 0.1 && tt.t > 0.0;
        detail += &format!("{:?} diff {diff:.4} p {:.4} ok={ok}; ", kind, tt.p);
        pass &= ok;
    }
    let el = t0.elapsed().as_secs_f64();
    report(
        "4. uncertainty sampling beats random (paired, 10 seeds)",
        pass && el < 600.0,
        el,
        &detail,
    );
}

#[test]
fn c05_epoch_ablation_shape() {
    let t0 = Instant::now();
    let ds = desk_task();
    let mut means = Vec::new();
    for &epochs in &[5usize, 15, 30] {
        let vals = desk_aubcs(&ds, StrategyKind::Random, epochs, 10);
        means.push(vals.iter().sum::<f64>() / vals.len() as f64);
    }
    let g1 = means[1] - means[0];
    let g2 = means[2] - means[1];
    let pass = means[1] >= means[0] && means[2] >= means[1] && g2 < g1;
    let el = t0.elapsed().as_secs_f64();
    report(
        "5. epoch ablation: monotone with diminishing returns",
        pass && el < 900.0,
        el,
        &format!(
            "mean AUBC @5/15/30 epochs = {:.4}/{:.4}/{:.4}, gains {g1:.4} then {g2:.4}",
            means[0], means[1], means[2]
        ),
    );
}

// ---------------------------------------------------------------------------
// 6. Pseudo-labeling mechanics
// ---------------------------------------------------------------------------

#[test]
fn c06_pseudo_labeling_mechanics() {
    let t0 = Instant::now();
    // Extremely separable task so confident pseudo-labels exist at δ=1e-5.
    let means = vec![vec![-3.0, 0.0], vec![3.0, 0.0]];
    let (features, labels) = data::synth_gaussians(150, &means, 0.5, 8).unwrap();
    let (trf, trl, tef, tel) = data::split(&features, &labels, 0.25, 9).unwrap();
    let ds = DatasetSplit {
        name: "separated".into(),
        train_features: trf,
        train_labels: trl.clone(),
        test_features: tef,
        test_labels: tel,
        groups: None,
        k: 2,
    };
    let mut total_pseudo = 0usize;
    let mut wrong_pseudo = 0usize;
    let mut budget_ok = true;
    let mut rederived = true;
    for seed in 0..5u64 {
        let cfg = TrialConfig {
            learner: LearnerConfig {
                layer_sizes: vec![2, 16, 2],
                dropout_rate: 0.0,
                epochs: 120,
                learning_rate: 0.05,
                optimizer: Optimizer::Adam,
                batch_size_train: 32,
                weight_init_seed: 0,
                loss_head: false,
                standardize: true,
                ranking_xi: 1.0,
            },
            strategy: StrategyConfig {
                kind: StrategyKind::CealEntropy,
                delta: 1e-5,
                ..StrategyConfig::default()
            },
            m_init: 10,
            b: 5,
            budget: 50,
            seed,
        };
        let res = run_experiment(&cfg, &ds).unwrap();
        // Oracle spending is exactly the budget: pseudo-labels are free.
        budget_ok &= res.final_pool.spent == 50 && res.final_pool.labeled.len() == 60;
        rederived &= res.pseudo_history.len() == 10;
        for map in &res.pseudo_history {
            for (&idx, &lab) in map {
                total_pseudo += 1;
                if trl[idx] != lab {
                    wrong_pseudo += 1;
                }
            }
        }
    }
    let err_rate = if total_pseudo == 0 {
        1.0
    } else {
        wrong_pseudo as f64 / total_pseudo as f64
    };
    let pass = budget_ok && rederived && total_pseudo > 0 && err_rate < 0.01;
    let el = t0.elapsed().as_secs_f64();
    report(
        "6. pseudo-labels cost no budget and err < 1%",
        pass && el < 300.0,
        el,
        &format!(
            "budget_ok={budget_ok} rounds_ok={rederived} pseudo={total_pseudo} err={err_rate:.4}"
        ),
    );
}

// ---------------------------------------------------------------------------
// 7. Metrics fixtures
// ---------------------------------------------------------------------------

#[test]
fn c07_metrics_fixtures() {
    let t0 = Instant::now();
    let mut pass = true;
    let mut detail = String::new();

    // Trapezoid fixtures, exact to 1e-12.
    let fixtures = [
        (vec![(0usize, 1.0), (10, 1.0)], 1.0),
        (vec![(0, 0.0), (10, 1.0)], 0.5),
        (vec![(0, 0.2), (5, 0.4), (10, 0.6)], 0.4),
        (vec![(20, 0.7)], 0.7),
    ];
    let mut worst = 0.0f64;
    for (pts, expect) in fixtures {
        let a = aubc(&BudgetCurve::new(pts).unwrap()).unwrap();
        worst = worst.max((a - expect).abs());
    }
    pass &= worst <= 1e-12;
    detail += &format!("aubc max err {worst:.1e}; ");

    // League ordering under 2*win + tie from published counts.
    let table = rank_counts(&[
        ("CEAL".to_string(), 74, 35, 27),
        ("WAAL".to_string(), 103, 2, 31),
    ]);
    let waal = table.rows.iter().find(|r| r.method == "WAAL").unwrap();
    let ceal = table.rows.iter().find(|r| r.method == "CEAL").unwrap();
    let order_ok =
        waal.score == 208 && ceal.score == 183 && waal.rank < ceal.rank;
    pass &= order_ok;
    detail += &format!("league order ok = {order_ok}; ");

    // Count identities vs a brute-force pairwise oracle on random tables.
    let mut ids_ok = true;
    for t in 0..20u64 {
        let m = 3 + (t % 4) as usize;
        let d = 3 + (t % 6) as usize;
        let mut rng = rng_from_seed(7000 + t);
        let mut vals = Matrix::zeros(m, d);
        for v in vals.data_mut() {
            *v = 0.5 + 0.5 * next_uniform(&mut rng);
        }
        let names: Vec<String> = (0..m).map(|i| format!("m{i}")).collect();
        let margin = 0.005;
        let league = win_tie_loss(&names, &vals, margin).unwrap();
        let (mut tw, mut tl) = (0usize, 0usize);
        for r in 0..m {
            let (mut w, mut ti, mut l) = (0usize, 0usize, 0usize);
            for o in 0..m {
                if o == r {
                    continue;
                }
                for c in 0..d {
                    let diff = vals.get(r, c) - vals.get(o, c);
                    if diff > margin {
                        w += 1;
                    } else if diff < -margin {
                        l += 1;
                    } else {
                        ti += 1;
                    }
                }
            }
            let row = league
                .rows
                .iter()
                .find(|x| x.method == names[r])
                .unwrap();
            ids_ok &= row.win == w && row.tie == ti && row.loss == l;
            ids_ok &= w + ti + l == d * (m - 1);
            tw += w;
            tl += l;
        }
        ids_ok &= tw == tl;
    }
    pass &= ids_ok;
    detail += &format!("count identities ok = {ids_ok}");

    let el = t0.elapsed().as_secs_f64();
    report("7. metrics fixtures", pass && el < 5.0, el, &detail);
}

// ---------------------------------------------------------------------------
// 8. Determinism across re-runs and thread counts
// ---------------------------------------------------------------------------

fn collect_artifacts(root: &std::path::Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
                if ext == "csv" || ext == "json" {
                    let rel = path
                        .strip_prefix(root)
                        .unwrap()
                        .to_string_lossy()
                        .to_string();
                    out.push((rel, std::fs::read(&path).unwrap()));
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn c08_suite_outputs_deterministic() {
    let t0 = Instant::now();
    let suite = |out: &std::path::Path| {
        format!(
            r#"[
              {{"name": "random",
                "dataset": {{"kind": "synth_gaussians", "n_per_class": 80,
                             "means": [[-1.5, 0.0], [1.5, 0.0]], "name": "blobs"}},
                "learner": {{"hidden_layers": [8], "epochs": 4}},
                "strategy": {{"kind": "random"}},
                "m_init": 8, "b": 4, "q": 12, "trials": 2,
                "base_seed": 3, "output_dir": "{0}"}},
              {{"name": "margin",
                "dataset": {{"kind": "synth_gaussians", "n_per_class": 80,
                             "means": [[-1.5, 0.0], [1.5, 0.0]], "name": "blobs"}},
                "learner": {{"hidden_layers": [8], "epochs": 4}},
                "strategy": {{"kind": "margin"}},
                "m_init": 8, "b": 4, "q": 12, "trials": 2,
                "base_seed": 3, "output_dir": "{0}"}}
            ]"#,
            out.display()
        )
    };
    let run = |dir: &std::path::Path, threads: &str| {
        std::env::set_var(albench::suite::THREADS_ENV, threads);
        let cfgs = albench::config::parse_configs_str(&suite(dir)).unwrap();
        let outcome = albench::suite::run_suite(&cfgs).unwrap();
        std::env::remove_var(albench::suite::THREADS_ENV);
        assert!(!outcome.any_failed);
        collect_artifacts(dir)
    };
    // Re-run the identical suite into the same directory under different
    // worker caps; every CSV/JSON artifact must come back byte-identical.
    let t1 = tempfile::tempdir().unwrap();
    let a = run(t1.path(), "1");
    let b = run(t1.path(), "4");
    let c = run(t1.path(), "2");
    let names_ok = !a.is_empty()
        && a.iter().map(|x| &x.0).eq(b.iter().map(|x| &x.0))
        && a.iter().map(|x| &x.0).eq(c.iter().map(|x| &x.0));
    let bytes_ok = a == b && a == c;
    let pass = names_ok && bytes_ok;
    let el = t0.elapsed().as_secs_f64();
    report(
        "8. byte-identical suite outputs across re-runs/threads",
        pass && el < 300.0,
        el,
        &format!("{} CSV/JSON artifacts compared", a.len()),
    );
}

// ---------------------------------------------------------------------------
// 9. Adversarial-distance boundary consistency
// ---------------------------------------------------------------------------

fn ranks_avg(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).expect("orderable"));
    let mut r = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            r[idx] = avg;
        }
        i = j + 1;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks_avg(a), ranks_avg(b));
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for i in 0..ra.len() {
        let da = ra[i] - ma;
        let db = rb[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    num / (va.sqrt() * vb.sqrt())
}

#[test]
fn c09_adversarial_scores_track_boundary_distance() {
    let t0 = Instant::now();
    // Linear-boundary task: symmetric Gaussians either side of x = 0.
    let means = vec![vec![-2.0, 0.0], vec![2.0, 0.0]];
    let (features, labels) = data::synth_gaussians(1000, &means, 0.8, 5).unwrap();
    let cfg = LearnerConfig {
        layer_sizes: vec![2, 16, 2],
        dropout_rate: 0.0,
        epochs: 150,
        learning_rate: 0.01,
        optimizer: Optimizer::Adam,
        batch_size_train: 32,
        weight_init_seed: 0,
        loss_head: false,
        standardize: true,
        ranking_xi: 1.0,
    };
    let snap = train(&cfg, &features, &labels, None, 1).unwrap();
    let bim = BimConfig {
        epsilon_step: 0.005,
        max_steps: 3000,
        norm: StepNorm::LInf,
    };
    let mut rng = rng_from_seed(99);
    let mut scores = Vec::with_capacity(200);
    let mut true_dist = Vec::with_capacity(200);
    for _ in 0..200 {
        let x1 = 5.0 * next_uniform(&mut rng) - 2.5;
        let x2 = 2.4 * next_uniform(&mut rng) - 1.2;
        let out = bim_distance(&snap, &[x1, x2], &bim).unwrap();
        scores.push(-out.r_norm);
        true_dist.push(x1.abs());
    }
    let rho = spearman(&scores, &true_dist);
    let el = t0.elapsed().as_secs_f64();
    report(
        "9. adversarial scores anti-correlate with boundary distance",
        rho <= -0.95 && el < 120.0,
        el,
        &format!("spearman rho = {rho:.4} over 200 points"),
    );
}

// ---------------------------------------------------------------------------
// 10. Optional image-data smoke run (skips without local IDX files)
// ---------------------------------------------------------------------------

fn find_idx_dir() -> Option<std::path::PathBuf> {
    let mut candidates: Vec<std::path::PathBuf> = Vec::new();
    if let Ok(dir) = std::env::var("ALBENCH_MNIST_DIR") {
        candidates.push(dir.into());
    }
    candidates.push("data/mnist".into());
    candidates.push("../../data/mnist".into());
    let stems = [
        "train-images-idx3-ubyte",
        "train-labels-idx1-ubyte",
        "t10k-images-idx3-ubyte",
        "t10k-labels-idx1-ubyte",
    ];
    'outer: for dir in candidates {
        for stem in stems {
            let plain = dir.join(stem);
            let gz = dir.join(format!("{stem}.gz"));
            if !plain.exists() && !gz.exists() {
                continue 'outer;
            }
        }
        return Some(dir);
    }
    None
}

fn idx_pair(dir: &std::path::Path, stem: &str) -> String {
    let plain = dir.join(stem);
    if plain.exists() {
        plain.to_string_lossy().to_string()
    } else {
        dir.join(format!("{stem}.gz")).to_string_lossy().to_string()
    }
}

#[test]
fn c10_image_subset_smoke() {
    let t0 = Instant::now();
    let Some(dir) = find_idx_dir() else {
        println!(
            "[SKIP] 10. image-subset smoke run (no IDX files; set ALBENCH_MNIST_DIR to enable)"
        );
        return;
    };
    let spec = albench::config::DatasetConfig::Idx(albench::config::IdxSpec {
        name: "mnist5k".into(),
        train_images: idx_pair(&dir, "train-images-idx3-ubyte"),
        train_labels: idx_pair(&dir, "train-labels-idx1-ubyte"),
        test_images: idx_pair(&dir, "t10k-images-idx3-ubyte"),
        test_labels: idx_pair(&dir, "t10k-labels-idx1-ubyte"),
        train_subset: Some(5000),
        test_subset: Some(2000),
        subset_seed: 0,
    });
    let ds = albench::suite::build_dataset(&spec).unwrap();
    let learner = |loss_head: bool| LearnerConfig {
        layer_sizes: vec![ds.train_features.cols(), 128, ds.k],
        dropout_rate: 0.2,
        epochs: 5,
        learning_rate: 0.01,
        optimizer: Optimizer::Adam,
        batch_size_train: 128,
        weight_init_seed: 0,
        loss_head,
        standardize: true,
        ranking_xi: 1.0,
    };
    let strategy = |kind: StrategyKind| StrategyConfig {
        kind,
        t_passes: 5,
        bim: BimConfig {
            epsilon_step: 0.1,
            max_steps: 8,
            norm: StepNorm::LInf,
        },
        ..StrategyConfig::default()
    };
    // Every strategy completes the full loop.
    let mut completed = 0;
    for &kind in StrategyKind::ALL.iter() {
        let cfg = TrialConfig {
            learner: learner(kind == StrategyKind::Lpl),
            strategy: strategy(kind),
            m_init: 100,
            b: 100,
            budget: 1000,
            seed: 0,
        };
        let res = run_experiment(&cfg, &ds).unwrap();
        assert_eq!(res.curve.points.len(), 11);
        completed += 1;
    }
    // Margin at least matches random over 3 paired trials.
    let mean = |kind: StrategyKind| -> f64 {
        (0..3u64)
            .map(|s| {
                let cfg = TrialConfig {
                    learner: learner(false),
                    strategy: strategy(kind),
                    m_init: 100,
                    b: 100,
                    budget: 1000,
                    seed: s,
                };
                aubc(&run_experiment(&cfg, &ds).unwrap().curve).unwrap()
            })
            .sum::<f64>()
            / 3.0
    };
    let margin = mean(StrategyKind::Margin);
    let random = mean(StrategyKind::Random);
    let pass = completed == StrategyKind::ALL.len() && margin >= random;
    let el = t0.elapsed().as_secs_f64();
    report(
        "10. image-subset smoke run",
        pass && el < 1200.0,
        el,
        &format!("{completed} strategies completed; margin {margin:.4} vs random {random:.4}"),
    );
}
