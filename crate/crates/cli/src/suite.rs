//! Suite execution: build datasets, run trials (optionally in parallel),
//! and persist curves, summaries, and the cross-method AUBC table.
//!
//! Every CSV/JSON artifact is a pure function of the configs, seeds, and
//! dataset files, so re-runs are byte-identical. Wall-clock timings are
//! informational and go to a separate plain-text file (`timing.txt`) to
//! keep that guarantee.

use crate::config::{DatasetConfig, ExperimentConfig};
use crate::formats;
use crate::svg::emit_budget_svg;
use albench_core::data::{self, DatasetSplit};
use albench_core::error::{AlError, Result};
use albench_core::experiment::{run_experiment, TrialConfig};
use albench_core::matrix::Matrix;
use albench_core::metrics::{aubc, summarize_trials, BudgetCurve};
use albench_core::rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Environment variable capping the worker-thread count.
pub const THREADS_ENV: &str = "AL_ENGINE_THREADS";

/// Outcome of one config's trial set.
#[derive(Debug)]
pub struct ConfigOutcome {
    pub name: String,
    pub dataset_name: String,
    pub curves: Vec<BudgetCurve>,
    pub errors: Vec<String>,
    pub wall_seconds: f64,
}

/// Suite-level result: per-config outcomes plus where outputs went.
#[derive(Debug)]
pub struct SuiteOutcome {
    pub configs: Vec<ConfigOutcome>,
    pub output_dir: PathBuf,
    pub any_failed: bool,
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    name: &'a str,
    dataset: &'a str,
    strategy: &'a str,
    trials_requested: usize,
    trials_completed: usize,
    mean_aubc: Option<f64>,
    std_aubc: Option<f64>,
    mean_final_acc: Option<f64>,
    per_trial_aubc: Vec<TrialAubc>,
    errors: &'a [String],
}

#[derive(Serialize)]
struct TrialAubc {
    trial: usize,
    aubc: f64,
}

/// Build the dataset a config describes.
pub fn build_dataset(ds: &DatasetConfig) -> Result<DatasetSplit> {
    let name = ds.name();
    let split = match ds {
        DatasetConfig::SynthGaussians(s) => {
            let (mut features, mut labels) =
                data::synth_gaussians(s.n_per_class, &s.means, s.std, s.data_seed)?;
            if let Some(ratios) = &s.imbalance_ratios {
                let (f2, l2) =
                    data::make_imbalanced(&features, &labels, ratios, s.imbalance_seed)?;
                features = f2;
                labels = l2;
            }
            let (trf, trl, tef, tel) =
                data::split(&features, &labels, s.test_fraction, s.split_seed)?;
            DatasetSplit {
                name,
                train_features: trf,
                train_labels: trl,
                test_features: tef,
                test_labels: tel,
                groups: None,
                k: s.means.len(),
            }
        }
        DatasetConfig::SynthXor(s) => {
            let (features, labels) = data::synth_xor(s.n, s.noise, s.data_seed)?;
            let (trf, trl, tef, tel) =
                data::split(&features, &labels, s.test_fraction, s.split_seed)?;
            DatasetSplit {
                name,
                train_features: trf,
                train_labels: trl,
                test_features: tef,
                test_labels: tel,
                groups: None,
                k: 2,
            }
        }
        DatasetConfig::SynthRings(s) => {
            let (features, labels) = data::synth_rings(s.n, &s.radii, s.noise, s.data_seed)?;
            let (trf, trl, tef, tel) =
                data::split(&features, &labels, s.test_fraction, s.split_seed)?;
            DatasetSplit {
                name,
                train_features: trf,
                train_labels: trl,
                test_features: tef,
                test_labels: tel,
                groups: None,
                k: s.radii.len(),
            }
        }
        DatasetConfig::Idx(s) => {
            let (mut trf, mut trl) = formats::load_idx(
                Path::new(&s.train_images),
                Path::new(&s.train_labels),
            )?;
            let (mut tef, mut tel) =
                formats::load_idx(Path::new(&s.test_images), Path::new(&s.test_labels))?;
            let mut rng = rng::rng_from_seed(s.subset_seed);
            if let Some(n) = s.train_subset {
                if n == 0 || n > trl.len() {
                    return Err(AlError::Config(format!(
                        "train_subset {n} out of range 1..={}",
                        trl.len()
                    )));
                }
                let mut picks = rng::sample_without_replacement(trl.len(), n, &mut rng);
                picks.sort_unstable();
                trf = trf.select_rows(&picks);
                trl = picks.iter().map(|&i| trl[i]).collect();
            }
            if let Some(n) = s.test_subset {
                if n == 0 || n > tel.len() {
                    return Err(AlError::Config(format!(
                        "test_subset {n} out of range 1..={}",
                        tel.len()
                    )));
                }
                let mut picks = rng::sample_without_replacement(tel.len(), n, &mut rng);
                picks.sort_unstable();
                tef = tef.select_rows(&picks);
                tel = picks.iter().map(|&i| tel[i]).collect();
            }
            let k = trl
                .iter()
                .chain(tel.iter())
                .max()
                .map_or(0, |&m| m + 1)
                .max(2);
            DatasetSplit {
                name,
                train_features: trf,
                train_labels: trl,
                test_features: tef,
                test_labels: tel,
                groups: None,
                k,
            }
        }
        DatasetConfig::Csv(s) => {
            let table = formats::load_csv(
                Path::new(&s.path),
                &s.label_column,
                s.group_column.as_deref(),
            )?;
            let (train_idx, test_idx) =
                data::split_indices(&table.labels, s.test_fraction, s.split_seed)?;
            let gather = |idx: &[usize]| -> Vec<usize> {
                idx.iter().map(|&i| table.labels[i]).collect()
            };
            DatasetSplit {
                name,
                train_features: table.features.select_rows(&train_idx),
                train_labels: gather(&train_idx),
                test_features: table.features.select_rows(&test_idx),
                test_labels: gather(&test_idx),
                groups: table
                    .groups
                    .as_ref()
                    .map(|g| test_idx.iter().map(|&i| g[i]).collect()),
                k: table.label_names.len().max(2),
            }
        }
    };
    split.validate()?;
    Ok(split)
}

fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Run one config's trials; trial i uses seed `base_seed + i`.
pub fn run_config(cfg: &ExperimentConfig) -> Result<ConfigOutcome> {
    let started = Instant::now();
    let dataset = build_dataset(&cfg.dataset)?;
    let learner = cfg
        .learner
        .to_core(dataset.train_features.cols(), dataset.k)?;
    let strategy = cfg.strategy.to_core()?;

    let trial_results: Vec<Result<BudgetCurve>> = {
        let run_one = |i: usize| -> Result<BudgetCurve> {
            let tc = TrialConfig {
                learner: learner.clone(),
                strategy: strategy.clone(),
                m_init: cfg.m_init,
                b: cfg.b,
                budget: cfg.q,
                seed: cfg.base_seed + i as u64,
            };
            let result = run_experiment(&tc, &dataset)?;
            trim_curve(result.curve, cfg.include_round0)
        };
        match thread_cap() {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| AlError::State(format!("thread pool: {e}")))?
                .install(|| (0..cfg.trials).into_par_iter().map(run_one).collect()),
            None => (0..cfg.trials).into_par_iter().map(run_one).collect(),
        }
    };

    let mut curves = Vec::new();
    let mut errors = Vec::new();
    for (i, r) in trial_results.into_iter().enumerate() {
        match r {
            Ok(c) => curves.push(c),
            Err(e) => errors.push(format!("trial {i}: {e}")),
        }
    }
    Ok(ConfigOutcome {
        name: cfg.name.clone(),
        dataset_name: dataset.name.clone(),
        curves,
        errors,
        wall_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Drop the round-0 point when the config excludes it.
fn trim_curve(curve: BudgetCurve, include_round0: bool) -> Result<BudgetCurve> {
    if include_round0 {
        return Ok(curve);
    }
    if curve.points.len() <= 1 {
        return Err(AlError::Config(
            "include_round0=false needs at least one acquisition round".into(),
        ));
    }
    BudgetCurve::new(curve.points[1..].to_vec())
}

fn curve_csv(curve: &BudgetCurve, include_round0: bool) -> String {
    let mut s = String::from("round,labeled,accuracy\n");
    let first_round = usize::from(!include_round0);
    for (j, (labeled, acc)) in curve.points.iter().enumerate() {
        s += &format!("{},{labeled},{acc:.6}\n", first_round + j);
    }
    s
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| AlError::Format(format!("{}: {e}", path.display())))
}

/// Execute every config, persist artifacts under each config's
/// `output_dir`, and assemble the AUBC table. Trial failures are recorded
/// in the summary and do not stop the suite.
pub fn run_suite(configs: &[ExperimentConfig]) -> Result<SuiteOutcome> {
    if configs.is_empty() {
        return Err(AlError::Config("empty suite: no configs".into()));
    }
    let output_dir = PathBuf::from(&configs[0].output_dir);
    let mut outcomes = Vec::with_capacity(configs.len());
    for cfg in configs {
        let dir = Path::new(&cfg.output_dir).join(&cfg.name);
        fs::create_dir_all(&dir)
            .map_err(|e| AlError::Format(format!("{}: {e}", dir.display())))?;
        write(
            &dir.join("resolved_config.json"),
            &(crate::config::emit_config(cfg) + "\n"),
        )?;

        let outcome = match run_config(cfg) {
            Ok(o) => o,
            Err(e) => ConfigOutcome {
                name: cfg.name.clone(),
                dataset_name: cfg.dataset.name(),
                curves: Vec::new(),
                errors: vec![format!("config: {e}")],
                wall_seconds: 0.0,
            },
        };
        for (i, curve) in outcome.curves.iter().enumerate() {
            write(
                &dir.join(format!("trial_{i}.csv")),
                &curve_csv(curve, cfg.include_round0),
            )?;
        }
        let summary = if outcome.curves.is_empty() {
            None
        } else {
            Some(summarize_trials(&outcome.curves)?)
        };
        let per_trial_aubc = outcome
            .curves
            .iter()
            .enumerate()
            .map(|(i, c)| {
                Ok(TrialAubc {
                    trial: i,
                    aubc: aubc(c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let file = SummaryFile {
            name: &outcome.name,
            dataset: &outcome.dataset_name,
            strategy: &cfg.strategy.kind,
            trials_requested: cfg.trials,
            trials_completed: outcome.curves.len(),
            mean_aubc: summary.as_ref().map(|s| s.mean_aubc),
            std_aubc: summary.as_ref().map(|s| s.std_aubc),
            mean_final_acc: summary.as_ref().map(|s| s.mean_final_acc),
            per_trial_aubc,
            errors: &outcome.errors,
        };
        let json =
            serde_json::to_string_pretty(&file).map_err(|e| AlError::Format(e.to_string()))?;
        write(&dir.join("summary.json"), &(json + "\n"))?;
        outcomes.push(outcome);
    }

    write_aubc_table(&output_dir, &outcomes)?;
    write_plots(&output_dir, &outcomes)?;
    let timing: String = outcomes
        .iter()
        .map(|o| format!("{}\t{:.3}s\n", o.name, o.wall_seconds))
        .collect();
    write(&output_dir.join("timing.txt"), &timing)?;

    let any_failed = outcomes.iter().any(|o| !o.errors.is_empty());
    Ok(SuiteOutcome {
        configs: outcomes,
        output_dir,
        any_failed,
    })
}

/// One row per method, one column per dataset, cells = mean AUBC.
fn write_aubc_table(output_dir: &Path, outcomes: &[ConfigOutcome]) -> Result<()> {
    let mut datasets: Vec<String> = Vec::new();
    let mut methods: Vec<String> = Vec::new();
    for o in outcomes {
        if !datasets.contains(&o.dataset_name) {
            datasets.push(o.dataset_name.clone());
        }
        if !methods.contains(&o.name) {
            methods.push(o.name.clone());
        }
    }
    let mut cells: BTreeMap<(String, String), f64> = BTreeMap::new();
    for o in outcomes {
        if o.curves.is_empty() {
            continue; // failed config: hole handled below
        }
        let s = summarize_trials(&o.curves)?;
        cells.insert((o.name.clone(), o.dataset_name.clone()), s.mean_aubc);
    }
    let mut table = String::from("method");
    for d in &datasets {
        table += &format!(",{d}");
    }
    table.push('\n');
    for m in &methods {
        table += m;
        for d in &datasets {
            match cells.get(&(m.clone(), d.clone())) {
                Some(v) => table += &format!(",{v:.6}"),
                None => table += ",", // missing cell: config failed everywhere
            }
        }
        table.push('\n');
    }
    write(&output_dir.join("aubc_table.csv"), &table)
}

/// One SVG per dataset whose methods share a labeled-count grid.
fn write_plots(output_dir: &Path, outcomes: &[ConfigOutcome]) -> Result<()> {
    let mut datasets: Vec<String> = Vec::new();
    for o in outcomes {
        if !datasets.contains(&o.dataset_name) {
            datasets.push(o.dataset_name.clone());
        }
    }
    for d in &datasets {
        let methods: Vec<(String, Vec<BudgetCurve>)> = outcomes
            .iter()
            .filter(|o| &o.dataset_name == d && !o.curves.is_empty())
            .map(|o| (o.name.clone(), o.curves.clone()))
            .collect();
        if methods.is_empty() {
            continue;
        }
        match emit_budget_svg(&methods) {
            Ok(svg) => write(&output_dir.join(format!("curves_{d}.svg")), &svg)?,
            Err(_) => {
                // Methods on this dataset use different grids (e.g. mixed
                // budgets); the plot is skipped but the run is still valid.
                eprintln!("note: skipping curves_{d}.svg (mismatched grids)");
            }
        }
    }
    Ok(())
}

/// Parse an AUBC table written by [`run_suite`] back into matrix form.
pub fn parse_aubc_table(text: &str) -> Result<(Vec<String>, Matrix)> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| AlError::Format("empty AUBC table".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 2 || cols[0] != "method" {
        return Err(AlError::Format(
            "AUBC table header must be `method,<dataset...>`".into(),
        ));
    }
    let width = cols.len() - 1;
    let mut methods = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(AlError::Format(format!(
                "AUBC table row {}: expected {} fields, got {}",
                no + 1,
                cols.len(),
                fields.len()
            )));
        }
        methods.push(fields[0].to_string());
        let mut row = Vec::with_capacity(width);
        for (j, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| {
                AlError::Format(format!(
                    "AUBC table row {}, column `{}`: invalid value `{f}`",
                    no + 1,
                    cols[j + 1]
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    if methods.is_empty() {
        return Err(AlError::Format("AUBC table has no method rows".into()));
    }
    Ok((methods, Matrix::from_rows(&rows)?))
}

/// Parse a curve CSV written by [`run_suite`] (`round,labeled,accuracy`).
pub fn parse_curve_csv(text: &str) -> Result<BudgetCurve> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some("round,labeled,accuracy") => {}
        _ => {
            return Err(AlError::Format(
                "curve CSV must start with `round,labeled,accuracy`".into(),
            ))
        }
    }
    let mut points = Vec::new();
    for (no, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(AlError::Format(format!(
                "curve CSV row {}: expected 3 fields",
                no + 1
            )));
        }
        let labeled: usize = fields[1]
            .parse()
            .map_err(|_| AlError::Format(format!("curve CSV row {}: bad labeled count", no + 1)))?;
        let acc: f64 = fields[2]
            .parse()
            .map_err(|_| AlError::Format(format!("curve CSV row {}: bad accuracy", no + 1)))?;
        points.push((labeled, acc));
    }
    BudgetCurve::new(points)
}
