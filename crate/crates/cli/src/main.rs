//! Command-line entry point for the active-learning benchmark runner.

use albench::config::parse_configs;
use albench::suite::{parse_aubc_table, parse_curve_csv, run_suite};
use albench::svg::emit_budget_svg;
use albench_core::acquisition::score_pointwise;
use albench_core::error::Result;
use albench_core::experiment::{pointwise_kind, StrategyKind};
use albench_core::metrics::{win_tie_loss, BudgetCurve};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "albench",
    about = "Pool-based active-learning benchmark runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a JSON experiment config (single object or array).
    Run {
        config: PathBuf,
        /// Override every config's base_seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Rank methods in an AUBC table (win/tie/loss league).
    Rank {
        table: PathBuf,
        /// Tie margin on AUBC differences.
        #[arg(long, default_value_t = 0.005)]
        margin: f64,
    },
    /// Score probability rows from a CSV with a pointwise strategy.
    Score {
        /// Strategy kind: entropy, margin, least_conf, or var_ratio.
        #[arg(long)]
        strategy: String,
        /// Headerless CSV, one probability vector per row.
        #[arg(long)]
        probs: PathBuf,
    },
    /// Plot curve CSVs (round,labeled,accuracy) into one SVG.
    Plot {
        /// Curve files; `trial_*.csv` files are grouped by parent directory.
        #[arg(required = true)]
        curves: Vec<PathBuf>,
        #[arg(long, default_value = "curves.svg")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse(); // exits 2 with usage text on bad flags
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed } => cmd_run(&config, seed),
        Command::Rank { table, margin } => cmd_rank(&table, margin),
        Command::Score { strategy, probs } => cmd_score(&strategy, &probs),
        Command::Plot { curves, out } => cmd_plot(&curves, &out),
    }
}

fn cmd_run(config_path: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let mut configs = parse_configs(config_path)?;
    if let Some(s) = seed {
        for c in &mut configs {
            c.base_seed = s;
        }
    }
    let outcome = run_suite(&configs)?;
    for c in &outcome.configs {
        if c.curves.is_empty() {
            println!("{}: no completed trials", c.name);
        } else {
            let s = albench_core::metrics::summarize_trials(&c.curves)?;
            println!(
                "{}: AUBC {:.4} \u{b1} {:.4} over {} trials",
                c.name,
                s.mean_aubc,
                s.std_aubc,
                c.curves.len()
            );
        }
        for e in &c.errors {
            eprintln!("{}: {e}", c.name);
        }
    }
    println!("outputs: {}", outcome.output_dir.display());
    Ok(if outcome.any_failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_rank(table_path: &Path, margin: f64) -> Result<ExitCode> {
    let text = std::fs::read_to_string(table_path).map_err(|e| {
        albench_core::error::AlError::Format(format!("{}: {e}", table_path.display()))
    })?;
    let (methods, values) = parse_aubc_table(&text)?;
    let league = win_tie_loss(&methods, &values, margin)?;
    print!("{}", league.to_csv());
    Ok(ExitCode::SUCCESS)
}

fn cmd_score(strategy: &str, probs_path: &Path) -> Result<ExitCode> {
    let kind = StrategyKind::parse(strategy)?;
    let Some(pw) = pointwise_kind(kind) else {
        eprintln!(
            "error: `score` supports pointwise strategies only \
             (entropy, margin, least_conf, var_ratio); got `{strategy}`"
        );
        return Ok(ExitCode::from(2));
    };
    let text = std::fs::read_to_string(probs_path).map_err(|e| {
        albench_core::error::AlError::Format(format!("{}: {e}", probs_path.display()))
    })?;
    for (no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|_| {
            albench_core::error::AlError::Format(format!(
                "{}: row {}: invalid float",
                probs_path.display(),
                no + 1
            ))
        })?;
        println!("{:.6}", score_pointwise(pw, &row)?);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_plot(curve_paths: &[PathBuf], out: &Path) -> Result<ExitCode> {
    let mut methods: Vec<(String, Vec<BudgetCurve>)> = Vec::new();
    for p in curve_paths {
        let text = std::fs::read_to_string(p).map_err(|e| {
            albench_core::error::AlError::Format(format!("{}: {e}", p.display()))
        })?;
        let curve = parse_curve_csv(&text)?;
        let stem = p
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "curve".into());
        let label = if stem.starts_with("trial_") {
            p.parent()
                .and_then(|d| d.file_name())
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or(stem)
        } else {
            stem
        };
        match methods.iter_mut().find(|(name, _)| *name == label) {
            Some((_, curves)) => curves.push(curve),
            None => methods.push((label, vec![curve])),
        }
    }
    let svg = emit_budget_svg(&methods)?;
    std::fs::write(out, svg)
        .map_err(|e| albench_core::error::AlError::Format(format!("{}: {e}", out.display())))?;
    println!("wrote {}", out.display());
    Ok(ExitCode::SUCCESS)
}
