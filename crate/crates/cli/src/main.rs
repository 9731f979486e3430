use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use innovsim::harness::batch::{
    config_echo, run_batch, run_one, summarize, BatchOptions, BatchSummary, RunDetail,
};
use innovsim::harness::report::{self, CONFIG_FILE, RECORD_FILE, RUNS_FILE, SUMMARY_FILE};
use innovsim::harness::scenario::{catalog, find_scenario, ScenarioConfig};
use innovsim::harness::stats::DEFAULT_RESAMPLES;
use innovsim::rng::derive_seed;
use innovsim::Error;

#[derive(Parser)]
#[command(
    name = "innovsim",
    version,
    about = "Bit-string market and self-organization simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single simulation and write its JSON record.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Seed of this run (default: the seed of run 0 of a batch).
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: OutArgs,
        /// Keep per-step cash and satisfaction series in the record.
        #[arg(long)]
        timeseries: bool,
    },
    /// Run a seeded batch and write runs.csv, summary.json and histograms.
    Batch {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Base seed; run i uses a seed derived from it and i.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of runs (overrides the config's `runs`).
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads (results do not depend on this).
        #[arg(long, default_value_t = default_jobs())]
        jobs: usize,
        #[command(flatten)]
        out: OutArgs,
        /// Also write every run's full record under records/.
        #[arg(long)]
        timeseries: bool,
        #[command(flatten)]
        summary: SummaryArgs,
    },
    /// List built-in scenarios, or print one as a config file.
    Catalog {
        #[arg(long, value_name = "NAME")]
        show: Option<String>,
    },
    /// Re-aggregate the runs.csv of an earlier batch into a summary.
    Report {
        /// Batch output directory holding runs.csv and scenario.cfg.
        dir: PathBuf,
        /// Summary file to write (default: <DIR>/summary.json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replace an existing summary file.
        #[arg(long)]
        force: bool,
        #[command(flatten)]
        summary: SummaryArgs,
        /// Print the summary as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    /// Config file with flat `key = value` lines.
    #[arg(
        long,
        conflicts_with = "scenario",
        required_unless_present = "scenario"
    )]
    config: Option<PathBuf>,
    /// Built-in scenario name (see `catalog`).
    #[arg(long)]
    scenario: Option<String>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct OutArgs {
    /// Output directory (default: out/<scenario name>).
    #[arg(long, env = "INNOVSIM_OUT_DIR")]
    out_dir: Option<PathBuf>,
    /// Write into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct SummaryArgs {
    /// Keep flagged runs in the correlations.
    #[arg(long)]
    include_degenerate: bool,
    /// Bootstrap resamples for the confidence intervals.
    #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
    resamples: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn load_scenario(args: &ScenarioArgs) -> CliResult<ScenarioConfig> {
    let base = match (&args.config, &args.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            let stem = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("scenario");
            ScenarioConfig::from_config_text(&text, stem)
                .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
        }
        (None, Some(name)) => find_scenario(name)?,
        (None, None) => {
            return Err(Failure::Usage(
                "one of --config or --scenario is required".into(),
            ))
        }
    };
    Ok(base.with_overrides(&args.overrides)?)
}

fn out_dir(out: &OutArgs, config: &ScenarioConfig) -> PathBuf {
    out.out_dir
        .clone()
        .unwrap_or_else(|| Path::new("out").join(&config.name))
}

#[derive(Serialize)]
struct RunOutput<'a> {
    scenario: &'a str,
    config: std::collections::BTreeMap<String, serde_json::Value>,
    overrides: &'a [String],
    record: &'a RunDetail,
}

fn cmd_run(
    scenario: ScenarioArgs,
    seed: Option<u64>,
    out: OutArgs,
    timeseries: bool,
) -> CliResult<()> {
    let config = load_scenario(&scenario)?;
    let seed = seed.unwrap_or_else(|| derive_seed(config.base_seed, 0));
    let dir = out_dir(&out, &config);
    report::prepare_out_dir(&dir, out.force)?;
    let detail = run_one(&config.model, seed, timeseries)?;
    report::write_config(&dir, &config)?;
    report::write_json(
        &dir.join(RECORD_FILE),
        &RunOutput {
            scenario: &config.name,
            config: config_echo(&config),
            overrides: &scenario.overrides,
            record: &detail,
        },
    )?;
    match &detail {
        RunDetail::Market(r) => {
            let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
            println!(
                "{}: seed {seed}, {} steps, g_or_s {}, flags [{}]",
                config.name,
                r.steps_run,
                fmt_opt(r.efficiency),
                flags.join(", ")
            );
        }
        RunDetail::SelfOrg(r) => {
            for (name, h) in [
                ("fitness_t0", &r.fitness_initial_hist),
                ("fitness_tT", &r.fitness_final_hist),
                ("p_diversity_t0", &r.initial.p_diversity),
                ("p_diversity_tT", &r.end.p_diversity),
                ("n_diversity_t0", &r.initial.n_diversity),
                ("n_diversity_tT", &r.end.n_diversity),
            ] {
                report::write_histogram_csv(&report::histogram_path(&dir, name), h)?;
            }
            println!(
                "{}: seed {seed}, fitness std {:.3} -> {:.3}, replacements {}",
                config.name,
                r.initial.fitness_std(),
                r.end.fitness_std(),
                r.total_replacements()
            );
        }
    }
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_batch(
    scenario: ScenarioArgs,
    seed: Option<u64>,
    runs: Option<usize>,
    jobs: usize,
    out: OutArgs,
    timeseries: bool,
    summary: SummaryArgs,
) -> CliResult<()> {
    let mut config = load_scenario(&scenario)?;
    if let Some(seed) = seed {
        config.base_seed = seed;
    }
    if let Some(runs) = runs {
        if runs == 0 {
            return Err(Failure::Usage("--runs must be positive".into()));
        }
        config.runs = runs;
    }
    if jobs == 0 {
        return Err(Failure::Usage("--jobs must be at least 1".into()));
    }
    let dir = out_dir(&out, &config);
    report::prepare_out_dir(&dir, out.force)?;
    let options = BatchOptions {
        jobs,
        keep_timeseries: timeseries,
        include_degenerate: summary.include_degenerate,
        resamples: summary.resamples,
    };
    let batch = run_batch(&config, &scenario.overrides, &options, |i, detail| {
        if timeseries {
            report::write_json(&report::record_path(&dir, i), detail)?;
        }
        Ok(())
    })?;
    report::write_batch(&dir, &batch)?;
    print_summary(&batch.summary);
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_catalog(show: Option<String>) -> CliResult<()> {
    match show {
        Some(name) => print!("{}", find_scenario(&name)?.to_config_text()),
        None => {
            let entries = catalog();
            let width = entries
                .iter()
                .map(|e| e.config.name.len())
                .max()
                .unwrap_or(0);
            for e in entries {
                println!(
                    "{:width$}  {:7}  {}",
                    e.config.name,
                    e.config.model.name(),
                    e.description
                );
            }
        }
    }
    Ok(())
}

fn cmd_report(
    dir: PathBuf,
    out: Option<PathBuf>,
    force: bool,
    summary: SummaryArgs,
    json: bool,
) -> CliResult<()> {
    let cfg_path = dir.join(CONFIG_FILE);
    let text = fs::read_to_string(&cfg_path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", cfg_path.display())))?;
    let config = ScenarioConfig::from_config_text(&text, "scenario")
        .map_err(|e| Failure::Usage(format!("{}: {e}", cfg_path.display())))?;
    let (names, records) = report::read_runs_csv(&dir.join(RUNS_FILE))?;
    let s = summarize(
        &config,
        &[],
        &names,
        &records,
        summary.include_degenerate,
        summary.resamples,
    )?;
    let out = out.unwrap_or_else(|| dir.join(SUMMARY_FILE));
    if out.exists() && !force {
        return Err(Error::WouldOverwrite { path: out }.into());
    }
    report::write_json(&out, &s)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&s).map_err(Error::from)?);
    } else {
        print_summary(&s);
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

fn print_summary(s: &BatchSummary) {
    println!(
        "{}: {} runs, base seed {}, {} flagged",
        s.scenario, s.runs, s.base_seed, s.degenerate_runs
    );
    for (flag, n) in &s.flag_counts {
        println!("  {flag}: {n}");
    }
    println!(
        "{:28} {:>6} {:>10} {:>10} {:>22}",
        "metric", "n", "mean", "std", "95% CI"
    );
    for m in s.outcome.iter().chain(&s.metrics) {
        let ci = m.ci95.map_or_else(
            || "n/a".to_string(),
            |c| format!("[{:.4}, {:.4}]", c.lo, c.hi),
        );
        println!(
            "{:28} {:>6} {:>10} {:>10} {:>22}",
            m.name,
            m.count,
            fmt_opt(m.mean),
            fmt_opt(m.std),
            ci
        );
    }
    if !s.correlations.is_empty() {
        println!("correlation with g_or_s");
        for c in &s.correlations {
            let ci = c.ci95.map_or_else(
                || "n/a".to_string(),
                |ci| format!("[{:.3}, {:.3}]", ci.lo, ci.hi),
            );
            println!("{:28} {:>6} {:>10} {:>22}", c.metric, c.n, fmt_opt(c.r), ci);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            out,
            timeseries,
        } => cmd_run(scenario, seed, out, timeseries),
        Command::Batch {
            scenario,
            seed,
            runs,
            jobs,
            out,
            timeseries,
            summary,
        } => cmd_batch(scenario, seed, runs, jobs, out, timeseries, summary),
        Command::Catalog { show } => cmd_catalog(show),
        Command::Report {
            dir,
            out,
            force,
            summary,
            json,
        } => cmd_report(dir, out, force, summary, json),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
