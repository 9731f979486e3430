//! Batches of independently seeded runs and their summary statistics.
//!
//! Run `i` of a batch is seeded with `derive_seed(base_seed, i)`, so results do not
//! depend on how runs are spread over worker threads. Records are always reassembled
//! in run order before anything is summarized or written.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::histogram::Histogram;
use crate::harness::metrics::METRIC_NAMES;
use crate::harness::scenario::{ModelParams, ScenarioConfig};
use crate::harness::stats::{self, Bootstrap, Interval, DEFAULT_RESAMPLES};
use crate::market::{run_market, MarketRunRecord};
use crate::rng::{derive_seed, mix64};
use crate::selforg::{run_selforg, SelfOrgRunRecord, FITNESS_BINS};

pub const OUTCOME_COLUMN: &str = "g_or_s";
pub const OUTCOME_BINS: usize = 20;

pub const SELFORG_METRIC_NAMES: [&str; 8] = [
    "fitness_std_initial",
    "fitness_std_final",
    "fitness_range_final",
    "p_diversity_initial",
    "p_diversity_final",
    "n_diversity_initial",
    "n_diversity_final",
    "replacements",
];

const BOOTSTRAP_TAG: u64 = 0xB007_5EED_0000_0001;

pub fn metric_names(model: &ModelParams) -> &'static [&'static str] {
    match model {
        ModelParams::Market(_) => &METRIC_NAMES,
        ModelParams::SelfOrg(_) => &SELFORG_METRIC_NAMES,
    }
}

/// Seed of the bootstrap resampler used to summarize a batch.
pub fn bootstrap_seed(base_seed: u64) -> u64 {
    mix64(base_seed ^ BOOTSTRAP_TAG)
}

/// Full output of one simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RunDetail {
    Market(MarketRunRecord),
    SelfOrg(SelfOrgRunRecord),
}

pub fn run_one(model: &ModelParams, seed: u64, keep_timeseries: bool) -> Result<RunDetail> {
    Ok(match model {
        ModelParams::Market(p) => RunDetail::Market(run_market(p, seed, keep_timeseries)?),
        ModelParams::SelfOrg(p) => RunDetail::SelfOrg(run_selforg(p, seed)?),
    })
}

/// One row of `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_index: usize,
    pub seed: u64,
    pub g_or_s: Option<f64>,
    pub metrics: Vec<Option<f64>>,
    pub flags: Vec<String>,
}

impl RunRecord {
    pub fn is_degenerate(&self) -> bool {
        !self.flags.is_empty()
    }
}

impl RunDetail {
    pub fn seed(&self) -> u64 {
        match self {
            RunDetail::Market(r) => r.seed,
            RunDetail::SelfOrg(r) => r.seed,
        }
    }

    pub fn to_record(&self, run_index: usize) -> RunRecord {
        match self {
            RunDetail::Market(r) => RunRecord {
                run_index,
                seed: r.seed,
                g_or_s: r.efficiency,
                metrics: r.metrics.values().to_vec(),
                flags: r.flags.iter().map(|f| f.as_str().to_string()).collect(),
            },
            RunDetail::SelfOrg(r) => RunRecord {
                run_index,
                seed: r.seed,
                g_or_s: None,
                metrics: [
                    r.initial.fitness_std(),
                    r.end.fitness_std(),
                    r.end.fitness_range(),
                    r.initial.p_diversity.integer_mean().unwrap_or(f64::NAN),
                    r.end.p_diversity.integer_mean().unwrap_or(f64::NAN),
                    r.initial.n_diversity.integer_mean().unwrap_or(f64::NAN),
                    r.end.n_diversity.integer_mean().unwrap_or(f64::NAN),
                    r.total_replacements() as f64,
                ]
                .into_iter()
                .map(|v| v.is_finite().then_some(v))
                .collect(),
                flags: Vec::new(),
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct BatchOptions {
    pub jobs: usize,
    pub keep_timeseries: bool,
    pub include_degenerate: bool,
    pub resamples: usize,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            jobs: 1,
            keep_timeseries: false,
            include_degenerate: false,
            resamples: DEFAULT_RESAMPLES,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub ci95: Option<Interval>,
}

/// Pearson r between the outcome and one metric, over runs where both exist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationSummary {
    pub metric: String,
    pub n: usize,
    pub r: Option<f64>,
    pub ci95: Option<Interval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInfo {
    pub seed: u64,
    pub resamples: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub scenario: String,
    pub runs: usize,
    pub base_seed: u64,
    /// Effective configuration, including overrides.
    pub config: BTreeMap<String, serde_json::Value>,
    pub overrides: Vec<String>,
    pub include_degenerate: bool,
    pub degenerate_runs: usize,
    pub flag_counts: BTreeMap<String, usize>,
    pub bootstrap: BootstrapInfo,
    pub outcome: Option<MetricSummary>,
    pub metrics: Vec<MetricSummary>,
    pub correlations: Vec<CorrelationSummary>,
    pub outcome_histogram: Option<Histogram>,
}

/// Echo of a config as JSON values, keyed like the config file.
pub fn config_echo(config: &ScenarioConfig) -> BTreeMap<String, serde_json::Value> {
    config
        .to_pairs()
        .into_iter()
        .map(|(k, v)| {
            let json = serde_json::to_value(&v).unwrap_or(serde_json::Value::Null);
            (k.to_string(), json)
        })
        .collect()
}

fn summarize_values(name: &str, values: &[f64], boot: &mut Bootstrap) -> MetricSummary {
    MetricSummary {
        name: name.to_string(),
        count: values.len(),
        mean: stats::mean(values),
        std: stats::sample_std(values),
        ci95: boot.mean_ci(values),
    }
}

/// Summary statistics over a batch's rows. Means use every run that produced the
/// value; correlations leave out flagged runs unless `include_degenerate` is set.
pub fn summarize(
    config: &ScenarioConfig,
    overrides: &[String],
    names: &[String],
    records: &[RunRecord],
    include_degenerate: bool,
    resamples: usize,
) -> Result<BatchSummary> {
    if let Some(r) = records.iter().find(|r| r.metrics.len() != names.len()) {
        return Err(Error::invalid(format!(
            "run {} has {} metrics, expected {}",
            r.run_index,
            r.metrics.len(),
            names.len()
        )));
    }
    let seed = bootstrap_seed(config.base_seed);
    let mut boot = Bootstrap::new(seed, resamples);
    let mut flag_counts = BTreeMap::new();
    for f in records.iter().flat_map(|r| &r.flags) {
        *flag_counts.entry(f.clone()).or_insert(0) += 1;
    }

    let outcomes: Vec<f64> = records.iter().filter_map(|r| r.g_or_s).collect();
    let has_outcome = !outcomes.is_empty();
    let outcome = has_outcome.then(|| summarize_values(OUTCOME_COLUMN, &outcomes, &mut boot));
    let outcome_histogram = if has_outcome {
        Some(Histogram::auto(&outcomes, OUTCOME_BINS)?)
    } else {
        None
    };

    let metrics = names
        .iter()
        .enumerate()
        .map(|(m, name)| {
            let values: Vec<f64> = records.iter().filter_map(|r| r.metrics[m]).collect();
            summarize_values(name, &values, &mut boot)
        })
        .collect();

    let mut correlations = Vec::new();
    if has_outcome {
        for (m, name) in names.iter().enumerate() {
            let (x, y): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter(|r| include_degenerate || !r.is_degenerate())
                .filter_map(|r| Some((r.metrics[m]?, r.g_or_s?)))
                .unzip();
            let r = if x.len() >= 3 {
                stats::pearson(&x, &y)?
            } else {
                None
            };
            let ci95 = if r.is_some() {
                boot.pearson_ci(&x, &y)
            } else {
                None
            };
            correlations.push(CorrelationSummary {
                metric: name.clone(),
                n: x.len(),
                r,
                ci95,
            });
        }
    }

    Ok(BatchSummary {
        scenario: config.name.clone(),
        runs: records.len(),
        base_seed: config.base_seed,
        config: config_echo(config),
        overrides: overrides.to_vec(),
        include_degenerate,
        degenerate_runs: records.iter().filter(|r| r.is_degenerate()).count(),
        flag_counts,
        bootstrap: BootstrapInfo {
            seed,
            resamples,
            level: boot.level,
        },
        outcome,
        metrics,
        correlations,
        outcome_histogram,
    })
}

/// Everything a batch produces apart from per-run detail records.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub config: ScenarioConfig,
    pub metric_names: Vec<String>,
    pub records: Vec<RunRecord>,
    pub summary: BatchSummary,
    /// Named histograms pooled over runs, written as `hist_<name>.csv`.
    pub histograms: Vec<(String, Histogram)>,
}

#[derive(Default)]
struct SelfOrgPool {
    fitness_initial: Vec<f64>,
    fitness_final: Vec<f64>,
    diversity: BTreeMap<&'static str, Histogram>,
}

impl SelfOrgPool {
    fn add(&mut self, r: &SelfOrgRunRecord) -> Result<()> {
        self.fitness_initial.extend(&r.initial.fitness);
        self.fitness_final.extend(&r.end.fitness);
        for (name, h) in [
            ("p_diversity_t0", &r.initial.p_diversity),
            ("p_diversity_tT", &r.end.p_diversity),
            ("n_diversity_t0", &r.initial.n_diversity),
            ("n_diversity_tT", &r.end.n_diversity),
        ] {
            match self.diversity.get_mut(name) {
                None => {
                    self.diversity.insert(name, h.clone());
                }
                Some(acc) if acc.bin_edges == h.bin_edges => {
                    acc.counts
                        .iter_mut()
                        .zip(&h.counts)
                        .for_each(|(a, c)| *a += c);
                }
                Some(_) => return Err(Error::invalid("diversity histograms have different bins")),
            }
        }
        Ok(())
    }

    fn finish(self) -> Result<Vec<(String, Histogram)>> {
        let (lo, hi) = stats::min_max(
            self.fitness_initial
                .iter()
                .chain(&self.fitness_final)
                .copied(),
        );
        let mut out = vec![
            (
                "fitness_t0".to_string(),
                Histogram::uniform(&self.fitness_initial, FITNESS_BINS, lo, hi)?,
            ),
            (
                "fitness_tT".to_string(),
                Histogram::uniform(&self.fitness_final, FITNESS_BINS, lo, hi)?,
            ),
        ];
        out.extend(self.diversity.into_iter().map(|(k, v)| (k.to_string(), v)));
        Ok(out)
    }
}

/// Runs `config.runs` simulations on `options.jobs` threads.
///
/// `on_detail` sees every full run record in run order, e.g. to write per-run
/// JSON; runs are executed in chunks so detail records are not all held at once.
pub fn run_batch(
    config: &ScenarioConfig,
    overrides: &[String],
    options: &BatchOptions,
    mut on_detail: impl FnMut(usize, &RunDetail) -> Result<()>,
) -> Result<Batch> {
    if options.jobs == 0 {
        return Err(Error::invalid("jobs must be at least 1"));
    }
    config.model.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs)
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;

    let chunk = (options.jobs * 4).max(16);
    let mut records = Vec::with_capacity(config.runs);
    let mut pool_acc = SelfOrgPool::default();
    let mut start = 0;
    while start < config.runs {
        let end = (start + chunk).min(config.runs);
        let details: Vec<RunDetail> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|i| {
                    run_one(
                        &config.model,
                        derive_seed(config.base_seed, i as u64),
                        options.keep_timeseries,
                    )
                })
                .collect::<Result<_>>()
        })?;
        for (offset, detail) in details.iter().enumerate() {
            let index = start + offset;
            on_detail(index, detail)?;
            if let RunDetail::SelfOrg(r) = detail {
                pool_acc.add(r)?;
            }
            records.push(detail.to_record(index));
        }
        start = end;
    }

    let metric_names: Vec<String> = metric_names(&config.model)
        .iter()
        .map(|s| s.to_string())
        .collect();
    let summary = summarize(
        config,
        overrides,
        &metric_names,
        &records,
        options.include_degenerate,
        options.resamples,
    )?;
    let histograms = match &config.model {
        ModelParams::SelfOrg(_) => pool_acc.finish()?,
        ModelParams::Market(_) => summary
            .outcome_histogram
            .clone()
            .map(|h| vec![(OUTCOME_COLUMN.to_string(), h)])
            .unwrap_or_default(),
    };
    Ok(Batch {
        config: config.clone(),
        metric_names,
        records,
        summary,
        histograms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::find_scenario;

    fn small(name: &str) -> ScenarioConfig {
        let mut cfg = find_scenario(name).unwrap();
        cfg.runs = 6;
        match &mut cfg.model {
            ModelParams::Market(p) => {
                p.n_producers = 20;
                p.n_consumers = 20;
                p.t_innov = 20;
                p.t_end = 60;
            }
            ModelParams::SelfOrg(p) => {
                p.m_agents = 12;
                p.horizon = 40;
            }
        }
        cfg
    }

    fn opts(jobs: usize) -> BatchOptions {
        BatchOptions {
            jobs,
            resamples: 200,
            ..BatchOptions::default()
        }
    }

    #[test]
    fn records_follow_run_order_and_seeds() {
        let cfg = small("moi-volatile-one");
        let mut seen = Vec::new();
        let batch = run_batch(&cfg, &[], &opts(3), |i, d| {
            seen.push((i, d.seed()));
            Ok(())
        })
        .unwrap();
        assert_eq!(batch.records.len(), 6);
        for (i, r) in batch.records.iter().enumerate() {
            assert_eq!(r.run_index, i);
            assert_eq!(r.seed, derive_seed(cfg.base_seed, i as u64));
            assert_eq!(seen[i], (i, r.seed));
            assert_eq!(r.metrics.len(), METRIC_NAMES.len());
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        for name in ["cap-lowrep-many", "selforg-pn"] {
            let cfg = small(name);
            let a = run_batch(&cfg, &[], &opts(1), |_, _| Ok(())).unwrap();
            let b = run_batch(&cfg, &[], &opts(4), |_, _| Ok(())).unwrap();
            assert_eq!(a, b, "{name}");
        }
    }

    #[test]
    fn selforg_batch_pools_histograms() {
        let cfg = small("selforg-p");
        let batch = run_batch(&cfg, &[], &opts(2), |_, _| Ok(())).unwrap();
        let names: Vec<&str> = batch.histograms.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(
            names,
            [
                "fitness_t0",
                "fitness_tT",
                "n_diversity_t0",
                "n_diversity_tT",
                "p_diversity_t0",
                "p_diversity_tT"
            ]
        );
        let pairs = 12 * 11 / 2 * 6;
        for (name, h) in &batch.histograms {
            let expected = if name.starts_with("fitness") {
                12 * 6
            } else {
                pairs
            };
            assert_eq!(h.total(), expected as u64, "{name}");
        }
        assert!(batch.summary.correlations.is_empty());
        assert!(batch.summary.outcome.is_none());
    }

    #[test]
    fn degenerate_runs_leave_correlations_unless_asked() {
        let cfg = small("moi-stable-one");
        let names: Vec<String> = METRIC_NAMES.iter().map(|s| s.to_string()).collect();
        let row = |i: usize, g: f64, flagged: bool| RunRecord {
            run_index: i,
            seed: i as u64,
            g_or_s: Some(g),
            metrics: vec![Some(i as f64), None, None, Some(1.0), None],
            flags: if flagged {
                vec!["innovator-died".into()]
            } else {
                vec![]
            },
        };
        let rows = vec![
            row(0, 0.0, false),
            row(1, 1.0, false),
            row(2, 2.0, false),
            row(3, -50.0, true),
        ];
        let s = summarize(&cfg, &[], &names, &rows, false, 200).unwrap();
        let c = &s.correlations[0];
        assert_eq!(c.n, 3);
        assert!((c.r.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.correlations[1].n, 0);
        assert_eq!(s.correlations[3].r, None); // constant metric
        assert_eq!(s.degenerate_runs, 1);
        assert_eq!(s.outcome.as_ref().unwrap().count, 4);
        let s = summarize(&cfg, &[], &names, &rows, true, 200).unwrap();
        assert_eq!(s.correlations[0].n, 4);
        assert!(s.correlations[0].r.unwrap() < 0.0);
    }

    #[test]
    fn zero_jobs_is_rejected() {
        assert!(run_batch(&small("selforg-none"), &[], &opts(0), |_, _| Ok(())).is_err());
    }
}
