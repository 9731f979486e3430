//! Market structure covariates captured when innovation starts.

use serde::{Deserialize, Serialize};

use crate::market::MarketState;
use crate::rng::Entropy;

/// Structure metrics, in Hamming units except the gain rate (value units per step).
/// `None` marks a metric that does not apply to the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub ip_nearest_consumer_dist: Option<f64>,
    pub ip_nearest_competitor_dist: Option<f64>,
    pub pre_innovation_gain_rate: Option<f64>,
    pub mean_consumer_needs_dist: Option<f64>,
    pub ic_mean_producer_dist: Option<f64>,
}

pub const METRIC_NAMES: [&str; 5] = [
    "ip_nearest_consumer_dist",
    "ip_nearest_competitor_dist",
    "pre_innovation_gain_rate",
    "mean_consumer_needs_dist",
    "ic_mean_producer_dist",
];

impl StructureMetrics {
    pub fn values(&self) -> [Option<f64>; 5] {
        [
            self.ip_nearest_consumer_dist,
            self.ip_nearest_competitor_dist,
            self.pre_innovation_gain_rate,
            self.mean_consumer_needs_dist,
            self.ic_mean_producer_dist,
        ]
    }
}

fn mean_of(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Metrics for the innovator set chosen at `t_innov`, averaged over innovators.
///
/// Producer innovators get the `ip_*` distances; consumer innovators (adaptation)
/// get `ic_mean_producer_dist`. The gain rate is `(value - initial) / age` of each
/// innovator, so for founding producers it is `(C(t_innov) - c0) / t_innov`.
pub fn structure_metrics<R: Entropy>(
    state: &MarketState<R>,
    innovators: &[u64],
) -> StructureMetrics {
    let params = state.params();
    let t = state.t();
    let consumers = state.consumers();
    let alive: Vec<_> = state.producers().iter().filter(|p| p.alive).collect();

    let needs: Vec<_> = consumers.iter().map(|c| c.needs).collect();
    let mean_consumer_needs_dist = crate::harness::histogram::mean_pairwise_distance(&needs);

    let mut metrics = StructureMetrics {
        mean_consumer_needs_dist,
        ..StructureMetrics::default()
    };

    if params.innovation.mode.innovates_consumers() {
        let adapters: Vec<_> = innovators
            .iter()
            .filter_map(|&id| consumers.iter().find(|c| c.id == id))
            .collect();
        metrics.ic_mean_producer_dist =
            mean_of(adapters.iter().filter_map(|c| {
                mean_of(alive.iter().map(|p| c.needs.distance(&p.product) as f64))
            }));
        metrics.pre_innovation_gain_rate = mean_of(
            adapters
                .iter()
                .filter(|c| t > c.born)
                .map(|c| (c.satisfaction - params.s0) / (t - c.born) as f64),
        );
    } else {
        let ips: Vec<_> = innovators
            .iter()
            .filter_map(|&id| alive.iter().find(|p| p.id == id).copied())
            .collect();
        metrics.ip_nearest_consumer_dist = mean_of(ips.iter().filter_map(|p| {
            consumers
                .iter()
                .map(|c| p.product.distance(&c.needs))
                .min()
                .map(|d| d as f64)
        }));
        metrics.ip_nearest_competitor_dist = mean_of(ips.iter().filter_map(|p| {
            alive
                .iter()
                .filter(|q| q.id != p.id)
                .map(|q| p.product.distance(&q.product))
                .min()
                .map(|d| d as f64)
        }));
        metrics.pre_innovation_gain_rate = mean_of(
            ips.iter()
                .filter(|p| t > p.born)
                .map(|p| (p.cash - params.c0) / (t - p.born) as f64),
        );
    }
    metrics
}
