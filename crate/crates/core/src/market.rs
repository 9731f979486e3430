//! Producers-and-consumers market.
//!
//! Each step runs: supplier selection, exchange, deaths/replacement, then innovation
//! (from `t_innov` on). Consumers pay nothing explicit; a consumer supplied by a
//! producer whose (augmented) match with its needs is `q` gains `q / k - ac`, and the
//! producer gains `q / k` per client, minus `ap` once per step.

use serde::{Deserialize, Serialize};

use crate::bitstring::{majority_string, worst_bit, BitString};
use crate::error::{Error, Result};
use crate::harness::metrics::{structure_metrics, StructureMetrics};
use crate::rng::{Entropy, SimRng};
use crate::threshold::MatchThreshold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProducerPolicy {
    /// Bankrupt producers leave the market for good.
    NoReplace,
    /// Bankrupt producers are replaced by a fresh random producer.
    ReplaceRandom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationMode {
    None,
    /// Market-oriented innovation: producers flip their worst product bit.
    Moi,
    /// Process innovation: a constant bonus added to the producer's match results.
    Process,
    /// Product innovation: the product becomes the majority of a consumer cluster.
    Product,
    /// Consumer adaptation to available products.
    Cap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovatorCount {
    One,
    RandomAmongPoorest,
}

macro_rules! str_enum {
    ($ty:ty { $($variant:ident => $name:literal),+ $(,)? }) => {
        impl $ty {
            pub fn as_str(&self) -> &'static str {
                match self { $(Self::$variant => $name),+ }
            }

            pub fn parse(s: &str) -> Option<Self> {
                match s { $($name => Some(Self::$variant),)+ _ => None }
            }

            pub fn names() -> &'static [&'static str] {
                &[$($name),+]
            }
        }
    };
}

str_enum!(ProducerPolicy { NoReplace => "no-replace", ReplaceRandom => "replace-random" });
str_enum!(InnovationMode {
    None => "none",
    Moi => "moi",
    Process => "process",
    Product => "product",
    Cap => "cap",
});
str_enum!(InnovatorCount { One => "one", RandomAmongPoorest => "random-among-poorest" });

impl InnovationMode {
    /// Whether innovators are consumers (adaptation) rather than producers.
    pub fn innovates_consumers(&self) -> bool {
        matches!(self, InnovationMode::Cap)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnovationConfig {
    pub mode: InnovationMode,
    pub innovator_count: InnovatorCount,
    pub threshold: MatchThreshold,
    /// Match-count points added by process innovation.
    pub process_delta: f64,
}

impl Default for InnovationConfig {
    fn default() -> Self {
        Self {
            mode: InnovationMode::None,
            innovator_count: InnovatorCount::One,
            threshold: MatchThreshold::default(),
            process_delta: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub n_producers: usize,
    pub n_consumers: usize,
    pub k: usize,
    /// Consumer cost of living per step.
    pub ac: f64,
    /// Producer cost of living per step.
    pub ap: f64,
    pub c0: f64,
    pub s0: f64,
    pub producer_policy: ProducerPolicy,
    pub innovation: InnovationConfig,
    pub t_innov: usize,
    pub t_end: usize,
}

impl Default for MarketParams {
    fn default() -> Self {
        Self {
            n_producers: 100,
            n_consumers: 100,
            k: 16,
            ac: 0.5,
            ap: 5.0,
            c0: 10.0,
            s0: 10.0,
            producer_policy: ProducerPolicy::NoReplace,
            innovation: InnovationConfig::default(),
            t_innov: 250,
            t_end: 1000,
        }
    }
}

impl MarketParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_producers == 0 {
            return Err(Error::config("n_producers", "must be positive"));
        }
        if self.n_consumers == 0 {
            return Err(Error::config("n_consumers", "must be positive"));
        }
        if self.k == 0 || self.k > crate::bitstring::MAX_BITS {
            return Err(Error::config(
                "k",
                format!("must be in 1..={}", crate::bitstring::MAX_BITS),
            ));
        }
        for (key, v) in [("ac", self.ac), ("ap", self.ap)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(key, "must be a finite value >= 0"));
            }
        }
        for (key, v) in [("c0", self.c0), ("s0", self.s0)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, "must be a finite value > 0"));
            }
        }
        let delta = self.innovation.process_delta;
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::config(
                "process_delta",
                "must be a finite value >= 0",
            ));
        }
        self.innovation.threshold.validate()?;
        if self.t_innov == 0 {
            return Err(Error::config("t_innov", "must be at least 1"));
        }
        if self.t_innov >= self.t_end {
            return Err(Error::config("t_innov", "must be smaller than t_end"));
        }
        Ok(())
    }

    pub fn threshold_bar(&self) -> usize {
        self.innovation.threshold.resolve(self.k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consumer {
    pub id: u64,
    pub needs: BitString,
    pub satisfaction: f64,
    /// Step at which the consumer entered the market.
    pub born: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Producer {
    pub id: u64,
    pub product: BitString,
    pub cash: f64,
    pub alive: bool,
    pub process_bonus: f64,
    pub born: usize,
}

/// Match of `p`'s product with `c`'s needs plus the producer's process bonus.
pub fn augmented_match(p: &Producer, c: &Consumer) -> f64 {
    p.product.matches(&c.needs) as f64 + p.process_bonus
}

/// Alive producer slot with maximal augmented match; ties drawn uniformly.
/// Returns `None` when no producer is alive.
pub fn select_supplier<E: Entropy>(
    c: &Consumer,
    producers: &[Producer],
    rng: &mut E,
) -> Option<usize> {
    let mut tied = Vec::new();
    select_into(c, producers, rng, &mut tied)
}

fn select_into<E: Entropy>(
    c: &Consumer,
    producers: &[Producer],
    rng: &mut E,
    tied: &mut Vec<usize>,
) -> Option<usize> {
    tied.clear();
    let mut best = f64::NEG_INFINITY;
    for (slot, p) in producers.iter().enumerate() {
        if !p.alive {
            continue;
        }
        let m = augmented_match(p, c);
        if m > best {
            best = m;
            tied.clear();
            tied.push(slot);
        } else if m == best {
            tied.push(slot);
        }
    }
    if tied.is_empty() {
        None
    } else {
        Some(rng.pick(tied))
    }
}

/// Slots of agents removed at the end of a step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Deaths {
    pub consumers: Vec<usize>,
    pub producers: Vec<usize>,
}

/// Value flows of one exchange step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeTotals {
    pub consumer_gain: f64,
    pub producer_income: f64,
}

#[derive(Debug, Clone)]
pub struct MarketState<R = SimRng> {
    params: MarketParams,
    producers: Vec<Producer>,
    consumers: Vec<Consumer>,
    t: usize,
    rng: R,
    next_id: u64,
    /// Producer slot supplying each consumer slot in the current step.
    suppliers: Vec<Option<usize>>,
    /// Augmented match of each consumer with its supplier in the current step.
    payoffs: Vec<f64>,
    /// `cash_history[t][slot]`; NaN once a producer has left the market.
    cash_history: Vec<Vec<f64>>,
    satisfaction_history: Vec<Vec<f64>>,
}

impl<R: Entropy> MarketState<R> {
    /// Random initial population: all products are drawn first, then all needs.
    pub fn new(params: MarketParams, mut rng: R) -> Result<Self> {
        params.validate()?;
        let products = (0..params.n_producers)
            .map(|_| BitString::random(params.k, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let needs = (0..params.n_consumers)
            .map(|_| BitString::random(params.k, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        Self::with_population(params, products, needs, rng)
    }

    /// Population with given strings; `n_producers`/`n_consumers` are taken from the lists.
    pub fn with_population(
        mut params: MarketParams,
        products: Vec<BitString>,
        needs: Vec<BitString>,
        rng: R,
    ) -> Result<Self> {
        params.n_producers = products.len();
        params.n_consumers = needs.len();
        params.validate()?;
        if let Some(bad) = products.iter().chain(&needs).find(|s| s.len() != params.k) {
            return Err(Error::invalid(format!(
                "string {bad} does not have length k = {}",
                params.k
            )));
        }
        let producers: Vec<Producer> = products
            .into_iter()
            .enumerate()
            .map(|(i, product)| Producer {
                id: i as u64,
                product,
                cash: params.c0,
                alive: true,
                process_bonus: 0.0,
                born: 0,
            })
            .collect();
        let offset = producers.len() as u64;
        let consumers: Vec<Consumer> = needs
            .into_iter()
            .enumerate()
            .map(|(i, needs)| Consumer {
                id: offset + i as u64,
                needs,
                satisfaction: params.s0,
                born: 0,
            })
            .collect();
        let next_id = offset + consumers.len() as u64;
        let cash_history = vec![producers.iter().map(|p| p.cash).collect()];
        let satisfaction_history = vec![consumers.iter().map(|c| c.satisfaction).collect()];
        Ok(Self {
            suppliers: vec![None; consumers.len()],
            payoffs: vec![0.0; consumers.len()],
            params,
            producers,
            consumers,
            t: 0,
            rng,
            next_id,
            cash_history,
            satisfaction_history,
        })
    }

    pub fn params(&self) -> &MarketParams {
        &self.params
    }

    pub fn producers(&self) -> &[Producer] {
        &self.producers
    }

    pub fn consumers(&self) -> &[Consumer] {
        &self.consumers
    }

    /// Number of completed exchange steps.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn rng_mut(&mut self) -> &mut R {
        &mut self.rng
    }

    pub fn suppliers(&self) -> &[Option<usize>] {
        &self.suppliers
    }

    pub fn cash_history(&self) -> &[Vec<f64>] {
        &self.cash_history
    }

    pub fn satisfaction_history(&self) -> &[Vec<f64>] {
        &self.satisfaction_history
    }

    pub fn alive_producers(&self) -> usize {
        self.producers.iter().filter(|p| p.alive).count()
    }

    pub fn producer_slot(&self, id: u64) -> Option<usize> {
        self.producers.iter().position(|p| p.alive && p.id == id)
    }

    pub fn consumer_slot(&self, id: u64) -> Option<usize> {
        self.consumers.iter().position(|c| c.id == id)
    }

    pub fn set_process_bonus(&mut self, id: u64, bonus: f64) {
        if let Some(slot) = self.producer_slot(id) {
            self.producers[slot].process_bonus = bonus;
        }
    }

    fn fresh_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    /// Assigns a supplier to every consumer, in consumer order. Returns `false`
    /// (and assigns nothing) when no producer is alive.
    pub fn select_suppliers(&mut self) -> bool {
        if self.alive_producers() == 0 {
            self.suppliers.iter_mut().for_each(|s| *s = None);
            return false;
        }
        let mut tied = Vec::with_capacity(self.producers.len());
        for (j, c) in self.consumers.iter().enumerate() {
            let slot = select_into(c, &self.producers, &mut self.rng, &mut tied)
                .expect("at least one producer alive");
            self.suppliers[j] = Some(slot);
            self.payoffs[j] = augmented_match(&self.producers[slot], c);
        }
        true
    }

    /// Applies the satisfaction and cash updates for the current supplier map and
    /// appends one row to each history.
    pub fn exchange_step(&mut self) -> ExchangeTotals {
        let k = self.params.k as f64;
        let mut income = vec![0.0; self.producers.len()];
        let mut consumer_gain = 0.0;
        for (j, c) in self.consumers.iter_mut().enumerate() {
            let gain = match self.suppliers[j] {
                Some(slot) => {
                    let g = self.payoffs[j] / k;
                    income[slot] += g;
                    g
                }
                None => 0.0,
            };
            consumer_gain += gain;
            c.satisfaction += gain - self.params.ac;
        }
        let mut producer_income = 0.0;
        for (p, inc) in self.producers.iter_mut().zip(&income) {
            if p.alive {
                producer_income += inc;
                p.cash += inc - self.params.ap;
            }
        }
        self.t += 1;
        self.cash_history.push(
            self.producers
                .iter()
                .map(|p| if p.alive { p.cash } else { f64::NAN })
                .collect(),
        );
        self.satisfaction_history
            .push(self.consumers.iter().map(|c| c.satisfaction).collect());
        ExchangeTotals {
            consumer_gain,
            producer_income,
        }
    }

    /// Removes agents with strictly negative accounts. Consumers are replaced first
    /// (slot order), then producers; each replacement draws `k` fresh bits.
    pub fn apply_deaths(&mut self) -> Result<Deaths> {
        let mut deaths = Deaths::default();
        let k = self.params.k;
        for j in 0..self.consumers.len() {
            if self.consumers[j].satisfaction < 0.0 {
                let needs = BitString::random(k, &mut self.rng)?;
                let id = self.fresh_id();
                self.consumers[j] = Consumer {
                    id,
                    needs,
                    satisfaction: self.params.s0,
                    born: self.t,
                };
                deaths.consumers.push(j);
            }
        }
        for i in 0..self.producers.len() {
            let p = &self.producers[i];
            if !p.alive || p.cash >= 0.0 {
                continue;
            }
            match self.params.producer_policy {
                ProducerPolicy::NoReplace => self.producers[i].alive = false,
                ProducerPolicy::ReplaceRandom => {
                    let product = BitString::random(k, &mut self.rng)?;
                    let id = self.fresh_id();
                    self.producers[i] = Producer {
                        id,
                        product,
                        cash: self.params.c0,
                        alive: true,
                        process_bonus: 0.0,
                        born: self.t,
                    };
                }
            }
            deaths.producers.push(i);
        }
        Ok(deaths)
    }

    /// Market-oriented innovation for each listed producer still in the market.
    pub fn moi_step(&mut self, innovators: &[u64]) -> Result<()> {
        let bar = self.params.threshold_bar();
        for &id in innovators {
            let Some(slot) = self.producer_slot(id) else {
                continue;
            };
            let product = self.producers[slot].product;
            let refs: Vec<BitString> = self
                .consumers
                .iter()
                .map(|c| c.needs)
                .filter(|n| product.matches(n) >= bar)
                .collect();
            if refs.is_empty() {
                continue;
            }
            let pos = worst_bit(&product, &refs, &mut self.rng)?;
            self.producers[slot].product = product.flipped(pos);
        }
        Ok(())
    }

    /// Greedy cluster of mutually similar consumers: the best-matching qualifying
    /// pair (ties random), extended in slot order by every consumer that meets the
    /// bar against all current members. Empty when no pair qualifies.
    pub fn consumer_cluster(&mut self) -> Vec<usize> {
        let bar = self.params.threshold_bar();
        let n = self.consumers.len();
        let mut best = None;
        let mut pairs = Vec::new();
        for a in 0..n {
            for b in (a + 1)..n {
                let m = self.consumers[a].needs.matches(&self.consumers[b].needs);
                if m < bar {
                    continue;
                }
                match best {
                    Some(top) if m < top => {}
                    Some(top) if m == top => pairs.push((a, b)),
                    _ => {
                        best = Some(m);
                        pairs.clear();
                        pairs.push((a, b));
                    }
                }
            }
        }
        if pairs.is_empty() {
            return Vec::new();
        }
        let (a, b) = self.rng.pick(&pairs);
        let mut cluster = vec![a, b];
        for c in 0..n {
            if c == a || c == b {
                continue;
            }
            let needs = self.consumers[c].needs;
            if cluster
                .iter()
                .all(|&m| needs.matches(&self.consumers[m].needs) >= bar)
            {
                cluster.push(c);
            }
        }
        cluster
    }

    /// Rebuilds the innovator's product as the majority of a consumer cluster.
    pub fn product_innovation_step(&mut self, innovator: u64) -> Result<()> {
        let Some(slot) = self.producer_slot(innovator) else {
            return Ok(());
        };
        let cluster = self.consumer_cluster();
        if cluster.len() < 2 {
            return Ok(());
        }
        let needs: Vec<BitString> = cluster.iter().map(|&c| self.consumers[c].needs).collect();
        self.producers[slot].product = majority_string(&needs, &mut self.rng)?;
        Ok(())
    }

    /// Consumer adaptation: each listed consumer flips its worst need bit against the
    /// products that meet the threshold.
    pub fn cap_step(&mut self, adapters: &[u64]) -> Result<()> {
        let bar = self.params.threshold_bar();
        for &id in adapters {
            let Some(slot) = self.consumer_slot(id) else {
                continue;
            };
            let needs = self.consumers[slot].needs;
            let refs: Vec<BitString> = self
                .producers
                .iter()
                .filter(|p| p.alive)
                .map(|p| p.product)
                .filter(|p| needs.matches(p) >= bar)
                .collect();
            if refs.is_empty() {
                continue;
            }
            let pos = worst_bit(&needs, &refs, &mut self.rng)?;
            self.consumers[slot].needs = needs.flipped(pos);
        }
        Ok(())
    }

    /// Picks the innovating agents: producers ranked by cash, or consumers ranked by
    /// satisfaction for adaptation. Candidates are shuffled before a stable sort so
    /// equal values are ordered at random. `RandomAmongPoorest` takes the `m` poorest
    /// with `m` uniform on `1..=candidates`.
    pub fn choose_innovators(&mut self) -> Vec<u64> {
        let cfg = self.params.innovation;
        let mut candidates: Vec<(f64, u64)> = if cfg.mode.innovates_consumers() {
            self.consumers
                .iter()
                .map(|c| (c.satisfaction, c.id))
                .collect()
        } else {
            self.producers
                .iter()
                .filter(|p| p.alive)
                .map(|p| (p.cash, p.id))
                .collect()
        };
        if candidates.is_empty() {
            return Vec::new();
        }
        self.rng.shuffle(&mut candidates);
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let count = match cfg.innovator_count {
            InnovatorCount::One => 1,
            InnovatorCount::RandomAmongPoorest => 1 + self.rng.below(candidates.len()),
        };
        candidates
            .into_iter()
            .take(count)
            .map(|(_, id)| id)
            .collect()
    }

    /// Applies the configured innovation operator for the frozen innovator set.
    pub fn innovate(&mut self, innovators: &[u64]) -> Result<()> {
        match self.params.innovation.mode {
            InnovationMode::None | InnovationMode::Process => Ok(()),
            InnovationMode::Moi => self.moi_step(innovators),
            InnovationMode::Cap => self.cap_step(innovators),
            InnovationMode::Product => innovators
                .iter()
                .try_for_each(|&id| self.product_innovation_step(id)),
        }
    }
}

/// Efficiency rate `(x(t_end) - x(t_innov)) / (t_end - t_innov)` of a value history
/// indexed by time.
pub fn efficiency_rate(history: &[f64], t_innov: usize, t_end: usize) -> Result<f64> {
    if t_end <= t_innov {
        return Err(Error::invalid(format!(
            "efficiency window is empty: t_innov = {t_innov}, t_end = {t_end}"
        )));
    }
    if t_end >= history.len() {
        return Err(Error::invalid(format!(
            "history of length {} does not reach t = {t_end}",
            history.len()
        )));
    }
    let (start, end) = (history[t_innov], history[t_end]);
    if !(start.is_finite() && end.is_finite()) {
        return Err(Error::invalid(
            "history has no value in the efficiency window",
        ));
    }
    Ok((end - start) / (t_end - t_innov) as f64)
}

/// Cash-based efficiency of an innovating producer.
pub fn efficiency_g(cash: &[f64], t_innov: usize, t_end: usize) -> Result<f64> {
    efficiency_rate(cash, t_innov, t_end)
}

/// Satisfaction-based efficiency of an adapting consumer.
pub fn efficiency_s(satisfaction: &[f64], t_innov: usize, t_end: usize) -> Result<f64> {
    efficiency_rate(satisfaction, t_innov, t_end)
}

/// Degenerate-run markers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunFlag {
    /// Every producer left the market before `t_end`.
    Truncated,
    /// At least one innovator died; its rate was computed up to its death.
    InnovatorDied,
    /// Innovation was configured but nobody could be chosen.
    NoInnovators,
}

impl RunFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunFlag::Truncated => "truncated",
            RunFlag::InnovatorDied => "innovator-died",
            RunFlag::NoInnovators => "no-innovators",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            RunFlag::Truncated,
            RunFlag::InnovatorDied,
            RunFlag::NoInnovators,
        ]
        .into_iter()
        .find(|f| f.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketTimeseries {
    /// `cash[t][slot]`, null after a producer left the market.
    pub cash: Vec<Vec<f64>>,
    pub satisfaction: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnovatorOutcome {
    pub id: u64,
    pub slot: usize,
    /// Last step included in the rate: `t_end`, or the step the innovator died.
    pub end_t: usize,
    pub died: bool,
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketRunRecord {
    pub seed: u64,
    pub params: MarketParams,
    pub steps_run: usize,
    pub innovators: Vec<InnovatorOutcome>,
    /// Mean innovator rate: `g` for producers, `s` for adapting consumers.
    pub efficiency: Option<f64>,
    pub metrics: StructureMetrics,
    pub flags: Vec<RunFlag>,
    pub replacements: usize,
    pub timeseries: Option<MarketTimeseries>,
}

struct Tracker {
    id: u64,
    slot: usize,
    end_t: usize,
    died: bool,
}

/// Runs one market simulation seeded with `seed`.
pub fn run_market(
    params: &MarketParams,
    seed: u64,
    keep_timeseries: bool,
) -> Result<MarketRunRecord> {
    let state = MarketState::new(params.clone(), SimRng::new(seed))?;
    let mut record = run_market_state(state, keep_timeseries)?;
    record.seed = seed;
    Ok(record)
}

/// Drives an initialized state to `t_end`.
pub fn run_market_state<R: Entropy>(
    mut state: MarketState<R>,
    keep_timeseries: bool,
) -> Result<MarketRunRecord> {
    let params = state.params.clone();
    let mode = params.innovation.mode;
    let consumers_innovate = mode.innovates_consumers();
    let mut flags = Vec::new();
    let mut trackers: Vec<Tracker> = Vec::new();
    let mut innovator_ids: Vec<u64> = Vec::new();
    let mut metrics = StructureMetrics::default();
    let mut replacements = 0;

    while state.t < params.t_end {
        if !state.select_suppliers() {
            flags.push(RunFlag::Truncated);
            break;
        }
        state.exchange_step();
        let deaths = state.apply_deaths()?;
        replacements += deaths.consumers.len();
        if params.producer_policy == ProducerPolicy::ReplaceRandom {
            replacements += deaths.producers.len();
        }

        for tr in trackers.iter_mut().filter(|tr| !tr.died) {
            let gone = if consumers_innovate {
                state.consumers[tr.slot].id != tr.id
            } else {
                let p = &state.producers[tr.slot];
                !p.alive || p.id != tr.id
            };
            tr.end_t = state.t;
            tr.died = gone;
        }

        if state.t == params.t_innov {
            if mode != InnovationMode::None {
                innovator_ids = state.choose_innovators();
                if innovator_ids.is_empty() {
                    flags.push(RunFlag::NoInnovators);
                }
                trackers = innovator_ids
                    .iter()
                    .map(|&id| Tracker {
                        id,
                        slot: if consumers_innovate {
                            state.consumer_slot(id)
                        } else {
                            state.producer_slot(id)
                        }
                        .expect("innovators are chosen among present agents"),
                        end_t: state.t,
                        died: false,
                    })
                    .collect();
                if mode == InnovationMode::Process {
                    for &id in &innovator_ids {
                        state.set_process_bonus(id, params.innovation.process_delta);
                    }
                }
            }
            metrics = structure_metrics(&state, &innovator_ids);
        }
        if state.t >= params.t_innov {
            state.innovate(&innovator_ids)?;
        }
    }

    if mode != InnovationMode::None
        && state.t < params.t_innov
        && !flags.contains(&RunFlag::NoInnovators)
    {
        flags.push(RunFlag::NoInnovators);
    }

    let history = if consumers_innovate {
        &state.satisfaction_history
    } else {
        &state.cash_history
    };
    let innovators: Vec<InnovatorOutcome> = trackers
        .iter()
        .map(|tr| {
            let column: Vec<f64> = history.iter().map(|row| row[tr.slot]).collect();
            InnovatorOutcome {
                id: tr.id,
                slot: tr.slot,
                end_t: tr.end_t,
                died: tr.died,
                rate: efficiency_rate(&column, params.t_innov, tr.end_t).ok(),
            }
        })
        .collect();
    if innovators.iter().any(|o| o.died) {
        flags.push(RunFlag::InnovatorDied);
    }
    let rates: Vec<f64> = innovators.iter().filter_map(|o| o.rate).collect();
    let efficiency = if rates.is_empty() {
        None
    } else {
        Some(rates.iter().sum::<f64>() / rates.len() as f64)
    };
    flags.sort();
    flags.dedup();

    let timeseries = keep_timeseries.then(|| MarketTimeseries {
        cash: state.cash_history.clone(),
        satisfaction: state.satisfaction_history.clone(),
    });
    Ok(MarketRunRecord {
        seed: 0,
        steps_run: state.t,
        params,
        innovators,
        efficiency,
        metrics,
        flags,
        replacements,
        timeseries,
    })
}
