//! Self-organizing society of agents carrying a P (extraction) and an N (exposure)
//! string.
//!
//! Every step, each agent `j` is exploited by one agent `l(j)` whose P string best
//! matches `j`'s N string; `j` pays `q*_j / k` and `l(j)` receives the same amount,
//! so the exchange is zero-sum. Agents whose fitness turns negative are replaced.

use serde::{Deserialize, Serialize};

use crate::bitstring::{best_bit, worst_bit, BitString};
use crate::error::{Error, Result};
use crate::harness::histogram::{diversity_histogram, Histogram};
use crate::harness::stats;
use crate::rng::{Entropy, SimRng};
use crate::threshold::MatchThreshold;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfOrgParams {
    pub m_agents: usize,
    pub k: usize,
    pub f0: f64,
    /// Number of steps `T`.
    pub horizon: usize,
    pub p_innovation: bool,
    pub n_innovation: bool,
    pub threshold: MatchThreshold,
}

impl Default for SelfOrgParams {
    fn default() -> Self {
        Self {
            m_agents: 100,
            k: 16,
            f0: 10.0,
            horizon: 5000,
            p_innovation: false,
            n_innovation: false,
            threshold: MatchThreshold::default(),
        }
    }
}

impl SelfOrgParams {
    pub fn validate(&self) -> Result<()> {
        if self.m_agents < 2 {
            return Err(Error::config("m_agents", "needs at least 2 agents"));
        }
        if self.k == 0 || self.k > crate::bitstring::MAX_BITS {
            return Err(Error::config(
                "k",
                format!("must be in 1..={}", crate::bitstring::MAX_BITS),
            ));
        }
        if !(self.f0.is_finite() && self.f0 > 0.0) {
            return Err(Error::config("f0", "must be a finite value > 0"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        self.threshold.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub id: u64,
    pub p: BitString,
    pub n: BitString,
    pub fitness: f64,
}

#[derive(Debug, Clone)]
pub struct SelfOrgState<R = SimRng> {
    params: SelfOrgParams,
    agents: Vec<Agent>,
    t: usize,
    rng: R,
    next_id: u64,
    /// `extractors[j]` is the slot of the agent extracting from slot `j`.
    extractors: Vec<usize>,
    /// `best_match[j]` is the maximal match of `j`'s N string with another P string.
    best_match: Vec<usize>,
}

impl<R: Entropy> SelfOrgState<R> {
    /// Random population; each agent draws its P string, then its N string.
    pub fn new(params: SelfOrgParams, mut rng: R) -> Result<Self> {
        params.validate()?;
        let mut strings = Vec::with_capacity(params.m_agents);
        for _ in 0..params.m_agents {
            let p = BitString::random(params.k, &mut rng)?;
            let n = BitString::random(params.k, &mut rng)?;
            strings.push((p, n));
        }
        Self::with_population(params, strings, rng)
    }

    pub fn with_population(
        mut params: SelfOrgParams,
        strings: Vec<(BitString, BitString)>,
        rng: R,
    ) -> Result<Self> {
        params.m_agents = strings.len();
        params.validate()?;
        if let Some((p, n)) = strings
            .iter()
            .find(|(p, n)| p.len() != params.k || n.len() != params.k)
        {
            return Err(Error::invalid(format!(
                "strings {p}/{n} do not have length k = {}",
                params.k
            )));
        }
        let agents: Vec<Agent> = strings
            .into_iter()
            .enumerate()
            .map(|(i, (p, n))| Agent {
                id: i as u64,
                p,
                n,
                fitness: params.f0,
            })
            .collect();
        let m = agents.len();
        Ok(Self {
            next_id: m as u64,
            params,
            agents,
            t: 0,
            rng,
            extractors: vec![0; m],
            best_match: vec![0; m],
        })
    }

    pub fn params(&self) -> &SelfOrgParams {
        &self.params
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn extractors(&self) -> &[usize] {
        &self.extractors
    }

    pub fn best_matches(&self) -> &[usize] {
        &self.best_match
    }

    pub fn fitnesses(&self) -> Vec<f64> {
        self.agents.iter().map(|a| a.fitness).collect()
    }

    pub fn p_strings(&self) -> Vec<BitString> {
        self.agents.iter().map(|a| a.p).collect()
    }

    pub fn n_strings(&self) -> Vec<BitString> {
        self.agents.iter().map(|a| a.n).collect()
    }

    /// For each agent `j` (slot order) finds the other agents whose P string best
    /// matches `j`'s N string and draws one of them when several tie.
    pub fn assign_extractors(&mut self) {
        let mut tied = Vec::with_capacity(self.agents.len());
        for j in 0..self.agents.len() {
            let n = self.agents[j].n;
            let mut best = 0;
            tied.clear();
            for (i, a) in self.agents.iter().enumerate() {
                if i == j {
                    continue;
                }
                let q = a.p.matches(&n);
                if tied.is_empty() || q > best {
                    best = q;
                    tied.clear();
                    tied.push(i);
                } else if q == best {
                    tied.push(i);
                }
            }
            self.extractors[j] = self.rng.pick(&tied);
            self.best_match[j] = best;
        }
    }

    /// Fitness changes implied by the current extractor map.
    pub fn fitness_deltas(&self) -> Vec<f64> {
        let k = self.params.k as f64;
        let mut delta = vec![0.0; self.agents.len()];
        for (j, (&l, &q)) in self.extractors.iter().zip(&self.best_match).enumerate() {
            let amount = q as f64 / k;
            delta[l] += amount;
            delta[j] -= amount;
        }
        delta
    }

    /// Applies the exchange; returns the per-agent fitness changes.
    pub fn fitness_step(&mut self) -> Vec<f64> {
        let delta = self.fitness_deltas();
        for (a, d) in self.agents.iter_mut().zip(&delta) {
            a.fitness += d;
        }
        self.t += 1;
        delta
    }

    /// Replaces every agent with strictly negative fitness by a fresh random agent.
    /// Returns the replaced slots.
    pub fn replace_negative(&mut self) -> Result<Vec<usize>> {
        let mut replaced = Vec::new();
        for slot in 0..self.agents.len() {
            if self.agents[slot].fitness < 0.0 {
                let p = BitString::random(self.params.k, &mut self.rng)?;
                let n = BitString::random(self.params.k, &mut self.rng)?;
                self.agents[slot] = Agent {
                    id: self.next_id,
                    p,
                    n,
                    fitness: self.params.f0,
                };
                self.next_id += 1;
                replaced.push(slot);
            }
        }
        Ok(replaced)
    }

    /// One innovation sweep. All flips are computed against the strings as they are
    /// on entry and applied together; P flips are drawn before N flips.
    pub fn innovate(&mut self, p_innovation: bool, n_innovation: bool) -> Result<()> {
        let bar = self.params.threshold.resolve(self.params.k);
        let snapshot: Vec<(BitString, BitString)> =
            self.agents.iter().map(|a| (a.p, a.n)).collect();
        let mut p_flips = vec![None; snapshot.len()];
        let mut n_flips = vec![None; snapshot.len()];
        let mut refs = Vec::with_capacity(snapshot.len());

        if p_innovation {
            for (i, (p, _)) in snapshot.iter().enumerate() {
                refs.clear();
                refs.extend(
                    snapshot
                        .iter()
                        .enumerate()
                        .filter(|&(j, (_, n))| j != i && p.matches(n) >= bar)
                        .map(|(_, (_, n))| *n),
                );
                if !refs.is_empty() {
                    p_flips[i] = Some(worst_bit(p, &refs, &mut self.rng)?);
                }
            }
        }
        if n_innovation {
            for (i, (_, n)) in snapshot.iter().enumerate() {
                refs.clear();
                refs.extend(
                    snapshot
                        .iter()
                        .enumerate()
                        .filter(|&(j, (p, _))| j != i && n.matches(p) >= bar)
                        .map(|(_, (p, _))| *p),
                );
                if !refs.is_empty() {
                    n_flips[i] = Some(best_bit(n, &refs, &mut self.rng)?);
                }
            }
        }
        for (a, (pf, nf)) in self.agents.iter_mut().zip(p_flips.into_iter().zip(n_flips)) {
            if let Some(pos) = pf {
                a.p = a.p.flipped(pos);
            }
            if let Some(pos) = nf {
                a.n = a.n.flipped(pos);
            }
        }
        Ok(())
    }

    /// Every agent flips its worst-agreeing P bit against qualifying N strings.
    pub fn p_innovation_step(&mut self) -> Result<()> {
        self.innovate(true, false)
    }

    /// Every agent flips its best-agreeing N bit against qualifying P strings.
    pub fn n_innovation_step(&mut self) -> Result<()> {
        self.innovate(false, true)
    }

    /// One full step; returns the exchange imbalance `sum(dF)` and replaced slots.
    pub fn step(&mut self) -> Result<StepReport> {
        self.assign_extractors();
        let delta = self.fitness_step();
        let replaced = self.replace_negative()?;
        let (p, n) = (self.params.p_innovation, self.params.n_innovation);
        if p || n {
            self.innovate(p, n)?;
        }
        Ok(StepReport {
            exchange_imbalance: delta.iter().sum(),
            replaced: replaced.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub exchange_imbalance: f64,
    pub replaced: usize,
}

/// Fitness and string-diversity picture of the population at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSnapshot {
    pub t: usize,
    pub fitness: Vec<f64>,
    pub p_diversity: Histogram,
    pub n_diversity: Histogram,
}

impl PopulationSnapshot {
    pub fn capture<R: Entropy>(state: &SelfOrgState<R>) -> Result<Self> {
        Ok(Self {
            t: state.t(),
            fitness: state.fitnesses(),
            p_diversity: diversity_histogram(&state.p_strings())?,
            n_diversity: diversity_histogram(&state.n_strings())?,
        })
    }

    pub fn fitness_std(&self) -> f64 {
        stats::population_std(&self.fitness)
    }

    pub fn fitness_range(&self) -> f64 {
        let lo = self.fitness.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self
            .fitness
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfOrgRunRecord {
    pub seed: u64,
    pub params: SelfOrgParams,
    pub initial: PopulationSnapshot,
    #[serde(rename = "final")]
    pub end: PopulationSnapshot,
    /// Fitness histograms at t = 0 and t = T over shared bin edges.
    pub fitness_initial_hist: Histogram,
    pub fitness_final_hist: Histogram,
    pub replacements_per_step: Vec<usize>,
    /// Largest `|sum(dF)|` of a single exchange over the run.
    pub max_exchange_imbalance: f64,
}

impl SelfOrgRunRecord {
    pub fn total_replacements(&self) -> usize {
        self.replacements_per_step.iter().sum()
    }
}

pub const FITNESS_BINS: usize = 20;

/// Runs one self-organizing simulation seeded with `seed`.
pub fn run_selforg(params: &SelfOrgParams, seed: u64) -> Result<SelfOrgRunRecord> {
    let state = SelfOrgState::new(params.clone(), SimRng::new(seed))?;
    let mut record = run_selforg_state(state)?;
    record.seed = seed;
    Ok(record)
}

pub fn run_selforg_state<R: Entropy>(mut state: SelfOrgState<R>) -> Result<SelfOrgRunRecord> {
    let initial = PopulationSnapshot::capture(&state)?;
    let mut replacements_per_step = Vec::with_capacity(state.params.horizon);
    let mut max_exchange_imbalance: f64 = 0.0;
    for _ in 0..state.params.horizon {
        let report = state.step()?;
        replacements_per_step.push(report.replaced);
        max_exchange_imbalance = max_exchange_imbalance.max(report.exchange_imbalance.abs());
    }
    let end = PopulationSnapshot::capture(&state)?;
    let (lo, hi) = stats::min_max(initial.fitness.iter().chain(&end.fitness).copied());
    let fitness_initial_hist = Histogram::uniform(&initial.fitness, FITNESS_BINS, lo, hi)?;
    let fitness_final_hist = Histogram::uniform(&end.fitness, FITNESS_BINS, lo, hi)?;
    Ok(SelfOrgRunRecord {
        seed: 0,
        params: state.params.clone(),
        initial,
        end,
        fitness_initial_hist,
        fitness_final_hist,
        replacements_per_step,
        max_exchange_imbalance,
    })
}
