//! Brute-force reference implementations of both models on toy instances.
//! Shared by the `oracle` tests and the acceptance gate.
//!
//! The oracles keep strings as plain bit vectors, recompute every pairwise match
//! from scratch each step and consume a scripted tie-break tape in the documented
//! draw order. Each instance is run through the library with the same tape and the
//! two trajectories must agree exactly.

use innovsim::market::{
    run_market_state, InnovationMode, InnovatorCount, MarketParams, MarketState, ProducerPolicy,
};
use innovsim::selforg::{run_selforg_state, SelfOrgParams, SelfOrgState};
use innovsim::{BitString, Entropy, MatchThreshold, ScriptedEntropy, SimRng};

pub const INSTANCES: u64 = 50;
const K: usize = 4;

type Bits = Vec<u8>;

struct Tape {
    script: Vec<u64>,
    pos: usize,
}

impl Tape {
    fn next(&mut self) -> u64 {
        let v = self.script[self.pos];
        self.pos = (self.pos + 1) % self.script.len();
        v
    }

    fn below(&mut self, n: usize) -> usize {
        (self.next() % n as u64) as usize
    }

    fn coin(&mut self) -> u8 {
        (self.next() & 1) as u8
    }

    /// Tie-break among candidates listed in slot order; no draw for a single one.
    fn choose<T: Copy>(&mut self, tied: &[T]) -> T {
        if tied.len() == 1 {
            tied[0]
        } else {
            tied[self.below(tied.len())]
        }
    }

    fn bits(&mut self) -> Bits {
        (0..K).map(|_| self.coin()).collect()
    }
}

fn matches(a: &Bits, b: &Bits) -> usize {
    a.iter().zip(b).filter(|(x, y)| x == y).count()
}

fn to_bits(s: &BitString) -> Bits {
    s.bits().map(u8::from).collect()
}

fn to_string(b: &Bits) -> BitString {
    BitString::from_bits(&b.iter().map(|&x| x == 1).collect::<Vec<_>>()).unwrap()
}

/// Position agreeing with the fewest (or most) references.
fn extreme_bit(target: &Bits, refs: &[Bits], fewest: bool, tape: &mut Tape) -> usize {
    let counts: Vec<usize> = (0..K)
        .map(|pos| refs.iter().filter(|r| r[pos] == target[pos]).count())
        .collect();
    let goal = if fewest {
        *counts.iter().min().unwrap()
    } else {
        *counts.iter().max().unwrap()
    };
    let tied: Vec<usize> = (0..K).filter(|&p| counts[p] == goal).collect();
    tape.choose(&tied)
}

fn random_bits(rng: &mut SimRng) -> Bits {
    (0..K).map(|_| rng.coin() as u8).collect()
}

fn script(rng: &mut SimRng) -> Vec<u64> {
    (0..97).map(|_| rng.below(1 << 20) as u64).collect()
}

fn threshold(rng: &mut SimRng) -> MatchThreshold {
    match rng.below(3) {
        0 => MatchThreshold::absolute(rng.below(K + 1) as f64),
        1 => MatchThreshold::fraction(rng.below(5) as f64 / 4.0),
        _ => MatchThreshold::above_chance(rng.below(3) as f64),
    }
}

// ---------------------------------------------------------------- market

#[derive(Debug, Clone)]
struct OProducer {
    id: u64,
    product: Bits,
    cash: f64,
    alive: bool,
    bonus: f64,
}

#[derive(Debug, Clone)]
struct OConsumer {
    id: u64,
    needs: Bits,
    sat: f64,
}

struct MarketOracle {
    p: MarketParams,
    bar: usize,
    producers: Vec<OProducer>,
    consumers: Vec<OConsumer>,
    next_id: u64,
    t: usize,
    cash_rows: Vec<Vec<f64>>,
    sat_rows: Vec<Vec<f64>>,
    innovators: Vec<u64>,
    tape: Tape,
}

impl MarketOracle {
    fn new(p: MarketParams, products: &[Bits], needs: &[Bits], script: Vec<u64>) -> Self {
        let producers: Vec<OProducer> = products
            .iter()
            .enumerate()
            .map(|(i, b)| OProducer {
                id: i as u64,
                product: b.clone(),
                cash: p.c0,
                alive: true,
                bonus: 0.0,
            })
            .collect();
        let consumers: Vec<OConsumer> = needs
            .iter()
            .enumerate()
            .map(|(i, b)| OConsumer {
                id: (products.len() + i) as u64,
                needs: b.clone(),
                sat: p.s0,
            })
            .collect();
        let bar = p.innovation.threshold.resolve(K);
        Self {
            cash_rows: vec![producers.iter().map(|x| x.cash).collect()],
            sat_rows: vec![consumers.iter().map(|x| x.sat).collect()],
            next_id: (products.len() + needs.len()) as u64,
            p,
            bar,
            producers,
            consumers,
            t: 0,
            innovators: Vec::new(),
            tape: Tape { script, pos: 0 },
        }
    }

    /// Returns false when the market is empty and nothing happened.
    fn step(&mut self) -> bool {
        let k = K as f64;
        // every consumer against every producer
        let table: Vec<Vec<Option<f64>>> = self
            .consumers
            .iter()
            .map(|c| {
                self.producers
                    .iter()
                    .map(|p| {
                        p.alive
                            .then(|| matches(&p.product, &c.needs) as f64 + p.bonus)
                    })
                    .collect()
            })
            .collect();
        if self.producers.iter().all(|p| !p.alive) {
            return false;
        }
        let mut chosen = Vec::new();
        for row in &table {
            let best = row
                .iter()
                .flatten()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max);
            let tied: Vec<usize> = (0..row.len()).filter(|&i| row[i] == Some(best)).collect();
            chosen.push((self.tape.choose(&tied), best));
        }
        let mut income = vec![0.0; self.producers.len()];
        for (c, &(slot, m)) in self.consumers.iter_mut().zip(&chosen) {
            income[slot] += m / k;
            c.sat += m / k - self.p.ac;
        }
        for (p, inc) in self.producers.iter_mut().zip(&income) {
            if p.alive {
                p.cash += inc - self.p.ap;
            }
        }
        self.t += 1;
        self.cash_rows.push(
            self.producers
                .iter()
                .map(|p| if p.alive { p.cash } else { f64::NAN })
                .collect(),
        );
        self.sat_rows
            .push(self.consumers.iter().map(|c| c.sat).collect());

        for c in self.consumers.iter_mut() {
            if c.sat < 0.0 {
                *c = OConsumer {
                    id: self.next_id,
                    needs: self.tape.bits(),
                    sat: self.p.s0,
                };
                self.next_id += 1;
            }
        }
        for p in self.producers.iter_mut() {
            if p.alive && p.cash < 0.0 {
                if self.p.producer_policy == ProducerPolicy::ReplaceRandom {
                    *p = OProducer {
                        id: self.next_id,
                        product: self.tape.bits(),
                        cash: self.p.c0,
                        alive: true,
                        bonus: 0.0,
                    };
                    self.next_id += 1;
                } else {
                    p.alive = false;
                }
            }
        }

        let mode = self.p.innovation.mode;
        if self.t == self.p.t_innov && mode != InnovationMode::None {
            let mut cands: Vec<(f64, u64)> = if mode == InnovationMode::Cap {
                self.consumers.iter().map(|c| (c.sat, c.id)).collect()
            } else {
                self.producers
                    .iter()
                    .filter(|p| p.alive)
                    .map(|p| (p.cash, p.id))
                    .collect()
            };
            for i in (1..cands.len()).rev() {
                let j = self.tape.below(i + 1);
                cands.swap(i, j);
            }
            // insertion sort: stable by construction
            for i in 1..cands.len() {
                let mut j = i;
                while j > 0 && cands[j - 1].0 > cands[j].0 {
                    cands.swap(j - 1, j);
                    j -= 1;
                }
            }
            let count = match (cands.len(), self.p.innovation.innovator_count) {
                (0, _) => 0,
                (_, InnovatorCount::One) => 1,
                (n, InnovatorCount::RandomAmongPoorest) => 1 + self.tape.below(n),
            };
            self.innovators = cands[..count].iter().map(|c| c.1).collect();
            if mode == InnovationMode::Process {
                for p in self.producers.iter_mut() {
                    if p.alive && self.innovators.contains(&p.id) {
                        p.bonus = self.p.innovation.process_delta;
                    }
                }
            }
        }
        if self.t >= self.p.t_innov {
            self.innovate();
        }
        true
    }

    fn innovate(&mut self) {
        let bar = self.bar;
        for id in self.innovators.clone() {
            match self.p.innovation.mode {
                InnovationMode::Moi => {
                    let Some(slot) = self.producers.iter().position(|p| p.alive && p.id == id)
                    else {
                        continue;
                    };
                    let product = self.producers[slot].product.clone();
                    let refs: Vec<Bits> = self
                        .consumers
                        .iter()
                        .map(|c| c.needs.clone())
                        .filter(|n| matches(&product, n) >= bar)
                        .collect();
                    if !refs.is_empty() {
                        let pos = extreme_bit(&product, &refs, true, &mut self.tape);
                        self.producers[slot].product[pos] ^= 1;
                    }
                }
                InnovationMode::Cap => {
                    let Some(slot) = self.consumers.iter().position(|c| c.id == id) else {
                        continue;
                    };
                    let needs = self.consumers[slot].needs.clone();
                    let refs: Vec<Bits> = self
                        .producers
                        .iter()
                        .filter(|p| p.alive && matches(&needs, &p.product) >= bar)
                        .map(|p| p.product.clone())
                        .collect();
                    if !refs.is_empty() {
                        let pos = extreme_bit(&needs, &refs, true, &mut self.tape);
                        self.consumers[slot].needs[pos] ^= 1;
                    }
                }
                InnovationMode::Product => {
                    let Some(slot) = self.producers.iter().position(|p| p.alive && p.id == id)
                    else {
                        continue;
                    };
                    let n = self.consumers.len();
                    let mut pairs = Vec::new();
                    let mut best = 0;
                    for a in 0..n {
                        for b in a + 1..n {
                            let m = matches(&self.consumers[a].needs, &self.consumers[b].needs);
                            if m >= bar {
                                if pairs.is_empty() || m > best {
                                    best = m;
                                    pairs.clear();
                                }
                                if m == best {
                                    pairs.push((a, b));
                                }
                            }
                        }
                    }
                    if pairs.is_empty() {
                        continue;
                    }
                    let (a, b) = self.tape.choose(&pairs);
                    let mut cluster = vec![a, b];
                    for c in 0..n {
                        if c != a
                            && c != b
                            && cluster.iter().all(|&m| {
                                matches(&self.consumers[c].needs, &self.consumers[m].needs) >= bar
                            })
                        {
                            cluster.push(c);
                        }
                    }
                    let product: Bits = (0..K)
                        .map(|pos| {
                            let ones = cluster
                                .iter()
                                .filter(|&&c| self.consumers[c].needs[pos] == 1)
                                .count();
                            let zeros = cluster.len() - ones;
                            if ones > zeros {
                                1
                            } else if zeros > ones {
                                0
                            } else {
                                self.tape.coin()
                            }
                        })
                        .collect();
                    self.producers[slot].product = product;
                }
                InnovationMode::None | InnovationMode::Process => {}
            }
        }
    }
}

fn market_instance(seed: u64) -> (MarketParams, Vec<Bits>, Vec<Bits>, Vec<u64>) {
    let mut rng = SimRng::new(seed);
    let n_producers = 1 + rng.below(3);
    let n_consumers = 1 + rng.below(6 - n_producers);
    let t_innov = 1 + rng.below(2);
    let mut p = MarketParams {
        n_producers,
        n_consumers,
        k: K,
        ac: [0.0, 0.25, 0.5, 1.0][rng.below(4)],
        ap: [0.0, 0.5, 1.0, 2.0][rng.below(4)],
        c0: [0.25, 1.0, 2.0][rng.below(3)],
        s0: [0.25, 1.0, 2.0][rng.below(3)],
        producer_policy: if rng.coin() {
            ProducerPolicy::ReplaceRandom
        } else {
            ProducerPolicy::NoReplace
        },
        t_innov,
        t_end: t_innov + 1 + rng.below(3 - t_innov),
        ..MarketParams::default()
    };
    p.innovation.mode = [
        InnovationMode::None,
        InnovationMode::Moi,
        InnovationMode::Process,
        InnovationMode::Product,
        InnovationMode::Cap,
    ][rng.below(5)];
    p.innovation.innovator_count = if rng.coin() {
        InnovatorCount::One
    } else {
        InnovatorCount::RandomAmongPoorest
    };
    p.innovation.threshold = threshold(&mut rng);
    // few distinct strings, so ties are common
    let pool: Vec<Bits> = (0..3).map(|_| random_bits(&mut rng)).collect();
    let products = (0..n_producers)
        .map(|_| pool[rng.below(3)].clone())
        .collect();
    let needs = (0..n_consumers)
        .map(|_| pool[rng.below(3)].clone())
        .collect();
    (p, products, needs, script(&mut rng))
}

fn same_row(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn library_market(
    p: &MarketParams,
    products: &[Bits],
    needs: &[Bits],
    script: &[u64],
) -> MarketState<ScriptedEntropy> {
    MarketState::with_population(
        p.clone(),
        products.iter().map(to_string).collect(),
        needs.iter().map(to_string).collect(),
        ScriptedEntropy::new(script.to_vec()),
    )
    .unwrap()
}

pub fn market_steps_match_oracle() {
    let (mut with_deaths, mut with_innovators, mut draws) = (0, 0, 0);
    for seed in 0..INSTANCES {
        let (p, products, needs, script) = market_instance(seed);
        let mut oracle = MarketOracle::new(p.clone(), &products, &needs, script.clone());
        let mut lib = library_market(&p, &products, &needs, &script);
        let mut innovators = Vec::new();
        while lib.t() < p.t_end {
            let lib_ran = lib.select_suppliers();
            let oracle_ran = oracle.step();
            assert_eq!(lib_ran, oracle_ran, "instance {seed}");
            if !lib_ran {
                break;
            }
            lib.exchange_step();
            lib.apply_deaths().unwrap();
            if lib.t() == p.t_innov && p.innovation.mode != InnovationMode::None {
                innovators = lib.choose_innovators();
                if p.innovation.mode == InnovationMode::Process {
                    for &id in &innovators {
                        lib.set_process_bonus(id, p.innovation.process_delta);
                    }
                }
            }
            if lib.t() >= p.t_innov {
                lib.innovate(&innovators).unwrap();
            }

            let ctx = format!("instance {seed}, t = {}, params {p:?}", lib.t());
            assert_eq!(lib.t(), oracle.t, "{ctx}");
            assert_eq!(innovators, oracle.innovators, "{ctx}");
            for (a, b) in lib.producers().iter().zip(&oracle.producers) {
                assert_eq!(
                    (a.id, to_bits(&a.product), a.alive),
                    (b.id, b.product.clone(), b.alive),
                    "{ctx}"
                );
                assert_eq!(a.cash.to_bits(), b.cash.to_bits(), "{ctx}");
                assert_eq!(a.process_bonus, b.bonus, "{ctx}");
            }
            for (a, b) in lib.consumers().iter().zip(&oracle.consumers) {
                assert_eq!((a.id, to_bits(&a.needs)), (b.id, b.needs.clone()), "{ctx}");
                assert_eq!(a.satisfaction.to_bits(), b.sat.to_bits(), "{ctx}");
            }
        }
        assert_eq!(
            lib.rng_mut().draws() % script.len(),
            oracle.tape.pos,
            "instance {seed}"
        );
        draws += lib.rng_mut().draws();
        with_deaths += usize::from(
            oracle.next_id > (products.len() + needs.len()) as u64
                || oracle.producers.iter().any(|p| !p.alive),
        );
        with_innovators += usize::from(!innovators.is_empty());
    }
    // the instances must actually exercise tie-breaks, deaths and innovation
    assert!(
        with_deaths >= 10 && with_innovators >= 10 && draws >= 200,
        "{with_deaths} {with_innovators} {draws}"
    );
}

pub fn market_runs_match_oracle() {
    for seed in 0..INSTANCES {
        let (p, products, needs, script) = market_instance(seed);
        let mut oracle = MarketOracle::new(p.clone(), &products, &needs, script.clone());
        while oracle.t < p.t_end && oracle.step() {}
        let record =
            run_market_state(library_market(&p, &products, &needs, &script), true).unwrap();
        let ts = record.timeseries.unwrap();
        assert_eq!(record.steps_run, oracle.t, "instance {seed}");
        assert_eq!(ts.cash.len(), oracle.cash_rows.len());
        for (a, b) in ts.cash.iter().zip(&oracle.cash_rows) {
            assert!(same_row(a, b), "instance {seed}: {a:?} vs {b:?}");
        }
        for (a, b) in ts.satisfaction.iter().zip(&oracle.sat_rows) {
            assert!(same_row(a, b), "instance {seed}: {a:?} vs {b:?}");
        }
        let ids: Vec<u64> = record.innovators.iter().map(|o| o.id).collect();
        assert_eq!(ids, oracle.innovators, "instance {seed}");
    }
}

// ---------------------------------------------------------------- self-organization

#[derive(Debug, Clone, PartialEq)]
struct OAgent {
    p: Bits,
    n: Bits,
    fitness: f64,
}

struct SelfOrgOracle {
    params: SelfOrgParams,
    agents: Vec<OAgent>,
    tape: Tape,
}

impl SelfOrgOracle {
    fn step(&mut self) -> f64 {
        let m = self.agents.len();
        let k = K as f64;
        // full match matrix: q[i][j] = match(P_i, N_j)
        let q: Vec<Vec<usize>> = (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| matches(&self.agents[i].p, &self.agents[j].n))
                    .collect()
            })
            .collect();
        let mut delta = vec![0.0; m];
        for j in 0..m {
            let best = (0..m).filter(|&i| i != j).map(|i| q[i][j]).max().unwrap();
            let tied: Vec<usize> = (0..m).filter(|&i| i != j && q[i][j] == best).collect();
            let l = self.tape.choose(&tied);
            delta[l] += best as f64 / k;
            delta[j] -= best as f64 / k;
        }
        for (a, d) in self.agents.iter_mut().zip(&delta) {
            a.fitness += d;
        }
        for a in self.agents.iter_mut() {
            if a.fitness < 0.0 {
                let p = self.tape.bits();
                let n = self.tape.bits();
                *a = OAgent {
                    p,
                    n,
                    fitness: self.params.f0,
                };
            }
        }
        let bar = self.params.threshold.resolve(K);
        let before = self.agents.clone();
        let mut p_flip = vec![None; m];
        let mut n_flip = vec![None; m];
        if self.params.p_innovation {
            for i in 0..m {
                let refs: Vec<Bits> = (0..m)
                    .filter(|&j| j != i && matches(&before[i].p, &before[j].n) >= bar)
                    .map(|j| before[j].n.clone())
                    .collect();
                if !refs.is_empty() {
                    p_flip[i] = Some(extreme_bit(&before[i].p, &refs, true, &mut self.tape));
                }
            }
        }
        if self.params.n_innovation {
            for i in 0..m {
                let refs: Vec<Bits> = (0..m)
                    .filter(|&j| j != i && matches(&before[i].n, &before[j].p) >= bar)
                    .map(|j| before[j].p.clone())
                    .collect();
                if !refs.is_empty() {
                    n_flip[i] = Some(extreme_bit(&before[i].n, &refs, false, &mut self.tape));
                }
            }
        }
        for (i, a) in self.agents.iter_mut().enumerate() {
            if let Some(pos) = p_flip[i] {
                a.p[pos] ^= 1;
            }
            if let Some(pos) = n_flip[i] {
                a.n[pos] ^= 1;
            }
        }
        delta.iter().sum()
    }
}

fn selforg_instance(seed: u64) -> (SelfOrgParams, Vec<(Bits, Bits)>, usize, Vec<u64>) {
    let mut rng = SimRng::new(1_000 + seed);
    let m = 2 + rng.below(5);
    let params = SelfOrgParams {
        m_agents: m,
        k: K,
        f0: [0.2, 0.5, 1.0][rng.below(3)],
        horizon: 1 + rng.below(3),
        p_innovation: rng.coin(),
        n_innovation: rng.coin(),
        threshold: threshold(&mut rng),
    };
    let pool: Vec<Bits> = (0..3).map(|_| random_bits(&mut rng)).collect();
    let agents = (0..m)
        .map(|_| (pool[rng.below(3)].clone(), pool[rng.below(3)].clone()))
        .collect();
    (params.clone(), agents, params.horizon, script(&mut rng))
}

fn library_selforg(
    params: &SelfOrgParams,
    agents: &[(Bits, Bits)],
    script: &[u64],
) -> SelfOrgState<ScriptedEntropy> {
    SelfOrgState::with_population(
        params.clone(),
        agents
            .iter()
            .map(|(p, n)| (to_string(p), to_string(n)))
            .collect(),
        ScriptedEntropy::new(script.to_vec()),
    )
    .unwrap()
}

fn oracle_for(params: &SelfOrgParams, agents: &[(Bits, Bits)], script: &[u64]) -> SelfOrgOracle {
    SelfOrgOracle {
        params: params.clone(),
        agents: agents
            .iter()
            .map(|(p, n)| OAgent {
                p: p.clone(),
                n: n.clone(),
                fitness: params.f0,
            })
            .collect(),
        tape: Tape {
            script: script.to_vec(),
            pos: 0,
        },
    }
}

pub fn selforg_steps_match_oracle() {
    let (mut replaced, mut flips) = (0, 0);
    for seed in 0..INSTANCES {
        let (params, agents, steps, script) = selforg_instance(seed);
        let mut oracle = oracle_for(&params, &agents, &script);
        let mut lib = library_selforg(&params, &agents, &script);
        for t in 1..=steps {
            let imbalance = oracle.step();
            let report = lib.step().unwrap();
            assert_eq!(report.exchange_imbalance.to_bits(), imbalance.to_bits());
            replaced += report.replaced;
            let got: Vec<OAgent> = lib
                .agents()
                .iter()
                .map(|a| OAgent {
                    p: to_bits(&a.p),
                    n: to_bits(&a.n),
                    fitness: a.fitness,
                })
                .collect();
            assert_eq!(
                got, oracle.agents,
                "instance {seed}, t = {t}, params {params:?}"
            );
        }
        flips += agents
            .iter()
            .zip(&oracle.agents)
            .filter(|((p, n), a)| *p != a.p || *n != a.n)
            .count();
    }
    assert!(replaced >= 10 && flips >= 20, "{replaced} {flips}");
}

pub fn selforg_runs_match_oracle() {
    for seed in 0..INSTANCES {
        let (params, agents, steps, script) = selforg_instance(seed);
        let mut oracle = oracle_for(&params, &agents, &script);
        for _ in 0..steps {
            oracle.step();
        }
        let record = run_selforg_state(library_selforg(&params, &agents, &script)).unwrap();
        let expected: Vec<f64> = oracle.agents.iter().map(|a| a.fitness).collect();
        assert_eq!(record.end.fitness, expected, "instance {seed}");
        assert_eq!(record.end.t, steps);
    }
}
