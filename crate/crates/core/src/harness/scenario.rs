//! Scenario configuration: flat `key = value` files, overrides and the built-in catalog.
//!
//! Config files are TOML restricted to top-level scalar keys. Every model parameter
//! must be present; only `name`, `runs` and `base_seed` fall back to defaults.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::market::{
    InnovationConfig, InnovationMode, InnovatorCount, MarketParams, ProducerPolicy,
};
use crate::selforg::SelfOrgParams;
use crate::threshold::{MatchThreshold, ThresholdKind};

pub const DEFAULT_RUNS: usize = 200;
pub const DEFAULT_SELFORG_RUNS: usize = 20;
pub const DEFAULT_BASE_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum ModelParams {
    Market(MarketParams),
    #[serde(rename = "selforg")]
    SelfOrg(SelfOrgParams),
}

impl ModelParams {
    pub fn name(&self) -> &'static str {
        match self {
            ModelParams::Market(_) => "market",
            ModelParams::SelfOrg(_) => "selforg",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelParams::Market(p) => p.validate(),
            ModelParams::SelfOrg(p) => p.validate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub runs: usize,
    pub base_seed: u64,
    pub model: ModelParams,
}

struct Fields<'a> {
    table: &'a Table,
    used: BTreeSet<&'a str>,
}

impl<'a> Fields<'a> {
    fn new(table: &'a Table) -> Self {
        Self {
            table,
            used: BTreeSet::new(),
        }
    }

    fn raw(&mut self, key: &'static str) -> Option<&'a Value> {
        let (k, v) = self.table.get_key_value(key)?;
        self.used.insert(k.as_str());
        Some(v)
    }

    fn required(&mut self, key: &'static str) -> Result<&'a Value> {
        self.raw(key)
            .ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn string(&mut self, key: &'static str) -> Result<&'a str> {
        self.required(key)?
            .as_str()
            .ok_or_else(|| Error::config(key, "expected a string"))
    }

    fn uint(&mut self, key: &'static str) -> Result<u64> {
        let v = self.required(key)?;
        parse_uint(v)
            .ok_or_else(|| Error::config(key, format!("expected a non-negative integer, got {v}")))
    }

    fn usize(&mut self, key: &'static str) -> Result<usize> {
        Ok(self.uint(key)? as usize)
    }

    fn float(&mut self, key: &'static str) -> Result<f64> {
        match self.required(key)? {
            Value::Float(f) => Ok(*f),
            Value::Integer(i) => Ok(*i as f64),
            other => Err(Error::config(
                key,
                format!("expected a number, got {other}"),
            )),
        }
    }

    fn boolean(&mut self, key: &'static str) -> Result<bool> {
        self.required(key)?
            .as_bool()
            .ok_or_else(|| Error::config(key, "expected true or false"))
    }

    fn choice<T>(
        &mut self,
        key: &'static str,
        parse: fn(&str) -> Option<T>,
        names: &[&str],
    ) -> Result<T> {
        let s = self.string(key)?;
        parse(s).ok_or_else(|| {
            Error::config(
                key,
                format!("unknown value {s:?}; expected one of {names:?}"),
            )
        })
    }

    fn threshold(&mut self) -> Result<MatchThreshold> {
        let names: Vec<&str> = ThresholdKind::ALL.iter().map(|k| k.as_str()).collect();
        Ok(MatchThreshold {
            kind: self.choice("threshold_kind", ThresholdKind::parse, &names)?,
            value: self.float("threshold_value")?,
        })
    }

    fn finish(self) -> Result<()> {
        match self.table.keys().find(|k| !self.used.contains(k.as_str())) {
            Some(k) => Err(Error::config(k.clone(), "unknown key")),
            None => Ok(()),
        }
    }
}

fn parse_uint(v: &Value) -> Option<u64> {
    match v {
        Value::Integer(i) if *i >= 0 => Some(*i as u64),
        Value::String(s) => s.parse().ok(),
        _ => None,
    }
}

fn uint_value(v: u64) -> Value {
    i64::try_from(v)
        .map(Value::Integer)
        .unwrap_or_else(|_| Value::String(v.to_string()))
}

impl ScenarioConfig {
    /// Flat key/value pairs in canonical order.
    pub fn to_pairs(&self) -> Vec<(&'static str, Value)> {
        let mut pairs: Vec<(&'static str, Value)> = vec![
            ("name", Value::String(self.name.clone())),
            ("model", Value::String(self.model.name().into())),
            ("runs", uint_value(self.runs as u64)),
            ("base_seed", uint_value(self.base_seed)),
        ];
        match &self.model {
            ModelParams::Market(p) => {
                let inn = &p.innovation;
                pairs.extend([
                    ("n_producers", uint_value(p.n_producers as u64)),
                    ("n_consumers", uint_value(p.n_consumers as u64)),
                    ("k", uint_value(p.k as u64)),
                    ("ac", Value::Float(p.ac)),
                    ("ap", Value::Float(p.ap)),
                    ("c0", Value::Float(p.c0)),
                    ("s0", Value::Float(p.s0)),
                    (
                        "producer_policy",
                        Value::String(p.producer_policy.as_str().into()),
                    ),
                    ("innovation_mode", Value::String(inn.mode.as_str().into())),
                    (
                        "innovator_count",
                        Value::String(inn.innovator_count.as_str().into()),
                    ),
                    (
                        "threshold_kind",
                        Value::String(inn.threshold.kind.as_str().into()),
                    ),
                    ("threshold_value", Value::Float(inn.threshold.value)),
                    ("process_delta", Value::Float(inn.process_delta)),
                    ("t_innov", uint_value(p.t_innov as u64)),
                    ("t_end", uint_value(p.t_end as u64)),
                ]);
            }
            ModelParams::SelfOrg(p) => {
                pairs.extend([
                    ("m_agents", uint_value(p.m_agents as u64)),
                    ("k", uint_value(p.k as u64)),
                    ("f0", Value::Float(p.f0)),
                    ("horizon", uint_value(p.horizon as u64)),
                    ("p_innovation", Value::Boolean(p.p_innovation)),
                    ("n_innovation", Value::Boolean(p.n_innovation)),
                    (
                        "threshold_kind",
                        Value::String(p.threshold.kind.as_str().into()),
                    ),
                    ("threshold_value", Value::Float(p.threshold.value)),
                ]);
            }
        }
        pairs
    }

    pub fn to_table(&self) -> Table {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    /// Canonical config text, one `key = value` per line.
    pub fn to_config_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn from_table(table: &Table, default_name: &str) -> Result<Self> {
        let mut f = Fields::new(table);
        let name = match f.raw("name") {
            Some(v) => v
                .as_str()
                .ok_or_else(|| Error::config("name", "expected a string"))?
                .to_string(),
            None => default_name.to_string(),
        };
        let model_name = f.string("model")?;
        let runs = if table.contains_key("runs") {
            f.usize("runs")?
        } else if model_name == "selforg" {
            DEFAULT_SELFORG_RUNS
        } else {
            DEFAULT_RUNS
        };
        if runs == 0 {
            return Err(Error::config("runs", "must be positive"));
        }
        let base_seed = if table.contains_key("base_seed") {
            f.uint("base_seed")?
        } else {
            DEFAULT_BASE_SEED
        };
        let model = match model_name {
            "market" => ModelParams::Market(MarketParams {
                n_producers: f.usize("n_producers")?,
                n_consumers: f.usize("n_consumers")?,
                k: f.usize("k")?,
                ac: f.float("ac")?,
                ap: f.float("ap")?,
                c0: f.float("c0")?,
                s0: f.float("s0")?,
                producer_policy: f.choice(
                    "producer_policy",
                    ProducerPolicy::parse,
                    ProducerPolicy::names(),
                )?,
                innovation: InnovationConfig {
                    mode: f.choice(
                        "innovation_mode",
                        InnovationMode::parse,
                        InnovationMode::names(),
                    )?,
                    innovator_count: f.choice(
                        "innovator_count",
                        InnovatorCount::parse,
                        InnovatorCount::names(),
                    )?,
                    threshold: f.threshold()?,
                    process_delta: f.float("process_delta")?,
                },
                t_innov: f.usize("t_innov")?,
                t_end: f.usize("t_end")?,
            }),
            "selforg" => ModelParams::SelfOrg(SelfOrgParams {
                m_agents: f.usize("m_agents")?,
                k: f.usize("k")?,
                f0: f.float("f0")?,
                horizon: f.usize("horizon")?,
                p_innovation: f.boolean("p_innovation")?,
                n_innovation: f.boolean("n_innovation")?,
                threshold: f.threshold()?,
            }),
            other => {
                return Err(Error::config(
                    "model",
                    format!("unknown model {other:?}; expected \"market\" or \"selforg\""),
                ))
            }
        };
        f.finish()?;
        model.validate()?;
        Ok(Self {
            name,
            runs,
            base_seed,
            model,
        })
    }

    pub fn from_config_text(text: &str, default_name: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| {
            let key = e
                .message()
                .split('`')
                .nth(1)
                .unwrap_or("config")
                .to_string();
            Error::config(key, e.message().trim().to_string())
        })?;
        Self::from_table(&table, default_name)
    }

    /// Applies `key=value` overrides. Values are read as TOML scalars, falling back
    /// to a bare string, so `innovation_mode=moi` and `ac=1` both work.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut table = self.to_table();
        for o in overrides {
            let (key, value) = parse_override(o)?;
            table.insert(key, value);
        }
        Self::from_table(&table, &self.name)
    }
}

pub fn parse_override(text: &str) -> Result<(String, Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must look like key=value"))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::config(text, "override has an empty key"));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

pub struct CatalogEntry {
    pub config: ScenarioConfig,
    pub description: &'static str,
}

fn market_entry(
    name: &str,
    description: &'static str,
    edit: impl FnOnce(&mut MarketParams),
) -> CatalogEntry {
    let mut p = MarketParams::default();
    edit(&mut p);
    CatalogEntry {
        config: ScenarioConfig {
            name: name.into(),
            runs: DEFAULT_RUNS,
            base_seed: DEFAULT_BASE_SEED,
            model: ModelParams::Market(p),
        },
        description,
    }
}

fn selforg_entry(
    name: &str,
    description: &'static str,
    p_innovation: bool,
    n_innovation: bool,
) -> CatalogEntry {
    CatalogEntry {
        config: ScenarioConfig {
            name: name.into(),
            runs: DEFAULT_SELFORG_RUNS,
            base_seed: DEFAULT_BASE_SEED,
            model: ModelParams::SelfOrg(SelfOrgParams {
                p_innovation,
                n_innovation,
                ..SelfOrgParams::default()
            }),
        },
        description,
    }
}

fn moi(p: &mut MarketParams, ac: f64, count: InnovatorCount) {
    p.ac = ac;
    p.ap = 5.0;
    p.producer_policy = ProducerPolicy::NoReplace;
    p.innovation.mode = InnovationMode::Moi;
    p.innovation.innovator_count = count;
}

fn cap(p: &mut MarketParams, ap: f64, count: InnovatorCount) {
    p.ac = 0.5;
    p.ap = ap;
    p.producer_policy = ProducerPolicy::ReplaceRandom;
    p.innovation.mode = InnovationMode::Cap;
    p.innovation.innovator_count = count;
}

/// Built-in scenarios, named `<mechanism>-<environment>-<cardinality>`.
pub fn catalog() -> Vec<CatalogEntry> {
    use InnovatorCount::{One, RandomAmongPoorest as Many};
    vec![
        market_entry("moi-stable-one", "market-oriented innovation, ac=0.5, one innovating producer", |p| moi(p, 0.5, One)),
        market_entry("moi-volatile-one", "market-oriented innovation, ac=1, one innovating producer", |p| moi(p, 1.0, One)),
        market_entry("moi-stable-many", "market-oriented innovation, ac=0.5, random number of poorest producers", |p| moi(p, 0.5, Many)),
        market_entry("moi-volatile-many", "market-oriented innovation, ac=1, random number of poorest producers", |p| moi(p, 1.0, Many)),
        market_entry("cap-lowrep-one", "consumer adaptation, producer replacement with ap=4, one adapting consumer", |p| cap(p, 4.0, One)),
        market_entry("cap-highrep-one", "consumer adaptation, producer replacement with ap=6, one adapting consumer", |p| cap(p, 6.0, One)),
        market_entry("cap-lowrep-many", "consumer adaptation, producer replacement with ap=4, random number of least satisfied consumers", |p| cap(p, 4.0, Many)),
        market_entry("cap-highrep-many", "consumer adaptation, producer replacement with ap=6, random number of least satisfied consumers", |p| cap(p, 6.0, Many)),
        market_entry("process-volatile-one", "process innovation (+0.5 match bonus), ac=1, one innovating producer", |p| {
            moi(p, 1.0, One);
            p.innovation.mode = InnovationMode::Process;
        }),
        market_entry("product-volatile-one", "product innovation from a consumer cluster, ac=1, one innovating producer", |p| {
            moi(p, 1.0, One);
            p.innovation.mode = InnovationMode::Product;
        }),
        selforg_entry("selforg-none", "self-organizing society without innovation, T=5000", false, false),
        selforg_entry("selforg-p", "self-organizing society, all agents P-innovate, T=5000", true, false),
        selforg_entry("selforg-n", "self-organizing society, all agents N-innovate, T=5000", false, true),
        selforg_entry("selforg-pn", "self-organizing society, P- and N-innovation, T=5000", true, true),
    ]
}

pub fn find_scenario(name: &str) -> Result<ScenarioConfig> {
    catalog()
        .into_iter()
        .find(|e| e.config.name == name)
        .map(|e| e.config)
        .ok_or_else(|| {
            Error::config(
                "scenario",
                format!("unknown scenario {name:?}; see `catalog`"),
            )
        })
}
