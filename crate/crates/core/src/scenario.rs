//! Experiment description and its TOML representation.
//!
//! Units: sizes in MB, compute rates in MB/s, frequencies in GHz, prices in
//! $/VM-hour, deadlines in ms, distances in m.

use std::collections::BTreeSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ScenarioError;

pub mod presets;
pub use presets::{builtin_preset, PRESET_NAMES};

pub const DEFAULT_KAPPA: f64 = 1e-24;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmPool {
    pub vm_count: usize,
    pub vcpus: u32,
    pub cpu_freq_ghz: f64,
    pub compute_rate_mb_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub id: u32,
    /// Location of the co-located access point.
    pub position_m: [f64; 2],
    /// One pool per application, indexed like `Scenario::apps`.
    pub pools: Vec<VmPool>,
    pub price_scale: f64,
    #[serde(default = "default_kappa")]
    pub switched_capacitance: f64,
    /// Multiplier on the energy-cost valuation; presets use it to pin valuations.
    #[serde(default = "one")]
    pub valuation_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeSpec {
    pub id: u32,
    /// Fixed location; when absent the UE is placed uniformly at random in
    /// every replication.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position_m: Option<[f64; 2]>,
    pub tx_power_dbm: f64,
    pub avg_task_size_mb: Vec<f64>,
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppSpec {
    pub id: u32,
    pub deadline_ms: f64,
    pub min_cpu_freq_ghz: f64,
    #[serde(default = "one")]
    pub capacity_req: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub bandwidth_mhz: f64,
    pub noise_dbm: f64,
    pub carrier_ghz: f64,
    pub mu_d: f64,
    pub mu_0: f64,
    pub mu_f: f64,
    /// Side of the square deployment area.
    #[serde(default = "default_area")]
    pub area_side_m: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            bandwidth_mhz: 80.0,
            noise_dbm: -100.0,
            carrier_ghz: 5.8,
            mu_d: 2.12,
            mu_0: 29.2,
            mu_f: 2.11,
            area_side_m: 250.0,
        }
    }
}

/// How queue priorities are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorityRule {
    /// λ = d̄ / τ_max
    #[default]
    SizeOverDeadline,
    /// λ = γ̂·β / (d̄·τ_max·f_min), the orchestrator-loop variant.
    RateWeighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionParams {
    pub slot_seconds: f64,
    pub epsilon: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub qoe_latency_weight: f64,
    pub qoe_cost_weight: f64,
    pub convergence_tol: f64,
    pub replications: u32,
    pub rng_seed: u64,
    /// Queue length K; defaults to the number of UEs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub queue_capacity: Option<usize>,
    #[serde(default)]
    pub priority_rule: PriorityRule,
}

impl Default for AuctionParams {
    fn default() -> Self {
        Self {
            slot_seconds: 300.0,
            epsilon: 0.001,
            gamma_min: 0.01,
            gamma_max: 0.90,
            qoe_latency_weight: 0.5,
            qoe_cost_weight: 0.5,
            convergence_tol: 1e-4,
            replications: 1000,
            rng_seed: 7,
            queue_capacity: None,
            priority_rule: PriorityRule::SizeOverDeadline,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskModel {
    /// Every UE offloads the same amount each slot: `size_mb` if given,
    /// otherwise its own average size.
    Static {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        size_mb: Option<f64>,
    },
    /// Sizes drawn from Poisson(d̄_j) each slot, redrawn until ≥ 1 MB.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StrategyKind {
    Rbb,
    Bb,
    /// Undercut the target price by a fraction `margin`.
    Ab { margin: f64 },
    /// Outbid the target price by `margin` dollars.
    Cb { margin: f64 },
    Truthful,
}

impl StrategyKind {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Rbb => "RBB",
            Self::Bb => "BB",
            Self::Ab { .. } => "AB",
            Self::Cb { .. } => "CB",
            Self::Truthful => "Truthful",
        }
    }

    pub fn parse(s: &str, epsilon: f64) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rbb" => Some(Self::Rbb),
            "bb" => Some(Self::Bb),
            "ab" => Some(Self::Ab { margin: 0.05 }),
            "cb" => Some(Self::Cb { margin: epsilon }),
            "truthful" => Some(Self::Truthful),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub servers: Vec<ServerSpec>,
    pub ues: Vec<UeSpec>,
    pub apps: Vec<AppSpec>,
    pub channel: ChannelParams,
    pub auction: AuctionParams,
    pub task_model: TaskModel,
    /// Parallel to `servers`.
    pub strategies: Vec<StrategyKind>,
}

impl Scenario {
    pub fn vm_count(&self, app: usize) -> usize {
        self.servers.iter().map(|s| s.pools[app].vm_count).sum()
    }

    pub fn queue_capacity(&self) -> usize {
        self.auction.queue_capacity.unwrap_or(self.ues.len())
    }

    pub fn server_index(&self, id: u32) -> Option<usize> {
        self.servers.iter().position(|s| s.id == id)
    }

    /// Replace every server's strategy.
    pub fn with_strategy(mut self, kind: StrategyKind) -> Self {
        self.strategies = vec![kind; self.servers.len()];
        self
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        fn inv(field: impl Into<String>, reason: impl Into<String>) -> ScenarioError {
            ScenarioError::invalid(field, reason)
        }
        if self.servers.is_empty() {
            return Err(inv("servers", "at least one server is required"));
        }
        if self.ues.is_empty() {
            return Err(inv("ues", "at least one UE is required"));
        }
        if self.apps.is_empty() {
            return Err(inv("apps", "at least one application is required"));
        }
        if self.strategies.len() != self.servers.len() {
            return Err(inv("strategies", "one strategy per server is required"));
        }
        let n = self.apps.len();
        let mut ids = BTreeSet::new();
        for (s, kind) in self.servers.iter().zip(&self.strategies) {
            let f = |name: &str| format!("server {}.{name}", s.id);
            if !ids.insert(s.id) {
                return Err(inv(f("id"), "duplicate server id"));
            }
            if s.pools.len() != n {
                return Err(inv(f("pools"), format!("expected {n} pools, one per app")));
            }
            for p in &s.pools {
                if !(p.cpu_freq_ghz > 0.0 && p.cpu_freq_ghz.is_finite()) {
                    return Err(inv(f("cpu_freq_ghz"), "must be > 0"));
                }
                if !(p.compute_rate_mb_s > 0.0 && p.compute_rate_mb_s.is_finite()) {
                    return Err(inv(f("compute_rate_mb_s"), "must be > 0"));
                }
                if p.vcpus == 0 {
                    return Err(inv(f("vcpus"), "must be ≥ 1"));
                }
            }
            if !(s.price_scale > 0.0 && s.price_scale.is_finite()) {
                return Err(inv(f("price_scale"), "must be > 0"));
            }
            if !(s.switched_capacitance > 0.0 && s.switched_capacitance.is_finite()) {
                return Err(inv(f("switched_capacitance"), "must be > 0"));
            }
            if !(s.valuation_scale > 0.0 && s.valuation_scale.is_finite()) {
                return Err(inv(f("valuation_scale"), "must be > 0"));
            }
            if s.position_m.iter().any(|c| !c.is_finite()) {
                return Err(inv(f("position_m"), "must be finite"));
            }
            match *kind {
                StrategyKind::Ab { margin } if !(margin > 0.0 && margin < 1.0) => {
                    return Err(inv(f("strategy.margin"), "AB margin must lie in (0, 1)"));
                }
                StrategyKind::Cb { margin } if !(margin > 0.0 && margin.is_finite()) => {
                    return Err(inv(f("strategy.margin"), "CB margin must be > 0"));
                }
                _ => {}
            }
        }
        let mut ids = BTreeSet::new();
        for u in &self.ues {
            let f = |name: &str| format!("ue {}.{name}", u.id);
            if !ids.insert(u.id) {
                return Err(inv(f("id"), "duplicate UE id"));
            }
            if !u.tx_power_dbm.is_finite() {
                return Err(inv(f("tx_power_dbm"), "must be finite"));
            }
            if u.avg_task_size_mb.len() != n {
                return Err(inv(f("avg_task_size_mb"), format!("expected {n} entries, one per app")));
            }
            if u.avg_task_size_mb.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
                return Err(inv(f("avg_task_size_mb"), "must be > 0"));
            }
            if !(u.budget > 0.0 && u.budget.is_finite()) {
                return Err(inv(f("budget"), "must be > 0"));
            }
            if let Some(p) = u.position_m {
                if p.iter().any(|c| !c.is_finite()) {
                    return Err(inv(f("position_m"), "must be finite"));
                }
            }
        }
        for a in &self.apps {
            if !(a.deadline_ms > 0.0 && a.deadline_ms.is_finite()) {
                return Err(inv(format!("app {}.deadline_ms", a.id), "must be > 0"));
            }
            if !(a.min_cpu_freq_ghz > 0.0 && a.min_cpu_freq_ghz.is_finite()) {
                return Err(inv(format!("app {}.min_cpu_freq_ghz", a.id), "must be > 0"));
            }
        }
        let c = &self.channel;
        if !(c.bandwidth_mhz > 0.0 && c.bandwidth_mhz.is_finite()) {
            return Err(inv("channel.bandwidth_mhz", "must be > 0"));
        }
        if !(c.mu_d > 0.0 && c.mu_d.is_finite()) {
            return Err(inv("channel.mu_d", "must be > 0"));
        }
        if !(c.carrier_ghz > 0.0) || !c.noise_dbm.is_finite() || !c.mu_0.is_finite() || !c.mu_f.is_finite() {
            return Err(inv("channel", "carrier must be > 0 and coefficients finite"));
        }
        if !(c.area_side_m > 0.0 && c.area_side_m.is_finite()) {
            return Err(inv("channel.area_side_m", "must be > 0"));
        }
        let a = &self.auction;
        if !(a.gamma_min >= 0.0 && a.gamma_min < a.gamma_max && a.gamma_max.is_finite()) {
            return Err(inv("auction.gamma_min/gamma_max", "need 0 ≤ gamma_min < gamma_max"));
        }
        for (name, w) in [("qoe_latency_weight", a.qoe_latency_weight), ("qoe_cost_weight", a.qoe_cost_weight)] {
            if !(0.0..=1.0).contains(&w) {
                return Err(inv(format!("auction.{name}"), "must lie in [0, 1]"));
            }
        }
        if !(a.epsilon > 0.0 && a.epsilon.is_finite()) {
            return Err(inv("auction.epsilon", "must be > 0"));
        }
        if a.replications < 1 {
            return Err(inv("auction.replications", "must be ≥ 1"));
        }
        if !(a.slot_seconds > 0.0 && a.slot_seconds.is_finite()) {
            return Err(inv("auction.slot_seconds", "must be > 0"));
        }
        if !(a.convergence_tol >= 0.0) {
            return Err(inv("auction.convergence_tol", "must be ≥ 0"));
        }
        if a.queue_capacity == Some(0) {
            return Err(inv("auction.queue_capacity", "must be ≥ 1"));
        }
        if let TaskModel::Static { size_mb: Some(d) } = self.task_model {
            if !(d > 0.0 && d.is_finite()) {
                return Err(inv("task_model.size_mb", "must be > 0"));
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// File format

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    name: String,
    #[serde(default)]
    channel: ChannelParams,
    #[serde(default)]
    auction: AuctionParams,
    task_model: TaskModel,
    apps: Vec<AppSpec>,
    servers: Vec<ServerEntry>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    ues: Vec<UeSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ue_population: Option<UePopulation>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ServerEntry {
    #[serde(flatten)]
    spec: ServerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    strategy: Option<StrategyEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum StrategyEntry {
    Rbb,
    Bb,
    Ab {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
    Cb {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        margin: Option<f64>,
    },
    Truthful,
}

/// Compact way to declare many UEs: sizes drawn uniformly from the range
/// with `seed`, random placement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UePopulation {
    pub count: usize,
    pub tx_power_dbm: f64,
    pub budget: f64,
    /// Per-app `[lo, hi]` range of average task sizes.
    pub avg_task_size_mb: Vec<[f64; 2]>,
    pub seed: u64,
}

impl UePopulation {
    pub fn generate(&self, first_id: u32) -> Vec<UeSpec> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.count)
            .map(|k| UeSpec {
                id: first_id + k as u32,
                position_m: None,
                tx_power_dbm: self.tx_power_dbm,
                avg_task_size_mb: self
                    .avg_task_size_mb
                    .iter()
                    .map(|&[lo, hi]| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
                    .collect(),
                budget: self.budget,
            })
            .collect()
    }
}

fn default_kappa() -> f64 {
    DEFAULT_KAPPA
}
fn one() -> f64 {
    1.0
}
fn default_area() -> f64 {
    250.0
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    let mut strategies = Vec::with_capacity(file.servers.len());
    let mut servers = Vec::with_capacity(file.servers.len());
    for entry in file.servers {
        let kind = match entry.strategy {
            None => {
                return Err(ScenarioError::invalid(
                    format!("server {}.strategy", entry.spec.id),
                    format!("server {} has no strategy", entry.spec.id),
                ))
            }
            Some(StrategyEntry::Rbb) => StrategyKind::Rbb,
            Some(StrategyEntry::Bb) => StrategyKind::Bb,
            Some(StrategyEntry::Truthful) => StrategyKind::Truthful,
            Some(StrategyEntry::Ab { margin }) => StrategyKind::Ab { margin: margin.unwrap_or(0.05) },
            Some(StrategyEntry::Cb { margin }) => StrategyKind::Cb { margin: margin.unwrap_or(file.auction.epsilon) },
        };
        strategies.push(kind);
        servers.push(entry.spec);
    }
    let mut ues = file.ues;
    if let Some(pop) = &file.ue_population {
        let next = ues.iter().map(|u| u.id + 1).max().unwrap_or(1);
        ues.extend(pop.generate(next));
    }
    let scenario = Scenario {
        name: file.name,
        servers,
        ues,
        apps: file.apps,
        channel: file.channel,
        auction: file.auction,
        task_model: file.task_model,
        strategies,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
    parse_scenario(&text)
}

/// Serialize with every UE written out explicitly.
pub fn scenario_to_toml(s: &Scenario) -> String {
    let file = ScenarioFile {
        name: s.name.clone(),
        channel: s.channel.clone(),
        auction: s.auction.clone(),
        task_model: s.task_model,
        apps: s.apps.clone(),
        servers: s
            .servers
            .iter()
            .zip(&s.strategies)
            .map(|(spec, k)| ServerEntry {
                spec: spec.clone(),
                strategy: Some(match *k {
                    StrategyKind::Rbb => StrategyEntry::Rbb,
                    StrategyKind::Bb => StrategyEntry::Bb,
                    StrategyKind::Truthful => StrategyEntry::Truthful,
                    StrategyKind::Ab { margin } => StrategyEntry::Ab { margin: Some(margin) },
                    StrategyKind::Cb { margin } => StrategyEntry::Cb { margin: Some(margin) },
                }),
            })
            .collect(),
        ues: s.ues.clone(),
        ue_population: None,
    };
    toml::to_string(&file).expect("scenario is always representable in TOML")
}

pub fn write_scenario(s: &Scenario, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, scenario_to_toml(s))
}

/// The bundled reference deployment as a configuration file.
pub const TABLE3_TABLE4_TOML: &str = include_str!("../presets/table3_table4.toml");
