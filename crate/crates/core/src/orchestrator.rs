//! The repeated auction: per slot, refresh quality scores, collect bids,
//! queue tasks, run the round, score it over the replicated draws, and
//! advance VM workloads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::analytics::{self, Qoe};
use crate::bidding::next_bid;
use crate::channel::uplink_rate_mbps;
use crate::error::{DomainError, SimError};
use crate::gsp::{priority_index, rate_weighted_priority, run_gsp_round, Bidder, PriceRule, RoundOutcome, Task, TaskQueue};
use crate::scenario::{PriorityRule, Scenario, StrategyKind, TaskModel};
use crate::vcg::run_vcg_round;
use crate::workload::{VmId, VmState};

pub const DEFAULT_HORIZON: usize = 50;

/// Distances below this are clamped before computing path loss.
const MIN_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mechanism {
    Gsp,
    Vcg,
}

impl Mechanism {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Gsp => "gsp",
            Self::Vcg => "vcg",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    pub horizon: usize,
    /// Stop this many slots after the bids settle.
    pub stop_after_convergence: Option<usize>,
    pub price_rule: PriceRule,
    /// Overrides the scenario's replication count.
    pub replications: Option<u32>,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { horizon: DEFAULT_HORIZON, stop_after_convergence: None, price_rule: PriceRule::default(), replications: None }
    }
}

impl SimOptions {
    pub fn horizon(horizon: usize) -> Self {
        Self { horizon, ..Self::default() }
    }
}

/// Per-slot aggregates. QoE figures are means over replications.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord {
    pub slot: usize,
    /// Mean current bid per server over all its VMs.
    pub mean_bid: Vec<f64>,
    /// Mean price over served slots of every app (None if nothing served).
    pub mean_price: Option<f64>,
    pub server_utility: Vec<f64>,
    pub margin_pct: Option<f64>,
    pub served: usize,
    pub unserved: usize,
    pub mean_latency_s: f64,
    pub deadline_miss_rate: f64,
    pub mean_q_latency: f64,
    pub mean_q_cost: f64,
    pub mean_qoe: f64,
    /// Composite SW: Σ server utility + Σ UE QoE.
    pub social_welfare: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub mechanism: Mechanism,
    pub price_rule: PriceRule,
    pub epsilon: f64,
    pub servers: usize,
    pub slots: Vec<SlotRecord>,
    /// history[t][app]
    pub history: Vec<Vec<RoundOutcome>>,
    /// valuations[app], parallel to each outcome's `bids`.
    pub valuations: Vec<Vec<f64>>,
    /// All VM bids per slot, in a fixed VM order.
    pub bid_history: Vec<Vec<f64>>,
    /// 1-based slot from which bids stay settled.
    pub convergence_slot: Option<usize>,
}

impl RunReport {
    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn last(&self) -> Option<&SlotRecord> {
        self.slots.last()
    }

    /// Mean price in the final slot.
    pub fn final_price(&self) -> Option<f64> {
        self.slots.last().and_then(|r| r.mean_price)
    }

    pub fn final_bids(&self) -> Option<&[f64]> {
        self.bid_history.last().map(Vec::as_slice)
    }

    pub fn final_outcomes(&self) -> Option<&[RoundOutcome]> {
        self.history.last().map(Vec::as_slice)
    }

    /// Outcomes of the convergence slot.
    pub fn converged_outcomes(&self) -> Option<&[RoundOutcome]> {
        self.convergence_slot.map(|t| self.history[t - 1].as_slice())
    }

    /// Share of served slots in the final round won by each server.
    pub fn final_win_share(&self) -> Vec<f64> {
        let mut wins = vec![0usize; self.servers];
        let mut total = 0;
        for o in self.final_outcomes().unwrap_or(&[]) {
            for (_, vm, _) in o.served() {
                wins[vm.server()] += 1;
                total += 1;
            }
        }
        wins.iter().map(|&w| if total == 0 { 0.0 } else { w as f64 / total as f64 }).collect()
    }
}

/// First 1-based slot t with max |b(t') − b(t'−1)| < tol for every t' ≥ t.
pub fn detect_convergence(bid_history: &[Vec<f64>], tol: f64) -> Option<usize> {
    if bid_history.len() < 2 {
        return None;
    }
    let mut start = None;
    for t in 1..bid_history.len() {
        let step = bid_history[t]
            .iter()
            .zip(&bid_history[t - 1])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if step < tol {
            start.get_or_insert(t + 1);
        } else {
            start = None;
        }
    }
    start
}

/// Draw one task size for every (app, UE), as per-app lists of (UE index, MB).
pub fn generate_tasks(scenario: &Scenario, rng: &mut impl Rng) -> Vec<Vec<(usize, f64)>> {
    (0..scenario.apps.len())
        .map(|n| {
            scenario
                .ues
                .iter()
                .enumerate()
                .map(|(j, ue)| {
                    let mean = ue.avg_task_size_mb[n];
                    let size = match scenario.task_model {
                        TaskModel::Static { size_mb } => size_mb.unwrap_or(mean),
                        TaskModel::Poisson => draw_poisson(mean, rng),
                    };
                    (j, size)
                })
                .collect()
        })
        .collect()
}

fn draw_poisson(mean: f64, rng: &mut impl Rng) -> f64 {
    let Ok(dist) = Poisson::new(mean) else { return mean.max(1.0) };
    loop {
        let x: f64 = dist.sample(rng);
        if x >= 1.0 {
            return x;
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent stream per (seed, slot, replication).
pub fn draw_rng(seed: u64, slot: usize, rep: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix(splitmix(seed ^ splitmix(slot as u64)) ^ rep as u64))
}

/// One replication's random inputs.
struct Draw {
    sizes: Vec<Vec<(usize, f64)>>,
    /// Uplink rate per UE to its nearest access point.
    rates: Vec<f64>,
}

fn draw(scenario: &Scenario, seed: u64, slot: usize, rep: usize) -> Result<Draw, DomainError> {
    let mut rng = draw_rng(seed, slot, rep);
    let side = scenario.channel.area_side_m;
    let rates = scenario
        .ues
        .iter()
        .map(|ue| {
            let pos = ue.position_m.unwrap_or_else(|| [rng.gen_range(0.0..side), rng.gen_range(0.0..side)]);
            let nearest = scenario
                .servers
                .iter()
                .map(|s| s.position_m)
                .min_by(|a, b| crate::channel::distance(pos, *a).total_cmp(&crate::channel::distance(pos, *b)))
                .expect("scenario has servers");
            nearest_rate(ue.tx_power_dbm, pos, nearest, scenario)
        })
        .collect::<Result<_, _>>()?;
    let sizes = generate_tasks(scenario, &mut rng);
    Ok(Draw { sizes, rates })
}

fn nearest_rate(tx_dbm: f64, pos: [f64; 2], wap: [f64; 2], scenario: &Scenario) -> Result<f64, DomainError> {
    let d = crate::channel::distance(pos, wap);
    if d >= MIN_DISTANCE_M {
        return uplink_rate_mbps(tx_dbm, pos, wap, &scenario.channel);
    }
    // shift the UE out to the minimum distance along x
    uplink_rate_mbps(tx_dbm, [wap[0] + MIN_DISTANCE_M, wap[1]], wap, &scenario.channel)
}

/// Mutable state of one run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub t: usize,
    /// vms[app]
    pub vms: Vec<Vec<VmState>>,
    pub history: Vec<Vec<RoundOutcome>>,
}

impl SimulationState {
    pub fn new(scenario: &Scenario) -> Self {
        let mut next = vec![0usize; scenario.servers.len()];
        let vms = (0..scenario.apps.len())
            .map(|n| {
                let mut list = Vec::new();
                for (i, server) in scenario.servers.iter().enumerate() {
                    for _ in 0..server.pools[n].vm_count {
                        list.push(VmState::new(VmId::new(i, next[i]), n, server));
                        next[i] += 1;
                    }
                }
                list
            })
            .collect();
        Self { t: 0, vms, history: Vec::new() }
    }

    pub fn bids(&self) -> Vec<f64> {
        self.vms.iter().flatten().map(|v| v.current_bid).collect()
    }
}

#[derive(Default, Clone, Copy)]
struct RepTotals {
    latency_sum: f64,
    tasks: usize,
    missed: usize,
    q_latency: f64,
    q_cost: f64,
    qoe: f64,
}

impl RepTotals {
    fn add(mut self, o: Self) -> Self {
        self.latency_sum += o.latency_sum;
        self.tasks += o.tasks;
        self.missed += o.missed;
        self.q_latency += o.q_latency;
        self.q_cost += o.q_cost;
        self.qoe += o.qoe;
        self
    }
}

pub fn run_simulation(scenario: &Scenario, mechanism: Mechanism, options: SimOptions) -> Result<RunReport, SimError> {
    let mut state = SimulationState::new(scenario);
    let a = &scenario.auction;
    let reps = options.replications.unwrap_or(a.replications).max(1) as usize;
    let capacity = scenario.queue_capacity();
    let mut report = RunReport {
        scenario: scenario.name.clone(),
        mechanism,
        price_rule: options.price_rule,
        epsilon: a.epsilon,
        servers: scenario.servers.len(),
        slots: Vec::new(),
        history: Vec::new(),
        valuations: state.vms.iter().map(|l| l.iter().map(|v| v.valuation).collect()).collect(),
        bid_history: Vec::new(),
        convergence_slot: None,
    };

    for t in 1..=options.horizon {
        state.t = t;
        // θ(t) from the workload left by slot t−1
        for vm in state.vms.iter_mut().flatten() {
            let fmin = scenario.apps[vm.app].min_cpu_freq_ghz;
            vm.refresh_quality(a.slot_seconds, a.gamma_min, a.gamma_max, fmin)
                .map_err(|source| SimError::Model { slot: t, source })?;
        }
        for (n, list) in state.vms.iter_mut().enumerate() {
            let prev = state.history.last().map(|h: &Vec<RoundOutcome>| &h[n]);
            let bids: Vec<f64> = list
                .iter()
                .map(|vm| match mechanism {
                    Mechanism::Vcg => vm.valuation,
                    Mechanism::Gsp => next_bid(scenario.strategies[vm.id.server()], vm, prev),
                })
                .collect();
            for (vm, b) in list.iter_mut().zip(bids) {
                vm.current_bid = b;
            }
        }

        let draws: Vec<Draw> = (0..reps)
            .into_par_iter()
            .map(|r| draw(scenario, a.rng_seed, t, r))
            .collect::<Result<_, _>>()
            .map_err(|source| SimError::Model { slot: t, source })?;

        let mut outcomes = Vec::with_capacity(scenario.apps.len());
        for (n, app) in scenario.apps.iter().enumerate() {
            let tasks = scenario
                .ues
                .iter()
                .enumerate()
                .map(|(j, ue)| {
                    let mean_size = draws.iter().map(|d| d.sizes[n][j].1).sum::<f64>() / reps as f64;
                    let davg = ue.avg_task_size_mb[n];
                    let priority = match a.priority_rule {
                        PriorityRule::SizeOverDeadline => priority_index(davg, app.deadline_ms),
                        PriorityRule::RateWeighted => {
                            let rate = draws.iter().map(|d| d.rates[j]).sum::<f64>() / reps as f64;
                            rate_weighted_priority(rate, app.capacity_req, davg, app.deadline_ms, app.min_cpu_freq_ghz)
                        }
                    }
                    .map_err(|source| SimError::Model { slot: t, source })?;
                    Ok(Task { ue: j as u32, size_mb: mean_size, priority })
                })
                .collect::<Result<Vec<_>, SimError>>()?;
            let queue = TaskQueue::build(n, tasks, capacity);
            let bidders: Vec<Bidder> =
                state.vms[n].iter().map(|vm| Bidder { id: vm.id, quality: vm.quality, bid: vm.current_bid }).collect();
            let outcome = match mechanism {
                Mechanism::Gsp => run_gsp_round(&queue, &bidders, a.epsilon, options.price_rule),
                Mechanism::Vcg => run_vcg_round(&queue, &bidders, &report.valuations[n]),
            }
            .map_err(|source| SimError::Round { slot: t, app: n, source })?;
            outcomes.push(outcome);
        }

        let record = score_slot(scenario, &state, &outcomes, &report.valuations, &draws, t);
        report.slots.push(record);
        report.bid_history.push(state.bids());

        // workload advance
        for (n, outcome) in outcomes.iter().enumerate() {
            let mut assigned = vec![(0.0, None); state.vms[n].len()];
            for (s, vm, _) in outcome.served() {
                let k = state.vms[n].iter().position(|v| v.id == vm).expect("winner is a VM of this app");
                assigned[k] = (outcome.slots[s].size_mb, Some(s));
            }
            for (vm, (mb, slot)) in state.vms[n].iter_mut().zip(assigned) {
                vm.assign(mb, a.slot_seconds);
                vm.last_won_slot = slot;
            }
        }
        state.history.push(outcomes);

        if let Some(extra) = options.stop_after_convergence {
            if let Some(c) = detect_convergence(&report.bid_history, a.convergence_tol) {
                if t >= c + extra {
                    break;
                }
            }
        }
    }
    report.convergence_slot = detect_convergence(&report.bid_history, a.convergence_tol);
    report.history = state.history;
    Ok(report)
}

fn score_slot(
    scenario: &Scenario,
    state: &SimulationState,
    outcomes: &[RoundOutcome],
    valuations: &[Vec<f64>],
    draws: &[Draw],
    t: usize,
) -> SlotRecord {
    let servers = scenario.servers.len();
    let a = &scenario.auction;
    let mut server_utility = vec![0.0; servers];
    let mut margins = Vec::new();
    let mut served = 0;
    let mut unserved = 0;
    let mut price_sum = 0.0;
    for (n, o) in outcomes.iter().enumerate() {
        for (i, u) in analytics::server_utilities(o, &valuations[n], servers).into_iter().enumerate() {
            server_utility[i] += u;
        }
        if let Ok(m) = analytics::profit_margin_ratio(o, &valuations[n]) {
            margins.push((m, o.served_count()));
        }
        served += o.served_count();
        unserved += o.unserved().len() + scenario.ues.len().saturating_sub(o.slots.len());
        price_sum += o.served().map(|(_, _, p)| p).sum::<f64>();
    }

    // (slot, compute rate, backlog seconds) per served task, per app
    let served_tasks: Vec<Vec<(usize, usize, f64, f64, f64)>> = outcomes
        .iter()
        .enumerate()
        .map(|(n, o)| {
            o.served()
                .map(|(s, vm, p)| {
                    let st = state.vms[n].iter().find(|v| v.id == vm).expect("winner exists");
                    let c = st.compute_rate_mb_s;
                    let backlog = (st.last_assigned_mb - c * a.slot_seconds).max(0.0) / c;
                    (o.slots[s].ue as usize, s, c, backlog, p)
                })
                .collect()
        })
        .collect();

    let apps = scenario.apps.len();
    let ues = scenario.ues.len();
    let totals = draws
        .par_iter()
        .map(|d| {
            let mut alphas = vec![Vec::new(); ues];
            let mut spent = vec![0.0; ues];
            let mut any = vec![false; ues];
            let mut tot = RepTotals::default();
            for (n, list) in served_tasks.iter().enumerate() {
                let deadline_s = scenario.apps[n].deadline_ms / 1000.0;
                for &(j, _, c, backlog, p) in list {
                    let size = d.sizes[n][j].1;
                    let delta = analytics::ue_latency(size, d.rates[j], c, backlog).unwrap_or(f64::INFINITY);
                    tot.latency_sum += delta;
                    tot.tasks += 1;
                    if delta > deadline_s {
                        tot.missed += 1;
                    }
                    alphas[j].push(analytics::satisfaction(delta, deadline_s));
                    spent[j] += analytics::task_cost(size, c, p);
                    any[j] = true;
                }
            }
            for j in 0..ues {
                // unserved UEs get nothing
                if !any[j] {
                    continue;
                }
                let Qoe { latency, cost, total, .. } = analytics::ue_qoe(
                    &alphas[j],
                    apps,
                    spent[j],
                    scenario.ues[j].budget,
                    (a.qoe_latency_weight, a.qoe_cost_weight),
                )
                .expect("budgets validated positive");
                tot.q_latency += latency;
                tot.q_cost += cost;
                tot.qoe += total;
            }
            tot
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(RepTotals::default(), RepTotals::add);

    let reps = draws.len().max(1) as f64;
    let per_ue = (reps * ues.max(1) as f64).recip();
    let qoe_sum = totals.qoe / reps;
    let mean_bid = (0..servers)
        .map(|i| {
            let bids: Vec<f64> = state.vms.iter().flatten().filter(|v| v.id.server() == i).map(|v| v.current_bid).collect();
            if bids.is_empty() {
                0.0
            } else {
                bids.iter().sum::<f64>() / bids.len() as f64
            }
        })
        .collect();
    let margin_weight: usize = margins.iter().map(|m| m.1).sum();
    SlotRecord {
        slot: t,
        mean_bid,
        mean_price: (served > 0).then(|| price_sum / served as f64),
        margin_pct: (margin_weight > 0).then(|| margins.iter().map(|(m, k)| m * *k as f64).sum::<f64>() / margin_weight as f64),
        social_welfare: analytics::social_welfare(&server_utility, &[qoe_sum]),
        server_utility,
        served,
        unserved,
        mean_latency_s: if totals.tasks == 0 { 0.0 } else { totals.latency_sum / totals.tasks as f64 },
        deadline_miss_rate: if totals.tasks == 0 { 0.0 } else { totals.missed as f64 / totals.tasks as f64 },
        mean_q_latency: totals.q_latency * per_ue,
        mean_q_cost: totals.q_cost * per_ue,
        mean_qoe: totals.qoe * per_ue,
    }
}

/// Re-run a recorded GSP round from its stored inputs.
pub fn replay_round(outcome: &RoundOutcome, epsilon: f64, rule: PriceRule) -> Result<RoundOutcome, crate::error::GspError> {
    let queue = TaskQueue { app: outcome.app, capacity: outcome.slots.len(), slots: outcome.slots.clone(), rejected: Vec::new() };
    run_gsp_round(&queue, &outcome.bids, epsilon, rule)
}

/// Every server uses `kind`.
pub fn with_uniform_strategy(scenario: &Scenario, kind: StrategyKind) -> Scenario {
    scenario.clone().with_strategy(kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::builtin_preset;

    #[test]
    fn convergence_examples() {
        assert_eq!(detect_convergence(&[vec![1.0], vec![1.0], vec![1.0]], 1e-4), Some(2));
        assert_eq!(detect_convergence(&[vec![1.0], vec![2.0], vec![1.0], vec![2.0]], 0.0), None);
        assert_eq!(detect_convergence(&[vec![1.0], vec![2.0], vec![2.0], vec![2.0]], 1e-4), Some(3));
        assert_eq!(detect_convergence(&[vec![1.0]], 1e-4), None);
        assert_eq!(detect_convergence(&[vec![1.0], vec![1.0], vec![3.0]], 1e-4), None);
    }

    #[test]
    fn static_tasks_use_fixed_size() {
        let mut s = builtin_preset("fig5_case3").unwrap();
        s.ues.truncate(3);
        s.task_model = TaskModel::Static { size_mb: Some(20.0) };
        let tasks = generate_tasks(&s, &mut draw_rng(1, 1, 0));
        assert_eq!(tasks[0].iter().map(|t| t.1).collect::<Vec<_>>(), vec![20.0; 3]);
    }

    #[test]
    fn poisson_mean() {
        let mut rng = draw_rng(3, 0, 0);
        let n = 100_000;
        let mean = (0..n).map(|_| draw_poisson(25.0, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 25.0).abs() < 0.25, "{mean}");
    }

    #[test]
    fn zero_horizon_is_empty() {
        let s = builtin_preset("fig5_case3").unwrap();
        let r = run_simulation(&s, Mechanism::Gsp, SimOptions::horizon(0)).unwrap();
        assert!(r.is_empty());
        assert_eq!(r.convergence_slot, None);
    }

    #[test]
    fn runs_are_deterministic() {
        let s = builtin_preset("fig5_case3").unwrap();
        let opts = SimOptions { replications: Some(8), ..SimOptions::horizon(6) };
        let a = run_simulation(&s, Mechanism::Gsp, opts).unwrap();
        let b = run_simulation(&s, Mechanism::Gsp, opts).unwrap();
        assert_eq!(a, b);
    }
}
