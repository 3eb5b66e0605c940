//! Utilities, QoE, welfare, margins, and the IR / SNE checkers.
//!
//! Units: task sizes in MB, link rates in Mbps (8 Mb per MB), compute rates
//! in MB/s, prices in $/VM-hour with compute time billed in hours.

use std::collections::HashMap;

use crate::error::{AnalyticsError, DomainError};
use crate::gsp::RoundOutcome;
use crate::workload::VmId;

pub const BITS_PER_BYTE: f64 = 8.0;
pub const SECONDS_PER_HOUR: f64 = 3600.0;

/// λ·θ·(p − v) for one won slot.
pub fn vm_utility(priority: f64, quality: f64, price: f64, valuation: f64) -> f64 {
    priority * quality * (price - valuation)
}

fn valuation_map(outcome: &RoundOutcome, valuations: &[f64]) -> HashMap<VmId, f64> {
    assert_eq!(outcome.bids.len(), valuations.len(), "one valuation per submitted bid");
    outcome.bids.iter().zip(valuations).map(|(b, &v)| (b.id, v)).collect()
}

/// Utility of every bidder, parallel to `outcome.bids`. `valuations` is
/// parallel to `outcome.bids` as well.
pub fn vm_utilities(outcome: &RoundOutcome, valuations: &[f64]) -> Vec<f64> {
    let index: HashMap<VmId, usize> = outcome.bids.iter().enumerate().map(|(k, b)| (b.id, k)).collect();
    let mut u = vec![0.0; outcome.bids.len()];
    for (s, vm, p) in outcome.served() {
        let k = index[&vm];
        u[k] += vm_utility(outcome.slots[s].priority, outcome.bids[k].quality, p, valuations[k]);
    }
    u
}

/// Σ of VM utilities per server index.
pub fn server_utilities(outcome: &RoundOutcome, valuations: &[f64], servers: usize) -> Vec<f64> {
    let mut total = vec![0.0; servers];
    for (b, u) in outcome.bids.iter().zip(vm_utilities(outcome, valuations)) {
        total[b.id.server()] += u;
    }
    total
}

/// Upload + wait + compute, in seconds.
pub fn ue_latency(size_mb: f64, rate_mbps: f64, compute_rate_mb_s: f64, wait_s: f64) -> Result<f64, DomainError> {
    if !(rate_mbps > 0.0) {
        return Err(DomainError::new("ue_latency", format!("uplink rate {rate_mbps} Mbps")));
    }
    if !(compute_rate_mb_s > 0.0) {
        return Err(DomainError::new("ue_latency", format!("compute rate {compute_rate_mb_s} MB/s")));
    }
    Ok(size_mb * BITS_PER_BYTE / rate_mbps + wait_s + size_mb / compute_rate_mb_s)
}

/// Compute time of the tasks ahead: Σ d/C over the given (size, rate) pairs.
pub fn wait_time(ahead: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    ahead.into_iter().map(|(d, c)| d / c).sum()
}

/// α = |τ − δ|/τ for 0 < δ ≤ τ, else 0.
pub fn satisfaction(latency_s: f64, deadline_s: f64) -> f64 {
    if latency_s > 0.0 && latency_s <= deadline_s {
        (deadline_s - latency_s).abs() / deadline_s
    } else {
        0.0
    }
}

/// Payment for one task: compute hours times the price.
pub fn task_cost(size_mb: f64, compute_rate_mb_s: f64, price: f64) -> f64 {
    size_mb / compute_rate_mb_s / SECONDS_PER_HOUR * price
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Qoe {
    pub latency: f64,
    pub cost: f64,
    pub total: f64,
    /// Spending exceeded the budget and the cost term was clamped.
    pub over_budget: bool,
}

/// QoE of one UE from its per-app satisfactions (0 for unserved apps), its
/// spending and its budget.
pub fn ue_qoe(alphas: &[f64], apps: usize, spent: f64, budget: f64, weights: (f64, f64)) -> Result<Qoe, DomainError> {
    if !(budget > 0.0) {
        return Err(DomainError::new("ue_qoe", format!("budget {budget}")));
    }
    if apps == 0 {
        return Err(DomainError::new("ue_qoe", "no applications"));
    }
    let latency = (alphas.iter().sum::<f64>() / apps as f64).clamp(0.0, 1.0);
    let raw = ((budget - spent) / budget).abs();
    let over_budget = spent > budget;
    let cost = if over_budget { 0.0 } else { raw.min(1.0) };
    Ok(Qoe { latency, cost, total: weights.0 * latency + weights.1 * cost, over_budget })
}

/// Composite SW: server profits plus UE QoE.
pub fn social_welfare(server_utilities: &[f64], qoe: &[f64]) -> f64 {
    server_utilities.iter().sum::<f64>() + qoe.iter().sum::<f64>()
}

/// Mean over winners of 100·(p − v)/p.
pub fn profit_margin_ratio(outcome: &RoundOutcome, valuations: &[f64]) -> Result<f64, AnalyticsError> {
    let v = valuation_map(outcome, valuations);
    let margins: Vec<f64> = outcome.served().map(|(_, vm, p)| 100.0 * (p - v[&vm]) / p).collect();
    if margins.is_empty() {
        return Err(AnalyticsError::NoAllocations);
    }
    Ok(margins.iter().sum::<f64>() / margins.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IrReport {
    /// (slot, VM, utility) for every allocation with negative utility.
    pub violations: Vec<(usize, VmId, f64)>,
}

impl IrReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const IR_TOLERANCE: f64 = 1e-12;

pub fn check_ir(outcome: &RoundOutcome, valuations: &[f64]) -> IrReport {
    let v = valuation_map(outcome, valuations);
    let q: HashMap<VmId, f64> = outcome.bids.iter().map(|b| (b.id, b.quality)).collect();
    let violations = outcome
        .served()
        .filter_map(|(s, vm, p)| {
            let u = vm_utility(outcome.slots[s].priority, q[&vm], p, v[&vm]);
            (u < -IR_TOLERANCE).then_some((s, vm, u))
        })
        .collect();
    IrReport { violations }
}

pub const SNE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BidBounds {
    pub slot: usize,
    pub lower: f64,
    pub upper: f64,
    pub bid: f64,
}

impl BidBounds {
    pub fn contains(&self, tol: f64) -> bool {
        self.bid >= self.lower - tol && self.bid <= self.upper + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SneReport {
    /// Smallest λ_s(p_s − v_{r_s}) − λ_{s'}(p̃_{s'} − v_{r_s}) over served pairs, with
    /// p̃ the other slot's price restated for r_s (see [`restated_price`]).
    pub min_residual: f64,
    /// The pair (s, s') attaining it.
    pub worst_pair: Option<(usize, usize)>,
    /// Residuals of adjacent pairs: (s, s+1) seen from r_s and (s+1, s)
    /// seen from r_{s+1}.
    pub adjacent: Vec<(f64, f64)>,
    pub bounds: Vec<BidBounds>,
}

impl SneReport {
    pub fn equilibrium(&self) -> bool {
        self.min_residual >= -SNE_TOLERANCE
    }

    pub fn bids_within_bounds(&self) -> bool {
        self.bounds.iter().all(|b| b.contains(SNE_TOLERANCE))
    }

    pub fn passed(&self) -> bool {
        self.equilibrium() && self.bids_within_bounds()
    }
}

/// Pairwise equilibrium inequalities over served slots, plus the bid bounds.
pub fn check_sne(outcome: &RoundOutcome, valuations: &[f64]) -> SneReport {
    let v = valuation_map(outcome, valuations);
    let served: Vec<(usize, VmId, f64)> = outcome.served().collect();
    // payoff of `vm` at slot `s`, per unit of its own quality
    let payoff = |vm: VmId, s: usize, p: f64, occupant: VmId| {
        outcome.slots[s].priority * (restated_price(outcome, p, occupant, vm) - v[&vm])
    };

    let mut min_residual = f64::INFINITY;
    let mut worst_pair = None;
    for &(s, vm, p) in &served {
        let here = payoff(vm, s, p, vm);
        for &(s2, occ, p2) in &served {
            if s2 == s {
                continue;
            }
            let r = here - payoff(vm, s2, p2, occ);
            if r < min_residual {
                min_residual = r;
                worst_pair = Some((s, s2));
            }
        }
    }
    if worst_pair.is_none() {
        min_residual = 0.0;
    }
    let adjacent = served
        .windows(2)
        .map(|w| {
            let ((s0, a, p0), (s1, b, p1)) = (w[0], w[1]);
            (payoff(a, s0, p0, a) - payoff(a, s1, p1, b), payoff(b, s1, p1, b) - payoff(b, s0, p0, a))
        })
        .collect();
    SneReport { min_residual, worst_pair, adjacent, bounds: sne_bid_bounds(outcome, valuations) }
}

/// Price `p` paid to `occupant`, restated for `vm`: the winner of a slot is
/// paid in proportion to its quality, so `vm` would have received
/// θ_vm/θ_occupant·p there.
pub fn restated_price(outcome: &RoundOutcome, p: f64, occupant: VmId, vm: VmId) -> f64 {
    if occupant == vm {
        return p;
    }
    match (outcome.bidder(occupant), outcome.bidder(vm)) {
        (Some(o), Some(x)) if o.quality > 0.0 => p * x.quality / o.quality,
        _ => p,
    }
}

/// Break-even bid bounds for every slot s whose neighbours s−1 and s+1 are
/// served, with λ* = λ_s/λ_{s−1} and Θ the own-rank quality ratios:
///
/// b_UB = v_s/Θ_{s−1} + λ*·Θ_s/Θ_{s−1}·(b_{s+1} − v_s)
/// b_LB = v_{s−1}/Θ_{s−1} + λ*·Θ_s/Θ_{s−1}·(b_{s+1} − v_{s−1})
pub fn sne_bid_bounds(outcome: &RoundOutcome, valuations: &[f64]) -> Vec<BidBounds> {
    let v = valuation_map(outcome, valuations);
    let mut out = Vec::new();
    for s in 1..outcome.winners.len().saturating_sub(1) {
        let (Some(a), Some(b), Some(c)) = (outcome.winners[s - 1], outcome.winners[s], outcome.winners[s + 1]) else {
            continue;
        };
        let (Some(ba), Some(bb), Some(bc)) = (outcome.bidder(a), outcome.bidder(b), outcome.bidder(c)) else {
            continue;
        };
        if !(bb.quality > 0.0 && bc.quality > 0.0) {
            continue;
        }
        let theta_above = ba.quality / bb.quality;
        let theta_here = bb.quality / bc.quality;
        let lambda_star = outcome.slots[s].priority / outcome.slots[s - 1].priority;
        let k = lambda_star * theta_here / theta_above;
        let upper = v[&b] / theta_above + k * (bc.bid - v[&b]);
        let lower = v[&a] / theta_above + k * (bc.bid - v[&a]);
        out.push(BidBounds { slot: s, lower, upper, bid: bb.bid });
    }
    out
}

/// VMs that could strictly gain by taking another served slot's (λ, p)
/// instead of their own: (VM, own slot, better slot).
pub fn profitable_swaps(outcome: &RoundOutcome, valuations: &[f64], tol: f64) -> Vec<(VmId, usize, usize)> {
    let v = valuation_map(outcome, valuations);
    let served: Vec<(usize, VmId, f64)> = outcome.served().collect();
    let mut out = Vec::new();
    for &(s, vm, p) in &served {
        let here = outcome.slots[s].priority * (p - v[&vm]);
        for &(s2, occ, p2) in &served {
            let there = outcome.slots[s2].priority * (restated_price(outcome, p2, occ, vm) - v[&vm]);
            if s2 != s && there > here + tol {
                out.push((vm, s, s2));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gsp::{Bidder, Task};

    fn vm(server: usize, index: usize) -> VmId {
        VmId::new(server, index)
    }

    fn outcome(priorities: &[f64], bidders: &[(VmId, f64, f64)], prices: &[f64]) -> RoundOutcome {
        RoundOutcome {
            app: 0,
            slots: priorities.iter().enumerate().map(|(j, &p)| Task { ue: j as u32, size_mb: 10.0, priority: p }).collect(),
            winners: (0..priorities.len()).map(|s| bidders.get(s).map(|b| b.0)).collect(),
            prices: (0..priorities.len()).map(|s| prices.get(s).copied()).collect(),
            ranked: vec![],
            price_adjustment: vec![],
            bids: bidders.iter().map(|&(id, quality, bid)| Bidder { id, quality, bid }).collect(),
        }
    }

    #[test]
    fn utility_examples() {
        assert!((vm_utility(0.5, 2.0, 0.05, 0.04) - 0.01).abs() < 1e-15);
        let o = outcome(&[0.3], &[(vm(0, 0), 1.0, 0.04), (vm(1, 0), 1.0, 0.05)], &[0.05]);
        let u = vm_utilities(&o, &[0.04, 0.05]);
        assert!((u[0] - 0.003).abs() < 1e-15);
        assert_eq!(u[1], 0.0);
        let o = outcome(&[0.3], &[(vm(0, 0), 1.0, 0.04)], &[0.04]);
        assert_eq!(server_utilities(&o, &[0.04], 1), vec![0.0]);
    }

    #[test]
    fn latency_and_satisfaction() {
        // 10 MB at 80 Mbps uploads in 1 s; 32 MB/s computes in 0.3125 s
        let d = ue_latency(10.0, 80.0, 32.0, 0.0).unwrap();
        assert!((d - 1.3125).abs() < 1e-12);
        assert!(ue_latency(10.0, 0.0, 32.0, 0.0).is_err());
        assert_eq!(wait_time([(10.0, 20.0), (10.0, 20.0)]), 1.0);
        assert_eq!(satisfaction(0.2, 0.2), 0.0);
        assert!((satisfaction(0.1, 0.2) - 0.5).abs() < 1e-15);
        assert_eq!(satisfaction(0.3, 0.2), 0.0);
    }

    #[test]
    fn qoe_examples() {
        let q = ue_qoe(&[], 1, 0.0, 20.0, (0.5, 0.5)).unwrap();
        assert_eq!((q.latency, q.cost, q.total), (0.0, 1.0, 0.5));
        let q = ue_qoe(&[0.5], 1, 10.0, 20.0, (0.5, 0.5)).unwrap();
        assert!((q.total - 0.5).abs() < 1e-15);
        let q = ue_qoe(&[1.0], 1, 30.0, 20.0, (0.5, 0.5)).unwrap();
        assert!(q.over_budget);
        assert_eq!(q.cost, 0.0);
        assert!(ue_qoe(&[], 1, 0.0, 0.0, (0.5, 0.5)).is_err());
    }

    #[test]
    fn margin_examples() {
        let o = outcome(&[0.3], &[(vm(0, 0), 1.0, 0.038)], &[0.04]);
        assert!((profit_margin_ratio(&o, &[0.038]).unwrap() - 5.0).abs() < 1e-12);
        let o = outcome(&[0.3], &[(vm(0, 0), 1.0, 0.04)], &[0.04]);
        assert_eq!(profit_margin_ratio(&o, &[0.04]).unwrap(), 0.0);
        let o = outcome(&[], &[(vm(0, 0), 1.0, 0.04)], &[]);
        assert_eq!(profit_margin_ratio(&o, &[0.04]), Err(AnalyticsError::NoAllocations));
    }

    #[test]
    fn ir_checker() {
        let o = outcome(&[0.3], &[(vm(0, 0), 1.0, 0.03)], &[0.031]);
        assert!(check_ir(&o, &[0.0305]).passed());
        let r = check_ir(&o, &[0.04]);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].1, vm(0, 0));
    }

    #[test]
    fn sne_checker() {
        let one = outcome(&[0.3], &[(vm(0, 0), 1.0, 0.04)], &[0.05]);
        assert!(check_sne(&one, &[0.04]).passed());
        // equal priorities, equal prices: indifferent
        let o = outcome(&[0.2, 0.2], &[(vm(0, 0), 1.0, 0.04), (vm(0, 1), 1.0, 0.04)], &[0.04, 0.041]);
        let r = check_sne(&o, &[0.04, 0.04]);
        assert!(!r.equilibrium());
        assert_eq!(r.worst_pair, Some((0, 1)));
        let o = outcome(&[0.3, 0.2], &[(vm(0, 0), 1.0, 0.04), (vm(0, 1), 1.0, 0.05)], &[0.05, 0.054]);
        assert!(check_sne(&o, &[0.04, 0.045]).equilibrium());
    }

    #[test]
    fn bounds_collapse_for_symmetric_inputs() {
        let v = 0.04;
        let bidders = [(vm(0, 0), 1.0, 0.045), (vm(0, 1), 1.0, 0.05), (vm(0, 2), 1.0, 0.06)];
        let o = outcome(&[0.2, 0.2, 0.2], &bidders, &[0.05, 0.06, 0.061]);
        let b = sne_bid_bounds(&o, &[v; 3]);
        assert_eq!(b.len(), 1);
        assert!((b[0].lower - 0.06).abs() < 1e-15 && (b[0].upper - 0.06).abs() < 1e-15);
        // λ* = 0 leaves only the valuation terms
        let o = outcome(&[0.2, 0.0, 0.2], &bidders, &[0.05, 0.06, 0.061]);
        let b = sne_bid_bounds(&o, &[0.03, 0.04, 0.05]);
        assert_eq!((b[0].lower, b[0].upper), (0.03, 0.04));
    }
}
