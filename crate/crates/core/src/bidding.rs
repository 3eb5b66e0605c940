//! Seller bid updates between rounds.
//!
//! Every rule is myopic: it reads the previous round's outcome and the VM's
//! own state, never the current bids of other sellers.

use thiserror::Error;

use crate::gsp::RoundOutcome;
use crate::scenario::StrategyKind;
use crate::workload::VmState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum BiddingError {
    #[error("quality score is zero; bid left at valuation")]
    DegenerateQuality,
}

/// Price slot `s` paid last round, restated for this VM's quality: the
/// occupant was paid θ_occ·(b_next/θ_next), so a VM of quality θ would have
/// been paid θ/θ_occ times as much. The incumbent sees its own price.
pub fn seen_price(prev: &RoundOutcome, slot: usize, vm: &VmState) -> Option<f64> {
    let price = prev.prices[slot]?;
    let occupant = prev.winners[slot].and_then(|id| prev.bidder(id));
    Some(match occupant {
        Some(o) if o.id != vm.id && o.quality > 0.0 => price * vm.prev_quality / o.quality,
        _ => price,
    })
}

/// Slot maximizing λ_s·θ·(p_s − v) over served slots. `restricted` limits
/// the search to the slot won last round and below; a VM that won nothing
/// searches every slot. Ties go to the lowest index.
pub fn rbb_target_slot(prev: &RoundOutcome, vm: &VmState, restricted: bool) -> Option<usize> {
    let start = if restricted { prev.slot_of(vm.id).unwrap_or(0) } else { 0 };
    let mut best: Option<(usize, f64)> = None;
    for s in start..prev.slots.len() {
        let Some(price) = seen_price(prev, s, vm) else { continue };
        let payoff = prev.slots[s].priority * vm.quality * (price - vm.valuation);
        // ties within rounding keep the earlier slot
        if best.map_or(true, |(_, b)| payoff - b > 1e-12 * b.abs().max(payoff.abs())) {
            best = Some((s, payoff));
        }
    }
    best.map(|(s, _)| s)
}

/// b = v + Π·(p_{s*} − v) with Π = λ_{s*}·θ_prev / (λ_{s*−1}·θ_now) and λ₀ = 2λ₁.
pub fn rbb_bid(
    valuation: f64,
    target: usize,
    price: f64,
    prev: &RoundOutcome,
    theta_prev: f64,
    theta_now: f64,
) -> Result<f64, BiddingError> {
    if !(theta_now > 0.0) {
        return Err(BiddingError::DegenerateQuality);
    }
    let lambda = prev.slots[target].priority;
    let lambda_above = if target == 0 { 2.0 * lambda } else { prev.slots[target - 1].priority };
    let pi = if lambda_above > 0.0 { lambda * theta_prev / (lambda_above * theta_now) } else { 0.0 };
    Ok(valuation + pi * (price - valuation))
}

/// New bid for one VM. Round 1 (no previous outcome) bids the valuation.
pub fn next_bid(strategy: StrategyKind, vm: &VmState, prev: Option<&RoundOutcome>) -> f64 {
    let v = vm.valuation;
    let Some(prev) = prev else { return v };
    match strategy {
        StrategyKind::Truthful => v,
        StrategyKind::Rbb | StrategyKind::Bb => {
            let restricted = strategy == StrategyKind::Rbb;
            match rbb_target_slot(prev, vm, restricted) {
                None => vm.current_bid,
                Some(s) => match rbb_bid(v, s, seen_price(prev, s, vm).unwrap_or(v), prev, vm.prev_quality, vm.quality) {
                    Ok(b) => b.max(v),
                    Err(BiddingError::DegenerateQuality) => v,
                },
            }
        }
        StrategyKind::Ab { margin } => match rbb_target_slot(prev, vm, false) {
            None => vm.current_bid,
            Some(s) => ((1.0 - margin) * seen_price(prev, s, vm).unwrap_or(v)).max(v),
        },
        StrategyKind::Cb { margin } => match rbb_target_slot(prev, vm, false) {
            None => vm.current_bid,
            Some(s) => (seen_price(prev, s, vm).unwrap_or(v) + margin).max(v),
        },
    }
}

/// Bids for every VM of one server in one application queue.
pub fn update_bids(strategy: StrategyKind, vms: &[VmState], prev: Option<&RoundOutcome>) -> Vec<f64> {
    vms.iter().map(|vm| next_bid(strategy, vm, prev)).collect()
}
