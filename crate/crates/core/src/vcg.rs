//! Exact winner determination and Clarke-pivot payments under truthful bids.

use crate::error::GspError;
use crate::gsp::{rank_bidders, Bidder, RankedVm, RoundOutcome, TaskQueue};
use crate::matching::{max_weight_matching, Assignment};

/// z[s][r] = λ_s·θ_r / b_r, row-major over slots × VMs.
#[derive(Debug, Clone, PartialEq)]
pub struct WdpInstance {
    pub slots: usize,
    pub vms: usize,
    pub z: Vec<f64>,
}

impl WdpInstance {
    pub fn new(slots: usize, vms: usize, z: Vec<f64>) -> Self {
        assert_eq!(z.len(), slots * vms, "z must be slots × vms");
        assert!(z.iter().all(|w| w.is_finite() && *w >= 0.0), "z must be finite and non-negative");
        Self { slots, vms, z }
    }

    pub fn from_round(queue: &TaskQueue, bidders: &[Bidder]) -> Self {
        let z = queue
            .slots
            .iter()
            .flat_map(|t| bidders.iter().map(move |b| t.priority * b.quality / b.bid))
            .collect();
        Self::new(queue.len(), bidders.len(), z)
    }

    #[inline]
    pub fn at(&self, slot: usize, vm: usize) -> f64 {
        self.z[slot * self.vms + vm]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WdpSolution {
    /// VM index per slot.
    pub assignment: Vec<Option<usize>>,
    pub value: f64,
}

/// A pivot whose incremental value disagrees with a full re-solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionWarning {
    pub slot: usize,
    pub incremental: f64,
    pub resolved: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VcgPricing {
    pub prices: Vec<Option<f64>>,
    pub warnings: Vec<PrecisionWarning>,
}

pub fn solve_wdp_exact(inst: &WdpInstance) -> WdpSolution {
    let (assignment, value) = max_weight_matching(&inst.z, inst.slots, inst.vms);
    WdpSolution { assignment, value }
}

/// Clarke pivot per winner, mapped back to $/VM-hour.
///
/// With W* the optimum and W₋ᵣ the optimum without VM r, VM r keeps slot s
/// for any weight above z_crit = W₋ᵣ − (W* − z_sr). Since z ∝ 1/b, the
/// largest winning bid is b_r·z_sr/z_crit. Without competition (z_crit = 0)
/// the payment is the valuation; it is never below the valuation.
pub fn vcg_prices(inst: &WdpInstance, sol: &WdpSolution, valuations: &[f64], bids: &[f64], verify: bool) -> VcgPricing {
    let mut prices = vec![None; inst.slots];
    let mut warnings = Vec::new();
    if inst.slots == 0 || inst.vms == 0 {
        return VcgPricing { prices, warnings };
    }
    let solved = Assignment::maximize(&inst.z, inst.slots, inst.vms);
    let scale = sol.value.abs().max(1.0);
    for (s, r) in sol.assignment.iter().enumerate() {
        let Some(r) = *r else { continue };
        let without = solved.value_without_col(r);
        if verify {
            let mut reduced = inst.z.clone();
            for row in 0..inst.slots {
                reduced[row * inst.vms + r] = 0.0;
            }
            let resolved = max_weight_matching(&reduced, inst.slots, inst.vms).1;
            if (resolved - without).abs() > 1e-9 {
                warnings.push(PrecisionWarning { slot: s, incremental: without, resolved });
            }
        }
        let z_sr = inst.at(s, r);
        let z_crit = without - (sol.value - z_sr);
        let v = valuations[r];
        let price = if z_crit <= 1e-12 * scale { v } else { (bids[r] * z_sr / z_crit).max(v) };
        prices[s] = Some(price);
    }
    VcgPricing { prices, warnings }
}

/// VCG round over the same inputs as a GSP round. Bids are taken as
/// reported valuations.
pub fn run_vcg_round(queue: &TaskQueue, bidders: &[Bidder], valuations: &[f64]) -> Result<RoundOutcome, GspError> {
    let mut out = RoundOutcome::empty(queue, bidders);
    out.ranked = rank_bidders(bidders)?.into_iter().map(|(b, y)| RankedVm { id: b.id, score: y }).collect();
    if queue.is_empty() || bidders.is_empty() {
        return Ok(out);
    }
    let inst = WdpInstance::from_round(queue, bidders);
    let sol = solve_wdp_exact(&inst);
    let bids: Vec<f64> = bidders.iter().map(|b| b.bid).collect();
    let pricing = vcg_prices(&inst, &sol, valuations, &bids, false);
    for (s, r) in sol.assignment.iter().enumerate() {
        out.winners[s] = r.map(|r| bidders[r].id);
    }
    out.prices = pricing.prices;
    Ok(out)
}
