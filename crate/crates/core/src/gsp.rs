//! One GSP round: order tasks by priority, rank VMs by θ/b, match position
//! by position, and price each winner off the next-ranked bid.

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, GspError};
use crate::workload::VmId;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Task {
    pub ue: u32,
    pub size_mb: f64,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskQueue {
    pub app: usize,
    pub capacity: usize,
    /// Sorted by priority, highest first; at most `capacity` entries.
    pub slots: Vec<Task>,
    /// Tasks that did not fit in the queue this slot.
    pub rejected: Vec<Task>,
}

impl TaskQueue {
    pub fn build(app: usize, mut tasks: Vec<Task>, capacity: usize) -> Self {
        tasks.sort_by(|a, b| b.priority.total_cmp(&a.priority).then(a.ue.cmp(&b.ue)));
        let rejected = if tasks.len() > capacity { tasks.split_off(capacity) } else { Vec::new() };
        Self { app, capacity, slots: tasks, rejected }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }
}

/// A VM's sealed input to a round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bidder {
    pub id: VmId,
    pub quality: f64,
    pub bid: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankedVm {
    pub id: VmId,
    pub score: f64,
}

/// Which adjustment rate multiplies the next-ranked bid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriceRule {
    /// Θ of the winner's own rank: θ_s/θ_{s+1}. This is the highest bid at
    /// which the winner keeps its rank.
    #[default]
    Rank,
    /// The s-th entry of the descending-sorted Θ vector.
    Sorted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub app: usize,
    pub slots: Vec<Task>,
    pub winners: Vec<Option<VmId>>,
    pub prices: Vec<Option<f64>>,
    pub ranked: Vec<RankedVm>,
    /// Rate applied at each rank: θ_m/θ_{m+1} under `Rank`, the
    /// descending-sorted rates under `Sorted`.
    pub price_adjustment: Vec<f64>,
    /// Inputs in the order they were submitted.
    pub bids: Vec<Bidder>,
}

impl RoundOutcome {
    pub fn empty(queue: &TaskQueue, bids: &[Bidder]) -> Self {
        Self {
            app: queue.app,
            slots: queue.slots.clone(),
            winners: vec![None; queue.len()],
            prices: vec![None; queue.len()],
            ranked: Vec::new(),
            price_adjustment: Vec::new(),
            bids: bids.to_vec(),
        }
    }

    pub fn served_count(&self) -> usize {
        self.winners.iter().filter(|w| w.is_some()).count()
    }

    pub fn unserved(&self) -> Vec<usize> {
        (0..self.winners.len()).filter(|&s| self.winners[s].is_none()).collect()
    }

    pub fn slot_of(&self, vm: VmId) -> Option<usize> {
        self.winners.iter().position(|w| *w == Some(vm))
    }

    /// x_{s,r}
    pub fn assigned(&self, slot: usize, vm: VmId) -> bool {
        self.winners.get(slot).copied().flatten() == Some(vm)
    }

    pub fn bidder(&self, vm: VmId) -> Option<&Bidder> {
        self.bids.iter().find(|b| b.id == vm)
    }

    /// (slot, winner, price) for every served slot.
    pub fn served(&self) -> impl Iterator<Item = (usize, VmId, f64)> + '_ {
        self.winners
            .iter()
            .zip(&self.prices)
            .enumerate()
            .filter_map(|(s, (w, p))| Some((s, (*w)?, (*p)?)))
    }

    pub fn mean_price(&self) -> Option<f64> {
        let (n, sum) = self.served().fold((0usize, 0.0), |(n, sum), (_, _, p)| (n + 1, sum + p));
        (n > 0).then(|| sum / n as f64)
    }
}

pub fn priority_index(avg_task_mb: f64, deadline_ms: f64) -> Result<f64, DomainError> {
    if !(deadline_ms > 0.0) {
        return Err(DomainError::new("priority_index", format!("deadline {deadline_ms} ms")));
    }
    Ok(avg_task_mb / deadline_ms)
}

/// λ = γ̂·β / (d̄·τ_max·f_min)
pub fn rate_weighted_priority(
    rate_mbps: f64,
    capacity_req: f64,
    avg_task_mb: f64,
    deadline_ms: f64,
    min_freq_ghz: f64,
) -> Result<f64, DomainError> {
    let denom = avg_task_mb * deadline_ms * min_freq_ghz;
    if !(denom > 0.0) {
        return Err(DomainError::new("rate_weighted_priority", "size, deadline and frequency must be > 0"));
    }
    Ok(rate_mbps * capacity_req / denom)
}

pub fn ranking_score(quality: f64, bid: f64) -> Result<f64, DomainError> {
    if !(bid > 0.0) || !bid.is_finite() {
        return Err(DomainError::new("ranking_score", format!("bid {bid}")));
    }
    Ok(quality / bid)
}

/// Θ_m = θ_m / θ_{m+1} over a ranked list, sorted descending.
pub fn price_adjustment_rates(ranked_quality: &[f64]) -> Result<Vec<f64>, GspError> {
    let mut rates = ranked_quality.windows(2).enumerate().map(|(m, w)| ratio(m, w[0], w[1])).collect::<Result<Vec<_>, _>>()?;
    rates.sort_unstable_by(|a, b| b.total_cmp(a));
    Ok(rates)
}

fn ratio(rank: usize, upper: f64, lower: f64) -> Result<f64, GspError> {
    if lower == 0.0 {
        Err(GspError::DivisionByZero { rank: rank + 2 })
    } else {
        Ok(upper / lower)
    }
}

/// (score, input index) in rank order.
fn rank_order(bidders: &[Bidder]) -> Result<Vec<(f64, usize)>, GspError> {
    let mut keys = Vec::with_capacity(bidders.len());
    for (k, b) in bidders.iter().enumerate() {
        if !(b.quality >= 0.0) || !b.quality.is_finite() {
            return Err(DomainError::new("run_gsp_round", format!("quality {} for {:?}", b.quality, b.id)).into());
        }
        keys.push((ranking_score(b.quality, b.bid)?, k));
    }
    // sort small (score, index) pairs; the ids are only read on ties
    keys.sort_unstable_by(|(ya, a), (yb, b)| yb.total_cmp(ya).then_with(|| bidders[*a].id.cmp(&bidders[*b].id)));
    Ok(keys)
}

/// Rank bidders: positive quality by θ/b descending, then zero quality;
/// ties by VM id.
pub fn rank_bidders(bidders: &[Bidder]) -> Result<Vec<(Bidder, f64)>, GspError> {
    Ok(rank_order(bidders)?.into_iter().map(|(y, k)| (bidders[k], y)).collect())
}

pub fn run_gsp_round(queue: &TaskQueue, bidders: &[Bidder], epsilon: f64, rule: PriceRule) -> Result<RoundOutcome, GspError> {
    let mut out = RoundOutcome::empty(queue, bidders);
    let order = rank_order(bidders)?;
    out.ranked = order.iter().map(|&(y, k)| RankedVm { id: bidders[k].id, score: y }).collect();
    if queue.is_empty() || order.is_empty() {
        return Ok(out);
    }

    let at = |s: usize| &bidders[order[s].1];
    let positive = order.iter().take_while(|&&(_, k)| bidders[k].quality > 0.0).count();
    let mut rates = Vec::with_capacity(positive.saturating_sub(1));
    for m in 1..positive {
        rates.push(ratio(m - 1, at(m - 1).quality, at(m).quality)?);
    }
    if rule == PriceRule::Sorted {
        rates.sort_unstable_by(|a, b| b.total_cmp(a));
    }

    let served = queue.len().min(order.len());
    for s in 0..served {
        let winner = at(s);
        // rates has one entry per rank with a positive-quality successor
        let price = match rates.get(s) {
            Some(rate) => rate * at(s + 1).bid,
            None => winner.bid + epsilon,
        };
        out.winners[s] = Some(winner.id);
        out.prices[s] = Some(price);
    }
    out.price_adjustment = rates;
    Ok(out)
}
