//! The four-UE, two-server, three-application toy round.

use crate::error::GspError;
use crate::gsp::{run_gsp_round, Bidder, PriceRule, RoundOutcome, Task, TaskQueue};
use crate::workload::VmId;

/// Price the worked example quotes for the first slot of queue 1.
pub const QUOTED_P11: f64 = 0.285;

#[derive(Debug, Clone, PartialEq)]
pub struct Example1 {
    /// Priorities per queue, indexed by UE (position s = j before sorting).
    pub priorities: [[f64; 4]; 3],
    /// (server, VM index, θ, bid) per queue.
    pub vms: Vec<Vec<(usize, usize, f64, f64)>>,
    pub epsilon: f64,
}

impl Default for Example1 {
    fn default() -> Self {
        Self {
            priorities: [[0.31, 0.20, 0.15, 0.09], [0.13, 0.23, 0.14, 0.38], [0.26, 0.11, 0.24, 0.20]],
            vms: vec![
                // ranked r11 > r22 > r23 > r21
                vec![(0, 1, 2.6, 0.10), (1, 1, 1.8, 0.25), (1, 2, 2.1, 0.22), (1, 3, 2.0, 0.24)],
                vec![(0, 1, 2.4, 0.18), (0, 2, 2.2, 0.20), (1, 1, 2.5, 0.21), (1, 2, 1.9, 0.23)],
                vec![(0, 1, 2.0, 0.15), (0, 2, 2.3, 0.19), (1, 1, 1.7, 0.16), (1, 2, 2.2, 0.26)],
            ],
            epsilon: 0.001,
        }
    }
}

impl Example1 {
    /// Same inputs with every θ set to `theta`.
    pub fn with_equal_quality(mut self, theta: f64) -> Self {
        for q in &mut self.vms {
            for vm in q.iter_mut() {
                vm.2 = theta;
            }
        }
        self
    }

    /// Change one bid in queue 1, addressed by (server, VM index).
    pub fn with_queue1_bid(mut self, server: usize, index: usize, bid: f64) -> Self {
        for vm in &mut self.vms[0] {
            if vm.0 == server && vm.1 == index {
                vm.3 = bid;
            }
        }
        self
    }

    pub fn run(&self, rule: PriceRule) -> Result<Vec<RoundOutcome>, GspError> {
        (0..3)
            .map(|n| {
                let tasks = self.priorities[n]
                    .iter()
                    .enumerate()
                    .map(|(j, &p)| Task { ue: j as u32 + 1, size_mb: p * 200.0, priority: p })
                    .collect();
                let queue = TaskQueue::build(n, tasks, 4);
                let bidders: Vec<Bidder> = self.vms[n]
                    .iter()
                    .map(|&(server, index, quality, bid)| Bidder { id: VmId::new(server, index), quality, bid })
                    .collect();
                run_gsp_round(&queue, &bidders, self.epsilon, rule)
            })
            .collect()
    }
}
