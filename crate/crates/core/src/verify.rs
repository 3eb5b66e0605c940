//! Property suites shared by the test harness and the `verify` command.
//!
//! Each suite returns a [`Check`]; none of them panic on a failed property.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytics::{self, SNE_TOLERANCE};
use crate::bidding::next_bid;
use crate::gsp::{run_gsp_round, Bidder, PriceRule, Task, TaskQueue};
use crate::orchestrator::{replay_round, run_simulation, Mechanism, RunReport, SimOptions};
use crate::scenario::{builtin_preset, Scenario, StrategyKind};
use crate::vcg::{solve_wdp_exact, vcg_prices, WdpInstance};
use crate::workload::{VmId, VmState};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name, passed, detail: detail.into() }
    }
}

/// Deliberate faults for exercising the failure path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Inject {
    #[default]
    None,
    IrViolation,
}

/// A random instance with 1..=`max_slots` slots and 1..=`max_vms` VMs,
/// built from λ, θ and bids in realistic ranges. Returns the bids too.
pub fn random_instance(rng: &mut impl Rng, max_slots: usize, max_vms: usize) -> (WdpInstance, Vec<f64>) {
    let slots = rng.gen_range(1..=max_slots);
    let vms = rng.gen_range(1..=max_vms);
    let lambda: Vec<f64> = (0..slots).map(|_| rng.gen_range(0.05..1.0)).collect();
    let theta: Vec<f64> = (0..vms).map(|_| rng.gen_range(0.5..3.0)).collect();
    let bids: Vec<f64> = (0..vms).map(|_| rng.gen_range(0.02..0.06)).collect();
    let z = lambda.iter().flat_map(|l| theta.iter().zip(&bids).map(move |(t, b)| l * t / b)).collect();
    (WdpInstance::new(slots, vms, z), bids)
}

/// Optimum by enumerating every partial injection of slots into VMs.
pub fn brute_force_wdp(inst: &WdpInstance) -> f64 {
    fn go(inst: &WdpInstance, slot: usize, used: &mut [bool]) -> f64 {
        if slot == inst.slots {
            return 0.0;
        }
        let mut best = go(inst, slot + 1, used);
        for r in 0..inst.vms {
            if !used[r] {
                used[r] = true;
                best = best.max(inst.at(slot, r) + go(inst, slot + 1, used));
                used[r] = false;
            }
        }
        best
    }
    go(inst, 0, &mut vec![false; inst.vms])
}

/// Clarke pivot prices with every optimum recomputed by enumeration.
pub fn brute_force_vcg(inst: &WdpInstance, assignment: &[Option<usize>], valuations: &[f64], bids: &[f64]) -> Vec<Option<f64>> {
    let best = brute_force_wdp(inst);
    let scale = best.abs().max(1.0);
    assignment
        .iter()
        .enumerate()
        .map(|(s, r)| {
            let r = (*r)?;
            let mut z = inst.z.clone();
            for row in 0..inst.slots {
                z[row * inst.vms + r] = 0.0;
            }
            let without = brute_force_wdp(&WdpInstance::new(inst.slots, inst.vms, z));
            let z_sr = inst.at(s, r);
            let z_crit = without - (best - z_sr);
            Some(if z_crit <= 1e-12 * scale { valuations[r] } else { (bids[r] * z_sr / z_crit).max(valuations[r]) })
        })
        .collect()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Exact WDP and Clarke pivots against enumeration on random ≤6×6 instances.
pub fn oracle_suite(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..instances {
        let (inst, bids) = random_instance(&mut rng, 6, 6);
        let sol = solve_wdp_exact(&inst);
        let oracle = brute_force_wdp(&inst);
        if !close(sol.value, oracle, 1e-9) {
            return Check::new("wdp-oracle", false, format!("instance {k}: matching {} vs enumeration {oracle}", sol.value));
        }
        let pricing = vcg_prices(&inst, &sol, &bids, &bids, true);
        let expected = brute_force_vcg(&inst, &sol.assignment, &bids, &bids);
        for (s, (p, q)) in pricing.prices.iter().zip(&expected).enumerate() {
            let ok = match (p, q) {
                (Some(p), Some(q)) => close(*p, *q, 1e-9),
                (None, None) => true,
                _ => false,
            };
            if !ok {
                return Check::new("wdp-oracle", false, format!("instance {k} slot {s}: pivot {p:?} vs enumeration {q:?}"));
            }
        }
        if let Some(w) = pricing.warnings.first() {
            return Check::new("wdp-oracle", false, format!("instance {k}: precision warning {w:?}"));
        }
    }
    Check::new("wdp-oracle", true, format!("{instances} instances match enumeration"))
}

/// A winner's payment does not move with its own bid while the allocation
/// holds, and identical truthful sellers earn nothing.
pub fn vcg_suite(instances: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = 0;
    for k in 0..instances {
        let (inst, bids) = random_instance(&mut rng, 5, 6);
        let sol = solve_wdp_exact(&inst);
        let base = vcg_prices(&inst, &sol, &bids, &bids, false);
        let Some((s, r)) = sol.assignment.iter().enumerate().find_map(|(s, r)| r.map(|r| (s, r))) else { continue };
        let factor = rng.gen_range(0.97..1.03);
        let mut z = inst.z.clone();
        for row in 0..inst.slots {
            z[row * inst.vms + r] /= factor;
        }
        let moved = WdpInstance::new(inst.slots, inst.vms, z);
        let sol2 = solve_wdp_exact(&moved);
        if sol2.assignment != sol.assignment {
            continue;
        }
        let mut bids2 = bids.clone();
        bids2[r] *= factor;
        // valuations stay put; only the report moves
        let again = vcg_prices(&moved, &sol2, &bids, &bids2, false);
        let (a, b) = (base.prices[s].unwrap(), again.prices[s].unwrap());
        if !close(a, b, 1e-9) {
            return Check::new("vcg", false, format!("instance {k}: payment moved {a} → {b} with own bid"));
        }
        perturbed += 1;
    }
    for vms in 1..=6 {
        // with no spare VM every winner is pivotal and earns a scarcity rent
        for slots in 1..vms {
            let v = 0.0354;
            let z = (0..slots).flat_map(|s| vec![(1.0 - 0.1 * s as f64) * 2.0 / v; vms]).collect();
            let inst = WdpInstance::new(slots, vms, z);
            let sol = solve_wdp_exact(&inst);
            let p = vcg_prices(&inst, &sol, &vec![v; vms], &vec![v; vms], false);
            if let Some(bad) = p.prices.iter().flatten().find(|p| (**p - v).abs() > 1e-9) {
                return Check::new("vcg", false, format!("{slots}×{vms} symmetric sellers paid {bad} ≠ v"));
            }
        }
    }
    Check::new("vcg", true, format!("{perturbed} bid perturbations, symmetric profit 0"))
}

/// Every recorded round is individually rational.
pub fn ir_suite(reports: &[RunReport], inject: Inject) -> Check {
    for report in reports {
        for (t, slot) in report.history.iter().enumerate() {
            for (n, outcome) in slot.iter().enumerate() {
                let mut outcome = outcome.clone();
                if inject == Inject::IrViolation && t == 0 && n == 0 {
                    if let Some(s) = outcome.winners.iter().position(Option::is_some) {
                        let id = outcome.winners[s].unwrap();
                        let k = outcome.bids.iter().position(|b| b.id == id).unwrap();
                        outcome.prices[s] = Some(report.valuations[n][k] - 0.001);
                    }
                }
                let ir = analytics::check_ir(&outcome, &report.valuations[n]);
                if !ir.passed() {
                    return Check::new(
                        "IR",
                        false,
                        format!("{} slot {} app {n}: {} VM(s) below valuation, first {:?}", report.scenario, t + 1, ir.violations.len(), ir.violations[0]),
                    );
                }
            }
        }
    }
    Check::new("IR", true, format!("{} runs, every round", reports.len()))
}

fn random_vm(rng: &mut impl Rng, index: usize) -> VmState {
    let valuation = rng.gen_range(0.02..0.05);
    let quality = rng.gen_range(0.5..3.0);
    VmState {
        id: VmId::new(rng.gen_range(0..3), index),
        app: 0,
        valuation,
        vcpus: 1,
        cpu_freq_ghz: 3.2,
        compute_rate_mb_s: 16.0,
        workload_mb: 0.0,
        last_assigned_mb: 0.0,
        load_per_capacity: 0.0,
        utilization: 1.0,
        quality,
        prev_quality: quality * rng.gen_range(0.8..1.2),
        current_bid: valuation * rng.gen_range(1.0..1.3),
        last_won_slot: None,
    }
}

/// Random two-round episodes: an arbitrary first round, then one bid update
/// under RBB, BB or truthful bidding and a second round checked for IR.
pub fn ir_random_suite(rounds: usize, seed: u64, rule: PriceRule) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kinds = [StrategyKind::Rbb, StrategyKind::Bb, StrategyKind::Truthful];
    for k in 0..rounds {
        let kind = kinds[k % kinds.len()];
        let slots = rng.gen_range(1..=12);
        let tasks: Vec<Task> = (0..slots)
            .map(|j| Task { ue: j as u32, size_mb: rng.gen_range(5.0..50.0), priority: rng.gen_range(0.05..1.0) })
            .collect();
        let queue = TaskQueue::build(0, tasks, slots);
        let mut vms: Vec<VmState> = (0..rng.gen_range(1..=12)).map(|i| random_vm(&mut rng, i)).collect();
        let bidders = |vms: &[VmState]| -> Vec<Bidder> {
            vms.iter().map(|v| Bidder { id: v.id, quality: v.quality, bid: v.current_bid }).collect()
        };
        let Ok(first) = run_gsp_round(&queue, &bidders(&vms), 0.001, rule) else {
            return Check::new("IR-random", false, format!("episode {k}: first round failed"));
        };
        for vm in &mut vms {
            vm.current_bid = next_bid(kind, vm, Some(&first));
            vm.prev_quality = vm.quality;
        }
        let Ok(second) = run_gsp_round(&queue, &bidders(&vms), 0.001, rule) else {
            return Check::new("IR-random", false, format!("episode {k}: second round failed"));
        };
        let valuations: Vec<f64> = vms.iter().map(|v| v.valuation).collect();
        let ir = analytics::check_ir(&second, &valuations);
        if !ir.passed() {
            return Check::new(
                "IR-random",
                false,
                format!("episode {k} ({}): first violation {:?}", kind.label(), ir.violations[0]),
            );
        }
    }
    Check::new("IR-random", true, format!("{rounds} randomized rounds"))
}

/// Served plus unserved slots add up to the queue.
pub fn conservation_suite(reports: &[RunReport]) -> Check {
    for report in reports {
        for (rec, slot) in report.slots.iter().zip(&report.history) {
            let queue: usize = slot.iter().map(|o| o.slots.len()).sum();
            if rec.served + rec.unserved != queue {
                return Check::new(
                    "conservation",
                    false,
                    format!("{} slot {}: {} + {} ≠ {queue}", report.scenario, rec.slot, rec.served, rec.unserved),
                );
            }
        }
    }
    Check::new("conservation", true, "served + unserved = queue length")
}

/// Re-running each recorded GSP round from its inputs gives the same outcome.
pub fn replay_suite(reports: &[RunReport]) -> Check {
    for report in reports.iter().filter(|r| r.mechanism == Mechanism::Gsp) {
        for (t, slot) in report.history.iter().enumerate() {
            for outcome in slot {
                match replay_round(outcome, report.epsilon, report.price_rule) {
                    Ok(again) if again == *outcome => {}
                    _ => return Check::new("replay", false, format!("{} slot {} differs on replay", report.scenario, t + 1)),
                }
            }
        }
    }
    Check::new("replay", true, "recorded rounds reproduce")
}

/// Equilibrium inequalities and bid bounds at the detected convergence slot.
pub fn sne_suite(reports: &[RunReport]) -> Check {
    let mut seen = 0;
    for report in reports.iter().filter(|r| r.mechanism == Mechanism::Gsp) {
        let Some(t) = report.convergence_slot else {
            return Check::new("SNE", false, format!("{}: bids never converged", report.scenario));
        };
        for (n, outcome) in report.history[t - 1].iter().enumerate() {
            let rep = analytics::check_sne(outcome, &report.valuations[n]);
            if !rep.equilibrium() {
                return Check::new(
                    "SNE",
                    false,
                    format!("{} slot {t}: residual {:.3e} at pair {:?}", report.scenario, rep.min_residual, rep.worst_pair),
                );
            }
            if let Some(b) = rep.bounds.iter().find(|b| !b.contains(SNE_TOLERANCE)) {
                return Check::new(
                    "SNE",
                    false,
                    format!("{} slot {t}: bid {:.6} outside [{:.6}, {:.6}] at position {}", report.scenario, b.bid, b.lower, b.upper, b.slot),
                );
            }
            seen += 1;
        }
    }
    Check::new("SNE", true, format!("{seen} converged rounds"))
}

/// No VM gains by taking another served slot's (λ, p) at convergence.
pub fn swap_suite(reports: &[RunReport]) -> Check {
    for report in reports.iter().filter(|r| r.mechanism == Mechanism::Gsp) {
        let Some(t) = report.convergence_slot else {
            return Check::new("swap", false, format!("{}: bids never converged", report.scenario));
        };
        for (n, outcome) in report.history[t - 1].iter().enumerate() {
            let swaps = analytics::profitable_swaps(outcome, &report.valuations[n], SNE_TOLERANCE);
            if let Some((vm, from, to)) = swaps.first() {
                return Check::new(
                    "swap",
                    false,
                    format!("{} slot {t}: {} profitable swaps, first {vm:?} {from} → {to}", report.scenario, swaps.len()),
                );
            }
        }
    }
    Check::new("swap", true, "no profitable unilateral swap")
}

/// Runs used by the run-level suites: all-RBB and all-BB on the two-server
/// static deployment, plus truthful bidding.
pub fn standard_runs(replications: u32) -> Vec<RunReport> {
    let base = builtin_preset("fig5_case3").expect("built-in preset");
    let opts = SimOptions { replications: Some(replications), ..SimOptions::default() };
    let variants: [(&str, Scenario); 3] = [
        ("fig5_case3", base.clone()),
        ("fig5_case3_bb", base.clone().with_strategy(StrategyKind::Bb)),
        ("fig5_case3_truthful", base.with_strategy(StrategyKind::Truthful)),
    ];
    variants
        .into_iter()
        .map(|(name, mut s)| {
            s.name = name.to_string();
            run_simulation(&s, Mechanism::Gsp, opts).expect("preset runs")
        })
        .collect()
}

pub const SUITES: [&str; 8] = ["wdp-oracle", "vcg", "IR-random", "IR", "conservation", "replay", "SNE", "swap"];

/// Run the named suites (all when `only` is empty).
pub fn run_suites(only: &[String], inject: Inject) -> Vec<Check> {
    let wanted = |name: &str| only.is_empty() || only.iter().any(|o| o.eq_ignore_ascii_case(name));
    let needs_runs = ["IR", "conservation", "replay", "SNE", "swap"].iter().any(|n| wanted(n));
    let runs = if needs_runs { standard_runs(16) } else { Vec::new() };
    let rbb = &runs[..runs.len().min(1)];
    let mut out = Vec::new();
    for name in SUITES.iter().filter(|n| wanted(n)) {
        out.push(match *name {
            "wdp-oracle" => oracle_suite(1000, 11),
            "vcg" => vcg_suite(500, 12),
            "IR-random" => ir_random_suite(1000, 13, PriceRule::default()),
            "IR" => ir_suite(&runs, inject),
            "conservation" => conservation_suite(&runs),
            "replay" => replay_suite(&runs),
            "SNE" => sne_suite(rbb),
            "swap" => swap_suite(rbb),
            _ => unreachable!(),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_matches_small_examples() {
        assert_eq!(brute_force_wdp(&WdpInstance::new(1, 2, vec![3.0, 5.0])), 5.0);
        assert_eq!(brute_force_wdp(&WdpInstance::new(2, 2, vec![5.0, 4.0, 4.0, 1.0])), 8.0);
        assert_eq!(brute_force_wdp(&WdpInstance::new(3, 1, vec![1.0, 7.0, 2.0])), 7.0);
    }

    #[test]
    fn injected_violation_fails_ir() {
        let s = builtin_preset("fig5_case1").unwrap();
        let r = run_simulation(&s, Mechanism::Gsp, SimOptions { replications: Some(2), ..SimOptions::horizon(2) }).unwrap();
        assert!(ir_suite(std::slice::from_ref(&r), Inject::None).passed);
        let c = ir_suite(&[r], Inject::IrViolation);
        assert!(!c.passed);
        assert_eq!(c.name, "IR");
    }
}
