use mec_auction::analytics::{self, check_ir, sne_bid_bounds, vm_utilities};
use mec_auction::bidding::{next_bid, update_bids};
use mec_auction::channel::uplink_rate_mbps;
use mec_auction::orchestrator::replay_round;
use mec_auction::scenario::{presets, scenario_to_toml, ChannelParams, PRESET_NAMES};
use mec_auction::vcg::{solve_wdp_exact, vcg_prices};
use mec_auction::verify::{brute_force_vcg, brute_force_wdp, random_instance};
use mec_auction::workload::{advance_workload, quality_score, utilization};
use mec_auction::{
    builtin_preset, parse_scenario, run_gsp_round, run_simulation, Bidder, Mechanism, PriceRule, RoundOutcome,
    SimOptions, StrategyKind, Task, TaskQueue, VmId, VmState,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 0.001;

fn tasks() -> impl Strategy<Value = Vec<Task>> {
    prop::collection::vec((0.05f64..1.0, 5.0f64..60.0), 1..12).prop_map(|v| {
        v.into_iter().enumerate().map(|(j, (priority, size_mb))| Task { ue: j as u32, size_mb, priority }).collect()
    })
}

fn bidders() -> impl Strategy<Value = Vec<Bidder>> {
    prop::collection::vec((0.5f64..3.0, 0.02f64..0.06, 0usize..3), 1..12).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(index, (quality, bid, server))| Bidder { id: VmId::new(server, index), quality, bid })
            .collect()
    })
}

fn round(tasks: &[Task], bidders: &[Bidder], rule: PriceRule) -> RoundOutcome {
    let queue = TaskQueue::build(0, tasks.to_vec(), tasks.len());
    run_gsp_round(&queue, bidders, EPS, rule).unwrap()
}

fn vm_state(b: &Bidder, valuation: f64, prev_quality: f64) -> VmState {
    VmState {
        id: b.id,
        app: 0,
        valuation,
        vcpus: 1,
        cpu_freq_ghz: 3.2,
        compute_rate_mb_s: 16.0,
        workload_mb: 0.0,
        last_assigned_mb: 0.0,
        load_per_capacity: 0.0,
        utilization: 1.0,
        quality: b.quality,
        prev_quality,
        current_bid: b.bid,
        last_won_slot: None,
    }
}

#[test]
fn presets_validate_and_round_trip() {
    for name in PRESET_NAMES {
        let s = builtin_preset(name).unwrap();
        s.validate().unwrap();
        let back = parse_scenario(&scenario_to_toml(&s)).unwrap();
        assert_eq!(back, s, "{name}");
    }
}

#[test]
fn truthful_bids_stay_put() {
    let s = builtin_preset("fig5_case3").unwrap().with_strategy(StrategyKind::Truthful);
    let r = run_simulation(&s, Mechanism::Gsp, SimOptions { replications: Some(4), ..SimOptions::horizon(6) }).unwrap();
    assert!(r.bid_history.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn simulation_is_deterministic() {
    let s = builtin_preset("fig7").unwrap();
    let opts = SimOptions { replications: Some(8), ..SimOptions::horizon(8) };
    let a = run_simulation(&s, Mechanism::Gsp, opts).unwrap();
    let b = run_simulation(&s, Mechanism::Gsp, opts).unwrap();
    assert_eq!(a.slots, b.slots);
    assert_eq!(a.bid_history, b.bid_history);
}

#[test]
fn recorded_rounds_replay_and_conserve() {
    let s = presets::fig6a(150);
    let r = run_simulation(&s, Mechanism::Gsp, SimOptions { replications: Some(8), ..SimOptions::horizon(10) }).unwrap();
    for (t, rounds) in r.history.iter().enumerate() {
        for o in rounds {
            assert_eq!(replay_round(o, r.epsilon, r.price_rule).unwrap(), *o, "slot {t}");
            assert_eq!(o.served_count() + o.unserved().len(), o.slots.len());
            assert!(check_ir(o, &r.valuations[o.app]).passed(), "slot {t}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn rate_falls_with_distance_and_rises_with_power(d in 1.0f64..300.0, extra in 0.5f64..50.0, p in 0.0f64..30.0, dp in 0.5f64..10.0) {
        let ch = ChannelParams::default();
        let near = uplink_rate_mbps(p, [0.0, 0.0], [d, 0.0], &ch).unwrap();
        let far = uplink_rate_mbps(p, [0.0, 0.0], [d + extra, 0.0], &ch).unwrap();
        let loud = uplink_rate_mbps(p + dp, [0.0, 0.0], [d, 0.0], &ch).unwrap();
        prop_assert!(far < near);
        prop_assert!(loud > near);
        prop_assert_eq!(near.to_bits(), uplink_rate_mbps(p, [0.0, 0.0], [d, 0.0], &ch).unwrap().to_bits());
    }

    #[test]
    fn wider_band_is_faster(d in 1.0f64..300.0, bw in 1.0f64..100.0, more in 1.0f64..50.0) {
        let ch = ChannelParams { bandwidth_mhz: bw, ..ChannelParams::default() };
        let wide = ChannelParams { bandwidth_mhz: bw + more, ..ch.clone() };
        let r = uplink_rate_mbps(20.0, [0.0, 0.0], [d, 0.0], &ch).unwrap();
        prop_assert!(uplink_rate_mbps(20.0, [0.0, 0.0], [d, 0.0], &wide).unwrap() > r);
    }

    #[test]
    fn utilization_is_non_increasing(a in 0.0f64..1.2, b in 0.0f64..1.2) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (u_lo, u_hi) = (utilization(lo, 0.01, 0.9), utilization(hi, 0.01, 0.9));
        prop_assert!(u_hi <= u_lo);
        prop_assert!((0.0..=1.0).contains(&u_lo));
    }

    #[test]
    fn quality_is_linear(w in 1u32..8, f in 1.0f64..4.0, phi in 0.0f64..1.0, k in 0.0f64..1.0) {
        let q = quality_score(w, f, 2.5, phi).unwrap();
        prop_assert!((quality_score(w, f, 2.5, k * phi).unwrap() - k * q).abs() <= 1e-12 * q.max(1.0));
        prop_assert!((quality_score(2 * w, f, 2.5, phi).unwrap() - 2.0 * q).abs() <= 1e-12 * q.max(1.0));
    }

    #[test]
    fn workload_never_negative(steps in prop::collection::vec((0.0f64..100.0, 0.0f64..200.0), 1..40)) {
        let mut prev = 0.0;
        for (assigned, capacity) in steps {
            let w = advance_workload(prev, assigned, capacity);
            prop_assert!(w >= 0.0);
            prev = assigned;
        }
    }

    #[test]
    fn gsp_outcome_is_well_formed(tasks in tasks(), bidders in bidders()) {
        let o = round(&tasks, &bidders, PriceRule::Rank);
        let served = o.served_count();
        prop_assert_eq!(served, tasks.len().min(bidders.len()));
        prop_assert!(o.winners[..served].iter().all(|w| w.is_some()));
        let mut ids: Vec<VmId> = o.winners.iter().flatten().copied().collect();
        ids.sort();
        ids.dedup();
        prop_assert_eq!(ids.len(), served);
        // threshold property: every winner is paid at least its bid
        for (_, vm, p) in o.served() {
            prop_assert!(p >= o.bidder(vm).unwrap().bid - 1e-15);
        }
        // price per unit of quality rises down the ladder
        let per_q: Vec<f64> = o.served().map(|(_, vm, p)| p / o.bidder(vm).unwrap().quality).collect();
        prop_assert!(per_q.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)));
    }

    #[test]
    fn gsp_ignores_input_order(tasks in tasks(), bidders in bidders(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut shuffled = bidders.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let a = round(&tasks, &bidders, PriceRule::Rank);
        let b = round(&tasks, &shuffled, PriceRule::Rank);
        prop_assert_eq!(a.winners, b.winners);
        prop_assert_eq!(a.prices, b.prices);
        prop_assert_eq!(round(&tasks, &bidders, PriceRule::Rank), round(&tasks, &bidders, PriceRule::Rank));
    }

    #[test]
    fn utilities_decompose(tasks in tasks(), bidders in bidders(), markup in 0.8f64..1.0) {
        let o = round(&tasks, &bidders, PriceRule::Rank);
        let vals: Vec<f64> = bidders.iter().map(|b| b.bid * markup).collect();
        let total: f64 = vm_utilities(&o, &vals).iter().sum();
        let direct: f64 = o.served().map(|(s, vm, p)| {
            let k = bidders.iter().position(|b| b.id == vm).unwrap();
            o.slots[s].priority * bidders[k].quality * (p - vals[k])
        }).sum();
        prop_assert!((total - direct).abs() <= 1e-12);
        prop_assert!(check_ir(&o, &vals).passed());
    }

    #[test]
    fn balanced_bids_cover_valuation(tasks in tasks(), bidders in bidders(), markup in 0.6f64..1.0, drift in 0.7f64..1.3) {
        let o = round(&tasks, &bidders, PriceRule::Rank);
        let states: Vec<VmState> = bidders.iter().map(|b| vm_state(b, b.bid * markup, b.quality * drift)).collect();
        for kind in [StrategyKind::Rbb, StrategyKind::Bb] {
            let once = update_bids(kind, &states, Some(&o));
            prop_assert_eq!(&once, &update_bids(kind, &states, Some(&o)));
            for (b, vm) in once.iter().zip(&states) {
                prop_assert!(*b >= vm.valuation);
            }
        }
        for vm in &states {
            prop_assert_eq!(next_bid(StrategyKind::Truthful, vm, Some(&o)), vm.valuation);
            prop_assert_eq!(next_bid(StrategyKind::Rbb, vm, None), vm.valuation);
        }
    }

    #[test]
    fn equal_valuations_collapse_the_bounds(tasks in tasks(), bidders in bidders(), v in 0.01f64..0.02) {
        let o = round(&tasks, &bidders, PriceRule::Rank);
        let vals = vec![v; bidders.len()];
        for b in sne_bid_bounds(&o, &vals) {
            prop_assert!((b.upper - b.lower).abs() <= 1e-12);
        }
    }

    #[test]
    fn restating_for_the_incumbent_is_identity(tasks in tasks(), bidders in bidders()) {
        let o = round(&tasks, &bidders, PriceRule::Rank);
        for (_, vm, p) in o.served() {
            prop_assert_eq!(analytics::restated_price(&o, p, vm, vm), p);
            for other in &bidders {
                let seen = analytics::restated_price(&o, p, vm, other.id);
                let expect = p * other.quality / o.bidder(vm).unwrap().quality;
                prop_assert!((seen - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
        }
    }

    #[test]
    fn wdp_matches_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, bids) = random_instance(&mut rng, 6, 6);
        let sol = solve_wdp_exact(&inst);
        let best = brute_force_wdp(&inst);
        prop_assert!((sol.value - best).abs() <= 1e-9 * best.max(1.0));
        let vals: Vec<f64> = bids.iter().map(|b| b * 0.9).collect();
        let pricing = vcg_prices(&inst, &sol, &vals, &bids, false);
        let expect = brute_force_vcg(&inst, &sol.assignment, &vals, &bids);
        for (a, b) in pricing.prices.iter().zip(&expect) {
            match (a, b) {
                (Some(a), Some(b)) => prop_assert!((a - b).abs() <= 1e-9 * b.max(1.0)),
                (a, b) => prop_assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }

    #[test]
    fn vcg_price_ignores_own_bid(seed in any::<u64>(), factor in 0.97f64..1.03) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (inst, bids) = random_instance(&mut rng, 5, 6);
        let sol = solve_wdp_exact(&inst);
        let vals: Vec<f64> = bids.iter().map(|b| b * 0.9).collect();
        let base = vcg_prices(&inst, &sol, &vals, &bids, false);
        let Some((slot, Some(r))) = sol.assignment.iter().enumerate().find(|(_, r)| r.is_some()) else {
            return Ok(());
        };
        let r = *r;
        let mut bids2 = bids.clone();
        bids2[r] *= factor;
        let mut z = inst.z.clone();
        for row in 0..inst.slots {
            z[row * inst.vms + r] *= bids[r] / bids2[r];
        }
        let inst2 = mec_auction::WdpInstance::new(inst.slots, inst.vms, z);
        let sol2 = solve_wdp_exact(&inst2);
        prop_assume!(sol2.assignment == sol.assignment);
        let moved = vcg_prices(&inst2, &sol2, &vals, &bids2, false);
        let (a, b) = (base.prices[slot].unwrap(), moved.prices[slot].unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0), "{} vs {}", a, b);
    }
}
