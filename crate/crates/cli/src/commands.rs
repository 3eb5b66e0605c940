use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mec_auction::analytics::check_ir;
use mec_auction::example1::{Example1, QUOTED_P11};
use mec_auction::orchestrator::with_uniform_strategy;
use mec_auction::scenario::presets;
use mec_auction::verify::{self, Inject};
use mec_auction::{builtin_preset, load_scenario, run_simulation, Mechanism, PriceRule, RunReport, Scenario, SimOptions, StrategyKind};
use rayon::prelude::*;

use crate::error::CliError;
use crate::table::{fmt, fmt_opt, Kind, Table};
use crate::{figures, Common, InjectArg, MechanismArg, PlotArgs, RuleArg, SweepArgs, VerifyArgs};

fn mechanisms(m: MechanismArg) -> &'static [Mechanism] {
    match m {
        MechanismArg::Gsp => &[Mechanism::Gsp],
        MechanismArg::Vcg => &[Mechanism::Vcg],
        MechanismArg::Both => &[Mechanism::Gsp, Mechanism::Vcg],
    }
}

fn options(c: &Common) -> SimOptions {
    SimOptions {
        horizon: c.horizon,
        stop_after_convergence: c.stop_after,
        price_rule: match c.price_rule {
            RuleArg::Rank => PriceRule::Rank,
            RuleArg::Sorted => PriceRule::Sorted,
        },
        replications: c.replications,
    }
}

/// Seed and strategy overrides shared by every command.
fn customise(mut s: Scenario, c: &Common) -> Result<Scenario, CliError> {
    if let Some(seed) = c.seed {
        s.auction.rng_seed = seed;
    }
    if let Some(name) = &c.strategy {
        let kind = StrategyKind::parse(name, s.auction.epsilon)
            .ok_or_else(|| CliError::Usage(format!("unknown strategy `{name}` (rbb, bb, ab, cb, truthful)")))?;
        s = with_uniform_strategy(&s, kind);
    }
    s.validate()?;
    Ok(s)
}

fn base_scenario(c: &Common) -> Result<Scenario, CliError> {
    let s = match (&c.preset, &c.scenario) {
        (Some(p), _) => builtin_preset(p)?,
        (None, Some(path)) => load_scenario(path)?,
        (None, None) => return Err(CliError::Usage("give --preset or --scenario".into())),
    };
    customise(s, c)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Mean price at the convergence slot, or at the last slot.
fn settled(r: &RunReport) -> Option<&mec_auction::SlotRecord> {
    match r.convergence_slot {
        Some(t) => r.slots.get(t - 1),
        None => r.last(),
    }
}

fn server_labels(s: &Scenario) -> Vec<String> {
    s.servers.iter().map(|x| format!("s{}", x.id)).collect()
}

fn rounds_table(s: &Scenario, reports: &[RunReport]) -> Table {
    let labels = server_labels(s);
    let mut cols = vec!["mechanism".to_string(), "slot".into()];
    cols.extend(labels.iter().map(|l| format!("bid_{l}")));
    cols.extend(["mean_bid", "price"].map(String::from));
    cols.extend(labels.iter().map(|l| format!("utility_{l}")));
    cols.extend(
        ["margin_pct", "served", "unserved", "latency_s", "miss_rate", "q_latency", "q_cost", "qoe", "sw", "alloc_valuation"]
            .map(String::from),
    );
    let mut t = Table::new(Kind::Rounds, cols);
    for r in reports {
        for (k, rec) in r.slots.iter().enumerate() {
            let bids = &r.bid_history[k];
            let alloc: f64 = r.history[k]
                .iter()
                .map(|o| {
                    let vals = &r.valuations[o.app];
                    o.served().map(|(_, vm, _)| vals[o.bids.iter().position(|b| b.id == vm).unwrap()]).sum::<f64>()
                })
                .sum();
            let mut row = vec![r.mechanism.label().to_string(), rec.slot.to_string()];
            row.extend(rec.mean_bid.iter().map(|&b| fmt(b)));
            row.push(fmt(bids.iter().sum::<f64>() / bids.len().max(1) as f64));
            row.push(fmt_opt(rec.mean_price));
            row.extend(rec.server_utility.iter().map(|&u| fmt(u)));
            row.extend([
                fmt_opt(rec.margin_pct),
                rec.served.to_string(),
                rec.unserved.to_string(),
                fmt(rec.mean_latency_s),
                fmt(rec.deadline_miss_rate),
                fmt(rec.mean_q_latency),
                fmt(rec.mean_q_cost),
                fmt(rec.mean_qoe),
                fmt(rec.social_welfare),
                fmt(alloc),
            ]);
            t.push(row);
        }
    }
    t
}

fn summary(s: &Scenario, reports: &[RunReport]) -> String {
    let labels = server_labels(s);
    let join = |xs: &[f64]| -> String {
        labels.iter().zip(xs).map(|(l, x)| format!("{l}={x:.6}")).collect::<Vec<_>>().join(" ")
    };
    let mut out = String::new();
    let _ = writeln!(out, "scenario {}", s.name);
    let _ = writeln!(out, "strategies {}", s.strategies.iter().map(|k| k.label()).collect::<Vec<_>>().join(" "));
    for r in reports {
        let _ = writeln!(out, "\n[{}]", r.mechanism.label());
        let _ = writeln!(out, "price_rule {:?}", r.price_rule);
        let _ = writeln!(out, "slots {}", r.len());
        match r.convergence_slot {
            Some(t) => _ = writeln!(out, "convergence_slot {t}"),
            None => _ = writeln!(out, "convergence_slot none"),
        }
        let opt = |x: Option<f64>| x.map_or("none".into(), |p| format!("{p:.6}"));
        let _ = writeln!(out, "converged_price {}", opt(settled(r).and_then(|x| x.mean_price)));
        let _ = writeln!(out, "final_price {}", opt(r.final_price()));
        let _ = writeln!(out, "final_margin_pct {}", opt(r.last().and_then(|x| x.margin_pct)));
        if let Some(last) = r.last() {
            let _ = writeln!(out, "final_mean_bid {}", join(&last.mean_bid));
            let _ = writeln!(out, "final_utility {}", join(&last.server_utility));
            let _ = writeln!(out, "final_qoe {:.6}", last.mean_qoe);
            let _ = writeln!(out, "final_sw {:.6}", last.social_welfare);
        }
        let _ = writeln!(out, "win_share {}", join(&r.final_win_share()));
        let ir: usize = r
            .history
            .iter()
            .flatten()
            .map(|o| check_ir(o, &r.valuations[o.app]).violations.len())
            .sum();
        let _ = writeln!(out, "ir_violations {ir}");
    }
    out
}

pub fn run(c: &Common) -> Result<(), CliError> {
    let s = base_scenario(c)?;
    let opts = options(c);
    let reports = mechanisms(c.mechanism)
        .iter()
        .map(|&m| run_simulation(&s, m, opts))
        .collect::<Result<Vec<_>, _>>()?;
    create_dir(&c.out)?;
    rounds_table(&s, &reports).write(&c.out.join("rounds.csv"))?;
    let text = summary(&s, &reports);
    write_text(&c.out.join("summary.txt"), &text)?;
    print!("{text}");
    Ok(())
}

#[derive(Debug, Clone, Copy)]
struct Point {
    ues: Option<usize>,
    servers: Option<usize>,
    vms: Option<usize>,
    davg: Option<[f64; 2]>,
}

fn sweep_points(family: &str, a: &SweepArgs) -> Result<Vec<Point>, CliError> {
    let or = |v: &[usize], d: usize| if v.is_empty() { vec![d] } else { v.to_vec() };
    let reject = |what: &str, given: bool| {
        if given {
            Err(CliError::Usage(format!("{what} is not a sweep axis of {family}")))
        } else {
            Ok(())
        }
    };
    let none = Point { ues: None, servers: None, vms: None, davg: None };
    let points: Vec<Point> = match family {
        "fig6a" => {
            reject("--sweep-servers", !a.sweep_servers.is_empty())?;
            reject("--sweep-vms", !a.sweep_vms.is_empty())?;
            reject("--davg", !a.davg.is_empty())?;
            or(&a.sweep_ues, 250).into_iter().map(|j| Point { ues: Some(j), ..none }).collect()
        }
        "fig6b" => {
            reject("--sweep-ues", !a.sweep_ues.is_empty())?;
            reject("--sweep-vms", !a.sweep_vms.is_empty())?;
            reject("--davg", !a.davg.is_empty())?;
            or(&a.sweep_servers, 5).into_iter().map(|i| Point { servers: Some(i), ..none }).collect()
        }
        "fig9" => {
            reject("--sweep-servers", !a.sweep_servers.is_empty())?;
            reject("--davg", !a.davg.is_empty())?;
            let ues = or(&a.sweep_ues, 300);
            or(&a.sweep_vms, 150)
                .into_iter()
                .flat_map(|v| ues.iter().map(move |&j| Point { vms: Some(v), ues: Some(j), ..none }))
                .collect()
        }
        "fig10" => {
            reject("--sweep-servers", !a.sweep_servers.is_empty())?;
            reject("--sweep-vms", !a.sweep_vms.is_empty())?;
            let ues = or(&a.sweep_ues, 400);
            let ranges = if a.davg.is_empty() { vec![[20.0, 100.0]] } else { a.davg.clone() };
            ranges
                .into_iter()
                .flat_map(|d| ues.iter().map(move |&j| Point { davg: Some(d), ues: Some(j), ..none }))
                .collect()
        }
        other => {
            return Err(CliError::Usage(format!("sweeps are defined for fig6a, fig6b, fig9 and fig10, not `{other}`")));
        }
    };
    Ok(points)
}

fn point_scenario(family: &str, p: &Point) -> Result<Scenario, CliError> {
    if p.ues == Some(0) || p.servers == Some(0) || p.vms == Some(0) {
        return Err(CliError::Usage("sweep values must be positive".into()));
    }
    Ok(match family {
        "fig6a" => presets::fig6a(p.ues.unwrap()),
        "fig6b" => {
            let i = p.servers.unwrap();
            if !(2..=5).contains(&i) {
                return Err(CliError::Usage(format!("fig6b supports 2 to 5 servers, got {i}")));
            }
            presets::fig6b(i)
        }
        "fig9" => presets::fig9(p.vms.unwrap(), p.ues.unwrap()),
        _ => presets::fig10(p.davg.unwrap(), p.ues.unwrap()),
    })
}

pub fn sweep(a: &SweepArgs) -> Result<(), CliError> {
    let c = &a.common;
    if c.scenario.is_some() {
        return Err(CliError::Usage("sweeps run on preset families; use --preset".into()));
    }
    let family = match &c.preset {
        Some(p) => p.clone(),
        None if !a.sweep_servers.is_empty() => "fig6b".into(),
        None if !a.davg.is_empty() => "fig10".into(),
        None if !a.sweep_vms.is_empty() => "fig9".into(),
        None if !a.sweep_ues.is_empty() => "fig6a".into(),
        None => return Err(CliError::Usage("no sweep axis given".into())),
    };
    if a.sweep_ues.is_empty() && a.sweep_servers.is_empty() && a.sweep_vms.is_empty() && a.davg.is_empty() {
        return Err(CliError::Usage("no sweep axis given".into()));
    }
    let points = sweep_points(&family, a)?;
    let scenarios = points
        .iter()
        .map(|p| point_scenario(&family, p).and_then(|s| customise(s, c)))
        .collect::<Result<Vec<_>, _>>()?;
    let opts = options(c);
    let jobs: Vec<(usize, Mechanism)> =
        (0..points.len()).flat_map(|k| mechanisms(c.mechanism).iter().map(move |&m| (k, m))).collect();
    let reports = jobs
        .par_iter()
        .map(|&(k, m)| run_simulation(&scenarios[k], m, opts))
        .collect::<Result<Vec<_>, _>>()?;

    let cols = [
        "mechanism", "ues", "servers", "vms", "davg_lo", "davg_hi", "davg_mid", "convergence_slot", "price", "margin_pct",
        "sw", "qoe", "q_cost", "latency_s", "miss_rate", "served", "unserved",
    ];
    let mut t = Table::new(Kind::Sweep, cols.map(String::from).to_vec());
    for (&(k, _), r) in jobs.iter().zip(&reports) {
        let (p, s) = (&points[k], &scenarios[k]);
        let rec = settled(r).expect("horizon ≥ 1");
        let vms_per_server = p.vms.unwrap_or_else(|| s.servers.iter().map(|x| x.pools[0].vm_count).max().unwrap_or(0));
        let davg = p.davg.unwrap_or([f64::NAN; 2]);
        t.push(vec![
            r.mechanism.label().into(),
            s.ues.len().to_string(),
            s.servers.len().to_string(),
            vms_per_server.to_string(),
            fmt(davg[0]),
            fmt(davg[1]),
            fmt((davg[0] + davg[1]) / 2.0),
            r.convergence_slot.map(|x| x.to_string()).unwrap_or_default(),
            fmt_opt(rec.mean_price),
            fmt_opt(rec.margin_pct),
            fmt(rec.social_welfare),
            fmt(rec.mean_qoe),
            fmt(rec.mean_q_cost),
            fmt(rec.mean_latency_s),
            fmt(rec.deadline_miss_rate),
            rec.served.to_string(),
            rec.unserved.to_string(),
        ]);
    }
    create_dir(&c.out)?;
    let path = c.out.join("sweep.csv");
    t.write(&path)?;
    println!("{} points written to {}", t.rows.len(), path.display());
    for row in &t.rows {
        let davg = if row[4].is_empty() { String::new() } else { format!(" d̄=[{},{}]", row[4], row[5]) };
        println!("{} J={} I={} R/server={}{davg} price={}", row[0], row[1], row[2], row[3], row[8]);
    }
    Ok(())
}

pub fn verify(a: &VerifyArgs) -> Result<(), CliError> {
    for s in &a.suite {
        if !verify::SUITES.iter().any(|k| k.eq_ignore_ascii_case(s)) {
            return Err(CliError::Usage(format!("unknown suite `{s}`; known: {}", verify::SUITES.join(", "))));
        }
    }
    let inject = match a.inject {
        Some(InjectArg::IrViolation) => Inject::IrViolation,
        None => Inject::None,
    };
    let checks = verify::run_suites(&a.suite, inject);
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &checks {
        println!("{:<width$}  {}  {}", c.name, if c.passed { "PASS" } else { "FAIL" }, c.detail);
    }
    match checks.iter().find(|c| !c.passed) {
        Some(c) => Err(CliError::Failed(format!("property {} failed: {}", c.name, c.detail))),
        None => Ok(()),
    }
}

pub fn example1() -> Result<(), CliError> {
    let ex = Example1::default();
    let outcomes = ex.run(PriceRule::Rank).map_err(|e| CliError::Failed(e.to_string()))?;
    for o in &outcomes {
        println!("queue {}", o.app + 1);
        for (s, task) in o.slots.iter().enumerate() {
            let cell = match (o.winners[s], o.prices[s]) {
                (Some(vm), Some(p)) => {
                    let b = o.bidder(vm).unwrap();
                    format!("r{}{}  θ={:.2}  b={:.3}  p={p:.6}", vm.server + 1, vm.index, b.quality, b.bid)
                }
                _ => "unserved".into(),
            };
            println!("  slot {}  UE{}  λ={:.2}  {cell}", s + 1, task.ue, task.priority);
        }
    }
    let p = outcomes[0].prices[0].unwrap_or(f64::NAN);
    if (p - QUOTED_P11).abs() > 1e-6 {
        return Err(CliError::Failed(format!("queue 1 slot 1 price {p:.6} differs from the quoted {QUOTED_P11} (tolerance 1e-6)")));
    }
    Ok(())
}

pub fn plot(a: &PlotArgs) -> Result<(), CliError> {
    let fig = figures::figure(&a.figure)?;
    let chart = figures::build(fig, &a.inputs)?;
    let out = a.out.clone().unwrap_or_else(|| format!("{}.svg", fig.id).into());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    write_text(&out, &chart.render())?;
    println!("wrote {}", out.display());
    Ok(())
}
