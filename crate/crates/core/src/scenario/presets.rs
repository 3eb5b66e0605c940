use super::*;
use crate::workload::raw_valuation;

pub const PRESET_NAMES: [&str; 9] = [
    "example1",
    "fig5_case1",
    "fig5_case2",
    "fig5_case3",
    "fig6a",
    "fig6b",
    "fig7",
    "fig9",
    "fig10",
];

/// (W, f GHz, C MB/s, ρ) for the five reference servers.
const CATALOGUE: [(u32, f64, f64, f64); 5] = [
    (2, 3.3, 32.0, 0.0452),
    (2, 3.5, 24.0, 0.0435),
    (2, 3.2, 24.0, 0.0385),
    (1, 3.2, 16.0, 0.0186),
    (1, 3.3, 16.0, 0.0175),
];
const CATALOGUE_VMS: [usize; 5] = [60, 60, 40, 50, 50];

/// Valuations pinned for the two-server convergence runs.
pub const FIG5_VALUATIONS: [f64; 2] = [0.0354, 0.0366];

const POPULATION_SEED: u64 = 2024;

fn server_position(k: usize, count: usize, side: f64) -> [f64; 2] {
    if count == 1 {
        return [side / 2.0, side / 2.0];
    }
    let angle = std::f64::consts::TAU * k as f64 / count as f64;
    let r = side * 0.3;
    [side / 2.0 + r * angle.cos(), side / 2.0 + r * angle.sin()]
}

/// Reference server `row` (0-based) with `vm_count` VMs.
pub fn catalogue_server(row: usize, vm_count: usize, position_m: [f64; 2]) -> ServerSpec {
    let (vcpus, f, c, rho) = CATALOGUE[row];
    ServerSpec {
        id: row as u32 + 1,
        position_m,
        pools: vec![VmPool { vm_count, vcpus, cpu_freq_ghz: f, compute_rate_mb_s: c }],
        price_scale: rho,
        switched_capacitance: DEFAULT_KAPPA,
        valuation_scale: 1.0,
    }
}

/// Set the calibration multiplier so that the server's valuation is `v`.
pub fn pin_valuation(mut s: ServerSpec, v: f64) -> ServerSpec {
    let raw = raw_valuation(&s, 0);
    s.valuation_scale = v / raw;
    s
}

fn default_app() -> AppSpec {
    AppSpec { id: 1, deadline_ms: 200.0, min_cpu_freq_ghz: 3.2, capacity_req: 1.0 }
}

pub fn population(count: usize, davg: [f64; 2], seed: u64) -> Vec<UeSpec> {
    UePopulation { count, tx_power_dbm: 20.0, budget: 20.0, avg_task_size_mb: vec![davg], seed }.generate(1)
}

fn base(name: &str, servers: Vec<ServerSpec>, ues: Vec<UeSpec>, task_model: TaskModel) -> Scenario {
    let n = servers.len();
    Scenario {
        name: name.to_string(),
        servers,
        ues,
        apps: vec![default_app()],
        channel: ChannelParams::default(),
        auction: AuctionParams::default(),
        task_model,
        strategies: vec![StrategyKind::Rbb; n],
    }
}

fn two_server(name: &str, vms: [usize; 2], ues: usize, task_model: TaskModel) -> Scenario {
    let side = ChannelParams::default().area_side_m;
    let servers = (0..2)
        .map(|k| pin_valuation(catalogue_server(k, vms[k], server_position(k, 2, side)), FIG5_VALUATIONS[k]))
        .collect();
    base(name, servers, population(ues, [10.0, 40.0], POPULATION_SEED), task_model)
}

/// Two-server static run with the given VM split.
pub fn fig5(vms: [usize; 2]) -> Scenario {
    two_server("fig5", vms, 150, TaskModel::Static { size_mb: None })
}

/// Two servers with 250 VMs each and `ues` UEs offloading Poisson-sized tasks.
pub fn fig6a(ues: usize) -> Scenario {
    let mut s = two_server("fig6a", [250, 250], ues, TaskModel::Poisson);
    s.name = format!("fig6a_j{ues}");
    s
}

/// Calibration multiplier shared by the multi-server presets, anchored so
/// that server 1 matches the two-server runs.
pub fn common_scale() -> f64 {
    FIG5_VALUATIONS[0] / raw_valuation(&catalogue_server(0, 1, [0.0, 0.0]), 0)
}

/// Reference servers 1..=`servers` sharing 120 VMs equally, 120 UEs.
/// Valuations follow the energy model scaled by [`common_scale`].
pub fn fig6b(servers: usize) -> Scenario {
    assert!((1..=5).contains(&servers), "fig6b supports 1 to 5 servers");
    let side = ChannelParams::default().area_side_m;
    let list = (0..servers)
        .map(|k| {
            let mut s = catalogue_server(k, 120 / servers, server_position(k, servers, side));
            s.valuation_scale = common_scale();
            s
        })
        .collect();
    let mut s = base("fig6b", list, population(120, [10.0, 40.0], POPULATION_SEED), TaskModel::Poisson);
    s.name = format!("fig6b_i{servers}");
    s
}

/// The first three reference servers, with `vms_per_server` VMs each, queue capacity
/// `capacity`, `ues` UEs with average sizes drawn from `davg`.
pub fn three_server(vms_per_server: usize, capacity: usize, ues: usize, davg: [f64; 2]) -> Scenario {
    let side = ChannelParams::default().area_side_m;
    let list = (0..3)
        .map(|k| {
            let mut s = catalogue_server(k, vms_per_server, server_position(k, 3, side));
            s.valuation_scale = common_scale();
            s
        })
        .collect();
    let mut s = base("three_server", list, population(ues, davg, POPULATION_SEED), TaskModel::Poisson);
    s.auction.queue_capacity = Some(capacity);
    s
}

pub fn fig9(vms_per_server: usize, ues: usize) -> Scenario {
    let mut s = three_server(vms_per_server, 300, ues, [10.0, 40.0]);
    s.name = format!("fig9_r{}_j{ues}", 3 * vms_per_server);
    s
}

pub fn fig10(davg: [f64; 2], ues: usize) -> Scenario {
    let mut s = three_server(150, 400, ues, davg);
    s.name = format!("fig10_d{}-{}_j{ues}", davg[0], davg[1]);
    s
}

/// The full reference deployment: five servers, 150 UEs.
pub fn table3_table4() -> Scenario {
    let side = ChannelParams::default().area_side_m;
    let list = (0..5)
        .map(|k| {
            let mut s = catalogue_server(k, CATALOGUE_VMS[k], server_position(k, 5, side));
            s.valuation_scale = common_scale();
            s
        })
        .collect();
    base("table3_table4", list, population(150, [10.0, 40.0], POPULATION_SEED), TaskModel::Poisson)
}

/// The toy deployment: two servers, three applications, four UEs.
pub fn example1() -> Scenario {
    let side = ChannelParams::default().area_side_m;
    let mut servers: Vec<ServerSpec> = (0..2).map(|k| catalogue_server(k, 2, server_position(k, 2, side))).collect();
    // VMs per application: server 1 → [1, 2, 2], server 2 → [3, 2, 2]
    for (s, first) in servers.iter_mut().zip([1, 3]) {
        let pool = s.pools[0].clone();
        s.pools = vec![pool; 3];
        s.pools[0].vm_count = first;
    }
    let sizes = [[62.0, 26.0, 52.0], [40.0, 46.0, 22.0], [30.0, 28.0, 48.0], [18.0, 76.0, 40.0]];
    let ues = sizes
        .iter()
        .enumerate()
        .map(|(j, d)| UeSpec {
            id: j as u32 + 1,
            position_m: Some([40.0 + 50.0 * j as f64, 100.0]),
            tx_power_dbm: 20.0,
            avg_task_size_mb: d.to_vec(),
            budget: 20.0,
        })
        .collect();
    let mut s = base("example1", servers, ues, TaskModel::Static { size_mb: None });
    s.apps = (1..=3).map(|id| AppSpec { id, ..default_app() }).collect();
    s
}

pub fn builtin_preset(name: &str) -> Result<Scenario, ScenarioError> {
    let mut s = match name {
        "example1" => example1(),
        "fig5_case1" => fig5([150, 1]),
        "fig5_case2" => fig5([1, 150]),
        "fig5_case3" => fig5([80, 80]),
        "fig6a" => fig6a(250),
        "fig6b" => fig6b(5),
        "fig7" => fig5([80, 80]),
        "fig9" => fig9(150, 300),
        "fig10" => fig10([20.0, 100.0], 400),
        _ => return Err(ScenarioError::UnknownPreset(name.to_string())),
    };
    s.name = name.to_string();
    s.validate()?;
    Ok(s)
}
