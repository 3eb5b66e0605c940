//! Repeated generalized-second-price auction for allocating edge-server VMs
//! to offloaded tasks, with a VCG benchmark and equilibrium checkers.

pub mod analytics;
pub mod bidding;
pub mod channel;
pub mod error;
pub mod example1;
pub mod gsp;
pub mod matching;
pub mod orchestrator;
pub mod scenario;
pub mod vcg;
pub mod verify;
pub mod workload;

pub use error::{AnalyticsError, DomainError, GspError, ScenarioError, SimError};
pub use gsp::{run_gsp_round, Bidder, PriceRule, RoundOutcome, Task, TaskQueue};
pub use orchestrator::{detect_convergence, run_simulation, Mechanism, RunReport, SimOptions, SlotRecord};
pub use scenario::{builtin_preset, load_scenario, parse_scenario, Scenario, StrategyKind, TaskModel};
pub use vcg::{run_vcg_round, solve_wdp_exact, vcg_prices, WdpInstance};
pub use workload::{VmId, VmState};
