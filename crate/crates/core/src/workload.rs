//! VM backlog, load per capacity, utilization and quality score.

use crate::error::DomainError;
use crate::scenario::ServerSpec;

/// Identifies a VM: server index (position in `Scenario::servers`) and VM
/// index within that server's pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VmId {
    pub server: u32,
    pub index: u32,
}

impl VmId {
    pub fn new(server: usize, index: usize) -> Self {
        Self { server: server as u32, index: index as u32 }
    }

    pub fn server(self) -> usize {
        self.server as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmState {
    pub id: VmId,
    pub app: usize,
    pub valuation: f64,
    pub vcpus: u32,
    pub cpu_freq_ghz: f64,
    pub compute_rate_mb_s: f64,
    /// η after the latest assignment.
    pub workload_mb: f64,
    /// Size assigned in the latest slot, drained at C·Δt next slot.
    pub last_assigned_mb: f64,
    pub load_per_capacity: f64,
    pub utilization: f64,
    pub quality: f64,
    /// Quality used in the previous round.
    pub prev_quality: f64,
    pub current_bid: f64,
    pub last_won_slot: Option<usize>,
}

impl VmState {
    pub fn new(id: VmId, app: usize, server: &ServerSpec) -> Self {
        let pool = &server.pools[app];
        let valuation = vm_valuation(server, app);
        Self {
            id,
            app,
            valuation,
            vcpus: pool.vcpus,
            cpu_freq_ghz: pool.cpu_freq_ghz,
            compute_rate_mb_s: pool.compute_rate_mb_s,
            workload_mb: 0.0,
            last_assigned_mb: 0.0,
            load_per_capacity: 0.0,
            utilization: 1.0,
            quality: 0.0,
            prev_quality: 0.0,
            current_bid: valuation,
            last_won_slot: None,
        }
    }

    /// Recompute Γ, φ and θ from the current workload.
    pub fn refresh_quality(&mut self, slot_seconds: f64, gamma_min: f64, gamma_max: f64, min_freq_ghz: f64) -> Result<(), DomainError> {
        self.load_per_capacity = load_per_capacity(self.workload_mb, self.compute_rate_mb_s * slot_seconds)?;
        self.utilization = utilization(self.load_per_capacity, gamma_min, gamma_max);
        self.prev_quality = self.quality;
        self.quality = quality_score(self.vcpus, self.cpu_freq_ghz, min_freq_ghz, self.utilization)?;
        Ok(())
    }

    /// Record this slot's assignment (0 when idle).
    pub fn assign(&mut self, assigned_mb: f64, slot_seconds: f64) {
        let drained = self.compute_rate_mb_s * slot_seconds;
        self.workload_mb = advance_workload(self.last_assigned_mb, assigned_mb, drained);
        self.last_assigned_mb = assigned_mb;
    }
}

/// ρ·κ·W·f² with f in Hz, before calibration.
pub fn raw_valuation(server: &ServerSpec, app: usize) -> f64 {
    let pool = &server.pools[app];
    let f_hz = pool.cpu_freq_ghz * 1e9;
    server.price_scale * server.switched_capacitance * pool.vcpus as f64 * f_hz * f_hz
}

/// Calibrated valuation in $/VM-hour.
pub fn vm_valuation(server: &ServerSpec, app: usize) -> f64 {
    raw_valuation(server, app) * server.valuation_scale
}

/// Workload after one slot: the previous assignment drains by `capacity_mb`
/// (C·Δt) and the new assignment is added.
pub fn advance_workload(prev_assigned_mb: f64, assigned_mb: f64, capacity_mb: f64) -> f64 {
    (prev_assigned_mb - capacity_mb).max(0.0) + assigned_mb.max(0.0)
}

pub fn load_per_capacity(workload_mb: f64, capacity_mb: f64) -> Result<f64, DomainError> {
    if !(capacity_mb > 0.0) {
        return Err(DomainError::new("load_per_capacity", format!("C·Δt = {capacity_mb}")));
    }
    Ok(workload_mb / capacity_mb)
}

pub fn utilization(gamma: f64, gamma_min: f64, gamma_max: f64) -> f64 {
    if gamma >= gamma_max {
        0.0
    } else if gamma >= gamma_min {
        (gamma - gamma_max).abs() / gamma_max
    } else {
        1.0
    }
}

pub fn quality_score(vcpus: u32, cpu_freq_ghz: f64, min_freq_ghz: f64, utilization: f64) -> Result<f64, DomainError> {
    if !(min_freq_ghz > 0.0) {
        return Err(DomainError::new("quality_score", format!("minimum frequency {min_freq_ghz} GHz")));
    }
    Ok(vcpus as f64 * cpu_freq_ghz / min_freq_ghz * utilization)
}
