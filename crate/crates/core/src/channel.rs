//! Uplink model: log-distance path loss and Shannon rate over an
//! interference-free OFDMA share.

use crate::error::DomainError;
use crate::scenario::ChannelParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance_m: f64,
    pub loss_db: f64,
    pub rate_mbps: f64,
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Transmission loss in dB. The carrier enters in GHz.
pub fn path_loss_db(distance_m: f64, channel: &ChannelParams) -> Result<f64, DomainError> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(DomainError::new("path_loss_db", format!("distance {distance_m} m")));
    }
    Ok(10.0 * channel.mu_d * distance_m.log10()
        + channel.mu_0
        + 10.0 * channel.mu_f * channel.carrier_ghz.log10())
}

/// Rate in Mbps for bandwidth in MHz; SNR uses linear watts throughout.
pub fn rate_from_loss(tx_power_dbm: f64, loss_db: f64, channel: &ChannelParams) -> Result<f64, DomainError> {
    if !tx_power_dbm.is_finite() || !loss_db.is_finite() || !channel.noise_dbm.is_finite() {
        return Err(DomainError::new("uplink_rate_mbps", "non-finite power, loss or noise"));
    }
    let gain = 10f64.powf(-loss_db / 10.0);
    let snr = dbm_to_watts(tx_power_dbm) * gain / dbm_to_watts(channel.noise_dbm);
    Ok(channel.bandwidth_mhz * (1.0 + snr).log2())
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

pub fn link_budget(
    tx_power_dbm: f64,
    ue_pos: [f64; 2],
    server_pos: [f64; 2],
    channel: &ChannelParams,
) -> Result<LinkBudget, DomainError> {
    if ue_pos.iter().chain(server_pos.iter()).any(|c| !c.is_finite()) {
        return Err(DomainError::new("uplink_rate_mbps", "non-finite position"));
    }
    let distance_m = distance(ue_pos, server_pos);
    let loss_db = path_loss_db(distance_m, channel)?;
    let rate_mbps = rate_from_loss(tx_power_dbm, loss_db, channel)?;
    Ok(LinkBudget { distance_m, loss_db, rate_mbps })
}

pub fn uplink_rate_mbps(
    tx_power_dbm: f64,
    ue_pos: [f64; 2],
    server_pos: [f64; 2],
    channel: &ChannelParams,
) -> Result<f64, DomainError> {
    link_budget(tx_power_dbm, ue_pos, server_pos, channel).map(|l| l.rate_mbps)
}
