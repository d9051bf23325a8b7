//! Packet-queue and sickness-queue dynamics.
//!
//! Both occupancies live in `[0, 1]`. Updates clamp instead of failing and
//! report the clamp as an event: the packet queue running dry is a stall, the
//! sickness queue filling up is an overflow.

#![allow(clippy::too_many_arguments)]

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::shrink_factor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueueState {
    pub qp: f64,
    pub qs: f64,
}

/// Result of one occupancy update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueUpdate {
    pub value: f64,
    pub unclamped: f64,
    /// Stall for the packet queue, overflow for the sickness queue.
    pub event: bool,
}

pub fn update_packet_queue(
    qp_prev: f64,
    chunk_duration: f64,
    cp: f64,
    s_fov: f64,
    y_dof: bool,
    k_dof: f64,
    gamma: f64,
    bandwidth: f64,
) -> Result<QueueUpdate> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if !(gamma >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "gamma must be nonnegative, got {gamma}"
        )));
    }
    let drain = shrink_factor(s_fov, y_dof, k_dof) * gamma / bandwidth;
    let unclamped = qp_prev + chunk_duration / cp * (1.0 - drain);
    Ok(QueueUpdate {
        value: unclamped.clamp(0.0, 1.0),
        unclamped,
        event: unclamped < 0.0,
    })
}

/// Unrounded right-hand side of the bandwidth constraint, in megabits.
pub fn raw_bandwidth_budget(
    qp_prev: f64,
    bandwidth: f64,
    chunk_duration: f64,
    cp: f64,
    lambda: f64,
    s_fov: f64,
    y_dof: bool,
    k_dof: f64,
) -> f64 {
    bandwidth * (cp * (qp_prev - lambda) + chunk_duration)
        / (shrink_factor(s_fov, y_dof, k_dof) * chunk_duration)
}

/// Bandwidth budget for one slot in integer multiples of `bw_unit`,
/// rounded to nearest and floored at zero.
pub fn bandwidth_budget(
    qp_prev: f64,
    bandwidth: f64,
    chunk_duration: f64,
    cp: f64,
    lambda: f64,
    s_fov: f64,
    y_dof: bool,
    k_dof: f64,
    bw_unit: f64,
) -> Result<u64> {
    if !(bandwidth > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    if !(bw_unit > 0.0) {
        return Err(Error::InvalidInput(format!(
            "bandwidth unit must be positive, got {bw_unit}"
        )));
    }
    let raw = raw_bandwidth_budget(
        qp_prev,
        bandwidth,
        chunk_duration,
        cp,
        lambda,
        s_fov,
        y_dof,
        k_dof,
    );
    let units = (raw / bw_unit).round();
    Ok(if units > 0.0 { units as u64 } else { 0 })
}

/// Rotation speed term, normalised so that 100 deg/s on both axes gives 1.
pub fn normalized_rotation(omega_y: f64, omega_p: f64) -> f64 {
    omega_y.hypot(omega_p) / (100.0 * std::f64::consts::SQRT_2)
}

pub fn update_sickness_queue(
    qs_prev: f64,
    omega_y: f64,
    omega_p: f64,
    expected_flow: f64,
    s_fov: f64,
    y_dof: bool,
    k_dof: f64,
    cs: f64,
    omega: f64,
) -> Result<QueueUpdate> {
    if !(cs > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sickness capacity must be positive, got {cs}"
        )));
    }
    let stimulus = (normalized_rotation(omega_y, omega_p) + expected_flow)
        * shrink_factor(s_fov, y_dof, k_dof);
    let unclamped = qs_prev + (stimulus - omega) / cs;
    Ok(QueueUpdate {
        value: unclamped.clamp(0.0, 1.0),
        unclamped,
        event: unclamped >= 1.0,
    })
}
