//! Closed-form uplink SINR/SE under MRC with MMSE estimation and pilot
//! reuse, energy accounting, and the joint / data-only interference
//! functions built from it.
//!
//! User `k` of every cell shares pilot `k`, so only same-index users enter
//! the pilot-contamination sums.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::netgen::NetworkRealization;

/// Pilot and data powers of all L·K users, watts, indexed `l * K + k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    pub pilot: Vec<f64>,
    pub data: Vec<f64>,
}

impl PowerAllocation {
    pub fn new(pilot: Vec<f64>, data: Vec<f64>) -> Self {
        debug_assert_eq!(pilot.len(), data.len());
        PowerAllocation { pilot, data }
    }

    pub fn zeros(num_users: usize) -> Self {
        PowerAllocation::new(vec![0.0; num_users], vec![0.0; num_users])
    }

    /// Every user at its budget on both pilot and data.
    pub fn full(cfg: &SystemConfig) -> Self {
        PowerAllocation::new(cfg.max_power.clone(), cfg.max_power.clone())
    }

    pub fn len(&self) -> usize {
        self.pilot.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pilot.is_empty()
    }

    pub fn within_budget(&self, cfg: &SystemConfig) -> bool {
        self.pilot
            .iter()
            .zip(&self.data)
            .zip(&cfg.max_power)
            .all(|((a, b), m)| *a >= 0.0 && *b >= 0.0 && a <= m && b <= m)
    }
}

/// Requested SE per user together with the equivalent SINR threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrTargets {
    pub se: Vec<f64>,
    pub sinr: Vec<f64>,
}

impl SinrTargets {
    pub fn from_config(cfg: &SystemConfig) -> Result<Self> {
        let sinr = cfg
            .se_target
            .iter()
            .map(|&xi| target_sinr(xi, cfg.coherence_length, cfg.pilot_length))
            .collect::<Result<_>>()?;
        Ok(SinrTargets {
            se: cfg.se_target.clone(),
            sinr,
        })
    }
}

fn check_lengths(coherence: usize, pilot: usize) -> Result<()> {
    if pilot == 0 || pilot >= coherence {
        return Err(Error::InvalidArgument(format!(
            "need 0 < pilot_length < coherence_length, got {pilot} and {coherence}"
        )));
    }
    Ok(())
}

/// SINR threshold `2^(ξ·τ_c/(τ_c-τ_p)) - 1` equivalent to an SE target ξ.
pub fn target_sinr(se: f64, coherence: usize, pilot: usize) -> Result<f64> {
    check_lengths(coherence, pilot)?;
    if !(se >= 0.0 && se.is_finite()) {
        return Err(Error::InvalidArgument(format!("SE target must be >= 0, got {se}")));
    }
    let exponent = se * coherence as f64 / (coherence - pilot) as f64;
    Ok(exponent.exp2() - 1.0)
}

/// Ergodic SE `(1 - τ_p/τ_c)·log2(1 + SINR)`.
pub fn ergodic_se(sinr: f64, coherence: usize, pilot: usize) -> Result<f64> {
    check_lengths(coherence, pilot)?;
    if !(sinr >= 0.0) {
        return Err(Error::InvalidArgument(format!("SINR must be >= 0, got {sinr}")));
    }
    Ok((1.0 - pilot as f64 / coherence as f64) * sinr.ln_1p() / std::f64::consts::LN_2)
}

/// The pieces of the SINR expression for user `(cell, user)` at its own BS.
#[derive(Debug, Clone, Copy)]
struct Terms {
    /// M·τ_p·(β_lk^l)², the signal gain without powers.
    gain: f64,
    /// Denominator of the SINR.
    denom: f64,
}

fn terms(
    net: &NetworkRealization,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    cell: usize,
    user: usize,
) -> Terms {
    let (num_cells, k_users) = (cfg.num_cells, cfg.users_per_cell);
    let tau_p = cfg.pilot_length as f64;
    let m = cfg.num_antennas as f64;
    let noise = cfg.noise_power;

    let mut pilot_sum = 0.0;
    let mut contamination = 0.0;
    for src in 0..num_cells {
        let b = net.beta(src, user, cell);
        let u = src * k_users + user;
        pilot_sum += b * alloc.pilot[u];
        if src != cell {
            contamination += b * b * alloc.data[u] * alloc.pilot[u];
        }
    }
    let mut data_sum = 0.0;
    for src in 0..num_cells {
        for k in 0..k_users {
            data_sum += alloc.data[src * k_users + k] * net.beta(src, k, cell);
        }
    }
    let own = net.beta(cell, user, cell);
    let denom =
        (tau_p * pilot_sum + noise) * (data_sum + noise) + m * tau_p * contamination;
    Terms {
        gain: m * own * own * tau_p,
        denom,
    }
}

/// Closed-form effective SINR of user `user` in cell `cell`.
pub fn effective_sinr(
    net: &NetworkRealization,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    cell: usize,
    user: usize,
) -> f64 {
    let t = terms(net, alloc, cfg, cell, user);
    let u = cfg.user_index(cell, user);
    t.gain * alloc.data[u] * alloc.pilot[u] / t.denom
}

pub fn all_sinr(net: &NetworkRealization, alloc: &PowerAllocation, cfg: &SystemConfig) -> Vec<f64> {
    (0..cfg.num_cells)
        .flat_map(|l| (0..cfg.users_per_cell).map(move |k| (l, k)))
        .map(|(l, k)| effective_sinr(net, alloc, cfg, l, k))
        .collect()
}

pub fn all_se(net: &NetworkRealization, alloc: &PowerAllocation, cfg: &SystemConfig) -> Vec<f64> {
    let prelog = 1.0 - cfg.pilot_length as f64 / cfg.coherence_length as f64;
    all_sinr(net, alloc, cfg)
        .into_iter()
        .map(|s| prelog * s.ln_1p() / std::f64::consts::LN_2)
        .collect()
}

/// Energy spent in cell `cell` per coherence interval, watt·symbols.
pub fn cell_energy(alloc: &PowerAllocation, cfg: &SystemConfig, cell: usize) -> f64 {
    let k_users = cfg.users_per_cell;
    let range = cell * k_users..(cell + 1) * k_users;
    let pilot: f64 = alloc.pilot[range.clone()].iter().sum();
    let data: f64 = alloc.data[range].iter().sum();
    cfg.pilot_length as f64 * pilot + cfg.data_length() as f64 * data
}

pub fn total_energy(alloc: &PowerAllocation, cfg: &SystemConfig) -> f64 {
    (0..cfg.num_cells).map(|l| cell_energy(alloc, cfg, l)).sum()
}

/// Data-phase energy `(τ_c - τ_p)·Σ p`.
pub fn data_energy(alloc: &PowerAllocation, cfg: &SystemConfig) -> f64 {
    cfg.data_length() as f64 * alloc.data.iter().sum::<f64>()
}

/// Joint interference function: the smallest pilot·data product that meets
/// the SINR target of `(cell, user)` with everything else fixed, W².
///
/// `pilot[u]·data[u] >= I` holds exactly when the user's SINR target holds.
pub fn joint_interference(
    net: &NetworkRealization,
    alloc: &PowerAllocation,
    targets: &SinrTargets,
    cfg: &SystemConfig,
    cell: usize,
    user: usize,
) -> f64 {
    let t = terms(net, alloc, cfg, cell, user);
    t.denom / (t.gain / targets.sinr[cfg.user_index(cell, user)])
}

/// Standard interference function for data-only control with the pilot
/// power of `(cell, user)` held fixed, watts.
pub fn data_interference(
    net: &NetworkRealization,
    alloc: &PowerAllocation,
    targets: &SinrTargets,
    cfg: &SystemConfig,
    cell: usize,
    user: usize,
) -> Result<f64> {
    let u = cfg.user_index(cell, user);
    let pilot = alloc.pilot[u];
    if !(pilot > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "data interference needs a positive pilot power for user {u}, got {pilot}"
        )));
    }
    Ok(joint_interference(net, alloc, targets, cfg, cell, user) / pilot)
}
