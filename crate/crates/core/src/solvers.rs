//! Fixed-point power control.
//!
//! [`algorithm1_joint`] updates pilot and data powers together: each user
//! asks for the pilot·data product its joint interference function demands
//! and splits it between pilot and data at minimum energy. Users whose
//! demand exceeds `P_max²` sit at full power, which is what lets the
//! iteration settle on a useful point when the SE targets are jointly
//! infeasible. [`algorithm2_data`] is the data-only counterpart with pilots
//! held fixed.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::netgen::NetworkRealization;
use crate::se::{
    all_se, data_energy, data_interference, joint_interference, total_energy, PowerAllocation,
    SinrTargets,
};

/// Grid resolution of [`SubproblemMode::Grid`], as a fraction of `P_max`.
pub const SUBPROBLEM_GRID_STEPS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemMode {
    ClosedForm,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the relative energy change γ(n) drops to this value.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub subproblem_mode: SubproblemMode,
    /// A user counts as served when its SE is at least `(1 - slack)·ξ`.
    pub served_slack: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 0.01,
            max_iterations: 500,
            subproblem_mode: SubproblemMode::ClosedForm,
            served_slack: 1e-3,
        }
    }
}

impl SolverOptions {
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        self.tolerance = tolerance;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(self.served_slack >= 0.0) {
            return Err(Error::InvalidArgument(format!("bad solver options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropLabel {
    Feasible,
    Congested,
}

impl DropLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DropLabel::Feasible => "feasible",
            DropLabel::Congested => "congested",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Feasibility {
    pub served: Vec<bool>,
    pub label: DropLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverResult {
    pub allocation: PowerAllocation,
    pub per_user_se: Vec<f64>,
    pub served: Vec<bool>,
    pub label: DropLabel,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after each iteration, starting with the initial point. Total
    /// pilot+data energy for the joint algorithm, data energy for the
    /// data-only one.
    pub energy_trace: Vec<f64>,
    /// γ(n) for n = 1, 2, ...
    pub gamma_trace: Vec<f64>,
    /// Pilot·data product of every user after each iteration, starting with
    /// the initial point.
    pub product_trace: Vec<Vec<f64>>,
}

impl SolverResult {
    pub fn total_energy(&self, cfg: &SystemConfig) -> f64 {
        total_energy(&self.allocation, cfg)
    }
}

/// Splits a required pilot·data product `product` between pilot and data at
/// minimum energy `τ_p·p̂ + (τ_c-τ_p)·p`, subject to both powers staying
/// within `max_power` and the energy not exceeding `energy_cap`.
///
/// Returns `Ok(None)` when the cheapest admissible split would exceed the cap.
pub fn solve_subproblem(
    product: f64,
    pilot_length: usize,
    coherence_length: usize,
    max_power: f64,
    energy_cap: f64,
) -> Result<Option<(f64, f64)>> {
    check_subproblem(product, pilot_length, coherence_length, max_power)?;
    if product == 0.0 {
        return Ok(Some((0.0, 0.0)));
    }
    let tau_p = pilot_length as f64;
    let tau_d = (coherence_length - pilot_length) as f64;
    // Objective τ_p·p̂ + τ_d·I/p̂ is unimodal in p̂; clamp its stationary point.
    let floor = product / max_power;
    let stationary = (tau_d * product / tau_p).sqrt();
    let (pilot, data) = if stationary >= max_power {
        (max_power, floor)
    } else if stationary <= floor {
        (floor, max_power)
    } else {
        (stationary, product / stationary)
    };
    let data = data.min(max_power);
    if tau_p * pilot + tau_d * data > energy_cap {
        return Ok(None);
    }
    Ok(Some((pilot, data)))
}

/// Grid-search variant of [`solve_subproblem`]: pilot power on a uniform grid
/// of step `max_power / SUBPROBLEM_GRID_STEPS`, data power from the product.
pub fn solve_subproblem_grid(
    product: f64,
    pilot_length: usize,
    coherence_length: usize,
    max_power: f64,
    energy_cap: f64,
) -> Result<Option<(f64, f64)>> {
    check_subproblem(product, pilot_length, coherence_length, max_power)?;
    if product == 0.0 {
        return Ok(Some((0.0, 0.0)));
    }
    let tau_p = pilot_length as f64;
    let tau_d = (coherence_length - pilot_length) as f64;
    let step = max_power / SUBPROBLEM_GRID_STEPS as f64;
    let mut best: Option<(f64, f64, f64)> = None;
    for j in 1..=SUBPROBLEM_GRID_STEPS {
        let pilot = if j == SUBPROBLEM_GRID_STEPS { max_power } else { j as f64 * step };
        let data = product / pilot;
        if data > max_power {
            continue;
        }
        let cost = tau_p * pilot + tau_d * data;
        if best.map_or(true, |(c, _, _)| cost < c) {
            best = Some((cost, pilot, data));
        }
    }
    Ok(best
        .filter(|(cost, _, _)| *cost <= energy_cap)
        .map(|(_, pilot, data)| (pilot, data)))
}

fn check_subproblem(
    product: f64,
    pilot_length: usize,
    coherence_length: usize,
    max_power: f64,
) -> Result<()> {
    if pilot_length == 0 || pilot_length >= coherence_length {
        return Err(Error::InvalidArgument(format!(
            "need 0 < pilot_length < coherence_length, got {pilot_length}, {coherence_length}"
        )));
    }
    if !(max_power > 0.0) {
        return Err(Error::InvalidArgument(format!("max power must be positive, got {max_power}")));
    }
    if !(product >= 0.0 && product <= max_power * max_power) {
        return Err(Error::InvalidArgument(format!(
            "required product {product} outside [0, {}]",
            max_power * max_power
        )));
    }
    Ok(())
}

fn relative_change(current: f64, previous: f64) -> f64 {
    if previous > 0.0 {
        (current - previous).abs() / previous
    } else if current == previous {
        0.0
    } else {
        f64::INFINITY
    }
}

/// User served iff its SE reaches `(1 - slack)` of the request; the drop is
/// congested iff any user is left unserved.
pub fn classify_feasibility(per_user_se: &[f64], targets: &SinrTargets, slack: f64) -> Feasibility {
    let served: Vec<bool> = per_user_se
        .iter()
        .zip(&targets.se)
        .map(|(se, xi)| *se >= (1.0 - slack) * xi)
        .collect();
    let label = if served.iter().all(|s| *s) {
        DropLabel::Feasible
    } else {
        DropLabel::Congested
    };
    Feasibility { served, label }
}

fn products(alloc: &PowerAllocation) -> Vec<f64> {
    alloc.pilot.iter().zip(&alloc.data).map(|(a, b)| a * b).collect()
}

#[allow(clippy::too_many_arguments)]
fn finish(
    net: &NetworkRealization,
    cfg: &SystemConfig,
    targets: &SinrTargets,
    opts: &SolverOptions,
    allocation: PowerAllocation,
    iterations: usize,
    converged: bool,
    energy_trace: Vec<f64>,
    gamma_trace: Vec<f64>,
    product_trace: Vec<Vec<f64>>,
) -> SolverResult {
    let per_user_se = all_se(net, &allocation, cfg);
    let Feasibility { served, label } =
        classify_feasibility(&per_user_se, targets, opts.served_slack);
    SolverResult {
        allocation,
        per_user_se,
        served,
        label,
        iterations,
        converged,
        energy_trace,
        gamma_trace,
        product_trace,
    }
}

/// Joint pilot and data power control by alternating per-user updates.
///
/// Starts from full power. Each iteration visits users in `(cell, user)`
/// order; every update sees the latest powers of the users before it.
pub fn algorithm1_joint(
    net: &NetworkRealization,
    targets: &SinrTargets,
    cfg: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    opts.validate()?;
    let (tau_p, tau_c) = (cfg.pilot_length, cfg.coherence_length);
    let tau_d = cfg.data_length() as f64;
    let mut alloc = PowerAllocation::full(cfg);
    let mut previous = total_energy(&alloc, cfg);
    let mut energy_trace = vec![previous];
    let mut gamma_trace = Vec::new();
    let mut product_trace = vec![products(&alloc)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        for l in 0..cfg.num_cells {
            for k in 0..cfg.users_per_cell {
                let u = cfg.user_index(l, k);
                let cap = cfg.max_power[u];
                let demand = joint_interference(net, &alloc, targets, cfg, l, k);
                if demand > cap * cap {
                    alloc.pilot[u] = cap;
                    alloc.data[u] = cap;
                    continue;
                }
                let spent = tau_p as f64 * alloc.pilot[u] + tau_d * alloc.data[u];
                let split = match opts.subproblem_mode {
                    SubproblemMode::ClosedForm => {
                        solve_subproblem(demand, tau_p, tau_c, cap, spent)?
                    }
                    SubproblemMode::Grid => solve_subproblem_grid(demand, tau_p, tau_c, cap, spent)?,
                };
                if let Some((pilot, data)) = split {
                    alloc.pilot[u] = pilot;
                    alloc.data[u] = data;
                }
            }
        }
        let energy = total_energy(&alloc, cfg);
        let gamma = relative_change(energy, previous);
        energy_trace.push(energy);
        gamma_trace.push(gamma);
        product_trace.push(products(&alloc));
        previous = energy;
        if gamma <= opts.tolerance {
            converged = true;
            break;
        }
    }
    Ok(finish(
        net,
        cfg,
        targets,
        opts,
        alloc,
        iterations,
        converged,
        energy_trace,
        gamma_trace,
        product_trace,
    ))
}

/// Data-only power control with fixed pilot powers: the synchronous update
/// `p(n) = min(I_d(p(n-1)), P_max)` from full data power.
pub fn algorithm2_data(
    net: &NetworkRealization,
    fixed_pilots: &[f64],
    targets: &SinrTargets,
    cfg: &SystemConfig,
    opts: &SolverOptions,
) -> Result<SolverResult> {
    opts.validate()?;
    let n = cfg.num_users();
    if fixed_pilots.len() != n {
        return Err(Error::InvalidArgument(format!(
            "expected {n} pilot powers, got {}",
            fixed_pilots.len()
        )));
    }
    if let Some(p) = fixed_pilots.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!("fixed pilot powers must be positive, got {p}")));
    }
    let mut alloc = PowerAllocation::new(fixed_pilots.to_vec(), cfg.max_power.clone());
    let mut previous = data_energy(&alloc, cfg);
    let mut energy_trace = vec![previous];
    let mut gamma_trace = Vec::new();
    let mut product_trace = vec![products(&alloc)];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let mut next = Vec::with_capacity(n);
        for l in 0..cfg.num_cells {
            for k in 0..cfg.users_per_cell {
                let u = cfg.user_index(l, k);
                let demand = data_interference(net, &alloc, targets, cfg, l, k)?;
                next.push(demand.min(cfg.max_power[u]));
            }
        }
        alloc.data = next;
        let energy = data_energy(&alloc, cfg);
        let gamma = relative_change(energy, previous);
        energy_trace.push(energy);
        gamma_trace.push(gamma);
        product_trace.push(products(&alloc));
        previous = energy;
        if gamma <= opts.tolerance {
            converged = true;
            break;
        }
    }
    Ok(finish(
        net,
        cfg,
        targets,
        opts,
        alloc,
        iterations,
        converged,
        energy_trace,
        gamma_trace,
        product_trace,
    ))
}
