//! Monte-Carlo campaign driver: many independent drops, each run through
//! the selected algorithms.
//!
//! Drop `i` uses the seed `derive_seed(root, i)`, so results do not depend
//! on how drops are spread over worker threads; outcomes are merged in drop
//! order.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gp::{gp_solve, GpResult, GpStatus};
use crate::lp::lp_data_solve;
use crate::netgen::{derive_seed, generate_drop};
use crate::se::{all_se, total_energy, PowerAllocation, SinrTargets};
use crate::solvers::{
    algorithm1_joint, algorithm2_data, classify_feasibility, DropLabel, SolverOptions, SolverResult,
};

pub const DEFAULT_DROPS: usize = 3000;
pub const DEFAULT_GP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    /// Joint pilot and data fixed point.
    Joint,
    /// Data-only fixed point, pilots at full power.
    Data,
    /// Global optimum of the joint problem.
    Gp,
    /// Global optimum of the data-only problem, pilots at full power.
    Lp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Joint, Algorithm::Data, Algorithm::Gp, Algorithm::Lp];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Joint => "joint",
            Algorithm::Data => "data",
            Algorithm::Gp => "gp",
            Algorithm::Lp => "lp",
        }
    }

    /// Parses a comma-separated list such as `joint,data,gp`.
    pub fn parse_list(s: &str) -> Result<Vec<Algorithm>> {
        let mut out: Vec<Algorithm> = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let a: Algorithm = part.parse()?;
            if !out.contains(&a) {
                out.push(a);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("no algorithms selected".into()));
        }
        Ok(out)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown algorithm {s:?} (expected joint, data, gp or lp)")))
    }
}

/// Outcome class of one algorithm on one drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    /// Fixed point serves every user.
    Feasible,
    /// Fixed point leaves some user unserved.
    Congested,
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Feasible => "feasible",
            RunStatus::Congested => "congested",
            RunStatus::Optimal => "optimal",
            RunStatus::Infeasible => "infeasible",
            RunStatus::NumericalFailure => "numerical_failure",
        }
    }

    /// Whether the run produced an allocation meant to be used.
    pub fn has_allocation(self) -> bool {
        matches!(self, RunStatus::Feasible | RunStatus::Congested | RunStatus::Optimal)
    }

    /// Whether the run says the targets cannot all be met.
    pub fn is_infeasible(self) -> bool {
        matches!(self, RunStatus::Congested | RunStatus::Infeasible)
    }
}

impl FromStr for RunStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            RunStatus::Feasible,
            RunStatus::Congested,
            RunStatus::Optimal,
            RunStatus::Infeasible,
            RunStatus::NumericalFailure,
        ]
        .into_iter()
        .find(|r| r.as_str() == s)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown status {s:?}")))
    }
}

impl From<DropLabel> for RunStatus {
    fn from(label: DropLabel) -> Self {
        match label {
            DropLabel::Feasible => RunStatus::Feasible,
            DropLabel::Congested => RunStatus::Congested,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunSpec {
    pub config: SystemConfig,
    pub num_drops: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    /// Worker threads; `None` uses rayon's default.
    pub workers: Option<usize>,
    pub solver: SolverOptions,
    pub gp_tol: f64,
}

impl RunSpec {
    pub fn new(config: SystemConfig, num_drops: usize, seed: u64, algorithms: Vec<Algorithm>) -> Self {
        RunSpec {
            config,
            num_drops,
            seed,
            algorithms,
            workers: None,
            solver: SolverOptions::default(),
            gp_tol: DEFAULT_GP_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.num_drops == 0 {
            return Err(Error::InvalidArgument("num_drops must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::InvalidArgument("no algorithms selected".into()));
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// One algorithm's result on one drop.
#[derive(Debug, Clone)]
pub struct AlgoRun {
    pub algorithm: Algorithm,
    pub status: RunStatus,
    /// All zeros when `status` carries no allocation.
    pub allocation: PowerAllocation,
    pub per_user_se: Vec<f64>,
    pub served: Vec<bool>,
    pub iterations: usize,
    pub converged: bool,
    pub energy_trace: Vec<f64>,
    pub product_trace: Vec<Vec<f64>>,
    /// Optimal objective for the global solvers.
    pub objective: Option<f64>,
}

impl AlgoRun {
    fn from_fixed_point(algorithm: Algorithm, res: SolverResult) -> Self {
        AlgoRun {
            algorithm,
            status: res.label.into(),
            allocation: res.allocation,
            per_user_se: res.per_user_se,
            served: res.served,
            iterations: res.iterations,
            converged: res.converged,
            energy_trace: res.energy_trace,
            product_trace: res.product_trace,
            objective: None,
        }
    }

    fn from_global(
        algorithm: Algorithm,
        res: GpResult,
        net: &crate::netgen::NetworkRealization,
        targets: &SinrTargets,
        spec: &RunSpec,
    ) -> Self {
        let cfg = &spec.config;
        let status = match res.status {
            GpStatus::Optimal => RunStatus::Optimal,
            GpStatus::Infeasible => RunStatus::Infeasible,
            GpStatus::NumericalFailure => RunStatus::NumericalFailure,
        };
        let (allocation, per_user_se, served, objective) = if status == RunStatus::Optimal {
            let se = all_se(net, &res.allocation, cfg);
            let served = classify_feasibility(&se, targets, spec.solver.served_slack).served;
            (res.allocation, se, served, Some(res.objective))
        } else {
            let n = cfg.num_users();
            (PowerAllocation::zeros(n), vec![0.0; n], vec![false; n], None)
        };
        AlgoRun {
            algorithm,
            status,
            allocation,
            per_user_se,
            served,
            iterations: 0,
            converged: status == RunStatus::Optimal,
            energy_trace: Vec::new(),
            product_trace: Vec::new(),
            objective,
        }
    }

    pub fn total_energy(&self, cfg: &SystemConfig) -> f64 {
        total_energy(&self.allocation, cfg)
    }
}

#[derive(Debug, Clone)]
pub struct DropOutcome {
    pub drop: usize,
    /// Whether the joint targets are achievable on this drop: the global
    /// solver's verdict when it ran cleanly, else the joint fixed point's,
    /// else the first algorithm's.
    pub label: DropLabel,
    pub runs: Vec<AlgoRun>,
}

impl DropOutcome {
    pub fn run(&self, algorithm: Algorithm) -> Option<&AlgoRun> {
        self.runs.iter().find(|r| r.algorithm == algorithm)
    }
}

fn reference_label(runs: &[AlgoRun]) -> DropLabel {
    let find = |a| runs.iter().find(|r| r.algorithm == a);
    let from_status = |s: RunStatus| if s.is_infeasible() { DropLabel::Congested } else { DropLabel::Feasible };
    if let Some(gp) = find(Algorithm::Gp).filter(|r| r.status != RunStatus::NumericalFailure) {
        return from_status(gp.status);
    }
    if let Some(joint) = find(Algorithm::Joint) {
        return from_status(joint.status);
    }
    runs.iter()
        .find(|r| r.status != RunStatus::NumericalFailure)
        .map_or(DropLabel::Congested, |r| from_status(r.status))
}

/// Runs every requested algorithm on drop `index`.
pub fn run_drop(spec: &RunSpec, targets: &SinrTargets, index: usize) -> Result<DropOutcome> {
    let cfg = &spec.config;
    let net = generate_drop(cfg, derive_seed(spec.seed, index as u64))?;
    let mut runs = Vec::with_capacity(spec.algorithms.len());
    let mut algos = spec.algorithms.clone();
    algos.sort();
    for algo in algos {
        let run = match algo {
            Algorithm::Joint => {
                AlgoRun::from_fixed_point(algo, algorithm1_joint(&net, targets, cfg, &spec.solver)?)
            }
            Algorithm::Data => AlgoRun::from_fixed_point(
                algo,
                algorithm2_data(&net, &cfg.max_power, targets, cfg, &spec.solver)?,
            ),
            Algorithm::Gp => {
                AlgoRun::from_global(algo, gp_solve(&net, targets, cfg, spec.gp_tol)?, &net, targets, spec)
            }
            Algorithm::Lp => AlgoRun::from_global(
                algo,
                lp_data_solve(&net, &cfg.max_power, targets, cfg, spec.gp_tol)?,
                &net,
                targets,
                spec,
            ),
        };
        runs.push(run);
    }
    Ok(DropOutcome {
        drop: index,
        label: reference_label(&runs),
        runs,
    })
}

/// Runs all drops of `spec`, in parallel, returning outcomes in drop order.
pub fn run_campaign(spec: &RunSpec) -> Result<Vec<DropOutcome>> {
    spec.validate()?;
    let targets = SinrTargets::from_config(&spec.config)?;
    let work = || {
        (0..spec.num_drops)
            .into_par_iter()
            .map(|i| run_drop(spec, &targets, i))
            .collect::<Result<Vec<_>>>()
    };
    match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("cannot start {n} workers: {e}")))?
            .install(work),
        None => work(),
    }
}
