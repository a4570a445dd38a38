//! Global minimum-energy allocation through the log-domain geometric program.
//!
//! With `x = log(p̂/P_max)` and `y = log(p/P_max)` the energy becomes a
//! log-sum-exp and every SINR requirement `I(p̂, p) / (p̂·p) <= 1` a
//! log-sum-exp of monomials, both convex. [`gp_solve`] runs a two-phase
//! log-barrier Newton method on that program: phase 1 minimizes the largest
//! constraint violation to decide feasibility, phase 2 minimizes energy.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::netgen::NetworkRealization;
use crate::se::{effective_sinr, total_energy, PowerAllocation, SinrTargets};

/// Smallest power the barrier may reach, relative to `P_max`.
pub const MIN_RELATIVE_POWER: f64 = 1e-12;

const BARRIER_GROWTH: f64 = 10.0;
const TARGET_GAP: f64 = 1e-9;
const NEWTON_DECREMENT_TOL: f64 = 1e-10;
const MAX_NEWTON_STEPS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GpStatus {
    Optimal,
    Infeasible,
    NumericalFailure,
}

impl GpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            GpStatus::Optimal => "optimal",
            GpStatus::Infeasible => "infeasible",
            GpStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpResult {
    pub status: GpStatus,
    /// The optimum when `status` is optimal. Otherwise the last point the
    /// method reached (the least-violating point for infeasible drops).
    pub allocation: PowerAllocation,
    /// Energy of `allocation`, watt·symbols.
    pub objective: f64,
    pub kkt_residual: f64,
    /// Smallest largest-constraint-violation found by the feasibility phase,
    /// in log units. Positive above `tol` means infeasible. When the phase
    /// stops early on a strictly feasible point this is an upper bound.
    pub phase1_value: Option<f64>,
}

/// Sum of monomials `exp(log_coef + Σ e_i·z_i)`, evaluated in log form.
#[derive(Debug, Clone, Default)]
struct Posynomial {
    log_coef: Vec<f64>,
    exponents: Vec<Vec<(usize, f64)>>,
}

impl Posynomial {
    fn push(&mut self, log_coef: f64, mut exps: Vec<(usize, f64)>) {
        exps.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(exps.len());
        for (i, e) in exps {
            match merged.last_mut() {
                Some(last) if last.0 == i => last.1 += e,
                _ => merged.push((i, e)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        self.log_coef.push(log_coef);
        self.exponents.push(merged);
    }

    fn exponent_values(&self, z: &[f64]) -> Vec<f64> {
        self.log_coef
            .iter()
            .zip(&self.exponents)
            .map(|(c, exps)| c + exps.iter().map(|(i, e)| e * z[*i]).sum::<f64>())
            .collect()
    }

    fn value(&self, z: &[f64]) -> f64 {
        log_sum_exp(&self.exponent_values(z))
    }

    /// Adds `weight·∇` and `weight·∇²` of the log-sum-exp to `grad`/`hess`.
    fn accumulate(&self, z: &[f64], weight: f64, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>) {
        let vals = self.exponent_values(z);
        let lse = log_sum_exp(&vals);
        let mut g = DVector::zeros(grad.len());
        for (v, exps) in vals.iter().zip(&self.exponents) {
            let w = (v - lse).exp();
            for &(i, ei) in exps {
                g[i] += w * ei;
                for &(j, ej) in exps {
                    hess[(i, j)] += weight * w * ei * ej;
                }
            }
        }
        for i in 0..g.len() {
            if g[i] == 0.0 {
                continue;
            }
            for j in 0..g.len() {
                hess[(i, j)] -= weight * g[i] * g[j];
            }
        }
        grad.axpy(weight, &g, 1.0);
    }
}

fn log_sum_exp(vals: &[f64]) -> f64 {
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + vals.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// The log-domain program of one drop. Variables are ordered as all pilot
/// coordinates `x_u` followed by all data coordinates `y_u`, user index
/// `u = cell·K + user`.
#[derive(Debug, Clone)]
pub struct GpProblem {
    num_users: usize,
    max_power: Vec<f64>,
    objective: Posynomial,
    constraints: Vec<Posynomial>,
}

impl GpProblem {
    pub fn new(net: &NetworkRealization, targets: &SinrTargets, cfg: &SystemConfig) -> Result<Self> {
        cfg.validate()?;
        let n = cfg.num_users();
        if net.num_users() != n || net.num_cells != cfg.num_cells {
            return Err(Error::InvalidArgument(format!(
                "drop has {} users in {} cells, config expects {n} in {}",
                net.num_users(),
                net.num_cells,
                cfg.num_cells
            )));
        }
        let (num_cells, k_users) = (cfg.num_cells, cfg.users_per_cell);
        let tau_p = cfg.pilot_length as f64;
        let tau_d = cfg.data_length() as f64;
        let m = cfg.num_antennas as f64;
        let noise = cfg.noise_power;
        let lp: Vec<f64> = cfg.max_power.iter().map(|p| p.ln()).collect();
        let pilot = |u: usize| u;
        let data = |u: usize| n + u;

        let mut objective = Posynomial::default();
        for u in 0..n {
            objective.push((tau_p * cfg.max_power[u]).ln(), vec![(pilot(u), 1.0)]);
            objective.push((tau_d * cfg.max_power[u]).ln(), vec![(data(u), 1.0)]);
        }

        let mut constraints = Vec::with_capacity(n);
        for l in 0..num_cells {
            for k in 0..k_users {
                let u = l * k_users + k;
                let own = net.beta(l, k, l);
                let scale = targets.sinr[u] / (m * own * own * tau_p);
                let mut posy = Posynomial::default();
                // A physical monomial c·Π p^e in normalized coordinates, divided
                // by the user's own pilot·data product.
                let mut add = |coef: f64, factors: &[(usize, usize)]| {
                    let mut exps = vec![(pilot(u), -1.0), (data(u), -1.0)];
                    let mut log_coef = (scale * coef).ln() - lp[u] - lp[u];
                    for &(var, who) in factors {
                        exps.push((var, 1.0));
                        log_coef += lp[who];
                    }
                    posy.push(log_coef, exps);
                };
                for src in 0..num_cells {
                    let bp = net.beta(src, k, l);
                    let ip = src * k_users + k;
                    for s2 in 0..num_cells {
                        for k2 in 0..k_users {
                            let v = s2 * k_users + k2;
                            let bv = net.beta(s2, k2, l);
                            add(tau_p * bp * bv, &[(pilot(ip), ip), (data(v), v)]);
                        }
                    }
                    add(tau_p * bp * noise, &[(pilot(ip), ip)]);
                    if src != l {
                        add(m * tau_p * bp * bp, &[(pilot(ip), ip), (data(ip), ip)]);
                    }
                }
                for s2 in 0..num_cells {
                    for k2 in 0..k_users {
                        let v = s2 * k_users + k2;
                        add(noise * net.beta(s2, k2, l), &[(data(v), v)]);
                    }
                }
                add(noise * noise, &[]);
                constraints.push(posy);
            }
        }
        Ok(GpProblem {
            num_users: n,
            max_power: cfg.max_power.clone(),
            objective,
            constraints,
        })
    }

    pub fn num_variables(&self) -> usize {
        2 * self.num_users
    }

    /// Log of the total energy at `z`.
    pub fn objective(&self, z: &[f64]) -> f64 {
        self.objective.value(z)
    }

    /// `log(I_u / (p̂_u·p_u))` at `z`; the SINR target of user `u` holds iff
    /// this is `<= 0`.
    pub fn constraint(&self, user: usize, z: &[f64]) -> f64 {
        self.constraints[user].value(z)
    }

    pub fn to_allocation(&self, z: &[f64]) -> PowerAllocation {
        let n = self.num_users;
        let pw = |i: usize, u: usize| (self.max_power[u] * z[i].min(0.0).exp()).min(self.max_power[u]);
        PowerAllocation::new((0..n).map(|u| pw(u, u)).collect(), (0..n).map(|u| pw(n + u, u)).collect())
    }

    pub fn to_log(&self, alloc: &PowerAllocation) -> Vec<f64> {
        let mut z: Vec<f64> = alloc.pilot.iter().zip(&self.max_power).map(|(p, m)| (p / m).ln()).collect();
        z.extend(alloc.data.iter().zip(&self.max_power).map(|(p, m)| (p / m).ln()));
        z
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Phase {
    /// Variables `(z, s)`: minimize `s` subject to `g_u(z) <= s`.
    Feasibility,
    /// Variables `z`: minimize energy subject to `g_u(z) <= relax`.
    Optimality { relax: f64 },
}

struct Barrier<'a> {
    problem: &'a GpProblem,
    phase: Phase,
    t: f64,
    lower: f64,
}

impl Barrier<'_> {
    fn dim(&self) -> usize {
        match self.phase {
            Phase::Feasibility => self.problem.num_variables() + 1,
            Phase::Optimality { .. } => self.problem.num_variables(),
        }
    }

    fn num_inequalities(&self) -> usize {
        self.problem.num_users + 2 * self.problem.num_variables()
    }

    fn bound(&self, v: &[f64]) -> f64 {
        match self.phase {
            Phase::Feasibility => v[self.problem.num_variables()],
            Phase::Optimality { relax } => relax,
        }
    }

    /// Barrier objective, or `None` outside the strict interior.
    fn value(&self, v: &[f64]) -> Option<f64> {
        let nz = self.problem.num_variables();
        let z = &v[..nz];
        let mut total = match self.phase {
            Phase::Feasibility => self.t * v[nz],
            Phase::Optimality { .. } => self.t * self.problem.objective(z),
        };
        for &zi in z {
            if !(zi < 0.0 && zi > self.lower) {
                return None;
            }
            total -= (-zi).ln() + (zi - self.lower).ln();
        }
        let bound = self.bound(v);
        for c in &self.problem.constraints {
            let slack = bound - c.value(z);
            if !(slack > 0.0) {
                return None;
            }
            total -= slack.ln();
        }
        total.is_finite().then_some(total)
    }

    fn derivatives(&self, v: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let nz = self.problem.num_variables();
        let dim = self.dim();
        let z = &v[..nz];
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        match self.phase {
            Phase::Feasibility => grad[nz] += self.t,
            Phase::Optimality { .. } => {
                self.problem.objective.accumulate(z, self.t, &mut grad, &mut hess);
            }
        }
        for (i, &zi) in z.iter().enumerate() {
            let (a, b) = (-zi, zi - self.lower);
            grad[i] += 1.0 / a - 1.0 / b;
            hess[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }
        let bound = self.bound(v);
        for c in &self.problem.constraints {
            // -log(bound - g): gradient ∇g/slack, Hessian ∇²g/slack + ∇g∇gᵀ/slack².
            let slack = bound - c.value(z);
            let mut g_part = DVector::zeros(dim);
            let mut h_part = DMatrix::zeros(dim, dim);
            c.accumulate(z, 1.0, &mut g_part, &mut h_part);
            let mut g_full = g_part;
            if self.phase == Phase::Feasibility {
                g_full[nz] = -1.0;
            }
            grad.axpy(1.0 / slack, &g_full, 1.0);
            hess += h_part / slack;
            hess.ger(1.0 / (slack * slack), &g_full, &g_full, 1.0);
        }
        (grad, hess)
    }
}

enum Centering {
    Done { decrement: f64 },
    Stalled,
}

/// Damped Newton minimization of the barrier objective from a strictly
/// interior `v`. `steps` counts Newton iterations across calls.
fn center(barrier: &Barrier, v: &mut DVector<f64>, steps: &mut usize) -> Centering {
    let mut f = match barrier.value(v.as_slice()) {
        Some(f) => f,
        None => return Centering::Stalled,
    };
    loop {
        if *steps >= MAX_NEWTON_STEPS {
            return Centering::Stalled;
        }
        *steps += 1;
        let (grad, hess) = barrier.derivatives(v.as_slice());
        let Some(step) = newton_step(hess, &grad) else {
            return Centering::Stalled;
        };
        let decrement = -grad.dot(&step);
        // Below this the barrier value cannot resolve further progress.
        let floor = NEWTON_DECREMENT_TOL.max(1e-12 * f.abs());
        if decrement / 2.0 <= floor {
            return Centering::Done { decrement: decrement / 2.0 };
        }
        let mut alpha = 1.0;
        loop {
            let trial = &*v + &step * alpha;
            if let Some(ft) = barrier.value(trial.as_slice()) {
                if ft <= f - 0.25 * alpha * decrement {
                    *v = trial;
                    f = ft;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                // No progress possible at this precision.
                return if decrement < 1e-6_f64.max(1e-9 * f.abs()) {
                    Centering::Done { decrement: decrement / 2.0 }
                } else {
                    Centering::Stalled
                };
            }
        }
    }
}

fn newton_step(mut hess: DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().amax().max(1.0);
    let mut shift = 0.0;
    for _ in 0..8 {
        if let Some(ch) = hess.clone().cholesky() {
            return Some(-ch.solve(grad));
        }
        let next = if shift == 0.0 { 1e-12 * scale } else { shift * 100.0 };
        for i in 0..hess.nrows() {
            hess[(i, i)] += next - shift;
        }
        shift = next;
    }
    None
}

fn finish(
    problem: &GpProblem,
    cfg: &SystemConfig,
    status: GpStatus,
    z: &[f64],
    kkt_residual: f64,
    phase1_value: Option<f64>,
) -> GpResult {
    let allocation = problem.to_allocation(z);
    GpResult {
        status,
        objective: total_energy(&allocation, cfg),
        allocation,
        kkt_residual,
        phase1_value,
    }
}

/// Minimum total energy subject to every user's SINR target and power
/// budget, or an infeasibility verdict when the phase-1 optimum exceeds `tol`.
pub fn gp_solve(
    net: &NetworkRealization,
    targets: &SinrTargets,
    cfg: &SystemConfig,
    tol: f64,
) -> Result<GpResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let problem = GpProblem::new(net, targets, cfg)?;
    let nz = problem.num_variables();
    let lower = MIN_RELATIVE_POWER.ln();
    let mut steps = 0;

    // Phase 1.
    let mut v = DVector::from_element(nz + 1, -1e-3);
    let worst = (0..problem.num_users)
        .map(|u| problem.constraint(u, &v.as_slice()[..nz]))
        .fold(f64::NEG_INFINITY, f64::max);
    v[nz] = worst + 1.0;
    let mut barrier = Barrier {
        problem: &problem,
        phase: Phase::Feasibility,
        t: 1.0,
        lower,
    };
    let m = barrier.num_inequalities() as f64;
    let phase1 = loop {
        if let Centering::Stalled = center(&barrier, &mut v, &mut steps) {
            let s = v[nz];
            if s < 0.0 {
                break s;
            }
            return Ok(finish(&problem, cfg, GpStatus::NumericalFailure, &v.as_slice()[..nz], f64::NAN, Some(s)));
        }
        let s = v[nz];
        let gap = m / barrier.t;
        if s < 0.0 {
            break s;
        }
        if s - gap > tol {
            return Ok(finish(&problem, cfg, GpStatus::Infeasible, &v.as_slice()[..nz], gap, Some(s)));
        }
        if gap <= TARGET_GAP {
            if s > tol {
                return Ok(finish(&problem, cfg, GpStatus::Infeasible, &v.as_slice()[..nz], gap, Some(s)));
            }
            break s;
        }
        barrier.t *= BARRIER_GROWTH;
    };

    // Phase 2, starting from the phase-1 point, which is strictly inside
    // the relaxed constraints.
    let mut z = DVector::from_column_slice(&v.as_slice()[..nz]);
    let mut barrier = Barrier {
        problem: &problem,
        phase: Phase::Optimality { relax: tol },
        t: 1.0,
        lower,
    };
    let decrement = loop {
        let decrement = match center(&barrier, &mut z, &mut steps) {
            Centering::Done { decrement } => decrement,
            Centering::Stalled => {
                let residual = m / barrier.t;
                return Ok(finish(&problem, cfg, GpStatus::NumericalFailure, z.as_slice(), residual, Some(phase1)));
            }
        };
        if m / barrier.t <= TARGET_GAP {
            break decrement;
        }
        barrier.t *= BARRIER_GROWTH;
    };
    // Duality gap plus centering error, both in units of log-energy.
    let kkt = (m + decrement) / barrier.t;
    let result = finish(&problem, cfg, GpStatus::Optimal, z.as_slice(), kkt, Some(phase1));

    // Certify through the independent SINR evaluation.
    let ok = (0..cfg.num_cells).all(|l| {
        (0..cfg.users_per_cell).all(|k| {
            let u = cfg.user_index(l, k);
            effective_sinr(net, &result.allocation, cfg, l, k) >= targets.sinr[u] * (1.0 - 1e-6)
        })
    }) && result.allocation.within_budget(cfg);
    if !ok {
        return Ok(GpResult {
            status: GpStatus::NumericalFailure,
            ..result
        });
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgen::generate_drop;
    use crate::solvers::{algorithm1_joint, SolverOptions};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single_user(beta: f64, m: usize) -> (SystemConfig, NetworkRealization) {
        let mut cfg = SystemConfig::uniform(m, 1, 1, 200, 5);
        cfg.noise_power = 2.512e-13;
        (cfg, NetworkRealization::from_gains(vec![vec![vec![beta]]]).unwrap())
    }

    #[test]
    fn constraint_matches_interference_ratio() {
        let cfg = SystemConfig::default();
        let net = generate_drop(&cfg, 4).unwrap();
        let targets = SinrTargets::from_config(&cfg).unwrap();
        let problem = GpProblem::new(&net, &targets, &cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let z: Vec<f64> = (0..problem.num_variables()).map(|_| rng.random_range(-8.0..0.0)).collect();
            let alloc = problem.to_allocation(&z);
            assert!((problem.objective(&z).exp() / total_energy(&alloc, &cfg) - 1.0).abs() < 1e-12);
            for l in 0..4 {
                for k in 0..5 {
                    let u = cfg.user_index(l, k);
                    let i = crate::se::joint_interference(&net, &alloc, &targets, &cfg, l, k);
                    let expect = (i / (alloc.pilot[u] * alloc.data[u])).ln();
                    assert!((problem.constraint(u, &z) - expect).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn log_domain_functions_are_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for seed in 0..10 {
            let cfg = SystemConfig::uniform(rng.random_range(10..300), 2, 4, 200, 5);
            let net = generate_drop(&cfg, seed).unwrap();
            let targets = SinrTargets::from_config(&cfg).unwrap();
            let problem = GpProblem::new(&net, &targets, &cfg).unwrap();
            let nz = problem.num_variables();
            for _ in 0..50 {
                let a: Vec<f64> = (0..nz).map(|_| rng.random_range(-20.0..0.0)).collect();
                let b: Vec<f64> = (0..nz).map(|_| rng.random_range(-20.0..0.0)).collect();
                let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                let f = |z: &[f64]| problem.objective(z);
                assert!(f(&mid) <= 0.5 * (f(&a) + f(&b)) + 1e-9);
                for u in 0..cfg.num_users() {
                    let g = |z: &[f64]| problem.constraint(u, z);
                    assert!(g(&mid) <= 0.5 * (g(&a) + g(&b)) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn single_user_constraint_is_active() {
        let (cfg, net) = single_user(1e-12, 100);
        let targets = SinrTargets::from_config(&cfg).unwrap();
        let res = gp_solve(&net, &targets, &cfg, 1e-6).unwrap();
        assert_eq!(res.status, GpStatus::Optimal, "{res:?}");
        let sinr = effective_sinr(&net, &res.allocation, &cfg, 0, 0);
        assert!((sinr / targets.sinr[0] - 1.0).abs() < 2e-6, "{sinr}");
        assert!(res.kkt_residual <= 1e-8);
    }

    #[test]
    fn weak_isolated_user_is_infeasible() {
        let (cfg, net) = single_user(1e-15, 10);
        let targets = SinrTargets::from_config(&cfg).unwrap();
        assert!(effective_sinr(&net, &PowerAllocation::full(&cfg), &cfg, 0, 0) < targets.sinr[0]);
        let res = gp_solve(&net, &targets, &cfg, 1e-6).unwrap();
        assert_eq!(res.status, GpStatus::Infeasible);
        assert!(res.phase1_value.unwrap() > 1e-6);
    }

    #[test]
    fn optimal_points_beat_the_fixed_point() {
        let cfg = SystemConfig::default();
        let targets = SinrTargets::from_config(&cfg).unwrap();
        let mut optimal = 0;
        for seed in 0..15 {
            let net = generate_drop(&cfg, seed).unwrap();
            let gp = gp_solve(&net, &targets, &cfg, 1e-6).unwrap();
            assert_ne!(gp.status, GpStatus::NumericalFailure, "seed {seed}");
            if gp.status != GpStatus::Optimal {
                continue;
            }
            optimal += 1;
            assert!(gp.allocation.within_budget(&cfg));
            for l in 0..4 {
                for k in 0..5 {
                    let u = cfg.user_index(l, k);
                    let s = effective_sinr(&net, &gp.allocation, &cfg, l, k);
                    assert!(s >= targets.sinr[u] * (1.0 - 1e-6));
                }
            }
            // The fixed point may settle on a congested point even here; when
            // it serves everyone it is a feasible point of the same problem.
            let fp = algorithm1_joint(&net, &targets, &cfg, &SolverOptions::default()).unwrap();
            if fp.served.iter().all(|s| *s) {
                assert!(gp.objective <= fp.total_energy(&cfg) * (1.0 + 1e-6));
            }
        }
        assert!(optimal > 0);
    }

    #[test]
    fn rejects_bad_tolerance() {
        let (cfg, net) = single_user(1e-12, 100);
        let targets = SinrTargets::from_config(&cfg).unwrap();
        assert!(gp_solve(&net, &targets, &cfg, 0.0).is_err());
    }
}
