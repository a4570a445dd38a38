//! Data-only minimum-energy allocation as a linear program.
//!
//! With pilot powers fixed, the data interference function is affine in the
//! data powers, `I_d(p) = u + F·p` with `u > 0` and `F >= 0`, so the SINR
//! targets become the linear constraints `p - F·p >= u`.

use nalgebra::DMatrix;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gp::{GpResult, GpStatus};
use crate::netgen::NetworkRealization;
use crate::se::{data_energy, data_interference, effective_sinr, PowerAllocation, SinrTargets};

/// Affine form of the data interference functions at fixed pilot powers.
#[derive(Debug, Clone)]
pub struct AffineInterference {
    /// `I_d` at zero data power, W.
    pub offset: Vec<f64>,
    /// `coupling[(u, v)]`: growth of user u's `I_d` per watt of user v's data power.
    pub coupling: DMatrix<f64>,
}

impl AffineInterference {
    /// Reads off `u` and `F` by evaluating the interference functions at
    /// zero data power and at each unit vector.
    pub fn probe(
        net: &NetworkRealization,
        pilots: &[f64],
        targets: &SinrTargets,
        cfg: &SystemConfig,
    ) -> Result<Self> {
        let n = cfg.num_users();
        if pilots.len() != n {
            return Err(Error::InvalidArgument(format!("expected {n} pilot powers, got {}", pilots.len())));
        }
        let eval = |alloc: &PowerAllocation| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            for l in 0..cfg.num_cells {
                for k in 0..cfg.users_per_cell {
                    out.push(data_interference(net, alloc, targets, cfg, l, k)?);
                }
            }
            Ok(out)
        };
        let mut alloc = PowerAllocation::new(pilots.to_vec(), vec![0.0; n]);
        let offset = eval(&alloc)?;
        let mut coupling = DMatrix::zeros(n, n);
        for v in 0..n {
            let step = cfg.max_power[v];
            alloc.data[v] = step;
            let col = eval(&alloc)?;
            alloc.data[v] = 0.0;
            for u in 0..n {
                coupling[(u, v)] = ((col[u] - offset[u]) / step).max(0.0);
            }
        }
        Ok(AffineInterference { offset, coupling })
    }

    /// The smallest data powers meeting every target with equality, if the
    /// targets are jointly achievable without power limits.
    pub fn minimal_powers(&self) -> Option<Vec<f64>> {
        let n = self.offset.len();
        let system = DMatrix::identity(n, n) - &self.coupling;
        let rhs = nalgebra::DVector::from_column_slice(&self.offset);
        let p = system.lu().solve(&rhs)?;
        // A positive solution exists iff the spectral radius of F is below one.
        p.iter().all(|x| *x > 0.0 && x.is_finite()).then(|| p.iter().copied().collect())
    }
}

#[derive(Debug, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal(Vec<f64>),
    Infeasible { phase1: f64 },
}

const PIVOT_EPS: f64 = 1e-11;

/// Minimizes `cost·x` subject to `rows[i]·x >= rhs[i]` (`rhs >= 0`) and
/// `0 <= x <= upper`, by the two-phase tableau simplex with Bland's rule.
/// `infeasible_tol` bounds the phase-1 optimum accepted as feasible.
pub(crate) fn simplex(
    cost: &[f64],
    rows: &[Vec<f64>],
    rhs: &[f64],
    upper: &[f64],
    infeasible_tol: f64,
) -> LpOutcome {
    let n = cost.len();
    let m_ge = rows.len();
    let m = m_ge + n;
    // Columns: x, surplus (ge rows), slack (upper rows), artificial (ge rows), rhs.
    let (c_sur, c_sl, c_art) = (n, n + m_ge, n + m_ge + n);
    let width = c_art + m_ge + 1;
    let rc = width - 1;
    let mut tab = vec![vec![0.0; width]; m + 1];
    let mut basis = vec![0; m];
    for i in 0..m_ge {
        tab[i][..n].copy_from_slice(&rows[i]);
        tab[i][c_sur + i] = -1.0;
        tab[i][c_art + i] = 1.0;
        tab[i][rc] = rhs[i];
        basis[i] = c_art + i;
    }
    for j in 0..n {
        let i = m_ge + j;
        tab[i][j] = 1.0;
        tab[i][c_sl + j] = 1.0;
        tab[i][rc] = upper[j];
        basis[i] = c_sl + j;
    }

    // Phase 1 objective: sum of artificials, expressed in non-basic columns.
    let obj = m;
    for i in 0..m_ge {
        for c in 0..width {
            tab[obj][c] -= tab[i][c];
        }
    }
    for i in 0..m_ge {
        tab[obj][c_art + i] = 0.0;
    }
    run_simplex(&mut tab, &mut basis, c_art + m_ge);
    let phase1 = -tab[obj][rc];
    if phase1 > infeasible_tol {
        return LpOutcome::Infeasible { phase1 };
    }

    // Drive zero-level artificials out of the basis where possible.
    for i in 0..m {
        if basis[i] < c_art {
            continue;
        }
        if let Some(c) = (0..c_art).find(|&c| tab[i][c].abs() > PIVOT_EPS) {
            pivot(&mut tab, &mut basis, i, c);
        }
    }

    // Phase 2 objective.
    tab[obj].iter_mut().for_each(|x| *x = 0.0);
    tab[obj][..n].copy_from_slice(cost);
    for i in 0..m {
        let b = basis[i];
        let cb = if b < n { cost[b] } else { 0.0 };
        if cb != 0.0 {
            for c in 0..width {
                tab[obj][c] -= cb * tab[i][c];
            }
        }
    }
    run_simplex(&mut tab, &mut basis, c_art);

    let mut x = vec![0.0; n];
    for i in 0..m {
        if basis[i] < n {
            x[basis[i]] = tab[i][rc];
        }
    }
    LpOutcome::Optimal(x)
}

/// Pivots until no column below `limit` has a negative reduced cost.
fn run_simplex(tab: &mut [Vec<f64>], basis: &mut [usize], limit: usize) {
    let m = basis.len();
    let rc = tab[0].len() - 1;
    loop {
        let Some(enter) = (0..limit).find(|&c| tab[m][c] < -PIVOT_EPS) else {
            return;
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let a = tab[i][enter];
            if a > PIVOT_EPS {
                let ratio = tab[i][rc] / a;
                let better = match leave {
                    None => true,
                    Some((j, r)) => ratio < r - 1e-15 || (ratio <= r + 1e-15 && basis[i] < basis[j]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        match leave {
            Some((row, _)) => pivot(tab, basis, row, enter),
            // Unbounded direction; cannot happen with finite upper bounds.
            None => return,
        }
    }
}

fn pivot(tab: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = tab[row][col];
    tab[row].iter_mut().for_each(|x| *x /= p);
    let pivot_row = tab[row].clone();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            r.iter_mut().zip(&pivot_row).for_each(|(x, y)| *x -= f * y);
        }
    }
    basis[row] = col;
}

/// Minimum data energy with pilots fixed at `fixed_pilots`, or an
/// infeasibility verdict from the simplex phase 1 at relative tolerance `tol`.
pub fn lp_data_solve(
    net: &NetworkRealization,
    fixed_pilots: &[f64],
    targets: &SinrTargets,
    cfg: &SystemConfig,
    tol: f64,
) -> Result<GpResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if let Some(p) = fixed_pilots.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
        return Err(Error::InvalidArgument(format!("fixed pilot powers must be positive, got {p}")));
    }
    let affine = AffineInterference::probe(net, fixed_pilots, targets, cfg)?;
    let n = cfg.num_users();
    let pmax = &cfg.max_power;

    // Variables q = p / P_max; each row scaled so its right-hand side is 1.
    let tau_d = cfg.data_length() as f64;
    let cost: Vec<f64> = pmax.iter().map(|p| tau_d * p).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|u| {
            (0..n)
                .map(|v| {
                    let own = if u == v { 1.0 } else { 0.0 };
                    (own - affine.coupling[(u, v)]) * pmax[v] / affine.offset[u]
                })
                .collect()
        })
        .collect();
    let outcome = simplex(&cost, &rows, &vec![1.0; n], &vec![1.0; n], tol);

    let pilots = fixed_pilots.to_vec();
    let (status, data, residual, phase1) = match outcome {
        LpOutcome::Infeasible { phase1 } => (GpStatus::Infeasible, pmax.clone(), 0.0, phase1),
        LpOutcome::Optimal(q) => {
            let data: Vec<f64> =
                q.iter().zip(pmax).map(|(q, m)| (q.clamp(0.0, 1.0) * m).min(*m)).collect();
            let violation = rows
                .iter()
                .map(|r| 1.0 - r.iter().zip(&q).map(|(a, x)| a * x).sum::<f64>())
                .fold(0.0, f64::max);
            (GpStatus::Optimal, data, violation, 0.0)
        }
    };
    let allocation = PowerAllocation::new(pilots, data);
    let mut result = GpResult {
        status,
        objective: data_energy(&allocation, cfg),
        allocation,
        kkt_residual: residual,
        phase1_value: Some(phase1),
    };
    if status == GpStatus::Optimal {
        let ok = (0..cfg.num_cells).all(|l| {
            (0..cfg.users_per_cell).all(|k| {
                let u = cfg.user_index(l, k);
                effective_sinr(net, &result.allocation, cfg, l, k) >= targets.sinr[u] * (1.0 - 1e-6)
            })
        });
        if !ok {
            result.status = GpStatus::NumericalFailure;
        }
    }
    Ok(result)
}
