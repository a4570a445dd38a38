//! Brute-force reference optimum for tiny drops.
//!
//! Pilot powers are searched exhaustively on a logarithmic grid spanning
//! `[1e-6·P_max, P_max]` per user. For each pilot vector the cheapest data
//! powers are not gridded but solved exactly: with pilots fixed they are the
//! minimal solution of `(I - F)·p = u` (see [`AffineInterference`]). The
//! optional zoom levels re-grid around the best point; minimizing out the
//! data powers of a convex log-domain program leaves a convex function of
//! the log pilots, so the zoom cannot be trapped away from the optimum.

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::gp::{GpResult, GpStatus};
use crate::lp::AffineInterference;
use crate::netgen::NetworkRealization;
use crate::se::{data_energy, effective_sinr, total_energy, PowerAllocation, SinrTargets};

/// Largest number of users the oracle accepts.
pub const ORACLE_MAX_USERS: usize = 4;

/// Decades covered by the pilot grid below `P_max`.
const DECADES: f64 = 6.0;
/// Points on each side of the centre in a zoom level.
const ZOOM_HALF_POINTS: usize = 4;

/// Grid exponent `log10(p̂ / P_max)` of index `i` out of `resolution`.
/// Grids with resolution `n` and `2n` share every point of the coarser one.
pub fn grid_exponent(i: usize, resolution: usize) -> f64 {
    -DECADES + DECADES * i as f64 / resolution as f64
}

fn power_at(max_power: f64, exponent: f64) -> f64 {
    if exponent >= 0.0 {
        max_power
    } else {
        max_power * 10f64.powf(exponent)
    }
}

fn check_size(cfg: &SystemConfig) -> Result<()> {
    let users = cfg.num_users();
    if users > ORACLE_MAX_USERS {
        return Err(Error::TooLarge { users, cap: ORACLE_MAX_USERS });
    }
    Ok(())
}

/// Cheapest feasible data powers for the given pilots, if any.
fn best_data(
    net: &NetworkRealization,
    pilots: &[f64],
    targets: &SinrTargets,
    cfg: &SystemConfig,
) -> Result<Option<PowerAllocation>> {
    let affine = AffineInterference::probe(net, pilots, targets, cfg)?;
    let Some(data) = affine.minimal_powers() else {
        return Ok(None);
    };
    if data.iter().zip(&cfg.max_power).any(|(p, m)| p > m) {
        return Ok(None);
    }
    let alloc = PowerAllocation::new(pilots.to_vec(), data);
    let meets = (0..cfg.num_cells).all(|l| {
        (0..cfg.users_per_cell).all(|k| {
            effective_sinr(net, &alloc, cfg, l, k) >= targets.sinr[cfg.user_index(l, k)] * (1.0 - 1e-9)
        })
    });
    Ok(meets.then_some(alloc))
}

struct Search<'a> {
    net: &'a NetworkRealization,
    targets: &'a SinrTargets,
    cfg: &'a SystemConfig,
    best: Option<(f64, Vec<f64>, PowerAllocation)>,
}

impl Search<'_> {
    /// Tries every combination of the per-user exponent lists.
    fn sweep(&mut self, axes: &[Vec<f64>]) -> Result<()> {
        let n = axes.len();
        let mut idx = vec![0usize; n];
        loop {
            let exps: Vec<f64> = idx.iter().zip(axes).map(|(i, a)| a[*i]).collect();
            let pilots: Vec<f64> =
                exps.iter().zip(&self.cfg.max_power).map(|(e, m)| power_at(*m, *e)).collect();
            if let Some(alloc) = best_data(self.net, &pilots, self.targets, self.cfg)? {
                let energy = total_energy(&alloc, self.cfg);
                if self.best.as_ref().map_or(true, |(b, _, _)| energy < *b) {
                    self.best = Some((energy, exps, alloc));
                }
            }
            let mut d = 0;
            loop {
                if d == n {
                    return Ok(());
                }
                idx[d] += 1;
                if idx[d] < axes[d].len() {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }
}

/// Exhaustive search with `resolution` grid cells per pilot power.
pub fn grid_oracle(
    net: &NetworkRealization,
    targets: &SinrTargets,
    cfg: &SystemConfig,
    resolution: usize,
) -> Result<GpResult> {
    grid_oracle_refined(net, targets, cfg, resolution, 0)
}

/// [`grid_oracle`] followed by `zoom_levels` rounds of local re-gridding,
/// each shrinking the cell by a factor of 4 around the current best.
pub fn grid_oracle_refined(
    net: &NetworkRealization,
    targets: &SinrTargets,
    cfg: &SystemConfig,
    resolution: usize,
    zoom_levels: usize,
) -> Result<GpResult> {
    check_size(cfg)?;
    if resolution == 0 {
        return Err(Error::InvalidArgument("grid resolution must be at least 1".into()));
    }
    let n = cfg.num_users();
    let coarse: Vec<f64> = (0..=resolution).map(|i| grid_exponent(i, resolution)).collect();
    let mut search = Search { net, targets, cfg, best: None };
    search.sweep(&vec![coarse; n])?;

    let mut half_width = DECADES / resolution as f64;
    for _ in 0..zoom_levels {
        let Some((_, centre, _)) = search.best.clone() else { break };
        let axes: Vec<Vec<f64>> = centre
            .iter()
            .map(|c| {
                (0..=2 * ZOOM_HALF_POINTS)
                    .map(|j| {
                        let offset = (j as f64 / ZOOM_HALF_POINTS as f64 - 1.0) * half_width;
                        (c + offset).clamp(-DECADES, 0.0)
                    })
                    .collect()
            })
            .collect();
        search.sweep(&axes)?;
        half_width /= ZOOM_HALF_POINTS as f64;
    }

    let cell = 10f64.powf(half_width) - 1.0;
    Ok(match search.best {
        Some((energy, _, allocation)) => GpResult {
            status: GpStatus::Optimal,
            allocation,
            objective: energy,
            kkt_residual: cell,
            phase1_value: None,
        },
        None => GpResult {
            status: GpStatus::Infeasible,
            allocation: PowerAllocation::full(cfg),
            objective: total_energy(&PowerAllocation::full(cfg), cfg),
            kkt_residual: cell,
            phase1_value: None,
        },
    })
}

/// Exact data-only optimum with pilots fixed, from the linear system alone.
pub fn data_oracle(
    net: &NetworkRealization,
    fixed_pilots: &[f64],
    targets: &SinrTargets,
    cfg: &SystemConfig,
) -> Result<GpResult> {
    check_size(cfg)?;
    Ok(match best_data(net, fixed_pilots, targets, cfg)? {
        Some(allocation) => GpResult {
            status: GpStatus::Optimal,
            objective: data_energy(&allocation, cfg),
            allocation,
            kkt_residual: 0.0,
            phase1_value: None,
        },
        None => {
            let allocation = PowerAllocation::new(fixed_pilots.to_vec(), cfg.max_power.clone());
            GpResult {
                status: GpStatus::Infeasible,
                objective: data_energy(&allocation, cfg),
                allocation,
                kkt_residual: 0.0,
                phase1_value: None,
            }
        }
    })
}
