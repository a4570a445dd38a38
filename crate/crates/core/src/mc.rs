//! Channel-level Monte-Carlo estimate of the uplink SE, used to check the
//! closed-form SINR.
//!
//! Each realization draws i.i.d. Rayleigh channels to the serving BS, sends
//! orthogonal DFT pilots (reused in every cell), forms the MMSE estimate from
//! the received pilot matrix, then combines one data snapshot with MRC. The
//! SE is the use-and-then-forget bound
//!
//! ```text
//! SINR = p |E{v^H h}|² / (E{|v^H y|²} - p |E{v^H h}|²)
//! ```
//!
//! with the expectations replaced by sample means.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::netgen::NetworkRealization;
use crate::se::PowerAllocation;

pub const MIN_REALIZATIONS: usize = 1000;
const BATCHES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    /// SE from the pooled sample, b/s/Hz.
    pub se: f64,
    /// Standard error from batch means.
    pub std_error: f64,
}

fn cn(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

#[derive(Default, Clone, Copy)]
struct Moments {
    gain: Complex64,
    power: f64,
    count: usize,
}

impl Moments {
    fn add(&mut self, other: &Moments) {
        self.gain += other.gain;
        self.power += other.power;
        self.count += other.count;
    }

    fn se(&self, data_power: f64, prelog: f64) -> f64 {
        let n = self.count as f64;
        let signal = data_power * (self.gain / n).norm_sqr();
        let rest = self.power / n - signal;
        if signal == 0.0 {
            return 0.0;
        }
        prelog * (signal / rest).ln_1p() / std::f64::consts::LN_2
    }
}

/// Monte-Carlo SE of user `user` in cell `cell`, with `realizations`
/// independent channel draws from `seed`.
pub fn mc_validate_se(
    net: &NetworkRealization,
    alloc: &PowerAllocation,
    cfg: &SystemConfig,
    cell: usize,
    user: usize,
    realizations: usize,
    seed: u64,
) -> Result<McEstimate> {
    if cfg.pilot_length < cfg.users_per_cell {
        return Err(Error::InvalidArgument(format!(
            "pilot_length {} < users_per_cell {}: pilots are not orthogonal",
            cfg.pilot_length, cfg.users_per_cell
        )));
    }
    if realizations < MIN_REALIZATIONS {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_REALIZATIONS} realizations, got {realizations}"
        )));
    }
    let (num_cells, k_users) = (cfg.num_cells, cfg.users_per_cell);
    let m = cfg.num_antennas;
    let tau_p = cfg.pilot_length;
    let noise = cfg.noise_power;
    let n_users = num_cells * k_users;
    let own = cfg.user_index(cell, user);

    // psi[k][t] = exp(j 2π k t / τ_p), so ‖ψ_k‖² = τ_p and ψ_k ⟂ ψ_k'.
    let psi: Vec<Vec<Complex64>> = (0..k_users)
        .map(|k| {
            (0..tau_p)
                .map(|t| {
                    Complex64::from_polar(
                        1.0,
                        2.0 * std::f64::consts::PI * (k * t) as f64 / tau_p as f64,
                    )
                })
                .collect()
        })
        .collect();

    let estimator_scale = {
        let denom: f64 = (0..num_cells)
            .map(|src| {
                alloc.pilot[src * k_users + user] * net.beta(src, user, cell)
            })
            .sum::<f64>()
            * tau_p as f64
            + noise;
        alloc.pilot[own].sqrt() * net.beta(cell, user, cell) / denom
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels = vec![Complex64::default(); n_users * m];
    let mut pilot_rx = vec![Complex64::default(); m * tau_p];
    let mut estimate = vec![Complex64::default(); m];
    let mut batches = vec![Moments::default(); BATCHES];

    for r in 0..realizations {
        for (u, h) in channels.chunks_mut(m).enumerate() {
            let (src, k) = (u / k_users, u % k_users);
            let b = net.beta(src, k, cell);
            h.iter_mut().for_each(|x| *x = cn(&mut rng, b));
        }

        // Y = Σ sqrt(p̂) h ψ^H + N
        for a in 0..m {
            for t in 0..tau_p {
                let mut y = cn(&mut rng, noise);
                for u in 0..n_users {
                    let k = u % k_users;
                    y += channels[u * m + a] * psi[k][t].conj() * alloc.pilot[u].sqrt();
                }
                pilot_rx[a * tau_p + t] = y;
            }
        }
        for a in 0..m {
            let projected: Complex64 = (0..tau_p)
                .map(|t| pilot_rx[a * tau_p + t] * psi[user][t])
                .sum();
            estimate[a] = projected * estimator_scale;
        }

        // One data snapshot with unit-modulus symbols.
        let symbols: Vec<Complex64> = (0..n_users)
            .map(|_| Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
            .collect();
        let mut combined = Complex64::default();
        let mut gain = Complex64::default();
        for a in 0..m {
            let mut y = cn(&mut rng, noise);
            for u in 0..n_users {
                y += channels[u * m + a] * symbols[u] * alloc.data[u].sqrt();
            }
            combined += estimate[a].conj() * y;
            gain += estimate[a].conj() * channels[own * m + a];
        }

        let batch = &mut batches[r * BATCHES / realizations];
        batch.gain += gain;
        batch.power += combined.norm_sqr();
        batch.count += 1;
    }

    let prelog = 1.0 - tau_p as f64 / cfg.coherence_length as f64;
    let p = alloc.data[own];
    let mut pooled = Moments::default();
    batches.iter().for_each(|b| pooled.add(b));
    let per_batch: Vec<f64> = batches.iter().map(|b| b.se(p, prelog)).collect();
    let mean = per_batch.iter().sum::<f64>() / BATCHES as f64;
    let var = per_batch.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(McEstimate {
        se: pooled.se(p, prelog),
        std_error: (var / BATCHES as f64).sqrt(),
    })
}
