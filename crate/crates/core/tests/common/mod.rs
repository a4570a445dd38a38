//! Helpers shared by the integration tests.

#![allow(dead_code)]

use mimo_uplink::netgen::pathloss_beta_db;
use mimo_uplink::se::{data_interference, joint_interference};
use mimo_uplink::{NetworkRealization, PowerAllocation, SinrTargets, SystemConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub cfg: SystemConfig,
    pub net: NetworkRealization,
    pub targets: SinrTargets,
}

/// Random system with gains drawn from the path-loss model at random
/// distances (closer for the serving BS), random SE targets and budgets.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let num_cells = rng.random_range(1..=4);
    let k = rng.random_range(1..=4);
    let tau_p = rng.random_range(k..=2 * k + 2);
    let tau_c = rng.random_range(tau_p + 10..=400);
    let mut cfg = SystemConfig::uniform(rng.random_range(8..=400), k, num_cells, tau_c, tau_p);
    for p in cfg.max_power.iter_mut() {
        *p = rng.random_range(0.05..1.0);
    }
    for xi in cfg.se_target.iter_mut() {
        *xi = rng.random_range(0.05..4.0);
    }
    let gains = random_gains(rng, num_cells, k);
    let net = NetworkRealization::from_gains(gains).unwrap();
    let targets = SinrTargets::from_config(&cfg).unwrap();
    Instance { cfg, net, targets }
}

/// Linear gains `[src][user][bs]` from the path-loss model at random
/// distances, closer to the serving BS, with 7 dB shadowing.
pub fn random_gains(rng: &mut impl Rng, num_cells: usize, k: usize) -> Vec<Vec<Vec<f64>>> {
    let mut gains = vec![vec![vec![0.0; num_cells]; k]; num_cells];
    for (src, cell) in gains.iter_mut().enumerate() {
        for user in cell.iter_mut() {
            for (bs, g) in user.iter_mut().enumerate() {
                let d = if bs == src { rng.random_range(35.0..350.0) } else { rng.random_range(150.0..800.0) };
                let shadow: f64 = rng.sample::<f64, _>(rand_distr::StandardNormal) * 7.0;
                *g = 10f64.powf(pathloss_beta_db(d, shadow).unwrap() / 10.0);
            }
        }
    }
    gains
}

/// Random powers in `[0, P_max]`, about a tenth of them exactly zero.
pub fn random_powers(rng: &mut impl Rng, max_power: &[f64]) -> Vec<f64> {
    max_power
        .iter()
        .map(|m| if rng.random_bool(0.1) { 0.0 } else { rng.random_range(0.0..*m) })
        .collect()
}

#[derive(Debug, Default)]
pub struct AxiomReport {
    pub instances: usize,
    pub evaluations: usize,
    pub violations: Vec<String>,
}

impl AxiomReport {
    fn fail(&mut self, what: String) {
        if self.violations.len() < 20 {
            self.violations.push(what);
        }
    }
}

fn users(cfg: &SystemConfig) -> impl Iterator<Item = (usize, usize)> + '_ {
    (0..cfg.num_cells).flat_map(move |l| (0..cfg.users_per_cell).map(move |k| (l, k)))
}

/// Positivity (with the zero-power lower bound), monotonicity and
/// two-parameter scalability of the joint interference functions.
pub fn check_joint_axioms(instances: usize, seed: u64) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport { instances, ..Default::default() };
    for case in 0..instances {
        let Instance { cfg, net, targets } = random_instance(&mut rng);
        let n = cfg.num_users();
        let a = PowerAllocation::new(random_powers(&mut rng, &cfg.max_power), random_powers(&mut rng, &cfg.max_power));
        let bigger = PowerAllocation::new(
            a.pilot.iter().map(|p| p + rng.random_range(0.0..0.1)).collect(),
            a.data.iter().map(|p| p + rng.random_range(0.0..0.1)).collect(),
        );
        let (alpha, alpha2) = (rng.random_range(1.001..4.0), rng.random_range(1.001..4.0));
        let scaled = PowerAllocation::new(
            a.pilot.iter().map(|p| alpha * p).collect(),
            a.data.iter().map(|p| alpha2 * p).collect(),
        );
        let zero = PowerAllocation::zeros(n);
        for (l, k) in users(&cfg) {
            let u = cfg.user_index(l, k);
            report.evaluations += 1;
            let i = joint_interference(&net, &a, &targets, &cfg, l, k);
            let beta = net.beta(l, k, l);
            let noise = cfg.noise_power;
            let floor = targets.sinr[u] * noise * noise / (cfg.num_antennas as f64 * beta * beta * cfg.pilot_length as f64);
            let at_zero = joint_interference(&net, &zero, &targets, &cfg, l, k);
            if !(i > 0.0 && i >= floor * (1.0 - 1e-12)) {
                report.fail(format!("case {case} user {u}: positivity I={i} floor={floor}"));
            }
            if (at_zero / floor - 1.0).abs() > 1e-12 {
                report.fail(format!("case {case} user {u}: zero-power value {at_zero} != floor {floor}"));
            }
            let ib = joint_interference(&net, &bigger, &targets, &cfg, l, k);
            if ib < i {
                report.fail(format!("case {case} user {u}: monotonicity {ib} < {i}"));
            }
            let is = joint_interference(&net, &scaled, &targets, &cfg, l, k);
            if !(alpha * alpha2 * i > is) {
                report.fail(format!("case {case} user {u}: scalability {} <= {is}", alpha * alpha2 * i));
            }
        }
    }
    report
}

/// The same three axioms for the data interference functions with pilot
/// powers held fixed (and positive).
pub fn check_data_axioms(instances: usize, seed: u64) -> AxiomReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport { instances, ..Default::default() };
    for case in 0..instances {
        let Instance { cfg, net, targets } = random_instance(&mut rng);
        let pilots: Vec<f64> = cfg.max_power.iter().map(|m| rng.random_range(1e-4..*m)).collect();
        let data = random_powers(&mut rng, &cfg.max_power);
        let a = PowerAllocation::new(pilots.clone(), data.clone());
        let bigger = PowerAllocation::new(pilots.clone(), data.iter().map(|p| p + rng.random_range(0.0..0.1)).collect());
        let alpha = rng.random_range(1.001..4.0);
        let scaled = PowerAllocation::new(pilots, data.iter().map(|p| alpha * p).collect());
        for (l, k) in users(&cfg) {
            let u = cfg.user_index(l, k);
            report.evaluations += 1;
            let i = data_interference(&net, &a, &targets, &cfg, l, k).unwrap();
            if !(i > 0.0) {
                report.fail(format!("case {case} user {u}: positivity {i}"));
            }
            let ib = data_interference(&net, &bigger, &targets, &cfg, l, k).unwrap();
            if ib < i {
                report.fail(format!("case {case} user {u}: monotonicity {ib} < {i}"));
            }
            let is = data_interference(&net, &scaled, &targets, &cfg, l, k).unwrap();
            if !(alpha * i > is) {
                report.fail(format!("case {case} user {u}: scalability {} <= {is}", alpha * i));
            }
        }
    }
    report
}
