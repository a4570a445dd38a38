//! System parameters and their plain-text (TOML) file representation.
//!
//! Internally every power is in watts and every gain is linear. The file
//! format is the only place where milliwatts and dBm appear:
//!
//! ```toml
//! num_antennas = 200          # M, required
//! coherence_length = 200      # τ_c in symbols, required
//! pilot_length = 5            # τ_p in symbols, required
//! users_per_cell = 5          # K
//! num_cells = 4               # L, must be a perfect square
//! noise_dbm = -96.0
//! max_power_mw = 200.0        # scalar, or an L×K array of arrays
//! se_target = 1.5             # b/s/Hz, scalar or L×K array of arrays
//! area_side_m = 1000.0
//! min_bs_distance_m = 35.0
//! shadow_std_db = 7.0
//! pathloss_intercept_db = -148.1
//! pathloss_slope_db = 37.6
//! bandwidth_hz = 20e6         # informational only
//! ```
//!
//! Only the first three keys are mandatory; the others default to the
//! values shown. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// All scalar system parameters. Per-user quantities are stored flat with
/// user index `l * K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    pub num_antennas: usize,
    pub users_per_cell: usize,
    pub num_cells: usize,
    pub coherence_length: usize,
    pub pilot_length: usize,
    /// σ² in watts.
    pub noise_power: f64,
    /// P_max per user, watts.
    pub max_power: Vec<f64>,
    /// Requested spectral efficiency per user, b/s/Hz.
    pub se_target: Vec<f64>,
    pub area_side: f64,
    pub min_bs_distance: f64,
    pub shadow_std_db: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    pub bandwidth_hz: f64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig::uniform(200, 5, 4, 200, 5)
    }
}

impl SystemConfig {
    /// Reference layout (1 km² wrap-around area, 200 mW budgets, 1.5 b/s/Hz
    /// targets, -96 dBm noise) with the given dimensions.
    pub fn uniform(
        num_antennas: usize,
        users_per_cell: usize,
        num_cells: usize,
        coherence_length: usize,
        pilot_length: usize,
    ) -> Self {
        let n = users_per_cell * num_cells;
        SystemConfig {
            num_antennas,
            users_per_cell,
            num_cells,
            coherence_length,
            pilot_length,
            noise_power: dbm_to_watts(-96.0),
            max_power: vec![0.2; n],
            se_target: vec![1.5; n],
            area_side: 1000.0,
            min_bs_distance: 35.0,
            shadow_std_db: 7.0,
            pathloss_intercept_db: -148.1,
            pathloss_slope_db: 37.6,
            bandwidth_hz: 20e6,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_cells * self.users_per_cell
    }

    #[inline]
    pub fn user_index(&self, cell: usize, user: usize) -> usize {
        cell * self.users_per_cell + user
    }

    /// Number of cells along one side of the square grid.
    pub fn cells_per_side(&self) -> usize {
        let side = (self.num_cells as f64).sqrt().round() as usize;
        side
    }

    pub fn cell_side(&self) -> f64 {
        self.area_side / self.cells_per_side() as f64
    }

    /// τ_c - τ_p, the number of data symbols per coherence interval.
    pub fn data_length(&self) -> usize {
        self.coherence_length - self.pilot_length
    }

    pub fn set_max_power(&mut self, watts: f64) {
        self.max_power = vec![watts; self.num_users()];
    }

    pub fn set_se_target(&mut self, se: f64) {
        self.se_target = vec![se; self.num_users()];
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_antennas == 0 || self.users_per_cell == 0 || self.num_cells == 0 {
            return bad("num_antennas, users_per_cell and num_cells must be positive".into());
        }
        let side = self.cells_per_side();
        if side * side != self.num_cells {
            return bad(format!("num_cells = {} is not a perfect square", self.num_cells));
        }
        if self.pilot_length < self.users_per_cell {
            return bad(format!(
                "pilot_length = {} is shorter than users_per_cell = {}",
                self.pilot_length, self.users_per_cell
            ));
        }
        if self.pilot_length >= self.coherence_length {
            return bad(format!(
                "pilot_length = {} must be below coherence_length = {}",
                self.pilot_length, self.coherence_length
            ));
        }
        if !(self.noise_power > 0.0 && self.noise_power.is_finite()) {
            return bad(format!("noise power must be positive, got {}", self.noise_power));
        }
        let n = self.num_users();
        if self.max_power.len() != n || self.se_target.len() != n {
            return bad(format!("per-user arrays must have {n} entries"));
        }
        if let Some(p) = self.max_power.iter().find(|p| !(**p > 0.0 && p.is_finite())) {
            return bad(format!("max power must be positive, got {p}"));
        }
        if let Some(x) = self.se_target.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return bad(format!("SE target must be positive, got {x}"));
        }
        if !(self.area_side > 0.0) {
            return bad("area_side must be positive".into());
        }
        if !(self.min_bs_distance >= 0.0 && self.min_bs_distance < self.cell_side() / 2.0) {
            return bad(format!(
                "min_bs_distance = {} must lie in [0, {})",
                self.min_bs_distance,
                self.cell_side() / 2.0
            ));
        }
        if !(self.shadow_std_db >= 0.0) {
            return bad("shadow_std_db must be non-negative".into());
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ConfigFile = toml::from_str(&text).map_err(|e| Error::parse(path, e))?;
        file.resolve()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&ConfigFile::from(self)).expect("config serializes")
    }
}

/// A per-user value in the config file: either one number for every user or
/// a full L×K matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerUser {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

impl PerUser {
    fn expand(&self, cells: usize, users: usize, key: &str) -> Result<Vec<f64>> {
        match self {
            PerUser::Uniform(v) => Ok(vec![*v; cells * users]),
            PerUser::Matrix(rows) => {
                if rows.len() != cells || rows.iter().any(|r| r.len() != users) {
                    return Err(Error::InvalidConfig(format!(
                        "`{key}` must be a {cells}x{users} matrix"
                    )));
                }
                Ok(rows.iter().flatten().copied().collect())
            }
        }
    }

    fn collapse(values: &[f64], users: usize) -> Self {
        match values.first() {
            Some(first) if values.iter().all(|v| v == first) => PerUser::Uniform(*first),
            _ => PerUser::Matrix(values.chunks(users).map(<[f64]>::to_vec).collect()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub num_antennas: usize,
    pub coherence_length: usize,
    pub pilot_length: usize,
    #[serde(default = "defaults::users_per_cell")]
    pub users_per_cell: usize,
    #[serde(default = "defaults::num_cells")]
    pub num_cells: usize,
    #[serde(default = "defaults::noise_dbm")]
    pub noise_dbm: f64,
    #[serde(default = "defaults::max_power_mw")]
    pub max_power_mw: PerUser,
    #[serde(default = "defaults::se_target")]
    pub se_target: PerUser,
    #[serde(default = "defaults::area_side_m")]
    pub area_side_m: f64,
    #[serde(default = "defaults::min_bs_distance_m")]
    pub min_bs_distance_m: f64,
    #[serde(default = "defaults::shadow_std_db")]
    pub shadow_std_db: f64,
    #[serde(default = "defaults::pathloss_intercept_db")]
    pub pathloss_intercept_db: f64,
    #[serde(default = "defaults::pathloss_slope_db")]
    pub pathloss_slope_db: f64,
    #[serde(default = "defaults::bandwidth_hz")]
    pub bandwidth_hz: f64,
}

mod defaults {
    use super::PerUser;

    pub fn users_per_cell() -> usize {
        5
    }
    pub fn num_cells() -> usize {
        4
    }
    pub fn noise_dbm() -> f64 {
        -96.0
    }
    pub fn max_power_mw() -> PerUser {
        PerUser::Uniform(200.0)
    }
    pub fn se_target() -> PerUser {
        PerUser::Uniform(1.5)
    }
    pub fn area_side_m() -> f64 {
        1000.0
    }
    pub fn min_bs_distance_m() -> f64 {
        35.0
    }
    pub fn shadow_std_db() -> f64 {
        7.0
    }
    pub fn pathloss_intercept_db() -> f64 {
        -148.1
    }
    pub fn pathloss_slope_db() -> f64 {
        37.6
    }
    pub fn bandwidth_hz() -> f64 {
        20e6
    }
}

impl ConfigFile {
    pub fn resolve(&self) -> Result<SystemConfig> {
        let (l, k) = (self.num_cells, self.users_per_cell);
        let cfg = SystemConfig {
            num_antennas: self.num_antennas,
            users_per_cell: k,
            num_cells: l,
            coherence_length: self.coherence_length,
            pilot_length: self.pilot_length,
            noise_power: dbm_to_watts(self.noise_dbm),
            max_power: self
                .max_power_mw
                .expand(l, k, "max_power_mw")?
                .into_iter()
                .map(|mw| mw * 1e-3)
                .collect(),
            se_target: self.se_target.expand(l, k, "se_target")?,
            area_side: self.area_side_m,
            min_bs_distance: self.min_bs_distance_m,
            shadow_std_db: self.shadow_std_db,
            pathloss_intercept_db: self.pathloss_intercept_db,
            pathloss_slope_db: self.pathloss_slope_db,
            bandwidth_hz: self.bandwidth_hz,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<&SystemConfig> for ConfigFile {
    fn from(cfg: &SystemConfig) -> Self {
        let k = cfg.users_per_cell;
        let mw: Vec<f64> = cfg.max_power.iter().map(|w| w * 1e3).collect();
        ConfigFile {
            num_antennas: cfg.num_antennas,
            coherence_length: cfg.coherence_length,
            pilot_length: cfg.pilot_length,
            users_per_cell: k,
            num_cells: cfg.num_cells,
            noise_dbm: watts_to_dbm(cfg.noise_power),
            max_power_mw: PerUser::collapse(&mw, k),
            se_target: PerUser::collapse(&cfg.se_target, k),
            area_side_m: cfg.area_side,
            min_bs_distance_m: cfg.min_bs_distance,
            shadow_std_db: cfg.shadow_std_db,
            pathloss_intercept_db: cfg.pathloss_intercept_db,
            pathloss_slope_db: cfg.pathloss_slope_db,
            bandwidth_hz: cfg.bandwidth_hz,
        }
    }
}
