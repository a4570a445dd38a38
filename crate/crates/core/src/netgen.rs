//! Random network realizations on a wrap-around square-cell layout.
//!
//! BSs sit at the centers of a √L×√L grid covering a square of side
//! `area_side`. The square is treated as a single torus, so distances are
//! taken over the nine periodic images.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::{db_to_linear, SystemConfig};
use crate::error::{Error, Result};

/// Upper bound on position redraws for one user before the drop is
/// declared degenerate.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }
}

/// Torus distance: the smallest Euclidean distance between `a` and any of
/// the nine images of `b` shifted by multiples of `period`.
pub fn wrap_distance(a: Point, b: Point, period: f64) -> f64 {
    let mut best = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = b.x + sx * period - a.x;
            let dy = b.y + sy * period - a.y;
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

/// Log-distance path-loss law `intercept - slope·log10(d / 1 km) + z`, in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLoss {
    pub intercept_db: f64,
    pub slope_db: f64,
}

impl Default for PathLoss {
    fn default() -> Self {
        PathLoss {
            intercept_db: -148.1,
            slope_db: 37.6,
        }
    }
}

impl PathLoss {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        PathLoss {
            intercept_db: cfg.pathloss_intercept_db,
            slope_db: cfg.pathloss_slope_db,
        }
    }

    pub fn beta_db(&self, distance_m: f64, shadow_db: f64) -> Result<f64> {
        if !(distance_m > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "path-loss distance must be positive, got {distance_m}"
            )));
        }
        Ok(self.intercept_db - self.slope_db * (distance_m / 1000.0).log10() + shadow_db)
    }
}

/// Large-scale fading in dB under the reference 3GPP-style law.
pub fn pathloss_beta_db(distance_m: f64, shadow_db: f64) -> Result<f64> {
    PathLoss::default().beta_db(distance_m, shadow_db)
}

/// One drop of users plus the large-scale fading of every (user, BS) link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRealization {
    pub num_cells: usize,
    pub users_per_cell: usize,
    pub bs_positions: Vec<Point>,
    /// Indexed by `l * K + k`.
    pub user_positions: Vec<Point>,
    /// Linear gains, indexed `[(src_cell * K + user) * L + bs]`.
    beta: Vec<f64>,
}

impl NetworkRealization {
    /// Builds a realization from an explicit gain tensor laid out as
    /// `beta[src_cell][user][bs]`. Positions are left at the origin.
    pub fn from_gains(beta: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_cells = beta.len();
        let users_per_cell = beta.first().map_or(0, Vec::len);
        if num_cells == 0 || users_per_cell == 0 {
            return Err(Error::InvalidArgument("empty gain tensor".into()));
        }
        let mut flat = Vec::with_capacity(num_cells * users_per_cell * num_cells);
        for cell in &beta {
            if cell.len() != users_per_cell {
                return Err(Error::InvalidArgument("ragged gain tensor".into()));
            }
            for user in cell {
                if user.len() != num_cells {
                    return Err(Error::InvalidArgument("ragged gain tensor".into()));
                }
                if let Some(g) = user.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
                    return Err(Error::InvalidArgument(format!("gain must be positive, got {g}")));
                }
                flat.extend_from_slice(user);
            }
        }
        Ok(NetworkRealization {
            num_cells,
            users_per_cell,
            bs_positions: vec![Point::new(0.0, 0.0); num_cells],
            user_positions: vec![Point::new(0.0, 0.0); num_cells * users_per_cell],
            beta: flat,
        })
    }

    /// β from user `user` of cell `src_cell` to BS `bs`.
    #[inline]
    pub fn beta(&self, src_cell: usize, user: usize, bs: usize) -> f64 {
        self.beta[(src_cell * self.users_per_cell + user) * self.num_cells + bs]
    }

    pub fn num_users(&self) -> usize {
        self.num_cells * self.users_per_cell
    }

    /// Returns a copy with every gain multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.beta.iter_mut().for_each(|b| *b *= factor);
        out
    }

    pub fn gains(&self) -> &[f64] {
        &self.beta
    }
}

/// Grid-center BS positions, cell `l` at column `l % side`, row `l / side`.
pub fn bs_positions(cfg: &SystemConfig) -> Vec<Point> {
    let side = cfg.cells_per_side();
    let w = cfg.cell_side();
    (0..cfg.num_cells)
        .map(|l| {
            let (col, row) = (l % side, l / side);
            Point::new((col as f64 + 0.5) * w, (row as f64 + 0.5) * w)
        })
        .collect()
}

/// Sub-seed for drop `index` of a campaign rooted at `root` (SplitMix64).
pub fn derive_seed(root: u64, index: u64) -> u64 {
    let mut z = root ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draws one realization: users uniform in their own cell (redrawn until at
/// least `min_bs_distance` from the serving BS) and i.i.d. log-normal
/// shadowing on every (user, BS) link.
pub fn generate_drop(cfg: &SystemConfig, seed: u64) -> Result<NetworkRealization> {
    generate_drop_bounded(cfg, seed, MAX_PLACEMENT_ATTEMPTS)
}

/// [`generate_drop`] with an explicit cap on position redraws per user.
pub fn generate_drop_bounded(
    cfg: &SystemConfig,
    seed: u64,
    max_attempts: usize,
) -> Result<NetworkRealization> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (num_cells, k_users) = (cfg.num_cells, cfg.users_per_cell);
    let side = cfg.cells_per_side();
    let w = cfg.cell_side();
    let bs = bs_positions(cfg);
    let pathloss = PathLoss::from_config(cfg);
    let shadow = Normal::new(0.0, cfg.shadow_std_db)
        .map_err(|e| Error::InvalidConfig(format!("shadowing: {e}")))?;

    let mut user_positions = Vec::with_capacity(num_cells * k_users);
    let mut beta = Vec::with_capacity(num_cells * k_users * num_cells);
    for l in 0..num_cells {
        let origin = Point::new((l % side) as f64 * w, (l / side) as f64 * w);
        for k in 0..k_users {
            let mut attempts = 0;
            let pos = loop {
                if attempts == max_attempts {
                    return Err(Error::DegenerateDrop {
                        cell: l,
                        user: k,
                        attempts,
                    });
                }
                attempts += 1;
                let p = Point::new(
                    origin.x + rng.random::<f64>() * w,
                    origin.y + rng.random::<f64>() * w,
                );
                if wrap_distance(p, bs[l], cfg.area_side) >= cfg.min_bs_distance {
                    break p;
                }
            };
            user_positions.push(pos);
            for bs_pos in &bs {
                let d = wrap_distance(pos, *bs_pos, cfg.area_side);
                let z = shadow.sample(&mut rng);
                beta.push(db_to_linear(pathloss.beta_db(d, z)?));
            }
        }
    }
    Ok(NetworkRealization {
        num_cells,
        users_per_cell: k_users,
        bs_positions: bs,
        user_positions,
        beta,
    })
}
