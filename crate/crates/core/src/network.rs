//! Network topologies and channel realizations.
//!
//! BS `0` is the macro base station at the origin; the remaining BSs are small
//! cells dropped uniformly in the macro disc. Every node draws its own
//! Rayleigh power fading `|CN(0,1)|^2` per (subcarrier, transmitting BS) from
//! a dedicated ChaCha stream, so adding an eavesdropper never perturbs the
//! channels of the nodes that already exist.

use std::path::Path;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distances below this are clamped before applying the path loss.
pub const MIN_DISTANCE_M: f64 = 1.0;

/// Converts a power given in dB relative to 1 W into watts.
pub fn db_to_watts(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    #[serde(rename = "F")]
    pub bs_count: usize,
    #[serde(rename = "M_f")]
    pub users_per_bs: Vec<usize>,
    #[serde(rename = "E")]
    pub eavesdroppers: usize,
    #[serde(rename = "N")]
    pub subcarriers: usize,
    /// Maximum number of users sharing one subcarrier of one BS.
    pub ell: usize,
    /// Per-BS power budget in watts.
    pub p_max: Vec<f64>,
    /// Noise power per subcarrier in watts.
    pub sigma2: f64,
    pub alpha: f64,
    pub r_mbs: f64,
    pub r_sbs: f64,
    /// Bound on the squared small-scale fading estimation error.
    pub epsilon: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            bs_count: 2,
            users_per_bs: vec![3, 3],
            eavesdroppers: 2,
            subcarriers: 2,
            ell: 2,
            p_max: vec![db_to_watts(16.0), db_to_watts(6.0)],
            sigma2: 1e-13,
            alpha: 4.0,
            r_mbs: 1500.0,
            r_sbs: 15.0,
            epsilon: 0.0,
            seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.bs_count < 1 {
            return bad("F must be at least 1".into());
        }
        if self.users_per_bs.len() != self.bs_count {
            return bad(format!(
                "M_f has {} entries but F = {}",
                self.users_per_bs.len(),
                self.bs_count
            ));
        }
        if self.users_per_bs.iter().any(|&m| m < 1) {
            return bad("every BS needs at least one user".into());
        }
        if self.subcarriers < 1 {
            return bad("N must be at least 1".into());
        }
        let max_m = *self.users_per_bs.iter().max().unwrap();
        if self.ell < 1 || self.ell > max_m {
            return bad(format!("ell = {} outside [1, {max_m}]", self.ell));
        }
        if self.p_max.len() != self.bs_count {
            return bad(format!(
                "p_max has {} entries but F = {}",
                self.p_max.len(),
                self.bs_count
            ));
        }
        if self.p_max.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("p_max must be positive".into());
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return bad("sigma2 must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be positive".into());
        }
        if !(self.r_mbs > 0.0 && self.r_sbs > 0.0) {
            return bad("coverage radii must be positive".into());
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be non-negative".into());
        }
        Ok(())
    }

    pub fn total_budget(&self) -> f64 {
        self.p_max.iter().sum()
    }

    /// Number of (BS, user, subcarrier) power coordinates.
    pub fn coordinate_count(&self) -> usize {
        self.users_per_bs.iter().sum::<usize>() * self.subcarriers
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Positions {
    pub bs: Vec<[f64; 2]>,
    /// `users[f][m]`: user `m` served by BS `f`.
    pub users: Vec<Vec<[f64; 2]>>,
    pub eavesdroppers: Vec<[f64; 2]>,
}

/// An immutable network realization.
///
/// Gain tables hold squared magnitudes:
/// * `g_user[f][m][b][n]`: from BS `b` to user `m` of cell `f` on subcarrier `n`;
/// * `g_eave_*[b][e][n]`: from BS `b` to eavesdropper `e` on subcarrier `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub config: NetworkConfig,
    pub positions: Positions,
    pub g_user: Vec<Vec<Vec<Vec<f64>>>>,
    pub g_eave_true: Vec<Vec<Vec<f64>>>,
    pub g_eave_est: Vec<Vec<Vec<f64>>>,
}

fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

fn uniform_in_disc(rng: &mut ChaCha8Rng, center: [f64; 2], radius: f64) -> [f64; 2] {
    let r = radius * rng.random::<f64>().sqrt();
    let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
    [center[0] + r * theta.cos(), center[1] + r * theta.sin()]
}

fn stream(seed: u64, kind: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 32) | index);
    rng
}

const STREAM_BS: u64 = 1;
const STREAM_USER: u64 = 2;
const STREAM_EAVE: u64 = 3;

/// Draws a reproducible instance for `config`.
pub fn generate(config: &NetworkConfig) -> Result<NetworkInstance> {
    config.validate()?;
    let f_count = config.bs_count;
    let n_count = config.subcarriers;

    let mut bs = vec![[0.0, 0.0]];
    for b in 1..f_count {
        let mut rng = stream(config.seed, STREAM_BS, b as u64);
        bs.push(uniform_in_disc(&mut rng, [0.0, 0.0], config.r_mbs));
    }

    let path_loss = |d: f64| d.max(MIN_DISTANCE_M).powf(-config.alpha);

    let mut users = Vec::with_capacity(f_count);
    let mut g_user = Vec::with_capacity(f_count);
    for f in 0..f_count {
        let radius = if f == 0 { config.r_mbs } else { config.r_sbs };
        let mut cell_pos = Vec::new();
        let mut cell_gain = Vec::new();
        for m in 0..config.users_per_bs[f] {
            let mut rng = stream(config.seed, STREAM_USER, ((f as u64) << 16) | m as u64);
            let pos = uniform_in_disc(&mut rng, bs[f], radius);
            let gains: Vec<Vec<f64>> = (0..f_count)
                .map(|b| {
                    let pl = path_loss(distance(pos, bs[b]));
                    (0..n_count)
                        .map(|_| pl * rng.sample::<f64, _>(Exp1))
                        .collect()
                })
                .collect();
            cell_pos.push(pos);
            cell_gain.push(gains);
        }
        users.push(cell_pos);
        g_user.push(cell_gain);
    }

    let mut eaves = Vec::with_capacity(config.eavesdroppers);
    let mut g_true = vec![vec![vec![0.0; n_count]; config.eavesdroppers]; f_count];
    let mut g_est = g_true.clone();
    for e in 0..config.eavesdroppers {
        let mut rng = stream(config.seed, STREAM_EAVE, e as u64);
        let pos = uniform_in_disc(&mut rng, [0.0, 0.0], config.r_mbs);
        for b in 0..f_count {
            let pl = path_loss(distance(pos, bs[b]));
            for n in 0..n_count {
                let fading: f64 = rng.sample(Exp1);
                // The error draw is consumed even when epsilon = 0 so that
                // instances differing only in epsilon share all other draws.
                let u: f64 = rng.random_range(-1.0..=1.0);
                let truth = pl * fading;
                let perturbed = truth + u * config.epsilon * pl;
                g_true[b][e][n] = truth;
                g_est[b][e][n] = if perturbed > 0.0 { perturbed } else { 1e-3 * truth };
            }
        }
        eaves.push(pos);
    }

    Ok(NetworkInstance {
        config: config.clone(),
        positions: Positions {
            bs,
            users,
            eavesdroppers: eaves,
        },
        g_user,
        g_eave_true: g_true,
        g_eave_est: g_est,
    })
}

impl NetworkInstance {
    /// Assembles an instance from explicit tables and validates it.
    pub fn from_parts(
        config: NetworkConfig,
        positions: Positions,
        g_user: Vec<Vec<Vec<Vec<f64>>>>,
        g_eave_true: Vec<Vec<Vec<f64>>>,
        g_eave_est: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let inst = Self {
            config,
            positions,
            g_user,
            g_eave_true,
            g_eave_est,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn bs_count(&self) -> usize {
        self.config.bs_count
    }

    pub fn users_in(&self, f: usize) -> usize {
        self.config.users_per_bs[f]
    }

    pub fn subcarriers(&self) -> usize {
        self.config.subcarriers
    }

    pub fn eavesdroppers(&self) -> usize {
        self.config.eavesdroppers
    }

    pub fn sigma2(&self) -> f64 {
        self.config.sigma2
    }

    /// Serving-link gain `|h^f_{m,n}|^2`.
    pub fn own_gain(&self, f: usize, m: usize, n: usize) -> f64 {
        self.g_user[f][m][f][n]
    }

    /// Large-scale path loss from BS `b` to eavesdropper `e`.
    pub fn eave_path_loss(&self, b: usize, e: usize) -> f64 {
        distance(self.positions.bs[b], self.positions.eavesdroppers[e])
            .max(MIN_DISTANCE_M)
            .powf(-self.config.alpha)
    }

    /// Bound on `|g_eave_true - g_eave_est|` for the (b, e) link in gain units.
    pub fn eave_error_bound(&self, b: usize, e: usize) -> f64 {
        self.config.epsilon * self.eave_path_loss(b, e)
    }

    pub fn validate(&self) -> Result<()> {
        self.config
            .validate()
            .map_err(|e| Error::schema("config", e.to_string()))?;
        let c = &self.config;
        let (f_count, n_count, e_count) = (c.bs_count, c.subcarriers, c.eavesdroppers);

        if self.positions.bs.len() != f_count {
            return Err(Error::schema("positions", "bs count mismatch"));
        }
        if self.positions.users.len() != f_count
            || (0..f_count).any(|f| self.positions.users[f].len() != c.users_per_bs[f])
        {
            return Err(Error::schema("positions", "user count mismatch"));
        }
        if self.positions.eavesdroppers.len() != e_count {
            return Err(Error::schema("positions", "eavesdropper count mismatch"));
        }

        let check = |v: f64| v.is_finite() && v > 0.0;
        let shape_ok = self.g_user.len() == f_count
            && (0..f_count).all(|f| {
                self.g_user[f].len() == c.users_per_bs[f]
                    && self.g_user[f].iter().all(|per_bs| {
                        per_bs.len() == f_count && per_bs.iter().all(|row| row.len() == n_count)
                    })
            });
        if !shape_ok {
            return Err(Error::schema("g_user", "shape mismatch"));
        }
        if self
            .g_user
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .any(|&v| !check(v))
        {
            return Err(Error::schema("g_user", "gains must be finite and positive"));
        }
        for (name, table) in [("g_eave_true", &self.g_eave_true), ("g_eave_est", &self.g_eave_est)] {
            let ok = table.len() == f_count
                && table
                    .iter()
                    .all(|per_e| per_e.len() == e_count && per_e.iter().all(|r| r.len() == n_count));
            if !ok {
                return Err(Error::schema(name, "shape mismatch"));
            }
            if table.iter().flatten().flatten().any(|&v| !check(v)) {
                return Err(Error::schema(name, "gains must be finite and positive"));
            }
        }
        for b in 0..f_count {
            for e in 0..e_count {
                let bound = self.eave_error_bound(b, e) * (1.0 + 1e-12);
                for n in 0..n_count {
                    if (self.g_eave_true[b][e][n] - self.g_eave_est[b][e][n]).abs() > bound {
                        return Err(Error::schema(
                            "g_eave_est",
                            format!("estimate error exceeds epsilon at bs {b}, eave {e}, subcarrier {n}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: NetworkInstance = serde_json::from_str(text).map_err(schema_from_serde)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

fn schema_from_serde(err: serde_json::Error) -> Error {
    let msg = err.to_string();
    let field = msg
        .split('`')
        .nth(1)
        .filter(|_| msg.contains("field"))
        .unwrap_or("<document>")
        .to_string();
    Error::schema(field, msg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, epsilon: f64) -> NetworkConfig {
        NetworkConfig {
            eavesdroppers: 3,
            subcarriers: 3,
            epsilon,
            seed,
            ..NetworkConfig::default()
        }
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate(&small(7, 0.2)).unwrap();
        let b = generate(&small(7, 0.2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let c = generate(&small(8, 0.2)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn zero_epsilon_estimates_are_exact() {
        let inst = generate(&small(3, 0.0)).unwrap();
        assert_eq!(inst.g_eave_est, inst.g_eave_true);
    }

    #[test]
    fn estimate_error_respects_bound() {
        for seed in 0..20 {
            let inst = generate(&small(seed, 0.5)).unwrap();
            for b in 0..inst.bs_count() {
                for e in 0..inst.eavesdroppers() {
                    for n in 0..inst.subcarriers() {
                        let err = (inst.g_eave_true[b][e][n] - inst.g_eave_est[b][e][n]).abs();
                        assert!(err <= inst.eave_error_bound(b, e) * (1.0 + 1e-12));
                        assert!(inst.g_eave_est[b][e][n] > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn users_inside_their_cells() {
        for seed in 0..20 {
            let inst = generate(&small(seed, 0.0)).unwrap();
            for f in 0..inst.bs_count() {
                let r = if f == 0 { inst.config.r_mbs } else { inst.config.r_sbs };
                for p in &inst.positions.users[f] {
                    assert!(distance(*p, inst.positions.bs[f]) <= r + 1e-9);
                }
            }
            assert_eq!(inst.positions.bs[0], [0.0, 0.0]);
        }
    }

    #[test]
    fn gains_follow_path_loss_times_fading() {
        // Reproduce a user's fading from its stream and compare.
        let cfg = small(11, 0.0);
        let inst = generate(&cfg).unwrap();
        let mut rng = stream(cfg.seed, STREAM_USER, (1u64 << 16) | 2);
        let pos = uniform_in_disc(&mut rng, inst.positions.bs[1], cfg.r_sbs);
        assert_eq!(pos, inst.positions.users[1][2]);
        for b in 0..cfg.bs_count {
            let pl = distance(pos, inst.positions.bs[b]).max(1.0).powf(-cfg.alpha);
            for n in 0..cfg.subcarriers {
                let fading: f64 = rng.sample(Exp1);
                assert_eq!(inst.g_user[1][2][b][n], pl * fading);
            }
        }
    }

    #[test]
    fn adding_eavesdroppers_keeps_existing_channels() {
        let two = generate(&NetworkConfig { eavesdroppers: 2, ..small(5, 0.1) }).unwrap();
        let four = generate(&NetworkConfig { eavesdroppers: 4, ..small(5, 0.1) }).unwrap();
        assert_eq!(two.g_user, four.g_user);
        for b in 0..2 {
            assert_eq!(two.g_eave_true[b][..], four.g_eave_true[b][..2]);
        }
    }

    #[test]
    fn path_loss_at_two_meters() {
        let pl = distance([0.0, 0.0], [2.0, 0.0]).max(MIN_DISTANCE_M).powf(-4.0);
        assert_eq!(pl, 0.0625);
    }

    #[test]
    fn config_validation() {
        assert!(NetworkConfig { ell: 4, ..NetworkConfig::default() }.validate().is_err());
        assert!(NetworkConfig { sigma2: 0.0, ..NetworkConfig::default() }.validate().is_err());
        assert!(NetworkConfig { users_per_bs: vec![3], ..NetworkConfig::default() }
            .validate()
            .is_err());
        assert!(NetworkConfig { epsilon: -0.1, ..NetworkConfig::default() }.validate().is_err());
        assert!(NetworkConfig::default().validate().is_ok());
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_watts(16.0) - 39.810717055349734).abs() < 1e-12);
        assert_eq!(db_to_watts(0.0), 1.0);
    }
}
