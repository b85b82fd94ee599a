//! Scenario geometry, path loss and Rayleigh channel realisations.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::linalg::numerical_rank;
use crate::reflection::{CircuitParams, FrequencyPlan, SweepSpec};
use crate::{CMat, CVec, Error, Result, C64};

/// `x` dBm in watts.
pub fn dbm_to_watts(x: f64) -> f64 {
    10f64.powf((x - 30.0) / 10.0)
}

/// `x` dB as a linear ratio.
pub fn db_to_linear(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Everything that defines one scenario. Powers and ratios are linear SI values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Number of BSs / bands.
    pub s: usize,
    /// Users per BS.
    pub k: usize,
    /// BS antennas.
    pub nt: usize,
    /// IRS elements.
    pub m: usize,
    /// Noise power (W).
    pub sigma2: f64,
    /// Per-user SINR target (linear), power minimisation.
    pub gamma: f64,
    /// Per-BS power budget (W), sum-rate maximisation.
    pub power: f64,
    /// BS to IRS distance (m).
    pub l: f64,
    /// IRS to user distance (m).
    pub d: f64,
    /// Path gain at the reference distance (linear).
    pub c0: f64,
    /// Reference distance (m).
    pub d0: f64,
    pub alpha_bi: f64,
    pub alpha_iu: f64,
    pub alpha_bu: f64,
    pub seed: u64,
    pub frequencies: FrequencyPlan,
    pub circuit: CircuitParams,
    pub sweep: SweepSpec,
    /// Redraw user positions in every trial (otherwise fixed by the master seed).
    pub redraw_users: bool,
}

impl Default for SystemConfig {
    /// Desk-scale defaults.
    fn default() -> Self {
        Self {
            s: 3,
            k: 2,
            nt: 4,
            m: 16,
            sigma2: dbm_to_watts(-70.0),
            gamma: db_to_linear(5.0),
            power: db_to_linear(-5.0),
            l: 52.0,
            d: 2.0,
            c0: db_to_linear(-30.0),
            d0: 1.0,
            alpha_bi: 2.5,
            alpha_iu: 2.8,
            alpha_bu: 3.5,
            seed: 1,
            frequencies: FrequencyPlan::reference(),
            circuit: CircuitParams::default(),
            sweep: SweepSpec::default(),
            redraw_users: true,
        }
    }
}

impl SystemConfig {
    /// Full-size deployment: 16 antennas, 3 users per cell, 64 elements.
    pub fn paper_scale() -> Self {
        Self {
            k: 3,
            nt: 16,
            m: 64,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.s == 0 || self.k == 0 || self.m == 0 {
            return bad("S, K and M must be at least 1");
        }
        if self.nt < self.k {
            return bad("Nt must be at least K");
        }
        let positive = [self.sigma2, self.gamma, self.power, self.l, self.d, self.d0];
        if positive.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return bad("powers, SINR target and distances must be positive");
        }
        if !(self.c0 >= 0.0) {
            return bad("C0 must be non-negative");
        }
        if self.frequencies.len() < self.s {
            return bad("frequency plan has fewer bands than BSs");
        }
        self.circuit.validate()
    }

    /// First `s` bands of the plan.
    pub fn band_plan(&self) -> FrequencyPlan {
        FrequencyPlan::new(self.frequencies.as_slice()[..self.s].to_vec())
            .expect("prefix of a valid plan")
    }
}

/// Distance-dependent path gain `C0 (d / d0)^-alpha`.
pub fn path_gain(cfg: &SystemConfig, d: f64, alpha: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("distance must be positive (got {d})")));
    }
    Ok(cfg.c0 * (d / cfg.d0).powf(-alpha))
}

/// Planar positions (m) with the IRS at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub bs: Vec<[f64; 2]>,
    /// `users[s][k]`.
    pub users: Vec<Vec<[f64; 2]>>,
}

fn on_circle<R: Rng + ?Sized>(rng: &mut R, radius: f64) -> [f64; 2] {
    let a: f64 = rng.random_range(0.0..2.0 * PI);
    [radius * a.cos(), radius * a.sin()]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// BSs uniformly on the circle of radius `L`, users uniformly on the circle of
/// radius `D`, all around the IRS.
pub fn place_scenario<R: Rng + ?Sized>(cfg: &SystemConfig, rng: &mut R) -> Geometry {
    let bs = (0..cfg.s).map(|_| on_circle(rng, cfg.l)).collect();
    let users = (0..cfg.s)
        .map(|_| (0..cfg.k).map(|_| on_circle(rng, cfg.d)).collect())
        .collect();
    Geometry { bs, users }
}

/// Channels of one BS and its users.
#[derive(Debug, Clone, PartialEq)]
pub struct BsChannels {
    /// BS to IRS, `M x Nt`.
    pub g: CMat,
    /// IRS to user `k`, length `M`.
    pub h_r: Vec<CVec>,
    /// BS to user `k`, length `Nt`.
    pub h_d: Vec<CVec>,
}

impl BsChannels {
    pub fn num_users(&self) -> usize {
        self.h_d.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.g.ncols()
    }

    pub fn num_elements(&self) -> usize {
        self.g.nrows()
    }

    /// `G^H H_r + H_d`, the `Nt x K` equivalent channel with unit reflection.
    pub fn equivalent(&self) -> CMat {
        let k = self.num_users();
        let mut out = CMat::zeros(self.num_antennas(), k);
        for u in 0..k {
            let col = self.g.adjoint() * &self.h_r[u] + &self.h_d[u];
            out.set_column(u, &col);
        }
        out
    }
}

/// Complete channel state of the system.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub bs: Vec<BsChannels>,
}

impl ChannelSet {
    pub fn num_bs(&self) -> usize {
        self.bs.len()
    }

    pub fn num_elements(&self) -> usize {
        self.bs.first().map_or(0, |b| b.num_elements())
    }

    /// Same direct links with every IRS cascade removed.
    pub fn without_irs(&self) -> Self {
        Self {
            bs: self
                .bs
                .iter()
                .map(|b| BsChannels {
                    g: CMat::zeros(b.g.nrows(), b.g.ncols()),
                    h_r: b.h_r.iter().map(|h| CVec::zeros(h.len())).collect(),
                    h_d: b.h_d.clone(),
                })
                .collect(),
        }
    }

    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.bs.len() != cfg.s {
            return Err(Error::Dimension("wrong number of BS channel blocks".into()));
        }
        for b in &self.bs {
            let ok = b.g.shape() == (cfg.m, cfg.nt)
                && b.h_r.len() == cfg.k
                && b.h_d.len() == cfg.k
                && b.h_r.iter().all(|h| h.len() == cfg.m)
                && b.h_d.iter().all(|h| h.len() == cfg.nt);
            if !ok {
                return Err(Error::Dimension("channel shapes do not match the configuration".into()));
            }
            let finite = b.g.iter().chain(b.h_r.iter().flatten()).chain(b.h_d.iter().flatten());
            if finite.clone().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::Numerical("non-finite channel entry".into()));
            }
        }
        Ok(())
    }
}

/// One CN(0, variance) sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let sd = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(sd * re, sd * im)
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, variance: f64) -> CVec {
    CVec::from_fn(n, |_, _| complex_gaussian(rng, variance))
}

const MAX_REDRAWS: usize = 100;

/// Draws i.i.d. Rayleigh channels with per-link path gains. If an equivalent
/// channel `G^H H_r + H_d` is numerically rank deficient the BS block is redrawn.
pub fn draw_channels<R: Rng + ?Sized>(
    cfg: &SystemConfig,
    geometry: &Geometry,
    rng: &mut R,
) -> Result<ChannelSet> {
    let mut bs = Vec::with_capacity(cfg.s);
    for s in 0..cfg.s {
        let g_var = path_gain(cfg, cfg.l, cfg.alpha_bi)?;
        let mut redraws = 0;
        let block = loop {
            let g = CMat::from_fn(cfg.m, cfg.nt, |_, _| complex_gaussian(rng, g_var));
            let mut h_r = Vec::with_capacity(cfg.k);
            let mut h_d = Vec::with_capacity(cfg.k);
            for &u in &geometry.users[s] {
                let d_iu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                h_r.push(gaussian_vec(rng, cfg.m, path_gain(cfg, d_iu, cfg.alpha_iu)?));
                h_d.push(gaussian_vec(
                    rng,
                    cfg.nt,
                    path_gain(cfg, dist(geometry.bs[s], u), cfg.alpha_bu)?,
                ));
            }
            let block = BsChannels { g, h_r, h_d };
            if cfg.c0 == 0.0 {
                break block;
            }
            let eq = block.equivalent();
            // rank test on the channel normalised to unit average power
            let scale = eq.norm() / ((eq.nrows() * eq.ncols()) as f64).sqrt();
            if scale > 0.0 && numerical_rank(&(eq / C64::new(scale, 0.0)), 1e-10) == cfg.k.min(cfg.nt) {
                break block;
            }
            redraws += 1;
            log::warn!("BS {s}: rank-deficient equivalent channel, redrawing ({redraws})");
            if redraws >= MAX_REDRAWS {
                return Err(Error::Numerical(format!(
                    "BS {s}: no full-rank channel after {MAX_REDRAWS} draws"
                )));
            }
        };
        bs.push(block);
    }
    Ok(ChannelSet { bs })
}

/// Independent, reproducible random stream `stream` derived from a master seed.
pub fn sub_stream(master_seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Geometry and channels of Monte-Carlo trial `trial`.
pub fn trial_channels(cfg: &SystemConfig, trial: u64) -> Result<(Geometry, ChannelSet)> {
    let mut rng = sub_stream(cfg.seed, 2 * trial);
    let mut geometry = place_scenario(cfg, &mut rng);
    if !cfg.redraw_users {
        let mut fixed = sub_stream(cfg.seed, u64::MAX);
        geometry.users = place_scenario(cfg, &mut fixed).users;
    }
    let channels = draw_channels(cfg, &geometry, &mut rng)?;
    Ok((geometry, channels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn reference_distance_gives_reference_gain() {
        let cfg = SystemConfig::default();
        assert_relative_eq!(path_gain(&cfg, 1.0, 2.5).unwrap(), 1e-3, max_relative = 1e-14);
        assert_relative_eq!(path_gain(&cfg, 10.0, 2.0).unwrap(), 1e-5, max_relative = 1e-14);
        // 40-digit evaluation of 1e-3 * 52^-2.5
        assert_relative_eq!(
            path_gain(&cfg, 52.0, 2.5).unwrap(),
            5.128_515_127_822_014_8e-8,
            max_relative = 1e-13
        );
        assert!(path_gain(&cfg, 0.0, 2.0).is_err());
    }

    #[test]
    fn unit_conversions() {
        assert_relative_eq!(dbm_to_watts(-70.0), 1e-10, max_relative = 1e-14);
        assert_relative_eq!(dbm_to_watts(30.0), 1.0);
        assert_relative_eq!(db_to_linear(-30.0), 1e-3, max_relative = 1e-14);
        assert_relative_eq!(linear_to_db(100.0), 20.0);
    }

    #[test]
    fn geometry_lies_on_circles_and_is_deterministic() {
        let cfg = SystemConfig::default();
        let g1 = place_scenario(&cfg, &mut sub_stream(7, 0));
        let g2 = place_scenario(&cfg, &mut sub_stream(7, 0));
        assert_eq!(g1, g2);
        for b in &g1.bs {
            assert!((dist(*b, [0.0, 0.0]) - cfg.l).abs() < 1e-9);
        }
        for u in g1.users.iter().flatten() {
            assert!((dist(*u, [0.0, 0.0]) - cfg.d).abs() < 1e-9);
        }
    }

    #[test]
    fn same_seed_same_channels() {
        let cfg = SystemConfig::default();
        let (g1, c1) = trial_channels(&cfg, 3).unwrap();
        let (g2, c2) = trial_channels(&cfg, 3).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(c1, c2);
        let (_, c3) = trial_channels(&cfg, 4).unwrap();
        assert_ne!(c1, c3);
        c1.validate(&cfg).unwrap();
    }

    #[test]
    fn zero_reference_gain_gives_zero_channels() {
        let cfg = SystemConfig { c0: 0.0, ..SystemConfig::default() };
        let (_, ch) = trial_channels(&cfg, 0).unwrap();
        for b in &ch.bs {
            assert!(b.g.iter().all(|z| z.norm() == 0.0));
            assert!(b.h_r.iter().flatten().chain(b.h_d.iter().flatten()).all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn bs_irs_second_moment_matches_path_gain() {
        let cfg = SystemConfig { s: 1, k: 1, nt: 1, m: 1, ..SystemConfig::default() };
        let geo = place_scenario(&cfg, &mut sub_stream(1, 0));
        let mut rng = sub_stream(11, 0);
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let ch = draw_channels(&cfg, &geo, &mut rng).unwrap();
            acc += ch.bs[0].g[(0, 0)].norm_sqr();
        }
        let eta = path_gain(&cfg, cfg.l, cfg.alpha_bi).unwrap();
        assert!((acc / n as f64 / eta - 1.0).abs() < 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(SystemConfig::default().validate().is_ok());
        assert!(SystemConfig { nt: 1, k: 2, ..Default::default() }.validate().is_err());
        assert!(SystemConfig { m: 0, ..Default::default() }.validate().is_err());
        assert!(SystemConfig { s: 4, ..Default::default() }.validate().is_err());
    }
}
