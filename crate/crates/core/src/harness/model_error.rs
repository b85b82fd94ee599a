//! Sum-rate design against the true circuit response.
//!
//! Every element gets one capacitance, which fixes its reflection in every
//! band at once. The reference design alternates WMMSE beamformer updates with
//! an element-wise exhaustive search over a capacitance grid that maximises the
//! exact sum rate; the simplified model is then judged against it for rate and
//! wall-clock time.

use std::time::Instant;

use rand::Rng;

use crate::downlink::{effective_channels, sinr_from_channel, BeamformerSet};
use crate::reflection::reflection_coefficient;
use crate::scenario::{ChannelSet, SystemConfig};
use crate::sum_rate::{nu_from_channel, random_init, run_algorithm2, update_w, Algorithm2Options};
use crate::{CMat, CVec, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct ModelErrorOptions {
    pub grid_points: usize,
    /// Keep the reflection amplitude `|theta| < 1` instead of the phase only.
    pub include_amplitude: bool,
    pub max_outer: usize,
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for ModelErrorOptions {
    fn default() -> Self {
        Self {
            grid_points: 512,
            include_amplitude: false,
            max_outer: 100,
            tol: 1e-4,
            max_sweeps: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignResult {
    pub sum_rate: f64,
    pub seconds: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelErrorResult {
    pub simplified: DesignResult,
    pub true_model: DesignResult,
    /// Capacitance (F) of every element in the true-model design.
    pub capacitances: Vec<f64>,
}

/// `table[c][s]`: reflection of grid capacitance `c` in band `s`.
pub fn reflection_table(cfg: &SystemConfig, grid: &[f64], include_amplitude: bool) -> Result<Vec<Vec<C64>>> {
    let plan = cfg.band_plan();
    grid.iter()
        .map(|&c| {
            plan.as_slice()
                .iter()
                .map(|&f| {
                    let t = reflection_coefficient(&cfg.circuit, c, f)?;
                    Ok(if include_amplitude { t } else { C64::from_polar(1.0, t.arg()) })
                })
                .collect()
        })
        .collect()
}

/// Grid index minimising `sum_s 2 Re{conj(theta_s) zeta_s}`, the element-wise
/// phase objective of the weighted-MSE problem.
pub fn best_capacitance(zeta: &[C64], table: &[Vec<C64>]) -> usize {
    let cost = |row: &Vec<C64>| row.iter().zip(zeta).map(|(t, z)| (t.conj() * z).re).sum::<f64>();
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (i, row) in table.iter().enumerate() {
        let v = cost(row);
        if v < best_v {
            best_v = v;
            best = i;
        }
    }
    best
}

/// Received amplitudes `rx[s][k][j] = h_{s,k}^H w_{s,j}` and their per-element
/// sensitivities `d[s][k][j][m]`.
struct RateCache {
    rx: Vec<Vec<Vec<C64>>>,
    d: Vec<Vec<Vec<CVec>>>,
}

impl RateCache {
    fn new(channels: &ChannelSet, thetas: &[CVec], w: &[CMat]) -> Self {
        let mut rx = Vec::new();
        let mut d = Vec::new();
        for (s, bs) in channels.bs.iter().enumerate() {
            let h = effective_channels(channels, &thetas[s], s);
            let k = bs.num_users();
            let gw: Vec<CVec> = (0..k).map(|j| &bs.g * w[s].column(j)).collect();
            rx.push(
                (0..k)
                    .map(|u| (0..k).map(|j| h[u].dotc(&w[s].column(j).into_owned())).collect())
                    .collect(),
            );
            d.push(
                (0..k)
                    .map(|u| (0..k).map(|j| bs.h_r[u].zip_map(&gw[j], |a, x| a.conj() * x)).collect())
                    .collect(),
            );
        }
        Self { rx, d }
    }

    /// Sum rate if element `m` moves by `delta[s]` in every band.
    fn rate_with(&self, m: usize, delta: &[C64], sigma2: f64) -> f64 {
        let mut total = 0.0;
        for (s, rx) in self.rx.iter().enumerate() {
            let k = rx.len();
            for u in 0..k {
                let mut signal = 0.0;
                let mut interference = sigma2;
                for j in 0..k {
                    let p = (rx[u][j] + delta[s] * self.d[s][u][j][m]).norm_sqr();
                    if j == u {
                        signal = p;
                    } else {
                        interference += p;
                    }
                }
                total += (1.0 + signal / interference).log2();
            }
        }
        total
    }

    fn apply(&mut self, m: usize, delta: &[C64]) {
        for (s, rx) in self.rx.iter_mut().enumerate() {
            for (u, row) in rx.iter_mut().enumerate() {
                for (j, v) in row.iter_mut().enumerate() {
                    *v += delta[s] * self.d[s][u][j][m];
                }
            }
        }
    }
}

fn exact_rate(channels: &ChannelSet, thetas: &[CVec], w: &[CMat], sigma2: f64) -> f64 {
    (0..channels.num_bs())
        .map(|s| {
            effective_channels(channels, &thetas[s], s)
                .iter()
                .enumerate()
                .map(|(k, h)| (1.0 + sinr_from_channel(h, &w[s], k, sigma2)).log2())
                .sum::<f64>()
        })
        .sum()
}

fn mmse_directions(h: &[CVec], power: f64, sigma2: f64) -> CMat {
    let k = h.len();
    let nt = h[0].len();
    let mut a = CMat::identity(nt, nt) * C64::from(k as f64 * sigma2 / power);
    for x in h {
        a += x * x.adjoint();
    }
    let chol = a.cholesky().expect("regularised Gram matrix is positive definite");
    let mut w = CMat::zeros(nt, k);
    for (c, x) in h.iter().enumerate() {
        let v = chol.solve(x);
        let n = v.norm();
        w.set_column(c, &(v * C64::from((power / k as f64).sqrt() / n)));
    }
    w
}

/// Reference design over capacitances. Returns rate, capacitance indices,
/// beamformers and outer iterations.
pub fn true_model_design(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    table: &[Vec<C64>],
    init: &[usize],
    opts: &ModelErrorOptions,
) -> Result<(f64, Vec<usize>, BeamformerSet, usize)> {
    let num_bs = channels.num_bs();
    let m = channels.num_elements();
    let sigma2 = cfg.sigma2;
    let mut idx = init.to_vec();
    let thetas_of = |idx: &[usize]| -> Vec<CVec> {
        (0..num_bs)
            .map(|s| CVec::from_iterator(m, idx.iter().map(|&c| table[c][s])))
            .collect()
    };
    let mut thetas = thetas_of(&idx);
    let mut w: Vec<CMat> = (0..num_bs)
        .map(|s| mmse_directions(&effective_channels(channels, &thetas[s], s), cfg.power, sigma2))
        .collect();
    let mut rate = exact_rate(channels, &thetas, &w, sigma2);
    let mut iterations = 0;

    for _ in 0..opts.max_outer {
        iterations += 1;
        for s in 0..num_bs {
            let h = effective_channels(channels, &thetas[s], s);
            let nu: Vec<C64> = (0..h.len()).map(|k| nu_from_channel(&h[k], &w[s], k, sigma2)).collect();
            let mu: Vec<f64> = (0..h.len())
                .map(|k| 1.0 + sinr_from_channel(&h[k], &w[s], k, sigma2))
                .collect();
            w[s] = update_w(&h, &nu, &mu, cfg.power)?.0;
        }

        let mut cache = RateCache::new(channels, &thetas, &w);
        let mut current = exact_rate(channels, &thetas, &w, sigma2);
        let mut delta = vec![C64::new(0.0, 0.0); num_bs];
        for _ in 0..opts.max_sweeps {
            let mut improved = false;
            for i in 0..m {
                let mut best = (idx[i], current);
                for (c, row) in table.iter().enumerate() {
                    for s in 0..num_bs {
                        delta[s] = row[s] - thetas[s][i];
                    }
                    let r = cache.rate_with(i, &delta, sigma2);
                    if r > best.1 * (1.0 + 1e-12) {
                        best = (c, r);
                    }
                }
                if best.0 != idx[i] {
                    for s in 0..num_bs {
                        delta[s] = table[best.0][s] - thetas[s][i];
                        thetas[s][i] = table[best.0][s];
                    }
                    cache.apply(i, &delta);
                    idx[i] = best.0;
                    current = best.1;
                    improved = true;
                }
            }
            if !improved {
                break;
            }
        }

        let next = exact_rate(channels, &thetas, &w, sigma2);
        let done = (next - rate).abs() <= opts.tol * next.abs().max(1.0);
        rate = next;
        if done {
            break;
        }
    }
    Ok((rate, idx, BeamformerSet { w }, iterations))
}

/// Runs both designs on the same channels and times each one end to end.
pub fn model_error_study<R: Rng + ?Sized>(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
    opts: &ModelErrorOptions,
) -> Result<ModelErrorResult> {
    let m = channels.num_elements();
    let init_state = random_init(channels.num_bs(), m, rng);
    let init_idx: Vec<usize> = (0..m).map(|_| rng.random_range(0..opts.grid_points)).collect();

    let t0 = Instant::now();
    let simplified = run_algorithm2(channels, cfg, &init_state, &Algorithm2Options::default())?;
    let simplified = DesignResult {
        sum_rate: simplified.sum_rate(),
        seconds: t0.elapsed().as_secs_f64(),
        iterations: simplified.iterations(),
    };

    let t0 = Instant::now();
    let sweep = crate::reflection::SweepSpec { points: opts.grid_points, ..cfg.sweep };
    let grid = sweep.grid();
    let table = reflection_table(cfg, &grid, opts.include_amplitude)?;
    let (rate, idx, _, iterations) = true_model_design(channels, cfg, &table, &init_idx, opts)?;
    let true_model = DesignResult {
        sum_rate: rate,
        seconds: t0.elapsed().as_secs_f64(),
        iterations,
    };
    Ok(ModelErrorResult {
        simplified,
        true_model,
        capacitances: idx.iter().map(|&i| grid[i]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reflection::{wrap_phase, FrequencyPlan};
    use crate::scenario::{sub_stream, trial_channels};
    use crate::sum_rate::element_choice;

    #[test]
    fn grid_search_agrees_with_closed_form_phase() {
        // one band whose phase covers the full circle over the sweep
        let cfg = SystemConfig {
            s: 1,
            frequencies: FrequencyPlan::new(vec![2.345e9]).unwrap(),
            ..SystemConfig::default()
        };
        let grid = crate::reflection::SweepSpec { points: 4096, c_min: 0.2e-12, c_max: 20e-12, ..cfg.sweep }.grid();
        let table = reflection_table(&cfg, &grid, false).unwrap();
        let phases: Vec<f64> = table.iter().map(|r| wrap_phase(r[0].arg())).collect();
        let step = phases.windows(2).map(|w| (w[1] - w[0]).abs()).filter(|d| *d < 1.0).fold(0.0, f64::max);
        for z in [C64::new(0.3, -0.8), C64::new(-1.0, 0.1), C64::new(0.05, 0.4)] {
            let c = best_capacitance(&[z], &table);
            let (_, phi) = element_choice(&[z]);
            let err = (C64::from_polar(1.0, phi) - table[c][0]).norm();
            assert!(err <= step.max(1e-3), "{err} vs grid step {step}");
        }
    }

    #[test]
    fn true_model_design_is_consistent() {
        let cfg = SystemConfig { m: 6, ..SystemConfig::default() };
        let (_, ch) = trial_channels(&cfg, 0).unwrap();
        let res = model_error_study(&ch, &cfg, &mut sub_stream(0, 1), &ModelErrorOptions { grid_points: 64, ..Default::default() })
            .unwrap();
        assert_eq!(res.capacitances.len(), 6);
        assert!(res.true_model.sum_rate > 0.0 && res.simplified.sum_rate > 0.0);
    }
}
