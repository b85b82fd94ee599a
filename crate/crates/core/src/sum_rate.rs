//! Sum-rate maximisation under per-BS power budgets.
//!
//! The rate is rewritten as a weighted MSE problem with receive scalars `nu`
//! and weights `mu`. Block coordinate descent then cycles through closed-form
//! updates of `nu`, `mu`, the beamformers (with a bisection on the power
//! multiplier) and, element by element, the joint phase and service selection.

use std::io::Write;

use nalgebra::DVector;
use rand::Rng;

use crate::downlink::{effective_channels, mse_from_channel, sinr_from_channel, BeamformerSet};
use crate::reflection::{practical_reflection, wrap_phase, ReflectionState};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::{CMat, CVec, Error, Result, C64};

/// Receive scalars, MSE weights and power multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct WmmseState {
    pub nu: Vec<Vec<C64>>,
    pub mu: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
}

fn all_channels(channels: &ChannelSet, state: &ReflectionState) -> Vec<Vec<CVec>> {
    (0..channels.num_bs())
        .map(|s| effective_channels(channels, &practical_reflection(state, s), s))
        .collect()
}

/// Optimal receive scalars `nu_k = h_k^H w_k / (sum_j |h_k^H w_j|^2 + sigma2)`.
pub fn update_nu(channels: &ChannelSet, state: &ReflectionState, bf: &BeamformerSet, sigma2: f64) -> Vec<Vec<C64>> {
    all_channels(channels, state)
        .iter()
        .zip(&bf.w)
        .map(|(hs, w)| hs.iter().enumerate().map(|(k, h)| nu_from_channel(h, w, k, sigma2)).collect())
        .collect()
}

pub fn nu_from_channel(h: &CVec, w: &CMat, k: usize, sigma2: f64) -> C64 {
    let rx: Vec<C64> = (0..w.ncols()).map(|j| h.dotc(&w.column(j).into_owned())).collect();
    let total: f64 = rx.iter().map(|z| z.norm_sqr()).sum::<f64>() + sigma2;
    rx[k] / total
}

/// MSE of every user for the given receive scalars.
pub fn all_mse(
    channels: &ChannelSet,
    state: &ReflectionState,
    bf: &BeamformerSet,
    nu: &[Vec<C64>],
    sigma2: f64,
) -> Vec<Vec<f64>> {
    all_channels(channels, state)
        .iter()
        .enumerate()
        .map(|(s, hs)| {
            hs.iter()
                .enumerate()
                .map(|(k, h)| mse_from_channel(h, &bf.w[s], nu[s][k], k, sigma2))
                .collect()
        })
        .collect()
}

/// `mu = 1 / MSE`.
pub fn update_mu(mse: &[Vec<f64>]) -> Vec<Vec<f64>> {
    mse.iter().map(|row| row.iter().map(|e| 1.0 / e).collect()).collect()
}

/// Weighted-MSE objective `sum (mu MSE - ln mu)`.
pub fn wmmse_objective(mse: &[Vec<f64>], mu: &[Vec<f64>]) -> f64 {
    mse.iter()
        .flatten()
        .zip(mu.iter().flatten())
        .map(|(e, m)| m * e - m.ln())
        .sum()
}

/// Beamformers of BS `s` minimising the weighted MSE under `||W||_F^2 <= power`.
/// Returns the beamformers and the power multiplier.
pub fn update_w(h: &[CVec], nu: &[C64], mu: &[f64], power: f64) -> Result<(CMat, f64)> {
    let k = h.len();
    let nt = h.first().map_or(0, |x| x.len());
    if k == 0 {
        return Ok((CMat::zeros(nt, 0), 0.0));
    }
    if !(power > 0.0) || mu.iter().any(|&m| !(m > 0.0)) {
        return Err(Error::Domain("power budget and MSE weights must be positive".into()));
    }
    let hbar: Vec<CVec> = h.iter().zip(nu).map(|(x, &n)| x * n).collect();
    let mut a = CMat::zeros(nt, nt);
    for (x, &m) in hbar.iter().zip(mu) {
        a += x * x.adjoint() * C64::from(m);
    }
    let eig = a.symmetric_eigen();
    let ev = eig.eigenvalues;
    let u = eig.eigenvectors;
    let ev_max = ev.iter().copied().fold(0.0, f64::max);
    let floor = 1e-12 * ev_max.max(f64::MIN_POSITIVE);
    // rhs in the eigenbasis; the columns of W live in the range of A
    let rhs: Vec<CVec> = hbar.iter().zip(mu).map(|(x, &m)| u.adjoint() * x * C64::from(m)).collect();
    let power_at = |lambda: f64| -> f64 {
        rhs.iter()
            .map(|r| {
                r.iter()
                    .zip(ev.iter())
                    .map(|(z, &e)| if e + lambda > floor { z.norm_sqr() / (e + lambda).powi(2) } else { 0.0 })
                    .sum::<f64>()
            })
            .sum()
    };
    let build = |lambda: f64| -> CMat {
        let mut w = CMat::zeros(nt, k);
        for (c, r) in rhs.iter().enumerate() {
            let scaled = CVec::from_iterator(
                nt,
                r.iter()
                    .zip(ev.iter())
                    .map(|(z, &e)| if e + lambda > floor { z / (e + lambda) } else { C64::new(0.0, 0.0) }),
            );
            w.set_column(c, &(&u * scaled));
        }
        w
    };

    if power_at(0.0) <= power {
        return Ok((build(0.0), 0.0));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while power_at(hi) >= power {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Numerical("power multiplier bracket diverged".into()));
        }
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if power_at(mid) >= power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((build(hi), hi))
}

/// Phase-dependent part of the weighted MSE for every BS:
/// `theta^H B theta - 2 Re{theta^H c}`.
#[derive(Debug, Clone)]
pub struct ElementQuadratics {
    pub b: Vec<CMat>,
    pub c: Vec<CVec>,
}

impl ElementQuadratics {
    pub fn objective_bs(&self, s: usize, theta: &CVec) -> f64 {
        theta.dotc(&(&self.b[s] * theta)).re - 2.0 * theta.dotc(&self.c[s]).re
    }

    /// Summed over all BSs, with `theta_s` from the reflection state.
    pub fn objective(&self, state: &ReflectionState) -> f64 {
        (0..self.b.len())
            .map(|s| self.objective_bs(s, &practical_reflection(state, s)))
            .sum()
    }

    /// `zeta_{s,m} = sum_{n != m} B_s(m,n) theta_n - c_s(m)`.
    pub fn zeta(&self, s: usize, theta: &CVec, m: usize) -> C64 {
        let row = self.b[s].row(m);
        let full: C64 = (0..theta.len()).map(|n| row[n] * theta[n]).sum();
        full - row[m] * theta[m] - self.c[s][m]
    }
}

/// Builds `B_s`, `c_s` from the beamformers and WMMSE variables.
pub fn build_element_quadratics(channels: &ChannelSet, bf: &BeamformerSet, ws: &WmmseState) -> ElementQuadratics {
    let m = channels.num_elements();
    let mut out = ElementQuadratics { b: Vec::new(), c: Vec::new() };
    for (s, bs) in channels.bs.iter().enumerate() {
        let w = &bf.w[s];
        let k = bs.num_users();
        let gw: Vec<CVec> = (0..k).map(|j| &bs.g * w.column(j)).collect();
        let mut b = CMat::zeros(m, m);
        let mut c = CVec::zeros(m);
        for u in 0..k {
            let nu = ws.nu[s][u];
            let mu = ws.mu[s][u];
            let weight = mu * nu.norm_sqr();
            for j in 0..k {
                // u_kj = conj(d_kj) so that h^H w_j = u_kj^H theta + b_kj
                let ukj = bs.h_r[u].zip_map(&gw[j], |h, x| h * x.conj());
                let bkj = bs.h_d[u].dotc(&w.column(j).into_owned());
                b += &ukj * ukj.adjoint() * C64::from(weight);
                c -= &ukj * (bkj * weight);
                if j == u {
                    c += &ukj * (nu * mu);
                }
            }
        }
        out.b.push(b);
        out.c.push(c);
    }
    out
}

/// Literal enumeration over the serving BS of one element: minimises
/// `sum_{s != s*} Re zeta_s - |zeta_{s*}|`, ties to the smallest index.
/// Returns the chosen BS and its phase.
pub fn element_choice(zeta: &[C64]) -> (usize, f64) {
    let total_re: f64 = zeta.iter().map(|z| z.re).sum();
    let mut best = 0;
    let mut best_v = f64::INFINITY;
    for (s, z) in zeta.iter().enumerate() {
        let v = total_re - z.re - z.norm();
        if v < best_v {
            best_v = v;
            best = s;
        }
    }
    (best, wrap_phase(std::f64::consts::PI + zeta[best].arg()))
}

/// Element phase for a fixed selection: `pi + angle(zeta)`.
fn fixed_choice(zeta: C64) -> f64 {
    wrap_phase(std::f64::consts::PI + zeta.arg())
}

/// Jointly updates phase and selection of element `m`. Returns the serving
/// BS and its new phase.
pub fn update_element(q: &ElementQuadratics, state: &mut ReflectionState, m: usize) -> (usize, f64) {
    let zeta: Vec<C64> = (0..q.b.len())
        .map(|s| q.zeta(s, &practical_reflection(state, s), m))
        .collect();
    let (s, phi) = element_choice(&zeta);
    state.set_phase(s, m, phi);
    state.set_selection(m, Some(s));
    (s, phi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMode {
    /// Phases and selection optimised jointly.
    Joint,
    /// Selection kept as initialised; only phases of selected elements move.
    Fixed,
}

#[derive(Debug, Clone, Copy)]
pub struct Algorithm2Options {
    pub max_outer: usize,
    /// Stop once `|delta f| <= tol max(1, |f|)` for the weighted-MSE objective.
    pub tol: f64,
    pub sweep_tol: f64,
    pub max_sweeps: usize,
    pub mode: SelectionMode,
}

impl Default for Algorithm2Options {
    fn default() -> Self {
        Self {
            max_outer: 100,
            tol: 1e-4,
            sweep_tol: 1e-5,
            max_sweeps: 20,
            mode: SelectionMode::Joint,
        }
    }
}

/// Elementwise sweeps over the surface until the phase objective settles.
/// Returns the objective after every sweep, initial value first.
pub fn element_sweeps(
    q: &ElementQuadratics,
    state: &mut ReflectionState,
    mode: SelectionMode,
    tol: f64,
    max_sweeps: usize,
) -> Vec<f64> {
    let num_bs = q.b.len();
    let m = state.num_elements();
    let mut thetas: Vec<CVec> = (0..num_bs).map(|s| practical_reflection(state, s)).collect();
    let mut trace = vec![q.objective(state)];
    for _ in 0..max_sweeps {
        for i in 0..m {
            match mode {
                SelectionMode::Joint => {
                    let zeta: Vec<C64> = (0..num_bs).map(|s| q.zeta(s, &thetas[s], i)).collect();
                    let (s_star, phi) = element_choice(&zeta);
                    state.set_phase(s_star, i, phi);
                    state.set_selection(i, Some(s_star));
                    for (s, theta) in thetas.iter_mut().enumerate() {
                        theta[i] = if s == s_star { C64::from_polar(1.0, phi) } else { C64::new(1.0, 0.0) };
                    }
                }
                SelectionMode::Fixed => {
                    if let Some(s) = state.selection()[i] {
                        let phi = fixed_choice(q.zeta(s, &thetas[s], i));
                        state.set_phase(s, i, phi);
                        thetas[s][i] = C64::from_polar(1.0, phi);
                    }
                }
            }
        }
        let f = (0..num_bs).map(|s| q.objective_bs(s, &thetas[s])).sum::<f64>();
        let prev = *trace.last().expect("non-empty");
        trace.push(f);
        if (prev - f).abs() <= tol * prev.abs().max(f.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    trace
}

/// Per-BS MMSE beamformers with the budget split equally over the users.
pub fn mmse_init(channels: &ChannelSet, state: &ReflectionState, power: f64, sigma2: f64) -> BeamformerSet {
    let w = all_channels(channels, state)
        .iter()
        .map(|h| {
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
                let col = if n > 0.0 { v * C64::from((power / k as f64).sqrt() / n) } else { v };
                w.set_column(c, &col);
            }
            w
        })
        .collect();
    BeamformerSet { w }
}

/// Random ideal phases and selection: phases uniform over `(0, 2 pi]`, every
/// column uniform over the `S + 1` admissible patterns.
pub fn random_init<R: Rng + ?Sized>(num_bs: usize, m: usize, rng: &mut R) -> ReflectionState {
    let mut st = ReflectionState::new(num_bs, m);
    for s in 0..num_bs {
        for i in 0..m {
            st.set_phase(s, i, wrap_phase(std::f64::consts::TAU * (1.0 - rng.random::<f64>())));
        }
    }
    for i in 0..m {
        let pick = rng.random_range(0..=num_bs);
        st.set_selection(i, (pick < num_bs).then_some(pick));
    }
    st
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateStep {
    pub outer_iter: usize,
    pub sum_rate: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct SumRateOutcome {
    pub beamformers: BeamformerSet,
    pub state: ReflectionState,
    pub wmmse: WmmseState,
    /// Initial point first.
    pub trace: Vec<RateStep>,
    pub converged: bool,
    /// Objective of the element sweeps, concatenated over outer iterations.
    pub sweep_trace: Vec<f64>,
}

impl SumRateOutcome {
    pub fn sum_rate(&self) -> f64 {
        self.trace.last().map_or(0.0, |r| r.sum_rate)
    }

    pub fn iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Sum rate from WMMSE weights `sum log2(1/MSE)`; equals the rate when the
/// receive scalars and weights are optimal.
pub fn rate_from_weights(mu: &[Vec<f64>]) -> f64 {
    mu.iter().flatten().map(|m| m.log2()).sum()
}

fn rate_of(hs: &[Vec<CVec>], bf: &BeamformerSet, sigma2: f64) -> f64 {
    hs.iter()
        .zip(&bf.w)
        .map(|(h, w)| {
            h.iter()
                .enumerate()
                .map(|(k, x)| (1.0 + sinr_from_channel(x, w, k, sigma2)).log2())
                .sum::<f64>()
        })
        .sum()
}

/// Block coordinate descent on the weighted-MSE reformulation.
pub fn run_algorithm2(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    init: &ReflectionState,
    opts: &Algorithm2Options,
) -> Result<SumRateOutcome> {
    let sigma2 = cfg.sigma2;
    let mut state = init.clone();
    let mut bf = mmse_init(channels, &state, cfg.power, sigma2);
    let mut ws = WmmseState {
        nu: Vec::new(),
        mu: Vec::new(),
        lambda: vec![0.0; channels.num_bs()],
    };
    let hs = all_channels(channels, &state);
    let mut trace = vec![RateStep {
        outer_iter: 0,
        sum_rate: rate_of(&hs, &bf, sigma2),
        objective: f64::NAN,
    }];
    let mut sweep_trace = Vec::new();
    let mut converged = false;
    let mut prev_obj = f64::NAN;

    for it in 1..=opts.max_outer {
        ws.nu = update_nu(channels, &state, &bf, sigma2);
        ws.mu = update_mu(&all_mse(channels, &state, &bf, &ws.nu, sigma2));
        if it == 1 {
            trace[0].objective = wmmse_objective(&all_mse(channels, &state, &bf, &ws.nu, sigma2), &ws.mu);
            prev_obj = trace[0].objective;
        }
        let hs = all_channels(channels, &state);
        for s in 0..channels.num_bs() {
            let (w, lambda) = update_w(&hs[s], &ws.nu[s], &ws.mu[s], cfg.power)?;
            bf.w[s] = w;
            ws.lambda[s] = lambda;
        }
        let q = build_element_quadratics(channels, &bf, &ws);
        sweep_trace.extend(element_sweeps(&q, &mut state, opts.mode, opts.sweep_tol, opts.max_sweeps));

        let obj = wmmse_objective(&all_mse(channels, &state, &bf, &ws.nu, sigma2), &ws.mu);
        let hs = all_channels(channels, &state);
        trace.push(RateStep {
            outer_iter: it,
            sum_rate: rate_of(&hs, &bf, sigma2),
            objective: obj,
        });
        if (prev_obj - obj).abs() <= opts.tol * obj.abs().max(1.0) {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    Ok(SumRateOutcome {
        beamformers: bf,
        state,
        wmmse: ws,
        trace,
        converged,
        sweep_trace,
    })
}

/// Writes a rate trace as CSV with columns
/// `seed,outer_iter,sum_rate_bps_hz,objective_32a`.
pub fn write_rate_trace<W: Write>(seed: u64, trace: &[RateStep], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(["seed", "outer_iter", "sum_rate_bps_hz", "objective_32a"])?;
    for r in trace {
        wtr.write_record([
            seed.to_string(),
            r.outer_iter.to_string(),
            format!("{:e}", r.sum_rate),
            format!("{:e}", r.objective),
        ])?;
    }
    wtr.flush().map_err(|e| Error::Io { path: "<trace>".into(), source: e })?;
    Ok(())
}

/// Real vector of element phases of BS `s` (convenience for inspection).
pub fn phase_row(state: &ReflectionState, s: usize) -> DVector<f64> {
    DVector::from_iterator(state.num_elements(), (0..state.num_elements()).map(|m| state.phase(s, m)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downlink::{mse_from_channel, sum_rate};
    use crate::linalg::hermitian_defect;
    use crate::scenario::{sub_stream, trial_channels};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_cvec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CVec {
        CVec::from_fn(n, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale)
    }

    #[test]
    fn zeta_examples() {
        let (s, phi) = element_choice(&[c(-1.0, 0.0), c(0.5, 0.0)]);
        assert_eq!(s, 1);
        assert!((phi - std::f64::consts::PI).abs() < 1e-15);
        let (s, phi) = element_choice(&[C64::new(0.0, 0.0); 3]);
        assert_eq!(s, 0);
        assert!((phi - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn nu_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let h = random_cvec(&mut rng, 3, 1.0);
            let w = CMat::from_fn(3, 2, |_, _| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
            let nu = nu_from_channel(&h, &w, 1, 0.3);
            let f = |z: C64| mse_from_channel(&h, &w, z, 1, 0.3);
            let eps = 1e-6;
            let gr = (f(nu + eps) - f(nu - eps)) / (2.0 * eps);
            let gi = (f(nu + c(0.0, eps)) - f(nu - c(0.0, eps))) / (2.0 * eps);
            assert!(gr.abs() < 1e-6 && gi.abs() < 1e-6, "{gr} {gi}");
        }
    }

    #[test]
    fn zero_beamformers_give_zero_nu() {
        let h = CVec::from_vec(vec![c(1.0, 0.0), c(0.0, 1.0)]);
        assert_eq!(nu_from_channel(&h, &CMat::zeros(2, 2), 0, 1.0), c(0.0, 0.0));
    }

    #[test]
    fn mu_basics() {
        assert_eq!(update_mu(&[vec![0.5, 1.0]]), vec![vec![2.0, 1.0]]);
    }

    #[test]
    fn single_user_w_follows_channel() {
        let h = vec![CVec::from_vec(vec![c(0.3, 0.1), c(-0.5, 0.2), c(0.1, 0.9)])];
        let nu = [c(0.7, -0.2)];
        let (w, lambda) = update_w(&h, &nu, &[2.0], 1e6).unwrap();
        assert_eq!(lambda, 0.0);
        let hbar = &h[0] * nu[0];
        let col = w.column(0).into_owned();
        let cos = hbar.dotc(&col).norm() / (hbar.norm() * col.norm());
        assert!((1.0 - cos).abs() < 1e-12);
    }

    #[test]
    fn active_budget_is_met_and_lagrangian_is_stationary() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..10 {
            let h: Vec<CVec> = (0..3).map(|_| random_cvec(&mut rng, 4, 1.0)).collect();
            let nu: Vec<C64> = (0..3).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            let mu: Vec<f64> = (0..3).map(|_| rng.random_range(0.5..3.0)).collect();
            let budget = 0.01;
            let (w, lambda) = update_w(&h, &nu, &mu, budget).unwrap();
            assert!(lambda > 0.0);
            assert_relative_eq!(w.norm_squared(), budget, max_relative = 1e-8);
            // Lagrangian sum mu MSE + lambda ||W||^2 in W
            let lag = |w: &CMat| -> f64 {
                (0..3).map(|k| mu[k] * mse_from_channel(&h[k], w, nu[k], k, 0.1)).sum::<f64>()
                    + lambda * w.norm_squared()
            };
            let eps = 1e-6;
            let base = lag(&w).abs().max(1.0);
            for idx in 0..w.len() {
                for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                    let mut wp = w.clone();
                    let mut wm = w.clone();
                    wp[idx] += dir * eps;
                    wm[idx] -= dir * eps;
                    let g = (lag(&wp) - lag(&wm)) / (2.0 * eps);
                    assert!(g.abs() < 1e-5 * base, "{g}");
                }
            }
        }
    }

    #[test]
    fn element_objective_matches_weighted_mse_differences() {
        let cfg = SystemConfig { s: 2, k: 2, nt: 3, m: 5, ..SystemConfig::default() };
        let (_, ch) = trial_channels(&cfg, 2).unwrap();
        let mut rng = sub_stream(11, 0);
        let st = random_init(2, 5, &mut rng);
        let bf = mmse_init(&ch, &st, cfg.power, cfg.sigma2);
        let nu = update_nu(&ch, &st, &bf, cfg.sigma2);
        let mu = update_mu(&all_mse(&ch, &st, &bf, &nu, cfg.sigma2));
        let ws = WmmseState { nu: nu.clone(), mu: mu.clone(), lambda: vec![0.0; 2] };
        let q = build_element_quadratics(&ch, &bf, &ws);
        for b in &q.b {
            assert!(hermitian_defect(b) < 1e-12 * b.norm().max(1e-300));
        }
        let other = random_init(2, 5, &mut rng);
        let f = |s: &ReflectionState| wmmse_objective(&all_mse(&ch, s, &bf, &nu, cfg.sigma2), &mu);
        let lhs = f(&st) - f(&other);
        let rhs = q.objective(&st) - q.objective(&other);
        assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs().max(1.0), "{lhs} {rhs}");
    }

    #[test]
    fn weights_reproduce_the_rate() {
        let cfg = SystemConfig::default();
        let (_, ch) = trial_channels(&cfg, 5).unwrap();
        let st = random_init(cfg.s, cfg.m, &mut sub_stream(5, 1));
        let bf = mmse_init(&ch, &st, cfg.power, cfg.sigma2);
        let nu = update_nu(&ch, &st, &bf, cfg.sigma2);
        let mu = update_mu(&all_mse(&ch, &st, &bf, &nu, cfg.sigma2));
        assert_relative_eq!(rate_from_weights(&mu), sum_rate(&ch, &st, &bf, cfg.sigma2), max_relative = 1e-8);
    }

    #[test]
    fn algorithm2_is_monotone_and_feasible() {
        let cfg = SystemConfig::default();
        for seed in 0..3 {
            let (_, ch) = trial_channels(&cfg, seed).unwrap();
            let init = random_init(cfg.s, cfg.m, &mut sub_stream(cfg.seed, 2 * seed + 1));
            let out = run_algorithm2(&ch, &cfg, &init, &Algorithm2Options::default()).unwrap();
            assert!(out.converged);
            for w in out.trace.windows(2) {
                assert!(w[1].sum_rate >= w[0].sum_rate - 1e-9 * w[0].sum_rate.abs(), "{:?}", out.trace);
                assert!(w[1].objective <= w[0].objective + 1e-9 * w[0].objective.abs().max(1.0));
            }
            for w in &out.beamformers.w {
                assert!(w.norm_squared() <= cfg.power + 1e-9);
            }
            assert_relative_eq!(out.sum_rate(), sum_rate(&ch, &out.state, &out.beamformers, cfg.sigma2), max_relative = 1e-12);
        }
    }
}
