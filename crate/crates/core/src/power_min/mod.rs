//! Total transmit-power minimisation under per-user SINR targets.
//!
//! Three steps: every BS first designs its beamformers and ideal phases as if
//! it owned the whole surface; the service selection is then optimised with
//! all of those fixed; finally every BS re-runs its beamforming / phase
//! alternation on the elements it was given.

pub mod manifold;
pub mod qos;
pub mod socp;

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::downlink::{effective_channels, sinr_from_channel, BeamformerSet};
use crate::reflection::{wrap_phase, ReflectionState};
use crate::scenario::{ChannelSet, SystemConfig};
use crate::selection::{build_selection_quadratics, run_selection, SelectionOptions};
use crate::{CMat, CVec, Error, Result, C64};

use manifold::{optimize_phase_manifold, ManifoldOptions};
use qos::build_qos_quadratics_for;
use socp::{solve_beamforming_socp, SocpOptions};

#[derive(Debug, Clone, Copy)]
pub struct BcdOptions {
    /// Relative power change at which the alternation stops.
    pub tol: f64,
    pub max_iter: usize,
    /// Halvings of a phase move that raised the power before giving up.
    pub max_shrink: usize,
    pub socp: SocpOptions,
    pub manifold: ManifoldOptions,
}

impl Default for BcdOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 30,
            max_shrink: 6,
            socp: SocpOptions::default(),
            manifold: ManifoldOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BcdStep {
    pub iter: usize,
    pub power: f64,
    pub sinr_min: f64,
}

#[derive(Debug, Clone)]
pub struct BcdOutcome {
    pub w: CMat,
    pub phi_row: Vec<f64>,
    pub power: f64,
    /// Power of every accepted iterate, initial solve first.
    pub trace: Vec<BcdStep>,
    pub converged: bool,
    /// Stopped because no shrunken phase move lowered the power.
    pub stalled: bool,
}

fn reflection_row(phi_row: &[f64], selected: &[bool]) -> CVec {
    CVec::from_iterator(
        phi_row.len(),
        phi_row
            .iter()
            .zip(selected)
            .map(|(&p, &a)| if a { C64::from_polar(1.0, p) } else { C64::new(1.0, 0.0) }),
    )
}

fn tag_bs(err: Error, s: usize) -> Error {
    match err {
        Error::Infeasible { reason, .. } => Error::Infeasible { bs: s, reason },
        other => other,
    }
}

fn beamform(channels: &ChannelSet, theta: &CVec, s: usize, gamma: f64, sigma2: f64, opts: &SocpOptions) -> Result<(CMat, f64, f64)> {
    let h = effective_channels(channels, theta, s);
    let sol = solve_beamforming_socp(&h, gamma, sigma2, opts).map_err(|e| tag_bs(e, s))?;
    let sinr_min = h
        .iter()
        .enumerate()
        .map(|(k, hk)| sinr_from_channel(hk, &sol.w, k, sigma2))
        .fold(f64::INFINITY, f64::min);
    Ok((sol.w, sol.power, sinr_min))
}

/// Writes the phases of the selected elements of BS `s` from the optimised
/// unit-modulus vector `theta_hat` (one entry per selected element, ascending).
pub fn reconstruct_phases(state: &mut ReflectionState, theta_hat: &CVec, s: usize) {
    let selected: Vec<usize> = (0..state.num_elements()).filter(|&m| state.selected(s, m)).collect();
    assert_eq!(selected.len(), theta_hat.len(), "one phase per selected element");
    for (&m, t) in selected.iter().zip(theta_hat.iter()) {
        state.set_phase(s, m, wrap_phase(t.arg()));
    }
}

/// Alternates minimum-power beamforming and phase design for BS `s` with the
/// selection of `state` fixed.
pub fn per_bs_bcd(
    channels: &ChannelSet,
    state: &ReflectionState,
    gamma: f64,
    sigma2: f64,
    s: usize,
    opts: &BcdOptions,
) -> Result<BcdOutcome> {
    let phi_row: Vec<f64> = (0..state.num_elements()).map(|m| state.phase(s, m)).collect();
    per_bs_bcd_row(channels, &phi_row, &state.selection_row(s), gamma, sigma2, s, opts)
}

/// As [`per_bs_bcd`] with the selected elements given explicitly.
pub fn per_bs_bcd_row(
    channels: &ChannelSet,
    phi_row: &[f64],
    selected: &[bool],
    gamma: f64,
    sigma2: f64,
    s: usize,
    opts: &BcdOptions,
) -> Result<BcdOutcome> {
    let mut phi = phi_row.to_vec();
    let mut theta = reflection_row(&phi, selected);
    let (mut w, mut power, sinr_min) = beamform(channels, &theta, s, gamma, sigma2, &opts.socp)?;
    let mut trace = vec![BcdStep { iter: 0, power, sinr_min }];
    let mut converged = false;
    let mut stalled = false;
    if !selected.iter().any(|&a| a) {
        return Ok(BcdOutcome { w, phi_row: phi, power, trace, converged: true, stalled });
    }

    for iter in 1..=opts.max_iter {
        let q = build_qos_quadratics_for(channels, &w, selected, gamma, s);
        let start = q.restrict(&theta);
        let res = optimize_phase_manifold(&q.d_mat, &q.b_vec, &start, &opts.manifold);
        // the slack surrogate does not see the power; shrink the phase move
        // towards the current point until the power does not grow
        let mut accepted = None;
        let mut t = 1.0;
        for _ in 0..=opts.max_shrink {
            let cand = manifold::retract(&(&start + (&res.theta - &start) * C64::from(t)));
            let mut phi_c = phi.clone();
            for (&m, z) in q.selected.iter().zip(cand.iter()) {
                phi_c[m] = wrap_phase(z.arg());
            }
            let theta_c = reflection_row(&phi_c, selected);
            match beamform(channels, &theta_c, s, gamma, sigma2, &opts.socp) {
                Ok((w_c, p_c, sinr_c)) if p_c <= power => {
                    accepted = Some((phi_c, theta_c, w_c, p_c, sinr_c));
                    break;
                }
                Ok(_) => {}
                Err(Error::Infeasible { .. }) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        let Some((phi_c, theta_c, w_c, p_c, sinr_c)) = accepted else {
            // no phase move lowers the power: local point of the alternation
            stalled = true;
            break;
        };
        let rel = (power - p_c) / power.max(f64::MIN_POSITIVE);
        phi = phi_c;
        theta = theta_c;
        w = w_c;
        power = p_c;
        trace.push(BcdStep { iter, power, sinr_min: sinr_c });
        if rel < opts.tol {
            converged = true;
            break;
        }
    }
    Ok(BcdOutcome { w, phi_row: phi, power, trace, converged, stalled })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Algorithm1Options {
    pub bcd: BcdOptions,
    pub selection: SelectionOptions,
}

/// One line of the convergence report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMinRow {
    /// Iteration counter per BS, continuing across the two beamforming stages.
    pub outer_iter: usize,
    pub bs: usize,
    pub power_watts: f64,
    pub sinr_min: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Default)]
pub struct PowerMinReport {
    pub rows: Vec<PowerMinRow>,
    pub per_bs_power: Vec<f64>,
    pub total_power: f64,
    /// BCD iterations of the final stage per BS.
    pub iterations: Vec<usize>,
    pub converged: Vec<bool>,
    /// Binary-violation measure at the end of the selection step.
    pub selection_violation: f64,
    pub selection_fallback: bool,
    pub selection_code: String,
}

impl PowerMinReport {
    pub fn write_csv<W: Write>(&self, seed: u64, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["seed", "outer_iter", "bs", "power_watts", "sinr_min", "converged"])?;
        for r in &self.rows {
            wtr.write_record([
                seed.to_string(),
                r.outer_iter.to_string(),
                r.bs.to_string(),
                format!("{:e}", r.power_watts),
                format!("{:e}", r.sinr_min),
                r.converged.to_string(),
            ])?;
        }
        wtr.flush().map_err(|e| Error::Io { path: "<report>".into(), source: e })?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PowerMinOutcome {
    pub beamformers: BeamformerSet,
    pub state: ReflectionState,
    pub report: PowerMinReport,
}

fn append_rows(rows: &mut Vec<PowerMinRow>, s: usize, offset: usize, out: &BcdOutcome) {
    let last = out.trace.len() - 1;
    rows.extend(out.trace.iter().enumerate().map(|(i, st)| PowerMinRow {
        outer_iter: offset + st.iter,
        bs: s,
        power_watts: st.power,
        sinr_min: st.sinr_min,
        converged: i == last && out.converged,
    }));
}

/// Per-BS BCD for every BS with the selection of `state` fixed, warm-started
/// from its phases.
pub fn optimize_fixed_selection(
    channels: &ChannelSet,
    cfg: &SystemConfig,
    state: &ReflectionState,
    opts: &BcdOptions,
) -> Result<PowerMinOutcome> {
    let outs = (0..channels.num_bs())
        .into_par_iter()
        .map(|s| per_bs_bcd(channels, state, cfg.gamma, cfg.sigma2, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut report = PowerMinReport::default();
    Ok(finish(channels, state.clone(), outs, &mut report, &[]))
}

fn finish(
    channels: &ChannelSet,
    mut state: ReflectionState,
    outs: Vec<BcdOutcome>,
    report: &mut PowerMinReport,
    offsets: &[usize],
) -> PowerMinOutcome {
    let mut w = Vec::with_capacity(outs.len());
    for (s, out) in outs.into_iter().enumerate() {
        for (m, &p) in out.phi_row.iter().enumerate() {
            state.set_phase(s, m, p);
        }
        append_rows(&mut report.rows, s, offsets.get(s).copied().unwrap_or(0), &out);
        report.per_bs_power.push(out.power);
        report.iterations.push(out.trace.len() - 1);
        report.converged.push(out.converged);
        w.push(out.w);
    }
    debug_assert_eq!(w.len(), channels.num_bs());
    report.total_power = report.per_bs_power.iter().sum();
    report.selection_code = state.selection_code();
    PowerMinOutcome {
        beamformers: BeamformerSet { w },
        state,
        report: report.clone(),
    }
}

/// Full three-step power minimisation.
pub fn run_algorithm1(channels: &ChannelSet, cfg: &SystemConfig, opts: &Algorithm1Options) -> Result<PowerMinOutcome> {
    let num_bs = channels.num_bs();
    let m = channels.num_elements();
    let full = vec![true; m];
    let start = vec![std::f64::consts::TAU; m];

    // step 1: every BS owns the whole surface
    let first = (0..num_bs)
        .into_par_iter()
        .map(|s| per_bs_bcd_row(channels, &start, &full, cfg.gamma, cfg.sigma2, s, &opts.bcd))
        .collect::<Result<Vec<_>>>()?;
    let mut report = PowerMinReport::default();
    for (s, out) in first.iter().enumerate() {
        append_rows(&mut report.rows, s, 0, out);
    }
    let phi = DMatrix::from_fn(num_bs, m, |s, i| first[s].phi_row[i]);

    // step 2: service selection
    let selection = if num_bs == 1 {
        vec![Some(0); m]
    } else {
        let bf = BeamformerSet { w: first.iter().map(|o| o.w.clone()).collect() };
        let q = build_selection_quadratics(channels, &bf, &phi, cfg.gamma);
        let init = vec![DVector::from_element(m, 1.0 / num_bs as f64); num_bs];
        let sel = run_selection(&q, &init, &opts.selection);
        report.selection_violation = sel.violation;
        report.selection_fallback = sel.rounding_fallback;
        sel.selection
    };
    let state = ReflectionState::from_parts(phi, selection)?;

    if num_bs == 1 {
        let outs = first;
        let offsets = vec![0; 1];
        report.rows.clear();
        return Ok(finish(channels, state, outs, &mut report, &offsets));
    }

    // step 3: final alternation on the assigned elements
    let offsets: Vec<usize> = first.iter().map(|o| o.trace.len()).collect();
    let outs = (0..num_bs)
        .into_par_iter()
        .map(|s| per_bs_bcd(channels, &state, cfg.gamma, cfg.sigma2, s, &opts.bcd))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(channels, state, outs, &mut report, &offsets))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downlink::all_sinrs;
    use crate::reflection::practical_reflection;
    use crate::scenario::trial_channels;

    fn small() -> SystemConfig {
        SystemConfig { s: 2, k: 2, nt: 3, m: 8, ..SystemConfig::default() }
    }

    #[test]
    fn empty_selection_is_a_single_solve() {
        let cfg = small();
        let (_, ch) = trial_channels(&cfg, 0).unwrap();
        let st = ReflectionState::new(2, 8);
        let out = per_bs_bcd(&ch, &st, cfg.gamma, cfg.sigma2, 1, &BcdOptions::default()).unwrap();
        assert_eq!(out.trace.len(), 1);
        // unselected elements still reflect with a unit coefficient
        let h = effective_channels(&ch, &CVec::from_element(8, C64::new(1.0, 0.0)), 1);
        let direct = solve_beamforming_socp(&h, cfg.gamma, cfg.sigma2, &SocpOptions::default()).unwrap();
        assert!((out.power - direct.power).abs() <= 1e-9 * direct.power);
    }

    #[test]
    fn reconstructed_phases_round_trip() {
        let mut st = ReflectionState::new(2, 4);
        st.set_selection(0, Some(1));
        st.set_selection(2, Some(1));
        st.set_selection(3, Some(0));
        let before = st.phase(1, 1);
        let t = CVec::from_vec(vec![C64::new(-1.0, 0.0), C64::from_polar(1.0, 0.7)]);
        reconstruct_phases(&mut st, &t, 1);
        assert!((st.phase(1, 0) - std::f64::consts::PI).abs() < 1e-15);
        assert_eq!(st.phase(1, 1), before);
        let theta = practical_reflection(&st, 1);
        assert!((theta[2] - t[1]).norm() < 1e-14);
        assert!((theta[0] - t[0]).norm() < 1e-14);
    }

    #[test]
    fn algorithm1_meets_every_target() {
        let cfg = small();
        for seed in 0..3 {
            let (_, ch) = trial_channels(&cfg, seed).unwrap();
            let out = run_algorithm1(&ch, &cfg, &Algorithm1Options::default()).unwrap();
            for row in all_sinrs(&ch, &out.state, &out.beamformers, cfg.sigma2) {
                for g in row {
                    assert!(g >= cfg.gamma * (1.0 - 1e-6), "{g}");
                }
            }
            let no_irs = optimize_fixed_selection(&ch.without_irs(), &cfg, &ReflectionState::new(2, 8), &BcdOptions::default())
                .unwrap();
            assert!(out.report.total_power <= no_irs.report.total_power * (1.0 + 1e-9));
            assert!(out.report.rows.iter().all(|r| r.power_watts > 0.0));
        }
    }

    #[test]
    fn single_bs_takes_the_whole_surface() {
        let cfg = SystemConfig { s: 1, ..small() };
        let (_, ch) = trial_channels(&cfg, 4).unwrap();
        let out = run_algorithm1(&ch, &cfg, &Algorithm1Options::default()).unwrap();
        assert!(out.state.selection().iter().all(|&x| x == Some(0)));
        let direct = per_bs_bcd_row(&ch, &[std::f64::consts::TAU; 8], &[true; 8], cfg.gamma, cfg.sigma2, 0, &BcdOptions::default())
            .unwrap();
        assert_eq!(out.report.total_power, direct.power);
    }

    #[test]
    fn csv_report_has_header_and_rows() {
        let cfg = small();
        let (_, ch) = trial_channels(&cfg, 1).unwrap();
        let out = run_algorithm1(&ch, &cfg, &Algorithm1Options::default()).unwrap();
        let mut buf = Vec::new();
        out.report.write_csv(7, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("seed,outer_iter,bs,power_watts,sinr_min,converged"));
        assert_eq!(lines.count(), out.report.rows.len());
    }
}
