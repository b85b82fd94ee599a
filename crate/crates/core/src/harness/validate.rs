//! Quick invariant suite behind `irs-sim validate`.

use std::f64::consts::PI;

use crate::downlink::{all_sinrs, effective_channels, sum_rate, total_power};
use crate::power_min::socp::{solve_beamforming_socp, SocpOptions};
use crate::power_min::{run_algorithm1, Algorithm1Options};
use crate::reflection::{partition_capacitance, practical_reflection, reflection_coefficient, CircuitParams, ReflectionState};
use crate::scenario::{sub_stream, trial_channels, SystemConfig};
use crate::sum_rate::{random_init, rate_from_weights, run_algorithm2, Algorithm2Options};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> Check {
    match f() {
        Ok((pass, detail)) => Check { name, pass, detail },
        Err(e) => Check { name, pass: false, detail: format!("error: {e}") },
    }
}

fn state_ok(st: &ReflectionState) -> bool {
    let a = st.a_matrix();
    let exclusive = (0..st.num_elements()).all(|m| a.column(m).iter().map(|&x| x as u32).sum::<u32>() <= 1);
    let unit = (0..st.num_bs()).all(|s| {
        practical_reflection(st, s)
            .iter()
            .all(|t| (t.norm() - 1.0).abs() <= 1e-12)
    });
    exclusive && unit
}

fn lossless() -> Result<(bool, String)> {
    let p = CircuitParams { r: 0.0, ..CircuitParams::default() };
    let mut worst: f64 = 0.0;
    for i in 0..40 {
        let c = 0.2e-12 + 19.8e-12 * i as f64 / 39.0;
        for j in 0..25 {
            let f = 1.0e9 + 3.0e9 * j as f64 / 24.0;
            worst = worst.max((reflection_coefficient(&p, c, f)?.norm() - 1.0).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max ||Γ|-1| = {worst:.2e} over 1000 points")))
}

fn partition(cfg: &SystemConfig) -> Result<(bool, String)> {
    let part = partition_capacitance(&cfg.circuit, &cfg.band_plan(), &cfg.sweep)?;
    let mut iv = part.intervals.clone();
    iv.sort_by(|a, b| a.lo.total_cmp(&b.lo));
    let inside = iv.iter().all(|i| i.lo >= cfg.sweep.c_min && i.hi <= cfg.sweep.c_max && i.hi > i.lo);
    let disjoint = iv.windows(2).all(|w| w[0].hi <= w[1].lo);
    Ok((inside && disjoint, format!("{} windows", iv.len())))
}

fn reproducible(cfg: &SystemConfig) -> Result<(bool, String)> {
    let (ga, a) = trial_channels(cfg, 7)?;
    let (gb, b) = trial_channels(cfg, 7)?;
    let same = ga == gb && a == b;
    Ok((same, "trial 7 drawn twice".into()))
}

fn random_states(cfg: &SystemConfig) -> Result<(bool, String)> {
    let mut rng = sub_stream(cfg.seed, 99);
    let n = 200;
    let ok = (0..n).all(|_| state_ok(&random_init(cfg.s, cfg.m, &mut rng)));
    Ok((ok, format!("{n} random states")))
}

fn socp_activity(cfg: &SystemConfig) -> Result<(bool, String)> {
    let (_, ch) = trial_channels(cfg, 0)?;
    let mut st = ReflectionState::new(cfg.s, cfg.m);
    let mut rng = sub_stream(cfg.seed, 98);
    st = ReflectionState::from_parts(random_init(cfg.s, cfg.m, &mut rng).phi().clone(), st.selection().to_vec())?;
    let mut worst: f64 = 0.0;
    for s in 0..cfg.s {
        let h = effective_channels(&ch, &practical_reflection(&st, s), s);
        let sol = solve_beamforming_socp(&h, cfg.gamma, cfg.sigma2, &SocpOptions::default())?;
        for (k, hk) in h.iter().enumerate() {
            let g = crate::downlink::sinr_from_channel(hk, &sol.w, k, cfg.sigma2);
            worst = worst.max((g - cfg.gamma).abs() / cfg.gamma);
        }
    }
    Ok((worst <= 1e-4, format!("max relative SINR slack {worst:.2e}")))
}

fn power_min(cfg: &SystemConfig) -> Result<(bool, String)> {
    let (_, ch) = trial_channels(cfg, 1)?;
    let out = run_algorithm1(&ch, cfg, &Algorithm1Options::default())?;
    let min_sinr = all_sinrs(&ch, &out.state, &out.beamformers, cfg.sigma2)
        .into_iter()
        .flatten()
        .fold(f64::INFINITY, f64::min);
    let ok = min_sinr >= cfg.gamma - 1e-6 && state_ok(&out.state) && out.report.total_power > 0.0;
    Ok((ok, format!("min SINR {min_sinr:.4} vs target {:.4}, {:.3e} W", cfg.gamma, out.report.total_power)))
}

fn sum_rate_check(cfg: &SystemConfig) -> Result<(bool, String)> {
    let (_, ch) = trial_channels(cfg, 2)?;
    let init = random_init(cfg.s, cfg.m, &mut sub_stream(cfg.seed, 97));
    let out = run_algorithm2(&ch, cfg, &init, &Algorithm2Options::default())?;
    let direct = sum_rate(&ch, &out.state, &out.beamformers, cfg.sigma2);
    let monotone = out.trace.windows(2).all(|w| w[1].sum_rate >= w[0].sum_rate - 1e-9 * w[0].sum_rate.abs().max(1.0));
    let budget = (0..cfg.s).all(|s| out.beamformers.bs_power(s) <= cfg.power + 1e-9);
    let weights = rate_from_weights(&out.wmmse.mu);
    let ok = monotone && budget && state_ok(&out.state) && direct >= 0.0 && weights.is_finite();
    Ok((
        ok,
        format!(
            "rate {direct:.4} bit/s/Hz after {} iterations, total power {:.3e} W",
            out.iterations(),
            total_power(&out.beamformers)
        ),
    ))
}

fn wrap_range() -> Result<(bool, String)> {
    let ok = [-3.0 * PI, -PI, 0.0, 1e-300, PI, 2.0 * PI, 7.0 * PI]
        .iter()
        .all(|&x| {
            let w = crate::reflection::wrap_phase(x);
            w > 0.0 && w <= 2.0 * PI
        });
    Ok((ok, "phases stay in (0, 2π]".into()))
}

/// Runs every check at the given configuration.
pub fn run_validation(cfg: &SystemConfig) -> Vec<Check> {
    vec![
        check("lossless_unit_reflection", lossless),
        check("partition_disjoint", || partition(cfg)),
        check("phase_wrap_range", wrap_range),
        check("channel_reproducibility", || reproducible(cfg)),
        check("state_invariants", || random_states(cfg)),
        check("socp_constraints_active", || socp_activity(cfg)),
        check("power_min_feasible", || power_min(cfg)),
        check("sum_rate_monotone_within_budget", || sum_rate_check(cfg)),
    ]
}
