//! Proposed designs and the comparison schemes for both problems.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::power_min::{optimize_fixed_selection, run_algorithm1, Algorithm1Options};
use crate::reflection::ReflectionState;
use crate::scenario::{ChannelSet, SystemConfig};
use crate::sum_rate::{random_init, run_algorithm2, Algorithm2Options, SelectionMode};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    NoSelection,
    RandomSelection,
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Proposed, Scheme::NoSelection, Scheme::RandomSelection, Scheme::NoIrs];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::NoSelection => "no_selection",
            Scheme::RandomSelection => "random_selection",
            Scheme::NoIrs => "no_irs",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::UnknownScheme(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineOptions {
    pub alg1: Algorithm1Options,
    pub alg2: Algorithm2Options,
    /// Fixed serving BS for the no-selection scheme; best of all BSs if unset.
    pub no_selection_bs: Option<usize>,
}

fn whole_surface(num_bs: usize, m: usize, s: usize) -> ReflectionState {
    let mut st = ReflectionState::new(num_bs, m);
    for i in 0..m {
        st.set_selection(i, Some(s));
    }
    st
}

fn random_one_hot<R: Rng + ?Sized>(st: &mut ReflectionState, rng: &mut R) {
    let num_bs = st.num_bs();
    for i in 0..st.num_elements() {
        st.set_selection(i, Some(rng.random_range(0..num_bs)));
    }
}

fn candidate_bs(num_bs: usize, opts: &BaselineOptions) -> Result<Vec<usize>> {
    match opts.no_selection_bs {
        Some(s) if s < num_bs => Ok(vec![s]),
        Some(s) => Err(Error::Config(format!("no_selection_bs = {s} but only {num_bs} BSs"))),
        None => Ok((0..num_bs).collect()),
    }
}

/// Total transmit power (W) of a scheme.
pub fn power_min_metric<R: Rng + ?Sized>(
    scheme: Scheme,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
    opts: &BaselineOptions,
) -> Result<f64> {
    let num_bs = channels.num_bs();
    let m = channels.num_elements();
    let bcd = &opts.alg1.bcd;
    match scheme {
        Scheme::Proposed => Ok(run_algorithm1(channels, cfg, &opts.alg1)?.report.total_power),
        Scheme::NoSelection => {
            let mut best = f64::INFINITY;
            for s in candidate_bs(num_bs, opts)? {
                let out = optimize_fixed_selection(channels, cfg, &whole_surface(num_bs, m, s), bcd)?;
                best = best.min(out.report.total_power);
            }
            Ok(best)
        }
        Scheme::RandomSelection => {
            let mut st = ReflectionState::new(num_bs, m);
            random_one_hot(&mut st, rng);
            Ok(optimize_fixed_selection(channels, cfg, &st, bcd)?.report.total_power)
        }
        Scheme::NoIrs => {
            let st = ReflectionState::new(num_bs, m);
            Ok(optimize_fixed_selection(&channels.without_irs(), cfg, &st, bcd)?.report.total_power)
        }
    }
}

/// Sum rate (bit/s/Hz) of a scheme. Ideal phases start uniformly random.
pub fn sum_rate_metric<R: Rng + ?Sized>(
    scheme: Scheme,
    channels: &ChannelSet,
    cfg: &SystemConfig,
    rng: &mut R,
    opts: &BaselineOptions,
) -> Result<f64> {
    let num_bs = channels.num_bs();
    let m = channels.num_elements();
    let mut init = random_init(num_bs, m, rng);
    let fixed = Algorithm2Options { mode: SelectionMode::Fixed, ..opts.alg2 };
    match scheme {
        Scheme::Proposed => {
            let joint = Algorithm2Options { mode: SelectionMode::Joint, ..opts.alg2 };
            Ok(run_algorithm2(channels, cfg, &init, &joint)?.sum_rate())
        }
        Scheme::NoSelection => {
            let mut best = f64::NEG_INFINITY;
            for s in candidate_bs(num_bs, opts)? {
                for i in 0..m {
                    init.set_selection(i, Some(s));
                }
                best = best.max(run_algorithm2(channels, cfg, &init, &fixed)?.sum_rate());
            }
            Ok(best)
        }
        Scheme::RandomSelection => {
            random_one_hot(&mut init, rng);
            Ok(run_algorithm2(channels, cfg, &init, &fixed)?.sum_rate())
        }
        Scheme::NoIrs => {
            let st = ReflectionState::new(num_bs, m);
            Ok(run_algorithm2(&channels.without_irs(), cfg, &st, &fixed)?.sum_rate())
        }
    }
}
