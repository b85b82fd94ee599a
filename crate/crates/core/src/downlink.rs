//! Signal-model quantities shared by both design problems.
//!
//! Everything here is computed from explicit effective channels; the optimisers
//! may cache intermediates but are tested against these functions.

use crate::reflection::{practical_reflection, ReflectionState};
use crate::scenario::{BsChannels, ChannelSet};
use crate::{CMat, CVec, Error, Result, C64};

/// Per-BS transmit beamformers; `w[s]` is `Nt x K` with one column per user.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub w: Vec<CMat>,
}

impl BeamformerSet {
    pub fn zeros(num_bs: usize, nt: usize, k: usize) -> Self {
        Self {
            w: vec![CMat::zeros(nt, k); num_bs],
        }
    }

    pub fn bs_power(&self, s: usize) -> f64 {
        self.w[s].norm_squared()
    }
}

/// Effective channel `h` of user `k` of BS `s` with
/// `h^H = h_r^H diag(theta) G + h_d^H`.
pub fn effective_channel(channels: &ChannelSet, theta: &CVec, s: usize, k: usize) -> Result<CVec> {
    let b = channels
        .bs
        .get(s)
        .ok_or_else(|| Error::Dimension(format!("no BS {s}")))?;
    if k >= b.num_users() {
        return Err(Error::Dimension(format!("BS {s} has no user {k}")));
    }
    if theta.len() != b.num_elements() {
        return Err(Error::Dimension(format!(
            "reflection vector has {} entries, surface has {}",
            theta.len(),
            b.num_elements()
        )));
    }
    Ok(bs_effective_channel(b, theta, k))
}

pub(crate) fn bs_effective_channel(b: &BsChannels, theta: &CVec, k: usize) -> CVec {
    let weighted = b.h_r[k].zip_map(theta, |h, t| h * t.conj());
    b.g.adjoint() * weighted + &b.h_d[k]
}

/// Effective channels of all users of BS `s`.
pub fn effective_channels(channels: &ChannelSet, theta: &CVec, s: usize) -> Vec<CVec> {
    let b = &channels.bs[s];
    (0..b.num_users()).map(|k| bs_effective_channel(b, theta, k)).collect()
}

/// SINR of a user from its effective channel and its BS's beamformers.
pub fn sinr_from_channel(h: &CVec, w: &CMat, k: usize, sigma2: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for j in 0..w.ncols() {
        let p = h.dotc(&w.column(j).into_owned()).norm_sqr();
        if j == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + sigma2)
}

pub fn sinr(
    channels: &ChannelSet,
    state: &ReflectionState,
    bf: &BeamformerSet,
    sigma2: f64,
    s: usize,
    k: usize,
) -> Result<f64> {
    let theta = practical_reflection(state, s);
    let h = effective_channel(channels, &theta, s, k)?;
    Ok(sinr_from_channel(&h, &bf.w[s], k, sigma2))
}

/// All SINRs, `out[s][k]`.
pub fn all_sinrs(
    channels: &ChannelSet,
    state: &ReflectionState,
    bf: &BeamformerSet,
    sigma2: f64,
) -> Vec<Vec<f64>> {
    (0..channels.num_bs())
        .map(|s| {
            let theta = practical_reflection(state, s);
            effective_channels(channels, &theta, s)
                .iter()
                .enumerate()
                .map(|(k, h)| sinr_from_channel(h, &bf.w[s], k, sigma2))
                .collect()
        })
        .collect()
}

/// Sum rate in bit/s/Hz.
pub fn sum_rate(
    channels: &ChannelSet,
    state: &ReflectionState,
    bf: &BeamformerSet,
    sigma2: f64,
) -> f64 {
    all_sinrs(channels, state, bf, sigma2)
        .iter()
        .flatten()
        .map(|g| (1.0 + g).log2())
        .sum()
}

/// MSE of user `k` of BS `s` for the scalar receiver `nu`.
pub fn mse(
    channels: &ChannelSet,
    state: &ReflectionState,
    bf: &BeamformerSet,
    nu: C64,
    sigma2: f64,
    s: usize,
    k: usize,
) -> Result<f64> {
    let theta = practical_reflection(state, s);
    let h = effective_channel(channels, &theta, s, k)?;
    Ok(mse_from_channel(&h, &bf.w[s], nu, k, sigma2))
}

pub fn mse_from_channel(h: &CVec, w: &CMat, nu: C64, k: usize, sigma2: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..w.ncols() {
        total += (nu.conj() * h.dotc(&w.column(j).into_owned())).norm_sqr();
    }
    let cross = (nu.conj() * h.dotc(&w.column(k).into_owned())).re;
    total - 2.0 * cross + nu.norm_sqr() * sigma2 + 1.0
}

/// Total transmit power of all BSs.
pub fn total_power(bf: &BeamformerSet) -> f64 {
    bf.w.iter().map(|w| w.norm_squared()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{trial_channels, SystemConfig};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn small() -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig { s: 2, k: 2, nt: 2, m: 3, ..SystemConfig::default() };
        let (_, ch) = trial_channels(&cfg, 1).unwrap();
        (cfg, ch)
    }

    #[test]
    fn identity_reflection_and_no_irs_path() {
        let (_, ch) = small();
        let ones = CVec::from_element(3, c(1.0, 0.0));
        let h = effective_channel(&ch, &ones, 0, 1).unwrap();
        let b = &ch.bs[0];
        let expect = b.g.adjoint() * &b.h_r[1] + &b.h_d[1];
        assert!((h - expect).norm() < 1e-20);

        let bare = ch.without_irs();
        let theta = CVec::from_element(3, c(0.0, 1.0));
        assert_eq!(effective_channel(&bare, &theta, 1, 0).unwrap(), ch.bs[1].h_d[0]);
    }

    #[test]
    fn hand_expanded_two_by_two() {
        let g = CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.5, -1.0), c(-0.3, 0.4), c(2.0, 0.0)]);
        let h_r = CVec::from_vec(vec![c(0.2, -0.1), c(1.0, 1.0)]);
        let h_d = CVec::from_vec(vec![c(0.7, 0.0), c(-0.2, 0.3)]);
        let theta = CVec::from_vec(vec![c(0.0, 1.0), c(-1.0, 0.0)]);
        let ch = ChannelSet {
            bs: vec![BsChannels { g: g.clone(), h_r: vec![h_r.clone()], h_d: vec![h_d.clone()] }],
        };
        let h = effective_channel(&ch, &theta, 0, 0).unwrap();
        // h^H[n] = sum_m conj(h_r[m]) theta[m] G[m, n] + conj(h_d[n])
        for n in 0..2 {
            let mut row = h_d[n].conj();
            for m in 0..2 {
                row += h_r[m].conj() * theta[m] * g[(m, n)];
            }
            assert!((h[n].conj() - row).norm() < 1e-14);
        }
    }

    #[test]
    fn dimension_errors() {
        let (_, ch) = small();
        let short = CVec::from_element(2, c(1.0, 0.0));
        assert!(effective_channel(&ch, &short, 0, 0).is_err());
        let ones = CVec::from_element(3, c(1.0, 0.0));
        assert!(effective_channel(&ch, &ones, 5, 0).is_err());
        assert!(effective_channel(&ch, &ones, 0, 9).is_err());
    }

    #[test]
    fn single_user_matched_filter_sinr() {
        let h = CVec::from_vec(vec![c(1e-4, 2e-4), c(-3e-4, 1e-4)]);
        let p: f64 = 0.3;
        let w = CMat::from_column_slice(2, 1, (h.clone() * C64::from(p.sqrt() / h.norm())).as_slice());
        let g = sinr_from_channel(&h, &w, 0, 1e-10);
        assert_relative_eq!(g, p * h.norm_squared() / 1e-10, max_relative = 1e-12);
        assert_eq!(sinr_from_channel(&h, &CMat::zeros(2, 1), 0, 1e-10), 0.0);
    }

    #[test]
    fn sinr_matches_received_signal_decomposition() {
        let (cfg, ch) = small();
        let mut st = ReflectionState::new(2, 3);
        st.set_selection(0, Some(0));
        st.set_phase(0, 0, 1.1);
        st.set_selection(2, Some(1));
        st.set_phase(1, 2, 4.0);
        let bf = BeamformerSet {
            w: vec![
                CMat::from_fn(2, 2, |i, j| c(0.1 * (i + 1) as f64, -0.05 * j as f64)),
                CMat::from_fn(2, 2, |i, j| c(0.02 * j as f64, 0.2 + 0.1 * i as f64)),
            ],
        };
        for s in 0..2 {
            let b = &ch.bs[s];
            for k in 0..2 {
                // y = sum_j (h_r^H Theta G + h_d^H) w_j z_j + n
                let mut gains = Vec::new();
                for j in 0..2 {
                    let gw = &b.g * bf.w[s].column(j);
                    let mut v = C64::new(0.0, 0.0);
                    for m in 0..3 {
                        let t = if st.selected(s, m) { C64::from_polar(1.0, st.phase(s, m)) } else { c(1.0, 0.0) };
                        v += b.h_r[k][m].conj() * t * gw[m];
                    }
                    for n in 0..2 {
                        v += b.h_d[k][n].conj() * bf.w[s][(n, j)];
                    }
                    gains.push(v.norm_sqr());
                }
                let expect = gains[k] / (gains[1 - k] + cfg.sigma2);
                let got = sinr(&ch, &st, &bf, cfg.sigma2, s, k).unwrap();
                assert_relative_eq!(got, expect, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn rate_and_power_bookkeeping() {
        let (cfg, ch) = small();
        let st = ReflectionState::new(2, 3);
        let zero = BeamformerSet::zeros(2, 2, 2);
        assert_eq!(sum_rate(&ch, &st, &zero, cfg.sigma2), 0.0);
        assert_eq!(total_power(&zero), 0.0);

        let unit = BeamformerSet {
            w: vec![CMat::from_fn(2, 2, |i, j| if i == j { c(1.0, 0.0) } else { c(0.0, 0.0) }); 2],
        };
        assert_relative_eq!(total_power(&unit), 4.0);

        // single user at SINR 1 carries one bit
        let h = CVec::from_vec(vec![c(1.0, 0.0)]);
        let ch1 = ChannelSet {
            bs: vec![BsChannels {
                g: CMat::zeros(1, 1),
                h_r: vec![CVec::zeros(1)],
                h_d: vec![h],
            }],
        };
        let bf = BeamformerSet { w: vec![CMat::from_element(1, 1, c(0.5, 0.0))] };
        let st1 = ReflectionState::new(1, 1);
        assert_relative_eq!(sum_rate(&ch1, &st1, &bf, 0.25), 1.0, max_relative = 1e-14);

        let w = DMatrix::from_fn(2, 2, |i, j| c(i as f64 + 0.5, j as f64 - 0.25));
        let bf = BeamformerSet { w: vec![w.clone(), w.clone()] };
        let expect: f64 = 2.0 * w.iter().map(|z| z.norm_sqr()).sum::<f64>();
        assert_relative_eq!(total_power(&bf), expect, max_relative = 1e-14);
    }

    #[test]
    fn mse_with_zero_receiver_is_one() {
        let (cfg, ch) = small();
        let st = ReflectionState::new(2, 3);
        let bf = BeamformerSet { w: vec![CMat::from_element(2, 2, c(0.1, 0.2)); 2] };
        assert_eq!(mse(&ch, &st, &bf, c(0.0, 0.0), cfg.sigma2, 0, 0).unwrap(), 1.0);
    }

    #[test]
    fn mse_term_by_term() {
        let h = CVec::from_vec(vec![c(0.3, -0.2), c(0.1, 0.4)]);
        let w = CMat::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.2, 0.1), c(-0.5, 0.5), c(0.0, 1.0)]);
        let nu = c(0.7, -0.3);
        let sigma2 = 0.05;
        // E|nu^* y - z_0|^2 expanded by hand
        let a0 = h.dotc(&w.column(0).into_owned());
        let a1 = h.dotc(&w.column(1).into_owned());
        let expect = (nu.conj() * a0 - 1.0).norm_sqr() + (nu.conj() * a1).norm_sqr() + nu.norm_sqr() * sigma2;
        assert_relative_eq!(mse_from_channel(&h, &w, nu, 0, sigma2), expect, max_relative = 1e-14);
    }
}
