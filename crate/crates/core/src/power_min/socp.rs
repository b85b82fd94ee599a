//! Per-BS downlink power minimisation under SINR targets.
//!
//! Solved through uplink-downlink duality: the virtual uplink powers are the
//! minimal fixed point of a standard interference function, the MMSE receive
//! filters at that point are the optimal downlink beam directions, and the
//! downlink powers follow from making every SINR constraint active.

use nalgebra::{DMatrix, DVector};

use crate::{CMat, CVec, Error, Result, C64};

#[derive(Debug, Clone, Copy)]
pub struct SocpOptions {
    pub max_iter: usize,
    /// Relative change of the uplink powers at which the fixed point stops.
    pub tol: f64,
}

impl Default for SocpOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SocpSolution {
    /// `Nt x K` beamformers.
    pub w: CMat,
    pub power: f64,
    /// Dual (virtual uplink) powers, normalised to unit uplink noise.
    pub uplink: Vec<f64>,
    pub iterations: usize,
}

fn interference_matrix(h: &[CVec], q: &[f64], skip: Option<usize>) -> CMat {
    let nt = h[0].len();
    let mut t = CMat::identity(nt, nt);
    for (j, (hj, &qj)) in h.iter().zip(q).enumerate() {
        if Some(j) != skip {
            t += hj * hj.adjoint() * C64::from(qj);
        }
    }
    t
}

fn solve_hpd(t: CMat, rhs: &CVec) -> Result<CVec> {
    t.cholesky()
        .map(|c| c.solve(rhs))
        .ok_or_else(|| Error::Numerical("interference matrix lost positive definiteness".into()))
}

/// Minimum-power beamformers meeting `SINR_k >= gamma` for the effective
/// channels `h` and noise `sigma2`.
pub fn solve_beamforming_socp(
    h: &[CVec],
    gamma: f64,
    sigma2: f64,
    opts: &SocpOptions,
) -> Result<SocpSolution> {
    let infeasible = |reason: String| Error::Infeasible { bs: 0, reason };
    let k = h.len();
    if k == 0 {
        return Ok(SocpSolution {
            w: CMat::zeros(0, 0),
            power: 0.0,
            uplink: Vec::new(),
            iterations: 0,
        });
    }
    let nt = h[0].len();
    if h.iter().any(|x| x.len() != nt) {
        return Err(Error::Dimension("effective channels differ in length".into()));
    }
    if h.iter().any(|x| x.norm_squared() == 0.0) {
        return Err(infeasible("a user has an all-zero effective channel".into()));
    }
    if !(gamma > 0.0 && sigma2 > 0.0) {
        return Err(Error::Domain("SINR target and noise power must be positive".into()));
    }

    // fixed point q_k = gamma / (h_k^H (I + sum_{j != k} q_j h_j h_j^H)^-1 h_k)
    let mut q = vec![0.0; k];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iter {
        iterations += 1;
        let mut next = vec![0.0; k];
        for u in 0..k {
            let t = interference_matrix(h, &q, Some(u));
            // breakdown here means the powers have already blown up
            let x = solve_hpd(t, &h[u]).map_err(|_| infeasible("uplink power fixed point diverged".into()))?;
            let gain = h[u].dotc(&x).re;
            next[u] = gamma / gain;
        }
        if next.iter().any(|v| !v.is_finite() || *v > 1e300) {
            return Err(infeasible("uplink power fixed point diverged".into()));
        }
        let change = q
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max);
        q = next;
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(infeasible(format!(
            "uplink power fixed point did not settle in {} iterations",
            opts.max_iter
        )));
    }

    // MMSE receive directions are the optimal downlink beam directions
    let t = interference_matrix(h, &q, None);
    let chol = t
        .cholesky()
        .ok_or_else(|| Error::Numerical("interference matrix lost positive definiteness".into()))?;
    let dirs: Vec<CVec> = h
        .iter()
        .map(|hk| {
            let v = chol.solve(hk);
            let n = v.norm();
            v / C64::from(n)
        })
        .collect();

    // make every SINR constraint active: A p = sigma2 1
    let mut a = DMatrix::<f64>::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            let g = h[r].dotc(&dirs[c]).norm_sqr();
            a[(r, c)] = if r == c { g / gamma } else { -g };
        }
    }
    let p = a
        .lu()
        .solve(&DVector::from_element(k, sigma2))
        .ok_or_else(|| infeasible("downlink power system is singular".into()))?;
    if p.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(infeasible("downlink power system has no positive solution".into()));
    }

    let mut w = CMat::zeros(nt, k);
    for (c, d) in dirs.iter().enumerate() {
        w.set_column(c, &(d * C64::from(p[c].sqrt())));
    }
    Ok(SocpSolution {
        power: p.sum(),
        w,
        uplink: q,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downlink::sinr_from_channel;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_user_is_scaled_matched_filter() {
        let h = CVec::from_vec(vec![c(2e-5, -1e-5), c(0.5e-5, 3e-5), c(-1e-5, 0.0)]);
        let (gamma, sigma2) = (3.0, 1e-10);
        let sol = solve_beamforming_socp(&[h.clone()], gamma, sigma2, &SocpOptions::default()).unwrap();
        let expect = gamma * sigma2 / h.norm_squared();
        assert_relative_eq!(sol.power, expect, max_relative = 1e-12);
        let w_ref = &h * C64::from((gamma * sigma2).sqrt() / h.norm_squared());
        // equal up to a common phase
        let phase = w_ref.dotc(&sol.w.column(0).into_owned());
        assert_relative_eq!(phase.norm(), w_ref.norm_squared(), max_relative = 1e-12);
    }

    #[test]
    fn orthogonal_users_decouple() {
        let h1 = CVec::from_vec(vec![c(1e-4, 0.0), c(0.0, 0.0)]);
        let h2 = CVec::from_vec(vec![c(0.0, 0.0), c(0.0, 3e-4)]);
        let (gamma, sigma2) = (2.0, 1e-10);
        let sol = solve_beamforming_socp(&[h1.clone(), h2.clone()], gamma, sigma2, &SocpOptions::default()).unwrap();
        let expect = gamma * sigma2 / h1.norm_squared() + gamma * sigma2 / h2.norm_squared();
        assert_relative_eq!(sol.power, expect, max_relative = 1e-10);
        assert!(h1.dotc(&sol.w.column(1).into_owned()).norm() < 1e-20);
    }

    #[test]
    fn constraints_are_active_and_duality_gap_closes() {
        let h = vec![
            CVec::from_vec(vec![c(1.0, 0.3), c(-0.2, 0.5), c(0.1, 0.1)]),
            CVec::from_vec(vec![c(0.4, -0.1), c(0.9, 0.0), c(-0.3, 0.2)]),
            CVec::from_vec(vec![c(0.2, 0.2), c(0.1, -0.6), c(0.8, 0.1)]),
        ];
        let (gamma, sigma2) = (4.0, 0.01);
        let sol = solve_beamforming_socp(&h, gamma, sigma2, &SocpOptions::default()).unwrap();
        for k in 0..3 {
            let g = sinr_from_channel(&h[k], &sol.w, k, sigma2);
            assert_relative_eq!(g, gamma, max_relative = 1e-8);
        }
        // strong duality: downlink power equals sigma2 times the uplink power sum
        assert_relative_eq!(sol.power, sigma2 * sol.uplink.iter().sum::<f64>(), max_relative = 1e-8);
    }

    #[test]
    fn parallel_channels_are_infeasible() {
        let h = CVec::from_vec(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        let err = solve_beamforming_socp(&[h.clone(), h * C64::from(2.0)], 2.0, 0.1, &SocpOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Infeasible { .. }), "{err}");
        let zero = CVec::zeros(2);
        assert!(solve_beamforming_socp(&[zero], 1.0, 1.0, &SocpOptions::default()).is_err());
    }
}
