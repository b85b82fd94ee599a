//! Quadratic form of the summed QoS slack in the phases of the selected
//! elements of one BS.
//!
//! With `d_{k,j} = diag(h_{r,k}^H) G w_j` and `b_{k,j} = h_{d,k}^H w_j`, the
//! received amplitude of stream `j` at user `k` is `theta^T d_{k,j} + b_{k,j}`.
//! Unselected elements have `theta_m = 1` and are folded into the constant
//! `c_{k,j} = b_{k,j} + sum_{m not selected} d_{k,j}[m]`.

use crate::power_min::manifold::quadratic_objective;
use crate::reflection::ReflectionState;
use crate::scenario::ChannelSet;
use crate::{CMat, CVec, C64};

#[derive(Debug, Clone)]
pub struct QosQuadratics {
    /// Selected element indices, ascending.
    pub selected: Vec<usize>,
    /// `d[k][j]`, full length `M`.
    pub d: Vec<Vec<CVec>>,
    /// `b[k][j]`.
    pub b: Vec<Vec<C64>>,
    pub gamma: f64,
    /// Hermitian `|I| x |I|` matrix of the phase objective.
    pub d_mat: CMat,
    /// Linear term of the phase objective.
    pub b_vec: CVec,
    /// Constant such that the summed slack equals `constant - f(theta_hat)`.
    pub constant: f64,
}

impl QosQuadratics {
    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Phase objective `-theta^T D theta^* - 2 Re{theta^T b}` over the selected
    /// elements.
    pub fn phase_objective(&self, theta_hat: &CVec) -> f64 {
        quadratic_objective(&self.d_mat, &self.b_vec, theta_hat)
    }

    /// Summed QoS slack (without noise terms) evaluated directly from the full
    /// reflection vector.
    pub fn qos_sum(&self, theta: &CVec) -> f64 {
        let k = self.d.len();
        let amp = |u: usize, j: usize| (theta.dot(&self.d[u][j]) + self.b[u][j]).norm_sqr();
        (0..k)
            .map(|u| amp(u, u) - self.gamma * (0..k).filter(|&j| j != u).map(|j| amp(u, j)).sum::<f64>())
            .sum()
    }

    /// Entries of `theta` on the selected elements.
    pub fn restrict(&self, theta: &CVec) -> CVec {
        CVec::from_iterator(self.selected.len(), self.selected.iter().map(|&m| theta[m]))
    }
}

/// Builds the quadratic for BS `s` from its beamformers `w` and the selection
/// row of `state`.
pub fn build_qos_quadratics(
    channels: &ChannelSet,
    w: &CMat,
    state: &ReflectionState,
    gamma: f64,
    s: usize,
) -> QosQuadratics {
    build_qos_quadratics_for(channels, w, &state.selection_row(s), gamma, s)
}

/// As [`build_qos_quadratics`], with the selected elements given explicitly
/// (all `true` for the ideal surface).
pub fn build_qos_quadratics_for(
    channels: &ChannelSet,
    w: &CMat,
    selected_row: &[bool],
    gamma: f64,
    s: usize,
) -> QosQuadratics {
    let bs = &channels.bs[s];
    let k = bs.num_users();
    let selected: Vec<usize> = (0..selected_row.len()).filter(|&m| selected_row[m]).collect();
    let n = selected.len();

    let gw: Vec<CVec> = (0..k).map(|j| &bs.g * w.column(j)).collect();
    let d: Vec<Vec<CVec>> = (0..k)
        .map(|u| {
            (0..k)
                .map(|j| bs.h_r[u].zip_map(&gw[j], |h, x| h.conj() * x))
                .collect()
        })
        .collect();
    let b: Vec<Vec<C64>> = (0..k)
        .map(|u| (0..k).map(|j| bs.h_d[u].dotc(&w.column(j).into_owned())).collect())
        .collect();

    let mut d_mat = CMat::zeros(n, n);
    let mut b_vec = CVec::zeros(n);
    let mut constant = 0.0;
    for u in 0..k {
        for j in 0..k {
            let weight = if j == u { 1.0 } else { -gamma };
            let full = &d[u][j];
            let hat = CVec::from_iterator(n, selected.iter().map(|&m| full[m]));
            let fixed: C64 = (0..full.len())
                .filter(|&m| !selected_row[m])
                .map(|m| full[m])
                .sum::<C64>()
                + b[u][j];
            d_mat += &hat * hat.adjoint() * C64::from(weight);
            b_vec += &hat * (fixed.conj() * weight);
            constant += weight * fixed.norm_sqr();
        }
    }

    QosQuadratics {
        selected,
        d,
        b,
        gamma,
        d_mat,
        b_vec,
        constant,
    }
}
