//! Service-selection design for power minimisation.
//!
//! With beamformers and ideal phases fixed, the summed QoS slack is a quadratic
//! in the binary selection rows `a_s`. Binary one-hot columns are relaxed to the
//! polytope `{0 <= a <= 1, 1^T a_m <= 1}` and binarity is enforced by the
//! difference-of-convex penalty `tau sum_s (1^T a_s - a_s^T a_s)`. The convex
//! parts are linearised around the current iterate (MM) and the remaining
//! concave subproblem is solved by projected gradient ascent.

use nalgebra::{DMatrix, DVector};

use crate::downlink::BeamformerSet;
use crate::linalg::{max_eigenvalue_real, real_part};
use crate::reflection::{practical_reflection, ReflectionState};
use crate::scenario::ChannelSet;
use crate::{CMat, CVec, C64};

/// Quadratic model of the summed QoS slack in the selection rows.
#[derive(Debug, Clone)]
pub struct SelectionQuadratics {
    pub gamma: f64,
    /// `d[s][k][j] = diag(h_{r,s,k}^H) G_s w_{s,j}`.
    pub d: Vec<Vec<Vec<CVec>>>,
    /// `b[s][k][j] = h_{d,s,k}^H w_{s,j}`.
    pub b: Vec<Vec<Vec<C64>>>,
    /// `d_tilde = diag(e^{j phi_s} - 1) d`.
    pub d_tilde: Vec<Vec<Vec<CVec>>>,
    /// `b_tilde = 1^T d + b`.
    pub b_tilde: Vec<Vec<Vec<C64>>>,
    pub e: Vec<CMat>,
    pub dq: Vec<CMat>,
    pub beta: Vec<CVec>,
    /// Terms independent of the selection.
    pub constant: f64,
    e_re: Vec<DMatrix<f64>>,
    dq_re: Vec<DMatrix<f64>>,
    beta_re: Vec<DVector<f64>>,
}

/// Relaxed selection rows, one length-`M` vector per BS.
pub type Rows = Vec<DVector<f64>>;

impl SelectionQuadratics {
    pub fn num_bs(&self) -> usize {
        self.e.len()
    }

    pub fn num_elements(&self) -> usize {
        self.beta.first().map_or(0, |b| b.len())
    }

    /// `sum_s a^T E a - a^T D a + Re{a^T beta}` (constants dropped).
    pub fn objective(&self, a: &Rows) -> f64 {
        (0..self.num_bs())
            .map(|s| {
                let x = &a[s];
                x.dot(&(&self.e_re[s] * x)) - x.dot(&(&self.dq_re[s] * x)) + x.dot(&self.beta_re[s])
            })
            .sum()
    }

    /// Summed QoS slack evaluated through the reflection model.
    pub fn direct_objective(&self, phi: &DMatrix<f64>, selection: &[Option<usize>]) -> f64 {
        let state = ReflectionState::from_parts(phi.clone(), selection.to_vec())
            .expect("selection consistent with the quadratics");
        let mut total = 0.0;
        for s in 0..self.num_bs() {
            let theta = practical_reflection(&state, s);
            let k = self.d[s].len();
            let amp = |u: usize, j: usize| (theta.dot(&self.d[s][u][j]) + self.b[s][u][j]).norm_sqr();
            for u in 0..k {
                total += amp(u, u);
                for j in (0..k).filter(|&j| j != u) {
                    total -= self.gamma * amp(u, j);
                }
            }
        }
        total
    }

    /// Penalised objective for a given `tau`.
    pub fn penalized(&self, a: &Rows, tau: f64) -> f64 {
        self.objective(a) - tau * binary_violation(a)
    }

    /// Copy with all matrices divided by `scale > 0` (same maximisers).
    pub fn scaled(&self, scale: f64) -> Self {
        let inv = C64::from(1.0 / scale);
        let mut out = self.clone();
        out.e.iter_mut().for_each(|m| *m *= inv);
        out.dq.iter_mut().for_each(|m| *m *= inv);
        out.beta.iter_mut().for_each(|v| *v *= inv);
        out.e_re.iter_mut().for_each(|m| *m /= scale);
        out.dq_re.iter_mut().for_each(|m| *m /= scale);
        out.beta_re.iter_mut().for_each(|v| *v /= scale);
        out.constant /= scale;
        out
    }

    /// Natural magnitude of the problem, used to normalise it.
    pub fn magnitude(&self) -> f64 {
        let mut m = 0.0_f64;
        for s in 0..self.num_bs() {
            m = m
                .max(max_eigenvalue_real(&self.e_re[s]))
                .max(max_eigenvalue_real(&self.dq_re[s]))
                .max(self.beta_re[s].amax());
        }
        m
    }

    /// Spectral norm of `sum_s E_s`.
    pub fn e_sum_norm(&self) -> f64 {
        let m = self.num_elements();
        let sum = self.e_re.iter().fold(DMatrix::zeros(m, m), |acc, e| acc + e);
        max_eigenvalue_real(&sum)
    }

    pub fn e_real(&self, s: usize) -> &DMatrix<f64> {
        &self.e_re[s]
    }

    pub fn dq_real(&self, s: usize) -> &DMatrix<f64> {
        &self.dq_re[s]
    }

    pub fn beta_real(&self, s: usize) -> &DVector<f64> {
        &self.beta_re[s]
    }
}

/// Builds the selection quadratics from all beamformers and ideal phases.
pub fn build_selection_quadratics(
    channels: &ChannelSet,
    bf: &BeamformerSet,
    phi: &DMatrix<f64>,
    gamma: f64,
) -> SelectionQuadratics {
    let num_bs = channels.num_bs();
    let m = channels.num_elements();
    let mut out = SelectionQuadratics {
        gamma,
        d: Vec::new(),
        b: Vec::new(),
        d_tilde: Vec::new(),
        b_tilde: Vec::new(),
        e: Vec::new(),
        dq: Vec::new(),
        beta: Vec::new(),
        constant: 0.0,
        e_re: Vec::new(),
        dq_re: Vec::new(),
        beta_re: Vec::new(),
    };
    for s in 0..num_bs {
        let bs = &channels.bs[s];
        let w = &bf.w[s];
        let k = bs.num_users();
        let rot = CVec::from_fn(m, |i, _| C64::from_polar(1.0, phi[(s, i)]) - 1.0);
        let gw: Vec<CVec> = (0..k).map(|j| &bs.g * w.column(j)).collect();
        let d: Vec<Vec<CVec>> = (0..k)
            .map(|u| (0..k).map(|j| bs.h_r[u].zip_map(&gw[j], |h, x| h.conj() * x)).collect())
            .collect();
        let b: Vec<Vec<C64>> = (0..k)
            .map(|u| (0..k).map(|j| bs.h_d[u].dotc(&w.column(j).into_owned())).collect())
            .collect();
        let d_t: Vec<Vec<CVec>> = d
            .iter()
            .map(|row| row.iter().map(|x| x.component_mul(&rot)).collect())
            .collect();
        let b_t: Vec<Vec<C64>> = (0..k)
            .map(|u| (0..k).map(|j| d[u][j].sum() + b[u][j]).collect())
            .collect();

        let mut e = CMat::zeros(m, m);
        let mut dq = CMat::zeros(m, m);
        let mut beta = CVec::zeros(m);
        for u in 0..k {
            let own = &d_t[u][u];
            e += own * own.adjoint() * C64::from(1.0 + gamma);
            beta += own * (b_t[u][u].conj() * 2.0);
            out.constant += b_t[u][u].norm_sqr();
            for j in 0..k {
                let x = &d_t[u][j];
                dq += x * x.adjoint() * C64::from(gamma);
                if j != u {
                    beta -= x * (b_t[u][j].conj() * (2.0 * gamma));
                    out.constant -= gamma * b_t[u][j].norm_sqr();
                }
            }
        }
        out.e_re.push(real_part(&e));
        out.dq_re.push(real_part(&dq));
        out.beta_re.push(beta.map(|z| z.re));
        out.e.push(e);
        out.dq.push(dq);
        out.beta.push(beta);
        out.d.push(d);
        out.b.push(b);
        out.d_tilde.push(d_t);
        out.b_tilde.push(b_t);
    }
    out
}

/// `sum_s (1^T a_s - a_s^T a_s)`; zero exactly for binary rows.
pub fn binary_violation(a: &Rows) -> f64 {
    a.iter().map(|x| x.sum() - x.dot(x)).sum()
}

/// Euclidean projection of one column onto `{x in [0,1]^S : 1^T x <= 1}`.
pub fn project_column(x: &mut [f64]) {
    let clipped: Vec<f64> = x.iter().map(|v| v.clamp(0.0, 1.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        x.copy_from_slice(&clipped);
        return;
    }
    // onto the unit simplex; the upper bounds cannot be active there
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        cum += v;
        let t = (cum - 1.0) / (i + 1) as f64;
        if v - t > 0.0 {
            shift = t;
        }
    }
    for v in x.iter_mut() {
        *v = (*v - shift).max(0.0);
    }
}

/// Projects every column of the relaxed selection onto the feasible set.
pub fn project_rows(a: &mut Rows) {
    let num_bs = a.len();
    if num_bs == 0 {
        return;
    }
    let mut col = vec![0.0; num_bs];
    for m in 0..a[0].len() {
        for s in 0..num_bs {
            col[s] = a[s][m];
        }
        project_column(&mut col);
        for s in 0..num_bs {
            a[s][m] = col[s];
        }
    }
}

/// Relaxed iterate of the MM scheme.
#[derive(Debug, Clone)]
pub struct MmState {
    pub a: Rows,
    pub tau: f64,
    pub t: usize,
}

impl MmState {
    pub fn is_feasible(&self) -> bool {
        let m = self.a.first().map_or(0, |x| x.len());
        let box_ok = self.a.iter().flatten().all(|&v| (-1e-9..=1.0 + 1e-9).contains(&v));
        let col_ok = (0..m).all(|i| self.a.iter().map(|x| x[i]).sum::<f64>() <= 1.0 + 1e-9);
        box_ok && col_ok
    }
}

/// Linear coefficients of the MM surrogate around `at`:
/// `beta_s = 2 E_s a_s^t + 2 tau a_s^t - tau 1 + beta_tilde_s`.
pub fn surrogate_linear(q: &SelectionQuadratics, at: &Rows, tau: f64) -> Rows {
    (0..q.num_bs())
        .map(|s| {
            let x = &at[s];
            &q.e_re[s] * x * 2.0 + x * (2.0 * tau) - DVector::from_element(x.len(), tau) + &q.beta_re[s]
        })
        .collect()
}

/// Surrogate `-sum a^T D a + sum beta^T a + c`; it minorises the penalised
/// objective and touches it at `at`.
pub fn surrogate_value(q: &SelectionQuadratics, at: &Rows, tau: f64, a: &Rows) -> f64 {
    let lin = surrogate_linear(q, at, tau);
    (0..q.num_bs())
        .map(|s| {
            let x = &a[s];
            let xt = &at[s];
            let c = -xt.dot(&(&q.e_re[s] * xt)) - tau * xt.dot(xt);
            -x.dot(&(&q.dq_re[s] * x)) + lin[s].dot(x) + c
        })
        .sum()
}

#[derive(Debug, Clone, Copy)]
pub struct SelectionOptions {
    /// Projected-gradient iterations per MM subproblem.
    pub inner_max_iter: usize,
    pub inner_tol: f64,
    /// Total MM iterations.
    pub max_mm_iter: usize,
    /// MM considered settled at a given `tau` below this change.
    pub mm_tol: f64,
    pub violation_tol: f64,
    pub tau_growth: f64,
    /// `tau_0 = tau_scale * ||sum_s E_s||` on the normalised problem.
    pub tau_scale: f64,
}

impl Default for SelectionOptions {
    fn default() -> Self {
        Self {
            inner_max_iter: 500,
            inner_tol: 1e-6,
            max_mm_iter: 1000,
            mm_tol: 1e-7,
            violation_tol: 1e-3,
            tau_growth: 5.0,
            tau_scale: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MmStep {
    pub a: Rows,
    pub surrogate_start: f64,
    pub surrogate_end: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One MM iteration: maximises the concave surrogate over the selection
/// polytope by projected gradient ascent with step `1/L`.
pub fn mm_step(q: &SelectionQuadratics, state: &MmState, opts: &SelectionOptions) -> MmStep {
    let at = &state.a;
    let lin = surrogate_linear(q, at, state.tau);
    let num_bs = q.num_bs();
    let lip_quad = 2.0 * (0..num_bs).map(|s| max_eigenvalue_real(&q.dq_re[s])).fold(0.0, f64::max);
    let lin_mag = lin.iter().map(|v| v.amax()).fold(0.0, f64::max);
    let lip = lip_quad.max(1e-9 * lin_mag);
    let surrogate_start = surrogate_value(q, at, state.tau, at);
    if lip == 0.0 {
        return MmStep {
            a: at.clone(),
            surrogate_start,
            surrogate_end: surrogate_start,
            iterations: 0,
            converged: true,
        };
    }

    let mut x = at.clone();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.inner_max_iter {
        iterations += 1;
        let mut next: Rows = (0..num_bs)
            .map(|s| {
                let grad = &lin[s] - &q.dq_re[s] * &x[s] * 2.0;
                &x[s] + grad / lip
            })
            .collect();
        project_rows(&mut next);
        let moved: f64 = (0..num_bs).map(|s| (&next[s] - &x[s]).norm_squared()).sum::<f64>().sqrt();
        x = next;
        if moved * lip < opts.inner_tol {
            converged = true;
            break;
        }
    }
    let surrogate_end = surrogate_value(q, at, state.tau, &x);
    MmStep {
        a: x,
        surrogate_start,
        surrogate_end,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MmRecord {
    pub t: usize,
    pub tau: f64,
    /// Penalised objective at the new iterate (normalised units).
    pub penalized: f64,
    /// Penalised objective at the previous iterate with the same `tau`.
    pub penalized_prev: f64,
    pub violation: f64,
}

#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub selection: Vec<Option<usize>>,
    pub relaxed: Rows,
    pub violation: f64,
    pub trace: Vec<MmRecord>,
    /// Rounded although the violation never dropped below the threshold.
    pub rounding_fallback: bool,
    pub inner_nonconverged: usize,
}

/// Per column: the largest entry if it exceeds 0.5, otherwise no BS.
pub fn round_selection(a: &Rows) -> Vec<Option<usize>> {
    let m = a.first().map_or(0, |x| x.len());
    (0..m)
        .map(|i| {
            let mut best = None;
            let mut best_v = 0.5;
            for (s, row) in a.iter().enumerate() {
                if row[i] > best_v {
                    best_v = row[i];
                    best = Some(s);
                }
            }
            best
        })
        .collect()
}

/// MM with geometrically increasing penalty until the relaxed selection is
/// (numerically) binary, followed by rounding.
pub fn run_selection(q: &SelectionQuadratics, init: &Rows, opts: &SelectionOptions) -> SelectionOutcome {
    let magnitude = q.magnitude();
    let qn = if magnitude > 0.0 { q.scaled(magnitude) } else { q.clone() };
    let mut state = MmState {
        a: init.clone(),
        tau: (opts.tau_scale * qn.e_sum_norm()).max(1e-6),
        t: 0,
    };
    project_rows(&mut state.a);

    let mut trace = Vec::new();
    let mut inner_nonconverged = 0;
    let mut violation = binary_violation(&state.a);
    while state.t < opts.max_mm_iter {
        let before = qn.penalized(&state.a, state.tau);
        let step = mm_step(&qn, &state, opts);
        if !step.converged {
            inner_nonconverged += 1;
        }
        let change = (0..state.a.len())
            .map(|s| (&step.a[s] - &state.a[s]).amax())
            .fold(0.0, f64::max);
        state.a = step.a;
        state.t += 1;
        violation = binary_violation(&state.a);
        trace.push(MmRecord {
            t: state.t,
            tau: state.tau,
            penalized: qn.penalized(&state.a, state.tau),
            penalized_prev: before,
            violation,
        });
        if violation <= opts.violation_tol {
            break;
        }
        if change < opts.mm_tol {
            state.tau *= opts.tau_growth;
        }
    }
    if inner_nonconverged > 0 {
        log::debug!("{inner_nonconverged} MM subproblems hit the iteration cap");
    }
    let rounding_fallback = violation > opts.violation_tol;
    if rounding_fallback {
        log::warn!("selection violation {violation:.3e} above threshold, rounding anyway");
    }
    SelectionOutcome {
        selection: round_selection(&state.a),
        relaxed: state.a,
        violation,
        trace,
        rounding_fallback,
        inner_nonconverged,
    }
}

/// Relaxed rows of a binary selection.
pub fn rows_from_selection(selection: &[Option<usize>], num_bs: usize) -> Rows {
    (0..num_bs)
        .map(|s| DVector::from_iterator(selection.len(), selection.iter().map(|&x| f64::from(x == Some(s)))))
        .collect()
}
