//! Riemannian conjugate gradient on the complex circle manifold
//! `{theta : |theta_m| = 1}` for the quadratic phase objective
//! `f(theta) = -theta^T D theta^* - 2 Re{theta^T b}` with Hermitian `D`.

use crate::{CMat, CVec, C64};

#[derive(Debug, Clone, Copy)]
pub struct ManifoldOptions {
    pub max_iter: usize,
    /// Stop once `||grad|| <= grad_tol (1 + |f|)` on the normalised problem.
    pub grad_tol: f64,
    pub initial_step: f64,
    pub contraction: f64,
    /// Armijo slope parameter.
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for ManifoldOptions {
    fn default() -> Self {
        Self {
            max_iter: 1000,
            grad_tol: 1e-6,
            initial_step: 1.0,
            contraction: 0.5,
            armijo: 1e-4,
            max_backtracks: 60,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ManifoldResult {
    pub theta: CVec,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    /// Riemannian gradient norm at return, normalised problem.
    pub grad_norm: f64,
    pub converged: bool,
    /// Objective value of every iterate, starting point first.
    pub trace: Vec<f64>,
    /// Largest `| |theta_m| - 1 |` over all iterates.
    pub max_modulus_defect: f64,
}

/// `-theta^T D theta^* - 2 Re{theta^T b}`.
pub fn quadratic_objective(d: &CMat, b: &CVec, theta: &CVec) -> f64 {
    if theta.is_empty() {
        return 0.0;
    }
    let quad = theta.dot(&(d * theta.conjugate()));
    -quad.re - 2.0 * theta.dot(b).re
}

/// Euclidean gradient `2 df/dtheta^*`, so that `df = Re{grad^H dtheta}`.
pub fn euclidean_gradient(d: &CMat, b: &CVec, theta: &CVec) -> CVec {
    ((d * theta.conjugate()) + b).conjugate() * C64::from(-2.0)
}

/// Projection onto the tangent space at `theta`.
pub fn project_tangent(theta: &CVec, v: &CVec) -> CVec {
    v.zip_map(theta, |vi, ti| vi - ti * (vi * ti.conj()).re)
}

/// Elementwise normalisation back onto the manifold.
pub fn retract(v: &CVec) -> CVec {
    v.map(|z| {
        let n = z.norm();
        if n > 0.0 {
            z / n
        } else {
            C64::new(1.0, 0.0)
        }
    })
}

fn real_inner(u: &CVec, v: &CVec) -> f64 {
    u.dotc(v).re
}

fn modulus_defect(theta: &CVec) -> f64 {
    theta.iter().map(|z| (z.norm() - 1.0).abs()).fold(0.0, f64::max)
}

/// Minimises the quadratic phase objective starting from a unit-modulus point.
pub fn optimize_phase_manifold(
    d: &CMat,
    b: &CVec,
    theta_init: &CVec,
    opts: &ManifoldOptions,
) -> ManifoldResult {
    let n = theta_init.len();
    let initial_objective = quadratic_objective(d, b, theta_init);
    let scale = d.norm().max(b.norm());
    if n == 0 || scale == 0.0 || !scale.is_finite() {
        return ManifoldResult {
            theta: theta_init.clone(),
            objective: initial_objective,
            initial_objective,
            iterations: 0,
            grad_norm: 0.0,
            converged: true,
            trace: vec![initial_objective],
            max_modulus_defect: modulus_defect(theta_init),
        };
    }
    // the minimiser does not depend on a positive scaling of the objective
    let dn = d / C64::from(scale);
    let bn = b / C64::from(scale);
    let f = |t: &CVec| quadratic_objective(&dn, &bn, t);
    let rgrad = |t: &CVec| project_tangent(t, &euclidean_gradient(&dn, &bn, t));

    let mut x = retract(theta_init);
    let mut fx = f(&x);
    let mut g = rgrad(&x);
    let mut dir = -g.clone();
    let mut trace = vec![initial_objective];
    let mut max_defect = modulus_defect(&x);
    let mut converged = false;
    let mut iterations = 0;
    // decrease achieved by the previous step; sets the next trial step
    let mut last_decrease: Option<f64> = None;

    while iterations < opts.max_iter {
        let gnorm = g.norm();
        if gnorm <= opts.grad_tol * (1.0 + fx.abs()) {
            converged = true;
            break;
        }
        let mut slope = real_inner(&g, &dir);
        if slope >= 0.0 {
            dir = -g.clone();
            slope = -gnorm * gnorm;
        }
        // quadratic-interpolation guess: a full step would repeat the last
        // decrease; stops symmetric overshoots around the optimum
        let mut step = match last_decrease {
            Some(df) if df > 0.0 => (2.02 * df / -slope).min(opts.initial_step),
            _ => opts.initial_step,
        };
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let cand = retract(&(&x + &dir * C64::from(step)));
            let fc = f(&cand);
            if fc <= fx + opts.armijo * step * slope {
                accepted = Some((cand, fc));
                break;
            }
            step *= opts.contraction;
        }
        let Some((xn, fxn)) = accepted else {
            // no representable decrease left along this direction
            converged = gnorm <= 1e3 * opts.grad_tol * (1.0 + fx.abs());
            break;
        };
        iterations += 1;
        max_defect = max_defect.max(modulus_defect(&xn));
        let gn = rgrad(&xn);
        // vector transport by projection
        let g_old = project_tangent(&xn, &g);
        let dir_old = project_tangent(&xn, &dir);
        let beta = (real_inner(&gn, &(&gn - &g_old)) / (gnorm * gnorm)).max(0.0);
        dir = -&gn + dir_old * C64::from(beta);
        x = xn;
        last_decrease = Some(fx - fxn);
        fx = fxn;
        g = gn;
        trace.push(fx * scale);
    }

    ManifoldResult {
        objective: quadratic_objective(d, b, &x),
        theta: x,
        initial_objective,
        iterations,
        grad_norm: g.norm(),
        converged,
        trace,
        max_modulus_defect: max_defect,
    }
}
