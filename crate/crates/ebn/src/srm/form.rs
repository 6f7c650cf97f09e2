//! First-order reliability method: improved HLRF iteration with an
//! Armijo line search on the merit function m(u) = |u|^2/2 + c |G(u)|.

use crate::dist::phi;
use crate::srm::problem::{PreparedProblem, ReliabilityProblem};
use crate::srm::SrmError;

/// Outcome of a design-point search.
#[derive(Debug, Clone)]
pub struct FormResult {
    /// Signed reliability index; positive when the origin is safe.
    pub beta: f64,
    /// Design point in standard normal space.
    pub u_star: Vec<f64>,
    /// Unit normal at the design point.
    pub alpha: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// First-order probability Phi(-beta).
    pub p: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct FormOptions {
    /// Convergence tolerance on |G(u)| relative to the scale of G at the
    /// origin.
    pub tol_g: f64,
    /// Convergence tolerance on the distance of u from the alpha ray.
    pub tol_u: f64,
    pub max_iter: usize,
    /// Relative finite-difference step for the gradient.
    pub fd_step: f64,
}

impl Default for FormOptions {
    fn default() -> Self {
        FormOptions {
            tol_g: 1e-6,
            tol_u: 1e-4,
            max_iter: 100,
            fd_step: 1e-6,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Component FORM. The domain must be a single smooth limit-state
/// expression; system compositions go through the sampling backends.
pub fn form_component(
    prob: &ReliabilityProblem,
    opts: FormOptions,
) -> Result<FormResult, SrmError> {
    let mut prepared = PreparedProblem::new(prob)?;
    if !prepared.is_single_smooth() {
        return Err(SrmError::FormNotApplicable(
            "FORM needs a single smooth limit-state expression; \
             use a sampling backend for system domains"
                .into(),
        ));
    }
    form_iterate(&mut prepared, opts)
}

/// Core iHLRF iteration on an arbitrary prepared problem. Callers that
/// pass a nonsmooth system G get the gradient of whichever member is
/// active at each iterate.
pub(crate) fn form_iterate(
    prepared: &mut PreparedProblem,
    opts: FormOptions,
) -> Result<FormResult, SrmError> {
    let d = prepared.dim();
    let mut slots = vec![0.0; d];
    let mut u = vec![0.0; d];

    let g0 = prepared.g_value(&u, &mut slots)?;
    let g_scale = if g0.abs() > 1e-12 { g0.abs() } else { 1.0 };

    let mut g = g0;
    let mut grad = vec![0.0; d];
    let mut converged = false;
    let mut iterations = 0;
    let mut alpha = vec![0.0; d];

    while iterations < opts.max_iter {
        iterations += 1;

        // Gradient by central differences in u-space.
        let mut grad_ok = true;
        for i in 0..d {
            let h = (opts.fd_step * u[i].abs()).max(opts.fd_step);
            let saved = u[i];
            u[i] = saved + h;
            let fp = prepared.g_value(&u, &mut slots);
            u[i] = saved - h;
            let fm = prepared.g_value(&u, &mut slots);
            u[i] = saved;
            match (fp, fm) {
                (Ok(fp), Ok(fm)) => grad[i] = (fp - fm) / (2.0 * h),
                _ => {
                    grad_ok = false;
                    break;
                }
            }
        }
        if !grad_ok {
            return Err(SrmError::GradientFailure(
                "limit-state evaluation failed at a perturbed point".into(),
            ));
        }
        let gnorm = norm(&grad);
        if gnorm < 1e-300 {
            // Flat limit state: nothing to move along; run the clock out
            // and report non-convergence.
            continue;
        }
        for i in 0..d {
            alpha[i] = -grad[i] / gnorm;
        }

        // Convergence: G near zero and u on the alpha ray.
        let au = dot(&alpha, &u);
        let mut off = 0.0;
        for i in 0..d {
            let r = u[i] - au * alpha[i];
            off += r * r;
        }
        if g.abs() / g_scale < opts.tol_g && off.sqrt() < opts.tol_u {
            converged = true;
            break;
        }

        // HLRF step with Armijo backtracking on the merit function.
        let unorm = norm(&u);
        let c = 2.0 * (unorm + g.abs() / gnorm) + 10.0;
        let merit = |g_val: f64, u_val: &[f64]| 0.5 * dot(u_val, u_val) + c * g_val.abs();
        let m0 = merit(g, &u);
        let target = au + g / gnorm;
        let mut dir = vec![0.0; d];
        for i in 0..d {
            dir[i] = target * alpha[i] - u[i];
        }
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..13 {
            let trial: Vec<f64> = (0..d).map(|i| u[i] + step * dir[i]).collect();
            match prepared.g_value(&trial, &mut slots) {
                Ok(gt) if merit(gt, &trial) < m0 => {
                    accepted = Some((trial, gt));
                    break;
                }
                _ => step *= 0.5,
            }
        }
        match accepted {
            Some((trial, gt)) => {
                u = trial;
                g = gt;
            }
            None => {
                // No merit decrease found; take the smallest step that
                // still evaluates, or stop if nothing does.
                let trial: Vec<f64> = (0..d).map(|i| u[i] + step * dir[i]).collect();
                match prepared.g_value(&trial, &mut slots) {
                    Ok(gt) => {
                        u = trial;
                        g = gt;
                    }
                    Err(_) => break,
                }
            }
        }
    }

    if norm(&alpha) < 0.5 {
        // Gradient never existed (flat G); report a conventional axis.
        alpha = vec![0.0; d];
        if d > 0 {
            alpha[0] = 1.0;
        }
    }
    let beta = if converged {
        let signed = dot(&alpha, &u);
        if g0 == 0.0 {
            signed
        } else {
            norm(&u) * g0.signum()
        }
    } else {
        dot(&alpha, &u)
    };
    Ok(FormResult {
        beta,
        p: phi(-beta),
        u_star: u,
        alpha,
        iterations,
        converged,
    })
}
