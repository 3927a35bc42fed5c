//! Preconditioned MINRES for symmetric indefinite systems.
//!
//! Standard Lanczos-based minimal residual recurrence with an SPD
//! preconditioner, driven by caller-supplied matvec and
//! preconditioner-apply callbacks. No restarts, no re-orthogonalization;
//! Lanczos breakdown is treated as exhaustion of the Krylov space and the
//! current iterate is returned as converged.

use std::time::Instant;

use crate::error::{Error, Result};

/// Residual norm monitored by the stopping test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualConvention {
    /// `||P^-1 (b - A x_k)||_2 / ||P^-1 b||_2 <= tol`.
    #[default]
    PreconditionedRelative,
    /// `||P^-1 (b - A x_k)||_2 <= tol`.
    PreconditionedAbsolute,
    /// `||b - A x_k||_2 / ||b||_2 <= tol`.
    TrueRelative,
}

#[derive(Debug, Clone)]
pub struct MinresConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub convention: ResidualConvention,
    pub record_history: bool,
}

impl Default for MinresConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            convention: ResidualConvention::PreconditionedRelative,
            record_history: true,
        }
    }
}

impl MinresConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Convergence report of one solve.
#[derive(Debug, Clone)]
pub struct MinresReport {
    pub iterations: usize,
    pub converged: bool,
    /// Monitored norm per iteration, in the units of the configured
    /// convention (entry 0 is the initial value).
    pub residual_history: Vec<f64>,
    /// True relative residual `||b - A x||_2 / ||b||_2` at exit.
    pub final_true_residual: f64,
    pub wall_time: std::time::Duration,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Deterministic probe vectors for the startup symmetry spot-check.
fn probe_vector(len: usize, mut seed: u64) -> Vec<f64> {
    (0..len)
        .map(|_| {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed as f64 / u64::MAX as f64) * 2.0 - 1.0
        })
        .collect()
}

/// Solves `A x = b` with MINRES, optionally preconditioned by an SPD `P`
/// supplied through its inverse action.
///
/// The matvec must realize a symmetric operator; this is the caller's
/// contract, spot-checked by one randomized probe at startup. Reaching
/// `max_iter` yields a non-converged report, not an error.
pub fn solve(
    matvec: &dyn Fn(&[f64]) -> Vec<f64>,
    prec_inv: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    rhs: &[f64],
    cfg: &MinresConfig,
) -> Result<(Vec<f64>, MinresReport)> {
    cfg.validate()?;
    let start = Instant::now();
    let len = rhs.len();
    let apply_prec = |v: &[f64]| -> Vec<f64> {
        match prec_inv {
            Some(p) => p(v),
            None => v.to_vec(),
        }
    };

    // Symmetry spot check: <A u, v> == <u, A v> for one random pair.
    {
        let u = probe_vector(len, 0x5EED_1234_ABCD_0001);
        let v = probe_vector(len, 0x5EED_1234_ABCD_0002);
        let au = matvec(&u);
        let av = matvec(&v);
        let lhs = dot(&au, &v);
        let rhs_ = dot(&u, &av);
        let scale = norm2(&au) * norm2(&v) + norm2(&u) * norm2(&av);
        let defect = (lhs - rhs_).abs() / scale.max(f64::MIN_POSITIVE);
        if defect > 1e-8 {
            return Err(Error::ContractViolation { defect });
        }
    }

    let norm_b = norm2(rhs);
    let mut history = Vec::new();
    if norm_b == 0.0 {
        let report = MinresReport {
            iterations: 0,
            converged: true,
            residual_history: vec![0.0],
            final_true_residual: 0.0,
            wall_time: start.elapsed(),
        };
        return Ok((vec![0.0; len], report));
    }

    // Monitoring setup. The monitored norm is recomputed explicitly from the
    // current iterate each iteration; the recurrence scalar |eta| tracks the
    // P^-1-norm of the residual and only drives breakdown detection.
    let pb = apply_prec(rhs);
    let norm_pb = norm2(&pb);
    let monitored = |x: &[f64]| -> (f64, f64) {
        let ax = matvec(x);
        let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let true_rel = norm2(&r) / norm_b;
        let value = match cfg.convention {
            ResidualConvention::TrueRelative => true_rel,
            ResidualConvention::PreconditionedAbsolute => norm2(&apply_prec(&r)),
            ResidualConvention::PreconditionedRelative => {
                norm2(&apply_prec(&r)) / norm_pb.max(f64::MIN_POSITIVE)
            }
        };
        (value, true_rel)
    };

    let initial_monitor = match cfg.convention {
        ResidualConvention::TrueRelative | ResidualConvention::PreconditionedRelative => 1.0,
        ResidualConvention::PreconditionedAbsolute => norm_pb,
    };
    if cfg.record_history {
        history.push(initial_monitor);
    }
    if initial_monitor <= cfg.tol {
        let report = MinresReport {
            iterations: 0,
            converged: true,
            residual_history: history,
            final_true_residual: 1.0,
            wall_time: start.elapsed(),
        };
        return Ok((vec![0.0; len], report));
    }

    // Lanczos and Givens state (zero initial guess).
    let mut x = vec![0.0; len];
    let mut v_old = vec![0.0; len];
    let mut v = rhs.to_vec();
    let mut z = pb;
    let q0 = dot(&z, &v);
    if q0 <= 0.0 {
        return Err(Error::NotSpd { value: q0 });
    }
    let mut gamma = q0.sqrt();
    let mut gamma_old = 1.0;
    let mut eta = gamma;
    let (mut s_old, mut s) = (0.0, 0.0);
    let (mut c_old, mut c) = (1.0, 1.0);
    let mut w_old = vec![0.0; len];
    let mut w = vec![0.0; len];
    let mut gamma_max = gamma;

    let mut iterations = 0;
    let mut converged = false;
    let mut last_monitor = initial_monitor;
    let mut last_true = 1.0;

    for _ in 1..=cfg.max_iter {
        // Lanczos step in the P^-1 inner product.
        let zt: Vec<f64> = z.iter().map(|x| x / gamma).collect();
        let az = matvec(&zt);
        let delta = dot(&az, &zt);
        let mut v_new = az;
        for ((vn, vc), vo) in v_new.iter_mut().zip(&v).zip(&v_old) {
            *vn -= (delta / gamma) * vc + (gamma / gamma_old) * vo;
        }
        let z_new = apply_prec(&v_new);
        let q = dot(&z_new, &v_new);
        if q < -(1e-12 * gamma_max).powi(2) && q < -f64::MIN_POSITIVE {
            return Err(Error::NotSpd { value: q });
        }
        let gamma_new = q.max(0.0).sqrt();
        let breakdown = gamma_new <= 1e-14 * gamma_max;

        // Givens update of the tridiagonal factorization.
        let alpha0 = c * delta - c_old * s * gamma;
        let alpha1 = (alpha0 * alpha0 + gamma_new * gamma_new).sqrt();
        let alpha2 = s * delta + c_old * c * gamma;
        let alpha3 = s_old * gamma;
        if alpha1 == 0.0 {
            converged = true;
            break;
        }
        let c_new = alpha0 / alpha1;
        let s_new = gamma_new / alpha1;
        let mut w_new = zt;
        for ((wn, wo), wc) in w_new.iter_mut().zip(&w_old).zip(&w) {
            *wn = (*wn - alpha3 * wo - alpha2 * wc) / alpha1;
        }
        for (xj, wn) in x.iter_mut().zip(&w_new) {
            *xj += c_new * eta * wn;
        }
        eta = -s_new * eta;
        iterations += 1;

        // Shift state.
        std::mem::swap(&mut v_old, &mut v);
        v = v_new;
        z = z_new;
        gamma_old = gamma;
        gamma = gamma_new.max(f64::MIN_POSITIVE);
        gamma_max = gamma_max.max(gamma_new);
        c_old = c;
        c = c_new;
        s_old = s;
        s = s_new;
        std::mem::swap(&mut w_old, &mut w);
        w = w_new;

        let (value, true_rel) = monitored(&x);
        last_monitor = value;
        last_true = true_rel;
        if cfg.record_history {
            history.push(value);
        }
        if value <= cfg.tol {
            converged = true;
            break;
        }
        if breakdown {
            // Krylov space exhausted: the iterate is exact up to rounding.
            converged = true;
            break;
        }
    }

    if !cfg.record_history {
        history.push(last_monitor);
    }
    let report = MinresReport {
        iterations,
        converged,
        residual_history: history,
        final_true_residual: last_true,
        wall_time: start.elapsed(),
    };
    Ok((x, report))
}
