//! Composition layer: wires a built problem, a preconditioner choice and the
//! MINRES solver together the way the benchmark harness runs them.

use crate::abac::{build_alpha_spectrum, sqrt_spectrum};
use crate::error::{Error, Result};
use crate::minres::{self, MinresConfig, MinresReport};
use crate::operator::{time_reverse, BlttMatvec};
use crate::problems::BuiltProblem;

/// Preconditioner selection for one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreconditionerChoice {
    /// Absolute-value block alpha-circulant.
    Abac { alpha: f64 },
    /// Absolute-value block circulant, the `alpha = 1` specialization.
    BlockCirculant,
    /// Unpreconditioned MINRES.
    None,
}

impl PreconditionerChoice {
    pub fn label(&self) -> &'static str {
        match self {
            PreconditionerChoice::Abac { .. } => "minres-p_alpha",
            PreconditionerChoice::BlockCirculant => "minres-p_1",
            PreconditionerChoice::None => "minres-i",
        }
    }
}

/// Solves the symmetrized system `Y A u = Y f` of a built problem.
///
/// The matvec uses the true operator when the problem carries one (variable
/// coefficients); the preconditioner is always built from the spectral
/// operator, which in that case is the mean-coefficient surrogate.
pub fn solve_problem(
    problem: &BuiltProblem,
    choice: PreconditionerChoice,
    cfg: &MinresConfig,
) -> Result<(Vec<f64>, MinresReport)> {
    let m = problem.grid.len();
    let n = problem.num_steps;
    let rhs = time_reverse(&problem.rhs, m, n)?;

    let prec = match choice {
        PreconditionerChoice::Abac { alpha } => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "alpha must lie in (0, 1], got {alpha}"
                )));
            }
            Some(sqrt_spectrum(build_alpha_spectrum(&problem.operator, alpha)?)?)
        }
        PreconditionerChoice::BlockCirculant => {
            Some(sqrt_spectrum(build_alpha_spectrum(&problem.operator, 1.0)?)?)
        }
        PreconditionerChoice::None => None,
    };
    let prec_fn = prec.as_ref().map(|p| {
        move |v: &[f64]| p.apply_inverse(v).expect("preconditioner apply on sized buffer")
    });

    let spectral_mv = if problem.true_operator.is_none() {
        Some(BlttMatvec::new(&problem.operator))
    } else {
        None
    };
    let matvec = |v: &[f64]| -> Vec<f64> {
        match (&problem.true_operator, &spectral_mv) {
            (Some(sparse), _) => sparse.apply_symmetrized(v).expect("sized buffer"),
            (None, Some(mv)) => mv.apply_symmetrized(v).expect("sized buffer"),
            (None, None) => unreachable!(),
        }
    };

    match &prec_fn {
        Some(p) => minres::solve(&matvec, Some(p), &rhs, cfg),
        None => minres::solve(&matvec, None, &rhs, cfg),
    }
}
