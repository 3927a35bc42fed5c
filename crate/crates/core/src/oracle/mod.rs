//! Dense small-scale reference implementations and spectral diagnostics.
//!
//! Everything here materializes matrices and uses `O((MN)^3)` dense linear
//! algebra, guarded to `MN <= 4096`. The module exists to make the solver's
//! spectral-clustering properties testable: it assembles the operator, the
//! block alpha-circulant approximation and its square root and absolute
//! value, computes the clustering bounds `mu`, `nu`, `zeta`, and checks every
//! structured fast path against its dense counterpart.

pub mod suite;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operator::SparseBlockOperator;
use crate::spectral::SpectralBlttOperator;
use crate::transforms::Dst1Plan;

/// Largest dense system order handled by this module.
pub const SIZE_GUARD: usize = 4096;

fn guard(mn: usize) -> Result<()> {
    if mn > SIZE_GUARD {
        return Err(Error::SizeGuard {
            mn,
            guard: SIZE_GUARD,
        });
    }
    Ok(())
}

/// Dense orthonormal DST-I basis of the spatial transform (`U` or `U (x) U`).
pub fn dense_spatial_basis(plan: &Dst1Plan) -> DMatrix<f64> {
    let m = plan.points_per_dim();
    let s = (2.0 / (m + 1) as f64).sqrt();
    let u1 = DMatrix::from_fn(m, m, |p, q| {
        s * (((p + 1) * (q + 1)) as f64 * std::f64::consts::PI / (m + 1) as f64).sin()
    });
    match plan.dims() {
        1 => u1,
        2 => u1.kronecker(&u1),
        _ => unreachable!(),
    }
}

/// Dense time-reversing permutation `Y_N (x) I_M`.
pub fn dense_time_reversal(num_modes: usize, num_steps: usize) -> DMatrix<f64> {
    let mn = num_modes * num_steps;
    let mut y = DMatrix::zeros(mn, mn);
    for t in 0..num_steps {
        for i in 0..num_modes {
            y[(t * num_modes + i, (num_steps - 1 - t) * num_modes + i)] = 1.0;
        }
    }
    y
}

/// Dense blocks `A_(k) = U diag(lambda^(k)) U^T` of a spectral operator.
pub fn dense_blocks(op: &SpectralBlttOperator) -> Vec<DMatrix<f64>> {
    let u = dense_spatial_basis(op.spatial_transform());
    let m = op.num_modes();
    (0..op.num_steps())
        .map(|k| {
            let d = DMatrix::from_fn(m, m, |r, c| if r == c { op.eig(r, k) } else { 0.0 });
            &u * d * u.transpose()
        })
        .collect()
}

/// Explicit BLTT matrix of a spectral operator.
pub fn assemble_dense(op: &SpectralBlttOperator) -> Result<DMatrix<f64>> {
    let (m, n) = (op.num_modes(), op.num_steps());
    guard(m * n)?;
    let blocks = dense_blocks(op);
    let mut a = DMatrix::zeros(m * n, m * n);
    for t1 in 0..n {
        for t2 in 0..=t1 {
            let b = &blocks[t1 - t2];
            for r in 0..m {
                for c in 0..m {
                    a[(t1 * m + r, t2 * m + c)] = b[(r, c)];
                }
            }
        }
    }
    Ok(a)
}

/// Explicit BLTT matrix of a sparse-block operator.
pub fn assemble_dense_sparse(op: &SparseBlockOperator) -> Result<DMatrix<f64>> {
    let (m, n) = (op.num_modes(), op.num_steps());
    guard(m * n)?;
    let blocks: Vec<DMatrix<f64>> = (0..n).map(|k| op.dense_block(k)).collect();
    let mut a = DMatrix::zeros(m * n, m * n);
    for t1 in 0..n {
        for t2 in 0..=t1 {
            let b = &blocks[t1 - t2];
            for r in 0..m {
                for c in 0..m {
                    a[(t1 * m + r, t2 * m + c)] = b[(r, c)];
                }
            }
        }
    }
    Ok(a)
}

/// Dense per-mode alpha-circulant `C_hat_{alpha,i}` from the wrap-around
/// pattern.
pub fn dense_mode_circulant(symbol: &[f64], alpha: f64) -> DMatrix<f64> {
    let n = symbol.len();
    DMatrix::from_fn(n, n, |r, c| {
        if r >= c {
            symbol[r - c]
        } else {
            alpha * symbol[n + r - c]
        }
    })
}

/// Dense lower-triangular Toeplitz `T_hat_i` of one mode's symbol.
pub fn dense_mode_toeplitz(symbol: &[f64]) -> DMatrix<f64> {
    let n = symbol.len();
    DMatrix::from_fn(n, n, |r, c| if r >= c { symbol[r - c] } else { 0.0 })
}

/// Dense per-mode wrap-around remainder in symmetrized form,
/// `Y_N (C_hat_{alpha,i} - T_hat_i)`; Hermitian by construction.
pub fn dense_h_alpha(symbol: &[f64], alpha: f64) -> DMatrix<f64> {
    let n = symbol.len();
    let upper = dense_mode_circulant(symbol, alpha) - dense_mode_toeplitz(symbol);
    let mut h = DMatrix::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            h[(r, c)] = upper[(n - 1 - r, c)];
        }
    }
    h
}

/// Dense `C_alpha`, its principal square root and `P_alpha = |C_alpha|`.
pub struct DenseAlphaCirculant {
    pub c: DMatrix<f64>,
    pub sqrt_complex: DMatrix<Complex64>,
    /// Real part of the square root; the lemma-backed realness makes the
    /// imaginary part pure rounding noise.
    pub sqrt: DMatrix<f64>,
    pub p: DMatrix<f64>,
    /// Largest imaginary entry of the square root relative to its largest
    /// entry magnitude.
    pub sqrt_imag_residue: f64,
}

/// Builds `C_alpha` from the wrap-around tensor pattern, diagonalizes each
/// dense per-mode circulant with explicitly materialized DFT and scaling
/// matrices, and forms the principal square root and the absolute value.
pub fn dense_alpha_circulant(op: &SpectralBlttOperator, alpha: f64) -> Result<DenseAlphaCirculant> {
    let (m, n) = (op.num_modes(), op.num_steps());
    let mn = m * n;
    guard(mn)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha must lie in (0, 1], got {alpha}"
        )));
    }

    // C_alpha from the tensor pattern over dense blocks.
    let blocks = dense_blocks(op);
    let mut c = DMatrix::zeros(mn, mn);
    for t1 in 0..n {
        for t2 in 0..n {
            let (scale, k) = if t1 >= t2 {
                (1.0, t1 - t2)
            } else {
                (alpha, n + t1 - t2)
            };
            if k == 0 || k < n {
                let b = &blocks[k];
                for r in 0..m {
                    for cc in 0..m {
                        c[(t1 * m + r, t2 * m + cc)] = scale * b[(r, cc)];
                    }
                }
            }
        }
    }

    // Materialized unitary DFT and alpha-scaling.
    let theta = 2.0 * std::f64::consts::PI / n as f64;
    let f = DMatrix::from_fn(n, n, |r, cidx| {
        let ang = theta * (r * cidx) as f64;
        Complex64::new(ang.cos(), ang.sin()) / (n as f64).sqrt()
    });
    let f_star = f.adjoint();
    let ln_alpha = alpha.ln();
    let d_v: Vec<f64> = (0..n)
        .map(|j| ((j as f64 / n as f64) * ln_alpha).exp())
        .collect();
    let d = DMatrix::from_fn(n, n, |r, cidx| {
        if r == cidx {
            Complex64::new(d_v[r], 0.0)
        } else {
            Complex64::ZERO
        }
    });
    let d_inv = DMatrix::from_fn(n, n, |r, cidx| {
        if r == cidx {
            Complex64::new(1.0 / d_v[r], 0.0)
        } else {
            Complex64::ZERO
        }
    });

    // Per-mode square roots through the closed-form diagonalization.
    let mut mode_sqrts: Vec<DMatrix<Complex64>> = Vec::with_capacity(m);
    for i in 0..m {
        let sym = op.symbol(i);
        let col = DMatrix::from_fn(n, 1, |r, _| Complex64::new(sym[r] * d_v[r], 0.0));
        let lam = (&f_star * &col) * Complex64::new((n as f64).sqrt(), 0.0);
        let mut lam_sqrt = DMatrix::zeros(n, n);
        for k in 0..n {
            let z = lam[(k, 0)];
            if z.norm() == 0.0 || (z.im == 0.0 && z.re < 0.0) {
                return Err(Error::SingularPreconditioner { value: z });
            }
            lam_sqrt[(k, k)] = z.sqrt();
        }
        mode_sqrts.push(&d_inv * &f * lam_sqrt * &f_star * &d);
    }

    // Assemble through the Kronecker reordering: block (t1, t2) of the
    // mode-block-diagonal middle factor is diag_i(mode_sqrts[i][t1, t2]).
    let u = dense_spatial_basis(op.spatial_transform());
    let uc = u.map(|x| Complex64::new(x, 0.0));
    let mut sqrt_complex = DMatrix::zeros(mn, mn);
    for t1 in 0..n {
        for t2 in 0..n {
            let diag =
                DMatrix::from_fn(
                    m,
                    m,
                    |r, cidx| {
                        if r == cidx {
                            mode_sqrts[r][(t1, t2)]
                        } else {
                            Complex64::ZERO
                        }
                    },
                );
            let b = &uc * diag * uc.transpose();
            for r in 0..m {
                for cc in 0..m {
                    sqrt_complex[(t1 * m + r, t2 * m + cc)] = b[(r, cc)];
                }
            }
        }
    }

    let max_abs = sqrt_complex
        .iter()
        .map(|z| z.norm())
        .fold(f64::MIN_POSITIVE, f64::max);
    let sqrt_imag_residue = sqrt_complex.iter().map(|z| z.im.abs()).fold(0.0, f64::max) / max_abs;
    let sqrt = sqrt_complex.map(|z| z.re);
    let p_complex = sqrt_complex.adjoint() * &sqrt_complex;
    let p_raw = p_complex.map(|z| z.re);
    let p = (&p_raw + p_raw.transpose()) * 0.5;
    Ok(DenseAlphaCirculant {
        c,
        sqrt_complex,
        sqrt,
        p,
        sqrt_imag_residue,
    })
}

/// Dense bundle of every matrix the clustering analysis touches.
pub struct DenseBundle {
    pub a: DMatrix<f64>,
    pub ya: DMatrix<f64>,
    pub c_alpha: DMatrix<f64>,
    pub c_alpha_sqrt: DMatrix<f64>,
    pub p_alpha: DMatrix<f64>,
    pub p_inv_sqrt: DMatrix<f64>,
    pub sqrt_imag_residue: f64,
    /// Eigenvalues of `P^{-1/2} Y A P^{-1/2}`, ascending.
    pub preconditioned_spectrum: Vec<f64>,
}

/// Symmetric inverse square root through an eigendecomposition.
fn sym_inv_sqrt(p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = p.clone().symmetric_eigen();
    let mut d = DMatrix::zeros(p.nrows(), p.ncols());
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        if l <= 0.0 {
            return Err(Error::NotSpd { value: l });
        }
        d[(j, j)] = 1.0 / l.sqrt();
    }
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

fn sym_eigenvalues_sorted(w: &DMatrix<f64>) -> Vec<f64> {
    let sym = (w + w.transpose()) * 0.5;
    let mut e: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

pub fn build_bundle(op: &SpectralBlttOperator, alpha: f64) -> Result<DenseBundle> {
    let a = assemble_dense(op)?;
    let y = dense_time_reversal(op.num_modes(), op.num_steps());
    let ya = &y * &a;
    let dc = dense_alpha_circulant(op, alpha)?;
    let p_inv_sqrt = sym_inv_sqrt(&dc.p)?;
    let w = &p_inv_sqrt * &ya * &p_inv_sqrt;
    let preconditioned_spectrum = sym_eigenvalues_sorted(&w);
    Ok(DenseBundle {
        a,
        ya,
        c_alpha: dc.c,
        c_alpha_sqrt: dc.sqrt,
        p_alpha: dc.p,
        p_inv_sqrt,
        sqrt_imag_residue: dc.sqrt_imag_residue,
        preconditioned_spectrum,
    })
}

/// Sorted real eigenvalues of the symmetrized preconditioned matrix.
pub fn preconditioned_spectrum(bundle: &DenseBundle) -> &[f64] {
    &bundle.preconditioned_spectrum
}

/// Eigenvalues of `Q_alpha = P^{-1/2} Y C_alpha P^{-1/2}`; all of them are
/// -1 or +1 when the square-root identities hold.
pub fn q_alpha_spectrum(bundle: &DenseBundle, num_modes: usize, num_steps: usize) -> Vec<f64> {
    let y = dense_time_reversal(num_modes, num_steps);
    let w = &bundle.p_inv_sqrt * (&y * &bundle.c_alpha) * &bundle.p_inv_sqrt;
    sym_eigenvalues_sorted(&w)
}

/// `||E_alpha||_2` with `E_alpha = P^{-1/2} Y (C_alpha - A) P^{-1/2}`.
pub fn e_alpha_norm(bundle: &DenseBundle, num_modes: usize, num_steps: usize) -> f64 {
    let y = dense_time_reversal(num_modes, num_steps);
    let r = &bundle.c_alpha - &bundle.a;
    let w = &bundle.p_inv_sqrt * (&y * r) * &bundle.p_inv_sqrt;
    sym_eigenvalues_sorted(&w)
        .iter()
        .map(|x| x.abs())
        .fold(0.0, f64::max)
}

/// Positive-branch square root of a lower-triangular matrix with positive
/// diagonal, by the triangular (Schur-form) recurrence.
pub fn triangular_sqrt_lower(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = t.nrows();
    if t.ncols() != n {
        return Err(Error::InvalidArgument("square matrix required".into()));
    }
    let mut r = DMatrix::zeros(n, n);
    for i in 0..n {
        if t[(i, i)] <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "triangular square root needs a positive diagonal, got {}",
                t[(i, i)]
            )));
        }
        r[(i, i)] = t[(i, i)].sqrt();
    }
    for i in 1..n {
        for j in (0..i).rev() {
            let mut acc = t[(i, j)];
            for k in (j + 1)..i {
                acc -= r[(i, k)] * r[(k, j)];
            }
            r[(i, j)] = acc / (r[(i, i)] + r[(j, j)]);
        }
    }
    Ok(r)
}

/// Clustering bounds of the preconditioned spectrum.
#[derive(Debug, Clone)]
pub struct TheoryBounds {
    pub alpha: f64,
    pub delta: f64,
    pub c0: f64,
    /// `||A_(0)||_2 = max_i |lambda_i^(0)|`.
    pub a0_norm: f64,
    /// `lambda_min(S(A)^T S(A)) = min_i lambda_min(S(T_hat_i)^T S(T_hat_i))`.
    pub s_min_sq: f64,
    /// `||S(A)||_2 = max_i ||S(T_hat_i)||_2`.
    pub s_norm: f64,
    /// Final clustering radius coefficient `2(||A_(0)||_2 - c0) / s_min_sq`.
    pub mu: f64,
    /// Mode-wise intermediate `max_i 2(lambda_i^(0) - c0) / s_min_sq`.
    pub mu_max_mode: f64,
    pub nu: f64,
    /// `min(delta^2 / mu, nu)`.
    pub zeta: f64,
    /// Dense `||E_alpha||_2`.
    pub e_norm: f64,
}

/// Computes `c0`, the square-root spectral quantities, `mu`, `nu`, `zeta`
/// and the dense `||E_alpha||_2`.
pub fn theory_bounds(op: &SpectralBlttOperator, alpha: f64, delta: f64) -> Result<TheoryBounds> {
    let (m, n) = (op.num_modes(), op.num_steps());
    guard(m * n)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )));
    }
    let rep = op.check_admissible();
    if !rep.admissible {
        return Err(Error::InvalidArgument(format!(
            "clustering bounds need an admissible operator (c0 = {:.3e})",
            rep.c0
        )));
    }
    let c0 = rep.c0;
    let mut a0_norm: f64 = 0.0;
    let mut s_min_sq = f64::INFINITY;
    let mut s_norm_sq: f64 = 0.0;
    let mut mu_max_mode: f64 = 0.0;
    for i in 0..m {
        let sym = op.symbol(i);
        a0_norm = a0_norm.max(sym[0].abs());
        let t = dense_mode_toeplitz(sym);
        let s = triangular_sqrt_lower(&t)?;
        let g = s.transpose() * &s;
        let eigs = g.symmetric_eigen().eigenvalues;
        let lmin = eigs.iter().copied().fold(f64::INFINITY, f64::min);
        let lmax = eigs.iter().copied().fold(0.0f64, f64::max);
        s_min_sq = s_min_sq.min(lmin);
        s_norm_sq = s_norm_sq.max(lmax);
        mu_max_mode = mu_max_mode.max(sym[0] - c0);
    }
    let s_norm = s_norm_sq.sqrt();
    let mu = 2.0 * (a0_norm - c0) / s_min_sq;
    let mu_max_mode = 2.0 * mu_max_mode / s_min_sq;
    let gap = a0_norm - c0;
    let denom = 4.0 * c0.sqrt() * gap * s_norm + gap * gap;
    let nu = if denom > 0.0 {
        (2.0 * c0 * s_min_sq / denom).min(1.0)
    } else {
        1.0
    };
    let zeta = if mu > 0.0 {
        (delta * delta / mu).min(nu)
    } else {
        nu
    };
    let bundle = build_bundle(op, alpha)?;
    let e_norm = e_alpha_norm(&bundle, m, n);
    Ok(TheoryBounds {
        alpha,
        delta,
        c0,
        a0_norm,
        s_min_sq,
        s_norm,
        mu,
        mu_max_mode,
        nu,
        zeta,
        e_norm,
    })
}

/// Outcome of the iteration-count prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum IterationBound {
    /// Smallest `k >= 1` with `2 delta_eff^{k-1} <= tol`,
    /// `delta_eff = sqrt(alpha mu)`.
    Applicable { predicted: usize, delta_effective: f64 },
    /// The configured alpha exceeds `zeta`, so the bound does not apply.
    NotApplicable { alpha: f64, zeta: f64 },
}

pub fn iteration_bound_check(bounds: &TheoryBounds, tol: f64) -> IterationBound {
    if bounds.alpha > bounds.zeta {
        return IterationBound::NotApplicable {
            alpha: bounds.alpha,
            zeta: bounds.zeta,
        };
    }
    let delta_eff = (bounds.alpha * bounds.mu).sqrt();
    let mut k = 1usize;
    let mut factor = 2.0;
    while factor > tol && k < 1_000_000 {
        factor *= delta_eff;
        k += 1;
    }
    IterationBound::Applicable {
        predicted: k,
        delta_effective: delta_eff,
    }
}
