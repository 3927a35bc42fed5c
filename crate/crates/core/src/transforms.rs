//! Fast orthogonal/unitary transform kernels.
//!
//! Houses the unitary DFT pair, the orthonormal DST-I spatial eigenbasis,
//! the geometric alpha-scaling diagonal and the Kronecker-reordering
//! permutation. Conventions are fixed once here and used everywhere:
//!
//! * `DftPlan::forward` applies the conjugate transpose of the unitary DFT
//!   matrix with entries `theta^{(i-1)(j-1)} / sqrt(N)`,
//!   `theta = exp(2 pi i / N)`; `DftPlan::inverse` applies the matrix itself.
//!   Forward of the all-ones vector is `(sqrt(N), 0, ..., 0)`.
//! * `Dst1Plan::apply` is the orthonormal DST-I with entries
//!   `sqrt(2/(m+1)) * sin(p q pi / (m+1))`, its own inverse, realised by an
//!   odd-extension complex FFT of length `2(m+1)`.
//! * `kron_reorder` permutes between time-major layout (N blocks of length M)
//!   and mode-major layout (M blocks of length N) as an index map; the matrix
//!   is never materialized.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Unitary DFT plan of a fixed length.
#[derive(Clone)]
pub struct DftPlan {
    len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DftPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DftPlan").field("len", &self.len).finish()
    }
}

impl DftPlan {
    pub fn new(len: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::InvalidArgument("DFT length must be positive".into()));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            fwd: planner.plan_fft_forward(len),
            inv: planner.plan_fft_inverse(len),
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got,
            });
        }
        Ok(())
    }

    /// In-place forward transform (multiplication by the conjugate transpose
    /// of the unitary DFT matrix), with caller-owned scratch.
    pub fn forward_in_place(&self, v: &mut [Complex64], scratch: &mut Vec<Complex64>) -> Result<()> {
        self.check_len(v.len())?;
        scratch.resize(self.fwd.get_inplace_scratch_len(), Complex64::ZERO);
        self.fwd.process_with_scratch(v, scratch);
        let s = 1.0 / (self.len as f64).sqrt();
        for x in v.iter_mut() {
            *x *= s;
        }
        Ok(())
    }

    /// In-place inverse transform (multiplication by the unitary DFT matrix).
    pub fn inverse_in_place(&self, v: &mut [Complex64], scratch: &mut Vec<Complex64>) -> Result<()> {
        self.check_len(v.len())?;
        scratch.resize(self.inv.get_inplace_scratch_len(), Complex64::ZERO);
        self.inv.process_with_scratch(v, scratch);
        let s = 1.0 / (self.len as f64).sqrt();
        for x in v.iter_mut() {
            *x *= s;
        }
        Ok(())
    }

    pub fn forward(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = v.to_vec();
        let mut scratch = Vec::new();
        self.forward_in_place(&mut out, &mut scratch)?;
        Ok(out)
    }

    pub fn inverse(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut out = v.to_vec();
        let mut scratch = Vec::new();
        self.inverse_in_place(&mut out, &mut scratch)?;
        Ok(out)
    }

    /// Unnormalized forward transform `sqrt(N) * forward`, the raw FFT sum
    /// `sum_j v_j theta^{-(k-1)(j-1)}`. This is the map taking a scaled
    /// coefficient column to the alpha-circulant eigenvalues.
    pub fn forward_unnormalized_in_place(
        &self,
        v: &mut [Complex64],
        scratch: &mut Vec<Complex64>,
    ) -> Result<()> {
        self.check_len(v.len())?;
        scratch.resize(self.fwd.get_inplace_scratch_len(), Complex64::ZERO);
        self.fwd.process_with_scratch(v, scratch);
        Ok(())
    }
}

/// Orthonormal DST-I plan over a `d`-dimensional cube of `m` points per side.
#[derive(Clone)]
pub struct Dst1Plan {
    m: usize,
    dims: usize,
    fft: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl std::fmt::Debug for Dst1Plan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dst1Plan")
            .field("m", &self.m)
            .field("dims", &self.dims)
            .finish()
    }
}

/// Reusable work buffers for DST applications.
#[derive(Default)]
pub struct Dst1Scratch {
    ext: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
    line: Vec<f64>,
}

impl Dst1Plan {
    pub fn new(m: usize, dims: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("DST length must be positive".into()));
        }
        if dims != 1 && dims != 2 {
            return Err(Error::InvalidArgument(format!(
                "unsupported spatial dimension count {dims} (1 and 2 are supported)"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            dims,
            fft: planner.plan_fft_forward(2 * (m + 1)),
            scale: (2.0 / (m + 1) as f64).sqrt(),
        })
    }

    /// Points per spatial dimension.
    pub fn points_per_dim(&self) -> usize {
        self.m
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Total transform length `m^d`.
    pub fn len(&self) -> usize {
        self.m.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// One-dimensional orthonormal DST-I of a single line, in place.
    fn line_in_place(&self, v: &mut [f64], ws: &mut Dst1Scratch) {
        let m = self.m;
        let ext_len = 2 * (m + 1);
        ws.ext.resize(ext_len, Complex64::ZERO);
        ws.fft_scratch
            .resize(self.fft.get_inplace_scratch_len(), Complex64::ZERO);
        ws.ext[0] = Complex64::ZERO;
        ws.ext[m + 1] = Complex64::ZERO;
        for j in 0..m {
            ws.ext[j + 1] = Complex64::new(v[j], 0.0);
            ws.ext[ext_len - 1 - j] = Complex64::new(-v[j], 0.0);
        }
        self.fft.process_with_scratch(&mut ws.ext, &mut ws.fft_scratch);
        // FFT of the odd extension gives bins Y_k = -2i * sum_j v_j sin(pi jk/(m+1)).
        for k in 0..m {
            v[k] = -0.5 * self.scale * ws.ext[k + 1].im;
        }
    }

    /// In-place transform of one `m^d` block, with caller-owned scratch.
    pub fn apply_in_place(&self, v: &mut [f64], ws: &mut Dst1Scratch) -> Result<()> {
        if v.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        let m = self.m;
        match self.dims {
            1 => self.line_in_place(v, ws),
            2 => {
                // Transform along the contiguous dimension, then the strided one.
                for row in v.chunks_exact_mut(m) {
                    self.line_in_place(row, ws);
                }
                let mut line = std::mem::take(&mut ws.line);
                line.resize(m, 0.0);
                for j1 in 0..m {
                    for j2 in 0..m {
                        line[j2] = v[j2 * m + j1];
                    }
                    self.line_in_place(&mut line, ws);
                    for j2 in 0..m {
                        v[j2 * m + j1] = line[j2];
                    }
                }
                ws.line = line;
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Out-of-place transform of one block.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = v.to_vec();
        let mut ws = Dst1Scratch::default();
        self.apply_in_place(&mut out, &mut ws)?;
        Ok(out)
    }
}

/// Geometric scaling diagonal with entries `alpha^{(j-1)/N}`, `j = 1..N`.
///
/// Entries are evaluated as `exp(((j-1)/N) ln alpha)` so the same values are
/// produced for any `alpha`, however tiny; the elementwise inverse is stored
/// alongside.
#[derive(Debug, Clone)]
pub struct AlphaScaling {
    alpha: f64,
    weights: Vec<f64>,
    inv_weights: Vec<f64>,
}

impl AlphaScaling {
    pub fn new(alpha: f64, len: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        if len == 0 {
            return Err(Error::InvalidArgument("scaling length must be positive".into()));
        }
        let ln_alpha = alpha.ln();
        let mut weights = Vec::with_capacity(len);
        let mut inv_weights = Vec::with_capacity(len);
        for j in 0..len {
            let e = (j as f64 / len as f64) * ln_alpha;
            weights.push(e.exp());
            inv_weights.push((-e).exp());
        }
        Ok(Self {
            alpha,
            weights,
            inv_weights,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Entries `alpha^{(j-1)/N}` in order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Entries `alpha^{-(j-1)/N}` in order.
    pub fn inv_weights(&self) -> &[f64] {
        &self.inv_weights
    }
}

/// Direction of the Kronecker-reordering permutation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReorderDirection {
    /// Time-major (N blocks of length M) to mode-major (M blocks of length N).
    ToModeMajor,
    /// Mode-major back to time-major.
    ToTimeMajor,
}

/// Applies the Kronecker-reordering permutation to a length-`MN` vector.
///
/// The two directions are mutual inverses.
pub fn kron_reorder<T: Copy>(
    v: &[T],
    m: usize,
    n: usize,
    direction: ReorderDirection,
) -> Result<Vec<T>> {
    if m == 0 || n == 0 || v.len() != m * n {
        return Err(Error::InvalidArgument(format!(
            "vector of length {} does not factor as M x N = {m} x {n}",
            v.len()
        )));
    }
    let mut out = Vec::with_capacity(v.len());
    match direction {
        ReorderDirection::ToModeMajor => {
            for i in 0..m {
                for t in 0..n {
                    out.push(v[t * m + i]);
                }
            }
        }
        ReorderDirection::ToTimeMajor => {
            for t in 0..n {
                for i in 0..m {
                    out.push(v[i * n + t]);
                }
            }
        }
    }
    Ok(out)
}

/// In-place-style reorder writing into a caller-owned output slice.
pub fn kron_reorder_into<T: Copy>(
    v: &[T],
    out: &mut [T],
    m: usize,
    n: usize,
    direction: ReorderDirection,
) -> Result<()> {
    if m == 0 || n == 0 || v.len() != m * n || out.len() != m * n {
        return Err(Error::InvalidArgument(format!(
            "vector of length {} does not factor as M x N = {m} x {n}",
            v.len()
        )));
    }
    match direction {
        ReorderDirection::ToModeMajor => {
            for i in 0..m {
                for t in 0..n {
                    out[i * n + t] = v[t * m + i];
                }
            }
        }
        ReorderDirection::ToTimeMajor => {
            for t in 0..n {
                for i in 0..m {
                    out[t * m + i] = v[i * n + t];
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn norm2_c(v: &[Complex64]) -> f64 {
        v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    fn norm2(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Dense DST-I matrix, the second route of the two-route contract.
    pub(crate) fn dense_dst1(m: usize) -> Vec<Vec<f64>> {
        let s = (2.0 / (m + 1) as f64).sqrt();
        (1..=m)
            .map(|p| {
                (1..=m)
                    .map(|q| s * ((p * q) as f64 * std::f64::consts::PI / (m + 1) as f64).sin())
                    .collect()
            })
            .collect()
    }

    #[test]
    fn dft_identity_length_one() {
        let plan = DftPlan::new(1).unwrap();
        let out = plan.forward(&[Complex64::new(5.0, 0.0)]).unwrap();
        assert_relative_eq!(out[0].re, 5.0, max_relative = 1e-15);
        assert_eq!(out[0].im, 0.0);
    }

    #[test]
    fn dft_forward_of_constant_vector() {
        let plan = DftPlan::new(2).unwrap();
        let out = plan
            .forward(&[Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)])
            .unwrap();
        assert_relative_eq!(out[0].re, 2f64.sqrt(), max_relative = 1e-14);
        assert!(out[1].norm() < 1e-14);
    }

    #[test]
    fn dft_forward_matches_direct_summation() {
        // Fixed pseudo-random input, checked against the O(N^2) defining sum.
        let n = 4;
        let plan = DftPlan::new(n).unwrap();
        let v: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64 * 0.7).sin(), (j as f64 * 1.3).cos()))
            .collect();
        let out = plan.forward(&v).unwrap();
        for k in 0..n {
            let mut acc = Complex64::ZERO;
            for (j, x) in v.iter().enumerate() {
                let ang = -2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                acc += x * Complex64::new(ang.cos(), ang.sin());
            }
            acc /= (n as f64).sqrt();
            assert!((out[k] - acc).norm() <= 1e-13 * norm2_c(&v));
        }
    }

    #[test]
    fn dft_inverse_matches_dense_inverse() {
        // N = 3: inverse = multiplication by the unitary DFT matrix itself.
        let n = 3;
        let plan = DftPlan::new(n).unwrap();
        let v: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new(j as f64 + 0.5, -(j as f64)))
            .collect();
        let out = plan.inverse(&v).unwrap();
        for k in 0..n {
            let mut acc = Complex64::ZERO;
            for (j, x) in v.iter().enumerate() {
                let ang = 2.0 * std::f64::consts::PI * (k * j) as f64 / n as f64;
                acc += x * Complex64::new(ang.cos(), ang.sin());
            }
            acc /= (n as f64).sqrt();
            assert!((out[k] - acc).norm() <= 1e-13 * norm2_c(&v));
        }
    }

    #[test]
    fn dft_round_trip() {
        let n = 16;
        let plan = DftPlan::new(n).unwrap();
        let v: Vec<Complex64> = (0..n)
            .map(|j| Complex64::new((j as f64).sin(), (3.0 + j as f64).cos()))
            .collect();
        let back = plan.inverse(&plan.forward(&v).unwrap()).unwrap();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).norm() <= 1e-13 * norm2_c(&v));
        }
    }

    #[test]
    fn dft_length_mismatch_rejected() {
        let plan = DftPlan::new(4).unwrap();
        assert!(matches!(
            plan.forward(&[Complex64::ZERO; 3]),
            Err(Error::LengthMismatch { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn dst1_single_point_is_identity() {
        let plan = Dst1Plan::new(1, 1).unwrap();
        let out = plan.apply(&[2.5]).unwrap();
        assert_relative_eq!(out[0], 2.5, max_relative = 1e-14);
    }

    #[test]
    fn dst1_matches_dense_matrix() {
        let m = 3;
        let plan = Dst1Plan::new(m, 1).unwrap();
        let u = dense_dst1(m);
        let v = [0.3, -1.1, 2.4];
        let out = plan.apply(&v).unwrap();
        for p in 0..m {
            let direct: f64 = (0..m).map(|q| u[p][q] * v[q]).sum();
            assert!((out[p] - direct).abs() <= 1e-12, "row {p}: {} vs {direct}", out[p]);
        }
    }

    #[test]
    fn dst1_is_involution() {
        let m = 7;
        let plan = Dst1Plan::new(m, 1).unwrap();
        let v: Vec<f64> = (0..m).map(|j| (j as f64 * 0.9).sin()).collect();
        let twice = plan.apply(&plan.apply(&v).unwrap()).unwrap();
        for (a, b) in twice.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-13 * norm2(&v));
        }
    }

    #[test]
    fn dst1_2d_norm_preserved() {
        let m = 5;
        let plan = Dst1Plan::new(m, 2).unwrap();
        let v: Vec<f64> = (0..m * m).map(|j| (j as f64 * 0.37).cos()).collect();
        let out = plan.apply(&v).unwrap();
        assert_relative_eq!(norm2(&out), norm2(&v), max_relative = 1e-13);
    }

    #[test]
    fn alpha_scaling_entries() {
        let s = AlphaScaling::new(0.25, 4).unwrap();
        assert_eq!(s.weights()[0], 1.0);
        for j in 0..4 {
            let expect = 0.25f64.powf(j as f64 / 4.0);
            assert_relative_eq!(s.weights()[j], expect, max_relative = 1e-14);
            assert_relative_eq!(s.weights()[j] * s.inv_weights()[j], 1.0, max_relative = 1e-14);
        }
        let w = s.weights();
        assert!(w.windows(2).all(|p| p[1] <= p[0]), "weights nonincreasing");
        assert!(w.iter().all(|&x| x > 0.0 && x <= 1.0));
    }

    #[test]
    fn alpha_scaling_rejects_out_of_range() {
        assert!(AlphaScaling::new(0.0, 4).is_err());
        assert!(AlphaScaling::new(1.5, 4).is_err());
        assert!(AlphaScaling::new(-0.1, 4).is_err());
        assert!(AlphaScaling::new(1.0, 4).is_ok());
    }

    #[test]
    fn kron_reorder_small_example() {
        // M = 2, N = 3, time-major (a1,a2,b1,b2,c1,c2) -> (a1,b1,c1,a2,b2,c2).
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = kron_reorder(&v, 2, 3, ReorderDirection::ToModeMajor).unwrap();
        assert_eq!(out, vec![1.0, 3.0, 5.0, 2.0, 4.0, 6.0]);
        let back = kron_reorder(&out, 2, 3, ReorderDirection::ToTimeMajor).unwrap();
        assert_eq!(back, v.to_vec());
    }

    #[test]
    fn kron_reorder_degenerate_dims_identity() {
        let v = [1.0, 2.0, 3.0];
        let out = kron_reorder(&v, 1, 3, ReorderDirection::ToModeMajor).unwrap();
        assert_eq!(out, v.to_vec());
        let out = kron_reorder(&v, 3, 1, ReorderDirection::ToModeMajor).unwrap();
        assert_eq!(out, v.to_vec());
    }

    #[test]
    fn kron_reorder_rejects_bad_length() {
        let v = [1.0; 5];
        assert!(kron_reorder(&v, 2, 3, ReorderDirection::ToModeMajor).is_err());
    }
}
