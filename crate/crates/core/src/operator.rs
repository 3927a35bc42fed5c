//! Fast matvecs with the BLTT operator and its time-reversed symmetrization.
//!
//! The canonical path works in the eigenbasis: sine-transform each time
//! block, reorder to mode-major, run one lower-triangular Toeplitz multiply
//! per mode through a length-`2N` circulant embedding, reorder and transform
//! back. An alternative sparse-block path handles operators of the form
//! `Toep(c) (x) I + Toep(d) (x) S` with a sparse spatial stencil `S`, which
//! covers variable-coefficient discretizations whose blocks do not share the
//! sine eigenbasis.
//!
//! All vectors are time-major at API boundaries; mode-major layouts are
//! internal.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::spectral::SpectralBlttOperator;
use crate::transforms::{kron_reorder_into, Dst1Scratch, ReorderDirection};

/// Entry cap below which per-mode symbol FFTs are precomputed and cached.
const SYMBOL_CACHE_CAP: usize = 1 << 22;

/// Time-reversing permutation `Y_N (x) I_M`, applied as an index map.
#[derive(Debug, Clone, Copy)]
pub struct TimeReversal {
    pub num_modes: usize,
    pub num_steps: usize,
}

impl TimeReversal {
    pub fn new(num_modes: usize, num_steps: usize) -> Self {
        Self {
            num_modes,
            num_steps,
        }
    }

    /// Reverses the order of the N time blocks in place.
    pub fn apply_in_place(&self, v: &mut [f64]) -> Result<()> {
        let (m, n) = (self.num_modes, self.num_steps);
        if v.len() != m * n {
            return Err(Error::LengthMismatch {
                expected: m * n,
                got: v.len(),
            });
        }
        for t in 0..n / 2 {
            let (lo, hi) = (t * m, (n - 1 - t) * m);
            for i in 0..m {
                v.swap(lo + i, hi + i);
            }
        }
        Ok(())
    }
}

/// Reverses the N time blocks of a time-major vector.
pub fn time_reverse(v: &[f64], num_modes: usize, num_steps: usize) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    TimeReversal::new(num_modes, num_steps).apply_in_place(&mut out)?;
    Ok(out)
}

/// Lower-triangular Toeplitz multiplication by circulant embedding of
/// length `2N`.
pub(crate) struct ToeplitzConv {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Work buffers for [`ToeplitzConv`].
#[derive(Default)]
pub(crate) struct ConvScratch {
    buf: Vec<Complex64>,
    sym: Vec<Complex64>,
    fft_scratch: Vec<Complex64>,
}

impl ToeplitzConv {
    pub(crate) fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            fwd: planner.plan_fft_forward(2 * n),
            inv: planner.plan_fft_inverse(2 * n),
        }
    }

    /// FFT of the zero-padded first column, reusable across applications.
    pub(crate) fn symbol_fft(&self, symbol: &[f64], ws: &mut ConvScratch) -> Vec<Complex64> {
        debug_assert_eq!(symbol.len(), self.n);
        let mut out = vec![Complex64::ZERO; 2 * self.n];
        for (o, &s) in out.iter_mut().zip(symbol) {
            *o = Complex64::new(s, 0.0);
        }
        ws.fft_scratch
            .resize(self.fwd.get_inplace_scratch_len(), Complex64::ZERO);
        self.fwd.process_with_scratch(&mut out, &mut ws.fft_scratch);
        out
    }

    /// `out = L(symbol) x` where `L` is lower-triangular Toeplitz with the
    /// given (already transformed) first column.
    pub(crate) fn apply_with_symbol_fft(
        &self,
        symbol_fft: &[Complex64],
        x: &[f64],
        out: &mut [f64],
        ws: &mut ConvScratch,
    ) {
        let n2 = 2 * self.n;
        ws.buf.resize(n2, Complex64::ZERO);
        for j in 0..self.n {
            ws.buf[j] = Complex64::new(x[j], 0.0);
            ws.buf[self.n + j] = Complex64::ZERO;
        }
        ws.fft_scratch
            .resize(self.fwd.get_inplace_scratch_len(), Complex64::ZERO);
        self.fwd.process_with_scratch(&mut ws.buf, &mut ws.fft_scratch);
        for (b, s) in ws.buf.iter_mut().zip(symbol_fft) {
            *b *= s;
        }
        ws.fft_scratch
            .resize(self.inv.get_inplace_scratch_len(), Complex64::ZERO);
        self.inv.process_with_scratch(&mut ws.buf, &mut ws.fft_scratch);
        let scale = 1.0 / n2 as f64;
        for j in 0..self.n {
            out[j] = ws.buf[j].re * scale;
        }
    }

    /// Convenience path that transforms the symbol on the fly.
    pub(crate) fn apply(
        &self,
        symbol: &[f64],
        x: &[f64],
        out: &mut [f64],
        ws: &mut ConvScratch,
    ) {
        let n2 = 2 * self.n;
        ws.sym.resize(n2, Complex64::ZERO);
        for j in 0..n2 {
            ws.sym[j] = if j < self.n {
                Complex64::new(symbol[j], 0.0)
            } else {
                Complex64::ZERO
            };
        }
        ws.fft_scratch
            .resize(self.fwd.get_inplace_scratch_len(), Complex64::ZERO);
        let mut sym = std::mem::take(&mut ws.sym);
        self.fwd.process_with_scratch(&mut sym, &mut ws.fft_scratch);
        self.apply_with_symbol_fft(&sym, x, out, ws);
        ws.sym = sym;
    }
}

/// Prepared fast matvec with a spectral BLTT operator.
pub struct BlttMatvec {
    op: SpectralBlttOperator,
    conv: ToeplitzConv,
    cached_symbols: Option<Vec<Complex64>>,
}

impl BlttMatvec {
    pub fn new(op: &SpectralBlttOperator) -> Self {
        let n = op.num_steps();
        let m = op.num_modes();
        let conv = ToeplitzConv::new(n);
        let cached_symbols = if 2 * m * n <= SYMBOL_CACHE_CAP {
            let mut ws = ConvScratch::default();
            let mut all = Vec::with_capacity(2 * m * n);
            for i in 0..m {
                all.extend(conv.symbol_fft(op.symbol(i), &mut ws));
            }
            Some(all)
        } else {
            None
        };
        Self {
            op: op.clone(),
            conv,
            cached_symbols,
        }
    }

    pub fn operator(&self) -> &SpectralBlttOperator {
        &self.op
    }

    /// `A v` for a time-major vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = (self.op.num_modes(), self.op.num_steps());
        if v.len() != m * n {
            return Err(Error::LengthMismatch {
                expected: m * n,
                got: v.len(),
            });
        }
        let plan = self.op.spatial_transform();
        let mut ws_dst = Dst1Scratch::default();
        let mut ws_conv = ConvScratch::default();

        let mut w = v.to_vec();
        for block in w.chunks_exact_mut(m) {
            plan.apply_in_place(block, &mut ws_dst)?;
        }
        let mut z = vec![0.0; m * n];
        kron_reorder_into(&w, &mut z, m, n, ReorderDirection::ToModeMajor)?;
        let mut y = vec![0.0; m * n];
        for i in 0..m {
            let x = &z[i * n..(i + 1) * n];
            let out = &mut y[i * n..(i + 1) * n];
            match &self.cached_symbols {
                Some(all) => self.conv.apply_with_symbol_fft(
                    &all[i * 2 * n..(i + 1) * 2 * n],
                    x,
                    out,
                    &mut ws_conv,
                ),
                None => self.conv.apply(self.op.symbol(i), x, out, &mut ws_conv),
            }
        }
        kron_reorder_into(&y, &mut w, m, n, ReorderDirection::ToTimeMajor)?;
        for block in w.chunks_exact_mut(m) {
            plan.apply_in_place(block, &mut ws_dst)?;
        }
        Ok(w)
    }

    /// `Y A v`: the symmetrized matvec.
    pub fn apply_symmetrized(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply(v)?;
        TimeReversal::new(self.op.num_modes(), self.op.num_steps()).apply_in_place(&mut out)?;
        Ok(out)
    }
}

/// One-shot `A v`; prefer [`BlttMatvec`] when applying the same operator
/// repeatedly.
pub fn bltt_matvec(op: &SpectralBlttOperator, v: &[f64]) -> Result<Vec<f64>> {
    BlttMatvec::new(op).apply(v)
}

/// One-shot `Y A v`.
pub fn symmetrized_matvec(op: &SpectralBlttOperator, v: &[f64]) -> Result<Vec<f64>> {
    BlttMatvec::new(op).apply_symmetrized(v)
}

/// Conservative central-difference discretization of `div(a(x) grad u)` with
/// homogeneous Dirichlet boundary, on `m` interior points per dimension.
///
/// Edge coefficients sample `a` at cell midpoints, which keeps the assembled
/// matrix symmetric negative definite.
#[derive(Debug, Clone)]
pub struct FivePointStencil {
    m: usize,
    dims: usize,
    coef_x: Vec<f64>,
    coef_y: Vec<f64>,
}

impl FivePointStencil {
    pub fn new(
        m: usize,
        dims: usize,
        domain: (f64, f64),
        a: &dyn Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("m must be positive".into()));
        }
        if dims != 1 && dims != 2 {
            return Err(Error::InvalidArgument(format!(
                "unsupported spatial dimension count {dims}"
            )));
        }
        let (lo, hi) = domain;
        if hi <= lo {
            return Err(Error::InvalidArgument("empty spatial domain".into()));
        }
        let h = (hi - lo) / (m + 1) as f64;
        let inv_h2 = 1.0 / (h * h);
        let node = |j: usize| lo + (j + 1) as f64 * h;
        let mid = |e: usize| lo + (e as f64 + 0.5) * h;
        match dims {
            1 => {
                let coef_x: Vec<f64> = (0..=m).map(|e| a(&[mid(e)]) * inv_h2).collect();
                Ok(Self {
                    m,
                    dims,
                    coef_x,
                    coef_y: Vec::new(),
                })
            }
            2 => {
                let mut coef_x = Vec::with_capacity(m * (m + 1));
                for j2 in 0..m {
                    for e1 in 0..=m {
                        coef_x.push(a(&[mid(e1), node(j2)]) * inv_h2);
                    }
                }
                let mut coef_y = Vec::with_capacity((m + 1) * m);
                for e2 in 0..=m {
                    for j1 in 0..m {
                        coef_y.push(a(&[node(j1), mid(e2)]) * inv_h2);
                    }
                }
                Ok(Self {
                    m,
                    dims,
                    coef_x,
                    coef_y,
                })
            }
            _ => unreachable!(),
        }
    }

    /// Stencil for constant `a`, the plain scaled Laplacian.
    pub fn constant(m: usize, dims: usize, domain: (f64, f64), scale: f64) -> Result<Self> {
        Self::new(m, dims, domain, &move |_| scale)
    }

    pub fn len(&self) -> usize {
        self.m.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `out = S v` with zero Dirichlet data outside the grid.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) -> Result<()> {
        let m = self.m;
        if v.len() != self.len() || out.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        match self.dims {
            1 => {
                for j in 0..m {
                    let left = if j > 0 { v[j - 1] } else { 0.0 };
                    let right = if j + 1 < m { v[j + 1] } else { 0.0 };
                    out[j] = self.coef_x[j] * (left - v[j]) + self.coef_x[j + 1] * (right - v[j]);
                }
            }
            2 => {
                for j2 in 0..m {
                    let row = j2 * m;
                    let cx = &self.coef_x[j2 * (m + 1)..(j2 + 1) * (m + 1)];
                    for j1 in 0..m {
                        let c = v[row + j1];
                        let left = if j1 > 0 { v[row + j1 - 1] } else { 0.0 };
                        let right = if j1 + 1 < m { v[row + j1 + 1] } else { 0.0 };
                        let down = if j2 > 0 { v[row - m + j1] } else { 0.0 };
                        let up = if j2 + 1 < m { v[row + m + j1] } else { 0.0 };
                        out[row + j1] = cx[j1] * (left - c)
                            + cx[j1 + 1] * (right - c)
                            + self.coef_y[j2 * m + j1] * (down - c)
                            + self.coef_y[(j2 + 1) * m + j1] * (up - c);
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Dense assembly for the oracle and small-scale tests.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let sz = self.len();
        let mut a = DMatrix::zeros(sz, sz);
        let mut e = vec![0.0; sz];
        let mut col = vec![0.0; sz];
        for j in 0..sz {
            e[j] = 1.0;
            self.apply(&e, &mut col).expect("sized buffers");
            for i in 0..sz {
                a[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        a
    }
}

/// BLTT operator `Toep(c) (x) I_M + Toep(d) (x) S` held in sparse form.
///
/// `c` and `d` are the first columns of lower-triangular Toeplitz temporal
/// couplings; `S` is the spatial stencil. The matvec costs
/// `O(MN log N + N nnz(S))`.
pub struct SparseBlockOperator {
    num_steps: usize,
    time_symbol: Vec<f64>,
    space_symbol: Vec<f64>,
    stencil: FivePointStencil,
    conv: ToeplitzConv,
    time_symbol_fft: Vec<Complex64>,
    time_taps: Vec<(usize, f64)>,
    space_taps: Vec<(usize, f64)>,
}

impl SparseBlockOperator {
    pub fn new(
        time_symbol: Vec<f64>,
        space_symbol: Vec<f64>,
        stencil: FivePointStencil,
    ) -> Result<Self> {
        let n = time_symbol.len();
        if n == 0 || space_symbol.len() != n {
            return Err(Error::InvalidArgument(
                "temporal symbols must be non-empty and of equal length".into(),
            ));
        }
        let conv = ToeplitzConv::new(n);
        let mut ws = ConvScratch::default();
        let time_symbol_fft = conv.symbol_fft(&time_symbol, &mut ws);
        let taps = |s: &[f64]| -> Vec<(usize, f64)> {
            s.iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(k, &x)| (k, x))
                .collect()
        };
        Ok(Self {
            num_steps: n,
            time_taps: taps(&time_symbol),
            space_taps: taps(&space_symbol),
            time_symbol,
            space_symbol,
            stencil,
            conv,
            time_symbol_fft,
        })
    }

    pub fn num_modes(&self) -> usize {
        self.stencil.len()
    }

    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    pub fn order(&self) -> usize {
        self.num_modes() * self.num_steps
    }

    pub fn stencil(&self) -> &FivePointStencil {
        &self.stencil
    }

    /// Dense block `A_(k) = c_k I + d_k S`, for diagnostics.
    pub fn dense_block(&self, k: usize) -> DMatrix<f64> {
        let sz = self.num_modes();
        let mut a = self.stencil.to_dense() * self.space_symbol[k];
        for j in 0..sz {
            a[(j, j)] += self.time_symbol[k];
        }
        a
    }

    /// `A v` for a time-major vector.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = (self.num_modes(), self.num_steps);
        if v.len() != m * n {
            return Err(Error::LengthMismatch {
                expected: m * n,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; m * n];

        // Temporal coupling on the identity part.
        if self.time_taps.len() <= 4 {
            for &(k, c) in &self.time_taps {
                for t in k..n {
                    let src = &v[(t - k) * m..(t - k + 1) * m];
                    let dst = &mut out[t * m..(t + 1) * m];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        } else {
            let mut z = vec![0.0; m * n];
            kron_reorder_into(v, &mut z, m, n, ReorderDirection::ToModeMajor)?;
            let mut y = vec![0.0; m * n];
            let mut ws = ConvScratch::default();
            for i in 0..m {
                let x = &z[i * n..(i + 1) * n];
                let row = &mut y[i * n..(i + 1) * n];
                self.conv
                    .apply_with_symbol_fft(&self.time_symbol_fft, x, row, &mut ws);
            }
            kron_reorder_into(&y, &mut out, m, n, ReorderDirection::ToTimeMajor)?;
        }

        // Temporal coupling on the stencil part (few taps in every family).
        if !self.space_taps.is_empty() {
            let mut sv = vec![0.0; m * n];
            for (dst, src) in sv.chunks_exact_mut(m).zip(v.chunks_exact(m)) {
                self.stencil.apply(src, dst)?;
            }
            for &(k, c) in &self.space_taps {
                for t in k..n {
                    let src = &sv[(t - k) * m..(t - k + 1) * m];
                    let dst = &mut out[t * m..(t + 1) * m];
                    for (d, s) in dst.iter_mut().zip(src) {
                        *d += c * s;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `Y A v`.
    pub fn apply_symmetrized(&self, v: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.apply(v)?;
        TimeReversal::new(self.num_modes(), self.num_steps).apply_in_place(&mut out)?;
        Ok(out)
    }
}
