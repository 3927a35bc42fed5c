//! Canonical spectral representation of a BLTT operator.
//!
//! All blocks `A_(k)` are real symmetric and simultaneously diagonalized by
//! the orthonormal DST-I basis `U`, so the operator is fully described by the
//! `M x N` table of block eigenvalues `lambda_i^(k)` together with the
//! transform itself. The table is the canonical form; dense blocks are only
//! an ingestion/diagnostic format.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::transforms::{Dst1Plan, Dst1Scratch};

/// Relative Frobenius tolerance for the simultaneous-diagonalizability check.
pub const DIAG_RESIDUE_TOL: f64 = 1e-10;

/// BLTT operator in spectral form.
///
/// Entry `(i, k)` of the table is `lambda_i^(k)`, the eigenvalue of the block
/// `A_(k)` on the `i`-th spatial mode; rows are stored mode-major so each
/// mode's temporal symbol `(lambda_i^(0), ..., lambda_i^(N-1))` is contiguous.
#[derive(Debug, Clone)]
pub struct SpectralBlttOperator {
    block_eigs: Vec<f64>,
    spatial: Dst1Plan,
    num_modes: usize,
    num_steps: usize,
    scale_note: Option<String>,
}

/// Outcome of the diagonal-dominance admissibility check.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    /// `c0 = min_i (lambda_i^(0) - sum_{k>=1} |lambda_i^(k)|)`.
    pub c0: f64,
    /// Mode index attaining the minimum.
    pub min_index: usize,
    /// `true` iff `c0 > 0`.
    pub admissible: bool,
}

impl SpectralBlttOperator {
    /// Builds the operator from a mode-major eigenvalue table.
    pub fn from_eigs(
        block_eigs: Vec<f64>,
        spatial: Dst1Plan,
        num_steps: usize,
        scale_note: Option<String>,
    ) -> Result<Self> {
        let m = spatial.len();
        if num_steps == 0 {
            return Err(Error::InvalidArgument("N must be positive".into()));
        }
        if block_eigs.len() != m * num_steps {
            return Err(Error::LengthMismatch {
                expected: m * num_steps,
                got: block_eigs.len(),
            });
        }
        if let Some(bad) = block_eigs.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite block eigenvalue {bad}"
            )));
        }
        Ok(Self {
            block_eigs,
            spatial,
            num_modes: m,
            num_steps,
            scale_note,
        })
    }

    /// Extracts the table from a sequence of dense symmetric blocks, checking
    /// that every block is diagonalized by the given transform.
    pub fn from_block_sequence(blocks: &[DMatrix<f64>], spatial: Dst1Plan) -> Result<Self> {
        let m = spatial.len();
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("empty block sequence".into()));
        }
        let n = blocks.len();
        let mut table = vec![0.0; m * n];
        let mut ws = Dst1Scratch::default();
        for (k, a) in blocks.iter().enumerate() {
            if a.nrows() != m || a.ncols() != m {
                return Err(Error::LengthMismatch {
                    expected: m,
                    got: a.nrows(),
                });
            }
            let fro = a.norm();
            let sym_defect = (a - a.transpose()).norm();
            if sym_defect > 1e-12 * fro.max(1.0) {
                return Err(Error::NonSymmetricBlock {
                    index: k,
                    defect: sym_defect,
                });
            }
            // W = U A U with U symmetric: transform columns, then rows.
            let mut w = a.clone();
            let mut line = vec![0.0; m];
            for c in 0..m {
                for r in 0..m {
                    line[r] = w[(r, c)];
                }
                spatial.apply_in_place(&mut line, &mut ws)?;
                for r in 0..m {
                    w[(r, c)] = line[r];
                }
            }
            for r in 0..m {
                for c in 0..m {
                    line[c] = w[(r, c)];
                }
                spatial.apply_in_place(&mut line, &mut ws)?;
                for c in 0..m {
                    w[(r, c)] = line[c];
                }
            }
            let total = w.norm();
            let mut off = 0.0;
            for r in 0..m {
                for c in 0..m {
                    if r != c {
                        off += w[(r, c)] * w[(r, c)];
                    }
                }
            }
            let residue = off.sqrt() / total.max(f64::MIN_POSITIVE);
            if residue > DIAG_RESIDUE_TOL {
                return Err(Error::NotSimultaneouslyDiagonalizable {
                    residue,
                    tol: DIAG_RESIDUE_TOL,
                });
            }
            for i in 0..m {
                table[i * n + k] = w[(i, i)];
            }
        }
        Self::from_eigs(table, spatial, n, None)
    }

    /// Spatial degree-of-freedom count `M = m^d`.
    pub fn num_modes(&self) -> usize {
        self.num_modes
    }

    /// Number of time steps `N`.
    pub fn num_steps(&self) -> usize {
        self.num_steps
    }

    /// Total system order `M * N`.
    pub fn order(&self) -> usize {
        self.num_modes * self.num_steps
    }

    pub fn spatial_transform(&self) -> &Dst1Plan {
        &self.spatial
    }

    pub fn scale_note(&self) -> Option<&str> {
        self.scale_note.as_deref()
    }

    /// Temporal symbol `(lambda_i^(0), ..., lambda_i^(N-1))` of mode `i`.
    pub fn symbol(&self, i: usize) -> &[f64] {
        &self.block_eigs[i * self.num_steps..(i + 1) * self.num_steps]
    }

    pub fn eig(&self, i: usize, k: usize) -> f64 {
        self.block_eigs[i * self.num_steps + k]
    }

    pub fn table(&self) -> &[f64] {
        &self.block_eigs
    }

    /// Exact diagonal-dominance margin over the stored table.
    pub fn check_admissible(&self) -> AdmissibilityReport {
        let mut c0 = f64::INFINITY;
        let mut min_index = 0;
        for i in 0..self.num_modes {
            let sym = self.symbol(i);
            let margin = sym[0] - sym[1..].iter().map(|x| x.abs()).sum::<f64>();
            if margin < c0 {
                c0 = margin;
                min_index = i;
            }
        }
        AdmissibilityReport {
            c0,
            min_index,
            admissible: c0 > 0.0,
        }
    }

    /// Columnar CSV dump (`mode,step,lambda` rows) for oracle cross-checking.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "m,{},d,{},n,{}",
            self.spatial.points_per_dim(),
            self.spatial.dims(),
            self.num_steps
        )?;
        writeln!(w, "mode,step,lambda")?;
        for i in 0..self.num_modes {
            for k in 0..self.num_steps {
                writeln!(w, "{},{},{:?}", i, k, self.eig(i, k))?;
            }
        }
        Ok(())
    }

    /// Reads a dump produced by [`write_csv`](Self::write_csv).
    pub fn read_csv<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty operator dump".into()))??;
        let fields: Vec<&str> = header.split(',').collect();
        if fields.len() != 6 || fields[0] != "m" || fields[2] != "d" || fields[4] != "n" {
            return Err(Error::Parse(format!("bad dump header: {header}")));
        }
        let parse = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad integer {s}")))
        };
        let m = parse(fields[1])?;
        let d = parse(fields[3])?;
        let n = parse(fields[5])?;
        let spatial = Dst1Plan::new(m, d)?;
        let num_modes = spatial.len();
        let mut table = vec![f64::NAN; num_modes * n];
        for line in lines {
            let line = line?;
            if line == "mode,step,lambda" || line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(Error::Parse(format!("bad dump row: {line}")));
            }
            let i = parse(cols[0])?;
            let k = parse(cols[1])?;
            let lam: f64 = cols[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad float {}", cols[2])))?;
            if i >= num_modes || k >= n {
                return Err(Error::Parse(format!("index out of range in row: {line}")));
            }
            table[i * n + k] = lam;
        }
        Self::from_eigs(table, spatial, n, None)
    }
}
