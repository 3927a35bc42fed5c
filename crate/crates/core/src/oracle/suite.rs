//! Randomized property suite over the whole stack, runnable from tests and
//! from the CLI. Every property has a stable name and reports a one-line
//! detail so failures identify themselves.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::abac::{build_alpha_spectrum, sqrt_spectrum};
use crate::minres::{self, MinresConfig};
use crate::operator::BlttMatvec;
use crate::oracle;
use crate::spectral::SpectralBlttOperator;
use crate::transforms::{kron_reorder, DftPlan, Dst1Plan, ReorderDirection};

/// Result of one named property check.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl PropertyReport {
    fn pass(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: true,
            detail,
        }
    }

    fn fail(name: &'static str, detail: String) -> Self {
        Self {
            name,
            passed: false,
            detail,
        }
    }

    fn check(name: &'static str, ok: bool, detail: String) -> Self {
        if ok {
            Self::pass(name, detail)
        } else {
            Self::fail(name, detail)
        }
    }
}

/// Suite configuration: RNG seed and the `(m, dims, N)` sizes to exercise.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub seed: u64,
    pub sizes: Vec<(usize, usize, usize)>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            sizes: vec![(4, 1, 8), (3, 2, 8), (9, 1, 6), (4, 2, 16)],
        }
    }
}

/// Deliberate fault injections used to demonstrate that the checks can fail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InjectedFault {
    None,
    /// Multiplies the forward DFT output inside the unitarity check,
    /// simulating a mis-normalized transform.
    DftScale(f64),
}

/// Diagonally dominant random operator with tails in `[-1, 1]` and heads
/// exceeding the tail sum by a random positive margin.
pub fn random_admissible_operator(
    rng: &mut ChaCha8Rng,
    m: usize,
    dims: usize,
    n: usize,
) -> SpectralBlttOperator {
    let plan = Dst1Plan::new(m, dims).expect("valid plan");
    let modes = plan.len();
    let mut table = vec![0.0; modes * n];
    for i in 0..modes {
        let mut tail = 0.0;
        for k in 1..n {
            let x: f64 = rng.random_range(-1.0..1.0);
            table[i * n + k] = x;
            tail += x.abs();
        }
        table[i * n] = tail + rng.random_range(0.5..2.0);
    }
    SpectralBlttOperator::from_eigs(table, plan, n, None).expect("finite table")
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn prop_dft_unitarity(rng: &mut ChaCha8Rng, fault: InjectedFault) -> PropertyReport {
    let name = "dft-unitarity";
    let mut worst: f64 = 0.0;
    for &n in &[1usize, 2, 5, 8, 16, 27] {
        let plan = DftPlan::new(n).unwrap();
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let mut out = plan.forward(&v).unwrap();
        if let InjectedFault::DftScale(s) = fault {
            for x in out.iter_mut() {
                *x *= s;
            }
        }
        let nv = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let no = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max((no - nv).abs() / nv.max(f64::MIN_POSITIVE));
    }
    PropertyReport::check(
        name,
        worst <= 1e-13,
        format!("max norm defect {worst:.3e} (tol 1e-13)"),
    )
}

fn prop_dft_real_symmetry(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "dft-real-symmetry";
    // Conjugate-even spectra must invert to real vectors.
    let mut worst: f64 = 0.0;
    for &n in &[4usize, 7, 8] {
        let plan = DftPlan::new(n).unwrap();
        let mut spec = vec![Complex64::ZERO; n];
        spec[0] = Complex64::new(rng.random_range(-1.0..1.0), 0.0);
        for j in 1..n {
            if j <= n - j {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                spec[j] = z;
                spec[n - j] = z.conj();
            }
        }
        if n % 2 == 0 {
            spec[n / 2] = Complex64::new(spec[n / 2].re, 0.0);
        }
        let out = plan.inverse(&spec).unwrap();
        let scale = out.iter().map(|z| z.norm()).fold(f64::MIN_POSITIVE, f64::max);
        let imag = out.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        worst = worst.max(imag / scale);
    }
    PropertyReport::check(
        name,
        worst <= 1e-12,
        format!("max imaginary residue {worst:.3e} (tol 1e-12)"),
    )
}

fn prop_dst1_orthogonality(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "dst1-orthogonality";
    let mut worst: f64 = 0.0;
    for &(m, d) in &[(1usize, 1usize), (5, 1), (3, 2), (6, 2)] {
        let plan = Dst1Plan::new(m, d).unwrap();
        let v = random_vec(rng, plan.len());
        let out = plan.apply(&v).unwrap();
        worst = worst.max((norm2(&out) - norm2(&v)).abs() / norm2(&v));
        let back = plan.apply(&out).unwrap();
        let diff: f64 = back
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / norm2(&v));
    }
    PropertyReport::check(
        name,
        worst <= 1e-13,
        format!("max norm/involution defect {worst:.3e} (tol 1e-13)"),
    )
}

fn prop_dst1_dense_agreement(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "dst1-dense-agreement";
    let mut worst: f64 = 0.0;
    for &(m, d) in &[(4usize, 1usize), (3, 2)] {
        let plan = Dst1Plan::new(m, d).unwrap();
        let u = oracle::dense_spatial_basis(&plan);
        let v = random_vec(rng, plan.len());
        let fast = plan.apply(&v).unwrap();
        let direct = &u * nalgebra::DVector::from_column_slice(&v);
        let diff: f64 = fast
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / norm2(&v));
    }
    PropertyReport::check(
        name,
        worst <= 1e-12,
        format!("fast vs dense defect {worst:.3e} (tol 1e-12)"),
    )
}

fn prop_dst1_diagonalizes_laplacian() -> PropertyReport {
    let name = "dst1-laplacian-diagonalization";
    let m = 3;
    let plan = Dst1Plan::new(m, 2).unwrap();
    let st = crate::operator::FivePointStencil::constant(m, 2, (0.0, 1.0), 1.0).unwrap();
    let lap = st.to_dense();
    let u = oracle::dense_spatial_basis(&plan);
    let w = u.transpose() * &lap * &u;
    let mut off: f64 = 0.0;
    for r in 0..m * m {
        for c in 0..m * m {
            if r != c {
                off = off.max(w[(r, c)].abs());
            }
        }
    }
    let scale = lap.norm();
    PropertyReport::check(
        name,
        off / scale <= 1e-12,
        format!("off-diagonal residue {:.3e} (tol 1e-12)", off / scale),
    )
}

fn prop_kron_reorder_permutation(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "kron-reorder-permutation";
    let (m, n) = (4usize, 8usize);
    let v = random_vec(rng, m * n);
    let fwd = kron_reorder(&v, m, n, ReorderDirection::ToModeMajor).unwrap();
    let back = kron_reorder(&fwd, m, n, ReorderDirection::ToTimeMajor).unwrap();
    let mut sorted_in: Vec<u64> = v.iter().map(|x| x.to_bits()).collect();
    let mut sorted_out: Vec<u64> = fwd.iter().map(|x| x.to_bits()).collect();
    sorted_in.sort_unstable();
    sorted_out.sort_unstable();
    let ok = back == v && sorted_in == sorted_out;
    PropertyReport::check(name, ok, "round trip and multiset preserved exactly".into())
}

fn prop_spectrum_conjugate_symmetry(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "spectrum-conjugate-symmetry";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &[(3usize, 1usize, 8usize), (2, 2, 7)] {
        let op = random_admissible_operator(rng, m, d, n);
        for alpha in [1.0, 1e-2, 1e-8] {
            let spec = build_alpha_spectrum(&op, alpha).unwrap();
            worst = worst.max(spec.conjugate_symmetry_residue());
        }
    }
    PropertyReport::check(
        name,
        worst <= 1e-12,
        format!("max pairing residue {worst:.3e} (tol 1e-12)"),
    )
}

fn prop_sqrt_principal_branch(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "sqrt-principal-branch";
    let op = random_admissible_operator(rng, 4, 1, 9);
    let prec = sqrt_spectrum(build_alpha_spectrum(&op, 1e-3).unwrap()).unwrap();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for i in 0..4 {
        for k in 0..9 {
            let s = prec.sqrt_eig(i, k);
            let z = prec.spectrum().eig(i, k);
            ok &= s.re > 0.0;
            worst = worst.max((s.norm_sqr() - z.norm()).abs() / z.norm());
        }
    }
    PropertyReport::check(
        name,
        ok && worst <= 1e-13,
        format!("positive real parts: {ok}; |sqrt|^2 defect {worst:.3e}"),
    )
}

fn prop_qalpha_orthogonal(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "qalpha-orthogonal";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        let bundle = oracle::build_bundle(&op, 1e-2).unwrap();
        for l in oracle::q_alpha_spectrum(&bundle, op.num_modes(), op.num_steps()) {
            worst = worst.max((l.abs() - 1.0).abs());
        }
    }
    PropertyReport::check(
        name,
        worst <= 1e-10,
        format!("max |(|eig| - 1)| = {worst:.3e} (tol 1e-10)"),
    )
}

fn prop_csqrt_real(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "csqrt-real";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        let dc = oracle::dense_alpha_circulant(&op, 1e-3).unwrap();
        worst = worst.max(dc.sqrt_imag_residue);
    }
    PropertyReport::check(
        name,
        worst <= 1e-11,
        format!("max imaginary residue {worst:.3e} (tol 1e-11)"),
    )
}

fn prop_y_csqrt_symmetric(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "y-csqrt-symmetric";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        let dc = oracle::dense_alpha_circulant(&op, 1e-3).unwrap();
        let y = oracle::dense_time_reversal(op.num_modes(), op.num_steps());
        let ys = &y * &dc.sqrt;
        worst = worst.max((&ys - ys.transpose()).norm() / ys.norm());
    }
    PropertyReport::check(
        name,
        worst <= 1e-11,
        format!("max symmetry residue {worst:.3e} (tol 1e-11)"),
    )
}

fn prop_spectrum_inclusion(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "spectrum-inclusion";
    let mut detail = String::new();
    let mut ok = true;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        // mu and nu do not depend on alpha; compute them once.
        let bounds = oracle::theory_bounds(&op, 1e-2, 0.5).unwrap();
        for alpha_try in [1e-2f64, 1e-4, 1e-8] {
            let alpha = alpha_try.min(bounds.nu);
            let bundle = oracle::build_bundle(&op, alpha).unwrap();
            let radius = alpha * bounds.mu + 1e-12;
            for &l in oracle::preconditioned_spectrum(&bundle) {
                let inside = (l - 1.0).abs() <= radius || (l + 1.0).abs() <= radius;
                if !inside {
                    ok = false;
                    detail = format!(
                        "eigenvalue {l} outside [+-1 +- {radius:.3e}] at m={m} d={d} n={n} alpha={alpha:.1e}"
                    );
                }
            }
        }
    }
    if ok {
        detail = "all eigenvalues within [+-1 +- alpha*mu]".into();
    }
    PropertyReport::check(name, ok, detail)
}

fn prop_e_norm_bound(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "e-norm-bound";
    let mut ok = true;
    let mut detail = String::new();
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        for alpha in [1e-2, 1e-4, 1e-8] {
            let bounds = oracle::theory_bounds(&op, alpha, 0.5).unwrap();
            if bounds.e_norm > alpha * bounds.mu + 1e-8 {
                ok = false;
                detail = format!(
                    "||E|| = {:.3e} exceeds alpha*mu = {:.3e} at m={m} d={d} n={n}",
                    bounds.e_norm,
                    alpha * bounds.mu
                );
            }
        }
    }
    if ok {
        detail = "||E_alpha|| <= alpha * mu + 1e-8 throughout".into();
    }
    PropertyReport::check(name, ok, detail)
}

fn prop_matvec_dense_equivalence(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "matvec-dense-equivalence";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        let dense = oracle::assemble_dense(&op).unwrap();
        let mv = BlttMatvec::new(&op);
        let v = random_vec(rng, op.order());
        let fast = mv.apply(&v).unwrap();
        let direct = &dense * nalgebra::DVector::from_column_slice(&v);
        let scale = direct.norm().max(f64::MIN_POSITIVE);
        let diff: f64 = fast
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / scale);
    }
    PropertyReport::check(
        name,
        worst <= 1e-9,
        format!("max relative defect {worst:.3e} (tol 1e-9)"),
    )
}

fn prop_half_solve_dense_equivalence(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "half-solve-dense-equivalence";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        let alpha = 0.5;
        let prec = sqrt_spectrum(build_alpha_spectrum(&op, alpha).unwrap()).unwrap();
        let dc = oracle::dense_alpha_circulant(&op, alpha).unwrap();
        let y = random_vec(rng, op.order());
        let fast = prec.apply_half_inverse_adjoint(&y).unwrap();
        // Dense route: solve (C^{1/2})^T x = y.
        let lu = dc.sqrt.transpose().lu();
        let direct = lu
            .solve(&nalgebra::DVector::from_column_slice(&y))
            .expect("nonsingular square root");
        let scale = direct.norm().max(f64::MIN_POSITIVE);
        let diff: f64 = fast
            .iter()
            .zip(direct.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / scale);
    }
    PropertyReport::check(
        name,
        worst <= 1e-9,
        format!("max relative defect {worst:.3e} (tol 1e-9)"),
    )
}

fn prop_precond_dense_equivalence(rng: &mut ChaCha8Rng, cfg: &SuiteConfig) -> PropertyReport {
    let name = "precond-dense-equivalence";
    let mut worst: f64 = 0.0;
    for &(m, d, n) in &cfg.sizes {
        let op = random_admissible_operator(rng, m, d, n);
        for alpha in [1.0, 1e-2] {
            let prec = sqrt_spectrum(build_alpha_spectrum(&op, alpha).unwrap()).unwrap();
            let dc = oracle::dense_alpha_circulant(&op, alpha).unwrap();
            let y = random_vec(rng, op.order());
            let fast = prec.apply_inverse(&y).unwrap();
            let lu = dc.p.clone().lu();
            let direct = lu
                .solve(&nalgebra::DVector::from_column_slice(&y))
                .expect("SPD preconditioner");
            let scale = direct.norm().max(f64::MIN_POSITIVE);
            let diff: f64 = fast
                .iter()
                .zip(direct.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            worst = worst.max(diff / scale);
        }
    }
    PropertyReport::check(
        name,
        worst <= 1e-9,
        format!("max relative defect {worst:.3e} (tol 1e-9)"),
    )
}

fn prop_precond_spd_probe(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "precond-spd-probe";
    let op = random_admissible_operator(rng, 3, 2, 8);
    let prec = sqrt_spectrum(build_alpha_spectrum(&op, 1e-2).unwrap()).unwrap();
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for _ in 0..4 {
        let u = random_vec(rng, op.order());
        let v = random_vec(rng, op.order());
        let pu = prec.apply_inverse(&u).unwrap();
        let pv = prec.apply_inverse(&v).unwrap();
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        ok &= dot(&pu, &u) > 0.0;
        let (l, r) = (dot(&pu, &v), dot(&u, &pv));
        worst = worst.max((l - r).abs() / l.abs().max(r.abs()).max(1.0));
    }
    PropertyReport::check(
        name,
        ok && worst <= 1e-11,
        format!("positivity {ok}; symmetry defect {worst:.3e} (tol 1e-11)"),
    )
}

fn prop_minres_cluster_termination(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "minres-cluster-termination";
    // Spectrum with exactly q distinct values of radius-0 clusters
    // terminates in <= q iterations.
    let clusters = [3.0, -2.0, 7.5, -0.5];
    let q = clusters.len();
    let n = 16;
    let diag: Vec<f64> = (0..n).map(|j| clusters[j % q]).collect();
    let a = move |v: &[f64]| -> Vec<f64> { v.iter().zip(&diag).map(|(x, d)| x * d).collect() };
    let b = random_vec(rng, n);
    let cfg = MinresConfig {
        tol: 1e-10,
        max_iter: 50,
        ..Default::default()
    };
    let (_, report) = minres::solve(&a, None, &b, &cfg).unwrap();
    PropertyReport::check(
        name,
        report.converged && report.iterations <= q,
        format!(
            "{} clusters, {} iterations (converged: {})",
            q, report.iterations, report.converged
        ),
    )
}

fn prop_clustering_monotone(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "clustering-monotone";
    let op = random_admissible_operator(rng, 4, 1, 8);
    let mut dists = Vec::new();
    for alpha in [1e-1, 1e-2, 1e-3] {
        let bundle = oracle::build_bundle(&op, alpha).unwrap();
        let d = oracle::preconditioned_spectrum(&bundle)
            .iter()
            .map(|&l| (l - 1.0).abs().min((l + 1.0).abs()))
            .fold(0.0f64, f64::max);
        dists.push(d);
    }
    let mut ok = true;
    for w in dists.windows(2) {
        let ratio = w[0] / w[1].max(f64::MIN_POSITIVE);
        ok &= (10.0 / 3.0..=30.0).contains(&ratio);
    }
    let shown: Vec<String> = dists.iter().map(|d| format!("{d:.3e}")).collect();
    PropertyReport::check(
        name,
        ok,
        format!("max distances to +-1 across alpha decades: [{}]", shown.join(", ")),
    )
}

fn prop_h_alpha_bound(rng: &mut ChaCha8Rng) -> PropertyReport {
    let name = "h-alpha-norm-bound";
    let op = random_admissible_operator(rng, 5, 1, 9);
    let c0 = op.check_admissible().c0;
    let alpha = 1e-2;
    let mut ok = true;
    let mut worst = f64::NEG_INFINITY;
    for i in 0..op.num_modes() {
        let h = oracle::dense_h_alpha(op.symbol(i), alpha);
        let norm = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .map(|x| x.abs())
            .fold(0.0, f64::max);
        let bound = alpha * (op.symbol(i)[0] - c0);
        ok &= norm <= bound + 1e-12;
        worst = worst.max(norm - bound);
    }
    PropertyReport::check(
        name,
        ok,
        format!("max (||H|| - bound) = {worst:.3e} (must be <= 0)"),
    )
}

/// Runs every property with the given configuration.
pub fn run_property_suite(cfg: &SuiteConfig) -> Vec<PropertyReport> {
    run_property_suite_faulted(cfg, InjectedFault::None)
}

/// Suite entry point with optional fault injection; the fault exists so the
/// harness itself can be tested.
pub fn run_property_suite_faulted(cfg: &SuiteConfig, fault: InjectedFault) -> Vec<PropertyReport> {
    let sub = |salt: u64| ChaCha8Rng::seed_from_u64(cfg.seed ^ salt);
    let reports = vec![
        prop_dft_unitarity(&mut sub(0x01), fault),
        prop_dft_real_symmetry(&mut sub(0x02)),
        prop_dst1_orthogonality(&mut sub(0x03)),
        prop_dst1_dense_agreement(&mut sub(0x04)),
        prop_dst1_diagonalizes_laplacian(),
        prop_kron_reorder_permutation(&mut sub(0x05)),
        prop_spectrum_conjugate_symmetry(&mut sub(0x06)),
        prop_sqrt_principal_branch(&mut sub(0x07)),
        prop_qalpha_orthogonal(&mut sub(0x08), cfg),
        prop_csqrt_real(&mut sub(0x09), cfg),
        prop_y_csqrt_symmetric(&mut sub(0x0A), cfg),
        prop_spectrum_inclusion(&mut sub(0x0B), cfg),
        prop_e_norm_bound(&mut sub(0x0C), cfg),
        prop_matvec_dense_equivalence(&mut sub(0x0D), cfg),
        prop_half_solve_dense_equivalence(&mut sub(0x0E), cfg),
        prop_precond_dense_equivalence(&mut sub(0x0F), cfg),
        prop_precond_spd_probe(&mut sub(0x10)),
        prop_minres_cluster_termination(&mut sub(0x11)),
        prop_clustering_monotone(&mut sub(0x12)),
        prop_h_alpha_bound(&mut sub(0x13)),
    ];
    reports
}

/// Dense matrix helper for callers that need a quick look at a small
/// operator while interpreting suite failures.
pub fn dense_of(op: &SpectralBlttOperator) -> crate::error::Result<DMatrix<f64>> {
    oracle::assemble_dense(op)
}
