//! Clustering theory against observed solver behavior at oracle scale.

use bltt_core::driver::{solve_problem, PreconditionerChoice};
use bltt_core::minres::MinresConfig;
use bltt_core::operator::FivePointStencil;
use bltt_core::oracle::{self, IterationBound};
use bltt_core::problems::{build, Coefficient, Family, ProblemSpec};

fn small_bdf() -> ProblemSpec {
    ProblemSpec {
        family: Family::HeatBdf,
        m: 3,
        num_steps: 8,
        t_final: 1.0,
        domain: (0.0, 1.0),
        gamma: None,
        coefficient: Coefficient::Constant(1.0),
        dims: 2,
    }
}

#[test]
fn observed_iterations_within_predicted_bound() {
    let spec = small_bdf();
    let p = build(&spec).unwrap();
    let alpha = 1e-8;
    let bounds = oracle::theory_bounds(&p.operator, alpha, 0.5).unwrap();
    let predicted = match oracle::iteration_bound_check(&bounds, 1e-6) {
        IterationBound::Applicable { predicted, .. } => predicted,
        IterationBound::NotApplicable { alpha, zeta } => {
            panic!("alpha {alpha} should be below zeta {zeta} here")
        }
    };
    let (_, report) = solve_problem(
        &p,
        PreconditionerChoice::Abac { alpha },
        &MinresConfig::default(),
    )
    .unwrap();
    assert!(report.converged);
    assert!(
        report.iterations <= predicted,
        "observed {} should not exceed predicted {predicted}",
        report.iterations
    );
}

#[test]
fn interval_bound_formula_caps_observed_iterations() {
    // With the preconditioned spectrum inside [-1-e, -1+e] U [1-e, 1+e],
    // iterations to tol are at most 2*ceil(log(2/tol)/log(1/d)) with
    // d = sqrt(e(2+e)/((1-e)(2-e))).
    let spec = small_bdf();
    let p = build(&spec).unwrap();
    let alpha = 1e-6;
    let bounds = oracle::theory_bounds(&p.operator, alpha, 0.5).unwrap();
    let bundle = oracle::build_bundle(&p.operator, alpha).unwrap();
    let eps = oracle::preconditioned_spectrum(&bundle)
        .iter()
        .map(|&l| (l - 1.0).abs().min((l + 1.0).abs()))
        .fold(0.0f64, f64::max);
    assert!(eps <= alpha * bounds.mu + 1e-12, "oracle radius covers spectrum");
    let d = (eps * (2.0 + eps) / ((1.0 - eps) * (2.0 - eps))).sqrt();
    let tol = 1e-6f64;
    let cap = 2.0 * ((2.0 / tol).ln() / (1.0 / d).ln()).ceil();
    let (_, report) = solve_problem(
        &p,
        PreconditionerChoice::Abac { alpha },
        &MinresConfig::default(),
    )
    .unwrap();
    assert!(report.converged);
    assert!(
        (report.iterations as f64) <= cap,
        "observed {} exceeds interval bound {cap}",
        report.iterations
    );
}

#[test]
fn generated_operator_matches_block_ingestion_route() {
    // Dense blocks assembled from the scheme definition, re-ingested through
    // the block-sequence constructor, must reproduce the generator's table.
    let spec = small_bdf();
    let p = build(&spec).unwrap();
    let tau = p.tau;
    let st = FivePointStencil::constant(spec.m, spec.dims, spec.domain, 1.0).unwrap();
    let m = p.grid.len();
    let mut a0 = st.to_dense() * (-1.0);
    for i in 0..m {
        a0[(i, i)] += 1.0 / tau;
    }
    let a1 = nalgebra::DMatrix::identity(m, m) * (-1.0 / tau);
    let zero = nalgebra::DMatrix::zeros(m, m);
    let mut blocks = vec![a0, a1];
    while blocks.len() < spec.num_steps {
        blocks.push(zero.clone());
    }
    let ingested = bltt_core::spectral::SpectralBlttOperator::from_block_sequence(
        &blocks,
        p.operator.spatial_transform().clone(),
    )
    .unwrap();
    let mut table_a: Vec<f64> = Vec::new();
    let mut table_b: Vec<f64> = Vec::new();
    for i in 0..m {
        // Mode order may differ between routes only if eigenvalues were
        // permuted; the transform fixes the basis, so entries must match
        // directly.
        for k in 0..spec.num_steps {
            table_a.push(p.operator.eig(i, k));
            table_b.push(ingested.eig(i, k));
        }
    }
    for (a, b) in table_a.iter().zip(&table_b) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{a} vs {b}");
    }
}
