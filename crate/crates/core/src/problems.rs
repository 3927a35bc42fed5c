//! Discretization generators for the benchmark problems.
//!
//! Each family produces the spectral operator (or, for variable
//! coefficients, the true sparse-block operator plus a mean-coefficient
//! spectral surrogate for preconditioning), the time-major right-hand side,
//! and an exact-solution evaluator where the underlying example has one.
//!
//! Grid convention: interior nodes only, `h = (hi - lo)/(m + 1)`,
//! lexicographic ordering with the first coordinate fastest; `tau = T/N`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::operator::{FivePointStencil, SparseBlockOperator};
use crate::spectral::SpectralBlttOperator;
use crate::transforms::Dst1Plan;

/// Discretization family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    HeatBdf,
    HeatCn,
    HeatVarCn,
    FracL1,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::HeatBdf => "heat-bdf",
            Family::HeatCn => "heat-cn",
            Family::HeatVarCn => "heat-var-cn",
            Family::FracL1 => "frac-l1",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "heat-bdf" => Ok(Family::HeatBdf),
            "heat-cn" => Ok(Family::HeatCn),
            "heat-var-cn" => Ok(Family::HeatVarCn),
            "frac-l1" => Ok(Family::FracL1),
            other => Err(Error::Parse(format!("unknown family '{other}'"))),
        }
    }
}

/// Diffusion coefficient descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coefficient {
    Constant(f64),
    /// `a(x, y) = (20 + x^2)(20 + y^2)`.
    Example2,
    /// `a(x, y) = 35 + x^3.5 + y^3.5`.
    Example4,
}

impl Coefficient {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Coefficient::Constant(c) => *c,
            Coefficient::Example2 => (20.0 + x[0] * x[0]) * (20.0 + x[1] * x[1]),
            Coefficient::Example4 => 35.0 + x[0].powf(3.5) + x[1].powf(3.5),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Coefficient::Constant(_))
    }
}

/// Problem description consumed by the generators.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub family: Family,
    /// Interior points per spatial dimension.
    pub m: usize,
    /// Time steps.
    pub num_steps: usize,
    /// Horizon `T`.
    pub t_final: f64,
    /// Spatial interval per dimension.
    pub domain: (f64, f64),
    /// Fractional order, `frac-l1` only.
    pub gamma: Option<f64>,
    pub coefficient: Coefficient,
    pub dims: usize,
}

impl ProblemSpec {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.num_steps == 0 {
            return Err(Error::InvalidArgument("m and N must be positive".into()));
        }
        if !(self.t_final > 0.0) {
            return Err(Error::InvalidArgument("horizon T must be positive".into()));
        }
        if self.domain.1 <= self.domain.0 {
            return Err(Error::InvalidArgument("empty spatial domain".into()));
        }
        if self.dims != 1 && self.dims != 2 {
            return Err(Error::InvalidArgument(format!(
                "unsupported spatial dimension count {}",
                self.dims
            )));
        }
        if self.family == Family::FracL1 {
            match self.gamma {
                Some(g) if g > 0.0 && g < 1.0 => {}
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "fractional order gamma must lie in (0, 1), got {other:?}"
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.num_steps as f64
    }

    pub fn grid(&self) -> Grid {
        Grid::new(self.m, self.dims, self.domain)
    }
}

/// Uniform interior grid over a square domain.
#[derive(Debug, Clone, Copy)]
pub struct Grid {
    pub m: usize,
    pub dims: usize,
    pub lo: f64,
    pub hi: f64,
    pub h: f64,
}

impl Grid {
    pub fn new(m: usize, dims: usize, domain: (f64, f64)) -> Self {
        let (lo, hi) = domain;
        Self {
            m,
            dims,
            lo,
            hi,
            h: (hi - lo) / (m + 1) as f64,
        }
    }

    /// Spatial degrees of freedom `m^d`.
    pub fn len(&self) -> usize {
        self.m.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinates of interior node `idx`; for 1-D grids only the first
    /// entry is meaningful.
    pub fn coords(&self, idx: usize) -> [f64; 2] {
        let j1 = idx % self.m;
        let j2 = idx / self.m;
        [
            self.lo + (j1 + 1) as f64 * self.h,
            self.lo + (j2 + 1) as f64 * self.h,
        ]
    }

    /// Samples a spatial function on the grid.
    pub fn sample(&self, f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|idx| {
                let c = self.coords(idx);
                f(&c[..self.dims])
            })
            .collect()
    }
}

/// Gamma function via the classic 9-term Lanczos approximation (g = 7),
/// accurate to about 1e-13 on the arguments used here.
pub fn gamma_fn(x: f64) -> f64 {
    const G: f64 = 7.0;
    const COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma_fn(1.0 - x))
    } else {
        let x = x - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + G + 0.5;
        (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
    }
}

/// L1 quadrature weights for the Caputo derivative of order `gamma`.
#[derive(Debug, Clone)]
pub struct L1Weights {
    pub gamma: f64,
    /// `l_k`, `k = 0..N-1`; `l_0 = 1/Gamma(2-gamma)`, the rest negative.
    pub l: Vec<f64>,
    /// Initial-condition couplings `l^(k)`, `k = 1..N`, including the
    /// `tau^-gamma` factor.
    pub l_init: Vec<f64>,
}

pub fn l1_weights(gamma: f64, num_steps: usize, tau: f64) -> Result<L1Weights> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must lie in (0, 1), got {gamma}"
        )));
    }
    if num_steps == 0 || !(tau > 0.0) {
        return Err(Error::InvalidArgument("need N >= 1 and tau > 0".into()));
    }
    let inv_g = 1.0 / gamma_fn(2.0 - gamma);
    let e = 1.0 - gamma;
    let pow = |k: usize| (k as f64).powf(e);
    let mut l = Vec::with_capacity(num_steps);
    l.push(inv_g);
    for k in 1..num_steps {
        l.push(inv_g * (pow(k + 1) - 2.0 * pow(k) + pow(k - 1)));
    }
    let tg = tau.powf(gamma);
    let l_init = (1..=num_steps)
        .map(|k| (pow(k - 1) - pow(k)) * inv_g / tg)
        .collect();
    Ok(L1Weights {
        gamma,
        l,
        l_init,
    })
}

/// Eigenvalues of the scaled discrete Laplacian `scale * Lap_h` on the DST-I
/// basis; strictly negative.
pub fn laplacian_eigenvalues(m: usize, dims: usize, h: f64, coeff_scale: f64) -> Vec<f64> {
    let one_d: Vec<f64> = (1..=m)
        .map(|p| {
            let s = (p as f64 * std::f64::consts::PI / (2.0 * (m + 1) as f64)).sin();
            -coeff_scale * 4.0 / (h * h) * s * s
        })
        .collect();
    match dims {
        1 => one_d,
        2 => {
            let mut out = Vec::with_capacity(m * m);
            for k2 in 0..m {
                for k1 in 0..m {
                    out.push(one_d[k1] + one_d[k2]);
                }
            }
            out
        }
        _ => panic!("unsupported dims {dims}"),
    }
}

pub type SpaceFn = std::sync::Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type SpaceTimeFn = std::sync::Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;

/// Coefficient, forcing, initial and (optional) exact-solution functions
/// defining one concrete problem instance.
pub struct ProblemFunctions {
    pub coefficient: SpaceFn,
    pub forcing: SpaceTimeFn,
    pub initial: SpaceFn,
    pub exact: Option<SpaceTimeFn>,
}

impl ProblemFunctions {
    /// Constant-coefficient heat benchmark (2-D). The printed forcing
    /// carries a 2e-6 factor on the Laplacian part, so the stated exact
    /// solution is kept for diagnostics only.
    pub fn heat_example1() -> Self {
        let poly = |x: &[f64]| x[0] * (x[0] - 1.0) * x[1] * (x[1] - 1.0);
        Self {
            coefficient: Arc::new(|_| 1.0),
            forcing: Arc::new(move |x, t| {
                t.exp()
                    * (poly(x)
                        - 2e-6 * (x[0] * (x[0] - 1.0) + x[1] * (x[1] - 1.0)))
            }),
            initial: Arc::new(poly),
            exact: Some(Arc::new(move |x, t| t.exp() * poly(x))),
        }
    }

    /// Variable-coefficient heat benchmark (2-D), forcing as printed.
    pub fn heat_example2() -> Self {
        let poly = |x: &[f64]| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let a = |x: &[f64]| (20.0 + x[0] * x[0]) * (20.0 + x[1] * x[1]);
        Self {
            coefficient: Arc::new(a),
            forcing: Arc::new(move |x, t| {
                let (x1, x2) = (x[0], x[1]);
                t.exp()
                    * (x1 * (1.0 - x1) * x2 * (1.0 - x2)
                        - 2.0 * x1 * (20.0 + x2 * x2) * (1.0 - 2.0 * x1) * x2 * (1.0 - x2)
                        - 2.0 * x2 * (20.0 + x2 * x2) * (1.0 - 2.0 * x2) * x1 * (1.0 - x1)
                        + 2.0 * a(x) * (x1 * (1.0 - x1) + x2 * (1.0 - x2)))
            }),
            initial: Arc::new(poly),
            exact: None,
        }
    }

    /// Constant-coefficient sub-diffusion benchmark on `(0, pi)^2`.
    pub fn frac_example3(gamma: f64) -> Self {
        let g3 = gamma_fn(3.0 - gamma);
        Self {
            coefficient: Arc::new(|_| 1.0),
            forcing: Arc::new(move |x, t| {
                x[0].sin() * x[1].sin() * (2.0 * t.powf(2.0 - gamma) / g3 + 2.0 * t * t)
            }),
            initial: Arc::new(|_| 0.0),
            exact: Some(Arc::new(|x, t| x[0].sin() * x[1].sin() * t * t)),
        }
    }

    /// Variable-coefficient sub-diffusion benchmark on `(0, 1)^2`.
    pub fn frac_example4(gamma: f64) -> Self {
        use std::f64::consts::PI;
        let g3 = gamma_fn(3.0 - gamma);
        let a = |x: &[f64]| 35.0 + x[0].powf(3.5) + x[1].powf(3.5);
        Self {
            coefficient: Arc::new(a),
            forcing: Arc::new(move |x, t| {
                let (sx, cx) = (PI * x[0]).sin_cos();
                let (sy, cy) = (PI * x[1]).sin_cos();
                sx * sy * (2.0 * t.powf(2.0 - gamma) / g3 + 2.0 * PI * PI * a(x) * t * t)
                    - PI * t
                        * t
                        * (3.5 * x[0].powf(2.5) * cx * sy + 3.5 * x[1].powf(2.5) * sx * cy)
            }),
            initial: Arc::new(|_| 0.0),
            exact: Some(Arc::new(|x, t| (PI * x[0]).sin() * (PI * x[1]).sin() * t * t)),
        }
    }

    /// Default functions for a problem spec.
    pub fn for_spec(spec: &ProblemSpec) -> Result<Self> {
        match spec.family {
            Family::HeatBdf | Family::HeatCn => {
                if spec.dims != 2 {
                    return Err(Error::InvalidArgument(
                        "the heat benchmark forcing is two-dimensional".into(),
                    ));
                }
                match spec.coefficient {
                    Coefficient::Constant(_) => Ok(Self::heat_example1()),
                    _ => Err(Error::InvalidArgument(
                        "constant-coefficient families need a constant coefficient".into(),
                    )),
                }
            }
            Family::HeatVarCn => {
                if spec.dims != 2 {
                    return Err(Error::InvalidArgument(
                        "the variable-coefficient benchmark is two-dimensional".into(),
                    ));
                }
                match spec.coefficient {
                    Coefficient::Example2 => Ok(Self::heat_example2()),
                    Coefficient::Constant(c) => {
                        let mut fns = Self::heat_example1();
                        fns.coefficient = Arc::new(move |_| c);
                        fns.exact = None;
                        Ok(fns)
                    }
                    Coefficient::Example4 => {
                        let mut fns = Self::heat_example2();
                        fns.coefficient = Arc::new(|x| 35.0 + x[0].powf(3.5) + x[1].powf(3.5));
                        fns.exact = None;
                        Ok(fns)
                    }
                }
            }
            Family::FracL1 => {
                let gamma = spec.gamma.unwrap_or(0.5);
                if spec.dims != 2 {
                    return Err(Error::InvalidArgument(
                        "the sub-diffusion benchmarks are two-dimensional".into(),
                    ));
                }
                match spec.coefficient {
                    Coefficient::Constant(c) => {
                        let mut fns = Self::frac_example3(gamma);
                        if c != 1.0 {
                            fns.coefficient = Arc::new(move |_| c);
                            fns.exact = None;
                        }
                        Ok(fns)
                    }
                    Coefficient::Example4 => Ok(Self::frac_example4(gamma)),
                    Coefficient::Example2 => {
                        let mut fns = Self::frac_example4(gamma);
                        fns.coefficient = Arc::new(|x| (20.0 + x[0] * x[0]) * (20.0 + x[1] * x[1]));
                        fns.exact = None;
                        Ok(fns)
                    }
                }
            }
        }
    }
}

/// A generated problem: operator(s), right-hand side and metadata.
pub struct BuiltProblem {
    /// Spectral operator; for variable-coefficient families this is the
    /// mean-coefficient surrogate the preconditioner is built from.
    pub operator: SpectralBlttOperator,
    /// True operator in sparse form when it does not share the sine
    /// eigenbasis (variable coefficients).
    pub true_operator: Option<SparseBlockOperator>,
    /// Time-major right-hand side of the unsymmetrized system `A u = f`.
    pub rhs: Vec<f64>,
    pub exact: Option<SpaceTimeFn>,
    pub grid: Grid,
    pub tau: f64,
    pub num_steps: usize,
    /// Spatial mean of the diffusion coefficient over the grid.
    pub coeff_mean: f64,
}

impl BuiltProblem {
    pub fn order(&self) -> usize {
        self.grid.len() * self.num_steps
    }

    /// Samples the exact solution time-major at `t_n`, `n = 1..N`.
    pub fn exact_vector(&self) -> Option<Vec<f64>> {
        let exact = self.exact.as_ref()?;
        let m = self.grid.len();
        let mut out = Vec::with_capacity(m * self.num_steps);
        for n in 1..=self.num_steps {
            let t = n as f64 * self.tau;
            for idx in 0..m {
                let c = self.grid.coords(idx);
                out.push(exact(&c[..self.grid.dims], t));
            }
        }
        Some(out)
    }

    /// Max-norm error of a time-major discrete solution against the exact
    /// solution, when one is known.
    pub fn max_error(&self, u: &[f64]) -> Option<f64> {
        let exact = self.exact_vector()?;
        Some(
            u.iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        )
    }
}

/// Builds a problem with its default (paper-preset) functions.
pub fn build(spec: &ProblemSpec) -> Result<BuiltProblem> {
    let fns = ProblemFunctions::for_spec(spec)?;
    build_with(spec, &fns)
}

/// Builds a problem from explicit coefficient/forcing/initial functions.
pub fn build_with(spec: &ProblemSpec, fns: &ProblemFunctions) -> Result<BuiltProblem> {
    spec.validate()?;
    match spec.family {
        Family::HeatBdf => build_heat_bdf(spec, fns),
        Family::HeatCn => build_heat_cn(spec, fns),
        Family::HeatVarCn => build_heat_var_cn(spec, fns),
        Family::FracL1 => build_frac_l1(spec, fns),
    }
}

fn constant_coefficient(spec: &ProblemSpec, fns: &ProblemFunctions) -> Result<f64> {
    let grid = spec.grid();
    let c = (fns.coefficient)(&grid.coords(0)[..spec.dims]);
    Ok(c)
}

fn mean_coefficient(grid: &Grid, a: &SpaceFn) -> f64 {
    let mut sum = 0.0;
    for idx in 0..grid.len() {
        let c = grid.coords(idx);
        sum += a(&c[..grid.dims]);
    }
    sum / grid.len() as f64
}

fn sample_forcing(grid: &Grid, fns: &ProblemFunctions, t: f64, out: &mut [f64]) {
    for (idx, o) in out.iter_mut().enumerate() {
        let c = grid.coords(idx);
        *o = (fns.forcing)(&c[..grid.dims], t);
    }
}

/// Backward-Euler heat discretization: blocks `(I - tau Lap)/tau` and
/// `-I/tau`; the first right-hand block carries the initial condition as
/// `f^(1) + u0/tau`, which is what the first time step of the scheme
/// requires.
pub fn build_heat_bdf(spec: &ProblemSpec, fns: &ProblemFunctions) -> Result<BuiltProblem> {
    let grid = spec.grid();
    let tau = spec.tau();
    let (m, n) = (grid.len(), spec.num_steps);
    let c = constant_coefficient(spec, fns)?;
    let mu = laplacian_eigenvalues(spec.m, spec.dims, grid.h, c);
    let mut table = vec![0.0; m * n];
    for i in 0..m {
        table[i * n] = (1.0 - tau * mu[i]) / tau;
        if n > 1 {
            table[i * n + 1] = -1.0 / tau;
        }
    }
    let plan = Dst1Plan::new(spec.m, spec.dims)?;
    let operator = SpectralBlttOperator::from_eigs(
        table,
        plan,
        n,
        Some(format!("heat-bdf m={} N={n}", spec.m)),
    )?;

    let mut rhs = vec![0.0; m * n];
    for step in 0..n {
        let t = (step + 1) as f64 * tau;
        sample_forcing(&grid, fns, t, &mut rhs[step * m..(step + 1) * m]);
    }
    let u0 = grid.sample(&*fns.initial);
    for i in 0..m {
        rhs[i] += u0[i] / tau;
    }
    Ok(BuiltProblem {
        operator,
        true_operator: None,
        rhs,
        exact: clone_exact(fns),
        grid,
        tau,
        num_steps: n,
        coeff_mean: c,
    })
}

/// Crank-Nicolson heat discretization: blocks `(I - (tau/2) Lap)/tau` and
/// `(-I - (tau/2) Lap)/tau`, half-step forcing samples, and the
/// `-(1/tau) L2 u0` initial coupling.
pub fn build_heat_cn(spec: &ProblemSpec, fns: &ProblemFunctions) -> Result<BuiltProblem> {
    let grid = spec.grid();
    let tau = spec.tau();
    let (m, n) = (grid.len(), spec.num_steps);
    let c = constant_coefficient(spec, fns)?;
    let mu = laplacian_eigenvalues(spec.m, spec.dims, grid.h, c);
    let mut table = vec![0.0; m * n];
    for i in 0..m {
        table[i * n] = (1.0 - 0.5 * tau * mu[i]) / tau;
        if n > 1 {
            table[i * n + 1] = (-1.0 - 0.5 * tau * mu[i]) / tau;
        }
    }
    let plan = Dst1Plan::new(spec.m, spec.dims)?;
    let operator = SpectralBlttOperator::from_eigs(
        table,
        plan,
        n,
        Some(format!("heat-cn m={} N={n}", spec.m)),
    )?;

    let mut rhs = vec![0.0; m * n];
    for step in 0..n {
        let t = (step as f64 + 0.5) * tau;
        sample_forcing(&grid, fns, t, &mut rhs[step * m..(step + 1) * m]);
    }
    // -(1/tau) L2 u0 = u0/tau + (1/2) Lap u0.
    let u0 = grid.sample(&*fns.initial);
    let stencil = FivePointStencil::constant(spec.m, spec.dims, spec.domain, c)?;
    let mut lap_u0 = vec![0.0; m];
    stencil.apply(&u0, &mut lap_u0)?;
    for i in 0..m {
        rhs[i] += u0[i] / tau + 0.5 * lap_u0[i];
    }
    Ok(BuiltProblem {
        operator,
        true_operator: None,
        rhs,
        exact: clone_exact(fns),
        grid,
        tau,
        num_steps: n,
        coeff_mean: c,
    })
}

/// Variable-coefficient Crank-Nicolson: the matvec uses the true sparse
/// blocks, the preconditioner surrogate replaces `a` by its grid mean.
pub fn build_heat_var_cn(spec: &ProblemSpec, fns: &ProblemFunctions) -> Result<BuiltProblem> {
    let grid = spec.grid();
    let tau = spec.tau();
    let (m, n) = (grid.len(), spec.num_steps);
    let stencil = FivePointStencil::new(spec.m, spec.dims, spec.domain, &*fns.coefficient)?;
    let mut time_symbol = vec![0.0; n];
    let mut space_symbol = vec![0.0; n];
    time_symbol[0] = 1.0 / tau;
    space_symbol[0] = -0.5;
    if n > 1 {
        time_symbol[1] = -1.0 / tau;
        space_symbol[1] = -0.5;
    }
    let true_operator = SparseBlockOperator::new(time_symbol, space_symbol, stencil.clone())?;

    let a_bar = mean_coefficient(&grid, &fns.coefficient);
    let mu = laplacian_eigenvalues(spec.m, spec.dims, grid.h, a_bar);
    let mut table = vec![0.0; m * n];
    for i in 0..m {
        table[i * n] = (1.0 - 0.5 * tau * mu[i]) / tau;
        if n > 1 {
            table[i * n + 1] = (-1.0 - 0.5 * tau * mu[i]) / tau;
        }
    }
    let plan = Dst1Plan::new(spec.m, spec.dims)?;
    let operator = SpectralBlttOperator::from_eigs(
        table,
        plan,
        n,
        Some(format!("heat-var-cn surrogate a_bar={a_bar:.6e}")),
    )?;

    let mut rhs = vec![0.0; m * n];
    for step in 0..n {
        let t = (step as f64 + 0.5) * tau;
        sample_forcing(&grid, fns, t, &mut rhs[step * m..(step + 1) * m]);
    }
    let u0 = grid.sample(&*fns.initial);
    let mut lap_u0 = vec![0.0; m];
    stencil.apply(&u0, &mut lap_u0)?;
    for i in 0..m {
        rhs[i] += u0[i] / tau + 0.5 * lap_u0[i];
    }
    Ok(BuiltProblem {
        operator,
        true_operator: Some(true_operator),
        rhs,
        exact: clone_exact(fns),
        grid,
        tau,
        num_steps: n,
        coeff_mean: a_bar,
    })
}

/// L1 discretization of the Caputo sub-diffusion problem.
pub fn build_frac_l1(spec: &ProblemSpec, fns: &ProblemFunctions) -> Result<BuiltProblem> {
    let grid = spec.grid();
    let tau = spec.tau();
    let (m, n) = (grid.len(), spec.num_steps);
    let gamma = spec.gamma.expect("validated");
    let weights = l1_weights(gamma, n, tau)?;
    let tg = tau.powf(gamma);

    let constant = spec.coefficient.is_constant();
    let plan = Dst1Plan::new(spec.m, spec.dims)?;
    let (operator, true_operator, coeff_mean) = if constant {
        let c = constant_coefficient(spec, fns)?;
        let mu = laplacian_eigenvalues(spec.m, spec.dims, grid.h, c);
        let mut table = vec![0.0; m * n];
        for i in 0..m {
            for k in 0..n {
                table[i * n + k] = weights.l[k] / tg;
            }
            table[i * n] -= mu[i];
        }
        let op = SpectralBlttOperator::from_eigs(
            table,
            plan,
            n,
            Some(format!("frac-l1 gamma={gamma} m={}", spec.m)),
        )?;
        (op, None, c)
    } else {
        let stencil = FivePointStencil::new(spec.m, spec.dims, spec.domain, &*fns.coefficient)?;
        let time_symbol: Vec<f64> = weights.l.iter().map(|l| l / tg).collect();
        let mut space_symbol = vec![0.0; n];
        space_symbol[0] = -1.0;
        let sparse = SparseBlockOperator::new(time_symbol, space_symbol, stencil)?;
        let a_bar = mean_coefficient(&grid, &fns.coefficient);
        let mu = laplacian_eigenvalues(spec.m, spec.dims, grid.h, a_bar);
        let mut table = vec![0.0; m * n];
        for i in 0..m {
            for k in 0..n {
                table[i * n + k] = weights.l[k] / tg;
            }
            table[i * n] -= mu[i];
        }
        let op = SpectralBlttOperator::from_eigs(
            table,
            plan,
            n,
            Some(format!("frac-l1 surrogate a_bar={a_bar:.6e}")),
        )?;
        (op, Some(sparse), a_bar)
    };

    let mut rhs = vec![0.0; m * n];
    for step in 0..n {
        let t = (step + 1) as f64 * tau;
        sample_forcing(&grid, fns, t, &mut rhs[step * m..(step + 1) * m]);
    }
    let u0 = grid.sample(&*fns.initial);
    for step in 0..n {
        let coupling = weights.l_init[step];
        for i in 0..m {
            rhs[step * m + i] -= coupling * u0[i];
        }
    }
    Ok(BuiltProblem {
        operator,
        true_operator,
        rhs,
        exact: clone_exact(fns),
        grid,
        tau,
        num_steps: n,
        coeff_mean,
    })
}

fn clone_exact(fns: &ProblemFunctions) -> Option<SpaceTimeFn> {
    fns.exact.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_function_reference_values() {
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma_fn(0.5) - sqrt_pi).abs() <= 1e-13 * sqrt_pi);
        assert!((gamma_fn(1.0) - 1.0).abs() <= 1e-13);
        assert!((gamma_fn(1.5) - sqrt_pi / 2.0).abs() <= 1e-13);
        assert!((gamma_fn(2.0) - 1.0).abs() <= 1e-13);
        assert!((gamma_fn(2.5) - 1.329340388179137).abs() <= 1e-12);
        assert!((gamma_fn(4.0) - 6.0).abs() <= 1e-12);
    }

    #[test]
    fn l1_weights_reference_values() {
        // gamma = 0.5: l_0 = 1/Gamma(1.5) = 2/sqrt(pi),
        // l_1 = (2/sqrt(pi)) (sqrt(2) - 2).
        let w = l1_weights(0.5, 4, 1.0).unwrap();
        let two_over_sqrt_pi = 2.0 / std::f64::consts::PI.sqrt();
        assert!((w.l[0] - two_over_sqrt_pi).abs() <= 1e-13);
        let l1_expect = two_over_sqrt_pi * (2f64.sqrt() - 2.0);
        assert!((w.l[1] - l1_expect).abs() <= 1e-13, "{} vs {l1_expect}", w.l[1]);
    }

    #[test]
    fn l1_weights_signs_and_monotonicity() {
        for gamma in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let n = 20;
            let w = l1_weights(gamma, n, 0.05).unwrap();
            assert!(w.l[0] > 0.0);
            for k in 1..n {
                assert!(w.l[k] < 0.0, "l_{k} should be negative");
                if k + 1 < n {
                    assert!(w.l[k] < w.l[k + 1], "weights increase toward zero");
                }
            }
            let total: f64 = w.l.iter().sum();
            assert!(total > 0.0, "sum of weights positive (gamma {gamma})");
            for v in &w.l_init {
                assert!(*v < 0.0, "initial couplings negative");
            }
        }
    }

    #[test]
    fn l1_weights_reject_bad_gamma() {
        assert!(l1_weights(0.0, 4, 1.0).is_err());
        assert!(l1_weights(1.0, 4, 1.0).is_err());
    }

    #[test]
    fn laplacian_eigenvalue_smallest_case() {
        // m = 1, d = 1, h = 1/2: the 1x1 Laplacian is -2/h^2 = -8.
        let eigs = laplacian_eigenvalues(1, 1, 0.5, 1.0);
        assert_eq!(eigs.len(), 1);
        assert!((eigs[0] + 8.0).abs() <= 1e-12);
    }

    #[test]
    fn laplacian_eigenvalues_match_dense_assembly() {
        let m = 3;
        let h = 0.25;
        let st = FivePointStencil::constant(m, 2, (0.0, 1.0), 1.0).unwrap();
        let dense = st.to_dense();
        let mut ours = laplacian_eigenvalues(m, 2, h, 1.0);
        let mut theirs: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        ours.sort_by(f64::total_cmp);
        theirs.sort_by(f64::total_cmp);
        for (a, b) in ours.iter().zip(&theirs) {
            assert!((a - b).abs() <= 1e-11 * b.abs(), "{a} vs {b}");
        }
        assert!(ours.iter().all(|&x| x < 0.0));
    }

    #[test]
    fn heat_bdf_c0_equals_smallest_laplacian_magnitude() {
        let spec = ProblemSpec {
            family: Family::HeatBdf,
            m: 3,
            num_steps: 4,
            t_final: 1.0,
            domain: (0.0, 1.0),
            gamma: None,
            coefficient: Coefficient::Constant(1.0),
            dims: 2,
        };
        let p = build(&spec).unwrap();
        let rep = p.operator.check_admissible();
        let mu = laplacian_eigenvalues(3, 2, p.grid.h, 1.0);
        let smallest = mu.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
        assert!(rep.admissible);
        assert!((rep.c0 - smallest).abs() <= 1e-9 * smallest);
    }

    #[test]
    fn heat_bdf_matches_dense_gershgorin_route() {
        // c0 computed from the table vs from dense assembled blocks.
        let spec = ProblemSpec {
            family: Family::HeatBdf,
            m: 3,
            num_steps: 4,
            t_final: 1.0,
            domain: (0.0, 1.0),
            gamma: None,
            coefficient: Coefficient::Constant(1.0),
            dims: 1,
        };
        let p = build_with(
            &spec,
            &ProblemFunctions {
                coefficient: Arc::new(|_| 1.0),
                forcing: Arc::new(|_, _| 0.0),
                initial: Arc::new(|_| 0.0),
                exact: None,
            },
        )
        .unwrap();
        let tau = p.tau;
        let st = FivePointStencil::constant(3, 1, (0.0, 1.0), 1.0).unwrap();
        let a0 = {
            let mut d = st.to_dense() * (-1.0);
            for i in 0..3 {
                d[(i, i)] += 1.0 / tau;
            }
            d
        };
        // lambda_min(A_0 - |A_1|) with A_1 = -I/tau.
        let mut shifted = a0.clone();
        for i in 0..3 {
            shifted[(i, i)] -= 1.0 / tau;
        }
        let dense_c0 = shifted
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let rep = p.operator.check_admissible();
        assert!((rep.c0 - dense_c0).abs() <= 1e-12 * dense_c0.abs().max(1.0));
    }

    #[test]
    fn heat_cn_admissible_on_tested_grids() {
        for (m, n) in [(3usize, 4usize), (7, 8), (15, 16)] {
            let spec = ProblemSpec {
                family: Family::HeatCn,
                m,
                num_steps: n,
                t_final: 1.0,
                domain: (0.0, 1.0),
                gamma: None,
                coefficient: Coefficient::Constant(1.0),
                dims: 2,
            };
            let p = build(&spec).unwrap();
            assert!(p.operator.check_admissible().admissible, "m={m} N={n}");
        }
    }

    #[test]
    fn var_cn_constant_coefficient_surrogate_is_exact() {
        let spec = ProblemSpec {
            family: Family::HeatVarCn,
            m: 4,
            num_steps: 5,
            t_final: 1.0,
            domain: (0.0, 1.0),
            gamma: None,
            coefficient: Coefficient::Constant(2.5),
            dims: 2,
        };
        let p = build(&spec).unwrap();
        let sparse = p.true_operator.as_ref().unwrap();
        let v: Vec<f64> = (0..p.order()).map(|j| (j as f64 * 0.23).sin()).collect();
        let a = sparse.apply(&v).unwrap();
        let b = crate::operator::bltt_matvec(&p.operator, &v).unwrap();
        let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        for j in 0..p.order() {
            assert!(
                (a[j] - b[j]).abs() <= 1e-10 * scale,
                "true and surrogate operators should coincide for constant a"
            );
        }
        assert!((p.coeff_mean - 2.5).abs() <= 1e-14);
    }

    #[test]
    fn coefficient_mean_two_ways() {
        let spec = ProblemSpec {
            family: Family::HeatVarCn,
            m: 6,
            num_steps: 2,
            t_final: 1.0,
            domain: (0.0, 1.0),
            gamma: None,
            coefficient: Coefficient::Example2,
            dims: 2,
        };
        let p = build(&spec).unwrap();
        // Running mean as the second route.
        let grid = p.grid;
        let mut mean = 0.0;
        for idx in 0..grid.len() {
            let c = grid.coords(idx);
            let a = Coefficient::Example2.eval(&c);
            mean += (a - mean) / (idx + 1) as f64;
        }
        assert!((p.coeff_mean - mean).abs() <= 1e-14 * mean);
    }

    #[test]
    fn frac_l1_admissible_and_matches_dense() {
        let spec = ProblemSpec {
            family: Family::FracL1,
            m: 3,
            num_steps: 4,
            t_final: 1.0,
            domain: (0.0, std::f64::consts::PI),
            gamma: Some(0.5),
            coefficient: Coefficient::Constant(1.0),
            dims: 2,
        };
        let p = build(&spec).unwrap();
        assert!(p.operator.check_admissible().admissible);
        // Dense route: A = I (x) (-Lap) + T (x) I.
        let dense = crate::oracle::assemble_dense(&p.operator).unwrap();
        let st = FivePointStencil::constant(3, 2, spec.domain, 1.0).unwrap();
        let w = l1_weights(0.5, 4, p.tau).unwrap();
        let tg = p.tau.powf(0.5);
        let mm = 9;
        let mut direct = nalgebra::DMatrix::zeros(mm * 4, mm * 4);
        let lap = st.to_dense();
        for t1 in 0..4usize {
            for t2 in 0..=t1 {
                let k = t1 - t2;
                for r in 0..mm {
                    for c in 0..mm {
                        let mut val = -lap[(r, c)] * if k == 0 { 1.0 } else { 0.0 };
                        if r == c {
                            val += w.l[k] / tg;
                        }
                        direct[(t1 * mm + r, t2 * mm + c)] = val;
                    }
                }
            }
        }
        let defect = (&dense - &direct).norm() / direct.norm();
        assert!(defect <= 1e-12, "dense equivalence defect {defect}");
    }

    #[test]
    fn frac_l1_rhs_is_linear_in_inputs() {
        let spec = ProblemSpec {
            family: Family::FracL1,
            m: 3,
            num_steps: 3,
            t_final: 1.0,
            domain: (0.0, 1.0),
            gamma: Some(0.4),
            coefficient: Coefficient::Constant(1.0),
            dims: 2,
        };
        let scaled = ProblemFunctions {
            coefficient: Arc::new(|_| 1.0),
            forcing: Arc::new(|x, t| 2.0 * (x[0] + t)),
            initial: Arc::new(|x| 2.0 * x[1]),
            exact: None,
        };
        let base = ProblemFunctions {
            coefficient: Arc::new(|_| 1.0),
            forcing: Arc::new(|x, t| x[0] + t),
            initial: Arc::new(|x| x[1]),
            exact: None,
        };
        let p2 = build_with(&spec, &scaled).unwrap();
        let p1 = build_with(&spec, &base).unwrap();
        for (a, b) in p2.rhs.iter().zip(&p1.rhs) {
            assert!((a - 2.0 * b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
