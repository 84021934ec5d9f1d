//! The primal–dual best Bregman approximation iteration.
//!
//! Every step draws `(aₙ, aₙ*) ∈ gra A` and `(bₙ, bₙ*) ∈ gra B` from two
//! resolvent evaluations, builds the half-space `Hₙ ⊇ Z` they certify,
//! projects the current pair onto `Hₙ`, and then projects the reference pair
//! onto `H^F(z₀, zₙ) ∩ H^F(zₙ, zₙ₊½)`, with `F(x, y*) = f(x) + g*(y*)`.

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::geometry::{project_halfspace, q_projection, HalfSpace};
use crate::kernels::{LegendreKernel, ProductKernel};
use crate::linalg;
use crate::operators::{graph_point, LinearMap, MonotoneOperator};

/// Normals with sup-norm at or below this are treated as zero.
pub const ZERO_NORMAL: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualPoint {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
}

impl PrimalDualPoint {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        Self { x, y }
    }

    pub fn packed(&self) -> DVector<f64> {
        linalg::concat(&self.x, &self.y)
    }

    pub fn unpack(z: &DVector<f64>, primal_dim: usize) -> Self {
        Self {
            x: linalg::segment(z, 0, primal_dim),
            y: linalg::segment(z, primal_dim, z.len() - primal_dim),
        }
    }
}

/// `find (x, y*) = P^F_Z (x0, y0*)` for `Z = {−L*y* ∈ Ax, Lx ∈ B⁻¹y*}`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompositeProblem {
    a: MonotoneOperator,
    b: MonotoneOperator,
    l: LinearMap,
    f: LegendreKernel,
    g_star: LegendreKernel,
    h: LegendreKernel,
    j: LegendreKernel,
    eps: f64,
    delta: f64,
    sigma: f64,
    start: PrimalDualPoint,
    product: ProductKernel,
}

impl CompositeProblem {
    pub fn builder() -> CompositeProblemBuilder {
        CompositeProblemBuilder::default()
    }

    pub fn a(&self) -> &MonotoneOperator {
        &self.a
    }
    pub fn b(&self) -> &MonotoneOperator {
        &self.b
    }
    pub fn l(&self) -> &LinearMap {
        &self.l
    }
    pub fn f(&self) -> &LegendreKernel {
        &self.f
    }
    pub fn g_star(&self) -> &LegendreKernel {
        &self.g_star
    }
    pub fn h(&self) -> &LegendreKernel {
        &self.h
    }
    pub fn j(&self) -> &LegendreKernel {
        &self.j
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn start(&self) -> &PrimalDualPoint {
        &self.start
    }
    pub fn primal_dim(&self) -> usize {
        self.l.cols()
    }
    pub fn dual_dim(&self) -> usize {
        self.l.rows()
    }

    /// `F = f ⊕ g*`.
    pub fn product_kernel(&self) -> &ProductKernel {
        &self.product
    }

    /// Same problem with a different reference point (revalidated).
    pub fn with_start(&self, x0: DVector<f64>, y0: DVector<f64>) -> Result<Self> {
        CompositeProblemBuilder::from_problem(self).start(x0, y0).build()
    }

    /// Checks the iterate-level domain hypotheses: `x ∈ int dom f`,
    /// `y* ∈ int dom g*`, `Lx ∈ int dom j`.
    pub fn check_iterate(&self, p: &PrimalDualPoint, what: &str) -> Result<()> {
        if !self.f.is_interior(&p.x) {
            return Err(Error::DomainViolation(format!("{what}: x not interior to dom f")));
        }
        if !self.g_star.is_interior(&p.y) {
            return Err(Error::DomainViolation(format!("{what}: y* not interior to dom g*")));
        }
        if !self.j.is_full_domain() && !self.j.is_interior(&self.l.apply(&p.x)?) {
            return Err(Error::DomainViolation(format!("{what}: Lx not interior to dom j")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
pub struct CompositeProblemBuilder {
    a: Option<MonotoneOperator>,
    b: Option<MonotoneOperator>,
    l: Option<LinearMap>,
    kernels: Option<[LegendreKernel; 4]>,
    start: Option<PrimalDualPoint>,
    eps: Option<f64>,
    delta: Option<f64>,
    sigma: Option<f64>,
}

pub const DEFAULT_EPS: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 0.5;
pub const DEFAULT_SIGMA: f64 = 2.0;

impl CompositeProblemBuilder {
    fn from_problem(p: &CompositeProblem) -> Self {
        Self {
            a: Some(p.a.clone()),
            b: Some(p.b.clone()),
            l: Some(p.l.clone()),
            kernels: Some([p.f.clone(), p.g_star.clone(), p.h.clone(), p.j.clone()]),
            start: Some(p.start.clone()),
            eps: Some(p.eps),
            delta: Some(p.delta),
            sigma: Some(p.sigma),
        }
    }

    pub fn a(mut self, a: MonotoneOperator) -> Self {
        self.a = Some(a);
        self
    }
    pub fn b(mut self, b: MonotoneOperator) -> Self {
        self.b = Some(b);
        self
    }
    pub fn l(mut self, l: LinearMap) -> Self {
        self.l = Some(l);
        self
    }
    /// Kernels in the order `f`, `g*`, `h`, `j`.
    pub fn kernels(mut self, f: LegendreKernel, g_star: LegendreKernel, h: LegendreKernel, j: LegendreKernel) -> Self {
        self.kernels = Some([f, g_star, h, j]);
        self
    }
    pub fn start(mut self, x0: DVector<f64>, y0: DVector<f64>) -> Self {
        self.start = Some(PrimalDualPoint::new(x0, y0));
        self
    }
    pub fn eps(mut self, eps: f64) -> Self {
        self.eps = Some(eps);
        self
    }
    pub fn delta(mut self, delta: f64) -> Self {
        self.delta = Some(delta);
        self
    }
    pub fn sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn build(self) -> Result<CompositeProblem> {
        let missing = |what: &str| Error::InvalidProblem(format!("missing {what}"));
        let a = self.a.ok_or_else(|| missing("operator A"))?;
        let b = self.b.ok_or_else(|| missing("operator B"))?;
        let l = self.l.ok_or_else(|| missing("linear map L"))?;
        let [f, g_star, h, j] = self.kernels.ok_or_else(|| missing("kernels"))?;
        let start = self.start.ok_or_else(|| missing("start point"))?;
        let eps = self.eps.unwrap_or(DEFAULT_EPS);
        let delta = self.delta.unwrap_or(DEFAULT_DELTA);
        let sigma = self.sigma.unwrap_or(DEFAULT_SIGMA.max(eps).max(delta));

        let (n, m) = (l.cols(), l.rows());
        check_dim("operator A", n, a.dim())?;
        check_dim("operator B", m, b.dim())?;
        check_dim("kernel f", n, f.dim())?;
        check_dim("kernel h", n, h.dim())?;
        check_dim("kernel g*", m, g_star.dim())?;
        check_dim("kernel j", m, j.dim())?;
        check_dim("start x", n, start.x.len())?;
        check_dim("start y*", m, start.y.len())?;
        if !(eps > 0.0 && delta > 0.0 && eps.is_finite() && delta.is_finite()) {
            return Err(Error::InvalidProblem("eps and delta must be positive".into()));
        }
        if !(sigma >= eps.max(delta) && sigma.is_finite()) {
            return Err(Error::InvalidProblem("sigma must be >= max(eps, delta)".into()));
        }
        if !h.interior_contains(&f) {
            return Err(Error::InvalidProblem("int dom f must be contained in int dom h".into()));
        }
        if !f.is_interior(&start.x) || !g_star.is_interior(&start.y) {
            return Err(Error::InvalidProblem("start not interior".into()));
        }
        if !j.is_interior(&l.apply(&start.x)?) {
            return Err(Error::InvalidProblem("L x0 not interior to dom j".into()));
        }
        let product = ProductKernel::new(f.clone(), g_star.clone());
        Ok(CompositeProblem {
            a,
            b,
            l,
            f,
            g_star,
            h,
            j,
            eps,
            delta,
            sigma,
            start,
            product,
        })
    }
}

/// Rule producing `(γₙ, μₙ)`.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSchedule {
    Constant {
        gamma: f64,
        mu: f64,
    },
    /// Cycles through the listed pairs.
    Cyclic(Vec<(f64, f64)>),
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Constant { gamma: 1.0, mu: 1.0 }
    }
}

impl StepSchedule {
    pub fn at(&self, n: usize) -> (f64, f64) {
        match self {
            StepSchedule::Constant { gamma, mu } => (*gamma, *mu),
            StepSchedule::Cyclic(pairs) => pairs[n % pairs.len()],
        }
    }

    /// Every emitted pair must lie in `[ε, σ] × [δ, σ]`.
    pub fn validate(&self, eps: f64, delta: f64, sigma: f64) -> Result<()> {
        let pairs: Vec<(f64, f64)> = match self {
            StepSchedule::Constant { gamma, mu } => vec![(*gamma, *mu)],
            StepSchedule::Cyclic(pairs) => pairs.clone(),
        };
        if pairs.is_empty() {
            return Err(Error::InvalidProblem("empty step schedule".into()));
        }
        for (g, m) in pairs {
            if !(g >= eps && g <= sigma && m >= delta && m <= sigma) {
                return Err(Error::InvalidProblem(format!(
                    "step pair ({g}, {m}) outside [{eps}, {sigma}] x [{delta}, {sigma}]"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    pub tol: f64,
    /// Record `(x_{n+1}, y*_{n+1})` in every trace row.
    pub full_vectors: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            tol: 1e-8,
            full_vectors: false,
        }
    }
}

/// Everything computed in one pass of the iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationState {
    pub n: usize,
    pub gamma: f64,
    pub mu: f64,
    pub current: PrimalDualPoint,
    pub a: DVector<f64>,
    pub a_star: DVector<f64>,
    pub b: DVector<f64>,
    pub b_star: DVector<f64>,
    pub halfspace: HalfSpace,
    /// `true` when the normal was below [`ZERO_NORMAL`] and `Hₙ` was taken
    /// to be the whole space.
    pub whole_space: bool,
    pub half: PrimalDualPoint,
    pub next: PrimalDualPoint,
    pub kt_residual: f64,
    /// `D^F(z_{n+1/2}, zₙ)`.
    pub d_half: f64,
    /// `D^F(z_{n+1}, zₙ)`.
    pub d_full: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Tolerance,
    ExactFixedPoint,
    WholeSpaceHalfspace,
    MaxIters,
    NumericalFailure,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::Tolerance => "tolerance",
            Termination::ExactFixedPoint => "exact_fixed_point",
            Termination::WholeSpaceHalfspace => "whole_space_halfspace",
            Termination::MaxIters => "max_iters",
            Termination::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub gamma: f64,
    pub mu: f64,
    pub kt_residual: f64,
    pub d_full: f64,
    pub d_half: f64,
    pub vectors: Option<PrimalDualPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveReport {
    pub point: PrimalDualPoint,
    pub termination: Termination,
    /// Number of completed steps.
    pub iterations: usize,
    pub trace: Vec<TraceRow>,
    /// Set when the reported point is `(aₙ, bₙ*)` rather than an iterate,
    /// i.e. on whole-space termination.
    pub from_graph_points: bool,
    pub failure: Option<Error>,
    /// The last complete iteration, kept for diagnosis.
    pub last_state: Option<IterationState>,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        matches!(
            self.termination,
            Termination::Tolerance | Termination::ExactFixedPoint | Termination::WholeSpaceHalfspace
        )
    }
}

/// `{(x, y*) : ⟨x, a* + L*b*⟩ + ⟨b − La, y*⟩ ≤ ⟨a, a*⟩ + ⟨b, b*⟩}`.
pub fn kuhn_tucker_halfspace(
    a: &DVector<f64>,
    a_star: &DVector<f64>,
    b: &DVector<f64>,
    b_star: &DVector<f64>,
    l: &LinearMap,
) -> Result<HalfSpace> {
    check_dim("graph point a*", a.len(), a_star.len())?;
    check_dim("graph point b*", b.len(), b_star.len())?;
    let primal = a_star + l.adjoint_apply(b_star)?;
    let dual = b - l.apply(a)?;
    let offset = linalg::dot(a, a_star) + linalg::dot(b, b_star);
    Ok(HalfSpace::new(linalg::concat(&primal, &dual), offset))
}

/// `‖a* + L*b*‖ + ‖La − b‖`, read off the half-space normal.
pub fn kt_residual(halfspace: &HalfSpace, primal_dim: usize) -> f64 {
    let s = &halfspace.normal;
    let n = s.len() - primal_dim;
    linalg::norm(&linalg::segment(s, 0, primal_dim)) + linalg::norm(&linalg::segment(s, primal_dim, n))
}

/// Graph points and the resulting half-space for one step.
pub(crate) struct GraphData {
    pub a: DVector<f64>,
    pub a_star: DVector<f64>,
    pub b: DVector<f64>,
    pub b_star: DVector<f64>,
    pub halfspace: HalfSpace,
}

fn graph_data(problem: &CompositeProblem, gamma: f64, mu: f64, p: &PrimalDualPoint) -> Result<GraphData> {
    let l = &problem.l;
    let ga = graph_point(&problem.a, &problem.h, gamma, &p.x, &l.adjoint_apply(&p.y)?)?;
    let gb = graph_point(&problem.b, &problem.j, mu, &l.apply(&p.x)?, &(-&p.y))?;
    let halfspace = kuhn_tucker_halfspace(&ga.a, &ga.a_star, &gb.a, &gb.a_star, l)?;
    Ok(GraphData {
        a: ga.a,
        a_star: ga.a_star,
        b: gb.a,
        b_star: gb.a_star,
        halfspace,
    })
}

/// Projection half of a step, shared by the assembled and block iterations.
pub(crate) fn complete_step(
    problem: &CompositeProblem,
    n: usize,
    (gamma, mu): (f64, f64),
    current: &PrimalDualPoint,
    g: GraphData,
) -> Result<IterationState> {
    let kernel = problem.product.joint();
    let primal_dim = problem.primal_dim();
    let z = current.packed();
    let z0 = problem.start.packed();
    let whole_space = linalg::norm_inf(&g.halfspace.normal) <= ZERO_NORMAL;
    let half_z = if whole_space {
        z.clone()
    } else {
        project_halfspace(kernel, &g.halfspace, &z)?.point
    };
    let next_z = q_projection(kernel, &z0, &z, &half_z)?.point;
    let d_half = kernel.bregman_distance(&half_z, &z)?.to_f64();
    let d_full = kernel.bregman_distance(&next_z, &z)?.to_f64();
    let half = PrimalDualPoint::unpack(&half_z, primal_dim);
    let next = PrimalDualPoint::unpack(&next_z, primal_dim);
    problem.check_iterate(&half, "half-iterate")?;
    problem.check_iterate(&next, "iterate")?;
    Ok(IterationState {
        n,
        gamma,
        mu,
        current: current.clone(),
        kt_residual: kt_residual(&g.halfspace, primal_dim),
        a: g.a,
        a_star: g.a_star,
        b: g.b,
        b_star: g.b_star,
        halfspace: g.halfspace,
        whole_space,
        half,
        next,
        d_half,
        d_full,
    })
}

/// One pass of the iteration from `current` with the `n`-th step sizes.
pub fn step(
    problem: &CompositeProblem,
    schedule: &StepSchedule,
    n: usize,
    current: &PrimalDualPoint,
) -> Result<IterationState> {
    let (gamma, mu) = schedule.at(n);
    problem.check_iterate(current, "iterate")?;
    let g = graph_data(problem, gamma, mu, current)?;
    complete_step(problem, n, (gamma, mu), current, g)
}

/// Runs the iteration until a solution is certified, the tolerance test
/// passes, or `max_iters` steps have been taken.
///
/// Stopping tests, in order, after step `n`:
/// 1. `‖sₙ*‖∞ ≤ 1e−14`: the half-space is the whole space. If additionally
///    `(aₙ, bₙ*) = (xₙ, yₙ*)` exactly, the result is `exact_fixed_point`;
///    otherwise `whole_space_halfspace` with `(aₙ, bₙ*)` reported.
/// 2. `zₙ₊½ = zₙ₊₁ = zₙ` exactly: `exact_fixed_point`.
/// 3. KT residual and `D^F(zₙ₊½, zₙ)` both `≤ tol`: `tolerance`, reporting
///    `zₙ₊₁`.
pub fn solve(problem: &CompositeProblem, schedule: &StepSchedule, opts: &SolveOptions) -> SolveReport {
    run(problem, schedule, opts, |n, current| {
        step(problem, schedule, n, current)
    })
}

pub(crate) fn run(
    problem: &CompositeProblem,
    schedule: &StepSchedule,
    opts: &SolveOptions,
    stepper: impl Fn(usize, &PrimalDualPoint) -> Result<IterationState>,
) -> SolveReport {
    let mut report = SolveReport {
        point: problem.start.clone(),
        termination: Termination::MaxIters,
        iterations: 0,
        trace: Vec::new(),
        from_graph_points: false,
        failure: None,
        last_state: None,
    };
    if let Err(e) = schedule.validate(problem.eps, problem.delta, problem.sigma) {
        report.termination = Termination::NumericalFailure;
        report.failure = Some(e);
        return report;
    }
    let mut current = problem.start.clone();
    for n in 0..opts.max_iters {
        let state = match stepper(n, &current) {
            Ok(s) => s,
            Err(e) => {
                report.termination = Termination::NumericalFailure;
                report.failure = Some(e);
                report.point = current;
                return report;
            }
        };
        report.iterations = n + 1;
        report.trace.push(TraceRow {
            n,
            gamma: state.gamma,
            mu: state.mu,
            kt_residual: state.kt_residual,
            d_full: state.d_full,
            d_half: state.d_half,
            vectors: opts.full_vectors.then(|| state.next.clone()),
        });
        let stop = if state.whole_space {
            let graph = PrimalDualPoint::new(state.a.clone(), state.b_star.clone());
            if graph == current {
                report.point = current.clone();
                Some(Termination::ExactFixedPoint)
            } else {
                report.point = graph;
                report.from_graph_points = true;
                Some(Termination::WholeSpaceHalfspace)
            }
        } else if state.half == current && state.next == current {
            report.point = current.clone();
            Some(Termination::ExactFixedPoint)
        } else if state.kt_residual <= opts.tol && state.d_half <= opts.tol {
            report.point = state.next.clone();
            Some(Termination::Tolerance)
        } else {
            None
        };
        current = state.next.clone();
        report.last_state = Some(state);
        if let Some(t) = stop {
            report.termination = t;
            return report;
        }
    }
    report.point = current;
    report.termination = Termination::MaxIters;
    report
}
