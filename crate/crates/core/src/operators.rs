//! Maximally monotone operators, seen through their Bregman resolvents
//! `(∇h + γA)⁻¹`, and dense linear maps.
//!
//! Closed-form resolvents are registered for specific `(h, φ)` pairs (entropy
//! kernels with Lambert-W or quadratic-root solutions, matched kernels, the
//! skew 2×2 operator, affine maps under the energy kernel). Every other
//! separable pair goes through a bracketed scalar Newton solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::kernels::{KernelKind, LegendreKernel};
use crate::linalg;
use crate::special::lambert_w_exp;

/// Dense linear map `L: 𝒳 → 𝒴` (rows = dim 𝒴, cols = dim 𝒳).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMap {
    matrix: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(matrix: DMatrix<f64>) -> Self {
        Self { matrix }
    }

    pub fn identity(n: usize) -> Self {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(DMatrix::zeros(rows, cols))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Dimension of the codomain 𝒴.
    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Dimension of the domain 𝒳.
    pub fn cols(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("linear map apply", self.cols(), x.len())?;
        Ok(linalg::matvec(&self.matrix, x))
    }

    /// `L*y*`, the transpose product.
    pub fn adjoint_apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("linear map adjoint", self.rows(), y.len())?;
        Ok(linalg::matvec_t(&self.matrix, y))
    }
}

/// Scalar convex potential `φ` whose subdifferential defines a separable
/// operator coordinate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalarPotential {
    /// `ξ ln ξ − ωξ` on `]0, ∞[`.
    Entropy { omega: f64 },
    /// `|ξ|^p / p`, `p ≥ 1`.
    Power { p: f64 },
    /// `ξ^(−p) / p` on `]0, ∞[`, `p > 0`.
    InversePower { p: f64 },
    /// `−ξ^p / p` on `[0, ∞[`, `0 < p < 1`.
    NegPower { p: f64 },
    /// `(ξ − c)² / 2`.
    Quadratic { center: f64 },
    /// `(1 − ξ) ln(1 − ξ) + ξ` on `]−∞, 1[`.
    ComplementEntropy,
}

impl ScalarPotential {
    pub fn validate(self) -> Result<Self> {
        let ok = match self {
            ScalarPotential::Entropy { omega } => omega.is_finite(),
            ScalarPotential::Power { p } => p.is_finite() && p >= 1.0,
            ScalarPotential::InversePower { p } => p.is_finite() && p > 0.0,
            ScalarPotential::NegPower { p } => p > 0.0 && p < 1.0,
            ScalarPotential::Quadratic { center } => center.is_finite(),
            ScalarPotential::ComplementEntropy => true,
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidOperator(format!(
                "invalid potential parameters: {self:?}"
            )))
        }
    }

    /// Open interval on which `φ'` is finite.
    pub fn derivative_interval(self) -> (f64, f64) {
        match self {
            ScalarPotential::Entropy { .. }
            | ScalarPotential::InversePower { .. }
            | ScalarPotential::NegPower { .. } => (0.0, f64::INFINITY),
            ScalarPotential::Power { .. } | ScalarPotential::Quadratic { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            ScalarPotential::ComplementEntropy => (f64::NEG_INFINITY, 1.0),
        }
    }

    /// `φ'(ξ)` (for `Power { p: 1 }` at `0`, the minimal-norm subgradient `0`).
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ScalarPotential::Entropy { omega } => x.ln() + 1.0 - omega,
            ScalarPotential::Power { p } => {
                if p == 1.0 {
                    x.signum() * if x == 0.0 { 0.0 } else { 1.0 }
                } else {
                    x.signum() * x.abs().powf(p - 1.0)
                }
            }
            ScalarPotential::InversePower { p } => -x.powf(-p - 1.0),
            ScalarPotential::NegPower { p } => -x.powf(p - 1.0),
            ScalarPotential::Quadratic { center } => x - center,
            ScalarPotential::ComplementEntropy => -(-x).ln_1p(),
        }
    }

    pub fn second_derivative(self, x: f64) -> f64 {
        match self {
            ScalarPotential::Entropy { .. } => 1.0 / x,
            ScalarPotential::Power { p } => {
                if p == 1.0 {
                    0.0
                } else {
                    (p - 1.0) * x.abs().powf(p - 2.0)
                }
            }
            ScalarPotential::InversePower { p } => (p + 1.0) * x.powf(-p - 2.0),
            ScalarPotential::NegPower { p } => (1.0 - p) * x.powf(p - 2.0),
            ScalarPotential::Quadratic { .. } => 1.0,
            ScalarPotential::ComplementEntropy => 1.0 / (1.0 - x),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorKind {
    Zero {
        dim: usize,
    },
    /// `A = ⨉ ∂φᵢ`, one potential per coordinate.
    Separable(Vec<ScalarPotential>),
    /// `A = ∇k` for a Legendre kernel `k` that must equal the resolvent kernel.
    MatchedKernel(LegendreKernel),
    /// `(ξ₁, ξ₂) ↦ (βξ₁ − ψ'(ξ₁) − ξ₂, ξ₁ + βξ₂ − ψ'(ξ₂))` with `ψ` a full-domain
    /// kernel whose derivative is β-Lipschitz; resolvent kernel `ψ ⊕ ψ`.
    Skew2x2 {
        beta: f64,
        psi: KernelKind,
    },
    /// `x ↦ Mx + q` with `M + Mᵀ ⪰ 0`.
    Affine {
        m: DMatrix<f64>,
        q: DVector<f64>,
    },
    /// Block-diagonal product of operators in declaration order.
    BlockDiagonal(Vec<MonotoneOperator>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonotoneOperator {
    kind: OperatorKind,
}

/// Pair `(a, a*)` on the graph of an operator.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphPoint {
    pub a: DVector<f64>,
    pub a_star: DVector<f64>,
}

const NEWTON_MAX_ITER: usize = 200;
const PSD_FLOOR: f64 = -1e-10;

impl MonotoneOperator {
    pub fn zero(dim: usize) -> Self {
        Self {
            kind: OperatorKind::Zero { dim },
        }
    }

    pub fn separable(potentials: Vec<ScalarPotential>) -> Result<Self> {
        if potentials.is_empty() {
            return Err(Error::InvalidOperator("separable operator needs a potential".into()));
        }
        let potentials = potentials
            .into_iter()
            .map(ScalarPotential::validate)
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            kind: OperatorKind::Separable(potentials),
        })
    }

    pub fn matched_kernel(kernel: LegendreKernel) -> Self {
        Self {
            kind: OperatorKind::MatchedKernel(kernel),
        }
    }

    pub fn skew2x2(beta: f64, psi: KernelKind) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidOperator(format!("skew2x2 needs beta > 0, got {beta}")));
        }
        let psi = psi.validate()?;
        let (lo, hi) = psi.interior_interval();
        if lo.is_finite() || hi.is_finite() {
            return Err(Error::InvalidOperator(format!(
                "skew2x2 needs a full-domain psi kernel, got {psi}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::Skew2x2 { beta, psi },
        })
    }

    /// Affine operator; rejects `M` whose symmetric part has an eigenvalue
    /// below `−1e−10`.
    pub fn affine(m: DMatrix<f64>, q: DVector<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidOperator("affine matrix must be square".into()));
        }
        check_dim("affine offset", m.nrows(), q.len())?;
        let sym = &m + m.transpose();
        let min_eig = sym
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |acc, &v| acc.min(v));
        if min_eig < PSD_FLOOR {
            return Err(Error::InvalidOperator(format!(
                "affine operator is not monotone: min eigenvalue of M + Mᵀ is {min_eig}"
            )));
        }
        Ok(Self {
            kind: OperatorKind::Affine { m, q },
        })
    }

    pub fn block_diagonal(blocks: Vec<MonotoneOperator>) -> Self {
        Self {
            kind: OperatorKind::BlockDiagonal(blocks),
        }
    }

    pub fn kind(&self) -> &OperatorKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            OperatorKind::Zero { dim } => *dim,
            OperatorKind::Separable(p) => p.len(),
            OperatorKind::MatchedKernel(k) => k.dim(),
            OperatorKind::Skew2x2 { .. } => 2,
            OperatorKind::Affine { m, .. } => m.nrows(),
            OperatorKind::BlockDiagonal(blocks) => blocks.iter().map(|b| b.dim()).sum(),
        }
    }

    /// A selection of `A a` (the operator is single-valued for every kind in
    /// the catalog except `Power { p: 1 }` at zero).
    pub fn apply(&self, a: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("operator apply", self.dim(), a.len())?;
        Ok(match &self.kind {
            OperatorKind::Zero { dim } => DVector::zeros(*dim),
            OperatorKind::Separable(p) => {
                DVector::from_iterator(p.len(), p.iter().zip(a.iter()).map(|(phi, &v)| phi.derivative(v)))
            }
            OperatorKind::MatchedKernel(k) => k.gradient(a)?,
            OperatorKind::Skew2x2 { beta, psi } => DVector::from_vec(vec![
                beta * a[0] - psi.grad(a[0]) - a[1],
                a[0] + beta * a[1] - psi.grad(a[1]),
            ]),
            OperatorKind::Affine { m, q } => linalg::matvec(m, a) + q,
            OperatorKind::BlockDiagonal(blocks) => {
                let mut out = Vec::with_capacity(a.len());
                let mut offset = 0;
                for b in blocks {
                    let part = b.apply(&linalg::segment(a, offset, b.dim()))?;
                    out.extend(part.iter());
                    offset += b.dim();
                }
                DVector::from_vec(out)
            }
        })
    }

    /// `M` and `q` when the operator is single-valued affine.
    pub fn as_affine(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let n = self.dim();
        match &self.kind {
            OperatorKind::Zero { dim } => Some((DMatrix::zeros(*dim, *dim), DVector::zeros(*dim))),
            OperatorKind::Separable(p) => {
                let mut m = DMatrix::zeros(n, n);
                let mut q = DVector::zeros(n);
                for (i, phi) in p.iter().enumerate() {
                    match phi {
                        ScalarPotential::Quadratic { center } => {
                            m[(i, i)] = 1.0;
                            q[i] = -center;
                        }
                        ScalarPotential::Power { p } if *p == 2.0 => m[(i, i)] = 1.0,
                        _ => return None,
                    }
                }
                Some((m, q))
            }
            OperatorKind::MatchedKernel(k) => {
                (k.uniform_kind() == Some(KernelKind::Energy)).then(|| (DMatrix::identity(n, n), DVector::zeros(n)))
            }
            OperatorKind::Skew2x2 { beta, psi } => (*psi == KernelKind::Energy).then(|| {
                (
                    DMatrix::from_row_slice(2, 2, &[beta - 1.0, -1.0, 1.0, beta - 1.0]),
                    DVector::zeros(2),
                )
            }),
            OperatorKind::Affine { m, q } => Some((m.clone(), q.clone())),
            OperatorKind::BlockDiagonal(blocks) => {
                let mut m = DMatrix::zeros(n, n);
                let mut q = DVector::zeros(n);
                let mut offset = 0;
                for b in blocks {
                    let (bm, bq) = b.as_affine()?;
                    let d = b.dim();
                    m.view_mut((offset, offset), (d, d)).copy_from(&bm);
                    q.rows_mut(offset, d).copy_from(&bq);
                    offset += d;
                }
                Some((m, q))
            }
        }
    }

    /// `true` for the zero operator, including zero blocks.
    pub fn contains_zero_kind(&self) -> bool {
        match &self.kind {
            OperatorKind::Zero { .. } => true,
            OperatorKind::BlockDiagonal(blocks) => blocks.iter().any(|b| b.contains_zero_kind()),
            _ => false,
        }
    }

    /// `(∇h + γA)⁻¹ r*`.
    pub fn resolvent(&self, h: &LegendreKernel, gamma: f64, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.resolvent_with(h, gamma, r, Route::ClosedForm)
    }

    /// Same as [`MonotoneOperator::resolvent`] but bypassing every closed form
    /// available for separable and matched-kernel operators.
    pub fn resolvent_newton(&self, h: &LegendreKernel, gamma: f64, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.resolvent_with(h, gamma, r, Route::Newton)
    }

    fn resolvent_with(&self, h: &LegendreKernel, gamma: f64, r: &DVector<f64>, route: Route) -> Result<DVector<f64>> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::ArgumentDomain(format!("step size must be > 0, got {gamma}")));
        }
        let n = self.dim();
        check_dim("resolvent kernel", n, h.dim())?;
        check_dim("resolvent argument", n, r.len())?;
        let a = match &self.kind {
            OperatorKind::Zero { .. } => h.conjugate_gradient(r)?,
            OperatorKind::Separable(pots) => {
                let mut out = DVector::zeros(n);
                for (i, (phi, hk)) in pots.iter().zip(h.kinds()).enumerate() {
                    out[i] = match route {
                        Route::ClosedForm => scalar_resolvent(hk, *phi, gamma, r[i])?,
                        Route::Newton => scalar_resolvent_newton(hk, *phi, gamma, r[i])?,
                    };
                }
                out
            }
            OperatorKind::MatchedKernel(k) => {
                if k != h {
                    return Err(Error::UnsupportedResolvent(format!(
                        "matched-kernel operator built on {k} evaluated with kernel {h}"
                    )));
                }
                match route {
                    Route::ClosedForm => h.conjugate_gradient(&(r / (1.0 + gamma)))?,
                    Route::Newton => {
                        let mut out = DVector::zeros(n);
                        for (i, hk) in h.kinds().enumerate() {
                            out[i] = newton_resolvent(
                                hk,
                                hk.interior_interval(),
                                &|a| (gamma * hk.grad(a), gamma * hk.hessian(a)),
                                r[i],
                            )?;
                        }
                        out
                    }
                }
            }
            OperatorKind::Skew2x2 { beta, psi } => {
                if h.uniform_kind() != Some(*psi) {
                    return Err(Error::UnsupportedResolvent(format!(
                        "skew2x2 with psi = {psi} requires kernel psi ⊕ psi, got {h}"
                    )));
                }
                skew_resolvent(*beta, *psi, gamma, r)?
            }
            OperatorKind::Affine { m, q } => affine_resolvent(m, q, h, gamma, r)?,
            OperatorKind::BlockDiagonal(blocks) => {
                let mut out = Vec::with_capacity(n);
                let mut offset = 0;
                for b in blocks {
                    let d = b.dim();
                    let part = b.resolvent_with(&h.slice(offset, d), gamma, &linalg::segment(r, offset, d), route)?;
                    out.extend(part.iter());
                    offset += d;
                }
                DVector::from_vec(out)
            }
        };
        Ok(h.clamp_interior(&a))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Route {
    ClosedForm,
    Newton,
}

fn skew_resolvent(beta: f64, psi: KernelKind, gamma: f64, r: &DVector<f64>) -> Result<DVector<f64>> {
    if gamma == 1.0 {
        let d = 1.0 + beta * beta;
        return Ok(DVector::from_vec(vec![
            (beta * r[0] + r[1]) / d,
            (beta * r[1] - r[0]) / d,
        ]));
    }
    if psi == KernelKind::Energy {
        // ∇h + γA is linear: [[c, −γ], [γ, c]] with c = 1 + γ(β − 1).
        let c = 1.0 + gamma * (beta - 1.0);
        let det = c * c + gamma * gamma;
        return Ok(DVector::from_vec(vec![
            (c * r[0] + gamma * r[1]) / det,
            (c * r[1] - gamma * r[0]) / det,
        ]));
    }
    Err(Error::UnsupportedResolvent(format!(
        "skew2x2 with psi = {psi} has a closed form only for gamma = 1"
    )))
}

fn affine_resolvent(
    m: &DMatrix<f64>,
    q: &DVector<f64>,
    h: &LegendreKernel,
    gamma: f64,
    r: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = m.nrows();
    if h.uniform_kind() == Some(KernelKind::Energy) {
        let sys = DMatrix::identity(n, n) + m * gamma;
        let rhs = r - q * gamma;
        return sys
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::InvalidOperator("I + γM is singular".into()));
    }
    let diagonal = (0..n).all(|i| (0..n).all(|j| i == j || m[(i, j)] == 0.0));
    if !diagonal {
        return Err(Error::UnsupportedResolvent(format!(
            "non-separable affine operator with non-energy kernel {h}"
        )));
    }
    let mut out = DVector::zeros(n);
    for (i, hk) in h.kinds().enumerate() {
        let (slope, offset) = (m[(i, i)], q[i]);
        out[i] = newton_resolvent(
            hk,
            (f64::NEG_INFINITY, f64::INFINITY),
            &|a| (gamma * (slope * a + offset), gamma * slope),
            r[i],
        )?;
    }
    Ok(out)
}

/// Scalar `(h' + γφ')⁻¹(r)`, closed form when registered for `(h, φ)`.
pub fn scalar_resolvent(h: KernelKind, phi: ScalarPotential, gamma: f64, r: f64) -> Result<f64> {
    match closed_form(h, phi, gamma, r)? {
        Some(v) => Ok(v),
        None => scalar_resolvent_newton(h, phi, gamma, r),
    }
}

/// Closed-form resolvents. `None` means no formula is registered.
pub fn closed_form(h: KernelKind, phi: ScalarPotential, gamma: f64, r: f64) -> Result<Option<f64>> {
    use KernelKind as K;
    use ScalarPotential as P;
    let v = match (h, phi) {
        (K::BoltzmannShannon, P::Entropy { omega }) => ((r + gamma * (omega - 1.0)) / (gamma + 1.0)).exp(),
        (K::BoltzmannShannon, P::Power { p }) => {
            if p == 1.0 {
                (r - gamma).exp()
            } else {
                let c = gamma * (p - 1.0);
                let w = lambert_w_exp(c.ln() + (p - 1.0) * r)?;
                (w / c).powf(1.0 / (p - 1.0))
            }
        }
        (K::BoltzmannShannon, P::InversePower { p }) => {
            let c = gamma * (p + 1.0);
            let w = lambert_w_exp(c.ln() - (p + 1.0) * r)?;
            (w / c).powf(-1.0 / (p + 1.0))
        }
        (K::BoltzmannShannon, P::NegPower { p }) => {
            let c = gamma * (1.0 - p);
            let w = lambert_w_exp(c.ln() + (p - 1.0) * r)?;
            (w / c).powf(1.0 / (p - 1.0))
        }
        // Root of η² + cη − c = 0 with c = e^{r+ω−1}, written cancellation-free.
        (K::FermiDirac, P::Entropy { omega }) if gamma == 1.0 => {
            let c = (r + omega - 1.0).exp();
            2.0 / (1.0 + (1.0 + 4.0 / c).sqrt())
        }
        // Smaller root of η² − (2 + d)η + 1 = 0 with d = e^{−r}.
        (K::FermiDirac, P::ComplementEntropy) if gamma == 1.0 => {
            let d = (-r).exp();
            2.0 / (2.0 + d + d * (1.0 + 4.0 / d).sqrt())
        }
        (K::Energy, P::Quadratic { center }) => (r + gamma * center) / (1.0 + gamma),
        (K::Energy, P::Power { p: 1.0 }) => r.signum() * (r.abs() - gamma).max(0.0),
        (K::Energy, P::Power { p: 2.0 }) => r / (1.0 + gamma),
        _ => return Ok(None),
    };
    Ok(Some(v))
}

/// Scalar resolvent through the safeguarded Newton solve of
/// `h'(a) + γφ'(a) = r`.
pub fn scalar_resolvent_newton(h: KernelKind, phi: ScalarPotential, gamma: f64, r: f64) -> Result<f64> {
    newton_resolvent(
        h,
        phi.derivative_interval(),
        &|a| (gamma * phi.derivative(a), gamma * phi.second_derivative(a)),
        r,
    )
}

/// Solves `h'(a) + extra(a).0 = r` on `int dom h ∩ extra_domain`, where
/// `extra` returns the monotone term and its derivative.
fn newton_resolvent(h: KernelKind, extra_domain: (f64, f64), extra: &dyn Fn(f64) -> (f64, f64), r: f64) -> Result<f64> {
    let (hl, hh) = h.interior_interval();
    let interval = (hl.max(extra_domain.0), hh.min(extra_domain.1));
    if !(interval.0 < interval.1) {
        return Err(Error::UnsupportedResolvent(format!(
            "empty domain intersection for kernel {h}"
        )));
    }
    let g = |a: f64| {
        let (v, dv) = extra(a);
        (h.grad(a) + v - r, h.hessian(a) + dv)
    };
    let start = {
        let guess = h.conj_grad(r);
        if guess > interval.0 && guess < interval.1 {
            guess
        } else {
            interior_point(interval)
        }
    };
    solve_increasing(g, interval, start, 1e-12 * (1.0 + r.abs()))
}

fn interior_point((lo, hi): (f64, f64)) -> f64 {
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => 0.5 * (lo + hi),
        (true, false) => lo + lo.abs().max(1.0),
        (false, true) => hi - hi.abs().max(1.0),
        (false, false) => 0.0,
    }
}

/// Root of a strictly increasing `g` on the open interval, which changes
/// sign inside it. Brackets outward from `start`, then runs Newton steps,
/// bisecting whenever a step leaves the bracket.
pub(crate) fn solve_increasing(
    g: impl Fn(f64) -> (f64, f64),
    (dom_lo, dom_hi): (f64, f64),
    start: f64,
    tol: f64,
) -> Result<f64> {
    let failure = || Error::NewtonFailure {
        iterations: NEWTON_MAX_ITER,
        target: tol,
    };
    let (g0, _) = g(start);
    if g0 == 0.0 || g0.abs() <= tol {
        return Ok(start);
    }
    let toward = |from: f64, k: i32, up: bool| -> f64 {
        let bound = if up { dom_hi } else { dom_lo };
        if bound.is_finite() {
            bound - (bound - from) * 0.5f64.powi(k + 1)
        } else {
            let step = from.abs().max(1.0) * 2f64.powi(k);
            if up {
                from + step
            } else {
                from - step
            }
        }
    };
    let (mut lo, mut hi);
    if g0 < 0.0 {
        lo = start;
        hi = f64::NAN;
        for k in 0..1100 {
            let cand = toward(start, k, true);
            if !(cand < dom_hi) || cand <= lo {
                break;
            }
            let (v, _) = g(cand);
            if v >= 0.0 {
                hi = cand;
                break;
            }
            lo = cand;
        }
    } else {
        hi = start;
        lo = f64::NAN;
        for k in 0..1100 {
            let cand = toward(start, k, false);
            if !(cand > dom_lo) || cand >= hi {
                break;
            }
            let (v, _) = g(cand);
            if v <= 0.0 {
                lo = cand;
                break;
            }
            hi = cand;
        }
    }
    if lo.is_nan() || hi.is_nan() {
        return Err(failure());
    }
    let x = if g0 < 0.0 { lo } else { hi };
    refine_bracketed(g, lo, hi, x, tol)
}

/// Safeguarded Newton on a bracket `g(lo) ≤ 0 ≤ g(hi)` from `x ∈ [lo, hi]`.
pub(crate) fn refine_bracketed(
    g: impl Fn(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    mut x: f64,
    tol: f64,
) -> Result<f64> {
    for _ in 0..NEWTON_MAX_ITER {
        let (v, dv) = g(x);
        if v.abs() <= tol {
            return Ok(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()) {
            return Ok(x);
        }
        // A jump of `g` at the origin (a kink in the potential): the relative
        // width test above can never fire there.
        if lo <= 0.0 && hi >= 0.0 && hi - lo <= tol {
            return Ok(x);
        }
        let newton = x - v / dv;
        x = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else if lo > 0.0 && hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else if hi < 0.0 && lo < 4.0 * hi {
            -(lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::NewtonFailure {
        iterations: NEWTON_MAX_ITER,
        target: tol,
    })
}

/// Graph point generated by one resolvent step:
/// `a = (∇h + γA)⁻¹(∇h(x) − γw*)`, `a* = γ⁻¹(∇h(x) − ∇h(a)) − w*`.
pub fn graph_point(
    op: &MonotoneOperator,
    h: &LegendreKernel,
    gamma: f64,
    x: &DVector<f64>,
    w: &DVector<f64>,
) -> Result<GraphPoint> {
    let n = op.dim();
    check_dim("graph point kernel", n, h.dim())?;
    check_dim("graph point primal", n, x.len())?;
    check_dim("graph point dual", n, w.len())?;
    if let OperatorKind::BlockDiagonal(blocks) = op.kind() {
        let mut a = Vec::with_capacity(n);
        let mut a_star = Vec::with_capacity(n);
        let mut offset = 0;
        for b in blocks {
            let d = b.dim();
            let gp = graph_point(
                b,
                &h.slice(offset, d),
                gamma,
                &linalg::segment(x, offset, d),
                &linalg::segment(w, offset, d),
            )?;
            a.extend(gp.a.iter());
            a_star.extend(gp.a_star.iter());
            offset += d;
        }
        return Ok(GraphPoint {
            a: DVector::from_vec(a),
            a_star: DVector::from_vec(a_star),
        });
    }
    let grad_x = h.gradient(x)?;
    let a = match op.kind() {
        OperatorKind::MatchedKernel(k) if k == h && h.uniform_kind() == Some(KernelKind::Hellinger) => {
            hellinger_matched(gamma, x, w)
        }
        _ => op.resolvent(h, gamma, &(&grad_x - w * gamma))?,
    };
    let grad_a = h.gradient(&a)?;
    let a_star = (grad_x - grad_a) / gamma - w;
    Ok(GraphPoint { a, a_star })
}

/// Matched Hellinger resolvent written directly in terms of `x` and the dual
/// term, avoiding the round trip through `∇h`.
fn hellinger_matched(gamma: f64, x: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let h = KernelKind::Hellinger;
    DVector::from_iterator(
        x.len(),
        x.iter().zip(w.iter()).map(|(&xi, &wi)| {
            let root = ((1.0 - xi) * (1.0 + xi)).sqrt();
            let num = xi - gamma * wi * root;
            let den = ((1.0 + gamma) * (1.0 + gamma) * root * root + num * num).sqrt();
            let v = num / den;
            if h.is_interior(v) {
                v
            } else {
                v.clamp(-1.0 + f64::EPSILON / 2.0, 1.0 - f64::EPSILON / 2.0)
            }
        }),
    )
}
