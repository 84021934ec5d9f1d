//! Bregman projections onto one half-space and onto the intersection of two.
//!
//! Both reduce to finding Lagrange multipliers in the dual: the projection of
//! `x` has the form `∇F*(∇F(x) − Σ λᵢ nᵢ)`. One constraint is a monotone 1D
//! root; two active constraints are a smooth concave 2D maximization.

use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::{check_dim, Error, Result};
use crate::kernels::LegendreKernel;
use crate::linalg;
use crate::operators::refine_bracketed;

/// `{z : ⟨z, normal⟩ ≤ offset}`.
#[derive(Clone, Debug, PartialEq)]
pub struct HalfSpace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Zero normal: the whole space when `offset ≥ 0`, empty otherwise.
    pub fn is_degenerate(&self) -> bool {
        self.normal.iter().all(|&v| v == 0.0)
    }

    pub fn is_whole_space(&self) -> bool {
        self.is_degenerate() && self.offset >= 0.0
    }

    /// `⟨z, normal⟩ − offset` (positive means violated).
    pub fn violation(&self, z: &DVector<f64>) -> f64 {
        linalg::dot(z, &self.normal) - self.offset
    }

    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        self.violation(z) <= tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActiveSet {
    None,
    First,
    Second,
    Both,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub point: DVector<f64>,
    /// One multiplier per constraint passed in (zero when inactive or skipped).
    pub multipliers: Vec<f64>,
    pub active: ActiveSet,
}

/// `H^F(x, y) = {z : ⟨z − y, ∇F(x) − ∇F(y)⟩ ≤ 0}`.
pub fn haugazeau_halfspace(kernel: &LegendreKernel, x: &DVector<f64>, y: &DVector<f64>) -> Result<HalfSpace> {
    let normal = kernel.gradient(x)? - kernel.gradient(y)?;
    let offset = linalg::dot(y, &normal);
    Ok(HalfSpace { normal, offset })
}

const FEAS_TOL: f64 = 1e-10;
const ROOT_TOL: f64 = 1e-14;

/// Normalized constraint with the scale needed to map multipliers back.
struct Unit {
    n: DVector<f64>,
    eta: f64,
    scale: f64,
}

fn normalize(h: &HalfSpace) -> Option<Unit> {
    if h.is_degenerate() {
        return None;
    }
    let scale = linalg::norm(&h.normal);
    Some(Unit {
        n: &h.normal / scale,
        eta: h.offset / scale,
        scale,
    })
}

fn feasible(u: &Unit, p: &DVector<f64>) -> bool {
    linalg::dot(p, &u.n) - u.eta <= FEAS_TOL * (1.0 + u.eta.abs())
}

/// Bregman projection `P^F_H x`.
pub fn project_halfspace(kernel: &LegendreKernel, h: &HalfSpace, x: &DVector<f64>) -> Result<ProjectionResult> {
    check_dim("half-space normal", kernel.dim(), h.normal.len())?;
    let g = kernel.gradient(x)?;
    let untouched = ProjectionResult {
        point: x.clone(),
        multipliers: vec![0.0],
        active: ActiveSet::None,
    };
    let Some(unit) = normalize(h) else {
        return if h.offset >= 0.0 {
            Ok(untouched)
        } else {
            Err(Error::Infeasible("zero normal with negative offset".into()))
        };
    };
    if h.violation(x) <= 0.0 {
        return Ok(untouched);
    }
    let lambda = single_multiplier(kernel, &g, &unit)?;
    let point = kernel.conjugate_gradient(&(&g - &unit.n * lambda))?;
    Ok(ProjectionResult {
        point,
        multipliers: vec![lambda / unit.scale],
        active: ActiveSet::First,
    })
}

/// Root `λ > 0` of `⟨∇F*(g − λn), n⟩ = η` for a unit normal, assuming the
/// constraint is violated at `λ = 0`.
fn single_multiplier(kernel: &LegendreKernel, g: &DVector<f64>, unit: &Unit) -> Result<f64> {
    // Increasing in λ: η − ⟨∇F*(g − λn), n⟩.
    let phi = |lam: f64| -> (f64, f64) {
        let s = g - &unit.n * lam;
        let p = kernel.conj_grad_unchecked(&s);
        let curv = kernel.conj_hessian_unchecked(&s);
        let mut slope = 0.0;
        for (c, n) in curv.iter().zip(unit.n.iter()) {
            slope += c * n * n;
        }
        (unit.eta - linalg::dot(&p, &unit.n), slope)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut k = 0;
    while phi(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
        k += 1;
        if k > 1100 || !hi.is_finite() {
            return Err(Error::BracketFailure(format!(
                "no multiplier up to {lo:e} reaches the half-space"
            )));
        }
    }
    refine_bracketed(phi, lo, hi, hi, ROOT_TOL * (1.0 + unit.eta.abs()))
}

/// `Q^F(x0, x, y)`: Bregman projection of `x0` onto `H^F(x0, x) ∩ H^F(x, y)`.
///
/// Candidate active sets are tried in the order ∅, {1}, {2}, {1, 2}; the first
/// one feasible with nonnegative multipliers is returned.
pub fn q_projection(
    kernel: &LegendreKernel,
    x0: &DVector<f64>,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<ProjectionResult> {
    let h1 = haugazeau_halfspace(kernel, x0, x)?;
    let h2 = haugazeau_halfspace(kernel, x, y)?;
    project_two(kernel, x0, [&h1, &h2])
}

/// Bregman projection of `x0` onto the intersection of two half-spaces.
pub fn project_two(
    kernel: &LegendreKernel,
    x0: &DVector<f64>,
    halfspaces: [&HalfSpace; 2],
) -> Result<ProjectionResult> {
    for h in halfspaces {
        check_dim("half-space normal", kernel.dim(), h.normal.len())?;
        if h.is_degenerate() && h.offset < 0.0 {
            return Err(Error::Infeasible("zero normal with negative offset".into()));
        }
    }
    let g0 = kernel.gradient(x0)?;
    let units = [normalize(halfspaces[0]), normalize(halfspaces[1])];
    let all_feasible = |p: &DVector<f64>| units.iter().flatten().all(|u| feasible(u, p));

    if all_feasible(x0) {
        return Ok(ProjectionResult {
            point: x0.clone(),
            multipliers: vec![0.0, 0.0],
            active: ActiveSet::None,
        });
    }
    for (i, active) in [(0usize, ActiveSet::First), (1, ActiveSet::Second)] {
        let Some(u) = &units[i] else { continue };
        if linalg::dot(x0, &u.n) - u.eta <= 0.0 {
            continue;
        }
        let Ok(lam) = single_multiplier(kernel, &g0, u) else {
            continue;
        };
        let p = kernel.conjugate_gradient(&(&g0 - &u.n * lam))?;
        if all_feasible(&p) {
            let mut multipliers = vec![0.0, 0.0];
            multipliers[i] = lam / u.scale;
            return Ok(ProjectionResult {
                point: p,
                multipliers,
                active,
            });
        }
    }
    if let [Some(u1), Some(u2)] = &units {
        if let Some(lam) = double_multiplier(kernel, &g0, u1, u2) {
            let p = kernel.conjugate_gradient(&(&g0 - &u1.n * lam[0] - &u2.n * lam[1]))?;
            if lam.iter().all(|&l| l >= -1e-12) && all_feasible(&p) {
                return Ok(ProjectionResult {
                    point: p,
                    multipliers: vec![lam[0].max(0.0) / u1.scale, lam[1].max(0.0) / u2.scale],
                    active: ActiveSet::Both,
                });
            }
        }
    }
    Err(Error::Infeasible(
        "no candidate active set yields a feasible KKT point".into(),
    ))
}

/// Doubly-active multipliers: minimizer of the smooth convex dual
/// `ψ(λ) = F*(g − λ₁n₁ − λ₂n₂) + λ₁η₁ + λ₂η₂` by damped Newton.
fn double_multiplier(kernel: &LegendreKernel, g: &DVector<f64>, u1: &Unit, u2: &Unit) -> Option<[f64; 2]> {
    let arg = |l: &Vector2<f64>| g - &u1.n * l[0] - &u2.n * l[1];
    let psi = |l: &Vector2<f64>| kernel.conj_value_unchecked(&arg(l)) + l[0] * u1.eta + l[1] * u2.eta;
    let tol = ROOT_TOL * 10.0 * (1.0 + u1.eta.abs() + u2.eta.abs());
    let mut lam = Vector2::zeros();
    let mut val = psi(&lam);
    for _ in 0..200 {
        let s = arg(&lam);
        let p = kernel.conj_grad_unchecked(&s);
        let c = kernel.conj_hessian_unchecked(&s);
        let grad = Vector2::new(u1.eta - linalg::dot(&p, &u1.n), u2.eta - linalg::dot(&p, &u2.n));
        if grad.amax() <= tol {
            return Some([lam[0], lam[1]]);
        }
        let (mut h11, mut h12, mut h22) = (0.0, 0.0, 0.0);
        for i in 0..c.len() {
            h11 += c[i] * u1.n[i] * u1.n[i];
            h12 += c[i] * u1.n[i] * u2.n[i];
            h22 += c[i] * u2.n[i] * u2.n[i];
        }
        let mut hess = Matrix2::new(h11, h12, h12, h22);
        let det = h11 * h22 - h12 * h12;
        if !(det > 1e-14 * h11 * h22) {
            let reg = 1e-12 * (h11 + h22).max(f64::MIN_POSITIVE);
            hess += Matrix2::identity() * reg;
        }
        let dir = hess.lu().solve(&(-grad))?;
        let slope = grad.dot(&dir);
        let gnorm = grad.amax();
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = lam + dir * t;
            if cand == lam {
                break;
            }
            let cv = psi(&cand);
            let armijo = cv <= val + 1e-4 * t * slope;
            // Near the optimum ψ is flat to rounding; fall back to the gradient.
            let flat = cv - val <= 8.0 * f64::EPSILON * val.abs().max(1.0)
                && dual_gradient(kernel, g, u1, u2, &cand).amax() < gnorm;
            if cv.is_finite() && (armijo || flat) {
                lam = cand;
                val = cv;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            return (gnorm <= 1e3 * tol).then_some([lam[0], lam[1]]);
        }
    }
    None
}

fn dual_gradient(kernel: &LegendreKernel, g: &DVector<f64>, u1: &Unit, u2: &Unit, lam: &Vector2<f64>) -> Vector2<f64> {
    let p = kernel.conj_grad_unchecked(&(g - &u1.n * lam[0] - &u2.n * lam[1]));
    Vector2::new(u1.eta - linalg::dot(&p, &u1.n), u2.eta - linalg::dot(&p, &u2.n))
}
