//! Reference computations used to validate the solver: the Kuhn–Tucker set
//! of an affine instance by dense linear algebra, and the best Bregman
//! approximation from an affine or polyhedral set by direct minimization.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::HalfSpace;
use crate::kernels::LegendreKernel;
use crate::solver::{CompositeProblem, PrimalDualPoint};

/// A description of the Kuhn–Tucker set in the packed space `(x, y*)`.
#[derive(Clone, Debug, PartialEq)]
pub enum KtDescription {
    Point(DVector<f64>),
    /// `{particular + basis · t}`; the basis columns are orthonormal.
    Affine {
        particular: DVector<f64>,
        basis: DMatrix<f64>,
    },
    Polyhedron {
        inequalities: Vec<HalfSpace>,
    },
}

impl KtDescription {
    pub fn contains(&self, z: &DVector<f64>, tol: f64) -> bool {
        match self {
            KtDescription::Point(p) => (z - p).amax() <= tol,
            KtDescription::Affine { particular, basis } => {
                let d = z - particular;
                let proj = basis * (basis.transpose() * &d);
                (d - proj).amax() <= tol
            }
            KtDescription::Polyhedron { inequalities } => inequalities.iter().all(|h| h.violation(z) <= tol),
        }
    }
}

/// Relative eigenvalue cutoff on `kᵀk` (singular values below `1e-7 σ_max`).
const RANK_TOL: f64 = 1e-14;

/// Both operators as `(M, q)`; `B` must not contain zero blocks.
fn affine_parts(problem: &CompositeProblem) -> Result<[(DMatrix<f64>, DVector<f64>); 2]> {
    if problem.b().contains_zero_kind() {
        return Err(Error::UnsupportedOracle(
            "B = 0 has a set-valued inverse; not handled by the affine oracle".into(),
        ));
    }
    let a = problem
        .a()
        .as_affine()
        .ok_or_else(|| Error::UnsupportedOracle("A is not single-valued affine".into()))?;
    let b = problem
        .b()
        .as_affine()
        .ok_or_else(|| Error::UnsupportedOracle("B is not single-valued affine".into()))?;
    Ok([a, b])
}

/// `Z` for `A x = M_A x + q_A`, `B y = M_B y + q_B`:
/// `M_A x + q_A + L*y* = 0` and `y* = M_B L x + q_B`, solved as one dense
/// least-squares system.
pub fn kt_set_affine(problem: &CompositeProblem) -> Result<KtDescription> {
    let [(ma, qa), (mb, qb)] = affine_parts(problem)?;
    let l = problem.l().matrix();
    let (n, m) = (l.ncols(), l.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&ma);
    k.view_mut((0, n), (n, m)).copy_from(&l.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(&(-(&mb * l)));
    k.view_mut((n, n), (m, m)).copy_from(&DMatrix::identity(m, m));
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&qa));
    rhs.rows_mut(n, m).copy_from(&qb);

    let (particular, _, null_cols) = least_squares(&k, &rhs);
    let residual = (&k * &particular - &rhs).norm();
    if residual > 1e-9 * (1.0 + rhs.norm()) {
        return Err(Error::EmptyKtSet);
    }
    if null_cols.is_empty() {
        Ok(KtDescription::Point(particular))
    } else {
        Ok(KtDescription::Affine {
            particular,
            basis: DMatrix::from_columns(&null_cols),
        })
    }
}

/// Minimum-norm least-squares solution of `k z = rhs` with orthonormal bases
/// of the row space and the null space of `k`.
///
/// Uses the symmetric eigendecomposition of `kᵀk`; the dense SVD in nalgebra
/// can return an inaccurate factorization for rank-deficient inputs.
fn least_squares(k: &DMatrix<f64>, rhs: &DVector<f64>) -> (DVector<f64>, Vec<DVector<f64>>, Vec<DVector<f64>>) {
    let d = k.ncols();
    let gram = k.transpose() * k;
    let eig = gram.symmetric_eigen();
    let lmax = eig.eigenvalues.amax();
    let cutoff = RANK_TOL * lmax.max(1.0);
    let ktr = k.transpose() * rhs;
    let mut particular = DVector::zeros(d);
    let (mut range, mut null) = (Vec::new(), Vec::new());
    for i in 0..d {
        let v = eig.eigenvectors.column(i).into_owned();
        let lam = eig.eigenvalues[i];
        if lam > cutoff {
            particular += &v * (v.dot(&ktr) / lam);
            range.push(v);
        } else {
            null.push(v);
        }
    }
    (particular, range, null)
}

/// `‖M_A x + q_A + L*y*‖ + ‖y* − (M_B L x + q_B)‖` for affine instances.
pub fn kt_inclusion_residual(problem: &CompositeProblem, p: &PrimalDualPoint) -> Result<f64> {
    let [(ma, qa), (mb, qb)] = affine_parts(problem)?;
    let l = problem.l().matrix();
    let r1 = &ma * &p.x + &qa + l.transpose() * &p.y;
    let r2 = &p.y - (&mb * (l * &p.x) + &qb);
    Ok(r1.norm() + r2.norm())
}

const RESTARTS: usize = 10;
const OPT_TOL: f64 = 1e-9;

/// `argmin { D^F(z, z0) : z ∈ Z }` by direct minimization.
///
/// Affine sets are parametrized by their basis; the reduced objective is
/// minimized by damped Newton with interior-preserving backtracking from ten
/// seeded starts, keeping the best. Polyhedra are handled by enumerating
/// active subsets. Fails with `OracleNonConvergence` when the best candidate
/// does not reach a first-order residual of `1e−9`.
pub fn best_approx_bruteforce(kernel: &LegendreKernel, set: &KtDescription, z0: &DVector<f64>) -> Result<DVector<f64>> {
    match set {
        KtDescription::Point(p) => Ok(p.clone()),
        KtDescription::Affine { particular, basis } => affine_minimizer(kernel, particular, basis, z0).map(|(z, _)| z),
        KtDescription::Polyhedron { inequalities } => polyhedral_minimizer(kernel, inequalities, z0),
    }
}

fn affine_minimizer(
    kernel: &LegendreKernel,
    particular: &DVector<f64>,
    basis: &DMatrix<f64>,
    z0: &DVector<f64>,
) -> Result<(DVector<f64>, f64)> {
    let k = basis.ncols();
    let g0 = kernel.gradient(z0)?;
    if k == 0 {
        let d = kernel.bregman_distance(particular, z0)?.to_f64();
        return Ok((particular.clone(), d));
    }
    let point = |t: &DVector<f64>| particular + basis * t;
    let objective = |t: &DVector<f64>| -> f64 {
        let z = point(t);
        if !kernel.is_interior(&z) {
            return f64::INFINITY;
        }
        kernel
            .bregman_distance(&z, z0)
            .map(|v| v.to_f64())
            .unwrap_or(f64::INFINITY)
    };
    let reduced_grad = |t: &DVector<f64>| -> Result<DVector<f64>> {
        let z = point(t);
        Ok(basis.transpose() * (kernel.gradient(&z)? - &g0))
    };

    let t_feas = interior_parameter(kernel, particular, basis)
        .ok_or_else(|| Error::OracleNonConvergence("affine set misses the interior of dom F".into()))?;
    let scale = 1.0 + g0.amax();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut best: Option<(DVector<f64>, f64, f64)> = None;
    for restart in 0..RESTARTS {
        let mut t = t_feas.clone();
        if restart > 0 {
            let mut pert = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
            while !objective(&(&t + &pert)).is_finite() {
                pert /= 2.0;
            }
            t += pert;
        }
        let mut val = objective(&t);
        for _ in 0..500 {
            let g = reduced_grad(&t)?;
            if g.amax() <= 1e-3 * OPT_TOL * scale {
                break;
            }
            let z = point(&t);
            let hdiag = kernel.hessian_diag(&z)?;
            let hess = basis.transpose() * DMatrix::from_diagonal(&hdiag) * basis;
            let dir = match hess.clone().cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => -&g,
            };
            let slope = g.dot(&dir);
            let gnorm = g.amax();
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let cand = &t + &dir * alpha;
                if cand == t {
                    break;
                }
                let cv = objective(&cand);
                let armijo = cv <= val + 1e-4 * alpha * slope;
                // Flat to rounding near the optimum: accept on gradient decrease.
                let flat = cv.is_finite()
                    && cv - val <= 8.0 * f64::EPSILON * val.abs().max(1.0)
                    && reduced_grad(&cand)?.amax() < gnorm;
                if cv.is_finite() && (armijo || flat) {
                    t = cand;
                    val = cv;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let res = reduced_grad(&t)?.amax();
        let better = match &best {
            None => true,
            Some((_, bv, bres)) => val < *bv || (val == *bv && res < *bres),
        };
        if better {
            best = Some((t, val, res));
        }
    }
    let (t, val, res) = best.expect("at least one restart");
    if res > OPT_TOL * scale {
        return Err(Error::OracleNonConvergence(format!(
            "first-order residual {res:e} above {OPT_TOL:e}"
        )));
    }
    Ok((point(&t), val))
}

/// Parameter `t` with `particular + basis·t` strictly inside `dom F`.
///
/// Minimizes the squared margin violation `Σ max(0, lo + τ − z, z − hi + τ)²`
/// by Gauss–Newton for a decreasing sequence of margins `τ`.
fn interior_parameter(
    kernel: &LegendreKernel,
    particular: &DVector<f64>,
    basis: &DMatrix<f64>,
) -> Option<DVector<f64>> {
    let k = basis.ncols();
    let bounds: Vec<(f64, f64)> = kernel.kinds().map(|kk| kk.interior_interval()).collect();
    let zero = DVector::zeros(k);
    if kernel.is_interior(&(particular + basis * &zero)) {
        return Some(zero);
    }
    for tau in [1e-1, 1e-3, 1e-6, 1e-9] {
        let mut t = DVector::zeros(k);
        for _ in 0..200 {
            let z = particular + basis * &t;
            let mut rows = Vec::new();
            let mut res = Vec::new();
            for (i, &(lo, hi)) in bounds.iter().enumerate() {
                if lo.is_finite() && z[i] < lo + tau {
                    rows.push(-basis.row(i).transpose());
                    res.push(lo + tau - z[i]);
                }
                if hi.is_finite() && z[i] > hi - tau {
                    rows.push(basis.row(i).transpose());
                    res.push(z[i] - (hi - tau));
                }
            }
            if rows.is_empty() {
                return Some(t);
            }
            let j = DMatrix::from_columns(&rows).transpose();
            let r = DVector::from_vec(res);
            let jtj = j.transpose() * &j + DMatrix::identity(k, k) * 1e-12;
            let step = jtj.lu().solve(&(j.transpose() * &r))?;
            if step.amax() < 1e-15 {
                break;
            }
            t -= step;
        }
    }
    None
}

fn polyhedral_minimizer(
    kernel: &LegendreKernel,
    inequalities: &[HalfSpace],
    z0: &DVector<f64>,
) -> Result<DVector<f64>> {
    let count = inequalities.len();
    if count > 10 {
        return Err(Error::UnsupportedOracle("more than 10 inequalities".into()));
    }
    let d = z0.len();
    if inequalities.iter().any(|h| h.is_degenerate() && h.offset < 0.0) {
        return Err(Error::EmptyKtSet);
    }
    // Unit normals, so that feasibility is measured as a distance.
    let unit: Vec<HalfSpace> = inequalities
        .iter()
        .filter_map(|h| {
            let norm = h.normal.norm();
            (norm > 0.0).then(|| HalfSpace::new(&h.normal / norm, h.offset / norm))
        })
        .collect();
    let count = unit.len();
    let inequalities = &unit[..];
    let feasible = |z: &DVector<f64>| inequalities.iter().all(|h| h.violation(z) <= 1e-9 * (1.0 + z.amax()));
    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << count) {
        let active: Vec<&HalfSpace> = (0..count)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| &inequalities[i])
            .collect();
        let candidate = if active.is_empty() {
            Some((z0.clone(), 0.0))
        } else {
            let n = DMatrix::from_columns(&active.iter().map(|h| h.normal.clone()).collect::<Vec<_>>()).transpose();
            let eta = DVector::from_iterator(active.len(), active.iter().map(|h| h.offset));
            equality_set(&n, &eta, d).and_then(|(p, basis)| affine_minimizer(kernel, &p, &basis, z0).ok())
        };
        if let Some((z, val)) = candidate {
            if feasible(&z) && best.as_ref().is_none_or(|(_, bv)| val < *bv) {
                best = Some((z, val));
            }
        }
    }
    best.map(|(z, _)| z)
        .ok_or_else(|| Error::OracleNonConvergence("no feasible active subset".into()))
}

/// `{z : N z = η}` as particular solution plus orthonormal null-space basis;
/// `None` when inconsistent.
fn equality_set(n: &DMatrix<f64>, eta: &DVector<f64>, d: usize) -> Option<(DVector<f64>, DMatrix<f64>)> {
    let (p, rank_rows, _) = least_squares(n, eta);
    if (n * &p - eta).norm() > 1e-9 * (1.0 + eta.norm()) {
        return None;
    }
    // Orthonormal complement of the row space.
    let full = DMatrix::<f64>::identity(d, d);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for c in 0..d {
        let mut v = full.column(c).into_owned();
        for r in rank_rows.iter().chain(basis.iter()) {
            let proj = r.dot(&v);
            v -= r * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v / norm);
        }
    }
    let basis = if basis.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&basis)
    };
    Some((p, basis))
}
