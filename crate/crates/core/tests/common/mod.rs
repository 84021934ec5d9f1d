//! Reference computations written independently of the library code paths.
#![allow(dead_code)]

use bregkt_core::prelude::*;
use nalgebra::{DMatrix, DVector};

/// Bisection for an increasing function on `(lo, hi)`; infinite ends are
/// pushed outward until the sign changes.
pub fn bisect(g: impl Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    if lo == f64::NEG_INFINITY {
        lo = -1.0;
        while g(lo) > 0.0 {
            lo *= 2.0;
        }
    }
    if hi == f64::INFINITY {
        hi = 1.0;
        while g(hi) < 0.0 {
            hi *= 2.0;
        }
    }
    for _ in 0..2000 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// `W(t)` from `w e^w = t` by bisection.
pub fn lambert_w_bisect(t: f64) -> f64 {
    bisect(|w| w * w.exp() - t, -1.0, t.max(1.0))
}

pub fn kernel_grad(k: KernelKind, x: f64) -> f64 {
    match k {
        KernelKind::Energy => x,
        KernelKind::BoltzmannShannon => x.ln(),
        KernelKind::FermiDirac => x.ln() - (1.0 - x).ln(),
        KernelKind::Hellinger => x / (1.0 - x * x).sqrt(),
        KernelKind::PPower { p } => x.signum() * x.abs().powf(p - 1.0),
    }
}

pub fn kernel_interval(k: KernelKind) -> (f64, f64) {
    match k {
        KernelKind::Energy | KernelKind::PPower { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        KernelKind::BoltzmannShannon => (0.0, f64::INFINITY),
        KernelKind::FermiDirac => (0.0, 1.0),
        KernelKind::Hellinger => (-1.0, 1.0),
    }
}

/// A selection of `φ'`; at a kink the bisection still locates the root.
pub fn potential_derivative(phi: ScalarPotential, x: f64) -> f64 {
    match phi {
        ScalarPotential::Entropy { omega } => x.ln() + 1.0 - omega,
        ScalarPotential::Power { p } => x.signum() * x.abs().powf(p - 1.0),
        ScalarPotential::InversePower { p } => -x.powf(-p - 1.0),
        ScalarPotential::NegPower { p } => -x.powf(p - 1.0),
        ScalarPotential::Quadratic { center } => x - center,
        ScalarPotential::ComplementEntropy => -(1.0 - x).ln(),
    }
}

pub fn potential_interval(phi: ScalarPotential) -> (f64, f64) {
    match phi {
        ScalarPotential::Entropy { .. } | ScalarPotential::InversePower { .. } | ScalarPotential::NegPower { .. } => {
            (0.0, f64::INFINITY)
        }
        ScalarPotential::ComplementEntropy => (f64::NEG_INFINITY, 1.0),
        _ => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// `a` with `h'(a) + γφ'(a) = r` by bisection.
pub fn resolvent_bisect(h: KernelKind, phi: ScalarPotential, gamma: f64, r: f64) -> f64 {
    let (a, b) = kernel_interval(h);
    let (c, d) = potential_interval(phi);
    bisect(
        |x| kernel_grad(h, x) + gamma * potential_derivative(phi, x) - r,
        a.max(c),
        b.min(d),
    )
}

/// Euclidean projection of `x0` onto `{z : ⟨nᵢ, z⟩ ≤ ηᵢ}` by enumerating
/// active sets; `None` when no candidate is feasible.
pub fn qp_two(x0: &DVector<f64>, hs: [&HalfSpace; 2]) -> Option<DVector<f64>> {
    let feasible = |z: &DVector<f64>| {
        hs.iter()
            .all(|h| h.normal.dot(z) - h.offset <= 1e-10 * (1.0 + h.offset.abs()) * h.normal.norm().max(1.0))
    };
    let mut cands = vec![x0.clone()];
    for h in hs {
        let nn = h.normal.norm_squared();
        if nn > 0.0 {
            cands.push(x0 - &h.normal * ((h.normal.dot(x0) - h.offset) / nn));
        }
    }
    let n = DMatrix::from_columns(&[hs[0].normal.clone(), hs[1].normal.clone()]);
    let gram = n.transpose() * &n;
    if gram.determinant().abs() > 1e-12 * gram.norm().powi(2) {
        let rhs = n.transpose() * x0 - DVector::from_vec(vec![hs[0].offset, hs[1].offset]);
        if let Some(lam) = gram.lu().solve(&rhs) {
            if lam.iter().all(|&l| l >= 0.0) {
                cands.push(x0 - &n * lam);
            }
        }
    }
    cands
        .into_iter()
        .filter(|z| feasible(z))
        .min_by(|a, b| (a - x0).norm().total_cmp(&(b - x0).norm()))
}

/// `Z = {K z = rhs}` for affine `A` and `B`.
pub fn kt_system(p: &CompositeProblem) -> (DMatrix<f64>, DVector<f64>) {
    let (ma, qa) = p.a().as_affine().expect("affine A");
    let (mb, qb) = p.b().as_affine().expect("affine B");
    let l = p.l().matrix();
    let (n, m) = (l.ncols(), l.nrows());
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(&ma);
    k.view_mut((0, n), (n, m)).copy_from(&l.transpose());
    k.view_mut((n, 0), (m, n)).copy_from(&(-(&mb * l)));
    k.view_mut((n, n), (m, m)).copy_from(&DMatrix::identity(m, m));
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-&qa));
    rhs.rows_mut(n, m).copy_from(&qb);
    (k, rhs)
}

/// Orthonormal basis of `ker K` from the eigenvectors of `KᵀK`.
pub fn null_space(k: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let eig = (k.transpose() * k).symmetric_eigen();
    let top = eig.eigenvalues.amax().max(1.0);
    (0..k.ncols())
        .filter(|&i| eig.eigenvalues[i] <= 1e-14 * top)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Optimality certificate for `p = argmin_{z ∈ Z} D^F(z, z0)` on an affine
/// `Z = {K z = rhs}`: the KT residual of `p` and the component of
/// `∇F(p) − ∇F(z0)` along `ker K`.
pub fn affine_projection_certificate(problem: &CompositeProblem, p: &DVector<f64>) -> (f64, f64) {
    let (k, rhs) = kt_system(problem);
    let kernel = problem.product_kernel().joint();
    let z0 = problem.start().packed();
    let g = kernel.gradient(p).unwrap() - kernel.gradient(&z0).unwrap();
    let along = null_space(&k).iter().map(|v| v.dot(&g).abs()).fold(0.0, f64::max);
    ((&k * p - rhs).amax(), along)
}

/// Euclidean projection onto an affine set `{K z = rhs}`.
pub fn euclidean_affine_projection(k: &DMatrix<f64>, rhs: &DVector<f64>, z0: &DVector<f64>) -> DVector<f64> {
    let eig = (k.transpose() * k).symmetric_eigen();
    let top = eig.eigenvalues.amax().max(1.0);
    let ktr = k.transpose() * rhs;
    let mut z = z0.clone();
    for i in 0..k.ncols() {
        let v = eig.eigenvectors.column(i);
        let lam = eig.eigenvalues[i];
        if lam > 1e-14 * top {
            // Replace the range component of z0 with the least-squares solution.
            z += v * (v.dot(&ktr) / lam - v.dot(z0));
        }
    }
    z
}

pub struct Lcg(pub u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn point(k: KernelKind, dim: usize, rng: &mut Lcg) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| match k {
        KernelKind::Energy => 4.0 * rng.next() - 2.0,
        KernelKind::BoltzmannShannon => 0.1 + 3.0 * rng.next(),
        _ => 1.6 * rng.next() - 0.8,
    })
}

/// A point and a half-space through another interior point.
pub fn random_halfspace(k: KernelKind, dim: usize, seed: u64) -> (LegendreKernel, DVector<f64>, HalfSpace) {
    let mut rng = Lcg(seed);
    let kern = LegendreKernel::new(k, dim);
    let x = point(k, dim, &mut rng);
    let c = point(k, dim, &mut rng);
    let n = DVector::from_fn(dim, |_, _| 2.0 * rng.next() - 1.0);
    let offset = n.dot(&c);
    (kern, x, HalfSpace::new(n, offset))
}

/// `(x0, x, y)` as produced by the outer loop: `y` is the projection of `x`
/// onto a half-space containing a point `c` that also lies in
/// `H(x0, x)`.
pub type QInstance = (LegendreKernel, DVector<f64>, DVector<f64>, DVector<f64>);

pub fn random_q_instance(k: KernelKind, dim: usize, seed: u64) -> Option<QInstance> {
    let mut rng = Lcg(seed);
    let kern = LegendreKernel::new(k, dim);
    let x0 = point(k, dim, &mut rng);
    let x = point(k, dim, &mut rng);
    let c = point(k, dim, &mut rng);
    if !haugazeau_halfspace(&kern, &x0, &x).ok()?.contains(&c, 0.0) {
        return None;
    }
    let n = DVector::from_fn(dim, |_, _| 2.0 * rng.next() - 1.0);
    let h = HalfSpace::new(n.clone(), n.dot(&c));
    let y = project_halfspace(&kern, &h, &x).ok()?.point;
    Some((kern, x0, x, y))
}
