//! Seeded problem generators: the scalar reference problem and random affine
//! instances with a known Kuhn–Tucker line.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::kernels::{KernelKind, LegendreKernel};
use crate::operators::{LinearMap, MonotoneOperator};
use crate::solver::{CompositeProblem, PrimalDualPoint};

/// `A: x ↦ x − 1`, `B: y ↦ y`, `L = 1`, energy kernels, start `(0, 0)`.
/// Its Kuhn–Tucker set is the single point `(0.5, 0.5)`.
pub fn scalar_problem() -> CompositeProblem {
    let e = LegendreKernel::new(KernelKind::Energy, 1);
    CompositeProblem::builder()
        .a(
            MonotoneOperator::affine(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -1.0))
                .expect("monotone"),
        )
        .b(MonotoneOperator::affine(DMatrix::from_element(1, 1, 1.0), DVector::zeros(1)).expect("monotone"))
        .l(LinearMap::identity(1))
        .kernels(e.clone(), e.clone(), e.clone(), e)
        .start(DVector::zeros(1), DVector::zeros(1))
        .build()
        .expect("valid scalar problem")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InstanceGeometry {
    /// Energy kernels everywhere.
    Euclidean,
    /// `f = g* = ` Boltzmann–Shannon, `h = j = ` energy; the Kuhn–Tucker point
    /// used in the construction and the start are strictly positive.
    PositiveOrthant,
}

#[derive(Clone, Debug)]
pub struct AffineInstance {
    pub problem: CompositeProblem,
    /// A Kuhn–Tucker point used in the construction (not the projection).
    pub kt_point: PrimalDualPoint,
    /// Direction `v` such that `(x̄ + t v, ȳ*)` stays in the Kuhn–Tucker set.
    pub kt_direction: DVector<f64>,
}

/// Random affine instance with `dim 𝒳 ≤ 3`, `dim 𝒴 ≤ 2`.
///
/// `A x = M_A x + q_A` and `B y = M_B y + q_B` with `M = P(GGᵀ + S)P`, where
/// `S` is skew and `P` projects out a chosen direction, so that the
/// Kuhn–Tucker set contains a whole line through the planted point.
pub fn random_affine(seed: u64, geometry: InstanceGeometry) -> AffineInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3usize);
    let m = rng.random_range(1..=2usize);

    let l = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let v = unit(&mut rng, n);
    let lv = &l * &v;
    let m_a = planted(&mut rng, n, &v);
    let m_b = if lv.norm() > 1e-8 {
        let w = &lv / lv.norm();
        planted(&mut rng, m, &w)
    } else {
        planted_full(&mut rng, m)
    };

    let (lo, hi) = match geometry {
        InstanceGeometry::Euclidean => (-2.0, 2.0),
        InstanceGeometry::PositiveOrthant => (0.5, 2.0),
    };
    let x_bar = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    let y_bar = DVector::from_fn(m, |_, _| rng.random_range(lo..hi));
    let q_a = -(&m_a * &x_bar) - l.transpose() * &y_bar;
    let q_b = &y_bar - &m_b * (&l * &x_bar);

    let (slo, shi) = match geometry {
        InstanceGeometry::Euclidean => (-3.0, 3.0),
        InstanceGeometry::PositiveOrthant => (0.2, 3.0),
    };
    let x0 = DVector::from_fn(n, |_, _| rng.random_range(slo..shi));
    let y0 = DVector::from_fn(m, |_, _| rng.random_range(slo..shi));

    let (fk, gk) = match geometry {
        InstanceGeometry::Euclidean => (KernelKind::Energy, KernelKind::Energy),
        InstanceGeometry::PositiveOrthant => (KernelKind::BoltzmannShannon, KernelKind::BoltzmannShannon),
    };
    let problem = CompositeProblem::builder()
        .a(MonotoneOperator::affine(m_a, q_a).expect("planted operator is monotone"))
        .b(MonotoneOperator::affine(m_b, q_b).expect("planted operator is monotone"))
        .l(LinearMap::new(l))
        .kernels(
            LegendreKernel::new(fk, n),
            LegendreKernel::new(gk, m),
            LegendreKernel::new(KernelKind::Energy, n),
            LegendreKernel::new(KernelKind::Energy, m),
        )
        .start(x0, y0)
        .build()
        .expect("generated instance is valid");
    AffineInstance {
        problem,
        kt_point: PrimalDualPoint::new(x_bar, y_bar),
        kt_direction: v,
    }
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 0.1 {
            return v / norm;
        }
    }
}

/// `P(GGᵀ + S)P` with `P = I − wwᵀ`, so `M w = 0`.
fn planted(rng: &mut ChaCha8Rng, n: usize, w: &DVector<f64>) -> DMatrix<f64> {
    let p = DMatrix::identity(n, n) - w * w.transpose();
    &p * planted_full(rng, n) * &p
}

fn planted_full(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let k = DMatrix::from_fn(n, n, |_, _| rng.random_range(-0.5..0.5));
    &g * g.transpose() + (&k - k.transpose())
}
