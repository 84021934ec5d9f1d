//! Shared fixtures for the benchmarks.

use bregkt_core::instances::{random_affine, InstanceGeometry};
use bregkt_core::prelude::*;
use nalgebra::DVector;

/// Arguments spread over `[1e-8, 1e8]` on a log scale.
pub fn lambert_w_args(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(-8.0 + 16.0 * i as f64 / (n - 1) as f64))
        .collect()
}

/// A point, a half-space through `(1, ..., 1)` cut by a tilted normal, and
/// the matching kernel.
pub fn halfspace_case(kind: KernelKind, dim: usize) -> (LegendreKernel, DVector<f64>, HalfSpace) {
    let kernel = LegendreKernel::new(kind, dim);
    let x = DVector::from_fn(dim, |i, _| 0.5 + 0.3 * (i % 3) as f64);
    let x = DVector::from_fn(dim, |i, _| {
        if kind == KernelKind::Hellinger {
            x[i] - 0.6
        } else {
            x[i] + 1.5
        }
    });
    let normal = DVector::from_fn(dim, |i, _| 1.0 - 0.4 * i as f64);
    let c = if kind == KernelKind::Hellinger { 0.1 } else { 1.0 };
    let offset = normal.sum() * c;
    (kernel, x, HalfSpace::new(normal, offset))
}

/// `(x0, x, y)` for a two-set projection: `y` is the projection of `x` onto
/// a half-space through a point of `H(x0, x)`.
pub fn q_case(kind: KernelKind, dim: usize) -> (LegendreKernel, DVector<f64>, DVector<f64>, DVector<f64>) {
    let kernel = LegendreKernel::new(kind, dim);
    let x0 = DVector::from_element(dim, 0.5);
    let x = DVector::from_fn(dim, |i, _| 1.0 + 0.1 * i as f64);
    let normal = DVector::from_fn(dim, |i, _| if i % 2 == 0 { 1.0 } else { -0.5 });
    let c = DVector::from_fn(dim, |i, _| 1.5 + 0.05 * i as f64);
    let h = HalfSpace::new(normal.clone(), normal.dot(&c) - 0.5);
    let y = project_halfspace(&kernel, &h, &x).expect("projection").point;
    (kernel, x0, x, y)
}

pub fn affine_problem(seed: u64, positive: bool) -> CompositeProblem {
    let geometry = if positive {
        InstanceGeometry::PositiveOrthant
    } else {
        InstanceGeometry::Euclidean
    };
    random_affine(seed, geometry).problem
}

/// `m` primal and `p` dual quadratic blocks with dense couplings.
pub fn block_problem(m: usize, p: usize) -> BlockProblem {
    let energy = |n| LegendreKernel::new(KernelKind::Energy, n);
    let quad = |n: usize, shift: f64| {
        MonotoneOperator::separable(
            (0..n)
                .map(|r| ScalarPotential::Quadratic {
                    center: shift + 0.25 * r as f64,
                })
                .collect(),
        )
        .expect("valid potentials")
    };
    let primal = (0..m)
        .map(|i| {
            PrimalBlock::new(
                quad(2, 0.5 - i as f64),
                energy(2),
                energy(2),
                DVector::from_element(2, 0.1),
            )
        })
        .collect::<Vec<_>>();
    let dual = (0..p)
        .map(|k| {
            DualBlock::new(
                quad(1, k as f64 - 0.5),
                energy(1),
                energy(1),
                DVector::from_element(1, 0.2),
            )
        })
        .collect::<Vec<_>>();
    let mut couplings = Vec::new();
    for k in 0..p {
        for i in 0..m {
            let l = nalgebra::DMatrix::from_fn(1, 2, |_, c| 0.3 * (k + i + c) as f64 - 0.4);
            couplings.push((k, i, LinearMap::new(l)));
        }
    }
    BlockProblem::new(primal, dual, couplings).expect("valid block problem")
}
