//! Sequential dense kernels.
//!
//! Every reduction accumulates left to right with a single accumulator so
//! that the assembled product-space iteration and its per-block
//! factorization perform bit-identical arithmetic.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub fn norm(a: &DVector<f64>) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &DVector<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `m · x`, rows accumulated in column order.
pub fn matvec(m: &DMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(m.ncols(), x.len());
    DVector::from_fn(m.nrows(), |r, _| {
        let mut acc = 0.0;
        for c in 0..m.ncols() {
            acc += m[(r, c)] * x[c];
        }
        acc
    })
}

/// `mᵀ · y`, columns accumulated in row order.
pub fn matvec_t(m: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    debug_assert_eq!(m.nrows(), y.len());
    DVector::from_fn(m.ncols(), |c, _| {
        let mut acc = 0.0;
        for r in 0..m.nrows() {
            acc += m[(r, c)] * y[r];
        }
        acc
    })
}

/// `acc += m · x`, continuing each row's running sum.
pub fn matvec_acc(m: &DMatrix<f64>, x: &DVector<f64>, acc: &mut DVector<f64>) {
    debug_assert_eq!(m.ncols(), x.len());
    debug_assert_eq!(m.nrows(), acc.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            acc[r] += m[(r, c)] * x[c];
        }
    }
}

/// `acc += mᵀ · y`, continuing each column's running sum.
pub fn matvec_t_acc(m: &DMatrix<f64>, y: &DVector<f64>, acc: &mut DVector<f64>) {
    debug_assert_eq!(m.nrows(), y.len());
    debug_assert_eq!(m.ncols(), acc.len());
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            acc[c] += m[(r, c)] * y[r];
        }
    }
}

/// Continues the running sum `acc + ⟨a, b⟩`.
pub fn dot_acc(a: &DVector<f64>, b: &DVector<f64>, mut acc: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b.iter()) {
        acc += x * y;
    }
    acc
}

pub fn concat(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

pub fn segment(v: &DVector<f64>, start: usize, len: usize) -> DVector<f64> {
    DVector::from_iterator(len, v.iter().skip(start).take(len).copied())
}
