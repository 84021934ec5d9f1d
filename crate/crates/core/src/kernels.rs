//! Legendre kernels on ℝᵐ.
//!
//! A [`LegendreKernel`] is a coordinate-separable sum of scalar Legendre
//! functions drawn from a small catalog ([`KernelKind`]). Concatenating
//! kernels gives block-sum kernels, which is how product spaces
//! (`f(x) + g*(y*)`, or the per-block sums of structured problems) are built.
//!
//! Gradients and conjugate gradients are closed-form per kind; conjugate
//! gradients always land strictly inside the domain (results that would
//! round onto the boundary are nudged to the nearest interior float).

use std::fmt;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Extended real number `]−∞, +∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    PosInf,
}

impl ExtReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::PosInf => None,
        }
    }

    /// Finite value, or `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

impl std::ops::Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        match (self, rhs) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a + b),
            _ => ExtReal::PosInf,
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInf => write!(f, "+inf"),
        }
    }
}

/// Bregman distances are nonnegative extended reals; `PosInf` exactly when
/// the second argument leaves the interior of the domain or the first leaves
/// the domain.
pub type BregmanValue = ExtReal;

/// Scalar Legendre functions of the catalog.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelKind {
    /// `ξ²/2` on ℝ.
    Energy,
    /// `ξ ln ξ − ξ` on `]0, ∞[`, `0` at `ξ = 0`.
    BoltzmannShannon,
    /// `ξ ln ξ + (1 − ξ) ln(1 − ξ)` on `]0, 1[`, `0` at `{0, 1}`.
    FermiDirac,
    /// `−√(1 − ξ²)` on `[−1, 1]`.
    Hellinger,
    /// `|ξ|^p / p` on ℝ, `p > 1`.
    PPower { p: f64 },
}

const ONE_BELOW: f64 = 1.0 - f64::EPSILON / 2.0;

impl KernelKind {
    pub fn validate(self) -> Result<Self> {
        if let KernelKind::PPower { p } = self {
            if !(p.is_finite() && p > 1.0) {
                return Err(Error::InvalidKernel(format!(
                    "p_power exponent must lie in (1, inf), got {p}"
                )));
            }
        }
        Ok(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Energy => "energy",
            KernelKind::BoltzmannShannon => "boltzmann_shannon",
            KernelKind::FermiDirac => "fermi_dirac",
            KernelKind::Hellinger => "hellinger",
            KernelKind::PPower { .. } => "p_power",
        }
    }

    /// Open interval `int dom`.
    pub fn interior_interval(self) -> (f64, f64) {
        match self {
            KernelKind::Energy | KernelKind::PPower { .. } => (f64::NEG_INFINITY, f64::INFINITY),
            KernelKind::BoltzmannShannon => (0.0, f64::INFINITY),
            KernelKind::FermiDirac => (0.0, 1.0),
            KernelKind::Hellinger => (-1.0, 1.0),
        }
    }

    pub fn is_interior(self, x: f64) -> bool {
        let (lo, hi) = self.interior_interval();
        x.is_finite() && x > lo && x < hi
    }

    pub fn value(self, x: f64) -> ExtReal {
        if x.is_nan() {
            return ExtReal::PosInf;
        }
        match self {
            KernelKind::Energy => finite_or_inf(0.5 * x * x),
            KernelKind::BoltzmannShannon => {
                if x > 0.0 {
                    finite_or_inf(x * x.ln() - x)
                } else if x == 0.0 {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
            KernelKind::FermiDirac => {
                if x > 0.0 && x < 1.0 {
                    ExtReal::Finite(x * x.ln() + (1.0 - x) * (-x).ln_1p())
                } else if x == 0.0 || x == 1.0 {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::PosInf
                }
            }
            KernelKind::Hellinger => {
                if (-1.0..=1.0).contains(&x) {
                    ExtReal::Finite(-((1.0 - x) * (1.0 + x)).sqrt())
                } else {
                    ExtReal::PosInf
                }
            }
            KernelKind::PPower { p } => finite_or_inf(x.abs().powf(p) / p),
        }
    }

    /// Derivative at an interior point (caller checks interiority).
    pub fn grad(self, x: f64) -> f64 {
        match self {
            KernelKind::Energy => x,
            KernelKind::BoltzmannShannon => x.ln(),
            KernelKind::FermiDirac => x.ln() - (-x).ln_1p(),
            KernelKind::Hellinger => x / ((1.0 - x) * (1.0 + x)).sqrt(),
            KernelKind::PPower { p } => x.signum() * x.abs().powf(p - 1.0),
        }
    }

    pub fn hessian(self, x: f64) -> f64 {
        match self {
            KernelKind::Energy => 1.0,
            KernelKind::BoltzmannShannon => 1.0 / x,
            KernelKind::FermiDirac => 1.0 / (x * (1.0 - x)),
            KernelKind::Hellinger => ((1.0 - x) * (1.0 + x)).powf(-1.5),
            KernelKind::PPower { p } => (p - 1.0) * x.abs().powf(p - 2.0),
        }
    }

    /// `(f*)'(s)`, the inverse of [`KernelKind::grad`], kept interior.
    pub fn conj_grad(self, s: f64) -> f64 {
        let raw = match self {
            KernelKind::Energy => s,
            KernelKind::BoltzmannShannon => s.exp(),
            KernelKind::FermiDirac => logistic(s),
            KernelKind::Hellinger => {
                if s.abs() > 1.0 {
                    s.signum() / (1.0 + 1.0 / (s * s)).sqrt()
                } else {
                    s / (1.0 + s * s).sqrt()
                }
            }
            KernelKind::PPower { p } => s.signum() * s.abs().powf(1.0 / (p - 1.0)),
        };
        self.clamp_interior(raw)
    }

    /// `f*(s)`.
    pub fn conj_value(self, s: f64) -> f64 {
        match self {
            KernelKind::Energy => 0.5 * s * s,
            KernelKind::BoltzmannShannon => s.exp(),
            KernelKind::FermiDirac => softplus(s),
            KernelKind::Hellinger => s.hypot(1.0),
            KernelKind::PPower { p } => {
                let q = p / (p - 1.0);
                s.abs().powf(q) / q
            }
        }
    }

    /// `(f*)''(s)`.
    pub fn conj_hessian(self, s: f64) -> f64 {
        match self {
            KernelKind::Energy => 1.0,
            KernelKind::BoltzmannShannon => s.exp(),
            KernelKind::FermiDirac => {
                let t = logistic(s);
                t * (1.0 - t)
            }
            KernelKind::Hellinger => (1.0 + s * s).powf(-1.5),
            KernelKind::PPower { p } => {
                let e = 1.0 / (p - 1.0);
                e * s.abs().powf(e - 1.0)
            }
        }
    }

    /// Scalar Bregman distance `f(x) − f(y) − (x − y) f'(y)` for interior `y`,
    /// evaluated in a cancellation-free form where one exists.
    fn distance(self, x: f64, y: f64) -> ExtReal {
        if !self.is_interior(y) {
            return ExtReal::PosInf;
        }
        let fx = self.value(x);
        let Some(fx) = fx.finite() else {
            return ExtReal::PosInf;
        };
        let d = match self {
            KernelKind::Energy => 0.5 * (x - y) * (x - y),
            KernelKind::BoltzmannShannon => {
                if x == 0.0 {
                    y
                } else {
                    x * (x / y).ln() - x + y
                }
            }
            KernelKind::FermiDirac => {
                let left = if x == 0.0 { 0.0 } else { x * (x / y).ln() };
                let right = if x == 1.0 {
                    0.0
                } else {
                    (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln()
                };
                left + right
            }
            _ => {
                let fy = self.value(y).to_f64();
                fx - fy - (x - y) * self.grad(y)
            }
        };
        finite_or_inf(d.max(0.0))
    }

    fn clamp_interior(self, v: f64) -> f64 {
        match self {
            KernelKind::Energy | KernelKind::PPower { .. } => v.clamp(-f64::MAX, f64::MAX),
            KernelKind::BoltzmannShannon => v.clamp(f64::MIN_POSITIVE, f64::MAX),
            KernelKind::FermiDirac => v.clamp(f64::MIN_POSITIVE, ONE_BELOW),
            KernelKind::Hellinger => v.clamp(-ONE_BELOW, ONE_BELOW),
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelKind::PPower { p } => write!(f, "p_power(p={p})"),
            other => f.write_str(other.name()),
        }
    }
}

fn finite_or_inf(v: f64) -> ExtReal {
    if v.is_finite() {
        ExtReal::Finite(v)
    } else {
        ExtReal::PosInf
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
struct Segment {
    kind: KernelKind,
    len: usize,
}

/// Separable Legendre function on ℝᵈ, stored as runs of identical kinds.
#[derive(Clone, Debug, PartialEq)]
pub struct LegendreKernel {
    segments: Vec<Segment>,
    dim: usize,
}

impl LegendreKernel {
    /// # Panics
    /// If `kind` carries an invalid parameter; use [`LegendreKernel::try_new`]
    /// for untrusted input.
    pub fn new(kind: KernelKind, dim: usize) -> Self {
        Self::try_new(kind, dim).expect("invalid kernel")
    }

    pub fn try_new(kind: KernelKind, dim: usize) -> Result<Self> {
        let kind = kind.validate()?;
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        Ok(Self {
            segments: vec![Segment { kind, len: dim }],
            dim,
        })
    }

    /// Block-sum kernel `x ↦ ∑ kᵢ(xᵢ)` in the given order.
    pub fn concat<'a, I>(parts: I) -> Self
    where
        I: IntoIterator<Item = &'a LegendreKernel>,
    {
        let mut out = Self {
            segments: Vec::new(),
            dim: 0,
        };
        for kernel in parts {
            for seg in &kernel.segments {
                out.push(*seg);
            }
        }
        out
    }

    fn push(&mut self, seg: Segment) {
        if seg.len == 0 {
            return;
        }
        self.dim += seg.len;
        match self.segments.last_mut() {
            Some(last) if last.kind == seg.kind => last.len += seg.len,
            _ => self.segments.push(seg),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The kind acting on coordinate `i`.
    pub fn kind_at(&self, i: usize) -> KernelKind {
        let mut offset = 0;
        for seg in &self.segments {
            if i < offset + seg.len {
                return seg.kind;
            }
            offset += seg.len;
        }
        panic!("coordinate {i} out of range for kernel of dimension {}", self.dim)
    }

    /// `Some(kind)` when every coordinate uses the same kind.
    pub fn uniform_kind(&self) -> Option<KernelKind> {
        match self.segments.as_slice() {
            [only] => Some(only.kind),
            _ => None,
        }
    }

    pub fn kinds(&self) -> impl Iterator<Item = KernelKind> + '_ {
        self.segments.iter().flat_map(|s| std::iter::repeat_n(s.kind, s.len))
    }

    /// Kernel restricted to coordinates `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Self {
        let mut out = Self {
            segments: Vec::new(),
            dim: 0,
        };
        let end = start + len;
        let mut offset = 0;
        for seg in &self.segments {
            let lo = offset.max(start);
            let hi = (offset + seg.len).min(end);
            if lo < hi {
                out.push(Segment {
                    kind: seg.kind,
                    len: hi - lo,
                });
            }
            offset += seg.len;
        }
        assert_eq!(out.dim, len, "slice out of range");
        out
    }

    /// `true` when `int dom other ⊆ int dom self`, coordinate by coordinate.
    pub fn interior_contains(&self, other: &LegendreKernel) -> bool {
        self.dim == other.dim
            && self.kinds().zip(other.kinds()).all(|(mine, theirs)| {
                let (a, b) = mine.interior_interval();
                let (c, d) = theirs.interior_interval();
                a <= c && d <= b
            })
    }

    /// `true` when the interior is all of ℝᵈ.
    pub fn is_full_domain(&self) -> bool {
        self.kinds().all(|k| {
            let (lo, hi) = k.interior_interval();
            lo.is_infinite() && hi.is_infinite()
        })
    }

    pub fn is_interior(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim && self.kinds().zip(x.iter()).all(|(k, &v)| k.is_interior(v))
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<ExtReal> {
        check_dim("kernel value", self.dim, x.len())?;
        Ok(self
            .kinds()
            .zip(x.iter())
            .fold(ExtReal::Finite(0.0), |acc, (k, &v)| acc + k.value(v)))
    }

    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("kernel gradient", self.dim, x.len())?;
        self.ensure_interior(x)?;
        Ok(self.map(x, KernelKind::grad))
    }

    pub fn hessian_diag(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("kernel hessian", self.dim, x.len())?;
        self.ensure_interior(x)?;
        Ok(self.map(x, KernelKind::hessian))
    }

    pub fn conjugate_gradient(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("conjugate gradient", self.dim, s.len())?;
        Ok(self.map(s, KernelKind::conj_grad))
    }

    pub fn conjugate_value(&self, s: &DVector<f64>) -> Result<f64> {
        check_dim("conjugate value", self.dim, s.len())?;
        let mut acc = 0.0;
        for (k, &v) in self.kinds().zip(s.iter()) {
            acc += k.conj_value(v);
        }
        Ok(acc)
    }

    pub fn conjugate_hessian_diag(&self, s: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("conjugate hessian", self.dim, s.len())?;
        Ok(self.map(s, KernelKind::conj_hessian))
    }

    /// `D(x, y) = f(x) − f(y) − ⟨x − y, ∇f(y)⟩`.
    pub fn bregman_distance(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<BregmanValue> {
        check_dim("bregman distance", self.dim, x.len())?;
        check_dim("bregman distance", self.dim, y.len())?;
        let mut acc = ExtReal::Finite(0.0);
        for ((k, &a), &b) in self.kinds().zip(x.iter()).zip(y.iter()) {
            acc = acc + k.distance(a, b);
        }
        Ok(acc)
    }

    /// Nearest interior point coordinate-wise (only moves points that sit on
    /// or beyond the boundary).
    pub fn clamp_interior(&self, x: &DVector<f64>) -> DVector<f64> {
        self.map(x, |k, v| if k.is_interior(v) { v } else { k.clamp_interior(v) })
    }

    pub(crate) fn conj_grad_unchecked(&self, s: &DVector<f64>) -> DVector<f64> {
        self.map(s, KernelKind::conj_grad)
    }

    pub(crate) fn conj_hessian_unchecked(&self, s: &DVector<f64>) -> DVector<f64> {
        self.map(s, KernelKind::conj_hessian)
    }

    pub(crate) fn conj_value_unchecked(&self, s: &DVector<f64>) -> f64 {
        let mut acc = 0.0;
        for (k, &v) in self.kinds().zip(s.iter()) {
            acc += k.conj_value(v);
        }
        acc
    }

    fn ensure_interior(&self, x: &DVector<f64>) -> Result<()> {
        for (i, (k, &v)) in self.kinds().zip(x.iter()).enumerate() {
            if !k.is_interior(v) {
                return Err(Error::DomainViolation(format!(
                    "coordinate {i} = {v} is not interior to dom {k}"
                )));
            }
        }
        Ok(())
    }

    fn map(&self, x: &DVector<f64>, f: impl Fn(KernelKind, f64) -> f64) -> DVector<f64> {
        DVector::from_iterator(self.dim, self.kinds().zip(x.iter()).map(|(k, &v)| f(k, v)))
    }
}

impl fmt::Display for LegendreKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.segments.iter().map(|s| format!("{}^{}", s.kind, s.len)).collect();
        f.write_str(&parts.join(" + "))
    }
}

/// `F(x, y*) = f(x) + g*(y*)` on the primal–dual product space, with the
/// pair packed as `[x; y*]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductKernel {
    primal: LegendreKernel,
    dual: LegendreKernel,
    joint: LegendreKernel,
}

impl ProductKernel {
    /// `dual` is the kernel whose value and gradient are those of `g*`.
    pub fn new(primal: LegendreKernel, dual: LegendreKernel) -> Self {
        let joint = LegendreKernel::concat([&primal, &dual]);
        Self { primal, dual, joint }
    }

    pub fn primal(&self) -> &LegendreKernel {
        &self.primal
    }

    pub fn dual(&self) -> &LegendreKernel {
        &self.dual
    }

    /// The packed kernel acting on `[x; y*]`.
    pub fn joint(&self) -> &LegendreKernel {
        &self.joint
    }

    pub fn primal_dim(&self) -> usize {
        self.primal.dim()
    }

    pub fn pack(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim("product pack (primal)", self.primal.dim(), x.len())?;
        check_dim("product pack (dual)", self.dual.dim(), y.len())?;
        Ok(linalg::concat(x, y))
    }

    pub fn unpack(&self, z: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        check_dim("product unpack", self.joint.dim(), z.len())?;
        let n = self.primal.dim();
        Ok((linalg::segment(z, 0, n), linalg::segment(z, n, self.dual.dim())))
    }

    pub fn value(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<ExtReal> {
        Ok(self.primal.value(x)? + self.dual.value(y)?)
    }

    /// `D^f(x, u) + D^{g*}(y*, v*)`.
    pub fn product_distance(
        &self,
        (x, y): (&DVector<f64>, &DVector<f64>),
        (u, v): (&DVector<f64>, &DVector<f64>),
    ) -> Result<BregmanValue> {
        Ok(self.primal.bregman_distance(x, u)? + self.dual.bregman_distance(y, v)?)
    }
}
