//! Multivariate problems with `m` primal and `p` dual blocks coupled by
//! linear maps `L_{ki}`, reduced to a single composite problem on the
//! product space.
//!
//! Packing order: primal blocks in declaration order, then dual blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, Error, Result};
use crate::geometry::HalfSpace;
use crate::kernels::LegendreKernel;
use crate::linalg;
use crate::operators::{graph_point, LinearMap, MonotoneOperator};
use crate::solver::{
    self, CompositeProblem, GraphData, IterationState, PrimalDualPoint, SolveOptions, SolveReport, StepSchedule,
    DEFAULT_DELTA, DEFAULT_EPS,
};

/// `φ_i` with its kernels `f_i`, `h_i` and start `x_{i,0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalBlock {
    pub op: MonotoneOperator,
    pub f: LegendreKernel,
    pub h: LegendreKernel,
    pub x0: DVector<f64>,
    pub eps: f64,
}

impl PrimalBlock {
    pub fn new(op: MonotoneOperator, f: LegendreKernel, h: LegendreKernel, x0: DVector<f64>) -> Self {
        Self {
            op,
            f,
            h,
            x0,
            eps: DEFAULT_EPS,
        }
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }
}

/// `ψ_k` with its kernels `g_k*`, `j_k` and start `y*_{k,0}`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualBlock {
    pub op: MonotoneOperator,
    pub g_star: LegendreKernel,
    pub j: LegendreKernel,
    pub y0: DVector<f64>,
    pub delta: f64,
}

impl DualBlock {
    pub fn new(op: MonotoneOperator, g_star: LegendreKernel, j: LegendreKernel, y0: DVector<f64>) -> Self {
        Self {
            op,
            g_star,
            j,
            y0,
            delta: DEFAULT_DELTA,
        }
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockProblem {
    primal: Vec<PrimalBlock>,
    dual: Vec<DualBlock>,
    /// `coupling[k][i] = L_{ki}`; absent maps are stored as zeros.
    coupling: Vec<Vec<LinearMap>>,
    sigma: Option<f64>,
}

impl BlockProblem {
    /// `couplings` lists `(k, i, L_{ki})`; unlisted pairs are zero maps.
    pub fn new(
        primal: Vec<PrimalBlock>,
        dual: Vec<DualBlock>,
        couplings: Vec<(usize, usize, LinearMap)>,
    ) -> Result<Self> {
        if primal.is_empty() || dual.is_empty() {
            return Err(Error::InvalidProblem(
                "need at least one primal and one dual block".into(),
            ));
        }
        for (i, b) in primal.iter().enumerate() {
            let n = b.dim();
            check_dim("primal block operator", n, b.op.dim())?;
            check_dim("primal block f", n, b.f.dim())?;
            check_dim("primal block h", n, b.h.dim())?;
            if !b.f.is_interior(&b.x0) {
                return Err(Error::InvalidProblem(format!("primal block {i}: start not interior")));
            }
        }
        for (k, b) in dual.iter().enumerate() {
            let n = b.dim();
            check_dim("dual block operator", n, b.op.dim())?;
            check_dim("dual block g*", n, b.g_star.dim())?;
            check_dim("dual block j", n, b.j.dim())?;
            if !b.g_star.is_interior(&b.y0) {
                return Err(Error::InvalidProblem(format!("dual block {k}: start not interior")));
            }
        }
        let mut coupling: Vec<Vec<LinearMap>> = dual
            .iter()
            .map(|d| primal.iter().map(|p| LinearMap::zeros(d.dim(), p.dim())).collect())
            .collect();
        for (k, i, map) in couplings {
            if k >= dual.len() || i >= primal.len() {
                return Err(Error::InvalidProblem(format!(
                    "coupling L[{k}][{i}] refers to a missing block"
                )));
            }
            check_dim("coupling rows", dual[k].dim(), map.rows())?;
            check_dim("coupling columns", primal[i].dim(), map.cols())?;
            coupling[k][i] = map;
        }
        Ok(Self {
            primal,
            dual,
            coupling,
            sigma: None,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = Some(sigma);
        self
    }

    pub fn primal(&self) -> &[PrimalBlock] {
        &self.primal
    }

    pub fn dual(&self) -> &[DualBlock] {
        &self.dual
    }

    pub fn coupling(&self, k: usize, i: usize) -> &LinearMap {
        &self.coupling[k][i]
    }

    pub fn sigma(&self) -> Option<f64> {
        self.sigma
    }

    pub fn eps(&self) -> f64 {
        self.primal.iter().map(|b| b.eps).fold(f64::MIN, f64::max)
    }

    pub fn delta(&self) -> f64 {
        self.dual.iter().map(|b| b.delta).fold(f64::MIN, f64::max)
    }

    fn primal_offsets(&self) -> Vec<usize> {
        offsets(self.primal.iter().map(PrimalBlock::dim))
    }

    fn dual_offsets(&self) -> Vec<usize> {
        offsets(self.dual.iter().map(DualBlock::dim))
    }

    /// Splits a packed primal or dual vector into its blocks.
    pub fn split(&self, p: &PrimalDualPoint) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let xs = self
            .primal
            .iter()
            .zip(self.primal_offsets())
            .map(|(b, o)| linalg::segment(&p.x, o, b.dim()))
            .collect();
        let ys = self
            .dual
            .iter()
            .zip(self.dual_offsets())
            .map(|(b, o)| linalg::segment(&p.y, o, b.dim()))
            .collect();
        (xs, ys)
    }
}

fn offsets(dims: impl Iterator<Item = usize>) -> Vec<usize> {
    let mut acc = 0;
    dims.map(|d| {
        let o = acc;
        acc += d;
        o
    })
    .collect()
}

/// The equivalent composite problem: block-diagonal `A`, `B`, block-sum
/// kernels and the stacked map `L`.
pub fn assemble(bp: &BlockProblem) -> Result<CompositeProblem> {
    let n: usize = bp.primal.iter().map(PrimalBlock::dim).sum();
    let m: usize = bp.dual.iter().map(DualBlock::dim).sum();
    let mut l = DMatrix::zeros(m, n);
    for (k, ro) in bp.dual_offsets().into_iter().enumerate() {
        for (i, co) in bp.primal_offsets().into_iter().enumerate() {
            let block = bp.coupling[k][i].matrix();
            l.view_mut((ro, co), block.shape()).copy_from(block);
        }
    }
    let stack = |vs: Vec<&DVector<f64>>| {
        DVector::from_iterator(vs.iter().map(|v| v.len()).sum(), vs.into_iter().flatten().copied())
    };
    let a = MonotoneOperator::block_diagonal(bp.primal.iter().map(|b| b.op.clone()).collect());
    let b = MonotoneOperator::block_diagonal(bp.dual.iter().map(|b| b.op.clone()).collect());
    let (eps, delta) = (bp.eps(), bp.delta());
    let mut builder = CompositeProblem::builder()
        .a(a)
        .b(b)
        .l(LinearMap::new(l))
        .kernels(
            LegendreKernel::concat(bp.primal.iter().map(|b| &b.f)),
            LegendreKernel::concat(bp.dual.iter().map(|b| &b.g_star)),
            LegendreKernel::concat(bp.primal.iter().map(|b| &b.h)),
            LegendreKernel::concat(bp.dual.iter().map(|b| &b.j)),
        )
        .start(
            stack(bp.primal.iter().map(|b| &b.x0).collect()),
            stack(bp.dual.iter().map(|b| &b.y0).collect()),
        )
        .eps(eps)
        .delta(delta);
    if let Some(sigma) = bp.sigma {
        builder = builder.sigma(sigma);
    }
    builder.build()
}

/// Graph points computed block by block: `a_i` from `x_i` and
/// `∑_k L_{ki}* y_k*`, `b_k` from `∑_i L_{ki} x_i` and `y_k*`.
fn block_graph_data(bp: &BlockProblem, gamma: f64, mu: f64, p: &PrimalDualPoint) -> Result<GraphData> {
    let (xs, ys) = bp.split(p);
    let (np, nd) = (bp.primal.len(), bp.dual.len());
    let mut a = Vec::with_capacity(np);
    let mut a_star = Vec::with_capacity(np);
    for (i, block) in bp.primal.iter().enumerate() {
        let mut w = DVector::zeros(block.dim());
        for (k, y) in ys.iter().enumerate() {
            linalg::matvec_t_acc(bp.coupling[k][i].matrix(), y, &mut w);
        }
        let gp = graph_point(&block.op, &block.h, gamma, &xs[i], &w)?;
        a.push(gp.a);
        a_star.push(gp.a_star);
    }
    let mut b = Vec::with_capacity(nd);
    let mut b_star = Vec::with_capacity(nd);
    for (k, block) in bp.dual.iter().enumerate() {
        let mut lx = DVector::zeros(block.dim());
        for (i, x) in xs.iter().enumerate() {
            linalg::matvec_acc(bp.coupling[k][i].matrix(), x, &mut lx);
        }
        let gp = graph_point(&block.op, &block.j, mu, &lx, &(-&ys[k]))?;
        b.push(gp.a);
        b_star.push(gp.a_star);
    }

    // s* = (a_i* + ∑_k L_{ki}* b_k*, b_k − ∑_i L_{ki} a_i), η = ∑⟨a_i, a_i*⟩ + ∑⟨b_k, b_k*⟩.
    let mut normal = Vec::new();
    for i in 0..np {
        let mut acc = DVector::zeros(a[i].len());
        for (k, bs) in b_star.iter().enumerate() {
            linalg::matvec_t_acc(bp.coupling[k][i].matrix(), bs, &mut acc);
        }
        normal.extend((&a_star[i] + acc).iter().copied());
    }
    for (bk, row) in b.iter().zip(&bp.coupling).take(nd) {
        let mut acc = DVector::zeros(bk.len());
        for (l, ai) in row.iter().zip(&a) {
            linalg::matvec_acc(l.matrix(), ai, &mut acc);
        }
        normal.extend((bk - acc).iter().copied());
    }
    let eta_a = a
        .iter()
        .zip(&a_star)
        .fold(0.0, |acc, (u, v)| linalg::dot_acc(u, v, acc));
    let eta_b = b
        .iter()
        .zip(&b_star)
        .fold(0.0, |acc, (u, v)| linalg::dot_acc(u, v, acc));
    let halfspace = HalfSpace::new(DVector::from_vec(normal), eta_a + eta_b);

    let join = |parts: Vec<DVector<f64>>| {
        DVector::from_iterator(
            parts.iter().map(|v| v.len()).sum(),
            parts.into_iter().flat_map(|v| v.data.as_vec().clone()),
        )
    };
    Ok(GraphData {
        a: join(a),
        a_star: join(a_star),
        b: join(b),
        b_star: join(b_star),
        halfspace,
    })
}

/// One step of the block iteration; `assembled` must be `assemble(bp)`.
pub fn block_step(
    bp: &BlockProblem,
    assembled: &CompositeProblem,
    schedule: &StepSchedule,
    n: usize,
    current: &PrimalDualPoint,
) -> Result<IterationState> {
    let (gamma, mu) = schedule.at(n);
    assembled.check_iterate(current, "iterate")?;
    let g = block_graph_data(bp, gamma, mu, current)?;
    solver::complete_step(assembled, n, (gamma, mu), current, g)
}

/// Solver report with the final point split into blocks.
#[derive(Clone, Debug)]
pub struct BlockReport {
    pub report: SolveReport,
    pub x: Vec<DVector<f64>>,
    pub y: Vec<DVector<f64>>,
}

/// Runs the per-block iteration. Produces the same trace as
/// [`solver::solve`] on [`assemble`]`(bp)`.
pub fn solve_blocks(bp: &BlockProblem, schedule: &StepSchedule, opts: &SolveOptions) -> Result<BlockReport> {
    let assembled = assemble(bp)?;
    let report = solver::run(&assembled, schedule, opts, |n, current| {
        block_step(bp, &assembled, schedule, n, current)
    });
    let (x, y) = bp.split(&report.point);
    Ok(BlockReport { report, x, y })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelKind;
    use crate::operators::ScalarPotential;
    use nalgebra::{dmatrix, dvector};

    fn energy(n: usize) -> LegendreKernel {
        LegendreKernel::new(KernelKind::Energy, n)
    }

    fn quad(c: DVector<f64>) -> MonotoneOperator {
        MonotoneOperator::separable(c.iter().map(|&center| ScalarPotential::Quadratic { center }).collect()).unwrap()
    }

    fn least_squares(m: usize, p: usize) -> BlockProblem {
        let primal = (0..m)
            .map(|i| {
                let n = 1 + i % 2;
                let c = DVector::from_fn(n, |r, _| 0.5 + r as f64 - i as f64);
                PrimalBlock::new(quad(c), energy(n), energy(n), DVector::from_element(n, 0.1))
            })
            .collect::<Vec<_>>();
        let dual = (0..p)
            .map(|k| DualBlock::new(quad(dvector![k as f64 - 0.5]), energy(1), energy(1), dvector![0.2]))
            .collect::<Vec<_>>();
        let mut couplings = Vec::new();
        for k in 0..p {
            for (i, b) in primal.iter().enumerate() {
                let n = b.dim();
                couplings.push((
                    k,
                    i,
                    LinearMap::new(DMatrix::from_fn(1, n, |_, c| 0.3 * (k + i + c) as f64 - 0.4)),
                ));
            }
        }
        BlockProblem::new(primal, dual, couplings).unwrap()
    }

    #[test]
    fn single_block_identity_coupling() {
        let bp = BlockProblem::new(
            vec![PrimalBlock::new(
                quad(dvector![1.0]),
                energy(1),
                energy(1),
                dvector![0.0],
            )],
            vec![DualBlock::new(quad(dvector![0.0]), energy(1), energy(1), dvector![0.0])],
            vec![(0, 0, LinearMap::identity(1))],
        )
        .unwrap();
        let p = assemble(&bp).unwrap();
        assert_eq!(p.l().matrix(), &dmatrix![1.0]);
        assert_eq!(p.primal_dim(), 1);
        assert_eq!(p.dual_dim(), 1);
    }

    #[test]
    fn horizontal_stacking_and_adjoint() {
        let bp = least_squares(2, 1);
        let p = assemble(&bp).unwrap();
        assert_eq!(p.l().matrix().shape(), (1, 3));
        let x = dvector![0.3, -1.2, 0.7];
        let y = dvector![1.9];
        let lhs = linalg::dot(&p.l().apply(&x).unwrap(), &y);
        let rhs = linalg::dot(&x, &p.l().adjoint_apply(&y).unwrap());
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn two_dual_blocks_update_independently() {
        let bp = least_squares(1, 2);
        let p = assemble(&bp).unwrap();
        let s = StepSchedule::default();
        let st = block_step(&bp, &p, &s, 0, p.start()).unwrap();
        // b_k = (∇j + ∂ψ_k)⁻¹(L_k x + y_k) for ψ_k = ½(· − d_k)², energy j.
        for k in 0..2 {
            let lx = linalg::dot(&bp.coupling(k, 0).matrix().row(0).transpose(), &bp.primal()[0].x0);
            let d = k as f64 - 0.5;
            let expect = (lx + bp.dual()[k].y0[0] + d) / 2.0;
            assert!((st.b[k] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn block_trace_matches_assembled_bitwise() {
        let bp = least_squares(2, 2);
        let p = assemble(&bp).unwrap();
        let opts = SolveOptions {
            max_iters: 50,
            ..Default::default()
        };
        let s = StepSchedule::default();
        let blocks = solve_blocks(&bp, &s, &opts).unwrap();
        let whole = solver::solve(&p, &s, &opts);
        assert_eq!(blocks.report.trace, whole.trace);
        assert_eq!(blocks.report.point, whole.point);
    }

    #[test]
    fn rejects_bad_coupling() {
        let bp = least_squares(2, 1);
        let err = BlockProblem::new(
            bp.primal().to_vec(),
            bp.dual().to_vec(),
            vec![(0, 1, LinearMap::zeros(1, 3))],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
        let err = BlockProblem::new(
            bp.primal().to_vec(),
            bp.dual().to_vec(),
            vec![(1, 0, LinearMap::zeros(1, 1))],
        );
        assert!(matches!(err, Err(Error::InvalidProblem(_))));
    }

    #[test]
    fn entropy_start_boundary_rejected() {
        let bs = LegendreKernel::new(KernelKind::BoltzmannShannon, 1);
        let err = BlockProblem::new(
            vec![PrimalBlock::new(quad(dvector![1.0]), bs, energy(1), dvector![0.0])],
            vec![DualBlock::new(quad(dvector![0.0]), energy(1), energy(1), dvector![0.0])],
            vec![],
        );
        assert!(matches!(err, Err(Error::InvalidProblem(m)) if m.contains("start not interior")));
    }
}
