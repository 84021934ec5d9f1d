//! JSON problem files and CSV traces. The schema is documented in
//! `docs/schema.md`.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::kernels::{KernelKind, LegendreKernel};
use crate::operators::{LinearMap, MonotoneOperator, OperatorKind, ScalarPotential};
use crate::product::{BlockProblem, DualBlock, PrimalBlock};
use crate::solver::{CompositeProblem, SolveOptions, StepSchedule, TraceRow};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    /// The document does not match the schema; `path` is the JSON field path.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    /// The document is well formed but describes an invalid problem.
    #[error("invalid problem: {0}")]
    Semantic(#[from] Error),
}

/// A problem file after validation.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub problem: Problem,
    pub schedule: StepSchedule,
    pub options: SolveOptions,
}

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Problem {
    Composite(CompositeProblem),
    Blocks(BlockProblem),
}

impl Problem {
    /// The composite problem the solver runs on (assembled for block files).
    pub fn composite(&self) -> crate::error::Result<CompositeProblem> {
        match self {
            Problem::Composite(p) => Ok(p.clone()),
            Problem::Blocks(bp) => crate::product::assemble(bp),
        }
    }
}

pub fn parse_problem(path: impl AsRef<Path>) -> Result<ProblemFile, InputError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| InputError::Read {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

pub fn parse_str(text: &str) -> Result<ProblemFile, InputError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: FileDoc = serde_path_to_error::deserialize(de).map_err(|e| InputError::Schema {
        path: e.path().to_string(),
        message: e.inner().to_string(),
    })?;
    doc.into_problem_file()
}

/// Serializes a problem file; `parse_str(&emit(f))` reproduces `f`.
pub fn emit(file: &ProblemFile) -> String {
    let doc = FileDoc::from_problem_file(file);
    serde_json::to_string_pretty(&doc).expect("problem documents always serialize")
}

/// Writes `rows` as CSV with columns
/// `n,gamma,mu,kt_residual,d_full,d_half` followed by `x0..,ystar0..` when
/// `vectors` is `Some((dim 𝒳, dim 𝒴))`. Floats use 17 significant digits.
pub fn write_trace<W: Write>(out: W, rows: &[TraceRow], vectors: Option<(usize, usize)>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = ["n", "gamma", "mu", "kt_residual", "d_full", "d_half"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if let Some((n, m)) = vectors {
        header.extend((0..n).map(|i| format!("x{i}")));
        header.extend((0..m).map(|k| format!("ystar{k}")));
    }
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.n.to_string()];
        rec.extend([row.gamma, row.mu, row.kt_residual, row.d_full, row.d_half].map(fmt_float));
        if vectors.is_some() {
            let v = row
                .vectors
                .as_ref()
                .ok_or_else(|| std::io::Error::other("trace row without vectors"))?;
            rec.extend(v.x.iter().chain(v.y.iter()).map(|&f| fmt_float(f)));
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

// ---------------------------------------------------------------------------
// Document types

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileDoc {
    version: u32,
    problem: ProblemDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<ScheduleDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    options: Option<OptionsDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
enum ProblemDoc {
    Composite(CompositeDoc),
    Blocks(BlocksDoc),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositeDoc {
    dims: DimsDoc,
    kernels: KernelsDoc,
    operators: OperatorsDoc,
    /// Row-major `dim 𝒴 × dim 𝒳`.
    l: Vec<Vec<f64>>,
    start: StartDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DimsDoc {
    x: usize,
    y: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelsDoc {
    f: KernelDoc,
    g_star: KernelDoc,
    h: KernelDoc,
    j: KernelDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OperatorsDoc {
    a: OperatorDoc,
    b: OperatorDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StartDoc {
    x: Vec<f64>,
    y: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BlocksDoc {
    primal: Vec<PrimalDoc>,
    dual: Vec<DualDoc>,
    #[serde(default)]
    coupling: Vec<CouplingDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PrimalDoc {
    operator: OperatorDoc,
    f: KernelDoc,
    h: KernelDoc,
    x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DualDoc {
    operator: OperatorDoc,
    g_star: KernelDoc,
    j: KernelDoc,
    y0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingDoc {
    k: usize,
    i: usize,
    matrix: Vec<Vec<f64>>,
}

/// One kind for every coordinate, or explicit runs.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KernelDoc {
    Uniform(KindDoc),
    Segments(Vec<SegmentDoc>),
}

#[derive(Serialize, Deserialize)]
struct SegmentDoc {
    #[serde(flatten)]
    kind: KindDoc,
    len: usize,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum KindDoc {
    Energy,
    BoltzmannShannon,
    FermiDirac,
    Hellinger,
    PPower { p: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum OperatorDoc {
    Zero {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Separable {
        potentials: Vec<PotentialDoc>,
    },
    MatchedKernel {
        kernel: KernelDoc,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
    Skew2x2 {
        beta: f64,
        psi: KindDoc,
    },
    Affine {
        m: Vec<Vec<f64>>,
        q: Vec<f64>,
    },
    BlockDiagonal {
        blocks: Vec<OperatorDoc>,
    },
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PotentialDoc {
    Entropy { omega: f64 },
    Power { p: f64 },
    InversePower { p: f64 },
    NegPower { p: f64 },
    Quadratic { center: f64 },
    ComplementEntropy,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum ScheduleDoc {
    Constant { gamma: f64, mu: f64 },
    Cyclic { steps: Vec<(f64, f64)> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionsDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    full_vectors: Option<bool>,
}

// ---------------------------------------------------------------------------
// Document → problem

fn invalid(msg: impl Into<String>) -> InputError {
    InputError::Semantic(Error::InvalidProblem(msg.into()))
}

impl FileDoc {
    fn into_problem_file(self) -> Result<ProblemFile, InputError> {
        if self.version != FORMAT_VERSION {
            return Err(InputError::Schema {
                path: "version".into(),
                message: format!("unsupported version {}, expected {FORMAT_VERSION}", self.version),
            });
        }
        let problem = match self.problem {
            ProblemDoc::Composite(c) => Problem::Composite(c.build()?),
            ProblemDoc::Blocks(b) => Problem::Blocks(b.build()?),
        };
        let schedule = match self.schedule {
            None => StepSchedule::default(),
            Some(ScheduleDoc::Constant { gamma, mu }) => StepSchedule::Constant { gamma, mu },
            Some(ScheduleDoc::Cyclic { steps }) => StepSchedule::Cyclic(steps),
        };
        let mut options = SolveOptions::default();
        if let Some(o) = self.options {
            options.max_iters = o.max_iters.unwrap_or(options.max_iters);
            options.tol = o.tol.unwrap_or(options.tol);
            options.full_vectors = o.full_vectors.unwrap_or(options.full_vectors);
        }
        Ok(ProblemFile {
            problem,
            schedule,
            options,
        })
    }
}

impl CompositeDoc {
    fn build(self) -> Result<CompositeProblem, InputError> {
        let (n, m) = (self.dims.x, self.dims.y);
        let l = matrix(&self.l, m, n, "l")?;
        let mut b = CompositeProblem::builder()
            .a(self.operators.a.build(n)?)
            .b(self.operators.b.build(m)?)
            .l(LinearMap::new(l))
            .kernels(
                self.kernels.f.build(n)?,
                self.kernels.g_star.build(m)?,
                self.kernels.h.build(n)?,
                self.kernels.j.build(m)?,
            )
            .start(vector(self.start.x, n, "start.x")?, vector(self.start.y, m, "start.y")?);
        if let Some(e) = self.eps {
            b = b.eps(e);
        }
        if let Some(d) = self.delta {
            b = b.delta(d);
        }
        if let Some(s) = self.sigma {
            b = b.sigma(s);
        }
        Ok(b.build()?)
    }
}

impl BlocksDoc {
    fn build(self) -> Result<BlockProblem, InputError> {
        let mut primal = Vec::new();
        for p in self.primal {
            let n = p.x0.len();
            let mut block = PrimalBlock::new(
                p.operator.build(n)?,
                p.f.build(n)?,
                p.h.build(n)?,
                DVector::from_vec(p.x0),
            );
            if let Some(e) = p.eps {
                block = block.with_eps(e);
            }
            primal.push(block);
        }
        let mut dual = Vec::new();
        for d in self.dual {
            let n = d.y0.len();
            let mut block = DualBlock::new(
                d.operator.build(n)?,
                d.g_star.build(n)?,
                d.j.build(n)?,
                DVector::from_vec(d.y0),
            );
            if let Some(e) = d.delta {
                block = block.with_delta(e);
            }
            dual.push(block);
        }
        let mut couplings = Vec::new();
        for c in self.coupling {
            let rows = dual
                .get(c.k)
                .map(DualBlock::dim)
                .ok_or_else(|| invalid(format!("coupling refers to missing dual block {}", c.k)))?;
            let cols = primal
                .get(c.i)
                .map(PrimalBlock::dim)
                .ok_or_else(|| invalid(format!("coupling refers to missing primal block {}", c.i)))?;
            couplings.push((
                c.k,
                c.i,
                LinearMap::new(matrix(&c.matrix, rows, cols, "coupling.matrix")?),
            ));
        }
        let mut bp = BlockProblem::new(primal, dual, couplings)?;
        if let Some(s) = self.sigma {
            bp = bp.with_sigma(s);
        }
        Ok(bp)
    }
}

impl KindDoc {
    fn build(self) -> KernelKind {
        match self {
            KindDoc::Energy => KernelKind::Energy,
            KindDoc::BoltzmannShannon => KernelKind::BoltzmannShannon,
            KindDoc::FermiDirac => KernelKind::FermiDirac,
            KindDoc::Hellinger => KernelKind::Hellinger,
            KindDoc::PPower { p } => KernelKind::PPower { p },
        }
    }

    fn from_kind(k: KernelKind) -> Self {
        match k {
            KernelKind::Energy => KindDoc::Energy,
            KernelKind::BoltzmannShannon => KindDoc::BoltzmannShannon,
            KernelKind::FermiDirac => KindDoc::FermiDirac,
            KernelKind::Hellinger => KindDoc::Hellinger,
            KernelKind::PPower { p } => KindDoc::PPower { p },
        }
    }
}

impl KernelDoc {
    fn build(&self, dim: usize) -> Result<LegendreKernel, InputError> {
        let kernel = match self {
            KernelDoc::Uniform(k) => LegendreKernel::try_new(k.build(), dim)?,
            KernelDoc::Segments(segs) => {
                let parts = segs
                    .iter()
                    .map(|s| LegendreKernel::try_new(s.kind.build(), s.len))
                    .collect::<crate::error::Result<Vec<_>>>()?;
                LegendreKernel::concat(parts.iter())
            }
        };
        if kernel.dim() != dim {
            return Err(InputError::Semantic(Error::DimensionMismatch {
                context: "kernel segments",
                expected: dim,
                found: kernel.dim(),
            }));
        }
        Ok(kernel)
    }

    fn from_kernel(k: &LegendreKernel) -> Self {
        if let Some(kind) = k.uniform_kind() {
            return KernelDoc::Uniform(KindDoc::from_kind(kind));
        }
        let mut segs: Vec<SegmentDoc> = Vec::new();
        let mut last: Option<(KernelKind, usize)> = None;
        for kind in k.kinds() {
            match &mut last {
                Some((lk, len)) if *lk == kind => *len += 1,
                _ => {
                    if let Some((lk, len)) = last.take() {
                        segs.push(SegmentDoc {
                            kind: KindDoc::from_kind(lk),
                            len,
                        });
                    }
                    last = Some((kind, 1));
                }
            }
        }
        if let Some((lk, len)) = last {
            segs.push(SegmentDoc {
                kind: KindDoc::from_kind(lk),
                len,
            });
        }
        KernelDoc::Segments(segs)
    }
}

impl PotentialDoc {
    fn build(self) -> ScalarPotential {
        match self {
            PotentialDoc::Entropy { omega } => ScalarPotential::Entropy { omega },
            PotentialDoc::Power { p } => ScalarPotential::Power { p },
            PotentialDoc::InversePower { p } => ScalarPotential::InversePower { p },
            PotentialDoc::NegPower { p } => ScalarPotential::NegPower { p },
            PotentialDoc::Quadratic { center } => ScalarPotential::Quadratic { center },
            PotentialDoc::ComplementEntropy => ScalarPotential::ComplementEntropy,
        }
    }

    fn from_potential(p: ScalarPotential) -> Self {
        match p {
            ScalarPotential::Entropy { omega } => PotentialDoc::Entropy { omega },
            ScalarPotential::Power { p } => PotentialDoc::Power { p },
            ScalarPotential::InversePower { p } => PotentialDoc::InversePower { p },
            ScalarPotential::NegPower { p } => PotentialDoc::NegPower { p },
            ScalarPotential::Quadratic { center } => PotentialDoc::Quadratic { center },
            ScalarPotential::ComplementEntropy => PotentialDoc::ComplementEntropy,
        }
    }
}

impl OperatorDoc {
    /// `dim` is the dimension of the space the operator acts on; operators
    /// inside `block_diagonal` infer their own dimension where possible.
    fn build(&self, dim: usize) -> Result<MonotoneOperator, InputError> {
        let op = self.build_inner(Some(dim))?;
        if op.dim() != dim {
            return Err(InputError::Semantic(Error::DimensionMismatch {
                context: "operator",
                expected: dim,
                found: op.dim(),
            }));
        }
        Ok(op)
    }

    fn build_inner(&self, dim: Option<usize>) -> Result<MonotoneOperator, InputError> {
        let need = |explicit: Option<usize>| {
            explicit
                .or(dim)
                .ok_or_else(|| invalid("operator inside block_diagonal needs an explicit `dim`"))
        };
        Ok(match self {
            OperatorDoc::Zero { dim: d } => MonotoneOperator::zero(need(*d)?),
            OperatorDoc::Separable { potentials } => {
                MonotoneOperator::separable(potentials.iter().map(|p| p.build()).collect())?
            }
            OperatorDoc::MatchedKernel { kernel, dim: d } => {
                let d = match (kernel, d) {
                    (KernelDoc::Segments(s), None) => s.iter().map(|s| s.len).sum(),
                    _ => need(*d)?,
                };
                MonotoneOperator::matched_kernel(kernel.build(d)?)
            }
            OperatorDoc::Skew2x2 { beta, psi } => MonotoneOperator::skew2x2(*beta, psi.build())?,
            OperatorDoc::Affine { m, q } => {
                let n = q.len();
                MonotoneOperator::affine(matrix(m, n, n, "affine.m")?, DVector::from_vec(q.clone()))?
            }
            OperatorDoc::BlockDiagonal { blocks } => MonotoneOperator::block_diagonal(
                blocks
                    .iter()
                    .map(|b| b.build_inner(None))
                    .collect::<Result<Vec<_>, _>>()?,
            ),
        })
    }

    fn from_operator(op: &MonotoneOperator) -> Self {
        match op.kind() {
            OperatorKind::Zero { dim } => OperatorDoc::Zero { dim: Some(*dim) },
            OperatorKind::Separable(ps) => OperatorDoc::Separable {
                potentials: ps.iter().map(|&p| PotentialDoc::from_potential(p)).collect(),
            },
            OperatorKind::MatchedKernel(k) => OperatorDoc::MatchedKernel {
                kernel: KernelDoc::from_kernel(k),
                dim: Some(k.dim()),
            },
            OperatorKind::Skew2x2 { beta, psi } => OperatorDoc::Skew2x2 {
                beta: *beta,
                psi: KindDoc::from_kind(*psi),
            },
            OperatorKind::Affine { m, q } => OperatorDoc::Affine {
                m: rows(m),
                q: q.iter().copied().collect(),
            },
            OperatorKind::BlockDiagonal(bs) => OperatorDoc::BlockDiagonal {
                blocks: bs.iter().map(OperatorDoc::from_operator).collect(),
            },
        }
    }
}

fn matrix(data: &[Vec<f64>], r: usize, c: usize, what: &str) -> Result<DMatrix<f64>, InputError> {
    if data.len() != r || data.iter().any(|row| row.len() != c) {
        return Err(invalid(format!("`{what}` must be a {r} x {c} row-major array")));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| data[i][j]))
}

fn vector(data: Vec<f64>, n: usize, what: &str) -> Result<DVector<f64>, InputError> {
    if data.len() != n {
        return Err(invalid(format!("`{what}` must have length {n}, found {}", data.len())));
    }
    Ok(DVector::from_vec(data))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

// ---------------------------------------------------------------------------
// Problem → document

impl FileDoc {
    fn from_problem_file(file: &ProblemFile) -> Self {
        let problem = match &file.problem {
            Problem::Composite(p) => ProblemDoc::Composite(CompositeDoc {
                dims: DimsDoc {
                    x: p.primal_dim(),
                    y: p.dual_dim(),
                },
                kernels: KernelsDoc {
                    f: KernelDoc::from_kernel(p.f()),
                    g_star: KernelDoc::from_kernel(p.g_star()),
                    h: KernelDoc::from_kernel(p.h()),
                    j: KernelDoc::from_kernel(p.j()),
                },
                operators: OperatorsDoc {
                    a: OperatorDoc::from_operator(p.a()),
                    b: OperatorDoc::from_operator(p.b()),
                },
                l: rows(p.l().matrix()),
                start: StartDoc {
                    x: p.start().x.iter().copied().collect(),
                    y: p.start().y.iter().copied().collect(),
                },
                eps: Some(p.eps()),
                delta: Some(p.delta()),
                sigma: Some(p.sigma()),
            }),
            Problem::Blocks(bp) => {
                let mut coupling = Vec::new();
                for k in 0..bp.dual().len() {
                    for i in 0..bp.primal().len() {
                        let m = bp.coupling(k, i).matrix();
                        if m.iter().any(|&v| v != 0.0) {
                            coupling.push(CouplingDoc { k, i, matrix: rows(m) });
                        }
                    }
                }
                ProblemDoc::Blocks(BlocksDoc {
                    primal: bp
                        .primal()
                        .iter()
                        .map(|b| PrimalDoc {
                            operator: OperatorDoc::from_operator(&b.op),
                            f: KernelDoc::from_kernel(&b.f),
                            h: KernelDoc::from_kernel(&b.h),
                            x0: b.x0.iter().copied().collect(),
                            eps: Some(b.eps),
                        })
                        .collect(),
                    dual: bp
                        .dual()
                        .iter()
                        .map(|b| DualDoc {
                            operator: OperatorDoc::from_operator(&b.op),
                            g_star: KernelDoc::from_kernel(&b.g_star),
                            j: KernelDoc::from_kernel(&b.j),
                            y0: b.y0.iter().copied().collect(),
                            delta: Some(b.delta),
                        })
                        .collect(),
                    coupling,
                    sigma: bp.sigma(),
                })
            }
        };
        let schedule = Some(match &file.schedule {
            StepSchedule::Constant { gamma, mu } => ScheduleDoc::Constant { gamma: *gamma, mu: *mu },
            StepSchedule::Cyclic(steps) => ScheduleDoc::Cyclic { steps: steps.clone() },
        });
        let options = Some(OptionsDoc {
            max_iters: Some(file.options.max_iters),
            tol: Some(file.options.tol),
            full_vectors: Some(file.options.full_vectors),
        });
        FileDoc {
            version: FORMAT_VERSION,
            problem,
            schedule,
            options,
        }
    }
}
