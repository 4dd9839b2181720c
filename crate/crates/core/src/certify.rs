//! Per-edge norm conditions, dwell intervals and stability certificates.
//!
//! For an edge `(r, s)` the transition matrix is `P_(r,s) = P_s^-1 P_r` and
//! the edge norm at dwell `t` is `||P_(r,s) e^{t J_r}||`. A certificate holds
//! when every edge norm is below one at its chosen dwell `eta`; the stored
//! interval around each `eta` then defines the certified signal class.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    enumerate_simple_loops, Edge, GraphError, OpenInterval, SwitchGraph, SwitchingSignal,
    VertexPath,
};
use crate::matrix::{
    real_jordan, spectral_norm, MatrixError, SpectralDecomposition, SquareMatrix,
    DEFAULT_GAP_FACTOR,
};
use crate::scan;

/// Cap on simple loops examined by the checks that iterate over loops.
pub const DEFAULT_MAX_LOOPS: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertifyError {
    #[error("{0} is not an edge of the graph")]
    NotAnEdge(Edge),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error("graph has {graph} vertices but {found} subsystems were given")]
    VertexCountMismatch { graph: usize, found: usize },
    #[error("subsystem {vertex} has dimension {found}, expected {expected}")]
    DimensionMismatch { vertex: usize, expected: usize, found: usize },
    #[error("no dwell value given for edge {0}")]
    MissingEta(Edge),
    #[error("dwell value {eta} for edge {edge} is not a positive finite number")]
    InvalidEta { edge: Edge, eta: f64 },
    #[error("edge condition fails on {}", format_failures(.0))]
    ConditionViolated(Vec<EdgeFailure>),
    #[error("invalid scan options: {0}")]
    InvalidScan(String),
    #[error("no interval given for edge {0}")]
    MissingInterval(Edge),
    #[error("interval {interval} for edge {edge} does not contain its dwell value {eta}")]
    EtaOutsideInterval { edge: Edge, eta: f64, interval: OpenInterval },
    #[error("signal is not in the certified class")]
    SignalOutsideClass,
    #[error("subsystem {vertex} is not Hurwitz (spectral abscissa {abscissa})")]
    NotHurwitz { vertex: usize, abscissa: f64 },
    #[error("lambda* = {lambda_star} must lie in ({abscissa}, 0)")]
    BadLambdaStar { lambda_star: f64, abscissa: f64 },
}

fn format_failures(f: &[EdgeFailure]) -> String {
    let parts: Vec<String> =
        f.iter().map(|x| format!("{} (norm {:.6} over {})", x.edge, x.norm, x.location)).collect();
    parts.join(", ")
}

/// An edge whose norm is not below one where it must be.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeFailure {
    pub edge: Edge,
    pub norm: f64,
    /// Dwell value or interval where the failure was observed.
    pub location: String,
}

/// Linear switched system `x' = A_sigma x` with a real Jordan
/// decomposition per vertex.
#[derive(Clone, Debug)]
pub struct SwitchedSystem {
    graph: SwitchGraph,
    decompositions: Vec<SpectralDecomposition>,
    transitions: Vec<SquareMatrix>,
}

impl SwitchedSystem {
    /// Subsystem matrices are the decompositions' sources.
    pub fn new(
        graph: SwitchGraph,
        decompositions: Vec<SpectralDecomposition>,
    ) -> Result<Self, CertifyError> {
        if decompositions.len() != graph.vertex_count() {
            return Err(CertifyError::VertexCountMismatch {
                graph: graph.vertex_count(),
                found: decompositions.len(),
            });
        }
        let n = decompositions[0].dim();
        for (i, d) in decompositions.iter().enumerate() {
            if d.dim() != n {
                return Err(CertifyError::DimensionMismatch { vertex: i + 1, expected: n, found: d.dim() });
            }
        }
        let transitions = graph
            .edges()
            .iter()
            .map(|e| decompositions[e.to - 1].p_inv() * decompositions[e.from - 1].p())
            .collect();
        Ok(Self { graph, decompositions, transitions })
    }

    /// Computes each decomposition with [`real_jordan`].
    pub fn from_matrices(
        graph: SwitchGraph,
        matrices: Vec<SquareMatrix>,
    ) -> Result<Self, CertifyError> {
        if matrices.len() != graph.vertex_count() {
            return Err(CertifyError::VertexCountMismatch {
                graph: graph.vertex_count(),
                found: matrices.len(),
            });
        }
        let decompositions = matrices
            .iter()
            .map(|a| real_jordan(a, DEFAULT_GAP_FACTOR * spectral_norm(a).max(1.0)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(graph, decompositions)
    }

    pub fn graph(&self) -> &SwitchGraph {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.decompositions[0].dim()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    /// `A_v`, 1-based.
    pub fn subsystem(&self, v: usize) -> &SquareMatrix {
        self.decompositions[v - 1].source()
    }

    /// Decomposition of `A_v`, 1-based.
    pub fn decomposition(&self, v: usize) -> &SpectralDecomposition {
        &self.decompositions[v - 1]
    }

    pub fn decompositions(&self) -> &[SpectralDecomposition] {
        &self.decompositions
    }

    /// Same graph, new decompositions.
    pub fn with_decompositions(
        &self,
        decompositions: Vec<SpectralDecomposition>,
    ) -> Result<Self, CertifyError> {
        Self::new(self.graph.clone(), decompositions)
    }

    /// Every decomposition rescaled to unit-norm eigenvector columns.
    pub fn with_unit_columns(&self) -> Self {
        let d = self.decompositions.iter().map(SpectralDecomposition::with_unit_columns).collect();
        Self::new(self.graph.clone(), d).expect("shape unchanged")
    }

    /// `P_(r,s) = P_s^-1 P_r`.
    pub fn transition(&self, e: Edge) -> Result<&SquareMatrix, CertifyError> {
        self.graph.edge_index(e).map(|i| &self.transitions[i]).ok_or(CertifyError::NotAnEdge(e))
    }

    /// `||P_(r,s) e^{t J_r}||`; at `t = 0` this is `||P_(r,s)||`.
    pub fn edge_norm(&self, e: Edge, t: f64) -> Result<f64, CertifyError> {
        let f = self.edge_norm_fn(e)?;
        Ok(f(t))
    }

    pub(crate) fn edge_norm_fn(
        &self,
        e: Edge,
    ) -> Result<impl Fn(f64) -> f64 + Sync + '_, CertifyError> {
        let p = self.transition(e)?;
        let d = &self.decompositions[e.from - 1];
        Ok(move |t: f64| spectral_norm(&(p * &d.exp(t))))
    }
}

/// See [`SwitchedSystem::edge_norm`].
pub fn edge_norm(system: &SwitchedSystem, e: Edge, t: f64) -> Result<f64, CertifyError> {
    system.edge_norm(e, t)
}

/// Grid and refinement settings for dwell-interval scans.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub t_max: f64,
    pub grid_points: usize,
    pub refine_tol: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self { t_max: 50.0, grid_points: 2048, refine_tol: 1e-9 }
    }
}

impl ScanOptions {
    pub fn validate(&self) -> Result<(), CertifyError> {
        if !(self.t_max.is_finite() && self.t_max > 0.0) {
            return Err(CertifyError::InvalidScan(format!("t_max {} must be positive", self.t_max)));
        }
        if self.grid_points < 64 {
            return Err(CertifyError::InvalidScan(format!(
                "grid_points {} must be at least 64",
                self.grid_points
            )));
        }
        if !(self.refine_tol > 0.0) {
            return Err(CertifyError::InvalidScan("refine_tol must be positive".into()));
        }
        Ok(())
    }

    fn step(&self) -> f64 {
        self.t_max / self.grid_points as f64
    }
}

/// Maximal sub-intervals of `(0, t_max]` with edge norm below one. A left
/// endpoint of 0 means arbitrarily short dwells work; a right endpoint equal
/// to `t_max` means the interval reaches the end of the scan.
pub fn feasible_interval(
    system: &SwitchedSystem,
    e: Edge,
    opts: &ScanOptions,
) -> Result<Vec<OpenInterval>, CertifyError> {
    opts.validate()?;
    let f = system.edge_norm_fn(e)?;
    Ok(scan::sublevel_intervals(&f, 1.0, opts.t_max, opts.grid_points, opts.refine_tol))
}

/// Right end of the dwell range guaranteed by `||P|| e^{lambda t} < 1` on an
/// E2 edge whose source has only 1x1 blocks and positive spectral abscissa.
pub fn e2_analytic_endpoint(system: &SwitchedSystem, e: Edge) -> Result<Option<f64>, CertifyError> {
    let norm = spectral_norm(system.transition(e)?);
    let d = system.decomposition(e.from);
    let lambda = d.spectral_abscissa();
    if norm < 1.0 && lambda > 0.0 && d.is_real_diagonal() {
        Ok(Some(-norm.ln() / lambda))
    } else {
        Ok(None)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeClass {
    /// `||P_(r,s)|| >= 1`.
    E1,
    /// `||P_(r,s)|| < 1`.
    E2,
}

pub fn classify(transition_norm: f64) -> EdgeClass {
    if transition_norm >= 1.0 {
        EdgeClass::E1
    } else {
        EdgeClass::E2
    }
}

pub fn partition_edges(system: &SwitchedSystem) -> BTreeMap<Edge, EdgeClass> {
    system
        .graph()
        .edges()
        .iter()
        .map(|&e| (e, classify(spectral_norm(system.transition(e).expect("graph edge")))))
        .collect()
}

/// An E1 edge whose source subsystem cannot contract.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularValueFlag {
    pub edge: Edge,
    /// `s_min(e^{J_r})`.
    pub smallest_singular_value: f64,
}

/// A planar loop on which every subsystem has non-negative trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFlag {
    #[serde(rename = "loop")]
    pub loop_path: VertexPath,
    pub traces: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TraceCheck {
    Checked { flagged: Vec<TraceFlag> },
    NotApplicable { dimension: usize },
    Skipped { reason: String },
}

/// Obstructions that rule the edge conditions out. An empty report is not
/// a feasibility guarantee.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NecessaryReport {
    pub singular_value_flags: Vec<SingularValueFlag>,
    pub trace_check: TraceCheck,
}

impl NecessaryReport {
    pub fn is_clear(&self) -> bool {
        self.singular_value_flags.is_empty()
            && !matches!(&self.trace_check, TraceCheck::Checked { flagged } if !flagged.is_empty())
    }

    pub fn trace_flags(&self) -> &[TraceFlag] {
        match &self.trace_check {
            TraceCheck::Checked { flagged } => flagged,
            _ => &[],
        }
    }
}

pub fn necessary_checks(system: &SwitchedSystem) -> NecessaryReport {
    let partition = partition_edges(system);
    let singular_value_flags = partition
        .iter()
        .filter(|(_, c)| **c == EdgeClass::E1)
        .filter_map(|(&edge, _)| {
            let s = system.decomposition(edge.from).exp(1.0).smallest_singular_value();
            (s >= 1.0).then_some(SingularValueFlag { edge, smallest_singular_value: s })
        })
        .collect();
    let trace_check = if system.dim() != 2 {
        TraceCheck::NotApplicable { dimension: system.dim() }
    } else {
        match enumerate_simple_loops(system.graph(), DEFAULT_MAX_LOOPS) {
            Ok(loops) => TraceCheck::Checked {
                flagged: loops
                    .into_iter()
                    .filter_map(|l| {
                        let traces: Vec<f64> = l.vertices()[..l.len() - 1]
                            .iter()
                            .map(|&v| system.subsystem(v).trace())
                            .collect();
                        traces.iter().all(|&t| t >= 0.0).then_some(TraceFlag { loop_path: l, traces })
                    })
                    .collect(),
            },
            Err(e) => TraceCheck::Skipped { reason: e.to_string() },
        }
    };
    NecessaryReport { singular_value_flags, trace_check }
}

/// How certify chooses the stored interval around each `eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub scan: ScanOptions,
    /// Stored intervals are the component around `eta` where the edge norm
    /// stays below `max(1 - level_margin, (norm(eta) + 1) / 2)`.
    pub level_margin: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self { scan: ScanOptions::default(), level_margin: 0.01 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeCondition {
    pub edge: Edge,
    pub eta: f64,
    /// Edge norm at `eta`.
    pub norm_value: f64,
    /// Stored dwell interval.
    pub interval: OpenInterval,
    pub partition: EdgeClass,
    /// `||P_(r,s)||`.
    pub transition_norm: f64,
    /// Supremum of the edge norm over the closure of `interval`.
    pub sup_norm: f64,
}

/// Every dwell sequence in the class satisfies
/// `||x(t_n)|| <= C K^{n-1} ||x(0)||`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub conditions: Vec<EdgeCondition>,
    pub contraction_k: f64,
    pub amplification_c: f64,
}

impl Certificate {
    pub fn intervals(&self) -> BTreeMap<Edge, OpenInterval> {
        self.conditions.iter().map(|c| (c.edge, c.interval)).collect()
    }

    pub fn condition(&self, e: Edge) -> Option<&EdgeCondition> {
        self.conditions.iter().find(|c| c.edge == e)
    }

    /// `C K^{n-1}` for switch index `n >= 1`.
    pub fn bound(&self, n: usize) -> f64 {
        envelope_bound(self.amplification_c, self.contraction_k, n)
    }
}

pub fn envelope_bound(c: f64, k: f64, n: usize) -> f64 {
    c * k.powi(n as i32 - 1)
}

fn check_etas(
    system: &SwitchedSystem,
    etas: &BTreeMap<Edge, f64>,
) -> Result<Vec<(Edge, f64)>, CertifyError> {
    system
        .graph()
        .edges()
        .iter()
        .map(|&e| {
            let eta = *etas.get(&e).ok_or(CertifyError::MissingEta(e))?;
            if !(eta.is_finite() && eta > 0.0) {
                return Err(CertifyError::InvalidEta { edge: e, eta });
            }
            Ok((e, eta))
        })
        .collect()
}

/// Checks every edge norm at its `eta` and builds the certificate with
/// automatically chosen stored intervals (see [`CertifyOptions`]).
pub fn certify(
    system: &SwitchedSystem,
    etas: &BTreeMap<Edge, f64>,
    opts: &CertifyOptions,
) -> Result<Certificate, CertifyError> {
    opts.scan.validate()?;
    let pairs = check_etas(system, etas)?;
    let norms = eta_norms(system, &pairs)?;
    let intervals: Vec<OpenInterval> = pairs
        .par_iter()
        .zip(&norms)
        .map(|(&(e, eta), &value)| {
            let f = system.edge_norm_fn(e).expect("checked edge");
            let level = (1.0 - opts.level_margin).max(0.5 * (value + 1.0));
            let t_max = opts.scan.t_max.max(2.0 * eta);
            scan::component_containing(&f, level, eta, t_max, opts.scan.step(), opts.scan.refine_tol)
        })
        .collect();
    assemble(system, &pairs, &norms, &intervals, &opts.scan)
}

/// Like [`certify`] but with caller-chosen intervals, each of which must
/// contain its `eta` and keep the edge norm below one on its closure.
pub fn certify_with_intervals(
    system: &SwitchedSystem,
    etas: &BTreeMap<Edge, f64>,
    intervals: &BTreeMap<Edge, OpenInterval>,
    opts: &ScanOptions,
) -> Result<Certificate, CertifyError> {
    opts.validate()?;
    let pairs = check_etas(system, etas)?;
    let mut ivs = Vec::with_capacity(pairs.len());
    for &(e, eta) in &pairs {
        let iv = *intervals.get(&e).ok_or(CertifyError::MissingInterval(e))?;
        if !iv.contains(eta) {
            return Err(CertifyError::EtaOutsideInterval { edge: e, eta, interval: iv });
        }
        ivs.push(iv);
    }
    let norms = eta_norms(system, &pairs)?;
    assemble(system, &pairs, &norms, &ivs, opts)
}

fn eta_norms(system: &SwitchedSystem, pairs: &[(Edge, f64)]) -> Result<Vec<f64>, CertifyError> {
    let norms: Vec<f64> =
        pairs.iter().map(|&(e, eta)| system.edge_norm(e, eta).expect("checked edge")).collect();
    let failures: Vec<EdgeFailure> = pairs
        .iter()
        .zip(&norms)
        .filter(|(_, n)| !(**n < 1.0))
        .map(|(&(edge, eta), &norm)| EdgeFailure { edge, norm, location: format!("eta = {eta}") })
        .collect();
    if failures.is_empty() {
        Ok(norms)
    } else {
        Err(CertifyError::ConditionViolated(failures))
    }
}

fn assemble(
    system: &SwitchedSystem,
    pairs: &[(Edge, f64)],
    norms: &[f64],
    intervals: &[OpenInterval],
    opts: &ScanOptions,
) -> Result<Certificate, CertifyError> {
    let sups: Vec<f64> = pairs
        .iter()
        .zip(intervals)
        .map(|(&(e, _), iv)| {
            let f = system.edge_norm_fn(e).expect("checked edge");
            scan::sup_on(&f, iv.lo, iv.hi, opts.grid_points)
        })
        .collect();
    let failures: Vec<EdgeFailure> = pairs
        .iter()
        .zip(intervals)
        .zip(&sups)
        .filter(|(_, s)| !(**s < 1.0))
        .map(|((&(edge, _), iv), &norm)| EdgeFailure { edge, norm, location: format!("interval {iv}") })
        .collect();
    if !failures.is_empty() {
        return Err(CertifyError::ConditionViolated(failures));
    }

    let conditions: Vec<EdgeCondition> = pairs
        .iter()
        .zip(norms)
        .zip(intervals)
        .zip(&sups)
        .map(|(((&(edge, eta), &norm_value), &interval), &sup_norm)| {
            let transition_norm = spectral_norm(system.transition(edge).expect("checked edge"));
            EdgeCondition {
                edge,
                eta,
                norm_value,
                interval,
                partition: classify(transition_norm),
                transition_norm,
                sup_norm,
            }
        })
        .collect();
    let contraction_k = sups.iter().cloned().fold(0.0, f64::max);
    let amplification_c = amplification(system, &conditions, opts.grid_points);
    Ok(Certificate { conditions, contraction_k, amplification_c })
}

/// `max(1, sup ||P_s e^{t J_s}|| ||P_r^-1||)` over `s` reachable from `r`
/// and `t` in the stored intervals of edges leaving `s`.
fn amplification(system: &SwitchedSystem, conditions: &[EdgeCondition], points: usize) -> f64 {
    let k = system.vertex_count();
    let leave: Vec<f64> = (1..=k)
        .map(|s| {
            let d = system.decomposition(s);
            let f = |t: f64| spectral_norm(&(d.p() * &d.exp(t)));
            conditions
                .iter()
                .filter(|c| c.edge.from == s)
                .map(|c| scan::sup_on(&f, c.interval.lo, c.interval.hi, points))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let inv_norms: Vec<f64> =
        (1..=k).map(|r| spectral_norm(system.decomposition(r).p_inv())).collect();
    let reach = system.graph().reachability();
    let mut c: f64 = 1.0;
    for r in 1..=k {
        for s in 1..=k {
            if reach[r][s] && leave[s - 1].is_finite() {
                c = c.max(inv_norms[r - 1] * leave[s - 1]);
            }
        }
    }
    c
}

/// Dwell values at the grid minimum of each edge norm on `(0, t_max]`.
pub fn auto_etas(system: &SwitchedSystem, opts: &ScanOptions) -> Result<BTreeMap<Edge, f64>, CertifyError> {
    opts.validate()?;
    system
        .graph()
        .edges()
        .iter()
        .map(|&e| {
            let f = system.edge_norm_fn(e)?;
            Ok((e, scan::argmin_on(&f, opts.t_max, opts.grid_points)))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvelopePoint {
    pub switch_index: usize,
    pub time: f64,
    pub bound: f64,
}

/// Guaranteed bound on `||x(t_n)|| / ||x(0)||` at every switch of a signal
/// in the certified class.
pub fn decay_envelope(
    cert: &Certificate,
    signal: &SwitchingSignal,
) -> Result<Vec<EnvelopePoint>, CertifyError> {
    let intervals = cert.intervals();
    let inside = signal
        .edge_dwells()
        .all(|(e, d)| intervals.get(&e).is_some_and(|iv| iv.contains(d)));
    if !inside {
        return Err(CertifyError::SignalOutsideClass);
    }
    Ok(signal
        .switch_times()
        .iter()
        .enumerate()
        .map(|(i, &time)| EnvelopePoint { switch_index: i + 1, time, bound: cert.bound(i + 1) })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    Bounded(f64),
    Unbounded,
}

/// Time budgets for one simple loop. `m` sums `ln ||P||` over its E2 edges
/// and `n` sums `ln K` over its E1 edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopBudget {
    #[serde(rename = "loop")]
    pub loop_path: VertexPath,
    /// False when the loop has no E2 edge; the remaining fields are then unset.
    pub applicable: bool,
    pub m: f64,
    pub n: f64,
    pub lambda_max: Option<f64>,
    pub gamma_sum: Option<f64>,
    /// Bound on the total time spent on the loop's E2 edges.
    pub total_budget: Option<Budget>,
    /// Bound on the time spent on each E2 edge when all share one dwell.
    pub per_edge_budget: Option<Budget>,
}

/// `-(m + n) / rate` for positive `rate`, otherwise unbounded.
pub fn budget_from(m: f64, n: f64, rate: f64) -> Budget {
    if rate > 0.0 {
        Budget::Bounded(-(m + n) / rate)
    } else {
        Budget::Unbounded
    }
}

/// Budgets for every simple loop. `K` for an E1 edge is the supremum of its
/// edge norm over the closure of the given interval.
pub fn loop_budgets(
    system: &SwitchedSystem,
    intervals: &BTreeMap<Edge, OpenInterval>,
    opts: &ScanOptions,
) -> Result<Vec<LoopBudget>, CertifyError> {
    let partition = partition_edges(system);
    let loops = enumerate_simple_loops(system.graph(), DEFAULT_MAX_LOOPS)?;
    let mut k_cache: BTreeMap<Edge, f64> = BTreeMap::new();
    let mut out = Vec::with_capacity(loops.len());
    for l in loops {
        let edges: Vec<Edge> = l.edges().collect();
        let e2: Vec<Edge> = edges.iter().copied().filter(|e| partition[e] == EdgeClass::E2).collect();
        if e2.is_empty() {
            out.push(LoopBudget {
                loop_path: l,
                applicable: false,
                m: 0.0,
                n: 0.0,
                lambda_max: None,
                gamma_sum: None,
                total_budget: None,
                per_edge_budget: None,
            });
            continue;
        }
        let m: f64 = e2.iter().map(|&e| spectral_norm(system.transition(e).unwrap()).ln()).sum();
        let mut n = 0.0;
        for &e in edges.iter().filter(|e| partition[e] == EdgeClass::E1) {
            let k = match k_cache.get(&e) {
                Some(&k) => k,
                None => {
                    let iv = intervals.get(&e).ok_or(CertifyError::MissingInterval(e))?;
                    let f = system.edge_norm_fn(e)?;
                    let k = scan::sup_on(&f, iv.lo, iv.hi, opts.grid_points);
                    k_cache.insert(e, k);
                    k
                }
            };
            n += k.ln();
        }
        let abscissas: Vec<f64> =
            e2.iter().map(|e| system.decomposition(e.from).spectral_abscissa()).collect();
        let lambda = abscissas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gamma: f64 = abscissas.iter().sum();
        out.push(LoopBudget {
            loop_path: l,
            applicable: true,
            m,
            n,
            lambda_max: Some(lambda),
            gamma_sum: Some(gamma),
            total_budget: Some(budget_from(m, n, lambda)),
            per_edge_budget: Some(budget_from(m, n, gamma)),
        });
    }
    Ok(out)
}

/// Dwell above which the edge norm is guaranteed below one when the source
/// is Hurwitz: `-ln(beta ||P_(r,s)||) / lambda_star` with
/// `beta = sup_{t >= 0} ||e^{t J_r}|| e^{-lambda_star t}`.
pub fn stable_edge_lower_bound(
    system: &SwitchedSystem,
    e: Edge,
    lambda_star: f64,
) -> Result<f64, CertifyError> {
    let p = system.transition(e)?;
    let d = system.decomposition(e.from);
    let abscissa = d.spectral_abscissa();
    if !(abscissa < 0.0) {
        return Err(CertifyError::NotHurwitz { vertex: e.from, abscissa });
    }
    if !(abscissa < lambda_star && lambda_star < 0.0) {
        return Err(CertifyError::BadLambdaStar { lambda_star, abscissa });
    }
    let beta = decay_overshoot(d, lambda_star);
    Ok(-(beta * spectral_norm(p)).ln() / lambda_star)
}

fn decay_overshoot(d: &SpectralDecomposition, lambda_star: f64) -> f64 {
    let gap = lambda_star - d.spectral_abscissa();
    let width = d.blocks().iter().map(|b| b.size()).max().unwrap_or(1) as f64;
    let horizon = (40.0 + 10.0 * width) / gap;
    let f = |t: f64| spectral_norm(&d.exp(t)) * (-lambda_star * t).exp();
    let n = 4096;
    let h = horizon / n as f64;
    let vals = scan::samples(&f, horizon, n);
    let (i, v) = scan::argmax(&vals);
    let a = i.saturating_sub(1) as f64 * h;
    let b = ((i + 1) as f64 * h).min(horizon);
    v.max(scan::golden_max(&f, a, b)).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{decomposition_from_parts, JordanBlock};

    fn diag_system(p1: &[f64], j1: &[f64], p2: &[f64], j2: &[f64]) -> SwitchedSystem {
        let dec = |p: &[f64], j: &[f64]| {
            let pm = SquareMatrix::diag(p);
            let jm = SquareMatrix::diag(j);
            let a = &(&pm * &jm) * &pm.inverse().unwrap();
            let blocks = j.iter().map(|&lambda| JordanBlock::Real { lambda }).collect();
            decomposition_from_parts(pm, blocks, a).unwrap()
        };
        SwitchedSystem::new(SwitchGraph::ring(2).unwrap(), vec![dec(p1, j1), dec(p2, j2)]).unwrap()
    }

    fn scaled_diagonal_pair() -> SwitchedSystem {
        let e = std::f64::consts::E;
        diag_system(&[e * e, e.powi(-3)], &[-1.0, 1.0], &[1.0, 1.0], &[1.0, -2.0])
    }

    fn etas(a: f64, b: f64) -> BTreeMap<Edge, f64> {
        [(Edge::new(1, 2), a), (Edge::new(2, 1), b)].into_iter().collect()
    }

    #[test]
    fn edge_norm_of_scaled_diagonal_pair() {
        let sys = scaled_diagonal_pair();
        let e = Edge::new(1, 2);
        let v = sys.edge_norm(e, 2.5).unwrap();
        assert!((v - (-0.5f64).exp()).abs() < 1e-14);
        for t in [0.5f64, 1.9, 3.1, 6.0] {
            let want = (2.0 - t).exp().max((t - 3.0).exp());
            assert!((sys.edge_norm(e, t).unwrap() - want).abs() < 1e-12 * want);
        }
        let iv = feasible_interval(&sys, e, &ScanOptions::default()).unwrap();
        assert_eq!(iv.len(), 1);
        assert!((iv[0].lo - 2.0).abs() < 1e-8 && (iv[0].hi - 3.0).abs() < 1e-8);
        assert_eq!(sys.edge_norm(Edge::new(1, 1), 1.0), Err(CertifyError::NotAnEdge(Edge::new(1, 1))));
    }

    #[test]
    fn identical_zero_subsystems_have_unit_norm() {
        let sys = diag_system(&[1.0, 1.0], &[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0]);
        for t in [0.1, 1.0, 10.0] {
            assert_eq!(sys.edge_norm(Edge::new(1, 2), t).unwrap(), 1.0);
        }
        assert!(partition_edges(&sys).values().all(|c| *c == EdgeClass::E1));
        assert!(feasible_interval(&sys, Edge::new(1, 2), &ScanOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn decaying_ring_is_feasible_everywhere() {
        let sys = diag_system(&[1.0, 1.0], &[-1.0, -1.0], &[1.0, 1.0], &[-1.0, -1.0]);
        let opts = ScanOptions { t_max: 10.0, ..Default::default() };
        let iv = feasible_interval(&sys, Edge::new(1, 2), &opts).unwrap();
        assert_eq!(iv.len(), 1);
        assert!(iv[0].lo < 1e-8 && iv[0].lo > 0.0);
        assert_eq!(iv[0].hi, 10.0);

        let cert = certify(&sys, &etas(0.8, 1.3), &CertifyOptions::default()).unwrap();
        assert!(cert.contraction_k < 1.0);
        assert!(cert.contraction_k >= (-0.8f64).exp());
        assert_eq!(cert.amplification_c, 1.0);
    }

    #[test]
    fn unscaled_diagonal_pair_violates_both_edges() {
        let sys = diag_system(&[1.0, 1.0], &[-1.0, 1.0], &[1.0, 1.0], &[1.0, -2.0]);
        match certify(&sys, &etas(2.5, 1.75), &CertifyOptions::default()) {
            Err(CertifyError::ConditionViolated(f)) => assert_eq!(f.len(), 2),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn certificate_of_scaled_pair() {
        let sys = scaled_diagonal_pair();
        let cert = certify(&sys, &etas(2.5, 1.75), &CertifyOptions::default()).unwrap();
        assert!(cert.contraction_k < 1.0);
        assert!(cert.amplification_c >= 1.0);
        let c12 = cert.condition(Edge::new(1, 2)).unwrap();
        assert!(c12.interval.contains(2.5));
        assert!(c12.interval.lo > 2.0 && c12.interval.hi < 3.0);
        let c21 = cert.condition(Edge::new(2, 1)).unwrap();
        assert!(c21.interval.lo > 1.5 && c21.interval.hi < 2.0);
        assert!(c12.sup_norm < 1.0 && c21.sup_norm < 1.0);
    }

    #[test]
    fn explicit_intervals_are_checked() {
        let sys = scaled_diagonal_pair();
        let mut iv: BTreeMap<Edge, OpenInterval> = BTreeMap::new();
        iv.insert(Edge::new(1, 2), OpenInterval::new(2.2, 2.8));
        iv.insert(Edge::new(2, 1), OpenInterval::new(1.6, 1.9));
        let opts = ScanOptions::default();
        let cert = certify_with_intervals(&sys, &etas(2.5, 1.75), &iv, &opts).unwrap();
        assert_eq!(cert.intervals(), iv);
        iv.insert(Edge::new(2, 1), OpenInterval::new(1.4, 1.9));
        assert!(matches!(
            certify_with_intervals(&sys, &etas(2.5, 1.75), &iv, &opts),
            Err(CertifyError::ConditionViolated(_))
        ));
        assert!(matches!(
            certify_with_intervals(&sys, &etas(2.5, 1.95), &iv, &opts),
            Err(CertifyError::EtaOutsideInterval { .. })
        ));
    }

    #[test]
    fn missing_and_invalid_etas() {
        let sys = scaled_diagonal_pair();
        let mut only = BTreeMap::new();
        only.insert(Edge::new(1, 2), 2.5);
        assert_eq!(
            certify(&sys, &only, &CertifyOptions::default()),
            Err(CertifyError::MissingEta(Edge::new(2, 1)))
        );
        assert!(matches!(
            certify(&sys, &etas(-1.0, 1.75), &CertifyOptions::default()),
            Err(CertifyError::InvalidEta { .. })
        ));
    }

    #[test]
    fn envelope_is_geometric() {
        let cert = Certificate { conditions: vec![], contraction_k: 0.5, amplification_c: 2.0 };
        assert_eq!(cert.bound(1), 2.0);
        assert_eq!(cert.bound(4), 0.25);
    }

    #[test]
    fn envelope_rejects_signals_outside_the_class() {
        let sys = scaled_diagonal_pair();
        let cert = certify(&sys, &etas(2.5, 1.75), &CertifyOptions::default()).unwrap();
        let path = VertexPath::new(vec![1, 2, 1]).unwrap();
        let inside = SwitchingSignal::from_dwells(path.clone(), &[2.5, 1.75]).unwrap();
        let env = decay_envelope(&cert, &inside).unwrap();
        assert_eq!(env.len(), 2);
        assert_eq!(env[0].bound, cert.amplification_c);
        let outside = SwitchingSignal::from_dwells(path, &[2.5, 2.5]).unwrap();
        assert_eq!(decay_envelope(&cert, &outside), Err(CertifyError::SignalOutsideClass));
    }

    #[test]
    fn budget_arithmetic() {
        assert_eq!(budget_from(-1.0, -0.5, 1.0), Budget::Bounded(1.5));
        assert_eq!(budget_from(-1.0, -0.5, -0.3), Budget::Unbounded);
    }

    #[test]
    fn loop_budget_of_a_slow_fast_ring() {
        // edge (1,2) is E2 with ||P|| = e^-1 and source abscissa 1
        let e = std::f64::consts::E;
        let sys = diag_system(&[1.0, 1.0], &[1.0, -3.0], &[e, e], &[-1.0, -1.0]);
        let part = partition_edges(&sys);
        assert_eq!(part[&Edge::new(1, 2)], EdgeClass::E2);
        assert_eq!(part[&Edge::new(2, 1)], EdgeClass::E1);
        // edge (2,1) norm is e^{1-t}; on [1.5, 3] the supremum is e^-0.5
        let mut iv = BTreeMap::new();
        iv.insert(Edge::new(2, 1), OpenInterval::new(1.5, 3.0));
        let b = loop_budgets(&sys, &iv, &ScanOptions::default()).unwrap();
        assert_eq!(b.len(), 1);
        assert!((b[0].m + 1.0).abs() < 1e-12);
        assert!((b[0].n + 0.5).abs() < 1e-9);
        match b[0].total_budget {
            Some(Budget::Bounded(v)) => assert!((v - 1.5).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            loop_budgets(&sys, &BTreeMap::new(), &ScanOptions::default()),
            Err(CertifyError::MissingInterval(Edge::new(2, 1)))
        );
        let all_e1 = diag_system(&[1.0, 1.0], &[-1.0, -1.0], &[1.0, 1.0], &[-1.0, -1.0]);
        let b = loop_budgets(&all_e1, &BTreeMap::new(), &ScanOptions::default()).unwrap();
        assert!(!b[0].applicable);
    }

    #[test]
    fn analytic_e2_endpoint_lies_in_reported_interval() {
        let e = std::f64::consts::E;
        let sys = diag_system(&[1.0, 1.0], &[1.0, -3.0], &[e, e], &[-1.0, -1.0]);
        let t = e2_analytic_endpoint(&sys, Edge::new(1, 2)).unwrap().unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let iv = feasible_interval(&sys, Edge::new(1, 2), &ScanOptions::default()).unwrap();
        assert_eq!(iv[0].lo, 0.0);
        assert!(iv[0].hi >= t - 1e-9);
    }

    #[test]
    fn stable_edge_bound_for_diagonal_decay() {
        let e = std::f64::consts::E;
        let sys = diag_system(&[e, e], &[-2.0, -1.5], &[1.0, 1.0], &[-1.0, -1.0]);
        let b = stable_edge_lower_bound(&sys, Edge::new(1, 2), -1.0).unwrap();
        assert!((b - 1.0).abs() < 1e-12);
        for t in [1.01, 1.5, 3.0] {
            assert!(sys.edge_norm(Edge::new(1, 2), t).unwrap() < 1.0);
        }
        // ||P_(2,1)|| = 1/e needs no lower bound
        assert!(stable_edge_lower_bound(&sys, Edge::new(2, 1), -0.5).unwrap() < 0.0);
        assert!(matches!(
            stable_edge_lower_bound(&sys, Edge::new(1, 2), -3.0),
            Err(CertifyError::BadLambdaStar { .. })
        ));
        let unstable = diag_system(&[1.0, 1.0], &[-10.0, 0.1], &[1.0, 1.0], &[-1.0, -1.0]);
        assert!(matches!(
            stable_edge_lower_bound(&unstable, Edge::new(1, 2), -0.05),
            Err(CertifyError::NotHurwitz { .. })
        ));
    }

    #[test]
    fn trace_check_flags_nonnegative_loops() {
        let sys = diag_system(&[1.0, 1.0], &[-1.0, 2.0], &[1.0, 1.0], &[1.5, -1.0]);
        let r = necessary_checks(&sys);
        assert_eq!(r.trace_flags().len(), 1);
        assert!(!r.is_clear());
        let ok = diag_system(&[1.0, 1.0], &[-1.0, 0.5], &[1.0, 1.0], &[0.5, -1.0]);
        assert!(necessary_checks(&ok).trace_flags().is_empty());
    }

    #[test]
    fn singular_value_check_flags_expanding_sources() {
        let sys = diag_system(&[1.0, 1.0], &[0.5, 1.0], &[1.0, 1.0], &[-1.0, -1.0]);
        let r = necessary_checks(&sys);
        assert_eq!(r.singular_value_flags.len(), 1);
        assert_eq!(r.singular_value_flags[0].edge, Edge::new(1, 2));
    }

    #[test]
    fn auto_etas_find_the_minimum() {
        let sys = scaled_diagonal_pair();
        let e = auto_etas(&sys, &ScanOptions::default()).unwrap();
        assert!((e[&Edge::new(1, 2)] - 2.5).abs() < 1e-6);
        assert!((e[&Edge::new(2, 1)] - 5.0 / 3.0).abs() < 1e-6);
    }
}
