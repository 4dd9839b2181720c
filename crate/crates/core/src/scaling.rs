//! Diagonal rescaling of eigenvector matrices.
//!
//! Replacing `P_i` by `P_i D_i` with diagonal `D_i` that commutes with `J_i`
//! leaves `A_i` unchanged but turns the edge condition into
//! `||D_s^-1 P_(r,s) D_r e^{eta J_r}|| < 1`. [`search`] looks for such
//! `D_i` and dwell values by multistart Nelder-Mead in log space.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::{CertifyError, SwitchedSystem};
use crate::graph::{edge_map, Edge};
use crate::matrix::spectral_norm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScalingError {
    #[error("assignment has {found} entries where {expected} are needed ({what})")]
    DimensionMismatch { what: &'static str, expected: usize, found: usize },
    #[error("no dwell value for edge {0}")]
    MissingEta(Edge),
    #[error("dwell value {eta} for edge {edge} must be positive and finite")]
    InvalidEta { edge: Edge, eta: f64 },
    #[error("log-diagonal entries must be finite")]
    NonFiniteScaling,
    #[error("assignment is not feasible (objective {objective})")]
    InfeasibleAssignment { objective: f64 },
    #[error("scaling of vertex {0} is not constant on a multi-column Jordan block")]
    NonCommutingScaling(usize),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Certify(#[from] CertifyError),
}

/// `D_i = diag(exp(log_diagonals[i-1]))` and one dwell value per edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingAssignment {
    pub log_diagonals: Vec<Vec<f64>>,
    #[serde(with = "edge_map")]
    pub etas: BTreeMap<Edge, f64>,
}

impl ScalingAssignment {
    pub fn new(log_diagonals: Vec<Vec<f64>>, etas: BTreeMap<Edge, f64>) -> Result<Self, ScalingError> {
        if log_diagonals.iter().flatten().any(|v| !v.is_finite()) {
            return Err(ScalingError::NonFiniteScaling);
        }
        if let Some((&edge, &eta)) = etas.iter().find(|(_, &v)| !(v.is_finite() && v > 0.0)) {
            return Err(ScalingError::InvalidEta { edge, eta });
        }
        Ok(Self { log_diagonals, etas })
    }

    /// `D_i = I` and the same dwell on every edge.
    pub fn identity(system: &SwitchedSystem, eta: f64) -> Self {
        Self {
            log_diagonals: vec![vec![0.0; system.dim()]; system.vertex_count()],
            etas: system.graph().edges().iter().map(|&e| (e, eta)).collect(),
        }
    }

    /// Diagonal of `D_v`, 1-based.
    pub fn diagonal(&self, v: usize) -> Vec<f64> {
        self.log_diagonals[v - 1].iter().map(|x| x.exp()).collect()
    }

    pub fn is_gauge_fixed(&self) -> bool {
        self.log_diagonals.first().is_some_and(|d| d.iter().all(|&x| x == 0.0))
    }

    fn check(&self, system: &SwitchedSystem) -> Result<(), ScalingError> {
        let k = system.vertex_count();
        if self.log_diagonals.len() != k {
            return Err(ScalingError::DimensionMismatch {
                what: "vertices",
                expected: k,
                found: self.log_diagonals.len(),
            });
        }
        let n = system.dim();
        if let Some(d) = self.log_diagonals.iter().find(|d| d.len() != n) {
            return Err(ScalingError::DimensionMismatch { what: "diagonal length", expected: n, found: d.len() });
        }
        if let Some(&e) = system.graph().edges().iter().find(|e| !self.etas.contains_key(e)) {
            return Err(ScalingError::MissingEta(e));
        }
        Ok(())
    }
}

/// Scaled edge norm `||D_s^-1 P_(r,s) D_r e^{eta J_r}||`.
pub fn scaled_edge_norm(
    system: &SwitchedSystem,
    assignment: &ScalingAssignment,
    e: Edge,
) -> Result<f64, ScalingError> {
    assignment.check(system)?;
    let eta = *assignment.etas.get(&e).ok_or(ScalingError::MissingEta(e))?;
    Ok(scaled_norm_unchecked(system, &assignment.log_diagonals, e, eta))
}

fn scaled_norm_unchecked(system: &SwitchedSystem, logs: &[Vec<f64>], e: Edge, eta: f64) -> f64 {
    let p = system.transition(e).expect("graph edge");
    let cols: Vec<f64> = logs[e.from - 1].iter().map(|x| x.exp()).collect();
    let rows: Vec<f64> = logs[e.to - 1].iter().map(|x| (-x).exp()).collect();
    let m = p.scale_columns(&cols).scale_rows(&rows);
    spectral_norm(&(&m * &system.decomposition(e.from).exp(eta)))
}

/// Largest log scaled edge norm; negative exactly when every scaled edge
/// condition holds strictly.
pub fn scaled_objective(
    system: &SwitchedSystem,
    assignment: &ScalingAssignment,
) -> Result<f64, ScalingError> {
    assignment.check(system)?;
    Ok(objective_unchecked(system, &assignment.log_diagonals, &assignment.etas))
}

fn objective_unchecked(system: &SwitchedSystem, logs: &[Vec<f64>], etas: &BTreeMap<Edge, f64>) -> f64 {
    system
        .graph()
        .edges()
        .iter()
        .map(|&e| scaled_norm_unchecked(system, logs, e, etas[&e]).ln())
        .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) })
}

/// Replaces every `P_i` by `P_i D_i`.
pub fn fold(system: &SwitchedSystem, assignment: &ScalingAssignment) -> Result<SwitchedSystem, ScalingError> {
    let objective = scaled_objective(system, assignment)?;
    if !(objective < 0.0) {
        return Err(ScalingError::InfeasibleAssignment { objective });
    }
    let decompositions = (1..=system.vertex_count())
        .map(|v| {
            system
                .decomposition(v)
                .with_scaled_columns(&assignment.diagonal(v))
                .map_err(|_| ScalingError::NonCommutingScaling(v))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(system.with_decompositions(decompositions)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub restarts: usize,
    pub max_iterations: usize,
    pub eta_range: (f64, f64),
    /// Symmetric bound on every log-diagonal entry.
    pub log_diag_range: f64,
    pub margin: f64,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            restarts: 64,
            max_iterations: 2000,
            eta_range: (1e-3, 50.0),
            log_diag_range: 12.0,
            margin: 1e-3,
            seed: 0,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), ScalingError> {
        let (lo, hi) = self.eta_range;
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(ScalingError::InvalidConfig("restarts and iterations must be positive".into()));
        }
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(ScalingError::InvalidConfig(format!("eta range ({lo}, {hi}) is degenerate")));
        }
        if !(self.log_diag_range > 0.0 && self.log_diag_range.is_finite()) {
            return Err(ScalingError::InvalidConfig("log-diagonal range must be positive".into()));
        }
        if !(self.margin > 0.0) {
            return Err(ScalingError::InvalidConfig("margin must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Feasible,
    InfeasibleWithinBudget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub status: SearchStatus,
    /// Relative to the unit-column normalization of the searched system.
    pub assignment: Option<ScalingAssignment>,
    pub objective: f64,
    /// Best objective of each restart, in restart order.
    pub trace: Vec<f64>,
    pub note: String,
}

impl SearchResult {
    /// Folds the assignment into `system.with_unit_columns()`.
    pub fn folded(&self, system: &SwitchedSystem) -> Option<Result<SwitchedSystem, ScalingError>> {
        self.assignment.as_ref().map(|a| fold(&system.with_unit_columns(), a))
    }
}

/// Layout of the search vector: one log-scale per Jordan block of vertices
/// `2..=k` (vertex 1 is the gauge), then one `ln eta` per edge.
struct Layout {
    blocks: Vec<Vec<(usize, usize)>>,
    scale_vars: usize,
    edges: Vec<Edge>,
    n: usize,
}

impl Layout {
    fn new(system: &SwitchedSystem) -> Self {
        let blocks: Vec<Vec<(usize, usize)>> =
            system.decompositions().iter().map(|d| d.block_ranges()).collect();
        let scale_vars = blocks[1..].iter().map(Vec::len).sum();
        Self { blocks, scale_vars, edges: system.graph().edges().to_vec(), n: system.dim() }
    }

    fn len(&self) -> usize {
        self.scale_vars + self.edges.len()
    }

    fn decode(&self, x: &[f64]) -> (Vec<Vec<f64>>, BTreeMap<Edge, f64>) {
        let mut logs = vec![vec![0.0; self.n]; self.blocks.len()];
        let mut i = 0;
        for (v, ranges) in self.blocks.iter().enumerate().skip(1) {
            for &(o, len) in ranges {
                logs[v][o..o + len].fill(x[i]);
                i += 1;
            }
        }
        let etas = self.edges.iter().zip(&x[self.scale_vars..]).map(|(&e, &l)| (e, l.exp())).collect();
        (logs, etas)
    }
}

/// Multistart search for a scaling that satisfies every edge condition with
/// the configured margin. The system is first normalized to unit columns.
pub fn search(system: &SwitchedSystem, config: &SearchConfig) -> Result<SearchResult, ScalingError> {
    config.validate()?;
    let work = system.with_unit_columns();
    let layout = Layout::new(&work);
    let (eta_lo, eta_hi) = (config.eta_range.0.ln(), config.eta_range.1.ln());
    let mut lower = vec![-config.log_diag_range; layout.len()];
    let mut upper = vec![config.log_diag_range; layout.len()];
    for i in layout.scale_vars..layout.len() {
        lower[i] = eta_lo;
        upper[i] = eta_hi;
    }
    let clamp = |x: &[f64]| -> Vec<f64> {
        x.iter().zip(lower.iter().zip(&upper)).map(|(v, (l, u))| v.clamp(*l, *u)).collect()
    };
    let objective = |x: &[f64]| -> f64 {
        let (logs, etas) = layout.decode(&clamp(x));
        let v = objective_unchecked(&work, &logs, &etas);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let per_edge_best: Vec<f64> = layout
        .edges
        .iter()
        .map(|&e| {
            (0..=64)
                .map(|i| eta_lo + (eta_hi - eta_lo) * i as f64 / 64.0)
                .map(|l| (l, work.edge_norm(e, l.exp()).unwrap_or(f64::INFINITY)))
                .fold((0.0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
                .0
        })
        .collect();

    let runs: Vec<(Vec<f64>, f64)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| {
            let mut x0 = vec![0.0; layout.len()];
            match r {
                0 => {}
                1 => x0[layout.scale_vars..].copy_from_slice(&per_edge_best),
                _ => {
                    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                    rng.set_stream(r as u64);
                    for (i, v) in x0.iter_mut().enumerate() {
                        *v = rng.random_range(lower[i]..upper[i]);
                    }
                }
            }
            let (x, f) = nelder_mead(&objective, x0, 1.0, config.max_iterations);
            (clamp(&x), f)
        })
        .collect();

    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.1 < runs[best].1 {
            best = i;
        }
    }
    let trace: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let (logs, etas) = layout.decode(&runs[best].0);
    let value = objective_unchecked(&work, &logs, &etas);
    let feasible = value <= -config.margin;
    let note = if feasible {
        format!("restart {best} satisfies every scaled edge condition with margin {:.3e}", -value)
    } else {
        format!(
            "no restart reached objective <= -{:e}; this is not a proof that no scaling exists",
            config.margin
        )
    };
    Ok(SearchResult {
        status: if feasible { SearchStatus::Feasible } else { SearchStatus::InfeasibleWithinBudget },
        assignment: feasible.then_some(ScalingAssignment { log_diagonals: logs, etas }),
        objective: value,
        trace,
        note,
    })
}

/// Nelder-Mead with standard coefficients. When the simplex collapses before
/// the iteration budget is spent, it is rebuilt around the best vertex with a
/// smaller step, which helps on the non-smooth max objective.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: Vec<f64>, step: f64, max_iter: usize) -> (Vec<f64>, f64) {
    let d = x0.len();
    let mut best = (x0.clone(), f(&x0));
    let mut step = step;
    let mut iters = 0;
    while iters < max_iter {
        let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(d + 1);
        simplex.push(best.clone());
        for i in 0..d {
            let mut x = best.0.clone();
            x[i] += step;
            let fx = f(&x);
            simplex.push((x, fx));
        }
        let start = best.1;
        while iters < max_iter {
            iters += 1;
            simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
            let spread = simplex[d].1 - simplex[0].1;
            let size = simplex[1..]
                .iter()
                .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
                .fold(0.0, f64::max);
            if spread.abs() <= 1e-13 * (1.0 + simplex[0].1.abs()) && size < 1e-9 {
                break;
            }
            let centroid: Vec<f64> =
                (0..d).map(|j| simplex[..d].iter().map(|(x, _)| x[j]).sum::<f64>() / d as f64).collect();
            let along = |c: f64| -> Vec<f64> {
                centroid.iter().zip(&simplex[d].0).map(|(m, w)| m + c * (w - m)).collect()
            };
            let xr = along(-1.0);
            let fr = f(&xr);
            if fr < simplex[0].1 {
                let xe = along(-2.0);
                let fe = f(&xe);
                simplex[d] = if fe < fr { (xe, fe) } else { (xr, fr) };
            } else if fr < simplex[d - 1].1 {
                simplex[d] = (xr, fr);
            } else {
                let (xc, fc) = if fr < simplex[d].1 {
                    let x = along(-0.5);
                    let fx = f(&x);
                    (x, fx)
                } else {
                    let x = along(0.5);
                    let fx = f(&x);
                    (x, fx)
                };
                if fc < fr.min(simplex[d].1) {
                    simplex[d] = (xc, fc);
                } else {
                    let x0 = simplex[0].0.clone();
                    for s in simplex.iter_mut().skip(1) {
                        s.0 = s.0.iter().zip(&x0).map(|(a, b)| b + 0.5 * (a - b)).collect();
                        s.1 = f(&s.0);
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < best.1 {
            best = simplex[0].clone();
        }
        if !(best.1 < start - 1e-12) && step < 1e-3 {
            break;
        }
        step = (step * 0.5).max(1e-4);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SwitchGraph;
    use crate::matrix::SquareMatrix;

    fn diagonal_pair(a1: [f64; 2], a2: [f64; 2]) -> SwitchedSystem {
        SwitchedSystem::from_matrices(
            SwitchGraph::ring(2).unwrap(),
            vec![SquareMatrix::diag(&a1), SquareMatrix::diag(&a2)],
        )
        .unwrap()
    }

    fn etas(a: f64, b: f64) -> BTreeMap<Edge, f64> {
        [(Edge::new(1, 2), a), (Edge::new(2, 1), b)].into_iter().collect()
    }

    #[test]
    fn decaying_identity_assignment() {
        let sys = diagonal_pair([-1.0, -1.0], [-1.0, -1.0]);
        let a = ScalingAssignment::identity(&sys, 1.0);
        assert!((scaled_objective(&sys, &a).unwrap() + 1.0).abs() < 1e-14);
        let folded = fold(&sys, &a).unwrap();
        for v in 1..=2 {
            assert_eq!(folded.decomposition(v).p(), sys.decomposition(v).p());
        }
    }

    #[test]
    fn hand_made_scaling_objective() {
        // A1 = diag(-1, 1), A2 = diag(1, -2); D1 = diag(e^2, e^-3), D2 = I
        let sys = diagonal_pair([-1.0, 1.0], [1.0, -2.0]);
        let a = ScalingAssignment::new(vec![vec![2.0, -3.0], vec![0.0, 0.0]], etas(2.5, 1.75)).unwrap();
        assert!((scaled_objective(&sys, &a).unwrap() + 0.25).abs() < 1e-12);
        let late = ScalingAssignment::new(vec![vec![2.0, -3.0], vec![0.0, 0.0]], etas(4.0, 1.75)).unwrap();
        assert!(scaled_objective(&sys, &late).unwrap() > 0.0);
        let folded = fold(&sys, &a).unwrap();
        let e = std::f64::consts::E;
        assert!(folded.decomposition(1).p().max_abs_diff(&SquareMatrix::diag(&[e * e, e.powi(-3)])) < 1e-12);
        assert!(folded.decomposition(1).reconstruction_residual() < 1e-9);
        assert!(matches!(fold(&sys, &late), Err(ScalingError::InfeasibleAssignment { .. })));
    }

    #[test]
    fn dimension_checks() {
        let sys = diagonal_pair([-1.0, 1.0], [1.0, -2.0]);
        let short = ScalingAssignment::new(vec![vec![0.0, 0.0]], etas(1.0, 1.0)).unwrap();
        assert!(matches!(scaled_objective(&sys, &short), Err(ScalingError::DimensionMismatch { .. })));
        let mut partial = etas(1.0, 1.0);
        partial.remove(&Edge::new(2, 1));
        let a = ScalingAssignment::new(vec![vec![0.0; 2]; 2], partial).unwrap();
        assert_eq!(scaled_objective(&sys, &a), Err(ScalingError::MissingEta(Edge::new(2, 1))));
    }

    #[test]
    fn search_finds_the_diagonal_scaling() {
        let sys = diagonal_pair([-1.0, 1.0], [1.0, -2.0]);
        let cfg = SearchConfig { restarts: 8, ..Default::default() };
        let r = search(&sys, &cfg).unwrap();
        assert_eq!(r.status, SearchStatus::Feasible);
        let a = r.assignment.as_ref().unwrap();
        assert!(a.is_gauge_fixed());
        let folded = r.folded(&sys).unwrap().unwrap();
        let cert = crate::certify::certify(&folded, &a.etas, &Default::default()).unwrap();
        assert!(cert.contraction_k < 1.0);
    }

    #[test]
    fn search_is_deterministic() {
        let sys = diagonal_pair([-1.0, 1.0], [1.0, -2.0]);
        let cfg = SearchConfig { restarts: 6, max_iterations: 300, seed: 11, ..Default::default() };
        assert_eq!(search(&sys, &cfg).unwrap(), search(&sys, &cfg).unwrap());
    }

    #[test]
    fn search_reports_failure_honestly() {
        let sys = diagonal_pair([-1.0, 2.0], [2.0, -1.0]);
        let cfg = SearchConfig { restarts: 6, max_iterations: 500, ..Default::default() };
        let r = search(&sys, &cfg).unwrap();
        assert_eq!(r.status, SearchStatus::InfeasibleWithinBudget);
        assert!(r.assignment.is_none());
        assert!(r.note.contains("not a proof"));
        assert_eq!(r.trace.len(), 6);
    }

    #[test]
    fn nelder_mead_minimizes_a_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.0).powi(2) + 10.0 * (x[1] + 2.0).powi(2);
        let (x, fx) = nelder_mead(&f, vec![0.0, 0.0], 1.0, 2000);
        assert!(fx < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-6 && (x[1] + 2.0).abs() < 1e-6);
    }
}
