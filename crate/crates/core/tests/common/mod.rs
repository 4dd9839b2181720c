//! Fixture systems and independent oracles shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use dwellcert::certify::SwitchedSystem;
use dwellcert::graph::{Edge, OpenInterval, SwitchGraph, VertexPath};
use dwellcert::matrix::{decomposition_from_parts, JordanBlock, SquareMatrix};
use dwellcert::planar::PlanarPair;

pub fn m2(a: f64, b: f64, c: f64, d: f64) -> SquareMatrix {
    SquareMatrix::from_row_slice(2, &[a, b, c, d])
}

fn real_blocks(lambdas: &[f64]) -> Vec<JordanBlock> {
    lambdas.iter().map(|&lambda| JordanBlock::Real { lambda }).collect()
}

pub fn path(v: &[usize]) -> VertexPath {
    VertexPath::new(v.to_vec()).unwrap()
}

/// `((r, s), (lo, hi))`
pub type EdgeSpan = ((usize, usize), (f64, f64));

pub fn intervals(items: &[EdgeSpan]) -> BTreeMap<Edge, OpenInterval> {
    items.iter().map(|&((r, s), (lo, hi))| (Edge::new(r, s), OpenInterval::new(lo, hi))).collect()
}

/// Two unstable subsystems on a two-vertex ring, decomposed from scratch.
pub fn unstable_saddle_ring() -> SwitchedSystem {
    SwitchedSystem::from_matrices(
        SwitchGraph::ring(2).unwrap(),
        vec![m2(-1.9, 0.6, 0.6, -0.1), m2(0.1, -0.9, 0.1, -1.4)],
    )
    .unwrap()
}

/// Published unit-column eigenbases of [`unstable_saddle_ring`].
pub fn unstable_saddle_pair() -> PlanarPair {
    let p = m2(-0.957092, -0.289784, 0.289784, -0.957092);
    let q = m2(0.530691, 0.997589, 0.847565, 0.069403);
    let a = &q.inverse().unwrap() * &p;
    PlanarPair::new((2.08167, 0.0816654), (1.33739, 0.0373864), a).unwrap()
}

pub const SADDLE_EIGENVALUES: [[f64; 2]; 2] = [[-2.08167, 0.0816654], [-1.33739, 0.0373864]];

/// Fast and slow subsystem on a two-ring with the published `P` and `J`.
pub fn fast_slow_ring() -> SwitchedSystem {
    let a1 = SquareMatrix::diag(&[-1.0, 0.2]);
    let a2 = m2(1.76363, -1.66363, 11.7636, -11.6636);
    let d1 = decomposition_from_parts(SquareMatrix::identity(2), real_blocks(&[-1.0, 0.2]), a1).unwrap();
    let d2 = decomposition_from_parts(m2(2f64.sqrt(), 0.5, 10.0, 0.5), real_blocks(&[-10.0, 0.1]), a2)
        .unwrap();
    SwitchedSystem::new(SwitchGraph::ring(2).unwrap(), vec![d1, d2]).unwrap()
}

pub fn fast_slow_intervals() -> BTreeMap<Edge, OpenInterval> {
    intervals(&[((1, 2), (1.0, 4.0)), ((2, 1), (0.5, 3.0))])
}

pub const FAST_SLOW_DWELLS: [f64; 12] = [
    2.43717, 2.86591, 2.27316, 0.826817, 2.84621, 1.46092, 2.87292, 2.39123, 3.033, 2.66629, 3.98035,
    2.90419,
];

pub const FAST_SLOW_X0: [f64; 2] = [5.0, -2.0];

/// `diag(-1, 1)` and `diag(1, -2)` on a two-ring.
pub fn diagonal_saddles() -> SwitchedSystem {
    SwitchedSystem::from_matrices(
        SwitchGraph::ring(2).unwrap(),
        vec![SquareMatrix::diag(&[-1.0, 1.0]), SquareMatrix::diag(&[1.0, -2.0])],
    )
    .unwrap()
}

/// Two-ring whose subsystems both have positive trace.
pub fn positive_trace_ring() -> SwitchedSystem {
    SwitchedSystem::from_matrices(
        SwitchGraph::ring(2).unwrap(),
        vec![m2(1.0, 1.0, 3.0, 0.4), m2(2.0, 1.0, 0.1, -0.6)],
    )
    .unwrap()
}

pub fn branching_graph() -> SwitchGraph {
    let edges = [(1, 2), (1, 4), (2, 3), (3, 1), (4, 1)].iter().map(|&(r, s)| Edge::new(r, s)).collect();
    SwitchGraph::new(4, edges).unwrap()
}

/// Four vertices with a positive-trace two-cycle through vertex 4.
pub fn branching_system() -> SwitchedSystem {
    let b = m2(2.0, 1.0, 0.0, -3.0);
    SwitchedSystem::from_matrices(
        branching_graph(),
        vec![m2(1.0, -1.0, 1.0, 1.0), b.clone(), b, m2(4.0, -1.0, -1.0, -3.0)],
    )
    .unwrap()
}

/// Three-vertex ring with the published eigenbases.
pub fn three_ring() -> SwitchedSystem {
    let parts = [
        (m2(1.0, 0.0, 1.0, 1.0), [1.0, 0.1], m2(1.0, 0.0, 0.9, 0.1)),
        (m2(-0.769231, 2.30769, 3.07692, 0.769231), [-5.0, 1.0], m2(0.538462, 1.38462, 1.84615, -4.53846)),
        (m2(-0.23485, 23.1004, -0.0616001, 7.69847), [1.0, -6.0], m2(26.8725, -98.6387, 8.62228, -31.8725)),
    ];
    let decs = parts
        .into_iter()
        .map(|(p, l, a)| decomposition_from_parts(p, real_blocks(&l), a).unwrap())
        .collect();
    SwitchedSystem::new(SwitchGraph::ring(3).unwrap(), decs).unwrap()
}

pub fn all_fixtures() -> Vec<(&'static str, SwitchedSystem)> {
    vec![
        ("unstable_saddle_ring", unstable_saddle_ring()),
        ("fast_slow_ring", fast_slow_ring()),
        ("diagonal_saddles", diagonal_saddles()),
        ("positive_trace_ring", positive_trace_ring()),
        ("branching_system", branching_system()),
        ("three_ring", three_ring()),
    ]
}

/// Classical fourth-order Runge-Kutta with a fixed step no larger than `h`.
pub fn rk4(a: &SquareMatrix, x: &[f64], duration: f64, h: f64) -> Vec<f64> {
    let steps = (duration / h).ceil().max(1.0) as usize;
    let dt = duration / steps as f64;
    let f = |y: &[f64]| a.mul_vec(y);
    let axpy = |y: &[f64], k: &[f64], c: f64| -> Vec<f64> { y.iter().zip(k).map(|(u, v)| u + c * v).collect() };
    let mut y = x.to_vec();
    for _ in 0..steps {
        let k1 = f(&y);
        let k2 = f(&axpy(&y, &k1, dt / 2.0));
        let k3 = f(&axpy(&y, &k2, dt / 2.0));
        let k4 = f(&axpy(&y, &k3, dt));
        for i in 0..y.len() {
            y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y
}

/// Truncated Taylor series with scaling and squaring, independent of the
/// library's Pade-based exponential.
pub fn taylor_expm(a: &SquareMatrix, t: f64) -> SquareMatrix {
    let n = a.dim();
    let norm = a.norm1() * t.abs();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a.scale(t / 2f64.powi(squarings));
    let mut term = SquareMatrix::identity(n);
    let mut sum = SquareMatrix::identity(n);
    for k in 1..30 {
        term = (&term * &b).scale(1.0 / k as f64);
        sum = &sum + &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// Largest singular value from the eigenvalues of `M^T M` via nalgebra's
/// symmetric eigensolver.
pub fn symmetric_oracle_norm(m: &SquareMatrix) -> f64 {
    let n = m.dim();
    let mm = nalgebra::DMatrix::from_row_slice(n, n, m.as_slice());
    let gram = mm.transpose() * &mm;
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt()
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}
