//! Exact propagation of switched trajectories and seeded signal sampling.

use std::collections::BTreeMap;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::SwitchedSystem;
use crate::format::significant;
use crate::graph::{validate_signal, Edge, OpenInterval, SwitchGraph, SwitchingSignal, ValidationReport, VertexPath};
use crate::matrix::expm;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("signal is not admissible: {0}")]
    InadmissibleSignal(ValidationReport),
    #[error("initial state has length {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("initial state must be finite")]
    NonFiniteState,
    #[error("end time {end} precedes the last switch at {last}")]
    EndBeforeLastSwitch { end: f64, last: f64 },
    #[error("interval {interval} for edge {edge} is empty")]
    EmptyInterval { edge: Edge, interval: OpenInterval },
    #[error("no interval given for edge {0}")]
    MissingInterval(Edge),
    #[error("cycle is not a closed path")]
    NotALoop,
    #[error("cycle step {0} is not an edge of the graph")]
    CycleNotInGraph(Edge),
    #[error("decay fit needs at least 4 switching samples, got {0}")]
    TooFewSamples(usize),
    #[error("state norm is zero at t = {0}")]
    ZeroState(f64),
}

/// Sampled solution of a switched system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub sample_times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Position of each switching time within `sample_times`.
    pub switch_indices: Vec<usize>,
}

impl Trajectory {
    pub fn norms(&self) -> Vec<f64> {
        self.states.iter().map(|x| euclidean(x)).collect()
    }

    /// `(t_n, x(t_n))` for `n = 0..=m`, starting with the initial state.
    pub fn switch_samples(&self) -> Vec<(f64, &[f64])> {
        std::iter::once(0)
            .chain(self.switch_indices.iter().copied())
            .map(|i| (self.sample_times[i], self.states[i].as_slice()))
            .collect()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has the initial state")
    }

    /// Header `t,switch_index,x1,...,xn,norm`; `switch_index` counts the
    /// switches at or before `t`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let n = self.states[0].len();
        let xs: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
        writeln!(w, "t,switch_index,{},norm", xs.join(","))?;
        let mut switches = 0;
        for (k, (t, x)) in self.sample_times.iter().zip(&self.states).enumerate() {
            while switches < self.switch_indices.len() && self.switch_indices[switches] <= k {
                switches += 1;
            }
            let cols: Vec<String> = x.iter().map(|v| significant(*v, 9)).collect();
            writeln!(w, "{},{},{},{}", significant(*t, 9), switches, cols.join(","), significant(euclidean(x), 9))?;
        }
        Ok(())
    }
}

fn euclidean(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Propagates to the last switching time with matrix exponentials of the
/// active subsystem. `samples_per_interval` interior points are added to
/// each dwell interval for plotting.
pub fn propagate(
    system: &SwitchedSystem,
    signal: &SwitchingSignal,
    x0: &[f64],
    samples_per_interval: usize,
) -> Result<Trajectory, SimError> {
    run(system, signal, x0, samples_per_interval, None)
}

/// Like [`propagate`], then continues in the last vertex until `end_time`.
pub fn propagate_until(
    system: &SwitchedSystem,
    signal: &SwitchingSignal,
    x0: &[f64],
    samples_per_interval: usize,
    end_time: f64,
) -> Result<Trajectory, SimError> {
    run(system, signal, x0, samples_per_interval, Some(end_time))
}

fn run(
    system: &SwitchedSystem,
    signal: &SwitchingSignal,
    x0: &[f64],
    samples: usize,
    end_time: Option<f64>,
) -> Result<Trajectory, SimError> {
    let report = validate_signal(signal, system.graph());
    if !report.is_admissible() {
        return Err(SimError::InadmissibleSignal(report));
    }
    if x0.len() != system.dim() {
        return Err(SimError::DimensionMismatch { expected: system.dim(), found: x0.len() });
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SimError::NonFiniteState);
    }
    let last = signal.switch_times().last().copied().unwrap_or(0.0);
    let mut bounds: Vec<f64> = signal.switch_times().to_vec();
    if let Some(end) = end_time {
        if end < last {
            return Err(SimError::EndBeforeLastSwitch { end, last });
        }
        if end > last {
            bounds.push(end);
        }
    }

    let mut sample_times = vec![0.0];
    let mut states = vec![x0.to_vec()];
    let mut switch_indices = Vec::with_capacity(signal.switch_count());
    let mut start = 0.0;
    let mut x = x0.to_vec();
    for (n, &stop) in bounds.iter().enumerate() {
        let a = system.subsystem(signal.path().vertices()[n]);
        let dt = stop - start;
        for k in 1..=samples {
            let s = dt * k as f64 / (samples + 1) as f64;
            sample_times.push(start + s);
            states.push(expm(a, s).mul_vec(&x));
        }
        x = expm(a, dt).mul_vec(&x);
        sample_times.push(stop);
        states.push(x.clone());
        if n < signal.switch_count() {
            switch_indices.push(sample_times.len() - 1);
        }
        start = stop;
    }
    Ok(Trajectory { sample_times, states, switch_indices })
}

/// Walks `cycle` repeatedly for `switch_count` switches, drawing each dwell
/// uniformly from the open interval of the edge being left.
pub fn random_signal(
    graph: &SwitchGraph,
    cycle: &VertexPath,
    intervals: &BTreeMap<Edge, OpenInterval>,
    switch_count: usize,
    seed: u64,
) -> Result<SwitchingSignal, SimError> {
    random_signal_stream(graph, cycle, intervals, switch_count, seed, 0)
}

/// [`random_signal`] on an independent stream, for generating many signals
/// from one seed.
pub fn random_signal_stream(
    graph: &SwitchGraph,
    cycle: &VertexPath,
    intervals: &BTreeMap<Edge, OpenInterval>,
    switch_count: usize,
    seed: u64,
    stream: u64,
) -> Result<SwitchingSignal, SimError> {
    if !cycle.is_loop() {
        return Err(SimError::NotALoop);
    }
    for e in cycle.edges() {
        if !graph.has_edge(e) {
            return Err(SimError::CycleNotInGraph(e));
        }
        let iv = *intervals.get(&e).ok_or(SimError::MissingInterval(e))?;
        if !(iv.lo >= 0.0 && iv.lo < iv.hi && iv.hi.is_finite()) {
            return Err(SimError::EmptyInterval { edge: e, interval: iv });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let body = &cycle.vertices()[..cycle.edge_count()];
    let path: Vec<usize> = (0..=switch_count).map(|i| body[i % body.len()]).collect();
    let dwells: Vec<f64> = path
        .windows(2)
        .map(|w| {
            let iv = intervals[&Edge::new(w[0], w[1])];
            loop {
                let d = rng.random_range(iv.lo..iv.hi);
                if iv.contains(d) {
                    break d;
                }
            }
        })
        .collect();
    let path = VertexPath::new(path).expect("non-empty");
    Ok(SwitchingSignal::from_dwells(path, &dwells).expect("shapes agree"))
}

/// `||x(t_n)|| ~ alpha_hat e^{-beta_hat t_n}` fitted on switching samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha_hat: f64,
    pub beta_hat: f64,
    pub r_squared: f64,
}

/// Least squares of `ln ||x(t_n)||` against `t_n`, including `t_0 = 0`.
pub fn decay_fit(trajectory: &Trajectory) -> Result<DecayFit, SimError> {
    let pts = trajectory.switch_samples();
    if pts.len() < 4 {
        return Err(SimError::TooFewSamples(pts.len()));
    }
    let mut xs = Vec::with_capacity(pts.len());
    let mut ys = Vec::with_capacity(pts.len());
    for (t, x) in pts {
        let n = euclidean(x);
        if n == 0.0 {
            return Err(SimError::ZeroState(t));
        }
        xs.push(t);
        ys.push(n.ln());
    }
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(DecayFit { alpha_hat: intercept.exp(), beta_hat: -slope, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::periodic_signal;
    use crate::matrix::SquareMatrix;

    fn ring(a1: SquareMatrix, a2: SquareMatrix) -> SwitchedSystem {
        SwitchedSystem::from_matrices(SwitchGraph::ring(2).unwrap(), vec![a1, a2]).unwrap()
    }

    fn path(v: &[usize]) -> VertexPath {
        VertexPath::new(v.to_vec()).unwrap()
    }

    #[test]
    fn isotropic_decay() {
        let sys = ring(SquareMatrix::diag(&[-1.0, -1.0]), SquareMatrix::diag(&[-1.0, -1.0]));
        let sig = SwitchingSignal::from_dwells(path(&[1, 2, 1, 2]), &[0.3, 1.1, 0.6]).unwrap();
        let tr = propagate(&sys, &sig, &[1.0, 0.0], 5).unwrap();
        assert_eq!(tr.sample_times.len(), 1 + 3 * 6);
        for (t, n) in tr.sample_times.iter().zip(tr.norms()) {
            assert!((n - (-t).exp()).abs() < 1e-12);
        }
        let fit = decay_fit(&tr).unwrap();
        assert!((fit.beta_hat - 1.0).abs() < 1e-9 && fit.r_squared > 0.9999);
        assert!((fit.alpha_hat - 1.0).abs() < 1e-9);
    }

    #[test]
    fn single_interval_is_one_exponential() {
        let a = SquareMatrix::from_row_slice(2, &[0.3, -1.0, 2.0, -0.7]);
        let sys = ring(a.clone(), SquareMatrix::diag(&[-1.0, -2.0]));
        let sig = SwitchingSignal::from_dwells(path(&[1, 2]), &[1.7]).unwrap();
        let tr = propagate(&sys, &sig, &[0.4, -1.2], 0).unwrap();
        assert_eq!(tr.final_state(), expm(&a, 1.7).mul_vec(&[0.4, -1.2]).as_slice());
        let ext = propagate_until(&sys, &sig, &[0.4, -1.2], 0, 3.0).unwrap();
        assert_eq!(ext.sample_times, vec![0.0, 1.7, 3.0]);
        assert_eq!(ext.switch_indices, vec![1]);
        assert!(matches!(
            propagate_until(&sys, &sig, &[0.4, -1.2], 0, 1.0),
            Err(SimError::EndBeforeLastSwitch { .. })
        ));
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = ring(SquareMatrix::diag(&[-1.0, -1.0]), SquareMatrix::diag(&[-1.0, -1.0]));
        let bad = SwitchingSignal::new(path(&[1, 1]), vec![1.0]).unwrap();
        assert!(matches!(propagate(&sys, &bad, &[1.0, 0.0], 0), Err(SimError::InadmissibleSignal(_))));
        let ok = SwitchingSignal::new(path(&[1, 2]), vec![1.0]).unwrap();
        assert!(matches!(propagate(&sys, &ok, &[1.0], 0), Err(SimError::DimensionMismatch { .. })));
    }

    #[test]
    fn zero_state_stays_zero() {
        let sys = ring(SquareMatrix::diag(&[1.0, -1.0]), SquareMatrix::diag(&[-1.0, 2.0]));
        let sig = periodic_signal(&path(&[1, 2, 1]), &[1.0, 1.0], 3).unwrap();
        let tr = propagate(&sys, &sig, &[0.0, 0.0], 2).unwrap();
        assert!(tr.states.iter().flatten().all(|v| *v == 0.0));
        assert!(matches!(decay_fit(&tr), Err(SimError::ZeroState(_))));
    }

    #[test]
    fn random_signals_respect_intervals() {
        let g = SwitchGraph::ring(2).unwrap();
        let mut iv = BTreeMap::new();
        iv.insert(Edge::new(1, 2), OpenInterval::new(1.0, 4.0));
        iv.insert(Edge::new(2, 1), OpenInterval::new(0.5, 3.0));
        let cycle = path(&[1, 2, 1]);
        let s = random_signal(&g, &cycle, &iv, 12, 3).unwrap();
        assert_eq!(s.switch_count(), 12);
        assert!(crate::graph::in_signal_class(&s, &g, &iv).unwrap());
        assert_eq!(s, random_signal(&g, &cycle, &iv, 12, 3).unwrap());
        assert_ne!(s, random_signal_stream(&g, &cycle, &iv, 12, 3, 1).unwrap());

        let eps = 1e-9;
        iv.insert(Edge::new(1, 2), OpenInterval::new(2.0, 2.0 + eps));
        let s = random_signal(&g, &cycle, &iv, 6, 0).unwrap();
        for (e, d) in s.edge_dwells() {
            if e == Edge::new(1, 2) {
                assert!((d - 2.0).abs() <= eps);
            }
        }
        iv.insert(Edge::new(1, 2), OpenInterval::new(2.0, 2.0));
        assert!(matches!(random_signal(&g, &cycle, &iv, 6, 0), Err(SimError::EmptyInterval { .. })));
    }

    #[test]
    fn rotation_has_no_decay() {
        let rot = SquareMatrix::from_row_slice(2, &[0.0, -1.0, 1.0, 0.0]);
        let sys = ring(rot.clone(), rot);
        let sig = periodic_signal(&path(&[1, 2, 1]), &[0.7, 1.3], 4).unwrap();
        let fit = decay_fit(&propagate(&sys, &sig, &[1.0, 2.0], 0).unwrap()).unwrap();
        assert!(fit.beta_hat.abs() < 1e-12);
        assert_eq!(decay_fit(&propagate(&sys, &SwitchingSignal::from_dwells(path(&[1, 2]), &[1.0]).unwrap(), &[1.0, 0.0], 0).unwrap()),
            Err(SimError::TooFewSamples(2)));
    }

    #[test]
    fn csv_counts_switches() {
        let sys = ring(SquareMatrix::diag(&[-1.0, -1.0]), SquareMatrix::diag(&[-1.0, -1.0]));
        let sig = SwitchingSignal::from_dwells(path(&[1, 2, 1]), &[1.0, 1.0]).unwrap();
        let tr = propagate(&sys, &sig, &[1.0, 0.0], 1).unwrap();
        let mut out = Vec::new();
        tr.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,switch_index,x1,x2,norm");
        assert_eq!(lines[1], "0,0,1,0,1");
        assert!(lines[2].starts_with("0.5,0,"));
        assert!(lines[3].starts_with("1,1,"));
        assert!(lines[5].starts_with("2,2,"));
    }
}
