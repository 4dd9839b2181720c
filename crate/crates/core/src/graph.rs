//! Switching graphs, admissible signals and path decomposition.
//!
//! Vertices are 1-based throughout, matching how systems are written down.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest graph accepted by [`enumerate_simple_loops`].
pub const MAX_ENUMERATION_VERTICES: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("graph must have at least one vertex")]
    NoVertices,
    #[error("edge {0} references a vertex outside 1..={1}")]
    VertexOutOfRange(Edge, usize),
    #[error("self-loop {0} is not allowed")]
    SelfLoop(Edge),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),
    #[error("path must contain at least one vertex")]
    EmptyPath,
    #[error("switching times must be finite")]
    NonFiniteTime,
    #[error("{times} switching times given for a path of {vertices} vertices")]
    TimesLengthMismatch { times: usize, vertices: usize },
    #[error("more than {limit} simple loops")]
    TooManyLoops { limit: usize },
    #[error("loop enumeration supports at most {MAX_ENUMERATION_VERTICES} vertices, got {0}")]
    GraphTooLarge(usize),
    #[error("signal is not admissible: {0}")]
    InadmissibleSignal(ValidationReport),
    #[error("no interval given for edge {0}")]
    MissingInterval(Edge),
    #[error("path is not a closed loop")]
    NotALoop,
    #[error("{dwells} dwell times given for a loop with {edges} edges")]
    DwellCountMismatch { dwells: usize, edges: usize },
    #[error("dwell times must be positive and finite")]
    NonPositiveDwell,
}

/// Directed edge `(from, to)`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

impl Edge {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }
}

impl From<(usize, usize)> for Edge {
    fn from((from, to): (usize, usize)) -> Self {
        Self { from, to }
    }
}

impl From<Edge> for (usize, usize) {
    fn from(e: Edge) -> Self {
        (e.from, e.to)
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.from, self.to)
    }
}

/// Open interval `(lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpenInterval {
    pub lo: f64,
    pub hi: f64,
}

impl OpenInterval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.lo < t && t < self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        !(self.lo < self.hi)
    }

    /// Whether `other` lies inside the closure of `self`.
    pub fn covers(&self, other: &OpenInterval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

impl fmt::Display for OpenInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

/// Directed graph on vertices `1..=k` without self-loops.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SwitchGraph {
    vertex_count: usize,
    edges: Vec<Edge>,
    #[serde(skip)]
    successors: Vec<Vec<usize>>,
}

impl SwitchGraph {
    pub fn new(vertex_count: usize, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::NoVertices);
        }
        let mut successors = vec![Vec::new(); vertex_count + 1];
        for (i, &e) in edges.iter().enumerate() {
            if e.from == 0 || e.to == 0 || e.from > vertex_count || e.to > vertex_count {
                return Err(GraphError::VertexOutOfRange(e, vertex_count));
            }
            if e.from == e.to {
                return Err(GraphError::SelfLoop(e));
            }
            if edges[..i].contains(&e) {
                return Err(GraphError::DuplicateEdge(e));
            }
            successors[e.from].push(e.to);
        }
        for s in &mut successors {
            s.sort_unstable();
        }
        Ok(Self { vertex_count, edges, successors })
    }

    /// The directed ring `1 -> 2 -> ... -> k -> 1`.
    pub fn ring(k: usize) -> Result<Self, GraphError> {
        let edges = (1..=k).map(|i| Edge::new(i, i % k + 1)).collect();
        Self::new(k, edges)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn has_edge(&self, e: Edge) -> bool {
        e.from >= 1 && e.from <= self.vertex_count && self.successors[e.from].contains(&e.to)
    }

    pub fn edge_index(&self, e: Edge) -> Option<usize> {
        self.edges.iter().position(|&x| x == e)
    }

    /// Successors of `v` in increasing order.
    pub fn successors(&self, v: usize) -> &[usize] {
        &self.successors[v]
    }

    pub fn outgoing(&self, v: usize) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied().filter(move |e| e.from == v)
    }

    /// `reach[r][s]` is true when `s` can be reached from `r` by a path of
    /// length zero or more. Indexed 1-based; row and column 0 are unused.
    pub fn reachability(&self) -> Vec<Vec<bool>> {
        let k = self.vertex_count;
        let mut reach = vec![vec![false; k + 1]; k + 1];
        for (r, row) in reach.iter_mut().enumerate().skip(1) {
            let mut stack = vec![r];
            row[r] = true;
            while let Some(v) = stack.pop() {
                for &w in &self.successors[v] {
                    if !row[w] {
                        row[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        reach
    }

    /// Kahn's topological sort succeeds.
    pub fn is_acyclic(&self) -> bool {
        let k = self.vertex_count;
        let mut indegree = vec![0usize; k + 1];
        for e in &self.edges {
            indegree[e.to] += 1;
        }
        let mut queue: Vec<usize> = (1..=k).filter(|&v| indegree[v] == 0).collect();
        let mut seen = 0;
        while let Some(v) = queue.pop() {
            seen += 1;
            for &w in &self.successors[v] {
                indegree[w] -= 1;
                if indegree[w] == 0 {
                    queue.push(w);
                }
            }
        }
        seen == k
    }
}

/// Serializes a `BTreeMap<Edge, T>` as a list of `{edge, value}` records,
/// since structured keys are not valid JSON object keys.
pub mod edge_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::Edge;

    #[derive(Serialize, Deserialize)]
    struct Entry<T> {
        edge: Edge,
        value: T,
    }

    pub fn serialize<S: Serializer, T: Serialize + Clone>(
        map: &BTreeMap<Edge, T>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let v: Vec<Entry<T>> =
            map.iter().map(|(&edge, value)| Entry { edge, value: value.clone() }).collect();
        v.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>, T: Deserialize<'de>>(
        d: D,
    ) -> Result<BTreeMap<Edge, T>, D::Error> {
        let v: Vec<Entry<T>> = Vec::deserialize(d)?;
        Ok(v.into_iter().map(|e| (e.edge, e.value)).collect())
    }
}

/// Non-empty vertex sequence.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct VertexPath(Vec<usize>);

impl TryFrom<Vec<usize>> for VertexPath {
    type Error = GraphError;

    fn try_from(v: Vec<usize>) -> Result<Self, GraphError> {
        Self::new(v)
    }
}

impl From<VertexPath> for Vec<usize> {
    fn from(p: VertexPath) -> Self {
        p.0
    }
}

impl VertexPath {
    pub fn new(vertices: Vec<usize>) -> Result<Self, GraphError> {
        if vertices.is_empty() {
            return Err(GraphError::EmptyPath);
        }
        Ok(Self(vertices))
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    /// Number of vertices.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.0.len() - 1
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.0.windows(2).map(|w| Edge::new(w[0], w[1]))
    }

    /// Closed path with at least one edge.
    pub fn is_loop(&self) -> bool {
        self.0.len() >= 2 && self.0[0] == self.0[self.0.len() - 1]
    }

    /// Closed path whose vertices, apart from the repeated endpoint, are distinct.
    pub fn is_simple_loop(&self) -> bool {
        if !self.is_loop() {
            return false;
        }
        let body = &self.0[..self.0.len() - 1];
        body.iter().enumerate().all(|(i, v)| !body[..i].contains(v))
    }

    /// First consecutive pair that is not an edge of `graph`.
    pub fn first_non_edge(&self, graph: &SwitchGraph) -> Option<(usize, Edge)> {
        self.edges().enumerate().find(|(_, e)| !graph.has_edge(*e))
    }
}

impl fmt::Display for VertexPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Simple loops in extraction order plus the indecomposable remainder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathDecomposition {
    pub loops: Vec<VertexPath>,
    pub remainder: VertexPath,
}

/// Repeatedly cuts out the loop closed by the earliest repeated vertex.
///
/// The earliest repeat has exactly one earlier occurrence, so the cut-out
/// piece is always a simple loop. The remainder has no repeated vertex.
pub fn standard_decomposition(path: &VertexPath) -> PathDecomposition {
    let mut current = path.0.clone();
    let mut loops = Vec::new();
    while let Some((first, second)) = first_repeat(&current) {
        loops.push(VertexPath(current[first..=second].to_vec()));
        current.drain(first + 1..=second);
    }
    PathDecomposition { loops, remainder: VertexPath(current) }
}

fn first_repeat(v: &[usize]) -> Option<(usize, usize)> {
    let mut seen = HashMap::new();
    for (i, &x) in v.iter().enumerate() {
        if let Some(&j) = seen.get(&x) {
            return Some((j, i));
        }
        seen.insert(x, i);
    }
    None
}

/// All simple directed cycles, each starting at its smallest vertex, sorted
/// lexicographically.
pub fn enumerate_simple_loops(
    graph: &SwitchGraph,
    max_loops: usize,
) -> Result<Vec<VertexPath>, GraphError> {
    let k = graph.vertex_count();
    if k > MAX_ENUMERATION_VERTICES {
        return Err(GraphError::GraphTooLarge(k));
    }
    let mut found = Vec::new();
    let mut on_path = vec![false; k + 1];
    for start in 1..=k {
        let mut path = vec![start];
        on_path[start] = true;
        extend_cycles(graph, start, &mut path, &mut on_path, &mut found, max_loops)?;
        on_path[start] = false;
    }
    found.sort();
    Ok(found)
}

fn extend_cycles(
    graph: &SwitchGraph,
    start: usize,
    path: &mut Vec<usize>,
    on_path: &mut [bool],
    found: &mut Vec<VertexPath>,
    max_loops: usize,
) -> Result<(), GraphError> {
    let v = *path.last().expect("non-empty");
    for &w in graph.successors(v) {
        if w == start {
            if found.len() == max_loops {
                return Err(GraphError::TooManyLoops { limit: max_loops });
            }
            let mut cycle = path.clone();
            cycle.push(start);
            found.push(VertexPath(cycle));
        } else if w > start && !on_path[w] {
            on_path[w] = true;
            path.push(w);
            extend_cycles(graph, start, path, on_path, found, max_loops)?;
            path.pop();
            on_path[w] = false;
        }
    }
    Ok(())
}

/// Vertex path with absolute switching times `t_1 < t_2 < ...`, `t_0 = 0`.
///
/// `switch_times[n-1]` is when the signal leaves `path[n-1]` for `path[n]`;
/// the dwell in the last vertex is open-ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSignal {
    path: VertexPath,
    switch_times: Vec<f64>,
}

impl SwitchingSignal {
    /// Checks shape only; ordering is reported by [`validate_signal`].
    pub fn new(path: VertexPath, switch_times: Vec<f64>) -> Result<Self, GraphError> {
        if switch_times.len() != path.len() - 1 {
            return Err(GraphError::TimesLengthMismatch {
                times: switch_times.len(),
                vertices: path.len(),
            });
        }
        if switch_times.iter().any(|t| !t.is_finite()) {
            return Err(GraphError::NonFiniteTime);
        }
        Ok(Self { path, switch_times })
    }

    /// Builds absolute times from the dwell before each switch.
    pub fn from_dwells(path: VertexPath, dwells: &[f64]) -> Result<Self, GraphError> {
        let mut t = 0.0;
        let times = dwells
            .iter()
            .map(|d| {
                t += d;
                t
            })
            .collect();
        Self::new(path, times)
    }

    pub fn path(&self) -> &VertexPath {
        &self.path
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.switch_times
    }

    pub fn switch_count(&self) -> usize {
        self.switch_times.len()
    }

    /// `t_n - t_{n-1}` for every switch.
    pub fn dwells(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.switch_times
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect()
    }

    /// Pairs each switch edge with the dwell spent before it.
    pub fn edge_dwells(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.path.edges().zip(self.dwells())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NotAnEdge { position: usize, edge: Edge },
    NonIncreasingTime { index: usize, previous: f64, current: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NotAnEdge { position, edge } => {
                write!(f, "pair {edge} at position {position} is not an edge")
            }
            Violation::NonIncreasingTime { index, previous, current } => {
                write!(f, "switch {index} at {current} does not follow {previous}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        write!(f, "{}", parts.join("; "))
    }
}

/// Lists every non-edge step and every time that fails to increase
/// (`t_1 > 0` is checked against the implicit `t_0 = 0`).
pub fn validate_signal(signal: &SwitchingSignal, graph: &SwitchGraph) -> ValidationReport {
    let mut violations = Vec::new();
    for (position, edge) in signal.path.edges().enumerate() {
        if !graph.has_edge(edge) {
            violations.push(Violation::NotAnEdge { position, edge });
        }
    }
    let mut previous = 0.0;
    for (index, &current) in signal.switch_times.iter().enumerate() {
        if !(current > previous) {
            violations.push(Violation::NonIncreasingTime { index: index + 1, previous, current });
        }
        previous = current;
    }
    ValidationReport { violations }
}

/// Dwell durations grouped by edge. Every graph edge has an entry.
pub fn edge_occupancy(
    signal: &SwitchingSignal,
    graph: &SwitchGraph,
) -> Result<BTreeMap<Edge, Vec<f64>>, GraphError> {
    let report = validate_signal(signal, graph);
    if !report.is_admissible() {
        return Err(GraphError::InadmissibleSignal(report));
    }
    let mut out: BTreeMap<Edge, Vec<f64>> = graph.edges().iter().map(|&e| (e, Vec::new())).collect();
    for (e, d) in signal.edge_dwells() {
        out.get_mut(&e).expect("admissible").push(d);
    }
    Ok(out)
}

/// Whether the signal is admissible and every dwell before a switch lies
/// strictly inside its edge's interval. The open-ended final dwell is not
/// constrained.
pub fn in_signal_class(
    signal: &SwitchingSignal,
    graph: &SwitchGraph,
    intervals: &BTreeMap<Edge, OpenInterval>,
) -> Result<bool, GraphError> {
    if let Some(&e) = graph.edges().iter().find(|e| !intervals.contains_key(e)) {
        return Err(GraphError::MissingInterval(e));
    }
    if !validate_signal(signal, graph).is_admissible() {
        return Ok(false);
    }
    Ok(signal.edge_dwells().all(|(e, d)| intervals[&e].contains(d)))
}

/// Traverses `cycle` `repetitions` times with the given per-edge dwells.
pub fn periodic_signal(
    cycle: &VertexPath,
    dwells: &[f64],
    repetitions: usize,
) -> Result<SwitchingSignal, GraphError> {
    if !cycle.is_loop() {
        return Err(GraphError::NotALoop);
    }
    if dwells.len() != cycle.edge_count() {
        return Err(GraphError::DwellCountMismatch { dwells: dwells.len(), edges: cycle.edge_count() });
    }
    if dwells.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(GraphError::NonPositiveDwell);
    }
    let mut path = vec![cycle.0[0]];
    let mut all = Vec::with_capacity(dwells.len() * repetitions);
    for _ in 0..repetitions {
        path.extend_from_slice(&cycle.0[1..]);
        all.extend_from_slice(dwells);
    }
    SwitchingSignal::from_dwells(VertexPath(path), &all)
}
