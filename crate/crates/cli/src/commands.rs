//! One function per subcommand. Each returns the report status and payload.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dwellcert::certify::{
    auto_etas, certify, certify_with_intervals, decay_envelope, loop_budgets, necessary_checks, partition_edges,
    Certificate, CertifyError, CertifyOptions, ScanOptions, TraceCheck, DEFAULT_MAX_LOOPS,
};
use dwellcert::graph::{
    enumerate_simple_loops, standard_decomposition, validate_signal, Edge, OpenInterval, SwitchingSignal, VertexPath,
};
use dwellcert::planar::{region_scan, PlanarPair};
use dwellcert::scaling::{search, SearchConfig, SearchStatus};
use dwellcert::sim::{decay_fit, propagate, random_signal};
use serde_json::{json, Value};

use crate::document::{decomposition_specs, load, EtaSpec, Loaded};
use crate::report::{Failure, Status};

pub struct Output {
    pub status: Status,
    pub digest: Option<String>,
    pub payload: Value,
}

type Outcome = Result<Output, Failure>;

fn output(status: Status, loaded: &Loaded, payload: Value) -> Outcome {
    Ok(Output { status, digest: Some(loaded.digest.clone()), payload })
}

pub fn parse_numbers(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Failure::Parse(format!("{what}: cannot read {p:?} as a number"))))
        .collect()
}

pub fn parse_vertices(s: &str) -> Result<VertexPath, Failure> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|_| Failure::Parse(format!("path: cannot read {p:?} as a vertex"))))
        .collect::<Result<Vec<_>, _>>()?;
    if v.contains(&0) {
        return Err(Failure::Parse("path: vertices are numbered from 1".into()));
    }
    VertexPath::new(v).map_err(|e| Failure::Parse(e.to_string()))
}

fn parse_pair(s: &str, what: &str) -> Result<(f64, f64), Failure> {
    match parse_numbers(s, what)?.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Failure::Parse(format!("{what}: expected two numbers"))),
    }
}

/// `r,s=value`
fn parse_eta(s: &str) -> Result<(Edge, f64), Failure> {
    let bad = || Failure::Parse(format!("--eta {s:?}: expected r,s=value"));
    let (edge, value) = s.split_once('=').ok_or_else(bad)?;
    let (r, t) = edge.split_once(',').ok_or_else(bad)?;
    let r = r.trim().parse().map_err(|_| bad())?;
    let t = t.trim().parse().map_err(|_| bad())?;
    Ok((Edge::new(r, t), value.trim().parse().map_err(|_| bad())?))
}

fn invalid(e: impl ToString) -> Failure {
    Failure::Invalid(e.to_string())
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

fn edge_map<T: serde::Serialize>(m: &BTreeMap<Edge, T>) -> Value {
    Value::Array(m.iter().map(|(e, v)| json!({ "edge": e, "value": v })).collect())
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| invalid(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| invalid(format!("cannot write {}: {e}", path.display())))
}

pub fn validate(file: &Path) -> Outcome {
    let l = load(file)?;
    let decs: Vec<Value> = l
        .system
        .decompositions()
        .iter()
        .zip(&l.supplied)
        .enumerate()
        .map(|(i, (d, supplied))| {
            json!({
                "vertex": i + 1,
                "source": if *supplied { "supplied" } else { "computed" },
                "residual": d.reconstruction_residual(),
                "condition_number": d.condition_number(),
                "blocks": d.blocks(),
            })
        })
        .collect();
    let mut payload = json!({
        "dimension": l.system.dim(),
        "vertices": l.system.vertex_count(),
        "edges": l.system.graph().edges(),
        "decompositions": decs,
    });
    if let Some(sig) = &l.signal {
        let report = validate_signal(sig, l.system.graph());
        if !report.is_admissible() {
            return Err(invalid(format!("signal is not admissible: {report}")));
        }
        payload["signal_switches"] = json!(sig.switch_count());
    }
    output(Status::Ok, &l, payload)
}

pub struct CertifyArgs {
    pub etas: Vec<String>,
    pub auto_intervals: bool,
    pub scan: ScanOptions,
}

/// Dwell values: command-line values override the document's; edges left
/// open take interval midpoints when intervals are used, else the grid
/// minimum of the edge norm.
fn choose_etas(
    l: &Loaded,
    overrides: &[(Edge, f64)],
    intervals: Option<&BTreeMap<Edge, OpenInterval>>,
    scan: &ScanOptions,
) -> Result<BTreeMap<Edge, f64>, Failure> {
    let mut etas = match (&l.etas, intervals) {
        (Some(e), _) => e.clone(),
        (None, Some(iv)) => iv.iter().map(|(e, i)| (*e, 0.5 * (i.lo + i.hi))).collect(),
        (None, None) => BTreeMap::new(),
    };
    for &(e, v) in overrides {
        if !l.system.graph().has_edge(e) {
            return Err(invalid(format!("--eta given for non-edge {e}")));
        }
        etas.insert(e, v);
    }
    if l.system.graph().edges().iter().any(|e| !etas.contains_key(e)) {
        let auto = auto_etas(&l.system, scan).map_err(invalid)?;
        for (e, v) in auto {
            etas.entry(e).or_insert(v);
        }
    }
    Ok(etas)
}

fn certificate_for(
    l: &Loaded,
    overrides: &[(Edge, f64)],
    auto_intervals: bool,
    scan: &ScanOptions,
) -> Result<Result<Certificate, CertifyError>, Failure> {
    let intervals = if auto_intervals { None } else { l.intervals.as_ref() };
    let etas = choose_etas(l, overrides, intervals, scan)?;
    Ok(match intervals {
        Some(iv) => certify_with_intervals(&l.system, &etas, iv, scan),
        None => certify(&l.system, &etas, &CertifyOptions { scan: *scan, ..CertifyOptions::default() }),
    })
}

pub fn certify_cmd(file: &Path, args: &CertifyArgs) -> Outcome {
    let l = load(file)?;
    args.scan.validate().map_err(invalid)?;
    let overrides = args.etas.iter().map(|s| parse_eta(s)).collect::<Result<Vec<_>, _>>()?;
    let necessary = necessary_checks(&l.system);
    let partition = partition_edges(&l.system);
    match certificate_for(&l, &overrides, args.auto_intervals, &args.scan)? {
        Ok(cert) => output(
            Status::Ok,
            &l,
            json!({
                "certified": true,
                "edges": cert.conditions,
                "contraction_k": cert.contraction_k,
                "amplification_c": cert.amplification_c,
                "partition": edge_map(&partition),
                "necessary_checks": necessary,
            }),
        ),
        Err(CertifyError::ConditionViolated(failures)) => output(
            Status::Violated,
            &l,
            json!({
                "certified": false,
                "failures": failures,
                "partition": edge_map(&partition),
                "necessary_checks": necessary,
            }),
        ),
        Err(e) => Err(invalid(e)),
    }
}

pub struct SearchArgs {
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: Option<u64>,
    pub margin: f64,
    pub out: Option<PathBuf>,
}

pub fn search_cmd(file: &Path, args: &SearchArgs) -> Outcome {
    let l = load(file)?;
    let config = SearchConfig {
        restarts: args.restarts,
        max_iterations: args.max_iterations,
        margin: args.margin,
        seed: args.seed.or(l.document.seed).unwrap_or(0),
        ..SearchConfig::default()
    };
    let res = search(&l.system, &config).map_err(invalid)?;
    let necessary = necessary_checks(&l.system);
    let mut payload = json!({
        "status": res.status,
        "objective": res.objective,
        "assignment": res.assignment,
        "trace": res.trace,
        "note": res.note,
        "seed": config.seed,
        "trace_flags": necessary.trace_flags(),
    });
    if res.status == SearchStatus::InfeasibleWithinBudget {
        return output(Status::Infeasible, &l, payload);
    }
    let folded = res.folded(&l.system).expect("feasible result has an assignment").map_err(invalid)?;
    let assignment = res.assignment.as_ref().expect("feasible result has an assignment");
    let mut doc = l.document.clone();
    doc.decompositions = Some(decomposition_specs(&folded));
    doc.etas = Some(assignment.etas.iter().map(|(&edge, &eta)| EtaSpec { edge, eta }).collect());
    doc.intervals = None;
    doc.signal = None;
    if let Some(path) = &args.out {
        write_file(path, |w| {
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)
        })?;
    }
    payload["document"] = to_value(&doc);
    output(Status::Ok, &l, payload)
}

pub fn decompose(path: &str) -> Outcome {
    let p = parse_vertices(path)?;
    let d = standard_decomposition(&p);
    Ok(Output { status: Status::Ok, digest: None, payload: to_value(&d) })
}

pub struct RegionArgs {
    pub t_range: String,
    pub x_range: String,
    pub resolution: usize,
    pub out: Option<PathBuf>,
}

pub fn region(file: &Path, args: &RegionArgs) -> Outcome {
    let l = load(file)?;
    let t_range = parse_pair(&args.t_range, "--t-range")?;
    let x_range = parse_pair(&args.x_range, "--x-range")?;
    let pair = PlanarPair::from_system(&l.system).map_err(invalid)?;
    let grid = region_scan(&pair, t_range, x_range, args.resolution).map_err(invalid)?;
    if let Some(path) = &args.out {
        write_file(path, |w| grid.write_csv(w))?;
    }
    let rows = (0..grid.t_values.len()).filter(|&i| grid.row_has_both(i)).count();
    output(
        Status::Ok,
        &l,
        json!({
            "pair": {
                "alpha": [pair.alpha1, pair.alpha2],
                "beta": [pair.beta1, pair.beta2],
                "a": pair.a.rows(),
            },
            "resolution": args.resolution,
            "t_range": [t_range.0, t_range.1],
            "x_range": [x_range.0, x_range.1],
            "both_t_extent": grid.both_t_extent().map(|(a, b)| [a, b]),
            "rows_with_both": rows,
        }),
    )
}

pub struct SimulateArgs {
    pub x0: String,
    pub switches: Option<usize>,
    pub seed: Option<u64>,
    pub times: Option<String>,
    pub cycle: Option<String>,
    pub samples: usize,
    pub scan: ScanOptions,
    pub out: Option<PathBuf>,
}

pub fn simulate(file: &Path, args: &SimulateArgs) -> Outcome {
    let l = load(file)?;
    let x0 = parse_numbers(&args.x0, "--x0")?;
    let mut warnings: Vec<String> = Vec::new();
    let cert = match certificate_for(&l, &[], false, &args.scan)? {
        Ok(c) => Some(c),
        Err(e) => {
            warnings.push(format!("system is not certified: {e}"));
            None
        }
    };
    let cycle = match &args.cycle {
        Some(c) => parse_vertices(c)?,
        None => enumerate_simple_loops(l.system.graph(), DEFAULT_MAX_LOOPS)
            .map_err(invalid)?
            .into_iter()
            .next()
            .ok_or_else(|| invalid("graph has no cycle; pass a signal in the document"))?,
    };
    let signal = if let Some(times) = &args.times {
        let dwells = parse_numbers(times, "--times")?;
        let body = &cycle.vertices()[..cycle.edge_count().max(1)];
        let path: Vec<usize> = (0..=dwells.len()).map(|i| body[i % body.len()]).collect();
        SwitchingSignal::from_dwells(VertexPath::new(path).expect("non-empty"), &dwells).map_err(invalid)?
    } else if let Some(n) = args.switches {
        let intervals = match (&l.intervals, &cert) {
            (Some(iv), _) => iv.clone(),
            (None, Some(c)) => c.intervals(),
            (None, None) => return Err(invalid("no dwell intervals: add intervals to the document")),
        };
        let seed = args.seed.or(l.document.seed).unwrap_or(0);
        random_signal(l.system.graph(), &cycle, &intervals, n, seed).map_err(invalid)?
    } else if let Some(sig) = &l.signal {
        sig.clone()
    } else {
        return Err(invalid("give --times, --switches, or a signal in the document"));
    };

    let trajectory = propagate(&l.system, &signal, &x0, args.samples).map_err(invalid)?;
    if let Some(path) = &args.out {
        write_file(path, |w| trajectory.write_csv(w))?;
    }
    let fit = match decay_fit(&trajectory) {
        Ok(f) => Some(f),
        Err(e) => {
            warnings.push(format!("no decay fit: {e}"));
            None
        }
    };
    let initial = norm(&x0);
    let samples = trajectory.switch_samples();
    let envelope = cert.as_ref().and_then(|c| match decay_envelope(c, &signal) {
        Ok(points) => {
            let worst = points
                .iter()
                .map(|p| norm(samples[p.switch_index].1) / (p.bound * initial))
                .fold(0.0, f64::max);
            Some(json!({ "satisfied": initial == 0.0 || worst <= 1.0, "worst_ratio_to_bound": worst }))
        }
        Err(e) => {
            warnings.push(format!("envelope not checked: {e}"));
            None
        }
    });
    output(
        Status::Ok,
        &l,
        json!({
            "switch_count": signal.switch_count(),
            "path": signal.path(),
            "switch_times": signal.switch_times(),
            "initial_norm": initial,
            "final_norm": norm(trajectory.final_state()),
            "decay_fit": fit,
            "envelope": envelope,
            "contraction_k": cert.as_ref().map(|c| c.contraction_k),
            "amplification_c": cert.as_ref().map(|c| c.amplification_c),
            "warnings": warnings,
        }),
    )
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn loops(file: &Path, scan: &ScanOptions) -> Outcome {
    let l = load(file)?;
    let found = enumerate_simple_loops(l.system.graph(), DEFAULT_MAX_LOOPS).map_err(invalid)?;
    let mut warnings = Vec::new();
    if found.is_empty() {
        warnings.push(
            "graph is acyclic: every admissible signal switches finitely often, so the certificate's standing assumption fails"
                .to_string(),
        );
    }
    let report = necessary_checks(&l.system);
    if let TraceCheck::NotApplicable { dimension } = &report.trace_check {
        warnings.push(format!("trace check applies to planar systems only (dimension {dimension})"));
    }
    let budgets = match &l.intervals {
        Some(iv) => Some(loop_budgets(&l.system, iv, scan).map_err(invalid)?),
        None => None,
    };
    output(
        Status::Ok,
        &l,
        json!({
            "loops": found,
            "trace_check": report.trace_check,
            "budgets": budgets,
            "warnings": warnings,
        }),
    )
}

