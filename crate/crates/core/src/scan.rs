//! One-dimensional scans used for dwell intervals and suprema.

use rayon::prelude::*;

use crate::graph::OpenInterval;

pub(crate) type ScalarFn<'a> = dyn Fn(f64) -> f64 + Sync + 'a;

/// Shrinks `[good, bad]` (in either order) to width `tol` around the crossing
/// of `f = level` and returns the end where `f < level`.
pub(crate) fn bisect(f: &ScalarFn, level: f64, mut good: f64, mut bad: f64, tol: f64) -> f64 {
    while (good - bad).abs() > tol {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if f(mid) < level {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Uniform samples `f(i * t_max / n)`, `i = 0..=n`.
pub(crate) fn samples(f: &ScalarFn, t_max: f64, n: usize) -> Vec<f64> {
    let h = t_max / n as f64;
    (0..=n).into_par_iter().map(|i| f(i as f64 * h)).collect()
}

/// Maximal runs of `(0, t_max]` where `f < level`, endpoints refined by
/// bisection and reported on the strict side. `f(0)` is the right limit.
pub(crate) fn sublevel_intervals(
    f: &ScalarFn,
    level: f64,
    t_max: f64,
    n: usize,
    tol: f64,
) -> Vec<OpenInterval> {
    let h = t_max / n as f64;
    let vals = samples(f, t_max, n);
    let mut out = Vec::new();
    let mut i = 1;
    while i <= n {
        if vals[i] < level {
            let a = i;
            while i < n && vals[i + 1] < level {
                i += 1;
            }
            let b = i;
            let t = |j: usize| j as f64 * h;
            let lo = if vals[a - 1] < level { 0.0 } else { bisect(f, level, t(a), t(a - 1), tol) };
            let hi = if b == n { t_max } else { bisect(f, level, t(b), t(b + 1), tol) };
            out.push(OpenInterval::new(lo, hi));
        }
        i += 1;
    }
    out
}

/// The connected component of `{t in (0, t_max] : f(t) < level}` that
/// contains `t0`, found by stepping outward with step `h` and bisecting.
/// Requires `f(t0) < level`.
pub(crate) fn component_containing(
    f: &ScalarFn,
    level: f64,
    t0: f64,
    t_max: f64,
    h: f64,
    tol: f64,
) -> OpenInterval {
    let mut t = t0;
    let lo = loop {
        let next = t - h;
        if next <= 0.0 {
            break if f(0.0) < level && f(0.5 * t) < level { 0.0 } else { bisect(f, level, t, 0.0, tol) };
        }
        if f(next) >= level {
            break bisect(f, level, t, next, tol);
        }
        t = next;
    };
    let mut t = t0;
    let hi = loop {
        let next = t + h;
        if next >= t_max {
            break if f(t_max) < level { t_max } else { bisect(f, level, t, t_max, tol) };
        }
        if f(next) >= level {
            break bisect(f, level, t, next, tol);
        }
        t = next;
    };
    OpenInterval::new(lo, hi)
}

/// Supremum of `f` over `[lo, hi]`: sampled on a grid that is doubled until
/// the maximum changes by less than 1%, then refined by golden section.
pub(crate) fn sup_on(f: &ScalarFn, lo: f64, hi: f64, points: usize) -> f64 {
    let mut n = points.max(16);
    let mut best = sampled_max(f, lo, hi, n);
    for _ in 0..4 {
        n *= 2;
        let cur = sampled_max(f, lo, hi, n);
        let stable = (cur - best).abs() <= 0.01 * best.abs();
        best = best.max(cur);
        if stable {
            break;
        }
    }
    best
}

fn sampled_max(f: &ScalarFn, lo: f64, hi: f64, n: usize) -> f64 {
    let h = (hi - lo) / n as f64;
    let vals: Vec<f64> = (0..=n).into_par_iter().map(|i| f(lo + i as f64 * h)).collect();
    let (imax, vmax) = argmax(&vals);
    let a = lo + imax.saturating_sub(1) as f64 * h;
    let b = lo + (imax + 1).min(n) as f64 * h;
    vmax.max(golden_max(f, a, b))
}

/// Index and value of the largest entry; the first one on ties.
pub(crate) fn argmax(vals: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, &v) in vals.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best
}

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub(crate) fn golden_max(f: &ScalarFn, mut a: f64, mut b: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Grid argmin of `f` on `(0, t_max]` refined by golden section.
pub(crate) fn argmin_on(f: &ScalarFn, t_max: f64, n: usize) -> f64 {
    let h = t_max / n as f64;
    let vals: Vec<f64> = samples(f, t_max, n).into_iter().skip(1).map(|v| -v).collect();
    let (i, _) = argmax(&vals);
    let centre = (i + 1) as f64 * h;
    let (mut a, mut b) = ((centre - h).max(0.5 * h), (centre + h).min(t_max));
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for _ in 0..60 {
        let c = b - INV_PHI * (b - a);
        let d = a + INV_PHI * (b - a);
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let refined = 0.5 * (a + b);
    if f(refined) <= f(centre) {
        refined
    } else {
        centre
    }
}
