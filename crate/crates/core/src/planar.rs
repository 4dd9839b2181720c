//! Closed forms for two-dimensional systems on the two-vertex ring.
//!
//! With `J_1 = diag(-alpha1, alpha2)`, `J_2 = diag(-beta1, beta2)`,
//! `a = Q^-1 P` for unit-column eigenvector matrices `P`, `Q` and scalings
//! `D_1 = diag(p, q)`, `D_2 = diag(r, s)`, the two edge matrices are
//! `M_1 = D_2^-1 a D_1 e^{J_1 t0}` and `M_2 = D_1^-1 a^-1 D_2 e^{J_2 s0}`.
//! A 2x2 matrix has norm below one iff `T < 1 + D` and `D < 1`, where `T` is
//! its squared Frobenius norm and `D` its squared determinant.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certify::SwitchedSystem;
use crate::format::significant;
use crate::graph::Edge;
use crate::matrix::SquareMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanarError {
    #[error("expected a 2x2 matrix, got dimension {0}")]
    WrongDimension(usize),
    #[error("scalings p, q, r, s must all be non-zero and finite")]
    DegenerateScaling,
    #[error("dwell times must be positive")]
    NonPositiveTime,
    #[error("invalid planar parameters: {0}")]
    InvalidParameters(String),
    #[error("system has dimension {0}; planar analysis needs 2")]
    NotPlanar(usize),
    #[error("graph must be the two-vertex ring with edges (1,2) and (2,1)")]
    NotTwoRing,
    #[error("unsupported spectrum: {0}")]
    UnsupportedSpectrum(String),
    #[error("sign pattern is neither alpha<0<=beta, gamma>=0>delta nor its swap")]
    SignPatternUnsupported,
    #[error("invalid scan range: {0}")]
    InvalidRange(String),
}

fn require_2x2(m: &SquareMatrix) -> Result<(), PlanarError> {
    if m.dim() == 2 {
        Ok(())
    } else {
        Err(PlanarError::WrongDimension(m.dim()))
    }
}

/// Spectral radius below one, via `|tr M| < 1 + det M` and `|det M| < 1`.
pub fn schur_stable_2x2(m: &SquareMatrix) -> Result<bool, PlanarError> {
    require_2x2(m)?;
    let (tr, det) = (m.trace(), m.determinant());
    Ok(tr.abs() < 1.0 + det && det.abs() < 1.0)
}

/// `||M|| < 1` via Schur stability of `M^T M`.
pub fn norm_lt_one_2x2(m: &SquareMatrix) -> Result<bool, PlanarError> {
    require_2x2(m)?;
    schur_stable_2x2(&(&m.transpose() * m))
}

/// Parameters of a planar two-vertex system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanarPair {
    pub alpha1: f64,
    pub alpha2: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// `Q^-1 P`.
    pub a: SquareMatrix,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
}

impl PlanarPair {
    /// Requires `alpha1, beta1 > 0` and invertible `a`; `alpha2` and `beta2`
    /// may take any sign. Scalings start at one.
    pub fn new(
        alpha: (f64, f64),
        beta: (f64, f64),
        a: SquareMatrix,
    ) -> Result<Self, PlanarError> {
        require_2x2(&a)?;
        let all = [alpha.0, alpha.1, beta.0, beta.1];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(PlanarError::InvalidParameters("exponents must be finite".into()));
        }
        if !(alpha.0 > 0.0 && beta.0 > 0.0) {
            return Err(PlanarError::InvalidParameters("alpha1 and beta1 must be positive".into()));
        }
        if !(a.determinant() != 0.0 && a.is_finite()) {
            return Err(PlanarError::InvalidParameters("a must be invertible".into()));
        }
        Ok(Self { alpha1: alpha.0, alpha2: alpha.1, beta1: beta.0, beta2: beta.1, a, p: 1.0, q: 1.0, r: 1.0, s: 1.0 })
    }

    pub fn with_scaling(&self, p: f64, q: f64, r: f64, s: f64) -> Result<Self, PlanarError> {
        if [p, q, r, s].iter().any(|v| *v == 0.0 || !v.is_finite()) {
            return Err(PlanarError::DegenerateScaling);
        }
        Ok(Self { p, q, r, s, ..self.clone() })
    }

    /// Reads the parameters off a two-vertex ring whose subsystems have one
    /// negative and one larger real eigenvalue each. Columns are normalized
    /// to unit length and ordered with the negative eigenvalue first.
    pub fn from_system(system: &SwitchedSystem) -> Result<Self, PlanarError> {
        if system.dim() != 2 {
            return Err(PlanarError::NotPlanar(system.dim()));
        }
        let g = system.graph();
        let ring = g.vertex_count() == 2
            && g.edges().len() == 2
            && g.has_edge(Edge::new(1, 2))
            && g.has_edge(Edge::new(2, 1));
        if !ring {
            return Err(PlanarError::NotTwoRing);
        }
        let unit = system.with_unit_columns();
        let mut exps = Vec::new();
        let mut ps = Vec::new();
        for v in 1..=2 {
            let d = unit.decomposition(v);
            if !d.is_real_diagonal() {
                return Err(PlanarError::UnsupportedSpectrum(format!(
                    "subsystem {v} is not real diagonalizable"
                )));
            }
            let l: Vec<f64> = d.blocks().iter().map(|b| b.lambda()).collect();
            let mut p = d.p().clone();
            let (lo, hi) = if l[0] <= l[1] {
                (l[0], l[1])
            } else {
                let swapped = SquareMatrix::from_row_slice(
                    2,
                    &[p.get(0, 1), p.get(0, 0), p.get(1, 1), p.get(1, 0)],
                );
                p = swapped;
                (l[1], l[0])
            };
            if !(lo < 0.0) {
                return Err(PlanarError::UnsupportedSpectrum(format!(
                    "subsystem {v} has no negative eigenvalue"
                )));
            }
            exps.push((-lo, hi));
            ps.push(p);
        }
        let q_inv = ps[1].inverse().map_err(|_| PlanarError::InvalidParameters("Q is singular".into()))?;
        Self::new(exps[0], exps[1], &q_inv * &ps[0])
    }

    /// `(M_1, M_2)` for dwell `t0` on edge (1,2) and `s0` on edge (2,1).
    pub fn transition_matrices(&self, t0: f64, s0: f64) -> (SquareMatrix, SquareMatrix) {
        let a = &self.a;
        let e1 = SquareMatrix::diag(&[(-self.alpha1 * t0).exp(), (self.alpha2 * t0).exp()]);
        let e2 = SquareMatrix::diag(&[(-self.beta1 * s0).exp(), (self.beta2 * s0).exp()]);
        let m1 = &a.scale_columns(&[self.p, self.q]).scale_rows(&[1.0 / self.r, 1.0 / self.s]) * &e1;
        let a_inv = a.inverse().expect("validated invertible");
        let m2 = &a_inv.scale_columns(&[self.r, self.s]).scale_rows(&[1.0 / self.p, 1.0 / self.q]) * &e2;
        (m1, m2)
    }
}

/// Squared Frobenius norms and squared determinants of both edge matrices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TdValues {
    pub t1: f64,
    pub d1: f64,
    pub t2: f64,
    pub d2: f64,
}

impl TdValues {
    /// All four strict inequalities.
    pub fn feasible(&self) -> bool {
        self.edge12() && self.edge21()
    }

    pub fn edge12(&self) -> bool {
        self.t1 < 1.0 + self.d1 && self.d1 < 1.0
    }

    pub fn edge21(&self) -> bool {
        self.t2 < 1.0 + self.d2 && self.d2 < 1.0
    }
}

fn check_times(t0: f64, s0: f64) -> Result<(), PlanarError> {
    if t0 > 0.0 && s0 > 0.0 && t0.is_finite() && s0.is_finite() {
        Ok(())
    } else {
        Err(PlanarError::NonPositiveTime)
    }
}

fn check_scaling(pair: &PlanarPair) -> Result<(), PlanarError> {
    if [pair.p, pair.q, pair.r, pair.s].iter().any(|v| *v == 0.0 || !v.is_finite()) {
        Err(PlanarError::DegenerateScaling)
    } else {
        Ok(())
    }
}

/// Closed-form `T` and `D` values of both edges.
pub fn td_values(pair: &PlanarPair, t0: f64, s0: f64) -> Result<TdValues, PlanarError> {
    check_times(t0, s0)?;
    Ok(td_unchecked(pair, t0, s0))
}

fn td_unchecked(pair: &PlanarPair, t0: f64, s0: f64) -> TdValues {
    check_scaling(pair).expect("scalings validated");
    let PlanarPair { alpha1, alpha2, beta1, beta2, p, q, r, s, .. } = *pair;
    let a = |i: usize, j: usize| pair.a.get(i, j);
    let det = a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0);
    let cross = (p * q / (r * s) * det).powi(2);
    let t1 = (-2.0 * alpha1 * t0).exp() * p * p * (a(0, 0).powi(2) / (r * r) + a(1, 0).powi(2) / (s * s))
        + (2.0 * alpha2 * t0).exp() * q * q * (a(0, 1).powi(2) / (r * r) + a(1, 1).powi(2) / (s * s));
    let d1 = (2.0 * (alpha2 - alpha1) * t0).exp() * cross;
    let t2 = ((-2.0 * beta1 * s0).exp() / (s * s) * ((a(1, 0) * p).powi(2) + (a(1, 1) * q).powi(2))
        + (2.0 * beta2 * s0).exp() / (r * r) * ((a(0, 0) * p).powi(2) + (a(0, 1) * q).powi(2)))
        / cross;
    let d2 = (2.0 * (beta2 - beta1) * s0).exp() / cross;
    TdValues { t1, d1, t2, d2 }
}

/// `T` and `D` values under `D_1 = D_2` with `x = p/q`.
pub fn td_values_equal_scaling(pair: &PlanarPair, x: f64, t0: f64, s0: f64) -> Result<TdValues, PlanarError> {
    check_times(t0, s0)?;
    if x == 0.0 || !x.is_finite() {
        return Err(PlanarError::DegenerateScaling);
    }
    let a = |i: usize, j: usize| pair.a.get(i, j);
    let det2 = (a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0)).powi(2);
    let (x2, a1, a2, b1, b2) = (x * x, pair.alpha1, pair.alpha2, pair.beta1, pair.beta2);
    Ok(TdValues {
        t1: (-2.0 * a1 * t0).exp() * (a(0, 0).powi(2) + a(1, 0).powi(2) * x2)
            + (2.0 * a2 * t0).exp() * (a(0, 1).powi(2) / x2 + a(1, 1).powi(2)),
        d1: (2.0 * (a2 - a1) * t0).exp() * det2,
        t2: ((-2.0 * b1 * s0).exp() * (a(1, 0).powi(2) * x2 + a(1, 1).powi(2))
            + (2.0 * b2 * s0).exp() * (a(0, 0).powi(2) + a(0, 1).powi(2) / x2))
            / det2,
        d2: (2.0 * (b2 - b1) * s0).exp() / det2,
    })
}

pub fn planar_feasible_at(pair: &PlanarPair, t0: f64, s0: f64) -> Result<bool, PlanarError> {
    check_scaling(pair)?;
    Ok(td_values(pair, t0, s0)?.feasible())
}

/// `T_1 < 1` and `T_2 < 1`: both Frobenius norms below one.
pub fn frobenius_sufficient_at(pair: &PlanarPair, t0: f64, s0: f64) -> Result<bool, PlanarError> {
    check_scaling(pair)?;
    let v = td_values(pair, t0, s0)?;
    Ok(v.t1 < 1.0 && v.t2 < 1.0)
}

/// Feasibility of both edges on a `(t, x)` grid with `t0 = s0 = t` and
/// `D_1 = D_2 = diag(x, 1)`. Cells are stored row-major by `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub t_values: Vec<f64>,
    pub x_values: Vec<f64>,
    pub edge12: Vec<bool>,
    pub edge21: Vec<bool>,
    pub both: Vec<bool>,
}

impl RegionGrid {
    fn index(&self, i: usize, j: usize) -> usize {
        i * self.x_values.len() + j
    }

    pub fn cell(&self, i: usize, j: usize) -> (bool, bool, bool) {
        let k = self.index(i, j);
        (self.edge12[k], self.edge21[k], self.both[k])
    }

    /// Whether row `i` has any cell where both edges hold.
    pub fn row_has_both(&self, i: usize) -> bool {
        (0..self.x_values.len()).any(|j| self.both[self.index(i, j)])
    }

    /// Row whose `t` is closest to the given value.
    pub fn nearest_row(&self, t: f64) -> usize {
        let mut best = 0;
        for (i, v) in self.t_values.iter().enumerate() {
            if (v - t).abs() < (self.t_values[best] - t).abs() {
                best = i;
            }
        }
        best
    }

    /// Smallest and largest `t` of rows with a feasible cell.
    pub fn both_t_extent(&self) -> Option<(f64, f64)> {
        let rows: Vec<usize> = (0..self.t_values.len()).filter(|&i| self.row_has_both(i)).collect();
        Some((self.t_values[*rows.first()?], self.t_values[*rows.last()?]))
    }

    /// Header `t,x,edge12,edge21,both`, one row per cell.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,x,edge12,edge21,both")?;
        for (i, t) in self.t_values.iter().enumerate() {
            for (j, x) in self.x_values.iter().enumerate() {
                let (a, b, c) = self.cell(i, j);
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    significant(*t, 9),
                    significant(*x, 9),
                    a as u8,
                    b as u8,
                    c as u8
                )?;
            }
        }
        Ok(())
    }
}

/// Samples `t_i = lo + (hi - lo)(i + 1)/res` and log-spaced `x` across the
/// closed range.
pub fn region_scan(
    pair: &PlanarPair,
    t_range: (f64, f64),
    x_range: (f64, f64),
    resolution: usize,
) -> Result<RegionGrid, PlanarError> {
    if resolution < 32 {
        return Err(PlanarError::InvalidRange(format!("resolution {resolution} is below 32")));
    }
    let (tl, th) = t_range;
    let (xl, xh) = x_range;
    if !(tl >= 0.0 && tl < th && th.is_finite()) {
        return Err(PlanarError::InvalidRange(format!("t range ({tl}, {th})")));
    }
    if !(xl > 0.0 && xl < xh && xh.is_finite()) {
        return Err(PlanarError::InvalidRange(format!("x range [{xl}, {xh}]")));
    }
    let res = resolution as f64;
    let t_values: Vec<f64> = (0..resolution).map(|i| tl + (th - tl) * (i + 1) as f64 / res).collect();
    let (ll, lh) = (xl.ln(), xh.ln());
    let x_values: Vec<f64> =
        (0..resolution).map(|j| (ll + (lh - ll) * j as f64 / (res - 1.0)).exp()).collect();
    let cells: Vec<(bool, bool)> = (0..resolution * resolution)
        .into_par_iter()
        .map(|k| {
            let (t, x) = (t_values[k / resolution], x_values[k % resolution]);
            let v = td_values_equal_scaling(pair, x, t, t).expect("validated grid");
            (v.edge12(), v.edge21())
        })
        .collect();
    let edge12: Vec<bool> = cells.iter().map(|c| c.0).collect();
    let edge21: Vec<bool> = cells.iter().map(|c| c.1).collect();
    let both = cells.iter().map(|c| c.0 && c.1).collect();
    Ok(RegionGrid { t_values, x_values, edge12, edge21, both })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignPattern {
    /// `alpha < 0 <= beta`, `delta < 0 <= gamma`.
    FirstContracts,
    /// `beta < 0 <= alpha`, `gamma < 0 <= delta`.
    SecondContracts,
}

/// `P_2^-1 P_1 = diag(a, d)` with dwell `t` in `A_1` and `s` in `A_2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalWitness {
    pub a: f64,
    pub d: f64,
    pub t: f64,
    pub s: f64,
}

impl DiagonalWitness {
    /// `max(|a| e^{alpha t}, |d| e^{beta t}, e^{gamma s}/|a|, e^{delta s}/|d|)`.
    pub fn worst_norm(&self, alpha: f64, beta: f64, gamma: f64, delta: f64) -> f64 {
        let (a, d) = (self.a.abs(), self.d.abs());
        [a * (alpha * self.t).exp(), d * (beta * self.t).exp(), (gamma * self.s).exp() / a, (delta * self.s).exp() / d]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalVerdict {
    pub pattern: SignPattern,
    pub feasible: bool,
    pub witness: Option<DiagonalWitness>,
    /// Whether some convex combination of `diag(alpha, beta)` and
    /// `diag(gamma, delta)` is Hurwitz.
    pub hurwitz_combination: bool,
}

/// Commuting case `A_1 = diag(alpha, beta)`, `A_2 = diag(gamma, delta)`:
/// feasible iff `beta gamma < alpha delta` in the first pattern.
pub fn diagonal_case(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<DiagonalVerdict, PlanarError> {
    if alpha < 0.0 && beta >= 0.0 && gamma >= 0.0 && delta < 0.0 {
        Ok(first_pattern(alpha, beta, gamma, delta, SignPattern::FirstContracts))
    } else if alpha >= 0.0 && beta < 0.0 && gamma < 0.0 && delta >= 0.0 {
        let mut v = first_pattern(beta, alpha, delta, gamma, SignPattern::SecondContracts);
        if let Some(w) = &mut v.witness {
            std::mem::swap(&mut w.a, &mut w.d);
        }
        Ok(v)
    } else {
        Err(PlanarError::SignPatternUnsupported)
    }
}

fn first_pattern(alpha: f64, beta: f64, gamma: f64, delta: f64, pattern: SignPattern) -> DiagonalVerdict {
    let feasible = beta * gamma < alpha * delta;
    // with t = 1: need beta/|delta| < s < |alpha|/gamma
    let witness = feasible.then(|| {
        let t = 1.0;
        let lo = beta / -delta;
        let s = if gamma > 0.0 { 0.5 * (lo + -alpha / gamma) } else { lo + 1.0 };
        let a = (0.5 * (gamma * s - alpha * t)).exp();
        let d = (0.5 * (delta * s - beta * t)).exp();
        DiagonalWitness { a, d, t, s }
    });
    DiagonalVerdict { pattern, feasible, witness, hurwitz_combination: hurwitz_weight(alpha, beta, gamma, delta) }
}

/// `w diag(alpha, beta) + (1 - w) diag(gamma, delta)` is Hurwitz for some
/// `w` in `[0, 1]`.
fn hurwitz_weight(alpha: f64, beta: f64, gamma: f64, delta: f64) -> bool {
    // first entry negative iff w > gamma/(gamma - alpha); second iff w < delta/(delta - beta)
    let lo = gamma / (gamma - alpha);
    let hi = delta / (delta - beta);
    lo < hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: [f64; 4]) -> SquareMatrix {
        SquareMatrix::from_row_slice(2, &v)
    }

    #[test]
    fn schur_boundaries() {
        assert!(schur_stable_2x2(&SquareMatrix::zeros(2)).unwrap());
        assert!(!schur_stable_2x2(&SquareMatrix::identity(2)).unwrap());
        assert_eq!(schur_stable_2x2(&SquareMatrix::zeros(3)), Err(PlanarError::WrongDimension(3)));
        assert!(norm_lt_one_2x2(&SquareMatrix::diag(&[0.5, 0.9])).unwrap());
        assert!(!norm_lt_one_2x2(&SquareMatrix::diag(&[1.0, 0.5])).unwrap());
    }

    #[test]
    fn identity_boundary() {
        let pair = PlanarPair::new((1.0, 1.0), (1.0, 1.0), SquareMatrix::identity(2)).unwrap();
        let v = td_values(&pair, 1e-12, 1e-12).unwrap();
        assert!((v.t1 - 2.0).abs() < 1e-10 && (v.d1 - 1.0).abs() < 1e-10);
        // alpha2 = alpha1 makes D1 = 1 exactly, so D1 < 1 fails for every t
        assert!(!planar_feasible_at(&pair, 0.5, 0.5).unwrap());
        assert!(!frobenius_sufficient_at(&pair, 1e-9, 1e-9).unwrap());
    }

    #[test]
    fn closed_form_matches_matrices() {
        let pair = PlanarPair::new((1.3, 0.2), (0.7, 0.4), m([0.8, -0.3, 0.5, 1.1]))
            .unwrap()
            .with_scaling(1.7, -0.4, 2.2, 0.9)
            .unwrap();
        let (t0, s0) = (0.9, 1.6);
        let v = td_values(&pair, t0, s0).unwrap();
        let (m1, m2) = pair.transition_matrices(t0, s0);
        assert!((v.t1 - m1.frobenius_norm().powi(2)).abs() < 1e-12 * v.t1);
        assert!((v.d1 - m1.determinant().powi(2)).abs() < 1e-12 * v.d1);
        assert!((v.t2 - m2.frobenius_norm().powi(2)).abs() < 1e-12 * v.t2);
        assert!((v.d2 - m2.determinant().powi(2)).abs() < 1e-12 * v.d2);
        let want = (2.0 * (0.2 - 1.3) * t0 + 2.0 * (0.4 - 0.7) * s0).exp();
        assert!((v.d1 * v.d2 - want).abs() < 1e-12);
    }

    #[test]
    fn equal_scaling_reduction() {
        let pair = PlanarPair::new((2.0, 0.1), (1.2, 0.05), m([0.6, 0.9, -0.7, 0.4])).unwrap();
        for x in [0.1, 1.0, 7.5] {
            let direct = td_values_equal_scaling(&pair, x, 1.3, 2.1).unwrap();
            let general = td_values(&pair.with_scaling(x, 1.0, x, 1.0).unwrap(), 1.3, 2.1).unwrap();
            for (a, b) in [(direct.t1, general.t1), (direct.d1, general.d1), (direct.t2, general.t2), (direct.d2, general.d2)] {
                assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
            }
        }
    }

    #[test]
    fn errors() {
        let pair = PlanarPair::new((1.0, 0.0), (1.0, 0.0), SquareMatrix::identity(2)).unwrap();
        assert_eq!(pair.with_scaling(0.0, 1.0, 1.0, 1.0), Err(PlanarError::DegenerateScaling));
        assert_eq!(td_values(&pair, 0.0, 1.0), Err(PlanarError::NonPositiveTime));
        assert!(PlanarPair::new((-1.0, 0.0), (1.0, 0.0), SquareMatrix::identity(2)).is_err());
        assert!(region_scan(&pair, (0.0, 1.0), (0.5, 2.0), 16).is_err());
    }

    #[test]
    fn diagonal_cases() {
        let v = diagonal_case(-1.0, 1.0, 1.0, -2.0).unwrap();
        assert!(v.feasible && v.hurwitz_combination);
        let w = v.witness.unwrap();
        assert!(w.worst_norm(-1.0, 1.0, 1.0, -2.0) < 1.0);

        let v = diagonal_case(-1.0, 2.0, 2.0, -1.0).unwrap();
        assert!(!v.feasible && !v.hurwitz_combination && v.witness.is_none());

        for (b, g) in [(0.0, 3.0), (3.0, 0.0)] {
            let v = diagonal_case(-1.0, b, g, -1.0).unwrap();
            assert!(v.feasible);
            assert!(v.witness.unwrap().worst_norm(-1.0, b, g, -1.0) < 1.0);
        }

        let swapped = diagonal_case(1.0, -1.0, -2.0, 1.0).unwrap();
        assert_eq!(swapped.pattern, SignPattern::SecondContracts);
        assert!(swapped.witness.unwrap().worst_norm(1.0, -1.0, -2.0, 1.0) < 1.0);
        assert_eq!(diagonal_case(1.0, 1.0, 1.0, 1.0), Err(PlanarError::SignPatternUnsupported));
    }

    #[test]
    fn region_grid_layout_and_csv() {
        let pair = PlanarPair::new((1.0, -2.0), (1.0, -2.0), SquareMatrix::identity(2)).unwrap();
        let g = region_scan(&pair, (0.0, 4.0), (0.5, 2.0), 32).unwrap();
        assert_eq!(g.t_values.len(), 32);
        assert_eq!(g.t_values[31], 4.0);
        assert!((g.x_values[0] - 0.5).abs() < 1e-15 && (g.x_values[31] - 2.0).abs() < 1e-12);
        for k in 0..g.both.len() {
            assert_eq!(g.both[k], g.edge12[k] && g.edge21[k]);
        }
        assert_eq!(g.both_t_extent(), Some((0.125, 4.0)));
        let mut out = Vec::new();
        g.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 32 * 32 + 1);
        assert_eq!(text.lines().nth(1).unwrap(), "0.125,0.5,1,1,1");
    }
}
