//! Real Jordan decompositions `A = P J P^-1` and analytic exponentials of
//! block-structured `J`.
//!
//! Computed decompositions cover diagonalizable matrices: distinct real
//! eigenvalues become 1x1 blocks, complex pairs `λ ± iμ` become 2x2
//! rotation-scaling blocks `[[λ, μ], [-μ, λ]]`, and exactly repeated real
//! eigenvalues are accepted when the eigenspace has full dimension.
//! Defective structure must be supplied by the caller through
//! [`decomposition_from_parts`], since a numerically computed Jordan form
//! of a near-defective matrix is not trustworthy.

use nalgebra::Schur;
use serde::{Deserialize, Serialize};

use super::svd;
use super::{spectral_norm, MatrixError, SquareMatrix};

/// Default eigenvalue gap tolerance, relative to `||A||`.
pub const DEFAULT_GAP_FACTOR: f64 = 1e-6;

/// Relative residual allowed for user-supplied decompositions. Published
/// decompositions are typically rounded to six significant digits, which
/// leaves residuals of a few `1e-6`.
pub const PARTS_RESIDUAL_TOL: f64 = 1e-5;

/// Relative residual required of computed decompositions.
const COMPUTED_RESIDUAL_TOL: f64 = 1e-8;

const MIN_P_SINGULAR_VALUE: f64 = 1e-12;

/// One block of a real Jordan form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JordanBlock {
    /// `[λ]`
    Real { lambda: f64 },
    /// `[[λ, μ], [-μ, λ]]` for the eigenvalue pair `λ ± iμ`, `μ > 0`.
    ComplexPair { lambda: f64, mu: f64 },
    /// `λ` on the diagonal, ones on the superdiagonal.
    Defective { lambda: f64, size: usize },
}

impl JordanBlock {
    pub fn size(&self) -> usize {
        match *self {
            JordanBlock::Real { .. } => 1,
            JordanBlock::ComplexPair { .. } => 2,
            JordanBlock::Defective { size, .. } => size,
        }
    }

    /// Real part of the block's eigenvalue(s).
    pub fn lambda(&self) -> f64 {
        match *self {
            JordanBlock::Real { lambda }
            | JordanBlock::ComplexPair { lambda, .. }
            | JordanBlock::Defective { lambda, .. } => lambda,
        }
    }

    pub fn validate(&self) -> Result<(), MatrixError> {
        let lambda = self.lambda();
        if !lambda.is_finite() {
            return Err(MatrixError::InvalidBlock("eigenvalue is not finite".into()));
        }
        match *self {
            JordanBlock::ComplexPair { mu, .. } if !(mu.is_finite() && mu > 0.0) => Err(
                MatrixError::InvalidBlock(format!("complex pair needs mu > 0, got {mu}")),
            ),
            JordanBlock::Defective { size, .. } if size < 2 => Err(MatrixError::InvalidBlock(
                format!("defective block needs size >= 2, got {size}"),
            )),
            _ => Ok(()),
        }
    }
}

/// Assembles the block-diagonal matrix `J`.
pub fn assemble_jordan(blocks: &[JordanBlock]) -> SquareMatrix {
    let n = blocks.iter().map(JordanBlock::size).sum();
    let mut j = SquareMatrix::zeros(n);
    let mut o = 0;
    for b in blocks {
        match *b {
            JordanBlock::Real { lambda } => j.set(o, o, lambda),
            JordanBlock::ComplexPair { lambda, mu } => {
                j.set(o, o, lambda);
                j.set(o, o + 1, mu);
                j.set(o + 1, o, -mu);
                j.set(o + 1, o + 1, lambda);
            }
            JordanBlock::Defective { lambda, size } => {
                for i in 0..size {
                    j.set(o + i, o + i, lambda);
                    if i + 1 < size {
                        j.set(o + i, o + i + 1, 1.0);
                    }
                }
            }
        }
        o += b.size();
    }
    j
}

/// `exp(t J)` for the block-diagonal `J` described by `blocks`, evaluated in
/// closed form block by block.
pub fn exp_jordan(blocks: &[JordanBlock], t: f64) -> SquareMatrix {
    let n = blocks.iter().map(JordanBlock::size).sum();
    let mut e = SquareMatrix::zeros(n);
    let mut o = 0;
    for b in blocks {
        match *b {
            JordanBlock::Real { lambda } => e.set(o, o, (lambda * t).exp()),
            JordanBlock::ComplexPair { lambda, mu } => {
                let g = (lambda * t).exp();
                let (s, c) = (mu * t).sin_cos();
                e.set(o, o, g * c);
                e.set(o, o + 1, g * s);
                e.set(o + 1, o, -g * s);
                e.set(o + 1, o + 1, g * c);
            }
            JordanBlock::Defective { lambda, size } => {
                let g = (lambda * t).exp();
                // t^k / k! on the k-th superdiagonal
                let mut coef = g;
                for k in 0..size {
                    for i in 0..size - k {
                        e.set(o + i, o + i + k, coef);
                    }
                    coef *= t / (k + 1) as f64;
                }
            }
        }
        o += b.size();
    }
    e
}

/// `A = P J P^-1` with `J` given by ordered blocks.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    p: SquareMatrix,
    p_inv: SquareMatrix,
    blocks: Vec<JordanBlock>,
    source: SquareMatrix,
    condition_number: f64,
}

impl SpectralDecomposition {
    pub fn p(&self) -> &SquareMatrix {
        &self.p
    }

    pub fn p_inv(&self) -> &SquareMatrix {
        &self.p_inv
    }

    pub fn blocks(&self) -> &[JordanBlock] {
        &self.blocks
    }

    pub fn source(&self) -> &SquareMatrix {
        &self.source
    }

    /// `||P|| * ||P^-1||`.
    pub fn condition_number(&self) -> f64 {
        self.condition_number
    }

    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    pub fn jordan_matrix(&self) -> SquareMatrix {
        assemble_jordan(&self.blocks)
    }

    pub fn exp(&self, t: f64) -> SquareMatrix {
        exp_jordan(&self.blocks, t)
    }

    /// Largest real part over all blocks.
    pub fn spectral_abscissa(&self) -> f64 {
        self.blocks.iter().map(JordanBlock::lambda).fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when every block is 1x1.
    pub fn is_real_diagonal(&self) -> bool {
        self.blocks.iter().all(|b| matches!(b, JordanBlock::Real { .. }))
    }

    /// `||P J P^-1 - A||`.
    pub fn reconstruction_residual(&self) -> f64 {
        residual(&self.p, &self.p_inv, &self.blocks, &self.source)
    }

    /// Column index ranges `(start, len)` of each block in `P`.
    pub fn block_ranges(&self) -> Vec<(usize, usize)> {
        let mut o = 0;
        self.blocks
            .iter()
            .map(|b| {
                let r = (o, b.size());
                o += b.size();
                r
            })
            .collect()
    }

    /// Whether `diag(d)` commutes with `J`, i.e. `d` is constant on every
    /// block wider than one column.
    pub fn commutes_with_diagonal(&self, d: &[f64]) -> bool {
        d.len() == self.dim()
            && self.block_ranges().iter().all(|&(o, len)| {
                d[o..o + len].iter().all(|v| (v - d[o]).abs() <= 1e-12 * d[o].abs().max(1.0))
            })
    }

    /// Replaces `P` by `P * diag(d)`. The Jordan blocks are unchanged, so `d`
    /// must commute with `J`.
    pub fn with_scaled_columns(&self, d: &[f64]) -> Result<Self, MatrixError> {
        if d.len() != self.dim() {
            return Err(MatrixError::DimensionMismatch { expected: self.dim(), found: d.len() });
        }
        if d.iter().any(|v| !v.is_finite() || *v == 0.0) {
            return Err(MatrixError::Singular);
        }
        if !self.commutes_with_diagonal(d) {
            return Err(MatrixError::InvalidBlock(
                "column scaling must be constant on each multi-column block".into(),
            ));
        }
        let p = self.p.scale_columns(d);
        let inv_d: Vec<f64> = d.iter().map(|v| 1.0 / v).collect();
        let p_inv = self.p_inv.scale_rows(&inv_d);
        let condition_number = spectral_norm(&p) * spectral_norm(&p_inv);
        Ok(Self { p, p_inv, blocks: self.blocks.clone(), source: self.source.clone(), condition_number })
    }

    /// Rescales columns toward unit Euclidean norm. Columns of 1x1 blocks
    /// become exactly unit; wider blocks share one factor that makes their
    /// largest column unit, which keeps `J` unchanged.
    pub fn with_unit_columns(&self) -> Self {
        let norms: Vec<f64> = (0..self.dim())
            .map(|j| self.p.column(j).iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        let mut d = vec![1.0; self.dim()];
        for (o, len) in self.block_ranges() {
            let m = norms[o..o + len].iter().cloned().fold(0.0, f64::max);
            for v in &mut d[o..o + len] {
                *v = 1.0 / m;
            }
        }
        self.with_scaled_columns(&d).expect("block-constant positive scaling")
    }
}

fn residual(
    p: &SquareMatrix,
    p_inv: &SquareMatrix,
    blocks: &[JordanBlock],
    a: &SquareMatrix,
) -> f64 {
    let j = assemble_jordan(blocks);
    let rebuilt = &(p * &j) * p_inv;
    spectral_norm(&(&rebuilt - a))
}

/// Validates and stores a caller-supplied decomposition. Columns of `P` are
/// kept exactly as given.
pub fn decomposition_from_parts(
    p: SquareMatrix,
    blocks: Vec<JordanBlock>,
    a: SquareMatrix,
) -> Result<SpectralDecomposition, MatrixError> {
    let n = a.dim();
    if p.dim() != n {
        return Err(MatrixError::DimensionMismatch { expected: n, found: p.dim() });
    }
    for b in &blocks {
        b.validate()?;
    }
    let total: usize = blocks.iter().map(JordanBlock::size).sum();
    if total != n {
        return Err(MatrixError::DimensionMismatch { expected: n, found: total });
    }
    let smin = p.smallest_singular_value();
    if !(smin > MIN_P_SINGULAR_VALUE) {
        return Err(MatrixError::SingularP(smin));
    }
    let p_inv = p.inverse().map_err(|_| MatrixError::SingularP(smin))?;
    let res = residual(&p, &p_inv, &blocks, &a);
    let tolerance = PARTS_RESIDUAL_TOL * spectral_norm(&a).max(f64::MIN_POSITIVE);
    if !(res <= tolerance) {
        return Err(MatrixError::ReconstructionMismatch { residual: res, tolerance });
    }
    let condition_number = spectral_norm(&p) * spectral_norm(&p_inv);
    Ok(SpectralDecomposition { p, p_inv, blocks, source: a, condition_number })
}

/// Eigenvalues `(re, im)` of `a` from a real Schur form.
pub fn eigenvalues(a: &SquareMatrix) -> Result<Vec<(f64, f64)>, MatrixError> {
    let schur = Schur::try_new(a.to_nalgebra(), f64::EPSILON, 10_000)
        .ok_or(MatrixError::NoConvergence)?;
    Ok(schur.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect())
}

/// Maximum real part over the eigenvalues of `a`; `NaN` if the eigenvalue
/// iteration fails to converge.
pub fn spectral_abscissa(a: &SquareMatrix) -> f64 {
    eigenvalues(a)
        .map(|ev| ev.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max))
        .unwrap_or(f64::NAN)
}

/// All eigenvalues in the open left half-plane.
pub fn is_hurwitz(a: &SquareMatrix) -> bool {
    spectral_abscissa(a) < 0.0
}

/// Computes `A = P J P^-1` in real form with unit-norm eigenvector columns
/// (for complex pairs the real and imaginary parts are made orthogonal and
/// the real part has unit norm). Blocks are ordered by increasing real part.
///
/// Eigenvalues closer than `gap_tolerance` are only accepted when they form
/// an exactly semisimple real cluster; otherwise the call fails with
/// [`MatrixError::NearDefective`].
pub fn real_jordan(
    a: &SquareMatrix,
    gap_tolerance: f64,
) -> Result<SpectralDecomposition, MatrixError> {
    let n = a.dim();
    let norm_a = spectral_norm(a);
    let threshold = gap_tolerance.max(64.0 * f64::EPSILON * norm_a);
    let mut ev = eigenvalues(a)?;
    ev.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)));

    let clusters = cluster(&ev, threshold);
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut blocks = Vec::new();

    for members in clusters {
        let vals: Vec<(f64, f64)> = members.iter().map(|&i| ev[i]).collect();
        if vals.len() == 1 {
            let (re, im) = vals[0];
            if im == 0.0 {
                columns.push(real_eigenvector(a, re));
                blocks.push(JordanBlock::Real { lambda: re });
            } else if im > 0.0 {
                let (u, w) = complex_eigenvector(a, re, im);
                columns.push(u);
                columns.push(w);
                blocks.push(JordanBlock::ComplexPair { lambda: re, mu: im });
            }
            // the conjugate with im < 0 is covered by its partner
            continue;
        }
        let gap = min_gap(&vals);
        let all_real = vals.iter().all(|v| v.1 == 0.0);
        if !all_real {
            return Err(MatrixError::NearDefective { gap, tolerance: gap_tolerance });
        }
        let m = vals.len();
        let center = vals.iter().map(|v| v.0).sum::<f64>() / m as f64;
        let shifted = a - &SquareMatrix::identity(n).scale(center);
        let s = svd::svd(shifted.as_slice(), n, n);
        let nullity = s.values.iter().filter(|&&v| v <= threshold).count();
        if nullity != m {
            return Err(MatrixError::NearDefective { gap, tolerance: gap_tolerance });
        }
        for j in n - m..n {
            let mut v = s.right_vector(j);
            fix_sign(&mut v);
            columns.push(v);
            blocks.push(JordanBlock::Real { lambda: center });
        }
    }

    let mut p = SquareMatrix::zeros(n);
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            p.set(i, j, *v);
        }
    }
    let smin = p.smallest_singular_value();
    if !(smin > MIN_P_SINGULAR_VALUE) {
        return Err(MatrixError::SingularP(smin));
    }
    let p_inv = p.inverse().map_err(|_| MatrixError::SingularP(smin))?;
    let res = residual(&p, &p_inv, &blocks, a);
    let tolerance = COMPUTED_RESIDUAL_TOL * norm_a.max(f64::MIN_POSITIVE);
    if !(res <= tolerance) {
        return Err(MatrixError::ReconstructionMismatch { residual: res, tolerance });
    }
    let condition_number = spectral_norm(&p) * spectral_norm(&p_inv);
    Ok(SpectralDecomposition { p, p_inv, blocks, source: a.clone(), condition_number })
}

/// Single-linkage clusters of eigenvalues closer than `threshold`.
fn cluster(ev: &[(f64, f64)], threshold: f64) -> Vec<Vec<usize>> {
    let k = ev.len();
    let mut label: Vec<usize> = (0..k).collect();
    fn root(label: &mut [usize], mut i: usize) -> usize {
        while label[i] != i {
            label[i] = label[label[i]];
            i = label[i];
        }
        i
    }
    for i in 0..k {
        for j in i + 1..k {
            let d = (ev[i].0 - ev[j].0).hypot(ev[i].1 - ev[j].1);
            if d < threshold || d == 0.0 {
                let (ri, rj) = (root(&mut label, i), root(&mut label, j));
                label[ri.max(rj)] = ri.min(rj);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![usize::MAX; k];
    for i in 0..k {
        let r = root(&mut label, i);
        if seen[r] == usize::MAX {
            seen[r] = groups.len();
            groups.push(Vec::new());
        }
        groups[seen[r]].push(i);
    }
    groups
}

fn min_gap(vals: &[(f64, f64)]) -> f64 {
    let mut gap = f64::INFINITY;
    for i in 0..vals.len() {
        for j in i + 1..vals.len() {
            gap = gap.min((vals[i].0 - vals[j].0).hypot(vals[i].1 - vals[j].1));
        }
    }
    gap
}

/// Largest-magnitude component made positive.
fn fix_sign(v: &mut [f64]) {
    let lead = v.iter().cloned().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v.iter_mut() {
        *x /= norm;
    }
}

fn real_eigenvector(a: &SquareMatrix, lambda: f64) -> Vec<f64> {
    let n = a.dim();
    let shifted = a - &SquareMatrix::identity(n).scale(lambda);
    let s = svd::svd(shifted.as_slice(), n, n);
    let mut v = s.right_vector(n - 1);
    normalize(&mut v);
    fix_sign(&mut v);
    v
}

/// Real and imaginary parts `(u, w)` of an eigenvector for `re + i im`,
/// phase-rotated so that `u ⊥ w`, `||u|| >= ||w||`, and `||u|| = 1`.
fn complex_eigenvector(a: &SquareMatrix, re: f64, im: f64) -> (Vec<f64>, Vec<f64>) {
    let n = a.dim();
    let m = 2 * n;
    // [[A - re I, im I], [-im I, A - re I]] (u; w) = 0
    let mut e = vec![0.0; m * m];
    for i in 0..n {
        for j in 0..n {
            let v = a.get(i, j) - if i == j { re } else { 0.0 };
            e[i * m + j] = v;
            e[(n + i) * m + n + j] = v;
        }
        e[i * m + n + i] = im;
        e[(n + i) * m + i] = -im;
    }
    let s = svd::svd(&e, m, m);
    let z = s.right_vector(m - 1);
    let (u, w) = z.split_at(n);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let (uu, ww, uw) = (dot(u, u), dot(w, w), dot(u, w));
    let theta = 0.5 * (-2.0 * uw).atan2(uu - ww);
    let (sn, cs) = theta.sin_cos();
    let mut u2: Vec<f64> = u.iter().zip(w).map(|(a, b)| cs * a - sn * b).collect();
    let mut w2: Vec<f64> = u.iter().zip(w).map(|(a, b)| sn * a + cs * b).collect();
    let scale = dot(&u2, &u2).sqrt();
    let lead = u2.iter().cloned().fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    let f = if lead < 0.0 { -1.0 / scale } else { 1.0 / scale };
    for x in u2.iter_mut() {
        *x *= f;
    }
    for x in w2.iter_mut() {
        *x *= f;
    }
    (u2, w2)
}

/// Searches the probability simplex for weights `w` with
/// `spectral_abscissa(Σ w_i A_i) < 0`.
///
/// A grid of the given resolution is scanned (coarsened if the grid would
/// exceed a quarter-million points) and the best point is refined by a
/// pairwise mass-transfer pattern search. This is a heuristic: `None` does
/// not prove that no Hurwitz convex combination exists.
pub fn hurwitz_convex_combination(
    mats: &[SquareMatrix],
    grid_resolution: usize,
) -> Result<Option<Vec<f64>>, MatrixError> {
    const MAX_GRID: f64 = 250_000.0;
    let k = mats.len();
    if k == 0 {
        return Err(MatrixError::Empty);
    }
    let n = mats[0].dim();
    for m in mats {
        if m.dim() != n {
            return Err(MatrixError::DimensionMismatch { expected: n, found: m.dim() });
        }
    }
    let abscissa = |w: &[f64]| -> f64 {
        let mut sum = SquareMatrix::zeros(n);
        for (m, wi) in mats.iter().zip(w) {
            sum = &sum + &m.scale(*wi);
        }
        spectral_abscissa(&sum)
    };
    if k == 1 {
        return Ok((abscissa(&[1.0]) < 0.0).then(|| vec![1.0]));
    }

    let mut res = grid_resolution.max(1);
    while res > 1 && binomial(res + k - 1, k - 1) > MAX_GRID {
        res = res * 3 / 4;
    }
    let centre = 1.0 / k as f64;
    let spread = |w: &[f64]| w.iter().map(|x| (x - centre).powi(2)).sum::<f64>();
    let better = |a: f64, wa: &[f64], b: f64, wb: &[f64]| -> bool {
        a < b - 1e-15 || ((a - b).abs() <= 1e-15 && spread(wa) < spread(wb) - 1e-15)
    };

    let mut best_w = vec![centre; k];
    let mut best = abscissa(&best_w);
    let mut counts = vec![0usize; k];
    counts[k - 1] = res;
    loop {
        let w: Vec<f64> = counts.iter().map(|&c| c as f64 / res as f64).collect();
        let val = abscissa(&w);
        if better(val, &w, best, &best_w) {
            best = val;
            best_w = w;
        }
        if !next_composition(&mut counts) {
            break;
        }
    }

    let mut step = 0.5 / res as f64;
    while step > 1e-10 && best >= 0.0 {
        let mut improved = false;
        for i in 0..k {
            for j in 0..k {
                if i == j || best_w[i] < step {
                    continue;
                }
                let mut w = best_w.clone();
                w[i] -= step;
                w[j] += step;
                let val = abscissa(&w);
                if val < best {
                    best = val;
                    best_w = w;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((best < 0.0).then_some(best_w))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Advances to the next weak composition of the same total, in
/// lexicographic order of the first `k - 1` parts. Returns false when done.
fn next_composition(c: &mut [usize]) -> bool {
    let k = c.len();
    let total: usize = c.iter().sum();
    let head = &mut c[..k - 1];
    if head.iter().sum::<usize>() < total {
        head[k - 2] += 1;
    } else {
        let Some(j) = head.iter().rposition(|&x| x > 0) else {
            return false;
        };
        if j == 0 {
            return false;
        }
        head[j] = 0;
        head[j - 1] += 1;
    }
    let used: usize = c[..k - 1].iter().sum();
    c[k - 1] = total - used;
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compositions_enumerate_the_simplex_grid() {
        for (k, res) in [(2usize, 4usize), (3, 3), (4, 2)] {
            let mut c = vec![0; k];
            c[k - 1] = res;
            let mut seen = vec![c.clone()];
            while next_composition(&mut c) {
                assert_eq!(c.iter().sum::<usize>(), res);
                seen.push(c.clone());
            }
            let mut dedup = seen.clone();
            dedup.sort();
            dedup.dedup();
            assert_eq!(dedup.len(), seen.len());
            assert_eq!(seen.len() as f64, binomial(res + k - 1, k - 1));
        }
    }

    #[test]
    fn diagonal_matrix_decomposes_to_identity() {
        let a = SquareMatrix::diag(&[-1.0, 0.2]);
        let d = real_jordan(&a, 1e-6 * 1.0).unwrap();
        assert!(d.p().max_abs_diff(&SquareMatrix::identity(2)) < 1e-15);
        assert_eq!(d.blocks(), &[JordanBlock::Real { lambda: -1.0 }, JordanBlock::Real { lambda: 0.2 }]);
    }

    #[test]
    fn repeated_semisimple_eigenvalue_is_accepted() {
        let a = SquareMatrix::diag(&[-1.0, -1.0]);
        let d = real_jordan(&a, 1e-6).unwrap();
        assert!(d.reconstruction_residual() < 1e-14);
        assert!(d.blocks().iter().all(|b| *b == JordanBlock::Real { lambda: -1.0 }));
    }

    #[test]
    fn jordan_block_is_near_defective() {
        let a = SquareMatrix::from_rows(vec![vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(matches!(real_jordan(&a, 1e-6), Err(MatrixError::NearDefective { .. })));
    }

    #[test]
    fn complex_pair_block() {
        let a = SquareMatrix::from_rows(vec![vec![1.0, -1.0], vec![1.0, 1.0]]).unwrap();
        let d = real_jordan(&a, 1e-6).unwrap();
        assert_eq!(d.blocks().len(), 1);
        match d.blocks()[0] {
            JordanBlock::ComplexPair { lambda, mu } => {
                assert!((lambda - 1.0).abs() < 1e-12);
                assert!((mu - 1.0).abs() < 1e-12);
            }
            other => panic!("unexpected block {other:?}"),
        }
        assert!(d.reconstruction_residual() < 1e-12);
        let u = d.p().column(0);
        let w = d.p().column(1);
        assert!((u.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(u.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>().abs() < 1e-12);
    }

    #[test]
    fn parts_validation() {
        let a = SquareMatrix::diag(&[-1.0, 0.2]);
        let blocks = vec![JordanBlock::Real { lambda: -1.0 }, JordanBlock::Real { lambda: 0.2 }];
        assert!(decomposition_from_parts(SquareMatrix::identity(2), blocks.clone(), a.clone()).is_ok());
        assert!(matches!(
            decomposition_from_parts(SquareMatrix::diag(&[1.0, 0.0]), blocks.clone(), a.clone()),
            Err(MatrixError::SingularP(_))
        ));
        let wrong = vec![JordanBlock::Real { lambda: -1.0 }, JordanBlock::Real { lambda: 0.3 }];
        assert!(matches!(
            decomposition_from_parts(SquareMatrix::identity(2), wrong, a.clone()),
            Err(MatrixError::ReconstructionMismatch { .. })
        ));
        let bad = vec![JordanBlock::ComplexPair { lambda: 0.0, mu: -1.0 }];
        assert!(matches!(
            decomposition_from_parts(SquareMatrix::identity(2), bad, a),
            Err(MatrixError::InvalidBlock(_))
        ));
    }

    #[test]
    fn exp_jordan_simple_blocks() {
        assert_eq!(exp_jordan(&[JordanBlock::Real { lambda: 0.0 }], 3.7), SquareMatrix::identity(1));
        let rot = exp_jordan(&[JordanBlock::ComplexPair { lambda: 0.0, mu: std::f64::consts::PI }], 1.0);
        assert!(rot.max_abs_diff(&SquareMatrix::identity(2).scale(-1.0)) < 1e-15);
        assert!((rot.spectral_norm() - 1.0).abs() < 1e-15);
        let def = exp_jordan(&[JordanBlock::Defective { lambda: -0.5, size: 2 }], 2.0);
        let g = (-1.0f64).exp();
        let want = SquareMatrix::from_rows(vec![vec![g, 2.0 * g], vec![0.0, g]]).unwrap();
        assert!(def.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn abscissa_examples() {
        assert!((spectral_abscissa(&SquareMatrix::diag(&[-1.0, 0.2])) - 0.2).abs() < 1e-15);
        let rot = SquareMatrix::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        assert!(spectral_abscissa(&rot).abs() < 1e-15);
        assert!(!is_hurwitz(&rot));
    }

    #[test]
    fn convex_combination_examples() {
        let a1 = SquareMatrix::diag(&[-1.0, 1.0]);
        let a2 = SquareMatrix::diag(&[1.0, -2.0]);
        let w = hurwitz_convex_combination(&[a1.clone(), a2.clone()], 1000).unwrap().unwrap();
        assert!(w[0] > 0.5 && w[0] < 2.0 / 3.0);
        assert!((w[0] - 0.6).abs() < 1e-12);
        let neg = SquareMatrix::identity(2).scale(-1.0);
        let w = hurwitz_convex_combination(&[neg.clone(), neg], 10).unwrap().unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        let bad = hurwitz_convex_combination(&[a1, SquareMatrix::identity(3)], 10);
        assert!(matches!(bad, Err(MatrixError::DimensionMismatch { .. })));
    }
}
