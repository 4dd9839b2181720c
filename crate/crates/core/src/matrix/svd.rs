//! One-sided Jacobi singular value decomposition.
//!
//! Hestenes' method orthogonalizes columns by plane rotations. It computes
//! small singular values to high relative accuracy, which matters for the
//! `s_min(A) * ||A^-1|| = 1` identity on ill-conditioned inputs.

const MAX_SWEEPS: usize = 80;

/// Right singular vectors and singular values of a `rows x cols` matrix.
pub(crate) struct Svd {
    /// Singular values in decreasing order.
    pub values: Vec<f64>,
    /// `cols x cols`, row-major; column `j` pairs with `values[j]`.
    pub v: Vec<f64>,
    pub cols: usize,
}

impl Svd {
    pub fn right_vector(&self, j: usize) -> Vec<f64> {
        (0..self.cols).map(|i| self.v[i * self.cols + j]).collect()
    }
}

pub(crate) fn singular_values(a: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    jacobi(a, rows, cols, false).values
}

pub(crate) fn svd(a: &[f64], rows: usize, cols: usize) -> Svd {
    jacobi(a, rows, cols, true)
}

fn jacobi(a: &[f64], rows: usize, cols: usize, want_v: bool) -> Svd {
    assert_eq!(a.len(), rows * cols);
    let mut w = a.to_vec();
    let mut v = if want_v {
        let mut v = vec![0.0; cols * cols];
        for i in 0..cols {
            v[i * cols + i] = 1.0;
        }
        v
    } else {
        Vec::new()
    };

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..rows {
                    let x = w[i * cols + p];
                    let y = w[i * cols + q];
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let x = w[i * cols + p];
                    let y = w[i * cols + q];
                    w[i * cols + p] = c * x - s * y;
                    w[i * cols + q] = s * x + c * y;
                }
                if want_v {
                    for i in 0..cols {
                        let x = v[i * cols + p];
                        let y = v[i * cols + q];
                        v[i * cols + p] = c * x - s * y;
                        v[i * cols + q] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = (0..cols)
        .map(|j| (0..rows).map(|i| w[i * cols + j].powi(2)).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]).then(i.cmp(&j)));
    let values = order.iter().map(|&j| norms[j]).collect();
    let v = if want_v {
        let mut sorted = vec![0.0; cols * cols];
        for (new_j, &old_j) in order.iter().enumerate() {
            for i in 0..cols {
                sorted[i * cols + new_j] = v[i * cols + old_j];
            }
        }
        sorted
    } else {
        v
    };
    Svd { values, v, cols }
}

/// Exact singular values `(max, min)` of a row-major 2x2 matrix.
pub(crate) fn singular_values_2x2(m: &[f64]) -> (f64, f64) {
    let (a, b, c, d) = (m[0], m[1], m[2], m[3]);
    // sigma_max + sigma_min and sigma_max - sigma_min, free of cancellation
    let h1 = (a + d).hypot(b - c);
    let h2 = (a - d).hypot(b + c);
    let smax = 0.5 * (h1 + h2);
    if smax == 0.0 {
        return (0.0, 0.0);
    }
    let smin = (a * d - b * c).abs() / smax;
    (smax, smin.min(smax))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_matches_jacobi() {
        let cases = [
            [1.0, 2.0, 3.0, 4.0],
            [0.0, 1.0, -1.0, 0.0],
            [1e-8, 0.0, 0.0, 1e8],
            [2.0, -3.0, 0.5, 0.1],
        ];
        for m in cases {
            let (smax, smin) = singular_values_2x2(&m);
            let j = singular_values(&m, 2, 2);
            assert!((smax - j[0]).abs() <= 1e-14 * smax);
            assert!((smin - j[1]).abs() <= 1e-12 * smin.max(1e-300));
        }
    }

    #[test]
    fn right_vectors_span_null_space() {
        // rank two; the null vector is (1, -1, 0)/sqrt(2)
        let a = [1.0, 1.0, 0.0, 2.0, 2.0, 0.0, 0.0, 0.0, 3.0];
        let s = svd(&a, 3, 3);
        assert!(s.values[2] < 1e-14);
        let v = s.right_vector(2);
        assert!((v[0] + v[1]).abs() < 1e-14);
        assert!(v[2].abs() < 1e-14);
    }

    #[test]
    fn rectangular_input() {
        // 3x2 with orthogonal columns of norms 3 and 1
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = [1.0, 0.0, 2.0, h, 2.0, -h];
        let vals = singular_values(&a, 3, 2);
        assert!((vals[0] - 3.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
    }
}
