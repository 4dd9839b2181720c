//! Matrix exponential by scaling and squaring with a degree-13 Padé
//! approximant (Higham 2005).
//!
//! This is the general-purpose route. [`super::exp_jordan`] is the analytic
//! route for block-structured Jordan forms; the two are cross-checked in tests.

use super::SquareMatrix;

const THETA_13: f64 = 5.371920351148152;

const PADE_13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// `exp(t * a)`.
pub fn expm(a: &SquareMatrix, t: f64) -> SquareMatrix {
    let n = a.dim();
    let at = a.scale(t);
    let norm = at.norm1();
    if norm == 0.0 {
        return SquareMatrix::identity(n);
    }
    let squarings = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let x = at.scale(0.5f64.powi(squarings));
    let b = &PADE_13;
    let id = SquareMatrix::identity(n);
    let x2 = &x * &x;
    let x4 = &x2 * &x2;
    let x6 = &x4 * &x2;

    let lin = |c6: f64, c4: f64, c2: f64, c0: f64| -> SquareMatrix {
        let mut m = x6.scale(c6);
        m = &m + &x4.scale(c4);
        m = &m + &x2.scale(c2);
        &m + &id.scale(c0)
    };
    let hi = |c6: f64, c4: f64, c2: f64| -> SquareMatrix {
        let mut m = x6.scale(c6);
        m = &m + &x4.scale(c4);
        &m + &x2.scale(c2)
    };

    let u_inner = &(&x6 * &hi(b[13], b[11], b[9])) + &lin(b[7], b[5], b[3], b[1]);
    let u = &x * &u_inner;
    let v = &(&x6 * &hi(b[12], b[10], b[8])) + &lin(b[6], b[4], b[2], b[0]);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = match q.lu() {
        Ok(lu) => lu.solve_matrix(&p),
        // q is a perturbation of the identity after scaling; this only fails on overflow
        Err(_) => SquareMatrix::from_row_slice(n, &vec![f64::NAN; n * n]),
    };
    for _ in 0..squarings {
        r = &r * &r;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_matrix_gives_identity() {
        let z = SquareMatrix::zeros(3);
        assert_eq!(expm(&z, 1.0), SquareMatrix::identity(3));
    }

    #[test]
    fn diagonal_matrix() {
        let a = SquareMatrix::diag(&[1.0, -2.0]);
        let e = expm(&a, 1.0);
        assert!((e.get(0, 0) - 1f64.exp()).abs() < 1e-14 * 1f64.exp());
        assert!((e.get(1, 1) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(e.get(0, 1), 0.0);
    }

    #[test]
    fn rotation_generator() {
        let a = SquareMatrix::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let t = 0.7;
        let e = expm(&a, t);
        let want =
            SquareMatrix::from_rows(vec![vec![t.cos(), -t.sin()], vec![t.sin(), t.cos()]]).unwrap();
        assert!(e.max_abs_diff(&want) < 1e-15);
    }

    #[test]
    fn large_argument_uses_squaring() {
        let a = SquareMatrix::diag(&[-3.0, 0.5]);
        let e = expm(&a, 20.0);
        let want = [(-60f64).exp(), 10f64.exp()];
        assert!((e.get(0, 0) - want[0]).abs() <= 1e-12 * want[1]);
        assert!((e.get(1, 1) - want[1]).abs() <= 1e-13 * want[1]);
    }
}
