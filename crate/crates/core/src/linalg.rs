//! Dense linear-algebra helpers on top of `nalgebra`.

use alloc::vec;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

/// Solution of a non-negative least-squares problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Nnls {
    pub x: DVector<f64>,
    /// `A x - b`.
    pub residual: DVector<f64>,
}

impl Nnls {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }
}

fn least_squares_on(a: &DMatrix<f64>, cols: &[usize], b: &DVector<f64>) -> DVector<f64> {
    let sub = a.select_columns(cols);
    let svd = sub.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1e-300);
    svd.solve(b, eps).expect("both factors were requested")
}

/// Lawson–Hanson active-set solver for `min ‖A x − b‖` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Nnls {
    let (m, n) = a.shape();
    assert_eq!(b.len(), m, "nnls: dimension mismatch");
    let mut x = DVector::<f64>::zeros(n);
    if n == 0 {
        return Nnls { x, residual: -b.clone() };
    }
    let scale = a.abs().max().max(1e-300) * b.abs().max().max(1.0);
    let tol = 1e-12 * scale * (m.max(n) as f64);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;

    let mut w = a.tr_mul(&(b - a * &x));
    for _ in 0..max_outer {
        let cand = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = cand else { break };
        passive[t] = true;

        let mut guard = 0;
        loop {
            guard += 1;
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let s_p = least_squares_on(a, &cols, b);
            if s_p.iter().all(|&v| v > 0.0) || guard > n + 1 {
                x.fill(0.0);
                for (k, &j) in cols.iter().enumerate() {
                    x[j] = s_p[k].max(0.0);
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in cols.iter().enumerate() {
                if s_p[k] <= 0.0 {
                    let d = x[j] - s_p[k];
                    if d > 0.0 {
                        alpha = alpha.min(x[j] / d);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in cols.iter().enumerate() {
                x[j] += alpha * (s_p[k] - x[j]);
                if x[j] <= 1e-15 * (1.0 + x.amax()) {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = a.tr_mul(&(b - a * &x));
    }
    let residual = a * &x - b;
    Nnls { x, residual }
}

/// Cholesky factor of `m + jitter·I`, escalating the jitter tenfold from
/// `start` until the factorisation succeeds or `max` is exceeded.
pub fn cholesky_with_jitter(m: &DMatrix<f64>, start: f64, max: f64) -> Option<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = start;
    while jitter <= max * (1.0 + 1e-12) {
        let mut k = m.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(k) {
            return Some((c, jitter));
        }
        jitter *= 10.0;
    }
    None
}

/// `log |A|` from a Cholesky factor of `A`.
pub fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| 2.0 * crate::math::ln(l[(i, i)])).sum()
}

/// Serde adapters storing dense matrices as `(rows, cols, column-major data)`.
pub mod serde_dense {
    use super::*;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Dense {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub mod matrix {
        use super::*;

        pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
            Dense {
                rows: m.nrows(),
                cols: m.ncols(),
                data: m.as_slice().to_vec(),
            }
            .serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
            let m = Dense::deserialize(d)?;
            if m.data.len() != m.rows * m.cols {
                return Err(serde::de::Error::custom("matrix data length does not match its shape"));
            }
            Ok(DMatrix::from_vec(m.rows, m.cols, m.data))
        }
    }

    pub mod vector {
        use super::*;

        pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
            v.as_slice().serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
            Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn nnls_known_solutions() {
        // Unconstrained optimum is feasible.
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let r = nnls(&a, &b);
        assert!((r.x[0] - 1.0).abs() < 1e-12 && (r.x[1] - 2.0).abs() < 1e-12);
        assert!(r.residual_norm() < 1e-12);
        // Unconstrained optimum has a negative component.
        let b = DVector::from_vec(vec![-1.0, 2.0, 1.0]);
        let r = nnls(&a, &b);
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn jitter_escalates() {
        let m = DMatrix::from_element(3, 3, 1.0);
        let (_, j) = cholesky_with_jitter(&m, 1e-6, 1e-2).unwrap();
        assert!(j >= 1e-6);
        let neg = DMatrix::from_diagonal_element(2, 2, -1.0);
        assert!(cholesky_with_jitter(&neg, 1e-6, 1e-2).is_none());
    }

    proptest! {
        #[test]
        fn nnls_satisfies_kkt(vals in proptest::collection::vec(-1.0f64..1.0, 6 * 10), bv in proptest::collection::vec(-1.0f64..1.0, 6)) {
            let a = DMatrix::from_column_slice(6, 10, &vals);
            let b = DVector::from_vec(bv);
            let r = nnls(&a, &b);
            let grad = a.tr_mul(&r.residual);
            for j in 0..10 {
                prop_assert!(r.x[j] >= 0.0);
                // Stationarity: gradient is non-negative, zero on the support.
                prop_assert!(grad[j] > -1e-8);
                if r.x[j] > 1e-9 {
                    prop_assert!(grad[j].abs() < 1e-8);
                }
            }
        }
    }
}
