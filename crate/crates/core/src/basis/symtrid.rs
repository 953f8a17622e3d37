//! Symmetric tridiagonal eigensolver (implicit-shift QL).
//!
//! Gaussian quadrature rules need the eigenvalues of a symmetric tridiagonal
//! Jacobi matrix together with the *first* component of each normalized
//! eigenvector — never the full eigenvector matrix. The QL iteration below
//! therefore accumulates the plane rotations into a single row vector, which
//! keeps the solve O(n²) and allocation-light.

use thiserror::Error;

use crate::scalar::{cast, Scalar};

/// Eigen-iteration failure; does not occur for the well-conditioned Jacobi
/// matrices this crate builds.
#[derive(Debug, Error, PartialEq)]
pub enum SymTridError {
    /// QL sweep failed to deflate an eigenvalue within the iteration cap.
    #[error("QL iteration did not converge while isolating eigenvalue {index}")]
    NoConvergence { index: usize },
}

/// Eigenvalues (ascending) and first components of the corresponding
/// normalized eigenvectors of the symmetric tridiagonal matrix with diagonal
/// `d` and subdiagonal `e` (`e[i]` couples rows `i` and `i+1`; `e[n-1]` is
/// ignored).
///
/// The returned component signs are arbitrary; the squared components form a
/// probability vector (first row of an orthogonal matrix).
pub fn eigen_first_row<T: Scalar>(
    mut d: Vec<T>,
    mut e: Vec<T>,
) -> Result<(Vec<T>, Vec<T>), SymTridError> {
    let n = d.len();
    assert_eq!(e.len(), n, "subdiagonal must have length n (last entry unused)");
    let mut z = vec![T::zero(); n];
    z[0] = T::one();
    if n == 1 {
        return Ok((d, z));
    }
    e[n - 1] = T::zero();
    let two = cast::<T>(2.0);

    for l in 0..n {
        let mut iter = 0;
        loop {
            // Locate the first negligible subdiagonal element at or after l.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 50 {
                return Err(SymTridError::NoConvergence { index: l });
            }

            // Wilkinson-style shift from the leading 2x2 block.
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let r_signed = if g >= T::zero() { r } else { -r };
            g = d[m] - d[l] + e[l] / (g + r_signed);

            let (mut s, mut c) = (T::one(), T::one());
            let mut p = T::zero();
            let mut underflow = false;
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    // Rotation annihilated early; recover and restart sweep.
                    d[i + 1] -= p;
                    e[m] = T::zero();
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;

                // Apply the rotation to the tracked first row.
                f = z[i + 1];
                z[i + 1] = s * z[i] + c * f;
                z[i] = c * z[i] - s * f;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = T::zero();
        }
    }

    // Sort eigenvalues ascending, carrying the first-row components along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).expect("eigenvalues are finite"));
    let values = order.iter().map(|&i| d[i]).collect();
    let firsts = order.iter().map(|&i| z[i]).collect();
    Ok((values, firsts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_by_one_is_trivial() {
        let (vals, z) = eigen_first_row(vec![3.5_f64], vec![0.0]).unwrap();
        assert_eq!(vals, vec![3.5]);
        assert_eq!(z, vec![1.0]);
    }

    #[test]
    fn two_by_two_exchange_matrix() {
        // [[0,1],[1,0]] has eigenvalues -1, 1 and eigenvectors (1, ∓1)/√2.
        let (vals, z) = eigen_first_row(vec![0.0_f64, 0.0], vec![1.0, 0.0]).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14);
        assert!((vals[1] - 1.0).abs() < 1e-14);
        for c in z {
            assert!((c * c - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn discrete_laplacian_has_known_spectrum() {
        // tridiag(-1, 2, -1) of size n: eigenvalues 2 - 2 cos(kπ/(n+1)) with
        // eigenvectors sin(ikπ/(n+1)), giving closed forms for both the
        // spectrum and the first-row components.
        for n in [2usize, 3, 5, 10, 24] {
            let d = vec![2.0_f64; n];
            let e = vec![-1.0_f64; n];
            let (vals, z) = eigen_first_row(d, e).unwrap();
            let denom = (n + 1) as f64;
            for k in 1..=n {
                let angle = k as f64 * std::f64::consts::PI / denom;
                let expect_val = 2.0 - 2.0 * angle.cos();
                assert!(
                    (vals[k - 1] - expect_val).abs() < 1e-12,
                    "n = {n}, k = {k}"
                );
                let expect_z2 = 2.0 / denom * angle.sin().powi(2);
                assert!(
                    (z[k - 1] * z[k - 1] - expect_z2).abs() < 1e-12,
                    "n = {n}, k = {k}"
                );
            }
        }
    }

    proptest! {
        #[test]
        fn spectral_identities_hold(
            d in proptest::collection::vec(-5.0f64..5.0, 2..20),
            seed in 0u64..1000,
        ) {
            // Random tridiagonal with reproducible off-diagonal from the seed.
            let n = d.len();
            let e: Vec<f64> = (0..n)
                .map(|i| ((seed as f64 + 1.0) * (i as f64 + 0.7)).sin() * 2.0)
                .collect();
            let (vals, z) = eigen_first_row(d.clone(), e.clone()).unwrap();

            // Ascending order.
            for w in vals.windows(2) {
                prop_assert!(w[0] <= w[1] + 1e-12);
            }
            // Trace and Frobenius norm are eigenvalue sums.
            let tr: f64 = vals.iter().sum();
            prop_assert!((tr - d.iter().sum::<f64>()).abs() < 1e-10);
            let fro: f64 = vals.iter().map(|v| v * v).sum();
            let fro_direct: f64 = d.iter().map(|x| x * x).sum::<f64>()
                + 2.0 * e[..n - 1].iter().map(|x| x * x).sum::<f64>();
            prop_assert!((fro - fro_direct).abs() < 1e-9);
            // First row of an orthogonal matrix has unit norm, and resolves
            // the (0,0) entries of A and A².
            let norm: f64 = z.iter().map(|c| c * c).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            let a00: f64 = vals.iter().zip(&z).map(|(v, c)| v * c * c).sum();
            prop_assert!((a00 - d[0]).abs() < 1e-10);
            let a2_00: f64 = vals.iter().zip(&z).map(|(v, c)| v * v * c * c).sum();
            prop_assert!((a2_00 - (d[0] * d[0] + e[0] * e[0])).abs() < 1e-9);
        }
    }
}
