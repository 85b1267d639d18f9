//! Small dense linear algebra kernels over [`Scalar`].
//!
//! Matrices are row-major `Vec<Vec<T>>` or flat slices; the sizes involved
//! (d up to a few hundred, k a handful) do not warrant a BLAS dependency.

use crate::scalar::Scalar;

#[inline]
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy<T: Scalar>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn scale<T: Scalar>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Arithmetic mean of equally sized vectors, summed in input order.
pub fn mean<T: Scalar>(rows: &[&[T]]) -> Vec<T> {
    let d = rows[0].len();
    let mut acc = vec![T::zero(); d];
    for r in rows {
        for (a, &x) in acc.iter_mut().zip(r.iter()) {
            *a += x;
        }
    }
    let n = T::from_usize(rows.len()).expect("row count");
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

/// Eigendecomposition of a symmetric `n x n` matrix by cyclic Jacobi
/// rotations.
///
/// Returns eigenvalues and the matching unit eigenvectors (as rows), in the
/// order they appear on the converged diagonal. Callers sort.
pub fn symmetric_eigen<T: Scalar>(matrix: &[T], n: usize) -> (Vec<T>, Vec<Vec<T>>) {
    assert_eq!(matrix.len(), n * n, "matrix must be n x n");
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }

    let frob: T = a.iter().map(|&x| x * x).sum::<T>();
    let tiny = T::epsilon() * T::epsilon() * frob;

    for _sweep in 0..100 {
        let mut off = T::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[p * n + q] * a[p * n + q];
            }
        }
        if off <= tiny || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let two = T::lit(2.0);
                let theta = (aqq - app) / (two * apq);
                let t = if theta.is_infinite() {
                    T::zero()
                } else {
                    let sgn = if theta >= T::zero() { T::one() } else { -T::one() };
                    sgn / (theta.abs() + (theta * theta + T::one()).sqrt())
                };
                if t == T::zero() {
                    continue;
                }
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let values = (0..n).map(|i| a[i * n + i]).collect();
    let vectors = (0..n)
        .map(|j| (0..n).map(|i| v[i * n + j]).collect())
        .collect();
    (values, vectors)
}

/// Singular values of a row-major matrix by one-sided (Hestenes) Jacobi
/// orthogonalisation of its rows. Sorted descending; `rows.len()` values.
pub fn singular_values<T: Scalar>(rows: &[Vec<T>]) -> Vec<T> {
    let mut r: Vec<Vec<T>> = rows.to_vec();
    let m = r.len();
    let eps = T::epsilon();
    for _sweep in 0..100 {
        let mut rotated = false;
        for i in 0..m {
            for j in (i + 1)..m {
                let alpha = dot(&r[i], &r[i]);
                let beta = dot(&r[j], &r[j]);
                let gamma = dot(&r[i], &r[j]);
                if gamma == T::zero() || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (T::lit(2.0) * gamma);
                let sgn = if zeta >= T::zero() { T::one() } else { -T::one() };
                let t = sgn / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let (lo, hi) = r.split_at_mut(j);
                for (x, y) in lo[i].iter_mut().zip(hi[0].iter_mut()) {
                    let xi = *x;
                    let yj = *y;
                    *x = c * xi - s * yj;
                    *y = s * xi + c * yj;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<T> = r.iter().map(|row| norm(row)).collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    sv
}

/// Modified Gram-Schmidt with one re-orthogonalisation pass.
///
/// Rows whose residual norm after the first pass falls below `drop_tol`
/// are discarded. Returns the kept orthonormal rows and, for each input
/// row, whether it contributed a new direction.
pub fn gram_schmidt<T: Scalar>(rows: &[Vec<T>], drop_tol: T) -> (Vec<Vec<T>>, Vec<bool>) {
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(rows.len());
    let mut kept = Vec::with_capacity(rows.len());
    for row in rows {
        let mut v = row.clone();
        for q in &basis {
            let c = dot(q, &v);
            axpy(-c, q, &mut v);
        }
        let residual = norm(&v);
        if residual < drop_tol {
            kept.push(false);
            continue;
        }
        for q in &basis {
            let c = dot(q, &v);
            axpy(-c, q, &mut v);
        }
        let n = norm(&v);
        scale(T::one() / n, &mut v);
        basis.push(v);
        kept.push(true);
    }
    (basis, kept)
}

/// `a * b^T` for row-major `a` (m x d) and `b` (n x d).
pub fn mul_transpose<T: Scalar>(a: &[Vec<T>], b: &[Vec<T>]) -> Vec<Vec<T>> {
    a.iter()
        .map(|ra| b.iter().map(|rb| dot(ra, rb)).collect())
        .collect()
}
