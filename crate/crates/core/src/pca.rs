//! Affine orthogonal projection trained on calibration supervectors.
//!
//! Training never materializes the `P x P` covariance: with `J` vectors of
//! dimension `P >> J` it eigendecomposes the `J x J` Gram matrix of centered
//! data and maps its eigenvectors back to input space. Variances follow the
//! population convention (divide by `J`); each basis row is sign-fixed so its
//! largest-magnitude coordinate is positive, making trained models
//! bit-reproducible.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::{fromf, Scalar};
use crate::scm::Supervector;

/// Trained PCA transform: `project(v) = basis * (v - mean)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel<T> {
    mean: Vec<T>,
    basis: Vec<T>, // component_count x dim, row-major, orthonormal rows
    dim: usize,
    component_count: usize,
    explained_variance: Vec<T>,
}

/// Dense projection of one supervector.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedVector<T> {
    pub values: Vec<T>,
}

impl<T> ReducedVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl<T: Scalar> PcaModel<T> {
    pub fn from_parts(
        mean: Vec<T>,
        basis: Vec<T>,
        explained_variance: Vec<T>,
        component_count: usize,
    ) -> Result<Self> {
        let dim = mean.len();
        if basis.len() != component_count * dim {
            return Err(Error::ShapeMismatch(format!(
                "basis length {} does not match {component_count} x {dim}",
                basis.len()
            )));
        }
        if explained_variance.len() != component_count {
            return Err(Error::LengthMismatch {
                expected: component_count,
                got: explained_variance.len(),
            });
        }
        Ok(Self { mean, basis, dim, component_count, explained_variance })
    }

    pub fn component_count(&self) -> usize {
        self.component_count
    }

    /// Input dimension `P`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    /// Row-major `component_count x dim` basis with orthonormal rows.
    pub fn basis(&self) -> &[T] {
        &self.basis
    }

    pub fn basis_row(&self, c: usize) -> &[T] {
        &self.basis[c * self.dim..(c + 1) * self.dim]
    }

    /// Per-component variances, non-negative and non-increasing.
    pub fn explained_variance(&self) -> &[T] {
        &self.explained_variance
    }
}

/// Jacobi eigendecomposition of a real symmetric `n x n` matrix.
///
/// Returns eigenvalues in descending order and the matching eigenvectors as
/// columns of a row-major `n x n` matrix. Deterministic for fixed input.
pub(crate) fn jacobi_eigh<T: Scalar>(matrix: &[T], n: usize) -> (Vec<T>, Vec<T>) {
    let mut a = matrix.to_vec();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    if n > 1 {
        let frob = a.iter().map(|x| *x * *x).sum::<T>().sqrt();
        let tol = T::epsilon() * frob.max(T::one()) * fromf::<T>(n as f64);
        for _sweep in 0..64 {
            let mut off = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off += a[p * n + q] * a[p * n + q];
                }
            }
            if (off + off).sqrt() <= tol {
                break;
            }
            for p in 0..n - 1 {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() <= tol * fromf::<T>(1e-3) {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (apq + apq);
                    let t = {
                        let s = if theta >= T::zero() { T::one() } else { -T::one() };
                        s / (theta.abs() + (theta * theta + T::one()).sqrt())
                    };
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for i in 0..n {
                        let aip = a[i * n + p];
                        let aiq = a[i * n + q];
                        a[i * n + p] = c * aip - s * aiq;
                        a[i * n + q] = s * aip + c * aiq;
                    }
                    for j in 0..n {
                        let apj = a[p * n + j];
                        let aqj = a[q * n + j];
                        a[p * n + j] = c * apj - s * aqj;
                        a[q * n + j] = s * apj + c * aqj;
                    }
                    for i in 0..n {
                        let vip = v[i * n + p];
                        let viq = v[i * n + q];
                        v[i * n + p] = c * vip - s * viq;
                        v[i * n + q] = s * vip + c * viq;
                    }
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].partial_cmp(&a[i * n + i]).unwrap_or(std::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (new_c, &old_c) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + new_c] = v[r * n + old_c];
        }
    }
    (values, vectors)
}

/// Sign convention: the largest-magnitude coordinate of each basis row is
/// positive; ties resolve to the lowest index.
fn fix_sign<T: Scalar>(row: &mut [T]) {
    let mut best = 0usize;
    let mut best_abs = T::zero();
    for (i, x) in row.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if row[best] < T::zero() {
        for x in row.iter_mut() {
            *x = -*x;
        }
    }
}

/// Trains a PCA model on `J >= 2` supervectors.
///
/// `component_count` must satisfy `I <= min(J-1, P)`: centered data has rank
/// at most `J-1`. Components beyond the numerical rank of the data are
/// completed with canonical directions orthogonal to the learned ones, so the
/// basis stays orthonormal (their variance is zero).
pub fn train<T: Scalar>(vectors: &[Supervector<T>], component_count: usize) -> Result<PcaModel<T>> {
    let j = vectors.len();
    if j < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs at least 2 vectors, got {j}")));
    }
    let p = vectors[0].len();
    if vectors.iter().any(|v| v.len() != p) {
        return Err(Error::ShapeMismatch("supervectors differ in length".into()));
    }
    if component_count == 0 || component_count > (j - 1).min(p) {
        return Err(Error::InvalidParameter(format!(
            "component count {component_count} outside 1..={} for {j} vectors of dim {p}",
            (j - 1).min(p)
        )));
    }

    let inv_j = T::one() / fromf::<T>(j as f64);
    let mut mean = vec![T::zero(); p];
    for v in vectors {
        for (m, &x) in mean.iter_mut().zip(&v.values) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m *= inv_j;
    }

    // Gram matrix of centered data, computed without materializing the
    // centered rows.
    let mut gram = vec![T::zero(); j * j];
    gram.par_chunks_mut(j).enumerate().for_each(|(r, row)| {
        let vr = &vectors[r].values;
        for c in r..j {
            let vc = &vectors[c].values;
            let mut acc = T::zero();
            for i in 0..p {
                acc += (vr[i] - mean[i]) * (vc[i] - mean[i]);
            }
            row[c] = acc;
        }
    });
    for r in 0..j {
        for c in 0..r {
            gram[r * j + c] = gram[c * j + r];
        }
    }

    let (eigvals, eigvecs) = jacobi_eigh(&gram, j);
    let rank_floor = eigvals[0].max(T::zero()) * fromf::<T>(1e-12);

    let mut basis = vec![T::zero(); component_count * p];
    let mut explained_variance = Vec::with_capacity(component_count);
    let mut learned = 0usize;
    for c in 0..component_count {
        let lambda = eigvals[c];
        explained_variance.push(lambda.max(T::zero()) * inv_j);
        if !(lambda > rank_floor) {
            break;
        }
        let row = &mut basis[c * p..(c + 1) * p];
        for (r, v) in vectors.iter().enumerate() {
            let coef = eigvecs[r * j + c];
            if coef == T::zero() {
                continue;
            }
            for (out, (&x, &m)) in row.iter_mut().zip(v.values.iter().zip(&mean)) {
                *out += coef * (x - m);
            }
        }
        let norm = row.iter().map(|x| *x * *x).sum::<T>().sqrt();
        for x in row.iter_mut() {
            *x /= norm;
        }
        fix_sign(row);
        learned = c + 1;
    }
    explained_variance.resize(component_count, T::zero());

    // Complete zero-variance components with canonical directions.
    let mut next_axis = 0usize;
    for c in learned..component_count {
        let mut found = false;
        while next_axis < p {
            let mut row = vec![T::zero(); p];
            row[next_axis] = T::one();
            next_axis += 1;
            for prev in 0..c {
                let prev_row = &basis[prev * p..(prev + 1) * p];
                let dot = row.iter().zip(prev_row).map(|(a, b)| *a * *b).sum::<T>();
                for (x, &b) in row.iter_mut().zip(prev_row) {
                    *x -= dot * b;
                }
            }
            let norm = row.iter().map(|x| *x * *x).sum::<T>().sqrt();
            if norm > fromf(0.5) {
                for x in row.iter_mut() {
                    *x /= norm;
                }
                fix_sign(&mut row);
                basis[c * p..(c + 1) * p].copy_from_slice(&row);
                found = true;
                break;
            }
        }
        if !found {
            // Unreachable for component_count <= P, kept as a guard.
            return Err(Error::InvalidParameter("cannot complete orthonormal basis".into()));
        }
    }

    PcaModel::from_parts(mean, basis, explained_variance, component_count)
}

/// Projects a supervector: `basis * (v - mean)`.
pub fn project<T: Scalar>(model: &PcaModel<T>, v: &Supervector<T>) -> Result<ReducedVector<T>> {
    if v.len() != model.dim {
        return Err(Error::LengthMismatch { expected: model.dim, got: v.len() });
    }
    let values = (0..model.component_count)
        .map(|c| {
            let row = model.basis_row(c);
            let mut acc = T::zero();
            for i in 0..model.dim {
                acc += row[i] * (v.values[i] - model.mean[i]);
            }
            acc
        })
        .collect();
    Ok(ReducedVector { values })
}
