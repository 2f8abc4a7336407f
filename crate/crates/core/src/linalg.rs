//! Dense symmetric matrices small enough (L ≲ 16) for cyclic Jacobi.

use crate::scalar::Real;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Matrix { n, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn mul(&self, other: &Matrix<T>) -> Matrix<T> {
        let n = self.n;
        Matrix::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * other.get(k, j)).sum())
    }

    /// Leading `k×k` principal submatrix.
    pub fn leading(&self, k: usize) -> Matrix<T> {
        Matrix::from_fn(k, |i, j| self.get(i, j))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        Matrix { n: self.n, data: self.data.iter().map(|&x| f(x)).collect() }
    }

    pub fn max_abs_diff(&self, other: &Matrix<T>) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max)
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self.get(i, j) - self.get(j, i)).abs() <= tol))
    }

    /// Eigen-decomposition of a symmetric matrix: `(eigenvalues, V)` with
    /// `self = V diag(λ) Vᵀ`, eigenvectors stored as columns of `V`.
    pub fn symmetric_eigen(&self) -> (Vec<T>, Matrix<T>) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = Matrix::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let off: T = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| a.get(i, j) * a.get(i, j))
                .sum();
            let diag: T = (0..n).map(|i| a.get(i, i) * a.get(i, i)).sum();
            if off <= eps * eps * diag || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = a.get(p, q);
                    if apq == T::zero() {
                        continue;
                    }
                    let theta = (a.get(q, q) - a.get(p, p)) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        a.set(k, p, c * akp - s * akq);
                        a.set(k, q, s * akp + c * akq);
                    }
                    for k in 0..n {
                        let apk = a.get(p, k);
                        let aqk = a.get(q, k);
                        a.set(p, k, c * apk - s * aqk);
                        a.set(q, k, s * apk + c * aqk);
                    }
                    for k in 0..n {
                        let vkp = v.get(k, p);
                        let vkq = v.get(k, q);
                        v.set(k, p, c * vkp - s * vkq);
                        v.set(k, q, s * vkp + c * vkq);
                    }
                }
            }
        }
        ((0..n).map(|i| a.get(i, i)).collect(), v)
    }

    /// `V diag(f(λ)) Vᵀ` for a symmetric matrix.
    pub fn spectral_map(&self, f: impl Fn(T) -> T) -> Matrix<T> {
        let (lambda, v) = self.symmetric_eigen();
        let n = self.n;
        let fl: Vec<T> = lambda.into_iter().map(f).collect();
        Matrix::from_fn(n, |i, j| (0..n).map(|k| v.get(i, k) * fl[k] * v.get(j, k)).sum())
    }

    /// Factor `F = V diag(√λ)` with `F Fᵀ = self` (symmetric positive semidefinite input).
    pub fn psd_factor(&self) -> Matrix<T> {
        let (lambda, v) = self.symmetric_eigen();
        let n = self.n;
        Matrix::from_fn(n, |i, k| v.get(i, k) * lambda[k].max(T::zero()).sqrt())
    }

    /// Ratio of extreme eigenvalue magnitudes; infinite when singular.
    pub fn condition_number(&self) -> T {
        let (lambda, _) = self.symmetric_eigen();
        let max = lambda.iter().map(|x| x.abs()).fold(T::zero(), T::max);
        let min = lambda.iter().map(|x| x.abs()).fold(T::infinity(), T::min);
        if min == T::zero() { T::infinity() } else { max / min }
    }

    pub fn min_eigenvalue(&self) -> T {
        self.symmetric_eigen().0.into_iter().fold(T::infinity(), T::min)
    }

    pub fn determinant_symmetric(&self) -> T {
        self.symmetric_eigen().0.into_iter().fold(T::one(), |acc, x| acc * x)
    }
}
