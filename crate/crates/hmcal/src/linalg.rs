//! Minimal dense linear algebra for the GP surrogate: a symmetric matrix in
//! row-major storage and its Cholesky factorization. Training sets here are
//! a few hundred points at most, so a straightforward O(n^3) factorization
//! is plenty.

/// Square matrix, row-major.
#[derive(Debug, Clone)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// Lower-triangular Cholesky factor L with A = L L^T.
#[derive(Debug, Clone)]
pub struct Cholesky {
    l: SquareMatrix,
}

impl Cholesky {
    /// Factors a symmetric positive definite matrix; `None` if a pivot is
    /// not strictly positive (semidefinite or indefinite input).
    pub fn factor(a: &SquareMatrix) -> Option<Self> {
        let n = a.n();
        let mut l = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = a.get(i, j);
                for k in 0..j {
                    s -= l.get(i, k) * l.get(j, k);
                }
                if i == j {
                    if s <= 0.0 || !s.is_finite() {
                        return None;
                    }
                    l.set(i, j, s.sqrt());
                } else {
                    l.set(i, j, s / l.get(j, j));
                }
            }
        }
        Some(Self { l })
    }

    pub fn n(&self) -> usize {
        self.l.n()
    }

    pub fn factor_matrix(&self) -> &SquareMatrix {
        &self.l
    }

    /// Solves L z = b in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        let n = self.l.n();
        for i in 0..n {
            let row = self.l.row(i);
            let mut s = b[i];
            for k in 0..i {
                s -= row[k] * b[k];
            }
            b[i] = s / row[i];
        }
    }

    /// Solves L^T z = b in place.
    pub fn backward_solve(&self, b: &mut [f64]) {
        let n = self.l.n();
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in (i + 1)..n {
                s -= self.l.get(k, i) * b[k];
            }
            b[i] = s / self.l.get(i, i);
        }
    }

    /// Solves A x = b, returning x.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        self.backward_solve(&mut x);
        x
    }

    /// log det A = 2 sum log L_ii.
    pub fn log_det(&self) -> f64 {
        (0..self.l.n()).map(|i| self.l.get(i, i).ln()).sum::<f64>() * 2.0
    }

    /// Smallest squared Cholesky pivot: the smallest conditional variance
    /// of one row given the preceding ones. Near-duplicate rows drive this
    /// to zero.
    pub fn min_pivot_squared(&self) -> f64 {
        let mut lo = f64::INFINITY;
        for i in 0..self.l.n() {
            let d = self.l.get(i, i);
            lo = lo.min(d * d);
        }
        lo
    }

    /// 2-norm condition estimate of the factored matrix A via a few power
    /// iterations for the largest eigenvalue and inverse iterations (through
    /// the factor) for the smallest.
    pub fn condition_estimate(&self, a: &SquareMatrix) -> f64 {
        let n = self.l.n();
        if n < 2 {
            return 1.0;
        }
        let iters = 12;
        // largest eigenvalue of A
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        let mut lambda_max = 1.0;
        for _ in 0..iters {
            let mut w = vec![0.0; n];
            for i in 0..n {
                let row = a.row(i);
                w[i] = dot(row, &v);
            }
            let norm = dot(&w, &w).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return f64::INFINITY;
            }
            lambda_max = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        // smallest eigenvalue via inverse iteration A w = v
        let mut v = vec![1.0 / (n as f64).sqrt(); n];
        // decorrelate from the dominant eigvec a little
        if n > 1 {
            v[0] = -v[0];
        }
        let mut inv_lambda_min = 1.0;
        for _ in 0..iters {
            let w = self.solve(&v);
            let norm = dot(&w, &w).sqrt();
            if norm == 0.0 || !norm.is_finite() {
                return f64::INFINITY;
            }
            inv_lambda_min = norm;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / norm;
            }
        }
        lambda_max * inv_lambda_min
    }

    /// Reconstructs A = L L^T (used to verify factorization quality).
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.l.n();
        let mut a = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..=i.min(j) {
                    s += self.l.get(i, k) * self.l.get(j, k);
                }
                a.set(i, j, s);
            }
        }
        a
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
