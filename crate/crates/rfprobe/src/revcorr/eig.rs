//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};

/// A dense square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::Shape("matrix rows must form a square".into()));
        }
        let mut m = Self::zeros(n);
        for (i, row) in rows.iter().enumerate() {
            m.data[i * n..(i + 1) * n].copy_from_slice(row);
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
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

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// y = A·x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        self.data.chunks_exact(self.n).map(|row| crate::tensor::dot(row, x)).collect()
    }

    fn off_diagonal_frobenius(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    let v = self.get(i, j);
                    s += v * v;
                }
            }
        }
        s.sqrt()
    }

    fn max_asymmetry(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                m = m.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        m
    }
}

/// The sorted spectrum of an AWC matrix: eigenvalues descending, matched
/// orthonormal eigenvectors (column i pairs with eigenvalue i), and the
/// spectral mean used for the excitatory/suppressive split.
#[derive(Debug, Clone)]
pub struct AwcDecomposition {
    pub eigenvalues: Vec<f64>,
    /// eigenvectors[i] is the unit eigenvector for eigenvalues[i].
    pub eigenvectors: Vec<Vec<f64>>,
    pub mean_eigenvalue: f64,
}

const SYMMETRY_TOL: f64 = 1e-10;
const CONVERGENCE_REL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Full spectrum of a symmetric matrix by cyclic Jacobi: sweeps visit the
/// upper triangle in row-major order; convergence when the off-diagonal
/// Frobenius norm falls below 1e-12·‖A‖_F, capped at 100 sweeps.
/// Eigenvector signs are canonicalized so the largest-magnitude component
/// is positive.
pub fn eig_sym(matrix: &SymMatrix) -> Result<AwcDecomposition> {
    let n = matrix.dim();
    if n == 0 {
        return Err(Error::Shape("cannot decompose an empty matrix".into()));
    }
    if !matrix.data.iter().all(|v| v.is_finite()) {
        return Err(Error::Shape("matrix has non-finite entries".into()));
    }
    let norm = matrix.frobenius();
    if matrix.max_asymmetry() > SYMMETRY_TOL * norm.max(1.0) {
        return Err(Error::Shape(format!(
            "matrix asymmetry {:.3e} exceeds {SYMMETRY_TOL:e} relative",
            matrix.max_asymmetry() / norm.max(1.0)
        )));
    }

    let mut a = matrix.clone();
    // use the upper triangle as the authoritative half
    for i in 0..n {
        for j in (i + 1)..n {
            let v = a.get(i, j);
            a.set(j, i, v);
        }
    }

    // eigenvector accumulator: v[i*n + j] = component i of eigenvector j
    let mut v = vec![0.0f64; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let threshold = CONVERGENCE_REL * norm;
    for _sweep in 0..MAX_SWEEPS {
        if a.off_diagonal_frobenius() <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                // rows/cols p and q of A
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
                // eigenvector columns p and q
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        a.get(j, j).partial_cmp(&a.get(i, i)).unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut eigenvalues = Vec::with_capacity(n);
    let mut eigenvectors = Vec::with_capacity(n);
    for &col in &order {
        eigenvalues.push(a.get(col, col));
        let mut vec_i: Vec<f64> = (0..n).map(|k| v[k * n + col]).collect();
        canonicalize_sign(&mut vec_i);
        eigenvectors.push(vec_i);
    }
    let mean_eigenvalue = eigenvalues.iter().sum::<f64>() / n as f64;
    Ok(AwcDecomposition { eigenvalues, eigenvectors, mean_eigenvalue })
}

fn canonicalize_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
