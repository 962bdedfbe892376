//! Cyclic Jacobi eigensolver for dense symmetric matrices.

use crate::error::{Error, Result};

/// Dense row-major square matrix, just enough for the eigensolver and the
/// Gram matrices fed to it.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(n: usize) -> Self {
        SymMatrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = SymMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(format!(
                    "row {i} has length {}, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(SymMatrix { n, data })
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let mut m = SymMatrix::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    pub fn size(&self) -> usize {
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

    fn off_diagonal_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    s += self.get(i, j).powi(2);
                }
            }
        }
        s.sqrt()
    }

    /// `A v` for a dense vector.
    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                self.data[i * self.n..(i + 1) * self.n]
                    .iter()
                    .zip(v)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }
}

/// Eigenvalues in descending order with matching unit eigenvectors.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: Vec<f64>,
    /// `vectors[k]` pairs with `values[k]`.
    pub vectors: Vec<Vec<f64>>,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 100;
const OFF_DIAGONAL_TOL: f64 = 1e-12;

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Iterates row-by-row sweeps until the off-diagonal Frobenius norm drops to
/// `1e-12·‖A‖_F` or 100 sweeps have run. Each eigenvector is sign-normalized
/// so its largest-magnitude entry is positive.
pub fn symmetric_eigen(a: &SymMatrix) -> Result<EigenDecomposition> {
    let n = a.size();
    let norm = a.frobenius();
    if !norm.is_finite() {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    let sym_tol = 1e-10 * norm.max(1.0);
    for i in 0..n {
        for j in (i + 1)..n {
            if (a.get(i, j) - a.get(j, i)).abs() > sym_tol {
                return Err(Error::invalid(format!(
                    "matrix is not symmetric at ({i}, {j}): {} vs {}",
                    a.get(i, j),
                    a.get(j, i)
                )));
            }
        }
    }

    let mut d = a.clone();
    // v holds eigenvectors as columns
    let mut v = SymMatrix::identity(n);
    let target = OFF_DIAGONAL_TOL * norm;
    let mut sweeps = 0;
    while sweeps < MAX_SWEEPS && d.off_diagonal_norm() > target {
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = d.get(p, q);
                if apq == 0.0 {
                    continue;
                }
                let app = d.get(p, p);
                let aqq = d.get(q, q);
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut d, &mut v, p, q, c, s, t);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d.get(j, j).total_cmp(&d.get(i, i)));
    let values = order.iter().map(|&k| d.get(k, k)).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|i| v.get(i, k)).collect();
            normalize_sign(&mut col);
            col
        })
        .collect();
    Ok(EigenDecomposition {
        values,
        vectors,
        sweeps,
    })
}

/// Applies the rotation that zeroes `d[p][q]`, accumulating it into `v`.
fn rotate(d: &mut SymMatrix, v: &mut SymMatrix, p: usize, q: usize, c: f64, s: f64, t: f64) {
    let n = d.size();
    let apq = d.get(p, q);
    let app = d.get(p, p);
    let aqq = d.get(q, q);
    d.set(p, p, app - t * apq);
    d.set(q, q, aqq + t * apq);
    d.set(p, q, 0.0);
    d.set(q, p, 0.0);
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = d.get(k, p);
        let akq = d.get(k, q);
        let nkp = c * akp - s * akq;
        let nkq = s * akp + c * akq;
        d.set(k, p, nkp);
        d.set(p, k, nkp);
        d.set(k, q, nkq);
        d.set(q, k, nkq);
    }
    for k in 0..n {
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, c * vkp - s * vkq);
        v.set(k, q, s * vkp + c * vkq);
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub fn normalize_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}
