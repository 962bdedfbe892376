//! PCA eigenspace ("eigenfaces") built with the snapshot method.
//!
//! The covariance `Ω = X·Xᵀ` of the centered training images is `H×H`, with
//! `H` the pixel count. Its nonzero eigenpairs are recovered from the much
//! smaller `P×P` Gram matrix `XᵀX`: if `XᵀX u = λu` then `Ω (Xu) = λ (Xu)`.
//! No `1/P` normalization is applied to `Ω`.

mod jacobi;

pub use jacobi::{normalize_sign, symmetric_eigen, EigenDecomposition, SymMatrix};

use crate::error::{Error, Result};
use crate::image::ImageVector;
use crate::par::{self, Exec};

/// Centered training images, one column per image.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    dim: usize,
    columns: Vec<Vec<f64>>,
}

impl DataMatrix {
    /// Pixel count `H`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of images `P`.
    pub fn count(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, i: usize) -> &[f64] {
        &self.columns[i]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.columns.iter().flatten().map(|v| v * v).sum()
    }

    /// `XᵀX`, entry `(i, j)` the dot product of columns `i` and `j`.
    pub fn gram(&self, exec: Exec) -> SymMatrix {
        let p = self.count();
        let rows = par::map_range(exec, p, |i| {
            (0..p)
                .map(|j| {
                    if j < i {
                        0.0
                    } else {
                        dot(&self.columns[i], &self.columns[j])
                    }
                })
                .collect::<Vec<f64>>()
        });
        let mut g = SymMatrix::zeros(p);
        for (i, row) in rows.iter().enumerate() {
            for (j, &v) in row.iter().enumerate().skip(i) {
                g.set(i, j, v);
                g.set(j, i, v);
            }
        }
        g
    }

    /// `X·Xᵀ`, the full `H×H` covariance. Only sensible for small `H`.
    pub fn covariance(&self) -> SymMatrix {
        let h = self.dim;
        let mut c = SymMatrix::zeros(h);
        for a in 0..h {
            for b in a..h {
                let s: f64 = self.columns.iter().map(|col| col[a] * col[b]).sum();
                c.set(a, b, s);
                c.set(b, a, s);
            }
        }
        c
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Mean image, basis and eigenvalues of a trained face space.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenspace {
    mean: Vec<f64>,
    /// `basis[k]` is the `k`-th eigenvector (a column of `V`), length `H`.
    basis: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    feature_width: usize,
}

impl Eigenspace {
    /// Assembles an eigenspace from parts, checking shapes. `feature_width`
    /// must be at least the number of basis vectors; projections are
    /// zero-padded up to it.
    pub fn from_parts(
        mean: Vec<f64>,
        basis: Vec<Vec<f64>>,
        eigenvalues: Vec<f64>,
        feature_width: usize,
    ) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::invalid("eigenspace mean is empty"));
        }
        if basis.len() != eigenvalues.len() {
            return Err(Error::invalid(format!(
                "{} basis vectors but {} eigenvalues",
                basis.len(),
                eigenvalues.len()
            )));
        }
        if let Some(k) = basis.iter().position(|v| v.len() != mean.len()) {
            return Err(Error::invalid(format!(
                "basis vector {k} has the wrong length"
            )));
        }
        if feature_width < basis.len() {
            return Err(Error::invalid("feature width is smaller than the basis"));
        }
        Ok(Eigenspace {
            mean,
            basis,
            eigenvalues,
            feature_width,
        })
    }

    /// Pixel count `H`.
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained eigenvectors `U`.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// Length of every projected feature vector (`≥ U`).
    pub fn feature_width(&self) -> usize {
        self.feature_width
    }

    pub fn is_padded(&self) -> bool {
        self.feature_width > self.basis.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Maps a feature vector back to image space: `V·f + m̄`.
    pub fn reconstruct(&self, features: &FeatureVector) -> Result<Vec<f64>> {
        if features.len() != self.feature_width {
            return Err(Error::invalid(format!(
                "feature vector has length {}, expected {}",
                features.len(),
                self.feature_width
            )));
        }
        let mut out = self.mean.clone();
        for (v, &f) in self.basis.iter().zip(features.as_slice()) {
            for (o, b) in out.iter_mut().zip(v) {
                *o += f * b;
            }
        }
        Ok(out)
    }
}

/// Projection of one image onto the eigenspace.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Self {
        FeatureVector(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_lengths(train: &[ImageVector]) -> Result<usize> {
    let first = train
        .first()
        .ok_or_else(|| Error::invalid("training set is empty"))?;
    let h = first.len();
    if let Some(i) = train.iter().position(|v| v.len() != h) {
        return Err(Error::invalid(format!(
            "image vector {i} has length {}, expected {h}",
            train[i].len()
        )));
    }
    Ok(h)
}

/// Elementwise mean of the training vectors.
pub fn mean_image(train: &[ImageVector]) -> Result<ImageVector> {
    let h = check_lengths(train)?;
    let mut mean = vec![0.0; h];
    for v in train {
        for (m, x) in mean.iter_mut().zip(v.as_slice()) {
            *m += x;
        }
    }
    let p = train.len() as f64;
    mean.iter_mut().for_each(|m| *m /= p);
    ImageVector::new(mean)
}

/// Subtracts `mean` from every training vector.
pub fn center(train: &[ImageVector], mean: &ImageVector) -> Result<DataMatrix> {
    let h = check_lengths(train)?;
    if h != mean.len() {
        return Err(Error::invalid(format!(
            "mean has length {}, images have length {h}",
            mean.len()
        )));
    }
    let columns = train
        .iter()
        .map(|v| {
            v.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(x, m)| x - m)
                .collect()
        })
        .collect();
    Ok(DataMatrix { dim: h, columns })
}

/// Relative threshold below which an eigenvalue counts as zero.
pub const ZERO_EIGENVALUE_RTOL: f64 = 1e-10;

/// Builds the eigenspace of `data`, keeping at most `max_u` eigenvectors with
/// eigenvalue above `1e-10·λ_max`. The feature width is `max_u`; if fewer
/// eigenvectors survive, projections are zero-padded.
pub fn build_eigenspace(data: &DataMatrix, mean: &ImageVector, max_u: usize) -> Result<Eigenspace> {
    build_eigenspace_with(data, mean, max_u, Exec::default())
}

pub fn build_eigenspace_with(
    data: &DataMatrix,
    mean: &ImageVector,
    max_u: usize,
    exec: Exec,
) -> Result<Eigenspace> {
    if data.count() < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 training images, got {}",
            data.count()
        )));
    }
    if mean.len() != data.dim() {
        return Err(Error::invalid("mean and data matrix dimensions differ"));
    }
    if max_u == 0 {
        return Err(Error::invalid("max_u must be positive"));
    }
    let gram = data.gram(exec);
    let eig = symmetric_eigen(&gram)?;
    let lambda_max = eig.values.first().copied().unwrap_or(0.0);
    if lambda_max.is_nan() || lambda_max <= 0.0 {
        return Err(Error::DegenerateTraining(
            "all training images are identical".into(),
        ));
    }
    let eps = ZERO_EIGENVALUE_RTOL * lambda_max;
    let keep: Vec<usize> = (0..eig.values.len())
        .filter(|&k| eig.values[k] > eps)
        .take(max_u)
        .collect();

    let lifted = par::map(exec, &keep, |&k| {
        let u = &eig.vectors[k];
        let mut v = vec![0.0; data.dim()];
        for (col, &w) in data.columns.iter().zip(u) {
            for (vi, ci) in v.iter_mut().zip(col) {
                *vi += w * ci;
            }
        }
        let norm = dot(&v, &v).sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        normalize_sign(&mut v);
        v
    });
    let eigenvalues: Vec<f64> = keep.iter().map(|&k| eig.values[k]).collect();
    if keep.len() < max_u {
        log::warn!(
            "only {} positive eigenvalues, padding features to width {max_u}",
            keep.len()
        );
    }
    Eigenspace::from_parts(mean.as_slice().to_vec(), lifted, eigenvalues, max_u)
}

/// `Vᵀ(x − m̄)`, zero-padded to the feature width.
pub fn project(space: &Eigenspace, x: &ImageVector) -> Result<FeatureVector> {
    project_slice(space, x.as_slice())
}

pub fn project_slice(space: &Eigenspace, x: &[f64]) -> Result<FeatureVector> {
    if x.len() != space.dim() {
        return Err(Error::invalid(format!(
            "image vector has length {}, eigenspace expects {}",
            x.len(),
            space.dim()
        )));
    }
    let centered: Vec<f64> = x.iter().zip(&space.mean).map(|(a, m)| a - m).collect();
    let mut out: Vec<f64> = space.basis.iter().map(|v| dot(v, &centered)).collect();
    out.resize(space.feature_width, 0.0);
    Ok(FeatureVector(out))
}
