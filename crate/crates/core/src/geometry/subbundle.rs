//! SVD subbundle splitting of a pulled-back metric, the F-natural metric,
//! and metric-orthogonal verification projectors.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;

/// Range / kernel splitting of the (co)tangent space produced by the
/// spectral decomposition of a pulled-back metric.
///
/// Range covectors and kernel vectors are orthonormal in the coordinate
/// sense, so every range covector annihilates every kernel vector exactly.
#[derive(Debug, Clone)]
pub struct SubbundleSplit {
    /// Basis of the range cotangent sector (rows of the SVD basis with
    /// singular value above threshold), components in coordinate basis.
    pub range_covectors: Vec<DVector<f64>>,
    /// Basis of the kernel tangent sector (gauge directions).
    pub kernel_vectors: Vec<DVector<f64>>,
    /// All singular values, descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

impl SubbundleSplit {
    /// Largest annihilation defect `|eps(E)|` over all pairs, normalized by
    /// the basis norms (all bases are unit vectors here).
    pub fn annihilation_defect(&self) -> f64 {
        let mut worst = 0.0_f64;
        for eps in &self.range_covectors {
            for e in &self.kernel_vectors {
                worst = worst.max(eps.dot(e).abs());
            }
        }
        worst
    }
}

/// Split the SVD basis of a symmetric PSD matrix `P` into range covectors
/// (singular value above `tol * sigma_max`) and kernel vectors (the rest).
pub fn split_subbundles(p: &DMatrix<f64>, tol: f64) -> SubbundleSplit {
    assert!(tol > 0.0, "tolerance must be positive");
    let eig = nalgebra::SymmetricEigen::new(symmetrize(p));
    let n = p.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
    });
    let sigma_max = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x));
    let cut = tol * sigma_max;
    let mut range = Vec::new();
    let mut kernel = Vec::new();
    let mut values = Vec::with_capacity(n);
    for &i in &order {
        let ev = eig.eigenvalues[i];
        values.push(ev.max(0.0));
        let v: DVector<f64> = eig.eigenvectors.column(i).into();
        if sigma_max > 0.0 && ev > cut {
            range.push(v);
        } else {
            kernel.push(v);
        }
    }
    let rank = range.len();
    SubbundleSplit {
        range_covectors: range,
        kernel_vectors: kernel,
        singular_values: values,
        rank,
    }
}

/// Full-rank metric on the simulation space agreeing with the pullback on
/// its range and weighing the kernel sector with the gauge mass `lambda`:
/// `g_M = P + lambda * sum_k kappa_k kappa_k^T`.
#[derive(Debug, Clone)]
pub struct FNaturalMetric {
    pub matrix: DMatrix<f64>,
    pub gauge_mass: f64,
}

pub fn natural_metric(
    p: &DMatrix<f64>,
    split: &SubbundleSplit,
    lambda: f64,
) -> Result<FNaturalMetric> {
    if lambda <= 0.0 {
        return Err(Error::NonPositiveGaugeMass(lambda));
    }
    let mut g = p.clone();
    for kappa in &split.kernel_vectors {
        g += (kappa * kappa.transpose()) * lambda;
    }
    Ok(FNaturalMetric {
        matrix: symmetrize(&g),
        gauge_mass: lambda,
    })
}

/// The g-orthogonal projector onto the span of `basis`:
/// `pi = B (B^T g B)^{-1} B^T g`. Idempotent by construction, and `g pi`
/// is symmetric.
pub fn verification_projector(g: &DMatrix<f64>, basis: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    let n = g.nrows();
    let k = basis.len();
    if k == 0 {
        return Ok(DMatrix::zeros(n, n));
    }
    let mut b = DMatrix::zeros(n, k);
    for (j, v) in basis.iter().enumerate() {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                context: "projector basis vector",
                expected: n,
                got: v.len(),
            });
        }
        b.set_column(j, v);
    }
    let gram = b.transpose() * g * &b;
    // reject rank-deficient bases through the Gram conditioning
    let eig = nalgebra::SymmetricEigen::new(symmetrize(&gram));
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if eig
        .eigenvalues
        .iter()
        .any(|&ev| ev.abs() <= 1e-12 * max_ev || ev <= 0.0)
    {
        return Err(Error::RankDeficientBasis);
    }
    let gram_inv = gram
        .try_inverse()
        .ok_or(Error::RankDeficientBasis)?;
    Ok(&b * gram_inv * b.transpose() * g)
}
