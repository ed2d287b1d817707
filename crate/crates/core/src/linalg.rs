//! Small dense linear-algebra helpers used by every module.

use nalgebra::{DMatrix, DVector};

use crate::C64;

/// Largest absolute entry of a real matrix.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Largest absolute entry of a complex matrix.
pub fn max_abs_c(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0, |acc, x| acc.max(x.norm()))
}

/// Frobenius norm of a complex matrix.
pub fn fro_norm_c(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Hermitian asymmetry `max |M - M^H|`.
pub fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    max_abs_c(&(m - m.adjoint()))
}

/// Force exact Hermitian symmetry, `(M + M^H)/2`.
pub fn hermitize(m: &DMatrix<C64>) -> DMatrix<C64> {
    (m + m.adjoint()).scale(0.5)
}

/// Force exact symmetry of a real matrix.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()).scale(0.5)
}

/// Eigenvalue-based pseudo-inverse application for a symmetric PSD matrix.
///
/// Eigenvalues below `rtol * max_eig` are treated as exact zeros, so the
/// result is the minimal-norm solution of `g x = b`.
pub fn sym_pinv_apply(g: &DMatrix<f64>, b: &DVector<f64>, rtol: f64) -> DVector<f64> {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(g));
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let cut = rtol * max_ev;
    let mut out = DVector::zeros(b.len());
    for (i, &ev) in eig.eigenvalues.iter().enumerate() {
        if ev.abs() > cut && ev > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += v * (v.dot(b) / ev);
        }
    }
    out
}

/// Hermitian eigen-decomposition of a complex matrix, symmetrized first.
pub fn herm_eigen(m: &DMatrix<C64>) -> (DVector<f64>, DMatrix<C64>) {
    let eig = nalgebra::SymmetricEigen::new(hermitize(m));
    (eig.eigenvalues, eig.eigenvectors)
}

/// Apply a real function to a Hermitian matrix through its spectrum.
pub fn herm_matrix_fn(m: &DMatrix<C64>, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
    let (vals, vecs) = herm_eigen(m);
    let n = vals.len();
    let mut d = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        d[(i, i)] = f(vals[i]);
    }
    &vecs * d * vecs.adjoint()
}

/// Minimal-norm pseudo-inverse application for a Hermitian PSD complex matrix.
pub fn herm_pinv_apply(g: &DMatrix<C64>, b: &DVector<C64>, rtol: f64) -> DVector<C64> {
    let (vals, vecs) = herm_eigen(g);
    let max_ev = vals.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let cut = rtol * max_ev;
    let mut out = DVector::zeros(b.len());
    for (i, &ev) in vals.iter().enumerate() {
        if ev.abs() > cut && ev > 0.0 {
            let v = vecs.column(i);
            let coeff = v.dotc(b) / C64::new(ev, 0.0);
            out += v * coeff;
        }
    }
    out
}

/// Numerical rank of a symmetric PSD matrix: eigenvalues above `rtol * max`.
pub fn sym_rank(g: &DMatrix<f64>, rtol: f64) -> usize {
    let eig = nalgebra::SymmetricEigen::new(symmetrize(g));
    let max_ev = eig.eigenvalues.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    if max_ev == 0.0 {
        return 0;
    }
    eig.eigenvalues.iter().filter(|&&x| x > rtol * max_ev).count()
}

/// Kronecker product of complex matrices.
pub fn kron(a: &DMatrix<C64>, b: &DMatrix<C64>) -> DMatrix<C64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::<C64>::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// View a complex vector as stacked real coordinates `[Re; Im]`.
pub fn realify_vec(v: &DVector<C64>) -> DVector<f64> {
    let n = v.len();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        out[i] = v[i].re;
        out[n + i] = v[i].im;
    }
    out
}

/// Inverse of [`realify_vec`].
pub fn complexify_vec(v: &DVector<f64>) -> DVector<C64> {
    let n = v.len() / 2;
    assert_eq!(v.len(), 2 * n, "real view must have even length");
    DVector::from_fn(n, |i, _| C64::new(v[i], v[n + i]))
}

/// Realification of a complex matrix `Z` acting on `[Re; Im]` stacked
/// coordinates: `[[Re Z, -Im Z], [Im Z, Re Z]]`.
pub fn realify_mat(z: &DMatrix<C64>) -> DMatrix<f64> {
    let (r, c) = z.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let x = z[(i, j)];
            out[(i, j)] = x.re;
            out[(i, j + c)] = -x.im;
            out[(i + r, j)] = x.im;
            out[(i + r, j + c)] = x.re;
        }
    }
    out
}
