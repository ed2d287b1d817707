//! Reduced-dimension quantum simulation: parametrized immersions
//! `psi(xi)`, the pulled-back Kähler metric, pseudo-inverse musical solves,
//! and projected stochastic increments on diagonal tensor-network
//! state-spaces.
//!
//! Real-coordinate convention: `xi` and `psi` are flattened `[Re; Im]`
//! pairs, and the Hilbert metric is the identity in these coordinates
//! (the Kähler potential is `<psi|psi>/2`). This fixes every factor of
//! two. Complex-arithmetic fast paths are realifications of the same
//! objects and are tested against the dense real oracle.

pub mod mps;
pub mod project;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{sym_pinv_apply, sym_rank, symmetrize};

pub use mps::DiagonalMps;
pub use project::{
    projected_ito_increment, stratonovich_drift_forms, ProjectedSse, ProjectedStep,
};

/// A smooth immersion of a reduced real coordinate manifold into real
/// Hilbert coordinates.
pub trait Immersion: Sync {
    fn dim_xi(&self) -> usize;
    fn dim_hilbert(&self) -> usize;
    fn eval(&self, xi: &DVector<f64>) -> DVector<f64>;
    fn jacobian(&self, xi: &DVector<f64>) -> DMatrix<f64>;

    /// Relative deviation of the analytic Jacobian from central finite
    /// differences.
    fn jacobian_defect(&self, xi: &DVector<f64>) -> f64 {
        let h = 1e-6 * xi.norm().max(1.0);
        let mut fd = DMatrix::zeros(self.dim_hilbert(), self.dim_xi());
        for j in 0..self.dim_xi() {
            let mut xp = xi.clone();
            let mut xm = xi.clone();
            xp[j] += h;
            xm[j] -= h;
            fd.set_column(j, &((self.eval(&xp) - self.eval(&xm)) / (2.0 * h)));
        }
        let ja = self.jacobian(xi);
        (&ja - fd).norm() / ja.norm().max(1e-30)
    }
}

/// The identity immersion (full Hilbert space as its own chart).
pub struct IdentityImmersion {
    pub dim: usize,
}

impl Immersion for IdentityImmersion {
    fn dim_xi(&self) -> usize {
        self.dim
    }
    fn dim_hilbert(&self) -> usize {
        self.dim
    }
    fn eval(&self, xi: &DVector<f64>) -> DVector<f64> {
        xi.clone()
    }
    fn jacobian(&self, _xi: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::identity(self.dim, self.dim)
    }
}

/// Pulled-back Kähler metric `g_K = J^T J` at a point, with its numerical
/// rank and a pseudo-inverse applier.
#[derive(Debug, Clone)]
pub struct ReducedMetric {
    pub g: DMatrix<f64>,
    pub rank: usize,
    pub rtol: f64,
}

/// Rank threshold used for pseudo-inverses throughout this module.
pub const PINV_RTOL: f64 = 1e-10;

/// `g_K = J^T g_H J` with `g_H` the identity in real Hilbert coordinates.
pub fn reduced_metric(imm: &dyn Immersion, xi: &DVector<f64>) -> ReducedMetric {
    let j = imm.jacobian(xi);
    let g = symmetrize(&(j.transpose() * j));
    let rank = sym_rank(&g, PINV_RTOL);
    ReducedMetric {
        g,
        rank,
        rtol: PINV_RTOL,
    }
}

impl ReducedMetric {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// Minimal-norm pseudo-inverse application.
    pub fn pinv_apply(&self, b: &DVector<f64>) -> DVector<f64> {
        sym_pinv_apply(&self.g, b, self.rtol)
    }
}

/// Outcome of a musical (index-raising) solve `g v = covector`.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub v: DVector<f64>,
    pub residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Dimension above which the dense pseudo-inverse gives way to the
/// matrix-free conjugate-gradient solver.
pub const DENSE_SOLVE_LIMIT: usize = 512;

/// Raise an index: minimal-norm `v` with `g v ~ covector`. Covectors with a
/// component outside the range of `g` yield the least-squares solution and
/// a raised `converged = false` flag (residual reported).
pub fn musical_solve(metric: &ReducedMetric, covector: &DVector<f64>) -> SolveOutcome {
    if metric.dim() <= DENSE_SOLVE_LIMIT {
        let v = metric.pinv_apply(covector);
        let residual = (&metric.g * &v - covector).norm();
        let converged = residual <= metric.rtol.sqrt() * covector.norm().max(1e-300);
        SolveOutcome {
            v,
            residual,
            converged,
            iterations: 0,
        }
    } else {
        // matrix-free route for large charts

        let g = metric.g.clone();
        cg_solve(
            |x| &g * x,
            metric.dim(),
            covector,
            metric.g.trace(),
            metric.rtol,
        )
    }
}

/// Matrix-free conjugate gradient on the Tikhonov-shifted system
/// `(g + tau I) v = b` with `tau = 1e-12 trace(g)/dim`, capped at
/// `10 * dim` iterations.
pub fn cg_solve(
    apply: impl Fn(&DVector<f64>) -> DVector<f64>,
    dim: usize,
    b: &DVector<f64>,
    trace: f64,
    rtol: f64,
) -> SolveOutcome {
    let tau = 1e-12 * trace / dim as f64;
    let shifted = |x: &DVector<f64>| apply(x) + x * tau;
    let mut v = DVector::zeros(dim);
    let mut r = b.clone();
    let mut p = r.clone();
    let b_norm = b.norm().max(1e-300);
    let mut rs = r.norm_squared();
    let max_iter = 10 * dim;
    let mut iterations = 0;
    while iterations < max_iter {
        if rs.sqrt() <= rtol * b_norm {
            break;
        }
        let ap = shifted(&p);
        let denom = p.dot(&ap);
        if denom <= 0.0 {
            break;
        }
        let alpha = rs / denom;
        v += &p * alpha;
        r -= ap * alpha;
        let rs_new = r.norm_squared();
        p = &r + &p * (rs_new / rs);
        rs = rs_new;
        iterations += 1;
    }
    let residual = (apply(&v) - b).norm();
    SolveOutcome {
        converged: residual <= 10.0 * rtol * b_norm,
        v,
        residual,
        iterations,
    }
}

/// Force the CG path regardless of dimension (used to cross-check against
/// the dense pseudo-inverse).
pub fn musical_solve_cg(metric: &ReducedMetric, covector: &DVector<f64>) -> SolveOutcome {
    let g = metric.g.clone();
    cg_solve(
        |x| &g * x,
        metric.dim(),
        covector,
        metric.g.trace(),
        metric.rtol,
    )
}

/// Iteration-cap error view of an outcome, per the solver contract.
pub fn require_converged(out: SolveOutcome) -> Result<DVector<f64>> {
    if out.converged {
        Ok(out.v)
    } else {
        Err(Error::SolverIterationCap {
            residual: out.residual,
        })
    }
}
