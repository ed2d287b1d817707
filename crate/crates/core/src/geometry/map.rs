//! Coordinate maps from simulation to native state-spaces, with their
//! Jacobians, and the pulled-back native metric.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::record::TrajectoryRecord;

use super::quaternion;

type EvalFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
type JacFn = Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// A smooth map `F` from simulation coordinates `q` to native coordinates
/// `x`, with an analytic Jacobian `dx/dq`.
pub struct PullbackMap {
    pub dim_sim: usize,
    pub dim_native: usize,
    eval: EvalFn,
    jacobian: JacFn,
}

impl PullbackMap {
    pub fn new(dim_sim: usize, dim_native: usize, eval: EvalFn, jacobian: JacFn) -> Self {
        Self {
            dim_sim,
            dim_native,
            eval,
            jacobian,
        }
    }

    pub fn eval(&self, q: &DVector<f64>) -> DVector<f64> {
        debug_assert_eq!(q.len(), self.dim_sim);
        (self.eval)(q)
    }

    pub fn jacobian(&self, q: &DVector<f64>) -> DMatrix<f64> {
        debug_assert_eq!(q.len(), self.dim_sim);
        (self.jacobian)(q)
    }

    /// Central finite-difference Jacobian, the oracle against which analytic
    /// Jacobians are verified at start-up.
    pub fn jacobian_fd(&self, q: &DVector<f64>, h: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim_native, self.dim_sim);
        for j in 0..self.dim_sim {
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[j] += h;
            qm[j] -= h;
            let col = (self.eval(&qp) - self.eval(&qm)) / (2.0 * h);
            out.set_column(j, &col);
        }
        out
    }

    /// Relative deviation between the analytic and finite-difference
    /// Jacobians at `q`.
    pub fn jacobian_defect(&self, q: &DVector<f64>) -> f64 {
        let h = 1e-6 * q.norm().max(1.0);
        let ja = self.jacobian(q);
        let jf = self.jacobian_fd(q, h);
        let scale = ja.norm().max(1e-30);
        (ja - jf).norm() / scale
    }

    /// Identity map on `n` coordinates.
    pub fn identity(n: usize) -> Self {
        Self::new(
            n,
            n,
            Box::new(|q: &DVector<f64>| q.clone()),
            Box::new(move |_q: &DVector<f64>| DMatrix::identity(n, n)),
        )
    }
}

/// Constant symmetric positive-definite native metric. For point particles
/// the diagonal carries factors `2 m_i`.
#[derive(Debug, Clone)]
pub struct NativeMetric {
    pub matrix: DMatrix<f64>,
}

impl NativeMetric {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "native metric must be square",
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let asym = (&matrix - matrix.transpose()).amax();
        if asym > 1e-12 * matrix.amax().max(1.0) {
            return Err(Error::Singular("native metric is not symmetric"));
        }
        let eig = nalgebra::SymmetricEigen::new(matrix.clone());
        if eig.eigenvalues.iter().any(|&ev| ev <= 0.0) {
            return Err(Error::Singular("native metric is not positive-definite"));
        }
        Ok(Self { matrix })
    }

    /// Diagonal metric with entries `2 m_i` repeated over `per_mass` axes.
    pub fn point_masses(masses: &[f64], per_mass: usize) -> Self {
        let n = masses.len() * per_mass;
        let mut m = DMatrix::zeros(n, n);
        for (i, &mass) in masses.iter().enumerate() {
            for a in 0..per_mass {
                m[(i * per_mass + a, i * per_mass + a)] = 2.0 * mass;
            }
        }
        Self { matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Pulled-back native metric `P = J^T G J` at the point `q`. Symmetric
/// positive-semidefinite with rank at most `min(dim_sim, dim_native)`.
pub fn pullback_metric(f: &PullbackMap, gn: &NativeMetric, q: &DVector<f64>) -> Result<DMatrix<f64>> {
    if gn.dim() != f.dim_native {
        return Err(Error::DimensionMismatch {
            context: "native metric vs map",
            expected: f.dim_native,
            got: gn.dim(),
        });
    }
    if q.len() != f.dim_sim {
        return Err(Error::DimensionMismatch {
            context: "point vs map domain",
            expected: f.dim_sim,
            got: q.len(),
        });
    }
    let j = f.jacobian(q);
    Ok(symmetrize(&(j.transpose() * &gn.matrix * j)))
}

/// Push the configuration part of a trajectory forward to native
/// coordinates, `x(t) = F(q(t))`. The record's states must hold phase
/// points `[q; p]` (or plain `q` when `p` is absent).
pub fn pushforward_trajectory(f: &PullbackMap, traj: &TrajectoryRecord) -> TrajectoryRecord {
    let states = traj
        .states
        .as_ref()
        .expect("pushforward needs recorded states");
    let mapped: Vec<DVector<f64>> = states
        .iter()
        .map(|z| {
            let q = DVector::from_iterator(f.dim_sim, z.iter().take(f.dim_sim).copied());
            f.eval(&q)
        })
        .collect();
    TrajectoryRecord {
        times: traj.times.clone(),
        observables: Vec::new(),
        channels: Vec::new(),
        states: Some(mapped),
        abort: traj.abort.clone(),
    }
}

/// Torus immersed in three-dimensional Euclidean space through four
/// overcomplete coordinates: `phi = atan2(q0, q1)`, `theta = atan2(q2, q3)`,
/// and
///
/// ```text
/// x1 = (r1 + r2 cos theta) cos phi
/// x2 = (r1 + r2 cos theta) sin phi
/// x3 = r2 sin theta
/// ```
pub fn torus_map(r1: f64, r2: f64) -> PullbackMap {
    let eval = move |q: &DVector<f64>| {
        let rho1 = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let rho2 = (q[2] * q[2] + q[3] * q[3]).sqrt();
        let (sin_phi, cos_phi) = (q[0] / rho1, q[1] / rho1);
        let (sin_th, cos_th) = (q[2] / rho2, q[3] / rho2);
        let ring = r1 + r2 * cos_th;
        DVector::from_vec(vec![ring * cos_phi, ring * sin_phi, r2 * sin_th])
    };
    let jac = move |q: &DVector<f64>| {
        let rho1_sq = q[0] * q[0] + q[1] * q[1];
        let rho2_sq = q[2] * q[2] + q[3] * q[3];
        let rho1 = rho1_sq.sqrt();
        let rho2 = rho2_sq.sqrt();
        let (sin_phi, cos_phi) = (q[0] / rho1, q[1] / rho1);
        let (sin_th, cos_th) = (q[2] / rho2, q[3] / rho2);
        let ring = r1 + r2 * cos_th;
        // dphi = (q1 dq0 - q0 dq1)/rho1^2, dtheta likewise on the second pair
        let dphi = [q[1] / rho1_sq, -q[0] / rho1_sq];
        let dth = [q[3] / rho2_sq, -q[2] / rho2_sq];
        let x_phi = [-ring * sin_phi, ring * cos_phi, 0.0];
        let x_th = [-r2 * sin_th * cos_phi, -r2 * sin_th * sin_phi, r2 * cos_th];
        let mut j = DMatrix::zeros(3, 4);
        for row in 0..3 {
            j[(row, 0)] = x_phi[row] * dphi[0];
            j[(row, 1)] = x_phi[row] * dphi[1];
            j[(row, 2)] = x_th[row] * dth[0];
            j[(row, 3)] = x_th[row] * dth[1];
        }
        j
    };
    PullbackMap::new(4, 3, Box::new(eval), Box::new(jac))
}

/// Rigid body of point atoms: native coordinates are the stacked atom
/// positions, simulation coordinates are `[Q; q]` with `Q` the center of
/// mass and `q` an (unnormalized) rotation quaternion,
/// `x_i = Q + R(q) c_i`.
///
/// Reference positions `c_i` should be given about the center of mass.
pub fn rigid_body_map(ref_positions: Vec<Vector3<f64>>) -> PullbackMap {
    let n_atom = ref_positions.len();
    let refs = ref_positions.clone();
    let eval = move |z: &DVector<f64>| {
        let qq = [z[3], z[4], z[5], z[6]];
        let rot = quaternion::rotation_matrix(&qq);
        let mut x = DVector::zeros(3 * n_atom);
        for (i, c) in refs.iter().enumerate() {
            let xi = Vector3::new(z[0], z[1], z[2]) + rot * c;
            for a in 0..3 {
                x[3 * i + a] = xi[a];
            }
        }
        x
    };
    let refs_j = ref_positions;
    let jac = move |z: &DVector<f64>| {
        let qq = [z[3], z[4], z[5], z[6]];
        let mut j = DMatrix::zeros(3 * n_atom, 7);
        for (i, c) in refs_j.iter().enumerate() {
            for a in 0..3 {
                j[(3 * i + a, a)] = 1.0;
            }
            let d = quaternion::rotation_jacobian(&qq, c);
            for a in 0..3 {
                for b in 0..4 {
                    j[(3 * i + a, 3 + b)] = d[(a, b)];
                }
            }
        }
        j
    };
    PullbackMap::new(7, 3 * n_atom, Box::new(eval), Box::new(jac))
}
