//! Quaternion parametrization of rotations and its derivatives.
//!
//! The rotation is scale-invariant in the quaternion, `R(s q) = R(q)`, so
//! trajectories never need to renormalize `q`; the gauge (radial) direction
//! is handled by the F-natural metric instead.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Proper rotation matrix from an unnormalized quaternion
/// `q = (w, v1, v2, v3)`:
///
/// ```text
/// R(q) = [ (w^2 - |v|^2) I + 2 v v^T + 2 w [v]_x ] / |q|^2
/// ```
pub fn rotation_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    let n2 = q.iter().map(|x| x * x).sum::<f64>();
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    ) / n2
}

/// Checked public entry point: rejects the zero quaternion.
pub fn quaternion_rotation(q: &[f64; 4]) -> Result<Matrix3<f64>> {
    let n2 = q.iter().map(|x| x * x).sum::<f64>();
    if n2 == 0.0 {
        return Err(Error::Singular("zero quaternion has no rotation"));
    }
    Ok(rotation_matrix(q))
}

/// Symmetric bilinear form underlying the quadratic numerator of `R`:
/// `B(q, q) c = |q|^2 R(q) c`.
pub fn bilinear(p: &[f64; 4], q: &[f64; 4], c: &Vector3<f64>) -> Vector3<f64> {
    let pv = Vector3::new(p[1], p[2], p[3]);
    let qv = Vector3::new(q[1], q[2], q[3]);
    c * (p[0] * q[0] - pv.dot(&qv))
        + qv * pv.dot(c)
        + pv * qv.dot(c)
        + pv.cross(c) * q[0]
        + qv.cross(c) * p[0]
}

fn basis(j: usize) -> [f64; 4] {
    let mut e = [0.0; 4];
    e[j] = 1.0;
    e
}

/// Jacobian `d(R(q) c)/dq`, a 3x4 matrix.
pub fn rotation_jacobian(q: &[f64; 4], c: &Vector3<f64>) -> DMatrix<f64> {
    let n2 = q.iter().map(|x| x * x).sum::<f64>();
    let rc = rotation_matrix(q) * c;
    let mut d = DMatrix::zeros(3, 4);
    for j in 0..4 {
        let col = (bilinear(q, &basis(j), c) - rc * q[j]) * (2.0 / n2);
        for a in 0..3 {
            d[(a, j)] = col[a];
        }
    }
    d
}

/// Second derivatives `d^2 (R(q) c) / dq_j dq_k`, returned as a 4x4 grid of
/// 3-vectors flattened into `hess[j][k]`.
pub fn rotation_hessian(q: &[f64; 4], c: &Vector3<f64>) -> [[Vector3<f64>; 4]; 4] {
    let n2 = q.iter().map(|x| x * x).sum::<f64>();
    let rc = rotation_matrix(q) * c;
    let d = rotation_jacobian(q, c);
    let dcol = |j: usize| Vector3::new(d[(0, j)], d[(1, j)], d[(2, j)]);
    let mut out = [[Vector3::zeros(); 4]; 4];
    for j in 0..4 {
        for k in 0..4 {
            let mut v = bilinear(&basis(j), &basis(k), c);
            if j == k {
                v -= rc;
            }
            v -= dcol(k) * q[j] + dcol(j) * q[k];
            out[j][k] = v * (2.0 / n2);
        }
    }
    out
}

/// Body-frame angular velocity from a quaternion and its time derivative,
/// `omega_body = 2 (conj(q) * qdot)_vec / |q|^2`.
pub fn body_angular_velocity(q: &[f64; 4], qdot: &[f64; 4]) -> Vector3<f64> {
    let n2 = q.iter().map(|x| x * x).sum::<f64>();
    let (w, v) = (q[0], Vector3::new(q[1], q[2], q[3]));
    let (u0, u) = (qdot[0], Vector3::new(qdot[1], qdot[2], qdot[3]));
    // (conj(q) * u)_vec = w u_vec - u0 v - v x u_vec
    (u * w - v * u0 - v.cross(&u)) * (2.0 / n2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Matrix2;
    use num_complex::Complex64 as C64;

    /// Independent oracle: evaluate the rotation through Pauli-matrix
    /// conjugation, `R_ab = tr(sigma_a u sigma_b u^H) / (2 |q|^2)` with
    /// `u = q0 I - i (q1 sx + q2 sy + q3 sz)`.
    fn pauli_rotation(q: &[f64; 4]) -> Matrix3<f64> {
        let i = C64::new(0.0, 1.0);
        let sx = Matrix2::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        let sy = Matrix2::new(C64::new(0.0, 0.0), -i, i, C64::new(0.0, 0.0));
        let sz = Matrix2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(-1.0, 0.0));
        let id = Matrix2::identity();
        let sigma = [sx, sy, sz];
        let u = id * C64::new(q[0], 0.0)
            - (sx * C64::new(q[1], 0.0) + sy * C64::new(q[2], 0.0) + sz * C64::new(q[3], 0.0)) * i;
        let n2: f64 = q.iter().map(|x| x * x).sum();
        let mut r = Matrix3::zeros();
        for a in 0..3 {
            for b in 0..3 {
                let m = sigma[a] * u * sigma[b] * u.adjoint();
                r[(a, b)] = (m.trace() / C64::new(2.0 * n2, 0.0)).re;
            }
        }
        r
    }

    #[test]
    fn unit_quaternion_gives_identity() {
        let r = quaternion_rotation(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((r - Matrix3::identity()).amax() < 1e-15);
    }

    #[test]
    fn axis_angle_about_z() {
        let th: f64 = 0.73;
        let q = [(th / 2.0).cos(), 0.0, 0.0, (th / 2.0).sin()];
        let r = quaternion_rotation(&q).unwrap();
        let expect = Matrix3::new(
            th.cos(), -th.sin(), 0.0,
            th.sin(), th.cos(), 0.0,
            0.0, 0.0, 1.0,
        );
        assert!((r - expect).amax() < 1e-14);
    }

    #[test]
    fn orthogonal_unit_determinant_and_scale_invariance() {
        let q = [0.4, -1.2, 0.5, 2.0];
        let r = quaternion_rotation(&q).unwrap();
        assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-14);
        assert!((r.determinant() - 1.0).abs() < 1e-14);
        let r2 = quaternion_rotation(&[0.8, -2.4, 1.0, 4.0]).unwrap();
        assert!((r - r2).amax() < 1e-14);
        assert!(quaternion_rotation(&[0.0; 4]).is_err());
    }

    #[test]
    fn matches_pauli_conjugation_oracle() {
        let qs = [
            [0.9, 0.1, -0.3, 0.7],
            [1.0, 0.0, 0.0, 0.0],
            [-0.2, 1.4, 0.8, -0.5],
        ];
        for q in qs {
            let a = quaternion_rotation(&q).unwrap();
            let b = pauli_rotation(&q);
            assert!((a - b).amax() < 1e-14, "defect {}", (a - b).amax());
        }
    }

    #[test]
    fn jacobian_and_hessian_match_finite_differences() {
        let q = [0.8, -0.4, 0.33, 0.15];
        let c = Vector3::new(0.3, -0.7, 0.5);
        let h = 1e-6;
        let jac = rotation_jacobian(&q, &c);
        for j in 0..4 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += h;
            qm[j] -= h;
            let fd = (rotation_matrix(&qp) * c - rotation_matrix(&qm) * c) / (2.0 * h);
            for a in 0..3 {
                assert!((jac[(a, j)] - fd[a]).abs() < 1e-8);
            }
        }
        let hess = rotation_hessian(&q, &c);
        for j in 0..4 {
            let mut qp = q;
            let mut qm = q;
            qp[j] += h;
            qm[j] -= h;
            let dp = rotation_jacobian(&qp, &c);
            let dm = rotation_jacobian(&qm, &c);
            for k in 0..4 {
                for a in 0..3 {
                    let fd = (dp[(a, k)] - dm[(a, k)]) / (2.0 * h);
                    assert!(
                        (hess[j][k][a] - fd).abs() < 1e-7,
                        "hessian mismatch at ({j},{k},{a})"
                    );
                }
            }
        }
    }

    #[test]
    fn body_angular_velocity_recovers_axis_rate() {
        // q(t) = (cos(w t/2), 0, 0, sin(w t/2)) spins about z at rate w
        let w: f64 = 1.7;
        let t: f64 = 0.4;
        let q = [(w * t / 2.0).cos(), 0.0, 0.0, (w * t / 2.0).sin()];
        let qdot = [
            -(w / 2.0) * (w * t / 2.0).sin(),
            0.0,
            0.0,
            (w / 2.0) * (w * t / 2.0).cos(),
        ];
        let omega = body_angular_velocity(&q, &qdot);
        assert!((omega - Vector3::new(0.0, 0.0, w)).norm() < 1e-14);
    }
}
