//! Metric fields over the simulation manifold.
//!
//! [`NaturalMetricField`] builds `g_M(q) = P(q) + lambda K(q)` pointwise
//! from the SVD construction; it works for any map but differentiates by
//! finite differences. The torus and rigid-body fields implement the same
//! metric in closed form, including `dg/dq`, which the long conservation
//! runs need. Tests pin the analytic fields to the generic one.

use nalgebra::{DMatrix, DVector, Matrix2, Vector3};

use super::flow::MetricField;
use super::map::{pullback_metric, NativeMetric, PullbackMap};
use super::quaternion;
use super::subbundle::{natural_metric, split_subbundles};

/// Generic F-natural metric field: SVD split at every evaluation point.
pub struct NaturalMetricField {
    pub map: PullbackMap,
    pub g_native: NativeMetric,
    pub lambda: f64,
    pub svd_tol: f64,
}

impl NaturalMetricField {
    pub fn new(map: PullbackMap, g_native: NativeMetric, lambda: f64) -> Self {
        Self {
            map,
            g_native,
            lambda,
            svd_tol: 1e-10,
        }
    }

    /// Default gauge mass: largest singular value of the pullback at `q0`,
    /// frozen for the whole run.
    pub fn default_lambda(map: &PullbackMap, g_native: &NativeMetric, q0: &DVector<f64>) -> f64 {
        let p = pullback_metric(map, g_native, q0).expect("dimension mismatch");
        let split = split_subbundles(&p, 1e-10);
        split.singular_values.first().copied().unwrap_or(1.0)
    }
}

impl MetricField for NaturalMetricField {
    fn dim(&self) -> usize {
        self.map.dim_sim
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let p = pullback_metric(&self.map, &self.g_native, q).expect("dimension mismatch");
        let split = split_subbundles(&p, self.svd_tol);
        natural_metric(&p, &split, self.lambda)
            .expect("gauge mass must be positive")
            .matrix
    }

    fn kernel_basis(&self, q: &DVector<f64>) -> Vec<DVector<f64>> {
        let p = pullback_metric(&self.map, &self.g_native, q).expect("dimension mismatch");
        split_subbundles(&p, self.svd_tol).kernel_vectors
    }
}

// 2x2 block helpers for the paired coordinates of the torus chart.

fn outer2(u: [f64; 2]) -> Matrix2<f64> {
    Matrix2::new(u[0] * u[0], u[0] * u[1], u[0] * u[1], u[1] * u[1])
}

/// `d phi` covector square `u u^T` with `u = (b, -a)/rho^2`, and its
/// derivatives with respect to `a` and `b`.
fn dphi_sq(a: f64, b: f64) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let rho2 = a * a + b * b;
    let u = outer2([b, -a]) / (rho2 * rho2);
    let du_da = Matrix2::new(0.0, -b, -b, 2.0 * a) / (rho2 * rho2)
        - outer2([b, -a]) * (4.0 * a / (rho2 * rho2 * rho2));
    let du_db = Matrix2::new(2.0 * b, -a, -a, 0.0) / (rho2 * rho2)
        - outer2([b, -a]) * (4.0 * b / (rho2 * rho2 * rho2));
    (u, du_da, du_db)
}

/// Radial projector `r r^T / rho^2` and its derivatives.
fn radial_proj(a: f64, b: f64) -> (Matrix2<f64>, Matrix2<f64>, Matrix2<f64>) {
    let rho2 = a * a + b * b;
    let v = outer2([a, b]) / rho2;
    let dv_da =
        Matrix2::new(2.0 * a, b, b, 0.0) / rho2 - outer2([a, b]) * (2.0 * a / (rho2 * rho2));
    let dv_db =
        Matrix2::new(0.0, a, a, 2.0 * b) / rho2 - outer2([a, b]) * (2.0 * b / (rho2 * rho2));
    (v, dv_da, dv_db)
}

/// Analytic F-natural metric for the torus chart.
#[derive(Clone)]
pub struct TorusMetricField {
    pub r1: f64,
    pub r2: f64,
    pub mass: f64,
    pub lambda: f64,
}

impl TorusMetricField {
    fn ring(&self, q: &DVector<f64>) -> f64 {
        let rho2 = (q[2] * q[2] + q[3] * q[3]).sqrt();
        self.r1 + self.r2 * q[3] / rho2
    }
}

impl MetricField for TorusMetricField {
    fn dim(&self) -> usize {
        4
    }

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64> {
        let two_m = 2.0 * self.mass;
        let ring = self.ring(q);
        let (uu, _, _) = dphi_sq(q[0], q[1]);
        let (ww, _, _) = dphi_sq(q[2], q[3]);
        let (k1, _, _) = radial_proj(q[0], q[1]);
        let (k2, _, _) = radial_proj(q[2], q[3]);
        let b1 = uu * (two_m * ring * ring) + k1 * self.lambda;
        let b2 = ww * (two_m * self.r2 * self.r2) + k2 * self.lambda;
        let mut g = DMatrix::zeros(4, 4);
        g.view_mut((0, 0), (2, 2)).copy_from(&b1);
        g.view_mut((2, 2), (2, 2)).copy_from(&b2);
        g
    }

    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let two_m = 2.0 * self.mass;
        let ring = self.ring(q);
        let (uu, duu_da, duu_db) = dphi_sq(q[0], q[1]);
        let (_, dww_dc, dww_dd) = dphi_sq(q[2], q[3]);
        let (_, dk1_da, dk1_db) = radial_proj(q[0], q[1]);
        let (_, dk2_dc, dk2_dd) = radial_proj(q[2], q[3]);
        let rho2 = (q[2] * q[2] + q[3] * q[3]).sqrt();
        // d cos(theta) / d(q2, q3) with cos(theta) = q3 / rho2
        let dcos_dc = -q[2] * q[3] / (rho2 * rho2 * rho2);
        let dcos_dd = q[2] * q[2] / (rho2 * rho2 * rho2);

        let mut grads = Vec::with_capacity(4);
        for i in 0..4 {
            let mut dg = DMatrix::zeros(4, 4);
            match i {
                0 => {
                    let b = duu_da * (two_m * ring * ring) + dk1_da * self.lambda;
                    dg.view_mut((0, 0), (2, 2)).copy_from(&b);
                }
                1 => {
                    let b = duu_db * (two_m * ring * ring) + dk1_db * self.lambda;
                    dg.view_mut((0, 0), (2, 2)).copy_from(&b);
                }
                2 => {
                    let b1 = uu * (two_m * 2.0 * ring * self.r2 * dcos_dc);
                    let b2 = dww_dc * (two_m * self.r2 * self.r2) + dk2_dc * self.lambda;
                    dg.view_mut((0, 0), (2, 2)).copy_from(&b1);
                    dg.view_mut((2, 2), (2, 2)).copy_from(&b2);
                }
                3 => {
                    let b1 = uu * (two_m * 2.0 * ring * self.r2 * dcos_dd);
                    let b2 = dww_dd * (two_m * self.r2 * self.r2) + dk2_dd * self.lambda;
                    dg.view_mut((0, 0), (2, 2)).copy_from(&b1);
                    dg.view_mut((2, 2), (2, 2)).copy_from(&b2);
                }
                _ => unreachable!(),
            }
            grads.push(dg);
        }
        grads
    }

    fn kernel_basis(&self, q: &DVector<f64>) -> Vec<DVector<f64>> {
        let rho1 = (q[0] * q[0] + q[1] * q[1]).sqrt();
        let rho2 = (q[2] * q[2] + q[3] * q[3]).sqrt();
        vec![
            DVector::from_vec(vec![q[0] / rho1, q[1] / rho1, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 0.0, q[2] / rho2, q[3] / rho2]),
        ]
    }
}

/// Analytic F-natural metric for the rigid body in `[Q; q]` coordinates:
/// a constant `2 M I_3` center-of-mass block and the quaternion block
/// `sum_i 2 m_i D_i^T D_i + lambda q q^T / |q|^2`.
#[derive(Clone)]
pub struct WaterMetricField {
    pub ref_positions: Vec<Vector3<f64>>,
    pub masses: Vec<f64>,
    pub lambda: f64,
}

impl WaterMetricField {
    fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    fn quat(q: &DVector<f64>) -> [f64; 4] {
        [q[3], q[4], q[5], q[6]]
    }
}

impl MetricField for WaterMetricField {
    fn dim(&self) -> usize {
        7
    }

    fn metric(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let qq = Self::quat(z);
        let mut g = DMatrix::zeros(7, 7);
        let two_m_tot = 2.0 * self.total_mass();
        for a in 0..3 {
            g[(a, a)] = two_m_tot;
        }
        let mut block = nalgebra::Matrix4::<f64>::zeros();
        for (c, &m) in self.ref_positions.iter().zip(&self.masses) {
            let d = quaternion::rotation_jacobian(&qq, c);
            block += nalgebra::Matrix4::from_fn(|j, k| {
                2.0 * m * (0..3).map(|a| d[(a, j)] * d[(a, k)]).sum::<f64>()
            });
        }
        let n2: f64 = qq.iter().map(|x| x * x).sum();
        for j in 0..4 {
            for k in 0..4 {
                g[(3 + j, 3 + k)] = block[(j, k)] + self.lambda * qq[j] * qq[k] / n2;
            }
        }
        g
    }

    fn metric_grad(&self, z: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let qq = Self::quat(z);
        let n2: f64 = qq.iter().map(|x| x * x).sum();
        let mut grads = vec![DMatrix::zeros(7, 7); 7];
        // only the quaternion block varies, and only with q
        let jac_hess: Vec<(DMatrix<f64>, [[Vector3<f64>; 4]; 4])> = self
            .ref_positions
            .iter()
            .map(|c| {
                (
                    quaternion::rotation_jacobian(&qq, c),
                    quaternion::rotation_hessian(&qq, c),
                )
            })
            .collect();
        for l in 0..4 {
            let dg = &mut grads[3 + l];
            for ((d, hess), &m) in jac_hess.iter().zip(&self.masses) {
                for j in 0..4 {
                    for k in 0..4 {
                        // d/dq_l sum_a d[a,j] d[a,k]
                        let mut acc = 0.0;
                        for a in 0..3 {
                            acc += hess[j][l][a] * d[(a, k)] + d[(a, j)] * hess[k][l][a];
                        }
                        dg[(3 + j, 3 + k)] += 2.0 * m * acc;
                    }
                }
            }
            // gauge projector derivative
            for j in 0..4 {
                for k in 0..4 {
                    let mut v = 0.0;
                    if j == l {
                        v += qq[k];
                    }
                    if k == l {
                        v += qq[j];
                    }
                    v /= n2;
                    v -= 2.0 * qq[l] * qq[j] * qq[k] / (n2 * n2);
                    dg[(3 + j, 3 + k)] += self.lambda * v;
                }
            }
        }
        grads
    }

    fn kernel_basis(&self, z: &DVector<f64>) -> Vec<DVector<f64>> {
        let qq = Self::quat(z);
        let n = qq.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut v = DVector::zeros(7);
        for j in 0..4 {
            v[3 + j] = qq[j] / n;
        }
        vec![v]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::map::{rigid_body_map, torus_map};
    use crate::linalg::max_abs;

    fn fd_grads(field: &dyn MetricField, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = field.dim();
        (0..n)
            .map(|i| {
                let h = 1e-6 * q[i].abs().max(1.0);
                let mut qp = q.clone();
                let mut qm = q.clone();
                qp[i] += h;
                qm[i] -= h;
                (field.metric(&qp) - field.metric(&qm)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn torus_field_matches_generic_construction() {
        let lambda = 1.7;
        let analytic = TorusMetricField {
            r1: 2.0,
            r2: 1.0,
            mass: 1.0,
            lambda,
        };
        let generic = NaturalMetricField::new(
            torus_map(2.0, 1.0),
            NativeMetric::point_masses(&[1.0], 3),
            lambda,
        );
        for q in [
            DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]),
            DVector::from_vec(vec![0.3, -0.8, 0.9, 0.5]),
            DVector::from_vec(vec![-0.6, 1.2, -0.4, -0.9]),
        ] {
            let a = analytic.metric(&q);
            let b = generic.metric(&q);
            assert!(max_abs(&(&a - &b)) < 1e-10, "defect {}", max_abs(&(&a - &b)));
        }
    }

    #[test]
    fn torus_field_gradients_match_finite_differences() {
        let field = TorusMetricField {
            r1: 2.0,
            r2: 1.0,
            mass: 1.0,
            lambda: 1.3,
        };
        let q = DVector::from_vec(vec![0.8, -0.5, 0.7, 1.1]);
        let a = field.metric_grad(&q);
        let b = fd_grads(&field, &q);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(max_abs(&(x - y)) < 1e-7);
        }
    }

    fn water_refs() -> (Vec<Vector3<f64>>, Vec<f64>) {
        // arbitrary rigid triangle about its center of mass
        let masses = vec![16.0, 1.0, 1.0];
        let raw = [
            Vector3::new(0.0, 0.0, 0.06),
            Vector3::new(0.76, 0.0, -0.52),
            Vector3::new(-0.76, 0.0, -0.52),
        ];
        let mtot: f64 = masses.iter().sum();
        let com: Vector3<f64> =
            raw.iter().zip(&masses).map(|(r, &m)| r * m).sum::<Vector3<f64>>() / mtot;
        (raw.iter().map(|r| r - com).collect(), masses)
    }

    #[test]
    fn water_field_matches_generic_construction() {
        let (refs, masses) = water_refs();
        let lambda = 2.5;
        let analytic = WaterMetricField {
            ref_positions: refs.clone(),
            masses: masses.clone(),
            lambda,
        };
        let generic = NaturalMetricField::new(
            rigid_body_map(refs),
            NativeMetric::point_masses(&masses, 3),
            lambda,
        );
        let z = DVector::from_vec(vec![0.4, -0.2, 0.9, 0.8, -0.1, 0.33, 0.15]);
        let a = analytic.metric(&z);
        let b = generic.metric(&z);
        assert!(max_abs(&(&a - &b)) < 1e-9, "defect {}", max_abs(&(&a - &b)));
    }

    #[test]
    fn water_field_gradients_match_finite_differences() {
        let (refs, masses) = water_refs();
        let field = WaterMetricField {
            ref_positions: refs,
            masses,
            lambda: 2.5,
        };
        let z = DVector::from_vec(vec![0.0, 0.1, -0.3, 0.9, -0.2, 0.4, 0.1]);
        let a = field.metric_grad(&z);
        let b = fd_grads(&field, &z);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!(max_abs(&(x - y)) < 1e-6, "defect {}", max_abs(&(x - y)));
        }
    }

    #[test]
    fn water_pullback_rank_is_six_and_kernel_is_radial() {
        let (refs, masses) = water_refs();
        let map = rigid_body_map(refs);
        let gn = NativeMetric::point_masses(&masses, 3);
        let z = DVector::from_vec(vec![0.4, -0.2, 0.9, 0.8, -0.1, 0.33, 0.15]);
        let p = pullback_metric(&map, &gn, &z).unwrap();
        let split = split_subbundles(&p, 1e-10);
        assert_eq!(split.rank, 6);
        assert_eq!(split.kernel_vectors.len(), 1);
        // kernel is the quaternion radial direction
        let k = &split.kernel_vectors[0];
        let qq = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.8, -0.1, 0.33, 0.15]);
        let cos = k.dot(&qq).abs() / (k.norm() * qq.norm());
        assert!((cos - 1.0).abs() < 1e-10);
    }
}
