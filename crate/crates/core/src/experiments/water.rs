//! Rigid-body rotation of a water molecule in quaternion coordinates, with
//! center-of-mass motion in a harmonic trap.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::geometry::flow::{MetricField, Potential};
use crate::geometry::{
    integrate_symplectic, quaternion, rigid_body_map, split_subbundles, verification_projector,
    GeodesicFlow, IntegratorOptions, Method, Monitor, NativeMetric, PhaseState, WaterMetricField,
};
use crate::geometry::pullback_metric;
use crate::record::TrajectoryRecord;

#[derive(Debug, Clone)]
pub struct WaterScenario {
    /// O-H bond length.
    pub bond_length: f64,
    /// H-O-H angle in degrees.
    pub bond_angle_deg: f64,
    pub mass_o: f64,
    pub mass_h: f64,
    /// Trap stiffness; the center-of-mass potential is `k |Q|^2`, so the
    /// oscillation frequency is `sqrt(k / m_total)`.
    pub trap_k: f64,
    /// Initial center of mass and velocity.
    pub com0: Vector3<f64>,
    pub com_velocity0: Vector3<f64>,
    /// Initial rotation quaternion (need not be normalized).
    pub quat0: [f64; 4],
    /// Initial body-frame angular momentum.
    pub l_body0: Vector3<f64>,
    pub dt: f64,
    pub n_steps: usize,
    pub lambda: Option<f64>,
    pub record_every: usize,
    pub rk4: bool,
    pub store_states: bool,
}

impl Default for WaterScenario {
    fn default() -> Self {
        Self {
            bond_length: 0.9572,
            bond_angle_deg: 104.52,
            mass_o: 16.0,
            mass_h: 1.0,
            trap_k: 1.0,
            com0: Vector3::new(0.4, 0.0, 0.0),
            com_velocity0: Vector3::zeros(),
            quat0: [1.0, 0.0, 0.0, 0.0],
            l_body0: Vector3::new(0.0, 0.0, 2.0),
            dt: 2e-4,
            n_steps: 100_000,
            lambda: None,
            record_every: 100,
            rk4: false,
            store_states: false,
        }
    }
}

/// Water geometry in body coordinates: O on the symmetry (z) axis, H atoms
/// in the xz-plane, the whole set centered on the center of mass.
pub fn water_geometry(s: &WaterScenario) -> (Vec<Vector3<f64>>, Vec<f64>) {
    let half = 0.5 * s.bond_angle_deg.to_radians();
    let raw = [
        Vector3::new(0.0, 0.0, 0.0),
        Vector3::new(s.bond_length * half.sin(), 0.0, -s.bond_length * half.cos()),
        Vector3::new(-s.bond_length * half.sin(), 0.0, -s.bond_length * half.cos()),
    ];
    let masses = vec![s.mass_o, s.mass_h, s.mass_h];
    let m_tot: f64 = masses.iter().sum();
    let com: Vector3<f64> = raw
        .iter()
        .zip(&masses)
        .map(|(r, &m)| r * m)
        .sum::<Vector3<f64>>()
        / m_tot;
    (raw.iter().map(|r| r - com).collect(), masses)
}

/// Body-frame inertia tensor about the center of mass (diagonal for this
/// geometry), returned as the principal moments `(I_x, I_y, I_z)`.
pub fn inertia_moments(refs: &[Vector3<f64>], masses: &[f64]) -> Vector3<f64> {
    let mut moments = Vector3::zeros();
    for (c, &m) in refs.iter().zip(masses) {
        moments[0] += m * (c[1] * c[1] + c[2] * c[2]);
        moments[1] += m * (c[0] * c[0] + c[2] * c[2]);
        moments[2] += m * (c[0] * c[0] + c[1] * c[1]);
    }
    moments
}

/// Index of the middle principal moment.
pub fn middle_axis(moments: &Vector3<f64>) -> usize {
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| moments[a].partial_cmp(&moments[b]).unwrap());
    idx[1]
}

struct Trap {
    k: f64,
}

impl Potential for Trap {
    fn value(&self, z: &DVector<f64>) -> f64 {
        self.k * (z[0] * z[0] + z[1] * z[1] + z[2] * z[2])
    }
    fn grad(&self, z: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(z.len());
        for a in 0..3 {
            g[a] = 2.0 * self.k * z[a];
        }
        g
    }
}

/// Spatial angular momentum about the trap center: bilinear momentum map
/// `L_a = (Q x p_Q)_a + p_q . (E_a q) / 2` with `E_a` the left-multiplication
/// generator on quaternions.
pub fn spatial_angular_momentum(z: &DVector<f64>, p: &DVector<f64>) -> Vector3<f64> {
    let q_com = Vector3::new(z[0], z[1], z[2]);
    let p_com = Vector3::new(p[0], p[1], p[2]);
    let mut l = q_com.cross(&p_com);
    let qq = [z[3], z[4], z[5], z[6]];
    let pq = [p[3], p[4], p[5], p[6]];
    for a in 0..3 {
        let mut e = Vector3::zeros();
        e[a] = 1.0;
        // (0, e_a) * q = (-e_a . v, w e_a + e_a x v)
        let w = qq[0];
        let v = Vector3::new(qq[1], qq[2], qq[3]);
        let gen0 = -e.dot(&v);
        let genv = e * w + e.cross(&v);
        l[a] += 0.5 * (pq[0] * gen0 + pq[1] * genv[0] + pq[2] * genv[1] + pq[3] * genv[2]);
    }
    l
}

#[derive(Debug, Clone)]
pub struct WaterSummary {
    /// Sign changes of the middle-axis body-frame angular velocity.
    pub mid_axis_sign_flips: usize,
    pub energy_drift: f64,
    /// Relative drift of |L|^2.
    pub l2_drift: f64,
    /// Drift of the quaternion norm from its initial value.
    pub qnorm_drift: f64,
    pub max_gauge: f64,
    /// Frequency of the center-of-mass oscillation fitted from zero
    /// crossings of the first component (when at least two crossings
    /// occur).
    pub com_frequency: Option<f64>,
    pub inertia: Vector3<f64>,
    pub middle_axis: usize,
}

pub fn run_water(s: &WaterScenario) -> Result<(TrajectoryRecord, WaterSummary)> {
    if s.dt <= 0.0 || s.mass_o <= 0.0 || s.mass_h <= 0.0 || s.bond_length <= 0.0 {
        return Err(Error::InvalidScenario(
            "water scenario needs positive dt, masses, bond length".into(),
        ));
    }
    let (refs, masses) = water_geometry(s);
    let moments = inertia_moments(&refs, &masses);
    let mid = middle_axis(&moments);

    let mut q0 = DVector::zeros(7);
    for a in 0..3 {
        q0[a] = s.com0[a];
    }
    let qnorm = s.quat0.iter().map(|x| x * x).sum::<f64>().sqrt();
    for a in 0..4 {
        q0[3 + a] = s.quat0[a] / qnorm;
    }

    let lambda = s.lambda.unwrap_or_else(|| {
        let map = rigid_body_map(refs.clone());
        let gn = NativeMetric::point_masses(&masses, 3);
        let p = pullback_metric(&map, &gn, &q0).expect("dimensions fixed");
        split_subbundles(&p, 1e-10).singular_values[0]
    });
    let field = WaterMetricField {
        ref_positions: refs.clone(),
        masses: masses.clone(),
        lambda,
    };

    // initial velocity: body angular velocity from L, lifted to qdot
    let omega_body = Vector3::new(
        s.l_body0[0] / moments[0],
        s.l_body0[1] / moments[1],
        s.l_body0[2] / moments[2],
    );
    // qdot = q * (0, omega_body) / 2 (quaternion product, |q| = 1)
    let (w, v) = (q0[3], Vector3::new(q0[4], q0[5], q0[6]));
    let qdot_scalar = -0.5 * v.dot(&omega_body);
    let qdot_vec = (omega_body * w + v.cross(&omega_body)) * 0.5;
    let mut vel = DVector::zeros(7);
    for a in 0..3 {
        vel[a] = s.com_velocity0[a];
    }
    vel[3] = qdot_scalar;
    for a in 0..3 {
        vel[4 + a] = qdot_vec[a];
    }
    let p0 = field.metric(&q0) * vel;

    let trap = Trap { k: s.trap_k };
    let flow = GeodesicFlow::with_potential(&field, &trap);
    let opts = IntegratorOptions {
        method: if s.rk4 { Method::Rk4 } else { Method::ImplicitMidpoint },
        record_every: s.record_every,
        store_states: s.store_states,
        ..Default::default()
    };

    let field_for_omega = WaterMetricField {
        ref_positions: refs.clone(),
        masses: masses.clone(),
        lambda,
    };
    let omega_monitor = move |z: &DVector<f64>, p: &DVector<f64>| -> Vector3<f64> {
        let v = field_for_omega.metric(z).lu().solve(p).expect("metric SPD");
        let qq = [z[3], z[4], z[5], z[6]];
        let qd = [v[3], v[4], v[5], v[6]];
        quaternion::body_angular_velocity(&qq, &qd)
    };

    let monitors = [
        Monitor::new("l2", |z: &DVector<f64>, p: &DVector<f64>, _t| {
            spatial_angular_momentum(z, p).norm_squared()
        }),
        Monitor::new("qnorm", |z: &DVector<f64>, _p: &DVector<f64>, _t| {
            (z[3] * z[3] + z[4] * z[4] + z[5] * z[5] + z[6] * z[6]).sqrt()
        }),
        Monitor::new("com_x", |z: &DVector<f64>, _p, _t| z[0]),
        Monitor::new("com_y", |z: &DVector<f64>, _p, _t| z[1]),
        Monitor::new("com_z", |z: &DVector<f64>, _p, _t| z[2]),
        {
            let om = omega_monitor.clone();
            Monitor::new("omega_mid", move |z: &DVector<f64>, p: &DVector<f64>, _t| {
                om(z, p)[mid]
            })
        },
    ];

    let mut flips = 0usize;
    let mut prev_sign = 0i8;
    let mut crossings: Vec<f64> = Vec::new();
    let mut prev_com: Option<(f64, f64)> = None;
    let om_stream = omega_monitor.clone();

    let record = integrate_symplectic(
        &flow,
        &PhaseState::new(q0.clone(), p0.clone()),
        s.dt,
        s.n_steps,
        &opts,
        &monitors,
        |_step, t, z, p| {
            let om = om_stream(z, p)[mid];
            let sign = if om > 0.0 {
                1
            } else if om < 0.0 {
                -1
            } else {
                0
            };
            if sign != 0 {
                if prev_sign != 0 && sign != prev_sign {
                    flips += 1;
                }
                prev_sign = sign;
            }
            if let Some((tp, xp)) = prev_com {
                let x = z[0];
                if xp * x < 0.0 {
                    crossings.push(tp + (t - tp) * (-xp) / (x - xp));
                }
            }
            prev_com = Some((t, z[0]));
        },
    );

    if let Some(abort) = &record.abort {
        return Err(Error::Aborted {
            step: abort.step,
            reason: abort.reason.clone(),
        });
    }

    let drift_of = |name: &str, relative: bool| -> f64 {
        let col = record.observable(name).expect("recorded");
        let x0 = col[0];
        col.iter().fold(0.0_f64, |acc, &x| {
            let d = if relative { ((x - x0) / x0).abs() } else { (x - x0).abs() };
            acc.max(d)
        })
    };
    let energy_drift = drift_of("energy", true);
    let l2_drift = drift_of("l2", true);
    let qnorm_drift = drift_of("qnorm", false);
    let max_gauge = record
        .observable("gauge_0")
        .map(|col| col.iter().fold(0.0_f64, |a, &g| a.max(g.abs())))
        .unwrap_or(0.0);

    let com_frequency = if crossings.len() >= 2 {
        let n = crossings.len();
        Some(std::f64::consts::PI * (n - 1) as f64 / (crossings[n - 1] - crossings[0]))
    } else {
        None
    };

    let summary = WaterSummary {
        mid_axis_sign_flips: flips,
        energy_drift,
        l2_drift,
        qnorm_drift,
        max_gauge,
        com_frequency,
        inertia: moments,
        middle_axis: mid,
    };
    Ok((record, summary))
}

/// The native phase-space verification projector of the rigid-body chart
/// at a configuration point: block-diagonal over the position and momentum
/// sectors of `T^*N`, projecting onto the pushforward of the range
/// subbundle. For water this is the 18x18 operator whose idempotence
/// defect exercises all 324 entries.
pub fn phase_space_projector(s: &WaterScenario, z: &DVector<f64>) -> Result<DMatrix<f64>> {
    let (refs, masses) = water_geometry(s);
    let map = rigid_body_map(refs.clone());
    let gn = NativeMetric::point_masses(&masses, 3);
    let p = pullback_metric(&map, &gn, z)?;
    let split = split_subbundles(&p, 1e-10);
    let lambda = split.singular_values[0];
    let field = WaterMetricField {
        ref_positions: refs,
        masses,
        lambda,
    };
    let g_m = field.metric(z);
    let j = map.jacobian(z);
    let g_m_lu = g_m.clone().lu();
    // pushforward of the range duals
    let basis_x: Vec<DVector<f64>> = split
        .range_covectors
        .iter()
        .map(|eps| &j * g_m_lu.solve(eps).expect("g_M invertible"))
        .collect();
    let basis_p: Vec<DVector<f64>> = basis_x.iter().map(|w| &gn.matrix * w).collect();

    let gn_inv = gn
        .matrix
        .clone()
        .try_inverse()
        .ok_or(Error::Singular("native metric"))?;
    let pi_x = verification_projector(&gn.matrix, &basis_x)?;
    let pi_p = verification_projector(&gn_inv, &basis_p)?;

    let dim = gn.dim();
    let mut pi = DMatrix::zeros(2 * dim, 2 * dim);
    pi.view_mut((0, 0), (dim, dim)).copy_from(&pi_x);
    pi.view_mut((dim, dim), (dim, dim)).copy_from(&pi_p);
    Ok(pi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;

    #[test]
    fn geometry_is_com_centered_and_rigid() {
        let s = WaterScenario::default();
        let (refs, masses) = water_geometry(&s);
        let com: Vector3<f64> = refs
            .iter()
            .zip(&masses)
            .map(|(r, &m)| r * m)
            .sum::<Vector3<f64>>();
        assert!(com.norm() < 1e-14);
        let d_oh = (refs[0] - refs[1]).norm();
        assert!((d_oh - s.bond_length).abs() < 1e-12);
        let cos = (refs[1] - refs[0]).dot(&(refs[2] - refs[0]))
            / ((refs[1] - refs[0]).norm() * (refs[2] - refs[0]).norm());
        assert!((cos.acos().to_degrees() - s.bond_angle_deg).abs() < 1e-10);
        // middle moment is the symmetry (z) axis for water
        let moments = inertia_moments(&refs, &masses);
        assert_eq!(middle_axis(&moments), 2);
        // planar molecule: out-of-plane moment is the sum of the others
        assert!((moments[1] - moments[0] - moments[2]).abs() < 1e-12);
    }

    #[test]
    fn principal_axis_rotation_is_steady() {
        // L on the largest principal axis (y): omega constant
        let s = WaterScenario {
            l_body0: Vector3::new(0.0, 2.0, 0.0),
            trap_k: 0.5,
            com0: Vector3::new(0.2, 0.0, 0.0),
            dt: 5e-4,
            n_steps: 20_000,
            record_every: 40,
            ..Default::default()
        };
        let (rec, summary) = run_water(&s).unwrap();
        assert_eq!(summary.mid_axis_sign_flips, 0);
        assert!(summary.energy_drift < 1e-8, "energy {}", summary.energy_drift);
        assert!(summary.l2_drift < 1e-10, "l2 {}", summary.l2_drift);
        // omega_mid stays ~0 for principal-axis rotation about y
        let om = rec.observable("omega_mid").unwrap();
        assert!(om.iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn near_middle_axis_rotation_tumbles() {
        let s = WaterScenario {
            // 1 degree off the middle (z) axis
            l_body0: Vector3::new(2.0 * 1.0_f64.to_radians().sin(), 0.0, 2.0),
            dt: 2e-4,
            n_steps: 100_000,
            record_every: 200,
            ..Default::default()
        };
        let (_, summary) = run_water(&s).unwrap();
        assert!(
            summary.mid_axis_sign_flips >= 2,
            "flips {}",
            summary.mid_axis_sign_flips
        );
        assert!(summary.energy_drift < 1e-8, "H {}", summary.energy_drift);
        assert!(summary.l2_drift < 1e-8, "L2 {}", summary.l2_drift);
        assert!(summary.qnorm_drift < 1e-8, "|q| {}", summary.qnorm_drift);
        assert!(summary.max_gauge < 1e-8, "gauge {}", summary.max_gauge);
    }

    #[test]
    fn com_frequency_matches_trap() {
        let s = WaterScenario {
            trap_k: 8.0,
            com0: Vector3::new(0.5, 0.0, 0.0),
            l_body0: Vector3::new(0.0, 0.1, 0.0),
            dt: 5e-4,
            n_steps: 80_000,
            record_every: 200,
            ..Default::default()
        };
        let (_, summary) = run_water(&s).unwrap();
        let m_tot = s.mass_o + 2.0 * s.mass_h;
        let expect = (s.trap_k / m_tot).sqrt();
        let got = summary.com_frequency.expect("enough crossings");
        assert!(
            ((got - expect) / expect).abs() < 1e-6,
            "com frequency {got} vs {expect}"
        );
    }

    #[test]
    fn phase_space_projector_is_idempotent_18x18() {
        let s = WaterScenario::default();
        let z = DVector::from_vec(vec![0.1, -0.2, 0.3, 0.9, -0.1, 0.25, 0.2]);
        let pi = phase_space_projector(&s, &z).unwrap();
        assert_eq!(pi.shape(), (18, 18));
        let defect = max_abs(&(&pi * &pi - &pi));
        assert!(defect < 1e-10, "idempotence defect {defect}");
        assert!((pi.trace() - 12.0).abs() < 1e-9);
    }
}
