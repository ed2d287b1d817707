//! Hamiltonian flow and symplectic trajectory integration.
//!
//! The integrator is implicit midpoint with fixed-point inner iteration; it
//! is symplectic for the non-separable kinetic Hamiltonians
//! `H = p^T g^{-1}(q) p / 2` produced by the F-natural construction, and it
//! conserves bilinear invariants (angular momenta, Clairaut constants)
//! exactly up to the inner-iteration tolerance. An explicit RK4 fallback is
//! available for diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::record::{Abort, TrajectoryRecord};

/// A point of phase space together with simulation time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
    pub t: f64,
}

impl PhaseState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        Self { q, p, t: 0.0 }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
}

/// Canonical Hamiltonian vector field `(dq/dt, dp/dt) = (dH/dp, -dH/dq)`
/// evaluated by central finite differences of a scalar field on phase space.
pub fn hamiltonian_flow(
    h: &dyn Fn(&DVector<f64>, &DVector<f64>) -> f64,
    state: &PhaseState,
) -> (DVector<f64>, DVector<f64>) {
    let n = state.dim();
    let step = |x: f64| 1e-6 * x.abs().max(1.0);
    let mut qdot = DVector::zeros(n);
    let mut pdot = DVector::zeros(n);
    for i in 0..n {
        let hp = step(state.p[i]);
        let mut pp = state.p.clone();
        let mut pm = state.p.clone();
        pp[i] += hp;
        pm[i] -= hp;
        qdot[i] = (h(&state.q, &pp) - h(&state.q, &pm)) / (2.0 * hp);

        let hq = step(state.q[i]);
        let mut qp = state.q.clone();
        let mut qm = state.q.clone();
        qp[i] += hq;
        qm[i] -= hq;
        pdot[i] = -(h(&qp, &state.p) - h(&qm, &state.p)) / (2.0 * hq);
    }
    (qdot, pdot)
}

/// A metric field `g(q)` with its coordinate derivatives and gauge (kernel)
/// directions. The default derivative is a central finite difference; the
/// reference scenarios override it analytically.
pub trait MetricField: Sync {
    fn dim(&self) -> usize;

    fn metric(&self, q: &DVector<f64>) -> DMatrix<f64>;

    /// `dg/dq_i` for every coordinate.
    fn metric_grad(&self, q: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let h = 1e-6 * q[i].abs().max(1.0);
            let mut qp = q.clone();
            let mut qm = q.clone();
            qp[i] += h;
            qm[i] -= h;
            out.push((self.metric(&qp) - self.metric(&qm)) / (2.0 * h));
        }
        out
    }

    /// Basis of the kernel (gauge) subbundle at `q`; empty when the
    /// pullback is full rank.
    fn kernel_basis(&self, q: &DVector<f64>) -> Vec<DVector<f64>> {
        let _ = q;
        Vec::new()
    }
}

/// Configuration-space potential added to the kinetic term.
pub trait Potential: Sync {
    fn value(&self, q: &DVector<f64>) -> f64;
    fn grad(&self, q: &DVector<f64>) -> DVector<f64>;
}

/// Kinetic energy of the F-natural metric, `H = p^T g(q)^{-1} p / 2`.
pub fn geodesic_hamiltonian(g_at_q: &DMatrix<f64>, p: &DVector<f64>) -> Result<f64> {
    let chol = g_at_q
        .clone()
        .cholesky()
        .ok_or(Error::Singular("metric not positive-definite at point"))?;
    Ok(0.5 * p.dot(&chol.solve(p)))
}

/// The phase-space vector field of a trajectory problem.
pub trait PhaseFlow: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>);
    fn energy(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64;
    fn gauge_momenta(&self, q: &DVector<f64>, p: &DVector<f64>) -> Vec<f64> {
        let _ = (q, p);
        Vec::new()
    }
}

/// Geodesic flow of a metric field, optionally with a potential:
/// `qdot = g^{-1} p`, `pdot_i = v^T (dg/dq_i) v / 2 - dV/dq_i`.
pub struct GeodesicFlow<'a> {
    pub field: &'a dyn MetricField,
    pub potential: Option<&'a dyn Potential>,
}

impl<'a> GeodesicFlow<'a> {
    pub fn new(field: &'a dyn MetricField) -> Self {
        Self {
            field,
            potential: None,
        }
    }

    pub fn with_potential(field: &'a dyn MetricField, potential: &'a dyn Potential) -> Self {
        Self {
            field,
            potential: Some(potential),
        }
    }

    pub fn velocity(&self, q: &DVector<f64>, p: &DVector<f64>) -> DVector<f64> {
        let g = self.field.metric(q);
        g.lu().solve(p).expect("metric must be invertible")
    }
}

impl<'a> PhaseFlow for GeodesicFlow<'a> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval(&self, q: &DVector<f64>, p: &DVector<f64>, _t: f64) -> (DVector<f64>, DVector<f64>) {
        let v = self.velocity(q, p);
        let grads = self.field.metric_grad(q);
        let mut pdot = DVector::zeros(q.len());
        for (i, dg) in grads.iter().enumerate() {
            pdot[i] = 0.5 * v.dot(&(dg * &v));
        }
        if let Some(pot) = self.potential {
            pdot -= pot.grad(q);
        }
        (v, pdot)
    }

    fn energy(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        let kin = 0.5 * p.dot(&self.velocity(q, p));
        kin + self.potential.map_or(0.0, |pot| pot.value(q))
    }

    fn gauge_momenta(&self, q: &DVector<f64>, p: &DVector<f64>) -> Vec<f64> {
        self.field
            .kernel_basis(q)
            .iter()
            .map(|v| p.dot(v))
            .collect()
    }
}

/// Generic flow from a Hamiltonian closure, differentiated by finite
/// differences. Slow; used for small examples and as an oracle.
pub struct FdHamiltonianFlow<F: Fn(&DVector<f64>, &DVector<f64>) -> f64 + Sync> {
    pub dim: usize,
    pub h: F,
}

impl<F: Fn(&DVector<f64>, &DVector<f64>) -> f64 + Sync> PhaseFlow for FdHamiltonianFlow<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> (DVector<f64>, DVector<f64>) {
        let state = PhaseState {
            q: q.clone(),
            p: p.clone(),
            t,
        };
        hamiltonian_flow(&self.h, &state)
    }

    fn energy(&self, q: &DVector<f64>, p: &DVector<f64>) -> f64 {
        (self.h)(q, p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Symplectic implicit midpoint with fixed-point inner iteration.
    ImplicitMidpoint,
    /// Classical Runge–Kutta, for diagnostics only.
    Rk4,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegratorOptions {
    pub method: Method,
    /// Fixed-point tolerance on the midpoint iterate, relative to the state
    /// scale.
    pub fp_tol: f64,
    pub max_fp_iter: usize,
    /// Record observables every this many steps (step 0 and the final step
    /// are always recorded).
    pub record_every: usize,
    /// Keep phase-state snapshots on the record grid.
    pub store_states: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            method: Method::ImplicitMidpoint,
            fp_tol: 1e-13,
            max_fp_iter: 60,
            record_every: 1,
            store_states: false,
        }
    }
}

/// Named scalar observable evaluated on the record grid.
pub struct Monitor<'a> {
    pub name: String,
    pub f: Box<dyn Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Sync + 'a>,
}

impl<'a> Monitor<'a> {
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(&DVector<f64>, &DVector<f64>, f64) -> f64 + Sync + 'a,
    ) -> Self {
        Self {
            name: name.into(),
            f: Box::new(f),
        }
    }
}

fn midpoint_step(
    flow: &dyn PhaseFlow,
    q: &DVector<f64>,
    p: &DVector<f64>,
    t: f64,
    dt: f64,
    opts: &IntegratorOptions,
) -> Option<(DVector<f64>, DVector<f64>)> {
    // explicit Euler predictor
    let (qd, pd) = flow.eval(q, p, t);
    let mut q1 = q + &qd * dt;
    let mut p1 = p + &pd * dt;
    let scale = (q.norm() + p.norm()).max(1.0);
    for _ in 0..opts.max_fp_iter {
        let qm = (q + &q1) * 0.5;
        let pm = (p + &p1) * 0.5;
        let (qd, pd) = flow.eval(&qm, &pm, t + 0.5 * dt);
        let q_next = q + qd * dt;
        let p_next = p + pd * dt;
        let delta = (&q_next - &q1).norm() + (&p_next - &p1).norm();
        q1 = q_next;
        p1 = p_next;
        if delta <= opts.fp_tol * scale {
            return Some((q1, p1));
        }
    }
    None
}

fn rk4_step(
    flow: &dyn PhaseFlow,
    q: &DVector<f64>,
    p: &DVector<f64>,
    t: f64,
    dt: f64,
) -> (DVector<f64>, DVector<f64>) {
    let (k1q, k1p) = flow.eval(q, p, t);
    let (k2q, k2p) = flow.eval(&(q + &k1q * (dt / 2.0)), &(p + &k1p * (dt / 2.0)), t + dt / 2.0);
    let (k3q, k3p) = flow.eval(&(q + &k2q * (dt / 2.0)), &(p + &k2p * (dt / 2.0)), t + dt / 2.0);
    let (k4q, k4p) = flow.eval(&(q + &k3q * dt), &(p + &k3p * dt), t + dt);
    let qn = q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0);
    let pn = p + (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (dt / 6.0);
    (qn, pn)
}

/// Integrate a phase-space flow for `n_steps` steps of size `dt`, recording
/// energy, gauge momenta, and the supplied monitors. `on_step` is invoked at
/// every step (including step 0) and is how streaming trackers (winding
/// counters, sign-flip detectors) observe the full-resolution trajectory.
pub fn integrate_symplectic(
    flow: &dyn PhaseFlow,
    state0: &PhaseState,
    dt: f64,
    n_steps: usize,
    opts: &IntegratorOptions,
    monitors: &[Monitor],
    mut on_step: impl FnMut(usize, f64, &DVector<f64>, &DVector<f64>),
) -> TrajectoryRecord {
    assert!(dt > 0.0, "dt must be positive");
    let mut q = state0.q.clone();
    let mut p = state0.p.clone();
    let n_gauge = flow.gauge_momenta(&q, &p).len();

    let mut record = TrajectoryRecord::default();
    record.observables.push(("energy".into(), Vec::new()));
    for k in 0..n_gauge {
        record
            .observables
            .push((format!("gauge_{k}"), Vec::new()));
    }
    for m in monitors {
        record.observables.push((m.name.clone(), Vec::new()));
    }
    if opts.store_states {
        record.states = Some(Vec::new());
    }

    let sample = |record: &mut TrajectoryRecord, t: f64, q: &DVector<f64>, p: &DVector<f64>| {
        record.times.push(t);
        let mut col = 0usize;
        record.observables[col].1.push(flow.energy(q, p));
        col += 1;
        for gm in flow.gauge_momenta(q, p) {
            record.observables[col].1.push(gm);
            col += 1;
        }
        for m in monitors {
            record.observables[col].1.push((m.f)(q, p, t));
            col += 1;
        }
        if let Some(states) = record.states.as_mut() {
            let mut z = DVector::zeros(q.len() + p.len());
            z.rows_mut(0, q.len()).copy_from(q);
            z.rows_mut(q.len(), p.len()).copy_from(p);
            states.push(z);
        }
    };

    let t0 = state0.t;
    on_step(0, t0, &q, &p);
    sample(&mut record, t0, &q, &p);

    for step in 1..=n_steps {
        let t = t0 + (step - 1) as f64 * dt;
        let next = match opts.method {
            Method::ImplicitMidpoint => midpoint_step(flow, &q, &p, t, dt, opts),
            Method::Rk4 => Some(rk4_step(flow, &q, &p, t, dt)),
        };
        match next {
            Some((qn, pn)) => {
                q = qn;
                p = pn;
            }
            None => {
                record.abort = Some(Abort {
                    step,
                    reason: "fixed-point iteration did not converge".into(),
                });
                break;
            }
        }
        if !(q.iter().chain(p.iter()).all(|x| x.is_finite())) {
            record.abort = Some(Abort {
                step,
                reason: "non-finite state".into(),
            });
            break;
        }
        let t_now = t0 + step as f64 * dt;
        on_step(step, t_now, &q, &p);
        if step % opts.record_every == 0 || step == n_steps {
            sample(&mut record, t_now, &q, &p);
        }
    }
    record
}
