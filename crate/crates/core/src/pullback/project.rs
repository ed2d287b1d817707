//! Projected stochastic increments on reduced state-spaces.
//!
//! Itô increments do not pull back covariantly: projecting the Hilbert
//! increment onto the chart requires the drift correction
//! `mu^a = g+ [ J^T mu - (1/2) sum_k J^T d2psi(sigma_k, sigma_k) ]`, the
//! pulled-back second derivative of the immersion along each projected
//! diffusion. On a holomorphic chart this contraction equals the
//! holomorphic derivative of the Kähler metric, `Z^H dZ[sigma] sigma`,
//! evaluated here as a directional finite difference of the mixed
//! (bra-frozen) Gram matvec; differencing the full real metric would add a
//! spurious antiholomorphic term and measurably bias the trajectories.
//! Stratonovich drifts pull back covariantly, so the Heun path needs no
//! correction.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{complexify_vec, realify_vec};
use crate::quantum::{berezin_unchecked, LindbladChannel, SseSystem};
use crate::C64;

use super::mps::DiagonalMps;
use super::{cg_solve, reduced_metric, Immersion, PINV_RTOL};

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Fraction of the state scale a single drift increment may not exceed.
///
/// The projected drift blows up near chart-degeneracy events (the metric
/// pseudo-inverse amplifies along nearly-collapsed branch directions); an
/// uncapped explicit step then overshoots by orders of magnitude. The cap
/// activates only at such events, so regular steps are untouched and the
/// scheme's weak order is unchanged as dt -> 0.
const DRIFT_STEP_CAP: f64 = 0.25;

fn capped_drift_step(step: &DVector<f64>, state_scale: f64) -> DVector<f64> {
    let cap = DRIFT_STEP_CAP * (1.0 + state_scale);
    let norm = step.norm();
    if norm > cap {
        step * (cap / norm)
    } else {
        step.clone()
    }
}

fn capped_drift_step_c(step: &DVector<C64>, state_scale: f64) -> DVector<C64> {
    let cap = DRIFT_STEP_CAP * (1.0 + state_scale);
    let norm = step.norm();
    if norm > cap {
        step * c(cap / norm)
    } else {
        step.clone()
    }
}

/// Stratonovich drift one-form of a channel at `psi` (any scale; symbols
/// are Berezin-normalized), derived analytically from the diffusion
/// `sigma = (A + iB - <A>) psi / sqrt(2S)`:
///
/// ```text
/// mu_bar = mu - (1/2 (2S)) [ (L - a)^2 - 2 (Var(A) + Im<BA>) ] psi
/// ```
pub fn stratonovich_drift_forms(ch: &LindbladChannel, psi: &DVector<C64>) -> DVector<C64> {
    let inv_2s = 1.0 / (2.0 * ch.s);
    let l = ch.generator();
    let a = berezin_unchecked(&ch.a, psi);
    let lpsi = &l * psi;
    // Ito drift of this channel
    let lhl = l.adjoint() * &l;
    let mu = (-(&lhl * psi).scale(0.5) + &lpsi * c(a) - psi * c(0.5 * a * a)) * c(inv_2s);
    // (L - a)^2 psi
    let shifted = &lpsi - psi * c(a);
    let shifted2 = &l * &shifted - &shifted * c(a);
    // Var(A) and Im<BA>
    let a2 = berezin_unchecked(&(&ch.a * &ch.a), psi);
    let var_a = a2 - a * a;
    let norm_sq: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
    let im_ba = psi.dotc(&(&ch.b * (&ch.a * psi))).im / norm_sq;
    mu - (shifted2 - psi * c(2.0 * (var_a + im_ba))) * c(0.5 * inv_2s)
}

/// Projected Itô increment for a generic immersion in real coordinates:
/// the dense reference path. `hilbert_drift` and `hilbert_diffusions` are
/// covectors (equal to vectors, `g_H = I`) at `psi(xi)`.
#[allow(clippy::too_many_arguments)]
pub fn projected_ito_increment(
    imm: &dyn Immersion,
    xi: &DVector<f64>,
    hilbert_drift: &DVector<f64>,
    hilbert_diffusions: &[DVector<f64>],
    dt: f64,
    dw: &[f64],
    with_correction: bool,
    fd_scale: f64,
) -> Result<DVector<f64>> {
    assert_eq!(dw.len(), hilbert_diffusions.len());
    let j = imm.jacobian(xi);
    let metric = reduced_metric(imm, xi);
    let jt = j.transpose();

    let sigmas: Vec<DVector<f64>> = hilbert_diffusions
        .iter()
        .map(|s| metric.pinv_apply(&(&jt * s)))
        .collect();

    let mut drift_cov = &jt * hilbert_drift;
    if with_correction {
        // J^T d2psi(sigma, sigma) by a second difference of the immersion
        let psi0 = imm.eval(xi);
        for sigma in &sigmas {
            let s_norm = sigma.norm();
            if s_norm == 0.0 {
                continue;
            }
            let h = fd_scale * xi.norm().max(1.0) / s_norm;
            let second = (imm.eval(&(xi + sigma * h)) + imm.eval(&(xi - sigma * h))
                - &psi0 * 2.0)
                / (h * h);
            drift_cov -= (&jt * second) * 0.5;
        }
    }
    let mu = metric.pinv_apply(&drift_cov);

    let mut dxi = capped_drift_step(&(mu * dt), xi.norm());
    for (sigma, &w) in sigmas.iter().zip(dw) {
        dxi += sigma * w;
    }
    if dxi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite { step: 0 });
    }
    Ok(dxi)
}

/// One projected step on a diagonal MPS, reported for monitoring.
#[derive(Debug, Clone)]
pub struct ProjectedStep {
    /// Record increments per channel.
    pub records: Vec<f64>,
    /// Norm of `psi` before renormalization.
    pub norm_before: f64,
}

/// Stochastic Schrödinger flow projected onto a diagonal-MPS chart, in
/// complex arithmetic. All pseudo-inverse solves share one Hermitian
/// eigendecomposition of the Gram matrix per step; metric-derivative
/// contractions go through the factored matvec at shifted points.
pub struct ProjectedSse<'a> {
    pub sys: &'a SseSystem,
    /// Switch for the noncovariant drift correction (on in production;
    /// disabling it is a diagnostic).
    pub correction: bool,
    /// Relative finite-difference scale for the metric derivative,
    /// `h = fd_scale * |xi| / |sigma|`.
    pub fd_scale: f64,
    /// Renormalize `psi` after every step.
    pub renormalize: bool,
    /// Re-center the inter-site scale gauge after every step (pure gauge;
    /// keeps the chart coordinates bounded).
    pub rebalance: bool,
    /// Complex dimension above which the Gram solve switches to
    /// matrix-free CG.
    pub dense_limit: usize,
}

impl<'a> ProjectedSse<'a> {
    pub fn new(sys: &'a SseSystem) -> Self {
        Self {
            sys,
            correction: true,
            fd_scale: 1e-5,
            renormalize: true,
            rebalance: true,
            dense_limit: 256,
        }
    }

    fn pullback(&self, mps: &DiagonalMps, w: &DVector<C64>) -> DVector<C64> {
        // Z^H w with Z the holomorphic Jacobian; dense Z is affordable at
        // the small site counts where Hilbert operators exist at all.
        let z = mps.jacobian_complex();
        z.adjoint() * w
    }

    fn gram_solve(
        &self,
        mps: &DiagonalMps,
        factor: &Option<(DVector<f64>, DMatrix<C64>)>,
        b: &DVector<C64>,
    ) -> DVector<C64> {
        match factor {
            Some((vals, vecs)) => {
                let max_ev = vals.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
                let cut = PINV_RTOL * max_ev;
                let mut out = DVector::zeros(b.len());
                for (i, &ev) in vals.iter().enumerate() {
                    if ev > cut {
                        let v = vecs.column(i);
                        out += v * (v.dotc(b) / c(ev));
                    }
                }
                out
            }
            None => {
                // matrix-free CG on the realified system
                let br = realify_vec(b);
                let dim = br.len();
                let trace = 2.0 * mps.gram_trace();
                let out = cg_solve(|x| mps.factored_matvec(x), dim, &br, trace, PINV_RTOL);
                complexify_vec(&out.v)
            }
        }
    }

    fn factorize(&self, mps: &DiagonalMps) -> Option<(DVector<f64>, DMatrix<C64>)> {
        if mps.dim_c() <= self.dense_limit {
            let w = mps.gram_dense();
            let eig = nalgebra::SymmetricEigen::new(crate::linalg::hermitize(&w));
            Some((eig.eigenvalues, eig.eigenvectors))
        } else {
            None
        }
    }

    /// Richardson check of the finite-difference metric derivative at the
    /// state: halving `h` must change the directional derivative by O(h^2).
    /// Returns the relative defect between the `h` and `h/2` evaluations.
    pub fn fd_richardson_defect(&self, mps: &DiagonalMps, direction: &DVector<C64>) -> f64 {
        let z = mps.coords();
        let dir_norm = direction.norm();
        if dir_norm == 0.0 {
            return 0.0;
        }
        let h = self.fd_scale * z.norm().max(1.0) / dir_norm;
        let eval = |step: f64| -> DVector<C64> {
            let zp = &z + direction * c(step);
            let zm = &z - direction * c(step);
            (mps.gram_matvec_mixed_counted(&mps.with_coords(&zp), direction).0
                - mps.gram_matvec_mixed_counted(&mps.with_coords(&zm), direction).0)
                / c(2.0 * step)
        };
        let full = eval(h);
        let half = eval(h / 2.0);
        (&full - &half).norm() / full.norm().max(1e-300)
    }

    /// One Itô step: projects the Hilbert drift and diffusions, applies the
    /// drift correction, advances the coordinates, and renormalizes.
    pub fn ito_step(
        &self,
        mps: &mut DiagonalMps,
        dt: f64,
        dw: &[f64],
    ) -> Result<ProjectedStep> {
        assert_eq!(dw.len(), self.sys.n_channels());
        let psi = mps.assemble_dense();
        let factor = self.factorize(mps);
        let z = mps.coords();

        let mut sigmas = Vec::with_capacity(dw.len());
        for k in 0..self.sys.n_channels() {
            let sig_h = self.sys.diffusion(&psi, k);
            sigmas.push(self.gram_solve(mps, &factor, &self.pullback(mps, &sig_h)));
        }

        let mut drift_cov = self.pullback(mps, &self.sys.ito_drift(&psi));
        if self.correction {
            for sigma in &sigmas {
                let s_norm = sigma.norm();
                if s_norm == 0.0 {
                    continue;
                }
                let h = self.fd_scale * z.norm().max(1.0) / s_norm;
                let zp = &z + sigma * c(h);
                let zm = &z - sigma * c(h);
                // holomorphic metric derivative: bra stays at z, only the
                // ket is displaced
                let dg_sigma = (mps
                    .gram_matvec_mixed_counted(&mps.with_coords(&zp), sigma)
                    .0
                    - mps
                        .gram_matvec_mixed_counted(&mps.with_coords(&zm), sigma)
                        .0)
                    / c(2.0 * h);
                drift_cov -= dg_sigma * c(0.5);
            }
        }
        let mu = self.gram_solve(mps, &factor, &drift_cov);

        let mut dz = capped_drift_step_c(&(mu * c(dt)), z.norm());
        for (sigma, &w) in sigmas.iter().zip(dw) {
            dz += sigma * c(w);
        }
        let z_next = &z + dz;
        if z_next.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        mps.set_coords(&z_next);

        let norm_before = mps.norm_sq().sqrt();
        if self.renormalize {
            mps.renormalize();
        }
        if self.rebalance {
            if mps.n == 2 && mps.r > 1 && mps.r <= mps.d {
                mps.canonicalize_two_site();
            } else {
                mps.rebalance();
            }
        }
        let symbols = self.sys.symbols(&psi);
        let records = symbols
            .iter()
            .enumerate()
            .map(|(k, &a)| a * dt + self.sys.record_noise(k) * dw[k])
            .collect();
        Ok(ProjectedStep {
            records,
            norm_before,
        })
    }

    /// One Stratonovich step (Heun): the Stratonovich drift pulls back
    /// covariantly, the corrector averages the projected diffusions at the
    /// two endpoints.
    pub fn stratonovich_step(
        &self,
        mps: &mut DiagonalMps,
        hamiltonian_drift: impl Fn(&DVector<C64>) -> DVector<C64>,
        channels: &[LindbladChannel],
        dt: f64,
        dw: &[f64],
    ) -> Result<ProjectedStep> {
        assert_eq!(dw.len(), channels.len());
        let z = mps.coords();

        let project_all = |state: &DiagonalMps| -> (DVector<C64>, Vec<DVector<C64>>) {
            let psi = state.assemble_dense();
            let factor = self.factorize(state);
            let mut mu_h = hamiltonian_drift(&psi);
            for ch in channels {
                mu_h += stratonovich_drift_forms(ch, &psi);
            }
            let mu = self.gram_solve(state, &factor, &self.pullback(state, &mu_h));
            let sigmas = channels
                .iter()
                .enumerate()
                .map(|(k, _)| {
                    let sig_h = self.sys.diffusion(&psi, k);
                    self.gram_solve(state, &factor, &self.pullback(state, &sig_h))
                })
                .collect();
            (mu, sigmas)
        };

        let (mu0, sig0) = project_all(mps);
        let drift_step = capped_drift_step_c(&(&mu0 * c(dt)), z.norm());
        // predictor (full Euler, capped drift)
        let mut z_pred = &z + &drift_step;
        for (s, &w) in sig0.iter().zip(dw) {
            z_pred += s * c(w);
        }
        let pred = mps.with_coords(&z_pred);
        let (_, sig1) = project_all(&pred);

        let mut z_next = &z + &drift_step;
        for ((s0, s1), &w) in sig0.iter().zip(&sig1).zip(dw) {
            z_next += (s0 + s1) * c(0.5 * w);
        }
        if z_next.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        let psi0 = mps.assemble_dense();
        mps.set_coords(&z_next);
        let norm_before = mps.norm_sq().sqrt();
        if self.renormalize {
            mps.renormalize();
        }
        if self.rebalance {
            if mps.n == 2 && mps.r > 1 && mps.r <= mps.d {
                mps.canonicalize_two_site();
            } else {
                mps.rebalance();
            }
        }
        let records = channels
            .iter()
            .enumerate()
            .map(|(k, ch)| {
                let a = berezin_unchecked(&ch.a, &psi0);
                a * dt + (ch.s / 2.0).sqrt() * dw[k]
            })
            .collect();
        Ok(ProjectedStep {
            records,
            norm_before,
        })
    }
}
