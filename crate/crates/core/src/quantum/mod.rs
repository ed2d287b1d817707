//! Full-Hilbert-space quantum layer: spin operators, Lindblad channels,
//! Bloch thermalization, Kraus-pair unravellings, and the normalized Itô
//! stochastic Schrödinger increment with measurement records.
//!
//! Conventions: hbar = 1; a channel is the pair of Hermitian operators
//! `(A, B)` with one-sided noise spectral density `S`, generating
//! `L = A + i B`. Berezin symbols use the normalized quotient
//! `<psi|Op|psi> / <psi|psi>`, which makes the stochastic forms insensitive
//! to the overall scale of `psi`.

pub mod kraus;
pub mod master;
pub mod sse;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::hermitian_defect;
use crate::C64;

pub use kraus::{jump_update, kraus_lindblad_residual, kraus_pair, KrausPair};
pub use master::{evolve_master, lindblad_apply, master_steady_state, SteadyState};
pub use sse::{MeasurementRecord, SseSystem};

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// Angular momentum matrices for spin `j` in the `s_z` eigenbasis.
#[derive(Debug, Clone)]
pub struct SpinOperatorSet {
    pub j: f64,
    pub dim: usize,
    pub sx: DMatrix<C64>,
    pub sy: DMatrix<C64>,
    pub sz: DMatrix<C64>,
    pub splus: DMatrix<C64>,
    pub sminus: DMatrix<C64>,
}

/// Build the standard spin-j operators. `2j` must be a positive integer.
pub fn spin_operators(j: f64) -> Result<SpinOperatorSet> {
    let two_j = 2.0 * j;
    if j <= 0.0 || (two_j - two_j.round()).abs() > 1e-12 {
        return Err(Error::InvalidSpin(j));
    }
    let dim = (two_j.round() as usize) + 1;
    let m = |k: usize| j - k as f64; // m runs j, j-1, ..., -j
    let mut sz = DMatrix::<C64>::zeros(dim, dim);
    let mut splus = DMatrix::<C64>::zeros(dim, dim);
    for k in 0..dim {
        sz[(k, k)] = c(m(k));
    }
    for k in 1..dim {
        // <m+1| s+ |m> = sqrt(j(j+1) - m(m+1)) with m = m(k)
        let mk = m(k);
        splus[(k - 1, k)] = c((j * (j + 1.0) - mk * (mk + 1.0)).sqrt());
    }
    let sminus = splus.adjoint();
    let sx = (&splus + &sminus).scale(0.5);
    let sy = (&splus - &sminus) * C64::new(0.0, -0.5);
    Ok(SpinOperatorSet {
        j,
        dim,
        sx,
        sy,
        sz,
        splus,
        sminus,
    })
}

/// A measurement-and-feedback channel: `A` is measured, `B` is the feedback
/// Hamiltonian, `S` the one-sided noise spectral density (units A^2 * time).
/// The Lindblad generator is `L = A + i B`, entering with weight `1/(2S)`.
#[derive(Debug, Clone)]
pub struct LindbladChannel {
    pub a: DMatrix<C64>,
    pub b: DMatrix<C64>,
    pub s: f64,
}

impl LindbladChannel {
    pub fn new(a: DMatrix<C64>, b: DMatrix<C64>, s: f64) -> Result<Self> {
        if s <= 0.0 {
            return Err(Error::NonPositiveSpectralDensity(s));
        }
        for op in [&a, &b] {
            let defect = hermitian_defect(op);
            if defect > 1e-14 * (1.0 + crate::linalg::max_abs_c(op)) {
                return Err(Error::NonHermitian(defect));
            }
        }
        if a.shape() != b.shape() {
            return Err(Error::DimensionMismatch {
                context: "channel operators",
                expected: a.nrows(),
                got: b.nrows(),
            });
        }
        Ok(Self { a, b, s })
    }

    /// Pure measurement channel (no feedback).
    pub fn measurement(a: DMatrix<C64>, s: f64) -> Result<Self> {
        let dim = a.nrows();
        Self::new(a, DMatrix::zeros(dim, dim), s)
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `L = A + i B`.
    pub fn generator(&self) -> DMatrix<C64> {
        &self.a + &self.b * C64::i()
    }
}

/// Bloch thermalization parameters for one spin: inverse temperature `beta`
/// (level splitting = 1), transverse and longitudinal spectral densities,
/// and the control gain `alpha = tanh(beta/4)`.
#[derive(Debug, Clone, Copy)]
pub struct BlochParameters {
    pub beta: f64,
    pub s_perp: f64,
    pub s_z: f64,
    pub alpha: f64,
}

impl BlochParameters {
    pub fn new(beta: f64, s_perp: f64, s_z: f64) -> Result<Self> {
        if s_perp <= 0.0 {
            return Err(Error::NonPositiveSpectralDensity(s_perp));
        }
        if s_z <= 0.0 {
            return Err(Error::NonPositiveSpectralDensity(s_z));
        }
        Ok(Self {
            beta,
            s_perp,
            s_z,
            alpha: (beta / 4.0).tanh(),
        })
    }

    /// Longitudinal relaxation rate of the spin-1/2 master equation driven
    /// by these parameters, `1/T1 = (1 + alpha^2) / (2 S_perp)`.
    pub fn t1_rate(&self) -> f64 {
        (1.0 + self.alpha * self.alpha) / (2.0 * self.s_perp)
    }

    /// Spin-1/2 equilibrium polarization `2 <s_z>` for `sign = +1`:
    /// `2 alpha / (1 + alpha^2) = tanh(beta/2)`.
    pub fn equilibrium_polarization(&self) -> f64 {
        2.0 * self.alpha / (1.0 + self.alpha * self.alpha)
    }
}

/// The three thermalizing channels of a spin.
///
/// With `sign = +1` the feedback pumps toward `+z` and the fixed point of
/// the resulting Lindbladian is `exp(+beta s_z)` (positive equilibrium
/// polarization `tanh(beta/2)` for spin-1/2); `sign = -1` thermalizes to
/// `exp(-beta s_z)`.
pub fn bloch_channels(
    params: &BlochParameters,
    ops: &SpinOperatorSet,
    sign: f64,
) -> Result<[LindbladChannel; 3]> {
    let alpha = params.alpha;
    let ch_x = LindbladChannel::new(ops.sx.clone(), ops.sy.scale(sign * alpha), params.s_perp)?;
    let ch_y = LindbladChannel::new(ops.sy.clone(), ops.sx.scale(-sign * alpha), params.s_perp)?;
    let ch_z = LindbladChannel::new(
        ops.sz.clone(),
        DMatrix::zeros(ops.dim, ops.dim),
        params.s_z,
    )?;
    Ok([ch_x, ch_y, ch_z])
}

/// Thermal operator `exp(sign * beta * s_z)` (unnormalized).
pub fn thermal_operator(ops: &SpinOperatorSet, beta: f64, sign: f64) -> DMatrix<C64> {
    let mut rho = DMatrix::<C64>::zeros(ops.dim, ops.dim);
    for k in 0..ops.dim {
        rho[(k, k)] = c((sign * beta * ops.sz[(k, k)].re).exp());
    }
    rho
}

/// Normalized Berezin symbol `<psi|Op|psi> / <psi|psi>`. Rejects
/// non-Hermitian operators.
pub fn berezin_symbol(op: &DMatrix<C64>, psi: &DVector<C64>) -> Result<f64> {
    let defect = hermitian_defect(op);
    if defect > 1e-12 * (1.0 + crate::linalg::max_abs_c(op)) {
        return Err(Error::NonHermitian(defect));
    }
    Ok(berezin_unchecked(op, psi))
}

/// Berezin symbol without the Hermiticity check, for operators known to be
/// Hermitian by construction (hot path).
pub fn berezin_unchecked(op: &DMatrix<C64>, psi: &DVector<C64>) -> f64 {
    let norm_sq: f64 = psi.iter().map(|x| x.norm_sqr()).sum();
    let quad = psi.dotc(&(op * psi)).re;
    quad / norm_sq
}


#[cfg(test)]
mod tests {
    use super::test_util::random_state;
    use super::*;
    use crate::linalg::{fro_norm_c, max_abs_c};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn spin_half_matrices() {
        let ops = spin_operators(0.5).unwrap();
        assert_eq!(ops.dim, 2);
        assert!((ops.sz[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((ops.sz[(1, 1)].re + 0.5).abs() < 1e-15);
        assert!((ops.splus[(0, 1)].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn spin_one_ladder_entries() {
        let ops = spin_operators(1.0).unwrap();
        assert_eq!(ops.dim, 3);
        for k in 0..3 {
            assert!((ops.sz[(k, k)].re - (1.0 - k as f64)).abs() < 1e-15);
        }
        let s2 = 2.0_f64.sqrt();
        assert!((ops.splus[(0, 1)].re - s2).abs() < 1e-14);
        assert!((ops.splus[(1, 2)].re - s2).abs() < 1e-14);
    }

    #[test]
    fn commutators_and_casimir() {
        for j in [0.5, 1.0, 1.5, 2.5] {
            let ops = spin_operators(j).unwrap();
            let comm = &ops.sx * &ops.sy - &ops.sy * &ops.sx;
            let defect = max_abs_c(&(comm - &ops.sz * C64::i()));
            assert!(defect < 1e-14, "j={j}: [sx,sy]-i sz defect {defect}");
            let comm = &ops.sy * &ops.sz - &ops.sz * &ops.sy;
            assert!(max_abs_c(&(comm - &ops.sx * C64::i())) < 1e-14);
            let comm = &ops.sz * &ops.sx - &ops.sx * &ops.sz;
            assert!(max_abs_c(&(comm - &ops.sy * C64::i())) < 1e-14);
            let casimir = &ops.sx * &ops.sx + &ops.sy * &ops.sy + &ops.sz * &ops.sz;
            let expect = DMatrix::<C64>::identity(ops.dim, ops.dim) * c(j * (j + 1.0));
            assert!(max_abs_c(&(casimir - expect)) < 1e-13);
        }
        assert!(spin_operators(0.7).is_err());
        assert!(spin_operators(0.0).is_err());
    }

    #[test]
    fn berezin_symbol_basics() {
        let ops = spin_operators(0.5).unwrap();
        let id = DMatrix::<C64>::identity(2, 2);
        let up = DVector::from_vec(vec![c(1.0), c(0.0)]);
        assert!((berezin_symbol(&id, &up).unwrap() - 1.0).abs() < 1e-15);
        assert!((berezin_symbol(&ops.sz, &up).unwrap() - 0.5).abs() < 1e-15);
        // eigenvector of sz with eigenvalue -1/2, scaled arbitrarily
        let down = DVector::from_vec(vec![c(0.0), C64::new(0.7, -0.2)]);
        assert!((berezin_symbol(&ops.sz, &down).unwrap() + 0.5).abs() < 1e-14);
        // non-Hermitian rejected
        assert!(berezin_symbol(&ops.splus, &up).is_err());
    }

    #[test]
    fn berezin_matches_dense_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let dim = 4;
            let raw = DMatrix::from_fn(dim, dim, |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let herm = crate::linalg::hermitize(&raw);
            let psi = random_state(dim, &mut rng);
            let direct = psi.dotc(&(&herm * &psi)).re / psi.dotc(&psi).re;
            assert!((berezin_symbol(&herm, &psi).unwrap() - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn bloch_gain_and_polarization_identities() {
        for beta in [0.3, 0.5, 1.0, 2.0, 5.0] {
            let p = BlochParameters::new(beta, 1.0, 1.0).unwrap();
            assert!((p.alpha - (beta / 4.0).tanh()).abs() < 1e-15);
            let pol = p.equilibrium_polarization();
            assert!(
                (pol - (beta / 2.0).tanh()).abs() < 1e-14,
                "double-angle identity failed at beta={beta}"
            );
        }
        assert!(BlochParameters::new(1.0, 0.0, 1.0).is_err());
        assert!(BlochParameters::new(1.0, 1.0, -2.0).is_err());
    }

    #[test]
    fn bloch_fixed_point_for_both_signs() {
        for j in [0.5, 1.0, 1.5] {
            let ops = spin_operators(j).unwrap();
            for beta in [0.5, 1.0, 2.0] {
                let params = BlochParameters::new(beta, 1.0, 1.0).unwrap();
                for sign in [1.0, -1.0] {
                    let ch = bloch_channels(&params, &ops, sign).unwrap();
                    let rho = thermal_operator(&ops, beta, sign);
                    let out = lindblad_apply(&rho, None, &ch).unwrap();
                    let res = fro_norm_c(&out);
                    assert!(res < 1e-12, "j={j} beta={beta} sign={sign}: residual {res}");
                }
            }
        }
    }

    #[test]
    fn beta_zero_fixes_maximally_mixed_state() {
        let ops = spin_operators(0.5).unwrap();
        let params = BlochParameters::new(0.0, 1.0, 1.0).unwrap();
        assert_eq!(params.alpha, 0.0);
        let ch = bloch_channels(&params, &ops, 1.0).unwrap();
        let rho = DMatrix::<C64>::identity(2, 2).scale(0.5);
        let out = lindblad_apply(&rho, None, &ch).unwrap();
        assert!(fro_norm_c(&out) < 1e-14);
    }

    #[test]
    fn channel_validation() {
        let ops = spin_operators(0.5).unwrap();
        assert!(LindbladChannel::new(ops.sx.clone(), ops.sy.clone(), 0.0).is_err());
        assert!(LindbladChannel::new(ops.splus.clone(), ops.sy.clone(), 1.0).is_err());
        let ch = LindbladChannel::new(ops.sx.clone(), ops.sy.clone(), 2.0).unwrap();
        let l = ch.generator();
        assert!(max_abs_c(&(l - (&ops.sx + &ops.sy * C64::i()))) < 1e-15);
    }
}
