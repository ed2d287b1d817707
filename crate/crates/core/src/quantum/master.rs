//! Dense density-matrix evolution: the Lindblad generator, an RK4
//! integrator, and the vectorized steady-state solver used as the oracle
//! for trajectory runs.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{hermitize, kron};
use crate::C64;

use super::LindbladChannel;

/// `L(rho) = -i [H, rho] + sum_k (1/(2 S_k)) (L_k rho L_k^H
/// - rho L_k^H L_k / 2 - L_k^H L_k rho / 2)`. Trace-free by construction.
pub fn lindblad_apply(
    rho: &DMatrix<C64>,
    h: Option<&DMatrix<C64>>,
    channels: &[LindbladChannel],
) -> Result<DMatrix<C64>> {
    let dim = rho.nrows();
    let mut out = DMatrix::<C64>::zeros(dim, dim);
    if let Some(h) = h {
        if h.nrows() != dim {
            return Err(Error::DimensionMismatch {
                context: "hamiltonian vs density matrix",
                expected: dim,
                got: h.nrows(),
            });
        }
        out += (h * rho - rho * h) * C64::new(0.0, -1.0);
    }
    for ch in channels {
        if ch.dim() != dim {
            return Err(Error::DimensionMismatch {
                context: "channel vs density matrix",
                expected: dim,
                got: ch.dim(),
            });
        }
        let l = ch.generator();
        let lh = l.adjoint();
        let lhl = &lh * &l;
        let w = 1.0 / (2.0 * ch.s);
        out += (&l * rho * &lh - (rho * &lhl + &lhl * rho).scale(0.5)).scale(w);
    }
    Ok(out)
}

/// RK4 integration of the master equation with constant generator.
pub fn evolve_master(
    rho0: &DMatrix<C64>,
    h: Option<&DMatrix<C64>>,
    channels: &[LindbladChannel],
    dt: f64,
    n_steps: usize,
) -> Result<DMatrix<C64>> {
    let mut rho = rho0.clone();
    for _ in 0..n_steps {
        let k1 = lindblad_apply(&rho, h, channels)?;
        let k2 = lindblad_apply(&(&rho + &k1 * C64::new(dt / 2.0, 0.0)), h, channels)?;
        let k3 = lindblad_apply(&(&rho + &k2 * C64::new(dt / 2.0, 0.0)), h, channels)?;
        let k4 = lindblad_apply(&(&rho + &k3 * C64::new(dt, 0.0)), h, channels)?;
        rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
            * C64::new(dt / 6.0, 0.0);
        rho = hermitize(&rho);
    }
    Ok(rho)
}

/// Steady state of the vectorized Lindblad superoperator.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Unit-trace Hermitian steady density matrix.
    pub rho: DMatrix<C64>,
    /// Basis of the null space when it is more than one-dimensional.
    pub degenerate_basis: Option<Vec<DMatrix<C64>>>,
}

/// Column-stacking vectorization: `vec(A X B) = (B^T kron A) vec(X)`.
fn superoperator(h: Option<&DMatrix<C64>>, channels: &[LindbladChannel], dim: usize) -> DMatrix<C64> {
    let id = DMatrix::<C64>::identity(dim, dim);
    let mut sup = DMatrix::<C64>::zeros(dim * dim, dim * dim);
    if let Some(h) = h {
        sup += (kron(&id, h) - kron(&h.transpose(), &id)) * C64::new(0.0, -1.0);
    }
    for ch in channels {
        let l = ch.generator();
        let lh = l.adjoint();
        let lhl = &lh * &l;
        let w = C64::new(1.0 / (2.0 * ch.s), 0.0);
        sup += (kron(&l.conjugate(), &l)
            - (kron(&id, &lhl) + kron(&lhl.transpose(), &id)).scale(0.5))
            * w;
    }
    sup
}

/// Null vector of the superoperator, reshaped, Hermitized, and normalized to
/// unit trace. Dense, dimension capped at 64.
pub fn master_steady_state(
    h: Option<&DMatrix<C64>>,
    channels: &[LindbladChannel],
    dim: usize,
) -> Result<SteadyState> {
    assert!(dim <= 64, "dense steady-state solver caps at dim 64");
    let sup = superoperator(h, channels, dim);
    let svd = nalgebra::SVD::new(sup, false, true);
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let n = dim * dim;
    let smax = svd.singular_values.iter().fold(0.0_f64, |a, &x| a.max(x));
    let tol = 1e-10 * smax.max(1.0);
    let mut null_rows: Vec<usize> = (0..n)
        .filter(|&i| svd.singular_values[i] < tol)
        .collect();
    if null_rows.is_empty() {
        // fall back to the smallest singular value
        let mut idx = 0;
        for i in 0..n {
            if svd.singular_values[i] < svd.singular_values[idx] {
                idx = i;
            }
        }
        null_rows.push(idx);
    }
    let unvec = |row: usize| -> DMatrix<C64> {
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        for col in 0..dim {
            for r in 0..dim {
                m[(r, col)] = v_t[(row, col * dim + r)].conj();
            }
        }
        m
    };

    let normalize = |m: &DMatrix<C64>| -> Option<DMatrix<C64>> {
        let herm = hermitize(m);
        let tr = herm.trace();
        if tr.norm() < 1e-12 {
            return None;
        }
        Some(herm / tr)
    };

    let rho = null_rows
        .iter()
        .find_map(|&r| normalize(&unvec(r)))
        .ok_or(Error::DegenerateSteadyState(null_rows.len()))?;

    let degenerate_basis = if null_rows.len() > 1 {
        Some(null_rows.iter().map(|&r| unvec(r)).collect())
    } else {
        None
    };
    Ok(SteadyState {
        rho,
        degenerate_basis,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fro_norm_c, max_abs_c};
    use crate::quantum::test_util::{random_channel, random_state};
    use crate::quantum::{bloch_channels, spin_operators, BlochParameters, LindbladChannel};
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn commuting_hamiltonian_and_no_channels_gives_zero() {
        let ops = spin_operators(0.5).unwrap();
        let rho = crate::quantum::thermal_operator(&ops, 1.0, 1.0);
        let rho = &rho / rho.trace();
        let out = lindblad_apply(&rho, Some(&ops.sz), &[]).unwrap();
        assert!(fro_norm_c(&out) < 1e-15);
    }

    #[test]
    fn output_is_trace_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let ch = random_channel(3, 0.8, &mut rng);
            let psi = random_state(3, &mut rng);
            let rho = DMatrix::from_fn(3, 3, |i, j| psi[i] * psi[j].conj());
            let h = crate::quantum::test_util::random_hermitian(3, &mut rng);
            let out = lindblad_apply(&rho, Some(&h), &[ch]).unwrap();
            assert!(out.trace().norm() < 1e-13);
        }
    }

    #[test]
    fn gauge_invariance_l_to_il() {
        // L -> iL corresponds to (A, B) -> (B, -A); generator unchanged
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let dim = 2;
            let a = crate::quantum::test_util::random_hermitian(dim, &mut rng);
            let b = crate::quantum::test_util::random_hermitian(dim, &mut rng);
            let s = 0.5 + rng.gen::<f64>();
            let ch = LindbladChannel::new(a.clone(), b.clone(), s).unwrap();
            let ch_rot = LindbladChannel::new(b, -a, s).unwrap();
            let psi = random_state(dim, &mut rng);
            let rho = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
            let out = lindblad_apply(&rho, None, &[ch]).unwrap();
            let out_rot = lindblad_apply(&rho, None, &[ch_rot]).unwrap();
            assert!(max_abs_c(&(out - out_rot)) < 1e-13);
        }
    }

    #[test]
    fn gauge_invariance_unitary_mixing() {
        // L_k -> sum_j U_kj L_j for unitary U leaves the generator invariant
        // (equal spectral densities).
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let dim = 3;
        let s = 0.7;
        let chans: Vec<LindbladChannel> =
            (0..3).map(|_| random_channel(dim, s, &mut rng)).collect();
        // random unitary via QR of a random complex matrix
        let raw = DMatrix::from_fn(3, 3, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let qr = raw.qr();
        let u = qr.q();
        let gens: Vec<DMatrix<C64>> = chans.iter().map(|c| c.generator()).collect();
        let mixed: Vec<LindbladChannel> = (0..3)
            .map(|k| {
                let mut l = DMatrix::<C64>::zeros(dim, dim);
                for j in 0..3 {
                    l += &gens[j] * u[(k, j)];
                }
                let a = (&l + l.adjoint()).scale(0.5);
                let b = (&l - l.adjoint()) * C64::new(0.0, -0.5);
                LindbladChannel::new(a, b, s).unwrap()
            })
            .collect();
        let psi = random_state(dim, &mut rng);
        let rho = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
        let out = lindblad_apply(&rho, None, &chans).unwrap();
        let out_mixed = lindblad_apply(&rho, None, &mixed).unwrap();
        assert!(max_abs_c(&(out - out_mixed)) < 1e-12);
    }

    #[test]
    fn steady_state_of_single_spin_bloch_channels() {
        let ops = spin_operators(0.5).unwrap();
        for beta in [0.5, 1.0, 2.0] {
            let params = BlochParameters::new(beta, 1.3, 0.9).unwrap();
            let ch = bloch_channels(&params, &ops, 1.0).unwrap();
            let ss = master_steady_state(None, &ch, 2).unwrap();
            let pol = 2.0 * (&ops.sz * &ss.rho).trace().re;
            assert!(
                (pol - (beta / 2.0).tanh()).abs() < 1e-12,
                "beta={beta}: polarization {pol}"
            );
            // Hermitian PSD to 1e-10
            let eig = nalgebra::SymmetricEigen::new(ss.rho.clone());
            assert!(eig.eigenvalues.iter().all(|&ev| ev > -1e-10));
        }
    }

    #[test]
    fn no_channels_gives_degenerate_steady_space() {
        let ops = spin_operators(0.5).unwrap();
        // with H only, every diagonal density matrix is stationary
        let ss = master_steady_state(Some(&ops.sz), &[], 2).unwrap();
        assert!(ss.degenerate_basis.is_some());
        // the returned representative is still a valid fixed point
        let out = lindblad_apply(&ss.rho, Some(&ops.sz), &[]).unwrap();
        assert!(fro_norm_c(&out) < 1e-10);
        assert!((ss.rho.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn master_decay_rate_matches_analytic_t1() {
        // spin-1/2 relaxation of <s_z> toward equilibrium at rate
        // (1 + alpha^2)/(2 S_perp), fitted from the RK4 evolution
        let ops = spin_operators(0.5).unwrap();
        let params = BlochParameters::new(1.2, 0.8, 1.1).unwrap();
        let ch = bloch_channels(&params, &ops, 1.0).unwrap();
        let rho0 = DMatrix::from_diagonal(&DVector::from_vec(vec![
            C64::new(0.1, 0.0),
            C64::new(0.9, 0.0),
        ]));
        let dt = 1e-3;
        let eq = params.equilibrium_polarization() / 2.0;
        let sz_of = |rho: &DMatrix<C64>| (&ops.sz * rho).trace().re;
        let mut rho = rho0.clone();
        let mut samples = Vec::new();
        for step in 0..2000 {
            if step % 100 == 0 {
                samples.push((step as f64 * dt, sz_of(&rho)));
            }
            rho = evolve_master(&rho, None, &ch, dt, 1).unwrap();
        }
        // log-linear fit of (sz - eq)
        let pts: Vec<(f64, f64)> = samples
            .iter()
            .map(|&(t, z)| (t, (z - eq).abs().ln()))
            .collect();
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let rate = -slope;
        let expect = params.t1_rate();
        assert!(
            (rate - expect).abs() / expect < 1e-3,
            "fitted rate {rate} vs analytic {expect}"
        );
    }

    #[test]
    fn theorema_dilectum_at_density_matrix_level() {
        // unitarily mixed channel sets give identical master evolution
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let dim = 2;
        let s = 1.1;
        let chans: Vec<LindbladChannel> =
            (0..2).map(|_| random_channel(dim, s, &mut rng)).collect();
        let raw = DMatrix::from_fn(2, 2, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let u = raw.qr().q();
        let gens: Vec<DMatrix<C64>> = chans.iter().map(|c| c.generator()).collect();
        let mixed: Vec<LindbladChannel> = (0..2)
            .map(|k| {
                let mut l = DMatrix::<C64>::zeros(dim, dim);
                for j in 0..2 {
                    l += &gens[j] * u[(k, j)];
                }
                let a = (&l + l.adjoint()).scale(0.5);
                let b = (&l - l.adjoint()) * C64::new(0.0, -0.5);
                LindbladChannel::new(a, b, s).unwrap()
            })
            .collect();
        let psi = random_state(dim, &mut rng);
        let rho0 = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
        let a = evolve_master(&rho0, None, &chans, 1e-2, 200).unwrap();
        let b = evolve_master(&rho0, None, &mixed, 1e-2, 200).unwrap();
        assert!(max_abs_c(&(a - b)) < 1e-12);
    }
}
