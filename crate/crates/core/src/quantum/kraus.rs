//! Two-outcome Kraus pair realizing a Lindblad channel to O(dt), the jump
//! update it drives, and the residual measuring the equivalence with the
//! dense generator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{fro_norm_c, herm_matrix_fn};
use crate::C64;

use super::{lindblad_apply, LindbladChannel};

/// The pair of measurement operations for one channel and one time step.
#[derive(Debug, Clone)]
pub struct KrausPair {
    pub m_plus: DMatrix<C64>,
    pub m_minus: DMatrix<C64>,
    /// `sqrt(dt / (2S))`, the small parameter of the expansion.
    pub epsilon: f64,
    /// True when `||A|| * epsilon >= 0.5`, i.e. dt is too coarse for the
    /// two-outcome unravelling to stay well-conditioned.
    pub coarse_dt: bool,
}

/// Exact matrix-function evaluation of the measurement operations
///
/// ```text
/// M_pm = exp(-i (AB + BA) dt / (4S))
///      * exp(+-i B sqrt(dt/(2S)))
///      * [cos(A sqrt(dt/(2S))) +- sin(A sqrt(dt/(2S)))] / sqrt(2)
/// ```
///
/// evaluated through Hermitian eigendecompositions, not series.
pub fn kraus_pair(ch: &LindbladChannel, dt: f64) -> KrausPair {
    assert!(dt > 0.0, "dt must be positive");
    let eps = (dt / (2.0 * ch.s)).sqrt();
    let a_norm = nalgebra::SymmetricEigen::new(crate::linalg::hermitize(&ch.a))
        .eigenvalues
        .iter()
        .fold(0.0_f64, |m, &x| m.max(x.abs()));
    let coarse_dt = a_norm * eps >= 0.5;

    let stark = &ch.a * &ch.b + &ch.b * &ch.a;
    let e_stark = herm_matrix_fn(&stark, |x| (C64::new(0.0, -dt / (4.0 * ch.s) * x)).exp());
    let e_b_plus = herm_matrix_fn(&ch.b, |x| (C64::new(0.0, eps * x)).exp());
    let e_b_minus = herm_matrix_fn(&ch.b, |x| (C64::new(0.0, -eps * x)).exp());
    let cos_a = herm_matrix_fn(&ch.a, |x| C64::new((eps * x).cos(), 0.0));
    let sin_a = herm_matrix_fn(&ch.a, |x| C64::new((eps * x).sin(), 0.0));
    let inv_sqrt2 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);

    let m_plus = &e_stark * &e_b_plus * (&cos_a + &sin_a) * inv_sqrt2;
    let m_minus = &e_stark * &e_b_minus * (&cos_a - &sin_a) * inv_sqrt2;
    KrausPair {
        m_plus,
        m_minus,
        epsilon: eps,
        coarse_dt,
    }
}

/// One step of the two-outcome unravelling: outcome `+` with probability
/// `p+ = <M+ psi | M+ psi>`, state renormalized after the operation.
pub fn jump_update(
    psi: &DVector<C64>,
    pair: &KrausPair,
    u: f64,
) -> Result<(DVector<C64>, i8)> {
    let plus = &pair.m_plus * psi;
    let p_plus: f64 = plus.iter().map(|x| x.norm_sqr()).sum();
    if !(-1e-12..=1.0 + 1e-12).contains(&p_plus) {
        return Err(Error::BadProbability(p_plus));
    }
    if u < p_plus {
        Ok((&plus / C64::new(p_plus.sqrt(), 0.0), 1))
    } else {
        let minus = &pair.m_minus * psi;
        let p_minus: f64 = minus.iter().map(|x| x.norm_sqr()).sum();
        Ok((&minus / C64::new(p_minus.sqrt(), 0.0), -1))
    }
}

/// Defect between the Kraus-pair map and the dense generator:
/// `|| (M+ rho M+^H + M- rho M-^H - rho)/dt - L(rho) ||_F`. Scales as
/// O(dt).
pub fn kraus_lindblad_residual(
    rho: &DMatrix<C64>,
    ch: &LindbladChannel,
    dt: f64,
) -> Result<f64> {
    let pair = kraus_pair(ch, dt);
    let mapped = &pair.m_plus * rho * pair.m_plus.adjoint()
        + &pair.m_minus * rho * pair.m_minus.adjoint();
    let finite = (mapped - rho) / C64::new(dt, 0.0);
    let gen = lindblad_apply(rho, None, std::slice::from_ref(ch))?;
    Ok(fro_norm_c(&(finite - gen)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs_c;
    use crate::quantum::test_util::{random_channel, random_state};
    use crate::quantum::{spin_operators, LindbladChannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_channel(dim: usize) -> LindbladChannel {
        LindbladChannel::new(DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim), 1.0).unwrap()
    }

    #[test]
    fn trivial_channel_gives_scaled_identity() {
        let pair = kraus_pair(&zero_channel(2), 1e-3);
        let expect = DMatrix::<C64>::identity(2, 2).scale(std::f64::consts::FRAC_1_SQRT_2);
        assert!(max_abs_c(&(&pair.m_plus - &expect)) < 1e-15);
        assert!(max_abs_c(&(&pair.m_minus - &expect)) < 1e-15);
        assert!(!pair.coarse_dt);
    }

    #[test]
    fn completeness_m_plus_m_minus() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..20 {
            let ch = random_channel(2, 1.0, &mut rng);
            let pair = kraus_pair(&ch, 1e-4);
            let sum = pair.m_plus.adjoint() * &pair.m_plus
                + pair.m_minus.adjoint() * &pair.m_minus;
            let defect = max_abs_c(&(sum - DMatrix::<C64>::identity(2, 2)));
            assert!(defect < 1e-12, "completeness defect {defect}");
        }
    }

    #[test]
    fn series_expansion_remainder_is_third_order() {
        // M_pm - (I pm L eps - L^H L eps^2 / 2)/sqrt(2) = O(eps^3),
        // verified by halving dt (so eps -> eps/sqrt(2), remainder / 2^1.5)
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let ch = random_channel(2, 1.0, &mut rng);
        let l = ch.generator();
        let lhl = l.adjoint() * &l;
        let remainder = |dt: f64| {
            let pair = kraus_pair(&ch, dt);
            let eps = pair.epsilon;
            let id = DMatrix::<C64>::identity(2, 2);
            let series_plus = (&id + &l * C64::new(eps, 0.0)
                - &lhl * C64::new(0.5 * eps * eps, 0.0))
                .scale(std::f64::consts::FRAC_1_SQRT_2);
            max_abs_c(&(&pair.m_plus - &series_plus))
        };
        let r1 = remainder(1e-4);
        let r2 = remainder(5e-5);
        let ratio = r1 / r2;
        let expect = 2.0_f64.powf(1.5);
        assert!(
            (ratio - expect).abs() < 0.4,
            "remainder ratio {ratio}, expected ~{expect}"
        );
    }

    #[test]
    fn jump_update_trivial_channel() {
        let pair = kraus_pair(&zero_channel(2), 1e-3);
        let psi = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let (psi_p, o1) = jump_update(&psi, &pair, 0.3).unwrap();
        assert_eq!(o1, 1);
        assert!((&psi_p - &psi).norm() < 1e-14);
        let (psi_m, o2) = jump_update(&psi, &pair, 0.7).unwrap();
        assert_eq!(o2, -1);
        assert!((&psi_m - &psi).norm() < 1e-14);
    }

    #[test]
    fn probabilities_sum_to_one_and_outcome_bias_matches_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        for _ in 0..10 {
            let ch = random_channel(3, 0.9, &mut rng);
            let pair = kraus_pair(&ch, 1e-4);
            let psi = random_state(3, &mut rng);
            let p_plus: f64 = (&pair.m_plus * &psi).iter().map(|x| x.norm_sqr()).sum();
            let p_minus: f64 = (&pair.m_minus * &psi).iter().map(|x| x.norm_sqr()).sum();
            assert!((p_plus + p_minus - 1.0).abs() < 1e-14);
        }

        // psi an eigenvector of A with eigenvalue a and B = 0:
        // E[outcome] = p+ - p- = 2 a sqrt(dt/(2S)) + O(dt^(3/2))
        let ops = spin_operators(0.5).unwrap();
        let s = 1.0;
        let ch = LindbladChannel::measurement(ops.sz.clone(), s).unwrap();
        let dt = 1e-6;
        let pair = kraus_pair(&ch, dt);
        let psi = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
        let p_plus: f64 = (&pair.m_plus * &psi).iter().map(|x| x.norm_sqr()).sum();
        let bias = 2.0 * p_plus - 1.0;
        let expect = 2.0 * 0.5 * (dt / (2.0 * s)).sqrt();
        assert!(
            (bias - expect).abs() < 10.0 * dt,
            "bias {bias} vs {expect}"
        );

        // normalized output state
        let (psi_next, _) = jump_update(&psi, &pair, 0.2).unwrap();
        assert!((psi_next.norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn residual_scales_linearly_in_dt() {
        let mut rng = ChaCha8Rng::seed_from_u64(53);
        for dim in [2, 3] {
            for _ in 0..10 {
                let ch = random_channel(dim, 1.0, &mut rng);
                let psi = random_state(dim, &mut rng);
                let rho = DMatrix::from_fn(dim, dim, |i, j| psi[i] * psi[j].conj());
                let r1 = kraus_lindblad_residual(&rho, &ch, 1e-3).unwrap();
                let r2 = kraus_lindblad_residual(&rho, &ch, 5e-4).unwrap();
                let ratio = r1 / r2;
                assert!(
                    (1.8..2.2).contains(&ratio),
                    "O(dt) ratio {ratio} out of band"
                );
            }
        }
    }

    #[test]
    fn residual_corner_cases() {
        // zero channel: exactly zero residual
        let rho = DMatrix::<C64>::identity(2, 2).scale(0.5);
        let r = kraus_lindblad_residual(&rho, &zero_channel(2), 1e-3).unwrap();
        assert!(r < 1e-12, "zero-channel residual {r}");

        // spin-1 lowering channel at tiny dt: residual below 1e-6
        let ops = spin_operators(1.0).unwrap();
        let a = (&ops.splus + &ops.sminus).scale(0.5);
        let b = (&ops.splus - &ops.sminus) * C64::new(0.0, -0.5);
        // L = A + iB = s_minus requires A = sx, B = -sy
        let ch = LindbladChannel::new(a, -b, 1.0).unwrap();
        let rho = DMatrix::<C64>::identity(3, 3).scale(1.0 / 3.0);
        let r = kraus_lindblad_residual(&rho, &ch, 1e-8).unwrap();
        assert!(r < 1e-6, "residual {r}");
    }

    #[test]
    fn coarse_dt_is_flagged() {
        let ops = spin_operators(0.5).unwrap();
        let ch = LindbladChannel::measurement(ops.sz.clone(), 1.0).unwrap();
        assert!(kraus_pair(&ch, 10.0).coarse_dt);
        assert!(!kraus_pair(&ch, 1e-4).coarse_dt);
    }
}
