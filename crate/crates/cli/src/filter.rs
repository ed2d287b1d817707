//! First-order (6 dB/octave) low-pass filtering of measurement records.

use anyhow::{bail, Result};

/// Single-pole filter specification; the order is fixed at one.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterSpec {
    /// Pole frequency (rad per unit time).
    pub omega_c: f64,
}

/// `y <- y + dt * omega_c * (x - y)`, `y0 = x0`. Rejects unstable
/// discretizations (`dt * omega_c >= 0.5`).
pub fn lowpass(series: &[f64], spec: &FilterSpec, dt: f64) -> Result<Vec<f64>> {
    if !(spec.omega_c > 0.0) {
        bail!("filter pole must be positive, got {}", spec.omega_c);
    }
    if !(dt * spec.omega_c < 0.5) {
        bail!(
            "unstable filter discretization: dt * omega_c = {} >= 0.5",
            dt * spec.omega_c
        );
    }
    Ok(pullsim::record::lowpass_series(series, spec.omega_c, dt))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_settles() {
        let spec = FilterSpec { omega_c: 2.0 };
        let out = lowpass(&vec![1.5; 100_000], &spec, 1e-3).unwrap();
        let settle = (20.0 / spec.omega_c / 1e-3) as usize;
        assert!(out[settle..].iter().all(|y| (y - 1.5).abs() < 1e-6));
    }

    #[test]
    fn instability_rejected() {
        let spec = FilterSpec { omega_c: 600.0 };
        assert!(lowpass(&[0.0], &spec, 1e-3).is_err());
    }

    #[test]
    fn white_noise_variance_matches_analytic() {
        // input x_k = dW_k / dt has two-sided PSD dt * var(x) = 1;
        // the filtered output variance is omega_c / 2 * PSD
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let dt: f64 = 1e-3;
        let omega_c = 1.0;
        let n = 4_000_000;
        let series: Vec<f64> = (0..n)
            .map(|_| {
                // sum of 12 uniforms: variance 1, cheap gaussian-ish draw
                let s: f64 = (0..12).map(|_| rng.gen::<f64>()).sum::<f64>() - 6.0;
                s * dt.sqrt() / dt
            })
            .collect();
        let out = lowpass(&series, &FilterSpec { omega_c }, dt).unwrap();
        let tail = &out[n / 5..];
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let var = tail.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / tail.len() as f64;
        let expect = omega_c / 2.0;
        assert!(
            ((var - expect) / expect).abs() < 0.05,
            "filtered variance {var} vs {expect}"
        );
    }
}
