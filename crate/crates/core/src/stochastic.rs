//! Seeded noise streams and generic Itô / Stratonovich stepping.
//!
//! Every stochastic run in this crate draws its increments from a
//! [`NoisePath`], which derives one ChaCha8 stream per (trajectory, channel)
//! pair from a single master seed. Identical seeds therefore reproduce
//! identical increment streams bit-exactly, independent of how an ensemble is
//! batched across threads.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Increment law for a noise channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Wiener increments `N(0, dt)`, sampled by rand_distr's ziggurat.
    Gaussian,
    /// Two-outcome increments taking exactly the values `+-sqrt(dt)`. The
    /// probability of `+` is supplied per draw, so the caller can reproduce
    /// the biased two-outcome unravelling or use the symmetric p = 1/2 form.
    Binary,
}

/// splitmix64 finalizer, used to key independent sub-streams.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the stream key for (seed, trajectory, channel).
pub fn stream_key(seed: u64, trajectory: u64, channel: u64) -> u64 {
    mix64(mix64(seed ^ mix64(trajectory.wrapping_add(0x517c_c1b7_2722_0a95))) ^ channel)
}

/// Per-trajectory noise source with one independent stream per channel.
#[derive(Debug, Clone)]
pub struct NoisePath {
    pub seed: u64,
    pub trajectory: u64,
    pub dt: f64,
    pub mode: NoiseMode,
    streams: Vec<ChaCha8Rng>,
}

impl NoisePath {
    pub fn new(seed: u64, trajectory: u64, n_channels: usize, dt: f64, mode: NoiseMode) -> Self {
        let streams = (0..n_channels)
            .map(|c| ChaCha8Rng::seed_from_u64(stream_key(seed, trajectory, c as u64)))
            .collect();
        Self {
            seed,
            trajectory,
            dt,
            mode,
            streams,
        }
    }

    pub fn n_channels(&self) -> usize {
        self.streams.len()
    }

    /// Draw a Gaussian increment `N(0, dt)` on one channel.
    pub fn gaussian(&mut self, channel: usize) -> f64 {
        let z: f64 = self.streams[channel].sample(StandardNormal);
        z * self.dt.sqrt()
    }

    /// Draw a binary increment `+-sqrt(dt)`, `+` with probability `p_plus`.
    pub fn binary(&mut self, channel: usize, p_plus: f64) -> f64 {
        let u: f64 = self.streams[channel].gen();
        if u < p_plus {
            self.dt.sqrt()
        } else {
            -self.dt.sqrt()
        }
    }

    /// Uniform draw in [0, 1) on a channel (used by jump chains).
    pub fn uniform(&mut self, channel: usize) -> f64 {
        self.streams[channel].gen()
    }

    /// One increment per channel under the path's mode. Binary mode here is
    /// the symmetric p = 1/2 form, which matches the Wiener increment in mean
    /// and variance.
    pub fn increments(&mut self) -> Vec<f64> {
        (0..self.n_channels())
            .map(|c| match self.mode {
                NoiseMode::Gaussian => self.gaussian(c),
                NoiseMode::Binary => self.binary(c, 0.5),
            })
            .collect()
    }
}

/// Drift, per-channel diffusion, and an optional post-step projection hook.
pub struct SdeProblem<'a> {
    pub drift: Box<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Sync + 'a>,
    pub diffusion: Vec<Box<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Sync + 'a>>,
    pub projection_hook: Option<Box<dyn Fn(&mut DVector<f64>) + Sync + 'a>>,
}

impl<'a> SdeProblem<'a> {
    pub fn n_channels(&self) -> usize {
        self.diffusion.len()
    }
}

fn check_finite(state: &DVector<f64>, step: usize) -> Result<()> {
    if state.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { step })
    }
}

/// Euler–Maruyama step: `x + mu dt + sum_k sigma_k dW_k`, then the hook.
pub fn ito_step(
    prob: &SdeProblem,
    state: &DVector<f64>,
    t: f64,
    dt: f64,
    dw: &[f64],
) -> Result<DVector<f64>> {
    assert!(dt > 0.0, "dt must be positive");
    assert_eq!(dw.len(), prob.n_channels(), "one increment per channel");
    let mut next = state + (prob.drift)(state, t) * dt;
    for (k, sigma) in prob.diffusion.iter().enumerate() {
        next += sigma(state, t) * dw[k];
    }
    if let Some(hook) = &prob.projection_hook {
        hook(&mut next);
    }
    check_finite(&next, 0)?;
    Ok(next)
}

/// Heun predictor-corrector step in the Stratonovich sense: the predictor is
/// a full Euler step, the corrector averages the diffusion at the two
/// endpoints. The drift is interpreted as a Stratonovich drift.
pub fn stratonovich_step(
    prob: &SdeProblem,
    state: &DVector<f64>,
    t: f64,
    dt: f64,
    dw: &[f64],
) -> Result<DVector<f64>> {
    assert!(dt > 0.0, "dt must be positive");
    assert_eq!(dw.len(), prob.n_channels(), "one increment per channel");
    let sig0: Vec<DVector<f64>> = prob.diffusion.iter().map(|s| s(state, t)).collect();
    let mut pred = state + (prob.drift)(state, t) * dt;
    for (k, s) in sig0.iter().enumerate() {
        pred += s * dw[k];
    }
    check_finite(&pred, 0)?;
    let mut next = state + (prob.drift)(state, t) * dt;
    for (k, sigma) in prob.diffusion.iter().enumerate() {
        next += (&sig0[k] + sigma(&pred, t + dt)) * (0.5 * dw[k]);
    }
    if let Some(hook) = &prob.projection_hook {
        hook(&mut next);
    }
    check_finite(&next, 0)?;
    Ok(next)
}

/// Convert an Itô drift to the Stratonovich drift,
/// `mu_bar = mu - 1/2 sum_k (d sigma_k / d x) sigma_k`,
/// given analytic diffusion Jacobians.
pub fn ito_to_stratonovich<'a>(
    drift: impl Fn(&DVector<f64>, f64) -> DVector<f64> + Sync + 'a,
    diffusion: Vec<impl Fn(&DVector<f64>, f64) -> DVector<f64> + Sync + 'a>,
    diffusion_jacobian: Vec<impl Fn(&DVector<f64>, f64) -> nalgebra::DMatrix<f64> + Sync + 'a>,
) -> impl Fn(&DVector<f64>, f64) -> DVector<f64> + Sync + 'a {
    assert_eq!(diffusion.len(), diffusion_jacobian.len());
    move |x: &DVector<f64>, t: f64| {
        let mut mu = drift(x, t);
        for (sigma, jac) in diffusion.iter().zip(diffusion_jacobian.iter()) {
            mu -= jac(x, t) * sigma(x, t) * 0.5;
        }
        mu
    }
}
