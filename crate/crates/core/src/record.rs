//! Trajectory records: time series of observables and per-channel
//! measurement records, shared by the classical and quantum runners.

use nalgebra::DVector;

/// Reason a run stopped before completing its step budget.
#[derive(Debug, Clone, PartialEq)]
pub struct Abort {
    pub step: usize,
    pub reason: String,
}

/// One monitored channel: raw record increments and the low-pass filtered
/// estimate series, sampled on the record grid.
#[derive(Debug, Clone, Default)]
pub struct ChannelRecord {
    pub name: String,
    /// Raw record increments delta-q accumulated over each record interval.
    pub raw: Vec<f64>,
    /// First-order low-pass filtered rate estimate (units of the measured
    /// operator), sampled at record times.
    pub filtered: Vec<f64>,
}

/// Time series emitted by a trajectory run.
///
/// Observables keep their declared order; exporters rely on it for
/// deterministic column layout.
#[derive(Debug, Clone, Default)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub observables: Vec<(String, Vec<f64>)>,
    pub channels: Vec<ChannelRecord>,
    /// Optional state snapshots on the record grid (used by pushforward and
    /// by tests; disabled for long production runs).
    pub states: Option<Vec<DVector<f64>>>,
    pub abort: Option<Abort>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn observable(&self, name: &str) -> Option<&[f64]> {
        self.observables
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }

    pub fn channel(&self, name: &str) -> Option<&ChannelRecord> {
        self.channels.iter().find(|c| c.name == name)
    }
}

/// First-order IIR low-pass, `y <- y + dt * omega_c * (x - y)`, `y0 = x0`.
///
/// This is the shared primitive behind the CLI `lowpass` operation and the
/// measurement-record filtering done inside runs.
pub fn lowpass_series(series: &[f64], omega_c: f64, dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    let mut y = match series.first() {
        Some(&x0) => x0,
        None => return out,
    };
    out.push(y);
    for &x in &series[1..] {
        y += dt * omega_c * (x - y);
        out.push(y);
    }
    out
}

/// Streaming version of [`lowpass_series`] for in-run filtering.
#[derive(Debug, Clone)]
pub struct LowpassState {
    omega_c: f64,
    y: Option<f64>,
}

impl LowpassState {
    pub fn new(omega_c: f64) -> Self {
        Self { omega_c, y: None }
    }

    pub fn push(&mut self, x: f64, dt: f64) -> f64 {
        let y = match self.y {
            None => x,
            Some(y) => y + dt * self.omega_c * (x - y),
        };
        self.y = Some(y);
        y
    }

    pub fn value(&self) -> Option<f64> {
        self.y
    }
}

/// Mean and standard error of a series with autocorrelation handled by batch
/// means: the window is cut into `n_batches` blocks and the block means are
/// treated as independent samples.
pub fn batch_mean_se(series: &[f64], n_batches: usize) -> (f64, f64) {
    assert!(n_batches >= 2, "need at least two batches");
    if series.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = series.len();
    let b = (n / n_batches).max(1);
    let used = n_batches.min(n);
    let mut means = Vec::with_capacity(used);
    for k in 0..used {
        let lo = k * b;
        let hi = ((k + 1) * b).min(n);
        if lo >= hi {
            break;
        }
        means.push(series[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
    }
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (means.len() - 1) as f64;
    (m, (var / means.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lowpass_settles_to_constant() {
        let n = 20_000;
        let dt = 1e-2;
        let omega_c = 1.0;
        let series = vec![3.5; n];
        let out = lowpass_series(&series, omega_c, dt);
        // settled within 1e-6 after 20 / omega_c
        let k = (20.0 / omega_c / dt) as usize;
        for &y in &out[k..] {
            assert!((y - 3.5).abs() < 1e-6);
        }
    }

    #[test]
    fn lowpass_attenuates_3db_at_pole() {
        let omega_c = 2.0;
        let dt = 1e-4;
        let n = 4_000_000;
        let series: Vec<f64> = (0..n).map(|k| (omega_c * dt * k as f64).sin()).collect();
        let out = lowpass_series(&series, omega_c, dt);
        // skip the transient, then measure output amplitude by RMS
        let tail = &out[n / 2..];
        let rms = (tail.iter().map(|x| x * x).sum::<f64>() / tail.len() as f64).sqrt();
        let amp = rms * std::f64::consts::SQRT_2;
        let expected = 1.0 / std::f64::consts::SQRT_2;
        assert!(
            (amp - expected).abs() / expected < 0.02,
            "amp {amp} vs {expected}"
        );
    }

    #[test]
    fn empty_series_filters_to_empty() {
        assert!(lowpass_series(&[], 1.0, 0.1).is_empty());
    }
}
