//! Band-limited impulse train.
//!
//! The waveform is an equal-amplitude sum of cosine harmonics `k*f0` for every
//! `k` with `k*f0 < 0.45*fs`, divided by the harmonic count. The sum is
//! evaluated in closed form (Dirichlet kernel) so the cost per sample does not
//! depend on the number of harmonics.

use std::f64::consts::PI;

use super::SonifyError;

/// Harmonics must stay strictly below this fraction of the sample rate.
pub const HARMONIC_CUTOFF: f64 = 0.45;

/// Number of harmonics `k >= 1` with `k * f0 < 0.45 * sample_rate`.
pub fn harmonic_count(f0_hz: f64, sample_rate_hz: u32) -> usize {
    let cutoff = HARMONIC_CUTOFF * sample_rate_hz as f64;
    let mut k = ((cutoff / f0_hz).ceil() as usize).saturating_sub(1);
    while (k + 1) as f64 * f0_hz < cutoff {
        k += 1;
    }
    while k > 0 && k as f64 * f0_hz >= cutoff {
        k -= 1;
    }
    k
}

/// `sum_{k=1..n} cos(k * theta)`.
fn cosine_sum(n: usize, theta: f64) -> f64 {
    let half = 0.5 * theta;
    let den = half.sin();
    if den.abs() < 1e-12 {
        // theta at a multiple of 2*pi: every term is 1
        return n as f64;
    }
    (n as f64 * half).sin() * ((n as f64 + 1.0) * half).cos() / den
}

/// Phase-continuous pulse oscillator. The frequency may change every sample.
#[derive(Debug, Clone)]
pub struct PulseOscillator {
    sample_rate_hz: u32,
    /// Phase in cycles, kept in `[0, 1)`.
    phase: f64,
}

impl PulseOscillator {
    pub fn new(sample_rate_hz: u32) -> Self {
        Self {
            sample_rate_hz,
            phase: 0.0,
        }
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    fn check(&self, f0_hz: f64) -> Result<(), SonifyError> {
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        if f0_hz > 0.0 && f0_hz < nyquist {
            Ok(())
        } else {
            Err(SonifyError::F0OutOfRange {
                f0_hz,
                nyquist_hz: nyquist,
            })
        }
    }

    /// Next output sample at `f0_hz`, then advance the phase.
    pub fn tick(&mut self, f0_hz: f64) -> Result<f64, SonifyError> {
        self.check(f0_hz)?;
        let n = harmonic_count(f0_hz, self.sample_rate_hz);
        let y = if n == 0 {
            0.0
        } else {
            cosine_sum(n, 2.0 * PI * self.phase) / n as f64
        };
        self.phase += f0_hz / self.sample_rate_hz as f64;
        self.phase -= self.phase.floor();
        Ok(y)
    }

    /// `n_samples` at a fixed frequency, continuing from the current phase.
    pub fn render(&mut self, f0_hz: f64, n_samples: usize) -> Result<Vec<f64>, SonifyError> {
        self.check(f0_hz)?;
        (0..n_samples).map(|_| self.tick(f0_hz)).collect()
    }
}

/// A fresh oscillator block starting at phase zero.
pub fn pulse_oscillator(
    f0_hz: f64,
    n_samples: usize,
    sample_rate_hz: u32,
) -> Result<Vec<f64>, SonifyError> {
    PulseOscillator::new(sample_rate_hz).render(f0_hz, n_samples)
}
