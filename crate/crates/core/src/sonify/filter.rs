//! Second-order Butterworth bandpass sections and the four-formant cascade.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::vowel::{Formant, VowelState};
use super::SonifyError;

/// Normalized biquad coefficients (`a0 == 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    /// Butterworth bandpass (first-order lowpass prototype) by bilinear
    /// transform, unity gain exactly at `center_hz`.
    ///
    /// With `t0 = tan(pi*fc/fs)` the analog center is `2fs*t0`, and the analog
    /// bandwidth `2fs*(1 + t0^2)*tan(pi*bw/fs)` makes the two digital -3 dB
    /// frequencies exactly `bandwidth_hz` apart.
    pub fn butterworth_bandpass(
        center_hz: f64,
        bandwidth_hz: f64,
        sample_rate_hz: u32,
    ) -> Result<Self, SonifyError> {
        let fs = sample_rate_hz as f64;
        if !(center_hz > 0.0
            && center_hz < fs / 2.0
            && bandwidth_hz > 0.0
            && bandwidth_hz < fs / 2.0)
        {
            return Err(SonifyError::InvalidFormant(format!(
                "center {center_hz} Hz / bandwidth {bandwidth_hz} Hz does not fit below Nyquist at {fs} Hz"
            )));
        }
        let k = 2.0 * fs;
        let t0 = (PI * center_hz / fs).tan();
        let w0_sq = (k * t0).powi(2);
        let bw = k * (1.0 + t0 * t0) * (PI * bandwidth_hz / fs).tan();
        let a0 = k * k + bw * k + w0_sq;
        let q = Self {
            b0: bw * k / a0,
            b1: 0.0,
            b2: -bw * k / a0,
            a1: (2.0 * w0_sq - 2.0 * k * k) / a0,
            a2: (k * k - bw * k + w0_sq) / a0,
        };
        if q.pole_radius() >= 1.0 - 1e-9 || !q.is_finite() {
            return Err(SonifyError::Unstable {
                center_hz,
                radius: q.pole_radius(),
            });
        }
        Ok(q)
    }

    /// Digital -3 dB edges `(f_lo, f_hi)` of [`Biquad::butterworth_bandpass`].
    pub fn bandpass_edges(center_hz: f64, bandwidth_hz: f64, sample_rate_hz: u32) -> (f64, f64) {
        let fs = sample_rate_hz as f64;
        let t0 = (PI * center_hz / fs).tan();
        let d = (1.0 + t0 * t0) * (PI * bandwidth_hz / fs).tan();
        let a = 0.5 * (-d + (d * d + 4.0 * t0 * t0).sqrt());
        let f_lo = fs / PI * a.atan();
        (f_lo, f_lo + bandwidth_hz)
    }

    fn is_finite(&self) -> bool {
        [self.b0, self.b1, self.b2, self.a1, self.a2]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Roots of `z^2 + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        let minus_a1 = Complex64::new(-self.a1, 0.0);
        [(minus_a1 + disc) * 0.5, (minus_a1 - disc) * 0.5]
    }

    /// Largest pole magnitude.
    pub fn pole_radius(&self) -> f64 {
        let [p, q] = self.poles();
        p.norm().max(q.norm())
    }

    /// `|H(e^{jw})|` at `freq_hz`.
    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: u32) -> f64 {
        let w = 2.0 * PI * freq_hz / sample_rate_hz as f64;
        let z1 = Complex64::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b0 + z1 * self.b1 + z2 * self.b2;
        let den = 1.0 + z1 * self.a1 + z2 * self.a2;
        (num / den).norm()
    }
}

/// Direct form I state. Survives coefficient changes without transients from
/// a stale internal state representation.
#[derive(Debug, Clone, Copy, Default)]
struct DfState {
    x1: f64,
    x2: f64,
    y1: f64,
    y2: f64,
}

impl DfState {
    #[inline]
    fn process(&mut self, q: &Biquad, x: f64) -> f64 {
        let y = q.b0 * x + q.b1 * self.x1 + q.b2 * self.x2 - q.a1 * self.y1 - q.a2 * self.y2;
        self.x2 = self.x1;
        self.x1 = x;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

#[derive(Debug, Clone, Copy)]
struct Section {
    coeffs: Biquad,
    gain: f64,
    state: DfState,
}

impl Section {
    fn design(f: &Formant, sample_rate_hz: u32) -> Result<(Biquad, f64), SonifyError> {
        let q = Biquad::butterworth_bandpass(f.center_hz, f.bandwidth_hz, sample_rate_hz)?;
        Ok((q, 10f64.powf(f.gain_db / 20.0)))
    }
}

/// Four bandpass sections in series, each followed by its linear gain.
///
/// [`FormantBank::set_vowel`] redesigns the coefficients and keeps the filter
/// memory, so a render can sweep the vowel without restarting the filters.
#[derive(Debug, Clone)]
pub struct FormantBank {
    sample_rate_hz: u32,
    sections: [Section; 4],
}

impl FormantBank {
    pub fn new(vowel: &VowelState, sample_rate_hz: u32) -> Result<Self, SonifyError> {
        vowel.validate(sample_rate_hz)?;
        let mut sections = [Section {
            coeffs: Biquad {
                b0: 0.0,
                b1: 0.0,
                b2: 0.0,
                a1: 0.0,
                a2: 0.0,
            },
            gain: 1.0,
            state: DfState::default(),
        }; 4];
        for (s, f) in sections.iter_mut().zip(vowel.formants.iter()) {
            (s.coeffs, s.gain) = Section::design(f, sample_rate_hz)?;
        }
        Ok(Self {
            sample_rate_hz,
            sections,
        })
    }

    pub fn set_vowel(&mut self, vowel: &VowelState) -> Result<(), SonifyError> {
        vowel.validate(self.sample_rate_hz)?;
        for (s, f) in self.sections.iter_mut().zip(vowel.formants.iter()) {
            (s.coeffs, s.gain) = Section::design(f, self.sample_rate_hz)?;
        }
        Ok(())
    }

    pub fn coefficients(&self) -> [Biquad; 4] {
        self.sections.map(|s| s.coeffs)
    }

    #[inline]
    pub fn process(&mut self, x: f64) -> f64 {
        self.sections.iter_mut().fold(x, |acc, s| {
            let q = s.coeffs;
            s.gain * s.state.process(&q, acc)
        })
    }

    /// Cascade magnitude response at `freq_hz`, gains included.
    pub fn magnitude_at(&self, freq_hz: f64) -> f64 {
        self.sections
            .iter()
            .map(|s| s.gain * s.coeffs.magnitude_at(freq_hz, self.sample_rate_hz))
            .product()
    }
}

/// Run `samples` through a fresh cascade tuned to `vowel`.
pub fn formant_filter(
    samples: &[f64],
    vowel: &VowelState,
    sample_rate_hz: u32,
) -> Result<Vec<f64>, SonifyError> {
    let mut bank = FormantBank::new(vowel, sample_rate_hz)?;
    Ok(samples.iter().map(|&x| bank.process(x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unity_gain_at_center_and_half_power_at_edges() {
        let q = Biquad::butterworth_bandpass(650.0, 80.0, 44100).unwrap();
        assert!((q.magnitude_at(650.0, 44100) - 1.0).abs() < 1e-12);
        assert!(q.magnitude_at(649.0, 44100) < 1.0 && q.magnitude_at(651.0, 44100) < 1.0);
        let (f_lo, f_hi) = Biquad::bandpass_edges(650.0, 80.0, 44100);
        assert!(f_lo < 650.0 && f_hi > 650.0);
        let half_power = 0.5f64.sqrt();
        assert!((q.magnitude_at(f_lo, 44100) - half_power).abs() < 1e-9);
        assert!((q.magnitude_at(f_hi, 44100) - half_power).abs() < 1e-9);
    }

    #[test]
    fn zero_in_zero_out() {
        let out = formant_filter(&[0.0; 512], &VowelState::tenor_a(), 44100).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn steady_tone_matches_analytic_response() {
        let fs = 44100;
        let q = Biquad::butterworth_bandpass(1080.0, 90.0, fs).unwrap();
        for (freq, expect_db_max) in [
            (1080.0, None),
            (1080.0 + 20.0 * 90.0, Some(-20.0)),
            (1080.0 - 10.0 * 90.0, Some(-20.0)),
        ] {
            let mut st = DfState::default();
            let n = 44100;
            let mut peak: f64 = 0.0;
            for i in 0..n {
                let x = (2.0 * PI * freq * i as f64 / fs as f64).sin();
                let y = st.process(&q, x);
                if i > n / 2 {
                    peak = peak.max(y.abs());
                }
            }
            let analytic = q.magnitude_at(freq, fs);
            assert!(
                (peak - analytic).abs() < 1e-3,
                "{freq}: {peak} vs {analytic}"
            );
            if let Some(db) = expect_db_max {
                assert!(20.0 * peak.log10() < db);
            } else {
                assert!((peak - 1.0).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn rejects_bands_past_nyquist() {
        assert!(Biquad::butterworth_bandpass(22_050.0, 500.0, 44100).is_err());
        assert!(Biquad::butterworth_bandpass(1000.0, 0.0, 44100).is_err());
    }

    #[test]
    fn poles_inside_unit_circle() {
        for f in [290.0, 650.0, 2900.0, 3250.0] {
            let q = Biquad::butterworth_bandpass(f, 40.0, 44100).unwrap();
            let r = q.pole_radius();
            assert!(r < 1.0 - 1e-9 && r > 0.99, "{f}: {r}");
        }
    }
}
