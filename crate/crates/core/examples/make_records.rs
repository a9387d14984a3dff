//! Regenerate the bundled synthetic RR records in `data/`.
//!
//! ```text
//! cargo run -p hrv-sonify --example make_records -- crates/core/data
//! ```
//!
//! Each record is about five minutes long: a mean interval, respiratory sinus
//! arrhythmia at the breathing rate, a 0.1 Hz baroreflex wave, AR(1) noise and
//! a few artifacts (missed and extra beats) for the artifact gate to catch.

use std::fmt::Write as _;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Regime {
    name: &'static str,
    seed: u64,
    mean_ms: f64,
    /// Mean drift over the record, ms.
    drift_ms: f64,
    rsa_ms: f64,
    breath_hz: f64,
    mayer_ms: f64,
    noise_ms: f64,
    /// Stored as `time_s rr_s` pairs instead of one interval in ms per line.
    two_column_seconds: bool,
}

const REGIMES: [Regime; 3] = [
    Regime {
        name: "rest",
        seed: 1,
        mean_ms: 880.0,
        drift_ms: 30.0,
        rsa_ms: 45.0,
        breath_hz: 0.25,
        mayer_ms: 20.0,
        noise_ms: 18.0,
        two_column_seconds: false,
    },
    Regime {
        name: "slow_breathing",
        seed: 2,
        mean_ms: 950.0,
        drift_ms: -20.0,
        rsa_ms: 110.0,
        breath_hz: 0.1,
        mayer_ms: 35.0,
        noise_ms: 12.0,
        two_column_seconds: true,
    },
    Regime {
        name: "recovery",
        seed: 3,
        mean_ms: 640.0,
        drift_ms: 160.0,
        rsa_ms: 12.0,
        breath_hz: 0.4,
        mayer_ms: 8.0,
        noise_ms: 9.0,
        two_column_seconds: false,
    },
];

const DURATION_S: f64 = 300.0;

fn generate(r: &Regime) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let noise = Normal::new(0.0, r.noise_ms).expect("valid sigma");
    let mut out = Vec::new();
    let mut t = 0.0;
    let mut ar = 0.0;
    while t < DURATION_S {
        ar = 0.7 * ar + noise.sample(&mut rng);
        let tau = 2.0 * std::f64::consts::PI * t;
        let v = r.mean_ms
            + r.drift_ms * t / DURATION_S
            + r.rsa_ms * (tau * r.breath_hz).sin()
            + r.mayer_ms * (tau * 0.1 + 1.0).sin()
            + ar;
        out.push(v.round());
        t += v / 1000.0;
    }
    // Artifacts: an extra beat splits an interval, a missed beat merges two.
    for _ in 0..3 {
        let i = rng.random_range(10..out.len() - 10);
        let v = out[i];
        out[i] = (0.3 * v).round();
        out.insert(i + 1, (0.7 * v).round());
    }
    for _ in 0..2 {
        let i = rng.random_range(10..out.len() - 10);
        let merged = out[i] + out[i + 1] + out[i + 2];
        out.splice(i..i + 3, [merged]);
    }
    out
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");
    for r in &REGIMES {
        let rr = generate(r);
        let mut s = String::new();
        let _ = writeln!(s, "# label: {}", r.name);
        if r.two_column_seconds {
            let _ = writeln!(s, "# columns: beat time (s), RR interval (s)");
            let mut t = 0.0;
            for v in &rr {
                t += v / 1000.0;
                let _ = writeln!(s, "{t:.3} {:.3}", v / 1000.0);
            }
        } else {
            let _ = writeln!(s, "# RR interval (ms)");
            for v in &rr {
                let _ = writeln!(s, "{v}");
            }
        }
        let path = dir.join(format!("{}.txt", r.name));
        std::fs::write(&path, s).expect("write record");
        println!("{}: {} intervals", path.display(), rr.len());
    }
}
