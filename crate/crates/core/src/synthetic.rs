//! Seeded synthetic series shaped like the three surveillance datasets.
//!
//! The real exports (daily Mpox cases, weekly ILI rates, monthly measles
//! incidence) have to be downloaded by hand. These generators produce series
//! of the same length, cadence and rough per-context level so the engine can
//! be exercised end to end without them. They are not the real data.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Frequency, TimeSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 450 daily points, smoothed case counts.
    Mpox,
    /// 840 weekly points, seasonal ILI rate.
    Influenza,
    /// 234 monthly points, incidence per 100k.
    Measles,
}

impl Profile {
    pub fn len(self) -> usize {
        match self {
            Profile::Mpox => 450,
            Profile::Influenza => 840,
            Profile::Measles => 234,
        }
    }

    pub fn default_contexts(self) -> usize {
        match self {
            Profile::Mpox | Profile::Influenza => 10,
            Profile::Measles => 6,
        }
    }

    pub fn frequency(self) -> Frequency {
        match self {
            Profile::Mpox => Frequency::Daily,
            Profile::Influenza => Frequency::Weekly,
            Profile::Measles => Frequency::Monthly,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Mpox => "mpox",
            Profile::Influenza => "influenza",
            Profile::Measles => "measles",
        }
    }
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mpox" => Ok(Profile::Mpox),
            "influenza" => Ok(Profile::Influenza),
            "measles" => Ok(Profile::Measles),
            other => Err(format!("unknown profile `{other}` (mpox, influenza, measles)")),
        }
    }
}

// Per-context mean levels of the reference series.
const MPOX_LEVELS: [f64; 10] = [2.68, 4.20, 8.02, 7.40, 4.14, 3.43, 2.44, 3.03, 3.43, 3.48];
const MEASLES_LEVELS: [f64; 6] = [0.080, 0.238, 0.021, 0.043, 0.091, 0.395];

fn is_leap(y: u32) -> bool {
    (y % 4 == 0 && y % 100 != 0) || y % 400 == 0
}

fn days_in_month(y: u32, m: u32) -> u32 {
    match m {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        _ if is_leap(y) => 29,
        _ => 28,
    }
}

fn daily_labels(mut y: u32, mut m: u32, mut d: u32, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(format!("{y:04}-{m:02}-{d:02}"));
        d += 1;
        if d > days_in_month(y, m) {
            d = 1;
            m += 1;
            if m > 12 {
                m = 1;
                y += 1;
            }
        }
    }
    out
}

fn weekly_labels(mut y: u32, mut w: u32, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(format!("{y:04}-W{w:02}"));
        w += 1;
        if w > 52 {
            w = 1;
            y += 1;
        }
    }
    out
}

fn monthly_labels(mut y: u32, mut m: u32, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        out.push(format!("{y:04}-{m:02}"));
        m += 1;
        if m > 12 {
            m = 1;
            y += 1;
        }
    }
    out
}

/// Piecewise-constant levels smoothed with a cosine ramp between neighbours.
fn smooth_levels(levels: &[f64], span: usize, t: usize) -> f64 {
    let pos = t as f64 / span as f64 - 0.5;
    let i = pos.floor().max(0.0) as usize;
    let j = (i + 1).min(levels.len() - 1);
    let frac = (pos - i as f64).clamp(0.0, 1.0);
    let w = 0.5 - 0.5 * (std::f64::consts::PI * frac).cos();
    levels[i.min(levels.len() - 1)] * (1.0 - w) + levels[j] * w
}

pub fn generate(profile: Profile, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).expect("unit normal");
    let n = profile.len();
    let two_pi = 2.0 * std::f64::consts::PI;

    let (labels, values): (Vec<String>, Vec<f64>) = match profile {
        Profile::Mpox => {
            let span = n / MPOX_LEVELS.len();
            let values = (0..n)
                .map(|t| {
                    let level = smooth_levels(&MPOX_LEVELS, span, t);
                    let weekly = 0.25 * level * (two_pi * t as f64 / 7.0).sin();
                    let wave = 0.35 * level * (two_pi * t as f64 / 23.0).sin();
                    (level + weekly + wave + 0.12 * level * noise.sample(&mut rng)).max(0.0)
                })
                .collect();
            (daily_labels(2022, 5, 8, n), values)
        }
        Profile::Influenza => {
            // Winter peaks of varying height over a slowly rising baseline.
            let peaks: Vec<f64> = (0..n / 52 + 2)
                .map(|_| 0.025 + 0.02 * noise.sample(&mut rng).abs())
                .collect();
            let values = (0..n)
                .map(|t| {
                    let season = t / 52;
                    let phase = (t % 52) as f64;
                    let bump = (-((phase - 16.0) / 5.0).powi(2)).exp();
                    let baseline = 0.009 + 0.004 * t as f64 / n as f64;
                    let v = baseline + peaks[season] * bump + 0.0008 * noise.sample(&mut rng);
                    v.max(0.001)
                })
                .collect();
            (weekly_labels(2002, 46, n), values)
        }
        Profile::Measles => {
            let span = n / MEASLES_LEVELS.len();
            let values = (0..n)
                .map(|t| {
                    let level = smooth_levels(&MEASLES_LEVELS, span, t);
                    let spring = 0.6 * level * (two_pi * (t as f64 - 2.0) / 12.0).sin();
                    (level + spring + 0.15 * level * noise.sample(&mut rng)).max(0.0)
                })
                .collect();
            (monthly_labels(1999, 8, n), values)
        }
    };
    TimeSeries::new(labels, values)
        .expect("generated values are finite")
        .with_frequency(profile.frequency())
}

/// Two halves with different dynamics: a slow low-level oscillation, then a
/// faster oscillation around a higher level. A model fitted only to the
/// second half predicts the first half poorly.
pub fn shifted_halves(half_len: usize, seed: u64) -> TimeSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.03).expect("valid normal");
    let two_pi = 2.0 * std::f64::consts::PI;
    let values: Vec<f64> = (0..2 * half_len)
        .map(|t| {
            let x = t as f64;
            let clean = if t < half_len {
                0.2 + 0.15 * (two_pi * x / 17.0).sin()
            } else {
                0.7 - 0.2 * (two_pi * x / 6.0).sin()
            };
            clean + noise.sample(&mut rng)
        })
        .collect();
    let labels = (0..values.len()).map(|t| format!("t{t:04}")).collect();
    TimeSeries::new(labels, values).expect("generated values are finite")
}
