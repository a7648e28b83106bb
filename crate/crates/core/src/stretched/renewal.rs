//! Renewal environments: integer interarrival laws, the stationary delay,
//! and two-sided point samples over a window.

use crate::rng::{chacha, tag};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RenewalError {
    #[error("interarrival support must be positive integers")]
    NonPositiveSupport,
    #[error("probabilities must be nonnegative and sum to 1 (got {0})")]
    BadNormalization(f64),
    #[error("geometric success probability must lie in (0, 1], got {0}")]
    BadSuccess(f64),
    #[error("stationary delay requires a finite-mean law")]
    InfiniteMean,
    #[error("window ({0}, {1}) is empty")]
    EmptyWindow(i64, i64),
}

/// Law of a positive integer gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GapLaw {
    /// Explicit finite support: sorted (value, probability) pairs.
    Finite(Vec<(u64, f64)>),
    /// P(gap = shift + g) = success (1-success)^g for g >= 0.
    ShiftedGeometric { shift: u64, success: f64 },
}

impl GapLaw {
    pub fn constant(v: u64) -> Self {
        GapLaw::Finite(vec![(v, 1.0)])
    }

    pub fn uniform(values: &[u64]) -> Self {
        let p = 1.0 / values.len() as f64;
        let mut entries: Vec<(u64, f64)> = values.iter().map(|&v| (v, p)).collect();
        entries.sort_unstable_by_key(|e| e.0);
        GapLaw::Finite(entries)
    }

    pub fn validate(&self) -> Result<(), RenewalError> {
        match self {
            GapLaw::Finite(entries) => {
                if entries.iter().any(|&(v, _)| v == 0) || entries.is_empty() {
                    return Err(RenewalError::NonPositiveSupport);
                }
                let total: f64 = entries.iter().map(|e| e.1).sum();
                if entries.iter().any(|e| e.1 < 0.0) || (total - 1.0).abs() > 1e-9 {
                    return Err(RenewalError::BadNormalization(total));
                }
                Ok(())
            }
            GapLaw::ShiftedGeometric { shift, success } => {
                if *shift == 0 {
                    return Err(RenewalError::NonPositiveSupport);
                }
                if !success.is_finite() || *success <= 0.0 || *success > 1.0 {
                    return Err(RenewalError::BadSuccess(*success));
                }
                Ok(())
            }
        }
    }

    pub fn pmf(&self, v: u64) -> f64 {
        match self {
            GapLaw::Finite(entries) => entries
                .iter()
                .find(|e| e.0 == v)
                .map(|e| e.1)
                .unwrap_or(0.0),
            GapLaw::ShiftedGeometric { shift, success } => {
                if v < *shift {
                    0.0
                } else {
                    success * (1.0 - success).powi((v - shift) as i32)
                }
            }
        }
    }

    /// P(gap > k).
    pub fn tail(&self, k: u64) -> f64 {
        match self {
            GapLaw::Finite(entries) => entries.iter().filter(|e| e.0 > k).map(|e| e.1).sum(),
            GapLaw::ShiftedGeometric { shift, success } => {
                if k < *shift {
                    1.0
                } else {
                    (1.0 - success).powi((k - shift + 1) as i32)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            GapLaw::Finite(entries) => entries.iter().map(|e| e.0 as f64 * e.1).sum(),
            GapLaw::ShiftedGeometric { shift, success } => {
                *shift as f64 + (1.0 - success) / success
            }
        }
    }

    /// gcd of the support; 1 means aperiodic.
    pub fn support_gcd(&self) -> u64 {
        fn gcd(a: u64, b: u64) -> u64 {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        match self {
            GapLaw::Finite(entries) => entries
                .iter()
                .filter(|e| e.1 > 0.0)
                .map(|e| e.0)
                .fold(0, gcd),
            GapLaw::ShiftedGeometric { shift, success } => {
                if *success >= 1.0 {
                    *shift
                } else {
                    gcd(*shift, *shift + 1)
                }
            }
        }
    }

    pub fn is_aperiodic(&self) -> bool {
        self.support_gcd() == 1
    }

    /// Inverse-transform sample from a single uniform; monotone in the
    /// stochastic order of the law, which is what the shared-uniform
    /// density couplings rely on.
    pub fn sample_from_unit(&self, u: f64) -> u64 {
        match self {
            GapLaw::Finite(entries) => {
                let mut cum = 0.0;
                for &(v, p) in entries {
                    cum += p;
                    if u < cum {
                        return v;
                    }
                }
                entries.last().unwrap().0
            }
            GapLaw::ShiftedGeometric { shift, success } => {
                if *success >= 1.0 {
                    return *shift;
                }
                let g = ((1.0 - u).ln() / (1.0 - success).ln()).floor();
                shift + g.max(0.0) as u64
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        self.sample_from_unit(rng.gen::<f64>())
    }
}

/// Stationary delay of a renewal process: P(delay = k) = P(gap > k) / E[gap].
#[derive(Debug, Clone, Serialize)]
pub struct DelayLaw {
    law: GapLaw,
    mean: f64,
}

pub fn stationary_delay_pmf(law: &GapLaw) -> Result<DelayLaw, RenewalError> {
    law.validate()?;
    let mean = law.mean();
    if !mean.is_finite() || mean <= 0.0 {
        return Err(RenewalError::InfiniteMean);
    }
    Ok(DelayLaw {
        law: law.clone(),
        mean,
    })
}

impl DelayLaw {
    pub fn pmf(&self, k: u64) -> f64 {
        self.law.tail(k) / self.mean
    }

    /// P(delay >= n) = E[(gap - n)^+] / E[gap], summed in closed form.
    pub fn tail_at_least(&self, n: u64) -> f64 {
        match &self.law {
            GapLaw::Finite(entries) => {
                let excess: f64 = entries
                    .iter()
                    .filter(|e| e.0 > n)
                    .map(|e| (e.0 - n) as f64 * e.1)
                    .sum();
                excess / self.mean
            }
            GapLaw::ShiftedGeometric { shift, success } => {
                // Sigma_{k >= n} P(gap > k) / mean
                let q = 1.0 - success;
                let s = if n < *shift {
                    (*shift - n) as f64 + q / success
                } else {
                    q.powi((n - shift + 1) as i32) / success
                };
                s / self.mean
            }
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u64 {
        let u: f64 = rng.gen();
        let mut cum = 0.0;
        let mut k = 0u64;
        loop {
            cum += self.pmf(k);
            if u < cum || cum >= 1.0 {
                return k;
            }
            k += 1;
            if k > 1_000_000 {
                return k; // unreachable for any finite-mean law in practice
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RenewalMode {
    /// Two-sided, a point pinned at the origin.
    OriginStarted,
    /// One-sided on Z_+, first point at the stationary delay.
    StationaryDelay,
    /// Two-sided, but the gap crossing the origin has its own law.
    ModifiedOrigin(GapLaw),
}

#[derive(Debug, Clone, Serialize)]
pub struct RenewalEnv {
    pub points: Vec<i64>,
    pub window: (i64, i64),
    pub mode: RenewalMode,
    pub law: GapLaw,
}

/// Sample the renewal point set intersected with `window` (half-open).
pub fn sample_renewal(
    law: &GapLaw,
    mode: RenewalMode,
    window: (i64, i64),
    seed: u64,
) -> Result<RenewalEnv, RenewalError> {
    law.validate()?;
    let (lo, hi) = window;
    if lo >= hi {
        return Err(RenewalError::EmptyWindow(lo, hi));
    }
    let mut rng_right = chacha(seed, tag::RENEWAL, 0);
    let mut rng_left = chacha(seed, tag::RENEWAL, 1);
    let mut points = Vec::new();

    let start: i64 = match &mode {
        RenewalMode::OriginStarted | RenewalMode::ModifiedOrigin(_) => 0,
        RenewalMode::StationaryDelay => {
            let delay = stationary_delay_pmf(law)?;
            delay.sample(&mut rng_right) as i64
        }
    };
    // rightward from the anchor
    let mut x = start;
    while x < hi {
        if x >= lo {
            points.push(x);
        }
        x += law.sample(&mut rng_right) as i64;
    }
    // leftward, except in one-sided stationary mode
    if !matches!(mode, RenewalMode::StationaryDelay) {
        let mut x = start;
        let mut first = true;
        loop {
            let gap = if first {
                first = false;
                match &mode {
                    RenewalMode::ModifiedOrigin(origin_law) => {
                        origin_law.validate()?;
                        origin_law.sample(&mut rng_left)
                    }
                    _ => law.sample(&mut rng_left),
                }
            } else {
                law.sample(&mut rng_left)
            };
            x -= gap as i64;
            if x < lo {
                break;
            }
            if x < hi {
                points.push(x);
            }
        }
    }
    points.sort_unstable();
    Ok(RenewalEnv {
        points,
        window,
        mode,
        law: law.clone(),
    })
}

impl RenewalEnv {
    pub fn contains_point_in(&self, lo: i64, hi: i64) -> bool {
        let i = self.points.partition_point(|&x| x < lo);
        i < self.points.len() && self.points[i] < hi
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("environment serialization cannot fail")
    }
}
