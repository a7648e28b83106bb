//! Certified evaluation of the power-law series used throughout:
//! zeta tails, straddle sums and log-products, each returned as a
//! two-sided enclosure so callers can pick the rigorous side they need.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("series diverges for exponent {0} (requires > {1})")]
    Divergent(f64, f64),
}

/// Two-sided enclosure of a real number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub fn point(x: f64) -> Self {
        Bounds { lo: x, hi: x }
    }
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// How many leading terms to sum exactly before switching to integral bounds.
const EXACT_TERMS: u64 = 4096;

/// Sigma_{m > c} m^{-q} for q > 1, c >= 0.
pub fn power_tail(q: f64, c: u64) -> Result<Bounds, SeriesError> {
    if q <= 1.0 {
        return Err(SeriesError::Divergent(q, 1.0));
    }
    let cutoff = c + EXACT_TERMS;
    let mut sum = 0.0f64;
    for m in (c + 1)..=cutoff {
        sum += (m as f64).powf(-q);
    }
    // f(x) = x^{-q} is decreasing, so the tail past `cutoff` lies between
    // the integrals over [cutoff+1, inf) and [cutoff, inf).
    let int = |a: f64| a.powf(1.0 - q) / (q - 1.0);
    Ok(Bounds {
        lo: sum + int(cutoff as f64 + 1.0),
        hi: sum + int(cutoff as f64),
    })
}

/// Riemann zeta at q > 1.
pub fn zeta(q: f64) -> Result<Bounds, SeriesError> {
    let t = power_tail(q, 1)?;
    Ok(Bounds {
        lo: 1.0 + t.lo,
        hi: 1.0 + t.hi,
    })
}

/// Sigma_{m > c} (m - c) m^{-s}: probability mass of pairs straddling a point
/// at distance c from the visible range, s > 2. For c = 1 this is the sum
/// over pairs straddling a single fixed vertex.
pub fn straddle_tail(s: f64, c: u64) -> Result<Bounds, SeriesError> {
    if s <= 2.0 {
        return Err(SeriesError::Divergent(s, 2.0));
    }
    let c_f = c as f64;
    // (x - c) x^{-s} decreases once x > c s / (s - 1); make the exact block
    // long enough to be past that point.
    let exact_until = (c + EXACT_TERMS).max((c_f * s / (s - 1.0)).ceil() as u64 + 2);
    let mut sum = 0.0f64;
    for m in (c + 1)..=exact_until {
        sum += (m as f64 - c_f) * (m as f64).powf(-s);
    }
    let int = |a: f64| a.powf(2.0 - s) / (s - 2.0) - c_f * a.powf(1.0 - s) / (s - 1.0);
    Ok(Bounds {
        lo: sum + int(exact_until as f64 + 1.0),
        hi: sum + int(exact_until as f64),
    })
}

/// Sigma_{m >= 2} (m - 1) m^{-s}, the double sum over pairs with endpoints on
/// opposite sides of a fixed vertex.
pub fn over_point_sum(s: f64) -> Result<Bounds, SeriesError> {
    straddle_tail(s, 1)
}

/// Sigma_{l > c} ln(1 - l^{-s}) for s > 1 (negative). The tail is bounded via
/// -ln(1-x) <= x / (1-x).
pub fn log1m_power_tail(s: f64, c: u64) -> Result<Bounds, SeriesError> {
    if s <= 1.0 {
        return Err(SeriesError::Divergent(s, 1.0));
    }
    let cutoff = c + EXACT_TERMS;
    let mut sum = 0.0f64;
    for l in (c + 1)..=cutoff {
        sum += (-(l as f64).powf(-s)).ln_1p();
    }
    let t = power_tail(s, cutoff)?;
    let inflate = 1.0 / (1.0 - ((cutoff + 1) as f64).powf(-s));
    Ok(Bounds {
        lo: sum - t.hi * inflate,
        hi: sum - t.lo,
    })
}

/// Sigma_{l > c} (l - 1) ln(1 - l^{-s}) for s > 2 (negative).
pub fn weighted_log1m_tail(s: f64, c: u64) -> Result<Bounds, SeriesError> {
    if s <= 2.0 {
        return Err(SeriesError::Divergent(s, 2.0));
    }
    let cutoff = (c + EXACT_TERMS).max(1 << 20);
    let mut sum = 0.0f64;
    for l in (c + 1)..=cutoff {
        sum += (l as f64 - 1.0) * (-(l as f64).powf(-s)).ln_1p();
    }
    // |Sigma_{l>M} (l-1) ln(1-l^{-s})| <= inflate * Sigma_{l>M} (l-1) l^{-s}
    let w = {
        let a = power_tail(s - 1.0, cutoff)?;
        let b = power_tail(s, cutoff)?;
        Bounds {
            lo: a.lo - b.hi,
            hi: a.hi - b.lo,
        }
    };
    let inflate = 1.0 / (1.0 - ((cutoff + 1) as f64).powf(-s));
    Ok(Bounds {
        lo: sum - w.hi * inflate,
        hi: sum - w.lo,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zeta_three_matches_reference() {
        let z = zeta(3.0).unwrap();
        assert!(z.width() < 1e-10);
        assert_abs_diff_eq!(z.mid(), 1.2020569031595942, epsilon = 1e-9);
    }

    #[test]
    fn zeta_two_matches_pi_squared_over_six() {
        let z = zeta(2.0).unwrap();
        assert_abs_diff_eq!(
            z.mid(),
            std::f64::consts::PI * std::f64::consts::PI / 6.0,
            epsilon = 1e-7
        );
        assert!(z.lo <= 1.6449340668482264 && 1.6449340668482264 <= z.hi);
    }

    #[test]
    fn over_point_sum_equals_zeta_difference_at_s3() {
        // Sigma (m-1) m^{-3} = zeta(2) - zeta(3)
        let lhs = over_point_sum(3.0).unwrap();
        let rhs = zeta(2.0).unwrap().mid() - zeta(3.0).unwrap().mid();
        assert_abs_diff_eq!(lhs.mid(), rhs, epsilon = 1e-7);
    }

    #[test]
    fn ascending_and_descending_summation_orders_agree() {
        // Independent oracle: descending partial sum with a large cutoff
        // plus the textbook integral remainder.
        for &(s, c) in &[(3.0, 0u64), (2.5, 4), (3.5, 17)] {
            let enc = straddle_tail(s, c).unwrap();
            let cutoff = 4_000_000u64;
            let mut desc = 0.0f64;
            for m in ((c + 1)..=cutoff).rev() {
                desc += (m as f64 - c as f64) * (m as f64).powf(-s);
            }
            let m = cutoff as f64 + 0.5;
            desc += m.powf(2.0 - s) / (s - 2.0) - c as f64 * m.powf(1.0 - s) / (s - 1.0);
            assert!((enc.mid() - desc).abs() < 1e-8, "s={s} c={c}");
        }
    }

    #[test]
    fn straddle_tail_is_monotone_in_distance() {
        let mut last = f64::INFINITY;
        for d in [0u64, 1, 2, 5, 10, 100, 1000] {
            let b = straddle_tail(3.0, d + 1).unwrap();
            assert!(b.hi <= last);
            last = b.hi;
        }
    }

    #[test]
    fn divergent_exponents_are_rejected() {
        assert!(straddle_tail(2.0, 1).is_err());
        assert!(power_tail(1.0, 1).is_err());
        assert!(weighted_log1m_tail(1.9, 1).is_err());
    }

    #[test]
    fn log_tail_brackets_plain_product() {
        // Product_{l>=2} (1 - l^{-3}) has closed form cosh(pi sqrt(3)/2)/(3 pi).
        let b = log1m_power_tail(3.0, 1).unwrap();
        let closed =
            ((std::f64::consts::PI * 3f64.sqrt() / 2.0).cosh()) / (3.0 * std::f64::consts::PI);
        assert!(b.lo <= closed.ln() && closed.ln() <= b.hi);
        assert!(b.width() < 1e-10);
    }
}
