//! Backward exploration of straddling long edges: the law of the furthest
//! negative vertex sending an edge of length > L over the origin, its atom
//! at minus infinity, and exact convolutions of finitely many steps.
//!
//! The distribution has the product form
//!   P(step = -n) = [prod_{k<n} Q(k)] (1 - Q(n)),
//!   Q(k) = prod_{l > max(k, L)} (1 - l^{-s}),
//! and the escape mass a(L) = prod_{k>=1} Q(k) satisfies
//!   ln a(L) = Sigma_{l>L} (l-1) ln(1 - l^{-s}).

use crate::series;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExplorationError {
    #[error("exploration law requires s > 2, got {0}")]
    ExponentTooSmall(f64),
    #[error("length threshold must be >= 1")]
    BadThreshold,
    #[error(
        "requested n = {n} beyond the tabulated support {n_max}; truncation error would apply"
    )]
    BeyondSupport { n: usize, n_max: usize },
    #[error(transparent)]
    Series(#[from] series::SeriesError),
}

#[derive(Debug, Clone, Serialize)]
pub struct ExplorationLaw {
    pub s: f64,
    pub length_threshold: u64,
    /// pmf[n-1] = P(step = -n), n = 1..=n_max.
    pub pmf: Vec<f64>,
    /// Probability the exploration escapes to minus infinity.
    pub at_infinity: f64,
    /// Certified bound on the pmf mass beyond n_max plus series error.
    pub truncation_error: f64,
}

impl ExplorationLaw {
    pub fn build(s: f64, length_threshold: u64, n_max: usize) -> Result<Self, ExplorationError> {
        Self::build_with_cutoff(s, length_threshold, n_max, 2_000_000)
    }

    /// `cutoff` controls where the log-products switch to their certified
    /// tail bound; exposed so tests can compare two truncation depths.
    pub fn build_with_cutoff(
        s: f64,
        length_threshold: u64,
        n_max: usize,
        cutoff: u64,
    ) -> Result<Self, ExplorationError> {
        if s <= 2.0 {
            return Err(ExplorationError::ExponentTooSmall(s));
        }
        if length_threshold == 0 {
            return Err(ExplorationError::BadThreshold);
        }
        let l = length_threshold;
        let top = cutoff.max(n_max as u64 + 1).max(l + 1);

        // suffix[m] = Sigma_{l' = m+1..=top} ln(1 - l'^{-s}) for the m values
        // we need (m <= max(n_max, L)); the remainder past `top` is bounded
        // via -ln(1-x) <= x/(1-x).
        let need = (n_max as u64).max(l) as usize;
        let mut suffix = vec![0.0f64; need + 1];
        let mut acc = 0.0f64;
        for m in (1..=top).rev() {
            if m <= need as u64 {
                suffix[m as usize] = acc;
            }
            acc += (-(m as f64).powf(-s)).ln_1p();
        }
        let tail = series::power_tail(s, top)?;
        let tail_abs = tail.hi / (1.0 - ((top + 1) as f64).powf(-s));

        let ln_q = |k: u64| -> f64 {
            let m = k.max(l) as usize;
            suffix[m]
        };

        let mut pmf = Vec::with_capacity(n_max);
        let mut ln_prefix = 0.0f64; // Sigma_{k<n} ln Q(k)
        for n in 1..=n_max as u64 {
            let q_n = ln_q(n);
            let p = ln_prefix.exp() * (-q_n.exp_m1());
            pmf.push(p.max(0.0));
            ln_prefix += q_n;
        }

        // ln a(L) = Sigma_{l > L} (l-1) ln(1-l^{-s}), certified.
        let ln_a = series::weighted_log1m_tail(s, l)?;
        let at_infinity = ln_a.mid().exp();

        // Mass not tabulated: P(finite, below -n_max) = prod_{k<=n_max} Q - a.
        let leftover = (ln_prefix.exp() - at_infinity).max(0.0);
        let series_slack = at_infinity * (ln_a.width() + 2.0 * tail_abs * (n_max as f64 + 1.0));
        let truncation_error = leftover + series_slack.abs();

        Ok(ExplorationLaw {
            s,
            length_threshold: l,
            pmf,
            at_infinity,
            truncation_error,
        })
    }

    pub fn n_max(&self) -> usize {
        self.pmf.len()
    }

    pub fn pmf_at(&self, n: usize) -> Result<f64, ExplorationError> {
        if n == 0 || n > self.pmf.len() {
            return Err(ExplorationError::BeyondSupport {
                n,
                n_max: self.pmf.len(),
            });
        }
        Ok(self.pmf[n - 1])
    }

    pub fn finite_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

/// Exact m-fold convolution table of the finite part of the law, indexed so
/// that `table(m)[n-1] = P(step_1 + ... + step_m = -n)` for n <= n_max.
#[derive(Debug, Clone)]
pub struct Convolution {
    pub m_max: usize,
    rows: Vec<Vec<f64>>,
    n_max: usize,
}

impl Convolution {
    pub fn build(law: &ExplorationLaw, m_max: usize) -> Self {
        let n_max = law.n_max();
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m_max);
        rows.push(law.pmf.clone());
        for _ in 1..m_max {
            let prev = rows.last().unwrap();
            let mut next = vec![0.0f64; n_max];
            for (i, &p) in law.pmf.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                // step of size i+1 composed with prior sum of size k+1
                for k in 0..n_max - i - 1 {
                    let pk = prev[k];
                    if pk != 0.0 {
                        next[i + 1 + k] += p * pk;
                    }
                }
            }
            rows.push(next);
        }
        Convolution { m_max, rows, n_max }
    }

    /// P(sum of m steps = -n); exact for n <= n_max since every composition
    /// uses parts <= n_max.
    pub fn tail(&self, m: usize, n: usize) -> Result<f64, ExplorationError> {
        if m == 0 || m > self.m_max || n == 0 || n > self.n_max {
            return Err(ExplorationError::BeyondSupport {
                n,
                n_max: self.n_max,
            });
        }
        Ok(self.rows[m - 1][n - 1])
    }

    pub fn row_sum(&self, m: usize) -> f64 {
        self.rows[m - 1].iter().sum()
    }
}
