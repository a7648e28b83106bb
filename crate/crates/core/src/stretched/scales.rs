//! Recursive length/height scales and the good/bad interval hierarchy.

use super::renewal::{
    sample_renewal, stationary_delay_pmf, GapLaw, RenewalEnv, RenewalError, RenewalMode,
};
use crate::rng::{chacha, stream_seed, tag};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ScaleError {
    #[error("initial scales must exceed 1, got L0 = {0}, H0 = {1}")]
    BadInitialScale(u64, u64),
    #[error("epsilon must be positive, got {0}")]
    BadEpsilon(f64),
    #[error("desk mode requires explicit gamma > 1 and mu in (0, 1)")]
    BadOverrides,
    #[error("scale overflowed 64 bits at level {0}")]
    Overflow(usize),
    #[error(transparent)]
    Renewal(#[from] RenewalError),
    #[error("environment window {have:?} does not cover the requested intervals {need:?}")]
    WindowTooSmall { have: (i64, i64), need: (i64, i64) },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ScaleMode {
    /// gamma, mu and beta are derived from epsilon by the standard choices.
    Derived,
    /// gamma and mu supplied directly; beta still derived from epsilon.
    Desk { gamma: f64, mu: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleHierarchy {
    pub lengths: Vec<u64>,
    /// Heights; may stop early when the doubly-exponential growth overflows.
    pub heights: Vec<u64>,
    pub gamma: f64,
    pub mu: f64,
    pub beta: f64,
    pub epsilon: f64,
    /// True when some branching factor floor(L^{gamma-1}) fell below 2.
    pub degenerate: bool,
}

fn floor_pow(base: u64, exponent: f64) -> u64 {
    let t = (base as f64).powf(exponent);
    let r = t.round();
    if (t - r).abs() < 1e-9 {
        r as u64
    } else {
        t.floor() as u64
    }
}

pub fn build_scales(
    l0: u64,
    h0: u64,
    epsilon: f64,
    k_max: usize,
    mode: ScaleMode,
) -> Result<ScaleHierarchy, ScaleError> {
    if l0 <= 1 || h0 <= 1 {
        return Err(ScaleError::BadInitialScale(l0, h0));
    }
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(ScaleError::BadEpsilon(epsilon));
    }
    let (gamma, mu) = match mode {
        ScaleMode::Derived => {
            let gamma = 1.0 + epsilon / (2.0 * (epsilon + 4.0));
            (gamma, 0.5 * (1.0 + 1.0 / gamma))
        }
        ScaleMode::Desk { gamma, mu } => {
            if !gamma.is_finite() || gamma <= 1.0 || !(mu > 0.0 && mu < 1.0) {
                return Err(ScaleError::BadOverrides);
            }
            (gamma, mu)
        }
    };
    let beta = 1.0 - epsilon / (8.0 * (epsilon + 4.0));

    let mut lengths = vec![l0];
    let mut heights = vec![h0];
    let mut degenerate = false;
    for k in 1..=k_max {
        let prev = lengths[k - 1];
        let branching = floor_pow(prev, gamma - 1.0).max(1);
        if branching < 2 {
            degenerate = true;
        }
        let next = prev.checked_mul(branching).ok_or(ScaleError::Overflow(k))?;
        lengths.push(next);
        if heights.len() == k {
            let grow = (lengths[k] as f64).powf(mu).exp();
            if grow < 9e18 {
                let factor = 2.0 * grow.ceil();
                let h = heights[k - 1] as f64 * factor;
                if h < 9e18 {
                    heights.push((heights[k - 1]) * (factor as u64));
                }
            }
        }
    }
    Ok(ScaleHierarchy {
        lengths,
        heights,
        gamma,
        mu,
        beta,
        epsilon,
        degenerate,
    })
}

impl ScaleHierarchy {
    pub fn branching(&self, k: usize) -> u64 {
        self.lengths[k] / self.lengths[k - 1]
    }
}

/// Good/bad flags per scale for all intervals fully inside the environment
/// window. `bad(k, j)` refers to the interval [j L_k, (j+1) L_k).
#[derive(Debug, Clone, Serialize)]
pub struct IntervalClassification {
    /// Per scale: (first interval index, flags).
    pub scales: Vec<(i64, Vec<bool>)>,
}

impl IntervalClassification {
    pub fn bad(&self, k: usize, j: i64) -> Option<bool> {
        let (off, flags) = self.scales.get(k)?;
        let idx = j - off;
        if idx < 0 || idx as usize >= flags.len() {
            None
        } else {
            Some(flags[idx as usize])
        }
    }

    pub fn levels(&self) -> usize {
        self.scales.len()
    }
}

fn div_floor(a: i64, b: i64) -> i64 {
    let mut q = a / b;
    if a % b != 0 && (a < 0) != (b < 0) {
        q -= 1;
    }
    q
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -div_floor(-a, b)
}

/// Classify intervals: bad at the bottom scale when missing renewal points,
/// bad at scale k when two non-consecutive bad children exist.
pub fn classify_intervals(
    env: &RenewalEnv,
    scales: &ScaleHierarchy,
    k_max: usize,
) -> Result<IntervalClassification, ScaleError> {
    let (lo, hi) = env.window;
    let l0 = scales.lengths[0] as i64;
    let j0_lo = div_ceil(lo, l0);
    let j0_hi = div_floor(hi, l0); // intervals [j, j+1) L0 with (j+1)L0 <= hi
    if j0_hi <= j0_lo {
        return Err(ScaleError::WindowTooSmall {
            have: env.window,
            need: (j0_lo * l0, (j0_lo + 1) * l0),
        });
    }
    let bottom: Vec<bool> = (j0_lo..j0_hi)
        .map(|j| !env.contains_point_in(j * l0, (j + 1) * l0))
        .collect();
    let mut out = vec![(j0_lo, bottom)];
    for k in 1..=k_max.min(scales.lengths.len() - 1) {
        let b = scales.branching(k) as i64;
        let (child_off, child_flags) = &out[k - 1];
        // parent j has children j*b .. (j+1)*b - 1; keep fully covered parents
        let j_lo = div_ceil(*child_off, b);
        let j_hi = div_floor(child_off + child_flags.len() as i64, b);
        if j_hi <= j_lo {
            break;
        }
        let flags: Vec<bool> = (j_lo..j_hi)
            .map(|j| {
                let mut first_bad: Option<i64> = None;
                let mut last_bad: Option<i64> = None;
                for i in (j * b)..((j + 1) * b) {
                    if child_flags[(i - child_off) as usize] {
                        if first_bad.is_none() {
                            first_bad = Some(i);
                        }
                        last_bad = Some(i);
                    }
                }
                matches!((first_bad, last_bad), (Some(a), Some(z)) if z - a >= 2)
            })
            .collect();
        out.push((j_lo, flags));
    }
    Ok(IntervalClassification { scales: out })
}

#[derive(Debug, Clone, Serialize)]
pub struct PkEstimate {
    pub k: usize,
    pub replicas: usize,
    pub estimate: f64,
    pub stderr: f64,
    /// L_k^{-epsilon/2}
    pub bound: f64,
    /// Exact bad-probability at the bottom scale (delay beyond L_0).
    pub exact_scale0: Option<f64>,
    pub pass: bool,
}

/// Monte Carlo frequency of "interval 0 at scale k is bad" under the
/// stationary one-sided law, with the exact value at scale 0.
pub fn p_k_estimate(
    law: &GapLaw,
    scales: &ScaleHierarchy,
    k: usize,
    replicas: usize,
    seed: u64,
) -> Result<PkEstimate, ScaleError> {
    law.validate()?;
    let l_k = scales.lengths[k] as i64;
    let mut bad_count = 0usize;
    for r in 0..replicas {
        let env = sample_renewal(
            law,
            RenewalMode::StationaryDelay,
            (0, l_k),
            stream_seed(seed, tag::REPLICA, r as u64),
        )?;
        let cls = classify_intervals(&env, scales, k)?;
        if cls.bad(k, 0) == Some(true) {
            bad_count += 1;
        }
    }
    let estimate = bad_count as f64 / replicas as f64;
    let stderr = (estimate * (1.0 - estimate) / replicas as f64).sqrt();
    let bound = (scales.lengths[k] as f64).powf(-scales.epsilon / 2.0);
    let exact_scale0 = if k == 0 {
        Some(stationary_delay_pmf(law)?.tail_at_least(scales.lengths[0]))
    } else {
        None
    };
    Ok(PkEstimate {
        k,
        replicas,
        estimate,
        stderr,
        bound,
        exact_scale0,
        pass: estimate <= bound + 3.0 * stderr,
    })
}

/// Shared-uniform coupling check: a stochastically denser law never turns a
/// good interval bad. Returns the number of coupled replicas where the
/// implication held (should equal `replicas`).
pub fn density_coupling_check(
    sparse: &GapLaw,
    dense: &GapLaw,
    scales: &ScaleHierarchy,
    k: usize,
    replicas: usize,
    seed: u64,
) -> Result<usize, ScaleError> {
    let l_k = scales.lengths[k] as i64;
    let mut ok = 0usize;
    for r in 0..replicas {
        let mut rng = chacha(seed, tag::REPLICA, r as u64);
        // shared uniforms drive both laws through the same inverse transform
        let us: Vec<f64> = (0..(2 * l_k as usize + 4))
            .map(|_| rng.gen::<f64>())
            .collect();
        let build = |law: &GapLaw| -> RenewalEnv {
            let mut points = Vec::new();
            let mut x = 0i64;
            let mut i = 0usize;
            while x < l_k {
                points.push(x);
                x += law.sample_from_unit(us[i]) as i64;
                i += 1;
            }
            RenewalEnv {
                points,
                window: (0, l_k),
                mode: RenewalMode::OriginStarted,
                law: law.clone(),
            }
        };
        let env_sparse = build(sparse);
        let env_dense = build(dense);
        let bad_sparse = classify_intervals(&env_sparse, scales, k)?
            .bad(k, 0)
            .unwrap_or(true);
        let bad_dense = classify_intervals(&env_dense, scales, k)?
            .bad(k, 0)
            .unwrap_or(true);
        // denser law bad => sparser law bad
        if !bad_dense || bad_sparse {
            ok += 1;
        }
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn desk_recursion_examples() {
        let s = build_scales(
            100,
            2,
            0.5,
            2,
            ScaleMode::Desk {
                gamma: 1.5,
                mu: 0.5,
            },
        )
        .unwrap();
        assert_eq!(s.lengths, vec![100, 1000, 31_000]);

        // L0 = 4 with branching 1 keeps L constant; H1 = 2 ceil(e^2) H0 = 32
        let s = build_scales(
            4,
            2,
            0.5,
            1,
            ScaleMode::Desk {
                gamma: 1.1,
                mu: 0.5,
            },
        )
        .unwrap();
        assert!(s.degenerate);
        assert_eq!(s.lengths, vec![4, 4]);
        assert_eq!(s.heights, vec![2, 32]);
    }

    #[test]
    fn derived_mode_parameters() {
        let s = build_scales(1 << 20, 2, 0.4, 0, ScaleMode::Derived).unwrap();
        assert_abs_diff_eq!(s.gamma, 1.0 + 0.4 / 8.8, epsilon = 1e-12);
        assert_abs_diff_eq!(s.mu, 0.5 * (1.0 + 1.0 / s.gamma), epsilon = 1e-12);
        assert_abs_diff_eq!(s.beta, 1.0 - 0.4 / 35.2, epsilon = 1e-12);
    }

    #[test]
    fn recursion_is_reproducible() {
        let a = build_scales(16, 4, 4.0, 6, ScaleMode::Derived).unwrap();
        let b = build_scales(16, 4, 4.0, 6, ScaleMode::Derived).unwrap();
        assert_eq!(a.lengths, b.lengths);
        assert_eq!(a.heights, b.heights);
        for k in 1..a.lengths.len() {
            assert_eq!(
                a.lengths[k],
                a.lengths[k - 1] * floor_pow(a.lengths[k - 1], a.gamma - 1.0).max(1)
            );
        }
    }

    #[test]
    fn full_line_is_good_at_every_scale() {
        let scales = build_scales(
            4,
            4,
            1.0,
            3,
            ScaleMode::Desk {
                gamma: 1.6,
                mu: 0.4,
            },
        )
        .unwrap();
        let top = *scales.lengths.last().unwrap() as i64;
        let env = sample_renewal(
            &GapLaw::constant(1),
            RenewalMode::OriginStarted,
            (0, 2 * top),
            3,
        )
        .unwrap();
        let cls = classify_intervals(&env, &scales, 3).unwrap();
        for k in 0..cls.levels() {
            let (_, flags) = &cls.scales[k];
            assert!(flags.iter().all(|&b| !b), "scale {k}");
        }
    }

    #[test]
    fn bottom_scale_rule() {
        let scales = build_scales(
            4,
            4,
            1.0,
            0,
            ScaleMode::Desk {
                gamma: 1.6,
                mu: 0.4,
            },
        )
        .unwrap();
        // points only at >= 4: interval [0,4) is bad
        let env = RenewalEnv {
            points: vec![4, 5, 6, 7, 8, 9, 10, 11],
            window: (0, 12),
            mode: RenewalMode::OriginStarted,
            law: GapLaw::constant(1),
        };
        let cls = classify_intervals(&env, &scales, 0).unwrap();
        assert_eq!(cls.bad(0, 0), Some(true));
        assert_eq!(cls.bad(0, 1), Some(false));
    }

    #[test]
    fn two_nonconsecutive_rule() {
        // branching 4 at scale 1: children offsets {0,2} bad -> parent bad;
        // {1,2} bad (consecutive) -> parent good
        let scales = build_scales(
            4,
            4,
            1.0,
            1,
            ScaleMode::Desk {
                gamma: 1.5,
                mu: 0.4,
            },
        )
        .unwrap();
        assert_eq!(scales.branching(1), 2);
        // need branching >= 3; use gamma that gives floor(4^{0.8}) = 3
        let scales = build_scales(
            4,
            4,
            1.0,
            1,
            ScaleMode::Desk {
                gamma: 1.8,
                mu: 0.4,
            },
        )
        .unwrap();
        assert_eq!(scales.branching(1), 3);
        let mk = |bad_children: &[i64]| RenewalEnv {
            points: (0..12)
                .filter(|x| !bad_children.contains(&(x / 4)))
                .collect(),
            window: (0, 12),
            mode: RenewalMode::OriginStarted,
            law: GapLaw::constant(1),
        };
        let cls = classify_intervals(&mk(&[0, 2]), &scales, 1).unwrap();
        assert_eq!(cls.bad(1, 0), Some(true));
        let cls = classify_intervals(&mk(&[1, 2]), &scales, 1).unwrap();
        assert_eq!(cls.bad(1, 0), Some(false));
    }

    #[test]
    fn good_parent_has_consecutive_bad_children_only() {
        let scales = build_scales(
            4,
            4,
            1.0,
            2,
            ScaleMode::Desk {
                gamma: 1.8,
                mu: 0.4,
            },
        )
        .unwrap();
        for seed in 0..50 {
            let top = *scales.lengths.last().unwrap() as i64;
            let env = sample_renewal(
                &GapLaw::ShiftedGeometric {
                    shift: 1,
                    success: 0.25,
                },
                RenewalMode::OriginStarted,
                (0, 2 * top),
                seed,
            )
            .unwrap();
            let cls = classify_intervals(&env, &scales, 2).unwrap();
            for k in 1..cls.levels() {
                let b = scales.branching(k) as i64;
                let (off, flags) = cls.scales[k].clone();
                for (idx, &parent_bad) in flags.iter().enumerate() {
                    if parent_bad {
                        continue;
                    }
                    let j = off + idx as i64;
                    let bads: Vec<i64> = ((j * b)..((j + 1) * b))
                        .filter(|&i| cls.bad(k - 1, i) == Some(true))
                        .collect();
                    assert!(
                        bads.len() <= 2,
                        "good parent with {} bad children",
                        bads.len()
                    );
                    if bads.len() == 2 {
                        assert_eq!(bads[1] - bads[0], 1);
                    }
                }
            }
        }
    }

    #[test]
    fn constant_gap_gives_zero_pk() {
        let scales = build_scales(
            4,
            4,
            1.0,
            2,
            ScaleMode::Desk {
                gamma: 1.8,
                mu: 0.4,
            },
        )
        .unwrap();
        for k in 0..=2 {
            let est = p_k_estimate(&GapLaw::constant(1), &scales, k, 200, 9).unwrap();
            assert_eq!(est.estimate, 0.0);
            assert!(est.pass);
        }
    }

    #[test]
    fn exact_scale0_matches_monte_carlo() {
        let law = GapLaw::ShiftedGeometric {
            shift: 1,
            success: 0.5,
        };
        let scales = build_scales(
            4,
            4,
            1.0,
            0,
            ScaleMode::Desk {
                gamma: 1.5,
                mu: 0.4,
            },
        )
        .unwrap();
        let est = p_k_estimate(&law, &scales, 0, 40_000, 21).unwrap();
        let exact = est.exact_scale0.unwrap();
        assert_abs_diff_eq!(exact, 0.0625, epsilon = 1e-12); // 2^{-L0}
        assert!(
            (est.estimate - exact).abs() <= 3.0 * est.stderr.max(1e-4),
            "estimate {} vs exact {exact}",
            est.estimate
        );
    }

    #[test]
    fn density_coupling_is_exact() {
        let scales = build_scales(
            4,
            4,
            1.0,
            1,
            ScaleMode::Desk {
                gamma: 1.8,
                mu: 0.4,
            },
        )
        .unwrap();
        let sparse = GapLaw::ShiftedGeometric {
            shift: 1,
            success: 0.3,
        };
        let dense = GapLaw::ShiftedGeometric {
            shift: 1,
            success: 0.7,
        };
        let ok = density_coupling_check(&sparse, &dense, &scales, 1, 500, 3).unwrap();
        assert_eq!(ok, 500);
    }
}
