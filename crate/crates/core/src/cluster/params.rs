//! Block geometry and threshold calibration for the pairwise test.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::channel::ChannelParams;
use crate::error::{Error, Result};

/// Grid used by [`calibrate_thresholds`]: beta in (0, BETA_MAX] with step BETA_STEP.
pub const BETA_STEP: f64 = 1e-4;
pub const BETA_MAX: f64 = 6.0;

/// Thresholds for the pairwise test.
///
/// A block is "deviating" when `|Z - Z'| >= beta * sqrt(2t)`; a pair is
/// reported different when at least `gamma * s_tilde` blocks deviate.
/// `margin` is half the gap between the two Gaussian tail probabilities the
/// thresholds separate; it has no runtime role.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub t: usize,
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub margin: f64,
}

impl Calibration {
    /// Tail probability `Pr[|N(0, m)| >= beta sqrt(m)]` for independent sources.
    pub fn tail_independent(&self) -> f64 {
        gaussian_two_sided_tail(self.beta, 1.0)
    }

    /// Tail probability with only `(1 - tau) m` variance left (same source).
    pub fn tail_shared(&self) -> f64 {
        gaussian_two_sided_tail(self.beta, 1.0 - self.tau)
    }
}

/// `Pr[|N(0, var_ratio * m)| >= beta * sqrt(m)]`.
fn gaussian_two_sided_tail(beta: f64, var_ratio: f64) -> f64 {
    erfc(beta / (2.0 * var_ratio).sqrt())
}

/// Picks `beta` on a fixed grid to maximise `f(beta) - g(beta)` where
/// `f(beta) = Pr[|N(0, 2t)| >= beta sqrt(2t)]` and
/// `g(beta) = Pr[|N(0, (1 - tau) 2t)| >= beta sqrt(2t)]`, then places `gamma`
/// midway between them.
pub fn calibrate_thresholds(t: usize, tau: f64) -> Result<Calibration> {
    if t == 0 {
        return Err(Error::param("block length t must be >= 1"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::param(format!("tau = {tau} must lie in (0, 1)")));
    }
    let steps = (BETA_MAX / BETA_STEP).round() as usize;
    let mut best = (0.0, f64::NEG_INFINITY, 0.0, 0.0);
    for k in 1..=steps {
        let beta = k as f64 * BETA_STEP;
        let f = gaussian_two_sided_tail(beta, 1.0);
        let g = gaussian_two_sided_tail(beta, 1.0 - tau);
        if f - g > best.1 {
            best = (beta, f - g, f, g);
        }
    }
    let (beta, _, f, g) = best;
    let margin = (f - g) / 2.0;
    if margin <= 0.0 || !margin.is_finite() {
        return Err(Error::Calibration { margin });
    }
    Ok(Calibration {
        t,
        tau,
        beta,
        gamma: (f + g) / 2.0,
        margin,
    })
}

/// Monte Carlo tail estimates for sums of uniform +-1 variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Summands in the independent-source case, `2t`.
    pub m: u64,
    /// Summands in the shared-source case, `floor((1 - tau) 2t)`.
    pub m_shared: u64,
    pub samples: usize,
    pub tail_independent: f64,
    pub tail_shared: f64,
}

impl TailEstimate {
    /// True when both estimates sit at least `gap` away from gamma on the
    /// correct side.
    pub fn straddles(&self, cal: &Calibration, gap: f64) -> bool {
        self.tail_independent >= cal.gamma + gap && self.tail_shared <= cal.gamma - gap
    }
}

/// Estimates `Pr[|X_1 + ... + X_k| >= beta sqrt(2t)]` for `k = 2t` and
/// `k = floor((1 - tau) 2t)`. The sum of `k` uniform +-1 variables is sampled
/// exactly as `2 Bin(k, 1/2) - k`.
pub fn estimate_tails<R: Rng + ?Sized>(cal: &Calibration, samples: usize, rng: &mut R) -> Result<TailEstimate> {
    let m = 2 * cal.t as u64;
    let m_shared = ((1.0 - cal.tau) * m as f64).floor() as u64;
    let threshold = cal.beta * (m as f64).sqrt();
    let tail = |k: u64, rng: &mut R| -> Result<f64> {
        let bin = Binomial::new(k, 0.5).map_err(|e| Error::param(e.to_string()))?;
        let hits = (0..samples)
            .filter(|_| {
                let sum = 2 * bin.sample(rng) as i64 - k as i64;
                sum.unsigned_abs() as f64 >= threshold
            })
            .count();
        Ok(hits as f64 / samples as f64)
    };
    Ok(TailEstimate {
        m,
        m_shared,
        samples,
        tail_independent: tail(m, rng)?,
        tail_shared: tail(m_shared, rng)?,
    })
}

/// Geometry and thresholds of the pairwise block-sum test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterParams {
    pub n: usize,
    pub alpha: f64,
    /// Block length.
    pub t: usize,
    /// Number of blocks.
    pub s_tilde: usize,
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub margin: f64,
}

impl ClusterParams {
    /// Explicit geometry, for experiments and tests. Enforces the same
    /// invariants as [`derive_params`].
    pub fn new(n: usize, alpha: f64, t: usize, s_tilde: usize, cal: Calibration) -> Result<Self> {
        let params = Self {
            n,
            alpha,
            t,
            s_tilde,
            tau: cal.tau,
            beta: cal.beta,
            gamma: cal.gamma,
            margin: cal.margin,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(Error::param("block length t must be >= 1"));
        }
        if self.s_tilde == 0 {
            return Err(Error::InstanceTooSmall {
                n: self.n,
                alpha: self.alpha,
                min_n: min_viable_n(self.alpha),
            });
        }
        if (2 * self.s_tilde * self.t) as f64 > self.alpha * self.n as f64 / 2.0 {
            return Err(Error::param(format!(
                "blocks span {} positions, beyond alpha n / 2 = {}",
                2 * self.s_tilde * self.t,
                self.alpha * self.n as f64 / 2.0
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) || !(self.beta > 0.0) || !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::param("need tau, gamma in (0, 1) and beta > 0"));
        }
        Ok(())
    }

    /// `beta * sqrt(2t)`.
    pub fn deviation_threshold(&self) -> f64 {
        self.beta * ((2 * self.t) as f64).sqrt()
    }

    /// `gamma * s_tilde`; a count at or above this means "different".
    pub fn count_threshold(&self) -> f64 {
        self.gamma * self.s_tilde as f64
    }

    /// Trace positions that influence the verdict: `2 s_tilde t`.
    pub fn span(&self) -> usize {
        2 * self.s_tilde * self.t
    }

    pub fn calibration(&self) -> Calibration {
        Calibration {
            t: self.t,
            tau: self.tau,
            beta: self.beta,
            gamma: self.gamma,
            margin: self.margin,
        }
    }
}

/// `floor(n^(2/3))`, computed exactly.
pub fn block_length(n: usize) -> usize {
    let target = (n as u128) * (n as u128);
    let mut t = (target as f64).cbrt() as u128;
    while t * t * t > target {
        t -= 1;
    }
    while (t + 1) * (t + 1) * (t + 1) <= target {
        t += 1;
    }
    t as usize
}

fn block_count(n: usize, t: usize, alpha: f64) -> usize {
    if t == 0 {
        return 0;
    }
    (alpha * n as f64 / (4.0 * t as f64)).floor() as usize
}

/// Smallest n with at least one complete block at the given alpha.
pub fn min_viable_n(alpha: f64) -> usize {
    if !(alpha > 0.0) {
        return usize::MAX;
    }
    // alpha n >= 4 t ~ 4 n^(2/3) gives n ~ (4 / alpha)^3; scan up from below.
    let estimate = (4.0 / alpha).powi(3);
    let mut n = ((estimate * 0.5).floor() as usize).max(1);
    loop {
        if block_count(n, block_length(n), alpha) >= 1 {
            return n;
        }
        n += 1;
    }
}

/// Block geometry `t = floor(n^(2/3))`, `s_tilde = floor(alpha n / (4t))`,
/// overlap fraction `tau = 0.7 p p_ins`, and calibrated thresholds.
pub fn derive_params(n: usize, channel: &ChannelParams) -> Result<ClusterParams> {
    if n == 0 {
        return Err(Error::param("n must be >= 1"));
    }
    let alpha = channel.alpha();
    let t = block_length(n);
    let s_tilde = block_count(n, t, alpha);
    if s_tilde == 0 {
        return Err(Error::InstanceTooSmall {
            n,
            alpha,
            min_n: min_viable_n(alpha),
        });
    }
    let tau = 0.7 * channel.p() * channel.p_ins();
    let cal = calibrate_thresholds(t, tau)?;
    ClusterParams::new(n, alpha, t, s_tilde, cal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedTree;

    #[test]
    fn block_length_is_exact_floor() {
        assert_eq!(block_length(1_000_000), 10_000);
        assert_eq!(block_length(64), 16);
        assert_eq!(block_length(100_000), 2154);
        assert_eq!(block_length(10_000), 464);
        assert_eq!(block_length(1), 1);
        for n in 1..5000usize {
            let t = block_length(n) as u128;
            let sq = (n as u128).pow(2);
            assert!(t.pow(3) <= sq && (t + 1).pow(3) > sq);
        }
    }

    #[test]
    fn derive_params_large_n() {
        let c = ChannelParams::noiseless();
        let p = derive_params(1_000_000, &c).unwrap();
        assert_eq!((p.t, p.s_tilde), (10_000, 25));
        assert!(2 * p.s_tilde * p.t <= 500_000);
    }

    #[test]
    fn derive_params_tau() {
        let c = ChannelParams::new(0.1, 0.1).unwrap();
        let p = derive_params(100_000, &c).unwrap();
        assert!((p.tau - 0.567).abs() < 1e-12);
        assert_eq!((p.t, p.s_tilde), (2154, 11));
    }

    #[test]
    fn smallest_accepted_instance() {
        let p = derive_params(64, &ChannelParams::noiseless()).unwrap();
        assert_eq!((p.t, p.s_tilde), (16, 1));
        // brute-force the threshold at alpha = 1
        let first = (1..200).find(|&n| derive_params(n, &ChannelParams::noiseless()).is_ok()).unwrap();
        assert_eq!(min_viable_n(1.0), first);
        match derive_params(first - 1, &ChannelParams::noiseless()) {
            Err(Error::InstanceTooSmall { min_n, .. }) => assert_eq!(min_n, first),
            other => panic!("expected InstanceTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn too_small_names_minimal_n() {
        let c = ChannelParams::new(0.15, 0.0).unwrap();
        let err = derive_params(12, &c).unwrap_err();
        let Error::InstanceTooSmall { min_n, .. } = err else {
            panic!("{err:?}")
        };
        assert!(derive_params(min_n, &c).is_ok());
        assert!(derive_params(min_n - 1, &c).is_err());
    }

    #[test]
    fn calibration_gap_at_reference_tau() {
        let cal = calibrate_thresholds(2154, 0.567).unwrap();
        let (f, g) = (cal.tail_independent(), cal.tail_shared());
        assert!(f - g > 0.1, "gap {}", f - g);
        assert!((cal.gamma - (f + g) / 2.0).abs() < 1e-12);
        assert!((cal.margin - (f - g) / 2.0).abs() < 1e-12);
        // stationary point of erfc(b/sqrt2) - erfc(b/sqrt(2(1-tau))):
        // b^2 = -(1 - tau) ln(1 - tau) / tau
        let b_star = (-(1.0f64 - 0.567) * (1.0f64 - 0.567).ln() / 0.567).sqrt();
        assert!((cal.beta - b_star).abs() < 2.0 * BETA_STEP, "{} vs {b_star}", cal.beta);
    }

    #[test]
    fn calibration_is_deterministic() {
        assert_eq!(calibrate_thresholds(1000, 0.4).unwrap(), calibrate_thresholds(1000, 0.4).unwrap());
    }

    #[test]
    fn margin_vanishes_as_tau_shrinks() {
        let m: Vec<f64> = [0.5, 0.1, 0.01, 0.001]
            .iter()
            .map(|&tau| calibrate_thresholds(100, tau).unwrap().margin)
            .collect();
        assert!(m.windows(2).all(|w| w[1] < w[0]));
        assert!(m[3] < 1e-3);
    }

    #[test]
    fn tail_is_decreasing_in_beta() {
        let mut last = 1.0;
        for k in 1..100 {
            let f = gaussian_two_sided_tail(k as f64 * 0.05, 1.0);
            assert!(f < last);
            last = f;
        }
    }

    #[test]
    fn calibration_rejects_bad_input() {
        assert!(calibrate_thresholds(0, 0.5).is_err());
        assert!(calibrate_thresholds(10, 0.0).is_err());
        assert!(calibrate_thresholds(10, 1.0).is_err());
    }

    #[test]
    fn monte_carlo_tails_straddle_gamma() {
        let cal = calibrate_thresholds(1000, 0.567).unwrap();
        let mut rng = SeedTree::new(8).stream("tails", 0);
        let est = estimate_tails(&cal, 200_000, &mut rng).unwrap();
        assert!(est.straddles(&cal, cal.margin / 2.0), "{est:?} vs {cal:?}");
    }
}
