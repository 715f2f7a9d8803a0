use serde::{Deserialize, Serialize};

use super::PipelineConfig;
use crate::error::{Error, Result};

pub const DEFAULT_BUDGET_CAP: usize = 1_000_000;

/// Number of traces drawn in Step 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceBudget {
    Explicit {
        traces: usize,
    },
    /// `ceil((s/eps^2) c_t exp(c_e (ln max{n, 2s/delta_hard})^(1/3)) ln(3s/delta_fail))`,
    /// refused above `cap`.
    Formula {
        #[serde(default = "one")]
        c_t: f64,
        #[serde(default = "one")]
        c_e: f64,
        #[serde(default = "default_cap")]
        cap: usize,
    },
}

fn one() -> f64 {
    1.0
}

fn default_cap() -> usize {
    DEFAULT_BUDGET_CAP
}

impl Default for TraceBudget {
    fn default() -> Self {
        TraceBudget::Formula {
            c_t: 1.0,
            c_e: 1.0,
            cap: DEFAULT_BUDGET_CAP,
        }
    }
}

impl TraceBudget {
    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            TraceBudget::Explicit { traces: 0 } => Err(Error::param("trace count must be positive")),
            TraceBudget::Formula { c_t, c_e, cap } => {
                if !(c_t > 0.0 && c_t.is_finite() && c_e >= 0.0 && c_e.is_finite()) {
                    return Err(Error::param(format!("budget constants must be positive, got c_t={c_t} c_e={c_e}")));
                }
                if cap == 0 {
                    return Err(Error::param("budget cap must be positive"));
                }
                Ok(())
            }
            TraceBudget::Explicit { .. } => Ok(()),
        }
    }
}

/// The unrounded budget formula. Logarithms are natural.
pub fn budget_formula(n: usize, s: usize, eps: f64, delta_hard: f64, delta_fail: f64, c_t: f64, c_e: f64) -> f64 {
    let s = s as f64;
    let inner = (n as f64).max(2.0 * s / delta_hard).ln();
    (s / (eps * eps)) * c_t * (c_e * inner.cbrt()).exp() * (3.0 * s / delta_fail).ln()
}

pub fn compute_trace_budget(cfg: &PipelineConfig) -> Result<usize> {
    cfg.budget.validate()?;
    match cfg.budget {
        TraceBudget::Explicit { traces } => Ok(traces),
        TraceBudget::Formula { c_t, c_e, cap } => {
            let t = budget_formula(cfg.n, cfg.s, cfg.eps, cfg.delta_hard, cfg.delta_fail, c_t, c_e);
            // absorb rounding in exact products before taking the ceiling
            let rounded = (t - 1e-9 * t.max(1.0)).ceil();
            if !(rounded <= cap as f64) {
                return Err(Error::BudgetExceeded { requested: t, cap });
            }
            Ok((rounded as usize).max(1))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ChannelParams;

    #[test]
    fn unit_log_term_leaves_exp_factor() {
        // s = 1, eps = 1 and delta_fail = 3/e make every other factor 1
        let delta_fail = 3.0 / std::f64::consts::E;
        for n in [2usize, 10, 1000, 100_000] {
            let t = budget_formula(n, 1, 1.0, 1.0, delta_fail, 1.0, 1.0);
            let expected = ((n as f64).max(2.0)).ln().cbrt().exp();
            assert!((t - expected).abs() < 1e-12 * expected, "{n}: {t} vs {expected}");
        }
    }

    #[test]
    fn support_over_eps_squared_scales() {
        // s/eps^2 = 64 for s = 4, eps = 0.25; hold the other factors fixed by
        // pinning n above 2s/delta_hard and delta_fail so ln(3s/delta_fail) = 1
        let base = budget_formula(1000, 1, 1.0, 0.5, 3.0 / std::f64::consts::E, 1.0, 1.0);
        let big = budget_formula(1000, 4, 0.25, 0.5, 12.0 / std::f64::consts::E, 1.0, 1.0);
        assert!((big / base - 64.0).abs() < 1e-9);
    }

    #[test]
    fn desk_scale_budget() {
        // n = 1e5, s = 5, eps = 0.2, deltas 0.1: 125 * exp(ln(1e5)^(1/3)) * ln 150
        let cfg = PipelineConfig::new(100_000, 5, 0.2, ChannelParams::new(0.1, 0.1).unwrap());
        let t = compute_trace_budget(&cfg).unwrap();
        let expected = 125.0 * (100_000f64).ln().cbrt().exp() * 150f64.ln();
        assert_eq!(t, expected.ceil() as usize);
        assert!((5900..6100).contains(&t), "{t}");
    }

    #[test]
    fn cap_is_an_error() {
        let cfg = PipelineConfig {
            budget: TraceBudget::Formula {
                c_t: 1.0,
                c_e: 1.0,
                cap: 100,
            },
            ..PipelineConfig::new(1000, 5, 0.2, ChannelParams::noiseless())
        };
        assert!(matches!(compute_trace_budget(&cfg), Err(Error::BudgetExceeded { cap: 100, .. })));
    }

    #[test]
    fn explicit_budget() {
        let cfg = PipelineConfig {
            budget: TraceBudget::Explicit { traces: 600 },
            ..PipelineConfig::new(12, 3, 0.25, ChannelParams::noiseless())
        };
        assert_eq!(compute_trace_budget(&cfg).unwrap(), 600);
    }
}
