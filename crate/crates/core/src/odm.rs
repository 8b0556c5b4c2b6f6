//! Opinion dynamics update rules.

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BcmParams {
    /// Confidence bound: opinions further apart than this do not interact.
    pub confidence: f64,
    /// Fraction of the gap closed per interaction.
    pub convergence: f64,
}

impl Default for BcmParams {
    fn default() -> Self {
        Self {
            confidence: 0.2,
            convergence: 0.2,
        }
    }
}

impl BcmParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidArgument(format!(
                "BCM confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        if !(0.0..=0.5).contains(&self.convergence) {
            return Err(Error::InvalidArgument(format!(
                "BCM convergence {} outside [0, 0.5]",
                self.convergence
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpistemicParams {
    /// Success-probability advantage of the novel action over 0.5.
    pub gain: f64,
    /// Experiments per agent per time step.
    pub trials: u32,
    /// Also update each agent on its own experiment at the start of its turn.
    #[serde(default)]
    pub self_update: bool,
}

impl Default for EpistemicParams {
    fn default() -> Self {
        Self {
            gain: 0.005,
            trials: 15,
            self_update: false,
        }
    }
}

impl EpistemicParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain <= 0.5) {
            return Err(Error::InvalidArgument(format!(
                "epistemic gain {} outside (0, 0.5]",
                self.gain
            )));
        }
        if self.trials == 0 {
            return Err(Error::InvalidArgument("epistemic trials must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    /// The known action, success probability 0.5.
    Known,
    /// The novel action, success probability 0.5 + gain.
    Novel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutcome {
    pub action: Action,
    /// Number of successes out of `trials`; `trials / 2` for the known action.
    pub successes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OpinionModel {
    Bcm(BcmParams),
    Epistemic(EpistemicParams),
}

impl OpinionModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            OpinionModel::Bcm(p) => p.validate(),
            OpinionModel::Epistemic(p) => p.validate(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            OpinionModel::Bcm(_) => "bcm",
            OpinionModel::Epistemic(_) => "epistemic",
        }
    }

    /// Default number of time steps for this model.
    pub fn default_steps(&self) -> usize {
        match self {
            OpinionModel::Bcm(_) => 5000,
            OpinionModel::Epistemic(_) => 100,
        }
    }
}

pub fn bcm_update(o_u: f64, o_v: f64, params: &BcmParams) -> f64 {
    if (o_u - o_v).abs() < params.confidence {
        (o_u + params.convergence * (o_v - o_u)).clamp(0.0, 1.0)
    } else {
        o_u
    }
}

/// An agent with belief above one half takes the novel action.
pub fn epistemic_experiment<R: Rng + ?Sized>(
    o_u: f64,
    params: &EpistemicParams,
    rng: &mut R,
) -> ExperimentOutcome {
    if o_u <= 0.5 {
        ExperimentOutcome {
            action: Action::Known,
            successes: params.trials as f64 / 2.0,
        }
    } else {
        let p = (0.5 + params.gain).min(1.0);
        let k = Binomial::new(params.trials as u64, p)
            .expect("p validated in [0.5, 1]")
            .sample(rng);
        ExperimentOutcome {
            action: Action::Novel,
            successes: k as f64,
        }
    }
}

const BELIEF_GUARD: f64 = 1e-12;

/// Bayesian posterior after observing `outcome`. Beliefs of exactly 0 or 1
/// are absorbing.
pub fn epistemic_update(o_u: f64, outcome: &ExperimentOutcome, params: &EpistemicParams) -> f64 {
    if o_u <= 0.0 {
        return 0.0;
    }
    if o_u >= 1.0 {
        return 1.0;
    }
    let exponent = 2.0 * outcome.successes - params.trials as f64;
    if exponent == 0.0 {
        return o_u;
    }
    let o = o_u.clamp(BELIEF_GUARD, 1.0 - BELIEF_GUARD);
    let likelihood = ((0.5 - params.gain) / (0.5 + params.gain)).powf(exponent);
    let posterior = 1.0 / (1.0 + (1.0 - o) / o * likelihood);
    posterior.clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_stream;
    use proptest::prelude::*;

    #[test]
    fn bcm_fixtures() {
        let p = BcmParams {
            confidence: 0.2,
            convergence: 0.2,
        };
        assert_eq!(bcm_update(0.5, 0.5, &p), 0.5);
        assert!((bcm_update(0.2, 0.3, &p) - 0.22).abs() < 1e-12);
        assert_eq!(bcm_update(0.1, 0.9, &p), 0.1);
    }

    #[test]
    fn known_action_yields_half_trials() {
        let p = EpistemicParams {
            gain: 0.005,
            trials: 15,
            self_update: false,
        };
        let mut rng = rng_stream(1, 0, "t");
        let out = epistemic_experiment(0.3, &p, &mut rng);
        assert_eq!(out.action, Action::Known);
        assert_eq!(out.successes, 7.5);
        // Tie goes to the known action.
        assert_eq!(epistemic_experiment(0.5, &p, &mut rng).action, Action::Known);
    }

    #[test]
    fn certain_success() {
        let p = EpistemicParams {
            gain: 0.5,
            trials: 10,
            self_update: false,
        };
        let mut rng = rng_stream(1, 0, "t");
        let out = epistemic_experiment(0.8, &p, &mut rng);
        assert_eq!(out.action, Action::Novel);
        assert_eq!(out.successes, 10.0);
    }

    #[test]
    fn binomial_sample_mean() {
        let p = EpistemicParams {
            gain: 0.005,
            trials: 15,
            self_update: false,
        };
        let mut rng = rng_stream(2, 0, "binomial");
        let n = 100_000;
        let mean = (0..n)
            .map(|_| epistemic_experiment(0.8, &p, &mut rng).successes)
            .sum::<f64>()
            / n as f64;
        assert!((7.50..=7.65).contains(&mean), "mean {mean}");
    }

    #[test]
    fn bayes_fixtures() {
        let p = EpistemicParams {
            gain: 0.25,
            trials: 2,
            self_update: false,
        };
        let out = ExperimentOutcome {
            action: Action::Novel,
            successes: 2.0,
        };
        // 1 / (1 + 1 * (1/3)^2)
        assert!((epistemic_update(0.5, &out, &p) - 0.9).abs() < 1e-12);
        assert_eq!(epistemic_update(1.0, &out, &p), 1.0);
        assert_eq!(epistemic_update(0.0, &out, &p), 0.0);
        let neutral = ExperimentOutcome {
            action: Action::Novel,
            successes: 1.0,
        };
        assert_eq!(epistemic_update(0.37, &neutral, &p), 0.37);
    }

    #[test]
    fn extreme_gain_does_not_produce_nan() {
        let p = EpistemicParams {
            gain: 0.5,
            trials: 4,
            self_update: false,
        };
        for k in 0..=4 {
            let out = ExperimentOutcome {
                action: Action::Novel,
                successes: k as f64,
            };
            let post = epistemic_update(0.3, &out, &p);
            assert!((0.0..=1.0).contains(&post));
        }
    }

    proptest! {
        #[test]
        fn bcm_contracts_toward_partner(o_u in 0.0f64..=1.0, o_v in 0.0f64..=1.0,
                                        eps in 0.0f64..=1.0, mu in 0.0f64..=0.5) {
            let p = BcmParams { confidence: eps, convergence: mu };
            let new = bcm_update(o_u, o_v, &p);
            prop_assert!((0.0..=1.0).contains(&new));
            if (o_u - o_v).abs() < eps {
                prop_assert!(((new - o_v).abs() - (1.0 - mu) * (o_u - o_v).abs()).abs() < 1e-12);
                prop_assert!(new >= o_u.min(o_v) - 1e-15 && new <= o_u.max(o_v) + 1e-15);
            } else {
                prop_assert_eq!(new, o_u);
            }
        }

        #[test]
        fn bayes_monotone_in_successes(o in 0.0f64..=1.0, gain in 0.001f64..=0.5,
                                       trials in 1u32..30, k in 0u32..30) {
            let k = k.min(trials);
            let p = EpistemicParams { gain, trials, self_update: false };
            let at = |k: u32| epistemic_update(o, &ExperimentOutcome { action: Action::Novel, successes: k as f64 }, &p);
            let lo = at(k);
            prop_assert!((0.0..=1.0).contains(&lo));
            if k < trials {
                prop_assert!(at(k + 1) >= lo);
            }
        }

        #[test]
        fn half_trials_is_identity(o in 0.0f64..1.0, gain in 0.001f64..=0.5, half in 1u32..10) {
            let p = EpistemicParams { gain, trials: 2 * half, self_update: false };
            let out = ExperimentOutcome { action: Action::Novel, successes: half as f64 };
            prop_assert_eq!(epistemic_update(o, &out, &p), o);
        }
    }
}
