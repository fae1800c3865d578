//! Agent and contract parameters, utilities, and the breach amount exchanged
//! at the first default.

use serde::{Deserialize, Serialize};

use crate::curves::{PiecewiseConstant, PiecewiseVector};
use crate::error::{EngineError, Result};

/// Exponent magnitude beyond which `exp` is clamped. Exponential utilities on
/// Gaussian-driven states can overflow on extreme paths; clamped paths are
/// counted and reported, never dropped.
pub const EXP_CLAMP: f64 = 700.0;

/// `exp` with clamped argument; sets `clamped` when the guard fires.
#[inline]
pub fn clamped_exp(e: f64, clamped: &mut bool) -> f64 {
    if e.abs() > EXP_CLAMP {
        *clamped = true;
        e.clamp(-EXP_CLAMP, EXP_CLAMP).exp()
    } else {
        e.exp()
    }
}

#[inline]
pub fn positive_part(x: f64) -> f64 {
    x.max(0.0)
}

/// Negative part with the sign convention `x = x^+ - x^-`, so `x^- >= 0`.
#[inline]
pub fn negative_part(x: f64) -> f64 {
    (-x).max(0.0)
}

/// Agent preference: exponential (risk-averse) or linear (risk-neutral,
/// appendix mode only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Utility {
    Exponential { gamma: f64 },
    Linear,
}

impl Utility {
    /// Value and derivative at `x`. Exponential branches clamp the exponent.
    pub fn eval(&self, x: f64) -> (f64, f64) {
        match *self {
            Utility::Exponential { gamma } => {
                let mut clamped = false;
                let e = clamped_exp(-gamma * x, &mut clamped);
                (-e, gamma * e)
            }
            Utility::Linear => (x, 1.0),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x).1
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Utility::Exponential { gamma } => Some(gamma),
            Utility::Linear => None,
        }
    }

    pub fn is_risk_neutral(&self) -> bool {
        matches!(self, Utility::Linear)
    }
}

/// Which party defaults first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Defaulter {
    AgentA,
    AgentB,
}

/// Amount by breach of contract at the first default, as seen by Agent A.
///
/// With uncollateralized exposure `delta` and an endowed residual `delta_e`
/// from pre-existing contracts (zero in the main mode):
/// A's default leaves `L_A ((delta + delta_e)^+ - delta_e^+)` with A's estate;
/// B's default costs A `L_B ((delta + delta_e)^- - delta_e^-)`.
pub fn breach_amount(delta: f64, who: Defaulter, l_a: f64, l_b: f64, delta_e: f64) -> f64 {
    match who {
        Defaulter::AgentA => {
            l_a * (positive_part(delta + delta_e) - positive_part(delta_e))
        }
        Defaulter::AgentB => {
            -l_b * (negative_part(delta + delta_e) - negative_part(delta_e))
        }
    }
}

/// One party's preference, endowment, loss rate, spreads, and funding
/// risk-premium shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub utility: Utility,
    /// Initial endowment nu.
    pub endowment: f64,
    /// Fraction of uncollateralized exposure lost at this party's default.
    pub loss_rate: f64,
    /// Funding spread s = R - r over OIS.
    #[serde(default = "PiecewiseConstant::zero")]
    pub funding_spread: PiecewiseConstant,
    /// Margin funding spread s_m = R_m - r_m.
    #[serde(default = "PiecewiseConstant::zero")]
    pub margin_spread: PiecewiseConstant,
    /// Funding shift b of the risk premium (one entry per Brownian component).
    #[serde(default)]
    pub premium_shift: Vec<f64>,
}

impl AgentParams {
    pub fn validate(&self, field: &str, dim: usize) -> Result<()> {
        if let Some(gamma) = self.utility.gamma() {
            if !(gamma > 0.0) || !gamma.is_finite() {
                return Err(EngineError::config(
                    format!("{field}.utility.gamma"),
                    "risk aversion must be > 0 and finite",
                ));
            }
        }
        if !(self.loss_rate > 0.0 && self.loss_rate <= 1.0) {
            return Err(EngineError::config(
                format!("{field}.loss_rate"),
                "loss rate must lie in (0, 1]",
            ));
        }
        if !self.endowment.is_finite() {
            return Err(EngineError::config(format!("{field}.endowment"), "must be finite"));
        }
        if !self.premium_shift.is_empty() && self.premium_shift.len() != dim {
            return Err(EngineError::config(
                format!("{field}.premium_shift"),
                format!("must have {dim} components to match the risk premium"),
            ));
        }
        if self.premium_shift.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::config(
                format!("{field}.premium_shift"),
                "components must be finite",
            ));
        }
        Ok(())
    }

    /// Premium shift padded to dimension `dim` (empty input means zero).
    pub fn premium_shift_padded(&self, dim: usize) -> Vec<f64> {
        let mut b = self.premium_shift.clone();
        b.resize(dim, 0.0);
        b
    }
}

/// Hedging behaviour of one agent. `phi` is the hedging error against the
/// delta-risk of the clean price: delta-hedging makes it vanish, a naked
/// position leaves the full delta-risk, and `Custom` supplies it directly as
/// a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HedgeMode {
    DeltaHedge,
    Naked,
    Custom(PiecewiseVector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentSide {
    A,
    B,
}

impl HedgeMode {
    /// Writes the hedging error at `(t, delta_i)` into `out`, where `delta_i`
    /// is the agent's funding-adjusted delta-risk vector at that node.
    pub fn phi(&self, side: AgentSide, t: f64, delta_i: &[f64], out: &mut [f64]) {
        match self {
            HedgeMode::DeltaHedge => out.fill(0.0),
            HedgeMode::Naked => {
                // pi = 0: phi_A = -Delta_A, phi_B = +Delta_B.
                let sign = match side {
                    AgentSide::A => -1.0,
                    AgentSide::B => 1.0,
                };
                for (o, d) in out.iter_mut().zip(delta_i) {
                    *o = sign * d;
                }
            }
            HedgeMode::Custom(curve) => out.copy_from_slice(curve.value(t)),
        }
    }

    /// True when the hedging error is structurally zero.
    pub fn is_delta_hedge(&self) -> bool {
        matches!(self, HedgeMode::DeltaHedge)
    }

    pub fn validate(&self, field: &str, dim: usize) -> Result<()> {
        if let HedgeMode::Custom(curve) = self {
            if curve.dim() != dim {
                return Err(EngineError::config(
                    format!("{field}"),
                    format!("custom hedge error must have {dim} components"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HedgePolicy {
    pub agent_a: HedgeMode,
    pub agent_b: HedgeMode,
}

/// Promised dividend stream. The concrete contract is a unit zero-coupon bond
/// paid by Agent A at maturity; the enum is the extension point for other
/// clean-price hooks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dividend {
    UnitBondPaidByA,
}

/// Admissible set for the collateral control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollateralDomain {
    AllReals,
    /// Margin fixed to the given uncollateralized exposure level.
    Singleton(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractSpec {
    pub maturity: f64,
    pub dividend: Dividend,
    /// Bargaining weight of Agent B in the aggregated objective.
    pub lambda: f64,
    /// Endowed residual exposure from pre-existing contracts (appendix mode).
    #[serde(default = "PiecewiseConstant::zero")]
    pub delta_e: PiecewiseConstant,
    #[serde(default = "default_domain")]
    pub collateral_domain: CollateralDomain,
}

fn default_domain() -> CollateralDomain {
    CollateralDomain::AllReals
}

impl ContractSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(EngineError::config("contract.maturity", "must be > 0 and finite"));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(EngineError::config("contract.lambda", "must be > 0 and finite"));
        }
        if let CollateralDomain::Singleton(d0) = self.collateral_domain {
            if !d0.is_finite() {
                return Err(EngineError::config(
                    "contract.collateral_domain",
                    "singleton level must be finite",
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn utility_examples() {
        let (u, du) = Utility::Exponential { gamma: 1.0 }.eval(0.0);
        assert_eq!((u, du), (-1.0, 1.0));
        let (u, du) = Utility::Linear.eval(3.7);
        assert_eq!((u, du), (3.7, 1.0));
        let (u, du) = Utility::Exponential { gamma: 2.0 }.eval(0.5);
        assert_relative_eq!(u, -(-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(du, 2.0 * (-1.0f64).exp(), max_relative = 1e-15);
    }

    #[test]
    fn utility_clamps_extreme_exponents() {
        let (u, du) = Utility::Exponential { gamma: 1.0 }.eval(-1e6);
        assert!(u.is_finite() && du.is_finite());
        let mut clamped = false;
        clamped_exp(-800.0, &mut clamped);
        assert!(clamped);
        clamped = false;
        clamped_exp(5.0, &mut clamped);
        assert!(!clamped);
    }

    #[test]
    fn breach_examples() {
        assert_eq!(breach_amount(0.0, Defaulter::AgentA, 0.5, 0.5, 0.0), 0.0);
        assert_eq!(breach_amount(0.0, Defaulter::AgentB, 0.5, 0.5, 0.0), 0.0);
        assert_eq!(breach_amount(2.0, Defaulter::AgentA, 0.5, 0.5, 0.0), 1.0);
        assert_eq!(breach_amount(-2.0, Defaulter::AgentB, 0.5, 0.5, 0.0), -1.0);
        // The defaulting side's loss rate is the only one that matters.
        assert_eq!(breach_amount(-2.0, Defaulter::AgentA, 0.5, 0.5, 0.0), 0.0);
        assert_eq!(breach_amount(2.0, Defaulter::AgentB, 0.5, 0.5, 0.0), 0.0);
    }

    #[test]
    fn breach_with_endowed_residual() {
        // delta = 1, delta_e = -0.4: post-trade exposure 0.6, endowed part 0.
        assert_relative_eq!(
            breach_amount(1.0, Defaulter::AgentA, 0.5, 0.5, -0.4),
            0.5 * 0.6,
            max_relative = 1e-15
        );
        // B default with incremental negative exposure.
        assert_relative_eq!(
            breach_amount(-1.0, Defaulter::AgentB, 0.5, 0.25, 0.4),
            -0.25 * 0.6,
            max_relative = 1e-15
        );
    }

    proptest! {
        #[test]
        fn breach_reduces_to_main_mode_without_residual(delta in -50.0f64..50.0) {
            let main_a = 0.7 * positive_part(delta);
            let main_b = -0.3 * negative_part(delta);
            prop_assert_eq!(breach_amount(delta, Defaulter::AgentA, 0.7, 0.3, 0.0), main_a);
            prop_assert_eq!(breach_amount(delta, Defaulter::AgentB, 0.7, 0.3, 0.0), main_b);
        }

        #[test]
        fn breach_nondecreasing_in_delta(
            d1 in -20.0f64..20.0,
            d2 in -20.0f64..20.0,
            delta_e in -5.0f64..5.0,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            for who in [Defaulter::AgentA, Defaulter::AgentB] {
                prop_assert!(
                    breach_amount(lo, who, 0.6, 0.4, delta_e)
                        <= breach_amount(hi, who, 0.6, 0.4, delta_e) + 1e-12
                );
            }
        }
    }

    #[test]
    fn hedge_modes() {
        let delta = [0.25, -0.5];
        let mut out = [0.0; 2];
        HedgeMode::DeltaHedge.phi(AgentSide::A, 0.3, &delta, &mut out);
        assert_eq!(out, [0.0, 0.0]);
        HedgeMode::Naked.phi(AgentSide::A, 0.3, &delta, &mut out);
        assert_eq!(out, [-0.25, 0.5]);
        HedgeMode::Naked.phi(AgentSide::B, 0.3, &delta, &mut out);
        assert_eq!(out, [0.25, -0.5]);
        let custom = HedgeMode::Custom(PiecewiseVector::constant(vec![1.0, 2.0]));
        custom.phi(AgentSide::B, 0.3, &delta, &mut out);
        assert_eq!(out, [1.0, 2.0]);
    }

    #[test]
    fn agent_validation() {
        let good = AgentParams {
            utility: Utility::Exponential { gamma: 1.0 },
            endowment: 0.0,
            loss_rate: 0.5,
            funding_spread: PiecewiseConstant::zero(),
            margin_spread: PiecewiseConstant::zero(),
            premium_shift: vec![],
        };
        assert!(good.validate("agent_a", 1).is_ok());
        let mut bad = good.clone();
        bad.loss_rate = 0.0;
        assert!(bad.validate("agent_a", 1).is_err());
        let mut bad = good.clone();
        bad.utility = Utility::Exponential { gamma: -1.0 };
        assert!(bad.validate("agent_a", 1).is_err());
        let mut bad = good;
        bad.premium_shift = vec![0.1, 0.2];
        assert!(bad.validate("agent_a", 1).is_err());
    }
}
