//! Scenario configuration: one JSON document describing the market, the two
//! agents, the contract, hedging behaviour, and the simulation controls.

use serde::{Deserialize, Serialize};

use crate::contract::{AgentParams, CollateralDomain, ContractSpec, HedgePolicy};
use crate::error::{EngineError, Result};
use crate::market::MarketModel;
use crate::objective::CollateralRule;
use crate::sde::{EngineSetup, Mode, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub market: MarketModel,
    pub agent_a: AgentParams,
    pub agent_b: AgentParams,
    pub contract: ContractSpec,
    pub hedge: HedgePolicy,
    #[serde(default)]
    pub sim: SimConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| EngineError::Config {
            field: "<document>".into(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Validates and precomputes the engine setup.
    pub fn build(&self) -> Result<EngineSetup> {
        EngineSetup::new(
            self.market.clone(),
            self.agent_a.clone(),
            self.agent_b.clone(),
            self.contract.clone(),
            self.hedge.clone(),
            self.sim,
            self.mode,
        )
    }

    /// Margin rule implied by the collateral domain and mode.
    pub fn collateral_rule(&self) -> CollateralRule {
        match self.contract.collateral_domain {
            CollateralDomain::Singleton(d0) => CollateralRule::Fixed(d0),
            CollateralDomain::AllReals => match self.mode {
                Mode::Main => CollateralRule::ClosedFormMain,
                Mode::Appendix => CollateralRule::ClosedFormAppendix,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"{
        "mode": "main",
        "market": {
            "rate_model": {"kind": "cir", "k": 0.5, "theta": 0.04, "rho": 0.1, "r0": 0.03},
            "risk_premium": [0.2],
            "intensities": {
                "h_a": {"times": [0.0], "values": [0.02]},
                "h_b": {"times": [0.0], "values": [0.02]}
            }
        },
        "agent_a": {
            "utility": {"kind": "exponential", "gamma": 1.0},
            "endowment": 0.1,
            "loss_rate": 0.5
        },
        "agent_b": {
            "utility": {"kind": "exponential", "gamma": 2.0},
            "endowment": 0.3,
            "loss_rate": 0.5
        },
        "contract": {
            "maturity": 1.0,
            "dividend": "unit_bond_paid_by_a",
            "lambda": 1.5
        },
        "hedge": {"agent_a": "delta_hedge", "agent_b": "delta_hedge"},
        "sim": {"n_paths": 100, "n_steps": 20, "seed": 7, "antithetic": true}
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
        let setup = cfg.build().unwrap();
        assert_eq!(setup.sim.n_paths, 100);
        assert_eq!(setup.dim, 1);
        assert_eq!(cfg.collateral_rule(), CollateralRule::ClosedFormMain);
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ScenarioConfig::from_json(EXAMPLE).unwrap();
        let again = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_nonpositive_gamma_with_field_path() {
        let bad = EXAMPLE.replace(r#""gamma": 1.0"#, r#""gamma": -1.0"#);
        let err = ScenarioConfig::from_json(&bad).unwrap().build().unwrap_err();
        let message = err.to_string();
        assert!(message.contains("agent_a.utility.gamma"), "{message}");
    }

    #[test]
    fn rejects_malformed_json() {
        assert!(ScenarioConfig::from_json("{not json").is_err());
    }

    #[test]
    fn singleton_domain_maps_to_fixed_rule() {
        let with_singleton = EXAMPLE.replace(
            r#""lambda": 1.5"#,
            r#""lambda": 1.5, "collateral_domain": {"singleton": 0.25}"#,
        );
        let cfg = ScenarioConfig::from_json(&with_singleton).unwrap();
        assert_eq!(cfg.collateral_rule(), CollateralRule::Fixed(0.25));
    }
}
