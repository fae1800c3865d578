//! Shared scenario builders for the benchmarks.

use rs_engine_core::{
    AgentParams, CollateralDomain, ContractSpec, Dividend, EngineSetup, HedgeMode, HedgePolicy,
    IntensityCurve, MarketModel, Mode, PiecewiseConstant, RateModel, Scheme, SimConfig, Utility,
};

/// CIR bond scenario with an unhedged Agent B; exercises the full path
/// walker including the closed-form price evaluation per node.
pub fn cir_setup(n_paths: usize, n_steps: usize) -> EngineSetup {
    EngineSetup::new(
        MarketModel {
            rate_model: RateModel::Cir { k: 0.5, theta: 0.04, rho: 0.1, r0: 0.03 },
            risk_premium: vec![0.2],
            remuneration: PiecewiseConstant::zero(),
            intensities: IntensityCurve {
                h_a: PiecewiseConstant::constant(0.02),
                h_b: PiecewiseConstant::constant(0.03),
                h_delta: PiecewiseConstant::zero(),
            },
        },
        AgentParams {
            utility: Utility::Exponential { gamma: 1.0 },
            endowment: 0.1,
            loss_rate: 0.5,
            funding_spread: PiecewiseConstant::constant(0.005),
            margin_spread: PiecewiseConstant::zero(),
            premium_shift: vec![],
        },
        AgentParams {
            utility: Utility::Exponential { gamma: 2.0 },
            endowment: 0.3,
            loss_rate: 0.6,
            funding_spread: PiecewiseConstant::zero(),
            margin_spread: PiecewiseConstant::zero(),
            premium_shift: vec![],
        },
        ContractSpec {
            maturity: 1.0,
            dividend: Dividend::UnitBondPaidByA,
            lambda: 1.3,
            delta_e: PiecewiseConstant::zero(),
            collateral_domain: CollateralDomain::AllReals,
        },
        HedgePolicy {
            agent_a: HedgeMode::DeltaHedge,
            agent_b: HedgeMode::Naked,
        },
        SimConfig {
            n_paths,
            n_steps,
            seed: 42,
            antithetic: true,
            scheme: Scheme::Euler,
        },
        Mode::Main,
    )
    .expect("valid benchmark scenario")
}
