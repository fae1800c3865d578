//! Numerical engine for bilateral risk-sharing contracts.
//!
//! Two defaultable counterparties with different funding rates negotiate a
//! derivative trade. The engine computes the negotiated price adjustment
//! (agreement cost) and the optimal variation margin that together maximize
//! the bargaining-weighted sum of the parties' expected utilities of
//! discounted terminal wealth, under default risk, funding spreads, and
//! rehypothecated cash collateral.
//!
//! Structure:
//! - [`market`]: short-rate models, clean-price closed forms, survival
//!   probabilities, default-time sampling;
//! - [`contract`]: agent/contract parameters, utilities, breach amounts;
//! - [`sde`]: reduced wealth-process simulation on a shared Brownian driver;
//! - [`collateral`]: closed-form optimal margin rules plus a brute-force
//!   search oracle;
//! - [`objective`]: Monte Carlo objective estimators on the reference and
//!   full filtrations;
//! - [`pricing`]: closed-form prices and the first-order root solver;
//! - [`margin`]: full-margin (regulatory convention) diagnostics;
//! - [`config`]: JSON scenario schema.

pub mod collateral;
pub mod config;
pub mod contract;
pub mod curves;
pub mod error;
pub mod grid;
pub mod margin;
pub mod market;
pub mod objective;
pub mod optim;
pub mod pricing;
pub mod rng;
pub mod sde;

pub use collateral::{
    appendix_candidates, appendix_candidates_reduced, appendix_pointwise_objective,
    brute_force_delta, candidate_pair, delta_star_appendix, delta_star_main,
    main_pointwise_objective, psi_a, psi_b, AppendixCollateralParams, BruteForceProblem,
    MainCollateralParams,
};
pub use config::ScenarioConfig;
pub use contract::{
    breach_amount, AgentParams, CollateralDomain, ContractSpec, Defaulter, Dividend, HedgeMode,
    HedgePolicy, Utility,
};
pub use curves::{PiecewiseConstant, PiecewiseVector};
pub use error::{EngineError, Result};
pub use grid::TimeGrid;
pub use margin::{check_full_margin, check_full_margin_appendix, MarginReport};
pub use market::{
    cir_bond_delta, cir_bond_price, cir_mc_bond_price, cir_mean_path_discount,
    sample_default_times, survival, IntensityCurve, MarketModel, RateModel, NO_DEFAULT,
};
pub use objective::{
    full_filtration_objective, g_integrand, reduced_objective, CollateralRule, ObjectiveEstimate,
};
pub use pricing::{
    build_residual_cache, envelope_integrand_node, mean_abs_exposure, motivation_objective,
    motivation_price, mpp_residual, p_hat, solve_p_star, ResidualCache, ResidualEstimate,
    RiskSharingSolution,
};
pub use sde::{
    par_map_paths, simulate_bundle, EngineSetup, Mode, PathBundle, PathSeries, Scheme, SimConfig,
};
