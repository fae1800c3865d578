//! Full-margin diagnostics: does the configuration satisfy the necessary
//! conditions for the regulatory full-collateralization convention
//! (`delta* = 0`) to be the optimum?

use serde::Serialize;

use crate::collateral::delta_star_main;
use crate::contract::HedgeMode;
use crate::error::{EngineError, Result};
use crate::objective::main_params;
use crate::pricing::p_hat;
use crate::rng::brownian_stream;
use crate::sde::{simulate_bundle, EngineSetup, Mode};
use rand::Rng;

/// Tolerance for "identically zero" function checks.
const ZERO_TOL: f64 = 1e-12;
/// Tolerance for the drift residual entering the appendix verdict.
const DRIFT_TOL: f64 = 1e-12;
/// Seed of the fixed off-grid sampling times.
const OFF_GRID_SEED: u64 = 0x0ff6_41d5;

/// Full-margin check report (serialized as-is by the CLI).
#[derive(Debug, Clone, Serialize)]
pub struct MarginReport {
    pub mode: Mode,
    /// Hedging errors vanish.
    pub phi_a_zero: bool,
    pub phi_b_zero: bool,
    /// Funding spreads vanish.
    pub spread_a_zero: bool,
    pub spread_b_zero: bool,
    /// Margin spread of Agent A vanishes (appendix check only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub margin_spread_a_zero: Option<bool>,
    /// Largest drift residual of the constancy condition on sampled paths.
    pub drift_residual_max: f64,
    pub full_margin_optimal: bool,
    /// Implied price when the convention is optimal.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub implied_p_hat: Option<f64>,
    pub violating_terms: Vec<String>,
    /// Largest |delta*| along simulated paths at the implied price.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_abs_delta_star: Option<f64>,
}

/// Deterministic off-grid sample times in `(0, T)`.
fn off_grid_times(maturity: f64) -> Vec<f64> {
    let mut rng = brownian_stream(OFF_GRID_SEED, 0);
    (0..10).map(|_| rng.random::<f64>() * maturity).collect()
}

fn curve_is_zero(curve: &crate::curves::PiecewiseConstant, grid_times: &[f64], extra: &[f64]) -> bool {
    grid_times
        .iter()
        .chain(extra)
        .all(|&t| curve.value(t).abs() <= ZERO_TOL)
}

fn hedge_error_is_zero(
    mode: &HedgeMode,
    max_path_phi: f64,
    extra_times: &[f64],
) -> bool {
    match mode {
        HedgeMode::DeltaHedge => true,
        HedgeMode::Naked => max_path_phi <= ZERO_TOL,
        HedgeMode::Custom(curve) => {
            max_path_phi <= ZERO_TOL
                && extra_times.iter().all(|&t| {
                    curve.value(t).iter().all(|x| x.abs() <= ZERO_TOL)
                })
        }
    }
}

/// Checks the two necessary conditions of the main mode: both agents hedge
/// the delta-risk and neither funding spread is transferred. Also reports
/// the drift residual of the constancy condition and the sampled exposure of
/// the closed-form rule at the implied price.
pub fn check_full_margin(setup: &EngineSetup) -> Result<MarginReport> {
    if setup.mode != Mode::Main {
        return Err(EngineError::Unsupported(
            "check_full_margin applies to the main mode; use the appendix variant".into(),
        ));
    }
    let prm = main_params(setup)?;
    let ratio = prm.gamma_b / prm.gamma_a;
    let det = &setup.det;
    let dim = setup.dim;
    let grid_times = &setup.grid.times;
    let extra = off_grid_times(setup.grid.maturity);

    let implied = p_hat(
        prm.gamma_a,
        prm.gamma_b,
        setup.agent_a.endowment,
        prm.nu_b,
        prm.lambda,
    );

    let bundle = simulate_bundle(setup, implied)?;
    let mut max_phi_a = 0.0f64;
    let mut max_phi_b = 0.0f64;
    let mut drift_max = 0.0f64;
    let mut max_delta = 0.0f64;
    let mut phi_a = vec![0.0; dim];
    let mut phi_b = vec![0.0; dim];
    let mut delta_a = vec![0.0; dim];
    let mut delta_b = vec![0.0; dim];
    for path in &bundle.paths {
        for i in 0..setup.grid.n_nodes() {
            let t = grid_times[i];
            for c in 0..dim {
                delta_a[c] = det.disc_a[i] * path.z[i * dim + c];
                delta_b[c] = det.disc_b[i] * path.z[i * dim + c];
            }
            setup.hedge.agent_a.phi(crate::contract::AgentSide::A, t, &delta_a, &mut phi_a);
            setup.hedge.agent_b.phi(crate::contract::AgentSide::B, t, &delta_b, &mut phi_b);
            for c in 0..dim {
                max_phi_a = max_phi_a.max(phi_a[c].abs());
                max_phi_b = max_phi_b.max(phi_b[c].abs());
            }
            // Constancy condition drift: (s_a + ratio s_b K) v
            //   + Delta_a . b_a + ratio Delta_b . b_b + (s_a - s_b)/gamma_a.
            let mut drift = (det.s_a[i] + ratio * det.s_b[i] * det.k[i]) * path.v[i]
                + (det.s_a[i] - det.s_b[i]) / prm.gamma_a;
            for c in 0..dim {
                drift += delta_a[c] * setup.b_a[c] + ratio * delta_b[c] * setup.b_b[c];
            }
            drift_max = drift_max.max(drift.abs());
            // Exposure of the closed-form rule at the implied price.
            let x = path.v_a[i] - ratio * (path.v_b[i] - path.v_b[0]);
            max_delta = max_delta.max(delta_star_main(implied, x, det.k[i], &prm).abs());
        }
    }

    let phi_a_zero = hedge_error_is_zero(&setup.hedge.agent_a, max_phi_a, &extra);
    let phi_b_zero = hedge_error_is_zero(&setup.hedge.agent_b, max_phi_b, &extra);
    let spread_a_zero = curve_is_zero(&setup.agent_a.funding_spread, grid_times, &extra);
    let spread_b_zero = curve_is_zero(&setup.agent_b.funding_spread, grid_times, &extra);

    let mut violating = Vec::new();
    if !phi_a_zero {
        violating.push("phi_A".to_string());
    }
    if !phi_b_zero {
        violating.push("phi_B".to_string());
    }
    if !spread_a_zero {
        violating.push("s_A".to_string());
    }
    if !spread_b_zero {
        violating.push("s_B".to_string());
    }
    let optimal = phi_a_zero && phi_b_zero && spread_a_zero && spread_b_zero;

    Ok(MarginReport {
        mode: Mode::Main,
        phi_a_zero,
        phi_b_zero,
        spread_a_zero,
        spread_b_zero,
        margin_spread_a_zero: None,
        drift_residual_max: drift_max,
        full_margin_optimal: optimal,
        implied_p_hat: optimal.then_some(implied),
        violating_terms: violating,
        max_abs_delta_star: Some(max_delta),
    })
}

/// Appendix-mode margin check: Agent B hedges the delta-risk and all of
/// `s_A`, `s_B`, `s_Am` vanish; the drift residual of the wealth-constancy
/// condition must hold on simulated paths for any contract with delta-risk.
pub fn check_full_margin_appendix(setup: &EngineSetup) -> Result<MarginReport> {
    if setup.mode != Mode::Appendix {
        return Err(EngineError::Unsupported(
            "check_full_margin_appendix applies to the appendix mode".into(),
        ));
    }
    for (name, curve) in [
        ("agent_a.funding_spread", &setup.agent_a.funding_spread),
        ("agent_b.funding_spread", &setup.agent_b.funding_spread),
        ("agent_a.margin_spread", &setup.agent_a.margin_spread),
    ] {
        if !curve.is_constant() {
            return Err(EngineError::Unsupported(format!(
                "appendix margin check assumes constant parameters; {name} is time-dependent"
            )));
        }
    }
    if !setup.market.intensities.h_a.is_constant()
        || !setup.market.intensities.h_b.is_constant()
    {
        return Err(EngineError::Unsupported(
            "appendix margin check assumes constant default intensities".into(),
        ));
    }
    if !setup.market.intensities.independent() {
        return Err(EngineError::Unsupported(
            "appendix margin check assumes independent default times (h_delta = 0)".into(),
        ));
    }
    let gamma_b = setup.gamma_b().expect("appendix mode has exponential Agent B");
    let det = &setup.det;
    let dim = setup.dim;
    let grid_times = &setup.grid.times;
    let extra = off_grid_times(setup.grid.maturity);

    let bundle = simulate_bundle(setup, 0.0)?;
    let mut max_phi_b = 0.0f64;
    let mut drift_max = 0.0f64;
    let mut phi_b = vec![0.0; dim];
    let mut delta_b = vec![0.0; dim];
    for path in &bundle.paths {
        for i in 0..setup.grid.n_nodes() {
            let t = grid_times[i];
            for c in 0..dim {
                delta_b[c] = det.disc_b[i] * path.z[i * dim + c];
            }
            setup.hedge.agent_b.phi(crate::contract::AgentSide::B, t, &delta_b, &mut phi_b);
            for c in 0..dim {
                max_phi_b = max_phi_b.max(phi_b[c].abs());
            }
            // Wealth-constancy drift:
            //   -s_b K v + phi_b . Lambda_b - Delta_b . b_b - (s_a - s_b)/gamma_b.
            let mut drift = -det.s_b[i] * det.k[i] * path.v[i]
                - (det.s_a[i] - det.s_b[i]) / gamma_b;
            for c in 0..dim {
                drift += phi_b[c] * setup.lambda_b[c] - delta_b[c] * setup.b_b[c];
            }
            drift_max = drift_max.max(drift.abs());
        }
    }

    let phi_b_zero = hedge_error_is_zero(&setup.hedge.agent_b, max_phi_b, &extra);
    let spread_a_zero = curve_is_zero(&setup.agent_a.funding_spread, grid_times, &extra);
    let spread_b_zero = curve_is_zero(&setup.agent_b.funding_spread, grid_times, &extra);
    let margin_a_zero = curve_is_zero(&setup.agent_a.margin_spread, grid_times, &extra);

    let mut violating = Vec::new();
    if !phi_b_zero {
        violating.push("phi_B".to_string());
    }
    if !spread_a_zero {
        violating.push("s_A".to_string());
    }
    if !spread_b_zero {
        violating.push("s_B".to_string());
    }
    if !margin_a_zero {
        violating.push("s_Am".to_string());
    }
    if drift_max > DRIFT_TOL {
        violating.push("drift".to_string());
    }
    let optimal =
        phi_b_zero && spread_a_zero && spread_b_zero && margin_a_zero && drift_max <= DRIFT_TOL;

    Ok(MarginReport {
        mode: Mode::Appendix,
        phi_a_zero: true,
        phi_b_zero,
        spread_a_zero,
        spread_b_zero,
        margin_spread_a_zero: Some(margin_a_zero),
        drift_residual_max: drift_max,
        full_margin_optimal: optimal,
        implied_p_hat: None,
        violating_terms: violating,
        max_abs_delta_star: None,
    })
}
