//! Monte Carlo evaluation of the risk-sharing objective.
//!
//! `reduced_objective` works on the reference filtration: defaults enter only
//! through the survival weight and the default-intensity integrand.
//! `full_filtration_objective` instead samples the default times themselves
//! and settles the breach amount pathwise; agreement of the two estimators is
//! the numerical check of the filtration reduction.

use crate::collateral::{delta_star_main, psi_a, psi_b, MainCollateralParams};
use crate::contract::{breach_amount, clamped_exp, Defaulter};
use crate::error::{EngineError, Result};
use crate::market::sample_default_times;
use crate::rng::{default_time_stream, mean_and_std_error, pairwise_sum};
use crate::sde::{par_map_paths, EngineSetup, Mode, PathSeries};

/// Fraction of clamped paths beyond which estimates are refused.
pub const CLAMP_FRACTION_LIMIT: f64 = 1e-3;
/// Per-path tolerance for the equality of the two integrand routes.
const IDENTITY_TOL: f64 = 1e-8;

/// Margin rule used when evaluating an objective or price.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CollateralRule {
    /// Pointwise-optimal rule of the two-risk-averse-agent mode.
    ClosedFormMain,
    /// Pointwise-optimal rule of the risk-neutral/incremental mode.
    ClosedFormAppendix,
    /// Collateral pinned so the uncollateralized exposure equals the level.
    Fixed(f64),
}

/// A Monte Carlo estimate with its sampling diagnostics.
#[derive(Debug, Clone)]
pub struct ObjectiveEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Decomposition `value = lambda_free_part + lambda * lambda_part`
    /// (exact for a fixed collateral level).
    pub lambda_free_part: f64,
    pub lambda_part: f64,
    pub n_paths: usize,
    /// Paths on which an exponent guard fired.
    pub clamped_paths: u64,
    pub clamped_fraction: f64,
    /// Sample estimate of the L2 norm `sqrt(E int delta^2 dt)` of the rule.
    pub delta_l2: f64,
}

pub(crate) fn main_params(setup: &EngineSetup) -> Result<MainCollateralParams> {
    let (Some(gamma_a), Some(gamma_b)) = (setup.gamma_a(), setup.gamma_b()) else {
        return Err(EngineError::Unsupported(
            "objective evaluation requires the two-risk-averse-agent mode".into(),
        ));
    };
    Ok(MainCollateralParams {
        gamma_a,
        gamma_b,
        nu_b: setup.agent_b.endowment,
        lambda: setup.lambda(),
        l_a: setup.agent_a.loss_rate,
        l_b: setup.agent_b.loss_rate,
    })
}

fn require_main_mode(setup: &EngineSetup, op: &str) -> Result<()> {
    if setup.mode != Mode::Main {
        return Err(EngineError::Unsupported(format!(
            "{op} is defined for the main (two risk-averse agents) mode"
        )));
    }
    Ok(())
}

/// Checks that a margin spread is only combined with the exposure level the
/// wealth paths were simulated with.
fn check_rule_consistency(setup: &EngineSetup, rule: CollateralRule) -> Result<()> {
    let has_margin_spread =
        !setup.agent_a.margin_spread.is_zero(0.0) || !setup.agent_b.margin_spread.is_zero(0.0);
    if has_margin_spread {
        match rule {
            CollateralRule::Fixed(d0) if d0 == setup.delta_fixed => {}
            _ => {
                return Err(EngineError::Unsupported(
                    "nonzero margin spreads require the fixed rule at the singleton level"
                        .into(),
                ));
            }
        }
    }
    Ok(())
}

/// Exposure prescribed by `rule` at node `i` of a simulated path.
pub(crate) fn rule_delta(
    rule: CollateralRule,
    prm: &MainCollateralParams,
    setup: &EngineSetup,
    path: &PathSeries,
    p: f64,
    i: usize,
) -> f64 {
    match rule {
        CollateralRule::Fixed(d0) => d0,
        CollateralRule::ClosedFormMain => {
            let ratio = prm.gamma_b / prm.gamma_a;
            let x = path.v_a[i] - ratio * (path.v_b[i] - path.v_b[0]);
            delta_star_main(p, x, setup.det.k[i], prm)
        }
        CollateralRule::ClosedFormAppendix => {
            unreachable!("appendix rule is rejected before path evaluation")
        }
    }
}

/// Default-intensity integrand of the reduced objective, split into its
/// lambda-free and lambda-proportional parts. Written so every exponential
/// combines its exponents before `exp`.
#[allow(clippy::too_many_arguments)]
pub fn g_integrand_parts(
    g_t: f64,
    h_a: f64,
    h_b: f64,
    k_t: f64,
    v_a: f64,
    v_b: f64,
    delta: f64,
    prm: &MainCollateralParams,
    clamped: &mut bool,
) -> (f64, f64) {
    let u_a = |y: f64, c: &mut bool| -clamped_exp(-prm.gamma_a * y, c);
    let u_b = |y: f64, c: &mut bool| -clamped_exp(-prm.gamma_b * y, c);
    let (h_active, h_quiet, l_active) = if delta >= 0.0 {
        (h_a, h_b, prm.l_a)
    } else {
        (h_b, h_a, prm.l_b)
    };
    let part_a = g_t
        * (h_active * u_a(v_a + l_active * delta, clamped) + h_quiet * u_a(v_a, clamped));
    let part_b = g_t
        * (h_active * u_b(v_b - l_active * k_t * delta, clamped) + h_quiet * u_b(v_b, clamped));
    (part_a, part_b)
}

/// Full integrand `g = part_a + lambda * part_b`.
#[allow(clippy::too_many_arguments)]
pub fn g_integrand(
    g_t: f64,
    h_a: f64,
    h_b: f64,
    k_t: f64,
    v_a: f64,
    v_b: f64,
    delta: f64,
    prm: &MainCollateralParams,
    clamped: &mut bool,
) -> f64 {
    let (a, b) = g_integrand_parts(g_t, h_a, h_b, k_t, v_a, v_b, delta, prm, clamped);
    a + prm.lambda * b
}

struct PathContribution {
    part_a: f64,
    part_b: f64,
    delta_sq_integral: f64,
    clamped: bool,
}

fn aggregate(
    setup: &EngineSetup,
    contributions: Vec<PathContribution>,
    lambda: f64,
) -> Result<ObjectiveEstimate> {
    let n_paths = contributions.len();
    let clamped_paths = contributions.iter().filter(|c| c.clamped).count() as u64;
    let clamped_fraction = clamped_paths as f64 / n_paths as f64;
    if clamped_fraction > CLAMP_FRACTION_LIMIT {
        return Err(EngineError::IntegrabilityBreach {
            clamped: clamped_paths,
            total: n_paths as u64,
            limit: CLAMP_FRACTION_LIMIT,
        });
    }
    let values: Vec<f64> = contributions
        .iter()
        .map(|c| c.part_a + lambda * c.part_b)
        .collect();
    // Antithetic pairs are dependent: the standard error comes from the
    // independent pair averages.
    let (value, std_error) = if setup.sim.antithetic {
        let pairs: Vec<f64> = values.chunks(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        mean_and_std_error(&pairs)
    } else {
        mean_and_std_error(&values)
    };
    let part_a: Vec<f64> = contributions.iter().map(|c| c.part_a).collect();
    let part_b: Vec<f64> = contributions.iter().map(|c| c.part_b).collect();
    let delta_sq: Vec<f64> = contributions.iter().map(|c| c.delta_sq_integral).collect();
    Ok(ObjectiveEstimate {
        value,
        std_error,
        lambda_free_part: pairwise_sum(&part_a) / n_paths as f64,
        lambda_part: pairwise_sum(&part_b) / n_paths as f64,
        n_paths,
        clamped_paths,
        clamped_fraction,
        delta_l2: (pairwise_sum(&delta_sq) / n_paths as f64).max(0.0).sqrt(),
    })
}

/// Reduced (reference-filtration) objective
/// `E[G_T U_A(v_a_T) + lambda G_T U_B(v_b_T) + int g dt]`.
///
/// For the closed-form rule the integrand is also evaluated through the
/// change-of-measure route (`beta` times the post-default weights) and the
/// two routes must agree per path; disagreement is an error, not a warning.
pub fn reduced_objective(
    setup: &EngineSetup,
    p: f64,
    rule: CollateralRule,
) -> Result<ObjectiveEstimate> {
    require_main_mode(setup, "reduced_objective")?;
    check_rule_consistency(setup, rule)?;
    if rule == CollateralRule::ClosedFormAppendix {
        return Err(EngineError::Unsupported(
            "the appendix rule pairs with the appendix cash-flow, not the reduced objective"
                .into(),
        ));
    }
    let prm = main_params(setup)?;
    let n = setup.grid.n_steps;
    let dt = setup.grid.dt;
    let det = &setup.det;
    let lambda = prm.lambda;

    let contributions = par_map_paths(setup.sim.n_paths, |idx| {
        let path = setup.simulate_path(idx, p)?;
        let mut clamped = path.clamped;
        let mut int_a = 0.0;
        let mut int_b = 0.0;
        let mut delta_sq = 0.0;
        let mut fhat_route = 0.0;
        let mut g_route = 0.0;
        for i in 0..n {
            let delta = rule_delta(rule, &prm, setup, &path, p, i);
            let (ga, gb) = g_integrand_parts(
                det.g[i], det.h_a[i], det.h_b[i], det.k[i], path.v_a[i], path.v_b[i], delta,
                &prm, &mut clamped,
            );
            int_a += ga * dt;
            int_b += gb * dt;
            delta_sq += delta * delta * dt;
            if rule == CollateralRule::ClosedFormMain {
                // Independent route: beta [U_A(X) psi_a + lambda U_B(nu_b - p) psi_b].
                let beta = path.beta.as_ref().expect("main mode stores beta")[i];
                let ratio = prm.gamma_b / prm.gamma_a;
                let x = path.v_a[i] - ratio * (path.v_b[i] - path.v_b[0]);
                let u_x = -clamped_exp(-prm.gamma_a * x, &mut clamped);
                let u_w = -clamped_exp(-prm.gamma_b * (prm.nu_b - p), &mut clamped);
                let fhat = beta
                    * (u_x * psi_a(delta, det.h_a[i], det.h_b[i], prm.l_a, prm.l_b, prm.gamma_a)
                        + lambda
                            * u_w
                            * psi_b(
                                delta, det.h_a[i], det.h_b[i], prm.l_a, prm.l_b, prm.gamma_b,
                                det.k[i],
                            ));
                fhat_route += fhat * dt;
                g_route += (ga + lambda * gb) * dt;
            }
        }
        if rule == CollateralRule::ClosedFormMain && !clamped {
            let gap = (fhat_route - g_route).abs();
            if gap > IDENTITY_TOL * (1.0 + g_route.abs()) {
                return Err(EngineError::Domain {
                    op: "reduced_objective",
                    message: format!(
                        "integrand routes disagree on path {idx}: g-form {g_route} vs change-of-measure form {fhat_route}"
                    ),
                });
            }
        }
        let u_a_term = -clamped_exp(-prm.gamma_a * path.v_a[n], &mut clamped);
        let u_b_term = -clamped_exp(-prm.gamma_b * path.v_b[n], &mut clamped);
        Ok(PathContribution {
            part_a: det.g[n] * u_a_term + int_a,
            part_b: det.g[n] * u_b_term + int_b,
            delta_sq_integral: delta_sq,
            clamped,
        })
    })?;
    aggregate(setup, contributions, lambda)
}

/// Full-filtration objective: samples the default times, settles the breach
/// at the (grid-snapped) first default, and averages the terminal utilities.
/// Uses the same Brownian streams as [`reduced_objective`], so the two
/// estimates are positively correlated.
pub fn full_filtration_objective(
    setup: &EngineSetup,
    p: f64,
    rule: CollateralRule,
) -> Result<ObjectiveEstimate> {
    require_main_mode(setup, "full_filtration_objective")?;
    check_rule_consistency(setup, rule)?;
    if rule == CollateralRule::ClosedFormAppendix {
        return Err(EngineError::Unsupported(
            "the appendix rule pairs with the appendix cash-flow, not the reduced objective"
                .into(),
        ));
    }
    if !setup.market.intensities.independent() {
        return Err(EngineError::Unsupported(
            "full-filtration sampling requires independent defaults (h_delta = 0)".into(),
        ));
    }
    let prm = main_params(setup)?;
    let n = setup.grid.n_steps;
    let dt = setup.grid.dt;
    let maturity = setup.grid.maturity;
    let lambda = prm.lambda;

    let contributions = par_map_paths(setup.sim.n_paths, |idx| {
        let path = setup.simulate_path(idx, p)?;
        let mut clamped = path.clamped;
        let mut rng = default_time_stream(setup.sim.seed, idx);
        let (tau_a, tau_b) = sample_default_times(&setup.market.intensities, &mut rng)?;
        let tau = tau_a.min(tau_b);
        let mut delta_sq = 0.0;
        for i in 0..n {
            let d = rule_delta(rule, &prm, setup, &path, p, i);
            delta_sq += d * d * dt;
        }
        let (payoff_a, payoff_b) = if tau > maturity {
            (path.v_a[n], path.v_b[n])
        } else {
            let j = ((tau / dt).round() as usize).min(n);
            let who = if tau_a <= tau_b { Defaulter::AgentA } else { Defaulter::AgentB };
            let delta = rule_delta(rule, &prm, setup, &path, p, j);
            let theta = breach_amount(delta, who, prm.l_a, prm.l_b, setup.det.delta_e[j]);
            (
                path.v_a[j] + theta,
                path.v_b[j] - setup.det.k[j] * theta,
            )
        };
        let part_a = -clamped_exp(-prm.gamma_a * payoff_a, &mut clamped);
        let part_b = -clamped_exp(-prm.gamma_b * payoff_b, &mut clamped);
        Ok(PathContribution {
            part_a,
            part_b,
            delta_sq_integral: delta_sq,
            clamped,
        })
    })?;
    aggregate(setup, contributions, lambda)
}
