//! Agreement-cost solvers.
//!
//! Three layers: the single-period motivation closed form, the
//! full-collateralization price `p_hat`, and the general first-order
//! (maximum-principle) residual whose root is the negotiated price. The
//! residual is evaluated on one frozen set of paths (common random numbers),
//! so it is a deterministic, decreasing, smooth function of the price and a
//! plain Brent search applies.

use serde::Serialize;

use crate::collateral::{candidate_pair, delta_star_main};
use crate::contract::{clamped_exp, negative_part, positive_part};
use crate::error::{EngineError, Result};
use crate::objective::{main_params, CollateralRule, CLAMP_FRACTION_LIMIT};
use crate::optim::brent_root;
use crate::rng::{mean_and_std_error, pairwise_sum};
use crate::sde::{par_map_paths, EngineSetup};

/// Price bound for bracket expansion.
const BRACKET_CAP: f64 = 1e3;
/// Relative step of the finite-difference cross-check of the envelope
/// integrand.
const FD_STEP: f64 = 1e-5;
/// Relative disagreement between envelope and finite-difference integrals
/// that raises a warning.
const FD_WARN_TOL: f64 = 1e-4;
/// Exposure magnitude below which a node counts as sitting on the kink.
const KINK_EPS: f64 = 1e-12;

/// Single-period motivation objective: aggregated utility of the two funding
/// adjusted bond positions at price `p`.
pub fn motivation_objective(p: f64, r_a: f64, r_b: f64, r: f64, maturity: f64, lambda: f64) -> f64 {
    let u = |x: f64| -(-x).exp();
    let d = (-r * maturity).exp();
    u(-d + p + (-r_a * maturity).exp()) + lambda * u(d - p - (-r_b * maturity).exp())
}

/// Closed-form maximizer of [`motivation_objective`]:
/// `p* = -(e^{-R_A T} + e^{-R_B T})/2 + e^{-rT} - ln(lambda)/2`.
pub fn motivation_price(r_a: f64, r_b: f64, r: f64, maturity: f64, lambda: f64) -> f64 {
    -0.5 * ((-r_a * maturity).exp() + (-r_b * maturity).exp()) + (-r * maturity).exp()
        - 0.5 * lambda.ln()
}

/// Price implied by full collateralization:
/// `p_hat = (gamma_b nu_b - gamma_a nu_a - ln(lambda gamma_b / gamma_a)) / (gamma_a + gamma_b)`.
pub fn p_hat(gamma_a: f64, gamma_b: f64, nu_a: f64, nu_b: f64, lambda: f64) -> f64 {
    (gamma_b * nu_b - gamma_a * nu_a - (lambda * gamma_b / gamma_a).ln()) / (gamma_a + gamma_b)
}

/// Frozen price-independent path data: the residual at any `p` is arithmetic
/// over these series. Wealth paths shift additively in `p`, so one simulation
/// serves every price evaluation (common random numbers).
pub struct ResidualCache {
    /// Per path: `v_a` at `p = 0`, `(n+1)` nodes, row-major.
    v_a0: Vec<f64>,
    /// Per path: `v_b` at `p = 0`.
    v_b0: Vec<f64>,
    n_paths: usize,
    n_nodes: usize,
    pub clamped_paths: u64,
}

/// Simulates the price-free base paths.
pub fn build_residual_cache(setup: &EngineSetup) -> Result<ResidualCache> {
    let n_nodes = setup.grid.n_nodes();
    let rows = par_map_paths(setup.sim.n_paths, |idx| {
        let path = setup.simulate_path(idx, 0.0)?;
        Ok((path.v_a, path.v_b, path.clamped))
    })?;
    let mut v_a0 = Vec::with_capacity(rows.len() * n_nodes);
    let mut v_b0 = Vec::with_capacity(rows.len() * n_nodes);
    let mut clamped_paths = 0;
    for (va, vb, clamped) in rows {
        v_a0.extend_from_slice(&va);
        v_b0.extend_from_slice(&vb);
        clamped_paths += u64::from(clamped);
    }
    Ok(ResidualCache {
        v_a0,
        v_b0,
        n_paths: setup.sim.n_paths,
        n_nodes,
        clamped_paths,
    })
}

/// One evaluation of the first-order residual.
#[derive(Debug, Clone, Copy)]
pub struct ResidualEstimate {
    pub value: f64,
    pub std_error: f64,
    /// Fraction of node samples sitting on the kink with genuinely different
    /// one-sided derivatives (the non-differentiable set).
    pub q_fraction: f64,
    /// Envelope integral versus common-random-number finite differences.
    pub fd_rel_gap: f64,
    pub fd_warning: bool,
}

struct NodeTerms {
    /// Envelope integrand `d/dp + d/dx` of the running reward at the node.
    integrand: f64,
    q_hit: bool,
}

/// Envelope integrand at one node. `delta` follows the rule; at a kink node
/// (`delta* = 0` with the candidates crossing zero) the two one-sided
/// derivatives are averaged and compared: they only differ on the true
/// non-differentiable set, which is empty for exponential utilities.
#[allow(clippy::too_many_arguments)]
fn node_integrand(
    setup: &EngineSetup,
    rule: CollateralRule,
    prm: &crate::collateral::MainCollateralParams,
    i: usize,
    p: f64,
    v_a: f64,
    v_b: f64,
    clamped: &mut bool,
) -> NodeTerms {
    let det = &setup.det;
    let ratio = prm.gamma_b / prm.gamma_a;
    let x = v_a - ratio * (v_b - (prm.nu_b - p));
    let (delta, kink_hit) = match rule {
        CollateralRule::Fixed(d0) => (d0, false),
        CollateralRule::ClosedFormMain => {
            let d = delta_star_main(p, x, det.k[i], prm);
            (d, d.abs() <= KINK_EPS)
        }
        CollateralRule::ClosedFormAppendix => unreachable!("main-mode solver"),
    };
    let eval = |d: f64, clamped: &mut bool| {
        // beta U'_A(x) psi_a - lambda beta U'_B(nu_b - p) psi_b, with the
        // beta weight folded into the exponents (identical algebra, no
        // overflow from intermediate factors).
        let dp = positive_part(d);
        let dn = negative_part(d);
        let t1 = prm.gamma_a
            * det.g[i]
            * (det.h_a[i] * clamped_exp(-prm.gamma_a * (v_a + prm.l_a * dp), clamped)
                + det.h_b[i] * clamped_exp(-prm.gamma_a * (v_a - prm.l_b * dn), clamped));
        let t2 = prm.lambda
            * prm.gamma_b
            * det.g[i]
            * (det.h_a[i] * clamped_exp(-prm.gamma_b * (v_b - prm.l_a * det.k[i] * dp), clamped)
                + det.h_b[i] * clamped_exp(-prm.gamma_b * (v_b + prm.l_b * det.k[i] * dn), clamped));
        t1 - t2
    };
    if kink_hit {
        // One-sided envelope derivatives from either branch.
        let from_plus = eval(0.0_f64.max(delta), clamped);
        let from_minus = eval(0.0_f64.min(delta), clamped);
        let avg = 0.5 * (from_plus + from_minus);
        let q_hit = (from_plus - from_minus).abs() > 1e-9 * (1.0 + avg.abs());
        NodeTerms { integrand: avg, q_hit }
    } else {
        NodeTerms { integrand: eval(delta, clamped), q_hit: false }
    }
}

/// Running-reward integral of the objective at price `q` on the frozen paths
/// (used by the finite-difference cross-check).
fn fhat_integral(
    setup: &EngineSetup,
    cache: &ResidualCache,
    rule: CollateralRule,
    prm: &crate::collateral::MainCollateralParams,
    q: f64,
) -> f64 {
    let det = &setup.det;
    let n = setup.grid.n_steps;
    let dt = setup.grid.dt;
    let mut clamped = false;
    let per_path: Vec<f64> = (0..cache.n_paths)
        .map(|path| {
            let base = path * cache.n_nodes;
            let mut acc = 0.0;
            for i in 0..n {
                let v_a = cache.v_a0[base + i] + q;
                let v_b = cache.v_b0[base + i] - q;
                let ratio = prm.gamma_b / prm.gamma_a;
                let x = v_a - ratio * (v_b - (prm.nu_b - q));
                let delta = match rule {
                    CollateralRule::Fixed(d0) => d0,
                    CollateralRule::ClosedFormMain => delta_star_main(q, x, det.k[i], prm),
                    CollateralRule::ClosedFormAppendix => unreachable!(),
                };
                acc += crate::objective::g_integrand(
                    det.g[i], det.h_a[i], det.h_b[i], det.k[i], v_a, v_b, delta, prm,
                    &mut clamped,
                ) * dt;
            }
            acc
        })
        .collect();
    pairwise_sum(&per_path) / cache.n_paths as f64
}

/// First-order residual at price `p`: zero at the negotiated price.
pub fn mpp_residual(
    setup: &EngineSetup,
    cache: &ResidualCache,
    rule: CollateralRule,
    p: f64,
) -> Result<ResidualEstimate> {
    let prm = main_params(setup)?;
    let det = &setup.det;
    let n = setup.grid.n_steps;
    let dt = setup.grid.dt;
    let last = n;

    let mut contributions = Vec::with_capacity(cache.n_paths);
    let mut q_hits = 0u64;
    let mut clamped_paths = 0u64;
    for path in 0..cache.n_paths {
        let base = path * cache.n_nodes;
        let mut clamped = false;
        let mut integral = 0.0;
        for i in 0..n {
            let v_a = cache.v_a0[base + i] + p;
            let v_b = cache.v_b0[base + i] - p;
            let terms = node_integrand(setup, rule, &prm, i, p, v_a, v_b, &mut clamped);
            if terms.q_hit {
                q_hits += 1;
            }
            integral += terms.integrand * dt;
        }
        let v_a_t = cache.v_a0[base + last] + p;
        let v_b_t = cache.v_b0[base + last] - p;
        // beta_T U'_A(X_T) - lambda beta_T U'_B(nu_b - p), beta folded in.
        let terminal = prm.gamma_a * det.g[last] * clamped_exp(-prm.gamma_a * v_a_t, &mut clamped)
            - prm.lambda
                * prm.gamma_b
                * det.g[last]
                * clamped_exp(-prm.gamma_b * v_b_t, &mut clamped);
        clamped_paths += u64::from(clamped);
        contributions.push(terminal + integral);
    }

    let total = cache.n_paths as u64;
    if (clamped_paths as f64 / total as f64) > CLAMP_FRACTION_LIMIT {
        return Err(EngineError::IntegrabilityBreach {
            clamped: clamped_paths,
            total,
            limit: CLAMP_FRACTION_LIMIT,
        });
    }
    let q_fraction = q_hits as f64 / (total as f64 * n as f64);
    if q_fraction > 1e-3 {
        return Err(EngineError::Solver(format!(
            "non-differentiable set hit by {q_fraction:.2e} of node samples (limit 1e-3); \
             the first-order residual is unreliable"
        )));
    }

    let (value, std_error) = if setup.sim.antithetic {
        let pairs: Vec<f64> = contributions.chunks(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        mean_and_std_error(&pairs)
    } else {
        mean_and_std_error(&contributions)
    };

    // Common-random-number central difference of the running-reward integral
    // as an independent check of the envelope differentiation.
    let h = FD_STEP * p.abs().max(1.0);
    let fd = (fhat_integral(setup, cache, rule, &prm, p + h)
        - fhat_integral(setup, cache, rule, &prm, p - h))
        / (2.0 * h);
    let envelope: f64 = {
        let mut clamped = false;
        let per_path: Vec<f64> = (0..cache.n_paths)
            .map(|path| {
                let base = path * cache.n_nodes;
                let mut acc = 0.0;
                for i in 0..n {
                    let v_a = cache.v_a0[base + i] + p;
                    let v_b = cache.v_b0[base + i] - p;
                    acc += node_integrand(setup, rule, &prm, i, p, v_a, v_b, &mut clamped)
                        .integrand
                        * dt;
                }
                acc
            })
            .collect();
        pairwise_sum(&per_path) / cache.n_paths as f64
    };
    let scale = envelope.abs().max(fd.abs()).max(1e-12);
    let fd_rel_gap = (envelope - fd).abs() / scale;
    Ok(ResidualEstimate {
        value,
        std_error,
        q_fraction,
        fd_rel_gap,
        fd_warning: fd_rel_gap > FD_WARN_TOL,
    })
}

/// Negotiated price and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct RiskSharingSolution {
    pub p_star: f64,
    pub residual: f64,
    pub residual_std_error: f64,
    /// Brent iterations.
    pub iterations: usize,
    /// Total residual evaluations, bracketing included.
    pub residual_evaluations: usize,
    /// Full-collateralization price (defined in the main mode).
    pub p_hat: Option<f64>,
    /// Per-node exposure summary under the solved price.
    pub delta_star_mean: f64,
    pub delta_star_p5: f64,
    pub delta_star_p95: f64,
    /// Local slope `d residual / dp` at the root.
    pub slope: f64,
    pub q_fraction: f64,
    pub clamped_paths: u64,
    pub fd_warning: bool,
}

/// Solves the first-order condition for the negotiated price by Brent root
/// finding over a deterministic residual (common random numbers across all
/// price evaluations), expanding the bracket from the hint until the sign
/// changes.
pub fn solve_p_star(
    setup: &EngineSetup,
    rule: CollateralRule,
    bracket_hint: Option<f64>,
) -> Result<RiskSharingSolution> {
    if rule == CollateralRule::ClosedFormAppendix {
        return Err(EngineError::Unsupported(
            "price solving applies to the main mode (optimal rule or singleton domain)".into(),
        ));
    }
    let prm = main_params(setup)?;
    let cache = build_residual_cache(setup)?;
    let mut evaluations = 0usize;
    let mut eval = |p: f64| -> Result<f64> {
        evaluations += 1;
        Ok(mpp_residual(setup, &cache, rule, p)?.value)
    };

    let center = bracket_hint
        .unwrap_or_else(|| p_hat(prm.gamma_a, prm.gamma_b, setup.agent_a.endowment, prm.nu_b, prm.lambda));
    let mut width = 0.5;
    let mut lo = center - width;
    let mut hi = center + width;
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    while f_lo.signum() == f_hi.signum() {
        if f_lo < f_hi {
            return Err(EngineError::Solver(format!(
                "residual is not decreasing on [{lo}, {hi}] ({f_lo} .. {f_hi}); \
                 first-order root finding does not apply"
            )));
        }
        width *= 2.0;
        lo = center - width;
        hi = center + width;
        if width > BRACKET_CAP {
            return Err(EngineError::Solver(format!(
                "no sign change of the residual within |p - {center}| <= {BRACKET_CAP}"
            )));
        }
        f_lo = eval(lo)?;
        f_hi = eval(hi)?;
    }
    if f_lo < 0.0 && f_hi > 0.0 {
        return Err(EngineError::Solver(
            "residual increases through zero; expected a decreasing residual".into(),
        ));
    }

    let mut brent_evals = 0usize;
    let result = brent_root(
        |p| {
            brent_evals += 1;
            mpp_residual(setup, &cache, rule, p)
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        },
        lo,
        hi,
        f_lo,
        f_hi,
        1e-12,
        200,
    )?;
    evaluations += brent_evals;
    let p_star = result.root;
    let at_root = mpp_residual(setup, &cache, rule, p_star)?;

    // Local slope for mapping residual noise into price uncertainty.
    let h = 1e-4 * p_star.abs().max(1.0);
    let slope =
        (mpp_residual(setup, &cache, rule, p_star + h)?.value
            - mpp_residual(setup, &cache, rule, p_star - h)?.value)
            / (2.0 * h);

    // Exposure summary at the solved price over all path-nodes.
    let n = setup.grid.n_steps;
    let mut deltas = Vec::with_capacity(cache.n_paths * n);
    for path in 0..cache.n_paths {
        let base = path * cache.n_nodes;
        for i in 0..n {
            let delta = match rule {
                CollateralRule::Fixed(d0) => d0,
                CollateralRule::ClosedFormMain => {
                    let v_a = cache.v_a0[base + i] + p_star;
                    let v_b = cache.v_b0[base + i] - p_star;
                    let ratio = prm.gamma_b / prm.gamma_a;
                    let x = v_a - ratio * (v_b - (prm.nu_b - p_star));
                    delta_star_main(p_star, x, setup.det.k[i], &prm)
                }
                CollateralRule::ClosedFormAppendix => unreachable!(),
            };
            deltas.push(delta);
        }
    }
    deltas.sort_by(|a, b| a.partial_cmp(b).expect("finite exposures"));
    let mean = pairwise_sum(&deltas) / deltas.len() as f64;
    let pct = |q: f64| deltas[((deltas.len() - 1) as f64 * q).round() as usize];

    Ok(RiskSharingSolution {
        p_star,
        residual: at_root.value,
        residual_std_error: at_root.std_error,
        iterations: result.evaluations,
        residual_evaluations: evaluations,
        p_hat: Some(p_hat(
            prm.gamma_a,
            prm.gamma_b,
            setup.agent_a.endowment,
            prm.nu_b,
            prm.lambda,
        )),
        delta_star_mean: mean,
        delta_star_p5: pct(0.05),
        delta_star_p95: pct(0.95),
        slope,
        q_fraction: at_root.q_fraction,
        clamped_paths: cache.clamped_paths,
        fd_warning: at_root.fd_warning,
    })
}

/// Candidate numerator sign probe used by tests: exposes `(I-, I+)` through
/// the public rule parameters.
pub fn candidates_at(
    setup: &EngineSetup,
    p: f64,
    x: f64,
    node: usize,
) -> Result<(f64, f64)> {
    let prm = main_params(setup)?;
    Ok(candidate_pair(p, x, setup.det.k[node], &prm))
}

/// Envelope integrand `(d/dp + d/dx) f_hat` at one grid node given the
/// reduced wealth levels there. Exposed for node-by-node comparisons against
/// analytically derived branch formulas.
pub fn envelope_integrand_node(
    setup: &EngineSetup,
    rule: CollateralRule,
    node: usize,
    p: f64,
    v_a: f64,
    v_b: f64,
) -> Result<f64> {
    let prm = main_params(setup)?;
    let mut clamped = false;
    Ok(node_integrand(setup, rule, &prm, node, p, v_a, v_b, &mut clamped).integrand)
}

/// Mean absolute exposure `|delta|` over all path-nodes under `rule` at
/// price `p` (comparative-statics summaries).
pub fn mean_abs_exposure(setup: &EngineSetup, rule: CollateralRule, p: f64) -> Result<f64> {
    let prm = main_params(setup)?;
    let n = setup.grid.n_steps;
    let sums = par_map_paths(setup.sim.n_paths, |idx| {
        let path = setup.simulate_path(idx, p)?;
        let mut acc = 0.0;
        for i in 0..n {
            acc += crate::objective::rule_delta(rule, &prm, setup, &path, p, i).abs();
        }
        Ok(acc / n as f64)
    })?;
    Ok(pairwise_sum(&sums) / sums.len() as f64)
}
