//! Optimal variation margin.
//!
//! Main mode (two risk-averse agents): the pointwise optimum of the reduced
//! objective has the closed form `delta* = max(0, I+) + min(0, I-)` where the
//! two candidates share one numerator and differ only in the loss rate that
//! scales the denominator. It depends on the loss rates but not on the
//! default intensities.
//!
//! Appendix mode (risk-neutral Agent A, incremental cash-flow): the optimum
//! is the better of two branch maxima of a kinked concave objective, with the
//! kink at minus the endowed residual.
//!
//! Both rules are cross-checked by a golden-section brute force on each
//! concavity piece.

use crate::contract::{negative_part, positive_part};
use crate::error::{EngineError, Result};
use crate::optim::maximize_smooth;

/// Hard cap for the brute-force bound expansion.
const BRUTE_FORCE_CAP: f64 = 1e6;

// ---------------------------------------------------------------------------
// Main mode
// ---------------------------------------------------------------------------

/// Pointwise inputs of the main-mode rule that do not vary along a path.
#[derive(Debug, Clone, Copy)]
pub struct MainCollateralParams {
    pub gamma_a: f64,
    pub gamma_b: f64,
    pub nu_b: f64,
    pub lambda: f64,
    pub l_a: f64,
    pub l_b: f64,
}

/// Post-default utility weight of Agent A:
/// `psi_a(delta) = h_a e^{-gamma_a l_a delta^+} + h_b e^{gamma_a l_b delta^-}`.
pub fn psi_a(delta: f64, h_a: f64, h_b: f64, l_a: f64, l_b: f64, gamma_a: f64) -> f64 {
    h_a * (-gamma_a * l_a * positive_part(delta)).exp()
        + h_b * (gamma_a * l_b * negative_part(delta)).exp()
}

/// Post-default utility weight of Agent B:
/// `psi_b(delta) = h_a e^{gamma_b l_a k delta^+} + h_b e^{-gamma_b l_b k delta^-}`.
pub fn psi_b(delta: f64, h_a: f64, h_b: f64, l_a: f64, l_b: f64, gamma_b: f64, k: f64) -> f64 {
    h_a * (gamma_b * l_a * k * positive_part(delta)).exp()
        + h_b * (-gamma_b * l_b * k * negative_part(delta)).exp()
}

/// Shared numerator of the two first-order candidates.
#[inline]
fn candidate_numerator(p: f64, x: f64, k: f64, prm: &MainCollateralParams) -> f64 {
    prm.gamma_b * prm.nu_b
        - prm.gamma_b * p
        - prm.gamma_a * x
        - (prm.lambda * k * prm.gamma_b / prm.gamma_a).ln()
}

/// First-order candidates `(I-, I+)`. They share the numerator, so they share
/// its sign; `I-` divides by the loss rate of B, `I+` by that of A.
pub fn candidate_pair(p: f64, x: f64, k: f64, prm: &MainCollateralParams) -> (f64, f64) {
    let numerator = candidate_numerator(p, x, k, prm);
    let scale = prm.gamma_b * k + prm.gamma_a;
    (numerator / (prm.l_b * scale), numerator / (prm.l_a * scale))
}

/// Closed-form optimal uncollateralized exposure,
/// `delta* = max(0, I+) + min(0, I-)`; at most one term is nonzero.
pub fn delta_star_main(p: f64, x: f64, k: f64, prm: &MainCollateralParams) -> f64 {
    let (i_minus, i_plus) = candidate_pair(p, x, k, prm);
    i_plus.max(0.0) + i_minus.min(0.0)
}

/// Pointwise objective maximized by the main-mode rule (per unit of survival
/// weight). The two branches are the post-default utility mixes for positive
/// and negative exposure; they agree at zero.
pub fn main_pointwise_objective(
    delta: f64,
    p: f64,
    x: f64,
    k: f64,
    h_a: f64,
    h_b: f64,
    prm: &MainCollateralParams,
) -> f64 {
    let u_a = |y: f64| -(-prm.gamma_a * y).exp();
    let u_b = |y: f64| -(-prm.gamma_b * y).exp();
    let w = prm.nu_b - p;
    if delta >= 0.0 {
        h_a * (u_a(x + prm.l_a * delta) + prm.lambda * u_b(w - prm.l_a * k * delta))
            + h_b * (u_a(x) + prm.lambda * u_b(w))
    } else {
        h_b * (u_a(x + prm.l_b * delta) + prm.lambda * u_b(w - prm.l_b * k * delta))
            + h_a * (u_a(x) + prm.lambda * u_b(w))
    }
}

// ---------------------------------------------------------------------------
// Appendix mode
// ---------------------------------------------------------------------------

/// Pointwise inputs of the appendix rule (risk-neutral Agent A, positive
/// margin spread, endowed residual).
#[derive(Debug, Clone, Copy)]
pub struct AppendixCollateralParams {
    pub gamma_b: f64,
    pub lambda: f64,
    pub l_a: f64,
    pub l_b: f64,
    /// Intensities at the node.
    pub h_a: f64,
    pub h_b: f64,
    /// Funding-ratio `K` and survival `G` at the node.
    pub k: f64,
    pub g: f64,
    /// Dependence correction integral `I_t`; zero for independent defaults.
    pub i_corr: f64,
    /// Agent A's margin spread at the node.
    pub s_am: f64,
    /// Endowed residual exposure at the node.
    pub delta_e: f64,
    /// Delta-independent drift pieces of the objective (may be zero when only
    /// the argmax or an objective gap is needed).
    pub v_tilde_a: f64,
    pub alpha_a: f64,
    pub h_delta: f64,
}

fn appendix_log_argument(
    h_loss: f64,
    term: &'static str,
    prm: &AppendixCollateralParams,
) -> Result<f64> {
    if !(h_loss > 0.0) {
        return Err(EngineError::LogDomain { term, value: h_loss });
    }
    let numerator = prm.g * (h_loss + prm.s_am) + prm.s_am * prm.i_corr;
    if !(numerator > 0.0) {
        return Err(EngineError::LogDomain { term, value: numerator });
    }
    Ok(numerator / (prm.g * prm.lambda * prm.gamma_b * prm.k * h_loss))
}

/// Interior first-order candidates `(I-, I+)` of the appendix rule.
pub fn appendix_candidates(v_b: f64, prm: &AppendixCollateralParams) -> Result<(f64, f64)> {
    let arg_minus = appendix_log_argument(prm.h_b * prm.l_b, "h_b * l_b", prm)?;
    let arg_plus = appendix_log_argument(prm.h_a * prm.l_a, "h_a * l_a", prm)?;
    let i_minus = -positive_part(prm.delta_e)
        + v_b / (prm.k * prm.l_b)
        + arg_minus.ln() / (prm.gamma_b * prm.k * prm.l_b);
    let i_plus = negative_part(prm.delta_e)
        + v_b / (prm.k * prm.l_a)
        + arg_plus.ln() / (prm.gamma_b * prm.k * prm.l_a);
    Ok((i_minus, i_plus))
}

/// Reduced-form candidates valid when the margin spread vanishes: the log
/// argument collapses and the survival level cancels.
pub fn appendix_candidates_reduced(v_b: f64, prm: &AppendixCollateralParams) -> (f64, f64) {
    let log_term = (prm.lambda * prm.gamma_b * prm.k).ln();
    (
        -positive_part(prm.delta_e) + v_b / (prm.k * prm.l_b)
            - log_term / (prm.gamma_b * prm.k * prm.l_b),
        negative_part(prm.delta_e) + v_b / (prm.k * prm.l_a)
            - log_term / (prm.gamma_b * prm.k * prm.l_a),
    )
}

/// Pointwise appendix objective `g_tilde + I s_am delta`, kinked at
/// `-delta_e` and concave on each side of the kink.
pub fn appendix_pointwise_objective(
    delta: f64,
    v_b: f64,
    prm: &AppendixCollateralParams,
) -> f64 {
    let u_b = |y: f64| -(-prm.gamma_b * y).exp();
    let de_pos = positive_part(prm.delta_e);
    let de_neg = negative_part(prm.delta_e);
    let common = prm.h_delta * prm.v_tilde_a + prm.alpha_a;
    let g_tilde = if delta + prm.delta_e >= 0.0 {
        common
            + (prm.h_a * prm.l_a + prm.s_am) * delta
            + (prm.h_b * prm.l_b - prm.h_a * prm.l_a) * de_neg
            + prm.lambda * prm.h_a * u_b(v_b - prm.l_a * prm.k * (delta - de_neg))
            + prm.lambda * prm.h_b * u_b(v_b - prm.l_b * prm.k * de_neg)
    } else {
        common
            + (prm.h_b * prm.l_b + prm.s_am) * delta
            + (prm.h_b * prm.l_b - prm.h_a * prm.l_a) * de_pos
            + prm.lambda * prm.h_b * u_b(v_b - prm.l_b * prm.k * (delta + de_pos))
            + prm.lambda * prm.h_a * u_b(v_b + prm.l_a * prm.k * de_pos)
    };
    prm.g * g_tilde + prm.i_corr * prm.s_am * delta
}

/// Appendix-mode optimal exposure: best of the two branch maxima
/// `max(I+, -delta_e)` and `min(I-, -delta_e)`; ties resolve to the candidate
/// with the smaller magnitude.
pub fn delta_star_appendix(v_b: f64, prm: &AppendixCollateralParams) -> Result<f64> {
    let (i_minus, i_plus) = appendix_candidates(v_b, prm)?;
    let kink = -prm.delta_e;
    let c_plus = i_plus.max(kink);
    let c_minus = i_minus.min(kink);
    let w_plus = appendix_pointwise_objective(c_plus, v_b, prm);
    let w_minus = appendix_pointwise_objective(c_minus, v_b, prm);
    Ok(pick_larger(c_plus, w_plus, c_minus, w_minus))
}

/// Larger objective wins; an exact tie returns the smaller |delta| (less
/// collateral movement).
fn pick_larger(x1: f64, w1: f64, x2: f64, w2: f64) -> f64 {
    if w1 > w2 {
        x1
    } else if w2 > w1 {
        x2
    } else if x1.abs() <= x2.abs() {
        x1
    } else {
        x2
    }
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

/// Verification problem for [`brute_force_delta`].
pub enum BruteForceProblem<'a> {
    Main {
        p: f64,
        x: f64,
        k: f64,
        h_a: f64,
        h_b: f64,
        params: &'a MainCollateralParams,
    },
    Appendix {
        v_b: f64,
        params: &'a AppendixCollateralParams,
    },
    /// Margin fixed by the collateral domain: nothing to optimize.
    Fixed(f64),
}

/// Golden-section brute force over the two concavity pieces of the pointwise
/// objective; the split sits at zero in the main mode and at `-delta_e` in
/// the appendix mode. Bounds expand (doubling) until the boundary derivative
/// confirms an interior maximum or the `1e6` cap is hit.
pub fn brute_force_delta(problem: &BruteForceProblem<'_>) -> Result<f64> {
    match problem {
        BruteForceProblem::Fixed(d0) => Ok(*d0),
        BruteForceProblem::Main { p, x, k, h_a, h_b, params } => {
            let f = |delta: f64| main_pointwise_objective(delta, *p, *x, *k, *h_a, *h_b, params);
            maximize_piecewise(&f, 0.0)
        }
        BruteForceProblem::Appendix { v_b, params } => {
            let f = |delta: f64| appendix_pointwise_objective(delta, *v_b, params);
            maximize_piecewise(&f, -params.delta_e)
        }
    }
}

fn central_derivative(f: &impl Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-6 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

fn maximize_piecewise(f: &impl Fn(f64) -> f64, split: f64) -> Result<f64> {
    // Right piece [split, hi].
    let mut hi = split + 1.0;
    while central_derivative(f, hi) > 0.0 {
        hi = split + 2.0 * (hi - split);
        if hi - split > BRUTE_FORCE_CAP {
            return Err(EngineError::Solver(
                "brute-force collateral search: right maximum not bracketed within |delta| <= 1e6"
                    .into(),
            ));
        }
    }
    // Left piece [lo, split].
    let mut lo = split - 1.0;
    while central_derivative(f, lo) < 0.0 {
        lo = split - 2.0 * (split - lo);
        if split - lo > BRUTE_FORCE_CAP {
            return Err(EngineError::Solver(
                "brute-force collateral search: left maximum not bracketed within |delta| <= 1e6"
                    .into(),
            ));
        }
    }
    let (x_plus, w_plus) = maximize_smooth(f, split, hi);
    let (x_minus, w_minus) = maximize_smooth(f, lo, split);
    let best = pick_larger(x_plus, w_plus, x_minus, w_minus);
    // The kink itself is a candidate; preferring it on a tie snaps
    // boundary maxima onto the split exactly.
    let w_split = f(split);
    let w_best = f(best);
    if w_split >= w_best {
        Ok(split)
    } else {
        Ok(best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn symmetric() -> MainCollateralParams {
        MainCollateralParams {
            gamma_a: 1.0,
            gamma_b: 1.0,
            nu_b: 0.0,
            lambda: 1.0,
            l_a: 0.5,
            l_b: 0.5,
        }
    }

    #[test]
    fn psi_examples() {
        assert_relative_eq!(psi_a(0.0, 0.02, 0.03, 0.5, 0.5, 1.0), 0.05, max_relative = 1e-15);
        assert_relative_eq!(
            psi_a(1.0, 0.02, 0.03, 0.5, 0.5, 1.0),
            0.02 * (-0.5f64).exp() + 0.03,
            max_relative = 1e-15
        );
        assert_eq!(psi_a(2.0, 0.0, 0.0, 0.5, 0.5, 1.0), 0.0);
        assert_relative_eq!(psi_b(0.0, 0.02, 0.03, 0.5, 0.5, 1.0, 1.0), 0.05, max_relative = 1e-15);
        // delta < 0 loads the B-default branch with the negative part.
        assert_relative_eq!(
            psi_b(-1.0, 0.02, 0.03, 0.5, 0.5, 1.0, 1.0),
            0.02 + 0.03 * (-0.5f64).exp(),
            max_relative = 1e-15
        );
        assert_eq!(psi_b(-1.0, 0.0, 0.0, 0.5, 0.5, 1.0, 1.0), 0.0);
        assert!(psi_a(-3.0, 0.01, 0.02, 0.5, 0.5, 2.0) > 0.0);
    }

    #[test]
    fn candidate_examples() {
        let prm = symmetric();
        // Exact cancellation of the numerator.
        let (im, ip) = candidate_pair(0.2, -0.2, 1.0, &prm);
        assert_eq!((im, ip), (0.0, 0.0));
        assert_eq!(delta_star_main(0.2, -0.2, 1.0, &prm), 0.0);
        // Hand evaluation: numerator 1, denominators 0.5 * 2.
        let (im, ip) = candidate_pair(0.0, -1.0, 1.0, &prm);
        assert_relative_eq!(im, 1.0, max_relative = 1e-14);
        assert_relative_eq!(ip, 1.0, max_relative = 1e-14);
        assert_relative_eq!(delta_star_main(0.0, -1.0, 1.0, &prm), 1.0, max_relative = 1e-14);
        // Mirrored sign.
        assert_relative_eq!(delta_star_main(0.0, 1.0, 1.0, &prm), -1.0, max_relative = 1e-14);
    }

    #[test]
    fn at_most_one_candidate_active() {
        let prm = MainCollateralParams {
            gamma_a: 0.7,
            gamma_b: 2.1,
            nu_b: 0.4,
            lambda: 1.3,
            l_a: 0.4,
            l_b: 0.9,
            };
        for x in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let (im, ip) = candidate_pair(0.1, x, 1.1, &prm);
            assert!(im.signum() * ip.signum() >= 0.0);
            let d = delta_star_main(0.1, x, 1.1, &prm);
            if d > 0.0 {
                assert_relative_eq!(d, ip, max_relative = 1e-14);
            } else if d < 0.0 {
                assert_relative_eq!(d, im, max_relative = 1e-14);
            }
        }
    }

    #[test]
    fn brute_force_matches_closed_form_main() {
        let prm = MainCollateralParams {
            gamma_a: 0.8,
            gamma_b: 1.7,
            nu_b: 0.3,
            lambda: 1.4,
            l_a: 0.6,
            l_b: 0.35,
        };
        for (p, x, k) in [(0.1, -0.7, 1.05), (-0.4, 0.9, 0.92), (0.0, 0.0, 1.0), (1.2, 1.1, 1.3)] {
            let closed = delta_star_main(p, x, k, &prm);
            let oracle = brute_force_delta(&BruteForceProblem::Main {
                p,
                x,
                k,
                h_a: 0.02,
                h_b: 0.05,
                params: &prm,
            })
            .unwrap();
            assert!(
                (closed - oracle).abs() <= 1e-6,
                "closed {closed} vs brute {oracle} at p={p}, x={x}, k={k}"
            );
            let w_closed = main_pointwise_objective(closed, p, x, k, 0.02, 0.05, &prm);
            let w_oracle = main_pointwise_objective(oracle, p, x, k, 0.02, 0.05, &prm);
            assert!(w_closed >= w_oracle - 1e-10);
        }
    }

    #[test]
    fn rule_is_independent_of_intensities() {
        // The brute force sees the intensities; the argmax must not.
        let prm = symmetric();
        let (p, x, k) = (0.2, -1.1, 1.0);
        let a = brute_force_delta(&BruteForceProblem::Main { p, x, k, h_a: 0.01, h_b: 0.09, params: &prm }).unwrap();
        let b = brute_force_delta(&BruteForceProblem::Main { p, x, k, h_a: 0.2, h_b: 0.003, params: &prm }).unwrap();
        let closed = delta_star_main(p, x, k, &prm);
        assert!((a - closed).abs() <= 1e-6);
        assert!((b - closed).abs() <= 1e-6);
    }

    #[test]
    fn rising_bargaining_power_pushes_exposure_down() {
        let mut prm = symmetric();
        let (p, x, k) = (0.05, -0.4, 1.0);
        let d1 = brute_force_delta(&BruteForceProblem::Main { p, x, k, h_a: 0.02, h_b: 0.02, params: &prm }).unwrap();
        prm.lambda = std::f64::consts::E;
        let d2 = brute_force_delta(&BruteForceProblem::Main { p, x, k, h_a: 0.02, h_b: 0.02, params: &prm }).unwrap();
        assert!(d2 < d1);
    }

    #[test]
    fn fixed_mode_returns_input() {
        assert_eq!(brute_force_delta(&BruteForceProblem::Fixed(0.37)).unwrap(), 0.37);
    }

    fn appendix_params() -> AppendixCollateralParams {
        AppendixCollateralParams {
            gamma_b: 1.0,
            lambda: 1.0,
            l_a: 0.5,
            l_b: 0.5,
            h_a: 0.02,
            h_b: 0.03,
            k: 1.0,
            g: 0.95,
            i_corr: 0.0,
            s_am: 0.0,
            delta_e: 0.0,
            v_tilde_a: 0.0,
            alpha_a: 0.0,
            h_delta: 0.0,
        }
    }

    #[test]
    fn appendix_reduced_form_with_unit_log() {
        // lambda gamma_b k = 1 makes the log vanish: candidates are v_b / l.
        let prm = appendix_params();
        for v_b in [-0.3, 0.0, 0.4, 1.7] {
            let (im, ip) = appendix_candidates(v_b, &prm).unwrap();
            assert_relative_eq!(im, v_b / 0.5, max_relative = 1e-13, epsilon = 1e-14);
            assert_relative_eq!(ip, v_b / 0.5, max_relative = 1e-13, epsilon = 1e-14);
            let (rm, rp) = appendix_candidates_reduced(v_b, &prm);
            assert_relative_eq!(im, rm, max_relative = 1e-14, epsilon = 1e-15);
            assert_relative_eq!(ip, rp, max_relative = 1e-14, epsilon = 1e-15);
        }
    }

    #[test]
    fn appendix_rule_ignores_survival_level_without_margin_spread() {
        let mut prm = appendix_params();
        prm.lambda = 1.3;
        prm.k = 1.1;
        prm.delta_e = 0.2;
        let d1 = delta_star_appendix(0.6, &prm).unwrap();
        prm.g = 0.5;
        let d2 = delta_star_appendix(0.6, &prm).unwrap();
        assert_eq!(d1.to_bits(), d2.to_bits());
    }

    #[test]
    fn appendix_rule_matches_brute_force() {
        let mut prm = appendix_params();
        prm.s_am = 0.004;
        prm.i_corr = 0.02;
        prm.delta_e = -0.3;
        prm.lambda = 1.2;
        prm.gamma_b = 1.6;
        prm.k = 1.05;
        for v_b in [-1.0, -0.2, 0.3, 1.4] {
            let closed = delta_star_appendix(v_b, &prm).unwrap();
            let oracle = brute_force_delta(&BruteForceProblem::Appendix { v_b, params: &prm }).unwrap();
            assert!(
                (closed - oracle).abs() <= 1e-6,
                "closed {closed} vs brute {oracle} at v_b={v_b}"
            );
            let gap = appendix_pointwise_objective(closed, v_b, &prm)
                - appendix_pointwise_objective(oracle, v_b, &prm);
            assert!(gap >= -1e-10);
        }
    }

    #[test]
    fn appendix_objective_continuous_at_kink() {
        let mut prm = appendix_params();
        prm.delta_e = 0.4;
        prm.s_am = 0.002;
        prm.i_corr = 0.01;
        let at = appendix_pointwise_objective(-0.4, 0.3, &prm);
        let below = appendix_pointwise_objective(-0.4 - 1e-12, 0.3, &prm);
        assert_relative_eq!(at, below, epsilon = 1e-9);
    }

    #[test]
    fn appendix_log_domain_errors_name_the_term() {
        let mut prm = appendix_params();
        prm.h_a = 0.0;
        let err = delta_star_appendix(0.1, &prm).unwrap_err();
        assert!(err.to_string().contains("h_a * l_a"), "{err}");
    }

    proptest! {
        #[test]
        fn delta_star_nonincreasing_in_x_and_p(
            x1 in -3.0f64..3.0,
            dx in 0.0f64..2.0,
            p1 in -2.0f64..2.0,
            dp in 0.0f64..2.0,
            k in 0.7f64..1.4,
        ) {
            let prm = MainCollateralParams {
                gamma_a: 1.2, gamma_b: 0.8, nu_b: 0.2, lambda: 1.1, l_a: 0.5, l_b: 0.7,
            };
            let base = delta_star_main(p1, x1, k, &prm);
            prop_assert!(delta_star_main(p1, x1 + dx, k, &prm) <= base + 1e-12);
            prop_assert!(delta_star_main(p1 + dp, x1, k, &prm) <= base + 1e-12);
        }

        #[test]
        fn delta_star_is_lipschitz_in_x(x in -3.0f64..3.0, eps in 1e-6f64..1e-2) {
            let prm = symmetric();
            let lip = prm.gamma_a / (prm.l_a.min(prm.l_b) * (prm.gamma_b + prm.gamma_a));
            let d0 = delta_star_main(0.1, x, 1.0, &prm);
            let d1 = delta_star_main(0.1, x + eps, 1.0, &prm);
            prop_assert!((d1 - d0).abs() <= lip * eps * (1.0 + 1e-9) + 1e-15);
        }

        #[test]
        fn active_loss_rate_shrinks_exposure(
            x in -3.0f64..3.0,
            p in -1.0f64..1.0,
            bump in 0.05f64..0.4,
        ) {
            let mut prm = MainCollateralParams {
                gamma_a: 1.0, gamma_b: 1.5, nu_b: 0.1, lambda: 1.2, l_a: 0.5, l_b: 0.5,
            };
            let d = delta_star_main(p, x, 1.0, &prm);
            if d > 0.0 {
                prm.l_a = (prm.l_a + bump).min(1.0);
                let d2 = delta_star_main(p, x, 1.0, &prm);
                prop_assert!(d2.abs() <= d.abs() + 1e-12);
            } else if d < 0.0 {
                prm.l_b = (prm.l_b + bump).min(1.0);
                let d2 = delta_star_main(p, x, 1.0, &prm);
                prop_assert!(d2.abs() <= d.abs() + 1e-12);
            }
        }

        #[test]
        fn closed_form_is_locally_optimal(
            x in -2.0f64..2.0,
            p in -1.0f64..1.0,
            k in 0.8f64..1.25,
        ) {
            let prm = MainCollateralParams {
                gamma_a: 0.9, gamma_b: 1.3, nu_b: 0.25, lambda: 0.9, l_a: 0.45, l_b: 0.8,
            };
            let d = delta_star_main(p, x, k, &prm);
            let w = main_pointwise_objective(d, p, x, k, 0.03, 0.04, &prm);
            for eps in [1e-4, 1e-2] {
                prop_assert!(w + 1e-12 >= main_pointwise_objective(d + eps, p, x, k, 0.03, 0.04, &prm));
                prop_assert!(w + 1e-12 >= main_pointwise_objective(d - eps, p, x, k, 0.03, 0.04, &prm));
            }
        }
    }
}
