//! Market model: OIS short-rate models, zero-coupon clean-price closed forms,
//! survival probabilities, and default-time sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::curves::PiecewiseConstant;
use crate::error::{EngineError, Result};
use crate::rng::{brownian_stream, fill_standard_normals, mean_and_std_error};

/// Sentinel for "never defaults" (zero hazard beyond the last segment).
pub const NO_DEFAULT: f64 = f64::INFINITY;

/// OIS short-rate model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateModel {
    /// Flat deterministic rate.
    Constant { r: f64 },
    /// Square-root diffusion `dr = k (theta - r) dt + rho sqrt(r) dW`.
    Cir { k: f64, theta: f64, rho: f64, r0: f64 },
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateModel::Constant { r } => {
                if !(r >= 0.0) || !r.is_finite() {
                    return Err(EngineError::config("market.rate_model.r", "must be >= 0 and finite"));
                }
            }
            RateModel::Cir { k, theta, rho, r0 } => {
                for (name, v) in [("k", k), ("theta", theta), ("rho", rho), ("r0", r0)] {
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(EngineError::config(
                            format!("market.rate_model.{name}"),
                            "must be > 0 and finite",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Feller condition `2 k theta >= rho^2`; informational only.
    pub fn feller_holds(&self) -> Option<bool> {
        match *self {
            RateModel::Constant { .. } => None,
            RateModel::Cir { k, theta, rho, .. } => Some(2.0 * k * theta >= rho * rho),
        }
    }
}

/// Deterministic default intensities of the two parties plus the dependence
/// correction `h_delta = h - h0` (zero when default times are independent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityCurve {
    pub h_a: PiecewiseConstant,
    pub h_b: PiecewiseConstant,
    #[serde(default = "PiecewiseConstant::zero")]
    pub h_delta: PiecewiseConstant,
}

impl IntensityCurve {
    pub fn validate(&self) -> Result<()> {
        if self.h_a.min_value() < 0.0 {
            return Err(EngineError::config("market.intensities.h_a", "must be non-negative"));
        }
        if self.h_b.min_value() < 0.0 {
            return Err(EngineError::config("market.intensities.h_b", "must be non-negative"));
        }
        if self.h0().min_value() < -1e-12 {
            return Err(EngineError::config(
                "market.intensities.h_delta",
                "h_a + h_b - h_delta must stay non-negative (survival must be non-increasing)",
            ));
        }
        Ok(())
    }

    /// First-to-default intensity `h0 = h_a + h_b - h_delta`.
    pub fn h0(&self) -> PiecewiseConstant {
        PiecewiseConstant::combine(&[&self.h_a, &self.h_b, &self.h_delta], |v| v[0] + v[1] - v[2])
    }

    pub fn independent(&self) -> bool {
        self.h_delta.is_zero(0.0)
    }

    /// Correction integral `I(t) = int_t^T G_s h_delta_s ds`, exact on
    /// segments (G is piecewise exponential there).
    pub fn correction_integral(&self, t: f64, maturity: f64) -> f64 {
        if t >= maturity {
            return 0.0;
        }
        let h0 = self.h0();
        let mut cuts: Vec<f64> = h0
            .times()
            .iter()
            .chain(self.h_delta.times())
            .copied()
            .filter(|&u| u > t && u < maturity)
            .collect();
        cuts.push(t);
        cuts.push(maturity);
        cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        cuts.dedup();
        let mut total = 0.0;
        for w in cuts.windows(2) {
            let (u0, u1) = (w[0], w[1]);
            let c = h0.value(u0);
            let d = self.h_delta.value(u0);
            if d == 0.0 {
                continue;
            }
            let g0 = survival(u0, self);
            total += if c.abs() > 0.0 {
                d * g0 * (-(-c * (u1 - u0)).exp_m1()) / c
            } else {
                d * g0 * (u1 - u0)
            };
        }
        total
    }
}

/// Short-rate model, risk premium, remuneration rate, default intensities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketModel {
    pub rate_model: RateModel,
    /// Risk premium vector (one entry per Brownian component).
    pub risk_premium: Vec<f64>,
    /// Remuneration rate on posted margin; margin spreads are quoted net of it.
    #[serde(default = "PiecewiseConstant::zero")]
    pub remuneration: PiecewiseConstant,
    pub intensities: IntensityCurve,
}

impl MarketModel {
    pub fn validate(&self) -> Result<()> {
        self.rate_model.validate()?;
        if self.risk_premium.is_empty() {
            return Err(EngineError::config("market.risk_premium", "needs at least one component"));
        }
        if self.risk_premium.iter().any(|x| !x.is_finite()) {
            return Err(EngineError::config("market.risk_premium", "components must be finite"));
        }
        self.intensities.validate()
    }

    pub fn dim(&self) -> usize {
        self.risk_premium.len()
    }
}

// ---------------------------------------------------------------------------
// CIR zero-coupon closed forms
// ---------------------------------------------------------------------------

/// `a = sqrt(k^2 + 2 rho^2)`.
fn cir_a(k: f64, rho: f64) -> f64 {
    (k * k + 2.0 * rho * rho).sqrt()
}

/// Exponent coefficient `A2(t, T)` of the CIR bond price.
pub fn cir_a2(k: f64, rho: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    let a = cir_a(k, rho);
    let em1 = (a * tau).exp_m1();
    2.0 * em1 / (2.0 * a + (a + k) * em1)
}

/// `ln A1(t, T)` of the CIR bond price.
///
/// Algebraically identical to `(2 k theta / rho^2) * ln[2 a e^{(a+k) tau / 2}
/// / (2 a + (a+k)(e^{a tau} - 1))]`, but written so the `rho -> 0` limit stays
/// accurate: with `a - k = 2 rho^2 / (a + k)` the rho^2 factors cancel against
/// the outer `1 / rho^2` before any subtraction happens.
pub fn cir_ln_a1(k: f64, theta: f64, rho: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return 0.0;
    }
    if rho * rho == 0.0 {
        // Deterministic limit (also covers rho^2 underflow):
        // ln A1 = theta ((1 - e^{-k tau}) / k - tau).
        return theta * ((-(-k * tau).exp_m1()) / k - tau);
    }
    let a = cir_a(k, rho);
    let ak = a + k;
    let q0 = 2.0 * rho * rho / (ak * ak);
    let q1 = q0 * (-a * tau).exp();
    2.0 * k * theta * (-tau / ak + (q0.ln_1p() - q1.ln_1p()) / (rho * rho))
}

/// Clean price `e(t, r) = A1(t,T) exp(-r A2(t,T))` of a unit zero-coupon bond
/// under the CIR model; requires `0 <= t <= T` and `r > 0`.
pub fn cir_bond_price(t: f64, r: f64, model: &RateModel, maturity: f64) -> Result<f64> {
    let RateModel::Cir { k, theta, rho, .. } = *model else {
        return Err(EngineError::Domain {
            op: "cir_bond_price",
            message: "rate model is not CIR".into(),
        });
    };
    if t > maturity || t < 0.0 {
        return Err(EngineError::Domain {
            op: "cir_bond_price",
            message: format!("time {t} outside [0, {maturity}]"),
        });
    }
    if !(r > 0.0) {
        return Err(EngineError::Domain {
            op: "cir_bond_price",
            message: format!("rate level {r} must be positive"),
        });
    }
    Ok(cir_bond_price_unchecked(k, theta, rho, maturity - t, r))
}

/// Price evaluation without domain checks; accepts `r >= 0` (full-truncation
/// paths clip negative excursions to zero).
pub(crate) fn cir_bond_price_unchecked(k: f64, theta: f64, rho: f64, tau: f64, r: f64) -> f64 {
    (cir_ln_a1(k, theta, rho, tau) - r * cir_a2(k, rho, tau)).exp()
}

/// Volatility of the discounted clean price,
/// `Z(t) = -rho sqrt(r) A2(t,T) B_t^{-1} e(t)`.
pub fn cir_bond_delta(t: f64, r: f64, model: &RateModel, maturity: f64, bank: f64) -> Result<f64> {
    let RateModel::Cir { k, rho, .. } = *model else {
        return Err(EngineError::Domain {
            op: "cir_bond_delta",
            message: "rate model is not CIR".into(),
        });
    };
    if !(bank > 0.0) {
        return Err(EngineError::Domain {
            op: "cir_bond_delta",
            message: format!("money account {bank} must be positive"),
        });
    }
    let price = cir_bond_price(t, r, model, maturity)?;
    Ok(-rho * r.sqrt() * cir_a2(k, rho, maturity - t) * price / bank)
}

/// Discount factor of the deterministic mean path `dr = k (theta - r) dt`,
/// i.e. `exp(-int_0^T r_bar)` with `r_bar(s) = theta + (r0 - theta) e^{-ks}`.
pub fn cir_mean_path_discount(k: f64, theta: f64, r0: f64, maturity: f64) -> f64 {
    let integral = theta * maturity + (r0 - theta) * (-(-k * maturity).exp_m1()) / k;
    (-integral).exp()
}

/// Risk-neutral Monte Carlo estimate of `E[exp(-int_0^T r ds)]` under CIR with
/// full-truncation Euler. Returns `(estimate, standard_error)`. This is the
/// independent cross-check for the closed-form bond price.
pub fn cir_mc_bond_price(
    model: &RateModel,
    maturity: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let RateModel::Cir { k, theta, rho, r0 } = *model else {
        return Err(EngineError::Domain {
            op: "cir_mc_bond_price",
            message: "rate model is not CIR".into(),
        });
    };
    let dt = maturity / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut payoffs = vec![0.0; n_paths];
    let mut z = vec![0.0; n_steps];
    for (path, payoff) in payoffs.iter_mut().enumerate() {
        let mut rng = brownian_stream(seed, path as u64);
        fill_standard_normals(&mut rng, &mut z);
        let mut x = r0;
        // Trapezoidal accumulation of int r dt keeps the quadrature bias
        // below the Euler transition bias.
        let mut integral = 0.0;
        for &dz in &z {
            let rp = x.max(0.0);
            let x_next = x + k * (theta - rp) * dt + rho * rp.sqrt() * sqrt_dt * dz;
            integral += 0.5 * (rp + x_next.max(0.0)) * dt;
            x = x_next;
        }
        *payoff = (-integral).exp();
    }
    Ok(mean_and_std_error(&payoffs))
}

// ---------------------------------------------------------------------------
// Survival and default times
// ---------------------------------------------------------------------------

/// Survival probability of the first default,
/// `G(t) = exp(-int_0^t (h_a + h_b - h_delta))`.
pub fn survival(t: f64, intensities: &IntensityCurve) -> f64 {
    (-intensities.h0().integral(0.0, t)).exp()
}

/// Inverts the cumulative hazard of a piecewise-constant intensity at the
/// uniform draw `u`; returns [`NO_DEFAULT`] when the total hazard is
/// exhausted (including the boundary draw `u = 1`).
pub fn invert_piecewise_hazard(h: &PiecewiseConstant, u: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&u));
    if u >= 1.0 {
        return NO_DEFAULT;
    }
    let target = -(-u).ln_1p(); // -ln(1 - u)
    let times = h.times();
    let values = h.values();
    let mut accumulated = 0.0;
    for i in 0..times.len() {
        let width = if i + 1 < times.len() {
            times[i + 1] - times[i]
        } else {
            f64::INFINITY
        };
        let rate = values[i];
        if rate > 0.0 {
            let step = if width.is_finite() { rate * width } else { f64::INFINITY };
            if accumulated + step >= target {
                return times[i] + (target - accumulated) / rate;
            }
            accumulated += step;
        }
    }
    NO_DEFAULT
}

/// Samples independent default times `(tau_a, tau_b)` with hazards
/// `(h_a, h_b)` by inverse CDF. Only valid for independent defaults,
/// so a nonzero `h_delta` is rejected.
pub fn sample_default_times(
    intensities: &IntensityCurve,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    if !intensities.independent() {
        return Err(EngineError::Unsupported(
            "default-time sampling requires independent defaults (h_delta = 0); \
             the joint law is unspecified otherwise"
                .into(),
        ));
    }
    let u_a: f64 = rng.random();
    let u_b: f64 = rng.random();
    Ok((
        invert_piecewise_hazard(&intensities.h_a, u_a),
        invert_piecewise_hazard(&intensities.h_b, u_b),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cir() -> RateModel {
        RateModel::Cir { k: 0.5, theta: 0.04, rho: 0.1, r0: 0.03 }
    }

    fn flat_intensities(a: f64, b: f64) -> IntensityCurve {
        IntensityCurve {
            h_a: PiecewiseConstant::constant(a),
            h_b: PiecewiseConstant::constant(b),
            h_delta: PiecewiseConstant::zero(),
        }
    }

    /// Naive transcription of the printed A1/A2 expressions, used to pin the
    /// rearranged stable form to the original algebra.
    fn naive_price(k: f64, theta: f64, rho: f64, tau: f64, r: f64) -> f64 {
        let a = (k * k + 2.0 * rho * rho).sqrt();
        let e = (a * tau).exp();
        let a1 = (2.0 * a * ((a + k) * tau / 2.0).exp() / (2.0 * a + (a + k) * (e - 1.0)))
            .powf(2.0 * k * theta / (rho * rho));
        let a2 = 2.0 * (e - 1.0) / (2.0 * a + (a + k) * (e - 1.0));
        a1 * (-r * a2).exp()
    }

    #[test]
    fn price_at_maturity_is_one() {
        for r in [1e-4, 0.03, 0.2] {
            assert_eq!(cir_bond_price(1.0, r, &cir(), 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn stable_form_matches_printed_formula() {
        for rho in [0.01, 0.1, 0.4] {
            for tau in [0.05, 0.5, 1.0, 7.0] {
                for r in [0.005, 0.03, 0.12] {
                    let stable = cir_bond_price_unchecked(0.5, 0.04, rho, tau, r);
                    let naive = naive_price(0.5, 0.04, rho, tau, r);
                    assert_relative_eq!(stable, naive, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn price_in_unit_interval_and_decreasing_in_rate() {
        let model = cir();
        let mut last = f64::INFINITY;
        for i in 1..60 {
            let r = 0.002 * i as f64;
            let p = cir_bond_price(0.2, r, &model, 1.5).unwrap();
            assert!(p > 0.0 && p <= 1.0);
            assert!(p < last);
            last = p;
        }
    }

    #[test]
    fn vanishing_vol_recovers_deterministic_discount() {
        // rho -> 0 collapses the short rate onto its mean ODE path.
        let (k, theta, r0, t) = (0.5, 0.04, 0.03, 1.0);
        let model = RateModel::Cir { k, theta, rho: 1e-8, r0 };
        let p = cir_bond_price(0.0, r0, &model, t).unwrap();
        let det = cir_mean_path_discount(k, theta, r0, t);
        assert_relative_eq!(p, det, max_relative = 1e-10);
    }

    #[test]
    fn closed_form_price_within_mc_band() {
        let model = cir();
        let (mc, se) = cir_mc_bond_price(&model, 1.0, 100_000, 200, 11).unwrap();
        let exact = cir_bond_price(0.0, 0.03, &model, 1.0).unwrap();
        assert!(
            (mc - exact).abs() <= 3.0 * se,
            "closed form {exact} vs MC {mc} +- {se}"
        );
    }

    #[test]
    fn delta_sign_zeros_and_fd_consistency() {
        let model = cir();
        assert_eq!(cir_bond_delta(1.0, 0.03, &model, 1.0, 1.0).unwrap(), 0.0);
        let degenerate = RateModel::Cir { k: 0.5, theta: 0.04, rho: 0.0, r0: 0.03 };
        assert_eq!(cir_bond_delta(0.0, 0.03, &degenerate, 1.0, 1.0).unwrap(), 0.0);

        // Z against central finite differences of e in r, scaled by the
        // diffusion coefficient rho sqrt(r) / B.
        let (t, maturity, bank) = (0.0, 1.0, 1.0);
        for i in 0..100 {
            let r = 0.005 + 0.001 * i as f64;
            let z = cir_bond_delta(t, r, &model, maturity, bank).unwrap();
            let h = r * 1e-6;
            let up = cir_bond_price(t, r + h, &model, maturity).unwrap();
            let dn = cir_bond_price(t, r - h, &model, maturity).unwrap();
            let fd = (up - dn) / (2.0 * h) * 0.1 * r.sqrt() / bank;
            assert_relative_eq!(z, fd, max_relative = 1e-6);
            assert!(z < 0.0);
        }
    }

    #[test]
    fn survival_examples() {
        let flat = flat_intensities(0.02, 0.02);
        assert_eq!(survival(0.0, &flat), 1.0);
        assert_relative_eq!(survival(1.0, &flat), (-0.04f64).exp(), max_relative = 1e-14);

        // Degenerate full dependence: h0 = 0 keeps survival at one.
        let degenerate = IntensityCurve {
            h_a: PiecewiseConstant::constant(0.02),
            h_b: PiecewiseConstant::constant(0.02),
            h_delta: PiecewiseConstant::constant(0.04),
        };
        for t in [0.0, 0.5, 3.0] {
            assert_eq!(survival(t, &degenerate), 1.0);
        }
    }

    #[test]
    fn survival_matches_quadrature_on_step_curve() {
        let curve = IntensityCurve {
            h_a: PiecewiseConstant::new(vec![0.0, 0.5], vec![0.02, 0.05]).unwrap(),
            h_b: PiecewiseConstant::new(vec![0.0, 0.8], vec![0.01, 0.03]).unwrap(),
            h_delta: PiecewiseConstant::zero(),
        };
        let h0 = curve.h0();
        let n = 400_000;
        let t = 1.7;
        let dt = t / n as f64;
        // Midpoint cells straddling the breakpoints cap the accuracy.
        let quad: f64 = (0..n).map(|i| h0.value((i as f64 + 0.5) * dt) * dt).sum();
        assert_relative_eq!(survival(t, &curve), (-quad).exp(), max_relative = 1e-6);
    }

    #[test]
    fn survival_is_nonincreasing() {
        let curve = flat_intensities(0.05, 0.01);
        let mut last = 1.0;
        for i in 0..50 {
            let g = survival(0.1 * i as f64, &curve);
            assert!(g <= last + 1e-15);
            last = g;
        }
    }

    #[test]
    fn hazard_inversion_edges() {
        let h = PiecewiseConstant::constant(0.02);
        assert_eq!(invert_piecewise_hazard(&h, 1.0), NO_DEFAULT);
        assert_eq!(invert_piecewise_hazard(&h, 0.0), 0.0);
        let none = PiecewiseConstant::zero();
        assert_eq!(invert_piecewise_hazard(&none, 0.73), NO_DEFAULT);
        // Hazard that dies after t = 1: draws beyond the exhausted mass never default.
        let capped = PiecewiseConstant::new(vec![0.0, 1.0], vec![0.5, 0.0]).unwrap();
        let u_low = 1.0 - (-0.25f64).exp();
        assert_relative_eq!(invert_piecewise_hazard(&capped, u_low), 0.5, max_relative = 1e-12);
        assert_eq!(invert_piecewise_hazard(&capped, 0.5), NO_DEFAULT);
    }

    #[test]
    fn sampled_default_times_match_survival() {
        let curve = flat_intensities(0.02, 0.1);
        let mut rng = crate::rng::default_time_stream(9, 0);
        let n = 100_000;
        let mut alive_a = 0u32;
        let mut alive_b = 0u32;
        for _ in 0..n {
            let (ta, tb) = sample_default_times(&curve, &mut rng).unwrap();
            assert!(ta > 0.0 && tb > 0.0);
            if ta > 1.0 {
                alive_a += 1;
            }
            if tb > 1.0 {
                alive_b += 1;
            }
        }
        for (alive, h) in [(alive_a, 0.02f64), (alive_b, 0.1)] {
            let p = (-h).exp();
            let se = (p * (1.0 - p) / n as f64).sqrt();
            let freq = alive as f64 / n as f64;
            assert!((freq - p).abs() <= 3.0 * se, "freq {freq} vs {p} +- {se}");
        }
    }

    #[test]
    fn zero_hazard_never_defaults() {
        let curve = IntensityCurve {
            h_a: PiecewiseConstant::zero(),
            h_b: PiecewiseConstant::constant(0.02),
            h_delta: PiecewiseConstant::zero(),
        };
        let mut rng = crate::rng::default_time_stream(5, 1);
        for _ in 0..100 {
            let (ta, _) = sample_default_times(&curve, &mut rng).unwrap();
            assert_eq!(ta, NO_DEFAULT);
        }
    }

    #[test]
    fn sampling_rejects_dependent_defaults() {
        let curve = IntensityCurve {
            h_a: PiecewiseConstant::constant(0.02),
            h_b: PiecewiseConstant::constant(0.02),
            h_delta: PiecewiseConstant::constant(0.01),
        };
        let mut rng = crate::rng::default_time_stream(5, 2);
        assert!(sample_default_times(&curve, &mut rng).is_err());
    }

    #[test]
    fn correction_integral_zero_for_independent_defaults() {
        let curve = flat_intensities(0.02, 0.03);
        assert_eq!(curve.correction_integral(0.0, 5.0), 0.0);
    }

    #[test]
    fn correction_integral_matches_quadrature() {
        let curve = IntensityCurve {
            h_a: PiecewiseConstant::constant(0.04),
            h_b: PiecewiseConstant::new(vec![0.0, 1.0], vec![0.02, 0.05]).unwrap(),
            h_delta: PiecewiseConstant::new(vec![0.0, 0.6], vec![0.01, 0.02]).unwrap(),
        };
        let (t, maturity) = (0.25, 2.0);
        let n = 400_000;
        let dt = (maturity - t) / n as f64;
        let quad: f64 = (0..n)
            .map(|i| {
                let s = t + (i as f64 + 0.5) * dt;
                survival(s, &curve) * curve.h_delta.value(s) * dt
            })
            .sum();
        assert_relative_eq!(curve.correction_integral(t, maturity), quad, max_relative = 1e-8);
    }

    #[test]
    fn domain_errors() {
        let model = cir();
        assert!(cir_bond_price(1.5, 0.02, &model, 1.0).is_err());
        assert!(cir_bond_price(0.5, 0.0, &model, 1.0).is_err());
        assert!(cir_bond_price(0.5, -0.01, &model, 1.0).is_err());
        assert!(cir_bond_delta(0.5, 0.02, &model, 1.0, 0.0).is_err());
        let flat = RateModel::Constant { r: 0.02 };
        assert!(cir_bond_price(0.0, 0.02, &flat, 1.0).is_err());
    }

    #[test]
    fn feller_flag() {
        assert_eq!(cir().feller_holds(), Some(true));
        let tight = RateModel::Cir { k: 0.1, theta: 0.01, rho: 0.3, r0: 0.02 };
        assert_eq!(tight.feller_holds(), Some(false));
        assert_eq!(RateModel::Constant { r: 0.01 }.feller_holds(), None);
    }
}
