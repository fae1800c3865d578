//! Piecewise-constant curves of time.
//!
//! All deterministic time-dependent inputs (spreads, intensities, the endowed
//! residual) are right-continuous step functions: `values[i]` applies on
//! `[times[i], times[i+1])` and the last value extends to infinity. Integrals
//! are exact on segments, so no quadrature error enters through these curves.

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};

/// Scalar piecewise-constant function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseConstant {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl PiecewiseConstant {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        validate_breakpoints(&times, values.len(), "curve")?;
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(EngineError::config(
                    format!("curve.values[{i}]"),
                    "value must be finite",
                ));
            }
        }
        Ok(Self { times, values })
    }

    /// Curve with a single segment covering all of time.
    pub fn constant(value: f64) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment_index(&self, t: f64) -> usize {
        // Last i with times[i] <= t; t below times[0] clamps to the first segment.
        match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            i => i - 1,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.values[self.segment_index(t)]
    }

    /// Exact integral over `[a, b]`, `a <= b`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        if a >= b {
            return 0.0;
        }
        let mut total = 0.0;
        let mut left = a;
        let mut i = self.segment_index(a);
        while left < b {
            let right = if i + 1 < self.times.len() {
                self.times[i + 1].min(b)
            } else {
                b
            };
            total += self.values[i] * (right - left);
            left = right;
            i += 1;
        }
        total
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// True when every segment value is within `tol` of zero.
    pub fn is_zero(&self, tol: f64) -> bool {
        self.values.iter().all(|v| v.abs() <= tol)
    }

    /// True when the curve takes a single value everywhere.
    pub fn is_constant(&self) -> bool {
        self.values.windows(2).all(|w| w[0] == w[1])
    }

    /// Pointwise combination of several curves on their merged breakpoints.
    pub fn combine(curves: &[&PiecewiseConstant], f: impl Fn(&[f64]) -> f64) -> PiecewiseConstant {
        let mut times: Vec<f64> = curves.iter().flat_map(|c| c.times.iter().copied()).collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        times.dedup();
        let mut args = vec![0.0; curves.len()];
        let values = times
            .iter()
            .map(|&t| {
                for (a, c) in args.iter_mut().zip(curves) {
                    *a = c.value(t);
                }
                f(&args)
            })
            .collect();
        PiecewiseConstant { times, values }
    }
}

/// Vector-valued piecewise-constant function (used for custom hedge errors).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseVector {
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
}

impl PiecewiseVector {
    pub fn new(times: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        validate_breakpoints(&times, values.len(), "vector curve")?;
        let dim = values.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(EngineError::config("curve.values", "vectors must be non-empty"));
        }
        for (i, v) in values.iter().enumerate() {
            if v.len() != dim {
                return Err(EngineError::config(
                    format!("curve.values[{i}]"),
                    "all vectors must share one dimension",
                ));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(EngineError::config(
                    format!("curve.values[{i}]"),
                    "components must be finite",
                ));
            }
        }
        Ok(Self { times, values })
    }

    pub fn constant(value: Vec<f64>) -> Self {
        Self {
            times: vec![0.0],
            values: vec![value],
        }
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn value(&self, t: f64) -> &[f64] {
        let i = match self.times.partition_point(|&s| s <= t) {
            0 => 0,
            i => i - 1,
        };
        &self.values[i]
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|v| v.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs() <= tol
    }
}

fn validate_breakpoints(times: &[f64], n_values: usize, what: &str) -> Result<()> {
    if times.is_empty() {
        return Err(EngineError::config(
            format!("{what}.times"),
            "at least one breakpoint required",
        ));
    }
    if times[0] != 0.0 {
        return Err(EngineError::config(
            format!("{what}.times"),
            "first breakpoint must be 0",
        ));
    }
    if times.len() != n_values {
        return Err(EngineError::config(
            format!("{what}.times"),
            "times and values must have equal length",
        ));
    }
    for w in times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(EngineError::config(
                format!("{what}.times"),
                "breakpoints must be strictly increasing",
            ));
        }
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(EngineError::config(
            format!("{what}.times"),
            "breakpoints must be finite",
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_and_integral_on_segments() {
        let c = PiecewiseConstant::new(vec![0.0, 1.0, 2.0], vec![0.1, 0.2, 0.3]).unwrap();
        assert_eq!(c.value(0.0), 0.1);
        assert_eq!(c.value(0.999), 0.1);
        assert_eq!(c.value(1.0), 0.2);
        assert_eq!(c.value(5.0), 0.3);
        let exact = 0.1 + 0.2 + 0.3 * 0.5;
        assert!((c.integral(0.0, 2.5) - exact).abs() < 1e-15);
        assert!((c.integral(0.5, 1.5) - (0.05 + 0.1)).abs() < 1e-15);
        assert_eq!(c.integral(1.3, 1.3), 0.0);
    }

    #[test]
    fn integral_matches_fine_riemann_sum() {
        let c = PiecewiseConstant::new(vec![0.0, 0.4, 1.1], vec![0.03, 0.0, 0.07]).unwrap();
        let n = 200_000;
        let (a, b) = (0.0, 2.0);
        let dt = (b - a) / n as f64;
        let riemann: f64 = (0..n).map(|i| c.value(a + (i as f64 + 0.5) * dt) * dt).sum();
        assert!((c.integral(a, b) - riemann).abs() < 1e-9);
    }

    #[test]
    fn combine_merges_breakpoints() {
        let a = PiecewiseConstant::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let b = PiecewiseConstant::new(vec![0.0, 0.5], vec![10.0, 20.0]).unwrap();
        let s = PiecewiseConstant::combine(&[&a, &b], |v| v[0] + v[1]);
        assert_eq!(s.times(), &[0.0, 0.5, 1.0]);
        assert_eq!(s.value(0.25), 11.0);
        assert_eq!(s.value(0.75), 21.0);
        assert_eq!(s.value(1.5), 22.0);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewiseConstant::new(vec![0.5], vec![1.0]).is_err());
        assert!(PiecewiseConstant::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(PiecewiseConstant::new(vec![0.0], vec![f64::NAN]).is_err());
        assert!(PiecewiseVector::new(vec![0.0], vec![vec![1.0], vec![2.0]]).is_err());
    }
}
