//! Uniform time grid on `[0, T]`.

use crate::error::{EngineError, Result};

/// Uniform grid with `n_steps + 1` nodes; node `i` sits at `T * i / n_steps`,
/// so the last node is exactly the maturity. Time integrals over `[0, T]`
/// use left-point quadrature, matching the predictable-integrand convention.
#[derive(Debug, Clone)]
pub struct TimeGrid {
    pub maturity: f64,
    pub n_steps: usize,
    pub dt: f64,
    pub times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(maturity: f64, n_steps: usize) -> Result<Self> {
        if !(maturity > 0.0) || !maturity.is_finite() {
            return Err(EngineError::config("contract.maturity", "must be positive and finite"));
        }
        if n_steps == 0 {
            return Err(EngineError::config("sim.n_steps", "must be at least 1"));
        }
        let times = (0..=n_steps)
            .map(|i| maturity * i as f64 / n_steps as f64)
            .collect();
        Ok(Self {
            maturity,
            n_steps,
            dt: maturity / n_steps as f64,
            times,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }
}
