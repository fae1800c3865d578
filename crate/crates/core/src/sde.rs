//! Path simulation of the reduced value processes on a fixed time grid.
//!
//! One shared Brownian driver feeds the short rate, the clean price, and the
//! reduced wealth processes of both agents. The clean price and its
//! volatility come from closed forms evaluated on the simulated rate path, so
//! Euler error enters only through the wealth drifts. Every path owns an RNG
//! stream keyed by its index; aggregation uses ordered pairwise reduction, so
//! results are bit-identical for any worker count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contract::{
    clamped_exp, AgentParams, AgentSide, CollateralDomain, ContractSpec, HedgePolicy,
};
use crate::curves::PiecewiseConstant;
use crate::error::{EngineError, Result};
use crate::grid::TimeGrid;
use crate::market::{cir_a2, cir_ln_a1, MarketModel, RateModel};
use crate::rng::{brownian_stream, fill_standard_normals};

/// Discretization scheme for the wealth SDEs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
}

impl Default for Scheme {
    fn default() -> Self {
        Scheme::Euler
    }
}

/// Monte Carlo controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub antithetic: bool,
    #[serde(default)]
    pub scheme: Scheme,
}

fn default_true() -> bool {
    true
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_paths: 10_000,
            n_steps: 100,
            seed: 42,
            antithetic: true,
            scheme: Scheme::Euler,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(EngineError::config("sim.n_paths", "must be at least 2"));
        }
        if self.n_steps == 0 {
            return Err(EngineError::config("sim.n_steps", "must be at least 1"));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(EngineError::config(
                "sim.n_paths",
                "must be even when antithetic sampling is on",
            ));
        }
        Ok(())
    }
}

/// Which cash-flow/utility variant is being run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Two risk-averse agents, non-incremental cash-flow.
    Main,
    /// Risk-neutral Agent A, incremental cash-flow, positive margin spread.
    Appendix,
}

/// Deterministic node grids shared by all paths.
#[derive(Debug, Clone)]
pub struct DetGrids {
    /// `B_t / B^A_t = exp(-int s_a)` and the analogue for B.
    pub disc_a: Vec<f64>,
    pub disc_b: Vec<f64>,
    /// `K_t = B^A_t / B^B_t`.
    pub k: Vec<f64>,
    /// Survival of the first default.
    pub g: Vec<f64>,
    pub h_a: Vec<f64>,
    pub h_b: Vec<f64>,
    pub s_a: Vec<f64>,
    pub s_b: Vec<f64>,
    pub s_am: Vec<f64>,
    pub s_bm: Vec<f64>,
    pub delta_e: Vec<f64>,
    /// Dependence correction `I_t = int_t^T G h_delta`.
    pub i_corr: Vec<f64>,
    /// CIR bond coefficients per node (`ln A1`, `A2`).
    pub cir_ln_a1: Option<Vec<f64>>,
    pub cir_a2: Option<Vec<f64>>,
    /// Deterministic money account and clean price for the constant model.
    pub det_bank: Option<Vec<f64>>,
    pub det_e: Option<Vec<f64>>,
}

/// Fully validated engine inputs plus precomputed deterministic grids.
#[derive(Debug, Clone)]
pub struct EngineSetup {
    pub market: MarketModel,
    pub agent_a: AgentParams,
    pub agent_b: AgentParams,
    pub contract: ContractSpec,
    pub hedge: HedgePolicy,
    pub sim: SimConfig,
    pub mode: Mode,
    pub grid: TimeGrid,
    pub det: DetGrids,
    pub dim: usize,
    /// Funding-adjusted risk premia `Lambda + b_i`.
    pub lambda_a: Vec<f64>,
    pub lambda_b: Vec<f64>,
    pub b_a: Vec<f64>,
    pub b_b: Vec<f64>,
    /// `gamma_b / gamma_a` in the main mode.
    pub gamma_ratio: Option<f64>,
    /// Exposure level of a singleton collateral domain (zero otherwise).
    pub delta_fixed: f64,
}

impl EngineSetup {
    pub fn new(
        market: MarketModel,
        agent_a: AgentParams,
        agent_b: AgentParams,
        contract: ContractSpec,
        hedge: HedgePolicy,
        sim: SimConfig,
        mode: Mode,
    ) -> Result<Self> {
        market.validate()?;
        let dim = market.dim();
        agent_a.validate("agent_a", dim)?;
        agent_b.validate("agent_b", dim)?;
        contract.validate()?;
        sim.validate()?;
        hedge.agent_a.validate("hedge.agent_a", dim)?;
        hedge.agent_b.validate("hedge.agent_b", dim)?;

        let singleton = matches!(contract.collateral_domain, CollateralDomain::Singleton(_));
        match mode {
            Mode::Main => {
                if agent_a.utility.is_risk_neutral() || agent_b.utility.is_risk_neutral() {
                    return Err(EngineError::config(
                        "mode",
                        "main mode requires exponential utilities for both agents",
                    ));
                }
                // Margin spreads break the closed-form rule unless the
                // collateral is pinned by a singleton domain.
                if !singleton
                    && (!agent_a.margin_spread.is_zero(0.0) || !agent_b.margin_spread.is_zero(0.0))
                {
                    return Err(EngineError::config(
                        "agent_a.margin_spread",
                        "main mode requires zero margin spreads unless the collateral domain is a singleton",
                    ));
                }
                if !contract.delta_e.is_zero(0.0) {
                    return Err(EngineError::config(
                        "contract.delta_e",
                        "endowed residual exposure is an appendix-mode input",
                    ));
                }
            }
            Mode::Appendix => {
                if !agent_a.utility.is_risk_neutral() {
                    return Err(EngineError::config(
                        "agent_a.utility",
                        "appendix mode requires a risk-neutral Agent A",
                    ));
                }
                if agent_b.utility.is_risk_neutral() {
                    return Err(EngineError::config(
                        "agent_b.utility",
                        "appendix mode requires an exponential-utility Agent B",
                    ));
                }
                if !agent_b.margin_spread.is_zero(0.0) {
                    return Err(EngineError::config(
                        "agent_b.margin_spread",
                        "appendix mode requires Agent B's margin spread to vanish",
                    ));
                }
                if agent_a.margin_spread.min_value() < 0.0 {
                    return Err(EngineError::config(
                        "agent_a.margin_spread",
                        "appendix mode requires a non-negative margin spread for Agent A",
                    ));
                }
            }
        }

        let grid = TimeGrid::new(contract.maturity, sim.n_steps)?;
        let det = build_det_grids(&market, &agent_a, &agent_b, &contract, &grid);
        let b_a = agent_a.premium_shift_padded(dim);
        let b_b = agent_b.premium_shift_padded(dim);
        let add = |shift: &[f64]| -> Vec<f64> {
            market
                .risk_premium
                .iter()
                .zip(shift)
                .map(|(l, b)| l + b)
                .collect()
        };
        let lambda_a = add(&b_a);
        let lambda_b = add(&b_b);
        let gamma_ratio = match (agent_a.utility.gamma(), agent_b.utility.gamma()) {
            (Some(ga), Some(gb)) => Some(gb / ga),
            _ => None,
        };
        let delta_fixed = match contract.collateral_domain {
            CollateralDomain::Singleton(d0) => d0,
            CollateralDomain::AllReals => 0.0,
        };
        Ok(EngineSetup {
            market,
            agent_a,
            agent_b,
            contract,
            hedge,
            sim,
            mode,
            grid,
            det,
            dim,
            lambda_a,
            lambda_b,
            b_a,
            b_b,
            gamma_ratio,
            delta_fixed,
        })
    }

    pub fn gamma_a(&self) -> Option<f64> {
        self.agent_a.utility.gamma()
    }

    pub fn gamma_b(&self) -> Option<f64> {
        self.agent_b.utility.gamma()
    }

    pub fn lambda(&self) -> f64 {
        self.contract.lambda
    }
}

fn node_values(curve: &PiecewiseConstant, grid: &TimeGrid) -> Vec<f64> {
    grid.times.iter().map(|&t| curve.value(t)).collect()
}

fn build_det_grids(
    market: &MarketModel,
    agent_a: &AgentParams,
    agent_b: &AgentParams,
    contract: &ContractSpec,
    grid: &TimeGrid,
) -> DetGrids {
    let n = grid.n_nodes();
    let mut disc_a = Vec::with_capacity(n);
    let mut disc_b = Vec::with_capacity(n);
    let mut k = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut i_corr = Vec::with_capacity(n);
    let intensities = &market.intensities;
    let h0 = intensities.h0();
    for &t in &grid.times {
        let int_a = agent_a.funding_spread.integral(0.0, t);
        let int_b = agent_b.funding_spread.integral(0.0, t);
        disc_a.push((-int_a).exp());
        disc_b.push((-int_b).exp());
        k.push((int_a - int_b).exp());
        g.push((-h0.integral(0.0, t)).exp());
        i_corr.push(intensities.correction_integral(t, grid.maturity));
    }
    let (cir_ln_a1_nodes, cir_a2_nodes, det_bank, det_e) = match market.rate_model {
        RateModel::Cir { k: kap, theta, rho, .. } => {
            let ln_a1 = grid
                .times
                .iter()
                .map(|&t| cir_ln_a1(kap, theta, rho, grid.maturity - t))
                .collect();
            let a2 = grid
                .times
                .iter()
                .map(|&t| cir_a2(kap, rho, grid.maturity - t))
                .collect();
            (Some(ln_a1), Some(a2), None, None)
        }
        RateModel::Constant { r } => {
            let bank = grid.times.iter().map(|&t| (r * t).exp()).collect();
            let e = grid
                .times
                .iter()
                .map(|&t| (-r * (grid.maturity - t)).exp())
                .collect();
            (None, None, Some(bank), Some(e))
        }
    };
    DetGrids {
        disc_a,
        disc_b,
        k,
        g,
        h_a: node_values(&intensities.h_a, grid),
        h_b: node_values(&intensities.h_b, grid),
        s_a: node_values(&agent_a.funding_spread, grid),
        s_b: node_values(&agent_b.funding_spread, grid),
        s_am: node_values(&agent_a.margin_spread, grid),
        s_bm: node_values(&agent_b.margin_spread, grid),
        delta_e: node_values(&contract.delta_e, grid),
        i_corr,
        cir_ln_a1: cir_ln_a1_nodes,
        cir_a2: cir_a2_nodes,
        det_bank,
        det_e,
    }
}

/// All per-node series of one simulated path.
#[derive(Debug, Clone)]
pub struct PathSeries {
    /// Short-rate level (clipped at zero for CIR evaluation).
    pub r: Vec<f64>,
    /// OIS money account `B_t`.
    pub bank: Vec<f64>,
    /// Discounted clean price `v = e / B^A`.
    pub v: Vec<f64>,
    /// Volatility `Z` of the discounted clean price, `(n+1) * dim`, row-major.
    pub z: Vec<f64>,
    /// Reduced wealth of Agent A, started at `nu_a + p`.
    pub v_a: Vec<f64>,
    /// Reduced wealth of Agent B, started at `nu_b - p`.
    pub v_b: Vec<f64>,
    /// Aggregate state integrated from its own drift (main mode).
    pub x: Option<Vec<f64>>,
    /// Change-of-measure weight `beta = G exp(-gamma_b (v_b - v_b_0))`.
    pub beta: Option<Vec<f64>>,
    /// Brownian increments, `n * dim`, retained for reuse.
    pub dw: Vec<f64>,
    /// Whether any exponent guard fired on this path.
    pub clamped: bool,
}

impl PathSeries {
    /// Funding-adjusted delta-risk component of agent A at node `i`.
    pub fn delta_a(&self, det: &DetGrids, i: usize, component: usize, dim: usize) -> f64 {
        det.disc_a[i] * self.z[i * dim + component]
    }

    pub fn delta_b(&self, det: &DetGrids, i: usize, component: usize, dim: usize) -> f64 {
        det.disc_b[i] * self.z[i * dim + component]
    }

    /// Funding account `B^A_t = B_t / disc_a`.
    pub fn bank_a(&self, det: &DetGrids, i: usize) -> f64 {
        self.bank[i] / det.disc_a[i]
    }

    pub fn bank_b(&self, det: &DetGrids, i: usize) -> f64 {
        self.bank[i] / det.disc_b[i]
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl EngineSetup {
    /// Draws the Brownian increments of `path` (antithetic partner paths
    /// reuse the even path's stream with flipped signs).
    pub fn draw_increments(&self, path: u64) -> Vec<f64> {
        let n = self.grid.n_steps * self.dim;
        let mut dw = vec![0.0; n];
        let (stream, flip) = if self.sim.antithetic && path % 2 == 1 {
            (path - 1, true)
        } else {
            (path, false)
        };
        let mut rng = brownian_stream(self.sim.seed, stream);
        fill_standard_normals(&mut rng, &mut dw);
        let sqrt_dt = self.grid.dt.sqrt();
        let scale = if flip { -sqrt_dt } else { sqrt_dt };
        for z in dw.iter_mut() {
            *z *= scale;
        }
        dw
    }

    /// Simulates one path with freshly drawn increments.
    pub fn simulate_path(&self, path: u64, p: f64) -> Result<PathSeries> {
        let dw = self.draw_increments(path);
        self.simulate_path_with_increments(path, p, dw)
    }

    /// Simulates one path from externally supplied increments
    /// (`n_steps * dim`, already scaled by `sqrt(dt)`).
    pub fn simulate_path_with_increments(
        &self,
        path: u64,
        p: f64,
        dw: Vec<f64>,
    ) -> Result<PathSeries> {
        let n = self.grid.n_steps;
        let dim = self.dim;
        debug_assert_eq!(dw.len(), n * dim);
        let dt = self.grid.dt;
        let det = &self.det;
        let n_nodes = n + 1;

        let mut r = vec![0.0; n_nodes];
        let mut bank = vec![0.0; n_nodes];
        let mut v = vec![0.0; n_nodes];
        let mut z = vec![0.0; n_nodes * dim];

        match self.market.rate_model {
            RateModel::Constant { r: level } => {
                let det_bank = det.det_bank.as_ref().expect("constant-model grids");
                let det_e = det.det_e.as_ref().expect("constant-model grids");
                for i in 0..n_nodes {
                    r[i] = level;
                    bank[i] = det_bank[i];
                    v[i] = det.disc_a[i] * det_e[i] / det_bank[i];
                }
            }
            RateModel::Cir { k, theta, rho, r0 } => {
                let ln_a1 = det.cir_ln_a1.as_ref().expect("CIR grids");
                let a2 = det.cir_a2.as_ref().expect("CIR grids");
                let premium = self.market.risk_premium[0];
                // Full-truncation Euler under the physical measure: the
                // risk-neutral drift picks up rho sqrt(r) Lambda.
                let mut state = r0;
                let mut log_bank = 0.0f64;
                for i in 0..n_nodes {
                    let level = state.max(0.0);
                    r[i] = level;
                    bank[i] = log_bank.exp();
                    let price = (ln_a1[i] - level * a2[i]).exp();
                    v[i] = det.disc_a[i] * price / bank[i];
                    z[i * dim] = -rho * level.sqrt() * a2[i] * price / bank[i];
                    if i < n {
                        let vol = rho * level.sqrt();
                        state += (k * (theta - level) + vol * premium) * dt + vol * dw[i * dim];
                        log_bank += level * dt;
                    }
                }
            }
        }

        let nu_a = self.agent_a.endowment;
        let nu_b = self.agent_b.endowment;
        let mut v_a = vec![0.0; n_nodes];
        let mut v_b = vec![0.0; n_nodes];
        v_a[0] = nu_a + p;
        v_b[0] = nu_b - p;
        let ratio = self.gamma_ratio;
        let mut x = ratio.map(|_| {
            let mut xs = vec![0.0; n_nodes];
            xs[0] = nu_a + p;
            xs
        });

        let mut phi_a = vec![0.0; dim];
        let mut phi_b = vec![0.0; dim];
        let mut delta_a = vec![0.0; dim];
        let mut delta_b = vec![0.0; dim];
        let d0 = self.delta_fixed;

        for i in 0..n {
            let t = self.grid.times[i];
            for c in 0..dim {
                delta_a[c] = det.disc_a[i] * z[i * dim + c];
                delta_b[c] = det.disc_b[i] * z[i * dim + c];
            }
            self.hedge.agent_a.phi(AgentSide::A, t, &delta_a, &mut phi_a);
            self.hedge.agent_b.phi(AgentSide::B, t, &delta_b, &mut phi_b);
            let dw_i = &dw[i * dim..(i + 1) * dim];

            let drift_a = dot(&phi_a, &self.lambda_a)
                + dot(&delta_a, &self.b_a)
                + (det.s_a[i] - det.s_am[i]) * v[i]
                + det.s_am[i] * d0;
            let drift_b = dot(&phi_b, &self.lambda_b)
                - dot(&delta_b, &self.b_b)
                - (det.s_b[i] - det.s_bm[i]) * det.k[i] * v[i]
                - det.s_bm[i] * det.k[i] * d0;
            v_a[i + 1] = v_a[i] + drift_a * dt + dot(&phi_a, dw_i);
            v_b[i + 1] = v_b[i] + drift_b * dt + dot(&phi_b, dw_i);

            if let (Some(xs), Some(ratio)) = (x.as_mut(), ratio) {
                // Coded from the aggregate-state dynamics directly, not as
                // v_a - ratio (v_b - v_b_0); the equality of the two routes
                // is a tested invariant.
                let drift_x = (det.s_a[i] - det.s_am[i]) * v[i]
                    + ratio * (det.s_b[i] - det.s_bm[i]) * det.k[i] * v[i]
                    + det.s_am[i] * d0
                    + ratio * det.s_bm[i] * det.k[i] * d0
                    + dot(&phi_a, &self.lambda_a)
                    - ratio * dot(&phi_b, &self.lambda_b)
                    + dot(&delta_a, &self.b_a)
                    + ratio * dot(&delta_b, &self.b_b);
                let mut diff_x = 0.0;
                for c in 0..dim {
                    diff_x += (phi_a[c] - ratio * phi_b[c]) * dw_i[c];
                }
                xs[i + 1] = xs[i] + drift_x * dt + diff_x;
            }
        }

        let mut clamped = false;
        let beta = self.agent_b.utility.gamma().map(|gamma_b| {
            (0..n_nodes)
                .map(|i| det.g[i] * clamped_exp(-gamma_b * (v_b[i] - v_b[0]), &mut clamped))
                .collect::<Vec<f64>>()
        });

        for (series, data) in [("v_a", &v_a), ("v_b", &v_b)] {
            if let Some(node) = data.iter().position(|y| !y.is_finite()) {
                return Err(EngineError::NonFinite { series, path, node });
            }
        }
        if let Some(xs) = &x {
            if let Some(node) = xs.iter().position(|y| !y.is_finite()) {
                return Err(EngineError::NonFinite { series: "x", path, node });
            }
        }

        Ok(PathSeries {
            r,
            bank,
            v,
            z,
            v_a,
            v_b,
            x,
            beta,
            dw,
            clamped,
        })
    }
}

/// A fully retained simulation (diagnostics and moderate path counts; the
/// estimators stream paths instead).
#[derive(Debug, Clone)]
pub struct PathBundle {
    pub p: f64,
    pub paths: Vec<PathSeries>,
}

/// Simulates and retains all paths, in path order.
pub fn simulate_bundle(setup: &EngineSetup, p: f64) -> Result<PathBundle> {
    let paths = par_map_paths(setup.sim.n_paths, |i| setup.simulate_path(i, p))?;
    Ok(PathBundle { p, paths })
}

/// Ordered parallel map over path indices. Each worker owns disjoint indices;
/// the output vector is indexed by path, so downstream reductions are
/// schedule-independent.
pub fn par_map_paths<T: Send>(
    n_paths: usize,
    f: impl Fn(u64) -> Result<T> + Send + Sync,
) -> Result<Vec<T>> {
    (0..n_paths as u64)
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<T>>>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::{Dividend, HedgeMode, Utility};
    use crate::curves::PiecewiseVector;
    use crate::market::IntensityCurve;
    use approx::assert_relative_eq;

    fn flat_agent(gamma: f64, nu: f64) -> AgentParams {
        AgentParams {
            utility: Utility::Exponential { gamma },
            endowment: nu,
            loss_rate: 0.5,
            funding_spread: PiecewiseConstant::zero(),
            margin_spread: PiecewiseConstant::zero(),
            premium_shift: vec![],
        }
    }

    fn base_setup(rate: RateModel) -> EngineSetup {
        EngineSetup::new(
            MarketModel {
                rate_model: rate,
                risk_premium: vec![0.2],
                remuneration: PiecewiseConstant::zero(),
                intensities: IntensityCurve {
                    h_a: PiecewiseConstant::constant(0.02),
                    h_b: PiecewiseConstant::constant(0.03),
                    h_delta: PiecewiseConstant::zero(),
                },
            },
            flat_agent(1.0, 0.1),
            flat_agent(2.0, 0.3),
            ContractSpec {
                maturity: 1.0,
                dividend: Dividend::UnitBondPaidByA,
                lambda: 1.5,
                delta_e: PiecewiseConstant::zero(),
                collateral_domain: CollateralDomain::AllReals,
            },
            HedgePolicy {
                agent_a: HedgeMode::DeltaHedge,
                agent_b: HedgeMode::Naked,
            },
            SimConfig {
                n_paths: 64,
                n_steps: 50,
                seed: 9,
                antithetic: true,
                scheme: Scheme::Euler,
            },
            Mode::Main,
        )
        .unwrap()
    }

    #[test]
    fn zero_everything_keeps_wealth_constant() {
        // No spreads, premia, hedging error, or vol: v_a and v_b are flat
        // and the aggregate state sticks to its start.
        let mut setup = base_setup(RateModel::Constant { r: 0.0 });
        setup.hedge.agent_b = HedgeMode::DeltaHedge;
        let setup = EngineSetup::new(
            MarketModel {
                risk_premium: vec![0.0],
                ..setup.market
            },
            setup.agent_a,
            setup.agent_b,
            setup.contract,
            setup.hedge,
            setup.sim,
            Mode::Main,
        )
        .unwrap();
        let path = setup.simulate_path(3, 0.25).unwrap();
        for i in 0..=setup.grid.n_steps {
            assert_eq!(path.v_a[i], 0.1 + 0.25);
            assert_eq!(path.v_b[i], 0.3 - 0.25);
            assert_eq!(path.x.as_ref().unwrap()[i], 0.35);
            assert_eq!(path.v[i], 1.0); // r = 0, s_a = 0: v is identically 1
            assert_eq!(path.z[i], 0.0);
        }
    }

    #[test]
    fn constant_model_discounted_price_is_flat_product() {
        // r = 0.01 with zero spread: v_t = e^{-r(T-t)} e^{-r t} = e^{-rT}.
        let setup = base_setup(RateModel::Constant { r: 0.01 });
        let path = setup.simulate_path(0, 0.0).unwrap();
        for i in 0..=setup.grid.n_steps {
            assert_relative_eq!(path.v[i], (-0.01f64).exp(), max_relative = 1e-14);
        }
    }

    #[test]
    fn cir_price_path_matches_closed_form_recomputation() {
        let rate = RateModel::Cir { k: 0.5, theta: 0.04, rho: 0.1, r0: 0.03 };
        let setup = base_setup(rate.clone());
        let path = setup.simulate_path(1, 0.0).unwrap();
        for i in 0..=setup.grid.n_steps {
            let t = setup.grid.times[i];
            let r = path.r[i].max(1e-12);
            let e = crate::market::cir_bond_price(t, r, &rate, 1.0).unwrap();
            let expected = setup.det.disc_a[i] * e / path.bank[i];
            assert_relative_eq!(path.v[i], expected, max_relative = 1e-9);
            let z = crate::market::cir_bond_delta(t, r, &rate, 1.0, path.bank[i]).unwrap();
            assert_relative_eq!(path.z[i], z, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn aggregate_state_identity_holds_nodewise() {
        let setup = base_setup(RateModel::Cir { k: 0.5, theta: 0.04, rho: 0.1, r0: 0.03 });
        let bundle = simulate_bundle(&setup, 0.15).unwrap();
        let ratio = setup.gamma_ratio.unwrap();
        for path in &bundle.paths {
            let xs = path.x.as_ref().unwrap();
            for i in 0..=setup.grid.n_steps {
                let algebraic = path.v_a[i] - ratio * (path.v_b[i] - path.v_b[0]);
                assert!(
                    (xs[i] - algebraic).abs() <= 1e-10,
                    "node {i}: {} vs {}",
                    xs[i],
                    algebraic
                );
            }
        }
    }

    #[test]
    fn antithetic_partner_flips_increments() {
        let setup = base_setup(RateModel::Constant { r: 0.01 });
        let even = setup.simulate_path(4, 0.0).unwrap();
        let odd = setup.simulate_path(5, 0.0).unwrap();
        for (a, b) in even.dw.iter().zip(&odd.dw) {
            assert_eq!(a.to_bits(), (-b).to_bits());
        }
    }

    #[test]
    fn identical_seed_is_bit_identical() {
        let setup = base_setup(RateModel::Cir { k: 0.5, theta: 0.04, rho: 0.1, r0: 0.03 });
        let one = setup.simulate_path(7, 0.2).unwrap();
        let two = setup.simulate_path(7, 0.2).unwrap();
        assert_eq!(one.v_a.len(), two.v_a.len());
        for (a, b) in one.v_a.iter().zip(&two.v_a) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn euler_refinement_converges_at_first_order() {
        // Constant-rate model, constant hedge error: with coupled increments
        // the diffusion term is resolution-exact, so the terminal error is
        // pure drift quadrature, O(dt).
        let mut agent_a = flat_agent(1.0, 0.0);
        agent_a.funding_spread = PiecewiseConstant::constant(0.004);
        let contract = ContractSpec {
            maturity: 1.0,
            dividend: Dividend::UnitBondPaidByA,
            lambda: 1.0,
            delta_e: PiecewiseConstant::zero(),
            collateral_domain: CollateralDomain::AllReals,
        };
        let market = MarketModel {
            rate_model: RateModel::Constant { r: 0.02 },
            risk_premium: vec![0.25],
            remuneration: PiecewiseConstant::zero(),
            intensities: IntensityCurve {
                h_a: PiecewiseConstant::constant(0.02),
                h_b: PiecewiseConstant::constant(0.02),
                h_delta: PiecewiseConstant::zero(),
            },
        };
        let hedge = HedgePolicy {
            agent_a: HedgeMode::DeltaHedge,
            agent_b: HedgeMode::Custom(PiecewiseVector::constant(vec![0.3])),
        };
        let steps = [50usize, 100, 200, 400];
        let fine = 800usize;
        let fine_setup = EngineSetup::new(
            market.clone(),
            agent_a.clone(),
            flat_agent(1.0, 0.0),
            contract.clone(),
            hedge.clone(),
            SimConfig { n_paths: 2, n_steps: fine, seed: 33, antithetic: false, scheme: Scheme::Euler },
            Mode::Main,
        )
        .unwrap();
        let fine_dw = fine_setup.draw_increments(0);

        let x_at = |n_steps: usize| -> f64 {
            let setup = EngineSetup::new(
                market.clone(),
                agent_a.clone(),
                flat_agent(1.0, 0.0),
                contract.clone(),
                hedge.clone(),
                SimConfig { n_paths: 2, n_steps, seed: 33, antithetic: false, scheme: Scheme::Euler },
                Mode::Main,
            )
            .unwrap();
            // Coarsen the fine increments by block sums; scaling by sqrt(dt)
            // is already baked into the fine draws.
            let factor = fine / n_steps;
            let dw: Vec<f64> = (0..n_steps)
                .map(|i| fine_dw[i * factor..(i + 1) * factor].iter().sum())
                .collect();
            let path = setup.simulate_path_with_increments(0, 0.1, dw).unwrap();
            *path.x.as_ref().unwrap().last().unwrap()
        };

        let xs: Vec<f64> = steps.iter().map(|&n| x_at(n)).collect();
        // Successive refinement differences |X(n) - X(2n)| scale like dt for
        // a first-order scheme: consecutive ratios should be about 2.
        let diffs: Vec<f64> = xs.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        for w in diffs.windows(2) {
            let slope = (w[0] / w[1]).log2();
            assert!((0.7..=1.4).contains(&slope), "refinement diffs {diffs:?}");
        }
    }

    #[test]
    fn mode_validation() {
        let setup = base_setup(RateModel::Constant { r: 0.01 });
        // Margin spread without a singleton domain is rejected in main mode.
        let mut agent_a = setup.agent_a.clone();
        agent_a.margin_spread = PiecewiseConstant::constant(0.001);
        let err = EngineSetup::new(
            setup.market.clone(),
            agent_a.clone(),
            setup.agent_b.clone(),
            setup.contract.clone(),
            setup.hedge.clone(),
            setup.sim,
            Mode::Main,
        )
        .unwrap_err();
        assert!(err.to_string().contains("margin_spread"));
        // The same spread is fine when the collateral domain is a singleton.
        let mut contract = setup.contract.clone();
        contract.collateral_domain = CollateralDomain::Singleton(0.25);
        let ok = EngineSetup::new(
            setup.market.clone(),
            agent_a,
            setup.agent_b.clone(),
            contract,
            setup.hedge.clone(),
            setup.sim,
            Mode::Main,
        );
        assert!(ok.is_ok());
        assert_eq!(ok.unwrap().delta_fixed, 0.25);
        // Odd path count with antithetic sampling is rejected.
        let mut sim = setup.sim;
        sim.n_paths = 63;
        assert!(EngineSetup::new(
            setup.market.clone(),
            setup.agent_a.clone(),
            setup.agent_b.clone(),
            setup.contract.clone(),
            setup.hedge.clone(),
            sim,
            Mode::Main,
        )
        .is_err());
    }
}
