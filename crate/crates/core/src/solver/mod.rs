//! Exact per-step curtailment optimisation.
//!
//! The objective (rewards plus weighted squared comfort margins) separates by
//! resident, so each resident contributes a short list of [`ResidentOption`]s
//! and the fleet problem becomes a multiple-choice knapsack over the reduction
//! amount. [`solve_step`] solves it exactly by dynamic programming on the
//! power grid; [`solve_exhaustive`] is the brute-force reference.

mod dp;
mod exhaustive;
pub mod lp;
pub mod milp;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{comfort_cost, reward_cost, Cost};
use crate::model::{
    comfort_margin_total, estimate_ac_temp, estimate_ewh_temp, ModelError, PowerGrid, ResidentId,
    ResidentProfile, RewardSchedule, SeasonMode, ThermalState,
};
use crate::rewards::{classify_tier, CurtailedTiers};

pub use dp::{solve_step, solve_step_prioritized};
pub use exhaustive::{solve_exhaustive, EXHAUSTIVE_DECISION_LIMIT};

/// Default accuracy relaxation around the requested amount.
pub const DEFAULT_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("{0}")]
    Infeasible(InfeasibleDiagnostic),
    #[error("resident at position {0} has no options")]
    EmptyOptions(usize),
    #[error("exhaustive search over {decisions} binary decisions exceeds the limit of {limit}")]
    TooLarge { decisions: usize, limit: usize },
    #[error("dynamic-programming table of {cells} cells exceeds the limit of {limit}")]
    TableTooLarge { cells: usize, limit: usize },
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Why a window cannot be met, with the reachable reductions around it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibleDiagnostic {
    pub window_kw: (f64, f64),
    pub reachable_min_kw: f64,
    pub reachable_max_kw: f64,
    pub nearest_below_kw: Option<f64>,
    pub nearest_above_kw: Option<f64>,
}

impl fmt::Display for InfeasibleDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "no reachable reduction in [{:.3}, {:.3}] kW; reachable range is [{:.3}, {:.3}] kW",
            self.window_kw.0, self.window_kw.1, self.reachable_min_kw, self.reachable_max_kw
        )?;
        if let Some(b) = self.nearest_below_kw {
            write!(f, ", nearest below {b:.3} kW")?;
        }
        if let Some(a) = self.nearest_above_kw {
            write!(f, ", nearest above {a:.3} kW")?;
        }
        Ok(())
    }
}

/// Demand-reduction request from the load-serving entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrrRequest {
    pub amount_kw: f64,
    pub delta: f64,
    pub duration_min: u32,
    pub mode: SeasonMode,
}

impl DrrRequest {
    pub fn new(amount_kw: f64, delta: f64, duration_min: u32, mode: SeasonMode) -> Result<Self, SolveError> {
        let r = Self { amount_kw, delta, duration_min, mode };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.amount_kw.is_finite() && self.amount_kw >= 0.0) {
            return Err(SolveError::InvalidRequest(format!("amount must be >= 0 kW, got {}", self.amount_kw)));
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(SolveError::InvalidRequest(format!("delta must lie in [0, 1), got {}", self.delta)));
        }
        if self.duration_min < 5 || !self.duration_min.is_multiple_of(5) {
            return Err(SolveError::InvalidRequest(format!(
                "duration must be a positive multiple of 5 minutes, got {}",
                self.duration_min
            )));
        }
        Ok(())
    }

    /// Number of five-minute steps.
    pub fn steps(&self) -> usize {
        (self.duration_min / 5) as usize
    }

    pub fn window(&self, grid: &PowerGrid) -> ReductionWindow {
        ReductionWindow::around(self.amount_kw, self.delta, grid)
    }
}

/// Inclusive range of acceptable total reductions, in grid units.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionWindow {
    pub lo: u64,
    pub hi: u64,
    pub units_per_kw: u32,
}

impl ReductionWindow {
    /// `[(1 - delta)·amount, (1 + delta)·amount]` rounded inward to the grid.
    pub fn around(amount_kw: f64, delta: f64, grid: &PowerGrid) -> Self {
        let u = f64::from(grid.units_per_kw());
        let lo = ((1.0 - delta) * amount_kw * u - 1e-9).ceil().max(0.0) as u64;
        let hi = ((1.0 + delta) * amount_kw * u + 1e-9).floor().max(0.0) as u64;
        Self { lo, hi, units_per_kw: grid.units_per_kw() }
    }

    pub fn from_units(lo: u64, hi: u64, grid: &PowerGrid) -> Self {
        Self { lo, hi, units_per_kw: grid.units_per_kw() }
    }

    pub fn contains(&self, units: u64) -> bool {
        self.lo <= units && units <= self.hi
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    pub fn kw(&self) -> (f64, f64) {
        let u = f64::from(self.units_per_kw);
        (self.lo as f64 / u, self.hi as f64 / u)
    }
}

/// Weights and constants of the optimisation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    /// Weight on each resident's squared comfort margin, micro-cents per unit.
    pub comfort_weight: u64,
    /// Big-M constant for the exported indicator constraints, °F.
    pub big_m: f64,
    /// Offset replacing strict inequalities in the exported model, °F.
    pub strict_epsilon: f64,
    pub grid: PowerGrid,
}

impl ObjectiveConfig {
    pub const DEFAULT_COMFORT_WEIGHT: u64 = 100;
    pub const DEFAULT_BIG_M: f64 = 1000.0;
    pub const DEFAULT_EPSILON: f64 = 0.001;

    pub fn validate(&self) -> Result<(), SolveError> {
        if !(self.big_m.is_finite() && self.big_m > 0.0) {
            return Err(SolveError::InvalidRequest(format!("big-M must be positive, got {}", self.big_m)));
        }
        if !(self.strict_epsilon > 0.0 && self.strict_epsilon <= 0.01) {
            return Err(SolveError::InvalidRequest(format!(
                "strict epsilon must lie in (0, 0.01], got {}",
                self.strict_epsilon
            )));
        }
        Ok(())
    }
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            comfort_weight: Self::DEFAULT_COMFORT_WEIGHT,
            big_m: Self::DEFAULT_BIG_M,
            strict_epsilon: Self::DEFAULT_EPSILON,
            grid: PowerGrid::default(),
        }
    }
}

/// On/off status per appliance; `None` where the appliance is absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidentDecision {
    pub ac_on: Option<bool>,
    pub ewh_on: Option<bool>,
}

impl ResidentDecision {
    pub fn all_on(profile: &ResidentProfile) -> Self {
        Self { ac_on: profile.ac().map(|_| true), ewh_on: profile.ewh().map(|_| true) }
    }

    pub fn curtails_any(&self) -> bool {
        self.ac_on == Some(false) || self.ewh_on == Some(false)
    }
}

/// Fleet-wide on/off assignment for one step, in fleet order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControlDecision {
    pub residents: Vec<(ResidentId, ResidentDecision)>,
}

impl ControlDecision {
    pub fn curtailed(&self) -> impl Iterator<Item = &ResidentId> {
        self.residents.iter().filter(|(_, d)| d.curtails_any()).map(|(id, _)| id)
    }
}

/// One candidate on/off combination for a single resident.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentOption {
    pub resident: ResidentId,
    pub decision: ResidentDecision,
    pub reduction_units: u32,
    pub reduction_kw: f64,
    pub reward: Cost,
    pub comfort: Cost,
    pub cost: Cost,
    pub comfort_margin: f64,
    pub tiers: CurtailedTiers,
    /// End-of-step temperatures under this decision.
    pub predicted: ThermalState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub decision: ControlDecision,
    pub total_reduction_units: u64,
    pub total_reduction_kw: f64,
    pub objective: Cost,
    pub per_resident: Vec<ResidentOption>,
}

impl SolveResult {
    pub(crate) fn from_choice(fleet: &[Vec<ResidentOption>], choice: &[usize], grid_units: u32) -> Self {
        let per_resident: Vec<ResidentOption> =
            fleet.iter().zip(choice).map(|(opts, &c)| opts[c].clone()).collect();
        let total_reduction_units: u64 = per_resident.iter().map(|o| u64::from(o.reduction_units)).sum();
        let objective = per_resident.iter().map(|o| o.cost).sum();
        let decision =
            ControlDecision { residents: per_resident.iter().map(|o| (o.resident.clone(), o.decision)).collect() };
        Self {
            decision,
            total_reduction_units,
            total_reduction_kw: total_reduction_units as f64 / f64::from(grid_units),
            objective,
            per_resident,
        }
    }
}

/// All on/off combinations for one resident, all-on first.
pub fn enumerate_options(
    profile: &ResidentProfile,
    state: &ThermalState,
    schedule: &RewardSchedule,
    config: &ObjectiveConfig,
    mode: SeasonMode,
) -> Result<Vec<ResidentOption>, SolveError> {
    profile.check_state(state)?;
    let grid = config.grid;
    let ac_choices: &[Option<bool>] = if profile.ac().is_some() { &[Some(true), Some(false)] } else { &[None] };
    let ewh_choices: &[Option<bool>] = if profile.ewh().is_some() { &[Some(true), Some(false)] } else { &[None] };

    let mut options = Vec::with_capacity(ac_choices.len() * ewh_choices.len());
    for &ewh_on in ewh_choices {
        for &ac_on in ac_choices {
            let decision = ResidentDecision { ac_on, ewh_on };
            let mut predicted = ThermalState { room_temp: None, tank_temp: None, ambient_temp: state.ambient_temp };
            let mut tiers = CurtailedTiers::default();
            let mut reduction_units = 0u32;
            let mut reward = Cost::ZERO;

            if let (Some(unit), Some(on)) = (profile.ac(), ac_on) {
                let t = estimate_ac_temp(state, &unit.params, on, mode)?;
                predicted.room_temp = Some(t);
                if !on {
                    let tier = classify_tier(t, &unit.comfort, profile.compromise());
                    let units = grid.to_units(unit.params.power_kw)?;
                    tiers.ac = Some(tier);
                    reduction_units += units;
                    reward += reward_cost(units, grid.units_per_kw(), tier.rate(schedule));
                }
            }
            if let (Some(unit), Some(on)) = (profile.ewh(), ewh_on) {
                let t = estimate_ewh_temp(state, &unit.params, on)?;
                predicted.tank_temp = Some(t);
                if !on {
                    let tier = classify_tier(t, &unit.comfort, profile.compromise());
                    let units = grid.to_units(unit.params.power_kw)?;
                    tiers.ewh = Some(tier);
                    reduction_units += units;
                    reward += reward_cost(units, grid.units_per_kw(), tier.rate(schedule));
                }
            }

            let cm = comfort_margin_total(&predicted, profile);
            let comfort = comfort_cost(config.comfort_weight, cm);
            options.push(ResidentOption {
                resident: profile.id().clone(),
                decision,
                reduction_units,
                reduction_kw: grid.to_kw(u64::from(reduction_units)),
                reward,
                comfort,
                cost: reward + comfort,
                comfort_margin: cm,
                tiers,
                predicted,
            });
        }
    }
    Ok(options)
}

/// Every achievable total reduction, in grid units.
pub fn reachable_reduction_set(fleet: &[Vec<ResidentOption>]) -> BTreeSet<u64> {
    let max: usize = fleet
        .iter()
        .map(|opts| opts.iter().map(|o| o.reduction_units as usize).max().unwrap_or(0))
        .sum();
    let mut reachable = vec![false; max + 1];
    reachable[0] = true;
    let mut top = 0usize;
    for opts in fleet {
        let mut next = vec![false; max + 1];
        for t in (0..=top).filter(|&t| reachable[t]) {
            for o in opts {
                next[t + o.reduction_units as usize] = true;
            }
        }
        top += opts.iter().map(|o| o.reduction_units as usize).max().unwrap_or(0);
        reachable = next;
    }
    reachable.iter().enumerate().filter(|(_, &r)| r).map(|(t, _)| t as u64).collect()
}

pub(crate) fn infeasible(fleet: &[Vec<ResidentOption>], window: ReductionWindow) -> SolveError {
    let set = reachable_reduction_set(fleet);
    let u = f64::from(window.units_per_kw);
    let kw = |x: u64| x as f64 / u;
    SolveError::Infeasible(InfeasibleDiagnostic {
        window_kw: window.kw(),
        reachable_min_kw: set.first().copied().map_or(0.0, kw),
        reachable_max_kw: set.last().copied().map_or(0.0, kw),
        nearest_below_kw: set.range(..window.lo).next_back().copied().map(kw),
        nearest_above_kw: set.range(window.hi.saturating_add(1)..).next().copied().map(kw),
    })
}

pub(crate) fn check_options(fleet: &[Vec<ResidentOption>]) -> Result<(), SolveError> {
    match fleet.iter().position(|opts| opts.is_empty()) {
        Some(i) => Err(SolveError::EmptyOptions(i)),
        None => Ok(()),
    }
}
