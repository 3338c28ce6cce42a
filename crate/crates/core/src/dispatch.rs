//! Rolling five-minute execution of a demand-reduction request.
//!
//! Each step enumerates every resident's options from the current state,
//! solves the step with residents ordered by the participation rule, runs
//! curtailed appliances OFF and the rest ON, records rewards, and feeds the
//! predicted end-of-step state (plus an optional bounded disturbance) into
//! the next step. Temperature extremes and CMFT are taken over end-of-step
//! temperatures.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::Cost;
use crate::fleet::{Fleet, InitialTemps};
use crate::model::{check_temperature, ComfortRange, ModelError, ResidentId, RewardSchedule, SeasonMode, ThermalState};
use crate::rewards::{RateTier, RewardError, RewardLedger, StepEntry};
use crate::solver::{
    enumerate_options, solve_step_prioritized, DrrRequest, InfeasibleDiagnostic, ObjectiveConfig, SolveError,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DispatchError {
    #[error("ambient trajectory has {got} entries but the request needs {needed} steps")]
    TrajectoryTooShort { needed: usize, got: usize },
    #[error("scenario has {states} initial states for {residents} residents")]
    StateCount { states: usize, residents: usize },
    #[error("resident id {0} appears more than once")]
    DuplicateResident(ResidentId),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Outdoor temperature per step, °F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmbientProfile {
    Constant(f64),
    Trajectory(Vec<f64>),
}

impl AmbientProfile {
    pub fn at(&self, step: usize) -> f64 {
        match self {
            AmbientProfile::Constant(t) => *t,
            AmbientProfile::Trajectory(ts) => ts[step],
        }
    }

    fn check(&self, steps: usize) -> Result<(), DispatchError> {
        let values: &[f64] = match self {
            AmbientProfile::Constant(t) => std::slice::from_ref(t),
            AmbientProfile::Trajectory(ts) => {
                if ts.len() < steps {
                    return Err(DispatchError::TrajectoryTooShort { needed: steps, got: ts.len() });
                }
                ts
            }
        };
        for &t in values {
            check_temperature(t)?;
        }
        Ok(())
    }
}

/// Additive sensor disturbance drawn uniformly from `[-bound_f, bound_f]`
/// for every present temperature after each step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub bound_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub ambient: AmbientProfile,
    /// Initial temperatures in fleet order.
    pub initial: Vec<InitialTemps>,
    pub schedule: RewardSchedule,
    pub objective: ObjectiveConfig,
    pub seed: u64,
    #[serde(default)]
    pub disturbance: Option<Disturbance>,
}

impl ScenarioConfig {
    /// Fleet initial temperatures, default rates and weights, seed 0, no
    /// disturbance.
    pub fn for_fleet(fleet: &Fleet, ambient: AmbientProfile) -> Self {
        Self {
            ambient,
            initial: fleet.initial.clone(),
            schedule: RewardSchedule::default(),
            objective: ObjectiveConfig::default(),
            seed: 0,
            disturbance: None,
        }
    }
}

/// Scenario parameters echoed into every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAssumptions {
    pub amount_kw: f64,
    pub delta: f64,
    pub duration_min: u32,
    pub mode: SeasonMode,
    pub ambient: AmbientProfile,
    pub rates_cents: [f64; 3],
    pub comfort_weight_micro_cents: u64,
    pub big_m: f64,
    pub strict_epsilon: f64,
    pub units_per_kw: u32,
    pub seed: u64,
    pub disturbance: Option<Disturbance>,
    pub non_curtailed: String,
    pub sensor_feedback: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TempRange {
    pub min: f64,
    pub max: f64,
}

impl TempRange {
    fn of(trace: &[f64]) -> Option<Self> {
        let min = trace.iter().copied().reduce(f64::min)?;
        let max = trace.iter().copied().reduce(f64::max)?;
        Some(Self { min, max })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentReport {
    pub id: ResidentId,
    pub compromise: bool,
    pub room: Option<TempRange>,
    pub tank: Option<TempRange>,
    /// `None` only when no step completed.
    pub cmft: Option<f64>,
    pub tiers_seen: BTreeSet<RateTier>,
    pub participation_count: u32,
    pub total_reward: Cost,
    pub total_reward_cents: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step: usize,
    pub ambient_temp: f64,
    pub window_kw: (f64, f64),
    pub tdr_kw: f64,
    pub objective_cents: f64,
    pub reward_cents: f64,
    pub curtailed: Vec<ResidentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAbort {
    pub step: usize,
    pub diagnostic: InfeasibleDiagnostic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionReport {
    pub assumptions: SessionAssumptions,
    /// Free-form key/value pairs added by callers (e.g. overrides).
    pub metadata: BTreeMap<String, String>,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub residents: Vec<ResidentReport>,
    pub steps: Vec<StepTrace>,
    pub total_reward: Cost,
    pub total_reward_cents: f64,
    pub average_cmft: Option<f64>,
    pub abort: Option<SessionAbort>,
    pub ledger: RewardLedger,
}

impl SessionReport {
    pub fn is_complete(&self) -> bool {
        self.abort.is_none()
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialise");
        s.push('\n');
        s
    }

    /// Per-resident table, preceded by `#` lines echoing the assumptions.
    pub fn residents_csv(&self) -> String {
        let mut out = self.assumption_lines();
        out.push_str("id,compromise,min_room_f,max_room_f,min_tank_f,max_tank_f,cmft_pct,tiers,participation,reward_cents\n");
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        for r in &self.residents {
            let tiers: Vec<&str> = r.tiers_seen.iter().map(|t| t.label()).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.id,
                u8::from(r.compromise),
                opt(r.room.map(|t| t.min)),
                opt(r.room.map(|t| t.max)),
                opt(r.tank.map(|t| t.min)),
                opt(r.tank.map(|t| t.max)),
                opt(r.cmft),
                tiers.join(" "),
                r.participation_count,
                r.total_reward_cents
            );
        }
        out
    }

    pub fn steps_csv(&self) -> String {
        let mut out = self.assumption_lines();
        out.push_str("step,ambient_f,window_lo_kw,window_hi_kw,tdr_kw,objective_cents,reward_cents,curtailed\n");
        for s in &self.steps {
            let ids: Vec<String> = s.curtailed.iter().map(ToString::to_string).collect();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                s.step,
                s.ambient_temp,
                s.window_kw.0,
                s.window_kw.1,
                s.tdr_kw,
                s.objective_cents,
                s.reward_cents,
                ids.join(" ")
            );
        }
        out
    }

    fn assumption_lines(&self) -> String {
        let a = &self.assumptions;
        let mut out = String::new();
        let ambient = match &a.ambient {
            AmbientProfile::Constant(t) => format!("constant {t}"),
            AmbientProfile::Trajectory(ts) => format!("trajectory of {} values", ts.len()),
        };
        let _ = writeln!(out, "# amount_kw={} delta={} duration_min={} mode={}", a.amount_kw, a.delta, a.duration_min, a.mode);
        let _ = writeln!(out, "# ambient_f={ambient} rates_cents={:?} comfort_weight_micro_cents={}", a.rates_cents, a.comfort_weight_micro_cents);
        let _ = writeln!(out, "# big_m={} strict_epsilon={} units_per_kw={} seed={}", a.big_m, a.strict_epsilon, a.units_per_kw, a.seed);
        if let Some(d) = a.disturbance {
            let _ = writeln!(out, "# disturbance_bound_f={}", d.bound_f);
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        let _ = writeln!(out, "# steps_completed={}/{} total_reward_cents={}", self.steps_completed, self.steps_requested, self.total_reward_cents);
        if let Some(abort) = &self.abort {
            let _ = writeln!(out, "# aborted at step {}: {}", abort.step, abort.diagnostic);
        }
        out
    }
}

/// Percentage of steps with every trace inside its inclusive range. `None`
/// for empty traces.
pub fn compute_cmft(traces: &[(&[f64], ComfortRange)]) -> Option<f64> {
    let steps = traces.iter().map(|(t, _)| t.len()).max()?;
    if steps == 0 {
        return None;
    }
    let inside = (0..steps)
        .filter(|&k| traces.iter().all(|(t, range)| t.get(k).is_none_or(|&v| range.contains(v))))
        .count();
    Some(100.0 * inside as f64 / steps as f64)
}

fn unit_draw(rng: &mut Pcg64) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Executes `request` step by step on `fleet`.
///
/// Precondition failures are errors; an infeasible step ends the session
/// early with [`SessionReport::abort`] set.
pub fn run_session(fleet: &Fleet, request: &DrrRequest, scenario: &ScenarioConfig) -> Result<SessionReport, DispatchError> {
    request.validate()?;
    scenario.objective.validate()?;
    let steps = request.steps();
    scenario.ambient.check(steps)?;
    if scenario.initial.len() != fleet.len() {
        return Err(DispatchError::StateCount { states: scenario.initial.len(), residents: fleet.len() });
    }
    if let Some(d) = scenario.disturbance {
        if !(d.bound_f.is_finite() && d.bound_f >= 0.0) {
            return Err(DispatchError::InvalidScenario(format!("disturbance bound must be >= 0, got {}", d.bound_f)));
        }
    }
    let mut ids = BTreeSet::new();
    for p in &fleet.profiles {
        if !ids.insert(p.id()) {
            return Err(DispatchError::DuplicateResident(p.id().clone()));
        }
    }

    let config = &scenario.objective;
    let window = request.window(&config.grid);
    let mut ledger = RewardLedger::with_residents(fleet.profiles.iter().map(|p| p.id().clone()));
    let mut rng = Pcg64::seed_from_u64(scenario.seed);
    let mut states: Vec<ThermalState> = scenario.initial.iter().map(|t| t.with_ambient(scenario.ambient.at(0))).collect();
    let mut room_traces = vec![Vec::with_capacity(steps); fleet.len()];
    let mut tank_traces = vec![Vec::with_capacity(steps); fleet.len()];
    let mut traces = Vec::with_capacity(steps);
    let mut abort = None;

    for step in 0..steps {
        let ambient = scenario.ambient.at(step);
        for s in &mut states {
            s.ambient_temp = ambient;
        }
        let options = fleet
            .profiles
            .iter()
            .zip(&states)
            .map(|(p, s)| enumerate_options(p, s, &scenario.schedule, config, request.mode))
            .collect::<Result<Vec<_>, _>>()?;
        let mut priority: Vec<usize> = (0..fleet.len()).collect();
        let keys = fleet.profiles.iter().map(|p| ledger.fairness_key(p.id())).collect::<Result<Vec<_>, _>>()?;
        priority.sort_by(|&a, &b| keys[a].cmp(&keys[b]));

        let result = match solve_step_prioritized(&options, window, &priority) {
            Ok(r) => r,
            Err(SolveError::Infeasible(diagnostic)) => {
                abort = Some(SessionAbort { step, diagnostic });
                break;
            }
            Err(e) => return Err(e.into()),
        };

        let entries: Vec<StepEntry> = result
            .per_resident
            .iter()
            .map(|o| StepEntry { resident: o.resident.clone(), reward: o.reward, tiers: o.tiers })
            .collect();
        ledger.record_step(step, &entries)?;
        let step_reward: Cost = entries.iter().map(|e| e.reward).sum();

        for (i, chosen) in result.per_resident.iter().enumerate() {
            let mut next = chosen.predicted;
            if let Some(d) = scenario.disturbance {
                for t in [&mut next.room_temp, &mut next.tank_temp].into_iter().flatten() {
                    *t += d.bound_f * (2.0 * unit_draw(&mut rng) - 1.0);
                }
            }
            if let Some(t) = next.room_temp {
                room_traces[i].push(t);
            }
            if let Some(t) = next.tank_temp {
                tank_traces[i].push(t);
            }
            states[i] = next;
        }
        traces.push(StepTrace {
            step,
            ambient_temp: ambient,
            window_kw: window.kw(),
            tdr_kw: result.total_reduction_kw,
            objective_cents: result.objective.cents(),
            reward_cents: step_reward.cents(),
            curtailed: result.decision.curtailed().cloned().collect(),
        });
    }

    let residents: Vec<ResidentReport> = fleet
        .profiles
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let account = ledger.account(p.id()).expect("ledger covers the fleet");
            let mut cmft_traces: Vec<(&[f64], ComfortRange)> = Vec::new();
            if let Some(ac) = p.ac() {
                cmft_traces.push((&room_traces[i], ac.comfort));
            }
            if let Some(ewh) = p.ewh() {
                cmft_traces.push((&tank_traces[i], ewh.comfort));
            }
            ResidentReport {
                id: p.id().clone(),
                compromise: p.compromise(),
                room: TempRange::of(&room_traces[i]),
                tank: TempRange::of(&tank_traces[i]),
                cmft: compute_cmft(&cmft_traces),
                tiers_seen: account.tier_history.iter().map(|r| r.tier).collect(),
                participation_count: account.participation_count,
                total_reward: account.cumulative_reward,
                total_reward_cents: account.cumulative_reward.cents(),
            }
        })
        .collect();

    let cmfts: Vec<f64> = residents.iter().filter_map(|r| r.cmft).collect();
    let average_cmft = (!cmfts.is_empty()).then(|| cmfts.iter().sum::<f64>() / cmfts.len() as f64);
    let total_reward = ledger.total_reward();
    Ok(SessionReport {
        assumptions: SessionAssumptions {
            amount_kw: request.amount_kw,
            delta: request.delta,
            duration_min: request.duration_min,
            mode: request.mode,
            ambient: scenario.ambient.clone(),
            rates_cents: [scenario.schedule.r1(), scenario.schedule.r2(), scenario.schedule.r3()],
            comfort_weight_micro_cents: config.comfort_weight,
            big_m: config.big_m,
            strict_epsilon: config.strict_epsilon,
            units_per_kw: config.grid.units_per_kw(),
            seed: scenario.seed,
            disturbance: scenario.disturbance,
            non_curtailed: "appliances not curtailed run ON for the whole step".into(),
            sensor_feedback: match scenario.disturbance {
                None => "next state equals the model prediction".into(),
                Some(_) => "next state equals the model prediction plus the seeded disturbance".into(),
            },
        },
        metadata: BTreeMap::new(),
        steps_requested: steps,
        steps_completed: traces.len(),
        residents,
        steps: traces,
        total_reward,
        total_reward_cents: total_reward.cents(),
        average_cmft,
        abort,
        ledger,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub amount_kw: f64,
    pub duration_min: u32,
    pub average_cmft: Option<f64>,
    pub total_reward_cents: f64,
    pub total_reward: Cost,
    pub steps_completed: usize,
    pub steps_requested: usize,
    /// Why the session stopped early or could not run.
    pub failure: Option<String>,
}

/// Sweep results; `cells` is amount-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub amounts_kw: Vec<f64>,
    pub durations_min: Vec<u32>,
    pub cells: Vec<SweepCell>,
    pub metadata: BTreeMap<String, String>,
}

impl SweepGrid {
    pub fn cell(&self, amount_index: usize, duration_index: usize) -> &SweepCell {
        &self.cells[amount_index * self.durations_min.len() + duration_index]
    }

    pub fn any_success(&self) -> bool {
        self.cells.iter().any(|c| c.failure.is_none())
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("grids always serialise");
        s.push('\n');
        s
    }

    /// One line per cell, for plotting tools.
    pub fn long_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# {k}={v}");
        }
        out.push_str("amount_kw,duration_min,average_cmft_pct,total_reward_cents,steps_completed,steps_requested,status\n");
        for c in &self.cells {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                c.amount_kw,
                c.duration_min,
                c.average_cmft.map(|v| v.to_string()).unwrap_or_default(),
                c.total_reward_cents,
                c.steps_completed,
                c.steps_requested,
                if c.failure.is_some() { "failed" } else { "ok" }
            );
        }
        out
    }

    /// Matrix of one metric: rows are amounts, columns durations.
    pub fn matrix_csv(&self, metric: SweepMetric) -> String {
        let mut out = String::from("amount_kw");
        for d in &self.durations_min {
            let _ = write!(out, ",{d}min");
        }
        out.push('\n');
        for (i, a) in self.amounts_kw.iter().enumerate() {
            let _ = write!(out, "{a}");
            for j in 0..self.durations_min.len() {
                let c = self.cell(i, j);
                let v = match metric {
                    SweepMetric::AverageCmft => c.average_cmft.map(|v| v.to_string()).unwrap_or_default(),
                    SweepMetric::TotalReward => c.total_reward_cents.to_string(),
                };
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }

    /// Adjacent-cell pairs breaking "reward non-decreasing, CMFT
    /// non-increasing" along either axis.
    pub fn monotonicity_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        let (na, nd) = (self.amounts_kw.len(), self.durations_min.len());
        let mut check = |a: &SweepCell, b: &SweepCell| {
            if b.total_reward < a.total_reward {
                out.push(format!(
                    "reward falls from {} to {} cents between ({} kW, {} min) and ({} kW, {} min)",
                    a.total_reward_cents, b.total_reward_cents, a.amount_kw, a.duration_min, b.amount_kw, b.duration_min
                ));
            }
            if let (Some(x), Some(y)) = (a.average_cmft, b.average_cmft) {
                if y > x + 1e-9 {
                    out.push(format!(
                        "CMFT rises from {x} to {y} between ({} kW, {} min) and ({} kW, {} min)",
                        a.amount_kw, a.duration_min, b.amount_kw, b.duration_min
                    ));
                }
            }
            if a.failure.is_some() || b.failure.is_some() {
                out.push(format!("cell ({} kW, {} min) or ({} kW, {} min) failed", a.amount_kw, a.duration_min, b.amount_kw, b.duration_min));
            }
        };
        for i in 0..na {
            for j in 0..nd {
                if i + 1 < na {
                    check(self.cell(i, j), self.cell(i + 1, j));
                }
                if j + 1 < nd {
                    check(self.cell(i, j), self.cell(i, j + 1));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMetric {
    AverageCmft,
    TotalReward,
}

/// Independent sessions for every (amount, duration) pair, run in parallel
/// and returned in grid order. Axes are expected in ascending order for the
/// monotonicity check to be meaningful.
pub fn run_sweep(
    fleet: &Fleet,
    amounts_kw: &[f64],
    durations_min: &[u32],
    delta: f64,
    mode: SeasonMode,
    scenario: &ScenarioConfig,
) -> Result<SweepGrid, DispatchError> {
    if amounts_kw.is_empty() || durations_min.is_empty() {
        return Err(DispatchError::InvalidScenario("sweep axes must be non-empty".into()));
    }
    let pairs: Vec<(f64, u32)> =
        amounts_kw.iter().flat_map(|&a| durations_min.iter().map(move |&d| (a, d))).collect();
    let cells = pairs
        .par_iter()
        .map(|&(amount_kw, duration_min)| {
            let failed = |failure: String, steps_requested: usize| SweepCell {
                amount_kw,
                duration_min,
                average_cmft: None,
                total_reward_cents: 0.0,
                total_reward: Cost::ZERO,
                steps_completed: 0,
                steps_requested,
                failure: Some(failure),
            };
            let request = match DrrRequest::new(amount_kw, delta, duration_min, mode) {
                Ok(r) => r,
                Err(e) => return failed(e.to_string(), 0),
            };
            match run_session(fleet, &request, scenario) {
                Ok(report) => SweepCell {
                    amount_kw,
                    duration_min,
                    average_cmft: report.average_cmft,
                    total_reward_cents: report.total_reward_cents,
                    total_reward: report.total_reward,
                    steps_completed: report.steps_completed,
                    steps_requested: report.steps_requested,
                    failure: report.abort.map(|a| format!("infeasible at step {}: {}", a.step, a.diagnostic)),
                },
                Err(e) => failed(e.to_string(), request.steps()),
            }
        })
        .collect();
    Ok(SweepGrid {
        amounts_kw: amounts_kw.to_vec(),
        durations_min: durations_min.to_vec(),
        cells,
        metadata: BTreeMap::new(),
    })
}
