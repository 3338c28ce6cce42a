//! Export of one curtailment step as a mixed-integer linear program.
//!
//! Per resident `k` (1-based fleet position) the model has:
//!
//! * `sa_k` / `se_k` — AC / EWH status binaries (1 = on);
//! * `trm_k` / `tt_k` — end-of-step room / tank temperature, affine in the
//!   status through an equality row;
//! * `mu_k` — 1 iff `trm_k <= T_H` (big-M pair `mu_ub_k`, `mu_lb_k`);
//!   `mul_k` the same for `trm_k >= T_L`;
//! * `nu_k` — 1 iff `tt_k >= T_TL`; `nuh_k` for `tt_k <= T_TH`;
//! * `ua_k` / `ue_k` — continuous products "curtailed and out of range";
//! * `z_k` — product `sa_k · se_k` for residents with both appliances.
//!
//! Strict inequalities become `>= threshold + epsilon`. Because each status
//! is binary, the comfort term `w · CM_k²` takes one known value per option;
//! those constants are listed in the header and blended multilinearly over
//! the status binaries. The compromise flag is data, so the tier-rate
//! expression folds to `R1 + (R_out - R1)·(out of range)`.

use std::collections::BTreeMap;

use super::lp::{Bound, Constraint, LinearExpr, LpModel, Sense};
use super::{enumerate_options, ControlDecision, DrrRequest, ObjectiveConfig, ResidentOption, SolveError};
use crate::cost::Cost;
use crate::model::{
    estimate_ac_temp, estimate_ewh_temp, ApplianceUnit, ResidentProfile, RewardSchedule, ThermalState,
};

const CONSTANT: &str = "const_one";

/// Builds the model for one step.
pub fn build_milp(
    profiles: &[ResidentProfile],
    states: &[ThermalState],
    request: &DrrRequest,
    schedule: &RewardSchedule,
    config: &ObjectiveConfig,
) -> Result<LpModel, SolveError> {
    request.validate()?;
    config.validate()?;
    if profiles.len() != states.len() {
        return Err(SolveError::InvalidRequest(format!(
            "{} profiles but {} thermal states",
            profiles.len(),
            states.len()
        )));
    }
    let window = request.window(&config.grid);
    let (lo_kw, hi_kw) = window.kw();
    let m = config.big_m;
    let eps = config.strict_epsilon;

    let mut comments = vec![
        "curtailment step model".to_string(),
        format!("demand reduction D = {} kW, delta = {}", request.amount_kw, request.delta),
        format!("window [{lo_kw}, {hi_kw}] kW on a 1/{} kW grid", config.grid.units_per_kw()),
        format!("comfort weight w = {} micro-cents per CM^2", config.comfort_weight),
        format!("big-M = {m}, strict epsilon = {eps}, mode = {}", request.mode),
        format!("reward rates R1 = {}, R2 = {}, R3 = {} cents/(kW*5min)", schedule.r1(), schedule.r2(), schedule.r3()),
        "objective in cents; comfort constants w*CM^2 per option (1 = on):".to_string(),
    ];

    let mut objective = LinearExpr::new();
    objective.add(0.0, CONSTANT);
    let mut constant = 0.0;
    let mut constraints = Vec::new();
    let mut bounds = Vec::new();
    let mut binaries = Vec::new();
    let mut tdr_row = LinearExpr::new().with(1.0, "tdr");
    let mut total_power = 0.0;

    for (idx, (profile, state)) in profiles.iter().zip(states).enumerate() {
        let k = idx + 1;
        let options = enumerate_options(profile, state, schedule, config, request.mode)?;
        let comfort = |ac_on: Option<bool>, ewh_on: Option<bool>| -> f64 {
            options
                .iter()
                .find(|o| o.decision.ac_on == ac_on && o.decision.ewh_on == ewh_on)
                .map(|o| o.comfort.cents())
                .expect("every status combination is enumerated")
        };
        comments.push(describe_options(k, profile, &options));

        let rate_out = if profile.compromise() { schedule.r2() } else { schedule.r3() };

        if let Some(unit) = profile.ac() {
            let (sa, trm, mu, mul, ua) =
                (format!("sa_{k}"), format!("trm_{k}"), format!("mu_{k}"), format!("mul_{k}"), format!("ua_{k}"));
            let t_on = estimate_ac_temp(state, &unit.params, true, request.mode)?;
            let t_off = estimate_ac_temp(state, &unit.params, false, request.mode)?;
            temperature_rows(&mut constraints, k, "trm", &trm, &sa, t_on, t_off);
            indicator_rows(&mut constraints, k, unit, &trm, &mu, &mul, m, eps);
            reward_rows(&mut constraints, k, "ua", &ua, &sa, &mu, &mul);
            let p = unit.params.power_kw;
            constant += p * schedule.r1();
            objective.add(-p * schedule.r1(), &sa);
            objective.add(p * (rate_out - schedule.r1()), &ua);
            tdr_row.add(p, &sa);
            total_power += p;
            bounds.push(Bound { var: trm, lower: None, upper: None });
            bounds.push(Bound { var: ua, lower: Some(0.0), upper: Some(1.0) });
            binaries.extend([sa, mu, mul]);
        }
        if let Some(unit) = profile.ewh() {
            let (se, tt, nu, nuh, ue) =
                (format!("se_{k}"), format!("tt_{k}"), format!("nu_{k}"), format!("nuh_{k}"), format!("ue_{k}"));
            let t_on = estimate_ewh_temp(state, &unit.params, true)?;
            let t_off = estimate_ewh_temp(state, &unit.params, false)?;
            temperature_rows(&mut constraints, k, "tt", &tt, &se, t_on, t_off);
            indicator_rows(&mut constraints, k, unit, &tt, &nuh, &nu, m, eps);
            reward_rows(&mut constraints, k, "ue", &ue, &se, &nu, &nuh);
            let p = unit.params.power_kw;
            constant += p * schedule.r1();
            objective.add(-p * schedule.r1(), &se);
            objective.add(p * (rate_out - schedule.r1()), &ue);
            tdr_row.add(p, &se);
            total_power += p;
            bounds.push(Bound { var: tt, lower: None, upper: None });
            bounds.push(Bound { var: ue, lower: Some(0.0), upper: Some(1.0) });
            binaries.extend([se, nu, nuh]);
        }

        // comfort constants blended over the status binaries
        let (sa, se) = (format!("sa_{k}"), format!("se_{k}"));
        match (profile.ac().is_some(), profile.ewh().is_some()) {
            (true, false) => {
                let (on, off) = (comfort(Some(true), None), comfort(Some(false), None));
                constant += off;
                objective.add(on - off, &sa);
            }
            (false, true) => {
                let (on, off) = (comfort(None, Some(true)), comfort(None, Some(false)));
                constant += off;
                objective.add(on - off, &se);
            }
            (true, true) => {
                let k00 = comfort(Some(false), Some(false));
                let k10 = comfort(Some(true), Some(false));
                let k01 = comfort(Some(false), Some(true));
                let k11 = comfort(Some(true), Some(true));
                let z = format!("z_{k}");
                constant += k00;
                objective.add(k10 - k00, &sa);
                objective.add(k01 - k00, &se);
                objective.add(k11 - k10 - k01 + k00, &z);
                constraints.push(row(format!("z_a_{k}"), &[(1.0, &z), (-1.0, &sa)], Sense::Le, 0.0));
                constraints.push(row(format!("z_e_{k}"), &[(1.0, &z), (-1.0, &se)], Sense::Le, 0.0));
                constraints.push(row(format!("z_ae_{k}"), &[(1.0, &z), (-1.0, &sa), (-1.0, &se)], Sense::Ge, -1.0));
                bounds.push(Bound { var: z, lower: Some(0.0), upper: Some(1.0) });
            }
            (false, false) => unreachable!("profiles carry at least one appliance"),
        }
    }

    objective.terms[0].0 = constant;
    constraints.insert(0, Constraint { name: "tdr_def".into(), expr: tdr_row, sense: Sense::Eq, rhs: total_power });
    bounds.insert(0, Bound { var: CONSTANT.into(), lower: Some(1.0), upper: Some(1.0) });
    bounds.insert(1, Bound { var: "tdr".into(), lower: Some(lo_kw), upper: Some(hi_kw) });

    Ok(LpModel { comments, objective_name: "cost".into(), objective, constraints, bounds, binaries })
}

/// LP-format text of [`build_milp`].
pub fn export_milp(
    profiles: &[ResidentProfile],
    states: &[ThermalState],
    request: &DrrRequest,
    schedule: &RewardSchedule,
    config: &ObjectiveConfig,
) -> Result<String, SolveError> {
    Ok(build_milp(profiles, states, request, schedule, config)?.to_lp_string())
}

fn describe_options(k: usize, profile: &ResidentProfile, options: &[ResidentOption]) -> String {
    let fmt_status = |s: Option<bool>| match s {
        Some(true) => "1",
        Some(false) => "0",
        None => "-",
    };
    let parts: Vec<String> = options
        .iter()
        .map(|o| format!("ac={} ewh={}: {}", fmt_status(o.decision.ac_on), fmt_status(o.decision.ewh_on), o.comfort.cents()))
        .collect();
    format!("resident {k} (id {}, compromise {}): {}", profile.id(), u8::from(profile.compromise()), parts.join("; "))
}

fn row(name: String, terms: &[(f64, &str)], sense: Sense, rhs: f64) -> Constraint {
    let mut expr = LinearExpr::new();
    for (c, v) in terms {
        expr.add(*c, v);
    }
    Constraint { name, expr, sense, rhs }
}

fn temperature_rows(out: &mut Vec<Constraint>, k: usize, tag: &str, temp: &str, status: &str, t_on: f64, t_off: f64) {
    // temp = t_off + (t_on - t_off) * status
    out.push(row(format!("{tag}_def_{k}"), &[(1.0, temp), (-(t_on - t_off), status)], Sense::Eq, t_off));
}

/// Big-M pairs: `upper` = 1 iff temp <= high, `lower` = 1 iff temp >= low.
#[allow(clippy::too_many_arguments)]
fn indicator_rows(
    out: &mut Vec<Constraint>,
    k: usize,
    unit: &ApplianceUnit,
    temp: &str,
    upper: &str,
    lower: &str,
    m: f64,
    eps: f64,
) {
    let (low, high) = (unit.comfort.low(), unit.comfort.high());
    let upper_tag = upper.trim_end_matches(&format!("_{k}")).to_string();
    let lower_tag = lower.trim_end_matches(&format!("_{k}")).to_string();
    // temp - high <= M (1 - upper);  temp - high >= -M upper + eps
    out.push(row(format!("{upper_tag}_ub_{k}"), &[(1.0, temp), (m, upper)], Sense::Le, high + m));
    out.push(row(format!("{upper_tag}_lb_{k}"), &[(1.0, temp), (m, upper)], Sense::Ge, high + eps));
    // low - temp <= M (1 - lower);  low - temp >= -M lower + eps
    out.push(row(format!("{lower_tag}_ub_{k}"), &[(-1.0, temp), (m, lower)], Sense::Le, m - low));
    out.push(row(format!("{lower_tag}_lb_{k}"), &[(-1.0, temp), (m, lower)], Sense::Ge, eps - low));
}

/// `prod = (1 - status) · (2 - a - b)`, where `2 - a - b` is the
/// out-of-range indicator.
fn reward_rows(out: &mut Vec<Constraint>, k: usize, tag: &str, prod: &str, status: &str, a: &str, b: &str) {
    out.push(row(format!("{tag}_lb_{k}"), &[(1.0, prod), (1.0, status), (1.0, a), (1.0, b)], Sense::Ge, 2.0));
    out.push(row(format!("{tag}_on_{k}"), &[(1.0, prod), (1.0, status)], Sense::Le, 1.0));
    out.push(row(format!("{tag}_out_{k}"), &[(1.0, prod), (1.0, a), (1.0, b)], Sense::Le, 2.0));
}

/// Values of every exported variable implied by an on/off decision.
pub fn milp_assignment(
    profiles: &[ResidentProfile],
    states: &[ThermalState],
    decision: &ControlDecision,
    request: &DrrRequest,
) -> Result<BTreeMap<String, f64>, SolveError> {
    if decision.residents.len() != profiles.len() || states.len() != profiles.len() {
        return Err(SolveError::InvalidRequest("decision does not cover the fleet".into()));
    }
    let bit = |b: bool| if b { 1.0 } else { 0.0 };
    let mut values = BTreeMap::new();
    values.insert(CONSTANT.to_string(), 1.0);
    let mut tdr = 0.0;
    for (idx, ((profile, state), (_, d))) in profiles.iter().zip(states).zip(&decision.residents).enumerate() {
        let k = idx + 1;
        let mut sa_v = None;
        let mut se_v = None;
        if let (Some(unit), Some(on)) = (profile.ac(), d.ac_on) {
            let t = estimate_ac_temp(state, &unit.params, on, request.mode)?;
            let upper = bit(t <= unit.comfort.high());
            let lower = bit(t >= unit.comfort.low());
            values.insert(format!("sa_{k}"), bit(on));
            values.insert(format!("trm_{k}"), t);
            values.insert(format!("mu_{k}"), upper);
            values.insert(format!("mul_{k}"), lower);
            values.insert(format!("ua_{k}"), (1.0 - bit(on)) * (2.0 - upper - lower));
            if !on {
                tdr += unit.params.power_kw;
            }
            sa_v = Some(bit(on));
        }
        if let (Some(unit), Some(on)) = (profile.ewh(), d.ewh_on) {
            let t = estimate_ewh_temp(state, &unit.params, on)?;
            let upper = bit(t <= unit.comfort.high());
            let lower = bit(t >= unit.comfort.low());
            values.insert(format!("se_{k}"), bit(on));
            values.insert(format!("tt_{k}"), t);
            values.insert(format!("nu_{k}"), lower);
            values.insert(format!("nuh_{k}"), upper);
            values.insert(format!("ue_{k}"), (1.0 - bit(on)) * (2.0 - upper - lower));
            if !on {
                tdr += unit.params.power_kw;
            }
            se_v = Some(bit(on));
        }
        if let (Some(a), Some(e)) = (sa_v, se_v) {
            values.insert(format!("z_{k}"), a * e);
        }
    }
    values.insert("tdr".into(), tdr);
    Ok(values)
}

/// Objective of a solver result expressed in cents, for comparison with the
/// exported model.
pub fn objective_cents(objective: Cost) -> f64 {
    objective.cents()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ApplianceParams, ComfortRange, SeasonMode};
    use crate::solver::{solve_step, ResidentDecision};

    fn ac(power: f64, effect: f64, loss: f64, low: f64, high: f64) -> ApplianceUnit {
        ApplianceUnit {
            params: ApplianceParams::new(power, effect, loss).unwrap(),
            comfort: ComfortRange::new(low, high).unwrap(),
        }
    }

    fn small_fleet() -> (Vec<ResidentProfile>, Vec<ThermalState>) {
        let profiles = vec![
            ResidentProfile::new("1".into(), Some(ac(1.3, 5.0, 0.1, 70.0, 75.0)), None, false).unwrap(),
            ResidentProfile::new("2".into(), Some(ac(1.4, 5.0, 0.1, 70.0, 75.0)), None, true).unwrap(),
            ResidentProfile::new(
                "3".into(),
                Some(ac(1.5, 5.0, 0.2, 70.0, 80.0)),
                Some(ac(4.5, 1.0, 0.01, 110.0, 130.0)),
                true,
            )
            .unwrap(),
        ];
        let states = vec![
            ThermalState { room_temp: Some(72.5), tank_temp: None, ambient_temp: 94.0 },
            ThermalState { room_temp: Some(74.0), tank_temp: None, ambient_temp: 94.0 },
            ThermalState { room_temp: Some(75.0), tank_temp: Some(112.0), ambient_temp: 94.0 },
        ];
        (profiles, states)
    }

    fn options(p: &[ResidentProfile], s: &[ThermalState], mode: SeasonMode) -> Vec<Vec<ResidentOption>> {
        p.iter()
            .zip(s)
            .map(|(p, s)| enumerate_options(p, s, &RewardSchedule::default(), &ObjectiveConfig::default(), mode).unwrap())
            .collect()
    }

    #[test]
    fn all_on_objective_is_comfort_only() {
        let (p, s) = small_fleet();
        let req = DrrRequest::new(0.0, 0.05, 5, SeasonMode::Cooling).unwrap();
        let model = LpModel::parse(
            &export_milp(&p, &s, &req, &RewardSchedule::default(), &ObjectiveConfig::default()).unwrap(),
        )
        .unwrap();
        let decision = ControlDecision {
            residents: p.iter().map(|p| (p.id().clone(), ResidentDecision::all_on(p))).collect(),
        };
        let values = milp_assignment(&p, &s, &decision, &req).unwrap();
        let expected: f64 = options(&p, &s, SeasonMode::Cooling).iter().map(|o| o[0].comfort.cents()).sum();
        let got = model.evaluate_objective(&values).unwrap();
        assert!((got - expected).abs() <= 1e-9 * expected.abs().max(1.0), "{got} vs {expected}");
        assert!(model.violations(&values, 1e-7).unwrap().is_empty());
    }

    #[test]
    fn solver_solution_evaluates_consistently() {
        let (p, s) = small_fleet();
        for (amount, mode) in [(2.7, SeasonMode::Cooling), (6.0, SeasonMode::Cooling), (1.4, SeasonMode::Heating)] {
            let req = DrrRequest::new(amount, 0.05, 5, mode).unwrap();
            let result = solve_step(&options(&p, &s, mode), req.window(&Default::default())).unwrap();
            let text = export_milp(&p, &s, &req, &RewardSchedule::default(), &ObjectiveConfig::default()).unwrap();
            let model = LpModel::parse(&text).unwrap();
            let values = milp_assignment(&p, &s, &result.decision, &req).unwrap();
            let got = model.evaluate_objective(&values).unwrap();
            let want = result.objective.cents();
            assert!((got - want).abs() <= 1e-6 * want.abs().max(1e-9), "{got} vs {want}");
            assert!(model.violations(&values, 1e-7).unwrap().is_empty());
        }
    }

    #[test]
    fn hot_room_forces_mu_to_zero() {
        let p = vec![ResidentProfile::new("1".into(), Some(ac(1.3, 5.0, 0.5, 70.0, 75.0)), None, false).unwrap()];
        let s = vec![ThermalState { room_temp: Some(74.0), tank_temp: None, ambient_temp: 100.0 }];
        let req = DrrRequest::new(1.3, 0.05, 5, SeasonMode::Cooling).unwrap();
        let model = build_milp(&p, &s, &req, &RewardSchedule::default(), &ObjectiveConfig::default()).unwrap();
        let decision = ControlDecision {
            residents: vec![("1".into(), ResidentDecision { ac_on: Some(false), ewh_on: None })],
        };
        let mut values = milp_assignment(&p, &s, &decision, &req).unwrap();
        assert!(values["trm_1"] > 75.0);
        assert_eq!(values["mu_1"], 0.0);
        assert!(model.violations(&values, 1e-7).unwrap().is_empty());
        values.insert("mu_1".into(), 1.0);
        let bad = model.violations(&values, 1e-7).unwrap();
        assert!(bad.iter().any(|v| v.what == "constraint mu_ub_1"), "{bad:?}");
    }

    #[test]
    fn header_and_variables() {
        let (p, s) = small_fleet();
        let req = DrrRequest::new(2.7, 0.05, 5, SeasonMode::Cooling).unwrap();
        let text = export_milp(&p, &s, &req, &RewardSchedule::default(), &ObjectiveConfig::default()).unwrap();
        assert!(text.starts_with("\\ curtailment step model\n"));
        assert!(text.contains("big-M = 1000, strict epsilon = 0.001"));
        let model = LpModel::parse(&text).unwrap();
        for v in ["sa_1", "sa_2", "sa_3", "se_3", "mu_1", "mul_3", "nu_3", "nuh_3"] {
            assert!(model.binaries.iter().any(|b| b == v), "missing binary {v}");
        }
        assert!(model.variables().contains("z_3"));
        assert!(!model.variables().contains("z_1"));
    }
}
