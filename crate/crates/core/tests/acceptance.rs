//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

mod common;

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use rla_core::cost::Cost;
use rla_core::dispatch::{run_session, run_sweep, AmbientProfile, ScenarioConfig, SessionReport};
use rla_core::fleet::{generate_fleet, load_fleet, Fleet, GeneratorSpec};
use rla_core::model::{ComfortRange, PowerGrid, ResidentId, RewardSchedule, SeasonMode};
use rla_core::rewards::{classify_tier, CurtailedTiers, RateTier, RewardLedger, StepEntry};
use rla_core::solver::lp::LpModel;
use rla_core::solver::milp::{export_milp, milp_assignment};
use rla_core::solver::{
    enumerate_options, solve_exhaustive, solve_step, DrrRequest, ObjectiveConfig, SolveError, DEFAULT_DELTA,
};

use common::{random_instance, table3};

const TABLE3_AMBIENT_F: f64 = 94.0;
const PROPTEST_CASES: u32 = 256;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

/// Window checks accumulated over every session the suite runs.
#[derive(Default)]
struct WindowAudit {
    steps: usize,
    violations: Vec<String>,
}

impl WindowAudit {
    fn observe(&mut self, label: &str, report: &SessionReport) {
        let u = f64::from(report.assumptions.units_per_kw);
        let window = DrrRequest::new(report.assumptions.amount_kw, report.assumptions.delta, report.assumptions.duration_min, report.assumptions.mode)
            .unwrap()
            .window(&PowerGrid::new(report.assumptions.units_per_kw).unwrap());
        for s in &report.steps {
            self.steps += 1;
            let units = (s.tdr_kw * u).round() as u64;
            if report.assumptions.delta != DEFAULT_DELTA {
                self.violations.push(format!("{label}: delta {} instead of {DEFAULT_DELTA}", report.assumptions.delta));
            }
            if !window.contains(units) {
                self.violations.push(format!("{label} step {}: TDR {} kW outside {:?}", s.step, s.tdr_kw, s.window_kw));
            }
        }
    }
}

fn table3_session(fleet: &Fleet, amount: f64) -> SessionReport {
    let request = DrrRequest::new(amount, DEFAULT_DELTA, 20, SeasonMode::Cooling).unwrap();
    let scenario = ScenarioConfig::for_fleet(fleet, AmbientProfile::Constant(TABLE3_AMBIENT_F));
    run_session(fleet, &request, &scenario).unwrap()
}

fn describe(report: &SessionReport) -> String {
    report
        .residents
        .iter()
        .map(|r| {
            let tiers: Vec<&str> = r.tiers_seen.iter().map(|t| t.label()).collect();
            format!("#{} cmft {:.0} [{}] {:.1}c", r.id, r.cmft.unwrap_or(f64::NAN), tiers.join(""), r.total_reward_cents)
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut mismatches = Vec::new();
    let (mut feasible, mut infeasible) = (0, 0);
    for seed in 0..300u64 {
        let inst = random_instance(seed, 8);
        let options = inst.options();
        let window = inst.request.window(&inst.config.grid);
        match (solve_step(&options, window), solve_exhaustive(&options, window)) {
            (Ok(a), Ok(b)) => {
                feasible += 1;
                if a.objective != b.objective {
                    mismatches.push(format!("seed {seed}: {} vs {}", a.objective.nano_cents(), b.objective.nano_cents()));
                }
            }
            (Err(SolveError::Infeasible(_)), Err(SolveError::Infeasible(_))) => infeasible += 1,
            (a, b) => mismatches.push(format!("seed {seed}: verdicts differ ({:?} / {:?})", a.is_ok(), b.is_ok())),
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && feasible + infeasible >= 200 && elapsed < Duration::from_secs(10);
    Outcome::new(
        pass,
        format!("300 instances ({feasible} feasible, {infeasible} infeasible), {} mismatches, {elapsed:.2?} {}", mismatches.len(), mismatches.join(", ")),
    )
}

fn table3_structure(fleet: &Fleet, report: &SessionReport) -> Outcome {
    let all_r1 = report.residents.iter().all(|r| r.tiers_seen.iter().all(|&t| t == RateTier::R1Common));
    let full_cmft: Vec<&ResidentId> =
        report.residents.iter().filter(|r| r.cmft != Some(100.0)).map(|r| &r.id).collect();
    let zero = |id: &str| report.residents.iter().find(|r| r.id.as_str() == id).unwrap().total_reward == Cost::ZERO;
    let pass = report.is_complete() && all_r1 && full_cmft.is_empty() && zero("3") && zero("5");
    let _ = fleet;
    Outcome::new(
        pass,
        format!(
            "TA {TABLE3_AMBIENT_F} F constant, w {} uc; complete {}, only R1 {all_r1}, below 100% CMFT {:?}, #3 zero {}, #5 zero {}; {}",
            report.assumptions.comfort_weight_micro_cents,
            report.is_complete(),
            full_cmft.iter().map(|i| i.as_str()).collect::<Vec<_>>(),
            zero("3"),
            zero("5"),
            describe(report)
        ),
    )
}

fn compromise_structure(fleet: &Fleet, s1: &SessionReport, s2: &SessionReport) -> Outcome {
    let cop: BTreeMap<&ResidentId, bool> = fleet.profiles.iter().map(|p| (p.id(), p.compromise())).collect();
    let r2_residents: Vec<&ResidentId> =
        s2.residents.iter().filter(|r| r.tiers_seen.contains(&RateTier::R2Compromised)).map(|r| &r.id).collect();
    let any_r3 = s2.residents.iter().any(|r| r.tiers_seen.contains(&RateTier::R3Emergency));
    let r2_only_cop = r2_residents.iter().all(|id| cop[id]);
    let low_cmft_cop = s2.residents.iter().filter(|r| r.cmft.is_some_and(|c| c < 100.0)).all(|r| cop[&r.id]);
    let ratio = s2.total_reward_cents / s1.total_reward_cents;
    let pass = s2.is_complete() && !r2_residents.is_empty() && r2_only_cop && low_cmft_cop && !any_r3;
    Outcome::new(
        pass,
        format!(
            "R2 residents {:?} (all compromise: {r2_only_cop}), R3 seen {any_r3}, low-CMFT all compromise {low_cmft_cop}; reward ratio session2/session1 = {:.1}/{:.1} = {ratio:.3} (paper about 2.34); {}",
            r2_residents.iter().map(|i| i.as_str()).collect::<Vec<_>>(),
            s2.total_reward_cents,
            s1.total_reward_cents,
            describe(s2)
        ),
    )
}

fn sweep_trends(audit: &mut WindowAudit) -> Outcome {
    let start = Instant::now();
    let file = generate_fleet(&GeneratorSpec::new(100, 2024)).unwrap();
    let fleet = load_fleet(&file, &PowerGrid::default()).unwrap();
    let scenario = ScenarioConfig::for_fleet(&fleet, AmbientProfile::Constant(94.0));
    let amounts = [0.2, 0.35, 0.5, 0.65, 0.8].map(|f: f64| (f * fleet.total_power_kw()).round());
    let durations = [10, 20, 30, 45, 60];
    let grid = run_sweep(&fleet, &amounts, &durations, DEFAULT_DELTA, SeasonMode::Cooling, &scenario).unwrap();
    for &a in &amounts {
        for &d in &durations {
            let req = DrrRequest::new(a, DEFAULT_DELTA, d, SeasonMode::Cooling).unwrap();
            audit.observe(&format!("sweep {a}/{d}"), &run_session(&fleet, &req, &scenario).unwrap());
        }
    }
    let violations = grid.monotonicity_violations();
    let elapsed = start.elapsed();
    let row = |i: usize, f: &dyn Fn(&rla_core::dispatch::SweepCell) -> String| {
        (0..durations.len()).map(|j| f(grid.cell(i, j))).collect::<Vec<_>>().join(" ")
    };
    let corners = (0..amounts.len())
        .map(|i| {
            format!(
                "{} kW: CMFT [{}] reward [{}]",
                amounts[i],
                row(i, &|c| format!("{:.1}", c.average_cmft.unwrap_or(f64::NAN))),
                row(i, &|c| format!("{:.0}", c.total_reward_cents))
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(
        violations.is_empty() && elapsed < Duration::from_secs(60),
        format!("100 residents, {} kW total, 5x5 grid; {corners}; {} violations {:?}; {elapsed:.2?}", fleet.total_power_kw(), violations.len(), violations),
    )
}

fn scale_timing(audit: &mut WindowAudit) -> Outcome {
    let file = generate_fleet(&GeneratorSpec::new(500, 500)).unwrap();
    let fleet = load_fleet(&file, &PowerGrid::default()).unwrap();
    let amount = (fleet.total_power_kw() * 0.15).round();
    let scenario = ScenarioConfig::for_fleet(&fleet, AmbientProfile::Constant(94.0));
    let schedule = RewardSchedule::default();
    let config = ObjectiveConfig::default();
    let request = DrrRequest::new(amount, DEFAULT_DELTA, 60, SeasonMode::Cooling).unwrap();

    let start = Instant::now();
    let states = fleet.states(94.0);
    let options: Vec<_> = fleet
        .profiles
        .iter()
        .zip(&states)
        .map(|(p, s)| enumerate_options(p, s, &schedule, &config, request.mode).unwrap())
        .collect();
    let single = solve_step(&options, request.window(&config.grid));
    let single_time = start.elapsed();

    let start = Instant::now();
    let report = run_session(&fleet, &request, &scenario).unwrap();
    let session_time = start.elapsed();
    audit.observe("scale", &report);

    let pass = single.is_ok()
        && report.is_complete()
        && report.steps_completed == 12
        && single_time <= Duration::from_secs(1)
        && session_time <= Duration::from_secs(15);
    Outcome::new(
        pass,
        format!(
            "500 residents ({} kW), D {amount} kW: single step {single_time:.2?} (feasible {}), 12-step session {session_time:.2?} ({} steps)",
            fleet.total_power_kw(),
            single.is_ok(),
            report.steps_completed
        ),
    )
}

fn milp_consistency() -> Outcome {
    let mut checked = 0;
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut seed = 10_000u64;
    while checked < 20 {
        seed += 1;
        let inst = random_instance(seed, 6);
        let options = inst.options();
        let Ok(result) = solve_step(&options, inst.request.window(&inst.config.grid)) else { continue };
        checked += 1;
        let text = export_milp(&inst.profiles, &inst.states, &inst.request, &inst.schedule, &inst.config).unwrap();
        let model = LpModel::parse(&text).unwrap();
        let values = milp_assignment(&inst.profiles, &inst.states, &result.decision, &inst.request).unwrap();
        let got = model.evaluate_objective(&values).unwrap();
        let want = result.objective.cents();
        let rel = (got - want).abs() / want.abs().max(1e-12);
        worst = worst.max(if want == 0.0 { got.abs() } else { rel });
        if rel > 1e-6 && (got - want).abs() > 1e-12 {
            failures.push(format!("seed {seed}: {got} vs {want}"));
        }
        let violated = model.violations(&values, 1e-7).unwrap();
        if !violated.is_empty() {
            failures.push(format!("seed {seed}: {:?}", violated));
        }
    }
    Outcome::new(failures.is_empty(), format!("{checked} instances, worst relative error {worst:.2e}; {}", failures.join(", ")))
}

fn invariant_suite() -> Outcome {
    let mut results = Vec::new();
    let mut run = |name: &str, f: &dyn Fn(&mut TestRunner) -> Result<(), String>| {
        let mut runner = TestRunner::new(Config { cases: PROPTEST_CASES, failure_persistence: None, ..Config::default() });
        let r = f(&mut runner);
        results.push((name.to_string(), r));
    };

    run("comfort-margin symmetry and affine invariance", &|runner| {
        let strat = (-50.0..150.0f64, 0.5..40.0f64, 0.0..1.0f64, 0.1..10.0f64, -100.0..100.0f64);
        runner
            .run(&strat, |(low, span, frac, scale, shift)| {
                let range = ComfortRange::new(low, low + span).unwrap();
                let t = low - span + 3.0 * span * frac;
                let cm = rla_core::model::comfort_margin_component(t, &range);
                let mirrored = rla_core::model::comfort_margin_component(2.0 * range.midpoint() - t, &range);
                prop_assert!((cm - mirrored).abs() <= 1e-9 * cm.max(1.0));
                let moved = ComfortRange::new(scale * low + shift, scale * (low + span) + shift).unwrap();
                let cm2 = rla_core::model::comfort_margin_component(scale * t + shift, &moved);
                prop_assert!((cm - cm2).abs() <= 1e-7 * cm.max(1.0));
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    run("tier-classification exclusivity", &|runner| {
        runner
            .run(&(60.0..80.0f64, 1.0..15.0f64, 40.0..100.0f64, any::<bool>()), |(low, span, t, cop)| {
                let range = ComfortRange::new(low, low + span).unwrap();
                let tier = classify_tier(t, &range, cop);
                let inside = rla_core::model::comfort_margin_component(t, &range) <= 1.0;
                prop_assert_eq!(tier == RateTier::R1Common, inside);
                prop_assert!(!(cop && tier == RateTier::R3Emergency));
                prop_assert!(!(!cop && tier == RateTier::R2Compromised));
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    run("ledger replay determinism", &|runner| {
        let entry = (0usize..6, 0i64..5_000_000_000, proptest::option::of(0usize..3), proptest::option::of(0usize..3));
        runner
            .run(&proptest::collection::vec(proptest::collection::vec(entry, 0..6), 1..10), |steps| {
                let tiers = [RateTier::R1Common, RateTier::R2Compromised, RateTier::R3Emergency];
                let replay = || {
                    let mut ledger = RewardLedger::with_residents((0..6).map(|i| ResidentId::new(i.to_string())));
                    for (k, step) in steps.iter().enumerate() {
                        let mut seen = std::collections::BTreeSet::new();
                        let entries: Vec<StepEntry> = step
                            .iter()
                            .filter(|e| seen.insert(e.0))
                            .map(|&(r, c, a, e)| StepEntry {
                                resident: ResidentId::new(r.to_string()),
                                reward: Cost(c),
                                tiers: CurtailedTiers { ac: a.map(|i| tiers[i]), ewh: e.map(|i| tiers[i]) },
                            })
                            .collect();
                        ledger.record_step(k, &entries).unwrap();
                    }
                    ledger
                };
                prop_assert_eq!(replay(), replay());
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    run("argmin stability under joint rate scaling", &|runner| {
        runner
            .run(&(0u64..1_000_000, 2i64..50), |(seed, k)| {
                let inst = random_instance(seed, 6);
                let window = inst.request.window(&inst.config.grid);
                let base = solve_step(&inst.options(), window);
                let scaled_config = ObjectiveConfig { comfort_weight: inst.config.comfort_weight * k as u64, ..inst.config };
                let scaled_schedule = inst.schedule.scaled(k as f64).unwrap();
                let scaled: Vec<_> = inst
                    .profiles
                    .iter()
                    .zip(&inst.states)
                    .map(|(p, s)| enumerate_options(p, s, &scaled_schedule, &scaled_config, inst.request.mode).unwrap())
                    .collect();
                let other = solve_step(&scaled, window);
                match (base, other) {
                    (Ok(a), Ok(b)) => {
                        prop_assert_eq!(a.decision, b.decision);
                        prop_assert_eq!(a.objective * k, b.objective);
                    }
                    (Err(_), Err(_)) => {}
                    _ => prop_assert!(false, "feasibility changed under scaling"),
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    run("session determinism", &|runner| {
        let fleet = load_fleet(&generate_fleet(&GeneratorSpec::new(12, 77)).unwrap(), &PowerGrid::default()).unwrap();
        let total = fleet.total_power_kw();
        runner
            .run(&(0.0..1.0f64, 1u32..7, any::<u64>(), proptest::option::of(0.0..0.5f64)), |(frac, steps, seed, bound)| {
                let amount = (frac * total * 10.0).round() / 10.0;
                let request = DrrRequest::new(amount, DEFAULT_DELTA, steps * 5, SeasonMode::Cooling).unwrap();
                let mut scenario = ScenarioConfig::for_fleet(&fleet, AmbientProfile::Constant(92.0));
                scenario.seed = seed;
                scenario.disturbance = bound.map(|bound_f| rla_core::dispatch::Disturbance { bound_f });
                let a = run_session(&fleet, &request, &scenario).unwrap();
                let b = run_session(&fleet, &request, &scenario).unwrap();
                prop_assert_eq!(a.to_json_string(), b.to_json_string());
                prop_assert_eq!(a.total_reward, a.ledger.total_reward());
                Ok(())
            })
            .map_err(|e| e.to_string())
    });

    let pass = results.iter().all(|(_, r)| r.is_ok());
    let detail = results
        .iter()
        .map(|(n, r)| match r {
            Ok(()) => format!("{n}: ok"),
            Err(e) => format!("{n}: {e}"),
        })
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(pass, format!("{PROPTEST_CASES} cases each; {detail}"))
}

fn main() {
    let fleet = table3();
    let mut audit = WindowAudit::default();
    let s1 = table3_session(&fleet, 4.0);
    let s2 = table3_session(&fleet, 8.0);
    audit.observe("table3 4kW", &s1);
    audit.observe("table3 8kW", &s2);

    let mut outcomes = vec![
        ("1 oracle equivalence", oracle_equivalence()),
        ("3 table III session 1 structure", table3_structure(&fleet, &s1)),
        ("4 session 2 compromise structure", compromise_structure(&fleet, &s1, &s2)),
        ("5 sweep trends", sweep_trends(&mut audit)),
        ("6 scale and timing", scale_timing(&mut audit)),
        ("7 MILP export consistency", milp_consistency()),
        ("8 invariant suite", invariant_suite()),
    ];
    let window = Outcome::new(
        audit.violations.is_empty() && audit.steps > 0,
        format!("{} session steps checked, {} violations {:?}", audit.steps, audit.violations.len(), audit.violations),
    );
    outcomes.insert(1, ("2 window soundness", window));

    let mut failed = 0;
    for (name, o) in &outcomes {
        println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed", outcomes.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
