use std::fmt::Write as _;

use rla_core::dispatch::{SessionReport, SweepGrid};

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map(|v| format!("{v:.decimals$}")).unwrap_or_else(|| "-".into())
}

/// Per-resident table: temperature extremes, CMFT, tiers and rewards.
pub fn session(report: &SessionReport) -> String {
    let mut out = String::new();
    let a = &report.assumptions;
    let _ = writeln!(
        out,
        "demand reduction {} kW for {} min ({} steps completed of {}), delta {}, {}",
        a.amount_kw, a.duration_min, report.steps_completed, report.steps_requested, a.delta, a.mode
    );
    let _ = writeln!(
        out,
        "{:>6} {:>4} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8} {:>12}",
        "ID", "Cop", "min T_RM", "max T_RM", "min T_T", "max T_T", "CMFT %", "Rate", "Rewards (c)"
    );
    for r in &report.residents {
        let rates: Vec<&str> = r.tiers_seen.iter().map(|t| t.label()).collect();
        let _ = writeln!(
            out,
            "{:>6} {:>4} {:>9} {:>9} {:>9} {:>9} {:>8} {:>8} {:>12.2}",
            r.id.as_str(),
            u8::from(r.compromise),
            cell(r.room.map(|t| t.min), 2),
            cell(r.room.map(|t| t.max), 2),
            cell(r.tank.map(|t| t.min), 2),
            cell(r.tank.map(|t| t.max), 2),
            cell(r.cmft, 0),
            if rates.is_empty() { "-".to_string() } else { rates.join(",") },
            r.total_reward_cents
        );
    }
    let _ = writeln!(
        out,
        "average CMFT {} %, total rewards {:.2} c",
        cell(report.average_cmft, 1),
        report.total_reward_cents
    );
    if let Some(abort) = &report.abort {
        let _ = writeln!(out, "aborted at step {}: {}", abort.step, abort.diagnostic);
    }
    out
}

pub fn sweep(grid: &SweepGrid) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:>10} {:>8} {:>14} {:>14}  status", "amount kW", "min", "avg CMFT %", "rewards (c)");
    for c in &grid.cells {
        let _ = writeln!(
            out,
            "{:>10} {:>8} {:>14} {:>14.2}  {}",
            c.amount_kw,
            c.duration_min,
            cell(c.average_cmft, 1),
            c.total_reward_cents,
            c.failure.as_deref().unwrap_or("ok")
        );
    }
    out
}
