use super::{check_options, infeasible, ReductionWindow, ResidentOption, SolveError, SolveResult};

/// Upper bound on DP table cells (about 1.6 GB of `i64`s).
const MAX_TABLE_CELLS: usize = 200_000_000;
const UNREACHABLE: i64 = i64::MAX;

/// Exact minimum-cost selection of one option per resident whose summed
/// reduction lies in `window`.
///
/// Equal-cost optima are resolved in favour of curtailing residents earlier in
/// id order; see [`solve_step_prioritized`].
pub fn solve_step(fleet: &[Vec<ResidentOption>], window: ReductionWindow) -> Result<SolveResult, SolveError> {
    let mut order: Vec<usize> = (0..fleet.len()).collect();
    order.sort_by(|&a, &b| resident_of(fleet, a).cmp(&resident_of(fleet, b)).then(a.cmp(&b)));
    solve_step_prioritized(fleet, window, &order)
}

fn resident_of(fleet: &[Vec<ResidentOption>], i: usize) -> Option<&crate::model::ResidentId> {
    fleet[i].first().map(|o| &o.resident)
}

/// Like [`solve_step`], with an explicit curtailment priority.
///
/// `priority` is a permutation of fleet positions. Among all optimal
/// selections the one returned is lexicographically greatest in
/// per-resident reduction taken in `priority` order, so residents listed
/// first are curtailed whenever that costs nothing extra.
pub fn solve_step_prioritized(
    fleet: &[Vec<ResidentOption>],
    window: ReductionWindow,
    priority: &[usize],
) -> Result<SolveResult, SolveError> {
    check_options(fleet)?;
    assert_eq!(priority.len(), fleet.len(), "priority must be a permutation of fleet positions");

    let max_total: u64 = fleet
        .iter()
        .map(|opts| opts.iter().map(|o| u64::from(o.reduction_units)).max().unwrap_or(0))
        .sum();
    if window.is_empty() || window.lo > max_total {
        return Err(infeasible(fleet, window));
    }
    let cap = window.hi.min(max_total) as usize;
    let width = cap + 1;
    let n = fleet.len();
    let cells = (n + 1).saturating_mul(width);
    if cells > MAX_TABLE_CELLS {
        return Err(SolveError::TableTooLarge { cells, limit: MAX_TABLE_CELLS });
    }

    // table[k * width + t]: cheapest cost for residents priority[k..] with
    // reductions summing to exactly t
    let mut table = vec![UNREACHABLE; cells];
    table[n * width] = 0;
    for k in (0..n).rev() {
        let (head, tail) = table.split_at_mut((k + 1) * width);
        let next = &tail[..width];
        let row = &mut head[k * width..];
        for option in &fleet[priority[k]] {
            let r = option.reduction_units as usize;
            if r > cap {
                continue;
            }
            let c = option.cost.nano_cents();
            for t in r..width {
                let prev = next[t - r];
                if prev != UNREACHABLE {
                    let candidate = prev + c;
                    if candidate < row[t] {
                        row[t] = candidate;
                    }
                }
            }
        }
    }

    let lo = window.lo as usize;
    let best = table[lo..width].iter().copied().min().unwrap_or(UNREACHABLE);
    if best == UNREACHABLE {
        return Err(infeasible(fleet, window));
    }

    let mut targets: Vec<bool> = (0..width).map(|t| t >= lo && table[t] == best).collect();
    let mut choice = vec![0usize; n];
    for k in 0..n {
        let resident = priority[k];
        let options = &fleet[resident];
        let mut preference: Vec<usize> = (0..options.len()).collect();
        preference.sort_by(|&a, &b| options[b].reduction_units.cmp(&options[a].reduction_units).then(a.cmp(&b)));

        let row = &table[k * width..(k + 1) * width];
        let next = &table[(k + 1) * width..(k + 2) * width];
        let mut picked = None;
        for o in preference {
            let r = options[o].reduction_units as usize;
            let c = options[o].cost.nano_cents();
            let mut next_targets = vec![false; width];
            let mut any = false;
            for t in (r..width).filter(|&t| targets[t]) {
                let prev = next[t - r];
                if prev != UNREACHABLE && prev + c == row[t] {
                    next_targets[t - r] = true;
                    any = true;
                }
            }
            if any {
                picked = Some(o);
                targets = next_targets;
                break;
            }
        }
        choice[resident] = picked.expect("optimal value has a consistent backtrace");
    }

    Ok(SolveResult::from_choice(fleet, &choice, window.units_per_kw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::Cost;
    use crate::model::{PowerGrid, ThermalState};
    use crate::rewards::CurtailedTiers;
    use crate::solver::ResidentDecision;

    fn opt(id: &str, units: u32, cents: f64) -> ResidentOption {
        ResidentOption {
            resident: id.into(),
            decision: ResidentDecision { ac_on: Some(units == 0), ewh_on: None },
            reduction_units: units,
            reduction_kw: units as f64 / 10.0,
            reward: Cost::from_cents(cents),
            comfort: Cost::ZERO,
            cost: Cost::from_cents(cents),
            comfort_margin: 0.0,
            tiers: CurtailedTiers::default(),
            predicted: ThermalState { room_temp: Some(70.0), tank_temp: None, ambient_temp: 90.0 },
        }
    }

    fn window(lo: u64, hi: u64) -> ReductionWindow {
        ReductionWindow::from_units(lo, hi, &PowerGrid::default())
    }

    #[test]
    fn zero_window_keeps_everything_on() {
        let fleet = vec![vec![opt("1", 0, 0.5), opt("1", 13, 13.0)], vec![opt("2", 0, 0.25), opt("2", 14, 14.0)]];
        let r = solve_step(&fleet, window(0, 0)).unwrap();
        assert_eq!(r.total_reduction_units, 0);
        assert_eq!(r.objective, Cost::from_cents(0.75));
    }

    #[test]
    fn picks_cheapest_feasible_combination() {
        let fleet = vec![
            vec![opt("1", 0, 0.0), opt("1", 13, 13.0)],
            vec![opt("2", 0, 0.0), opt("2", 14, 28.0)],
            vec![opt("3", 0, 0.0), opt("3", 12, 12.0)],
        ];
        let r = solve_step(&fleet, window(24, 26)).unwrap();
        assert_eq!(r.total_reduction_units, 25);
        assert_eq!(r.objective, Cost::from_cents(25.0));
    }

    #[test]
    fn infeasible_window_is_reported() {
        let fleet = vec![vec![opt("1", 0, 0.0), opt("1", 13, 13.0)], vec![opt("2", 0, 0.0), opt("2", 14, 14.0)]];
        match solve_step(&fleet, window(15, 26)) {
            Err(SolveError::Infeasible(d)) => {
                assert_eq!(d.reachable_max_kw, 2.7);
                assert_eq!(d.nearest_below_kw, Some(1.4));
                assert_eq!(d.nearest_above_kw, Some(2.7));
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(matches!(solve_step(&fleet, window(100, 120)), Err(SolveError::Infeasible(_))));
    }

    #[test]
    fn ties_go_to_the_prioritised_resident() {
        let fleet = vec![vec![opt("1", 0, 0.0), opt("1", 10, 10.0)], vec![opt("2", 0, 0.0), opt("2", 10, 10.0)]];
        let w = window(10, 10);
        let first = solve_step_prioritized(&fleet, w, &[0, 1]).unwrap();
        assert_eq!(first.per_resident[0].reduction_units, 10);
        let second = solve_step_prioritized(&fleet, w, &[1, 0]).unwrap();
        assert_eq!(second.per_resident[1].reduction_units, 10);
        assert_eq!(first.objective, second.objective);
    }

    #[test]
    fn empty_option_list_is_an_error() {
        let fleet = vec![vec![opt("1", 0, 0.0)], vec![]];
        assert_eq!(solve_step(&fleet, window(0, 0)), Err(SolveError::EmptyOptions(1)));
    }
}
