use super::{check_options, infeasible, ReductionWindow, ResidentOption, SolveError, SolveResult};

/// Largest number of binary appliance decisions brute force will accept.
pub const EXHAUSTIVE_DECISION_LIMIT: usize = 24;

/// Brute-force reference for [`super::solve_step`]: tries every combination of
/// options and keeps the first cheapest one inside `window`.
pub fn solve_exhaustive(fleet: &[Vec<ResidentOption>], window: ReductionWindow) -> Result<SolveResult, SolveError> {
    check_options(fleet)?;
    let space: f64 = fleet.iter().map(|opts| opts.len() as f64).product();
    let decisions = space.log2().round() as usize;
    if decisions > EXHAUSTIVE_DECISION_LIMIT {
        return Err(SolveError::TooLarge { decisions, limit: EXHAUSTIVE_DECISION_LIMIT });
    }

    let mut digits = vec![0usize; fleet.len()];
    let mut best: Option<(i64, Vec<usize>)> = None;
    loop {
        let (reduction, cost) = digits.iter().zip(fleet).fold((0u64, 0i64), |(r, c), (&d, opts)| {
            (r + u64::from(opts[d].reduction_units), c + opts[d].cost.nano_cents())
        });
        if window.contains(reduction) && best.as_ref().is_none_or(|(b, _)| cost < *b) {
            best = Some((cost, digits.clone()));
        }

        // odometer increment
        let mut i = 0;
        loop {
            if i == digits.len() {
                return match best {
                    Some((_, choice)) => Ok(SolveResult::from_choice(fleet, &choice, window.units_per_kw)),
                    None => Err(infeasible(fleet, window)),
                };
            }
            digits[i] += 1;
            if digits[i] < fleet[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
    }
}
