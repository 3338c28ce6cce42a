//! Reward tiers, per-step reward computation and the participation ledger.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::{reward_cost, Cost};
use crate::model::{
    comfort_margin_component, Appliance, ComfortRange, ModelError, PowerGrid, ResidentId, ResidentProfile,
    RewardSchedule,
};
use crate::solver::ResidentDecision;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RewardError {
    #[error("step {step} recorded out of order (last recorded step {last})")]
    StepOutOfOrder { step: usize, last: usize },
    #[error("resident {0} is not known to the ledger")]
    UnknownResident(ResidentId),
    #[error("resident {0} listed more than once in a step")]
    DuplicateEntry(ResidentId),
    #[error("tiers for resident {0} do not match the curtailed appliances")]
    TierMismatch(ResidentId),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Reward-rate level paid for a curtailed appliance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RateTier {
    R1Common,
    R2Compromised,
    R3Emergency,
}

impl RateTier {
    pub fn rate(self, schedule: &RewardSchedule) -> f64 {
        match self {
            RateTier::R1Common => schedule.r1(),
            RateTier::R2Compromised => schedule.r2(),
            RateTier::R3Emergency => schedule.r3(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RateTier::R1Common => "R1",
            RateTier::R2Compromised => "R2",
            RateTier::R3Emergency => "R3",
        }
    }
}

impl fmt::Display for RateTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Tier from the comfort margin of the predicted temperature: common inside
/// the range (boundary included), otherwise compromised or emergency by the
/// resident's compromise flag.
pub fn classify_tier(predicted_temp: f64, range: &ComfortRange, compromise: bool) -> RateTier {
    if comfort_margin_component(predicted_temp, range) <= 1.0 {
        RateTier::R1Common
    } else if compromise {
        RateTier::R2Compromised
    } else {
        RateTier::R3Emergency
    }
}

/// Tiers of the appliances a decision curtails; `None` for appliances left on
/// or absent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurtailedTiers {
    pub ac: Option<RateTier>,
    pub ewh: Option<RateTier>,
}

impl CurtailedTiers {
    pub fn any(&self) -> bool {
        self.ac.is_some() || self.ewh.is_some()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Appliance, RateTier)> {
        self.ac.map(|t| (Appliance::Ac, t)).into_iter().chain(self.ewh.map(|t| (Appliance::Ewh, t)))
    }
}

/// Reward owed to one resident for one step.
pub fn step_reward(
    profile: &ResidentProfile,
    decision: &ResidentDecision,
    tiers: &CurtailedTiers,
    schedule: &RewardSchedule,
    grid: &PowerGrid,
) -> Result<Cost, RewardError> {
    let mismatch = || RewardError::TierMismatch(profile.id().clone());
    let mut total = Cost::ZERO;
    let pairs = [(profile.ac(), decision.ac_on, tiers.ac), (profile.ewh(), decision.ewh_on, tiers.ewh)];
    for (unit, on, tier) in pairs {
        match (unit, on, tier) {
            (None, None, None) => {}
            (Some(_), Some(true), None) => {}
            (Some(unit), Some(false), Some(tier)) => {
                let units = grid.to_units(unit.params.power_kw)?;
                total += reward_cost(units, grid.units_per_kw(), tier.rate(schedule));
            }
            _ => return Err(mismatch()),
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierRecord {
    pub step: usize,
    pub appliance: Appliance,
    pub tier: RateTier,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResidentAccount {
    pub cumulative_reward: Cost,
    pub participation_count: u32,
    pub tier_history: Vec<TierRecord>,
}

/// One resident's outcome for a recorded step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepEntry {
    pub resident: ResidentId,
    pub reward: Cost,
    pub tiers: CurtailedTiers,
}

/// Ordering key for the participation-history rule: fewer past
/// participations first, then resident id.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FairnessKey {
    pub participation_count: u32,
    pub resident: ResidentId,
}

/// Cumulative rewards and participation history for a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewardLedger {
    accounts: BTreeMap<ResidentId, ResidentAccount>,
    last_step: Option<usize>,
    steps_recorded: usize,
}

impl RewardLedger {
    pub fn with_residents<I>(ids: I) -> Self
    where
        I: IntoIterator<Item = ResidentId>,
    {
        Self {
            accounts: ids.into_iter().map(|id| (id, ResidentAccount::default())).collect(),
            last_step: None,
            steps_recorded: 0,
        }
    }

    pub fn account(&self, id: &ResidentId) -> Option<&ResidentAccount> {
        self.accounts.get(id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = (&ResidentId, &ResidentAccount)> {
        self.accounts.iter()
    }

    pub fn steps_recorded(&self) -> usize {
        self.steps_recorded
    }

    pub fn total_reward(&self) -> Cost {
        self.accounts.values().map(|a| a.cumulative_reward).sum()
    }

    /// Applies one step's outcomes. Step indices must strictly increase; the
    /// ledger is left untouched on error.
    pub fn record_step(&mut self, step: usize, entries: &[StepEntry]) -> Result<(), RewardError> {
        if let Some(last) = self.last_step {
            if step <= last {
                return Err(RewardError::StepOutOfOrder { step, last });
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in entries {
            if !self.accounts.contains_key(&entry.resident) {
                return Err(RewardError::UnknownResident(entry.resident.clone()));
            }
            if !seen.insert(&entry.resident) {
                return Err(RewardError::DuplicateEntry(entry.resident.clone()));
            }
        }
        for entry in entries {
            let account = self.accounts.get_mut(&entry.resident).expect("checked above");
            account.cumulative_reward += entry.reward;
            if entry.tiers.any() {
                account.participation_count += 1;
            }
            account
                .tier_history
                .extend(entry.tiers.iter().map(|(appliance, tier)| TierRecord { step, appliance, tier }));
        }
        self.last_step = Some(step);
        self.steps_recorded += 1;
        Ok(())
    }

    pub fn fairness_key(&self, id: &ResidentId) -> Result<FairnessKey, RewardError> {
        let account = self.accounts.get(id).ok_or_else(|| RewardError::UnknownResident(id.clone()))?;
        Ok(FairnessKey { participation_count: account.participation_count, resident: id.clone() })
    }
}
