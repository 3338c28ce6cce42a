//! Household and appliance domain types, the one-step thermal estimators and
//! the comfort-margin measure.
//!
//! All temperatures are in degrees Fahrenheit and one estimation step spans
//! five minutes; `effect` and `loss_rate` are per-step quantities.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest temperature accepted at ingestion, °F.
pub const MIN_TEMPERATURE_F: f64 = -50.0;
/// Highest temperature accepted at ingestion, °F.
pub const MAX_TEMPERATURE_F: f64 = 220.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("reward rates must satisfy 0 < r1 < r2 < r3, got ({0}, {1}, {2})")]
    InvalidRates(f64, f64, f64),
    #[error("comfort range must satisfy low < high, got [{low}, {high}]")]
    InvalidRange { low: f64, high: f64 },
    #[error("invalid appliance parameters: {0}")]
    InvalidParams(String),
    #[error("temperature {0} °F is outside the representable range")]
    TemperatureOutOfRange(f64),
    #[error("room temperature required for an AC estimate")]
    MissingRoomTemp,
    #[error("tank temperature required for an EWH estimate")]
    MissingTankTemp,
    #[error("resident {0} has neither an AC nor an EWH")]
    NoAppliance(ResidentId),
    #[error("power {kw} kW is not a multiple of 1/{units_per_kw} kW")]
    OffGrid { kw: f64, units_per_kw: u32 },
    #[error("thermal state does not match the appliance set of resident {0}")]
    StateMismatch(ResidentId),
}

/// Reward rates in cents per (kW·5min), one per tier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub struct RewardSchedule {
    r1: f64,
    r2: f64,
    r3: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSchedule {
    r1: f64,
    r2: f64,
    r3: f64,
}

impl TryFrom<RawSchedule> for RewardSchedule {
    type Error = ModelError;
    fn try_from(raw: RawSchedule) -> Result<Self, ModelError> {
        RewardSchedule::new(raw.r1, raw.r2, raw.r3)
    }
}

impl From<RewardSchedule> for RawSchedule {
    fn from(s: RewardSchedule) -> Self {
        RawSchedule { r1: s.r1, r2: s.r2, r3: s.r3 }
    }
}

impl RewardSchedule {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Result<Self, ModelError> {
        let ordered = r1.is_finite() && r3.is_finite() && 0.0 < r1 && r1 < r2 && r2 < r3;
        if !ordered {
            return Err(ModelError::InvalidRates(r1, r2, r3));
        }
        Ok(Self { r1, r2, r3 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }

    pub fn r2(&self) -> f64 {
        self.r2
    }

    pub fn r3(&self) -> f64 {
        self.r3
    }

    /// Multiplies every rate by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self, ModelError> {
        Self::new(self.r1 * factor, self.r2 * factor, self.r3 * factor)
    }
}

impl Default for RewardSchedule {
    /// 10, 20 and 30 cents per (kW·5min).
    fn default() -> Self {
        Self { r1: 10.0, r2: 20.0, r3: 30.0 }
    }
}

/// Power rating and per-step thermal coefficients shared by both appliance
/// classes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplianceParams {
    /// Rated electrical power, kW.
    pub power_kw: f64,
    /// Temperature change per kW over one step while running, °F/kW.
    pub effect: f64,
    /// Fraction of the gap to ambient closed per step.
    pub loss_rate: f64,
}

pub type AcParams = ApplianceParams;
pub type EwhParams = ApplianceParams;

impl ApplianceParams {
    pub fn new(power_kw: f64, effect: f64, loss_rate: f64) -> Result<Self, ModelError> {
        let p = Self { power_kw, effect, loss_rate };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.power_kw.is_finite() && self.power_kw > 0.0) {
            return Err(ModelError::InvalidParams(format!("power must be > 0, got {}", self.power_kw)));
        }
        if !(self.effect.is_finite() && self.effect > 0.0) {
            return Err(ModelError::InvalidParams(format!("effect must be > 0, got {}", self.effect)));
        }
        if !(0.0..=1.0).contains(&self.loss_rate) {
            return Err(ModelError::InvalidParams(format!(
                "loss rate must lie in [0, 1], got {}",
                self.loss_rate
            )));
        }
        Ok(())
    }
}

/// Resolution on which appliance powers and reductions are represented.
///
/// The default of 10 units per kW matches one-decimal kW ratings; sums on the
/// grid are exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PowerGrid {
    units_per_kw: u32,
}

impl PowerGrid {
    /// `units_per_kw` must divide 1000 so reward arithmetic stays exact.
    pub fn new(units_per_kw: u32) -> Result<Self, ModelError> {
        if units_per_kw == 0 || 1000 % units_per_kw != 0 {
            return Err(ModelError::InvalidParams(format!(
                "grid resolution must divide 1000 units per kW, got {units_per_kw}"
            )));
        }
        Ok(Self { units_per_kw })
    }

    pub fn units_per_kw(&self) -> u32 {
        self.units_per_kw
    }

    /// Converts a power to grid units, failing if it is off the grid.
    pub fn to_units(&self, kw: f64) -> Result<u32, ModelError> {
        let scaled = kw * f64::from(self.units_per_kw);
        let rounded = scaled.round();
        if !(scaled.is_finite() && rounded >= 0.0 && rounded <= f64::from(u32::MAX)) || (scaled - rounded).abs() > 1e-6
        {
            return Err(ModelError::OffGrid { kw, units_per_kw: self.units_per_kw });
        }
        Ok(rounded as u32)
    }

    pub fn to_kw(&self, units: u64) -> f64 {
        units as f64 / f64::from(self.units_per_kw)
    }
}

impl Default for PowerGrid {
    fn default() -> Self {
        Self { units_per_kw: 10 }
    }
}

/// Inclusive comfort interval, °F.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRange", into = "RawRange")]
pub struct ComfortRange {
    low: f64,
    high: f64,
}

#[derive(Serialize, Deserialize)]
struct RawRange {
    low: f64,
    high: f64,
}

impl TryFrom<RawRange> for ComfortRange {
    type Error = ModelError;
    fn try_from(raw: RawRange) -> Result<Self, ModelError> {
        ComfortRange::new(raw.low, raw.high)
    }
}

impl From<ComfortRange> for RawRange {
    fn from(r: ComfortRange) -> Self {
        RawRange { low: r.low, high: r.high }
    }
}

impl ComfortRange {
    pub fn new(low: f64, high: f64) -> Result<Self, ModelError> {
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(ModelError::InvalidRange { low, high });
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    pub fn contains(&self, temp: f64) -> bool {
        self.low <= temp && temp <= self.high
    }
}

/// An appliance together with the comfort interval its resident declared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplianceUnit {
    pub params: ApplianceParams,
    pub comfort: ComfortRange,
}

/// Opaque resident identifier.
///
/// Ordering is natural: two purely numeric ids compare by value ("2" < "10"),
/// numeric ids sort before other ids, and the rest compare as strings.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ResidentId(String);

impl ResidentId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn numeric(&self) -> Option<u64> {
        if self.0.is_empty() || !self.0.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        self.0.parse().ok()
    }
}

impl Ord for ResidentId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.numeric(), other.numeric()) {
            (Some(a), Some(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for ResidentId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ResidentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ResidentId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

/// One household's controllable appliances and preferences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentProfile {
    id: ResidentId,
    ac: Option<ApplianceUnit>,
    ewh: Option<ApplianceUnit>,
    compromise: bool,
}

impl ResidentProfile {
    pub fn new(
        id: ResidentId,
        ac: Option<ApplianceUnit>,
        ewh: Option<ApplianceUnit>,
        compromise: bool,
    ) -> Result<Self, ModelError> {
        if ac.is_none() && ewh.is_none() {
            return Err(ModelError::NoAppliance(id));
        }
        for unit in ac.iter().chain(ewh.iter()) {
            unit.params.validate()?;
        }
        Ok(Self { id, ac, ewh, compromise })
    }

    pub fn id(&self) -> &ResidentId {
        &self.id
    }

    pub fn ac(&self) -> Option<&ApplianceUnit> {
        self.ac.as_ref()
    }

    pub fn ewh(&self) -> Option<&ApplianceUnit> {
        self.ewh.as_ref()
    }

    /// Willingness to run out of range at the compromised tier.
    pub fn compromise(&self) -> bool {
        self.compromise
    }

    /// Number of controllable appliances (1 or 2).
    pub fn appliance_count(&self) -> usize {
        usize::from(self.ac.is_some()) + usize::from(self.ewh.is_some())
    }

    /// Total rated power of all appliances, kW.
    pub fn curtailable_kw(&self) -> f64 {
        self.ac.iter().chain(self.ewh.iter()).map(|u| u.params.power_kw).sum()
    }

    /// Checks that `state` carries exactly the temperatures this profile needs.
    pub fn check_state(&self, state: &ThermalState) -> Result<(), ModelError> {
        if self.ac.is_some() != state.room_temp.is_some()
            || self.ewh.is_some() != state.tank_temp.is_some()
        {
            return Err(ModelError::StateMismatch(self.id.clone()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SeasonMode {
    Cooling,
    Heating,
}

impl SeasonMode {
    /// Sign of the AC effect term: cooling removes heat, heating adds it.
    pub fn ac_sign(self) -> f64 {
        match self {
            SeasonMode::Cooling => -1.0,
            SeasonMode::Heating => 1.0,
        }
    }
}

impl fmt::Display for SeasonMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SeasonMode::Cooling => "cooling",
            SeasonMode::Heating => "heating",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Appliance {
    Ac,
    Ewh,
}

/// Temperatures observed for one household at the start of a step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub room_temp: Option<f64>,
    pub tank_temp: Option<f64>,
    pub ambient_temp: f64,
}

impl ThermalState {
    pub fn new(room_temp: Option<f64>, tank_temp: Option<f64>, ambient_temp: f64) -> Result<Self, ModelError> {
        let s = Self { room_temp, tank_temp, ambient_temp };
        s.validate()?;
        Ok(s)
    }

    /// Every temperature finite and within [-50, 220] °F.
    pub fn validate(&self) -> Result<(), ModelError> {
        for t in [self.room_temp, self.tank_temp, Some(self.ambient_temp)].into_iter().flatten() {
            check_temperature(t)?;
        }
        Ok(())
    }
}

pub fn check_temperature(t: f64) -> Result<(), ModelError> {
    if t.is_finite() && (MIN_TEMPERATURE_F..=MAX_TEMPERATURE_F).contains(&t) {
        Ok(())
    } else {
        Err(ModelError::TemperatureOutOfRange(t))
    }
}

fn first_order_step(t0: f64, ambient: f64, loss_rate: f64, heat_in: f64) -> f64 {
    t0 - loss_rate * (t0 - ambient) + heat_in
}

/// Room temperature after one step with the AC `on` or off.
pub fn estimate_ac_temp(
    state: &ThermalState,
    params: &AcParams,
    on: bool,
    mode: SeasonMode,
) -> Result<f64, ModelError> {
    let t0 = state.room_temp.ok_or(ModelError::MissingRoomTemp)?;
    let heat = if on { mode.ac_sign() * params.effect * params.power_kw } else { 0.0 };
    Ok(first_order_step(t0, state.ambient_temp, params.loss_rate, heat))
}

/// Tank temperature after one step with the heating element `on` or off.
pub fn estimate_ewh_temp(state: &ThermalState, params: &EwhParams, on: bool) -> Result<f64, ModelError> {
    let t0 = state.tank_temp.ok_or(ModelError::MissingTankTemp)?;
    let heat = if on { params.effect * params.power_kw } else { 0.0 };
    Ok(first_order_step(t0, state.ambient_temp, params.loss_rate, heat))
}

/// Normalised distance from the range midpoint: 0 at the midpoint, 1 on a
/// boundary, above 1 outside.
pub fn comfort_margin_component(temp: f64, range: &ComfortRange) -> f64 {
    ((2.0 * temp - range.low - range.high) / (range.high - range.low)).abs()
}

/// Sum of the per-appliance comfort margins of one household.
pub fn comfort_margin_total(state: &ThermalState, profile: &ResidentProfile) -> f64 {
    let ac = match (profile.ac(), state.room_temp) {
        (Some(unit), Some(t)) => comfort_margin_component(t, &unit.comfort),
        _ => 0.0,
    };
    let ewh = match (profile.ewh(), state.tank_temp) {
        (Some(unit), Some(t)) => comfort_margin_component(t, &unit.comfort),
        _ => 0.0,
    };
    ac + ewh
}
