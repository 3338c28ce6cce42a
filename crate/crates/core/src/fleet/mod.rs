//! Fleet files, bundled fixtures and the synthetic fleet generator.
//!
//! # CSV format
//!
//! The first line is the version marker `# rla-fleet v1`. Further lines
//! starting with `#` are comments. The header row is
//!
//! ```text
//! id,cop,ac_t_high,ac_t_low,ac_power_kw,ac_t0,ac_effect,ac_loss_rate,ewh_t_high,ewh_t_low,ewh_power_kw,ewh_t0,ewh_effect,ewh_loss_rate
//! ```
//!
//! | column | unit |
//! |---|---|
//! | `id` | free text, unique |
//! | `cop` | `0` or `1`, willingness to compromise |
//! | `*_t_high`, `*_t_low` | °F, comfort range |
//! | `*_power_kw` | kW, on the power grid (default 0.1 kW) |
//! | `*_t0` | °F, initial room / tank temperature |
//! | `*_effect` | °F per kW per step |
//! | `*_loss_rate` | fraction of the ambient gap lost per step |
//!
//! An appliance block is either fully empty (appliance absent) or fully
//! filled. Row numbers in errors are file line numbers.
//!
//! # JSON format
//!
//! `{"format": "rla-fleet", "version": 1, "residents": [...]}` where each
//! resident is `{"id", "compromise", "ac"?, "ewh"?}` and each appliance block
//! is `{"t_high", "t_low", "power_kw", "t0", "effect", "loss_rate"}`.

mod fixtures;
mod generate;
mod io;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    check_temperature, ApplianceParams, ApplianceUnit, ComfortRange, ModelError, PowerGrid, ResidentId,
    ResidentProfile, ThermalState,
};

pub use fixtures::{fixture, FIXTURE_NAMES};
pub use generate::{generate_fleet, ApplianceRanges, GeneratorSpec, Interval};
pub use io::ledger_to_csv;

pub const FORMAT_NAME: &str = "rla-fleet";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FleetError {
    #[error("missing or unsupported version line: expected `# {FORMAT_NAME} v{FORMAT_VERSION}`, found `{0}`")]
    Version(String),
    #[error("unexpected header: {0}")]
    Header(String),
    #[error("row {row}: {kind}")]
    Row { row: usize, kind: RowError },
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("fleet has no residents")]
    Empty,
    #[error("invalid generator spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RowError {
    #[error("empty id")]
    EmptyId,
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("missing field `{0}`")]
    MissingField(String),
    #[error("field `{field}`: cannot parse `{value}`")]
    Parse { field: String, value: String },
    #[error("field `{0}` is not finite")]
    NonFinite(String),
    #[error("{appliance} range inverted: low {low} >= high {high}")]
    InvertedRange { appliance: String, low: f64, high: f64 },
    #[error("{appliance} power {kw} kW is not a multiple of 1/{units_per_kw} kW")]
    OffGrid { appliance: String, kw: f64, units_per_kw: u32 },
    #[error("resident has neither an AC nor a water heater")]
    NoAppliance,
    #[error("{appliance}: {source}")]
    Invalid { appliance: String, source: ModelError },
}

/// One appliance block of a fleet file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplianceRecord {
    pub t_high: f64,
    pub t_low: f64,
    pub power_kw: f64,
    pub t0: f64,
    pub effect: f64,
    pub loss_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidentRecord {
    pub id: String,
    pub compromise: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ac: Option<ApplianceRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ewh: Option<ApplianceRecord>,
}

/// Serialisable fleet description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FleetFile {
    pub format: String,
    pub version: u32,
    pub residents: Vec<ResidentRecord>,
    /// Source line of each resident, when parsed from CSV.
    #[serde(skip)]
    pub rows: Vec<usize>,
}

impl FleetFile {
    pub fn new(residents: Vec<ResidentRecord>) -> Self {
        Self { format: FORMAT_NAME.into(), version: FORMAT_VERSION, residents, rows: Vec::new() }
    }

    fn row_of(&self, index: usize) -> usize {
        self.rows.get(index).copied().unwrap_or(index + 1)
    }
}

/// Initial temperatures of one household.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialTemps {
    pub room_temp: Option<f64>,
    pub tank_temp: Option<f64>,
}

impl InitialTemps {
    pub fn with_ambient(&self, ambient_temp: f64) -> ThermalState {
        ThermalState { room_temp: self.room_temp, tank_temp: self.tank_temp, ambient_temp }
    }
}

/// Validated fleet: profiles and their initial temperatures, in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fleet {
    pub profiles: Vec<ResidentProfile>,
    pub initial: Vec<InitialTemps>,
}

impl Fleet {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn states(&self, ambient_temp: f64) -> Vec<ThermalState> {
        self.initial.iter().map(|t| t.with_ambient(ambient_temp)).collect()
    }

    pub fn total_power_kw(&self) -> f64 {
        self.profiles.iter().map(ResidentProfile::curtailable_kw).sum()
    }

    /// Inverse of [`load_fleet`].
    pub fn to_file(&self) -> FleetFile {
        let record = |unit: Option<&ApplianceUnit>, t0: Option<f64>| {
            unit.zip(t0).map(|(u, t0)| ApplianceRecord {
                t_high: u.comfort.high(),
                t_low: u.comfort.low(),
                power_kw: u.params.power_kw,
                t0,
                effect: u.params.effect,
                loss_rate: u.params.loss_rate,
            })
        };
        FleetFile::new(
            self.profiles
                .iter()
                .zip(&self.initial)
                .map(|(p, t)| ResidentRecord {
                    id: p.id().to_string(),
                    compromise: p.compromise(),
                    ac: record(p.ac(), t.room_temp),
                    ewh: record(p.ewh(), t.tank_temp),
                })
                .collect(),
        )
    }
}

/// Validates a fleet file and builds profiles and initial states.
pub fn load_fleet(file: &FleetFile, grid: &PowerGrid) -> Result<Fleet, FleetError> {
    if file.format != FORMAT_NAME || file.version != FORMAT_VERSION {
        return Err(FleetError::Version(format!("{} v{}", file.format, file.version)));
    }
    if file.residents.is_empty() {
        return Err(FleetError::Empty);
    }
    let mut seen = BTreeSet::new();
    let mut fleet = Fleet { profiles: Vec::new(), initial: Vec::new() };
    for (i, record) in file.residents.iter().enumerate() {
        let row = file.row_of(i);
        let fail = |kind| FleetError::Row { row, kind };
        if record.id.trim().is_empty() {
            return Err(fail(RowError::EmptyId));
        }
        if !seen.insert(record.id.as_str()) {
            return Err(fail(RowError::DuplicateId(record.id.clone())));
        }
        let ac = record.ac.as_ref().map(|r| unit(r, "ac", grid)).transpose().map_err(fail)?;
        let ewh = record.ewh.as_ref().map(|r| unit(r, "ewh", grid)).transpose().map_err(fail)?;
        let profile = ResidentProfile::new(ResidentId::new(record.id.clone()), ac, ewh, record.compromise)
            .map_err(|e| match e {
                ModelError::NoAppliance(_) => fail(RowError::NoAppliance),
                other => fail(RowError::Invalid { appliance: "resident".into(), source: other }),
            })?;
        fleet.profiles.push(profile);
        fleet.initial.push(InitialTemps {
            room_temp: record.ac.map(|r| r.t0),
            tank_temp: record.ewh.map(|r| r.t0),
        });
    }
    Ok(fleet)
}

fn unit(record: &ApplianceRecord, appliance: &str, grid: &PowerGrid) -> Result<ApplianceUnit, RowError> {
    let fields = [
        ("t_high", record.t_high),
        ("t_low", record.t_low),
        ("power_kw", record.power_kw),
        ("t0", record.t0),
        ("effect", record.effect),
        ("loss_rate", record.loss_rate),
    ];
    if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
        return Err(RowError::NonFinite(format!("{appliance}_{name}")));
    }
    if record.t_low >= record.t_high {
        return Err(RowError::InvertedRange { appliance: appliance.into(), low: record.t_low, high: record.t_high });
    }
    let invalid = |source| RowError::Invalid { appliance: appliance.into(), source };
    let comfort = ComfortRange::new(record.t_low, record.t_high).map_err(invalid)?;
    let params = ApplianceParams::new(record.power_kw, record.effect, record.loss_rate).map_err(invalid)?;
    match grid.to_units(record.power_kw) {
        Ok(0) | Err(ModelError::OffGrid { .. }) => {
            return Err(RowError::OffGrid {
                appliance: appliance.into(),
                kw: record.power_kw,
                units_per_kw: grid.units_per_kw(),
            })
        }
        Err(other) => return Err(invalid(other)),
        Ok(_) => {}
    }
    check_temperature(record.t0).map_err(invalid)?;
    Ok(ApplianceUnit { params, comfort })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table3() -> Fleet {
        load_fleet(&fixture("table3").unwrap(), &PowerGrid::default()).unwrap()
    }

    #[test]
    fn table3_fixture_loads() {
        let fleet = table3();
        assert_eq!(fleet.len(), 10);
        assert!((fleet.total_power_kw() - 13.6).abs() < 1e-9);
        assert!(fleet.profiles.iter().all(|p| p.ewh().is_none()));
        assert_eq!(fleet.initial[3].room_temp, Some(75.0));
        let cop: Vec<bool> = fleet.profiles.iter().map(|p| p.compromise()).collect();
        assert_eq!(cop, [false, true, false, false, true, true, false, true, false, true]);
    }

    #[test]
    fn mixed_fixture_has_water_heaters() {
        let fleet = load_fleet(&fixture("mixed").unwrap(), &PowerGrid::default()).unwrap();
        assert_eq!(fleet.profiles.iter().filter(|p| p.ewh().is_some()).count(), 5);
        assert!(fleet.profiles.iter().all(|p| p.ac().is_some()));
    }

    #[test]
    fn table3_round_trips() {
        let fleet = table3();
        let csv = fleet.to_file().to_csv_string();
        let again = load_fleet(&FleetFile::from_csv_str(&csv).unwrap(), &PowerGrid::default()).unwrap();
        assert_eq!(fleet, again);
        let json = fleet.to_file().to_json_string();
        let again = load_fleet(&FleetFile::from_json_str(&json).unwrap(), &PowerGrid::default()).unwrap();
        assert_eq!(fleet, again);
    }

    fn with_row(row: &str) -> String {
        let base = fixture("table3").unwrap().to_csv_string();
        format!("{base}{row}\n")
    }

    fn row_error(text: &str) -> (usize, RowError) {
        let file = FleetFile::from_csv_str(text);
        match file.and_then(|f| load_fleet(&f, &PowerGrid::default())) {
            Err(FleetError::Row { row, kind }) => (row, kind),
            other => panic!("expected row error, got {other:?}"),
        }
    }

    #[test]
    fn inverted_range_is_rejected() {
        let (row, kind) = row_error(&with_row("11,0,70,75,1.3,72.5,5,0.1,,,,,,"));
        assert_eq!(row, 13);
        assert!(matches!(kind, RowError::InvertedRange { .. }));
        let (_, kind) = row_error(&with_row("11,0,70,70,1.3,72.5,5,0.1,,,,,,"));
        assert!(matches!(kind, RowError::InvertedRange { .. }));
    }

    #[test]
    fn off_grid_power_is_rejected() {
        let (_, kind) = row_error(&with_row("11,0,75,70,1.25,72.5,5,0.1,,,,,,"));
        assert!(matches!(kind, RowError::OffGrid { kw, .. } if kw == 1.25));
    }

    #[test]
    fn duplicate_and_missing_fields() {
        let (row, kind) = row_error(&with_row("3,0,75,70,1.3,72.5,5,0.1,,,,,,"));
        assert_eq!((row, kind), (13, RowError::DuplicateId("3".into())));
        let (_, kind) = row_error(&with_row("11,0,75,70,,72.5,5,0.1,,,,,,"));
        assert_eq!(kind, RowError::MissingField("ac_power_kw".into()));
        let (_, kind) = row_error(&with_row("11,0,,,,,,,,,,,,"));
        assert_eq!(kind, RowError::NoAppliance);
        let (_, kind) = row_error(&with_row("11,0,75,70,1.3,NaN,5,0.1,,,,,,"));
        assert_eq!(kind, RowError::NonFinite("ac_t0".into()));
        let (_, kind) = row_error(&with_row("11,2,75,70,1.3,72.5,5,0.1,,,,,,"));
        assert!(matches!(kind, RowError::Parse { .. }));
    }

    #[test]
    fn version_line_is_required() {
        let text = fixture("table3").unwrap().to_csv_string().replacen("v1", "v9", 1);
        assert!(matches!(FleetFile::from_csv_str(&text), Err(FleetError::Version(_))));
    }
}
