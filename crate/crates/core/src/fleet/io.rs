use std::fmt::Write as _;

use super::{ApplianceRecord, FleetError, FleetFile, ResidentRecord, RowError, FORMAT_NAME, FORMAT_VERSION};
use crate::rewards::RewardLedger;

const HEADER: [&str; 14] = [
    "id",
    "cop",
    "ac_t_high",
    "ac_t_low",
    "ac_power_kw",
    "ac_t0",
    "ac_effect",
    "ac_loss_rate",
    "ewh_t_high",
    "ewh_t_low",
    "ewh_power_kw",
    "ewh_t0",
    "ewh_effect",
    "ewh_loss_rate",
];

fn version_line() -> String {
    format!("# {FORMAT_NAME} v{FORMAT_VERSION}")
}

impl FleetFile {
    pub fn from_csv_str(text: &str) -> Result<Self, FleetError> {
        let first = text.lines().next().unwrap_or("").trim_end();
        if first != version_line() {
            return Err(FleetError::Version(first.to_string()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header = reader.headers().map_err(|e| FleetError::Csv(e.to_string()))?.clone();
        if header.iter().ne(HEADER.iter().copied()) {
            return Err(FleetError::Header(format!("expected `{}`, found `{}`", HEADER.join(","), header.iter().collect::<Vec<_>>().join(","))));
        }

        let mut residents = Vec::new();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| FleetError::Csv(e.to_string()))?;
            let row = record.position().map_or(0, |p| p.line() as usize);
            let fail = |kind| FleetError::Row { row, kind };
            let field = |i: usize| record.get(i).unwrap_or("");
            let compromise = match field(1) {
                "0" => false,
                "1" => true,
                other => return Err(fail(RowError::Parse { field: "cop".into(), value: other.into() })),
            };
            residents.push(ResidentRecord {
                id: field(0).to_string(),
                compromise,
                ac: block(&record, 2, "ac").map_err(fail)?,
                ewh: block(&record, 8, "ewh").map_err(fail)?,
            });
            rows.push(row);
        }
        Ok(FleetFile { format: FORMAT_NAME.into(), version: FORMAT_VERSION, residents, rows })
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = format!("{}\n{}\n", version_line(), HEADER.join(","));
        let cells = |r: &Option<ApplianceRecord>| match r {
            Some(r) => [r.t_high, r.t_low, r.power_kw, r.t0, r.effect, r.loss_rate].map(|v| v.to_string()).join(","),
            None => ",,,,,".to_string(),
        };
        for r in &self.residents {
            let _ = writeln!(out, "{},{},{},{}", quote(&r.id), u8::from(r.compromise), cells(&r.ac), cells(&r.ewh));
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<Self, FleetError> {
        let file: FleetFile = serde_json::from_str(text).map_err(|e| FleetError::Json(e.to_string()))?;
        if file.format != FORMAT_NAME || file.version != FORMAT_VERSION {
            return Err(FleetError::Version(format!("{} v{}", file.format, file.version)));
        }
        Ok(file)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fleet files always serialise");
        s.push('\n');
        s
    }

    /// Parses either format, choosing JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, FleetError> {
        if text.trim_start().starts_with('{') {
            Self::from_json_str(text)
        } else {
            Self::from_csv_str(text)
        }
    }
}

fn block(record: &csv::StringRecord, start: usize, prefix: &str) -> Result<Option<ApplianceRecord>, RowError> {
    let raw: Vec<&str> = (start..start + 6).map(|i| record.get(i).unwrap_or("")).collect();
    if raw.iter().all(|s| s.is_empty()) {
        return Ok(None);
    }
    let mut values = [0.0f64; 6];
    for (k, (value, text)) in values.iter_mut().zip(&raw).enumerate() {
        let name = format!("{prefix}_{}", &HEADER[2 + k][3..]);
        if text.is_empty() {
            return Err(RowError::MissingField(name));
        }
        *value = text.parse().map_err(|_| RowError::Parse { field: name.clone(), value: text.to_string() })?;
        if !value.is_finite() {
            return Err(RowError::NonFinite(name));
        }
    }
    let [t_high, t_low, power_kw, t0, effect, loss_rate] = values;
    Ok(Some(ApplianceRecord { t_high, t_low, power_kw, t0, effect, loss_rate }))
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) || field.starts_with('#') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// One row per resident: `id,cumulative_cents,participation_count`.
pub fn ledger_to_csv(ledger: &RewardLedger) -> String {
    let mut out = String::from("id,cumulative_cents,participation_count\n");
    for (id, account) in ledger.accounts() {
        let _ = writeln!(out, "{},{},{}", quote(id.as_str()), account.cumulative_reward.cents(), account.participation_count);
    }
    out
}
