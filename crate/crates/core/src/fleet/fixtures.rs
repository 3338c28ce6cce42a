use super::FleetFile;

/// Names accepted by [`fixture`].
pub const FIXTURE_NAMES: [&str; 2] = ["table3", "mixed"];

/// Bundled fleets.
///
/// * `table3` — the ten AC-only households of the first case study.
/// * `mixed` — the same households with synthetic water heaters on the even
///   ids, for tests that need both appliance types.
pub fn fixture(name: &str) -> Option<FleetFile> {
    let text = match name {
        "table3" => include_str!("../../fixtures/table3.csv"),
        "mixed" => include_str!("../../fixtures/mixed.csv"),
        _ => return None,
    };
    Some(FleetFile::from_csv_str(text).expect("bundled fixtures parse"))
}
