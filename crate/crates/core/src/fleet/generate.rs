//! Seeded synthetic fleets.
//!
//! The random stream is PCG-64 (XSL-RR 128/64, `rand_pcg::Pcg64`) seeded
//! with `seed_from_u64(seed)`. A draw `x: u64` maps to `(x >> 11) · 2⁻⁵³`
//! in `[0, 1)`; an interval draw is `min + (max − min) · u`. Per resident the
//! draws are, in order: AC presence, EWH presence, compromise flag, six AC
//! field draws, six EWH field draws. Field draws happen even when the
//! appliance ends up absent, so presence never shifts the stream.
//!
//! For each appliance the effect coefficient is derived rather than drawn:
//! `effect = balance · loss_rate · |design_ambient − t0| / power_kw`, so a
//! running appliance roughly holds its temperature under the design
//! ambient and a curtailed one drifts toward it.

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};

use super::{ApplianceRecord, FleetError, FleetFile, ResidentRecord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub min: f64,
    pub max: f64,
}

impl Interval {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn check(&self, name: &str, lo: f64, hi: f64) -> Result<(), FleetError> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max && self.min >= lo && self.max <= hi) {
            return Err(FleetError::Spec(format!(
                "{name} interval [{}, {}] must be ordered and inside [{lo}, {hi}]",
                self.min, self.max
            )));
        }
        Ok(())
    }
}

/// Sampling intervals for one appliance class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApplianceRanges {
    /// Lower comfort bound, °F.
    pub t_low: Interval,
    /// Width of the comfort range, °F.
    pub span: Interval,
    /// Initial temperature as a fraction of the way from low to high.
    pub start_fraction: Interval,
    pub power_kw: Interval,
    pub loss_rate: Interval,
    /// Ratio of running effect to ambient loss at the design ambient.
    pub balance: Interval,
}

impl ApplianceRanges {
    pub const DEFAULT_AC: Self = Self {
        t_low: Interval::new(66.0, 72.0),
        span: Interval::new(4.0, 10.0),
        start_fraction: Interval::new(0.3, 0.7),
        power_kw: Interval::new(1.0, 2.5),
        loss_rate: Interval::new(0.05, 0.3),
        balance: Interval::new(0.95, 1.05),
    };

    pub const DEFAULT_EWH: Self = Self {
        t_low: Interval::new(105.0, 120.0),
        span: Interval::new(10.0, 20.0),
        start_fraction: Interval::new(0.3, 0.7),
        power_kw: Interval::new(3.0, 5.5),
        loss_rate: Interval::new(0.005, 0.02),
        balance: Interval::new(0.95, 1.05),
    };

    fn check(&self, name: &str) -> Result<(), FleetError> {
        self.t_low.check(&format!("{name}.t_low"), -50.0, 200.0)?;
        self.span.check(&format!("{name}.span"), 0.5, 50.0)?;
        self.start_fraction.check(&format!("{name}.start_fraction"), 0.0, 1.0)?;
        self.power_kw.check(&format!("{name}.power_kw"), 0.1, 50.0)?;
        self.loss_rate.check(&format!("{name}.loss_rate"), 0.001, 1.0)?;
        self.balance.check(&format!("{name}.balance"), 0.1, 10.0)
    }
}

fn default_ac() -> ApplianceRanges {
    ApplianceRanges::DEFAULT_AC
}
fn default_ewh() -> ApplianceRanges {
    ApplianceRanges::DEFAULT_EWH
}
fn default_ac_probability() -> f64 {
    0.9
}
fn default_ewh_probability() -> f64 {
    0.5
}
fn default_compromise_probability() -> f64 {
    0.5
}
fn default_design_ambient() -> f64 {
    94.0
}

/// Generator parameters. `count` and `seed` are required in JSON; every
/// other field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub count: usize,
    pub seed: u64,
    #[serde(default = "default_ac_probability")]
    pub ac_probability: f64,
    #[serde(default = "default_ewh_probability")]
    pub ewh_probability: f64,
    #[serde(default = "default_compromise_probability")]
    pub compromise_probability: f64,
    /// Ambient temperature the effect coefficients are balanced against, °F.
    #[serde(default = "default_design_ambient")]
    pub design_ambient: f64,
    #[serde(default = "default_ac")]
    pub ac: ApplianceRanges,
    #[serde(default = "default_ewh")]
    pub ewh: ApplianceRanges,
}

impl GeneratorSpec {
    pub fn new(count: usize, seed: u64) -> Self {
        Self {
            count,
            seed,
            ac_probability: default_ac_probability(),
            ewh_probability: default_ewh_probability(),
            compromise_probability: default_compromise_probability(),
            design_ambient: default_design_ambient(),
            ac: ApplianceRanges::DEFAULT_AC,
            ewh: ApplianceRanges::DEFAULT_EWH,
        }
    }

    pub fn validate(&self) -> Result<(), FleetError> {
        if self.count == 0 {
            return Err(FleetError::Spec("count must be at least 1".into()));
        }
        for (name, p) in [
            ("ac_probability", self.ac_probability),
            ("ewh_probability", self.ewh_probability),
            ("compromise_probability", self.compromise_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(FleetError::Spec(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if self.ac_probability == 0.0 && self.ewh_probability == 0.0 {
            return Err(FleetError::Spec("at least one appliance probability must be positive".into()));
        }
        if !(-50.0..=200.0).contains(&self.design_ambient) {
            return Err(FleetError::Spec(format!("design ambient {} is implausible", self.design_ambient)));
        }
        self.ac.check("ac")?;
        self.ewh.check("ewh")
    }
}

struct Stream(Pcg64);

impl Stream {
    fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn draw(&mut self, i: Interval) -> f64 {
        i.min + (i.max - i.min) * self.unit()
    }

    fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

fn round_to(x: f64, decimals: i32) -> f64 {
    let f = 10f64.powi(decimals);
    (x * f).round() / f
}

fn appliance(stream: &mut Stream, ranges: &ApplianceRanges, design_ambient: f64) -> ApplianceRecord {
    let t_low = round_to(stream.draw(ranges.t_low), 1);
    let span = round_to(stream.draw(ranges.span), 1).max(0.5);
    let t_high = round_to(t_low + span, 1);
    let t0 = round_to(t_low + stream.draw(ranges.start_fraction) * (t_high - t_low), 1);
    let power_kw = round_to(stream.draw(ranges.power_kw), 1).max(0.1);
    let loss_rate = round_to(stream.draw(ranges.loss_rate), 3).max(0.001);
    let balance = stream.draw(ranges.balance);
    let effect = round_to(balance * loss_rate * (design_ambient - t0).abs() / power_kw, 4).max(0.01);
    ApplianceRecord { t_high, t_low, power_kw, t0, effect, loss_rate }
}

/// Deterministic synthetic fleet with ids `1..=count`.
pub fn generate_fleet(spec: &GeneratorSpec) -> Result<FleetFile, FleetError> {
    spec.validate()?;
    let mut stream = Stream(Pcg64::seed_from_u64(spec.seed));
    let residents = (1..=spec.count)
        .map(|i| {
            let mut has_ac = stream.chance(spec.ac_probability);
            let has_ewh = stream.chance(spec.ewh_probability);
            let compromise = stream.chance(spec.compromise_probability);
            let ac = appliance(&mut stream, &spec.ac, spec.design_ambient);
            let ewh = appliance(&mut stream, &spec.ewh, spec.design_ambient);
            if !has_ac && !has_ewh {
                has_ac = spec.ac_probability > 0.0;
            }
            ResidentRecord {
                id: i.to_string(),
                compromise,
                ac: has_ac.then_some(ac),
                ewh: (has_ewh || !has_ac).then_some(ewh),
            }
        })
        .collect();
    Ok(FleetFile::new(residents))
}
