#![allow(dead_code)]

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use rla_core::fleet::{fixture, load_fleet, Fleet};
use rla_core::model::{
    ApplianceParams, ApplianceUnit, ComfortRange, PowerGrid, ResidentProfile, RewardSchedule, SeasonMode, ThermalState,
};
use rla_core::solver::{enumerate_options, DrrRequest, ObjectiveConfig, ResidentOption};

pub struct Draw(Pcg64);

impl Draw {
    pub fn new(seed: u64) -> Self {
        Self(Pcg64::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn int(&mut self, lo: u64, hi: u64) -> u64 {
        lo + self.0.next_u64() % (hi - lo + 1)
    }

    pub fn chance(&mut self, p: f64) -> bool {
        self.unit() < p
    }
}

pub struct Instance {
    pub profiles: Vec<ResidentProfile>,
    pub states: Vec<ThermalState>,
    pub request: DrrRequest,
    pub schedule: RewardSchedule,
    pub config: ObjectiveConfig,
}

impl Instance {
    pub fn options(&self) -> Vec<Vec<ResidentOption>> {
        self.profiles
            .iter()
            .zip(&self.states)
            .map(|(p, s)| enumerate_options(p, s, &self.schedule, &self.config, self.request.mode).unwrap())
            .collect()
    }
}

fn unit(d: &mut Draw, low: (f64, f64), span: (f64, f64), units: (u64, u64), effect: (f64, f64), lr: (f64, f64)) -> (ApplianceUnit, f64) {
    let lo = d.range(low.0, low.1).round();
    let hi = lo + d.range(span.0, span.1).round().max(1.0);
    let t0 = (d.range(lo - 2.0, hi + 2.0) * 10.0).round() / 10.0;
    let params = ApplianceParams::new(d.int(units.0, units.1) as f64 / 10.0, d.range(effect.0, effect.1), d.range(lr.0, lr.1)).unwrap();
    (ApplianceUnit { params, comfort: ComfortRange::new(lo, hi).unwrap() }, t0)
}

/// Small mixed fleet with a random request; the window may be infeasible.
pub fn random_instance(seed: u64, max_residents: u64) -> Instance {
    let mut d = Draw::new(seed);
    let n = d.int(1, max_residents) as usize;
    let ambient = d.range(80.0, 105.0).round();
    let mode = if d.chance(0.8) { SeasonMode::Cooling } else { SeasonMode::Heating };
    let mut profiles = Vec::new();
    let mut states = Vec::new();
    for i in 0..n {
        let mut has_ac = d.chance(0.8);
        let has_ewh = d.chance(0.5);
        if !has_ac && !has_ewh {
            has_ac = true;
        }
        let ac = has_ac.then(|| unit(&mut d, (65.0, 72.0), (3.0, 10.0), (5, 25), (1.0, 6.0), (0.05, 0.3)));
        let ewh = has_ewh.then(|| unit(&mut d, (105.0, 120.0), (10.0, 20.0), (30, 55), (0.01, 0.1), (0.005, 0.02)));
        let compromise = d.chance(0.5);
        states.push(ThermalState { room_temp: ac.map(|a| a.1), tank_temp: ewh.map(|e| e.1), ambient_temp: ambient });
        profiles.push(ResidentProfile::new((i + 1).to_string().as_str().into(), ac.map(|a| a.0), ewh.map(|e| e.0), compromise).unwrap());
    }
    let total: f64 = profiles.iter().map(ResidentProfile::curtailable_kw).sum();
    let amount = (d.range(0.0, total * 1.1) * 10.0).round() / 10.0;
    let delta = [0.0, 0.05, 0.1, 0.2][d.int(0, 3) as usize];
    let request = DrrRequest::new(amount, delta, 5, mode).unwrap();
    let config = ObjectiveConfig { comfort_weight: d.int(0, 20_000), ..ObjectiveConfig::default() };
    Instance { profiles, states, request, schedule: RewardSchedule::default(), config }
}

pub fn table3() -> Fleet {
    load_fleet(&fixture("table3").unwrap(), &PowerGrid::default()).unwrap()
}
