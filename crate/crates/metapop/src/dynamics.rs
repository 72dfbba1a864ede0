//! The discrete-time disease dynamics: per-cycle exposure generation from
//! travel imports and within-region contact, cohort aging through the
//! incubation and infectious stages, and the full simulation loop.
//!
//! Each cycle is synchronous: every region's new exposures are computed
//! from the same start-of-cycle snapshot before any state is updated, so
//! results do not depend on region iteration order.

use crate::error::Error;
use crate::network::TravelMatrix;
use crate::params::{EpidemicParams, MixingMode, REFERENCE_POPULATION};
use crate::region::RegionProfile;
use crate::report::{CycleRecord, FirstExposure, TimeSeriesReport};
use crate::scenario::{Scenario, SeedingMode};
use crate::state::RegionState;
use crate::Result;

/// Per-traveler transmission coefficient at `cycle`, linearly dampened
/// from its initial value and floored at zero.
pub fn global_coefficient(params: &EpidemicParams, cycle: u32) -> f64 {
    (params.p_global - params.d_global * cycle as f64).max(0.0)
}

/// Within-region contact coefficient at `cycle` for a region with the
/// given population density, linearly dampened and floored at zero.
pub fn local_coefficient(params: &EpidemicParams, density: f64, cycle: u32) -> f64 {
    (density * params.c1 + params.c2 - params.d_local * cycle as f64).max(0.0)
}

/// Travel-imported exposure pressure on `region` plus the source whose
/// infectious-weighted coupling contributes most, earliest region winning
/// ties. The source is `None` exactly when the pressure is zero.
fn global_exposure_detail(
    infectious: &[f64],
    matrix: &TravelMatrix,
    region: usize,
    coefficient: f64,
) -> (f64, Option<usize>) {
    let mut sum = 0.0;
    let mut best = None;
    let mut best_term = 0.0;
    for (j, &inf) in infectious.iter().enumerate() {
        if j == region {
            continue;
        }
        let term = inf * matrix.value(region, j);
        sum += term;
        if term > best_term {
            best_term = term;
            best = Some(j);
        }
    }
    let total = sum * coefficient;
    if total > 0.0 {
        (total, best)
    } else {
        (0.0, None)
    }
}

/// Travel-imported exposure pressure on every region at `cycle`, from a
/// snapshot of infectious totals. Gating is not applied here.
pub fn global_exposures(
    infectious: &[f64],
    matrix: &TravelMatrix,
    params: &EpidemicParams,
    cycle: u32,
) -> Vec<f64> {
    let coefficient = global_coefficient(params, cycle);
    (0..infectious.len())
        .map(|i| global_exposure_detail(infectious, matrix, i, coefficient).0)
        .collect()
}

/// Within-region exposure pressure at `cycle` from start-of-cycle
/// susceptible and infectious counts. Mass-action mixing multiplies the
/// raw counts; frequency-dependent mixing normalizes susceptibles by the
/// region's population and rescales to a fixed reference population, so
/// regions of different sizes see comparable per-contact rates.
pub fn local_exposures(
    susceptible: f64,
    infectious: f64,
    profile: &RegionProfile,
    params: &EpidemicParams,
    cycle: u32,
) -> f64 {
    let coefficient = local_coefficient(params, profile.density_per_km2, cycle);
    match params.local_mixing_mode {
        MixingMode::MassAction => susceptible * infectious * coefficient,
        MixingMode::FrequencyDependent => {
            susceptible / profile.population * infectious * coefficient * REFERENCE_POPULATION
        }
    }
}

/// Ages both cohort lines by one cycle: the oldest exposed cohort becomes
/// the youngest infectious cohort, the oldest infectious cohort moves to
/// removed, and `new_exposed` enters the youngest exposed slot.
pub fn advance_cohorts(state: &mut RegionState, new_exposed: f64) {
    let graduating = state.exposed_cohorts[0];
    state.exposed_cohorts.rotate_left(1);
    *state.exposed_cohorts.last_mut().unwrap() = new_exposed;
    let recovering = state.infectious_cohorts[0];
    state.infectious_cohorts.rotate_left(1);
    *state.infectious_cohorts.last_mut().unwrap() = graduating;
    state.removed += recovering;
}

/// Controls when a region starts admitting travel-imported exposure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlobalGate {
    Open,
    OpenFrom(u32),
    Closed,
}

impl GlobalGate {
    pub fn admits(self, cycle: u32) -> bool {
        match self {
            GlobalGate::Open => true,
            GlobalGate::OpenFrom(c) => cycle >= c,
            GlobalGate::Closed => false,
        }
    }
}

/// One region's exposure bookkeeping for one cycle: what was booked to
/// each channel (after any capping) and which source dominated the travel
/// imports when there were any.
#[derive(Debug, Clone, PartialEq)]
pub struct ExposureRecord {
    pub cycle: u32,
    pub region: usize,
    pub new_global: f64,
    pub new_local: f64,
    pub dominant_source: Option<usize>,
}

/// A running simulation over a resolved scenario.
#[derive(Debug, Clone)]
pub struct World {
    profiles: Vec<RegionProfile>,
    matrix: TravelMatrix,
    params: EpidemicParams,
    gates: Vec<GlobalGate>,
    /// Seed injections as (cycle, region index, exposed count).
    seeds: Vec<(u32, usize, f64)>,
    states: Vec<RegionState>,
    cycle: u32,
}

impl World {
    pub fn new(scenario: &Scenario) -> Result<World> {
        World::with_params(scenario, scenario.params.clone())
    }

    /// Builds a world running substitute parameters against the scenario's
    /// regions, matrix, and seeds; the calibration search goes through
    /// here.
    pub fn with_params(scenario: &Scenario, params: EpidemicParams) -> Result<World> {
        params.validate()?;
        let profiles = scenario.profiles.clone();
        for profile in &profiles {
            let v = profile.violations();
            if !v.is_empty() {
                return Err(Error::config(v.join("; ")));
            }
        }
        if profiles.len() != scenario.matrix.len()
            || profiles
                .iter()
                .zip(scenario.matrix.regions())
                .any(|(p, id)| &p.id != id)
        {
            return Err(Error::config(
                "travel matrix and region table cover different regions",
            ));
        }
        let mut seeds = Vec::with_capacity(scenario.seeds.len());
        for seed in &scenario.seeds {
            let idx = scenario.region_index(&seed.region).ok_or_else(|| {
                Error::config(format!("seed region {} is not in the region table", seed.region))
            })?;
            seeds.push((seed.cycle, idx, seed.exposed_count));
        }
        let gates = match scenario.seeding_mode {
            SeedingMode::TrafficDriven => vec![GlobalGate::Open; profiles.len()],
            SeedingMode::ObservedOnset => (0..profiles.len())
                .map(|i| {
                    seeds
                        .iter()
                        .filter(|&&(_, r, _)| r == i)
                        .map(|&(c, _, _)| c)
                        .min()
                        .map_or(GlobalGate::Closed, GlobalGate::OpenFrom)
                })
                .collect(),
        };
        let states = profiles
            .iter()
            .map(|p| {
                RegionState::new(p.population, params.incubation_period, params.infectious_period)
            })
            .collect();
        Ok(World {
            profiles,
            matrix: scenario.matrix.clone(),
            params,
            gates,
            seeds,
            states,
            cycle: 0,
        })
    }

    pub fn cycle(&self) -> u32 {
        self.cycle
    }

    pub fn states(&self) -> &[RegionState] {
        &self.states
    }

    pub fn profiles(&self) -> &[RegionProfile] {
        &self.profiles
    }

    /// Advances every region by one cycle and returns the per-region
    /// exposure bookkeeping. New exposure is capped by the available
    /// susceptibles: when the two channels together ask for more, each is
    /// scaled back proportionally so the booked amounts sum to exactly the
    /// susceptible count. Seed injections arrive on top, clipped to
    /// whatever susceptibility remains.
    pub fn step(&mut self) -> Vec<ExposureRecord> {
        let t = self.cycle;
        let n = self.profiles.len();
        let infectious: Vec<f64> = self.states.iter().map(RegionState::infectious_total).collect();
        let coefficient = global_coefficient(&self.params, t);

        let mut records = Vec::with_capacity(n);
        for i in 0..n {
            let (global, dominant) = if self.gates[i].admits(t) {
                global_exposure_detail(&infectious, &self.matrix, i, coefficient)
            } else {
                (0.0, None)
            };
            let susceptible = self.states[i].susceptible;
            let local =
                local_exposures(susceptible, infectious[i], &self.profiles[i], &self.params, t);

            let demanded = global + local;
            let (global_booked, local_booked) = if demanded > susceptible {
                let g = (global * (susceptible / demanded)).min(susceptible);
                (g, susceptible - g)
            } else {
                (global, local)
            };

            let seed: f64 = self
                .seeds
                .iter()
                .filter(|&&(c, r, _)| c == t && r == i)
                .map(|&(_, _, count)| count)
                .sum();
            let credit = (global_booked + local_booked + seed).min(susceptible);

            let state = &mut self.states[i];
            if state.first_exposure_cycle.is_none() {
                if seed > 0.0 {
                    state.first_exposure_cycle = Some(t);
                    state.first_exposure_source = None;
                } else if global_booked > 0.0 {
                    state.first_exposure_cycle = Some(t);
                    state.first_exposure_source = dominant;
                }
            }
            state.susceptible = susceptible - credit;
            state.cumulative_exposed += credit;
            advance_cohorts(state, credit);

            records.push(ExposureRecord {
                cycle: t,
                region: i,
                new_global: global_booked,
                new_local: local_booked,
                dominant_source: if global_booked > 0.0 { dominant } else { None },
            });
        }
        self.cycle = t + 1;
        records
    }
}

/// Runs a scenario to completion and assembles the per-cycle report.
pub fn run(scenario: &Scenario) -> Result<TimeSeriesReport> {
    run_with(scenario, &scenario.params)
}

/// Runs a scenario under substitute parameters without touching the
/// scenario itself.
pub fn run_with(scenario: &Scenario, params: &EpidemicParams) -> Result<TimeSeriesReport> {
    let mut world = World::with_params(scenario, params.clone())?;
    let n = world.profiles.len();
    let mut records = Vec::with_capacity(params.run_cycles as usize * n);
    for _ in 0..params.run_cycles {
        let exposure_records = world.step();
        for (rec, state) in exposure_records.iter().zip(world.states.iter()) {
            records.push(CycleRecord {
                cycle: rec.cycle,
                region_idx: rec.region,
                susceptible: state.susceptible,
                exposed: state.exposed_total(),
                infectious: state.infectious_total(),
                removed: state.removed,
                new_global: rec.new_global,
                new_local: rec.new_local,
                cumulative: state.cumulative_exposed,
            });
        }
    }
    let first_exposures = world
        .states
        .iter()
        .map(|s| match (s.first_exposure_cycle, s.first_exposure_source) {
            (None, _) => FirstExposure::Never,
            (Some(cycle), None) => FirstExposure::Seeded { cycle },
            (Some(cycle), Some(source)) => FirstExposure::FromRegion { cycle, source },
        })
        .collect();
    Ok(TimeSeriesReport {
        label: scenario.label.clone(),
        params: params.clone(),
        seeding_mode: scenario.seeding_mode,
        calendar_origin: scenario.calendar_origin,
        cycle_length_days: scenario.cycle_length_days,
        regions: world.profiles.iter().map(|p| p.id.clone()).collect(),
        records,
        first_exposures,
    })
}
