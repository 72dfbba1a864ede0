/// Per-region compartment state with age-cohort delay lines.
///
/// `exposed_cohorts[0]` is the oldest exposure cohort (graduates to infectious
/// on the next advance) and the last slot is the youngest (this cycle's new
/// exposures). Same layout for `infectious_cohorts`, whose oldest slot
/// graduates to `removed`. The population is closed: susceptible + all cohorts
/// + removed stays at the initial population (travel is contact, not migration).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionState {
    pub susceptible: f64,
    pub exposed_cohorts: Vec<f64>,
    pub infectious_cohorts: Vec<f64>,
    pub removed: f64,
    /// Running total of everyone ever exposed (seeds included); nondecreasing.
    pub cumulative_exposed: f64,
    /// Cycle of the first positive exposure, seed or otherwise.
    pub first_exposure_cycle: Option<u32>,
    /// Canonical index of the dominant source region at first exposure.
    /// `None` with `first_exposure_cycle` set marks a seed root.
    pub first_exposure_source: Option<usize>,
}

impl RegionState {
    pub fn new(population: f64, incubation_period: u32, infectious_period: u32) -> Self {
        RegionState {
            susceptible: population,
            exposed_cohorts: vec![0.0; incubation_period as usize],
            infectious_cohorts: vec![0.0; infectious_period as usize],
            removed: 0.0,
            cumulative_exposed: 0.0,
            first_exposure_cycle: None,
            first_exposure_source: None,
        }
    }

    /// E_i: everyone currently incubating.
    pub fn exposed_total(&self) -> f64 {
        self.exposed_cohorts.iter().sum()
    }

    /// I_i: everyone currently infectious.
    pub fn infectious_total(&self) -> f64 {
        self.infectious_cohorts.iter().sum()
    }

    /// S + E + I + R; equals the initial population up to rounding noise.
    pub fn total(&self) -> f64 {
        self.susceptible + self.exposed_total() + self.infectious_total() + self.removed
    }
}
