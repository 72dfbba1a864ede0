use serde::{Deserialize, Serialize};

use crate::error::Error;

/// How local (within-region) exposure scales with the susceptible pool.
///
/// `MassAction` is the literal S·I·coefficient product. With region populations
/// in the millions that product makes the absolute exposure rate grow with
/// region size, so large low-density regions can outpace small dense ones.
/// `FrequencyDependent` replaces S with the susceptible *fraction* S/N scaled
/// back to a fixed reference population of 10^6, which keeps the per-infectious
/// exposure rate proportional to the density-driven coefficient alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingMode {
    #[default]
    MassAction,
    FrequencyDependent,
}

/// Population scale that `FrequencyDependent` mixing normalizes to.
pub const REFERENCE_POPULATION: f64 = 1.0e6;

/// The full coefficient set steering one simulation.
///
/// Coefficient schedules dampen linearly over the run:
/// global `max(0, p_global - d_global*t)`, local `max(0, density*c1 + c2 - d_local*t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpidemicParams {
    /// Base global infection coefficient (per traveler per infectious person).
    pub p_global: f64,
    /// Per-cycle dampening subtracted from the global coefficient.
    pub d_global: f64,
    /// Per-cycle dampening subtracted from every local coefficient.
    pub d_local: f64,
    /// Density slope of the local coefficient (per person/km²).
    pub c1: f64,
    /// Density-independent intercept of the local coefficient.
    pub c2: f64,
    /// Cycles spent exposed before becoming infectious. At least 1.
    pub incubation_period: u32,
    /// Cycles spent infectious before removal. At least 1.
    pub infectious_period: u32,
    /// Total cycles simulated. At least 1.
    pub run_cycles: u32,
    #[serde(default)]
    pub local_mixing_mode: MixingMode,
}

impl EpidemicParams {
    /// Violations of the type's own invariants, one message per problem.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (name, value) in [
            ("p_global", self.p_global),
            ("d_global", self.d_global),
            ("d_local", self.d_local),
            ("c1", self.c1),
            ("c2", self.c2),
        ] {
            if !value.is_finite() || value < 0.0 {
                v.push(format!("parameter {name} must be finite and >= 0, got {value}"));
            }
        }
        for (name, value) in [
            ("incubation_period", self.incubation_period),
            ("infectious_period", self.infectious_period),
            ("run_cycles", self.run_cycles),
        ] {
            if value < 1 {
                v.push(format!("parameter {name} must be >= 1, got {value}"));
            }
        }
        v
    }

    pub fn validate(&self) -> Result<(), Error> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::config(v.join("; ")))
        }
    }

    /// Applies one `key=value` override. Accepts exactly the scenario-file
    /// parameter keys; anything else is an error naming the key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Error> {
        fn real(key: &str, value: &str) -> Result<f64, Error> {
            value
                .parse::<f64>()
                .map_err(|_| Error::config(format!("override {key}: `{value}` is not a number")))
        }
        fn integer(key: &str, value: &str) -> Result<u32, Error> {
            value.parse::<u32>().map_err(|_| {
                Error::config(format!("override {key}: `{value}` is not a nonnegative integer"))
            })
        }
        match key {
            "p_global" => self.p_global = real(key, value)?,
            "d_global" => self.d_global = real(key, value)?,
            "d_local" => self.d_local = real(key, value)?,
            "c1" => self.c1 = real(key, value)?,
            "c2" => self.c2 = real(key, value)?,
            "incubation_period" => self.incubation_period = integer(key, value)?,
            "infectious_period" => self.infectious_period = integer(key, value)?,
            "run_cycles" => self.run_cycles = integer(key, value)?,
            "local_mixing_mode" => {
                self.local_mixing_mode = match value {
                    "mass_action" => MixingMode::MassAction,
                    "frequency_dependent" => MixingMode::FrequencyDependent,
                    other => {
                        return Err(Error::config(format!(
                            "override local_mixing_mode: unknown mode `{other}` \
                             (expected mass_action or frequency_dependent)"
                        )))
                    }
                }
            }
            other => return Err(Error::config(format!("unknown parameter key `{other}`"))),
        }
        Ok(())
    }
}
