//! Grid-search calibration: every combination of the supplied parameter
//! axes is simulated and scored against observed totals. Enumeration
//! order is fixed (axes in declaration order, the last axis varying
//! fastest) so the loss surface and the chosen minimum never depend on
//! thread scheduling.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Deserialize;

use crate::analysis::compare;
use crate::dynamics::run_with;
use crate::error::Error;
use crate::params::EpidemicParams;
use crate::report::ObservedSeries;
use crate::scenario::Scenario;
use crate::Result;

/// Highest number of grid points evaluated unless the caller raises it.
pub const DEFAULT_GRID_CAP: u64 = 100_000;

/// Candidate values per parameter. Axes left unset keep the scenario's
/// value; at least one axis must be set and no axis may be empty.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxes {
    pub p_global: Option<Vec<f64>>,
    pub d_global: Option<Vec<f64>>,
    pub d_local: Option<Vec<f64>>,
    pub c1: Option<Vec<f64>>,
    pub c2: Option<Vec<f64>>,
    pub incubation_period: Option<Vec<u32>>,
    pub infectious_period: Option<Vec<u32>>,
    pub run_cycles: Option<Vec<u32>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    grid: GridAxes,
}

/// Reads a `[grid]` TOML section into axes.
pub fn read_grid(path_label: &str, text: &str) -> Result<GridAxes> {
    let file: GridFile =
        toml::from_str(text).map_err(|e| Error::data(path_label, e.to_string()))?;
    Ok(file.grid)
}

enum Axis {
    Real(&'static str, Vec<f64>),
    Integer(&'static str, Vec<u32>),
}

impl Axis {
    fn len(&self) -> usize {
        match self {
            Axis::Real(_, v) => v.len(),
            Axis::Integer(_, v) => v.len(),
        }
    }

    fn apply(&self, params: &mut EpidemicParams, idx: usize) {
        match self {
            Axis::Real(name, v) => match *name {
                "p_global" => params.p_global = v[idx],
                "d_global" => params.d_global = v[idx],
                "d_local" => params.d_local = v[idx],
                "c1" => params.c1 = v[idx],
                "c2" => params.c2 = v[idx],
                _ => unreachable!(),
            },
            Axis::Integer(name, v) => match *name {
                "incubation_period" => params.incubation_period = v[idx],
                "infectious_period" => params.infectious_period = v[idx],
                "run_cycles" => params.run_cycles = v[idx],
                _ => unreachable!(),
            },
        }
    }
}

impl GridAxes {
    fn active(&self) -> Result<Vec<Axis>> {
        let mut axes = Vec::new();
        let reals = [
            ("p_global", &self.p_global),
            ("d_global", &self.d_global),
            ("d_local", &self.d_local),
            ("c1", &self.c1),
            ("c2", &self.c2),
        ];
        for (name, values) in reals {
            if let Some(v) = values {
                if v.is_empty() {
                    return Err(Error::config(format!("grid axis {name} is empty")));
                }
                axes.push(Axis::Real(name, v.clone()));
            }
        }
        let integers = [
            ("incubation_period", &self.incubation_period),
            ("infectious_period", &self.infectious_period),
            ("run_cycles", &self.run_cycles),
        ];
        for (name, values) in integers {
            if let Some(v) = values {
                if v.is_empty() {
                    return Err(Error::config(format!("grid axis {name} is empty")));
                }
                axes.push(Axis::Integer(name, v.clone()));
            }
        }
        if axes.is_empty() {
            return Err(Error::config("grid has no axes; give at least one parameter a value list"));
        }
        Ok(axes)
    }

    /// Number of grid points the axes describe.
    pub fn size(&self) -> Result<u128> {
        Ok(self.active()?.iter().map(|a| a.len() as u128).product())
    }
}

fn params_at(base: &EpidemicParams, axes: &[Axis], index: u128) -> EpidemicParams {
    let mut digits = vec![0usize; axes.len()];
    let mut rest = index;
    for (k, axis) in axes.iter().enumerate().rev() {
        let len = axis.len() as u128;
        digits[k] = (rest % len) as usize;
        rest /= len;
    }
    let mut params = base.clone();
    for (axis, &digit) in axes.iter().zip(&digits) {
        axis.apply(&mut params, digit);
    }
    params
}

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePoint {
    pub params: EpidemicParams,
    pub loss: f64,
}

/// A full loss surface in grid order plus the index of its minimum (the
/// earliest point in grid order on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub best_index: usize,
    pub surface: Vec<SurfacePoint>,
}

impl FitResult {
    pub fn best(&self) -> &SurfacePoint {
        &self.surface[self.best_index]
    }
}

/// Evaluates every grid point: the scenario reruns under each parameter
/// combination and is scored by [`compare`] against `observed` (with
/// `groups` folding simulated regions into observed labels). Points are
/// evaluated in parallel but reported strictly in grid order; `jobs` pins
/// the worker count, which cannot change any result. A grid bigger than
/// `cap` (default [`DEFAULT_GRID_CAP`]) is refused before any work runs.
pub fn calibrate(
    scenario: &Scenario,
    observed: &ObservedSeries,
    groups: &BTreeMap<String, Vec<String>>,
    axes: &GridAxes,
    cap: Option<u64>,
    jobs: Option<usize>,
) -> Result<FitResult> {
    let active = axes.active()?;
    let size: u128 = active.iter().map(|a| a.len() as u128).product();
    let cap = cap.unwrap_or(DEFAULT_GRID_CAP);
    if size > cap as u128 {
        return Err(Error::GridTooLarge { size, cap });
    }
    let size = size as usize;

    let evaluate = |k: usize| -> Result<SurfacePoint> {
        let params = params_at(&scenario.params, &active, k as u128);
        params.validate()?;
        let report = run_with(scenario, &params)?;
        let comparison = compare(&report, observed, groups)?;
        Ok(SurfacePoint { params, loss: comparison.loss })
    };
    let results: Vec<Result<SurfacePoint>> = match jobs {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config(format!("cannot build a {n}-thread pool: {e}")))?;
            pool.install(|| (0..size).into_par_iter().map(evaluate).collect())
        }
        None => (0..size).into_par_iter().map(evaluate).collect(),
    };

    let mut surface = Vec::with_capacity(size);
    for point in results {
        surface.push(point?);
    }
    let mut best_index = 0;
    for (k, point) in surface.iter().enumerate() {
        if point.loss < surface[best_index].loss {
            best_index = k;
        }
    }
    Ok(FitResult { best_index, surface })
}
