//! Post-run analysis: peak timing, import-route extraction, density
//! correlation, comparison against observed case counts, and the run
//! summary written alongside the raw time series.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::Error;
use crate::params::EpidemicParams;
use crate::region::RegionProfile;
use crate::report::{FirstExposure, ObservedSeries, RouteEdge, TimeSeriesReport};
use crate::scenario::SeedingMode;
use crate::Result;

/// Earliest cycle at which the summed infectious count over `group` peaks,
/// or `None` when the group never has anyone infectious. Unknown region
/// ids are an error.
pub fn peak_cycle(report: &TimeSeriesReport, group: &[&str]) -> Result<Option<u32>> {
    let mut members = vec![false; report.regions.len()];
    for id in group {
        let idx = report
            .index_of(id)
            .ok_or_else(|| Error::config(format!("region {id} is not in the report")))?;
        members[idx] = true;
    }
    let cycles = report.params.run_cycles as usize;
    let mut totals = vec![0.0; cycles];
    for rec in &report.records {
        if members[rec.region_idx] {
            totals[rec.cycle as usize] += rec.infectious;
        }
    }
    let mut best = None;
    let mut best_value = 0.0;
    for (cycle, &total) in totals.iter().enumerate() {
        if total > best_value {
            best_value = total;
            best = Some(cycle as u32);
        }
    }
    Ok(best)
}

/// The import tree: one edge per region whose first exposure arrived by
/// travel, pointing from its dominant source, ordered by arrival cycle
/// then target. Seeded and never-exposed regions contribute no edge.
pub fn extract_routes(report: &TimeSeriesReport) -> Vec<RouteEdge> {
    let mut edges: Vec<RouteEdge> = report
        .first_exposures
        .iter()
        .enumerate()
        .filter_map(|(target, fe)| match *fe {
            FirstExposure::FromRegion { cycle, source } => Some(RouteEdge {
                source,
                target,
                first_cycle: cycle,
            }),
            _ => None,
        })
        .collect();
    edges.sort_by_key(|e| (e.first_cycle, e.target));
    edges
}

/// Fraction of each region's population ever exposed, aligned with the
/// report's region order.
pub fn attack_rates(report: &TimeSeriesReport, profiles: &[RegionProfile]) -> Result<Vec<f64>> {
    if profiles.len() != report.regions.len()
        || profiles
            .iter()
            .zip(&report.regions)
            .any(|(p, id)| &p.id != id)
    {
        return Err(Error::config(
            "profiles and report cover different regions",
        ));
    }
    Ok((0..profiles.len())
        .map(|idx| {
            let cumulative = report.final_record(idx).map_or(0.0, |r| r.cumulative);
            cumulative / profiles[idx].population
        })
        .collect())
}

/// Pearson correlation with a two-sided t-test p-value, or `Undefined`
/// when one of the variables does not vary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Correlation {
    Defined { r: f64, p_value: f64 },
    Undefined,
}

/// Correlates population density against per-region outcomes (usually
/// attack rates). Needs at least three regions; the p-value comes from the
/// exact t distribution with n - 2 degrees of freedom.
pub fn density_correlation(profiles: &[RegionProfile], outcomes: &[f64]) -> Result<Correlation> {
    let n = profiles.len();
    if outcomes.len() != n {
        return Err(Error::config(format!(
            "{} outcomes for {} regions",
            outcomes.len(),
            n
        )));
    }
    if n < 3 {
        return Err(Error::config(format!(
            "correlation needs at least 3 regions, got {n}"
        )));
    }
    let xs: Vec<f64> = profiles.iter().map(|p| p.density_per_km2).collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mx = mean(&xs);
    let my = mean(outcomes);
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for k in 0..n {
        let dx = xs[k] - mx;
        let dy = outcomes[k] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(Correlation::Undefined);
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    let df = (n - 2) as f64;
    let p_value = if 1.0 - r * r <= 0.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("df >= 1");
        2.0 * (1.0 - dist.cdf(t.abs()))
    };
    Ok(Correlation::Defined { r, p_value })
}

/// One matched region (or region group) in a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub label: String,
    pub simulated: f64,
    pub observed: f64,
    pub ratio: f64,
    pub log_ratio: f64,
}

/// Result of matching a simulation against observed totals. `loss` is the
/// sum of squared log ratios over the matched rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub loss: f64,
    pub sim_only: Vec<String>,
    pub obs_only: Vec<String>,
}

impl Comparison {
    /// Rows ranked by how far they sit from the observation, farthest
    /// first; ties keep label order.
    pub fn outliers(&self) -> Vec<&ComparisonRow> {
        let mut ranked: Vec<&ComparisonRow> = self.rows.iter().collect();
        ranked.sort_by(|a, b| {
            b.log_ratio
                .abs()
                .partial_cmp(&a.log_ratio.abs())
                .unwrap()
                .then(a.label.cmp(&b.label))
        });
        ranked
    }
}

/// Matches final cumulative exposures against observed totals by label.
/// `groups` folds several simulated regions into one observed label (the
/// members disappear as individual rows). Each matched row contributes the
/// square of `ln(sim/obs)` to the loss; a zero on exactly one side is
/// smoothed to `ln((sim+1)/(obs+1))`, and two zeros contribute nothing.
pub fn compare(
    report: &TimeSeriesReport,
    observed: &ObservedSeries,
    groups: &BTreeMap<String, Vec<String>>,
) -> Result<Comparison> {
    let mut simulated: BTreeMap<String, f64> = report
        .regions
        .iter()
        .enumerate()
        .map(|(idx, id)| {
            (
                id.clone(),
                report.final_record(idx).map_or(0.0, |r| r.cumulative),
            )
        })
        .collect();
    for (label, members) in groups {
        let mut total = 0.0;
        for member in members {
            total += simulated.remove(member).ok_or_else(|| {
                Error::config(format!(
                    "group {label}: {member} is not an ungrouped simulated region"
                ))
            })?;
        }
        if simulated.insert(label.clone(), total).is_some() {
            return Err(Error::config(format!(
                "group {label} collides with an existing region"
            )));
        }
    }

    let mut rows = Vec::new();
    let mut obs_only = Vec::new();
    for (label, &obs) in &observed.finals {
        match simulated.remove(label) {
            Some(sim) => {
                let (ratio, log_ratio) = if sim > 0.0 && obs > 0.0 {
                    let ratio = sim / obs;
                    (ratio, ratio.ln())
                } else if sim == 0.0 && obs == 0.0 {
                    (1.0, 0.0)
                } else {
                    let ratio = (sim + 1.0) / (obs + 1.0);
                    (ratio, ratio.ln())
                };
                rows.push(ComparisonRow {
                    label: label.clone(),
                    simulated: sim,
                    observed: obs,
                    ratio,
                    log_ratio,
                });
            }
            None => obs_only.push(label.clone()),
        }
    }
    if rows.is_empty() {
        return Err(Error::config(
            "no simulated region matches any observed label",
        ));
    }
    let loss = rows.iter().map(|r| r.log_ratio * r.log_ratio).sum();
    Ok(Comparison {
        rows,
        loss,
        sim_only: simulated.into_keys().collect(),
        obs_only,
    })
}

/// One region's bottom line in a [`RunSummary`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionSummary {
    pub seeded: bool,
    pub first_exposure_cycle: Option<u32>,
    pub first_exposure_source: Option<String>,
    pub final_susceptible: f64,
    pub final_removed: f64,
    pub cumulative_exposed: f64,
    pub total_new_local: f64,
    pub peak_infectious: f64,
    pub peak_infectious_cycle: Option<u32>,
}

/// Whole-run digest, serialized as the run's summary JSON.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub label: String,
    pub seeding_mode: SeedingMode,
    pub params: EpidemicParams,
    pub run_cycles: u32,
    pub cycle_length_days: f64,
    pub calendar_origin: Option<String>,
    pub calendar_note: Option<String>,
    pub total_cumulative_exposed: f64,
    /// Regions whose within-region transmission ever reached one person.
    pub regions_with_local_spread: usize,
    /// Same threshold at half a person, catching barely-touched regions.
    pub regions_with_trace_local_spread: usize,
    pub regions: BTreeMap<String, RegionSummary>,
}

/// Digests a report into the summary written next to the time series.
pub fn summarize(report: &TimeSeriesReport) -> RunSummary {
    let n = report.regions.len();
    let mut total_new_local = vec![0.0; n];
    let mut peak_infectious = vec![0.0; n];
    let mut peak_cycle: Vec<Option<u32>> = vec![None; n];
    for rec in &report.records {
        total_new_local[rec.region_idx] += rec.new_local;
        if rec.infectious > peak_infectious[rec.region_idx] {
            peak_infectious[rec.region_idx] = rec.infectious;
            peak_cycle[rec.region_idx] = Some(rec.cycle);
        }
    }
    let mut regions = BTreeMap::new();
    let mut total_cumulative = 0.0;
    for (idx, id) in report.regions.iter().enumerate() {
        let last = report.final_record(idx);
        let cumulative = last.map_or(0.0, |r| r.cumulative);
        total_cumulative += cumulative;
        let fe = report.first_exposures[idx];
        regions.insert(
            id.clone(),
            RegionSummary {
                seeded: matches!(fe, FirstExposure::Seeded { .. }),
                first_exposure_cycle: match fe {
                    FirstExposure::Never => None,
                    FirstExposure::Seeded { cycle } | FirstExposure::FromRegion { cycle, .. } => {
                        Some(cycle)
                    }
                },
                first_exposure_source: match fe {
                    FirstExposure::FromRegion { source, .. } => {
                        Some(report.regions[source].clone())
                    }
                    _ => None,
                },
                final_susceptible: last.map_or(0.0, |r| r.susceptible),
                final_removed: last.map_or(0.0, |r| r.removed),
                cumulative_exposed: cumulative,
                total_new_local: total_new_local[idx],
                peak_infectious: peak_infectious[idx],
                peak_infectious_cycle: peak_cycle[idx],
            },
        );
    }
    RunSummary {
        label: report.label.clone(),
        seeding_mode: report.seeding_mode,
        params: report.params.clone(),
        run_cycles: report.params.run_cycles,
        cycle_length_days: report.cycle_length_days,
        calendar_origin: report.calendar_origin.map(|d| d.to_string()),
        calendar_note: report.calendar_origin.map(|d| {
            format!(
                "cycle 0 starts {d}; one cycle = {} days",
                report.cycle_length_days
            )
        }),
        total_cumulative_exposed: total_cumulative,
        regions_with_local_spread: total_new_local.iter().filter(|&&v| v >= 1.0).count(),
        regions_with_trace_local_spread: total_new_local.iter().filter(|&&v| v >= 0.5).count(),
        regions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::MixingMode;
    use crate::report::CycleRecord;
    use approx::assert_relative_eq;

    fn report(regions: &[&str], infectious: &[&[f64]]) -> TimeSeriesReport {
        let cycles = infectious[0].len();
        let mut records = Vec::new();
        for cycle in 0..cycles {
            for (idx, series) in infectious.iter().enumerate() {
                records.push(CycleRecord {
                    cycle: cycle as u32,
                    region_idx: idx,
                    susceptible: 0.0,
                    exposed: 0.0,
                    infectious: series[cycle],
                    removed: 0.0,
                    new_global: 0.0,
                    new_local: 0.0,
                    cumulative: 0.0,
                });
            }
        }
        TimeSeriesReport {
            label: "test".into(),
            params: EpidemicParams {
                p_global: 0.0,
                d_global: 0.0,
                d_local: 0.0,
                c1: 0.0,
                c2: 0.0,
                incubation_period: 1,
                infectious_period: 1,
                run_cycles: cycles as u32,
                local_mixing_mode: MixingMode::MassAction,
            },
            seeding_mode: SeedingMode::TrafficDriven,
            calendar_origin: None,
            cycle_length_days: 2.0,
            regions: regions.iter().map(|s| s.to_string()).collect(),
            records,
            first_exposures: vec![FirstExposure::Never; regions.len()],
        }
    }

    #[test]
    fn peak_is_earliest_maximum() {
        let r = report(&["only"], &[&[0.0, 3.0, 7.0, 7.0, 2.0]]);
        assert_eq!(peak_cycle(&r, &["only"]).unwrap(), Some(2));
    }

    #[test]
    fn no_infections_means_no_peak() {
        let r = report(&["only"], &[&[0.0, 0.0, 0.0]]);
        assert_eq!(peak_cycle(&r, &["only"]).unwrap(), None);
        assert!(peak_cycle(&r, &["missing"]).is_err());
    }

    #[test]
    fn group_peak_sums_members() {
        let r = report(
            &["a", "b"],
            &[&[5.0, 1.0, 0.0], &[0.0, 3.0, 4.0]],
        );
        assert_eq!(peak_cycle(&r, &["a"]).unwrap(), Some(0));
        assert_eq!(peak_cycle(&r, &["b"]).unwrap(), Some(2));
        // sums: 5, 4, 4 -> earliest max at 0
        assert_eq!(peak_cycle(&r, &["a", "b"]).unwrap(), Some(0));
    }

    #[test]
    fn routes_come_from_travel_exposures_only() {
        let mut r = report(
            &["a", "b", "c", "d"],
            &[&[0.0], &[0.0], &[0.0], &[0.0]],
        );
        r.first_exposures = vec![
            FirstExposure::Seeded { cycle: 0 },
            FirstExposure::FromRegion { cycle: 9, source: 0 },
            FirstExposure::FromRegion { cycle: 4, source: 0 },
            FirstExposure::Never,
        ];
        let routes = extract_routes(&r);
        assert_eq!(routes.len(), 2);
        assert_eq!((routes[0].source, routes[0].target, routes[0].first_cycle), (0, 2, 4));
        assert_eq!((routes[1].source, routes[1].target, routes[1].first_cycle), (0, 1, 9));
    }

    fn flat_profile(id: &str, density: f64) -> RegionProfile {
        RegionProfile {
            id: id.into(),
            name: id.into(),
            population: 1000.0 * density,
            area_km2: 1000.0,
            density_per_km2: density,
        }
    }

    #[test]
    fn perfect_correlation_has_zero_p() {
        let profiles: Vec<RegionProfile> =
            [10.0, 20.0, 30.0, 40.0].iter().map(|&d| flat_profile("x", d)).collect();
        let outcomes = vec![1.0, 2.0, 3.0, 4.0];
        match density_correlation(&profiles, &outcomes).unwrap() {
            Correlation::Defined { r, p_value } => {
                assert_relative_eq!(r, 1.0, max_relative = 1e-12);
                assert_eq!(p_value, 0.0);
            }
            Correlation::Undefined => panic!("defined correlation expected"),
        }
    }

    #[test]
    fn flat_outcomes_are_undefined() {
        let profiles: Vec<RegionProfile> =
            [10.0, 20.0, 30.0].iter().map(|&d| flat_profile("x", d)).collect();
        assert_eq!(
            density_correlation(&profiles, &[2.0, 2.0, 2.0]).unwrap(),
            Correlation::Undefined
        );
        assert!(density_correlation(&profiles, &[1.0, 2.0]).is_err());
        assert!(density_correlation(&profiles[..2], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn known_correlation_p_value() {
        // r = 0.8, n = 5: t = 0.8 * sqrt(3 / 0.36) = 2.3094, two-sided
        // p = 0.10409 with 3 degrees of freedom.
        let profiles: Vec<RegionProfile> =
            [1.0, 2.0, 3.0, 4.0, 5.0].iter().map(|&d| flat_profile("x", d)).collect();
        let outcomes = vec![2.0, 1.0, 3.0, 5.0, 4.0];
        match density_correlation(&profiles, &outcomes).unwrap() {
            Correlation::Defined { r, p_value } => {
                assert_relative_eq!(r, 0.8, max_relative = 1e-12);
                assert_relative_eq!(p_value, 0.104088, max_relative = 1e-4);
            }
            Correlation::Undefined => panic!("defined correlation expected"),
        }
    }

    fn cumulative_report(pairs: &[(&str, f64)]) -> TimeSeriesReport {
        let mut r = report(
            &pairs.iter().map(|(id, _)| *id).collect::<Vec<_>>(),
            &vec![&[0.0][..]; pairs.len()],
        );
        for (idx, &(_, c)) in pairs.iter().enumerate() {
            r.records[idx].cumulative = c;
        }
        r
    }

    fn observed(pairs: &[(&str, f64)]) -> ObservedSeries {
        ObservedSeries {
            finals: pairs.iter().map(|&(id, v)| (id.to_string(), v)).collect(),
            dated: BTreeMap::new(),
            provenance: Vec::new(),
        }
    }

    #[test]
    fn matching_series_has_zero_loss() {
        let r = cumulative_report(&[("a", 120.0), ("b", 7.0)]);
        let cmp = compare(&r, &observed(&[("a", 120.0), ("b", 7.0)]), &BTreeMap::new()).unwrap();
        assert_eq!(cmp.loss, 0.0);
        assert!(cmp.sim_only.is_empty() && cmp.obs_only.is_empty());
    }

    #[test]
    fn hundredfold_error_costs_log_squared() {
        let r = cumulative_report(&[("a", 100.0)]);
        let cmp = compare(&r, &observed(&[("a", 1.0)]), &BTreeMap::new()).unwrap();
        assert_relative_eq!(cmp.loss, 100.0f64.ln().powi(2), max_relative = 1e-12);
        assert_relative_eq!(cmp.rows[0].ratio, 100.0, max_relative = 1e-12);
    }

    #[test]
    fn zeros_are_smoothed_or_free() {
        let r = cumulative_report(&[("a", 0.0), ("b", 0.0)]);
        let cmp = compare(&r, &observed(&[("a", 0.0), ("b", 99.0)]), &BTreeMap::new()).unwrap();
        let a = cmp.rows.iter().find(|row| row.label == "a").unwrap();
        assert_eq!((a.ratio, a.log_ratio), (1.0, 0.0));
        let b = cmp.rows.iter().find(|row| row.label == "b").unwrap();
        assert_relative_eq!(b.ratio, 1.0 / 100.0, max_relative = 1e-12);
        assert_relative_eq!(cmp.loss, 100.0f64.ln().powi(2), max_relative = 1e-12);
    }

    #[test]
    fn groups_fold_members_into_one_label() {
        let r = cumulative_report(&[("east", 30.0), ("west", 70.0), ("island", 5.0)]);
        let mut groups = BTreeMap::new();
        groups.insert(
            "mainland".to_string(),
            vec!["east".to_string(), "west".to_string()],
        );
        let cmp = compare(
            &r,
            &observed(&[("mainland", 100.0), ("atlantis", 3.0)]),
            &groups,
        )
        .unwrap();
        let row = cmp.rows.iter().find(|row| row.label == "mainland").unwrap();
        assert_eq!(row.simulated, 100.0);
        assert_eq!(cmp.sim_only, vec!["island".to_string()]);
        assert_eq!(cmp.obs_only, vec!["atlantis".to_string()]);

        let bad = compare(&r, &observed(&[("x", 1.0)]), &groups);
        assert!(bad.is_err(), "nothing matches once members are folded");
    }

    #[test]
    fn unknown_group_member_is_an_error() {
        let r = cumulative_report(&[("east", 30.0)]);
        let mut groups = BTreeMap::new();
        groups.insert("g".to_string(), vec!["nowhere".to_string()]);
        let err = compare(&r, &observed(&[("east", 30.0)]), &groups).unwrap_err();
        assert!(err.to_string().contains("nowhere"));
    }

    #[test]
    fn summary_counts_local_spread_regions() {
        let mut r = cumulative_report(&[("a", 50.0), ("b", 0.7), ("c", 0.0)]);
        for rec in r.records.iter_mut() {
            rec.new_local = match rec.region_idx {
                0 => 50.0,
                1 => 0.7,
                _ => 0.0,
            };
        }
        r.first_exposures = vec![
            FirstExposure::Seeded { cycle: 0 },
            FirstExposure::FromRegion { cycle: 3, source: 0 },
            FirstExposure::Never,
        ];
        let summary = summarize(&r);
        assert_eq!(summary.regions_with_local_spread, 1);
        assert_eq!(summary.regions_with_trace_local_spread, 2);
        assert_eq!(summary.total_cumulative_exposed, 50.7);
        assert_eq!(summary.regions["b"].first_exposure_source.as_deref(), Some("a"));
        assert!(summary.regions["a"].seeded);
        let json = serde_json::to_string_pretty(&summary).unwrap();
        assert!(json.contains("total_cumulative_exposed"));
    }
}
