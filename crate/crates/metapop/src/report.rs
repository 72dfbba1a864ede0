//! Simulation output containers and their CSV forms, plus the observed
//! case series they get compared against.

use std::collections::BTreeMap;
use std::io::Write;

use chrono::NaiveDate;

use crate::error::Error;
use crate::params::EpidemicParams;
use crate::scenario::SeedingMode;
use crate::Result;

/// One region's compartments and new exposures at the end of one cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    pub cycle: u32,
    pub region_idx: usize,
    pub susceptible: f64,
    pub exposed: f64,
    pub infectious: f64,
    pub removed: f64,
    /// Exposure booked to travel imports this cycle.
    pub new_global: f64,
    /// Exposure booked to within-region contact this cycle.
    pub new_local: f64,
    /// Running total of everyone ever exposed, seeds included.
    pub cumulative: f64,
}

/// How a region first acquired exposure, if it ever did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FirstExposure {
    Never,
    /// Exposure was injected directly at this cycle.
    Seeded { cycle: u32 },
    /// Travel imports arrived first, dominated by `source`.
    FromRegion { cycle: u32, source: usize },
}

/// One edge of the import tree: `target` first caught exposure from
/// `source` at `first_cycle`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteEdge {
    pub source: usize,
    pub target: usize,
    pub first_cycle: u32,
}

/// Full per-cycle output of one simulation run. Records are cycle-major,
/// region-minor; region indices refer to `regions`, which is in canonical
/// (sorted id) order.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesReport {
    pub label: String,
    pub params: EpidemicParams,
    pub seeding_mode: SeedingMode,
    pub calendar_origin: Option<NaiveDate>,
    pub cycle_length_days: f64,
    pub regions: Vec<String>,
    pub records: Vec<CycleRecord>,
    pub first_exposures: Vec<FirstExposure>,
}

impl TimeSeriesReport {
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r == id)
    }

    /// All records for one region, in cycle order.
    pub fn region_records(&self, region_idx: usize) -> impl Iterator<Item = &CycleRecord> {
        self.records
            .iter()
            .filter(move |r| r.region_idx == region_idx)
    }

    /// The last-cycle record for one region.
    pub fn final_record(&self, region_idx: usize) -> Option<&CycleRecord> {
        self.region_records(region_idx).last()
    }

    /// Writes the per-cycle table as CSV. `window` keeps only cycles in the
    /// given inclusive range.
    pub fn write_timeseries_csv<W: Write>(
        &self,
        mut out: W,
        window: Option<(u32, u32)>,
    ) -> std::io::Result<()> {
        writeln!(
            out,
            "cycle,region,susceptible,exposed,infectious,removed,new_global,new_local,cumulative"
        )?;
        for r in &self.records {
            if let Some((from, to)) = window {
                if r.cycle < from || r.cycle > to {
                    continue;
                }
            }
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.cycle,
                self.regions[r.region_idx],
                r.susceptible,
                r.exposed,
                r.infectious,
                r.removed,
                r.new_global,
                r.new_local,
                r.cumulative
            )?;
        }
        Ok(())
    }

    /// Writes import-tree edges as CSV with region ids.
    pub fn write_routes_csv<W: Write>(&self, edges: &[RouteEdge], mut out: W) -> std::io::Result<()> {
        writeln!(out, "source,target,first_cycle")?;
        for e in edges {
            writeln!(
                out,
                "{},{},{}",
                self.regions[e.source], self.regions[e.target], e.first_cycle
            )?;
        }
        Ok(())
    }
}

/// Reads a report back from the CSV written by
/// [`TimeSeriesReport::write_timeseries_csv`]. Regions appear in their
/// first-occurrence order (which the writer keeps canonical) and the
/// parameter block carries only the cycle count inferred from the data;
/// seeding metadata is not stored in the CSV and comes back as defaults.
pub fn read_timeseries_csv(path_label: &str, text: &str) -> Result<TimeSeriesReport> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path_label, e.to_string()))?
        .clone();
    let want = [
        "cycle",
        "region",
        "susceptible",
        "exposed",
        "infectious",
        "removed",
        "new_global",
        "new_local",
        "cumulative",
    ];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::data(
            path_label,
            format!("time series header must be {}", want.join(",")),
        ));
    }
    let mut regions: Vec<String> = Vec::new();
    let mut records = Vec::new();
    let mut max_cycle = 0;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
        let number = |cell: &str| -> Result<f64> {
            cell.parse().map_err(|_| {
                Error::data(path_label, format!("bad number {} in row {}", cell, k + 1))
            })
        };
        let cycle: u32 = record[0].parse().map_err(|_| {
            Error::data(path_label, format!("bad cycle {} in row {}", &record[0], k + 1))
        })?;
        max_cycle = max_cycle.max(cycle);
        let region = &record[1];
        let region_idx = regions.iter().position(|r| r == region).unwrap_or_else(|| {
            regions.push(region.to_owned());
            regions.len() - 1
        });
        records.push(CycleRecord {
            cycle,
            region_idx,
            susceptible: number(&record[2])?,
            exposed: number(&record[3])?,
            infectious: number(&record[4])?,
            removed: number(&record[5])?,
            new_global: number(&record[6])?,
            new_local: number(&record[7])?,
            cumulative: number(&record[8])?,
        });
    }
    if records.is_empty() {
        return Err(Error::data(path_label, "time series has no rows"));
    }
    let first_exposures = vec![FirstExposure::Never; regions.len()];
    Ok(TimeSeriesReport {
        label: path_label.to_owned(),
        params: EpidemicParams {
            p_global: 0.0,
            d_global: 0.0,
            d_local: 0.0,
            c1: 0.0,
            c2: 0.0,
            incubation_period: 1,
            infectious_period: 1,
            run_cycles: max_cycle + 1,
            local_mixing_mode: Default::default(),
        },
        seeding_mode: SeedingMode::TrafficDriven,
        calendar_origin: None,
        cycle_length_days: 2.0,
        regions,
        records,
        first_exposures,
    })
}

/// Observed cumulative case counts, keyed by region label. `finals` holds
/// the end-of-outbreak totals; `dated` holds any per-date series the file
/// carried; `provenance` holds the file's leading comment lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedSeries {
    pub finals: BTreeMap<String, f64>,
    pub dated: BTreeMap<String, Vec<(NaiveDate, f64)>>,
    pub provenance: Vec<String>,
}

/// Reads an observed case CSV. Two headers are understood:
/// `region,cumulative_cases` for final totals and
/// `region,date,cumulative_cases` for dated series (the final total is
/// then the value at each region's last date). Counts must be
/// nondecreasing over time within each region.
pub fn read_observed(path_label: &str, text: &str) -> Result<ObservedSeries> {
    let provenance: Vec<String> = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .map(|l| l.trim_start_matches('#').trim().to_owned())
        .collect();

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path_label, e.to_string()))?
        .clone();
    let header: Vec<&str> = headers.iter().collect();

    let mut finals = BTreeMap::new();
    let mut dated: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();

    if header == ["region", "cumulative_cases"] {
        for (k, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
            let region = record[0].to_owned();
            let count: f64 = record[1].parse().map_err(|_| {
                Error::data(path_label, format!("bad case count {} in row {}", &record[1], k + 1))
            })?;
            if !count.is_finite() || count < 0.0 {
                return Err(Error::data(
                    path_label,
                    format!("case count for {} is {}", region, count),
                ));
            }
            if finals.insert(region.clone(), count).is_some() {
                return Err(Error::data(path_label, format!("duplicate region {}", region)));
            }
        }
    } else if header == ["region", "date", "cumulative_cases"] {
        for (k, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
            let region = record[0].to_owned();
            let date = NaiveDate::parse_from_str(&record[1], "%Y-%m-%d").map_err(|_| {
                Error::data(path_label, format!("bad date {} in row {}", &record[1], k + 1))
            })?;
            let count: f64 = record[2].parse().map_err(|_| {
                Error::data(path_label, format!("bad case count {} in row {}", &record[2], k + 1))
            })?;
            if !count.is_finite() || count < 0.0 {
                return Err(Error::data(
                    path_label,
                    format!("case count for {} is {}", region, count),
                ));
            }
            dated.entry(region).or_default().push((date, count));
        }
        for (region, series) in &mut dated {
            series.sort_by_key(|&(d, _)| d);
            for pair in series.windows(2) {
                if pair[0].0 == pair[1].0 {
                    return Err(Error::data(
                        path_label,
                        format!("region {} has two rows for {}", region, pair[0].0),
                    ));
                }
                if pair[1].1 < pair[0].1 {
                    return Err(Error::data(
                        path_label,
                        format!(
                            "cumulative cases for {} decrease at {}",
                            region, pair[1].0
                        ),
                    ));
                }
            }
            finals.insert(region.clone(), series.last().unwrap().1);
        }
    } else {
        return Err(Error::data(
            path_label,
            "observed header must be region,cumulative_cases or region,date,cumulative_cases",
        ));
    }
    if finals.is_empty() {
        return Err(Error::data(path_label, "observed series has no rows"));
    }
    Ok(ObservedSeries {
        finals,
        dated,
        provenance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_final_totals_with_provenance() {
        let text = "# source: weekly bulletins\nregion,cumulative_cases\nalpha,120\nbeta,0\n";
        let obs = read_observed("test", text).unwrap();
        assert_eq!(obs.finals["alpha"], 120.0);
        assert_eq!(obs.finals["beta"], 0.0);
        assert_eq!(obs.provenance, ["source: weekly bulletins"]);
        assert!(obs.dated.is_empty());
    }

    #[test]
    fn reads_dated_series_and_takes_last_value() {
        let text = "region,date,cumulative_cases\n\
                    alpha,2003-03-01,5\nalpha,2003-04-01,40\nbeta,2003-03-15,2\n";
        let obs = read_observed("test", text).unwrap();
        assert_eq!(obs.finals["alpha"], 40.0);
        assert_eq!(obs.dated["alpha"].len(), 2);
    }

    #[test]
    fn rejects_decreasing_series() {
        let text = "region,date,cumulative_cases\nalpha,2003-03-01,5\nalpha,2003-04-01,3\n";
        let err = read_observed("test", text).unwrap_err();
        assert!(err.to_string().contains("decrease"));
    }

    #[test]
    fn rejects_unknown_header() {
        let err = read_observed("test", "place,cases\nx,1\n").unwrap_err();
        assert!(err.to_string().contains("header"));
    }

    #[test]
    fn timeseries_csv_reads_back_what_was_written() {
        use crate::params::{EpidemicParams, MixingMode};
        let report = TimeSeriesReport {
            label: "t".into(),
            params: EpidemicParams {
                p_global: 0.0,
                d_global: 0.0,
                d_local: 0.0,
                c1: 0.0,
                c2: 0.0,
                incubation_period: 1,
                infectious_period: 1,
                run_cycles: 2,
                local_mixing_mode: MixingMode::MassAction,
            },
            seeding_mode: SeedingMode::TrafficDriven,
            calendar_origin: None,
            cycle_length_days: 2.0,
            regions: vec!["a".into(), "b".into()],
            records: (0..2)
                .flat_map(|cycle| {
                    (0..2).map(move |region_idx| CycleRecord {
                        cycle,
                        region_idx,
                        susceptible: 10.5 + cycle as f64,
                        exposed: 0.25,
                        infectious: 1.0,
                        removed: 0.0,
                        new_global: 0.125,
                        new_local: 0.5,
                        cumulative: 1.75,
                    })
                })
                .collect(),
            first_exposures: vec![FirstExposure::Never; 2],
        };
        let mut buffer = Vec::new();
        report.write_timeseries_csv(&mut buffer, None).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        let back = read_timeseries_csv("t", &text).unwrap();
        assert_eq!(back.regions, report.regions);
        assert_eq!(back.records, report.records);
        assert_eq!(back.params.run_cycles, 2);
    }

    #[test]
    fn windowed_write_keeps_only_the_window() {
        let report = {
            let mut r = read_timeseries_csv(
                "t",
                "cycle,region,susceptible,exposed,infectious,removed,new_global,new_local,cumulative\n\
                 0,a,1,0,0,0,0,0,0\n1,a,2,0,0,0,0,0,0\n2,a,3,0,0,0,0,0,0\n",
            )
            .unwrap();
            r.label = "w".into();
            r
        };
        let mut buffer = Vec::new();
        report.write_timeseries_csv(&mut buffer, Some((1, 1))).unwrap();
        let text = String::from_utf8(buffer).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().nth(1).unwrap().starts_with("1,a,2"));
    }
}
