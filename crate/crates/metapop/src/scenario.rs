//! Scenario files: a TOML description naming the region table, the travel
//! coupling, the dynamics parameters, and how infection enters the world.
//! Loading resolves every referenced file through a [`DataSource`] so the
//! same scenario text works from a directory on disk or from bundled data.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::network::{read_flows, symmetrize, TravelMatrix};
use crate::params::EpidemicParams;
use crate::region::{read_regions, RegionProfile};
use crate::Result;

/// How infection is introduced and when regions admit travel imports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedingMode {
    /// One introduction; every region admits imports from cycle 0.
    TrafficDriven,
    /// Each region is seeded at its recorded onset and admits imports only
    /// from that cycle on; regions with no onset never admit any.
    ObservedOnset,
}

/// A direct injection of exposed people into one region at one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedEvent {
    pub region: String,
    pub cycle: u32,
    pub exposed_count: f64,
}

/// A fully resolved simulation setup: profiles and matrix share the same
/// canonical (sorted id) region order, seeds are sorted by cycle then
/// region, and `inputs` keeps every raw file that went into the build,
/// scenario text first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub profiles: Vec<RegionProfile>,
    pub matrix: TravelMatrix,
    pub params: EpidemicParams,
    pub seeds: Vec<SeedEvent>,
    pub seeding_mode: SeedingMode,
    pub calendar_origin: Option<NaiveDate>,
    pub cycle_length_days: f64,
    pub inputs: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

impl Scenario {
    pub fn region_index(&self, id: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.id == id)
    }
}

/// Resolves the relative paths a scenario file mentions.
pub trait DataSource {
    fn read(&self, rel: &str) -> Result<String>;
    /// Human-readable name for the resolved file, used in errors and in
    /// the scenario's input list.
    fn label(&self, rel: &str) -> String;
}

/// Reads scenario inputs from a directory on disk.
pub struct DirSource {
    root: PathBuf,
}

impl DirSource {
    pub fn new(root: impl Into<PathBuf>) -> DirSource {
        DirSource { root: root.into() }
    }
}

impl DataSource for DirSource {
    fn read(&self, rel: &str) -> Result<String> {
        let path = self.root.join(rel);
        fs::read_to_string(&path).map_err(|e| Error::io(path.display().to_string(), e))
    }

    fn label(&self, rel: &str) -> String {
        self.root.join(rel).display().to_string()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    meta: MetaSection,
    params: EpidemicParams,
    regions: RegionsSection,
    flows: FlowsSection,
    seeds: SeedsSection,
    #[serde(default)]
    options: OptionsSection,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetaSection {
    label: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionsSection {
    path: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowsSection {
    path: Option<String>,
    matrix: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedsSection {
    events: Option<Vec<SeedEvent>>,
    onset: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
struct OptionsSection {
    seeding_mode: Option<SeedingMode>,
    calendar_origin: Option<String>,
    cycle_length_days: Option<f64>,
}

fn apply_overrides(file: &mut ScenarioFile, overrides: &[(String, String)]) -> Result<()> {
    for (key, value) in overrides {
        match key.as_str() {
            "seeding_mode" => {
                file.options.seeding_mode = Some(match value.as_str() {
                    "traffic_driven" => SeedingMode::TrafficDriven,
                    "observed_onset" => SeedingMode::ObservedOnset,
                    other => {
                        return Err(Error::config(format!(
                            "override seeding_mode: unknown mode `{other}` \
                             (expected traffic_driven or observed_onset)"
                        )))
                    }
                })
            }
            "calendar_origin" => file.options.calendar_origin = Some(value.clone()),
            "cycle_length_days" => {
                file.options.cycle_length_days = Some(value.parse().map_err(|_| {
                    Error::config(format!("override cycle_length_days: `{value}` is not a number"))
                })?)
            }
            _ => file.params.set(key, value)?,
        }
    }
    Ok(())
}

/// Loads a scenario from TOML text, resolving referenced files through
/// `source`. Overrides are `key=value` pairs applied before resolution, so
/// an overridden calendar origin or cycle length also moves onset-derived
/// seeds.
pub fn load_scenario_str(
    text: &str,
    text_label: &str,
    source: &dyn DataSource,
    overrides: &[(String, String)],
) -> Result<Scenario> {
    let mut file: ScenarioFile =
        toml::from_str(text).map_err(|e| Error::data(text_label, e.to_string()))?;
    apply_overrides(&mut file, overrides)?;

    let mut inputs = vec![(text_label.to_owned(), text.to_owned())];
    let mut warnings = Vec::new();

    let regions_label = source.label(&file.regions.path);
    let regions_text = source.read(&file.regions.path)?;
    let profiles = read_regions(&regions_label, &regions_text)?;
    inputs.push((regions_label, regions_text));
    let ids: Vec<String> = profiles.iter().map(|p| p.id.clone()).collect();

    let matrix = match (&file.flows.matrix, &file.flows.path) {
        (Some(_), Some(_)) => {
            return Err(Error::data(
                text_label,
                "flows section gives both a matrix and a flow list; pick one",
            ))
        }
        (None, None) => {
            return Err(Error::data(
                text_label,
                "flows section needs a matrix or a flow list path",
            ))
        }
        (Some(rel), None) => {
            let label = source.label(rel);
            let matrix_text = source.read(rel)?;
            let matrix = TravelMatrix::from_csv(&label, &matrix_text)?;
            inputs.push((label, matrix_text));
            matrix
        }
        (None, Some(rel)) => {
            let label = source.label(rel);
            let flows_text = source.read(rel)?;
            let flows = read_flows(&label, &flows_text)?;
            inputs.push((label, flows_text));
            let (matrix, mut flow_warnings) = symmetrize(&flows, &ids)?;
            warnings.append(&mut flow_warnings);
            matrix
        }
    };

    let seeding_mode = file
        .options
        .seeding_mode
        .unwrap_or(SeedingMode::TrafficDriven);
    let cycle_length_days = file.options.cycle_length_days.unwrap_or(2.0);
    let calendar_origin = match &file.options.calendar_origin {
        Some(s) => Some(NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|_| {
            Error::data(
                text_label,
                format!("bad calendar_origin {s}; want YYYY-MM-DD"),
            )
        })?),
        None => None,
    };

    let seeds = match (&file.seeds.events, &file.seeds.onset) {
        (Some(_), Some(_)) => {
            return Err(Error::data(
                text_label,
                "seeds section gives both events and an onset file; pick one",
            ))
        }
        (None, None) => {
            return Err(Error::data(
                text_label,
                "seeds section needs events or an onset file path",
            ))
        }
        (Some(events), None) => {
            let mut seeds = events.clone();
            seeds.sort_by(|a, b| (a.cycle, &a.region).cmp(&(b.cycle, &b.region)));
            seeds
        }
        (None, Some(rel)) => {
            let label = source.label(rel);
            let onset_text = source.read(rel)?;
            let onsets = read_onset(&label, &onset_text)?;
            inputs.push((label, onset_text));
            let origin = calendar_origin.ok_or_else(|| {
                Error::data(text_label, "onset seeding needs a calendar_origin")
            })?;
            if cycle_length_days <= 0.0 || cycle_length_days.is_nan() {
                return Err(Error::data(
                    text_label,
                    format!("cycle_length_days is {cycle_length_days}; must be positive"),
                ));
            }
            onset_dates_to_seeds(&onsets, origin, cycle_length_days)?
        }
    };

    Ok(Scenario {
        label: file.meta.label,
        profiles,
        matrix,
        params: file.params,
        seeds,
        seeding_mode,
        calendar_origin,
        cycle_length_days,
        inputs,
        warnings,
    })
}

/// Loads a scenario from a TOML file; relative paths inside it resolve
/// against the file's directory.
pub fn load_scenario_file(path: &Path, overrides: &[(String, String)]) -> Result<Scenario> {
    let text =
        fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    load_scenario_str(
        &text,
        &path.display().to_string(),
        &DirSource::new(dir),
        overrides,
    )
}

/// One region's recorded first case: the date and, when known, how many
/// imported cases arrived with it.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetRecord {
    pub region: String,
    pub date: NaiveDate,
    pub imported: Option<f64>,
}

/// Reads `region,date,imported` rows; an empty or `NA` imported cell means
/// the count was not recorded.
pub fn read_onset(path_label: &str, text: &str) -> Result<Vec<OnsetRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path_label, e.to_string()))?
        .clone();
    if headers.iter().take(2).collect::<Vec<_>>() != ["region", "date"] {
        return Err(Error::data(path_label, "onset header must start with region,date"));
    }
    let mut records = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
        let region = record
            .get(0)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| Error::data(path_label, format!("onset row {} has no region", k + 1)))?
            .to_owned();
        let date_cell = record
            .get(1)
            .ok_or_else(|| Error::data(path_label, format!("onset row {region} has no date")))?;
        let date = NaiveDate::parse_from_str(date_cell, "%Y-%m-%d").map_err(|_| {
            Error::data(path_label, format!("bad date {date_cell} for {region}; want YYYY-MM-DD"))
        })?;
        let imported = match record.get(2) {
            None | Some("") | Some("NA") => None,
            Some(s) => Some(s.parse::<f64>().map_err(|_| {
                Error::data(path_label, format!("bad imported count {s} for {region}"))
            })?),
        };
        records.push(OnsetRecord { region, date, imported });
    }
    if records.is_empty() {
        return Err(Error::data(path_label, "onset file has no rows"));
    }
    Ok(records)
}

/// Converts onset dates to seed events: each region is seeded at the cycle
/// containing its onset date (`floor` of days since origin over cycle
/// length) with its imported case count, or one exposed person when the
/// count was not recorded. A date before the origin or a repeated region
/// is an error.
pub fn onset_dates_to_seeds(
    onsets: &[OnsetRecord],
    origin: NaiveDate,
    cycle_length_days: f64,
) -> Result<Vec<SeedEvent>> {
    let mut seeds = Vec::with_capacity(onsets.len());
    for rec in onsets {
        if seeds.iter().any(|s: &SeedEvent| s.region == rec.region) {
            return Err(Error::config(format!(
                "region {} has more than one onset date",
                rec.region
            )));
        }
        let days = rec.date.signed_duration_since(origin).num_days();
        if days < 0 {
            return Err(Error::config(format!(
                "onset for {} ({}) predates the calendar origin {}",
                rec.region, rec.date, origin
            )));
        }
        let cycle = (days as f64 / cycle_length_days).floor() as u32;
        seeds.push(SeedEvent {
            region: rec.region.clone(),
            cycle,
            exposed_count: rec.imported.unwrap_or(1.0),
        });
    }
    seeds.sort_by(|a, b| (a.cycle, &a.region).cmp(&(b.cycle, &b.region)));
    Ok(seeds)
}

/// Checks a resolved scenario against every structural rule and returns
/// the full list of violations; an empty list means the scenario can run.
pub fn validate(scenario: &Scenario) -> Vec<String> {
    let mut v = Vec::new();
    for profile in &scenario.profiles {
        v.extend(profile.violations());
    }
    v.extend(scenario.params.violations());

    let profile_ids: Vec<&str> = scenario.profiles.iter().map(|p| p.id.as_str()).collect();
    for id in &profile_ids {
        if scenario.matrix.index_of(id).is_none() {
            v.push(format!("region {id} has no row in the travel matrix"));
        }
    }
    for id in scenario.matrix.regions() {
        if !profile_ids.contains(&id.as_str()) {
            v.push(format!("travel matrix region {id} has no profile"));
        }
    }

    for seed in &scenario.seeds {
        if scenario.region_index(&seed.region).is_none() {
            v.push(format!("seed region {} is not in the region table", seed.region));
        }
        if seed.cycle >= scenario.params.run_cycles {
            v.push(format!(
                "seed for {} at cycle {} is outside the run ({} cycles)",
                seed.region, seed.cycle, scenario.params.run_cycles
            ));
        }
        if !(seed.exposed_count.is_finite() && seed.exposed_count > 0.0) {
            v.push(format!(
                "seed for {} has exposed_count {}; must be positive",
                seed.region, seed.exposed_count
            ));
        }
    }
    match scenario.seeding_mode {
        SeedingMode::TrafficDriven => {
            if scenario.seeds.len() != 1 {
                v.push(format!(
                    "traffic_driven seeding needs exactly one seed event, got {}",
                    scenario.seeds.len()
                ));
            }
        }
        SeedingMode::ObservedOnset => {
            if scenario.seeds.is_empty() {
                v.push("observed_onset seeding needs at least one seed".to_string());
            }
            for (k, seed) in scenario.seeds.iter().enumerate() {
                if scenario.seeds[..k].iter().any(|s| s.region == seed.region) {
                    v.push(format!(
                        "observed_onset seeding has more than one seed for {}",
                        seed.region
                    ));
                }
            }
        }
    }
    if !(scenario.cycle_length_days.is_finite() && scenario.cycle_length_days > 0.0) {
        v.push(format!(
            "cycle_length_days is {}; must be positive",
            scenario.cycle_length_days
        ));
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    /// In-memory source for loader tests.
    struct MapSource(BTreeMap<&'static str, &'static str>);

    impl DataSource for MapSource {
        fn read(&self, rel: &str) -> Result<String> {
            self.0
                .get(rel)
                .map(|s| s.to_string())
                .ok_or_else(|| Error::data(rel, "no such test file"))
        }
        fn label(&self, rel: &str) -> String {
            format!("mem:{rel}")
        }
    }

    const REGIONS: &str = "id,name,population,area_km2,density_per_km2\n\
                           east,East,1000000,1000,1000\n\
                           west,West,2000000,4000,500\n";

    fn base_toml() -> String {
        "[meta]\nlabel = \"pair\"\n\
         [params]\np_global = 2.0e-7\nd_global = 5.0e-9\nd_local = 2.5e-7\n\
         c1 = 7.23e-9\nc2 = 7.69e-6\nincubation_period = 10\n\
         infectious_period = 10\nrun_cycles = 50\n\
         [regions]\npath = \"regions.csv\"\n\
         [flows]\nmatrix = \"matrix.csv\"\n\
         [seeds]\nevents = [{ region = \"east\", cycle = 0, exposed_count = 1.0 }]\n"
            .to_string()
    }

    fn source() -> MapSource {
        let mut files = BTreeMap::new();
        files.insert("regions.csv", REGIONS);
        files.insert("matrix.csv", "region,east,west\neast,0,50\nwest,50,0\n");
        files.insert(
            "flows.csv",
            "origin,destination,travelers\neast,west,30\nwest,east,20\n",
        );
        MapSource(files)
    }

    #[test]
    fn loads_and_resolves_matrix_scenario() {
        let s = load_scenario_str(&base_toml(), "test.toml", &source(), &[]).unwrap();
        assert_eq!(s.label, "pair");
        assert_eq!(s.profiles.len(), 2);
        assert_eq!(s.matrix.value_by_id("east", "west"), Some(50.0));
        assert_eq!(s.seeding_mode, SeedingMode::TrafficDriven);
        assert_eq!(s.cycle_length_days, 2.0);
        assert_eq!(s.inputs.len(), 3);
        assert_eq!(s.inputs[0].0, "test.toml");
        assert!(validate(&s).is_empty());
    }

    #[test]
    fn flow_list_is_symmetrized() {
        let toml = base_toml().replace(
            "matrix = \"matrix.csv\"",
            "path = \"flows.csv\"",
        );
        let s = load_scenario_str(&toml, "test.toml", &source(), &[]).unwrap();
        assert_eq!(s.matrix.value_by_id("east", "west"), Some(50.0));
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn overrides_change_params_and_reject_unknown_keys() {
        let over = vec![("run_cycles".to_string(), "7".to_string())];
        let s = load_scenario_str(&base_toml(), "test.toml", &source(), &over).unwrap();
        assert_eq!(s.params.run_cycles, 7);

        let bad = vec![("run_cycle".to_string(), "7".to_string())];
        let err = load_scenario_str(&base_toml(), "test.toml", &source(), &bad).unwrap_err();
        assert!(err.to_string().contains("run_cycle"));
    }

    #[test]
    fn unknown_toml_key_is_rejected() {
        let toml = base_toml() + "[extra]\nx = 1\n";
        assert!(load_scenario_str(&toml, "test.toml", &source(), &[]).is_err());
    }

    #[test]
    fn onset_dates_become_sorted_seeds() {
        let onsets = vec![
            OnsetRecord {
                region: "late".into(),
                date: NaiveDate::from_ymd_opt(2003, 5, 5).unwrap(),
                imported: None,
            },
            OnsetRecord {
                region: "early".into(),
                date: NaiveDate::from_ymd_opt(2003, 2, 23).unwrap(),
                imported: Some(5.0),
            },
        ];
        let origin = NaiveDate::from_ymd_opt(2002, 11, 16).unwrap();
        let seeds = onset_dates_to_seeds(&onsets, origin, 2.0).unwrap();
        assert_eq!(seeds[0].region, "early");
        assert_eq!(seeds[0].cycle, 49);
        assert_eq!(seeds[0].exposed_count, 5.0);
        assert_eq!(seeds[1].region, "late");
        assert_eq!(seeds[1].cycle, 85);
        assert_eq!(seeds[1].exposed_count, 1.0);
    }

    #[test]
    fn onset_on_the_origin_is_cycle_zero_and_before_it_fails() {
        let origin = NaiveDate::from_ymd_opt(2002, 11, 16).unwrap();
        let at_origin = vec![OnsetRecord { region: "x".into(), date: origin, imported: None }];
        assert_eq!(onset_dates_to_seeds(&at_origin, origin, 2.0).unwrap()[0].cycle, 0);

        let before = vec![OnsetRecord {
            region: "x".into(),
            date: NaiveDate::from_ymd_opt(2002, 11, 15).unwrap(),
            imported: None,
        }];
        let err = onset_dates_to_seeds(&before, origin, 2.0).unwrap_err();
        assert!(err.to_string().contains("x"));
    }

    #[test]
    fn validate_names_each_problem() {
        let mut s = load_scenario_str(&base_toml(), "test.toml", &source(), &[]).unwrap();
        s.seeds.push(SeedEvent {
            region: "atlantis".into(),
            cycle: 99,
            exposed_count: 0.0,
        });
        let v = validate(&s);
        assert!(v.iter().any(|m| m.contains("atlantis")));
        assert!(v.iter().any(|m| m.contains("cycle 99")));
        assert!(v.iter().any(|m| m.contains("exactly one seed")));
    }

    #[test]
    fn scenario_survives_serialization() {
        let s = load_scenario_str(&base_toml(), "test.toml", &source(), &[]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: Scenario = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }
}
