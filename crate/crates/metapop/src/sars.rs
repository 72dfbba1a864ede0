//! Bundled SARS 2002-2003 data: region tables, traveler-volume matrices,
//! share tables, onset dates, observed totals, and four ready-to-run
//! scenarios. Everything is compiled into the library so the canonical
//! runs need no files on disk.

use std::collections::BTreeMap;

use crate::error::Error;
use crate::network::{ShareTable, TravelMatrix};
use crate::scenario::{load_scenario_str, DataSource, Scenario};
use crate::Result;

/// Passenger trips per year across all travel modes in China, 2002; the
/// basis for inter-province volume estimates.
pub const NATIONAL_PASSENGER_TOTAL: f64 = 2.227761e10;

static FILES: &[(&str, &str)] = &[
    ("regions_sars8.csv", include_str!("../data/regions_sars8.csv")),
    (
        "regions_sars8_aggregated.csv",
        include_str!("../data/regions_sars8_aggregated.csv"),
    ),
    ("regions_sars30.csv", include_str!("../data/regions_sars30.csv")),
    ("matrix_sars8.csv", include_str!("../data/matrix_sars8.csv")),
    (
        "matrix_sars8_aggregated.csv",
        include_str!("../data/matrix_sars8_aggregated.csv"),
    ),
    ("matrix_sars30.csv", include_str!("../data/matrix_sars30.csv")),
    ("flows_2003.csv", include_str!("../data/flows_2003.csv")),
    ("airport_shares.csv", include_str!("../data/airport_shares.csv")),
    ("land_shares.csv", include_str!("../data/land_shares.csv")),
    ("onset_sars30.csv", include_str!("../data/onset_sars30.csv")),
    (
        "observed_sars_who.csv",
        include_str!("../data/observed_sars_who.csv"),
    ),
    ("scenarios/sars8.toml", include_str!("../data/scenarios/sars8.toml")),
    (
        "scenarios/sars8-aggregated.toml",
        include_str!("../data/scenarios/sars8-aggregated.toml"),
    ),
    ("scenarios/sars30.toml", include_str!("../data/scenarios/sars30.toml")),
    (
        "scenarios/sars30-onset.toml",
        include_str!("../data/scenarios/sars30-onset.toml"),
    ),
];

/// Resolves scenario-relative paths against the bundled files.
pub struct MemorySource;

impl DataSource for MemorySource {
    fn read(&self, rel: &str) -> Result<String> {
        bundled_file(rel).map(str::to_owned)
    }

    fn label(&self, rel: &str) -> String {
        format!("bundled:{rel}")
    }
}

/// The bundled scenario names, accepted anywhere a scenario path is.
pub fn bundled_names() -> &'static [&'static str] {
    &["sars8", "sars8-aggregated", "sars30", "sars30-onset"]
}

pub fn is_bundled(name: &str) -> bool {
    bundled_names().contains(&name)
}

/// Raw content of one bundled data file by its relative name.
pub fn bundled_file(rel: &str) -> Result<&'static str> {
    FILES
        .iter()
        .find(|&&(name, _)| name == rel)
        .map(|&(_, content)| content)
        .ok_or_else(|| Error::data(format!("bundled:{rel}"), "no bundled file with this name"))
}

/// Loads one of the bundled scenarios with optional `key=value` overrides.
pub fn load_bundled(name: &str, overrides: &[(String, String)]) -> Result<Scenario> {
    if !is_bundled(name) {
        return Err(Error::config(format!(
            "no bundled scenario named {name}; available: {}",
            bundled_names().join(", ")
        )));
    }
    let rel = format!("scenarios/{name}.toml");
    let text = bundled_file(&rel)?;
    load_scenario_str(text, &format!("bundled:{rel}"), &MemorySource, overrides)
}

/// The symmetrized 2003 China / Hong Kong / Taiwan traveler totals.
pub fn bilateral_2003() -> TravelMatrix {
    TravelMatrix::from_csv(
        "bundled:matrix_sars8_aggregated.csv",
        bundled_file("matrix_sars8_aggregated.csv").unwrap(),
    )
    .expect("bundled bilateral matrix is well-formed")
}

/// Airport passenger shares of the six modeled provinces, 2002.
pub fn airport_shares() -> ShareTable {
    ShareTable::read(
        "bundled:airport_shares.csv",
        bundled_file("airport_shares.csv").unwrap(),
    )
    .expect("bundled airport share table is well-formed")
}

/// Land passenger shares (rail, highway, waterway) of the six modeled
/// provinces plus the explicit remainder, 2002.
pub fn land_shares() -> ShareTable {
    ShareTable::read(
        "bundled:land_shares.csv",
        bundled_file("land_shares.csv").unwrap(),
    )
    .expect("bundled land share table is well-formed")
}

/// The grouping that folds the six provinces into the single `china`
/// label used by the observed totals.
pub fn china_group() -> BTreeMap<String, Vec<String>> {
    let provinces = ["beijing", "guangdong", "hebei", "inner_mongolia", "shanxi", "tianjin"];
    [(
        "china".to_string(),
        provinces.iter().map(|s| s.to_string()).collect(),
    )]
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::validate;

    #[test]
    fn every_bundled_scenario_loads_clean() {
        for name in bundled_names() {
            let scenario = load_bundled(name, &[]).unwrap();
            let violations = validate(&scenario);
            assert!(violations.is_empty(), "{name}: {violations:?}");
            assert!(scenario.warnings.is_empty(), "{name}: {:?}", scenario.warnings);
        }
    }

    #[test]
    fn unknown_bundled_name_lists_the_choices() {
        let err = load_bundled("sars9", &[]).unwrap_err();
        assert!(err.to_string().contains("sars8-aggregated"));
        assert!(bundled_file("nope.csv").is_err());
        assert!(!is_bundled("sars9"));
    }

    #[test]
    fn china_group_members_exist_in_the_worldwide_scenario() {
        let scenario = load_bundled("sars30", &[]).unwrap();
        for member in &china_group()["china"] {
            assert!(scenario.region_index(member).is_some(), "{member}");
        }
        assert_eq!(scenario.profiles.len(), 35);
    }

    #[test]
    fn bilateral_totals_match_the_flow_fold() {
        let m = bilateral_2003();
        assert_eq!(m.value_by_id("china", "hong_kong"), Some(64_462_563.0));
        assert_eq!(m.value_by_id("china", "taiwan"), Some(2_731_897.0));
        assert_eq!(m.value_by_id("hong_kong", "taiwan"), Some(694_412.0));
    }

    #[test]
    fn share_tables_cover_the_six_provinces() {
        let airport = airport_shares();
        let land = land_shares();
        for province in ["beijing", "tianjin", "hebei", "shanxi", "inner_mongolia", "guangdong"] {
            assert!(airport.fraction(province).is_some(), "{province}");
            assert!(land.fraction(province).is_some(), "{province}");
        }
        assert_eq!(airport.fraction("beijing"), Some(0.137859));
        assert!(land.fraction("others").is_some());
    }

    #[test]
    fn overrides_reach_bundled_scenarios() {
        let over = vec![("run_cycles".to_string(), "10".to_string())];
        let scenario = load_bundled("sars8", &over).unwrap();
        assert_eq!(scenario.params.run_cycles, 10);
    }
}
