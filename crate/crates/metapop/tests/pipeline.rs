//! End-to-end checks on the bundled SARS datasets: matrix construction
//! from the raw flow and share tables, onset conversion, comparison
//! plumbing, and summary output.

use std::collections::BTreeMap;

use metapop::analysis::{attack_rates, compare, density_correlation, summarize, Correlation};
use metapop::dynamics::run;
use metapop::network::{build_sars_matrix, read_flows, symmetrize, Granularity, ProvinceShares};
use metapop::report::{read_observed, read_timeseries_csv};
use metapop::sars;

/// The three-node matrix bundled for the aggregated scenario must equal
/// what the directional flow table folds into, and the one pair measured
/// in a single direction must be flagged.
#[test]
fn flow_records_fold_into_bundled_bilateral_matrix() {
    let flows = read_flows("flows", sars::bundled_file("flows_2003.csv").unwrap()).unwrap();
    let regions = vec!["china".to_string(), "hong_kong".to_string(), "taiwan".to_string()];
    let (matrix, warnings) = symmetrize(&flows, &regions).unwrap();
    assert_eq!(matrix, sars::bilateral_2003());
    assert_eq!(matrix.value_by_id("china", "hong_kong"), Some(64_462_563.0));
    assert_eq!(matrix.value_by_id("china", "taiwan"), Some(2_731_897.0));
    assert_eq!(matrix.value_by_id("hong_kong", "taiwan"), Some(694_412.0));
    assert_eq!(warnings.len(), 1);
    assert!(
        warnings[0].contains("china") && warnings[0].contains("taiwan"),
        "one-direction warning should name the pair: {}",
        warnings[0]
    );
}

/// Expanding China into six provinces reproduces the published volumes to
/// within 0.1% wherever a published value exists.
#[test]
fn province_matrix_matches_published_volumes() {
    let airport = sars::airport_shares();
    let land = sars::land_shares();
    let shares = ProvinceShares {
        airport: &airport,
        land: &land,
        national_total: sars::NATIONAL_PASSENGER_TOTAL,
    };
    let bilateral = sars::bilateral_2003();
    let matrix = build_sars_matrix(&bilateral, Granularity::SixProvinces, Some(&shares)).unwrap();

    // frozen builder outputs, with the published figure for each pair
    let cases = [
        ("beijing", "hong_kong", 8_886_744.0, 8_886_773.0),
        ("beijing", "tianjin", 1_009_343.0, 1_009_387.0),
        ("guangdong", "hong_kong", 8_711_664.0, 8_711_676.0),
        ("hebei", "guangdong", 161_613_100.0, 161_708_110.0),
        ("tianjin", "hong_kong", 736_743.0, 736_718.0),
    ];
    for (a, b, built, published) in cases {
        let got = matrix.value_by_id(a, b).unwrap();
        if got != built {
            // frozen value drifted: report what the builder now produces
            panic!("{a}<->{b}: builder gave {got}, frozen {built}");
        }
        let rel = (got - published).abs() / published;
        assert!(rel < 1e-3, "{a}<->{b}: {got} vs published {published} (rel {rel:.2e})");
    }
    // external pair is carried over unchanged
    assert_eq!(matrix.value_by_id("hong_kong", "taiwan"), Some(694_412.0));
    // every pair of the bundled eight-region matrix agrees to the same bound
    let bundled = metapop::network::TravelMatrix::from_csv(
        "bundled-matrix",
        sars::bundled_file("matrix_sars8.csv").unwrap(),
    )
    .unwrap();
    let names = bundled.regions();
    for (i, a) in names.iter().enumerate() {
        for b in names.iter().skip(i + 1) {
            let reference = bundled.value_by_id(a, b).unwrap();
            let got = matrix.value_by_id(a, b).unwrap();
            if reference == 0.0 {
                assert_eq!(got, 0.0, "{a}<->{b}");
                continue;
            }
            let rel = (got - reference).abs() / reference;
            assert!(rel < 1e-3, "{a}<->{b}: built {got} vs bundled {reference} (rel {rel:.2e})");
        }
    }
}

/// Onset rows convert to seed events at the documented cycles.
#[test]
fn onset_dates_land_on_expected_cycles() {
    let scenario = sars::load_bundled("sars30-onset", &[]).unwrap();
    let seed = |region: &str| {
        scenario
            .seeds
            .iter()
            .find(|s| s.region == region)
            .unwrap_or_else(|| panic!("no seed for {region}"))
    };
    assert_eq!(seed("guangdong").cycle, 0);
    assert_eq!(seed("vietnam").cycle, 49);
    assert_eq!(seed("vietnam").exposed_count, 1.0);
    assert_eq!(seed("macao").cycle, 85);
    assert_eq!(seed("canada").cycle, 49);
    assert_eq!(seed("canada").exposed_count, 5.0);
    // japan reported no case, so it has no seed and never opens
    assert!(scenario.seeds.iter().all(|s| s.region != "japan"));
}

/// Scenario validation reports broken region data by id.
#[test]
fn validation_names_the_offending_region() {
    let mut scenario = sars::load_bundled("sars8", &[]).unwrap();
    let idx = scenario.region_index("hong_kong").unwrap();
    scenario.profiles[idx].population = -1.0;
    let violations = metapop::scenario::validate(&scenario);
    assert!(!violations.is_empty());
    assert!(
        violations.iter().any(|v| v.contains("hong_kong")),
        "violations should name hong_kong: {violations:?}"
    );
}

/// Attack rate vs density correlation is computable on the default run.
#[test]
fn density_correlation_is_defined_for_default_run() {
    let scenario = sars::load_bundled("sars8", &[]).unwrap();
    let report = run(&scenario).unwrap();
    let rates = attack_rates(&report, &scenario.profiles).unwrap();
    match density_correlation(&scenario.profiles, &rates).unwrap() {
        Correlation::Defined { r, p_value } => {
            assert!((-1.0..=1.0).contains(&r), "r = {r}");
            assert!((0.0..=1.0).contains(&p_value), "p = {p_value}");
        }
        Correlation::Undefined => panic!("default run should have varying attack rates"),
    }
}

/// The worldwide default run's biggest misses include the four regions the
/// observed table most disagrees with.
#[test]
fn worldwide_outliers_include_the_four_named_regions() {
    let scenario = sars::load_bundled("sars30", &[]).unwrap();
    let report = run(&scenario).unwrap();
    let observed = read_observed(
        "observed",
        sars::bundled_file("observed_sars_who.csv").unwrap(),
    )
    .unwrap();
    let comparison = compare(&report, &observed, &BTreeMap::new()).unwrap();
    let top: Vec<&str> = comparison
        .outliers()
        .iter()
        .take(8)
        .map(|r| r.label.as_str())
        .collect();
    for name in ["singapore", "macao", "canada", "japan"] {
        assert!(top.contains(&name), "{name} missing from top outliers {top:?}");
    }
}

/// A written time series reads back into the same table.
#[test]
fn timeseries_csv_round_trips() {
    let scenario = sars::load_bundled("sars8", &[]).unwrap();
    let report = run(&scenario).unwrap();
    let mut bytes = Vec::new();
    report.write_timeseries_csv(&mut bytes, None).unwrap();
    let text = String::from_utf8(bytes).unwrap();
    let back = read_timeseries_csv("round-trip", &text).unwrap();
    assert_eq!(back.regions, report.regions);
    assert_eq!(back.records.len(), report.records.len());
    for (a, b) in back.records.iter().zip(&report.records) {
        assert_eq!(a, b);
    }
    // and a second write is byte-identical
    let mut again = Vec::new();
    back.write_timeseries_csv(&mut again, None).unwrap();
    assert_eq!(text.as_bytes(), &again[..]);
}

/// The run summary reflects the committed default configuration.
#[test]
fn summary_reports_seed_and_spread() {
    let scenario = sars::load_bundled("sars8", &[]).unwrap();
    let report = run(&scenario).unwrap();
    let summary = summarize(&report);
    assert_eq!(summary.run_cycles, 100);
    let guangdong = &summary.regions["guangdong"];
    assert!(guangdong.seeded);
    assert_eq!(guangdong.first_exposure_cycle, Some(0));
    let hong_kong = &summary.regions["hong_kong"];
    assert!(!hong_kong.seeded);
    assert_eq!(hong_kong.first_exposure_source.as_deref(), Some("guangdong"));
    assert_eq!(summary.regions_with_local_spread, 8);
    let total: f64 = summary.regions.values().map(|r| r.cumulative_exposed).sum();
    assert!((summary.total_cumulative_exposed - total).abs() < 1e-6 * total);
}
