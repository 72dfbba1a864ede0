use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Static demographic description of one region (a node in the travel network).
///
/// `density` is carried as data rather than recomputed because source tables
/// round population, area, and density independently; consistency is only
/// enforced to 5% (see [`RegionProfile::violations`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionProfile {
    /// Opaque identifier; lowercase snake-case by convention. Canonical region
    /// order everywhere in the crate is lexicographic on this id.
    pub id: String,
    /// Display name, free text.
    pub name: String,
    /// Person count (N_i); the region's population never changes during a run.
    pub population: f64,
    pub area_km2: f64,
    /// Persons per km² (ρ_i); drives the local infection coefficient.
    pub density_per_km2: f64,
}

impl RegionProfile {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.id.is_empty() {
            v.push("region id must be nonempty".to_string());
        }
        for (field, value) in [
            ("population", self.population),
            ("area_km2", self.area_km2),
            ("density_per_km2", self.density_per_km2),
        ] {
            if !value.is_finite() || value <= 0.0 {
                v.push(format!("region {}: {field} must be positive, got {value}", self.id));
            }
        }
        if self.population > 0.0 && self.area_km2 > 0.0 && self.density_per_km2 > 0.0 {
            let implied = self.population / self.area_km2;
            let rel = (self.density_per_km2 - implied).abs() / implied;
            if rel > 0.05 {
                v.push(format!(
                    "region {}: density {} disagrees with population/area = {:.2} by more than 5%",
                    self.id, self.density_per_km2, implied
                ));
            }
        }
        v
    }
}

/// Reads a regions CSV (`id,name,population,area_km2,density_per_km2`).
/// Lines starting with `#` are comments. Duplicate ids are an error; the
/// result is sorted into canonical id order.
pub fn read_regions(path_label: &str, text: &str) -> Result<Vec<RegionProfile>, Error> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut profiles: Vec<RegionProfile> = Vec::new();
    for (idx, row) in reader.deserialize::<RegionProfile>().enumerate() {
        let profile =
            row.map_err(|e| Error::data(path_label, format!("row {}: {e}", idx + 2)))?;
        profiles.push(profile);
    }
    if profiles.is_empty() {
        return Err(Error::data(path_label, "no regions defined"));
    }
    profiles.sort_by(|a, b| a.id.cmp(&b.id));
    for pair in profiles.windows(2) {
        if pair[0].id == pair[1].id {
            return Err(Error::data(path_label, format!("duplicate region id `{}`", pair[0].id)));
        }
    }
    Ok(profiles)
}
