//! Travel-volume matrices and the tools that produce them: folding
//! directional flow records into symmetric couplings, splitting national
//! totals across provinces by traffic share, and expanding a country-level
//! bilateral matrix to province granularity.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::Result;

/// Symmetric traveler-volume matrix over a fixed region set. Regions are
/// kept in sorted id order; values are row-major with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TravelMatrix {
    regions: Vec<String>,
    values: Vec<f64>,
}

impl TravelMatrix {
    /// Builds a matrix from region ids and row-major values aligned to the
    /// given id order. Ids are sorted internally and the values permuted to
    /// match; duplicates, negative or non-finite entries, a nonzero
    /// diagonal, or any asymmetry are rejected.
    pub fn new(regions: Vec<String>, values: Vec<f64>) -> Result<TravelMatrix> {
        let n = regions.len();
        if values.len() != n * n {
            return Err(Error::config(format!(
                "travel matrix over {} regions needs {} values, got {}",
                n,
                n * n,
                values.len()
            )));
        }
        if regions.iter().any(|r| r.is_empty()) {
            return Err(Error::config("travel matrix has an empty region id"));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| regions[a].cmp(&regions[b]));
        let sorted: Vec<String> = order.iter().map(|&k| regions[k].clone()).collect();
        for pair in sorted.windows(2) {
            if pair[0] == pair[1] {
                return Err(Error::config(format!(
                    "duplicate region {} in travel matrix",
                    pair[0]
                )));
            }
        }
        let mut permuted = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                permuted[i * n + j] = values[order[i] * n + order[j]];
            }
        }
        for i in 0..n {
            if permuted[i * n + i] != 0.0 {
                return Err(Error::config(format!(
                    "travel matrix diagonal must be zero, region {} has {}",
                    sorted[i],
                    permuted[i * n + i]
                )));
            }
            for j in 0..n {
                let v = permuted[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::config(format!(
                        "travel volume {} -> {} is {}, want a finite nonnegative number",
                        sorted[i], sorted[j], v
                    )));
                }
                if v != permuted[j * n + i] {
                    return Err(Error::config(format!(
                        "travel matrix is not symmetric between {} and {}",
                        sorted[i], sorted[j]
                    )));
                }
            }
        }
        Ok(TravelMatrix {
            regions: sorted,
            values: permuted,
        })
    }

    /// Region ids in the matrix's canonical (sorted) order.
    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.regions.binary_search_by(|r| r.as_str().cmp(id)).ok()
    }

    /// Traveler volume between regions `i` and `j` (canonical indices).
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.regions.len() + j]
    }

    pub fn value_by_id(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.value(self.index_of(a)?, self.index_of(b)?))
    }

    /// Renders the matrix as CSV: a `region` corner cell, one column per
    /// region, one row per region, all in canonical order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("region");
        for id in &self.regions {
            out.push(',');
            out.push_str(id);
        }
        out.push('\n');
        for (i, id) in self.regions.iter().enumerate() {
            out.push_str(id);
            for j in 0..self.regions.len() {
                out.push(',');
                out.push_str(&self.value(i, j).to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Parses the CSV form written by [`TravelMatrix::to_csv`]. Rows may
    /// appear in any order; the column header fixes the id set.
    pub fn from_csv(path_label: &str, text: &str) -> Result<TravelMatrix> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::data(path_label, e.to_string()))?
            .clone();
        if headers.len() < 2 || &headers[0] != "region" {
            return Err(Error::data(
                path_label,
                "matrix header must start with a 'region' corner cell",
            ));
        }
        let ids: Vec<String> = headers.iter().skip(1).map(str::to_owned).collect();
        let n = ids.len();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
        for (k, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
            let row_id = record
                .get(0)
                .ok_or_else(|| Error::data(path_label, format!("matrix row {} is empty", k + 1)))?;
            let slot = ids
                .iter()
                .position(|id| id == row_id)
                .ok_or_else(|| {
                    Error::data(path_label, format!("matrix row {} is not a column", row_id))
                })?;
            if record.len() != n + 1 {
                return Err(Error::data(
                    path_label,
                    format!("matrix row {} has {} cells, want {}", row_id, record.len(), n + 1),
                ));
            }
            let mut values = Vec::with_capacity(n);
            for cell in record.iter().skip(1) {
                let v: f64 = cell.parse().map_err(|_| {
                    Error::data(path_label, format!("bad number {} in row {}", cell, row_id))
                })?;
                values.push(v);
            }
            if rows[slot].replace(values).is_some() {
                return Err(Error::data(path_label, format!("duplicate matrix row {}", row_id)));
            }
        }
        let mut values = Vec::with_capacity(n * n);
        for (slot, row) in rows.into_iter().enumerate() {
            match row {
                Some(mut r) => values.append(&mut r),
                None => {
                    return Err(Error::data(
                        path_label,
                        format!("matrix has no row for column {}", ids[slot]),
                    ))
                }
            }
        }
        TravelMatrix::new(ids, values).map_err(|e| match e {
            Error::Config(msg) => Error::data(path_label, msg),
            other => other,
        })
    }
}

/// One directional traveler count, as read from a flow CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowRecord {
    pub origin: String,
    pub destination: String,
    pub travelers: f64,
}

/// Reads `origin,destination,travelers` rows; `#` lines are comments.
pub fn read_flows(path_label: &str, text: &str) -> Result<Vec<FlowRecord>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::data(path_label, e.to_string()))?
        .clone();
    let want = ["origin", "destination", "travelers"];
    if headers.iter().collect::<Vec<_>>() != want {
        return Err(Error::data(
            path_label,
            format!("flow header must be {}", want.join(",")),
        ));
    }
    let mut flows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
        let travelers: f64 = record[2].parse().map_err(|_| {
            Error::data(path_label, format!("bad traveler count {} in row {}", &record[2], k + 1))
        })?;
        flows.push(FlowRecord {
            origin: record[0].to_owned(),
            destination: record[1].to_owned(),
            travelers,
        });
    }
    Ok(flows)
}

/// Folds directional flows into a symmetric matrix over `regions`: each
/// pair's coupling is the sum of its two directions. A pair recorded in
/// only one direction keeps that direction's volume and produces a
/// warning; a pair recorded in neither direction is zero with no warning.
pub fn symmetrize(flows: &[FlowRecord], regions: &[String]) -> Result<(TravelMatrix, Vec<String>)> {
    let mut sorted: Vec<String> = regions.to_vec();
    sorted.sort();
    let n = sorted.len();
    let index = |id: &str| sorted.iter().position(|r| r == id);

    let mut directed = vec![None::<f64>; n * n];
    for flow in flows {
        let i = index(&flow.origin).ok_or_else(|| {
            Error::config(format!("flow origin {} is not a known region", flow.origin))
        })?;
        let j = index(&flow.destination).ok_or_else(|| {
            Error::config(format!(
                "flow destination {} is not a known region",
                flow.destination
            ))
        })?;
        if i == j {
            return Err(Error::config(format!(
                "flow {} -> {} connects a region to itself",
                flow.origin, flow.destination
            )));
        }
        if !flow.travelers.is_finite() || flow.travelers < 0.0 {
            return Err(Error::config(format!(
                "flow {} -> {} has traveler count {}",
                flow.origin, flow.destination, flow.travelers
            )));
        }
        if directed[i * n + j].replace(flow.travelers).is_some() {
            return Err(Error::config(format!(
                "flow {} -> {} appears more than once",
                flow.origin, flow.destination
            )));
        }
    }

    let mut warnings = Vec::new();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let forward = directed[i * n + j];
            let backward = directed[j * n + i];
            match (forward, backward) {
                (None, None) => continue,
                (Some(_), None) => warnings.push(format!(
                    "no {} -> {} flow recorded; pair uses the {} -> {} volume only",
                    sorted[j], sorted[i], sorted[i], sorted[j]
                )),
                (None, Some(_)) => warnings.push(format!(
                    "no {} -> {} flow recorded; pair uses the {} -> {} volume only",
                    sorted[i], sorted[j], sorted[j], sorted[i]
                )),
                (Some(_), Some(_)) => {}
            }
            let total = forward.unwrap_or(0.0) + backward.unwrap_or(0.0);
            values[i * n + j] = total;
            values[j * n + i] = total;
        }
    }
    let matrix = TravelMatrix::new(sorted, values)?;
    Ok((matrix, warnings))
}

/// One named share of a national total.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareEntry {
    pub region: String,
    pub fraction: f64,
}

/// Named traffic shares in file order. Fractions sum to at most 1; any
/// shortfall is the implicit share of everything not listed.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareTable {
    pub entries: Vec<ShareEntry>,
}

impl ShareTable {
    /// Reads `region,share_percent,basis` rows. When every row carries a
    /// percentage the fractions come from it; otherwise every row must
    /// carry a basis count and fractions are basis over total basis. A file
    /// mixing the two conventions is rejected.
    pub fn read(path_label: &str, text: &str) -> Result<ShareTable> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(true)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| Error::data(path_label, e.to_string()))?
            .clone();
        if headers.iter().take(2).collect::<Vec<_>>() != ["region", "share_percent"] {
            return Err(Error::data(
                path_label,
                "share header must start with region,share_percent",
            ));
        }
        let mut rows: Vec<(String, Option<f64>, Option<f64>)> = Vec::new();
        for (k, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::data(path_label, e.to_string()))?;
            let region = record
                .get(0)
                .filter(|r| !r.is_empty())
                .ok_or_else(|| Error::data(path_label, format!("share row {} has no region", k + 1)))?
                .to_owned();
            let parse_opt = |cell: Option<&str>, what: &str| -> Result<Option<f64>> {
                match cell {
                    None | Some("") => Ok(None),
                    Some(s) => s.parse::<f64>().map(Some).map_err(|_| {
                        Error::data(path_label, format!("bad {} {} for {}", what, s, region))
                    }),
                }
            };
            let percent = parse_opt(record.get(1), "share_percent")?;
            let basis = parse_opt(record.get(2), "basis")?;
            if rows.iter().any(|(r, _, _)| *r == region) {
                return Err(Error::data(path_label, format!("duplicate share row {}", region)));
            }
            rows.push((region, percent, basis));
        }
        if rows.is_empty() {
            return Err(Error::data(path_label, "share table has no rows"));
        }
        let entries: Vec<ShareEntry> = if rows.iter().all(|(_, p, _)| p.is_some()) {
            rows.into_iter()
                .map(|(region, p, _)| ShareEntry {
                    region,
                    fraction: p.unwrap() / 100.0,
                })
                .collect()
        } else if rows.iter().all(|(_, _, b)| b.is_some()) {
            let total: f64 = rows.iter().map(|(_, _, b)| b.unwrap()).sum();
            if total <= 0.0 || total.is_nan() {
                return Err(Error::data(path_label, "share basis totals zero"));
            }
            rows.into_iter()
                .map(|(region, _, b)| ShareEntry {
                    region,
                    fraction: b.unwrap() / total,
                })
                .collect()
        } else {
            return Err(Error::data(
                path_label,
                "share rows mix conventions; give every row a share_percent or every row a basis",
            ));
        };
        for e in &entries {
            if !e.fraction.is_finite() || e.fraction < 0.0 {
                return Err(Error::data(
                    path_label,
                    format!("share for {} works out to {}", e.region, e.fraction),
                ));
            }
        }
        let sum: f64 = entries.iter().map(|e| e.fraction).sum();
        if sum > 1.0 + 1e-9 {
            return Err(Error::data(
                path_label,
                format!("shares sum to {}, more than the whole", sum),
            ));
        }
        Ok(ShareTable { entries })
    }

    pub fn fraction(&self, region: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.region == region)
            .map(|e| e.fraction)
    }
}

/// Integer counts produced by [`apportion_by_share`]. Counts follow the
/// table's entry order; `remainder` holds the units belonging to the
/// implicit unlisted share. Counts plus remainder equal the input total
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct Apportionment {
    pub counts: Vec<(String, u64)>,
    pub remainder: u64,
}

impl Apportionment {
    pub fn count(&self, region: &str) -> Option<u64> {
        self.counts
            .iter()
            .find(|(r, _)| r == region)
            .map(|&(_, c)| c)
    }
}

/// Splits `total` units across the table's shares by largest remainder:
/// every share (the implicit unlisted remainder included, ordered last)
/// gets the floor of its quota, then leftover units go one apiece to the
/// largest fractional remainders, earlier entries winning ties.
pub fn apportion_by_share(total: u64, table: &ShareTable) -> Apportionment {
    let named = table.entries.len();
    let mut fractions: Vec<f64> = table.entries.iter().map(|e| e.fraction).collect();
    let listed: f64 = fractions.iter().sum();
    fractions.push((1.0 - listed).max(0.0));

    let mut counts = vec![0u64; named + 1];
    let mut remainders = vec![0.0f64; named + 1];
    let mut assigned: u64 = 0;
    for (k, f) in fractions.iter().enumerate() {
        let quota = total as f64 * f;
        let floor = quota.floor();
        counts[k] = floor as u64;
        remainders[k] = quota - floor;
        assigned += counts[k];
    }
    let mut leftover = total.saturating_sub(assigned);
    let mut order: Vec<usize> = (0..=named).collect();
    order.sort_by(|&a, &b| {
        remainders[b]
            .partial_cmp(&remainders[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    while leftover > 0 {
        for &k in &order {
            if leftover == 0 {
                break;
            }
            counts[k] += 1;
            leftover -= 1;
        }
    }

    let remainder = counts.pop().unwrap();
    Apportionment {
        counts: table
            .entries
            .iter()
            .map(|e| e.region.clone())
            .zip(counts)
            .collect(),
        remainder,
    }
}

/// Which region set a built matrix covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// China stays one node alongside the other bilateral regions.
    AggregatedChina,
    /// China splits into the provinces named by the share tables.
    SixProvinces,
}

/// Traffic-share inputs for expanding China to province granularity.
#[derive(Debug, Clone)]
pub struct ProvinceShares<'a> {
    /// Airport passenger shares; splits China's international volumes.
    pub airport: &'a ShareTable,
    /// Land passenger shares; generates the inter-province volumes.
    pub land: &'a ShareTable,
    /// National passenger trips per year across all modes.
    pub national_total: f64,
}

/// Builds the simulation travel matrix from a country-level bilateral
/// matrix that includes a `china` node. At province granularity each
/// inter-province volume is twice the product of the two land shares times
/// the national total, and each China-to-elsewhere volume is split across
/// provinces by airport share.
pub fn build_sars_matrix(
    bilateral: &TravelMatrix,
    granularity: Granularity,
    shares: Option<&ProvinceShares>,
) -> Result<TravelMatrix> {
    let china = bilateral
        .index_of("china")
        .ok_or_else(|| Error::config("bilateral matrix has no china region"))?;
    match granularity {
        Granularity::AggregatedChina => Ok(bilateral.clone()),
        Granularity::SixProvinces => {
            let shares = shares.ok_or_else(|| {
                Error::config("province granularity needs airport and land share tables")
            })?;
            let provinces: Vec<String> = shares
                .land
                .entries
                .iter()
                .map(|e| e.region.clone())
                .filter(|r| r != "others")
                .collect();
            for p in &provinces {
                if shares.airport.fraction(p).is_none() {
                    return Err(Error::config(format!(
                        "airport share table has no row for {}",
                        p
                    )));
                }
            }
            let externals: Vec<usize> = (0..bilateral.len()).filter(|&k| k != china).collect();

            // China->external volumes split once per external region.
            let mut splits = Vec::with_capacity(externals.len());
            for &e in &externals {
                let total = bilateral.value(china, e).round();
                if total < 0.0 || total > u64::MAX as f64 {
                    return Err(Error::config(format!(
                        "china volume to {} is out of range",
                        bilateral.regions()[e]
                    )));
                }
                splits.push(apportion_by_share(total as u64, shares.airport));
            }

            let mut ids: Vec<String> = provinces.clone();
            ids.extend(externals.iter().map(|&e| bilateral.regions()[e].clone()));
            let n = ids.len();
            let np = provinces.len();
            let mut values = vec![0.0; n * n];
            let set = |values: &mut Vec<f64>, i: usize, j: usize, v: f64| {
                values[i * n + j] = v;
                values[j * n + i] = v;
            };
            for (i, pi) in provinces.iter().enumerate() {
                let fi = shares.land.fraction(pi).unwrap();
                for (j, pj) in provinces.iter().enumerate().skip(i + 1) {
                    let fj = shares.land.fraction(pj).unwrap();
                    let volume = (2.0 * fi * fj * shares.national_total).round();
                    set(&mut values, i, j, volume);
                }
            }
            for (k, &e) in externals.iter().enumerate() {
                for (i, pi) in provinces.iter().enumerate() {
                    let count = splits[k].count(pi).unwrap();
                    set(&mut values, i, np + k, count as f64);
                }
                for (m, &e2) in externals.iter().enumerate().skip(k + 1) {
                    set(&mut values, np + k, np + m, bilateral.value(e, e2));
                }
            }
            TravelMatrix::new(ids, values)
        }
    }
}
