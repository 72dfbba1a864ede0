//! Deterministic discrete-time metapopulation epidemic simulator.
//!
//! A world is a set of regions coupled by a symmetric travel matrix. Each cycle
//! every region converts part of its susceptible pool into newly exposed people,
//! driven by two channels: global exposure (infectious people elsewhere, weighted
//! by traveler volume) and local exposure (infectious people in the same region,
//! weighted by population density). Exposed people move through fixed-length
//! incubation and infectious delay lines before being removed.
//!
//! Everything is deterministic: same inputs, same bytes out. There is no RNG
//! anywhere in the simulation path, region iteration always happens in canonical
//! (lexicographic id) order, and parallel calibration merges results in grid order.

pub mod analysis;
pub mod baselines;
pub mod calibrate;
pub mod dynamics;
pub mod error;
pub mod network;
pub mod params;
pub mod region;
pub mod report;
pub mod sars;
pub mod scenario;
pub mod state;

pub use analysis::{compare, density_correlation, extract_routes, peak_cycle, Comparison};
pub use baselines::{integrate, OdeModel, OdeParams, OdeState};
pub use calibrate::{calibrate, FitResult, GridAxes};
pub use dynamics::{run, World};
pub use error::Error;
pub use network::{apportion_by_share, build_sars_matrix, symmetrize, ShareTable, TravelMatrix};
pub use params::{EpidemicParams, MixingMode};
pub use region::RegionProfile;
pub use report::{ObservedSeries, TimeSeriesReport};
pub use scenario::{Scenario, SeedEvent, SeedingMode};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
