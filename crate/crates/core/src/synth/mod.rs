//! Renewable generation, load, mismatch and balancing time series.

mod balancing;
mod scenario;
mod shares;
mod weather;

pub use balancing::{apply_balancing, compute_mismatch, Balanced};
pub use scenario::{synthesize, Scenario};
pub use shares::{optimal_share, optimize_shares, ShareProfile, ShareTerms};
pub use weather::{synth_load, synth_weather, LoadProfile, LocalClock, Weather, WeatherParams};
