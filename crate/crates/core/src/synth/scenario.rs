use crate::error::Result;
use crate::grid::Network;
use crate::series::TimeSeriesEnsemble;

use super::{apply_balancing, compute_mismatch, optimize_shares, synth_load, synth_weather};
use super::{Balanced, LoadProfile, ShareProfile, Weather, WeatherParams};

/// Every intermediate series of one synthetic run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub weather: Weather,
    pub load: TimeSeriesEnsemble,
    pub shares: ShareProfile,
    pub generation: TimeSeriesEnsemble,
    pub mismatch: TimeSeriesEnsemble,
    pub balanced: Balanced,
}

impl Scenario {
    pub fn injections(&self) -> &TimeSeriesEnsemble {
        &self.balanced.injections
    }
}

/// Synthetic weather and load, then [`Scenario::from_inputs`].
pub fn synthesize(
    network: &Network,
    params: &WeatherParams,
    load_profile: &LoadProfile,
    hours: usize,
) -> Result<Scenario> {
    let weather = synth_weather(network, params, hours)?;
    let load = synth_load(
        network,
        weather.wind_cf.timestamps(),
        load_profile,
        &params.clock,
    )?;
    Scenario::from_inputs(network, weather, load)
}

impl Scenario {
    /// Optimal shares, generation, mismatch and balanced injections for
    /// given capacity factors and load, all in network node order.
    pub fn from_inputs(
        network: &Network,
        weather: Weather,
        load: TimeSeriesEnsemble,
    ) -> Result<Self> {
        let shares = optimize_shares(&weather.wind_cf, &weather.solar_cf, &load, network)?;
        let (_, _, generation) = shares.generation(&weather.wind_cf, &weather.solar_cf)?;
        let mismatch = compute_mismatch(&generation, &load)?;
        let balanced = apply_balancing(&mismatch, &network.mean_loads())?;
        Ok(Self {
            weather,
            load,
            shares,
            generation,
            mismatch,
            balanced,
        })
    }
}
