//! Synthetic capacity factors and load profiles.
//!
//! Wind is a Gaussian random field with exponential spatial correlation
//! `exp(-d / xi_W)`, evolved in time as an AR(1) process so that every
//! snapshot keeps the same spatial covariance. Solar is a clear-sky envelope
//! (diurnal arc with seasonal day length and intensity) multiplied by a
//! correlated cloud field. Local solar time shifts with easting.

use chrono::{DateTime, Datelike, TimeZone, Timelike, Utc};
use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::series::TimeSeriesEnsemble;

/// Converts UTC to local solar hour from easting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalClock {
    /// Easting where local solar time equals UTC.
    pub reference_x_km: f64,
    /// Eastward distance per hour of solar time (about 1070 km at 50°N).
    pub km_per_hour: f64,
}

impl Default for LocalClock {
    fn default() -> Self {
        Self {
            reference_x_km: 0.0,
            km_per_hour: 1073.0,
        }
    }
}

impl LocalClock {
    /// Local solar hour in [0, 24).
    pub fn local_hour(&self, ts: &DateTime<Utc>, x_km: f64) -> f64 {
        let utc = ts.hour() as f64 + ts.minute() as f64 / 60.0;
        (utc + (x_km - self.reference_x_km) / self.km_per_hour).rem_euclid(24.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeatherParams {
    pub wind_correlation_length_km: f64,
    pub solar_correlation_length_km: f64,
    pub wind_mean_cf: f64,
    /// Standard deviation of the wind fluctuation, in capacity-factor units.
    pub wind_std: f64,
    /// Relative winter/summer swing of the mean wind capacity factor.
    pub wind_seasonal_amplitude: f64,
    /// Relative afternoon/night swing of the mean wind capacity factor.
    pub wind_diurnal_amplitude: f64,
    pub wind_autocorrelation_hours: f64,
    pub solar_peak_cf: f64,
    /// Relative summer/winter swing of the noon intensity.
    pub solar_seasonal_amplitude: f64,
    /// Half the summer/winter difference in day length, hours.
    pub solar_daylength_amplitude_hours: f64,
    /// Relative drop of noon intensity per 1000 km of northing.
    pub solar_north_gradient: f64,
    pub solar_cloud_std: f64,
    pub solar_autocorrelation_hours: f64,
    pub clock: LocalClock,
    /// Diagonal regularisation of the spatial kernels before factorisation.
    pub jitter: f64,
    pub start: DateTime<Utc>,
    pub seed: u64,
}

impl Default for WeatherParams {
    fn default() -> Self {
        Self {
            wind_correlation_length_km: 273.0,
            solar_correlation_length_km: 150.0,
            wind_mean_cf: 0.3,
            wind_std: 0.15,
            wind_seasonal_amplitude: 0.3,
            wind_diurnal_amplitude: 0.05,
            wind_autocorrelation_hours: 24.0,
            solar_peak_cf: 0.75,
            solar_seasonal_amplitude: 0.35,
            solar_daylength_amplitude_hours: 4.0,
            solar_north_gradient: 0.15,
            solar_cloud_std: 0.3,
            solar_autocorrelation_hours: 8.0,
            clock: LocalClock::default(),
            jitter: 1e-10,
            start: Utc.with_ymd_and_hms(2011, 1, 1, 0, 0, 0).unwrap(),
            seed: 0,
        }
    }
}

impl WeatherParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (
                "wind_correlation_length_km",
                self.wind_correlation_length_km,
            ),
            (
                "solar_correlation_length_km",
                self.solar_correlation_length_km,
            ),
            (
                "wind_autocorrelation_hours",
                self.wind_autocorrelation_hours,
            ),
            (
                "solar_autocorrelation_hours",
                self.solar_autocorrelation_hours,
            ),
            ("km_per_hour", self.clock.km_per_hour),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let unit = [
            ("wind_mean_cf", self.wind_mean_cf),
            ("solar_peak_cf", self.solar_peak_cf),
            ("wind_seasonal_amplitude", self.wind_seasonal_amplitude),
            ("wind_diurnal_amplitude", self.wind_diurnal_amplitude),
            ("solar_seasonal_amplitude", self.solar_seasonal_amplitude),
        ];
        for (name, v) in unit {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(format!(
                    "{name} must lie in [0, 1], got {v}"
                )));
            }
        }
        let nonneg = [
            ("wind_std", self.wind_std),
            ("solar_cloud_std", self.solar_cloud_std),
            ("solar_north_gradient", self.solar_north_gradient),
            ("jitter", self.jitter),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!(
                    "{name} must be nonnegative, got {v}"
                )));
            }
        }
        if !(0.0..12.0).contains(&self.solar_daylength_amplitude_hours) {
            return Err(Error::validation(
                "solar_daylength_amplitude_hours must lie in [0, 12)",
            ));
        }
        Ok(())
    }
}

/// Lower Cholesky factor of `exp(-d_ij / length) + jitter * I`.
fn kernel_factor(network: &Network, length_km: f64, jitter: f64) -> Result<DMatrix<f64>> {
    let nodes = network.nodes();
    let n = nodes.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let d = (nodes[i].x - nodes[j].x).hypot(nodes[i].y - nodes[j].y);
        (-d / length_km).exp() + if i == j { jitter } else { 0.0 }
    });
    Cholesky::new(k).map(|c| c.unpack()).ok_or_else(|| {
        Error::validation(format!(
            "spatial kernel (length {length_km} km) is not positive definite with jitter \
             {jitter}; coincident nodes need a larger jitter"
        ))
    })
}

/// Stationary AR(1) field, T x N, with unit marginal variance and spatial
/// covariance `factor factor^T`.
fn ar1_field(
    factor: &DMatrix<f64>,
    hours: usize,
    tau_hours: f64,
    rng: &mut ChaCha8Rng,
) -> DMatrix<f64> {
    let n = factor.nrows();
    let white = DMatrix::<f64>::from_fn(n, hours, |_, _| StandardNormal.sample(rng));
    let innov = factor * white;
    let rho = (-1.0 / tau_hours).exp();
    let kick = (1.0 - rho * rho).sqrt();
    let mut z = DMatrix::zeros(hours, n);
    for i in 0..n {
        z[(0, i)] = innov[(i, 0)];
    }
    for t in 1..hours {
        for i in 0..n {
            z[(t, i)] = rho * z[(t - 1, i)] + kick * innov[(i, t)];
        }
    }
    z
}

fn year_phase(ts: &DateTime<Utc>) -> f64 {
    let day = ts.ordinal0() as f64 + ts.hour() as f64 / 24.0;
    2.0 * std::f64::consts::PI * day / 365.25
}

/// Capacity factors for every node, both in [0, 1].
#[derive(Debug, Clone)]
pub struct Weather {
    pub wind_cf: TimeSeriesEnsemble,
    pub solar_cf: TimeSeriesEnsemble,
}

pub fn synth_weather(network: &Network, params: &WeatherParams, hours: usize) -> Result<Weather> {
    params.validate()?;
    if hours < 24 {
        return Err(Error::validation(format!(
            "weather synthesis needs at least 24 hours, got {hours}"
        )));
    }
    let n = network.node_count();
    let timestamps = TimeSeriesEnsemble::hourly_index(params.start, hours);
    let labels = network.node_ids();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(1);
    let wind_factor = kernel_factor(network, params.wind_correlation_length_km, params.jitter)?;
    let wind_z = ar1_field(
        &wind_factor,
        hours,
        params.wind_autocorrelation_hours,
        &mut rng,
    );

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(2);
    let solar_factor = kernel_factor(network, params.solar_correlation_length_km, params.jitter)?;
    let cloud_z = ar1_field(
        &solar_factor,
        hours,
        params.solar_autocorrelation_hours,
        &mut rng,
    );

    let y_min = network
        .nodes()
        .iter()
        .map(|p| p.y)
        .fold(f64::INFINITY, f64::min);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut wind = DMatrix::zeros(hours, n);
    let mut solar = DMatrix::zeros(hours, n);
    for (t, ts) in timestamps.iter().enumerate() {
        let phase = year_phase(ts);
        // peaks mid-January
        let winter = (phase - two_pi * 15.0 / 365.25).cos();
        // peaks at the June solstice
        let summer = (phase - two_pi * 172.0 / 365.25).cos();
        let daylen = 12.0 + params.solar_daylength_amplitude_hours * summer;
        let sunrise = 12.0 - daylen / 2.0;
        for (i, node) in network.nodes().iter().enumerate() {
            let h = params.clock.local_hour(ts, node.x);
            let level = params.wind_mean_cf
                * (1.0
                    + params.wind_seasonal_amplitude * winter
                    + params.wind_diurnal_amplitude * (two_pi * (h - 15.0) / 24.0).cos());
            wind[(t, i)] = (level + params.wind_std * wind_z[(t, i)]).clamp(0.0, 1.0);

            let arc = if h > sunrise && h < sunrise + daylen {
                (std::f64::consts::PI * (h - sunrise) / daylen).sin()
            } else {
                0.0
            };
            let latitude = (1.0 - params.solar_north_gradient * (node.y - y_min) / 1000.0).max(0.0);
            let peak =
                params.solar_peak_cf * (1.0 + params.solar_seasonal_amplitude * summer) * latitude;
            let cloud = (1.0 + params.solar_cloud_std * cloud_z[(t, i)]).max(0.0);
            solar[(t, i)] = (arc * peak * cloud).clamp(0.0, 1.0);
        }
    }
    Ok(Weather {
        wind_cf: TimeSeriesEnsemble::new(timestamps.clone(), labels.clone(), wind)?,
        solar_cf: TimeSeriesEnsemble::new(timestamps, labels, solar)?,
    })
}

/// Shape of the synthetic load: `mean_load * (1 + d * diurnal + w * weekly)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadProfile {
    pub diurnal_amplitude: f64,
    pub weekly_amplitude: f64,
}

impl Default for LoadProfile {
    fn default() -> Self {
        Self {
            diurnal_amplitude: 0.2,
            weekly_amplitude: 0.1,
        }
    }
}

/// Load series from node mean loads. The diurnal term bottoms out at 04:00
/// local time and peaks at 16:00; the weekly term is a zero-mean cosine over
/// the week starting Monday 00:00 UTC.
pub fn synth_load(
    network: &Network,
    timestamps: &[DateTime<Utc>],
    profile: &LoadProfile,
    clock: &LocalClock,
) -> Result<TimeSeriesEnsemble> {
    let n = network.node_count();
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut values = DMatrix::zeros(timestamps.len(), n);
    for (t, ts) in timestamps.iter().enumerate() {
        let week_hour = ts.weekday().num_days_from_monday() as f64 * 24.0 + ts.hour() as f64;
        let weekly = (two_pi * week_hour / 168.0).cos();
        for (i, node) in network.nodes().iter().enumerate() {
            let h = clock.local_hour(ts, node.x);
            let diurnal = -(two_pi * (h - 4.0) / 24.0).cos();
            values[(t, i)] = node.mean_load
                * (1.0 + profile.diurnal_amplitude * diurnal + profile.weekly_amplitude * weekly);
        }
    }
    TimeSeriesEnsemble::new(timestamps.to_vec(), network.node_ids(), values)
}
