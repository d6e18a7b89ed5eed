use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::Network;
use crate::series::TimeSeriesEnsemble;

/// Per-country wind share and the resulting per-node installed capacities.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareProfile {
    /// Fraction of mean load covered by wind, per country.
    pub alpha: BTreeMap<String, f64>,
    /// MW, in network node order.
    pub wind_capacity: Vec<f64>,
    pub solar_capacity: Vec<f64>,
}

impl ShareProfile {
    /// Wind, solar and total renewable generation, `g = C * cf`.
    pub fn generation(
        &self,
        wind_cf: &TimeSeriesEnsemble,
        solar_cf: &TimeSeriesEnsemble,
    ) -> Result<(TimeSeriesEnsemble, TimeSeriesEnsemble, TimeSeriesEnsemble)> {
        wind_cf.check_aligned(solar_cf)?;
        if wind_cf.width() != self.wind_capacity.len() {
            return Err(Error::DimensionMismatch {
                context: "capacity factors vs capacities",
                expected: self.wind_capacity.len(),
                found: wind_cf.width(),
            });
        }
        let scale = |cf: &DMatrix<f64>, cap: &[f64]| {
            let mut g = cf.clone();
            for (mut col, c) in g.column_iter_mut().zip(cap) {
                col *= *c;
            }
            g
        };
        let w = scale(wind_cf.values(), &self.wind_capacity);
        let s = scale(solar_cf.values(), &self.solar_capacity);
        let total = &w + &s;
        let labels = wind_cf.labels().to_vec();
        Ok((
            wind_cf.with_values(labels.clone(), w)?,
            wind_cf.with_values(labels.clone(), s)?,
            wind_cf.with_values(labels, total)?,
        ))
    }
}

/// Summed variance/covariance terms of one country's unit-share wind and
/// solar generation; the renewable variance is
/// `alpha^2 a + (1 - alpha)^2 b + 2 alpha (1 - alpha) c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShareTerms {
    pub wind_var: f64,
    pub solar_var: f64,
    pub cross_cov: f64,
}

impl ShareTerms {
    pub fn objective(&self, alpha: f64) -> f64 {
        let beta = 1.0 - alpha;
        alpha * alpha * self.wind_var
            + beta * beta * self.solar_var
            + 2.0 * alpha * beta * self.cross_cov
    }
}

/// Closed-form minimiser of [`ShareTerms::objective`] on [0, 1]. The
/// curvature `a + b - 2c` is a variance and cannot be negative for real
/// data; when it vanishes the cheaper endpoint wins, and a flat objective
/// returns 0.5.
pub fn optimal_share(terms: &ShareTerms) -> f64 {
    let denom = terms.wind_var + terms.solar_var - 2.0 * terms.cross_cov;
    let scale = terms.wind_var.abs() + terms.solar_var.abs();
    if denom > 1e-15 * scale {
        return ((terms.solar_var - terms.cross_cov) / denom).clamp(0.0, 1.0);
    }
    let (at0, at1) = (terms.objective(0.0), terms.objective(1.0));
    if at1 < at0 {
        1.0
    } else if at0 < at1 {
        0.0
    } else {
        0.5
    }
}

fn mean(col: nalgebra::DVectorView<'_, f64>) -> f64 {
    col.sum() / col.len() as f64
}

fn cov(a: nalgebra::DVectorView<'_, f64>, b: nalgebra::DVectorView<'_, f64>) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (a.len() as f64 - 1.0)
}

/// Chooses each country's wind share to minimise the summed variance of its
/// nodal renewable generation, with 100% average renewable coverage.
///
/// Within a country, capacity at node n is proportional to its mean capacity
/// factor, scaled so that mean wind generation equals `alpha_c` times mean
/// load (solar: `1 - alpha_c`).
pub fn optimize_shares(
    wind_cf: &TimeSeriesEnsemble,
    solar_cf: &TimeSeriesEnsemble,
    load: &TimeSeriesEnsemble,
    network: &Network,
) -> Result<ShareProfile> {
    wind_cf.check_aligned(solar_cf)?;
    wind_cf.check_aligned(load)?;
    if wind_cf.labels() != network.node_ids().as_slice() {
        return Err(Error::validation(
            "capacity factor columns are not in network node order",
        ));
    }
    if wind_cf.len() < 2 {
        return Err(Error::validation(
            "share optimisation needs at least 2 hours",
        ));
    }
    let n = network.node_count();
    let mut countries: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, node) in network.nodes().iter().enumerate() {
        countries.entry(node.country.as_str()).or_default().push(i);
    }
    let (w, s, l) = (wind_cf.values(), solar_cf.values(), load.values());
    let w_mean: Vec<f64> = w.column_iter().map(|c| mean(c.as_view())).collect();
    let s_mean: Vec<f64> = s.column_iter().map(|c| mean(c.as_view())).collect();
    let l_mean: Vec<f64> = l.column_iter().map(|c| mean(c.as_view())).collect();

    let mut alpha = BTreeMap::new();
    let mut wind_capacity = vec![0.0; n];
    let mut solar_capacity = vec![0.0; n];
    for (country, members) in countries {
        let load_sum: f64 = members.iter().map(|&i| l_mean[i]).sum();
        if !(load_sum > 0.0) {
            return Err(Error::validation(format!(
                "country `{country}` has no positive average load"
            )));
        }
        let w_norm: f64 = members.iter().map(|&i| w_mean[i] * w_mean[i]).sum();
        let s_norm: f64 = members.iter().map(|&i| s_mean[i] * s_mean[i]).sum();
        if w_norm <= 0.0 && s_norm <= 0.0 {
            return Err(Error::validation(format!(
                "country `{country}` has neither wind nor solar resource"
            )));
        }
        // capacity per unit share: C_n = k * <cf_n>, with k * sum <cf>^2 = sum <l>
        let kw = if w_norm > 0.0 { load_sum / w_norm } else { 0.0 };
        let ks = if s_norm > 0.0 { load_sum / s_norm } else { 0.0 };
        let a_c = if w_norm <= 0.0 {
            0.0
        } else if s_norm <= 0.0 {
            1.0
        } else {
            let mut terms = ShareTerms {
                wind_var: 0.0,
                solar_var: 0.0,
                cross_cov: 0.0,
            };
            for &i in &members {
                let (cw, cs) = (kw * w_mean[i], ks * s_mean[i]);
                let (wc, sc) = (w.column(i), s.column(i));
                terms.wind_var += cw * cw * cov(wc.as_view(), wc.as_view());
                terms.solar_var += cs * cs * cov(sc.as_view(), sc.as_view());
                terms.cross_cov += cw * cs * cov(wc.as_view(), sc.as_view());
            }
            optimal_share(&terms)
        };
        for &i in &members {
            wind_capacity[i] = a_c * kw * w_mean[i];
            solar_capacity[i] = (1.0 - a_c) * ks * s_mean[i];
        }
        alpha.insert(country.to_string(), a_c);
    }
    Ok(ShareProfile {
        alpha,
        wind_capacity,
        solar_capacity,
    })
}
