//! Principal component analysis of time-series ensembles.

use chrono::{DateTime, Timelike, Utc};
use nalgebra::{DMatrix, DVector};
use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, sym_eigen};
use crate::series::TimeSeriesEnsemble;

pub const DEFAULT_THRESHOLD: f64 = 0.95;

#[derive(Debug, Clone)]
pub struct PcaResult {
    /// Column means of the data, when the result came from a series.
    pub mean: Option<DVector<f64>>,
    /// Descending, nonnegative.
    pub eigenvalues: DVector<f64>,
    /// `eigenvalues / trace`; all zero when the trace is zero.
    pub normalized_eigenvalues: DVector<f64>,
    /// Principal axes as orthonormal columns.
    pub axes: DMatrix<f64>,
}

impl PcaResult {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.sum()
    }

    pub fn axis(&self, k: usize) -> DVector<f64> {
        self.axes.column(k).into_owned()
    }

    /// K such that the first K axes explain at least `threshold` of the variance.
    pub fn count_k(&self, threshold: f64) -> Result<usize> {
        count_k(self.normalized_eigenvalues.as_slice(), threshold)
    }
}

/// Column-centred data matrix.
fn centered(values: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let t = values.nrows() as f64;
    let mean = DVector::from_iterator(values.ncols(), values.column_iter().map(|c| c.sum() / t));
    let mut x = values.clone();
    for (mut col, m) in x.column_iter_mut().zip(mean.iter()) {
        col.add_scalar_mut(-m);
    }
    (x, mean)
}

/// Sample covariance (divisor T-1) of the columns of a T x D matrix.
pub fn covariance_of(values: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if values.nrows() < 2 {
        return Err(Error::validation(format!(
            "covariance needs at least 2 samples, got {}",
            values.nrows()
        )));
    }
    check_finite(values, "covariance input")?;
    let (x, _) = centered(values);
    let mut c = x.tr_mul(&x) / (values.nrows() - 1) as f64;
    // exact symmetry
    for i in 0..c.nrows() {
        for j in 0..i {
            let v = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

pub fn covariance(series: &TimeSeriesEnsemble) -> Result<DMatrix<f64>> {
    covariance_of(series.values())
}

/// Flips each column so that its largest-magnitude entry is positive. Among
/// entries tied in magnitude (to 1e-9 relative) the first one decides.
pub fn apply_sign_convention(axes: &mut DMatrix<f64>) {
    for j in 0..axes.ncols() {
        let mut col = axes.column(j).into_owned();
        apply_sign_convention_vec(&mut col);
        axes.set_column(j, &col);
    }
}

/// Vector form of [`apply_sign_convention`].
pub fn apply_sign_convention_vec(v: &mut DVector<f64>) {
    let m = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        return;
    }
    if let Some(x) = v.iter().find(|x| x.abs() >= m * (1.0 - 1e-9)) {
        if *x < 0.0 {
            v.neg_mut();
        }
    }
}

/// Full eigendecomposition of a covariance matrix (symmetrized first).
pub fn pca(cov: &DMatrix<f64>) -> Result<PcaResult> {
    check_finite(cov, "PCA input")?;
    let eig = sym_eigen(cov)?;
    let eigenvalues = eig.values.map(|v| v.max(0.0));
    let trace = eigenvalues.sum();
    let normalized_eigenvalues = if trace > 0.0 {
        &eigenvalues / trace
    } else {
        DVector::zeros(eigenvalues.len())
    };
    let mut axes = eig.vectors;
    apply_sign_convention(&mut axes);
    Ok(PcaResult {
        mean: None,
        eigenvalues,
        normalized_eigenvalues,
        axes,
    })
}

/// `beta_k(t) = (x(t) - <x>) . PA_k` for every axis; T x D.
pub fn amplitudes(series: &TimeSeriesEnsemble, pca: &PcaResult) -> Result<DMatrix<f64>> {
    amplitudes_of(series.values(), pca)
}

pub fn amplitudes_of(values: &DMatrix<f64>, pca: &PcaResult) -> Result<DMatrix<f64>> {
    if values.ncols() != pca.axes.nrows() {
        return Err(Error::DimensionMismatch {
            context: "series width vs principal axes",
            expected: pca.axes.nrows(),
            found: values.ncols(),
        });
    }
    let (x, _) = centered(values);
    Ok(x * &pca.axes)
}

/// Covariance, PCA and amplitudes of a series in one go.
pub fn analyze(series: &TimeSeriesEnsemble) -> Result<(PcaResult, DMatrix<f64>)> {
    let cov = covariance(series)?;
    let mut result = pca(&cov)?;
    let (_, mean) = centered(series.values());
    result.mean = Some(mean);
    let beta = amplitudes(series, &result)?;
    Ok((result, beta))
}

/// Smallest K with `sum_{k<=K} normalized[k] >= threshold`. Returns the full
/// length if rounding keeps the total just below the threshold.
pub fn count_k(normalized: &[f64], threshold: f64) -> Result<usize> {
    if normalized.is_empty() {
        return Err(Error::validation("no eigenvalues to count"));
    }
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::validation(format!(
            "variance threshold must be in (0, 1], got {threshold}"
        )));
    }
    let mut acc = 0.0;
    for (k, v) in normalized.iter().enumerate() {
        acc += v;
        if acc >= threshold {
            return Ok(k + 1);
        }
    }
    Ok(normalized.len())
}

/// One-sided periodogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram {
    /// Cycles per hour, 0 up to Nyquist.
    pub frequency: Vec<f64>,
    pub power: Vec<f64>,
}

impl Periodogram {
    /// Frequency and power of the strongest non-zero-frequency bin.
    pub fn peak(&self) -> Option<(f64, f64)> {
        self.frequency.iter().zip(&self.power).skip(1).fold(
            None,
            |best: Option<(f64, f64)>, (f, p)| match best {
                Some((_, bp)) if bp >= *p => best,
                _ => Some((*f, *p)),
            },
        )
    }
}

/// Plain periodogram `|DFT|^2 / T` of the mean-removed signal, folded to one
/// side so that the powers sum to `sum (x - mean)^2`.
pub fn psd(amplitude: &[f64], sample_interval_hours: f64) -> Result<Periodogram> {
    let t = amplitude.len();
    if t < 4 {
        return Err(Error::validation(format!(
            "periodogram needs at least 4 samples, got {t}"
        )));
    }
    if !(sample_interval_hours > 0.0) {
        return Err(Error::validation("sample interval must be positive"));
    }
    if amplitude.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("periodogram input"));
    }
    let mean = amplitude.iter().sum::<f64>() / t as f64;
    let mut buf: Vec<Complex<f64>> = amplitude
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(t).process(&mut buf);
    let half = t / 2;
    let mut frequency = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, c) in buf.iter().take(half + 1).enumerate() {
        let mut p = c.norm_sqr() / t as f64;
        let nyquist = t.is_multiple_of(2) && k == half;
        if k != 0 && !nyquist {
            p *= 2.0;
        }
        frequency.push(k as f64 / (t as f64 * sample_interval_hours));
        power.push(p);
    }
    Ok(Periodogram { frequency, power })
}

/// Mean amplitude for each UTC hour of day; `None` where no sample falls in
/// that hour.
pub fn daytime_profile(
    amplitude: &[f64],
    timestamps: &[DateTime<Utc>],
) -> Result<Vec<Option<f64>>> {
    if amplitude.len() != timestamps.len() {
        return Err(Error::DimensionMismatch {
            context: "daytime profile samples vs timestamps",
            expected: timestamps.len(),
            found: amplitude.len(),
        });
    }
    let mut sum = [0.0; 24];
    let mut count = [0usize; 24];
    for (v, ts) in amplitude.iter().zip(timestamps) {
        let h = ts.hour() as usize;
        sum[h] += v;
        count[h] += 1;
    }
    Ok((0..24)
        .map(|h| (count[h] > 0).then(|| sum[h] / count[h] as f64))
        .collect())
}
