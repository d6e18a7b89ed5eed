use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::series::TimeSeriesEnsemble;

/// `Delta_n(t) = g_n(t) - l_n(t)`.
pub fn compute_mismatch(
    generation: &TimeSeriesEnsemble,
    load: &TimeSeriesEnsemble,
) -> Result<TimeSeriesEnsemble> {
    generation.check_aligned(load)?;
    generation.with_values(
        generation.labels().to_vec(),
        generation.values() - load.values(),
    )
}

#[derive(Debug, Clone)]
pub struct Balanced {
    /// Curtailment (positive) and backup (negative) per node.
    pub balancing: TimeSeriesEnsemble,
    /// Net injections into the network; each row sums to zero.
    pub injections: TimeSeriesEnsemble,
}

/// Local balancing: every node curtails its own surplus, and the total
/// deficit is covered by backup shared in proportion to mean load.
///
/// `b_n = Delta_n^+ - (<l_n> / sum_m <l_m>) Delta^-`, `p_n = Delta_n - b_n`,
/// where `Delta^- = sum_n max(0, -Delta_n)`. The curtailment term
/// `(Delta_n^+ / Delta^+) Delta^+` is written in its reduced form.
pub fn apply_balancing(mismatch: &TimeSeriesEnsemble, mean_loads: &[f64]) -> Result<Balanced> {
    let n = mismatch.width();
    if mean_loads.len() != n {
        return Err(Error::DimensionMismatch {
            context: "mean loads vs mismatch columns",
            expected: n,
            found: mean_loads.len(),
        });
    }
    if mean_loads.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::validation(
            "mean loads must be finite and nonnegative",
        ));
    }
    let total: f64 = mean_loads.iter().sum();
    if !(total > 0.0) {
        return Err(Error::validation(
            "mean loads sum to zero; backup cannot be allocated",
        ));
    }
    let share: Vec<f64> = mean_loads.iter().map(|l| l / total).collect();
    let delta = mismatch.values();
    let t = delta.nrows();
    let mut b = DMatrix::zeros(t, n);
    let mut p = DMatrix::zeros(t, n);
    for r in 0..t {
        let deficit: f64 = delta.row(r).iter().map(|d| (-d).max(0.0)).sum();
        for c in 0..n {
            let d = delta[(r, c)];
            let bal = d.max(0.0) - share[c] * deficit;
            b[(r, c)] = bal;
            p[(r, c)] = d - bal;
        }
    }
    let labels = mismatch.labels().to_vec();
    Ok(Balanced {
        balancing: mismatch.with_values(labels.clone(), b)?,
        injections: mismatch.with_values(labels, p)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use chrono::{TimeZone, Utc};

    fn one_row(v: &[f64]) -> TimeSeriesEnsemble {
        let start = Utc.with_ymd_and_hms(2011, 1, 1, 0, 0, 0).unwrap();
        TimeSeriesEnsemble::new(
            vec![start],
            (0..v.len()).map(|i| format!("n{i}")).collect(),
            DMatrix::from_row_slice(1, v.len(), v),
        )
        .unwrap()
    }

    #[test]
    fn mismatch_arithmetic() {
        let d = compute_mismatch(&one_row(&[3.0, 1.0]), &one_row(&[1.0, 2.0])).unwrap();
        assert_eq!(d.values().as_slice(), &[2.0, -1.0]);
        let zero = compute_mismatch(&one_row(&[0.0, 0.0]), &one_row(&[1.0, 2.0])).unwrap();
        assert_eq!(zero.values().as_slice(), &[-1.0, -2.0]);
    }

    #[test]
    fn mismatch_requires_alignment() {
        assert!(compute_mismatch(&one_row(&[1.0]), &one_row(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn hand_fixture() {
        let out = apply_balancing(&one_row(&[2.0, -1.0, -1.0]), &[1.0, 1.0, 1.0]).unwrap();
        let b = out.balancing.values();
        let p = out.injections.values();
        for (x, e) in b.iter().zip([4.0 / 3.0, -2.0 / 3.0, -2.0 / 3.0]) {
            assert_relative_eq!(*x, e, epsilon = 1e-15);
        }
        for (x, e) in p.iter().zip([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]) {
            assert_relative_eq!(*x, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn zero_mismatch_gives_zero() {
        let out = apply_balancing(&one_row(&[0.0, 0.0]), &[1.0, 3.0]).unwrap();
        assert!(out.balancing.values().iter().all(|v| *v == 0.0));
        assert!(out.injections.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_loads_rejected() {
        assert!(apply_balancing(&one_row(&[1.0, -1.0]), &[0.0, 0.0]).is_err());
        assert!(apply_balancing(&one_row(&[1.0, -1.0]), &[1.0]).is_err());
    }
}
