use log::warn;
use nalgebra::{DMatrix, DVector};

use super::network::Network;
use crate::error::{Error, Result};
use crate::linalg::pinv_sym;
use crate::series::TimeSeriesEnsemble;

/// Injections whose column sum exceeds this fraction of their absolute sum
/// are reported as unbalanced.
pub const BALANCE_TOLERANCE: f64 = 1e-9;

/// Incidence matrix K (N x L): +1 at the from-node, -1 at the to-node.
pub fn build_incidence(network: &Network) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(network.node_count(), network.line_count());
    for (l, &(a, b)) in network.line_ends().iter().enumerate() {
        k[(a, l)] = 1.0;
        k[(b, l)] = -1.0;
    }
    k
}

/// Nodal susceptance matrix `B = K diag(1/x) K^T`.
pub fn build_susceptance(network: &Network) -> Result<DMatrix<f64>> {
    network.check_connected()?;
    let n = network.node_count();
    let mut b = DMatrix::zeros(n, n);
    for (line, &(i, j)) in network.lines().iter().zip(network.line_ends()) {
        let y = 1.0 / line.reactance;
        b[(i, i)] += y;
        b[(j, j)] += y;
        b[(i, j)] -= y;
        b[(j, i)] -= y;
    }
    Ok(b)
}

/// Linear map from nodal injections to line flows, `H = Omega K^T B^+`,
/// together with the pieces it is assembled from.
#[derive(Debug, Clone)]
pub struct PtdfMatrix {
    node_ids: Vec<String>,
    line_ids: Vec<String>,
    h: DMatrix<f64>,
    omega: DVector<f64>,
    incidence: DMatrix<f64>,
    susceptance: DMatrix<f64>,
    b_pinv: DMatrix<f64>,
}

impl PtdfMatrix {
    /// L x N.
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// Diagonal of Omega: inverse line reactances.
    pub fn omega(&self) -> &DVector<f64> {
        &self.omega
    }

    pub fn omega_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.omega)
    }

    /// N x L.
    pub fn incidence(&self) -> &DMatrix<f64> {
        &self.incidence
    }

    pub fn susceptance(&self) -> &DMatrix<f64> {
        &self.susceptance
    }

    pub fn b_pinv(&self) -> &DMatrix<f64> {
        &self.b_pinv
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn line_ids(&self) -> &[String] {
        &self.line_ids
    }

    pub fn node_count(&self) -> usize {
        self.h.ncols()
    }

    pub fn line_count(&self) -> usize {
        self.h.nrows()
    }

    /// Flow vector for one injection snapshot.
    pub fn flows_for(&self, injection: &DVector<f64>) -> Result<DVector<f64>> {
        if injection.len() != self.node_count() {
            return Err(Error::DimensionMismatch {
                context: "injection vector",
                expected: self.node_count(),
                found: injection.len(),
            });
        }
        Ok(&self.h * injection)
    }
}

pub fn build_ptdf(network: &Network) -> Result<PtdfMatrix> {
    let susceptance = build_susceptance(network)?;
    let incidence = build_incidence(network);
    let omega = DVector::from_iterator(
        network.line_count(),
        network.lines().iter().map(|l| 1.0 / l.reactance),
    );
    let b_pinv = pinv_sym(&susceptance)?;
    let mut h = incidence.transpose() * &b_pinv;
    for (mut row, w) in h.row_iter_mut().zip(omega.iter()) {
        row *= *w;
    }
    Ok(PtdfMatrix {
        node_ids: network.node_ids(),
        line_ids: network.line_ids(),
        h,
        omega,
        incidence,
        susceptance,
        b_pinv,
    })
}

/// Largest `|sum_n p_n(t)| / sum_n |p_n(t)|` over all snapshots (0 for
/// all-zero snapshots).
pub fn max_relative_imbalance(values: &DMatrix<f64>) -> f64 {
    values
        .row_iter()
        .map(|r| {
            let abs: f64 = r.iter().map(|v| v.abs()).sum();
            if abs == 0.0 {
                0.0
            } else {
                r.sum().abs() / abs
            }
        })
        .fold(0.0, f64::max)
}

/// `f(t) = H p(t)` for every snapshot. Injection columns must follow the
/// PTDF node order. Unbalanced snapshots are logged, not rejected.
pub fn compute_flows(
    ptdf: &PtdfMatrix,
    injections: &TimeSeriesEnsemble,
) -> Result<TimeSeriesEnsemble> {
    if injections.width() != ptdf.node_count() {
        return Err(Error::DimensionMismatch {
            context: "injection columns vs PTDF nodes",
            expected: ptdf.node_count(),
            found: injections.width(),
        });
    }
    if injections.labels() != ptdf.node_ids() {
        return Err(Error::validation(
            "injection columns are not in network node order",
        ));
    }
    let imbalance = max_relative_imbalance(injections.values());
    if imbalance > BALANCE_TOLERANCE {
        warn!("injections are unbalanced: max relative residual {imbalance:.3e}");
    }
    let flows = injections.values() * ptdf.h().transpose();
    injections.with_values(ptdf.line_ids().to_vec(), flows)
}
