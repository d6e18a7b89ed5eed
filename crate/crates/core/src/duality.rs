//! How injection statistics and network topology combine into flow
//! statistics.
//!
//! With `f = H p`, the flow covariance is `Sigma_f = H Sigma_p H^T`. Its
//! nonzero spectrum and principal axes follow from the N x N matrix
//! `M = Sigma_p T`, where `T = H^T H` depends on the network only: if
//! `M v = eta v` then `Sigma_f (H v) = eta (H v)`.
//!
//! `M` is not symmetric. Its eigenpairs are computed from the symmetric
//! matrix `S T S` with `S = Sigma_p^(1/2)`: if `S T S w = eta w` then
//! `v = S w` satisfies `M v = eta v`, and eta is real and nonnegative.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{
    build_ptdf, coarsen, compute_flows, mean_neighbor_distance, CoarseningResult, Network,
    PtdfMatrix,
};
use crate::linalg::{
    check_finite, max_abs, orthonormality_error, psd_sqrt, sym_eigen, zero_cutoff, SymEigen,
};
use crate::pca::{self, PcaResult};
use crate::series::TimeSeriesEnsemble;

fn check_square(m: &DMatrix<f64>, n: usize, context: &'static str) -> Result<()> {
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::DimensionMismatch {
            context,
            expected: n,
            found: if m.nrows() != n { m.nrows() } else { m.ncols() },
        });
    }
    Ok(())
}

/// `Sigma_f = H Sigma_p H^T`, L x L.
pub fn flow_covariance(ptdf: &PtdfMatrix, injection_cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_square(
        injection_cov,
        ptdf.node_count(),
        "injection covariance vs PTDF nodes",
    )?;
    check_finite(injection_cov, "injection covariance")?;
    let h = ptdf.h();
    let c = h * injection_cov * h.transpose();
    Ok(crate::linalg::symmetrize(&c))
}

#[derive(Debug, Clone)]
pub struct SpectralDuality {
    pub injection_cov: DMatrix<f64>,
    /// `T = H^T H`.
    pub t_matrix: DMatrix<f64>,
    /// `M = Sigma_p T`.
    pub m_matrix: DMatrix<f64>,
    /// Eigenvalues of M, descending, nonnegative.
    pub eta: DVector<f64>,
    /// Unit-norm eigenvectors of M as columns (zero columns where eta
    /// vanishes and `S w` does too).
    pub v: DMatrix<f64>,
    /// Eigenpairs `(mu_m, s_m)` of T, descending.
    pub t_eigen: SymEigen,
}

impl SpectralDuality {
    pub fn node_count(&self) -> usize {
        self.t_matrix.nrows()
    }

    pub fn eta_cutoff(&self) -> f64 {
        zero_cutoff(
            self.node_count(),
            self.eta.iter().fold(0.0, |m: f64, v| m.max(v.abs())),
        )
    }

    pub fn m_rank(&self) -> usize {
        let cut = self.eta_cutoff();
        self.eta.iter().filter(|e| **e > cut).count()
    }

    pub fn t_rank(&self) -> usize {
        self.t_eigen.rank()
    }

    pub fn trace_m(&self) -> f64 {
        self.m_matrix.trace()
    }
}

pub fn build_duality(ptdf: &PtdfMatrix, injection_cov: &DMatrix<f64>) -> Result<SpectralDuality> {
    let n = ptdf.node_count();
    check_square(injection_cov, n, "injection covariance vs PTDF nodes")?;
    check_finite(injection_cov, "injection covariance")?;
    let cov = crate::linalg::symmetrize(injection_cov);
    let t_matrix = crate::linalg::symmetrize(&(ptdf.h().transpose() * ptdf.h()));
    let m_matrix = &cov * &t_matrix;
    let sqrt = psd_sqrt(&cov)?;
    let sym = &sqrt * &t_matrix * &sqrt;
    let eig = sym_eigen(&sym)?;
    let eta = eig.values.map(|e| e.max(0.0));
    let mut v = &sqrt * &eig.vectors;
    for mut col in v.column_iter_mut() {
        let norm = col.norm();
        if norm > 0.0 {
            col /= norm;
        }
    }
    let t_eigen = sym_eigen(&t_matrix)?;
    check_finite(&m_matrix, "M matrix")?;
    check_finite(&v, "M eigenvectors")?;
    Ok(SpectralDuality {
        injection_cov: cov,
        t_matrix,
        m_matrix,
        eta,
        v,
        t_eigen,
    })
}

/// Flow principal axes obtained by mapping eigenvectors of M through H.
#[derive(Debug, Clone)]
pub struct FlowPcs {
    /// Unit L-vectors as columns, one per nonzero eta.
    pub axes: DMatrix<f64>,
    pub eta: DVector<f64>,
    /// `eta_k / tr(M)`.
    pub normalized: DVector<f64>,
    /// `||Sigma_f a_k - eta_k a_k|| / eta_1` for each unit axis `a_k`.
    pub residuals: Vec<f64>,
}

impl FlowPcs {
    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

pub fn flow_pcs_from_m(duality: &SpectralDuality, ptdf: &PtdfMatrix) -> Result<FlowPcs> {
    let n = duality.node_count();
    if ptdf.node_count() != n {
        return Err(Error::DimensionMismatch {
            context: "duality vs PTDF nodes",
            expected: n,
            found: ptdf.node_count(),
        });
    }
    let cut = duality.eta_cutoff();
    let keep: Vec<usize> = (0..n).filter(|&k| duality.eta[k] > cut).collect();
    let h = ptdf.h();
    let h_scale = h.norm();
    let sigma_f = flow_covariance(ptdf, &duality.injection_cov)?;
    let trace_m = duality.trace_m();
    let eta1 = duality.eta.get(0).copied().unwrap_or(0.0);
    let mut axes = DMatrix::zeros(ptdf.line_count(), keep.len());
    let mut residuals = Vec::with_capacity(keep.len());
    for (j, &k) in keep.iter().enumerate() {
        let hv = h * duality.v.column(k);
        let norm = hv.norm();
        if norm <= f64::EPSILON.sqrt() * h_scale {
            return Err(Error::invariant(
                "flow axis from M eigenvector",
                format!(
                    "||H v_{}|| = {norm:.3e} vanishes while eta = {:.3e} is nonzero",
                    k + 1,
                    duality.eta[k]
                ),
            ));
        }
        let mut axis = hv / norm;
        crate::pca::apply_sign_convention_vec(&mut axis);
        let r = (&sigma_f * &axis - &axis * duality.eta[k]).norm() / eta1;
        residuals.push(r);
        axes.set_column(j, &axis);
    }
    let eta = DVector::from_iterator(keep.len(), keep.iter().map(|&k| duality.eta[k]));
    let normalized = &eta / trace_m;
    Ok(FlowPcs {
        axes,
        eta,
        normalized,
        residuals,
    })
}

/// Partial sums of the flow spectrum with their majorization sandwich, all
/// relative to `tr(Sigma_f)`. Index K-1 holds the sums over the first K terms.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorizationBounds {
    pub partial_sums: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `tr(Sigma_p T) = tr(Sigma_f)`, the normalisation.
    pub trace: f64,
    /// True when both matrices annihilate the same vector, so that only
    /// their N-1 nonzero eigenvalues enter the products.
    pub restricted: bool,
}

impl MajorizationBounds {
    /// Largest violation of `lower <= partial <= upper` (0 when the
    /// chain holds).
    pub fn max_violation(&self) -> f64 {
        self.partial_sums
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(p, (lo, up))| (lo - p).max(p - up).max(0.0))
            .fold(0.0, f64::max)
    }
}

fn cumulative(values: &[f64], scale: f64) -> Vec<f64> {
    let mut acc = 0.0;
    values
        .iter()
        .map(|v| {
            acc += v;
            acc / scale
        })
        .collect()
}

fn sorted_desc(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Lower bound from pairing the injection spectrum (descending) with the
/// topology spectrum (ascending), upper bound from pairing both descending.
///
/// When both matrices have rank N-1 with a common null vector (balanced
/// injections on a connected network) they act on the same N-1 dimensional
/// subspace and only the nonzero eigenvalues are paired. Otherwise the full
/// spectra, zeros included, are used.
pub fn majorization_bounds(
    injection_cov: &DMatrix<f64>,
    t_matrix: &DMatrix<f64>,
) -> Result<MajorizationBounds> {
    let n = t_matrix.nrows();
    check_square(t_matrix, n, "topological matrix")?;
    check_square(
        injection_cov,
        n,
        "injection covariance vs topological matrix",
    )?;
    let cov_eig = sym_eigen(injection_cov)?;
    let t_eig = sym_eigen(t_matrix)?;
    let (r_p, r_t) = (cov_eig.rank(), t_eig.rank());
    let need = n.saturating_sub(1);
    if r_p < need || r_t < need || r_p == 0 {
        return Err(Error::validation(format!(
            "majorization bounds need rank >= {need}: injection covariance has rank {r_p}, \
             topological matrix rank {r_t}"
        )));
    }
    let restricted = r_p == need
        && r_t == need
        && n > 1
        && cov_eig
            .vectors
            .column(n - 1)
            .dot(&t_eig.vectors.column(n - 1))
            .abs()
            >= 1.0 - 1e-8;
    let len = if restricted { need } else { n };
    let p: Vec<f64> = cov_eig
        .values
        .iter()
        .take(len)
        .map(|v| v.max(0.0))
        .collect();
    let t_desc: Vec<f64> = t_eig.values.iter().take(len).map(|v| v.max(0.0)).collect();
    let t_asc: Vec<f64> = t_desc.iter().rev().copied().collect();

    let sqrt = psd_sqrt(injection_cov)?;
    let flow_eig = sym_eigen(&(&sqrt * t_matrix * &sqrt))?;
    let flow: Vec<f64> = flow_eig
        .values
        .iter()
        .take(len)
        .map(|v| v.max(0.0))
        .collect();
    let trace = (injection_cov * t_matrix).trace();
    if !(trace > 0.0) {
        return Err(Error::validation("flow covariance has zero trace"));
    }
    let lower = sorted_desc(p.iter().zip(&t_asc).map(|(a, b)| a * b).collect());
    let upper = sorted_desc(p.iter().zip(&t_desc).map(|(a, b)| a * b).collect());
    Ok(MajorizationBounds {
        partial_sums: cumulative(&flow, trace),
        lower: cumulative(&lower, trace),
        upper: cumulative(&upper, trace),
        trace,
        restricted,
    })
}

/// `O_km = lambda_k mu_m (PA_k . s_m)^2`; rows follow injection PCs, columns
/// follow topology eigenvectors.
#[derive(Debug, Clone)]
pub struct OverlapMatrix {
    pub entries: DMatrix<f64>,
    pub injection_eigenvalues: DVector<f64>,
    pub topology_eigenvalues: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapEntry {
    /// 1-based.
    pub rank: usize,
    /// 1-based injection PC index.
    pub k: usize,
    /// 1-based topology eigenvector index.
    pub m: usize,
    pub value: f64,
    /// `O_km / sum O`.
    pub normalized: f64,
    /// `lambda_k mu_m / sum O`.
    pub pure_product_normalized: f64,
}

impl OverlapMatrix {
    pub fn total(&self) -> f64 {
        self.entries.sum()
    }

    /// The `r` largest entries, descending; ties broken by (k, m).
    pub fn top(&self, r: usize) -> Vec<OverlapEntry> {
        let total = self.total();
        let mut all: Vec<(usize, usize, f64)> = Vec::with_capacity(self.entries.len());
        for k in 0..self.entries.nrows() {
            for m in 0..self.entries.ncols() {
                all.push((k, m, self.entries[(k, m)]));
            }
        }
        all.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        all.into_iter()
            .take(r)
            .enumerate()
            .map(|(i, (k, m, value))| OverlapEntry {
                rank: i + 1,
                k: k + 1,
                m: m + 1,
                value,
                normalized: value / total,
                pure_product_normalized: self.injection_eigenvalues[k]
                    * self.topology_eigenvalues[m]
                    / total,
            })
            .collect()
    }
}

pub const ORTHONORMAL_TOLERANCE: f64 = 1e-8;

pub fn overlap_matrix(injection_pca: &PcaResult, t_eigen: &SymEigen) -> Result<OverlapMatrix> {
    let n = injection_pca.dim();
    if t_eigen.dim() != n {
        return Err(Error::DimensionMismatch {
            context: "injection PCA vs topological matrix",
            expected: n,
            found: t_eigen.dim(),
        });
    }
    for (name, basis) in [
        ("injection axes", &injection_pca.axes),
        ("topology eigenvectors", &t_eigen.vectors),
    ] {
        let err = orthonormality_error(basis);
        if err > ORTHONORMAL_TOLERANCE {
            return Err(Error::invariant(
                "orthonormal basis",
                format!("{name} deviate from orthonormality by {err:.3e}"),
            ));
        }
    }
    let proj = injection_pca.axes.transpose() * &t_eigen.vectors;
    let lambda = &injection_pca.eigenvalues;
    let mu = t_eigen.values.map(|v| v.max(0.0));
    let entries = DMatrix::from_fn(n, n, |k, m| lambda[k] * mu[m] * proj[(k, m)] * proj[(k, m)]);
    Ok(OverlapMatrix {
        entries,
        injection_eigenvalues: lambda.clone(),
        topology_eigenvalues: mu,
    })
}

/// The four traces that must agree: `tr(Sigma_p T)`, `tr(M)`, `tr(Sigma_f)`
/// and the overlap-matrix total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceChain {
    pub sigma_p_t: f64,
    pub m: f64,
    pub sigma_f: f64,
    pub overlap: f64,
}

impl TraceChain {
    pub fn compute(
        duality: &SpectralDuality,
        sigma_f: &DMatrix<f64>,
        overlap: &OverlapMatrix,
    ) -> Self {
        // Frobenius inner product of two symmetric matrices
        let sigma_p_t = duality
            .injection_cov
            .iter()
            .zip(duality.t_matrix.iter())
            .map(|(a, b)| a * b)
            .sum();
        Self {
            sigma_p_t,
            m: duality.trace_m(),
            sigma_f: sigma_f.trace(),
            overlap: overlap.total(),
        }
    }

    pub fn values(&self) -> [f64; 4] {
        [self.sigma_p_t, self.m, self.sigma_f, self.overlap]
    }

    /// Largest pairwise `|a - b| / max(|a|, |b|)`.
    pub fn max_relative_residual(&self) -> f64 {
        let v = self.values();
        let mut worst: f64 = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                let scale = v[i].abs().max(v[j].abs());
                if scale > 0.0 {
                    worst = worst.max((v[i] - v[j]).abs() / scale);
                }
            }
        }
        worst
    }
}

/// Unweighted graph Laplacian of the network topology.
pub fn graph_laplacian(network: &Network) -> DMatrix<f64> {
    let n = network.node_count();
    let mut l = DMatrix::zeros(n, n);
    for &(a, b) in network.line_ends() {
        l[(a, a)] += 1.0;
        l[(b, b)] += 1.0;
        l[(a, b)] -= 1.0;
        l[(b, a)] -= 1.0;
    }
    l
}

/// Pseudoinverse of a connected graph's Laplacian by the rank-one shift
/// `(L + J/N)^-1 - J/N`, independent of any eigen-solve.
pub fn laplacian_pinv(laplacian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = laplacian.nrows();
    let j = DMatrix::from_element(n, n, 1.0 / n as f64);
    let inv = (laplacian + &j)
        .try_inverse()
        .ok_or_else(|| Error::validation("Laplacian shift is singular; graph disconnected?"))?;
    Ok(inv - j)
}

/// `max|T - L^+| / max|L^+|` for networks with unit reactances, `None`
/// otherwise.
pub fn laplacian_identity_error(network: &Network, t_matrix: &DMatrix<f64>) -> Result<Option<f64>> {
    if !network.has_unit_reactances() {
        return Ok(None);
    }
    network.check_connected()?;
    let lp = laplacian_pinv(&graph_laplacian(network))?;
    Ok(Some(max_abs(&(t_matrix - &lp)) / max_abs(&lp)))
}

/// One row of the network-size scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanRow {
    pub n: usize,
    pub k_injection: usize,
    pub k_flow: usize,
    pub xi_km: f64,
}

/// Everything computed for one coarsening size.
#[derive(Debug, Clone)]
pub struct SizeAnalysis {
    pub coarsening: CoarseningResult,
    pub injections: TimeSeriesEnsemble,
    pub ptdf: PtdfMatrix,
    pub injection_cov: DMatrix<f64>,
    pub injection_pca: PcaResult,
    pub flow_pca: PcaResult,
    pub row: ScanRow,
}

/// Sums injection columns over clusters. Single-member clusters are copied.
pub fn aggregate_series(
    series: &TimeSeriesEnsemble,
    coarsening: &CoarseningResult,
) -> Result<TimeSeriesEnsemble> {
    if series.width() != coarsening.assignment.len() {
        return Err(Error::DimensionMismatch {
            context: "series columns vs coarsened nodes",
            expected: coarsening.assignment.len(),
            found: series.width(),
        });
    }
    let values = series.values();
    let mut out = DMatrix::zeros(values.nrows(), coarsening.target_n);
    for (c, members) in coarsening.members().iter().enumerate() {
        let mut col = values.column(members[0]).into_owned();
        for &i in &members[1..] {
            col += values.column(i);
        }
        out.set_column(c, &col);
    }
    series.with_values(coarsening.network.node_ids(), out)
}

pub fn analyze_size(
    network: &Network,
    size: usize,
    injections: &TimeSeriesEnsemble,
    seed: u64,
    threshold: f64,
) -> Result<SizeAnalysis> {
    if injections.labels() != network.node_ids().as_slice() {
        return Err(Error::validation(
            "injection columns are not in network node order",
        ));
    }
    let coarsening = coarsen(network, size, seed)?;
    let injections = aggregate_series(injections, &coarsening)?;
    let ptdf = build_ptdf(&coarsening.network)?;
    let injection_cov = pca::covariance(&injections)?;
    let injection_pca = pca::pca(&injection_cov)?;
    let flows = compute_flows(&ptdf, &injections)?;
    let flow_pca = pca::pca(&pca::covariance(&flows)?)?;
    let row = ScanRow {
        n: size,
        k_injection: injection_pca.count_k(threshold)?,
        k_flow: flow_pca.count_k(threshold)?,
        xi_km: mean_neighbor_distance(&coarsening.network),
    };
    Ok(SizeAnalysis {
        coarsening,
        injections,
        ptdf,
        injection_cov,
        injection_pca,
        flow_pca,
        row,
    })
}

/// K at the variance threshold for injections and flows at each network
/// size. Sizes are processed in parallel; rows come back in input order.
pub fn scan_sizes(
    network: &Network,
    sizes: &[usize],
    injections: &TimeSeriesEnsemble,
    seed: u64,
    threshold: f64,
) -> Result<Vec<ScanRow>> {
    sizes
        .par_iter()
        .map(|&n| analyze_size(network, n, injections, seed, threshold).map(|a| a.row))
        .collect()
}
