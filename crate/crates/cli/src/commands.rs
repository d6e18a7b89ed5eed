//! One function per subcommand. Each writes its files under `cfg.out` and
//! returns the lines to print.

use std::path::Path;

use serde::Serialize;

use flowpca::duality::{
    build_duality, flow_covariance, flow_pcs_from_m, laplacian_identity_error, majorization_bounds,
    overlap_matrix, scan_sizes, MajorizationBounds, OverlapEntry, TraceChain,
};
use flowpca::grid::{
    bounding_box_area, build_ptdf, compute_flows, lattice, max_relative_imbalance, LatticeSpec,
    Network, PtdfMatrix,
};
use flowpca::io::{self, out_path, PcaExport};
use flowpca::linalg::{max_abs, sym_eigen};
use flowpca::pca::{self, daytime_profile, psd};
use flowpca::synth::{synth_load, synthesize, Scenario, Weather};
use flowpca::{Error, Result, TimeSeriesEnsemble};

use crate::config::RunConfig;

pub const TRACE_TOLERANCE: f64 = 1e-10;
pub const EIGEN_RESIDUAL_TOLERANCE: f64 = 1e-6;
pub const BOUND_TOLERANCE: f64 = 1e-8;
pub const LAPLACIAN_TOLERANCE: f64 = 1e-8;
pub const BALANCE_TOLERANCE: f64 = 1e-9;

fn network(cfg: &RunConfig) -> Result<Network> {
    read_network(cfg, false)
}

/// Only the size scan uses the area; elsewhere a degenerate bounding box
/// (collinear nodes) is tolerated.
fn read_network(cfg: &RunConfig, needs_area: bool) -> Result<Network> {
    let (Some(n), Some(l)) = (&cfg.nodes, &cfg.lines) else {
        return Err(Error::validation("this command needs --nodes and --lines"));
    };
    let mut area = cfg.area_km2;
    if area.is_none() && !needs_area && !(bounding_box_area(&io::read_nodes(n)?) > 0.0) {
        area = Some(1.0);
    }
    io::read_network(n, l, area)
}

/// Injections from `--series` (reordered to network node order when a
/// network is given), otherwise synthesized on the network.
fn injections(cfg: &RunConfig, net: Option<&Network>) -> Result<TimeSeriesEnsemble> {
    match (&cfg.series, net) {
        (Some(path), Some(net)) => io::read_series(path)?.select(&net.node_ids()),
        (Some(path), None) => io::read_series(path),
        (None, Some(net)) => Ok(scenario(cfg, net)?.balanced.injections),
        (None, None) => Err(Error::validation(
            "this command needs --series or a network to synthesize on",
        )),
    }
}

fn scenario(cfg: &RunConfig, net: &Network) -> Result<Scenario> {
    match (&cfg.wind, &cfg.solar) {
        (Some(w), Some(s)) => {
            let ids = net.node_ids();
            let wind_cf = io::read_series(w)?.select(&ids)?;
            let solar_cf = io::read_series(s)?.select(&ids)?;
            let load = match &cfg.load_series {
                Some(l) => io::read_series(l)?.select(&ids)?,
                None => synth_load(net, wind_cf.timestamps(), &cfg.load, &cfg.weather.clock)?,
            };
            Scenario::from_inputs(net, Weather { wind_cf, solar_cf }, load)
        }
        (None, None) => {
            if cfg.load_series.is_some() {
                return Err(Error::validation("--load needs --wind and --solar"));
            }
            synthesize(net, &cfg.weather, &cfg.load, cfg.hours)
        }
        _ => Err(Error::validation(
            "--wind and --solar must be given together",
        )),
    }
}

fn numerical_rank(m: &nalgebra::DMatrix<f64>) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let cut = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sv.max();
    sv.iter().filter(|s| **s > cut).count()
}

#[derive(Serialize)]
struct PtdfReport {
    nodes: usize,
    lines: usize,
    rank: usize,
    expected_rank: usize,
    max_abs_row_sum: f64,
    max_abs_entry: f64,
}

pub fn cmd_ptdf(cfg: &RunConfig) -> Result<Vec<String>> {
    let net = network(cfg)?;
    let ptdf = build_ptdf(&net)?;
    let h = ptdf.h();
    let report = PtdfReport {
        nodes: net.node_count(),
        lines: net.line_count(),
        rank: numerical_rank(h),
        expected_rank: net.node_count() - 1,
        max_abs_row_sum: h.row_iter().map(|r| r.sum().abs()).fold(0.0, f64::max),
        max_abs_entry: max_abs(h),
    };
    io::write_ptdf(&out_path(&cfg.out, "ptdf.csv"), &ptdf)?;
    io::write_json(&out_path(&cfg.out, "ptdf_report.json"), &report)?;
    if report.rank != report.expected_rank {
        return Err(Error::invariant(
            "rank(H) = N-1",
            format!("PTDF has rank {} for N = {}", report.rank, report.nodes),
        ));
    }
    Ok(vec![format!(
        "PTDF {} x {}, rank {}, max |row sum| {:.3e}",
        report.lines, report.nodes, report.rank, report.max_abs_row_sum
    )])
}

pub fn cmd_synth(cfg: &RunConfig) -> Result<Vec<String>> {
    let net = network(cfg)?;
    let sc = scenario(cfg, &net)?;
    let out = |name: &str| out_path(&cfg.out, name);
    io::write_series(&out("wind_cf.csv"), &sc.weather.wind_cf)?;
    io::write_series(&out("solar_cf.csv"), &sc.weather.solar_cf)?;
    io::write_series(&out("generation.csv"), &sc.generation)?;
    io::write_series(&out("load.csv"), &sc.load)?;
    io::write_series(&out("mismatch.csv"), &sc.mismatch)?;
    io::write_series(&out("balancing.csv"), &sc.balanced.balancing)?;
    io::write_series(&out("injections.csv"), &sc.balanced.injections)?;
    io::write_shares(&out("shares.csv"), &sc.shares)?;
    let imbalance = max_relative_imbalance(sc.balanced.injections.values());
    if imbalance > BALANCE_TOLERANCE {
        return Err(Error::invariant(
            "zero-sum injections",
            format!("max relative imbalance {imbalance:.3e}"),
        ));
    }
    let mut lines: Vec<String> = sc
        .shares
        .alpha
        .iter()
        .map(|(c, a)| format!("alpha {c} = {a:.6}"))
        .collect();
    lines.push(format!(
        "{} hours x {} nodes, max relative imbalance {imbalance:.3e}",
        sc.balanced.injections.len(),
        net.node_count()
    ));
    Ok(lines)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Target {
    Injections,
    Flows,
}

impl Target {
    fn name(self) -> &'static str {
        match self {
            Target::Injections => "injections",
            Target::Flows => "flows",
        }
    }
}

pub fn cmd_pca(cfg: &RunConfig, target: Target) -> Result<Vec<String>> {
    let net = match target {
        Target::Flows => Some(network(cfg)?),
        Target::Injections if cfg.nodes.is_some() || cfg.series.is_none() => Some(network(cfg)?),
        Target::Injections => None,
    };
    let inj = injections(cfg, net.as_ref())?;
    let data = match (target, &net) {
        (Target::Flows, Some(net)) => compute_flows(&build_ptdf(net)?, &inj)?,
        _ => inj,
    };
    let (result, beta) = pca::analyze(&data)?;
    let k = result.count_k(cfg.threshold)?;
    let name = target.name();
    let out = |suffix: &str| out_path(&cfg.out, &format!("{name}_{suffix}"));
    io::write_json(
        &out("pca.json"),
        &PcaExport::new(data.labels(), &result, cfg.threshold)?,
    )?;
    io::write_eigenvalues(&out("eigenvalues.csv"), &result)?;
    io::write_amplitudes(&out("amplitudes.csv"), data.timestamps(), &beta, k)?;
    let mut spectra = Vec::with_capacity(k);
    let mut profiles = Vec::with_capacity(k);
    for c in 0..k {
        let b: Vec<f64> = beta.column(c).iter().copied().collect();
        spectra.push(psd(&b, 1.0)?);
        profiles.push(daytime_profile(&b, data.timestamps())?);
    }
    io::write_psd(&out("psd.csv"), &spectra)?;
    io::write_daytime_profiles(&out("daytime.csv"), &profiles)?;
    let mut lines = vec![format!(
        "{name}: {} samples x {} columns, K{:.0} = {k}",
        data.len(),
        data.width(),
        cfg.threshold * 100.0
    )];
    for (c, s) in spectra.iter().enumerate().take(3) {
        if let Some((f, _)) = s.peak() {
            lines.push(format!(
                "component {}: normalized eigenvalue {:.4}, PSD peak at period {:.2} h",
                c + 1,
                result.normalized_eigenvalues[c],
                1.0 / f
            ));
        }
    }
    Ok(lines)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct Ranks {
    expected: usize,
    t_matrix: usize,
    m_matrix: usize,
    flow_covariance: usize,
    flow_nullity: usize,
    expected_flow_nullity: usize,
}

#[derive(Serialize)]
struct Traces {
    sigma_p_t: f64,
    m: f64,
    sigma_f: f64,
    overlap: f64,
    max_relative_residual: f64,
}

#[derive(Serialize)]
struct DualityReport {
    nodes: usize,
    lines: usize,
    ranks: Ranks,
    traces: Traces,
    /// `||Sigma_f a_k - eta_k a_k|| / eta_1` per flow component.
    eigenvector_residuals: Vec<f64>,
    flow_normalized_eigenvalues: Vec<f64>,
    bounds_restricted: bool,
    bounds_max_violation: f64,
    /// `pass`, `fail` or `not applicable` (non-unit reactances).
    laplacian_identity: String,
    laplacian_identity_error: Option<f64>,
    checks: Vec<Check>,
}

struct DualityOutput {
    report: DualityReport,
    bounds: MajorizationBounds,
    top: Vec<OverlapEntry>,
}

fn analyze_duality(
    ptdf: &PtdfMatrix,
    net: &Network,
    cov: &nalgebra::DMatrix<f64>,
) -> Result<DualityOutput> {
    let (n, l) = (net.node_count(), net.line_count());
    let d = build_duality(ptdf, cov)?;
    let sigma_f = flow_covariance(ptdf, cov)?;
    let flow_rank = sym_eigen(&sigma_f)?.rank();
    let pcs = flow_pcs_from_m(&d, ptdf)?;
    let inj_pca = pca::pca(cov)?;
    let overlap = overlap_matrix(&inj_pca, &d.t_eigen)?;
    let chain = TraceChain::compute(&d, &sigma_f, &overlap);
    let bounds = majorization_bounds(cov, &d.t_matrix)?;
    let lap = laplacian_identity_error(net, &d.t_matrix)?;

    let ranks = Ranks {
        expected: n - 1,
        t_matrix: d.t_rank(),
        m_matrix: d.m_rank(),
        flow_covariance: flow_rank,
        flow_nullity: l - flow_rank,
        expected_flow_nullity: l + 1 - n,
    };
    let mut checks = vec![
        Check {
            name: "rank(T) = rank(M) = rank(Sigma_f) = N-1",
            pass: ranks.t_matrix == n - 1 && ranks.m_matrix == n - 1 && flow_rank == n - 1,
            detail: format!(
                "T {}, M {}, Sigma_f {}, N-1 = {}",
                ranks.t_matrix,
                ranks.m_matrix,
                flow_rank,
                n - 1
            ),
        },
        Check {
            name: "trace chain",
            pass: chain.max_relative_residual() <= TRACE_TOLERANCE,
            detail: format!(
                "max relative residual {:.3e}",
                chain.max_relative_residual()
            ),
        },
        Check {
            name: "flow eigenvector residual",
            pass: pcs.max_residual() <= EIGEN_RESIDUAL_TOLERANCE,
            detail: format!("max residual {:.3e}", pcs.max_residual()),
        },
        Check {
            name: "majorization sandwich",
            pass: bounds.max_violation() <= BOUND_TOLERANCE,
            detail: format!("max violation {:.3e}", bounds.max_violation()),
        },
    ];
    if let Some(e) = lap {
        checks.push(Check {
            name: "T = L+ for unit reactances",
            pass: e <= LAPLACIAN_TOLERANCE,
            detail: format!("relative max deviation {e:.3e}"),
        });
    }
    let report = DualityReport {
        nodes: n,
        lines: l,
        ranks,
        traces: Traces {
            sigma_p_t: chain.sigma_p_t,
            m: chain.m,
            sigma_f: chain.sigma_f,
            overlap: chain.overlap,
            max_relative_residual: chain.max_relative_residual(),
        },
        eigenvector_residuals: pcs.residuals.clone(),
        flow_normalized_eigenvalues: pcs.normalized.iter().copied().collect(),
        bounds_restricted: bounds.restricted,
        bounds_max_violation: bounds.max_violation(),
        laplacian_identity: match lap {
            None => "not applicable".into(),
            Some(e) if e <= LAPLACIAN_TOLERANCE => "pass".into(),
            Some(_) => "fail".into(),
        },
        laplacian_identity_error: lap,
        checks,
    };
    Ok(DualityOutput {
        report,
        bounds,
        top: overlap.top(15),
    })
}

pub fn cmd_duality(cfg: &RunConfig) -> Result<Vec<String>> {
    let net = network(cfg)?;
    let inj = injections(cfg, Some(&net))?;
    let ptdf = build_ptdf(&net)?;
    let cov = pca::covariance(&inj)?;
    let DualityOutput {
        report,
        bounds,
        top,
    } = analyze_duality(&ptdf, &net, &cov)?;
    io::write_json(&out_path(&cfg.out, "duality_report.json"), &report)?;
    io::write_bounds(&out_path(&cfg.out, "bounds.csv"), &bounds)?;
    io::write_overlap(&out_path(&cfg.out, "overlap_top15.csv"), &top)?;
    let mut lines: Vec<String> = report
        .checks
        .iter()
        .map(|c| {
            format!(
                "{}: {} ({})",
                c.name,
                if c.pass { "pass" } else { "FAIL" },
                c.detail
            )
        })
        .collect();
    if let Some(c) = report.checks.iter().find(|c| !c.pass) {
        return Err(Error::invariant(c.name, c.detail.clone()));
    }
    lines.push(format!("laplacian identity: {}", report.laplacian_identity));
    Ok(lines)
}

pub fn cmd_scan(cfg: &RunConfig) -> Result<Vec<String>> {
    if cfg.sizes.is_empty() {
        return Err(Error::validation("scan needs --sizes"));
    }
    let net = read_network(cfg, true)?;
    let inj = injections(cfg, Some(&net))?;
    let rows = scan_sizes(&net, &cfg.sizes, &inj, cfg.seed, cfg.threshold)?;
    io::write_scan(&out_path(&cfg.out, "scan.csv"), &rows)?;
    let mut lines = vec!["N,K_injection,K_flow,xi_km".to_string()];
    lines.extend(
        rows.iter()
            .map(|r| format!("{},{},{},{:.1}", r.n, r.k_injection, r.k_flow, r.xi_km)),
    );
    Ok(lines)
}

/// Writes `nodes.csv`, `lines.csv` and a `network.conf` carrying the area.
pub fn cmd_lattice(spec: &LatticeSpec, out: &Path) -> Result<Vec<String>> {
    let net = lattice(spec)?;
    let nodes = out_path(out, "nodes.csv");
    let lines = out_path(out, "lines.csv");
    io::write_network(&net, &nodes, &lines)?;
    let conf = format!(
        "nodes = nodes.csv\nlines = lines.csv\narea_km2 = {}\n",
        net.area_km2()
    );
    let conf_path = out_path(out, "network.conf");
    std::fs::write(&conf_path, conf).map_err(|e| Error::io(&conf_path, e))?;
    Ok(vec![format!(
        "{} nodes, {} lines, area {} km2, written to {}",
        net.node_count(),
        net.line_count(),
        net.area_km2(),
        out.display()
    )])
}
