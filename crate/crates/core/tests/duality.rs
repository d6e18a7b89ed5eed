mod common;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use flowpca::duality::{
    aggregate_series, analyze_size, build_duality, flow_covariance, flow_pcs_from_m,
    laplacian_identity_error, majorization_bounds, overlap_matrix, scan_sizes, TraceChain,
};
use flowpca::grid::{
    build_ptdf, coarsen, compute_flows, lattice, max_relative_imbalance, LatticeSpec, Line,
    Network, Node,
};
use flowpca::linalg::{line_angle, sym_eigen, SymEigen};
use flowpca::pca::{self, PcaResult};

use common::*;

fn two_node() -> Network {
    let node = |id: &str, x: f64| Node {
        id: id.into(),
        x,
        y: 0.0,
        country: "X".into(),
        mean_load: 1.0,
    };
    Network::new(
        vec![node("a", 0.0), node("b", 1.0)],
        vec![Line {
            id: "ab".into(),
            from: "a".into(),
            to: "b".into(),
            reactance: 1.0,
        }],
        1.0,
    )
    .unwrap()
}

fn cycle4() -> Network {
    let nodes = (0..4)
        .map(|i| Node {
            id: format!("v{i}"),
            x: i as f64,
            y: 0.0,
            country: "X".into(),
            mean_load: 1.0,
        })
        .collect();
    let lines = (0..4)
        .map(|i| Line {
            id: format!("e{i}"),
            from: format!("v{i}"),
            to: format!("v{}", (i + 1) % 4),
            reactance: 1.0,
        })
        .collect();
    Network::new(nodes, lines, 1.0).unwrap()
}

#[test]
fn two_node_case() {
    let net = two_node();
    let ptdf = build_ptdf(&net).unwrap();
    let cov = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    let sf = flow_covariance(&ptdf, &cov).unwrap();
    assert_eq!(sf.shape(), (1, 1));
    assert_relative_eq!(sf[(0, 0)], 1.0, epsilon = 1e-15);

    let d = build_duality(&ptdf, &cov).unwrap();
    let t = DMatrix::from_row_slice(2, 2, &[0.25, -0.25, -0.25, 0.25]);
    assert!((&d.t_matrix - t).amax() < 1e-15);

    let f = flow_pcs_from_m(&d, &ptdf).unwrap();
    assert_eq!(f.len(), 1);
    assert_relative_eq!(f.axes[(0, 0)], 1.0, epsilon = 1e-12);
    assert_relative_eq!(f.normalized[0], 1.0, epsilon = 1e-12);

    let b = majorization_bounds(&cov, &d.t_matrix).unwrap();
    assert!(b.restricted);
    for seq in [&b.partial_sums, &b.lower, &b.upper] {
        assert_eq!(seq.len(), 1);
        assert_relative_eq!(seq[0], 1.0, epsilon = 1e-12);
    }
}

#[test]
fn zero_injection_covariance_gives_zero_flows() {
    let ptdf = build_ptdf(&cycle4()).unwrap();
    let sf = flow_covariance(&ptdf, &DMatrix::zeros(4, 4)).unwrap();
    assert_eq!(sf, DMatrix::zeros(4, 4));
    assert!(flow_covariance(&ptdf, &DMatrix::zeros(3, 3)).is_err());
}

#[test]
fn cycle_has_one_flow_null_direction() {
    let net = cycle4();
    let ptdf = build_ptdf(&net).unwrap();
    let cov = balanced_covariance(&mut rng(1), 4);
    let e = sym_eigen(&flow_covariance(&ptdf, &cov).unwrap()).unwrap();
    assert_eq!(e.rank(), 3);
    assert_eq!(net.line_count() - e.rank(), 1);
    // the null direction is the circulating flow
    let null = e.vectors.column(3);
    let circ = DVector::from_element(4, 0.5);
    assert_relative_eq!(null.dot(&circ).abs(), 1.0, epsilon = 1e-10);
}

#[test]
fn projector_covariance_shares_t_spectrum() {
    let mut r = rng(8);
    let n = 9;
    let net = random_network(&mut r, n, 6, false);
    let ptdf = build_ptdf(&net).unwrap();
    let proj = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let d = build_duality(&ptdf, &proj).unwrap();
    for k in 0..n - 1 {
        assert_relative_eq!(d.eta[k], d.t_eigen.values[k], max_relative = 1e-10);
    }
    assert_eq!(d.m_rank(), n - 1);
    assert_eq!(d.t_rank(), n - 1);
}

#[test]
fn commuting_diagonal_bounds() {
    let cov = DMatrix::from_diagonal(&DVector::from_row_slice(&[2.0, 1.0]));
    let t = DMatrix::from_diagonal(&DVector::from_row_slice(&[3.0, 1.0]));
    let b = majorization_bounds(&cov, &t).unwrap();
    assert!(!b.restricted);
    assert_relative_eq!(b.trace, 7.0);
    let expect = |v: [f64; 2]| v.map(|x| x / 7.0);
    for (got, want) in [
        (&b.lower, expect([3.0, 5.0])),
        (&b.partial_sums, expect([6.0, 7.0])),
        (&b.upper, expect([6.0, 7.0])),
    ] {
        for (g, w) in got.iter().zip(want) {
            assert_relative_eq!(*g, w, epsilon = 1e-14);
        }
    }
}

#[test]
fn bounds_reject_rank_deficient_covariance() {
    let mut r = rng(2);
    let net = random_network(&mut r, 6, 3, false);
    let ptdf = build_ptdf(&net).unwrap();
    let u = DVector::from_row_slice(&[1.0, -1.0, 0.0, 0.0, 0.0, 0.0]);
    let cov = &u * u.transpose();
    let t = ptdf.h().transpose() * ptdf.h();
    assert!(majorization_bounds(&cov, &t).is_err());
}

#[test]
fn sandwich_on_random_eight_node_networks() {
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let net = random_network(&mut r, 8, 4, false);
        let cov = if seed % 2 == 0 {
            balanced_covariance(&mut r, 8)
        } else {
            full_covariance(&mut r, 8)
        };
        let ptdf = build_ptdf(&net).unwrap();
        let t = ptdf.h().transpose() * ptdf.h();
        let b = majorization_bounds(&cov, &t).unwrap();
        assert!(
            b.max_violation() <= 1e-8,
            "seed {seed}: {}",
            b.max_violation()
        );
        for seq in [&b.lower, &b.partial_sums, &b.upper] {
            assert!(seq.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        }
        assert_relative_eq!(*b.partial_sums.last().unwrap(), 1.0, epsilon = 1e-10);
        assert!(*b.lower.last().unwrap() <= 1.0 + 1e-10);
        assert!(*b.upper.last().unwrap() >= 1.0 - 1e-10);
    }
}

fn aligned(eig: &SymEigen, lambda: &[f64]) -> DMatrix<f64> {
    let n = eig.dim();
    let mut cov = DMatrix::zeros(n, n);
    for (m, l) in lambda.iter().enumerate() {
        let s = eig.vectors.column(m);
        cov += (s * s.transpose()) * *l;
    }
    cov
}

#[test]
fn aligned_overlap_is_diagonal() {
    let mut r = rng(4);
    let n = 7;
    let net = random_network(&mut r, n, 5, false);
    let ptdf = build_ptdf(&net).unwrap();
    let d0 = build_duality(&ptdf, &DMatrix::identity(n, n)).unwrap();
    let lambda: Vec<f64> = (0..n - 1).map(|k| (n - k) as f64 * 1.5).collect();
    let cov = aligned(&d0.t_eigen, &lambda);
    let inj = pca::pca(&cov).unwrap();
    let o = overlap_matrix(&inj, &d0.t_eigen).unwrap();
    let scale = o.entries.amax();
    for k in 0..n {
        for m in 0..n {
            let want = if k == m {
                inj.eigenvalues[k] * d0.t_eigen.values[k].max(0.0)
            } else {
                0.0
            };
            assert!(
                (o.entries[(k, m)] - want).abs() <= 1e-10 * scale,
                "({k},{m})"
            );
        }
    }
    // and the partial sums sit on the upper bound
    let b = majorization_bounds(&cov, &d0.t_matrix).unwrap();
    for (p, u) in b.partial_sums.iter().zip(&b.upper) {
        assert_relative_eq!(*p, *u, epsilon = 1e-10);
    }
}

#[test]
fn overlap_rejects_non_orthonormal_basis() {
    let n = 3;
    let inj = PcaResult {
        mean: None,
        eigenvalues: DVector::from_element(n, 1.0),
        normalized_eigenvalues: DVector::from_element(n, 1.0 / 3.0),
        axes: DMatrix::from_element(n, n, 1.0),
    };
    let t = sym_eigen(&DMatrix::identity(n, n)).unwrap();
    assert!(overlap_matrix(&inj, &t).is_err());
}

/// Six-node network with simulated balanced injections: flow PCs from H v_k
/// against direct PCA of the simulated flows.
#[test]
fn simulated_flows_match_transferred_axes() {
    let mut r = rng(6);
    let n = 6;
    let net = random_network(&mut r, n, 4, false);
    let ptdf = build_ptdf(&net).unwrap();
    let t = 2000;
    let mix = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut r));
    let z = DMatrix::<f64>::from_fn(t, n, |_, _| StandardNormal.sample(&mut r));
    let mut p = z * mix;
    for mut row in p.row_iter_mut() {
        let m = row.mean();
        row.add_scalar_mut(-m);
    }
    let inj = series(p, net.node_ids());
    let flows = compute_flows(&ptdf, &inj).unwrap();
    let direct = pca::pca(&pca::covariance(&flows).unwrap()).unwrap();

    let cov = pca::covariance(&inj).unwrap();
    let d = build_duality(&ptdf, &cov).unwrap();
    let f = flow_pcs_from_m(&d, &ptdf).unwrap();
    assert_eq!(f.len(), n - 1);
    for k in 0..f.len() {
        let a = DVector::from_column_slice(f.axes.column(k).as_slice());
        assert!(line_angle(&a, &direct.axis(k)) < 1e-6, "component {k}");
        assert!(rel_diff(f.normalized[k], direct.normalized_eigenvalues[k]) <= 1e-8);
    }
    assert!(f.max_residual() <= 1e-6);

    let sf = flow_covariance(&ptdf, &cov).unwrap();
    let o = overlap_matrix(&pca::pca(&cov).unwrap(), &d.t_eigen).unwrap();
    assert!(rel_diff(o.total(), sf.trace()) <= 1e-8);
    assert!(TraceChain::compute(&d, &sf, &o).max_relative_residual() <= 1e-10);
    assert!(o.entries.iter().all(|v| *v >= 0.0));
    let top = o.top(15);
    assert_eq!(top.len(), 15);
    assert!(top.windows(2).all(|w| w[0].value >= w[1].value));
    assert_eq!(top[0].rank, 1);
}

#[test]
fn spectra_of_m_and_flow_covariance_coincide() {
    let mut r = rng(12);
    for n in [5, 11, 20] {
        let net = random_network(&mut r, n, n, false);
        let ptdf = build_ptdf(&net).unwrap();
        let cov = full_covariance(&mut r, n);
        let d = build_duality(&ptdf, &cov).unwrap();
        let direct = sym_eigen(&flow_covariance(&ptdf, &cov).unwrap()).unwrap();
        for k in 0..n - 1 {
            assert!(rel_diff(d.eta[k], direct.values[k]) <= 1e-8);
        }
        // M v = eta v for the mapped eigenvectors
        for k in 0..n - 1 {
            let v = d.v.column(k);
            let res = (&d.m_matrix * v - v * d.eta[k]).norm();
            assert!(res <= 1e-9 * d.eta[0], "n={n} k={k}: {res}");
        }
    }
}

#[test]
fn unit_reactance_topology_is_laplacian_pinv() {
    let mut r = rng(21);
    let net = random_network(&mut r, 12, 7, true);
    let ptdf = build_ptdf(&net).unwrap();
    let t = ptdf.h().transpose() * ptdf.h();
    assert!(laplacian_identity_error(&net, &t).unwrap().unwrap() <= 1e-8);

    let weighted = random_network(&mut r, 12, 7, false);
    let t = build_ptdf(&weighted).unwrap();
    let t = t.h().transpose() * t.h();
    assert_eq!(laplacian_identity_error(&weighted, &t).unwrap(), None);
}

#[test]
fn lattice_modes_are_half_waves() {
    let (nx, ny) = (10, 6);
    let net = lattice(&LatticeSpec {
        nx,
        ny,
        ..LatticeSpec::default()
    })
    .unwrap();
    let ptdf = build_ptdf(&net).unwrap();
    let d = build_duality(&ptdf, &DMatrix::identity(nx * ny, nx * ny)).unwrap();
    let half_wave = |along_x: bool| {
        let v = DVector::from_fn(nx * ny, |i, _| {
            let (ix, iy) = (i % nx, i / nx);
            let (pos, len) = if along_x { (ix, nx) } else { (iy, ny) };
            (std::f64::consts::PI * (pos as f64 + 0.5) / len as f64 - std::f64::consts::FRAC_PI_2)
                .sin()
        });
        v.normalize()
    };
    let s1 = d.t_eigen.vectors.column(0);
    let s2 = d.t_eigen.vectors.column(1);
    assert!(s1.dot(&half_wave(true)).abs() > 0.9);
    assert!(s2.dot(&half_wave(false)).abs() > 0.9);
}

#[test]
fn scan_at_full_size_matches_direct_computation() {
    let net = lattice(&LatticeSpec {
        nx: 8,
        ny: 6,
        spacing_km: 60.0,
        ..LatticeSpec::default()
    })
    .unwrap();
    let sc = flowpca::synth::synthesize(
        &net,
        &flowpca::synth::WeatherParams::default(),
        &flowpca::synth::LoadProfile::default(),
        600,
    )
    .unwrap();
    let inj = sc.injections();
    let n = net.node_count();
    let a = analyze_size(&net, n, inj, 3, 0.95).unwrap();
    assert_eq!(&a.injections, inj);
    let direct_inj = pca::pca(&pca::covariance(inj).unwrap()).unwrap();
    let ptdf = build_ptdf(&net).unwrap();
    let flows = compute_flows(&ptdf, inj).unwrap();
    let direct_flow = pca::pca(&pca::covariance(&flows).unwrap()).unwrap();
    assert_eq!(a.injection_pca.eigenvalues, direct_inj.eigenvalues);
    assert_eq!(a.injection_pca.axes, direct_inj.axes);
    assert_eq!(a.flow_pca.eigenvalues, direct_flow.eigenvalues);
    assert_eq!(a.row.k_injection, direct_inj.count_k(0.95).unwrap());
    assert_eq!(a.row.k_flow, direct_flow.count_k(0.95).unwrap());

    let sizes = [6, 12, 24, n];
    let rows = scan_sizes(&net, &sizes, inj, 3, 0.95).unwrap();
    assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), sizes);
    assert!(rows.windows(2).all(|w| w[1].xi_km < w[0].xi_km));
    assert!(rows.iter().all(|r| r.k_flow <= r.k_injection));
    assert_eq!(rows[3], a.row);

    let c = coarsen(&net, 12, 3).unwrap();
    let agg = aggregate_series(inj, &c).unwrap();
    assert!(max_relative_imbalance(agg.values()) <= 1e-9);
}
