#![allow(dead_code)]

use chrono::{TimeZone, Utc};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use flowpca::grid::{lattice, LatticeSpec, Line, Network, Node};
use flowpca::synth::{synthesize, LoadProfile, Scenario, WeatherParams};
use flowpca::TimeSeriesEnsemble;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random spanning tree plus roughly `extra` additional distinct edges.
/// Reactances are uniform in [0.5, 2] unless `unit` is set.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, extra: usize, unit: bool) -> Network {
    let nodes: Vec<Node> = (0..n)
        .map(|i| Node {
            id: format!("v{i}"),
            x: rng.random_range(0.0..1000.0),
            y: rng.random_range(0.0..1000.0),
            country: "X".into(),
            mean_load: rng.random_range(1.0..10.0),
        })
        .collect();
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let e = (a.min(b), a.max(b));
        if a != b && !edges.iter().any(|&(p, q)| (p.min(q), p.max(q)) == e) {
            edges.push(e);
        }
    }
    let lines = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| Line {
            id: format!("e{k}"),
            from: format!("v{a}"),
            to: format!("v{b}"),
            reactance: if unit {
                1.0
            } else {
                rng.random_range(0.5..2.0)
            },
        })
        .collect();
    Network::new(nodes, lines, 1.0e6).unwrap()
}

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `P A A^T P` with `P = I - 11^T/N`: rank N-1, annihilates the ones vector.
pub fn balanced_covariance(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = gaussian(rng, n, 3 * n);
    let p = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let c = &p * &a * a.transpose() * &p;
    (&c + c.transpose()) * 0.5
}

/// Full-rank `A A^T / cols`.
pub fn full_covariance(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = gaussian(rng, n, 3 * n);
    let c = &a * a.transpose() / (3 * n) as f64;
    (&c + c.transpose()) * 0.5
}

pub fn series(values: DMatrix<f64>, labels: Vec<String>) -> TimeSeriesEnsemble {
    let start = Utc.with_ymd_and_hms(2011, 1, 1, 0, 0, 0).unwrap();
    let stamps = TimeSeriesEnsemble::hourly_index(start, values.nrows());
    TimeSeriesEnsemble::new(stamps, labels, values).unwrap()
}

pub fn labels(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// 16 x 16 lattice at 50 km spacing (800 km x 800 km), four countries.
pub fn continental_lattice() -> Network {
    lattice(&LatticeSpec {
        spacing_km: 50.0,
        ..LatticeSpec::default()
    })
    .unwrap()
}

pub const CONTINENTAL_HOURS: usize = 4000;

pub fn continental_run(network: &Network) -> Scenario {
    synthesize(
        network,
        &WeatherParams::default(),
        &LoadProfile::default(),
        CONTINENTAL_HOURS,
    )
    .unwrap()
}
