use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::network::{Line, Network, Node};
use crate::error::{Error, Result};

/// Parameters of a synthetic rectangular grid network.
#[derive(Debug, Clone)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing_km: f64,
    /// Countries tile the lattice in `countries_x` x `countries_y` blocks.
    pub countries_x: usize,
    pub countries_y: usize,
    pub base_load_mw: f64,
    /// Log-normal spread of node mean loads; 0 gives equal loads.
    pub load_spread: f64,
    /// Log-normal spread of reactances; 0 gives unit reactances.
    pub reactance_spread: f64,
    pub seed: u64,
}

impl Default for LatticeSpec {
    fn default() -> Self {
        Self {
            nx: 16,
            ny: 16,
            spacing_km: 100.0,
            countries_x: 2,
            countries_y: 2,
            base_load_mw: 100.0,
            load_spread: 0.0,
            reactance_spread: 0.0,
            seed: 0,
        }
    }
}

/// Rectangular grid with nearest-neighbour lines. Node `n{i}` sits at
/// `(ix * spacing, iy * spacing)` with `i = iy * nx + ix`; the area is
/// `nx * ny * spacing^2` so that each node owns one grid cell.
pub fn lattice(spec: &LatticeSpec) -> Result<Network> {
    if spec.nx == 0 || spec.ny == 0 || spec.nx * spec.ny < 2 {
        return Err(Error::validation("lattice needs at least two nodes"));
    }
    if spec.countries_x == 0 || spec.countries_y == 0 {
        return Err(Error::validation("lattice needs at least one country"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let id = |ix: usize, iy: usize| format!("n{}", iy * spec.nx + ix);
    let mut nodes = Vec::with_capacity(spec.nx * spec.ny);
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            let cx = ix * spec.countries_x / spec.nx;
            let cy = iy * spec.countries_y / spec.ny;
            let load = spec.base_load_mw * (spec.load_spread * normal.sample(&mut rng)).exp();
            nodes.push(Node {
                id: id(ix, iy),
                x: ix as f64 * spec.spacing_km,
                y: iy as f64 * spec.spacing_km,
                country: format!("C{cy}{cx}"),
                mean_load: load,
            });
        }
    }
    let mut lines = Vec::new();
    let mut push = |a: String, b: String, rng: &mut ChaCha8Rng| {
        let x = (spec.reactance_spread * normal.sample(rng)).exp();
        lines.push(Line {
            id: format!("{a}-{b}"),
            from: a,
            to: b,
            reactance: x,
        });
    };
    for iy in 0..spec.ny {
        for ix in 0..spec.nx {
            if ix + 1 < spec.nx {
                push(id(ix, iy), id(ix + 1, iy), &mut rng);
            }
            if iy + 1 < spec.ny {
                push(id(ix, iy), id(ix, iy + 1), &mut rng);
            }
        }
    }
    let area = (spec.nx * spec.ny) as f64 * spec.spacing_km * spec.spacing_km;
    Network::new(nodes, lines, area)
}
