//! Network reduction by load-weighted k-means on node coordinates.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{Line, Network, Node};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
/// Independent k-means++ restarts per attempt; the lowest inertia wins.
pub const RESTARTS: usize = 10;
/// Attempts with a fresh seed when the reduced graph comes out disconnected.
pub const CONNECTIVITY_RETRIES: u64 = 10;

#[derive(Debug, Clone)]
pub struct CoarseningResult {
    pub network: Network,
    /// Cluster index of every original node, in original node order.
    pub assignment: Vec<usize>,
    pub target_n: usize,
}

impl CoarseningResult {
    /// Original node indices of every cluster.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.target_n];
        for (i, &c) in self.assignment.iter().enumerate() {
            out[c].push(i);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct KMeansOutcome {
    pub assignment: Vec<usize>,
    pub centroids: Vec<[f64; 2]>,
    pub inertia: f64,
    pub iterations: usize,
}

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Picks an index with probability proportional to `scores`; `None` when all
/// scores are zero.
fn sample_weighted(scores: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let mut r = rng.random::<f64>() * total;
    for (i, s) in scores.iter().enumerate() {
        if *s > 0.0 {
            if r < *s {
                return Some(i);
            }
            r -= s;
        }
    }
    scores.iter().rposition(|s| *s > 0.0)
}

fn seed_plus_plus(
    points: &[[f64; 2]],
    weights: &[f64],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<[f64; 2]> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let mut centroids = Vec::with_capacity(k);
    let first = sample_weighted(weights, rng).unwrap_or_else(|| rng.random_range(0..n));
    chosen[first] = true;
    centroids.push(points[first]);
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(*p, points[first])).collect();
    while centroids.len() < k {
        let scores: Vec<f64> = (0..n)
            .map(|i| if chosen[i] { 0.0 } else { weights[i] * d2[i] })
            .collect();
        let next = sample_weighted(&scores, rng).unwrap_or_else(|| {
            let free: Vec<usize> = (0..n).filter(|i| !chosen[*i]).collect();
            free[rng.random_range(0..free.len())]
        });
        chosen[next] = true;
        centroids.push(points[next]);
        for (i, p) in points.iter().enumerate() {
            d2[i] = d2[i].min(dist2(*p, points[next]));
        }
    }
    centroids
}

fn nearest(p: [f64; 2], centroids: &[[f64; 2]]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = dist2(p, *c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    best
}

/// Gives every empty cluster one point, taken from a cluster with more than
/// one member: the point farthest (weighted) from its current centroid.
fn repair_empty(
    points: &[[f64; 2]],
    weights: &[f64],
    assignment: &mut [usize],
    centroids: &mut [[f64; 2]],
) {
    let k = centroids.len();
    loop {
        let mut counts = vec![0usize; k];
        for &a in assignment.iter() {
            counts[a] += 1;
        }
        let Some(empty) = counts.iter().position(|c| *c == 0) else {
            return;
        };
        let mut pick = None;
        let mut best = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            if counts[assignment[i]] < 2 {
                continue;
            }
            let d = dist2(*p, centroids[assignment[i]]);
            let score = weights[i].max(f64::MIN_POSITIVE) * d;
            if score > best {
                best = score;
                pick = Some(i);
            }
        }
        let i = pick.expect("k <= n guarantees a cluster with two members");
        assignment[i] = empty;
        centroids[empty] = points[i];
    }
}

fn update_centroids(
    points: &[[f64; 2]],
    weights: &[f64],
    assignment: &[usize],
    centroids: &mut [[f64; 2]],
) {
    let k = centroids.len();
    let mut sw = vec![0.0; k];
    let mut sx = vec![[0.0; 2]; k];
    let mut count = vec![0usize; k];
    let mut ux = vec![[0.0; 2]; k];
    for (i, &a) in assignment.iter().enumerate() {
        sw[a] += weights[i];
        sx[a][0] += weights[i] * points[i][0];
        sx[a][1] += weights[i] * points[i][1];
        count[a] += 1;
        ux[a][0] += points[i][0];
        ux[a][1] += points[i][1];
    }
    for j in 0..k {
        if sw[j] > 0.0 {
            centroids[j] = [sx[j][0] / sw[j], sx[j][1] / sw[j]];
        } else if count[j] > 0 {
            centroids[j] = [ux[j][0] / count[j] as f64, ux[j][1] / count[j] as f64];
        }
    }
}

fn inertia(
    points: &[[f64; 2]],
    weights: &[f64],
    assignment: &[usize],
    centroids: &[[f64; 2]],
) -> f64 {
    points
        .iter()
        .zip(weights)
        .zip(assignment)
        .map(|((p, w), a)| w * dist2(*p, centroids[*a]))
        .sum()
}

fn lloyd_once(points: &[[f64; 2]], weights: &[f64], k: usize, rng: &mut impl Rng) -> KMeansOutcome {
    let mut centroids = seed_plus_plus(points, weights, k, rng);
    let mut assignment: Vec<usize> = Vec::new();
    let mut iterations = 0;
    for it in 0..MAX_ITERATIONS {
        iterations = it + 1;
        let mut next: Vec<usize> = points.iter().map(|p| nearest(*p, &centroids)).collect();
        repair_empty(points, weights, &mut next, &mut centroids);
        let done = next == assignment;
        assignment = next;
        if done {
            break;
        }
        update_centroids(points, weights, &assignment, &mut centroids);
    }
    let inertia = inertia(points, weights, &assignment, &centroids);
    KMeansOutcome {
        assignment,
        centroids,
        inertia,
        iterations,
    }
}

/// Weighted Lloyd's algorithm with k-means++ seeding and [`RESTARTS`]
/// restarts. Clusters are relabelled by first appearance in point order.
/// All-zero weights fall back to uniform weights.
pub fn weighted_kmeans(points: &[[f64; 2]], weights: &[f64], k: usize, seed: u64) -> KMeansOutcome {
    assert!(k >= 1 && k <= points.len(), "1 <= k <= n required");
    assert_eq!(points.len(), weights.len());
    let uniform;
    let weights = if weights.iter().all(|w| *w == 0.0) {
        uniform = vec![1.0; points.len()];
        &uniform[..]
    } else {
        weights
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansOutcome> = None;
    for _ in 0..RESTARTS {
        let run = lloyd_once(points, weights, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let mut best = best.expect("at least one restart");
    let mut relabel = vec![usize::MAX; k];
    let mut next = 0;
    for &a in &best.assignment {
        if relabel[a] == usize::MAX {
            relabel[a] = next;
            next += 1;
        }
    }
    let mut centroids = vec![[0.0; 2]; k];
    for (old, &new) in relabel.iter().enumerate() {
        centroids[new] = best.centroids[old];
    }
    best.assignment.iter_mut().for_each(|a| *a = relabel[*a]);
    best.centroids = centroids;
    best
}

/// Builds the reduced network for a given cluster assignment: loads summed,
/// positions at load-weighted centroids, lines between clusters merged as
/// parallel admittances, lines inside a cluster dropped.
pub fn aggregate_network(network: &Network, assignment: &[usize], k: usize) -> Result<Network> {
    let mut members = vec![Vec::new(); k];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    let orig = network.nodes();
    let mut nodes = Vec::with_capacity(k);
    for (c, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(Error::validation(format!("cluster {c} is empty")));
        }
        let load: f64 = m.iter().map(|&i| orig[i].mean_load).sum();
        let (x, y) = if load > 0.0 {
            (
                m.iter()
                    .map(|&i| orig[i].mean_load * orig[i].x)
                    .sum::<f64>()
                    / load,
                m.iter()
                    .map(|&i| orig[i].mean_load * orig[i].y)
                    .sum::<f64>()
                    / load,
            )
        } else {
            let n = m.len() as f64;
            (
                m.iter().map(|&i| orig[i].x).sum::<f64>() / n,
                m.iter().map(|&i| orig[i].y).sum::<f64>() / n,
            )
        };
        // country carrying the largest share of the cluster's load
        let mut by_country: BTreeMap<&str, f64> = BTreeMap::new();
        for &i in m {
            *by_country.entry(orig[i].country.as_str()).or_default() += orig[i].mean_load;
        }
        let country = by_country
            .iter()
            .fold(None::<(&str, f64)>, |best, (c, l)| match best {
                Some((_, bl)) if bl >= *l => best,
                _ => Some((c, *l)),
            })
            .map(|(c, _)| c.to_string())
            .unwrap_or_default();
        nodes.push(Node {
            id: format!("c{c}"),
            x,
            y,
            country,
            mean_load: load,
        });
    }
    let mut admittance: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (line, &(a, b)) in network.lines().iter().zip(network.line_ends()) {
        let (ca, cb) = (assignment[a], assignment[b]);
        if ca == cb {
            continue;
        }
        let key = (ca.min(cb), ca.max(cb));
        *admittance.entry(key).or_default() += 1.0 / line.reactance;
    }
    let lines = admittance
        .into_iter()
        .map(|((a, b), y)| Line {
            id: format!("c{a}-c{b}"),
            from: format!("c{a}"),
            to: format!("c{b}"),
            reactance: 1.0 / y,
        })
        .collect();
    Network::new(nodes, lines, network.area_km2())
}

pub fn coarsen(network: &Network, target_n: usize, seed: u64) -> Result<CoarseningResult> {
    let n = network.node_count();
    if target_n < 1 || target_n > n || (target_n == 1 && n > 1) {
        return Err(Error::validation(format!(
            "coarsening target {target_n} outside 1 < target <= {n}"
        )));
    }
    if target_n == n {
        return Ok(CoarseningResult {
            network: network.clone(),
            assignment: (0..n).collect(),
            target_n,
        });
    }
    let points: Vec<[f64; 2]> = network.nodes().iter().map(|p| [p.x, p.y]).collect();
    let weights = network.mean_loads();
    let mut last_err = None;
    for attempt in 0..CONNECTIVITY_RETRIES {
        let km = weighted_kmeans(&points, &weights, target_n, seed.wrapping_add(attempt));
        let reduced = aggregate_network(network, &km.assignment, target_n)?;
        match reduced.check_connected() {
            Ok(()) => {
                return Ok(CoarseningResult {
                    network: reduced,
                    assignment: km.assignment,
                    target_n,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(Error::validation(format!(
        "coarsening to {target_n} nodes stayed disconnected after {CONNECTIVITY_RETRIES} attempts: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(n: usize) -> Network {
        let nodes = (0..n)
            .map(|i| Node {
                id: format!("n{i}"),
                x: i as f64,
                y: 0.0,
                country: "X".into(),
                mean_load: 1.0,
            })
            .collect();
        let lines = (0..n - 1)
            .map(|i| Line {
                id: format!("l{i}"),
                from: format!("n{i}"),
                to: format!("n{}", i + 1),
                reactance: 1.0,
            })
            .collect();
        Network::new(nodes, lines, 10.0).unwrap()
    }

    #[test]
    fn identity_when_target_equals_n() {
        let net = line_graph(5);
        let r = coarsen(&net, 5, 1).unwrap();
        assert_eq!(r.network, net);
        assert_eq!(r.assignment, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn target_out_of_range() {
        let net = line_graph(5);
        assert!(coarsen(&net, 1, 0).is_err());
        assert!(coarsen(&net, 6, 0).is_err());
    }

    #[test]
    fn parallel_lines_merge() {
        // 4-cycle split into {0,1} and {2,3}: lines 1-2 and 3-0 cross
        let nodes: Vec<Node> = (0..4)
            .map(|i| Node {
                id: format!("n{i}"),
                x: i as f64,
                y: 0.0,
                country: "X".into(),
                mean_load: 1.0,
            })
            .collect();
        let lines = (0..4)
            .map(|i| Line {
                id: format!("l{i}"),
                from: format!("n{i}"),
                to: format!("n{}", (i + 1) % 4),
                reactance: 1.0,
            })
            .collect();
        let net = Network::new(nodes, lines, 1.0).unwrap();
        let red = aggregate_network(&net, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(red.line_count(), 1);
        assert_eq!(red.lines()[0].reactance, 0.5);
        assert_eq!(red.nodes()[0].mean_load, 2.0);
        assert_eq!(red.nodes()[1].x, 2.5);
    }

    #[test]
    fn load_weighted_centroid() {
        let nodes = vec![
            Node {
                id: "a".into(),
                x: 0.0,
                y: 0.0,
                country: "A".into(),
                mean_load: 3.0,
            },
            Node {
                id: "b".into(),
                x: 4.0,
                y: 0.0,
                country: "B".into(),
                mean_load: 1.0,
            },
        ];
        let net = Network::new(nodes, vec![], 1.0).unwrap();
        let red = aggregate_network(&net, &[0, 0], 1).unwrap();
        assert_eq!(red.nodes()[0].x, 1.0);
        assert_eq!(red.nodes()[0].country, "A");
    }

    #[test]
    fn coincident_points_still_fill_every_cluster() {
        let pts = vec![[0.0, 0.0]; 6];
        let km = weighted_kmeans(&pts, &[1.0; 6], 3, 7);
        let mut seen = [false; 3];
        for a in km.assignment {
            seen[a] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }
}
