use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    /// Easting, km.
    pub x: f64,
    /// Northing, km.
    pub y: f64,
    pub country: String,
    /// MW.
    pub mean_load: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Per-unit, strictly positive.
    pub reactance: f64,
}

/// A transmission network on planar (pre-projected) coordinates.
///
/// Construction validates ids, endpoints and reactances. Connectivity is
/// checked by the operations that need it, since coarsening must be able to
/// represent and report a disconnected candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    lines: Vec<Line>,
    area_km2: f64,
    ends: Vec<(usize, usize)>,
}

impl Network {
    pub fn new(nodes: Vec<Node>, lines: Vec<Line>, area_km2: f64) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::validation("network has no nodes"));
        }
        if !(area_km2.is_finite() && area_km2 > 0.0) {
            return Err(Error::validation(format!(
                "network area must be positive, got {area_km2}"
            )));
        }
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.as_str(), i).is_some() {
                return Err(Error::validation(format!("duplicate node id `{}`", n.id)));
            }
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(Error::validation(format!(
                    "node `{}` has non-finite coordinates",
                    n.id
                )));
            }
            if !(n.mean_load.is_finite() && n.mean_load >= 0.0) {
                return Err(Error::validation(format!(
                    "node `{}` has invalid mean load {}",
                    n.id, n.mean_load
                )));
            }
        }
        let mut line_ids = HashMap::with_capacity(lines.len());
        let mut ends = Vec::with_capacity(lines.len());
        for l in &lines {
            if line_ids.insert(l.id.as_str(), ()).is_some() {
                return Err(Error::validation(format!("duplicate line id `{}`", l.id)));
            }
            let lookup = |id: &str| {
                index.get(id).copied().ok_or_else(|| {
                    Error::validation(format!("line `{}` references unknown node `{id}`", l.id))
                })
            };
            let (a, b) = (lookup(&l.from)?, lookup(&l.to)?);
            if a == b {
                return Err(Error::validation(format!("line `{}` is a self-loop", l.id)));
            }
            if !(l.reactance.is_finite() && l.reactance > 0.0) {
                return Err(Error::validation(format!(
                    "line `{}` has non-positive reactance {}",
                    l.id, l.reactance
                )));
            }
            ends.push((a, b));
        }
        Ok(Self {
            nodes,
            lines,
            area_km2,
            ends,
        })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn lines(&self) -> &[Line] {
        &self.lines
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }

    pub fn area_km2(&self) -> f64 {
        self.area_km2
    }

    /// Node indices `(from, to)` of each line, in line order.
    pub fn line_ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    pub fn line_ids(&self) -> Vec<String> {
        self.lines.iter().map(|l| l.id.clone()).collect()
    }

    pub fn mean_loads(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.mean_load).collect()
    }

    pub fn with_area(mut self, area_km2: f64) -> Result<Self> {
        if !(area_km2.is_finite() && area_km2 > 0.0) {
            return Err(Error::validation(format!(
                "network area must be positive, got {area_km2}"
            )));
        }
        self.area_km2 = area_km2;
        Ok(self)
    }

    /// Connected components as lists of node indices, ordered by smallest member.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.nodes.len();
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in &self.ends {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            let mut comp = vec![s];
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() == 1
    }

    pub fn check_connected(&self) -> Result<()> {
        let comps = self.components();
        if comps.len() == 1 {
            return Ok(());
        }
        Err(Error::Disconnected {
            components: comps
                .into_iter()
                .map(|c| c.into_iter().map(|i| self.nodes[i].id.clone()).collect())
                .collect(),
        })
    }

    /// True when every line has reactance exactly 1.
    pub fn has_unit_reactances(&self) -> bool {
        self.lines.iter().all(|l| l.reactance == 1.0)
    }
}

/// Area of the axis-aligned bounding box of the node coordinates, km².
pub fn bounding_box_area(nodes: &[Node]) -> f64 {
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for n in nodes {
        x0 = x0.min(n.x);
        x1 = x1.max(n.x);
        y0 = y0.min(n.y);
        y1 = y1.max(n.y);
    }
    if nodes.is_empty() {
        0.0
    } else {
        (x1 - x0) * (y1 - y0)
    }
}

/// Characteristic next-neighbour spacing `sqrt(A / N)` in km.
pub fn mean_neighbor_distance(network: &Network) -> f64 {
    (network.area_km2() / network.node_count() as f64).sqrt()
}
