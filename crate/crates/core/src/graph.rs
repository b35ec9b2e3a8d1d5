//! Directed proximity graph, rooted spanning-tree check and the weighted
//! Laplacian of the follower consensus dynamics.
//!
//! An edge `(i, j)` means robot `i` senses robot `j`; information therefore
//! flows from `j` to `i`. All ids are 1-based.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::model::RobotState;

/// Directed edge `(i, j)`: `i` senses `j`.
pub type Edge = (usize, usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Topology {
    n: usize,
    neighbors: Vec<Vec<usize>>,
    edge_distances: BTreeMap<Edge, f64>,
    tree_edges: Vec<Edge>,
    root: Option<usize>,
}

impl Topology {
    /// Graph with explicit neighbor sets and no recorded distances.
    /// `neighbor_sets[k]` lists the ids sensed by robot `k + 1`.
    pub fn from_neighbor_sets(neighbor_sets: Vec<Vec<usize>>, root: Option<usize>) -> Self {
        let n = neighbor_sets.len();
        let mut neighbors = neighbor_sets;
        for set in &mut neighbors {
            set.sort_unstable();
            set.dedup();
        }
        let mut topo = Topology {
            n,
            neighbors,
            edge_distances: BTreeMap::new(),
            tree_edges: Vec::new(),
            root,
        };
        topo.tree_edges = root.map(|r| bfs_tree(&topo, r).0).unwrap_or_default();
        topo
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Ids sensed by robot `id`, ascending.
    pub fn neighbors(&self, id: usize) -> &[usize] {
        &self.neighbors[id - 1]
    }

    pub fn contains_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i - 1].binary_search(&j).is_ok()
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.neighbors
            .iter()
            .enumerate()
            .flat_map(|(k, set)| set.iter().map(move |&j| (k + 1, j)))
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum()
    }

    /// Distances recorded when each edge was created.
    pub fn edge_distances(&self) -> &BTreeMap<Edge, f64> {
        &self.edge_distances
    }

    /// Monitored spanning structure: one `(child, parent)` edge per robot
    /// reached from the root along information flow.
    pub fn tree_edges(&self) -> &[Edge] {
        &self.tree_edges
    }

    pub fn root(&self) -> Option<usize> {
        self.root
    }

    /// Inserts `(i, j)` if absent. Returns whether it was new.
    pub fn add_edge(&mut self, i: usize, j: usize, distance: Option<f64>) -> bool {
        let set = &mut self.neighbors[i - 1];
        match set.binary_search(&j) {
            Ok(_) => false,
            Err(pos) => {
                set.insert(pos, j);
                if let Some(d) = distance {
                    self.edge_distances.insert((i, j), d);
                }
                true
            }
        }
    }

    /// Adds every missing edge whose length is below `R - δ2`. Existing
    /// edges are never removed and the monitored tree is unchanged.
    pub fn accrete(&mut self, positions: &[Vec2], sensing_radius: f64, buffer: f64) -> Vec<Edge> {
        let limit = sensing_radius - buffer;
        let mut added = Vec::new();
        for i in 1..=self.n {
            for j in 1..=self.n {
                if i == j {
                    continue;
                }
                let d = positions[i - 1].distance(positions[j - 1]);
                if d < limit && self.add_edge(i, j, Some(d)) {
                    added.push((i, j));
                }
            }
        }
        added
    }
}

/// Sensing graph of a snapshot: `j ∈ N_i` iff `‖p_i − p_j‖ < R`.
pub fn build_topology(states: &[RobotState], sensing_radius: f64) -> Topology {
    let n = states.len();
    let mut neighbors = vec![Vec::new(); n];
    let mut edge_distances = BTreeMap::new();
    for (a, si) in states.iter().enumerate() {
        for (b, sj) in states.iter().enumerate() {
            if a == b {
                continue;
            }
            let d = si.position.distance(sj.position);
            if d < sensing_radius {
                neighbors[a].push(b + 1);
                edge_distances.insert((a + 1, b + 1), d);
            }
        }
    }
    let root = states.iter().find(|s| s.is_informed()).map(|s| s.id);
    let mut topo = Topology {
        n,
        neighbors,
        edge_distances,
        tree_edges: Vec::new(),
        root,
    };
    if let Some(r) = root {
        topo.tree_edges = bfs_tree(&topo, r).0;
    }
    topo
}

/// Breadth-first search from `root` over reversed sensing edges. Returns
/// the tree edges and the reached flags.
fn bfs_tree(topo: &Topology, root: usize) -> (Vec<Edge>, Vec<bool>) {
    let mut reached = vec![false; topo.n];
    let mut tree = Vec::new();
    if root == 0 || root > topo.n {
        return (tree, reached);
    }
    reached[root - 1] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(u) = queue.pop_front() {
        for i in 1..=topo.n {
            if !reached[i - 1] && topo.contains_edge(i, u) {
                reached[i - 1] = true;
                tree.push((i, u));
                queue.push_back(i);
            }
        }
    }
    (tree, reached)
}

/// True iff every robot receives the root's information through a chain
/// of sensing edges.
pub fn has_rooted_spanning_tree(topo: &Topology, root: usize) -> bool {
    let (_, reached) = bfs_tree(topo, root);
    reached.iter().all(|&r| r)
}

/// Rooted spanning tree as `(child, parent)` edges, if one exists.
pub fn spanning_tree(topo: &Topology, root: usize) -> Option<Vec<Edge>> {
    let (tree, reached) = bfs_tree(topo, root);
    reached.iter().all(|&r| r).then_some(tree)
}

/// Row-major `N x N` Laplacian of the follower dynamics at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplacianSnapshot {
    pub matrix: Vec<Vec<f64>>,
    pub time: f64,
}

impl LaplacianSnapshot {
    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.iter().map(|row| row.iter().sum()).collect()
    }
}

/// Assembles `π(t)`: `π_ii = Σ_j k_v,i m_ij`, `π_ik = −k_v,i m_ik` for
/// sensed `k`, zero elsewhere. The informed robot's row stays zero.
pub fn laplacian(
    topo: &Topology,
    weights: &BTreeMap<Edge, f64>,
    k_v: &[f64],
    time: f64,
) -> Result<LaplacianSnapshot> {
    let n = topo.n;
    let informed = topo.root.unwrap_or(1);
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 1..=n {
        if i == informed {
            continue;
        }
        let gain = k_v[i - 1];
        let row = &mut matrix[i - 1];
        let mut diagonal = 0.0;
        for &k in topo.neighbors(i) {
            let m = *weights
                .get(&(i, k))
                .ok_or(Error::MissingWeight { from: i, to: k })?;
            row[k - 1] -= gain * m;
            diagonal += gain * m;
        }
        row[i - 1] += diagonal;
    }
    Ok(LaplacianSnapshot { matrix, time })
}

/// Current slack of one monitored edge.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeMargin {
    pub edge: Edge,
    pub distance: f64,
    /// `R − d_ij`; zero or negative means the edge is lost.
    pub margin: f64,
    /// `d_ij > R − δ2`: the edge sits in the escape ring.
    pub in_escape_ring: bool,
}

/// Margins of the monitored tree edges at the given positions.
pub fn tree_edge_stress(
    topo: &Topology,
    positions: &[Vec2],
    sensing_radius: f64,
    buffer: f64,
) -> Vec<EdgeMargin> {
    topo.tree_edges
        .iter()
        .map(|&(i, j)| {
            let distance = positions[i - 1].distance(positions[j - 1]);
            EdgeMargin {
                edge: (i, j),
                distance,
                margin: sensing_radius - distance,
                in_escape_ring: distance > sensing_radius - buffer,
            }
        })
        .collect()
}
