//! Undirected connected agent topology.
//!
//! Neighborhoods are sorted and symmetric; connectivity is enforced at
//! construction. The diameter (longest shortest-path hop distance) is
//! computed once by all-pairs BFS, which is fine for the network sizes
//! this engine targets.

use std::collections::VecDeque;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("graph is disconnected: node {unreachable} unreachable from node 0")]
    Disconnected { unreachable: usize },
    #[error("invalid edge ({0}, {1}): self-loop")]
    SelfLoop(usize, usize),
    #[error("invalid edge ({0}, {1}): duplicate")]
    DuplicateEdge(usize, usize),
    #[error("invalid edge ({a}, {b}): node index out of range (N = {n})")]
    EdgeOutOfRange { a: usize, b: usize, n: usize },
    #[error("graph must have at least one node")]
    Empty,
    #[error("random geometric graph with radius {radius} came out disconnected; increase the radius or change the seed")]
    GeometricDisconnected { radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adj: Vec<Vec<usize>>,
    // reverse_slot[i][k] = position of i inside adj[j], where j = adj[i][k]
    reverse_slot: Vec<Vec<usize>>,
    diameter: usize,
}

impl Graph {
    pub fn build(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut adj = vec![Vec::new(); node_count];
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b) in edge_list {
            if a == b {
                return Err(GraphError::SelfLoop(a, b));
            }
            if a >= node_count || b >= node_count {
                return Err(GraphError::EdgeOutOfRange { a, b, n: node_count });
            }
            let (lo, hi) = (a.min(b), a.max(b));
            if edges.contains(&(lo, hi)) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
            edges.push((lo, hi));
            adj[lo].push(hi);
            adj[hi].push(lo);
        }
        for nbrs in &mut adj {
            nbrs.sort_unstable();
        }

        let dist0 = bfs_distances(&adj, 0);
        if let Some(u) = dist0.iter().position(|d| d.is_none()) {
            return Err(GraphError::Disconnected { unreachable: u });
        }

        let mut diameter = 0;
        for src in 0..node_count {
            for d in bfs_distances(&adj, src).into_iter().flatten() {
                diameter = diameter.max(d);
            }
        }

        let reverse_slot = adj
            .iter()
            .enumerate()
            .map(|(i, nbrs)| {
                nbrs.iter()
                    .map(|&j| adj[j].binary_search(&i).expect("symmetric adjacency"))
                    .collect()
            })
            .collect();

        Ok(Graph {
            node_count,
            edges,
            adj,
            reverse_slot,
            diameter,
        })
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        if n == 1 {
            return Self::build(1, &[]);
        }
        if n == 2 {
            return Self::build(2, &[(0, 1)]);
        }
        Self::build(n, &edges)
    }

    pub fn path(n: usize) -> Result<Self, GraphError> {
        let edges: Vec<_> = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
        Self::build(n, &edges)
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j));
            }
        }
        Self::build(n, &edges)
    }

    /// Nodes placed uniformly on the unit square; edge when the Euclidean
    /// distance is below `radius`. Fails if the draw is disconnected.
    pub fn random_geometric(n: usize, radius: f64, seed: u64) -> Result<Self, GraphError> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let positions: Vec<(f64, f64)> = (0..n)
            .map(|_| (rng.gen::<f64>(), rng.gen::<f64>()))
            .collect();
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let dx = positions[i].0 - positions[j].0;
                let dy = positions[i].1 - positions[j].1;
                if (dx * dx + dy * dy).sqrt() < radius {
                    edges.push((i, j));
                }
            }
        }
        Self::build(n, &edges).map_err(|e| match e {
            GraphError::Disconnected { .. } => GraphError::GeometricDisconnected { radius },
            other => other,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighborhood of node `i`. Panics on an out-of-range index.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    /// For neighbor slot `k` of node `i` (so j = neighbors(i)[k]), the slot
    /// of `i` inside neighbors(j). Lets agent i read the multiplier its
    /// neighbor owns for the shared proximity constraint.
    pub fn reverse_slot(&self, i: usize, k: usize) -> usize {
        self.reverse_slot[i][k]
    }

    pub fn diameter(&self) -> usize {
        self.diameter
    }

    pub fn hop_distance(&self, i: usize, j: usize) -> usize {
        bfs_distances(&self.adj, i)[j].expect("graph is connected")
    }
}

fn bfs_distances(adj: &[Vec<usize>], src: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[src] = Some(0);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}
