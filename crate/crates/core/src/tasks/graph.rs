//! Random k-nearest-neighbour graphs on the unit square, and graph targets.

use super::{too_small, unary, TaskError, TaskKind};
use crate::logic::Relation;
use crate::rng::{derive, rng_from};
use crate::tensor::PredTensor;
use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;
use rand::Rng;

pub const NUM_COLORS: usize = 4;
/// Color index treated as red.
pub const RED: usize = 0;
/// Default out-degree range, inclusive.
pub const DEFAULT_DEGREES: (usize, usize) = (1, 4);

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub m: usize,
    /// `edges[x][y]`: edge from x to y. Never true on the diagonal.
    pub edges: Vec<Vec<bool>>,
    pub colors: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list, dropping self-loops.
    pub fn from_edges(m: usize, list: &[(usize, usize)], undirected: bool) -> Self {
        let mut edges = vec![vec![false; m]; m];
        for &(x, y) in list {
            if x != y {
                edges[x][y] = true;
                if undirected {
                    edges[y][x] = true;
                }
            }
        }
        Self { m, edges, colors: vec![1; m] }
    }

    /// Samples `m` uniform points, draws each out-degree uniformly from the
    /// inclusive `degrees` range (clamped to `m - 1`) and links every node
    /// to that many nearest others. Colors are uniform over [`NUM_COLORS`].
    pub fn generate(m: usize, degrees: (usize, usize), seed: u64, undirected: bool) -> Result<Self, TaskError> {
        too_small(TaskKind::AdjacentToRed, m, 2)?;
        let (lo, hi) = (degrees.0, degrees.1.min(m - 1));
        if lo >= m || lo > hi {
            return Err(TaskError::Degree { k: lo, m });
        }
        let mut rng = rng_from(derive(seed, "graph"));
        let points: Vec<(f64, f64)> = (0..m).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let mut edges = vec![vec![false; m]; m];
        for x in 0..m {
            let k = rng.random_range(lo..=hi);
            let mut others: Vec<(f64, usize)> = (0..m)
                .filter(|&y| y != x)
                .map(|y| {
                    let (dx, dy) = (points[x].0 - points[y].0, points[x].1 - points[y].1);
                    (dx * dx + dy * dy, y)
                })
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for &(_, y) in &others[..k] {
                edges[x][y] = true;
                if undirected {
                    edges[y][x] = true;
                }
            }
        }
        let colors = (0..m).map(|_| rng.random_range(0..NUM_COLORS)).collect();
        Ok(Self { m, edges, colors })
    }

    /// Node `i` becomes node `pi[i]`.
    pub fn relabel(&self, pi: &[usize]) -> Self {
        let mut edges = vec![vec![false; self.m]; self.m];
        let mut colors = vec![0; self.m];
        for x in 0..self.m {
            colors[pi[x]] = self.colors[x];
            for y in 0..self.m {
                edges[pi[x]][pi[y]] = self.edges[x][y];
            }
        }
        Self { m: self.m, edges, colors }
    }

    pub fn out_degree(&self, x: usize) -> usize {
        self.edges[x].iter().filter(|&&e| e).count()
    }

    pub fn has_edge(&self) -> Relation {
        Relation::from_fn(2, self.m, |i| self.edges[i[0]][i[1]])
    }

    /// Hop distances from `src` along edge direction, `None` if unreachable.
    pub fn bfs(&self, src: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.m];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].expect("queued nodes are reached");
            for y in 0..self.m {
                if self.edges[x][y] && dist[y].is_none() {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    /// Binary `HasEdge` group and unary one-hot colors.
    pub fn premises(&self) -> Vec<PredTensor> {
        let flags: Vec<Vec<bool>> = self.colors.iter().map(|&c| (0..NUM_COLORS).map(|k| k == c).collect()).collect();
        vec![PredTensor::zeros(0, self.m, 0), unary(&flags), self.has_edge().to_tensor()]
    }
}

/// Labels for a graph target.
pub fn labels(g: &Graph, task: TaskKind) -> Result<Relation, TaskError> {
    match task {
        TaskKind::AdjacentToRed => Ok(Relation::from_fn(1, g.m, |i| {
            (0..g.m).any(|y| g.edges[i[0]][y] && g.colors[y] == RED)
        })),
        TaskKind::Connectivity(k) => {
            let dist: Vec<Vec<Option<usize>>> = (0..g.m).map(|x| g.bfs(x)).collect();
            Ok(Relation::from_fn(2, g.m, |i| dist[i[0]][i[1]].is_some_and(|d| d <= k)))
        }
        TaskKind::OutDegree(k) => Ok(Relation::from_fn(1, g.m, |i| g.out_degree(i[0]) == k)),
        other => Err(TaskError::WrongKind(other.into(), "a graph task")),
    }
}
