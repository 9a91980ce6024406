//! Plain undirected graphs on dense vertex indices, with the BFS helpers every
//! other module leans on.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// Undirected multigraph. Loops and parallel edges are representable so that
/// simpliciality can be checked rather than assumed.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { adj: vec![Vec::new(); n], edges: Vec::new() }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    pub fn cycle(n: usize) -> Self {
        Graph::from_edges(n, &(0..n).map(|i| (i, (i + 1) % n)).collect::<Vec<_>>())
    }

    pub fn path(n: usize) -> Self {
        Graph::from_edges(n, &(1..n).map(|i| (i - 1, i)).collect::<Vec<_>>())
    }

    pub fn complete(n: usize) -> Self {
        let mut g = Graph::new(n);
        for i in 0..n {
            for j in i + 1..n {
                g.add_edge(i, j);
            }
        }
        g
    }

    pub fn add_vertex(&mut self) -> usize {
        self.adj.push(Vec::new());
        self.adj.len() - 1
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> usize {
        self.adj[u].push(v);
        if u != v {
            self.adj[v].push(u);
        }
        self.edges.push((u, v));
        self.edges.len() - 1
    }

    /// Adds `{u, v}` unless it is a loop or already present.
    pub fn add_simple_edge(&mut self, u: usize, v: usize) -> bool {
        if u == v || self.has_edge(u, v) {
            return false;
        }
        self.add_edge(u, v);
        true
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.adj[u].len() <= self.adj[v].len() { (u, v) } else { (v, u) };
        self.adj[a].contains(&b)
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Simple means: no loops, no parallel edges.
    pub fn simplicial_violation(&self) -> Option<(usize, usize)> {
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &self.edges {
            if u == v {
                return Some((u, v));
            }
            let key = (u.min(v), u.max(v));
            if !seen.insert(key) {
                return Some(key);
            }
        }
        None
    }

    /// BFS distances from `src`, never entering `avoid`.
    pub fn distances_avoiding(&self, src: usize, avoid: Option<usize>) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.vertex_count()];
        if Some(src) == avoid {
            return dist;
        }
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(x) = queue.pop_front() {
            let d = dist[x].expect("queued vertices have distances");
            for &y in &self.adj[x] {
                if dist[y].is_none() && Some(y) != avoid {
                    dist[y] = Some(d + 1);
                    queue.push_back(y);
                }
            }
        }
        dist
    }

    pub fn distances(&self, src: usize) -> Vec<Option<usize>> {
        self.distances_avoiding(src, None)
    }

    /// A shortest path (as a vertex sequence) from `src` to `dst` avoiding
    /// `avoid`; among shortest paths the one whose predecessors have the least
    /// indices is returned.
    pub fn shortest_path_avoiding(&self, src: usize, dst: usize, avoid: Option<usize>) -> Option<Vec<usize>> {
        let dist = self.distances_avoiding(dst, avoid);
        dist[src]?;
        let mut path = vec![src];
        let mut x = src;
        while x != dst {
            let d = dist[x].expect("on a shortest path");
            x = *self.adj[x].iter().filter(|&&y| dist[y] == Some(d - 1) && Some(y) != avoid).min().expect("a predecessor exists");
            path.push(x);
        }
        Some(path)
    }

    pub fn shortest_path(&self, src: usize, dst: usize) -> Option<Vec<usize>> {
        self.shortest_path_avoiding(src, dst, None)
    }

    /// Component label per vertex, labels numbered by least member.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.vertex_count()];
        let mut next = 0;
        for s in 0..self.vertex_count() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            let mut stack = vec![s];
            while let Some(x) = stack.pop() {
                for &y in &self.adj[x] {
                    if label[y] == usize::MAX {
                        label[y] = next;
                        stack.push(y);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count() == 0 || self.components().iter().all(|&c| c == 0)
    }

    /// True when connected and acyclic.
    pub fn is_tree(&self) -> bool {
        self.is_connected() && self.edge_count() + 1 == self.vertex_count() && self.simplicial_violation().is_none()
    }

    pub fn all_distances(&self) -> Vec<Vec<Option<usize>>> {
        (0..self.vertex_count()).map(|v| self.distances(v)).collect()
    }

    /// Induced subgraph on `keep` (in the given order), plus the old→new map.
    pub fn induced(&self, keep: &[usize]) -> (Graph, Vec<Option<usize>>) {
        let mut map = vec![None; self.vertex_count()];
        for (i, &v) in keep.iter().enumerate() {
            map[v] = Some(i);
        }
        let mut g = Graph::new(keep.len());
        for &(u, v) in &self.edges {
            if let (Some(a), Some(b)) = (map[u], map[v]) {
                g.add_edge(a, b);
            }
        }
        (g, map)
    }
}

/// Union–find over dense indices.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false when `a` and `b` were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.parent[hi] = lo;
        true
    }
}

/// Acyclicity by union–find: true iff no edge closes a cycle.
pub fn is_forest(g: &Graph) -> bool {
    let mut uf = UnionFind::new(g.vertex_count());
    g.edges().iter().all(|&(u, v)| uf.union(u, v))
}
