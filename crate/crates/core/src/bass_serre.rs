//! Radius-bounded balls of the Bass–Serre tree.
//!
//! A tree vertex is a coset `g·G_v`; it is labelled by the path word from the
//! basepoint in [`GraphOfGroups::left_form`] with the final element dropped.
//! Tree edges join a vertex `p` to `p·s·e` for left-coset representatives `s`.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::graph::{is_forest, Graph};
use crate::graph_of_groups::{GraphOfGroups, GroupWord};

pub const DEFAULT_CELL_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BallError {
    #[error("ball exceeded the cap of {0} cells")]
    CapExceeded(usize),
    #[error("vertex {0} out of range")]
    BadVertex(usize),
    #[error("acting word must be a loop at the basepoint {0}")]
    NotALoop(usize),
}

/// Canonical tree-vertex label of the coset `w·G_{end(w)}`.
pub fn tree_vertex_key(gog: &GraphOfGroups, w: &GroupWord) -> GroupWord {
    let mut key = gog.left_form(w);
    let end = gog.end(&key);
    let id = gog.vertex_group(end).identity();
    match key.steps.last_mut() {
        Some((_, g)) => *g = id,
        None => key.head = id,
    }
    key
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeVertex {
    pub word: GroupWord,
    /// Vertex of the underlying graph this is a lift of.
    pub vtype: usize,
    pub depth: usize,
    pub parent: Option<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    /// Edge of the underlying graph, directed from parent type to child type.
    pub edge: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Cell {
    Vertex(usize),
    Edge(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ActResult {
    Inside(Cell),
    OutOfBall,
}

/// A cell stabilizer as `conjugator · base · conjugator^-1`.
#[derive(Clone, Debug, Serialize)]
pub struct StabilizerData {
    pub cell: Cell,
    pub conjugator: GroupWord,
    /// `Vertex(v)` for `G_v`, `Edge(e)` for the edge group embedded at `t(e)`.
    pub base: Cell,
    /// Every stabilizer element as a reduced loop at the basepoint.
    pub elements: Vec<GroupWord>,
}

#[derive(Clone, Debug)]
pub struct TreeBall {
    gog: GraphOfGroups,
    pub basepoint: usize,
    pub radius: usize,
    pub vertices: Vec<TreeVertex>,
    pub edges: Vec<TreeEdge>,
    index: HashMap<GroupWord, usize>,
    graph: Graph,
}

/// Breadth-first ball of radius `radius` around the vertex `G_basepoint`.
pub fn build_tree_ball(gog: &GraphOfGroups, basepoint: usize, radius: usize, cap: usize) -> Result<TreeBall, BallError> {
    if basepoint >= gog.vertex_count() {
        return Err(BallError::BadVertex(basepoint));
    }
    let tables = gog.fix_transversals();
    let graph_l = gog.graph();
    let root = gog.identity_word(basepoint);
    let mut vertices = vec![TreeVertex { word: root.clone(), vtype: basepoint, depth: 0, parent: None }];
    let mut edges = Vec::new();
    let mut index = HashMap::from([(root, 0)]);
    let mut graph = Graph::new(1);
    let mut i = 0;
    while i < vertices.len() {
        let TreeVertex { word, vtype, depth, .. } = vertices[i].clone();
        i += 1;
        if depth == radius {
            continue;
        }
        let back = word.steps.last().map(|&(e, _)| graph_l.bar(e));
        for e in graph_l.out_edges(vtype) {
            let id = gog.vertex_group(vtype).identity();
            for &s in &tables.edges[graph_l.bar(e)].left_reps {
                if Some(e) == back && s == id {
                    continue;
                }
                let mut child = word.clone();
                match child.steps.last_mut() {
                    Some((_, g)) => *g = s,
                    None => child.head = s,
                }
                let t = graph_l.t(e);
                child.steps.push((e, gog.vertex_group(t).identity()));
                if vertices.len() + edges.len() + 2 > cap {
                    return Err(BallError::CapExceeded(cap));
                }
                let c = vertices.len();
                index.insert(child.clone(), c);
                vertices.push(TreeVertex { word: child, vtype: t, depth: depth + 1, parent: Some(i - 1) });
                graph.add_vertex();
                graph.add_edge(i - 1, c);
                edges.push(TreeEdge { parent: i - 1, child: c, edge: e });
            }
        }
    }
    Ok(TreeBall { gog: gog.clone(), basepoint, radius, vertices, edges, index, graph })
}

impl TreeBall {
    pub fn gog(&self) -> &GraphOfGroups {
        &self.gog
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn lookup(&self, key: &GroupWord) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Tree vertex of the coset `w·G_{end(w)}`, if inside the ball.
    pub fn locate(&self, w: &GroupWord) -> Option<usize> {
        self.lookup(&tree_vertex_key(&self.gog, w))
    }

    /// Number of vertices at each depth.
    pub fn level_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.radius + 1];
        for v in &self.vertices {
            counts[v.depth] += 1;
        }
        counts
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.iter().position(|e| (e.parent == a && e.child == b) || (e.parent == b && e.child == a))
    }

    /// Image of a cell under the loop `w` at the basepoint.
    pub fn act(&self, w: &GroupWord, cell: Cell) -> Result<ActResult, BallError> {
        if w.start != self.basepoint || !self.gog.is_loop(w) {
            return Err(BallError::NotALoop(self.basepoint));
        }
        let image_vertex = |v: usize| self.locate(&self.gog.mul(w, &self.vertices[v].word));
        Ok(match cell {
            Cell::Vertex(v) => match image_vertex(v) {
                Some(x) => ActResult::Inside(Cell::Vertex(x)),
                None => ActResult::OutOfBall,
            },
            Cell::Edge(k) => {
                let edge = &self.edges[k];
                match (image_vertex(edge.parent), image_vertex(edge.child)) {
                    (Some(a), Some(b)) => match self.edge_between(a, b) {
                        Some(x) => ActResult::Inside(Cell::Edge(x)),
                        None => ActResult::OutOfBall,
                    },
                    _ => ActResult::OutOfBall,
                }
            }
        })
    }

    pub fn stabilizer(&self, cell: Cell) -> StabilizerData {
        let gog = &self.gog;
        let (conjugator, base, group_elems) = match cell {
            Cell::Vertex(v) => {
                let tv = &self.vertices[v];
                (tv.word.clone(), Cell::Vertex(tv.vtype), gog.vertex_group(tv.vtype).elements().collect::<Vec<_>>())
            }
            Cell::Edge(k) => {
                let te = &self.edges[k];
                let child = &self.vertices[te.child];
                (child.word.clone(), Cell::Edge(te.edge), gog.edge_image(te.edge).elements().to_vec())
            }
        };
        let end = gog.end(&conjugator);
        let inv = gog.inverse(&conjugator);
        let elements = group_elems.into_iter().map(|g| gog.reduce(&gog.mul(&gog.mul(&conjugator, &gog.vertex_element(end, g)), &inv)).word).collect();
        StabilizerData { cell, conjugator, base, elements }
    }

    /// Vertex path from `u` to `v`.
    pub fn geodesic(&self, u: usize, v: usize) -> Vec<usize> {
        self.graph.shortest_path(u, v).expect("balls are connected")
    }

    /// Tree distance computed from labels alone: the labels share a common
    /// prefix up to the branch point.
    pub fn label_distance(&self, u: usize, v: usize) -> usize {
        let (a, b) = (&self.vertices[u].word, &self.vertices[v].word);
        let mut common = 0;
        while common < a.steps.len() && common < b.steps.len() {
            let before_a = if common == 0 { a.head } else { a.steps[common - 1].1 };
            let before_b = if common == 0 { b.head } else { b.steps[common - 1].1 };
            if before_a != before_b || a.steps[common].0 != b.steps[common].0 {
                break;
            }
            common += 1;
        }
        a.steps.len() + b.steps.len() - 2 * common
    }

    /// Expected degree `Σ [G_v : H_e]` over edges ending at `v`.
    pub fn full_degree(&self, vtype: usize) -> usize {
        self.gog.tree_degree(vtype)
    }

    pub fn is_tree(&self) -> bool {
        self.graph.is_connected() && self.edges.len() + 1 == self.vertices.len() && is_forest(&self.graph)
    }

    /// Interior vertices whose degree differs from the index formula.
    pub fn degree_violations(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].depth < self.radius && self.graph.degree(v) != self.full_degree(self.vertices[v].vtype)).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph tree {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let _ = writeln!(s, "  v{i} [label=\"{}\\nstab G{}^w\"];", self.gog.format_word(&v.word), v.vtype);
        }
        for e in &self.edges {
            let _ = writeln!(s, "  v{} -- v{} [label=\"e{}\"];", e.parent, e.child, e.edge);
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "basepoint": self.basepoint,
            "radius": self.radius,
            "vertices": self.vertices.iter().map(|v| json!({
                "word": self.gog.word_to_tokens(&v.word),
                "type": v.vtype,
                "depth": v.depth,
            })).collect::<Vec<_>>(),
            "edges": self.edges.iter().map(|e| json!([e.parent, e.child, e.edge])).collect::<Vec<_>>(),
        })
    }
}
