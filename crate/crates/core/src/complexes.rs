//! 2-complexes over local graphs: `Ω_k` coning, links, the link/puncture
//! component correspondence, `π₁` presentations, bounded triviality checks,
//! Dehn function sampling and four-point hyperbolicity estimates.

use std::collections::{BTreeSet, HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::coset_enumeration::{Letter, Presentation};
use crate::graph::{Graph, UnionFind};
use crate::small_cancellation::{Amalgam, Dehn, Syllable};

pub const DEFAULT_LOOP_CAP: usize = 200_000;
pub const DEHN_SAMPLE_SEED: u64 = 0xCA1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComplexError {
    #[error("more than {0} simple loops")]
    LoopCap(usize),
    #[error("vertex {0} out of range")]
    BadVertex(usize),
    #[error("complex is disconnected")]
    Disconnected,
    #[error("2-cell {0} uses a missing 1-cell")]
    BadCell(usize),
}

/// A 2-complex: the 1-skeleton is a simplicial graph and each 2-cell is a
/// closed edge path given as a cyclic vertex sequence.
#[derive(Clone, Debug, Serialize)]
pub struct CellComplex {
    #[serde(serialize_with = "ser_graph")]
    pub graph: Graph,
    /// False when the vertex may have cells outside the ball.
    pub complete: Vec<bool>,
    pub cells2: Vec<Vec<usize>>,
}

fn ser_graph<S: serde::Serializer>(g: &Graph, s: S) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeStruct;
    let mut st = s.serialize_struct("Graph", 2)?;
    st.serialize_field("vertices", &g.vertex_count())?;
    st.serialize_field("edges", g.edges())?;
    st.end()
}

impl CellComplex {
    pub fn new(graph: Graph, complete: Vec<bool>, cells2: Vec<Vec<usize>>) -> Result<Self, ComplexError> {
        for (i, c) in cells2.iter().enumerate() {
            for j in 0..c.len() {
                if !graph.has_edge(c[j], c[(j + 1) % c.len()]) {
                    return Err(ComplexError::BadCell(i));
                }
            }
        }
        Ok(CellComplex { graph, complete, cells2 })
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.graph.vertex_count() as i64 - self.graph.edge_count() as i64 + self.cells2.len() as i64
    }

    pub fn edge_interior(&self, e: usize) -> bool {
        let (u, v) = self.graph.edges()[e];
        self.complete[u] && self.complete[v]
    }

    pub fn cell_interior(&self, c: usize) -> bool {
        self.cells2[c].iter().all(|&v| self.complete[v])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("complex serializes")
    }

    /// OFF-style listing: counts, then edges, then faces.
    pub fn to_off(&self) -> String {
        let mut out = format!("OFF\n{} {} {}\n", self.graph.vertex_count(), self.cells2.len(), self.graph.edge_count());
        for (u, v) in self.graph.edges() {
            out.push_str(&format!("e {u} {v}\n"));
        }
        for c in &self.cells2 {
            out.push_str(&c.len().to_string());
            for v in c {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Rotation and reversal invariant form: start at the least vertex, then go
/// towards the smaller neighbour.
pub fn canonical_loop(c: &[usize]) -> Vec<usize> {
    let n = c.len();
    if n == 0 {
        return Vec::new();
    }
    let i = (0..n).min_by_key(|&i| c[i]).unwrap();
    let fwd: Vec<usize> = (0..n).map(|j| c[(i + j) % n]).collect();
    let bwd: Vec<usize> = (0..n).map(|j| c[(i + n - j) % n]).collect();
    fwd.min(bwd)
}

/// Every simple loop of length `3..=k`, one per rotation/reversal class.
pub fn simple_loops(g: &Graph, k: usize, cap: usize) -> Result<Vec<Vec<usize>>, ComplexError> {
    let mut out = Vec::new();
    for s in 0..g.vertex_count() {
        let mut path = vec![s];
        let mut on = vec![false; g.vertex_count()];
        on[s] = true;
        dfs_loops(g, s, k, &mut path, &mut on, &mut out, cap)?;
    }
    out.sort();
    Ok(out)
}

fn dfs_loops(g: &Graph, s: usize, k: usize, path: &mut Vec<usize>, on: &mut [bool], out: &mut Vec<Vec<usize>>, cap: usize) -> Result<(), ComplexError> {
    let last = *path.last().unwrap();
    let mut nbrs: Vec<usize> = g.neighbors(last).to_vec();
    nbrs.sort_unstable();
    nbrs.dedup();
    for w in nbrs {
        if w == s && path.len() >= 3 && path[1] < path[path.len() - 1] {
            out.push(path.clone());
            if out.len() > cap {
                return Err(ComplexError::LoopCap(cap));
            }
        } else if w > s && !on[w] && path.len() < k {
            on[w] = true;
            path.push(w);
            dfs_loops(g, s, k, path, on, out, cap)?;
            path.pop();
            on[w] = false;
        }
    }
    Ok(())
}

/// `Ω_k`: the graph with a 2-cell glued along every simple loop of length at
/// most `k`.
pub fn omega_k(g: &Graph, complete: &[bool], k: usize, cap: usize) -> Result<CellComplex, ComplexError> {
    let cells = simple_loops(g, k, cap)?;
    CellComplex::new(g.clone(), complete.to_vec(), cells)
}

#[derive(Clone, Debug, Serialize)]
pub struct LinkGraph {
    pub base: usize,
    /// Link vertex `i` is the 1-cell from `base` to `neighbors[i]`.
    pub neighbors: Vec<usize>,
    #[serde(serialize_with = "ser_graph")]
    pub graph: Graph,
    pub partial: bool,
}

impl LinkGraph {
    pub fn component_count(&self) -> usize {
        let comps = self.graph.components();
        comps.iter().collect::<BTreeSet<_>>().len()
    }
}

/// Link of a vertex: one link vertex per incident 1-cell, one link edge per
/// corner of a 2-cell at the vertex.
pub fn link(x: &CellComplex, v: usize) -> Result<LinkGraph, ComplexError> {
    if v >= x.graph.vertex_count() {
        return Err(ComplexError::BadVertex(v));
    }
    let mut neighbors: Vec<usize> = x.graph.neighbors(v).to_vec();
    neighbors.sort_unstable();
    neighbors.dedup();
    let pos: HashMap<usize, usize> = neighbors.iter().enumerate().map(|(i, &w)| (w, i)).collect();
    let mut graph = Graph::new(neighbors.len());
    for c in &x.cells2 {
        let n = c.len();
        for i in 0..n {
            if c[i] == v {
                graph.add_edge(pos[&c[(i + n - 1) % n]], pos[&c[(i + 1) % n]]);
            }
        }
    }
    Ok(LinkGraph { base: v, neighbors, graph, partial: !x.complete[v] })
}

#[derive(Clone, Debug, Serialize)]
pub struct CorrespondenceReport {
    pub link_components: usize,
    /// Components of `X` minus the orbit whose closure contains the vertex.
    pub puncture_components: usize,
    /// Puncture component of each link component.
    pub mapping: Vec<usize>,
    pub bijective: bool,
    /// Some matched component reaches an incomplete vertex.
    pub boundary_interference: bool,
}

/// Matches link components at `v` with the components of `X ∖ orbit` whose
/// closure contains `v`. `orbit` must contain `v`.
pub fn link_component_correspondence(x: &CellComplex, v: usize, orbit: &[usize]) -> Result<CorrespondenceReport, ComplexError> {
    let lk = link(x, v)?;
    let nv = x.graph.vertex_count();
    let ne = x.graph.edge_count();
    let removed: BTreeSet<usize> = orbit.iter().copied().chain([v]).collect();
    // nodes: vertices, then open edges, then open 2-cells
    let mut uf = UnionFind::new(nv + ne + x.cells2.len());
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, &(a, b)) in x.graph.edges().iter().enumerate() {
        edge_id.insert((a.min(b), a.max(b)), i);
        for w in [a, b] {
            if !removed.contains(&w) {
                uf.union(w, nv + i);
            }
        }
    }
    for (ci, c) in x.cells2.iter().enumerate() {
        for j in 0..c.len() {
            let (a, b) = (c[j], c[(j + 1) % c.len()]);
            uf.union(nv + ne + ci, nv + edge_id[&(a.min(b), a.max(b))]);
        }
    }
    let comps = lk.graph.components();
    let mut comp_ids: Vec<usize> = comps.clone();
    comp_ids.sort_unstable();
    comp_ids.dedup();
    let mut mapping = Vec::new();
    let mut roots = Vec::new();
    for &cid in &comp_ids {
        let i = comps.iter().position(|&c| c == cid).unwrap();
        let w = lk.neighbors[i];
        let root = uf.find(nv + edge_id[&(v.min(w), v.max(w))]);
        let idx = roots.iter().position(|&r| r == root).unwrap_or_else(|| {
            roots.push(root);
            roots.len() - 1
        });
        mapping.push(idx);
    }
    let boundary_interference = (0..nv).any(|w| !removed.contains(&w) && !x.complete[w] && roots.contains(&uf.find(w)));
    Ok(CorrespondenceReport {
        link_components: comp_ids.len(),
        puncture_components: roots.len(),
        bijective: roots.len() == comp_ids.len(),
        mapping,
        boundary_interference,
    })
}

/// Generators are the 1-cells off a BFS spanning tree, oriented from the
/// lower to the higher endpoint; relators are the 2-cell boundaries.
pub fn pi1_presentation(x: &CellComplex) -> Result<(Presentation, Vec<usize>), ComplexError> {
    let g = &x.graph;
    if g.vertex_count() > 0 && !g.is_connected() {
        return Err(ComplexError::Disconnected);
    }
    let mut in_tree = vec![false; g.edge_count()];
    let mut seen = vec![false; g.vertex_count()];
    let mut incident: Vec<Vec<(usize, usize)>> = vec![Vec::new(); g.vertex_count()];
    for (i, &(a, b)) in g.edges().iter().enumerate() {
        incident[a].push((b, i));
        incident[b].push((a, i));
    }
    if g.vertex_count() > 0 {
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(w, i) in &incident[u] {
                if !seen[w] {
                    seen[w] = true;
                    in_tree[i] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let gens: Vec<usize> = (0..g.edge_count()).filter(|&i| !in_tree[i]).collect();
    let letter_of: HashMap<usize, Letter> = gens.iter().enumerate().map(|(j, &i)| (i, j as Letter + 1)).collect();
    let mut edge_id: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, &(a, b)) in g.edges().iter().enumerate() {
        edge_id.entry((a.min(b), a.max(b))).or_insert(i);
    }
    let mut relators = Vec::new();
    for c in &x.cells2 {
        let mut word = Vec::new();
        for j in 0..c.len() {
            let (a, b) = (c[j], c[(j + 1) % c.len()]);
            let i = edge_id[&(a.min(b), a.max(b))];
            if let Some(&l) = letter_of.get(&i) {
                word.push(if a < b { l } else { -l });
            }
        }
        let word = cyclic_free_reduce(&word);
        if !word.is_empty() {
            relators.push(word);
        }
    }
    Ok((Presentation { generators: gens.len(), relators }, gens))
}

pub fn free_reduce(w: &[Letter]) -> Vec<Letter> {
    let mut out: Vec<Letter> = Vec::new();
    for &l in w {
        if out.last() == Some(&-l) {
            out.pop();
        } else {
            out.push(l);
        }
    }
    out
}

pub fn cyclic_free_reduce(w: &[Letter]) -> Vec<Letter> {
    let mut v = free_reduce(w);
    while v.len() >= 2 && v[0] == -v[v.len() - 1] {
        v.pop();
        v.remove(0);
    }
    v
}

/// `ℤ^free_rank ⊕ ⊕ ℤ/t`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AbelianGroup {
    pub free_rank: usize,
    pub torsion: Vec<i128>,
}

impl AbelianGroup {
    pub fn is_trivial(&self) -> bool {
        self.free_rank == 0 && self.torsion.is_empty()
    }
}

/// `m[dst][from..] -= q * m[src][from..]`
fn row_sub(m: &mut [Vec<i128>], dst: usize, src: usize, q: i128, from: usize) {
    let (d, s) = if dst < src {
        let (a, b) = m.split_at_mut(src);
        (&mut a[dst], &b[0])
    } else {
        let (a, b) = m.split_at_mut(dst);
        (&mut b[0], &a[src])
    };
    for (x, y) in d[from..].iter_mut().zip(&s[from..]) {
        *x -= q * y;
    }
}

/// Diagonal of the Smith normal form of an integer matrix.
pub fn smith_diagonal(mut m: Vec<Vec<i128>>, cols: usize) -> Vec<i128> {
    let rows = m.len();
    let mut diag = Vec::new();
    let mut t = 0;
    while t < rows.min(cols) {
        // pivot: least nonzero absolute value in the remaining block
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                if m[i][j] != 0 && best.is_none_or(|(a, b)| m[i][j].abs() < m[a][b].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        m.swap(t, pi);
        for row in m.iter_mut() {
            row.swap(t, pj);
        }
        loop {
            let p = m[t][t];
            let mut dirty = false;
            for i in t + 1..rows {
                let q = m[i][t] / p;
                if q != 0 {
                    row_sub(&mut m, i, t, q, t);
                }
                if m[i][t] != 0 {
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                let q = m[t][j] / p;
                if q != 0 {
                    for row in m.iter_mut() {
                        row[j] -= q * row[t];
                    }
                }
                if m[t][j] != 0 {
                    dirty = true;
                }
            }
            if !dirty {
                // divisibility of the rest of the block
                let bad = (t + 1..rows).flat_map(|i| (t + 1..cols).map(move |j| (i, j))).find(|&(i, j)| m[i][j] % p != 0);
                match bad {
                    Some((i, _)) => {
                        row_sub(&mut m, t, i, -1, t);
                    }
                    None => break,
                }
            }
            // move the smallest entry of row/column t to the pivot
            let mut best = (t, t);
            for i in t..rows {
                if m[i][t] != 0 && m[i][t].abs() < m[best.0][best.1].abs() {
                    best = (i, t);
                }
            }
            for j in t..cols {
                if m[t][j] != 0 && m[t][j].abs() < m[best.0][best.1].abs() {
                    best = (t, j);
                }
            }
            m.swap(t, best.0);
            for row in m.iter_mut() {
                row.swap(t, best.1);
            }
        }
        diag.push(m[t][t].abs());
        t += 1;
    }
    diag
}

pub fn abelianization(p: &Presentation) -> AbelianGroup {
    let rows: Vec<Vec<i128>> = p
        .relators
        .iter()
        .map(|r| {
            let mut row = vec![0i128; p.generators];
            for &l in r {
                row[l.unsigned_abs() as usize - 1] += l.signum() as i128;
            }
            row
        })
        .collect();
    let diag = smith_diagonal(rows, p.generators);
    AbelianGroup { free_rank: p.generators - diag.len(), torsion: diag.into_iter().filter(|&d| d != 1).collect() }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Triviality {
    Yes { rewrites: usize },
    No { h1: AbelianGroup },
    Unknown { rewrites: usize, remaining_generators: usize },
}

/// NO from a nontrivial abelianization; YES when Tietze eliminations within
/// `effort` letter rewrites remove every generator.
pub fn bounded_trivial(p: &Presentation, effort: usize) -> Triviality {
    let h1 = abelianization(p);
    if !h1.is_trivial() {
        return Triviality::No { h1 };
    }
    let mut alive: BTreeSet<Letter> = (1..=p.generators as Letter).collect();
    let mut rels: Vec<Vec<Letter>> = p.relators.iter().map(|r| cyclic_free_reduce(r)).filter(|r| !r.is_empty()).collect();
    let mut rewrites = 0;
    while !alive.is_empty() {
        // shortest relator in which some generator occurs exactly once
        let mut pick: Option<(usize, usize, Letter)> = None;
        for (ri, r) in rels.iter().enumerate() {
            let mut count: HashMap<Letter, usize> = HashMap::new();
            for &l in r {
                *count.entry(l.abs()).or_default() += 1;
            }
            if let Some(&g) = r.iter().map(|l| l.abs()).filter(|g| count[g] == 1).collect::<BTreeSet<_>>().iter().next() {
                if pick.is_none_or(|(len, _, _)| r.len() < len) {
                    pick = Some((r.len(), ri, g));
                }
            }
        }
        let Some((_, ri, g)) = pick else { break };
        let r = rels.swap_remove(ri);
        let i = r.iter().position(|l| l.abs() == g).unwrap();
        // r = u g^s v = 1  =>  g^s = u^-1 v^-1
        let s = r[i].signum();
        let u = &r[..i];
        let v = &r[i + 1..];
        let mut value: Vec<Letter> = u.iter().rev().map(|l| -l).chain(v.iter().rev().map(|l| -l)).collect();
        if s < 0 {
            value = value.iter().rev().map(|l| -l).collect();
        }
        let inv: Vec<Letter> = value.iter().rev().map(|l| -l).collect();
        for rel in rels.iter_mut() {
            let mut next = Vec::with_capacity(rel.len());
            for &l in rel.iter() {
                if l == g {
                    next.extend_from_slice(&value);
                    rewrites += value.len();
                } else if l == -g {
                    next.extend_from_slice(&inv);
                    rewrites += inv.len();
                } else {
                    next.push(l);
                }
            }
            *rel = cyclic_free_reduce(&next);
        }
        rels.retain(|r| !r.is_empty());
        alive.remove(&g);
        if rewrites > effort {
            return Triviality::Unknown { rewrites, remaining_generators: alive.len() };
        }
    }
    if alive.is_empty() {
        Triviality::Yes { rewrites }
    } else {
        Triviality::Unknown { rewrites, remaining_generators: alive.len() }
    }
}

/// Least `n` in the range at which `bounded_trivial(Ω_n)` says YES.
pub fn least_simply_connected_n(g: &Graph, complete: &[bool], range: std::ops::RangeInclusive<usize>, effort: usize) -> Result<Option<usize>, ComplexError> {
    for n in range {
        let x = omega_k(g, complete, n, DEFAULT_LOOP_CAP)?;
        let (p, _) = pi1_presentation(&x)?;
        if matches!(bounded_trivial(&p, effort), Triviality::Yes { .. }) {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

// ---- Dehn function sampling ---------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DehnRow {
    pub length: usize,
    pub words: usize,
    pub max_area: Option<usize>,
    /// Kernel words the reduction failed to empty.
    pub stuck: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DehnSample {
    pub seed: Option<u64>,
    pub rows: Vec<DehnRow>,
    /// Least-squares slope of max area against length (an estimate).
    pub slope: Option<f64>,
}

fn fit_slope(rows: &[DehnRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().filter_map(|r| r.max_area.map(|a| (r.length as f64, a as f64))).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Every reduced syllable word up to `max_len`; membership is decided by
/// `in_kernel` and the area by Dehn reduction.
pub fn dehn_function_exhaustive(am: &Amalgam, dehn: &Dehn, max_len: usize, in_kernel: impl Fn(&[Syllable]) -> bool) -> DehnSample {
    let gog = am.gog();
    let mut by_len: Vec<Vec<Vec<Syllable>>> = vec![vec![Vec::new()]];
    for len in 1..=max_len {
        let mut next = Vec::new();
        for w in &by_len[len - 1] {
            let sides: Vec<usize> = match w.last() {
                Some(&(s, _)) => vec![1 - s],
                None => vec![0, 1],
            };
            for s in sides {
                let grp = gog.vertex_group(s);
                for x in grp.elements().filter(|&x| x != grp.identity()) {
                    let mut w2 = w.clone();
                    w2.push((s, x));
                    next.push(w2);
                }
            }
        }
        by_len.push(next);
    }
    let mut rows = Vec::new();
    for (len, words) in by_len.iter().enumerate().skip(1) {
        let mut row = DehnRow { length: len, words: 0, max_area: None, stuck: 0 };
        for w in words {
            if am.canonical(w).len() != w.len() || !in_kernel(w) {
                continue;
            }
            row.words += 1;
            let res = dehn.reduce(w);
            if res.reduced.is_empty() {
                row.max_area = Some(row.max_area.unwrap_or(0).max(res.area));
            } else {
                row.stuck += 1;
            }
        }
        rows.push(row);
    }
    DehnSample { seed: None, slope: fit_slope(&rows), rows }
}

/// Random products of conjugates of members of the symmetrized set, bucketed
/// by length: row `L` covers words of length at most `L`.
pub fn dehn_function_sample(am: &Amalgam, dehn: &Dehn, lengths: &[usize], samples: usize, seed: u64) -> DehnSample {
    let gog = am.gog();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let members = &dehn.set().members;
    let mut rows: Vec<DehnRow> = lengths.iter().map(|&l| DehnRow { length: l, words: 0, max_area: None, stuck: 0 }).collect();
    for _ in 0..samples {
        let mut w: Vec<Syllable> = Vec::new();
        for _ in 0..rng.gen_range(1..=3) {
            let mut g: Vec<Syllable> = Vec::new();
            let mut side = rng.gen_range(0..2);
            for _ in 0..rng.gen_range(0..5) {
                let grp = gog.vertex_group(side);
                g.push((side, rng.gen_range(1..grp.order())));
                side = 1 - side;
            }
            let s = &members[rng.gen_range(0..members.len())];
            w = am.concat(&w, &am.concat(&am.concat(&g, s), &am.inverse(&g)));
        }
        let res = dehn.reduce(&w);
        for row in rows.iter_mut().filter(|r| w.len() <= r.length) {
            row.words += 1;
            if res.reduced.is_empty() {
                row.max_area = Some(row.max_area.unwrap_or(0).max(res.area));
            } else {
                row.stuck += 1;
            }
        }
    }
    DehnSample { seed: Some(seed), slope: fit_slope(&rows), rows }
}

// ---- four-point condition -----------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DeltaEstimate {
    /// Largest four-point defect observed; `δ` is half of it.
    pub twice_delta: usize,
    pub exhaustive: bool,
    pub tuples: usize,
    pub seed: u64,
}

impl DeltaEstimate {
    pub fn delta(&self) -> f64 {
        self.twice_delta as f64 / 2.0
    }
}

fn four_point(d: &[Vec<usize>], x: usize, y: usize, z: usize, w: usize) -> usize {
    let mut s = [d[x][y] + d[z][w], d[x][z] + d[y][w], d[x][w] + d[y][z]];
    s.sort_unstable();
    s[2] - s[1]
}

/// Four-point defect over all 4-tuples when the graph has at most
/// `threshold` vertices, else over `samples` seeded random tuples.
pub fn hyperbolicity_estimate(g: &Graph, threshold: usize, samples: usize, seed: u64) -> Result<DeltaEstimate, ComplexError> {
    if !g.is_connected() {
        return Err(ComplexError::Disconnected);
    }
    let n = g.vertex_count();
    let d: Vec<Vec<usize>> = g.all_distances().into_iter().map(|row| row.into_iter().map(|x| x.unwrap_or(0)).collect()).collect();
    let mut best = 0;
    let mut tuples = 0;
    if n <= threshold {
        for x in 0..n {
            for y in x..n {
                for z in y..n {
                    for w in z..n {
                        best = best.max(four_point(&d, x, y, z, w));
                        tuples += 1;
                    }
                }
            }
        }
        return Ok(DeltaEstimate { twice_delta: best, exhaustive: true, tuples, seed });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let t: Vec<usize> = (0..4).map(|_| rng.gen_range(0..n)).collect();
        best = best.max(four_point(&d, t[0], t[1], t[2], t[3]));
        tuples += 1;
    }
    Ok(DeltaEstimate { twice_delta: best, exhaustive: false, tuples, seed })
}

/// Word-metric ball of radius `r` in the standard Cayley graph of `ℤ²`, with
/// vertex coordinates.
pub fn grid_ball(r: i64) -> (Graph, Vec<(i64, i64)>, Vec<bool>) {
    let mut pts = Vec::new();
    for x in -r..=r {
        for y in -r..=r {
            if x.abs() + y.abs() <= r {
                pts.push((x, y));
            }
        }
    }
    let idx: HashMap<(i64, i64), usize> = pts.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let mut g = Graph::new(pts.len());
    for (i, &(x, y)) in pts.iter().enumerate() {
        for q in [(x + 1, y), (x, y + 1)] {
            if let Some(&j) = idx.get(&q) {
                g.add_edge(i, j);
            }
        }
    }
    let complete = pts.iter().map(|&(x, y)| x.abs() + y.abs() < r).collect();
    (g, pts, complete)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn all_complete(g: &Graph) -> Vec<bool> {
        vec![true; g.vertex_count()]
    }

    fn wheel(n: usize) -> Graph {
        let mut g = Graph::new(n + 1);
        for i in 0..n {
            g.add_edge(n, i);
            g.add_edge(i, (i + 1) % n);
        }
        g
    }

    #[test]
    fn omega_small_cycles() {
        let c3 = Graph::cycle(3);
        assert_eq!(omega_k(&c3, &all_complete(&c3), 3, 100).unwrap().cells2.len(), 1);
        let c4 = Graph::cycle(4);
        assert_eq!(omega_k(&c4, &all_complete(&c4), 3, 100).unwrap().cells2.len(), 0);
        assert_eq!(omega_k(&c4, &all_complete(&c4), 4, 100).unwrap().cells2.len(), 1);
        let k4 = Graph::complete(4);
        assert_eq!(simple_loops(&k4, 4, 100).unwrap().len(), 7);
        assert_eq!(simple_loops(&k4, 4, 5).unwrap_err(), ComplexError::LoopCap(5));
    }

    #[test]
    fn omega_grid_squares() {
        let (g, pts, complete) = grid_ball(3);
        let x = omega_k(&g, &complete, 4, 1000).unwrap();
        let set: BTreeSet<(i64, i64)> = pts.iter().copied().collect();
        let unit = pts.iter().filter(|&&(a, b)| [(a + 1, b), (a, b + 1), (a + 1, b + 1)].iter().all(|q| set.contains(q))).count();
        assert_eq!(x.cells2.len(), unit);
        assert!(x.cells2.iter().all(|c| c.len() == 4));
        assert_eq!(x.euler_characteristic(), 1);
    }

    #[test]
    fn links() {
        let w = wheel(5);
        let x = omega_k(&w, &all_complete(&w), 3, 100).unwrap();
        let lk = link(&x, 5).unwrap();
        assert!(lk.graph.is_connected());
        assert!((0..5).all(|v| lk.graph.degree(v) == 2));
        assert_eq!(lk.graph.edge_count(), 5);
        let t = Graph::path(4);
        let tx = omega_k(&t, &all_complete(&t), 5, 100).unwrap();
        assert_eq!(link(&tx, 1).unwrap().graph.edge_count(), 0);
        let c4 = Graph::cycle(4);
        let sq = omega_k(&c4, &all_complete(&c4), 4, 100).unwrap();
        let l0 = link(&sq, 0).unwrap();
        assert_eq!((l0.graph.vertex_count(), l0.graph.edge_count()), (2, 1));
    }

    #[test]
    fn correspondence() {
        // two triangles sharing vertex 0
        let g = Graph::from_edges(5, &[(0, 1), (1, 2), (2, 0), (0, 3), (3, 4), (4, 0)]);
        let x = omega_k(&g, &all_complete(&g), 3, 100).unwrap();
        let rep = link_component_correspondence(&x, 0, &[0]).unwrap();
        assert_eq!((rep.link_components, rep.puncture_components), (2, 2));
        assert!(rep.bijective);
        let w = wheel(6);
        let x = omega_k(&w, &all_complete(&w), 3, 100).unwrap();
        let rep = link_component_correspondence(&x, 6, &[6]).unwrap();
        assert_eq!((rep.link_components, rep.puncture_components), (1, 1));
        // cut vertex joining a triangle and a pendant edge
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 0), (0, 3)]);
        let x = omega_k(&g, &all_complete(&g), 3, 100).unwrap();
        let rep = link_component_correspondence(&x, 0, &[0]).unwrap();
        assert_eq!((rep.link_components, rep.puncture_components), (2, 2));
    }

    #[test]
    fn presentations() {
        let t = Graph::path(5);
        let (p, _) = pi1_presentation(&omega_k(&t, &all_complete(&t), 3, 10).unwrap()).unwrap();
        assert_eq!((p.generators, p.relators.len()), (0, 0));
        let c4 = Graph::cycle(4);
        let (p, _) = pi1_presentation(&omega_k(&c4, &all_complete(&c4), 3, 10).unwrap()).unwrap();
        assert_eq!((p.generators, p.relators.len()), (1, 0));
        let (g, _, complete) = grid_ball(3);
        let (p, _) = pi1_presentation(&omega_k(&g, &complete, 4, 1000).unwrap()).unwrap();
        assert!(matches!(bounded_trivial(&p, 10_000), Triviality::Yes { .. }));
        let two = Graph::from_edges(2, &[]);
        assert_eq!(pi1_presentation(&CellComplex::new(two, vec![true; 2], vec![]).unwrap()).unwrap_err(), ComplexError::Disconnected);
    }

    #[test]
    fn triviality_verdicts() {
        assert_eq!(bounded_trivial(&Presentation { generators: 0, relators: vec![] }, 10), Triviality::Yes { rewrites: 0 });
        assert_eq!(
            bounded_trivial(&Presentation { generators: 1, relators: vec![] }, 10),
            Triviality::No { h1: AbelianGroup { free_rank: 1, torsion: vec![] } }
        );
        let comm = Presentation { generators: 2, relators: vec![vec![1, 2, -1, -2]] };
        assert_eq!(bounded_trivial(&comm, 10), Triviality::No { h1: AbelianGroup { free_rank: 2, torsion: vec![] } });
        let z6 = Presentation { generators: 2, relators: vec![vec![1, 1], vec![2, 2, 2], vec![1, 2, -1, -2]] };
        assert_eq!(abelianization(&z6), AbelianGroup { free_rank: 0, torsion: vec![6] });
        // perfect but nontrivial-looking: x = y, y = 1
        let p = Presentation { generators: 2, relators: vec![vec![1, -2], vec![2]] };
        assert!(matches!(bounded_trivial(&p, 10), Triviality::Yes { .. }));
        // binary icosahedral group: perfect, so H1 gives nothing and rewriting stalls
        let bi = Presentation { generators: 2, relators: vec![vec![1, 1, 1, -2, -2, -2, -2, -2], vec![1, 1, 1, -2, -1, -2, -1]] };
        assert!(matches!(bounded_trivial(&bi, 1000), Triviality::Unknown { .. }));
    }

    #[test]
    fn omega_three_verdicts() {
        let c3 = Graph::cycle(3);
        let (p, _) = pi1_presentation(&omega_k(&c3, &all_complete(&c3), 3, 10).unwrap()).unwrap();
        assert!(matches!(bounded_trivial(&p, 100), Triviality::Yes { .. }));
        let c4 = Graph::cycle(4);
        let (p, _) = pi1_presentation(&omega_k(&c4, &all_complete(&c4), 3, 10).unwrap()).unwrap();
        assert_eq!(bounded_trivial(&p, 100), Triviality::No { h1: AbelianGroup { free_rank: 1, torsion: vec![] } });
        let (g, _, complete) = grid_ball(2);
        assert_eq!(least_simply_connected_n(&g, &complete, 0..=6, 10_000).unwrap(), Some(4));
    }

    #[test]
    fn hyperbolicity() {
        let t = Graph::path(7);
        assert_eq!(hyperbolicity_estimate(&t, 50, 0, 1).unwrap().twice_delta, 0);
        let c8 = Graph::cycle(8);
        let est = hyperbolicity_estimate(&c8, 50, 0, 1).unwrap();
        assert_eq!(est.delta(), 2.0);
        assert!(est.exhaustive);
        let deltas: Vec<usize> = (1..=4).map(|r| hyperbolicity_estimate(&grid_ball(r).0, 50, 0, 1).unwrap().twice_delta).collect();
        assert!(deltas.windows(2).all(|w| w[0] <= w[1]));
        assert!(deltas[3] > deltas[0]);
        let sampled = hyperbolicity_estimate(&grid_ball(4).0, 10, 5000, 3).unwrap();
        assert!(!sampled.exhaustive && sampled.twice_delta <= deltas[3]);
    }

    /// Homomorphisms to `ℤ/n`, counted by brute force.
    fn hom_count(p: &Presentation, n: i64) -> usize {
        let gens = p.generators;
        let total = (n as usize).pow(gens as u32);
        (0..total)
            .filter(|&code| {
                let vals: Vec<i64> = (0..gens).map(|i| ((code / (n as usize).pow(i as u32)) % n as usize) as i64).collect();
                p.relators.iter().all(|r| r.iter().map(|&l| l.signum() as i64 * vals[l.unsigned_abs() as usize - 1]).sum::<i64>().rem_euclid(n) == 0)
            })
            .count()
    }

    fn expected_hom_count(h: &AbelianGroup, n: i64) -> usize {
        let gcd = |mut a: i64, mut b: i64| {
            while b != 0 {
                (a, b) = (b, a % b);
            }
            a.abs()
        };
        let mut c = (n as usize).pow(h.free_rank as u32);
        for &t in &h.torsion {
            c *= gcd(t as i64, n) as usize;
        }
        c
    }

    #[test]
    fn dehn_function_dihedral_exhaustive() {
        use crate::coset_enumeration::FiniteQuotient;
        use crate::graph_of_groups::fixtures::infinite_dihedral;
        use crate::small_cancellation::symmetrize;
        let gog = infinite_dihedral();
        let am = Amalgam::new(&gog).unwrap();
        let r3 = am.pow(&[(0, 1), (1, 1)], 3);
        let rel = am.to_word(&r3);
        let (pres, map) = gog.presentation(&[rel]);
        let quotient = FiniteQuotient::from_presentation(&pres, 1000).unwrap();
        assert_eq!(quotient.group.order(), 6);
        let dehn = Dehn::new_unchecked(&am, symmetrize(&am, &r3).unwrap());
        let in_kernel = |w: &[Syllable]| quotient.evaluate(&map.letters(&gog, &am.to_word(w))) == quotient.group.identity();
        let sample = dehn_function_exhaustive(&am, &dehn, 8, in_kernel);
        assert_eq!(sample.rows.len(), 8);
        for row in &sample.rows {
            assert_eq!(row.stuck, 0);
            assert_eq!(row.words, if row.length % 6 == 0 { 2 } else { 0 });
        }
        assert_eq!(sample.rows[5].max_area, Some(1));
        // no relators: nothing to measure
        let none = dehn_function_exhaustive(&am, &dehn, 4, |_| false);
        assert!(none.rows.iter().all(|r| r.words == 0 && r.max_area.is_none()));
    }

    #[test]
    fn dehn_function_small_cancellation_sample() {
        use crate::graph_of_groups::fixtures::c4_free_c6;
        use crate::small_cancellation::symmetrize;
        let gog = c4_free_c6();
        let am = Amalgam::new(&gog).unwrap();
        let r = [(0, 1), (1, 1), (0, 2), (1, 2), (0, 3), (1, 3)];
        let dehn = Dehn::new(&am, symmetrize(&am, &am.pow(&r, 12)).unwrap()).unwrap();
        let a = dehn_function_sample(&am, &dehn, &[100, 200, 300], 30, DEHN_SAMPLE_SEED);
        let b = dehn_function_sample(&am, &dehn, &[100, 200, 300], 30, DEHN_SAMPLE_SEED);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.rows.iter().all(|r| r.stuck == 0));
        assert!(a.rows[2].words > 0);
        assert!(a.slope.is_some());
    }

    proptest! {
        #[test]
        fn smith_matches_hom_counts(rels in prop::collection::vec(prop::collection::vec(prop::sample::select(vec![1, -1, 2, -2, 3, -3]), 0..6), 0..4)) {
            let p = Presentation { generators: 3, relators: rels };
            let h = abelianization(&p);
            for n in [2, 3, 4, 6] {
                prop_assert_eq!(hom_count(&p, n), expected_hom_count(&h, n));
            }
        }

        #[test]
        fn omega_is_monotone_and_links_count_corners(edges in prop::collection::vec((0usize..7, 0usize..7), 0..14), k in 3usize..6) {
            let mut g = Graph::new(7);
            for (a, b) in edges {
                if a != b {
                    g.add_simple_edge(a, b);
                }
            }
            let c = all_complete(&g);
            let small = omega_k(&g, &c, k, 10_000).unwrap();
            let big = omega_k(&g, &c, k + 1, 10_000).unwrap();
            let big_set: BTreeSet<_> = big.cells2.iter().collect();
            prop_assert!(small.cells2.iter().all(|c| big_set.contains(c)));
            for cell in &small.cells2 {
                prop_assert_eq!(&canonical_loop(cell), cell);
            }
            for v in 0..7 {
                let lk = link(&small, v).unwrap();
                let corners = small.cells2.iter().map(|c| c.iter().filter(|&&w| w == v).count()).sum::<usize>();
                let deg: usize = (0..lk.graph.vertex_count()).map(|i| lk.graph.degree(i)).sum();
                prop_assert_eq!(deg, 2 * corners);
            }
        }
    }
}
