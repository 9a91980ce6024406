//! Angle metrics, escaping-path sets and fineness certificates on finite
//! balls, plus equivariant edge attachments and the W/Z chain.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::cayley_abels::{CaError, ConcreteGroup, CosetBall, GGraphBall, OrbitTag, SubgroupHandle};
use crate::graph::Graph;

pub const DEFAULT_PATH_CAP: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FinenessError {
    #[error("vertex {x} is not adjacent to {v}")]
    NotAdjacent { v: usize, x: usize },
    #[error("u and v must be distinct")]
    SameVertex,
    #[error("path enumeration exceeded {0} paths")]
    PathCap(usize),
    #[error("no vertex labelled {0:?}")]
    UnknownLabel(String),
    #[error("corner at position {0} has no recorded alpha path")]
    MissingAlpha(usize),
    #[error("left the ball: {0}")]
    OutOfBall(String),
    #[error("attachment is not simplicial: {0}")]
    NonSimplicial(String),
    #[error("vertex {0} has an infinite stabilizer; transporters are not enumerable")]
    InfiniteStabilizer(usize),
    #[error("not a path: {0}")]
    BadPath(String),
    #[error(transparent)]
    Ca(#[from] CaError),
}

/// A graph ball with labels stable across radii and completeness flags.
#[derive(Clone, Debug, Serialize)]
pub struct LocalGraph {
    pub graph: Graph,
    /// False when the vertex may have neighbours outside the ball.
    pub complete: Vec<bool>,
    pub labels: Vec<String>,
}

impl LocalGraph {
    pub fn new(graph: Graph) -> Self {
        let n = graph.vertex_count();
        LocalGraph { graph, complete: vec![true; n], labels: (0..n).map(|i| i.to_string()).collect() }
    }

    pub fn find(&self, label: &str) -> Result<usize, FinenessError> {
        self.labels.iter().position(|l| l == label).ok_or_else(|| FinenessError::UnknownLabel(label.to_string()))
    }
}

impl From<&GGraphBall> for LocalGraph {
    fn from(ball: &GGraphBall) -> Self {
        LocalGraph {
            graph: ball.graph.clone(),
            complete: ball.vertices.iter().map(|v| v.complete && v.depth < ball.radius).collect(),
            labels: ball.vertices.iter().map(|v| format!("{}:{}", v.tag, v.label)).collect(),
        }
    }
}

/// Distance in `Γ − {v}`; unreachable pairs are `Infinite` within the ball.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Angle {
    Finite(usize),
    Infinite,
}

impl Angle {
    pub fn at_most(self, n: usize) -> bool {
        matches!(self, Angle::Finite(d) if d <= n)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Angle::Finite(d) => write!(f, "{d}"),
            Angle::Infinite => write!(f, "inf"),
        }
    }
}

fn check_adjacent(g: &Graph, v: usize, x: usize) -> Result<(), FinenessError> {
    if g.has_edge(v, x) {
        Ok(())
    } else {
        Err(FinenessError::NotAdjacent { v, x })
    }
}

pub fn angle(g: &Graph, v: usize, x: usize, y: usize) -> Result<Angle, FinenessError> {
    check_adjacent(g, v, x)?;
    check_adjacent(g, v, y)?;
    Ok(g.distances_avoiding(x, Some(v))[y].map_or(Angle::Infinite, Angle::Finite))
}

/// Angles between all neighbours of `v`, neighbours in ascending order.
#[derive(Clone, Debug, Serialize)]
pub struct AngleTable {
    pub base: usize,
    pub neighbors: Vec<usize>,
    pub table: Vec<Vec<Angle>>,
}

pub fn angle_table(g: &Graph, v: usize) -> AngleTable {
    let mut neighbors: Vec<usize> = g.neighbors(v).to_vec();
    neighbors.sort_unstable();
    neighbors.dedup();
    let table = neighbors
        .iter()
        .map(|&x| {
            let d = g.distances_avoiding(x, Some(v));
            neighbors.iter().map(|&y| d[y].map_or(Angle::Infinite, Angle::Finite)).collect()
        })
        .collect();
    AngleTable { base: v, neighbors, table }
}

/// `→uv(k)`: neighbours `w` of `u` lying on an escaping path from `u` to `v` of
/// length at most `k`, each with a shortest witness path `[u, w, ..., v]`.
#[derive(Clone, Debug, Serialize)]
pub struct EscapingPathSet {
    pub u: usize,
    pub v: usize,
    pub k: usize,
    pub members: Vec<usize>,
    pub witnesses: Vec<Vec<usize>>,
    /// True when an incomplete vertex lies within reach, so the set may grow
    /// in a larger ball.
    pub partial: bool,
}

/// Computes `→uv(k)` through `d_{Γ−u}(w, v) ≤ k − 1`, which is equivalent to
/// the definition by shortcutting an escaping path at `w`.
pub fn escaping_vectors(lg: &LocalGraph, u: usize, v: usize, k: usize) -> Result<EscapingPathSet, FinenessError> {
    if u == v {
        return Err(FinenessError::SameVertex);
    }
    let g = &lg.graph;
    let from_v = g.distances_avoiding(v, Some(u));
    let mut nbrs: Vec<usize> = g.neighbors(u).to_vec();
    nbrs.sort_unstable();
    nbrs.dedup();
    let mut members = Vec::new();
    let mut witnesses = Vec::new();
    for w in nbrs {
        if matches!(from_v[w], Some(d) if d < k) {
            let mut path = vec![u];
            path.extend(g.shortest_path_avoiding(w, v, Some(u)).expect("reachable"));
            members.push(w);
            witnesses.push(path);
        }
    }
    // anything within distance k - 1 of u (avoiding nothing) that is incomplete
    // could hide a shorter route or further neighbours
    let from_u = g.distances(u);
    let partial = !lg.complete[u] || (0..g.vertex_count()).any(|x| !lg.complete[x] && matches!(from_u[x], Some(d) if d < k));
    Ok(EscapingPathSet { u, v, k, members, witnesses, partial })
}

/// Escaping-vector set by explicit enumeration of escaping walks; for
/// cross-checking on small graphs.
pub fn escaping_vectors_bruteforce(g: &Graph, u: usize, v: usize, k: usize, cap: usize) -> Result<BTreeSet<usize>, FinenessError> {
    let mut found = BTreeSet::new();
    let mut count = 0usize;
    let mut stack: Vec<Vec<usize>> = vec![vec![u]];
    while let Some(path) = stack.pop() {
        count += 1;
        if count > cap {
            return Err(FinenessError::PathCap(cap));
        }
        let last = *path.last().expect("nonempty");
        if path.len() > 1 && last == v {
            found.extend(path[1..].iter().copied().filter(|&x| g.has_edge(u, x)));
        }
        if path.len() > k {
            continue;
        }
        for &y in g.neighbors(last) {
            if y != u {
                let mut next = path.clone();
                next.push(y);
                stack.push(next);
            }
        }
    }
    Ok(found)
}

/// Embedded paths from `x` to `y` in `Γ − {v}` of length at most `max`;
/// returns the shortest length found.
pub fn angle_bruteforce(g: &Graph, v: usize, x: usize, y: usize, max: usize) -> Angle {
    let mut best: Option<usize> = None;
    let mut stack = vec![vec![x]];
    while let Some(path) = stack.pop() {
        let last = *path.last().expect("nonempty");
        if last == y {
            best = Some(best.map_or(path.len() - 1, |b| b.min(path.len() - 1)));
            continue;
        }
        if path.len() > max {
            continue;
        }
        for &z in g.neighbors(last) {
            if z != v && !path.contains(&z) {
                let mut next = path.clone();
                next.push(z);
                stack.push(next);
            }
        }
    }
    best.map_or(Angle::Infinite, Angle::Finite)
}

/// First failure of `→uv(k+1) = ⋃ {→uw(k) : w ∈ T_v}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RecursionViolation {
    pub vertex: usize,
    pub in_left: bool,
}

pub fn recursion_check(lg: &LocalGraph, u: usize, v: usize, k: usize) -> Result<Option<RecursionViolation>, FinenessError> {
    let left: BTreeSet<usize> = escaping_vectors(lg, u, v, k + 1)?.members.into_iter().collect();
    let mut right = BTreeSet::new();
    for &w in lg.graph.neighbors(v) {
        if w != u {
            right.extend(escaping_vectors(lg, u, w, k)?.members);
        }
    }
    if let Some(&x) = left.difference(&right).next() {
        return Ok(Some(RecursionViolation { vertex: x, in_left: true }));
    }
    if let Some(&x) = right.difference(&left).next() {
        return Ok(Some(RecursionViolation { vertex: x, in_left: false }));
    }
    Ok(None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum FinenessVerdict {
    Stable,
    Growing,
}

#[derive(Clone, Debug, Serialize)]
pub struct FinenessReport {
    pub u: String,
    pub v: String,
    pub k: usize,
    pub radii: Vec<usize>,
    pub cardinalities: Vec<usize>,
    pub partial: Vec<bool>,
    pub verdict: FinenessVerdict,
    /// Witness escaping paths as label sequences.
    pub witnesses: Vec<Vec<String>>,
}

impl FinenessReport {
    pub fn to_json(&self) -> Value {
        json!({
            "query": {"u": self.u, "v": self.v, "k": self.k},
            "radii": self.radii,
            "cardinalities": self.cardinalities,
            "verdict": self.verdict,
            "witnesses": self.witnesses,
        })
    }
}

/// Computes `→uv(k)` over a family of balls keyed by label. STABLE when the
/// sets at the two largest radii coincide, GROWING otherwise (with at least
/// three witnesses whenever that many members exist).
pub fn fineness_report(
    family: &dyn Fn(usize) -> Result<LocalGraph, FinenessError>,
    u: &str,
    v: &str,
    k: usize,
    radii: &[usize],
) -> Result<FinenessReport, FinenessError> {
    let mut sets: Vec<BTreeSet<String>> = Vec::new();
    let mut cardinalities = Vec::new();
    let mut partial = Vec::new();
    let mut last: Option<(LocalGraph, EscapingPathSet)> = None;
    for &r in radii {
        let lg = family(r)?;
        let (ui, vi) = (lg.find(u)?, lg.find(v)?);
        let set = escaping_vectors(&lg, ui, vi, k)?;
        sets.push(set.members.iter().map(|&w| lg.labels[w].clone()).collect());
        cardinalities.push(set.members.len());
        partial.push(set.partial);
        last = Some((lg, set));
    }
    let n = sets.len();
    let stable = n >= 2 && sets[n - 1] == sets[n - 2];
    let verdict = if stable { FinenessVerdict::Stable } else { FinenessVerdict::Growing };
    let mut witnesses = Vec::new();
    if verdict == FinenessVerdict::Growing {
        if let Some((lg, set)) = last {
            let previous = if n >= 2 { sets[n - 2].clone() } else { BTreeSet::new() };
            let mut order: Vec<usize> = (0..set.members.len()).collect();
            // new members first
            order.sort_by_key(|&i| previous.contains(&lg.labels[set.members[i]]));
            let fresh = set.members.iter().filter(|&&w| !previous.contains(&lg.labels[w])).count();
            for i in order.into_iter().take(fresh.max(3)) {
                witnesses.push(set.witnesses[i].iter().map(|&x| lg.labels[x].clone()).collect());
            }
        }
    }
    Ok(FinenessReport { u: u.to_string(), v: v.to_string(), k, radii: radii.to_vec(), cardinalities, partial, verdict, witnesses })
}

// ---- group actions on balls --------------------------------------------------

/// All `g` with `g·from = to`, enumerated through the finite stabilizer of `from`.
pub fn transporters<G: ConcreteGroup>(cb: &CosetBall<G>, from: usize, to: usize) -> Result<Vec<G::Elem>, FinenessError> {
    let (tf, tt) = (cb.ball.vertices[from].tag, cb.ball.vertices[to].tag);
    if tf != tt {
        return Ok(Vec::new());
    }
    let stab: Vec<G::Elem> = match tf {
        OrbitTag::Base => cb.u.clone(),
        OrbitTag::Peripheral(i) => cb.peripherals[i].elements(&cb.group).ok_or(FinenessError::InfiniteStabilizer(from))?,
        OrbitTag::Tree(_) => return Err(FinenessError::InfiniteStabilizer(from)),
    };
    let inv_from = cb.group.inverse(&cb.reps[from]);
    let mut out: Vec<G::Elem> = stab.iter().map(|s| cb.group.multiply(&cb.group.multiply(&cb.reps[to], s), &inv_from)).collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// The data describing an attached edge orbit.
#[derive(Clone, Debug, Serialize)]
pub enum AttachmentKind {
    /// `{u, v}`; `alpha` is a shortest path from `u` to `v` in `Γ`.
    Pair { u: usize, v: usize, alpha: Vec<usize> },
    /// `{u, H}`; `neighbors` is `T_HΔ` for the vertex `H`, `alphas[(i, j)]` the
    /// chosen shortest paths between them.
    Coset { u: usize, neighbors: Vec<usize>, alphas: BTreeMap<(usize, usize), Vec<usize>>, finite: bool },
}

/// `Δ` built from a coset ball `Γ`; vertices `0..gamma_count` are those of `Γ`.
pub struct Attached<G: ConcreteGroup> {
    pub delta: LocalGraph,
    pub gamma_count: usize,
    pub kind: AttachmentKind,
    /// Coset representative of each new vertex, indexed from `gamma_count`.
    pub new_reps: Vec<G::Elem>,
    /// True when `H` is infinite: outside the hypotheses of the attachment theorem.
    pub outside_hypotheses: bool,
}

impl<G: ConcreteGroup> Attached<G> {
    /// `max |α|`, the constant `ℓ`.
    pub fn ell(&self) -> usize {
        match &self.kind {
            AttachmentKind::Pair { alpha, .. } => alpha.len() - 1,
            AttachmentKind::Coset { alphas, .. } => alphas.values().map(|a| a.len() - 1).max().unwrap_or(0),
        }
    }
}

/// Attaches the `G`-orbit of the edge `{u, v}` within the ball.
pub fn attach_pair_orbit<G: ConcreteGroup>(cb: &CosetBall<G>, u: usize, v: usize) -> Result<Attached<G>, FinenessError> {
    if u == v {
        return Err(FinenessError::SameVertex);
    }
    let mut delta = LocalGraph::from(&cb.ball);
    let alpha = cb.ball.graph.shortest_path(u, v).ok_or_else(|| FinenessError::OutOfBall("u and v are not connected in the ball".into()))?;
    let tag = cb.ball.vertices[u].tag;
    for x in 0..cb.ball.vertex_count() {
        if cb.ball.vertices[x].tag != tag {
            continue;
        }
        for g in transporters(cb, u, x)? {
            match cb.act_vertex(&g, v)? {
                Some(y) => {
                    if y == x {
                        return Err(FinenessError::NonSimplicial(format!("loop at {}", delta.labels[x])));
                    }
                    if cb.ball.graph.has_edge(x, y) {
                        return Err(FinenessError::NonSimplicial(format!("edge {}–{} already present", delta.labels[x], delta.labels[y])));
                    }
                    delta.graph.add_simple_edge(x, y);
                }
                None => delta.complete[x] = false,
            }
        }
    }
    let gamma_count = cb.ball.vertex_count();
    Ok(Attached { delta, gamma_count, kind: AttachmentKind::Pair { u, v, alpha }, new_reps: Vec::new(), outside_hypotheses: false })
}

/// Attaches the `G`-orbit of the edge `{u, H}`: one new vertex per coset
/// `gH` with `g·u` in the ball.
pub fn attach_coset_orbit<G: ConcreteGroup>(cb: &CosetBall<G>, u: usize, h: &dyn SubgroupHandle<G>) -> Result<Attached<G>, FinenessError> {
    let mut delta = LocalGraph::from(&cb.ball);
    let gamma_count = cb.ball.vertex_count();
    let h_elems = h.elements(&cb.group);
    let tag = cb.ball.vertices[u].tag;
    let mut keys: BTreeMap<G::Elem, usize> = BTreeMap::new();
    let mut new_reps: Vec<G::Elem> = Vec::new();
    let key_of = |g: &G::Elem| -> Result<G::Elem, FinenessError> { h.coset_key(&cb.group, g).ok_or(FinenessError::InfiniteStabilizer(u)) };
    for x in 0..gamma_count {
        if cb.ball.vertices[x].tag != tag {
            continue;
        }
        for g in transporters(cb, u, x)? {
            let key = key_of(&g)?;
            let idx = match keys.get(&key) {
                Some(&i) => i,
                None => {
                    let i = delta.graph.add_vertex();
                    delta.labels.push(format!("{}:{}", h.name(), cb.group.label(&key)));
                    delta.complete.push(true);
                    keys.insert(key.clone(), i);
                    new_reps.push(key);
                    i
                }
            };
            delta.graph.add_simple_edge(x, idx);
        }
    }
    // completeness of the new vertices: every h·u must be present
    for (i, rep) in new_reps.iter().enumerate() {
        let ok = match &h_elems {
            Some(hs) => hs.iter().all(|x| matches!(cb.act_vertex(&cb.group.multiply(rep, x), u), Ok(Some(_)))),
            None => false,
        };
        delta.complete[gamma_count + i] = ok;
    }
    // T_HΔ for the cone vertex H itself, and alpha paths in Γ
    let mut neighbors = Vec::new();
    if let Some(hs) = &h_elems {
        for x in hs {
            let y = cb.act_vertex(x, u)?.ok_or_else(|| FinenessError::OutOfBall(format!("{}·u", cb.group.label(x))))?;
            neighbors.push(y);
        }
    }
    neighbors.sort_unstable();
    neighbors.dedup();
    let mut alphas = BTreeMap::new();
    for &a in &neighbors {
        for &b in &neighbors {
            if a != b {
                let p = cb.ball.graph.shortest_path(a, b).ok_or_else(|| FinenessError::OutOfBall("alpha path".into()))?;
                alphas.insert((a, b), p);
            }
        }
    }
    Ok(Attached {
        delta,
        gamma_count,
        kind: AttachmentKind::Coset { u, neighbors, alphas, finite: h_elems.is_some() },
        new_reps,
        outside_hypotheses: h_elems.is_none(),
    })
}

/// Replaces every corner `[g.v_i, gH, g.v_j]` of `δ` by `g.α_ij` (or every
/// attached edge `g.{u,v}` by `g.α`) and drops a terminal new vertex.
pub fn alpha_replacement<G: ConcreteGroup>(cb: &CosetBall<G>, att: &Attached<G>, delta_path: &[usize]) -> Result<Vec<usize>, FinenessError> {
    let n = att.gamma_count;
    let Some(&first) = delta_path.first() else { return Err(FinenessError::BadPath("empty".into())) };
    if first >= n {
        return Err(FinenessError::BadPath("path must start in Γ".into()));
    }
    for w in delta_path.windows(2) {
        if !att.delta.graph.has_edge(w[0], w[1]) {
            return Err(FinenessError::BadPath(format!("{} and {} are not adjacent", w[0], w[1])));
        }
    }
    let act_path = |g: &G::Elem, p: &[usize]| -> Result<Vec<usize>, FinenessError> {
        p.iter().map(|&x| cb.act_vertex(g, x)?.ok_or_else(|| FinenessError::OutOfBall(format!("image of {}", att.delta.labels[x])))).collect()
    };
    let mut gamma = vec![first];
    let mut i = 1;
    while i < delta_path.len() {
        let (prev, cur) = (delta_path[i - 1], delta_path[i]);
        match &att.kind {
            AttachmentKind::Coset { neighbors, alphas, .. } => {
                if cur < n {
                    gamma.push(cur);
                    i += 1;
                    continue;
                }
                if i + 1 == delta_path.len() {
                    // terminal new vertex is dropped
                    break;
                }
                let next = delta_path[i + 1];
                let g = &att.new_reps[cur - n];
                let gi = cb.group.inverse(g);
                let pre = |x: usize| -> Result<usize, FinenessError> {
                    cb.act_vertex(&gi, x)?.ok_or_else(|| FinenessError::OutOfBall(format!("preimage of {}", att.delta.labels[x])))
                };
                let (vi, vj) = (pre(prev)?, pre(next)?);
                if !neighbors.contains(&vi) || !neighbors.contains(&vj) {
                    return Err(FinenessError::MissingAlpha(i));
                }
                if vi != vj {
                    let alpha = alphas.get(&(vi, vj)).ok_or(FinenessError::MissingAlpha(i))?;
                    let image = act_path(g, alpha)?;
                    gamma.extend_from_slice(&image[1..]);
                }
                i += 2;
            }
            AttachmentKind::Pair { u, v, alpha } => {
                if cb.ball.graph.has_edge(prev, cur) {
                    gamma.push(cur);
                    i += 1;
                    continue;
                }
                let mut done = false;
                for (a, b, rev) in [(*u, *v, false), (*v, *u, true)] {
                    for g in transporters(cb, a, prev)? {
                        if cb.act_vertex(&g, b)? == Some(cur) {
                            let mut image = act_path(&g, alpha)?;
                            if rev {
                                image.reverse();
                            }
                            gamma.extend_from_slice(&image[1..]);
                            done = true;
                            break;
                        }
                    }
                    if done {
                        break;
                    }
                }
                if !done {
                    return Err(FinenessError::MissingAlpha(i));
                }
                i += 1;
            }
        }
    }
    Ok(gamma)
}

/// Outcome of [`qi_certificate`].
#[derive(Clone, Debug, Serialize)]
pub struct QiCertificate {
    /// Tight ratio `max d_Γ/d_Δ` as a fraction.
    pub ratio: (usize, usize),
    /// `⌈ratio⌉`.
    pub ell: usize,
    pub pairs_checked: usize,
    pub delta_le_gamma: bool,
    pub every_vertex_near_gamma: bool,
    /// First pair violating `d_Γ ≤ bound·d_Δ`, when a bound was supplied.
    pub counterexample: Option<(usize, usize)>,
}

/// Checks the inclusion `Γ ⊆ Δ` on all pairs of `inner` vertices of `Γ`.
pub fn qi_certificate(gamma: &Graph, delta: &Graph, gamma_count: usize, inner: &[usize], bound: Option<usize>) -> QiCertificate {
    let mut ratio = (1, 1);
    let mut pairs = 0;
    let mut delta_le_gamma = true;
    let mut counterexample = None;
    for (i, &x) in inner.iter().enumerate() {
        let dg = gamma.distances(x);
        let dd = delta.distances(x);
        for &y in &inner[..i] {
            let (Some(a), Some(b)) = (dg[y], dd[y]) else { continue };
            pairs += 1;
            if b > a {
                delta_le_gamma = false;
            }
            if b > 0 && a * ratio.1 > ratio.0 * b {
                ratio = (a, b);
            }
            if let Some(l) = bound {
                if a > l * b && counterexample.is_none() {
                    counterexample = Some((x, y));
                }
            }
        }
    }
    let every_vertex_near_gamma = (gamma_count..delta.vertex_count()).all(|v| delta.neighbors(v).iter().any(|&w| w < gamma_count));
    QiCertificate { ratio, ell: ratio.0.div_ceil(ratio.1), pairs_checked: pairs, delta_le_gamma, every_vertex_near_gamma, counterexample }
}

// ---- the W/Z chain -------------------------------------------------------------

/// How `Z_{j−1}` is formed from `W_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ZRule {
    /// `W_j` together with every `z` such that some translate of a corner of
    /// some `α_ij` is `[z, a, w]` with `w ∈ W_j`.
    Standard,
    /// Only the corner translates, without `W_j` (negative control).
    CornersOnly,
}

#[derive(Clone, Debug, Serialize)]
pub struct WzLevel {
    pub j: usize,
    pub w: Vec<usize>,
    pub z: Vec<usize>,
}

#[derive(Clone, Debug, Serialize)]
pub struct WzChain {
    pub n: usize,
    pub ell: usize,
    /// `W_n` first, then each `(Z_{j−1}, W_{j−1})` down to `j = 1`.
    pub levels: Vec<WzLevel>,
    pub w_last: Vec<usize>,
    pub containments_hold: bool,
    /// First `j` at which `W_j ⊆ Z_{j−1} ⊆ W_{j−1}` fails.
    pub violation: Option<usize>,
    /// `T_a` is fully inside the ball, so every set is a finite exact subset.
    pub finite: bool,
}

/// Runs the chain `W_n = →ab(n)`, `Z_{j−1}`, `W_{j−1}` for `j = n, ..., 1`,
/// with `n = kℓ`.
pub fn wz_chain<G: ConcreteGroup>(cb: &CosetBall<G>, att: &Attached<G>, a: usize, b: usize, k: usize, rule: ZRule) -> Result<WzChain, FinenessError> {
    let AttachmentKind::Coset { alphas, .. } = &att.kind else {
        return Err(FinenessError::BadPath("the W/Z chain needs a {u, H} attachment".into()));
    };
    let lg = LocalGraph::from(&cb.ball);
    let ell = att.ell();
    let n = k * ell;
    let table = angle_table(&lg.graph, a);
    let pos = |x: usize| table.neighbors.binary_search(&x).expect("neighbour of a");
    // corners [c0, c1, c2] of every alpha
    let corners: BTreeSet<(usize, usize, usize)> = alphas.values().flat_map(|p| p.windows(3).map(|c| (c[0], c[1], c[2])).collect::<Vec<_>>()).collect();
    let mut w: BTreeSet<usize> = if a == b { BTreeSet::new() } else { escaping_vectors(&lg, a, b, n)?.members.into_iter().collect() };
    let mut levels = Vec::new();
    let mut violation = None;
    for j in (1..=n).rev() {
        let mut z: BTreeSet<usize> = match rule {
            ZRule::Standard => w.clone(),
            ZRule::CornersOnly => BTreeSet::new(),
        };
        for &(c0, c1, c2) in &corners {
            for g in transporters(cb, c1, a)? {
                if let Some(img2) = cb.act_vertex(&g, c2)? {
                    if w.contains(&img2) {
                        let img0 = cb.act_vertex(&g, c0)?.ok_or_else(|| FinenessError::OutOfBall("corner image".into()))?;
                        z.insert(img0);
                    }
                }
            }
        }
        let w_next: BTreeSet<usize> = table.neighbors.iter().copied().filter(|&x| z.iter().any(|&zz| table.table[pos(zz)][pos(x)].at_most(n))).collect();
        if violation.is_none() && !(w.is_subset(&z) && z.is_subset(&w_next)) {
            violation = Some(j);
        }
        levels.push(WzLevel { j, w: w.iter().copied().collect(), z: z.iter().copied().collect() });
        w = w_next;
    }
    let finite = lg.complete[a];
    Ok(WzChain { n, ell, levels, w_last: w.into_iter().collect(), containments_hold: violation.is_none(), violation, finite })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley_abels::{coset_graph_ball, FiniteHandle, GogGroup, Integers, Lattice2, LatticeLine};
    use crate::graph_of_groups::fixtures::sl2z;
    use std::sync::Arc;

    fn coned_z2(r: usize) -> Result<LocalGraph, FinenessError> {
        let h: Arc<dyn SubgroupHandle<Lattice2>> = Arc::new(LatticeLine::new((1, 0)).unwrap());
        let cb = coset_graph_ball(Lattice2, vec![(0, 0)], vec![(1, 0), (0, 1)], vec![h], r, 1_000_000)?;
        Ok(LocalGraph::from(&cb.ball))
    }

    /// Bass–Serre tree of C4 *_{C2} C6 as a coset ball on loops at vertex 0.
    pub(crate) fn tree_ball(r: usize) -> CosetBall<GogGroup> {
        let gog = sl2z();
        let g = GogGroup::new(&gog, 0);
        let a: Vec<_> = (0..4).map(|i| g.elem(i)).collect();
        let b_elems = g.conjugate_vertex_group(
            &gog.parse_word(&[serde_json::json!("e"), serde_json::json!(0), serde_json::json!("g"), serde_json::json!(1), serde_json::json!(0)]).unwrap(),
            1,
        );
        let hb: Arc<dyn SubgroupHandle<GogGroup>> = Arc::new(FiniteHandle::new("B", b_elems));
        coset_graph_ball(g, a, vec![], vec![hb], r, 1_000_000).unwrap()
    }

    #[test]
    fn angle_examples() {
        let c5 = Graph::cycle(5);
        assert_eq!(angle(&c5, 0, 1, 4).unwrap(), Angle::Finite(3));
        let k4 = Graph::complete(4);
        assert_eq!(angle(&k4, 0, 1, 2).unwrap(), Angle::Finite(1));
        let path = Graph::path(3);
        assert_eq!(angle(&path, 1, 0, 2).unwrap(), Angle::Infinite);
        assert!(matches!(angle(&c5, 0, 2, 1), Err(FinenessError::NotAdjacent { v: 0, x: 2 })));
        let t = angle_table(&c5, 0);
        assert_eq!(t.table[0][1], t.table[1][0]);
        assert_eq!(t.table[0][0], Angle::Finite(0));
    }

    #[test]
    fn escaping_examples() {
        let p = LocalGraph::new(Graph::path(3));
        let s = escaping_vectors(&p, 0, 2, 2).unwrap();
        assert_eq!(s.members, vec![1]);
        assert_eq!(s.witnesses[0], vec![0, 1, 2]);
        let s = escaping_vectors(&p, 0, 1, 1).unwrap();
        assert_eq!(s.members, vec![1]);
        assert_eq!(escaping_vectors(&p, 0, 0, 1).unwrap_err(), FinenessError::SameVertex);
    }

    #[test]
    fn coned_grid_grows() {
        let radii: Vec<usize> = (4..=10).collect();
        let report = fineness_report(&coned_z2, "H0:(0,0)", "H0:(0,1)", 3, &radii).unwrap();
        assert_eq!(report.verdict, FinenessVerdict::Growing);
        assert!(report.cardinalities.windows(2).all(|w| w[1] > w[0]), "{:?}", report.cardinalities);
        assert_eq!(report.cardinalities[0], 2 * 4 - 1);
        assert!(report.witnesses.len() >= 3);
        for wpath in &report.witnesses {
            assert_eq!(wpath.len(), 4);
        }
    }

    #[test]
    fn tree_is_stable() {
        let family = |r: usize| Ok(LocalGraph::from(&tree_ball(r).ball));
        let lg = family(4).unwrap();
        let (u, v) = (lg.labels[0].clone(), lg.labels[3].clone());
        let report = fineness_report(&family, &u, &v, 4, &[5, 6, 7]).unwrap();
        assert_eq!(report.verdict, FinenessVerdict::Stable);
        assert!(report.cardinalities.iter().all(|&c| c == report.cardinalities[0]));
    }

    #[test]
    fn recursion_identity() {
        let c5 = LocalGraph::new(Graph::cycle(5));
        for v in 1..5 {
            assert_eq!(recursion_check(&c5, 0, v, 2).unwrap(), None);
        }
        let t = LocalGraph::from(&tree_ball(5).ball);
        let far = t.graph.distances(0).iter().position(|d| *d == Some(3)).unwrap();
        assert_eq!(recursion_check(&t, 0, far, 3).unwrap(), None);
        // corrupt the cycle by a pendant edge: the identity fails at the leaf
        let mut g = Graph::cycle(5);
        let leaf = g.add_vertex();
        g.add_edge(0, leaf);
        let bad = LocalGraph::new(g);
        assert!(recursion_check(&bad, 0, leaf, 2).unwrap().is_some());
    }

    #[test]
    fn chords_on_the_line() {
        let cb = coset_graph_ball(Integers, vec![0], vec![1], vec![], 12, 10_000).unwrap();
        let u = cb.locate(OrbitTag::Base, &0).unwrap().unwrap();
        let v = cb.locate(OrbitTag::Base, &2).unwrap().unwrap();
        let att = attach_pair_orbit(&cb, u, v).unwrap();
        assert_eq!(att.ell(), 2);
        let inner: Vec<usize> = (-6..=6).map(|x| cb.locate(OrbitTag::Base, &x).unwrap().unwrap()).collect();
        let cert = qi_certificate(&cb.ball.graph, &att.delta.graph, att.gamma_count, &inner, Some(att.ell()));
        assert_eq!(cert.ell, 2);
        assert_eq!(cert.ratio, (2, 1));
        assert!(cert.delta_le_gamma && cert.counterexample.is_none());
        // Δ = Γ gives ℓ = 1
        let same = qi_certificate(&cb.ball.graph, &cb.ball.graph, att.gamma_count, &inner, Some(1));
        assert_eq!(same.ell, 1);
        // α-replacement of a chord path
        let p = [inner[6], inner[8], inner[10]];
        let gamma = alpha_replacement(&cb, &att, &p).unwrap();
        assert_eq!(gamma, vec![inner[6], inner[7], inner[8], inner[9], inner[10]]);
    }

    #[test]
    fn pendant_and_cone_attachments() {
        let cb = coset_graph_ball(Integers, vec![0], vec![1], vec![], 4, 10_000).unwrap();
        let trivial = FiniteHandle::new("1", vec![0i64]);
        let att = attach_coset_orbit(&cb, 0, &trivial).unwrap();
        assert_eq!(att.delta.graph.vertex_count(), 2 * cb.ball.vertex_count());
        for v in att.gamma_count..att.delta.graph.vertex_count() {
            assert_eq!(att.delta.graph.degree(v), 1);
        }
        assert_eq!(att.ell(), 0);
        assert!(!att.outside_hypotheses);
    }

    #[test]
    fn tree_cone_replacement_and_chain() {
        let cb = tree_ball(6);
        let b_handle = FiniteHandle::new("B", cb.peripherals[0].elements(&cb.group).unwrap());
        let att = attach_coset_orbit(&cb, 0, &b_handle).unwrap();
        assert_eq!(att.ell(), 2);
        let AttachmentKind::Coset { neighbors, .. } = &att.kind else { unreachable!() };
        assert_eq!(neighbors.len(), 3);
        // δ = [v0, H, v1] is replaced by the length-2 path through the B vertex
        let cone = att.gamma_count;
        let d = [neighbors[0], cone, neighbors[1]];
        let gamma = alpha_replacement(&cb, &att, &d).unwrap();
        assert_eq!(gamma.len(), 3);
        assert_eq!(gamma[1], 1);
        // terminal cone vertex dropped
        let gamma = alpha_replacement(&cb, &att, &[neighbors[0], cone]).unwrap();
        assert_eq!(gamma, vec![neighbors[0]]);
        // δ inside Γ is unchanged
        assert_eq!(alpha_replacement(&cb, &att, &[0, 1]).unwrap(), vec![0, 1]);

        let a = 1; // the B vertex adjacent to the centre
        let lg = LocalGraph::from(&cb.ball);
        let b = lg.graph.distances(a).iter().position(|d| *d == Some(3)).unwrap();
        let chain = wz_chain(&cb, &att, a, b, 3, ZRule::Standard).unwrap();
        assert_eq!(chain.n, 6);
        assert!(chain.containments_hold && chain.finite);
        let bad = wz_chain(&cb, &att, a, b, 3, ZRule::CornersOnly).unwrap();
        assert!(!bad.containments_hold);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_graph() -> impl Strategy<Value = Graph> {
            (3usize..9, prop::collection::vec((0usize..9, 0usize..9), 0..16)).prop_map(|(n, es)| {
                let mut g = Graph::cycle(n);
                for (a, b) in es {
                    g.add_simple_edge(a % n, b % n);
                }
                g
            })
        }

        proptest! {
            #[test]
            fn angles_match_path_enumeration(g in small_graph(), v in 0usize..9) {
                let v = v % g.vertex_count();
                let t = angle_table(&g, v);
                for (i, &x) in t.neighbors.iter().enumerate() {
                    for (j, &y) in t.neighbors.iter().enumerate() {
                        prop_assert_eq!(t.table[i][j], t.table[j][i]);
                        prop_assert_eq!(t.table[i][j], angle_bruteforce(&g, v, x, y, 12));
                    }
                }
            }

            #[test]
            fn escaping_matches_walk_enumeration(g in small_graph(), u in 0usize..9, v in 0usize..9, k in 1usize..5) {
                let n = g.vertex_count();
                let (u, v) = (u % n, v % n);
                prop_assume!(u != v);
                let lg = LocalGraph::new(g.clone());
                let fast: BTreeSet<usize> = escaping_vectors(&lg, u, v, k).unwrap().members.into_iter().collect();
                prop_assert_eq!(fast, escaping_vectors_bruteforce(&g, u, v, k, DEFAULT_PATH_CAP).unwrap());
            }

            #[test]
            fn witnesses_escape(g in small_graph(), u in 0usize..9, v in 0usize..9, k in 1usize..5) {
                let n = g.vertex_count();
                let (u, v) = (u % n, v % n);
                prop_assume!(u != v);
                let set = escaping_vectors(&LocalGraph::new(g.clone()), u, v, k).unwrap();
                for (w, path) in set.members.iter().zip(&set.witnesses) {
                    prop_assert_eq!(path[1], *w);
                    prop_assert!(path.len() - 1 <= k);
                    prop_assert!(path[1..].iter().all(|&x| x != u));
                    prop_assert_eq!(*path.last().unwrap(), v);
                }
            }
        }
    }
}
