//! Finite graphs of finite groups, words in the fundamental group, and
//! normal forms.
//!
//! Conventions:
//!
//! * Directed edges come in pairs `2i`, `2i+1` with `bar(2i) = 2i+1`.
//! * `inj(e)` embeds the edge group into the vertex group at `t(e)`; the edge
//!   group of `e` and of `bar(e)` is the same group.
//! * A word `g0 e1 g1 ... en gn` is a path in the underlying graph with
//!   `g0 ∈ G_{o(e1)}` and `gi ∈ G_{t(ei)}`. The defining relation is
//!   `e · inj(e)(c) · bar(e) = inj(bar e)(c)` for every `c` in the edge group.
//!
//! [`GraphOfGroups::reduce`] returns the normal form in which every element
//! after an edge is the least-index representative of its right coset
//! `inj(e)(G_e)·g`, and all edge-group elements are pushed to the front.
//! For an amalgam this is the classical `x0 x1 ... xn` form (with `x0 x1`
//! merged into the head), for an HNN extension it is Britton's form.
//! [`GraphOfGroups::left_form`] is the mirror image (left cosets, elements
//! pushed to the back); it labels vertices of the Bass–Serre tree.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::coset_enumeration::{Letter, Presentation};
use crate::finite_groups::{FiniteGroup, GroupDescriptor, GroupError, GroupHom, Subgroup};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GogError {
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error("invalid graph of groups: {0}")]
    Invalid(String),
    #[error("invalid word: {0}")]
    InvalidWord(String),
    #[error("basepoint mismatch: {0} vs {1}")]
    BasepointMismatch(usize, usize),
    #[error("unknown group reference {0:?}")]
    UnknownGroup(String),
}

/// Directed graph with a fixed-point-free involution on edges.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SerreGraph {
    pub vertices: usize,
    pub origin: Vec<usize>,
    pub terminus: Vec<usize>,
}

impl SerreGraph {
    pub fn new(vertices: usize) -> Self {
        SerreGraph { vertices, origin: Vec::new(), terminus: Vec::new() }
    }

    /// Adds the pair `e: from → to`, `bar(e): to → from` and returns `e`.
    pub fn add_edge(&mut self, from: usize, to: usize) -> usize {
        let e = self.origin.len();
        self.origin.extend([from, to]);
        self.terminus.extend([to, from]);
        e
    }

    pub fn edge_count(&self) -> usize {
        self.origin.len()
    }

    #[inline]
    pub fn bar(&self, e: usize) -> usize {
        e ^ 1
    }

    #[inline]
    pub fn o(&self, e: usize) -> usize {
        self.origin[e]
    }

    #[inline]
    pub fn t(&self, e: usize) -> usize {
        self.terminus[e]
    }

    /// Edges with origin `v`, ascending.
    pub fn out_edges(&self, v: usize) -> Vec<usize> {
        (0..self.edge_count()).filter(|&e| self.o(e) == v).collect()
    }

    pub fn is_connected(&self) -> bool {
        if self.vertices == 0 {
            return false;
        }
        let mut seen = vec![false; self.vertices];
        seen[0] = true;
        let mut stack = vec![0];
        while let Some(v) = stack.pop() {
            for e in self.out_edges(v) {
                let w = self.t(e);
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Geometric edges (even representatives) of a BFS spanning tree from vertex 0.
    pub fn spanning_tree(&self) -> Vec<usize> {
        let mut seen = vec![false; self.vertices];
        let mut tree = Vec::new();
        if self.vertices == 0 {
            return tree;
        }
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        while let Some(v) = queue.pop_front() {
            for e in self.out_edges(v) {
                let w = self.t(e);
                if !seen[w] {
                    seen[w] = true;
                    tree.push(e & !1);
                    queue.push_back(w);
                }
            }
        }
        tree
    }
}

/// Which normal-form family a graph of groups falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormalFormKind {
    Amalgam,
    Hnn,
    General,
}

/// Coset decompositions for one directed edge `e`, inside `G_{t(e)}` relative
/// to the image `H_e = inj(e)(G_e)`.
#[derive(Clone, Debug)]
pub struct EdgeTransversal {
    /// `right_split[g] = (h, r)` with `g = h·r`, `h ∈ H_e`, `r` a right-coset representative.
    pub right_split: Vec<(usize, usize)>,
    /// `left_split[g] = (r, h)` with `g = r·h`.
    pub left_split: Vec<(usize, usize)>,
    pub right_reps: Vec<usize>,
    pub left_reps: Vec<usize>,
}

/// The transversal tables of every directed edge.
#[derive(Clone, Debug)]
pub struct Transversals {
    pub edges: Vec<EdgeTransversal>,
}

fn transversal(group: &FiniteGroup, image: &Subgroup) -> EdgeTransversal {
    let n = group.order();
    let id = group.identity();
    let mut right_split = vec![(id, id); n];
    let mut left_split = vec![(id, id); n];
    let mut right_reps = Vec::new();
    let mut left_reps = Vec::new();
    for coset in group.right_cosets(image) {
        // the subgroup's own coset is represented by the identity
        let rep = if coset.contains(&id) { id } else { coset[0] };
        right_reps.push(rep);
        for &g in &coset {
            // g = h·rep
            right_split[g] = (group.mul(g, group.inv(rep)), rep);
        }
    }
    for coset in group.left_cosets(image) {
        let rep = if coset.contains(&id) { id } else { coset[0] };
        left_reps.push(rep);
        for &g in &coset {
            left_split[g] = (rep, group.mul(group.inv(rep), g));
        }
    }
    right_reps.sort_unstable();
    left_reps.sort_unstable();
    EdgeTransversal { right_split, left_split, right_reps, left_reps }
}

/// A path word `head e1 g1 ... en gn`. Loops (start = end) are elements of
/// the fundamental group based at `start`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupWord {
    pub start: usize,
    pub head: usize,
    pub steps: Vec<(usize, usize)>,
}

impl GroupWord {
    pub fn edge_len(&self) -> usize {
        self.steps.len()
    }
}

/// A reduced word in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct NormalForm {
    pub kind: NormalFormKind,
    pub word: GroupWord,
}

/// Outcome of [`GraphOfGroups::validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub violations: Vec<String>,
}

/// A finite graph of finite groups.
#[derive(Clone)]
pub struct GraphOfGroups {
    graph: SerreGraph,
    vgroups: Vec<FiniteGroup>,
    egroups: Vec<FiniteGroup>,
    inj: Vec<GroupHom>,
    images: Vec<Subgroup>,
    preimage: Vec<Vec<Option<usize>>>,
    transversals: Option<Transversals>,
    kind: NormalFormKind,
}

impl fmt::Debug for GraphOfGroups {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphOfGroups").field("vertices", &self.graph.vertices).field("edges", &self.graph.edge_count()).field("kind", &self.kind).finish()
    }
}

/// Edge data passed to [`GraphOfGroups::new`]: `group` with embeddings into
/// the vertex groups at `to` and at `from`.
#[derive(Clone, Debug)]
pub struct EdgeSpec {
    pub from: usize,
    pub to: usize,
    pub group: FiniteGroup,
    pub into_to: Vec<usize>,
    pub into_from: Vec<usize>,
}

impl GraphOfGroups {
    /// Assembles a graph of groups without validating it; see [`Self::validate`]
    /// and [`Self::checked`].
    pub fn new(vgroups: Vec<FiniteGroup>, edges: Vec<EdgeSpec>) -> Self {
        let mut graph = SerreGraph::new(vgroups.len());
        let mut egroups = Vec::new();
        let mut inj = Vec::new();
        for spec in edges {
            graph.add_edge(spec.from, spec.to);
            let to_group = vgroups.get(spec.to).cloned().unwrap_or_else(FiniteGroup::trivial);
            let from_group = vgroups.get(spec.from).cloned().unwrap_or_else(FiniteGroup::trivial);
            egroups.push(spec.group.clone());
            egroups.push(spec.group.clone());
            inj.push(GroupHom::new(spec.group.clone(), to_group, spec.into_to));
            inj.push(GroupHom::new(spec.group, from_group, spec.into_from));
        }
        let kind = match (graph.vertices, graph.edge_count()) {
            (2, 2) if graph.o(0) != graph.t(0) => NormalFormKind::Amalgam,
            (1, 2) => NormalFormKind::Hnn,
            _ => NormalFormKind::General,
        };
        let mut gog = GraphOfGroups { graph, vgroups, egroups, inj, images: Vec::new(), preimage: Vec::new(), transversals: None, kind };
        if gog.validate().ok {
            gog.finish();
        }
        gog
    }

    /// [`Self::new`] followed by validation.
    pub fn checked(vgroups: Vec<FiniteGroup>, edges: Vec<EdgeSpec>) -> Result<Self, GogError> {
        let gog = Self::new(vgroups, edges);
        let report = gog.validate();
        if report.ok {
            Ok(gog)
        } else {
            Err(GogError::Invalid(report.violations.join("; ")))
        }
    }

    fn finish(&mut self) {
        self.images = self.inj.iter().map(GroupHom::image).collect();
        self.preimage = self
            .inj
            .iter()
            .map(|h| {
                let mut pre = vec![None; h.target.order()];
                for (c, &x) in h.map.iter().enumerate() {
                    pre[x] = Some(c);
                }
                pre
            })
            .collect();
        let edges = (0..self.graph.edge_count()).map(|e| transversal(&self.vgroups[self.graph.t(e)], &self.images[e])).collect();
        self.transversals = Some(Transversals { edges });
    }

    /// `A *_C B` with `C` embedded by `into_a` and `into_b`. Vertex 0 is `A`,
    /// edge 0 runs from `A` to `B`.
    pub fn amalgam(a: FiniteGroup, b: FiniteGroup, c: FiniteGroup, into_a: Vec<usize>, into_b: Vec<usize>) -> Result<Self, GogError> {
        Self::checked(vec![a, b], vec![EdgeSpec { from: 0, to: 1, group: c, into_to: into_b, into_from: into_a }])
    }

    /// `A *_C B` with trivial `C`.
    pub fn free_product(a: FiniteGroup, b: FiniteGroup) -> Result<Self, GogError> {
        let (ia, ib) = (a.identity(), b.identity());
        Self::amalgam(a, b, FiniteGroup::trivial(), vec![ia], vec![ib])
    }

    /// HNN extension of `base` with stable letter `t` = edge 0 and relation
    /// `t^-1 source(c) t = target(c)`.
    pub fn hnn(base: FiniteGroup, c: FiniteGroup, source: Vec<usize>, target: Vec<usize>) -> Result<Self, GogError> {
        Self::checked(vec![base], vec![EdgeSpec { from: 0, to: 0, group: c, into_to: target, into_from: source }])
    }

    pub fn graph(&self) -> &SerreGraph {
        &self.graph
    }

    pub fn kind(&self) -> NormalFormKind {
        self.kind
    }

    pub fn vertex_group(&self, v: usize) -> &FiniteGroup {
        &self.vgroups[v]
    }

    pub fn edge_group(&self, e: usize) -> &FiniteGroup {
        &self.egroups[e]
    }

    pub fn inj(&self, e: usize) -> &GroupHom {
        &self.inj[e]
    }

    /// `H_e = inj(e)(G_e) ≤ G_{t(e)}`.
    pub fn edge_image(&self, e: usize) -> &Subgroup {
        &self.images[e]
    }

    /// `[G_{t(e)} : H_e]`
    pub fn edge_index(&self, e: usize) -> usize {
        self.images[e].index()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertices
    }

    /// Sum of `[G_v : H_e]` over edges ending at `v`: the degree of every
    /// Bass–Serre tree vertex of type `v`.
    pub fn tree_degree(&self, v: usize) -> usize {
        (0..self.graph.edge_count()).filter(|&e| self.graph.t(e) == v).map(|e| self.edge_index(e)).sum()
    }

    /// Lists every violated invariant.
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        if self.graph.vertices == 0 {
            violations.push("graph has no vertices".into());
        } else if !self.graph.is_connected() {
            violations.push("connectivity: underlying graph is disconnected".into());
        }
        for e in 0..self.graph.edge_count() {
            if self.graph.o(e) >= self.vgroups.len() || self.graph.t(e) >= self.vgroups.len() {
                violations.push(format!("edge {e}: endpoint out of range"));
                continue;
            }
            if self.egroups[e] != self.egroups[self.graph.bar(e)] {
                violations.push(format!("edge {e}: edge group differs from that of its reverse"));
            }
            let h = &self.inj[e];
            if h.target != self.vgroups[self.graph.t(e)] {
                violations.push(format!("edge {e}: embedding does not land in the terminal vertex group"));
            }
            match h.check() {
                Err(err) => violations.push(format!("edge {e}: {err}")),
                Ok(check) if !check.is_hom => {
                    let (g, k) = check.violation.expect("violation recorded");
                    violations.push(format!("edge {e}: not a homomorphism at ({g}, {k})"));
                }
                Ok(_) => {
                    if !h.is_injective() {
                        violations.push(format!("edge {e}: embedding is not injective"));
                    }
                }
            }
        }
        ValidationReport { ok: violations.is_empty(), violations }
    }

    fn tables(&self) -> &Transversals {
        self.transversals.as_ref().expect("transversals exist for valid graphs of groups")
    }

    /// Least-index coset representatives for every directed edge.
    pub fn fix_transversals(&self) -> &Transversals {
        self.tables()
    }

    // ---- words -------------------------------------------------------------

    pub fn identity_word(&self, v: usize) -> GroupWord {
        GroupWord { start: v, head: self.vgroups[v].identity(), steps: Vec::new() }
    }

    pub fn vertex_element(&self, v: usize, g: usize) -> GroupWord {
        GroupWord { start: v, head: g, steps: Vec::new() }
    }

    pub fn end(&self, w: &GroupWord) -> usize {
        w.steps.last().map_or(w.start, |&(e, _)| self.graph.t(e))
    }

    pub fn is_loop(&self, w: &GroupWord) -> bool {
        self.end(w) == w.start
    }

    pub fn check_word(&self, w: &GroupWord) -> Result<(), GogError> {
        if w.start >= self.vertex_count() {
            return Err(GogError::InvalidWord(format!("vertex {} out of range", w.start)));
        }
        if !self.vgroups[w.start].contains(w.head) {
            return Err(GogError::InvalidWord(format!("head {} not in vertex group {}", w.head, w.start)));
        }
        let mut at = w.start;
        for (i, &(e, g)) in w.steps.iter().enumerate() {
            if e >= self.graph.edge_count() || self.graph.o(e) != at {
                return Err(GogError::InvalidWord(format!("step {i}: edge {e} does not leave vertex {at}")));
            }
            at = self.graph.t(e);
            if !self.vgroups[at].contains(g) {
                return Err(GogError::InvalidWord(format!("step {i}: element {g} not in vertex group {at}")));
            }
        }
        Ok(())
    }

    /// Concatenation `u·w`; requires `end(u) = start(w)`.
    pub fn concat(&self, u: &GroupWord, w: &GroupWord) -> Result<GroupWord, GogError> {
        let end = self.end(u);
        if end != w.start {
            return Err(GogError::BasepointMismatch(end, w.start));
        }
        let mut out = u.clone();
        let grp = &self.vgroups[end];
        match out.steps.last_mut() {
            Some((_, g)) => *g = grp.mul(*g, w.head),
            None => out.head = grp.mul(out.head, w.head),
        }
        out.steps.extend_from_slice(&w.steps);
        Ok(out)
    }

    pub fn mul(&self, u: &GroupWord, w: &GroupWord) -> GroupWord {
        self.concat(u, w).expect("composable words")
    }

    pub fn inverse(&self, w: &GroupWord) -> GroupWord {
        let end = self.end(w);
        let last = w.steps.last().map_or(w.head, |&(_, g)| g);
        let mut steps = Vec::with_capacity(w.steps.len());
        for i in (0..w.steps.len()).rev() {
            let (e, _) = w.steps[i];
            let before = if i == 0 { w.head } else { w.steps[i - 1].1 };
            let v = self.graph.o(e);
            steps.push((self.graph.bar(e), self.vgroups[v].inv(before)));
        }
        GroupWord { start: end, head: self.vgroups[end].inv(last), steps }
    }

    pub fn pow(&self, w: &GroupWord, n: i64) -> GroupWord {
        let base = if n < 0 { self.inverse(w) } else { w.clone() };
        let mut acc = self.identity_word(w.start);
        for _ in 0..n.unsigned_abs() {
            acc = self.mul(&acc, &base);
        }
        acc
    }

    /// Removes every pinch `e g bar(e)` with `g ∈ H_e`, scanning left to right.
    fn pinch_ltr(&self, w: &GroupWord) -> GroupWord {
        let mut head = w.head;
        let mut out: Vec<(usize, usize)> = Vec::with_capacity(w.steps.len());
        for &(e, g) in &w.steps {
            if let Some(&(le, lg)) = out.last() {
                if e == self.graph.bar(le) {
                    if let Some(c) = self.preimage[le][lg] {
                        out.pop();
                        let x = self.inj[e].apply(c);
                        let grp = &self.vgroups[self.graph.t(e)];
                        match out.last_mut() {
                            Some((_, pg)) => *pg = grp.mul(grp.mul(*pg, x), g),
                            None => head = grp.mul(grp.mul(head, x), g),
                        }
                        continue;
                    }
                }
            }
            out.push((e, g));
        }
        GroupWord { start: w.start, head, steps: out }
    }

    /// Pushes edge-group factors leftwards so that each element after an edge
    /// is a right-coset representative.
    fn push_left(&self, mut w: GroupWord) -> GroupWord {
        let tables = self.tables();
        for i in (0..w.steps.len()).rev() {
            let (e, g) = w.steps[i];
            let (h, rep) = tables.edges[e].right_split[g];
            w.steps[i].1 = rep;
            let c = self.preimage[e][h].expect("h lies in the edge image");
            let x = self.inj[self.graph.bar(e)].apply(c);
            let grp = &self.vgroups[self.graph.o(e)];
            if i == 0 {
                w.head = grp.mul(w.head, x);
            } else {
                w.steps[i - 1].1 = grp.mul(w.steps[i - 1].1, x);
            }
        }
        w
    }

    /// Pushes edge-group factors rightwards so that each element before an
    /// edge is a left-coset representative.
    fn push_right(&self, mut w: GroupWord) -> GroupWord {
        let tables = self.tables();
        for i in 0..w.steps.len() {
            let (e, _) = w.steps[i];
            let eb = self.graph.bar(e);
            let g = if i == 0 { w.head } else { w.steps[i - 1].1 };
            let (rep, h) = tables.edges[eb].left_split[g];
            if i == 0 {
                w.head = rep;
            } else {
                w.steps[i - 1].1 = rep;
            }
            let c = self.preimage[eb][h].expect("h lies in the edge image");
            let x = self.inj[e].apply(c);
            let grp = &self.vgroups[self.graph.t(e)];
            w.steps[i].1 = grp.mul(x, w.steps[i].1);
        }
        w
    }

    /// Canonical normal form (left-to-right pinch sweep).
    pub fn reduce(&self, w: &GroupWord) -> NormalForm {
        NormalForm { kind: self.kind, word: self.push_left(self.pinch_ltr(w)) }
    }

    /// Same normal form reached through a right-to-left pinch sweep.
    pub fn reduce_rtl(&self, w: &GroupWord) -> NormalForm {
        let reduced = self.inverse(&self.pinch_ltr(&self.inverse(w)));
        NormalForm { kind: self.kind, word: self.push_left(reduced) }
    }

    /// [`Self::reduce`] after checking the word is well formed.
    pub fn try_reduce(&self, w: &GroupWord) -> Result<NormalForm, GogError> {
        self.check_word(w)?;
        Ok(self.reduce(w))
    }

    /// Mirror normal form: left-coset representatives before each edge, the
    /// final element arbitrary.
    pub fn left_form(&self, w: &GroupWord) -> GroupWord {
        self.push_right(self.pinch_ltr(w))
    }

    pub fn words_equal(&self, u: &GroupWord, w: &GroupWord) -> Result<bool, GogError> {
        if u.start != w.start {
            return Err(GogError::BasepointMismatch(u.start, w.start));
        }
        if self.end(u) != self.end(w) {
            return Ok(false);
        }
        Ok(self.reduce(u) == self.reduce(w))
    }

    pub fn is_identity(&self, w: &GroupWord) -> bool {
        let nf = self.reduce(w);
        nf.word.steps.is_empty() && nf.word.head == self.vgroups[w.start].identity()
    }

    /// Syllable length: for amalgams the number of factor syllables outside
    /// the amalgamated subgroup, otherwise the number of edges.
    pub fn syllable_length(&self, nf: &NormalForm) -> usize {
        let w = &nf.word;
        match nf.kind {
            NormalFormKind::Amalgam => {
                let n = w.steps.len();
                if n == 0 {
                    let into_start = if w.start == self.graph.t(0) { 0 } else { 1 };
                    return usize::from(!self.images[into_start].contains(w.head));
                }
                let e1 = w.steps[0].0;
                let head_counts = !self.images[self.graph.bar(e1)].contains(w.head);
                let last = w.steps[n - 1].1;
                let last_counts = last != self.vgroups[self.end(w)].identity();
                usize::from(head_counts) + (n - 1) + usize::from(last_counts)
            }
            NormalFormKind::Hnn | NormalFormKind::General => w.steps.len(),
        }
    }

    /// Writes a loop as `conjugator · core · conjugator^-1` where every cyclic
    /// permutation of `core` is reduced.
    pub fn cyclically_reduce(&self, w: &GroupWord) -> (GroupWord, GroupWord) {
        let mut core = self.reduce(w).word;
        let mut conj = self.identity_word(w.start);
        loop {
            let n = core.steps.len();
            if n < 2 {
                break;
            }
            let (e1, _) = core.steps[0];
            let (en, gn) = core.steps[n - 1];
            if en != self.graph.bar(e1) {
                break;
            }
            let grp = &self.vgroups[core.start];
            let seam = grp.mul(gn, core.head);
            let Some(c) = self.preimage[en][seam] else { break };
            // core = (head e1) X (head e1)^-1
            let prefix = GroupWord { start: core.start, head: core.head, steps: vec![(e1, self.vgroups[self.graph.t(e1)].identity())] };
            let mid_start = self.graph.t(e1);
            let mut steps: Vec<(usize, usize)> = core.steps[1..n - 1].to_vec();
            let x = self.inj[e1].apply(c);
            let g1 = core.steps[0].1;
            let mid = if steps.is_empty() {
                let grp = &self.vgroups[mid_start];
                GroupWord { start: mid_start, head: grp.mul(g1, x), steps }
            } else {
                let last = steps.len() - 1;
                let grp = &self.vgroups[mid_start];
                steps[last].1 = grp.mul(steps[last].1, x);
                GroupWord { start: mid_start, head: g1, steps }
            };
            conj = self.mul(&conj, &prefix);
            core = self.reduce(&mid).word;
        }
        let conj = self.left_form(&conj);
        (core, conj)
    }

    // ---- serialization -----------------------------------------------------

    /// Parses `["g", v, idx, "e", edge, ...]`. Consecutive elements at the
    /// same vertex are multiplied.
    pub fn parse_word(&self, tokens: &[Value]) -> Result<GroupWord, GogError> {
        let bad = |m: &str| GogError::InvalidWord(m.to_string());
        let num = |v: &Value| v.as_u64().map(|x| x as usize).ok_or_else(|| bad("expected a non-negative integer"));
        let mut i = 0;
        let mut word: Option<GroupWord> = None;
        let mut at: Option<usize> = None;
        while i < tokens.len() {
            match tokens[i].as_str() {
                Some("g") => {
                    let v = num(tokens.get(i + 1).ok_or_else(|| bad("truncated g token"))?)?;
                    let g = num(tokens.get(i + 2).ok_or_else(|| bad("truncated g token"))?)?;
                    i += 3;
                    if v >= self.vertex_count() || !self.vgroups[v].contains(g) {
                        return Err(bad(&format!("element {g} at vertex {v} out of range")));
                    }
                    match (&mut word, at) {
                        (None, _) => {
                            word = Some(self.vertex_element(v, g));
                            at = Some(v);
                        }
                        (Some(w), Some(cur)) if cur == v => {
                            *w = self.mul(w, &self.vertex_element(v, g));
                        }
                        _ => return Err(bad(&format!("element at vertex {v} does not follow the path"))),
                    }
                }
                Some("e") => {
                    let e = num(tokens.get(i + 1).ok_or_else(|| bad("truncated e token"))?)?;
                    i += 2;
                    if e >= self.graph.edge_count() {
                        return Err(bad(&format!("edge {e} out of range")));
                    }
                    let o = self.graph.o(e);
                    let w = word.get_or_insert_with(|| self.identity_word(o));
                    if at.unwrap_or(o) != o {
                        return Err(bad(&format!("edge {e} does not leave the current vertex")));
                    }
                    let t = self.graph.t(e);
                    w.steps.push((e, self.vgroups[t].identity()));
                    at = Some(t);
                }
                _ => return Err(bad(&format!("unexpected token at position {i}"))),
            }
        }
        word.ok_or_else(|| bad("empty word (use [\"g\", v, identity])"))
    }

    pub fn word_to_tokens(&self, w: &GroupWord) -> Vec<Value> {
        let mut out = vec![Value::from("g"), Value::from(w.start), Value::from(w.head)];
        for &(e, g) in &w.steps {
            out.extend([Value::from("e"), Value::from(e), Value::from("g"), Value::from(self.graph.t(e)), Value::from(g)]);
        }
        out
    }

    pub fn format_word(&self, w: &GroupWord) -> String {
        let mut s = format!("[{}]{}", w.start, self.vgroups[w.start].name(w.head));
        for &(e, g) in &w.steps {
            s.push_str(&format!(" e{e} {}", self.vgroups[self.graph.t(e)].name(g)));
        }
        s
    }

    // ---- presentation ------------------------------------------------------

    /// A finite presentation of the fundamental group relative to a BFS
    /// spanning tree, plus extra relators given as loops at vertex 0.
    pub fn presentation(&self, extra: &[GroupWord]) -> (Presentation, LetterMap) {
        let mut elem_letter = Vec::new();
        let mut next = 0i32;
        for g in &self.vgroups {
            let mut row = vec![0; g.order()];
            for x in g.elements() {
                if x != g.identity() {
                    next += 1;
                    row[x] = next;
                }
            }
            elem_letter.push(row);
        }
        let tree = self.graph.spanning_tree();
        let mut stable = vec![0i32; self.graph.edge_count()];
        for e in (0..self.graph.edge_count()).step_by(2) {
            if !tree.contains(&e) {
                next += 1;
                stable[e] = next;
                stable[e + 1] = -next;
            }
        }
        let map = LetterMap { elem_letter, stable };
        let mut relators = Vec::new();
        for (v, g) in self.vgroups.iter().enumerate() {
            for a in g.elements() {
                for b in g.elements() {
                    let mut r = Vec::new();
                    map.push_elem(&mut r, v, a);
                    map.push_elem(&mut r, v, b);
                    map.push_inv(&mut r, v, g.mul(a, b), g);
                    if !r.is_empty() {
                        relators.push(r);
                    }
                }
            }
        }
        for e in (0..self.graph.edge_count()).step_by(2) {
            let (o, t) = (self.graph.o(e), self.graph.t(e));
            for c in self.egroups[e].elements() {
                let to_t = self.inj[e].apply(c);
                let to_o = self.inj[e + 1].apply(c);
                let mut r = Vec::new();
                if map.stable[e] != 0 {
                    r.push(map.stable[e]);
                }
                map.push_elem(&mut r, t, to_t);
                if map.stable[e] != 0 {
                    r.push(-map.stable[e]);
                }
                map.push_inv(&mut r, o, to_o, &self.vgroups[o]);
                if !r.is_empty() {
                    relators.push(r);
                }
            }
        }
        for w in extra {
            relators.push(map.letters(self, w));
        }
        (Presentation { generators: next as usize, relators }, map)
    }
}

/// Translation of words into presentation letters.
#[derive(Clone, Debug)]
pub struct LetterMap {
    elem_letter: Vec<Vec<i32>>,
    stable: Vec<i32>,
}

impl LetterMap {
    fn push_elem(&self, out: &mut Vec<Letter>, v: usize, g: usize) {
        let l = self.elem_letter[v][g];
        if l != 0 {
            out.push(l);
        }
    }

    fn push_inv(&self, out: &mut Vec<Letter>, v: usize, g: usize, group: &FiniteGroup) {
        let _ = group;
        let l = self.elem_letter[v][g];
        if l != 0 {
            out.push(-l);
        }
    }

    pub fn letters(&self, gog: &GraphOfGroups, w: &GroupWord) -> Vec<Letter> {
        let mut out = Vec::new();
        self.push_elem(&mut out, w.start, w.head);
        for &(e, g) in &w.steps {
            if self.stable[e] != 0 {
                out.push(self.stable[e]);
            }
            self.push_elem(&mut out, gog.graph.t(e), g);
        }
        out
    }
}

// ---- JSON descriptor -------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EdgeDescriptor {
    pub group: String,
    pub from: usize,
    pub to: usize,
    /// Embedding into the vertex group at `to`, as element images.
    pub into_to: Vec<usize>,
    /// Embedding into the vertex group at `from`.
    pub into_from: Vec<usize>,
}

/// `{"groups": {name: group}, "vertices": [name...], "edges": [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GraphOfGroupsDescriptor {
    pub groups: BTreeMap<String, GroupDescriptor>,
    pub vertices: Vec<String>,
    pub edges: Vec<EdgeDescriptor>,
}

impl GraphOfGroupsDescriptor {
    /// Builds without validating; call `validate()` on the result.
    pub fn build_unchecked(&self) -> Result<GraphOfGroups, GogError> {
        let mut built = BTreeMap::new();
        for (name, d) in &self.groups {
            built.insert(name.clone(), d.build()?);
        }
        let get = |n: &String| built.get(n).cloned().ok_or_else(|| GogError::UnknownGroup(n.clone()));
        let vgroups = self.vertices.iter().map(get).collect::<Result<Vec<_>, _>>()?;
        let mut edges = Vec::new();
        for e in &self.edges {
            if e.from >= vgroups.len() || e.to >= vgroups.len() {
                return Err(GogError::Invalid(format!("edge endpoint out of range: {} -> {}", e.from, e.to)));
            }
            edges.push(EdgeSpec { from: e.from, to: e.to, group: get(&e.group)?, into_to: e.into_to.clone(), into_from: e.into_from.clone() });
        }
        Ok(GraphOfGroups::new(vgroups, edges))
    }

    pub fn build(&self) -> Result<GraphOfGroups, GogError> {
        let gog = self.build_unchecked()?;
        let report = gog.validate();
        if report.ok {
            Ok(gog)
        } else {
            Err(GogError::Invalid(report.violations.join("; ")))
        }
    }
}

/// Builders for the fixtures that recur across the crate.
pub mod fixtures {
    use super::*;

    /// `C4 *_{C2} C6` with `a = 1 ∈ C4`, `b = 1 ∈ C6`, `a^2 = b^3`.
    pub fn sl2z() -> GraphOfGroups {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let c6 = FiniteGroup::cyclic(6).unwrap();
        let c2 = FiniteGroup::cyclic(2).unwrap();
        GraphOfGroups::amalgam(c4, c6, c2, vec![0, 2], vec![0, 3]).unwrap()
    }

    /// `C4 * C6`.
    pub fn c4_free_c6() -> GraphOfGroups {
        GraphOfGroups::free_product(FiniteGroup::cyclic(4).unwrap(), FiniteGroup::cyclic(6).unwrap()).unwrap()
    }

    /// `C2 * C2`, the infinite dihedral group.
    pub fn infinite_dihedral() -> GraphOfGroups {
        GraphOfGroups::free_product(FiniteGroup::cyclic(2).unwrap(), FiniteGroup::cyclic(2).unwrap()).unwrap()
    }

    /// Free group of rank 2: one trivial vertex group, two loops.
    pub fn free_group_rank2() -> GraphOfGroups {
        let t = FiniteGroup::trivial();
        let spec = || EdgeSpec { from: 0, to: 0, group: FiniteGroup::trivial(), into_to: vec![0], into_from: vec![0] };
        GraphOfGroups::checked(vec![t], vec![spec(), spec()]).unwrap()
    }

    /// HNN extension of `C6` over `C3 = <b^2>` with `t^-1 b^2 t = b^4`.
    pub fn hnn_c6() -> GraphOfGroups {
        let c6 = FiniteGroup::cyclic(6).unwrap();
        let c3 = FiniteGroup::cyclic(3).unwrap();
        GraphOfGroups::hnn(c6, c3, vec![0, 2, 4], vec![0, 4, 2]).unwrap()
    }

    /// Fixture by its job-spec name.
    pub fn by_name(name: &str) -> Option<GraphOfGroups> {
        match name {
            "sl2z" => Some(sl2z()),
            "c4-free-c6" => Some(c4_free_c6()),
            "infinite-dihedral" => Some(infinite_dihedral()),
            "hnn-c6" => Some(hnn_c6()),
            "s3-amalgam" => Some(s3_amalgam().0),
            "free-rank2" => Some(free_group_rank2()),
            _ => None,
        }
    }

    /// `S3 *_{C2} D4` amalgamating a transposition of `S3` with a reflection
    /// of `D4`. Returns the graph of groups, the index of a 3-cycle in `S3`
    /// and of a reflection of `D4` outside the amalgamated subgroup.
    pub fn s3_amalgam() -> (GraphOfGroups, usize, usize) {
        let (s3, perms) = FiniteGroup::symmetric(3).unwrap();
        let transposition = perms.iter().position(|p| p == &vec![1, 0, 2]).unwrap();
        let three_cycle = perms.iter().position(|p| p == &vec![1, 2, 0]).unwrap();
        let d4 = FiniteGroup::dihedral(4).unwrap();
        let c2 = FiniteGroup::cyclic(2).unwrap();
        let gog = GraphOfGroups::amalgam(s3.clone(), d4, c2, vec![s3.identity(), transposition], vec![0, 4]).unwrap();
        // reflection s r (index 5) is not in <s> = {0, 4}
        (gog, three_cycle, 5)
    }
}

/// Builds amalgam words from factor syllables: `(0, g)` is `g ∈ A`, `(1, g)` is `g ∈ B`.
pub fn amalgam_word(gog: &GraphOfGroups, basepoint: usize, syllables: &[(usize, usize)]) -> GroupWord {
    let mut w = gog.identity_word(basepoint);
    let mut at = basepoint;
    for &(side, g) in syllables {
        if side != at {
            let e = if side == gog.graph().t(0) { 0 } else { 1 };
            w.steps.push((e, gog.vertex_group(side).identity()));
            at = side;
        }
        w = gog.mul(&w, &gog.vertex_element(at, g));
    }
    if at != basepoint {
        let e = if basepoint == gog.graph().t(0) { 0 } else { 1 };
        w.steps.push((e, gog.vertex_group(basepoint).identity()));
    }
    w
}
