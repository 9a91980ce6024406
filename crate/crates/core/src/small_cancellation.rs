//! Small cancellation over amalgamated free products: symmetrized sets,
//! pieces, `C'(λ)`, the thinness constant `M = k|r|`, Dehn's algorithm and
//! the local structure of the presentation complex.
//!
//! Elements are handled as syllable lists read off the left normal form
//! (edge-group elements pushed to the right), so every syllable except the
//! last is a fixed left-coset representative.

use std::collections::{BTreeSet, HashMap};

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::bass_serre::{build_tree_ball, tree_vertex_key, BallError, Cell, TreeBall};
use crate::cayley_abels::{quotient_tree_ball, CaError, GGraphBall, WordProblem};
use crate::graph_of_groups::{amalgam_word, GraphOfGroups, GroupWord, NormalFormKind};

/// `(vertex, element)`: a factor syllable of an amalgam.
pub type Syllable = (usize, usize);
pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScError {
    #[error("small cancellation needs an amalgam A *_C B")]
    NotAmalgam,
    #[error("relator is trivial")]
    EmptyRelator,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("relator is not cyclically reduced")]
    NotCyclicallyReduced,
    #[error("radius {0} reaches beyond the injectivity radius of the quotient")]
    RadiusTooLarge(usize),
    #[error(transparent)]
    Ball(#[from] BallError),
    #[error(transparent)]
    Ca(#[from] CaError),
}

/// Syllable arithmetic in `A *_C B` (vertex 0 is `A`).
#[derive(Clone, Debug)]
pub struct Amalgam {
    gog: GraphOfGroups,
}

impl Amalgam {
    pub fn new(gog: &GraphOfGroups) -> Result<Self, ScError> {
        if gog.kind() != NormalFormKind::Amalgam {
            return Err(ScError::NotAmalgam);
        }
        Ok(Amalgam { gog: gog.clone() })
    }

    pub fn gog(&self) -> &GraphOfGroups {
        &self.gog
    }

    /// Directed edge ending at `side`.
    fn edge_into(&self, side: usize) -> usize {
        if self.gog.graph().t(0) == side {
            0
        } else {
            1
        }
    }

    pub fn to_word(&self, syl: &[Syllable]) -> GroupWord {
        amalgam_word(&self.gog, 0, syl)
    }

    pub fn from_word(&self, w: &GroupWord) -> Vec<Syllable> {
        let lf = self.gog.left_form(w);
        let mut out = Vec::new();
        if lf.head != self.gog.vertex_group(lf.start).identity() {
            out.push((lf.start, lf.head));
        }
        for &(e, g) in &lf.steps {
            let v = self.gog.graph().t(e);
            if g != self.gog.vertex_group(v).identity() {
                out.push((v, g));
            }
        }
        out
    }

    pub fn canonical(&self, syl: &[Syllable]) -> Vec<Syllable> {
        self.from_word(&self.to_word(syl))
    }

    pub fn inverse(&self, syl: &[Syllable]) -> Vec<Syllable> {
        let raw: Vec<Syllable> = syl.iter().rev().map(|&(v, g)| (v, self.gog.vertex_group(v).inv(g))).collect();
        self.canonical(&raw)
    }

    pub fn concat(&self, a: &[Syllable], b: &[Syllable]) -> Vec<Syllable> {
        let mut raw = a.to_vec();
        raw.extend_from_slice(b);
        self.canonical(&raw)
    }

    pub fn pow(&self, a: &[Syllable], m: usize) -> Vec<Syllable> {
        let raw: Vec<Syllable> = (0..m).flat_map(|_| a.iter().copied()).collect();
        self.canonical(&raw)
    }

    /// Fixed left-coset representative of a syllable modulo `C`.
    pub fn rep(&self, s: Syllable) -> usize {
        self.gog.fix_transversals().edges[self.edge_into(s.0)].left_split[s.1].0
    }

    /// `(core, conjugator)` with `w = conjugator · core · conjugator^-1` and
    /// `core` cyclically reduced.
    pub fn cyclically_reduce(&self, syl: &[Syllable]) -> (Vec<Syllable>, Vec<Syllable>) {
        let mut core = self.canonical(syl);
        let mut conj: Vec<Syllable> = Vec::new();
        while core.len() >= 2 && core[0].0 == core[core.len() - 1].0 {
            let last = core[core.len() - 1];
            let mut raw = vec![last];
            raw.extend_from_slice(&core[..core.len() - 1]);
            core = self.canonical(&raw);
            conj = self.concat(&conj, &self.inverse(&[last]));
        }
        (core, conj)
    }

    /// Cyclic permutations of a cyclically reduced syllable list.
    pub fn rotations(&self, core: &[Syllable]) -> Vec<Vec<Syllable>> {
        if core.len() <= 1 {
            return vec![core.to_vec()];
        }
        (0..core.len())
            .map(|i| {
                let mut raw = core[i..].to_vec();
                raw.extend_from_slice(&core[..i]);
                self.canonical(&raw)
            })
            .collect()
    }

    /// The lexicographically least cyclic permutation of the cyclically
    /// reduced core of `syl`; it fixes `|r|` and the path used for `M`.
    pub fn least_rotation(&self, syl: &[Syllable]) -> Vec<Syllable> {
        let (core, _) = self.cyclically_reduce(syl);
        self.rotations(&core).into_iter().min().unwrap_or_default()
    }

    /// Elements of `C` inside `A`.
    fn c_in_a(&self) -> Vec<usize> {
        self.gog.edge_image(self.edge_into(0)).elements().to_vec()
    }
}

/// All cyclic permutations of a relator and its inverse, closed under
/// conjugation by `C`, deduplicated as group elements.
#[derive(Clone, Debug, Serialize)]
pub struct SymmetrizedSet {
    pub base: Vec<Syllable>,
    pub members: Vec<Vec<Syllable>>,
}

impl SymmetrizedSet {
    pub fn min_length(&self) -> usize {
        self.members.iter().map(Vec::len).min().unwrap_or(0)
    }
}

pub fn symmetrize(am: &Amalgam, r: &[Syllable]) -> Result<SymmetrizedSet, ScError> {
    let (core, _) = am.cyclically_reduce(r);
    if core.is_empty() {
        return Err(ScError::EmptyRelator);
    }
    let mut set = BTreeSet::new();
    let cs = am.c_in_a();
    for x in [core.clone(), am.inverse(&core)] {
        for rot in am.rotations(&x) {
            for &c in &cs {
                let cinv = am.gog.vertex_group(0).inv(c);
                set.insert(am.canonical(&[&[(0, cinv)][..], &rot, &[(0, c)]].concat()));
            }
        }
    }
    Ok(SymmetrizedSet { base: core, members: set.into_iter().collect() })
}

pub fn symmetrize_word(am: &Amalgam, r: &GroupWord) -> Result<SymmetrizedSet, ScError> {
    symmetrize(am, &am.from_word(r))
}

/// Common-prefix lengths between distinct members.
#[derive(Clone, Debug, Serialize)]
pub struct PieceReport {
    /// `(i, j, piece)` for `i < j`.
    pub pairs: Vec<(usize, usize, usize)>,
    pub max_piece: usize,
    pub argmax: Option<(usize, usize)>,
    pub min_length: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub lambda_star: Rational,
}

fn ser_ratio<S: serde::Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

/// Longest common prefix in syllables, comparing coset representatives.
pub fn common_prefix(am: &Amalgam, a: &[Syllable], b: &[Syllable]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x.0 == y.0 && am.rep(**x) == am.rep(**y)).count()
}

pub fn pieces(am: &Amalgam, s: &SymmetrizedSet) -> PieceReport {
    let mut pairs = Vec::new();
    let mut max_piece = 0;
    let mut argmax = None;
    for i in 0..s.members.len() {
        for j in i + 1..s.members.len() {
            let p = common_prefix(am, &s.members[i], &s.members[j]);
            pairs.push((i, j, p));
            if p > max_piece || argmax.is_none() {
                if p > max_piece {
                    max_piece = p;
                }
                argmax = Some((i, j));
            }
        }
    }
    let min_length = s.min_length();
    let lambda_star = if min_length == 0 { Rational::from_integer(0) } else { Rational::new(max_piece as i64, min_length as i64) };
    PieceReport { pairs, max_piece, argmax, min_length, lambda_star }
}

#[derive(Clone, Debug, Serialize)]
pub struct CprimeVerdict {
    pub holds: bool,
    pub max_piece: usize,
    pub relator_length: usize,
    #[serde(serialize_with = "ser_ratio")]
    pub lambda: Rational,
    #[serde(serialize_with = "ser_ratio")]
    pub lambda_star: Rational,
}

/// `r^m` satisfies `C'(λ)`: every piece is shorter than `λ·|r^m|`.
pub fn check_cprime(am: &Amalgam, r: &[Syllable], m: usize, lambda: Rational) -> Result<CprimeVerdict, ScError> {
    let (core, _) = am.cyclically_reduce(r);
    let s = symmetrize(am, &am.pow(&core, m))?;
    let report = pieces(am, &s);
    let len = report.min_length as i64;
    let holds = Rational::from_integer(report.max_piece as i64) < lambda * Rational::from_integer(len);
    Ok(CprimeVerdict { holds, max_piece: report.max_piece, relator_length: report.min_length, lambda, lambda_star: report.lambda_star })
}

/// The hypothesis `12λM < 1`.
pub fn twelve_lambda_m(lambda: Rational, m_const: usize) -> bool {
    Rational::from_integer(12) * lambda * Rational::from_integer(m_const as i64) < Rational::from_integer(1)
}

// ---- the constant M ------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct ThinnessConstant {
    pub k: usize,
    pub r_len: usize,
    pub m_const: usize,
    /// Tree vertices along the path from `y` to `r²y`.
    pub path: Vec<GroupWord>,
    /// `[G̃_t : G̃_γ]` for each edge `t` of the path.
    pub indices: Vec<usize>,
    pub path_stabilizer_order: usize,
}

/// Tree vertices on the path from the base vertex to `g·base`, read from the
/// prefixes of the left normal form of `g`.
pub fn tree_path(gog: &GraphOfGroups, g: &GroupWord) -> Vec<GroupWord> {
    let lf = gog.left_form(g);
    let mut out = vec![gog.identity_word(lf.start)];
    for i in 1..=lf.steps.len() {
        let prefix = GroupWord { start: lf.start, head: lf.head, steps: lf.steps[..i].to_vec() };
        out.push(tree_vertex_key(gog, &prefix));
    }
    out
}

/// Stabilizer of the tree edge whose far endpoint is labelled `q` (a key
/// ending in an edge).
pub fn edge_stabilizer(gog: &GraphOfGroups, q: &GroupWord) -> BTreeSet<GroupWord> {
    let (e, _) = *q.steps.last().expect("edge keys end in an edge");
    let t = gog.graph().t(e);
    let qi = gog.inverse(q);
    gog.edge_image(e).elements().iter().map(|&h| gog.reduce(&gog.mul(&gog.mul(q, &gog.vertex_element(t, h)), &qi)).word).collect()
}

/// `M = k|r|` with `k = max [G̃_t : G̃_γ]` over edges `t` of the path `γ`
/// from the base vertex to `r²` of it.
pub fn compute_m(am: &Amalgam, r: &[Syllable]) -> Result<ThinnessConstant, ScError> {
    let (core, _) = am.cyclically_reduce(r);
    if core.is_empty() {
        return Err(ScError::EmptyRelator);
    }
    let gog = am.gog();
    let r_len = gog.syllable_length(&gog.reduce(&am.to_word(&core)));
    let r2 = am.to_word(&am.pow(&core, 2));
    let path = tree_path(gog, &r2);
    let stabs: Vec<BTreeSet<GroupWord>> = path[1..].iter().map(|q| edge_stabilizer(gog, q)).collect();
    let mut common = stabs.first().cloned().unwrap_or_default();
    for s in &stabs[1..] {
        common = common.intersection(s).cloned().collect();
    }
    let indices: Vec<usize> = stabs.iter().map(|s| s.len() / common.len().max(1)).collect();
    let k = indices.iter().copied().max().unwrap_or(1);
    Ok(ThinnessConstant { k, r_len, m_const: k * r_len, path, indices, path_stabilizer_order: common.len() })
}

// ---- Dehn's algorithm --------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct DehnStep {
    pub position: usize,
    pub member: usize,
    pub matched: usize,
    /// `w_before = P · s · P^-1 · w_after` with `P` this word and `s` the member.
    pub conjugator: Vec<Syllable>,
    pub length_before: usize,
    pub length_after: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DehnResult {
    pub reduced: Vec<Syllable>,
    pub area: usize,
    pub trace: Vec<DehnStep>,
}

/// Dehn's algorithm for a symmetrized set satisfying `C'(1/6)`.
pub struct Dehn {
    am: Amalgam,
    set: SymmetrizedSet,
}

impl Dehn {
    pub fn new(am: &Amalgam, set: SymmetrizedSet) -> Result<Self, ScError> {
        let report = pieces(am, &set);
        let len = report.min_length as i64;
        if Rational::from_integer(report.max_piece as i64) >= Rational::new(len, 6) {
            return Err(ScError::Unsupported(format!("C'(1/6) fails: piece {} against length {}", report.max_piece, report.min_length)));
        }
        Ok(Dehn { am: am.clone(), set })
    }

    /// Greedy reduction without the `C'(1/6)` check. Reaching the empty word
    /// still proves membership; getting stuck proves nothing.
    pub fn new_unchecked(am: &Amalgam, set: SymmetrizedSet) -> Self {
        Dehn { am: am.clone(), set }
    }

    pub fn set(&self) -> &SymmetrizedSet {
        &self.set
    }

    /// One leftmost-longest replacement that strictly shortens `w`.
    fn step(&self, w: &[Syllable]) -> Option<(Vec<Syllable>, DehnStep)> {
        let am = &self.am;
        let l = w.len();
        for i in 0..l {
            let mut best: Vec<(usize, usize)> = Vec::new();
            for (mi, s) in self.set.members.iter().enumerate() {
                let n = s.len();
                if n == 0 || w[i].0 != s[0].0 {
                    continue;
                }
                let mut e = 1;
                while i + e < l && e < n && w[i + e] == s[e] {
                    e += 1;
                }
                let kmax = (e + 1).min(n).min(l - i);
                for k in (1..=kmax).rev() {
                    if 2 * k > n {
                        best.push((k, mi));
                    }
                }
            }
            best.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            for (k, mi) in best {
                let s = &self.set.members[mi];
                let grp = |v: usize| am.gog.vertex_group(v);
                let (v0, w0) = w[i];
                let x = grp(v0).mul(w0, grp(v0).inv(s[0].1));
                let last = w[i + k - 1];
                let sk = s[k - 1];
                if last.0 != sk.0 {
                    continue;
                }
                let y = if k == 1 { grp(sk.0).identity() } else { grp(sk.0).mul(grp(sk.0).inv(sk.1), last.1) };
                let rest_inv = am.inverse(&s[k..]);
                let mut raw: Vec<Syllable> = w[..i].to_vec();
                raw.push((v0, x));
                raw.extend_from_slice(&rest_inv);
                raw.push((sk.0, y));
                raw.extend_from_slice(&w[i + k..]);
                let next = am.canonical(&raw);
                if next.len() < l {
                    let mut p = w[..i].to_vec();
                    p.push((v0, x));
                    let step = DehnStep { position: i, member: mi, matched: k, conjugator: am.canonical(&p), length_before: l, length_after: next.len() };
                    return Some((next, step));
                }
            }
        }
        None
    }

    pub fn reduce(&self, w: &[Syllable]) -> DehnResult {
        let mut cur = self.am.canonical(w);
        let mut trace = Vec::new();
        while let Some((next, step)) = self.step(&cur) {
            trace.push(step);
            cur = next;
        }
        DehnResult { area: trace.len(), reduced: cur, trace }
    }

    /// Rebuilds `∏ P_i s_i P_i^-1 · reduced` from the trace.
    pub fn replay(&self, result: &DehnResult) -> Vec<Syllable> {
        let am = &self.am;
        let mut acc: Vec<Syllable> = Vec::new();
        for st in &result.trace {
            let p = &st.conjugator;
            let conj = am.concat(&am.concat(p, &self.set.members[st.member]), &am.inverse(p));
            acc = am.concat(&acc, &conj);
        }
        am.concat(&acc, &result.reduced)
    }
}

/// Membership in the normal closure, decided by Dehn's algorithm.
pub struct DehnKernel {
    pub dehn: Dehn,
}

impl WordProblem for DehnKernel {
    fn in_kernel(&self, w: &GroupWord) -> Result<bool, CaError> {
        Ok(self.dehn.reduce(&self.dehn.am.from_word(w)).reduced.is_empty())
    }
}

// ---- the presentation complex -----------------------------------------------------

/// A 2-cell through a given tree edge, described by its lifted boundary read
/// from that edge onwards.
#[derive(Clone, Debug, Serialize)]
pub struct CellThroughEdge {
    /// Position of the edge on the boundary of the base cell `D`.
    pub position: usize,
    pub reversed: bool,
    /// `g` with `g·D` this cell.
    pub conjugator: GroupWord,
    pub lift: Vec<(GroupWord, GroupWord)>,
}

/// Local structure of the presentation complex `X` of `⟨A *_C B | r^m⟩`
/// around the base vertex.
#[derive(Clone, Debug)]
pub struct TwoComplexBall {
    pub tree: TreeBall,
    pub skeleton: GGraphBall,
    pub r: Vec<Syllable>,
    pub m: usize,
    pub r_len: usize,
    /// Edges `(P_j, Q_j)` of the base boundary path from `y` to `r^m y`.
    pub boundary: Vec<(GroupWord, GroupWord, usize)>,
    relator: GroupWord,
    /// Distinct 2-cells through each tree-ball edge.
    pub cells: Vec<Vec<CellThroughEdge>>,
}

impl TwoComplexBall {
    fn lift(&self, g: &GroupWord, position: usize, reversed: bool) -> Vec<(GroupWord, GroupWord)> {
        let gog = self.tree.gog();
        let l = self.boundary.len();
        let rel_inv = gog.inverse(&self.relator);
        let g_r = gog.mul(g, &self.relator);
        let g_ri = gog.mul(g, &rel_inv);
        let key = |h: &GroupWord, x: &GroupWord| tree_vertex_key(gog, &gog.mul(h, x));
        (0..l)
            .map(|j| {
                let idx = if reversed { position as isize - j as isize } else { (position + j) as isize };
                let (h, jj) = if idx >= l as isize {
                    (&g_r, (idx - l as isize) as usize)
                } else if idx < 0 {
                    (&g_ri, (idx + l as isize) as usize)
                } else {
                    (g, idx as usize)
                };
                let (p, q, _) = &self.boundary[jj];
                if reversed {
                    (key(h, q), key(h, p))
                } else {
                    (key(h, p), key(h, q))
                }
            })
            .collect()
    }

    /// Elements of the stabilizer of ball edge `k` as loops at the basepoint.
    pub fn edge_stabilizer(&self, k: usize) -> Vec<GroupWord> {
        self.tree.stabilizer(Cell::Edge(k)).elements
    }
}

/// Builds the skeleton ball with `wp` and, for every edge in it, all 2-cells
/// whose boundary passes through it.
pub fn presentation_complex_ball(am: &Amalgam, r: &[Syllable], m: usize, radius: usize, wp: &dyn WordProblem) -> Result<TwoComplexBall, ScError> {
    let gog = am.gog();
    let (core, _) = am.cyclically_reduce(r);
    if core.is_empty() {
        return Err(ScError::EmptyRelator);
    }
    let r_len = gog.syllable_length(&gog.reduce(&am.to_word(&core)));
    let relator = gog.reduce(&am.to_word(&am.pow(&core, m))).word;
    let tree = build_tree_ball(gog, 0, radius, crate::bass_serre::DEFAULT_CELL_CAP)?;
    let skeleton = quotient_tree_ball(gog, 0, radius, wp, crate::bass_serre::DEFAULT_CELL_CAP)?;
    if skeleton.vertex_count() != tree.vertex_count() {
        return Err(ScError::RadiusTooLarge(radius));
    }
    let path = tree_path(gog, &relator);
    if path.len() - 1 != m * r_len {
        return Err(ScError::NotCyclicallyReduced);
    }
    let lf = gog.left_form(&relator);
    let boundary: Vec<(GroupWord, GroupWord, usize)> = (0..path.len() - 1).map(|j| (path[j].clone(), path[j + 1].clone(), lf.steps[j].0)).collect();
    let mut x = TwoComplexBall { tree, skeleton, r: core, m, r_len, boundary, relator, cells: Vec::new() };
    let mut all = Vec::new();
    for k in 0..x.tree.edges.len() {
        all.push(cells_through(&x, k));
    }
    x.cells = all;
    Ok(x)
}

fn cells_through(x: &TwoComplexBall, k: usize) -> Vec<CellThroughEdge> {
    let gog = x.tree.gog();
    let te = &x.tree.edges[k];
    let q_e = &x.tree.vertices[te.child].word;
    let eps = te.edge;
    let t = gog.graph().t(eps);
    let h_elems = gog.edge_image(eps).elements().to_vec();
    let mut seen: HashMap<Vec<(GroupWord, GroupWord)>, ()> = HashMap::new();
    let mut out = Vec::new();
    for (i, (_, q_i, ty)) in x.boundary.iter().enumerate() {
        let reversed = if *ty == eps {
            false
        } else if *ty == gog.graph().bar(eps) {
            true
        } else {
            continue;
        };
        // terminal word of t_i in the orientation matching e
        let term = if reversed {
            gog.mul(
                q_i,
                &GroupWord { start: gog.end(q_i), head: gog.vertex_group(gog.end(q_i)).identity(), steps: vec![(eps, gog.vertex_group(t).identity())] },
            )
        } else {
            q_i.clone()
        };
        let term_inv = gog.inverse(&term);
        for &h in &h_elems {
            let g = gog.reduce(&gog.mul(&gog.mul(q_e, &gog.vertex_element(t, h)), &term_inv)).word;
            let lift = x.lift(&g, i, reversed);
            if seen.insert(lift.clone(), ()).is_none() {
                out.push(CellThroughEdge { position: i, reversed, conjugator: g, lift });
            }
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct MThinReport {
    pub m_const: usize,
    pub counts: Vec<usize>,
    pub max_count: usize,
    pub argmax: Option<usize>,
    pub holds: bool,
}

/// Every edge of the ball lies on at most `M` 2-cells.
pub fn check_m_thin(x: &TwoComplexBall, m_const: usize) -> MThinReport {
    let counts: Vec<usize> = x.cells.iter().map(Vec::len).collect();
    let (argmax, max_count) = counts.iter().copied().enumerate().max_by_key(|&(i, c)| (c, std::cmp::Reverse(i))).map_or((None, 0), |(i, c)| (Some(i), c));
    MThinReport { m_const, holds: max_count <= m_const, counts, max_count, argmax }
}

#[derive(Clone, Debug, Serialize)]
pub struct ClaimAudit {
    pub edge: usize,
    /// Boundary positions up to the shift by `r`, verified exactly.
    pub boundary_orbits: usize,
    pub shift_verified: bool,
    /// `G_e`-orbits of 2-cells through the edge.
    pub s_orbits: usize,
    /// The map from those orbits to boundary-position classes is injective.
    pub injective: bool,
    /// `[G_e : G_K]` for each 2-cell `K` through the edge.
    pub indices: Vec<usize>,
    pub k: usize,
    pub index_bound_holds: bool,
}

/// Checks the three counting claims behind `M`-thinness at one edge.
pub fn claim_audit(x: &TwoComplexBall, edge: usize, k: usize) -> ClaimAudit {
    let gog = x.tree.gog();
    let rl = x.r_len;
    let rword = gog.reduce(&x.tree.gog().mul(&gog.identity_word(0), &gog.reduce(&amalgam_word(gog, 0, &x.r)).word)).word;
    // r·t_j = t_{j+|r|}
    let l = x.boundary.len();
    let shift_verified = (0..l.saturating_sub(rl)).all(|j| {
        let (p, q, _) = &x.boundary[j];
        let (p2, q2, _) = &x.boundary[j + rl];
        tree_vertex_key(gog, &gog.mul(&rword, p)) == *p2 && tree_vertex_key(gog, &gog.mul(&rword, q)) == *q2
    });
    let boundary_orbits = if shift_verified { rl.min(l) } else { l };
    let cells = &x.cells[edge];
    let index: HashMap<&Vec<(GroupWord, GroupWord)>, usize> = cells.iter().enumerate().map(|(i, c)| (&c.lift, i)).collect();
    let stab = x.edge_stabilizer(edge);
    let mut orbit_of = vec![usize::MAX; cells.len()];
    let mut s_orbits = 0;
    let mut indices = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        let mut fixing = 0;
        for g in &stab {
            let gc = gog.reduce(&gog.mul(g, &c.conjugator)).word;
            let lift = x.lift(&gc, c.position, c.reversed);
            if lift == c.lift {
                fixing += 1;
            }
            if orbit_of[i] == usize::MAX {
                if let Some(&j) = index.get(&lift) {
                    if orbit_of[j] != usize::MAX {
                        orbit_of[i] = orbit_of[j];
                    }
                }
            }
        }
        if orbit_of[i] == usize::MAX {
            orbit_of[i] = s_orbits;
            s_orbits += 1;
        }
        indices.push(stab.len() / fixing.max(1));
    }
    // injectivity of orbit -> position class
    let mut class_of_orbit: HashMap<usize, usize> = HashMap::new();
    let mut injective = true;
    for (i, c) in cells.iter().enumerate() {
        let class = c.position % rl.max(1);
        match class_of_orbit.get(&orbit_of[i]) {
            Some(_) => {}
            None => {
                if class_of_orbit.values().any(|&v| v == class) {
                    injective = false;
                }
                class_of_orbit.insert(orbit_of[i], class);
            }
        }
    }
    let index_bound_holds = indices.iter().all(|&i| i <= k);
    ClaimAudit { edge, boundary_orbits, shift_verified, s_orbits, injective, indices, k, index_bound_holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cayley_abels::TrivialKernel;
    use crate::graph_of_groups::fixtures::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// a·b·a²·b²·a³·b³ in C4 * C6.
    fn r6() -> Vec<Syllable> {
        vec![(0, 1), (1, 1), (0, 2), (1, 2), (0, 3), (1, 3)]
    }

    /// Brute-force pieces: longest k such that the length-k prefixes agree
    /// as group elements up to right multiplication by C.
    fn piece_oracle(am: &Amalgam, a: &[Syllable], b: &[Syllable]) -> usize {
        let gog = am.gog();
        for k in (0..=a.len().min(b.len())).rev() {
            let pa = am.to_word(&a[..k]);
            let pb = am.to_word(&b[..k]);
            let d = gog.reduce(&gog.mul(&gog.inverse(&pa), &pb)).word;
            if d.steps.is_empty() && gog.edge_image(1).contains(d.head) {
                return k;
            }
        }
        0
    }

    #[test]
    fn symmetrize_examples() {
        let am = Amalgam::new(&c4_free_c6()).unwrap();
        let s = symmetrize(&am, &[(0, 1), (1, 1)]).unwrap();
        assert_eq!(s.members.len(), 4);
        assert!(s.members.contains(&vec![(1, 5), (0, 3)]));
        let single = symmetrize(&am, &[(0, 2)]).unwrap();
        assert_eq!(single.members, vec![vec![(0, 2)]]);
        let inv = symmetrize(&am, &am.inverse(&r6())).unwrap();
        assert_eq!(inv.members, symmetrize(&am, &r6()).unwrap().members);
        assert_eq!(symmetrize(&am, &[]).unwrap_err(), ScError::EmptyRelator);
        // idempotent
        for m in &s.members {
            assert_eq!(symmetrize(&am, m).unwrap().members, s.members);
        }
    }

    #[test]
    fn pieces_match_oracle() {
        let am = Amalgam::new(&c4_free_c6()).unwrap();
        let s = symmetrize(&am, &r6()).unwrap();
        let report = pieces(&am, &s);
        for &(i, j, p) in &report.pairs {
            assert_eq!(p, piece_oracle(&am, &s.members[i], &s.members[j]));
        }
        assert_eq!(report.max_piece, 3);
        assert_eq!(report.lambda_star, Rational::new(1, 2));
        // rebuilding from any member leaves the report unchanged
        for m in &s.members {
            assert_eq!(pieces(&am, &symmetrize(&am, m).unwrap()).max_piece, 3);
        }
    }

    #[test]
    fn pieces_with_amalgamation_match_oracle() {
        let am = Amalgam::new(&sl2z()).unwrap();
        let s = symmetrize(&am, &[(0, 1), (1, 1), (0, 1), (1, 2)]).unwrap();
        let report = pieces(&am, &s);
        for &(i, j, p) in &report.pairs {
            assert_eq!(p, piece_oracle(&am, &s.members[i], &s.members[j]), "{:?} {:?}", s.members[i], s.members[j]);
        }
    }

    #[test]
    fn cprime_examples() {
        let am = Amalgam::new(&c4_free_c6()).unwrap();
        let v = check_cprime(&am, &r6(), 12, Rational::new(1, 12)).unwrap();
        assert!(v.holds);
        assert_eq!(v.relator_length, 72);
        assert!(check_cprime(&am, &r6(), 1, Rational::from_integer(1)).unwrap().holds);
        assert!(!check_cprime(&am, &r6(), 1, Rational::new(1, 6)).unwrap().holds);
        assert!(twelve_lambda_m(Rational::new(1, 80), 6));
        assert!(!twelve_lambda_m(Rational::new(1, 12), 6));
    }

    #[test]
    fn constant_m_examples() {
        let free = Amalgam::new(&c4_free_c6()).unwrap();
        let t = compute_m(&free, &r6()).unwrap();
        assert_eq!((t.k, t.r_len, t.m_const), (1, 6, 6));
        assert_eq!(t.path.len(), 13);
        let central = Amalgam::new(&sl2z()).unwrap();
        let t = compute_m(&central, &[(0, 1), (1, 1)]).unwrap();
        assert_eq!((t.k, t.m_const), (1, 2));
        let (gog, cycle, refl) = s3_amalgam();
        let am = Amalgam::new(&gog).unwrap();
        let r = [(0, cycle), (1, refl)];
        let t = compute_m(&am, &r).unwrap();
        assert_eq!((t.k, t.m_const), (2, 4));
        // oracle: elements of the first edge stabilizer fixing every path vertex
        let first = edge_stabilizer(&gog, &t.path[1]);
        let fixing = first.iter().filter(|g| t.path.iter().all(|p| tree_vertex_key(&gog, &gog.mul(g, p)) == *p)).count();
        assert_eq!(fixing, t.path_stabilizer_order);
        assert_eq!(fixing, 1);
        // invariant under cyclic shifts
        for rot in am.rotations(&r) {
            assert_eq!(compute_m(&am, &rot).unwrap().m_const, 4);
        }
    }

    #[test]
    fn s3_conjugates_brute_force() {
        let (s3, perms) = crate::finite_groups::FiniteGroup::symmetric(3).unwrap();
        let tr = perms.iter().position(|p| p == &vec![1, 0, 2]).unwrap();
        let cy = perms.iter().position(|p| p == &vec![1, 2, 0]).unwrap();
        let c = s3.subgroup_generated(&[tr]).unwrap();
        let cc = c.conjugate(cy);
        assert_eq!(c.intersect(&cc).unwrap().order(), 1);
    }

    #[test]
    fn dehn_examples() {
        let am = Amalgam::new(&c4_free_c6()).unwrap();
        let r12 = am.pow(&r6(), 12);
        let dehn = Dehn::new(&am, symmetrize(&am, &r12).unwrap()).unwrap();
        let res = dehn.reduce(&r12);
        assert!(res.reduced.is_empty());
        assert!(res.area >= 1);
        assert_eq!(dehn.replay(&res), am.canonical(&r12));
        let a = vec![(0, 1)];
        assert_eq!(dehn.reduce(&a).reduced, a);
        let g = vec![(1, 2), (0, 3), (1, 5)];
        let w = am.concat(&am.concat(&am.concat(&g, &r12), &am.inverse(&g)), &am.inverse(&r12));
        let res = dehn.reduce(&w);
        assert!(res.reduced.is_empty());
        assert_eq!(dehn.replay(&res), am.canonical(&w));
        // C'(1/6) failure is refused
        let s = symmetrize(&am, &[(0, 1), (1, 1), (0, 1), (1, 2)]).unwrap();
        assert!(matches!(Dehn::new(&am, s), Err(ScError::Unsupported(_))));
    }

    #[test]
    fn dehn_random_kernel_words() {
        let am = Amalgam::new(&c4_free_c6()).unwrap();
        let r12 = am.pow(&r6(), 12);
        let dehn = Dehn::new(&am, symmetrize(&am, &r12).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let mut w = Vec::new();
            for _ in 0..rng.gen_range(1..3) {
                let len = rng.gen_range(0..6);
                let g: Vec<Syllable> = (0..len).map(|i| if i % 2 == 0 { (0, rng.gen_range(1..4)) } else { (1, rng.gen_range(1..6)) }).collect();
                let rel = if rng.gen_bool(0.5) { r12.clone() } else { am.inverse(&r12) };
                w = am.concat(&w, &am.concat(&am.concat(&g, &rel), &am.inverse(&g)));
            }
            let res = dehn.reduce(&w);
            assert!(res.reduced.is_empty(), "{w:?}");
            assert_eq!(dehn.replay(&res), am.canonical(&w));
        }
    }

    #[test]
    fn dihedral_complex() {
        let gog = infinite_dihedral();
        let am = Amalgam::new(&gog).unwrap();
        let x = presentation_complex_ball(&am, &[(0, 1), (1, 1)], 3, 2, &TrivialKernel(&gog)).unwrap();
        assert!(x.cells.iter().all(|c| c.len() == 1));
        let t = compute_m(&am, &[(0, 1), (1, 1)]).unwrap();
        assert!(check_m_thin(&x, t.m_const).holds);
    }

    #[test]
    fn free_product_complex_is_m_thin() {
        let gog = c4_free_c6();
        let am = Amalgam::new(&gog).unwrap();
        let x = presentation_complex_ball(&am, &r6(), 12, 1, &TrivialKernel(&gog)).unwrap();
        let report = check_m_thin(&x, 6);
        assert!(report.holds, "{:?}", report.counts);
        assert_eq!(report.max_count, 6);
        let audit = claim_audit(&x, 0, 1);
        assert!(audit.shift_verified);
        assert_eq!(audit.boundary_orbits, 6);
        assert!(audit.injective && audit.index_bound_holds);
        let mut dup = x.clone();
        let extra = dup.cells[0][0].clone();
        dup.cells[0].push(extra);
        assert!(!check_m_thin(&dup, 6).holds);
    }
}
