//! Cayley–Abels graph balls, built either from cosets `G/U ∪ G/H` or as
//! quotients of Bass–Serre tree balls by the normal closure of relators.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Debug};
use std::hash::Hash;
use std::sync::Arc;

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::bass_serre::{build_tree_ball, BallError};
use crate::coset_enumeration::{EnumerationError, FiniteQuotient};
use crate::finite_groups::FiniteGroup;
use crate::graph::{Graph, UnionFind};
use crate::graph_of_groups::{GraphOfGroups, GroupWord, LetterMap};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CaError {
    #[error("ball exceeded the cap of {0} cells")]
    CapExceeded(usize),
    #[error("membership predicate failed: {0}")]
    Predicate(String),
    #[error("word problem undecided: {0}")]
    WordProblem(String),
    #[error(transparent)]
    Ball(#[from] BallError),
}

/// A group given by concrete elements. `Elem` equality must be group equality.
pub trait ConcreteGroup {
    type Elem: Clone + Eq + Hash + Ord + Debug;
    fn identity(&self) -> Self::Elem;
    fn multiply(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inverse(&self, a: &Self::Elem) -> Self::Elem;
    fn label(&self, a: &Self::Elem) -> String {
        format!("{a:?}")
    }
}

/// A subgroup given by a membership predicate, optionally finite.
pub trait SubgroupHandle<G: ConcreteGroup> {
    fn name(&self) -> String;
    fn contains(&self, group: &G, g: &G::Elem) -> Result<bool, CaError>;
    /// All elements, when the subgroup is finite.
    fn elements(&self, group: &G) -> Option<Vec<G::Elem>>;
    /// Canonical representative of `g·H`, when one is computable.
    fn coset_key(&self, group: &G, g: &G::Elem) -> Option<G::Elem> {
        self.elements(group).map(|hs| hs.iter().map(|h| group.multiply(g, h)).min().expect("subgroups are nonempty"))
    }
}

/// A finite subgroup listed element by element.
#[derive(Clone, Debug)]
pub struct FiniteHandle<E> {
    pub name: String,
    pub elements: Vec<E>,
}

impl<G: ConcreteGroup> SubgroupHandle<G> for FiniteHandle<G::Elem> {
    fn name(&self) -> String {
        self.name.clone()
    }
    fn contains(&self, _: &G, g: &G::Elem) -> Result<bool, CaError> {
        Ok(self.elements.contains(g))
    }
    fn elements(&self, _: &G) -> Option<Vec<G::Elem>> {
        Some(self.elements.clone())
    }
}

impl<E: Clone> FiniteHandle<E> {
    pub fn new(name: &str, elements: Vec<E>) -> Self {
        FiniteHandle { name: name.to_string(), elements }
    }
}

/// Closure of `gens` under multiplication; intended for finite subgroups.
pub fn generate<G: ConcreteGroup>(group: &G, gens: &[G::Elem], cap: usize) -> Result<Vec<G::Elem>, CaError> {
    let mut elems = vec![group.identity()];
    let mut i = 0;
    while i < elems.len() {
        for s in gens {
            let x = group.multiply(&elems[i], s);
            if !elems.contains(&x) {
                if elems.len() >= cap {
                    return Err(CaError::CapExceeded(cap));
                }
                elems.push(x);
            }
        }
        i += 1;
    }
    elems.sort();
    Ok(elems)
}

// ---- concrete groups -------------------------------------------------------

/// The integers under addition.
#[derive(Clone, Copy, Debug, Default)]
pub struct Integers;

impl ConcreteGroup for Integers {
    type Elem = i64;
    fn identity(&self) -> i64 {
        0
    }
    fn multiply(&self, a: &i64, b: &i64) -> i64 {
        a + b
    }
    fn inverse(&self, a: &i64) -> i64 {
        -a
    }
    fn label(&self, a: &i64) -> String {
        a.to_string()
    }
}

/// `nℤ ≤ ℤ` (infinite unless `n = 0`).
#[derive(Clone, Copy, Debug)]
pub struct MultiplesOf(pub i64);

impl SubgroupHandle<Integers> for MultiplesOf {
    fn name(&self) -> String {
        format!("{}Z", self.0)
    }
    fn contains(&self, _: &Integers, g: &i64) -> Result<bool, CaError> {
        Ok(if self.0 == 0 { *g == 0 } else { g.rem_euclid(self.0) == 0 })
    }
    fn elements(&self, _: &Integers) -> Option<Vec<i64>> {
        (self.0 == 0).then(|| vec![0])
    }
    fn coset_key(&self, _: &Integers, g: &i64) -> Option<i64> {
        Some(if self.0 == 0 { *g } else { g.rem_euclid(self.0.abs()) })
    }
}

/// `ℤ²` under addition.
#[derive(Clone, Copy, Debug, Default)]
pub struct Lattice2;

impl ConcreteGroup for Lattice2 {
    type Elem = (i64, i64);
    fn identity(&self) -> (i64, i64) {
        (0, 0)
    }
    fn multiply(&self, a: &(i64, i64), b: &(i64, i64)) -> (i64, i64) {
        (a.0 + b.0, a.1 + b.1)
    }
    fn inverse(&self, a: &(i64, i64)) -> (i64, i64) {
        (-a.0, -a.1)
    }
    fn label(&self, a: &(i64, i64)) -> String {
        format!("({},{})", a.0, a.1)
    }
}

fn ext_gcd(a: i64, b: i64) -> (i64, i64, i64) {
    if b == 0 {
        (a, 1, 0)
    } else {
        let (g, x, y) = ext_gcd(b, a.rem_euclid(b));
        (g, y, x - a.div_euclid(b) * y)
    }
}

/// The cyclic subgroup of `ℤ²` generated by a primitive vector.
#[derive(Clone, Copy, Debug)]
pub struct LatticeLine {
    pub gen: (i64, i64),
    coeff: (i64, i64),
}

impl LatticeLine {
    /// `None` unless `gen` is primitive.
    pub fn new(gen: (i64, i64)) -> Option<Self> {
        let (g, x, y) = ext_gcd(gen.0, gen.1);
        let (x, y) = if g < 0 { (-x, -y) } else { (x, y) };
        (g.abs() == 1).then_some(LatticeLine { gen, coeff: (x, y) })
    }
}

impl SubgroupHandle<Lattice2> for LatticeLine {
    fn name(&self) -> String {
        format!("<({},{})>", self.gen.0, self.gen.1)
    }
    fn contains(&self, _: &Lattice2, g: &(i64, i64)) -> Result<bool, CaError> {
        Ok(g.0 * self.gen.1 - g.1 * self.gen.0 == 0)
    }
    fn elements(&self, _: &Lattice2) -> Option<Vec<(i64, i64)>> {
        None
    }
    fn coset_key(&self, _: &Lattice2, g: &(i64, i64)) -> Option<(i64, i64)> {
        let t = self.coeff.0 * g.0 + self.coeff.1 * g.1;
        Some((g.0 - t * self.gen.0, g.1 - t * self.gen.1))
    }
}

/// `SL₂(ℤ)` with exact 128-bit entries.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sl2z;

pub type Mat2 = [[i128; 2]; 2];

impl ConcreteGroup for Sl2z {
    type Elem = Mat2;
    fn identity(&self) -> Mat2 {
        [[1, 0], [0, 1]]
    }
    fn multiply(&self, x: &Mat2, y: &Mat2) -> Mat2 {
        [
            [x[0][0] * y[0][0] + x[0][1] * y[1][0], x[0][0] * y[0][1] + x[0][1] * y[1][1]],
            [x[1][0] * y[0][0] + x[1][1] * y[1][0], x[1][0] * y[0][1] + x[1][1] * y[1][1]],
        ]
    }
    fn inverse(&self, x: &Mat2) -> Mat2 {
        [[x[1][1], -x[0][1]], [-x[1][0], x[0][0]]]
    }
    fn label(&self, x: &Mat2) -> String {
        format!("[[{},{}],[{},{}]]", x[0][0], x[0][1], x[1][0], x[1][1])
    }
}

/// `a = [[0,-1],[1,0]]` of order 4 and `b = [[0,-1],[1,1]]` of order 6.
pub const SL2_A: Mat2 = [[0, -1], [1, 0]];
pub const SL2_B: Mat2 = [[0, -1], [1, 1]];

impl ConcreteGroup for FiniteGroup {
    type Elem = usize;
    fn identity(&self) -> usize {
        FiniteGroup::identity(self)
    }
    fn multiply(&self, a: &usize, b: &usize) -> usize {
        self.mul(*a, *b)
    }
    fn inverse(&self, a: &usize) -> usize {
        self.inv(*a)
    }
    fn label(&self, a: &usize) -> String {
        self.name(*a)
    }
}

/// Loops at `basepoint` in the fundamental group of a graph of groups,
/// stored as normal forms.
#[derive(Clone, Debug)]
pub struct GogGroup {
    pub gog: GraphOfGroups,
    pub basepoint: usize,
}

impl ConcreteGroup for GogGroup {
    type Elem = GroupWord;
    fn identity(&self) -> GroupWord {
        self.gog.identity_word(self.basepoint)
    }
    fn multiply(&self, a: &GroupWord, b: &GroupWord) -> GroupWord {
        self.gog.reduce(&self.gog.mul(a, b)).word
    }
    fn inverse(&self, a: &GroupWord) -> GroupWord {
        self.gog.reduce(&self.gog.inverse(a)).word
    }
    fn label(&self, a: &GroupWord) -> String {
        self.gog.format_word(a)
    }
}

impl GogGroup {
    pub fn new(gog: &GraphOfGroups, basepoint: usize) -> Self {
        GogGroup { gog: gog.clone(), basepoint }
    }

    /// Element `g` of the vertex group at the basepoint.
    pub fn elem(&self, g: usize) -> GroupWord {
        self.gog.vertex_element(self.basepoint, g)
    }

    /// The vertex group at `v` conjugated into the basepoint along `path`.
    pub fn conjugate_vertex_group(&self, path: &GroupWord, v: usize) -> Vec<GroupWord> {
        let inv = self.gog.inverse(path);
        let mut out: Vec<GroupWord> = self
            .gog
            .vertex_group(v)
            .elements()
            .map(|g| self.gog.reduce(&self.gog.mul(&self.gog.mul(path, &self.gog.vertex_element(v, g)), &inv)).word)
            .collect();
        out.sort();
        out
    }
}

// ---- balls -----------------------------------------------------------------

/// Which vertex orbit a ball vertex belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum OrbitTag {
    /// `G/U`
    Base,
    /// `G/H_i`
    Peripheral(usize),
    /// Lift of a vertex of the underlying graph of a graph of groups.
    Tree(usize),
}

impl fmt::Display for OrbitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrbitTag::Base => write!(f, "U"),
            OrbitTag::Peripheral(i) => write!(f, "H{i}"),
            OrbitTag::Tree(v) => write!(f, "T{v}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StabilizerKind {
    Finite(usize),
    Infinite,
}

#[derive(Clone, Debug, Serialize)]
pub struct BallVertex {
    pub tag: OrbitTag,
    pub label: String,
    pub depth: usize,
    /// False when the vertex has neighbours outside the ball.
    pub complete: bool,
    pub stabilizer: StabilizerKind,
}

/// A finite ball of a G-graph with orbit and stabilizer annotations.
#[derive(Clone, Debug, Serialize)]
pub struct GGraphBall {
    pub radius: usize,
    pub vertices: Vec<BallVertex>,
    pub graph: Graph,
    /// Orbit tag of each edge (unordered pair of endpoint tags).
    pub edge_tags: Vec<(OrbitTag, OrbitTag)>,
    /// Upper bound on each edge stabilizer order, if finite.
    pub edge_stabilizers: Vec<Option<usize>>,
}

impl GGraphBall {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    /// Interior vertices: strictly inside the radius.
    pub fn interior(&self) -> Vec<usize> {
        (0..self.vertices.len()).filter(|&v| self.vertices[v].depth < self.radius).collect()
    }

    pub fn first_with_tag(&self, tag: OrbitTag) -> Option<usize> {
        self.vertices.iter().position(|v| v.tag == tag)
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("graph ball {\n");
        for (i, v) in self.vertices.iter().enumerate() {
            let stab = match v.stabilizer {
                StabilizerKind::Finite(n) => format!("|stab|={n}"),
                StabilizerKind::Infinite => "stab infinite".to_string(),
            };
            s.push_str(&format!("  v{i} [label=\"{} {}\\n{}\"];\n", v.tag, v.label, stab));
        }
        for &(a, b) in self.graph.edges() {
            s.push_str(&format!("  v{a} -- v{b};\n"));
        }
        s.push_str("}\n");
        s
    }

    pub fn to_json(&self) -> Value {
        json!({
            "radius": self.radius,
            "vertices": self.vertices.iter().map(|v| json!({
                "tag": v.tag.to_string(), "label": v.label, "depth": v.depth,
                "complete": v.complete,
                "stabilizer": match v.stabilizer { StabilizerKind::Finite(n) => json!(n), StabilizerKind::Infinite => json!("infinite") },
            })).collect::<Vec<_>>(),
            "edges": self.graph.edges(),
        })
    }
}

/// A coset-graph ball together with the data needed to act on it.
pub struct CosetBall<G: ConcreteGroup> {
    pub group: G,
    pub u: Vec<G::Elem>,
    pub s: Vec<G::Elem>,
    pub peripherals: Vec<Arc<dyn SubgroupHandle<G>>>,
    /// Coset representative of each vertex.
    pub reps: Vec<G::Elem>,
    pub ball: GGraphBall,
    index: HashMap<(OrbitTag, G::Elem), usize>,
}

impl<G: ConcreteGroup> CosetBall<G> {
    /// Canonical key of `g·U`.
    pub fn base_key(&self, g: &G::Elem) -> G::Elem {
        base_key(&self.group, &self.u, g)
    }

    /// Ball vertex of the coset `g·X` where `X` is named by `tag`.
    pub fn locate(&self, tag: OrbitTag, g: &G::Elem) -> Result<Option<usize>, CaError> {
        match tag {
            OrbitTag::Base => Ok(self.index.get(&(tag, self.base_key(g))).copied()),
            OrbitTag::Peripheral(i) => {
                let h = &self.peripherals[i];
                if let Some(k) = h.coset_key(&self.group, g) {
                    return Ok(self.index.get(&(tag, k)).copied());
                }
                let gi = self.group.inverse(g);
                for (v, rep) in self.reps.iter().enumerate() {
                    if self.ball.vertices[v].tag == tag && h.contains(&self.group, &self.group.multiply(&gi, rep))? {
                        return Ok(Some(v));
                    }
                }
                Ok(None)
            }
            OrbitTag::Tree(_) => Ok(None),
        }
    }

    /// Image of vertex `v` under left multiplication by `g`.
    pub fn act_vertex(&self, g: &G::Elem, v: usize) -> Result<Option<usize>, CaError> {
        self.locate(self.ball.vertices[v].tag, &self.group.multiply(g, &self.reps[v]))
    }
}

fn base_key<G: ConcreteGroup>(group: &G, u: &[G::Elem], g: &G::Elem) -> G::Elem {
    u.iter().map(|x| group.multiply(g, x)).min().expect("U contains the identity")
}

/// Breadth-first ball around `U` in the graph on `G/U ∪ G/H_1 ∪ ...` with
/// edges `{gU, gsU}` and `{gU, gH_i}`. Cone vertices of infinite `H_i` are
/// not expanded; their edges come only from `U`-vertices in the ball.
pub fn coset_graph_ball<G: ConcreteGroup>(
    group: G,
    u: Vec<G::Elem>,
    s: Vec<G::Elem>,
    peripherals: Vec<Arc<dyn SubgroupHandle<G>>>,
    radius: usize,
    cap: usize,
) -> Result<CosetBall<G>, CaError> {
    let id = group.identity();
    let mut moves = Vec::new();
    for x in &s {
        moves.push(x.clone());
        moves.push(group.inverse(x));
    }
    let finite_h: Vec<Option<Vec<G::Elem>>> = peripherals.iter().map(|h| h.elements(&group)).collect();
    let mut out = CosetBall {
        reps: vec![id.clone()],
        ball: GGraphBall {
            radius,
            vertices: vec![BallVertex { tag: OrbitTag::Base, label: group.label(&id), depth: 0, complete: true, stabilizer: StabilizerKind::Finite(u.len()) }],
            graph: Graph::new(1),
            edge_tags: Vec::new(),
            edge_stabilizers: Vec::new(),
        },
        index: HashMap::from([((OrbitTag::Base, base_key(&group, &u, &id)), 0)]),
        group,
        u,
        s,
        peripherals,
    };
    let mut edge_set: HashMap<(usize, usize), ()> = HashMap::new();
    let mut i = 0;
    while i < out.reps.len() {
        let depth = out.ball.vertices[i].depth;
        let grow = depth < radius;
        let tag = out.ball.vertices[i].tag;
        let g = out.reps[i].clone();
        let mut nbrs: Vec<(OrbitTag, G::Elem)> = Vec::new();
        match tag {
            OrbitTag::Base => {
                for x in &out.u {
                    let gx = out.group.multiply(&g, x);
                    for m in &moves {
                        nbrs.push((OrbitTag::Base, out.group.multiply(&gx, m)));
                    }
                    for k in 0..out.peripherals.len() {
                        nbrs.push((OrbitTag::Peripheral(k), gx.clone()));
                    }
                }
            }
            OrbitTag::Peripheral(k) => match &finite_h[k] {
                Some(hs) => {
                    for h in hs {
                        nbrs.push((OrbitTag::Base, out.group.multiply(&g, h)));
                    }
                }
                None => out.ball.vertices[i].complete = false,
            },
            OrbitTag::Tree(_) => {}
        }
        for (ntag, rep) in nbrs {
            let found = out.locate(ntag, &rep)?;
            let j = match found {
                Some(j) => j,
                None if grow => {
                    if out.reps.len() + edge_set.len() >= cap {
                        return Err(CaError::CapExceeded(cap));
                    }
                    let j = out.reps.len();
                    let key_rep = match ntag {
                        OrbitTag::Base => out.base_key(&rep),
                        OrbitTag::Peripheral(k) => out.peripherals[k].coset_key(&out.group, &rep).unwrap_or(rep.clone()),
                        OrbitTag::Tree(_) => rep.clone(),
                    };
                    let stabilizer = match ntag {
                        OrbitTag::Base => StabilizerKind::Finite(out.u.len()),
                        OrbitTag::Peripheral(k) => finite_h[k].as_ref().map_or(StabilizerKind::Infinite, |hs| StabilizerKind::Finite(hs.len())),
                        OrbitTag::Tree(_) => StabilizerKind::Infinite,
                    };
                    out.ball.vertices.push(BallVertex { tag: ntag, label: out.group.label(&key_rep), depth: depth + 1, complete: true, stabilizer });
                    out.ball.graph.add_vertex();
                    out.index.insert((ntag, key_rep.clone()), j);
                    out.reps.push(key_rep);
                    j
                }
                None => {
                    out.ball.vertices[i].complete = false;
                    continue;
                }
            };
            let key = (i.min(j), i.max(j));
            if edge_set.insert(key, ()).is_none() {
                out.ball.graph.add_edge(key.0, key.1);
                out.ball.edge_tags.push((out.ball.vertices[key.0].tag, out.ball.vertices[key.1].tag));
                out.ball.edge_stabilizers.push(Some(out.u.len()));
            }
        }
        i += 1;
    }
    Ok(out)
}

// ---- quotients of tree balls ----------------------------------------------

/// Decides membership of loops at a fixed basepoint in a normal subgroup.
pub trait WordProblem {
    fn in_kernel(&self, w: &GroupWord) -> Result<bool, CaError>;
}

/// The trivial normal subgroup.
pub struct TrivialKernel<'a>(pub &'a GraphOfGroups);

impl WordProblem for TrivialKernel<'_> {
    fn in_kernel(&self, w: &GroupWord) -> Result<bool, CaError> {
        Ok(self.0.is_identity(w))
    }
}

/// Normal closure of relators with finite quotient, decided by coset enumeration.
pub struct FiniteQuotientKernel {
    gog: GraphOfGroups,
    quotient: FiniteQuotient,
    map: LetterMap,
}

impl FiniteQuotientKernel {
    pub fn new(gog: &GraphOfGroups, relators: &[GroupWord], cap: usize) -> Result<Self, EnumerationError> {
        let (pres, map) = gog.presentation(relators);
        let quotient = FiniteQuotient::from_presentation(&pres, cap)?;
        Ok(FiniteQuotientKernel { gog: gog.clone(), quotient, map })
    }

    pub fn quotient_order(&self) -> usize {
        self.quotient.group.order()
    }
}

impl WordProblem for FiniteQuotientKernel {
    fn in_kernel(&self, w: &GroupWord) -> Result<bool, CaError> {
        let letters = self.map.letters(&self.gog, w);
        Ok(self.quotient.evaluate(&letters) == self.quotient.group.identity())
    }
}

/// Ball of `T/N` where `N` is decided by `wp`: tree-ball vertices `p, q` of
/// the same type are identified when `p·h·q^-1 ∈ N` for some `h ∈ G_v`.
pub fn quotient_tree_ball(gog: &GraphOfGroups, basepoint: usize, radius: usize, wp: &dyn WordProblem, cap: usize) -> Result<GGraphBall, CaError> {
    let tree = build_tree_ball(gog, basepoint, radius, cap)?;
    let n = tree.vertex_count();
    let mut uf = UnionFind::new(n);
    let mut by_type: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, v) in tree.vertices.iter().enumerate() {
        by_type.entry(v.vtype).or_default().push(i);
    }
    let related = |p: &GroupWord, q: &GroupWord, elems: &[usize], at: usize| -> Result<bool, CaError> {
        let qi = gog.inverse(q);
        for &h in elems {
            let w = gog.mul(&gog.mul(p, &gog.vertex_element(at, h)), &qi);
            if wp.in_kernel(&w)? {
                return Ok(true);
            }
        }
        Ok(false)
    };
    for (&vt, members) in &by_type {
        let elems: Vec<usize> = gog.vertex_group(vt).elements().collect();
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[..a] {
                if uf.find(i) != uf.find(j) && related(&tree.vertices[i].word, &tree.vertices[j].word, &elems, vt)? {
                    uf.union(i, j);
                }
            }
        }
    }
    // edges up to N: children words ending in e, compared modulo the edge image
    let m = tree.edges.len();
    let mut euf = UnionFind::new(m);
    for a in 0..m {
        for b in 0..a {
            let (ea, eb) = (&tree.edges[a], &tree.edges[b]);
            if ea.edge != eb.edge || euf.find(a) == euf.find(b) {
                continue;
            }
            if uf.find(ea.child) != uf.find(eb.child) || uf.find(ea.parent) != uf.find(eb.parent) {
                continue;
            }
            let at = gog.graph().t(ea.edge);
            let elems = gog.edge_image(ea.edge).elements().to_vec();
            if related(&tree.vertices[ea.child].word, &tree.vertices[eb.child].word, &elems, at)? {
                euf.union(a, b);
            }
        }
        // an edge may also be identified with the reverse of another
        for b in 0..m {
            let (ea, eb) = (&tree.edges[a], &tree.edges[b]);
            if eb.edge != gog.graph().bar(ea.edge) || euf.find(a) == euf.find(b) {
                continue;
            }
            if uf.find(ea.child) != uf.find(eb.parent) || uf.find(ea.parent) != uf.find(eb.child) {
                continue;
            }
            // eb read backwards: the path to its child, then back along ea.edge
            let flip = gog.mul(
                &tree.vertices[eb.child].word,
                &GroupWord {
                    start: gog.graph().t(eb.edge),
                    head: gog.vertex_group(gog.graph().t(eb.edge)).identity(),
                    steps: vec![(ea.edge, gog.vertex_group(gog.graph().t(ea.edge)).identity())],
                },
            );
            let at = gog.graph().t(ea.edge);
            let elems = gog.edge_image(ea.edge).elements().to_vec();
            if related(&tree.vertices[ea.child].word, &flip, &elems, at)? {
                euf.union(a, b);
            }
        }
    }
    let mut class_of = vec![usize::MAX; n];
    let mut vertices = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        if class_of[r] == usize::MAX {
            class_of[r] = vertices.len();
            let tv = &tree.vertices[i];
            vertices.push(BallVertex {
                tag: OrbitTag::Tree(tv.vtype),
                label: gog.format_word(&tv.word),
                depth: tv.depth,
                complete: true,
                stabilizer: StabilizerKind::Finite(gog.vertex_group(tv.vtype).order()),
            });
        }
        class_of[i] = class_of[r];
    }
    let mut graph = Graph::new(vertices.len());
    let mut edge_tags = Vec::new();
    let mut edge_stabilizers = Vec::new();
    let mut seen_edge_class = vec![false; m];
    for k in 0..m {
        let root = euf.find(k);
        if seen_edge_class[root] {
            continue;
        }
        seen_edge_class[root] = true;
        let e = &tree.edges[k];
        let (a, b) = (class_of[e.parent], class_of[e.child]);
        graph.add_edge(a, b);
        edge_tags.push((vertices[a].tag, vertices[b].tag));
        edge_stabilizers.push(Some(gog.edge_group(e.edge).order()));
    }
    // vertex depth in the quotient is the least depth among its lifts
    let dist = graph.distances(class_of[0]);
    for (v, d) in vertices.iter_mut().zip(dist) {
        v.depth = d.unwrap_or(usize::MAX);
        v.complete = v.depth < radius;
    }
    Ok(GGraphBall { radius, vertices, graph, edge_tags, edge_stabilizers })
}

// ---- conditions -------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct CaReport {
    pub simplicial: bool,
    pub connected: bool,
    pub orbit_tags: Vec<String>,
    pub finitely_many_orbits: bool,
    pub edge_stabilizers_finite: bool,
    /// Vertices per stabilizer class: (finite, infinite).
    pub stabilizer_classes: (usize, usize),
    /// At most one peripheral orbit per stabilizer; certified only within the ball.
    pub condition4_ball_certified: bool,
    /// Per tag: whether the degree grew across the supplied radii, and whether
    /// the tag has infinite stabilizers. The dichotomy holds when these agree.
    pub degree_dichotomy: Vec<(String, bool, bool)>,
    pub ok: bool,
}

/// Checks the Cayley–Abels conditions on one ball; pass further balls of the
/// same graph at increasing radii (at least three) to test the degree
/// dichotomy, which is a growth heuristic.
pub fn check_ca_conditions(ball: &GGraphBall, by_radius: &[&GGraphBall]) -> CaReport {
    let simplicial = ball.graph.simplicial_violation().is_none();
    let connected = ball.graph.is_connected();
    let mut tags: Vec<OrbitTag> = ball.vertices.iter().map(|v| v.tag).collect();
    tags.sort();
    tags.dedup();
    let edge_stabilizers_finite = ball.edge_stabilizers.iter().all(Option::is_some);
    let infinite = ball.vertices.iter().filter(|v| v.stabilizer == StabilizerKind::Infinite).count();
    let infinite_tags = tags.iter().filter(|t| ball.vertices.iter().any(|v| v.tag == **t && v.stabilizer == StabilizerKind::Infinite)).count();
    let mut degree_dichotomy = Vec::new();
    if by_radius.len() >= 3 {
        for &tag in &tags {
            let degrees: Vec<usize> = by_radius.iter().filter_map(|b| b.first_with_tag(tag).map(|v| b.graph.degree(v))).collect();
            let grew = degrees.len() >= 3 && degrees.windows(2).all(|w| w[1] > w[0]);
            let inf = ball.vertices.iter().any(|v| v.tag == tag && v.stabilizer == StabilizerKind::Infinite);
            degree_dichotomy.push((tag.to_string(), grew, inf));
        }
    }
    let dichotomy_ok = degree_dichotomy.iter().all(|(_, g, i)| g == i);
    let condition4_ball_certified = infinite_tags <= 1;
    let ok = simplicial && connected && edge_stabilizers_finite && dichotomy_ok;
    CaReport {
        simplicial,
        connected,
        orbit_tags: tags.iter().map(ToString::to_string).collect(),
        finitely_many_orbits: true,
        edge_stabilizers_finite,
        stabilizer_classes: (ball.vertex_count() - infinite, infinite),
        condition4_ball_certified,
        degree_dichotomy,
        ok,
    }
}

// ---- comparisons ------------------------------------------------------------

/// AHU canonical string of the tree rooted at `root`, with vertex tags.
fn ahu(graph: &Graph, tags: &[String], root: usize) -> String {
    fn go(graph: &Graph, tags: &[String], v: usize, parent: Option<usize>) -> String {
        let mut kids: Vec<String> = graph.neighbors(v).iter().filter(|&&w| Some(w) != parent).map(|&w| go(graph, tags, w, Some(v))).collect();
        kids.sort();
        format!("({}{})", tags[v], kids.concat())
    }
    go(graph, tags, root, None)
}

/// Isomorphism of two tree balls as rooted, tagged trees. Tags are compared
/// after applying `rename` to the first ball's tags.
pub fn rooted_trees_isomorphic(a: &GGraphBall, root_a: usize, b: &GGraphBall, root_b: usize, rename: &dyn Fn(OrbitTag) -> OrbitTag) -> bool {
    if a.vertex_count() != b.vertex_count() || !a.graph.is_tree() || !b.graph.is_tree() {
        return false;
    }
    let ta: Vec<String> = a.vertices.iter().map(|v| rename(v.tag).to_string()).collect();
    let tb: Vec<String> = b.vertices.iter().map(|v| v.tag.to_string()).collect();
    ahu(&a.graph, &ta, root_a) == ahu(&b.graph, &tb, root_b)
}

/// Largest ratio `max(d_a/d_b, d_b/d_a)` over pairs of base vertices present in
/// both balls at depth at most `inner`; identification by the `U`-coset key.
pub fn empirical_qi_constant<G: ConcreteGroup>(a: &CosetBall<G>, b: &CosetBall<G>, inner: usize) -> Option<(usize, usize)> {
    let pick = |x: &CosetBall<G>| -> BTreeMap<G::Elem, usize> {
        (0..x.reps.len()).filter(|&v| x.ball.vertices[v].tag == OrbitTag::Base && x.ball.vertices[v].depth <= inner).map(|v| (x.reps[v].clone(), v)).collect()
    };
    let (ma, mb) = (pick(a), pick(b));
    let common: Vec<(usize, usize)> = ma.iter().filter_map(|(k, &va)| mb.get(k).map(|&vb| (va, vb))).collect();
    let da = a.ball.graph.all_distances();
    let db = b.ball.graph.all_distances();
    let mut best: Option<(usize, usize)> = None;
    for (i, &(xa, xb)) in common.iter().enumerate() {
        for &(ya, yb) in &common[..i] {
            let (p, q) = (da[xa][ya]?, db[xb][yb]?);
            for (num, den) in [(p, q), (q, p)] {
                if den > 0 && best.is_none_or(|(bn, bd)| num * bd > bn * den) {
                    best = Some((num, den));
                }
            }
        }
    }
    best
}
