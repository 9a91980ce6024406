//! Finite groups given by multiplication tables, their subgroups, cosets and
//! homomorphisms.
//!
//! Elements are dense indices `0..order`. Every group is immutable once built
//! and cheap to clone (the table lives behind an `Arc`).

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tables up to this order get an exhaustive associativity check.
pub const FULL_ASSOCIATIVITY_LIMIT: usize = 256;
const SAMPLED_TRIPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroupError {
    #[error("invalid order {0}")]
    InvalidOrder(usize),
    #[error("element index {index} out of range for group of order {order}")]
    InvalidElement { index: usize, order: usize },
    #[error("table is not a Latin square at row/column {0}")]
    NotLatin(usize),
    #[error("no two-sided identity in table")]
    NoIdentity,
    #[error("table is not associative: ({0}*{1})*{2} != {0}*({1}*{2})")]
    NotAssociative(usize, usize, usize),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("subgroups have different parent groups")]
    ParentMismatch,
    #[error("element set is not a subgroup: {0}")]
    NotSubgroup(String),
}

struct Inner {
    order: usize,
    table: Vec<usize>,
    inverses: Vec<usize>,
    identity: usize,
    names: Option<Vec<String>>,
}

/// A finite group stored as a full multiplication table.
#[derive(Clone)]
pub struct FiniteGroup {
    inner: Arc<Inner>,
}

impl fmt::Debug for FiniteGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteGroup").field("order", &self.order()).field("identity", &self.identity()).finish()
    }
}

impl PartialEq for FiniteGroup {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.order == other.inner.order && self.inner.identity == other.inner.identity && self.inner.table == other.inner.table)
    }
}
impl Eq for FiniteGroup {}

impl FiniteGroup {
    /// Builds a group from a row-major table where `table[g][h] = g*h`.
    pub fn from_table(table: Vec<Vec<usize>>, names: Option<Vec<String>>) -> Result<Self, GroupError> {
        let order = table.len();
        if order == 0 {
            return Err(GroupError::InvalidOrder(0));
        }
        let mut flat = Vec::with_capacity(order * order);
        for (i, row) in table.iter().enumerate() {
            if row.len() != order {
                return Err(GroupError::Shape(format!("row {i} has length {} (expected {order})", row.len())));
            }
            for &x in row {
                if x >= order {
                    return Err(GroupError::InvalidElement { index: x, order });
                }
                flat.push(x);
            }
        }
        if let Some(n) = &names {
            if n.len() != order {
                return Err(GroupError::Shape(format!("{} names for {order} elements", n.len())));
            }
        }
        Self::from_flat(order, flat, names)
    }

    fn from_flat(order: usize, table: Vec<usize>, names: Option<Vec<String>>) -> Result<Self, GroupError> {
        let at = |g: usize, h: usize| table[g * order + h];
        // Latin square
        let mut seen = vec![usize::MAX; order];
        for g in 0..order {
            for h in 0..order {
                let x = at(g, h);
                if seen[x] == g {
                    return Err(GroupError::NotLatin(g));
                }
                seen[x] = g;
            }
        }
        let mut seen = vec![usize::MAX; order];
        for h in 0..order {
            for g in 0..order {
                let x = at(g, h);
                if seen[x] == h {
                    return Err(GroupError::NotLatin(h));
                }
                seen[x] = h;
            }
        }
        let identity = (0..order).find(|&e| (0..order).all(|g| at(e, g) == g && at(g, e) == g)).ok_or(GroupError::NoIdentity)?;
        if order <= FULL_ASSOCIATIVITY_LIMIT {
            for a in 0..order {
                for b in 0..order {
                    let ab = at(a, b);
                    for c in 0..order {
                        if at(ab, c) != at(a, at(b, c)) {
                            return Err(GroupError::NotAssociative(a, b, c));
                        }
                    }
                }
            }
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(order as u64);
            for _ in 0..SAMPLED_TRIPLES {
                let (a, b, c) = (rng.gen_range(0..order), rng.gen_range(0..order), rng.gen_range(0..order));
                if at(at(a, b), c) != at(a, at(b, c)) {
                    return Err(GroupError::NotAssociative(a, b, c));
                }
            }
        }
        let inverses = (0..order).map(|g| (0..order).find(|&h| at(g, h) == identity).expect("latin square has inverses")).collect();
        Ok(FiniteGroup { inner: Arc::new(Inner { order, table, inverses, identity, names }) })
    }

    /// Cyclic group of order `n`; element `i` is the `i`-th power of the generator `1`.
    pub fn cyclic(n: usize) -> Result<Self, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidOrder(0));
        }
        let table = (0..n).flat_map(|g| (0..n).map(move |h| (g + h) % n)).collect();
        Self::from_flat(n, table, None)
    }

    pub fn trivial() -> Self {
        Self::cyclic(1).expect("order 1 is valid")
    }

    /// The group generated by the given permutations of `0..degree`, with the
    /// identity at index 0 and elements in breadth-first order over the generators.
    pub fn from_permutations(generators: &[Vec<usize>]) -> Result<(Self, Vec<Vec<usize>>), GroupError> {
        let degree = generators.first().map_or(0, Vec::len);
        for p in generators {
            if p.len() != degree {
                return Err(GroupError::Shape("permutations of different degree".into()));
            }
            let set: BTreeSet<_> = p.iter().copied().collect();
            if set.len() != degree || p.iter().any(|&x| x >= degree) {
                return Err(GroupError::Shape("not a permutation".into()));
            }
        }
        let id: Vec<usize> = (0..degree).collect();
        let mut elems = vec![id.clone()];
        let mut index = std::collections::HashMap::new();
        index.insert(id, 0usize);
        let mut i = 0;
        while i < elems.len() {
            for g in generators {
                let p = compose(&elems[i], g);
                if !index.contains_key(&p) {
                    index.insert(p.clone(), elems.len());
                    elems.push(p);
                }
            }
            i += 1;
        }
        let n = elems.len();
        let mut table = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                table[a * n + b] = index[&compose(&elems[a], &elems[b])];
            }
        }
        Ok((Self::from_flat(n, table, None)?, elems))
    }

    /// Symmetric group on `n` points, generated by a transposition and an `n`-cycle.
    pub fn symmetric(n: usize) -> Result<(Self, Vec<Vec<usize>>), GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidOrder(0));
        }
        if n == 1 {
            return Self::from_permutations(&[vec![0]]);
        }
        let mut swap: Vec<usize> = (0..n).collect();
        swap.swap(0, 1);
        let cycle: Vec<usize> = (0..n).map(|i| (i + 1) % n).collect();
        Self::from_permutations(&[swap, cycle])
    }

    /// Dihedral group of order `2n`: index `i < n` is the rotation `r^i`,
    /// index `n + i` is the reflection `s r^i`.
    pub fn dihedral(n: usize) -> Result<Self, GroupError> {
        if n == 0 {
            return Err(GroupError::InvalidOrder(0));
        }
        let order = 2 * n;
        let decode = |g: usize| (g / n, g % n); // (reflection bit, rotation)
        let mut table = vec![0; order * order];
        for a in 0..order {
            for b in 0..order {
                let (sa, ra) = decode(a);
                let (sb, rb) = decode(b);
                // s^sa r^ra s^sb r^rb = s^(sa+sb) r^(±ra + rb)
                let r = if sb == 1 { (n - ra % n + rb) % n } else { (ra + rb) % n };
                table[a * order + b] = ((sa + sb) % 2) * n + r;
            }
        }
        Self::from_flat(order, table, None)
    }

    pub fn order(&self) -> usize {
        self.inner.order
    }

    pub fn identity(&self) -> usize {
        self.inner.identity
    }

    #[inline]
    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.inner.table[g * self.inner.order + h]
    }

    #[inline]
    pub fn inv(&self, g: usize) -> usize {
        self.inner.inverses[g]
    }

    pub fn pow(&self, g: usize, e: i64) -> usize {
        let base = if e < 0 { self.inv(g) } else { g };
        let mut acc = self.identity();
        for _ in 0..e.unsigned_abs() {
            acc = self.mul(acc, base);
        }
        acc
    }

    pub fn conj(&self, g: usize, x: usize) -> usize {
        self.mul(self.mul(g, x), self.inv(g))
    }

    pub fn element_order(&self, g: usize) -> usize {
        let mut x = g;
        let mut k = 1;
        while x != self.identity() {
            x = self.mul(x, g);
            k += 1;
        }
        k
    }

    pub fn contains(&self, g: usize) -> bool {
        g < self.order()
    }

    pub fn check_element(&self, g: usize) -> Result<(), GroupError> {
        if self.contains(g) {
            Ok(())
        } else {
            Err(GroupError::InvalidElement { index: g, order: self.order() })
        }
    }

    pub fn name(&self, g: usize) -> String {
        match &self.inner.names {
            Some(n) => n[g].clone(),
            None => g.to_string(),
        }
    }

    pub fn names(&self) -> Option<&[String]> {
        self.inner.names.as_deref()
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        let n = self.order();
        (0..n).map(|g| (0..n).map(|h| self.mul(g, h)).collect()).collect()
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order()
    }

    pub fn is_abelian(&self) -> bool {
        self.elements().all(|a| self.elements().all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    pub fn whole(&self) -> Subgroup {
        Subgroup { parent: self.clone(), elements: self.elements().collect() }
    }

    pub fn trivial_subgroup(&self) -> Subgroup {
        Subgroup { parent: self.clone(), elements: vec![self.identity()] }
    }

    /// Smallest subgroup containing `gens`.
    pub fn subgroup_generated(&self, gens: &[usize]) -> Result<Subgroup, GroupError> {
        for &g in gens {
            self.check_element(g)?;
        }
        let mut members = vec![false; self.order()];
        members[self.identity()] = true;
        let mut frontier = vec![self.identity()];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul(x, g);
                if !members[y] {
                    members[y] = true;
                    frontier.push(y);
                }
            }
        }
        let elements = members.iter().enumerate().filter(|(_, &m)| m).map(|(i, _)| i).collect();
        Ok(Subgroup { parent: self.clone(), elements })
    }

    /// Validates an explicit element set as a subgroup.
    pub fn subgroup_from_elements(&self, elements: &[usize]) -> Result<Subgroup, GroupError> {
        for &g in elements {
            self.check_element(g)?;
        }
        let set: BTreeSet<usize> = elements.iter().copied().collect();
        if !set.contains(&self.identity()) {
            return Err(GroupError::NotSubgroup("missing identity".into()));
        }
        for &a in &set {
            if !set.contains(&self.inv(a)) {
                return Err(GroupError::NotSubgroup(format!("not closed under inverse at {a}")));
            }
            for &b in &set {
                if !set.contains(&self.mul(a, b)) {
                    return Err(GroupError::NotSubgroup(format!("{a}*{b} not in set")));
                }
            }
        }
        Ok(Subgroup { parent: self.clone(), elements: set.into_iter().collect() })
    }

    /// Left cosets `gH`, the first one being `H` itself, the rest ordered by least element.
    pub fn left_cosets(&self, h: &Subgroup) -> Vec<Vec<usize>> {
        self.cosets(h, |g, x| self.mul(g, x))
    }

    /// Right cosets `Hg`, the first one being `H` itself, the rest ordered by least element.
    pub fn right_cosets(&self, h: &Subgroup) -> Vec<Vec<usize>> {
        self.cosets(h, |g, x| self.mul(x, g))
    }

    fn cosets(&self, h: &Subgroup, act: impl Fn(usize, usize) -> usize) -> Vec<Vec<usize>> {
        let mut assigned = vec![false; self.order()];
        let mut out = Vec::new();
        let mut starts = vec![self.identity()];
        starts.extend(self.elements());
        for g in starts {
            if assigned[g] {
                continue;
            }
            let mut coset: Vec<usize> = h.elements.iter().map(|&x| act(g, x)).collect();
            coset.sort_unstable();
            for &x in &coset {
                assigned[x] = true;
            }
            out.push(coset);
        }
        out
    }
}

fn compose(p: &[usize], q: &[usize]) -> Vec<usize> {
    // apply p first, then q
    p.iter().map(|&i| q[i]).collect()
}

/// A subgroup as a sorted element set of its parent.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subgroup {
    parent: FiniteGroup,
    elements: Vec<usize>,
}

impl Subgroup {
    pub fn parent(&self) -> &FiniteGroup {
        &self.parent
    }

    pub fn elements(&self) -> &[usize] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn index(&self) -> usize {
        self.parent.order() / self.order()
    }

    pub fn contains(&self, g: usize) -> bool {
        self.elements.binary_search(&g).is_ok()
    }

    pub fn intersect(&self, other: &Subgroup) -> Result<Subgroup, GroupError> {
        if self.parent != other.parent {
            return Err(GroupError::ParentMismatch);
        }
        let elements: Vec<usize> = self.elements.iter().copied().filter(|&g| other.contains(g)).collect();
        self.parent.subgroup_from_elements(&elements)
    }

    /// `g H g^-1`
    pub fn conjugate(&self, g: usize) -> Subgroup {
        let mut elements: Vec<usize> = self.elements.iter().map(|&x| self.parent.conj(g, x)).collect();
        elements.sort_unstable();
        Subgroup { parent: self.parent.clone(), elements }
    }

    pub fn is_normal(&self) -> bool {
        self.parent.elements().all(|g| self.conjugate(g) == *self)
    }
}

/// Outcome of [`GroupHom::check`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct HomCheck {
    pub is_hom: bool,
    /// First pair `(g, h)` in row-major order with `f(gh) != f(g) f(h)`.
    pub violation: Option<(usize, usize)>,
}

/// A map between finite groups given on elements; [`GroupHom::check`] decides
/// whether it is a homomorphism.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroupHom {
    pub source: FiniteGroup,
    pub target: FiniteGroup,
    pub map: Vec<usize>,
}

impl GroupHom {
    pub fn new(source: FiniteGroup, target: FiniteGroup, map: Vec<usize>) -> Self {
        GroupHom { source, target, map }
    }

    /// The homomorphism determined by sending generator `1` of a cyclic source to `image`.
    pub fn from_cyclic(source: FiniteGroup, target: FiniteGroup, image: usize) -> Self {
        let map = (0..source.order()).map(|i| target.pow(image, i as i64)).collect();
        GroupHom { source, target, map }
    }

    pub fn apply(&self, g: usize) -> usize {
        self.map[g]
    }

    pub fn check(&self) -> Result<HomCheck, GroupError> {
        if self.map.len() != self.source.order() {
            return Err(GroupError::Shape(format!("map has {} entries, source has order {}", self.map.len(), self.source.order())));
        }
        for &x in &self.map {
            self.target.check_element(x)?;
        }
        for g in self.source.elements() {
            for h in self.source.elements() {
                let lhs = self.map[self.source.mul(g, h)];
                let rhs = self.target.mul(self.map[g], self.map[h]);
                if lhs != rhs {
                    return Ok(HomCheck { is_hom: false, violation: Some((g, h)) });
                }
            }
        }
        Ok(HomCheck { is_hom: true, violation: None })
    }

    pub fn is_injective(&self) -> bool {
        let set: BTreeSet<_> = self.map.iter().collect();
        set.len() == self.map.len()
    }

    pub fn image(&self) -> Subgroup {
        let mut elements: Vec<usize> = self.map.clone();
        elements.sort_unstable();
        elements.dedup();
        Subgroup { parent: self.target.clone(), elements }
    }

    /// Preimage of `y` under an injective map.
    pub fn preimage(&self, y: usize) -> Option<usize> {
        self.map.iter().position(|&x| x == y)
    }
}

/// JSON group descriptor: a full table, or one of the shorthands.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum GroupDescriptor {
    Cyclic {
        cyclic: usize,
    },
    Symmetric {
        symmetric: usize,
    },
    Dihedral {
        dihedral: usize,
    },
    Table {
        order: usize,
        table: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        names: Option<Vec<String>>,
    },
}

impl GroupDescriptor {
    pub fn build(&self) -> Result<FiniteGroup, GroupError> {
        match self {
            GroupDescriptor::Cyclic { cyclic } => FiniteGroup::cyclic(*cyclic),
            GroupDescriptor::Symmetric { symmetric } => FiniteGroup::symmetric(*symmetric).map(|(g, _)| g),
            GroupDescriptor::Dihedral { dihedral } => FiniteGroup::dihedral(*dihedral),
            GroupDescriptor::Table { order, table, names } => {
                if *order != table.len() {
                    return Err(GroupError::Shape(format!("order {order} but table has {} rows", table.len())));
                }
                FiniteGroup::from_table(table.clone(), names.clone())
            }
        }
    }

    pub fn from_group(g: &FiniteGroup) -> Self {
        GroupDescriptor::Table { order: g.order(), table: g.table(), names: g.names().map(<[String]>::to_vec) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closure_oracle(g: &FiniteGroup, gens: &[usize]) -> BTreeSet<usize> {
        // naive: all products of generator words of length <= order
        let mut set: BTreeSet<usize> = [g.identity()].into();
        for _ in 0..g.order() {
            let snapshot: Vec<_> = set.iter().copied().collect();
            for x in snapshot {
                for &s in gens {
                    set.insert(g.mul(x, s));
                }
            }
        }
        set
    }

    #[test]
    fn cyclic_examples() {
        let c1 = FiniteGroup::cyclic(1).unwrap();
        assert_eq!(c1.table(), vec![vec![0]]);
        let c4 = FiniteGroup::cyclic(4).unwrap();
        assert_eq!(c4.mul(1, 1), 2);
        assert_eq!(c4.mul(2, 2), 0);
        let c6 = FiniteGroup::cyclic(6).unwrap();
        assert_eq!(c6.element_order(3), 2);
        assert_eq!(FiniteGroup::cyclic(0).unwrap_err(), GroupError::InvalidOrder(0));
    }

    #[test]
    fn generated_subgroups() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        assert_eq!(c4.subgroup_generated(&[2]).unwrap().elements(), &[0, 2]);
        let c6 = FiniteGroup::cyclic(6).unwrap();
        assert_eq!(c6.subgroup_generated(&[3]).unwrap().elements(), &[0, 3]);
        let (s3, perms) = FiniteGroup::symmetric(3).unwrap();
        let three_cycle = perms.iter().position(|p| p == &vec![1, 2, 0]).unwrap();
        let transposition = perms.iter().position(|p| p == &vec![1, 0, 2]).unwrap();
        let h = s3.subgroup_generated(&[three_cycle, transposition]).unwrap();
        let oracle = closure_oracle(&s3, &[three_cycle, transposition]);
        assert_eq!(h.elements(), oracle.into_iter().collect::<Vec<_>>().as_slice());
        assert_eq!(h.order(), 6);
        assert!(matches!(c4.subgroup_generated(&[7]), Err(GroupError::InvalidElement { .. })));
    }

    #[test]
    fn cosets() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let h = c4.subgroup_generated(&[2]).unwrap();
        assert_eq!(c4.left_cosets(&h), vec![vec![0, 2], vec![1, 3]]);
        let c6 = FiniteGroup::cyclic(6).unwrap();
        assert_eq!(c6.left_cosets(&c6.subgroup_generated(&[3]).unwrap()).len(), 3);
        assert_eq!(c6.left_cosets(&c6.whole()).len(), 1);
    }

    #[test]
    fn hom_checks() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let c2 = FiniteGroup::cyclic(2).unwrap();
        let id = GroupHom::new(c4.clone(), c4.clone(), vec![0, 1, 2, 3]);
        assert!(id.check().unwrap().is_hom);
        let emb = GroupHom::new(c2.clone(), c4.clone(), vec![0, 2]);
        assert!(emb.check().unwrap().is_hom);
        let bad = GroupHom::new(c2.clone(), c4.clone(), vec![0, 1]);
        // 1 + 1 = 0 in C2 maps to 0, but 1 + 1 = 2 in C4
        assert_eq!(bad.check().unwrap(), HomCheck { is_hom: false, violation: Some((1, 1)) });
        let short = GroupHom::new(c2, c4, vec![0]);
        assert!(matches!(short.check(), Err(GroupError::Shape(_))));
    }

    #[test]
    fn intersections() {
        let c4 = FiniteGroup::cyclic(4).unwrap();
        let h = c4.subgroup_generated(&[2]).unwrap();
        assert_eq!(h.intersect(&h).unwrap(), h);
        assert_eq!(c4.whole().intersect(&c4.trivial_subgroup()).unwrap(), c4.trivial_subgroup());
        // Klein four group as C2 x C2: index = 2*a + b
        let klein = FiniteGroup::from_table((0..4).map(|g: usize| (0..4).map(|h: usize| g ^ h).collect()).collect(), None).unwrap();
        let a = klein.subgroup_generated(&[1]).unwrap();
        let b = klein.subgroup_generated(&[2]).unwrap();
        assert_eq!(a.intersect(&b).unwrap().elements(), &[0]);
        let other = FiniteGroup::cyclic(4).unwrap();
        assert_eq!(a.intersect(&other.whole()), Err(GroupError::ParentMismatch));
    }

    #[test]
    fn rejects_non_groups() {
        let not_latin = vec![vec![0, 1], vec![1, 1]];
        assert!(matches!(FiniteGroup::from_table(not_latin, None), Err(GroupError::NotLatin(_))));
        // a Latin square without associativity (order 3 quasigroup with identity... use 5-loop)
        let loop5 = vec![vec![0, 1, 2, 3, 4], vec![1, 0, 3, 4, 2], vec![2, 4, 0, 1, 3], vec![3, 2, 4, 0, 1], vec![4, 3, 1, 2, 0]];
        assert!(matches!(FiniteGroup::from_table(loop5, None), Err(GroupError::NotAssociative(..))));
    }

    #[test]
    fn dihedral_and_symmetric_are_groups() {
        let d4 = FiniteGroup::dihedral(4).unwrap();
        assert_eq!(d4.order(), 8);
        assert!(!d4.is_abelian());
        assert_eq!(d4.element_order(4), 2);
        let (s3, _) = FiniteGroup::symmetric(3).unwrap();
        assert_eq!(s3.order(), 6);
    }

    #[test]
    fn descriptor_round_trip() {
        let d: GroupDescriptor = serde_json::from_str(r#"{"cyclic": 6}"#).unwrap();
        assert_eq!(d.build().unwrap().order(), 6);
        let t: GroupDescriptor = serde_json::from_str(r#"{"order": 2, "table": [[0,1],[1,0]]}"#).unwrap();
        assert_eq!(t.build().unwrap().order(), 2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn groups() -> Vec<FiniteGroup> {
            vec![FiniteGroup::cyclic(12).unwrap(), FiniteGroup::dihedral(5).unwrap(), FiniteGroup::symmetric(4).unwrap().0]
        }

        proptest! {
            #[test]
            fn lagrange_and_idempotence(which in 0usize..3, gens in proptest::collection::vec(0usize..10, 0..3)) {
                let all = groups();
                let g = &all[which];
                let gens: Vec<usize> = gens.into_iter().map(|x| x % g.order()).collect();
                let h = g.subgroup_generated(&gens).unwrap();
                prop_assert_eq!(h.order() * g.left_cosets(&h).len(), g.order());
                prop_assert_eq!(g.subgroup_generated(h.elements()).unwrap(), h.clone());
                prop_assert!(g.subgroup_from_elements(h.elements()).is_ok());
            }

            #[test]
            fn intersection_matches_set_oracle(which in 0usize..3, a in 0usize..24, b in 0usize..24) {
                let all = groups();
                let g = &all[which];
                let ha = g.subgroup_generated(&[a % g.order()]).unwrap();
                let hb = g.subgroup_generated(&[b % g.order()]).unwrap();
                let sa: BTreeSet<_> = ha.elements().iter().copied().collect();
                let sb: BTreeSet<_> = hb.elements().iter().copied().collect();
                let oracle: Vec<_> = sa.intersection(&sb).copied().collect();
                let meet = ha.intersect(&hb).unwrap();
                prop_assert_eq!(meet.elements(), oracle.as_slice());
            }
        }
    }
}
