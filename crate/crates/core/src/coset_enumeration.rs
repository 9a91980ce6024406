//! Todd–Coxeter coset enumeration (HLT strategy with coincidence processing).
//!
//! Used as an independent word-problem oracle for finite quotients: the
//! enumeration of cosets of a subgroup gives a permutation action, and for the
//! trivial subgroup that action is the regular representation.

use std::collections::VecDeque;

use thiserror::Error;

use crate::finite_groups::{FiniteGroup, GroupError};

/// A letter is `+(g+1)` for generator `g` and `-(g+1)` for its inverse.
pub type Letter = i32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EnumerationError {
    #[error("coset table exceeded {0} cosets")]
    CapExceeded(usize),
    #[error("letter {0} out of range")]
    BadLetter(Letter),
    #[error(transparent)]
    Group(#[from] GroupError),
}

#[derive(Clone, Debug)]
pub struct Presentation {
    pub generators: usize,
    pub relators: Vec<Vec<Letter>>,
}

/// Completed coset table: `action[g][c]` is the coset `c·g`.
#[derive(Clone, Debug)]
pub struct CosetTable {
    pub cosets: usize,
    pub action: Vec<Vec<usize>>,
}

impl CosetTable {
    /// Coset reached from the subgroup coset by reading `word`.
    pub fn trace(&self, word: &[Letter]) -> usize {
        let mut c = 0;
        for &l in word {
            c = self.step(c, l);
        }
        c
    }

    fn step(&self, c: usize, l: Letter) -> usize {
        let g = (l.unsigned_abs() - 1) as usize;
        if l > 0 {
            self.action[g][c]
        } else {
            self.action[g].iter().position(|&x| x == c).expect("permutation")
        }
    }
}

struct Table {
    cols: usize,
    rows: Vec<Vec<Option<usize>>>,
    parent: Vec<usize>,
    live: Vec<bool>,
}

impl Table {
    fn col(&self, l: Letter) -> usize {
        let g = (l.unsigned_abs() - 1) as usize;
        2 * g + usize::from(l < 0)
    }

    fn inv_col(c: usize) -> usize {
        c ^ 1
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn new_coset(&mut self) -> usize {
        self.rows.push(vec![None; self.cols]);
        self.parent.push(self.rows.len() - 1);
        self.live.push(true);
        self.rows.len() - 1
    }

    fn define(&mut self, c: usize, col: usize, d: usize) {
        self.rows[c][col] = Some(d);
        self.rows[d][Self::inv_col(col)] = Some(c);
    }

    fn coincidence(&mut self, a: usize, b: usize) {
        let mut queue = VecDeque::from([(a, b)]);
        while let Some((a, b)) = queue.pop_front() {
            let (a, b) = (self.find(a), self.find(b));
            if a == b {
                continue;
            }
            let (keep, drop) = if a < b { (a, b) } else { (b, a) };
            self.parent[drop] = keep;
            self.live[drop] = false;
            for col in 0..self.cols {
                if let Some(d) = self.rows[drop][col] {
                    self.rows[drop][col] = None;
                    let inv = Self::inv_col(col);
                    if self.rows[d][inv] == Some(drop) {
                        self.rows[d][inv] = None;
                    }
                    let d = self.find(d);
                    let k = self.find(keep);
                    match self.rows[k][col] {
                        Some(e) => queue.push_back((e, d)),
                        None => {
                            if let Some(e) = self.rows[d][inv] {
                                queue.push_back((e, k));
                            } else {
                                self.rows[k][col] = Some(d);
                                self.rows[d][inv] = Some(k);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Scans relator `rel` from coset `c`, filling a single gap by deduction
    /// and recording coincidences. Defines new cosets when `fill` is set.
    fn scan(&mut self, c: usize, rel: &[Letter], fill: bool, cap: usize) -> Result<(), EnumerationError> {
        loop {
            let c = self.find(c);
            if !self.live[c] {
                return Ok(());
            }
            let n = rel.len();
            let mut f = c;
            let mut i = 0;
            while i < n {
                match self.rows[f][self.col(rel[i])] {
                    Some(x) => {
                        f = self.find(x);
                        i += 1;
                    }
                    None => break,
                }
            }
            if i == n {
                if f != c {
                    self.coincidence(f, c);
                }
                return Ok(());
            }
            let mut b = c;
            let mut j = n;
            while j > i {
                match self.rows[b][Table::inv_col(self.col(rel[j - 1]))] {
                    Some(x) => {
                        b = self.find(x);
                        j -= 1;
                    }
                    None => break,
                }
            }
            if j < i {
                self.coincidence(f, b);
                return Ok(());
            }
            if j == i {
                if f != b {
                    self.coincidence(f, b);
                }
                return Ok(());
            }
            if j == i + 1 {
                let col = self.col(rel[i]);
                self.define(f, col, b);
                return Ok(());
            }
            if !fill {
                return Ok(());
            }
            if self.rows.len() >= cap {
                return Err(EnumerationError::CapExceeded(cap));
            }
            let d = self.new_coset();
            let col = self.col(rel[i]);
            self.define(f, col, d);
        }
    }
}

/// Enumerates the cosets of the subgroup generated by `subgroup` words.
pub fn enumerate(pres: &Presentation, subgroup: &[Vec<Letter>], cap: usize) -> Result<CosetTable, EnumerationError> {
    for rel in pres.relators.iter().chain(subgroup) {
        for &l in rel {
            if l == 0 || l.unsigned_abs() as usize > pres.generators {
                return Err(EnumerationError::BadLetter(l));
            }
        }
    }
    let mut t = Table { cols: 2 * pres.generators, rows: Vec::new(), parent: Vec::new(), live: Vec::new() };
    t.new_coset();
    for w in subgroup {
        t.scan(0, w, true, cap)?;
    }
    let mut c = 0;
    while c < t.rows.len() {
        if t.live[c] {
            for rel in &pres.relators {
                t.scan(c, rel, true, cap)?;
                if !t.live[c] {
                    break;
                }
            }
            if t.live[c] {
                for col in 0..t.cols {
                    if t.rows[c][col].is_none() {
                        if t.rows.len() >= cap {
                            return Err(EnumerationError::CapExceeded(cap));
                        }
                        let d = t.new_coset();
                        t.define(c, col, d);
                    }
                }
            }
        }
        c += 1;
    }
    // compact
    let live: Vec<usize> = (0..t.rows.len()).filter(|&i| t.live[i]).collect();
    let mut renum = vec![usize::MAX; t.rows.len()];
    for (k, &i) in live.iter().enumerate() {
        renum[i] = k;
    }
    let mut action = vec![vec![0; live.len()]; pres.generators];
    for (k, &i) in live.iter().enumerate() {
        for (g, row) in action.iter_mut().enumerate() {
            let target = t.rows[i][2 * g].expect("complete table");
            let target = t.find(target);
            row[k] = renum[target];
        }
    }
    Ok(CosetTable { cosets: live.len(), action })
}

/// A finite group presented by generators and relators, together with the
/// images of the generators; evaluates words exactly.
#[derive(Clone, Debug)]
pub struct FiniteQuotient {
    pub group: FiniteGroup,
    pub generator_images: Vec<usize>,
}

impl FiniteQuotient {
    pub fn from_presentation(pres: &Presentation, cap: usize) -> Result<Self, EnumerationError> {
        let table = enumerate(pres, &[], cap)?;
        let gens: Vec<Vec<usize>> = table.action.clone();
        if table.cosets == 1 || gens.is_empty() {
            let group = FiniteGroup::trivial();
            return Ok(FiniteQuotient { group, generator_images: vec![0; pres.generators] });
        }
        let (group, perms) = FiniteGroup::from_permutations(&gens)?;
        let generator_images = gens.iter().map(|p| perms.iter().position(|q| q == p).expect("generator in its own closure")).collect();
        Ok(FiniteQuotient { group, generator_images })
    }

    pub fn evaluate(&self, word: &[Letter]) -> usize {
        word.iter().fold(self.group.identity(), |acc, &l| {
            let g = self.generator_images[(l.unsigned_abs() - 1) as usize];
            let g = if l > 0 { g } else { self.group.inv(g) };
            self.group.mul(acc, g)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dihedral_of_order_six() {
        // <s, t | s^2, t^2, (st)^3>
        let pres = Presentation { generators: 2, relators: vec![vec![1, 1], vec![2, 2], vec![1, 2, 1, 2, 1, 2]] };
        let q = FiniteQuotient::from_presentation(&pres, 1000).unwrap();
        assert_eq!(q.group.order(), 6);
        assert_eq!(q.evaluate(&[1, 2, 1, 2, 1, 2]), q.group.identity());
        assert_ne!(q.evaluate(&[1, 2]), q.group.identity());
    }

    #[test]
    fn cyclic_and_subgroup_index() {
        let pres = Presentation { generators: 1, relators: vec![vec![1; 7]] };
        assert_eq!(enumerate(&pres, &[], 100).unwrap().cosets, 7);
        // amalgam C4 *_{C2} C6 with (ab)^3 added
        let pres = Presentation { generators: 2, relators: vec![vec![1; 4], vec![2; 6], vec![1, 1, -2, -2, -2], vec![1, 2, 1, 2, 1, 2]] };
        let q = FiniteQuotient::from_presentation(&pres, 10_000).unwrap();
        assert!(q.group.order() > 1);
        assert_eq!(q.evaluate(&[1, 1, 2, 2, 2]), q.group.pow(q.generator_images[0], 4));
    }

    #[test]
    fn index_of_subgroup() {
        // S3 = <s,t | s^2, t^2, (st)^3>, subgroup <s> has index 3
        let pres = Presentation { generators: 2, relators: vec![vec![1, 1], vec![2, 2], vec![1, 2, 1, 2, 1, 2]] };
        assert_eq!(enumerate(&pres, &[vec![1]], 100).unwrap().cosets, 3);
    }

    #[test]
    fn cap_is_enforced() {
        let free = Presentation { generators: 2, relators: vec![] };
        assert_eq!(enumerate(&free, &[], 50).unwrap_err(), EnumerationError::CapExceeded(50));
    }
}
