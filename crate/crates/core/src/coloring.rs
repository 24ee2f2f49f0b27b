//! Colorings, the balance predicate and quotient networks.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{networks_equal, Network};

/// Default bound on cell counts for exhaustive searches.
pub const DEFAULT_SIZE_BOUND: usize = 12;

/// A partition of the cells `0..len`, stored canonically: members sorted,
/// classes ordered by least member.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coloring {
    classes: Vec<Vec<usize>>,
    class_of: Vec<usize>,
}

impl Coloring {
    pub fn identity(len: usize) -> Self {
        Coloring {
            classes: (0..len).map(|c| vec![c]).collect(),
            class_of: (0..len).collect(),
        }
    }

    /// Canonicalize an arbitrary labelling (equal labels share a class).
    pub fn from_labels<T: Eq + std::hash::Hash + Clone>(labels: &[T]) -> Self {
        let mut seen: std::collections::HashMap<T, usize> = std::collections::HashMap::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut class_of = Vec::with_capacity(labels.len());
        for (c, l) in labels.iter().enumerate() {
            let next = classes.len();
            let k = *seen.entry(l.clone()).or_insert(next);
            if k == next {
                classes.push(Vec::new());
            }
            classes[k].push(c);
            class_of.push(k);
        }
        Coloring { classes, class_of }
    }

    /// Build from a full list of classes; they must partition `0..len`.
    pub fn from_classes(len: usize, classes: &[Vec<usize>]) -> Result<Self> {
        let mut labels = vec![usize::MAX; len];
        for (k, class) in classes.iter().enumerate() {
            if class.is_empty() {
                return Err(Error::InvalidColoring("empty class".into()));
            }
            for &c in class {
                if c >= len {
                    return Err(Error::InvalidColoring(format!("cell index {c} out of range")));
                }
                if labels[c] != usize::MAX {
                    return Err(Error::InvalidColoring(format!("cell index {c} in two classes")));
                }
                labels[c] = k;
            }
        }
        if let Some(c) = labels.iter().position(|&l| l == usize::MAX) {
            return Err(Error::InvalidColoring(format!("cell index {c} is uncovered")));
        }
        Ok(Coloring::from_labels(&labels))
    }

    /// Build from the nontrivial classes only; every other cell is a singleton.
    pub fn with_classes(len: usize, nontrivial: &[Vec<usize>]) -> Result<Self> {
        let mut covered = vec![false; len];
        for &c in nontrivial.iter().flatten() {
            if c < len {
                covered[c] = true;
            }
        }
        let mut classes = nontrivial.to_vec();
        classes.extend((0..len).filter(|&c| !covered[c]).map(|c| vec![c]));
        Coloring::from_classes(len, &classes)
    }

    /// Like [`Coloring::with_classes`], naming cells by id.
    pub fn from_ids<S: AsRef<str>>(n: &Network, nontrivial: &[Vec<S>]) -> Result<Self> {
        let classes = nontrivial
            .iter()
            .map(|class| class.iter().map(|id| n.require(id.as_ref())).collect())
            .collect::<Result<Vec<Vec<usize>>>>()?;
        Coloring::with_classes(n.len(), &classes)
    }

    pub fn to_ids(&self, n: &Network) -> Vec<Vec<String>> {
        self.classes
            .iter()
            .map(|class| class.iter().map(|&c| n.id(c).to_string()).collect())
            .collect()
    }

    /// Number of cells partitioned.
    pub fn cell_count(&self) -> usize {
        self.class_of.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn classes(&self) -> &[Vec<usize>] {
        &self.classes
    }

    pub fn nontrivial_classes(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.classes.iter().filter(|c| c.len() > 1)
    }

    pub fn class_of(&self, c: usize) -> usize {
        self.class_of[c]
    }

    pub fn same(&self, c: usize, d: usize) -> bool {
        self.class_of[c] == self.class_of[d]
    }

    pub fn is_identity(&self) -> bool {
        self.classes.len() == self.class_of.len()
    }

    /// The coloring on the quotient by `coarse_projection` whose classes are
    /// the images of this coloring's classes.
    pub fn push_forward(&self, projection: &[usize], target_len: usize) -> Result<Self> {
        let mut labels = vec![usize::MAX; target_len];
        for (c, &q) in projection.iter().enumerate() {
            let k = self.class_of[c];
            if labels[q] != usize::MAX && labels[q] != k {
                return Err(Error::InvalidColoring(
                    "projection does not refine the coloring".into(),
                ));
            }
            labels[q] = k;
        }
        Ok(Coloring::from_labels(&labels))
    }

    /// The coloring `c ~ d` iff `projection[c]` and `projection[d]` share a
    /// class of `self`.
    pub fn pull_back(&self, projection: &[usize]) -> Self {
        let labels: Vec<usize> = projection.iter().map(|&q| self.class_of[q]).collect();
        Coloring::from_labels(&labels)
    }
}

/// Serialized as the canonical list of classes of cell indices.
impl Serialize for Coloring {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.classes.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Coloring {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let classes = Vec::<Vec<usize>>::deserialize(d)?;
        let len = classes.iter().map(Vec::len).sum();
        Coloring::from_classes(len, &classes).map_err(serde::de::Error::custom)
    }
}

fn check_len(n: &Network, col: &Coloring) -> Result<()> {
    if col.cell_count() != n.len() {
        return Err(Error::InvalidColoring(format!(
            "coloring covers {} cells, network has {}",
            col.cell_count(),
            n.len()
        )));
    }
    Ok(())
}

/// Outcome of the balance check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Balance {
    Balanced,
    /// `c` and `d` share a class, their type-`edge_type` inputs do not.
    Unbalanced { c: usize, d: usize, edge_type: usize },
}

impl Balance {
    pub fn is_balanced(&self) -> bool {
        matches!(self, Balance::Balanced)
    }
}

pub fn is_balanced(n: &Network, col: &Coloring) -> Result<Balance> {
    check_len(n, col)?;
    for class in col.classes() {
        let rep = class[0];
        for &c in &class[1..] {
            for i in 0..n.edge_type_count() {
                if !col.same(n.source(i, rep), n.source(i, c)) {
                    return Ok(Balance::Unbalanced {
                        c: rep,
                        d: c,
                        edge_type: i,
                    });
                }
            }
        }
    }
    Ok(Balance::Balanced)
}

/// Quotient network together with the cell projection onto it.
#[derive(Debug, Clone)]
pub struct Quotient {
    pub network: Network,
    pub projection: Vec<usize>,
}

/// The quotient by a balanced coloring. Singleton classes keep their cell
/// id; merged classes are named by their members joined with `+`.
pub fn quotient(n: &Network, col: &Coloring) -> Result<Quotient> {
    if let Balance::Unbalanced { c, d, edge_type } = is_balanced(n, col)? {
        return Err(Error::Unbalanced {
            c: n.id(c).to_string(),
            d: n.id(d).to_string(),
            edge_type,
        });
    }
    let names = col
        .classes()
        .iter()
        .map(|class| {
            class
                .iter()
                .map(|&c| n.id(c))
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let inputs = col
        .classes()
        .iter()
        .map(|class| {
            (0..n.edge_type_count())
                .map(|i| col.class_of(n.source(i, class[0])))
                .collect()
        })
        .collect();
    let projection = (0..n.len()).map(|c| col.class_of(c)).collect();
    Ok(Quotient {
        network: Network::new(names, inputs)?,
        projection,
    })
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn from_coloring(col: &Coloring) -> Self {
        UnionFind((0..col.cell_count()).map(|c| col.classes()[col.class_of(c)][0]).collect())
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = (ra.min(rb), ra.max(rb));
        self.0[hi] = lo;
        true
    }

    fn labels(&mut self) -> Vec<usize> {
        (0..self.0.len()).map(|c| self.find(c)).collect()
    }
}

/// Coarsest-necessary merge: the finest balanced coloring coarser than the
/// partition held in `uf`.
fn balanced_closure(n: &Network, uf: &mut UnionFind) {
    loop {
        let mut changed = false;
        for c in 0..n.len() {
            let r = uf.find(c);
            if r == c {
                continue;
            }
            for i in 0..n.edge_type_count() {
                changed |= uf.union(n.source(i, c), n.source(i, r));
            }
        }
        if !changed {
            return;
        }
    }
}

/// All balanced colorings, canonically sorted. Identity comes first.
///
/// Coarsens from the identity partition: merge two classes, close under the
/// balance condition, and keep unseen results. Every balanced coloring is
/// reached because merging two of its subclasses and closing never leaves it.
pub fn enumerate_balanced_colorings(n: &Network, bound: usize) -> Result<Vec<Coloring>> {
    if n.len() > bound {
        return Err(Error::SizeBound {
            size: n.len(),
            bound,
        });
    }
    let start = Coloring::identity(n.len());
    let mut seen: HashSet<Coloring> = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start]);
    while let Some(col) = queue.pop_front() {
        let reps: Vec<usize> = col.classes().iter().map(|c| c[0]).collect();
        for a in 0..reps.len() {
            for b in a + 1..reps.len() {
                let mut uf = UnionFind::from_coloring(&col);
                uf.union(reps[a], reps[b]);
                balanced_closure(n, &mut uf);
                let next = Coloring::from_labels(&uf.labels());
                if !seen.contains(&next) {
                    seen.insert(next.clone());
                    queue.push_back(next);
                }
            }
        }
    }
    let mut out: Vec<Coloring> = seen.into_iter().collect();
    out.sort();
    Ok(out)
}

/// Whether every class of `fine` lies inside a class of `coarse`.
pub fn refines(fine: &Coloring, coarse: &Coloring) -> Result<bool> {
    if fine.cell_count() != coarse.cell_count() {
        return Err(Error::InvalidColoring("colorings cover different cell sets".into()));
    }
    Ok(fine
        .classes()
        .iter()
        .all(|class| class.iter().all(|&c| coarse.same(c, class[0]))))
}

/// All balanced colorings of `l` whose quotient equals `n` up to relabelling.
pub fn find_colorings_with_quotient(l: &Network, n: &Network, bound: usize) -> Result<Vec<Coloring>> {
    if n.len() > bound {
        return Err(Error::SizeBound {
            size: n.len(),
            bound,
        });
    }
    let all = enumerate_balanced_colorings(l, bound)?;
    let mut out = Vec::new();
    for col in all {
        if col.class_count() != n.len() {
            continue;
        }
        let q = quotient(l, &col)?;
        if networks_equal(&q.network, n).is_some() {
            out.push(col);
        }
    }
    Ok(out)
}

/// Whether `x` lies in the synchrony subspace of `col` up to `tol`.
pub fn lies_in_synchrony(col: &Coloring, x: &[f64], tol: f64) -> bool {
    col.classes()
        .iter()
        .all(|class| class.iter().all(|&c| (x[c] - x[class[0]]).abs() <= tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> Network {
        Network::from_table(&[("a", &["a"]), ("b", &["a"]), ("c", &["a"])]).unwrap()
    }

    #[test]
    fn canonical_form_is_label_independent() {
        let a = Coloring::from_labels(&[7, 3, 7, 1]);
        let b = Coloring::from_classes(4, &[vec![3], vec![2, 0], vec![1]]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.classes(), &[vec![0, 2], vec![1], vec![3]]);
    }

    #[test]
    fn invalid_partitions_are_rejected() {
        assert!(Coloring::from_classes(3, &[vec![0, 1]]).is_err());
        assert!(Coloring::from_classes(2, &[vec![0, 1], vec![1]]).is_err());
        assert!(Coloring::from_classes(2, &[vec![0, 5]]).is_err());
    }

    #[test]
    fn sibling_cells_can_merge() {
        let n = chain();
        let all = enumerate_balanced_colorings(&n, DEFAULT_SIZE_BOUND).unwrap();
        assert_eq!(all.len(), 5);
        assert!(all[0].is_identity());
        let q = quotient(&n, &all[1]).unwrap();
        assert_eq!(q.network.cell_ids(), &["a".to_string(), "b+c".to_string()]);
    }

    #[test]
    fn size_bound_is_enforced() {
        assert!(matches!(
            enumerate_balanced_colorings(&chain(), 2),
            Err(Error::SizeBound { size: 3, bound: 2 })
        ));
    }

    #[test]
    fn synchrony_tolerance() {
        let col = Coloring::with_classes(2, &[vec![0, 1]]).unwrap();
        assert!(lies_in_synchrony(&col, &[0.0, 0.0], 0.0));
        assert!(!lies_in_synchrony(&col, &[1.0, 2.0], 0.0));
        assert!(lies_in_synchrony(&col, &[1.0, 1.0 + 1e-12], 1e-9));
    }

    #[test]
    fn push_and_pull() {
        let fine = Coloring::with_classes(4, &[vec![1, 2]]).unwrap();
        let coarse = Coloring::with_classes(4, &[vec![1, 2, 3]]).unwrap();
        let proj: Vec<usize> = (0..4).map(|c| fine.class_of(c)).collect();
        let induced = coarse.push_forward(&proj, fine.class_count()).unwrap();
        assert_eq!(induced.classes(), &[vec![0], vec![1, 2]]);
        assert_eq!(induced.pull_back(&proj), coarse);
        assert!(fine.push_forward(&(0..4).collect::<Vec<_>>(), 4).is_ok());
        assert!(coarse.push_forward(&proj, 3).is_ok());
        assert!(fine
            .push_forward(&[0, 1, 1, 1], 2)
            .is_err());
    }
}
