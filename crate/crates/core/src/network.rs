//! Coupled cell networks given by input maps, plus feed-forward structure.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use indexmap::IndexMap;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A network on cells `0..len()` with `k` edge types.
///
/// `source(i, c)` is the tail of the unique type-`i` edge into `c`. Cell
/// identifiers are opaque strings; dense indices follow file order.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "NetworkDoc", into = "NetworkDoc")]
pub struct Network {
    cells: Vec<String>,
    index: HashMap<String, usize>,
    inputs: Vec<Vec<usize>>,
    k: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetworkDoc {
    cells: Vec<String>,
    edge_types: usize,
    sigma: Vec<IndexMap<String, String>>,
}

impl TryFrom<NetworkDoc> for Network {
    type Error = Error;

    fn try_from(doc: NetworkDoc) -> Result<Self> {
        if doc.edge_types == 0 {
            return Err(Error::NoEdgeTypes);
        }
        if doc.sigma.len() != doc.edge_types {
            return Err(Error::SigmaCount {
                expected: doc.edge_types,
                found: doc.sigma.len(),
            });
        }
        let index = index_cells(&doc.cells)?;
        let mut inputs = vec![vec![0usize; doc.edge_types]; doc.cells.len()];
        for (i, map) in doc.sigma.iter().enumerate() {
            for (target, source) in map {
                let t = *index.get(target).ok_or_else(|| Error::UnknownCell {
                    edge_type: i,
                    cell: target.clone(),
                })?;
                let s = *index.get(source).ok_or_else(|| Error::UnknownCell {
                    edge_type: i,
                    cell: source.clone(),
                })?;
                inputs[t][i] = s;
            }
            if let Some(missing) = doc.cells.iter().find(|c| !map.contains_key(*c)) {
                return Err(Error::MissingSigma {
                    edge_type: i,
                    cell: missing.clone(),
                });
            }
        }
        Ok(Network {
            cells: doc.cells,
            index,
            inputs,
            k: doc.edge_types,
        })
    }
}

impl From<Network> for NetworkDoc {
    fn from(n: Network) -> Self {
        let sigma = (0..n.k)
            .map(|i| {
                (0..n.len())
                    .map(|c| (n.cells[c].clone(), n.cells[n.inputs[c][i]].clone()))
                    .collect()
            })
            .collect();
        NetworkDoc {
            cells: n.cells,
            edge_types: n.k,
            sigma,
        }
    }
}

fn index_cells(cells: &[String]) -> Result<HashMap<String, usize>> {
    if cells.is_empty() {
        return Err(Error::NoCells);
    }
    let mut index = HashMap::with_capacity(cells.len());
    for (i, c) in cells.iter().enumerate() {
        if index.insert(c.clone(), i).is_some() {
            return Err(Error::DuplicateCell(c.clone()));
        }
    }
    Ok(index)
}

/// Parse the JSON network format.
pub fn parse_network(text: &str) -> Result<Network> {
    serde_json::from_str::<NetworkDoc>(text)
        .map_err(|e| Error::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
        .and_then(Network::try_from)
}

impl Network {
    /// Build from per-cell input lists: `inputs[c][i]` is `sigma_i(c)`.
    pub fn new(cells: Vec<String>, inputs: Vec<Vec<usize>>) -> Result<Self> {
        let index = index_cells(&cells)?;
        if inputs.len() != cells.len() {
            return Err(Error::Precondition(format!(
                "{} input rows for {} cells",
                inputs.len(),
                cells.len()
            )));
        }
        let k = inputs[0].len();
        if k == 0 {
            return Err(Error::NoEdgeTypes);
        }
        for (c, row) in inputs.iter().enumerate() {
            if row.len() != k {
                return Err(Error::SigmaCount {
                    expected: k,
                    found: row.len(),
                });
            }
            if let Some(i) = row.iter().position(|&s| s >= cells.len()) {
                return Err(Error::UnknownCell {
                    edge_type: i,
                    cell: format!("#{} (input of `{}`)", row[i], cells[c]),
                });
            }
        }
        Ok(Network {
            cells,
            index,
            inputs,
            k,
        })
    }

    /// Build from `(cell, [source per edge type])` rows, in cell order.
    pub fn from_table(rows: &[(&str, &[&str])]) -> Result<Self> {
        let cells: Vec<String> = rows.iter().map(|(c, _)| c.to_string()).collect();
        let index = index_cells(&cells)?;
        let inputs = rows
            .iter()
            .map(|(_, srcs)| {
                srcs.iter()
                    .enumerate()
                    .map(|(i, s)| {
                        index.get(*s).copied().ok_or_else(|| Error::UnknownCell {
                            edge_type: i,
                            cell: s.to_string(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Network::new(cells, inputs)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization is infallible")
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn edge_type_count(&self) -> usize {
        self.k
    }

    pub fn cell_ids(&self) -> &[String] {
        &self.cells
    }

    pub fn id(&self, c: usize) -> &str {
        &self.cells[c]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Like [`Network::index_of`], failing with a precondition error.
    pub fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id)
            .ok_or_else(|| Error::Precondition(format!("unknown cell `{id}`")))
    }

    /// `sigma_i(c)`.
    pub fn source(&self, i: usize, c: usize) -> usize {
        self.inputs[c][i]
    }

    pub fn inputs(&self, c: usize) -> &[usize] {
        &self.inputs[c]
    }

    /// Cells `d` with an edge `c -> d`, as `(d, edge type)` pairs.
    pub fn outputs(&self, c: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for d in 0..self.len() {
            for i in 0..self.k {
                if self.inputs[d][i] == c {
                    out.push((d, i));
                }
            }
        }
        out
    }

    /// Cells fixed by every input map.
    pub fn is_fixed(&self, c: usize) -> bool {
        self.inputs[c].iter().all(|&s| s == c)
    }
}

impl fmt::Debug for Network {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for c in 0..self.len() {
            let srcs: Vec<&str> = self.inputs[c].iter().map(|&s| self.id(s)).collect();
            m.entry(&self.cells[c], &srcs);
        }
        m.finish()
    }
}

/// Layer decomposition `C_0, ..., C_m` of a feed-forward network.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedForwardStructure {
    layers: Vec<Vec<usize>>,
    layer_of: Vec<usize>,
}

impl FeedForwardStructure {
    /// Number of non-initial layers.
    pub fn m(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn layer(&self, j: usize) -> &[usize] {
        &self.layers[j]
    }

    pub fn layer_of(&self, c: usize) -> usize {
        self.layer_of[c]
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    /// Cells in layer order, file order within a layer.
    pub fn cells_in_order(&self) -> impl Iterator<Item = usize> + '_ {
        self.layers.iter().flatten().copied()
    }
}

/// Reason a network has no feed-forward layer structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotFeedForward {
    pub witness: usize,
    pub reason: String,
}

impl NotFeedForward {
    pub fn into_error(self, n: &Network) -> Error {
        Error::NotFeedForward {
            cell: n.id(self.witness).to_string(),
            reason: self.reason,
        }
    }
}

/// Find the layer partition, or a cell witnessing that none exists.
///
/// `C_0` is the set of cells fixed by every input map; every other cell sits
/// one layer above the highest of its inputs. The uniform-layer and coverage
/// conditions are then verified.
pub fn detect_layers(n: &Network) -> std::result::Result<FeedForwardStructure, NotFeedForward> {
    let len = n.len();
    if !(0..len).any(|c| n.is_fixed(c)) {
        return Err(NotFeedForward {
            witness: 0,
            reason: "no cell is fixed by every input map".into(),
        });
    }

    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state = vec![0u8; len];
    let mut layer_of = vec![0usize; len];
    for start in 0..len {
        if state[start] == 2 {
            continue;
        }
        let mut stack = vec![(start, false)];
        while let Some((c, expanded)) = stack.pop() {
            if expanded {
                layer_of[c] = if n.is_fixed(c) {
                    0
                } else {
                    1 + n.inputs(c).iter().map(|&s| layer_of[s]).max().unwrap_or(0)
                };
                state[c] = 2;
                continue;
            }
            if state[c] == 2 {
                continue;
            }
            state[c] = 1;
            stack.push((c, true));
            if n.is_fixed(c) {
                continue;
            }
            for &s in n.inputs(c) {
                if s == c || state[s] == 1 {
                    return Err(NotFeedForward {
                        witness: c,
                        reason: "cell lies on a directed cycle outside the first layer".into(),
                    });
                }
                if state[s] == 0 {
                    stack.push((s, false));
                }
            }
        }
    }

    let m = layer_of.iter().copied().max().unwrap_or(0);
    let mut layers = vec![Vec::new(); m + 1];
    for c in 0..len {
        layers[layer_of[c]].push(c);
    }
    for c in 0..len {
        let j = layer_of[c];
        if j > 0 {
            if let Some(&s) = n.inputs(c).iter().find(|&&s| layer_of[s] != j - 1) {
                return Err(NotFeedForward {
                    witness: c,
                    reason: format!(
                        "input `{}` is in layer {}, not layer {}",
                        n.id(s),
                        layer_of[s],
                        j - 1
                    ),
                });
            }
        }
    }
    let mut feeds_next = vec![false; len];
    for c in 0..len {
        if layer_of[c] > 0 {
            for &s in n.inputs(c) {
                feeds_next[s] = true;
            }
        }
    }
    if let Some(c) = (0..len).find(|&c| layer_of[c] < m && !feeds_next[c]) {
        return Err(NotFeedForward {
            witness: c,
            reason: format!(
                "cell in layer {} feeds no cell of layer {}",
                layer_of[c],
                layer_of[c] + 1
            ),
        });
    }
    Ok(FeedForwardStructure { layers, layer_of })
}

/// First cell (file order) reachable from every other cell, if any.
pub fn is_backward_connected(n: &Network) -> Option<usize> {
    (0..n.len()).find(|&c| {
        let mut seen = vec![false; n.len()];
        seen[c] = true;
        let mut queue = VecDeque::from([c]);
        let mut count = 1;
        while let Some(d) = queue.pop_front() {
            for &s in n.inputs(d) {
                if !seen[s] {
                    seen[s] = true;
                    count += 1;
                    queue.push_back(s);
                }
            }
        }
        count == n.len()
    })
}

/// Connectivity of the underlying undirected graph.
pub fn is_connected(n: &Network) -> bool {
    let mut adj = vec![Vec::new(); n.len()];
    for c in 0..n.len() {
        for &s in n.inputs(c) {
            adj[c].push(s);
            adj[s].push(c);
        }
    }
    let mut seen = vec![false; n.len()];
    seen[0] = true;
    let mut stack = vec![0];
    let mut count = 1;
    while let Some(c) = stack.pop() {
        for &d in &adj[c] {
            if !seen[d] {
                seen[d] = true;
                count += 1;
                stack.push(d);
            }
        }
    }
    count == n.len()
}

/// Per-type 0/1 matrices; row = target, column = source.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrices {
    pub matrices: Vec<DMatrix<u8>>,
}

impl AdjacencyMatrices {
    pub fn rows_sum_to_one(&self) -> bool {
        self.matrices.iter().all(|a| {
            a.row_iter()
                .all(|r| r.iter().map(|&x| x as u32).sum::<u32>() == 1)
        })
    }

    pub fn as_f64(&self) -> Vec<DMatrix<f64>> {
        self.matrices.iter().map(|a| a.map(f64::from)).collect()
    }
}

pub fn adjacency_matrices(n: &Network) -> AdjacencyMatrices {
    let matrices = (0..n.edge_type_count())
        .map(|i| DMatrix::from_fn(n.len(), n.len(), |c, d| u8::from(n.source(i, c) == d)))
        .collect();
    AdjacencyMatrices { matrices }
}

/// Stable colour refinement run jointly on several networks so that the
/// resulting colours are comparable between them.
fn refine_colors(nets: &[&Network]) -> Vec<Vec<usize>> {
    let mut colors: Vec<Vec<usize>> = nets
        .iter()
        .map(|n| {
            (0..n.len())
                .map(|c| {
                    n.inputs(c)
                        .iter()
                        .enumerate()
                        .fold(0usize, |acc, (i, &s)| acc | (usize::from(s == c) << i))
                })
                .collect()
        })
        .collect();
    let total: usize = nets.iter().map(|n| n.len()).sum();
    let mut classes = usize::MAX;
    for _ in 0..=total {
        let mut intern: HashMap<(usize, Vec<usize>, Vec<(usize, usize)>), usize> = HashMap::new();
        let mut next = Vec::with_capacity(nets.len());
        for (n, col) in nets.iter().zip(&colors) {
            let mut fan_in: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n.len()];
            for d in 0..n.len() {
                for (i, &s) in n.inputs(d).iter().enumerate() {
                    fan_in[s].push((i, col[d]));
                }
            }
            let row: Vec<usize> = (0..n.len())
                .map(|c| {
                    let ins = n.inputs(c).iter().map(|&s| col[s]).collect();
                    let mut outs = std::mem::take(&mut fan_in[c]);
                    outs.sort_unstable();
                    let key = (col[c], ins, outs);
                    let fresh = intern.len();
                    *intern.entry(key).or_insert(fresh)
                })
                .collect();
            next.push(row);
        }
        colors = next;
        if intern.len() == classes {
            break;
        }
        classes = intern.len();
    }
    colors
}

struct IsoSearch<'a> {
    a: &'a Network,
    b: &'a Network,
    ca: Vec<usize>,
    cb: Vec<usize>,
    phi: Vec<Option<usize>>,
    used: Vec<bool>,
    trail: Vec<usize>,
    order: Vec<usize>,
}

impl IsoSearch<'_> {
    fn assign(&mut self, c: usize, d: usize) -> bool {
        let mut stack = vec![(c, d)];
        while let Some((c, d)) = stack.pop() {
            match self.phi[c] {
                Some(x) if x == d => continue,
                Some(_) => return false,
                None => {}
            }
            if self.used[d] || self.ca[c] != self.cb[d] {
                return false;
            }
            self.phi[c] = Some(d);
            self.used[d] = true;
            self.trail.push(c);
            for i in 0..self.a.edge_type_count() {
                stack.push((self.a.source(i, c), self.b.source(i, d)));
            }
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let c = self.trail.pop().unwrap();
            let d = self.phi[c].take().unwrap();
            self.used[d] = false;
        }
    }

    fn search(&mut self, pos: usize) -> bool {
        let Some(&c) = self.order[pos..].iter().find(|&&c| self.phi[c].is_none()) else {
            return true;
        };
        let next = pos + self.order[pos..].iter().position(|&x| x == c).unwrap() + 1;
        for d in 0..self.b.len() {
            if self.used[d] || self.cb[d] != self.ca[c] {
                continue;
            }
            let mark = self.trail.len();
            if self.assign(c, d) && self.search(next) {
                return true;
            }
            self.undo(mark);
        }
        false
    }
}

/// A bijection `phi` (as an index map from `a` to `b`) with
/// `phi(sigma_i(c)) = sigma'_i(phi(c))`, if one exists.
///
/// Exhaustive backtracking, pruned by colour refinement and by propagating
/// each choice along the input maps. Intended for networks of up to about a
/// dozen cells.
pub fn networks_equal(a: &Network, b: &Network) -> Option<Vec<usize>> {
    if a.len() != b.len() || a.edge_type_count() != b.edge_type_count() {
        return None;
    }
    let mut colors = refine_colors(&[a, b]);
    let cb = colors.pop().unwrap();
    let ca = colors.pop().unwrap();
    let mut hist_a = ca.clone();
    let mut hist_b = cb.clone();
    hist_a.sort_unstable();
    hist_b.sort_unstable();
    if hist_a != hist_b {
        return None;
    }
    let mut class_size: HashMap<usize, usize> = HashMap::new();
    for &x in &ca {
        *class_size.entry(x).or_default() += 1;
    }
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by_key(|&c| (class_size[&ca[c]], c));
    let mut s = IsoSearch {
        a,
        b,
        ca,
        cb,
        phi: vec![None; a.len()],
        used: vec![false; b.len()],
        trail: Vec::new(),
        order,
    };
    if !s.search(0) {
        return None;
    }
    let phi: Vec<usize> = s.phi.into_iter().map(Option::unwrap).collect();
    debug_assert!(is_isomorphism(a, b, &phi));
    Some(phi)
}

/// Check that `phi` is a bijection intertwining the input maps.
pub fn is_isomorphism(a: &Network, b: &Network, phi: &[usize]) -> bool {
    if a.len() != b.len() || phi.len() != a.len() || a.edge_type_count() != b.edge_type_count() {
        return false;
    }
    let mut hit = vec![false; b.len()];
    for &d in phi {
        if d >= b.len() || std::mem::replace(&mut hit[d], true) {
            return false;
        }
    }
    (0..a.len()).all(|c| {
        (0..a.edge_type_count()).all(|i| phi[a.source(i, c)] == b.source(i, phi[c]))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle() -> Network {
        Network::from_table(&[("a", &["b"]), ("b", &["a"])]).unwrap()
    }

    #[test]
    fn single_cell_is_trivial_ffn() {
        let n = parse_network(r#"{"cells":["a"],"edge_types":1,"sigma":[{"a":"a"}]}"#).unwrap();
        let ffs = detect_layers(&n).unwrap();
        assert_eq!(ffs.m(), 0);
        assert_eq!(is_backward_connected(&n), Some(0));
        assert_eq!(adjacency_matrices(&n).matrices[0], DMatrix::from_element(1, 1, 1u8));
    }

    #[test]
    fn two_cycle_is_not_feed_forward() {
        assert!(detect_layers(&cycle()).is_err());
    }

    #[test]
    fn parse_errors() {
        let unknown = r#"{"cells":["a"],"edge_types":1,"sigma":[{"a":"z"}]}"#;
        assert!(matches!(parse_network(unknown), Err(Error::UnknownCell { .. })));
        let dup = r#"{"cells":["a","a"],"edge_types":1,"sigma":[{"a":"a"}]}"#;
        assert!(matches!(parse_network(dup), Err(Error::DuplicateCell(_))));
        let zero = r#"{"cells":["a"],"edge_types":0,"sigma":[]}"#;
        assert_eq!(parse_network(zero), Err(Error::NoEdgeTypes));
        let missing = r#"{"cells":["a","b"],"edge_types":1,"sigma":[{"a":"a"}]}"#;
        assert!(matches!(parse_network(missing), Err(Error::MissingSigma { .. })));
        match parse_network("{\n \"cells\": [\"a\",\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn disjoint_cells_are_not_connected() {
        let n = Network::from_table(&[("a", &["a"]), ("b", &["b"])]).unwrap();
        assert!(!is_connected(&n));
        assert_eq!(is_backward_connected(&n), None);
    }

    #[test]
    fn relabelled_network_is_equal() {
        let a = Network::from_table(&[("x", &["x", "x"]), ("y", &["x", "x"]), ("z", &["y", "x"])])
            .unwrap();
        let b = Network::from_table(&[("z", &["y", "x"]), ("x", &["x", "x"]), ("y", &["x", "x"])])
            .unwrap();
        let phi = networks_equal(&a, &b).unwrap();
        assert_eq!(phi, vec![1, 2, 0]);
        let c = Network::from_table(&[("x", &["x", "x"]), ("y", &["x", "x"]), ("z", &["x", "y"])])
            .unwrap();
        assert!(networks_equal(&a, &c).is_none());
    }
}
