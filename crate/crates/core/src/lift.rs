//! Feed-forward lifts: splits, basic lifts and their composition.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::coloring::{
    find_colorings_with_quotient, is_balanced, quotient, Coloring, DEFAULT_SIZE_BOUND,
};
use crate::error::{Error, Result};
use crate::network::{
    detect_layers, is_backward_connected, networks_equal, FeedForwardStructure, Network,
};

/// How a lift relates to its quotient. Layer indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LiftClassification {
    CreatesNewLayers(usize),
    InsideLayer(usize),
    Composite(Vec<LiftClassification>),
    NotRecognized(String),
}

/// One re-wired edge of a split: the type-`edge_type` input of `target`
/// becomes `new_cells[source]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeReassignment {
    pub target: String,
    pub edge_type: usize,
    pub source: usize,
}

/// Replace `cell` by `new_cells`. Every edge leaving `cell` towards another
/// cell is listed in `edge_reassignment`; `sigma_images[t][i]` is the type-`i`
/// input of `new_cells[t]`, named by an id of the split network.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub cell: String,
    pub new_cells: Vec<String>,
    pub edge_reassignment: Vec<EdgeReassignment>,
    pub sigma_images: Vec<Vec<String>>,
}

/// Apply a split. The coloring merging `new_cells` is balanced on the result
/// and its quotient is `n` again; both facts are checked before returning.
pub fn split_cell(n: &Network, spec: &SplitSpec) -> Result<Network> {
    let bad = |msg: String| Error::InvalidSplit(msg);
    let c = n
        .index_of(&spec.cell)
        .ok_or_else(|| bad(format!("unknown cell `{}`", spec.cell)))?;
    let l = spec.new_cells.len();
    if l == 0 {
        return Err(bad("no new cells".into()));
    }
    if spec.sigma_images.len() != l {
        return Err(bad(format!(
            "{} sigma image rows for {} new cells",
            spec.sigma_images.len(),
            l
        )));
    }
    let k = n.edge_type_count();

    let mut ids: Vec<String> = Vec::with_capacity(n.len() + l - 1);
    let mut old_to_new = vec![usize::MAX; n.len()];
    let mut projection = Vec::with_capacity(n.len() + l - 1);
    for d in 0..n.len() {
        if d == c {
            for id in &spec.new_cells {
                ids.push(id.clone());
                projection.push(c);
            }
        } else {
            old_to_new[d] = ids.len();
            ids.push(n.id(d).to_string());
            projection.push(d);
        }
    }
    let mut seen = HashSet::new();
    if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
        return Err(bad(format!("cell id `{dup}` would occur twice")));
    }
    let first_new = c;
    let lookup = |id: &str| -> Result<usize> {
        ids.iter()
            .position(|x| x == id)
            .ok_or_else(|| bad(format!("unknown cell `{id}` in sigma images")))
    };

    let mut reassigned: Vec<Vec<Option<usize>>> = vec![vec![None; k]; n.len()];
    for e in &spec.edge_reassignment {
        let t = n
            .index_of(&e.target)
            .ok_or_else(|| bad(format!("unknown edge target `{}`", e.target)))?;
        if e.edge_type >= k || n.source(e.edge_type, t) != c || t == c {
            return Err(bad(format!(
                "`{}` has no type-{} edge from `{}`",
                e.target, e.edge_type, spec.cell
            )));
        }
        if e.source >= l {
            return Err(bad(format!("new cell index {} out of range", e.source)));
        }
        reassigned[t][e.edge_type] = Some(e.source);
    }

    let mut inputs = vec![Vec::with_capacity(k); ids.len()];
    for d in (0..n.len()).filter(|&d| d != c) {
        for i in 0..k {
            let s = n.source(i, d);
            let src = if s == c {
                let t = reassigned[d][i].ok_or_else(|| {
                    bad(format!("edge {i} into `{}` is not reassigned", n.id(d)))
                })?;
                first_new + t
            } else {
                old_to_new[s]
            };
            inputs[old_to_new[d]].push(src);
        }
    }
    for (t, row) in spec.sigma_images.iter().enumerate() {
        if row.len() != k {
            return Err(bad(format!("new cell {t} has {} inputs, expected {k}", row.len())));
        }
        for (i, id) in row.iter().enumerate() {
            let s = lookup(id)?;
            if projection[s] != n.source(i, c) {
                return Err(bad(format!(
                    "type-{i} input of `{}` projects to `{}`, not `{}`",
                    spec.new_cells[t],
                    n.id(projection[s]),
                    n.id(n.source(i, c))
                )));
            }
            inputs[first_new + t].push(s);
        }
    }
    let lifted = Network::new(ids, inputs)?;

    let merging = Coloring::from_labels(&projection);
    if !is_balanced(&lifted, &merging)?.is_balanced() {
        return Err(bad("merging coloring is not balanced".into()));
    }
    let q = quotient(&lifted, &merging)?;
    if networks_equal(&q.network, n).is_none() {
        return Err(bad("quotient of the split differs from the original".into()));
    }
    Ok(lifted)
}

/// Keep the classes of `col` inside the input-closed set `s`; every other
/// cell becomes a singleton.
pub fn restrict_coloring(l: &Network, col: &Coloring, s: &[usize]) -> Result<Coloring> {
    let mut inside = vec![false; l.len()];
    for &c in s {
        inside[c] = true;
    }
    for &c in s {
        if let Some(&x) = l.inputs(c).iter().find(|&&x| !inside[x]) {
            return Err(Error::NotClosed(l.id(x).to_string()));
        }
    }
    let labels: Vec<(bool, usize)> = (0..l.len())
        .map(|c| {
            if inside[c] {
                (true, col.class_of(c))
            } else {
                (false, c)
            }
        })
        .collect();
    Ok(Coloring::from_labels(&labels))
}

fn ffs(n: &Network) -> Result<FeedForwardStructure> {
    detect_layers(n).map_err(|e| e.into_error(n))
}

/// Projection of `l`'s cells onto `n`'s cells induced by `col`, or an error
/// if `col` does not exhibit `l` as a lift of `n`.
pub fn lift_projection(n: &Network, l: &Network, col: &Coloring) -> Result<Vec<usize>> {
    let q = quotient(l, col)?;
    let phi = networks_equal(&q.network, n)
        .ok_or_else(|| Error::NotALift("quotient by the coloring differs from the base".into()))?;
    Ok(q.projection.iter().map(|&x| phi[x]).collect())
}

fn aligned(nf: &FeedForwardStructure, lf: &FeedForwardStructure, proj: &[usize]) -> bool {
    if lf.m() < nf.m() {
        return false;
    }
    let d = lf.m() - nf.m();
    let image = |j: usize| -> Vec<usize> {
        let mut v: Vec<usize> = lf.layer(j).iter().map(|&c| proj[c]).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let sorted = |cells: &[usize]| -> Vec<usize> {
        let mut v = cells.to_vec();
        v.sort_unstable();
        v
    };
    let base = sorted(nf.layer(0));
    (0..=d).all(|j| image(j) == base) && (1..=nf.m()).all(|j| image(d + j) == sorted(nf.layer(j)))
}

/// Whether the layers of `l` project as in a composition of basic lifts:
/// `C'_0..C'_{n-m}` onto `C_0`, and `C'_{n-j}` onto `C_{m-j}`.
///
/// Backward connectedness of `l` is not required.
pub fn verify_layer_alignment(n: &Network, l: &Network, col: &Coloring) -> Result<bool> {
    let nf = ffs(n)?;
    let lf = ffs(l)?;
    let proj = lift_projection(n, l, col)?;
    Ok(aligned(&nf, &lf, &proj))
}

fn basic_from_profiles(nf: &FeedForwardStructure, lf: &FeedForwardStructure) -> Option<LiftClassification> {
    let (ns, ls) = (nf.layer_sizes(), lf.layer_sizes());
    if ls.len() > ns.len() {
        let d = lf.m() - nf.m();
        let prefix = ls[..=d].iter().all(|&x| x == ns[0]);
        let rest = ls[d + 1..] == ns[1..];
        return (prefix && rest).then_some(LiftClassification::CreatesNewLayers(d));
    }
    if ls.len() == ns.len() {
        let differing: Vec<usize> = (0..ns.len()).filter(|&j| ns[j] != ls[j]).collect();
        if let [j] = differing[..] {
            return Some(LiftClassification::InsideLayer(j));
        }
    }
    None
}

/// Classify `l` as a lift of `n`.
pub fn classify_lift(n: &Network, l: &Network) -> Result<LiftClassification> {
    let nf = ffs(n)?;
    let lf = ffs(l)?;
    let cols = find_colorings_with_quotient(l, n, DEFAULT_SIZE_BOUND)?;
    if cols.is_empty() {
        return Err(Error::NotALift("no balanced coloring has this quotient".into()));
    }
    if networks_equal(n, l).is_some() {
        return Ok(LiftClassification::Composite(Vec::new()));
    }
    if let Some(basic) = basic_from_profiles(&nf, &lf) {
        for col in &cols {
            if aligned(&nf, &lf, &lift_projection(n, l, col)?) {
                return Ok(basic);
            }
        }
    }
    if is_backward_connected(l).is_some() {
        let dec = decompose_lift(n, l)?;
        return Ok(LiftClassification::Composite(
            dec.steps.into_iter().map(|s| s.classification).collect(),
        ));
    }
    Ok(LiftClassification::NotRecognized(
        "not a basic lift and not backward connected".into(),
    ))
}

/// Append `count` copies of the first layer, each feeding the next; the old
/// second layer is fed by the last copy. Copy `t` of cell `c` is `c#t`.
pub fn create_new_layers(n: &Network, count: usize) -> Result<Network> {
    let nf = ffs(n)?;
    let first = nf.layer(0);
    let mut ids: Vec<String> = n.cell_ids().to_vec();
    let mut inputs: Vec<Vec<usize>> = (0..n.len()).map(|c| n.inputs(c).to_vec()).collect();
    // copies[t][pos] is the index of copy t of first[pos]; copy 0 is the cell itself
    let mut copies: Vec<Vec<usize>> = vec![first.to_vec()];
    for t in 1..=count {
        let row = (0..first.len())
            .map(|pos| {
                let idx = ids.len();
                ids.push(format!("{}#{t}", n.id(first[pos])));
                inputs.push(vec![copies[t - 1][pos]; n.edge_type_count()]);
                idx
            })
            .collect();
        copies.push(row);
    }
    if nf.m() > 0 {
        for &c in nf.layer(1) {
            for i in 0..n.edge_type_count() {
                let pos = first.iter().position(|&x| x == inputs[c][i]).unwrap();
                inputs[c][i] = copies[count][pos];
            }
        }
    }
    Network::new(ids, inputs)
}

/// A basic step of a decomposition.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionStep {
    pub classification: LiftClassification,
    /// The lift reached after this step.
    pub network: Network,
    /// Coloring of `network` whose quotient is the previous network.
    pub coloring: Coloring,
    /// For inside-layer steps, the 2-cell splits realizing it, in order.
    pub splits: Vec<SplitSpec>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Decomposition {
    /// The coloring of `l` that the chain realizes.
    pub coloring: Coloring,
    pub steps: Vec<DecompositionStep>,
}

fn fresh_id(taken: &HashSet<String>, wanted: &str) -> String {
    let mut id = wanted.to_string();
    while taken.contains(&id) {
        id.push('\'');
    }
    id
}

/// Factor `l -> n` into an optional layer-creating lift followed by
/// inside-layer lifts (last layer first), each realized by 2-cell splits.
///
/// Uses the first coloring (canonical order) whose layer projections are
/// aligned. A lift with no aligned coloring is reported as not decomposable;
/// this is the situation of a first-layer cell split whose copy lands in a
/// later layer.
pub fn decompose_lift(n: &Network, l: &Network) -> Result<Decomposition> {
    let nf = ffs(n)?;
    let lf = ffs(l)?;
    let cols = find_colorings_with_quotient(l, n, DEFAULT_SIZE_BOUND)?;
    if cols.is_empty() {
        return Err(Error::NotALift("no balanced coloring has this quotient".into()));
    }
    let mut chosen = None;
    for col in &cols {
        let proj = lift_projection(n, l, col)?;
        if aligned(&nf, &lf, &proj) {
            chosen = Some((col.clone(), proj));
            break;
        }
    }
    let Some((col, proj)) = chosen else {
        let bc = if is_backward_connected(l).is_some() { "" } else { "not backward connected; " };
        return Err(Error::NotDecomposable(format!(
            "{bc}no coloring projects the layers of the lift onto those of the base"
        )));
    };

    let d = lf.m() - nf.m();
    let mut steps = Vec::new();
    // same-layer part of the coloring
    let same_layer = Coloring::from_labels(
        &(0..l.len()).map(|c| (col.class_of(c), lf.layer_of(c))).collect::<Vec<_>>(),
    );
    let (mut cur, mut fiber) = if d > 0 {
        let t = create_new_layers(n, d)?;
        let q = quotient(l, &same_layer)?;
        let phi = networks_equal(&q.network, &t).ok_or_else(|| {
            Error::NotDecomposable("same-layer quotient is not a layer-creating lift".into())
        })?;
        let fiber: Vec<usize> = q.projection.iter().map(|&x| phi[x]).collect();
        let labels: Vec<usize> = (0..t.len())
            .map(|v| {
                let y = fiber.iter().position(|&f| f == v).unwrap();
                proj[y]
            })
            .collect();
        steps.push(DecompositionStep {
            classification: LiftClassification::CreatesNewLayers(d),
            network: t.clone(),
            coloring: Coloring::from_labels(&labels),
            splits: Vec::new(),
        });
        (t, fiber)
    } else {
        (n.clone(), proj.clone())
    };

    for j in (0..=lf.m()).rev() {
        let start_fiber = fiber.clone();
        let mut splits = Vec::new();
        loop {
            // a fiber inside layer j with at least two cells
            let mut target = None;
            for &y in lf.layer(j) {
                let members: Vec<usize> =
                    lf.layer(j).iter().copied().filter(|&z| fiber[z] == fiber[y]).collect();
                if members.len() > 1 {
                    target = Some(members);
                    break;
                }
            }
            let Some(members) = target else { break };
            let (spec, next, next_fiber) = peel(&cur, l, &fiber, &members)?;
            splits.push(spec);
            cur = next;
            fiber = next_fiber;
        }
        if splits.is_empty() {
            continue;
        }
        let labels: Vec<usize> = (0..cur.len())
            .map(|v| start_fiber[fiber.iter().position(|&f| f == v).unwrap()])
            .collect();
        steps.push(DecompositionStep {
            classification: LiftClassification::InsideLayer(j),
            network: cur.clone(),
            coloring: Coloring::from_labels(&labels),
            splits,
        });
    }
    if networks_equal(&cur, l).is_none() {
        return Err(Error::NotDecomposable("split chain does not reach the lift".into()));
    }
    Ok(Decomposition {
        coloring: col,
        steps,
    })
}

/// Split the current cell carrying `members` (cells of `l`) into the fiber of
/// the last member and the fiber of the rest.
fn peel(
    cur: &Network,
    l: &Network,
    fiber: &[usize],
    members: &[usize],
) -> Result<(SplitSpec, Network, Vec<usize>)> {
    let u = fiber[members[0]];
    let x = *members.last().unwrap();
    let taken: HashSet<String> = cur.cell_ids().iter().cloned().collect();
    let peeled_id = fresh_id(&taken, l.id(x));
    let rest_id = cur.id(u).to_string();
    let part = |y: usize| usize::from(y == x);
    let rep = [members[0], x];

    let mut edge_reassignment = Vec::new();
    for v in (0..cur.len()).filter(|&v| v != u) {
        for i in 0..cur.edge_type_count() {
            if cur.source(i, v) == u {
                let y = fiber.iter().position(|&f| f == v).unwrap();
                edge_reassignment.push(EdgeReassignment {
                    target: cur.id(v).to_string(),
                    edge_type: i,
                    source: part(l.source(i, y)),
                });
            }
        }
    }
    let new_cells = vec![rest_id.clone(), peeled_id.clone()];
    let name_of = |y: usize| -> String {
        if fiber[y] == u {
            new_cells[part(y)].clone()
        } else {
            cur.id(fiber[y]).to_string()
        }
    };
    let sigma_images = rep
        .iter()
        .map(|&y| (0..l.edge_type_count()).map(|i| name_of(l.source(i, y))).collect())
        .collect();
    let spec = SplitSpec {
        cell: rest_id,
        new_cells: new_cells.clone(),
        edge_reassignment,
        sigma_images,
    };
    let next = split_cell(cur, &spec)?;
    let next_fiber = (0..l.len())
        .map(|y| next.require(&name_of(y)))
        .collect::<Result<Vec<_>>>()?;
    Ok((spec, next, next_fiber))
}

/// Replay a decomposition starting from `n`.
pub fn compose_decomposition(n: &Network, dec: &Decomposition) -> Result<Network> {
    let mut cur = n.clone();
    for step in &dec.steps {
        match step.classification {
            LiftClassification::CreatesNewLayers(count) => cur = create_new_layers(&cur, count)?,
            _ => {
                for spec in &step.splits {
                    cur = split_cell(&cur, spec)?;
                }
            }
        }
    }
    Ok(cur)
}

/// Outcome of the uniqueness check for colorings realizing a lift.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UniqueColoring {
    /// `l` is not a backward-connected feed-forward network.
    NotApplicable { count: usize },
    Unique(Coloring),
    NoColoring,
    /// More than one coloring although `l` is backward connected.
    Violated { count: usize },
}

pub fn unique_coloring_check(n: &Network, l: &Network) -> Result<UniqueColoring> {
    let mut cols = find_colorings_with_quotient(l, n, DEFAULT_SIZE_BOUND)?;
    let applicable = detect_layers(l).is_ok() && is_backward_connected(l).is_some();
    Ok(match (applicable, cols.len()) {
        (false, count) => UniqueColoring::NotApplicable { count },
        (true, 0) => UniqueColoring::NoColoring,
        (true, 1) => UniqueColoring::Unique(cols.pop().unwrap()),
        (true, count) => UniqueColoring::Violated { count },
    })
}
