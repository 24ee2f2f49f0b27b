//! Steady-state bifurcation branches of feed-forward systems.
//!
//! Internal-dynamics branches are described by signatures `(delta, p, s)`:
//! the side of `lambda = 0` on which the branch lives, and per cell the
//! square-root order `p_c` and slope `s_c` with
//! `x_c(lambda) ~ s_c * sgn(lambda) * |lambda|^(2^-p_c)`.

use std::cmp::Ordering;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};
use crate::network::{adjacency_matrices, detect_layers, FeedForwardStructure, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BifurcationType {
    Valency,
    Internal,
}

/// Taylor coefficients of the cell function at the origin. Index 0 is the
/// cell's own state, `1..=k` its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetCoefficients {
    pub k: usize,
    pub first_order: Vec<f64>,
    /// Symmetric `(k+1) x (k+1)` matrix of second derivatives.
    pub second_order: Vec<Vec<f64>>,
    pub mixed_lambda: Vec<f64>,
    pub bifurcation_type: BifurcationType,
}

impl JetCoefficients {
    pub fn zeros(k: usize, bifurcation_type: BifurcationType) -> Self {
        JetCoefficients {
            k,
            first_order: vec![0.0; k + 1],
            second_order: vec![vec![0.0; k + 1]; k + 1],
            mixed_lambda: vec![0.0; k + 1],
            bifurcation_type,
        }
    }

    /// Internal jet with `f_0 = 0`, input coefficients `f`, and only `f_00`
    /// and `f_0lambda` among the higher terms.
    pub fn internal(f: &[f64], f00: f64, f0l: f64) -> Self {
        let mut jet = JetCoefficients::zeros(f.len(), BifurcationType::Internal);
        jet.first_order[1..].copy_from_slice(f);
        jet.second_order[0][0] = f00;
        jet.mixed_lambda[0] = f0l;
        jet
    }

    /// Valency jet with the given first-order terms and uniform second-order
    /// and mixed terms chosen so that the double sums equal `f2_sum` and
    /// `fl_sum`.
    pub fn valency(first_order: &[f64], f2_sum: f64, fl_sum: f64) -> Self {
        let k = first_order.len() - 1;
        let mut jet = JetCoefficients::zeros(k, BifurcationType::Valency);
        jet.first_order.copy_from_slice(first_order);
        let n2 = ((k + 1) * (k + 1)) as f64;
        for row in &mut jet.second_order {
            row.iter_mut().for_each(|x| *x = f2_sum / n2);
        }
        jet.mixed_lambda.iter_mut().for_each(|x| *x = fl_sum / (k + 1) as f64);
        jet
    }

    pub fn set_second(&mut self, i: usize, j: usize, v: f64) {
        self.second_order[i][j] = v;
        self.second_order[j][i] = v;
    }

    pub fn f0(&self) -> f64 {
        self.first_order[0]
    }

    pub fn f00(&self) -> f64 {
        self.second_order[0][0]
    }

    pub fn f0l(&self) -> f64 {
        self.mixed_lambda[0]
    }

    /// `f_i` for an edge type `i` (0-based), i.e. `first_order[i + 1]`.
    pub fn input(&self, i: usize) -> f64 {
        self.first_order[i + 1]
    }

    pub fn input_sum(&self) -> f64 {
        self.first_order[1..].iter().sum()
    }

    /// `sum_{i,j} f_ij` over all ordered pairs.
    pub fn second_sum(&self) -> f64 {
        self.second_order.iter().flatten().sum()
    }

    pub fn lambda_sum(&self) -> f64 {
        self.mixed_lambda.iter().sum()
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.k + 1;
        let ok = self.first_order.len() == n
            && self.mixed_lambda.len() == n
            && self.second_order.len() == n
            && self.second_order.iter().all(|r| r.len() == n);
        if !ok {
            return Err(Error::Degenerate(format!("coefficient arrays do not have length {n}")));
        }
        for i in 0..n {
            for j in 0..i {
                if self.second_order[i][j] != self.second_order[j][i] {
                    return Err(Error::Degenerate(format!("f_{i}{j} != f_{j}{i}")));
                }
            }
        }
        Ok(())
    }

    /// Check the nondegeneracy conditions of the jet's bifurcation type.
    /// `eps` is the threshold below which a quantity counts as zero.
    pub fn check_nondegenerate(&self, eps: f64) -> Result<()> {
        self.check_shape()?;
        let zero = |x: f64| x.abs() <= eps;
        let fail = |what: &str| Err(Error::Degenerate(what.to_string()));
        match self.bifurcation_type {
            BifurcationType::Internal => {
                if self.f0() != 0.0 {
                    return fail("internal bifurcation needs f_0 = 0");
                }
                if zero(self.f00()) {
                    return fail("f_00 vanishes");
                }
                if zero(self.f0l()) {
                    return fail("f_0lambda vanishes");
                }
                if zero(self.input_sum()) {
                    return fail("sum of input coefficients vanishes");
                }
            }
            BifurcationType::Valency => {
                let total: f64 = self.first_order.iter().sum();
                let scale: f64 = self.first_order.iter().map(|x| x.abs()).sum();
                if total.abs() > 1e-12 * scale.max(1.0) {
                    return fail("valency bifurcation needs sum of f_i = 0");
                }
                if zero(self.f0()) {
                    return fail("f_0 vanishes");
                }
                if zero(self.second_sum()) {
                    return fail("sum of f_ij vanishes");
                }
                if zero(self.lambda_sum()) {
                    return fail("sum of f_ilambda vanishes");
                }
            }
        }
        Ok(())
    }

    fn check_arity(&self, n: &Network) -> Result<()> {
        if self.k != n.edge_type_count() {
            return Err(Error::ArityMismatch {
                jet: self.k,
                network: n.edge_type_count(),
            });
        }
        Ok(())
    }
}

/// `f_0 I + sum_i f_i A_i`.
pub fn jacobian_at_origin(n: &Network, jet: &JetCoefficients) -> Result<DMatrix<f64>> {
    jet.check_arity(n)?;
    let mut j = DMatrix::identity(n.len(), n.len()) * jet.f0();
    for (i, a) in adjacency_matrices(n).as_f64().iter().enumerate() {
        j += a * jet.input(i);
    }
    Ok(j)
}

/// Dimension of the generalized kernel at the bifurcation point.
pub fn center_subspace_dim(ffs: &FeedForwardStructure, ty: BifurcationType) -> usize {
    match ty {
        BifurcationType::Valency => ffs.layer(0).len(),
        BifurcationType::Internal => ffs.layers()[1..].iter().map(Vec::len).sum(),
    }
}

/// A valency branch, determined by which first-layer cells are nonzero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValencyBranchPattern {
    /// Cells of the first layer carrying the nonzero germ.
    pub cells: Vec<usize>,
    /// Leading coefficient of the nonzero first-layer germ.
    pub slope: f64,
}

fn ffs_of(n: &Network) -> Result<FeedForwardStructure> {
    detect_layers(n).map_err(|e| e.into_error(n))
}

/// All `2^|C_0|` valency branches, ordered by bitmask over the first layer.
pub fn enumerate_branches_valency(n: &Network, jet: &JetCoefficients) -> Result<Vec<ValencyBranchPattern>> {
    jet.check_arity(n)?;
    if jet.bifurcation_type != BifurcationType::Valency {
        return Err(Error::Degenerate("expected a valency jet".into()));
    }
    jet.check_nondegenerate(0.0)?;
    let ffs = ffs_of(n)?;
    let first = ffs.layer(0);
    if first.len() >= usize::BITS as usize {
        return Err(Error::SizeBound {
            size: first.len(),
            bound: usize::BITS as usize - 1,
        });
    }
    let slope = -2.0 * jet.lambda_sum() / jet.second_sum();
    Ok((0..1usize << first.len())
        .map(|mask| ValencyBranchPattern {
            cells: (0..first.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| first[b])
                .collect(),
            slope,
        })
        .collect())
}

/// How a slope was obtained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlopeTemplate {
    /// `p = -1`.
    Zero,
    /// `p = 0`: `-2 f_0lambda / f_00`.
    Onset,
    /// `p > 0`: `sign * sqrt(-(2 delta / f_00) * sum f_i s_src)` over the
    /// listed `(edge type, source cell)` pairs.
    Root { sign: i8, terms: Vec<(usize, usize)> },
}

impl SlopeTemplate {
    pub fn render(&self, n: &Network) -> String {
        match self {
            SlopeTemplate::Zero => "0".into(),
            SlopeTemplate::Onset => "-2*f0l/f00".into(),
            SlopeTemplate::Root { sign, terms } => {
                let mut s = String::from(if *sign > 0 { "+" } else { "-" });
                s.push_str("sqrt(-2*delta/f00*(");
                for (t, (i, src)) in terms.iter().enumerate() {
                    if t > 0 {
                        s.push('+');
                    }
                    let _ = write!(s, "f{}*s[{}]", i + 1, n.id(*src));
                }
                s.push_str("))");
                s
            }
        }
    }
}

/// A branch signature. Vectors are indexed by cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchSignature {
    pub delta: i8,
    pub orders: Vec<i32>,
    pub slopes: Vec<f64>,
    pub templates: Vec<SlopeTemplate>,
}

impl BranchSignature {
    pub fn trivial(len: usize) -> Self {
        BranchSignature {
            delta: 0,
            orders: vec![-1; len],
            slopes: vec![0.0; len],
            templates: vec![SlopeTemplate::Zero; len],
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.orders.iter().all(|&p| p == -1)
    }

    /// Whether the branch exists for `lambda` of the given sign.
    pub fn on_side(&self, side: i8) -> bool {
        self.delta == 0 || self.delta == side
    }

    /// Canonical order: orders, then delta, then slopes.
    pub fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.orders
            .cmp(&other.orders)
            .then(self.delta.cmp(&other.delta))
            .then_with(|| {
                self.slopes
                    .iter()
                    .zip(&other.slopes)
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
    }

    /// JSON form keyed by cell id.
    pub fn to_json(&self, n: &Network) -> Value {
        let mut orders = Map::new();
        let mut slopes = Map::new();
        let mut templates = Map::new();
        for c in 0..n.len() {
            orders.insert(n.id(c).into(), json!(self.orders[c]));
            slopes.insert(n.id(c).into(), json!(self.slopes[c]));
            templates.insert(n.id(c).into(), json!(self.templates[c].render(n)));
        }
        json!({
            "delta": self.delta,
            "orders": orders,
            "slopes": slopes,
            "slope_templates": templates,
        })
    }
}

/// Tunables for the internal enumeration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnumerationOptions {
    /// A radicand sum with absolute value at most this is treated as zero
    /// and reported as a genericity violation.
    pub zero_tolerance: f64,
}

impl Default for EnumerationOptions {
    fn default() -> Self {
        EnumerationOptions { zero_tolerance: 0.0 }
    }
}

struct Dfs<'a> {
    n: &'a Network,
    jet: &'a JetCoefficients,
    order: Vec<usize>,
    layer0: Vec<bool>,
    delta: i8,
    tol: f64,
    cur: BranchSignature,
    out: Vec<BranchSignature>,
}

impl Dfs<'_> {
    fn run(&mut self, pos: usize) -> Result<()> {
        let Some(&c) = self.order.get(pos) else {
            let active = self.cur.orders.iter().any(|&p| p >= 1);
            if self.delta == 0 || active {
                self.out.push(self.cur.clone());
            }
            return Ok(());
        };
        if self.layer0[c] {
            return self.set_and_recurse(pos, c, -1, 0.0, SlopeTemplate::Zero);
        }
        let inputs = self.n.inputs(c);
        let pbar = inputs.iter().map(|&s| self.cur.orders[s]).max().unwrap();
        if pbar < 0 {
            self.set_and_recurse(pos, c, -1, 0.0, SlopeTemplate::Zero)?;
            let s0 = -2.0 * self.jet.f0l() / self.jet.f00();
            return self.set_and_recurse(pos, c, 0, s0, SlopeTemplate::Onset);
        }
        if self.delta == 0 {
            return Ok(());
        }
        let terms: Vec<(usize, usize)> = inputs
            .iter()
            .enumerate()
            .filter(|(_, &s)| self.cur.orders[s] == pbar)
            .map(|(i, &s)| (i, s))
            .collect();
        let sum: f64 = terms
            .iter()
            .map(|&(i, s)| self.jet.input(i) * self.cur.slopes[s])
            .sum();
        if sum.abs() <= self.tol {
            let combination = terms
                .iter()
                .map(|&(i, s)| format!("f{}*s[{}]", i + 1, self.n.id(s)))
                .collect::<Vec<_>>()
                .join(" + ");
            return Err(Error::Genericity {
                cell: self.n.id(c).to_string(),
                combination,
            });
        }
        let radicand = -(2.0 * f64::from(self.delta) / self.jet.f00()) * sum;
        if radicand < 0.0 {
            return Ok(());
        }
        let root = radicand.sqrt();
        for sign in [1i8, -1] {
            let t = SlopeTemplate::Root {
                sign,
                terms: terms.clone(),
            };
            self.set_and_recurse(pos, c, pbar + 1, f64::from(sign) * root, t)?;
        }
        Ok(())
    }

    fn set_and_recurse(&mut self, pos: usize, c: usize, p: i32, s: f64, t: SlopeTemplate) -> Result<()> {
        self.cur.orders[c] = p;
        self.cur.slopes[c] = s;
        self.cur.templates[c] = t;
        self.run(pos + 1)
    }
}

/// All internal-dynamics branch signatures, canonically ordered.
///
/// Cells are visited layer by layer. First-layer cells are zero; a cell
/// whose inputs all vanish is either zero or starts with order 0; any other
/// cell has order one above its highest input and one of the two roots of
/// the realness condition, when the radicand is positive.
pub fn enumerate_branches_internal(
    n: &Network,
    jet: &JetCoefficients,
    opts: EnumerationOptions,
) -> Result<Vec<BranchSignature>> {
    jet.check_arity(n)?;
    if jet.bifurcation_type != BifurcationType::Internal {
        return Err(Error::Degenerate("expected an internal jet".into()));
    }
    jet.check_nondegenerate(opts.zero_tolerance)?;
    let ffs = ffs_of(n)?;
    let mut layer0 = vec![false; n.len()];
    for &c in ffs.layer(0) {
        layer0[c] = true;
    }
    let mut out = Vec::new();
    for delta in [-1i8, 0, 1] {
        let mut dfs = Dfs {
            n,
            jet,
            order: ffs.cells_in_order().collect(),
            layer0: layer0.clone(),
            delta,
            tol: opts.zero_tolerance,
            cur: BranchSignature {
                delta,
                ..BranchSignature::trivial(n.len())
            },
            out: Vec::new(),
        };
        dfs.run(0)?;
        out.append(&mut dfs.out);
    }
    out.sort_by(|a, b| a.canonical_cmp(b));
    out.dedup_by(|a, b| a.canonical_cmp(b).is_eq());
    Ok(out)
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// Check the six consistency conditions directly, independently of the
/// enumerator. Slopes are compared with relative tolerance `tol`.
pub fn validate_signature(
    n: &Network,
    jet: &JetCoefficients,
    sig: &BranchSignature,
    tol: f64,
) -> std::result::Result<(), String> {
    if sig.orders.len() != n.len() || sig.slopes.len() != n.len() {
        return Err("signature length differs from cell count".into());
    }
    if ![-1, 0, 1].contains(&sig.delta) {
        return Err(format!("delta = {}", sig.delta));
    }
    let p = &sig.orders;
    let s = &sig.slopes;
    if sig.delta == 0 && p.iter().any(|&x| x > 0) {
        return Err("delta = 0 with a positive order".into());
    }
    if sig.delta != 0 && p.iter().all(|&x| x <= 0) {
        return Err("one-sided signature without positive orders".into());
    }
    for c in 0..n.len() {
        let id = n.id(c);
        let ins: Vec<i32> = n.inputs(c).iter().map(|&x| p[x]).collect();
        let max_in = *ins.iter().max().unwrap();
        if p[c] < -1 {
            return Err(format!("order {} at {id}", p[c]));
        }
        if p[c] == -1 && max_in != -1 {
            return Err(format!("{id} vanishes although an input does not"));
        }
        if p[c] > -1 && max_in != p[c] - 1 {
            return Err(format!("{id} has order {} but highest input order {max_in}", p[c]));
        }
        if (p[c] == -1) != (s[c] == 0.0) {
            return Err(format!("{id}: zero slope must match order -1"));
        }
        if p[c] == 0 && !rel_close(s[c], -2.0 * jet.f0l() / jet.f00(), tol) {
            return Err(format!("{id}: onset slope {} is wrong", s[c]));
        }
        if p[c] > 0 {
            let sum: f64 = (0..n.edge_type_count())
                .filter(|&i| p[n.source(i, c)] == p[c] - 1)
                .map(|i| jet.input(i) * s[n.source(i, c)])
                .sum();
            let radicand = -(2.0 * f64::from(sig.delta) / jet.f00()) * sum;
            if radicand <= 0.0 {
                return Err(format!("{id}: nonpositive radicand {radicand}"));
            }
            if !rel_close(s[c] * s[c], radicand, tol) {
                return Err(format!("{id}: slope {} squared differs from {radicand}", s[c]));
            }
        }
    }
    Ok(())
}

/// `sign(f_0lambda * sum f_i)`.
pub fn canonical_delta(jet: &JetCoefficients) -> i8 {
    sign(jet.f0l() * jet.input_sum())
}

fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Order `j - 1` and slope of the `j`-th cell of a branch that starts in one
/// layer and propagates through every input: `-sign(f_0lambda) *
/// 2|f_0lambda|^(2^-(j-1)) / f_00 * |sum f_i|^(1 - 2^-(j-1))`.
pub fn canonical_chain_slopes(jet: &JetCoefficients, j: u32) -> (i32, f64) {
    assert!(j >= 1, "chain positions start at 1");
    let e = 0.5f64.powi(j as i32 - 1);
    let s = -f64::from(sign(jet.f0l())) * 2.0 * jet.f0l().abs().powf(e) / jet.f00()
        * jet.input_sum().abs().powf(1.0 - e);
    (j as i32 - 1, s)
}

/// The signature vanishing below layer `r` whose layer `r + l` cells all
/// have order `l` and slope `s~_{l+1}`; the last layer uses `last_sign`
/// times the magnitude. Exists whenever `1 <= r <= m`.
pub fn canonical_layer_signature(
    n: &Network,
    jet: &JetCoefficients,
    ffs: &FeedForwardStructure,
    r: usize,
    last_sign: i8,
) -> BranchSignature {
    let mut sig = BranchSignature::trivial(n.len());
    for j in r..=ffs.m() {
        let l = (j - r) as u32;
        let (p, mut s) = canonical_chain_slopes(jet, l + 1);
        if j == ffs.m() && j > r {
            s = s.abs() * f64::from(last_sign);
        }
        for &c in ffs.layer(j) {
            sig.orders[c] = p;
            sig.slopes[c] = s;
            sig.templates[c] = if p == 0 {
                SlopeTemplate::Onset
            } else {
                SlopeTemplate::Root {
                    sign: sign(s),
                    terms: n.inputs(c).iter().copied().enumerate().collect(),
                }
            };
        }
    }
    sig.delta = if r < ffs.m() { canonical_delta(jet) } else { 0 };
    sig
}

/// First layer `r` on which the branch is nonzero, after checking that
/// layer `r + l` has highest order exactly `l`. `None` for the trivial
/// signature.
pub fn layer_order_profile(sig: &BranchSignature, ffs: &FeedForwardStructure) -> Result<Option<usize>> {
    let max_in = |j: usize| ffs.layer(j).iter().map(|&c| sig.orders[c]).max().unwrap();
    let Some(r) = (0..=ffs.m()).find(|&j| max_in(j) >= 0) else {
        return Ok(None);
    };
    for j in r..=ffs.m() {
        if max_in(j) != (j - r) as i32 {
            return Err(Error::Precondition(format!(
                "layer {j} has highest order {} instead of {}",
                max_in(j),
                j - r
            )));
        }
    }
    if let Some(c) = (0..sig.orders.len()).find(|&c| sig.orders[c] > ffs.layer_of(c) as i32 - 1) {
        return Err(Error::Precondition(format!("cell {c} exceeds its layer bound")));
    }
    Ok(Some(r))
}
