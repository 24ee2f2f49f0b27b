//! Numeric oracle: concrete polynomial cell functions, all equilibria of the
//! triangular feed-forward system at fixed λ, continuation over a geometric
//! λ grid, and order/slope estimation matched against symbolic signatures.

use std::cmp::Ordering;

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{json, Value};

use crate::branches::{BranchSignature, JetCoefficients};
use crate::error::{Error, Result};
use crate::network::{detect_layers, FeedForwardStructure, Network};

/// Below this magnitude a coordinate counts as zero.
pub const ZERO_THRESHOLD: f64 = 1e-10;
/// Samples used by the exponent fit.
pub const FIT_WINDOW: usize = 8;
/// Relative distance from a dyadic exponent above which the fit is rejected.
pub const LOCK_TOLERANCE: f64 = 0.1;
/// Relative slope tolerance used when matching branches to signatures.
pub const MATCH_TOLERANCE: f64 = 0.02;

/// `f = Σ f_i x_i + ½ Σ_ij f_ij x_i x_j + λ Σ f_iλ x_i + stabilizer·x_0³`,
/// with argument 0 the cell's own state and `1..=k` its inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolynomialCellFunction {
    pub jet: JetCoefficients,
    pub stabilizer: f64,
}

impl PolynomialCellFunction {
    pub fn new(jet: JetCoefficients) -> Self {
        PolynomialCellFunction { jet, stabilizer: 0.0 }
    }

    pub fn with_stabilizer(mut self, stabilizer: f64) -> Self {
        self.stabilizer = stabilizer;
        self
    }

    pub fn arity(&self) -> usize {
        self.jet.k + 1
    }

    pub fn eval(&self, args: &[f64], lambda: f64) -> f64 {
        let j = &self.jet;
        let mut v = self.stabilizer * args[0].powi(3);
        for (i, &a) in args.iter().enumerate() {
            v += (j.first_order[i] + lambda * j.mixed_lambda[i]) * a;
            for (jj, &b) in args.iter().enumerate() {
                v += 0.5 * j.second_order[i][jj] * a * b;
            }
        }
        v
    }

    pub fn gradient(&self, args: &[f64], lambda: f64) -> Vec<f64> {
        let j = &self.jet;
        let mut g: Vec<f64> = (0..args.len())
            .map(|i| {
                j.first_order[i]
                    + lambda * j.mixed_lambda[i]
                    + args.iter().enumerate().map(|(jj, &b)| j.second_order[i][jj] * b).sum::<f64>()
            })
            .collect();
        g[0] += 3.0 * self.stabilizer * args[0] * args[0];
        g
    }

    /// Coefficients (ascending) of `x ↦ f(x, y_1, …, y_k, λ)`.
    fn in_own_state(&self, inputs: &[f64], lambda: f64) -> [f64; 4] {
        let j = &self.jet;
        let mut c0 = 0.0;
        let mut c1 = j.first_order[0] + lambda * j.mixed_lambda[0];
        for (a, &y) in inputs.iter().enumerate() {
            let i = a + 1;
            c0 += (j.first_order[i] + lambda * j.mixed_lambda[i]) * y;
            c1 += j.second_order[0][i] * y;
            for (b, &z) in inputs.iter().enumerate() {
                c0 += 0.5 * j.second_order[i][b + 1] * y * z;
            }
        }
        [c0, c1, 0.5 * j.second_order[0][0], self.stabilizer]
    }

    /// Coefficients of `x ↦ f(x, x, …, x, λ)`.
    fn on_diagonal(&self, lambda: f64) -> [f64; 4] {
        let j = &self.jet;
        let c1: f64 = (0..self.arity())
            .map(|i| j.first_order[i] + lambda * j.mixed_lambda[i])
            .sum();
        let c2: f64 = 0.5 * j.second_order.iter().flatten().sum::<f64>();
        [0.0, c1, c2, self.stabilizer]
    }
}

fn poly(c: &[f64; 4], x: f64) -> f64 {
    ((c[3] * x + c[2]) * x + c[1]) * x + c[0]
}

fn dpoly(c: &[f64; 4], x: f64) -> f64 {
    (3.0 * c[3] * x + 2.0 * c[2]) * x + c[1]
}

fn polish(c: &[f64; 4], x: f64) -> f64 {
    let d = dpoly(c, x);
    if d == 0.0 {
        return x;
    }
    let y = x - poly(c, x) / d;
    if y.is_finite() && poly(c, y).abs() <= poly(c, x).abs() {
        y
    } else {
        x
    }
}

fn quadratic_roots(c0: f64, c1: f64, c2: f64) -> Vec<f64> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    if disc < 0.0 {
        return Vec::new();
    }
    if disc == 0.0 {
        return vec![-c1 / (2.0 * c2)];
    }
    // f64::signum(0.0) is 1, so q never vanishes when disc > 0
    let q = -0.5 * (c1 + c1.signum() * disc.sqrt());
    vec![q / c2, c0 / q]
}

fn cubic_roots(c: &[f64; 4]) -> Vec<f64> {
    let bound = 1.0 + c[..3].iter().map(|a| (a / c[3]).abs()).fold(0.0, f64::max);
    let mut cuts = vec![-bound];
    let mut crit = quadratic_roots(c[1], 2.0 * c[2], 3.0 * c[3]);
    crit.sort_by(f64::total_cmp);
    cuts.extend(crit);
    cuts.push(bound);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (flo, fhi) = (poly(c, lo), poly(c, hi));
        if flo == 0.0 {
            roots.push(lo);
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if poly(c, mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        roots.push(0.5 * (lo + hi));
    }
    if poly(c, bound) == 0.0 {
        roots.push(bound);
    }
    roots
}

/// All real roots of a polynomial of degree at most three, ascending,
/// polished once and deduplicated within `tol`.
pub fn real_roots(c: &[f64; 4], tol: f64) -> Result<Vec<f64>> {
    let mut roots = if c[3] != 0.0 {
        cubic_roots(c)
    } else if c[2] != 0.0 {
        quadratic_roots(c[0], c[1], c[2])
    } else if c[1] != 0.0 {
        vec![-c[0] / c[1]]
    } else if c[0] != 0.0 {
        Vec::new()
    } else {
        return Err(Error::Numeric("cell equation vanishes identically".into()));
    };
    for r in &mut roots {
        *r = polish(c, *r);
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= tol * b.abs().max(1.0));
    Ok(roots)
}

fn ffs(n: &Network) -> Result<FeedForwardStructure> {
    detect_layers(n).map_err(|e| e.into_error(n))
}

fn check_arity(n: &Network, pcf: &PolynomialCellFunction) -> Result<()> {
    if pcf.jet.k != n.edge_type_count() {
        return Err(Error::ArityMismatch {
            jet: pcf.jet.k,
            network: n.edge_type_count(),
        });
    }
    Ok(())
}

fn cell_args(n: &Network, x: &[f64], c: usize) -> Vec<f64> {
    std::iter::once(x[c]).chain(n.inputs(c).iter().map(|&s| x[s])).collect()
}

/// `F(x)_c = f(x_c, x_{σ_1(c)}, …, x_{σ_k(c)}, λ)`.
pub fn vector_field(n: &Network, pcf: &PolynomialCellFunction, x: &[f64], lambda: f64) -> Vec<f64> {
    (0..n.len()).map(|c| pcf.eval(&cell_args(n, x, c), lambda)).collect()
}

pub fn residual(n: &Network, pcf: &PolynomialCellFunction, x: &[f64], lambda: f64) -> f64 {
    vector_field(n, pcf, x, lambda).iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn jacobian(n: &Network, pcf: &PolynomialCellFunction, x: &[f64], lambda: f64) -> DMatrix<f64> {
    let mut jm = DMatrix::zeros(n.len(), n.len());
    for c in 0..n.len() {
        let g = pcf.gradient(&cell_args(n, x, c), lambda);
        jm[(c, c)] += g[0];
        for (i, &s) in n.inputs(c).iter().enumerate() {
            jm[(c, s)] += g[i + 1];
        }
    }
    jm
}

/// Newton's method on the full system. `None` when the Jacobian is singular
/// or the iteration does not reach `tol` within `max_iter` steps.
pub fn newton_solve(
    n: &Network,
    pcf: &PolynomialCellFunction,
    x0: &[f64],
    lambda: f64,
    tol: f64,
    max_iter: usize,
) -> Option<Vec<f64>> {
    let mut x = DVector::from_column_slice(x0);
    for _ in 0..max_iter {
        let f = DVector::from_vec(vector_field(n, pcf, x.as_slice(), lambda));
        if f.amax() <= tol {
            return Some(x.as_slice().to_vec());
        }
        let step = jacobian(n, pcf, x.as_slice(), lambda).lu().solve(&f)?;
        x -= step;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
    }
    let f = vector_field(n, pcf, x.as_slice(), lambda);
    (f.iter().all(|v| v.abs() <= tol)).then(|| x.as_slice().to_vec())
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Every real equilibrium at fixed λ, solving cell by cell in layer order.
/// Roots of one cell equation closer than `cluster_tol` are merged.
pub fn all_equilibria_at(
    n: &Network,
    pcf: &PolynomialCellFunction,
    lambda: f64,
    cluster_tol: f64,
) -> Result<Vec<Vec<f64>>> {
    check_arity(n, pcf)?;
    let f = ffs(n)?;
    let mut partial = vec![vec![0.0; n.len()]];
    for c in f.cells_in_order() {
        let mut next = Vec::with_capacity(partial.len() * 2);
        for x in &partial {
            let coeffs = if f.layer_of(c) == 0 {
                pcf.on_diagonal(lambda)
            } else {
                let ins: Vec<f64> = n.inputs(c).iter().map(|&s| x[s]).collect();
                pcf.in_own_state(&ins, lambda)
            };
            for r in real_roots(&coeffs, cluster_tol)? {
                let mut y = x.clone();
                y[c] = r;
                next.push(y);
            }
        }
        partial = next;
    }
    partial.sort_by(|a, b| lex_cmp(a, b));
    Ok(partial)
}

/// Equilibria within `radius` of the origin in the sup norm.
pub fn equilibria_near_origin(
    n: &Network,
    pcf: &PolynomialCellFunction,
    lambda: f64,
    radius: f64,
) -> Result<Vec<Vec<f64>>> {
    Ok(all_equilibria_at(n, pcf, lambda, 1e-9)?
        .into_iter()
        .filter(|x| x.iter().all(|v| v.abs() <= radius))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceConfig {
    pub lambda_start: f64,
    pub ratio: f64,
    pub samples: usize,
    pub min_samples: usize,
    pub cluster_tol: f64,
    pub residual_tol: f64,
    /// Samples added per extension when an exponent fails to lock.
    pub extension: usize,
    pub max_extensions: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            lambda_start: 1e-2,
            ratio: 0.5,
            samples: 20,
            min_samples: 10,
            cluster_tol: 1e-9,
            residual_tol: 1e-12,
            extension: 10,
            max_extensions: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericBranch {
    pub side: i8,
    pub lambdas: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CellEstimate {
    pub order: i32,
    pub slope: f64,
    /// Fitted exponent; `None` for zero coordinates.
    pub exponent: Option<f64>,
}

impl NumericBranch {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn last_lambda(&self) -> f64 {
        *self.lambdas.last().unwrap()
    }

    pub fn estimates(&self) -> Vec<Result<CellEstimate>> {
        (0..self.states[0].len()).map(|c| estimate_order_slope(self, c)).collect()
    }
}

fn fit_exponent(lambdas: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = lambdas.iter().map(|l| l.abs().ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.abs().ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Square-root order and slope of one coordinate, using the convention
/// `x_c ≈ s · sgn(λ) · |λ|^(2^-p)`.
pub fn estimate_order_slope(nb: &NumericBranch, cell: usize) -> Result<CellEstimate> {
    if nb.len() < FIT_WINDOW.max(2) {
        return Err(Error::Numeric(format!("only {} samples", nb.len())));
    }
    let values: Vec<f64> = nb.states.iter().map(|x| x[cell]).collect();
    if values.iter().all(|v| v.abs() < ZERO_THRESHOLD) {
        return Ok(CellEstimate {
            order: -1,
            slope: 0.0,
            exponent: None,
        });
    }
    let from = nb.len() - FIT_WINDOW;
    let tail = &values[from..];
    if tail.iter().any(|v| v.abs() < ZERO_THRESHOLD) {
        return Err(Error::Numeric(format!("coordinate {cell} vanishes inside the fit window")));
    }
    let e = fit_exponent(&nb.lambdas[from..], tail);
    if !(e > 0.0) {
        return Err(Error::Numeric(format!("coordinate {cell} does not decay (exponent {e:.3e})")));
    }
    let p = (-e.log2()).round().max(0.0);
    let target = 0.5f64.powf(p);
    if (e - target).abs() / target > LOCK_TOLERANCE {
        return Err(Error::Numeric(format!(
            "exponent {e:.4} of coordinate {cell} does not lock to a dyadic value"
        )));
    }
    let lam = nb.last_lambda();
    Ok(CellEstimate {
        order: p as i32,
        slope: values[nb.len() - 1] / (lam.signum() * lam.abs().powf(target)),
        exponent: Some(e),
    })
}

fn pattern(x: &[f64]) -> Vec<i8> {
    x.iter()
        .map(|&v| if v.abs() < ZERO_THRESHOLD { 0 } else { v.signum() as i8 })
        .collect()
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Index of the nearest unclaimed equilibrium with the same zero/sign pattern.
fn link(x: &[f64], candidates: &[Vec<f64>], claimed: &[bool]) -> Option<usize> {
    let key = pattern(x);
    let mut best: Option<(usize, f64)> = None;
    let mut ties = 0;
    for (i, y) in candidates.iter().enumerate() {
        if claimed[i] || pattern(y) != key {
            continue;
        }
        ties += 1;
        let d = sup_dist(x, y);
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    if ties > 1 {
        debug!("{ties} equilibria share a sign pattern; linked to the nearest");
    }
    best.map(|(i, _)| i)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trace {
    pub side: i8,
    pub branches: Vec<NumericBranch>,
    /// Why each dropped chain was dropped.
    pub dropped: Vec<String>,
}

fn grid(cfg: &TraceConfig, side: i8, from: usize, count: usize) -> Vec<f64> {
    (from..from + count)
        .map(|i| f64::from(side) * cfg.lambda_start * cfg.ratio.powi(i as i32))
        .collect()
}

fn approaches_origin(nb: &NumericBranch, m: usize) -> bool {
    let floor = 0.5f64.powi(m as i32 + 1);
    let from = nb.len().saturating_sub(FIT_WINDOW);
    (0..nb.states[0].len()).all(|c| {
        let tail: Vec<f64> = nb.states[from..].iter().map(|x| x[c]).collect();
        tail.iter().all(|v| v.abs() < ZERO_THRESHOLD)
            || tail.iter().any(|v| v.abs() < ZERO_THRESHOLD)
            || fit_exponent(&nb.lambdas[from..], &tail) > floor
    })
}

fn extend(
    n: &Network,
    pcf: &PolynomialCellFunction,
    nb: &mut NumericBranch,
    cfg: &TraceConfig,
) -> Result<bool> {
    let start = nb.len();
    for lam in grid(cfg, nb.side, start, cfg.extension) {
        let eqs = all_equilibria_at(n, pcf, lam, cfg.cluster_tol)?;
        let claimed = vec![false; eqs.len()];
        let Some(i) = link(nb.states.last().unwrap(), &eqs, &claimed) else {
            return Ok(false);
        };
        nb.residuals.push(residual(n, pcf, &eqs[i], lam));
        nb.lambdas.push(lam);
        nb.states.push(eqs[i].clone());
    }
    Ok(true)
}

/// Follow every equilibrium over the grid `side · λ_start · ρ^i`.
pub fn trace_branches(
    n: &Network,
    pcf: &PolynomialCellFunction,
    side: i8,
    cfg: &TraceConfig,
) -> Result<Trace> {
    if side != 1 && side != -1 {
        return Err(Error::Precondition(format!("side must be +1 or -1, got {side}")));
    }
    let m = ffs(n)?.m();
    let lambdas = grid(cfg, side, 0, cfg.samples);
    let levels: Vec<Vec<Vec<f64>>> = lambdas
        .iter()
        .map(|&l| all_equilibria_at(n, pcf, l, cfg.cluster_tol))
        .collect::<Result<_>>()?;

    // chains of (sample, equilibrium) indices
    let mut open: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut closed: Vec<Vec<(usize, usize)>> = Vec::new();
    for (s, eqs) in levels.iter().enumerate() {
        let mut claimed = vec![false; eqs.len()];
        let mut still_open = Vec::new();
        for chain in open {
            let &(ps, pi) = chain.last().unwrap();
            match link(&levels[ps][pi], eqs, &claimed) {
                Some(i) => {
                    claimed[i] = true;
                    let mut chain = chain;
                    chain.push((s, i));
                    still_open.push(chain);
                }
                None => closed.push(chain),
            }
        }
        for (i, _) in eqs.iter().enumerate().filter(|(i, _)| !claimed[*i]) {
            still_open.push(vec![(s, i)]);
        }
        open = still_open;
    }
    closed.extend(open);
    closed.sort();

    let mut branches = Vec::new();
    let mut dropped = Vec::new();
    for chain in closed {
        let (first, last) = (chain[0].0, chain.last().unwrap().0);
        let mut drop = |why: String| {
            info!("dropped chain starting at λ = {:e}: {why}", lambdas[first]);
            dropped.push(why);
        };
        if chain.len() < cfg.min_samples {
            drop(format!("only {} samples inside the window", chain.len()));
            continue;
        }
        if last + 1 != lambdas.len() {
            drop(format!("leaves the window after λ = {:e}", lambdas[last]));
            continue;
        }
        let states: Vec<Vec<f64>> = chain.iter().map(|&(s, i)| levels[s][i].clone()).collect();
        let mut nb = NumericBranch {
            side,
            lambdas: chain.iter().map(|&(s, _)| lambdas[s]).collect(),
            residuals: chain
                .iter()
                .zip(&states)
                .map(|(&(s, _), x)| residual(n, pcf, x, lambdas[s]))
                .collect(),
            states,
        };
        if !approaches_origin(&nb, m) {
            drop("does not approach the origin".into());
            continue;
        }
        let mut tries = 0;
        while nb.estimates().iter().any(|e| e.is_err()) && tries < cfg.max_extensions {
            tries += 1;
            debug!("extending a branch grid to {} samples", nb.len() + cfg.extension);
            if !extend(n, pcf, &mut nb, cfg)? {
                break;
            }
        }
        branches.push(nb);
    }
    Ok(Trace {
        side,
        branches,
        dropped,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideMatch {
    pub side: i8,
    /// `(branch index, signature index)`.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_branches: Vec<(usize, String)>,
    pub unmatched_signatures: Vec<usize>,
}

impl SideMatch {
    pub fn is_bijection(&self) -> bool {
        self.unmatched_branches.is_empty() && self.unmatched_signatures.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub sides: Vec<SideMatch>,
}

impl MatchReport {
    pub fn is_bijection(&self) -> bool {
        self.sides.iter().all(SideMatch::is_bijection)
    }
}

fn matches(est: &[CellEstimate], sig: &BranchSignature) -> bool {
    est.iter().zip(sig.orders.iter().zip(&sig.slopes)).all(|(e, (&p, &s))| {
        e.order == p && (p < 0 || (e.slope - s).abs() <= MATCH_TOLERANCE * s.abs())
    })
}

/// Pair traced branches with signatures side by side. Signatures with
/// `δ = 0` are expected on both sides.
pub fn match_numeric_to_signatures(traces: &[Trace], signatures: &[BranchSignature]) -> MatchReport {
    let sides = traces
        .iter()
        .map(|t| {
            let on: Vec<usize> = (0..signatures.len())
                .filter(|&i| signatures[i].on_side(t.side))
                .collect();
            let mut taken = vec![false; signatures.len()];
            let mut pairs = Vec::new();
            let mut unmatched_branches = Vec::new();
            for (b, nb) in t.branches.iter().enumerate() {
                let est: Result<Vec<CellEstimate>> = nb.estimates().into_iter().collect();
                let est = match est {
                    Ok(e) => e,
                    Err(e) => {
                        unmatched_branches.push((b, e.to_string()));
                        continue;
                    }
                };
                let cands: Vec<usize> = on.iter().copied().filter(|&i| matches(&est, &signatures[i])).collect();
                match cands[..] {
                    [i] if !taken[i] => {
                        taken[i] = true;
                        pairs.push((b, i));
                    }
                    [i] => unmatched_branches.push((b, format!("signature {i} already matched"))),
                    [] => unmatched_branches.push((b, "no signature matches".into())),
                    _ => unmatched_branches.push((b, format!("{} signatures match", cands.len()))),
                }
            }
            SideMatch {
                side: t.side,
                pairs,
                unmatched_branches,
                unmatched_signatures: on.into_iter().filter(|&i| !taken[i]).collect(),
            }
        })
        .collect();
    MatchReport { sides }
}

/// One row per sample: `side,branch_id,lambda,<cells>,residual`.
pub fn traces_to_csv(n: &Network, traces: &[Trace]) -> String {
    let mut out = String::from("side,branch_id,lambda");
    for id in n.cell_ids() {
        out.push(',');
        out.push_str(id);
    }
    out.push_str(",residual\n");
    for t in traces {
        for (b, nb) in t.branches.iter().enumerate() {
            for ((lam, x), r) in nb.lambdas.iter().zip(&nb.states).zip(&nb.residuals) {
                out.push_str(&format!("{},{b},{lam:e}", t.side));
                for v in x {
                    out.push_str(&format!(",{v:e}"));
                }
                out.push_str(&format!(",{r:e}\n"));
            }
        }
    }
    out
}

/// Per branch and cell, the estimated order and slope (or the fit error).
pub fn traces_summary_json(n: &Network, traces: &[Trace]) -> Value {
    let mut rows = Vec::new();
    for t in traces {
        for (b, nb) in t.branches.iter().enumerate() {
            let cells: serde_json::Map<String, Value> = nb
                .estimates()
                .into_iter()
                .enumerate()
                .map(|(c, e)| {
                    let v = match e {
                        Ok(e) => json!({"order": e.order, "slope": e.slope, "exponent": e.exponent}),
                        Err(e) => json!({"error": e.to_string()}),
                    };
                    (n.id(c).to_string(), v)
                })
                .collect();
            rows.push(json!({
                "side": t.side,
                "branch_id": b,
                "samples": nb.len(),
                "lambda_last": nb.last_lambda(),
                "max_residual": nb.residuals.iter().fold(0.0f64, |m, r| m.max(*r)),
                "cells": cells,
            }));
        }
    }
    Value::Array(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots_are_stable() {
        // roots 1e-8 and 1e8
        let r = real_roots(&[1.0, -(1e8 + 1e-8), 1.0, 0.0], 1e-12).unwrap();
        assert_eq!(r.len(), 2);
        assert!((r[0] - 1e-8).abs() < 1e-20);
        assert!((r[1] - 1e8).abs() < 1e-4);
    }

    #[test]
    fn cubic_roots_found() {
        // (x - 1)(x + 2)(x - 3) = x^3 - 2x^2 - 5x + 6
        let r = real_roots(&[6.0, -5.0, -2.0, 1.0], 1e-12).unwrap();
        assert_eq!(r.len(), 3);
        for (a, b) in r.iter().zip([-2.0, 1.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn double_root_counted_once() {
        let r = real_roots(&[1.0, -2.0, 1.0, 0.0], 1e-9).unwrap();
        assert_eq!(r, vec![1.0]);
        assert!(real_roots(&[0.0; 4], 1e-9).is_err());
    }

    #[test]
    fn exponent_fit_is_exact_for_power_laws() {
        let lam: Vec<f64> = (0..8).map(|i| 1e-3 * 0.5f64.powi(i)).collect();
        let x: Vec<f64> = lam.iter().map(|l| 3.0 * l.powf(0.25)).collect();
        assert!((fit_exponent(&lam, &x) - 0.25).abs() < 1e-12);
    }
}
