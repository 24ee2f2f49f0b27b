//! The lifting bifurcation problem: are all branches on a lift `L` of `N`
//! contained in the synchrony subspace of a coloring realizing the lift?
//!
//! Decided exhaustively by enumerating branch signatures on `L`, and
//! predicted by structural sufficient conditions. Lifted-ness is checked at
//! signature level: a branch lies in the synchrony subspace of a coloring
//! exactly when its orders and slopes are constant on every class.

use serde::Serialize;
use serde_json::{json, Value};

use crate::branches::{
    canonical_layer_signature, center_subspace_dim, enumerate_branches_internal,
    enumerate_branches_valency, validate_signature, BifurcationType, BranchSignature,
    EnumerationOptions, JetCoefficients, SlopeTemplate, ValencyBranchPattern,
};
use crate::coloring::{find_colorings_with_quotient, Coloring, DEFAULT_SIZE_BOUND};
use crate::error::{Error, Result};
use crate::lift::{classify_lift, LiftClassification};
use crate::network::{detect_layers, is_backward_connected, FeedForwardStructure, Network};

/// Stable rule tags used in reports.
pub mod rules {
    pub const CENTER_DIM: &str = "equal-center-dimension";
    pub const VALENCY: &str = "valency-first-layer";
    pub const FIRST_OR_NEW_LAYER: &str = "internal-first-or-new-layer";
    pub const NEXT_LAYER_ONE_CELL: &str = "internal-next-layer-single-cell";
    pub const SAME_SIGN_INPUTS: &str = "internal-same-sign-inputs";
    pub const SECOND_LAYER_W: &str = "second-layer-inequality";
    pub const LATER_LAYER_W: &str = "later-layer-inequality";
    pub const EXHAUSTIVE: &str = "exhaustive";
}

const SLOPE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    AllLifted,
    ExistsNotLifted,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Witness {
    Internal(BranchSignature),
    Valency(ValencyBranchPattern),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RuleStatus {
    /// Hypotheses hold; the rule yields `RuleCheck::verdict`.
    Applies,
    /// The rule concerns this kind of lift but its hypotheses fail.
    NotSatisfied,
    /// The rule does not concern this kind of lift.
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuleCheck {
    pub rule: &'static str,
    pub status: RuleStatus,
    pub verdict: Option<Verdict>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LiftingVerdict {
    pub verdict: Verdict,
    /// Tag of the deciding rule, `exhaustive`, or `none`.
    pub rule: String,
    pub witness: Option<Witness>,
    pub coloring_used: Option<Coloring>,
    /// Every rule examined, in priority order.
    pub checks: Vec<RuleCheck>,
}

impl LiftingVerdict {
    /// Tags of the rules whose hypotheses hold.
    pub fn applicable_rules(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| c.status == RuleStatus::Applies)
            .map(|c| c.rule)
            .collect()
    }

    pub fn check(&self, rule: &str) -> Option<&RuleCheck> {
        self.checks.iter().find(|c| c.rule == rule)
    }

    pub fn to_json(&self, l: &Network) -> Value {
        let witness = self.witness.as_ref().map(|w| match w {
            Witness::Internal(sig) => sig.to_json(l),
            Witness::Valency(p) => json!({
                "first_layer_cells": p.cells.iter().map(|&c| l.id(c)).collect::<Vec<_>>(),
                "slope": p.slope,
            }),
        });
        json!({
            "verdict": self.verdict,
            "rule": self.rule,
            "witness": witness,
            "coloring_used": self.coloring_used.as_ref().map(|c| c.to_ids(l)),
            "checks": self.checks,
        })
    }
}

fn slopes_equal(a: f64, b: f64) -> bool {
    (a - b).abs() <= SLOPE_TOL * a.abs().max(b.abs())
}

fn constant_on_classes(sig: &BranchSignature, col: &Coloring) -> bool {
    col.classes().iter().all(|class| {
        let r = class[0];
        class
            .iter()
            .all(|&c| sig.orders[c] == sig.orders[r] && slopes_equal(sig.slopes[c], sig.slopes[r]))
    })
}

/// The first coloring whose classes carry constant orders and slopes.
pub fn is_lifted(sig: &BranchSignature, colorings: &[Coloring]) -> Result<Option<Coloring>> {
    if colorings.is_empty() {
        return Err(Error::NotALift("no coloring realizes the lift".into()));
    }
    Ok(colorings.iter().find(|col| constant_on_classes(sig, col)).cloned())
}

/// Valency analogue: the first-layer pattern is constant on every class
/// restricted to the first layer.
pub fn is_lifted_valency(
    pattern: &ValencyBranchPattern,
    first_layer: &[usize],
    colorings: &[Coloring],
) -> Result<Option<Coloring>> {
    if colorings.is_empty() {
        return Err(Error::NotALift("no coloring realizes the lift".into()));
    }
    let on = |c: usize| pattern.cells.contains(&c);
    Ok(colorings
        .iter()
        .find(|col| {
            col.classes().iter().all(|class| {
                let firsts: Vec<usize> =
                    class.iter().copied().filter(|c| first_layer.contains(c)).collect();
                firsts.iter().all(|&c| on(c) == on(firsts[0]))
            })
        })
        .cloned())
}

fn ffs(n: &Network) -> Result<FeedForwardStructure> {
    detect_layers(n).map_err(|e| e.into_error(n))
}

fn realizing_colorings(n: &Network, l: &Network) -> Result<Vec<Coloring>> {
    let cols = find_colorings_with_quotient(l, n, DEFAULT_SIZE_BOUND)?;
    if cols.is_empty() {
        return Err(Error::NotALift("no balanced coloring has this quotient".into()));
    }
    Ok(cols)
}

/// Enumerate all branches on `l` and report the first one (canonical order)
/// not lifted from `n`.
pub fn decide_exhaustive(n: &Network, l: &Network, jet: &JetCoefficients) -> Result<LiftingVerdict> {
    ffs(n)?;
    let lf = ffs(l)?;
    let cols = realizing_colorings(n, l)?;
    let mut lifted_by = None;
    let witness = match jet.bifurcation_type {
        BifurcationType::Internal => {
            let mut found = None;
            for sig in enumerate_branches_internal(l, jet, EnumerationOptions::default())? {
                match is_lifted(&sig, &cols)? {
                    Some(col) => lifted_by = lifted_by.or(Some(col)),
                    None => {
                        found = Some(Witness::Internal(sig));
                        break;
                    }
                }
            }
            found
        }
        BifurcationType::Valency => {
            let mut found = None;
            for pat in enumerate_branches_valency(l, jet)? {
                match is_lifted_valency(&pat, lf.layer(0), &cols)? {
                    Some(col) => lifted_by = lifted_by.or(Some(col)),
                    None => {
                        found = Some(Witness::Valency(pat));
                        break;
                    }
                }
            }
            found
        }
    };
    let verdict = if witness.is_some() {
        Verdict::ExistsNotLifted
    } else {
        Verdict::AllLifted
    };
    Ok(LiftingVerdict {
        verdict,
        rule: rules::EXHAUSTIVE.into(),
        coloring_used: if witness.is_some() { None } else { lifted_by },
        witness,
        checks: Vec::new(),
    })
}

struct Ctx<'a> {
    n: &'a Network,
    l: &'a Network,
    jet: &'a JetCoefficients,
    nf: FeedForwardStructure,
    lf: FeedForwardStructure,
    cols: Vec<Coloring>,
    class: LiftClassification,
    backward_connected: bool,
}

fn check(rule: &'static str, status: RuleStatus, verdict: Option<Verdict>, detail: impl Into<String>) -> RuleCheck {
    RuleCheck {
        rule,
        status,
        verdict,
        detail: detail.into(),
    }
}

fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl Ctx<'_> {
    /// Nontrivial classes of `col` inside layer `j`.
    fn classes_in_layer(&self, col: &Coloring, j: usize) -> Vec<Vec<usize>> {
        col.nontrivial_classes()
            .filter(|cl| self.lf.layer_of(cl[0]) == j)
            .cloned()
            .collect()
    }

    /// Extend a signature fixed on layers `<= upto` to all of `l`: cells with
    /// a nonzero input take order one above their inputs and the root whose
    /// sign keeps the next radicand positive when all inputs share a sign.
    fn propagate(&self, mut sig: BranchSignature, upto: usize) -> Option<BranchSignature> {
        let d = f64::from(sig.delta);
        let f00 = self.jet.f00();
        let sign = -sgn(d * f00 * self.jet.input_sum());
        for j in upto + 1..=self.lf.m() {
            for &c in self.lf.layer(j) {
                let ins = self.l.inputs(c);
                let pbar = ins.iter().map(|&s| sig.orders[s]).max().unwrap();
                if pbar < 0 {
                    continue;
                }
                let terms: Vec<(usize, usize)> = ins
                    .iter()
                    .copied()
                    .enumerate()
                    .filter(|&(_, s)| sig.orders[s] == pbar)
                    .collect();
                let sum: f64 = terms.iter().map(|&(i, s)| self.jet.input(i) * sig.slopes[s]).sum();
                let radicand = -(2.0 * d / f00) * sum;
                if radicand <= 0.0 {
                    return None;
                }
                sig.orders[c] = pbar + 1;
                sig.slopes[c] = sign * radicand.sqrt();
                sig.templates[c] = SlopeTemplate::Root {
                    sign: sign as i8,
                    terms,
                };
            }
        }
        Some(sig)
    }

    /// Accept a witness only if it is a valid signature lifted by no coloring.
    fn confirm(&self, sig: Option<BranchSignature>) -> std::result::Result<BranchSignature, String> {
        let sig = sig.ok_or("witness construction hit a nonpositive radicand")?;
        validate_signature(self.l, self.jet, &sig, SLOPE_TOL)
            .map_err(|e| format!("constructed witness is invalid: {e}"))?;
        match is_lifted(&sig, &self.cols) {
            Ok(None) => Ok(sig),
            Ok(Some(_)) => Err("constructed witness is lifted by some coloring".into()),
            Err(e) => Err(e.to_string()),
        }
    }

    fn onset_at(&self, c: usize, delta: i8) -> BranchSignature {
        let mut sig = BranchSignature::trivial(self.l.len());
        sig.delta = delta;
        sig.orders[c] = 0;
        sig.slopes[c] = -2.0 * self.jet.f0l() / self.jet.f00();
        sig.templates[c] = SlopeTemplate::Onset;
        sig
    }

    /// Whether layer `j` of `l` has exactly one more cell than in `n`.
    fn single_split(&self, j: usize) -> bool {
        self.lf.layer(j).len() == self.nf.layer(j).len() + 1
    }

    fn w(&self, d: usize, set: &[usize]) -> f64 {
        (0..self.l.edge_type_count())
            .filter(|&i| set.contains(&self.l.source(i, d)))
            .map(|i| self.jet.input(i))
            .sum()
    }
}

/// Apply the structural rules in fixed priority and report every rule
/// examined. The first rule whose hypotheses hold decides the verdict.
pub fn predict_via_theorems(n: &Network, l: &Network, jet: &JetCoefficients) -> Result<LiftingVerdict> {
    let nf = ffs(n)?;
    let lf = ffs(l)?;
    let cols = realizing_colorings(n, l)?;
    let class = classify_lift(n, l)?;
    if let LiftClassification::NotRecognized(reason) = class {
        return Err(Error::LiftNotClassified(reason));
    }
    let ctx = Ctx {
        n,
        l,
        jet,
        nf,
        lf,
        cols,
        class,
        backward_connected: is_backward_connected(l).is_some(),
    };
    let _ = ctx.n;
    let mut checks = Vec::new();
    let mut outcome: Option<(Verdict, &'static str, Option<Witness>, Option<Coloring>)> = None;
    let mut record = |c: RuleCheck, witness: Option<Witness>, col: Option<Coloring>| {
        if c.status == RuleStatus::Applies && outcome.is_none() {
            outcome = Some((c.verdict.unwrap(), c.rule, witness, col));
        }
        checks.push(c);
    };

    let dn = center_subspace_dim(&ctx.nf, jet.bifurcation_type);
    let dl = center_subspace_dim(&ctx.lf, jet.bifurcation_type);
    let detail = format!("center dimensions {dn} (base) and {dl} (lift)");
    if dn == dl {
        record(
            check(rules::CENTER_DIM, RuleStatus::Applies, Some(Verdict::AllLifted), detail),
            None,
            Some(ctx.cols[0].clone()),
        );
    } else {
        record(check(rules::CENTER_DIM, RuleStatus::NotSatisfied, None, detail), None, None);
    }

    match jet.bifurcation_type {
        BifurcationType::Valency => {
            let (c, w) = valency_rule(&ctx);
            record(c, w, None);
        }
        BifurcationType::Internal => {
            let (c, w) = first_or_new_layer_rule(&ctx);
            record(c, w, None);
            let (c, w) = next_layer_one_cell_rule(&ctx);
            record(c, w, None);
            let (c, w) = same_sign_rule(&ctx);
            record(c, w, None);
            let (c, col) = second_layer_w_rule(&ctx);
            record(c, None, col);
            let (c, col) = later_layer_w_rule(&ctx);
            record(c, None, col);
        }
    }

    Ok(match outcome {
        Some((verdict, rule, witness, coloring_used)) => LiftingVerdict {
            verdict,
            rule: rule.into(),
            witness,
            coloring_used,
            checks,
        },
        None => LiftingVerdict {
            verdict: Verdict::Undetermined,
            rule: "none".into(),
            witness: None,
            coloring_used: None,
            checks,
        },
    })
}

fn valency_rule(ctx: &Ctx) -> (RuleCheck, Option<Witness>) {
    let na = |d: &str| (check(rules::VALENCY, RuleStatus::NotApplicable, None, d), None);
    let ns = |d: String| (check(rules::VALENCY, RuleStatus::NotSatisfied, None, d), None);
    if !ctx.backward_connected {
        return ns("lift is not backward connected".into());
    }
    match ctx.class {
        LiftClassification::CreatesNewLayers(_) | LiftClassification::InsideLayer(1..) => (
            check(
                rules::VALENCY,
                RuleStatus::Applies,
                Some(Verdict::AllLifted),
                "layer-creating lift or lift inside a later layer",
            ),
            None,
        ),
        LiftClassification::InsideLayer(0) => {
            let col = &ctx.cols[0];
            let Some(class) = ctx.classes_in_layer(col, 0).into_iter().next() else {
                return ns("no first-layer class to separate".into());
            };
            let pats = match enumerate_branches_valency(ctx.l, ctx.jet) {
                Ok(p) => p,
                Err(e) => return ns(e.to_string()),
            };
            let Some(pat) = pats.into_iter().find(|p| p.cells == [class[0]]) else {
                return ns("no pattern isolates the split cell".into());
            };
            match is_lifted_valency(&pat, ctx.lf.layer(0), &ctx.cols) {
                Ok(None) => (
                    check(
                        rules::VALENCY,
                        RuleStatus::Applies,
                        Some(Verdict::ExistsNotLifted),
                        "lift inside the first layer of a backward-connected lift",
                    ),
                    Some(Witness::Valency(pat)),
                ),
                _ => ns("separating pattern is lifted by some coloring".into()),
            }
        }
        _ => na("composite lift"),
    }
}

fn first_or_new_layer_rule(ctx: &Ctx) -> (RuleCheck, Option<Witness>) {
    let tag = rules::FIRST_OR_NEW_LAYER;
    match ctx.class {
        LiftClassification::InsideLayer(0) => (
            check(tag, RuleStatus::Applies, Some(Verdict::AllLifted), "lift inside the first layer"),
            None,
        ),
        LiftClassification::CreatesNewLayers(_) => {
            let sig = canonical_layer_signature(ctx.l, ctx.jet, &ctx.lf, 1, 1);
            match ctx.confirm(Some(sig)) {
                Ok(sig) => (
                    check(tag, RuleStatus::Applies, Some(Verdict::ExistsNotLifted), "layer-creating lift"),
                    Some(Witness::Internal(sig)),
                ),
                Err(e) => (check(tag, RuleStatus::NotSatisfied, None, e), None),
            }
        }
        _ => (
            check(tag, RuleStatus::NotApplicable, None, "not a first-layer or layer-creating lift"),
            None,
        ),
    }
}

fn next_layer_one_cell_rule(ctx: &Ctx) -> (RuleCheck, Option<Witness>) {
    let tag = rules::NEXT_LAYER_ONE_CELL;
    let LiftClassification::InsideLayer(j) = ctx.class else {
        return (check(tag, RuleStatus::NotApplicable, None, "not an inside-layer lift"), None);
    };
    let m = ctx.nf.m();
    if j == 0 || j >= m {
        return (check(tag, RuleStatus::NotApplicable, None, "layer is first or last"), None);
    }
    if ctx.nf.layer(j + 1).len() != 1 {
        let detail = format!("next layer of the base has {} cells", ctx.nf.layer(j + 1).len());
        return (check(tag, RuleStatus::NotSatisfied, None, detail), None);
    }
    let d = ctx.lf.layer(j + 1)[0];
    let mut last_err = String::from("no split class found");
    for col in &ctx.cols {
        for class in ctx.classes_in_layer(col, j) {
            let c2 = class[1];
            let fa = ctx.w(d, &[c2]);
            let delta = sgn(ctx.jet.f0l() * fa) as i8;
            let sig = ctx.propagate(ctx.onset_at(c2, delta), j);
            match ctx.confirm(sig) {
                Ok(sig) => {
                    return (
                        check(
                            tag,
                            RuleStatus::Applies,
                            Some(Verdict::ExistsNotLifted),
                            format!("inside layer {j}; next layer of the base is a single cell"),
                        ),
                        Some(Witness::Internal(sig)),
                    )
                }
                Err(e) => last_err = e,
            }
        }
    }
    (check(tag, RuleStatus::NotSatisfied, None, last_err), None)
}

fn same_sign_rule(ctx: &Ctx) -> (RuleCheck, Option<Witness>) {
    let tag = rules::SAME_SIGN_INPUTS;
    let LiftClassification::InsideLayer(j) = ctx.class else {
        return (check(tag, RuleStatus::NotApplicable, None, "not an inside-layer lift"), None);
    };
    let m = ctx.nf.m();
    if j == 0 || j + 1 >= m {
        return (check(tag, RuleStatus::NotApplicable, None, "layer is not intermediate"), None);
    }
    if !ctx.backward_connected {
        return (check(tag, RuleStatus::NotSatisfied, None, "lift is not backward connected"), None);
    }
    let f = &ctx.jet.first_order[1..];
    if !(f.iter().all(|&x| x > 0.0) || f.iter().all(|&x| x < 0.0)) {
        return (check(tag, RuleStatus::NotSatisfied, None, "input coefficients differ in sign"), None);
    }
    let delta = sgn(ctx.jet.f0l() * ctx.jet.input_sum()) as i8;
    let mut last_err = String::from("no split class found");
    for col in &ctx.cols {
        for class in ctx.classes_in_layer(col, j) {
            let sig = ctx.propagate(ctx.onset_at(class[0], delta), j);
            match ctx.confirm(sig) {
                Ok(sig) => {
                    return (
                        check(
                            tag,
                            RuleStatus::Applies,
                            Some(Verdict::ExistsNotLifted),
                            format!("backward connected, inside layer {j}, inputs of one sign"),
                        ),
                        Some(Witness::Internal(sig)),
                    )
                }
                Err(e) => last_err = e,
            }
        }
    }
    (check(tag, RuleStatus::NotSatisfied, None, last_err), None)
}

/// The split pair of a single-cell split inside layer `j`, per coloring.
fn split_pairs(ctx: &Ctx, j: usize) -> Vec<(Coloring, usize, usize)> {
    ctx.cols
        .iter()
        .filter_map(|col| match ctx.classes_in_layer(col, j)[..] {
            [ref class] if class.len() == 2 => Some((col.clone(), class[0], class[1])),
            _ => None,
        })
        .collect()
}

fn second_layer_w_rule(ctx: &Ctx) -> (RuleCheck, Option<Coloring>) {
    let tag = rules::SECOND_LAYER_W;
    if ctx.class != LiftClassification::InsideLayer(1) || !ctx.single_split(1) {
        return (check(tag, RuleStatus::NotApplicable, None, "not a single split inside layer 1"), None);
    }
    if ctx.lf.m() < 2 {
        return (check(tag, RuleStatus::NotSatisfied, None, "no layer above the split"), None);
    }
    let next = ctx.lf.layer(2);
    for (col, c1, c2) in split_pairs(ctx, 1) {
        let others: Vec<usize> =
            ctx.lf.layer(1).iter().copied().filter(|&x| x != c1 && x != c2).collect();
        let holds = (0..1usize << others.len()).all(|mask| {
            let set: Vec<usize> = (0..others.len())
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| others[b])
                .collect();
            let wi = |d: usize| ctx.w(d, &set);
            next.iter().any(|&d1| {
                next.iter().any(|&d2| {
                    (wi(d1) + ctx.w(d1, &[c1])) * (wi(d2) + ctx.w(d2, &[c1])) < 0.0
                        && (wi(d1) + ctx.w(d1, &[c2])) * (wi(d2) + ctx.w(d2, &[c2])) < 0.0
                })
            })
        });
        if holds {
            return (
                check(tag, RuleStatus::Applies, Some(Verdict::AllLifted), "w-inequalities hold"),
                Some(col),
            );
        }
    }
    (check(tag, RuleStatus::NotSatisfied, None, "not satisfied"), None)
}

fn later_layer_w_rule(ctx: &Ctx) -> (RuleCheck, Option<Coloring>) {
    let tag = rules::LATER_LAYER_W;
    let j = match ctx.class {
        LiftClassification::InsideLayer(j) if j > 1 && j < ctx.nf.m() && ctx.single_split(j) => j,
        _ => {
            return (
                check(tag, RuleStatus::NotApplicable, None, "not a single split inside a later layer"),
                None,
            )
        }
    };
    for (col, c1, c2) in split_pairs(ctx, j) {
        let fed_by_pair: Vec<usize> = ctx
            .lf
            .layer(j + 1)
            .iter()
            .copied()
            .filter(|&d| ctx.l.inputs(d).iter().all(|&s| s == c1 || s == c2))
            .collect();
        for &d1 in &fed_by_pair {
            for &d2 in &fed_by_pair {
                let (a1, a2) = (ctx.w(d1, &[c1]), ctx.w(d2, &[c1]));
                let (b1, b2) = (ctx.w(d1, &[c2]), ctx.w(d2, &[c2]));
                if a1 * a2 < 0.0 && b1 * b2 < 0.0 && a1 * a2 + b1 * b2 < a1 * b2 + a2 * b1 {
                    return (
                        check(tag, RuleStatus::Applies, Some(Verdict::AllLifted), "w-inequalities hold"),
                        Some(col),
                    );
                }
            }
        }
    }
    (check(tag, RuleStatus::NotSatisfied, None, "not satisfied"), None)
}

/// Both deciders side by side.
#[derive(Debug, Clone, Serialize)]
pub struct CrossCheck {
    pub theorems: LiftingVerdict,
    pub exhaustive: LiftingVerdict,
    /// False when the theorems decide and disagree with the enumeration.
    pub consistent: bool,
}

pub fn cross_check(n: &Network, l: &Network, jet: &JetCoefficients) -> Result<CrossCheck> {
    let theorems = predict_via_theorems(n, l, jet)?;
    let exhaustive = decide_exhaustive(n, l, jet)?;
    let consistent = theorems.verdict == Verdict::Undetermined || theorems.verdict == exhaustive.verdict;
    Ok(CrossCheck {
        theorems,
        exhaustive,
        consistent,
    })
}
