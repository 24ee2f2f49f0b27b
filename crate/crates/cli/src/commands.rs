use std::fmt::Write as _;

use ffn_core::numeric::{traces_summary_json, traces_to_csv};
use ffn_core::{
    adjacency_matrices, classify_lift, cross_check, decompose_lift, detect_layers,
    enumerate_balanced_colorings, enumerate_branches_internal, enumerate_branches_valency,
    find_colorings_with_quotient, is_backward_connected, is_connected, match_numeric_to_signatures,
    quotient, trace_branches, BifurcationType, BranchSignature, Coloring, EnumerationOptions, Error,
    JetCoefficients, LiftClassification, LiftingVerdict, Network, PolynomialCellFunction,
    TraceConfig, Verdict,
};
use serde_json::{json, Value};

use crate::input::Named;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// What a command produced. `csv` is `None` when the command has no tabular
/// form.
pub struct Output {
    pub json: Value,
    pub table: String,
    pub csv: Option<String>,
    /// Nonzero when the command ran but found a mismatch.
    pub status: u8,
}

fn envelope(command: &str, body: Value) -> Value {
    let mut v = json!({"schema_version": SCHEMA_VERSION, "command": command});
    if let (Value::Object(dst), Value::Object(src)) = (&mut v, body) {
        dst.extend(src);
    }
    v
}

fn plural(k: usize, word: &str) -> String {
    format!("{k} {word}{}", if k == 1 { "" } else { "s" })
}

fn classes_text(n: &Network, col: &Coloring) -> String {
    let parts: Vec<String> = col.to_ids(n).iter().map(|c| format!("{{{}}}", c.join(","))).collect();
    parts.join(" ")
}

fn classification_text(c: &LiftClassification) -> String {
    match c {
        LiftClassification::CreatesNewLayers(d) => format!("creates {} new", plural(*d, "layer")),
        LiftClassification::InsideLayer(j) => format!("inside layer {j}"),
        LiftClassification::Composite(steps) if steps.is_empty() => "identity".into(),
        LiftClassification::Composite(steps) => {
            let s: Vec<String> = steps.iter().map(classification_text).collect();
            format!("composite: {}", s.join(", then "))
        }
        LiftClassification::NotRecognized(why) => format!("not recognized ({why})"),
    }
}

pub fn analyze(net: &Named) -> Result<Output, CliError> {
    let n = &net.network;
    let connected = is_connected(n);
    let rows_ok = adjacency_matrices(n).rows_sum_to_one();
    let mut table = String::new();
    let body = match detect_layers(n) {
        Ok(ffs) => {
            let m = ffs.m() + 1;
            let bc = is_backward_connected(n);
            let _ = write!(table, "{}; ", plural(m, "layer"));
            match bc {
                Some(c) => {
                    let _ = writeln!(table, "backward connected (cell {})", n.id(c));
                }
                None => table.push_str("not backward connected\n"),
            }
            let layers: Vec<Vec<&str>> = ffs.layers().iter().map(|l| l.iter().map(|&c| n.id(c)).collect()).collect();
            for (j, l) in layers.iter().enumerate() {
                let _ = writeln!(table, "  C{j}: {}", l.join(" "));
            }
            json!({
                "feed_forward": true,
                "layers": layers,
                "backward_connected": bc.is_some(),
                "last_cell": bc.map(|c| n.id(c)),
            })
        }
        Err(e) => {
            let _ = writeln!(table, "not feed-forward: {}", e.into_error(n));
            json!({"feed_forward": false, "layers": null, "backward_connected": false, "last_cell": null})
        }
    };
    let _ = writeln!(table, "{}, {}", plural(n.len(), "cell"), plural(n.edge_type_count(), "edge type"));
    let _ = writeln!(table, "connected: {}", if connected { "yes" } else { "no" });
    let _ = writeln!(table, "adjacency rows sum to one: {}", if rows_ok { "yes" } else { "no" });
    let mut json = envelope("analyze", body);
    json["network"] = json!(net.name);
    json["cells"] = json!(n.cell_ids());
    json["edge_types"] = json!(n.edge_type_count());
    json["connected"] = json!(connected);
    json["adjacency_rows_sum_to_one"] = json!(rows_ok);
    Ok(Output {
        json,
        table,
        csv: None,
        status: 0,
    })
}

pub fn quotients(net: &Named, target: Option<&Named>, bound: usize) -> Result<Output, CliError> {
    let l = &net.network;
    let cols = match target {
        Some(t) => find_colorings_with_quotient(l, &t.network, bound)?,
        None => enumerate_balanced_colorings(l, bound)?,
    };
    let mut table = match target {
        Some(t) => format!("{} colorings of {} with quotient {}\n", cols.len(), net.name, t.name),
        None => format!("{} balanced colorings of {}\n", cols.len(), net.name),
    };
    let mut csv = String::from("coloring,cell,class\n");
    let mut rows = Vec::new();
    for (i, col) in cols.iter().enumerate() {
        let q = quotient(l, col)?;
        let _ = writeln!(table, "{i:>3}  {} classes  {}", col.class_count(), classes_text(l, col));
        for c in 0..l.len() {
            let _ = writeln!(csv, "{i},{},{}", l.id(c), col.class_of(c));
        }
        rows.push(json!({
            "classes": col.to_ids(l),
            "class_count": col.class_count(),
            "quotient_cells": q.network.cell_ids(),
        }));
    }
    let json = envelope(
        "quotients",
        json!({
            "network": net.name,
            "quotient": target.map(|t| &t.name),
            "count": cols.len(),
            "colorings": rows,
        }),
    );
    Ok(Output {
        json,
        table,
        csv: Some(csv),
        status: 0,
    })
}

pub fn lifts(n: &Named, l: &Named) -> Result<Output, CliError> {
    let class = classify_lift(&n.network, &l.network)?;
    let mut table = format!("{} -> {}: {}\n", n.name, l.name, classification_text(&class));
    let decomposition = match decompose_lift(&n.network, &l.network) {
        Ok(dec) => {
            let _ = writeln!(table, "coloring: {}", classes_text(&l.network, &dec.coloring));
            let mut steps = Vec::new();
            for (i, step) in dec.steps.iter().enumerate() {
                let _ = writeln!(
                    table,
                    "  step {}: {} ({} cells)",
                    i + 1,
                    classification_text(&step.classification),
                    step.network.len()
                );
                for s in &step.splits {
                    let _ = writeln!(table, "    split {} -> {}", s.cell, s.new_cells.join(" + "));
                }
                steps.push(json!({
                    "classification": step.classification,
                    "cells": step.network.cell_ids(),
                    "splits": step.splits,
                }));
            }
            json!({"ok": true, "coloring": dec.coloring.to_ids(&l.network), "steps": steps})
        }
        Err(e @ Error::NotDecomposable(_)) => {
            let _ = writeln!(table, "no decomposition: {e}");
            json!({"ok": false, "reason": e.to_string()})
        }
        Err(e) => return Err(e.into()),
    };
    let json = envelope(
        "lifts",
        json!({
            "base": n.name,
            "lift": l.name,
            "classification": class,
            "decomposition": decomposition,
        }),
    );
    Ok(Output {
        json,
        table,
        csv: None,
        status: 0,
    })
}

fn signature_line(n: &Network, i: usize, s: &BranchSignature) -> String {
    let cells: Vec<String> = (0..n.len())
        .filter(|&c| s.orders[c] >= 0)
        .map(|c| format!("{}:p={},s={:.6}", n.id(c), s.orders[c], s.slopes[c]))
        .collect();
    let body = if cells.is_empty() { "trivial".to_string() } else { cells.join(" ") };
    let delta = match s.delta {
        0 => "0",
        1 => "+1",
        _ => "-1",
    };
    format!("{i:>3}  delta={delta}  {body}")
}

pub fn branches(net: &Named, jet: &JetCoefficients, opts: EnumerationOptions) -> Result<Output, CliError> {
    let n = &net.network;
    let mut table = String::new();
    let mut csv = String::new();
    let body = match jet.bifurcation_type {
        BifurcationType::Internal => {
            let sigs = enumerate_branches_internal(n, jet, opts)?;
            let _ = writeln!(table, "{} signatures", sigs.len());
            csv.push_str("signature,delta,cell,order,slope,template\n");
            for (i, s) in sigs.iter().enumerate() {
                let _ = writeln!(table, "{}", signature_line(n, i, s));
                for c in 0..n.len() {
                    let _ = writeln!(
                        csv,
                        "{i},{},{},{},{:e},{}",
                        s.delta,
                        n.id(c),
                        s.orders[c],
                        s.slopes[c],
                        s.templates[c].render(n)
                    );
                }
            }
            json!({
                "bifurcation_type": "internal",
                "count": sigs.len(),
                "signatures": sigs.iter().map(|s| s.to_json(n)).collect::<Vec<_>>(),
            })
        }
        BifurcationType::Valency => {
            let pats = enumerate_branches_valency(n, jet)?;
            let _ = writeln!(table, "{} patterns", pats.len());
            csv.push_str("pattern,cell,nonzero,slope\n");
            let ffs = detect_layers(n).map_err(|e| e.into_error(n))?;
            for (i, p) in pats.iter().enumerate() {
                let ids: Vec<&str> = p.cells.iter().map(|&c| n.id(c)).collect();
                let body = if ids.is_empty() { "trivial".to_string() } else { ids.join(" ") };
                let _ = writeln!(table, "{i:>3}  {body}  slope={:.6}", p.slope);
                for &c in ffs.layer(0) {
                    let _ = writeln!(csv, "{i},{},{},{:e}", n.id(c), p.cells.contains(&c), p.slope);
                }
            }
            let rows: Vec<Value> = pats
                .iter()
                .map(|p| json!({"cells": p.cells.iter().map(|&c| n.id(c)).collect::<Vec<_>>(), "slope": p.slope}))
                .collect();
            json!({"bifurcation_type": "valency", "count": pats.len(), "patterns": rows})
        }
    };
    let mut json = envelope("branches", body);
    json["network"] = json!(net.name);
    Ok(Output {
        json,
        table,
        csv: Some(csv),
        status: 0,
    })
}

fn verdict_text(v: Verdict) -> &'static str {
    match v {
        Verdict::AllLifted => "AllLifted",
        Verdict::ExistsNotLifted => "ExistsNotLifted",
        Verdict::Undetermined => "Undetermined",
    }
}

pub fn lifting(n: &Named, l: &Named, jet: &JetCoefficients) -> Result<Output, CliError> {
    let (theorems, exhaustive, consistent): (Option<LiftingVerdict>, LiftingVerdict, bool) =
        match cross_check(&n.network, &l.network, jet) {
            Ok(cc) => (Some(cc.theorems), cc.exhaustive, cc.consistent),
            Err(Error::LiftNotClassified(_)) => {
                (None, ffn_core::decide_exhaustive(&n.network, &l.network, jet)?, true)
            }
            Err(e) => return Err(e.into()),
        };
    let mut table = format!(
        "{} (exhaustive); theorems: {}\n",
        verdict_text(exhaustive.verdict),
        theorems.as_ref().map_or("not classified", |t| verdict_text(t.verdict))
    );
    if let Some(t) = &theorems {
        let _ = writeln!(table, "deciding rule: {}", t.rule);
        for c in &t.checks {
            let _ = writeln!(table, "  {:<32} {:?}  {}", c.rule, c.status, c.detail);
        }
    }
    if let Some(col) = &exhaustive.coloring_used {
        let _ = writeln!(table, "lifted through: {}", classes_text(&l.network, col));
    }
    if !consistent {
        table.push_str("MISMATCH: theorem verdict contradicts the exhaustive verdict\n");
    }
    let json = envelope(
        "lifting",
        json!({
            "base": n.name,
            "lift": l.name,
            "exhaustive": exhaustive.to_json(&l.network),
            "theorems": theorems.as_ref().map(|t| t.to_json(&l.network)),
            "consistent": consistent,
        }),
    );
    Ok(Output {
        json,
        table,
        csv: None,
        status: if consistent { 0 } else { 4 },
    })
}

pub fn verify(net: &Named, jet: &JetCoefficients, opts: EnumerationOptions, cfg: &TraceConfig) -> Result<Output, CliError> {
    let n = &net.network;
    if jet.bifurcation_type != BifurcationType::Internal {
        return Err(CliError::Usage("verify traces internal-dynamics branches; pass --internal".into()));
    }
    let sigs = enumerate_branches_internal(n, jet, opts)?;
    let pcf = PolynomialCellFunction::new(jet.clone());
    let traces = [1i8, -1]
        .iter()
        .map(|&side| trace_branches(n, &pcf, side, cfg))
        .collect::<ffn_core::Result<Vec<_>>>()?;
    let report = match_numeric_to_signatures(&traces, &sigs);
    let mut table = String::new();
    for (t, side) in traces.iter().zip(&report.sides) {
        let expected = sigs.iter().filter(|s| s.on_side(t.side)).count();
        let _ = writeln!(
            table,
            "side {:+}: {} traced, {} expected, {} matched{}",
            t.side,
            t.branches.len(),
            expected,
            side.pairs.len(),
            if side.is_bijection() { "" } else { "  MISMATCH" }
        );
        for (b, why) in &side.unmatched_branches {
            let _ = writeln!(table, "  branch {b}: {why}");
        }
        for &i in &side.unmatched_signatures {
            let _ = writeln!(table, "  untraced: {}", signature_line(n, i, &sigs[i]).trim_start());
        }
        for why in &t.dropped {
            let _ = writeln!(table, "  dropped: {why}");
        }
    }
    let ok = report.is_bijection();
    let json = envelope(
        "verify",
        json!({
            "network": net.name,
            "bijection": ok,
            "match": report,
            "branches": traces_summary_json(n, &traces),
        }),
    );
    Ok(Output {
        json,
        table,
        csv: Some(traces_to_csv(n, &traces)),
        status: if ok { 0 } else { 4 },
    })
}
