//! Test-side oracles written independently of the library's enumerators.
#![allow(dead_code)]

use ffn_core::{BranchSignature, JetCoefficients, Network};

#[derive(Debug, Clone, PartialEq)]
pub struct Sig {
    pub delta: i8,
    pub orders: Vec<i32>,
    pub slopes: Vec<f64>,
}

impl From<&BranchSignature> for Sig {
    fn from(s: &BranchSignature) -> Self {
        Sig {
            delta: s.delta,
            orders: s.orders.clone(),
            slopes: s.slopes.clone(),
        }
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-300)
}

/// Same δ and orders, slopes within `rel`.
pub fn same_sig(a: &Sig, b: &Sig, rel: f64) -> bool {
    a.delta == b.delta
        && a.orders == b.orders
        && a.slopes.iter().zip(&b.slopes).all(|(x, y)| (*x == 0.0 && *y == 0.0) || close(*x, *y, rel))
}

/// Multiset equality up to slope tolerance.
pub fn same_set(a: &[Sig], b: &[Sig], rel: f64) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut used = vec![false; b.len()];
    a.iter().all(|x| {
        match (0..b.len()).find(|&j| !used[j] && same_sig(x, &b[j], rel)) {
            Some(j) => {
                used[j] = true;
                true
            }
            None => false,
        }
    })
}

/// Cells fixed by every input map, then layers by longest path.
pub fn layers_of(n: &Network) -> Vec<usize> {
    let mut layer = vec![usize::MAX; n.len()];
    fn depth(n: &Network, c: usize, layer: &mut Vec<usize>) -> usize {
        if layer[c] != usize::MAX {
            return layer[c];
        }
        let d = if n.inputs(c).iter().all(|&s| s == c) {
            0
        } else {
            1 + n.inputs(c).iter().map(|&s| depth(n, s, layer)).max().unwrap()
        };
        layer[c] = d;
        d
    }
    for c in 0..n.len() {
        depth(n, c, &mut layer);
    }
    layer
}

/// Ω.1 to Ω.6 plus the rule that δ ≠ 0 needs an order ≥ 1.
pub fn omega_holds(n: &Network, jet: &JetCoefficients, s: &Sig, rel: f64) -> bool {
    let f00 = jet.second_order[0][0];
    let f0l = jet.mixed_lambda[0];
    let delta = f64::from(s.delta);
    if s.delta == 0 && s.orders.iter().any(|&p| p > 0) {
        return false;
    }
    if s.delta != 0 && s.orders.iter().all(|&p| p < 1) {
        return false;
    }
    for c in 0..n.len() {
        let p = s.orders[c];
        let ins = n.inputs(c);
        let pin: Vec<i32> = ins.iter().map(|&x| s.orders[x]).collect();
        if p < -1 || (p == -1) != (s.slopes[c] == 0.0) {
            return false;
        }
        if p == -1 {
            if pin.iter().any(|&q| q != -1) {
                return false;
            }
            continue;
        }
        let top = *pin.iter().max().unwrap();
        if top != p - 1 {
            return false;
        }
        if p == 0 {
            if !close(s.slopes[c], -2.0 * f0l / f00, rel) {
                return false;
            }
            continue;
        }
        let sum: f64 = ins
            .iter()
            .enumerate()
            .filter(|&(_, &x)| s.orders[x] == top)
            .map(|(i, &x)| jet.first_order[i + 1] * s.slopes[x])
            .sum();
        let radicand = -(2.0 * delta / f00) * sum;
        if !(radicand > 0.0) || !close(s.slopes[c].abs(), radicand.sqrt(), rel) {
            return false;
        }
    }
    true
}

fn topo(n: &Network) -> Vec<usize> {
    let l = layers_of(n);
    let mut cells: Vec<usize> = (0..n.len()).collect();
    cells.sort_by_key(|&c| (l[c], c));
    cells
}

/// Brute force: every onset set, every slope sign vector, every δ, kept when
/// `omega_holds` accepts it.
pub fn naive_omega(n: &Network, jet: &JetCoefficients) -> Vec<Sig> {
    let order = topo(n);
    let f00 = jet.second_order[0][0];
    let f0l = jet.mixed_lambda[0];
    let mut out = Vec::new();
    for onset in 0u64..1 << n.len() {
        let mut p = vec![-1i32; n.len()];
        for &c in &order {
            let top = n.inputs(c).iter().filter(|&&x| x != c).map(|&x| p[x]).max().unwrap_or(-1);
            p[c] = if onset >> c & 1 == 1 {
                0
            } else if top >= 0 {
                top + 1
            } else {
                -1
            };
        }
        let roots: Vec<usize> = order.iter().copied().filter(|&c| p[c] >= 1).collect();
        for delta in [-1i8, 0, 1] {
            for signs in 0u64..1 << roots.len() {
                let mut s = vec![0.0; n.len()];
                for &c in &order {
                    s[c] = match p[c] {
                        -1 => 0.0,
                        0 => -2.0 * f0l / f00,
                        pc => {
                            let sum: f64 = n
                                .inputs(c)
                                .iter()
                                .enumerate()
                                .filter(|&(_, &x)| p[x] == pc - 1)
                                .map(|(i, &x)| jet.first_order[i + 1] * s[x])
                                .sum();
                            let r = -(2.0 * f64::from(delta) / f00) * sum;
                            let k = roots.iter().position(|&x| x == c).unwrap();
                            let sign = if signs >> k & 1 == 1 { -1.0 } else { 1.0 };
                            sign * r.max(0.0).sqrt()
                        }
                    };
                }
                let sig = Sig {
                    delta,
                    orders: p.clone(),
                    slopes: s,
                };
                if omega_holds(n, jet, &sig, 1e-12) {
                    out.push(sig);
                }
            }
        }
    }
    out
}

fn layer_sizes(n: &Network) -> Vec<usize> {
    let l = layers_of(n);
    let mut sizes = vec![0; l.iter().max().unwrap() + 1];
    for j in l {
        sizes[j] += 1;
    }
    sizes
}

/// `b` is a basic lift of `a`: some coloring of `b` has quotient `a`, the
/// layer-size profiles fit one of the two basic shapes, and the induced
/// projection sends layers onto layers accordingly.
pub fn is_basic_lift(a: &Network, b: &Network) -> bool {
    use ffn_core::{find_colorings_with_quotient, lift_projection, networks_equal};
    if a.len() >= b.len() || networks_equal(a, b).is_some() {
        return false;
    }
    let (sa, sb) = (layer_sizes(a), layer_sizes(b));
    // target layer in `a` for each layer of `b`
    let target: Vec<usize> = if sb.len() > sa.len() {
        let d = sb.len() - sa.len();
        if sb[..=d].iter().any(|&s| s != sa[0]) || sb[d + 1..] != sa[1..] {
            return false;
        }
        (0..sb.len()).map(|j| j.saturating_sub(d)).collect()
    } else if sb.len() == sa.len() && (0..sa.len()).filter(|&j| sa[j] != sb[j]).count() == 1 {
        (0..sb.len()).collect()
    } else {
        return false;
    };
    let (la, lb) = (layers_of(a), layers_of(b));
    let Ok(cols) = find_colorings_with_quotient(b, a, 12) else { return false };
    cols.iter().any(|col| {
        let proj = lift_projection(a, b, col).unwrap();
        (0..b.len()).all(|y| la[proj[y]] == target[lb[y]])
            && (0..a.len()).all(|x| (0..b.len()).any(|y| proj[y] == x && target[lb[y]] == la[x]))
    })
}

/// Breadth-first search for a chain of basic lifts from `n` to `l` through
/// quotients of `l` with at most `max_cells` cells.
pub fn chain_of_basic_lifts_exists(n: &Network, l: &Network, max_cells: usize) -> bool {
    use ffn_core::{detect_layers, enumerate_balanced_colorings, networks_equal, quotient};
    let mut nodes: Vec<Network> = Vec::new();
    for col in enumerate_balanced_colorings(l, 12).unwrap() {
        let q = quotient(l, &col).unwrap().network;
        let endpoint = networks_equal(&q, n).is_some() || q.len() == l.len();
        if q.len() > max_cells && !endpoint {
            continue;
        }
        if detect_layers(&q).is_ok() && !nodes.iter().any(|x| networks_equal(x, &q).is_some()) {
            nodes.push(q);
        }
    }
    let Some(start) = nodes.iter().position(|x| networks_equal(x, n).is_some()) else {
        return false;
    };
    let goal = nodes.iter().position(|x| networks_equal(x, l).is_some()).unwrap();
    let mut seen = vec![false; nodes.len()];
    let mut queue = std::collections::VecDeque::from([start]);
    seen[start] = true;
    while let Some(a) = queue.pop_front() {
        if a == goal && a != start {
            return true;
        }
        for b in 0..nodes.len() {
            if !seen[b] && is_basic_lift(&nodes[a], &nodes[b]) {
                seen[b] = true;
                queue.push_back(b);
            }
        }
    }
    false
}
