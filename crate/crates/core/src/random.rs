//! Seeded generators for random feed-forward networks, lifts and jets.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::branches::JetCoefficients;
use crate::coloring::{enumerate_balanced_colorings, quotient, Coloring, DEFAULT_SIZE_BOUND};
use crate::network::{detect_layers, Network};

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomFfnConfig {
    pub max_cells: usize,
    pub max_edge_types: usize,
    pub max_first_layer: usize,
}

impl Default for RandomFfnConfig {
    fn default() -> Self {
        RandomFfnConfig {
            max_cells: 10,
            max_edge_types: 3,
            max_first_layer: 3,
        }
    }
}

fn layer_sizes<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomFfnConfig, k: usize, end_single: bool) -> Vec<usize> {
    loop {
        let total = rng.gen_range(1..=cfg.max_cells);
        let mut sizes = vec![rng.gen_range(1..=cfg.max_first_layer.min(total))];
        let mut left = total - sizes[0];
        while left > 0 {
            let min = sizes.last().unwrap().div_ceil(k);
            if min > left {
                break;
            }
            let s = rng.gen_range(min..=left.min(min + 2));
            sizes.push(s);
            left -= s;
        }
        if end_single {
            if k == 1 {
                // layers cannot shrink with one edge type
                sizes.iter_mut().for_each(|s| *s = 1);
            }
            while *sizes.last().unwrap() > 1 {
                let s = sizes.last().unwrap().div_ceil(k);
                sizes.push(s);
            }
            if sizes.iter().sum::<usize>() > cfg.max_cells {
                continue;
            }
        }
        return sizes;
    }
}

fn build<R: Rng + ?Sized>(rng: &mut R, k: usize, sizes: &[usize]) -> Network {
    let mut layers: Vec<Vec<usize>> = Vec::new();
    let mut next = 0;
    for &s in sizes {
        layers.push((next..next + s).collect());
        next += s;
    }
    let mut inputs = vec![Vec::new(); next];
    for &c in &layers[0] {
        inputs[c] = vec![c; k];
    }
    for j in 1..layers.len() {
        let prev = &layers[j - 1];
        let mut slots: Vec<(usize, usize)> =
            layers[j].iter().flat_map(|&c| (0..k).map(move |i| (c, i))).collect();
        slots.shuffle(rng);
        for &c in &layers[j] {
            inputs[c] = vec![usize::MAX; k];
        }
        // every cell of the previous layer feeds at least one slot
        for (idx, &(c, i)) in slots.iter().enumerate() {
            inputs[c][i] = if idx < prev.len() {
                prev[idx]
            } else {
                *prev.choose(rng).unwrap()
            };
        }
    }
    let cells = (0..next).map(|c| format!("c{c}")).collect();
    Network::new(cells, inputs).expect("generated network is well formed")
}

/// A random feed-forward network with at most `max_cells` cells.
pub fn random_ffn<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomFfnConfig) -> Network {
    let k = rng.gen_range(1..=cfg.max_edge_types);
    let sizes = layer_sizes(rng, cfg, k, false);
    build(rng, k, &sizes)
}

/// A random feed-forward network whose last layer is a single cell.
pub fn random_backward_connected_ffn<R: Rng + ?Sized>(rng: &mut R, cfg: &RandomFfnConfig) -> Network {
    let k = rng.gen_range(1..=cfg.max_edge_types);
    let sizes = layer_sizes(rng, cfg, k, true);
    build(rng, k, &sizes)
}

/// A random lift: `(N, L, ⋈)` with `N = L/⋈` a feed-forward network.
pub fn random_lift_pair<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &RandomFfnConfig,
    backward_connected: bool,
) -> (Network, Network, Coloring) {
    loop {
        let l = if backward_connected {
            random_backward_connected_ffn(rng, cfg)
        } else {
            random_ffn(rng, cfg)
        };
        let cols = enumerate_balanced_colorings(&l, DEFAULT_SIZE_BOUND).expect("small network");
        let col = cols.choose(rng).unwrap().clone();
        let n = quotient(&l, &col).expect("balanced").network;
        if detect_layers(&n).is_ok() {
            return (n, l, col);
        }
    }
}

fn magnitude<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let v = rng.gen_range(0.3..2.0);
    if rng.gen_bool(0.5) {
        v
    } else {
        -v
    }
}

/// Every nonempty subset of the values sums to at least `gap` in magnitude.
fn subset_sums_clear(values: &[f64], gap: f64) -> bool {
    (1..1usize << values.len()).all(|mask| {
        let s: f64 = (0..values.len()).filter(|b| mask >> b & 1 == 1).map(|b| values[b]).sum();
        s.abs() >= gap
    })
}

/// Internal jet with coefficients in `±[0.3, 2)` whose input coefficients
/// have no subset summing to near zero.
pub fn random_internal_jet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> JetCoefficients {
    loop {
        let f: Vec<f64> = (0..k).map(|_| magnitude(rng)).collect();
        if subset_sums_clear(&f, 0.1) {
            return JetCoefficients::internal(&f, magnitude(rng), magnitude(rng));
        }
    }
}

/// Valency jet: first-order terms summing to zero with `f_0` bounded away
/// from zero.
pub fn random_valency_jet<R: Rng + ?Sized>(rng: &mut R, k: usize) -> JetCoefficients {
    let mut f: Vec<f64> = (0..=k).map(|_| magnitude(rng)).collect();
    assert!(k >= 1, "a valency jet needs at least one input");
    f[k] = -f[..k].iter().sum::<f64>();
    JetCoefficients::valency(&f, magnitude(rng), magnitude(rng))
}
