//! Fixtures shared by the benchmarks in `benches/`.

use ffn_core::{corpus, JetCoefficients, Network};

pub fn network(name: &str) -> Network {
    corpus::load(name).unwrap_or_else(|e| panic!("corpus network {name}: {e}"))
}

/// A generic internal jet with `k` inputs.
pub fn internal_jet(k: usize) -> JetCoefficients {
    let f: Vec<f64> = (0..k).map(|i| 1.0 + 0.37 * i as f64).collect();
    JetCoefficients::internal(&f, -2.0, 1.0)
}
