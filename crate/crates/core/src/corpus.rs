//! Access to the bundled example networks.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::network::{parse_network, Network};

/// Environment variable overriding the corpus directory.
pub const CORPUS_ENV: &str = "FFN_CORPUS_DIR";

pub fn corpus_dir() -> PathBuf {
    match std::env::var_os(CORPUS_ENV) {
        Some(dir) => PathBuf::from(dir),
        None => PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus"),
    }
}

/// Load `<corpus>/<name>.json`.
pub fn load(name: &str) -> Result<Network> {
    let path = corpus_dir().join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Parse {
        line: 0,
        column: 0,
        message: format!("{}: {e}", path.display()),
    })?;
    parse_network(&text)
}
