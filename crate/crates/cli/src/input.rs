//! Loading networks and assembling jets from flags.

use std::path::{Path, PathBuf};

use clap::Args;
use ffn_core::random::{random_ffn, seeded, RandomFfnConfig};
use ffn_core::{corpus, parse_network, BifurcationType, JetCoefficients, Network};

use crate::CliError;

/// A loaded network and the name it is reported under.
pub struct Named {
    pub name: String,
    pub network: Network,
}

/// Resolve a network argument: an existing file, a corpus name (with or
/// without `.json`), or `random[:seed]`.
pub fn load_network(spec: &str, default_seed: u64) -> Result<Named, CliError> {
    if let Some(rest) = spec.strip_prefix("random") {
        let seed = match rest.strip_prefix(':') {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::Usage(format!("bad seed in `{spec}`")))?,
            None if rest.is_empty() => default_seed,
            None => return load_named(spec),
        };
        let network = random_ffn(&mut seeded(seed), &RandomFfnConfig::default());
        return Ok(Named {
            name: format!("random:{seed}"),
            network,
        });
    }
    load_named(spec)
}

fn load_named(spec: &str) -> Result<Named, CliError> {
    let path = Path::new(spec);
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    let file = if path.is_file() || path.components().count() > 1 {
        path.to_path_buf()
    } else {
        corpus::corpus_dir().join(format!("{stem}.json"))
    };
    let text = std::fs::read_to_string(&file).map_err(|e| CliError::Io { path: file.clone(), source: e })?;
    let network = parse_network(&text)?;
    Ok(Named { name: stem, network })
}

/// Jet coefficients given on the command line.
#[derive(Debug, Clone, Default, Args)]
pub struct JetArgs {
    /// Internal-dynamics bifurcation (f_0 = 0).
    #[arg(long, conflicts_with = "valency")]
    pub internal: bool,
    /// Valency bifurcation (sum of first-order terms is 0).
    #[arg(long)]
    pub valency: bool,
    /// Coefficient of the cell's own state.
    #[arg(long, allow_hyphen_values = true)]
    pub f0: Option<f64>,
    /// Input coefficients f_1..f_k, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub f: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub f00: Option<f64>,
    /// Mixed derivative in the state and lambda.
    #[arg(long, allow_hyphen_values = true)]
    pub f0l: Option<f64>,
    /// Second derivative `i,j,value`; may be repeated.
    #[arg(long, allow_hyphen_values = true)]
    pub fij: Vec<String>,
    /// Mixed lambda derivative `i,value`; may be repeated.
    #[arg(long, allow_hyphen_values = true)]
    pub fil: Vec<String>,
    /// JSON file with the full jet; flags override its entries.
    #[arg(long)]
    pub jet: Option<PathBuf>,
    /// Magnitude below which genericity quantities count as zero.
    #[arg(long, default_value_t = 0.0)]
    pub eps: f64,
}

fn index(s: &str, k: usize, flag: &str) -> Result<usize, CliError> {
    let i: usize = s
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{flag}: `{s}` is not an index")))?;
    if i > k {
        return Err(CliError::Usage(format!("--{flag}: index {i} exceeds {k}")));
    }
    Ok(i)
}

fn value(s: &str, flag: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{flag}: `{s}` is not a number")))
}

impl JetArgs {
    /// Build the jet; `warnings` collects flag/file conflicts.
    pub fn build(&self, warnings: &mut Vec<String>) -> Result<JetCoefficients, CliError> {
        let base: Option<JetCoefficients> = match &self.jet {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.clone(), source: e })?;
                Some(serde_json::from_str(&text).map_err(|e| ffn_core::Error::Parse {
                    line: e.line(),
                    column: e.column(),
                    message: format!("{}: {e}", path.display()),
                })?)
            }
            None => None,
        };
        let flag_type = match (self.internal, self.valency) {
            (true, _) => Some(BifurcationType::Internal),
            (_, true) => Some(BifurcationType::Valency),
            _ => None,
        };
        let ty = match (flag_type, &base) {
            (Some(t), Some(b)) if t != b.bifurcation_type => {
                warnings.push(format!("bifurcation type flag overrides {:?} from the jet file", b.bifurcation_type));
                t
            }
            (Some(t), _) => t,
            (None, Some(b)) => b.bifurcation_type,
            (None, None) => return Err(CliError::Usage("choose --internal or --valency".into())),
        };
        let mut jet = match (&base, &self.f) {
            (Some(b), Some(f)) if b.k != f.len() => {
                warnings.push(format!("--f has {} entries, jet file has {}; ignoring the file", f.len(), b.k));
                JetCoefficients::zeros(f.len(), ty)
            }
            (Some(b), _) => b.clone(),
            (None, Some(f)) => JetCoefficients::zeros(f.len(), ty),
            (None, None) => return Err(CliError::Usage("missing --f (or --jet)".into())),
        };
        jet.bifurcation_type = ty;
        let from_file = base.is_some();
        let mut set = |slot: &mut f64, v: f64, flag: &str| {
            if from_file && *slot != v {
                warnings.push(format!("--{flag} overrides the jet file ({} -> {v})", *slot));
            }
            *slot = v;
        };
        if let Some(f) = &self.f {
            for (i, &v) in f.iter().enumerate() {
                set(&mut jet.first_order[i + 1], v, "f");
            }
        }
        match (self.f0, ty) {
            (Some(v), _) => set(&mut jet.first_order[0], v, "f0"),
            // the valency condition fixes f_0 when it is not given
            (None, BifurcationType::Valency) if !from_file => jet.first_order[0] = -jet.input_sum(),
            _ => {}
        }
        if let Some(v) = self.f00 {
            set(&mut jet.second_order[0][0], v, "f00");
        }
        if let Some(v) = self.f0l {
            set(&mut jet.mixed_lambda[0], v, "f0l");
        }
        for spec in &self.fij {
            let parts: Vec<&str> = spec.split(',').collect();
            let [i, j, v] = parts[..] else {
                return Err(CliError::Usage(format!("--fij expects i,j,value, got `{spec}`")));
            };
            let (i, j, v) = (index(i, jet.k, "fij")?, index(j, jet.k, "fij")?, value(v, "fij")?);
            if from_file && jet.second_order[i][j] != v {
                warnings.push(format!("--fij overrides f_{i}{j} from the jet file"));
            }
            jet.set_second(i, j, v);
        }
        for spec in &self.fil {
            let parts: Vec<&str> = spec.split(',').collect();
            let [i, v] = parts[..] else {
                return Err(CliError::Usage(format!("--fil expects i,value, got `{spec}`")));
            };
            let (i, v) = (index(i, jet.k, "fil")?, value(v, "fil")?);
            if from_file && jet.mixed_lambda[i] != v {
                warnings.push(format!("--fil overrides f_{i}lambda from the jet file"));
            }
            jet.mixed_lambda[i] = v;
        }
        jet.check_nondegenerate(self.eps)?;
        Ok(jet)
    }
}
