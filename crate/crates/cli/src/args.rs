use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Parser, Debug)]
#[command(name = "tvdmd", version, about = "Streaming time-varying DMD / DMDc experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic time-varying trajectory as CSV.
    Gen(GenCmd),
    /// Stream one model over a dataset and write a per-step report.
    Stream(StreamCmd),
    /// Run every model x mode combination and write a joined report.
    Compare(StreamCmd),
    /// Dump eigenvalues and modes of the model at one step.
    Spectrum(SpectrumCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelArg {
    Dmd,
    Dmdc,
    Online,
    Onlinec,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeArg {
    Weighted,
    Windowed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutArg {
    RowsAreChannels,
    RowsAreSamples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindArg {
    Projected,
    Exact,
}

fn one_or_many<'de, D, T>(d: D) -> Result<Vec<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany<T> {
        One(T),
        Many(Vec<T>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(v) => v,
    })
}

/// Synthetic system parameters.
#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct LtvArgs {
    /// State dimension [default: 20]
    #[arg(long)]
    pub n: Option<usize>,
    /// Input dimension [default: 2]
    #[arg(long)]
    pub l: Option<usize>,
    /// Number of snapshots [default: 200]
    #[arg(long)]
    pub m: Option<usize>,
    /// Modulation amplitude [default: 0.001]
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Modulation frequency, rad/sample [default: 1]
    #[arg(long)]
    pub omega: Option<f64>,
    /// Generator seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Spectral radius of the base system [default: 0.95]
    #[arg(long)]
    pub margin: Option<f64>,
}

/// Where the snapshots come from: `--data` or the synthetic generator.
#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct DataArgs {
    /// Snapshot CSV; without it a synthetic trajectory is generated
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// CSV orientation [default: rows-are-samples]
    #[arg(long)]
    pub layout: Option<LayoutArg>,
    /// Treat the last L channels of --data as inputs [default: 0]
    #[arg(long)]
    pub input_channels: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub ltv: LtvArgs,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct ModelArgs {
    /// Model kind; compare accepts a comma-separated list [default: dmd]
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    pub model: Vec<ModelArg>,
    /// Forgetting mode; compare accepts a comma-separated list [default: weighted]
    #[arg(long, value_delimiter = ',')]
    #[serde(deserialize_with = "one_or_many")]
    pub mode: Vec<ModeArg>,
    /// Discount factor for weighted mode [default: 0.9]
    #[arg(long)]
    pub rho: Option<f64>,
    /// Window width for windowed mode [default: 40]
    #[arg(long)]
    pub window: Option<usize>,
    /// Keep singular values above this absolute threshold
    #[arg(long)]
    pub sigma_thr: Option<f64>,
    /// Keep singular values above this fraction of the largest
    #[arg(long)]
    pub rel_thr: Option<f64>,
    /// Keep this many singular values
    #[arg(long)]
    pub rank: Option<usize>,
    /// DMDc state-basis absolute threshold
    #[arg(long)]
    pub state_sigma_thr: Option<f64>,
    /// DMDc state-basis rank
    #[arg(long)]
    pub state_rank: Option<usize>,
    /// Forecast horizon in steps [default: 10]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Pairs used for the batch initialization [default: window]
    #[arg(long)]
    pub init_window: Option<usize>,
    /// Sampling period for continuous-time eigenvalues [default: 1]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Baseline P = alpha I [default: 1e6 / mean square of the init data]
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Seed the baseline with the exact inverse Gramian
    #[arg(long)]
    pub exact_seed: bool,
    /// Track only the reduced operator, not the full n x n matrix
    #[arg(long)]
    pub reduced_only: bool,
    /// Score nrmse on this channel only [default: mean over channels]
    #[arg(long)]
    pub nrmse_channel: Option<usize>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct GenCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub ltv: LtvArgs,
    /// Output orientation [default: rows-are-samples]
    #[arg(long)]
    pub layout: Option<LayoutArg>,
    /// Output CSV path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of the flags above
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct StreamCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Report format [default: csv]
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// Report path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Store the run's wall-clock time in the report metadata
    #[arg(long)]
    pub record_timing: bool,
    /// JSON file with defaults for any of the flags above
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Default, Clone, Serialize, Deserialize)]
#[serde(default, rename_all = "kebab-case")]
pub struct SpectrumCmd {
    #[command(flatten)]
    #[serde(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// Pair index after which to dump the spectrum
    #[arg(long)]
    pub step: Option<usize>,
    /// Mode lifting [default: exact]
    #[arg(long)]
    pub kind: Option<KindArg>,
    /// Output format [default: csv]
    #[arg(long)]
    pub format: Option<FormatArg>,
    /// Output path
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with defaults for any of the flags above
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn is_unset(v: &Value) -> bool {
    match v {
        Value::Null | Value::Bool(false) => true,
        Value::Array(a) => a.is_empty(),
        _ => false,
    }
}

/// Overlay the flags actually given on top of the JSON config file.
pub fn resolve<S>(flags: S, config: Option<&Path>) -> Result<S, CliError>
where
    S: Serialize + DeserializeOwned + Default,
{
    let Some(path) = config else {
        return Ok(flags);
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let file: Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let known = match serde_json::to_value(S::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("argument structs serialize to objects"),
    };
    if let Some(k) = file.keys().find(|k| !known.contains_key(*k)) {
        return Err(CliError::Usage(format!("{}: unknown key '{k}'", path.display())));
    }
    let mut merged = file;
    if let Value::Object(given) = serde_json::to_value(&flags).expect("serializable") {
        merged.extend(given.into_iter().filter(|(_, v)| !is_unset(v)));
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"rho": 0.5, "window": 12, "model": "dmdc", "seed": 3, "exact-seed": true}}"#).unwrap();
        let flags = StreamCmd {
            model: ModelArgs {
                rho: Some(0.8),
                ..Default::default()
            },
            ..Default::default()
        };
        let s = resolve(flags, Some(f.path())).unwrap();
        assert_eq!(s.model.rho, Some(0.8));
        assert_eq!(s.model.window, Some(12));
        assert_eq!(s.model.model, vec![ModelArg::Dmdc]);
        assert_eq!(s.data.ltv.seed, Some(3));
        assert!(s.model.exact_seed);
    }

    #[test]
    fn unknown_key_is_usage_error() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        write!(f, r#"{{"rhoo": 0.5}}"#).unwrap();
        assert!(matches!(resolve(StreamCmd::default(), Some(f.path())), Err(CliError::Usage(_))));
    }
}
