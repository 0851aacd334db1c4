//! Flag definitions and `--config` merging.
//!
//! A config file holds `key = value` lines (`#` starts a comment); keys are
//! long flag names with or without the leading `--`, `_` and `-` being
//! interchangeable. Values from the file are spliced in front of the
//! command-line flags, so flags win over the file and the file wins over
//! built-in defaults and `KANSPOT_WORKERS`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, CommandFactory, Parser, Subcommand};
use kanspot_core::encoder::Variant;

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "kanspot", version, about = "Keyword spotting with Gram-polynomial KAN convolutions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a deterministic synthetic keyword corpus and noise bank.
    Synth(SynthArgs),
    /// Train an encoder on a labelled manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint: FRR at fixed FA/h per keyword.
    Eval(EvalArgs),
    /// Train and evaluate every variant at matched parameter budgets.
    Sweep(SweepArgs),
    /// Evaluate a checkpoint and write DET curves as CSV.
    Det(EvalArgs),
    /// Print parameter counts, or the width table for a budget.
    Paramcount(ParamcountArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// key = value file with defaults for any flag of this subcommand [default: none]
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Seed for every random stream
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads, 0 = one per core
    #[arg(long, env = "KANSPOT_WORKERS", default_value_t = 0)]
    pub workers: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 240)]
    pub train_positives: usize,
    #[arg(long, default_value_t = 0.5)]
    pub train_negative_hours: f64,
    #[arg(long, default_value_t = 200)]
    pub eval_positives: usize,
    #[arg(long, default_value_t = 1.0)]
    pub eval_negative_hours: f64,
    /// Length of each negative utterance
    #[arg(long, default_value_t = 3.0)]
    pub negative_seconds: f64,
    /// Length of each noise-bank recording
    #[arg(long, default_value_t = 5.0)]
    pub noise_seconds: f64,
    /// Comma-separated subset of the built-in keywords
    #[arg(long, default_value = "take_a_picture,volume_up,volume_down,play_music")]
    pub keywords: String,
}

#[derive(Debug, Clone, Args)]
pub struct ArchArgs {
    /// Spatial kernel size K
    #[arg(long, default_value_t = 5)]
    pub kernel: usize,
    /// Expansion ratio e
    #[arg(long, default_value_t = 6)]
    pub expansion: usize,
    /// Gram polynomial degree
    #[arg(long, default_value_t = 3)]
    pub degree: usize,
    /// Number of LiCo blocks
    #[arg(long, default_value_t = 5)]
    pub blocks: usize,
    /// Add w·silu(x) to every GKAN connection
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub base_term: bool,
    /// Per-channel scale/offset before each residual add
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    pub channel_affine: bool,
}

#[derive(Debug, Clone, Args)]
pub struct OptimArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.98)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub eps: f64,
    /// Utterances per optimiser step
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    /// SIL,FILLER,subword weights (3 values) or one per class (13 values)
    #[arg(long, default_value = "1,2,8")]
    pub class_weights: String,
    /// Per-epoch probability of noise-mixing an utterance
    #[arg(long, default_value_t = 0.0)]
    pub noise_prob: f64,
    /// Per-epoch probability of speed-perturbing an utterance
    #[arg(long, default_value_t = 0.0)]
    pub speed_prob: f64,
    /// Noise list for augmentation [default: none]
    #[arg(long, value_name = "FILE")]
    pub noise_list: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SnrArgs {
    /// Mean of the clipped-Gaussian SNR draw (dB), for augmentation and `--snr drawn`
    #[arg(long, default_value_t = 12.5)]
    pub snr_mean: f64,
    #[arg(long, default_value_t = 6.25)]
    pub snr_std: f64,
    #[arg(long, default_value_t = 0.0)]
    pub snr_min: f64,
    #[arg(long, default_value_t = 25.0)]
    pub snr_max: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: Common,
    /// Labelled training manifest
    #[arg(long, value_name = "MANIFEST")]
    pub train: PathBuf,
    /// Labelled validation manifest, scored after every epoch [default: none]
    #[arg(long, value_name = "MANIFEST")]
    pub valid: Option<PathBuf>,
    /// Run directory (init.ckpt, metrics.jsonl, epoch_NN.ckpt, model.ckpt)
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Block layout
    #[arg(long, default_value = "MLP", value_parser = parse_variant)]
    pub variant: Variant,
    /// Channel width w
    #[arg(long, default_value_t = 72)]
    pub w: usize,
    /// Parameter budget; when set, w is the largest width that fits [default: none]
    #[arg(long)]
    pub budget: Option<usize>,
    /// Start from this checkpoint instead of a fresh initialisation [default: none]
    #[arg(long, value_name = "CKPT")]
    pub init: Option<PathBuf>,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub snr: SnrArgs,
}

#[derive(Debug, Clone, Args)]
pub struct DecodeArgs {
    /// Comma-separated keywords to score
    #[arg(long, default_value = "take_a_picture,volume_up,volume_down,play_music")]
    pub keywords: String,
    /// FA/h operating points
    #[arg(long, default_value = "0.1,0.2,0.5,1.0")]
    pub targets: String,
    /// Minimum frames per subword state
    #[arg(long, default_value_t = 3)]
    pub min_frames: usize,
    /// Frames after a peak before it is emitted
    #[arg(long, default_value_t = 30)]
    pub debounce: usize,
    /// Scores below this never become detections
    #[arg(long, default_value_t = 0.01)]
    pub floor: f64,
    /// clean or noisy
    #[arg(long, default_value = "clean", value_parser = ["clean", "noisy"])]
    pub condition: String,
    /// Fixed SNR in dB, or `drawn` for the clipped-Gaussian draw
    #[arg(long = "snr", default_value = "drawn")]
    pub snr_mode: String,
    /// Noise list for the noisy condition [default: none]
    #[arg(long = "eval-noise", value_name = "FILE")]
    pub eval_noise: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "CKPT")]
    pub model: PathBuf,
    /// Evaluation manifest: positives carry a keyword, negatives NEGATIVE
    #[arg(long, value_name = "MANIFEST")]
    pub manifest: PathBuf,
    /// Output file (report for eval, CSV for det)
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[command(flatten)]
    pub snr: SnrArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, value_name = "MANIFEST")]
    pub train: PathBuf,
    /// Evaluation manifest with positives and negatives
    #[arg(long = "eval", value_name = "MANIFEST")]
    pub eval_manifest: PathBuf,
    /// Output table
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Comma-separated variants
    #[arg(long, default_value = "MLP,GKAN_MLP,MLP_GKAN,GKAN,GKAN_pre,GKAN_post,GKAN_mid,MLP_post")]
    pub variants: String,
    /// Comma-separated parameter budgets
    #[arg(long, default_value = "400000")]
    pub budget: String,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[command(flatten)]
    pub optim: OptimArgs,
    #[command(flatten)]
    pub decode: DecodeArgs,
    #[command(flatten)]
    pub snr: SnrArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ParamcountArgs {
    #[command(flatten)]
    pub common: Common,
    /// Single variant; with --w prints just its parameter count [default: MLP with --w, else all]
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<Variant>,
    /// Channel width; prints a single count [default: none, prints the width table]
    #[arg(long)]
    pub w: Option<usize>,
    /// Budget for the width table
    #[arg(long, default_value_t = 400_000)]
    pub budget: usize,
    #[command(flatten)]
    pub arch: ArchArgs,
}

pub fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse::<Variant>().map_err(|_| {
        let names: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

/// Turns config-file text into `--key value` pairs, rejecting keys the
/// subcommand does not accept.
pub fn config_flags(text: &str, sub: &str) -> Result<Vec<OsString>, CliError> {
    let cmd = Cli::command();
    // an unknown subcommand is reported by the parser itself
    let Some(sc) = cmd.find_subcommand(sub) else {
        return Ok(Vec::new());
    };
    let known: Vec<String> = sc
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::usage(line, format!("config line {}: expected key = value", n + 1)))?;
        let key = k.trim().trim_start_matches("--").replace('_', "-");
        if key == "config" || !known.contains(&key) {
            return Err(CliError::usage(k.trim(), format!("config line {}: unknown key for `{sub}`", n + 1)));
        }
        out.push(OsString::from(format!("--{key}")));
        out.push(OsString::from(v.trim()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_keys_map_to_flags() {
        let f = config_flags("# run\nlr = 0.5\nbatch_size=4  # small\n\n--epochs = 2\n", "train").unwrap();
        let f: Vec<_> = f.iter().map(|s| s.to_str().unwrap()).collect();
        assert_eq!(f, ["--lr", "0.5", "--batch-size", "4", "--epochs", "2"]);
    }

    #[test]
    fn unknown_config_key_names_the_token() {
        let e = config_flags("bogus = 1\n", "train").unwrap_err();
        assert_eq!(e.token.as_deref(), Some("bogus"));
        assert!(config_flags("config = x\n", "train").is_err());
        assert!(config_flags("no equals\n", "eval").is_err());
    }

    #[test]
    fn definitions_are_consistent() {
        Cli::command().debug_assert();
    }
}
