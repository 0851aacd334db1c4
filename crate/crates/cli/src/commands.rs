use std::path::Path;
use std::str::FromStr;

use kanspot_core::decoder::{default_keywords, DecoderParams, KeywordSpec};
use kanspot_core::encoder::{load_checkpoint, model_param_count, save_checkpoint, width_for_budget, Model, Variant, VariantConfig};
use kanspot_core::evaluator::{evaluate, variant_sweep, write_det, Condition, EvalConfig, SnrSetting, SweepConfig};
use kanspot_core::frontend::{load_noise_bank, synth_dataset, FrontendConfig, Manifest, SnrDistribution, SynthSpec, Waveform};
use kanspot_core::rng::stream_rng;
use kanspot_core::trainer::{load_train_set, train as run_training, AdamConfig, TrainConfig};
use kanspot_core::vocab::N_CLASSES;
use kanspot_core::Error;

use crate::args::{
    parse_variant, ArchArgs, DecodeArgs, EvalArgs, OptimArgs, ParamcountArgs, SnrArgs, SweepArgs, SynthArgs,
    TrainArgs,
};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn parse_list<T: FromStr>(flag: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse::<T>().map_err(|_| CliError::usage(x, format!("invalid value in --{flag}"))))
        .collect()
}

fn keywords(s: &str) -> Result<Vec<KeywordSpec>> {
    let all = default_keywords();
    let picked = s
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|name| {
            all.iter()
                .find(|k| k.name == name)
                .cloned()
                .ok_or_else(|| CliError::usage(name, "unknown keyword"))
        })
        .collect::<Result<Vec<_>>>()?;
    if picked.is_empty() {
        return Err(CliError::usage(s, "--keywords is empty"));
    }
    Ok(picked)
}

fn snr_distribution(a: &SnrArgs) -> Result<SnrDistribution> {
    if !(a.snr_std > 0.0 && a.snr_std.is_finite()) {
        return Err(CliError::usage(a.snr_std.to_string(), "--snr-std must be positive"));
    }
    if !(a.snr_min <= a.snr_max) || !a.snr_mean.is_finite() {
        return Err(CliError::usage(format!("{}..{}", a.snr_min, a.snr_max), "invalid SNR range"));
    }
    Ok(SnrDistribution {
        mean: a.snr_mean,
        std: a.snr_std,
        lo: a.snr_min,
        hi: a.snr_max,
    })
}

fn arch(a: &ArchArgs, variant: Variant, width: usize) -> VariantConfig {
    VariantConfig {
        kernel: a.kernel,
        expansion: a.expansion,
        degree: a.degree,
        n_blocks: a.blocks,
        n_features: FrontendConfig::default().n_mels,
        gkan_base_term: a.base_term,
        channel_affine: a.channel_affine,
        ..VariantConfig::new(variant, width)
    }
}

fn train_config(a: &OptimArgs, snr: &SnrArgs, seed: u64) -> Result<TrainConfig> {
    let w: Vec<f64> = parse_list("class-weights", &a.class_weights)?;
    let class_weights = match w.len() {
        3 => (0..N_CLASSES).map(|c| w[c.min(2)]).collect(),
        N_CLASSES => w,
        _ => {
            return Err(CliError::usage(
                a.class_weights.clone(),
                format!("--class-weights needs 3 or {N_CLASSES} values"),
            ))
        }
    };
    let cfg = TrainConfig {
        adam: AdamConfig {
            lr: a.lr,
            beta1: a.beta1,
            beta2: a.beta2,
            eps: a.eps,
        },
        batch_size: a.batch_size,
        epochs: a.epochs,
        class_weights,
        seed,
        noise_prob: a.noise_prob,
        speed_prob: a.speed_prob,
        snr: snr_distribution(snr)?,
    };
    cfg.validate()?;
    if cfg.noise_prob > 0.0 && a.noise_list.is_none() {
        return Err(CliError::usage("--noise-prob", "noise augmentation needs --noise-list"));
    }
    Ok(cfg)
}

fn noise_bank(list: Option<&Path>) -> Result<Vec<Waveform>> {
    Ok(match list {
        Some(p) => load_noise_bank(p)?,
        None => Vec::new(),
    })
}

fn eval_config(a: &DecodeArgs, snr: &SnrArgs, seed: u64) -> Result<EvalConfig> {
    let condition = match a.condition.as_str() {
        "clean" => Condition::Clean,
        _ if a.snr_mode == "drawn" => Condition::Noisy(SnrSetting::Drawn(snr_distribution(snr)?)),
        _ => {
            let db: f64 = a
                .snr_mode
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| CliError::usage(a.snr_mode.clone(), "--snr must be a number of dB or `drawn`"))?;
            Condition::Noisy(SnrSetting::Fixed(db))
        }
    };
    if condition != Condition::Clean && a.eval_noise.is_none() {
        return Err(CliError::usage("--condition", "the noisy condition needs --eval-noise"));
    }
    let targets: Vec<f64> = parse_list("targets", &a.targets)?;
    if let Some(t) = targets.iter().find(|t| !(**t >= 0.0)) {
        return Err(CliError::usage(t.to_string(), "FA/h targets must be non-negative"));
    }
    if targets.is_empty() {
        return Err(CliError::usage(a.targets.clone(), "--targets is empty"));
    }
    Ok(EvalConfig {
        keywords: keywords(&a.keywords)?,
        decoder: DecoderParams {
            min_frames: a.min_frames,
            debounce_frames: a.debounce,
            floor: a.floor,
            ..DecoderParams::default()
        },
        frontend: FrontendConfig::default(),
        condition,
        seed,
        targets,
    })
}

fn split(m: &Manifest) -> (Manifest, Manifest) {
    (m.filtered(|e| e.is_positive()), m.filtered(|e| !e.is_positive()))
}

pub fn synth(a: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        keywords: keywords(&a.keywords)?,
        train_positives: a.train_positives,
        train_negative_hours: a.train_negative_hours,
        eval_positives: a.eval_positives,
        eval_negative_hours: a.eval_negative_hours,
        negative_seconds: a.negative_seconds,
        noise_seconds: a.noise_seconds,
        seed: a.common.seed,
    };
    let out = synth_dataset(&spec, &a.out)?;
    println!("train\t{}", out.train_manifest.display());
    println!("eval\t{}", out.eval_manifest.display());
    println!("noise\t{}", out.noise_list.display());
    Ok(())
}

pub fn train(a: &TrainArgs) -> Result<()> {
    let seed = a.common.seed;
    let cfg = train_config(&a.optim, &a.snr, seed)?;
    let mut model = match &a.init {
        Some(p) => load_checkpoint::<f64>(p)?,
        None => {
            let mut shape = arch(&a.arch, a.variant, a.w);
            if let Some(b) = a.budget {
                shape.width = width_for_budget(&shape, b)?;
            }
            Model::new(&shape, &mut stream_rng(seed, "init", 0))?
        }
    };
    let fe = FrontendConfig::default();
    let noise = noise_bank(a.optim.noise_list.as_deref())?;
    let keep_audio = cfg.noise_prob > 0.0 || cfg.speed_prob > 0.0;
    let set = load_train_set(&Manifest::load(&a.train)?, &fe, keep_audio, noise)?;
    let valid = match &a.valid {
        Some(p) => Some(load_train_set(&Manifest::load(p)?, &fe, false, Vec::new())?),
        None => None,
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    save_checkpoint(&model, &a.out.join("init.ckpt"))?;
    let report = run_training(&mut model, &set, valid.as_ref(), &cfg, Some(&a.out))?;
    let c = model.config();
    println!("model\t{}\tw={}\tparams={}", c.variant, c.width, model.param_count());
    for split in ["train", "valid"] {
        if let Some(m) = report.last(split) {
            println!("{split}\tepoch={}\tloss={:.6}\tframe_accuracy={:.4}", m.epoch, m.loss, m.frame_accuracy);
        }
    }
    println!("checkpoint\t{}", a.out.join("model.ckpt").display());
    Ok(())
}

pub fn eval(a: &EvalArgs, det: bool) -> Result<()> {
    let cfg = eval_config(&a.decode, &a.snr, a.common.seed)?;
    let model = load_checkpoint::<f64>(&a.model)?;
    let (pos, neg) = split(&Manifest::load(&a.manifest)?);
    let noise = noise_bank(a.decode.eval_noise.as_deref())?;
    let report = evaluate(&model, &pos, &neg, &cfg, &noise)?;
    if det {
        write_det(&report, &a.out)?;
    } else {
        report.save(&a.out)?;
    }
    let pooled: Vec<String> = report
        .targets
        .iter()
        .zip(report.pooled_frr())
        .map(|(t, f)| format!("FRR@{t}={:.2}%", 100.0 * f))
        .collect();
    println!("pooled\t{}", pooled.join("\t"));
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> Result<()> {
    let seed = a.common.seed;
    let variants = a
        .variants
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|v| parse_variant(v).map_err(|msg| CliError::usage(v, msg)))
        .collect::<Result<Vec<_>>>()?;
    let budgets: Vec<usize> = parse_list("budget", &a.budget)?;
    let cfg = SweepConfig {
        template: arch(&a.arch, Variant::Mlp, 1),
        train: train_config(&a.optim, &a.snr, seed)?,
        eval: eval_config(&a.decode, &a.snr, seed)?,
    };
    let fe = FrontendConfig::default();
    let keep_audio = cfg.train.noise_prob > 0.0 || cfg.train.speed_prob > 0.0;
    let train_set = load_train_set(
        &Manifest::load(&a.train)?,
        &fe,
        keep_audio,
        noise_bank(a.optim.noise_list.as_deref())?,
    )?;
    let (pos, neg) = split(&Manifest::load(&a.eval_manifest)?);
    let noise = noise_bank(a.decode.eval_noise.as_deref())?;
    let table = variant_sweep(&budgets, &variants, &cfg, &train_set, &pos, &neg, &noise)?;
    let text = table.to_text();
    std::fs::write(&a.out, &text).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    print!("{text}");
    Ok(())
}

pub fn paramcount(a: &ParamcountArgs) -> Result<()> {
    if let Some(w) = a.w {
        let cfg = arch(&a.arch, a.variant.unwrap_or(Variant::Mlp), w);
        cfg.validate()?;
        println!("{}", model_param_count(&cfg));
        return Ok(());
    }
    let variants = match a.variant {
        Some(v) => vec![v],
        None => Variant::ALL.to_vec(),
    };
    println!("variant\tw\tsize\t(budget {})", a.budget);
    for v in variants {
        let shape = arch(&a.arch, v, 1);
        match width_for_budget(&shape, a.budget) {
            Ok(w) => println!("{v}\t{w}\t{}", model_param_count(&shape.with_width(w))),
            Err(Error::Infeasible { minimum, .. }) => println!("{v}\t-\t-\tinfeasible (minimum {minimum})"),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
