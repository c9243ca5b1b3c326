use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use deepxi::corpus::{build_test_manifest, list_wavs, load_wav, render_manifest, save_wav, Manifest};
use deepxi::dd::{dd_track, enhance_dd, DdConfig};
use deepxi::dsp::{istft, stft, AnalysisConfig, AudioSignal};
use deepxi::eval::{score_manifest, scores_to_csv};
use deepxi::gain::{apply_gain, apply_gain_values, GainRule};
use deepxi::neural::{infer_xi_spec, load_model, save_model, train, AdamConfig, Mode, NetworkParams, NetworkShape, TrainConfig};
use deepxi::xi::{estimate_stats, oracle_xi, XiStats, NOISE_POWER_FLOOR};

use crate::config::ConfigFile;
use crate::{Cli, Command, EnhanceArgs, MixArgs, SnrRange, StatsArgs, TrainArgs, UsageError, WerArgs};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Ctx {
    config: ConfigFile,
    seed: u64,
    jobs: usize,
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let seed = config.resolve("seed", cli.seed, 0u64)?;
    let default_jobs = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let jobs = config.resolve("jobs", cli.jobs, default_jobs)?;
    if jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global().context("starting worker threads")?;
    let ctx = Ctx { config, seed, jobs };
    match cli.command {
        Command::Stats(a) => cmd_stats(&ctx, a),
        Command::Train(a) => cmd_train(&ctx, a),
        Command::Enhance(a) => cmd_enhance(&ctx, a),
        Command::Mix(a) => cmd_mix(&ctx, a),
        Command::Wer(a) => cmd_wer(a),
    }
}

fn snr_config(ctx: &Ctx, snr: &SnrRange) -> Result<TrainConfig> {
    let d = TrainConfig::default();
    let cfg = TrainConfig {
        snr_min: ctx.config.resolve("snr-min", snr.snr_min, d.snr_min)?,
        snr_max: ctx.config.resolve("snr-max", snr.snr_max, d.snr_max)?,
        snr_step: ctx.config.resolve("snr-step", snr.snr_step, d.snr_step)?,
        ..d
    };
    cfg.snr_levels().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn load_dir(dir: &Path) -> Result<Vec<AudioSignal>> {
    let paths = list_wavs(dir)?;
    if paths.is_empty() {
        bail!("{}: no .wav files", dir.display());
    }
    paths.iter().map(|p| load_wav(p).map_err(Into::into)).collect()
}

fn cmd_stats(ctx: &Ctx, a: StatsArgs) -> Result<()> {
    let levels = snr_config(ctx, &a.snr)?.snr_levels()?;
    let clean = load_dir(&a.clean)?;
    let noise = load_dir(&a.noise)?;
    let stats = estimate_stats(&clean, &noise, &levels, ctx.seed)?;
    stats.save(&a.out)?;
    eprintln!("stats: {} frames from {} utterances -> {}", stats.n_samples, clean.len(), a.out.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: TrainArgs) -> Result<()> {
    let c = &ctx.config;
    let d = TrainConfig::default();
    let mode: Mode = c.resolve("mode", a.mode, "uni".to_string())?.parse().map_err(|e: deepxi::Error| usage(e.to_string()))?;
    let shape = NetworkShape {
        mode,
        n_blocks: c.resolve("blocks", a.blocks, 2)?,
        cell_size: c.resolve("cell-size", a.cell_size, 64)?,
        ..NetworkShape::default()
    };
    shape.validate().map_err(|e| usage(e.to_string()))?;
    let cfg = TrainConfig {
        batch_size: c.resolve("batch-size", a.batch_size, d.batch_size)?,
        epochs: c.resolve("epochs", a.epochs, d.epochs)?,
        adam: AdamConfig { learn_rate: c.resolve("learn-rate", a.learn_rate, d.adam.learn_rate)?, ..d.adam },
        grad_clip_norm: c.resolve("clip-norm", a.clip_norm, d.grad_clip_norm)?,
        rng_seed: ctx.seed.wrapping_add(1),
        ..snr_config(ctx, &a.snr)?
    };
    cfg.validate().map_err(|e| usage(e.to_string()))?;

    let stats = XiStats::load(&a.stats).context("loading statistics")?;
    let clean = load_dir(&a.clean)?;
    let noise = load_dir(&a.noise)?;
    let mut params = NetworkParams::init(&shape, ctx.seed)?;
    let report = train(&mut params, &clean, &noise, &stats, &cfg)?;

    save_model(&params, &a.model_out)?;
    let mut csv = String::from("batch,loss\n");
    for (i, l) in report.loss_history.iter().enumerate() {
        writeln!(csv, "{i},{l}").unwrap();
    }
    fs::write(&a.loss_csv, csv).with_context(|| format!("writing {}", a.loss_csv.display()))?;
    for (e, m) in report.epoch_means().iter().enumerate() {
        eprintln!("epoch {:>3}: mean loss {m:.6}", e + 1);
    }
    Ok(())
}

enum Estimator {
    Neural { model: PathBuf, stats: PathBuf },
    Dd,
    Oracle { clean: PathBuf, noise: PathBuf },
}

fn resolve_estimator(ctx: &Ctx, a: &EnhanceArgs) -> Result<Estimator> {
    let c = &ctx.config;
    let kind = c.resolve("estimator", a.estimator.clone(), "neural".to_string())?;
    let model = c.resolve_opt("model", a.model.clone())?;
    let stats = c.resolve_opt("stats", a.stats.clone())?;
    let (clean, noise) = (a.clean.clone(), a.noise.clone());
    match kind.as_str() {
        "neural" => {
            if clean.is_some() || noise.is_some() {
                return Err(usage("--clean/--noise are only valid with --estimator oracle"));
            }
            match (model, stats) {
                (Some(model), Some(stats)) => Ok(Estimator::Neural { model, stats }),
                _ => Err(usage("--estimator neural requires --model and --stats")),
            }
        }
        "dd" => {
            if clean.is_some() || noise.is_some() || a.model.is_some() || a.stats.is_some() {
                return Err(usage("--estimator dd takes no --model/--stats/--clean/--noise"));
            }
            Ok(Estimator::Dd)
        }
        "oracle" => {
            if a.model.is_some() || a.stats.is_some() {
                return Err(usage("--model/--stats are only valid with --estimator neural"));
            }
            match (clean, noise) {
                (Some(clean), Some(noise)) => Ok(Estimator::Oracle { clean, noise }),
                _ => Err(usage("--estimator oracle requires --clean and --noise")),
            }
        }
        other => Err(usage(format!("unknown estimator '{other}' (neural|dd|oracle)"))),
    }
}

fn cmd_enhance(ctx: &Ctx, a: EnhanceArgs) -> Result<()> {
    let estimator = resolve_estimator(ctx, &a)?;
    let rule: GainRule = ctx.config.resolve("gain", a.gain.clone(), "srwf".to_string())?.parse().map_err(|e: deepxi::Error| usage(e.to_string()))?;
    let noisy = load_wav(&a.input)?;
    let cfg = AnalysisConfig::default();
    let spec = stft(&noisy, &cfg)?;

    let enhanced = if a.unity_gain {
        istft(&apply_gain_values(&spec, &vec![1.0; spec.magnitude.len()])?, noisy.len())?
    } else {
        match estimator {
            Estimator::Dd => enhance_dd(&noisy, rule, &DdConfig::default())?,
            Estimator::Neural { model, stats } => {
                let params = load_model(&model)?;
                let stats = XiStats::load(&stats)?;
                let xi = infer_xi_spec(&params, &spec, &stats)?;
                // The a posteriori SNR comes from the baseline noise tracker.
                let gamma = rule
                    .needs_gamma()
                    .then(|| dd_track(&spec.power_frames(), rule, &DdConfig::default()))
                    .transpose()?
                    .map(|steps| steps.into_iter().map(|s| s.gamma).collect::<Vec<_>>());
                istft(&apply_gain(&spec, &xi, rule, gamma.as_deref())?, noisy.len())?
            }
            Estimator::Oracle { clean, noise } => {
                let (clean, noise) = (load_wav(&clean)?, load_wav(&noise)?);
                if clean.len() != noisy.len() || noise.len() != noisy.len() {
                    bail!("oracle references must match the input length ({} samples)", noisy.len());
                }
                let noise_spec = stft(&noise, &cfg)?;
                let xi = oracle_xi(&stft(&clean, &cfg)?, &noise_spec)?;
                let gamma: Vec<Vec<f64>> = spec
                    .power_frames()
                    .iter()
                    .zip(noise_spec.power_frames())
                    .map(|(x, d)| x.iter().zip(&d).map(|(x, d)| x / d.max(NOISE_POWER_FLOOR)).collect())
                    .collect();
                istft(&apply_gain(&spec, &xi, rule, Some(&gamma))?, noisy.len())?
            }
        }
    };
    if let Some(i) = enhanced.samples.iter().position(|v| v.is_nan()) {
        return Err(deepxi::Error::Numerical(format!("enhanced signal has NaN at sample {i}")).into());
    }
    let clamped = AudioSignal::new(enhanced.samples.iter().map(|v| v.clamp(-1.0, 1.0)).collect())?;
    save_wav(&clamped, &a.output)?;
    Ok(())
}

fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let grid = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("bad SNR level '{t}'"))))
        .collect::<Result<Vec<_>>>()?;
    if grid.is_empty() {
        return Err(usage("empty grid"));
    }
    Ok(grid)
}

fn cmd_mix(ctx: &Ctx, a: MixArgs) -> Result<()> {
    let c = &ctx.config;
    let grid = parse_grid(&c.resolve("snr-grid", a.snr_grid, "-5,0,5,10,15".to_string())?)?;
    let per_noise = c.resolve("per-noise", a.per_noise, 25)?;
    let manifest = build_test_manifest(&a.clean, &a.noise, per_noise, &grid, ctx.seed)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let manifest_path = a.manifest.unwrap_or_else(|| a.out_dir.join("manifest.tsv"));
    manifest.save(&manifest_path)?;
    render_manifest(&manifest, &a.out_dir, ctx.jobs)?;
    eprintln!("mix: {} mixtures -> {}", manifest.entries.len(), a.out_dir.display());
    Ok(())
}

fn cmd_wer(a: WerArgs) -> Result<()> {
    let manifest = Manifest::load(&a.manifest)?;
    let csv = scores_to_csv(&score_manifest(&manifest, &a.ref_dir, &a.hyp_dir)?);
    match a.out {
        Some(p) => fs::write(&p, csv).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}
