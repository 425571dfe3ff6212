use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use dualdrive::data::io::{read_dataset, write_dataset};
use dualdrive::data::{balance, histogram, mirror_expand, AugmentConfig};
use dualdrive::frame::GrayFrame;
use dualdrive::harness::{
    bench, bench_frames, cap_for_target, evaluate_offline, generate, generate_raw, key_value_text, run_closed_loop,
    train, Controllers, Driver, GenConfig, KeyValues, LeadSpawn, ScenarioSpec, TrainConfig,
};
use dualdrive::models::{load_from_path, save_to_path, summarize, Architecture, Model};
use dualdrive::sim::{parse_conditions, render, LeadVehicle, Track, VehicleState};
use dualdrive::tensor::AdamConfig;
use dualdrive::{Error, Result};

#[derive(Parser)]
#[command(name = "dualdrive", version, about = "Lane-keeping networks in a procedural driving world")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Seed for every random choice the command makes.
    #[arg(long)]
    seed: Option<u64>,
    /// `key = value` file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output path (file or directory, depending on the command).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the report as JSON instead of key: value lines.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate perturbed oracle driving and write a dataset.
    GenData {
        #[command(flatten)]
        common: Common,
        /// Final sample count (after balancing and mirroring).
        #[arg(long)]
        samples: Option<usize>,
        /// Comma-separated track ids.
        #[arg(long)]
        tracks: Option<String>,
        /// Write the unbalanced frames as recorded.
        #[arg(long)]
        raw: bool,
    },
    /// Cap each steering bin of a dataset, then optionally mirror it.
    Balance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        /// Per-bin cap; defaults to the smallest cap keeping `--target` samples.
        #[arg(long)]
        cap: Option<usize>,
        #[arg(long)]
        target: Option<usize>,
        #[arg(long)]
        mirror: bool,
    },
    /// Train a network on a dataset and write its checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// original | modified
        #[arg(long)]
        model: Option<Architecture>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f32>,
        #[arg(long)]
        no_augment: bool,
        #[arg(long)]
        checkpoint_every: Option<usize>,
    },
    /// Unaugmented error of a checkpoint on a dataset.
    EvalOffline {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Closed-loop session; reports interventions and autonomy.
    Drive {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        track: Option<String>,
        /// `time,weather`, e.g. `night,clear_sky`.
        #[arg(long)]
        conditions: Option<String>,
        /// oracle | model
        #[arg(long)]
        driver: Option<String>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        no_brake: bool,
        /// Lead vehicle gap at the start, meters.
        #[arg(long)]
        lead_gap: Option<f64>,
        #[arg(long)]
        lead_speed: Option<f64>,
    },
    /// Per-frame inference latency of both architectures.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        warmup: Option<usize>,
        #[arg(long)]
        original: Option<PathBuf>,
        #[arg(long)]
        modified: Option<PathBuf>,
    },
    /// Dump the activations of one convolutional layer as PGM images.
    FeatureMaps {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Architecture for an untrained network when no checkpoint is given.
        #[arg(long)]
        model: Option<Architecture>,
        /// Index into the layer table.
        #[arg(long)]
        layer: usize,
        #[arg(long)]
        track: Option<String>,
        #[arg(long)]
        conditions: Option<String>,
        /// Arc length along the track, meters.
        #[arg(long)]
        position: Option<f64>,
    },
    /// Layer table with parameter and MAC counts.
    Summary {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Architecture,
    },
}

/// Flag value, else config value, else default.
struct Settings {
    file: KeyValues,
}

impl Settings {
    fn load(common: &Common, allowed: &[&str]) -> Result<Self> {
        let file = match &common.config {
            Some(p) => KeyValues::load(p)?,
            None => KeyValues::default(),
        };
        let mut keys = vec!["seed"];
        keys.extend_from_slice(allowed);
        file.reject_unknown(&keys)?;
        Ok(Self { file })
    }

    fn pick<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        match flag {
            Some(v) => Ok(v),
            None => Ok(self.file.get(key)?.unwrap_or(default)),
        }
    }

    fn seed(&self, common: &Common) -> Result<u64> {
        self.pick(common.seed, "seed", 0)
    }
}

fn emit(common: &Common, report: &impl Serialize) -> Result<()> {
    let value = serde_json::to_value(report).map_err(|e| Error::Config(e.to_string()))?;
    if common.json {
        println!("{}", serde_json::to_string_pretty(&value).expect("JSON values serialize"));
    } else {
        print!("{}", key_value_text(&value));
    }
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn out_or(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn gen_data(common: &Common, samples: Option<usize>, tracks: Option<String>, raw: bool) -> Result<()> {
    let s = Settings::load(
        common,
        &["samples", "tracks", "raw_factor", "bins", "speed", "episode_ticks", "record_every", "max_offset", "max_heading", "noise_std", "noise_rate"],
    )?;
    let d = GenConfig::default();
    let tracks = s.pick(tracks, "tracks", d.tracks.join(","))?;
    let cfg = GenConfig {
        samples: s.pick(samples, "samples", d.samples)?,
        raw_factor: s.pick(None, "raw_factor", d.raw_factor)?,
        tracks: tracks.split(',').map(|t| t.trim().to_string()).collect(),
        conditions: d.conditions.clone(),
        bins: s.pick(None, "bins", d.bins)?,
        speed: s.pick(None, "speed", d.speed)?,
        episode_ticks: s.pick(None, "episode_ticks", d.episode_ticks)?,
        record_every: s.pick(None, "record_every", d.record_every)?,
        max_offset: s.pick(None, "max_offset", d.max_offset)?,
        max_heading: s.pick(None, "max_heading", d.max_heading)?,
        noise_std: s.pick(None, "noise_std", d.noise_std)?,
        noise_rate: s.pick(None, "noise_rate", d.noise_rate)?,
        seed: s.seed(common)?,
    };
    let ds = if raw { generate_raw(&cfg)? } else { generate(&cfg)? };
    let out = out_or(common, "dataset.ddds");
    write_dataset(&out, &ds)?;
    let angles = ds.angles();
    let mean = angles.iter().map(|&a| f64::from(a)).sum::<f64>() / angles.len() as f64;
    emit(
        common,
        &json!({
            "out": out.display().to_string(),
            "samples": ds.len(),
            "mean_angle": mean,
            "histogram": histogram(&ds, cfg.bins),
        }),
    )
}

fn balance_cmd(common: &Common, input: &Path, bins: Option<usize>, cap: Option<usize>, target: Option<usize>, mirror: bool) -> Result<()> {
    let s = Settings::load(common, &["bins", "cap", "target"])?;
    let ds = read_dataset(input)?;
    let bins = s.pick(bins, "bins", 25)?;
    let hist = histogram(&ds, bins);
    let cap = match (cap.or(s.file.get("cap")?), target.or(s.file.get("target")?)) {
        (Some(c), _) => c,
        (None, Some(t)) => cap_for_target(&hist, t)
            .ok_or_else(|| Error::Config(format!("{} samples cannot yield {t} balanced ones", ds.len())))?,
        (None, None) => return Err(Error::Config("balance needs --cap or --target".into())),
    };
    let mut out_ds = balance(&ds, bins, cap, s.seed(common)?)?;
    if mirror {
        out_ds = mirror_expand(&out_ds);
    }
    let out = out_or(common, "balanced.ddds");
    write_dataset(&out, &out_ds)?;
    emit(
        common,
        &json!({
            "out": out.display().to_string(),
            "input_samples": ds.len(),
            "cap_per_bin": cap,
            "samples": out_ds.len(),
            "histogram": histogram(&out_ds, bins),
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn train_cmd(
    common: &Common,
    data: &Path,
    model: Option<Architecture>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    learning_rate: Option<f32>,
    no_augment: bool,
    checkpoint_every: Option<usize>,
) -> Result<()> {
    let s = Settings::load(
        common,
        &["model", "epochs", "batch_size", "learning_rate", "beta1", "beta2", "epsilon", "augment", "checkpoint_every"],
    )?;
    let d = TrainConfig::default();
    let seed = s.seed(common)?;
    let arch = s.pick(model, "model", Architecture::Modified)?;
    let augment = !no_augment && s.pick(None, "augment", true)?;
    let out = out_or(common, &format!("{}.ddmv", arch.name()));
    let every = match checkpoint_every {
        Some(e) => Some(e),
        None => s.file.get("checkpoint_every")?,
    };
    let cfg = TrainConfig {
        epochs: s.pick(epochs, "epochs", d.epochs)?,
        batch_size: s.pick(batch_size, "batch_size", d.batch_size)?,
        adam: AdamConfig {
            learning_rate: s.pick(learning_rate, "learning_rate", d.adam.learning_rate)?,
            beta1: s.pick(None, "beta1", d.adam.beta1)?,
            beta2: s.pick(None, "beta2", d.adam.beta2)?,
            epsilon: s.pick(None, "epsilon", d.adam.epsilon)?,
        },
        augment: if augment { AugmentConfig::default() } else { AugmentConfig::disabled() },
        seed,
        checkpoint_every: every,
        checkpoint_path: every.map(|_| out.clone()),
    };
    let ds = read_dataset(data)?;
    let mut net = Model::init(arch.build(), seed)?;
    let outcome = train(&mut net, &ds, &cfg)?;
    save_to_path(&out, &net, Some(&outcome.optimizer))?;
    emit(
        common,
        &json!({
            "out": out.display().to_string(),
            "model": arch.name(),
            "samples": ds.len(),
            "epochs": cfg.epochs,
            "steps_per_epoch": cfg.steps_per_epoch(ds.len()),
            "loss_history": outcome.history.iter().map(|h| h.mean_loss).collect::<Vec<_>>(),
        }),
    )
}

fn eval_offline_cmd(common: &Common, checkpoint: &Path, data: &Path) -> Result<()> {
    Settings::load(common, &[])?;
    let model = load_from_path(checkpoint)?.model;
    let ds = read_dataset(data)?;
    let metrics = evaluate_offline(&model, &ds)?;
    if let Some(out) = &common.out {
        write_json(out, &metrics)?;
    }
    emit(common, &metrics)
}

#[allow(clippy::too_many_arguments)]
fn drive_cmd(
    common: &Common,
    track: Option<String>,
    conditions: Option<String>,
    driver: Option<String>,
    checkpoint: Option<PathBuf>,
    duration: Option<f64>,
    no_brake: bool,
    lead_gap: Option<f64>,
    lead_speed: Option<f64>,
) -> Result<()> {
    let s = Settings::load(
        common,
        &["track", "conditions", "driver", "checkpoint", "duration", "brake", "lead_gap", "lead_speed", "speed_limit"],
    )?;
    let seed = s.seed(common)?;
    let conditions = parse_conditions(&s.pick(conditions, "conditions", "day,sunny".to_string())?, seed)?;
    let mut scenario = ScenarioSpec::new(s.pick(track, "track", "highway".to_string())?, conditions)
        .with_duration(s.pick(duration, "duration", 300.0)?);
    scenario.speed_limit = s.pick(None, "speed_limit", scenario.speed_limit)?;
    if let Some(gap) = lead_gap.or(s.file.get("lead_gap")?) {
        let speed = s.pick(lead_speed, "lead_speed", 0.0)?;
        scenario = scenario.with_traffic(vec![LeadSpawn { gap, speed }]);
    }
    let brake = !no_brake && s.pick(None, "brake", true)?;
    let driver_name = s.pick(driver, "driver", "oracle".to_string())?;
    let checkpoint = checkpoint.or(s.file.get_str("checkpoint").map(PathBuf::from));
    let model;
    let driver = match driver_name.as_str() {
        "oracle" => Driver::Oracle,
        "model" => {
            let path = checkpoint.ok_or_else(|| Error::Config("--driver model needs --checkpoint".into()))?;
            model = load_from_path(path)?.model;
            Driver::Model(&model)
        }
        other => return Err(Error::Config(format!("unknown driver '{other}' (oracle|model)"))),
    };
    let report = run_closed_loop(&driver, &scenario, brake, &Controllers::default())?;
    if let Some(out) = &common.out {
        write_json(out, &report)?;
    }
    emit(common, &report)
}

fn bench_cmd(common: &Common, frames: Option<usize>, warmup: Option<usize>, original: Option<PathBuf>, modified: Option<PathBuf>) -> Result<()> {
    let s = Settings::load(common, &["frames", "warmup"])?;
    let seed = s.seed(common)?;
    let load = |path: Option<PathBuf>, arch: Architecture| -> Result<Model> {
        match path {
            Some(p) => Ok(load_from_path(p)?.model),
            None => Model::init(arch.build(), seed),
        }
    };
    let o = load(original, Architecture::Original)?;
    let m = load(modified, Architecture::Modified)?;
    let frames = bench_frames(s.pick(frames, "frames", 200)?, seed)?;
    let report = bench(&[&o, &m], &frames, s.pick(warmup, "warmup", 20)?)?;
    if let Some(out) = &common.out {
        write_json(out, &report)?;
    }
    emit(common, &report)
}

#[allow(clippy::too_many_arguments)]
fn feature_maps_cmd(
    common: &Common,
    checkpoint: Option<PathBuf>,
    model: Option<Architecture>,
    layer: usize,
    track: Option<String>,
    conditions: Option<String>,
    position: Option<f64>,
) -> Result<()> {
    let s = Settings::load(common, &["model", "track", "conditions", "position"])?;
    let seed = s.seed(common)?;
    let net = match checkpoint {
        Some(p) => load_from_path(p)?.model,
        None => Model::init(s.pick(model, "model", Architecture::Modified)?.build(), seed)?,
    };
    let track = Track::by_id(&s.pick(track, "track", "highway".to_string())?)?;
    let conditions = parse_conditions(&s.pick(conditions, "conditions", "day,sunny".to_string())?, seed)?;
    let state = VehicleState::new(s.pick(position, "position", 0.0)?, 0.0, 0.0, 12.0);
    let frame = render(&track, &state, &conditions, None::<&LeadVehicle>);
    let maps = net.feature_maps(&frame, layer)?;
    let dir = out_or(common, "feature-maps");
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("input.pgm"), frame.to_pgm())?;
    for (i, m) in maps.iter().enumerate() {
        std::fs::write(dir.join(format!("layer{layer}_map{i:02}.pgm")), m.to_pgm())?;
    }
    let columns = (maps.len() as f64).sqrt().ceil() as usize;
    if let Some(montage) = GrayFrame::montage(&maps, columns) {
        std::fs::write(dir.join(format!("layer{layer}_montage.pgm")), montage.to_pgm())?;
    }
    emit(
        common,
        &json!({
            "out": dir.display().to_string(),
            "layer": layer,
            "maps": maps.len(),
            "map_width": maps.first().map_or(0, GrayFrame::width),
            "map_height": maps.first().map_or(0, GrayFrame::height),
        }),
    )
}

fn summary_cmd(common: &Common, model: Architecture) -> Result<()> {
    Settings::load(common, &[])?;
    let summary = summarize(&model.build())?;
    if let Some(out) = &common.out {
        write_json(out, &summary)?;
    }
    if common.json {
        emit(common, &summary)
    } else {
        println!("{summary}");
        Ok(())
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, samples, tracks, raw } => gen_data(&common, samples, tracks, raw),
        Command::Balance { common, input, bins, cap, target, mirror } => balance_cmd(&common, &input, bins, cap, target, mirror),
        Command::Train { common, data, model, epochs, batch_size, learning_rate, no_augment, checkpoint_every } => {
            train_cmd(&common, &data, model, epochs, batch_size, learning_rate, no_augment, checkpoint_every)
        }
        Command::EvalOffline { common, checkpoint, data } => eval_offline_cmd(&common, &checkpoint, &data),
        Command::Drive { common, track, conditions, driver, checkpoint, duration, no_brake, lead_gap, lead_speed } => {
            drive_cmd(&common, track, conditions, driver, checkpoint, duration, no_brake, lead_gap, lead_speed)
        }
        Command::Bench { common, frames, warmup, original, modified } => bench_cmd(&common, frames, warmup, original, modified),
        Command::FeatureMaps { common, checkpoint, model, layer, track, conditions, position } => {
            feature_maps_cmd(&common, checkpoint, model, layer, track, conditions, position)
        }
        Command::Summary { common, model } => summary_cmd(&common, model),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
