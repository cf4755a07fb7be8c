//! `synthdepth` command-line interface.
//!
//! Exit codes: 0 on success, 1 for configuration errors, 2 when generation fails or
//! completes only partially.

mod overrides;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{error, info, warn};
use serde::Deserialize;

use synthdepth::datapack::{
    augment_dataset, export_png16, generate_dataset, read_manifest, read_tensor, DatasetConfig, GenerateOptions,
    Manifest, OutputFlags,
};
use synthdepth::evalkit::{evaluate, DescriptorEntry};
use synthdepth::patch::DepthPatch;
use synthdepth::procnoise::{fill_field, NoiseKind, NoiseSpec};

use overrides::{apply_overrides, parse_overrides};

#[derive(Parser)]
#[command(name = "synthdepth", version, about = "Synthetic depth-patch dataset tooling")]
struct Cli {
    /// More log output (repeat for debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON dataset config; omitted fields take their defaults
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads, 0 for one per core
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Config field overrides, `--<field> <value>` (e.g. `--subdivisions 2 --warp-xy.max 4`)
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Render clean patches for every object and viewpoint
    Render {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Render clean patches and emit augmented inputs and foreground masks alongside
    Pairs {
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Augment the clean patches of an existing dataset in place
    Augment {
        /// Dataset directory containing manifest.json
        #[arg(long)]
        dataset: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Convert DPZ1 tensors to 16-bit PNG (a file, or every .dpz in a directory)
    ExportPng {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Nearest-neighbour evaluation of query descriptors against a database
    Eval {
        /// JSON file with `database` and `queries` arrays of {feature, class_id, pose}
        #[arg(long)]
        descriptors: PathBuf,
        /// Write the report here instead of stdout
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Render a noise field to a 16-bit PNG
    NoisePreview {
        #[arg(long, value_enum, default_value_t = Kind::FractalPerlin)]
        kind: Kind,
        #[arg(long, default_value_t = 0.05)]
        frequency: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Perlin,
    FractalPerlin,
    Cellular,
    White,
}

impl From<Kind> for NoiseKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Perlin => NoiseKind::Perlin,
            Kind::FractalPerlin => NoiseKind::FractalPerlin,
            Kind::Cellular => NoiseKind::Cellular,
            Kind::White => NoiseKind::White,
        }
    }
}

/// Marks errors caused by the user's configuration or arguments.
#[derive(Debug)]
struct ConfigError(String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>()
            || c
                .downcast_ref::<synthdepth::datapack::DatapackError>()
                .is_some_and(|d| d.is_config())
    })
}

enum Status {
    Complete,
    Partial,
}

/// Loads `args.config` (or `base`) and applies the overrides. Returns the config and the
/// directory relative mesh paths resolve against.
fn load_config(args: &ConfigArgs, base: DatasetConfig) -> Result<(DatasetConfig, PathBuf)> {
    let (cfg, dir) = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg = DatasetConfig::from_json(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, dir)
        }
        None => (base, PathBuf::from(".")),
    };
    let overrides = parse_overrides(&args.overrides).map_err(config_err)?;
    if overrides.is_empty() {
        return Ok((cfg, dir));
    }
    let mut value = serde_json::to_value(&cfg).expect("config serializes");
    apply_overrides(&mut value, &overrides).map_err(config_err)?;
    let cfg = serde_json::from_value(value).map_err(|e| config_err(format!("after overrides: {e}")))?;
    Ok((cfg, dir))
}

fn summarize(manifest: &Manifest, out: &Path) -> Status {
    info!("{} records written to {}", manifest.records.len(), out.display());
    if manifest.partial {
        for f in &manifest.failures {
            warn!("object {} record {:?}: {}", f.object_index, f.id, f.message);
        }
        Status::Partial
    } else {
        Status::Complete
    }
}

fn generate(out: &Path, args: &ConfigArgs, outputs: OutputFlags) -> Result<Status> {
    let (mut cfg, base_dir) = load_config(args, DatasetConfig::default())?;
    cfg.outputs = outputs;
    let opts = GenerateOptions {
        out_dir: out.to_path_buf(),
        base_dir,
        workers: args.workers,
        sensor: None,
    };
    let manifest = generate_dataset(&cfg, &opts)?;
    Ok(summarize(&manifest, out))
}

fn augment(dataset: &Path, args: &ConfigArgs) -> Result<Status> {
    let manifest = read_manifest(dataset)?;
    let base = DatasetConfig {
        name: manifest.name,
        master_seed: manifest.master_seed,
        objects: manifest.objects,
        viewsphere: manifest.viewsphere,
        render: manifest.render,
        augmentation: manifest.augmentation,
        outputs: OutputFlags::default(),
    };
    let (cfg, _) = load_config(args, base)?;
    let manifest = augment_dataset(dataset, Some(cfg.augmentation), OutputFlags::default(), args.workers)?;
    Ok(summarize(&manifest, dataset))
}

fn export_one(input: &Path, output: &Path) -> Result<()> {
    let bytes = fs::read(input).with_context(|| format!("reading {}", input.display()))?;
    let patch = read_tensor(&bytes).with_context(|| input.display().to_string())?;
    let png = export_png16(&patch).with_context(|| input.display().to_string())?;
    fs::write(output, png).with_context(|| format!("writing {}", output.display()))
}

fn export_png(input: &Path, output: &Path) -> Result<Status> {
    if !input.is_dir() {
        export_one(input, output)?;
        return Ok(Status::Complete);
    }
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    let mut entries: Vec<PathBuf> = fs::read_dir(input)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    let mut failed = 0;
    let mut count = 0;
    for path in entries.iter().filter(|p| p.extension().is_some_and(|e| e == "dpz")) {
        let target = output.join(path.with_extension("png").file_name().expect("file name"));
        match export_one(path, &target) {
            Ok(()) => count += 1,
            Err(e) => {
                failed += 1;
                error!("{e:#}");
            }
        }
    }
    info!("exported {count} images to {}", output.display());
    Ok(if failed > 0 { Status::Partial } else { Status::Complete })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DescriptorFile {
    database: Vec<DescriptorEntry<f64>>,
    queries: Vec<DescriptorEntry<f64>>,
}

fn eval(descriptors: &Path, output: Option<&Path>) -> Result<Status> {
    let text = fs::read_to_string(descriptors).with_context(|| format!("reading {}", descriptors.display()))?;
    let file: DescriptorFile =
        serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", descriptors.display())))?;
    let report = evaluate(&file.database, &file.queries).map_err(config_err)?;
    let json = serde_json::to_string_pretty(&report)? + "\n";
    match output {
        Some(path) => fs::write(path, json).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{json}"),
    }
    Ok(Status::Complete)
}

fn noise_preview(kind: Kind, frequency: f64, seed: u64, size: usize, output: &Path) -> Result<Status> {
    if size == 0 || !(frequency.is_finite() && frequency > 0.0) {
        return Err(config_err("size and frequency must be positive"));
    }
    let field = fill_field(&NoiseSpec::new(kind.into(), frequency, seed), size, size);
    let patch = DepthPatch::from_values(
        size,
        size,
        field.values.iter().map(|v| ((v + 1.0) * 0.5).clamp(0.0, 1.0)).collect(),
    );
    fs::write(output, export_png16(&patch)?).with_context(|| format!("writing {}", output.display()))?;
    Ok(Status::Complete)
}

fn run(cli: Cli) -> Result<Status> {
    match cli.command {
        Command::Render { out, config } => generate(
            &out,
            &config,
            OutputFlags {
                augmented: false,
                mask: false,
            },
        ),
        Command::Pairs { out, config } => generate(&out, &config, OutputFlags::default()),
        Command::Augment { dataset, config } => augment(&dataset, &config),
        Command::ExportPng { input, output } => export_png(&input, &output),
        Command::Eval { descriptors, output } => eval(&descriptors, output.as_deref()),
        Command::NoisePreview {
            kind,
            frequency,
            seed,
            size,
            output,
        } => noise_preview(kind, frequency, seed, size, &output),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "info",
        1 => "debug",
        _ => "trace",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(2),
        Err(e) => {
            error!("{e:#}");
            ExitCode::from(if is_config_error(&e) { 1 } else { 2 })
        }
    }
}
