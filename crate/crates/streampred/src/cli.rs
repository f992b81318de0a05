//! Command-line interface: `generate`, `run`, `compare`, `validate`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use streampred_core::metrics::finalize;
use streampred_core::scenario::{generate_synthetic, Scene};

use crate::config::{load_pipeline_config, load_scenario_config, read_pipeline_config};
use crate::error::{AppError, Result};
use crate::parallel::{compare, diagnostics, evaluate_scenes, reduce};
use crate::report::{comparison_csv, metrics_csv, to_json, ComparisonReport, RunReport, REPORT_SCHEMA_VERSION};
use crate::scene_io::{read_scene_file, write_scene_file};

#[derive(Debug, Parser)]
#[command(name = "streampred", version, about = "Streaming perception and trajectory prediction evaluation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write synthetic scenes as JSON files.
    Generate(Box<GenerateArgs>),
    /// Evaluate one configuration over a set of scenes.
    Run(Box<RunArgs>),
    /// Evaluate several configurations over the same scenes.
    Compare(CompareArgs),
    /// Check scene and configuration files without running anything.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Scenario configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed of the first scene; scene i uses seed + i.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub count: u64,
    #[command(flatten)]
    pub overrides: ScenarioOverrides,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long = "scene", required = true, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    /// Pipeline configuration file (JSON); flags override its keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// JSON report path; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: PipelineOverrides,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "scene", required = true, num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    #[arg(long = "config", required = true, num_args = 1..)]
    pub configs: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long = "scene", num_args = 1..)]
    pub scenes: Vec<PathBuf>,
    /// Pipeline configuration files.
    #[arg(long = "config", num_args = 1..)]
    pub configs: Vec<PathBuf>,
    /// Scenario configuration files.
    #[arg(long = "scenario_config", num_args = 1..)]
    pub scenario_configs: Vec<PathBuf>,
}

/// Flags named after `PipelineConfig` keys, spelled exactly as the keys.
#[derive(Debug, Default, Args, Serialize)]
#[command(rename_all = "snake_case")]
pub struct PipelineOverrides {
    /// query | traditional
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<String>,
    /// regression | goal | heatmap | oracle
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoder: Option<String>,
    /// allocentric | egocentric
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub view: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_future: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_epa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub miss_threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nms_radius: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_goal: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_goal: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heatmap_side: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smooth_l1_delta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decoder_hidden: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_bank: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_query: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_h: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d_k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feature_sigma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sampling_radius: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_threshold: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_include_yaw: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_include_velocity: Option<bool>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn_frames: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent_lead_frames: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_process_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_measurement_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_gate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_birth_speed: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kf_max_misses: Option<u32>,
}

/// Flags named after `ScenarioConfig` keys. Speed ranges take `MIN,MAX`.
#[derive(Debug, Default, Args, Serialize)]
#[command(rename_all = "snake_case")]
pub struct ScenarioOverrides {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frames: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub straight_vehicles: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub left_turn_vehicles: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub right_turn_vehicles: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopping_pedestrians: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub crossing_pedestrians: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spawn_radius: Option<f64>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vehicle_speed: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pedestrian_speed: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub turn_frames: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub intent_lead_frames: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub occlusion_gap_frames: Option<i32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ego_speed: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub annotation_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub with_map: Option<bool>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| AppError::Io { path: path.into(), source })
}

fn write_or_print(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_file(p, bytes),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|source| AppError::Io { path: "<stdout>".into(), source }),
    }
}

fn read_scenes(paths: &[PathBuf]) -> Result<Vec<Scene>> {
    paths.iter().map(|p| read_scene_file(p)).collect()
}

pub fn generate(args: &GenerateArgs) -> Result<Vec<PathBuf>> {
    let cfg = load_scenario_config(args.config.as_deref(), &args.overrides)?;
    if args.count == 0 {
        return Err(AppError::Usage("--count must be at least 1".into()));
    }
    fs::create_dir_all(&args.out).map_err(|source| AppError::Io { path: args.out.clone(), source })?;
    let mut written = Vec::new();
    for i in 0..args.count {
        let seed = args.seed.checked_add(i).ok_or_else(|| AppError::Usage("seed range overflows u64".into()))?;
        let scene = generate_synthetic(&cfg, seed)?;
        let path = args.out.join(format!("{}.json", scene.id));
        write_scene_file(&path, &scene)?;
        written.push(path);
    }
    Ok(written)
}

pub fn run(args: &RunArgs) -> Result<RunReport> {
    let config = load_pipeline_config(args.config.as_deref(), &args.overrides)?;
    let scenes = read_scenes(&args.scenes)?;
    let results = evaluate_scenes(&scenes, &config)?;
    let counters = reduce(&results, &config)?;
    let metrics = finalize(&counters);
    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        label: config.label(),
        config,
        metrics,
        counters,
        scenes: diagnostics(&scenes, &results),
    };
    write_or_print(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(p) = &args.csv {
        write_file(p, &metrics_csv(&report.metrics)?)?;
    }
    Ok(report)
}

pub fn compare_cmd(args: &CompareArgs) -> Result<ComparisonReport> {
    let configs = args.configs.iter().map(|p| read_pipeline_config(p)).collect::<Result<Vec<_>>>()?;
    let scenes = read_scenes(&args.scenes)?;
    let table = compare(&scenes, &configs)?;
    let report = ComparisonReport {
        schema_version: REPORT_SCHEMA_VERSION,
        scenes: scenes.iter().map(|s| s.id.clone()).collect(),
        table,
    };
    write_or_print(args.out.as_deref(), &to_json(&report)?)?;
    if let Some(p) = &args.csv {
        write_file(p, &comparison_csv(&report.table)?)?;
    }
    Ok(report)
}

pub fn validate(args: &ValidateArgs) -> Result<usize> {
    if args.scenes.is_empty() && args.configs.is_empty() && args.scenario_configs.is_empty() {
        return Err(AppError::Usage("nothing to validate".into()));
    }
    for p in &args.scenes {
        read_scene_file(p)?;
    }
    for p in &args.configs {
        read_pipeline_config(p)?;
    }
    for p in &args.scenario_configs {
        load_scenario_config(Some(p), &serde_json::Map::new())?;
    }
    Ok(args.scenes.len() + args.configs.len() + args.scenario_configs.len())
}

/// Runs a parsed command. Human-readable status goes to stderr so stdout
/// stays machine-readable.
pub fn execute(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => {
            for p in generate(a)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Run(a) => {
            let r = run(a)?;
            eprintln!("{}: {} steps over {} scene(s)", r.label, r.metrics.steps, r.scenes.len());
        }
        Command::Compare(a) => {
            let r = compare_cmd(a)?;
            for row in &r.table.rows {
                if let Some(e) = &row.error {
                    eprintln!("config {} ({}) failed: {e}", row.index, row.label);
                }
            }
        }
        Command::Validate(a) => {
            let n = validate(a)?;
            eprintln!("{n} file(s) valid");
        }
    }
    Ok(())
}
