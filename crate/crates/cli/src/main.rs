use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phonon_laser::config::{parse_config, ModelKind, RunConfig, SystemConfig, Task};
use phonon_laser::error::{Error, Result};
use phonon_laser::export::{write_json, write_sweep_csv, Document};
use phonon_laser::models::presets::Preset;
use phonon_laser::sweep::{label_agreement, run_sweep, SweepPlan, SweepRun};
use phonon_laser::tasks;
use serde_json::json;

#[derive(Parser)]
#[command(name = "phonon-laser", version, about = "Two-ion phonon laser simulator")]
struct Cli {
    #[command(subcommand)]
    task: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Steady state: P(n), n̄, spin populations.
    Steady(Common),
    /// Time evolution from a coherent state with ions in the ground state.
    Evolve(Common),
    /// Phase-diagram sweep over (1/κ_c, 1/γ_c).
    Sweep(Common),
    /// Characteristic function and marginals of the steady state.
    Charfun(Common),
    /// Phase diffusion from a coherent start.
    Diffusion(Common),
    /// Repumper calibration and effective decay of the heating ion.
    CalibrateDecay(Common),
    /// Carrier flopping of the cooling ion on the steady state.
    Carrier(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    fock_cutoff: Option<usize>,
    /// Continue a sweep from its checkpoint.
    #[arg(long)]
    resume: bool,
    /// Parameter preset used when no config is given.
    #[arg(long)]
    preset: Option<String>,
    /// four-level, two-level or two-level-dephased.
    #[arg(long)]
    model: Option<String>,
}

impl Command {
    fn split(self) -> (Task, Common) {
        match self {
            Command::Steady(c) => (Task::Steady, c),
            Command::Evolve(c) => (Task::Evolve, c),
            Command::Sweep(c) => (Task::Sweep, c),
            Command::Charfun(c) => (Task::Charfun, c),
            Command::Diffusion(c) => (Task::Diffusion, c),
            Command::CalibrateDecay(c) => (Task::CalibrateDecay, c),
            Command::Carrier(c) => (Task::Carrier, c),
        }
    }
}

fn parse_model(name: &str) -> Result<ModelKind> {
    serde_json::from_value(json!(name)).map_err(|_| Error::param("--model", format!("unknown model `{name}`")))
}

/// Config file (or preset defaults), then command-line overrides.
fn build_config(task: Task, args: &Common) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let mut cfg = parse_config(&text)?;
            cfg.task = task;
            cfg
        }
        None => {
            let default_preset = if task == Task::Sweep { Preset::Diagram } else { Preset::Reference };
            let preset = args.preset.as_deref().map(Preset::from_name).transpose()?.unwrap_or(default_preset);
            let model = if task == Task::Sweep { ModelKind::TwoLevel } else { ModelKind::FourLevel };
            RunConfig::new(
                task,
                SystemConfig {
                    preset: Some(preset),
                    model,
                    ..SystemConfig::default()
                },
            )
        }
    };
    if args.config.is_some() && args.preset.is_some() {
        cfg.system.preset = args.preset.as_deref().map(Preset::from_name).transpose()?;
    }
    if let Some(m) = &args.model {
        cfg.system.model = parse_model(m)?;
    }
    if let Some(n) = args.fock_cutoff {
        cfg.system.fock_cutoff = Some(n);
    }
    if let Some(w) = args.workers {
        cfg.workers = Some(w);
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.to_string_lossy().into_owned());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(task: Task, args: &Common) -> Result<serde_json::Value> {
    let cfg = build_config(task, args)?;
    let out = PathBuf::from(cfg.output.dir.clone().unwrap_or_else(|| ".".into()));
    let spec = cfg.system.resolve()?;
    let opts = cfg.solver.evolve_options();
    let file = |name: &str| out.join(name);
    let summary = match task {
        Task::Steady => {
            let r = tasks::run_steady(&spec)?.report;
            let path = file("steady.json");
            write_json(&path, &Document::new("steady", Some(&spec), &r))?;
            json!({"file": path, "nbar": r.nbar, "residual": r.residual, "mf_phase": r.mf_phase})
        }
        Task::Evolve => {
            let r = tasks::run_evolve(&spec, &cfg.evolve, &opts)?;
            let path = file("evolve.json");
            write_json(&path, &Document::new("evolve", Some(&spec), &r))?;
            json!({"file": path, "final_nbar": r.nbar.last()})
        }
        Task::Sweep => {
            let plan = SweepPlan::from_config(&cfg)?;
            let records = run_sweep(
                &plan,
                &SweepRun {
                    workers: cfg.workers,
                    checkpoint_dir: Some(out.clone()),
                    resume: args.resume,
                    max_new_points: None,
                },
            )?;
            let path = file("sweep.csv");
            write_sweep_csv(&path, &plan.base, &records)?;
            let agreement = label_agreement(&plan, &records);
            let failed = records.iter().filter(|r| r.error.is_some()).count();
            json!({"file": path, "points": records.len(), "failed": failed, "label_agreement": agreement.fraction()})
        }
        Task::Charfun => {
            let r = tasks::run_charfun(&spec, &cfg.charfun)?;
            let path = file("charfun.json");
            write_json(&path, &Document::new("charfun", Some(&spec), &r))?;
            json!({"file": path, "nbar": r.nbar, "axes": r.axes.len()})
        }
        Task::Diffusion => {
            let r = tasks::run_diffusion(&spec, &cfg.diffusion, &opts)?;
            let path = file("diffusion.json");
            write_json(&path, &Document::new("diffusion", Some(&spec), &r))?;
            json!({"file": path, "rate": r.rate, "hl_rate": r.hl_rate, "saturated": r.saturated})
        }
        Task::CalibrateDecay => {
            let r = tasks::run_calibrate_decay(&spec)?;
            let path = file("calibrate-decay.json");
            write_json(&path, &Document::new("calibrate-decay", Some(&spec), &r))?;
            json!({"file": path, "effective_decay_time_us": r.effective_decay_time_us, "saturation": r.saturation})
        }
        Task::Carrier => {
            let r = tasks::run_carrier(&spec, &cfg.carrier)?;
            let path = file("carrier.json");
            write_json(&path, &Document::new("carrier", Some(&spec), &r))?;
            json!({"file": path, "nbar": r.nbar})
        }
    };
    Ok(summary)
}

fn exit_code(class: &str) -> u8 {
    match class {
        "config" => 3,
        "parse" => 4,
        "dimension" => 5,
        "numerical" => 6,
        _ => 7,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (task, args) = Cli::parse().task.split();
    match run(task, &args) {
        Ok(summary) => {
            println!("{}", json!({"task": task.name(), "status": "ok", "result": summary}));
            ExitCode::SUCCESS
        }
        Err(e) => {
            let class = e.class();
            eprintln!("{}", json!({"task": task.name(), "status": "error", "error_class": class, "message": e.to_string()}));
            ExitCode::from(exit_code(class))
        }
    }
}
