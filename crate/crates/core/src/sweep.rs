//! Phase-diagram sweeps over (1/κ_c, 1/γ_c) with checkpoint and resume.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::lindblad::{evolve_expectations, phonon_distribution, steady_state, expectation, DensityMatrix, EvolveOptions, TAIL_WARN};
use crate::meanfield::{classify_phase, steady_n, MfParams, Phase};
use crate::models::{PhysicalModel, SystemSpec};
use crate::operator::{embed, Operator, Slot};

/// Environment variable capping the worker count.
pub const WORKERS_ENV: &str = "PHONON_LASER_MAX_WORKERS";
/// n̄ below which a steady state counts as dark.
pub const DARK_NBAR: f64 = 0.5;
/// Growth of n̄ over the second half of the window, phonons/ms, above which
/// a point is flagged as heating.
pub const GROWTH_FLAG_RATE: f64 = 0.1;

const CHECKPOINT: &str = "sweep.checkpoint.jsonl";
const BITMAP: &str = "sweep.bitmap";
const PLAN: &str = "sweep.plan.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPlan {
    /// Heating ion, truncation and model; the cooling ion is set per point.
    pub base: SystemSpec,
    pub inv_kappa_c_ms: Vec<f64>,
    pub inv_gamma_c_us: Vec<f64>,
    pub growth_time_ms: f64,
    pub evolve: EvolveOptions,
}

impl SweepPlan {
    /// Plan for a run configuration. The sweep section falls back to its
    /// defaults when absent.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        let sc = cfg.sweep.clone().unwrap_or_default();
        Ok(SweepPlan {
            base: cfg.system.resolve()?,
            inv_kappa_c_ms: sc.inv_kappa_c_ms.values("sweep.inv_kappa_c_ms")?,
            inv_gamma_c_us: sc.inv_gamma_c_us.values("sweep.inv_gamma_c_us")?,
            growth_time_ms: sc.growth_time_ms,
            evolve: cfg.solver.evolve_options(),
        })
    }

    pub fn len(&self) -> usize {
        self.inv_kappa_c_ms.len() * self.inv_gamma_c_us.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn cell(&self, idx: usize) -> (usize, usize) {
        let cols = self.inv_gamma_c_us.len();
        (idx / cols, idx % cols)
    }

    pub fn point_spec(&self, row: usize, col: usize) -> SystemSpec {
        point_spec(&self.base, self.inv_kappa_c_ms[row], self.inv_gamma_c_us[col])
    }
}

/// Cooling ion with 1/κ_c (ms) and 1/γ_c (µs): γ_c = 10³/(1/γ_c), g_c = √(κ_c γ_c).
pub fn point_spec(base: &SystemSpec, inv_kappa_c_ms: f64, inv_gamma_c_us: f64) -> SystemSpec {
    let gamma_c = 1e3 / inv_gamma_c_us;
    SystemSpec {
        gamma_c,
        g_c: (gamma_c / inv_kappa_c_ms).sqrt(),
        ..base.clone()
    }
}

/// Label derived from the master equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LindbladLabel {
    Dark,
    Lasing,
    Heating,
    Failed,
}

impl LindbladLabel {
    pub fn label(self) -> &'static str {
        match self {
            LindbladLabel::Dark => "dark",
            LindbladLabel::Lasing => "lasing",
            LindbladLabel::Heating => "heating",
            LindbladLabel::Failed => "failed",
        }
    }
}

/// Region of the three-phase picture a mean-field label belongs to.
pub fn region_of(phase: Phase) -> Option<LindbladLabel> {
    match phase {
        Phase::Dark => Some(LindbladLabel::Dark),
        Phase::Lasing => Some(LindbladLabel::Lasing),
        Phase::Heating | Phase::RunawayCorner => Some(LindbladLabel::Heating),
        Phase::Boundary => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub row: usize,
    pub col: usize,
    pub inv_kappa_c_ms: f64,
    pub inv_gamma_c_us: f64,
    pub g_c: f64,
    pub gamma_c: f64,
    pub nbar: Option<f64>,
    pub sz_h: Option<f64>,
    /// Mean-field phase label.
    pub phase: Phase,
    pub lindblad_phase: LindbladLabel,
    pub mf_nbar: Option<f64>,
    /// Lindblad n̄ over mean-field n̄, where both are finite and nonzero.
    pub nbar_ratio: Option<f64>,
    pub residual: Option<f64>,
    pub tail_mass: Option<f64>,
    /// n̄ growth over the second half of the window, phonons/ms.
    pub growth_rate: Option<f64>,
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_s: Option<f64>,
}

struct Outcome {
    nbar: f64,
    sz_h: f64,
    residual: Option<f64>,
    tail_mass: f64,
    growth_rate: Option<f64>,
}

fn ground_state(model: &PhysicalModel) -> Result<DensityMatrix> {
    let d = model.layout.dim();
    let mut ket = vec![crate::C64::new(0.0, 0.0); d];
    ket[model.layout.index(0, 0, 0)] = crate::C64::new(1.0, 0.0);
    DensityMatrix::from_pure(&ket)
}

fn top_level_projector(model: &PhysicalModel) -> Result<Operator> {
    let n = model.layout.fock_cutoff;
    let mut p = Operator::zeros(n);
    p.set(n - 1, n - 1, crate::C64::new(1.0, 0.0));
    embed(&p, Slot::Motion, &model.layout)
}

fn solve_steady(model: &PhysicalModel) -> Result<Outcome> {
    let ss = steady_state(&model.liouvillian()?)?;
    let pn = phonon_distribution(&ss.rho, &model.layout)?;
    Ok(Outcome {
        nbar: pn.mean(),
        sz_h: expectation(&ss.rho, &model.sz_heating()?)?.re,
        residual: Some(ss.residual),
        tail_mass: pn.tail_mass,
        growth_rate: None,
    })
}

fn solve_growth(model: &PhysicalModel, t: f64, opts: &EvolveOptions) -> Result<Outcome> {
    let l = model.liouvillian()?;
    let ops = [model.number_op()?, model.sz_heating()?, top_level_projector(model)?];
    let rows = evolve_expectations(&ground_state(model)?, &l, &[0.0, 0.5 * t, t], &ops, opts)?;
    let (mid, end) = (&rows[1], &rows[2]);
    Ok(Outcome {
        nbar: end[0].re,
        sz_h: end[1].re,
        residual: None,
        tail_mass: end[2].re,
        growth_rate: Some((end[0].re - mid[0].re) / (0.5 * t)),
    })
}

fn label(o: &Outcome) -> LindbladLabel {
    let growing = o.growth_rate.is_some_and(|g| g > GROWTH_FLAG_RATE);
    if growing || o.tail_mass > TAIL_WARN {
        LindbladLabel::Heating
    } else if o.nbar < DARK_NBAR {
        LindbladLabel::Dark
    } else {
        LindbladLabel::Lasing
    }
}

/// Evaluate one grid point. Solver failures are recorded, not returned.
pub fn evaluate_point(plan: &SweepPlan, row: usize, col: usize) -> SweepRecord {
    let start = Instant::now();
    let spec = plan.point_spec(row, col);
    let mf = MfParams::from_spec(&spec);
    let phase = classify_phase(&mf);
    let mf_nbar = steady_n(&mf).ok().and_then(|s| s.mean_phonons());
    let needs_growth = matches!(phase, Phase::Heating | Phase::RunawayCorner)
        || (phase == Phase::Boundary && spec.gamma_h >= spec.gamma_c);
    let outcome = PhysicalModel::build(&spec).and_then(|model| {
        if needs_growth {
            solve_growth(&model, plan.growth_time_ms, &plan.evolve)
        } else {
            solve_steady(&model)
        }
    });
    let mut rec = SweepRecord {
        row,
        col,
        inv_kappa_c_ms: plan.inv_kappa_c_ms[row],
        inv_gamma_c_us: plan.inv_gamma_c_us[col],
        g_c: spec.g_c,
        gamma_c: spec.gamma_c,
        nbar: None,
        sz_h: None,
        phase,
        lindblad_phase: LindbladLabel::Failed,
        mf_nbar,
        nbar_ratio: None,
        residual: None,
        tail_mass: None,
        growth_rate: None,
        error: None,
        wall_time_s: None,
    };
    match outcome {
        Ok(o) => {
            rec.lindblad_phase = label(&o);
            rec.nbar = Some(o.nbar);
            rec.sz_h = Some(o.sz_h);
            rec.residual = o.residual;
            rec.tail_mass = Some(o.tail_mass);
            rec.growth_rate = o.growth_rate;
            rec.nbar_ratio = match mf_nbar {
                Some(m) if m > 0.0 && o.growth_rate.is_none() => Some(o.nbar / m),
                _ => None,
            };
        }
        Err(e) => rec.error = Some(format!("{}: {e}", e.class())),
    }
    rec.wall_time_s = Some(start.elapsed().as_secs_f64());
    rec
}

/// Worker count after the environment cap.
pub fn effective_workers(requested: Option<usize>) -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mut n = requested.unwrap_or(avail).max(1);
    if let Some(cap) = std::env::var(WORKERS_ENV).ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        n = n.min(cap.max(1));
    }
    n
}

#[derive(Clone, Debug, Default)]
pub struct SweepRun {
    pub workers: Option<usize>,
    /// Directory for checkpoint files; none disables checkpointing.
    pub checkpoint_dir: Option<PathBuf>,
    pub resume: bool,
    /// Stop after this many new points. Used to simulate interruption.
    pub max_new_points: Option<usize>,
}

fn load_checkpoint(dir: &Path, plan: &SweepPlan) -> Result<BTreeMap<usize, SweepRecord>> {
    let plan_path = dir.join(PLAN);
    let mut done = BTreeMap::new();
    if !plan_path.exists() {
        return Ok(done);
    }
    let stored: SweepPlan = serde_json::from_str(&fs::read_to_string(&plan_path)?)?;
    if &stored != plan {
        return Err(Error::Configuration(format!(
            "checkpoint in {} belongs to a different sweep",
            dir.display()
        )));
    }
    let path = dir.join(CHECKPOINT);
    if !path.exists() {
        return Ok(done);
    }
    let cols = plan.inv_gamma_c_us.len();
    for line in BufReader::new(File::open(&path)?).lines() {
        let line = line?;
        // A torn final line from an interrupted write is dropped.
        match serde_json::from_str::<SweepRecord>(&line) {
            Ok(r) if r.row < plan.inv_kappa_c_ms.len() && r.col < cols => {
                done.insert(r.row * cols + r.col, r);
            }
            _ => log::warn!("skipping unreadable checkpoint line"),
        }
    }
    Ok(done)
}

fn write_bitmap(dir: &Path, len: usize, done: &BTreeMap<usize, SweepRecord>) -> Result<()> {
    let bits: String = (0..len).map(|i| if done.contains_key(&i) { '1' } else { '0' }).collect();
    let tmp = dir.join(format!("{BITMAP}.tmp"));
    fs::write(&tmp, bits + "\n")?;
    fs::rename(tmp, dir.join(BITMAP))?;
    Ok(())
}

/// Run all points, checkpointing each finished point through one writer.
/// Records come back ordered by (row, col) whatever the scheduling.
pub fn run_sweep(plan: &SweepPlan, run: &SweepRun) -> Result<Vec<SweepRecord>> {
    if plan.is_empty() {
        return Err(Error::param("sweep", "empty grid"));
    }
    let mut done = BTreeMap::new();
    let mut sink = None;
    if let Some(dir) = &run.checkpoint_dir {
        fs::create_dir_all(dir)?;
        if run.resume {
            done = load_checkpoint(dir, plan)?;
        } else {
            for f in [CHECKPOINT, BITMAP] {
                let p = dir.join(f);
                if p.exists() {
                    fs::remove_file(p)?;
                }
            }
        }
        fs::write(dir.join(PLAN), serde_json::to_string_pretty(plan)?)?;
        let file = OpenOptions::new().create(true).append(true).open(dir.join(CHECKPOINT))?;
        sink = Some((dir.clone(), file));
        write_bitmap(dir, plan.len(), &done)?;
    }
    let mut todo: Vec<usize> = (0..plan.len()).filter(|i| !done.contains_key(i)).collect();
    if let Some(m) = run.max_new_points {
        todo.truncate(m);
    }
    let workers = effective_workers(run.workers);
    log::info!("sweep: {} points, {} pending, {} workers", plan.len(), todo.len(), workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))?;
    let (tx, rx) = mpsc::channel::<(usize, SweepRecord)>();
    let mut write_err = None;
    std::thread::scope(|s| {
        s.spawn(move || {
            pool.install(|| {
                todo.par_iter().for_each_with(tx, |tx, &idx| {
                    let (row, col) = plan.cell(idx);
                    let _ = tx.send((idx, evaluate_point(plan, row, col)));
                })
            })
        });
        for (idx, rec) in rx {
            if let Some((dir, file)) = sink.as_mut() {
                let res = serde_json::to_string(&rec)
                    .map_err(Error::from)
                    .and_then(|line| writeln!(file, "{line}").map_err(Error::from))
                    .and_then(|_| file.flush().map_err(Error::from));
                done.insert(idx, rec);
                if let Err(e) = res.and_then(|_| write_bitmap(dir, plan.len(), &done)) {
                    write_err.get_or_insert(e);
                }
            } else {
                done.insert(idx, rec);
            }
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    Ok(done.into_values().collect())
}

/// Agreement between mean-field and master-equation labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub off_boundary: usize,
    pub agree: usize,
    pub regions_seen: [bool; 3],
}

impl Agreement {
    pub fn fraction(&self) -> f64 {
        if self.off_boundary == 0 {
            0.0
        } else {
            self.agree as f64 / self.off_boundary as f64
        }
    }
}

fn log_half_step(axis: &[f64], i: usize) -> (f64, f64) {
    let l = |k: usize| axis[k].ln();
    let lo = if i > 0 { 0.5 * (l(i) - l(i - 1)) } else if axis.len() > 1 { 0.5 * (l(1) - l(0)) } else { 0.0 };
    let hi = if i + 1 < axis.len() { 0.5 * (l(i + 1) - l(i)) } else { lo };
    ((l(i) - lo).exp(), (l(i) + hi).exp())
}

/// Compare labels on points whose whole cell (half a step either way in log
/// coordinates) lies inside one mean-field region.
pub fn label_agreement(plan: &SweepPlan, records: &[SweepRecord]) -> Agreement {
    let mut out = Agreement {
        off_boundary: 0,
        agree: 0,
        regions_seen: [false; 3],
    };
    for r in records {
        let Some(region) = region_of(r.phase) else { continue };
        let (k0, k1) = log_half_step(&plan.inv_kappa_c_ms, r.row);
        let (g0, g1) = log_half_step(&plan.inv_gamma_c_us, r.col);
        let interior = [(k0, g0), (k0, g1), (k1, g0), (k1, g1)].iter().all(|&(k, g)| {
            region_of(classify_phase(&MfParams::from_spec(&point_spec(&plan.base, k, g)))) == Some(region)
        });
        if !interior {
            continue;
        }
        out.off_boundary += 1;
        if r.lindblad_phase == region {
            out.agree += 1;
        }
        let slot = match region {
            LindbladLabel::Dark => 0,
            LindbladLabel::Lasing => 1,
            _ => 2,
        };
        out.regions_seen[slot] |= r.lindblad_phase == region;
    }
    out
}
