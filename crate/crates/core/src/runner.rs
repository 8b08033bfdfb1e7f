//! Pipelines behind the command line: particle and PDE runs, coupled error
//! runs, convergence studies and plot-data export.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, HistogramConfig, StudyConfig, SystemKind};
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, MollifierProfile};
use crate::metrics::{
    fit_loglog, histogram_samples, mode_count, segregation_overlap, strong_error, wasserstein2_1d, DensityEstimate,
    SlopeFit, MODE_WINDOW,
};
use crate::noise::{NoisePlan, StreamPurpose};
use crate::nonlinearity::{make_cutoff, CutoffNonlinearity};
use crate::particles::{sample_initial, ParticleEnsemble};
use crate::pde::{self, FieldState, PdeConfig, PdeModel};
use crate::sde::{em_step_gradient, em_step_meanfield, em_step_skt, run_coupled, CoupledSetup, MeanFieldKind};

/// Per-run snapshot positions: `[run][snapshot][species][particle]`.
pub type SnapshotPositions = Vec<Vec<Vec<Vec<f64>>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SystemKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub pipeline: String,
    pub kind: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_hash: String,
    pub code_version: String,
    pub wall_time_seconds: f64,
    pub master_seed: u64,
    pub run_seeds: Vec<u64>,
    pub desk_scale: bool,
    pub histogram: HistogramConfig,
    pub outputs: Vec<OutputEntry>,
    pub partial: bool,
    pub failures: Vec<Failure>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Serialization(format!("{}: {e}", path.display())))
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const CONFIG_FILE: &str = "config.toml";

fn time_label(t: f64) -> String {
    format!("{t}")
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serialization(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

pub fn kernel_family(cfg: &ExperimentConfig, eta: f64) -> Result<KernelFamily> {
    let profile = MollifierProfile::new(cfg.interaction.profile, 1.0, cfg.species.initial.dim())?;
    KernelFamily::new(profile, eta, &cfg.species.pair_mass)
}

pub fn cutoff(cfg: &ExperimentConfig, eta: f64) -> Result<CutoffNonlinearity> {
    make_cutoff(cfg.interaction.nonlinearity.clone(), eta, cfg.interaction.alpha)
}

pub fn pde_config(cfg: &ExperimentConfig) -> PdeConfig {
    PdeConfig {
        half_width: cfg.pde.half_width,
        dx: cfg.pde.dx,
        dt_pde: cfg.pde.dt_pde,
        sigma: cfg.species.sigma.clone(),
        pair_mass: cfg.species.pair_mass.clone(),
        nonlinearity: cfg.interaction.nonlinearity.clone(),
        potential: cfg.interaction.potential,
    }
}

/// Local (`eta = None`) or nonlocal PDE solution at every point of the time grid.
pub fn solve_pde(cfg: &ExperimentConfig, eta: Option<f64>) -> Result<Vec<FieldState>> {
    let model = match eta {
        None => PdeModel::Local,
        Some(eta) => PdeModel::Nonlocal {
            kernel: kernel_family(cfg, eta)?,
            cutoff: cutoff(cfg, eta)?,
        },
    };
    pde::solve(&pde_config(cfg), &model, &cfg.species.initial, &cfg.time_grid()?)
}

/// Runs `cfg.runs` independent copies of one particle system and records the
/// positions at the given grid indices. `fields` must hold one PDE snapshot
/// per grid point for the mean-field systems.
pub fn simulate_particles(
    cfg: &ExperimentConfig,
    system: SystemKind,
    eta: f64,
    particles: usize,
    snapshot_indices: &[usize],
    fields: Option<&[FieldState]>,
    plan: &NoisePlan,
) -> Result<SnapshotPositions> {
    let grid = cfg.time_grid()?;
    let kf = kernel_family(cfg, eta)?;
    let cut = cutoff(cfg, eta)?;
    let sigma = &cfg.species.sigma;
    let potential = cfg.interaction.potential;
    let dt = grid.dt();
    let mean_field = match system {
        SystemKind::Intermediate => Some(MeanFieldKind::Intermediate),
        SystemKind::Macroscopic => Some(MeanFieldKind::Macroscopic),
        SystemKind::SktParticles | SystemKind::GradientParticles => None,
        other => {
            return Err(Error::Contract(format!("{} is not a particle system", other.name())));
        }
    };
    if mean_field.is_some() && fields.is_none_or(|f| f.len() != grid.steps() + 1) {
        return Err(Error::Contract(format!(
            "{} needs {} PDE snapshots",
            system.name(),
            grid.steps() + 1
        )));
    }
    let n = cfg.species_count();
    let record = |e: &ParticleEnsemble| -> Vec<Vec<f64>> {
        (0..n).map(|i| e.species_positions(i).to_vec()).collect()
    };
    (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let run = run as u64;
            let mut e = sample_initial(&cfg.species.initial, particles, plan, run)?;
            let mut noise = plan.run_noise(run, n, particles, e.dim());
            let mut out = Vec::with_capacity(snapshot_indices.len());
            let mut dw = Vec::new();
            if snapshot_indices.contains(&0) {
                out.push(record(&e));
            }
            for m in 0..grid.steps() {
                noise.fill_increments(dt, &mut dw);
                e = match (system, mean_field) {
                    (SystemKind::SktParticles, _) => em_step_skt(&e, &kf, &cut, sigma, potential, dt, &dw)?,
                    (SystemKind::GradientParticles, _) => em_step_gradient(&e, &kf, sigma, dt, &dw)?,
                    (_, Some(kind)) => {
                        let field = &fields.expect("checked above")[m];
                        em_step_meanfield(&e, field, kind, &kf, &cut, sigma, potential, dt, &dw)?
                    }
                    _ => unreachable!("system checked above"),
                };
                if snapshot_indices.contains(&(m + 1)) {
                    out.push(record(&e));
                }
            }
            Ok(out)
        })
        .collect()
}

/// `[run][species]` positions of one snapshot.
pub fn snapshot_slice(positions: &SnapshotPositions, snapshot: usize) -> Vec<Vec<Vec<f64>>> {
    positions.iter().map(|run| run[snapshot].clone()).collect()
}

/// Mean over runs (and species) of `W_2` between each run's particles and as
/// many inverse-CDF samples of `field`; returns `(mean, standard error)`.
pub fn w2_to_field(samples: &[Vec<Vec<f64>>], field: &FieldState, plan: &NoisePlan) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::Contract("W2 comparison needs at least one run".into()));
    }
    let per_run: Vec<f64> = samples
        .par_iter()
        .enumerate()
        .map(|(run, species)| {
            if species.len() != field.species() {
                return Err(Error::Contract("species count differs from the field".into()));
            }
            let mut total = 0.0;
            for (i, xs) in species.iter().enumerate() {
                let mut s = plan.stream(run as u64, StreamPurpose::Diagnostic, i, 0);
                let u: Vec<f64> = (0..xs.len()).map(|_| s.uniform()).collect();
                total += wasserstein2_1d(xs, &field.sample_inverse_cdf(i, &u))?;
            }
            Ok(total / species.len() as f64)
        })
        .collect::<Result<_>>()?;
    Ok(mean_and_se(&per_run))
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn density_metrics(d: &DensityEstimate) -> Value {
    let n = d.density.len();
    let modes: Vec<usize> = (0..n).map(|i| mode_count(d, i, MODE_WINDOW)).collect();
    let mut overlap = serde_json::Map::new();
    for i in 0..n {
        for j in i + 1..n {
            overlap.insert(format!("u{}-u{}", i + 1, j + 1), json!(segregation_overlap(d, i, j)));
        }
    }
    json!({ "modes": modes, "overlap": overlap, "out_of_range": d.out_of_range })
}

fn moments(samples: &[Vec<Vec<f64>>], species: usize) -> (f64, f64) {
    let (mut s1, mut s2, mut count) = (0.0, 0.0, 0usize);
    for run in samples {
        for &x in &run[species] {
            s1 += x;
            s2 += x * x;
            count += 1;
        }
    }
    let mean = s1 / count as f64;
    (mean, s2 / count as f64 - mean * mean)
}

struct PipelineOutput {
    files: Vec<OutputEntry>,
    metrics: Value,
}

fn particle_pipeline(cfg: &ExperimentConfig, system: SystemKind, out_dir: &Path, plan: &NoisePlan) -> Result<PipelineOutput> {
    let eta = cfg.interaction.eta;
    let particles = cfg.resolve_particles(eta)? as usize;
    let indices = cfg.snapshot_indices()?;
    let fields = match system {
        SystemKind::Intermediate => Some(solve_pde(cfg, Some(eta))?),
        SystemKind::Macroscopic => Some(solve_pde(cfg, None)?),
        _ => None,
    };
    let positions = simulate_particles(cfg, system, eta, particles, &indices, fields.as_deref(), plan)?;
    let mut files = Vec::new();
    let mut snapshots = Vec::new();
    for (s, &t) in cfg.snapshot_times().iter().enumerate() {
        let samples = snapshot_slice(&positions, s);
        let d = histogram_samples(&samples, cfg.histogram.half_width, cfg.histogram.bins)?;
        let rel = format!("{}/density_t{}.csv", system.name(), time_label(t));
        write_file(&out_dir.join(&rel), &d.to_csv())?;
        files.push(OutputEntry {
            path: rel.clone(),
            kind: "density".into(),
            system: Some(system),
            time: Some(t),
        });
        let (mean, var): (Vec<f64>, Vec<f64>) = (0..cfg.species_count()).map(|i| moments(&samples, i)).unzip();
        let mut m = density_metrics(&d);
        m["time"] = json!(t);
        m["file"] = json!(rel);
        m["mean"] = json!(mean);
        m["variance"] = json!(var);
        if let Some(f) = &fields {
            let (w2, se) = w2_to_field(&samples, &f[indices[s]], plan)?;
            m["w2_to_pde"] = json!(w2);
            m["w2_to_pde_std_error"] = json!(se);
        }
        snapshots.push(m);
    }
    Ok(PipelineOutput {
        files,
        metrics: json!({ "particles": particles, "runs": cfg.runs, "eta": eta, "snapshots": snapshots }),
    })
}

fn pde_pipeline(cfg: &ExperimentConfig, system: SystemKind, out_dir: &Path) -> Result<PipelineOutput> {
    let eta = (system == SystemKind::PdeNonlocal).then_some(cfg.interaction.eta);
    let fields = solve_pde(cfg, eta)?;
    let mut files = Vec::new();
    let mut snapshots = Vec::new();
    for (&m, &t) in cfg.snapshot_indices()?.iter().zip(&cfg.snapshot_times()) {
        let f = &fields[m];
        let rel = format!("{}/field_t{}.csv", system.name(), time_label(t));
        let path = out_dir.join(&rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        f.write_csv(&path)?;
        files.push(OutputEntry {
            path: rel.clone(),
            kind: "field".into(),
            system: Some(system),
            time: Some(t),
        });
        let n = f.species();
        let modes: Vec<usize> = (0..n).map(|i| mode_count(f, i, MODE_WINDOW)).collect();
        let mass: Vec<f64> = (0..n).map(|i| f.mass(i)).collect();
        let min: Vec<f64> = (0..n)
            .map(|i| f.values(i).iter().cloned().fold(f64::INFINITY, f64::min))
            .collect();
        let mut overlap = serde_json::Map::new();
        for i in 0..n {
            for j in i + 1..n {
                overlap.insert(format!("u{}-u{}", i + 1, j + 1), json!(segregation_overlap(f, i, j)));
            }
        }
        snapshots.push(json!({
            "time": t, "file": rel, "mass": mass, "min": min, "modes": modes, "overlap": overlap
        }));
    }
    Ok(PipelineOutput {
        files,
        metrics: json!({ "eta": eta, "snapshots": snapshots }),
    })
}

fn coupled_pipeline(cfg: &ExperimentConfig, plan: &NoisePlan) -> Result<PipelineOutput> {
    let eta = cfg.interaction.eta;
    let particles = cfg.resolve_particles(eta)? as usize;
    let local = solve_pde(cfg, None)?;
    let out = run_coupled(&coupled_setup(cfg)?, &local, eta, particles, plan)?;
    let err = strong_error(&out)?;
    let finals: Vec<Vec<Vec<f64>>> = out
        .final_particles
        .iter()
        .map(|e| (0..e.species()).map(|i| e.species_positions(i).to_vec()).collect())
        .collect();
    let (w2, w2_se) = w2_to_field(&finals, local.last().expect("at least one snapshot"), plan)?;
    Ok(PipelineOutput {
        files: Vec::new(),
        metrics: json!({
            "eta": eta,
            "particles": particles,
            "runs": cfg.runs,
            "strong_error": err.value,
            "strong_error_std_error": err.std_error,
            "exchangeable_error": err.exchangeable_mean,
            "exchangeable_std_error": err.exchangeable_std_error,
            "w2_to_pde": w2,
            "w2_to_pde_std_error": w2_se,
        }),
    })
}

pub fn coupled_setup(cfg: &ExperimentConfig) -> Result<CoupledSetup> {
    Ok(CoupledSetup {
        sigma: cfg.species.sigma.clone(),
        pair_mass: cfg.species.pair_mass.clone(),
        nonlinearity: cfg.interaction.nonlinearity.clone(),
        alpha: cfg.interaction.alpha,
        profile: MollifierProfile::new(cfg.interaction.profile, 1.0, cfg.species.initial.dim())?,
        initial: cfg.species.initial.clone(),
        grid: cfg.time_grid()?,
        potential: cfg.interaction.potential,
        runs: cfg.runs,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub eta: f64,
    pub particles: u64,
    pub strong_error: f64,
    pub strong_error_std_error: f64,
    pub exchangeable_error: f64,
    pub exchangeable_std_error: f64,
    pub w2_to_pde: f64,
    pub w2_to_pde_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyTable {
    pub rows: Vec<StudyRow>,
    /// Fit of `log strong_error` against `log eta`; absent when an error is zero.
    pub slope: Option<SlopeFit>,
    pub exchangeable_slope: Option<SlopeFit>,
}

impl StudyTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "eta,particles,strong_error,strong_error_std_error,exchangeable_error,exchangeable_std_error,w2_to_pde,w2_to_pde_std_error\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.eta,
                r.particles,
                r.strong_error,
                r.strong_error_std_error,
                r.exchangeable_error,
                r.exchangeable_std_error,
                r.w2_to_pde,
                r.w2_to_pde_std_error
            ));
        }
        out
    }
}

/// Particle counts for every eta of a study, all checked before any work.
pub fn study_particles(base: &ExperimentConfig, study: &StudyConfig) -> Result<Vec<u64>> {
    study
        .etas
        .iter()
        .enumerate()
        .map(|(k, &eta)| {
            let mut cfg = base.clone();
            match &study.particles {
                Some(counts) => {
                    cfg.particles.count = Some(counts[k]);
                }
                None => {
                    cfg.particles.count = None;
                    cfg.particles.delta = Some(study.delta);
                }
            }
            cfg.resolve_particles(eta)
        })
        .collect()
}

/// Strong error and `W_2` to the local PDE for each kernel radius, with the
/// particle count from the scaling relation unless given explicitly.
pub fn convergence_study(base: &ExperimentConfig, study: &StudyConfig, plan: &NoisePlan) -> Result<StudyTable> {
    let counts = study_particles(base, study)?;
    let local = solve_pde(base, None)?;
    let setup = coupled_setup(base)?;
    let mut rows = Vec::with_capacity(counts.len());
    for (&eta, &n) in study.etas.iter().zip(&counts) {
        let out = run_coupled(&setup, &local, eta, n as usize, plan)?;
        let err = strong_error(&out)?;
        let finals: Vec<Vec<Vec<f64>>> = out
            .final_particles
            .iter()
            .map(|e| (0..e.species()).map(|i| e.species_positions(i).to_vec()).collect())
            .collect();
        let (w2, w2_se) = w2_to_field(&finals, local.last().expect("at least one snapshot"), plan)?;
        rows.push(StudyRow {
            eta,
            particles: n,
            strong_error: err.value,
            strong_error_std_error: err.std_error,
            exchangeable_error: err.exchangeable_mean,
            exchangeable_std_error: err.exchangeable_std_error,
            w2_to_pde: w2,
            w2_to_pde_std_error: w2_se,
        });
    }
    let etas: Vec<f64> = rows.iter().map(|r| r.eta).collect();
    let fit = |y: Vec<f64>, se: Vec<f64>| fit_loglog(&etas, &y, Some(&se)).ok();
    let slope = fit(
        rows.iter().map(|r| r.strong_error).collect(),
        rows.iter().map(|r| r.strong_error_std_error).collect(),
    );
    let exchangeable_slope = fit(
        rows.iter().map(|r| r.exchangeable_error).collect(),
        rows.iter().map(|r| r.exchangeable_std_error).collect(),
    );
    Ok(StudyTable {
        rows,
        slope,
        exchangeable_slope,
    })
}

fn study_pipeline(cfg: &ExperimentConfig, out_dir: &Path, plan: &NoisePlan) -> Result<PipelineOutput> {
    let table = convergence_study(cfg, &cfg.study_or_default(), plan)?;
    let rel = "eta-sweep/study.csv".to_string();
    write_file(&out_dir.join(&rel), &table.to_csv())?;
    Ok(PipelineOutput {
        files: vec![OutputEntry {
            path: rel,
            kind: "study-table".into(),
            system: Some(SystemKind::EtaSweep),
            time: None,
        }],
        metrics: serde_json::to_value(&table).map_err(|e| Error::Serialization(e.to_string()))?,
    })
}

fn run_pipeline(cfg: &ExperimentConfig, system: SystemKind, out_dir: &Path, plan: &NoisePlan) -> Result<PipelineOutput> {
    match system {
        SystemKind::SktParticles | SystemKind::GradientParticles | SystemKind::Intermediate | SystemKind::Macroscopic => {
            particle_pipeline(cfg, system, out_dir, plan)
        }
        SystemKind::PdeLocal | SystemKind::PdeNonlocal => pde_pipeline(cfg, system, out_dir),
        SystemKind::CoupledError => coupled_pipeline(cfg, plan),
        SystemKind::EtaSweep => study_pipeline(cfg, out_dir, plan),
    }
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(k) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {k} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

/// Executes every pipeline of `cfg` and writes densities, `metrics.json`,
/// the resolved `config.toml` and `manifest.json` into `out_dir`.
///
/// On a pipeline failure the outputs written so far are kept, the manifest
/// is marked partial and the error is returned with the pipeline name.
pub fn run(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let started = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let plan = NoisePlan::new(cfg.seed);
    let config_hash = cfg.hash()?;

    write_file(&out_dir.join(CONFIG_FILE), &cfg.to_toml()?)?;
    let mut outputs = vec![OutputEntry {
        path: CONFIG_FILE.into(),
        kind: "config".into(),
        system: None,
        time: None,
    }];
    let mut systems = serde_json::Map::new();
    let mut failure: Option<(SystemKind, Error)> = None;
    for &system in &cfg.systems {
        match with_workers(cfg.workers, || run_pipeline(cfg, system, out_dir, &plan))? {
            Ok(out) => {
                outputs.extend(out.files);
                systems.insert(system.name().into(), out.metrics);
            }
            Err(e) => {
                failure = Some((system, e));
                break;
            }
        }
    }

    let metrics = json!({
        "experiment": cfg.name,
        "config_hash": config_hash,
        "seed": cfg.seed,
        "desk_scale": cfg.desk_scale,
        "parameters": {
            "eta": cfg.interaction.eta,
            "alpha": cfg.interaction.alpha,
            "dt": cfg.time.dt,
            "t_final": cfg.time.t_final,
            "runs": cfg.runs,
            "sigma": cfg.species.sigma,
            "pair_mass": cfg.species.pair_mass,
            "histogram_bins": cfg.histogram.bins,
            "histogram_half_width": cfg.histogram.half_width,
        },
        "systems": systems,
    });
    write_json(&out_dir.join(METRICS_FILE), &metrics)?;
    outputs.push(OutputEntry {
        path: METRICS_FILE.into(),
        kind: "metrics".into(),
        system: None,
        time: None,
    });

    let manifest = RunManifest {
        experiment: cfg.name.clone(),
        config_hash,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: started.elapsed().as_secs_f64(),
        master_seed: cfg.seed,
        run_seeds: (0..cfg.runs as u64).map(|r| plan.run_seed(r)).collect(),
        desk_scale: cfg.desk_scale,
        histogram: cfg.histogram.clone(),
        outputs,
        partial: failure.is_some(),
        failures: failure
            .iter()
            .map(|(s, e)| Failure {
                pipeline: s.name().into(),
                kind: e.kind().into(),
                message: e.to_string(),
            })
            .collect(),
        config: cfg.clone(),
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    match failure {
        None => Ok(manifest),
        Some((system, source)) => Err(Error::Pipeline {
            experiment: cfg.name.clone(),
            pipeline: system.name().into(),
            source: Box::new(source),
        }),
    }
}

/// Copies every density snapshot of a finished run into `plots/` as one CSV
/// per figure panel (`x,u_1,...,u_n`) and writes `plots/index.json`
/// describing the panels. The manifest next to the run is updated with the
/// new files.
pub fn emit_plot_data(manifest_path: &Path) -> Result<Vec<PathBuf>> {
    let mut manifest = RunManifest::load(manifest_path)?;
    let out_dir = manifest_path.parent().unwrap_or(Path::new("."));
    let cfg = &manifest.config;
    let mut missing = Vec::new();
    let mut panels = Vec::new();
    for &system in cfg.systems.iter().filter(|s| s.has_panels()) {
        for t in cfg.snapshot_times() {
            let entry = manifest
                .outputs
                .iter()
                .find(|o| o.system == Some(system) && o.time == Some(t) && (o.kind == "density" || o.kind == "field"));
            let expected = match system {
                SystemKind::PdeLocal | SystemKind::PdeNonlocal => format!("{}/field_t{}.csv", system.name(), time_label(t)),
                _ => format!("{}/density_t{}.csv", system.name(), time_label(t)),
            };
            match entry {
                Some(e) if out_dir.join(&e.path).is_file() => panels.push((system, t, e.path.clone())),
                Some(e) => missing.push(out_dir.join(&e.path)),
                None => missing.push(out_dir.join(expected)),
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingOutputs(missing));
    }
    let mut written = Vec::new();
    let mut index = Vec::new();
    let columns: Vec<String> = std::iter::once("x".to_string())
        .chain((1..=cfg.species_count()).map(|i| format!("u_{i}")))
        .collect();
    for (system, t, src) in panels {
        let rel = format!("plots/{}_t{}.csv", system.name(), time_label(t));
        let from = out_dir.join(&src);
        let text = std::fs::read_to_string(&from).map_err(|e| Error::io(&from, e))?;
        write_file(&out_dir.join(&rel), &text)?;
        index.push(json!({ "file": rel, "system": system, "time": t, "source": src }));
        written.push(out_dir.join(&rel));
        if !manifest.outputs.iter().any(|o| o.path == rel) {
            manifest.outputs.push(OutputEntry {
                path: rel,
                kind: "plot-panel".into(),
                system: Some(system),
                time: Some(t),
            });
        }
    }
    let index_rel = "plots/index.json";
    write_json(
        &out_dir.join(index_rel),
        &json!({
            "columns": columns,
            "x": "bin or cell center",
            "u_i": "density of species i (integrates to one over [-L, L])",
            "panels": index,
        }),
    )?;
    written.push(out_dir.join(index_rel));
    if !manifest.outputs.iter().any(|o| o.path == index_rel) {
        manifest.outputs.push(OutputEntry {
            path: index_rel.into(),
            kind: "plot-index".into(),
            system: None,
            time: None,
        });
    }
    write_json(manifest_path, &manifest)?;
    Ok(written)
}
