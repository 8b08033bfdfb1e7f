//! Python module `pysktsim`: kernels, cutoffs, sampling, particle and PDE
//! simulation, metrics and the experiment runner.

use std::path::Path;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use sktsim::config::{preset, ExperimentConfig, SystemKind};
use sktsim::kernels::{self, MollifierProfile, ProfileShape};
use sktsim::metrics;
use sktsim::noise::NoisePlan;
use sktsim::nonlinearity::{self, NonlinearityKind};
use sktsim::particles::{self, InitialDistribution};
use sktsim::{runner, sde};

create_exception!(pysktsim, SktsimError, PyException);

fn err(e: sktsim::Error) -> PyErr {
    SktsimError::new_err(format!("[{}] {e}", e.kind()))
}

fn shape(name: &str) -> PyResult<ProfileShape> {
    match name {
        "bump" => Ok(ProfileShape::Bump),
        "indicator" => Ok(ProfileShape::Indicator),
        other => Err(SktsimError::new_err(format!("unknown profile '{other}'"))),
    }
}

fn system(name: &str) -> PyResult<SystemKind> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| SktsimError::new_err(format!("unknown system '{name}'")))
}

fn config(text: &str) -> PyResult<ExperimentConfig> {
    ExperimentConfig::from_toml(text).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (r, shape_name = "bump", amplitude = 1.0))]
fn profile_eval(r: f64, shape_name: &str, amplitude: f64) -> PyResult<f64> {
    if !(r >= 0.0) {
        return Err(SktsimError::new_err(format!("radius must be >= 0, got {r}")));
    }
    Ok(kernels::profile_eval(shape(shape_name)?, amplitude, r))
}

#[pyfunction]
#[pyo3(signature = (dim = 1, shape_name = "bump", amplitude = 1.0))]
fn kernel_mass(dim: usize, shape_name: &str, amplitude: f64) -> PyResult<f64> {
    kernels::kernel_mass(shape(shape_name)?, amplitude, dim).map_err(err)
}

/// Pair-scaled kernels `B_ij^eta` with masses `a_ij`.
#[pyclass(frozen)]
struct KernelFamily {
    inner: kernels::KernelFamily,
}

#[pymethods]
impl KernelFamily {
    #[new]
    #[pyo3(signature = (eta, pair_mass, dim = 1, shape_name = "bump"))]
    fn new(eta: f64, pair_mass: Vec<Vec<f64>>, dim: usize, shape_name: &str) -> PyResult<Self> {
        let profile = MollifierProfile::new(shape(shape_name)?, 1.0, dim).map_err(err)?;
        let inner = kernels::KernelFamily::new(profile, eta, &pair_mass).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta()
    }

    fn pair_mass(&self, i: usize, j: usize) -> f64 {
        self.inner.pair_mass(i, j)
    }

    fn eval(&self, x: Vec<f64>, i: usize, j: usize) -> PyResult<f64> {
        self.check(&x, i, j)?;
        Ok(self.inner.eval(&x, i, j))
    }

    fn grad(&self, x: Vec<f64>, i: usize, j: usize) -> PyResult<Vec<f64>> {
        self.check(&x, i, j)?;
        let mut out = vec![0.0; x.len()];
        self.inner.grad(&x, i, j, &mut out);
        Ok(out)
    }
}

impl KernelFamily {
    fn check(&self, x: &[f64], i: usize, j: usize) -> PyResult<()> {
        let n = self.inner.species();
        if x.len() != self.inner.dim() || i >= n || j >= n {
            return Err(SktsimError::new_err(format!(
                "need a {}-vector and species indices below {n}",
                self.inner.dim()
            )));
        }
        Ok(())
    }
}

/// Globally Lipschitz cutoff `f_eta` of a nonlinearity.
#[pyclass(frozen)]
struct Cutoff {
    inner: nonlinearity::CutoffNonlinearity,
}

#[pymethods]
impl Cutoff {
    /// `family` is one of `zero`, `identity`, `power` (needs `exponent`) or
    /// `tabulated` (needs `points`).
    #[new]
    #[pyo3(signature = (family, eta, alpha = 0.0, exponent = None, points = None))]
    fn new(family: &str, eta: f64, alpha: f64, exponent: Option<f64>, points: Option<Vec<[f64; 2]>>) -> PyResult<Self> {
        let kind = match (family, exponent, points) {
            ("zero", _, _) => NonlinearityKind::Zero,
            ("identity", _, _) => NonlinearityKind::Identity,
            ("power", Some(exponent), _) => NonlinearityKind::Power { exponent },
            ("tabulated", _, Some(points)) => NonlinearityKind::Tabulated { points },
            _ => return Err(SktsimError::new_err(format!("cannot build nonlinearity '{family}'"))),
        };
        let inner = nonlinearity::make_cutoff(kind, eta, alpha).map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn a_eta(&self) -> f64 {
        self.inner.a_eta()
    }

    #[getter]
    fn lip_bound(&self) -> f64 {
        self.inner.lip_bound()
    }

    fn eval(&self, s: f64) -> f64 {
        self.inner.eval(s)
    }

    fn deriv(&self, s: f64) -> f64 {
        self.inner.deriv(s)
    }
}

#[pyfunction]
#[pyo3(signature = (eta, delta, dim = 1, alpha = 0.0))]
fn min_particles(eta: f64, delta: f64, dim: usize, alpha: f64) -> PyResult<u64> {
    sde::min_particles(eta, delta, dim, alpha).map_err(err)
}

/// Initial 1D Gaussian samples, one list per species.
#[pyfunction]
#[pyo3(signature = (means, variance, particles, seed, run = 0))]
fn sample_initial(means: Vec<f64>, variance: f64, particles: usize, seed: u64, run: u64) -> PyResult<Vec<Vec<f64>>> {
    let dist = InitialDistribution::gaussians_1d(&means, variance);
    let e = particles::sample_initial(&dist, particles, &NoisePlan::new(seed), run).map_err(err)?;
    Ok((0..e.species()).map(|i| e.species_positions(i).to_vec()).collect())
}

/// Positions `[run][snapshot][species][particle]` of one particle system at
/// the configured snapshot times.
#[pyfunction]
#[pyo3(signature = (config_toml, system_name, eta = None))]
fn simulate_particles(config_toml: &str, system_name: &str, eta: Option<f64>) -> PyResult<Vec<Vec<Vec<Vec<f64>>>>> {
    let cfg = config(config_toml)?;
    let kind = system(system_name)?;
    let eta = eta.unwrap_or(cfg.interaction.eta);
    let particles = cfg.resolve_particles(eta).map_err(err)? as usize;
    let indices = cfg.snapshot_indices().map_err(err)?;
    let fields = match kind {
        SystemKind::Intermediate => Some(runner::solve_pde(&cfg, Some(eta)).map_err(err)?),
        SystemKind::Macroscopic => Some(runner::solve_pde(&cfg, None).map_err(err)?),
        _ => None,
    };
    runner::simulate_particles(&cfg, kind, eta, particles, &indices, fields.as_deref(), &NoisePlan::new(cfg.seed))
        .map_err(err)
}

/// Local (`eta=None`) or nonlocal PDE solution at the snapshot times, as
/// `(cell centers, [snapshot][species][cell])`.
#[pyfunction]
#[pyo3(signature = (config_toml, eta = None))]
fn solve_pde(config_toml: &str, eta: Option<f64>) -> PyResult<(Vec<f64>, Vec<Vec<Vec<f64>>>)> {
    let cfg = config(config_toml)?;
    let fields = runner::solve_pde(&cfg, eta).map_err(err)?;
    let centers = fields[0].grid().centers();
    let snaps = cfg
        .snapshot_indices()
        .map_err(err)?
        .iter()
        .map(|&m| (0..fields[m].species()).map(|i| fields[m].values(i).to_vec()).collect())
        .collect();
    Ok((centers, snaps))
}

#[pyfunction]
fn wasserstein2_1d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    metrics::wasserstein2_1d(&a, &b).map_err(err)
}

/// Pooled histogram of `samples[run][species]`; returns
/// `(bin centers, [species][bin] densities, out-of-range counts)`.
#[pyfunction]
fn histogram(samples: Vec<Vec<Vec<f64>>>, half_width: f64, bins: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>, Vec<u64>)> {
    let d = metrics::histogram_samples(&samples, half_width, bins).map_err(err)?;
    let centers = (0..d.bins).map(|b| d.bin_center(b)).collect();
    Ok((centers, d.density, d.out_of_range))
}

/// `(modes per species, overlap matrix)` of a histogram of `samples[run][species]`.
#[pyfunction]
#[pyo3(signature = (samples, half_width, bins, window = 5))]
fn segregation(samples: Vec<Vec<Vec<f64>>>, half_width: f64, bins: usize, window: usize) -> PyResult<(Vec<usize>, Vec<Vec<f64>>)> {
    let d = metrics::histogram_samples(&samples, half_width, bins).map_err(err)?;
    let n = d.density.len();
    let modes = (0..n).map(|i| metrics::mode_count(&d, i, window)).collect();
    let overlap = (0..n)
        .map(|i| (0..n).map(|j| metrics::segregation_overlap(&d, i, j)).collect())
        .collect();
    Ok((modes, overlap))
}

/// `(slope, intercept, slope standard error)` of `log y` against `log x`.
#[pyfunction]
#[pyo3(signature = (x, y, y_se = None))]
fn fit_loglog(x: Vec<f64>, y: Vec<f64>, y_se: Option<Vec<f64>>) -> PyResult<(f64, f64, f64)> {
    let fit = metrics::fit_loglog(&x, &y, y_se.as_deref()).map_err(err)?;
    Ok((fit.slope, fit.intercept, fit.slope_std_error))
}

#[pyfunction]
#[pyo3(signature = (name, desk_scale = false))]
fn preset_toml(name: &str, desk_scale: bool) -> PyResult<String> {
    let mut cfg = preset(name).map_err(err)?;
    if desk_scale {
        cfg.apply_desk_scale();
    }
    cfg.to_toml().map_err(err)
}

/// Runs every pipeline of a config and returns the manifest as JSON.
#[pyfunction]
fn run(config_toml: &str, out_dir: &str) -> PyResult<String> {
    let manifest = runner::run(&config(config_toml)?, Path::new(out_dir)).map_err(err)?;
    serde_json::to_string(&manifest).map_err(|e| SktsimError::new_err(e.to_string()))
}

#[pymodule]
fn pysktsim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SktsimError", m.py().get_type::<SktsimError>())?;
    m.add_class::<KernelFamily>()?;
    m.add_class::<Cutoff>()?;
    m.add_function(wrap_pyfunction!(profile_eval, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_mass, m)?)?;
    m.add_function(wrap_pyfunction!(min_particles, m)?)?;
    m.add_function(wrap_pyfunction!(sample_initial, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_particles, m)?)?;
    m.add_function(wrap_pyfunction!(solve_pde, m)?)?;
    m.add_function(wrap_pyfunction!(wasserstein2_1d, m)?)?;
    m.add_function(wrap_pyfunction!(histogram, m)?)?;
    m.add_function(wrap_pyfunction!(segregation, m)?)?;
    m.add_function(wrap_pyfunction!(fit_loglog, m)?)?;
    m.add_function(wrap_pyfunction!(preset_toml, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
