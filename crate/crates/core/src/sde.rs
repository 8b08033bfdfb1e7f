//! Euler–Maruyama steppers for the four particle systems and the pathwise
//! coupling between the interacting system and its macroscopic limit.
//!
//! All steppers take the Brownian increments `dW` (already scaled by
//! `sqrt(dt)`, layout `[species][particle][dim]`) as an argument, so coupled
//! systems are driven by literally the same numbers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::nonlinearity::CutoffNonlinearity;
use crate::noise::{NoisePlan, TimeGrid};
use crate::particles::{build_cells, interaction_gradients, interaction_sums, sample_initial, InitialDistribution, ParticleEnsemble};
use crate::pde::{interpolate_field, FieldState};

/// Environmental potential. `On` is `U(x) = -|x|^2 / 2`, i.e. drift `+x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    #[default]
    Off,
    On,
}

impl Potential {
    pub fn from_flag(on: bool) -> Self {
        if on {
            Potential::On
        } else {
            Potential::Off
        }
    }

    #[inline]
    fn drift(self, x: f64) -> f64 {
        match self {
            Potential::Off => 0.0,
            Potential::On => x,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanFieldKind {
    /// Driven by the nonlocal PDE solution through `f_eta(B^eta * u)`.
    Intermediate,
    /// Driven by the local PDE solution through `f(a u)`.
    Macroscopic,
}

fn check_step(e: &ParticleEnsemble, sigma: &[f64], dt: f64, dw: &[f64]) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    if sigma.len() != e.species() || sigma.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config(format!(
            "need {} positive diffusion constants, got {sigma:?}",
            e.species()
        )));
    }
    if dw.len() != e.positions().len() {
        return Err(Error::Contract(format!(
            "expected {} noise increments, got {}",
            e.positions().len(),
            dw.len()
        )));
    }
    Ok(())
}

/// Moves every particle by `drift dt + coef(i, flat) * dW`.
fn advance<C>(e: &ParticleEnsemble, potential: Potential, dt: f64, dw: &[f64], coef: C) -> Result<ParticleEnsemble>
where
    C: Fn(usize, usize) -> f64,
{
    let d = e.dim();
    let n_part = e.particles();
    let time = e.time() + dt;
    let mut next = Vec::with_capacity(e.positions().len());
    for i in 0..e.species() {
        for k in 0..n_part {
            let flat = e.flat_index(i, k);
            let c = coef(i, flat);
            for (x, w) in e.position(i, k).iter().zip(&dw[flat * d..(flat + 1) * d]) {
                let y = x + potential.drift(*x) * dt + c * w;
                if !y.is_finite() {
                    return Err(Error::NonFinite {
                        species: i,
                        particle: k,
                        time,
                    });
                }
                next.push(y);
            }
        }
    }
    Ok(e.with_positions(next, time))
}

#[inline]
fn diffusion_coefficient(sigma: f64, interaction: f64) -> f64 {
    let arg = 2.0 * sigma + 2.0 * interaction;
    assert!(
        arg >= 2.0 * sigma,
        "diffusion argument {arg} below 2 sigma = {}: f_eta must be nonnegative",
        2.0 * sigma
    );
    arg.sqrt()
}

/// One step of the system with interaction in the diffusion coefficient:
/// `x += drift dt + sqrt(2 sigma_i + 2 sum_j f_eta(S_j)) dW` with `S` the
/// self-excluded empirical convolutions.
pub fn em_step_skt(
    e: &ParticleEnsemble,
    kf: &KernelFamily,
    cut: &CutoffNonlinearity,
    sigma: &[f64],
    potential: Potential,
    dt: f64,
    dw: &[f64],
) -> Result<ParticleEnsemble> {
    check_step(e, sigma, dt, dw)?;
    let n = e.species();
    if cut.is_zero() || kf.is_zero() {
        // every S_j is zero
        let base: f64 = (0..n).map(|_| cut.eval(0.0)).sum();
        return advance(e, potential, dt, dw, |i, _| diffusion_coefficient(sigma[i], base));
    }
    let cells = build_cells(e, kf.eta())?;
    let sums = interaction_sums(e, &cells, kf)?;
    advance(e, potential, dt, dw, |i, flat| {
        let total: f64 = sums[flat * n..(flat + 1) * n].iter().map(|&s| cut.eval(s)).sum();
        diffusion_coefficient(sigma[i], total)
    })
}

/// One step of the system with interaction in the drift:
/// `y += -sum_j (1/N) sum_l grad B_ij^eta(y - y_l) dt + sqrt(2 sigma_i) dW`.
pub fn em_step_gradient(
    e: &ParticleEnsemble,
    kf: &KernelFamily,
    sigma: &[f64],
    dt: f64,
    dw: &[f64],
) -> Result<ParticleEnsemble> {
    check_step(e, sigma, dt, dw)?;
    let n = e.species();
    let d = e.dim();
    let time = e.time() + dt;
    let grads = if kf.is_zero() {
        vec![0.0; e.positions().len() * n]
    } else {
        let cells = build_cells(e, kf.eta())?;
        interaction_gradients(e, &cells, kf)?
    };
    let mut next = Vec::with_capacity(e.positions().len());
    for i in 0..n {
        let c = (2.0 * sigma[i]).sqrt();
        for k in 0..e.particles() {
            let flat = e.flat_index(i, k);
            for (dim, x) in e.position(i, k).iter().enumerate() {
                let force: f64 = (0..n).map(|j| grads[(flat * n + j) * d + dim]).sum();
                let y = x - force * dt + c * dw[flat * d + dim];
                if !y.is_finite() {
                    return Err(Error::NonFinite {
                        species: i,
                        particle: k,
                        time,
                    });
                }
                next.push(y);
            }
        }
    }
    Ok(e.with_positions(next, time))
}

/// One step of a mean-field system, reading densities from `field`.
#[allow(clippy::too_many_arguments)]
pub fn em_step_meanfield(
    e: &ParticleEnsemble,
    field: &FieldState,
    kind: MeanFieldKind,
    kf: &KernelFamily,
    cut: &CutoffNonlinearity,
    sigma: &[f64],
    potential: Potential,
    dt: f64,
    dw: &[f64],
) -> Result<ParticleEnsemble> {
    check_step(e, sigma, dt, dw)?;
    if e.dim() != 1 {
        return Err(Error::Contract("mean-field steppers are one-dimensional".into()));
    }
    if (e.time() - field.time()).abs() > 1e-9 * e.time().abs().max(1.0) {
        return Err(Error::Contract(format!(
            "ensemble time {} does not match field time {}",
            e.time(),
            field.time()
        )));
    }
    if field.species() != e.species() || kf.species() != e.species() {
        return Err(Error::Contract("species count mismatch between ensemble, field and kernels".into()));
    }
    let n = e.species();
    let mut totals = vec![0.0; e.positions().len()];
    for i in 0..n {
        for k in 0..e.particles() {
            let x = e.position(i, k)[0];
            let flat = e.flat_index(i, k);
            totals[flat] = match kind {
                MeanFieldKind::Intermediate => (0..n)
                    .map(|j| cut.eval(field.convolution_at(j, x, kf, i)))
                    .sum(),
                MeanFieldKind::Macroscopic => {
                    let u = interpolate_field(field, x);
                    let f = cut.kind();
                    (0..n).map(|j| f.value(kf.pair_mass(i, j) * u[j])).sum()
                }
            };
        }
    }
    advance(e, potential, dt, dw, |i, flat| diffusion_coefficient(sigma[i], totals[flat]))
}

/// Least `N` with `eta^-2(d+1+alpha) <= delta log N`.
pub fn min_particles(eta: f64, delta: f64, dim: usize, alpha: f64) -> Result<u64> {
    if !(eta > 0.0) || !(delta > 0.0) {
        return Err(Error::Config(format!(
            "eta and delta must be positive (eta = {eta}, delta = {delta})"
        )));
    }
    let log_n = eta.powf(-2.0 * (dim as f64 + 1.0 + alpha)) / delta;
    if log_n > 700.0 || log_n.exp().ceil() >= u64::MAX as f64 {
        return Err(Error::ScalingInfeasible {
            required_log_n: log_n,
        });
    }
    Ok(log_n.exp().ceil() as u64)
}

/// Everything the coupled SKT / macroscopic comparison needs besides `eta`
/// and `N`.
#[derive(Debug, Clone)]
pub struct CoupledSetup {
    pub sigma: Vec<f64>,
    pub pair_mass: Vec<Vec<f64>>,
    pub nonlinearity: crate::nonlinearity::NonlinearityKind,
    pub alpha: f64,
    pub profile: crate::kernels::MollifierProfile,
    pub initial: InitialDistribution,
    pub grid: TimeGrid,
    pub potential: Potential,
    pub runs: usize,
}

/// Per-run, per-particle `max_s |X(s) - X_hat(s)|^2`, layout
/// `[run][species][particle]`, plus the final interacting ensembles.
#[derive(Debug, Clone)]
pub struct CoupledOutput {
    pub runs: usize,
    pub species: usize,
    pub particles: usize,
    pub sup_sq: Vec<f64>,
    pub final_particles: Vec<ParticleEnsemble>,
}

/// Runs the interacting system and the macroscopic system from shared initial
/// samples with shared increments, recording the largest squared distance of
/// every coupled pair over the time grid.
pub fn run_coupled(
    setup: &CoupledSetup,
    local: &[FieldState],
    eta: f64,
    particles: usize,
    plan: &NoisePlan,
) -> Result<CoupledOutput> {
    let grid = setup.grid;
    if local.len() != grid.steps() + 1 {
        return Err(Error::Contract(format!(
            "need {} local PDE snapshots, got {}",
            grid.steps() + 1,
            local.len()
        )));
    }
    let kf = KernelFamily::new(setup.profile.clone(), eta, &setup.pair_mass)?;
    let cut = crate::nonlinearity::make_cutoff(setup.nonlinearity.clone(), eta, setup.alpha)?;
    let n = setup.sigma.len();
    let per_run: Vec<Result<(Vec<f64>, ParticleEnsemble)>> = (0..setup.runs)
        .into_par_iter()
        .map(|run| {
            let run = run as u64;
            let start = sample_initial(&setup.initial, particles, plan, run)?;
            let mut noise = plan.run_noise(run, n, particles, start.dim());
            let mut x = start.clone();
            let mut x_hat = start;
            let mut sup = vec![0.0f64; n * particles];
            let mut dw = Vec::new();
            for m in 0..grid.steps() {
                noise.fill_increments(grid.dt(), &mut dw);
                let next = em_step_skt(&x, &kf, &cut, &setup.sigma, setup.potential, grid.dt(), &dw)?;
                let next_hat = em_step_meanfield(
                    &x_hat,
                    &local[m],
                    MeanFieldKind::Macroscopic,
                    &kf,
                    &cut,
                    &setup.sigma,
                    setup.potential,
                    grid.dt(),
                    &dw,
                )?;
                x = next;
                x_hat = next_hat;
                let d = x.dim();
                for (flat, s) in sup.iter_mut().enumerate() {
                    let a = &x.positions()[flat * d..(flat + 1) * d];
                    let b = &x_hat.positions()[flat * d..(flat + 1) * d];
                    let dist2: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
                    *s = s.max(dist2);
                }
            }
            Ok((sup, x))
        })
        .collect();
    let mut sup_sq = Vec::with_capacity(setup.runs * n * particles);
    let mut final_particles = Vec::with_capacity(setup.runs);
    for r in per_run {
        let (sup, x) = r?;
        sup_sq.extend(sup);
        final_particles.push(x);
    }
    Ok(CoupledOutput {
        runs: setup.runs,
        species: n,
        particles,
        sup_sq,
        final_particles,
    })
}
