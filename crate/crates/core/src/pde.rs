//! Explicit conservative finite-volume solvers for the local and nonlocal
//! cross-diffusion systems in one dimension.
//!
//! The domain `[-L, L]` is split into `M` cells of width `dx` with no-flux
//! walls. Each species is advanced in flux form
//!
//! ```text
//! u_c <- u_c - dt/dx (F_{c+1/2} - F_{c-1/2}),
//! F_{c+1/2} = upwind(x u)_{c+1/2} - (P_{c+1} - P_c) / dx,
//! ```
//!
//! with the scalar pressure `P_i = sigma_i u_i + u_i sum_j g_ij` where
//! `g_ij = f(a_ij u_j)` (local) or `f_eta(B_ij^eta * u_j)` (nonlocal), so mass
//! is conserved up to roundoff by construction.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::nonlinearity::{CutoffNonlinearity, NonlinearityKind};
use crate::noise::TimeGrid;
use crate::particles::InitialDistribution;
use crate::sde::Potential;

/// Largest density tolerated in the boundary cells of a snapshot.
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;
/// Most negative density value accepted as roundoff.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-10;
/// Fraction of the stability bound used when the substep is chosen automatically.
pub const ADAPTIVE_SAFETY: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    half_width: f64,
    dx: f64,
    cells: usize,
}

impl Grid {
    pub fn new(half_width: f64, dx: f64) -> Result<Self> {
        if !(half_width > 0.0 && dx > 0.0 && dx < half_width) {
            return Err(Error::Config(format!(
                "grid needs 0 < dx < L (L = {half_width}, dx = {dx})"
            )));
        }
        let cells = (2.0 * half_width / dx).round() as usize;
        if (cells as f64 * dx - 2.0 * half_width).abs() > 1e-9 * half_width {
            return Err(Error::Config(format!(
                "dx = {dx} does not divide the domain [-{half_width}, {half_width}]"
            )));
        }
        Ok(Self {
            half_width,
            dx,
            cells,
        })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn center(&self, c: usize) -> f64 {
        -self.half_width + (c as f64 + 0.5) * self.dx
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.cells).map(|c| self.center(c)).collect()
    }

    pub fn matches(&self, other: &Grid) -> bool {
        self.cells == other.cells
            && (self.dx - other.dx).abs() <= 1e-12 * self.dx
            && (self.half_width - other.half_width).abs() <= 1e-12 * self.half_width
    }
}

/// Grid densities of all species at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    grid: Grid,
    densities: Vec<Vec<f64>>,
    time: f64,
}

impl FieldState {
    pub fn new(grid: Grid, densities: Vec<Vec<f64>>, time: f64) -> Result<Self> {
        if densities.is_empty() || densities.iter().any(|u| u.len() != grid.cells()) {
            return Err(Error::Config(format!(
                "each species needs {} cell values",
                grid.cells()
            )));
        }
        Ok(Self {
            grid,
            densities,
            time,
        })
    }

    /// Cell-center values of the mixtures, renormalized to unit mass.
    pub fn from_initial(grid: Grid, u0: &InitialDistribution) -> Result<Self> {
        u0.validate()?;
        if u0.dim() != 1 {
            return Err(Error::Config("PDE initial data must be one-dimensional".into()));
        }
        let centers = grid.centers();
        let densities = u0
            .species
            .iter()
            .map(|m| {
                let mut u: Vec<f64> = centers.iter().map(|&x| m.density(&[x])).collect();
                let mass: f64 = u.iter().sum::<f64>() * grid.dx();
                u.iter_mut().for_each(|v| *v /= mass);
                u
            })
            .collect();
        Self::new(grid, densities, 0.0)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn species(&self) -> usize {
        self.densities.len()
    }

    pub fn values(&self, species: usize) -> &[f64] {
        &self.densities[species]
    }

    pub fn mass(&self, species: usize) -> f64 {
        self.densities[species].iter().sum::<f64>() * self.grid.dx()
    }

    /// `(B_ij^eta * u_j)(x)` at an arbitrary point: a sum over the cell
    /// lattice with weights rescaled to total exactly `a_ij`. Lattice points
    /// outside the domain carry zero density but still count towards the
    /// normalization.
    pub fn convolution_at(&self, j: usize, x: f64, kf: &KernelFamily, i: usize) -> f64 {
        let g = &self.grid;
        let eta = kf.eta();
        let lo = ((x - eta + g.half_width) / g.dx - 0.5).ceil() as i64;
        let hi = ((x + eta + g.half_width) / g.dx - 0.5).floor() as i64;
        let u = &self.densities[j];
        let mut acc = 0.0;
        let mut total = 0.0;
        for c in lo..=hi {
            let w = kf.eval(&[x - (-g.half_width + (c as f64 + 0.5) * g.dx)], i, j);
            total += w;
            if c >= 0 && (c as usize) < g.cells {
                acc += w * u[c as usize];
            }
        }
        if total > 0.0 {
            acc * kf.pair_mass(i, j) / total
        } else {
            0.0
        }
    }

    /// Samples `uniforms.len()` positions of one species by inverting the CDF
    /// of the piecewise-constant density.
    pub fn sample_inverse_cdf(&self, species: usize, uniforms: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut cum = Vec::with_capacity(g.cells + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        for &v in &self.densities[species] {
            acc += v.max(0.0) * g.dx;
            cum.push(acc);
        }
        uniforms
            .iter()
            .map(|&u| {
                let target = u * acc;
                let c = (cum.partition_point(|&m| m <= target).max(1) - 1).min(g.cells - 1);
                let width = cum[c + 1] - cum[c];
                let frac = if width > 0.0 { (target - cum[c]) / width } else { 0.5 };
                -g.half_width + (c as f64 + frac.clamp(0.0, 1.0)) * g.dx
            })
            .collect()
    }

    /// Writes `x,u_1,...,u_n` rows at the cell centers.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("x");
        for i in 0..self.species() {
            out.push_str(&format!(",u_{}", i + 1));
        }
        out.push('\n');
        for c in 0..self.grid.cells {
            out.push_str(&format!("{}", self.grid.center(c)));
            for u in &self.densities {
                out.push_str(&format!(",{}", u[c]));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Linear interpolation between cell centers, constant up to the walls and
/// zero outside `[-L, L]`.
pub fn interpolate_field(field: &FieldState, x: f64) -> Vec<f64> {
    let g = &field.grid;
    if !(x.abs() <= g.half_width) {
        return vec![0.0; field.species()];
    }
    let pos = (x + g.half_width) / g.dx - 0.5;
    let last = g.cells - 1;
    field
        .densities
        .iter()
        .map(|u| {
            if pos <= 0.0 {
                u[0]
            } else if pos >= last as f64 {
                u[last]
            } else {
                let c = pos.floor() as usize;
                let t = pos - c as f64;
                if t == 0.0 {
                    u[c]
                } else {
                    u[c] + t * (u[c + 1] - u[c])
                }
            }
        })
        .collect()
}

fn check_kernel_grid(grid: &Grid, kf: &KernelFamily) -> Result<()> {
    let eta = kf.eta();
    if !(eta < grid.half_width / 2.0) {
        return Err(Error::Config(format!(
            "eta = {eta} must be below L/2 = {}",
            grid.half_width / 2.0
        )));
    }
    if eta < 2.0 * grid.dx {
        return Err(Error::UnderResolved {
            eta,
            dx: grid.dx,
            max_dx: eta / 2.0,
        });
    }
    if kf.dim() != 1 {
        return Err(Error::Config("grid convolutions are one-dimensional".into()));
    }
    Ok(())
}

// sum_m w_m u[c - m] with w_m proportional to B(|m dx| / eta) and scaled so
// that coef(i, j) * sum_m w_m = a_ij exactly; multiply by coef for B_ij^eta * u.
fn base_convolution(u: &[f64], grid: &Grid, kf: &KernelFamily) -> Vec<f64> {
    let shape = kf.profile().shape();
    let reach = (kf.eta() / grid.dx).floor() as usize;
    let inv_eta = 1.0 / kf.eta();
    let mut weights: Vec<f64> = (0..=reach)
        .map(|m| {
            let r = m as f64 * grid.dx * inv_eta;
            shape.value_sq(r * r)
        })
        .collect();
    let total = weights[0] + 2.0 * weights[1..].iter().sum::<f64>();
    let target = kf.eta() * kf.profile().mass() / kf.profile().amplitude();
    weights.iter_mut().for_each(|w| *w *= target / total);
    let n = u.len();
    (0..n)
        .map(|c| {
            let mut acc = weights[0] * u[c];
            for (m, &w) in weights.iter().enumerate().skip(1) {
                if w == 0.0 {
                    break;
                }
                if c >= m {
                    acc += w * u[c - m];
                }
                if c + m < n {
                    acc += w * u[c + m];
                }
            }
            acc
        })
        .collect()
}

/// Trapezoid-rule discrete convolution `B_ij^eta * u` on the grid, treating
/// `u` as zero outside the domain.
pub fn grid_convolution(u: &[f64], grid: &Grid, kf: &KernelFamily, i: usize, j: usize) -> Result<Vec<f64>> {
    check_kernel_grid(grid, kf)?;
    if u.len() != grid.cells {
        return Err(Error::GridMismatch(format!(
            "{} values for a grid of {} cells",
            u.len(),
            grid.cells
        )));
    }
    let coef = kf.coef(i, j);
    Ok(base_convolution(u, grid, kf).into_iter().map(|v| coef * v).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeConfig {
    pub half_width: f64,
    pub dx: f64,
    /// Fixed substep; `None` picks one from the stability bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_pde: Option<f64>,
    pub sigma: Vec<f64>,
    pub pair_mass: Vec<Vec<f64>>,
    pub nonlinearity: NonlinearityKind,
    pub potential: Potential,
}

impl PdeConfig {
    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.half_width, self.dx)
    }

    fn validate(&self, field: &FieldState) -> Result<()> {
        let n = self.sigma.len();
        if field.species() != n || self.pair_mass.len() != n || self.pair_mass.iter().any(|r| r.len() != n) {
            return Err(Error::Config(format!(
                "PDE config is for {n} species but the field has {}",
                field.species()
            )));
        }
        if self.sigma.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("diffusion constants must be positive".into()));
        }
        if !self.grid()?.matches(field.grid()) {
            return Err(Error::GridMismatch("field grid differs from the configured grid".into()));
        }
        self.nonlinearity.validate()
    }
}

/// Which PDE is being solved.
#[derive(Debug, Clone)]
pub enum PdeModel {
    Local,
    Nonlocal {
        kernel: KernelFamily,
        cutoff: CutoffNonlinearity,
    },
}

struct Coefficients {
    pressure: Vec<Vec<f64>>,
    max_diffusivity: f64,
}

fn coefficients(field: &FieldState, cfg: &PdeConfig, model: &PdeModel) -> Result<Coefficients> {
    let n = field.species();
    let cells = field.grid.cells;
    let u = &field.densities;
    let mut pressure = vec![vec![0.0; cells]; n];
    let mut max_diffusivity: f64 = 0.0;
    match model {
        PdeModel::Local => {
            let f = &cfg.nonlinearity;
            for i in 0..n {
                for c in 0..cells {
                    let mut s = 0.0;
                    let mut ds = 0.0;
                    for j in 0..n {
                        let a = cfg.pair_mass[i][j];
                        s += f.value(a * u[j][c]);
                        ds += a * f.deriv(a * u[j][c]);
                    }
                    pressure[i][c] = cfg.sigma[i] * u[i][c] + u[i][c] * s;
                    max_diffusivity = max_diffusivity.max(cfg.sigma[i] + s + u[i][c] * ds);
                }
            }
        }
        PdeModel::Nonlocal { kernel, cutoff } => {
            check_kernel_grid(&field.grid, kernel)?;
            if kernel.species() != n {
                return Err(Error::Config("kernel family species count differs from the field".into()));
            }
            let base: Vec<Vec<f64>> = u.iter().map(|uj| base_convolution(uj, &field.grid, kernel)).collect();
            for i in 0..n {
                for c in 0..cells {
                    let mut s = 0.0;
                    let mut ds = 0.0;
                    for j in 0..n {
                        let conv = kernel.coef(i, j) * base[j][c];
                        s += cutoff.eval(conv);
                        ds += kernel.pair_mass(i, j) * cutoff.deriv(conv);
                    }
                    pressure[i][c] = cfg.sigma[i] * u[i][c] + u[i][c] * s;
                    max_diffusivity = max_diffusivity.max(cfg.sigma[i] + s + u[i][c] * ds);
                }
            }
        }
    }
    Ok(Coefficients {
        pressure,
        max_diffusivity,
    })
}

fn drift_speed(cfg: &PdeConfig) -> f64 {
    match cfg.potential {
        Potential::Off => 0.0,
        Potential::On => cfg.half_width,
    }
}

/// Largest stable time step for the current field.
pub fn stable_dt(field: &FieldState, cfg: &PdeConfig, model: &PdeModel) -> Result<f64> {
    let coeffs = coefficients(field, cfg, model)?;
    let dx = field.grid.dx;
    Ok(dx * dx / (2.0 * coeffs.max_diffusivity + dx * drift_speed(cfg)))
}

fn step(field: &FieldState, cfg: &PdeConfig, model: &PdeModel, dt: f64) -> Result<FieldState> {
    cfg.validate(field)?;
    if !(dt > 0.0) {
        return Err(Error::Config(format!("dt must be positive, got {dt}")));
    }
    let coeffs = coefficients(field, cfg, model)?;
    let g = field.grid;
    let dx = g.dx;
    let admissible = dx * dx / (2.0 * coeffs.max_diffusivity + dx * drift_speed(cfg));
    if dt > admissible * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, admissible });
    }
    let cells = g.cells;
    let time = field.time + dt;
    let ratio = dt / dx;
    let mut next = Vec::with_capacity(field.species());
    let mut flux = vec![0.0; cells + 1];
    for (i, u) in field.densities.iter().enumerate() {
        let p = &coeffs.pressure[i];
        for c in 0..cells - 1 {
            let mut f = -(p[c + 1] - p[c]) / dx;
            if cfg.potential == Potential::On {
                let v = -g.half_width + (c + 1) as f64 * dx;
                f += if v > 0.0 { v * u[c] } else { v * u[c + 1] };
            }
            flux[c + 1] = f;
        }
        let new: Vec<f64> = (0..cells).map(|c| u[c] - ratio * (flux[c + 1] - flux[c])).collect();
        if let Some(&min) = new.iter().min_by(|a, b| a.total_cmp(b)) {
            if min < -NEGATIVITY_TOLERANCE {
                return Err(Error::Negativity {
                    species: i,
                    value: min,
                    time,
                });
            }
        }
        next.push(new);
    }
    FieldState::new(g, next, time)
}

/// One explicit step of the local cross-diffusion system.
pub fn step_local(field: &FieldState, cfg: &PdeConfig, dt: f64) -> Result<FieldState> {
    step(field, cfg, &PdeModel::Local, dt)
}

/// One explicit step of the nonlocal system with kernels `kf` and cutoff `cut`.
pub fn step_nonlocal(
    field: &FieldState,
    cfg: &PdeConfig,
    kf: &KernelFamily,
    cut: &CutoffNonlinearity,
    dt: f64,
) -> Result<FieldState> {
    step(
        field,
        cfg,
        &PdeModel::Nonlocal {
            kernel: kf.clone(),
            cutoff: cut.clone(),
        },
        dt,
    )
}

fn check_boundary(field: &FieldState) -> Result<()> {
    let last = field.grid.cells - 1;
    for (i, u) in field.densities.iter().enumerate() {
        let edge = u[0].max(u[last]);
        if edge >= BOUNDARY_TOLERANCE {
            return Err(Error::BoundaryLeak {
                species: i,
                value: edge,
                time: field.time,
            });
        }
    }
    Ok(())
}

fn advance_interval(field: &FieldState, cfg: &PdeConfig, model: &PdeModel, span: f64, target: f64) -> Result<FieldState> {
    let mut substeps = match cfg.dt_pde {
        Some(h) => (span / h * (1.0 - 1e-12)).ceil().max(1.0) as usize,
        None => (span / (ADAPTIVE_SAFETY * stable_dt(field, cfg, model)?)).ceil().max(1.0) as usize,
    };
    let mut attempts = 0;
    loop {
        let h = span / substeps as f64;
        let mut state = field.clone();
        let mut outcome = Ok(());
        for _ in 0..substeps {
            match step(&state, cfg, model, h) {
                Ok(next) => state = next,
                Err(e) => {
                    outcome = Err(e);
                    break;
                }
            }
        }
        match outcome {
            Ok(()) => {
                state.time = target;
                return Ok(state);
            }
            Err(Error::Stability { .. }) if cfg.dt_pde.is_none() && attempts < 12 => {
                substeps *= 2;
                attempts += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Solves from the gridded initial mixtures, returning one snapshot per point
/// of `times` (`times.steps() + 1` snapshots).
pub fn solve(cfg: &PdeConfig, model: &PdeModel, u0: &InitialDistribution, times: &TimeGrid) -> Result<Vec<FieldState>> {
    let grid = cfg.grid()?;
    let mut state = FieldState::from_initial(grid, u0)?;
    cfg.validate(&state)?;
    check_boundary(&state)?;
    let mut out = Vec::with_capacity(times.steps() + 1);
    out.push(state.clone());
    for m in 0..times.steps() {
        state = advance_interval(&state, cfg, model, times.dt(), times.time(m + 1))?;
        check_boundary(&state)?;
        out.push(state.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::MollifierProfile;

    fn heat_cfg(half_width: f64, dx: f64) -> PdeConfig {
        PdeConfig {
            half_width,
            dx,
            dt_pde: None,
            sigma: vec![1.0],
            pair_mass: vec![vec![0.0]],
            nonlinearity: NonlinearityKind::Zero,
            potential: Potential::Off,
        }
    }

    #[test]
    fn grid_geometry() {
        let g = Grid::new(1.0, 0.25).unwrap();
        assert_eq!(g.cells(), 8);
        assert!((g.center(0) + 0.875).abs() < 1e-15);
        assert!(Grid::new(1.0, 0.3).is_err());
    }

    #[test]
    fn interpolation() {
        let g = Grid::new(2.0, 0.5).unwrap();
        let lin: Vec<f64> = g.centers().iter().map(|x| 3.0 * x + 1.0).collect();
        let f = FieldState::new(g, vec![lin.clone()], 0.0).unwrap();
        for c in 0..g.cells() {
            assert_eq!(interpolate_field(&f, g.center(c))[0], lin[c]);
        }
        for c in 0..g.cells() - 1 {
            let mid = 0.5 * (g.center(c) + g.center(c + 1));
            assert!((interpolate_field(&f, mid)[0] - (3.0 * mid + 1.0)).abs() < 1e-14);
        }
        assert_eq!(interpolate_field(&f, 2.5)[0], 0.0);
        assert_eq!(interpolate_field(&f, -2.01)[0], 0.0);
    }

    #[test]
    fn zero_stays_zero() {
        let cfg = PdeConfig {
            nonlinearity: NonlinearityKind::Identity,
            pair_mass: vec![vec![1.0]],
            potential: Potential::On,
            ..heat_cfg(5.0, 0.1)
        };
        let f = FieldState::new(cfg.grid().unwrap(), vec![vec![0.0; 100]], 0.0).unwrap();
        let next = step_local(&f, &cfg, 1e-3).unwrap();
        assert!(next.values(0).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn stability_violation_names_bound() {
        let cfg = heat_cfg(5.0, 0.1);
        let f = FieldState::from_initial(cfg.grid().unwrap(), &InitialDistribution::gaussians_1d(&[0.0], 1.0)).unwrap();
        match step_local(&f, &cfg, 0.1) {
            Err(Error::Stability { admissible, .. }) => assert!((admissible - 0.005).abs() < 1e-12),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn convolution_of_constant_and_spike() {
        let g = Grid::new(10.0, 0.01).unwrap();
        let kf = KernelFamily::new(MollifierProfile::bump(1).unwrap(), 0.5, &[vec![0.7]]).unwrap();
        let conv = grid_convolution(&vec![2.0; g.cells()], &g, &kf, 0, 0).unwrap();
        let mid = g.cells() / 2;
        assert!((conv[mid] - 1.4).abs() < 1e-13);

        let mut spike = vec![0.0; g.cells()];
        spike[mid] = 1.0 / g.dx();
        let conv = grid_convolution(&spike, &g, &kf, 0, 0).unwrap();
        for off in [0usize, 10, 30, 49] {
            let c = mid + off;
            // discrete weights are rescaled by a factor within 1e-8 of one
            let expected = kf.eval(&[g.center(c) - g.center(mid)], 0, 0);
            assert!((conv[c] - expected).abs() <= 1e-8 * expected.max(1e-300));
        }
    }

    #[test]
    fn coarse_kernels_keep_their_mass() {
        let g = Grid::new(10.0, 0.02).unwrap();
        let kf = KernelFamily::new(MollifierProfile::bump(1).unwrap(), 0.1, &[vec![3.0]]).unwrap();
        let conv = grid_convolution(&vec![1.0; g.cells()], &g, &kf, 0, 0).unwrap();
        assert!((conv[g.cells() / 2] - 3.0).abs() < 1e-13);
        let f = FieldState::new(g, vec![vec![1.0; g.cells()]], 0.0).unwrap();
        assert!((f.convolution_at(0, 0.0123, &kf, 0) - 3.0).abs() < 1e-13);
        // half the support lies outside the domain at the wall
        assert!((f.convolution_at(0, 10.0, &kf, 0) - 1.5).abs() < 0.1);
    }

    #[test]
    fn convolution_resolution_errors() {
        let g = Grid::new(10.0, 0.1).unwrap();
        let kf = KernelFamily::new(MollifierProfile::bump(1).unwrap(), 0.15, &[vec![1.0]]).unwrap();
        assert!(matches!(
            grid_convolution(&vec![0.0; g.cells()], &g, &kf, 0, 0),
            Err(Error::UnderResolved { .. })
        ));
        let kf = KernelFamily::new(MollifierProfile::bump(1).unwrap(), 6.0, &[vec![1.0]]).unwrap();
        assert!(grid_convolution(&vec![0.0; g.cells()], &g, &kf, 0, 0).is_err());
    }

    #[test]
    fn initial_field_has_unit_mass() {
        let cfg = heat_cfg(10.0, 0.05);
        let times = TimeGrid::new(0.01, 0.0).unwrap();
        let snaps = solve(&cfg, &PdeModel::Local, &InitialDistribution::gaussians_1d(&[0.5], 0.3), &times).unwrap();
        assert_eq!(snaps.len(), 1);
        assert!((snaps[0].mass(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_cdf_sampling() {
        let g = Grid::new(1.0, 0.5).unwrap();
        // all mass in the second cell [-0.5, 0)
        let f = FieldState::new(g, vec![vec![0.0, 2.0, 0.0, 0.0]], 0.0).unwrap();
        let xs = f.sample_inverse_cdf(0, &[0.0, 0.25, 0.5, 0.999]);
        for (x, e) in xs.iter().zip([-0.5, -0.375, -0.25, -0.0005]) {
            assert!((x - e).abs() < 1e-14, "{x} vs {e}");
        }
    }

    #[test]
    fn boundary_leak_detected() {
        let cfg = heat_cfg(2.0, 0.1);
        let times = TimeGrid::new(0.1, 0.1).unwrap();
        let err = solve(&cfg, &PdeModel::Local, &InitialDistribution::gaussians_1d(&[0.0], 1.0), &times).unwrap_err();
        assert!(matches!(err, Error::BoundaryLeak { .. }));
    }
}
