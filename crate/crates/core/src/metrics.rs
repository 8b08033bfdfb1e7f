//! Density estimates and error functionals.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::particles::ParticleEnsemble;
use crate::pde::FieldState;
use crate::sde::CoupledOutput;

/// Relative-maximum threshold below which a smoothed peak is not a mode.
pub const MODE_THRESHOLD: f64 = 0.1;
/// Default moving-average width used by [`mode_count`].
pub const MODE_WINDOW: usize = 5;

/// Anything that stores per-species values on uniform cells.
pub trait GriddedDensity {
    fn left_edge(&self) -> f64;
    fn cell_width(&self) -> f64;
    fn cell_count(&self) -> usize;
    fn species_count(&self) -> usize;
    fn species_values(&self, species: usize) -> &[f64];
}

impl GriddedDensity for FieldState {
    fn left_edge(&self) -> f64 {
        -self.grid().half_width()
    }
    fn cell_width(&self) -> f64 {
        self.grid().dx()
    }
    fn cell_count(&self) -> usize {
        self.grid().cells()
    }
    fn species_count(&self) -> usize {
        self.species()
    }
    fn species_values(&self, species: usize) -> &[f64] {
        self.values(species)
    }
}

/// Pooled, normalized histogram of particle positions on `[-L, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub half_width: f64,
    pub bins: usize,
    /// `[species][bin]`, each row integrating to one over the in-range particles.
    pub density: Vec<Vec<f64>>,
    pub runs: usize,
    /// Particles per species that fell outside `[-L, L]` and were not binned.
    pub out_of_range: Vec<u64>,
}

impl DensityEstimate {
    pub fn bin_width(&self) -> f64 {
        2.0 * self.half_width / self.bins as f64
    }

    pub fn bin_center(&self, b: usize) -> f64 {
        -self.half_width + (b as f64 + 0.5) * self.bin_width()
    }

    pub fn edges(&self) -> Vec<f64> {
        (0..=self.bins)
            .map(|b| -self.half_width + b as f64 * self.bin_width())
            .collect()
    }

    /// Writes `x,u_1,...,u_n` rows at the bin centers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x");
        for i in 0..self.density.len() {
            out.push_str(&format!(",u_{}", i + 1));
        }
        out.push('\n');
        for b in 0..self.bins {
            out.push_str(&format!("{}", self.bin_center(b)));
            for row in &self.density {
                out.push_str(&format!(",{}", row[b]));
            }
            out.push('\n');
        }
        out
    }
}

impl GriddedDensity for DensityEstimate {
    fn left_edge(&self) -> f64 {
        -self.half_width
    }
    fn cell_width(&self) -> f64 {
        self.bin_width()
    }
    fn cell_count(&self) -> usize {
        self.bins
    }
    fn species_count(&self) -> usize {
        self.density.len()
    }
    fn species_values(&self, species: usize) -> &[f64] {
        &self.density[species]
    }
}

fn check_bins(half_width: f64, bins: usize) -> Result<()> {
    if !(half_width > 0.0) || bins == 0 {
        return Err(Error::Config(format!(
            "histogram needs L > 0 and at least one bin (L = {half_width}, bins = {bins})"
        )));
    }
    Ok(())
}

/// Histogram of per-species 1D samples: `samples[run][species]`.
pub fn histogram_samples(samples: &[Vec<Vec<f64>>], half_width: f64, bins: usize) -> Result<DensityEstimate> {
    check_bins(half_width, bins)?;
    let Some(first) = samples.first() else {
        return Err(Error::Contract("histogram needs at least one run".into()));
    };
    let n = first.len();
    if samples.iter().any(|s| s.len() != n) {
        return Err(Error::Contract("runs disagree on the species count".into()));
    }
    let width = 2.0 * half_width / bins as f64;
    let mut counts = vec![vec![0u64; bins]; n];
    let mut out_of_range = vec![0u64; n];
    for run in samples {
        for (i, xs) in run.iter().enumerate() {
            for &x in xs {
                if !(x.abs() <= half_width) {
                    out_of_range[i] += 1;
                    continue;
                }
                let b = (((x + half_width) / width) as usize).min(bins - 1);
                counts[i][b] += 1;
            }
        }
    }
    let density = counts
        .iter()
        .map(|row| {
            let total: u64 = row.iter().sum();
            if total == 0 {
                return vec![0.0; bins];
            }
            let scale = 1.0 / (total as f64 * width);
            row.iter().map(|&c| c as f64 * scale).collect()
        })
        .collect();
    Ok(DensityEstimate {
        half_width,
        bins,
        density,
        runs: samples.len(),
        out_of_range,
    })
}

/// Pooled histogram over runs and particles of one-dimensional ensembles.
pub fn histogram_density(ensembles: &[ParticleEnsemble], half_width: f64, bins: usize) -> Result<DensityEstimate> {
    if ensembles.iter().any(|e| e.dim() != 1) {
        return Err(Error::Contract("histograms are one-dimensional".into()));
    }
    let samples: Vec<Vec<Vec<f64>>> = ensembles
        .iter()
        .map(|e| (0..e.species()).map(|i| e.species_positions(i).to_vec()).collect())
        .collect();
    histogram_samples(&samples, half_width, bins)
}

/// `W_2` between two equally sized empirical measures on the line.
pub fn wasserstein2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::SampleMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Contract("W2 needs at least one sample".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let sum: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

fn check_same_grid(d1: &impl GriddedDensity, d2: &impl GriddedDensity) -> Result<()> {
    let w = d1.cell_width();
    if d1.cell_count() != d2.cell_count()
        || (w - d2.cell_width()).abs() > 1e-12 * w
        || (d1.left_edge() - d2.left_edge()).abs() > 1e-12 * d1.left_edge().abs().max(1.0)
    {
        return Err(Error::GridMismatch(format!(
            "{} cells of width {} from {} vs {} cells of width {} from {}",
            d1.cell_count(),
            w,
            d1.left_edge(),
            d2.cell_count(),
            d2.cell_width(),
            d2.left_edge()
        )));
    }
    if d1.species_count() != d2.species_count() {
        return Err(Error::GridMismatch(format!(
            "{} species vs {}",
            d1.species_count(),
            d2.species_count()
        )));
    }
    Ok(())
}

/// Discrete `L^p` distance of one species, `p` in {1, 2}.
pub fn lp_species_error(d1: &impl GriddedDensity, d2: &impl GriddedDensity, species: usize, p: u32) -> Result<f64> {
    check_same_grid(d1, d2)?;
    if species >= d1.species_count() {
        return Err(Error::Contract(format!("no species {species}")));
    }
    Ok(lp_sum(d1.species_values(species), d2.species_values(species), d1.cell_width(), p)?.powf(1.0 / p as f64))
}

fn lp_sum(a: &[f64], b: &[f64], width: f64, p: u32) -> Result<f64> {
    let s: f64 = match p {
        1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        2 => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
        _ => return Err(Error::Config(format!("p must be 1 or 2, got {p}"))),
    };
    Ok(s * width)
}

/// Discrete `L^p` distance summed over all species.
pub fn lp_density_error(d1: &impl GriddedDensity, d2: &impl GriddedDensity, p: u32) -> Result<f64> {
    check_same_grid(d1, d2)?;
    let mut total = 0.0;
    for i in 0..d1.species_count() {
        total += lp_sum(d1.species_values(i), d2.species_values(i), d1.cell_width(), p)?;
    }
    Ok(total.powf(1.0 / p as f64))
}

/// Summary of `E sum_i sup_s |X - X_hat|^2` over Monte Carlo runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongError {
    /// Largest per-particle mean.
    pub value: f64,
    /// Standard error of the particle attaining `value`.
    pub std_error: f64,
    /// Mean over particles, using exchangeability.
    pub exchangeable_mean: f64,
    pub exchangeable_std_error: f64,
    pub per_particle_mean: Vec<f64>,
    pub per_particle_std_error: Vec<f64>,
    pub runs: usize,
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

pub fn strong_error(out: &CoupledOutput) -> Result<StrongError> {
    if out.runs == 0 || out.particles == 0 {
        return Err(Error::Contract("strong error needs at least one run and one particle".into()));
    }
    let (n, p) = (out.species, out.particles);
    let stride = n * p;
    // per_run[k][r] = sum_i sup_s |...|^2
    let mut per_run = vec![vec![0.0; out.runs]; p];
    for r in 0..out.runs {
        let row = &out.sup_sq[r * stride..(r + 1) * stride];
        for i in 0..n {
            for k in 0..p {
                per_run[k][r] += row[i * p + k];
            }
        }
    }
    let stats: Vec<(f64, f64)> = per_run.iter().map(|v| mean_and_se(v)).collect();
    let &(value, std_error) = stats
        .iter()
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .expect("at least one particle");
    let run_means: Vec<f64> = (0..out.runs)
        .map(|r| per_run.iter().map(|v| v[r]).sum::<f64>() / p as f64)
        .collect();
    let (exchangeable_mean, exchangeable_std_error) = mean_and_se(&run_means);
    Ok(StrongError {
        value,
        std_error,
        exchangeable_mean,
        exchangeable_std_error,
        per_particle_mean: stats.iter().map(|s| s.0).collect(),
        per_particle_std_error: stats.iter().map(|s| s.1).collect(),
        runs: out.runs,
    })
}

/// `int min(u_i, u_j) dx`.
pub fn segregation_overlap(d: &impl GriddedDensity, i: usize, j: usize) -> f64 {
    let w = d.cell_width();
    d.species_values(i)
        .iter()
        .zip(d.species_values(j))
        .map(|(a, b)| a.min(*b))
        .sum::<f64>()
        * w
}

/// Centered moving average, truncated at the ends.
pub fn moving_average(values: &[f64], window: usize) -> Vec<f64> {
    let half = window.max(1) / 2;
    let n = values.len();
    (0..n)
        .map(|c| {
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(n - 1);
            values[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Number of strict local maxima of the smoothed density above
/// [`MODE_THRESHOLD`] times its maximum. A run of equal values counts once
/// when it is higher than both of its neighbours.
pub fn mode_count(d: &impl GriddedDensity, species: usize, window: usize) -> usize {
    let s = moving_average(d.species_values(species), window);
    let max = s.iter().cloned().fold(0.0, f64::max);
    if !(max > 0.0) {
        return 0;
    }
    let n = s.len();
    let mut modes = 0;
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && s[end + 1] == s[start] {
            end += 1;
        }
        let left = start == 0 || s[start] > s[start - 1];
        let right = end + 1 == n || s[end] > s[end + 1];
        if left && right && s[start] > MODE_THRESHOLD * max {
            modes += 1;
        }
        start = end + 1;
    }
    modes
}

/// Least-squares line through `(log x, log y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// `slope -/+ 2 standard errors`.
    pub band: [f64; 2],
}

/// Fits `log y = intercept + slope log x`. With standard errors for `y`, the
/// points are weighted by the delta-method variance `(se / y)^2` of `log y`
/// and the slope error is the propagated one; otherwise the residual-based
/// estimate is used.
pub fn fit_loglog(x: &[f64], y: &[f64], y_se: Option<&[f64]>) -> Result<SlopeFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Contract("slope fit needs at least two matching points".into()));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Contract("slope fit needs positive finite data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let known = y_se.filter(|se| se.len() == y.len() && se.iter().all(|s| *s > 0.0));
    let w: Vec<f64> = match known {
        Some(se) => se.iter().zip(y).map(|(s, v)| (v / s).powi(2)).collect(),
        None => vec![1.0; x.len()],
    };
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&lx).map(|(a, b)| a * b).sum::<f64>() / sw;
    let my = w.iter().zip(&ly).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&lx).map(|(a, b)| a * (b - mx) * (b - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Contract("slope fit needs distinct x values".into()));
    }
    let sxy: f64 = (0..x.len()).map(|k| w[k] * (lx[k] - mx) * (ly[k] - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_std_error = if known.is_some() {
        (1.0 / sxx).sqrt()
    } else if x.len() > 2 {
        let rss: f64 = (0..x.len())
            .map(|k| (ly[k] - intercept - slope * lx[k]).powi(2))
            .sum();
        (rss / (x.len() - 2) as f64 / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        slope_std_error,
        band: [slope - 2.0 * slope_std_error, slope + 2.0 * slope_std_error],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_bin_histogram() {
        let e = ParticleEnsemble::from_species_1d(&[vec![0.1, 0.2, 0.3]], 0.0).unwrap();
        let d = histogram_density(&[e], 1.0, 4).unwrap();
        assert_eq!(d.density[0], vec![0.0, 0.0, 2.0, 0.0]);
        assert_eq!(d.out_of_range, vec![0]);
    }

    #[test]
    fn out_of_range_is_reported() {
        let e = ParticleEnsemble::from_species_1d(&[vec![0.1, 5.0, -7.0]], 0.0).unwrap();
        let d = histogram_density(&[e], 1.0, 2).unwrap();
        assert_eq!(d.out_of_range, vec![2]);
        assert!((d.density[0].iter().sum::<f64>() * d.bin_width() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pooled_runs_equal_concatenation() {
        let a = ParticleEnsemble::from_species_1d(&[vec![0.1, -0.4], vec![0.9, 0.0]], 0.0).unwrap();
        let b = ParticleEnsemble::from_species_1d(&[vec![0.3, 0.35], vec![-0.2, -0.9]], 0.0).unwrap();
        let pooled = histogram_density(&[a, b], 1.0, 10).unwrap();
        let joined =
            histogram_samples(&[vec![vec![0.1, -0.4, 0.3, 0.35], vec![0.9, 0.0, -0.2, -0.9]]], 1.0, 10).unwrap();
        assert_eq!(pooled.density, joined.density);
        assert_eq!(pooled.runs, 2);
    }

    #[test]
    fn w2_basics() {
        assert_eq!(wasserstein2_1d(&[0.0], &[1.0]).unwrap(), 1.0);
        assert_eq!(wasserstein2_1d(&[3.0, 1.0], &[1.0, 3.0]).unwrap(), 0.0);
        assert!(matches!(
            wasserstein2_1d(&[0.0], &[1.0, 2.0]),
            Err(Error::SampleMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn lp_of_disjoint_indicators() {
        let mk = |u: Vec<f64>| DensityEstimate {
            half_width: 2.0,
            bins: 4,
            density: vec![u],
            runs: 1,
            out_of_range: vec![0],
        };
        let a = mk(vec![1.0, 0.0, 0.0, 0.0]);
        let b = mk(vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(lp_density_error(&a, &b, 1).unwrap(), 2.0);
        assert_eq!(lp_density_error(&a, &a, 2).unwrap(), 0.0);
        assert!((lp_density_error(&a, &b, 2).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(lp_density_error(&a, &b, 3).is_err());
        let c = DensityEstimate { bins: 2, density: vec![vec![0.5, 0.5]], ..a.clone() };
        assert!(matches!(lp_density_error(&a, &c, 1), Err(Error::GridMismatch(_))));
        assert_eq!(segregation_overlap(&a, 0, 0), 1.0);
    }

    #[test]
    fn strong_error_of_hand_path() {
        // one particle, two steps with differences 0.1 and 0.3
        let sup = [0.1f64, 0.3].iter().map(|d| d * d).fold(0.0, f64::max);
        let out = CoupledOutput {
            runs: 1,
            species: 1,
            particles: 1,
            sup_sq: vec![sup],
            final_particles: vec![],
        };
        let s = strong_error(&out).unwrap();
        assert!((s.value - 0.09).abs() < 1e-15);
        assert_eq!(s.std_error, 0.0);
    }

    #[test]
    fn strong_error_takes_max_over_particles() {
        // two runs, two species, two particles
        let out = CoupledOutput {
            runs: 2,
            species: 2,
            particles: 2,
            sup_sq: vec![1.0, 0.0, 2.0, 0.0, 3.0, 1.0, 0.0, 1.0],
            final_particles: vec![],
        };
        let s = strong_error(&out).unwrap();
        assert_eq!(s.per_particle_mean, vec![3.0, 1.0]);
        assert_eq!(s.value, 3.0);
        assert_eq!(s.exchangeable_mean, 2.0);
    }

    #[test]
    fn bimodal_mode_count() {
        let bins = 100;
        let d = DensityEstimate {
            half_width: 5.0,
            bins,
            density: vec![(0..bins)
                .map(|b| {
                    let x = -5.0 + (b as f64 + 0.5) * 0.1;
                    let g = |m: f64| (-(x - m) * (x - m) / 0.2).exp();
                    g(-2.0) + g(2.0)
                })
                .collect()],
            runs: 1,
            out_of_range: vec![0],
        };
        assert_eq!(mode_count(&d, 0, MODE_WINDOW), 2);
        let flat = DensityEstimate { density: vec![vec![1.0; bins]], ..d.clone() };
        assert_eq!(mode_count(&flat, 0, MODE_WINDOW), 1);
    }

    #[test]
    fn slope_of_power_law() {
        let x = [0.4, 0.2, 0.1];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(1.5)).collect();
        let fit = fit_loglog(&x, &y, None).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        let se = [0.01, 0.01, 0.01];
        let fit = fit_loglog(&x, &y, Some(&se)).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert!(fit.slope_std_error > 0.0);
        assert!(fit_loglog(&x, &[1.0, 0.0, 1.0], None).is_err());
    }
}
