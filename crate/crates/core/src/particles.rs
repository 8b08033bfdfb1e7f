//! Particle ensembles, initial sampling, cell lists and empirical convolutions.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::KernelFamily;
use crate::noise::{NoisePlan, StreamPurpose};

pub const MAX_DIM: usize = 3;

/// Positions of `N` particles for each of `n` species in `d` dimensions,
/// stored `[species][particle][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    positions: Vec<f64>,
    species: usize,
    particles: usize,
    dim: usize,
    time: f64,
}

impl ParticleEnsemble {
    pub fn new(positions: Vec<f64>, species: usize, particles: usize, dim: usize, time: f64) -> Result<Self> {
        if species == 0 || dim == 0 || dim > MAX_DIM {
            return Err(Error::Config(format!(
                "ensemble needs n >= 1 species and 1 <= d <= {MAX_DIM} (n = {species}, d = {dim})"
            )));
        }
        if positions.len() != species * particles * dim {
            return Err(Error::Config(format!(
                "expected {} coordinates, got {}",
                species * particles * dim,
                positions.len()
            )));
        }
        if let Some(bad) = positions.iter().position(|v| !v.is_finite()) {
            let flat = bad / dim;
            return Err(Error::NonFinite {
                species: flat / particles.max(1),
                particle: flat % particles.max(1),
                time,
            });
        }
        Ok(Self {
            positions,
            species,
            particles,
            dim,
            time,
        })
    }

    /// Builds a one-dimensional ensemble from per-species position lists.
    pub fn from_species_1d(per_species: &[Vec<f64>], time: f64) -> Result<Self> {
        let n = per_species.len();
        let count = per_species.first().map_or(0, Vec::len);
        if per_species.iter().any(|v| v.len() != count) {
            return Err(Error::Config("all species need the same particle count".into()));
        }
        Self::new(per_species.concat(), n, count, 1, time)
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    #[inline]
    pub fn flat_index(&self, species: usize, particle: usize) -> usize {
        species * self.particles + particle
    }

    #[inline]
    pub fn position(&self, species: usize, particle: usize) -> &[f64] {
        let start = self.flat_index(species, particle) * self.dim;
        &self.positions[start..start + self.dim]
    }

    /// All coordinates of one species, particle-major.
    pub fn species_positions(&self, species: usize) -> &[f64] {
        let len = self.particles * self.dim;
        &self.positions[species * len..(species + 1) * len]
    }

    pub(crate) fn with_positions(&self, positions: Vec<f64>, time: f64) -> Self {
        debug_assert_eq!(positions.len(), self.positions.len());
        Self {
            positions,
            time,
            ..*self
        }
    }

    /// New particle `k` of `species` is old particle `perm[k]`.
    pub fn permute_species(&mut self, species: usize, perm: &[usize]) {
        assert_eq!(perm.len(), self.particles);
        let old = self.species_positions(species).to_vec();
        let d = self.dim;
        let base = species * self.particles * d;
        for (k, &p) in perm.iter().enumerate() {
            self.positions[base + k * d..base + (k + 1) * d].copy_from_slice(&old[p * d..(p + 1) * d]);
        }
    }

    /// Adds `shift` to every position.
    pub fn translate(&mut self, shift: &[f64]) {
        for chunk in self.positions.chunks_exact_mut(self.dim) {
            for (x, s) in chunk.iter_mut().zip(shift) {
                *x += s;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub mean: Vec<f64>,
    /// Per-coordinate variance (isotropic).
    pub variance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<GaussianComponent>,
}

impl Mixture {
    pub fn gaussian(mean: Vec<f64>, variance: f64) -> Self {
        Self {
            components: vec![GaussianComponent {
                mean,
                variance,
                weight: 1.0,
            }],
        }
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let d = x.len() as i32;
                let r2: f64 = x.iter().zip(&c.mean).map(|(a, b)| (a - b) * (a - b)).sum();
                c.weight * (-0.5 * r2 / c.variance).exp()
                    / (2.0 * std::f64::consts::PI * c.variance).powf(0.5 * d as f64)
            })
            .sum()
    }
}

/// Per-species Gaussian mixtures for the initial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InitialDistribution {
    pub species: Vec<Mixture>,
}

impl InitialDistribution {
    /// One Gaussian per species in 1D with a shared variance.
    pub fn gaussians_1d(means: &[f64], variance: f64) -> Self {
        Self {
            species: means
                .iter()
                .map(|&m| Mixture::gaussian(vec![m], variance))
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.species
            .first()
            .and_then(|m| m.components.first())
            .map_or(0, |c| c.mean.len())
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if self.species.is_empty() || d == 0 || d > MAX_DIM {
            return Err(Error::Config("initial distribution needs at least one species and 1 <= d <= 3".into()));
        }
        for (i, m) in self.species.iter().enumerate() {
            if m.components.is_empty() {
                return Err(Error::Config(format!("species {i} has an empty mixture")));
            }
            let total: f64 = m.components.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-12 {
                return Err(Error::Config(format!(
                    "mixture weights of species {i} sum to {total}, not 1"
                )));
            }
            for c in &m.components {
                if !(c.variance > 0.0) || !(c.weight >= 0.0) || c.mean.len() != d {
                    return Err(Error::Config(format!(
                        "species {i}: components need variance > 0, weight >= 0 and a {d}-dimensional mean"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Draws `particles` iid positions per species. Particle `(i, k)` uses its own
/// stream, so the result for `N` is a prefix of the result for any larger `N`.
pub fn sample_initial(
    dist: &InitialDistribution,
    particles: usize,
    plan: &NoisePlan,
    run: u64,
) -> Result<ParticleEnsemble> {
    dist.validate()?;
    if particles == 0 {
        return Err(Error::Config("need at least one particle per species".into()));
    }
    let d = dist.dim();
    let n = dist.species.len();
    let mut positions = Vec::with_capacity(n * particles * d);
    for (i, mixture) in dist.species.iter().enumerate() {
        for k in 0..particles {
            let mut s = plan.stream(run, StreamPurpose::Initial, i, k);
            let u = s.uniform();
            let mut acc = 0.0;
            let mut chosen = &mixture.components[mixture.components.len() - 1];
            for c in &mixture.components {
                acc += c.weight;
                if u < acc {
                    chosen = c;
                    break;
                }
            }
            let sd = chosen.variance.sqrt();
            for m in &chosen.mean {
                positions.push(m + sd * s.normal());
            }
        }
    }
    ParticleEnsemble::new(positions, n, particles, d, 0.0)
}

type CellKey = [i64; MAX_DIM];

#[derive(Debug, Clone, Copy)]
struct Entry {
    pos: [f64; MAX_DIM],
    flat: u32,
    species: u32,
}

#[derive(Debug, Clone, Copy)]
struct LineEntry {
    x: f64,
    flat: u32,
    species: u32,
}

/// Uniform cell list with cell size equal to the interaction radius.
///
/// Entries within a cell are ordered by position (then species and index), so
/// pair sweeps visit contributions in an order that depends only on where the
/// particles are, not on how they are labeled.
#[derive(Debug, Clone)]
pub struct CellIndex {
    cell_size: f64,
    dim: usize,
    particles: usize,
    lookup: BTreeMap<CellKey, usize>,
    cells: Vec<Vec<Entry>>,
    // 1D only: every particle, sorted like the cells
    line: Vec<LineEntry>,
}

/// Bins every particle of `e` into cells of size `eta`.
pub fn build_cells(e: &ParticleEnsemble, eta: f64) -> Result<CellIndex> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("cell size must be positive, got {eta}")));
    }
    let d = e.dim();
    let inv = 1.0 / eta;
    let mut lookup: BTreeMap<CellKey, usize> = BTreeMap::new();
    let mut cells: Vec<Vec<Entry>> = Vec::new();
    for i in 0..e.species() {
        for k in 0..e.particles() {
            let x = e.position(i, k);
            let mut pos = [0.0; MAX_DIM];
            let mut key = [0i64; MAX_DIM];
            for c in 0..d {
                pos[c] = x[c];
                key[c] = (x[c] * inv).floor() as i64;
            }
            let slot = *lookup.entry(key).or_insert_with(|| {
                cells.push(Vec::new());
                cells.len() - 1
            });
            cells[slot].push(Entry {
                pos,
                flat: e.flat_index(i, k) as u32,
                species: i as u32,
            });
        }
    }
    for cell in &mut cells {
        cell.sort_by(|a, b| {
            a.pos
                .iter()
                .zip(&b.pos)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
                .then(a.species.cmp(&b.species))
                .then(a.flat.cmp(&b.flat))
        });
    }
    let line = if d == 1 {
        lookup
            .values()
            .flat_map(|&slot| cells[slot].iter())
            .map(|e| LineEntry {
                x: e.pos[0],
                flat: e.flat,
                species: e.species,
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(CellIndex {
        cell_size: eta,
        dim: d,
        particles: e.particles(),
        lookup,
        cells,
        line,
    })
}

fn neighbour_offsets(dim: usize) -> Vec<CellKey> {
    let mut out = Vec::new();
    let span = 3usize.pow(dim as u32);
    for code in 0..span {
        let mut key = [0i64; MAX_DIM];
        let mut c = code;
        for slot in key.iter_mut().take(dim) {
            *slot = (c % 3) as i64 - 1;
            c /= 3;
        }
        out.push(key);
    }
    out
}

impl CellIndex {
    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// Particles of one species binned in the cell with the given coordinates.
    pub fn cell_members(&self, key: &[i64], species: usize) -> Vec<usize> {
        let mut k = [0i64; MAX_DIM];
        k[..key.len()].copy_from_slice(key);
        self.lookup
            .get(&k)
            .map(|&slot| {
                self.cells[slot]
                    .iter()
                    .filter(|e| e.species as usize == species)
                    .map(|e| e.flat as usize % self.particles)
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Every `(species, particle)` in the cells adjacent to `x`: a superset of
    /// the particles within one cell size of `x`, sorted ascending.
    pub fn neighbors(&self, x: &[f64]) -> Vec<(usize, usize)> {
        let inv = 1.0 / self.cell_size;
        let mut base = [0i64; MAX_DIM];
        for c in 0..self.dim {
            base[c] = (x[c] * inv).floor() as i64;
        }
        let mut out = Vec::new();
        for off in neighbour_offsets(self.dim) {
            let mut key = base;
            for c in 0..self.dim {
                key[c] += off[c];
            }
            if let Some(&slot) = self.lookup.get(&key) {
                out.extend(
                    self.cells[slot]
                        .iter()
                        .map(|e| (e.species as usize, e.flat as usize % self.particles)),
                );
            }
        }
        out.sort_unstable();
        out
    }

    /// Calls `visit(p, q, x_p - x_q, |x_p - x_q|^2)` once for every unordered
    /// pair of distinct particles closer than the cell size, with `p` and `q`
    /// given as `(flat index, species)`.
    fn sweep_pairs<F>(&self, mut visit: F)
    where
        F: FnMut((usize, usize), (usize, usize), &[f64; MAX_DIM], f64),
    {
        let d = self.dim;
        if d == 1 {
            let cut = self.cell_size;
            for (a, p) in self.line.iter().enumerate() {
                let pk = (p.flat as usize, p.species as usize);
                for q in &self.line[a + 1..] {
                    let gap = q.x - p.x;
                    if gap >= cut {
                        break;
                    }
                    visit(pk, (q.flat as usize, q.species as usize), &[-gap, 0.0, 0.0], gap * gap);
                }
            }
            return;
        }
        let key_of = |e: &Entry| (e.flat as usize, e.species as usize);
        let cut2 = self.cell_size * self.cell_size;
        let forward: Vec<CellKey> = neighbour_offsets(d)
            .into_iter()
            .filter(|o| o.iter().find(|&&v| v != 0).is_some_and(|&v| v > 0))
            .collect();
        let diff_of = |a: &Entry, b: &Entry| {
            let mut diff = [0.0; MAX_DIM];
            let mut r2 = 0.0;
            for c in 0..d {
                diff[c] = a.pos[c] - b.pos[c];
                r2 += diff[c] * diff[c];
            }
            (diff, r2)
        };
        for (key, &slot) in &self.lookup {
            let cell = &self.cells[slot];
            for (a, p) in cell.iter().enumerate() {
                for q in &cell[a + 1..] {
                    let (diff, r2) = diff_of(p, q);
                    if r2 < cut2 {
                        visit(key_of(p), key_of(q), &diff, r2);
                    }
                }
            }
            for off in &forward {
                let mut nk = *key;
                for c in 0..d {
                    nk[c] += off[c];
                }
                let Some(&other) = self.lookup.get(&nk) else {
                    continue;
                };
                let other = &self.cells[other];
                for p in cell {
                    for q in other {
                        let (diff, r2) = diff_of(p, q);
                        if r2 < cut2 {
                            visit(key_of(p), key_of(q), &diff, r2);
                        }
                    }
                }
            }
        }
    }
}

fn check_cells(e: &ParticleEnsemble, cells: &CellIndex, kf: &KernelFamily) -> Result<()> {
    if cells.cell_size < kf.eta() * (1.0 - 1e-12) {
        return Err(Error::Contract(format!(
            "cell size {} is smaller than the kernel radius {}",
            cells.cell_size,
            kf.eta()
        )));
    }
    if kf.species() != e.species() || kf.dim() != e.dim() {
        return Err(Error::Contract(format!(
            "kernel family is for n = {}, d = {} but the ensemble has n = {}, d = {}",
            kf.species(),
            kf.dim(),
            e.species(),
            e.dim()
        )));
    }
    Ok(())
}

/// `(1/N) sum_{(l,j) != (k,i)} B_ij^eta(X_{k,i} - X_{l,j})` for each `j`.
pub fn empirical_convolution(
    e: &ParticleEnsemble,
    cells: &CellIndex,
    k: usize,
    i: usize,
    kf: &KernelFamily,
) -> Result<Vec<f64>> {
    check_cells(e, cells, kf)?;
    let x = e.position(i, k);
    let mut diff = [0.0; MAX_DIM];
    let mut out = vec![0.0; e.species()];
    for (j, l) in cells.neighbors(x) {
        if (j, l) == (i, k) {
            continue;
        }
        let y = e.position(j, l);
        for c in 0..e.dim() {
            diff[c] = x[c] - y[c];
        }
        out[j] += kf.eval(&diff[..e.dim()], i, j);
    }
    let inv_n = 1.0 / e.particles() as f64;
    out.iter_mut().for_each(|v| *v *= inv_n);
    Ok(out)
}

/// `(1/N) sum_l grad B_ij^eta(Y_{k,i} - Y_{l,j})` for each `j`; the `l = k`,
/// `j = i` term is included and vanishes.
pub fn empirical_grad_convolution(
    e: &ParticleEnsemble,
    cells: &CellIndex,
    k: usize,
    i: usize,
    kf: &KernelFamily,
) -> Result<Vec<Vec<f64>>> {
    check_cells(e, cells, kf)?;
    let d = e.dim();
    let x = e.position(i, k);
    let mut diff = [0.0; MAX_DIM];
    let mut g = [0.0; MAX_DIM];
    let mut out = vec![vec![0.0; d]; e.species()];
    for (j, l) in cells.neighbors(x) {
        let y = e.position(j, l);
        for c in 0..d {
            diff[c] = x[c] - y[c];
        }
        kf.grad(&diff[..d], i, j, &mut g[..d]);
        for c in 0..d {
            out[j][c] += g[c];
        }
    }
    let inv_n = 1.0 / e.particles() as f64;
    for v in out.iter_mut().flatten() {
        *v *= inv_n;
    }
    Ok(out)
}

/// Self-excluded empirical convolutions for every particle at once, laid out
/// `[flat particle][species j]`.
pub fn interaction_sums(e: &ParticleEnsemble, cells: &CellIndex, kf: &KernelFamily) -> Result<Vec<f64>> {
    check_cells(e, cells, kf)?;
    let n = e.species();
    let shape = kf.profile().shape();
    let inv_eta2 = 1.0 / (kf.eta() * kf.eta());
    let mut sums = vec![0.0; e.species() * e.particles() * n];
    if cells.dim == 1 {
        let line = Line::new(&cells.line);
        let mut own = vec![0.0; n];
        for a in 0..line.xs.len() {
            let (xp, fp, sp) = (line.xs[a], line.flat[a], line.species[a]);
            let limit = xp + cells.cell_size;
            own.iter_mut().for_each(|v| *v = 0.0);
            for b in a + 1..line.xs.len() {
                let xq = line.xs[b];
                if xq >= limit {
                    break;
                }
                let g = xq - xp;
                let v = shape.value_sq(g * g * inv_eta2);
                let sq = line.species[b];
                own[sq] += kf.coef(sp, sq) * v;
                sums[line.flat[b] * n + sp] += kf.coef(sq, sp) * v;
            }
            for (j, v) in own.iter().enumerate() {
                sums[fp * n + j] += v;
            }
        }
    } else {
        cells.sweep_pairs(|(fp, sp), (fq, sq), _, r2| {
            let b = shape.value_sq(r2 * inv_eta2);
            sums[fp * n + sq] += kf.coef(sp, sq) * b;
            sums[fq * n + sp] += kf.coef(sq, sp) * b;
        });
    }
    let inv_n = 1.0 / e.particles() as f64;
    sums.iter_mut().for_each(|v| *v *= inv_n);
    Ok(sums)
}

// Struct-of-arrays copy of the sorted 1D line for the hot loops.
struct Line {
    xs: Vec<f64>,
    flat: Vec<usize>,
    species: Vec<usize>,
}

impl Line {
    fn new(entries: &[LineEntry]) -> Self {
        Self {
            xs: entries.iter().map(|e| e.x).collect(),
            flat: entries.iter().map(|e| e.flat as usize).collect(),
            species: entries.iter().map(|e| e.species as usize).collect(),
        }
    }
}

/// Empirical gradient convolutions for every particle, laid out
/// `[flat particle][species j][dim]`.
pub fn interaction_gradients(e: &ParticleEnsemble, cells: &CellIndex, kf: &KernelFamily) -> Result<Vec<f64>> {
    check_cells(e, cells, kf)?;
    let n = e.species();
    let d = e.dim();
    let shape = kf.profile().shape();
    let inv_eta2 = 1.0 / (kf.eta() * kf.eta());
    let mut grads = vec![0.0; e.species() * e.particles() * n * d];
    if d == 1 {
        let line = Line::new(&cells.line);
        let mut own = vec![0.0; n];
        for a in 0..line.xs.len() {
            let (xp, fp, sp) = (line.xs[a], line.flat[a], line.species[a]);
            let limit = xp + cells.cell_size;
            own.iter_mut().for_each(|v| *v = 0.0);
            for b in a + 1..line.xs.len() {
                let xq = line.xs[b];
                if xq >= limit {
                    break;
                }
                let g = xq - xp;
                let (_, slope) = shape.value_and_slope_sq(g * g * inv_eta2);
                // x_p - x_q = -g
                let w = slope * inv_eta2 * g;
                let sq = line.species[b];
                own[sq] -= kf.coef(sp, sq) * w;
                grads[line.flat[b] * n + sp] += kf.coef(sq, sp) * w;
            }
            for (j, v) in own.iter().enumerate() {
                grads[fp * n + j] += v;
            }
        }
    } else {
        cells.sweep_pairs(|(flat_p, sp), (flat_q, sq), diff, r2| {
            let (_, slope) = shape.value_and_slope_sq(r2 * inv_eta2);
            let s = slope * inv_eta2;
            let fp = kf.coef(sp, sq) * s;
            let fq = kf.coef(sq, sp) * s;
            let bp = (flat_p * n + sq) * d;
            let bq = (flat_q * n + sp) * d;
            for c in 0..d {
                grads[bp + c] += fp * diff[c];
                grads[bq + c] -= fq * diff[c];
            }
        });
    }
    let inv_n = 1.0 / e.particles() as f64;
    grads.iter_mut().for_each(|v| *v *= inv_n);
    Ok(grads)
}
