//! Counter-based random streams indexed by logical coordinates.
//!
//! Every random draw is addressed by `(run, purpose, species, particle)`
//! rather than by draw order:
//!
//! * `run_seed = mix(master ^ mix(run))`, where `mix` is the SplitMix64
//!   finalizer;
//! * the 256-bit ChaCha8 key is four consecutive SplitMix64 outputs started
//!   from `run_seed ^ purpose_tag`;
//! * the ChaCha stream id is `(species << 32) | particle`.
//!
//! Two systems driven by the same plan therefore see identical increments
//! for the same `(run, species, particle)`, and an ensemble of `N` particles
//! is a prefix of one with `N' > N`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamPurpose {
    /// Initial positions.
    Initial,
    /// Brownian increments.
    Increment,
    /// Anything sampled for diagnostics (e.g. reference samples of a PDE density).
    Diagnostic,
}

impl StreamPurpose {
    fn tag(self) -> u64 {
        match self {
            StreamPurpose::Initial => 0x494e_4954_0000_0001,
            StreamPurpose::Increment => 0x494e_4352_0000_0002,
            StreamPurpose::Diagnostic => 0x4449_4147_0000_0003,
        }
    }
}

/// Master seed plus the addressing scheme above.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisePlan {
    master_seed: u64,
}

impl NoisePlan {
    pub fn new(master_seed: u64) -> Self {
        Self { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn run_seed(&self, run: u64) -> u64 {
        mix(self.master_seed ^ mix(run.wrapping_add(0x9e37_79b9_7f4a_7c15)))
    }

    pub fn stream(&self, run: u64, purpose: StreamPurpose, species: usize, particle: usize) -> NoiseStream {
        let mut state = self.run_seed(run) ^ purpose.tag();
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            chunk.copy_from_slice(&mix(state).to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        debug_assert!(species < 1 << 31 && (particle as u64) < 1 << 32);
        rng.set_stream(((species as u64) << 32) | particle as u64);
        NoiseStream { rng }
    }

    /// Increment streams for every particle of one run, species-major.
    pub fn run_noise(&self, run: u64, species: usize, particles: usize, dim: usize) -> RunNoise {
        let streams = (0..species)
            .flat_map(|i| (0..particles).map(move |k| (i, k)))
            .map(|(i, k)| self.stream(run, StreamPurpose::Increment, i, k))
            .collect();
        RunNoise { streams, dim }
    }
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// Per-particle increment streams of one Monte Carlo run.
#[derive(Debug, Clone)]
pub struct RunNoise {
    streams: Vec<NoiseStream>,
    dim: usize,
}

impl RunNoise {
    pub fn len(&self) -> usize {
        self.streams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.streams.is_empty()
    }

    /// Writes `sqrt(dt) * z` for every particle and dimension into `out`
    /// (layout `[species][particle][dim]`).
    pub fn fill_increments(&mut self, dt: f64, out: &mut Vec<f64>) {
        let scale = dt.sqrt();
        out.clear();
        out.reserve(self.streams.len() * self.dim);
        for s in &mut self.streams {
            for _ in 0..self.dim {
                out.push(scale * s.normal());
            }
        }
    }

    /// Applies a within-species relabeling: new particle `k` takes the stream
    /// of old particle `perm[k]`.
    pub fn permute_species(&mut self, species: usize, particles: usize, perm: &[usize]) {
        let base = species * particles;
        let old: Vec<NoiseStream> = self.streams[base..base + particles].to_vec();
        for (k, &p) in perm.iter().enumerate() {
            self.streams[base + k] = old[p].clone();
        }
    }
}

/// Uniform time grid `t_m = m dt`, `m = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_final: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) || !(t_final >= 0.0 && t_final.is_finite()) {
            return Err(Error::Config(format!(
                "time grid needs dt > 0 and T >= 0 (dt = {dt}, T = {t_final})"
            )));
        }
        let steps = (t_final / dt).round() as usize;
        if (steps as f64 * dt - t_final).abs() > 1e-12 * t_final.max(1.0) {
            return Err(Error::Config(format!(
                "T = {t_final} is not an integer multiple of dt = {dt}"
            )));
        }
        Ok(Self { dt, t_final, steps })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, m: usize) -> f64 {
        m as f64 * self.dt
    }

    /// Grid index of `t`, if `t` lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let m = (t / self.dt).round();
        if m < 0.0 || m as usize > self.steps {
            return None;
        }
        ((m * self.dt - t).abs() <= 1e-9 * t.abs().max(1.0)).then_some(m as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let plan = NoisePlan::new(7);
        let draw = |run, i, k| {
            let mut s = plan.stream(run, StreamPurpose::Increment, i, k);
            (0..4).map(|_| s.normal()).collect::<Vec<_>>()
        };
        assert_eq!(draw(0, 0, 0), draw(0, 0, 0));
        assert_ne!(draw(0, 0, 0), draw(0, 0, 1));
        assert_ne!(draw(0, 0, 0), draw(0, 1, 0));
        assert_ne!(draw(0, 0, 0), draw(1, 0, 0));
        let mut a = plan.stream(0, StreamPurpose::Initial, 0, 0);
        let mut b = plan.stream(0, StreamPurpose::Increment, 0, 0);
        assert_ne!(a.normal(), b.normal());
    }

    #[test]
    fn neighbouring_streams_are_uncorrelated() {
        let plan = NoisePlan::new(11);
        let n = 20_000;
        let mut a = plan.stream(3, StreamPurpose::Increment, 0, 5);
        let mut b = plan.stream(3, StreamPurpose::Increment, 0, 6);
        let mut c = 0.0;
        for _ in 0..n {
            c += a.normal() * b.normal();
        }
        // standard error of the sample correlation is 1/sqrt(n)
        assert!((c / n as f64).abs() < 4.0 / (n as f64).sqrt());
    }

    #[test]
    fn increments_have_brownian_scale() {
        let plan = NoisePlan::new(1);
        let mut noise = plan.run_noise(0, 1, 50_000, 1);
        let mut out = Vec::new();
        noise.fill_increments(0.04, &mut out);
        let var = out.iter().map(|v| v * v).sum::<f64>() / out.len() as f64;
        assert!((var - 0.04).abs() < 5.0 * 0.04 * (2.0 / out.len() as f64).sqrt());
    }

    #[test]
    fn time_grid() {
        let g = TimeGrid::new(0.01, 2.0).unwrap();
        assert_eq!(g.steps(), 200);
        assert!((g.steps() as f64 * g.dt() - g.t_final()).abs() < 1e-12);
        assert_eq!(g.index_of(0.15), Some(15));
        assert_eq!(g.index_of(0.155), None);
        assert_eq!(g.index_of(3.0), None);
        assert!(TimeGrid::new(0.3, 1.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0).is_err());
    }
}
