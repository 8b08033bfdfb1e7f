//! Compactly supported mollifier kernels and their pair-scaled families.
//!
//! A [`KernelFamily`] holds one radial profile `B` with mass `m_B` and an
//! `n x n` table of pair masses `a_ij`. The pair kernel is
//!
//! ```text
//! B_ij^eta(x) = (a_ij / m_B) * eta^-d * B(|x| / eta)
//! ```
//!
//! so that its integral over R^d is exactly `a_ij`, and its support is the
//! closed ball of radius `eta` (the profile vanishes for `r >= 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

const MASS_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileShape {
    /// `exp(-1 / (1 - r^2))` on the open unit ball.
    #[default]
    Bump,
    /// `1` on the open unit ball. Test profile with a closed-form mass.
    Indicator,
}

impl ProfileShape {
    /// Profile value as a function of the squared radius.
    #[inline]
    pub fn value_sq(self, r2: f64) -> f64 {
        if r2 >= 1.0 {
            return 0.0;
        }
        match self {
            ProfileShape::Bump => (-1.0 / (1.0 - r2)).exp(),
            ProfileShape::Indicator => 1.0,
        }
    }

    /// Returns `(B(r), B'(r) / r)` from the squared radius.
    #[inline]
    pub fn value_and_slope_sq(self, r2: f64) -> (f64, f64) {
        if r2 >= 1.0 {
            return (0.0, 0.0);
        }
        match self {
            ProfileShape::Bump => {
                let s = 1.0 - r2;
                let b = (-1.0 / s).exp();
                (b, -2.0 * b / (s * s))
            }
            ProfileShape::Indicator => (1.0, 0.0),
        }
    }
}

/// Radial profile `B` with its precomputed mass in dimension `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierProfile {
    shape: ProfileShape,
    amplitude: f64,
    dim: usize,
    mass: f64,
}

impl MollifierProfile {
    pub fn new(shape: ProfileShape, amplitude: f64, dim: usize) -> Result<Self> {
        if !(amplitude > 0.0 && amplitude.is_finite()) {
            return Err(Error::Config(format!(
                "profile amplitude must be positive, got {amplitude}"
            )));
        }
        let mass = kernel_mass(shape, amplitude, dim)?;
        Ok(Self {
            shape,
            amplitude,
            dim,
            mass,
        })
    }

    /// The default bump profile in `dim` dimensions.
    pub fn bump(dim: usize) -> Result<Self> {
        Self::new(ProfileShape::Bump, 1.0, dim)
    }

    pub fn shape(&self) -> ProfileShape {
        self.shape
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `m_B`, the integral of `B(|x|)` over R^d.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn eval(&self, r: f64) -> f64 {
        profile_eval(self.shape, self.amplitude, r)
    }
}

/// `B(r)` for the given shape and amplitude; zero for `r >= 1`.
pub fn profile_eval(shape: ProfileShape, amplitude: f64, r: f64) -> f64 {
    debug_assert!(r >= 0.0);
    amplitude * shape.value_sq(r * r)
}

/// Mass of a radial profile in dimension `dim`, by adaptive quadrature of
/// the radial integral.
pub fn kernel_mass(shape: ProfileShape, amplitude: f64, dim: usize) -> Result<f64> {
    let (surface, power) = match dim {
        1 => (2.0, 0),
        2 => (2.0 * std::f64::consts::PI, 1),
        3 => (4.0 * std::f64::consts::PI, 2),
        _ => {
            return Err(Error::Config(format!(
                "kernel dimension must be 1, 2 or 3, got {dim}"
            )))
        }
    };
    let radial = quadrature::integrate(
        |r| r.powi(power) * profile_eval(shape, amplitude, r),
        0.0,
        1.0,
        MASS_REL_TOL,
    )?;
    Ok(surface * radial)
}

/// Pair-scaled kernels `B_ij^eta` for `n` species.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFamily {
    profile: MollifierProfile,
    eta: f64,
    species: usize,
    pair_mass: Vec<f64>,
    // (a_ij / m_B) * eta^-d, row-major.
    coef: Vec<f64>,
}

impl KernelFamily {
    pub fn new(profile: MollifierProfile, eta: f64, pair_mass: &[Vec<f64>]) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        let n = pair_mass.len();
        if n == 0 {
            return Err(Error::Config("pair-mass matrix is empty".into()));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in pair_mass.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Config(format!(
                    "pair-mass matrix must be square: row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            for &a in row {
                if !(a >= 0.0 && a.is_finite()) {
                    return Err(Error::Config(format!(
                        "pair masses must be finite and nonnegative, got {a}"
                    )));
                }
                flat.push(a);
            }
        }
        let scale = eta.powi(-(profile.dim() as i32)) / profile.mass();
        let coef = flat
            .iter()
            .map(|a| a * scale * profile.amplitude())
            .collect();
        Ok(Self {
            profile,
            eta,
            species: n,
            pair_mass: flat,
            coef,
        })
    }

    pub fn profile(&self) -> &MollifierProfile {
        &self.profile
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn dim(&self) -> usize {
        self.profile.dim()
    }

    pub fn species(&self) -> usize {
        self.species
    }

    pub fn pair_mass(&self, i: usize, j: usize) -> f64 {
        self.pair_mass[i * self.species + j]
    }

    /// Prefactor multiplying the unit-amplitude shape inside the support.
    #[inline]
    pub fn coef(&self, i: usize, j: usize) -> f64 {
        self.coef[i * self.species + j]
    }

    /// True when every pair mass is zero, so all interactions vanish.
    pub fn is_zero(&self) -> bool {
        self.pair_mass.iter().all(|&a| a == 0.0)
    }

    #[inline]
    pub(crate) fn scaled_r2(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / (self.eta * self.eta);
        x.iter().map(|v| v * v).sum::<f64>() * inv
    }

    /// `B_ij^eta(x)`.
    pub fn eval(&self, x: &[f64], i: usize, j: usize) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        self.coef(i, j) * self.profile.shape().value_sq(self.scaled_r2(x))
    }

    /// Gradient of `B_ij^eta` at `x`, written into `out`.
    pub fn grad(&self, x: &[f64], i: usize, j: usize, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        let (_, slope) = self.profile.shape().value_and_slope_sq(self.scaled_r2(x));
        // d/dx B(|x|/eta) = B'(r)/r * x / eta^2
        let factor = self.coef(i, j) * slope / (self.eta * self.eta);
        for (o, v) in out.iter_mut().zip(x) {
            *o = factor * v;
        }
    }
}
