//! The nonlinearity `f` and its globally Lipschitz cutoff `f_eta`.
//!
//! `f_eta(s) = f(clamp(s))` where `clamp` is the identity on `[-a, a]`,
//! bends smoothly over `[a, a + 1]` with slope in `[0, 1]` and is constant
//! beyond, so `|f_eta'| <= sup_{|u| <= a + 1} |f'(u)|`. The radius `a` is the
//! largest value for which that supremum stays below `eta^-alpha`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum NonlinearityKind {
    /// `f = 0`.
    Zero,
    /// `f(s) = s`.
    Identity,
    /// `f(s) = |s|^exponent`, exponent > 1.
    Power { exponent: f64 },
    /// Monotone cubic (Fritsch–Carlson) interpolation through the points,
    /// held constant outside the table.
    Tabulated { points: Vec<[f64; 2]> },
}

impl NonlinearityKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            NonlinearityKind::Zero | NonlinearityKind::Identity => Ok(()),
            NonlinearityKind::Power { exponent } => {
                if *exponent > 1.0 && exponent.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!(
                        "power nonlinearity needs exponent > 1, got {exponent}"
                    )))
                }
            }
            NonlinearityKind::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(Error::Config("tabulated f needs at least two points".into()));
                }
                for w in points.windows(2) {
                    if !(w[1][0] > w[0][0]) {
                        return Err(Error::Config(
                            "tabulated f abscissae must be strictly increasing".into(),
                        ));
                    }
                }
                if points.iter().any(|p| !(p[1] >= 0.0 && p[1].is_finite())) {
                    return Err(Error::Config("tabulated f values must be >= 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, NonlinearityKind::Zero)
    }

    pub fn value(&self, s: f64) -> f64 {
        match self {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Identity => s,
            NonlinearityKind::Power { exponent } => s.abs().powf(*exponent),
            NonlinearityKind::Tabulated { points } => Pchip::new(points).value(s),
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match self {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Identity => 1.0,
            NonlinearityKind::Power { exponent } => {
                exponent * s.abs().powf(exponent - 1.0) * s.signum()
            }
            NonlinearityKind::Tabulated { points } => Pchip::new(points).deriv(s),
        }
    }

    /// Global Lipschitz constant, when one exists.
    pub fn global_lipschitz(&self) -> Option<f64> {
        match self {
            NonlinearityKind::Zero => Some(0.0),
            NonlinearityKind::Identity => Some(1.0),
            NonlinearityKind::Power { .. } => None,
            NonlinearityKind::Tabulated { points } => Some(Pchip::new(points).max_abs_slope()),
        }
    }

    /// `sup_{|s| <= radius} |f'(s)|`.
    pub fn max_abs_deriv(&self, radius: f64) -> f64 {
        match self {
            NonlinearityKind::Zero => 0.0,
            NonlinearityKind::Identity => 1.0,
            NonlinearityKind::Power { exponent } => exponent * radius.powf(exponent - 1.0),
            NonlinearityKind::Tabulated { points } => {
                Pchip::new(points).max_abs_slope_within(-radius, radius)
            }
        }
    }
}

/// `f_eta` together with its cutoff radius `a_eta` and slope bound `eta^-alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffNonlinearity {
    kind: NonlinearityKind,
    alpha: f64,
    eta: f64,
    a_eta: f64,
    lip_bound: f64,
}

/// Builds `f_eta` for the given `eta` and `alpha`.
pub fn make_cutoff(kind: NonlinearityKind, eta: f64, alpha: f64) -> Result<CutoffNonlinearity> {
    kind.validate()?;
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha must lie in [0, 1), got {alpha}")));
    }
    let lip_bound = eta.powf(-alpha);
    let unbounded = |a_eta| CutoffNonlinearity {
        kind: kind.clone(),
        alpha,
        eta,
        a_eta,
        lip_bound,
    };
    if let Some(lip) = kind.global_lipschitz() {
        if lip <= lip_bound {
            return Ok(unbounded(f64::INFINITY));
        }
    }

    let feasible = |a: f64| kind.max_abs_deriv(a + 1.0) <= lip_bound;
    if !feasible(0.0) {
        let at_zero = kind.max_abs_deriv(1.0);
        let hint = if alpha > 0.0 {
            format!("; largest admissible eta is {:.6e}", at_zero.powf(-1.0 / alpha))
        } else {
            String::new()
        };
        return Err(Error::Config(format!(
            "no cutoff radius keeps |f'| <= eta^-alpha = {lip_bound:.6e} (|f'| reaches {at_zero:.6e} on [-1, 1]){hint}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(unbounded(f64::INFINITY));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(CutoffNonlinearity {
        kind,
        alpha,
        eta,
        a_eta: lo,
        lip_bound,
    })
}

impl CutoffNonlinearity {
    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Radius on which `f_eta = f`; infinite when no cutoff is needed.
    pub fn a_eta(&self) -> f64 {
        self.a_eta
    }

    pub fn lip_bound(&self) -> f64 {
        self.lip_bound
    }

    pub fn is_zero(&self) -> bool {
        self.kind.is_zero()
    }

    fn clamp(&self, s: f64) -> (f64, f64) {
        let a = self.a_eta;
        let m = s.abs();
        if m <= a {
            return (s, 1.0);
        }
        let t = m - a;
        if t >= 1.0 {
            (s.signum() * (a + 2.0 / 3.0), 0.0)
        } else {
            (s.signum() * (a + t - t * t * t / 3.0), 1.0 - t * t)
        }
    }

    /// `f_eta(s)`.
    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        if self.a_eta.is_infinite() {
            return self.kind.value(s);
        }
        self.kind.value(self.clamp(s).0)
    }

    /// `f_eta'(s)`.
    pub fn deriv(&self, s: f64) -> f64 {
        if self.a_eta.is_infinite() {
            return self.kind.deriv(s);
        }
        let (c, dc) = self.clamp(s);
        self.kind.deriv(c) * dc
    }
}

/// Shape-preserving piecewise cubic Hermite interpolant with zero end slopes.
struct Pchip<'a> {
    points: &'a [[f64; 2]],
    slopes: Vec<f64>,
}

impl<'a> Pchip<'a> {
    fn new(points: &'a [[f64; 2]]) -> Self {
        let n = points.len();
        let secant: Vec<f64> = points
            .windows(2)
            .map(|w| (w[1][1] - w[0][1]) / (w[1][0] - w[0][0]))
            .collect();
        let mut slopes = vec![0.0; n];
        for k in 1..n.saturating_sub(1) {
            let (d0, d1) = (secant[k - 1], secant[k]);
            if d0 * d1 > 0.0 {
                let h0 = points[k][0] - points[k - 1][0];
                let h1 = points[k + 1][0] - points[k][0];
                let w0 = 2.0 * h1 + h0;
                let w1 = h1 + 2.0 * h0;
                slopes[k] = (w0 + w1) / (w0 / d0 + w1 / d1);
            }
        }
        Self { points, slopes }
    }

    fn locate(&self, s: f64) -> Option<usize> {
        let p = self.points;
        if s <= p[0][0] || s >= p[p.len() - 1][0] {
            return None;
        }
        Some(p.partition_point(|q| q[0] <= s) - 1)
    }

    fn value(&self, s: f64) -> f64 {
        let p = self.points;
        let Some(k) = self.locate(s) else {
            return if s <= p[0][0] { p[0][1] } else { p[p.len() - 1][1] };
        };
        let h = p[k + 1][0] - p[k][0];
        let t = (s - p[k][0]) / h;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * p[k][1]
            + (t3 - 2.0 * t2 + t) * h * self.slopes[k]
            + (-2.0 * t3 + 3.0 * t2) * p[k + 1][1]
            + (t3 - t2) * h * self.slopes[k + 1]
    }

    fn deriv(&self, s: f64) -> f64 {
        let p = self.points;
        let Some(k) = self.locate(s) else {
            return 0.0;
        };
        let h = p[k + 1][0] - p[k][0];
        let t = (s - p[k][0]) / h;
        self.deriv_local(k, t, h)
    }

    fn deriv_local(&self, k: usize, t: f64, h: f64) -> f64 {
        let p = self.points;
        let t2 = t * t;
        (6.0 * t2 - 6.0 * t) * (p[k][1] - p[k + 1][1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.slopes[k]
            + (3.0 * t2 - 2.0 * t) * self.slopes[k + 1]
    }

    fn max_abs_slope(&self) -> f64 {
        self.max_abs_slope_within(f64::NEG_INFINITY, f64::INFINITY)
    }

    // The derivative is quadratic on each panel, so its extremes sit at the
    // panel ends, the vertex, or the window edges.
    fn max_abs_slope_within(&self, lo: f64, hi: f64) -> f64 {
        let p = self.points;
        let mut best: f64 = 0.0;
        for k in 0..p.len() - 1 {
            let (x0, x1) = (p[k][0], p[k + 1][0]);
            let (a, b) = (x0.max(lo), x1.min(hi));
            if a > b {
                continue;
            }
            let h = x1 - x0;
            let mut candidates = vec![(a - x0) / h, (b - x0) / h];
            // d/dt of the derivative: 12t - 6, 6t - 4, 6t - 2 weighted terms.
            let c2 = 6.0 * (p[k][1] - p[k + 1][1]) / h
                + 3.0 * self.slopes[k]
                + 3.0 * self.slopes[k + 1];
            let c1 = -6.0 * (p[k][1] - p[k + 1][1]) / h
                - 4.0 * self.slopes[k]
                - 2.0 * self.slopes[k + 1];
            if c2 != 0.0 {
                let tv = -c1 / (2.0 * c2);
                if tv > candidates[0] && tv < candidates[1] {
                    candidates.push(tv);
                }
            }
            for t in candidates {
                best = best.max(self.deriv_local(k, t, h).abs());
            }
        }
        best
    }
}
