//! The cylinder picture: `(t, theta) -> e^{-t} theta` maps the half-cylinder
//! onto the punctured ball, `v(t, theta) = u(e^{-t} theta) e^{-(n-2) t / 2}`,
//! and segment energies `int_{Q_i} v^2 dV` obey a three-circle dichotomy.

use crate::background::BackgroundMetric;
use crate::curvature::scalar_curvature_conformal;
use crate::dim::Dimension;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::{composite_weights, AnnulusGrid, Resolution};
use crate::integrate::{integrate, sqrt_det, Measure};
use crate::quadrature::{compensated_sum, SphereQuadrature};
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::sync::Arc;

/// Factors live on the punctured unit ball.
pub const CHART_RADIUS: f64 = 1.0;

/// Harmonic polynomial of degree `l <= 3` restricted to the sphere.
pub fn spherical_harmonic(l: usize, theta: &[f64]) -> f64 {
    let (a, b) = (theta[0], theta[1]);
    match l {
        0 => 1.0,
        1 => a,
        2 => a * a - b * b,
        3 => a * a * a - 3.0 * a * b * b,
        _ => panic!("spherical harmonics implemented for l <= 3"),
    }
}

/// `int_{S^{n-1}} Y_l^2 dS` for the polynomials above.
pub fn harmonic_norm_sq(n: Dimension, l: usize) -> f64 {
    let w = n.sphere_area();
    let nf = n.nf();
    match l {
        0 => w,
        1 => w / nf,
        // mean of (a^2 - b^2)^2 = 2 (E a^4 - E a^2 b^2) = 4 / (n (n + 2))
        2 => w * 4.0 / (nf * (nf + 2.0)),
        // mean of Re(a + i b)^6-type product: 24 / (n (n + 2) (n + 4))
        3 => w * 24.0 / (nf * (nf + 2.0) * (nf + 4.0)),
        _ => panic!("spherical harmonics implemented for l <= 3"),
    }
}

/// `e^{lambda t} Y_l(theta)` solving `-Delta v + (n-2)^2/4 v = 0` on `R x S^{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeparableMode {
    pub l: usize,
    pub lambda: f64,
}

/// Mode with `lambda = sign * sqrt((n-2)^2/4 + l(l+n-2))`.
pub fn separable_solution(n: Dimension, l: usize, positive: bool) -> SeparableMode {
    let nf = n.nf();
    let lf = l as f64;
    let mag = ((nf - 2.0).powi(2) / 4.0 + lf * (lf + nf - 2.0)).sqrt();
    SeparableMode {
        l,
        lambda: if positive { mag } else { -mag },
    }
}

type CylFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

#[derive(Clone)]
enum Source {
    Factor {
        u: Arc<ConformalFactor>,
        g0: Arc<BackgroundMetric>,
    },
    Modes(Vec<(f64, SeparableMode)>),
    Closure(Arc<CylFn>),
}

impl fmt::Debug for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Factor { u, .. } => f.debug_struct("Factor").field("u", u).finish_non_exhaustive(),
            Source::Modes(m) => f.debug_tuple("Modes").field(m).finish(),
            Source::Closure(_) => f.write_str("Closure"),
        }
    }
}

/// A field `v` on `[t0, t0 + 3L] x S^{n-1}` with the metric `ghat`.
#[derive(Debug, Clone)]
pub struct CylinderField {
    n: Dimension,
    source: Source,
    t0: f64,
    length: f64,
}

impl CylinderField {
    /// Linear combination of separable modes on the flat cylinder.
    pub fn from_modes(n: Dimension, modes: &[(f64, SeparableMode)], t0: f64, length: f64) -> Self {
        CylinderField {
            n,
            source: Source::Modes(modes.to_vec()),
            t0,
            length,
        }
    }

    /// Arbitrary field on the flat cylinder.
    pub fn from_fn<F>(n: Dimension, f: F, t0: f64, length: f64) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        CylinderField {
            n,
            source: Source::Closure(Arc::new(f)),
            t0,
            length,
        }
    }

    pub fn dimension(&self) -> Dimension {
        self.n
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    /// `[t0 + (i-1) L, t0 + i L]` for `i = 1, 2, 3`.
    pub fn segment(&self, i: usize) -> (f64, f64) {
        let a = self.t0 + (i as f64 - 1.0) * self.length;
        (a, a + self.length)
    }

    pub fn value(&self, t: f64, theta: &[f64]) -> Result<f64> {
        match &self.source {
            Source::Factor { u, .. } => {
                let x: Vec<f64> = theta.iter().map(|c| c * (-t).exp()).collect();
                let nf = self.n.nf();
                Ok(u.value(&x)? * (-(nf - 2.0) * t / 2.0).exp())
            }
            Source::Modes(m) => Ok(m
                .iter()
                .map(|(c, mode)| c * (mode.lambda * t).exp() * spherical_harmonic(mode.l, theta))
                .sum()),
            Source::Closure(f) => Ok(f(t, theta)),
        }
    }

    /// Density of `dV_ghat` against `dt dS^{n-1}`.
    pub fn volume_density(&self, t: f64, theta: &[f64]) -> f64 {
        match &self.source {
            Source::Factor { g0, .. } if !g0.is_flat() => {
                let x: Vec<f64> = theta.iter().map(|c| c * (-t).exp()).collect();
                sqrt_det(&g0.components(&x), x.len())
            }
            _ => 1.0,
        }
    }

    /// `ghat(a, b)` for tangent vectors `(tau, w)` with `w` orthogonal to `theta`:
    /// `ghat = e^{2t} phi^* g0` equals `g0(e^{-t} theta)` applied to `-tau theta + w`.
    pub fn ghat(&self, t: f64, theta: &[f64], a: (f64, &[f64]), b: (f64, &[f64])) -> f64 {
        let n = theta.len();
        let va: Vec<f64> = (0..n).map(|i| -a.0 * theta[i] + a.1[i]).collect();
        let vb: Vec<f64> = (0..n).map(|i| -b.0 * theta[i] + b.1[i]).collect();
        let c = match &self.source {
            Source::Factor { g0, .. } => {
                let x: Vec<f64> = theta.iter().map(|c| c * (-t).exp()).collect();
                g0.components(&x)
            }
            _ => (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect(),
        };
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += c[i * n + j] * va[i] * vb[j];
            }
        }
        s
    }

    /// `int_{[a, b] x S^{n-1}} v^2 dV_ghat`.
    pub fn energy(&self, a: f64, b: f64, resolution: Resolution) -> Result<f64> {
        let sphere = resolution.sphere(self.n)?;
        self.energy_with(a, b, resolution.radial_count, &sphere)
    }

    fn energy_with(&self, a: f64, b: f64, count: usize, sphere: &SphereQuadrature) -> Result<f64> {
        if count < 2 {
            return Err(Error::InvalidArgument("need at least two t-nodes".into()));
        }
        let m = count - 1;
        let wt = composite_weights(m, (b - a) / m as f64);
        let rows: Vec<f64> = (0..count)
            .into_par_iter()
            .map(|i| {
                let t = a + (b - a) * i as f64 / m as f64;
                let vals: Result<Vec<f64>> = sphere
                    .nodes()
                    .iter()
                    .zip(sphere.weights())
                    .map(|(th, w)| {
                        let v = self.value(t, th)?;
                        Ok(w * v * v * self.volume_density(t, th))
                    })
                    .collect();
                Ok(wt[i] * compensated_sum(vals?))
            })
            .collect::<Result<_>>()?;
        Ok(compensated_sum(rows))
    }

    /// Energies of `count` consecutive segments of length `L` starting at `t0`.
    pub fn segment_series(&self, count: usize, resolution: Resolution) -> Result<Vec<f64>> {
        let sphere = resolution.sphere(self.n)?;
        (0..count)
            .into_par_iter()
            .map(|k| {
                let a = self.t0 + k as f64 * self.length;
                self.energy_with(a, a + self.length, resolution.radial_count, &sphere)
            })
            .collect()
    }
}

/// `-Delta v + (n-2)^2/4 v` on the flat cylinder by fourth-order differences
/// along `t` and along great circles through `theta` (step `h`).
pub fn cylinder_residual(field: &CylinderField, t: f64, theta: &[f64], h: f64) -> Result<f64> {
    let n = theta.len();
    let second = |f: &dyn Fn(f64) -> Result<f64>| -> Result<f64> {
        Ok((-f(2.0 * h)? + 16.0 * f(h)? - 30.0 * f(0.0)? + 16.0 * f(-h)? - f(-2.0 * h)?) / (12.0 * h * h))
    };
    let mut lap = second(&|s| field.value(t + s, theta))?;
    // orthonormal tangent frame by Gram-Schmidt against theta
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in 0..n {
        let mut e: Vec<f64> = (0..n).map(|i| if i == k { 1.0 } else { 0.0 }).collect();
        for b in std::iter::once(theta).chain(frame.iter().map(|v| v.as_slice())) {
            let d: f64 = e.iter().zip(b).map(|(x, y)| x * y).sum();
            e.iter_mut().zip(b).for_each(|(x, y)| *x -= d * y);
        }
        let len = e.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 1e-8 && frame.len() < n - 1 {
            frame.push(e.into_iter().map(|x| x / len).collect());
        }
    }
    for e in &frame {
        lap += second(&|s| {
            let p: Vec<f64> = theta.iter().zip(e).map(|(a, b)| s.cos() * a + s.sin() * b).collect();
            field.value(t, &p)
        })?;
    }
    let nf = field.dimension().nf();
    Ok(-lap + (nf - 2.0).powi(2) / 4.0 * field.value(t, theta)?)
}

/// Pulls `u` back to the cylinder anchored at `|x| = r_anchor` (`t0 = -log r_anchor`).
pub fn to_cylinder(u: &ConformalFactor, g0: &BackgroundMetric, r_anchor: f64, length: f64) -> Result<CylinderField> {
    if !(length > 0.0) {
        return Err(Error::InvalidArgument(format!("segment length must be positive, got {length}")));
    }
    if !(r_anchor > 0.0 && r_anchor <= CHART_RADIUS) {
        return Err(Error::ChartTooSmall {
            needed: r_anchor,
            available: CHART_RADIUS,
        });
    }
    let inner = r_anchor * (-3.0 * length).exp();
    if inner < 1e-280 {
        return Err(Error::ChartTooSmall {
            needed: 3.0 * length - r_anchor.ln(),
            available: -(1e-280f64).ln(),
        });
    }
    Ok(CylinderField {
        n: g0.dimension(),
        source: Source::Factor {
            u: Arc::new(u.clone()),
            g0: Arc::new(g0.clone()),
        },
        t0: -r_anchor.ln(),
        length,
    })
}

/// `E_i = int_{Q_i} v^2 dV_ghat`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTriple {
    pub e1: f64,
    pub e2: f64,
    pub e3: f64,
}

pub fn segment_energies(field: &CylinderField, resolution: Resolution) -> Result<EnergyTriple> {
    let s = field.segment_series(3, resolution)?;
    Ok(EnergyTriple {
        e1: s[0],
        e2: s[1],
        e3: s[2],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// `E2 <= e^{-L} E1`.
    LeftDecay,
    /// `E2 <= e^{-L} E3`.
    RightDecay,
    Both,
    Violation,
}

pub fn three_circle_classify(e: &EnergyTriple, length: f64) -> Verdict {
    let k = (-length).exp();
    // one part in 1e12 of slack for equality cases reached in floating point
    let le = |a: f64, b: f64| a <= b * (1.0 + 1e-12);
    match (le(e.e2, k * e.e1), le(e.e2, k * e.e3)) {
        (true, true) => Verdict::Both,
        (true, false) => Verdict::LeftDecay,
        (false, true) => Verdict::RightDecay,
        (false, false) => Verdict::Violation,
    }
}

/// For consecutive segment energies, every window `(k, k+1, k+2)` whose
/// verdict includes right decay must be followed by another such window.
/// Returns the index of the first window breaking the pattern.
pub fn escalation_break(series: &[f64], length: f64) -> Option<usize> {
    let verdicts: Vec<Verdict> = series
        .windows(3)
        .map(|w| {
            three_circle_classify(
                &EnergyTriple {
                    e1: w[0],
                    e2: w[1],
                    e3: w[2],
                },
                length,
            )
        })
        .collect();
    let right = |v: Verdict| matches!(v, Verdict::RightDecay | Verdict::Both);
    verdicts
        .windows(2)
        .position(|w| right(w[0]) && !right(w[1]))
        .map(|k| k + 1)
}

/// `int_{B_r \ B_{r/vartheta}} u^2 / |x|^2 dV_{g0}` against the next inner annulus.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AnnulusRatio {
    pub outer: f64,
    pub inner: f64,
    /// `outer / inner`.
    pub ratio: f64,
    /// Whether `ratio <= 1 / vartheta`.
    pub decays: bool,
}

pub fn weighted_annulus_energy(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    r_lo: f64,
    r_hi: f64,
    resolution: Resolution,
) -> Result<f64> {
    let grid = resolution.grid(g0.dimension(), r_lo, r_hi)?;
    integrate(&grid, Measure::Background(g0), None, |x| {
        let r2: f64 = x.iter().map(|c| c * c).sum();
        Ok(u.value(x)?.powi(2) / r2)
    })
}

pub fn annulus_energy_ratio(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    r: f64,
    vartheta: f64,
    resolution: Resolution,
) -> Result<AnnulusRatio> {
    if !(vartheta > 1.0) {
        return Err(Error::InvalidArgument(format!("vartheta must exceed 1, got {vartheta}")));
    }
    if !(r > 0.0 && r <= CHART_RADIUS) {
        return Err(Error::ChartTooSmall {
            needed: r,
            available: CHART_RADIUS,
        });
    }
    let outer = weighted_annulus_energy(u, g0, r / vartheta, r, resolution)?;
    let inner = weighted_annulus_energy(u, g0, r / (vartheta * vartheta), r / vartheta, resolution)?;
    let ratio = outer / inner;
    Ok(AnnulusRatio {
        outer,
        inner,
        ratio,
        decays: ratio <= 1.0 / vartheta,
    })
}

/// Both sides of the change of variables on `[a, b]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChangeOfVariables {
    /// `int_{[a, b] x S} v^2 dV_ghat`.
    pub cylinder: f64,
    /// `int_{B_{e^{-a}} \ B_{e^{-b}}} u^2 / |x|^2 dV_{g0}`.
    pub annulus: f64,
    pub relative_gap: f64,
}

pub fn change_of_variables_check(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    a: f64,
    b: f64,
    resolution: Resolution,
) -> Result<ChangeOfVariables> {
    let field = to_cylinder(u, g0, (-a).exp().min(CHART_RADIUS), (b - a) / 3.0)?;
    let cylinder = field.energy(a, b, resolution)?;
    let annulus = weighted_annulus_energy(u, g0, (-b).exp(), (-a).exp(), resolution)?;
    Ok(ChangeOfVariables {
        cylinder,
        annulus,
        relative_gap: (cylinder - annulus).abs() / annulus.abs(),
    })
}

/// Measured proxies for the smallness hypotheses on `[t0, t0 + 3L]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct HypothesisAudit {
    /// `int |f|^{n/2} dV_ghat = c(n)^{n/2} int |R(g)|^{n/2} dV_g` over the annulus.
    pub f_norm: f64,
    /// `max |ghat - g_Q|` in operator norm at the quadrature nodes (a C^0 proxy).
    pub metric_deviation: f64,
}

pub fn hypothesis_audit(field: &CylinderField, resolution: Resolution) -> Result<HypothesisAudit> {
    let Source::Factor { u, g0 } = &field.source else {
        // closed-form fields live on the flat cylinder and solve the model equation
        return Ok(HypothesisAudit {
            f_norm: 0.0,
            metric_deviation: 0.0,
        });
    };
    let n = g0.dimension();
    let (r_hi, r_lo) = ((-field.t0).exp(), (-(field.t0 + 3.0 * field.length)).exp());
    let grid: AnnulusGrid = resolution.grid(n, r_lo, r_hi)?;
    let half = n.nf() / 2.0;
    let c = n.yamabe_constant();
    let f_norm = c.powf(half)
        * integrate(&grid, Measure::Conformal(u, g0), None, |x| {
            Ok(scalar_curvature_conformal(u, g0, x)?.abs().powf(half))
        })?;
    let nn = n.n();
    let metric_deviation = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = grid.point_flat(k);
            let mut m = DMatrix::from_row_slice(nn, nn, &g0.components(&x));
            for i in 0..nn {
                m[(i, i)] -= 1.0;
            }
            SymmetricEigen::new(m).eigenvalues.amax()
        })
        .reduce(|| 0.0, f64::max);
    Ok(HypothesisAudit { f_norm, metric_deviation })
}
