//! Polyline refinement: minimize the discrete energy `N sum_k |P_{k+1} - P_k|^2_{g(mid)}`
//! with a projected L-BFGS. Minimizers are equally spaced discrete geodesics,
//! and the reported chord-sum length converges at second order in `1/N`.

use super::chord_length;
use crate::background::{norm, BackgroundMetric};
use crate::curvature::conformal_metric_jets;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::quadrature::compensated_sum;
use rayon::prelude::*;
use std::collections::VecDeque;

/// Constraint on a polyline end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Endpoint {
    Fixed,
    /// Free to slide on the coordinate sphere `|x| = R`.
    Sphere(f64),
}

const MEMORY: usize = 8;
const MAX_ITER: usize = 2000;

pub(crate) fn polyline_length(u: &ConformalFactor, g0: &BackgroundMetric, pts: &[Vec<f64>]) -> Result<f64> {
    let parts = pts
        .par_windows(2)
        .map(|w| chord_length(u, g0, &w[0], &w[1]))
        .collect::<Result<Vec<f64>>>()?;
    Ok(compensated_sum(parts))
}

/// `segments + 1` points equally spaced in `g`-length along `pts`.
fn resample(u: &ConformalFactor, g0: &BackgroundMetric, pts: &[Vec<f64>], segments: usize) -> Result<Vec<Vec<f64>>> {
    let lens = pts
        .windows(2)
        .map(|w| chord_length(u, g0, &w[0], &w[1]))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = lens.iter().sum();
    let mut out = Vec::with_capacity(segments + 1);
    let (mut k, mut acc) = (0usize, 0.0);
    for s in 0..=segments {
        let target = total * s as f64 / segments as f64;
        while k + 1 < lens.len() && acc + lens[k] < target {
            acc += lens[k];
            k += 1;
        }
        let t = if lens[k] > 0.0 {
            ((target - acc) / lens[k]).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(pts[k].iter().zip(&pts[k + 1]).map(|(a, b)| a + t * (b - a)).collect());
    }
    Ok(out)
}

struct Problem<'a> {
    u: &'a ConformalFactor,
    g0: &'a BackgroundMetric,
    n: usize,
    segments: usize,
    ends: (Endpoint, Endpoint),
    r_lo: f64,
    r_hi: f64,
}

/// A discrete path energy on flattened coordinates, with a projection onto
/// the admissible set.
pub(crate) trait Objective {
    fn energy(&self, x: &[f64]) -> Result<(f64, Vec<f64>)>;
    fn project(&self, x: &mut [f64]);
}

impl Objective for Problem<'_> {
    fn energy(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let n = self.n;
        let parts = (0..self.segments)
            .into_par_iter()
            .map(|k| {
                let a = &x[k * n..(k + 1) * n];
                let b = &x[(k + 1) * n..(k + 2) * n];
                let mid: Vec<f64> = a.iter().zip(b).map(|(p, q)| 0.5 * (p + q)).collect();
                let d: Vec<f64> = a.iter().zip(b).map(|(p, q)| q - p).collect();
                let g = conformal_metric_jets(self.u, self.g0, &mid, 1)?;
                let mut e = 0.0;
                let mut gd = vec![0.0; n];
                let mut de = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let c = &g[i * n + j];
                        e += c.value() * d[i] * d[j];
                        gd[i] += c.value() * d[j];
                        for (l, v) in de.iter_mut().enumerate() {
                            *v += c.d1(l) * d[i] * d[j];
                        }
                    }
                }
                Ok((e, gd, de))
            })
            .collect::<Result<Vec<_>>>()?;
        let scale = self.segments as f64;
        let mut grad = vec![0.0; x.len()];
        let mut total = Vec::with_capacity(parts.len());
        for (k, (e, gd, de)) in parts.into_iter().enumerate() {
            total.push(e);
            for i in 0..n {
                grad[k * n + i] += scale * (-2.0 * gd[i] + 0.5 * de[i]);
                grad[(k + 1) * n + i] += scale * (2.0 * gd[i] + 0.5 * de[i]);
            }
        }
        self.mask(x, &mut grad);
        Ok((scale * compensated_sum(total), grad))
    }

    /// Back onto the constraint set: sliding ends to their sphere, interior
    /// points radially into `[r_lo, r_hi]`.
    fn project(&self, x: &mut [f64]) {
        self.project_points(x)
    }
}

impl Problem<'_> {
    /// Zero the fixed ends and the normal part at sliding ends.
    fn mask(&self, x: &[f64], grad: &mut [f64]) {
        let n = self.n;
        for (end, k) in [(self.ends.0, 0), (self.ends.1, self.segments)] {
            let gk = &mut grad[k * n..(k + 1) * n];
            match end {
                Endpoint::Fixed => gk.iter_mut().for_each(|v| *v = 0.0),
                Endpoint::Sphere(_) => {
                    let p = &x[k * n..(k + 1) * n];
                    let r2: f64 = p.iter().map(|v| v * v).sum();
                    let dot: f64 = p.iter().zip(gk.iter()).map(|(a, b)| a * b).sum();
                    for (g, pi) in gk.iter_mut().zip(p) {
                        *g -= dot / r2 * pi;
                    }
                }
            }
        }
    }

    fn project_points(&self, x: &mut [f64]) {
        let n = self.n;
        for k in 0..=self.segments {
            let p = &mut x[k * n..(k + 1) * n];
            let r = norm(p);
            let target = match (k, self.ends) {
                (0, (Endpoint::Sphere(s), _)) => s,
                (k, (_, Endpoint::Sphere(s))) if k == self.segments => s,
                (0, _) => continue,
                (k, _) if k == self.segments => continue,
                _ => r.clamp(self.r_lo, self.r_hi),
            };
            if r > 0.0 && target != r {
                p.iter_mut().for_each(|v| *v *= target / r);
            }
        }
    }
}

/// Refine a polyline into a discrete geodesic with `segments` pieces.
pub(crate) fn refine(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    poly: &[Vec<f64>],
    ends: (Endpoint, Endpoint),
    segments: usize,
    radii: (f64, f64),
) -> Result<Vec<Vec<f64>>> {
    if poly.len() < 2 || segments < 1 {
        return Err(Error::InvalidArgument("refinement needs a polyline and segments >= 1".into()));
    }
    let n = poly[0].len();
    let start = resample(u, g0, poly, segments)?;
    let prob = Problem {
        u,
        g0,
        n,
        segments,
        ends,
        r_lo: radii.0,
        r_hi: radii.1,
    };
    let x = minimize(&prob, start.into_iter().flatten().collect())?;
    Ok(x.chunks(n).map(|c| c.to_vec()).collect())
}

/// Projected L-BFGS with backtracking Armijo steps.
pub(crate) fn minimize<P: Objective>(prob: &P, mut x: Vec<f64>) -> Result<Vec<f64>> {
    prob.project(&mut x);
    let (mut e, mut g) = prob.energy(&x)?;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    for _ in 0..MAX_ITER {
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(-a, y, &mut q);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        } else {
            let gn = dot(&g, &g).sqrt().max(f64::MIN_POSITIVE);
            let scale = 1e-2 * norm(&x) / gn;
            q.iter_mut().for_each(|v| *v *= scale);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(a - b, s, &mut q);
        }
        let mut slope = -dot(&g, &q);
        if slope >= 0.0 {
            hist.clear();
            q = g.clone();
            slope = -dot(&g, &g);
        }
        if slope.abs() <= 1e-28 * e.abs().max(1e-300) {
            break;
        }
        // backtracking Armijo with projection
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let mut trial: Vec<f64> = x.iter().zip(&q).map(|(a, d)| a - step * d).collect();
            prob.project(&mut trial);
            if let Ok((et, gt)) = prob.energy(&trial) {
                if et <= e + 1e-4 * step * slope {
                    accepted = Some((trial, et, gt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, en, gn)) = accepted else { break };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        let done = (e - en).abs() <= 1e-15 * e.abs();
        x = xn;
        e = en;
        g = gn;
        if sy > 0.0 {
            hist.push_back((s, y, 1.0 / sy));
            if hist.len() > MEMORY {
                hist.pop_front();
            }
        }
        if done {
            break;
        }
    }
    Ok(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
