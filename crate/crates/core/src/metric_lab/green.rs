//! Dirichlet Green function of the flat unit ball, the profile of `w = u / G`,
//! and the hypothesis audit run before any fixture is blamed on the theorems.

use super::check_pair;
use crate::background::{norm, BackgroundMetric};
use crate::curvature::scalar_curvature_conformal;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::Resolution;
use crate::integrate::{integrate, Measure};
use crate::quadrature::omega;
use crate::Dimension;
use rayon::prelude::*;
use serde::Serialize;

/// `G(x) = (|x|^{2-n} - 1) / ((n-2) omega_{n-1})`, with `G = 0` on `|x| = 1`.
pub fn green_function_flat_ball(n: Dimension, x: &[f64]) -> Result<f64> {
    let r = norm(x);
    if r == 0.0 {
        return Err(Error::OriginInput);
    }
    if r > 1.0 {
        return Err(Error::OutOfBall { norm: r });
    }
    let nf = n.nf();
    Ok((r.powf(2.0 - nf) - 1.0) / ((nf - 2.0) * omega(n)))
}

#[derive(Debug, Clone, Serialize)]
pub struct WProfile {
    pub radii: Vec<f64>,
    pub sup: Vec<f64>,
    pub mean: Vec<f64>,
    /// `sup w` stops growing over the innermost half of the radii.
    pub bounded: bool,
}

/// Sup and mean of `w = u / G` on each sphere `|x| = r`, radii decreasing.
pub fn w_profile(u: &ConformalFactor, radii: &[f64], sphere_degree: usize) -> Result<WProfile> {
    let n = u.dimension();
    if radii.windows(2).any(|w| w[1] >= w[0]) || radii.is_empty() {
        return Err(Error::InvalidArgument("radii must be nonempty and decreasing".into()));
    }
    let sphere = Resolution::new(2, sphere_degree).sphere(n)?;
    let area = sphere.total_weight();
    let mut sup = Vec::with_capacity(radii.len());
    let mut mean = Vec::with_capacity(radii.len());
    for &r in radii {
        let g = green_function_flat_ball(n, &{
            let mut x = vec![0.0; n.n()];
            x[0] = r;
            x
        })?;
        let w = sphere
            .nodes()
            .par_iter()
            .map(|t| {
                let x: Vec<f64> = t.iter().map(|v| v * r).collect();
                Ok(u.value(&x)? / g)
            })
            .collect::<Result<Vec<f64>>>()?;
        sup.push(w.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        mean.push(w.iter().zip(sphere.weights()).map(|(a, b)| a * b).sum::<f64>() / area);
    }
    let tail = &sup[sup.len() / 2..];
    let bounded = tail.windows(2).all(|s| s[1] <= s[0] * (1.0 + 1e-3));
    Ok(WProfile {
        radii: radii.to_vec(),
        sup,
        mean,
        bounded,
    })
}

/// Dyadic-annulus evidence for the standing hypotheses: infinite volume at
/// the puncture and `R in L^{n/2}`.
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisAudit {
    /// Annulus `j` is `B_{2^{-j}} \ B_{2^{-j-1}}`.
    pub levels: Vec<usize>,
    pub volumes: Vec<f64>,
    /// `int |R|^{n/2} dV_g` per annulus.
    pub curvature_energy: Vec<f64>,
    /// Annular volumes do not decay geometrically.
    pub volume_diverges: bool,
    /// Fitted `p` in `energy_j ~ j^{-p}` over the last two levels.
    pub energy_decay_exponent: f64,
    /// Energies summable (`p > 1`, or identically zero).
    pub curvature_finite: bool,
    pub satisfied: bool,
}

pub fn hypothesis_audit(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    levels: std::ops::RangeInclusive<usize>,
    res: Resolution,
) -> Result<HypothesisAudit> {
    let n = Dimension::new(check_pair(u, g0)?)?;
    let levels: Vec<usize> = levels.collect();
    if levels.len() < 2 || levels[0] == 0 {
        return Err(Error::InvalidArgument("need at least two levels starting at 1".into()));
    }
    let half_n = n.nf() / 2.0;
    let mut volumes = Vec::new();
    let mut energy = Vec::new();
    for &j in &levels {
        let hi = 2f64.powi(-(j as i32));
        let grid = res.grid(n, hi / 2.0, hi)?;
        let m = Measure::Conformal(u, g0);
        volumes.push(integrate(&grid, m, None, |_| Ok(1.0))?);
        energy.push(integrate(&grid, m, None, |x| {
            Ok(scalar_curvature_conformal(u, g0, x)?.abs().powf(half_n))
        })?);
    }
    let k = energy.len();
    let scale = energy.iter().cloned().fold(0.0, f64::max);
    let vol_scale = volumes.iter().cloned().fold(0.0, f64::max);
    // energies at roundoff level relative to the volumes count as zero
    let (p, finite) = if scale <= 1e-20 * vol_scale || energy[k - 1] <= 1e-12 * scale {
        (f64::INFINITY, true)
    } else {
        let (a, b) = (levels[k - 2] as f64, levels[k - 1] as f64);
        let p = -(energy[k - 1] / energy[k - 2]).ln() / (b / a).ln();
        (p, p > 1.0)
    };
    let volume_diverges = volumes[volumes.len() - 1] >= 0.5 * volumes[0];
    Ok(HypothesisAudit {
        levels,
        volumes,
        curvature_energy: energy,
        volume_diverges,
        energy_decay_exponent: p,
        curvature_finite: finite,
        satisfied: volume_diverges && finite,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn dim(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn green_function_values() {
        let g = green_function_flat_ball(dim(4), &[0.5, 0.0, 0.0, 0.0]).unwrap();
        assert!((g - 3.0 / (4.0 * PI * PI)).abs() < 1e-14);
        assert!(green_function_flat_ball(dim(3), &[0.0, 1.0, 0.0]).unwrap().abs() < 1e-15);
        let x = [1e-4, 0.0, 0.0, 0.0];
        let lead = green_function_flat_ball(dim(4), &x).unwrap() * 1e-8;
        assert!((lead * 2.0 * 2.0 * PI * PI - 1.0).abs() < 1e-7);
        assert_eq!(green_function_flat_ball(dim(3), &[0.0; 3]), Err(Error::OriginInput));
        assert!(matches!(
            green_function_flat_ball(dim(3), &[1.5, 0.0, 0.0]),
            Err(Error::OutOfBall { .. })
        ));
    }

    #[test]
    fn w_profiles() {
        let radii = [0.5, 0.1, 1e-2, 1e-3, 1e-4];
        let n = dim(4);
        let c = 2.0 * 2.0 * PI * PI;
        let u = ConformalFactor::parse(&format!("(absx^(-2) - 1)/{c}"), n).unwrap();
        let p = w_profile(&u, &radii, 4).unwrap();
        assert!(p.sup.iter().all(|w| (w - 1.0).abs() < 1e-10) && p.bounded);

        let u = ConformalFactor::parse("absx^(2-n)", n).unwrap();
        let p = w_profile(&u, &radii, 4).unwrap();
        assert!(p.bounded && (p.sup[4] / c - 1.0).abs() < 1e-7);

        let u = ConformalFactor::parse("absx^(2-n)*log(1/absx)", n).unwrap();
        let p = w_profile(&u, &radii, 4).unwrap();
        assert!(!p.bounded);
    }

    #[test]
    fn audit_of_the_inversion_and_flat_factors() {
        let g0 = BackgroundMetric::flat(dim(4));
        let u = ConformalFactor::parse("absx^(2-n)", dim(4)).unwrap();
        let a = hypothesis_audit(&u, &g0, 1..=4, Resolution::new(17, 4)).unwrap();
        assert!(a.satisfied, "{a:?}");
        let u = ConformalFactor::parse("1", dim(4)).unwrap();
        let a = hypothesis_audit(&u, &g0, 1..=4, Resolution::new(17, 4)).unwrap();
        assert!(!a.volume_diverges && !a.satisfied);
    }
}
