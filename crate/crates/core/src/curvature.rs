//! Pointwise Riemannian geometry from metric jets.
//!
//! Conventions: `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z`,
//! `Rm_ijkl = g(R(d_i, d_j) d_k, d_l)`, `Ric_jk = tr(X -> R(X, d_j) d_k)`, so the
//! unit sphere has `Ric = (n-1) g` and `R = n(n-1)`. The Weyl tensor is
//! `W = Rm + A (KN) g` with Schouten tensor `A = (Ric - R g / (2(n-1))) / (n-2)`.

use crate::background::BackgroundMetric;
use crate::dim::Dimension;
use crate::error::{Error, Result};
use crate::factor::ConformalFactor;
use crate::grid::AnnulusGrid;
use crate::jet::Jet;
use rayon::prelude::*;
use serde::Serialize;

/// Metric jets at a point with inverse, volume density and Christoffel symbols.
#[derive(Debug, Clone)]
pub struct PointGeometry {
    n: usize,
    g: Vec<Jet>,
    ginv: Vec<Jet>,
    sqrt_det: Jet,
    /// `Gamma^k_ij` at `(k * n + i) * n + j`.
    gamma: Vec<Jet>,
}

/// Curvature scalars and tensors of a metric at one point.
#[derive(Debug, Clone, Serialize)]
pub struct PointCurvature {
    pub scalar: f64,
    /// Row-major `Ric_ij`.
    pub ricci: Vec<f64>,
    pub riem_sq: f64,
    pub weyl_sq: f64,
    pub ric_sq: f64,
    /// `sqrt(det g)`, the density of `dV_g` against `dx`.
    pub volume_density: f64,
}

impl PointCurvature {
    /// `g^{ij} Ric_ij` recomputed from the stored tensor, for trace checks.
    pub fn ricci_trace(&self, ginv: &[f64]) -> f64 {
        self.ricci.iter().zip(ginv).map(|(a, b)| a * b).sum()
    }
}

/// Gauss-Jordan inverse and determinant of a symmetric positive-definite jet matrix.
pub fn invert_jets(m: &[Jet], n: usize) -> (Vec<Jet>, Jet) {
    let sp = m[0].space().clone();
    let mut a: Vec<Jet> = m.to_vec();
    let mut inv: Vec<Jet> = (0..n * n)
        .map(|k| Jet::constant(&sp, if k / n == k % n { 1.0 } else { 0.0 }))
        .collect();
    let mut det = Jet::constant(&sp, 1.0);
    for p in 0..n {
        let pivot = a[p * n + p].clone();
        det = det.mul(&pivot);
        let rp = pivot.recip();
        for c in 0..n {
            a[p * n + c] = a[p * n + c].mul(&rp);
            inv[p * n + c] = inv[p * n + c].mul(&rp);
        }
        for r in 0..n {
            if r == p {
                continue;
            }
            let f = a[r * n + p].clone();
            if f.coefficients().iter().all(|c| *c == 0.0) {
                continue;
            }
            for c in 0..n {
                a[r * n + c] = a[r * n + c].sub(&f.mul(&a[p * n + c]));
                inv[r * n + c] = inv[r * n + c].sub(&f.mul(&inv[p * n + c]));
            }
        }
    }
    (inv, det)
}

impl PointGeometry {
    /// Build from row-major metric jets (valid order >= 1).
    pub fn new(g: Vec<Jet>, n: usize) -> PointGeometry {
        assert_eq!(g.len(), n * n);
        let (ginv, det) = invert_jets(&g, n);
        let sqrt_det = det.powf(0.5);
        let dg: Vec<Jet> = (0..n)
            .flat_map(|l| g.iter().map(move |gij| gij.partial(l)))
            .collect();
        // dg[(l * n + i) * n + j] = d_l g_ij
        let d = |l: usize, i: usize, j: usize| &dg[(l * n + i) * n + j];
        let mut lower = Vec::with_capacity(n * n * n);
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    lower.push(d(i, j, l).add(d(j, i, l)).sub(d(l, i, j)).scale(0.5));
                }
            }
        }
        let mut gamma = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let mut acc = ginv[k * n].mul(&lower[i * n + j]);
                    for l in 1..n {
                        acc.add_product(&ginv[k * n + l], &lower[(l * n + i) * n + j]);
                    }
                    gamma.push(acc);
                }
            }
        }
        PointGeometry {
            n,
            g,
            ginv,
            sqrt_det,
            gamma,
        }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn metric_values(&self) -> Vec<f64> {
        self.g.iter().map(|j| j.value()).collect()
    }

    pub fn inverse_values(&self) -> Vec<f64> {
        self.ginv.iter().map(|j| j.value()).collect()
    }

    pub fn inverse(&self) -> &[Jet] {
        &self.ginv
    }

    pub fn metric(&self) -> &[Jet] {
        &self.g
    }

    pub fn sqrt_det(&self) -> &Jet {
        &self.sqrt_det
    }

    fn gamma(&self, k: usize, i: usize, j: usize) -> &Jet {
        &self.gamma[(k * self.n + i) * self.n + j]
    }

    /// `(R(d_i, d_j) d_k)^m` at `((m * n + i) * n + j) * n + k`.
    fn curvature_operator(&self) -> Vec<Jet> {
        let n = self.n;
        let dgamma: Vec<Jet> = (0..n).flat_map(|a| self.gamma.iter().map(move |g| g.partial(a))).collect();
        let dga = |a: usize, m: usize, i: usize, j: usize| &dgamma[((a * n + m) * n + i) * n + j];
        let mut t = Vec::with_capacity(n * n * n * n);
        for m in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut acc = dga(i, m, j, k).sub(dga(j, m, i, k));
                        for p in 0..n {
                            acc.add_product(self.gamma(p, j, k), self.gamma(m, i, p));
                            let neg = self.gamma(p, i, k).neg();
                            acc.add_product(&neg, self.gamma(m, j, p));
                        }
                        t.push(acc);
                    }
                }
            }
        }
        t
    }

    /// Ricci tensor jets (valid order two below the metric's).
    pub fn ricci_jets(&self) -> Vec<Jet> {
        let t = self.curvature_operator();
        ricci_from_operator(&t, self.n)
    }

    /// Scalar curvature jet (valid order two below the metric's).
    pub fn scalar_curvature_jet(&self) -> Jet {
        let ric = self.ricci_jets();
        contract(&self.ginv, &ric)
    }

    /// All curvature quantities at the base point.
    pub fn curvature(&self) -> PointCurvature {
        let n = self.n;
        let t = self.curvature_operator();
        let gv = self.metric_values();
        let gi = self.inverse_values();
        let mut rm = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += gv[l * n + m] * t[((m * n + i) * n + j) * n + k].value();
                        }
                        rm[((i * n + j) * n + k) * n + l] = s;
                    }
                }
            }
        }
        let ricci: Vec<f64> = ricci_from_operator(&t, n).iter().map(|j| j.value()).collect();
        let scalar: f64 = ricci.iter().zip(&gi).map(|(a, b)| a * b).sum();
        let nf = n as f64;
        let schouten: Vec<f64> = ricci
            .iter()
            .zip(&gv)
            .map(|(ric, g)| (ric - scalar * g / (2.0 * (nf - 1.0))) / (nf - 2.0))
            .collect();
        let mut weyl = rm.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let kn = schouten[i * n + k] * gv[j * n + l] + schouten[j * n + l] * gv[i * n + k]
                            - schouten[i * n + l] * gv[j * n + k]
                            - schouten[j * n + k] * gv[i * n + l];
                        weyl[((i * n + j) * n + k) * n + l] += kn;
                    }
                }
            }
        }
        PointCurvature {
            scalar,
            riem_sq: tensor_norm_sq(&rm, &gi, n, 4),
            weyl_sq: tensor_norm_sq(&weyl, &gi, n, 4),
            ric_sq: tensor_norm_sq(&ricci, &gi, n, 2),
            ricci,
            volume_density: self.sqrt_det.value(),
        }
    }

    /// `Delta_g f = g^{ij} (d_ij f - Gamma^k_ij d_k f)` as a jet.
    pub fn laplacian(&self, f: &Jet) -> Jet {
        let n = self.n;
        let df: Vec<Jet> = (0..n).map(|k| f.partial(k)).collect();
        let mut acc: Option<Jet> = None;
        for i in 0..n {
            for j in 0..n {
                let mut h = df[i].partial(j);
                for (k, dfk) in df.iter().enumerate() {
                    h = h.sub(&self.gamma(k, i, j).mul(dfk));
                }
                let term = self.ginv[i * n + j].mul(&h);
                acc = Some(match acc {
                    None => term,
                    Some(a) => a.add(&term),
                });
            }
        }
        acc.expect("dimension >= 1")
    }

    /// `grad f = g^{ij} d_j f` as vector jets.
    pub fn gradient(&self, f: &Jet) -> Vec<Jet> {
        let n = self.n;
        let df: Vec<Jet> = (0..n).map(|k| f.partial(k)).collect();
        (0..n)
            .map(|i| {
                let mut acc = self.ginv[i * n].mul(&df[0]);
                for j in 1..n {
                    acc.add_product(&self.ginv[i * n + j], &df[j]);
                }
                acc
            })
            .collect()
    }

    /// `div X = (1/sqrt g) d_i (sqrt g X^i)`.
    pub fn divergence(&self, x: &[Jet]) -> Jet {
        let mut acc: Option<Jet> = None;
        for (i, xi) in x.iter().enumerate() {
            let term = self.sqrt_det.mul(xi).partial(i);
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term),
            });
        }
        acc.expect("dimension >= 1").div(&self.sqrt_det)
    }

    /// Coordinate flux density `sqrt(g) X^i nu_i` of a vector field through
    /// the Euclidean unit normal `nu` (multiply by `r^{n-1} dS` to integrate).
    pub fn flux_density(&self, x: &[f64], nu: &[f64]) -> f64 {
        self.sqrt_det.value() * x.iter().zip(nu).map(|(a, b)| a * b).sum::<f64>()
    }
}

fn ricci_from_operator(t: &[Jet], n: usize) -> Vec<Jet> {
    let mut ric = Vec::with_capacity(n * n);
    for j in 0..n {
        for k in 0..n {
            let mut acc = t[j * n + k].clone();
            for i in 1..n {
                acc = acc.add(&t[((i * n + i) * n + j) * n + k]);
            }
            ric.push(acc);
        }
    }
    ric
}

fn contract(ginv: &[Jet], t: &[Jet]) -> Jet {
    let mut acc = ginv[0].mul(&t[0]);
    for k in 1..t.len() {
        acc.add_product(&ginv[k], &t[k]);
    }
    acc
}

/// Full norm `T_{a..} T^{a..}` of a covariant tensor of given rank.
pub fn tensor_norm_sq(t: &[f64], ginv: &[f64], n: usize, rank: usize) -> f64 {
    let mut raised = t.to_vec();
    for slot in 0..rank {
        let stride = n.pow((rank - 1 - slot) as u32);
        let mut next = vec![0.0; raised.len()];
        for (idx, out) in next.iter_mut().enumerate() {
            let a = (idx / stride) % n;
            let base = idx - a * stride;
            let mut s = 0.0;
            for b in 0..n {
                s += ginv[a * n + b] * raised[base + b * stride];
            }
            *out = s;
        }
        raised = next;
    }
    raised.iter().zip(t).map(|(a, b)| a * b).sum()
}

/// Jets of `g = u^{4/(n-2)} g0` at `x`.
pub fn conformal_metric_jets(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    x: &[f64],
    order: usize,
) -> Result<Vec<Jet>> {
    let n = g0.dimension();
    check_dimensions(u, g0, x)?;
    let w = u.jet(x, order)?.powf(n.conformal_exponent());
    Ok(g0
        .metric_jets(x, order)?
        .into_iter()
        .map(|c| c.mul(&w))
        .collect())
}

fn check_dimensions(u: &ConformalFactor, g0: &BackgroundMetric, x: &[f64]) -> Result<()> {
    let n = g0.dimension().n();
    if u.dimension().n() != n || x.len() != n {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: factor {}, background {}, point {}",
            u.dimension().n(),
            n,
            x.len()
        )));
    }
    Ok(())
}

/// Components `u(x)^{4/(n-2)} g0_ij(x)` (row-major).
pub fn conformal_metric_at(u: &ConformalFactor, g0: &BackgroundMetric, x: &[f64]) -> Result<Vec<f64>> {
    check_dimensions(u, g0, x)?;
    let w = u.value(x)?.powf(g0.dimension().conformal_exponent());
    Ok(g0.components(x).into_iter().map(|c| c * w).collect())
}

/// Geometry of `g` at `x` with jets of the given order.
pub fn conformal_geometry(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    x: &[f64],
    order: usize,
) -> Result<PointGeometry> {
    let jets = conformal_metric_jets(u, g0, x, order)?;
    Ok(PointGeometry::new(jets, x.len()))
}

/// Geometry of `g0` at `x`.
pub fn background_geometry(g0: &BackgroundMetric, x: &[f64], order: usize) -> Result<PointGeometry> {
    Ok(PointGeometry::new(g0.metric_jets(x, order)?, x.len()))
}

/// `(R(g0), Ric(g0))` at `x`, from supplied data or from the components.
pub fn background_curvature(g0: &BackgroundMetric, x: &[f64]) -> Result<(f64, Vec<f64>)> {
    if let Some(c) = g0.supplied_curvature(x) {
        return Ok(c);
    }
    if g0.is_flat() {
        return Ok((0.0, vec![0.0; x.len() * x.len()]));
    }
    let c = background_geometry(g0, x, 2)?.curvature();
    Ok((c.scalar, c.ricci))
}

/// Scalar curvature of `g` from the conformal Laplacian:
/// `R(g) = (-Delta_{g0} u + c(n) R(g0) u) / (c(n) u^{(n+2)/(n-2)})`.
pub fn scalar_curvature_conformal(u: &ConformalFactor, g0: &BackgroundMetric, x: &[f64]) -> Result<f64> {
    check_dimensions(u, g0, x)?;
    let n: Dimension = g0.dimension();
    let c = n.yamabe_constant();
    let uj = u.jet(x, 2)?;
    let geo = background_geometry(g0, x, 2)?;
    let lap = geo.laplacian(&uj).value();
    let (r0, _) = background_curvature(g0, x)?;
    let uv = uj.value();
    let nf = n.nf();
    Ok((-lap + c * r0 * uv) / (c * uv.powf((nf + 2.0) / (nf - 2.0))))
}

/// Curvature of `g` at a single point.
pub fn curvature_at(u: &ConformalFactor, g0: &BackgroundMetric, x: &[f64]) -> Result<PointCurvature> {
    Ok(conformal_geometry(u, g0, x, 2)?.curvature())
}

/// Curvature of `g` sampled on every point of an annulus grid.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureBundle {
    pub scalar: Vec<f64>,
    pub ricci: Vec<Vec<f64>>,
    pub riem_sq: Vec<f64>,
    pub weyl_sq: Vec<f64>,
    pub ric_sq: Vec<f64>,
    pub volume_density: Vec<f64>,
}

impl CurvatureBundle {
    pub fn len(&self) -> usize {
        self.scalar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scalar.is_empty()
    }

    pub fn point(&self, k: usize) -> PointCurvature {
        PointCurvature {
            scalar: self.scalar[k],
            ricci: self.ricci[k].clone(),
            riem_sq: self.riem_sq[k],
            weyl_sq: self.weyl_sq[k],
            ric_sq: self.ric_sq[k],
            volume_density: self.volume_density[k],
        }
    }
}

pub fn curvature_bundle(
    u: &ConformalFactor,
    g0: &BackgroundMetric,
    grid: &AnnulusGrid,
) -> Result<CurvatureBundle> {
    let points: Vec<PointCurvature> = (0..grid.len())
        .into_par_iter()
        .map(|k| curvature_at(u, g0, &grid.point_flat(k)))
        .collect::<Result<_>>()?;
    let mut b = CurvatureBundle {
        scalar: Vec::with_capacity(points.len()),
        ricci: Vec::with_capacity(points.len()),
        riem_sq: Vec::with_capacity(points.len()),
        weyl_sq: Vec::with_capacity(points.len()),
        ric_sq: Vec::with_capacity(points.len()),
        volume_density: Vec::with_capacity(points.len()),
    };
    for p in points {
        b.scalar.push(p.scalar);
        b.ricci.push(p.ricci);
        b.riem_sq.push(p.riem_sq);
        b.weyl_sq.push(p.weyl_sq);
        b.ric_sq.push(p.ric_sq);
        b.volume_density.push(p.volume_density);
    }
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::JetSpace;

    fn d(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn flat_metric_has_no_curvature() {
        let u = ConformalFactor::parse("1", d(4)).unwrap();
        let c = curvature_at(&u, &BackgroundMetric::flat(d(4)), &[0.3, 0.2, 0.1, 0.5]).unwrap();
        assert_eq!(c.scalar, 0.0);
        assert_eq!(c.riem_sq, 0.0);
        assert!((c.volume_density - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stereographic_factor_is_unit_sphere() {
        for n in 3..=6 {
            let src = "(2 / (1 + absx^2))^((n - 2)/2)";
            let u = ConformalFactor::parse(src, d(n)).unwrap();
            let g0 = BackgroundMetric::flat(d(n));
            let x: Vec<f64> = (0..n).map(|i| 0.1 + 0.07 * i as f64).collect();
            let c = curvature_at(&u, &g0, &x).unwrap();
            let nf = n as f64;
            assert!((c.scalar - nf * (nf - 1.0)).abs() < 1e-10, "n={n} R={}", c.scalar);
            assert!((c.ric_sq - nf * (nf - 1.0).powi(2)).abs() < 1e-9);
            assert!((c.riem_sq - 2.0 * nf * (nf - 1.0)).abs() < 1e-9);
            assert!(c.weyl_sq.abs() < 1e-9);
            let yamabe = scalar_curvature_conformal(&u, &g0, &x).unwrap();
            assert!((yamabe - nf * (nf - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn round_chart_background_is_unit_sphere() {
        let g0 = BackgroundMetric::round_sphere_chart(d(4));
        let (r, ric) = background_curvature(&g0, &[0.4, -0.3, 0.2, 0.1]).unwrap();
        assert!((r - 12.0).abs() < 1e-10);
        let gv = g0.components(&[0.4, -0.3, 0.2, 0.1]);
        assert!((ric[0] - 3.0 * gv[0]).abs() < 1e-10);
    }

    #[test]
    fn inversion_metric_is_flat() {
        let u = ConformalFactor::parse("absx^(2-n)", d(4)).unwrap();
        let c = curvature_at(&u, &BackgroundMetric::flat(d(4)), &[0.3, -0.7, 0.2, 0.4]).unwrap();
        assert!(c.riem_sq.abs() < 1e-9 && c.scalar.abs() < 1e-9);
    }

    #[test]
    fn weyl_split_on_generic_metric() {
        // |Rm|^2 - |W|^2 = 4/(n-2) |Ric|^2 - 2 R^2 / ((n-1)(n-2))
        let n = 4;
        let sp = JetSpace::get(n, 2);
        let x = [0.2, 0.1, -0.3, 0.25];
        let c = Jet::coordinates(&sp, &x);
        let mut g = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let base = if i == j { 1.5 } else { 0.0 };
                let pert = c[i].mul(&c[j]).scale(0.3).add(&c[(i + j) % n].sin().scale(0.1));
                g.push(pert.shift(base));
            }
        }
        // symmetrize
        for i in 0..n {
            for j in 0..i {
                let s = g[i * n + j].add(&g[j * n + i]).scale(0.5);
                g[i * n + j] = s.clone();
                g[j * n + i] = s;
            }
        }
        let geo = PointGeometry::new(g, n);
        let cv = geo.curvature();
        let nf = n as f64;
        let lhs = cv.riem_sq - cv.weyl_sq;
        let rhs = 4.0 / (nf - 2.0) * cv.ric_sq - 2.0 * cv.scalar.powi(2) / ((nf - 1.0) * (nf - 2.0));
        assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        let trace = cv.ricci_trace(&geo.inverse_values());
        assert!((trace - cv.scalar).abs() < 1e-12);
    }
}
