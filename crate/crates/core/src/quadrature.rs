//! Product quadrature on `S^{n-1}` and compensated summation.
//!
//! A point of `S^{d-1}` is written `(t, sqrt(1-t^2) y)` with `y` in `S^{d-2}`,
//! so `dS_{d-1} = (1-t^2)^{(d-3)/2} dt dS_{d-2}`. Each level therefore uses a
//! Gauss-Gegenbauer rule for the weight `(1-t^2)^{(d-3)/2}`; the innermost
//! circle uses the trapezoid rule, which is exact for trigonometric
//! polynomials below its point count.

use crate::dim::{gamma_half, sphere_area, Dimension};
use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use std::f64::consts::PI;

/// Nodes and weights on the unit sphere `S^{n-1}`.
#[derive(Debug, Clone, Serialize)]
pub struct SphereQuadrature {
    n: usize,
    degree: usize,
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// Node count per level: `n-2` Gegenbauer levels then the circle.
    shape: Vec<usize>,
}

impl SphereQuadrature {
    /// Rule exact for polynomials of total degree `<= degree` restricted to the sphere.
    pub fn new(n: Dimension, degree: usize) -> Result<SphereQuadrature> {
        if degree < 2 {
            return Err(Error::InvalidArgument(format!(
                "sphere quadrature degree must be >= 2, got {degree}"
            )));
        }
        let n = n.n();
        let mut levels = Vec::new();
        for d in (3..=n).rev() {
            let a = (d as f64 - 3.0) / 2.0;
            levels.push(gauss_gegenbauer((degree + 2) / 2, a));
        }
        let m = degree + 1;
        let circle: Vec<(f64, f64)> = (0..m)
            .map(|k| (2.0 * PI * k as f64 / m as f64, 2.0 * PI / m as f64))
            .collect();

        let mut shape: Vec<usize> = levels.iter().map(|l| l.len()).collect();
        shape.push(m);

        let total: usize = shape.iter().product();
        let mut nodes = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut index = vec![0usize; shape.len()];
        for _ in 0..total {
            let mut x = vec![0.0; n];
            let mut w = 1.0;
            let mut scale = 1.0;
            for (lvl, rule) in levels.iter().enumerate() {
                let (t, wt) = rule[index[lvl]];
                x[lvl] = scale * t;
                scale *= (1.0 - t * t).max(0.0).sqrt();
                w *= wt;
            }
            let (phi, wc) = circle[index[shape.len() - 1]];
            x[n - 2] = scale * phi.cos();
            x[n - 1] = scale * phi.sin();
            w *= wc;
            nodes.push(x);
            weights.push(w);
            for lvl in (0..shape.len()).rev() {
                index[lvl] += 1;
                if index[lvl] < shape[lvl] {
                    break;
                }
                index[lvl] = 0;
            }
        }
        Ok(SphereQuadrature {
            n,
            degree,
            nodes,
            weights,
            shape,
        })
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[Vec<f64>] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes per angular level, the last entry being the periodic circle.
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Total weight, equal to the area of `S^{n-1}`.
    pub fn total_weight(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    /// `sum_k w_k f(theta_k)`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        compensated_sum(self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)))
    }
}

/// Gauss rule with `k` nodes for the weight `(1-t^2)^a` on `[-1, 1]`
/// (Golub-Welsch on the monic Jacobi recurrence with `alpha = beta = a`).
pub fn gauss_gegenbauer(k: usize, a: f64) -> Vec<(f64, f64)> {
    let mut jm = DMatrix::<f64>::zeros(k, k);
    for j in 1..k {
        let j_f = j as f64;
        let s = 2.0 * j_f + 2.0 * a;
        let beta = 4.0 * j_f * (j_f + a).powi(2) * (j_f + 2.0 * a) / (s * s * (s + 1.0) * (s - 1.0));
        let off = beta.sqrt();
        jm[(j, j - 1)] = off;
        jm[(j - 1, j)] = off;
    }
    // int_{-1}^{1} (1-t^2)^a dt = sqrt(pi) Gamma(a+1) / Gamma(a+3/2)
    let two_a = (2.0 * a).round() as usize;
    let mu0 = PI.sqrt() * gamma_half(two_a + 2) / gamma_half(two_a + 3);
    let eig = SymmetricEigen::new(jm);
    let mut rule: Vec<(f64, f64)> = (0..k)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    rule.sort_by(|x, y| x.0.total_cmp(&y.0));
    // Symmetrize against rounding so odd moments vanish to machine precision.
    for i in 0..k / 2 {
        let j = k - 1 - i;
        let t = 0.5 * (rule[j].0 - rule[i].0);
        let w = 0.5 * (rule[i].1 + rule[j].1);
        rule[i] = (-t, w);
        rule[j] = (t, w);
    }
    if k % 2 == 1 {
        rule[k / 2].0 = 0.0;
    }
    rule
}

/// Neumaier-compensated summation.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Area of the unit `S^{n-1}` for a validated dimension.
pub fn omega(n: Dimension) -> f64 {
    sphere_area(n.n())
}
