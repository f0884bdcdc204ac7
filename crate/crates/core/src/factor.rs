//! The conformal factor `u` of `g = u^{4/(n-2)} g0`.

use crate::background::norm;
use crate::dim::Dimension;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fd::fd_jets;
use crate::jet::{Dual, Jet, JetSpace, Scalar};
use std::fmt;
use std::sync::Arc;

type FieldFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Positive field known only through point samples.
#[derive(Clone)]
pub struct SampledFactor {
    pub field: Arc<FieldFn>,
    /// Relative finite-difference step (`h = rel_step * |x|`).
    pub rel_step: f64,
}

impl fmt::Debug for SampledFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFactor")
            .field("rel_step", &self.rel_step)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum ConformalFactor {
    Expr(Expr),
    Sampled(Dimension, SampledFactor),
    /// `x -> amplitude * inner(scale * x)`.
    Rescaled {
        inner: Arc<ConformalFactor>,
        amplitude: f64,
        scale: f64,
    },
}

impl ConformalFactor {
    pub fn parse(source: &str, n: Dimension) -> Result<Self> {
        Ok(ConformalFactor::Expr(Expr::parse(source, n.n())?))
    }

    pub fn sampled<F>(n: Dimension, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ConformalFactor::Sampled(
            n,
            SampledFactor {
                field: Arc::new(f),
                rel_step: 2e-3,
            },
        )
    }

    pub fn rescaled(self: &Arc<Self>, amplitude: f64, scale: f64) -> Self {
        ConformalFactor::Rescaled {
            inner: self.clone(),
            amplitude,
            scale,
        }
    }

    pub fn dimension(&self) -> Dimension {
        match self {
            ConformalFactor::Expr(e) => {
                Dimension::new(e.dimension()).expect("expression bound to a valid dimension")
            }
            ConformalFactor::Sampled(n, _) => *n,
            ConformalFactor::Rescaled { inner, .. } => inner.dimension(),
        }
    }

    /// Highest derivative order available.
    pub fn max_order(&self) -> usize {
        match self {
            ConformalFactor::Expr(_) => usize::MAX,
            ConformalFactor::Sampled(..) => 2,
            ConformalFactor::Rescaled { inner, .. } => inner.max_order(),
        }
    }

    /// Closed form depending on `|x|` only.
    pub fn is_radial(&self) -> bool {
        match self {
            ConformalFactor::Expr(e) => e.is_radial(),
            ConformalFactor::Sampled(..) => false,
            ConformalFactor::Rescaled { inner, .. } => inner.is_radial(),
        }
    }

    /// Closed form invariant under rotations of `x1..xk`.
    pub fn is_rotation_invariant(&self, k: usize) -> bool {
        match self {
            ConformalFactor::Expr(e) => e.is_rotation_invariant(k),
            ConformalFactor::Sampled(..) => false,
            ConformalFactor::Rescaled { inner, .. } => inner.is_rotation_invariant(k),
        }
    }

    pub fn is_analytic(&self) -> bool {
        self.max_order() == usize::MAX
    }

    /// Closed-form evaluation on any scalar type (`None` for sampled fields).
    pub fn eval_generic<S: Scalar>(&self, x: &[S]) -> Option<S> {
        match self {
            ConformalFactor::Expr(e) => Some(e.eval(x)),
            ConformalFactor::Sampled(..) => None,
            ConformalFactor::Rescaled {
                inner,
                amplitude,
                scale,
            } => {
                let y: Vec<S> = x.iter().map(|v| v.scale(*scale)).collect();
                inner.eval_generic(&y).map(|v| v.scale(*amplitude))
            }
        }
    }

    fn raw_value(&self, x: &[f64]) -> f64 {
        match self {
            ConformalFactor::Expr(e) => e.value(x),
            ConformalFactor::Sampled(_, s) => (s.field)(x),
            ConformalFactor::Rescaled {
                inner,
                amplitude,
                scale,
            } => {
                let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                amplitude * inner.raw_value(&y)
            }
        }
    }

    /// `u(x)`, checked to be finite and positive.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::EvalOutsideDomain { point: x.to_vec() });
        }
        positive(self.raw_value(x), x)
    }

    /// Taylor jet of `u` at `x` up to `order`.
    pub fn jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        if x.iter().all(|v| *v == 0.0) {
            return Err(Error::EvalOutsideDomain { point: x.to_vec() });
        }
        let sp = JetSpace::get(x.len(), order);
        let coords = Jet::coordinates(&sp, x);
        let jet = match self.eval_generic(&coords) {
            Some(j) => j,
            None => self.sampled_jet(x, order)?,
        };
        positive(jet.value(), x)?;
        if jet.coefficients().iter().any(|c| !c.is_finite()) {
            return Err(Error::EvalOutsideDomain { point: x.to_vec() });
        }
        Ok(jet)
    }

    fn sampled_jet(&self, x: &[f64], order: usize) -> Result<Jet> {
        match self {
            ConformalFactor::Sampled(_, s) => {
                let h = s.rel_step * norm(x);
                fd_jets(|y| Ok(vec![(s.field)(y)]), x, order, h, "sampled conformal factor")
                    .map(|mut v| v.remove(0))
            }
            ConformalFactor::Rescaled {
                inner,
                amplitude,
                scale,
            } => {
                let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
                Ok(inner
                    .sampled_jet(&y, order)?
                    .rescale_argument(*scale)
                    .scale(*amplitude))
            }
            ConformalFactor::Expr(_) => unreachable!("closed form handled by eval_generic"),
        }
    }

    /// Value and gradient of `u` at `x`.
    pub fn dual(&self, x: &[f64]) -> Result<Dual> {
        match self.eval_generic(&Dual::coordinates(x)) {
            Some(d) => {
                positive(d.value(), x)?;
                Ok(d)
            }
            None => {
                let j = self.jet(x, 1)?;
                Ok(Dual::from_parts(j.value(), &j.gradient()))
            }
        }
    }
}

fn positive(v: f64, x: &[f64]) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::NonPositiveFactor {
            point: x.to_vec(),
            value: v,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(n: usize) -> Dimension {
        Dimension::new(n).unwrap()
    }

    #[test]
    fn sampled_matches_expression() {
        let e = ConformalFactor::parse("absx^-2 * (1 + x1)", d(4)).unwrap();
        let e2 = e.clone();
        let s = ConformalFactor::sampled(d(4), move |x| e2.value(x).unwrap());
        let x = [0.3, 0.2, -0.4, 0.1];
        let je = e.jet(&x, 2).unwrap();
        let js = s.jet(&x, 2).unwrap();
        for k in 0..je.coefficients().len() {
            let (a, b) = (je.coefficients()[k], js.coefficients()[k]);
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0), "coef {k}: {a} vs {b}");
        }
    }

    #[test]
    fn rescaled_factor_commutes_with_jets() {
        let base = Arc::new(ConformalFactor::parse("1 + absx^-2", d(4)).unwrap());
        let r = base.rescaled(3.0, 0.01);
        let x = [1.0, 0.5, 0.0, 0.0];
        let v = r.value(&x).unwrap();
        let y: Vec<f64> = x.iter().map(|t| t * 0.01).collect();
        assert!((v - 3.0 * base.value(&y).unwrap()).abs() < 1e-9 * v);
        let sampled = Arc::new(ConformalFactor::sampled(d(4), |x: &[f64]| {
            1.0 + 1.0 / x.iter().map(|t| t * t).sum::<f64>()
        }));
        let rs = sampled.rescaled(3.0, 0.01);
        let ja = r.jet(&x, 2).unwrap();
        let jb = rs.jet(&x, 2).unwrap();
        assert!((ja.d1(0) - jb.d1(0)).abs() < 1e-6 * ja.d1(0).abs());
    }

    #[test]
    fn nonpositive_values_rejected() {
        let e = ConformalFactor::parse("x1", d(3)).unwrap();
        assert!(matches!(
            e.value(&[-1.0, 0.0, 0.0]),
            Err(Error::NonPositiveFactor { .. })
        ));
        assert!(e.value(&[0.0, 0.0, 0.0]).is_err());
    }
}
