//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients of a function around a base point
//! up to a fixed total degree. Expression trees evaluated on jets yield exact
//! derivatives (up to rounding) of every order the jet carries, which is how
//! curvature, Q-curvature and the Paneitz operator get their 2nd–4th
//! derivatives without finite-difference noise.
//!
//! Each jet also tracks `valid`, the highest degree whose coefficients are
//! meaningful. Differentiation lowers it by one and products take the
//! minimum, so a chain of operations never reads coefficients it could not
//! have computed.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

/// Largest number of variables a jet may carry (dimension 8).
pub const MAX_VARS: usize = 8;

type Exponent = [u8; MAX_VARS];

/// Monomial bookkeeping shared by every jet with the same `(nvars, order)`.
#[derive(Debug)]
pub struct JetSpace {
    nvars: usize,
    order: usize,
    exps: Vec<Exponent>,
    degree: Vec<usize>,
    /// `degree_end[d]` = number of monomials of degree `<= d`.
    degree_end: Vec<usize>,
    /// Product table `(a, b, a*b)` sorted by the degree of the product.
    mul: Vec<(u32, u32, u32)>,
    /// `mul_end[d]` = number of product triples landing in degree `<= d`.
    mul_end: Vec<usize>,
    /// Per variable: `(src, dst, exponent)` for `d/dx_v x^src = exponent * x^dst`.
    deriv: Vec<Vec<(u32, u32, f64)>>,
    /// `alpha!` per monomial.
    alpha_factorial: Vec<f64>,
    index: HashMap<Exponent, usize>,
}

fn spaces() -> &'static Mutex<HashMap<(usize, usize), Arc<JetSpace>>> {
    static SPACES: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
    SPACES.get_or_init(|| Mutex::new(HashMap::new()))
}

impl JetSpace {
    /// Shared space for `nvars` variables truncated at total degree `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        assert!(
            (1..=MAX_VARS).contains(&nvars),
            "jet variable count must be in 1..=8"
        );
        let mut cache = spaces().lock().expect("jet space cache poisoned");
        cache
            .entry((nvars, order))
            .or_insert_with(|| Arc::new(JetSpace::build(nvars, order)))
            .clone()
    }

    fn build(nvars: usize, order: usize) -> JetSpace {
        let mut exps: Vec<Exponent> = Vec::new();
        let mut degree = Vec::new();
        let mut degree_end = Vec::with_capacity(order + 1);
        for d in 0..=order {
            let mut current = [0u8; MAX_VARS];
            push_compositions(nvars, d, 0, &mut current, &mut exps);
            degree.resize(exps.len(), d);
            degree_end.push(exps.len());
        }
        let index: HashMap<Exponent, usize> =
            exps.iter().enumerate().map(|(i, e)| (*e, i)).collect();

        let mut mul = Vec::new();
        for (a, ea) in exps.iter().enumerate() {
            for (b, eb) in exps.iter().enumerate() {
                if degree[a] + degree[b] > order {
                    continue;
                }
                let mut ec = [0u8; MAX_VARS];
                for v in 0..nvars {
                    ec[v] = ea[v] + eb[v];
                }
                mul.push((a as u32, b as u32, index[&ec] as u32));
            }
        }
        mul.sort_by_key(|&(_, _, c)| degree[c as usize]);
        let mut mul_end = vec![0; order + 1];
        for d in 0..=order {
            mul_end[d] = mul
                .iter()
                .take_while(|&&(_, _, c)| degree[c as usize] <= d)
                .count();
        }

        let mut deriv = vec![Vec::new(); nvars];
        for (src, e) in exps.iter().enumerate() {
            for (v, table) in deriv.iter_mut().enumerate() {
                if e[v] > 0 {
                    let mut dst = *e;
                    dst[v] -= 1;
                    table.push((src as u32, index[&dst] as u32, e[v] as f64));
                }
            }
        }

        let alpha_factorial = exps
            .iter()
            .map(|e| e.iter().map(|&k| factorial(k as usize)).product())
            .collect();

        JetSpace {
            nvars,
            order,
            exps,
            degree,
            degree_end,
            mul,
            mul_end,
            deriv,
            alpha_factorial,
            index,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Number of stored coefficients.
    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    /// Coefficient slot of the monomial with exponent `alpha`.
    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        let mut e = [0u8; MAX_VARS];
        for (slot, &a) in e.iter_mut().zip(alpha) {
            *slot = a;
        }
        self.index.get(&e).copied()
    }

    pub fn exponent(&self, idx: usize) -> &[u8] {
        &self.exps[idx][..self.nvars]
    }

    pub fn degree_of(&self, idx: usize) -> usize {
        self.degree[idx]
    }
}

fn push_compositions(
    nvars: usize,
    remaining: usize,
    pos: usize,
    current: &mut Exponent,
    out: &mut Vec<Exponent>,
) {
    if pos == nvars - 1 {
        current[pos] = remaining as u8;
        out.push(*current);
        current[pos] = 0;
        return;
    }
    for k in (0..=remaining).rev() {
        current[pos] = k as u8;
        push_compositions(nvars, remaining - k, pos + 1, current, out);
    }
    current[pos] = 0;
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Truncated Taylor polynomial around a base point.
#[derive(Debug, Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coeffs: Vec<f64>,
    valid: usize,
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, c: f64) -> Jet {
        let mut coeffs = vec![0.0; space.len()];
        coeffs[0] = c;
        Jet {
            space: space.clone(),
            coeffs,
            valid: space.order,
        }
    }

    /// The coordinate function `x_var` expanded around `base`.
    pub fn variable(space: &Arc<JetSpace>, var: usize, base: f64) -> Jet {
        let mut jet = Jet::constant(space, base);
        if space.order >= 1 {
            jet.coeffs[1 + var] = 1.0;
        }
        jet
    }

    /// All coordinate jets of a base point.
    pub fn coordinates(space: &Arc<JetSpace>, x: &[f64]) -> Vec<Jet> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| Jet::variable(space, i, xi))
            .collect()
    }

    /// Build a jet from derivatives: `coeffs[idx] = d^alpha f / alpha!`.
    pub fn from_coefficients(space: &Arc<JetSpace>, coeffs: Vec<f64>, valid: usize) -> Jet {
        assert_eq!(coeffs.len(), space.len());
        Jet {
            space: space.clone(),
            coeffs,
            valid: valid.min(space.order),
        }
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    /// Highest degree whose coefficients are meaningful.
    pub fn valid_order(&self) -> usize {
        self.valid
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    /// Partial derivative `d^alpha f` at the base point.
    pub fn derivative(&self, alpha: &[u8]) -> f64 {
        let idx = self
            .space
            .index_of(alpha)
            .expect("multi-index exceeds jet order");
        debug_assert!(self.space.degree[idx] <= self.valid);
        self.coeffs[idx] * self.space.alpha_factorial[idx]
    }

    /// First partial derivative along `var` at the base point.
    pub fn d1(&self, var: usize) -> f64 {
        debug_assert!(self.valid >= 1);
        self.coeffs[1 + var]
    }

    /// Second partial derivative at the base point.
    pub fn d2(&self, a: usize, b: usize) -> f64 {
        let mut alpha = [0u8; MAX_VARS];
        alpha[a] += 1;
        alpha[b] += 1;
        self.derivative(&alpha[..self.space.nvars])
    }

    pub fn gradient(&self) -> Vec<f64> {
        (0..self.space.nvars).map(|v| self.d1(v)).collect()
    }

    fn truncate(mut self) -> Jet {
        let end = self.space.degree_end[self.valid];
        for c in &mut self.coeffs[end..] {
            *c = 0.0;
        }
        self
    }

    fn same_space(&self, other: &Jet) {
        debug_assert!(Arc::ptr_eq(&self.space, &other.space));
    }

    pub fn add(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Jet {
            space: self.space.clone(),
            coeffs,
            valid: self.valid.min(other.valid),
        }
        .truncate()
    }

    pub fn sub(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Jet {
            space: self.space.clone(),
            coeffs,
            valid: self.valid.min(other.valid),
        }
        .truncate()
    }

    pub fn mul(&self, other: &Jet) -> Jet {
        self.same_space(other);
        let valid = self.valid.min(other.valid);
        let mut coeffs = vec![0.0; self.coeffs.len()];
        let end = self.space.mul_end[valid];
        for &(a, b, c) in &self.space.mul[..end] {
            coeffs[c as usize] += self.coeffs[a as usize] * other.coeffs[b as usize];
        }
        Jet {
            space: self.space.clone(),
            coeffs,
            valid,
        }
    }

    /// In-place `self += a * b`.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        let valid = self.valid.min(a.valid).min(b.valid);
        let end = self.space.mul_end[valid];
        for &(i, j, k) in &self.space.mul[..end] {
            self.coeffs[k as usize] += a.coeffs[i as usize] * b.coeffs[j as usize];
        }
        self.valid = valid;
        let stop = self.space.degree_end[valid];
        for c in &mut self.coeffs[stop..] {
            *c = 0.0;
        }
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|c| c * k).collect(),
            valid: self.valid,
        }
    }

    pub fn shift(&self, k: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += k;
        out
    }

    pub fn neg(&self) -> Jet {
        self.scale(-1.0)
    }

    /// Partial derivative as a jet; the valid order drops by one.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.valid >= 1, "cannot differentiate a degree-0 jet");
        let valid = self.valid - 1;
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for &(src, dst, e) in &self.space.deriv[var] {
            if self.space.degree[dst as usize] <= valid {
                coeffs[dst as usize] += e * self.coeffs[src as usize];
            }
        }
        Jet {
            space: self.space.clone(),
            coeffs,
            valid,
        }
    }

    /// Apply a univariate function given its derivatives at the base value:
    /// `derivs[k] = f^(k)(self.value())` for `k = 0..=valid`.
    pub fn compose(&self, derivs: &[f64]) -> Jet {
        let top = self.valid.min(derivs.len() - 1);
        let mut h = self.clone();
        h.coeffs[0] = 0.0;
        let mut acc = Jet::constant(&self.space, derivs[top] / factorial(top));
        acc.valid = self.valid;
        for k in (0..top).rev() {
            acc = acc.mul(&h);
            acc.coeffs[0] += derivs[k] / factorial(k);
        }
        acc.valid = self.valid;
        acc.truncate()
    }

    pub fn powf(&self, p: f64) -> Jet {
        let a = self.value();
        let mut derivs = Vec::with_capacity(self.valid + 1);
        let mut falling = 1.0;
        for k in 0..=self.valid {
            derivs.push(falling * a.powf(p - k as f64));
            falling *= p - k as f64;
        }
        self.compose(&derivs)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.valid + 1])
    }

    pub fn ln(&self) -> Jet {
        let a = self.value();
        let mut derivs = vec![a.ln()];
        for k in 1..=self.valid {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            derivs.push(sign * factorial(k - 1) / a.powi(k as i32));
        }
        self.compose(&derivs)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<f64> = (0..=self.valid).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<f64> = (0..=self.valid).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }

    pub fn recip(&self) -> Jet {
        self.powf(-1.0)
    }

    pub fn div(&self, other: &Jet) -> Jet {
        self.mul(&other.recip())
    }

    /// Rescale the expansion variable: the jet of `x -> f(s x)` at `x0`
    /// from the jet of `f` at `s x0`.
    pub fn rescale_argument(&self, s: f64) -> Jet {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            *c *= s.powi(self.space.degree[i] as i32);
        }
        out
    }
}

/// Value-plus-gradient number for first-order forward differentiation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual {
    n: usize,
    v: [f64; MAX_VARS + 1],
}

impl Dual {
    pub fn constant(n: usize, c: f64) -> Dual {
        let mut v = [0.0; MAX_VARS + 1];
        v[0] = c;
        Dual { n, v }
    }

    pub fn variable(n: usize, var: usize, base: f64) -> Dual {
        let mut d = Dual::constant(n, base);
        d.v[1 + var] = 1.0;
        d
    }

    pub fn coordinates(x: &[f64]) -> Vec<Dual> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| Dual::variable(x.len(), i, xi))
            .collect()
    }

    pub fn from_parts(value: f64, grad: &[f64]) -> Dual {
        let mut d = Dual::constant(grad.len(), value);
        d.v[1..=grad.len()].copy_from_slice(grad);
        d
    }

    pub fn value(&self) -> f64 {
        self.v[0]
    }

    pub fn grad(&self) -> &[f64] {
        &self.v[1..=self.n]
    }

    fn chain(&self, f: f64, df: f64) -> Dual {
        let mut out = *self;
        out.v[0] = f;
        for g in &mut out.v[1..=self.n] {
            *g *= df;
        }
        out
    }

    pub fn add(&self, o: &Dual) -> Dual {
        let mut out = *self;
        for i in 0..=self.n {
            out.v[i] += o.v[i];
        }
        out
    }

    pub fn sub(&self, o: &Dual) -> Dual {
        let mut out = *self;
        for i in 0..=self.n {
            out.v[i] -= o.v[i];
        }
        out
    }

    pub fn mul(&self, o: &Dual) -> Dual {
        let mut out = *self;
        out.v[0] = self.v[0] * o.v[0];
        for i in 1..=self.n {
            out.v[i] = self.v[i] * o.v[0] + self.v[0] * o.v[i];
        }
        out
    }

    pub fn div(&self, o: &Dual) -> Dual {
        let inv = 1.0 / o.v[0];
        let mut out = *self;
        out.v[0] = self.v[0] * inv;
        for i in 1..=self.n {
            out.v[i] = (self.v[i] - out.v[0] * o.v[i]) * inv;
        }
        out
    }

    pub fn scale(&self, k: f64) -> Dual {
        let mut out = *self;
        for c in &mut out.v[..=self.n] {
            *c *= k;
        }
        out
    }

    pub fn powf(&self, p: f64) -> Dual {
        let a = self.v[0];
        self.chain(a.powf(p), p * a.powf(p - 1.0))
    }

    pub fn exp(&self) -> Dual {
        let e = self.v[0].exp();
        self.chain(e, e)
    }

    pub fn ln(&self) -> Dual {
        self.chain(self.v[0].ln(), 1.0 / self.v[0])
    }

    pub fn sin(&self) -> Dual {
        let (s, c) = self.v[0].sin_cos();
        self.chain(s, c)
    }

    pub fn cos(&self) -> Dual {
        let (s, c) = self.v[0].sin_cos();
        self.chain(c, -s)
    }
}

/// Number-like types an expression tree can be evaluated on.
pub trait Scalar: Clone + Send + Sync {
    fn value(&self) -> f64;
    /// A constant living in the same space as `self`.
    fn lift(&self, c: f64) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn scale(&self, k: f64) -> Self;
    fn powf(&self, p: f64) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn neg(&self) -> Self {
        self.scale(-1.0)
    }
    fn sqrt(&self) -> Self {
        self.powf(0.5)
    }
}

impl Scalar for f64 {
    fn value(&self) -> f64 {
        *self
    }
    fn lift(&self, c: f64) -> f64 {
        c
    }
    fn add(&self, o: &f64) -> f64 {
        self + o
    }
    fn sub(&self, o: &f64) -> f64 {
        self - o
    }
    fn mul(&self, o: &f64) -> f64 {
        self * o
    }
    fn div(&self, o: &f64) -> f64 {
        self / o
    }
    fn scale(&self, k: f64) -> f64 {
        self * k
    }
    fn powf(&self, p: f64) -> f64 {
        f64::powf(*self, p)
    }
    fn exp(&self) -> f64 {
        f64::exp(*self)
    }
    fn ln(&self) -> f64 {
        f64::ln(*self)
    }
    fn sin(&self) -> f64 {
        f64::sin(*self)
    }
    fn cos(&self) -> f64 {
        f64::cos(*self)
    }
    fn sqrt(&self) -> f64 {
        f64::sqrt(*self)
    }
}

impl Scalar for Dual {
    fn value(&self) -> f64 {
        self.v[0]
    }
    fn lift(&self, c: f64) -> Dual {
        Dual::constant(self.n, c)
    }
    fn add(&self, o: &Dual) -> Dual {
        Dual::add(self, o)
    }
    fn sub(&self, o: &Dual) -> Dual {
        Dual::sub(self, o)
    }
    fn mul(&self, o: &Dual) -> Dual {
        Dual::mul(self, o)
    }
    fn div(&self, o: &Dual) -> Dual {
        Dual::div(self, o)
    }
    fn scale(&self, k: f64) -> Dual {
        Dual::scale(self, k)
    }
    fn powf(&self, p: f64) -> Dual {
        Dual::powf(self, p)
    }
    fn exp(&self) -> Dual {
        Dual::exp(self)
    }
    fn ln(&self) -> Dual {
        Dual::ln(self)
    }
    fn sin(&self) -> Dual {
        Dual::sin(self)
    }
    fn cos(&self) -> Dual {
        Dual::cos(self)
    }
}

impl Scalar for Jet {
    fn value(&self) -> f64 {
        self.coeffs[0]
    }
    fn lift(&self, c: f64) -> Jet {
        let mut j = Jet::constant(&self.space, c);
        j.valid = self.space.order;
        j
    }
    fn add(&self, o: &Jet) -> Jet {
        Jet::add(self, o)
    }
    fn sub(&self, o: &Jet) -> Jet {
        Jet::sub(self, o)
    }
    fn mul(&self, o: &Jet) -> Jet {
        Jet::mul(self, o)
    }
    fn div(&self, o: &Jet) -> Jet {
        Jet::div(self, o)
    }
    fn scale(&self, k: f64) -> Jet {
        Jet::scale(self, k)
    }
    fn powf(&self, p: f64) -> Jet {
        Jet::powf(self, p)
    }
    fn exp(&self) -> Jet {
        Jet::exp(self)
    }
    fn ln(&self) -> Jet {
        Jet::ln(self)
    }
    fn sin(&self) -> Jet {
        Jet::sin(self)
    }
    fn cos(&self) -> Jet {
        Jet::cos(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monomial_counts_match_binomials() {
        assert_eq!(JetSpace::get(4, 4).len(), 70);
        assert_eq!(JetSpace::get(3, 2).len(), 10);
        assert_eq!(JetSpace::get(8, 2).len(), 45);
    }

    #[test]
    fn polynomial_derivatives_are_exact() {
        // f = x^2 y^3 + 3 x at (2, -1)
        let sp = JetSpace::get(2, 4);
        let xs = Jet::coordinates(&sp, &[2.0, -1.0]);
        let f = xs[0]
            .mul(&xs[0])
            .mul(&xs[1].mul(&xs[1]).mul(&xs[1]))
            .add(&xs[0].scale(3.0));
        assert!((f.value() - (-4.0 + 6.0)).abs() < 1e-14);
        // df/dx = 2 x y^3 + 3 = -1
        assert!((f.derivative(&[1, 0]) + 1.0).abs() < 1e-14);
        // d2f/dy2 = 6 x^2 y = -24
        assert!((f.derivative(&[0, 2]) + 24.0).abs() < 1e-13);
        // d4f/dx dy^3 = 12 x = 24
        assert!((f.derivative(&[1, 3]) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn elementary_functions_match_closed_forms() {
        let sp = JetSpace::get(1, 4);
        let x = Jet::variable(&sp, 0, 0.7);
        let e = x.exp();
        for k in 0..=4u8 {
            assert!((e.derivative(&[k]) - 0.7f64.exp()).abs() < 1e-12);
        }
        let l = x.ln();
        // d^3/dx^3 ln x = 2 / x^3
        assert!((l.derivative(&[3]) - 2.0 / 0.7f64.powi(3)).abs() < 1e-10);
        let p = x.powf(-2.5);
        // d^2/dx^2 x^-2.5 = 8.75 x^-4.5
        assert!((p.derivative(&[2]) - 8.75 * 0.7f64.powf(-4.5)).abs() < 1e-9);
        let s = x.sin();
        assert!((s.derivative(&[3]) + 0.7f64.cos()).abs() < 1e-12);
    }

    #[test]
    fn partial_lowers_valid_order() {
        let sp = JetSpace::get(2, 3);
        let xs = Jet::coordinates(&sp, &[1.0, 2.0]);
        let f = xs[0].mul(&xs[0]).mul(&xs[1]);
        let fx = f.partial(0);
        assert_eq!(fx.valid_order(), 2);
        // d/dy (2 x y) = 2 x
        assert!((fx.derivative(&[0, 1]) - 2.0).abs() < 1e-14);
        assert!((fx.derivative(&[1, 1]) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn dual_matches_jet_gradient() {
        let x = [0.3, -1.2, 0.8];
        let sp = JetSpace::get(3, 1);
        let jx = Jet::coordinates(&sp, &x);
        let dx = Dual::coordinates(&x);
        let jf = jx[0].mul(&jx[1]).add(&jx[2].exp()).powf(2.0);
        let df = dx[0].mul(&dx[1]).add(&dx[2].exp()).powf(2.0);
        for v in 0..3 {
            assert!((jf.d1(v) - df.grad()[v]).abs() < 1e-12);
        }
    }
}
