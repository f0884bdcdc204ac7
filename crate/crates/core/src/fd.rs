//! Finite-difference jets for sampled fields.

use crate::error::{Error, Result};
use crate::jet::{Jet, JetSpace};

const OFFSETS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
const FIRST: [f64; 4] = [1.0 / 12.0, -8.0 / 12.0, 8.0 / 12.0, -1.0 / 12.0];
const SECOND: [f64; 4] = [-1.0 / 12.0, 16.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];

/// Jets (valid order `<= 2`) of every component of `f` at `x` from
/// fourth-order central differences with step `h`.
pub(crate) fn fd_jets<F>(f: F, x: &[f64], order: usize, h: f64, what: &'static str) -> Result<Vec<Jet>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    if order > 2 {
        return Err(Error::DerivativeUnavailable { order, what });
    }
    let n = x.len();
    let sp = JetSpace::get(n, order);
    let center = f(x)?;
    let m = center.len();
    let mut coeffs = vec![vec![0.0; sp.len()]; m];
    for (c, v) in coeffs.iter_mut().zip(&center) {
        c[0] = *v;
    }
    if order == 0 {
        return Ok(coeffs
            .into_iter()
            .map(|c| Jet::from_coefficients(&sp, c, 0))
            .collect());
    }
    let shifted = |moves: &[(usize, f64)]| {
        let mut y = x.to_vec();
        for &(i, d) in moves {
            y[i] += d * h;
        }
        f(&y)
    };
    let mut alpha = [0u8; 8];
    for i in 0..n {
        let samples: Vec<Vec<f64>> = OFFSETS
            .iter()
            .map(|&o| shifted(&[(i, o)]))
            .collect::<Result<_>>()?;
        alpha[i] = 1;
        let idx1 = sp.index_of(&alpha[..n]).expect("first-order monomial");
        alpha[i] = 0;
        for c in 0..m {
            let d1: f64 = FIRST.iter().zip(&samples).map(|(w, s)| w * s[c]).sum::<f64>() / h;
            coeffs[c][idx1] = d1;
        }
        if order == 2 {
            alpha[i] = 2;
            let idx2 = sp.index_of(&alpha[..n]).expect("second-order monomial");
            alpha[i] = 0;
            for c in 0..m {
                let d2 = (SECOND.iter().zip(&samples).map(|(w, s)| w * s[c]).sum::<f64>()
                    - 2.5 * center[c])
                    / (h * h);
                // Taylor coefficient of x_i^2 is f_ii / 2.
                coeffs[c][idx2] = d2 / 2.0;
            }
            for j in i + 1..n {
                let mut acc = vec![0.0; m];
                for (a, wa) in OFFSETS.iter().zip(FIRST) {
                    for (b, wb) in OFFSETS.iter().zip(FIRST) {
                        let s = shifted(&[(i, *a), (j, *b)])?;
                        for c in 0..m {
                            acc[c] += wa * wb * s[c];
                        }
                    }
                }
                alpha[i] = 1;
                alpha[j] = 1;
                let idx = sp.index_of(&alpha[..n]).expect("mixed monomial");
                alpha[i] = 0;
                alpha[j] = 0;
                for c in 0..m {
                    coeffs[c][idx] = acc[c] / (h * h);
                }
            }
        }
    }
    Ok(coeffs
        .into_iter()
        .map(|c| Jet::from_coefficients(&sp, c, order))
        .collect())
}
