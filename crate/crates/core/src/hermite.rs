//! Hermite polynomials (physicists' convention, `H_n(x) = (-1)^n e^{x^2}
//! d^n/dx^n e^{-x^2}`, so `H_1 = 2x`), their zeros, and the comparison of
//! scaled zero sets with the arcsine and semicircle laws.
//!
//! Every argument built from `omega / mu` in the Lorenz pipeline assumes
//! this convention; the probabilists' `He_n` would rescale all of them.

use std::f64::consts::{FRAC_1_PI, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ZERO_DEGREE: usize = 500;

/// `H_n(x)` by `H_{k+1} = 2x H_k - 2k H_{k-1}`.
pub fn hermite_eval(n: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

pub fn hermite_eval_complex(n: usize, z: Complex64) -> Complex64 {
    let (mut prev, mut cur) = (Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0));
    for k in 0..n {
        let next = 2.0 * z * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `(p_{n-1}(x), p_n(x))` with `p_k = H_k / sqrt(2^k k!)`; stays finite
/// where `H_n` itself overflows.
fn normalized_pair(n: usize, x: f64) -> (f64, f64) {
    let (mut prev, mut cur) = (0.0, 1.0);
    for k in 0..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * cur - (kf / (kf + 1.0)).sqrt() * prev;
        prev = cur;
        cur = next;
    }
    (prev, cur)
}

/// `H_n(x) / H_n'(x)` without forming either.
fn newton_ratio(n: usize, x: f64) -> f64 {
    let (pm, p) = normalized_pair(n, x);
    p / ((2.0 * n as f64).sqrt() * pm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// Divide by the largest zero; the support becomes exactly `[-1, 1]`.
    #[default]
    ByLargestZero,
    /// Divide by `sqrt(2n)`.
    BySqrt2n,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermiteZeroSet {
    pub n: usize,
    /// Increasing.
    pub zeros: Vec<f64>,
    /// Gauss-Hermite weights `sqrt(pi) v_{0i}^2` in the same order.
    pub weights: Vec<f64>,
}

impl HermiteZeroSet {
    pub fn scaled(&self, scaling: Scaling) -> Vec<f64> {
        let s = match scaling {
            Scaling::ByLargestZero => self.zeros.last().copied().unwrap_or(1.0).abs().max(f64::MIN_POSITIVE),
            Scaling::BySqrt2n => (2.0 * self.n as f64).sqrt(),
        };
        self.zeros.iter().map(|z| z / s).collect()
    }
}

/// Zeros of `H_n` as eigenvalues of the Jacobi matrix (off-diagonal
/// `sqrt(k/2)`), one Newton step, then made exactly antisymmetric.
pub fn hermite_zeros(n: usize) -> Result<HermiteZeroSet> {
    if n == 0 || n > MAX_ZERO_DEGREE {
        return Err(Error::Domain {
            what: "hermite degree",
            value: n as f64,
            domain: "[1, 500]",
        });
    }
    let jacobi = DMatrix::from_fn(n, n, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut zeros: Vec<f64> = pairs
        .iter()
        .map(|&(x, _)| {
            let step = newton_ratio(n, x);
            if step.is_finite() {
                x - step
            } else {
                x
            }
        })
        .collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let z = 0.5 * (zeros[j] - zeros[i]);
        zeros[i] = -z;
        zeros[j] = z;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        zeros[n / 2] = 0.0;
    }
    Ok(HermiteZeroSet { n, zeros, weights })
}

/// `(2/pi) asin(sqrt(x))` on `[0, 1]`.
pub fn beta_half_cdf(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain {
            what: "beta(1/2,1/2) argument",
            value: x,
            domain: "[0, 1]",
        });
    }
    Ok(2.0 * FRAC_1_PI * x.sqrt().asin())
}

/// Arcsine law on `[-1, 1]`: `1/2 + asin(x)/pi`, the image of
/// beta(1/2,1/2) under `x -> 2x - 1`.
pub fn arcsine_cdf(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    0.5 + x.asin() * FRAC_1_PI
}

/// Semicircle law on `[-1, 1]`: `1/2 + (x sqrt(1-x^2) + asin x)/pi`.
pub fn semicircle_cdf(x: f64) -> f64 {
    let x = x.clamp(-1.0, 1.0);
    0.5 + (x * (1.0 - x * x).sqrt() + x.asin()) * FRAC_1_PI
}

/// Exact one-sample Kolmogorov-Smirnov distance of `sample` to `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    if sample.is_empty() {
        return 1.0;
    }
    let mut s = sample.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
        .clamp(0.0, 1.0)
}

/// Exact two-sample Kolmogorov-Smirnov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 1.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Law {
    Arcsine,
    Semicircle,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LawComparison {
    pub n: usize,
    pub scaling: Scaling,
    pub ks_arcsine: f64,
    pub ks_semicircle: f64,
    pub better_fit: Law,
}

pub fn law_comparison(zs: &HermiteZeroSet, scaling: Scaling) -> Result<LawComparison> {
    if zs.n < 10 {
        return Err(Error::Domain {
            what: "degree for law comparison",
            value: zs.n as f64,
            domain: "[10, 500]",
        });
    }
    let x = zs.scaled(scaling);
    let ks_arcsine = ks_statistic(&x, arcsine_cdf);
    let ks_semicircle = ks_statistic(&x, semicircle_cdf);
    Ok(LawComparison {
        n: zs.n,
        scaling,
        ks_arcsine,
        ks_semicircle,
        better_fit: if ks_semicircle <= ks_arcsine {
            Law::Semicircle
        } else {
            Law::Arcsine
        },
    })
}
