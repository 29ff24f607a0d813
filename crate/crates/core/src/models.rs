//! Built-in vector fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymap::{Poly, PolyMap};

fn poly<const D: usize>(terms: &[(f64, [u32; D])]) -> Poly {
    Poly::from_terms(D, terms.iter().map(|(c, p)| (*c, p.to_vec()))).expect("well-formed terms")
}

/// `da/dt = alpha (a - a^2)`.
pub fn logistic(alpha: f64) -> PolyMap {
    PolyMap::new(1, vec![poly(&[(alpha, [1]), (-alpha, [2])])]).expect("dimension 1")
}

/// `4a(1 - a)` written as a field: with `delta = 1` the differential
/// iteration is the full logistic map.
pub fn full_logistic_field() -> PolyMap {
    PolyMap::new(1, vec![poly(&[(3.0, [1]), (-4.0, [2])])]).expect("dimension 1")
}

/// The full logistic map `a -> 4a(1 - a)` itself.
pub fn full_logistic_map() -> PolyMap {
    PolyMap::new(1, vec![poly(&[(4.0, [1]), (-4.0, [2])])]).expect("dimension 1")
}

/// Harmonic oscillator on `(p, q)`: `dp/dt = -q`, `dq/dt = p`.
pub fn harmonic() -> PolyMap {
    PolyMap::new(2, vec![poly(&[(-1.0, [0, 1])]), poly(&[(1.0, [1, 0])])]).expect("dimension 2")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl LorenzParams {
    pub fn new(sigma: f64, rho: f64, beta: f64) -> Result<Self> {
        for (what, v) in [("sigma", sigma), ("rho", rho), ("beta", beta)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    what,
                    value: v,
                    domain: "(0, inf)",
                });
            }
        }
        Ok(Self { sigma, rho, beta })
    }

    /// `(10, 28, 8/3)`.
    pub fn classic() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }

    /// `sqrt(beta (rho - 1))`, defined when `rho > 1`.
    pub fn alpha(&self) -> Option<f64> {
        (self.rho > 1.0).then(|| (self.beta * (self.rho - 1.0)).sqrt())
    }

    /// `(alpha, alpha, alpha^2 / beta)`; NaN coordinates when `rho <= 1`.
    pub fn wing_plus(&self) -> [f64; 3] {
        let a = self.alpha().unwrap_or(f64::NAN);
        [a, a, self.rho - 1.0]
    }

    pub fn wing_minus(&self) -> [f64; 3] {
        let a = self.alpha().unwrap_or(f64::NAN);
        [-a, -a, self.rho - 1.0]
    }
}

/// `(sigma (b - a), rho a - b - a c, -beta c + a b)`.
pub fn lorenz(p: &LorenzParams) -> PolyMap {
    PolyMap::new(
        3,
        vec![
            poly(&[(-p.sigma, [1, 0, 0]), (p.sigma, [0, 1, 0])]),
            poly(&[(p.rho, [1, 0, 0]), (-1.0, [0, 1, 0]), (-1.0, [1, 0, 1])]),
            poly(&[(-p.beta, [0, 0, 1]), (1.0, [1, 1, 0])]),
        ],
    )
    .expect("dimension 3")
}
