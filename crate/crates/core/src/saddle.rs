//! Saddle-point analysis of `gamma(a) = P(a) - n . log a`, where `P` is
//! `y . f` for the differential iteration `f` or for an asymptotic
//! iteration `G`.
//!
//! Critical points solve `a_l dgamma/da_l = a_l dP/da_l - n_l = 0`, which
//! has no poles and needs no branch of the logarithm.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::difiter::DifferentialIteration;
use crate::error::{check_dim, Error, Result};
use crate::polymap::{PartialLinearDecomposition, Poly, PolyMap};
use crate::region::keyed_rng;

/// Default cap on `|n|` for the series engine.
pub const SERIES_DEGREE_CAP: u32 = 36;
pub const CRITICAL_STARTS: usize = 64;
pub const CRITICAL_TOLERANCE: f64 = 1e-12;
pub const CRITICAL_MAX_ITERATIONS: usize = 200;
/// Relative rank threshold for Hessian degeneracy.
pub const DEGENERACY_THRESHOLD: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Polynomial with complex coefficients, stored as `re + i im`.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexPoly {
    pub re: Poly,
    pub im: Poly,
}

impl ComplexPoly {
    pub fn real(p: Poly) -> Self {
        let im = Poly::zero(p.dim());
        Self { re: p, im }
    }

    /// `y . map` for complex `y`.
    pub fn dot(map: &PolyMap, y: &[Complex64]) -> Result<Self> {
        let re: Vec<f64> = y.iter().map(|z| z.re).collect();
        let im: Vec<f64> = y.iter().map(|z| z.im).collect();
        Ok(Self {
            re: map.dot(&re)?,
            im: map.dot(&im)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.re.dim()
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        self.re.eval_complex(z) + Complex64::i() * self.im.eval_complex(z)
    }

    pub fn derivative(&self, i: usize) -> Self {
        Self {
            re: self.re.derivative(i),
            im: self.im.derivative(i),
        }
    }

    /// `(coefficient, powers)` over the union of both supports.
    pub fn terms(&self) -> Vec<(Complex64, Vec<u32>)> {
        let mut out: Vec<(Complex64, Vec<u32>)> = self
            .re
            .terms()
            .iter()
            .map(|m| (Complex64::new(m.coef, 0.0), m.powers.clone()))
            .collect();
        for m in self.im.terms() {
            match out.iter_mut().find(|(_, p)| *p == m.powers) {
                Some((c, _)) => c.im += m.coef,
                None => out.push((Complex64::new(0.0, m.coef), m.powers.clone())),
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct PlancherelRotach {
    /// `P(a) = y . f(a)`.
    pub exponent: ComplexPoly,
    pub y: Vec<Complex64>,
    pub n: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalPoint {
    pub location: Vec<Complex64>,
    /// `max_l |a_l dgamma/da_l|`, re-evaluated after Newton.
    pub gradient_residual: f64,
    /// Hessian of `gamma`: `d2P + diag(n / a^2)`.
    pub hessian: Vec<Vec<Complex64>>,
    pub hessian_eigenvalues: Vec<Complex64>,
    pub degenerate: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CriticalDiagnostics {
    pub starts: usize,
    pub converged: usize,
    pub singular: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalSearch {
    pub points: Vec<CriticalPoint>,
    pub diagnostics: CriticalDiagnostics,
}

impl PlancherelRotach {
    pub fn new(exponent: ComplexPoly, y: Vec<Complex64>, n: Vec<u32>) -> Result<Self> {
        let d = exponent.dim();
        check_dim(d, y.len())?;
        check_dim(d, n.len())?;
        Ok(Self { exponent, y, n })
    }

    /// `P = y . (a + delta F(a))`.
    pub fn from_iteration(it: &DifferentialIteration, y: Vec<Complex64>, n: Vec<u32>) -> Result<Self> {
        check_dim(it.dim(), y.len())?;
        Self::new(ComplexPoly::dot(&it.as_polymap(), &y)?, y, n)
    }

    /// `P = y . map` for an arbitrary map, e.g. an asymptotic iteration.
    pub fn from_map(map: &PolyMap, y: Vec<Complex64>, n: Vec<u32>) -> Result<Self> {
        check_dim(map.dim_out(), y.len())?;
        Self::new(ComplexPoly::dot(map, &y)?, y, n)
    }

    pub fn real_y(exponent_map: &PolyMap, y: &[f64], n: Vec<u32>) -> Result<Self> {
        Self::from_map(exponent_map, y.iter().map(|&v| Complex64::new(v, 0.0)).collect(), n)
    }

    pub fn dim(&self) -> usize {
        self.y.len()
    }

    /// `a_l dgamma/da_l` for every `l`.
    pub fn critical_equations(&self, a: &[Complex64]) -> Vec<Complex64> {
        (0..self.dim())
            .map(|l| a[l] * self.exponent.derivative(l).eval(a) - self.n[l] as f64)
            .collect()
    }

    /// `gamma(a)` on the principal branch.
    pub fn gamma(&self, a: &[Complex64]) -> Complex64 {
        self.exponent.eval(a)
            - a.iter()
                .zip(&self.n)
                .map(|(z, &k)| k as f64 * z.ln())
                .sum::<Complex64>()
    }

    pub fn hessian(&self, a: &[Complex64]) -> DMatrix<Complex64> {
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| {
            let mut h = self.exponent.derivative(i).derivative(j).eval(a);
            if i == j {
                h += self.n[i] as f64 / (a[i] * a[i]);
            }
            h
        })
    }

    /// Complex Newton on the critical equations from [`CRITICAL_STARTS`]
    /// keyed random starts in the polydisk of radius `2 max(n_l / |y_l|)`.
    pub fn critical_points(&self, starts: usize, seed: u64) -> Result<CriticalSearch> {
        if self.n.contains(&0) {
            return Err(Error::InvalidInput("every n_l must be at least 1".into()));
        }
        let d = self.dim();
        let radius = 2.0
            * self
                .n
                .iter()
                .zip(&self.y)
                .filter(|(_, y)| y.norm() > 0.0)
                .map(|(&k, y)| k as f64 / y.norm())
                .fold(1.0_f64, f64::max);
        let grad: Vec<ComplexPoly> = (0..d).map(|l| self.exponent.derivative(l)).collect();
        let hess: Vec<Vec<ComplexPoly>> = grad
            .iter()
            .map(|g| (0..d).map(|k| g.derivative(k)).collect())
            .collect();

        let outcomes: Vec<std::result::Result<Vec<Complex64>, bool>> = (0..starts)
            .into_par_iter()
            .map(|s| {
                let mut rng = keyed_rng(seed, s as u64);
                let start: Vec<Complex64> = (0..d)
                    .map(|_| {
                        let r = radius * rng.random::<f64>().sqrt();
                        let th = std::f64::consts::TAU * rng.random::<f64>();
                        Complex64::from_polar(r, th)
                    })
                    .collect();
                self.newton(&grad, &hess, start)
            })
            .collect();

        let mut diag = CriticalDiagnostics {
            starts,
            ..Default::default()
        };
        let mut found: Vec<Vec<Complex64>> = Vec::new();
        for o in outcomes {
            match o {
                Ok(a) => {
                    diag.converged += 1;
                    let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
                    let dup = found.iter().any(|b| {
                        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
                            < 1e-8 * scale
                    });
                    if !dup {
                        found.push(a);
                    }
                }
                Err(true) => diag.singular += 1,
                Err(false) => diag.failed += 1,
            }
        }
        found.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let points = found
            .into_iter()
            .map(|a| {
                let residual = self
                    .critical_equations(&a)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                let h = self.hessian(&a);
                let ev = complex_eigenvalues(&h);
                let degenerate = is_degenerate(&ev);
                CriticalPoint {
                    hessian: (0..d).map(|i| h.row(i).iter().copied().collect()).collect(),
                    location: a,
                    gradient_residual: residual,
                    hessian_eigenvalues: ev,
                    degenerate,
                }
            })
            .collect();
        Ok(CriticalSearch {
            points,
            diagnostics: diag,
        })
    }

    /// `Err(true)` on a singular Jacobian, `Err(false)` on divergence.
    fn newton(
        &self,
        grad: &[ComplexPoly],
        hess: &[Vec<ComplexPoly>],
        mut a: Vec<Complex64>,
    ) -> std::result::Result<Vec<Complex64>, bool> {
        let d = a.len();
        let eqs = |a: &[Complex64]| -> Vec<Complex64> {
            (0..d).map(|l| a[l] * grad[l].eval(a) - self.n[l] as f64).collect()
        };
        let norm = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let mut g = eqs(&a);
        let mut r = norm(&g);
        for _ in 0..CRITICAL_MAX_ITERATIONS {
            let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
            if r < CRITICAL_TOLERANCE * scale {
                return Ok(a);
            }
            let jac = DMatrix::from_fn(d, d, |l, k| {
                let mut v = a[l] * hess[l][k].eval(&a);
                if l == k {
                    v += grad[l].eval(&a);
                }
                v
            });
            let step = jac
                .lu()
                .solve(&DVector::from_column_slice(&g))
                .filter(|s| s.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
                .ok_or(true)?;
            let mut t = 1.0;
            loop {
                let trial: Vec<Complex64> = a.iter().zip(step.iter()).map(|(x, s)| x - s * t).collect();
                let gt = eqs(&trial);
                let rt = norm(&gt);
                if rt < r || t < 1e-6 {
                    if !rt.is_finite() {
                        return Err(false);
                    }
                    a = trial;
                    g = gt;
                    r = rt;
                    break;
                }
                t *= 0.5;
            }
        }
        let scale = a.iter().map(|z| z.norm()).fold(1.0, f64::max);
        if r < 10.0 * CRITICAL_TOLERANCE * scale {
            Ok(a)
        } else {
            Err(false)
        }
    }
}

fn is_degenerate(ev: &[Complex64]) -> bool {
    let max = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let min = ev.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    max == 0.0 || min < DEGENERACY_THRESHOLD * max
}

/// Eigenvalues of a complex matrix via the complex Schur form, sorted.
pub fn complex_eigenvalues(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = match nalgebra::Schur::try_new(m.clone(), 1e-15, 10_000) {
        Some(s) => {
            let (_, t) = s.unpack();
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        }
        None => vec![Complex64::new(f64::NAN, f64::NAN); m.nrows()],
    };
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YfHessian {
    pub matrix: Vec<Vec<f64>>,
    /// Increasing.
    pub eigenvalues: Vec<f64>,
    /// Orthonormal; `eigenvectors[k]` belongs to `eigenvalues[k]`.
    pub eigenvectors: Vec<Vec<f64>>,
    /// Numeric rank test at relative [`DEGENERACY_THRESHOLD`].
    pub degenerate: bool,
    /// For a Hessian constant in `a` (field of degree <= 2): the exact
    /// determinant of the symbolic coefficients vanishes.
    pub structurally_degenerate: Option<bool>,
}

/// `d2(y . F)/da2` at `at`.
pub fn hessian_yf(field: &PolyMap, y: &[f64], at: &[f64]) -> Result<YfHessian> {
    check_dim(field.dim_out(), y.len())?;
    check_dim(field.dim_in(), at.len())?;
    let p = field.dot(y)?;
    let sym = p.hessian();
    let d = field.dim_in();
    let h = DMatrix::from_fn(d, d, |i, j| {
        let v = 0.5 * (sym[i][j].eval(at) + sym[j][i].eval(at));
        if v == 0.0 {
            0.0
        } else {
            v
        }
    });
    let eig = SymmetricEigen::new(h.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = order
        .iter()
        .map(|&k| eig.eigenvectors.column(k).iter().copied().collect())
        .collect();
    let max = eigenvalues.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let min = eigenvalues.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    let structurally_degenerate = (field.degree() <= 2 && d <= 4).then(|| {
        let rows: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| h[(i, j)]).collect()).collect();
        exact_det(&rows) == 0.0
    });
    Ok(YfHessian {
        matrix: (0..d).map(|i| h.row(i).iter().copied().collect()).collect(),
        eigenvalues,
        eigenvectors,
        degenerate: max == 0.0 || min < DEGENERACY_THRESHOLD * max,
        structurally_degenerate,
    })
}

/// Cofactor determinant; exact when the entries and partial products are
/// representable, as for small integer coefficients.
fn exact_det(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    if n == 1 {
        return m[0][0];
    }
    (0..n)
        .map(|c| {
            if m[0][c] == 0.0 {
                return 0.0;
            }
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|r| r.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| *v).collect())
                .collect();
            let s = if c % 2 == 0 { 1.0 } else { -1.0 };
            s * m[0][c] * exact_det(&minor)
        })
        .sum()
}

/// The asymptotic iteration of a partially linear field.
///
/// With `alpha = None` this is `G(a, b) = (a + tau Ahat(a) b, b)`; with a
/// zero `alpha` it is `G_alpha(u, v) = (u + tau Ahat(u + alpha) v, v)` in
/// the translated coordinates. `Ahat = A + L_ab` and the linear variables
/// are in the rescaled units `b |t| / n`. Coordinates keep the field's order.
pub fn asymptotic_iteration(
    dec: &PartialLinearDecomposition,
    tau: f64,
    alpha: Option<&[f64]>,
) -> Result<PolyMap> {
    let d = dec.dim;
    let ahat = dec.moving_cross_coefficients();
    let shift: Vec<Poly> = match alpha {
        Some(a) => {
            check_dim(d, a.len())?;
            (0..d)
                .map(|i| &Poly::var(d, i) + &Poly::constant(d, a[i]))
                .collect()
        }
        None => (0..d).map(|i| Poly::var(d, i)).collect(),
    };
    let mut comps: Vec<Poly> = (0..d).map(|i| Poly::var(d, i)).collect();
    for (r, &i) in dec.moving.iter().enumerate() {
        let mut c = Poly::var(d, i);
        for (k, &j) in dec.linear.iter().enumerate() {
            let coef = ahat[r][k].compose(&shift)?;
            c = &c + &(&coef * &Poly::var(d, j)).scale(tau);
        }
        comps[i] = c;
    }
    PolyMap::new(d, comps)
}

/// `G_alpha` carried back to the original coordinates, `x -> alpha +
/// G_alpha(x - alpha)`; equals `G - (tau Ahat(a) beta, 0)`.
pub fn conjugate_to_origin(g_alpha: &PolyMap, alpha: &[f64]) -> Result<PolyMap> {
    let neg: Vec<f64> = alpha.iter().map(|v| -v).collect();
    g_alpha.translate(&neg)
}

/// `x . tau Ahat(a) beta` as a polynomial in the original coordinates,
/// where `beta` is the linear-block part of `alpha` and `x` the moving
/// part of `y`. Its sign decides which of the two critical points wins.
pub fn dominance_term(
    dec: &PartialLinearDecomposition,
    tau: f64,
    alpha: &[f64],
    y: &[f64],
) -> Result<Poly> {
    check_dim(dec.dim, alpha.len())?;
    check_dim(dec.dim, y.len())?;
    let ahat = dec.moving_cross_coefficients();
    let mut p = Poly::zero(dec.dim);
    for (r, &i) in dec.moving.iter().enumerate() {
        for (k, &j) in dec.linear.iter().enumerate() {
            p = &p + &ahat[r][k].scale(tau * y[i] * alpha[j]);
        }
    }
    Ok(p)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceSample {
    pub values: Vec<f64>,
    pub positive: usize,
    pub negative: usize,
    /// Points within `tolerance` of the communication surface.
    pub on_surface: Vec<usize>,
}

pub fn dominance(term: &Poly, points: &[Vec<f64>], tolerance: f64) -> DominanceSample {
    let values: Vec<f64> = points.iter().map(|p| term.eval(p)).collect();
    DominanceSample {
        positive: values.iter().filter(|v| **v > tolerance).count(),
        negative: values.iter().filter(|v| **v < -tolerance).count(),
        on_surface: values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= tolerance)
            .map(|(i, _)| i)
            .collect(),
        values,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesDerivative {
    pub multi_index: Vec<u32>,
    pub value: Complex64,
}

/// `d^n exp(P(a)) / da^n` at `a = 0`.
///
/// Coefficients of `exp(P)` on the box `m <= n` follow from the Euler
/// identity `|m| e_m = sum_{0 < j <= m} |j| p_j e_{m-j}`, `e_0 = exp(p_0)`;
/// the box is closed under the recurrence, so the truncation is exact.
pub fn series_exp_derivative(p: &ComplexPoly, n: &[u32]) -> Result<SeriesDerivative> {
    series_exp_derivative_capped(p, n, SERIES_DEGREE_CAP)
}

pub fn series_exp_derivative_capped(p: &ComplexPoly, n: &[u32], cap: u32) -> Result<SeriesDerivative> {
    check_dim(p.dim(), n.len())?;
    let total: u32 = n.iter().sum();
    if total > cap {
        return Err(Error::ResourceLimit(format!("series degree {total} exceeds cap {cap}")));
    }
    let d = n.len();
    let extent: Vec<usize> = n.iter().map(|&k| k as usize + 1).collect();
    let size: usize = extent.iter().product();
    let index = |m: &[u32]| -> usize {
        m.iter()
            .zip(&extent)
            .rev()
            .fold(0, |acc, (&k, &e)| acc * e + k as usize)
    };
    let mut p0 = ZERO;
    let terms: Vec<(Complex64, Vec<u32>, f64)> = p
        .terms()
        .into_iter()
        .filter_map(|(c, pw)| {
            let deg: u32 = pw.iter().sum();
            if deg == 0 {
                p0 += c;
                None
            } else if pw.iter().zip(n).all(|(a, b)| a <= b) {
                Some((c, pw, deg as f64))
            } else {
                None
            }
        })
        .collect();
    let mut e = vec![ZERO; size];
    e[0] = p0.exp();
    // mixed-radix walk over the box; lower multi-indices come first
    let mut m = vec![0u32; d];
    for flat in 1..size {
        let mut carry = flat;
        for (l, &ext) in extent.iter().enumerate() {
            m[l] = (carry % ext) as u32;
            carry /= ext;
        }
        let deg: u32 = m.iter().sum();
        let mut acc = ZERO;
        for (c, pw, jd) in &terms {
            if pw.iter().zip(&m).all(|(a, b)| a <= b) {
                let rest: Vec<u32> = m.iter().zip(pw).map(|(a, b)| a - b).collect();
                acc += c * *jd * e[index(&rest)];
            }
        }
        e[flat] = acc / deg as f64;
    }
    let fact: f64 = n
        .iter()
        .map(|&k| (1..=k).map(|i| i as f64).product::<f64>())
        .product();
    let value = e[size - 1] * fact;
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::Overflow {
            step: 0,
            point: n.iter().map(|&k| k as f64).collect(),
        });
    }
    Ok(SeriesDerivative {
        multi_index: n.to_vec(),
        value,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolventGap {
    /// `y^n = prod y_l^{n_l}`.
    pub pure: Complex64,
    /// `d^n exp(P) / da^n` at 0.
    pub derivative: Complex64,
    /// `pure - derivative`.
    pub gap: Complex64,
    /// `gap / pure`.
    pub relative: Complex64,
}

pub fn resolvent_gap(pr: &PlancherelRotach) -> Result<ResolventGap> {
    let derivative = series_exp_derivative(&pr.exponent, &pr.n)?.value;
    let pure: Complex64 = pr
        .y
        .iter()
        .zip(&pr.n)
        .map(|(y, &k)| y.powu(k))
        .product();
    let gap = pure - derivative;
    Ok(ResolventGap {
        pure,
        derivative,
        gap,
        relative: gap / pure,
    })
}
