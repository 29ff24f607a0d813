//! Exact multivariate polynomials and polynomial vector fields.
//!
//! A [`Poly`] is kept in canonical form: terms sorted in graded
//! lexicographic order, no repeated exponent vectors and no zero
//! coefficients. Every arithmetic operation re-canonicalizes, so two
//! polynomials are equal exactly when their term lists are equal.
//! Evaluation walks the terms in canonical order, which makes results
//! reproducible bit for bit.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

mod partial;

pub use partial::{PartialLinearDecomposition, PartialLinearSplit};

/// `coef * x_1^powers[0] * ... * x_d^powers[d-1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.powers.iter().sum()
    }
}

/// Exponent vector ordered by total degree, then lexicographically with
/// the first variable most significant.
#[derive(Clone, Debug, PartialEq, Eq)]
struct GrLex(Vec<u32>);

impl Ord for GrLex {
    fn cmp(&self, other: &Self) -> Ordering {
        let da: u32 = self.0.iter().sum();
        let db: u32 = other.0.iter().sum();
        da.cmp(&db).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for GrLex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A real polynomial in `dim` variables.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Poly {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::from_terms(dim, [(c, vec![0; dim])]).expect("constant term is well formed")
    }

    /// The coordinate function `x_i`.
    pub fn var(dim: usize, i: usize) -> Self {
        let mut powers = vec![0; dim];
        powers[i] = 1;
        Self {
            dim,
            terms: vec![Monomial { coef: 1.0, powers }],
        }
    }

    /// Builds a canonical polynomial from raw `(coef, powers)` pairs,
    /// merging repeated exponents and dropping zero coefficients.
    pub fn from_terms<I>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, Vec<u32>)>,
    {
        let mut acc: BTreeMap<GrLex, f64> = BTreeMap::new();
        for (coef, powers) in terms {
            check_dim(dim, powers.len())?;
            if !coef.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite coefficient {coef} for monomial {powers:?}"
                )));
            }
            *acc.entry(GrLex(powers)).or_insert(0.0) += coef;
        }
        Ok(Self::from_map(dim, acc))
    }

    pub fn from_monomials(dim: usize, monomials: &[Monomial]) -> Result<Self> {
        Self::from_terms(dim, monomials.iter().map(|m| (m.coef, m.powers.clone())))
    }

    fn from_map(dim: usize, acc: BTreeMap<GrLex, f64>) -> Self {
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(k, coef)| Monomial { coef, powers: k.0 })
            .collect();
        Self { dim, terms }
    }

    fn accumulate(dim: usize, it: impl Iterator<Item = (f64, Vec<u32>)>) -> Self {
        let mut acc: BTreeMap<GrLex, f64> = BTreeMap::new();
        for (coef, powers) in it {
            *acc.entry(GrLex(powers)).or_insert(0.0) += coef;
        }
        Self::from_map(dim, acc)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).max().unwrap_or(0)
    }

    /// Smallest total degree among the terms (0 for the zero polynomial).
    pub fn min_degree(&self) -> u32 {
        self.terms.iter().map(Monomial::degree).min().unwrap_or(0)
    }

    /// Largest combined degree in the listed variables.
    pub fn degree_in(&self, vars: &[usize]) -> u32 {
        self.terms
            .iter()
            .map(|m| vars.iter().map(|&v| m.powers[v]).sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    pub fn coefficient(&self, powers: &[u32]) -> f64 {
        self.terms
            .iter()
            .find(|m| m.powers == powers)
            .map_or(0.0, |m| m.coef)
    }

    pub fn constant_term(&self) -> f64 {
        self.coefficient(&vec![0; self.dim])
    }

    /// Terms of exactly the given total degree.
    pub fn homogeneous_part(&self, degree: u32) -> Poly {
        Poly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|m| m.degree() == degree)
                .cloned()
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Poly {
        if c == 0.0 {
            return Poly::zero(self.dim);
        }
        Poly::accumulate(
            self.dim,
            self.terms.iter().map(|m| (m.coef * c, m.powers.clone())),
        )
    }

    pub fn pow(&self, k: u32) -> Poly {
        let mut out = Poly::constant(self.dim, 1.0);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Partial derivative with respect to `x_i`.
    pub fn derivative(&self, i: usize) -> Poly {
        Poly::accumulate(
            self.dim,
            self.terms.iter().filter(|m| m.powers[i] > 0).map(|m| {
                let mut p = m.powers.clone();
                let e = p[i];
                p[i] -= 1;
                (m.coef * e as f64, p)
            }),
        )
    }

    pub fn gradient(&self) -> Vec<Poly> {
        (0..self.dim).map(|i| self.derivative(i)).collect()
    }

    pub fn hessian(&self) -> Vec<Vec<Poly>> {
        let grad = self.gradient();
        grad.iter()
            .map(|g| (0..self.dim).map(|j| g.derivative(j)).collect())
            .collect()
    }

    /// Evaluates at a real point.
    ///
    /// # Panics
    /// If `x.len() != self.dim()`; use [`PolyMap::evaluate`] for a checked entry point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension");
        let mut sum = 0.0;
        for m in &self.terms {
            let mut v = m.coef;
            for (xi, &p) in x.iter().zip(&m.powers) {
                if p > 0 {
                    v *= xi.powi(p as i32);
                }
            }
            sum += v;
        }
        sum
    }

    pub fn eval_complex(&self, z: &[Complex64]) -> Complex64 {
        assert_eq!(z.len(), self.dim, "point dimension");
        let mut sum = Complex64::new(0.0, 0.0);
        for m in &self.terms {
            let mut v = Complex64::new(m.coef, 0.0);
            for (zi, &p) in z.iter().zip(&m.powers) {
                if p > 0 {
                    v *= zi.powi(p as i32);
                }
            }
            sum += v;
        }
        sum
    }

    /// Substitutes `x_i := subs[i]`; the result lives in the dimension of the substitutes.
    pub fn compose(&self, subs: &[Poly]) -> Result<Poly> {
        check_dim(self.dim, subs.len())?;
        let new_dim = subs.first().map_or(0, Poly::dim);
        if subs.iter().any(|s| s.dim != new_dim) {
            return Err(Error::InvalidInput(
                "substituted polynomials must share one dimension".into(),
            ));
        }
        // Cache powers of each substitute; exponents are small.
        let mut cache: Vec<Vec<Poly>> = subs
            .iter()
            .map(|s| vec![Poly::constant(new_dim, 1.0), s.clone()])
            .collect();
        let mut out = Poly::zero(new_dim);
        for m in &self.terms {
            let mut term = Poly::constant(new_dim, m.coef);
            for (i, &p) in m.powers.iter().enumerate() {
                if p == 0 {
                    continue;
                }
                while cache[i].len() <= p as usize {
                    let next = &cache[i][cache[i].len() - 1] * &subs[i];
                    cache[i].push(next);
                }
                term = &term * &cache[i][p as usize];
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Embeds into a larger variable set: variable `i` becomes `x_{positions[i]}`.
    pub fn embed(&self, new_dim: usize, positions: &[usize]) -> Poly {
        Poly::accumulate(
            new_dim,
            self.terms.iter().map(|m| {
                let mut p = vec![0; new_dim];
                for (i, &e) in m.powers.iter().enumerate() {
                    p[positions[i]] += e;
                }
                (m.coef, p)
            }),
        )
    }

    /// Largest absolute coefficient difference against `other`.
    pub fn max_coef_distance(&self, other: &Poly) -> f64 {
        (self - other)
            .terms
            .iter()
            .map(|m| m.coef.abs())
            .fold(0.0, f64::max)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        Poly::accumulate(
            self.dim,
            self.terms
                .iter()
                .chain(&rhs.terms)
                .map(|m| (m.coef, m.powers.clone())),
        )
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        Poly::accumulate(
            self.dim,
            self.terms
                .iter()
                .map(|m| (m.coef, m.powers.clone()))
                .chain(rhs.terms.iter().map(|m| (-m.coef, m.powers.clone()))),
        )
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        Poly {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .map(|m| Monomial {
                    coef: -m.coef,
                    powers: m.powers.clone(),
                })
                .collect(),
        }
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        let mut acc: BTreeMap<GrLex, f64> = BTreeMap::new();
        for a in &self.terms {
            for b in &rhs.terms {
                let p: Vec<u32> = a.powers.iter().zip(&b.powers).map(|(x, y)| x + y).collect();
                *acc.entry(GrLex(p)).or_insert(0.0) += a.coef * b.coef;
            }
        }
        Poly::from_map(self.dim, acc)
    }
}

/// A polynomial map `R^dim_in -> R^dim_out`.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMap {
    dim_in: usize,
    components: Vec<Poly>,
}

impl PolyMap {
    pub fn new(dim_in: usize, components: Vec<Poly>) -> Result<Self> {
        if dim_in == 0 {
            return Err(Error::InvalidInput("dimension must be at least 1".into()));
        }
        for c in &components {
            check_dim(dim_in, c.dim())?;
        }
        Ok(Self { dim_in, components })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim_in: dim,
            components: (0..dim).map(|i| Poly::var(dim, i)).collect(),
        }
    }

    pub fn zero(dim_in: usize, dim_out: usize) -> Self {
        Self {
            dim_in,
            components: vec![Poly::zero(dim_in); dim_out],
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.components.len()
    }

    pub fn is_square(&self) -> bool {
        self.dim_in == self.components.len()
    }

    pub fn components(&self) -> &[Poly] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Poly {
        &self.components[i]
    }

    pub fn degree(&self) -> u32 {
        self.components.iter().map(Poly::degree).max().unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Poly::is_zero)
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim_in, point.len())?;
        Ok(self.components.iter().map(|c| c.eval(point)).collect())
    }

    /// Allocation-free evaluation for hot loops; dimensions are the caller's contract.
    pub fn evaluate_into(&self, point: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(point);
        }
    }

    pub fn evaluate_complex(&self, point: &[Complex64]) -> Result<Vec<Complex64>> {
        check_dim(self.dim_in, point.len())?;
        Ok(self
            .components
            .iter()
            .map(|c| c.eval_complex(point))
            .collect())
    }

    /// Symbolic Jacobian: entry `(i, j)` is `dF_i/dx_j`.
    pub fn jacobian(&self) -> Vec<Vec<Poly>> {
        self.components
            .iter()
            .map(|c| (0..self.dim_in).map(|j| c.derivative(j)).collect())
            .collect()
    }

    pub fn jacobian_at(&self, point: &[f64]) -> Result<DMatrix<f64>> {
        check_dim(self.dim_in, point.len())?;
        let jac = self.jacobian();
        Ok(DMatrix::from_fn(self.dim_out(), self.dim_in, |i, j| {
            jac[i][j].eval(point)
        }))
    }

    /// `x -> self(x + alpha) - alpha`, expanded.
    pub fn translate(&self, alpha: &[f64]) -> Result<PolyMap> {
        if !self.is_square() {
            return Err(Error::InvalidInput(format!(
                "translation needs a square map, got {} -> {}",
                self.dim_in,
                self.dim_out()
            )));
        }
        check_dim(self.dim_in, alpha.len())?;
        let d = self.dim_in;
        let shifted: Vec<Poly> = (0..d)
            .map(|i| &Poly::var(d, i) + &Poly::constant(d, alpha[i]))
            .collect();
        let components = self
            .components
            .iter()
            .zip(alpha)
            .map(|(c, &a)| Ok(&c.compose(&shifted)? - &Poly::constant(d, a)))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap {
            dim_in: d,
            components,
        })
    }

    /// `x -> self(x + alpha)` without the output shift; zeros of a vector
    /// field move by `-alpha` under this.
    pub fn shift_argument(&self, alpha: &[f64]) -> Result<PolyMap> {
        check_dim(self.dim_in, alpha.len())?;
        let d = self.dim_in;
        let shifted: Vec<Poly> = (0..d)
            .map(|i| &Poly::var(d, i) + &Poly::constant(d, alpha[i]))
            .collect();
        let components = self
            .components
            .iter()
            .map(|c| c.compose(&shifted))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap {
            dim_in: d,
            components,
        })
    }

    /// `self(inner(x))`.
    pub fn compose(&self, inner: &PolyMap) -> Result<PolyMap> {
        check_dim(self.dim_in, inner.dim_out())?;
        let components = self
            .components
            .iter()
            .map(|c| c.compose(&inner.components))
            .collect::<Result<Vec<_>>>()?;
        Ok(PolyMap {
            dim_in: inner.dim_in,
            components,
        })
    }

    /// The scalar polynomial `y . self(x)`.
    pub fn dot(&self, y: &[f64]) -> Result<Poly> {
        check_dim(self.dim_out(), y.len())?;
        let mut out = Poly::zero(self.dim_in);
        for (c, &w) in self.components.iter().zip(y) {
            out = &out + &c.scale(w);
        }
        Ok(out)
    }

    pub fn scale(&self, c: f64) -> PolyMap {
        PolyMap {
            dim_in: self.dim_in,
            components: self.components.iter().map(|p| p.scale(c)).collect(),
        }
    }

    pub fn add(&self, other: &PolyMap) -> Result<PolyMap> {
        check_dim(self.dim_in, other.dim_in)?;
        check_dim(self.dim_out(), other.dim_out())?;
        Ok(PolyMap {
            dim_in: self.dim_in,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &PolyMap) -> Result<PolyMap> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> PolyMap {
        PolyMap {
            dim_in: self.dim_in,
            components: self.components.iter().map(|p| -p).collect(),
        }
    }

    /// Largest absolute coefficient difference over all components.
    pub fn max_coef_distance(&self, other: &PolyMap) -> f64 {
        self.components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.max_coef_distance(b))
            .fold(0.0, f64::max)
    }

    /// Splits into the linear part (as a dense matrix) and the remainder.
    pub fn linear_part(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim_out(), self.dim_in, |i, j| {
            let mut p = vec![0; self.dim_in];
            p[j] = 1;
            self.components[i].coefficient(&p)
        })
    }
}
