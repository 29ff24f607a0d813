//! Zeros of a vector field and their linear stability under the
//! differential iteration.
//!
//! An eigenvalue `lambda` of the Jacobian becomes the multiplier
//! `1 + delta * lambda` of the iteration. As `delta -> 0` along a
//! direction `tau` the sign of `lambda . tau` decides between the fixed
//! point and an invariant distribution; `lambda . tau = 0` is a fault.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::polymap::PolyMap;
use crate::region::BoxRegion;

pub const NEWTON_MAX_ITERATIONS: usize = 100;
/// Newton stops once `|F|` drops below this.
pub const NEWTON_TOLERANCE: f64 = 1e-13;
/// A zero is reported only if `|F|` is below this.
pub const ACCEPT_RESIDUAL: f64 = 1e-12;
/// Converged points closer than this are one zero.
pub const MERGE_RADIUS: f64 = 1e-8;
/// `|lambda . tau|` below this is a fault.
pub const FAULT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Attractive,
    Repulsive,
    Mixed,
    Marginal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Equilibrium {
    pub location: Vec<f64>,
    /// `|F(location)|`, re-evaluated after Newton.
    pub residual: f64,
    pub jacobian: Vec<Vec<f64>>,
    pub eigenvalues: Vec<Complex64>,
    pub delta: f64,
    pub multipliers: Vec<Complex64>,
    pub classification: Classification,
    /// Set when the Jacobian is numerically singular or nearby Newton limits
    /// had to be merged; the zero may not be isolated.
    pub possibly_non_isolated: bool,
}

impl Equilibrium {
    /// Builds the record for a known zero.
    pub fn at(field: &PolyMap, location: Vec<f64>, delta: f64) -> Result<Self> {
        let value = field.evaluate(&location)?;
        let jac = field.jacobian_at(&location)?;
        let eigenvalues = eigenvalues(&jac);
        let singular = is_numerically_singular(&jac);
        let mut eq = Equilibrium {
            residual: norm(&value),
            jacobian: (0..jac.nrows())
                .map(|i| jac.row(i).iter().copied().collect())
                .collect(),
            location,
            eigenvalues,
            delta,
            multipliers: Vec::new(),
            classification: Classification::Marginal,
            possibly_non_isolated: singular,
        };
        eq.set_delta(delta);
        Ok(eq)
    }

    /// Recomputes multipliers and classification for another step.
    pub fn set_delta(&mut self, delta: f64) {
        self.delta = delta;
        self.multipliers = multipliers(&self.eigenvalues, delta);
        self.classification = classify(&self.eigenvalues, delta);
    }

    pub fn jacobian_matrix(&self) -> DMatrix<f64> {
        let d = self.jacobian.len();
        DMatrix::from_fn(d, d, |i, j| self.jacobian[i][j])
    }
}

pub fn multipliers(eigenvalues: &[Complex64], delta: f64) -> Vec<Complex64> {
    eigenvalues.iter().map(|l| 1.0 + delta * l).collect()
}

/// Attractive iff every `|1 + delta lambda| < 1`, repulsive iff every one is
/// `> 1`, marginal if any sits on the unit circle, mixed otherwise.
pub fn classify(eigenvalues: &[Complex64], delta: f64) -> Classification {
    let moduli: Vec<f64> = multipliers(eigenvalues, delta)
        .iter()
        .map(|m| m.norm())
        .collect();
    if moduli.iter().all(|&m| m < 1.0) {
        Classification::Attractive
    } else if moduli.iter().all(|&m| m > 1.0) {
        Classification::Repulsive
    } else if moduli.iter().any(|&m| (m - 1.0).abs() <= 1e-12) {
        Classification::Marginal
    } else {
        Classification::Mixed
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ZeroDiagnostics {
    pub starts: usize,
    pub converged: usize,
    /// Starts abandoned on a singular Jacobian.
    pub singular: usize,
    /// Starts that diverged or ran out of iterations.
    pub failed: usize,
    pub outside_box: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ZeroSearch {
    pub zeros: Vec<Equilibrium>,
    pub diagnostics: ZeroDiagnostics,
}

enum NewtonOutcome {
    Converged(Vec<f64>),
    Singular,
    Failed,
}

fn newton(field: &PolyMap, start: &[f64]) -> NewtonOutcome {
    let mut x = start.to_vec();
    let mut fx = field.evaluate(&x).expect("start has field dimension");
    let mut r = norm(&fx);
    for _ in 0..NEWTON_MAX_ITERATIONS {
        if r < NEWTON_TOLERANCE {
            return NewtonOutcome::Converged(x);
        }
        let jac = field.jacobian_at(&x).expect("same dimension");
        let Some(step) = jac.lu().solve(&DVector::from_column_slice(&fx)) else {
            return NewtonOutcome::Singular;
        };
        if step.iter().any(|s| !s.is_finite()) {
            return NewtonOutcome::Singular;
        }
        let mut scale = 1.0;
        let (mut trial, mut ft, mut rt);
        loop {
            trial = x.iter().zip(step.iter()).map(|(a, s)| a - scale * s).collect::<Vec<_>>();
            ft = field.evaluate(&trial).expect("same dimension");
            rt = norm(&ft);
            if rt <= r || scale < 1e-9 {
                break;
            }
            scale *= 0.5;
        }
        if !rt.is_finite() {
            return NewtonOutcome::Failed;
        }
        if rt >= r && scale < 1e-9 {
            break;
        }
        x = trial;
        fx = ft;
        r = rt;
    }
    // stagnation at rounding level is still a zero
    if r < ACCEPT_RESIDUAL {
        NewtonOutcome::Converged(x)
    } else {
        NewtonOutcome::Failed
    }
}

/// Newton from every point of a `grid_density^d` lattice of cell centres in
/// `region`; converged limits inside the box are merged within
/// [`MERGE_RADIUS`] and sorted lexicographically.
pub fn find_zeros(
    field: &PolyMap,
    region: &BoxRegion,
    grid_density: usize,
    delta: f64,
) -> Result<ZeroSearch> {
    if !field.is_square() {
        return Err(Error::InvalidInput("zeros need a square field".into()));
    }
    check_dim(field.dim_in(), region.dim())?;
    if grid_density == 0 {
        return Err(Error::InvalidInput("grid density must be positive".into()));
    }
    let d = field.dim_in();
    let total = grid_density
        .checked_pow(d as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::ResourceLimit("too many Newton starts".into()))?;
    let outcomes: Vec<NewtonOutcome> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut rem = idx;
            let start: Vec<f64> = (0..d)
                .map(|axis| {
                    let k = rem % grid_density;
                    rem /= grid_density;
                    let (lo, hi) = (region.lower[axis], region.upper[axis]);
                    lo + (hi - lo) * (k as f64 + 0.5) / grid_density as f64
                })
                .collect();
            newton(field, &start)
        })
        .collect();

    let mut diag = ZeroDiagnostics {
        starts: total,
        ..Default::default()
    };
    let slack = 1e-9 * region.diameter();
    let mut points = Vec::new();
    for o in outcomes {
        match o {
            NewtonOutcome::Converged(x) => {
                diag.converged += 1;
                let inside = x.iter().enumerate().all(|(i, v)| {
                    *v >= region.lower[i] - slack && *v <= region.upper[i] + slack
                });
                if inside {
                    points.push(x);
                } else {
                    diag.outside_box += 1;
                }
            }
            NewtonOutcome::Singular => diag.singular += 1,
            NewtonOutcome::Failed => diag.failed += 1,
        }
    }
    points.sort_by(|a, b| lex_cmp(a, b));

    // single-linkage clustering in sorted order
    let mut clusters: Vec<Vec<Vec<f64>>> = Vec::new();
    for p in points {
        let hit = clusters
            .iter_mut()
            .find(|c| c.iter().any(|q| distance(q, &p) < MERGE_RADIUS));
        match hit {
            Some(c) => c.push(p),
            None => clusters.push(vec![p]),
        }
    }
    let mut zeros = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let best = cluster
            .iter()
            .min_by(|a, b| {
                let ra = norm(&field.evaluate(a).expect("dim"));
                let rb = norm(&field.evaluate(b).expect("dim"));
                ra.total_cmp(&rb).then_with(|| lex_cmp(a, b))
            })
            .expect("clusters are non-empty")
            .clone();
        let spread = cluster
            .iter()
            .map(|q| distance(q, &best))
            .fold(0.0, f64::max);
        let mut eq = Equilibrium::at(field, best, delta)?;
        if eq.residual >= ACCEPT_RESIDUAL {
            continue;
        }
        // distinct limits this far apart inside the merge radius point to a
        // zero Newton cannot pin down to rounding
        eq.possibly_non_isolated |= spread > 1e-10;
        zeros.push(eq);
    }
    zeros.sort_by(|a, b| lex_cmp(&a.location, &b.location));
    Ok(ZeroSearch {
        zeros,
        diagnostics: diag,
    })
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// True when a residual of [`ACCEPT_RESIDUAL`] cannot locate the zero to
/// within [`MERGE_RADIUS`], i.e. the smallest singular value is below their
/// ratio (relative to the matrix scale).
fn is_numerically_singular(m: &DMatrix<f64>) -> bool {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    min <= ACCEPT_RESIDUAL / MERGE_RADIUS * max.max(1.0)
}

/// Diagonal similarity scaling rows and columns to comparable norms
/// (Parlett-Reinsch); eigenvalues are unchanged.
fn balance(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let radix = 2.0_f64;
    let mut done = false;
    while !done {
        done = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += a[(j, i)].abs();
                    r += a[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            while cc < r / radix {
                f *= radix;
                cc *= radix * radix;
            }
            while cc > r * radix {
                f /= radix;
                cc /= radix * radix;
            }
            let _ = cc;
            if (c * f + r / f) < 0.95 * s {
                done = false;
                for j in 0..n {
                    a[(i, j)] /= f;
                }
                for j in 0..n {
                    a[(j, i)] *= f;
                }
            }
        }
    }
    a
}

/// Eigenvalues of a real square matrix via balancing and Hessenberg QR,
/// sorted by real part then imaginary part.
pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex64> {
    let mut ev: Vec<Complex64> = balance(m)
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    ev
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultVerdict {
    /// Every `lambda . tau > 0`: the invariant distribution wins.
    InvariantDistribution,
    /// Every `lambda . tau < 0`: the fixed point wins.
    FixedPoint,
    /// `lambda . tau = 0` within tolerance.
    Fault,
    /// Signs differ; the aggregate is reported and the call is left open.
    Mixed,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FaultReport {
    /// `Re(lambda_j)` times the tau weight of the eigenvector's blocks.
    pub lambda_tau: Vec<f64>,
    /// `sum_j lambda_tau[j]`.
    pub aggregate: f64,
    /// `sum_j Re(lambda_j)`, the ODE criterion.
    pub ode_sum: f64,
    /// Indices of eigenvalues with `|lambda_tau| < FAULT_TOLERANCE`.
    pub fault_eigenvalues: Vec<usize>,
    /// Normal `c` of the fault plane `c . tau = 0` over the time variables.
    pub fault_plane_normal: Vec<f64>,
    /// Points of the tau simplex edges lying on the fault plane.
    pub fault_directions: Vec<Vec<f64>>,
    pub on_fault: bool,
    pub verdict: FaultVerdict,
}

/// Sign analysis of `lambda . tau` at an equilibrium.
///
/// `blocks[l]` assigns coordinate `l` to a time variable; each eigenvalue
/// is attributed to the variables through the mass of its eigenvector.
/// Real parts are used for complex eigenvalues.
pub fn lemma1_analysis(eq: &Equilibrium, blocks: &[usize], tau: &[f64]) -> Result<FaultReport> {
    let d = eq.location.len();
    check_dim(d, blocks.len())?;
    let k = tau.len();
    if blocks.iter().any(|&b| b >= k) {
        return Err(Error::InvalidInput("block index beyond tau".into()));
    }
    let jac = eq.jacobian_matrix();
    let weights: Vec<Vec<f64>> = eq
        .eigenvalues
        .iter()
        .map(|&l| {
            let v = eigenvector(&jac, l);
            let total: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            let mut w = vec![0.0; k];
            for (l, z) in v.iter().enumerate() {
                w[blocks[l]] += z.norm_sqr() / total;
            }
            w
        })
        .collect();
    let lambda_tau: Vec<f64> = eq
        .eigenvalues
        .iter()
        .zip(&weights)
        .map(|(l, w)| l.re * w.iter().zip(tau).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let aggregate: f64 = lambda_tau.iter().sum();
    let normal: Vec<f64> = (0..k)
        .map(|i| {
            eq.eigenvalues
                .iter()
                .zip(&weights)
                .map(|(l, w)| l.re * w[i])
                .sum()
        })
        .collect();
    let mut directions = Vec::new();
    if k == 1 {
        if normal[0].abs() < FAULT_TOLERANCE {
            directions.push(vec![1.0]);
        }
    } else {
        for i in 0..k {
            for j in i + 1..k {
                let (ci, cj) = (normal[i], normal[j]);
                if ci * cj < 0.0 || (ci.abs() < FAULT_TOLERANCE && cj.abs() < FAULT_TOLERANCE) {
                    let mut t = vec![0.0; k];
                    if ci == cj {
                        t[i] = 0.5;
                        t[j] = 0.5;
                    } else {
                        t[i] = cj / (cj - ci);
                        t[j] = 1.0 - t[i];
                    }
                    directions.push(t);
                }
            }
        }
    }
    let on_fault = aggregate.abs() < FAULT_TOLERANCE;
    let verdict = if on_fault {
        FaultVerdict::Fault
    } else if lambda_tau.iter().all(|&x| x > 0.0) {
        FaultVerdict::InvariantDistribution
    } else if lambda_tau.iter().all(|&x| x < 0.0) {
        FaultVerdict::FixedPoint
    } else {
        FaultVerdict::Mixed
    };
    Ok(FaultReport {
        fault_eigenvalues: lambda_tau
            .iter()
            .enumerate()
            .filter(|(_, x)| x.abs() < FAULT_TOLERANCE)
            .map(|(i, _)| i)
            .collect(),
        ode_sum: eq.eigenvalues.iter().map(|l| l.re).sum(),
        lambda_tau,
        aggregate,
        fault_plane_normal: normal,
        fault_directions: directions,
        on_fault,
        verdict,
    })
}

/// Unit null vector of `J - lambda I`.
fn eigenvector(jac: &DMatrix<f64>, lambda: Complex64) -> Vec<Complex64> {
    let n = jac.nrows();
    let shifted = DMatrix::from_fn(n, n, |i, j| {
        let v = Complex64::new(jac[(i, j)], 0.0);
        if i == j {
            v - lambda
        } else {
            v
        }
    });
    let svd = shifted.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let (idx, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    vt.row(idx).iter().map(|z| z.conj()).collect()
}

/// Coefficients (ascending powers of `lambda`) of `det(J(at) - lambda I)`.
///
/// Cofactor expansion of the polynomial matrix for `d <= 4`; the product
/// of `(lambda_i - lambda)` over computed eigenvalues beyond that.
pub fn characteristic_polynomial(field: &PolyMap, at: &[f64]) -> Result<Vec<f64>> {
    let jac = field.jacobian_at(at)?;
    Ok(characteristic_polynomial_of(&jac))
}

pub fn characteristic_polynomial_of(jac: &DMatrix<f64>) -> Vec<f64> {
    let n = jac.nrows();
    if n <= 4 {
        let entries: Vec<Vec<Vec<f64>>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { vec![jac[(i, j)], -1.0] } else { vec![jac[(i, j)]] })
                    .collect()
            })
            .collect();
        let cols: Vec<usize> = (0..n).collect();
        let mut c = cofactor_det(&entries, 0, &cols);
        c.resize(n + 1, 0.0);
        c
    } else {
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for l in eigenvalues(jac) {
            // multiply by (l - lambda)
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, ck) in c.iter().enumerate() {
                next[k] += ck * l;
                next[k + 1] -= ck;
            }
            c = next;
        }
        c.iter().map(|z| z.re).collect()
    }
}

fn cofactor_det(m: &[Vec<Vec<f64>>], row: usize, cols: &[usize]) -> Vec<f64> {
    if cols.len() == 1 {
        return m[row][cols[0]].clone();
    }
    let mut acc = vec![0.0];
    for (k, &c) in cols.iter().enumerate() {
        let rest: Vec<usize> = cols.iter().copied().filter(|&x| x != c).collect();
        let minor = cofactor_det(m, row + 1, &rest);
        let term = upoly_mul(&m[row][c], &minor);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        acc = upoly_add(&acc, &term.iter().map(|x| sign * x).collect::<Vec<_>>());
    }
    acc
}

fn upoly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn upoly_add(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len().max(b.len())];
    for (i, x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

/// Horner evaluation of ascending coefficients.
pub fn eval_upoly(coeffs: &[f64], x: Complex64) -> Complex64 {
    coeffs
        .iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, c| acc * x + c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{self, LorenzParams};
    use crate::polymap::Poly;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn logistic_zeros_and_classes() {
        let f = models::logistic(1.0);
        let b = BoxRegion::cube(1, -1.0, 2.0).unwrap();
        let s = find_zeros(&f, &b, 16, 0.01).unwrap();
        let locs: Vec<f64> = s.zeros.iter().map(|z| z.location[0]).collect();
        assert_eq!(locs.len(), 2);
        assert!(locs[0].abs() < 1e-12 && (locs[1] - 1.0).abs() < 1e-12);
        assert_eq!(s.zeros[0].classification, Classification::Repulsive);
        assert_eq!(s.zeros[1].classification, Classification::Attractive);
        assert!((s.zeros[1].multipliers[0].re - 0.99).abs() < 1e-14);
    }

    #[test]
    fn no_real_zero() {
        let f = PolyMap::new(
            1,
            vec![Poly::from_terms(1, [(1.0, vec![2]), (1.0, vec![0])]).unwrap()],
        )
        .unwrap();
        let b = BoxRegion::cube(1, -5.0, 5.0).unwrap();
        let s = find_zeros(&f, &b, 20, 0.01).unwrap();
        assert!(s.zeros.is_empty());
        assert!(s.diagnostics.failed + s.diagnostics.singular > 0);
    }

    #[test]
    fn lorenz_three_zeros() {
        let p = LorenzParams::classic();
        let b: BoxRegion = "-30,30;-30,30;0,60".parse().unwrap();
        let s = find_zeros(&models::lorenz(&p), &b, 8, 0.005).unwrap();
        assert_eq!(s.zeros.len(), 3);
        let a = 72f64.sqrt();
        let expect = [[-a, -a, 27.0], [0.0, 0.0, 0.0], [a, a, 27.0]];
        for (z, e) in s.zeros.iter().zip(expect) {
            for (x, y) in z.location.iter().zip(e) {
                assert!((x - y).abs() < 1e-10, "{:?}", z.location);
            }
            assert!(z.residual < 1e-12);
        }
    }

    #[test]
    fn lorenz_origin_is_mixed() {
        let p = LorenzParams::classic();
        let eq = Equilibrium::at(&models::lorenz(&p), vec![0.0; 3], 0.005).unwrap();
        assert_eq!(eq.classification, Classification::Mixed);
        let disc = 1201f64.sqrt();
        let expected = [(-11.0 - disc) / 2.0, -8.0 / 3.0, (-11.0 + disc) / 2.0];
        for (l, e) in eq.eigenvalues.iter().zip(expected) {
            assert!((l.re - e).abs() < 1e-10 && l.im.abs() < 1e-12, "{l}");
        }
    }

    #[test]
    fn zero_eigenvalue_is_marginal() {
        assert_eq!(classify(&[c(0.0), c(-1.0)], 0.1), Classification::Marginal);
        assert_eq!(classify(&[c(0.0)], 0.1), Classification::Marginal);
    }

    #[test]
    fn fault_analysis_lorenz_origin_sum() {
        let p = LorenzParams::classic();
        let eq = Equilibrium::at(&models::lorenz(&p), vec![0.0; 3], 0.005).unwrap();
        let r = lemma1_analysis(&eq, &[0, 0, 0], &[1.0]).unwrap();
        assert!((r.ode_sum + 41.0 / 3.0).abs() < 1e-10);
        assert!((r.aggregate - r.ode_sum).abs() < 1e-10);
        assert_eq!(r.verdict, FaultVerdict::Mixed);
        assert!(!r.on_fault);
    }

    #[test]
    fn fault_analysis_positive_toy() {
        let f = PolyMap::identity(1);
        let eq = Equilibrium::at(&f, vec![0.0], 0.01).unwrap();
        let r = lemma1_analysis(&eq, &[0], &[1.0]).unwrap();
        assert_eq!(r.verdict, FaultVerdict::InvariantDistribution);
        assert_eq!(r.ode_sum, 1.0);
    }

    #[test]
    fn fault_analysis_two_block_fault() {
        let f = PolyMap::new(2, vec![Poly::var(2, 0), Poly::var(2, 1).scale(-1.0)]).unwrap();
        let eq = Equilibrium::at(&f, vec![0.0, 0.0], 0.01).unwrap();
        let r = lemma1_analysis(&eq, &[0, 1], &[0.5, 0.5]).unwrap();
        assert!(r.on_fault);
        assert_eq!(r.verdict, FaultVerdict::Fault);
        assert_eq!(r.fault_directions, vec![vec![0.5, 0.5]]);
        let off = lemma1_analysis(&eq, &[0, 1], &[0.7, 0.3]).unwrap();
        assert!(!off.on_fault);
        assert_eq!(off.verdict, FaultVerdict::Mixed);
    }

    #[test]
    fn diagonal_characteristic_polynomial() {
        let f = PolyMap::new(
            3,
            vec![Poly::var(3, 0).scale(2.0), Poly::var(3, 1).scale(-1.0), Poly::var(3, 2).scale(0.5)],
        )
        .unwrap();
        let cp = characteristic_polynomial(&f, &[0.0; 3]).unwrap();
        for x in [-2.0, 0.3, 1.7, 4.0] {
            let direct = (2.0 - x) * (-1.0 - x) * (0.5 - x);
            assert!((eval_upoly(&cp, c(x)).re - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn large_dimension_uses_eigenvalue_product() {
        let d = 6;
        let comps = (0..d).map(|i| Poly::var(d, i).scale(i as f64 - 2.5)).collect();
        let f = PolyMap::new(d, comps).unwrap();
        let cp = characteristic_polynomial(&f, &vec![0.0; d]).unwrap();
        assert_eq!(cp.len(), d + 1);
        let x = 0.37;
        let direct: f64 = (0..d).map(|i| i as f64 - 2.5 - x).product();
        assert!((eval_upoly(&cp, c(x)).re - direct).abs() < 1e-10);
    }

    #[test]
    fn classification_stable_for_small_steps() {
        let p = LorenzParams::classic();
        let f = models::lorenz(&p);
        for z in [vec![0.0; 3], p.wing_plus().to_vec(), p.wing_minus().to_vec()] {
            let classes: Vec<_> = [0.01, 0.005, 0.001]
                .iter()
                .map(|&d| Equilibrium::at(&f, z.clone(), d).unwrap().classification)
                .collect();
            assert!(classes.windows(2).all(|w| w[0] == w[1]), "{classes:?}");
        }
    }

    #[test]
    fn double_root_is_flagged() {
        let f = PolyMap::new(1, vec![Poly::from_terms(1, [(1.0, vec![2])]).unwrap()]).unwrap();
        let b = BoxRegion::cube(1, -1.0, 1.0).unwrap();
        let s = find_zeros(&f, &b, 4, 0.1).unwrap();
        assert!(!s.zeros.is_empty());
        assert!(s.zeros.iter().all(|z| z.possibly_non_isolated));
    }

    /// Durand-Kerner on ascending coefficients; independent of the QR path.
    fn durand_kerner(coeffs: &[f64]) -> Vec<Complex64> {
        let n = coeffs.len() - 1;
        let lead = coeffs[n];
        let monic: Vec<f64> = coeffs.iter().map(|c| c / lead).collect();
        let seed = Complex64::new(0.4, 0.9);
        let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * 10.0).collect();
        for _ in 0..2000 {
            let prev = z.clone();
            for i in 0..n {
                let mut den = Complex64::new(1.0, 0.0);
                for j in 0..n {
                    if j != i {
                        den *= z[i] - z[j];
                    }
                }
                let zi = z[i];
                z[i] = zi - eval_upoly(&monic, zi) / den;
            }
            if z.iter().zip(&prev).all(|(a, b)| (a - b).norm() < 1e-15 * (1.0 + a.norm())) {
                break;
            }
        }
        z
    }

    #[test]
    fn characteristic_roots_match_eigenvalues() {
        let p = LorenzParams::classic();
        let f = models::lorenz(&p);
        for at in [p.wing_plus().to_vec(), vec![0.0; 3], vec![1.0, -2.0, 5.0]] {
            let cp = characteristic_polynomial(&f, &at).unwrap();
            let ev = eigenvalues(&f.jacobian_at(&at).unwrap());
            for r in durand_kerner(&cp) {
                let best = ev.iter().map(|e| (e - r).norm()).fold(f64::INFINITY, f64::min);
                assert!(best < 1e-9 * (1.0 + r.norm()), "{r} vs {ev:?}");
            }
        }
    }
}
