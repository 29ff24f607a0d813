//! The differential iteration `f(a, delta) = a + delta * F(a)`.
//!
//! For an ODE all coordinates share one step. For PDE-style systems each
//! coordinate belongs to a time-variable block `i` with its own step
//! `delta_i = tau_i |t| / n`.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{check_dim, Error, Result};
use crate::polymap::{Poly, PolyMap};
use crate::region::{keyed_rng, BoxRegion};

/// Any coordinate beyond this magnitude aborts an orbit.
pub const OVERFLOW_THRESHOLD: f64 = 1e12;

/// A deterministic map of `R^d` into itself.
pub trait PointMap: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], out: &mut [f64]);

    /// Physical time advanced by one application.
    fn time_step(&self) -> f64 {
        1.0
    }
}

impl PointMap for PolyMap {
    fn dim(&self) -> usize {
        self.dim_in()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.evaluate_into(x, out);
    }
}

/// Wraps a closure as a [`PointMap`].
pub struct FnMap<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> FnMap<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64]) + Sync> PointMap for FnMap<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialIteration {
    field: PolyMap,
    delta: Vec<f64>,
    blocks: Vec<usize>,
    tau: Vec<f64>,
    coord_delta: Vec<f64>,
}

impl DifferentialIteration {
    /// Largest step accepted unless [`Self::with_max_delta`] says otherwise.
    pub const DEFAULT_MAX_DELTA: f64 = 1.0;

    /// ODE case: one time variable, `tau = 1`.
    pub fn ode(field: PolyMap, delta: f64) -> Result<Self> {
        let d = field.dim_in();
        Self::new(field, vec![delta], vec![0; d], vec![1.0])
    }

    /// General case: `blocks[l]` is the time-variable index of coordinate `l`
    /// and `delta[i]` the step of variable `i`.
    pub fn new(field: PolyMap, delta: Vec<f64>, blocks: Vec<usize>, tau: Vec<f64>) -> Result<Self> {
        Self::with_max_delta(field, delta, blocks, tau, Self::DEFAULT_MAX_DELTA)
    }

    pub fn with_max_delta(
        field: PolyMap,
        delta: Vec<f64>,
        blocks: Vec<usize>,
        tau: Vec<f64>,
        max_delta: f64,
    ) -> Result<Self> {
        if !field.is_square() {
            return Err(Error::InvalidInput("the vector field must be square".into()));
        }
        check_dim(field.dim_in(), blocks.len())?;
        check_dim(delta.len(), tau.len())?;
        if let Some(&bad) = blocks.iter().find(|&&b| b >= delta.len()) {
            return Err(Error::InvalidInput(format!(
                "block index {bad} out of range for {} time variables",
                delta.len()
            )));
        }
        if let Some(&bad) = delta.iter().find(|&&d| !(d > 0.0 && d <= max_delta)) {
            return Err(Error::Domain {
                what: "delta",
                value: bad,
                domain: "(0, max_delta]",
            });
        }
        let tau_sum: f64 = tau.iter().sum();
        if tau.iter().any(|&t| t < 0.0) || (tau_sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "tau must be non-negative and sum to 1, got {tau:?}"
            )));
        }
        let coord_delta = blocks.iter().map(|&b| delta[b]).collect();
        Ok(Self {
            field,
            delta,
            blocks,
            tau,
            coord_delta,
        })
    }

    /// Steps `delta_i = tau_i * |t| / n` for a direction `tau` and horizon `|t|`.
    pub fn from_direction(
        field: PolyMap,
        blocks: Vec<usize>,
        tau: Vec<f64>,
        t_norm: f64,
        n: u64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput("n must be positive".into()));
        }
        let delta = tau.iter().map(|t| t * t_norm / n as f64).collect();
        Self::new(field, delta, blocks, tau)
    }

    pub fn field(&self) -> &PolyMap {
        &self.field
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Step applied to each coordinate.
    pub fn coordinate_delta(&self) -> &[f64] {
        &self.coord_delta
    }

    pub fn dim(&self) -> usize {
        self.field.dim_in()
    }

    /// The iteration itself as a polynomial map.
    pub fn as_polymap(&self) -> PolyMap {
        let d = self.dim();
        let comps = (0..d)
            .map(|l| &Poly::var(d, l) + &self.field.component(l).scale(self.coord_delta[l]))
            .collect();
        PolyMap::new(d, comps).expect("same dimension as the field")
    }

    pub fn step(&self, a: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim(), a.len())?;
        let mut out = vec![0.0; a.len()];
        self.apply(a, &mut out);
        if !in_range(&out) {
            return Err(Error::Overflow { step: 1, point: out });
        }
        Ok(out)
    }

    /// Iterates `n_steps` times from `start`, calling `visit(step, point)` for
    /// every step index `>= burn_in` (step 0 is the start). Returns the last point.
    pub fn for_each_point(
        &self,
        start: &[f64],
        n_steps: usize,
        burn_in: usize,
        mut visit: impl FnMut(usize, &[f64]),
    ) -> Result<Vec<f64>> {
        check_dim(self.dim(), start.len())?;
        let mut cur = start.to_vec();
        let mut next = vec![0.0; cur.len()];
        if burn_in == 0 {
            visit(0, &cur);
        }
        for k in 1..=n_steps {
            self.apply(&cur, &mut next);
            if !in_range(&next) {
                return Err(Error::Overflow { step: k, point: next });
            }
            std::mem::swap(&mut cur, &mut next);
            if k >= burn_in {
                visit(k, &cur);
            }
        }
        Ok(cur)
    }

    /// Stores the trajectory, dropping the first `burn_in` points.
    pub fn orbit(&self, start: &[f64], n_steps: usize, burn_in: usize) -> Result<Orbit> {
        let d = self.dim();
        let mut data = Vec::with_capacity((n_steps + 1).saturating_sub(burn_in) * d);
        self.for_each_point(start, n_steps, burn_in, |_, p| data.extend_from_slice(p))?;
        Ok(Orbit {
            dim: d,
            start: start.to_vec(),
            delta_used: self.delta.clone(),
            first_step: burn_in,
            data,
        })
    }

    /// Orbit with the default burn-in of 10% of the steps.
    pub fn orbit_default_burn_in(&self, start: &[f64], n_steps: usize) -> Result<Orbit> {
        self.orbit(start, n_steps, n_steps / 10)
    }

    /// Mean of `F` over the points of a cycle.
    pub fn cycle_mean_residual(&self, points: &[&[f64]]) -> Vec<f64> {
        let d = self.dim();
        let mut acc = vec![0.0; d];
        let mut val = vec![0.0; d];
        for p in points {
            self.field.evaluate_into(p, &mut val);
            for (a, v) in acc.iter_mut().zip(&val) {
                *a += v;
            }
        }
        let n = points.len().max(1) as f64;
        acc.iter().map(|a| a / n).collect()
    }

    /// Looks for a recurrence at the tail of `orbit`.
    ///
    /// Scanning back from the last point, the orbit must first leave the
    /// `tol` ball around it and then return; the period is the lag of the
    /// closest return inside that first return window. Lags up to half the
    /// stored orbit are scanned. An orbit that never leaves the ball is
    /// reported as a fixed point (period 1).
    pub fn detect_cycle(&self, orbit: &Orbit, tol: f64) -> Option<CycleReport> {
        let n = orbit.len();
        if n < 2 {
            return None;
        }
        let m = n - 1;
        let last = orbit.point(m);
        let dist = |j: usize| distance(last, orbit.point(m - j));
        let max_lag = (n / 2).max(1);

        let mut j = 1;
        while j <= max_lag && dist(j) < tol {
            j += 1;
        }
        let (period, closure) = if j > max_lag {
            (1, dist(1))
        } else {
            while j <= max_lag && dist(j) >= tol {
                j += 1;
            }
            if j > max_lag {
                return None;
            }
            let mut best = (j, dist(j));
            while j <= max_lag {
                let dj = dist(j);
                if dj >= tol {
                    break;
                }
                if dj < best.1 {
                    best = (j, dj);
                }
                j += 1;
            }
            best
        };
        let points: Vec<&[f64]> = (m + 1 - period..=m).map(|k| orbit.point(k)).collect();
        Some(CycleReport {
            period_steps: period,
            period_time: period as f64 * self.time_step(),
            closure_error: closure,
            mean_field_residual: self.cycle_mean_residual(&points),
        })
    }

    /// Monte Carlo check that the box is mapped into itself.
    pub fn compact_invariance_probe(
        &self,
        region: &BoxRegion,
        samples: usize,
        horizon: usize,
        seed: u64,
    ) -> Result<ProbeReport> {
        check_dim(self.dim(), region.dim())?;
        let outcomes: Vec<(bool, bool, bool, f64)> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = keyed_rng(seed, i as u64);
                let start = region.sample_uniform(&mut rng);
                let mut left = false;
                let mut max_norm = norm(&start);
                match self.for_each_point(&start, horizon, 0, |_, p| {
                    left |= !region.contains(p);
                    max_norm = max_norm.max(norm(p));
                }) {
                    Ok(last) => (left, !region.contains(&last), false, max_norm),
                    Err(_) => (true, true, true, f64::INFINITY),
                }
            })
            .collect();
        let frac = |f: fn(&(bool, bool, bool, f64)) -> bool| {
            outcomes.iter().filter(|o| f(o)).count() as f64 / samples.max(1) as f64
        };
        Ok(ProbeReport {
            samples,
            horizon,
            fraction_escaped: frac(|o| o.1),
            fraction_left_box: frac(|o| o.0),
            fraction_diverged: frac(|o| o.2),
            max_excursion: outcomes.iter().map(|o| o.3).fold(0.0, f64::max),
        })
    }
}

impl PointMap for DifferentialIteration {
    fn dim(&self) -> usize {
        self.field.dim_in()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.field.evaluate_into(x, out);
        for ((o, xi), d) in out.iter_mut().zip(x).zip(&self.coord_delta) {
            *o = xi + d * *o;
        }
    }

    /// `|t| / n`, the sum of the block steps.
    fn time_step(&self) -> f64 {
        self.delta.iter().sum()
    }
}

fn in_range(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite() && v.abs() <= OVERFLOW_THRESHOLD)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// A stored trajectory, flattened row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit {
    dim: usize,
    pub start: Vec<f64>,
    pub delta_used: Vec<f64>,
    /// Step index of the first stored point.
    pub first_step: usize,
    data: Vec<f64>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.points().last()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CycleReport {
    pub period_steps: usize,
    pub period_time: f64,
    pub closure_error: f64,
    pub mean_field_residual: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub samples: usize,
    pub horizon: usize,
    /// Starts whose final point lies outside the box (or that diverged).
    pub fraction_escaped: f64,
    /// Starts whose orbit left the box at least once.
    pub fraction_left_box: f64,
    pub fraction_diverged: f64,
    pub max_excursion: f64,
}

/// Default cycle tolerance, `1e-6` times the diameter of the region.
pub fn default_cycle_tolerance(region: &BoxRegion) -> f64 {
    1e-6 * region.diameter()
}
