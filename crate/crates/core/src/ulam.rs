//! Ulam discretization of the transfer operator of a map on a box, the
//! invariant density it induces, orbit histograms, and first-visit times.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::difiter::{PointMap, OVERFLOW_THRESHOLD};
use crate::error::{check_dim, Error, Result};
use crate::hermite::beta_half_cdf;
use crate::region::{keyed_rng, BoxRegion};

/// Uniform grid of cells over a box; cell `k` has axis indices
/// `k_0 + m_0 (k_1 + m_1 (k_2 + ...))`, so axis 0 varies fastest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GridPartition {
    pub region: BoxRegion,
    pub cells_per_axis: Vec<usize>,
    pub total_cells: usize,
}

impl GridPartition {
    pub fn new(region: BoxRegion, cells_per_axis: Vec<usize>) -> Result<Self> {
        check_dim(region.dim(), cells_per_axis.len())?;
        if cells_per_axis.contains(&0) {
            return Err(Error::InvalidInput("every axis needs at least one cell".into()));
        }
        let total_cells = cells_per_axis
            .iter()
            .try_fold(1usize, |acc, &m| acc.checked_mul(m))
            .filter(|&t| t <= 1 << 28)
            .ok_or_else(|| Error::ResourceLimit("too many cells".into()))?;
        Ok(Self {
            region,
            cells_per_axis,
            total_cells,
        })
    }

    pub fn uniform(region: BoxRegion, m: usize) -> Result<Self> {
        let d = region.dim();
        Self::new(region, vec![m; d])
    }

    pub fn dim(&self) -> usize {
        self.cells_per_axis.len()
    }

    pub fn cell_width(&self, axis: usize) -> f64 {
        (self.region.upper[axis] - self.region.lower[axis]) / self.cells_per_axis[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.cell_width(a)).product()
    }

    /// Cell holding `x`; the upper face of the box belongs to the last cell.
    pub fn cell_of(&self, x: &[f64]) -> Option<usize> {
        let mut idx = 0;
        let mut stride = 1;
        for (a, &v) in x.iter().enumerate() {
            let (lo, hi, m) = (self.region.lower[a], self.region.upper[a], self.cells_per_axis[a]);
            if !(v >= lo && v <= hi) {
                return None;
            }
            let k = (((v - lo) / (hi - lo)) * m as f64) as usize;
            idx += k.min(m - 1) * stride;
            stride *= m;
        }
        Some(idx)
    }

    pub fn axis_indices(&self, cell: usize) -> Vec<usize> {
        let mut rem = cell;
        self.cells_per_axis
            .iter()
            .map(|&m| {
                let k = rem % m;
                rem /= m;
                k
            })
            .collect()
    }

    /// Lower corner of `cell`.
    pub fn cell_lower(&self, cell: usize) -> Vec<f64> {
        self.axis_indices(cell)
            .iter()
            .enumerate()
            .map(|(a, &k)| self.region.lower[a] + k as f64 * self.cell_width(a))
            .collect()
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        self.cell_lower(cell)
            .iter()
            .enumerate()
            .map(|(a, v)| v + 0.5 * self.cell_width(a))
            .collect()
    }

    /// Per-axis sums of cell weights.
    pub fn marginals(&self, weights: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = self.cells_per_axis.iter().map(|&m| vec![0.0; m]).collect();
        for (cell, w) in weights.iter().enumerate().take(self.total_cells) {
            for (a, k) in self.axis_indices(cell).into_iter().enumerate() {
                out[a][k] += w;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EscapePolicy {
    /// Drop mass leaving the box and renormalize the row.
    #[default]
    Discard,
    /// Send it to an extra absorbing state with index `total_cells`.
    Absorbing,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionMatrix {
    /// Number of states: the cells, plus one when absorbing.
    pub states: usize,
    /// Sparse rows, `(column, probability)` sorted by column.
    pub rows: Vec<Vec<(usize, f64)>>,
    /// Fraction of each cell's samples that left the box.
    pub escaped_mass_per_row: Vec<f64>,
    /// Cells whose samples all escaped; they use a uniform row.
    pub uniform_rows: Vec<usize>,
    pub policy: EscapePolicy,
}

/// Sample points for one cell: one jittered point per subcell of a
/// `k^d` subgrid with `k = floor(samples^(1/d))`, the rest uniform.
fn stratified_points(part: &GridPartition, cell: usize, samples: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let d = part.dim();
    let mut k = (samples as f64).powf(1.0 / d as f64).floor() as usize;
    while (k + 1).pow(d as u32) <= samples {
        k += 1;
    }
    while k > 1 && k.pow(d as u32) > samples {
        k -= 1;
    }
    let k = k.max(1);
    let lower = part.cell_lower(cell);
    let widths: Vec<f64> = (0..d).map(|a| part.cell_width(a)).collect();
    let strata = k.pow(d as u32);
    let mut pts = Vec::with_capacity(samples);
    for s in 0..strata {
        let mut rem = s;
        let p = (0..d)
            .map(|a| {
                let j = rem % k;
                rem /= k;
                lower[a] + widths[a] * (j as f64 + rng.random::<f64>()) / k as f64
            })
            .collect();
        pts.push(p);
    }
    for _ in strata..samples {
        pts.push((0..d).map(|a| lower[a] + widths[a] * rng.random::<f64>()).collect());
    }
    pts
}

/// One step of `map` applied to `samples_per_cell` stratified points of
/// every cell. Cell `c` draws from the stream keyed by `(seed, c)`.
pub fn build_transition(
    map: &impl PointMap,
    part: &GridPartition,
    samples_per_cell: usize,
    seed: u64,
    policy: EscapePolicy,
) -> Result<TransitionMatrix> {
    check_dim(part.dim(), map.dim())?;
    if samples_per_cell == 0 {
        return Err(Error::InvalidInput("samples per cell must be at least 1".into()));
    }
    let n = part.total_cells;
    let absorbing = n;
    let built: Vec<(Vec<(usize, f64)>, f64)> = (0..n)
        .into_par_iter()
        .map(|cell| {
            let mut rng = keyed_rng(seed, cell as u64);
            let mut dest: Vec<usize> = Vec::with_capacity(samples_per_cell);
            let mut escaped = 0usize;
            let mut out = vec![0.0; part.dim()];
            for p in stratified_points(part, cell, samples_per_cell, &mut rng) {
                map.apply(&p, &mut out);
                match part.cell_of(&out) {
                    Some(c) => dest.push(c),
                    None => escaped += 1,
                }
            }
            dest.sort_unstable();
            let kept = dest.len();
            let norm = match policy {
                EscapePolicy::Discard => kept as f64,
                EscapePolicy::Absorbing => samples_per_cell as f64,
            };
            let mut row: Vec<(usize, f64)> = Vec::new();
            for c in dest {
                match row.last_mut() {
                    Some((last, w)) if *last == c => *w += 1.0,
                    _ => row.push((c, 1.0)),
                }
            }
            for (_, w) in row.iter_mut() {
                *w /= norm;
            }
            if policy == EscapePolicy::Absorbing && escaped > 0 {
                row.push((absorbing, escaped as f64 / norm));
            }
            (row, escaped as f64 / samples_per_cell as f64)
        })
        .collect();
    let mut rows = Vec::with_capacity(n + 1);
    let mut escaped_mass_per_row = Vec::with_capacity(n + 1);
    let mut uniform_rows = Vec::new();
    for (cell, (row, esc)) in built.into_iter().enumerate() {
        if row.is_empty() {
            uniform_rows.push(cell);
        }
        rows.push(row);
        escaped_mass_per_row.push(esc);
    }
    let states = match policy {
        EscapePolicy::Discard => n,
        EscapePolicy::Absorbing => {
            rows.push(vec![(absorbing, 1.0)]);
            escaped_mass_per_row.push(0.0);
            n + 1
        }
    };
    Ok(TransitionMatrix {
        states,
        rows,
        escaped_mass_per_row,
        uniform_rows,
        policy,
    })
}

impl TransitionMatrix {
    /// `w P`.
    pub fn left_multiply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.states];
        let mut spread = 0.0;
        for (i, row) in self.rows.iter().enumerate() {
            let wi = w[i];
            if wi == 0.0 {
                continue;
            }
            if row.is_empty() {
                spread += wi;
                continue;
            }
            for &(j, p) in row {
                out[j] += wi * p;
            }
        }
        if spread != 0.0 {
            let share = spread / self.states as f64;
            out.iter_mut().for_each(|v| *v += share);
        }
        out
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        if self.rows[i].is_empty() {
            1.0
        } else {
            self.rows[i].iter().map(|(_, p)| p).sum()
        }
    }

    /// Dense row, for small matrices and tests.
    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut r = vec![0.0; self.states];
        if self.rows[i].is_empty() {
            r.iter_mut().for_each(|v| *v = 1.0 / self.states as f64);
        }
        for &(j, p) in &self.rows[i] {
            r[j] = p;
        }
        r
    }

    /// Builds a matrix from dense rows; used for hand-made chains.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut sparse = Vec::with_capacity(n);
        for r in rows {
            check_dim(n, r.len())?;
            if r.iter().any(|p| *p < 0.0 || !p.is_finite()) {
                return Err(Error::InvalidInput("negative or non-finite entry".into()));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("row sums to {s}")));
            }
            sparse.push(r.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(j, p)| (j, *p)).collect());
        }
        Ok(Self {
            states: n,
            rows: sparse,
            escaped_mass_per_row: vec![0.0; n],
            uniform_rows: Vec::new(),
            policy: EscapePolicy::Discard,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvariantDensity {
    /// Probability per state, summing to 1.
    pub weights: Vec<f64>,
    /// `|wP - w|_1`, recomputed after the loop.
    pub residual: f64,
    pub iterations: usize,
}

/// Left power iteration from the uniform vector until `|wP - w|_1 < tol`.
pub fn invariant_density(tm: &TransitionMatrix, tol: f64, max_iters: usize) -> Result<InvariantDensity> {
    let n = tm.states;
    let mut w = vec![1.0 / n as f64; n];
    let mut last = f64::INFINITY;
    for it in 0..max_iters {
        let mut next = tm.left_multiply(&w);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        last = l1_distance(&next, &w);
        w = next;
        if last < tol {
            let check = tm.left_multiply(&w);
            let residual = l1_distance(&check, &w);
            return Ok(InvariantDensity {
                weights: w,
                residual,
                iterations: it + 1,
            });
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
        residual: last,
    })
}

pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    /// Visit frequency per cell over the counted steps inside the box.
    pub weights: Vec<f64>,
    pub counted: u64,
    pub outside: u64,
}

fn in_range(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite() && v.abs() <= OVERFLOW_THRESHOLD)
}

/// Visit counts of the orbit of `start` over steps `burn_in..=steps`.
pub fn orbit_histogram(
    map: &impl PointMap,
    start: &[f64],
    steps: usize,
    burn_in: usize,
    part: &GridPartition,
) -> Result<Histogram> {
    check_dim(map.dim(), start.len())?;
    check_dim(part.dim(), start.len())?;
    if steps == 0 {
        return Err(Error::InvalidInput("at least one step".into()));
    }
    let mut counts = vec![0u64; part.total_cells];
    let (mut counted, mut outside) = (0u64, 0u64);
    let mut cur = start.to_vec();
    let mut next = vec![0.0; cur.len()];
    for k in 0..=steps {
        if k > 0 {
            map.apply(&cur, &mut next);
            if !in_range(&next) {
                return Err(Error::Overflow { step: k, point: next });
            }
            std::mem::swap(&mut cur, &mut next);
        }
        if k < burn_in {
            continue;
        }
        match part.cell_of(&cur) {
            Some(c) => {
                counts[c] += 1;
                counted += 1;
            }
            None => outside += 1,
        }
    }
    let total = counted.max(1) as f64;
    Ok(Histogram {
        weights: counts.iter().map(|&c| c as f64 / total).collect(),
        counted,
        outside,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DoorstepReport {
    /// First step at which the orbit is in each cell; `None` if never.
    pub first_visit_steps: Vec<Option<u64>>,
    /// Step length times the largest first-visit step among visited cells.
    pub t_delta: f64,
    pub unvisited_fraction: f64,
    pub steps_run: u64,
}

/// First-visit step of every cell along the orbit of `start`, stopping at
/// `horizon` or once every cell has been visited.
pub fn doorstep(map: &impl PointMap, start: &[f64], part: &GridPartition, horizon: u64) -> Result<DoorstepReport> {
    check_dim(map.dim(), start.len())?;
    check_dim(part.dim(), start.len())?;
    if horizon == 0 {
        return Err(Error::InvalidInput("horizon must be at least 1".into()));
    }
    let mut first = vec![None; part.total_cells];
    let mut remaining = part.total_cells;
    let mut cur = start.to_vec();
    let mut next = vec![0.0; cur.len()];
    let mut k = 0u64;
    loop {
        if let Some(c) = part.cell_of(&cur) {
            if first[c].is_none() {
                first[c] = Some(k);
                remaining -= 1;
            }
        }
        if remaining == 0 || k == horizon {
            break;
        }
        map.apply(&cur, &mut next);
        if !in_range(&next) {
            break;
        }
        std::mem::swap(&mut cur, &mut next);
        k += 1;
    }
    let max_first = first.iter().flatten().copied().max().unwrap_or(0);
    Ok(DoorstepReport {
        t_delta: map.time_step() * max_first as f64,
        unvisited_fraction: remaining as f64 / part.total_cells as f64,
        first_visit_steps: first,
        steps_run: k,
    })
}

/// Exact cell masses of the beta(1/2,1/2) law, the invariant law of
/// `a -> 4a(1-a)`, on a partition of a one-dimensional box inside `[0, 1]`.
pub fn logistic_cell_masses(part: &GridPartition) -> Result<Vec<f64>> {
    check_dim(1, part.dim())?;
    let w = part.cell_width(0);
    let lo = part.region.lower[0];
    (0..part.total_cells)
        .map(|k| {
            let a = lo + k as f64 * w;
            let b = if k + 1 == part.total_cells { part.region.upper[0] } else { a + w };
            Ok(beta_half_cdf(b.min(1.0))? - beta_half_cdf(a.max(0.0))?)
        })
        .collect()
}
