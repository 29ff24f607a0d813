//! Lorenz case study: the asymptotic iteration at the origin, its
//! orthogonal frame, the split of the exponent into one-dimensional
//! factors, resolvent gaps, oval families around the wings, and the
//! confrontation with long Euler orbits. Also the Hamiltonian case.
//!
//! Coordinates are `(a, b, c)`; the covector is `s = (r, s, t)` with
//! `y = n s`. Factor derivatives use the normalized exponent `s . G`.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::difiter::{CycleReport, DifferentialIteration};
use crate::equilibria::{self, characteristic_polynomial, Equilibrium};
use crate::error::{Error, Result};
use crate::hermite::{beta_half_cdf, hermite_eval_complex, hermite_zeros, ks_statistic, ks_two_sample};
use crate::models;
pub use crate::models::LorenzParams;
use crate::polymap::{PartialLinearDecomposition, Poly, PolyMap};
use crate::region::{keyed_rng, BoxRegion};
use crate::saddle::{asymptotic_iteration, series_exp_derivative, ComplexPoly};

pub fn lorenz_field(p: &LorenzParams) -> PolyMap {
    models::lorenz(p)
}

/// Split with `a` as the linear block.
pub fn lorenz_decomposition(p: &LorenzParams) -> PartialLinearDecomposition {
    PartialLinearDecomposition::decompose(&lorenz_field(p), &[0]).expect("Lorenz is linear in a")
}

/// `G(a1, b, c) = (a1, b + rho a1 - a1 c, c + a1 b)`.
pub fn asymptotic_g(p: &LorenzParams) -> PolyMap {
    asymptotic_iteration(&lorenz_decomposition(p), 1.0, None).expect("dimension 3")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WingFrame {
    pub s_vector: [f64; 3],
    pub mu: f64,
    pub omega_bar: f64,
    pub omega_bar_plus: f64,
    pub omega_bar_minus: f64,
    /// Row-major; columns are the new basis vectors.
    pub t: [[f64; 3]; 3],
}

pub fn wing_frame(p: &LorenzParams, s_vector: [f64; 3]) -> Result<WingFrame> {
    let [r, s, t] = s_vector;
    let mu = (s * s + t * t).sqrt();
    if !(mu > 0.0) || !mu.is_finite() || !r.is_finite() {
        return Err(Error::InvalidInput("the frame needs (s, t) != (0, 0)".into()));
    }
    let alpha = p.alpha().ok_or(Error::Domain {
        what: "rho",
        value: p.rho,
        domain: "(1, inf)",
    })?;
    let k = 1.0 / (mu * SQRT_2);
    let t_mat = [
        [0.0, mu * k, mu * k],
        [s * SQRT_2 * k, -t * k, t * k],
        [t * SQRT_2 * k, s * k, -s * k],
    ];
    let omega_bar = r + s * p.rho;
    let wing = s * alpha * alpha / p.beta;
    Ok(WingFrame {
        s_vector,
        mu,
        omega_bar,
        omega_bar_plus: omega_bar + wing + t * alpha,
        omega_bar_minus: omega_bar + wing - t * alpha,
        t: t_mat,
    })
}

impl WingFrame {
    /// `T u`.
    pub fn apply(&self, u: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, row) in self.t.iter().enumerate() {
            out[i] = row.iter().zip(u).map(|(a, b)| a * b).sum();
        }
        out
    }

    /// `max |T^T T - I|`.
    pub fn orthogonality_error(&self) -> f64 {
        let mut err = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| self.t[k][i] * self.t[k][j]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((dot - target).abs());
            }
        }
        err
    }

    /// Hessian of `Q(a) = -s a c + t b a`.
    pub fn q_matrix(&self) -> [[f64; 3]; 3] {
        let [_, s, t] = self.s_vector;
        [[0.0, t, -s], [t, 0.0, 0.0], [-s, 0.0, 0.0]]
    }

    /// `max |H T_k - lambda_k T_k|` over the columns, with `lambda = (0, -mu, mu)`.
    pub fn eigenvector_error(&self) -> f64 {
        let q = self.q_matrix();
        let lambdas = [0.0, -self.mu, self.mu];
        let mut err = 0.0_f64;
        for (k, l) in lambdas.iter().enumerate() {
            for i in 0..3 {
                let hv: f64 = (0..3).map(|j| q[i][j] * self.t[j][k]).sum();
                err = err.max((hv - l * self.t[i][k]).abs());
            }
        }
        err
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitConvention {
    /// Factors as usually written: quadratic coefficients `-mu` and `+mu`,
    /// the pure exponential on the second variable.
    Printed,
    /// Factors of `s . G(T u)` computed directly: the Hessian eigenvalues
    /// give `-mu/2` and `+mu/2`, and the pure exponential is on `u`.
    Computed,
}

/// `exp(b x + c x^2)` and its `n`-th derivative at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadExpFactor {
    pub variable: &'static str,
    pub linear: f64,
    pub quadratic: f64,
    pub series: Complex64,
    /// `b^n` if `c = 0`, else `k^n H_n(b / 2k)` with `k = sqrt(-c)`.
    pub closed_form: Complex64,
    pub relative_error: f64,
}

impl QuadExpFactor {
    pub fn new(variable: &'static str, linear: f64, quadratic: f64, n: u32) -> Result<Self> {
        let p = ComplexPoly::real(Poly::from_terms(1, [(linear, vec![1]), (quadratic, vec![2])])?);
        let series = series_exp_derivative(&p, &[n])?.value;
        let closed_form = quad_exp_derivative(linear, quadratic, n);
        Ok(Self {
            variable,
            linear,
            quadratic,
            series,
            closed_form,
            relative_error: relative_difference(series, closed_form),
        })
    }
}

/// `d^n exp(b x + c x^2)/dx^n` at 0 in closed form.
pub fn quad_exp_derivative(b: f64, c: f64, n: u32) -> Complex64 {
    if c == 0.0 {
        return Complex64::new(b.powi(n as i32), 0.0);
    }
    let k = Complex64::new(-c, 0.0).sqrt();
    k.powu(n) * hermite_eval_complex(n as usize, Complex64::new(b, 0.0) / (2.0 * k))
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_difference(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaSplit {
    pub convention: SplitConvention,
    pub n: u32,
    pub factors: [QuadExpFactor; 3],
}

pub fn gamma_split(frame: &WingFrame, n: u32, convention: SplitConvention) -> Result<GammaSplit> {
    let (mu, w) = (frame.mu, frame.omega_bar / SQRT_2);
    let factors = match convention {
        SplitConvention::Printed => [
            QuadExpFactor::new("u", w, -mu, n)?,
            QuadExpFactor::new("v", mu, 0.0, n)?,
            QuadExpFactor::new("w", w, mu, n)?,
        ],
        SplitConvention::Computed => [
            QuadExpFactor::new("u", mu, 0.0, n)?,
            QuadExpFactor::new("v", w, -mu / 2.0, n)?,
            QuadExpFactor::new("w", w, mu / 2.0, n)?,
        ],
    };
    Ok(GammaSplit {
        convention,
        n,
        factors,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingCandidate {
    pub name: &'static str,
    /// Hermite argument is `argument_scale * omega / sqrt(mu)`.
    pub argument_scale: f64,
    pub prefactor: f64,
    pub value: f64,
    pub relative_error: f64,
}

/// Which Hermite scaling reproduces `d^n exp(omega u/sqrt2 - mu u^2)` at 0.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HermitePin {
    pub n: u32,
    pub series: f64,
    pub candidates: Vec<ScalingCandidate>,
    pub pinned: &'static str,
    pub pinned_argument_scale: f64,
}

pub fn pin_hermite_scaling(frame: &WingFrame, n: u32) -> Result<HermitePin> {
    let (mu, om) = (frame.mu, frame.omega_bar);
    let p = ComplexPoly::real(Poly::from_terms(1, [(om / SQRT_2, vec![1]), (-mu, vec![2])])?);
    let series = series_exp_derivative(&p, &[n])?.value.re;
    let specs: [(&'static str, f64, f64); 3] = [
        ("omega/(2 sqrt(mu)) with (-sqrt(2 mu))^n", 0.5, (-(2.0 * mu).sqrt()).powi(n as i32)),
        ("omega/(2 sqrt(2 mu)) with sqrt(mu)^n", 0.5 / SQRT_2, mu.sqrt().powi(n as i32)),
        ("omega/(2 sqrt(mu)) with sqrt(mu)^n", 0.5, mu.sqrt().powi(n as i32)),
    ];
    let candidates: Vec<ScalingCandidate> = specs
        .iter()
        .map(|&(name, scale, pref)| {
            let value = pref * hermite_eval_complex(n as usize, Complex64::new(scale * om / mu.sqrt(), 0.0)).re;
            ScalingCandidate {
                name,
                argument_scale: scale,
                prefactor: pref,
                value,
                relative_error: relative_difference(Complex64::new(series, 0.0), Complex64::new(value, 0.0)),
            }
        })
        .collect();
    let best = candidates
        .iter()
        .min_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
        .expect("non-empty");
    Ok(HermitePin {
        n,
        series,
        pinned: best.name,
        pinned_argument_scale: best.argument_scale,
        candidates,
    })
}

/// Closed forms of the gap in the `u` basis: `printed` uses `(2 i mu)^n`,
/// `computed` the `(i mu / 2)^n` implied by the computed split.
pub fn resolvent_gap_closed_form(frame: &WingFrame, n: u32, convention: SplitConvention) -> Result<Complex64> {
    if n > 200 {
        return Err(Error::ResourceLimit("closed form limited to n <= 200".into()));
    }
    let (mu, om, r) = (frame.mu, frame.omega_bar, frame.s_vector[0]);
    let i = Complex64::i();
    let x = Complex64::new(om / (2.0 * mu.sqrt()), 0.0);
    let h = hermite_eval_complex(n as usize, x) * hermite_eval_complex(n as usize, x / i);
    let pref = match convention {
        SplitConvention::Printed => (2.0 * mu * i).powu(n),
        SplitConvention::Computed => (0.5 * mu * i).powu(n),
    };
    Ok(mu.powi(n as i32) * (Complex64::new((r * r / 2.0).powi(n as i32), 0.0) - h * pref))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapComparison {
    pub n: u32,
    pub s_vector: [f64; 3],
    /// Series gap of `s . G` with multi-index `(n, n, n)` in `(a1, b, c)`.
    pub series_a_basis: Complex64,
    /// Series gap of `s . G(T u)` with multi-index `(n, n, n)` in `(u, v, w)`.
    pub series_u_basis: Complex64,
    pub closed_printed: Complex64,
    pub closed_computed: Complex64,
    pub rel_a_basis_vs_printed: f64,
    pub rel_u_basis_vs_printed: f64,
    pub rel_u_basis_vs_computed: f64,
}

/// `s . G(T u)` as a polynomial in `(u, v, w)`.
fn exponent_in_frame(p: &LorenzParams, frame: &WingFrame) -> Result<Poly> {
    let g = asymptotic_g(p).dot(&frame.s_vector)?;
    let subs: Vec<Poly> = frame
        .t
        .iter()
        .map(|row| {
            Poly::from_terms(3, (0..3).map(|k| {
                let mut pw = vec![0; 3];
                pw[k] = 1;
                (row[k], pw)
            }))
        })
        .collect::<Result<_>>()?;
    g.compose(&subs)
}

pub fn gap_comparison(p: &LorenzParams, s_vector: [f64; 3], n: u32) -> Result<GapComparison> {
    let frame = wing_frame(p, s_vector)?;
    let idx = [n, n, n];
    let g = ComplexPoly::real(asymptotic_g(p).dot(&s_vector)?);
    let pure_a: f64 = s_vector.iter().map(|v| v.powi(n as i32)).product();
    let series_a_basis = Complex64::new(pure_a, 0.0) - series_exp_derivative(&g, &idx)?.value;

    let inner = exponent_in_frame(p, &frame)?;
    // s . (T u), the identity-map exponent in the same basis
    let su: Vec<f64> = (0..3).map(|k| (0..3).map(|i| s_vector[i] * frame.t[i][k]).sum()).collect();
    let pure_u = ComplexPoly::real(Poly::from_terms(
        3,
        su.iter().enumerate().map(|(k, c)| {
            let mut pw = vec![0; 3];
            pw[k] = 1;
            (*c, pw)
        }),
    )?);
    let series_u_basis = series_exp_derivative(&pure_u, &idx)?.value
        - series_exp_derivative(&ComplexPoly::real(inner), &idx)?.value;

    let closed_printed = resolvent_gap_closed_form(&frame, n, SplitConvention::Printed)?;
    let closed_computed = resolvent_gap_closed_form(&frame, n, SplitConvention::Computed)?;
    Ok(GapComparison {
        n,
        s_vector,
        rel_a_basis_vs_printed: relative_difference(series_a_basis, closed_printed),
        rel_u_basis_vs_printed: relative_difference(series_u_basis, closed_printed),
        rel_u_basis_vs_computed: relative_difference(series_u_basis, closed_computed),
        series_a_basis,
        series_u_basis,
        closed_printed,
        closed_computed,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OvalFamily {
    pub center_label: &'static str,
    pub center: [f64; 3],
    pub omega: f64,
    /// Zeros of `H_n`, the admissible values of `omega / (2 sqrt(mu))`.
    pub chi_values: Vec<f64>,
    /// `(omega / 2 chi)^2`; `None` for the degenerate `chi = 0`.
    pub radii: Vec<Option<f64>>,
}

/// Oval families centred on the origin and on both wings.
pub fn oval_family(p: &LorenzParams, frame: &WingFrame, hermite_n: usize) -> Result<[OvalFamily; 3]> {
    let zeros = hermite_zeros(hermite_n)?.zeros;
    let build = |label, center: [f64; 3], omega: f64| OvalFamily {
        center_label: label,
        center,
        omega,
        radii: zeros
            .iter()
            .map(|&chi| (chi != 0.0).then(|| (omega / (2.0 * chi)).powi(2)))
            .collect(),
        chi_values: zeros.clone(),
    };
    Ok([
        build("origin", [0.0; 3], frame.omega_bar),
        build("alpha_plus", p.wing_plus(), frame.omega_bar_plus),
        build("alpha_minus", p.wing_minus(), frame.omega_bar_minus),
    ])
}

/// `s (rho - c) + t b`, the zero set where neither wing dominates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CommunicationSurface {
    pub s: f64,
    pub t: f64,
    pub rho: f64,
}

impl CommunicationSurface {
    pub fn new(p: &LorenzParams, s_vector: [f64; 3]) -> Self {
        Self {
            s: s_vector[1],
            t: s_vector[2],
            rho: p.rho,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.s * (self.rho - x[2]) + self.t * x[1]
    }
}

/// Counts strict sign changes of a sequence, skipping exact zeros.
#[derive(Clone, Debug, Default)]
pub struct CrossingCounter {
    last: f64,
    pub crossings: u64,
}

impl CrossingCounter {
    pub fn push(&mut self, v: f64) {
        if v == 0.0 {
            return;
        }
        if self.last != 0.0 && (v > 0.0) != (self.last > 0.0) {
            self.crossings += 1;
        }
        self.last = v;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConfrontationConfig {
    pub params: LorenzParams,
    pub delta: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub start: [f64; 3],
    pub s_vector: [f64; 3],
    pub region: BoxRegion,
    /// Half-thickness of the slab around the plane `c = r + s rho`.
    pub slab: f64,
    pub hermite_n: usize,
}

impl ConfrontationConfig {
    pub fn classic(steps: usize) -> Self {
        let k = 1.0 / SQRT_2;
        Self {
            params: LorenzParams::classic(),
            delta: 0.005,
            steps,
            burn_in: steps / 10,
            start: [1.0, 1.0, 1.0],
            s_vector: [0.0, k, k],
            region: BoxRegion::new(vec![-30.0, -30.0, 0.0], vec![30.0, 30.0, 60.0]).expect("valid box"),
            slab: 0.5,
            hermite_n: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RadialLaw {
    pub wing: &'static str,
    pub samples: usize,
    /// Radii scaled by their maximum, against beta(1/2,1/2) on [0, 1].
    pub ks_beta: f64,
    /// Same scaled radii against the scaled predicted oval radii.
    pub ks_predicted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Confrontation {
    pub s_vector: [f64; 3],
    pub steps: usize,
    pub counted: usize,
    pub inside_box: bool,
    pub first_exit_step: Option<usize>,
    pub wing_plus: u64,
    pub wing_minus: u64,
    pub occupancy_ratio: f64,
    pub crossings: u64,
    /// Crossings per unit time.
    pub crossing_rate: f64,
    pub slab_level: f64,
    pub radial: Vec<RadialLaw>,
}

/// Streams one Euler orbit and gathers wing occupancy (nearest wing in
/// `(a, b)`), crossings of the communication surface and radial samples
/// in the slab around `c = r + s rho`.
pub fn confront(cfg: &ConfrontationConfig) -> Result<Confrontation> {
    Ok(confront_sweep(cfg, &[cfg.s_vector])?.remove(0))
}

struct DirectionTally {
    surface: CommunicationSurface,
    level: f64,
    counter: CrossingCounter,
    radii_plus: Vec<f64>,
    radii_minus: Vec<f64>,
}

/// One orbit, statistics for every covector in `directions`.
pub fn confront_sweep(cfg: &ConfrontationConfig, directions: &[[f64; 3]]) -> Result<Vec<Confrontation>> {
    let p = &cfg.params;
    let it = DifferentialIteration::ode(lorenz_field(p), cfg.delta)?;
    let frames = directions
        .iter()
        .map(|s| wing_frame(p, *s))
        .collect::<Result<Vec<_>>>()?;
    let mut tallies: Vec<DirectionTally> = frames
        .iter()
        .map(|f| DirectionTally {
            surface: CommunicationSurface::new(p, f.s_vector),
            level: f.omega_bar,
            counter: CrossingCounter::default(),
            radii_plus: Vec::new(),
            radii_minus: Vec::new(),
        })
        .collect();
    let (wp, wm) = (p.wing_plus(), p.wing_minus());
    let (mut plus, mut minus) = (0u64, 0u64);
    let mut first_exit = None;
    let mut counted = 0usize;
    it.for_each_point(&cfg.start, cfg.steps, 0, |k, x| {
        if first_exit.is_none() && !cfg.region.contains(x) {
            first_exit = Some(k);
        }
        if k < cfg.burn_in {
            return;
        }
        counted += 1;
        let dp = (x[0] - wp[0]).hypot(x[1] - wp[1]);
        let dm = (x[0] - wm[0]).hypot(x[1] - wm[1]);
        let nearer_plus = dp <= dm;
        if nearer_plus {
            plus += 1;
        } else {
            minus += 1;
        }
        for t in tallies.iter_mut() {
            t.counter.push(t.surface.value(x));
            if (x[2] - t.level).abs() <= cfg.slab {
                if nearer_plus {
                    t.radii_plus.push(dp);
                } else {
                    t.radii_minus.push(dm);
                }
            }
        }
    })?;
    frames
        .iter()
        .zip(tallies)
        .map(|(frame, t)| {
            let families = oval_family(p, frame, cfg.hermite_n)?;
            let radial = vec![
                radial_law("alpha_plus", &t.radii_plus, &families[1]),
                radial_law("alpha_minus", &t.radii_minus, &families[2]),
            ];
            Ok(Confrontation {
                s_vector: frame.s_vector,
                steps: cfg.steps,
                counted,
                inside_box: first_exit.is_none(),
                first_exit_step: first_exit,
                wing_plus: plus,
                wing_minus: minus,
                occupancy_ratio: if minus == 0 { f64::INFINITY } else { plus as f64 / minus as f64 },
                crossings: t.counter.crossings,
                crossing_rate: t.counter.crossings as f64 / (counted.max(1) as f64 * cfg.delta),
                slab_level: t.level,
                radial,
            })
        })
        .collect()
}

/// `k * k` directions with `r, s, t > 0` on the unit sphere, midpoints of a
/// polar-azimuth grid over the positive octant.
pub fn sweep_directions(k: usize) -> Vec<[f64; 3]> {
    let h = std::f64::consts::FRAC_PI_2 / k as f64;
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        let theta = (i as f64 + 0.5) * h;
        for j in 0..k {
            let phi = (j as f64 + 0.5) * h;
            out.push([theta.cos(), theta.sin() * phi.cos(), theta.sin() * phi.sin()]);
        }
    }
    out
}

fn scale_to_unit(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(0.0, f64::max);
    if max > 0.0 {
        v.iter().map(|x| x / max).collect()
    } else {
        v.to_vec()
    }
}

fn radial_law(wing: &'static str, radii: &[f64], family: &OvalFamily) -> RadialLaw {
    let observed = scale_to_unit(radii);
    let predicted: Vec<f64> = family.radii.iter().flatten().copied().collect();
    let predicted = scale_to_unit(&predicted);
    RadialLaw {
        wing,
        samples: radii.len(),
        ks_beta: ks_statistic(&observed, |x| beta_half_cdf(x.clamp(0.0, 1.0)).expect("clamped")),
        ks_predicted: ks_two_sample(&observed, &predicted),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CharacteristicCheck {
    /// Ascending coefficients of `det(J - lambda I)`.
    pub coefficients: Vec<f64>,
    /// Largest relative error against the reference form, best overall sign.
    pub max_rel_err: f64,
}

/// `(beta + l)[(sigma + l)(1 + l) - sigma rho]`.
pub fn origin_characteristic(p: &LorenzParams, l: f64) -> f64 {
    (p.beta + l) * ((p.sigma + l) * (1.0 + l) - p.sigma * p.rho)
}

/// `l (beta + l)(1 + sigma + l) - alpha^2 (l + 2 sigma)`, as usually printed.
pub fn wing_characteristic_printed(p: &LorenzParams, l: f64) -> f64 {
    let a2 = p.beta * (p.rho - 1.0);
    l * (p.beta + l) * (1.0 + p.sigma + l) - a2 * (l + 2.0 * p.sigma)
}

/// `l (beta + l)(1 + sigma + l) + alpha^2 (l + 2 sigma)`, from expanding the
/// determinant at the wing.
pub fn wing_characteristic_corrected(p: &LorenzParams, l: f64) -> f64 {
    let a2 = p.beta * (p.rho - 1.0);
    l * (p.beta + l) * (1.0 + p.sigma + l) + a2 * (l + 2.0 * p.sigma)
}

/// Compares `det(J(at) - lambda I)` with `reference` at `samples` points
/// drawn from `[-30, 30]`, allowing one overall sign.
pub fn check_characteristic(
    p: &LorenzParams,
    at: &[f64],
    reference: impl Fn(&LorenzParams, f64) -> f64,
    samples: usize,
    seed: u64,
) -> Result<CharacteristicCheck> {
    let coefficients = characteristic_polynomial(&lorenz_field(p), at)?;
    let mut rng = keyed_rng(seed, 0);
    let lambdas: Vec<f64> = (0..samples).map(|_| rng.random_range(-30.0..30.0)).collect();
    let err = |sign: f64| {
        lambdas
            .iter()
            .map(|&l| {
                let det = equilibria::eval_upoly(&coefficients, Complex64::new(l, 0.0)).re;
                let r = sign * reference(p, l);
                (det - r).abs() / det.abs().max(r.abs()).max(f64::MIN_POSITIVE)
            })
            .fold(0.0, f64::max)
    };
    Ok(CharacteristicCheck {
        max_rel_err: err(1.0).min(err(-1.0)),
        coefficients,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LorenzReport {
    pub params: LorenzParams,
    pub alpha: f64,
    pub delta: f64,
    pub equilibria: Vec<Equilibrium>,
    pub origin_characteristic: CharacteristicCheck,
    pub wing_characteristic_printed: CharacteristicCheck,
    pub wing_characteristic_corrected: CharacteristicCheck,
    pub frame: WingFrame,
    pub frame_orthogonality_error: f64,
    pub frame_eigenvector_error: f64,
    pub splits: Vec<GammaSplit>,
    pub hermite_pin: HermitePin,
    pub gaps: Vec<GapComparison>,
    pub ovals: [OvalFamily; 3],
    pub confrontation: Option<Confrontation>,
}

/// Everything deterministic about the case study; `confront_steps = 0`
/// skips the orbit.
pub fn lorenz_report(cfg: &ConfrontationConfig, gap_orders: &[u32], seed: u64) -> Result<LorenzReport> {
    let p = cfg.params;
    let alpha = p.alpha().ok_or(Error::Domain {
        what: "rho",
        value: p.rho,
        domain: "(1, inf)",
    })?;
    let field = lorenz_field(&p);
    let search = equilibria::find_zeros(&field, &cfg.region, 8, cfg.delta)?;
    let frame = wing_frame(&p, cfg.s_vector)?;
    let n_split = gap_orders.iter().copied().max().unwrap_or(4);
    Ok(LorenzReport {
        params: p,
        alpha,
        delta: cfg.delta,
        equilibria: search.zeros,
        origin_characteristic: check_characteristic(&p, &[0.0; 3], origin_characteristic, 20, seed)?,
        wing_characteristic_printed: check_characteristic(&p, &p.wing_plus(), wing_characteristic_printed, 20, seed)?,
        wing_characteristic_corrected: check_characteristic(
            &p,
            &p.wing_plus(),
            wing_characteristic_corrected,
            20,
            seed,
        )?,
        frame_orthogonality_error: frame.orthogonality_error(),
        frame_eigenvector_error: frame.eigenvector_error(),
        splits: vec![
            gamma_split(&frame, n_split, SplitConvention::Printed)?,
            gamma_split(&frame, n_split, SplitConvention::Computed)?,
        ],
        hermite_pin: pin_hermite_scaling(&frame, n_split)?,
        gaps: gap_orders
            .iter()
            .map(|&n| gap_comparison(&p, cfg.s_vector, n))
            .collect::<Result<_>>()?,
        ovals: oval_family(&p, &frame, cfg.hermite_n)?,
        confrontation: if cfg.steps > 0 { Some(confront(cfg)?) } else { None },
        frame,
    })
}

/// Symplectic field of a scalar `H(p_1..p_k, q_1..q_k)`:
/// `dp/dt = -dH/dq`, `dq/dt = dH/dp`.
pub fn hamilton_build(h: &PolyMap) -> Result<PolyMap> {
    if h.dim_out() != 1 {
        return Err(Error::InvalidInput("the Hamiltonian must be scalar".into()));
    }
    let d = h.dim_in();
    if !d.is_multiple_of(2) {
        return Err(Error::InvalidInput("phase space needs (p, q) pairs".into()));
    }
    let k = d / 2;
    let hs = h.component(0);
    let comps = (0..d)
        .map(|i| if i < k { hs.derivative(i + k).scale(-1.0) } else { hs.derivative(i - k) })
        .collect();
    PolyMap::new(d, comps)
}

/// `sum p_i^2 / (2 m_i) + U(q)` on `(p, q)`; `potential` lives on `q`.
pub fn newtonian_hamiltonian(potential: &Poly, masses: &[f64]) -> Result<PolyMap> {
    let k = masses.len();
    if potential.dim() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: potential.dim(),
        });
    }
    if masses.iter().any(|m| !(*m > 0.0)) {
        return Err(Error::InvalidInput("masses must be positive".into()));
    }
    let positions: Vec<usize> = (k..2 * k).collect();
    let mut h = potential.embed(2 * k, &positions);
    for (i, m) in masses.iter().enumerate() {
        h = &h + &Poly::var(2 * k, i).pow(2).scale(0.5 / m);
    }
    PolyMap::new(2 * k, vec![h])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HamiltonReport {
    pub lagrange_points: Vec<Equilibrium>,
    pub characteristic: Vec<Vec<f64>>,
    pub cycle: Option<CycleReport>,
    pub cycle_tolerance: f64,
    /// Mean of `dH/dq` and `dH/dp` over the detected cycle.
    pub mean_dh_dq: Vec<f64>,
    pub mean_dh_dp: Vec<f64>,
    pub energy_start: f64,
    pub energy_end: f64,
    /// Relative energy change per detected period.
    pub energy_drift_per_period: Option<f64>,
}

/// Euler orbit of the Hamiltonian field with equilibria and cycle data.
/// The cycle tolerance is `10 delta max(1, |start|_inf)`: Euler cycles
/// close only up to `O(delta)` per period.
pub fn hamilton_case(
    h: &PolyMap,
    start: &[f64],
    delta: f64,
    steps: usize,
    region: &BoxRegion,
) -> Result<HamiltonReport> {
    let field = hamilton_build(h)?;
    let k = field.dim_in() / 2;
    let zeros = equilibria::find_zeros(&field, region, 8, delta)?.zeros;
    let characteristic = zeros
        .iter()
        .map(|z| characteristic_polynomial(&field, &z.location))
        .collect::<Result<_>>()?;
    let it = DifferentialIteration::ode(field, delta)?;
    let orbit = it.orbit(start, steps, 0)?;
    let scale = start.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let tol = 10.0 * delta * scale;
    let cycle = it.detect_cycle(&orbit, tol);
    let hs = h.component(0);
    let energy_start = hs.eval(start);
    let energy_end = hs.eval(orbit.last().expect("non-empty"));
    let (mean_dh_dq, mean_dh_dp) = match &cycle {
        Some(c) => {
            let m = &c.mean_field_residual;
            (m[..k].iter().map(|v| -v).collect(), m[k..].to_vec())
        }
        None => (Vec::new(), Vec::new()),
    };
    let energy_drift_per_period = cycle.as_ref().filter(|c| c.period_steps > 1).map(|c| {
        let periods = steps as f64 / c.period_steps as f64;
        (energy_end - energy_start) / energy_start.abs().max(f64::MIN_POSITIVE) / periods
    });
    Ok(HamiltonReport {
        lagrange_points: zeros,
        characteristic,
        cycle,
        cycle_tolerance: tol,
        mean_dh_dq,
        mean_dh_dp,
        energy_start,
        energy_end,
        energy_drift_per_period,
    })
}
