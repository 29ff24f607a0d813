use num_complex::Complex64;
use serde::Serialize;

use pfdyn_core::difiter::{CycleReport, DifferentialIteration};
use pfdyn_core::equilibria::{self, FaultReport, ZeroSearch};
use pfdyn_core::hermite::{hermite_zeros, law_comparison, LawComparison, Scaling};
use pfdyn_core::lorenzlab::{self, ConfrontationConfig, Confrontation, LorenzParams, LorenzReport};
use pfdyn_core::polymap::{PartialLinearDecomposition, PartialLinearSplit};
use pfdyn_core::region::{parse_list, BoxRegion};
use pfdyn_core::saddle::{hessian_yf, resolvent_gap, CriticalSearch, PlancherelRotach, ResolventGap, YfHessian};
use pfdyn_core::system::System;
use pfdyn_core::ulam::{self, EscapePolicy, GridPartition};

use crate::args::*;
use crate::builtin;
use crate::error::CliError;
use crate::output::{emit_json, fmt_f64, write_density, CsvWriter, Report, SystemSummary, REPORT_FORMAT, REPORT_VERSION};

fn input(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

fn point(s: &str, dim: usize, what: &str) -> Result<Vec<f64>, CliError> {
    let v = parse_list(s)?;
    if v.len() != dim {
        return Err(input(format!("--{what} needs {dim} values, got {}", v.len())));
    }
    Ok(v)
}

struct Prepared {
    system: System,
    default_box: Option<BoxRegion>,
    iteration: DifferentialIteration,
}

impl Prepared {
    fn summary(&self) -> SystemSummary {
        SystemSummary::new(
            &self.system,
            self.iteration.blocks().to_vec(),
            self.iteration.tau().to_vec(),
            self.iteration.delta().to_vec(),
        )
    }

    fn region(&self, arg: &Option<String>) -> Result<BoxRegion, CliError> {
        let r = match arg {
            Some(s) => s.parse::<BoxRegion>()?,
            None => self
                .default_box
                .clone()
                .ok_or_else(|| input("--box is required for a custom system"))?,
        };
        if r.dim() != self.system.field.dim_in() {
            return Err(input(format!(
                "box has dimension {}, system has {}",
                r.dim(),
                self.system.field.dim_in()
            )));
        }
        Ok(r)
    }
}

fn prepare(args: &SystemArgs) -> Result<Prepared, CliError> {
    let loaded = builtin::load(args)?;
    let sys = loaded.system;
    let d = sys.field.dim_in();
    let blocks = sys.blocks.clone().unwrap_or_else(|| vec![0; d]);
    let k = blocks.iter().copied().max().map_or(1, |m| m + 1);
    let tau = match &args.tau {
        Some(t) => parse_list(t)?,
        None => sys.tau.clone().unwrap_or_else(|| vec![1.0 / k as f64; k]),
    };
    let mut delta = parse_list(&args.delta)?;
    if delta.len() == 1 {
        delta = vec![delta[0]; k];
    }
    let iteration = DifferentialIteration::new(sys.field.clone(), delta, blocks, tau)?;
    Ok(Prepared {
        system: sys,
        default_box: loaded.default_box,
        iteration,
    })
}

fn report<T: Serialize>(cli: &Cli, system: Option<SystemSummary>, result: T) -> Report<'_, T> {
    Report {
        format: REPORT_FORMAT,
        version: REPORT_VERSION,
        command: cli.command.verb(),
        seed: cli.seed,
        threads: rayon::current_num_threads(),
        config: cli,
        system,
        result,
    }
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Analyze(a) => analyze(cli, a),
        Command::Simulate(a) => simulate(cli, a),
        Command::Saddle(a) => saddle(cli, a),
        Command::Hermite(a) => hermite(cli, a),
        Command::Ulam(a) => ulam_cmd(cli, a),
        Command::Lorenz(a) => lorenz(cli, a),
        Command::Doorstep(a) => doorstep(cli, a),
    }
}

#[derive(Serialize)]
struct AnalyzeResult {
    region: BoxRegion,
    grid: usize,
    search: ZeroSearch,
    characteristic_polynomials: Vec<Vec<f64>>,
    faults: Vec<FaultReport>,
    partial_linear_splits: Vec<PartialLinearSplit>,
}

fn default_grid(dim: usize) -> usize {
    match dim {
        1 => 64,
        2 => 16,
        3 => 8,
        _ => 4,
    }
}

fn analyze(cli: &Cli, a: &AnalyzeArgs) -> Result<(), CliError> {
    let p = prepare(&a.system)?;
    let region = p.region(&a.region)?;
    let field = &p.system.field;
    let grid = a.grid.unwrap_or_else(|| default_grid(field.dim_in()));
    let delta = p.iteration.delta().iter().copied().fold(0.0, f64::max);
    let search = equilibria::find_zeros(field, &region, grid, delta)?;
    let characteristic_polynomials = search
        .zeros
        .iter()
        .map(|z| equilibria::characteristic_polynomial(field, &z.location))
        .collect::<Result<_, _>>()?;
    let faults = search
        .zeros
        .iter()
        .map(|z| equilibria::lemma1_analysis(z, p.iteration.blocks(), p.iteration.tau()))
        .collect::<Result<_, _>>()?;
    let partial_linear_splits = if field.dim_in() <= 12 {
        PartialLinearDecomposition::search(field)?
    } else {
        Vec::new()
    };
    let result = AnalyzeResult {
        region,
        grid,
        search,
        characteristic_polynomials,
        faults,
        partial_linear_splits,
    };
    emit_json(&report(cli, Some(p.summary()), result), a.out.as_deref())
}

/// Coordinates kept in memory for the cycle search.
const CYCLE_STORE_LIMIT: usize = 50_000_000;

#[derive(Serialize)]
struct SimulateResult {
    steps: usize,
    burn_in: usize,
    start: Vec<f64>,
    final_point: Vec<f64>,
    min: Vec<f64>,
    max: Vec<f64>,
    cycle_tolerance: f64,
    cycle: Option<CycleReport>,
    /// False when the orbit was too long to hold in memory for the search.
    cycle_searched: bool,
    orbit_csv: String,
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> Result<(), CliError> {
    let p = prepare(&a.system)?;
    let d = p.system.field.dim_in();
    let start = point(&a.start, d, "start")?;
    if a.burn_in > a.steps {
        return Err(input("--burn-in exceeds --steps"));
    }
    let delta = p.iteration.delta().iter().copied().fold(0.0, f64::max);
    let scale = start.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let tol = a.cycle_tol.unwrap_or(10.0 * delta * scale);
    if !(tol > 0.0) {
        return Err(input("--cycle-tol must be positive"));
    }
    let mut header = vec!["step".to_string()];
    header.extend(p.system.vars.iter().cloned());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = CsvWriter::create(&a.out, &header)?;
    let (mut lo, mut hi) = (vec![f64::INFINITY; d], vec![f64::NEG_INFINITY; d]);
    let mut write_err = None;
    let run = p.iteration.for_each_point(&start, a.steps, a.burn_in, |k, x| {
        if write_err.is_some() {
            return;
        }
        for i in 0..d {
            lo[i] = lo[i].min(x[i]);
            hi[i] = hi[i].max(x[i]);
        }
        let row = std::iter::once(k.to_string()).chain(x.iter().map(|v| fmt_f64(*v)));
        if let Err(e) = csv.raw_row(row) {
            write_err = Some(e);
        }
    });
    if let Some(e) = write_err {
        return Err(e);
    }
    csv.finish()?;
    let final_point = run?;
    let stored = (a.steps + 1 - a.burn_in).saturating_mul(d);
    let orbit = if stored <= CYCLE_STORE_LIMIT {
        Some(p.iteration.orbit(&start, a.steps, a.burn_in)?)
    } else {
        None
    };
    let result = SimulateResult {
        steps: a.steps,
        burn_in: a.burn_in,
        final_point,
        start,
        min: lo,
        max: hi,
        cycle_tolerance: tol,
        cycle: orbit.as_ref().and_then(|o| p.iteration.detect_cycle(o, tol)),
        cycle_searched: orbit.is_some(),
        orbit_csv: a.out.clone(),
    };
    emit_json(&report(cli, Some(p.summary()), result), a.report.as_deref())
}

#[derive(Serialize)]
struct SaddleResult {
    y: Vec<f64>,
    n: Vec<u32>,
    critical: CriticalSearch,
    resolvent_gap: Option<ResolventGap>,
    resolvent_gap_error: Option<String>,
    yf_hessian_at: Vec<f64>,
    yf_hessian: YfHessian,
}

fn saddle(cli: &Cli, a: &SaddleArgs) -> Result<(), CliError> {
    let p = prepare(&a.system)?;
    let d = p.system.field.dim_in();
    let y = point(&a.y, d, "y")?;
    let n_raw = point(&a.n, d, "n")?;
    if n_raw.iter().any(|v| !(*v >= 1.0) || v.fract() != 0.0 || *v > u32::MAX as f64) {
        return Err(input("--n entries must be positive integers"));
    }
    let n: Vec<u32> = n_raw.iter().map(|v| *v as u32).collect();
    if a.starts == 0 {
        return Err(input("--starts must be positive"));
    }
    let at = match &a.at {
        Some(s) => point(s, d, "at")?,
        None => vec![0.0; d],
    };
    let yc: Vec<Complex64> = y.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let pr = PlancherelRotach::from_iteration(&p.iteration, yc, n.clone())?;
    let critical = pr.critical_points(a.starts, cli.seed)?;
    let (resolvent_gap, resolvent_gap_error) = match resolvent_gap(&pr) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let result = SaddleResult {
        yf_hessian: hessian_yf(&p.system.field, &y, &at)?,
        yf_hessian_at: at,
        y,
        n,
        critical,
        resolvent_gap,
        resolvent_gap_error,
    };
    emit_json(&report(cli, Some(p.summary()), result), a.out.as_deref())
}

#[derive(Serialize)]
struct HermiteResult {
    n: usize,
    zeros_csv: String,
    largest_zero: f64,
    weight_sum: f64,
    laws: Option<Vec<LawComparison>>,
}

fn hermite(cli: &Cli, a: &HermiteArgs) -> Result<(), CliError> {
    let zs = hermite_zeros(a.n)?;
    let mut csv = CsvWriter::create(&a.out, &["index", "zero", "weight"])?;
    for (i, (z, w)) in zs.zeros.iter().zip(&zs.weights).enumerate() {
        csv.raw_row([i.to_string(), fmt_f64(*z), fmt_f64(*w)])?;
    }
    csv.finish()?;
    let laws = match &a.laws {
        Some(path) => {
            if a.n < 10 {
                return Err(input("--laws needs --n >= 10"));
            }
            let laws = [Scaling::ByLargestZero, Scaling::BySqrt2n]
                .into_iter()
                .map(|s| law_comparison(&zs, s))
                .collect::<Result<Vec<_>, _>>()?;
            emit_json(&laws, Some(path))?;
            Some(laws)
        }
        None => None,
    };
    let result = HermiteResult {
        n: a.n,
        zeros_csv: a.out.clone(),
        largest_zero: zs.zeros.last().copied().unwrap_or(0.0),
        weight_sum: zs.weights.iter().sum(),
        laws,
    };
    emit_json(&report(cli, None, result), a.report.as_deref())
}

fn cells(spec: &str, d: usize) -> Result<Vec<usize>, CliError> {
    let raw = parse_list(spec)?;
    let raw = if raw.len() == 1 { vec![raw[0]; d] } else { raw };
    if raw.len() != d {
        return Err(input(format!("--cells needs 1 or {d} values")));
    }
    raw.iter()
        .map(|v| {
            if *v >= 1.0 && v.fract() == 0.0 && *v <= (1u64 << 28) as f64 {
                Ok(*v as usize)
            } else {
                Err(input(format!("cell count `{v}` must be a positive integer")))
            }
        })
        .collect()
}

#[derive(Serialize)]
struct UlamResult {
    region: BoxRegion,
    cells_per_axis: Vec<usize>,
    samples_per_cell: usize,
    policy: EscapePolicy,
    states: usize,
    iterations: usize,
    residual: f64,
    mean_escaped_mass: f64,
    uniform_rows: usize,
    absorbed_mass: Option<f64>,
    densest_cell_center: Vec<f64>,
    densest_cell_mass: f64,
    density_file: String,
    marginals_csv: String,
}

fn ulam_cmd(cli: &Cli, a: &UlamArgs) -> Result<(), CliError> {
    let p = prepare(&a.system)?;
    let region = p.region(&a.region)?;
    let d = region.dim();
    let per_axis = cells(&a.cells, d)?;
    let part = GridPartition::new(region.clone(), per_axis.clone())?;
    if !(a.tol > 0.0) {
        return Err(input("--tol must be positive"));
    }
    let policy = match a.policy {
        PolicyArg::Discard => EscapePolicy::Discard,
        PolicyArg::Absorbing => EscapePolicy::Absorbing,
    };
    let tm = ulam::build_transition(&p.iteration, &part, a.samples, cli.seed, policy)?;
    let dens = ulam::invariant_density(&tm, a.tol, a.max_iters)?;
    write_density(&a.out, &per_axis, &region.lower, &region.upper, &dens.weights)?;
    let mut csv = CsvWriter::create(&a.marginals, &["axis", "cell", "center", "mass"])?;
    for (axis, m) in part.marginals(&dens.weights).iter().enumerate() {
        let w = part.cell_width(axis);
        for (k, mass) in m.iter().enumerate() {
            let center = region.lower[axis] + (k as f64 + 0.5) * w;
            csv.raw_row([axis.to_string(), k.to_string(), fmt_f64(center), fmt_f64(*mass)])?;
        }
    }
    csv.finish()?;
    let (best, best_mass) = dens.weights[..part.total_cells]
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, w)| if *w > acc.1 { (i, *w) } else { acc });
    let result = UlamResult {
        cells_per_axis: per_axis,
        samples_per_cell: a.samples,
        policy,
        states: tm.states,
        iterations: dens.iterations,
        residual: dens.residual,
        mean_escaped_mass: tm.escaped_mass_per_row.iter().sum::<f64>() / part.total_cells as f64,
        uniform_rows: tm.uniform_rows.len(),
        absorbed_mass: (tm.states > part.total_cells).then(|| dens.weights[part.total_cells]),
        densest_cell_center: part.cell_center(best),
        densest_cell_mass: best_mass,
        density_file: a.out.clone(),
        marginals_csv: a.marginals.clone(),
        region,
    };
    emit_json(&report(cli, Some(p.summary()), result), a.report.as_deref())
}

#[derive(Serialize)]
struct LorenzResult {
    #[serde(flatten)]
    report: LorenzReport,
    sweep: Option<Vec<Confrontation>>,
}

fn lorenz(cli: &Cli, a: &LorenzArgs) -> Result<(), CliError> {
    let params = LorenzParams::new(a.sigma, a.rho, a.beta)?;
    if params.alpha().is_none() {
        return Err(input("the wing analysis needs --rho > 1"));
    }
    let raw = point(&a.covector, 3, "covector")?;
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(input("--covector must be a non-zero finite vector"));
    }
    let start = point(&a.start, 3, "start")?;
    if !(a.slab > 0.0) {
        return Err(input("--slab must be positive"));
    }
    let gap_orders = parse_list(&a.gap_orders)?
        .iter()
        .map(|v| {
            if *v >= 1.0 && v.fract() == 0.0 && *v <= 12.0 {
                Ok(*v as u32)
            } else {
                Err(input(format!("gap order `{v}` must be an integer in 1..=12")))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = ConfrontationConfig {
        params,
        delta: a.delta,
        steps: a.steps,
        burn_in: a.burn_in.unwrap_or(a.steps / 10),
        start: [start[0], start[1], start[2]],
        s_vector: [raw[0] / norm, raw[1] / norm, raw[2] / norm],
        region: a.region.parse()?,
        slab: a.slab,
        hermite_n: a.hermite_n,
    };
    if cfg.region.dim() != 3 {
        return Err(input("--box must be three-dimensional"));
    }
    let report_data = lorenzlab::lorenz_report(&cfg, &gap_orders, cli.seed)?;
    let sweep = if a.sweep && a.steps > 0 {
        Some(lorenzlab::confront_sweep(&cfg, &lorenzlab::sweep_directions(8))?)
    } else {
        None
    };
    if let Some(path) = &a.csv {
        let mut csv = CsvWriter::create(path, &["family", "index", "chi", "radius"])?;
        for fam in &report_data.ovals {
            for (i, (chi, r)) in fam.chi_values.iter().zip(&fam.radii).enumerate() {
                csv.raw_row([
                    fam.center_label.to_string(),
                    i.to_string(),
                    fmt_f64(*chi),
                    r.map(fmt_f64).unwrap_or_default(),
                ])?;
            }
        }
        csv.finish()?;
    }
    let result = LorenzResult {
        report: report_data,
        sweep,
    };
    emit_json(&report(cli, None, result), a.report.as_deref())
}

#[derive(Serialize)]
struct DoorstepResult {
    region: BoxRegion,
    cells_per_axis: Vec<usize>,
    start: Vec<f64>,
    horizon: u64,
    steps_run: u64,
    visited_cells: usize,
    total_cells: usize,
    unvisited_fraction: f64,
    t_delta: f64,
}

fn doorstep(cli: &Cli, a: &DoorstepArgs) -> Result<(), CliError> {
    let p = prepare(&a.system)?;
    let region = p.region(&a.region)?;
    let d = region.dim();
    let per_axis = cells(&a.cells, d)?;
    let part = GridPartition::new(region.clone(), per_axis.clone())?;
    let start = point(&a.start, d, "start")?;
    if a.horizon == 0 {
        return Err(input("--horizon must be at least 1"));
    }
    let r = ulam::doorstep(&p.iteration, &start, &part, a.horizon)?;
    if let Some(path) = &a.out {
        let mut csv = CsvWriter::create(path, &["cell", "first_visit_step"])?;
        for (i, s) in r.first_visit_steps.iter().enumerate() {
            csv.raw_row([i.to_string(), s.map(|v| v.to_string()).unwrap_or_default()])?;
        }
        csv.finish()?;
    }
    let result = DoorstepResult {
        cells_per_axis: per_axis,
        start,
        horizon: a.horizon,
        steps_run: r.steps_run,
        visited_cells: r.first_visit_steps.iter().flatten().count(),
        total_cells: part.total_cells,
        unvisited_fraction: r.unvisited_fraction,
        t_delta: r.t_delta,
        region,
    };
    emit_json(&report(cli, Some(p.summary()), result), a.report.as_deref())
}
