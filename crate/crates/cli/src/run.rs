use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use deadcore::free_boundary::{
    decompose, default_threshold, magnitude_with_tolerance, FreeBoundaryError, Region, RegionDecomposition,
};
use deadcore::grid::{fmt17, BoundaryData, Grid, GridError};
use deadcore::lab::{
    density_scan, flattening_experiment, growth_profile, liouville_experiment, nearest_free_boundary_node,
    nondegeneracy_ratios, porosity_and_dimension, weak_compare, ComparisonReport, DensityReport, FlatteningSetup,
    FlatteningTable, GrowthProfile, LabError, LiouvilleReport, LiouvilleSetup, PorosityReport,
};
use deadcore::ops::{OpError, OperatorSpec};
use deadcore::radial::{barrier_constants, exponents, RadialBarrier, RadialError};
use deadcore::system::{
    fixed_point_solve, IterationHistory, ProblemSpec, SolutionPair, SystemError, SystemMethod,
    ZeroPowerConvention,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::config::{BarrierRole, BoundaryConfig, ConfigError, Experiment, PairSource, RunConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Operator(#[from] OpError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Radial(#[from] RadialError),
    #[error(transparent)]
    FreeBoundary(#[from] FreeBoundaryError),
    #[error(transparent)]
    Lab(#[from] LabError),
    #[error("{}: {source}", .path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("DEADCORE_THREADS must be a positive integer, got {0:?}")]
    Threads(String),
}

impl RunError {
    pub fn code(&self) -> &'static str {
        match self {
            RunError::Config(e) => e.code(),
            _ if self.not_converged() => "NotConverged",
            RunError::Grid(_) => "Grid",
            RunError::Operator(_) => "Operator",
            RunError::System(_) => "System",
            RunError::Radial(_) => "Radial",
            RunError::FreeBoundary(_) => "FreeBoundary",
            RunError::Lab(_) => "Lab",
            RunError::Io { .. } => "Io",
            RunError::Threads(_) => "Threads",
        }
    }

    pub fn not_converged(&self) -> bool {
        let sys = match self {
            RunError::System(e) | RunError::Lab(LabError::System(e)) => e,
            _ => return false,
        };
        sys.partial().is_some()
    }

    pub fn exit_code(&self) -> i32 {
        if self.not_converged() {
            2
        } else {
            1
        }
    }

    /// Machine-readable error document.
    pub fn to_json(&self, experiment: Option<Experiment>) -> Value {
        let (key, line) = match self {
            RunError::Config(e) => (e.key().map(str::to_owned), e.line()),
            _ => (None, None),
        };
        serde_json::json!({
            "schema": "deadcore.error",
            "schema_version": SCHEMA_VERSION,
            "experiment": experiment.map(Experiment::name),
            "exit_code": self.exit_code(),
            "code": self.code(),
            "message": self.to_string(),
            "key": key,
            "line": line,
        })
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub exit_code: i32,
    pub report: Value,
    /// File names inside the output directory, in emission order.
    pub files: Vec<String>,
}

struct Out {
    dir: PathBuf,
    files: Vec<String>,
}

impl Out {
    fn create(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), RunError> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err(&path))?;
        self.files.push(name.to_owned());
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<(), RunError> {
        self.create(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }
}

fn coords(grid: &Grid, k: usize) -> String {
    let c = grid.coords(k);
    (0..grid.dim()).map(|a| fmt17(c[a])).collect::<Vec<_>>().join(",")
}

fn coord_header(grid: &Grid) -> &'static str {
    if grid.dim() == 1 {
        "x"
    } else {
        "x,y"
    }
}

/// Run one experiment, writing every artifact into the configured output
/// directory. Non-convergence of a solve yields exit code 2.
pub fn run(cfg: &RunConfig) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let dir = cfg.output.dir.clone();
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let mut out = Out { dir, files: Vec::new() };
    let (body, converged) = match cfg.experiment {
        Experiment::Solve => solve_experiment(cfg, &mut out)?,
        Experiment::Radial => (radial_experiment(cfg, &mut out)?, true),
        Experiment::FitExponent => fit_experiment(cfg, &mut out)?,
        Experiment::Measure => measure_experiment(cfg, &mut out)?,
        Experiment::Compare => compare_experiment(cfg, &mut out)?,
        Experiment::Flatten => (flatten_run(cfg, &mut out)?, true),
        Experiment::Liouville => (liouville_run(cfg, &mut out)?, true),
    };
    let mut report = serde_json::json!({
        "schema": format!("deadcore.{}-report", cfg.experiment.name()),
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "converged": converged,
    });
    if let (Value::Object(head), Value::Object(rest)) = (&mut report, body) {
        head.extend(rest);
    }
    out.json("report.json", &report)?;
    let exit_code = if converged { 0 } else { 2 };
    write_manifest(cfg, &mut out, exit_code, start)?;
    Ok(Outcome {
        exit_code,
        report,
        files: out.files,
    })
}

fn write_manifest(cfg: &RunConfig, out: &mut Out, exit_code: i32, start: Instant) -> Result<(), RunError> {
    let mut files = out.files.clone();
    files.push("manifest.json".into());
    let manifest = serde_json::json!({
        "schema": "deadcore.manifest",
        "schema_version": SCHEMA_VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "config": cfg,
        "versions": {
            "deadcore": deadcore::VERSION,
            "deadcore-cli": env!("CARGO_PKG_VERSION"),
        },
        "threads": rayon::current_num_threads(),
        "exit_code": exit_code,
        "files": files,
        "wall_time_s": start.elapsed().as_secs_f64(),
    });
    out.json("manifest.json", &manifest)
}

/// Best-effort `error.json` next to the other artifacts.
pub fn write_error(cfg: &RunConfig, err: &RunError) -> io::Result<PathBuf> {
    fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("error.json");
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, &err.to_json(Some(cfg.experiment)))?;
    writeln!(w)?;
    w.flush()?;
    Ok(path)
}

fn to_value(x: impl Serialize) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

fn operators(cfg: &RunConfig, grid: &Grid) -> Result<(OperatorSpec, OperatorSpec), RunError> {
    Ok((cfg.operators.f.build(grid)?, cfg.operators.g.build(grid)?))
}

fn boundary_data(cfg: &RunConfig, grid: &Grid, b: &BoundaryConfig) -> Result<(BoundaryData, BoundaryData), RunError> {
    Ok(match b {
        BoundaryConfig::Zero => (BoundaryData::zero(*grid), BoundaryData::zero(*grid)),
        BoundaryConfig::Constant { u, v } => (BoundaryData::constant(*grid, *u)?, BoundaryData::constant(*grid, *v)?),
        BoundaryConfig::Radial {
            rho,
            center,
            ellipticity,
            scale,
        } => {
            let c = center.clone().unwrap_or_else(|| cfg.problem.center());
            let bar = RadialBarrier::new(cfg.problem.p, cfg.problem.q, grid.dim(), *ellipticity, *rho, &c)?;
            let (phi, psi) = bar.boundary_data(grid)?;
            (phi.scaled(*scale), psi.scaled(*scale))
        }
    })
}

fn build_problem(cfg: &RunConfig, b: &BoundaryConfig) -> Result<ProblemSpec, RunError> {
    let grid = cfg.problem.grid()?;
    let (f, g) = operators(cfg, &grid)?;
    let (phi, psi) = boundary_data(cfg, &grid, b)?;
    Ok(ProblemSpec::new(f, g, cfg.problem.p, cfg.problem.q, phi, psi)?
        .with_sources(cfg.problem.c_u, cfg.problem.c_v)?
        .with_zero_power(cfg.problem.zero_power))
}

struct Solved {
    problem: ProblemSpec,
    pair: SolutionPair,
    history: IterationHistory,
    converged: bool,
}

fn solve_with(cfg: &RunConfig, b: &BoundaryConfig) -> Result<Solved, RunError> {
    let problem = build_problem(cfg, b)?;
    match fixed_point_solve(&problem, &cfg.solver.options()) {
        Ok((pair, history)) => Ok(Solved {
            converged: history.converged,
            problem,
            pair,
            history,
        }),
        Err(e) => match e.partial() {
            Some((best, history)) => Ok(Solved {
                pair: best.clone(),
                history: history.clone(),
                converged: false,
                problem,
            }),
            None => Err(e.into()),
        },
    }
}

impl Solved {
    fn threshold(&self, cfg: &RunConfig) -> f64 {
        cfg.regions.threshold.unwrap_or_else(|| default_threshold(&self.problem))
    }

    /// Regions of the computed pair; an unconverged iterate may dip below
    /// zero, so its positive parts are taken unconditionally.
    fn regions(&self, cfg: &RunConfig) -> Result<RegionDecomposition, RunError> {
        let eps = self.threshold(cfg);
        if self.converged {
            Ok(decompose(&self.pair, eps)?)
        } else {
            let m = magnitude_with_tolerance(&self.pair, f64::INFINITY)?;
            Ok(RegionDecomposition::from_magnitude(m, eps)?)
        }
    }

    fn write_fields(&self, out: &mut Out, decomp: &RegionDecomposition) -> Result<(), RunError> {
        out.create("u.csv", |w| self.pair.u.write_csv(w))?;
        out.create("v.csv", |w| self.pair.v.write_csv(w))?;
        out.create("regions.csv", |w| decomp.write_csv(w))?;
        out.create("history.csv", |w| self.history.write_csv(w))
    }

    fn summary(&self, decomp: &RegionDecomposition) -> SolveSummary {
        let grid = self.problem.grid();
        let (res_u, res_v) = self.history.final_residuals();
        let count = |r: Region| decomp.labels().iter().filter(|&&l| l == r).count();
        SolveSummary {
            converged: self.converged,
            method: self.history.method,
            iterations: self.history.iterations(),
            tolerance: self.history.tolerance,
            residual_u: res_u,
            residual_v: res_v,
            grid: GridSummary {
                dim: grid.dim(),
                nodes: grid.nodes_per_axis().to_vec(),
                lower: grid.lower().to_vec(),
                upper: grid.upper().to_vec(),
                h: grid.h(),
            },
            p: self.problem.p(),
            q: self.problem.q(),
            zero_power: self.problem.zero_power(),
            u_range: [self.pair.u.min(), self.pair.u.max()],
            v_range: [self.pair.v.min(), self.pair.v.max()],
            regions: RegionCounts {
                threshold: decomp.threshold(),
                core: count(Region::Core),
                positive: count(Region::Positive),
                free_boundary: count(Region::FreeBoundary),
            },
        }
    }
}

#[derive(Serialize)]
struct GridSummary {
    dim: usize,
    nodes: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    h: f64,
}

#[derive(Serialize)]
struct RegionCounts {
    threshold: f64,
    core: usize,
    positive: usize,
    free_boundary: usize,
}

#[derive(Serialize)]
struct SolveSummary {
    converged: bool,
    method: SystemMethod,
    iterations: usize,
    tolerance: f64,
    residual_u: f64,
    residual_v: f64,
    grid: GridSummary,
    p: f64,
    q: f64,
    zero_power: ZeroPowerConvention,
    u_range: [f64; 2],
    v_range: [f64; 2],
    regions: RegionCounts,
}

/// Error against the radial pair whose traces were imposed, when that pair
/// is an exact solution.
#[derive(Serialize)]
struct OracleCheck {
    exact: bool,
    reason: &'static str,
    linf_error_u: Option<f64>,
    linf_error_v: Option<f64>,
}

fn oracle_check(cfg: &RunConfig, s: &Solved) -> Result<Option<OracleCheck>, RunError> {
    let BoundaryConfig::Radial {
        rho,
        center,
        ellipticity,
        scale,
    } = &cfg.boundary
    else {
        return Ok(None);
    };
    let grid = s.problem.grid();
    let c = center.clone().unwrap_or_else(|| cfg.problem.center());
    let bar = RadialBarrier::new(cfg.problem.p, cfg.problem.q, grid.dim(), *ellipticity, *rho, &c)?;
    let class = if s.problem.is_symmetric() && *scale == 1.0 && (cfg.problem.c_u, cfg.problem.c_v) == (1.0, 1.0) {
        bar.classify_with(s.problem.f(), cfg.problem.zero_power)
    } else {
        // Rescaled traces or sources break the constant equations.
        deadcore::radial::BarrierClass::Unordered
    };
    let (eu, ev) = if class.is_exact() {
        let exact = bar.pair(grid)?;
        (Some(s.pair.u.max_diff(&exact.u)), Some(s.pair.v.max_diff(&exact.v)))
    } else {
        (None, None)
    };
    Ok(Some(OracleCheck {
        exact: class.is_exact(),
        reason: class.reason(),
        linf_error_u: eu,
        linf_error_v: ev,
    }))
}

fn solve_experiment(cfg: &RunConfig, out: &mut Out) -> Result<(Value, bool), RunError> {
    let s = solve_with(cfg, &cfg.boundary)?;
    let decomp = s.regions(cfg)?;
    s.write_fields(out, &decomp)?;
    let body = serde_json::json!({
        "solve": s.summary(&decomp),
        "oracle": oracle_check(cfg, &s)?,
    });
    Ok((body, s.converged))
}

#[derive(Serialize)]
struct IdentityCheck {
    samples: usize,
    skipped_unrepresentable: usize,
    worst_relative_defect: f64,
}

/// Constant equations `E·A·α(α+n−2) = Bᵖ`, `E·B·β(β+n−2) = A^q` on seeded
/// draws of `(p, q, n, E)` with `pq < 0.9`.
fn identity_check(seed: u64, samples: usize) -> IdentityCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    let mut skipped = 0;
    let mut drawn = 0;
    while drawn < samples {
        let p: f64 = rng.random_range(0.0..3.0);
        let q: f64 = rng.random_range(0.0..3.0);
        let n: usize = rng.random_range(1..=3);
        let e: f64 = rng.random_range(0.25..4.0);
        if p * q >= 0.9 {
            continue;
        }
        drawn += 1;
        let (Ok((a, b)), Ok((al, be, _))) = (barrier_constants(p, q, n, e), exponents(p, q)) else {
            skipped += 1;
            continue;
        };
        let nf = n as f64;
        let d1 = (e * a * al * (al + nf - 2.0) - b.powf(p)).abs() / b.powf(p);
        let d2 = (e * b * be * (be + nf - 2.0) - a.powf(q)).abs() / a.powf(q);
        worst = worst.max(d1).max(d2);
    }
    IdentityCheck {
        samples,
        skipped_unrepresentable: skipped,
        worst_relative_defect: worst,
    }
}

fn radial_experiment(cfg: &RunConfig, out: &mut Out) -> Result<Value, RunError> {
    let grid = cfg.problem.grid()?;
    let (f, _) = operators(cfg, &grid)?;
    let r = &cfg.radial;
    let e = r.ellipticity.unwrap_or(f.big_lambda());
    let c = r.center.clone().unwrap_or_else(|| cfg.problem.center());
    let bar = RadialBarrier::new(cfg.problem.p, cfg.problem.q, grid.dim(), e, r.rho, &c)?;
    let (a, b) = bar.constants();
    let class = bar.classify_with(&f, cfg.problem.zero_power);
    let pair = bar.pair(&grid)?;
    out.create("u.csv", |w| pair.u.write_csv(w))?;
    out.create("v.csv", |w| pair.v.write_csv(w))?;
    Ok(serde_json::json!({
        "p": bar.p(),
        "q": bar.q(),
        "dim": bar.dim(),
        "ellipticity": e,
        "rho": bar.rho(),
        "center": bar.center(),
        "alpha": bar.alpha(),
        "beta": bar.beta(),
        "gamma": bar.gamma(),
        "A": a,
        "B": b,
        "magnitude_coefficient": bar.magnitude_coefficient(),
        "liouville_threshold": bar.liouville_threshold(),
        "classification": {
            "operator": f.kind(),
            "exact": class.is_exact(),
            "reason": class.reason(),
        },
        "identity_check": identity_check(cfg.seed, r.samples),
    }))
}

#[derive(Serialize)]
struct FitSummary {
    profile: GrowthProfile,
    gamma: f64,
    slope: f64,
    relative_error: f64,
    c_min: f64,
    c_max: f64,
    ratio: f64,
}

fn fit_experiment(cfg: &RunConfig, out: &mut Out) -> Result<(Value, bool), RunError> {
    let s = solve_with(cfg, &cfg.boundary)?;
    let decomp = s.regions(cfg)?;
    s.write_fields(out, &decomp)?;
    let mut body = serde_json::json!({ "solve": s.summary(&decomp), "fit": null });
    if !s.converged {
        return Ok((body, false));
    }
    let grid = *decomp.grid();
    let fc = &cfg.fit_exponent;
    let x0 = match &fc.center {
        Some(c) => c.clone(),
        None => {
            let near = fc.near.clone().unwrap_or_else(|| cfg.problem.center());
            let k = nearest_free_boundary_node(&decomp, &near).ok_or(LabError::EmptyFreeBoundary)?;
            grid.coords(k)[..grid.dim()].to_vec()
        }
    };
    let r_min = fc.r_min.unwrap_or(8.0 * grid.h());
    let r_max = fc.r_max.unwrap_or_else(|| 0.5 * grid.distance_to_boundary(&x0));
    let profile = growth_profile(&decomp, &x0, r_min, r_max, fc.levels)?;
    let (_, _, gamma) = exponents(cfg.problem.p, cfg.problem.q)?;
    let (c_min, c_max) = nondegeneracy_ratios(&profile, gamma);
    let ratios = profile.ratios(gamma);
    out.create("growth.csv", |w| {
        writeln!(w, "radius,sup,ratio")?;
        for ((r, s), c) in profile.radii.iter().zip(&profile.sups).zip(&ratios) {
            writeln!(w, "{},{},{}", fmt17(*r), fmt17(*s), fmt17(*c))?;
        }
        Ok(())
    })?;
    let slope = profile.slope();
    body["fit"] = to_value(FitSummary {
        relative_error: (slope - gamma).abs() / gamma,
        profile,
        gamma,
        slope,
        c_min,
        c_max,
        ratio: c_max / c_min,
    });
    Ok((body, true))
}

#[derive(Serialize)]
struct MeasureSummary {
    density: DensityReport,
    density_min: f64,
    porosity: PorosityReport,
}

fn measure_experiment(cfg: &RunConfig, out: &mut Out) -> Result<(Value, bool), RunError> {
    let s = solve_with(cfg, &cfg.boundary)?;
    let decomp = s.regions(cfg)?;
    s.write_fields(out, &decomp)?;
    let mut body = serde_json::json!({ "solve": s.summary(&decomp), "measure": null });
    if !s.converged {
        return Ok((body, false));
    }
    let grid = *decomp.grid();
    let h = grid.h();
    let radii = cfg.measure.radii.clone().unwrap_or_else(|| vec![8.0 * h, 16.0 * h, 32.0 * h]);
    let density = density_scan(&decomp, &radii)?;
    let porosity = porosity_and_dimension(&decomp, &radii)?;
    out.create("density.csv", |w| {
        writeln!(w, "radius,min_fraction,{}", coord_header(&grid))?;
        for ((r, f), k) in density.radii.iter().zip(&density.min_fraction).zip(&density.argmin) {
            writeln!(w, "{},{},{}", fmt17(*r), fmt17(*f), coords(&grid, *k))?;
        }
        Ok(())
    })?;
    out.create("porosity.csv", |w| {
        writeln!(w, "radius,sigma")?;
        for (r, sg) in porosity.radii.iter().zip(&porosity.sigma_per_radius) {
            writeln!(w, "{},{}", fmt17(*r), fmt17(*sg))?;
        }
        Ok(())
    })?;
    out.create("boxes.csv", |w| {
        writeln!(w, "size,count")?;
        for (b, n) in porosity.box_sizes.iter().zip(&porosity.box_counts) {
            writeln!(w, "{},{n}", fmt17(*b))?;
        }
        Ok(())
    })?;
    body["measure"] = to_value(MeasureSummary {
        density_min: density.overall_min(),
        density,
        porosity,
    });
    Ok((body, true))
}

fn pair_from(cfg: &RunConfig, src: &PairSource) -> Result<(SolutionPair, bool), RunError> {
    match src {
        PairSource::Solve { boundary } => {
            let s = solve_with(cfg, boundary.as_ref().unwrap_or(&cfg.boundary))?;
            Ok((s.pair, s.converged))
        }
        PairSource::Barrier { role, rho, center } => {
            let grid = cfg.problem.grid()?;
            let (f, _) = operators(cfg, &grid)?;
            let c = center.clone().unwrap_or_else(|| cfg.problem.center());
            let (p, q, n) = (cfg.problem.p, cfg.problem.q, grid.dim());
            let bar = match role {
                BarrierRole::Super => RadialBarrier::super_for(&f, p, q, n, *rho, &c)?,
                BarrierRole::Sub => RadialBarrier::sub_for(&f, p, q, n, *rho, &c)?,
            };
            Ok((bar.pair(&grid)?, true))
        }
    }
}

#[derive(Serialize)]
struct CompareSummary {
    sup_converged: bool,
    sub_converged: bool,
    comparison: Option<ComparisonReport>,
}

fn compare_experiment(cfg: &RunConfig, out: &mut Out) -> Result<(Value, bool), RunError> {
    let (sup, sup_ok) = pair_from(cfg, &cfg.compare.sup)?;
    let (sub, sub_ok) = pair_from(cfg, &cfg.compare.sub)?;
    let grid = *sup.grid();
    out.create("gap.csv", |w| {
        writeln!(w, "{},du,dv", coord_header(&grid))?;
        for k in 0..grid.node_count() {
            let du = sup.u.get(k) - sub.u.get(k);
            let dv = sup.v.get(k) - sub.v.get(k);
            writeln!(w, "{},{},{}", coords(&grid, k), fmt17(du), fmt17(dv))?;
        }
        Ok(())
    })?;
    let converged = sup_ok && sub_ok;
    let comparison = if converged { Some(weak_compare(&sup, &sub)?) } else { None };
    let body = serde_json::json!({
        "compare": CompareSummary {
            sup_converged: sup_ok,
            sub_converged: sub_ok,
            comparison,
        }
    });
    Ok((body, converged))
}

fn flatten_run(cfg: &RunConfig, out: &mut Out) -> Result<Value, RunError> {
    let grid = cfg.problem.grid()?;
    let (f, g) = operators(cfg, &grid)?;
    let fl = &cfg.flatten;
    let mut setup = FlatteningSetup::radial(f, cfg.problem.p, cfg.problem.q, fl.gamma_c, grid, fl.rho, fl.peak)?;
    setup.g = g;
    setup.opts = cfg.solver.options();
    let table: FlatteningTable = flattening_experiment(&setup, &fl.deltas)?;
    out.create("flatten.csv", |w| {
        writeln!(w, "delta,sup_half_ball,u_center,v_center,iterations")?;
        for r in &table.rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt17(r.delta),
                fmt17(r.sup_half_ball),
                fmt17(r.u_center),
                fmt17(r.v_center),
                r.iterations
            )?;
        }
        Ok(())
    })?;
    Ok(serde_json::json!({ "flatten": table }))
}

fn liouville_run(cfg: &RunConfig, out: &mut Out) -> Result<Value, RunError> {
    let grid = cfg.problem.grid()?;
    let (f, g) = operators(cfg, &grid)?;
    let lv = &cfg.liouville;
    let setup = LiouvilleSetup {
        f,
        g,
        p: cfg.problem.p,
        q: cfg.problem.q,
        dim: grid.dim(),
        nodes: grid.nx(),
        window: lv.window,
        family: lv.family,
        opts: cfg.solver.options(),
    };
    let rep: LiouvilleReport = liouville_experiment(&setup, &lv.radii)?;
    out.create("liouville.csv", |w| {
        writeln!(w, "radius,s_r,ratio,interior_sup")?;
        for k in 0..rep.radii.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt17(rep.radii[k]),
                fmt17(rep.s_r[k]),
                fmt17(rep.ratios[k]),
                fmt17(rep.interior_sups[k])
            )?;
        }
        Ok(())
    })?;
    Ok(serde_json::json!({ "liouville": rep, "family": lv.family }))
}
