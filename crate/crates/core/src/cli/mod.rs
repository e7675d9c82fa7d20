//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration or I/O error, 2 no convergence,
//! 3 failed invariant.

mod config;
mod output;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use config::{
    CheckSection, ClassConfig, DomainConfig, DomainKind, GridConfig, OutputConfig, ReductionConfig,
    RunConfig, SystemConfig,
};
pub use output::{read_fields, write_fields, write_json, FIELDS_HEADER, SCHEMA_VERSION};

use crate::energy::{energy, nehari_residuals};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, PolarGrid};
use crate::invariants::{all_passed, run_invariants, InvariantResult};
use crate::reduction::{
    foliated_schwarz_defect, minimal_period_theorem_check, psi_k, pullback_consistency,
    MinimalPeriodReport, PullbackReport, ReducedProblem,
};
use crate::solver::{
    class_defects, multistart, seed, ClassDefects, SeedSpec, SolverConfig, Status,
};
use crate::symmetry::{defect_table, minimal_period, Period, SymmetryClass};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

/// Environment variable naming the output directory.
pub const OUT_ENV: &str = "NEHARI_OUT";

#[derive(Debug, Parser)]
#[command(
    name = "nehari",
    version,
    about = "Equivariant Nehari-manifold solver for coupled cubic systems"
)]
pub struct Cli {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides NEHARI_OUT and output.dir).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// RNG seed (overrides solver.rng_seed).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Multistart search in the configured class.
    Solve,
    /// Ground state of the reduced 2-coupled problem and its period check.
    Reduce,
    /// Defect and period report for a stored field file.
    Diagnose { input: PathBuf },
    /// Emit one equivariant initial state.
    Seed,
    /// Run the invariant suite.
    Check,
}

struct Run {
    config: RunConfig,
    out: PathBuf,
}

impl Run {
    fn new(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = cli.seed {
            config.solver.rng_seed = seed;
        }
        config.solver.validate()?;
        let out = cli
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .or_else(|| config.output.dir.clone())
            .unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&out)?;
        Ok(Self { config, out })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

#[derive(Serialize)]
struct SolutionSummary {
    index: usize,
    start: usize,
    subclass_k: usize,
    m: usize,
    energy: f64,
    gradient_norm: f64,
    nehari_residual: f64,
    iterations: usize,
    defects: ClassDefects,
    periods: Vec<Period>,
    min_value: f64,
    ranges: Vec<(f64, f64)>,
    seed: SeedSpec,
}

#[derive(Serialize)]
struct SolveSummary<'a> {
    class: SymmetryClass,
    grid: GridSpec,
    system: &'a SystemConfig,
    solver: &'a SolverConfig,
    attempted: usize,
    converged: usize,
    statuses: &'a [Status],
    solutions: Vec<SolutionSummary>,
    distances: &'a [Vec<f64>],
}

const PERIOD_TOL: f64 = 1e-6;

fn solve(run: &Run) -> Result<i32> {
    let cfg = &run.config;
    let params = cfg.valid_params()?;
    let class = cfg.class();
    let grid = PolarGrid::shared(cfg.grid_spec())?;
    let set = multistart(&grid, &params, &class, &cfg.solver)?;
    let mut solutions = Vec::new();
    for (n, s) in set.solutions.iter().enumerate() {
        let r = &s.report;
        write_fields(&run.path(&format!("fields_{n}.csv")), r.state())?;
        println!(
            "solution {n}: energy {:.10e} residual {:.2e} defect(2pi/k) {:.2e} refined defect {:.3e}",
            r.energy, r.gradient_norm, r.defects.period, r.defects.refined
        );
        solutions.push(SolutionSummary {
            index: n,
            start: s.start,
            subclass_k: s.subclass_k,
            m: s.m,
            energy: r.energy,
            gradient_norm: r.gradient_norm,
            nehari_residual: r.nehari_residual,
            iterations: r.iterations,
            defects: r.defects,
            periods: r
                .state()
                .components()
                .iter()
                .map(|u| minimal_period(u, PERIOD_TOL))
                .collect(),
            min_value: r.min_value,
            ranges: r.ranges.clone(),
            seed: s.seed.clone(),
        });
    }
    let summary = SolveSummary {
        class,
        grid: *grid.spec(),
        system: &cfg.system,
        solver: &cfg.solver,
        attempted: set.attempted,
        converged: set.converged,
        statuses: &set.statuses,
        solutions,
        distances: &set.distances,
    };
    write_json(&run.path("summary.json"), "nehari.solve", &summary)?;
    println!(
        "{} of {} starts converged, {} distinct solutions",
        set.converged,
        set.attempted,
        set.solutions.len()
    );
    Ok(if set.solutions.is_empty() {
        EXIT_NO_CONVERGENCE
    } else {
        EXIT_OK
    })
}

#[derive(Serialize)]
struct ReduceSummary<'a> {
    k: usize,
    beta: f64,
    reduced_grid: GridSpec,
    full_grid: GridSpec,
    foliated_schwarz_tolerance: f64,
    minimal_period: &'a MinimalPeriodReport,
    pullback: PullbackReport,
}

fn reduce(run: &Run) -> Result<i32> {
    let cfg = &run.config;
    let params = cfg.params()?;
    if params.n() != 2 || params.p() != 2 {
        return Err(Error::Config(format!(
            "reduction requires 2-coupled system with p = 2, got N = {}, p = {}",
            params.n(),
            params.p()
        )));
    }
    let params = cfg.valid_params()?;
    let grid = PolarGrid::shared(cfg.reduced_spec())?;
    let prob = ReducedProblem::new(&grid, cfg.class.k, params.beta(0, 1))?;
    let report = minimal_period_theorem_check(&prob, &cfg.solver)?;
    let ground = &report.ground;
    write_fields(&run.path("fields_0.csv"), &psi_k(&prob, ground.field())?)?;
    let fs_tol = 1e-3 * ground.norm;
    let summary = ReduceSummary {
        k: prob.k(),
        beta: prob.beta(),
        reduced_grid: *grid.spec(),
        full_grid: *prob.full_grid().spec(),
        foliated_schwarz_tolerance: fs_tol,
        pullback: pullback_consistency(&prob, ground.field())?,
        minimal_period: &report,
    };
    write_json(&run.path("summary.json"), "nehari.reduce", &summary)?;
    println!(
        "k = {}: ground energy {:.10e}, residual {:.2e}, periods {:?}, foliated Schwarz defect {:.2e}",
        prob.k(),
        ground.energy,
        ground.residual,
        report.component_periods.iter().map(Period::to_string).collect::<Vec<_>>(),
        ground.foliated_schwarz_defect
    );
    Ok(if !ground.converged {
        EXIT_NO_CONVERGENCE
    } else if !report.passed || ground.foliated_schwarz_defect > fs_tol {
        EXIT_INVARIANT
    } else {
        EXIT_OK
    })
}

#[derive(Serialize)]
struct ComponentDiagnosis {
    component: usize,
    min: f64,
    max: f64,
    l2_norm: f64,
    period: Period,
    foliated_schwarz_defect: f64,
    defect_table: Vec<(usize, f64)>,
}

#[derive(Serialize)]
struct Diagnosis {
    input: String,
    grid: GridSpec,
    components: Vec<ComponentDiagnosis>,
    /// Defects relative to the configured class, when the grid can represent it.
    class: SymmetryClass,
    class_defects: Option<ClassDefects>,
}

fn diagnose(run: &Run, input: &Path) -> Result<i32> {
    let state = read_fields(input)?;
    let class = run.config.class();
    let components = state
        .components()
        .iter()
        .enumerate()
        .map(|(j, u)| ComponentDiagnosis {
            component: j,
            min: u.min(),
            max: u.max(),
            l2_norm: u.l2_norm(),
            period: minimal_period(u, PERIOD_TOL),
            foliated_schwarz_defect: foliated_schwarz_defect(u),
            defect_table: defect_table(u),
        })
        .collect::<Vec<_>>();
    for c in &components {
        println!(
            "component {}: period {}, range [{:.3e}, {:.3e}]",
            c.component, c.period, c.min, c.max
        );
    }
    let diagnosis = Diagnosis {
        input: input.display().to_string(),
        grid: *state.grid().spec(),
        components,
        class,
        class_defects: class_defects(&state, &class).ok(),
    };
    write_json(&run.path("summary.json"), "nehari.diagnose", &diagnosis)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    class: SymmetryClass,
    grid: GridSpec,
    seed: &'a SeedSpec,
    energy: f64,
    nehari_residual: f64,
}

fn emit_seed(run: &Run) -> Result<i32> {
    let cfg = &run.config;
    let params = cfg.valid_params()?;
    let class = cfg.class();
    let grid = PolarGrid::shared(cfg.grid_spec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.solver.rng_seed);
    let spec = SeedSpec::random(params.p(), cfg.solver.m_max, &mut rng)?;
    let state = seed(&grid, &class, &spec, &params)?;
    write_fields(&run.path("fields_0.csv"), &state)?;
    let summary = SeedSummary {
        class,
        grid: *grid.spec(),
        seed: &spec,
        energy: energy(&params, &state, class.branch)?,
        nehari_residual: nehari_residuals(&params, &state, class.branch, f64::INFINITY)?
            .max_abs_residual(),
    };
    write_json(&run.path("summary.json"), "nehari.seed", &summary)?;
    println!("seed energy {:.10e}", summary.energy);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct CheckSummary<'a> {
    passed: bool,
    results: &'a [InvariantResult],
}

fn check(run: &Run) -> Result<i32> {
    let results = run_invariants(&run.config.check_config()?)?;
    for r in &results {
        let mark = match (r.passed, r.report_only) {
            (true, _) => "PASS",
            (false, true) => "INFO",
            (false, false) => "FAIL",
        };
        println!(
            "{mark} {}::{} value {:.3e} tolerance {:.3e}",
            r.module, r.name, r.value, r.tolerance
        );
    }
    let passed = all_passed(&results);
    write_json(
        &run.path("invariants.json"),
        "nehari.invariants",
        &CheckSummary {
            passed,
            results: &results,
        },
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_INVARIANT })
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    if let Some(jobs) = cli.jobs {
        // fails only when a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    let result = Run::new(cli).and_then(|run| match &cli.command {
        Command::Solve => solve(&run),
        Command::Reduce => reduce(&run),
        Command::Diagnose { input } => diagnose(&run, input),
        Command::Seed => emit_seed(&run),
        Command::Check => check(&run),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

pub fn main() -> i32 {
    run(&Cli::parse())
}
