//! Command-line surface for the nozzle transonic-shock solver.
//!
//! Subcommands: polar, background, interval, validate, solve, uniqueness,
//! sweep-pe. Structured results are JSON, field and curve data CSV. Exit
//! codes: 0 success, 2 config/input error, 3 regime or hypothesis breach,
//! 4 non-convergence, 5 receiver pressure outside the admissible range.

use clap::{Args, Parser, Subcommand};
use nozzle_shock::config::RunConfig;
use nozzle_shock::elliptic::FixedDomainGrid;
use nozzle_shock::march::{solve_linearized, MarchGrid};
use nozzle_shock::setup::{admissible_pe_interval, validate_compatibility, ProblemSetup};
use nozzle_shock::shock::{polar_critical_points, polar_state_at_pressure, Branch};
use nozzle_shock::solver::{
    fixed_point_solve, locate_shock, uniqueness_sweep, SeedInit, SolvabilityContext, SolveReport,
};
use nozzle_shock::{derived, Error};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "nozzle-shock",
    version,
    about = "Transonic-shock solver for a slightly expanding 2-D nozzle"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// accept sigma above the safety cap
    #[arg(long, default_value_t = false)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the shock polar of the upstream state and its critical points
    Polar(Common),
    /// Emit the planar background shock bundle
    Background(Common),
    /// Emit the admissible receiver-pressure interval
    Interval(Common),
    /// Check the inlet compatibility conditions
    Validate(Common),
    /// Run the free-boundary solve at the configured receiver pressure
    Solve {
        #[command(flatten)]
        common: Common,
        /// also write the subsonic and supersonic fields as CSV
        #[arg(long, default_value_t = false)]
        emit_fields: bool,
    },
    /// Run the multi-seed uniqueness harness
    Uniqueness {
        #[command(flatten)]
        common: Common,
        /// number of seeds (>= 5)
        #[arg(long, default_value_t = 5)]
        seeds: usize,
    },
    /// Locate the front for a vector of receiver pressures
    SweepPe {
        #[command(flatten)]
        common: Common,
        /// comma-separated Pe values; defaults to nine values spread across
        /// the admissible interval
        #[arg(long)]
        pe: Option<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Polar(c) => cmd_polar(&c),
        Command::Background(c) => cmd_background(&c),
        Command::Interval(c) => cmd_interval(&c),
        Command::Validate(c) => cmd_validate(&c),
        Command::Solve { common, emit_fields } => cmd_solve(&common, emit_fields),
        Command::Uniqueness { common, seeds } => cmd_uniqueness(&common, seeds),
        Command::SweepPe { common, pe } => cmd_sweep_pe(&common, pe.as_deref()),
    }
}

fn load(common: &Common) -> Result<(RunConfig, ProblemSetup), Error> {
    let cfg = RunConfig::from_path(&common.config)?;
    let base = common
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let setup = cfg.setup(&base, common.force)?;
    std::fs::create_dir_all(&common.out)?;
    Ok((cfg, setup))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialize {name}: {e}")))?;
    std::fs::write(&path, text + "\n")?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_csv(dir: &Path, name: &str, header: &str, rows: &[String]) -> Result<(), Error> {
    let path = dir.join(name);
    let mut text = String::with_capacity(rows.len() * 40 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(r);
        text.push('\n');
    }
    std::fs::write(&path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct CriticalPointsOut {
    p_max: f64,
    p_star: f64,
    theta_star_rad: f64,
    theta_star_deg: f64,
    p_sonic: f64,
    /// observed ordering, reported rather than assumed
    p_sonic_below_p_star: bool,
}

fn cmd_polar(common: &Common) -> Result<(), Error> {
    let (cfg, _setup) = load(common)?;
    let model = cfg.gas_model()?;
    let u_minus = cfg.upstream_state()?;
    let crit = polar_critical_points(&model, &u_minus)?;
    let mut rows = Vec::new();
    let n = 257;
    for branch in [Branch::Upper, Branch::Lower] {
        let tag = match branch {
            Branch::Upper => "upper",
            Branch::Lower => "lower",
        };
        for k in 0..n {
            let p = u_minus.p + (crit.p_max - u_minus.p) * k as f64 / (n - 1) as f64;
            let pt = polar_state_at_pressure(&model, &u_minus, p, branch)?;
            let m_down = derived(&model, &pt.downstream)?.mach;
            rows.push(format!("{:.12e},{:.12e},{:.12e},{tag}", pt.theta, pt.p, m_down));
        }
    }
    write_csv(&common.out, "polar.csv", "theta_rad,p,m_down,branch", &rows)?;
    write_json(
        &common.out,
        "critical_points.json",
        &CriticalPointsOut {
            p_max: crit.p_max,
            p_star: crit.p_star,
            theta_star_rad: crit.theta_star,
            theta_star_deg: crit.theta_star.to_degrees(),
            p_sonic: crit.p_sonic,
            p_sonic_below_p_star: crit.p_sonic < crit.p_star,
        },
    )
}

fn cmd_background(common: &Common) -> Result<(), Error> {
    let (_, setup) = load(common)?;
    #[derive(Serialize)]
    struct BackgroundOut<'a> {
        background: &'a nozzle_shock::BackgroundShock,
        eta0_perturbed: f64,
        g_script: f64,
    }
    write_json(
        &common.out,
        "background.json",
        &BackgroundOut {
            background: &setup.background,
            eta0_perturbed: setup.eta0,
            g_script: setup.pe_interval.g_script,
        },
    )
}

fn cmd_interval(common: &Common) -> Result<(), Error> {
    let (_, setup) = load(common)?;
    let iv = admissible_pe_interval(
        &setup.background,
        &setup.perturb,
        &setup.y0,
        setup.nozzle.length_l,
    );
    write_json(&common.out, "pe_interval.json", &iv)
}

fn cmd_validate(common: &Common) -> Result<(), Error> {
    let (_, setup) = load(common)?;
    let report = validate_compatibility(
        &setup.model,
        &setup.background.u_minus_bar,
        &setup.perturb,
        setup.nozzle.sigma,
    )?;
    write_json(&common.out, "compatibility.json", &report)
}

#[derive(Serialize)]
struct SolveOut<'a> {
    delta_xi: f64,
    xi_star: f64,
    converged: bool,
    iterations: usize,
    final_change: f64,
    pe: f64,
    iteration_history: &'a [nozzle_shock::solver::IterationRecord],
    contraction_ratios: &'a [f64],
    tail_contraction_ratio: Option<f64>,
    norms: &'a nozzle_shock::solver::SolveNorms,
    diagnostics: &'a nozzle_shock::solver::SolveDiagnostics,
    hypothesis: &'a nozzle_shock::elliptic::HypothesisReport,
    front_slope: &'a [f64],
    front_position: &'a [f64],
    /// wall-clock only; every other field is deterministic
    timing_ms: u128,
}

fn require_pe(cfg: &RunConfig) -> Result<f64, Error> {
    cfg.pe
        .ok_or_else(|| Error::Config("this command needs Pe in the config".into()))
}

fn cmd_solve(common: &Common, emit_fields: bool) -> Result<(), Error> {
    let (cfg, setup) = load(common)?;
    let pe = require_pe(&cfg)?;
    let t0 = Instant::now();
    let report = fixed_point_solve(
        &setup,
        pe,
        cfg.solver_grid(),
        SeedInit::default(),
        &cfg.solver_options(),
    )?;
    let timing_ms = t0.elapsed().as_millis();
    let out = SolveOut {
        delta_xi: report.front.delta_xi,
        xi_star: setup.nozzle.xi0 + report.front.delta_xi,
        converged: report.converged,
        iterations: report.iterations.len(),
        final_change: report.final_change,
        pe,
        iteration_history: &report.iterations,
        contraction_ratios: &report.contraction_ratios,
        tail_contraction_ratio: report.tail_contraction_ratio(cfg.tol.fixed_point),
        norms: &report.norms,
        diagnostics: &report.diagnostics,
        hypothesis: &report.hypothesis,
        front_slope: &report.front.slope,
        front_position: &report.front.position,
        timing_ms,
    };
    write_json(&common.out, "report.json", &out)?;

    let rows: Vec<String> = report
        .f_tilde_profile
        .iter()
        .map(|(x, v)| format!("{x:.12e},{v:.12e}"))
        .collect();
    write_csv(&common.out, "f_tilde.csv", "delta_xi,f_tilde", &rows)?;

    if emit_fields {
        emit_field_csv(&common.out, &setup, &report)?;
        emit_supersonic_csv(&common.out, &setup, &cfg)?;
    }
    Ok(())
}

fn emit_field_csv(dir: &Path, setup: &ProblemSetup, report: &SolveReport) -> Result<(), Error> {
    let grid: &FixedDomainGrid = &report.grid;
    let l = setup.nozzle.length_l;
    let mut rows = Vec::with_capacity(grid.n_nodes());
    for i in 0..=grid.nx {
        for j in 0..=grid.ny {
            let k = grid.idx(i, j);
            let psi = report.front.position[j];
            // physical abscissa of the straightened node
            let xi_phys = l + (l - psi) / (l - grid.xi0) * (grid.xi(i) - l);
            let st = report.fields.state_at(k);
            let mach = derived(&setup.model, &st)?.mach;
            rows.push(format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                xi_phys,
                grid.eta(j),
                st.p,
                st.theta,
                st.q,
                st.s,
                mach
            ));
        }
    }
    write_csv(dir, "fields.csv", "xi,eta,p,theta,q,s,mach", &rows)
}

fn emit_supersonic_csv(dir: &Path, setup: &ProblemSetup, cfg: &RunConfig) -> Result<(), Error> {
    let field = solve_linearized(
        setup,
        MarchGrid {
            ny: cfg.grid.ny,
            nx_override: cfg.grid.march_nx,
        },
    )?;
    let rows: Vec<String> = field
        .dump_rows()
        .into_iter()
        .map(|(xi, eta, d)| {
            format!(
                "{xi:.12e},{eta:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                d[0], d[1], d[2], d[3]
            )
        })
        .collect();
    write_csv(dir, "supersonic.csv", "xi,eta,dp,dtheta,dq,ds", &rows)
}

fn cmd_uniqueness(common: &Common, seeds: usize) -> Result<(), Error> {
    let (cfg, setup) = load(common)?;
    let pe = require_pe(&cfg)?;
    let n_seeds = cfg.seeds.unwrap_or(seeds);
    let t0 = Instant::now();
    let verdict = uniqueness_sweep(
        &setup,
        pe,
        cfg.solver_grid(),
        n_seeds,
        &cfg.solver_options(),
    )?;
    #[derive(Serialize)]
    struct VerdictOut<'a> {
        #[serde(flatten)]
        verdict: &'a nozzle_shock::SweepVerdict,
        pe: f64,
        timing_ms: u128,
    }
    write_json(
        &common.out,
        "verdict.json",
        &VerdictOut {
            verdict: &verdict,
            pe,
            timing_ms: t0.elapsed().as_millis(),
        },
    )
}

fn cmd_sweep_pe(common: &Common, pe_list: Option<&str>) -> Result<(), Error> {
    let (cfg, setup) = load(common)?;
    let iv = setup.pe_interval;
    let pes: Vec<f64> = match pe_list {
        Some(text) => text
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("cannot parse Pe '{t}': {e}")))
            })
            .collect::<Result<_, _>>()?,
        None => (0..9)
            .map(|k| iv.lo + iv.width() * (0.05 + 0.9 * k as f64 / 8.0))
            .collect(),
    };
    let march = solve_linearized(
        &setup,
        MarchGrid {
            ny: cfg.grid.ny,
            nx_override: cfg.grid.march_nx,
        },
    )?;
    let mut rows = Vec::new();
    for pe in pes {
        let ctx = SolvabilityContext::new(&setup, pe).with_corrections(Some(&march), None);
        match locate_shock(&ctx) {
            Ok(root) => rows.push(format!("{pe:.12e},{root:.12e},ok")),
            Err(e) => rows.push(format!("{pe:.12e},nan,{}", status_tag(&e))),
        }
    }
    write_csv(&common.out, "pe_sweep.csv", "pe,delta_xi,status", &rows)
}

fn status_tag(e: &Error) -> &'static str {
    match e {
        Error::NoRoot { .. } => "no-root",
        Error::MultipleRoots { .. } => "multiple-roots",
        _ => "error",
    }
}
