//! `optstop` command line: `solve`, `plot`, `green`, `smoothfit`, `verify`.
//!
//! Exit codes: 0 on success, 2 when an optimality hypothesis fails (majorant,
//! sign conditions, Monte-Carlo dominance), 1 on any other error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::config::ProblemConfig;
use crate::diffusion::{green, Side};
use crate::driver::{fmt_regions, solve, Solved};
use crate::error::{Error, Result};
use crate::markov::linspace;
use crate::mc::{dominance_scan, simulate_paths};
use crate::output::{svg_plot, Cell, Series, Table};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got `{s}`"))?;
        let lo: f64 = a.trim().parse().map_err(|e| format!("bad LO `{a}`: {e}"))?;
        let hi: f64 = b.trim().parse().map_err(|e| format!("bad HI `{b}`: {e}"))?;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(format!("need finite LO < HI, got {lo}:{hi}"));
        }
        Ok(Range { lo, hi })
    }
}

#[derive(Debug, Parser)]
#[command(name = "optstop", version, about = "Perpetual discounted optimal stopping solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the problem and print thresholds, regions and coefficients.
    Solve(Opts),
    /// Tabulate g and V (CSV, or SVG when --out ends in .svg).
    Plot(Opts),
    /// Dump one row of the Green kernel, y ↦ G(x, y).
    Green(Opts),
    /// Smooth-fit diagnostics at a one-sided threshold.
    Smoothfit(Opts),
    /// Monte-Carlo check that no perturbed rule beats the solver.
    Verify(Opts),
}

#[derive(Debug, Args)]
pub struct Opts {
    /// Problem file (JSON).
    #[arg(long, value_name = "PATH")]
    pub config: PathBuf,
    /// Output file; stdout when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Evaluation window.
    #[arg(long, value_name = "LO:HI", allow_hyphen_values = true)]
    pub range: Option<Range>,
    /// Grid points for tables, paths for `verify`.
    #[arg(long, value_name = "N")]
    pub samples: Option<usize>,
    #[arg(long, value_name = "N")]
    pub seed: Option<u64>,
    /// Overrides the side of a one-sided solver.
    #[arg(long, value_parser = parse_side)]
    pub side: Option<Side>,
    /// Kernel row for `green`, start point for `verify`.
    #[arg(long, allow_hyphen_values = true)]
    pub x: Option<f64>,
}

fn parse_side(s: &str) -> std::result::Result<Side, String> {
    match s {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        _ => Err(format!("expected left or right, got `{s}`")),
    }
}

const DEFAULT_SAMPLES: usize = 201;

fn exit_code(e: &Error) -> i32 {
    if e.is_hypothesis_failure() {
        EXIT_HYPOTHESIS
    } else {
        EXIT_ERROR
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("OPTSTOP_LOG", "error");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    init_logging();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return EXIT_ERROR;
            }
            let _ = write!(stdout, "{}", e.render());
            return EXIT_OK;
        }
    };
    match dispatch(&cli.command, stdout) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn dispatch(cmd: &Command, stdout: &mut dyn Write) -> Result<()> {
    let opts = match cmd {
        Command::Solve(o) | Command::Plot(o) | Command::Green(o) | Command::Smoothfit(o) | Command::Verify(o) => o,
    };
    let cfg = ProblemConfig::from_path(&opts.config)?;
    log::info!("loaded {}", opts.config.display());
    match cmd {
        Command::Solve(o) => cmd_solve(&cfg, o, stdout),
        Command::Plot(o) => cmd_plot(&cfg, o, stdout),
        Command::Green(o) => cmd_green(&cfg, o, stdout),
        Command::Smoothfit(o) => cmd_smoothfit(&cfg, o, stdout),
        Command::Verify(o) => cmd_verify(&cfg, o, stdout),
    }
}

fn emit(out: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Error::Config(format!("{}: {e}", p.display()))),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Error::Config(format!("stdout: {e}"))),
    }
}

fn solve_cfg(cfg: &ProblemConfig, o: &Opts) -> Result<Solved> {
    solve(&cfg.build()?, &cfg.tolerances, o.side)
}

fn grid(s: &Solved, o: &Opts) -> Vec<f64> {
    let (lo, hi) = o.range.map_or_else(|| s.default_range(), |r| (r.lo, r.hi));
    linspace(lo, hi, o.samples.unwrap_or(DEFAULT_SAMPLES).max(2))
}

fn value_table(s: &Solved, xs: &[f64]) -> Result<Table> {
    let mut t = Table::new(&["x", "g", "v", "in_stopping_region", "dv_left", "dv_right"]);
    let vs = xs.iter().map(|&x| s.value(x)).collect::<Result<Vec<_>>>()?;
    for (i, (&x, &v)) in xs.iter().zip(&vs).enumerate() {
        let (dl, dr) = match s.solution() {
            Some(sol) => (sol.value_deriv(x, Side::Left), sol.value_deriv(x, Side::Right)),
            None => {
                let back = if i > 0 { (v - vs[i - 1]) / (x - xs[i - 1]) } else { f64::NAN };
                let fwd = if i + 1 < xs.len() { (vs[i + 1] - v) / (xs[i + 1] - x) } else { f64::NAN };
                (if back.is_nan() { fwd } else { back }, if fwd.is_nan() { back } else { fwd })
            }
        };
        t.push(vec![x.into(), s.g(x).into(), v.into(), s.in_stopping(x).into(), dl.into(), dr.into()]);
    }
    Ok(t)
}

fn cmd_solve(cfg: &ProblemConfig, o: &Opts, stdout: &mut dyn Write) -> Result<()> {
    let s = solve_cfg(cfg, o)?;
    let _ = write!(stdout, "{}", s.summary());
    if let Some(path) = &o.out {
        let t = value_table(&s, &grid(&s, o))?;
        emit(Some(path), &t.to_csv(), stdout)?;
    }
    Ok(())
}

fn cmd_plot(cfg: &ProblemConfig, o: &Opts, stdout: &mut dyn Write) -> Result<()> {
    let s = solve_cfg(cfg, o)?;
    let xs = grid(&s, o);
    let svg = o.out.as_ref().is_some_and(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("svg")));
    if !svg {
        return emit(o.out.as_deref(), &value_table(&s, &xs)?.to_csv(), stdout);
    }
    let mut g = Vec::with_capacity(xs.len());
    let mut v = Vec::with_capacity(xs.len());
    for &x in &xs {
        let (gx, vx) = (s.g(x), s.value(x)?);
        g.push(Some((x, gx)));
        v.push(((vx - gx).abs() > 1e-9 * gx.abs().max(1.0)).then_some((x, vx)));
    }
    let series = [
        Series { label: "g".into(), color: "black".into(), width: 1.5, points: g },
        Series { label: "V".into(), color: "gray".into(), width: 3.0, points: v },
    ];
    emit(o.out.as_deref(), &svg_plot(&series), stdout)
}

fn cmd_green(cfg: &ProblemConfig, o: &Opts, stdout: &mut dyn Write) -> Result<()> {
    let x = o.x.ok_or_else(|| Error::Config("green needs --x".into()))?;
    let mut t = Table::new(&["y", "green", "density"]);
    let problem = cfg.build()?;
    match &problem {
        crate::config::Problem::Diffusion { bundle, .. } => {
            let p = bundle.process();
            let (lo, hi) = o.range.map_or((x - 5.0, x + 5.0), |r| (r.lo, r.hi));
            let state = p.state();
            for y in linspace(lo, hi, o.samples.unwrap_or(DEFAULT_SAMPLES).max(2)) {
                if !state.contains_interior(y) {
                    continue;
                }
                let gxy = green(p, x, y)?;
                t.push(vec![y.into(), gxy.into(), (gxy * p.speed_density(y)).into()]);
            }
        }
        crate::config::Problem::Jump { spec, dft, .. } => {
            let row = crate::jump::OuKernel::new(*spec, *dft)?.row(x)?;
            log::info!("row mass {} (1/α = {}), edge {:e}", row.mass, 1.0 / spec.alpha, row.edge_magnitude);
            for (&y, &g) in row.y.iter().zip(&row.g) {
                if o.range.is_none_or(|r| y >= r.lo && y <= r.hi) {
                    t.push(vec![y.into(), g.into(), g.into()]);
                }
            }
        }
    }
    emit(o.out.as_deref(), &t.to_csv(), stdout)
}

fn cmd_smoothfit(cfg: &ProblemConfig, o: &Opts, stdout: &mut dyn Write) -> Result<()> {
    let s = solve_cfg(cfg, o)?;
    let sf = s.smooth_fit().ok_or_else(|| Error::Config("smoothfit needs a one_sided solver".into()))?;
    let mut t = Table::new(&["quantity", "continuation_side", "stopping_side", "smooth"]);
    t.push(vec!["dV/dx".into(), sf.d_x.left.into(), sf.d_x.right.into(), sf.classic_sf.into()]);
    t.push(vec!["dV/ds".into(), sf.d_scale.left.into(), sf.d_scale.right.into(), sf.scale_sf.into()]);
    t.push(vec!["dV/dpsi".into(), sf.d_psi.left.into(), sf.d_psi.right.into(), sf.psi_sf.into()]);
    let _ = writeln!(stdout, "x* = {:.10}, atom mass {:.6e}", sf.x_star, sf.atom_mass_k);
    emit(o.out.as_deref(), &t.to_csv(), stdout)
}

fn cmd_verify(cfg: &ProblemConfig, o: &Opts, stdout: &mut dyn Write) -> Result<()> {
    let s = solve_cfg(cfg, o)?;
    let mut sim = cfg.sim_config();
    if let Some(n) = o.samples {
        sim.paths = n;
    }
    if let Some(seed) = o.seed {
        sim.seed = seed;
    }
    let x0 = o.x.or(cfg.mc.and_then(|m| m.x0)).unwrap_or_else(|| s.default_start());
    let delta = match &s {
        Solved::OneSided { .. } | Solved::Jump { .. } => 0.3,
        _ => 0.2,
    };
    let candidates = s.perturbed_regions(delta);
    let batch = simulate_paths(s.sim_model()?, x0, sim)?;
    let v0 = s.value(x0)?;
    let g = |x: f64| s.g(x);
    log::info!("verify from x0 = {x0} with {} paths, {} candidates", sim.paths, candidates.len());
    let result = dominance_scan(&batch, &s.stopping_region(), &candidates, &g, cfg.alpha, v0);
    let mut t = Table::new(&["rule", "mean", "std_err"]);
    let _ = writeln!(stdout, "x0 = {x0}, V(x0) = {v0:.8}, paths = {}", sim.paths);
    match &result {
        Ok(rep) => {
            t.push(vec![Cell::Text(format!("solver {}", fmt_regions(&s.stopping_region()))), rep.own.mean.into(), rep.own.std_err.into()]);
            for (r, e) in candidates.iter().zip(&rep.candidates) {
                t.push(vec![Cell::Text(fmt_regions(r)), e.mean.into(), e.std_err.into()]);
            }
            let _ = writeln!(stdout, "dominance holds; worst excess {:.3} SE", rep.worst_excess);
        }
        Err(e) => {
            let _ = writeln!(stdout, "dominance failed: {e}");
        }
    }
    if !t.is_empty() {
        emit(o.out.as_deref(), &t.to_csv(), stdout)?;
    }
    result.map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_parsing() {
        assert_eq!("-3:2.5".parse::<Range>().unwrap(), Range { lo: -3.0, hi: 2.5 });
        assert!("3:1".parse::<Range>().is_err());
        assert!("3".parse::<Range>().is_err());
    }

    #[test]
    fn usage_errors_exit_one() {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        assert_eq!(run(["optstop", "solve"], &mut out, &mut err), EXIT_ERROR);
        assert_eq!(run(["optstop", "frobnicate"], &mut out, &mut err), EXIT_ERROR);
        assert_eq!(run(["optstop", "--help"], &mut out, &mut err), EXIT_OK);
        assert_eq!(run(["optstop", "solve", "--config", "/nonexistent.json"], &mut out, &mut err), EXIT_ERROR);
    }
}
