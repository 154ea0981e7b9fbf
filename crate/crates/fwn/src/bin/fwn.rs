use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use fwn::analyzer::scenario_report;
use fwn::config::RunConfig;
use fwn::oneparticle::{
    gauge_matrix_element, gauge_matrix_element_quadrature, Block, ModeIndex, Momentum, OneParticleModel, Sign,
};
use fwn::suites::{run_suite, Suite};
use fwn::{FwnError, Result};

/// Fermionic white-noise calculus: verification suites and implementability analysis.
#[derive(Parser)]
#[command(name = "fwn", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and print its JSON report.
    Verify {
        /// Config JSON path, or `preset:<name>`.
        #[arg(long)]
        config: String,
        #[arg(long, value_parser = ["algebra", "operators", "implementer"])]
        suite: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Evaluate the implementability criteria over the cutoff ladder.
    Analyze {
        #[arg(long)]
        config: String,
        #[arg(long)]
        out: String,
        #[arg(long)]
        csv: Option<String>,
    },
    /// Print one gauge matrix element by closed form and by quadrature.
    Matelem {
        #[arg(long)]
        config: String,
        /// Outgoing momentum, comma separated (`1` or `0,1,0`).
        #[arg(long, allow_hyphen_values = true)]
        alpha_out: String,
        #[arg(long, allow_hyphen_values = true)]
        alpha_in: String,
        /// Internal label of the outgoing mode, `+` or `-`.
        #[arg(long, allow_hyphen_values = true)]
        s: String,
        #[arg(long, allow_hyphen_values = true)]
        t: String,
    },
    /// Print the lowest positive eigenvalues with their mode labels.
    Spectrum {
        #[arg(long)]
        config: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Print the JSON of a named preset.
    Preset { name: String },
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    config: &'a RunConfig,
    report: T,
}

fn parse_momentum(s: &str, dim: usize) -> Result<Momentum> {
    let parts: std::result::Result<Vec<i32>, _> = s.split(',').map(|x| x.trim().parse::<i32>()).collect();
    let parts = parts.map_err(|e| FwnError::Config(format!("bad momentum {s:?}: {e}")))?;
    if parts.len() != dim {
        return Err(FwnError::Config(format!("momentum {s:?} needs {dim} components")));
    }
    Momentum::from_slice(&parts)
}

fn parse_sign(s: &str) -> Result<Sign> {
    Sign::parse(s).ok_or_else(|| FwnError::Config(format!("internal label must be + or -, got {s:?}")))
}

fn write_file(path: &str, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| FwnError::Config(format!("cannot write {path}: {e}")))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { config, suite, seed, tol } => {
            let cfg = RunConfig::load(&config)?;
            let suite = Suite::parse(&suite).expect("clap restricts suite names");
            let seed = seed.unwrap_or(cfg.verify.seed);
            let tol = tol.or(cfg.verify.tol);
            if let Some(t) = tol {
                if !(t > 0.0 && t.is_finite()) {
                    return Err(FwnError::Config("--tol must be > 0".into()));
                }
            }
            let rep = run_suite(suite, &cfg, seed, tol)?;
            println!("{}", serde_json::to_string_pretty(&Envelope { config: &cfg, report: &rep })?);
            Ok(rep.pass)
        }
        Command::Analyze { config, out, csv } => {
            let cfg = RunConfig::load(&config)?;
            let a = &cfg.analysis;
            let rep = scenario_report(&cfg.scenario, &cfg.gauge_function()?, &a.p_values, &a.ladder, a.rel_tol)?;
            write_file(&out, &(serde_json::to_string_pretty(&Envelope { config: &cfg, report: &rep })? + "\n"))?;
            if let Some(path) = csv {
                write_file(&path, &rep.to_csv())?;
            }
            for c in &rep.criteria {
                println!("{:<16} p={:<5} {:?} (exponent {:.3})", c.kind.name(), c.p, c.report.verdict, c.report.growth_exponent);
            }
            Ok(true)
        }
        Command::Matelem { config, alpha_out, alpha_in, s, t } => {
            let cfg = RunConfig::load(&config)?;
            let dim = cfg.scenario.dim();
            let model = OneParticleModel::build(&cfg.scenario)?;
            let gauge = cfg.gauge_function()?;
            let out = ModeIndex::positive(parse_momentum(&alpha_out, dim)?, parse_sign(&s)?);
            let inp = ModeIndex::positive(parse_momentum(&alpha_in, dim)?, parse_sign(&t)?);
            for block in [Block::PlusPlus, Block::PlusMinusGamma] {
                let cf = gauge_matrix_element(&model, &gauge, &out, &inp, block)?;
                let qu = gauge_matrix_element_quadrature(&model, &gauge, &out, &inp, block)?;
                let name = match block {
                    Block::PlusPlus => "plus_plus",
                    Block::PlusMinusGamma => "plus_minus_gamma",
                };
                println!(
                    "{name:<17} formula {:+.15e}{:+.15e}i  quadrature {:+.15e}{:+.15e}i  diff {:.3e}",
                    cf.re,
                    cf.im,
                    qu.re,
                    qu.im,
                    (cf - qu).norm()
                );
            }
            Ok(true)
        }
        Command::Spectrum { config, count } => {
            let cfg = RunConfig::load(&config)?;
            let model = OneParticleModel::build(&cfg.scenario)?;
            println!("{:>5}  {:<12} {:>2}  {:>18}  {:>18}", "index", "momentum", "s", "sqrt_E", "lambda");
            let mut order: Vec<usize> = (0..model.len()).collect();
            order.sort_by(|&a, &b| model.eigenvalue(a).total_cmp(&model.eigenvalue(b)));
            for &k in order.iter().take(count) {
                let md = model.mode(k);
                println!(
                    "{:>5}  {:<12} {:>2}  {:>18.15}  {:>18.15}",
                    k,
                    format!("{:?}", md.momentum.components(model.dim())),
                    md.internal,
                    model.dirac_energy(k),
                    model.eigenvalue(k)
                );
            }
            Ok(true)
        }
        Command::Preset { name } => {
            println!("{}", RunConfig::preset(&name)?.to_json());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
