mod config;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};
use config::Options;
use std::io::Write;
use stschrod::experiments::{self as exp, ExperimentConfig};
use stschrod::wave;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Experiment {
    /// Errors on meshes h_t = h_x = 1/N for N in --sizes
    Convergence,
    /// Errors for fixed --nt and spatial refinement ratios in --sizes
    Stability,
    /// Mass and energy at the temporal mesh nodes
    Conservation,
    /// Condition numbers of the scaled temporal matrices
    Conditioning,
    /// Eigenvalues of the temporal pencil
    Gevp,
    /// Root types and unit zeros of the symbol
    Symbol,
    /// Wave block matrices, Schur complements and the bound
    WaveCheck,
    /// A single oscillator solve
    Solve,
}

#[derive(Debug, Parser)]
#[command(name = "stschrod", version, about = "Space-time B-spline solver for the Schrodinger equation")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    #[command(flatten)]
    options: Options,
}

fn default_rhos() -> Vec<f64> {
    (0..20).map(|k| (0.05f64.ln() + (1000.0f64).ln() * k as f64 / 19.0).exp()).collect()
}

fn experiment_config(o: &Options) -> ExperimentConfig {
    let d = ExperimentConfig::default();
    ExperimentConfig {
        degree: o.degree.unwrap_or(d.degree),
        t_final: o.t_final.unwrap_or(d.t_final),
        domain: o.domain.unwrap_or(d.domain),
        omega: o.omega.unwrap_or(d.omega),
        level: o.hermite.unwrap_or(d.level),
        quad_order: None,
    }
}

/// Spatial elements matching the temporal meshsize.
fn matching_nx(cfg: &ExperimentConfig, nt: usize) -> usize {
    ((cfg.domain.1 - cfg.domain.0) * nt as f64 / cfg.t_final).round().max(2.0) as usize
}

fn run(experiment: Experiment, o: &Options) -> Result<String> {
    let cfg = experiment_config(o);
    let p = cfg.degree;
    let csv = match experiment {
        Experiment::Convergence => {
            let levels = o.sizes.clone().unwrap_or_else(|| vec![16, 32, 64]);
            exp::run_convergence(&cfg, &levels)?.to_csv()
        }
        Experiment::Stability => {
            let ratios = o.sizes.clone().unwrap_or_else(|| vec![1, 2, 4, 8, 16, 32, 64, 128]);
            exp::run_stability(&cfg, o.nt.unwrap_or(16), &ratios)?.to_stability_csv()
        }
        Experiment::Conservation => {
            let nt = o.nt.unwrap_or(64);
            let nx = o.nx.unwrap_or_else(|| matching_nx(&cfg, nt));
            exp::run_conservation(&cfg, nt, nx)?.to_csv()
        }
        Experiment::Conditioning => {
            let sizes = o.sizes.clone().unwrap_or_else(|| vec![100, 200, 400]);
            let rhos = o.rho.clone().unwrap_or_else(|| vec![1.0, 10.0, 100.0]);
            exp::conditioning_csv(&exp::run_conditioning(p, &sizes, &rhos)?)
        }
        Experiment::Gevp => exp::gevp_csv(&exp::run_gevp(p, o.nt.unwrap_or(16))?),
        Experiment::Symbol => {
            let rhos = o.rho.clone().unwrap_or_else(default_rhos);
            exp::symbol_csv(p, &exp::run_symbol(p, &rhos)?)
        }
        Experiment::WaveCheck => {
            let sizes = o.sizes.clone().unwrap_or_else(|| vec![100, 200, 400]);
            let mus = o.rho.clone().unwrap_or_else(|| vec![1.0, 25.0]);
            wave::wave_check_csv(p, &wave::wave_check(p, &sizes, &mus)?)
        }
        Experiment::Solve => {
            let nt = o.nt.unwrap_or(16);
            let nx = o.nx.unwrap_or_else(|| matching_nx(&cfg, nt));
            exp::solve_csv(&exp::run_solve(&cfg, nt, nx)?)
        }
    };
    Ok(csv)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let options = cli.options.resolve()?;
    let csv = run(cli.experiment, &options)?;
    match &options.out {
        Some(path) => std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().lock().write_all(csv.as_bytes())?,
    }
    Ok(())
}
