//! Batch front-end: reads one TOML configuration, runs the requested
//! pipeline stages, and writes the tables as files. Every file carries a
//! provenance header, and re-running a command with the same
//! configuration byte-reproduces its outputs.

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use stospec::config::RunConfig;
use stospec::cycles::{enumerate_prime_itineraries, locate_cycle, Cycle};
use stospec::direct::compare_curves;
use stospec::output;
use stospec::pipeline::{run_expansion, ExpansionRun};

#[derive(Parser)]
#[command(
    name = "stospec",
    version,
    about = "Weak-noise perturbative spectra of noisy expanding maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration (defaults to the built-in quartic run)
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory, overriding the configuration
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Longest cycle length, overriding the configuration
    #[arg(long, global = true, value_name = "N")]
    nmax: Option<usize>,
    /// Highest power of σ, overriding the configuration
    #[arg(long, global = true, value_name = "K")]
    sigma_order: Option<usize>,
    /// Suppress progress output (files are still written)
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Locate all prime cycles and write the cycle table
    Cycles,
    /// Run the perturbative expansion: convergence table, coefficients,
    /// cumulants
    Perturb,
    /// Compare the weak-noise partial sums against finite-noise
    /// eigenvalues across the σ grid
    Direct,
    /// Run every stage in order, reusing intermediate results
    All,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<ExitCode> {
    let config = effective_config(cli)?;
    if matches!(cli.command, Command::Direct | Command::All) && config.sigma_grid.is_empty() {
        bail!("the direct comparison needs a non-empty σ grid in the configuration");
    }
    fs::create_dir_all(&config.out_dir)
        .with_context(|| format!("creating {}", config.out_dir.display()))?;
    let header = output::provenance_header(&config)?;
    match cli.command {
        Command::Cycles => cmd_cycles(&config, &header, cli.quiet),
        Command::Perturb => {
            let run = expand(&config, cli.quiet)?;
            cmd_perturb(&config, &run, &header, cli.quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Direct => {
            let run = expand(&config, cli.quiet)?;
            cmd_direct(&config, &run, &header, cli.quiet)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::All => {
            let run = expand(&config, cli.quiet)?;
            let text = output::render_cycle_table(&run.cycles, &header);
            emit(&config.out_dir, "cycles.csv", &text, cli.quiet)?;
            cmd_perturb(&config, &run, &header, cli.quiet)?;
            cmd_direct(&config, &run, &header, cli.quiet)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// The configuration with command-line overrides folded in and the
/// result re-validated.
fn effective_config(cli: &Cli) -> anyhow::Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)
            .with_context(|| format!("reading configuration {}", path.display()))?,
        None => RunConfig::quartic(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(n) = cli.nmax {
        config.n_max = n;
    }
    if let Some(k) = cli.sigma_order {
        config.sigma_order = k;
    }
    config.validate().context("validating configuration")?;
    Ok(config)
}

fn emit(dir: &Path, name: &str, text: &str, quiet: bool) -> anyhow::Result<()> {
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    if !quiet {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn expand(config: &RunConfig, quiet: bool) -> anyhow::Result<ExpansionRun> {
    let map = config.build_map()?;
    let kernel = config.build_kernel()?;
    let sizes = config.truncations()?;
    let run = run_expansion(
        map.as_ref(),
        &kernel,
        config.n_max,
        &sizes,
        config.tolerances.cycle_residual,
    )
    .context("running the perturbative expansion")?;

    // gate on the determinant residual at the located root: the cumulant
    // sum must actually vanish there to the configured tolerance
    let z0 = run.final_expansion().z_coeff(0);
    let residual: f64 = 1.0
        - (1..=config.n_max)
            .map(|n| run.cumulants.cumulant(n).coeff(0) * z0.powi(n as i32))
            .sum::<f64>();
    if residual.abs() > config.tolerances.newton {
        bail!(
            "determinant residual {residual:e} at z0 = {z0} exceeds the newton \
             tolerance {:e}",
            config.tolerances.newton
        );
    }
    if !quiet {
        println!(
            "{} prime cycles, nu_0 = {:.15}",
            run.cycles.len(),
            run.final_expansion().nu_coeff(0)
        );
    }
    Ok(run)
}

/// Locates every prime itinerary separately so one uninvertible word
/// cannot sink the run: failures go to stderr, the survivors are still
/// written, and the exit status reports the damage.
fn cmd_cycles(config: &RunConfig, header: &str, quiet: bool) -> anyhow::Result<ExitCode> {
    let map = config.build_map()?;
    let mut located: Vec<Cycle> = Vec::new();
    let mut failures = 0usize;
    for itinerary in enumerate_prime_itineraries(config.n_max, map.branch_count()) {
        match locate_cycle(map.as_ref(), &itinerary, config.tolerances.cycle_residual) {
            Ok(cycle) => located.push(cycle),
            Err(e) => {
                let word: String = itinerary.iter().map(|s| s.to_string()).collect();
                eprintln!("cycle {word}: {e}");
                failures += 1;
            }
        }
    }
    let text = output::render_cycle_table(&located, header);
    emit(&config.out_dir, "cycles.csv", &text, quiet)?;
    if !quiet {
        println!("{} prime cycles located", located.len());
    }
    Ok(if failures == 0 {
        ExitCode::SUCCESS
    } else {
        eprintln!("{failures} cycles failed");
        ExitCode::FAILURE
    })
}

fn cmd_perturb(
    config: &RunConfig,
    run: &ExpansionRun,
    header: &str,
    quiet: bool,
) -> anyhow::Result<()> {
    let text = output::render_convergence_table(run, header);
    emit(&config.out_dir, "convergence.txt", &text, quiet)?;
    let text = output::render_expansion_table(run.final_expansion(), header);
    emit(&config.out_dir, "expansion.csv", &text, quiet)?;
    let text = output::render_cumulant_table(&run.cumulants, header);
    emit(&config.out_dir, "cumulants.csv", &text, quiet)?;
    Ok(())
}

fn cmd_direct(
    config: &RunConfig,
    run: &ExpansionRun,
    header: &str,
    quiet: bool,
) -> anyhow::Result<()> {
    let map = config.build_map()?;
    let table = compare_curves(
        map.as_ref(),
        &config.sigma_grid,
        run.final_expansion(),
        config.direct.lattice_bins,
    )
    .context("building the finite-noise comparison")?;
    let text = output::render_comparison_table(&table, header);
    emit(&config.out_dir, "comparison.csv", &text, quiet)?;
    Ok(())
}
