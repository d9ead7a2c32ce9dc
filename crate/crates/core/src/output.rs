//! Rendering of output files: CSVs for machine consumption and an
//! aligned text table for reading, each opened by a `#`-prefixed
//! provenance block (tool version, configuration hash, truncation
//! parameters). Nothing is timestamped, so re-rendering the same run
//! byte-reproduces every file.

use crate::config::{KernelConfig, MapConfig, RunConfig};
use crate::cycles::Cycle;
use crate::direct::ComparisonTable;
use crate::error::Result;
use crate::pipeline::{CumulantTable, EigenExpansion, ExpansionRun};
use std::fmt::Write;

/// Machine-readable values carry 15 significant digits — all a double
/// can reliably promise.
fn sig15(x: f64) -> String {
    format!("{x:.14e}")
}

/// `x` to the given number of significant digits in positional notation,
/// for the human-readable table.
fn significant(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (digits as i32 - 1 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

fn map_label(map: &MapConfig) -> String {
    match map {
        MapConfig::Quartic => "quartic".into(),
        MapConfig::Linear { lambda } => format!("linear lambda={lambda}"),
        MapConfig::Polynomial { coefficients, .. } => {
            format!("polynomial degree={}", coefficients.len() - 1)
        }
    }
}

fn kernel_label(kernel: &KernelConfig) -> &'static str {
    match kernel {
        KernelConfig::Gaussian => "gaussian",
        KernelConfig::Moments { .. } => "custom-moments",
    }
}

/// The provenance block: every output file starts with these lines.
pub fn provenance_header(config: &RunConfig) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# stospec {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# config sha256: {}", config.content_hash()?);
    let _ = writeln!(out, "# map: {}", map_label(&config.map));
    let _ = writeln!(out, "# kernel: {}", kernel_label(&config.kernel));
    let _ = writeln!(
        out,
        "# n_max: {}  sigma_order: {}  truncations: {}",
        config.n_max,
        config.sigma_order,
        config
            .l_sizes
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(out)
}

/// CSV of located prime cycles, one row per cycle; the orbit points sit
/// space-separated in a single field, ordered to match the itinerary.
pub fn render_cycle_table(cycles: &[Cycle], header: &str) -> String {
    let mut out = String::from(header);
    out.push_str("itinerary,length,points,multiplier,residual\n");
    for cycle in cycles {
        let itinerary: String = cycle.itinerary.iter().map(|s| s.to_string()).collect();
        let points: Vec<String> = cycle.points.iter().map(|&x| sig15(x)).collect();
        let _ = writeln!(
            out,
            "{itinerary},{},{},{},{}",
            cycle.len(),
            points.join(" "),
            sig15(cycle.multiplier),
            sig15(cycle.residual)
        );
    }
    out
}

/// CSV of the eigenvalue expansion: one row per σ-power, carrying the
/// root coefficient `z_2k` and the rate coefficient `ν_2k`.
pub fn render_expansion_table(expansion: &EigenExpansion, header: &str) -> String {
    let mut out = String::from(header);
    out.push_str("sigma_power,z_coefficient,nu_coefficient\n");
    for k in 0..=expansion.k_max() {
        let _ = writeln!(
            out,
            "{},{},{}",
            2 * k,
            sig15(expansion.z_coeff(k)),
            sig15(expansion.nu_coeff(k))
        );
    }
    out
}

/// CSV of the determinant cumulants `Q_{n,j}` (the convergence data
/// behind the coefficient table), one row per `(n, σ-power)` pair.
pub fn render_cumulant_table(q: &CumulantTable, header: &str) -> String {
    let mut out = String::from(header);
    out.push_str("n,sigma_power,coefficient\n");
    for n in 1..=q.n_max() {
        let series = q.cumulant(n);
        for j in 0..=q.sigma_order() {
            let _ = writeln!(out, "{n},{j},{}", sig15(series.coeff(j)));
        }
    }
    out
}

/// Significant digits carried by each printed column of the text table,
/// matching what the most-converged row of the reference run resolves:
/// ν₄ and ν₁₀ have one digit fewer than the rest at this precision.
fn column_digits(k: usize) -> usize {
    match k {
        2 | 5 => 14,
        _ => 15,
    }
}

/// The human-readable convergence table: one row per cycle-truncation
/// length, one column per rate coefficient. Truncations whose
/// determinant momentarily has no real root print as dashes.
pub fn render_convergence_table(run: &ExpansionRun, header: &str) -> String {
    let k_max = run.final_expansion().k_max();
    let n_max = run.rows.len();
    let mut cells: Vec<Vec<String>> = Vec::with_capacity(n_max + 1);
    let mut title = vec!["n".to_string()];
    title.extend((0..=k_max).map(|k| format!("nu_{}", 2 * k)));
    cells.push(title);
    for n in 1..=n_max {
        let mut row = vec![n.to_string()];
        match run.row(n) {
            Some(expansion) => row
                .extend((0..=k_max).map(|k| significant(expansion.nu_coeff(k), column_digits(k)))),
            None => row.extend((0..=k_max).map(|_| "-".to_string())),
        }
        cells.push(row);
    }
    let mut widths = vec![0usize; k_max + 2];
    for row in &cells {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::from(header);
    for row in &cells {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", line.join("  "));
    }
    out
}

/// CSV of the finite-noise comparison: direct and lattice eigenvalues
/// against the weak-noise partial sums and their differences.
pub fn render_comparison_table(table: &ComparisonTable, header: &str) -> String {
    let mut out = String::from(header);
    out.push_str("sigma,lambda_direct,lambda_lattice");
    for k in 0..6 {
        let _ = write!(out, ",partial_k{k}");
    }
    for k in 0..6 {
        let _ = write!(out, ",diff_k{k}");
    }
    out.push('\n');
    for row in &table.rows {
        let _ = write!(
            out,
            "{},{},{}",
            sig15(row.sigma),
            sig15(row.lambda_direct),
            sig15(row.lambda_lattice)
        );
        for v in row.partial_sums {
            let _ = write!(out, ",{}", sig15(v));
        }
        for v in row.differences {
            let _ = write!(out, ",{}", sig15(v));
        }
        out.push('\n');
    }
    out
}
