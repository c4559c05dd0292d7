//! Command-line front end: graph generation, spectrum computation, floor/
//! ceil sweeps, reciprocal-condition scans and eigenfunction sampling.

use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use qg_core::equilateral::{
    ceil_approximation, distance, equilateral_spectrum, exact_representation, floor_approximation,
    initial_guesses, SpectrumFlag,
};
use qg_core::generate::{generate, random_lengths, GraphKind};
use qg_core::graph::MetricGraph;
use qg_core::io::{read_graph, write_graph, write_spectrum_csv, write_spectrum_json};
use qg_core::nep::{assemble_h, compute_spectrum, nullvector, pole_violation, rcond};
use qg_core::{eigenfunction, CombinatorialGraph};

#[derive(Parser)]
#[command(
    name = "qg",
    about = "Quantum graph spectra: equilateral estimates and Newton-trace refinement",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Star,
    Path,
    Cycle,
    Diamond,
    Ba,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a graph with seeded random edge lengths and write it as JSON.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        /// Vertex count (ignored for diamond).
        #[arg(long, default_value_t = 4)]
        n: usize,
        /// Attachment count for Barabasi-Albert graphs.
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 1.0)]
        len_min: f64,
        #[arg(long, default_value_t = 2.0)]
        len_max: f64,
        /// Decimal digits the lengths are rounded to.
        #[arg(long, default_value_t = 3)]
        decimals: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute the first eigenvalues of a graph.
    Spectrum {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 10)]
        q: usize,
        /// Equilateral step for the Newton pipeline.
        #[arg(long, conflicts_with = "exact_digits")]
        h: Option<f64>,
        /// Reference spectrum through the gcd representation of
        /// lengths with this many decimal digits.
        #[arg(long)]
        exact_digits: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Floor/ceil approximation sweep over steps h = 2^-J.
    Sweep {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value_t = 10)]
        q: usize,
        #[arg(long, default_value_t = 1)]
        j_min: u32,
        #[arg(long, default_value_t = 6)]
        j_max: u32,
        /// Add reference eigenvalues and error columns via the gcd
        /// representation at this many decimal digits.
        #[arg(long)]
        ref_digits: Option<u32>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the reciprocal condition number of H(z) over a z range.
    Scan {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        z_min: f64,
        #[arg(long)]
        z_max: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample the q-th eigenfunction along every edge.
    Eigenfunction {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        h: f64,
        /// 1-based eigenvalue index.
        #[arg(long, default_value_t = 2)]
        q: usize,
        /// Sample points per edge.
        #[arg(long, default_value_t = 50)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Generate {
            kind,
            n,
            k,
            len_min,
            len_max,
            decimals,
            seed,
            out,
        } => cmd_generate(kind, n, k, len_min, len_max, decimals, seed, &out),
        Command::Spectrum {
            graph,
            q,
            h,
            exact_digits,
            out,
            format,
        } => cmd_spectrum(&graph, q, h, exact_digits, &out, format),
        Command::Sweep {
            graph,
            q,
            j_min,
            j_max,
            ref_digits,
            out,
        } => cmd_sweep(&graph, q, j_min, j_max, ref_digits, &out),
        Command::Scan {
            graph,
            z_min,
            z_max,
            samples,
            out,
        } => cmd_scan(&graph, z_min, z_max, samples, &out),
        Command::Eigenfunction {
            graph,
            h,
            q,
            samples,
            out,
        } => cmd_eigenfunction(&graph, h, q, samples, &out),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_generate(
    kind: Kind,
    n: usize,
    k: usize,
    len_min: f64,
    len_max: f64,
    decimals: u32,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let graph: CombinatorialGraph = generate(
        match kind {
            Kind::Star => GraphKind::Star { n },
            Kind::Path => GraphKind::Path { n },
            Kind::Cycle => GraphKind::Cycle { n },
            Kind::Diamond => GraphKind::Diamond,
            Kind::Ba => GraphKind::BarabasiAlbert { n, k },
        },
        seed,
    )?;
    let lengths = random_lengths(graph.edge_count(), len_min, len_max, decimals, seed)?;
    let metric = MetricGraph::new(graph, lengths)?;
    write_graph(out, &metric)?;
    println!(
        "wrote {} vertices, {} edges to {}",
        metric.graph().vertex_count(),
        metric.graph().edge_count(),
        out.display()
    );
    Ok(())
}

fn cmd_spectrum(
    graph: &Path,
    q: usize,
    h: Option<f64>,
    exact_digits: Option<u32>,
    out: &Path,
    format: Format,
) -> Result<()> {
    let g = read_graph(graph).with_context(|| format!("reading {}", graph.display()))?;
    match (h, exact_digits) {
        (Some(h), None) => {
            if h > g.min_length() {
                bail!(
                    "step {h} exceeds the shortest edge length {}",
                    g.min_length()
                );
            }
            let result = compute_spectrum(&g, q, h)?;
            match format {
                Format::Json => write_spectrum_json(out, &result)?,
                Format::Csv => write_spectrum_csv(out, &result)?,
            }
            println!(
                "{} eigenvalue entries ({} missed guesses, {} grid candidates) -> {}",
                result.entries.len(),
                result.missed.len(),
                result.candidates.len(),
                out.display()
            );
        }
        (None, Some(digits)) => {
            let a = exact_representation(&g, digits)?;
            let spectrum = equilateral_spectrum(&a, q)?;
            let mut buf = Vec::new();
            match format {
                Format::Json => {
                    serde_json::to_writer_pretty(&mut buf, &spectrum.entries)?;
                    buf.push(b'\n');
                }
                Format::Csv => {
                    writeln!(buf, "lambda,source_mu,branch,flag")?;
                    for e in &spectrum.entries {
                        writeln!(
                            buf,
                            "{},{},{},{}",
                            e.lambda,
                            e.source_mu,
                            e.branch,
                            match e.flag {
                                SpectrumFlag::Vertex => "vertex",
                                SpectrumFlag::ExcludedBoundary => "excluded_boundary",
                            }
                        )?;
                    }
                }
            }
            std::fs::write(out, buf)?;
            println!(
                "reference spectrum with step h = {} -> {}",
                a.h,
                out.display()
            );
        }
        _ => bail!("exactly one of --h or --exact-digits is required"),
    }
    Ok(())
}

fn cmd_sweep(
    graph: &Path,
    q: usize,
    j_min: u32,
    j_max: u32,
    ref_digits: Option<u32>,
    out: &Path,
) -> Result<()> {
    if j_min > j_max {
        bail!("empty J range");
    }
    let g = read_graph(graph)?;
    let reference: Option<Vec<f64>> = match ref_digits {
        Some(d) => {
            let a = exact_representation(&g, d)?;
            Some(equilateral_spectrum(&a, q)?.vertex_lambdas())
        }
        None => None,
    };
    let mut buf = Vec::new();
    let mut header = String::from(
        "j,h,dist_floor,dist_ceil,q,lambda_floor,lambda_ceil,lambda_init,bracket_quality",
    );
    if reference.is_some() {
        header.push_str(",lambda_ref,err_floor,err_ceil");
    }
    writeln!(buf, "{header}")?;
    for j in j_min..=j_max {
        let h = 2f64.powi(-(j as i32));
        if h > g.min_length() {
            continue;
        }
        let dist_floor = distance(&g, &floor_approximation(&g, h)?)?;
        let dist_ceil = distance(&g, &ceil_approximation(&g, h)?)?;
        let guesses = initial_guesses(&g, h, q)?;
        for gs in &guesses {
            write!(
                buf,
                "{},{},{},{},{},{},{},{},{}",
                j,
                h,
                dist_floor,
                dist_ceil,
                gs.index,
                gs.floor_lambda,
                gs.ceil_lambda,
                gs.value,
                match gs.quality {
                    qg_core::equilateral::BracketQuality::Proper => "proper",
                    qg_core::equilateral::BracketQuality::Equal => "equal",
                    qg_core::equilateral::BracketQuality::Inverted => "inverted",
                }
            )?;
            if let Some(reference) = &reference {
                match reference.get(gs.index - 1) {
                    Some(r) => write!(
                        buf,
                        ",{},{},{}",
                        r,
                        (gs.floor_lambda - r).abs(),
                        (gs.ceil_lambda - r).abs()
                    )?,
                    None => write!(buf, ",,,")?,
                }
            }
            writeln!(buf)?;
        }
    }
    std::fs::write(out, buf)?;
    println!("sweep J={j_min}..{j_max} -> {}", out.display());
    Ok(())
}

fn cmd_scan(graph: &Path, z_min: f64, z_max: f64, samples: usize, out: &PathBuf) -> Result<()> {
    if !z_min.is_finite() || z_min <= 0.0 || z_max <= z_min || samples < 2 {
        bail!("need 0 < z_min < z_max and at least two samples");
    }
    let g = read_graph(graph)?;
    let mut buf = Vec::new();
    writeln!(buf, "z,rcond")?;
    for i in 0..samples {
        let z = z_min + (z_max - z_min) * i as f64 / (samples - 1) as f64;
        if pole_violation(&g, z).is_some() {
            continue; // guard band around a grid value
        }
        let h = assemble_h(&g, z)?;
        writeln!(buf, "{},{}", z, rcond(&h))?;
    }
    std::fs::write(out, buf)?;
    println!("scan of {samples} samples -> {}", out.display());
    Ok(())
}

fn cmd_eigenfunction(graph: &Path, h: f64, q: usize, samples: usize, out: &Path) -> Result<()> {
    if q == 0 {
        bail!("eigenvalue index q is 1-based");
    }
    let g = read_graph(graph)?;
    let result = compute_spectrum(&g, q, h)?;
    let expanded = result.eigenvalues_with_multiplicity();
    let Some(&lambda) = expanded.get(q - 1) else {
        bail!(
            "only {} eigenvalues converged, cannot sample index {q}",
            expanded.len()
        );
    };
    let f = if lambda == 0.0 {
        eigenfunction::constant(&g)
    } else {
        let basis = nullvector(&g, lambda)?;
        eigenfunction::reconstruct_family(&g, lambda, &basis)?
            .into_iter()
            .next()
            .context("empty eigenfunction family")?
    };
    let mut buf = Vec::new();
    writeln!(buf, "edge,x,value")?;
    for e in 0..g.graph().edge_count() {
        for i in 0..=samples {
            let x = g.length(e) * i as f64 / samples as f64;
            writeln!(buf, "{},{},{}", e, x, f.evaluate(e, x)?)?;
        }
    }
    std::fs::write(out, buf)?;
    println!(
        "eigenfunction q={q} (lambda = {lambda:.9}) sampled -> {}",
        out.display()
    );
    Ok(())
}
