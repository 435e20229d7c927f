//! `polygeom` command-line front end.
//!
//! Exit codes: 0 success, 1 a verdict failed, 2 invalid input,
//! 3 numerical or I/O failure, 4 padding did not converge.

mod input;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use polygeom::annulus::{epsilon_scan, EPSILON_CSV_HEADER};
use polygeom::circle::{lambda_scan, LAMBDA_CSV_HEADER};
use polygeom::geometry::{gram_matrix_in, BasisFamily, Domain, GeometryKind, GeometrySpec};
use polygeom::laplacian::{band_profile, laplacian};
use polygeom::numerics::DenseMatrix;
use polygeom::ortho::{jacobi_coefficients, multiplication_matrix, orthonormalize};
use polygeom::resolvent::stability_certificate;
use polygeom::Tolerances;
use serde::Serialize;

use crate::input::{load_spec, load_tolerances, parse_grid, LoadedSpec};
use crate::output::{csv, emit, json, matrix_csv, num};

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Numerical(String),
}

impl From<polygeom::Error> for Failure {
    fn from(e: polygeom::Error) -> Self {
        if e.is_validation() {
            Failure::Invalid(e.to_string())
        } else {
            Failure::Numerical(e.to_string())
        }
    }
}

impl From<polygeom::SpecError> for Failure {
    fn from(e: polygeom::SpecError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

/// Result of a command that ran to completion.
enum Outcome {
    Ok,
    VerdictFailed,
    Unconverged,
}

#[derive(Parser)]
#[command(name = "polygeom", version, about = "Finite-degree polynomial Hilbert geometries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Report,
}

#[derive(Args)]
struct Common {
    /// Geometry spec file (TOML).
    #[arg(long)]
    spec: PathBuf,
    /// Degree N; overrides `degree` in the spec file.
    #[arg(long)]
    degree: Option<usize>,
    /// Output path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// TOML file overriding individual tolerances.
    #[arg(long)]
    tol_overrides: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Orthonormal basis coefficients in the canonical basis.
    Orthogonalize(Common),
    /// Laplacian matrix in the orthonormal basis.
    Laplacian(Common),
    /// Stability certificate for a pair of geometries.
    Compare {
        #[command(flatten)]
        common: Common,
        /// Second geometry spec file.
        #[arg(long)]
        spec2: PathBuf,
        /// Padding cutoff M; chosen adaptively when absent.
        #[arg(long)]
        padding: Option<usize>,
    },
    /// Circle geometry (w, λ) against (w, 0) over a λ grid.
    ScanLambda {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid values.
        #[arg(long)]
        grid: String,
        /// Padding cutoff M; chosen adaptively when absent.
        #[arg(long)]
        padding: Option<usize>,
    },
    /// Annulus radial mode against its limit over a decreasing ε grid.
    ScanEpsilon {
        #[command(flatten)]
        common: Common,
        /// Comma-separated grid values.
        #[arg(long)]
        grid: String,
        /// Padding cutoff M; chosen adaptively when absent.
        #[arg(long)]
        padding: Option<usize>,
    },
    /// Three-term recurrence coefficients of an interval measure.
    Jacobi(Common),
}

struct Context {
    spec: LoadedSpec,
    degree: usize,
    tol: Tolerances,
    out: Option<PathBuf>,
    format: Format,
}

impl Context {
    fn new(common: &Common, default_format: Format) -> Result<Self, Failure> {
        let spec = load_spec(&common.spec)?;
        let degree = common
            .degree
            .or(spec.degree)
            .ok_or_else(|| Failure::Invalid("degree missing: pass --degree or set `degree` in the spec".into()))?;
        Ok(Self {
            degree,
            tol: load_tolerances(common.tol_overrides.as_deref())?,
            out: common.out.clone(),
            format: common.format.unwrap_or(default_format),
            spec,
        })
    }

    fn padding(&self, flag: Option<usize>) -> Option<usize> {
        flag.or(self.spec.padding)
    }

    fn write(&self, text: &str) -> Result<(), Failure> {
        emit(self.out.as_deref(), text)
    }
}

fn reject_padding(spec: &LoadedSpec, command: &str) -> Result<(), Failure> {
    if spec.padding.is_some() {
        return Err(Failure::Invalid(format!("`padding` is not used by {command}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct BasisReport {
    degree: usize,
    labels: Vec<String>,
    /// Column `k` holds the coordinates of `p_k`.
    coefficients: DenseMatrix,
    orthonormality_residual: f64,
}

fn orthogonalize(common: &Common) -> Result<Outcome, Failure> {
    let ctx = Context::new(common, Format::Csv)?;
    reject_padding(&ctx.spec, "orthogonalize")?;
    let gram = gram_matrix_in(&ctx.spec.geometry, ctx.degree, BasisFamily::Canonical, &ctx.tol)?;
    let basis = orthonormalize(&gram, &ctx.tol)?;
    let labels: Vec<String> = basis.labels.iter().map(ToString::to_string).collect();
    let text = match ctx.format {
        Format::Csv => {
            let header = std::iter::once("k".to_string())
                .chain(labels.iter().flat_map(|l| [format!("{l}.re"), format!("{l}.im")]))
                .collect::<Vec<_>>()
                .join(",");
            let c = &basis.coefficients;
            let rows = (0..c.ncols()).map(|k| {
                std::iter::once(k.to_string())
                    .chain((0..c.nrows()).flat_map(|i| [num(c[(i, k)].re), num(c[(i, k)].im)]))
                    .collect::<Vec<_>>()
                    .join(",")
            });
            csv(&header, rows.collect::<Vec<_>>())
        }
        Format::Report => json(&BasisReport {
            degree: ctx.degree,
            labels,
            orthonormality_residual: basis.orthonormality_residual(),
            coefficients: basis.coefficients,
        })?,
    };
    ctx.write(&text)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct LaplacianReport {
    degree: usize,
    labels: Vec<String>,
    entries: DenseMatrix,
    eigenvalues: Vec<f64>,
    bandwidth: usize,
    factorization_residual: f64,
}

fn laplacian_cmd(common: &Common) -> Result<Outcome, Failure> {
    let ctx = Context::new(common, Format::Csv)?;
    reject_padding(&ctx.spec, "laplacian")?;
    let lap = laplacian(&ctx.spec.geometry, ctx.degree, BasisFamily::Canonical, &ctx.tol)?;
    let text = match ctx.format {
        Format::Csv => matrix_csv(&lap.entries),
        Format::Report => json(&LaplacianReport {
            degree: ctx.degree,
            labels: lap.labels.iter().map(ToString::to_string).collect(),
            eigenvalues: lap.eigenvalues(&ctx.tol)?,
            bandwidth: band_profile(&lap.entries, &ctx.tol).bandwidth,
            factorization_residual: lap.factorization_residual(),
            entries: lap.entries,
        })?,
    };
    ctx.write(&text)?;
    Ok(Outcome::Ok)
}

fn compare(common: &Common, spec2: &Path, padding: Option<usize>) -> Result<Outcome, Failure> {
    let ctx = Context::new(common, Format::Report)?;
    let other = load_spec(spec2)?;
    let padding = ctx.padding(padding).or(other.padding);
    let cert = stability_certificate(&ctx.spec.geometry, &other.geometry, ctx.degree, padding, None, &ctx.tol)?;
    let text = match ctx.format {
        Format::Report => json(&cert)?,
        Format::Csv => {
            let mut rows = vec![
                format!("degree,{}", cert.degree),
                format!("padding,{}", cert.padding.padding),
                format!("padding_converged,{}", cert.padding.converged),
                format!("padding_change,{}", num(cert.padding.change)),
                format!("d_res,{}", num(cert.d_res)),
                format!("d_res_padded,{}", num(cert.d_res_padded)),
                format!("d_res_truncated,{}", num(cert.d_res_truncated)),
                format!("weyl_gap,{}", num(cert.weyl_gap)),
                format!("projector_diff,{}", num(cert.projector_diff)),
                format!("basis_residual_g1,{}", num(cert.alignment.residual_g1)),
                format!("basis_residual_g2,{}", num(cert.alignment.residual_g2)),
                format!("basis_residual_flat,{}", num(cert.alignment.residual_flat)),
                format!("kernel_sup_diff,{}", num(cert.kernel_sup_diff)),
            ];
            if let (Some(c), Some(l)) = (cert.bound_constant, cert.d_res_weighted) {
                rows.push(format!("cn_constant,{}", num(c)));
                rows.push(format!("d_res_weighted,{}", num(l)));
            }
            for check in &cert.checks {
                let verdict = serde_json::to_value(check.verdict).map_err(|e| Failure::Numerical(e.to_string()))?;
                rows.push(format!("check:{},{}", check.name, verdict.as_str().unwrap_or_default()));
            }
            csv("quantity,value", rows)
        }
    };
    ctx.write(&text)?;
    Ok(if !cert.padding.converged {
        Outcome::Unconverged
    } else if cert.all_pass() {
        Outcome::Ok
    } else {
        Outcome::VerdictFailed
    })
}

fn scan_lambda(common: &Common, grid: &str, padding: Option<usize>) -> Result<Outcome, Failure> {
    let ctx = Context::new(common, Format::Csv)?;
    let GeometryKind::CircleWeighted { weight } = ctx.spec.geometry.kind() else {
        return Err(Failure::Invalid(
            "scan-lambda takes a circle_weighted geometry; λ values come from --grid".into(),
        ));
    };
    let Some(coefficients) = weight.fourier() else {
        return Err(Failure::Invalid("circle weight must be trigonometric".into()));
    };
    let grid = parse_grid(grid)?;
    let scan = lambda_scan(coefficients, ctx.degree, &grid, ctx.padding(padding), &ctx.tol)?;
    let text = match ctx.format {
        Format::Csv => csv(
            LAMBDA_CSV_HEADER,
            scan.rows.iter().map(|r| r.csv_line()).collect::<Vec<_>>(),
        ),
        Format::Report => json(&scan)?,
    };
    ctx.write(&text)?;
    Ok(if !scan.converged {
        Outcome::Unconverged
    } else if scan.all_pass() {
        Outcome::Ok
    } else {
        Outcome::VerdictFailed
    })
}

fn scan_epsilon(common: &Common, grid: &str, padding: Option<usize>) -> Result<Outcome, Failure> {
    let ctx = Context::new(common, Format::Csv)?;
    let GeometryKind::AnnulusRadialMode { mode, order, .. } = *ctx.spec.geometry.kind() else {
        return Err(Failure::Invalid(
            "scan-epsilon takes an annulus_radial_mode geometry; ε values come from --grid".into(),
        ));
    };
    let grid = parse_grid(grid)?;
    let scan = epsilon_scan(
        mode,
        f64::from(order),
        ctx.degree,
        &grid,
        ctx.padding(padding),
        &ctx.tol,
    )?;
    let text = match ctx.format {
        Format::Csv => csv(
            EPSILON_CSV_HEADER,
            scan.rows.iter().map(|r| r.csv_line()).collect::<Vec<_>>(),
        ),
        Format::Report => json(&scan)?,
    };
    ctx.write(&text)?;
    Ok(if !scan.converged() {
        Outcome::Unconverged
    } else if scan.all_pass() {
        Outcome::Ok
    } else {
        Outcome::VerdictFailed
    })
}

#[derive(Serialize)]
struct JacobiReport {
    degree: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

fn jacobi(common: &Common) -> Result<Outcome, Failure> {
    let ctx = Context::new(common, Format::Csv)?;
    reject_padding(&ctx.spec, "jacobi")?;
    let spec: &GeometrySpec = &ctx.spec.geometry;
    let is_interval_measure = matches!(spec.domain(), Domain::Interval { .. }) && spec.is_measure();
    if !is_interval_measure {
        return Err(Failure::Invalid(
            "jacobi needs an interval_weighted geometry or an order-0 annulus mode".into(),
        ));
    }
    let data = jacobi_coefficients(&multiplication_matrix(spec, ctx.degree, &ctx.tol)?, &ctx.tol)?;
    let text = match ctx.format {
        Format::Csv => {
            let rows = (0..data.b.len()).map(|n| {
                let a = if n == 0 { String::new() } else { num(data.a[n - 1]) };
                format!("{n},{a},{}", num(data.b[n]))
            });
            csv("n,a,b", rows.collect::<Vec<_>>())
        }
        Format::Report => json(&JacobiReport {
            degree: ctx.degree,
            a: data.a,
            b: data.b,
        })?,
    };
    ctx.write(&text)?;
    Ok(Outcome::Ok)
}

fn run(cli: &Cli) -> Result<Outcome, Failure> {
    match &cli.command {
        Command::Orthogonalize(c) => orthogonalize(c),
        Command::Laplacian(c) => laplacian_cmd(c),
        Command::Compare { common, spec2, padding } => compare(common, spec2, *padding),
        Command::ScanLambda { common, grid, padding } => scan_lambda(common, grid, *padding),
        Command::ScanEpsilon { common, grid, padding } => scan_epsilon(common, grid, *padding),
        Command::Jacobi(c) => jacobi(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerdictFailed) => {
            eprintln!("polygeom: at least one verdict failed");
            ExitCode::from(1)
        }
        Ok(Outcome::Unconverged) => {
            eprintln!("polygeom: padding did not converge; verdicts withheld");
            ExitCode::from(4)
        }
        Err(Failure::Invalid(msg)) => {
            eprintln!("polygeom: invalid input: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("polygeom: numerical failure: {msg}");
            ExitCode::from(3)
        }
    }
}
