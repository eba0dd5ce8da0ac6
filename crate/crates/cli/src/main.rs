//! `phasecell`: build single-mode states, compute their phase-space fields,
//! cell and detector probabilities and nonclassicality measures, and run the
//! acceptance suite.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical tolerance failure,
//! 4 I/O failure.

mod output;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use phasecell::cells::{partition_probabilities, CellPartition};
use phasecell::detector::{detector_readout, DetectorSpec, ModeSpacing};
use phasecell::grid::{PhaseGrid, ScalarField};
use phasecell::nonclassicality::nonclassicality_report;
use phasecell::phase_space::{weyl_function, wigner_direct, wigner_from_weyl};
use phasecell::smoothing::{gaussian_smooth, husimi, SmoothingKernel};
use phasecell::states::{DensityDocument, FockDensityMatrix, PhysicsConfig, PositionWavefunction, StateSpec};
use phasecell::verify::{run_all, run_criterion};
use phasecell::{Error, Result};
use serde_json::json;

use output::{sink, write_field_csv, write_field_json, write_field_ppm, write_json, Units};

/// Nodes per axis of an `auto` grid unless `auto:N` is given.
const AUTO_NODES: usize = 161;

#[derive(Parser, Debug)]
#[command(name = "phasecell", version, about = "Phase-space quasiprobabilities of a single quantum mode")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// State: vacuum, fock:N, coherent:RE+IMi, cat:A (separation A in units
    /// of sigma), or a path to a density-matrix JSON file.
    #[arg(long, global = true, default_value = "vacuum")]
    state: String,
    /// Sampling grid: `auto`, `auto:N`, or `x0,x1,p0,p1,nx,np`.
    #[arg(long, global = true, default_value = "auto", allow_hyphen_values = true)]
    grid: String,
    /// Reduced Planck constant.
    #[arg(long, global = true, default_value_t = 1.0)]
    hbar: f64,
    /// Position width of the number basis (default 1/sqrt(2)).
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Number-basis dimension.
    #[arg(long, global = true, default_value_t = 48)]
    cutoff: usize,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format. PPM heatmaps use a blue-white-red palette with white
    /// at zero, scaled by the largest absolute value.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
    Ppm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Route {
    /// Fourier inversion of the Weyl function of the density matrix
    Weyl,
    /// Direct integral over the position wavefunction (named states only)
    Direct,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Density matrix of the state (JSON document or CSV entries).
    State,
    /// Wigner function on the grid.
    Wigner {
        #[arg(long, value_enum, default_value = "weyl")]
        route: Route,
    },
    /// Weyl function Tr[D(P,Q) rho]/(2 pi hbar); the grid's x axis is Q and its p axis is P.
    Weyl,
    /// Gaussian-smoothed Wigner function.
    Smooth {
        /// Kernel deviations `sx,sp`; defaults to the vacuum deviations (measure hbar/2).
        #[arg(long)]
        kernel: Option<String>,
    },
    /// Husimi function.
    Husimi,
    /// Cell probabilities for a partition.
    Cells {
        /// Partition JSON file; defaults to a uniform tiling of the grid.
        #[arg(long)]
        partition: Option<PathBuf>,
        /// Tiling `nx,np` used when no partition file is given.
        #[arg(long, default_value = "8,8")]
        tiles: String,
    },
    /// Plate-detector momentum readout.
    Detector {
        /// Plate thickness L.
        #[arg(long = "plate-L", default_value_t = 1.0)]
        plate_l: f64,
        /// Left edge of the plate; defaults to -L/2.
        #[arg(long = "plate-x0", allow_hyphen_values = true)]
        plate_x0: Option<f64>,
        /// Mode spacing: `periodic` (2 pi hbar/L), `fine` (pi hbar/(2L)) or a number.
        #[arg(long = "mode-spacing", default_value = "periodic")]
        mode_spacing: String,
    },
    /// Nonclassicality verdict and measures.
    Nonclass,
    /// Acceptance suite.
    Verify {
        /// Run every criterion.
        #[arg(long)]
        all: bool,
        /// Run selected criteria (repeatable).
        #[arg(long)]
        criterion: Vec<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_io() {
        4
    } else if e.is_numerical() {
        3
    } else {
        2
    }
}

/// The state as a density matrix, plus the wavefunction for named states.
struct Loaded {
    rho: FockDensityMatrix,
    psi: Option<PositionWavefunction>,
    units: Units,
}

fn config(common: &Common) -> Result<PhysicsConfig> {
    let defaults = PhysicsConfig::default();
    PhysicsConfig::new(common.hbar, common.sigma.unwrap_or(defaults.sigma), common.cutoff)
}

fn load_state(common: &Common) -> Result<Loaded> {
    let cfg = config(common)?;
    match StateSpec::from_str(&common.state) {
        Ok(spec) => {
            let rho = spec.density(&cfg)?;
            let psi = Some(spec.wavefunction(&cfg)?);
            Ok(Loaded { rho, psi, units: Units { hbar: cfg.hbar, sigma: cfg.sigma } })
        }
        Err(parse_err) => {
            let path = Path::new(&common.state);
            if !path.is_file() {
                return Err(parse_err);
            }
            let doc: DensityDocument = serde_json::from_str(&std::fs::read_to_string(path)?)?;
            let rho = FockDensityMatrix::from_document(&doc, cfg.tol_trace)?;
            let units = Units { hbar: rho.hbar(), sigma: rho.sigma() };
            Ok(Loaded { rho, psi: None, units })
        }
    }
}

fn parse_list<T: FromStr>(text: &str, what: &str, len: usize) -> Result<Vec<T>> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let values: Option<Vec<T>> = parts.iter().map(|p| p.parse().ok()).collect();
    match values {
        Some(v) if v.len() == len => Ok(v),
        _ => Err(Error::InvalidParameter(format!("cannot parse {what} '{text}': expected {len} comma-separated values"))),
    }
}

fn parse_grid(text: &str, rho: &FockDensityMatrix) -> Result<PhaseGrid> {
    let text = text.trim();
    if text == "auto" {
        return PhaseGrid::auto(rho, AUTO_NODES, AUTO_NODES);
    }
    if let Some(n) = text.strip_prefix("auto:") {
        let n: usize = n.parse().map_err(|_| Error::InvalidParameter(format!("cannot parse grid '{text}'")))?;
        return PhaseGrid::auto(rho, n, n);
    }
    let bad = || Error::InvalidParameter(format!("cannot parse grid '{text}': expected auto, auto:N or x0,x1,p0,p1,nx,np"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(bad());
    }
    let bounds: Vec<f64> = parts[..4].iter().map(|p| p.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let counts: Vec<usize> = parts[4..].iter().map(|p| p.parse()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    PhaseGrid::new(bounds[0], bounds[1], bounds[2], bounds[3], counts[0], counts[1], rho.hbar())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    let c = &cli.common;
    let out = c.out.as_deref();
    match &cli.command {
        Command::Verify { all, criterion } => return verify(*all, criterion, c.format, out),
        Command::State => {
            let loaded = load_state(c)?;
            return write_state(&loaded, c.format.unwrap_or(Format::Json), out).map(|_| ExitCode::SUCCESS);
        }
        _ => {}
    }
    let loaded = load_state(c)?;
    let grid = parse_grid(&c.grid, &loaded.rho)?;
    let units = loaded.units;
    match &cli.command {
        Command::Wigner { route } => {
            let field = match route {
                Route::Weyl => wigner_from_weyl(&loaded.rho, &grid)?,
                Route::Direct => {
                    let psi = loaded.psi.as_ref().ok_or_else(|| {
                        Error::InvalidParameter("the direct route needs a named state, not a density file".into())
                    })?;
                    wigner_direct(psi, &grid)?
                }
            };
            let manifest = serde_json::to_value(field.manifest())?;
            emit_field(&field, manifest, units, c.format, out)
        }
        Command::Husimi => {
            let field = husimi(&loaded.rho, &grid)?;
            let manifest = serde_json::to_value(field.manifest())?;
            emit_field(&field, manifest, units, c.format, out)
        }
        Command::Smooth { kernel } => {
            let kernel = match kernel {
                Some(text) => {
                    let v: Vec<f64> = parse_list(text, "kernel", 2)?;
                    SmoothingKernel::new(v[0], v[1], units.hbar)?
                }
                None => SmoothingKernel::quantum(units.sigma, units.hbar)?,
            };
            let field = gaussian_smooth(&wigner_from_weyl(&loaded.rho, &grid)?, &kernel)?;
            let mut manifest = field.manifest();
            manifest.kernel = Some(kernel);
            eprintln!("kernel sx={:e} sp={:e} measure={:e} quantum={}", kernel.sx, kernel.sp, kernel.measure, kernel.quantum);
            emit_field(&field, serde_json::to_value(manifest)?, units, c.format, out)
        }
        Command::Weyl => weyl(&loaded.rho, &grid, units, c.format, out),
        Command::Cells { partition, tiles } => {
            let part = match partition {
                Some(path) => CellPartition::from_json(&std::fs::read_to_string(path)?, units.hbar)?,
                None => {
                    let t: Vec<usize> = parse_list(tiles, "tiles", 2)?;
                    CellPartition::uniform(grid.window(), t[0], t[1], units.hbar)?
                }
            };
            let report = partition_probabilities(&wigner_from_weyl(&loaded.rho, &grid)?, &part)?;
            eprintln!("cells={} total={:.12} tail={:e} min={:e}", report.cells.len(), report.total, report.tail, report.min_value);
            match c.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut w = sink(out)?;
                    writeln!(w, "{}", units.csv_comment())?;
                    report.write_csv(&mut w)?;
                    w.flush()?;
                }
                Format::Json => write_json(&json!({ "units": units.to_json(), "report": report }), sink(out)?)?,
                Format::Ppm => return Err(unsupported("cells", Format::Ppm)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Detector { plate_l, plate_x0, mode_spacing } => {
            let spacing = ModeSpacing::from_str(mode_spacing)?;
            let x0 = plate_x0.unwrap_or(-0.5 * plate_l);
            let p_reach = grid.p_max.abs().max(grid.p_min.abs());
            let spec = DetectorSpec::for_state(&loaded.rho, *plate_l, x0, spacing, p_reach)?;
            let readout = detector_readout(&loaded.rho, &spec, spacing, &grid)?;
            let s = readout.summary();
            eprintln!(
                "L={:e} spacing={:e} sigma_x={:e} sigma_p={:e} product={:e} captured={:.12} escaped={:e}",
                s.length, s.spacing, s.sigma_x, s.sigma_p, s.product, s.captured_mass, s.escaped_mass
            );
            match c.format.unwrap_or(Format::Csv) {
                Format::Csv => {
                    let mut w = sink(out)?;
                    writeln!(w, "{}", units.csv_comment())?;
                    readout.write_csv(&mut w)?;
                    w.flush()?;
                }
                Format::Json => {
                    write_json(&json!({ "units": units.to_json(), "summary": s, "readout": readout }), sink(out)?)?
                }
                Format::Ppm => return Err(unsupported("detector", Format::Ppm)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Nonclass => {
            let report = nonclassicality_report(&loaded.rho, &grid)?;
            match c.format {
                None => {
                    let mut w = sink(out)?;
                    writeln!(w, "{}", report.verdict())?;
                    w.flush()?;
                }
                Some(Format::Json) => write_json(&json!({ "units": units.to_json(), "verdict": report.verdict(), "report": report }), sink(out)?)?,
                Some(f) => return Err(unsupported("nonclass", f)),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::State | Command::Verify { .. } => unreachable!("handled above"),
    }
}

fn unsupported(command: &str, format: Format) -> Error {
    Error::InvalidParameter(format!("{command} does not support {format:?} output"))
}

fn emit_field(field: &ScalarField, manifest: serde_json::Value, units: Units, format: Option<Format>, out: Option<&Path>) -> Result<ExitCode> {
    let stats = field.stats();
    eprintln!("{:?} field: min={:e} max={:e} mass={:.12}", field.kind(), stats.min, stats.max, stats.mass);
    match format.unwrap_or(Format::Csv) {
        Format::Csv => write_field_csv(field, units, sink(out)?)?,
        Format::Json => write_field_json(field, manifest, units, sink(out)?)?,
        Format::Ppm => write_field_ppm(field, sink(out)?)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn weyl(rho: &FockDensityMatrix, grid: &PhaseGrid, units: Units, format: Option<Format>, out: Option<&Path>) -> Result<ExitCode> {
    let mut rows = Vec::with_capacity(grid.nx * grid.np);
    for i in 0..grid.nx {
        for j in 0..grid.np {
            rows.push(weyl_function(rho, grid.p(j), grid.x(i))?);
        }
    }
    match format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut w = sink(out)?;
            writeln!(w, "{}", units.csv_comment())?;
            writeln!(w, "Q,P,re,im")?;
            for r in &rows {
                writeln!(w, "{:e},{:e},{:e},{:e}", r.q, r.p, r.value.re, r.value.im)?;
            }
            w.flush()?;
        }
        Format::Json => {
            let values: Vec<[f64; 4]> = rows.iter().map(|r| [r.q, r.p, r.value.re, r.value.im]).collect();
            write_json(&json!({ "units": units.to_json(), "grid": grid, "columns": ["Q", "P", "re", "im"], "values": values }), sink(out)?)?;
        }
        Format::Ppm => return Err(unsupported("weyl", Format::Ppm)),
    }
    Ok(ExitCode::SUCCESS)
}

fn write_state(loaded: &Loaded, format: Format, out: Option<&Path>) -> Result<()> {
    let rho = &loaded.rho;
    eprintln!(
        "dim={} trace={:.12} purity={:.12} min_eigenvalue={:e}",
        rho.dim(),
        rho.trace(),
        rho.purity(),
        rho.min_eigenvalue()
    );
    match format {
        Format::Json => write_json(&serde_json::to_value(rho.to_document())?, sink(out)?),
        Format::Csv => {
            let mut w = sink(out)?;
            writeln!(w, "{}", loaded.units.csv_comment())?;
            writeln!(w, "m,n,re,im")?;
            for m in 0..rho.dim() {
                for n in 0..rho.dim() {
                    let z = rho.entry(m, n);
                    writeln!(w, "{m},{n},{:e},{:e}", z.re, z.im)?;
                }
            }
            w.flush()?;
            Ok(())
        }
        Format::Ppm => Err(unsupported("state", Format::Ppm)),
    }
}

fn verify(all: bool, criteria: &[usize], format: Option<Format>, out: Option<&Path>) -> Result<ExitCode> {
    let outcomes = if all || criteria.is_empty() {
        run_all()
    } else {
        criteria.iter().map(|&id| run_criterion(id)).collect::<Result<Vec<_>>>()?
    };
    let passed = outcomes.iter().filter(|o| o.passed).count();
    match format {
        None | Some(Format::Csv) => {
            let mut w = sink(out)?;
            for o in &outcomes {
                writeln!(w, "{o}")?;
            }
            writeln!(w, "{passed} of {} criteria passed", outcomes.len())?;
            w.flush()?;
        }
        Some(Format::Json) => write_json(&serde_json::to_value(&outcomes)?, sink(out)?)?,
        Some(Format::Ppm) => return Err(unsupported("verify", Format::Ppm)),
    }
    Ok(if passed == outcomes.len() { ExitCode::SUCCESS } else { ExitCode::from(3) })
}
