//! Command-line front end: every command prints one deterministic table
//! with a provenance header tying it to the resolved inputs.

mod config;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{describe_enclosure, resolve_enclosure, resolve_lattice, GeomArgs, GHZ, MM};
use output::{config_hash, emit, fmt9, Cell, Format, Table};
use shuntcav::circuit::{
    closed_form_frequencies, fit_circuit_params, numeric_mode_frequencies,
    tight_binding_frequencies, BoundaryCase, CoupledCavityCircuit, NeighbourOrder,
};
use shuntcav::crosstalk::{
    fit_penetration_depth, gamma_profile, penetration_depth, CrosstalkProfile, ProfileEntry,
};
use shuntcav::oracle::{
    convergence_study, default_resolution, infinite_lattice_fundamental, lowest_modes, OracleField,
};
use shuntcav::spectra::{
    boundary_model_cutoff, plasma_frequency, shifted_spectrum, PLASMA_VALIDITY_RATIO,
};
use shuntcav::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "shuntcav",
    version,
    about = "Mode models for conducting package enclosures with inductive shunt arrays"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Enclosure description file (JSON)
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Write the table to this file instead of stdout
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Output format
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    /// Suppress advisory notes on stderr
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lowest lattice-shifted modes of the enclosure
    Modes(ModesArgs),
    /// Lattice cutoff and effective plasma parameters
    Plasma(PlasmaArgs),
    /// Coupled-cavity circuit spectrum
    Circuit(CircuitArgs),
    /// Distance profile of the evanescent qubit-qubit coupling
    Crosstalk(CrosstalkArgs),
    /// Finite-difference field solve of the enclosure modes
    Oracle(OracleArgs),
    /// Fit model parameters to observed data
    Fit(FitArgs),
    /// Plasma-frequency sweep over the post radius
    Sweep(SweepArgs),
}

#[derive(Args)]
struct ModesArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Number of modes to list
    #[arg(long, default_value_t = 10)]
    modes: usize,
    /// Add the circuit closed form with this coupling ratio, calibrated to
    /// the fundamental
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct PlasmaArgs {
    #[command(flatten)]
    geom: GeomArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BoundaryArg {
    /// No boundary inductance
    Zero,
    /// Boundary inductance equal to the coupling
    Equal,
    /// Twice the coupling
    Twice,
}

impl From<BoundaryArg> for BoundaryCase {
    fn from(b: BoundaryArg) -> Self {
        match b {
            BoundaryArg::Zero => BoundaryCase::Zero,
            BoundaryArg::Equal => BoundaryCase::EqualToCoupling,
            BoundaryArg::Twice => BoundaryCase::TwiceCoupling,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EngineArg {
    /// Eigenvalues of the full impedance matrix
    Numeric,
    /// Closed-form nearest-neighbor spectrum
    Closed,
    /// First-order tight-binding approximation
    Tight,
}

#[derive(Args)]
struct CircuitArgs {
    /// Mesh columns
    #[arg(long, default_value_t = 3)]
    nx: usize,
    /// Mesh rows
    #[arg(long, default_value_t = 3)]
    ny: usize,
    /// Isolated-cell frequency, GHz
    #[arg(long = "f0-ghz", value_name = "GHZ")]
    f0_ghz: f64,
    /// Nearest-neighbor coupling ratio Lg/L0
    #[arg(long)]
    beta: f64,
    /// Second-neighbor coupling ratio Lg2/L0
    #[arg(long, default_value_t = 0.0)]
    beta1: f64,
    /// Boundary inductance case
    #[arg(long, value_enum, default_value = "equal")]
    boundary: BoundaryArg,
    /// Spectrum engine
    #[arg(long, value_enum, default_value = "numeric")]
    engine: EngineArg,
}

#[derive(Args)]
struct CrosstalkArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Qubit frequencies, GHz (repeat or comma-separate for several)
    #[arg(long = "fq-ghz", value_name = "GHZ", required = true, value_delimiter = ',', num_args = 1..)]
    fq_ghz: Vec<f64>,
    /// Largest neighbor index on the line
    #[arg(long = "max-j", default_value_t = 8)]
    max_j: u32,
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Grid spacing, mm (default derived from the geometry)
    #[arg(long = "h-mm", value_name = "MM")]
    h_mm: Option<f64>,
    /// Number of modes to solve
    #[arg(long, default_value_t = 6)]
    modes: usize,
    /// Add the lattice-shift model and the relative deviation per mode
    #[arg(long)]
    compare: bool,
    /// Run a refinement study over N halvings of the spacing instead
    #[arg(long, value_name = "N")]
    levels: Option<usize>,
    /// Write the fundamental's field map to this CSV file
    #[arg(long = "field-out", value_name = "FILE")]
    field_out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    #[command(subcommand)]
    what: FitCmd,
}

#[derive(Subcommand)]
enum FitCmd {
    /// Fit the circuit ladder (f0, beta[, beta1]) to observed frequencies
    Circuit {
        /// CSV with an f_ghz column (commented lines are skipped)
        #[arg(long, value_name = "FILE")]
        observations: PathBuf,
        /// Mesh columns
        #[arg(long, default_value_t = 3)]
        nx: usize,
        /// Mesh rows
        #[arg(long, default_value_t = 3)]
        ny: usize,
        /// Neighbor order of the fitted model
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
        order: u8,
    },
    /// Fit a penetration depth to a normalized coupling profile
    Depth {
        /// CSV with d_mm and gamma columns (commented lines are skipped)
        #[arg(long, value_name = "FILE")]
        profile: PathBuf,
    },
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Comma-separated post radii, mm
    #[arg(long = "radii-mm", value_name = "MM", required = true, value_delimiter = ',', num_args = 1..)]
    radii_mm: Vec<f64>,
    /// Also solve the lattice unit cell per radius
    #[arg(long)]
    oracle: bool,
    /// Unit-cell grid spacing, mm (default derived from the lattice)
    #[arg(long = "h-mm", value_name = "MM")]
    h_mm: Option<f64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Invalid(_) => 2u8,
                Error::Domain(_) => 3,
                Error::Solver { .. } => 4,
                Error::Fit(_) => 5,
            })
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let table = match &cli.cmd {
        Cmd::Modes(a) => run_modes(cli, a)?,
        Cmd::Plasma(a) => run_plasma(cli, a)?,
        Cmd::Circuit(a) => run_circuit(cli, a)?,
        Cmd::Crosstalk(a) => run_crosstalk(cli, a)?,
        Cmd::Oracle(a) => run_oracle(cli, a)?,
        Cmd::Fit(a) => run_fit(cli, a)?,
        Cmd::Sweep(a) => run_sweep(cli, a)?,
    };
    emit(&table.render(cli.format), cli.out.as_deref())
}

fn note(cli: &Cli, text: &str) {
    if !cli.quiet {
        eprintln!("note: {text}");
    }
}

fn run_modes(cli: &Cli, a: &ModesArgs) -> Result<Table> {
    let spec = resolve_enclosure(cli.config.as_ref(), &a.geom)?;
    let shifted = shifted_spectrum(&spec, a.modes)?;
    if shifted.beyond_validity {
        note(cli, &format!(
            "r/a >= {PLASMA_VALIDITY_RATIO} is beyond the thin-post model's trusted range"
        ));
    }
    let resolved =
        format!("{}|modes={}|beta={:?}", describe_enclosure(&spec), a.modes, a.beta);

    let mut columns = vec!["index", "n", "m", "f_ghz"];
    // With --beta the circuit closed form is scaled so its (1,1) mode
    // matches the shifted fundamental; every other mode then probes how
    // well the circuit dispersion tracks the lattice-shift model.
    let circuit = match a.beta {
        Some(beta) => {
            let (cx, cy) = spec.shunt_counts;
            if cx < 1 || cy < 1 {
                return Err(Error::invalid(
                    "--beta needs a shunt lattice to define the patch mesh",
                ));
            }
            let circ = CoupledCavityCircuit::from_couplings(
                cx + 1,
                cy + 1,
                10.0 * GHZ,
                beta,
                0.0,
                BoundaryCase::EqualToCoupling,
            )?;
            let closed = closed_form_frequencies(&circ, BoundaryCase::EqualToCoupling)?;
            let f11_circ = closed
                .entries()
                .iter()
                .find(|(ij, _)| *ij == (1, 1))
                .map(|&(_, f)| f)
                .ok_or_else(|| Error::invalid("circuit spectrum lacks the (1,1) mode"))?;
            let f11_shift = shifted
                .spectrum
                .entries()
                .iter()
                .find(|(idx, _)| idx.n == 1 && idx.m == 1)
                .map(|&(_, f)| f)
                .ok_or_else(|| {
                    Error::invalid("listed modes do not include (1,1); raise --modes")
                })?;
            let scale = f11_shift / f11_circ;
            columns.push("f_circuit_ghz");
            Some((closed, scale))
        }
        None => None,
    };

    let mut rows = Vec::new();
    for (i, (idx, f)) in shifted.spectrum.entries().iter().enumerate() {
        let mut row = vec![
            Cell::Int(i as i64),
            Cell::Int(idx.n as i64),
            Cell::Int(idx.m as i64),
            Cell::Num(f / GHZ),
        ];
        if let Some((closed, scale)) = &circuit {
            let key = (idx.n as usize, idx.m as usize);
            let cell = closed
                .entries()
                .iter()
                .find(|(ij, _)| *ij == key)
                .map(|&(_, fc)| Cell::Num(fc * scale / GHZ))
                .unwrap_or(Cell::Empty);
            row.push(cell);
        }
        rows.push(row);
    }
    Ok(Table { command: "modes", config_hash: config_hash(&resolved), columns, rows })
}

fn run_plasma(cli: &Cli, a: &PlasmaArgs) -> Result<Table> {
    let spec = resolve_enclosure(cli.config.as_ref(), &a.geom)?;
    let eps = spec.eps_effective()?;
    let f_c = boundary_model_cutoff(spec.shunt_spacing, eps)?;
    let f_p = plasma_frequency(spec.shunt_spacing, spec.shunt_radius, eps)?;
    let valid = spec.shunt_radius > 0.0
        && spec.shunt_radius < PLASMA_VALIDITY_RATIO * spec.shunt_spacing;
    if !valid {
        note(cli, "lattice is absent or beyond the thin-post model's trusted range");
    }
    let resolved = format!("{}|plasma", describe_enclosure(&spec));
    Ok(Table {
        command: "plasma",
        config_hash: config_hash(&resolved),
        columns: vec!["a_mm", "r_mm", "eps_eff", "f_cutoff_ghz", "f_plasma_ghz", "valid"],
        rows: vec![vec![
            Cell::Num(spec.shunt_spacing / MM),
            Cell::Num(spec.shunt_radius / MM),
            Cell::Num(eps),
            Cell::Num(f_c / GHZ),
            Cell::Num(f_p / GHZ),
            Cell::Text(valid.to_string()),
        ]],
    })
}

fn run_circuit(cli: &Cli, a: &CircuitArgs) -> Result<Table> {
    let circ = CoupledCavityCircuit::from_couplings(
        a.nx,
        a.ny,
        a.f0_ghz * GHZ,
        a.beta,
        a.beta1,
        a.boundary.into(),
    )?;
    let spectrum = match a.engine {
        EngineArg::Numeric => numeric_mode_frequencies(&circ)?,
        EngineArg::Closed => closed_form_frequencies(&circ, a.boundary.into())?,
        EngineArg::Tight => {
            let (s, beyond) = tight_binding_frequencies(&circ)?;
            if beyond {
                note(cli, &format!(
                    "beta = {} exceeds the tight-binding validity ratio; dropped terms reach the percent level",
                    a.beta
                ));
            }
            s
        }
    };
    let resolved = format!(
        "circuit|nx={}|ny={}|f0_ghz={}|beta={}|beta1={}|boundary={:?}|engine={:?}",
        a.nx, a.ny, a.f0_ghz, a.beta, a.beta1, a.boundary, a.engine
    );
    let rows = spectrum
        .entries()
        .iter()
        .enumerate()
        .map(|(k, ((i, j), f))| {
            vec![
                Cell::Int(k as i64),
                Cell::Int(*i as i64),
                Cell::Int(*j as i64),
                Cell::Num(f / GHZ),
            ]
        })
        .collect();
    Ok(Table {
        command: "circuit",
        config_hash: config_hash(&resolved),
        columns: vec!["index", "i", "j", "f_ghz"],
        rows,
    })
}

fn run_crosstalk(cli: &Cli, a: &CrosstalkArgs) -> Result<Table> {
    let (pitch, radius, eps) = resolve_lattice(cli.config.as_ref(), &a.geom, true)?;
    let f_p = plasma_frequency(pitch, radius, eps)?;
    if f_p == 0.0 {
        return Err(Error::invalid("crosstalk needs a shunt lattice (radius > 0)"));
    }
    if a.max_j < 1 {
        return Err(Error::invalid("--max-j must be at least 1"));
    }
    let omega_p = 2.0 * std::f64::consts::PI * f_p;
    let positions: Vec<u32> = (1..=a.max_j).collect();
    let multi = a.fq_ghz.len() > 1;
    let columns: Vec<&'static str> = if multi {
        vec!["fq_ghz", "delta_p_mm", "j", "d_mm", "gamma", "gamma_exp_approx"]
    } else {
        vec!["j", "d_mm", "gamma", "gamma_exp_approx"]
    };
    let mut rows = Vec::new();
    for &fq in &a.fq_ghz {
        let omega_q = 2.0 * std::f64::consts::PI * fq * GHZ;
        let delta_p = penetration_depth(omega_q, omega_p, eps)?;
        let prof = gamma_profile(&positions, pitch, delta_p)?;
        if !multi {
            note(cli, &format!(
                "delta_p = {} mm at fq = {} GHz (f_p = {} GHz)",
                fmt9(delta_p / MM),
                fmt9(fq),
                fmt9(f_p / GHZ)
            ));
        }
        for e in &prof.entries {
            let mut row = Vec::new();
            if multi {
                row.push(Cell::Num(fq));
                row.push(Cell::Num(delta_p / MM));
            }
            row.extend([
                Cell::Int(e.j as i64),
                Cell::Num(e.d / MM),
                Cell::Num(e.gamma),
                Cell::Num(e.gamma_exp),
            ]);
            rows.push(row);
        }
    }
    let resolved = format!(
        "crosstalk|a={pitch}|r={radius}|eps={eps}|fq_ghz={:?}|max_j={}",
        a.fq_ghz, a.max_j
    );
    Ok(Table { command: "crosstalk", config_hash: config_hash(&resolved), columns, rows })
}

fn run_oracle(cli: &Cli, a: &OracleArgs) -> Result<Table> {
    let spec = resolve_enclosure(cli.config.as_ref(), &a.geom)?;
    let h = match a.h_mm {
        Some(v) => v * MM,
        None => default_resolution(&spec)?,
    };

    if let Some(n_levels) = a.levels {
        if n_levels < 2 {
            return Err(Error::invalid("a refinement study needs at least 2 levels"));
        }
        let spacings: Vec<f64> = (0..n_levels).map(|i| h / 2f64.powi(i as i32)).collect();
        let study = convergence_study(&spec, &spacings)?;
        if !study.monotone {
            note(cli, "refinement sequence is not monotone; treat the order estimate with care");
        }
        let resolved = format!(
            "{}|oracle-levels|h={h}|levels={n_levels}",
            describe_enclosure(&spec)
        );
        let n = study.levels.len();
        let rows = study
            .levels
            .iter()
            .enumerate()
            .map(|(i, &(hi, fi))| {
                let last = i + 1 == n;
                vec![
                    Cell::Num(hi / MM),
                    Cell::Num(fi / GHZ),
                    if last {
                        study.observed_order.map(Cell::Num).unwrap_or(Cell::Empty)
                    } else {
                        Cell::Empty
                    },
                    if last { Cell::Num(study.extrapolated / GHZ) } else { Cell::Empty },
                ]
            })
            .collect();
        return Ok(Table {
            command: "oracle",
            config_hash: config_hash(&resolved),
            columns: vec!["h_mm", "f_ghz", "order_estimate", "extrapolated_ghz"],
            rows,
        });
    }

    let fields = lowest_modes(&spec, h, a.modes)?;
    let model = if a.compare { Some(shifted_spectrum(&spec, a.modes)?) } else { None };
    let resolved = format!(
        "{}|oracle|h={h}|modes={}|compare={}",
        describe_enclosure(&spec),
        a.modes,
        a.compare
    );
    let hash = config_hash(&resolved);

    if let Some(path) = &a.field_out {
        write_field_map(path, &fields[0], &hash)?;
    }

    let columns: Vec<&'static str> = if model.is_some() {
        vec!["index", "f_ghz", "f_plasma_ghz", "rel_err"]
    } else {
        vec!["index", "f_ghz"]
    };
    let mut rows = Vec::new();
    for (i, f) in fields.iter().enumerate() {
        let mut row = vec![Cell::Int(i as i64), Cell::Num(f.frequency / GHZ)];
        if let Some(m) = &model {
            let fm = m.spectrum.entries()[i].1;
            row.push(Cell::Num(fm / GHZ));
            row.push(Cell::Num((f.frequency - fm) / fm));
        }
        rows.push(row);
    }
    Ok(Table { command: "oracle", config_hash: hash, columns, rows })
}

/// Field map export: grid shape and fundamental frequency, then the
/// row-major node values of the unit-norm mode, one grid row per line.
fn write_field_map(path: &Path, field: &OracleField, hash: &str) -> Result<()> {
    let g = field.grid;
    let (nx, ny) = (g.nodes_x(), g.nodes_y());
    let mut out = String::new();
    out.push_str(&format!("# shuntcav {} | oracle-field | config={hash}\n", output::VERSION));
    out.push_str("nx,ny,h_mm,f_ghz\n");
    out.push_str(&format!(
        "{nx},{ny},{},{}\n",
        fmt9(g.hx / MM),
        fmt9(field.frequency / GHZ)
    ));
    for j in 0..ny {
        let line: Vec<String> =
            (0..nx).map(|i| fmt9(field.ez[g.node_index(i, j)])).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    std::fs::write(path, out)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", path.display())))
}

/// Hand-rolled CSV reader: `#`-prefixed and blank lines are skipped, the
/// first remaining line is the header.
fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::invalid(format!("{} has no header line", path.display())))?;
    let headers: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let cells: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if cells.len() != headers.len() {
            return Err(Error::invalid(format!(
                "{} row {}: {} cells for {} columns",
                path.display(),
                i + 1,
                cells.len(),
                headers.len()
            )));
        }
        rows.push(cells);
    }
    Ok((headers, rows))
}

fn column_of(headers: &[String], name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::invalid(format!("{} lacks a {name} column", path.display())))
}

fn parse_cell(raw: &str, name: &str, row: usize) -> Result<f64> {
    raw.parse::<f64>()
        .map_err(|_| Error::invalid(format!("row {row}: {name} value {raw:?} is not a number")))
}

fn run_fit(cli: &Cli, a: &FitArgs) -> Result<Table> {
    match &a.what {
        FitCmd::Circuit { observations, nx, ny, order } => {
            let (headers, raw_rows) = read_csv(observations)?;
            let fi = column_of(&headers, "f_ghz", observations)?;
            let mut obs = Vec::with_capacity(raw_rows.len());
            for (i, row) in raw_rows.iter().enumerate() {
                obs.push(parse_cell(&row[fi], "f_ghz", i + 1)? * GHZ);
            }
            let ord = if *order == 2 { NeighbourOrder::Two } else { NeighbourOrder::One };
            let fit = fit_circuit_params(&obs, *nx, *ny, ord)?;
            if !fit.converged {
                note(cli, "simplex stalled before reaching its tolerances");
            }
            let content_hash = config_hash(&format!(
                "fit-circuit|nx={nx}|ny={ny}|order={order}|{}",
                obs.iter().map(|f| fmt9(*f)).collect::<Vec<_>>().join(",")
            ));
            Ok(Table {
                command: "fit circuit",
                config_hash: content_hash,
                columns: vec!["f0_ghz", "beta", "beta1", "nre", "converged", "evaluations"],
                rows: vec![vec![
                    Cell::Num(fit.f0 / GHZ),
                    Cell::Num(fit.beta),
                    Cell::Num(fit.beta1),
                    Cell::Num(fit.nre),
                    Cell::Text(fit.converged.to_string()),
                    Cell::Int(fit.evaluations as i64),
                ]],
            })
        }
        FitCmd::Depth { profile } => {
            let (headers, raw_rows) = read_csv(profile)?;
            let di = column_of(&headers, "d_mm", profile)?;
            let gi = column_of(&headers, "gamma", profile)?;
            let ji = headers.iter().position(|h| h == "j");
            let mut entries = Vec::with_capacity(raw_rows.len());
            for (i, row) in raw_rows.iter().enumerate() {
                let d = parse_cell(&row[di], "d_mm", i + 1)? * MM;
                let gamma = parse_cell(&row[gi], "gamma", i + 1)?;
                let j = match ji {
                    Some(jc) => parse_cell(&row[jc], "j", i + 1)? as u32,
                    None => (i + 1) as u32,
                };
                entries.push(ProfileEntry { j, d, gamma, gamma_exp: gamma });
            }
            let prof = CrosstalkProfile::new(entries, 0.0)?;
            let fit = fit_penetration_depth(&prof)?;
            if !fit.monotone_input {
                note(cli, "profile is not monotone; the fit treats it as noisy data");
            }
            let content_hash = config_hash(&format!(
                "fit-depth|{}",
                prof.entries
                    .iter()
                    .map(|e| format!("{}:{}", fmt9(e.d), fmt9(e.gamma)))
                    .collect::<Vec<_>>()
                    .join(",")
            ));
            Ok(Table {
                command: "fit depth",
                config_hash: content_hash,
                columns: vec!["delta_p_mm", "rms_log_residual", "monotone_input"],
                rows: vec![vec![
                    Cell::Num(fit.delta_p / MM),
                    Cell::Num(fit.rms_log_residual),
                    Cell::Text(fit.monotone_input.to_string()),
                ]],
            })
        }
    }
}

/// Unit-cell default spacing: resolve the post radius, the gap, and the
/// pitch, mirroring the enclosure default.
fn unit_cell_default_h(a: f64, r: f64) -> f64 {
    if r > 0.0 {
        (a / 16.0).min((a - 2.0 * r) / 16.0).min(r / 2.0)
    } else {
        a / 16.0
    }
}

fn run_sweep(cli: &Cli, a: &SweepArgs) -> Result<Table> {
    let (pitch, _, eps) = resolve_lattice(cli.config.as_ref(), &a.geom, false)?;
    let columns: Vec<&'static str> = if a.oracle {
        vec!["r_mm", "f_plasma_ghz", "f_oracle_ghz", "rel_diff"]
    } else {
        vec!["r_mm", "f_plasma_ghz"]
    };
    let mut rows = Vec::new();
    for &r_mm in &a.radii_mm {
        let r = r_mm * MM;
        let f_p = plasma_frequency(pitch, r, eps)?;
        let mut row = vec![Cell::Num(r_mm), Cell::Num(f_p / GHZ)];
        if a.oracle {
            let h = a.h_mm.map(|v| v * MM).unwrap_or_else(|| unit_cell_default_h(pitch, r));
            let f_o = infinite_lattice_fundamental(pitch, r, eps, h)?;
            row.push(Cell::Num(f_o / GHZ));
            row.push(if f_p > 0.0 { Cell::Num((f_o - f_p) / f_p) } else { Cell::Empty });
        }
        rows.push(row);
    }
    let resolved = format!(
        "sweep|a={pitch}|eps={eps}|radii_mm={:?}|oracle={}|h_mm={:?}",
        a.radii_mm, a.oracle, a.h_mm
    );
    Ok(Table { command: "sweep", config_hash: config_hash(&resolved), columns, rows })
}
