mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use vibropol::collective::{collective_spectrum_compare, prepare_collective_spec, run_direct, CollectiveReport};
use vibropol::config::{matrix_to_rows, Config, LoadedConfig, SurfaceBackend};
use vibropol::hessian::{relax, Equilibrium, ForceConstantSet};
use vibropol::models::{extract_params, lambda_sweep, model_modes, ModelVariant, SweepTable};
use vibropol::pipeline::{run_pipeline_from, PipelineResult};
use vibropol::polariton::{ir_spectrum, IrSpectrum};
use vibropol::system::{Configuration, ValidatedSystem};
use vibropol::units::hartree_to_wavenumber;

use output::{prepare_dir, write_json, Cell, Csv, Meta};

#[derive(Debug)]
pub enum CliError {
    Core(vibropol::Error),
    Io(String),
    Usage(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if !e.is_user_error() => 1,
            CliError::Internal(_) => 1,
            _ => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(m) | CliError::Usage(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<vibropol::Error> for CliError {
    fn from(e: vibropol::Error) -> Self {
        CliError::Core(e)
    }
}

#[derive(Parser)]
#[command(
    name = "vibropol",
    version,
    about = "Vibro-polariton normal modes and IR spectra in the cavity Born-Oppenheimer picture"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Relax nuclear and photon coordinates to the equilibrium.
    Relax(Common),
    /// Polariton modes, effective charges and the broadened IR spectrum.
    Modes(Common),
    /// Polariton pair at each coupling strength of the `sweep` section.
    Sweep(Common),
    /// Collective model for N molecules, optionally against the direct calculation.
    Collective(Common),
    /// Model variants against the full pipeline at the configured coupling.
    ModelCompare(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Reserved; every computation is deterministic.
    #[arg(long)]
    seed: Option<u64>,
    /// Start from an equilibrium file written by `relax`.
    #[arg(long)]
    equilibrium: Option<PathBuf>,
}

struct Context {
    loaded: LoadedConfig,
    system: ValidatedSystem,
    backend: SurfaceBackend,
    start: Configuration,
    out: PathBuf,
}

impl Context {
    fn new(args: &Common) -> Result<Self, CliError> {
        let loaded = Config::load(&args.config)?;
        let system = loaded.config.build_system()?;
        let backend = loaded.config.build_backend(&system, &loaded.base_dir)?;
        let start = match &args.equilibrium {
            Some(path) => read_equilibrium(path)?.equilibrium.configuration,
            None => Configuration::initial(&system),
        };
        start.check(&system)?;
        Ok(Self {
            loaded,
            system,
            backend,
            start,
            out: prepare_dir(&args.out)?,
        })
    }

    fn config(&self) -> &Config {
        &self.loaded.config
    }

    fn meta(&self, command: &str) -> Meta {
        Meta::new(command, &self.loaded.text)
    }

    fn numerics_line(&self) -> String {
        serde_json::to_string(&self.config().numerics).unwrap_or_default()
    }

    fn pipeline(&self) -> Result<PipelineResult, CliError> {
        Ok(run_pipeline_from(
            &self.system,
            &self.backend,
            &self.start,
            &self.config().numerics.pipeline(),
        )?)
    }
}

#[derive(Serialize, Deserialize)]
struct EquilibriumFile {
    meta: Meta,
    equilibrium: Equilibrium,
}

fn read_equilibrium(path: &Path) -> Result<EquilibriumFile, CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{}: not an equilibrium file: {e}", path.display())))
}

fn cmd_relax(ctx: &Context) -> Result<(), CliError> {
    let eq = relax(&ctx.system, &ctx.backend, &ctx.start, &ctx.config().numerics.relaxation)?;
    let file = EquilibriumFile {
        meta: ctx.meta("relax"),
        equilibrium: eq,
    };
    write_json(&ctx.out.join("equilibrium.json"), &file)?;
    eprintln!(
        "converged in {} iterations, E0 = {:.12} Eh, max |F| = {:.3e}",
        file.equilibrium.iterations, file.equilibrium.energy, file.equilibrium.max_force
    );
    Ok(())
}

#[derive(Serialize)]
struct ForceConstantFile<'a> {
    meta: Meta,
    e0: f64,
    dipole0: [f64; 3],
    equilibrium: &'a Configuration,
    c_rr: Vec<Vec<f64>>,
    c_qq: Vec<Vec<f64>>,
    c_qr: Vec<Vec<f64>>,
    dmu_dr: Vec<Vec<f64>>,
    dmu_dq: Vec<Vec<f64>>,
    richardson_error: f64,
    asymmetry: vibropol::hessian::BlockAsymmetry,
}

fn force_constant_file(meta: Meta, fcs: &ForceConstantSet) -> ForceConstantFile<'_> {
    ForceConstantFile {
        meta,
        e0: fcs.e0,
        dipole0: fcs.dipole0,
        equilibrium: &fcs.equilibrium,
        c_rr: matrix_to_rows(&fcs.c_rr),
        c_qq: matrix_to_rows(&fcs.c_qq),
        c_qr: matrix_to_rows(&fcs.c_qr),
        dmu_dr: matrix_to_rows(&fcs.dmu_dr),
        dmu_dq: matrix_to_rows(&fcs.dmu_dq),
        richardson_error: fcs.richardson_error,
        asymmetry: fcs.asymmetry,
    }
}

fn spectrum_csv(meta: &Meta, numerics: String, columns: &[&str], spectra: &[&IrSpectrum]) -> Csv {
    let first = spectra[0];
    let mut csv = Csv::new(
        meta,
        &[
            ("numerics", numerics),
            ("broadening_cm1", format!("{:e}", first.broadening_cm1)),
            ("normalization", IrSpectrum::NORMALIZATION.into()),
        ],
        columns,
    );
    for (i, w) in first.grid_cm1.iter().enumerate() {
        let mut cells = vec![Cell::Num(*w)];
        cells.extend(spectra.iter().map(|s| Cell::Num(s.intensity[i])));
        csv.row(&cells);
    }
    csv
}

fn cmd_modes(ctx: &Context) -> Result<(), CliError> {
    let result = ctx.pipeline()?;
    let meta = ctx.meta("modes");
    let numerics = ctx.numerics_line();
    let mut csv = Csv::new(
        &meta,
        &[
            ("numerics", numerics.clone()),
            ("e0_hartree", format!("{:e}", result.equilibrium.energy)),
            (
                "units",
                "omega in cm^-1 (negative when imaginary), Z* in atomic units".into(),
            ),
        ],
        &[
            "index",
            "omega_cm1",
            "photon_character",
            "Zstar_x",
            "Zstar_y",
            "Zstar_z",
            "ir_amplitude",
            "flags",
        ],
    );
    for (i, m) in result.modes.iter().enumerate() {
        let z = m.z_star().unwrap_or([0.0; 3]);
        csv.row(&[
            Cell::Int(i),
            Cell::Num(m.signed_omega_cm1()),
            Cell::Num(m.photon_character),
            Cell::Num(z[0]),
            Cell::Num(z[1]),
            Cell::Num(z[2]),
            Cell::Num(m.ir_amplitude()),
            Cell::Text(if m.imaginary { "imaginary".into() } else { String::new() }),
        ]);
    }
    csv.write(&ctx.out.join("modes.csv"))?;

    let numerics_cfg = &ctx.config().numerics;
    let spectrum = ir_spectrum(
        &result.modes,
        &numerics_cfg.spectrum.values()?,
        numerics_cfg.broadening_cm1,
    )?;
    spectrum_csv(&meta, numerics, &["omega_cm1", "intensity"], &[&spectrum]).write(&ctx.out.join("spectrum.csv"))?;
    write_json(
        &ctx.out.join("force_constants.json"),
        &force_constant_file(meta.clone(), &result.force_constants),
    )?;
    write_json(
        &ctx.out.join("equilibrium.json"),
        &EquilibriumFile {
            meta,
            equilibrium: result.equilibrium,
        },
    )?;
    Ok(())
}

fn cmd_sweep(ctx: &Context) -> Result<(), CliError> {
    let sweep = ctx
        .config()
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Usage("the sweep command needs a `sweep` section".into()))?;
    let lambdas = sweep.lambda_values()?;
    let table: SweepTable = lambda_sweep(
        &ctx.system,
        &ctx.backend,
        &lambdas,
        &ctx.config().numerics.pipeline(),
        &sweep.settings(),
    )?;
    let mut csv = Csv::new(
        &ctx.meta("sweep"),
        &[
            ("numerics", ctx.numerics_line()),
            ("target_mode", table.target_mode.to_string()),
            ("target_mode_cm1", format!("{:e}", table.target_mode_cm1)),
            ("target_photon", table.target_photon.to_string()),
            ("polarization", format!("{:?}", table.polarization)),
            ("units", "frequencies in cm^-1, model scalars in atomic units".into()),
        ],
        &[
            "lambda",
            "pipeline_omega_minus_cm1",
            "pipeline_omega_plus_cm1",
            "full_omega_minus_cm1",
            "full_omega_plus_cm1",
            "mu2_omega_minus_cm1",
            "mu2_omega_plus_cm1",
            "hopfield_omega_minus_cm1",
            "hopfield_omega_plus_cm1",
            "Xi",
            "dmu_dN",
            "dmu_dq",
            "lambda_eff",
        ],
    );
    for r in &table.rows {
        csv.row(&[
            Cell::Num(r.lambda),
            Cell::Num(r.pipeline.minus),
            Cell::Num(r.pipeline.plus),
            Cell::Num(r.full.minus),
            Cell::Num(r.full.plus),
            Cell::Num(r.mu2.minus),
            Cell::Num(r.mu2.plus),
            Cell::Num(r.hopfield.minus),
            Cell::Num(r.hopfield.plus),
            Cell::Num(r.xi),
            Cell::Num(r.dmu_dn),
            Cell::Num(r.dmu_dq),
            Cell::Num(r.lambda_eff),
        ]);
    }
    csv.write(&ctx.out.join("sweep.csv"))
}

#[derive(Serialize)]
struct CollectiveFile<'a> {
    meta: Meta,
    report: &'a CollectiveReport,
}

fn cmd_collective(ctx: &Context) -> Result<(), CliError> {
    let settings = ctx
        .config()
        .collective
        .as_ref()
        .ok_or_else(|| CliError::Usage("the collective command needs a `collective` section".into()))?;
    let SurfaceBackend::Polarizable(surface) = &ctx.backend else {
        return Err(CliError::Usage(
            "the collective command needs the polarizable backend".into(),
        ));
    };
    let pipeline = ctx.config().numerics.pipeline();
    let spec = prepare_collective_spec(&ctx.system, surface, settings, &pipeline)?;
    let direct = if settings.direct {
        Some(run_direct(&ctx.system, surface, settings, &pipeline)?)
    } else {
        None
    };
    let numerics = &ctx.config().numerics;
    let report = collective_spectrum_compare(
        &spec,
        direct.as_ref(),
        settings,
        &numerics.spectrum.values()?,
        numerics.broadening_cm1,
    )?;
    let meta = ctx.meta("collective");
    write_json(
        &ctx.out.join("collective.json"),
        &CollectiveFile {
            meta: meta.clone(),
            report: &report,
        },
    )?;
    let mut spectra = vec![&report.spectrum_model];
    let mut columns = vec!["omega_cm1", "intensity_model"];
    if let Some(d) = &report.spectrum_direct {
        spectra.push(d);
        columns.push("intensity_direct");
    }
    spectrum_csv(&meta, ctx.numerics_line(), &columns, &spectra).write(&ctx.out.join("collective_spectrum.csv"))?;
    eprintln!(
        "N = {}: bright splitting {:.3} cm^-1, {} dark modes",
        report.n_mol, report.splitting_model, report.dark_mode_count
    );
    Ok(())
}

#[derive(Serialize)]
struct ModelParamsFile {
    meta: Meta,
    omega_cm1: Vec<f64>,
    xi: Vec<Vec<f64>>,
    theta: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    dmu_dn: Vec<Vec<f64>>,
    dmu_dq: Vec<Vec<f64>>,
    maxwell_max_residual: f64,
    maxwell_scale: f64,
}

fn cmd_model_compare(ctx: &Context) -> Result<(), CliError> {
    let pipeline = ctx.config().numerics.pipeline();
    let result = ctx.pipeline()?;
    let params = extract_params(&ctx.system, &ctx.backend, &pipeline)?;
    let variants = ModelVariant::ALL
        .iter()
        .map(|&v| model_modes(&params, v))
        .collect::<vibropol::Result<Vec<_>>>()?;
    let meta = ctx.meta("model-compare");
    let mut columns = vec!["index", "pipeline_omega_cm1", "pipeline_photon_character"];
    let names: Vec<String> = ModelVariant::ALL
        .iter()
        .map(|v| format!("{}_omega_cm1", v.name()))
        .collect();
    columns.extend(names.iter().map(String::as_str));
    let mut csv = Csv::new(&meta, &[("numerics", ctx.numerics_line())], &columns);
    for (i, m) in result.modes.iter().enumerate() {
        let mut cells = vec![
            Cell::Int(i),
            Cell::Num(m.signed_omega_cm1()),
            Cell::Num(m.photon_character),
        ];
        cells.extend(variants.iter().map(|modes| Cell::Num(modes[i].signed_omega_cm1())));
        csv.row(&cells);
    }
    csv.write(&ctx.out.join("model_compare.csv"))?;
    let maxwell = params.maxwell_check()?;
    write_json(
        &ctx.out.join("model_params.json"),
        &ModelParamsFile {
            meta,
            omega_cm1: params
                .omega_sq
                .iter()
                .map(|w| hartree_to_wavenumber(w.abs().sqrt().copysign(*w)))
                .collect(),
            xi: matrix_to_rows(&params.xi),
            theta: matrix_to_rows(&params.theta),
            z: matrix_to_rows(&params.z),
            dmu_dn: matrix_to_rows(&params.dmu_dn),
            dmu_dq: matrix_to_rows(&params.dmu_dq),
            maxwell_max_residual: maxwell.max_residual(),
            maxwell_scale: maxwell.scale,
        },
    )
}

type Handler = fn(&Context) -> Result<(), CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let (args, f): (&Common, Handler) = match &cli.command {
        Command::Relax(a) => (a, cmd_relax),
        Command::Modes(a) => (a, cmd_modes),
        Command::Sweep(a) => (a, cmd_sweep),
        Command::Collective(a) => (a, cmd_collective),
        Command::ModelCompare(a) => (a, cmd_model_compare),
    };
    let ctx = Context::new(args)?;
    f(&ctx)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
