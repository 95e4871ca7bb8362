//! Command-line front end: `simulate`, `denoise`, `evaluate`, `report` and `import`.
//!
//! Exit codes: 0 success, 2 usage or format error, 3 solver contract violation,
//! 4 numerical failure.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{self, RawDtype};
use crate::metrics::{MetricReport, DEFAULT_PSNR_CAP};
use crate::noise::{apply_case, NoiseComponents, NoiseSpec};
use crate::solver::{self, Diagnostics};
use crate::tensor::Tensor3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "NLTL2P_THREADS";

#[derive(Debug, Parser)]
#[command(name = "nltl2p", version, about = "Hyperspectral denoising and destriping")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Corrupt a clean cube with one of the preset degradation cases.
    Simulate(SimulateArgs),
    /// Restore a noisy cube.
    Denoise(DenoiseArgs),
    /// Compute quality metrics of restored cubes against clean references.
    Evaluate(EvaluateArgs),
    /// Turn a diagnostics CSV into plot-ready JSON series.
    Report(ReportArgs),
    /// Convert a headerless raw cube into the NLT3 format.
    Import(ImportArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output: PathBuf,
    /// Directory receiving the additive noise components and a JSON manifest.
    #[arg(long)]
    pub components_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Where to write the extracted stripe component `S`.
    #[arg(long)]
    pub stripes_out: Option<PathBuf>,
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
    /// Overrides the config seed. The solver itself is deterministic; the seed is only
    /// recorded.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Restored cube, or a directory of cubes for batch mode.
    #[arg(long)]
    pub restored: PathBuf,
    /// Clean cube, or a directory holding cubes with matching file names.
    #[arg(long)]
    pub clean: PathBuf,
    /// JSON report (single pair). A CSV row is written next to it with extension `.csv`.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// CSV output; required in batch mode.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Check that `clean` plus the components in this directory reproduces `restored`
    /// bit for bit.
    #[arg(long)]
    pub identity_check: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PSNR_CAP)]
    pub psnr_cap: f64,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub diagnostics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DtypeArg {
    F64,
    F32,
    U16,
}

impl From<DtypeArg> for RawDtype {
    fn from(d: DtypeArg) -> Self {
        match d {
            DtypeArg::F64 => RawDtype::F64,
            DtypeArg::F32 => RawDtype::F32,
            DtypeArg::U16 => RawDtype::U16,
        }
    }
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    #[arg(long)]
    pub raw: PathBuf,
    /// Dimensions `I1,I2,I3`; the file stores the first index fastest.
    #[arg(long, value_delimiter = ',', required = true)]
    pub dims: Vec<usize>,
    #[arg(long, value_enum)]
    pub dtype: DtypeArg,
    #[arg(long)]
    pub output: PathBuf,
    /// Min-max scale the cube onto [0, 1].
    #[arg(long)]
    pub normalize: bool,
}

/// Parses `args` (including the program name), runs the command and returns the exit code.
pub fn main_with_args<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match configure_threads().and_then(|()| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool may already exist when called repeatedly in one process; keep it.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Simulate(a) => simulate(&a),
        Command::Denoise(a) => denoise(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Report(a) => report(&a),
        Command::Import(a) => import(&a),
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct FileEntry {
    file: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest {
    case: u8,
    seed: u64,
    spec: NoiseSpec,
    dims: [usize; 3],
    stripe_bands: Vec<usize>,
    deadline_bands: Vec<usize>,
    stripe_model: &'static str,
    deadline_model: &'static str,
    summation_order: &'static str,
    noisy: FileEntry,
    components: Vec<FileEntry>,
}

const COMPONENT_FILES: [&str; 3] = ["gaussian.nlt", "stripes.nlt", "deadlines.nlt"];

fn simulate(a: &SimulateArgs) -> Result<()> {
    let clean: Tensor3<f64> = io::read_cube(&a.input)?;
    if clean.data().iter().any(|&x| !(0.0..=1.0).contains(&x)) {
        eprintln!("warning: {} has values outside [0, 1]; degradation presets assume normalized data", a.input.display());
    }
    let (noisy, comps) = apply_case(&clean, a.case, a.seed)?;
    let noisy_bytes = io::encode(&noisy)?;
    fs::write(&a.output, &noisy_bytes)?;
    if let Some(dir) = &a.components_dir {
        fs::create_dir_all(dir)?;
        let mut entries = Vec::new();
        for (name, t) in COMPONENT_FILES.iter().zip([&comps.gaussian, &comps.stripes, &comps.deadlines]) {
            let bytes = io::encode(t)?;
            fs::write(dir.join(name), &bytes)?;
            entries.push(FileEntry { file: name.to_string(), sha256: sha256_hex(&bytes) });
        }
        let manifest = Manifest {
            case: a.case,
            seed: a.seed,
            spec: NoiseSpec::case(a.case, clean.dims()[2], a.seed)?,
            dims: clean.dims(),
            stripe_bands: comps.stripe_bands.clone(),
            deadline_bands: comps.deadline_bands.clone(),
            stripe_model: "constant N(0, stripe_sigma^2) offset per (column, band)",
            deadline_model: "column values set to zero",
            summation_order: "((clean + gaussian) + stripes) + deadlines",
            noisy: FileEntry { file: a.output.display().to_string(), sha256: sha256_hex(&noisy_bytes) },
            components: entries,
        };
        write_json(&dir.join("manifest.json"), &manifest)?;
    }
    Ok(())
}

fn denoise(a: &DenoiseArgs) -> Result<()> {
    let cfg = RunConfig::load(&a.config)?;
    let input = a
        .input
        .clone()
        .or(cfg.paths.input.clone())
        .ok_or_else(|| Error::Usage("no input given (--input or paths.input)".into()))?;
    let output = a
        .output
        .clone()
        .or(cfg.paths.output.clone())
        .ok_or_else(|| Error::Usage("no output given (--output or paths.output)".into()))?;
    let stripes_out = a.stripes_out.clone().or(cfg.paths.stripes_out.clone());
    let diagnostics = a.diagnostics.clone().or(cfg.paths.diagnostics.clone());
    let d: Tensor3<f64> = io::read_cube(&input)?;
    let out = solver::run(&d, &cfg.solver)?;
    io::write_cube(&output, out.restored())?;
    if let Some(p) = stripes_out {
        io::write_cube(&p, out.stripes())?;
    }
    if let Some(p) = diagnostics {
        out.diagnostics.write_csv(fs::File::create(p)?)?;
    }
    let last = out.diagnostics.records.last();
    eprintln!(
        "denoised {} in {} iterations ({:?}), final phi {:e}{}",
        input.display(),
        out.diagnostics.records.len(),
        out.diagnostics.stop_reason,
        last.map_or(f64::NAN, |r| r.phi),
        a.seed.or(cfg.seed).map(|s| format!(", seed {s}")).unwrap_or_default()
    );
    Ok(())
}

fn read_components(dir: &Path) -> Result<NoiseComponents<f64>> {
    let [gaussian, stripes, deadlines] = COMPONENT_FILES.map(|n| io::read_cube::<f64>(dir.join(n)));
    Ok(NoiseComponents {
        gaussian: gaussian?,
        stripes: stripes?,
        deadlines: deadlines?,
        stripe_bands: Vec::new(),
        deadline_bands: Vec::new(),
    })
}

#[derive(Serialize)]
struct EvaluateReport<'a> {
    #[serde(flatten)]
    metrics: &'a MetricReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    identity_check: Option<bool>,
}

fn evaluate(a: &EvaluateArgs) -> Result<()> {
    if a.restored.is_dir() {
        return evaluate_batch(a);
    }
    let restored: Tensor3<f64> = io::read_cube(&a.restored)?;
    let clean: Tensor3<f64> = io::read_cube(&a.clean)?;
    if restored.dims() != clean.dims() {
        return Err(Error::Usage(format!(
            "restored dims {:?} differ from clean dims {:?}",
            restored.dims(),
            clean.dims()
        )));
    }
    let identity = match &a.identity_check {
        Some(dir) => Some(read_components(dir)?.reconstruct(&clean)? == restored),
        None => None,
    };
    let metrics = MetricReport::evaluate(&restored, &clean, a.psnr_cap)?;
    let report = EvaluateReport { metrics: &metrics, identity_check: identity };
    match &a.report {
        Some(path) => {
            write_json(path, &report)?;
            let csv_path = a.csv.clone().unwrap_or_else(|| path.with_extension("csv"));
            fs::write(csv_path, format!("{}\n{}\n", MetricReport::CSV_HEADER, metrics.csv_row()))?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if identity == Some(false) {
        return Err(Error::Integrity("clean + components does not reproduce the noisy cube".into()));
    }
    Ok(())
}

fn evaluate_batch(a: &EvaluateArgs) -> Result<()> {
    let csv_path = a.csv.as_ref().ok_or_else(|| Error::Usage("batch mode needs --csv".into()))?;
    if !a.clean.is_dir() {
        return Err(Error::Usage("batch mode needs --clean to be a directory".into()));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(&a.restored)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "nlt"))
        .collect();
    names.sort();
    let mut out = format!("name,{}\n", MetricReport::CSV_HEADER);
    for path in names {
        let name = path.file_name().expect("listed file").to_owned();
        let clean_path = a.clean.join(&name);
        if !clean_path.exists() {
            return Err(Error::Usage(format!("no clean cube for {}", name.to_string_lossy())));
        }
        let restored: Tensor3<f64> = io::read_cube(&path)?;
        let clean: Tensor3<f64> = io::read_cube(&clean_path)?;
        let m = MetricReport::evaluate(&restored, &clean, a.psnr_cap)?;
        out.push_str(&format!("{},{}\n", name.to_string_lossy(), m.csv_row()));
    }
    fs::write(csv_path, out)?;
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let file = fs::File::open(&a.diagnostics)
        .map_err(|e| Error::Format(format!("cannot open {}: {e}", a.diagnostics.display())))?;
    let d = Diagnostics::read_csv(file)?;
    write_json(&a.out, &d.plot_data())
}

fn import(a: &ImportArgs) -> Result<()> {
    let dims: [usize; 3] = a
        .dims
        .as_slice()
        .try_into()
        .map_err(|_| Error::Usage("--dims needs exactly three values".into()))?;
    let t: Tensor3<f64> = io::import_raw(&a.raw, dims, a.dtype.into())?;
    let t = if a.normalize { io::normalize(&t)? } else { t };
    io::write_cube(&a.output, &t)
}
