use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use chainshell::units::Shape;
use chainshell_cli::config::PipelineConfig;
use chainshell_cli::stages::{self, GroupInfo};
use chainshell_cli::{report, run_pipeline, CliError};

#[derive(Parser)]
#[command(name = "chainshell", version, about = "Generative design pipeline for jammed chainmail shells")]
struct Cli {
    /// TOML configuration; defaults apply to every missing key.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage into `--out`.
    Run,
    /// Calibrate unit cells; CSV on stdout and in `--out`.
    Units,
    /// Sweep the amplitude/frequency grid against the envelope.
    Sweep2d {
        /// Single shape; all shapes when omitted.
        #[arg(long)]
        shape: Option<Shape>,
        /// Envelope table replacing `sweep2d.envelope`.
        #[arg(long)]
        envelope: Option<PathBuf>,
    },
    /// Generate one batch of shell surfaces into `--out`.
    Gen3d {
        /// Preset group (1-5); seeded exactly as `run` seeds it.
        #[arg(long, conflicts_with_all = ["amplitude", "frequency"])]
        group: Option<u32>,
        #[arg(long, requires = "frequency")]
        amplitude: Option<f64>,
        #[arg(long, requires = "amplitude")]
        frequency: Option<u32>,
        #[arg(long)]
        iterations: Option<usize>,
    },
    /// Select distinct surfaces from a generated batch.
    Filter {
        /// Batch directory written by `gen3d`.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        keep: Option<usize>,
    },
    /// Load case for a surface area; one-row CSV on stdout.
    Loads {
        /// Surface area in m² (plan area when omitted).
        #[arg(long)]
        area: Option<f64>,
        #[arg(long)]
        thickness: Option<f64>,
    },
    /// Frame analysis of the surfaces kept by `filter`.
    Analyze {
        /// `selected.csv` written by `filter`; repeat for several batches.
        #[arg(long = "in", required = true)]
        selected: Vec<PathBuf>,
        /// Batch directory for each `--in`; inferred from the run layout when omitted.
        #[arg(long)]
        gen3d: Vec<PathBuf>,
        /// Support layout file replacing `fem.supports`.
        #[arg(long)]
        supports: Option<PathBuf>,
    },
    /// Generate, gate, grade and rank shelter designs.
    Optimize,
    /// Summarise a run directory.
    Report { dir: Option<PathBuf> },
}

fn load_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match &cli.command {
        Command::Sweep2d { envelope: Some(e), .. } => cfg.sweep2d.envelope = Some(e.display().to_string()),
        Command::Gen3d {
            iterations: Some(n), ..
        } => cfg.gen3d.iterations = *n,
        Command::Filter { keep: Some(k), .. } => cfg.filter.keep = *k,
        Command::Loads { thickness: Some(t), .. } => cfg.loads.thickness_m = *t,
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn stage(name: &str, r: Result<()>) -> Result<(), CliError> {
    r.map_err(|e| CliError::stage(name, e))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    if let Command::Report { dir } = &cli.command {
        let dir = dir.as_deref().unwrap_or(&cli.out);
        return stage("report", report::summarize(dir).map(|s| print!("{s}")));
    }
    let cfg = load_config(cli)?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Run => {
            let m = run_pipeline(&cfg, out)?;
            println!("run complete: {} stages, config {}", m.stages.len(), &m.config_hash[..12]);
            Ok(())
        }
        Command::Units => stage("units", {
            stages::units(&cfg).and_then(|rows| {
                stages::write_csv(&out.join("units.csv"), &rows)?;
                print!("{}", stages::csv_string(&rows)?);
                Ok(())
            })
        }),
        Command::Sweep2d { shape, .. } => stage("sweep2d", sweep(&cfg, *shape, out)),
        Command::Gen3d {
            group,
            amplitude,
            frequency,
            ..
        } => stage("gen3d", gen3d(&cfg, *group, amplitude.zip(*frequency), out)),
        Command::Filter { input, .. } => stage("filter", stages::filter(&cfg, input, out).map(|_| ())),
        Command::Loads { area, .. } => stage("loads", {
            stages::loads(&cfg, *area).and_then(|row| {
                stages::write_csv(&out.join("loads.csv"), std::slice::from_ref(&row))?;
                print!("{}", stages::csv_string(&[row])?);
                Ok(())
            })
        }),
        Command::Analyze {
            selected,
            gen3d,
            supports,
        } => stage("analyze", analyze(&cfg, selected, gen3d, supports.as_deref(), out)),
        Command::Optimize => stage("optimize", stages::optimize(&cfg, out).map(|_| ())),
        Command::Report { .. } => unreachable!(),
    }
}

fn sweep(cfg: &PipelineConfig, shape: Option<Shape>, out: &Path) -> Result<()> {
    let shapes = shape.map_or(Shape::ALL.to_vec(), |s| vec![s]);
    let mut rows = Vec::new();
    for s in shapes {
        rows.extend(stages::sweep(cfg, s)?.1);
    }
    stages::write_csv(&out.join("sweep.csv"), &rows)?;
    print!("{}", stages::csv_string(&rows)?);
    Ok(())
}

fn gen3d(cfg: &PipelineConfig, group: Option<u32>, custom: Option<(f64, u32)>, out: &Path) -> Result<()> {
    let info = match (group, custom) {
        (Some(g), _) => GroupInfo::for_group(cfg, g)?,
        (None, Some((a, f))) => GroupInfo::custom(cfg, a, f)?,
        (None, None) => bail!("give --group or --amplitude with --frequency"),
    };
    let rows = stages::gen3d(cfg, &info, out)?;
    println!("{} iterations of {} written to {}", rows.len(), info.label, out.display());
    Ok(())
}

/// Batch directory for a `selected.csv`: its own directory when it holds a
/// batch, else the matching `gen3d/<name>` of a pipeline run.
fn batch_dir_for(selected: &Path) -> Result<PathBuf> {
    let dir = selected.parent().unwrap_or(Path::new("."));
    if dir.join(stages::GROUP_FILE).exists() {
        return Ok(dir.to_path_buf());
    }
    let name = dir.file_name().context("selected.csv has no parent directory")?;
    let run_root = dir.parent().and_then(Path::parent).unwrap_or(Path::new("."));
    let candidate = run_root.join("gen3d").join(name);
    if candidate.join(stages::GROUP_FILE).exists() {
        Ok(candidate)
    } else {
        bail!("cannot find the batch for {}; pass --gen3d", selected.display())
    }
}

fn analyze(
    cfg: &PipelineConfig,
    selected: &[PathBuf],
    gen3d: &[PathBuf],
    supports: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let batches: Vec<PathBuf> = if gen3d.is_empty() {
        selected.iter().map(|s| batch_dir_for(s)).collect::<Result<_>>()?
    } else if gen3d.len() == selected.len() {
        gen3d.to_vec()
    } else {
        bail!("give one --gen3d per --in ({} vs {})", gen3d.len(), selected.len());
    };
    let mut settings = cfg.analysis_settings()?;
    if let Some(path) = supports {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        settings.supports = stages::parse_supports(&text)?;
    }
    let inputs: Vec<(PathBuf, PathBuf)> = selected.iter().cloned().zip(batches).collect();
    let rows = stages::analyze(&settings, &inputs)?;
    stages::write_csv(&out.join("displacements.csv"), &rows)?;
    print!("{}", stages::csv_string(&rows)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
