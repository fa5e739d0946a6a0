use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use synergy::experiment::{
    archive_path, cmd_compare, cmd_explore, cmd_reduce, cmd_solve, cmd_solve13, reduced_basis_path,
    BasisSource, CommandReport, ExperimentConfig, TaskSpec,
};
use synergy::exploration::SignalClass;
use synergy::Result;

#[derive(Parser, Debug)]
#[command(name = "synergy", version, about = "Synergy-based reaching controller experiments")]
struct Cli {
    /// TOML or JSON configuration; missing keys take their default values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; every configured seed becomes seed, seed+1, seed+2, seed+3.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run both exploration classes and store their archives.
    Explore,
    /// Solve the evaluation targets with a full archive.
    Solve13 {
        /// Archive to use; defaults to both archives in the output directory.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Grow the reduced basis and write the error maps.
    Reduce {
        /// Exploration archive; defaults to the random archive in the output directory.
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Compare the reduced basis against random archive subsets.
    Compare {
        /// Exploration archive; defaults to the random archive in the output directory.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Reduced basis; defaults to `reduced_basis.json` in the output directory.
        #[arg(long)]
        basis: Option<PathBuf>,
    },
    /// Solve a single task given as JSON (joint-space task or {"target": [x, y]}).
    Solve {
        /// Inline JSON or a path to a JSON file.
        #[arg(long)]
        task: String,
        /// Solve against a full archive (the random archive in the output directory by default).
        #[arg(long, conflicts_with = "basis")]
        archive: Option<PathBuf>,
        /// Solve against a stored basis instead.
        #[arg(long)]
        basis: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::from_path(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn parse_task(text: &str) -> Result<TaskSpec> {
    let path = Path::new(text);
    let json = if !text.trim_start().starts_with('{') && path.exists() {
        std::fs::read_to_string(path)?
    } else {
        text.to_owned()
    };
    Ok(serde_json::from_str(&json)?)
}

fn run(cli: &Cli) -> Result<Vec<CommandReport>> {
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    let random = archive_path(&out, SignalClass::LowpassRandom);
    Ok(match &cli.command {
        Command::Explore => vec![cmd_explore(&cfg, &out)?],
        Command::Solve13 { archive: Some(a) } => vec![cmd_solve13(&cfg, a, &out)?],
        Command::Solve13 { archive: None } => [SignalClass::MinJerk, SignalClass::LowpassRandom]
            .into_iter()
            .map(|c| cmd_solve13(&cfg, &archive_path(&out, c), &out))
            .collect::<Result<_>>()?,
        Command::Reduce { archive } => {
            vec![cmd_reduce(&cfg, archive.as_ref().unwrap_or(&random), &out)?]
        }
        Command::Compare { archive, basis } => {
            let basis = basis.clone().unwrap_or_else(|| reduced_basis_path(&out));
            vec![cmd_compare(&cfg, archive.as_ref().unwrap_or(&random), &basis, &out)?]
        }
        Command::Solve { task, archive, basis } => {
            let source = match (archive, basis) {
                (_, Some(b)) => BasisSource::Basis(b.clone()),
                (Some(a), None) => BasisSource::Archive(a.clone()),
                (None, None) => BasisSource::Archive(random),
            };
            vec![cmd_solve(&cfg, &source, &parse_task(task)?, &out)?]
        }
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(reports) => {
            for r in reports {
                println!("{}", serde_json::to_string(&r).unwrap_or_default());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            let doc = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}
