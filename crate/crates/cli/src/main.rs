use anyhow::Result;
use biaslens_cli::commands;
use biaslens_cli::config::RunConfig;
use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Fairness auditing for binary face classifiers: PCA-sorted image grids
/// with prediction-error overlays, a small trainable CNN, and gradient
/// saliency maps.
#[derive(Parser)]
#[command(name = "biaslens", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOpts {
    /// Sectioned key = value config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Directory all outputs are written into.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct AuditOpts {
    /// Manifest of images to audit.
    #[arg(long)]
    manifest: PathBuf,
    /// Model file; when absent the manifest must carry an output column.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Grid rows (0 = floor(sqrt(N))).
    #[arg(long)]
    rows: Option<usize>,
    /// Grid columns (0 = floor(sqrt(N))).
    #[arg(long)]
    cols: Option<usize>,
    /// Side of the square grayscale images stacked for PCA.
    #[arg(long)]
    pca_side: Option<usize>,
    /// Overlay blend strength in [0, 1].
    #[arg(long)]
    alpha: Option<f64>,
    /// Montage tile side in pixels.
    #[arg(long)]
    tile: Option<usize>,
    /// Round model outputs to 0/1 before the overlay.
    #[arg(long)]
    hard_outputs: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic two-subpopulation corpus and its manifests.
    Synth {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Train the small CNN on a manifest; writes model.txt and history.csv.
    Train {
        #[command(flatten)]
        common: CommonOpts,
        /// Training manifest.
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Sort the corpus by PCA similarity, overlay prediction error, and
    /// write coords.csv, layout.csv, montage.png and report.txt.
    Audit {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        audit: AuditOpts,
    },
    /// Write input-gradient saliency overlays for the given images.
    Saliency {
        #[command(flatten)]
        common: CommonOpts,
        /// Trained model file.
        #[arg(long)]
        model: PathBuf,
        /// Images to explain.
        #[arg(required = true)]
        images: Vec<PathBuf>,
    },
    /// Recompute the audit and write only the machine-readable report.txt.
    Report {
        #[command(flatten)]
        common: CommonOpts,
        #[command(flatten)]
        audit: AuditOpts,
    },
}

fn build_config(common: &CommonOpts, audit: Option<&AuditOpts>) -> Result<RunConfig> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
        config.propagate_seed();
    }
    if let Some(a) = audit {
        if let Some(rows) = a.rows {
            config.grid_rows = rows;
        }
        if let Some(cols) = a.cols {
            config.grid_cols = cols;
        }
        if let Some(side) = a.pca_side {
            config.pca_side = side;
        }
        if let Some(alpha) = a.alpha {
            config.render_alpha = alpha;
        }
        if let Some(tile) = a.tile {
            config.render_tile = tile;
        }
        if a.hard_outputs {
            config.hard_outputs = true;
        }
    }
    Ok(config)
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Synth { common } => {
            let config = build_config(common, None)?;
            std::fs::create_dir_all(&common.out_dir)?;
            commands::cmd_synth(&config, &common.out_dir)
        }
        Command::Train { common, manifest } => {
            let config = build_config(common, None)?;
            commands::cmd_train(&config, manifest, &common.out_dir)
        }
        Command::Audit { common, audit } => {
            let config = build_config(common, Some(audit))?;
            commands::cmd_audit(&config, &audit.manifest, audit.model.as_deref(), &common.out_dir)
        }
        Command::Saliency { common, model, images } => {
            let config = build_config(common, None)?;
            commands::cmd_saliency(&config, model, images, &common.out_dir)
        }
        Command::Report { common, audit } => {
            let config = build_config(common, Some(audit))?;
            commands::cmd_report(&config, &audit.manifest, audit.model.as_deref(), &common.out_dir)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
