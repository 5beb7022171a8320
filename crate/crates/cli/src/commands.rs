//! The audit workflow commands. Each command validates its inputs up front,
//! computes everything, and writes its artifacts last, so a failure never
//! leaves partially written outputs behind.

use crate::config::RunConfig;
use anyhow::{bail, Context, Result};
use biaslens_core::gridlayout::{greedy_assign, layout_to_csv, overlay_values, region_report, GridLayout, RegionReport, RegionStat};
use biaslens_core::ingest::{load_manifest, SampleRecord};
use biaslens_core::ingest;
use biaslens_core::nn::{default_cnn, input_saliency, load_model, predict_all, save_model, train};
use biaslens_core::pca::{coords_to_csv, fit_project};
use biaslens_core::render::{montage, saliency_overlay, write_png, Colormap};
use biaslens_core::synth::{generate, split_biased};
use biaslens_core::tensor::Tensor;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Fixed artifact names under --out-dir.
pub const COORDS_CSV: &str = "coords.csv";
pub const LAYOUT_CSV: &str = "layout.csv";
pub const MONTAGE_PNG: &str = "montage.png";
pub const REPORT_TXT: &str = "report.txt";
pub const MODEL_TXT: &str = "model.txt";
pub const HISTORY_CSV: &str = "history.csv";
pub const MANIFEST_ALL: &str = "all.csv";
pub const MANIFEST_TRAIN: &str = "train.csv";
pub const MANIFEST_TEST: &str = "test.csv";

/// Generate the synthetic corpus and write images plus train/test/full
/// manifests under the output directory.
pub fn cmd_synth(config: &RunConfig, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let (images, records) = generate(&config.synth)?;
    let (train_idx, test_idx) = split_biased(
        &records,
        &config.train_subpop,
        config.test_fraction,
        config.seed,
    )?;

    let images_dir = out_dir.join("images");
    std::fs::create_dir_all(&images_dir)
        .with_context(|| format!("creating {}", images_dir.display()))?;
    for (img, rec) in images.iter().zip(&records) {
        let path = images_dir.join(&rec.image_path);
        write_png(img, &path)?;
    }

    let manifest_of = |indices: &[usize]| -> String {
        let mut s = String::from("path,label,split\n");
        for &i in indices {
            let r = &records[i];
            let _ = writeln!(
                s,
                "images/{},{},{}",
                r.image_path.display(),
                r.label,
                r.split.as_deref().unwrap_or("")
            );
        }
        s
    };
    let all: Vec<usize> = (0..records.len()).collect();
    std::fs::write(out_dir.join(MANIFEST_ALL), manifest_of(&all))?;
    std::fs::write(out_dir.join(MANIFEST_TRAIN), manifest_of(&train_idx))?;
    std::fs::write(out_dir.join(MANIFEST_TEST), manifest_of(&test_idx))?;
    Ok(())
}

fn load_dataset(
    config: &RunConfig,
    manifest_path: &Path,
) -> Result<(Vec<SampleRecord>, Vec<Tensor>, Vec<u8>)> {
    let manifest = load_manifest(manifest_path)?;
    if manifest.records.is_empty() {
        bail!("manifest {} has no records", manifest_path.display());
    }
    if manifest.duplicate_warnings > 0 {
        eprintln!(
            "warning: {} duplicate path(s) in {}",
            manifest.duplicate_warnings,
            manifest_path.display()
        );
    }
    let mut images = Vec::with_capacity(manifest.records.len());
    let mut labels = Vec::with_capacity(manifest.records.len());
    for rec in &manifest.records {
        images.push(ingest::load_image(
            &rec.image_path,
            config.train_image_side,
            config.train_image_side,
            config.train_grayscale,
        )?);
        labels.push(rec.label);
    }
    Ok((manifest.records, images, labels))
}

/// Train the default CNN on a manifest; writes model.txt and history.csv.
pub fn cmd_train(config: &RunConfig, manifest_path: &Path, out_dir: &Path) -> Result<()> {
    config.validate()?;
    let (_, images, labels) = load_dataset(config, manifest_path)?;
    let side = config.train_image_side;
    // Grayscale sources decode single-channel even when RGB was requested;
    // size the input layer from the decoded data.
    let channels = images[0].c;
    if let Some(odd) = images.iter().find(|t| t.c != channels) {
        bail!(
            "manifest mixes {channels}-channel and {}-channel images",
            odd.c
        );
    }
    let mut model = default_cnn(side, side, channels, config.seed)?;
    let augment = config.augment_enabled.then_some(&config.augment);
    let history = train(&mut model, &images, &labels, &config.train, augment)?;

    std::fs::create_dir_all(out_dir)?;
    save_model(&model, &config.train, &out_dir.join(MODEL_TXT))?;
    let mut csv = String::from("epoch,loss,accuracy\n");
    for e in &history {
        let _ = writeln!(csv, "{},{:.16e},{:.16e}", e.epoch, e.mean_loss, e.accuracy);
    }
    std::fs::write(out_dir.join(HISTORY_CSV), csv)?;
    Ok(())
}

/// Everything the audit computes, before any artifact is written.
pub struct AuditOutcome {
    pub records: Vec<SampleRecord>,
    pub native_images: Vec<Tensor>,
    pub outputs: Vec<f64>,
    pub coords_csv: String,
    pub layout: GridLayout,
    pub report: RegionReport,
    pub report_text: String,
}

/// Shared audit pipeline: outputs (model inference or manifest column),
/// PCA projection, greedy grid assignment, overlays, regional report.
pub fn run_audit(
    config: &RunConfig,
    manifest_path: &Path,
    model_path: Option<&Path>,
) -> Result<AuditOutcome> {
    config.validate()?;
    let manifest = load_manifest(manifest_path)?;
    let records = manifest.records;
    if records.is_empty() {
        bail!("manifest {} has no records", manifest_path.display());
    }

    // Native-resolution decodes feed both the PCA stack and the montage.
    let mut native_images = Vec::with_capacity(records.len());
    for rec in &records {
        native_images.push(ingest::load_image_native(&rec.image_path, false)?);
    }
    let labels: Vec<u8> = records.iter().map(|r| r.label).collect();

    let mut outputs: Vec<f64> = match model_path {
        Some(path) => {
            let (mut model, _) = load_model(path)?;
            // Feed the model what its input layer was trained on.
            let expected_c = model.layers().iter().find_map(|l| match l {
                biaslens_core::nn::Layer::Conv(c) => Some(c.in_ch),
                _ => None,
            });
            let mut inputs = Vec::with_capacity(records.len());
            for rec in &records {
                let mut img = ingest::load_image(
                    &rec.image_path,
                    config.train_image_side,
                    config.train_image_side,
                    config.train_grayscale,
                )?;
                match expected_c {
                    Some(1) if img.c == 3 => img = img.to_grayscale()?,
                    Some(3) if img.c == 1 => img = img.to_rgb()?,
                    _ => {}
                }
                inputs.push(img);
            }
            predict_all(&mut model, &inputs)?
        }
        None => records
            .iter()
            .enumerate()
            .map(|(i, r)| {
                r.output.ok_or_else(|| {
                    anyhow::anyhow!(
                        "record {i} ({}) has no output column and no --model was given",
                        r.image_path.display()
                    )
                })
            })
            .collect::<Result<_>>()?,
    };
    if config.hard_outputs {
        for o in outputs.iter_mut() {
            *o = if *o >= 0.5 { 1.0 } else { 0.0 };
        }
    }

    let stacked = ingest::stack_for_pca(&native_images, config.pca_side)?;
    let pca = fit_project(&stacked, 2)?;
    let coords_csv = coords_to_csv(&pca);

    let n = records.len();
    let auto = (1..).take_while(|s| s * s <= n).last().unwrap_or(1);
    let rows = if config.grid_rows == 0 { auto } else { config.grid_rows };
    let cols = if config.grid_cols == 0 { auto } else { config.grid_cols };
    let mut layout = greedy_assign(&pca.coords, rows, cols)?;
    overlay_values(&mut layout, &labels, &outputs)?;
    let report = region_report(&layout)?;

    let report_text = render_report(config, manifest_path, model_path, &records, &outputs, &layout, &report);
    Ok(AuditOutcome {
        records,
        native_images,
        outputs,
        coords_csv,
        layout,
        report,
        report_text,
    })
}

/// Audit command: coords.csv, layout.csv, montage.png and report.txt.
pub fn cmd_audit(
    config: &RunConfig,
    manifest_path: &Path,
    model_path: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let outcome = run_audit(config, manifest_path, model_path)?;
    let image = montage(
        &outcome.layout,
        &outcome.native_images,
        config.render_tile,
        config.render_alpha,
        &Colormap::overlay_default(),
    )?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(COORDS_CSV), &outcome.coords_csv)?;
    std::fs::write(out_dir.join(LAYOUT_CSV), layout_to_csv(&outcome.layout))?;
    write_png(&image, &out_dir.join(MONTAGE_PNG))?;
    std::fs::write(out_dir.join(REPORT_TXT), &outcome.report_text)?;
    Ok(())
}

/// Report command: the machine-readable summary only.
pub fn cmd_report(
    config: &RunConfig,
    manifest_path: &Path,
    model_path: Option<&Path>,
    out_dir: &Path,
) -> Result<()> {
    let outcome = run_audit(config, manifest_path, model_path)?;
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(REPORT_TXT), &outcome.report_text)?;
    Ok(())
}

/// Saliency command: one overlay PNG per input image, named after it.
pub fn cmd_saliency(
    config: &RunConfig,
    model_path: &Path,
    inputs: &[PathBuf],
    out_dir: &Path,
) -> Result<()> {
    config.validate()?;
    if inputs.is_empty() {
        bail!("no input images given");
    }
    let (mut model, _) = load_model(model_path)?;
    let mut rendered = Vec::with_capacity(inputs.len());
    for path in inputs {
        let image = ingest::load_image(
            path,
            config.train_image_side,
            config.train_image_side,
            config.train_grayscale,
        )?;
        let map = input_saliency(&mut model, &image)?;
        let overlay = saliency_overlay(&image, &map, config.render_alpha, &Colormap::saliency_default())?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "image".to_string());
        let mut name = format!("{stem}_saliency.png");
        let mut suffix = 1;
        while rendered.iter().any(|(n, _)| *n == name) {
            name = format!("{stem}_saliency_{suffix}.png");
            suffix += 1;
        }
        rendered.push((name, overlay));
    }
    std::fs::create_dir_all(out_dir)?;
    for (name, overlay) in &rendered {
        write_png(overlay, &out_dir.join(name))?;
    }
    Ok(())
}

fn write_stat(s: &mut String, prefix: &str, stat: &RegionStat) {
    let _ = writeln!(s, "{prefix}.count = {}", stat.count);
    match stat.mean_error {
        Some(v) => {
            let _ = writeln!(s, "{prefix}.mean_error = {v:.16e}");
        }
        None => {
            let _ = writeln!(s, "{prefix}.mean_error = none");
        }
    }
}

/// The structured-text audit summary: accuracy overall and per split,
/// regional overlay errors, grid shape, seed, and the full effective config.
fn render_report(
    config: &RunConfig,
    manifest_path: &Path,
    model_path: Option<&Path>,
    records: &[SampleRecord],
    outputs: &[f64],
    layout: &GridLayout,
    report: &RegionReport,
) -> String {
    let mut s = String::from("biaslens report v1\n\n");
    let _ = writeln!(s, "[run]");
    let _ = writeln!(s, "seed = {}", config.seed);
    let _ = writeln!(s, "manifest = {}", manifest_path.display());
    match model_path {
        Some(p) => {
            let _ = writeln!(s, "model = {}", p.display());
        }
        None => {
            let _ = writeln!(s, "model = none");
        }
    }

    let _ = writeln!(s, "\n[grid]");
    let _ = writeln!(s, "rows = {}", layout.spec.rows);
    let _ = writeln!(s, "cols = {}", layout.spec.cols);
    let assigned = layout.assignment.iter().flatten().count();
    let _ = writeln!(s, "assigned_cells = {}", assigned);

    let _ = writeln!(s, "\n[accuracy]");
    let correct = |indices: &[usize]| -> usize {
        indices
            .iter()
            .filter(|&&i| (outputs[i] >= 0.5) == (records[i].label == 1))
            .count()
    };
    let all: Vec<usize> = (0..records.len()).collect();
    let _ = writeln!(s, "count = {}", records.len());
    let _ = writeln!(
        s,
        "overall = {:.16e}",
        correct(&all) as f64 / records.len() as f64
    );
    let mut tags: Vec<String> = records
        .iter()
        .map(|r| r.split.clone().unwrap_or_else(|| "none".to_string()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    tags.sort();
    for tag in &tags {
        let members: Vec<usize> = records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split.as_deref().unwrap_or("none") == tag)
            .map(|(i, _)| i)
            .collect();
        let _ = writeln!(s, "split.{tag}.count = {}", members.len());
        let _ = writeln!(
            s,
            "split.{tag}.accuracy = {:.16e}",
            correct(&members) as f64 / members.len() as f64
        );
    }

    let _ = writeln!(s, "\n[regions]");
    write_stat(&mut s, "overall", &report.overall);
    write_stat(&mut s, "top", &report.top);
    write_stat(&mut s, "bottom", &report.bottom);
    write_stat(&mut s, "left", &report.left);
    write_stat(&mut s, "right", &report.right);
    write_stat(&mut s, "top_left", &report.top_left);
    write_stat(&mut s, "top_right", &report.top_right);
    write_stat(&mut s, "bottom_left", &report.bottom_left);
    write_stat(&mut s, "bottom_right", &report.bottom_right);

    let _ = writeln!(s, "\n[config]");
    s.push_str(&config.render());
    s
}
