//! The `adaptel` command-line tool.
//!
//! Exit codes: 0 on success, 2 when inputs cannot be read or evaluated, 64
//! for invalid flags or configuration. `ADPT_THREADS` caps the number of
//! files processed concurrently by `eval` and `sweep`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use image::{Rgb, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::AdaptelError;
use crate::features::{build_feature_grid, FeatureGrid};
use crate::io::{self, LabelFileFormat};
use crate::metrics::{self, evaluate_many, MetricsReport, DEFAULT_EPSILON};
use crate::segmenter::{segment, LabelMap, SegmentationConfig, SegmentationResult};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_USAGE: i32 = 64;

/// Reference frame size used to quote throughput.
pub const REFERENCE_WIDTH: u32 = 481;
pub const REFERENCE_HEIGHT: u32 = 321;

#[derive(Debug, Parser)]
#[command(
    name = "adaptel",
    version,
    about = "Segment images into information-bounded adaptels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Segment a single PNG or PPM image.
    Segment(SegmentArgs),
    /// Segment a directory of frames as one volume.
    Segment3d(Segment3dArgs),
    /// Evaluate label maps against ground truth.
    Eval(EvalArgs),
    /// Sweep thresholds over an image set and report mean metrics per threshold.
    Sweep(SweepArgs),
    /// Time segmentation of noise images of growing size.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Information bound per adaptel, in bits.
    #[arg(long, short = 't', default_value_t = 90.0)]
    pub threshold: f64,
    /// Scale of the double exponential model, in CIELAB units.
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Merge connected fragments smaller than this many pixels (0 keeps all).
    #[arg(long, default_value_t = 0)]
    pub min_fragment: usize,
    /// Weight of optional position channels (0 disables them).
    #[arg(long, default_value_t = 0.0)]
    pub spatial_weight: f64,
}

impl ModelArgs {
    fn config(&self) -> SegmentationConfig {
        SegmentationConfig {
            threshold: self.threshold,
            sigma: self.sigma,
            min_fragment: self.min_fragment,
            spatial_weight: self.spatial_weight,
            seed: None,
        }
    }
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    #[arg(long, short)]
    pub input: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output label file (.png = png16, .csv, otherwise raw).
    #[arg(long, short)]
    pub labels: PathBuf,
    /// Override the label encoding: png16, csv or raw.
    #[arg(long)]
    pub format: Option<String>,
    /// Write the input with segment boundaries drawn in red.
    #[arg(long)]
    pub overlay: Option<PathBuf>,
    /// Write a JSON run report.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// First seed as x,y (defaults to the image center).
    #[arg(long)]
    pub seed: Option<String>,
    /// Ground-truth label map to evaluate against; adds metrics to the report.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: usize,
}

#[derive(Debug, Args)]
pub struct Segment3dArgs {
    /// Directory of frames, read in file name order.
    #[arg(long)]
    pub frames: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Output label volume (.csv or raw).
    #[arg(long, short)]
    pub labels: PathBuf,
    #[arg(long)]
    pub format: Option<String>,
    /// Directory for per-frame overlay PNGs.
    #[arg(long)]
    pub overlay_dir: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// First seed as x,y,t (defaults to the volume center).
    #[arg(long)]
    pub seed: Option<String>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Label file or directory of label files.
    #[arg(long, short)]
    pub labels: PathBuf,
    /// Ground-truth file or directory. In a directory, files named `<stem>.*`
    /// or `<stem>_*.*` belong to the label file `<stem>.*`.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: usize,
    /// JSON report path; printed to stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Directory of images.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Directory of ground-truth label maps, matched by file stem.
    #[arg(long)]
    pub gt: PathBuf,
    /// Comma-separated thresholds in bits. Defaults to 10 values spaced
    /// logarithmically over [20, 300].
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub min_fragment: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    pub epsilon: usize,
    /// Output path; `.csv` writes CSV, anything else JSON. Stdout when omitted.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated square image sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![128usize, 256, 512, 1024])]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 90.0)]
    pub threshold: f64,
    #[arg(long, default_value_t = 10.0)]
    pub sigma: f64,
    /// Seed of the noise generator.
    #[arg(long, default_value_t = 0)]
    pub rng_seed: u64,
    /// Image to time at its own size; a 481x321 noise image is used otherwise.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Input(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Input(_) => EXIT_INPUT,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Input(m) => f.write_str(m),
        }
    }
}

impl From<AdaptelError> for CliError {
    fn from(e: AdaptelError) -> Self {
        match e {
            AdaptelError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("adaptel: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Segment(a) => cli_segment(&a),
        Command::Segment3d(a) => cli_segment3d(&a),
        Command::Eval(a) => cli_eval(&a),
        Command::Sweep(a) => cli_sweep(&a),
        Command::Bench(a) => cli_bench(&a),
    }
}

#[derive(Debug, Serialize)]
pub struct ConfigEcho {
    pub threshold: f64,
    pub sigma: f64,
    pub min_fragment: usize,
    pub spatial_weight: f64,
    pub seed: Option<usize>,
}

impl From<&SegmentationConfig> for ConfigEcho {
    fn from(c: &SegmentationConfig) -> Self {
        ConfigEcho {
            threshold: c.threshold,
            sigma: c.sigma,
            min_fragment: c.min_fragment,
            spatial_weight: c.spatial_weight,
            seed: c.seed,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub input: String,
    pub config: ConfigEcho,
    pub width: usize,
    pub height: usize,
    pub depth: usize,
    pub k: usize,
    pub elapsed_seconds: f64,
    pub frames: usize,
    /// Frames per second, `frames / elapsed_seconds`.
    pub throughput_fps: f64,
    pub timing: &'static str,
    pub metrics: Option<MetricsReport>,
}

const TIMING_NOTE: &str = "segmentation only, after decoding and before encoding";

impl RunReport {
    fn new(
        input: &Path,
        config: &SegmentationConfig,
        grid: &FeatureGrid,
        r: &SegmentationResult,
    ) -> Self {
        let shape = grid.shape();
        RunReport {
            input: input.display().to_string(),
            config: config.into(),
            width: shape.width,
            height: shape.height,
            depth: shape.depth,
            k: r.k,
            elapsed_seconds: r.elapsed,
            frames: shape.depth,
            throughput_fps: shape.depth as f64 / r.elapsed.max(f64::MIN_POSITIVE),
            timing: TIMING_NOTE,
            metrics: None,
        }
    }
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| CliError::Input(e.to_string()))? + "\n";
    match path {
        Some(p) => io::write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn parse_seed(text: &str, grid: &FeatureGrid) -> CliResult<usize> {
    let shape = grid.shape();
    let parts: Vec<usize> = text
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bad --seed '{text}': {e}")))?;
    let (x, y, t) = match parts[..] {
        [x, y] => (x, y, 0),
        [x, y, t] => (x, y, t),
        _ => {
            return Err(CliError::Usage(format!(
                "bad --seed '{text}': expected x,y or x,y,t"
            )))
        }
    };
    if x >= shape.width || y >= shape.height || t >= shape.depth {
        return Err(CliError::Usage(format!(
            "--seed {text} lies outside the image"
        )));
    }
    Ok(shape.index(x, y, t))
}

fn label_format(path: &Path, explicit: Option<&str>) -> CliResult<LabelFileFormat> {
    match explicit {
        Some(f) => Ok(f.parse()?),
        None => Ok(LabelFileFormat::from_path(path)),
    }
}

pub fn cli_segment(a: &SegmentArgs) -> CliResult<()> {
    let mut config = a.model.config();
    config.validate()?;
    let format = label_format(&a.labels, a.format.as_deref())?;
    let img = io::read_image(&a.input)?;
    let grid = build_feature_grid(std::slice::from_ref(&img))?;
    if let Some(s) = &a.seed {
        config.seed = Some(parse_seed(s, &grid)?);
    }
    let result = segment(&grid, &config)?;
    io::write_labels(&a.labels, &result.labels, format)?;

    if let Some(path) = &a.overlay {
        let b = metrics::boundary_map(&result.labels);
        io::write_png(path, &io::overlay(&img, &b, 0))?;
    }
    let mut report = RunReport::new(&a.input, &config, &grid, &result);
    if let Some(gt) = &a.gt {
        let gt = io::read_labels(gt)?;
        report.metrics = Some(metrics::evaluate(&result.labels, &gt, a.epsilon)?);
    }
    if let Some(path) = &a.report {
        write_json(Some(path), &report)?;
    }
    eprintln!(
        "{}: {} adaptels in {:.3} s",
        a.input.display(),
        result.k,
        result.elapsed
    );
    Ok(())
}

pub fn cli_segment3d(a: &Segment3dArgs) -> CliResult<()> {
    let mut config = a.model.config();
    config.validate()?;
    let format = label_format(&a.labels, a.format.as_deref())?;
    if format == LabelFileFormat::Png16 {
        return Err(CliError::Usage(
            "png16 cannot hold a label volume; use .csv or .raw".into(),
        ));
    }
    let frames = io::read_frames(&a.frames)?;
    let grid = build_feature_grid(&frames)?;
    if let Some(s) = &a.seed {
        config.seed = Some(parse_seed(s, &grid)?);
    }
    let result = segment(&grid, &config)?;
    io::write_labels(&a.labels, &result.labels, format)?;

    if let Some(dir) = &a.overlay_dir {
        std::fs::create_dir_all(dir).map_err(|e| AdaptelError::io(dir, e))?;
        let b = metrics::boundary_map(&result.labels);
        for (t, frame) in frames.iter().enumerate() {
            io::write_png(
                &dir.join(format!("frame_{t:04}.png")),
                &io::overlay(frame, &b, t),
            )?;
        }
    }
    if let Some(path) = &a.report {
        write_json(
            Some(path),
            &RunReport::new(&a.frames, &config, &grid, &result),
        )?;
    }
    eprintln!(
        "{}: {} supervoxels over {} frames in {:.3} s",
        a.frames.display(),
        result.k,
        frames.len(),
        result.elapsed
    );
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Ground-truth files in `dir` that belong to an item with stem `stem`.
pub fn ground_truths_for(stem: &str, dir: &Path) -> crate::Result<Vec<PathBuf>> {
    let prefix = format!("{stem}_");
    io::list_files(dir, |p| {
        let s = file_stem(p);
        io::is_label_path(p) && (s == stem || s.starts_with(&prefix))
    })
}

fn read_ground_truths(paths: &[PathBuf]) -> crate::Result<Vec<LabelMap>> {
    if paths.is_empty() {
        return Err(AdaptelError::Empty("no matching ground truth".into()));
    }
    paths.iter().map(|p| io::read_labels(p)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalItem {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ground_truths: Option<usize>,
    #[serde(flatten)]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MeanMetrics {
    pub items: usize,
    pub k: f64,
    pub cuse: f64,
    pub asa: f64,
    pub recall: f64,
    pub precision: f64,
    /// Harmonic mean of the mean precision and mean recall.
    pub f_measure: f64,
}

impl MeanMetrics {
    pub fn of(reports: &[&MetricsReport]) -> Option<Self> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
        let (recall, precision) = (mean(|r| r.recall), mean(|r| r.precision));
        Some(MeanMetrics {
            items: reports.len(),
            k: mean(|r| r.k_segments as f64),
            cuse: mean(|r| r.cuse),
            asa: mean(|r| r.asa),
            recall,
            precision,
            f_measure: metrics::f_measure(precision, recall),
        })
    }
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub epsilon: usize,
    pub items: Vec<EvalItem>,
    pub failed: usize,
    pub mean: Option<MeanMetrics>,
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("ADPT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| {
            CliError::Usage(format!(
                "ADPT_THREADS must be a positive integer, got '{v}'"
            ))
        })?;
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| CliError::Input(e.to_string()))
}

pub fn cli_eval(a: &EvalArgs) -> CliResult<()> {
    let jobs: Vec<(PathBuf, Vec<PathBuf>)> = if a.labels.is_dir() {
        if !a.gt.is_dir() {
            return Err(CliError::Usage(
                "--gt must be a directory when --labels is".into(),
            ));
        }
        io::list_files(&a.labels, io::is_label_path)?
            .into_iter()
            .map(|p| {
                let gts = ground_truths_for(&file_stem(&p), &a.gt).unwrap_or_default();
                (p, gts)
            })
            .collect()
    } else if a.gt.is_dir() {
        vec![(
            a.labels.clone(),
            ground_truths_for(&file_stem(&a.labels), &a.gt)?,
        )]
    } else {
        vec![(a.labels.clone(), vec![a.gt.clone()])]
    };
    if jobs.is_empty() {
        return Err(CliError::Input(format!(
            "no label files in {}",
            a.labels.display()
        )));
    }

    let epsilon = a.epsilon;
    let items: Vec<EvalItem> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|(path, gts)| {
                let name = path
                    .file_name()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let outcome = io::read_labels(path).and_then(|seg| {
                    let gts = read_ground_truths(gts)?;
                    evaluate_many(&seg, &gts, epsilon)
                });
                match outcome {
                    Ok(m) => EvalItem {
                        name,
                        ground_truths: Some(gts.len()),
                        metrics: Some(m),
                        error: None,
                    },
                    Err(e) => EvalItem {
                        name,
                        ground_truths: None,
                        metrics: None,
                        error: Some(e.to_string()),
                    },
                }
            })
            .collect()
    });

    let ok: Vec<&MetricsReport> = items.iter().filter_map(|i| i.metrics.as_ref()).collect();
    let report = EvalReport {
        epsilon,
        failed: items.len() - ok.len(),
        mean: MeanMetrics::of(&ok),
        items: items.clone(),
    };
    write_json(a.report.as_deref(), &report)?;
    if report.mean.is_none() {
        return Err(CliError::Input("every item failed to evaluate".into()));
    }
    Ok(())
}

/// `count` thresholds spaced logarithmically over `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64))
            .collect(),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub images: usize,
    pub mean_k: f64,
    pub mean_cuse: f64,
    pub mean_recall: f64,
    pub mean_precision: f64,
    pub mean_f: f64,
    pub mean_fps: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub sigma: f64,
    pub epsilon: usize,
    pub images: Vec<String>,
    pub skipped: Vec<String>,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "threshold,images,mean_k,mean_cuse,mean_recall,mean_precision,mean_f,mean_fps\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                r.threshold,
                r.images,
                r.mean_k,
                r.mean_cuse,
                r.mean_recall,
                r.mean_precision,
                r.mean_f,
                r.mean_fps
            ));
        }
        out
    }
}

pub fn cli_sweep(a: &SweepArgs) -> CliResult<()> {
    let thresholds = a
        .thresholds
        .clone()
        .unwrap_or_else(|| log_spaced(20.0, 300.0, 10));
    if thresholds.is_empty() {
        return Err(CliError::Usage("--thresholds is empty".into()));
    }
    for &t in &thresholds {
        SegmentationConfig {
            threshold: t,
            sigma: a.sigma,
            ..Default::default()
        }
        .validate()?;
    }
    let images = io::list_images(&a.input)?;
    if images.is_empty() {
        return Err(CliError::Input(format!(
            "no images in {}",
            a.input.display()
        )));
    }

    struct Job {
        name: String,
        grid: FeatureGrid,
        gts: Vec<LabelMap>,
    }
    let mut skipped = Vec::new();
    let mut jobs = Vec::new();
    for path in &images {
        let name = file_stem(path);
        let loaded = ground_truths_for(&name, &a.gt)
            .and_then(|g| read_ground_truths(&g))
            .and_then(|gts| {
                let img = io::read_image(path)?;
                Ok((build_feature_grid(&[img])?, gts))
            });
        match loaded {
            Ok((grid, gts)) => jobs.push(Job { name, grid, gts }),
            Err(e) => {
                eprintln!("adaptel: skipping {}: {e}", path.display());
                skipped.push(name);
            }
        }
    }
    if jobs.is_empty() {
        return Err(CliError::Input("no image could be evaluated".into()));
    }

    let (sigma, min_fragment, epsilon) = (a.sigma, a.min_fragment, a.epsilon);
    // per image, per threshold: (metrics, fps)
    let results: Vec<crate::Result<Vec<(MetricsReport, f64)>>> = thread_pool()?.install(|| {
        jobs.par_iter()
            .map(|job| {
                thresholds
                    .iter()
                    .map(|&t| {
                        let config = SegmentationConfig {
                            threshold: t,
                            sigma,
                            min_fragment,
                            ..Default::default()
                        };
                        let r = segment(&job.grid, &config)?;
                        let m = evaluate_many(&r.labels, &job.gts, epsilon)?;
                        Ok((
                            m,
                            job.grid.shape().depth as f64 / r.elapsed.max(f64::MIN_POSITIVE),
                        ))
                    })
                    .collect()
            })
            .collect()
    });

    let mut names = Vec::new();
    let mut per_image = Vec::new();
    for (job, r) in jobs.iter().zip(results) {
        match r {
            Ok(v) => {
                names.push(job.name.clone());
                per_image.push(v);
            }
            Err(e) => {
                eprintln!("adaptel: skipping {}: {e}", job.name);
                skipped.push(job.name.clone());
            }
        }
    }
    if per_image.is_empty() {
        return Err(CliError::Input("every image failed to evaluate".into()));
    }

    let rows = thresholds
        .iter()
        .enumerate()
        .map(|(ti, &threshold)| {
            let reports: Vec<&MetricsReport> = per_image.iter().map(|v| &v[ti].0).collect();
            let mean = MeanMetrics::of(&reports).expect("non-empty");
            let fps = per_image.iter().map(|v| v[ti].1).sum::<f64>() / per_image.len() as f64;
            SweepRow {
                threshold,
                images: mean.items,
                mean_k: mean.k,
                mean_cuse: mean.cuse,
                mean_recall: mean.recall,
                mean_precision: mean.precision,
                mean_f: mean.f_measure,
                mean_fps: fps,
            }
        })
        .collect();

    let report = SweepReport {
        sigma,
        epsilon,
        images: names,
        skipped,
        rows,
    };
    match &a.report {
        Some(p) if LabelFileFormat::from_path(p) == LabelFileFormat::Csv => {
            io::write_atomic(p, report.to_csv().as_bytes())?
        }
        other => write_json(other.as_deref(), &report)?,
    }
    Ok(())
}

/// Uniform RGB noise, reproducible from `seed`.
pub fn noise_image(width: u32, height: u32, seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RgbImage::from_fn(width, height, |_, _| Rgb(rng.gen::<[u8; 3]>()))
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub width: usize,
    pub height: usize,
    pub pixels: usize,
    pub k: usize,
    pub median_seconds: f64,
    pub seconds: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct BenchRatio {
    pub from_pixels: usize,
    pub to_pixels: usize,
    pub pixel_ratio: f64,
    pub time_ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub threshold: f64,
    pub sigma: f64,
    pub repeats: usize,
    pub timing: &'static str,
    pub sizes: Vec<BenchRow>,
    pub ratios: Vec<BenchRatio>,
    pub reference: BenchRow,
    pub reference_fps: f64,
}

/// Times `repeats` segmentations of `grid`; returns the per-run seconds and K.
pub fn time_segmentation(
    grid: &FeatureGrid,
    config: &SegmentationConfig,
    repeats: usize,
) -> crate::Result<(Vec<f64>, usize)> {
    let mut times = Vec::with_capacity(repeats);
    let mut k = 0;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let r = segment(grid, config)?;
        times.push(start.elapsed().as_secs_f64());
        k = r.k;
    }
    Ok((times, k))
}

fn bench_row(
    img: &RgbImage,
    config: &SegmentationConfig,
    repeats: usize,
) -> crate::Result<BenchRow> {
    let grid = build_feature_grid(std::slice::from_ref(img))?;
    let (mut seconds, k) = time_segmentation(&grid, config, repeats)?;
    let sorted_median = median(&mut seconds.clone());
    seconds.shrink_to_fit();
    Ok(BenchRow {
        width: img.width() as usize,
        height: img.height() as usize,
        pixels: grid.len(),
        k,
        median_seconds: sorted_median,
        seconds,
    })
}

pub fn cli_bench(a: &BenchArgs) -> CliResult<()> {
    if a.repeats == 0 {
        return Err(CliError::Usage("--repeats must be at least 1".into()));
    }
    if a.sizes.iter().any(|&s| s == 0 || s > u16::MAX as usize) {
        return Err(CliError::Usage("--sizes must lie in 1..=65535".into()));
    }
    let config = SegmentationConfig {
        threshold: a.threshold,
        sigma: a.sigma,
        ..Default::default()
    };
    config.validate()?;

    let mut sizes = Vec::new();
    for (i, &s) in a.sizes.iter().enumerate() {
        let img = noise_image(s as u32, s as u32, a.rng_seed.wrapping_add(i as u64));
        let row = bench_row(&img, &config, a.repeats)?;
        eprintln!("{s}x{s}: median {:.4} s, K = {}", row.median_seconds, row.k);
        sizes.push(row);
    }
    let ratios = sizes
        .windows(2)
        .map(|w| BenchRatio {
            from_pixels: w[0].pixels,
            to_pixels: w[1].pixels,
            pixel_ratio: w[1].pixels as f64 / w[0].pixels as f64,
            time_ratio: w[1].median_seconds / w[0].median_seconds,
        })
        .collect();

    let reference_img = match &a.input {
        Some(p) => io::read_image(p)?,
        None => noise_image(REFERENCE_WIDTH, REFERENCE_HEIGHT, a.rng_seed),
    };
    let reference = bench_row(&reference_img, &config, a.repeats)?;
    let report = BenchReport {
        threshold: a.threshold,
        sigma: a.sigma,
        repeats: a.repeats,
        timing: TIMING_NOTE,
        reference_fps: 1.0 / reference.median_seconds,
        sizes,
        ratios,
        reference,
    };
    write_json(a.report.as_deref(), &report)
}
