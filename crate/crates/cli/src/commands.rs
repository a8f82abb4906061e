use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use boxprompt_core::cfpg::generate_point_detailed;
use boxprompt_core::mbo::{refine_mask, DegenerateReason, IterationLog};
use boxprompt_core::metrics::{aggregate, iou_with_id, EvalRecord, MetricsReport};
use boxprompt_core::synth::{corrupt_mask, generate, SceneFamily, SceneSpec};
use boxprompt_core::{BoundingBox, PointPrompt};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use crate::config::Settings;
use crate::error::{CliError, CliResult, ErrorKind};
use crate::files;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "boxprompt",
    version,
    about = "Point prompts from boxes, mask refinement and segmentation scores"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn a box into a foreground point prompt.
    Cfpg(CfpgArgs),
    /// Refine a coarse mask.
    Refine(RefineArgs),
    /// Score predicted masks against ground truth.
    Eval(EvalArgs),
    /// Write synthetic scenes with ground truth.
    Synth(SynthArgs),
    /// Print every setting with its default value.
    Defaults,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Settings file of `key = value` lines.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one setting, e.g. `--set cfpg.tau=0.4`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl Common {
    fn settings(&self) -> CliResult<Settings> {
        Settings::load(self.config.as_deref(), &self.overrides)
    }
}

#[derive(Debug, Args)]
pub struct CfpgArgs {
    #[arg(long)]
    pub image: PathBuf,
    /// `x1,y1,x2,y2`, end exclusive.
    #[arg(
        long = "box",
        value_name = "X1,Y1,X2,Y2",
        conflicts_with = "boxes",
        required_unless_present = "boxes"
    )]
    pub bbox: Option<String>,
    /// JSON file holding `{"box": [..]}` or a bare `[x1, y1, x2, y2]`.
    #[arg(long)]
    pub boxes: Option<PathBuf>,
    /// Output file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RefineArgs {
    #[arg(long)]
    pub image: PathBuf,
    #[arg(long)]
    pub mask: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Iteration log; defaults to the output path with a `.json` extension.
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// JSON object from file name (or stem) to category.
    #[arg(long)]
    pub categories: Option<PathBuf>,
    /// Report file; stdout if absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Preset {
    Cfpg,
    Mbo,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// A scene family or a single scene as JSON. Overrides --preset.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cfpg")]
    pub preset: Preset,
    #[arg(long, default_value_t = 10)]
    pub count: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Dilation radius of the coarse masks.
    #[arg(long, default_value_t = 3)]
    pub dilate: u32,
    /// Flip probability of the coarse masks.
    #[arg(long, default_value_t = 0.05)]
    pub salt: f64,
}

pub fn parse_box(text: &str) -> CliResult<BoundingBox> {
    let bad = || {
        CliError::new(
            ErrorKind::InvalidBox,
            format!("cannot parse box {text:?}; expected x1,y1,x2,y2"),
        )
    };
    let v: Vec<u32> = text
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect::<CliResult<_>>()?;
    match v[..] {
        [x1, y1, x2, y2] => Ok(BoundingBox::new(x1, y1, x2, y2)),
        _ => Err(bad()),
    }
}

fn box_from_json(v: &Value, path: &Path) -> CliResult<BoundingBox> {
    let arr = v.get("box").unwrap_or(v);
    let bad = || {
        CliError::new(
            ErrorKind::InvalidBox,
            "expected a box of four non-negative integers",
        )
        .at(path)
    };
    let nums: Vec<u32> = arr
        .as_array()
        .ok_or_else(bad)?
        .iter()
        .map(|n| {
            n.as_u64()
                .and_then(|n| u32::try_from(n).ok())
                .ok_or_else(bad)
        })
        .collect::<CliResult<_>>()?;
    match nums[..] {
        [x1, y1, x2, y2] => Ok(BoundingBox::new(x1, y1, x2, y2)),
        _ => Err(bad()),
    }
}

#[derive(Debug, Serialize)]
pub struct PromptRecord {
    pub image: String,
    #[serde(rename = "box")]
    pub bbox: [u32; 4],
    pub points: Vec<PointPrompt>,
    pub version: String,
    pub config_hash: String,
}

#[derive(Debug, Serialize)]
struct RefineLog<'a> {
    image: String,
    mask: String,
    degenerate: Option<DegenerateReason>,
    erosion_radius: u32,
    band_radius: u32,
    iterations: &'a [IterationLog],
    version: &'static str,
    config_hash: String,
}

#[derive(Debug, Serialize)]
struct Skipped {
    file: String,
    reason: &'static str,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    metrics: MetricsReport,
    samples: Vec<EvalRecord>,
    skipped: Vec<Skipped>,
    version: &'static str,
    config_hash: String,
}

#[derive(Debug, Serialize)]
struct SceneRecord {
    index: u64,
    image: String,
    mask: String,
    coarse: String,
    #[serde(rename = "box")]
    bbox: [u32; 4],
    gt_box: [u32; 4],
    spec: SceneSpec,
}

fn emit<T: Serialize>(out: Option<&Path>, value: &T, stdout: &mut dyn Write) -> CliResult<()> {
    match out {
        Some(p) => files::write_json(p, value),
        None => {
            let text = serde_json::to_string_pretty(value).expect("output serializes");
            writeln!(stdout, "{text}").map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn display(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

pub fn cmd_cfpg(args: &CfpgArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let settings = args.common.settings()?;
    let bbox = match (&args.bbox, &args.boxes) {
        (Some(text), _) => parse_box(text)?,
        (None, Some(path)) => box_from_json(&files::read_json(path)?, path)?,
        (None, None) => {
            return Err(CliError::new(
                ErrorKind::Usage,
                "one of --box or --boxes is required",
            ))
        }
    };
    let image = files::read_image(&args.image)?;
    let outcome = generate_point_detailed(&image, &bbox, &settings.cfpg)
        .map_err(|e| CliError::from(e).at(&args.image))?;
    let record = PromptRecord {
        image: display(&args.image),
        bbox: bbox.to_array(),
        points: vec![outcome.point],
        version: VERSION.into(),
        config_hash: settings.hash(),
    };
    emit(args.out.as_deref(), &record, stdout)
}

pub fn cmd_refine(args: &RefineArgs) -> CliResult<()> {
    let settings = args.common.settings()?;
    let image = files::read_image(&args.image)?;
    let mask = files::read_mask(&args.mask)?;
    let outcome =
        refine_mask(&image, &mask, &settings.mbo).map_err(|e| CliError::from(e).at(&args.mask))?;
    files::write_mask(&args.out, &outcome.mask)?;
    let log_path = args
        .log
        .clone()
        .unwrap_or_else(|| args.out.with_extension("json"));
    let log = RefineLog {
        image: display(&args.image),
        mask: display(&args.mask),
        degenerate: outcome.degenerate,
        erosion_radius: outcome.erosion_radius,
        band_radius: outcome.band_radius,
        iterations: &outcome.log,
        version: VERSION,
        config_hash: settings.hash(),
    };
    files::write_json(&log_path, &log)
}

fn mask_files(dir: &Path) -> CliResult<BTreeMap<String, PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut found = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("png" | "pgm" | "ppm" | "pnm")) {
            if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
                found.insert(name.to_string(), path.clone());
            }
        }
    }
    Ok(found)
}

fn load_categories(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let v = files::read_json(path)?;
    let obj = v.as_object().ok_or_else(|| {
        CliError::new(ErrorKind::Config, "category map must be a JSON object").at(path)
    })?;
    obj.iter()
        .map(|(k, v)| match v.as_str() {
            Some(s) => Ok((k.clone(), s.to_string())),
            None => Err(CliError::new(
                ErrorKind::Config,
                format!("category of {k:?} is not a string"),
            )
            .at(path)),
        })
        .collect()
}

pub fn cmd_eval(args: &EvalArgs, stdout: &mut dyn Write) -> CliResult<()> {
    let settings = args.common.settings()?;
    let preds = mask_files(&args.pred)?;
    let gts = mask_files(&args.gt)?;
    let categories = args
        .categories
        .as_deref()
        .map(load_categories)
        .transpose()?;

    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for (name, gt_path) in &gts {
        let Some(pred_path) = preds.get(name) else {
            skipped.push(Skipped {
                file: name.clone(),
                reason: "no prediction",
            });
            continue;
        };
        let gt = files::read_mask(gt_path)?;
        let pred = files::read_mask(pred_path)?;
        let mut rec =
            iou_with_id(name.as_str(), &pred, &gt).map_err(|e| CliError::from(e).at(pred_path))?;
        if let Some(map) = &categories {
            let stem = Path::new(name)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(name);
            if let Some(c) = map.get(name).or_else(|| map.get(stem)) {
                rec = rec.with_category(c.as_str());
            }
        }
        samples.push(rec);
    }
    skipped.extend(
        preds
            .keys()
            .filter(|n| !gts.contains_key(*n))
            .map(|n| Skipped {
                file: n.clone(),
                reason: "no ground truth",
            }),
    );
    skipped.sort_by(|a, b| a.file.cmp(&b.file));

    if samples.is_empty() {
        return Err(CliError::new(
            ErrorKind::Unmatched,
            format!("no matching file names ({} unmatched)", skipped.len()),
        ));
    }
    let metrics = aggregate(&samples, &settings.thresholds)?;
    let n_skipped = skipped.len();
    let report = EvalOutput {
        metrics,
        samples,
        skipped,
        version: VERSION,
        config_hash: settings.hash(),
    };
    emit(args.out.as_deref(), &report, stdout)?;
    if n_skipped > 0 {
        return Err(CliError::new(
            ErrorKind::Unmatched,
            format!("{n_skipped} file(s) had no counterpart"),
        ));
    }
    Ok(())
}

/// Per-scene stream for single-scene specs and for the coarse-mask noise.
/// Seed 0 maps index `i` to `i`.
pub fn scene_seed(seed: u64, index: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index
}

enum Source {
    Family(SceneFamily),
    Single(SceneSpec),
}

fn load_source(args: &SynthArgs) -> CliResult<Source> {
    let Some(path) = &args.spec else {
        return Ok(Source::Family(match args.preset {
            Preset::Cfpg => SceneFamily::cfpg_benchmark(),
            Preset::Mbo => SceneFamily::mbo_benchmark(),
        }));
    };
    let v = files::read_json(path)?;
    let spec_err = |e: serde_json::Error| CliError::new(ErrorKind::Spec, e.to_string()).at(path);
    let source = if v.get("shapes").is_some() {
        let f: SceneFamily = serde_json::from_value(v).map_err(spec_err)?;
        f.validate().map_err(|e| CliError::from(e).at(path))?;
        Source::Family(f)
    } else {
        let s: SceneSpec = serde_json::from_value(v).map_err(spec_err)?;
        s.validate().map_err(|e| CliError::from(e).at(path))?;
        Source::Single(s)
    };
    Ok(source)
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&args.salt) {
        return Err(CliError::new(ErrorKind::Usage, "--salt must lie in [0, 1]"));
    }
    let source = load_source(args)?;
    let out = &args.out;
    for sub in ["images", "masks", "coarse", "boxes"] {
        let d = out.join(sub);
        std::fs::create_dir_all(&d).map_err(|e| CliError::io(&d, e))?;
    }
    for index in 0..args.count {
        let spec = match &source {
            Source::Family(f) => f.sample(args.seed, index)?,
            Source::Single(s) => SceneSpec {
                seed: scene_seed(args.seed, index),
                ..s.clone()
            },
        };
        let scene = generate(&spec)?;
        let coarse = corrupt_mask(
            &scene.gt_mask,
            args.dilate,
            args.salt,
            scene_seed(args.seed, index),
        )?;
        let name = format!("scene_{index:04}");
        let rel = |dir: &str, ext: &str| format!("{dir}/{name}.{ext}");
        files::write_image(&out.join(rel("images", "png")), &scene.image)?;
        files::write_mask(&out.join(rel("masks", "png")), &scene.gt_mask)?;
        files::write_mask(&out.join(rel("coarse", "png")), &coarse)?;
        let record = SceneRecord {
            index,
            image: rel("images", "png"),
            mask: rel("masks", "png"),
            coarse: rel("coarse", "png"),
            bbox: scene.jittered_box.to_array(),
            gt_box: scene.gt_box.to_array(),
            spec,
        };
        files::write_json(&out.join(rel("boxes", "json")), &record)?;
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the chosen command.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> CliResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            write!(stdout, "{e}").map_err(|e| CliError::io("<stdout>", e))?;
            return Ok(());
        }
        Err(e) => return Err(CliError::new(ErrorKind::Usage, e.to_string().trim_end())),
    };
    match &cli.command {
        Command::Cfpg(a) => cmd_cfpg(a, stdout),
        Command::Refine(a) => cmd_refine(a),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Synth(a) => cmd_synth(a),
        Command::Defaults => write!(stdout, "{}", Settings::default().to_text())
            .map_err(|e| CliError::io("<stdout>", e)),
    }
}
