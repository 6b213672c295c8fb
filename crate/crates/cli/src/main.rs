//! `dropletforge` command-line entry point.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use dropletforge::dataset::{
    build_coco, load_instance_sets, read_dataset_dir, screen_masks, split_dataset, write_dataset_dir, SplitRatios,
    TrainingSample,
};
use dropletforge::filter::{apply_filter, apply_filter_frozen, morphology_report, FilterSpec};
use dropletforge::loss::LossRecord;
use dropletforge::metrics::{evaluate, ImageEval, ScoredInstance};
use dropletforge::raster::png::read_color;
use dropletforge::raster::ColorImage;
use dropletforge::scene::SceneResult;
use dropletforge::synth::{generate_scene, SceneSpec};
use dropletforge::wsi::{segment_slide, segment_unsliced};
use dropletforge::PipelineConfig;

const THREADS_ENV: &str = "DROPLETFORGE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dropletforge", version, about = "Segmentation of overlapped lipid droplets")]
struct Cli {
    /// Pipeline configuration JSON; omitted keys take defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Segment a slide (or every PNG in a directory) into a scene JSON.
    Segment {
        #[arg(long)]
        input: PathBuf,
        /// Output file, or directory when the input is a directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Process the whole image at once instead of tiling.
        #[arg(long)]
        unsliced: bool,
    },
    /// Segment images and write them with their masks as a training dataset.
    Weaklabel {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON object mapping image name to mask ids rejected on review.
        #[arg(long)]
        reject: Option<PathBuf>,
    },
    /// Score predictions against ground truth.
    Evaluate {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Matching threshold; defaults to `metrics.iou_min`.
        #[arg(long)]
        iou: Option<f64>,
    },
    /// Apply feature cutoffs to a scene JSON.
    Filter {
        /// Filter spec JSON; defaults to the config's `filter` block.
        #[arg(long)]
        spec: Option<PathBuf>,
        results: PathBuf,
        /// Use the averages stored in the scene instead of recomputing them.
        #[arg(long)]
        frozen: bool,
        /// Pixel size for physical-unit statistics.
        #[arg(long)]
        um_per_px: Option<f64>,
    },
    /// Evaluate the training loss of one instance record.
    Losses {
        /// Record JSON; `-` reads standard input.
        #[arg(long, default_value = "-")]
        input: PathBuf,
    },
    /// Render synthetic scenes with ground truth.
    Synth {
        /// One scene spec or an array of them.
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Export a dataset directory as annotations.
    Export {
        #[arg(long, value_enum)]
        format: ExportFormat,
        #[arg(long)]
        input: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Partition a dataset into train, validation and test names.
    SplitData {
        #[arg(long)]
        input: PathBuf,
        /// Three comma-separated fractions.
        #[arg(long, value_parser = parse_ratios)]
        ratios: Option<SplitRatios>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ExportFormat {
    Coco,
}

fn parse_ratios(s: &str) -> Result<SplitRatios, String> {
    let v: Vec<f64> = s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    match v[..] {
        [train, val, test] => Ok(SplitRatios { train, val, test }),
        _ => Err("expected three fractions".into()),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => {
            let s = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            PipelineConfig::from_json(&s)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(n) = threads_from_env()? {
        cfg.tiling.workers = Some(cfg.tiling.workers.map_or(n, |w| w.min(n)));
    }
    Ok(cfg)
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v:?}"))?;
            if n == 0 {
                bail!("{THREADS_ENV} must be positive");
            }
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

/// Serializes `v` and adds the resolved config under `config`.
fn with_config<T: Serialize>(v: &T, cfg: &PipelineConfig) -> Result<Value> {
    let mut out = serde_json::to_value(v)?;
    match &mut out {
        Value::Object(map) => {
            map.entry("config").or_insert_with(|| cfg.to_value());
        }
        _ => bail!("output is not a JSON object"),
    }
    Ok(out)
}

fn emit(v: &Value) -> Result<()> {
    let mut stdout = io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, v)?;
    writeln!(stdout)?;
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = if path == Path::new("-") {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        s
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?
    };
    Ok(serde_json::from_str(&s).with_context(|| format!("parsing {}", path.display()))?)
}

/// PNG inputs by name: a single file, `images/*.png` under a dataset
/// directory, or every PNG in a directory.
fn input_images(input: &Path) -> Result<Vec<(String, PathBuf)>> {
    let stem = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    if input.is_file() {
        return Ok(vec![(stem(input), input.to_path_buf())]);
    }
    let dir = if input.join("images").is_dir() { input.join("images") } else { input.to_path_buf() };
    let mut v: Vec<PathBuf> = fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    v.sort();
    Ok(v.into_iter().map(|p| (stem(&p), p)).collect())
}

fn segment_image(img: &ColorImage, cfg: &PipelineConfig, unsliced: bool) -> Result<SceneResult> {
    Ok(if unsliced { segment_unsliced(img, cfg)? } else { segment_slide(img, cfg)? })
}

#[derive(Serialize)]
struct SceneSummary {
    name: String,
    instances: usize,
}

fn cmd_segment(cfg: &PipelineConfig, input: &Path, out: Option<&Path>, unsliced: bool) -> Result<()> {
    if input.is_file() {
        let scene = segment_image(&read_color(input)?, cfg, unsliced)?;
        let v = serde_json::to_value(&scene)?;
        return match out {
            Some(p) => {
                write_json(p, &v)?;
                emit(&with_config(&BTreeMap::from([("scenes", vec![SceneSummary { name: p.display().to_string(), instances: scene.instances.len() }])]), cfg)?)
            }
            None => emit(&v),
        };
    }
    let Some(out) = out else { bail!("--out is required when --input is a directory") };
    fs::create_dir_all(out)?;
    let mut scenes = Vec::new();
    for (name, path) in input_images(input)? {
        let scene = segment_image(&read_color(&path)?, cfg, unsliced)?;
        write_json(&out.join(format!("{name}.json")), &scene)?;
        scenes.push(SceneSummary { name, instances: scene.instances.len() });
    }
    emit(&with_config(&BTreeMap::from([("scenes", scenes)]), cfg)?)
}

#[derive(Serialize)]
struct LabelSummary {
    name: String,
    masks: usize,
    accepted: usize,
}

fn cmd_weaklabel(cfg: &PipelineConfig, input: &Path, out: &Path, reject: Option<&Path>) -> Result<()> {
    let rejected: BTreeMap<String, Vec<u32>> = match reject {
        Some(p) => read_json(p)?,
        None => BTreeMap::new(),
    };
    let mut samples = Vec::new();
    for (name, path) in input_images(input)? {
        let img = read_color(&path)?;
        let scene = segment_image(&img, cfg, false)?;
        let sample = TrainingSample::new(name.clone(), img, scene.masks()?)?;
        let ids = rejected.get(&name).map(Vec::as_slice).unwrap_or(&[]);
        samples.push(screen_masks(&sample, ids)?);
    }
    if let Some(unknown) = rejected.keys().find(|k| !samples.iter().any(|s| &s.name == *k)) {
        bail!("rejection list names unknown image {unknown:?}");
    }
    write_dataset_dir(out, &samples)?;
    let summary: Vec<LabelSummary> = samples
        .iter()
        .map(|s| LabelSummary { name: s.name.clone(), masks: s.masks.len(), accepted: s.accepted_masks().count() })
        .collect();
    emit(&with_config(&BTreeMap::from([("samples", summary)]), cfg)?)
}

fn cmd_evaluate(cfg: &PipelineConfig, pred: &Path, gt: &Path, iou: Option<f64>) -> Result<()> {
    let preds = load_instance_sets(pred)?;
    let gts = load_instance_sets(gt)?;
    let mut names: Vec<&String> = preds.keys().chain(gts.keys()).collect();
    names.sort();
    names.dedup();
    let mut images = Vec::with_capacity(names.len());
    for name in names {
        let p = preds.get(name);
        let g = gts.get(name);
        if let (Some(p), Some(g)) = (p, g) {
            if p.frame != g.frame {
                bail!("image {name:?}: prediction and ground-truth sizes differ");
            }
        }
        let scored = match p {
            Some(p) => p
                .masks
                .iter()
                .zip(&p.scores)
                .map(|(m, &s)| ScoredInstance::new(m.clone(), s))
                .collect::<Result<Vec<_>, _>>()?,
            None => Vec::new(),
        };
        images.push(ImageEval { preds: scored, gts: g.map(|g| g.masks.clone()).unwrap_or_default() });
    }
    let report = evaluate(&images, iou.unwrap_or(cfg.metrics.iou_min), cfg.metrics.jaccard)?;
    emit(&with_config(&report, cfg)?)
}

#[derive(Serialize)]
struct FilterOutput {
    #[serde(flatten)]
    outcome: dropletforge::filter::FilterOutcome,
    morphology: dropletforge::filter::MorphologyReport,
}

fn cmd_filter(cfg: &PipelineConfig, spec: Option<&Path>, results: &Path, frozen: bool, um_per_px: Option<f64>) -> Result<()> {
    let spec: FilterSpec = match spec {
        Some(p) => read_json(p)?,
        None => cfg.filter.clone(),
    };
    spec.validate()?;
    let scene: SceneResult = read_json(results)?;
    scene.validate()?;
    let outcome = match (frozen, &scene.cohort) {
        (true, Some(avg)) => apply_filter_frozen(&scene.instances, &spec, avg),
        (true, None) => bail!("--frozen needs cohort averages in the scene"),
        (false, _) => apply_filter(&scene.instances, &spec),
    };
    let morphology = morphology_report(&outcome, um_per_px);
    let mut cfg = cfg.clone();
    cfg.filter = spec;
    emit(&with_config(&FilterOutput { outcome, morphology }, &cfg)?)
}

fn cmd_losses(cfg: &PipelineConfig, input: &Path) -> Result<()> {
    let record: LossRecord = read_json(input)?;
    emit(&with_config(&record.evaluate()?, cfg)?)
}

fn cmd_synth(cfg: &PipelineConfig, spec: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let raw: Value = read_json(spec)?;
    let mut specs: Vec<SceneSpec> = match raw {
        Value::Array(_) => serde_json::from_value(raw)?,
        _ => vec![serde_json::from_value(raw)?],
    };
    if let Some(s) = seed {
        for (i, sp) in specs.iter_mut().enumerate() {
            sp.seed = s.wrapping_add(i as u64);
        }
    }
    let mut samples = Vec::with_capacity(specs.len());
    for (i, sp) in specs.iter().enumerate() {
        let scene = generate_scene(sp)?;
        samples.push(TrainingSample::new(format!("scene_{i:04}"), scene.image, scene.masks)?);
    }
    write_dataset_dir(out, &samples)?;
    let summary: Vec<LabelSummary> = samples
        .iter()
        .map(|s| LabelSummary { name: s.name.clone(), masks: s.masks.len(), accepted: s.masks.len() })
        .collect();
    emit(&with_config(&BTreeMap::from([("samples", serde_json::to_value(summary)?), ("specs", serde_json::to_value(&specs)?)]), cfg)?)
}

fn cmd_export(cfg: &PipelineConfig, input: &Path, out: Option<&Path>) -> Result<()> {
    let samples = read_dataset_dir(input)?;
    let coco = build_coco(&samples);
    match out {
        Some(p) => {
            write_json(p, &coco)?;
            let summary = BTreeMap::from([("images", coco.images.len()), ("annotations", coco.annotations.len())]);
            emit(&with_config(&summary, cfg)?)
        }
        None => emit(&with_config(&coco, cfg)?),
    }
}

#[derive(Serialize)]
struct SplitOutput {
    train: Vec<String>,
    val: Vec<String>,
    test: Vec<String>,
    ratios: SplitRatios,
    seed: u64,
}

fn cmd_split_data(cfg: &PipelineConfig, input: &Path, ratios: Option<SplitRatios>, seed: u64) -> Result<()> {
    let names: Vec<String> = input_images(input)?.into_iter().map(|(n, _)| n).collect();
    let ratios = ratios.unwrap_or_default();
    let (train, val, test) = split_dataset(&names, &ratios, seed)?;
    emit(&with_config(&SplitOutput { train, val, test, ratios, seed }, cfg)?)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    if let Some(n) = cfg.tiling.workers {
        // a second initialization in the same process is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Segment { input, out, unsliced } => cmd_segment(&cfg, &input, out.as_deref(), unsliced),
        Command::Weaklabel { input, out, reject } => cmd_weaklabel(&cfg, &input, &out, reject.as_deref()),
        Command::Evaluate { pred, gt, iou } => cmd_evaluate(&cfg, &pred, &gt, iou),
        Command::Filter { spec, results, frozen, um_per_px } => cmd_filter(&cfg, spec.as_deref(), &results, frozen, um_per_px),
        Command::Losses { input } => cmd_losses(&cfg, &input),
        Command::Synth { spec, out } => cmd_synth(&cfg, &spec, &out, cli.seed),
        Command::Export { format: ExportFormat::Coco, input, out } => cmd_export(&cfg, &input, out.as_deref()),
        Command::SplitData { input, ratios } => cmd_split_data(&cfg, &input, ratios, cli.seed.unwrap_or(0)),
    }
}

/// Help for the subcommand named in argv, or the top-level help.
fn usage_help(args: &[String]) -> String {
    let mut cmd = Cli::command();
    let named = args.iter().skip(1).find(|a| !a.starts_with('-')).cloned();
    if let Some(mut sub) = named.and_then(|n| cmd.find_subcommand_mut(&n).map(|c| c.clone())) {
        let name = format!("dropletforge {}", sub.get_name());
        sub.set_bin_name(name);
        return sub.render_help().to_string();
    }
    cmd.render_help().to_string()
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprintln!("{}", e.render());
            eprintln!("{}", usage_help(&args));
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
