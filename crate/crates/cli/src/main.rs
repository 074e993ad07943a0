//! `tumorfuse` command-line front end.
//!
//! Exit codes: 0 success, 1 some cohort cases failed, 2 usage or input error.
//! Errors print as `error: <kind>: <message>` on stderr.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use tumorfuse::fusion::{fuse_3lwt_with_schema, fusion_warnings};
use tumorfuse::labels::{LabelMap, Region, SchemaKind, Subregion};
use tumorfuse::nifti::{read_nifti, write_nifti};
use tumorfuse::phantom::{degrade, generate_phantom_with_schema};
use tumorfuse::report::{self, CaseFailure, CaseReport, CohortReport, ReportFormat};
use tumorfuse::{BinaryMask, Config, Error, FusionMode, SubregionTriplet};

#[derive(Parser)]
#[command(name = "tumorfuse", version, about = "Residual whole-tumor fusion and lesion-wise evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a whole-tumor mask with an ET/CC/ED label map into a four-label map.
    Fuse(FuseArgs),
    /// Evaluate predictions against ground truth and write cohort reports.
    Eval(EvalArgs),
    /// Write a synthetic ground truth (and degraded prediction) from a spec.
    Phantom(PhantomArgs),
    /// Re-aggregate cohort reports from a per-case CSV.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    /// Config file (flat `key = value` format).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct FuseArgs {
    /// Whole-tumor mask; any nonzero voxel is tumor.
    wt: PathBuf,
    /// Three-label map with pediatric ET/CC/ED codes.
    sub: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides `fusion.mode`.
    #[arg(long)]
    mode: Option<FusionMode>,
    /// Gzip the output (also `io.compress`).
    #[arg(long)]
    compress: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct EvalArgs {
    /// Case list: `id pred gt` per line.
    #[arg(long, conflicts_with_all = ["pred", "gt"])]
    manifest: Option<PathBuf>,
    /// Prediction files; case ids are the file names without `.nii[.gz]`.
    #[arg(long, num_args = 1.., requires = "gt")]
    pred: Vec<PathBuf>,
    /// Ground-truth files, paired with `--pred` by position.
    #[arg(long, num_args = 1.., requires = "pred")]
    gt: Vec<PathBuf>,
    /// Output directory (defaults to `io.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Schema of the prediction files.
    #[arg(long, default_value = "pediatric")]
    pred_schema: SchemaKind,
    /// Schema of the ground-truth files.
    #[arg(long, default_value = "pediatric")]
    gt_schema: SchemaKind,
    /// Regions to report, comma-separated (default: the schema's table layout).
    #[arg(long, value_delimiter = ',')]
    regions: Vec<Region>,
    /// Cases evaluated in parallel.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Report formats to write (default: all).
    #[arg(long, value_delimiter = ',')]
    format: Vec<ReportFormat>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PhantomArgs {
    /// Config file with a `phantom.*` section.
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Gzip the outputs (also `io.compress`).
    #[arg(long)]
    compress: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-case CSV written by `eval`.
    #[arg(long)]
    cases: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    format: Vec<ReportFormat>,
}

/// A failure that ends the command with exit code 2.
struct Fatal(String);

impl From<Error> for Fatal {
    fn from(e: Error) -> Self {
        Fatal(e.to_string())
    }
}

fn usage(msg: impl Into<String>) -> Fatal {
    Fatal(format!("usage: {}", msg.into()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fuse(a) => cmd_fuse(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::Report(a) => cmd_report(a),
    };
    match outcome {
        Ok(code) => code,
        Err(Fatal(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<Config, Fatal> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn read_labels(path: &Path, kind: SchemaKind, cfg: &Config) -> Result<LabelMap, Error> {
    let volume = read_nifti(path)?.into_labels()?;
    LabelMap::new(volume, cfg.schema(kind))
}

/// `<kind>: <path>: <detail>`; io errors already name their path.
fn with_path(path: &Path, e: Error) -> String {
    if matches!(e, Error::Io { .. }) {
        return e.to_string();
    }
    let text = e.to_string();
    let detail = text.strip_prefix(&format!("{}: ", e.kind())).unwrap_or(&text);
    format!("{}: {}: {detail}", e.kind(), path.display())
}

fn create_dir(dir: &Path) -> Result<(), Fatal> {
    fs::create_dir_all(dir).map_err(|e| Fatal(format!("io-error: {}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Fatal> {
    fs::write(path, text).map_err(|e| Fatal(format!("io-error: {}: {e}", path.display())))
}

fn cmd_fuse(a: FuseArgs) -> Result<ExitCode, Fatal> {
    let cfg = load_config(a.common.config.as_deref())?;
    let schema = cfg.schema(SchemaKind::Pediatric);
    let mode = a.mode.unwrap_or(cfg.fusion_mode);
    let wt_vol = read_nifti(&a.wt)
        .and_then(|v| v.into_labels())
        .map_err(|e| Fatal(with_path(&a.wt, e)))?;
    let wt = BinaryMask::from_volume(&wt_vol);
    let sub_map = LabelMap::new(
        read_nifti(&a.sub)
            .and_then(|v| v.into_labels())
            .map_err(|e| Fatal(with_path(&a.sub, e)))?,
        schema.clone(),
    )
    .map_err(|e| Fatal(with_path(&a.sub, e)))?;
    let sub = SubregionTriplet::from_label_map(&sub_map).map_err(|e| Fatal(with_path(&a.sub, e)))?;
    let warnings = fusion_warnings(&wt, &sub)?;
    let fused = fuse_3lwt_with_schema(&wt, &sub, mode, &schema)?;
    write_nifti(fused.volume(), &a.out, a.compress || cfg.io.compress)?;

    let counts = [Subregion::ET, Subregion::NET, Subregion::CC, Subregion::ED]
        .map(|s| format!("{s}={}", fused.count(s)))
        .join(" ");
    println!(
        "fused {} ({mode}): {counts}; subregion voxels outside WT: {}; empty WT with subregions: {}",
        a.out.display(),
        warnings.subregion_outside_wt,
        if warnings.empty_wt_nonempty_subregions { "yes" } else { "no" }
    );
    Ok(ExitCode::SUCCESS)
}

fn formats(requested: &[ReportFormat]) -> Vec<ReportFormat> {
    if requested.is_empty() {
        ReportFormat::ALL.to_vec()
    } else {
        ReportFormat::ALL.into_iter().filter(|f| requested.contains(f)).collect()
    }
}

fn write_reports(cohort: &CohortReport, out: &Path, formats: &[ReportFormat]) -> Result<(), Fatal> {
    for f in formats {
        let path = out.join(format!("report.{}", f.extension()));
        write_text(&path, &report::emit(cohort, *f))?;
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> Result<ExitCode, Fatal> {
    let cfg = load_config(a.common.config.as_deref())?;
    let out = a
        .out
        .clone()
        .or_else(|| cfg.io.out_dir.clone())
        .ok_or_else(|| usage("--out is required when io.out_dir is not configured"))?;
    if a.jobs == 0 {
        return Err(usage("--jobs must be at least 1"));
    }

    let cases = if let Some(m) = &a.manifest {
        let text = fs::read_to_string(m).map_err(|e| Fatal(format!("io-error: {}: {e}", m.display())))?;
        let base = m.parent().unwrap_or(Path::new(""));
        manifest::parse(&text, base).map_err(usage)?
    } else {
        if a.pred.is_empty() {
            return Err(usage("give --manifest or --pred/--gt lists"));
        }
        if a.pred.len() != a.gt.len() {
            return Err(usage(format!(
                "{} prediction paths but {} ground-truth paths",
                a.pred.len(),
                a.gt.len()
            )));
        }
        let entries: Vec<manifest::CaseEntry> = a
            .pred
            .iter()
            .zip(&a.gt)
            .map(|(p, g)| manifest::CaseEntry {
                id: manifest::case_id(p),
                pred: p.clone(),
                gt: g.clone(),
            })
            .collect();
        for (i, e) in entries.iter().enumerate() {
            if entries[..i].iter().any(|o| o.id == e.id) {
                return Err(usage(format!("case id {} repeats", e.id)));
            }
        }
        entries
    };
    if cases.is_empty() {
        return Err(usage("no cases to evaluate"));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs)
        .build()
        .map_err(|e| Fatal(format!("io-error: cannot start workers: {e}")))?;
    let results: Vec<Result<CaseReport, CaseFailure>> = pool.install(|| {
        cases
            .par_iter()
            .map(|c| {
                let fail = |message: String| CaseFailure {
                    case_id: c.id.clone(),
                    message,
                };
                let pred = read_labels(&c.pred, a.pred_schema, &cfg).map_err(|e| fail(with_path(&c.pred, e)))?;
                let gt = read_labels(&c.gt, a.gt_schema, &cfg).map_err(|e| fail(with_path(&c.gt, e)))?;
                report::eval_case(&c.id, &pred, &gt, &a.regions, &cfg.metrics)
                    .map_err(|e| fail(with_path(&c.pred, e)))
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(f) => {
                eprintln!("error: case {}: {}", f.case_id, f.message);
                failures.push(f);
            }
        }
    }
    create_dir(&out)?;
    let fmts = formats(&a.format);
    if !reports.is_empty() {
        let mut cohort = report::aggregate(&reports)?;
        cohort.failures = failures.clone();
        write_reports(&cohort, &out, &fmts)?;
        if fmts.contains(&ReportFormat::Json) {
            let dir = out.join("cases");
            create_dir(&dir)?;
            for c in &cohort.cases {
                write_text(&dir.join(format!("{}.json", c.case_id)), &report::emit_case_json(c))?;
            }
        }
    }
    println!(
        "evaluated {} of {} cases into {}",
        reports.len(),
        cases.len(),
        out.display()
    );
    Ok(if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_phantom(a: PhantomArgs) -> Result<ExitCode, Fatal> {
    let cfg = Config::load(&a.spec)?;
    let ph = cfg.phantom.as_ref().ok_or_else(|| {
        Fatal(format!(
            "config-error: {}: no phantom.* keys",
            a.spec.display()
        ))
    })?;
    let gt = generate_phantom_with_schema(&ph.spec, &cfg.schema(SchemaKind::Pediatric))?;
    let compress = a.compress || cfg.io.compress;
    let ext = if compress { "nii.gz" } else { "nii" };
    create_dir(&a.out)?;
    write_nifti(gt.volume(), a.out.join(format!("gt.{ext}")), compress)?;
    let mut written = vec![format!("gt.{ext}")];
    if !ph.degradations.is_empty() {
        let pred = degrade(&gt, &ph.degradations)?;
        write_nifti(pred.volume(), a.out.join(format!("pred.{ext}")), compress)?;
        written.push(format!("pred.{ext}"));
    }
    println!(
        "phantom {} with {} lesion(s) into {}: {}",
        ph.spec.dims,
        ph.spec.n_lesions,
        a.out.display(),
        written.join(", ")
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_report(a: ReportArgs) -> Result<ExitCode, Fatal> {
    let text = fs::read_to_string(&a.cases)
        .map_err(|e| Fatal(format!("io-error: {}: {e}", a.cases.display())))?;
    let cases = report::parse_cases_csv(&text)?;
    if cases.is_empty() {
        return Err(Fatal(format!("report-parse-error: {} has no case rows", a.cases.display())));
    }
    let cohort = report::aggregate(&cases)?;
    create_dir(&a.out)?;
    write_reports(&cohort, &a.out, &formats(&a.format))?;
    println!("re-aggregated {} cases into {}", cohort.cases.len(), a.out.display());
    Ok(ExitCode::SUCCESS)
}
