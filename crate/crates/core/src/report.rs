//! Per-case evaluation and cohort tables.
//!
//! Per-case rows are always emitted next to the cohort means, so every
//! aggregate can be recomputed from the published rows. Cohort means are
//! unweighted and folded over cases in ascending `case_id` order.
//!
//! JSON carries a `schema_version` field; the current version is
//! [`SCHEMA_VERSION`].

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config;
use crate::error::{Error, Result};
use crate::fusion::FusionWarnings;
use crate::labels::{LabelMap, LabelSchema, Region, SchemaKind};
use crate::metrics::{lesionwise_eval, LesionCounts, LesionMatch, MetricParams, RegionScores};
use crate::volume::{check_geometry_match, DEFAULT_SPACING_TOL};

pub const SCHEMA_VERSION: u32 = 1;

/// Row label of cohort means in CSV output.
pub const COHORT_ROW: &str = "COHORT";
/// Region label of the mean over region columns.
pub const AVG_COLUMN: &str = "AVG";

pub const CSV_HEADER: [&str; 10] = [
    "case_id",
    "region",
    "lw_dice",
    "lw_hd95_mm",
    "voxel_dice",
    "precision",
    "recall",
    "n_matched",
    "n_missed",
    "n_fp",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    pub region: Region,
    /// Both masks were empty; `scores` then holds the empty-pair values.
    pub absent: bool,
    pub scores: RegionScores,
    pub lesions: Vec<LesionMatch>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub case_id: String,
    pub schema: SchemaKind,
    pub regions: Vec<RegionResult>,
    pub fusion_warnings: Option<FusionWarnings>,
    pub params: MetricParams,
}

impl CaseReport {
    pub fn region(&self, r: Region) -> Option<&RegionResult> {
        self.regions.iter().find(|x| x.region == r)
    }

    pub fn region_list(&self) -> Vec<Region> {
        self.regions.iter().map(|r| r.region).collect()
    }
}

/// Means of one region over the cohort. Lesion counts are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSummary {
    pub region: Region,
    pub lesionwise_dice: f64,
    pub lesionwise_hd95: f64,
    pub voxel_dice: f64,
    pub voxel_precision: f64,
    pub voxel_recall: f64,
    pub lesion_counts: LesionCounts,
}

/// A case that could not be evaluated.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortReport {
    pub schema_version: u32,
    pub schema: SchemaKind,
    pub params: MetricParams,
    pub regions: Vec<Region>,
    /// Sorted by `case_id`.
    pub cases: Vec<CaseReport>,
    pub summaries: Vec<RegionSummary>,
    /// Mean of the per-region lesion-wise dice means.
    pub avg_lesionwise_dice: f64,
    /// Mean of the per-region lesion-wise HD95 means.
    pub avg_lesionwise_hd95: f64,
    pub failures: Vec<CaseFailure>,
}

impl CohortReport {
    pub fn summary(&self, r: Region) -> Option<&RegionSummary> {
        self.summaries.iter().find(|s| s.region == r)
    }
}

/// Evaluates one prediction against its ground truth.
///
/// Maps under the same schema kind are used as they are. Otherwise both are
/// converted to the comparison schema (taken from whichever map already uses
/// it, or the default one). An empty `regions` list selects the default set of
/// the evaluated schema.
pub fn eval_case(
    case_id: &str,
    pred: &LabelMap,
    gt: &LabelMap,
    regions: &[Region],
    p: &MetricParams,
) -> Result<CaseReport> {
    check_geometry_match(pred.geometry(), gt.geometry(), DEFAULT_SPACING_TOL)?;
    p.validate()?;
    let (pred, gt) = harmonize(pred, gt)?;
    let kind = gt.schema().kind();

    let regions: Vec<Region> = if regions.is_empty() {
        kind.default_regions().to_vec()
    } else {
        regions.to_vec()
    };
    let mut seen = BTreeSet::new();
    for r in &regions {
        if !seen.insert(*r) {
            return Err(Error::InconsistentRegionSets(format!("region {r} listed twice")));
        }
        if r.constituents(kind).is_none() {
            return Err(Error::RegionUndefined {
                region: r.name().into(),
                schema: kind.name().into(),
            });
        }
    }

    let spacing = gt.geometry().spacing();
    let results = regions
        .par_iter()
        .map(|r| {
            let pm = pred.derive_region(*r)?;
            let gm = gt.derive_region(*r)?;
            if pm.is_empty() && gm.is_empty() {
                return Ok(RegionResult {
                    region: *r,
                    absent: true,
                    scores: RegionScores::empty_pair(p),
                    lesions: Vec::new(),
                });
            }
            let (lesions, scores) = lesionwise_eval(&pm, &gm, spacing, p)?;
            Ok(RegionResult {
                region: *r,
                absent: false,
                scores,
                lesions,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(CaseReport {
        case_id: case_id.to_string(),
        schema: kind,
        regions: results,
        fusion_warnings: None,
        params: p.clone(),
    })
}

fn harmonize<'a>(
    pred: &'a LabelMap,
    gt: &'a LabelMap,
) -> Result<(std::borrow::Cow<'a, LabelMap>, std::borrow::Cow<'a, LabelMap>)> {
    use std::borrow::Cow;
    let (pk, gk) = (pred.schema().kind(), gt.schema().kind());
    if pk == gk {
        return Ok((Cow::Borrowed(pred), Cow::Borrowed(gt)));
    }
    let target = if gk == SchemaKind::Comparison {
        gt.schema().clone()
    } else if pk == SchemaKind::Comparison {
        pred.schema().clone()
    } else {
        LabelSchema::comparison()
    };
    let convert = |m: &'a LabelMap| -> Result<Cow<'a, LabelMap>> {
        if m.schema() == &target {
            Ok(Cow::Borrowed(m))
        } else {
            m.to_comparison(&target).map(Cow::Owned).map_err(|e| {
                Error::SchemaIncompatible(format!("{pk} prediction vs {gk} ground truth: {e}"))
            })
        }
    };
    Ok((convert(pred)?, convert(gt)?))
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        sum += v;
        n += 1;
    }
    sum / n as f64
}

/// Folds case reports into cohort means.
///
/// All reports must share schema, region list and metric parameters, and case
/// ids must be unique.
pub fn aggregate(reports: &[CaseReport]) -> Result<CohortReport> {
    let Some(first) = reports.first() else {
        return Err(Error::InconsistentRegionSets("no case reports to aggregate".into()));
    };
    let regions = first.region_list();
    for r in reports {
        if r.region_list() != regions {
            return Err(Error::InconsistentRegionSets(format!(
                "case {} has regions {:?}, case {} has {:?}",
                r.case_id,
                r.region_list(),
                first.case_id,
                regions
            )));
        }
        if r.schema != first.schema {
            return Err(Error::InconsistentRegionSets(format!(
                "case {} is {}, case {} is {}",
                r.case_id, r.schema, first.case_id, first.schema
            )));
        }
        if r.params != first.params {
            return Err(Error::InconsistentRegionSets(format!(
                "case {} was scored with different metric parameters than case {}",
                r.case_id, first.case_id
            )));
        }
    }
    let mut cases = reports.to_vec();
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    if let Some(w) = cases.windows(2).find(|w| w[0].case_id == w[1].case_id) {
        return Err(Error::InconsistentRegionSets(format!(
            "case id {} appears twice",
            w[0].case_id
        )));
    }

    let summaries: Vec<RegionSummary> = regions
        .iter()
        .enumerate()
        .map(|(k, region)| {
            let col = || cases.iter().map(move |c| &c.regions[k].scores);
            let mut counts = LesionCounts::default();
            for s in col() {
                counts.matched += s.lesion_counts.matched;
                counts.missed += s.lesion_counts.missed;
                counts.false_positive += s.lesion_counts.false_positive;
            }
            RegionSummary {
                region: *region,
                lesionwise_dice: mean(col().map(|s| s.lesionwise_dice)),
                lesionwise_hd95: mean(col().map(|s| s.lesionwise_hd95)),
                voxel_dice: mean(col().map(|s| s.voxel_dice)),
                voxel_precision: mean(col().map(|s| s.voxel_precision)),
                voxel_recall: mean(col().map(|s| s.voxel_recall)),
                lesion_counts: counts,
            }
        })
        .collect();

    Ok(CohortReport {
        schema_version: SCHEMA_VERSION,
        schema: first.schema,
        params: first.params.clone(),
        regions,
        avg_lesionwise_dice: mean(summaries.iter().map(|s| s.lesionwise_dice)),
        avg_lesionwise_hd95: mean(summaries.iter().map(|s| s.lesionwise_hd95)),
        summaries,
        cases,
        failures: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Markdown];

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidParams(format!(
                "report format must be csv, json or md, got {other:?}"
            ))),
        }
    }
}

/// Renders a cohort report.
pub fn emit(r: &CohortReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => emit_csv(r),
        ReportFormat::Json => emit_json(r),
        ReportFormat::Markdown => emit_markdown(r),
    }
}

pub fn emit_json(r: &CohortReport) -> String {
    let mut s = serde_json::to_string_pretty(r).expect("report values are finite");
    s.push('\n');
    s
}

/// JSON of a single case, as written next to the cohort files.
pub fn emit_case_json(c: &CaseReport) -> String {
    let mut s = serde_json::to_string_pretty(c).expect("report values are finite");
    s.push('\n');
    s
}

pub fn parse_json(text: &str) -> Result<CohortReport> {
    let r: CohortReport =
        serde_json::from_str(text).map_err(|e| Error::ReportParse(e.to_string()))?;
    if r.schema_version != SCHEMA_VERSION {
        return Err(Error::ReportParse(format!(
            "schema_version {} is not supported (expected {SCHEMA_VERSION})",
            r.schema_version
        )));
    }
    Ok(r)
}

fn csv_row(w: &mut csv::Writer<Vec<u8>>, case: &str, region: &str, s: &RegionScores) {
    let c = s.lesion_counts;
    w.write_record([
        case.to_string(),
        region.to_string(),
        s.lesionwise_dice.to_string(),
        s.lesionwise_hd95.to_string(),
        s.voxel_dice.to_string(),
        s.voxel_precision.to_string(),
        s.voxel_recall.to_string(),
        c.matched.to_string(),
        c.missed.to_string(),
        c.false_positive.to_string(),
    ])
    .expect("writing to memory");
}

/// One row per (case, region), then one `COHORT` row per region and a
/// `COHORT,AVG` row. Floats are written in shortest round-trip form. Schema
/// and metric parameters follow as `#` comment lines.
pub fn emit_csv(r: &CohortReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("writing to memory");
    for case in &r.cases {
        for rr in &case.regions {
            csv_row(&mut w, &case.case_id, rr.region.name(), &rr.scores);
        }
    }
    for s in &r.summaries {
        let scores = RegionScores {
            lesionwise_dice: s.lesionwise_dice,
            lesionwise_hd95: s.lesionwise_hd95,
            voxel_dice: s.voxel_dice,
            voxel_precision: s.voxel_precision,
            voxel_recall: s.voxel_recall,
            lesion_counts: s.lesion_counts,
        };
        csv_row(&mut w, COHORT_ROW, s.region.name(), &scores);
    }
    w.write_record([
        COHORT_ROW.to_string(),
        AVG_COLUMN.to_string(),
        r.avg_lesionwise_dice.to_string(),
        r.avg_lesionwise_hd95.to_string(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
        String::new(),
    ])
    .expect("writing to memory");
    let mut out = String::from_utf8(w.into_inner().expect("flushing to memory")).expect("ascii");
    let _ = writeln!(out, "# schema = {}", r.schema);
    for line in config::metric_params_lines(&r.params) {
        let _ = writeln!(out, "# {line}");
    }
    for f in &r.failures {
        let _ = writeln!(out, "# failed {} : {}", f.case_id, f.message.replace('\n', " "));
    }
    out
}

/// Rebuilds per-case reports from CSV written by [`emit_csv`]. Cohort rows are
/// skipped; lesion tables and absence markers are not part of the CSV, so
/// they come back empty and `false`.
pub fn parse_cases_csv(text: &str) -> Result<Vec<CaseReport>> {
    let bad = |msg: String| Error::ReportParse(msg);
    let mut schema: Option<SchemaKind> = None;
    let mut param_lines = Vec::new();
    for line in text.lines() {
        let Some(rest) = line.strip_prefix('#') else { continue };
        let rest = rest.trim();
        if let Some(v) = rest.strip_prefix("schema =") {
            schema = Some(v.trim().parse().map_err(|e: Error| bad(e.to_string()))?);
        } else if rest.starts_with("metrics.") {
            param_lines.push(rest.to_string());
        }
    }
    let schema = schema.ok_or_else(|| bad("missing '# schema = ...' line".into()))?;
    let params = config::parse_metric_params(&param_lines.join("\n"))
        .map_err(|e| bad(format!("metric parameter comments: {e}")))?;

    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rd.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }

    let mut cases: Vec<CaseReport> = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let line = n + 2;
        if &rec[0] == COHORT_ROW {
            continue;
        }
        let float = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| bad(format!("row {line}, column {}: {e}", CSV_HEADER[k])))
        };
        let count = |k: usize| -> Result<usize> {
            rec[k]
                .parse::<usize>()
                .map_err(|e| bad(format!("row {line}, column {}: {e}", CSV_HEADER[k])))
        };
        let region: Region = rec[1].parse().map_err(|e: Error| bad(format!("row {line}: {e}")))?;
        let result = RegionResult {
            region,
            absent: false,
            scores: RegionScores {
                lesionwise_dice: float(2)?,
                lesionwise_hd95: float(3)?,
                voxel_dice: float(4)?,
                voxel_precision: float(5)?,
                voxel_recall: float(6)?,
                lesion_counts: LesionCounts {
                    matched: count(7)?,
                    missed: count(8)?,
                    false_positive: count(9)?,
                },
            },
            lesions: Vec::new(),
        };
        match cases.last_mut() {
            Some(c) if c.case_id == rec[0] => c.regions.push(result),
            _ => {
                if cases.iter().any(|c| c.case_id == rec[0]) {
                    return Err(bad(format!("row {line}: rows of case {} are not contiguous", &rec[0])));
                }
                cases.push(CaseReport {
                    case_id: rec[0].to_string(),
                    schema,
                    regions: vec![result],
                    fusion_warnings: None,
                    params: params.clone(),
                });
            }
        }
    }
    Ok(cases)
}

/// Regions shown in the precision and recall groups: WT and TC when present,
/// otherwise every region.
fn pr_regions(regions: &[Region]) -> Vec<Region> {
    let wt_tc: Vec<Region> = regions
        .iter()
        .copied()
        .filter(|r| matches!(r, Region::WT | Region::TC))
        .collect();
    if wt_tc.is_empty() {
        regions.to_vec()
    } else {
        wt_tc
    }
}

/// Markdown column groups, in table order.
pub const MARKDOWN_GROUPS: [&str; 4] = ["Lesion-wise Dice", "Lesion-wise HD95 (mm)", "Precision", "Recall"];

/// Pipe table with the column groups of [`MARKDOWN_GROUPS`]: one row per case
/// and a final mean row. Schemas other than pediatric get an AVG column in
/// the dice and HD95 groups.
pub fn emit_markdown(r: &CohortReport) -> String {
    let with_avg = r.schema != SchemaKind::Pediatric;
    let pr = pr_regions(&r.regions);
    let mut header = vec!["Case".to_string()];
    for group in &MARKDOWN_GROUPS[..2] {
        for reg in &r.regions {
            header.push(format!("{group} {reg}"));
        }
        if with_avg {
            header.push(format!("{group} {AVG_COLUMN}"));
        }
    }
    for group in &MARKDOWN_GROUPS[2..] {
        for reg in &pr {
            header.push(format!("{group} {reg}"));
        }
    }

    let row = |label: &str, dice: Vec<f64>, hd: Vec<f64>, prec: Vec<f64>, rec: Vec<f64>| {
        let mut cells = vec![label.to_string()];
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        cells.extend(dice.iter().map(|v| format!("{v:.3}")));
        if with_avg {
            cells.push(format!("{:.3}", avg(&dice)));
        }
        cells.extend(hd.iter().map(|v| format!("{v:.2}")));
        if with_avg {
            cells.push(format!("{:.2}", avg(&hd)));
        }
        cells.extend(prec.iter().map(|v| format!("{v:.3}")));
        cells.extend(rec.iter().map(|v| format!("{v:.3}")));
        cells
    };

    let mut rows = Vec::new();
    for c in &r.cases {
        let pick = |f: fn(&RegionScores) -> f64, regs: &[Region]| -> Vec<f64> {
            regs.iter()
                .map(|reg| c.region(*reg).map_or(f64::NAN, |x| f(&x.scores)))
                .collect()
        };
        rows.push(row(
            &c.case_id,
            pick(|s| s.lesionwise_dice, &r.regions),
            pick(|s| s.lesionwise_hd95, &r.regions),
            pick(|s| s.voxel_precision, &pr),
            pick(|s| s.voxel_recall, &pr),
        ));
    }
    let pick = |f: fn(&RegionSummary) -> f64, regs: &[Region]| -> Vec<f64> {
        regs.iter()
            .map(|reg| r.summary(*reg).map_or(f64::NAN, f))
            .collect()
    };
    let mut mean_row = row(
        "**Mean**",
        pick(|s| s.lesionwise_dice, &r.regions),
        pick(|s| s.lesionwise_hd95, &r.regions),
        pick(|s| s.voxel_precision, &pr),
        pick(|s| s.voxel_recall, &pr),
    );
    if with_avg {
        // cohort AVG cells use the stored cohort values
        let nd = r.regions.len();
        mean_row[1 + nd] = format!("{:.3}", r.avg_lesionwise_dice);
        mean_row[2 + 2 * nd] = format!("{:.2}", r.avg_lesionwise_hd95);
    }
    rows.push(mean_row);

    let mut out = String::new();
    let _ = writeln!(out, "# Lesion-wise evaluation ({} schema, {} cases)\n", r.schema, r.cases.len());
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}",
        header
            .iter()
            .enumerate()
            .map(|(i, _)| if i == 0 { "---|" } else { "---:|" })
            .collect::<String>()
    );
    for cells in rows {
        let _ = writeln!(out, "| {} |", cells.join(" | "));
    }
    let _ = writeln!(out, "\nPrecision and recall are voxel-wise.\n");
    let _ = writeln!(out, "Metric parameters:\n");
    for line in config::metric_params_lines(&r.params) {
        let _ = writeln!(out, "- `{line}`");
    }
    if !r.failures.is_empty() {
        let _ = writeln!(out, "\nFailed cases:\n");
        for f in &r.failures {
            let _ = writeln!(out, "- `{}`: {}", f.case_id, f.message.replace('\n', " "));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::Subregion;
    use crate::volume::{Dims, Geometry, Volume};

    fn case(id: &str, dice: &[f64]) -> CaseReport {
        let regions = [Region::WT, Region::TC, Region::ET, Region::NC, Region::ED];
        CaseReport {
            case_id: id.into(),
            schema: SchemaKind::Comparison,
            regions: dice
                .iter()
                .zip(regions)
                .map(|(d, r)| RegionResult {
                    region: r,
                    absent: false,
                    scores: RegionScores {
                        lesionwise_dice: *d,
                        lesionwise_hd95: 374.0 * (1.0 - d),
                        voxel_dice: *d,
                        voxel_precision: *d,
                        voxel_recall: 1.0,
                        lesion_counts: LesionCounts {
                            matched: 1,
                            missed: 0,
                            false_positive: 0,
                        },
                    },
                    lesions: Vec::new(),
                })
                .collect(),
            fusion_warnings: None,
            params: MetricParams::default(),
        }
    }

    #[test]
    fn single_case_cohort_equals_case() {
        let c = case("a", &[0.9, 0.8, 0.7]);
        let r = aggregate(std::slice::from_ref(&c)).unwrap();
        for (s, rr) in r.summaries.iter().zip(&c.regions) {
            assert_eq!(s.lesionwise_dice, rr.scores.lesionwise_dice);
            assert_eq!(s.lesionwise_hd95, rr.scores.lesionwise_hd95);
        }
    }

    #[test]
    fn two_case_mean() {
        let r = aggregate(&[case("b", &[0.8]), case("a", &[0.4])]).unwrap();
        assert!((r.summaries[0].lesionwise_dice - 0.6).abs() < 1e-15);
        assert_eq!(r.cases[0].case_id, "a");
        assert_eq!(r.summaries[0].lesion_counts.matched, 2);
    }

    #[test]
    fn aggregate_rejects_mismatches() {
        let e = aggregate(&[case("a", &[0.4]), case("b", &[0.4, 0.5])]).unwrap_err();
        assert_eq!(e.kind(), "inconsistent-region-sets");
        assert!(aggregate(&[case("a", &[0.4]), case("a", &[0.5])]).is_err());
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = aggregate(&[case("a", &[0.1, 0.2]), case("b", &[1.0 / 3.0, 0.7])]).unwrap();
        assert_eq!(parse_json(&emit_json(&r)).unwrap(), r);
    }

    #[test]
    fn csv_round_trip_of_cases() {
        let r = aggregate(&[case("a", &[0.1, 0.2]), case("b", &[1.0 / 3.0, 0.7])]).unwrap();
        let text = emit_csv(&r);
        let back = aggregate(&parse_cases_csv(&text).unwrap()).unwrap();
        assert_eq!(back.summaries, r.summaries);
        assert_eq!(back.avg_lesionwise_dice, r.avg_lesionwise_dice);
        assert_eq!(emit_csv(&back), text);
    }

    #[test]
    fn markdown_layout() {
        let mut c = case("a", &[0.0, 1.0]);
        c.regions[0].scores.lesionwise_hd95 = 374.0;
        let md = emit_markdown(&aggregate(&[c]).unwrap());
        let header = md.lines().find(|l| l.starts_with("| Case")).unwrap();
        let pos: Vec<usize> = MARKDOWN_GROUPS.iter().map(|g| header.find(g).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(md.contains("| 374.00 |"));
        assert!(header.contains("Lesion-wise Dice AVG"));
    }

    #[test]
    fn one_region_gives_one_column_per_group() {
        let r = aggregate(&[case("a", &[0.5])]).unwrap();
        let md = emit_markdown(&r);
        let header = md.lines().find(|l| l.starts_with("| Case")).unwrap();
        // case, dice WT + AVG, hd95 WT + AVG, precision WT, recall WT
        assert_eq!(header.matches(" | ").count() + 1, 7);
    }

    fn labels(dims: Dims, codes: &[((usize, usize, usize), u8)], schema: LabelSchema) -> LabelMap {
        let g = Geometry::with_spacing(dims, [1.0; 3]).unwrap();
        let mut data = vec![0u8; dims.len()];
        for ((x, y, z), c) in codes {
            data[dims.index(*x, *y, *z)] = *c;
        }
        LabelMap::new(Volume::new(g, data).unwrap(), schema).unwrap()
    }

    #[test]
    fn eval_remaps_mixed_schemas() {
        let d = Dims::new(4, 4, 4);
        let mut p = MetricParams::default();
        p.min_lesion_size = 1;
        let ped = labels(d, &[((1, 1, 1), 2), ((1, 2, 1), 3)], LabelSchema::pediatric());
        let cmp = labels(d, &[((1, 1, 1), 2), ((1, 2, 1), 2)], LabelSchema::comparison());
        let r = eval_case("x", &ped, &cmp, &[], &p).unwrap();
        assert_eq!(r.schema, SchemaKind::Comparison);
        assert_eq!(r.region_list(), vec![Region::WT, Region::TC, Region::ET, Region::NC, Region::ED]);
        assert_eq!(r.region(Region::NC).unwrap().scores.lesionwise_dice, 1.0);
        assert!(r.region(Region::ET).unwrap().absent);
        let e = eval_case("x", &ped, &cmp, &[Region::CC], &p).unwrap_err();
        assert_eq!(e.kind(), "region-undefined-for-schema");
    }

    #[test]
    fn eval_rejects_geometry_mismatch() {
        let a = labels(Dims::new(4, 4, 4), &[], LabelSchema::pediatric());
        let b = labels(Dims::new(4, 4, 5), &[], LabelSchema::pediatric());
        let e = eval_case("x", &a, &b, &[], &MetricParams::default()).unwrap_err();
        assert_eq!(e.kind(), "geometry-mismatch");
        assert_eq!(a.count(Subregion::ET), 0);
    }
}
