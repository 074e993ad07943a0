//! The flat key-value config format.
//!
//! One `key = value` pair per line. `#` starts a comment that runs to the end
//! of the line; blank lines are ignored. Keys are case-sensitive and may
//! appear at most once. Unknown keys are errors. See the README for the full
//! key list.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fusion::FusionMode;
use crate::labels::{LabelSchema, Region, SchemaKind, Subregion};
use crate::metrics::MetricParams;
use crate::phantom::{DegradationOp, LesionSpec, PhantomSpec, Shell};
use crate::volume::Dims;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IoOptions {
    /// Gzip NIfTI outputs.
    pub compress: bool,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomConfig {
    pub spec: PhantomSpec,
    /// Applied in order to produce a prediction; empty means no prediction.
    pub degradations: Vec<DegradationOp>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    schemas: BTreeMap<SchemaKind, LabelSchema>,
    pub metrics: MetricParams,
    pub fusion_mode: FusionMode,
    pub io: IoOptions,
    pub phantom: Option<PhantomConfig>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Config::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Config> {
        let mut e = Entries::read(text)?;
        let mut cfg = Config::default();

        for kind in [SchemaKind::Pediatric, SchemaKind::Adult, SchemaKind::Comparison] {
            let prefix = format!("schema.{}.", kind.name());
            let keys = e.keys_with_prefix(&prefix);
            if keys.is_empty() {
                continue;
            }
            let mut codes = LabelSchema::default_for(kind).codes().clone();
            let mut first_line = usize::MAX;
            for key in keys {
                let (line, value) = e.take(&key).expect("listed key");
                first_line = first_line.min(line);
                let sym = &key[prefix.len()..];
                let sub: Subregion = sym.parse().map_err(|_| cfg_err(line, format!("unknown key {key:?}")))?;
                if !codes.contains_key(&sub) {
                    return Err(cfg_err(line, format!("{sub} is not part of the {kind} schema")));
                }
                codes.insert(sub, parse_value(line, &key, &value)?);
            }
            let schema = LabelSchema::new(kind, codes).map_err(|err| cfg_err(first_line, err.to_string()))?;
            cfg.schemas.insert(kind, schema);
        }

        cfg.metrics = read_metrics(&mut e, MetricParams::default())?;
        if let Some((line, v)) = e.take("fusion.mode") {
            cfg.fusion_mode = parse_value(line, "fusion.mode", &v)?;
        }
        if let Some((line, v)) = e.take("io.compress") {
            cfg.io.compress = parse_bool(line, &v)?;
        }
        if let Some((_, v)) = e.take("io.out_dir") {
            cfg.io.out_dir = Some(PathBuf::from(v));
        }
        cfg.phantom = read_phantom(&mut e)?;
        e.finish()?;
        Ok(cfg)
    }

    /// Schema of the given kind, with any overrides applied.
    pub fn schema(&self, kind: SchemaKind) -> LabelSchema {
        self.schemas
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| LabelSchema::default_for(kind))
    }

    pub fn set_schema(&mut self, schema: LabelSchema) {
        self.schemas.insert(schema.kind(), schema);
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn read(text: &str) -> Result<Entries> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(cfg_err(line, format!("expected 'key = value', got {body:?}")));
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(cfg_err(line, format!("invalid key {key:?}")));
            }
            if value.is_empty() {
                return Err(cfg_err(line, format!("{key} has no value")));
            }
            if let Some((prev, _)) = map.insert(key.to_string(), (line, value.to_string())) {
                return Err(cfg_err(line, format!("{key} already set on line {prev}")));
            }
        }
        Ok(Entries { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn keys_with_prefix(&self, prefix: &str) -> Vec<String> {
        self.map.keys().filter(|k| k.starts_with(prefix)).cloned().collect()
    }

    fn any_with_prefix(&self, prefix: &str) -> bool {
        self.map.keys().any(|k| k.starts_with(prefix))
    }

    fn finish(self) -> Result<()> {
        match self.map.iter().min_by_key(|(_, (line, _))| *line) {
            Some((key, (line, _))) => Err(cfg_err(*line, format!("unknown key {key:?}"))),
            None => Ok(()),
        }
    }
}

fn parse_value<T: FromStr>(line: usize, key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| cfg_err(line, format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_bool(line: usize, v: &str) -> Result<bool> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(cfg_err(line, format!("expected true or false, got {v:?}"))),
    }
}

/// Splits a list on commas, whitespace or `x`.
fn split_list(v: &str) -> Vec<&str> {
    v.split(|c: char| c == ',' || c == 'x' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_triple<T: FromStr + Copy>(line: usize, key: &str, v: &str) -> Result<[T; 3]>
where
    T::Err: std::fmt::Display,
{
    let parts = split_list(v);
    if parts.len() != 3 {
        return Err(cfg_err(line, format!("{key}: expected three values, got {v:?}")));
    }
    Ok([
        parse_value(line, key, parts[0])?,
        parse_value(line, key, parts[1])?,
        parse_value(line, key, parts[2])?,
    ])
}

const METRIC_KEYS: [&str; 7] = [
    "metrics.connectivity",
    "metrics.dilation_radius",
    "metrics.min_lesion_size",
    "metrics.hd95_penalty",
    "metrics.empty_pair_dice",
    "metrics.empty_pair_hd95",
    "metrics.percentile_method",
];

fn read_metrics(e: &mut Entries, mut p: MetricParams) -> Result<MetricParams> {
    let mut first_line = None;
    for key in METRIC_KEYS {
        let Some((line, v)) = e.take(key) else { continue };
        first_line.get_or_insert(line);
        match key {
            "metrics.connectivity" => p.connectivity = parse_value(line, key, &v)?,
            "metrics.dilation_radius" => p.dilation_radius = parse_value(line, key, &v)?,
            "metrics.min_lesion_size" => p.min_lesion_size = parse_value(line, key, &v)?,
            "metrics.hd95_penalty" => p.hd95_penalty = parse_value(line, key, &v)?,
            "metrics.empty_pair_dice" => p.empty_pair_dice = parse_value(line, key, &v)?,
            "metrics.empty_pair_hd95" => p.empty_pair_hd95 = parse_value(line, key, &v)?,
            "metrics.percentile_method" => p.percentile_method = parse_value(line, key, &v)?,
            _ => unreachable!(),
        }
    }
    if let Some(line) = first_line {
        p.validate().map_err(|err| cfg_err(line, err.to_string()))?;
    }
    Ok(p)
}

/// The `metrics.*` lines that reproduce `p`, in a fixed order.
pub fn metric_params_lines(p: &MetricParams) -> Vec<String> {
    let values = [
        p.connectivity.to_string(),
        p.dilation_radius.to_string(),
        p.min_lesion_size.to_string(),
        p.hd95_penalty.to_string(),
        p.empty_pair_dice.to_string(),
        p.empty_pair_hd95.to_string(),
        p.percentile_method.to_string(),
    ];
    METRIC_KEYS
        .iter()
        .zip(values)
        .map(|(k, v)| format!("{k} = {v}"))
        .collect()
}

/// Metric parameters from config text holding only `metrics.*` keys; missing
/// keys keep their defaults.
pub fn parse_metric_params(text: &str) -> Result<MetricParams> {
    let mut e = Entries::read(text)?;
    let p = read_metrics(&mut e, MetricParams::default())?;
    e.finish()?;
    Ok(p)
}

fn read_phantom(e: &mut Entries) -> Result<Option<PhantomConfig>> {
    if !e.any_with_prefix("phantom.") {
        return Ok(None);
    }
    let Some((dims_line, dims)) = e.take("phantom.dims") else {
        let line = e
            .map
            .iter()
            .filter(|(k, _)| k.starts_with("phantom."))
            .map(|(_, (l, _))| *l)
            .min()
            .unwrap_or(0);
        return Err(cfg_err(line, "phantom section needs phantom.dims"));
    };
    let d: [usize; 3] = parse_triple(dims_line, "phantom.dims", &dims)?;
    let spacing = match e.take("phantom.spacing") {
        Some((line, v)) => parse_triple(line, "phantom.spacing", &v)?,
        None => [1.0; 3],
    };
    let seed = match e.take("phantom.seed") {
        Some((line, v)) => parse_value(line, "phantom.seed", &v)?,
        None => 0,
    };

    let lesions = read_indexed(e, "phantom.lesion.", |e, idx, line| {
        let base = format!("phantom.lesion.{idx}.");
        let mut field = |name: &str| {
            e.take(&format!("{base}{name}"))
                .ok_or_else(|| cfg_err(line, format!("{base}{name} is missing")))
        };
        let (cl, c) = field("center")?;
        let (al, a) = field("semi_axes")?;
        let (sl, s) = field("shells")?;
        Ok(LesionSpec {
            center: parse_triple(cl, "center", &c)?,
            semi_axes: parse_triple(al, "semi_axes", &a)?,
            shells: parse_shells(sl, &s)?,
        })
    })?;

    let n_lesions = match e.take("phantom.n_lesions") {
        Some((line, v)) => parse_value(line, "phantom.n_lesions", &v)?,
        None => lesions.len(),
    };

    let degradations = read_indexed(e, "phantom.degrade.", |e, idx, _| {
        let key = format!("phantom.degrade.{idx}");
        let (line, v) = e
            .take(&key)
            .ok_or_else(|| cfg_err(0, format!("{key} must be a single key")))?;
        parse_op(&v).map_err(|err| cfg_err(line, err.to_string()))
    })?;

    Ok(Some(PhantomConfig {
        spec: PhantomSpec {
            dims: Dims::from(d),
            spacing,
            n_lesions,
            lesions,
            seed,
        },
        degradations,
    }))
}

/// Reads `<prefix><i>...` entries in ascending `i` order.
fn read_indexed<T>(
    e: &mut Entries,
    prefix: &str,
    mut read: impl FnMut(&mut Entries, u64, usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut indices = BTreeMap::new();
    for key in e.keys_with_prefix(prefix) {
        let line = e.map[&key].0;
        let rest = &key[prefix.len()..];
        let idx_text = rest.split('.').next().unwrap_or("");
        let idx: u64 = idx_text
            .parse()
            .map_err(|_| cfg_err(line, format!("unknown key {key:?}")))?;
        let l = indices.entry(idx).or_insert(line);
        *l = (*l).min(line);
    }
    let mut out = Vec::with_capacity(indices.len());
    for (idx, line) in indices {
        out.push(read(e, idx, line)?);
    }
    Ok(out)
}

/// `ED:1.0, NET:0.7, ET:0.4`
fn parse_shells(line: usize, v: &str) -> Result<Vec<Shell>> {
    v.split(',')
        .map(|item| {
            let (sym, scale) = item
                .split_once(':')
                .ok_or_else(|| cfg_err(line, format!("shell {item:?} must look like ED:1.0")))?;
            Ok(Shell {
                subregion: sym
                    .trim()
                    .parse()
                    .map_err(|e: Error| cfg_err(line, e.to_string()))?,
                scale: parse_value(line, "shell scale", scale.trim())?,
            })
        })
        .collect()
}

/// Parses `erode(WT, 2)`, `dilate(ET, 1)`, `shift(ED, 1, 0, -2)`,
/// `drop_label(ED)` or `speckle_fp(NET, n_blobs, radius, seed)`.
pub fn parse_op(text: &str) -> Result<DegradationOp> {
    let bad = |msg: String| Error::InvalidOp(msg);
    let text = text.trim();
    let (name, rest) = text
        .split_once('(')
        .ok_or_else(|| bad(format!("expected name(args), got {text:?}")))?;
    let args = rest
        .strip_suffix(')')
        .ok_or_else(|| bad(format!("missing ')' in {text:?}")))?;
    let args: Vec<&str> = args.split(',').map(str::trim).collect();
    let name = name.trim().to_ascii_lowercase();
    let arity = match name.as_str() {
        "erode" | "dilate" => 2,
        "shift" | "speckle_fp" => 4,
        "drop_label" => 1,
        _ => return Err(bad(format!("unknown degradation {name:?}"))),
    };
    if args.len() != arity {
        return Err(bad(format!("{name} takes {arity} arguments, got {}", args.len())));
    }
    let region: Region = args[0].parse().map_err(|e: Error| bad(e.to_string()))?;
    fn num<T: FromStr>(s: &str) -> Result<T> {
        s.parse()
            .map_err(|_| Error::InvalidOp(format!("{s:?} is not a valid number here")))
    }
    Ok(match name.as_str() {
        "erode" => DegradationOp::Erode {
            region,
            radius: num(args[1])?,
        },
        "dilate" => DegradationOp::Dilate {
            region,
            radius: num(args[1])?,
        },
        "shift" => DegradationOp::Shift {
            region,
            offset: [num(args[1])?, num(args[2])?, num(args[3])?],
        },
        "drop_label" => DegradationOp::DropLabel { region },
        "speckle_fp" => DegradationOp::SpeckleFp {
            region,
            n_blobs: num(args[1])?,
            blob_radius: num(args[2])?,
            seed: num(args[3])?,
        },
        _ => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::PercentileMethod;
    use crate::morphology::Connectivity;

    #[test]
    fn empty_config_is_default() {
        let c = Config::parse("# nothing here\n\n").unwrap();
        assert_eq!(c.metrics, MetricParams::default());
        assert_eq!(c.fusion_mode, FusionMode::Strict);
        assert_eq!(c.schema(SchemaKind::Pediatric), LabelSchema::pediatric());
        assert!(c.phantom.is_none());
    }

    #[test]
    fn full_config() {
        let text = "\
schema.pediatric.ET = 4   # swap ET and ED
schema.pediatric.ED = 1
metrics.connectivity = 6
metrics.dilation_radius = 2
metrics.min_lesion_size = 10
metrics.hd95_penalty = 300
metrics.percentile_method = nearest_rank
fusion.mode = union
io.compress = true
io.out_dir = out
phantom.dims = 32x32x16
phantom.spacing = 1, 1, 2.5
phantom.seed = 42
phantom.lesion.0.center = 10, 10, 8
phantom.lesion.0.semi_axes = 5 5 4
phantom.lesion.0.shells = ED:1.0, NET:0.7, ET:0.4
phantom.degrade.1 = shift(ED, 1, 0, -2)
phantom.degrade.0 = erode(WT, 2)
";
        let c = Config::parse(text).unwrap();
        let ped = c.schema(SchemaKind::Pediatric);
        assert_eq!(ped.code(Subregion::ET), Some(4));
        assert_eq!(ped.code(Subregion::ED), Some(1));
        assert_eq!(ped.code(Subregion::NET), Some(2));
        assert_eq!(c.metrics.connectivity, Connectivity::Face6);
        assert_eq!(c.metrics.min_lesion_size, 10);
        assert_eq!(c.metrics.percentile_method, PercentileMethod::NearestRank);
        assert_eq!(c.fusion_mode, FusionMode::Union);
        assert!(c.io.compress);
        let ph = c.phantom.unwrap();
        assert_eq!(ph.spec.dims, Dims::new(32, 32, 16));
        assert_eq!(ph.spec.spacing, [1.0, 1.0, 2.5]);
        assert_eq!(ph.spec.n_lesions, 1);
        assert_eq!(ph.spec.lesions[0].shells.len(), 3);
        assert_eq!(
            ph.degradations,
            vec![
                DegradationOp::Erode {
                    region: Region::WT,
                    radius: 2
                },
                DegradationOp::Shift {
                    region: Region::ED,
                    offset: [1, 0, -2]
                },
            ]
        );
    }

    #[test]
    fn errors_name_the_line() {
        let e = Config::parse("metrics.dilation_radius = 3\nmetrics.dilaton_radius = 2\n").unwrap_err();
        assert_eq!(e.kind(), "config-error");
        assert!(e.to_string().contains("line 2"), "{e}");
        let e = Config::parse("fusion.mode = strict\nfusion.mode = union\n").unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        assert!(Config::parse("just text\n").is_err());
        assert!(Config::parse("schema.adult.CC = 5\n").is_err());
        assert!(Config::parse("schema.pediatric.ET = 2\n").is_err());
        assert!(Config::parse("metrics.hd95_penalty = -1\n").is_err());
        assert!(Config::parse("phantom.seed = 1\n").is_err());
        assert!(Config::parse("phantom.dims = 8,8,8\nphantom.lesion.0.center = 4,4,4\n").is_err());
    }

    #[test]
    fn metric_lines_round_trip() {
        let p = MetricParams {
            connectivity: Connectivity::Face6,
            dilation_radius: 1,
            min_lesion_size: 7,
            hd95_penalty: 0.1 + 0.2,
            empty_pair_dice: 0.0,
            empty_pair_hd95: 12.5,
            percentile_method: PercentileMethod::NearestRank,
        };
        let text = metric_params_lines(&p).join("\n");
        assert_eq!(parse_metric_params(&text).unwrap(), p);
        assert_eq!(parse_metric_params("").unwrap(), MetricParams::default());
    }

    #[test]
    fn op_grammar() {
        assert_eq!(
            parse_op("speckle_fp(NET, 3, 2, 99)").unwrap(),
            DegradationOp::SpeckleFp {
                region: Region::NET,
                n_blobs: 3,
                blob_radius: 2,
                seed: 99
            }
        );
        assert_eq!(
            parse_op("DROP_LABEL(ed)").unwrap(),
            DegradationOp::DropLabel { region: Region::ED }
        );
        for bad in ["erode(WT)", "blur(WT, 1)", "erode(XX, 1)", "dilate(ET, -1)", "shift(ED, 1, 0"] {
            assert_eq!(parse_op(bad).unwrap_err().kind(), "invalid-op-parameters", "{bad}");
        }
    }
}
