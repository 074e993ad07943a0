//! Volumetric and lesion-wise segmentation metrics.
//!
//! HD95 is the larger of the two directed 95th percentiles of
//! boundary-to-boundary distances. Boundary voxels are foreground voxels with
//! at least one face neighbor that is background or outside the grid.
//! Distances come from an exact separable Euclidean distance transform that
//! honors anisotropic spacing, so results match a brute-force pairwise scan up
//! to floating-point rounding.
//!
//! The lesion-wise protocol:
//! 1. label ground-truth and predicted components, dropping those smaller than
//!    `min_lesion_size`;
//! 2. dilate every ground-truth lesion by `dilation_radius` (cubic element) to
//!    form its matching zone;
//! 3. assign each predicted component to every zone it touches;
//! 4. score each ground-truth lesion against the union of its assigned
//!    components, or mark it missed;
//! 5. report unassigned predicted components as false positives;
//! 6. average dice and HD95 over all entries, unweighted.
//!
//! Missed and false-positive entries score dice 0 and the HD95 penalty.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::morphology::{connected_components, dilate_bits, filter_small, Connectivity};
use crate::volume::{check_geometry_match, BinaryMask, BoundingBox, Dims, Volume, DEFAULT_SPACING_TOL};

/// The percentile reported by [`hd95`].
pub const HD_PERCENTILE: f64 = 95.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PercentileMethod {
    /// Linear interpolation between closest ranks at position `(n - 1)·q/100`
    /// of the ascending list (the numpy default).
    #[default]
    LinearInterp,
    /// The smallest value whose rank (1-based) is at least `ceil(q/100 · n)`.
    NearestRank,
}

impl fmt::Display for PercentileMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PercentileMethod::LinearInterp => "linear",
            PercentileMethod::NearestRank => "nearest_rank",
        })
    }
}

impl FromStr for PercentileMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "linear_interp" => Ok(PercentileMethod::LinearInterp),
            "nearest_rank" | "nearest" => Ok(PercentileMethod::NearestRank),
            other => Err(Error::InvalidParams(format!(
                "percentile method must be linear or nearest_rank, got {other:?}"
            ))),
        }
    }
}

/// Tunable parts of the evaluation protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricParams {
    pub connectivity: Connectivity,
    /// Matching-zone dilation radius, in voxels.
    pub dilation_radius: usize,
    /// Components smaller than this many voxels are ignored.
    pub min_lesion_size: usize,
    /// HD95 (mm) assigned to missed and false-positive lesions, and to a
    /// mask pair where exactly one side is empty.
    pub hd95_penalty: f64,
    /// Dice when both masks are empty.
    pub empty_pair_dice: f64,
    /// HD95 (mm) when both masks are empty.
    pub empty_pair_hd95: f64,
    pub percentile_method: PercentileMethod,
}

impl Default for MetricParams {
    fn default() -> Self {
        MetricParams {
            connectivity: Connectivity::Full26,
            dilation_radius: 3,
            min_lesion_size: 50,
            hd95_penalty: 374.0,
            empty_pair_dice: 1.0,
            empty_pair_hd95: 0.0,
            percentile_method: PercentileMethod::LinearInterp,
        }
    }
}

impl MetricParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.hd95_penalty.is_finite() && self.hd95_penalty > 0.0) {
            return Err(Error::InvalidParams(format!(
                "hd95_penalty must be > 0, got {}",
                self.hd95_penalty
            )));
        }
        if !(0.0..=1.0).contains(&self.empty_pair_dice) {
            return Err(Error::InvalidParams(format!(
                "empty_pair_dice must lie in [0, 1], got {}",
                self.empty_pair_dice
            )));
        }
        if !(self.empty_pair_hd95.is_finite() && self.empty_pair_hd95 >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "empty_pair_hd95 must be >= 0, got {}",
                self.empty_pair_hd95
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LesionKind {
    Matched,
    MissedGt,
    FalsePositive,
}

/// One row of the lesion-wise table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionMatch {
    /// Ground-truth component id; `None` for false positives.
    pub gt_lesion_id: Option<u32>,
    pub matched_pred_ids: Vec<u32>,
    pub dice: f64,
    pub hd95: f64,
    pub kind: LesionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LesionCounts {
    pub matched: usize,
    pub missed: usize,
    pub false_positive: usize,
}

/// Summary scores of one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionScores {
    pub lesionwise_dice: f64,
    pub lesionwise_hd95: f64,
    pub voxel_dice: f64,
    pub voxel_precision: f64,
    pub voxel_recall: f64,
    pub lesion_counts: LesionCounts,
}

impl RegionScores {
    /// Scores of a region absent from both masks.
    pub fn empty_pair(p: &MetricParams) -> Self {
        RegionScores {
            lesionwise_dice: p.empty_pair_dice,
            lesionwise_hd95: p.empty_pair_hd95,
            voxel_dice: p.empty_pair_dice,
            voxel_precision: 1.0,
            voxel_recall: 1.0,
            lesion_counts: LesionCounts::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Overlap {
    both: usize,
    a: usize,
    b: usize,
}

fn overlap(a: &[bool], b: &[bool]) -> Overlap {
    let mut o = Overlap::default();
    for (x, y) in a.iter().zip(b) {
        o.a += usize::from(*x);
        o.b += usize::from(*y);
        o.both += usize::from(*x && *y);
    }
    o
}

fn dice_from(o: Overlap, empty_pair: f64) -> f64 {
    if o.a + o.b == 0 {
        empty_pair
    } else {
        2.0 * o.both as f64 / (o.a + o.b) as f64
    }
}

fn precision_recall_from(o: Overlap) -> (f64, f64) {
    // a = pred, b = gt
    let precision = match (o.a, o.b) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (n, _) => o.both as f64 / n as f64,
    };
    let recall = match (o.b, o.a) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (n, _) => o.both as f64 / n as f64,
    };
    (precision, recall)
}

fn same_grid(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    check_geometry_match(a.geometry(), b.geometry(), DEFAULT_SPACING_TOL)
}

/// `2|a ∩ b| / (|a| + |b|)`, or `p.empty_pair_dice` when both are empty.
pub fn dice(a: &BinaryMask, b: &BinaryMask, p: &MetricParams) -> Result<f64> {
    same_grid(a, b)?;
    Ok(dice_from(overlap(a.bits(), b.bits()), p.empty_pair_dice))
}

/// Voxelwise precision and recall of `pred` against `gt`.
///
/// An empty prediction has precision 1 only when the ground truth is empty as
/// well; symmetrically for recall.
pub fn precision_recall(pred: &BinaryMask, gt: &BinaryMask) -> Result<(f64, f64)> {
    same_grid(pred, gt)?;
    Ok(precision_recall_from(overlap(pred.bits(), gt.bits())))
}

/// Lower envelope of parabolas `f[q] + w·(p - q)²` (Felzenszwalb & Huttenlocher),
/// skipping infinite sites.
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Envelope {
            sites: Vec::with_capacity(n),
            bounds: Vec::with_capacity(n),
        }
    }

    fn transform(&mut self, f: &[f64], out: &mut [f64], w: f64) {
        self.sites.clear();
        self.bounds.clear();
        for (q, fq) in f.iter().enumerate() {
            if !fq.is_finite() {
                continue;
            }
            let qf = q as f64;
            let mut s = f64::NEG_INFINITY;
            while let Some(&v) = self.sites.last() {
                let vf = v as f64;
                s = ((fq + w * qf * qf) - (f[v] + w * vf * vf)) / (2.0 * w * (qf - vf));
                if s <= *self.bounds.last().unwrap() {
                    self.sites.pop();
                    self.bounds.pop();
                    s = f64::NEG_INFINITY;
                } else {
                    break;
                }
            }
            self.sites.push(q);
            self.bounds.push(s);
        }
        if self.sites.is_empty() {
            out.fill(f64::INFINITY);
            return;
        }
        let mut k = 0;
        for (p, o) in out.iter_mut().enumerate() {
            let pf = p as f64;
            while k + 1 < self.sites.len() && self.bounds[k + 1] < pf {
                k += 1;
            }
            let d = pf - self.sites[k] as f64;
            *o = w * d * d + f[self.sites[k]];
        }
    }
}

/// Squared Euclidean distance (mm²) from every voxel to the nearest foreground voxel.
/// Every voxel is infinite when the foreground is empty.
pub(crate) fn edt_squared(bits: &[bool], dims: Dims, spacing: [f64; 3]) -> Vec<f64> {
    let mut cur: Vec<f64> = bits
        .iter()
        .map(|b| if *b { 0.0 } else { f64::INFINITY })
        .collect();
    let d = dims.as_array();
    let strides = [1, dims.nx, dims.nx * dims.ny];
    let longest = *d.iter().max().unwrap();
    let mut env = Envelope::new(longest);
    let mut line = vec![0.0; longest];
    let mut out = vec![0.0; longest];

    for axis in 0..3 {
        let n = d[axis];
        let stride = strides[axis];
        let w = spacing[axis] * spacing[axis];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for v in 0..d[b] {
            for u in 0..d[a] {
                let mut p = [0usize; 3];
                p[a] = u;
                p[b] = v;
                let start = dims.index(p[0], p[1], p[2]);
                let line = &mut line[..n];
                let mut any_finite = false;
                for (k, slot) in line.iter_mut().enumerate() {
                    *slot = cur[start + k * stride];
                    any_finite |= slot.is_finite();
                }
                if !any_finite {
                    continue;
                }
                let out = &mut out[..n];
                env.transform(line, out, w);
                for (k, value) in out.iter().enumerate() {
                    cur[start + k * stride] = *value;
                }
            }
        }
    }
    cur
}

/// Exact Euclidean distance (mm) from each voxel center to the nearest
/// foreground voxel center; 0 on the foreground.
pub fn distance_transform(m: &BinaryMask, spacing: [f64; 3]) -> Result<Volume<f64>> {
    if m.is_empty() {
        return Err(Error::EmptyMask("distance transform of an empty mask"));
    }
    let sq = edt_squared(m.bits(), m.dims(), spacing);
    Volume::new(m.geometry().clone(), sq.into_iter().map(f64::sqrt).collect())
}

pub(crate) fn boundary_bits(bits: &[bool], dims: Dims) -> Vec<bool> {
    let mut out = vec![false; bits.len()];
    let [nx, ny, nz] = dims.as_array();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let i = dims.index(x, y, z);
                if !bits[i] {
                    continue;
                }
                let interior = x > 0
                    && x + 1 < nx
                    && y > 0
                    && y + 1 < ny
                    && z > 0
                    && z + 1 < nz
                    && bits[i - 1]
                    && bits[i + 1]
                    && bits[i - nx]
                    && bits[i + nx]
                    && bits[i - nx * ny]
                    && bits[i + nx * ny];
                out[i] = !interior;
            }
        }
    }
    out
}

/// Foreground voxels with at least one face neighbor outside the mask or the grid.
pub fn boundary(m: &BinaryMask) -> BinaryMask {
    BinaryMask::new(m.geometry().clone(), boundary_bits(m.bits(), m.dims())).expect("same grid")
}

/// `q`-th percentile of an ascending, nonempty list.
pub fn percentile(sorted: &[f64], q: f64, method: PercentileMethod) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty list");
    let n = sorted.len();
    match method {
        PercentileMethod::LinearInterp => {
            let pos = (n - 1) as f64 * q / 100.0;
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            let frac = pos - lo as f64;
            sorted[lo] + frac * (sorted[hi] - sorted[lo])
        }
        PercentileMethod::NearestRank => {
            let rank = (q / 100.0 * n as f64).ceil() as usize;
            sorted[rank.clamp(1, n) - 1]
        }
    }
}

/// HD95 of two nonempty masks given as full-grid bit arrays. Work is confined
/// to the bounding box of both masks grown by one voxel, which leaves the
/// boundary classification unchanged.
fn hd95_nonempty(a: &[bool], b: &[bool], dims: Dims, spacing: [f64; 3], method: PercentileMethod) -> f64 {
    let bb_a = BoundingBox::of_bits(a, dims).expect("nonempty");
    let bb_b = BoundingBox::of_bits(b, dims).expect("nonempty");
    let bb = bb_a.merge(&bb_b).expand(1, dims);
    let local = bb.dims();
    hd95_local(&bb.crop(a, dims), &bb.crop(b, dims), local, spacing, method)
}

fn hd95_local(a: &[bool], b: &[bool], dims: Dims, spacing: [f64; 3], method: PercentileMethod) -> f64 {
    let ba = boundary_bits(a, dims);
    let bb = boundary_bits(b, dims);
    let directed = |from: &[bool], to: &[bool]| {
        let dt = edt_squared(to, dims, spacing);
        let mut d: Vec<f64> = from
            .iter()
            .zip(&dt)
            .filter(|(f, _)| **f)
            .map(|(_, sq)| sq.sqrt())
            .collect();
        d.sort_by(f64::total_cmp);
        percentile(&d, HD_PERCENTILE, method)
    };
    directed(&ba, &bb).max(directed(&bb, &ba))
}

/// 95th-percentile symmetric Hausdorff distance (mm) between mask boundaries.
pub fn hd95(a: &BinaryMask, b: &BinaryMask, spacing: [f64; 3], p: &MetricParams) -> Result<f64> {
    same_grid(a, b)?;
    Ok(match (a.is_empty(), b.is_empty()) {
        (true, true) => p.empty_pair_hd95,
        (true, false) | (false, true) => p.hd95_penalty,
        (false, false) => hd95_nonempty(a.bits(), b.bits(), a.dims(), spacing, p.percentile_method),
    })
}

fn bbox_of_indices(indices: &[usize], dims: Dims) -> BoundingBox {
    let mut bb = BoundingBox::of_point(dims.coords(indices[0]));
    for i in &indices[1..] {
        bb.include(dims.coords(*i));
    }
    bb
}

/// Marks full-grid `indices` inside a local box.
fn paint_local(indices: &[usize], bb: &BoundingBox, full: Dims, local: &mut [bool]) {
    let ld = bb.dims();
    for i in indices {
        let [x, y, z] = full.coords(*i);
        local[ld.index(x - bb.min[0], y - bb.min[1], z - bb.min[2])] = true;
    }
}

/// Full lesion-wise evaluation of one region.
pub fn lesionwise_eval(
    pred: &BinaryMask,
    gt: &BinaryMask,
    spacing: [f64; 3],
    p: &MetricParams,
) -> Result<(Vec<LesionMatch>, RegionScores)> {
    same_grid(pred, gt)?;
    p.validate()?;
    let dims = gt.dims();

    let gt_cc = filter_small(&connected_components(gt, p.connectivity), p.min_lesion_size);
    let pred_cc = filter_small(&connected_components(pred, p.connectivity), p.min_lesion_size);
    let gt_lists = gt_cc.voxel_lists();
    let pred_lists = pred_cc.voxel_lists();
    let pred_labels = pred_cc.labels().data();
    let pred_boxes: Vec<BoundingBox> = pred_lists.iter().map(|l| bbox_of_indices(l, dims)).collect();

    let mut assigned = vec![false; pred_lists.len()];
    let mut entries = Vec::with_capacity(gt_lists.len());

    for (k, lesion) in gt_lists.iter().enumerate() {
        let gt_id = k as u32 + 1;
        let lesion_box = bbox_of_indices(lesion, dims);

        let zone_box = lesion_box.expand(p.dilation_radius, dims);
        let mut zone = vec![false; zone_box.dims().len()];
        paint_local(lesion, &zone_box, dims, &mut zone);
        let zone = dilate_bits(&zone, zone_box.dims(), p.dilation_radius);
        let mut ids: Vec<u32> = zone
            .iter()
            .enumerate()
            .filter(|(_, z)| **z)
            .map(|(j, _)| pred_labels[zone_box.to_global(j, dims)])
            .filter(|id| *id != 0)
            .collect();
        ids.sort_unstable();
        ids.dedup();

        if ids.is_empty() {
            entries.push(LesionMatch {
                gt_lesion_id: Some(gt_id),
                matched_pred_ids: Vec::new(),
                dice: 0.0,
                hd95: p.hd95_penalty,
                kind: LesionKind::MissedGt,
            });
            continue;
        }

        let mut bb = lesion_box;
        for id in &ids {
            assigned[*id as usize - 1] = true;
            bb = bb.merge(&pred_boxes[*id as usize - 1]);
        }
        let bb = bb.expand(1, dims);
        let local = bb.dims();
        let mut a = vec![false; local.len()];
        let mut b = vec![false; local.len()];
        paint_local(lesion, &bb, dims, &mut a);
        for id in &ids {
            paint_local(&pred_lists[*id as usize - 1], &bb, dims, &mut b);
        }
        entries.push(LesionMatch {
            gt_lesion_id: Some(gt_id),
            matched_pred_ids: ids,
            dice: dice_from(overlap(&a, &b), p.empty_pair_dice),
            hd95: hd95_local(&a, &b, local, spacing, p.percentile_method),
            kind: LesionKind::Matched,
        });
    }

    for (k, used) in assigned.iter().enumerate() {
        if !used {
            entries.push(LesionMatch {
                gt_lesion_id: None,
                matched_pred_ids: vec![k as u32 + 1],
                dice: 0.0,
                hd95: p.hd95_penalty,
                kind: LesionKind::FalsePositive,
            });
        }
    }

    let mut counts = LesionCounts::default();
    for e in &entries {
        match e.kind {
            LesionKind::Matched => counts.matched += 1,
            LesionKind::MissedGt => counts.missed += 1,
            LesionKind::FalsePositive => counts.false_positive += 1,
        }
    }
    let (lesionwise_dice, lesionwise_hd95) = if entries.is_empty() {
        (p.empty_pair_dice, p.empty_pair_hd95)
    } else {
        let n = entries.len() as f64;
        (
            entries.iter().map(|e| e.dice).sum::<f64>() / n,
            entries.iter().map(|e| e.hd95).sum::<f64>() / n,
        )
    };

    let o = overlap(pred.bits(), gt.bits());
    let (voxel_precision, voxel_recall) = precision_recall_from(o);
    let scores = RegionScores {
        lesionwise_dice,
        lesionwise_hd95,
        voxel_dice: dice_from(o, p.empty_pair_dice),
        voxel_precision,
        voxel_recall,
        lesion_counts: counts,
    };
    Ok((entries, scores))
}
