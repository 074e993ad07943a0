//! Whole-tumor residual fusion.
//!
//! One model predicts the whole tumor (`wt`), a second predicts ET, CC and ED.
//! The fused pediatric map labels ET/CC/ED from the second model and marks
//! every remaining whole-tumor voxel as NET:
//!
//! ```text
//! NET = WT \ (ET ∪ CC ∪ ED)
//! ```

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{LabelMap, LabelSchema, Region, SchemaKind, Subregion};
use crate::volume::{check_geometry_match, BinaryMask, Volume, DEFAULT_SPACING_TOL};

/// What happens to ET/CC/ED voxels that fall outside the whole-tumor mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    /// Subregions are clipped to the whole-tumor support.
    #[default]
    Strict,
    /// Subregion voxels outside the whole tumor are kept, growing the tumor.
    Union,
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Strict => "strict",
            FusionMode::Union => "union",
        })
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strict" => Ok(FusionMode::Strict),
            "union" => Ok(FusionMode::Union),
            other => Err(Error::InvalidParams(format!(
                "fusion mode must be strict or union, got {other:?}"
            ))),
        }
    }
}

/// Pairwise-disjoint ET, CC and ED masks on one grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubregionTriplet {
    et: BinaryMask,
    cc: BinaryMask,
    ed: BinaryMask,
}

impl SubregionTriplet {
    pub fn new(et: BinaryMask, cc: BinaryMask, ed: BinaryMask) -> Result<Self> {
        check_geometry_match(et.geometry(), cc.geometry(), DEFAULT_SPACING_TOL)?;
        check_geometry_match(et.geometry(), ed.geometry(), DEFAULT_SPACING_TOL)?;
        let overlaps = et
            .bits()
            .iter()
            .zip(cc.bits())
            .zip(ed.bits())
            .filter(|((a, b), c)| u8::from(**a) + u8::from(**b) + u8::from(**c) > 1)
            .count();
        if overlaps > 0 {
            return Err(Error::DisjointnessViolation(overlaps));
        }
        Ok(SubregionTriplet { et, cc, ed })
    }

    /// Splits a single ET/CC/ED label map (the three-label model's output) into masks.
    ///
    /// The map is read with the pediatric codes; a NET-coded voxel is an error
    /// because that model never emits NET.
    pub fn from_label_map(m: &LabelMap) -> Result<Self> {
        if m.schema().kind() != SchemaKind::Pediatric {
            return Err(Error::WrongSchema {
                expected: SchemaKind::Pediatric.name().into(),
                found: m.schema().name().into(),
            });
        }
        let net = m.schema().code_of(Subregion::NET);
        if m.volume().data().contains(&net) {
            return Err(Error::UnknownCode(net));
        }
        Ok(SubregionTriplet {
            et: m.subregion_mask(Subregion::ET)?,
            cc: m.subregion_mask(Subregion::CC)?,
            ed: m.subregion_mask(Subregion::ED)?,
        })
    }

    pub fn et(&self) -> &BinaryMask {
        &self.et
    }

    pub fn cc(&self) -> &BinaryMask {
        &self.cc
    }

    pub fn ed(&self) -> &BinaryMask {
        &self.ed
    }

    /// Voxelwise ET ∪ CC ∪ ED.
    pub fn union(&self) -> BinaryMask {
        self.et
            .union(&self.cc)
            .and_then(|m| m.union(&self.ed))
            .expect("triplet masks share a grid")
    }
}

/// Inconsistencies between the two model outputs, reported alongside a fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FusionWarnings {
    /// ET/CC/ED voxels lying outside the whole-tumor mask.
    pub subregion_outside_wt: usize,
    /// The whole-tumor mask is empty while some subregion is not.
    pub empty_wt_nonempty_subregions: bool,
}

impl FusionWarnings {
    pub fn any(&self) -> bool {
        self.subregion_outside_wt > 0 || self.empty_wt_nonempty_subregions
    }
}

pub fn fusion_warnings(wt: &BinaryMask, sub: &SubregionTriplet) -> Result<FusionWarnings> {
    check_geometry_match(wt.geometry(), sub.et.geometry(), DEFAULT_SPACING_TOL)?;
    let union = sub.union();
    let outside = union
        .bits()
        .iter()
        .zip(wt.bits())
        .filter(|(s, w)| **s && !**w)
        .count();
    Ok(FusionWarnings {
        subregion_outside_wt: outside,
        empty_wt_nonempty_subregions: wt.is_empty() && !union.is_empty(),
    })
}

/// Fuses with the default pediatric codes.
pub fn fuse_3lwt(wt: &BinaryMask, sub: &SubregionTriplet, mode: FusionMode) -> Result<LabelMap> {
    fuse_3lwt_with_schema(wt, sub, mode, &LabelSchema::pediatric())
}

/// Builds the final four-label map from a whole-tumor mask and ET/CC/ED masks.
pub fn fuse_3lwt_with_schema(
    wt: &BinaryMask,
    sub: &SubregionTriplet,
    mode: FusionMode,
    schema: &LabelSchema,
) -> Result<LabelMap> {
    if schema.kind() != SchemaKind::Pediatric {
        return Err(Error::WrongSchema {
            expected: SchemaKind::Pediatric.name().into(),
            found: schema.name().into(),
        });
    }
    check_geometry_match(wt.geometry(), sub.et.geometry(), DEFAULT_SPACING_TOL)?;
    let [et, net, cc, ed] =
        [Subregion::ET, Subregion::NET, Subregion::CC, Subregion::ED].map(|s| schema.code_of(s));

    let data = wt
        .bits()
        .iter()
        .zip(sub.et.bits())
        .zip(sub.cc.bits())
        .zip(sub.ed.bits())
        .map(|(((w, e), c), d)| {
            let subregion = if *e {
                et
            } else if *c {
                cc
            } else if *d {
                ed
            } else {
                0
            };
            match (subregion, *w, mode) {
                (0, true, _) => net,
                (0, false, _) => 0,
                (s, true, _) | (s, false, FusionMode::Union) => s,
                (_, false, FusionMode::Strict) => 0,
            }
        })
        .collect();
    let volume = Volume::new(wt.geometry().clone(), data)?;
    Ok(LabelMap::new_unchecked(volume, schema.clone()))
}

/// Splits a pediatric map into its whole-tumor mask and ET/CC/ED masks.
pub fn decompose(m: &LabelMap) -> Result<(BinaryMask, SubregionTriplet)> {
    if m.schema().kind() != SchemaKind::Pediatric {
        return Err(Error::WrongSchema {
            expected: SchemaKind::Pediatric.name().into(),
            found: m.schema().name().into(),
        });
    }
    let wt = m.derive_region(Region::WT)?;
    let triplet = SubregionTriplet {
        et: m.subregion_mask(Subregion::ET)?,
        cc: m.subregion_mask(Subregion::CC)?,
        ed: m.subregion_mask(Subregion::ED)?,
    };
    Ok((wt, triplet))
}
