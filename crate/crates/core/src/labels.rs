//! Label schemas and derived tumor regions.
//!
//! Three schemas are known: the pediatric four-label scheme (ET, NET, CC, ED),
//! the adult glioma scheme (ET, NCR, ED) and the three-class comparison scheme
//! (ET, NC, ED) used when comparing against models that merge NET and CC.
//! Integer codes default to the public challenge conventions and can be
//! overridden; code 0 is always background.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Volume};

/// A tumor subregion symbol as it appears in a label schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Subregion {
    ET,
    NET,
    CC,
    ED,
    NCR,
    NC,
}

impl Subregion {
    pub const fn name(self) -> &'static str {
        match self {
            Subregion::ET => "ET",
            Subregion::NET => "NET",
            Subregion::CC => "CC",
            Subregion::ED => "ED",
            Subregion::NCR => "NCR",
            Subregion::NC => "NC",
        }
    }
}

impl fmt::Display for Subregion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subregion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim().to_ascii_uppercase().as_str() {
            "ET" => Subregion::ET,
            "NET" => Subregion::NET,
            "CC" => Subregion::CC,
            "ED" => Subregion::ED,
            "NCR" => Subregion::NCR,
            "NC" => Subregion::NC,
            other => return Err(Error::InvalidSchema(format!("unknown subregion {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaKind {
    Pediatric,
    Adult,
    Comparison,
}

impl SchemaKind {
    pub const fn name(self) -> &'static str {
        match self {
            SchemaKind::Pediatric => "pediatric",
            SchemaKind::Adult => "adult",
            SchemaKind::Comparison => "comparison",
        }
    }

    /// The subregion symbols a schema of this kind must define, exactly.
    pub const fn symbols(self) -> &'static [Subregion] {
        use Subregion::*;
        match self {
            SchemaKind::Pediatric => &[ET, NET, CC, ED],
            SchemaKind::Adult => &[ET, NCR, ED],
            SchemaKind::Comparison => &[ET, NC, ED],
        }
    }

    /// Region rows reported for maps of this kind.
    pub const fn default_regions(self) -> &'static [Region] {
        use Region::*;
        match self {
            SchemaKind::Pediatric => &[WT, TC, ET, NET, CC, ED],
            SchemaKind::Adult | SchemaKind::Comparison => &[WT, TC, ET, NC, ED],
        }
    }
}

impl fmt::Display for SchemaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemaKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "pediatric" => Ok(SchemaKind::Pediatric),
            "adult" => Ok(SchemaKind::Adult),
            "comparison" => Ok(SchemaKind::Comparison),
            other => Err(Error::InvalidSchema(format!(
                "schema must be pediatric, adult or comparison, got {other:?}"
            ))),
        }
    }
}

/// Mapping from subregion symbols to integer label codes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    kind: SchemaKind,
    codes: BTreeMap<Subregion, u8>,
}

impl LabelSchema {
    /// Validates that `codes` defines exactly the kind's symbols with distinct nonzero codes.
    pub fn new(kind: SchemaKind, codes: BTreeMap<Subregion, u8>) -> Result<Self> {
        let expected = kind.symbols();
        if codes.len() != expected.len() || expected.iter().any(|s| !codes.contains_key(s)) {
            return Err(Error::InvalidSchema(format!(
                "{kind} schema must define exactly {expected:?}, got {:?}",
                codes.keys().collect::<Vec<_>>()
            )));
        }
        let mut seen = [false; 256];
        for (sym, code) in &codes {
            if *code == 0 {
                return Err(Error::InvalidSchema(format!(
                    "{sym} cannot use code 0, which is reserved for background"
                )));
            }
            if std::mem::replace(&mut seen[*code as usize], true) {
                return Err(Error::InvalidSchema(format!("code {code} is assigned twice")));
            }
        }
        Ok(LabelSchema { kind, codes })
    }

    fn from_pairs(kind: SchemaKind, pairs: &[(Subregion, u8)]) -> Self {
        LabelSchema::new(kind, pairs.iter().copied().collect()).expect("built-in schema is valid")
    }

    /// ET=1, NET=2, CC=3, ED=4.
    pub fn pediatric() -> Self {
        use Subregion::*;
        Self::from_pairs(SchemaKind::Pediatric, &[(ET, 1), (NET, 2), (CC, 3), (ED, 4)])
    }

    /// NCR=1, ED=2, ET=3.
    pub fn adult() -> Self {
        use Subregion::*;
        Self::from_pairs(SchemaKind::Adult, &[(NCR, 1), (ED, 2), (ET, 3)])
    }

    /// ET=1, NC=2, ED=3.
    pub fn comparison() -> Self {
        use Subregion::*;
        Self::from_pairs(SchemaKind::Comparison, &[(ET, 1), (NC, 2), (ED, 3)])
    }

    pub fn default_for(kind: SchemaKind) -> Self {
        match kind {
            SchemaKind::Pediatric => Self::pediatric(),
            SchemaKind::Adult => Self::adult(),
            SchemaKind::Comparison => Self::comparison(),
        }
    }

    pub fn kind(&self) -> SchemaKind {
        self.kind
    }

    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn codes(&self) -> &BTreeMap<Subregion, u8> {
        &self.codes
    }

    pub fn code(&self, s: Subregion) -> Option<u8> {
        self.codes.get(&s).copied()
    }

    /// Code of a symbol the schema is known to define.
    pub(crate) fn code_of(&self, s: Subregion) -> u8 {
        self.code(s)
            .unwrap_or_else(|| panic!("{} schema has no {s}", self.kind))
    }

    pub fn subregion_of(&self, code: u8) -> Option<Subregion> {
        self.codes.iter().find(|(_, c)| **c == code).map(|(s, _)| *s)
    }

    /// Per-code lookup: `table[code]` is the symbol carrying that code.
    pub fn lookup_table(&self) -> [Option<Subregion>; 256] {
        let mut t = [None; 256];
        for (s, c) in &self.codes {
            t[*c as usize] = Some(*s);
        }
        t
    }

    pub fn region_codes(&self, r: Region) -> Result<Vec<u8>> {
        let parts = r.constituents(self.kind).ok_or_else(|| Error::RegionUndefined {
            region: r.name().into(),
            schema: self.kind.name().into(),
        })?;
        Ok(parts.iter().map(|s| self.code_of(*s)).collect())
    }
}

/// A tumor region: a single subregion or a derived union of subregions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Region {
    WT,
    TC,
    NC,
    ET,
    NET,
    CC,
    ED,
    NCR,
}

impl Region {
    pub const ALL: [Region; 8] = [
        Region::WT,
        Region::TC,
        Region::NC,
        Region::ET,
        Region::NET,
        Region::CC,
        Region::ED,
        Region::NCR,
    ];

    pub const fn name(self) -> &'static str {
        match self {
            Region::WT => "WT",
            Region::TC => "TC",
            Region::NC => "NC",
            Region::ET => "ET",
            Region::NET => "NET",
            Region::CC => "CC",
            Region::ED => "ED",
            Region::NCR => "NCR",
        }
    }

    /// Subregion symbols making up this region under a schema kind, or `None`
    /// when the region is meaningless there (e.g. CC in the adult scheme).
    pub const fn constituents(self, kind: SchemaKind) -> Option<&'static [Subregion]> {
        use Subregion as S;
        match (kind, self) {
            (SchemaKind::Pediatric, Region::WT) => Some(&[S::ET, S::NET, S::CC, S::ED]),
            (SchemaKind::Pediatric, Region::TC) => Some(&[S::ET, S::NET, S::CC]),
            (SchemaKind::Pediatric, Region::NC) => Some(&[S::NET, S::CC]),
            (SchemaKind::Pediatric, Region::NET) => Some(&[S::NET]),
            (SchemaKind::Pediatric, Region::CC) => Some(&[S::CC]),

            (SchemaKind::Adult, Region::WT) => Some(&[S::ET, S::NCR, S::ED]),
            (SchemaKind::Adult, Region::TC) => Some(&[S::ET, S::NCR]),
            (SchemaKind::Adult, Region::NC | Region::NCR) => Some(&[S::NCR]),

            (SchemaKind::Comparison, Region::WT) => Some(&[S::ET, S::NC, S::ED]),
            (SchemaKind::Comparison, Region::TC) => Some(&[S::ET, S::NC]),
            (SchemaKind::Comparison, Region::NC) => Some(&[S::NC]),

            (_, Region::ET) => Some(&[S::ET]),
            (_, Region::ED) => Some(&[S::ED]),
            _ => None,
        }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Region {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let up = s.trim().to_ascii_uppercase();
        Region::ALL
            .into_iter()
            .find(|r| r.name() == up)
            .ok_or_else(|| Error::InvalidParams(format!("unknown region {s:?}")))
    }
}

/// A label volume whose voxels are background or codes of its schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    volume: Volume<u8>,
    schema: LabelSchema,
}

impl LabelMap {
    pub fn new(volume: Volume<u8>, schema: LabelSchema) -> Result<Self> {
        let table = schema.lookup_table();
        if let Some(bad) = volume
            .data()
            .iter()
            .find(|c| **c != 0 && table[**c as usize].is_none())
        {
            return Err(Error::UnknownCode(*bad));
        }
        Ok(LabelMap { volume, schema })
    }

    pub(crate) fn new_unchecked(volume: Volume<u8>, schema: LabelSchema) -> Self {
        LabelMap { volume, schema }
    }

    pub fn volume(&self) -> &Volume<u8> {
        &self.volume
    }

    pub fn into_volume(self) -> Volume<u8> {
        self.volume
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn geometry(&self) -> &crate::volume::Geometry {
        self.volume.geometry()
    }

    /// Voxel count per code, indexed by code.
    pub fn histogram(&self) -> [usize; 256] {
        let mut h = [0usize; 256];
        for c in self.volume.data() {
            h[*c as usize] += 1;
        }
        h
    }

    /// Voxel count of one subregion symbol (0 if the schema lacks it).
    pub fn count(&self, s: Subregion) -> usize {
        self.schema
            .code(s)
            .map_or(0, |c| self.histogram()[c as usize])
    }

    /// Mask of voxels whose code is in `codes` (code 0 selects background).
    pub fn extract_mask(&self, codes: &[u8]) -> Result<BinaryMask> {
        let table = self.schema.lookup_table();
        let mut select = [false; 256];
        for c in codes {
            if *c != 0 && table[*c as usize].is_none() {
                return Err(Error::UnknownCode(*c));
            }
            select[*c as usize] = true;
        }
        let bits = self
            .volume
            .data()
            .iter()
            .map(|c| select[*c as usize])
            .collect();
        BinaryMask::new(self.volume.geometry().clone(), bits)
    }

    pub fn derive_region(&self, r: Region) -> Result<BinaryMask> {
        self.extract_mask(&self.schema.region_codes(r)?)
    }

    /// Mask of a single subregion symbol.
    pub fn subregion_mask(&self, s: Subregion) -> Result<BinaryMask> {
        let code = self.schema.code(s).ok_or_else(|| Error::RegionUndefined {
            region: s.name().into(),
            schema: self.schema.name().into(),
        })?;
        self.extract_mask(&[code])
    }

    /// Merges NET and CC of a pediatric map into NC of the comparison scheme.
    pub fn remap_to_comparison(&self, target: &LabelSchema) -> Result<LabelMap> {
        if self.schema.kind != SchemaKind::Pediatric {
            return Err(Error::WrongSchema {
                expected: SchemaKind::Pediatric.name().into(),
                found: self.schema.name().into(),
            });
        }
        self.to_comparison(target)
    }

    /// Re-encodes a pediatric, adult or comparison map in the comparison
    /// scheme: NET and CC (pediatric) or NCR (adult) become NC.
    pub fn to_comparison(&self, target: &LabelSchema) -> Result<LabelMap> {
        if target.kind != SchemaKind::Comparison {
            return Err(Error::WrongSchema {
                expected: SchemaKind::Comparison.name().into(),
                found: target.name().into(),
            });
        }
        let mut recode = [0u8; 256];
        for (sym, code) in &self.schema.codes {
            let to = match sym {
                Subregion::NET | Subregion::CC | Subregion::NCR | Subregion::NC => Subregion::NC,
                other => *other,
            };
            recode[*code as usize] = target.code_of(to);
        }
        let volume = self.volume.map(|c| recode[*c as usize]);
        Ok(LabelMap::new_unchecked(volume, target.clone()))
    }
}
