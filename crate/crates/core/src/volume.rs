//! Dense 3D volumes with grid geometry.
//!
//! Every array in the crate uses the same layout: x varies fastest, then y,
//! then z, so the linear index of voxel `(x, y, z)` is `x + nx * (y + ny * z)`.
//! This is also the NIfTI payload order, so files are read and written without
//! any transposition.

use std::fmt;

use crate::error::{Error, Result};

/// Default tolerance (mm) used when comparing voxel spacings.
pub const DEFAULT_SPACING_TOL: f64 = 1e-4;

/// Voxel counts along x, y and z.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub const fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Dims { nx, ny, nz }
    }

    pub const fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub const fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub const fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.nx * (y + self.ny * z)
    }

    #[inline]
    pub const fn coords(&self, i: usize) -> [usize; 3] {
        let x = i % self.nx;
        let yz = i / self.nx;
        [x, yz % self.ny, yz / self.ny]
    }

    /// Linear index of a signed coordinate, or `None` when it lies outside the grid.
    #[inline]
    pub fn checked_index(&self, x: i64, y: i64, z: i64) -> Option<usize> {
        if x < 0 || y < 0 || z < 0 {
            return None;
        }
        let (x, y, z) = (x as usize, y as usize, z as usize);
        (x < self.nx && y < self.ny && z < self.nz).then(|| self.index(x, y, z))
    }

    pub const fn as_array(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }
}

impl From<[usize; 3]> for Dims {
    fn from(d: [usize; 3]) -> Self {
        Dims::new(d[0], d[1], d[2])
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Grid size, voxel spacing and voxel-to-world placement of a volume.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    dims: Dims,
    spacing: [f64; 3],
    affine: [[f64; 4]; 4],
    orientation: String,
}

impl Geometry {
    /// Builds a geometry, checking that dims and spacing are positive and the
    /// affine is invertible. The orientation code is derived from the affine.
    pub fn new(dims: Dims, spacing: [f64; 3], affine: [[f64; 4]; 4]) -> Result<Self> {
        if dims.nx == 0 || dims.ny == 0 || dims.nz == 0 {
            return Err(Error::InvalidGeometry(format!("dims {dims} must all be >= 1")));
        }
        if spacing.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidGeometry(format!(
                "spacing {spacing:?} must be finite and > 0"
            )));
        }
        let det = det3(&affine);
        if affine.iter().flatten().any(|v| !v.is_finite()) || det == 0.0 {
            return Err(Error::InvalidGeometry(
                "affine rotation/scale block is singular".into(),
            ));
        }
        let orientation = orientation_code(&affine);
        Ok(Geometry {
            dims,
            spacing,
            affine,
            orientation,
        })
    }

    /// Axis-aligned geometry whose affine is `diag(spacing)`.
    pub fn with_spacing(dims: Dims, spacing: [f64; 3]) -> Result<Self> {
        let mut affine = [[0.0; 4]; 4];
        for (i, s) in spacing.iter().enumerate() {
            affine[i][i] = *s;
        }
        affine[3][3] = 1.0;
        Geometry::new(dims, spacing, affine)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn affine(&self) -> &[[f64; 4]; 4] {
        &self.affine
    }

    /// Three-letter anatomical code, one letter per voxel axis naming the
    /// direction that axis points to (`RAS` for an identity affine).
    pub fn orientation(&self) -> &str {
        &self.orientation
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    /// Same grid and orientation with every spacing and affine column scaled by `k`.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        let mut affine = self.affine;
        for row in affine.iter_mut().take(3) {
            for v in row.iter_mut().take(3) {
                *v *= k;
            }
        }
        Geometry::new(self.dims, self.spacing.map(|s| s * k), affine)
    }
}

// Geometry::new rejects non-finite values, so equality is reflexive.
impl Eq for Geometry {}

impl fmt::Display for Geometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [sx, sy, sz] = self.spacing;
        write!(
            f,
            "[dims {} spacing ({sx}, {sy}, {sz}) {}]",
            self.dims, self.orientation
        )
    }
}

fn det3(a: &[[f64; 4]; 4]) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
        - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

fn orientation_code(a: &[[f64; 4]; 4]) -> String {
    const POS: [char; 3] = ['R', 'A', 'S'];
    const NEG: [char; 3] = ['L', 'P', 'I'];
    (0..3)
        .map(|col| {
            let row = (0..3)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap_or(col);
            if a[row][col] >= 0.0 {
                POS[row]
            } else {
                NEG[row]
            }
        })
        .collect()
}

/// Succeeds iff dims are identical and spacings agree within `spacing_tol` mm.
pub fn check_geometry_match(a: &Geometry, b: &Geometry, spacing_tol: f64) -> Result<()> {
    let spacing_ok = a
        .spacing
        .iter()
        .zip(&b.spacing)
        .all(|(x, y)| (x - y).abs() <= spacing_tol);
    if a.dims == b.dims && spacing_ok {
        Ok(())
    } else {
        Err(Error::geometry_mismatch(a, b))
    }
}

/// Element types a volume file may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementKind {
    U8,
    I16,
    F32,
}

impl ElementKind {
    pub const fn byte_size(self) -> usize {
        match self {
            ElementKind::U8 => 1,
            ElementKind::I16 => 2,
            ElementKind::F32 => 4,
        }
    }
}

/// A dense scalar grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Volume<T> {
    geometry: Geometry,
    data: Vec<T>,
}

impl<T> Volume<T> {
    pub fn new(geometry: Geometry, data: Vec<T>) -> Result<Self> {
        if data.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: data.len(),
            });
        }
        Ok(Volume { geometry, data })
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let d = geometry.dims();
        let mut data = Vec::with_capacity(d.len());
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 0..d.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume { geometry, data }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> Dims {
        self.geometry.dims()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.dims().index(x, y, z)]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Volume<U> {
        Volume {
            geometry: self.geometry.clone(),
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn with_geometry(self, geometry: Geometry) -> Result<Self> {
        Volume::new(geometry, self.data)
    }
}

/// A volume read from (or destined for) a file, tagged with its element type.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyVolume {
    U8(Volume<u8>),
    I16(Volume<i16>),
    F32(Volume<f32>),
}

impl AnyVolume {
    pub fn geometry(&self) -> &Geometry {
        match self {
            AnyVolume::U8(v) => v.geometry(),
            AnyVolume::I16(v) => v.geometry(),
            AnyVolume::F32(v) => v.geometry(),
        }
    }

    pub fn kind(&self) -> ElementKind {
        match self {
            AnyVolume::U8(_) => ElementKind::U8,
            AnyVolume::I16(_) => ElementKind::I16,
            AnyVolume::F32(_) => ElementKind::F32,
        }
    }

    /// Converts an integer-valued volume into unsigned 8-bit labels.
    ///
    /// Label files are sometimes stored as int16 or float32; any value that is
    /// not an integer in `0..=255` is rejected.
    pub fn into_labels(self) -> Result<Volume<u8>> {
        fn bad(v: impl fmt::Display) -> Error {
            Error::UnsupportedFormat(format!("voxel value {v} is not a label code in 0..=255"))
        }
        match self {
            AnyVolume::U8(v) => Ok(v),
            AnyVolume::I16(v) => {
                let g = v.geometry.clone();
                let data = v
                    .data
                    .into_iter()
                    .map(|x| u8::try_from(x).map_err(|_| bad(x)))
                    .collect::<Result<Vec<_>>>()?;
                Volume::new(g, data)
            }
            AnyVolume::F32(v) => {
                let g = v.geometry.clone();
                let data = v
                    .data
                    .into_iter()
                    .map(|x| {
                        if x.fract() == 0.0 && (0.0..=255.0).contains(&x) {
                            Ok(x as u8)
                        } else {
                            Err(bad(x))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                Volume::new(g, data)
            }
        }
    }
}

impl From<Volume<u8>> for AnyVolume {
    fn from(v: Volume<u8>) -> Self {
        AnyVolume::U8(v)
    }
}

impl From<Volume<i16>> for AnyVolume {
    fn from(v: Volume<i16>) -> Self {
        AnyVolume::I16(v)
    }
}

impl From<Volume<f32>> for AnyVolume {
    fn from(v: Volume<f32>) -> Self {
        AnyVolume::F32(v)
    }
}

/// A {0,1} volume: the operand of all set algebra and metrics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    geometry: Geometry,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(geometry: Geometry, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != geometry.len() {
            return Err(Error::DimensionMismatch {
                expected: geometry.len(),
                actual: bits.len(),
            });
        }
        Ok(BinaryMask { geometry, bits })
    }

    pub fn empty(geometry: Geometry) -> Self {
        let n = geometry.len();
        BinaryMask {
            geometry,
            bits: vec![false; n],
        }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let v = Volume::from_fn(geometry, &mut f);
        BinaryMask {
            geometry: v.geometry,
            bits: v.data,
        }
    }

    /// Interprets every nonzero voxel as foreground.
    pub fn from_volume<T: Copy + Default + PartialEq>(v: &Volume<T>) -> Self {
        let zero = T::default();
        BinaryMask {
            geometry: v.geometry.clone(),
            bits: v.data.iter().map(|x| *x != zero).collect(),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> Dims {
        self.geometry.dims()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<bool> {
        self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.dims().index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.dims().index(x, y, z);
        self.bits[i] = value;
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn with_geometry(self, geometry: Geometry) -> Result<Self> {
        BinaryMask::new(geometry, self.bits)
    }

    /// Voxelwise combination of two masks on the same grid.
    pub fn zip_with(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<Self> {
        check_geometry_match(&self.geometry, &other.geometry, DEFAULT_SPACING_TOL)?;
        Ok(BinaryMask {
            geometry: self.geometry.clone(),
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| f(*a, *b))
                .collect(),
        })
    }

    pub fn union(&self, other: &BinaryMask) -> Result<Self> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<Self> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &BinaryMask) -> Result<Self> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.len() == other.bits.len()
            && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    pub fn to_volume(&self) -> Volume<u8> {
        Volume {
            geometry: self.geometry.clone(),
            data: self.bits.iter().map(|b| u8::from(*b)).collect(),
        }
    }
}

/// Inclusive axis-aligned box of voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    pub fn of_point(p: [usize; 3]) -> Self {
        BoundingBox { min: p, max: p }
    }

    pub fn include(&mut self, p: [usize; 3]) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn merge(&self, other: &BoundingBox) -> BoundingBox {
        let mut b = *self;
        b.include(other.min);
        b.include(other.max);
        b
    }

    /// Grows the box by `r` voxels on every side, clamped to the grid.
    pub fn expand(&self, r: usize, dims: Dims) -> BoundingBox {
        let d = dims.as_array();
        BoundingBox {
            min: self.min.map(|v| v.saturating_sub(r)),
            max: [0, 1, 2].map(|a| (self.max[a] + r).min(d[a] - 1)),
        }
    }

    pub fn dims(&self) -> Dims {
        Dims::new(
            self.max[0] - self.min[0] + 1,
            self.max[1] - self.min[1] + 1,
            self.max[2] - self.min[2] + 1,
        )
    }

    /// Bounding box of the foreground, or `None` for an empty set.
    pub fn of_bits(bits: &[bool], dims: Dims) -> Option<BoundingBox> {
        let mut bb: Option<BoundingBox> = None;
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            let p = dims.coords(i);
            match bb.as_mut() {
                Some(b) => b.include(p),
                None => bb = Some(BoundingBox::of_point(p)),
            }
        }
        bb
    }

    /// Maps a local (box) linear index to the full-grid linear index.
    #[inline]
    pub fn to_global(&self, local: usize, full: Dims) -> usize {
        let [x, y, z] = self.dims().coords(local);
        full.index(x + self.min[0], y + self.min[1], z + self.min[2])
    }

    /// Copies the box region of a full-grid array.
    pub fn crop<T: Copy>(&self, data: &[T], full: Dims) -> Vec<T> {
        let bd = self.dims();
        let mut out = Vec::with_capacity(bd.len());
        for z in self.min[2]..=self.max[2] {
            for y in self.min[1]..=self.max[1] {
                let start = full.index(self.min[0], y, z);
                out.extend_from_slice(&data[start..start + bd.nx]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_coords_bijection_on_small_grid() {
        let d = Dims::new(5, 7, 3);
        let mut seen = vec![false; d.len()];
        for z in 0..3 {
            for y in 0..7 {
                for x in 0..5 {
                    let i = d.index(x, y, z);
                    assert_eq!(d.coords(i), [x, y, z]);
                    assert!(!seen[i]);
                    seen[i] = true;
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
        for i in 0..d.len() {
            let [x, y, z] = d.coords(i);
            assert_eq!(d.index(x, y, z), i);
        }
    }

    #[test]
    fn x_varies_fastest() {
        let d = Dims::new(2, 2, 2);
        assert_eq!(d.index(1, 0, 0), 1);
        assert_eq!(d.index(0, 1, 0), 2);
        assert_eq!(d.index(0, 0, 1), 4);
    }

    #[test]
    fn geometry_rejects_bad_values() {
        assert!(Geometry::with_spacing(Dims::new(0, 1, 1), [1.0; 3]).is_err());
        assert!(Geometry::with_spacing(Dims::new(1, 1, 1), [1.0, 0.0, 1.0]).is_err());
        let mut a = [[0.0; 4]; 4];
        a[0][0] = 1.0;
        a[1][1] = 1.0;
        assert!(Geometry::new(Dims::new(2, 2, 2), [1.0; 3], a).is_err());
    }

    #[test]
    fn orientation_from_affine() {
        let g = Geometry::with_spacing(Dims::new(2, 2, 2), [1.0; 3]).unwrap();
        assert_eq!(g.orientation(), "RAS");
        let mut a = *g.affine();
        a[0][0] = -1.0;
        a[1][1] = -1.0;
        let g = Geometry::new(Dims::new(2, 2, 2), [1.0; 3], a).unwrap();
        assert_eq!(g.orientation(), "LPS");
    }

    #[test]
    fn geometry_match_rules() {
        let g = |d: [usize; 3], s: [f64; 3]| Geometry::with_spacing(d.into(), s).unwrap();
        let a = g([240, 240, 155], [1.0; 3]);
        check_geometry_match(&a, &a, DEFAULT_SPACING_TOL).unwrap();

        let b = g([240, 240, 154], [1.0; 3]);
        let err = check_geometry_match(&a, &b, DEFAULT_SPACING_TOL).unwrap_err();
        assert_eq!(err.kind(), "geometry-mismatch");

        let c = g([4, 4, 4], [1.0, 1.0, 1.0]);
        let d = g([4, 4, 4], [1.0, 1.0, 1.0005]);
        check_geometry_match(&c, &d, 1e-3).unwrap();
        assert!(check_geometry_match(&c, &d, DEFAULT_SPACING_TOL).is_err());
    }

    #[test]
    fn volume_length_invariant() {
        let g = Geometry::with_spacing(Dims::new(2, 2, 2), [1.0; 3]).unwrap();
        assert!(Volume::new(g.clone(), vec![0u8; 7]).is_err());
        assert!(Volume::new(g, vec![0u8; 8]).is_ok());
    }

    #[test]
    fn bounding_box_crop_and_global() {
        let d = Dims::new(6, 5, 4);
        let data: Vec<usize> = (0..d.len()).collect();
        let bb = BoundingBox {
            min: [1, 2, 1],
            max: [3, 4, 2],
        };
        let crop = bb.crop(&data, d);
        assert_eq!(crop.len(), bb.dims().len());
        for (local, v) in crop.iter().enumerate() {
            assert_eq!(bb.to_global(local, d), *v);
        }
        let e = bb.expand(2, d);
        assert_eq!(e.min, [0, 0, 0]);
        assert_eq!(e.max, [5, 4, 3]);
    }

    #[test]
    fn label_conversion_rejects_non_codes() {
        let g = Geometry::with_spacing(Dims::new(2, 1, 1), [1.0; 3]).unwrap();
        let ok = AnyVolume::I16(Volume::new(g.clone(), vec![0, 4]).unwrap());
        assert_eq!(ok.into_labels().unwrap().data(), &[0, 4]);
        let bad = AnyVolume::F32(Volume::new(g, vec![0.0, 1.5]).unwrap());
        assert!(bad.into_labels().is_err());
    }
}
