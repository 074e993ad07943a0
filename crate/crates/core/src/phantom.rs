//! Seeded synthetic tumor phantoms and controlled degradations.
//!
//! A lesion is a stack of nested ellipsoids sharing a center. The outermost
//! ellipsoid is the lesion's whole tumor; every shell is assigned one of the
//! pediatric subregions and a voxel takes the label of the innermost shell
//! containing its center. A voxel belongs to an ellipsoid iff its center
//! satisfies `Σ ((p - c) / a)² ≤ 1`.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`, so a seed names the same phantom on every platform.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::labels::{LabelMap, LabelSchema, Region, SchemaKind, Subregion};
use crate::metrics::{MetricParams, HD_PERCENTILE, PercentileMethod};
use crate::morphology::{dilate, erode};
use crate::volume::{check_geometry_match, BinaryMask, Dims, Geometry, Volume, DEFAULT_SPACING_TOL};

/// Free margin (voxels, Chebyshev) kept between randomly placed lesions and
/// around speckle blobs. It exceeds the default matching-zone radius, so
/// separate structures never fall into each other's zones.
pub const CLEARANCE: usize = 4;

const MAX_PLACEMENT_TRIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Shell {
    pub subregion: Subregion,
    /// Semi-axis scale relative to the lesion's outer ellipsoid, in (0, 1].
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesionSpec {
    /// Center in voxel coordinates.
    pub center: [f64; 3],
    /// Outer semi-axes in voxels.
    pub semi_axes: [f64; 3],
    /// Shells from outermost (scale 1) to innermost, strictly shrinking.
    pub shells: Vec<Shell>,
}

impl LesionSpec {
    fn validate(&self, dims: Dims) -> Result<()> {
        let d = dims.as_array();
        for a in 0..3 {
            let (c, r) = (self.center[a], self.semi_axes[a]);
            if !(r.is_finite() && r > 0.0 && c.is_finite()) {
                return Err(Error::SpecOutOfBounds(format!(
                    "lesion center {:?} / semi-axes {:?} must be finite with positive axes",
                    self.center, self.semi_axes
                )));
            }
            if c - r < 0.0 || c + r > (d[a] - 1) as f64 {
                return Err(Error::SpecOutOfBounds(format!(
                    "lesion at {:?} with semi-axes {:?} leaves the {dims} grid",
                    self.center, self.semi_axes
                )));
            }
        }
        let Some(first) = self.shells.first() else {
            return Err(Error::SpecOutOfBounds("a lesion needs at least one shell".into()));
        };
        if first.scale != 1.0 {
            return Err(Error::SpecOutOfBounds("the outermost shell must have scale 1".into()));
        }
        for pair in self.shells.windows(2) {
            if !(pair[1].scale < pair[0].scale && pair[1].scale > 0.0) {
                return Err(Error::SpecOutOfBounds(
                    "shell scales must strictly decrease and stay positive".into(),
                ));
            }
        }
        if let Some(bad) = self
            .shells
            .iter()
            .find(|s| !SchemaKind::Pediatric.symbols().contains(&s.subregion))
        {
            return Err(Error::SpecOutOfBounds(format!(
                "{} is not a pediatric subregion",
                bad.subregion
            )));
        }
        Ok(())
    }

    /// Inclusive voxel bounds of the outer ellipsoid.
    fn voxel_bounds(&self) -> ([usize; 3], [usize; 3]) {
        let lo = [0, 1, 2].map(|a| (self.center[a] - self.semi_axes[a]).ceil().max(0.0) as usize);
        let hi = [0, 1, 2].map(|a| (self.center[a] + self.semi_axes[a]).floor() as usize);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub spacing: [f64; 3],
    pub n_lesions: usize,
    /// Explicit layouts. When empty, `n_lesions` layouts are drawn from `seed`.
    pub lesions: Vec<LesionSpec>,
    pub seed: u64,
}

impl PhantomSpec {
    /// A spec whose lesions are all drawn from the seed.
    pub fn random(dims: Dims, spacing: [f64; 3], n_lesions: usize, seed: u64) -> Self {
        PhantomSpec {
            dims,
            spacing,
            n_lesions,
            lesions: Vec::new(),
            seed,
        }
    }

    /// Explicit layouts, or seeded random ones.
    pub fn resolve_lesions(&self) -> Result<Vec<LesionSpec>> {
        if !self.lesions.is_empty() {
            if self.lesions.len() != self.n_lesions {
                return Err(Error::SpecOutOfBounds(format!(
                    "n_lesions is {} but {} lesion layouts are given",
                    self.n_lesions,
                    self.lesions.len()
                )));
            }
            return Ok(self.lesions.clone());
        }
        random_lesions(self.dims, self.n_lesions, self.seed)
    }
}

/// Draws non-overlapping four-shell lesions.
fn random_lesions(dims: Dims, n: usize, seed: u64) -> Result<Vec<LesionSpec>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dims.as_array();
    let min_dim = *d.iter().min().unwrap();
    if n > 0 && min_dim < 7 {
        return Err(Error::SpecOutOfBounds(format!(
            "grid {dims} is too small for random lesions"
        )));
    }
    let max_axis = ((min_dim - 1) as f64 / 2.0).min((min_dim as f64 / 5.0).max(3.0));
    let mut placed: Vec<([usize; 3], [usize; 3])> = Vec::new();
    let mut out = Vec::with_capacity(n);

    for _ in 0..n {
        let mut inner = [Subregion::NET, Subregion::ET, Subregion::CC];
        inner.shuffle(&mut rng);
        let scales = [
            1.0,
            rng.gen_range(0.65..0.8),
            rng.gen_range(0.4..0.55),
            rng.gen_range(0.15..0.3),
        ];
        let subregions = [Subregion::ED, inner[0], inner[1], inner[2]];
        let shells = subregions
            .iter()
            .zip(scales)
            .map(|(s, scale)| Shell {
                subregion: *s,
                scale,
            })
            .collect::<Vec<_>>();

        let mut done = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let semi_axes = [0; 3].map(|_| rng.gen_range(3.0..=max_axis.max(3.0)));
            let center = [0, 1, 2].map(|a| {
                let lo = semi_axes[a];
                let hi = (d[a] - 1) as f64 - semi_axes[a];
                if hi > lo {
                    rng.gen_range(lo..hi)
                } else {
                    lo
                }
            });
            let lesion = LesionSpec {
                center,
                semi_axes,
                shells: shells.clone(),
            };
            if lesion.validate(dims).is_err() {
                continue;
            }
            let (lo, hi) = lesion.voxel_bounds();
            let gap = CLEARANCE + 1;
            let clear = placed.iter().all(|(plo, phi)| {
                (0..3).any(|a| hi[a] + gap <= plo[a] || phi[a] + gap <= lo[a])
            });
            if clear {
                placed.push((lo, hi));
                out.push(lesion);
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::SpecOutOfBounds(format!(
                "could not place {n} separate lesions in a {dims} grid"
            )));
        }
    }
    Ok(out)
}

/// Renders a phantom into a pediatric label map with default codes.
pub fn generate_phantom(spec: &PhantomSpec) -> Result<LabelMap> {
    generate_phantom_with_schema(spec, &LabelSchema::pediatric())
}

pub fn generate_phantom_with_schema(spec: &PhantomSpec, schema: &LabelSchema) -> Result<LabelMap> {
    if schema.kind() != SchemaKind::Pediatric {
        return Err(Error::WrongSchema {
            expected: SchemaKind::Pediatric.name().into(),
            found: schema.name().into(),
        });
    }
    let geometry = Geometry::with_spacing(spec.dims, spec.spacing)
        .map_err(|e| Error::SpecOutOfBounds(e.to_string()))?;
    let lesions = spec.resolve_lesions()?;
    for l in &lesions {
        l.validate(spec.dims)?;
    }
    let dims = spec.dims;
    let mut data = vec![0u8; dims.len()];
    for l in &lesions {
        let codes: Vec<u8> = l.shells.iter().map(|s| schema.code_of(s.subregion)).collect();
        let (lo, hi) = l.voxel_bounds();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let r2: f64 = [x, y, z]
                        .iter()
                        .enumerate()
                        .map(|(a, p)| {
                            let t = (*p as f64 - l.center[a]) / l.semi_axes[a];
                            t * t
                        })
                        .sum();
                    if let Some(k) = l.shells.iter().rposition(|s| r2 <= s.scale * s.scale) {
                        data[dims.index(x, y, z)] = codes[k];
                    }
                }
            }
        }
    }
    Ok(LabelMap::new_unchecked(Volume::new(geometry, data)?, schema.clone()))
}

/// A perturbation applied to a label map to imitate a prediction error.
#[derive(Debug, Clone, PartialEq)]
pub enum DegradationOp {
    /// Cubic erosion of the region; removed voxels become background.
    Erode { region: Region, radius: usize },
    /// Cubic dilation of the region; added voxels take the region's fill
    /// label and override whatever they cover.
    Dilate { region: Region, radius: usize },
    /// Moves the region's voxels (keeping their labels) by a voxel offset.
    /// Vacated voxels become background and voxels leaving the grid are lost.
    Shift { region: Region, offset: [i64; 3] },
    /// Sets the region to background.
    DropLabel { region: Region },
    /// Adds `n_blobs` balls of the region's fill label in free space, each at
    /// least [`CLEARANCE`] voxels away from any labeled voxel.
    SpeckleFp {
        region: Region,
        n_blobs: usize,
        blob_radius: usize,
        seed: u64,
    },
}

/// Label used when a region grows: the region itself for single labels, the
/// outermost constituent for composites (ED for WT, NET for TC and NC).
pub fn fill_subregion(region: Region) -> Result<Subregion> {
    Ok(match region {
        Region::WT | Region::ED => Subregion::ED,
        Region::TC | Region::NC | Region::NET => Subregion::NET,
        Region::ET => Subregion::ET,
        Region::CC => Subregion::CC,
        Region::NCR => {
            return Err(Error::InvalidOp("NCR is not a pediatric region".into()));
        }
    })
}

fn check_radius(radius: usize) -> Result<()> {
    if radius == 0 {
        Err(Error::InvalidOp("radius must be >= 1".into()))
    } else {
        Ok(())
    }
}

/// Applies degradations in order to a pediatric map.
pub fn degrade(m: &LabelMap, ops: &[DegradationOp]) -> Result<LabelMap> {
    if m.schema().kind() != SchemaKind::Pediatric {
        return Err(Error::WrongSchema {
            expected: SchemaKind::Pediatric.name().into(),
            found: m.schema().name().into(),
        });
    }
    let mut cur = m.clone();
    for op in ops {
        cur = apply(&cur, op)?;
    }
    Ok(cur)
}

fn region_mask(m: &LabelMap, region: Region) -> Result<BinaryMask> {
    m.derive_region(region)
        .map_err(|e| Error::InvalidOp(e.to_string()))
}

fn apply(m: &LabelMap, op: &DegradationOp) -> Result<LabelMap> {
    let schema = m.schema();
    let dims = m.volume().dims();
    let mut data = m.volume().data().to_vec();
    match op {
        DegradationOp::Erode { region, radius } => {
            check_radius(*radius)?;
            let mask = region_mask(m, *region)?;
            let kept = erode(&mask, *radius);
            for ((v, inside), keep) in data.iter_mut().zip(mask.bits()).zip(kept.bits()) {
                if *inside && !*keep {
                    *v = 0;
                }
            }
        }
        DegradationOp::Dilate { region, radius } => {
            check_radius(*radius)?;
            let mask = region_mask(m, *region)?;
            let code = schema.code_of(fill_subregion(*region)?);
            let grown = dilate(&mask, *radius);
            for ((v, inside), now) in data.iter_mut().zip(mask.bits()).zip(grown.bits()) {
                if *now && !*inside {
                    *v = code;
                }
            }
        }
        DegradationOp::Shift { region, offset } => {
            let d = dims.as_array();
            if (0..3).any(|a| offset[a].unsigned_abs() as usize >= d[a]) {
                return Err(Error::InvalidOp(format!(
                    "shift {offset:?} moves everything out of the {dims} grid"
                )));
            }
            let mask = region_mask(m, *region)?;
            let src = m.volume().data();
            for (v, inside) in data.iter_mut().zip(mask.bits()) {
                if *inside {
                    *v = 0;
                }
            }
            for (i, inside) in mask.bits().iter().enumerate() {
                if !*inside {
                    continue;
                }
                let [x, y, z] = dims.coords(i);
                if let Some(j) = dims.checked_index(
                    x as i64 + offset[0],
                    y as i64 + offset[1],
                    z as i64 + offset[2],
                ) {
                    data[j] = src[i];
                }
            }
        }
        DegradationOp::DropLabel { region } => {
            let mask = region_mask(m, *region)?;
            for (v, inside) in data.iter_mut().zip(mask.bits()) {
                if *inside {
                    *v = 0;
                }
            }
        }
        DegradationOp::SpeckleFp {
            region,
            n_blobs,
            blob_radius,
            seed,
        } => {
            check_radius(*blob_radius)?;
            let code = schema.code_of(fill_subregion(*region)?);
            speckle(&mut data, dims, code, *n_blobs, *blob_radius, *seed)?;
        }
    }
    let volume = Volume::new(m.geometry().clone(), data)?;
    Ok(LabelMap::new_unchecked(volume, schema.clone()))
}

fn speckle(data: &mut [u8], dims: Dims, code: u8, n: usize, r: usize, seed: u64) -> Result<()> {
    let d = dims.as_array();
    if (0..3).any(|a| d[a] < 2 * r + 1) {
        return Err(Error::InvalidOp(format!(
            "blob radius {r} does not fit the {dims} grid"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reach = (r + CLEARANCE) as i64;
    let r2 = (r * r) as i64;
    for _ in 0..n {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_TRIES {
            let c = [0, 1, 2].map(|a| rng.gen_range(r..d[a] - r) as i64);
            let free = (-reach..=reach).all(|dz| {
                (-reach..=reach).all(|dy| {
                    (-reach..=reach).all(|dx| {
                        dims.checked_index(c[0] + dx, c[1] + dy, c[2] + dz)
                            .is_none_or(|j| data[j] == 0)
                    })
                })
            });
            if !free {
                continue;
            }
            let r = r as i64;
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx * dx + dy * dy + dz * dz <= r2 {
                            let j = dims
                                .checked_index(c[0] + dx, c[1] + dy, c[2] + dz)
                                .expect("blob lies in the grid");
                            data[j] = code;
                        }
                    }
                }
            }
            placed = true;
            break;
        }
        if !placed {
            return Err(Error::InvalidOp(format!(
                "no free space left for a radius-{r} blob"
            )));
        }
    }
    Ok(())
}

/// HD95 by exhaustive pairwise distances between boundary voxels.
///
/// Shares its definition with [`crate::metrics::hd95`] (face-neighbor
/// boundary, the same percentile rules, the same empty-mask conventions) but
/// none of its code. Cost is quadratic in the boundary sizes.
pub fn brute_force_hd95(a: &BinaryMask, b: &BinaryMask, spacing: [f64; 3], p: &MetricParams) -> Result<f64> {
    check_geometry_match(a.geometry(), b.geometry(), DEFAULT_SPACING_TOL)?;
    let pa = surface_points(a);
    let pb = surface_points(b);
    Ok(match (pa.is_empty(), pb.is_empty()) {
        (true, true) => p.empty_pair_hd95,
        (true, false) | (false, true) => p.hd95_penalty,
        (false, false) => {
            let q_ab = directed_percentile(&pa, &pb, spacing, p.percentile_method);
            let q_ba = directed_percentile(&pb, &pa, spacing, p.percentile_method);
            q_ab.max(q_ba)
        }
    })
}

fn surface_points(m: &BinaryMask) -> Vec<[i64; 3]> {
    let dims = m.dims();
    let inside = |x: i64, y: i64, z: i64| dims.checked_index(x, y, z).is_some_and(|i| m.bits()[i]);
    let mut pts = Vec::new();
    for z in 0..dims.nz as i64 {
        for y in 0..dims.ny as i64 {
            for x in 0..dims.nx as i64 {
                if !inside(x, y, z) {
                    continue;
                }
                let exposed = [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
                    .iter()
                    .any(|(dx, dy, dz)| !inside(x + dx, y + dy, z + dz));
                if exposed {
                    pts.push([x, y, z]);
                }
            }
        }
    }
    pts
}

fn directed_percentile(from: &[[i64; 3]], to: &[[i64; 3]], s: [f64; 3], method: PercentileMethod) -> f64 {
    let mut d: Vec<f64> = from
        .iter()
        .map(|p| {
            to.iter()
                .map(|q| {
                    let dx = (p[0] - q[0]) as f64 * s[0];
                    let dy = (p[1] - q[1]) as f64 * s[1];
                    let dz = (p[2] - q[2]) as f64 * s[2];
                    (dx * dx + dy * dy + dz * dz).sqrt()
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    d.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let n = d.len();
    match method {
        PercentileMethod::LinearInterp => {
            let h = (n - 1) as f64 * (HD_PERCENTILE / 100.0);
            let below = h.floor();
            let i = below as usize;
            if i + 1 >= n {
                d[n - 1]
            } else {
                d[i] * (1.0 - (h - below)) + d[i + 1] * (h - below)
            }
        }
        PercentileMethod::NearestRank => {
            let mut rank = 1;
            while (rank as f64) < HD_PERCENTILE / 100.0 * n as f64 {
                rank += 1;
            }
            d[rank.min(n) - 1]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::dice;

    fn single_lesion(dims: Dims, center: [f64; 3], axes: [f64; 3], shells: &[(Subregion, f64)]) -> PhantomSpec {
        PhantomSpec {
            dims,
            spacing: [1.0; 3],
            n_lesions: 1,
            lesions: vec![LesionSpec {
                center,
                semi_axes: axes,
                shells: shells
                    .iter()
                    .map(|(s, scale)| Shell {
                        subregion: *s,
                        scale: *scale,
                    })
                    .collect(),
            }],
            seed: 0,
        }
    }

    #[test]
    fn no_lesions_is_background() {
        let m = generate_phantom(&PhantomSpec::random(Dims::new(8, 8, 8), [1.0; 3], 0, 3)).unwrap();
        assert!(m.volume().data().iter().all(|c| *c == 0));
    }

    #[test]
    fn single_net_shell() {
        let spec = single_lesion(Dims::new(16, 16, 16), [8.0; 3], [4.0, 5.0, 3.0], &[(Subregion::NET, 1.0)]);
        let m = generate_phantom(&spec).unwrap();
        assert_eq!(m.derive_region(Region::WT).unwrap(), m.subregion_mask(Subregion::NET).unwrap());
        assert!(m.count(Subregion::NET) > 0);
    }

    #[test]
    fn sphere_voxel_count_matches_center_rule() {
        // integer-centred sphere of radius 2: lattice points with x²+y²+z² <= 4
        let spec = single_lesion(Dims::new(9, 9, 9), [4.0; 3], [2.0; 3], &[(Subregion::ED, 1.0)]);
        let m = generate_phantom(&spec).unwrap();
        let mut expected = 0;
        for x in -2i32..=2 {
            for y in -2i32..=2 {
                for z in -2i32..=2 {
                    if x * x + y * y + z * z <= 4 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(expected, 33);
        assert_eq!(m.count(Subregion::ED), expected);
    }

    #[test]
    fn seeded_generation_is_deterministic() {
        let spec = PhantomSpec::random(Dims::new(40, 40, 30), [1.0; 3], 3, 42);
        let a = generate_phantom(&spec).unwrap();
        let b = generate_phantom(&spec).unwrap();
        assert_eq!(a, b);
        let other = generate_phantom(&PhantomSpec::random(Dims::new(40, 40, 30), [1.0; 3], 3, 43)).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn out_of_grid_lesion_is_rejected() {
        let spec = single_lesion(Dims::new(10, 10, 10), [2.0, 5.0, 5.0], [3.0; 3], &[(Subregion::ED, 1.0)]);
        assert_eq!(generate_phantom(&spec).unwrap_err().kind(), "spec-out-of-bounds");
        let spec = single_lesion(
            Dims::new(10, 10, 10),
            [5.0; 3],
            [3.0; 3],
            &[(Subregion::ED, 1.0), (Subregion::ET, 1.0)],
        );
        assert!(generate_phantom(&spec).is_err());
    }

    #[test]
    fn degrade_basics() {
        let spec = PhantomSpec::random(Dims::new(40, 40, 30), [1.0; 3], 2, 7);
        let m = generate_phantom(&spec).unwrap();
        assert_eq!(degrade(&m, &[]).unwrap(), m);

        let dropped = degrade(&m, &[DegradationOp::DropLabel { region: Region::ED }]).unwrap();
        assert_eq!(dropped.count(Subregion::ED), 0);
        for s in [Subregion::ET, Subregion::NET, Subregion::CC] {
            assert_eq!(dropped.subregion_mask(s).unwrap(), m.subregion_mask(s).unwrap());
        }

        let err = degrade(&m, &[DegradationOp::Erode { region: Region::ET, radius: 0 }]).unwrap_err();
        assert_eq!(err.kind(), "invalid-op-parameters");
        let err = degrade(&m, &[DegradationOp::DropLabel { region: Region::NCR }]).unwrap_err();
        assert_eq!(err.kind(), "invalid-op-parameters");
    }

    #[test]
    fn erosion_lowers_dice_monotonically() {
        let spec = single_lesion(
            Dims::new(32, 32, 32),
            [16.0; 3],
            [10.0, 9.0, 8.0],
            &[(Subregion::ED, 1.0), (Subregion::ET, 0.8)],
        );
        let gt = generate_phantom(&spec).unwrap();
        let et_gt = gt.subregion_mask(Subregion::ET).unwrap();
        let p = MetricParams::default();
        let mut last = 1.0;
        for r in 1..=3 {
            let pred = degrade(&gt, &[DegradationOp::Erode { region: Region::ET, radius: r }]).unwrap();
            let d = dice(&pred.subregion_mask(Subregion::ET).unwrap(), &et_gt, &p).unwrap();
            assert!(d < last, "radius {r}: {d} !< {last}");
            last = d;
        }
    }

    #[test]
    fn shift_moves_labels() {
        let spec = single_lesion(Dims::new(20, 20, 20), [8.0; 3], [3.0; 3], &[(Subregion::CC, 1.0)]);
        let m = generate_phantom(&spec).unwrap();
        let moved = degrade(
            &m,
            &[DegradationOp::Shift {
                region: Region::CC,
                offset: [2, 0, -1],
            }],
        )
        .unwrap();
        assert_eq!(moved.count(Subregion::CC), m.count(Subregion::CC));
        let cc = m.schema().code(Subregion::CC).unwrap();
        assert_eq!(*moved.volume().get(10, 8, 7), cc);
        assert_eq!(*moved.volume().get(5, 8, 8), 0);
    }

    #[test]
    fn speckle_adds_separate_blobs() {
        let spec = single_lesion(Dims::new(48, 48, 48), [12.0; 3], [6.0; 3], &[(Subregion::ED, 1.0)]);
        let m = generate_phantom(&spec).unwrap();
        let op = DegradationOp::SpeckleFp {
            region: Region::ET,
            n_blobs: 3,
            blob_radius: 2,
            seed: 9,
        };
        let s = degrade(&m, std::slice::from_ref(&op)).unwrap();
        assert_eq!(s.count(Subregion::ET), 3 * 33);
        assert_eq!(s.subregion_mask(Subregion::ED).unwrap(), m.subregion_mask(Subregion::ED).unwrap());
        assert_eq!(degrade(&m, &[op]).unwrap(), s);
    }

    #[test]
    fn brute_force_examples() {
        let p = MetricParams::default();
        let g = Geometry::with_spacing(Dims::new(12, 5, 5), [1.0; 3]).unwrap();
        let mut a = BinaryMask::empty(g.clone());
        let mut b = BinaryMask::empty(g.clone());
        a.set(2, 2, 2, true);
        b.set(9, 2, 2, true);
        assert_eq!(brute_force_hd95(&a, &b, [1.0; 3], &p).unwrap(), 7.0);
        assert_eq!(brute_force_hd95(&a, &a, [1.0; 3], &p).unwrap(), 0.0);
        let e = BinaryMask::empty(g);
        assert_eq!(brute_force_hd95(&a, &e, [1.0; 3], &p).unwrap(), 374.0);
        assert_eq!(brute_force_hd95(&e, &e, [1.0; 3], &p).unwrap(), 0.0);
    }
}
