//! Connected components, cubic dilation/erosion and component size filtering.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{BinaryMask, Dims, Geometry, Volume};

/// Voxel adjacency used for component labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    /// Voxels sharing a face.
    Face6,
    /// Voxels sharing a face, an edge or a corner.
    Full26,
}

impl Connectivity {
    /// Neighbor offsets already visited by an x-fastest raster scan.
    fn backward_offsets(self) -> &'static [[i64; 3]] {
        match self {
            Connectivity::Face6 => &[[-1, 0, 0], [0, -1, 0], [0, 0, -1]],
            Connectivity::Full26 => &BACKWARD_26,
        }
    }

    /// All neighbor offsets.
    pub fn offsets(self) -> Vec<[i64; 3]> {
        let mut out = Vec::new();
        for dz in -1..=1i64 {
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Face6 => manhattan == 1,
                        Connectivity::Full26 => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

const BACKWARD_26: [[i64; 3]; 13] = [
    [-1, -1, -1],
    [0, -1, -1],
    [1, -1, -1],
    [-1, 0, -1],
    [0, 0, -1],
    [1, 0, -1],
    [-1, 1, -1],
    [0, 1, -1],
    [1, 1, -1],
    [-1, -1, 0],
    [0, -1, 0],
    [1, -1, 0],
    [-1, 0, 0],
];

impl fmt::Display for Connectivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Connectivity::Face6 => "6",
            Connectivity::Full26 => "26",
        })
    }
}

impl FromStr for Connectivity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "6" | "face6" => Ok(Connectivity::Face6),
            "26" | "full26" => Ok(Connectivity::Full26),
            other => Err(Error::InvalidParams(format!(
                "connectivity must be 6 or 26, got {other:?}"
            ))),
        }
    }
}

/// Component ids per voxel (0 = background) plus component sizes.
///
/// Ids run `1..=count` and are ordered by each component's smallest linear
/// voxel index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentMap {
    labels: Volume<u32>,
    sizes: Vec<usize>,
}

impl ComponentMap {
    pub fn labels(&self) -> &Volume<u32> {
        &self.labels
    }

    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Sizes indexed by `id - 1`.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn size(&self, id: u32) -> usize {
        self.sizes[id as usize - 1]
    }

    pub fn geometry(&self) -> &Geometry {
        self.labels.geometry()
    }

    /// Foreground mask of every labeled voxel.
    pub fn support(&self) -> BinaryMask {
        BinaryMask::from_volume(&self.labels)
    }

    pub fn component_mask(&self, id: u32) -> BinaryMask {
        let bits = self.labels.data().iter().map(|l| *l == id).collect();
        BinaryMask::new(self.geometry().clone(), bits).expect("same grid")
    }

    /// Linear voxel indices of every component, ascending, indexed by `id - 1`.
    pub fn voxel_lists(&self) -> Vec<Vec<usize>> {
        let mut lists: Vec<Vec<usize>> = self.sizes.iter().map(|s| Vec::with_capacity(*s)).collect();
        for (i, l) in self.labels.data().iter().enumerate() {
            if *l != 0 {
                lists[*l as usize - 1].push(i);
            }
        }
        lists
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// Two-pass union-find labeling of a raw x-fastest bit array.
pub(crate) fn label_bits(bits: &[bool], dims: Dims, conn: Connectivity) -> (Vec<u32>, Vec<usize>) {
    let offsets = conn.backward_offsets();
    let mut provisional = vec![0u32; bits.len()];
    // parent[0] is unused so that provisional label 0 can mean background
    let mut parent: Vec<u32> = vec![0];

    for z in 0..dims.nz {
        for y in 0..dims.ny {
            let row = dims.index(0, y, z);
            for x in 0..dims.nx {
                let i = row + x;
                if !bits[i] {
                    continue;
                }
                let mut current = 0u32;
                for [dx, dy, dz] in offsets {
                    let Some(j) = dims.checked_index(x as i64 + dx, y as i64 + dy, z as i64 + dz)
                    else {
                        continue;
                    };
                    let lj = provisional[j];
                    if lj == 0 {
                        continue;
                    }
                    if current == 0 {
                        current = find(&mut parent, lj);
                    } else {
                        let (a, b) = (find(&mut parent, current), find(&mut parent, lj));
                        if a != b {
                            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                            parent[hi as usize] = lo;
                            current = lo;
                        }
                    }
                }
                if current == 0 {
                    current = parent.len() as u32;
                    parent.push(current);
                }
                provisional[i] = current;
            }
        }
    }

    let mut final_id = vec![0u32; parent.len()];
    let mut sizes = Vec::new();
    for l in provisional.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if final_id[root] == 0 {
            sizes.push(0);
            final_id[root] = sizes.len() as u32;
        }
        let id = final_id[root];
        sizes[id as usize - 1] += 1;
        *l = id;
    }
    (provisional, sizes)
}

/// Maximal connected components of the mask foreground.
pub fn connected_components(m: &BinaryMask, c: Connectivity) -> ComponentMap {
    let (labels, sizes) = label_bits(m.bits(), m.dims(), c);
    ComponentMap {
        labels: Volume::new(m.geometry().clone(), labels).expect("same grid"),
        sizes,
    }
}

/// Drops components smaller than `min_size` voxels and renumbers the rest in order.
pub fn filter_small(cm: &ComponentMap, min_size: usize) -> ComponentMap {
    let mut remap = vec![0u32; cm.sizes.len() + 1];
    let mut sizes = Vec::new();
    for (k, s) in cm.sizes.iter().enumerate() {
        if *s >= min_size {
            sizes.push(*s);
            remap[k + 1] = sizes.len() as u32;
        }
    }
    ComponentMap {
        labels: cm.labels.map(|l| remap[*l as usize]),
        sizes,
    }
}

/// Applies `f` to every line of `src` along `axis`, writing into `dst`.
fn for_each_line(
    src: &[bool],
    dst: &mut [bool],
    dims: Dims,
    axis: usize,
    mut f: impl FnMut(&[bool], &mut [bool]),
) {
    let d = dims.as_array();
    let n = d[axis];
    let stride = [1, dims.nx, dims.nx * dims.ny][axis];
    let (a, b) = match axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let mut line = vec![false; n];
    let mut out = vec![false; n];
    for v in 0..d[b] {
        for u in 0..d[a] {
            let mut p = [0usize; 3];
            p[a] = u;
            p[b] = v;
            let start = dims.index(p[0], p[1], p[2]);
            if stride == 1 {
                f(&src[start..start + n], &mut dst[start..start + n]);
                continue;
            }
            for (k, slot) in line.iter_mut().enumerate() {
                *slot = src[start + k * stride];
            }
            f(&line, &mut out);
            for (k, value) in out.iter().enumerate() {
                dst[start + k * stride] = *value;
            }
        }
    }
}

fn prefix_counts(line: &[bool], counts: &mut Vec<usize>) {
    counts.clear();
    counts.push(0);
    let mut acc = 0;
    for b in line {
        acc += usize::from(*b);
        counts.push(acc);
    }
}

fn separable(bits: &[bool], dims: Dims, mut f: impl FnMut(&[bool], &mut [bool])) -> Vec<bool> {
    let mut a = bits.to_vec();
    let mut b = vec![false; bits.len()];
    for axis in 0..3 {
        for_each_line(&a, &mut b, dims, axis, &mut f);
        std::mem::swap(&mut a, &mut b);
    }
    a
}

/// Dilation by the cube of side `2r + 1` on a raw bit array.
pub(crate) fn dilate_bits(bits: &[bool], dims: Dims, r: usize) -> Vec<bool> {
    if r == 0 {
        return bits.to_vec();
    }
    let mut counts = Vec::new();
    separable(bits, dims, |line, out| {
        prefix_counts(line, &mut counts);
        let n = line.len();
        for (i, o) in out.iter_mut().enumerate() {
            let lo = i.saturating_sub(r);
            let hi = (i + r + 1).min(n);
            *o = counts[hi] > counts[lo];
        }
    })
}

/// Erosion by the cube of side `2r + 1`; voxels outside the grid count as background.
pub(crate) fn erode_bits(bits: &[bool], dims: Dims, r: usize) -> Vec<bool> {
    if r == 0 {
        return bits.to_vec();
    }
    let mut counts = Vec::new();
    separable(bits, dims, |line, out| {
        prefix_counts(line, &mut counts);
        let n = line.len();
        for (i, o) in out.iter_mut().enumerate() {
            *o = i >= r && i + r < n && counts[i + r + 1] - counts[i - r] == 2 * r + 1;
        }
    })
}

/// Voxels within Chebyshev distance `radius` of the foreground.
pub fn dilate(m: &BinaryMask, radius: usize) -> BinaryMask {
    let bits = dilate_bits(m.bits(), m.dims(), radius);
    BinaryMask::new(m.geometry().clone(), bits).expect("same grid")
}

/// Voxels whose whole `2·radius + 1` cube lies in the grid and in the foreground.
pub fn erode(m: &BinaryMask, radius: usize) -> BinaryMask {
    let bits = erode_bits(m.bits(), m.dims(), radius);
    BinaryMask::new(m.geometry().clone(), bits).expect("same grid")
}
