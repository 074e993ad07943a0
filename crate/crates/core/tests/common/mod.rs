//! Reference implementations and seeded generators shared by the integration
//! tests. Everything here is written from the definitions, without calling
//! into the library's algorithms.

#![allow(dead_code)]

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tumorfuse::volume::{BinaryMask, Dims, Geometry};
use tumorfuse::Connectivity;

pub const SPACINGS: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 1.0, 2.5], [0.5, 0.5, 0.5]];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn geometry(dims: Dims, spacing: [f64; 3]) -> Geometry {
    Geometry::with_spacing(dims, spacing).unwrap()
}

/// A random mask: independent voxels, a union of boxes, or a union of balls.
/// About one mask in twenty is empty.
pub fn random_mask(rng: &mut ChaCha8Rng, g: &Geometry) -> BinaryMask {
    let d = g.dims();
    let mut m = BinaryMask::empty(g.clone());
    match rng.gen_range(0..20) {
        0 => {}
        1..=6 => {
            let p = rng.gen_range(0.01..0.4);
            for z in 0..d.nz {
                for y in 0..d.ny {
                    for x in 0..d.nx {
                        if rng.gen_bool(p) {
                            m.set(x, y, z, true);
                        }
                    }
                }
            }
        }
        7..=13 => {
            for _ in 0..rng.gen_range(1..5) {
                let lo = [d.nx, d.ny, d.nz].map(|n| rng.gen_range(0..n));
                let ext = [0; 3].map(|_| rng.gen_range(1..7));
                for z in lo[2]..(lo[2] + ext[2]).min(d.nz) {
                    for y in lo[1]..(lo[1] + ext[1]).min(d.ny) {
                        for x in lo[0]..(lo[0] + ext[0]).min(d.nx) {
                            m.set(x, y, z, true);
                        }
                    }
                }
            }
        }
        _ => {
            for _ in 0..rng.gen_range(1..4) {
                let c = [d.nx, d.ny, d.nz].map(|n| rng.gen_range(0.0..n as f64));
                let r: f64 = rng.gen_range(0.8..5.0);
                for z in 0..d.nz {
                    for y in 0..d.ny {
                        for x in 0..d.nx {
                            let q = [x as f64 - c[0], y as f64 - c[1], z as f64 - c[2]];
                            if q.iter().map(|v| v * v).sum::<f64>() <= r * r {
                                m.set(x, y, z, true);
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// A copy of `m` with each voxel flipped with probability `p`.
pub fn perturb(rng: &mut ChaCha8Rng, m: &BinaryMask, p: f64) -> BinaryMask {
    let bits = m.bits().iter().map(|b| if rng.gen_bool(p) { !*b } else { *b }).collect();
    BinaryMask::new(m.geometry().clone(), bits).unwrap()
}

fn neighbors(dims: Dims, i: usize, conn: Connectivity) -> Vec<usize> {
    let (x, y, z) = (
        (i % dims.nx) as i64,
        ((i / dims.nx) % dims.ny) as i64,
        (i / (dims.nx * dims.ny)) as i64,
    );
    let mut out = Vec::new();
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let nonzero = (dx != 0) as i32 + (dy != 0) as i32 + (dz != 0) as i32;
                let ok = match conn {
                    Connectivity::Face6 => nonzero == 1,
                    Connectivity::Full26 => nonzero >= 1,
                };
                let (nx, ny, nz) = (x + dx, y + dy, z + dz);
                if ok
                    && (0..dims.nx as i64).contains(&nx)
                    && (0..dims.ny as i64).contains(&ny)
                    && (0..dims.nz as i64).contains(&nz)
                {
                    out.push(nx as usize + dims.nx * (ny as usize + dims.ny * nz as usize));
                }
            }
        }
    }
    out
}

/// Components by breadth-first flood fill, each sorted, listed in order of
/// their smallest voxel index.
pub fn flood_fill_partition(m: &BinaryMask, conn: Connectivity) -> Vec<Vec<usize>> {
    let dims = m.dims();
    let bits = m.bits();
    let mut seen = vec![false; bits.len()];
    let mut parts = Vec::new();
    for start in 0..bits.len() {
        if !bits[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut part = Vec::new();
        while let Some(i) = queue.pop_front() {
            part.push(i);
            for j in neighbors(dims, i, conn) {
                if bits[j] && !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        part.sort_unstable();
        parts.push(part);
    }
    parts
}

/// Distance (mm) from every voxel to the nearest foreground voxel, by
/// exhaustive scan. Requires a nonempty mask.
pub fn brute_distance(m: &BinaryMask, s: [f64; 3]) -> Vec<f64> {
    let d = m.dims();
    let fg: Vec<[f64; 3]> = (0..m.bits().len())
        .filter(|i| m.bits()[*i])
        .map(|i| {
            [
                (i % d.nx) as f64 * s[0],
                ((i / d.nx) % d.ny) as f64 * s[1],
                (i / (d.nx * d.ny)) as f64 * s[2],
            ]
        })
        .collect();
    assert!(!fg.is_empty());
    (0..m.bits().len())
        .map(|i| {
            let p = [
                (i % d.nx) as f64 * s[0],
                ((i / d.nx) % d.ny) as f64 * s[1],
                (i / (d.nx * d.ny)) as f64 * s[2],
            ];
            fg.iter()
                .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}
