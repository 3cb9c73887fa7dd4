use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Grid3;

/// Volume, surface area and the derived shape measures of a particle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeDescriptors {
    /// nm³.
    pub volume: f64,
    /// nm².
    pub area: f64,
    pub sphericity: f64,
    /// nm.
    pub effective_radius: f64,
    /// kDa, metadata only.
    pub molecular_weight: f64,
}

impl ShapeDescriptors {
    /// `Ψ = π^(1/3) (6V)^(2/3) / A` and `r_eff = 3V / A`.
    pub fn from_volume_area(volume: f64, area: f64, molecular_weight: f64) -> Self {
        Self {
            volume,
            area,
            sphericity: sphericity(volume, area),
            effective_radius: effective_radius(volume, area),
            molecular_weight,
        }
    }
}

pub fn sphericity(volume: f64, area: f64) -> f64 {
    std::f64::consts::PI.cbrt() * (6.0 * volume).powf(2.0 / 3.0) / area
}

pub fn effective_radius(volume: f64, area: f64) -> f64 {
    3.0 * volume / area
}

// Cube corners, then the six tetrahedra sharing the 0–6 diagonal.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];
const TETS: [[usize; 4]; 6] = [[0, 5, 1, 6], [0, 1, 2, 6], [0, 2, 3, 6], [0, 3, 7, 6], [0, 7, 4, 6], [0, 4, 5, 6]];

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn tri_area(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> f64 {
    let u = sub(b, a);
    let v = sub(c, a);
    let cx = u[1] * v[2] - u[2] * v[1];
    let cy = u[2] * v[0] - u[0] * v[2];
    let cz = u[0] * v[1] - u[1] * v[0];
    0.5 * (cx * cx + cy * cy + cz * cz).sqrt()
}

/// Area (in voxel² units) of the triangulated isosurface `field == level`,
/// built by splitting every cube into six tetrahedra. Samples outside the
/// grid read as `level - 1`, so the surface is closed.
pub fn isosurface_area(field: &Grid3, level: f64) -> f64 {
    let [nx, ny, nz] = field.dims();
    let value = |x: i64, y: i64, z: i64| -> f64 {
        if x < 0 || y < 0 || z < 0 || x >= nx as i64 || y >= ny as i64 || z >= nz as i64 {
            level - 1.0
        } else {
            field.get(x as usize, y as usize, z as usize)
        }
    };
    let mut area = 0.0;
    let mut p = [[0.0; 3]; 8];
    let mut v = [0.0; 8];
    for z in -1..nz as i64 {
        for y in -1..ny as i64 {
            for x in -1..nx as i64 {
                let mut any_in = false;
                let mut any_out = false;
                for (k, c) in CORNERS.iter().enumerate() {
                    let (cx, cy, cz) = (x + c[0] as i64, y + c[1] as i64, z + c[2] as i64);
                    v[k] = value(cx, cy, cz);
                    p[k] = [cx as f64, cy as f64, cz as f64];
                    if v[k] > level {
                        any_in = true;
                    } else {
                        any_out = true;
                    }
                }
                if !(any_in && any_out) {
                    continue;
                }
                for t in TETS {
                    area += tet_area(&t.map(|k| p[k]), &t.map(|k| v[k]), level);
                }
            }
        }
    }
    area
}

fn edge_point(pa: [f64; 3], va: f64, pb: [f64; 3], vb: f64, level: f64) -> [f64; 3] {
    let t = ((level - va) / (vb - va)).clamp(0.0, 1.0);
    [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1]), pa[2] + t * (pb[2] - pa[2])]
}

fn tet_area(p: &[[f64; 3]; 4], v: &[f64; 4], level: f64) -> f64 {
    let inside: Vec<usize> = (0..4).filter(|&i| v[i] > level).collect();
    let outside: Vec<usize> = (0..4).filter(|&i| v[i] <= level).collect();
    let e = |a: usize, b: usize| edge_point(p[a], v[a], p[b], v[b], level);
    match inside.len() {
        1 | 3 => {
            let (lone, others) = if inside.len() == 1 { (inside[0], &outside) } else { (outside[0], &inside) };
            tri_area(e(lone, others[0]), e(lone, others[1]), e(lone, others[2]))
        }
        2 => {
            let (a, b) = (inside[0], inside[1]);
            let (c, d) = (outside[0], outside[1]);
            let (p0, p1, p2, p3) = (e(a, c), e(a, d), e(b, d), e(b, c));
            tri_area(p0, p1, p2) + tri_area(p0, p2, p3)
        }
        _ => 0.0,
    }
}

/// Descriptors of the region where the max-normalized field exceeds
/// `threshold`: volume by voxel count, area from the isosurface.
pub fn shape_descriptors(v_el: &Grid3, threshold: f64, molecular_weight: f64) -> Result<ShapeDescriptors> {
    let max = v_el.max();
    if !(max > 0.0) {
        return Err(Error::EmptyThreshold(threshold));
    }
    let normalized = v_el.map(|v| v / max);
    let count = normalized.data().iter().filter(|&&v| v > threshold).count();
    if count == 0 {
        return Err(Error::EmptyThreshold(threshold));
    }
    let vs_nm = v_el.voxel_size() / 10.0;
    let volume = count as f64 * vs_nm.powi(3);
    let area = isosurface_area(&normalized, threshold) * vs_nm * vs_nm;
    Ok(ShapeDescriptors::from_volume_area(volume, area, molecular_weight))
}
