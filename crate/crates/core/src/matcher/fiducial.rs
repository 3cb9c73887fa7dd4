use std::f64::consts::PI;

use num_complex::Complex64;

use crate::volume::fft::apply_filter;
use crate::volume::Grid3;

/// Scale-normalized negative Laplacian of Gaussian, `-σ² ∇²(G_σ * f)`,
/// with `σ` in voxels. Bright blobs of radius about `σ√3` respond
/// positively.
pub fn log_response(g: &Grid3, sigma: f64) -> Grid3 {
    apply_filter(g, |fx, fy, fz| {
        let f2 = fx * fx + fy * fy + fz * fz;
        let v = sigma * sigma * 4.0 * PI * PI * f2 * (-2.0 * PI * PI * sigma * sigma * f2).exp();
        Complex64::new(v, 0.0)
    })
}

/// Gold-bead detection: LoG response, then local maxima above `threshold`
/// (default half the largest response) merged when closer than `sigma`.
/// Dense beads are positive in contrast-normalized tomograms.
pub fn log_fiducial_detect(g: &Grid3, sigma: f64, threshold: Option<f64>) -> Vec<[usize; 3]> {
    let r = log_response(g, sigma);
    let max = r.max();
    let scale = g.data().iter().map(|v| v.abs()).fold(0.0, f64::max);
    if !(max > 1e-9 * scale) || scale == 0.0 {
        return Vec::new();
    }
    let thr = threshold.unwrap_or(0.5 * max);
    let [nx, ny, nz] = r.dims();
    let mut peaks: Vec<([usize; 3], f64)> = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let v = r.get(x, y, z);
                if v < thr {
                    continue;
                }
                let i = r.index(x, y, z);
                let mut is_max = true;
                'n: for dz in -1i64..=1 {
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            let q = [x as i64 + dx, y as i64 + dy, z as i64 + dz];
                            if (dx, dy, dz) == (0, 0, 0) || (0..3).any(|a| q[a] < 0 || q[a] >= [nx, ny, nz][a] as i64) {
                                continue;
                            }
                            let j = r.index(q[0] as usize, q[1] as usize, q[2] as usize);
                            let w = r.data()[j];
                            // Plateaus go to the lowest index.
                            if w > v || (w == v && j < i) {
                                is_max = false;
                                break 'n;
                            }
                        }
                    }
                }
                if is_max {
                    peaks.push(([x, y, z], v));
                }
            }
        }
    }
    peaks.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut kept: Vec<[usize; 3]> = Vec::new();
    for (p, _) in peaks {
        let near = kept
            .iter()
            .any(|k| (0..3).map(|a| (p[a] as f64 - k[a] as f64).powi(2)).sum::<f64>() < sigma * sigma);
        if !near {
            kept.push(p);
        }
    }
    kept
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beads(dims: [usize; 3], centers: &[[usize; 3]], radius: f64) -> Grid3 {
        Grid3::from_fn(dims, 10.0, |x, y, z| {
            let inside = centers.iter().any(|c| {
                let d2 = (x as f64 - c[0] as f64).powi(2) + (y as f64 - c[1] as f64).powi(2) + (z as f64 - c[2] as f64).powi(2);
                d2 <= radius * radius
            });
            if inside {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn single_bead() {
        let g = beads([48; 3], &[[20, 25, 23]], 5.0);
        let d = log_fiducial_detect(&g, 5.0, None);
        assert_eq!(d.len(), 1);
        assert!((0..3).all(|a| (d[0][a] as i64 - [20, 25, 23][a]).abs() <= 1), "{d:?}");
    }

    #[test]
    fn empty_volume() {
        assert!(log_fiducial_detect(&Grid3::zeros([24; 3], 10.0).unwrap(), 5.0, None).is_empty());
    }

    #[test]
    fn nine_beads() {
        let mut centers = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                centers.push([16 + 24 * i, 16 + 24 * j, 20 + 8 * ((i + j) % 2)]);
            }
        }
        let d = log_fiducial_detect(&beads([80, 80, 48], &centers, 5.0), 5.0, None);
        assert_eq!(d.len(), 9, "{d:?}");
        for c in &centers {
            assert!(d.iter().any(|p| (0..3).all(|a| (p[a] as i64 - c[a] as i64).abs() <= 1)));
        }
    }
}
