use num_complex::Complex64;

use crate::error::{Error, Result};

/// Row-major linear index with x varying fastest.
#[inline]
pub fn linear_index(dims: [usize; 3], x: usize, y: usize, z: usize) -> usize {
    x + dims[0] * (y + dims[1] * z)
}

fn validate(dims: [usize; 3], voxel_size: f64) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidDims(dims));
    }
    if !(voxel_size.is_finite() && voxel_size > 0.0) {
        return Err(Error::InvalidVoxelSize(voxel_size));
    }
    Ok(())
}

/// How [`Grid3::paste`] combines the incoming block with the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PasteMode {
    Add,
    Replace,
}

/// Real scalar field on a regular grid.
///
/// Lengths are in Ångström. Voxel `i` along an axis has its center at
/// `origin + (i + 0.5) * voxel_size`, so `origin` is the lower corner of the
/// box. A 2D image is a grid with `nz == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    data: Vec<f64>,
    dims: [usize; 3],
    voxel_size: f64,
    origin: [f64; 3],
}

impl Grid3 {
    pub fn zeros(dims: [usize; 3], voxel_size: f64) -> Result<Self> {
        Self::filled(dims, voxel_size, 0.0)
    }

    pub fn filled(dims: [usize; 3], voxel_size: f64, value: f64) -> Result<Self> {
        validate(dims, voxel_size)?;
        Ok(Self {
            data: vec![value; dims.iter().product()],
            dims,
            voxel_size,
            origin: [0.0; 3],
        })
    }

    pub fn from_vec(dims: [usize; 3], voxel_size: f64, data: Vec<f64>) -> Result<Self> {
        validate(dims, voxel_size)?;
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::LengthMismatch { len: data.len(), dims });
        }
        Ok(Self { data, dims, voxel_size, origin: [0.0; 3] })
    }

    /// Builds a grid by evaluating `f(x, y, z)` at every voxel index.
    pub fn from_fn(
        dims: [usize; 3],
        voxel_size: f64,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        validate(dims, voxel_size)?;
        let mut data = Vec::with_capacity(dims.iter().product());
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                for x in 0..dims[0] {
                    data.push(f(x, y, z));
                }
            }
        }
        Ok(Self { data, dims, voxel_size, origin: [0.0; 3] })
    }

    pub fn with_origin(mut self, origin: [f64; 3]) -> Self {
        self.origin = origin;
        self
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_2d(&self) -> bool {
        self.dims[2] == 1
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        linear_index(self.dims, x, y, z)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, value: f64) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    /// Physical extent of the box along each axis.
    pub fn extent(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.dims[a] as f64 * self.voxel_size)
    }

    /// Physical coordinate of the box center.
    pub fn center(&self) -> [f64; 3] {
        [0, 1, 2].map(|a| self.origin[a] + 0.5 * self.dims[a] as f64 * self.voxel_size)
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        let i = [x, y, z];
        [0, 1, 2].map(|a| self.origin[a] + (i[a] as f64 + 0.5) * self.voxel_size)
    }

    /// Continuous voxel index of a physical point (inverse of [`Self::voxel_center`]).
    pub fn to_index(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| (p[a] - self.origin[a]) / self.voxel_size - 0.5)
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::NonFinite { index }),
            None => Ok(()),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.data.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Voxel index of the (first) maximum.
    pub fn argmax(&self) -> [usize; 3] {
        let mut best = 0;
        for (i, v) in self.data.iter().enumerate() {
            if *v > self.data[best] {
                best = i;
            }
        }
        self.unravel(best)
    }

    pub fn unravel(&self, i: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid3 {
        Grid3 {
            data: self.data.iter().map(|&v| f(v)).collect(),
            dims: self.dims,
            voxel_size: self.voxel_size,
            origin: self.origin,
        }
    }

    pub fn same_shape(&self, other: &Grid3) -> bool {
        self.dims == other.dims && self.voxel_size == other.voxel_size
    }

    /// Mean-pools blocks of `factor` voxels per axis. Axes of length 1 are
    /// left alone, so a 2D image is pooled over `factor²` blocks.
    pub fn bin(&self, factor: usize) -> Result<Grid3> {
        if factor == 0 {
            return Err(Error::Config("bin factor must be positive".into()));
        }
        let f = [0, 1, 2].map(|a| if self.dims[a] == 1 { 1 } else { factor });
        for (a, name) in ['x', 'y', 'z'].into_iter().enumerate() {
            if self.dims[a] % f[a] != 0 {
                return Err(Error::IndivisibleBin { axis: name, len: self.dims[a], factor });
            }
        }
        let out_dims = [0, 1, 2].map(|a| self.dims[a] / f[a]);
        let norm = 1.0 / (f[0] * f[1] * f[2]) as f64;
        let mut out = vec![0.0; out_dims.iter().product()];
        for z in 0..out_dims[2] {
            for y in 0..out_dims[1] {
                for x in 0..out_dims[0] {
                    let mut acc = 0.0;
                    for dz in 0..f[2] {
                        for dy in 0..f[1] {
                            let row = self.index(x * f[0], y * f[1] + dy, z * f[2] + dz);
                            acc += self.data[row..row + f[0]].iter().sum::<f64>();
                        }
                    }
                    out[linear_index(out_dims, x, y, z)] = acc * norm;
                }
            }
        }
        let vs = self.voxel_size * factor as f64;
        Ok(Grid3 { data: out, dims: out_dims, voxel_size: vs, origin: self.origin })
    }

    /// Writes `sub` into `self` with its voxel (0,0,0) at `offset`.
    pub fn paste(&mut self, sub: &Grid3, offset: [i64; 3], mode: PasteMode) -> Result<()> {
        let fits = (0..3).all(|a| offset[a] >= 0 && offset[a] as usize + sub.dims[a] <= self.dims[a]);
        if !fits {
            return Err(Error::PasteOutOfBounds { sub: sub.dims, offset, target: self.dims });
        }
        let o = offset.map(|v| v as usize);
        for z in 0..sub.dims[2] {
            for y in 0..sub.dims[1] {
                let src = sub.index(0, y, z);
                let dst = self.index(o[0], o[1] + y, o[2] + z);
                let src_row = &sub.data[src..src + sub.dims[0]];
                let dst_row = &mut self.data[dst..dst + sub.dims[0]];
                match mode {
                    PasteMode::Add => dst_row.iter_mut().zip(src_row).for_each(|(d, s)| *d += s),
                    PasteMode::Replace => dst_row.copy_from_slice(src_row),
                }
            }
        }
        Ok(())
    }

    /// Copies out the block of `dims` voxels starting at `offset`.
    pub fn crop(&self, offset: [usize; 3], dims: [usize; 3]) -> Result<Grid3> {
        if (0..3).any(|a| offset[a] + dims[a] > self.dims[a]) {
            return Err(Error::ShapeMismatch(format!(
                "crop {dims:?} at {offset:?} exceeds {:?}",
                self.dims
            )));
        }
        let mut out = Grid3::zeros(dims, self.voxel_size)?;
        for z in 0..dims[2] {
            for y in 0..dims[1] {
                let src = self.index(offset[0], offset[1] + y, offset[2] + z);
                let dst = out.index(0, y, z);
                out.data[dst..dst + dims[0]].copy_from_slice(&self.data[src..src + dims[0]]);
            }
        }
        let origin = [0, 1, 2].map(|a| self.origin[a] + offset[a] as f64 * self.voxel_size);
        Ok(out.with_origin(origin))
    }

    /// One z-section as a 2D image.
    pub fn section(&self, z: usize) -> Grid3 {
        let n = self.dims[0] * self.dims[1];
        Grid3 {
            data: self.data[z * n..(z + 1) * n].to_vec(),
            dims: [self.dims[0], self.dims[1], 1],
            voxel_size: self.voxel_size,
            origin: self.origin,
        }
    }

    /// Stacks equally sized 2D images along z.
    pub fn stack(images: &[Grid3]) -> Result<Grid3> {
        let first = images.first().ok_or(Error::EmptySeries)?;
        let mut data = Vec::with_capacity(first.len() * images.len());
        for img in images {
            if !img.same_shape(first) || !img.is_2d() {
                return Err(Error::ShapeMismatch("stack members must be equal 2D images".into()));
            }
            data.extend_from_slice(&img.data);
        }
        let dims = [first.dims[0], first.dims[1], images.len()];
        Ok(Grid3 { data, dims, voxel_size: first.voxel_size, origin: first.origin })
    }
}

/// Complex field on a regular grid; same shape rules as [`Grid3`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid3 {
    data: Vec<Complex64>,
    dims: [usize; 3],
    voxel_size: f64,
}

impl ComplexGrid3 {
    pub fn from_vec(dims: [usize; 3], voxel_size: f64, data: Vec<Complex64>) -> Result<Self> {
        validate(dims, voxel_size)?;
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::LengthMismatch { len: data.len(), dims });
        }
        Ok(Self { data, dims, voxel_size })
    }

    pub fn from_real(g: &Grid3) -> Self {
        Self {
            data: g.data().iter().map(|&v| Complex64::new(v, 0.0)).collect(),
            dims: g.dims(),
            voxel_size: g.voxel_size(),
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> Complex64 {
        self.data[linear_index(self.dims, x, y, z)]
    }

    pub fn re(&self) -> Grid3 {
        Grid3::from_vec(self.dims, self.voxel_size, self.data.iter().map(|c| c.re).collect())
            .expect("shape already validated")
    }

    pub fn norm_sqr(&self) -> Grid3 {
        Grid3::from_vec(self.dims, self.voxel_size, self.data.iter().map(|c| c.norm_sqr()).collect())
            .expect("shape already validated")
    }
}

/// Integer label field (class or instance masks). `0` is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelGrid3 {
    data: Vec<u32>,
    dims: [usize; 3],
    voxel_size_bits: u64,
}

impl LabelGrid3 {
    pub fn zeros(dims: [usize; 3], voxel_size: f64) -> Result<Self> {
        validate(dims, voxel_size)?;
        Ok(Self { data: vec![0; dims.iter().product()], dims, voxel_size_bits: voxel_size.to_bits() })
    }

    pub fn from_vec(dims: [usize; 3], voxel_size: f64, data: Vec<u32>) -> Result<Self> {
        validate(dims, voxel_size)?;
        if data.len() != dims.iter().product::<usize>() {
            return Err(Error::LengthMismatch { len: data.len(), dims });
        }
        Ok(Self { data, dims, voxel_size_bits: voxel_size.to_bits() })
    }

    /// Rounds a real grid to labels; negative or non-finite values become 0.
    pub fn from_grid(g: &Grid3) -> Self {
        let data = g
            .data()
            .iter()
            .map(|&v| if v.is_finite() && v > 0.0 { v.round() as u32 } else { 0 })
            .collect();
        Self { data, dims: g.dims(), voxel_size_bits: g.voxel_size().to_bits() }
    }

    pub fn to_grid(&self) -> Grid3 {
        Grid3::from_vec(self.dims, self.voxel_size(), self.data.iter().map(|&v| v as f64).collect())
            .expect("shape already validated")
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn voxel_size(&self) -> f64 {
        f64::from_bits(self.voxel_size_bits)
    }

    pub fn data(&self) -> &[u32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.data[linear_index(self.dims, x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: u32) {
        let i = linear_index(self.dims, x, y, z);
        self.data[i] = v;
    }

    /// Label at a continuous voxel position, or `None` outside the grid.
    pub fn lookup(&self, p: [f64; 3]) -> Option<u32> {
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let r = p[a].round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            idx[a] = r as usize;
        }
        Some(self.get(idx[0], idx[1], idx[2]))
    }

    /// Downsamples by `factor` per axis; each output voxel takes the most
    /// frequent label of its block, ties going to the smallest nonzero label.
    pub fn bin_majority(&self, factor: usize) -> Result<LabelGrid3> {
        for (a, name) in ['x', 'y', 'z'].into_iter().enumerate() {
            if self.dims[a] % factor != 0 {
                return Err(Error::IndivisibleBin { axis: name, len: self.dims[a], factor });
            }
        }
        let od = self.dims.map(|d| d / factor);
        let mut out = LabelGrid3::zeros(od, self.voxel_size() * factor as f64)?;
        let mut counts: Vec<(u32, usize)> = Vec::with_capacity(factor.pow(3));
        for z in 0..od[2] {
            for y in 0..od[1] {
                for x in 0..od[0] {
                    counts.clear();
                    for dz in 0..factor {
                        for dy in 0..factor {
                            for dx in 0..factor {
                                let v = self.get(x * factor + dx, y * factor + dy, z * factor + dz);
                                match counts.iter_mut().find(|(l, _)| *l == v) {
                                    Some((_, c)) => *c += 1,
                                    None => counts.push((v, 1)),
                                }
                            }
                        }
                    }
                    let best = counts
                        .iter()
                        .max_by(|a, b| {
                            a.1.cmp(&b.1).then_with(|| match (a.0, b.0) {
                                (0, 0) => std::cmp::Ordering::Equal,
                                (0, _) => std::cmp::Ordering::Less,
                                (_, 0) => std::cmp::Ordering::Greater,
                                (p, q) => q.cmp(&p),
                            })
                        })
                        .map(|(l, _)| *l)
                        .unwrap_or(0);
                    out.set(x, y, z, best);
                }
            }
        }
        Ok(out)
    }
}
