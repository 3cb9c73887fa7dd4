//! MRC2014 volume I/O.
//!
//! Writing always produces mode 2 (32-bit float, little-endian) with the
//! `MAP ` tag and machine stamp `0x44 0x44 0x00 0x00`. Reading accepts
//! modes 0, 1, 2 and 6 from little-endian files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Grid3, LabelGrid3};

pub const HEADER_LEN: usize = 1024;
const MACHINE_STAMP: [u8; 4] = [0x44, 0x44, 0x00, 0x00];

/// The header fields this crate reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcHeader {
    pub nx: i32,
    pub ny: i32,
    pub nz: i32,
    pub mode: i32,
    pub mx: i32,
    pub my: i32,
    pub mz: i32,
    /// Cell dimensions in Å.
    pub cella: [f32; 3],
    pub dmin: f32,
    pub dmax: f32,
    pub dmean: f32,
    pub rms: f32,
    pub ispg: i32,
    pub nsymbt: i32,
    pub origin: [f32; 3],
}

fn word(buf: &[u8], index: usize) -> [u8; 4] {
    let o = 4 * index;
    [buf[o], buf[o + 1], buf[o + 2], buf[o + 3]]
}

impl MrcHeader {
    fn for_grid(g: &Grid3, is_stack: bool) -> Self {
        let [nx, ny, nz] = g.dims().map(|d| d as i32);
        let n = g.len() as f64;
        let mean = g.sum() / n;
        let rms = (g.data().iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let vs = g.voxel_size() as f32;
        let mz = if is_stack { 1 } else { nz };
        let o = g.origin().map(|v| v as f32);
        Self {
            nx,
            ny,
            nz,
            mode: 2,
            mx: nx,
            my: ny,
            mz,
            cella: [nx as f32 * vs, ny as f32 * vs, mz as f32 * vs],
            dmin: g.min() as f32,
            dmax: g.max() as f32,
            dmean: mean as f32,
            rms: rms as f32,
            ispg: if is_stack || nz == 1 { 0 } else { 1 },
            nsymbt: 0,
            origin: o,
        }
    }

    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        let mut put = |index: usize, bytes: [u8; 4]| b[4 * index..4 * index + 4].copy_from_slice(&bytes);
        put(0, self.nx.to_le_bytes());
        put(1, self.ny.to_le_bytes());
        put(2, self.nz.to_le_bytes());
        put(3, self.mode.to_le_bytes());
        put(7, self.mx.to_le_bytes());
        put(8, self.my.to_le_bytes());
        put(9, self.mz.to_le_bytes());
        for a in 0..3 {
            put(10 + a, self.cella[a].to_le_bytes());
            put(13 + a, 90f32.to_le_bytes());
            put(16 + a, (a as i32 + 1).to_le_bytes());
            put(49 + a, self.origin[a].to_le_bytes());
        }
        put(19, self.dmin.to_le_bytes());
        put(20, self.dmax.to_le_bytes());
        put(21, self.dmean.to_le_bytes());
        put(22, self.ispg.to_le_bytes());
        put(23, self.nsymbt.to_le_bytes());
        put(26, *b"MRCO");
        put(27, 20140i32.to_le_bytes());
        put(52, *b"MAP ");
        put(53, MACHINE_STAMP);
        put(54, self.rms.to_le_bytes());
        put(55, 1i32.to_le_bytes());
        let label = b"tomobench";
        b[224..224 + label.len()].copy_from_slice(label);
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::Mrc(format!("header truncated at {} bytes", b.len())));
        }
        let stamp = word(b, 53);
        if stamp[0] == 0x11 {
            return Err(Error::Mrc("big-endian files are not supported".into()));
        }
        let i = |k: usize| i32::from_le_bytes(word(b, k));
        let f = |k: usize| f32::from_le_bytes(word(b, k));
        let h = Self {
            nx: i(0),
            ny: i(1),
            nz: i(2),
            mode: i(3),
            mx: i(7),
            my: i(8),
            mz: i(9),
            cella: [f(10), f(11), f(12)],
            dmin: f(19),
            dmax: f(20),
            dmean: f(21),
            ispg: i(22),
            nsymbt: i(23),
            origin: [f(49), f(50), f(51)],
            rms: f(54),
        };
        if h.nx <= 0 || h.ny <= 0 || h.nz <= 0 {
            return Err(Error::Mrc(format!("bad dimensions {} {} {}", h.nx, h.ny, h.nz)));
        }
        if h.nsymbt < 0 {
            return Err(Error::Mrc(format!("bad extended header length {}", h.nsymbt)));
        }
        Ok(h)
    }

    /// Voxel size in Å, derived from the cell and sampling along x.
    pub fn voxel_size(&self) -> f64 {
        if self.mx > 0 && self.cella[0] > 0.0 {
            self.cella[0] as f64 / self.mx as f64
        } else {
            1.0
        }
    }
}

/// Serializes a grid to MRC mode 2 bytes.
pub fn encode(g: &Grid3, is_stack: bool) -> Vec<u8> {
    let header = MrcHeader::for_grid(g, is_stack);
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * g.len());
    out.extend_from_slice(&header.to_bytes());
    for v in g.data() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    out
}

/// Parses MRC bytes into a grid plus its header.
pub fn decode(bytes: &[u8]) -> Result<(Grid3, MrcHeader)> {
    let h = MrcHeader::from_bytes(bytes)?;
    let dims = [h.nx as usize, h.ny as usize, h.nz as usize];
    let n: usize = dims.iter().product();
    let start = HEADER_LEN + h.nsymbt as usize;
    let width = match h.mode {
        0 => 1,
        1 | 6 => 2,
        2 => 4,
        m => return Err(Error::Mrc(format!("unsupported mode {m}"))),
    };
    let body = bytes
        .get(start..start + n * width)
        .ok_or_else(|| Error::Mrc(format!("data truncated: need {} bytes", start + n * width)))?;
    let data: Vec<f64> = match h.mode {
        0 => body.iter().map(|&v| v as i8 as f64).collect(),
        1 => body.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]]) as f64).collect(),
        6 => body.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as f64).collect(),
        _ => body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect(),
    };
    let vs = h.voxel_size();
    let origin = h.origin.map(|v| v as f64);
    Ok((Grid3::from_vec(dims, vs, data)?.with_origin(origin), h))
}

pub fn write_grid(path: impl AsRef<Path>, g: &Grid3) -> Result<()> {
    write_bytes(path.as_ref(), &encode(g, false))
}

/// Writes a z-stack of 2D images (space group 0, `mz == 1`).
pub fn write_stack(path: impl AsRef<Path>, g: &Grid3) -> Result<()> {
    write_bytes(path.as_ref(), &encode(g, true))
}

pub fn write_labels(path: impl AsRef<Path>, l: &LabelGrid3) -> Result<()> {
    write_grid(path, &l.to_grid())
}

pub fn read_grid(path: impl AsRef<Path>) -> Result<Grid3> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?.0)
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelGrid3> {
    Ok(LabelGrid3::from_grid(&read_grid(path)?))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let g = Grid3::from_fn([4, 3, 2], 5.0, |x, y, z| (x + 10 * y + 100 * z) as f64).unwrap();
        let bytes = encode(&g, false);
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 24);
        assert_eq!(&bytes[208..212], b"MAP ");
        assert_eq!(&bytes[212..216], &[0x44, 0x44, 0x00, 0x00]);
        assert_eq!(i32::from_le_bytes(word(&bytes, 3)), 2);
        assert_eq!(f32::from_le_bytes(word(&bytes, 10)), 20.0);
        assert_eq!(f32::from_le_bytes(word(&bytes, 19)), 0.0);
        assert_eq!(f32::from_le_bytes(word(&bytes, 20)), 123.0);
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.mrc");
        let g = Grid3::from_fn([5, 6, 7], 2.5, |x, y, z| x as f64 * 0.5 - y as f64 + z as f64 * 0.25)
            .unwrap()
            .with_origin([10.0, -5.0, 0.0]);
        write_grid(&path, &g).unwrap();
        let back = read_grid(&path).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn reads_int16_mode() {
        let g = Grid3::zeros([2, 2, 1], 1.0).unwrap();
        let mut bytes = encode(&g, false);
        bytes.truncate(HEADER_LEN);
        bytes[12..16].copy_from_slice(&1i32.to_le_bytes());
        for v in [-3i16, 7, 0, 1000] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let (back, h) = decode(&bytes).unwrap();
        assert_eq!(h.mode, 1);
        assert_eq!(back.data(), &[-3.0, 7.0, 0.0, 1000.0]);
    }

    #[test]
    fn rejects_truncated() {
        let g = Grid3::zeros([4, 4, 4], 1.0).unwrap();
        let bytes = encode(&g, false);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode(&bytes[..100]).is_err());
    }
}
