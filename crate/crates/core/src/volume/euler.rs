use serde::{Deserialize, Serialize};

/// 3×3 rotation matrix, row-major.
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

pub fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2])
}

pub fn transpose(m: &Mat3) -> Mat3 {
    let mut t = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = m[j][i];
        }
    }
    t
}

pub fn rot_x(deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    [[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]]
}

pub fn rot_y(deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    [[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]]
}

pub fn rot_z(deg: f64) -> Mat3 {
    let (s, c) = deg.to_radians().sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

/// Rotation angle (degrees) of a rotation matrix.
pub fn rotation_angle(m: &Mat3) -> f64 {
    let tr = m[0][0] + m[1][1] + m[2][2];
    ((tr - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
}

pub fn max_abs_diff(a: &Mat3, b: &Mat3) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            d = d.max((a[i][j] - b[i][j]).abs());
        }
    }
    d
}

/// Intrinsic Z-X-Z Euler angles in degrees: `R = Rz(phi) · Rx(theta) · Rz(psi)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EulerZXZ {
    pub phi: f64,
    pub theta: f64,
    pub psi: f64,
}

impl EulerZXZ {
    pub const IDENTITY: EulerZXZ = EulerZXZ { phi: 0.0, theta: 0.0, psi: 0.0 };

    pub fn new(phi: f64, theta: f64, psi: f64) -> Self {
        Self { phi, theta, psi }
    }

    pub fn to_matrix(&self) -> Mat3 {
        mat_mul(&mat_mul(&rot_z(self.phi), &rot_x(self.theta)), &rot_z(self.psi))
    }

    /// Decomposes a rotation matrix; `theta` lands in `[0, 180]`. At the
    /// gimbal poles (`sin theta == 0`) `psi` is set to zero.
    pub fn from_matrix(m: &Mat3) -> Self {
        let st = m[2][0].hypot(m[2][1]);
        let theta = st.atan2(m[2][2]);
        if st > 1e-9 {
            let phi = m[0][2].atan2(-m[1][2]);
            let psi = m[2][0].atan2(m[2][1]);
            Self { phi: phi.to_degrees(), theta: theta.to_degrees(), psi: psi.to_degrees() }
        } else {
            let phi = m[1][0].atan2(m[0][0]);
            Self { phi: phi.to_degrees(), theta: theta.to_degrees(), psi: 0.0 }
        }
    }

    pub fn inverse(&self) -> Self {
        Self { phi: -self.psi, theta: -self.theta, psi: -self.phi }
    }

    /// Rotation applying `other` first, then `self`.
    pub fn compose(&self, other: &EulerZXZ) -> Self {
        Self::from_matrix(&mat_mul(&self.to_matrix(), &other.to_matrix()))
    }
}

/// Unit quaternion `(w, x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn normalized(self) -> Self {
        let n = (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt();
        Self { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn to_matrix(&self) -> Mat3 {
        let Quaternion { w, x, y, z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }
}
