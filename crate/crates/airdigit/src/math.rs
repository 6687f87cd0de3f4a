//! Small fixed-size linear algebra shared by the kinematics and sensor models.

use std::ops::{Add, Mul, Neg, Sub};

/// 3-vector of doubles (positions in metres, accelerations in m/s², ...).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3 { x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, other: Vec3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Vec3) -> Vec3 {
        Vec3 {
            x: self.y * other.z - self.z * other.y,
            y: self.z * other.x - self.x * other.z,
            z: self.x * other.y - self.y * other.x,
        }
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Vec3 {
        let n = self.norm();
        if n == 0.0 {
            Vec3::ZERO
        } else {
            self * (1.0 / n)
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Unit quaternion (w, x, y, z) representing a rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn from_axis_angle(axis: Vec3, angle_rad: f64) -> Quat {
        let a = axis.normalized();
        let half = 0.5 * angle_rad;
        let s = half.sin();
        Quat { w: half.cos(), x: a.x * s, y: a.y * s, z: a.z * s }
    }

    pub fn norm(self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conj(self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product; `a * b` rotates by `b` first, then `a`.
    pub fn mul(self, o: Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    pub fn rotate(self, v: Vec3) -> Vec3 {
        // q v q* expanded via the cross-product form.
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Smallest rotation angle taking `self` to `other`, in radians.
    pub fn angle_to(self, other: Quat) -> f64 {
        let d = other.mul(self.conj()).normalized();
        let v = Vec3::new(d.x, d.y, d.z).norm();
        2.0 * v.atan2(d.w.abs())
    }

    /// Rotation vector (axis * angle) taking `self` to `other`, expressed in
    /// the shared outer frame.
    pub fn rotation_to(self, other: Quat) -> Vec3 {
        let mut d = other.mul(self.conj()).normalized();
        if d.w < 0.0 {
            d = Quat { w: -d.w, x: -d.x, y: -d.y, z: -d.z };
        }
        let v = Vec3::new(d.x, d.y, d.z);
        let s = v.norm();
        if s < 1e-12 {
            return v * 2.0;
        }
        let angle = 2.0 * s.atan2(d.w);
        v * (angle / s)
    }

    pub fn from_rotation_matrix(m: &[[f64; 3]; 3]) -> Quat {
        // Shepperd's method: pick the largest diagonal combination.
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m[2][1] - m[1][2]) / s,
                y: (m[0][2] - m[2][0]) / s,
                z: (m[1][0] - m[0][1]) / s,
            }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[2][1] - m[1][2]) / s,
                x: 0.25 * s,
                y: (m[0][1] + m[1][0]) / s,
                z: (m[0][2] + m[2][0]) / s,
            }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[0][2] - m[2][0]) / s,
                x: (m[0][1] + m[1][0]) / s,
                y: 0.25 * s,
                z: (m[1][2] + m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat {
                w: (m[1][0] - m[0][1]) / s,
                x: (m[0][2] + m[2][0]) / s,
                y: (m[1][2] + m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    pub fn to_rotation_matrix(self) -> [[f64; 3]; 3] {
        let Quat { w, x, y, z } = self.normalized();
        [
            [
                1.0 - 2.0 * (y * y + z * z),
                2.0 * (x * y - w * z),
                2.0 * (x * z + w * y),
            ],
            [
                2.0 * (x * y + w * z),
                1.0 - 2.0 * (x * x + z * z),
                2.0 * (y * z - w * x),
            ],
            [
                2.0 * (x * z - w * y),
                2.0 * (y * z + w * x),
                1.0 - 2.0 * (x * x + y * y),
            ],
        ]
    }
}

/// Column-major-free 4x4 homogeneous transform, indexed `[row][col]`.
pub type Mat4 = [[f64; 4]; 4];

pub const MAT4_IDENTITY: Mat4 = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 1.0],
];

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = 0.0;
            for (k, bk) in b.iter().enumerate() {
                acc += a[i][k] * bk[j];
            }
            out[i][j] = acc;
        }
    }
    out
}

pub fn mat4_translation(m: &Mat4) -> Vec3 {
    Vec3::new(m[0][3], m[1][3], m[2][3])
}

pub fn mat4_rotation(m: &Mat4) -> [[f64; 3]; 3] {
    [
        [m[0][0], m[0][1], m[0][2]],
        [m[1][0], m[1][1], m[1][2]],
        [m[2][0], m[2][1], m[2][2]],
    ]
}

/// Solve `A x = b` for a 6x6 system by Gaussian elimination with partial
/// pivoting. Returns `None` for a numerically singular system.
pub fn solve6(a: &[[f64; 6]; 6], b: &[f64; 6]) -> Option<[f64; 6]> {
    let mut m = *a;
    let mut rhs = *b;
    for col in 0..6 {
        let mut pivot = col;
        for row in col + 1..6 {
            if m[row][col].abs() > m[pivot][col].abs() {
                pivot = row;
            }
        }
        if m[pivot][col].abs() < 1e-14 {
            return None;
        }
        m.swap(col, pivot);
        rhs.swap(col, pivot);
        for row in col + 1..6 {
            let f = m[row][col] / m[col][col];
            for k in col..6 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 6];
    for col in (0..6).rev() {
        let mut acc = rhs[col];
        for k in col + 1..6 {
            acc -= m[col][k] * x[k];
        }
        x[col] = acc / m[col][col];
    }
    Some(x)
}

/// Deterministic seed derivation: splitmix64 over the root seed and a path of
/// context labels, so sibling samples get independent streams.
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut state = root ^ 0x9e37_79b9_7f4a_7c15;
    let mut mix = |v: u64| {
        state = state.wrapping_add(v).wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        state = z ^ (z >> 31);
    };
    for &p in path {
        mix(p);
    }
    state
}

/// FNV-1a over raw bytes; used for config digests and parameter fingerprints.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// FNV-1a over the bit patterns of a slice of doubles.
pub fn fnv1a64_f64(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_bits().to_le_bytes() {
            hash ^= b as u64;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b} (tol {tol})");
    }

    #[test]
    fn quat_rotates_like_its_matrix() {
        let q = Quat::from_axis_angle(Vec3::new(0.3, -0.7, 0.2), 1.234);
        let m = q.to_rotation_matrix();
        let v = Vec3::new(0.5, -1.5, 2.0);
        let qv = q.rotate(v);
        let mv = Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        );
        assert_close(qv.x, mv.x, 1e-12);
        assert_close(qv.y, mv.y, 1e-12);
        assert_close(qv.z, mv.z, 1e-12);
    }

    #[test]
    fn quat_matrix_round_trip() {
        let q = Quat::from_axis_angle(Vec3::new(1.0, 2.0, -0.5), 2.6);
        let back = Quat::from_rotation_matrix(&q.to_rotation_matrix());
        // q and -q encode the same rotation.
        let sign = if q.w * back.w < 0.0 { -1.0 } else { 1.0 };
        assert_close(q.w, sign * back.w, 1e-12);
        assert_close(q.x, sign * back.x, 1e-12);
        assert_close(q.y, sign * back.y, 1e-12);
        assert_close(q.z, sign * back.z, 1e-12);
    }

    #[test]
    fn quat_angle_between() {
        let a = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.2);
        let b = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), 0.2 + FRAC_PI_2);
        assert_close(a.angle_to(b), FRAC_PI_2, 1e-12);
        assert_close(a.angle_to(a), 0.0, 1e-12);
    }

    #[test]
    fn quat_composition_order() {
        // Rotate x-hat by 90 deg about z, then 90 deg about the new-frame-free
        // world x axis: q_total = q_x * q_z.
        let qz = Quat::from_axis_angle(Vec3::new(0.0, 0.0, 1.0), FRAC_PI_2);
        let qx = Quat::from_axis_angle(Vec3::new(1.0, 0.0, 0.0), FRAC_PI_2);
        let v = qx.mul(qz).rotate(Vec3::new(1.0, 0.0, 0.0));
        assert_close(v.x, 0.0, 1e-12);
        assert_close(v.y, 0.0, 1e-12);
        assert_close(v.z, 1.0, 1e-12);
    }

    #[test]
    fn solve6_recovers_known_solution() {
        let mut a = [[0.0; 6]; 6];
        for (i, row) in a.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = ((i * 7 + j * 3 + 1) % 10) as f64 + if i == j { 12.0 } else { 0.0 };
            }
        }
        let x_true = [1.0, -2.0, 0.5, 3.0, -0.25, 4.0];
        let mut b = [0.0; 6];
        for i in 0..6 {
            b[i] = (0..6).map(|j| a[i][j] * x_true[j]).sum();
        }
        let x = solve6(&a, &b).unwrap();
        for i in 0..6 {
            assert_close(x[i], x_true[i], 1e-9);
        }
    }

    #[test]
    fn rotation_to_recovers_axis_angle() {
        let from = Quat::from_axis_angle(Vec3::new(0.1, 0.9, -0.3), 0.7);
        let delta = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 0.25);
        let to = delta.mul(from);
        let rv = from.rotation_to(to);
        assert_close(rv.norm(), 0.25, 1e-12);
        assert_close(rv.y, 0.25, 1e-12);
    }

    #[test]
    fn derive_seed_is_stable_and_spread() {
        let a = derive_seed(42, &[1, 2, 3]);
        let b = derive_seed(42, &[1, 2, 3]);
        let c = derive_seed(42, &[1, 2, 4]);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rotate_half_turn() {
        let q = Quat::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), PI);
        let v = q.rotate(Vec3::new(1.0, 0.0, 0.0));
        assert_close(v.x, -1.0, 1e-12);
        assert_close(v.z, 0.0, 1e-12);
    }
}
