//! Rigid-transform arithmetic in the dataset convention.
//!
//! Quaternions are stored scalar-last, `(x, y, z, w)`, matching the 7-value
//! pose vector `[tx, ty, tz, qx, qy, qz, qw]`. Products are Hamilton products.
//! A [`Pose`] maps camera coordinates into the world frame; no handedness
//! conversion is ever applied.

use core::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// 3-vector in centimeters (or dimensionless for axes).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(self.y * o.z - self.z * o.y, self.z * o.x - self.x * o.z, self.x * o.y - self.y * o.x)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
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

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

/// Orthonormal 3×3 matrix with determinant +1, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(pub [[f64; 3]; 3]);

impl RotationMatrix {
    pub const IDENTITY: RotationMatrix = RotationMatrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(c0: Vec3, c1: Vec3, c2: Vec3) -> Self {
        RotationMatrix([[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]])
    }

    pub fn column(&self, j: usize) -> Vec3 {
        Vec3::new(self.0[0][j], self.0[1][j], self.0[2][j])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1] + self.0[2][2]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        RotationMatrix([[m[0][0], m[1][0], m[2][0]], [m[0][1], m[1][1], m[2][1]], [m[0][2], m[1][2], m[2][2]]])
    }

    pub fn mul_vec(&self, v: Vec3) -> Vec3 {
        let m = &self.0;
        Vec3::new(
            m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z,
            m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
            m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z,
        )
    }

    /// Largest absolute entry of `R·Rᵀ − I`.
    pub fn orthonormality_error(&self) -> f64 {
        let p = *self * self.transpose();
        let mut worst = 0.0f64;
        for (i, row) in p.0.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max(libm::fabs(v - target));
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &RotationMatrix) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max(libm::fabs(self.0[i][j] - other.0[i][j]));
            }
        }
        worst
    }
}

impl Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, o: RotationMatrix) -> RotationMatrix {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        RotationMatrix(out)
    }
}

/// Unit quaternion, scalar-last.
///
/// Every constructor and product renormalizes, so the norm stays within
/// machine precision of one.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Quaternion {
    x: f64,
    y: f64,
    z: f64,
    w: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { x: 0.0, y: 0.0, z: 0.0, w: 1.0 };

    /// Builds a unit quaternion from scalar-last components, normalizing.
    pub fn new(x: f64, y: f64, z: f64, w: f64) -> Result<Self> {
        if !(x.is_finite() && y.is_finite() && z.is_finite() && w.is_finite()) {
            return Err(Error::InvalidQuaternion);
        }
        let n = libm::sqrt(x * x + y * y + z * z + w * w);
        if !n.is_finite() || n <= 0.0 {
            return Err(Error::InvalidQuaternion);
        }
        Ok(Quaternion { x: x / n, y: y / n, z: z / n, w: w / n })
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Result<Self> {
        let a = axis.normalized().ok_or(Error::InvalidQuaternion)?;
        let (s, c) = (libm::sin(angle * 0.5), libm::cos(angle * 0.5));
        Quaternion::new(a.x * s, a.y * s, a.z * s, c)
    }

    /// Rotation vector (axis × angle in radians); zero gives identity.
    pub fn from_rotation_vector(v: Vec3) -> Self {
        let angle = v.norm();
        match v.normalized() {
            Some(axis) if angle > 0.0 => Quaternion::from_axis_angle(axis, angle).unwrap_or(Quaternion::IDENTITY),
            _ => Quaternion::IDENTITY,
        }
    }

    /// Shepperd's method; the input is assumed orthonormal.
    pub fn from_matrix(r: &RotationMatrix) -> Result<Self> {
        let m = &r.0;
        let t = r.trace();
        let (x, y, z, w);
        if t > m[0][0] && t > m[1][1] && t > m[2][2] {
            let s = libm::sqrt(1.0 + t) * 2.0;
            w = 0.25 * s;
            x = (m[2][1] - m[1][2]) / s;
            y = (m[0][2] - m[2][0]) / s;
            z = (m[1][0] - m[0][1]) / s;
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = libm::sqrt(1.0 + m[0][0] - m[1][1] - m[2][2]) * 2.0;
            w = (m[2][1] - m[1][2]) / s;
            x = 0.25 * s;
            y = (m[0][1] + m[1][0]) / s;
            z = (m[0][2] + m[2][0]) / s;
        } else if m[1][1] > m[2][2] {
            let s = libm::sqrt(1.0 + m[1][1] - m[0][0] - m[2][2]) * 2.0;
            w = (m[0][2] - m[2][0]) / s;
            x = (m[0][1] + m[1][0]) / s;
            y = 0.25 * s;
            z = (m[1][2] + m[2][1]) / s;
        } else {
            let s = libm::sqrt(1.0 + m[2][2] - m[0][0] - m[1][1]) * 2.0;
            w = (m[1][0] - m[0][1]) / s;
            x = (m[0][2] + m[2][0]) / s;
            y = (m[1][2] + m[2][1]) / s;
            z = 0.25 * s;
        }
        Quaternion::new(x, y, z, w)
    }

    pub fn x(&self) -> f64 {
        self.x
    }
    pub fn y(&self) -> f64 {
        self.y
    }
    pub fn z(&self) -> f64 {
        self.z
    }
    pub fn w(&self) -> f64 {
        self.w
    }

    /// Components in storage order `[x, y, z, w]`.
    pub fn to_array(&self) -> [f64; 4] {
        [self.x, self.y, self.z, self.w]
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.x * self.x + self.y * self.y + self.z * self.z + self.w * self.w)
    }

    pub fn conjugate(&self) -> Self {
        Quaternion { x: -self.x, y: -self.y, z: -self.z, w: self.w }
    }

    /// Inverse rotation (the conjugate of a unit quaternion).
    pub fn inverse(&self) -> Self {
        self.conjugate()
    }

    /// Representative with `w ≥ 0` (and, when `w = 0`, first nonzero imaginary
    /// component positive). `q` and `-q` canonicalize identically.
    pub fn canonical(&self) -> Self {
        let flip = if self.w != 0.0 {
            self.w < 0.0
        } else {
            [self.x, self.y, self.z].into_iter().find(|c| *c != 0.0).is_some_and(|c| c < 0.0)
        };
        if flip {
            Quaternion { x: -self.x, y: -self.y, z: -self.z, w: -self.w }
        } else {
            *self
        }
    }

    /// Largest component difference after canonicalizing both sides.
    pub fn max_abs_diff(&self, other: &Quaternion) -> f64 {
        let (a, b) = (self.canonical().to_array(), other.canonical().to_array());
        a.iter().zip(b.iter()).map(|(p, q)| libm::fabs(p - q)).fold(0.0, f64::max)
    }

    pub fn to_matrix(&self) -> RotationMatrix {
        let Quaternion { x, y, z, w } = *self;
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, xz, yz) = (x * y, x * z, y * z);
        let (wx, wy, wz) = (w * x, w * y, w * z);
        RotationMatrix([
            [1.0 - 2.0 * (yy + zz), 2.0 * (xy - wz), 2.0 * (xz + wy)],
            [2.0 * (xy + wz), 1.0 - 2.0 * (xx + zz), 2.0 * (yz - wx)],
            [2.0 * (xz - wy), 2.0 * (yz + wx), 1.0 - 2.0 * (xx + yy)],
        ])
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v + 2w(u×v) + 2u×(u×v)
        let u = Vec3::new(self.x, self.y, self.z);
        let t = u.cross(v) * 2.0;
        v + t * self.w + u.cross(t)
    }

    /// Geodesic rotation angle in degrees, in `[0, 180]`, taken from the
    /// trace of the rotation matrix.
    pub fn angle_deg(&self) -> f64 {
        rotation_angle_deg(self)
    }
}

impl Mul for Quaternion {
    type Output = Quaternion;

    /// Hamilton product, renormalized.
    fn mul(self, o: Quaternion) -> Quaternion {
        let (a, b) = (self, o);
        let x = a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y;
        let y = a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x;
        let z = a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w;
        let w = a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z;
        // Product of two unit quaternions has norm ~1, never zero.
        Quaternion::new(x, y, z, w).unwrap_or(Quaternion::IDENTITY)
    }
}

/// Converts a unit quaternion into its rotation matrix.
pub fn quat_to_matrix(q: &Quaternion) -> RotationMatrix {
    q.to_matrix()
}

/// `arccos(clamp((trace(R) − 1) / 2, −1, 1))` in degrees.
pub fn rotation_angle_deg(q: &Quaternion) -> f64 {
    let c = ((q.to_matrix().trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    libm::acos(c).to_degrees()
}

/// Rigid transform: `p_world = R · p_camera + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: Quaternion,
}

impl Default for Pose {
    fn default() -> Self {
        Pose::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose { translation: Vec3::ZERO, rotation: Quaternion::IDENTITY };

    pub fn new(translation: Vec3, rotation: Quaternion) -> Result<Self> {
        if !translation.is_finite() {
            return Err(Error::InvalidPose);
        }
        Ok(Pose { translation, rotation })
    }

    pub fn from_translation(t: Vec3) -> Self {
        Pose { translation: t, rotation: Quaternion::IDENTITY }
    }

    pub fn from_rotation(q: Quaternion) -> Self {
        Pose { translation: Vec3::ZERO, rotation: q }
    }

    /// Parses the 7-value layout `[tx, ty, tz, qx, qy, qz, qw]`.
    pub fn from_vector(v: [f64; 7]) -> Result<Self> {
        let q = Quaternion::new(v[3], v[4], v[5], v[6])?;
        Pose::new(Vec3::new(v[0], v[1], v[2]), q)
    }

    pub fn to_vector(&self) -> [f64; 7] {
        let t = self.translation;
        let q = self.rotation;
        [t.x, t.y, t.z, q.x, q.y, q.z, q.w]
    }

    /// `self` followed by `other`: rotation `Ra·Rb`, translation `Ra·tb + ta`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            translation: self.rotation.rotate(other.translation) + self.translation,
            rotation: self.rotation * other.rotation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let r_inv = self.rotation.inverse();
        Pose { translation: -r_inv.rotate(self.translation), rotation: r_inv }
    }

    /// Transforms a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        self.rotation.rotate(p) + self.translation
    }

    /// Same rotation, translation multiplied by `s`.
    pub fn scale_translation(&self, s: f64) -> Pose {
        Pose { translation: self.translation * s, rotation: self.rotation }
    }

    /// Row-major 4×4 homogeneous matrix.
    pub fn to_homogeneous(&self) -> [[f64; 4]; 4] {
        let r = self.rotation.to_matrix().0;
        let t = self.translation;
        [
            [r[0][0], r[0][1], r[0][2], t.x],
            [r[1][0], r[1][1], r[1][2], t.y],
            [r[2][0], r[2][1], r[2][2], t.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    /// Worst component difference in translation and (canonical) rotation.
    pub fn max_abs_diff(&self, other: &Pose) -> f64 {
        let dt = self.translation - other.translation;
        libm::fabs(dt.x).max(libm::fabs(dt.y)).max(libm::fabs(dt.z)).max(self.rotation.max_abs_diff(&other.rotation))
    }
}

impl Mul for Pose {
    type Output = Pose;
    fn mul(self, o: Pose) -> Pose {
        self.compose(&o)
    }
}

/// Free-function form of [`Pose::compose`].
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    a.compose(b)
}

/// Free-function form of [`Pose::inverse`].
pub fn inverse(p: &Pose) -> Pose {
    p.inverse()
}
