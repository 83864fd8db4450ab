use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Three complex Cartesian components of a photon amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexVec3 {
    pub x: Complex64,
    pub y: Complex64,
    pub z: Complex64,
}

impl ComplexVec3 {
    pub const ZERO: ComplexVec3 = ComplexVec3 {
        x: Complex64::new(0.0, 0.0),
        y: Complex64::new(0.0, 0.0),
        z: Complex64::new(0.0, 0.0),
    };

    pub fn new(x: Complex64, y: Complex64, z: Complex64) -> Self {
        Self { x, y, z }
    }

    /// `A * s` for a real amplitude vector `A` and complex scalar `s`.
    pub fn from_real_scaled(a: [f64; 3], s: Complex64) -> Self {
        Self::new(s * a[0], s * a[1], s * a[2])
    }

    pub fn components(&self) -> [Complex64; 3] {
        [self.x, self.y, self.z]
    }

    /// `|x|^2 + |y|^2 + |z|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.x.norm_sqr() + self.y.norm_sqr() + self.z.norm_sqr()
    }

    /// Unconjugated bilinear product `x x' + y y' + z z'`.
    pub fn dot(&self, other: &ComplexVec3) -> Complex64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn is_finite(&self) -> bool {
        self.components()
            .iter()
            .all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

impl Add for ComplexVec3 {
    type Output = ComplexVec3;
    fn add(self, o: ComplexVec3) -> ComplexVec3 {
        ComplexVec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for ComplexVec3 {
    type Output = ComplexVec3;
    fn sub(self, o: ComplexVec3) -> ComplexVec3 {
        ComplexVec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<Complex64> for ComplexVec3 {
    type Output = ComplexVec3;
    fn mul(self, s: Complex64) -> ComplexVec3 {
        ComplexVec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<f64> for ComplexVec3 {
    type Output = ComplexVec3;
    fn mul(self, s: f64) -> ComplexVec3 {
        ComplexVec3::new(self.x * s, self.y * s, self.z * s)
    }
}
