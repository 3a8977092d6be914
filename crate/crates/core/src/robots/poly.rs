//! Polynomials of degree at most 3 in one unknown parameter.
//!
//! Used to split state-dependent expressions into coefficients of powers of
//! an unknown geometric constant.

use std::ops::{Add, Mul, Neg, Sub};

pub const DEGREE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Poly(pub [f64; DEGREE + 1]);

impl Poly {
    pub const ZERO: Poly = Poly([0.0; DEGREE + 1]);

    pub fn constant(c: f64) -> Self {
        Poly([c, 0.0, 0.0, 0.0])
    }

    /// `c0 + c1 a`.
    pub fn linear(c0: f64, c1: f64) -> Self {
        Poly([c0, c1, 0.0, 0.0])
    }

    pub fn coeff(&self, k: usize) -> f64 {
        self.0[k]
    }

    pub fn eval(&self, a: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * a + c)
    }

    pub fn scale(self, s: f64) -> Self {
        Poly(self.0.map(|c| c * s))
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(self, rhs: Poly) -> Poly {
        Poly(std::array::from_fn(|k| self.0[k] + rhs.0[k]))
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        Poly(std::array::from_fn(|k| self.0[k] - rhs.0[k]))
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1.0)
    }
}

/// Panics if the product exceeds [`DEGREE`].
impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        let mut out = [0.0; DEGREE + 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in rhs.0.iter().enumerate() {
                if *a == 0.0 || *b == 0.0 {
                    continue;
                }
                assert!(i + j <= DEGREE, "polynomial degree overflow");
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }
}

impl Mul<f64> for Poly {
    type Output = Poly;
    fn mul(self, rhs: f64) -> Poly {
        self.scale(rhs)
    }
}

/// 2x2 matrix of polynomials.
pub type PolyMat2 = [[Poly; 2]; 2];

pub fn outer(u: [Poly; 2], v: [Poly; 2]) -> PolyMat2 {
    [[u[0] * v[0], u[0] * v[1]], [u[1] * v[0], u[1] * v[1]]]
}

pub fn mat_add(a: &PolyMat2, b: &PolyMat2) -> PolyMat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] + b[i][j]))
}

pub fn mat_scale(a: &PolyMat2, s: Poly) -> PolyMat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] * s))
}

pub fn mat_vec(a: &PolyMat2, v: [f64; 2]) -> [Poly; 2] {
    std::array::from_fn(|i| a[i][0] * v[0] + a[i][1] * v[1])
}
