//! Explicit univalent maps of the closed unit disk, their derivatives and
//! Newton inverses, and the pullback of `U_λ` through such a map.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::{u_lambda_at, ScalarField};
use crate::geometry::{segments_cross, Point};
use crate::mesh::Mesh;

/// Number of boundary samples used by the univalence certificate.
pub const BOUNDARY_SAMPLES: usize = 720;
/// Crossing / coincidence tolerance of the univalence certificate.
pub const UNIVALENCE_TOL: f64 = 1e-9;

const UNIT_DISK_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum ConformalMap {
    /// `Φ(z) = δ e^{iθ} z`.
    ScaledRotation { delta: f64, theta: f64 },
    /// `Φ(z) = Σ_k c_k z^k`, `coeffs[0]` multiplying `z`.
    Polynomial { coeffs: Vec<Complex64> },
    /// `Φ(z) = s e^{iθ} (z - a) / (1 - conj(a) z)` with `|a| < 1`.
    Mobius { a: Complex64, theta: f64, scale: f64 },
}

pub fn to_complex(p: Point) -> Complex64 {
    Complex64::new(p.x, p.y)
}

pub fn to_point(z: Complex64) -> Point {
    Point::new(z.re, z.im)
}

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap::ScaledRotation { delta: 1.0, theta: 0.0 }
    }

    pub fn scaled_rotation(delta: f64, theta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() || !theta.is_finite() {
            return Err(Error::invalid(format!("scaled rotation needs δ > 0, got {delta}")));
        }
        Ok(ConformalMap::ScaledRotation { delta, theta })
    }

    /// Real coefficients of `z, z², ...`.
    pub fn polynomial(coeffs: &[f64]) -> Result<Self> {
        Self::complex_polynomial(coeffs.iter().map(|&c| Complex64::new(c, 0.0)).collect())
    }

    pub fn complex_polynomial(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs[0].norm() == 0.0 || coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("polynomial map needs a finite nonzero linear coefficient"));
        }
        Ok(ConformalMap::Polynomial { coeffs })
    }

    pub fn mobius(a: Complex64, theta: f64, scale: f64) -> Result<Self> {
        if !(a.norm() < 1.0) || !(scale > 0.0) {
            return Err(Error::invalid("Möbius map needs |a| < 1 and scale > 0"));
        }
        Ok(ConformalMap::Mobius { a, theta, scale })
    }

    /// `s·Φ`, used when the image domain is dilated.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            ConformalMap::ScaledRotation { delta, theta } => ConformalMap::ScaledRotation { delta: delta * s, theta: *theta },
            ConformalMap::Polynomial { coeffs } => ConformalMap::Polynomial {
                coeffs: coeffs.iter().map(|c| c * s).collect(),
            },
            ConformalMap::Mobius { a, theta, scale } => ConformalMap::Mobius { a: *a, theta: *theta, scale: scale * s },
        }
    }

    pub fn is_scaled_rotation(&self) -> bool {
        match self {
            ConformalMap::ScaledRotation { .. } => true,
            ConformalMap::Polynomial { coeffs } => coeffs[1..].iter().all(|c| c.norm() == 0.0),
            ConformalMap::Mobius { a, .. } => a.norm() == 0.0,
        }
    }

    pub(crate) fn eval_unchecked(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalMap::ScaledRotation { delta, theta } => Complex64::from_polar(*delta, *theta) * z,
            ConformalMap::Polynomial { coeffs } => {
                // Horner on z·(c1 + c2 z + ...)
                let mut acc = Complex64::new(0.0, 0.0);
                for c in coeffs.iter().rev() {
                    acc = acc * z + c;
                }
                acc * z
            }
            ConformalMap::Mobius { a, theta, scale } => {
                Complex64::from_polar(*scale, *theta) * (z - a) / (1.0 - a.conj() * z)
            }
        }
    }

    pub(crate) fn derivative_unchecked(&self, z: Complex64) -> Complex64 {
        match self {
            ConformalMap::ScaledRotation { delta, theta } => Complex64::from_polar(*delta, *theta),
            ConformalMap::Polynomial { coeffs } => {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, c) in coeffs.iter().enumerate().rev() {
                    acc = acc * z + c * (k as f64 + 1.0);
                }
                acc
            }
            ConformalMap::Mobius { a, theta, scale } => {
                let d = 1.0 - a.conj() * z;
                Complex64::from_polar(*scale, *theta) * (1.0 - a.norm_sqr()) / (d * d)
            }
        }
    }

    fn check_disk(z: Complex64) -> Result<()> {
        if z.norm() > 1.0 + UNIT_DISK_SLACK {
            return Err(Error::invalid(format!("|z| = {} exceeds 1", z.norm())));
        }
        Ok(())
    }

    pub fn evaluate(&self, z: Complex64) -> Result<Complex64> {
        Self::check_disk(z)?;
        Ok(self.eval_unchecked(z))
    }

    pub fn derivative(&self, z: Complex64) -> Result<Complex64> {
        Self::check_disk(z)?;
        Ok(self.derivative_unchecked(z))
    }

    pub fn apply(&self, p: Point) -> Point {
        to_point(self.eval_unchecked(to_complex(p)))
    }

    /// Newton inverse `Ψ(x) = Φ⁻¹(x)`, seeded at `(x - Φ(0)) / Φ'(0)`.
    pub fn invert(&self, x: Complex64, tol: f64) -> Result<Complex64> {
        let not_in_image = || Error::NotInImage { x: x.re, y: x.im };
        let origin = self.eval_unchecked(Complex64::new(0.0, 0.0));
        let mut z = (x - origin) / self.derivative_unchecked(Complex64::new(0.0, 0.0));
        let mut res = (self.eval_unchecked(z) - x).norm();
        let mut outside = 0;
        for _ in 0..100 {
            if res <= tol {
                break;
            }
            let d = self.derivative_unchecked(z);
            if d.norm() == 0.0 {
                return Err(not_in_image());
            }
            let step = (self.eval_unchecked(z) - x) / d;
            let mut damp = 1.0;
            let mut next = z - step;
            let mut next_res = (self.eval_unchecked(next) - x).norm();
            while next_res > res && damp > 1e-6 {
                damp *= 0.5;
                next = z - step * damp;
                next_res = (self.eval_unchecked(next) - x).norm();
            }
            z = next;
            res = next_res;
            if z.norm() > 1.0 + 1e-6 {
                outside += 1;
                if outside >= 5 {
                    return Err(not_in_image());
                }
            } else {
                outside = 0;
            }
        }
        if res > tol || z.norm() > 1.0 + 1e-8 {
            return Err(not_in_image());
        }
        Ok(z)
    }

    /// Largest `|Φ'|` over a polar sample of the closed disk.
    pub fn max_abs_derivative(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..=32 {
            let r = i as f64 / 32.0;
            for j in 0..BOUNDARY_SAMPLES / 4 {
                let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / (BOUNDARY_SAMPLES / 4) as f64);
                m = m.max(self.derivative_unchecked(z).norm());
            }
        }
        m
    }

    /// Sampled univalence certificate: `|Φ'| > 0` on a polar grid of the
    /// closed disk, and the image of 720 boundary points is a simple closed
    /// polygon with winding number one around `Φ(0)`.
    pub fn univalence_check(&self) -> Result<()> {
        for i in 0..=64 {
            let r = i as f64 / 64.0;
            for j in 0..BOUNDARY_SAMPLES {
                let z = Complex64::from_polar(r, 2.0 * PI * j as f64 / BOUNDARY_SAMPLES as f64);
                if self.derivative_unchecked(z).norm() <= UNIVALENCE_TOL {
                    return Err(Error::NonUnivalent(format!("Φ' vanishes near z = {z}")));
                }
            }
        }
        let n = BOUNDARY_SAMPLES;
        let pts: Vec<Point> = (0..n)
            .map(|j| to_point(self.eval_unchecked(Complex64::from_polar(1.0, 2.0 * PI * j as f64 / n as f64))))
            .collect();
        for i in 0..n {
            let (a, b) = (pts[i], pts[(i + 1) % n]);
            for j in i + 2..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                let (c, d) = (pts[j], pts[(j + 1) % n]);
                if segments_cross(a, b, c, d) || a.dist(c) <= UNIVALENCE_TOL {
                    return Err(Error::NonUnivalent(format!("boundary image self-intersects near samples {i} and {j}")));
                }
            }
        }
        let centre = to_point(self.eval_unchecked(Complex64::new(0.0, 0.0)));
        let mut turn = 0.0;
        for i in 0..n {
            let u = pts[i] - centre;
            let v = pts[(i + 1) % n] - centre;
            turn += u.cross(v).atan2(u.dot(v));
        }
        let winding = (turn / (2.0 * PI)).round() as i64;
        if winding != 1 {
            return Err(Error::NonUnivalent(format!("boundary winding number {winding}")));
        }
        Ok(())
    }
}

impl fmt::Display for ConformalMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConformalMap::ScaledRotation { delta, theta } => write!(f, "scale:{delta},{theta}"),
            ConformalMap::Polynomial { coeffs } => {
                write!(f, "poly:")?;
                for (i, c) in coeffs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{}", c.re)?;
                }
                Ok(())
            }
            ConformalMap::Mobius { a, theta, scale } => write!(f, "mobius:{},{},{theta},{scale}", a.re, a.im),
        }
    }
}

impl FromStr for ConformalMap {
    type Err = Error;

    /// `poly:c1,c2,...`, `scale:δ,θ` or `mobius:re(a),im(a),θ,s`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("map spec '{s}' needs a 'kind:' prefix")))?;
        let nums: Vec<f64> = rest
            .split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number '{t}' in map spec: {e}"))))
            .collect::<Result<_>>()?;
        match (kind.trim(), nums.as_slice()) {
            ("poly", cs) if !cs.is_empty() => ConformalMap::polynomial(cs),
            ("scale", [d, t]) => ConformalMap::scaled_rotation(*d, *t),
            ("scale", [d]) => ConformalMap::scaled_rotation(*d, 0.0),
            ("mobius", [ar, ai, t, sc]) => ConformalMap::mobius(Complex64::new(*ar, *ai), *t, *sc),
            _ => Err(Error::Config(format!("unrecognized map spec '{s}'"))),
        }
    }
}

/// Nodal pullback `w(x) = U_λ(Ψ(x)) - 2 ln|Φ'(Ψ(x))|` on a mesh of `Φ(B₁)`.
pub fn pullback_field(map: &ConformalMap, lambda: f64, mesh: &std::sync::Arc<Mesh>) -> Result<ScalarField> {
    if !(lambda > 0.0) {
        return Err(Error::invalid("λ must be positive"));
    }
    let values = mesh
        .vertices()
        .iter()
        .map(|&p| {
            let z = map.invert(to_complex(p), 1e-13)?;
            let dphi = map.derivative_unchecked(z);
            Ok(u_lambda_at(lambda, to_point(z)) - 2.0 * dphi.norm().ln())
        })
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::new(mesh.clone(), values)
}

/// The equality-case eigenfunction transported to `Φ(B₁)`:
/// `x ↦ (1 - |Ψ(x)|²) / (1 + |Ψ(x)|²)`.
pub fn transported_profile(map: &ConformalMap, mesh: &std::sync::Arc<Mesh>) -> Result<ScalarField> {
    let values = mesh
        .vertices()
        .iter()
        .map(|&p| {
            let r2 = map.invert(to_complex(p), 1e-13)?.norm_sqr();
            Ok(((1.0 - r2) / (1.0 + r2)).max(0.0))
        })
        .collect::<Result<Vec<f64>>>()?;
    ScalarField::new(mesh.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn scaled_rotation_values() {
        let m = ConformalMap::scaled_rotation(2.0, 0.0).unwrap();
        assert!((m.evaluate(c(0.5, 0.0)).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
        assert!((m.derivative(c(0.3, -0.2)).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
        assert!((m.invert(c(1.0, 0.0), 1e-14).unwrap() - c(0.5, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn quadratic_values_and_round_trip() {
        let m = ConformalMap::polynomial(&[1.0, 0.3]).unwrap();
        assert!((m.evaluate(c(0.5, 0.0)).unwrap() - c(0.575, 0.0)).norm() < 1e-15);
        assert!((m.derivative(c(0.5, 0.0)).unwrap() - c(1.3, 0.0)).norm() < 1e-15);
        assert!((m.invert(c(0.575, 0.0), 1e-14).unwrap() - c(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn outside_disk_rejected() {
        let m = ConformalMap::identity();
        assert!(m.evaluate(c(1.1, 0.0)).is_err());
        assert!(m.derivative(c(0.0, -1.5)).is_err());
        assert!(matches!(m.invert(c(5.0, 0.0), 1e-12), Err(Error::NotInImage { .. })));
        let q = ConformalMap::polynomial(&[1.0, 0.3]).unwrap();
        assert!(matches!(q.invert(c(-3.0, 2.0), 1e-12), Err(Error::NotInImage { .. })));
    }

    #[test]
    fn univalence_certificate() {
        assert!(ConformalMap::polynomial(&[1.0, 0.3]).unwrap().univalence_check().is_ok());
        assert!(ConformalMap::polynomial(&[1.0, 0.5]).unwrap().univalence_check().is_err());
        assert!(ConformalMap::polynomial(&[1.0, 0.8]).unwrap().univalence_check().is_err());
        assert!(ConformalMap::mobius(c(0.3, 0.2), 0.4, 1.5).unwrap().univalence_check().is_ok());
        // z + z^3 has Φ' = 0 at ±i/√3, inside the disk
        assert!(ConformalMap::polynomial(&[1.0, 0.0, 1.0]).unwrap().univalence_check().is_err());
    }

    #[test]
    fn spec_strings_parse() {
        let m: ConformalMap = "poly:1,0.3".parse().unwrap();
        assert_eq!(m, ConformalMap::polynomial(&[1.0, 0.3]).unwrap());
        let s: ConformalMap = "scale:2,0.7853981633974483".parse().unwrap();
        assert_eq!(s, ConformalMap::scaled_rotation(2.0, std::f64::consts::FRAC_PI_4).unwrap());
        assert!("poly:".parse::<ConformalMap>().is_err());
        assert!("warp:1".parse::<ConformalMap>().is_err());
        assert_eq!(m.to_string().parse::<ConformalMap>().unwrap(), m);
    }

    #[test]
    fn mobius_derivative_matches_difference_quotient() {
        let m = ConformalMap::mobius(c(0.2, -0.4), 0.3, 1.7).unwrap();
        let z = c(0.1, 0.35);
        let h = 1e-6;
        let fd = (m.eval_unchecked(z + h) - m.eval_unchecked(z - h)) / (2.0 * h);
        assert!((fd - m.derivative_unchecked(z)).norm() < 1e-8);
    }
}
