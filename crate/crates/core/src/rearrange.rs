//! Radial decreasing rearrangement of a positive field with respect to the
//! measures `e^w dx` (source) and `e^U dx`, `U = U₁` (target), and the
//! Rayleigh-quotient comparison built on it.

use crate::error::{Error, Result};
use crate::fields::{u_lambda_at, ScalarField};
use crate::geometry::Point;
use crate::levelset::{contour_integrals, level_stats};
use crate::spectral::{assemble_stiffness, assemble_weighted_mass};
use crate::EIGHT_PI;

const PI: f64 = std::f64::consts::PI;

pub const DEFAULT_LEVELS: usize = 200;

/// Three-point Gauss-Legendre rule on `[0, 1]`.
const GAUSS_3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// `e^U` at radius `r`.
fn target_density(r: f64) -> f64 {
    u_lambda_at(1.0, Point::new(r, 0.0)).exp()
}

/// Radius of the `e^U` disk of mass `m`: `√(8m / (8π - m))`.
pub fn radius_for_mass(m: f64) -> f64 {
    (8.0 * m / (EIGHT_PI - m)).sqrt()
}

/// `∫_{B_R} e^U` by composite Gauss quadrature, independent of the closed
/// form used to build the radii.
fn target_mass_numeric(radius: f64) -> f64 {
    let pieces = 64;
    let dr = radius / pieces as f64;
    let mut s = 0.0;
    for k in 0..pieces {
        for (x, wt) in GAUSS_3 {
            let r = (k as f64 + x) * dr;
            s += wt * dr * 2.0 * PI * r * target_density(r);
        }
    }
    s
}

/// Pool-adjacent-violators projection onto nonincreasing sequences.
fn isotonic_nonincreasing(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (b, nb) = blocks[blocks.len() - 1];
            let (a, na) = blocks[blocks.len() - 2];
            if a >= b {
                break;
            }
            blocks.pop();
            let n = na + nb;
            *blocks.last_mut().unwrap() = ((a * na as f64 + b * nb as f64) / n as f64, n);
        }
    }
    blocks.into_iter().flat_map(|(v, n)| std::iter::repeat_n(v, n)).collect()
}

/// `φ*` sampled at the radii of its superlevel disks.
#[derive(Debug, Clone)]
pub struct RearrangedField {
    /// Outer radius, `8πR₀²/(8 + R₀²) = ∫ e^w`.
    pub radius_r0: f64,
    /// Maximum of the source field.
    pub top: f64,
    /// Sampled levels in `(0, t₊)`, increasing.
    pub levels: Vec<f64>,
    /// `m(t)` of the source at each level.
    pub masses: Vec<f64>,
    /// `R(t)` after the monotone projection.
    pub radii: Vec<f64>,
    /// `(r, φ*(r))` with `r` increasing from 0 to `R₀`.
    pub radial_samples: Vec<(f64, f64)>,
}

impl RearrangedField {
    /// `φ*(r)`, linear between samples, zero beyond `R₀`.
    pub fn value(&self, r: f64) -> f64 {
        let s = &self.radial_samples;
        if r >= self.radius_r0 {
            return 0.0;
        }
        let k = s.partition_point(|&(rk, _)| rk <= r).max(1);
        let ((r0, f0), (r1, f1)) = (s[k - 1], s[k]);
        if r1 == r0 {
            f1
        } else {
            f0 + (f1 - f0) * (r - r0) / (r1 - r0)
        }
    }

    /// `∫_{B_{R₀}} e^U (φ*)² dx`.
    pub fn weighted_norm(&self) -> f64 {
        self.radial_samples
            .windows(2)
            .map(|w| {
                let ((r0, f0), (r1, f1)) = (w[0], w[1]);
                GAUSS_3
                    .iter()
                    .map(|&(x, wt)| {
                        let r = r0 + x * (r1 - r0);
                        let f = f0 + x * (f1 - f0);
                        wt * (r1 - r0) * 2.0 * PI * r * target_density(r) * f * f
                    })
                    .sum::<f64>()
            })
            .sum()
    }

    /// Largest relative gap between `∫_{B_{R(t)}} e^U` (numeric radial
    /// quadrature) and `m(t)` over the sampled levels.
    pub fn equimeasurability_error(&self) -> f64 {
        self.radii
            .iter()
            .zip(&self.masses)
            .filter(|(_, &m)| m > 0.0)
            .map(|(&r, &m)| (target_mass_numeric(r) - m).abs() / m)
            .fold(0.0, f64::max)
    }
}

/// `2π ∫ (φ*′)² r dr`, exact for the piecewise-linear profile.
pub fn radial_dirichlet_energy(field: &RearrangedField) -> f64 {
    field
        .radial_samples
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| {
            let ((r0, f0), (r1, f1)) = (w[0], w[1]);
            let slope = (f1 - f0) / (r1 - r0);
            slope * slope * PI * (r1 * r1 - r0 * r0)
        })
        .sum()
}

/// `∫ |∇φ|²`, exact for piecewise-linear fields.
pub fn dirichlet_energy(field: &ScalarField) -> Result<f64> {
    let k = assemble_stiffness(field.mesh())?;
    Ok(k.inner(field.values(), field.values()))
}

/// `∫ e^w φ²` with the consistent weighted mass.
pub fn weighted_norm(phi: &ScalarField, weight: &ScalarField) -> f64 {
    assemble_weighted_mass(weight).inner(phi.values(), phi.values())
}

fn check_source(phi: &ScalarField, weight: &ScalarField) -> Result<f64> {
    if phi.min() < -1e-12 * phi.max().abs().max(1.0) {
        return Err(Error::invalid("rearranged field must be nonnegative"));
    }
    if !(phi.max() > 0.0) {
        return Err(Error::invalid("rearranged field vanishes identically"));
    }
    let total = weight.total_mass();
    if total >= EIGHT_PI {
        return Err(Error::invalid(format!("mass {total} is not below 8π; R(t) is undefined")));
    }
    Ok(total)
}

/// `φ*(r) = sup{t : R(t) > r}` from `n_levels` interior levels.
pub fn rearrange(phi: &ScalarField, weight: &ScalarField, n_levels: usize) -> Result<RearrangedField> {
    let total = check_source(phi, weight)?;
    if n_levels == 0 {
        return Err(Error::invalid("need at least one level"));
    }
    let top = phi.max();
    let mut levels = Vec::with_capacity(n_levels);
    let mut masses = Vec::with_capacity(n_levels);
    for k in 1..=n_levels {
        let t = top * k as f64 / (n_levels + 1) as f64;
        levels.push(t);
        masses.push(level_stats(phi, weight, None, t)?.mass);
    }
    let radius_r0 = radius_for_mass(total);
    let mut raw = vec![radius_r0];
    raw.extend(masses.iter().map(|&m| radius_for_mass(m)));
    raw.push(0.0);
    let projected = isotonic_nonincreasing(&raw);
    let radii = projected[1..=n_levels].to_vec();
    let mut all_levels = vec![0.0];
    all_levels.extend_from_slice(&levels);
    all_levels.push(top);
    let mut radial_samples: Vec<(f64, f64)> = projected.iter().copied().zip(all_levels).collect();
    radial_samples.reverse();
    Ok(RearrangedField { radius_r0, top, levels, masses, radii, radial_samples })
}

/// One sampled level of the Cauchy-Schwarz / Bol comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainLevel {
    pub t: f64,
    pub mass: f64,
    /// `∫_{φ=t} |∇φ| dσ`.
    pub flux: f64,
    /// `ℓ(t)² / (-m′(t))`.
    pub cauchy_schwarz_bound: f64,
    /// `½ m (8π - m) / (-m′(t))`, the flux of `φ*` at the same level.
    pub bol_bound: f64,
    /// `(flux - cauchy_schwarz_bound) / flux`.
    pub cs_margin: f64,
    /// `(cauchy_schwarz_bound - bol_bound) / flux`.
    pub bol_margin: f64,
}

#[derive(Debug, Clone)]
pub struct ChainReport {
    pub levels: Vec<ChainLevel>,
    pub rearranged: RearrangedField,
    pub energy: f64,
    pub norm: f64,
    pub rearranged_energy: f64,
    pub rearranged_norm: f64,
}

impl ChainReport {
    /// `∫|∇φ*|² - ∫e^U (φ*)²`.
    pub fn rearranged_gap(&self) -> f64 {
        self.rearranged_energy - self.rearranged_norm
    }

    /// `∫|∇φ|² - ∫e^w φ²`, which is `ν̂₁ ∫e^w φ²` for the first eigenfunction.
    pub fn source_gap(&self) -> f64 {
        self.energy - self.norm
    }

    /// Most negative of the per-level margins.
    pub fn worst_margin(&self) -> f64 {
        self.levels.iter().map(|l| l.cs_margin.min(l.bol_margin)).fold(f64::INFINITY, f64::min)
    }
}

pub fn rayleigh_chain_report(phi: &ScalarField, weight: &ScalarField, n_levels: usize) -> Result<ChainReport> {
    let rearranged = rearrange(phi, weight, n_levels)?;
    let mut levels = Vec::with_capacity(n_levels);
    for (&t, &mass) in rearranged.levels.iter().zip(&rearranged.masses) {
        let (flux, coarea, ell) = contour_integrals(phi, weight, t)?;
        if !(flux > 0.0 && coarea > 0.0) {
            continue;
        }
        let cauchy_schwarz_bound = ell * ell / coarea;
        let bol_bound = 0.5 * mass * (EIGHT_PI - mass) / coarea;
        levels.push(ChainLevel {
            t,
            mass,
            flux,
            cauchy_schwarz_bound,
            bol_bound,
            cs_margin: (flux - cauchy_schwarz_bound) / flux,
            bol_margin: (cauchy_schwarz_bound - bol_bound) / flux,
        });
    }
    Ok(ChainReport {
        levels,
        energy: dirichlet_energy(phi)?,
        norm: weighted_norm(phi, weight),
        rearranged_energy: radial_dirichlet_energy(&rearranged),
        rearranged_norm: rearranged.weighted_norm(),
        rearranged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::u_lambda_field;
    use crate::mesh::{mesh_disk, shared};
    use crate::spectral::{first_eigenpair, DEFAULT_EIGEN_TOL};
    use proptest::prelude::*;

    fn psi_case(h: f64) -> (ScalarField, ScalarField) {
        let mesh = shared(mesh_disk(8f64.sqrt(), h).unwrap());
        let w = u_lambda_field(1.0, mesh.clone()).unwrap();
        let psi = ScalarField::from_fn(mesh, |p| (8.0 - p.norm_sq()) / (8.0 + p.norm_sq())).unwrap();
        (psi, w)
    }

    #[test]
    fn closed_form_radius() {
        assert!((radius_for_mass(4.0 * PI) - 8f64.sqrt()).abs() < 1e-14);
        assert!((target_mass_numeric(8f64.sqrt()) - 4.0 * PI).abs() < 1e-10);
        assert!((target_mass_numeric(1.0) - 8.0 * PI / 9.0).abs() < 1e-10);
    }

    #[test]
    fn isotonic_projection() {
        assert_eq!(isotonic_nonincreasing(&[3.0, 2.0, 1.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(isotonic_nonincreasing(&[3.0, 1.0, 2.0, 0.0]), vec![3.0, 1.5, 1.5, 0.0]);
    }

    #[test]
    fn psi_is_a_fixed_point() {
        let (psi, w) = psi_case(0.1);
        let r = rearrange(&psi, &w, 100).unwrap();
        assert!((r.radius_r0 - 8f64.sqrt()).abs() < 2e-3);
        for k in 0..=20 {
            let x = 2.8 * k as f64 / 20.0;
            let exact = (8.0 - x * x) / (8.0 + x * x);
            assert!((r.value(x) - exact).abs() < 5e-3, "r={x}: {} vs {exact}", r.value(x));
        }
        assert!(r.equimeasurability_error() < 1e-3);
        let e2 = dirichlet_energy(&psi).unwrap();
        let e1 = radial_dirichlet_energy(&r);
        assert!((e1 - e2).abs() < 1e-2 * e2, "{e1} vs {e2}");
    }

    #[test]
    fn psi_chain_is_tight() {
        let (psi, w) = psi_case(0.1);
        let rep = rayleigh_chain_report(&psi, &w, 40).unwrap();
        for l in &rep.levels {
            assert!(l.cs_margin >= -1e-12 && l.cs_margin < 2e-2, "{l:?}");
            assert!(l.bol_margin.abs() < 2e-2, "{l:?}");
        }
        assert!(rep.source_gap().abs() < 2e-2 * rep.norm);
        assert!(rep.rearranged_gap().abs() < 2e-2 * rep.norm);
    }

    #[test]
    fn constant_weight_disk_chain() {
        let mesh = shared(mesh_disk(1.0, 0.1).unwrap());
        let w = ScalarField::constant(mesh, 4f64.ln());
        let pair = first_eigenpair(&w, DEFAULT_EIGEN_TOL).unwrap();
        let rep = rayleigh_chain_report(&pair.eigenfunction, &w, 100).unwrap();
        assert!((rep.rearranged.radius_r0 - 8f64.sqrt()).abs() < 5e-3);
        assert!((rep.rearranged_norm - rep.norm).abs() < 1e-3 * rep.norm);
        assert!(rep.rearranged_energy <= rep.energy * (1.0 + 1e-3));
        assert!(rep.source_gap() > 0.3 * rep.norm);
        assert!(rep.rearranged_gap() <= rep.source_gap() + 1e-3 * rep.energy);
        assert!(rep.worst_margin() > -1e-3);
    }

    #[test]
    fn constant_field_has_no_energy() {
        let mesh = shared(mesh_disk(1.0, 0.2).unwrap());
        assert!(dirichlet_energy(&ScalarField::constant(mesh, 3.0)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn rejects_supercritical_mass_and_negative_fields() {
        let mesh = shared(mesh_disk(1.0, 0.2).unwrap());
        let phi = ScalarField::from_fn(mesh.clone(), |p| 1.0 - p.norm_sq()).unwrap();
        let heavy = ScalarField::constant(mesh.clone(), 3.0);
        assert!(rearrange(&phi, &heavy, 10).is_err());
        let light = ScalarField::constant(mesh.clone(), 0.0);
        let neg = phi.map(|v| v - 0.5).unwrap();
        assert!(rearrange(&neg, &light, 10).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn chain_margins_are_scale_free(e in -3i32..4) {
            let s = 2f64.powi(e);
            let (psi, w) = psi_case(0.25);
            let a = rayleigh_chain_report(&psi, &w, 12).unwrap();
            let b = rayleigh_chain_report(&psi.map(|v| s * v).unwrap(), &w, 12).unwrap();
            prop_assert_eq!(a.levels.len(), b.levels.len());
            for (x, y) in a.levels.iter().zip(&b.levels) {
                prop_assert!((x.cs_margin - y.cs_margin).abs() < 1e-12);
                prop_assert!((x.bol_margin - y.bol_margin).abs() < 1e-12);
            }
        }

        #[test]
        fn projection_is_monotone(v in proptest::collection::vec(0.0f64..10.0, 1..40)) {
            let p = isotonic_nonincreasing(&v);
            prop_assert_eq!(p.len(), v.len());
            for k in 1..p.len() {
                prop_assert!(p[k] <= p[k - 1] + 1e-12);
            }
            let (a, b): (f64, f64) = (v.iter().sum(), p.iter().sum());
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
