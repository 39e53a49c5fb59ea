//! Nodal scalar fields, the explicit `U_λ` family, Liouville residuals, the
//! Dirichlet Liouville solver and the scaling gauge.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::{shared, Mesh};
use crate::quadrature::{segment_half_exp_integral, triangle_exp_integral};
use crate::sparse::{nested_dissection, SparseCholesky};
use crate::spectral::{assemble_stiffness, DirichletSystem};

/// Piecewise-linear field given by its vertex values.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != mesh.vertex_count() {
            return Err(Error::invalid(format!(
                "field has {} values for {} vertices",
                values.len(),
                mesh.vertex_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite field value at vertex {i}")));
        }
        Ok(ScalarField { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> ScalarField {
        let n = mesh.vertex_count();
        ScalarField { mesh, values: vec![c; n] }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Point) -> f64) -> Result<ScalarField> {
        let values = mesh.vertices().iter().map(|&p| f(p)).collect();
        ScalarField::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Same mesh, values mapped pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<ScalarField> {
        ScalarField::new(self.mesh.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    /// `∫ e^w dx`.
    pub fn total_mass(&self) -> f64 {
        let m = &self.mesh;
        m.triangles()
            .iter()
            .enumerate()
            .map(|(t, tri)| triangle_exp_integral(m.triangle_area(t), tri.map(|v| self.values[v])))
            .sum()
    }

    /// `∫_{∂Ω} e^{w/2} dσ` over every boundary loop.
    pub fn boundary_weight(&self) -> f64 {
        let m = &self.mesh;
        let p = m.vertices();
        let mut s = 0.0;
        for lp in m.boundary_loops() {
            for k in 0..lp.len() {
                let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
                s += segment_half_exp_integral(p[a], p[b], self.values[a], self.values[b]);
            }
        }
        s
    }

    /// Mesh checksum line followed by one value per line.
    pub fn dump(&self) -> String {
        let mut out = String::with_capacity(24 * self.values.len());
        writeln!(out, "{}", self.mesh.checksum()).unwrap();
        for v in &self.values {
            writeln!(out, "{v:e}").unwrap();
        }
        out
    }
}

/// `U_λ(x) = 2 ln λ - 2 ln(1 + λ²|x|²/8)`, no argument checks.
pub fn u_lambda_at(lambda: f64, x: Point) -> f64 {
    2.0 * lambda.ln() - 2.0 * (lambda * lambda * x.norm_sq() / 8.0).ln_1p()
}

pub fn u_lambda(lambda: f64, points: &[Point]) -> Result<Vec<f64>> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::invalid(format!("λ must be positive, got {lambda}")));
    }
    Ok(points.iter().map(|&p| u_lambda_at(lambda, p)).collect())
}

pub fn u_lambda_field(lambda: f64, mesh: Arc<Mesh>) -> Result<ScalarField> {
    let values = u_lambda(lambda, mesh.vertices())?;
    ScalarField::new(mesh, values)
}

/// Discrete Liouville residual `f = -Δ_h w - e^w` at the interior vertices.
#[derive(Debug, Clone)]
pub struct SubsolutionReport {
    pub interior_nodes: Vec<usize>,
    pub residual: Vec<f64>,
    /// Largest signed residual; a subsolution has it `≤ 0` up to tolerance.
    pub max_residual: f64,
    pub max_abs_residual: f64,
    pub tolerance: f64,
    pub is_subsolution: bool,
    pub total_mass: f64,
}

/// `-Δ_h w` at interior vertices: stiffness action over lumped mass.
pub fn negative_laplacian(w: &ScalarField) -> Result<(Vec<usize>, Vec<f64>)> {
    let mesh = w.mesh();
    let k = assemble_stiffness(mesh)?;
    let sys = DirichletSystem::new(mesh)?;
    let lumped = mesh.lumped_mass();
    let kw = k.rows_mul(sys.interior(), w.values());
    let lap = sys.interior().iter().zip(kw).map(|(&i, v)| v / lumped[i]).collect();
    Ok((sys.interior().to_vec(), lap))
}

/// `10 h² max e^w`.
pub fn default_subsolution_tolerance(w: &ScalarField) -> f64 {
    let h = w.mesh().resolution_h();
    10.0 * h * h * w.max().exp()
}

pub fn liouville_residual(w: &ScalarField, tolerance: f64) -> Result<SubsolutionReport> {
    if !(tolerance >= 0.0) {
        return Err(Error::invalid("tolerance must be nonnegative"));
    }
    let (nodes, lap) = negative_laplacian(w)?;
    let residual: Vec<f64> = nodes.iter().zip(&lap).map(|(&i, l)| l - w.values()[i].exp()).collect();
    let max_residual = residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_abs_residual = residual.iter().fold(0.0f64, |a, r| a.max(r.abs()));
    Ok(SubsolutionReport {
        interior_nodes: nodes,
        residual,
        max_residual,
        max_abs_residual,
        tolerance,
        is_subsolution: max_residual <= tolerance,
        total_mass: w.total_mass(),
    })
}

/// Damped Newton for `-Δ_h w = e^w` with `w = boundary_values` on
/// [`Mesh::boundary_nodes`], started from the harmonic lifting. Returns the
/// minimal solution or [`Error::NewtonDiverged`] when none is reachable.
pub fn solve_liouville_dirichlet(
    mesh: &Arc<Mesh>,
    boundary_values: &[f64],
    max_iter: usize,
    newton_tol: f64,
) -> Result<ScalarField> {
    let bnodes = mesh.boundary_nodes();
    if boundary_values.len() != bnodes.len() {
        return Err(Error::invalid(format!(
            "{} boundary values for {} boundary nodes",
            boundary_values.len(),
            bnodes.len()
        )));
    }
    if boundary_values.iter().any(|v| !v.is_finite()) || !(newton_tol > 0.0) {
        return Err(Error::invalid("boundary data must be finite and the tolerance positive"));
    }
    let k = assemble_stiffness(mesh)?;
    let sys = DirichletSystem::new(mesh)?;
    let kii = sys.restrict_matrix(&k);
    let lumped = sys.restrict(&mesh.lumped_mass());
    let order = nested_dissection(&kii, sys.points());

    let mut g = vec![0.0; mesh.vertex_count()];
    for (&i, &v) in bnodes.iter().zip(boundary_values) {
        g[i] = v;
    }
    let chol = SparseCholesky::factor_with_ordering(&kii, order.clone())?;
    let mut w = sys.solve(&k, &chol, &vec![0.0; sys.len()], &g);

    let residual = |w: &[f64]| -> (Vec<f64>, f64) {
        let kw = k.rows_mul(sys.interior(), w);
        let f: Vec<f64> = sys
            .interior()
            .iter()
            .enumerate()
            .map(|(j, &i)| kw[j] - lumped[j] * w[i].exp())
            .collect();
        let norm = f.iter().zip(&lumped).fold(0.0f64, |a, (r, l)| a.max((r / l).abs()));
        (f, if norm.is_finite() { norm } else { f64::INFINITY })
    };

    let (mut f, mut norm) = residual(&w);
    for iter in 0..max_iter {
        if norm <= newton_tol {
            return ScalarField::new(mesh.clone(), w);
        }
        let weight: Vec<f64> = sys.interior().iter().enumerate().map(|(j, &i)| lumped[j] * w[i].exp()).collect();
        let jac = kii.add_diagonal(&weight, -1.0);
        let chol = SparseCholesky::factor_with_ordering(&jac, order.clone()).map_err(|_| Error::NewtonDiverged {
            iterations: iter,
            residual: norm,
            reason: "Jacobian is not positive definite; no minimal-branch solution reachable".into(),
        })?;
        let rhs: Vec<f64> = f.iter().map(|r| -r).collect();
        let delta = chol.solve(&rhs);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..=30 {
            let mut trial = w.clone();
            for (j, &i) in sys.interior().iter().enumerate() {
                trial[i] += step * delta[j];
            }
            let (tf, tn) = residual(&trial);
            if tn < norm {
                w = trial;
                f = tf;
                norm = tn;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return Err(Error::NewtonDiverged {
                iterations: iter + 1,
                residual: norm,
                reason: "no residual decrease after 30 step halvings".into(),
            });
        }
    }
    if norm <= newton_tol {
        return ScalarField::new(mesh.clone(), w);
    }
    Err(Error::NewtonDiverged { iterations: max_iter, residual: norm, reason: "iteration cap reached".into() })
}

/// `w_c(x) = w(e^{-c/2} x) - c` on the mesh scaled by `e^{c/2}`.
pub fn normalize_gauge(w: &ScalarField, c: f64) -> Result<ScalarField> {
    if !c.is_finite() {
        return Err(Error::invalid("gauge constant must be finite"));
    }
    let mesh = shared(w.mesh().scaled((0.5 * c).exp()));
    ScalarField::new(mesh, w.values().iter().map(|v| v - c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::mesh_disk;
    use std::f64::consts::PI;

    /// RK4 for `-(r u')' = r e^u` on `[0, 1]` with `u(0) = a`, `u'(0) = 0`;
    /// returns samples of `u` at `n + 1` equispaced radii.
    fn shoot(a: f64, n: usize) -> Vec<f64> {
        let r0 = 1e-6;
        // series start: u ≈ a - e^a r²/4
        let mut u = a - a.exp() * r0 * r0 / 4.0;
        let mut v = -a.exp() * r0 / 2.0;
        let rhs = |r: f64, u: f64, v: f64| (v, -v / r - u.exp());
        let steps_per = 200;
        let mut out = vec![a];
        let mut r = r0;
        for k in 1..=n {
            let target = k as f64 / n as f64;
            let dr = (target - r) / steps_per as f64;
            for _ in 0..steps_per {
                let (k1u, k1v) = rhs(r, u, v);
                let (k2u, k2v) = rhs(r + dr / 2.0, u + dr / 2.0 * k1u, v + dr / 2.0 * k1v);
                let (k3u, k3v) = rhs(r + dr / 2.0, u + dr / 2.0 * k2u, v + dr / 2.0 * k2v);
                let (k4u, k4v) = rhs(r + dr, u + dr * k3u, v + dr * k3v);
                u += dr / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                v += dr / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                r += dr;
            }
            out.push(u);
        }
        out
    }

    /// Smallest centre value whose radial solution hits `g` at `r = 1`.
    fn minimal_centre_value(g: f64) -> Option<f64> {
        let end = |a: f64| *shoot(a, 1).last().unwrap() - g;
        let mut lo = g;
        let mut a = g;
        while a < g + 20.0 {
            a += 0.05;
            if end(a) >= 0.0 {
                let mut hi = a;
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if end(mid) >= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                return Some(0.5 * (lo + hi));
            }
            lo = a;
        }
        None
    }

    #[test]
    fn u_lambda_examples() {
        let v = u_lambda(8f64.sqrt(), &[Point::new(0.0, 0.0), Point::new(8f64.sqrt(), 0.0)]).unwrap();
        assert!((v[0] - 8f64.ln()).abs() < 1e-14);
        let v = u_lambda(1.0, &[Point::new(0.0, 8f64.sqrt())]).unwrap();
        assert!((v[0] + 2.0 * 2f64.ln()).abs() < 1e-14);
        assert!(u_lambda(0.0, &[]).is_err());
        assert!(u_lambda(-1.0, &[]).is_err());
    }

    #[test]
    fn u_one_mass_on_critical_disk() {
        let mesh = shared(mesh_disk(8f64.sqrt(), 0.05).unwrap());
        let m = u_lambda_field(1.0, mesh).unwrap().total_mass();
        assert!((m / (4.0 * PI) - 1.0).abs() < 1e-3, "{m}");
    }

    #[test]
    fn residual_of_zero_is_minus_one() {
        let mesh = shared(mesh_disk(1.0, 0.1).unwrap());
        let w = ScalarField::constant(mesh, 0.0);
        let r = liouville_residual(&w, default_subsolution_tolerance(&w)).unwrap();
        assert!(r.residual.iter().all(|f| (f + 1.0).abs() < 1e-12));
        assert!(r.is_subsolution);
    }

    #[test]
    fn residual_of_paraboloid() {
        let mesh = shared(mesh_disk(1.0, 0.05).unwrap());
        let w = ScalarField::from_fn(mesh, |p| p.norm_sq()).unwrap();
        let r = liouville_residual(&w, 0.0).unwrap();
        assert!(r.is_subsolution);
        let worst = r
            .interior_nodes
            .iter()
            .zip(&r.residual)
            .map(|(&i, f)| (f + 4.0 + w.values()[i].exp()).abs())
            .fold(0.0, f64::max);
        assert!(worst < 0.3, "{worst}");
    }

    #[test]
    fn u_lambda_residual_shrinks_with_h() {
        for lambda in [1.0, 2.0, 8f64.sqrt()] {
            let mut mesh = shared(mesh_disk(1.0, 0.1).unwrap());
            let mut errs = Vec::new();
            for _ in 0..3 {
                errs.push(liouville_residual(&u_lambda_field(lambda, mesh.clone()).unwrap(), 0.0).unwrap().max_abs_residual);
                mesh = shared(mesh.refine());
            }
            // first-order decay in the sup norm on polar meshes
            assert!(errs[1] < 0.6 * errs[0] && errs[2] < 0.6 * errs[1], "{lambda}: {errs:?}");
        }
    }

    #[test]
    fn shooting_oracle_selects_u_one() {
        let a = minimal_centre_value(-2.0 * (9.0f64 / 8.0).ln()).unwrap();
        assert!(a.abs() < 1e-8, "{a}");
        let a = minimal_centre_value(0.0).unwrap();
        let lambda = 4.0 - 2.0 * 2f64.sqrt();
        assert!((a - 2.0 * lambda.ln()).abs() < 1e-8, "{a}");
        assert!(minimal_centre_value(10.0).is_none());
    }

    fn newton_error(h: f64, g: f64) -> f64 {
        let mesh = shared(mesh_disk(1.0, h).unwrap());
        let n = mesh.boundary_nodes().len();
        let w = solve_liouville_dirichlet(&mesh, &vec![g; n], 50, 1e-10).unwrap();
        let a = minimal_centre_value(g).unwrap();
        let profile = shoot(a, 1000);
        w.mesh()
            .vertices()
            .iter()
            .zip(w.values())
            .map(|(p, v)| {
                let s = (p.norm() * 1000.0).min(1000.0);
                let k = (s.floor() as usize).min(999);
                let oracle = profile[k] + (s - k as f64) * (profile[k + 1] - profile[k]);
                (v - oracle).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn newton_reaches_minimal_branch() {
        let g = -2.0 * (9.0f64 / 8.0).ln();
        let (e1, e2) = (newton_error(0.1, g), newton_error(0.05, g));
        assert!(e2 < e1 && e2 < 2e-3, "{e1} {e2}");
        let (e1, e2) = (newton_error(0.1, 0.0), newton_error(0.05, 0.0));
        assert!(e2 < e1 && e2 < 2e-3, "{e1} {e2}");
    }

    #[test]
    fn newton_converged_residual_and_boundary() {
        let mesh = shared(mesh_disk(1.0, 0.1).unwrap());
        let n = mesh.boundary_nodes().len();
        let w = solve_liouville_dirichlet(&mesh, &vec![0.0; n], 50, 1e-10).unwrap();
        let r = liouville_residual(&w, 0.0).unwrap();
        assert!(r.max_abs_residual <= 1e-10);
        assert!(mesh.boundary_nodes().iter().all(|&i| w.values()[i] == 0.0));
        assert!(w.total_mass() < crate::EIGHT_PI);
    }

    #[test]
    fn newton_fails_beyond_fold() {
        let mesh = shared(mesh_disk(1.0, 0.1).unwrap());
        let n = mesh.boundary_nodes().len();
        let r = solve_liouville_dirichlet(&mesh, &vec![10.0; n], 50, 1e-10);
        assert!(matches!(r, Err(Error::NewtonDiverged { .. })));
    }

    #[test]
    fn gauge_examples() {
        let mesh = shared(mesh_disk(1.0, 0.1).unwrap());
        let w = ScalarField::constant(mesh, 0.0);
        let same = normalize_gauge(&w, 0.0).unwrap();
        assert_eq!(same.values(), w.values());
        let c = 2.0 * 2f64.ln();
        let wc = normalize_gauge(&w, c).unwrap();
        assert!(wc.values().iter().all(|v| (v + c).abs() < 1e-15));
        assert!((wc.mesh().area() / w.mesh().area() - 4.0).abs() < 1e-12);
        assert!((wc.total_mass() / w.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dump_layout() {
        let mesh = shared(mesh_disk(1.0, 0.5).unwrap());
        let w = ScalarField::constant(mesh.clone(), 1.5);
        let d = w.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines[0], mesh.checksum());
        assert_eq!(lines.len(), mesh.vertex_count() + 1);
        assert_eq!(lines[1].parse::<f64>().unwrap(), 1.5);
    }

    #[test]
    fn field_rejects_bad_values() {
        let mesh = shared(mesh_disk(1.0, 0.5).unwrap());
        assert!(ScalarField::new(mesh.clone(), vec![0.0; 3]).is_err());
        let mut v = vec![0.0; mesh.vertex_count()];
        v[0] = f64::NAN;
        assert!(ScalarField::new(mesh, v).is_err());
    }
}
