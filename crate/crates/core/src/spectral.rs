//! Linear finite-element operators and the first Dirichlet eigenpair of
//! `-Δφ = ν e^w φ`.

use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::quadrature::TRIANGLE_7;
use crate::sparse::{dot, norm2, CsrMatrix, SparseCholesky};

/// Default bound on `‖Kφ - ν₁Mφ‖ / ‖Mφ‖`.
pub const DEFAULT_EIGEN_TOL: f64 = 1e-10;

const NONE: usize = usize::MAX;

/// Cotangent stiffness matrix over all vertices (no boundary elimination).
pub fn assemble_stiffness(mesh: &Mesh) -> Result<CsrMatrix> {
    let mut t = Vec::with_capacity(mesh.triangles().len() * 9);
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let p = mesh.triangle_points(ti);
        let area = mesh.triangle_area(ti);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { index: ti, area });
        }
        // edge opposite each vertex
        let e = [p[2] - p[1], p[0] - p[2], p[1] - p[0]];
        let mut diag = [0.0; 3];
        for a in 0..3 {
            for b in a + 1..3 {
                let v = e[a].dot(e[b]) / (4.0 * area);
                t.push((tri[a], tri[b], v));
                t.push((tri[b], tri[a], v));
                diag[a] -= v;
                diag[b] -= v;
            }
        }
        for a in 0..3 {
            t.push((tri[a], tri[a], diag[a]));
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.vertex_count(), t))
}

/// Consistent mass matrix for the weight `e^w`, with `w` interpolated
/// linearly and exponentiated at the quadrature points.
pub fn assemble_weighted_mass(w: &ScalarField) -> CsrMatrix {
    let mesh = w.mesh();
    let mut t = Vec::with_capacity(mesh.triangles().len() * 9);
    for (ti, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(ti);
        let wv = [w.values()[tri[0]], w.values()[tri[1]], w.values()[tri[2]]];
        let mut local = [[0.0; 3]; 3];
        for (b, wt) in TRIANGLE_7 {
            let g = wt * area * (b[0] * wv[0] + b[1] * wv[1] + b[2] * wv[2]).exp();
            for i in 0..3 {
                for j in i..3 {
                    local[i][j] += g * b[i] * b[j];
                }
            }
        }
        for i in 0..3 {
            t.push((tri[i], tri[i], local[i][i]));
            for j in i + 1..3 {
                t.push((tri[i], tri[j], local[i][j]));
                t.push((tri[j], tri[i], local[i][j]));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.vertex_count(), t)
}

/// Interior/boundary split of the unknowns for homogeneous and
/// inhomogeneous Dirichlet problems.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    interior: Vec<usize>,
    local: Vec<usize>,
    points: Vec<Point>,
}

impl DirichletSystem {
    pub fn new(mesh: &Mesh) -> Result<DirichletSystem> {
        let mask = mesh.boundary_mask();
        let interior: Vec<usize> = (0..mesh.vertex_count()).filter(|&i| !mask[i]).collect();
        if interior.is_empty() {
            return Err(Error::invalid("mesh has no interior vertices"));
        }
        let mut local = vec![NONE; mesh.vertex_count()];
        for (k, &i) in interior.iter().enumerate() {
            local[i] = k;
        }
        let points = interior.iter().map(|&i| mesh.vertices()[i]).collect();
        Ok(DirichletSystem { interior, local, points })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    pub fn restrict_matrix(&self, a: &CsrMatrix) -> CsrMatrix {
        a.principal_submatrix(&self.interior)
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior.iter().map(|&i| full[i]).collect()
    }

    /// Writes interior values into a copy of `full`.
    pub fn extend(&self, interior_values: &[f64], full: &[f64]) -> Vec<f64> {
        let mut out = full.to_vec();
        for (k, &i) in self.interior.iter().enumerate() {
            out[i] = interior_values[k];
        }
        out
    }

    pub fn local_index(&self, vertex: usize) -> Option<usize> {
        let k = self.local[vertex];
        (k != NONE).then_some(k)
    }

    /// Solves `K u = rhs` at interior nodes with `u = boundary` (the boundary
    /// entries of the full-length vector `boundary`) on the boundary.
    pub fn solve(&self, k_full: &CsrMatrix, chol: &SparseCholesky, rhs: &[f64], boundary: &[f64]) -> Vec<f64> {
        let mut lifted = boundary.to_vec();
        for &i in &self.interior {
            lifted[i] = 0.0;
        }
        let kb = k_full.rows_mul(&self.interior, &lifted);
        let b: Vec<f64> = rhs.iter().zip(&kb).map(|(r, k)| r - k).collect();
        self.extend(&chol.solve(&b), &lifted)
    }
}

/// First eigenpair of the weighted linearized problem.
#[derive(Debug, Clone)]
pub struct EigenPair {
    /// `ν₁ - 1`.
    pub nu_hat: f64,
    /// Zero on the boundary, `∫e^w φ² = 1`, positive inside.
    pub eigenfunction: ScalarField,
    pub residual_norm: f64,
}

impl EigenPair {
    pub fn nu(&self) -> f64 {
        self.nu_hat + 1.0
    }
}

/// Smallest eigenpair of `-Δφ = ν e^w φ`, `φ = 0` on the boundary.
pub fn first_eigenpair(w: &ScalarField, tol: f64) -> Result<EigenPair> {
    let k = assemble_stiffness(w.mesh())?;
    let m = assemble_weighted_mass(w);
    first_eigenpair_of(w.mesh(), &k, &m, tol)
}

/// As [`first_eigenpair`] with pre-assembled full operators.
pub fn first_eigenpair_of(mesh: &Arc<Mesh>, k: &CsrMatrix, m: &CsrMatrix, tol: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::invalid("eigen tolerance must be positive"));
    }
    let sys = DirichletSystem::new(mesh)?;
    let kii = sys.restrict_matrix(k);
    let mii = sys.restrict_matrix(m);
    let (nu, mut phi, residual) = smallest_generalized(&kii, &mii, sys.points(), tol)?;
    let norm = mii.inner(&phi, &phi).sqrt();
    let sign = if phi.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    phi.iter_mut().for_each(|v| *v *= sign / norm);
    let full = sys.extend(&phi, &vec![0.0; mesh.vertex_count()]);
    Ok(EigenPair {
        nu_hat: nu - 1.0,
        eigenfunction: ScalarField::new(mesh.clone(), full)?,
        residual_norm: residual,
    })
}

fn relative_residual(k: &CsrMatrix, m: &CsrMatrix, x: &[f64]) -> (f64, f64) {
    let kx = k.mul_vec(x);
    let mx = m.mul_vec(x);
    let nu = dot(x, &kx) / dot(x, &mx);
    let r: Vec<f64> = kx.iter().zip(&mx).map(|(a, b)| a - nu * b).collect();
    (nu, norm2(&r) / norm2(&mx))
}

/// Shift-invert Lanczos on `K⁻¹M` in the `M` inner product, started from the
/// all-ones vector, with full reorthogonalization; the Ritz vector is then
/// polished by inverse iteration.
pub fn smallest_generalized(k: &CsrMatrix, m: &CsrMatrix, points: &[Point], tol: f64) -> Result<(f64, Vec<f64>, f64)> {
    let n = k.dim();
    let chol = SparseCholesky::factor(k, points)?;
    let max_steps = n.min(300);
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut mq: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();

    let mut v = vec![1.0; n];
    let mut mv = m.mul_vec(&v);
    let s = dot(&v, &mv).sqrt();
    v.iter_mut().for_each(|x| *x /= s);
    mv.iter_mut().for_each(|x| *x /= s);

    let mut ritz: Option<Vec<f64>> = None;
    for j in 0..max_steps {
        let mut z = chol.solve(&mv);
        q.push(v);
        mq.push(mv);
        let a = dot(&z, &mq[j]);
        alpha.push(a);
        for _ in 0..2 {
            for (qi, mqi) in q.iter().zip(&mq) {
                let c = dot(&z, mqi);
                z.iter_mut().zip(qi).for_each(|(x, y)| *x -= c * y);
            }
        }
        let mz = m.mul_vec(&z);
        let b = dot(&z, &mz).max(0.0).sqrt();

        let steps = j + 1;
        let done = steps == max_steps || b <= 1e-14 * a.abs();
        if done || (steps >= 4 && steps % 4 == 0) {
            let mut t = DMatrix::<f64>::zeros(steps, steps);
            for i in 0..steps {
                t[(i, i)] = alpha[i];
                if i + 1 < steps {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (top, theta) = eig
                .eigenvalues
                .iter()
                .copied()
                .enumerate()
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .unwrap();
            let estimate = b * eig.eigenvectors[(steps - 1, top)].abs() / theta.abs();
            if estimate < 1e-12 || done {
                let mut x = vec![0.0; n];
                for (i, qi) in q.iter().enumerate() {
                    let c = eig.eigenvectors[(i, top)];
                    x.iter_mut().zip(qi).for_each(|(xv, y)| *xv += c * y);
                }
                ritz = Some(x);
                break;
            }
        }
        beta.push(b);
        v = z.iter().map(|x| x / b).collect();
        mv = mz.iter().map(|x| x / b).collect();
    }

    let mut x = ritz.expect("Lanczos loop always yields a Ritz vector");
    let (mut nu, mut res) = relative_residual(k, m, &x);
    let mut iterations = 0;
    while res > tol && iterations < 20 {
        x = chol.solve(&m.mul_vec(&x));
        let s = m.inner(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= s);
        (nu, res) = relative_residual(k, m, &x);
        iterations += 1;
    }
    if !(res <= tol) {
        return Err(Error::IterationStalled { iterations, residual: res });
    }
    Ok((nu, x, res))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::u_lambda_field;
    use crate::mesh::{mesh_disk, shared};

    const J0: f64 = 2.404_825_557_695_773;

    #[test]
    fn right_triangle_element_matrix() {
        let mesh = Mesh::from_parts(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        let expect = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((k.get(i, j) - expect[i][j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn stiffness_symmetric_with_zero_row_sums() {
        let mesh = mesh_disk(1.3, 0.2).unwrap();
        let k = assemble_stiffness(&mesh).unwrap();
        assert!(k.is_symmetric());
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-12));
    }

    #[test]
    fn weighted_mass_totals() {
        let mesh = shared(mesh_disk(1.0, 0.05).unwrap());
        let zero = ScalarField::constant(mesh.clone(), 0.0);
        let total: f64 = assemble_weighted_mass(&zero).row_sums().iter().sum();
        assert!((total - mesh.area()).abs() < 1e-12);
        let u = u_lambda_field(1.0, mesh.clone()).unwrap();
        let total: f64 = assemble_weighted_mass(&u).row_sums().iter().sum();
        let exact = 8.0 * std::f64::consts::PI / 9.0;
        assert!((total / exact - 1.0).abs() < 1e-3, "{total}");
    }

    #[test]
    fn dirichlet_laplacian_matches_bessel_zero() {
        let mesh = shared(mesh_disk(1.5, 0.05).unwrap());
        let pair = first_eigenpair(&ScalarField::constant(mesh, 0.0), DEFAULT_EIGEN_TOL).unwrap();
        let exact = J0 * J0 / (1.5 * 1.5);
        assert!((pair.nu() / exact - 1.0).abs() < 1e-2, "{}", pair.nu());
        assert!(pair.residual_norm <= DEFAULT_EIGEN_TOL);
    }

    #[test]
    fn constant_weight_unit_disk() {
        let mesh = shared(mesh_disk(1.0, 0.1).unwrap());
        let w = ScalarField::constant(mesh, 4f64.ln());
        let pair = first_eigenpair(&w, DEFAULT_EIGEN_TOL).unwrap();
        assert!((pair.nu_hat - (J0 * J0 / 4.0 - 1.0)).abs() < 1e-2, "{}", pair.nu_hat);
        let sys = DirichletSystem::new(pair.eigenfunction.mesh()).unwrap();
        assert!(sys.interior().iter().all(|&i| pair.eigenfunction.values()[i] > 0.0));
        // Rayleigh quotient and normalization
        let k = assemble_stiffness(pair.eigenfunction.mesh()).unwrap();
        let m = assemble_weighted_mass(&w);
        let phi = pair.eigenfunction.values();
        assert!((m.inner(phi, phi) - 1.0).abs() < 1e-12);
        assert!((k.inner(phi, phi) - pair.nu()).abs() < 1e-9);
    }

    #[test]
    fn equality_case_is_critical() {
        let mesh = shared(mesh_disk(8f64.sqrt(), 0.1).unwrap());
        let u = u_lambda_field(1.0, mesh.clone()).unwrap();
        let pair = first_eigenpair(&u, DEFAULT_EIGEN_TOL).unwrap();
        assert!(pair.nu_hat.abs() < 2e-2, "{}", pair.nu_hat);
    }

    #[test]
    fn stiffness_rejects_flat_triangle_via_mesh() {
        let r = Mesh::from_parts(
            vec![Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(2.0, 0.0)],
            vec![[0, 1, 2]],
        );
        assert!(matches!(r, Err(Error::DegenerateTriangle { .. })));
    }
}
