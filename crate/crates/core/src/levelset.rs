//! Superlevel sets of piecewise-linear fields: weighted areas `m(t)`,
//! `μ(t)`, weighted contour lengths `ℓ(t)`, topology, the Bol / Huber /
//! isoperimetric defects, the harmonic decomposition `w = h + u`, the
//! zero extension `ŵ` across holes and the audit of the multiply connected
//! Bol chain.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fields::{liouville_residual, negative_laplacian, ScalarField};
use crate::geometry::{linear_gradient, Point};
use crate::mesh::{boundary_loops_of, Mesh};
use crate::quadrature::{segment_half_exp_integral, triangle_exp_integral, SEGMENT_GAUSS_2};
use crate::sparse::SparseCholesky;
use crate::spectral::{assemble_stiffness, assemble_weighted_mass, DirichletSystem};
use crate::EIGHT_PI;

const PI: f64 = std::f64::consts::PI;

/// Statistics of the superlevel set `{φ > t}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    /// Level actually used (after moving off nodal values).
    pub level: f64,
    pub mass: f64,
    pub base_mass: Option<f64>,
    pub ell: f64,
    pub components: usize,
    pub holes: usize,
}

/// Level-set statistics on a uniform grid `0 = t_0 < … < t_{n-1} = t₊`.
#[derive(Debug, Clone)]
pub struct LevelSetProfile {
    pub levels: Vec<f64>,
    pub mass: Vec<f64>,
    pub base_mass: Option<Vec<f64>>,
    pub ell: Vec<f64>,
    pub components: Vec<usize>,
    pub holes: Vec<usize>,
}

impl LevelSetProfile {
    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// `ℓ² - ½ m (8π - m)` per level; `None` where the mass exceeds `8π`.
    pub fn bol_defects(&self) -> Vec<Option<f64>> {
        self.ell.iter().zip(&self.mass).map(|(&l, &m)| bol_defect(l, m).ok()).collect()
    }

    /// Per interval: `(-Δm/Δt, e^t (-Δμ/Δt))` at the midpoint level. Both
    /// sides agree in the limit when `m`, `μ` come from `u` with weights
    /// `e^w` and `e^h`.
    pub fn mass_coupling(&self) -> Option<Vec<(f64, f64)>> {
        let mu = self.base_mass.as_ref()?;
        Some(
            (0..self.len().saturating_sub(1))
                .map(|k| {
                    let dt = self.levels[k + 1] - self.levels[k];
                    let tm = 0.5 * (self.levels[k] + self.levels[k + 1]);
                    ((self.mass[k] - self.mass[k + 1]) / dt, tm.exp() * (mu[k] - mu[k + 1]) / dt)
                })
                .collect(),
        )
    }

    /// Per interval: `Δ(m²)/(8π Δt) + e^t μ(t)` at the midpoint, which the
    /// differential inequality bounds above by zero.
    pub fn squared_mass_margins(&self) -> Option<Vec<f64>> {
        let mu = self.base_mass.as_ref()?;
        Some(
            (0..self.len().saturating_sub(1))
                .map(|k| {
                    let dt = self.levels[k + 1] - self.levels[k];
                    let tm = 0.5 * (self.levels[k] + self.levels[k + 1]);
                    let dm2 = self.mass[k + 1].powi(2) - self.mass[k].powi(2);
                    dm2 / (EIGHT_PI * dt) + tm.exp() * 0.5 * (mu[k] + mu[k + 1])
                })
                .collect(),
        )
    }
}

/// A contour of `{φ = t}`: closed, or with both ends on the mesh boundary.
#[derive(Debug, Clone)]
pub struct Contour {
    pub points: Vec<Point>,
    pub closed: bool,
}

fn same_mesh(a: &ScalarField, b: &ScalarField) -> Result<()> {
    if Arc::ptr_eq(a.mesh(), b.mesh()) || a.mesh().checksum() == b.mesh().checksum() {
        Ok(())
    } else {
        Err(Error::invalid("fields live on different meshes"))
    }
}

/// Moves `t` upward by `h·1e-6·range` until it misses every nodal value.
pub fn generic_level(field: &ScalarField, t: f64) -> f64 {
    let range = field.max() - field.min();
    let step = field.mesh().resolution_h() * 1e-6 * range;
    let mut level = t;
    if step <= 0.0 {
        return level;
    }
    while field.values().contains(&level) {
        level += step;
    }
    level
}

/// Parameter of the level crossing along an edge from value `fp` to `fq`.
fn crossing(fp: f64, fq: f64, t: f64) -> f64 {
    (t - fp) / (fq - fp)
}

/// Clipped pieces of one triangle: sub-triangles of `{φ > t}` with weight
/// values, and the contour segment if the level cuts it.
struct Clip {
    pieces: Vec<([Point; 3], [f64; 3])>,
    segment: Option<([Point; 2], [f64; 2])>,
}

fn clip_triangle(p: [Point; 3], phi: [f64; 3], w: [f64; 3], t: f64) -> Clip {
    let above: Vec<usize> = (0..3).filter(|&i| phi[i] > t).collect();
    let cut = |i: usize, j: usize| {
        let s = crossing(phi[i], phi[j], t);
        (p[i].lerp(p[j], s), w[i] + s * (w[j] - w[i]))
    };
    match above.len() {
        3 => Clip { pieces: vec![(p, w)], segment: None },
        0 => Clip { pieces: vec![], segment: None },
        1 => {
            let a = above[0];
            let (b, c) = ((a + 1) % 3, (a + 2) % 3);
            let (xb, wb) = cut(a, b);
            let (xc, wc) = cut(a, c);
            Clip { pieces: vec![([p[a], xb, xc], [w[a], wb, wc])], segment: Some(([xb, xc], [wb, wc])) }
        }
        _ => {
            let c = (0..3).find(|i| !above.contains(i)).unwrap();
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            let (xa, wa) = cut(c, a);
            let (xb, wb) = cut(c, b);
            Clip {
                pieces: vec![([p[a], p[b], xb], [w[a], w[b], wb]), ([p[a], xb, xa], [w[a], wb, wa])],
                segment: Some(([xa, xb], [wa, wb])),
            }
        }
    }
}

fn piece_area(p: &[Point; 3]) -> f64 {
    crate::geometry::signed_area(p[0], p[1], p[2]).abs()
}

/// Components and holes of the subcomplex spanned by the flagged vertices
/// (a generic superlevel set retracts onto it).
fn induced_topology(mesh: &Mesh, inside: &[bool]) -> (usize, usize) {
    let n = mesh.vertex_count();
    let mut uf = UnionFind::new(n);
    let vertices = inside.iter().filter(|&&a| a).count() as i64;
    let mut faces = 0i64;
    let mut edge_count = 0i64;
    for (a, b) in mesh.edges() {
        if inside[a] && inside[b] {
            edge_count += 1;
            uf.union(a, b);
        }
    }
    for tri in mesh.triangles() {
        if tri.iter().all(|&v| inside[v]) {
            faces += 1;
        }
    }
    let mut roots: Vec<usize> = (0..n).filter(|&v| inside[v]).map(|v| uf.find(v)).collect();
    roots.sort_unstable();
    roots.dedup();
    let components = roots.len() as i64;
    let euler = vertices - edge_count + faces;
    (components as usize, (components - euler).max(0) as usize)
}

/// Statistics of `{field > t}` with weight `e^{weight}` (and `e^{base}`).
pub fn level_stats(
    field: &ScalarField,
    weight: &ScalarField,
    base: Option<&ScalarField>,
    t: f64,
) -> Result<LevelStats> {
    same_mesh(field, weight)?;
    if let Some(b) = base {
        same_mesh(field, b)?;
    }
    let mesh = field.mesh();
    // rounding-level noise on a zero trace still counts as the whole domain
    if t <= field.min() + 1e-12 * (field.max() - field.min()) {
        let all = vec![true; mesh.vertex_count()];
        let (components, holes) = induced_topology(mesh, &all);
        return Ok(LevelStats {
            level: t,
            mass: weight.total_mass(),
            base_mass: base.map(|b| b.total_mass()),
            ell: weight.boundary_weight(),
            components,
            holes,
        });
    }
    let t = generic_level(field, t);
    let phi = field.values();
    let w = weight.values();
    let verts = mesh.vertices();
    let (mut mass, mut base_mass, mut ell) = (0.0, 0.0, 0.0);
    for tri in mesh.triangles() {
        let f = tri.map(|v| phi[v]);
        if f.iter().all(|&x| x <= t) {
            continue;
        }
        let p = tri.map(|v| verts[v]);
        let clip = clip_triangle(p, f, tri.map(|v| w[v]), t);
        for (q, wq) in &clip.pieces {
            mass += triangle_exp_integral(piece_area(q), *wq);
        }
        if let Some(([a, b], [wa, wb])) = clip.segment {
            ell += segment_half_exp_integral(a, b, wa, wb);
        }
        if let Some(bf) = base {
            let hb = tri.map(|v| bf.values()[v]);
            for (q, hq) in clip_triangle(p, f, hb, t).pieces {
                base_mass += triangle_exp_integral(piece_area(&q), hq);
            }
        }
    }
    // parts of ∂Ω where the field exceeds the level
    for lp in mesh.boundary_loops() {
        for k in 0..lp.len() {
            let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
            let (fa, fb) = (phi[a], phi[b]);
            match (fa > t, fb > t) {
                (true, true) => ell += segment_half_exp_integral(verts[a], verts[b], w[a], w[b]),
                (true, false) | (false, true) => {
                    let s = crossing(fa, fb, t);
                    let x = verts[a].lerp(verts[b], s);
                    let wx = w[a] + s * (w[b] - w[a]);
                    ell += if fa > t {
                        segment_half_exp_integral(verts[a], x, w[a], wx)
                    } else {
                        segment_half_exp_integral(x, verts[b], wx, w[b])
                    };
                }
                _ => {}
            }
        }
    }
    let inside: Vec<bool> = phi.iter().map(|&v| v > t).collect();
    let (components, holes) = induced_topology(mesh, &inside);
    Ok(LevelStats { level: t, mass, base_mass: base.map(|_| base_mass), ell, components, holes })
}

/// `∫_{φ=t} |∇φ| dσ`, `∫_{φ=t} e^w/|∇φ| dσ` and `∫_{φ=t} e^{w/2} dσ` over
/// the interior contour (boundary portions excluded), same 2-point rule.
pub fn contour_integrals(field: &ScalarField, weight: &ScalarField, t: f64) -> Result<(f64, f64, f64)> {
    same_mesh(field, weight)?;
    let t = generic_level(field, t);
    let mesh = field.mesh();
    let (phi, w, verts) = (field.values(), weight.values(), mesh.vertices());
    let (mut flux, mut coarea, mut ell) = (0.0, 0.0, 0.0);
    for tri in mesh.triangles() {
        let f = tri.map(|v| phi[v]);
        let n_above = f.iter().filter(|&&x| x > t).count();
        if n_above == 0 || n_above == 3 {
            continue;
        }
        let p = tri.map(|v| verts[v]);
        let grad = linear_gradient(p, f).norm();
        if let Some(([a, b], [wa, wb])) = clip_triangle(p, f, tri.map(|v| w[v]), t).segment {
            let len = a.dist(b);
            flux += len * grad;
            for (x, wt) in SEGMENT_GAUSS_2 {
                let wx = wa + x * (wb - wa);
                coarea += len * wt * wx.exp() / grad;
                ell += len * wt * (0.5 * wx).exp();
            }
        }
    }
    Ok((flux, coarea, ell))
}

/// Contours of `{field = t}` chained through shared mesh edges.
pub fn contours(field: &ScalarField, t: f64) -> Vec<Contour> {
    let t = generic_level(field, t);
    let mesh = field.mesh();
    let (phi, verts) = (field.values(), mesh.vertices());
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut adjacency: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for tri in mesh.triangles() {
        let cut: Vec<(usize, usize)> = [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])]
            .into_iter()
            .filter(|&(a, b)| (phi[a] > t) != (phi[b] > t))
            .map(|(a, b)| key(a, b))
            .collect();
        if cut.len() == 2 {
            adjacency.entry(cut[0]).or_default().push(cut[1]);
            adjacency.entry(cut[1]).or_default().push(cut[0]);
        }
    }
    let point = |(a, b): (usize, usize)| {
        let s = (t - phi[a]) / (phi[b] - phi[a]);
        verts[a].lerp(verts[b], s)
    };
    let mut visited: HashMap<(usize, usize), bool> = HashMap::new();
    let mut out = Vec::new();
    let mut starts: Vec<(usize, usize)> = adjacency.iter().filter(|(_, n)| n.len() == 1).map(|(k, _)| *k).collect();
    starts.extend(adjacency.keys().copied());
    for start in starts {
        if visited.contains_key(&start) {
            continue;
        }
        let mut chain = vec![start];
        visited.insert(start, true);
        let mut cur = start;
        loop {
            let next = adjacency[&cur].iter().copied().find(|e| !visited.contains_key(e));
            match next {
                Some(e) => {
                    visited.insert(e, true);
                    chain.push(e);
                    cur = e;
                }
                None => break,
            }
        }
        let closed = chain.len() > 2 && adjacency[&cur].contains(&start) && adjacency[&start].len() == 2;
        out.push(Contour { points: chain.into_iter().map(point).collect(), closed });
    }
    out
}

/// Profile on `n_levels` equally spaced levels from 0 to `max field`.
pub fn level_profile(
    field: &ScalarField,
    weight: &ScalarField,
    n_levels: usize,
    base: Option<&ScalarField>,
) -> Result<LevelSetProfile> {
    if n_levels < 2 {
        return Err(Error::invalid("a profile needs at least two levels"));
    }
    let top = field.max();
    let mut profile = LevelSetProfile {
        levels: Vec::with_capacity(n_levels),
        mass: Vec::with_capacity(n_levels),
        base_mass: base.map(|_| Vec::with_capacity(n_levels)),
        ell: Vec::with_capacity(n_levels),
        components: Vec::with_capacity(n_levels),
        holes: Vec::with_capacity(n_levels),
    };
    for k in 0..n_levels {
        let t = top * k as f64 / (n_levels - 1) as f64;
        let s = level_stats(field, weight, base, t)?;
        profile.levels.push(t);
        profile.mass.push(s.mass);
        if let (Some(v), Some(b)) = (profile.base_mass.as_mut(), s.base_mass) {
            v.push(b);
        }
        profile.ell.push(s.ell);
        profile.components.push(s.components);
        profile.holes.push(s.holes);
    }
    Ok(profile)
}

/// `ℓ² - ½ m (8π - m)`; the mass must lie in `[0, 8π]`.
pub fn bol_defect(ell: f64, mass: f64) -> Result<f64> {
    if !(ell >= 0.0) {
        return Err(Error::invalid(format!("boundary weight {ell} is negative")));
    }
    if !(0.0..=EIGHT_PI * (1.0 + 1e-12)).contains(&mass) {
        return Err(Error::invalid(format!("mass {mass} outside [0, 8π]")));
    }
    Ok(ell * ell - 0.5 * mass * (EIGHT_PI - mass))
}

/// `(∫_∂ e^{h/2} dσ)² - 4π ∫ e^h dx` over the mesh of `h`.
pub fn huber_defect(h: &ScalarField) -> f64 {
    let l = h.boundary_weight();
    l * l - 4.0 * PI * h.total_mass()
}

/// Discrete Laplacian of `h` is `≥ -10 h²` at every interior vertex.
pub fn is_subharmonic(h: &ScalarField) -> Result<bool> {
    let res = h.mesh().resolution_h();
    let (_, neg_lap) = negative_laplacian(h)?;
    Ok(neg_lap.iter().all(|&v| -v >= -10.0 * res * res))
}

/// `perimeter² - 4π area`.
pub fn isoperimetric_defect(mesh: &Mesh) -> f64 {
    mesh.perimeter().powi(2) - 4.0 * PI * mesh.area()
}

/// `w = h₀ + h₋ + u` with `h₀` the discrete harmonic lifting of the trace
/// of `w`, `-Δ_h h₋ = f` (the Liouville residual) with zero trace, and
/// `-Δ_h u = e^w` with zero trace.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub h0: ScalarField,
    pub h_minus: ScalarField,
    /// `h₀ + h₋`.
    pub h: ScalarField,
    pub u: ScalarField,
    /// Interior vertices carrying `f`.
    pub interior: Vec<usize>,
    /// `f = -Δ_h w - e^w` at `interior`.
    pub f: Vec<f64>,
}

impl Decomposition {
    /// Largest `|-Δ_h u - e^h e^u|` over interior vertices.
    pub fn equation_residual(&self) -> Result<f64> {
        let (nodes, lap) = negative_laplacian(&self.u)?;
        let (h, u) = (self.h.values(), self.u.values());
        Ok(nodes.iter().zip(lap).map(|(&i, l)| (l - (h[i] + u[i]).exp()).abs()).fold(0.0, f64::max))
    }
}

pub fn decompose(w: &ScalarField) -> Result<Decomposition> {
    let mesh = w.mesh();
    let k = assemble_stiffness(mesh)?;
    let sys = DirichletSystem::new(mesh)?;
    let chol = SparseCholesky::factor(&sys.restrict_matrix(&k), sys.points())?;
    let report = liouville_residual(w, f64::INFINITY)?;
    let lumped = mesh.lumped_mass();
    let h0 = sys.solve(&k, &chol, &vec![0.0; sys.len()], w.values());
    let load: Vec<f64> = sys.interior().iter().zip(&report.residual).map(|(&i, f)| lumped[i] * f).collect();
    let h_minus = sys.extend(&chol.solve(&load), &vec![0.0; mesh.vertex_count()]);
    let h: Vec<f64> = h0.iter().zip(&h_minus).map(|(a, b)| a + b).collect();
    let mut u: Vec<f64> = w.values().iter().zip(&h).map(|(a, b)| a - b).collect();
    for &b in &mesh.boundary_nodes() {
        u[b] = 0.0;
    }
    Ok(Decomposition {
        h0: ScalarField::new(mesh.clone(), h0)?,
        h_minus: ScalarField::new(mesh.clone(), h_minus)?,
        h: ScalarField::new(mesh.clone(), h)?,
        u: ScalarField::new(mesh.clone(), u)?,
        interior: report.interior_nodes,
        f: report.residual,
    })
}

/// Zero extension of a gauge-normalized subsolution into the holes, with
/// its weak subsolution test against the interior hat functions.
#[derive(Debug, Clone)]
pub struct HatExtension {
    pub field: ScalarField,
    /// Ambient vertex of each vertex of the source mesh.
    pub vertex_map: Vec<usize>,
    /// `(∫∇ŵ·∇v_j - ∫e^ŵ v_j) / ∫v_j` at each ambient interior vertex `j`.
    pub weak_residual: Vec<f64>,
    pub max_weak_residual: f64,
    pub tolerance: f64,
    pub passes: bool,
}

fn quantize(p: Point, scale: f64) -> (i64, i64) {
    ((p.x / scale).round() as i64, (p.y / scale).round() as i64)
}

/// Matches each vertex of `from` to a vertex of `onto` at the same position.
fn match_vertices(from: &Mesh, onto: &Mesh) -> Result<Vec<usize>> {
    let scale = 1e-9 * onto.vertices().iter().fold(1.0f64, |a, p| a.max(p.norm()));
    let mut table: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in onto.vertices().iter().enumerate() {
        table.entry(quantize(p, scale)).or_default().push(i);
    }
    let mut out = Vec::with_capacity(from.vertex_count());
    for &p in from.vertices() {
        let (qx, qy) = quantize(p, scale);
        let mut hit = None;
        'search: for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(c) = table.get(&(qx + dx, qy + dy)) {
                    if let Some(&i) = c.iter().find(|&&i| onto.vertices()[i].dist(p) <= scale) {
                        hit = Some(i);
                        break 'search;
                    }
                }
            }
        }
        out.push(hit.ok_or_else(|| Error::MismatchedBoundary(format!("no ambient vertex at ({}, {})", p.x, p.y)))?);
    }
    Ok(out)
}

/// `ŵ = w` on the source mesh, `0` on the rest of `ambient`. The source
/// boundary must consist of ambient vertices; the default tolerance is
/// `10 h² max e^ŵ`.
pub fn extend_hat(w: &ScalarField, ambient: &Arc<Mesh>, tolerance: Option<f64>) -> Result<HatExtension> {
    let vertex_map = match_vertices(w.mesh(), ambient)?;
    let mut values = vec![0.0; ambient.vertex_count()];
    for (i, &j) in vertex_map.iter().enumerate() {
        values[j] = w.values()[i];
    }
    let field = ScalarField::new(ambient.clone(), values)?;
    let k = assemble_stiffness(ambient)?;
    let m = assemble_weighted_mass(&field);
    let sys = DirichletSystem::new(ambient)?;
    let lumped = ambient.lumped_mass();
    let kw = k.rows_mul(sys.interior(), field.values());
    let ones = vec![1.0; ambient.vertex_count()];
    let load = m.rows_mul(sys.interior(), &ones);
    let weak_residual: Vec<f64> =
        sys.interior().iter().enumerate().map(|(r, &j)| (kw[r] - load[r]) / lumped[j]).collect();
    let max_weak_residual = weak_residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let h = ambient.resolution_h();
    let tolerance = tolerance.unwrap_or(10.0 * h * h * field.max().exp());
    Ok(HatExtension { passes: max_weak_residual <= tolerance, field, vertex_map, weak_residual, max_weak_residual, tolerance })
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Triangles whose centroid satisfies `keep`.
pub fn centroid_mask(mesh: &Mesh, keep: impl Fn(Point) -> bool) -> Vec<bool> {
    (0..mesh.triangles().len())
        .map(|t| {
            let p = mesh.triangle_points(t);
            keep(Point::new((p[0].x + p[1].x + p[2].x) / 3.0, (p[0].y + p[1].y + p[2].y) / 3.0))
        })
        .collect()
}

/// Edge-connected components of the flagged triangles, each sorted, ordered
/// by smallest triangle index.
fn triangle_components(mesh: &Mesh, mask: &[bool]) -> Vec<Vec<usize>> {
    let tris = mesh.triangles();
    let mut uf = UnionFind::new(tris.len());
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (t, tri) in tris.iter().enumerate() {
        if !mask[t] {
            continue;
        }
        for (a, b) in [(tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])] {
            match owner.entry((a.min(b), a.max(b))) {
                std::collections::hash_map::Entry::Occupied(e) => uf.union(t, *e.get()),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(t);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for t in (0..tris.len()).filter(|&t| mask[t]) {
        groups.entry(uf.find(t)).or_default().push(t);
    }
    groups.into_values().collect()
}

fn select(mesh: &Mesh, set: &[usize]) -> Vec<[usize; 3]> {
    set.iter().map(|&t| mesh.triangles()[t]).collect()
}

fn region_mass(w: &ScalarField, set: &[usize]) -> f64 {
    let mesh = w.mesh();
    set.iter().map(|&t| triangle_exp_integral(mesh.triangle_area(t), mesh.triangles()[t].map(|v| w.values()[v]))).sum()
}

fn loop_weight(w: &ScalarField, lp: &[usize]) -> f64 {
    let p = w.mesh().vertices();
    (0..lp.len())
        .map(|k| {
            let (a, b) = (lp[k], lp[(k + 1) % lp.len()]);
            segment_half_exp_integral(p[a], p[b], w.values()[a], w.values()[b])
        })
        .sum()
}

fn mask_of(n: usize, set: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &t in set {
        m[t] = true;
    }
    m
}

/// Pieces of a multiply connected `ω` whose holes all contain part of the
/// complement of `Ω`.
#[derive(Debug, Clone)]
pub struct AppendixSplit {
    /// Triangles of the holes of `ω` lying in `Ω`.
    pub omega_star: Vec<bool>,
    /// Triangles of the holes of `ω` outside `Ω` (the filled gaps).
    pub omega_zero: Vec<bool>,
    /// Inner boundary loops of `ω` (ambient vertex indices).
    pub boundary_0: Vec<Vec<usize>>,
    /// Outer boundary loop of `ω`.
    pub boundary_1: Vec<usize>,
    pub mass_omega: f64,
    pub mass_omega_star: f64,
    pub mass_omega_zero: f64,
    /// `m̂` of the union of the holes, integrated directly.
    pub mass_holes: f64,
    /// `m̂` of `ω` with its holes filled.
    pub mass_filled: f64,
    pub ell_0: f64,
    pub ell_1: f64,
    pub perimeter_0: f64,
    pub area_holes: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditBranch {
    /// `m̂(ω* ∪ Ω₀) ≥ 8π`.
    LargeHoles,
    /// `m̂(ω* ∪ Ω₀) < 8π ≤ m̂` of the filled `ω`.
    LargeFill,
    /// Filled `ω` below `8π`: union/difference chain with `ŵ`.
    SmallFill,
    /// Holes are subdomains of `Ω`: filled-union chain.
    InteriorHoles,
    /// `ω` is a union of simply connected pieces.
    Disconnected,
}

impl AuditBranch {
    pub fn label(self) -> &'static str {
        match self {
            AuditBranch::LargeHoles => "case1",
            AuditBranch::LargeFill => "case2",
            AuditBranch::SmallFill => "case3",
            AuditBranch::InteriorHoles => "interior_holes",
            AuditBranch::Disconnected => "disconnected",
        }
    }
}

/// One evaluated inequality `lhs > rhs` (strict) or `lhs ≥ rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainRow {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
    pub margin: f64,
    pub ok: bool,
}

#[derive(Debug, Clone)]
pub struct AuditReport {
    pub branch: AuditBranch,
    pub split: Option<AppendixSplit>,
    pub rows: Vec<ChainRow>,
    pub mass: f64,
    pub ell: f64,
    /// `ℓ² - ½ m (8π - m)` for `ω`.
    pub final_defect: f64,
}

impl AuditReport {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(|r| r.ok)
    }
}

/// Relative slack granted to non-strict rows, which are equalities in the
/// limit for some configurations and so carry discretization error.
pub const AUDIT_SLACK: f64 = 1e-3;

struct Rows(Vec<ChainRow>);

impl Rows {
    fn push(&mut self, name: &str, lhs: f64, rhs: f64, strict: bool) {
        let margin = lhs - rhs;
        let ok = if strict { margin > 0.0 } else { margin >= -AUDIT_SLACK * lhs.abs().max(rhs.abs()) };
        self.0.push(ChainRow { name: name.to_string(), lhs, rhs, strict, margin, ok });
    }
}

fn bol_rhs(m: f64) -> f64 {
    m * (EIGHT_PI - m)
}

/// Audits the strict Bol inequality on `ω` (flagged by `in_omega`) inside
/// `Ω` (flagged by `in_domain`), both as triangle subsets of the ambient
/// mesh of `weight`, which carries `ŵ` (the weight on `Ω`, zero in the
/// filled gaps of `Ω`).
pub fn appendix_audit(weight: &ScalarField, in_domain: &[bool], in_omega: &[bool]) -> Result<AuditReport> {
    let mesh = weight.mesh();
    let nt = mesh.triangles().len();
    if in_domain.len() != nt || in_omega.len() != nt {
        return Err(Error::invalid("region masks must have one flag per triangle"));
    }
    if (0..nt).any(|t| in_omega[t] && !in_domain[t]) {
        return Err(Error::invalid("ω must lie inside Ω"));
    }
    let pieces = triangle_components(mesh, in_omega);
    if pieces.is_empty() {
        return Err(Error::invalid("ω is empty"));
    }
    let omega_set: Vec<usize> = (0..nt).filter(|&t| in_omega[t]).collect();
    let omega_loops = boundary_loops_of(&select(mesh, &omega_set))?;
    let mass = region_mass(weight, &omega_set);
    let ell: f64 = omega_loops.iter().map(|lp| loop_weight(weight, lp)).sum();
    let final_defect = ell * ell - 0.5 * bol_rhs(mass);
    let mut rows = Rows(Vec::new());

    if pieces.len() > 1 {
        let mut sum_sq = 0.0;
        let mut sum_bol = 0.0;
        for (j, piece) in pieces.iter().enumerate() {
            let loops = boundary_loops_of(&select(mesh, piece))?;
            if loops.len() != 1 {
                return Err(Error::UnsupportedTopology(
                    "disconnected ω with multiply connected pieces".into(),
                ));
            }
            let l = loop_weight(weight, &loops[0]);
            let m = region_mass(weight, piece);
            rows.push(&format!("piece_{j}_bol"), 2.0 * l * l, bol_rhs(m), false);
            sum_sq += l * l;
            sum_bol += bol_rhs(m);
        }
        rows.push("total_mass_budget", EIGHT_PI, mass, false);
        rows.push("cross_terms", 2.0 * ell * ell, 2.0 * sum_sq, true);
        rows.push("pieces_sum", 2.0 * sum_sq, sum_bol, false);
        rows.push("pieces_algebra", sum_bol, bol_rhs(mass), false);
        rows.push("final", 2.0 * ell * ell, bol_rhs(mass), true);
        return Ok(AuditReport { branch: AuditBranch::Disconnected, split: None, rows: rows.0, mass, ell, final_defect });
    }

    // holes of ω: complement components away from the ambient boundary
    let boundary_vertex = mesh.boundary_mask();
    let outside: Vec<bool> = in_omega.iter().map(|&b| !b).collect();
    let holes: Vec<Vec<usize>> = triangle_components(mesh, &outside)
        .into_iter()
        .filter(|c| !c.iter().any(|&t| mesh.triangles()[t].iter().any(|&v| boundary_vertex[v])))
        .collect();
    let inner_loops: Vec<Vec<usize>> = omega_loops.iter().filter(|lp| mesh.loop_signed_area(lp) < 0.0).cloned().collect();
    if inner_loops.len() != holes.len() {
        return Err(Error::UnsupportedTopology(
            "ambient mesh must fill every hole of ω".into(),
        ));
    }
    if holes.is_empty() {
        return Err(Error::UnsupportedTopology(
            "ω is simply connected; use the plain Bol defect".into(),
        ));
    }
    let outer: Vec<usize> = omega_loops.iter().find(|lp| mesh.loop_signed_area(lp) > 0.0).cloned().ok_or_else(
        || Error::invalid("ω has no outer boundary loop"),
    )?;
    let gap_in: Vec<bool> = holes.iter().map(|c| c.iter().any(|&t| !in_domain[t])).collect();
    let ell_1 = loop_weight(weight, &outer);
    let ell_0: f64 = inner_loops.iter().map(|lp| loop_weight(weight, lp)).sum();
    let hole_set: Vec<usize> = holes.iter().flatten().copied().collect();
    let mut filled_set = omega_set.clone();
    filled_set.extend_from_slice(&hole_set);
    let mass_filled = region_mass(weight, &filled_set);

    if gap_in.iter().all(|&g| !g) || gap_in.iter().all(|&g| g) && mass_filled < EIGHT_PI {
        // union/difference chain: filled ω against its holes
        let branch = if gap_in[0] { AuditBranch::SmallFill } else { AuditBranch::InteriorHoles };
        let mut hole_sq = 0.0;
        let mut hole_bol = 0.0;
        for (j, hole) in holes.iter().enumerate() {
            let loops = boundary_loops_of(&select(mesh, hole))?;
            if loops.len() != 1 {
                return Err(Error::UnsupportedTopology("hole of ω is not simply connected".into()));
            }
            let l = loop_weight(weight, &loops[0]);
            let m = region_mass(weight, hole);
            rows.push(&format!("hole_{j}_bol"), 2.0 * l * l, bol_rhs(m), false);
            hole_sq += l * l;
            hole_bol += bol_rhs(m);
        }
        rows.push("filled_mass_budget", EIGHT_PI, mass_filled, branch == AuditBranch::SmallFill);
        rows.push("filled_bol", 2.0 * ell_1 * ell_1, bol_rhs(mass_filled), false);
        rows.push("cross_terms", 2.0 * ell * ell, 2.0 * (ell_1 * ell_1 + hole_sq), true);
        rows.push("pieces_sum", 2.0 * (ell_1 * ell_1 + hole_sq), bol_rhs(mass_filled) + hole_bol, false);
        rows.push("pieces_algebra", bol_rhs(mass_filled) + hole_bol, bol_rhs(mass), false);
        rows.push("final", 2.0 * ell * ell, bol_rhs(mass), true);
        let split = (branch == AuditBranch::SmallFill)
            .then(|| build_split(weight, in_domain, &hole_set, inner_loops.clone(), outer.clone(), mass, mass_filled, ell_0, ell_1));
        return Ok(AuditReport { branch, split, rows: rows.0, mass, ell, final_defect });
    }
    if gap_in.iter().any(|&g| !g) {
        return Err(Error::UnsupportedTopology(
            "holes of ω mix gaps of Ω with subdomains of Ω".into(),
        ));
    }

    let split = build_split(weight, in_domain, &hole_set, inner_loops, outer, mass, mass_filled, ell_0, ell_1);
    let (m, ms, mz) = (mass, split.mass_omega_star, split.mass_omega_zero);
    let mh = ms + mz;
    let branch = if mh >= EIGHT_PI { AuditBranch::LargeHoles } else { AuditBranch::LargeFill };
    rows.push("omega_plus_star_budget", EIGHT_PI, m + ms, false);
    if branch == AuditBranch::LargeHoles {
        let p0 = split.perimeter_0;
        rows.push("holes_mass_threshold", mh, EIGHT_PI, false);
        rows.push("inner_weight_vs_length", 2.0 * ell_0 * ell_0, 2.0 * p0 * p0, false);
        rows.push("inner_isoperimetric", 2.0 * p0 * p0, EIGHT_PI * split.area_holes, false);
        rows.push("holes_area_vs_gap_mass", EIGHT_PI * split.area_holes, EIGHT_PI * mz, true);
        rows.push("inner_bound", 2.0 * ell_0 * ell_0, EIGHT_PI * (EIGHT_PI - ms), true);
        rows.push("outer_bound", 2.0 * ell_1 * ell_1, EIGHT_PI * (EIGHT_PI - m - ms), true);
        rows.push("cross_terms", 2.0 * ell * ell, 2.0 * (ell_1 * ell_1 + ell_0 * ell_0), true);
        let sum = bol_rhs(ms) + bol_rhs(m + ms);
        rows.push("pieces_sum", 2.0 * (ell_1 * ell_1 + ell_0 * ell_0), sum, true);
        rows.push("pieces_algebra", sum, bol_rhs(m), false);
    } else {
        rows.push("holes_mass_threshold", EIGHT_PI, mh, true);
        rows.push("filled_mass_threshold", mass_filled, EIGHT_PI, false);
        rows.push("inner_bol", 2.0 * ell_0 * ell_0, bol_rhs(mh), false);
        let floor = (4.0 * PI * mz).sqrt();
        rows.push("inner_huber", ell_0, floor, false);
        rows.push("outer_huber", ell_1, floor, false);
        rows.push("outer_bound", 2.0 * ell_1 * ell_1, EIGHT_PI * (EIGHT_PI - m - ms), true);
        let expansion = EIGHT_PI * (EIGHT_PI - m - ms) + bol_rhs(mh) + 16.0 * PI * mz;
        rows.push("expansion", 2.0 * ell * ell, expansion, true);
        rows.push("expansion_algebra", expansion, bol_rhs(m), false);
        rows.push("holes_budget", 16.0 * PI, 2.0 * ms + 2.0 * mz, true);
    }
    rows.push("final", 2.0 * ell * ell, bol_rhs(m), true);
    Ok(AuditReport { branch, split: Some(split), rows: rows.0, mass, ell, final_defect })
}

#[allow(clippy::too_many_arguments)]
fn build_split(
    weight: &ScalarField,
    in_domain: &[bool],
    hole_set: &[usize],
    boundary_0: Vec<Vec<usize>>,
    boundary_1: Vec<usize>,
    mass_omega: f64,
    mass_filled: f64,
    ell_0: f64,
    ell_1: f64,
) -> AppendixSplit {
    let mesh = weight.mesh();
    let nt = mesh.triangles().len();
    let star: Vec<usize> = hole_set.iter().copied().filter(|&t| in_domain[t]).collect();
    let zero: Vec<usize> = hole_set.iter().copied().filter(|&t| !in_domain[t]).collect();
    AppendixSplit {
        omega_star: mask_of(nt, &star),
        omega_zero: mask_of(nt, &zero),
        perimeter_0: boundary_0.iter().map(|lp| mesh.loop_length(lp)).sum(),
        area_holes: hole_set.iter().map(|&t| mesh.triangle_area(t)).sum(),
        boundary_0,
        boundary_1,
        mass_omega,
        mass_omega_star: region_mass(weight, &star),
        mass_omega_zero: region_mass(weight, &zero),
        mass_holes: region_mass(weight, hole_set),
        mass_filled,
        ell_0,
        ell_1,
    }
}

/// Convenience: `ŵ` on a polar ambient mesh from a field given by a closure
/// on `Ω` and zero elsewhere, together with the two masks.
pub fn polar_audit_setup(
    ambient: &Arc<Mesh>,
    weight_on_domain: impl Fn(Point) -> f64,
    in_domain: impl Fn(Point) -> bool,
    in_omega: impl Fn(Point) -> bool,
) -> Result<(ScalarField, Vec<bool>, Vec<bool>)> {
    let domain = centroid_mask(ambient, &in_domain);
    let omega = centroid_mask(ambient, &in_omega);
    let mut on_domain = vec![false; ambient.vertex_count()];
    for (t, tri) in ambient.triangles().iter().enumerate() {
        if domain[t] {
            for &v in tri {
                on_domain[v] = true;
            }
        }
    }
    let values = ambient
        .vertices()
        .iter()
        .enumerate()
        .map(|(v, &p)| if on_domain[v] { weight_on_domain(p) } else { 0.0 })
        .collect();
    Ok((ScalarField::new(ambient.clone(), values)?, domain, omega))
}
