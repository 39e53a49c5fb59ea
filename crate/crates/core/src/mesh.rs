//! Triangulations of disks, annuli, rectangles and conformal images of the
//! unit disk, with oriented boundary loops.
//!
//! Polar meshes are images of a hexagonal lattice: ring `k` of the lattice
//! carries `6k` nodes, is placed on a circle, and consecutive rings are
//! zipped by merging node angles. Near the centre of a filled disk the
//! circles are blended back into the flat hexagons so the stencil stays
//! symmetric where polar coordinates degenerate. Refinement regenerates the
//! lattice at half spacing, which is the 1→4 split with every new node put on
//! the generating parametrization (in particular back on the boundary).

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::conformal::ConformalMap;
use crate::error::{Error, Result};
use crate::geometry::{polygon_signed_area, signed_area, Point};

/// Generator data of a polar mesh: zone radii, rings per zone, lattice index
/// of the first ring, and the similarity applied afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarRecipe {
    breaks: Vec<f64>,
    rings: Vec<usize>,
    first_index: usize,
    scale: f64,
    offset: Point,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    resolution_h: f64,
    /// Positions before the conformal map (equal to `vertices` when unmapped).
    chart: Vec<Point>,
    map: Option<ConformalMap>,
    recipe: Option<PolarRecipe>,
}

impl Mesh {
    /// Builds a mesh from raw vertices and counterclockwise triangles.
    pub fn from_parts(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        Mesh::assemble(vertices.clone(), vertices, triangles, None, None)
    }

    fn assemble(
        vertices: Vec<Point>,
        chart: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        map: Option<ConformalMap>,
        recipe: Option<PolarRecipe>,
    ) -> Result<Mesh> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::invalid("mesh needs at least one triangle"));
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::invalid(format!("triangle {i} references a missing vertex")));
            }
            let a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
            if !(a > 0.0) {
                return Err(Error::DegenerateTriangle { index: i, area: a });
            }
        }
        let boundary_loops = boundary_loops_of(&triangles)?;
        let resolution_h = longest_edge(&vertices, &triangles);
        Ok(Mesh {
            vertices,
            triangles,
            boundary_loops,
            resolution_h,
            chart,
            map,
            recipe,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn resolution_h(&self) -> f64 {
        self.resolution_h
    }

    pub fn map(&self) -> Option<&ConformalMap> {
        self.map.as_ref()
    }

    /// Preimage positions in the unit disk for mapped meshes, the vertices otherwise.
    pub fn chart(&self) -> &[Point] {
        &self.chart
    }

    pub fn polar_recipe(&self) -> Option<&PolarRecipe> {
        self.recipe.as_ref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Unique undirected edges `(min, max)`, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges().len() as i64 + self.triangles.len() as i64
    }

    /// Loops with negative signed area (clockwise) bound holes.
    pub fn hole_count(&self) -> usize {
        self.boundary_loops.iter().filter(|l| self.loop_signed_area(l) < 0.0).count()
    }

    pub fn loop_signed_area(&self, lp: &[usize]) -> f64 {
        let pts: Vec<Point> = lp.iter().map(|&i| self.vertices[i]).collect();
        polygon_signed_area(&pts)
    }

    pub fn loop_length(&self, lp: &[usize]) -> f64 {
        (0..lp.len()).map(|i| self.vertices[lp[i]].dist(self.vertices[lp[(i + 1) % lp.len()]])).sum()
    }

    pub fn perimeter(&self) -> f64 {
        self.boundary_loops.iter().map(|l| self.loop_length(l)).sum()
    }

    /// Per-vertex flag: lies on a boundary loop.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.vertices.len()];
        for l in &self.boundary_loops {
            for &v in l {
                m[v] = true;
            }
        }
        m
    }

    /// Sorted boundary vertex indices.
    pub fn boundary_nodes(&self) -> Vec<usize> {
        let m = self.boundary_mask();
        (0..m.len()).filter(|&i| m[i]).collect()
    }

    /// Lumped (row-sum) mass: one third of the adjacent triangle areas.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            let a = self.triangle_area(t) / 3.0;
            for &v in tri {
                m[v] += a;
            }
        }
        m
    }

    /// Checks the topological invariants: consistent orientation, every
    /// edge shared by at most two triangles, closed simple boundary loops.
    pub fn validate(&self) -> Result<()> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        if directed.values().any(|&c| c > 1) {
            return Err(Error::invalid("inconsistent orientation or repeated edge"));
        }
        for l in &self.boundary_loops {
            let mut seen = l.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != l.len() || l.len() < 3 {
                return Err(Error::invalid("boundary loop is not simple"));
            }
        }
        Ok(())
    }

    /// Dilation about the origin.
    pub fn scaled(&self, s: f64) -> Mesh {
        let vertices = self.vertices.iter().map(|&p| p * s).collect();
        let (chart, map, recipe) = match &self.map {
            Some(m) => (self.chart.clone(), Some(m.scaled(s)), self.recipe.clone()),
            None => (
                self.chart.iter().map(|&p| p * s).collect(),
                None,
                self.recipe.clone().map(|r| PolarRecipe { scale: r.scale * s, offset: r.offset * s, ..r }),
            ),
        };
        Mesh {
            vertices,
            triangles: self.triangles.clone(),
            boundary_loops: self.boundary_loops.clone(),
            resolution_h: self.resolution_h * s,
            chart,
            map,
            recipe,
        }
    }

    pub fn translated(&self, offset: Point) -> Result<Mesh> {
        if self.map.is_some() {
            return Err(Error::invalid("cannot translate a conformally mapped mesh"));
        }
        let mut m = self.clone();
        for p in m.vertices.iter_mut().chain(m.chart.iter_mut()) {
            *p = *p + offset;
        }
        if let Some(r) = m.recipe.as_mut() {
            r.offset = r.offset + offset;
        }
        Ok(m)
    }

    /// Disjoint union of two unmapped meshes.
    pub fn disjoint_union(&self, other: &Mesh) -> Result<Mesh> {
        if self.map.is_some() || other.map.is_some() {
            return Err(Error::invalid("disjoint union of mapped meshes is not supported"));
        }
        let n = self.vertices.len();
        let mut vertices = self.vertices.clone();
        vertices.extend_from_slice(&other.vertices);
        let mut triangles = self.triangles.clone();
        triangles.extend(other.triangles.iter().map(|t| [t[0] + n, t[1] + n, t[2] + n]));
        Mesh::assemble(vertices.clone(), vertices, triangles, None, None)
    }

    /// Submesh made of the flagged triangles, plus the parent index of each new vertex.
    pub fn submesh(&self, keep: &[bool]) -> Result<(Mesh, Vec<usize>)> {
        let mut new_index = vec![usize::MAX; self.vertices.len()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if keep[t] {
                for &v in tri {
                    new_index[v] = 0;
                }
            }
        }
        let mut parent = Vec::new();
        for (v, slot) in new_index.iter_mut().enumerate() {
            if *slot == 0 {
                *slot = parent.len();
                parent.push(v);
            }
        }
        let triangles: Vec<[usize; 3]> = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(t, _)| keep[*t])
            .map(|(_, tri)| [new_index[tri[0]], new_index[tri[1]], new_index[tri[2]]])
            .collect();
        let vertices = parent.iter().map(|&v| self.vertices[v]).collect();
        let chart = parent.iter().map(|&v| self.chart[v]).collect();
        let mesh = Mesh::assemble(vertices, chart, triangles, self.map.clone(), None)?;
        Ok((mesh, parent))
    }

    /// Splits every triangle into four. Polar meshes are regenerated on the
    /// lattice of half spacing (same combinatorics, new nodes on the
    /// parametrization); other meshes use edge midpoints.
    pub fn refine(&self) -> Mesh {
        if let Some(r) = &self.recipe {
            let fine = PolarRecipe {
                rings: r.rings.iter().map(|n| 2 * n).collect(),
                first_index: 2 * r.first_index,
                ..r.clone()
            };
            let (chart, triangles) = polar_chart(&fine.breaks, &fine.rings, fine.first_index);
            let chart: Vec<Point> = chart.into_iter().map(|p| p * fine.scale + fine.offset).collect();
            let vertices = apply_map(&self.map, &chart);
            return Mesh::assemble(vertices, chart, triangles, self.map.clone(), Some(fine))
                .expect("refinement of a valid mesh is valid");
        }
        let mut chart = self.chart.clone();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut triangles = Vec::with_capacity(4 * self.triangles.len());
        let mut midpoint = |a: usize, b: usize, chart: &mut Vec<Point>| -> usize {
            let key = (a.min(b), a.max(b));
            *mid.entry(key).or_insert_with(|| {
                chart.push(chart[key.0].midpoint(chart[key.1]));
                chart.len() - 1
            })
        };
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut chart);
            let bc = midpoint(b, c, &mut chart);
            let ca = midpoint(c, a, &mut chart);
            triangles.push([a, ab, ca]);
            triangles.push([ab, b, bc]);
            triangles.push([ca, bc, c]);
            triangles.push([ab, bc, ca]);
        }
        let vertices = apply_map(&self.map, &chart);
        Mesh::assemble(vertices, chart, triangles, self.map.clone(), None).expect("refinement of a valid mesh is valid")
    }

    /// Short content hash used to tie field dumps to their mesh.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for p in &self.vertices {
            h.update(p.x.to_le_bytes());
            h.update(p.y.to_le_bytes());
        }
        for t in &self.triangles {
            for &v in t {
                h.update((v as u64).to_le_bytes());
            }
        }
        let d = h.finalize();
        d.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Plain-text dump: `V E F k`, vertices, triangles, then one line per boundary loop.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{} {} {} {}",
            self.vertices.len(),
            self.edges().len(),
            self.triangles.len(),
            self.boundary_loops.len()
        );
        for p in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", p.x, p.y);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        for l in &self.boundary_loops {
            let line: Vec<String> = l.iter().map(|v| v.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

fn apply_map(map: &Option<ConformalMap>, chart: &[Point]) -> Vec<Point> {
    match map {
        Some(m) => chart.iter().map(|&p| m.apply(p)).collect(),
        None => chart.to_vec(),
    }
}

fn longest_edge(vertices: &[Point], triangles: &[[usize; 3]]) -> f64 {
    triangles
        .iter()
        .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
        .map(|(a, b)| vertices[a].dist(vertices[b]))
        .fold(0.0, f64::max)
}

/// Chains boundary edges (directed so the mesh is on the left) into loops.
pub(crate) fn boundary_loops_of(triangles: &[[usize; 3]]) -> Result<Vec<Vec<usize>>> {
    let mut directed: HashMap<(usize, usize), u32> = HashMap::new();
    for t in triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            *directed.entry((a, b)).or_default() += 1;
        }
    }
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut starts: Vec<(usize, usize)> = Vec::new();
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            next.entry(a).or_default().push(b);
            starts.push((a, b));
        }
    }
    for v in next.values_mut() {
        v.sort_unstable();
    }
    starts.sort_unstable();
    let mut used: HashMap<(usize, usize), bool> = HashMap::new();
    let mut loops = Vec::new();
    for &(a, b) in &starts {
        if used.contains_key(&(a, b)) {
            continue;
        }
        let mut lp = vec![a];
        used.insert((a, b), true);
        let mut cur = b;
        let mut guard = 0;
        while cur != a {
            lp.push(cur);
            let nxt = next
                .get(&cur)
                .and_then(|c| c.iter().copied().find(|&n| !used.contains_key(&(cur, n))))
                .ok_or_else(|| Error::invalid("open boundary chain"))?;
            used.insert((cur, nxt), true);
            cur = nxt;
            guard += 1;
            if guard > starts.len() {
                return Err(Error::invalid("boundary chain does not close"));
            }
        }
        loops.push(lp);
    }
    Ok(loops)
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

/// Quintic smoothstep from 0 below `a` to 1 above `b`.
fn smoothstep(x: f64, a: f64, b: f64) -> f64 {
    let t = ((x - a) / (b - a)).clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Vertices and triangles of a polar lattice mesh. Ring `k` of the lattice
/// has `6k` nodes; consecutive rings are one lattice step apart.
fn polar_chart(breaks: &[f64], rings: &[usize], first_index: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let filled = breaks[0] == 0.0;
    let core_radius = breaks[1];
    let mut chart: Vec<Point> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();

    let push_ring = |k: usize, r: f64, chart: &mut Vec<Point>| -> (usize, usize) {
        let count = 6 * k;
        let first = chart.len();
        let blend = if filled && r < core_radius { smoothstep(r / core_radius, 0.0, 1.0) } else { 1.0 };
        for m in 0..count {
            let circle = Point::polar(r, 2.0 * PI * m as f64 / count as f64);
            let p = if blend < 1.0 {
                let (s, tau) = (m / k, (m % k) as f64 / k as f64);
                let c0 = Point::polar(r, PI / 3.0 * s as f64);
                let c1 = Point::polar(r, PI / 3.0 * (s + 1) as f64);
                let hex = c0.lerp(c1, tau);
                hex.lerp(circle, blend)
            } else {
                circle
            };
            chart.push(p);
        }
        (first, count)
    };

    let mut k = first_index;
    let mut prev = if filled {
        chart.push(Point::new(0.0, 0.0));
        None
    } else {
        Some(push_ring(k, breaks[0], &mut chart))
    };
    for (w, &n) in breaks.windows(2).zip(rings) {
        let dz = (w[1] - w[0]) / n as f64;
        for j in 1..=n {
            let r = if j == n { w[1] } else { w[0] + dz * j as f64 };
            k += 1;
            let ring = push_ring(k, r, &mut chart);
            match prev {
                None => {
                    for m in 0..ring.1 {
                        triangles.push([ring.0 + m, ring.0 + (m + 1) % ring.1, 0]);
                    }
                }
                Some(inner) => zip_rings(inner, ring, &mut triangles),
            }
            prev = Some(ring);
        }
    }
    (chart, triangles)
}

/// Triangulates the strip between two concentric rings `(first, count)` by
/// merging their node angles.
fn zip_rings(inner: (usize, usize), outer: (usize, usize), triangles: &mut Vec<[usize; 3]>) {
    let (ni, no) = (inner.1, outer.1);
    let inn = |k: usize| inner.0 + k % ni;
    let out = |k: usize| outer.0 + k % no;
    let (mut i, mut j) = (0, 0);
    while i < ni || j < no {
        // next inner angle (i+1)/ni against next outer angle (j+1)/no
        let advance_inner = j == no || (i < ni && (i + 1) * no <= (j + 1) * ni);
        if advance_inner {
            triangles.push([inn(i), out(j), inn(i + 1)]);
            i += 1;
        } else {
            triangles.push([out(j), out(j + 1), inn(i)]);
            j += 1;
        }
    }
}

/// Concentric polar mesh with rings exactly at every radius in `breaks` and
/// radial spacing at most `dr`. `breaks[0] == 0` gives a filled disk,
/// otherwise an annulus.
pub fn mesh_polar_zones_spacing(breaks: &[f64], dr: f64) -> Result<Mesh> {
    check_positive("ring spacing", dr)?;
    if breaks.len() < 2 || breaks[0] < 0.0 || breaks.windows(2).any(|w| !(w[1] > w[0])) || !breaks[breaks.len() - 1].is_finite() {
        return Err(Error::invalid("zone breaks must be increasing, non-negative, at least two"));
    }
    let rings: Vec<usize> = breaks.windows(2).map(|w| ((w[1] - w[0]) / dr - 1e-9).ceil().max(1.0) as usize).collect();
    let first_index = if breaks[0] == 0.0 {
        0
    } else {
        let dz = (breaks[1] - breaks[0]) / rings[0] as f64;
        ((breaks[0] / dz).round() as usize).max(1)
    };
    let (chart, triangles) = polar_chart(breaks, &rings, first_index);
    let recipe = PolarRecipe { breaks: breaks.to_vec(), rings, first_index, scale: 1.0, offset: Point::new(0.0, 0.0) };
    Mesh::assemble(chart.clone(), chart, triangles, None, Some(recipe))
}

/// Polar zone mesh whose longest edge is at most `target_h`.
pub fn mesh_polar_zones(breaks: &[f64], target_h: f64) -> Result<Mesh> {
    check_positive("target_h", target_h)?;
    let mut dr = target_h / 1.2;
    loop {
        let m = mesh_polar_zones_spacing(breaks, dr)?;
        if m.resolution_h() <= target_h {
            return Ok(m);
        }
        dr *= 0.95;
    }
}

pub fn mesh_disk(radius: f64, target_h: f64) -> Result<Mesh> {
    check_positive("radius", radius)?;
    check_positive("target_h", target_h)?;
    if target_h >= radius {
        return Err(Error::invalid("target_h must be smaller than the radius"));
    }
    mesh_polar_zones(&[0.0, radius], target_h)
}

pub fn mesh_annulus(r_in: f64, r_out: f64, target_h: f64) -> Result<Mesh> {
    check_positive("r_in", r_in)?;
    check_positive("target_h", target_h)?;
    if !(r_out > r_in) {
        return Err(Error::invalid(format!("annulus needs r_in < r_out, got {r_in} >= {r_out}")));
    }
    mesh_polar_zones(&[r_in, r_out], target_h)
}

/// Axis-aligned rectangle split into right triangles.
pub fn mesh_rectangle(lower: Point, upper: Point, target_h: f64) -> Result<Mesh> {
    check_positive("target_h", target_h)?;
    let (w, hgt) = (upper.x - lower.x, upper.y - lower.y);
    check_positive("width", w)?;
    check_positive("height", hgt)?;
    // diagonal of a cell is the longest edge
    let cell = target_h / 2f64.sqrt();
    let nx = (w / cell).ceil() as usize;
    let ny = (hgt / cell).ceil() as usize;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(lower.x + w * i as f64 / nx as f64, lower.y + hgt * j as f64 / ny as f64));
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(vertices, triangles)
}

/// Image under `map` of a polar mesh of the unit disk, with longest image
/// edge at most `target_h`.
pub fn mesh_mapped_disk(map: &ConformalMap, target_h: f64) -> Result<Mesh> {
    check_positive("target_h", target_h)?;
    map.univalence_check()?;
    let mut chart_h = (target_h / map.max_abs_derivative()).min(0.5);
    loop {
        let base = mesh_polar_zones(&[0.0, 1.0], chart_h)?;
        let vertices = apply_map(&Some(map.clone()), &base.chart);
        let m = Mesh::assemble(vertices, base.chart, base.triangles, Some(map.clone()), base.recipe)?;
        if m.resolution_h() <= target_h {
            return Ok(m);
        }
        chart_h *= 0.9;
    }
}

/// Wraps a mesh for sharing between fields.
pub fn shared(m: Mesh) -> Arc<Mesh> {
    Arc::new(m)
}
