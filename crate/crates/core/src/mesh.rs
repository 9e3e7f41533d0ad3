//! Conforming P1 triangulations: validation, text I/O, disk generators,
//! uniform and longest-edge refinement, and point location.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Point2;

/// Smallest interior angle accepted by [`Mesh::new`], in degrees.
pub const MIN_ANGLE_DEG: f64 = 15.0;

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    lumped: Vec<f64>,
}

/// Result of a refinement: the new mesh plus, for every vertex added, the two
/// endpoints of the edge it bisects (for prolongating P1 fields).
#[derive(Debug, Clone)]
pub struct Refined {
    pub mesh: Mesh,
    pub parents: Vec<(usize, usize)>,
}

impl Refined {
    /// Linear interpolation of a coarse vertex field onto the refined mesh.
    pub fn prolongate(&self, coarse: &[f64]) -> Vec<f64> {
        let mut out = coarse.to_vec();
        for &(a, b) in &self.parents {
            out.push(0.5 * (out[a] + out[b]));
        }
        out
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn signed_area(p: [Point2; 3]) -> f64 {
    0.5 * (p[1] - p[0]).cross(p[2] - p[0])
}

fn min_angle(p: [Point2; 3]) -> f64 {
    let mut worst = f64::INFINITY;
    for i in 0..3 {
        let a = p[(i + 1) % 3] - p[i];
        let b = p[(i + 2) % 3] - p[i];
        let ang = a.cross(b).abs().atan2(a.dot(b));
        worst = worst.min(ang);
    }
    worst.to_degrees()
}

impl Mesh {
    /// Builds and validates a mesh: indices in range, positive orientation,
    /// conformity, consistent boundary flags forming one closed loop, and
    /// minimum angle of at least [`MIN_ANGLE_DEG`].
    pub fn new(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Self> {
        let mesh = Self::assemble(vertices, triangles, boundary)?;
        let worst = mesh.min_angle_deg();
        if worst < MIN_ANGLE_DEG {
            return Err(Error::InvalidMesh(format!(
                "minimum angle {worst:.2}° below {MIN_ANGLE_DEG}°"
            )));
        }
        Ok(mesh)
    }

    /// As [`Mesh::new`] without the angle check.
    pub fn new_unchecked_angles(
        vertices: Vec<Point2>,
        triangles: Vec<[usize; 3]>,
        boundary: Vec<bool>,
    ) -> Result<Self> {
        Self::assemble(vertices, triangles, boundary)
    }

    fn assemble(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>, boundary: Vec<bool>) -> Result<Self> {
        let n = vertices.len();
        if boundary.len() != n {
            return Err(Error::InvalidMesh("boundary flag count differs from vertex count".into()));
        }
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p}")));
        }
        let mut lumped = vec![0.0; n];
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= n) || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} has invalid indices {tri:?}")));
            }
            let area = signed_area([vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]]);
            if area <= 0.0 {
                return Err(Error::InvalidMesh(format!("triangle {t} is not positively oriented")));
            }
            for &v in tri {
                lumped[v] += area / 3.0;
            }
            for i in 0..3 {
                *edges.entry(edge_key(tri[i], tri[(i + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut boundary_degree = vec![0usize; n];
        for (&(a, b), &count) in &edges {
            match count {
                1 => {
                    if !boundary[a] || !boundary[b] {
                        return Err(Error::InvalidMesh(format!(
                            "boundary edge ({a}, {b}) has an endpoint not flagged as boundary"
                        )));
                    }
                    boundary_degree[a] += 1;
                    boundary_degree[b] += 1;
                }
                2 => {}
                _ => return Err(Error::InvalidMesh(format!("edge ({a}, {b}) shared by {count} triangles"))),
            }
        }
        for v in 0..n {
            if lumped[v] == 0.0 {
                return Err(Error::InvalidMesh(format!("vertex {v} belongs to no triangle")));
            }
            if boundary[v] != (boundary_degree[v] > 0) || (boundary[v] && boundary_degree[v] != 2) {
                return Err(Error::InvalidMesh(format!("vertex {v} has an inconsistent boundary flag")));
            }
        }
        let mesh = Self { vertices, triangles, boundary, lumped };
        let nb = mesh.boundary.iter().filter(|&&b| b).count();
        if mesh.boundary_loop().len() != nb {
            return Err(Error::InvalidMesh("boundary is not a single closed polygon".into()));
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Lumped (one third of adjacent triangle area) vertex areas.
    pub fn lumped_areas(&self) -> &[f64] {
        &self.lumped
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(self.triangle_points(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Longest edge of triangle `t`.
    pub fn diameter_of(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        p[0].dist(p[1]).max(p[1].dist(p[2])).max(p[2].dist(p[0]))
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter_of(t)).fold(0.0, f64::max)
    }

    pub fn h_min(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.diameter_of(t)).fold(f64::INFINITY, f64::min)
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.n_triangles())
            .map(|t| min_angle(self.triangle_points(t)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.n_vertices()).filter(|&v| !self.boundary[v]).collect()
    }

    fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut edges = HashMap::new();
        for tri in &self.triangles {
            for i in 0..3 {
                *edges.entry(edge_key(tri[i], tri[(i + 1) % 3])).or_insert(0) += 1;
            }
        }
        edges
    }

    /// Boundary edges oriented with the domain on their left.
    pub fn boundary_edges(&self) -> Vec<(usize, usize)> {
        let counts = self.edge_counts();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                if counts[&edge_key(a, b)] == 1 {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Boundary vertices in counter-clockwise order.
    pub fn boundary_loop(&self) -> Vec<usize> {
        let next: HashMap<usize, usize> = self.boundary_edges().into_iter().collect();
        let Some(&start) = next.keys().min() else {
            return Vec::new();
        };
        let mut out = vec![start];
        let mut v = next[&start];
        while v != start && out.len() <= next.len() {
            out.push(v);
            v = match next.get(&v) {
                Some(&w) => w,
                None => break,
            };
        }
        out
    }

    /// Largest distance between two boundary vertices.
    pub fn diameter(&self) -> f64 {
        let b: Vec<Point2> = self.boundary_loop().iter().map(|&v| self.vertices[v]).collect();
        let mut d: f64 = 0.0;
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                d = d.max(b[i].dist(b[j]));
            }
        }
        d
    }

    /// Point-in-polygon test against the boundary loop (crossing number).
    pub fn contains(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.boundary_edges() {
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            if (pa.y > p.y) != (pb.y > p.y) {
                let x = pa.x + (p.y - pa.y) * (pb.x - pa.x) / (pb.y - pa.y);
                if p.x < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    /// Distance from `p` to the boundary polygon.
    pub fn boundary_distance(&self, p: Point2) -> f64 {
        self.boundary_edges()
            .into_iter()
            .map(|(a, b)| {
                let (pa, pb) = (self.vertices[a], self.vertices[b]);
                let e = pb - pa;
                let t = ((p - pa).dot(e) / e.norm_sq()).clamp(0.0, 1.0);
                p.dist(pa + e * t)
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nearest_vertex(&self, p: Point2) -> usize {
        (0..self.n_vertices())
            .min_by(|&a, &b| self.vertices[a].dist(p).total_cmp(&self.vertices[b].dist(p)))
            .expect("mesh has vertices")
    }

    // ---------------------------------------------------------------- I/O

    /// Parses the text format: a line `V T`, then `V` lines `x y flag`, then
    /// `T` lines `i j k` with 0-based indices.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad header `{header}`"))))
            .collect::<Result<_>>()?;
        let [nv, nt] = counts[..] else {
            return Err(Error::Parse(format!("header must be `V T`, got `{header}`")));
        };
        let mut vertices = Vec::with_capacity(nv);
        let mut boundary = Vec::with_capacity(nv);
        for i in 0..nv {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing vertex line {i}")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(Error::Parse(format!("vertex line {i}: expected `x y flag`")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Parse(format!("vertex line {i}: bad number `{s}`")));
            vertices.push(Point2::new(num(f[0])?, num(f[1])?));
            boundary.push(match f[2] {
                "0" => false,
                "1" => true,
                other => return Err(Error::Parse(format!("vertex line {i}: bad boundary flag `{other}`"))),
            });
        }
        let mut triangles = Vec::with_capacity(nt);
        for t in 0..nt {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing triangle line {t}")))?;
            let idx: Vec<usize> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("triangle line {t}: bad index `{s}`"))))
                .collect::<Result<_>>()?;
            let [a, b, c] = idx[..] else {
                return Err(Error::Parse(format!("triangle line {t}: expected three indices")));
            };
            triangles.push([a, b, c]);
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing content after triangles".into()));
        }
        Self::new(vertices, triangles, boundary)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.n_vertices(), self.n_triangles());
        for (p, &b) in self.vertices.iter().zip(&self.boundary) {
            let _ = writeln!(s, "{:.17e} {:.17e} {}", p.x, p.y, u8::from(b));
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        s
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    // --------------------------------------------------------- generators

    /// Quasi-uniform mesh of the unit disk with `n_boundary` boundary
    /// vertices, built from concentric rings around a center vertex.
    pub fn disk_uniform(n_boundary: usize) -> Result<Self> {
        let n_boundary = n_boundary.max(6);
        let rings = ((n_boundary as f64) / (2.0 * PI)).round().max(1.0) as usize;
        let radii: Vec<f64> = (1..=rings).map(|k| k as f64 / rings as f64).collect();
        let counts: Vec<usize> = (1..=rings)
            .map(|k| ((n_boundary * k) as f64 / rings as f64).round().max(6.0) as usize)
            .collect();
        Self::disk_from_rings(&radii, &counts)
    }

    /// Unit-disk mesh graded towards the origin: local size
    /// `clamp(ratio·r, h_core, h_max)`.
    pub fn disk_graded(h_core: f64, ratio: f64, h_max: f64) -> Result<Self> {
        if !(h_core > 0.0 && ratio > 0.0 && h_max >= h_core) {
            return Err(Error::InvalidInput("grading requires 0 < h_core ≤ h_max and ratio > 0".into()));
        }
        let mut radii = Vec::new();
        let mut r: f64 = 0.0;
        while r < 1.0 {
            r += (ratio * r).clamp(h_core, h_max);
            radii.push(r);
        }
        let last = *radii.last().expect("at least one ring");
        radii.iter_mut().for_each(|r| *r /= last);
        let mut counts = Vec::with_capacity(radii.len());
        let mut prev = 0.0;
        for &r in &radii {
            let h = r - prev;
            counts.push(((2.0 * PI * r / h).round() as usize).max(6));
            prev = r;
        }
        Self::disk_from_rings(&radii, &counts)
    }

    fn disk_from_rings(radii: &[f64], counts: &[usize]) -> Result<Self> {
        let mut vertices = vec![Point2::ORIGIN];
        let mut rings: Vec<Vec<usize>> = Vec::with_capacity(radii.len());
        let mut angles: Vec<f64> = Vec::with_capacity(radii.len());
        let mut offset = 0.0;
        for (&r, &n) in radii.iter().zip(counts) {
            offset += PI / n as f64;
            let start = vertices.len();
            for i in 0..n {
                vertices.push(Point2::from_polar(r, offset + 2.0 * PI * i as f64 / n as f64));
            }
            rings.push((start..start + n).collect());
            angles.push(offset);
        }
        let mut triangles = Vec::new();
        // fan around the center
        let first = &rings[0];
        for i in 0..first.len() {
            triangles.push([0, first[i], first[(i + 1) % first.len()]]);
        }
        for k in 1..rings.len() {
            zipper(&vertices, &rings[k - 1], &rings[k], &mut triangles);
        }
        let mut boundary = vec![false; vertices.len()];
        for &v in rings.last().expect("rings") {
            boundary[v] = true;
        }
        Self::new(vertices, triangles, boundary)
    }

    // --------------------------------------------------------- refinement

    /// Red refinement: every triangle split into four. Boundary midpoints are
    /// mapped through `project` when given (e.g. onto a curved boundary).
    pub fn refine_uniform(&self, project: Option<&dyn Fn(Point2) -> Point2>) -> Result<Refined> {
        let counts = self.edge_counts();
        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary.clone();
        let mut parents = Vec::new();
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point2>, boundary: &mut Vec<bool>| -> usize {
            let key = edge_key(a, b);
            *mid.entry(key).or_insert_with(|| {
                let on_boundary = counts[&key] == 1;
                let mut p = (vertices[a] + vertices[b]) * 0.5;
                if on_boundary {
                    if let Some(f) = project {
                        p = f(p);
                    }
                }
                vertices.push(p);
                boundary.push(on_boundary);
                parents.push(key);
                vertices.len() - 1
            })
        };
        let mut triangles = Vec::with_capacity(4 * self.n_triangles());
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices, &mut boundary);
            let bc = midpoint(b, c, &mut vertices, &mut boundary);
            let ca = midpoint(c, a, &mut vertices, &mut boundary);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        let mesh = Self::new_unchecked_angles(vertices, triangles, boundary)?;
        Ok(Refined { mesh, parents })
    }

    fn longest_edge(&self, t: usize) -> (usize, usize) {
        let tri = self.triangles[t];
        (0..3)
            .map(|i| edge_key(tri[i], tri[(i + 1) % 3]))
            .max_by(|&(a, b), &(c, d)| {
                let la = self.vertices[a].dist(self.vertices[b]);
                let lb = self.vertices[c].dist(self.vertices[d]);
                la.total_cmp(&lb).then((a, b).cmp(&(c, d)))
            })
            .expect("three edges")
    }

    /// Edges that a longest-edge bisection of the `marked` triangles splits,
    /// after conformity closure.
    fn bisection_closure(&self, marked: &[bool]) -> HashMap<(usize, usize), usize> {
        let longest: Vec<(usize, usize)> = (0..self.n_triangles()).map(|t| self.longest_edge(t)).collect();
        let mut split: HashMap<(usize, usize), usize> = HashMap::new();
        for t in 0..self.n_triangles() {
            if marked[t] {
                split.insert(longest[t], usize::MAX);
            }
        }
        loop {
            let mut changed = false;
            for (t, tri) in self.triangles.iter().enumerate() {
                if split.contains_key(&longest[t]) {
                    continue;
                }
                let touched = (0..3).any(|i| split.contains_key(&edge_key(tri[i], tri[(i + 1) % 3])));
                if touched {
                    split.insert(longest[t], usize::MAX);
                    changed = true;
                }
            }
            if !changed {
                return split;
            }
        }
    }

    /// Number of vertices a longest-edge bisection of `marked` would add.
    pub fn bisection_cost(&self, marked: &[bool]) -> usize {
        self.bisection_closure(marked).len()
    }

    /// Conforming longest-edge (Rivara) bisection of the marked triangles.
    pub fn bisect_marked(&self, marked: &[bool], project: Option<&dyn Fn(Point2) -> Point2>) -> Result<Refined> {
        if marked.len() != self.n_triangles() {
            return Err(Error::InvalidInput("marker length differs from triangle count".into()));
        }
        let counts = self.edge_counts();
        let mut split = self.bisection_closure(marked);
        let mut vertices = self.vertices.clone();
        let mut boundary = self.boundary.clone();
        let mut parents = Vec::new();
        let mut keys: Vec<(usize, usize)> = split.keys().copied().collect();
        keys.sort_unstable();
        for key in keys {
            let on_boundary = counts[&key] == 1;
            let mut p = (vertices[key.0] + vertices[key.1]) * 0.5;
            if on_boundary {
                if let Some(f) = project {
                    p = f(p);
                }
            }
            vertices.push(p);
            boundary.push(on_boundary);
            parents.push(key);
            split.insert(key, vertices.len() - 1);
        }
        let mut triangles = Vec::with_capacity(self.n_triangles() + 2 * split.len());
        for &tri in &self.triangles {
            bisect_recursive(&vertices, &split, tri, &mut triangles);
        }
        let mesh = Self::new_unchecked_angles(vertices, triangles, boundary)?;
        Ok(Refined { mesh, parents })
    }
}

fn bisect_recursive(
    vertices: &[Point2],
    split: &HashMap<(usize, usize), usize>,
    tri: [usize; 3],
    out: &mut Vec<[usize; 3]>,
) {
    // longest marked edge of this (sub)triangle
    let best = (0..3)
        .filter_map(|i| {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            split.get(&edge_key(a, b)).map(|&m| (i, m, vertices[a].dist(vertices[b])))
        })
        .max_by(|x, y| x.2.total_cmp(&y.2).then(y.0.cmp(&x.0)));
    match best {
        None => out.push(tri),
        Some((i, m, _)) => {
            let (a, b, c) = (tri[i], tri[(i + 1) % 3], tri[(i + 2) % 3]);
            bisect_recursive(vertices, split, [a, m, c], out);
            bisect_recursive(vertices, split, [m, b, c], out);
        }
    }
}

/// Triangulates the annulus between two counter-clockwise vertex rings,
/// choosing the shorter diagonal at each step.
fn zipper(vertices: &[Point2], inner: &[usize], outer: &[usize], out: &mut Vec<[usize; 3]>) {
    let (na, nb) = (inner.len(), outer.len());
    let a0 = vertices[inner[0]];
    let j0 = (0..nb)
        .min_by(|&p, &q| vertices[outer[p]].dist(a0).total_cmp(&vertices[outer[q]].dist(a0)))
        .expect("non-empty ring");
    let a = |i: usize| inner[i % na];
    let b = |j: usize| outer[(j0 + j) % nb];
    let (mut i, mut j) = (0, 0);
    while i < na || j < nb {
        let advance_inner = if i == na {
            false
        } else if j == nb {
            true
        } else {
            vertices[a(i + 1)].dist(vertices[b(j)]) <= vertices[a(i)].dist(vertices[b(j + 1)])
        };
        if advance_inner {
            out.push([a(i), b(j), a(i + 1)]);
            i += 1;
        } else {
            out.push([a(i), b(j), b(j + 1)]);
            j += 1;
        }
    }
    // rings run counter-clockwise, so these come out clockwise
    for t in out.iter_mut().rev().take(na + nb) {
        let p = [vertices[t[0]], vertices[t[1]], vertices[t[2]]];
        if signed_area(p) < 0.0 {
            t.swap(1, 2);
        }
    }
}

/// Nearest point on the unit circle (radial projection).
pub fn project_to_unit_circle(p: Point2) -> Point2 {
    let r = p.norm();
    if r == 0.0 {
        p
    } else {
        p * (1.0 / r)
    }
}

/// Bucket grid for locating the triangle containing a point.
#[derive(Debug, Clone)]
pub struct Locator {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl Locator {
    pub fn new(mesh: &Mesh) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        for p in mesh.vertices() {
            lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let target = (mesh.n_triangles() as f64).sqrt().ceil().max(1.0);
        let cell = ((hi.x - lo.x).max(hi.y - lo.y) / target).max(f64::MIN_POSITIVE);
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let p = mesh.triangle_points(t);
            let ix = |x: f64| (((x - lo.x) / cell).floor() as usize).min(nx - 1);
            let iy = |y: f64| (((y - lo.y) / cell).floor() as usize).min(ny - 1);
            let (x0, x1) = (ix(p.iter().map(|q| q.x).fold(f64::MAX, f64::min)), ix(p.iter().map(|q| q.x).fold(f64::MIN, f64::max)));
            let (y0, y1) = (iy(p.iter().map(|q| q.y).fold(f64::MAX, f64::min)), iy(p.iter().map(|q| q.y).fold(f64::MIN, f64::max)));
            for gx in x0..=x1 {
                for gy in y0..=y1 {
                    buckets[gy * nx + gx].push(t);
                }
            }
        }
        Self { origin: lo, cell, nx, ny, buckets }
    }

    /// Triangle containing `p` and its barycentric coordinates.
    pub fn locate(&self, mesh: &Mesh, p: Point2) -> Option<(usize, [f64; 3])> {
        let gx = ((p.x - self.origin.x) / self.cell).floor();
        let gy = ((p.y - self.origin.y) / self.cell).floor();
        if gx < 0.0 || gy < 0.0 || gx as usize >= self.nx || gy as usize >= self.ny {
            return None;
        }
        let tol = -1e-12;
        for &t in &self.buckets[gy as usize * self.nx + gx as usize] {
            let bary = barycentric(mesh.triangle_points(t), p);
            if bary.iter().all(|&l| l >= tol) {
                return Some((t, bary));
            }
        }
        None
    }

    /// P1 interpolation of a vertex field at `p`.
    pub fn interpolate(&self, mesh: &Mesh, field: &[f64], p: Point2) -> Option<f64> {
        let (t, l) = self.locate(mesh, p)?;
        let tri = mesh.triangles()[t];
        Some(l[0] * field[tri[0]] + l[1] * field[tri[1]] + l[2] * field[tri[2]])
    }
}

pub fn barycentric(t: [Point2; 3], p: Point2) -> [f64; 3] {
    let area = (t[1] - t[0]).cross(t[2] - t[0]);
    let l1 = (p - t[0]).cross(t[2] - t[0]) / area;
    let l2 = (t[1] - t[0]).cross(p - t[0]) / area;
    [1.0 - l1 - l2, l1, l2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_disk_is_valid() {
        let m = Mesh::disk_uniform(64).unwrap();
        assert_eq!(m.boundary_loop().len(), 64);
        assert!((m.total_area() - PI).abs() < 0.02);
        assert!(m.min_angle_deg() >= MIN_ANGLE_DEG);
        assert!((m.diameter() - 2.0).abs() < 1e-3);
        assert!(m.contains(Point2::new(0.3, 0.2)));
        assert!(!m.contains(Point2::new(1.1, 0.0)));
    }

    #[test]
    fn graded_disk_is_valid() {
        let m = Mesh::disk_graded(0.01, 0.2, 0.1).unwrap();
        assert!(m.min_angle_deg() >= MIN_ANGLE_DEG);
        let near = m.vertices().iter().filter(|p| p.norm() < 0.05).count();
        assert!(near > 20);
    }

    #[test]
    fn text_round_trip() {
        let m = Mesh::disk_uniform(24).unwrap();
        let back = Mesh::parse(&m.to_text()).unwrap();
        assert_eq!(back.n_vertices(), m.n_vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert!(Mesh::parse("3 1\n0 0 1\n1 0 1\n").is_err());
    }

    #[test]
    fn rejects_bad_orientation() {
        let v = vec![Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(0.0, 1.0)];
        let err = Mesh::new(v, vec![[0, 2, 1]], vec![true; 3]).unwrap_err();
        assert!(matches!(err, Error::InvalidMesh(_)));
    }

    #[test]
    fn uniform_refinement_quadruples() {
        let m = Mesh::disk_uniform(32).unwrap();
        let r = m.refine_uniform(Some(&project_to_unit_circle)).unwrap();
        assert_eq!(r.mesh.n_triangles(), 4 * m.n_triangles());
        assert_eq!(r.mesh.n_vertices(), m.n_vertices() + r.parents.len());
        for v in r.mesh.boundary_loop() {
            assert!((r.mesh.vertices()[v].norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bisection_is_conforming() {
        let m = Mesh::disk_uniform(32).unwrap();
        let marked: Vec<bool> = (0..m.n_triangles()).map(|t| t % 7 == 0).collect();
        let r = m.bisect_marked(&marked, Some(&project_to_unit_circle)).unwrap();
        assert!(r.mesh.n_triangles() > m.n_triangles());
        assert!(r.mesh.min_angle_deg() >= MIN_ANGLE_DEG);
        assert!((r.mesh.total_area() - m.total_area()).abs() < 0.01);
    }

    #[test]
    fn locator_interpolates_linear_fields() {
        let m = Mesh::disk_uniform(40).unwrap();
        let loc = Locator::new(&m);
        let field: Vec<f64> = m.vertices().iter().map(|p| 2.0 * p.x - p.y + 0.5).collect();
        for p in [Point2::new(0.1, 0.2), Point2::new(-0.6, 0.3), Point2::new(0.0, -0.9)] {
            let v = loc.interpolate(&m, &field, p).unwrap();
            assert!((v - (2.0 * p.x - p.y + 0.5)).abs() < 1e-12);
        }
    }
}
