//! Grasp objects: analytic primitives, tessellated convex polyhedra and
//! imported triangle meshes, with signed-distance queries in the object
//! frame and a seeded procedural generator.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{self, M3, V3};
use crate::math::{self, PI, TAU};
use crate::rng;

/// Vertex-count thresholds separating geometric complexity bins.
pub const LOW_COMPLEXITY_BELOW: usize = 5000;
pub const HIGH_COMPLEXITY_ABOVE: usize = 7000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeshError {
    #[error("unsupported mesh: {0}")]
    UnsupportedMesh(&'static str),
    #[error("unsupported mesh: face {face} references vertex {vertex} of {count}")]
    BadIndex { face: usize, vertex: usize, count: usize },
    #[error("unsupported mesh: Euler characteristic V-E+F = {chi}, expected 2")]
    NotSphereLike { chi: i64 },
}

/// Closed, consistently oriented triangle mesh centred on its vertex
/// centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriMesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<[usize; 3]>,
    radius: f64,
}

impl TriMesh {
    /// Validates the topology (every edge shared by exactly two faces with
    /// opposite orientation, Euler characteristic 2), re-centres the mesh and
    /// orients faces outward.
    pub fn new(mut vertices: Vec<[f64; 3]>, mut faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if vertices.len() < 4 || faces.len() < 4 {
            return Err(MeshError::UnsupportedMesh("fewer than 4 vertices or faces"));
        }
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                if v >= nv {
                    return Err(MeshError::BadIndex {
                        face: fi,
                        vertex: v,
                        count: nv,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::UnsupportedMesh("degenerate face"));
            }
        }
        let mut directed: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for f in &faces {
            for k in 0..3 {
                *directed.entry((f[k], f[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut undirected = 0i64;
        for (&(a, b), &n) in &directed {
            if n != 1 {
                return Err(MeshError::UnsupportedMesh("edge used twice in the same direction"));
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Err(MeshError::UnsupportedMesh("open boundary edge (not watertight)"));
            }
            if a < b {
                undirected += 1;
            }
        }
        let used: alloc::collections::BTreeSet<usize> = faces.iter().flatten().copied().collect();
        let chi = used.len() as i64 - undirected + faces.len() as i64;
        if chi != 2 {
            return Err(MeshError::NotSphereLike { chi });
        }

        let mut c = [0.0; 3];
        for v in &vertices {
            for i in 0..3 {
                c[i] += v[i] / nv as f64;
            }
        }
        for v in &mut vertices {
            for i in 0..3 {
                v[i] -= c[i];
            }
        }
        let p = |i: usize| V3::from(vertices[i]);
        let volume: f64 = faces
            .iter()
            .map(|f| p(f[0]).dot(&p(f[1]).cross(&p(f[2]))) / 6.0)
            .sum();
        if volume.abs() < 1e-12 {
            return Err(MeshError::UnsupportedMesh("zero enclosed volume"));
        }
        if volume < 0.0 {
            for f in &mut faces {
                f.swap(1, 2);
            }
        }
        let radius = vertices
            .iter()
            .map(|v| geometry::norm(&V3::from(*v)))
            .fold(0.0, f64::max);
        Ok(Self {
            vertices,
            faces,
            radius,
        })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    fn v(&self, i: usize) -> V3 {
        V3::from(self.vertices[i])
    }

    fn closest(&self, p: &V3) -> (V3, f64) {
        let mut best = (V3::zeros(), f64::INFINITY);
        for f in &self.faces {
            let q = geometry::closest_on_triangle(p, &self.v(f[0]), &self.v(f[1]), &self.v(f[2]));
            let d = (p - q).norm_squared();
            if d < best.1 {
                best = (q, d);
            }
        }
        (best.0, math::sqrt(best.1))
    }

    fn winding(&self, p: &V3) -> f64 {
        let s: f64 = self
            .faces
            .iter()
            .map(|f| geometry::solid_angle(p, &self.v(f[0]), &self.v(f[1]), &self.v(f[2])))
            .sum();
        s / (4.0 * PI)
    }

    fn sdf(&self, p: &V3) -> f64 {
        let n = geometry::norm(p);
        if n > self.radius * 1.5 {
            // Far field: the closest triangle still has to be found, but the
            // sign is known without a winding-number pass.
            return self.closest(p).1;
        }
        let (_, d) = self.closest(p);
        if self.winding(p) > 0.5 {
            -d
        } else {
            d
        }
    }

    pub fn euler_characteristic(&self) -> i64 {
        let mut edges = alloc::collections::BTreeSet::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                edges.insert((a.min(b), a.max(b)));
            }
        }
        self.vertices.len() as i64 - edges.len() as i64 + self.faces.len() as i64
    }
}

/// Geometry of an object in its own frame (centred at the origin).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Icosphere of the given subdivision level; contact uses the exact
    /// sphere.
    Sphere { radius: f64, subdivisions: u32 },
    Box { half: [f64; 3] },
    /// Thin box for lateral grasps; the thin dimension is `y`.
    Plate { half: [f64; 3] },
    /// Tessellated ellipsoid with an exact vertex count; contact uses an
    /// analytic ellipsoid distance.
    Polyhedron { semi_axes: [f64; 3], vertex_count: usize },
    Mesh { mesh: Arc<TriMesh> },
}

fn box_sdf(p: &V3, h: &[f64; 3]) -> f64 {
    let q = V3::new(p.x.abs() - h[0], p.y.abs() - h[1], p.z.abs() - h[2]);
    let out = V3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0));
    geometry::norm(&out) + q.x.max(q.y).max(q.z).min(0.0)
}

fn box_normal(p: &V3, h: &[f64; 3]) -> V3 {
    let q = V3::new(p.x.abs() - h[0], p.y.abs() - h[1], p.z.abs() - h[2]);
    let sgn = |x: f64| if x < 0.0 { -1.0 } else { 1.0 };
    if q.x > 0.0 || q.y > 0.0 || q.z > 0.0 {
        let out = V3::new(q.x.max(0.0) * sgn(p.x), q.y.max(0.0) * sgn(p.y), q.z.max(0.0) * sgn(p.z));
        return out / geometry::norm(&out);
    }
    let mut n = V3::zeros();
    let k = if q.x >= q.y && q.x >= q.z {
        0
    } else if q.y >= q.z {
        1
    } else {
        2
    };
    n[k] = sgn(p[k]);
    n
}

fn ellipsoid_sdf(p: &V3, r: &[f64; 3]) -> f64 {
    let a = V3::new(p.x / r[0], p.y / r[1], p.z / r[2]);
    let b = V3::new(a.x / r[0], a.y / r[1], a.z / r[2]);
    let k0 = geometry::norm(&a);
    let k1 = geometry::norm(&b);
    if k1 == 0.0 {
        return -r[0].min(r[1]).min(r[2]);
    }
    k0 * (k0 - 1.0) / k1
}

impl Shape {
    pub fn vertex_count(&self) -> usize {
        match self {
            Shape::Sphere { subdivisions, .. } => icosphere_vertex_count(*subdivisions),
            Shape::Box { .. } | Shape::Plate { .. } => 8,
            Shape::Polyhedron { vertex_count, .. } => *vertex_count,
            Shape::Mesh { mesh } => mesh.vertices.len(),
        }
    }

    pub fn bounding_radius(&self) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => *radius,
            Shape::Box { half } | Shape::Plate { half } => geometry::norm(&V3::from(*half)),
            Shape::Polyhedron { semi_axes, .. } => semi_axes.iter().copied().fold(0.0, f64::max),
            Shape::Mesh { mesh } => mesh.radius,
        }
    }

    /// Signed distance in the object frame (negative inside).
    pub fn sdf(&self, p: &V3) -> f64 {
        match self {
            Shape::Sphere { radius, .. } => geometry::norm(p) - radius,
            Shape::Box { half } | Shape::Plate { half } => box_sdf(p, half),
            Shape::Polyhedron { semi_axes, .. } => ellipsoid_sdf(p, semi_axes),
            Shape::Mesh { mesh } => mesh.sdf(p),
        }
    }

    /// Closest surface point and outward unit normal there.
    pub fn surface_point(&self, p: &V3) -> (V3, V3) {
        match self {
            Shape::Sphere { radius, .. } => {
                let n = geometry::norm(p);
                let dir = if n > 0.0 { p / n } else { V3::z() };
                (dir * *radius, dir)
            }
            Shape::Box { half } | Shape::Plate { half } => {
                let n = box_normal(p, half);
                let d = box_sdf(p, half);
                let q = p - n * d;
                (q, n)
            }
            Shape::Polyhedron { semi_axes, .. } => {
                // Newton projection onto the zero level set; the normal is
                // the implicit-surface gradient `(x/a², y/b², z/c²)`.
                let grad = |q: &V3| {
                    let g = V3::new(q.x / (semi_axes[0] * semi_axes[0]), q.y / (semi_axes[1] * semi_axes[1]), q.z / (semi_axes[2] * semi_axes[2]));
                    let gn = geometry::norm(&g);
                    if gn > 0.0 {
                        g / gn
                    } else {
                        V3::z()
                    }
                };
                let mut q = *p;
                for _ in 0..32 {
                    let d = ellipsoid_sdf(&q, semi_axes);
                    if d.abs() < 1e-12 {
                        break;
                    }
                    q -= grad(&q) * d;
                }
                let n = grad(&q);
                (q, n)
            }
            Shape::Mesh { mesh } => {
                let (q, d) = mesh.closest(p);
                let inside = mesh.winding(p) > 0.5;
                let n = if d > 1e-12 {
                    let n = (p - q) / d;
                    if inside {
                        -n
                    } else {
                        n
                    }
                } else {
                    let dir = geometry::norm(p);
                    if dir > 0.0 {
                        p / dir
                    } else {
                        V3::z()
                    }
                };
                (q, n)
            }
        }
    }

    /// Extreme points of the shape along unit direction `dir`: the points
    /// that touch a plane with outward normal `dir`.
    pub fn support_points(&self, dir: &V3) -> Vec<V3> {
        match self {
            Shape::Sphere { radius, .. } => vec![dir * *radius],
            Shape::Polyhedron { semi_axes, .. } => {
                let a2 = V3::new(semi_axes[0] * semi_axes[0], semi_axes[1] * semi_axes[1], semi_axes[2] * semi_axes[2]);
                let num = V3::new(a2.x * dir.x, a2.y * dir.y, a2.z * dir.z);
                let s = math::sqrt(num.dot(dir));
                vec![num / s]
            }
            Shape::Box { half } | Shape::Plate { half } => {
                let corners = box_corners(half);
                extreme(&corners, dir)
            }
            Shape::Mesh { mesh } => {
                let pts: Vec<V3> = mesh.vertices.iter().map(|v| V3::from(*v)).collect();
                extreme(&pts, dir)
            }
        }
    }

    /// Support function `max_p p·dir`.
    pub fn extent(&self, dir: &V3) -> f64 {
        self.support_points(dir)
            .iter()
            .map(|p| p.dot(dir))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Explicit triangulation, for export and inspection.
    pub fn tessellate(&self) -> TriMesh {
        match self {
            Shape::Sphere { radius, subdivisions } => icosphere(*radius, *subdivisions),
            Shape::Box { half } | Shape::Plate { half } => box_mesh(half),
            Shape::Polyhedron {
                semi_axes,
                vertex_count,
            } => ellipsoid_mesh(semi_axes, *vertex_count),
            Shape::Mesh { mesh } => (**mesh).clone(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Shape::Sphere { .. } => "sphere",
            Shape::Box { .. } => "box",
            Shape::Plate { .. } => "plate",
            Shape::Polyhedron { .. } => "polyhedron",
            Shape::Mesh { .. } => "mesh",
        }
    }
}

fn box_corners(h: &[f64; 3]) -> Vec<V3> {
    let mut v = Vec::with_capacity(8);
    for &sx in &[-1.0, 1.0] {
        for &sy in &[-1.0, 1.0] {
            for &sz in &[-1.0, 1.0] {
                v.push(V3::new(sx * h[0], sy * h[1], sz * h[2]));
            }
        }
    }
    v
}

fn extreme(pts: &[V3], dir: &V3) -> Vec<V3> {
    let m = pts.iter().map(|p| p.dot(dir)).fold(f64::NEG_INFINITY, f64::max);
    let scale = pts.iter().map(geometry::norm).fold(0.0, f64::max);
    pts.iter()
        .filter(|p| p.dot(dir) >= m - 1e-9 * scale.max(1.0))
        .copied()
        .collect()
}

pub fn icosphere_vertex_count(subdivisions: u32) -> usize {
    10 * 4usize.pow(subdivisions) + 2
}

fn box_mesh(h: &[f64; 3]) -> TriMesh {
    let c = box_corners(h);
    let vertices: Vec<[f64; 3]> = c.iter().map(|p| [p.x, p.y, p.z]).collect();
    // Corner index = 4·ix + 2·iy + iz.
    let quads = [
        [0, 1, 3, 2], // -x
        [4, 6, 7, 5], // +x
        [0, 4, 5, 1], // -y
        [2, 3, 7, 6], // +y
        [0, 2, 6, 4], // -z
        [1, 5, 7, 3], // +z
    ];
    let mut faces = Vec::new();
    for q in quads {
        faces.push([q[0], q[1], q[2]]);
        faces.push([q[0], q[2], q[3]]);
    }
    TriMesh::new(vertices, faces).expect("box topology is closed")
}

fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let t = (1.0 + math::sqrt(5.0)) / 2.0;
    let mut verts: Vec<V3> = [
        [-1.0, t, 0.0],
        [1.0, t, 0.0],
        [-1.0, -t, 0.0],
        [1.0, -t, 0.0],
        [0.0, -1.0, t],
        [0.0, 1.0, t],
        [0.0, -1.0, -t],
        [0.0, 1.0, -t],
        [t, 0.0, -1.0],
        [t, 0.0, 1.0],
        [-t, 0.0, -1.0],
        [-t, 0.0, 1.0],
    ]
    .iter()
    .map(|v| {
        let p = V3::from(*v);
        p / geometry::norm(&p)
    })
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<V3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                let m = (verts[a] + verts[b]) / 2.0;
                verts.push(m / geometry::norm(&m));
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for f in &faces {
            let a = mid(f[0], f[1], &mut verts);
            let b = mid(f[1], f[2], &mut verts);
            let c = mid(f[2], f[0], &mut verts);
            next.push([f[0], a, c]);
            next.push([f[1], b, a]);
            next.push([f[2], c, b]);
            next.push([a, b, c]);
        }
        faces = next;
    }
    let vertices = verts.iter().map(|p| [p.x * radius, p.y * radius, p.z * radius]).collect();
    TriMesh::new(vertices, faces).expect("icosphere topology is closed")
}

/// UV-sphere layout achieving exactly `n` vertices: `rings × segs + 2`
/// lattice vertices plus extra vertices splitting edges of the first ring.
fn uv_layout(n: usize) -> (usize, usize, usize) {
    let n = n.max(8);
    let segs = (math::sqrt((n - 2) as f64) as usize).max(3);
    let rings = ((n - 2) / segs).max(2);
    let extra = n - 2 - rings * segs;
    (rings, segs, extra)
}

fn ellipsoid_mesh(r: &[f64; 3], n: usize) -> TriMesh {
    let (rings, segs, extra) = uv_layout(n);
    let mut vertices: Vec<[f64; 3]> = Vec::with_capacity(n);
    let on_surface = |theta: f64, phi: f64| {
        [
            r[0] * math::sin(theta) * math::cos(phi),
            r[1] * math::sin(theta) * math::sin(phi),
            r[2] * math::cos(theta),
        ]
    };
    vertices.push([0.0, 0.0, r[2]]);
    for i in 0..rings {
        let theta = PI * (i + 1) as f64 / (rings + 1) as f64;
        for j in 0..segs {
            vertices.push(on_surface(theta, TAU * j as f64 / segs as f64));
        }
    }
    vertices.push([0.0, 0.0, -r[2]]);
    let top = 0;
    let bottom = vertices.len() - 1;
    let idx = |i: usize, j: usize| 1 + i * segs + (j % segs);
    let mut faces = Vec::new();
    let theta0 = PI / (rings + 1) as f64;
    for j in 0..segs {
        let (a, b) = (idx(0, j), idx(0, j + 1));
        let split = j < extra;
        let m = if split {
            vertices.push(on_surface(theta0, TAU * (j as f64 + 0.5) / segs as f64));
            Some(vertices.len() - 1)
        } else {
            None
        };
        match m {
            Some(m) => {
                faces.push([top, a, m]);
                faces.push([top, m, b]);
            }
            None => faces.push([top, a, b]),
        }
        for i in 0..rings - 1 {
            let (c, d) = (idx(i + 1, j), idx(i + 1, j + 1));
            let (a, b) = (idx(i, j), idx(i, j + 1));
            faces.push([a, c, d]);
            if i == 0 {
                if let Some(m) = m {
                    faces.push([a, d, m]);
                    faces.push([m, d, b]);
                    continue;
                }
            }
            faces.push([a, d, b]);
        }
        let (a, b) = (idx(rings - 1, j), idx(rings - 1, j + 1));
        faces.push([a, bottom, b]);
    }
    TriMesh::new(vertices, faces).expect("ellipsoid topology is closed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComplexityBin {
    Low,
    Medium,
    High,
}

impl ComplexityBin {
    pub const ALL: [ComplexityBin; 3] = [ComplexityBin::Low, ComplexityBin::Medium, ComplexityBin::High];

    pub fn of_vertex_count(n: usize) -> Self {
        if n < LOW_COMPLEXITY_BELOW {
            ComplexityBin::Low
        } else if n > HIGH_COMPLEXITY_ABOVE {
            ComplexityBin::High
        } else {
            ComplexityBin::Medium
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ComplexityBin::Low => "low",
            ComplexityBin::Medium => "medium",
            ComplexityBin::High => "high",
        }
    }
}

/// A placed object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectModel {
    pub shape: Shape,
    pub mass: f64,
    /// Object-frame origin in the task frame.
    pub position: [f64; 3],
    /// Unit quaternion `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

impl ObjectModel {
    pub fn new(shape: Shape, mass: f64) -> Self {
        Self {
            shape,
            mass,
            position: [0.0; 3],
            orientation: [1.0, 0.0, 0.0, 0.0],
        }
    }

    pub fn with_yaw(mut self, yaw: f64) -> Self {
        self.orientation = geometry::quat_from_yaw(yaw);
        self
    }

    pub fn vertex_count(&self) -> usize {
        self.shape.vertex_count()
    }

    pub fn complexity_bin(&self) -> ComplexityBin {
        ComplexityBin::of_vertex_count(self.vertex_count())
    }

    pub fn rotation(&self) -> M3 {
        geometry::quat_to_matrix(self.orientation)
    }

    pub fn center(&self) -> V3 {
        V3::from(self.position)
    }

    /// Support function in the task frame.
    pub fn extent(&self, dir: &V3) -> f64 {
        let r = self.rotation();
        self.shape.extent(&(r.transpose() * dir)) + self.center().dot(dir)
    }

    /// Support points in the task frame.
    pub fn support_points(&self, dir: &V3) -> Vec<V3> {
        let r = self.rotation();
        let c = self.center();
        self.shape
            .support_points(&(r.transpose() * dir))
            .into_iter()
            .map(|p| r * p + c)
            .collect()
    }
}

impl fmt::Display for ObjectModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({} vertices, mass {:.3})", self.shape.kind_name(), self.vertex_count(), self.mass)
    }
}

/// Families the procedural generator can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectKind {
    Sphere,
    Box,
    Polyhedron,
    ThinPlate,
    /// Sphere, box or polyhedron, chosen per object.
    Mixed,
}

impl ObjectKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sphere" => Some(Self::Sphere),
            "box" => Some(Self::Box),
            "polyhedron" => Some(Self::Polyhedron),
            "thin-plate" | "plate" => Some(Self::ThinPlate),
            "mixed" => Some(Self::Mixed),
            _ => None,
        }
    }
}

/// Draws one object of `kind`.
pub fn random_object<R: Rng + ?Sized>(kind: ObjectKind, rng: &mut R) -> ObjectModel {
    let kind = match kind {
        ObjectKind::Mixed => match rng.random_range(0..3) {
            0 => ObjectKind::Sphere,
            1 => ObjectKind::Box,
            _ => ObjectKind::Polyhedron,
        },
        k => k,
    };
    let shape = match kind {
        ObjectKind::Sphere => Shape::Sphere {
            radius: rng.random_range(0.6..=1.4),
            subdivisions: rng.random_range(3..=5),
        },
        ObjectKind::Box => Shape::Box {
            half: core::array::from_fn(|_| rng.random_range(0.4..=1.0)),
        },
        ObjectKind::Polyhedron => Shape::Polyhedron {
            semi_axes: core::array::from_fn(|_| rng.random_range(0.5..=1.3)),
            vertex_count: rng.random_range(1000..=10000),
        },
        ObjectKind::ThinPlate => Shape::Plate {
            half: [
                rng.random_range(0.5..=1.5) / 2.0,
                rng.random_range(0.05..=0.25) / 2.0,
                rng.random_range(0.5..=1.4) / 2.0,
            ],
        },
        ObjectKind::Mixed => unreachable!(),
    };
    let mass = rng.random_range(0.5..=2.0);
    let obj = ObjectModel::new(shape, mass);
    if kind == ObjectKind::ThinPlate {
        obj
    } else {
        obj.with_yaw(rng.random_range(0.0..TAU))
    }
}

/// `count` objects of `kind`, reproducible from `seed`.
pub fn generate_objects(kind: ObjectKind, count: usize, seed: u64) -> Vec<ObjectModel> {
    (0..count)
        .map(|i| random_object(kind, &mut rng::stream(seed, "object", i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn complexity_thresholds() {
        assert_eq!(ComplexityBin::of_vertex_count(2562), ComplexityBin::Low);
        assert_eq!(ComplexityBin::of_vertex_count(6000), ComplexityBin::Medium);
        assert_eq!(ComplexityBin::of_vertex_count(7001), ComplexityBin::High);
        assert_eq!(ComplexityBin::of_vertex_count(5000), ComplexityBin::Medium);
        assert_eq!(ComplexityBin::of_vertex_count(7000), ComplexityBin::Medium);
        assert_eq!(ComplexityBin::of_vertex_count(4999), ComplexityBin::Low);
    }

    #[test]
    fn icosphere_counts_match_formula() {
        for k in 0..=4 {
            let m = icosphere(1.0, k);
            assert_eq!(m.vertices.len(), icosphere_vertex_count(k));
            assert_eq!(m.euler_characteristic(), 2);
        }
        assert_eq!(icosphere_vertex_count(4), 2562);
    }

    #[test]
    fn polyhedron_vertex_counts_are_exact() {
        for n in [1000, 1001, 2047, 4999, 6000, 7001, 10000] {
            let m = ellipsoid_mesh(&[1.0, 0.8, 0.6], n);
            assert_eq!(m.vertices.len(), n, "n = {n}");
            assert_eq!(m.euler_characteristic(), 2);
        }
    }

    #[test]
    fn open_mesh_is_rejected() {
        let m = box_mesh(&[1.0, 1.0, 1.0]);
        let mut faces = m.faces.clone();
        faces.pop();
        assert!(matches!(
            TriMesh::new(m.vertices.clone(), faces),
            Err(MeshError::UnsupportedMesh(_))
        ));
    }

    #[test]
    fn mesh_sdf_matches_box() {
        let h = [0.7, 0.4, 0.5];
        let mesh = Shape::Mesh {
            mesh: Arc::new(box_mesh(&h)),
        };
        let b = Shape::Box { half: h };
        for p in [V3::new(0.1, 0.2, 0.0), V3::new(1.5, -0.3, 0.2), V3::new(-0.2, 0.1, -2.0), V3::new(0.9, 0.9, 0.9)] {
            assert!((mesh.sdf(&p) - b.sdf(&p)).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn generator_is_seeded() {
        let a = generate_objects(ObjectKind::ThinPlate, 10, 7);
        let b = generate_objects(ObjectKind::ThinPlate, 10, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        for o in &a {
            let Shape::Plate { half } = o.shape else { panic!() };
            assert!(half[1] < half[0] && half[1] < half[2]);
        }
        assert_ne!(a, generate_objects(ObjectKind::ThinPlate, 10, 8));
    }

    #[test]
    fn support_points() {
        let b = ObjectModel::new(Shape::Box { half: [0.5, 0.6, 0.7] }, 1.0);
        let s = b.support_points(&-V3::z());
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|p| (p.z + 0.7).abs() < 1e-12));
        let e = Shape::Polyhedron {
            semi_axes: [1.0, 0.8, 0.6],
            vertex_count: 1000,
        };
        assert!((e.extent(&V3::x()) - 1.0).abs() < 1e-12);
    }

    fn pt() -> impl Strategy<Value = V3> {
        (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0).prop_map(|(x, y, z)| V3::new(x, y, z))
    }

    proptest! {
        #[test]
        fn surface_points_have_zero_distance(p in pt(), seed in 0u64..50) {
            let obj = random_object(ObjectKind::Mixed, &mut rng::stream(seed, "t", 0));
            let (q, n) = obj.shape.surface_point(&p);
            prop_assert!(obj.shape.sdf(&q).abs() < 1e-3);
            prop_assert!((geometry::norm(&n) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn box_sdf_is_exact_outside(p in pt()) {
            let h = [0.5, 0.3, 0.4];
            let d = box_sdf(&p, &h);
            let c = V3::new(p.x.clamp(-h[0], h[0]), p.y.clamp(-h[1], h[1]), p.z.clamp(-h[2], h[2]));
            if d > 0.0 {
                prop_assert!((d - geometry::norm(&(p - c))).abs() < 1e-12);
            }
        }
    }
}
