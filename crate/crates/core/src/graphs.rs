//! Finite windows (balls around a root) of k-regular trees, Z^d and {p,q}
//! tilings of H², plus discrete half-spaces.

use crate::error::{invalid, Error, Result};
use crate::hypgeom::{self, Point};
use crate::rng::hash2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, VecDeque};

/// Explicit windows larger than this are refused.
pub const MAX_VERTICES: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Family {
    Tree { k: usize },
    Grid { d: usize },
    Tiling { p: usize, q: usize },
    Cycle { n: usize },
    Custom,
}

impl Family {
    /// Degree of every vertex of the infinite graph, if the family is regular.
    pub fn degree(&self) -> Option<usize> {
        match *self {
            Family::Tree { k } => Some(k),
            Family::Grid { d } => Some(2 * d),
            Family::Tiling { q, .. } => Some(q),
            Family::Cycle { .. } => Some(2),
            Family::Custom => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub coords: Vec<Point>,
    pub lambda: Option<f64>,
    pub defect: Option<f64>,
}

/// Ball of radius `radius` around vertex 0, ids in BFS order.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphWindow {
    pub family: Family,
    pub radius: usize,
    offsets: Vec<u32>,
    targets: Vec<u32>,
    edge_of: Vec<u32>,
    edges: Vec<(u32, u32)>,
    depth: Vec<u32>,
    pub embedding: Option<Embedding>,
}

pub type VertexSet = Vec<u32>;

impl GraphWindow {
    /// Window from an edge list. Vertex 0 is the root, the radius is the
    /// largest BFS depth and ids are relabelled into BFS order.
    pub fn from_edges(family: Family, n: usize, edges: &[(u32, u32)]) -> Result<Self> {
        Self::from_edges_with_radius(family, n, edges, None)
    }

    fn from_edges_with_radius(family: Family, n: usize, edges: &[(u32, u32)], radius: Option<usize>) -> Result<Self> {
        if n == 0 {
            return invalid("a window needs at least one vertex");
        }
        let mut adj: Vec<Vec<u32>> = vec![vec![]; n];
        for &(a, b) in edges {
            if a as usize >= n || b as usize >= n || a == b {
                return invalid(format!("bad edge ({a},{b})"));
            }
            adj[a as usize].push(b);
            adj[b as usize].push(a);
        }
        // BFS relabelling
        let mut order = vec![0u32];
        let mut label = vec![u32::MAX; n];
        let mut depth_old = vec![0u32; n];
        label[0] = 0;
        let mut head = 0;
        while head < order.len() {
            let v = order[head] as usize;
            head += 1;
            let mut nb = adj[v].clone();
            nb.sort_unstable();
            for w in nb {
                if label[w as usize] == u32::MAX {
                    label[w as usize] = order.len() as u32;
                    depth_old[w as usize] = depth_old[v] + 1;
                    order.push(w);
                }
            }
        }
        if order.len() != n {
            return invalid("window graph is not connected");
        }
        let mut new_edges: Vec<(u32, u32)> = edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (label[a as usize], label[b as usize]);
                (x.min(y), x.max(y))
            })
            .collect();
        new_edges.sort_unstable();
        new_edges.dedup();
        let depth: Vec<u32> = order.iter().map(|&v| depth_old[v as usize]).collect();
        let radius = radius.unwrap_or(*depth.iter().max().unwrap() as usize);
        let mut deg = vec![0u32; n + 1];
        for &(a, b) in &new_edges {
            deg[a as usize + 1] += 1;
            deg[b as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let offsets = deg;
        let mut fill = offsets.clone();
        let mut targets = vec![0u32; 2 * new_edges.len()];
        let mut edge_of = vec![0u32; 2 * new_edges.len()];
        for (e, &(a, b)) in new_edges.iter().enumerate() {
            let ia = fill[a as usize] as usize;
            targets[ia] = b;
            edge_of[ia] = e as u32;
            fill[a as usize] += 1;
            let ib = fill[b as usize] as usize;
            targets[ib] = a;
            edge_of[ib] = e as u32;
            fill[b as usize] += 1;
        }
        for v in 0..n {
            let (s, t) = (offsets[v] as usize, offsets[v + 1] as usize);
            let mut pairs: Vec<(u32, u32)> = targets[s..t].iter().copied().zip(edge_of[s..t].iter().copied()).collect();
            pairs.sort_unstable();
            for (i, (a, b)) in pairs.into_iter().enumerate() {
                targets[s + i] = a;
                edge_of[s + i] = b;
            }
        }
        Ok(GraphWindow { family, radius, offsets, targets, edge_of, edges: new_edges, depth, embedding: None })
    }

    pub fn n_vertices(&self) -> usize {
        self.depth.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn root(&self) -> u32 {
        0
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.targets[self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize]
    }

    /// Neighbours paired with the id of the connecting edge.
    #[inline]
    pub fn neighbor_edges(&self, v: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let r = self.offsets[v as usize] as usize..self.offsets[v as usize + 1] as usize;
        self.targets[r.clone()].iter().copied().zip(self.edge_of[r].iter().copied())
    }

    pub fn degree(&self, v: u32) -> usize {
        self.neighbors(v).len()
    }

    /// Graph distance from the root.
    pub fn depth(&self, v: u32) -> usize {
        self.depth[v as usize] as usize
    }

    pub fn is_boundary(&self, v: u32) -> bool {
        self.depth(v) == self.radius
    }

    pub fn sphere(&self, n: usize) -> VertexSet {
        (0..self.n_vertices() as u32).filter(|&v| self.depth(v) == n).collect()
    }

    fn check_id(&self, v: u32) -> Result<()> {
        if (v as usize) < self.n_vertices() {
            Ok(())
        } else {
            invalid(format!("vertex id {v} out of range (n = {})", self.n_vertices()))
        }
    }

    /// BFS distances from `s` to every window vertex.
    pub fn bfs(&self, s: u32) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n_vertices()];
        let mut q = VecDeque::new();
        dist[s as usize] = 0;
        q.push_back(s);
        while let Some(v) = q.pop_front() {
            let dv = dist[v as usize];
            for &w in self.neighbors(v) {
                if dist[w as usize] == u32::MAX {
                    dist[w as usize] = dv + 1;
                    q.push_back(w);
                }
            }
        }
        dist
    }

    /// All-pairs distances as a dense row-major table.
    pub fn distance_table(&self) -> Vec<u32> {
        let n = self.n_vertices();
        let mut t = Vec::with_capacity(n * n);
        for s in 0..n as u32 {
            t.extend(self.bfs(s));
        }
        t
    }

    pub fn coords(&self) -> Option<&[Point]> {
        self.embedding.as_ref().map(|e| e.coords.as_slice())
    }
}

/// Distance inside the window; `certified` when it provably equals the
/// distance in the infinite graph (both ends at depth <= R/2).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowDistance {
    pub dist: usize,
    pub certified: bool,
}

pub fn graph_distance(w: &GraphWindow, u: u32, v: u32) -> Result<WindowDistance> {
    w.check_id(u)?;
    w.check_id(v)?;
    let d = w.bfs(u)[v as usize] as usize;
    let half = w.radius / 2;
    Ok(WindowDistance { dist: d, certified: w.depth(u) <= half && w.depth(v) <= half })
}

/// Number of vertices of the radius-R ball in the k-regular tree.
pub fn tree_ball_size(k: usize, r: usize) -> f64 {
    1.0 + k as f64 * (((k - 1) as f64).powi(r as i32) - 1.0) / (k as f64 - 2.0)
}

pub fn build_tree(k: usize, r: usize) -> Result<GraphWindow> {
    if k < 3 {
        return invalid(format!("tree degree k must be >= 3, got {k}"));
    }
    if tree_ball_size(k, r) > MAX_VERTICES as f64 {
        return Err(Error::Resource(format!("tree ball k={k} R={r} exceeds {MAX_VERTICES} vertices")));
    }
    let mut edges = vec![];
    let mut frontier = vec![0u32];
    let mut n = 1u32;
    for _ in 0..r {
        let mut next = vec![];
        for &v in &frontier {
            let kids = if v == 0 { k } else { k - 1 };
            for _ in 0..kids {
                edges.push((v, n));
                next.push(n);
                n += 1;
            }
        }
        frontier = next;
    }
    GraphWindow::from_edges_with_radius(Family::Tree { k }, n as usize, &edges, Some(r))
}

pub fn build_grid(d: usize, r: usize) -> Result<GraphWindow> {
    if d == 0 {
        return invalid("grid dimension must be >= 1");
    }
    // enumerate the L1 ball by BFS from the origin
    let mut ids: HashMap<Vec<i32>, u32> = HashMap::new();
    let mut pts: Vec<Vec<i32>> = vec![vec![0; d]];
    ids.insert(vec![0; d], 0);
    let mut edges = vec![];
    let mut head = 0;
    while head < pts.len() {
        let p = pts[head].clone();
        let v = head as u32;
        head += 1;
        let norm: i32 = p.iter().map(|x| x.abs()).sum();
        for axis in 0..d {
            for s in [-1, 1] {
                let mut q = p.clone();
                q[axis] += s;
                let qn: i32 = q.iter().map(|x| x.abs()).sum();
                if qn as usize > r {
                    continue;
                }
                let id = match ids.get(&q) {
                    Some(&id) => id,
                    None => {
                        if qn < norm {
                            continue;
                        }
                        if pts.len() >= MAX_VERTICES {
                            return Err(Error::Resource(format!("grid ball d={d} R={r} exceeds {MAX_VERTICES} vertices")));
                        }
                        let id = pts.len() as u32;
                        ids.insert(q.clone(), id);
                        pts.push(q);
                        id
                    }
                };
                if v < id {
                    edges.push((v, id));
                }
            }
        }
    }
    GraphWindow::from_edges_with_radius(Family::Grid { d }, pts.len(), &edges, Some(r))
}

/// Cycle graph on n vertices (small control family).
pub fn build_cycle(n: usize) -> Result<GraphWindow> {
    if n < 3 {
        return invalid("cycle needs at least 3 vertices");
    }
    let edges: Vec<(u32, u32)> = (0..n as u32).map(|i| (i, (i + 1) % n as u32)).collect();
    GraphWindow::from_edges(Family::Cycle { n }, n, &edges)
}

/// Length of an edge of the regular {p,q} tiling.
pub fn tiling_edge_length(p: usize, q: usize) -> f64 {
    use std::f64::consts::PI;
    2.0 * ((PI / p as f64).cos() / (PI / q as f64).sin()).acosh()
}

/// Orientation-preserving isometry of the Poincaré disk, stored as the SU(1,1)
/// matrix [[a, b], [conj b, conj a]].
#[derive(Clone, Copy, Debug)]
struct Mobius {
    a: Complex64,
    b: Complex64,
}

impl Mobius {
    fn rotation(theta: f64) -> Self {
        Mobius { a: Complex64::from_polar(1.0, theta / 2.0), b: Complex64::new(0.0, 0.0) }
    }

    /// Hyperbolic translation along the real axis taking 0 to `m` (|m| < 1).
    fn translation(m: f64) -> Self {
        let s = 1.0 / (1.0 - m * m).sqrt();
        Mobius { a: Complex64::new(s, 0.0), b: Complex64::new(m * s, 0.0) }
    }

    fn compose(&self, o: &Mobius) -> Mobius {
        // self ∘ o
        Mobius { a: self.a * o.a + self.b * o.b.conj(), b: self.a * o.b + self.b * o.a.conj() }
    }

    fn inverse(&self) -> Mobius {
        Mobius { a: self.a.conj(), b: -self.b }
    }

    fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.b.conj() * z + self.a.conj())
    }
}

fn disk_to_halfplane(z: Complex64) -> Point {
    let i = Complex64::new(0.0, 1.0);
    let w = i * (Complex64::new(1.0, 0.0) + z) / (Complex64::new(1.0, 0.0) - z);
    Point { coords: vec![w.re, w.im] }
}

/// Grid hash of disk points for vertex deduplication.
struct PointIndex {
    cell: f64,
    map: HashMap<(i64, i64), Vec<u32>>,
}

impl PointIndex {
    fn key(&self, z: Complex64) -> (i64, i64) {
        ((z.re / self.cell).floor() as i64, (z.im / self.cell).floor() as i64)
    }

    fn find(&self, z: Complex64, pts: &[Complex64], tol: f64) -> Option<u32> {
        let (kx, ky) = self.key(z);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.map.get(&(kx + dx, ky + dy)) {
                    for &id in ids {
                        if (pts[id as usize] - z).norm() < tol {
                            return Some(id);
                        }
                    }
                }
            }
        }
        None
    }

    fn insert(&mut self, z: Complex64, id: u32) {
        let k = self.key(z);
        self.map.entry(k).or_default().push(id);
    }
}

/// Ball of graph radius `layers` around a vertex of the {p,q} tiling, with
/// H² half-plane coordinates and measured rough-similarity constants.
pub fn build_tiling(p: usize, q: usize, layers: usize) -> Result<GraphWindow> {
    if p < 3 || q < 3 || (p - 2) * (q - 2) <= 4 {
        return invalid(format!("{{{p},{q}}} is not a hyperbolic tiling: need (p-2)(q-2) > 4"));
    }
    // growth is at most (q-1)^layers
    if tree_ball_size(q.max(3), layers) > 50.0 * MAX_VERTICES as f64 && layers > 40 {
        return Err(Error::Resource(format!("tiling {{{p},{q}}} with {layers} layers is too large")));
    }
    use std::f64::consts::PI;
    let ell = tiling_edge_length(p, q);
    let r_nb = (ell / 2.0).tanh();
    let r_mid = (ell / 4.0).tanh();
    let rot = Mobius::rotation(2.0 * PI / q as f64);
    let tm = Mobius::translation(r_mid);
    // half-turn about the midpoint of the edge from the root to its first neighbour
    let sigma = tm.compose(&Mobius::rotation(PI)).compose(&tm.inverse());
    let mut rot_pow = vec![Mobius::rotation(0.0)];
    for j in 1..q {
        rot_pow.push(rot.compose(&rot_pow[j - 1]));
    }
    let nb0: Vec<Complex64> = (0..q).map(|j| Complex64::from_polar(r_nb, 2.0 * PI * j as f64 / q as f64)).collect();

    let mut pts = vec![Complex64::new(0.0, 0.0)];
    let mut maps = vec![Mobius::rotation(0.0)];
    let mut depth = vec![0usize];
    let mut index = PointIndex { cell: 1e-6, map: HashMap::new() };
    index.insert(pts[0], 0);
    let mut edges: Vec<(u32, u32)> = vec![];
    let mut head = 0;
    while head < pts.len() {
        let v = head as u32;
        head += 1;
        let mv = maps[v as usize];
        let dv = depth[v as usize];
        for j in 0..q {
            let z = mv.apply(nb0[j]);
            // separation of neighbours shrinks like (1-|z|^2)
            let tol = 1e-4 * (1.0 - z.norm_sqr()).max(1e-12);
            let w = match index.find(z, &pts, tol) {
                Some(w) => w,
                None => {
                    if dv >= layers {
                        continue;
                    }
                    if pts.len() >= MAX_VERTICES {
                        return Err(Error::Resource(format!("tiling exceeds {MAX_VERTICES} vertices")));
                    }
                    let w = pts.len() as u32;
                    pts.push(z);
                    maps.push(mv.compose(&rot_pow[j]).compose(&sigma));
                    depth.push(dv + 1);
                    index.insert(z, w);
                    w
                }
            };
            if v < w {
                edges.push((v, w));
            }
        }
    }
    let n = pts.len();
    let mut win = GraphWindow::from_edges_with_radius(Family::Tiling { p, q }, n, &edges, Some(layers))?;
    // from_edges relabels into BFS order; creation order was already BFS with
    // sorted neighbour scans, but map coordinates through the relabelling anyway
    let relabel = relabel_map(&edges, n);
    let mut coords = vec![Point { coords: vec![0.0, 1.0] }; n];
    for (old, z) in pts.iter().enumerate() {
        coords[relabel[old] as usize] = disk_to_halfplane(*z);
    }
    win.embedding = Some(Embedding { coords, lambda: None, defect: None });
    if n > 1 {
        embedding_defect(&mut win, 20_000)?;
    }
    Ok(win)
}

fn relabel_map(edges: &[(u32, u32)], n: usize) -> Vec<u32> {
    let mut adj: Vec<Vec<u32>> = vec![vec![]; n];
    for &(a, b) in edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    let mut label = vec![u32::MAX; n];
    let mut order = vec![0u32];
    label[0] = 0;
    let mut head = 0;
    while head < order.len() {
        let v = order[head] as usize;
        head += 1;
        let mut nb = adj[v].clone();
        nb.sort_unstable();
        for w in nb {
            if label[w as usize] == u32::MAX {
                label[w as usize] = order.len() as u32;
                order.push(w);
            }
        }
    }
    label
}

/// Least-squares scale (through the origin) and maximal additive defect of
/// the embedding over sampled vertex pairs. Writes both into the window.
pub fn embedding_defect(w: &mut GraphWindow, sample_pairs: usize) -> Result<(f64, f64)> {
    let coords = match &w.embedding {
        Some(e) => e.coords.clone(),
        None => return invalid("window has no embedding"),
    };
    let n = w.n_vertices();
    if n < 2 {
        return invalid("embedding scale is undefined on a single vertex");
    }
    let total = n * (n - 1) / 2;
    let mut pairs: Vec<(f64, f64)> = vec![];
    if total <= sample_pairs {
        for u in 0..n as u32 {
            let du = w.bfs(u);
            for v in u + 1..n as u32 {
                pairs.push((du[v as usize] as f64, hypgeom::dist(&coords[u as usize], &coords[v as usize])));
            }
        }
    } else {
        // a fixed set of sources, each paired with pseudo-random targets
        let sources = (sample_pairs as f64).sqrt().ceil() as usize;
        let per = sample_pairs.div_ceil(sources);
        for s in 0..sources {
            let u = (hash2(0x5eed, s as u64) % n as u64) as u32;
            let du = w.bfs(u);
            for t in 0..per {
                let v = (hash2(u as u64 + 1, t as u64) % n as u64) as u32;
                if v != u {
                    pairs.push((du[v as usize] as f64, hypgeom::dist(&coords[u as usize], &coords[v as usize])));
                }
            }
        }
    }
    let sxy: f64 = pairs.iter().map(|(g, h)| g * h).sum();
    let sxx: f64 = pairs.iter().map(|(g, _)| g * g).sum();
    let lambda = sxy / sxx;
    let defect = pairs.iter().map(|(g, h)| (lambda * g - h).abs()).fold(0.0, f64::max);
    let e = w.embedding.as_mut().unwrap();
    e.lambda = Some(lambda);
    e.defect = Some(defect);
    Ok((lambda, defect))
}

/// H_G(a,b) = {v : d(v,a) <= d(v,b)}, ties included.
pub fn discrete_halfspace(w: &GraphWindow, a: u32, b: u32) -> Result<VertexSet> {
    w.check_id(a)?;
    w.check_id(b)?;
    if a == b {
        return invalid("discrete half-space needs a != b");
    }
    let (da, db) = (w.bfs(a), w.bfs(b));
    Ok((0..w.n_vertices() as u32).filter(|&v| da[v as usize] <= db[v as usize]).collect())
}

/// Finite-window stand-in for properness of H_G(a,b): both H_G(a,b) and
/// H_G(b,a) contain boundary vertices at distance >= R/2 from the union of
/// geodesics between a and b. A proxy only; properness is not decidable on a window.
pub fn halfspace_proper_proxy(w: &GraphWindow, a: u32, b: u32) -> Result<bool> {
    let h_ab = discrete_halfspace(w, a, b)?;
    let h_ba = discrete_halfspace(w, b, a)?;
    let (da, db) = (w.bfs(a), w.bfs(b));
    let dab = da[b as usize];
    // multi-source BFS from the geodesic interval
    let n = w.n_vertices();
    let mut dist = vec![u32::MAX; n];
    let mut q = VecDeque::new();
    for v in 0..n {
        if da[v] + db[v] == dab {
            dist[v] = 0;
            q.push_back(v as u32);
        }
    }
    while let Some(v) = q.pop_front() {
        for &x in w.neighbors(v) {
            if dist[x as usize] == u32::MAX {
                dist[x as usize] = dist[v as usize] + 1;
                q.push_back(x);
            }
        }
    }
    let far = |set: &VertexSet| set.iter().any(|&v| w.is_boundary(v) && 2 * dist[v as usize] as usize >= w.radius);
    Ok(far(&h_ab) && far(&h_ba))
}

/// Serialised window: CSR adjacency plus optional embedding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFile {
    #[serde(flatten)]
    pub family: Family,
    #[serde(rename = "R")]
    pub radius: usize,
    pub n_vertices: usize,
    pub offsets: Vec<u32>,
    pub targets: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coords: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect: Option<f64>,
}

impl From<&GraphWindow> for WindowFile {
    fn from(w: &GraphWindow) -> Self {
        WindowFile {
            family: w.family.clone(),
            radius: w.radius,
            n_vertices: w.n_vertices(),
            offsets: w.offsets.clone(),
            targets: w.targets.clone(),
            coords: w.embedding.as_ref().map(|e| e.coords.iter().map(|p| p.coords.clone()).collect()),
            lambda: w.embedding.as_ref().and_then(|e| e.lambda),
            defect: w.embedding.as_ref().and_then(|e| e.defect),
        }
    }
}

impl TryFrom<WindowFile> for GraphWindow {
    type Error = Error;

    fn try_from(f: WindowFile) -> Result<Self> {
        let n = f.n_vertices;
        if f.offsets.len() != n + 1 || *f.offsets.last().unwrap_or(&0) as usize != f.targets.len() {
            return invalid("window file: offsets do not match targets");
        }
        let mut edges = vec![];
        for v in 0..n {
            for &t in &f.targets[f.offsets[v] as usize..f.offsets[v + 1] as usize] {
                if (t as usize) >= n {
                    return invalid("window file: target out of range");
                }
                if (v as u32) < t {
                    edges.push((v as u32, t));
                }
            }
        }
        let mut w = GraphWindow::from_edges_with_radius(f.family, n, &edges, Some(f.radius))?;
        if let Some(c) = f.coords {
            if c.len() != n {
                return invalid("window file: coordinate count differs from vertex count");
            }
            let relabel = relabel_map(&edges, n);
            let mut coords = vec![Point { coords: vec![] }; n];
            for (old, xs) in c.into_iter().enumerate() {
                coords[relabel[old] as usize] = Point::new(xs)?;
            }
            w.embedding = Some(Embedding { coords, lambda: f.lambda, defect: f.defect });
        }
        Ok(w)
    }
}

/// The ball of radius `radius` in the k-regular tree, never materialised.
///
/// A vertex is identified by a 64-bit key hashed from its path of child
/// indices from the root; the key of a non-root vertex also names the edge to
/// its parent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeBall {
    pub k: usize,
    pub radius: usize,
}

pub const TREE_ROOT_KEY: u64 = 0x7265_6574; // arbitrary fixed constant

impl TreeBall {
    pub fn new(k: usize, radius: usize) -> Result<Self> {
        if k < 3 {
            return invalid(format!("tree degree k must be >= 3, got {k}"));
        }
        Ok(TreeBall { k, radius })
    }

    #[inline]
    pub fn child_key(parent: u64, j: usize) -> u64 {
        hash2(parent, j as u64 + 1)
    }

    /// Number of children of a vertex at depth `depth` inside the ball.
    #[inline]
    pub fn n_children(&self, depth: usize) -> usize {
        if depth >= self.radius {
            0
        } else if depth == 0 {
            self.k
        } else {
            self.k - 1
        }
    }

    /// Key of the vertex reached from the root by the given child indices.
    pub fn descend(&self, path: &[usize]) -> u64 {
        path.iter().fold(TREE_ROOT_KEY, |key, &j| Self::child_key(key, j))
    }

    pub fn n_vertices(&self) -> f64 {
        tree_ball_size(self.k, self.radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tree_sizes() {
        assert_eq!(build_tree(3, 0).unwrap().n_vertices(), 1);
        assert_eq!(build_tree(3, 2).unwrap().n_vertices(), 10);
        assert_eq!(build_tree(4, 3).unwrap().n_vertices(), 53);
        assert!(build_tree(2, 3).is_err());
        let t = build_tree(3, 6).unwrap();
        for n in 1..=6 {
            assert_eq!(t.sphere(n).len(), 3 * 2usize.pow(n as u32 - 1));
        }
        assert_eq!(tree_ball_size(4, 3), 53.0);
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(build_grid(1, 3).unwrap().n_vertices(), 7);
        assert_eq!(build_grid(2, 1).unwrap().n_vertices(), 5);
        assert_eq!(build_grid(2, 2).unwrap().n_vertices(), 13);
        let g = build_grid(3, 3).unwrap();
        for v in 0..g.n_vertices() as u32 {
            if !g.is_boundary(v) {
                assert_eq!(g.degree(v), 6);
            }
        }
    }

    #[test]
    fn distances() {
        let t = build_tree(3, 3).unwrap();
        let d2 = t.sphere(2)[0];
        assert_eq!(graph_distance(&t, 0, 0).unwrap().dist, 0);
        assert_eq!(graph_distance(&t, 0, d2).unwrap().dist, 2);
        assert!(!graph_distance(&t, 0, d2).unwrap().certified);
        assert!(graph_distance(&t, 0, 999).is_err());
        let g = build_grid(2, 3).unwrap();
        // (1,1) has depth 2 and two neighbours at depth 1
        let v = g.sphere(2).into_iter().find(|&v| g.neighbors(v).iter().filter(|&&x| g.depth(x) == 1).count() == 2).unwrap();
        assert_eq!(graph_distance(&g, 0, v).unwrap().dist, 2);
    }

    #[test]
    fn tree_halfspaces() {
        let t = build_tree(3, 3).unwrap();
        let b = t.neighbors(0)[0];
        let h = discrete_halfspace(&t, 0, b).unwrap();
        // root plus the two other subtrees: 1 + 2*(1+2+4)
        assert_eq!(h.len(), 15);
        assert!(!h.contains(&b));
        let hb = discrete_halfspace(&t, b, 0).unwrap();
        assert_eq!(h.len() + hb.len(), t.n_vertices());
        assert!(discrete_halfspace(&t, 0, 0).is_err());
    }

    #[test]
    fn line_halfspace_is_half_line() {
        let g = build_grid(1, 4).unwrap();
        let b = g.neighbors(0)[0];
        let h = discrete_halfspace(&g, 0, b).unwrap();
        assert_eq!(h.len(), 5);
    }

    #[test]
    fn halfspaces_cover_with_ties_in_both() {
        let g = build_grid(2, 3).unwrap();
        let (a, b) = (0u32, g.sphere(2)[0]);
        let (h1, h2) = (discrete_halfspace(&g, a, b).unwrap(), discrete_halfspace(&g, b, a).unwrap());
        let (da, db) = (g.bfs(a), g.bfs(b));
        let ties: Vec<u32> = (0..g.n_vertices() as u32).filter(|&v| da[v as usize] == db[v as usize]).collect();
        let both: Vec<u32> = h1.iter().copied().filter(|v| h2.contains(v)).collect();
        assert_eq!(both, ties);
        let mut all: Vec<u32> = h1.iter().chain(h2.iter()).copied().collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), g.n_vertices());
    }

    #[test]
    fn tiling_basics() {
        let t = build_tiling(3, 7, 1).unwrap();
        assert_eq!(t.degree(0), 7);
        assert_eq!(build_tiling(4, 5, 0).unwrap().n_vertices(), 1);
        assert!(build_tiling(4, 4, 2).is_err());
        assert!(build_tiling(3, 6, 2).is_err());
        let t = build_tiling(3, 7, 4).unwrap();
        let ell = tiling_edge_length(3, 7);
        let c = t.coords().unwrap();
        for &(a, b) in t.edges() {
            let d = hypgeom::dist(&c[a as usize], &c[b as usize]);
            assert!((d - ell).abs() < 1e-6, "{d} vs {ell}");
        }
        for v in 0..t.n_vertices() as u32 {
            if !t.is_boundary(v) {
                assert_eq!(t.degree(v), 7);
            }
        }
        let e = t.embedding.as_ref().unwrap();
        assert!(e.lambda.unwrap() > 0.0 && e.defect.unwrap().is_finite());
    }

    #[test]
    fn synthetic_similarity() {
        let mut g = build_grid(1, 5).unwrap();
        // vertices of Z placed on a vertical geodesic at spacing 2
        let coords = (0..g.n_vertices() as u32)
            .map(|v| {
                let pos = if v == 0 { 0 } else if v % 2 == 1 { (v as i32 + 1) / 2 } else { -(v as i32) / 2 };
                Point::new(vec![0.0, (2.0 * pos as f64).exp()]).unwrap()
            })
            .collect::<Vec<_>>();
        // check the labelling assumption: BFS order alternates sides
        g.embedding = Some(Embedding { coords, lambda: None, defect: None });
        let (l, k) = embedding_defect(&mut g, 1000).unwrap();
        assert!((l - 2.0).abs() < 1e-12 && k < 1e-9, "{l} {k}");
        let mut one = build_tree(3, 0).unwrap();
        one.embedding = Some(Embedding { coords: vec![Point::on_axis(2, 1.0)], lambda: None, defect: None });
        assert!(embedding_defect(&mut one, 10).is_err());
        assert!(embedding_defect(&mut build_tree(3, 1).unwrap(), 10).is_err());
    }

    #[test]
    fn window_file_round_trip() {
        let t = build_tiling(3, 7, 2).unwrap();
        let f = WindowFile::from(&t);
        let back = GraphWindow::try_from(f).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn tree_keys() {
        let tb = TreeBall::new(3, 5).unwrap();
        assert_eq!(tb.descend(&[]), TREE_ROOT_KEY);
        assert_ne!(tb.descend(&[0, 1]), tb.descend(&[1, 0]));
        assert_eq!(tb.n_children(0), 3);
        assert_eq!(tb.n_children(2), 2);
        assert_eq!(tb.n_children(5), 0);
    }
}
