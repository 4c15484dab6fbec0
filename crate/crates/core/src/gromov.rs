//! Gromov products and four-point hyperbolicity of windows, and half-space
//! decompositions of finite point sets in R^d, H^d and embedded graphs.

use crate::error::{invalid, Error, Result};
use crate::graphs::GraphWindow;
use crate::hypgeom::{self, HalfSpace, Point};
use crate::rng::stream;
use rand::Rng;
use serde::{Deserialize, Serialize};

fn check_vertex(w: &GraphWindow, v: u32) -> Result<()> {
    if (v as usize) < w.n_vertices() {
        Ok(())
    } else {
        invalid(format!("vertex id {v} out of range (n = {})", w.n_vertices()))
    }
}

/// (x|y)_base = (d(base,x) + d(base,y) - d(x,y)) / 2 with window distances.
pub fn gromov_product(w: &GraphWindow, x: u32, y: u32, base: u32) -> Result<f64> {
    for v in [x, y, base] {
        check_vertex(w, v)?;
    }
    let from_base = w.bfs(base);
    let from_x = w.bfs(x);
    let get = |d: u32| -> Result<i64> {
        if d == u32::MAX {
            invalid("vertices are not connected in the window")
        } else {
            Ok(d as i64)
        }
    };
    let twice = get(from_base[x as usize])? + get(from_base[y as usize])? - get(from_x[y as usize])?;
    Ok(twice as f64 / 2.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DeltaEstimate {
    pub value: f64,
    /// Sampling mode: the true constant is at least `value`.
    pub lower_bound_only: bool,
    pub quadruples: u64,
}

/// Exhaustive max over quadruples (base, x, y, z) of
/// min((x|y), (y|z)) - (x|z), from a row-major distance table over `m` vertices.
fn delta_exhaustive(m: usize, dist: &dyn Fn(usize, usize) -> i64) -> DeltaEstimate {
    let mut best = 0i64;
    for b in 0..m {
        let g = |x: usize, y: usize| dist(b, x) + dist(b, y) - dist(x, y);
        for x in 0..m {
            for y in 0..m {
                let gxy = g(x, y);
                for z in 0..m {
                    let v = gxy.min(g(y, z)) - g(x, z);
                    best = best.max(v);
                }
            }
        }
    }
    DeltaEstimate { value: best as f64 / 2.0, lower_bound_only: false, quadruples: (m as u64).pow(4) }
}

/// Largest four-point defect: exhaustive for windows of at most 60 vertices,
/// otherwise `n_samples` uniform quadruples (a lower bound).
pub fn four_point_delta(w: &GraphWindow, n_samples: u64, seed: u64) -> Result<DeltaEstimate> {
    let n = w.n_vertices();
    if n == 0 {
        return invalid("empty window");
    }
    if n <= 60 {
        let t = w.distance_table();
        return Ok(delta_exhaustive(n, &|a, b| t[a * n + b] as i64));
    }
    let mut rng = stream(seed, 0);
    let mut best = 0i64;
    for _ in 0..n_samples {
        let q: Vec<u32> = (0..4).map(|_| rng.gen_range(0..n as u32)).collect();
        let rows: Vec<Vec<u32>> = q.iter().map(|&v| w.bfs(v)).collect();
        let d = |i: usize, j: usize| rows[i][q[j] as usize] as i64;
        let g = |x: usize, y: usize| d(0, x) + d(0, y) - d(x, y);
        best = best.max(g(1, 2).min(g(2, 3)) - g(1, 3));
    }
    Ok(DeltaEstimate { value: best as f64 / 2.0, lower_bound_only: true, quadruples: n_samples })
}

/// Exhaustive four-point defect over a vertex subset (window distances).
pub fn four_point_delta_subset(w: &GraphWindow, vertices: &[u32]) -> Result<DeltaEstimate> {
    if vertices.is_empty() || vertices.len() > 60 {
        return invalid("subset must have between 1 and 60 vertices");
    }
    for &v in vertices {
        check_vertex(w, v)?;
    }
    let rows: Vec<Vec<u32>> = vertices.iter().map(|&v| w.bfs(v)).collect();
    Ok(delta_exhaustive(vertices.len(), &|a, b| rows[a][vertices[b] as usize] as i64))
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_cloud(a: &[Vec<f64>]) -> Result<usize> {
    let d = a.first().map_or(0, |p| p.len());
    if d == 0 {
        return invalid("point cloud must be nonempty with dimension >= 1");
    }
    if a.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return invalid("points must be finite and share one dimension");
    }
    Ok(d)
}

/// Distance from a[x] to the nearest other point; infinite for a singleton.
pub fn isolation_radius(a: &[Vec<f64>], x: usize) -> Result<f64> {
    check_cloud(a)?;
    if x >= a.len() {
        return invalid(format!("index {x} is not a member of the cloud"));
    }
    Ok(a.iter().enumerate().filter(|&(i, _)| i != x).map(|(_, p)| euclid(p, &a[x])).fold(f64::INFINITY, f64::min))
}

/// min over y of |A ∩ B(x, ρ/δ) \ B(y, δρ)| and a minimising y.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupportCount {
    pub rho: f64,
    pub min_count: usize,
    pub center: Vec<f64>,
}

/// Candidate centres: the points, midpoints of close pairs, and (d = 1, 2)
/// the centres of radius-r balls through two points, which makes the search
/// exact there. For d >= 3 a local grid of pitch r/8 is added.
fn support_count(a: &[Vec<f64>], x: usize, delta: f64) -> Result<SupportCount> {
    let d = check_cloud(a)?;
    if !(delta > 0.0 && delta < 1.0) {
        return invalid(format!("delta must lie in (0,1), got {delta}"));
    }
    let rho = isolation_radius(a, x)?;
    if !rho.is_finite() {
        return invalid("support is undefined for a single point");
    }
    let (outer, r) = (rho / delta, delta * rho);
    let region: Vec<&Vec<f64>> = a.iter().filter(|p| euclid(p, &a[x]) <= outer * (1.0 + 1e-12)).collect();
    let scale = region.iter().flat_map(|p| p.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * r + 1e-14 * scale;
    let covered = |y: &[f64]| region.iter().filter(|p| euclid(p, y) <= r + tol).count();
    let mut best = (0usize, a[x].clone());
    let mut consider = |y: Vec<f64>| {
        let c = covered(&y);
        if c > best.0 {
            best = (c, y);
        }
    };
    for p in &region {
        consider(p.to_vec());
        if d == 1 {
            consider(vec![p[0] + r]);
            consider(vec![p[0] - r]);
        }
        if d >= 3 && region.len() <= 200 {
            let steps = 8i64;
            let mut idx = vec![-steps; d];
            loop {
                let off: Vec<f64> = idx.iter().map(|&i| i as f64 * r / steps as f64).collect();
                if off.iter().map(|v| v * v).sum::<f64>() <= r * r {
                    consider(p.iter().zip(&off).map(|(a, b)| a + b).collect());
                }
                let mut k = 0;
                while k < d && idx[k] == steps {
                    idx[k] = -steps;
                    k += 1;
                }
                if k == d {
                    break;
                }
                idx[k] += 1;
            }
        }
    }
    for i in 0..region.len() {
        for j in i + 1..region.len() {
            let (p, q) = (region[i], region[j]);
            let len = euclid(p, q);
            if len > 2.0 * r + tol {
                continue;
            }
            let mid: Vec<f64> = p.iter().zip(q.iter()).map(|(u, v)| 0.5 * (u + v)).collect();
            if d == 2 && len > 0.0 {
                let h = (r * r - 0.25 * len * len).max(0.0).sqrt();
                let perp = [-(q[1] - p[1]) / len, (q[0] - p[0]) / len];
                consider(vec![mid[0] + h * perp[0], mid[1] + h * perp[1]]);
                consider(vec![mid[0] - h * perp[0], mid[1] - h * perp[1]]);
            }
            consider(mid);
        }
    }
    Ok(SupportCount { rho, min_count: region.len() - best.0, center: best.1 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Support {
    pub supported: bool,
    pub min_count: usize,
    pub rho: f64,
    /// A centre y leaving fewer than s points, when unsupported.
    pub witness: Option<Vec<f64>>,
}

/// Whether a[x] is (δ,s)-supported.
pub fn is_supported(a: &[Vec<f64>], x: usize, delta: f64, s: usize) -> Result<Support> {
    let c = support_count(a, x, delta)?;
    let supported = c.min_count >= s;
    Ok(Support { supported, min_count: c.min_count, rho: c.rho, witness: if supported { None } else { Some(c.center) } })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EuclideanWitness {
    pub index: usize,
    pub center: Vec<f64>,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EuclideanMagic {
    pub supported: Vec<usize>,
    pub witnesses: Vec<EuclideanWitness>,
}

fn support_counts(a: &[Vec<f64>], delta: f64) -> Result<Vec<SupportCount>> {
    (0..a.len()).map(|x| support_count(a, x, delta)).collect()
}

fn split(counts: &[SupportCount], delta: f64, s: usize) -> EuclideanMagic {
    let mut out = EuclideanMagic { supported: vec![], witnesses: vec![] };
    for (i, c) in counts.iter().enumerate() {
        if c.min_count >= s {
            out.supported.push(i);
        } else {
            out.witnesses.push(EuclideanWitness { index: i, center: c.center.clone(), inner_radius: delta * c.rho, outer_radius: c.rho / delta, count: c.min_count });
        }
    }
    out
}

/// Partition of the cloud into (δ,s)-supported points and the rest, with
/// a witness centre for each unsupported point.
pub fn magic_euclidean(a: &[Vec<f64>], delta: f64, s: usize) -> Result<EuclideanMagic> {
    if a.len() < 2 {
        return invalid("magic_euclidean needs at least two points");
    }
    Ok(split(&support_counts(a, delta)?, delta, s))
}

/// Fraction of supported points for each s.
pub fn supported_fractions(a: &[Vec<f64>], delta: f64, s_values: &[usize]) -> Result<Vec<f64>> {
    let counts = support_counts(a, delta)?;
    Ok(s_values.iter().map(|&s| counts.iter().filter(|c| c.min_count >= s).count() as f64 / a.len() as f64).collect())
}

/// Uniform cloud in the unit cube.
pub fn random_cloud(d: usize, n: usize, seed: u64, index: u64) -> Vec<Vec<f64>> {
    let mut rng = stream(seed, index);
    (0..n).map(|_| (0..d).map(|_| rng.gen::<f64>()).collect()).collect()
}

/// Empirical support constant: twice the largest s·(supported fraction)
/// seen on uniform clouds. `s_values = None` scans every s in 2..n.
pub fn fit_magic_constant(d: usize, delta: f64, n_points: usize, n_clouds: usize, s_values: Option<&[usize]>, seed: u64) -> Result<f64> {
    if n_points < 2 || n_clouds == 0 {
        return invalid("need at least one cloud of at least two points");
    }
    let all: Vec<usize> = (2..=n_points).collect();
    let ss = s_values.unwrap_or(&all);
    let mut best = 0.0f64;
    for c in 0..n_clouds {
        let cloud = random_cloud(d, n_points, seed, c as u64);
        for (s, f) in ss.iter().zip(supported_fractions(&cloud, delta, ss)?) {
            best = best.max(*s as f64 * f);
        }
    }
    Ok(2.0 * best)
}

/// Volume of a hyperbolic ball of radius r in H^d.
pub fn hyperbolic_ball_volume(d: usize, r: f64) -> f64 {
    // surface area of the unit sphere S^{d-1}
    let half = d as f64 / 2.0;
    let gamma = if d % 2 == 0 {
        (1..d / 2).map(|k| k as f64).product::<f64>()
    } else {
        let m = d / 2;
        std::f64::consts::PI.sqrt() * (0..m).map(|k| k as f64 + 0.5).product::<f64>()
    };
    let omega = 2.0 * std::f64::consts::PI.powf(half) / gamma;
    if d == 1 {
        return 2.0 * r;
    }
    if d == 2 {
        return omega * (r.cosh() - 1.0);
    }
    let m = 2000;
    let h = r / m as f64;
    let f = |t: f64| t.sinh().powi(d as i32 - 1);
    let mut s = f(0.0) + f(r);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    omega * s * h / 3.0
}

/// 1.5 times a Monte Carlo estimate of vol(c/2-neighbourhood of the Euclidean
/// ball B(x, x_d/2)) / vol(hyperbolic ball of radius c/2).
pub fn c2_constant(d: usize, c: f64, n_samples: u64, seed: u64) -> Result<f64> {
    if d < 2 || !(c > 0.0) || n_samples == 0 {
        return invalid("c2 needs d >= 2, c > 0 and samples");
    }
    // B((0,..,1), 1/2) is the hyperbolic ball of radius ln(3)/2 about height √3/2
    let hc = 0.75f64.sqrt();
    let rn = 0.5 * 3f64.ln() + 0.5 * c;
    let centre = Point::on_axis(d, hc);
    let (ez, er) = (hc * rn.cosh(), hc * rn.sinh());
    let mut rng = stream(seed, 0xC2);
    let mut sum = 0.0;
    for _ in 0..n_samples {
        let mut z: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-er..er)).collect();
        let h = rng.gen_range((ez - er)..(ez + er));
        z.push(h);
        let p = Point { coords: z };
        if hypgeom::dist(&p, &centre) <= rn {
            sum += h.powi(-(d as i32));
        }
    }
    let volume = (2.0 * er).powi(d as i32) * sum / n_samples as f64;
    Ok(1.5 * volume / hyperbolic_ball_volume(d, 0.5 * c))
}

/// Values of the two constraints log(3^{-1/2} δ^{-1/4}) and
/// log sqrt(c'^2 δ^{-2} - 1), c' = 1 - e^{-c}.
pub fn delta_constraints(delta: f64, c: f64) -> (f64, f64) {
    let cp = 1.0 - (-c).exp();
    let first = -0.5 * 3f64.ln() - 0.25 * delta.ln();
    let second = 0.5 * (cp * cp / (delta * delta) - 1.0).ln();
    (first, second)
}

/// Largest δ with both constraints >= 1/ε.
pub fn delta_for_epsilon(eps: f64, c: f64) -> Result<f64> {
    if !(eps > 0.0 && c > 0.0) {
        return invalid("epsilon and c must be positive");
    }
    let cp = 1.0 - (-c).exp();
    let first = (-4.0 / eps).exp() / 9.0;
    let second = cp / (1.0 + (2.0 / eps).exp()).sqrt();
    Ok(first.min(second))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MagicParams {
    pub epsilon: f64,
    pub separation: f64,
    pub delta: f64,
    pub c_hat: f64,
    pub s: usize,
    pub c2: f64,
    /// N = s + 1 + C2
    pub n_bound: f64,
}

const C2_SAMPLES: u64 = 400_000;
const FIT_CLOUDS: usize = 5;

/// δ, s and N for clouds of `n_points` points in H^d.
pub fn magic_parameters(d: usize, eps: f64, c: f64, n_points: usize, seed: u64) -> Result<MagicParams> {
    let delta = delta_for_epsilon(eps, c)?;
    if delta < 1e-140 {
        return Err(Error::Resource(format!("delta = {delta:e} is below what double precision can represent safely")));
    }
    let c_hat = fit_magic_constant(d, delta, n_points.max(50), FIT_CLOUDS, None, seed)?;
    let s = ((c_hat / eps).ceil() as usize).max(2);
    let c2 = c2_constant(d, c, C2_SAMPLES, seed)?;
    Ok(MagicParams { epsilon: eps, separation: c, delta, c_hat, s, c2, n_bound: s as f64 + 1.0 + c2 })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagicWitness {
    pub index: usize,
    pub halfspaces: Vec<HalfSpace>,
    pub leftover: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HyperbolicMagic {
    pub selected: Vec<usize>,
    pub witnesses: Vec<MagicWitness>,
    pub params: MagicParams,
}

fn leftover(points: &[Point], hs: &[HalfSpace]) -> usize {
    points.iter().filter(|p| !hs.iter().any(|h| h.contains(p))).count()
}

fn min_distance(x: &Point, hs: &[HalfSpace]) -> Result<f64> {
    hs.iter().map(|h| hypgeom::distance_to_halfspace(x, h)).try_fold(f64::INFINITY, |m, d| d.map(|d| m.min(d)))
}

fn check_points(a: &[Point]) -> Result<usize> {
    let d = a.first().map(|p| p.dim()).ok_or_else(|| Error::Invalid("empty point set".into()))?;
    if let Some(p) = a.iter().find(|p| p.dim() != d) {
        return Err(Error::Dimension(d, p.dim()));
    }
    Ok(d)
}

/// Half-spaces for a c-separated set A ⊂ H^d: for all but an ε fraction of
/// points, one or two half-spaces at distance >= 1/ε leaving at most N points
/// of A outside. Every witness is re-verified before returning.
pub fn magic_hyperbolic(a: &[Point], c: f64, eps: f64, seed: u64) -> Result<HyperbolicMagic> {
    let d = check_points(a)?;
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            if hypgeom::dist(&a[i], &a[j]) < c * (1.0 - 1e-12) {
                return invalid(format!("points {i} and {j} are closer than the separation {c}"));
            }
        }
    }
    let params = magic_parameters(d, eps, c, a.len(), seed)?;
    let delta = params.delta;
    let mut selected = vec![];
    let mut witnesses = vec![];
    if a.len() == 1 {
        let h = hypgeom::ball_exterior_halfspace(&a[0], delta.powf(-0.5))?;
        selected.push(0);
        witnesses.push(MagicWitness { index: 0, halfspaces: vec![h], leftover: 0, distance: 0.0 });
    } else {
        let coords: Vec<Vec<f64>> = a.iter().map(|p| p.coords.clone()).collect();
        let counts = support_counts(&coords, delta)?;
        for (i, cnt) in counts.iter().enumerate() {
            if cnt.min_count >= params.s {
                continue;
            }
            let x = &a[i];
            let xd = x.height();
            let rho = cnt.rho;
            let mut hs = vec![];
            if rho >= delta.powf(-0.5) * xd {
                hs.push(hypgeom::ball_exterior_halfspace(x, rho / xd)?);
            } else {
                hs.push(hypgeom::ball_exterior_halfspace(x, rho / (delta * xd))?);
                let mut y = cnt.center.clone();
                let last = y.len() - 1;
                // raising a centre below the boundary to height 0 only enlarges B(y,r) ∩ H^d
                y[last] = y[last].max(0.0);
                if y[last] <= 2.0 * delta * rho {
                    hs.push(hypgeom::ball_covering_halfspace(&y, delta * rho)?);
                }
            }
            selected.push(i);
            witnesses.push(MagicWitness { index: i, halfspaces: hs, leftover: 0, distance: 0.0 });
        }
    }
    for wit in &mut witnesses {
        wit.leftover = leftover(a, &wit.halfspaces);
        wit.distance = min_distance(&a[wit.index], &wit.halfspaces)?;
        if wit.distance < 1.0 / eps - 1e-9 || wit.leftover as f64 > params.n_bound {
            return Err(Error::Contract(format!(
                "witness for point {} fails: distance {} (need {}), leftover {} (bound {})",
                wit.index,
                wit.distance,
                1.0 / eps,
                wit.leftover,
                params.n_bound
            )));
        }
    }
    if (selected.len() as f64) < (1.0 - eps) * a.len() as f64 {
        return Err(Error::Contract(format!("only {} of {} points selected", selected.len(), a.len())));
    }
    Ok(HyperbolicMagic { selected, witnesses, params })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphWitness {
    pub vertex: u32,
    /// Net vertex within distance 1 whose half-spaces were enlarged.
    pub net_vertex: u32,
    pub halfspaces: Vec<HalfSpace>,
    pub leftover: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GraphMagic {
    pub selected: Vec<u32>,
    pub witnesses: Vec<GraphWitness>,
    pub epsilon: f64,
    /// Upper bound on the number of embedded vertices in a unit ball.
    pub c_count: usize,
    pub delta: f64,
    pub n_bound: f64,
    pub net_size: usize,
    pub inner: MagicParams,
}

/// Graph version: 1-separated net of Φ(A), the hyperbolic decomposition of
/// the net at δ = min(ε/(3+ε), ε/C), and each half-space pushed 2 closer.
pub fn magic_graph(w: &GraphWindow, a: &[u32], eps: f64, seed: u64) -> Result<GraphMagic> {
    let phi = w.coords().ok_or_else(|| Error::Invalid("window is not embedded".into()))?;
    if a.is_empty() {
        return invalid("vertex set must be nonempty");
    }
    if !(eps > 0.0) {
        return invalid("epsilon must be positive");
    }
    let mut verts = a.to_vec();
    for &v in &verts {
        check_vertex(w, v)?;
    }
    verts.sort_unstable();
    verts.dedup();
    // any unit ball's points are pairwise within 2 of one of them
    let c_count = (0..phi.len())
        .map(|i| phi.iter().filter(|q| hypgeom::dist(&phi[i], q) <= 2.0).count())
        .max()
        .unwrap_or(1);
    let delta = (eps / (3.0 + eps)).min(eps / c_count as f64);
    let mut net: Vec<u32> = vec![];
    for &v in &verts {
        if net.iter().all(|&k| hypgeom::dist(&phi[v as usize], &phi[k as usize]) >= 1.0) {
            net.push(v);
        }
    }
    let owner: Vec<usize> = verts
        .iter()
        .map(|&v| {
            net.iter()
                .position(|&k| hypgeom::dist(&phi[v as usize], &phi[k as usize]) < 1.0)
                .ok_or_else(|| Error::Contract(format!("vertex {v} is not covered by the net")))
        })
        .collect::<Result<_>>()?;
    let net_points: Vec<Point> = net.iter().map(|&k| phi[k as usize].clone()).collect();
    let inner = magic_hyperbolic(&net_points, 1.0, delta, seed)?;
    let n_bound = c_count as f64 * inner.params.n_bound;
    let mut enlarged: Vec<Option<Vec<HalfSpace>>> = vec![None; net.len()];
    for wit in &inner.witnesses {
        let x = &net_points[wit.index];
        let hs = wit.halfspaces.iter().map(|h| hypgeom::enlarge_halfspace(x, h, 2.0)).collect::<Result<Vec<_>>>()?;
        enlarged[wit.index] = Some(hs);
    }
    let images: Vec<Point> = verts.iter().map(|&v| phi[v as usize].clone()).collect();
    let mut selected = vec![];
    let mut witnesses = vec![];
    for (i, &v) in verts.iter().enumerate() {
        let Some(hs) = &enlarged[owner[i]] else { continue };
        let distance = min_distance(&images[i], hs)?;
        let left = leftover(&images, hs);
        if distance < 1.0 / eps - 1e-9 || left as f64 > n_bound {
            return Err(Error::Contract(format!("vertex {v}: distance {distance} (need {}), leftover {left} (bound {n_bound})", 1.0 / eps)));
        }
        selected.push(v);
        witnesses.push(GraphWitness { vertex: v, net_vertex: net[owner[i]], halfspaces: hs.clone(), leftover: left, distance });
    }
    if (selected.len() as f64) < (1.0 - eps) * verts.len() as f64 {
        return Err(Error::Contract(format!("only {} of {} vertices selected", selected.len(), verts.len())));
    }
    Ok(GraphMagic { selected, witnesses, epsilon: eps, c_count, delta, n_bound, net_size: net.len(), inner: inner.params })
}

/// Point-cloud input format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum PointCloud {
    Euclidean { points: Vec<Vec<f64>> },
    Hyperbolic { points: Vec<Vec<f64>>, separation: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::build_tree;

    #[test]
    fn gromov_products_on_tree() {
        let w = build_tree(3, 5).unwrap();
        let x = w.sphere(3)[0];
        assert_eq!(gromov_product(&w, x, x, 0).unwrap(), 3.0);
        // different root subtrees
        let a = w.sphere(2)[0];
        let b = *w.sphere(2).iter().find(|&&v| gromov_product(&w, a, v, 0).unwrap() == 0.0).unwrap();
        assert_ne!(a, b);
        // share two steps then diverge to depth 5
        let deep: Vec<u32> = w.sphere(5);
        let mut found = false;
        for &u in &deep {
            for &v in &deep {
                if w.bfs(u)[v as usize] == 6 {
                    assert_eq!(gromov_product(&w, u, v, 0).unwrap(), 2.0);
                    found = true;
                }
            }
        }
        assert!(found);
        assert!(gromov_product(&w, 0, 10_000, 0).is_err());
    }

    #[test]
    fn trees_are_zero_hyperbolic() {
        let w = build_tree(3, 3).unwrap();
        let e = four_point_delta(&w, 0, 1).unwrap();
        assert_eq!((e.value, e.lower_bound_only), (0.0, false));
        let single = GraphWindow::from_edges(crate::graphs::Family::Custom, 1, &[]).unwrap();
        assert_eq!(four_point_delta(&single, 0, 1).unwrap().value, 0.0);
    }

    #[test]
    fn isolation_radius_cases() {
        let a = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        assert_eq!(isolation_radius(&a, 0).unwrap(), 5.0);
        assert_eq!(isolation_radius(&a, 1).unwrap(), 5.0);
        assert_eq!(isolation_radius(&a[..1], 0).unwrap(), f64::INFINITY);
        let line = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(isolation_radius(&line, 1).unwrap(), 1.0);
        assert!(isolation_radius(&line, 3).is_err());
    }

    #[test]
    fn support_trivia() {
        let a = vec![vec![0.0, 0.0], vec![3.0, 4.0]];
        for delta in [0.1, 0.5, 0.9] {
            assert!(!is_supported(&a, 0, delta, 2).unwrap().supported);
        }
        assert!(is_supported(&a[..1], 0, 0.5, 2).is_err());
        // only the nearest point shares B(x, ρ/δ) with x; one small ball covers both
        let b = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![50.0, 0.0]];
        let r = is_supported(&b, 0, 0.5, 1).unwrap();
        assert!(!r.supported && r.min_count == 0);
        assert!(magic_euclidean(&a, 0.3, 2).unwrap().supported.is_empty());
    }

    #[test]
    fn delta_solution_is_tight() {
        for (eps, c) in [(0.2, 1.0), (0.5, 0.5), (1.0, 2.0)] {
            let d = delta_for_epsilon(eps, c).unwrap();
            let (a, b) = delta_constraints(d, c);
            assert!(a >= 1.0 / eps - 1e-9 && b >= 1.0 / eps - 1e-9);
            assert!((a.min(b) - 1.0 / eps).abs() < 1e-9);
        }
        let (a, b) = delta_constraints(delta_for_epsilon(0.2, 1.0).unwrap(), 1.0);
        assert!(a >= 5.0 - 1e-9 && b >= 5.0 - 1e-9);
        assert!(delta_for_epsilon(0.1, 1.0).unwrap() < delta_for_epsilon(0.2, 1.0).unwrap());
    }

    #[test]
    fn ball_volume_closed_forms() {
        assert!((hyperbolic_ball_volume(2, 1.0) - 2.0 * std::f64::consts::PI * (1f64.cosh() - 1.0)).abs() < 1e-12);
        // H^3: π (sinh 2r - 2r)
        let r = 0.7f64;
        let exact = std::f64::consts::PI * ((2.0 * r).sinh() - 2.0 * r);
        assert!((hyperbolic_ball_volume(3, r) - exact).abs() < 1e-9);
    }

    #[test]
    fn c2_matches_ball_ratio() {
        // the neighbourhood is the hyperbolic ball of radius ln(3)/2 + c/2
        let c = 1.0f64;
        let exact = hyperbolic_ball_volume(2, 0.5 * 3f64.ln() + 0.5 * c) / hyperbolic_ball_volume(2, 0.5 * c);
        let mc = c2_constant(2, c, 200_000, 3).unwrap() / 1.5;
        assert!((mc / exact - 1.0).abs() < 0.02, "{mc} {exact}");
    }

    #[test]
    fn singleton_hyperbolic() {
        let a = vec![Point::on_axis(2, 1.0)];
        let m = magic_hyperbolic(&a, 1.0, 0.5, 1).unwrap();
        assert_eq!(m.selected, vec![0]);
        assert_eq!(m.witnesses[0].halfspaces.len(), 1);
        assert_eq!(m.witnesses[0].leftover, 1);
        assert!(m.witnesses[0].distance >= 2.0);
    }

    #[test]
    fn separation_is_enforced() {
        let a = vec![Point::on_axis(2, 1.0), Point::on_axis(2, 1.1)];
        assert!(magic_hyperbolic(&a, 1.0, 0.5, 1).is_err());
    }
}
