//! Monte Carlo engine for Bernoulli bond percolation on windows.
//!
//! Every edge of sample `i` carries the uniform `EdgeField::new(seed, i)`;
//! it is open at parameter p iff the uniform is below p. Clusters are
//! explored lazily from the relevant vertex, so the same code runs on
//! explicit windows and on the implicit tree ball.

use crate::error::{invalid, Error, Result};
use crate::graphs::{GraphWindow, TreeBall, TREE_ROOT_KEY};
use crate::hypgeom::{self, HalfSpace};
use crate::rng::{stream, EdgeField};
use crate::types::{least_squares, Estimate, Moments, TailCurve, TailPoint};
use crate::unionfind::UnionFind;
use rand::Rng;
use rayon::prelude::*;

/// Hard cap on the sample count of a single estimator call.
pub const MAX_SAMPLES: u64 = 1_000_000_000;
const CHUNK: u64 = 2048;
const WALK_SALT: u64 = 0x77a1_c0de;

fn check_p(p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("p must lie in [0,1], got {p}"));
    }
    Ok(())
}

fn check_samples(n: u64) -> Result<()> {
    if n == 0 {
        return invalid("n_samples must be >= 1");
    }
    if n > MAX_SAMPLES {
        return Err(Error::Resource(format!("n_samples {n} exceeds {MAX_SAMPLES}")));
    }
    Ok(())
}

/// Run `f` on every sample index and fold the chunk results in index order,
/// so the answer does not depend on the worker count.
fn fold_samples<T, F, M>(n: u64, init: impl Fn() -> T + Sync, f: F, merge: M) -> T
where
    T: Send,
    F: Fn(&mut T, u64) + Sync,
    M: Fn(T, T) -> T,
{
    let chunks: Vec<u64> = (0..n.div_ceil(CHUNK)).collect();
    let parts: Vec<T> = chunks
        .par_iter()
        .map(|&c| {
            let mut acc = init();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                f(&mut acc, i);
            }
            acc
        })
        .collect();
    parts.into_iter().fold(init(), merge)
}

/// Outcome of one cluster exploration.
#[derive(Clone, Copy, Debug, Default)]
pub struct Exploration {
    pub size: u64,
    pub touched_boundary: bool,
    /// The visitor asked to stop before the cluster was exhausted.
    pub stopped: bool,
}

/// A graph on which open clusters can be explored lazily. Vertices are named
/// by u64 (window id, or tree path key).
pub trait Percolable: Sync {
    type Scratch: Send;

    fn scratch(&self) -> Self::Scratch;
    fn radius(&self) -> usize;
    fn root(&self) -> u64;
    /// A vertex at graph distance `d` from the root.
    fn at_distance(&self, d: usize) -> Result<u64>;
    /// Explore the open cluster of `start`; `visit(v, depth)` returning false
    /// stops the exploration.
    fn explore(
        &self,
        scratch: &mut Self::Scratch,
        start: u64,
        field: &EdgeField,
        p: f64,
        visit: &mut dyn FnMut(u64, usize) -> bool,
    ) -> Exploration;
    /// Endpoint of an n-step simple random walk from the root.
    fn walk<R: Rng>(&self, rng: &mut R, n: usize) -> u64;
}

pub struct WindowScratch {
    stamp: Vec<u32>,
    cur: u32,
    queue: Vec<u32>,
}

impl Percolable for GraphWindow {
    type Scratch = WindowScratch;

    fn scratch(&self) -> WindowScratch {
        WindowScratch { stamp: vec![0; self.n_vertices()], cur: 0, queue: vec![] }
    }

    fn radius(&self) -> usize {
        self.radius
    }

    fn root(&self) -> u64 {
        0
    }

    fn at_distance(&self, d: usize) -> Result<u64> {
        if d > self.radius {
            return invalid(format!("distance {d} exceeds window radius {}", self.radius));
        }
        (0..self.n_vertices() as u32)
            .find(|&v| self.depth(v) == d)
            .map(|v| v as u64)
            .ok_or_else(|| Error::Invalid(format!("no vertex at distance {d}")))
    }

    fn explore(
        &self,
        s: &mut WindowScratch,
        start: u64,
        field: &EdgeField,
        p: f64,
        visit: &mut dyn FnMut(u64, usize) -> bool,
    ) -> Exploration {
        s.cur = s.cur.wrapping_add(1);
        if s.cur == 0 {
            s.stamp.iter_mut().for_each(|x| *x = 0);
            s.cur = 1;
        }
        let start = start as u32;
        let mut out = Exploration::default();
        s.queue.clear();
        s.queue.push(start);
        s.stamp[start as usize] = s.cur;
        let mut head = 0;
        while head < s.queue.len() {
            let v = s.queue[head];
            head += 1;
            out.size += 1;
            out.touched_boundary |= self.is_boundary(v);
            if !visit(v as u64, self.depth(v)) {
                out.stopped = true;
                return out;
            }
            for (w, e) in self.neighbor_edges(v) {
                if s.stamp[w as usize] != s.cur && field.open(e as u64, p) {
                    s.stamp[w as usize] = s.cur;
                    s.queue.push(w);
                }
            }
        }
        out
    }

    fn walk<R: Rng>(&self, rng: &mut R, n: usize) -> u64 {
        let mut v = 0u32;
        for _ in 0..n {
            let nb = self.neighbors(v);
            if nb.is_empty() {
                break;
            }
            v = nb[rng.gen_range(0..nb.len())];
        }
        v as u64
    }
}

impl Percolable for TreeBall {
    type Scratch = Vec<(u64, u32)>;

    fn scratch(&self) -> Self::Scratch {
        vec![]
    }

    fn radius(&self) -> usize {
        self.radius
    }

    fn root(&self) -> u64 {
        TREE_ROOT_KEY
    }

    fn at_distance(&self, d: usize) -> Result<u64> {
        if d > self.radius {
            return invalid(format!("distance {d} exceeds window radius {}", self.radius));
        }
        Ok(self.descend(&vec![0; d]))
    }

    /// Only clusters of the root can be explored (edges are directed away from it).
    fn explore(
        &self,
        stack: &mut Self::Scratch,
        start: u64,
        field: &EdgeField,
        p: f64,
        visit: &mut dyn FnMut(u64, usize) -> bool,
    ) -> Exploration {
        assert_eq!(start, TREE_ROOT_KEY, "tree balls are explored from the root");
        let mut out = Exploration::default();
        stack.clear();
        stack.push((TREE_ROOT_KEY, 0));
        while let Some((key, depth)) = stack.pop() {
            let depth = depth as usize;
            out.size += 1;
            out.touched_boundary |= depth == self.radius;
            if !visit(key, depth) {
                out.stopped = true;
                return out;
            }
            for j in 0..self.n_children(depth) {
                let child = TreeBall::child_key(key, j);
                if field.open(child, p) {
                    stack.push((child, depth as u32 + 1));
                }
            }
        }
        out
    }

    fn walk<R: Rng>(&self, rng: &mut R, n: usize) -> u64 {
        let mut path: Vec<usize> = vec![];
        for _ in 0..n {
            if path.is_empty() {
                path.push(rng.gen_range(0..self.k));
            } else if rng.gen_range(0..self.k) == 0 {
                path.pop();
            } else if path.len() < self.radius {
                path.push(rng.gen_range(0..self.k - 1));
            }
        }
        self.descend(&path)
    }
}

/// One sample: open-edge bits and the resulting clusters.
#[derive(Clone, Debug)]
pub struct Configuration {
    pub open: Vec<u64>,
    pub clusters: UnionFind,
}

impl Configuration {
    pub fn is_open(&self, e: usize) -> bool {
        self.open[e / 64] >> (e % 64) & 1 == 1
    }

    pub fn connected(&mut self, u: u32, v: u32) -> bool {
        self.clusters.same(u as usize, v as usize)
    }

    pub fn cluster_size(&mut self, v: u32) -> usize {
        self.clusters.component_size(v as usize)
    }
}

/// Sample `index` of the configuration stream keyed by `seed`.
pub fn sample_indexed(w: &GraphWindow, p: f64, seed: u64, index: u64) -> Result<Configuration> {
    check_p(p)?;
    let field = EdgeField::new(seed, index);
    let m = w.n_edges();
    let mut open = vec![0u64; m.div_ceil(64)];
    let mut uf = UnionFind::new(w.n_vertices());
    for (e, &(a, b)) in w.edges().iter().enumerate() {
        if field.open(e as u64, p) {
            open[e / 64] |= 1 << (e % 64);
            uf.union(a as usize, b as usize);
        }
    }
    Ok(Configuration { open, clusters: uf })
}

pub fn sample(w: &GraphWindow, p: f64, seed: u64) -> Result<Configuration> {
    sample_indexed(w, p, seed, 0)
}

/// Estimates of tau_p(u,v) for each pair; clusters of a common source are
/// explored once per sample and shared across its pairs.
pub fn two_point_estimate<G: Percolable>(g: &G, p: f64, pairs: &[(u64, u64)], n_samples: u64, seed: u64) -> Result<Vec<Estimate>> {
    check_p(p)?;
    check_samples(n_samples)?;
    let mut sources: Vec<u64> = pairs.iter().map(|x| x.0).collect();
    sources.sort_unstable();
    sources.dedup();
    let groups: Vec<(u64, Vec<usize>)> = sources
        .iter()
        .map(|&s| (s, pairs.iter().enumerate().filter(|(_, x)| x.0 == s).map(|(i, _)| i).collect()))
        .collect();
    let acc = fold_samples(
        n_samples,
        || (vec![Moments::default(); pairs.len()], g.scratch()),
        |(m, scratch), i| {
            let field = EdgeField::new(seed, i);
            for (s, idx) in &groups {
                let mut hit = vec![false; idx.len()];
                let ex = g.explore(scratch, *s, &field, p, &mut |v, _| {
                    for (h, &k) in hit.iter_mut().zip(idx) {
                        if pairs[k].1 == v {
                            *h = true;
                        }
                    }
                    true
                });
                for (h, &k) in hit.iter().zip(idx) {
                    m[k].push(if *h { 1.0 } else { 0.0 });
                    if ex.touched_boundary {
                        m[k].touched += 1;
                    }
                }
            }
        },
        |(a, s), (b, _)| (a.into_iter().zip(b).map(|(x, y)| x.merge(y)).collect(), s),
    );
    Ok(acc.0.iter().map(|m| m.estimate()).collect())
}

/// Mean size of the cluster of `v` inside the window.
pub fn susceptibility_estimate<G: Percolable>(g: &G, p: f64, v: u64, n_samples: u64, seed: u64) -> Result<Estimate> {
    check_p(p)?;
    check_samples(n_samples)?;
    let m = fold_samples(
        n_samples,
        || (Moments::default(), g.scratch()),
        |(m, scratch), i| {
            let ex = g.explore(scratch, v, &EdgeField::new(seed, i), p, &mut |_, _| true);
            m.push(ex.size as f64);
            if ex.touched_boundary {
                m.touched += 1;
            }
        },
        |(a, s), (b, _)| (a.merge(b), s),
    );
    Ok(m.0.estimate())
}

/// kappa_p(n): the smallest two-point estimate over one representative pair
/// (root, vertex at distance d) per distance d <= n_dist.
pub fn kappa_estimate<G: Percolable>(g: &G, p: f64, n_dist: usize, n_samples: u64, seed: u64) -> Result<Estimate> {
    if n_dist > g.radius() {
        return invalid(format!("n_dist {n_dist} exceeds window radius {}", g.radius()));
    }
    let root = g.root();
    let pairs: Vec<(u64, u64)> = (0..=n_dist).map(|d| g.at_distance(d).map(|v| (root, v))).collect::<Result<_>>()?;
    let est = two_point_estimate(g, p, &pairs, n_samples, seed)?;
    Ok(est.into_iter().fold(Estimate::exact(f64::INFINITY), |a, b| if b.value < a.value { b } else { a }))
}

/// Empirical P(|K_v| >= n) at each n of the ascending grid `ns`.
pub fn cluster_tail<G: Percolable>(g: &G, p: f64, v: u64, ns: &[u64], n_samples: u64, seed: u64) -> Result<TailCurve> {
    check_p(p)?;
    check_samples(n_samples)?;
    if ns.windows(2).any(|w| w[0] >= w[1]) || ns.first() == Some(&0) {
        return invalid("tail grid must be strictly ascending and positive");
    }
    let cap = *ns.last().unwrap_or(&1);
    let (counts, touched, _) = fold_samples(
        n_samples,
        || (vec![0u64; ns.len()], 0u64, g.scratch()),
        |(c, t, scratch), i| {
            let mut size = 0u64;
            let ex = g.explore(scratch, v, &EdgeField::new(seed, i), p, &mut |_, _| {
                size += 1;
                size < cap
            });
            for (slot, &n) in c.iter_mut().zip(ns) {
                if size >= n {
                    *slot += 1;
                }
            }
            if ex.touched_boundary {
                *t += 1;
            }
        },
        |(a, ta, s), (b, tb, _)| (a.iter().zip(&b).map(|(x, y)| x + y).collect(), ta + tb, s),
    );
    let nf = n_samples as f64;
    let points = ns
        .iter()
        .zip(&counts)
        .map(|(&n, &c)| {
            let q = c as f64 / nf;
            TailPoint { n, prob: q, std_error: (q * (1.0 - q) / nf).sqrt() }
        })
        .collect();
    Ok(TailCurve { points, boundary_touch_fraction: touched as f64 / nf })
}

/// Mean of the connection indicator between X_0 = root and X_n for an
/// independent simple random walk.
pub fn walk_two_point_estimate<G: Percolable>(g: &G, p: f64, n_steps: usize, n_samples: u64, seed: u64) -> Result<Estimate> {
    check_p(p)?;
    check_samples(n_samples)?;
    if g.radius() < n_steps {
        return invalid(format!("window radius {} is smaller than the walk length {n_steps}", g.radius()));
    }
    let root = g.root();
    let m = fold_samples(
        n_samples,
        || (Moments::default(), g.scratch()),
        |(m, scratch), i| {
            let mut rng = stream(seed ^ WALK_SALT, i);
            let target = g.walk(&mut rng, n_steps);
            let mut hit = false;
            let ex = g.explore(scratch, root, &EdgeField::new(seed, i), p, &mut |v, _| {
                hit |= v == target;
                true
            });
            m.push(if hit { 1.0 } else { 0.0 });
            if ex.touched_boundary {
                m.touched += 1;
            }
        },
        |(a, s), (b, _)| (a.merge(b), s),
    );
    Ok(m.0.estimate())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Difference {
    /// (chi(p+h) - chi(p-h)) / 2h
    Central,
    /// (chi(p+h) - chi(p)) / h
    Forward,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeCheck {
    pub derivative: Estimate,
    pub chi: Estimate,
    /// derivative / chi^2
    pub ratio: f64,
    pub ratio_se: f64,
    /// The standard error of the difference exceeds the difference itself.
    pub noisy: bool,
}

/// Finite-difference d chi/dp with common random numbers, and its ratio to chi^2.
pub fn susceptibility_derivative_check<G: Percolable>(
    g: &G,
    p: f64,
    h: f64,
    scheme: Difference,
    n_samples: u64,
    seed: u64,
) -> Result<DerivativeCheck> {
    check_samples(n_samples)?;
    if !(h > 0.0) {
        return invalid("h must be positive");
    }
    let lo = if scheme == Difference::Central { p - h } else { p };
    check_p(lo)?;
    check_p(p + h)?;
    let span = if scheme == Difference::Central { 2.0 * h } else { h };
    let root = g.root();
    let (md, mc, _) = fold_samples(
        n_samples,
        || (Moments::default(), Moments::default(), g.scratch()),
        |(md, mc, scratch), i| {
            let field = EdgeField::new(seed, i);
            let hi = g.explore(scratch, root, &field, p + h, &mut |_, _| true);
            let low = g.explore(scratch, root, &field, lo, &mut |_, _| true);
            let mid = if lo == p { low } else { g.explore(scratch, root, &field, p, &mut |_, _| true) };
            md.push((hi.size as f64 - low.size as f64) / span);
            mc.push(mid.size as f64);
            if hi.touched_boundary {
                md.touched += 1;
            }
            if mid.touched_boundary {
                mc.touched += 1;
            }
        },
        |(a, b, s), (c, d, _)| (a.merge(c), b.merge(d), s),
    );
    let (d, c) = (md.estimate(), mc.estimate());
    let ratio = d.value / (c.value * c.value);
    // delta method, ignoring the (positive) covariance: conservative
    let ratio_se = ratio * ((d.std_error / d.value).powi(2) + 4.0 * (c.std_error / c.value).powi(2)).sqrt();
    Ok(DerivativeCheck { derivative: d, chi: c, ratio, ratio_se, noisy: d.std_error * span > d.value.abs() * span })
}

/// Mean of |K_v ∩ Φ⁻¹H| together with d(Φ(v), H) and the susceptibility.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfspaceMass {
    pub mass: Estimate,
    pub distance: f64,
    pub chi: Estimate,
}

pub fn halfspace_cluster_mass(w: &GraphWindow, p: f64, v: u32, h: &HalfSpace, n_samples: u64, seed: u64) -> Result<HalfspaceMass> {
    check_p(p)?;
    check_samples(n_samples)?;
    let coords = w.coords().ok_or_else(|| Error::Invalid("window is not embedded".into()))?;
    let inside: Vec<bool> = coords.iter().map(|x| h.contains(x)).collect();
    let distance = hypgeom::distance_to_halfspace(&coords[v as usize], h)?;
    let (mm, mc, _) = fold_samples(
        n_samples,
        || (Moments::default(), Moments::default(), w.scratch()),
        |(mm, mc, scratch), i| {
            let mut count = 0u64;
            let ex = w.explore(scratch, v as u64, &EdgeField::new(seed, i), p, &mut |x, _| {
                count += inside[x as usize] as u64;
                true
            });
            mm.push(count as f64);
            mc.push(ex.size as f64);
            if ex.touched_boundary {
                mm.touched += 1;
                mc.touched += 1;
            }
        },
        |(a, b, s), (c, d, _)| (a.merge(c), b.merge(d), s),
    );
    Ok(HalfspaceMass { mass: mm.estimate(), distance, chi: mc.estimate() })
}

/// Finite-size crossing observable used to locate p_c.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingProxy {
    /// P(root <-> depth R).
    Plain,
    /// P(root <-> depth R | root <-> depth R/2). Tends to 1/2 at p_c when the
    /// critical crossing probability decays like 1/R, to 0 below and 1 above.
    Doubling,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RadiusCrossing {
    pub radius: usize,
    pub p_half: f64,
    pub std_error: f64,
    pub slope: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcEstimate {
    pub p_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub proxy: CrossingProxy,
    pub per_radius: Vec<RadiusCrossing>,
}

/// (numerator count, denominator count) of the crossing proxy at p.
fn crossing_counts<G: Percolable>(g: &G, proxy: CrossingProxy, p: f64, n_samples: u64, seed: u64) -> (u64, u64) {
    let r = g.radius();
    let half = r / 2;
    let root = g.root();
    let (num, den, _) = fold_samples(
        n_samples,
        || (0u64, 0u64, g.scratch()),
        |(num, den, scratch), i| {
            let mut deepest = 0usize;
            g.explore(scratch, root, &EdgeField::new(seed, i), p, &mut |_, d| {
                deepest = deepest.max(d);
                d < r
            });
            match proxy {
                CrossingProxy::Plain => {
                    *den += 1;
                    *num += (deepest >= r) as u64;
                }
                CrossingProxy::Doubling => {
                    *den += (deepest >= half) as u64;
                    *num += (deepest >= r) as u64;
                }
            }
        },
        |(a, b, s), (c, d, _)| (a + c, b + d, s),
    );
    (num, den)
}

fn crossing_value(c: (u64, u64)) -> f64 {
    if c.1 == 0 {
        0.0
    } else {
        c.0 as f64 / c.1 as f64
    }
}

/// p at which the crossing proxy equals 1/2, by bisection with common random
/// numbers, for one window.
pub fn crossing_point<G: Percolable>(g: &G, proxy: CrossingProxy, n_samples: u64, seed: u64) -> Result<RadiusCrossing> {
    check_samples(n_samples)?;
    if g.radius() < 2 {
        return invalid("crossing proxy needs window radius >= 2");
    }
    let f = |p: f64| crossing_value(crossing_counts(g, proxy, p, n_samples, seed));
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let (flo, fhi) = (f(lo + 1e-9), f(hi));
    if !(flo < 0.5 && fhi > 0.5) {
        return Err(Error::Contract(format!("crossing proxy is not monotone through 1/2 (f(0)={flo}, f(1)={fhi})")));
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let p_half = 0.5 * (lo + hi);
    // local slope and binomial error of the proxy at the crossing
    let dp = 0.01f64.min(p_half / 4.0).min((1.0 - p_half) / 4.0).max(1e-4);
    let (a, b) = (f((p_half - dp).max(0.0)), f((p_half + dp).min(1.0)));
    let slope = (b - a) / (2.0 * dp);
    if slope <= 0.0 {
        return Err(Error::Contract(format!("crossing proxy is not increasing near p = {p_half}")));
    }
    let c = crossing_counts(g, proxy, p_half, n_samples, seed);
    let v = crossing_value(c);
    let se_f = (v * (1.0 - v) / c.1.max(1) as f64).sqrt().max(1.0 / c.1.max(1) as f64);
    Ok(RadiusCrossing { radius: g.radius(), p_half, std_error: se_f / slope, slope })
}

/// Crossing points for each window, extrapolated linearly in 1/R to R = ∞.
/// The interval is a 95% band from the per-radius errors propagated through
/// the weighted fit.
pub fn pc_estimate<G: Percolable>(windows: &[G], proxy: CrossingProxy, n_samples: u64, seed: u64) -> Result<PcEstimate> {
    if windows.len() < 2 {
        return invalid("pc_estimate needs at least two window radii");
    }
    let per_radius: Vec<RadiusCrossing> = windows
        .iter()
        .enumerate()
        .map(|(i, w)| crossing_point(w, proxy, n_samples, seed.wrapping_add(i as u64 * 0x1000_0000)))
        .collect::<Result<_>>()?;
    let pts: Vec<(f64, f64)> = per_radius.iter().map(|c| (1.0 / c.radius as f64, c.p_half)).collect();
    let (slope, intercept) = least_squares(&pts).ok_or_else(|| Error::Invalid("radii must differ".into()))?;
    let _ = slope;
    // intercept = sum_i w_i p_i with LS weights; propagate independent errors
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let var: f64 = pts
        .iter()
        .zip(&per_radius)
        .map(|(p, c)| {
            let w = 1.0 / n - mx * (p.0 - mx) / sxx;
            w * w * c.std_error * c.std_error
        })
        .sum();
    let half = 1.96 * var.sqrt();
    Ok(PcEstimate { p_hat: intercept, ci_low: intercept - half, ci_high: intercept + half, proxy, per_radius })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_cycle, build_grid, build_tree};

    #[test]
    fn sample_extremes_and_determinism() {
        let w = build_tree(3, 4).unwrap();
        let mut c0 = sample(&w, 0.0, 1).unwrap();
        assert!((0..w.n_vertices() as u32).all(|v| c0.cluster_size(v) == 1));
        let mut c1 = sample(&w, 1.0, 1).unwrap();
        assert_eq!(c1.cluster_size(0), w.n_vertices());
        let a = sample(&w, 0.5, 9).unwrap();
        let b = sample(&w, 0.5, 9).unwrap();
        assert_eq!(a.open, b.open);
        assert!(sample(&w, 1.5, 1).is_err());
    }

    #[test]
    fn union_find_matches_bfs() {
        for w in [build_tree(3, 5).unwrap(), build_grid(2, 8).unwrap(), build_cycle(9).unwrap()] {
            for i in 0..20 {
                let mut c = sample_indexed(&w, 0.5, 4, i).unwrap();
                let field = EdgeField::new(4, i);
                let mut s = w.scratch();
                for v in 0..w.n_vertices() as u32 {
                    let mut members = vec![];
                    w.explore(&mut s, v as u64, &field, 0.5, &mut |x, _| {
                        members.push(x as u32);
                        true
                    });
                    assert_eq!(members.len(), c.cluster_size(v));
                    assert!(members.iter().all(|&x| c.connected(v, x)));
                }
            }
        }
    }

    #[test]
    fn two_point_trivia() {
        let w = build_tree(3, 3).unwrap();
        let u = w.sphere(2)[0] as u64;
        let e = two_point_estimate(&w, 0.3, &[(0, 0), (0, u)], 1000, 1).unwrap();
        assert_eq!(e[0].value, 1.0);
        assert_eq!(e[0].std_error, 0.0);
        let z = two_point_estimate(&w, 0.0, &[(0, u)], 100, 1).unwrap();
        assert_eq!(z[0].value, 0.0);
    }

    #[test]
    fn susceptibility_at_zero() {
        let w = build_tree(3, 3).unwrap();
        let e = susceptibility_estimate(&w, 0.0, 0, 100, 1).unwrap();
        assert_eq!((e.value, e.std_error, e.boundary_touch_fraction), (1.0, 0.0, 0.0));
    }

    #[test]
    fn kappa_trivia() {
        let t = TreeBall::new(3, 6).unwrap();
        assert_eq!(kappa_estimate(&t, 0.4, 0, 100, 1).unwrap().value, 1.0);
        assert_eq!(kappa_estimate(&t, 0.0, 3, 100, 1).unwrap().value, 0.0);
        assert!(kappa_estimate(&t, 0.4, 7, 100, 1).is_err());
    }

    #[test]
    fn tail_at_zero() {
        let t = TreeBall::new(3, 5).unwrap();
        let c = cluster_tail(&t, 0.0, t.root(), &[1, 2], 100, 1).unwrap();
        assert_eq!(c.points[0].prob, 1.0);
        assert_eq!(c.points[1].prob, 0.0);
    }

    #[test]
    fn walk_trivia() {
        let t = TreeBall::new(3, 6).unwrap();
        assert_eq!(walk_two_point_estimate(&t, 0.3, 0, 100, 1).unwrap().value, 1.0);
        assert!(walk_two_point_estimate(&t, 0.3, 7, 100, 1).is_err());
    }

    #[test]
    fn harris_monotonicity_with_common_randomness() {
        let w = build_grid(2, 6).unwrap();
        let far = w.sphere(5)[3] as u64;
        let mut last = -1.0;
        for i in 0..=10 {
            let p = i as f64 / 10.0;
            let e = two_point_estimate(&w, p, &[(0, far)], 2000, 5).unwrap()[0];
            assert!(e.value >= last);
            last = e.value;
        }
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let t = TreeBall::new(3, 30).unwrap();
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let a = one.install(|| susceptibility_estimate(&t, 0.4, t.root(), 20_000, 17).unwrap());
        let b = three.install(|| susceptibility_estimate(&t, 0.4, t.root(), 20_000, 17).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn halfspace_mass_trivia() {
        let w = crate::graphs::build_tiling(3, 7, 3).unwrap();
        let c = w.coords().unwrap();
        // half-space far below the window image
        let far = crate::hypgeom::ball_covering_halfspace(&[0.0, 0.0], 1e-6).unwrap();
        let m = halfspace_cluster_mass(&w, 0.3, 0, &far, 200, 1).unwrap();
        assert_eq!(m.mass.value, 0.0);
        // v inside H at p = 0
        let h = crate::hypgeom::ball_covering_halfspace(&c[0].coords, 0.5).unwrap();
        let m = halfspace_cluster_mass(&w, 0.0, 0, &h, 50, 1).unwrap();
        assert_eq!(m.mass.value, 1.0);
        assert!(halfspace_cluster_mass(&build_tree(3, 2).unwrap(), 0.3, 0, &h, 10, 1).is_err());
    }

    #[test]
    fn plain_proxy_on_line() {
        // crossing either end of a path of radius R: 1 - (1 - p^R)^2 = 1/2
        for r in [4usize, 8] {
            let w = build_grid(1, r).unwrap();
            let c = crossing_point(&w, CrossingProxy::Plain, 40_000, 3).unwrap();
            let exact = (1.0 - 0.5f64.sqrt()).powf(1.0 / r as f64);
            assert!((c.p_half - exact).abs() < 4.0 * c.std_error + 1e-3, "{c:?} {exact}");
        }
    }
}
