//! Windowed two-point matrices and the spectral quantities built on them:
//! q->q norms, polygon and triangle diagrams, the percolation Cheeger
//! constant, and the p_c < p_{2->2} criterion table.

use crate::error::{invalid, Error, Result};
use crate::graphs::{build_tiling, build_tree, Family, GraphWindow};
use crate::oracles;
use crate::percolation::{pc_estimate, sample_indexed, CrossingProxy};
use rayon::prelude::*;
use serde::Serialize;

/// Dense matrices above this order are refused.
pub const MAX_DENSE: usize = 6000;
/// Exhaustive subset search for iota is used up to this order.
pub const EXACT_IOTA_MAX: usize = 20;
const MAX_ITER: usize = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Source {
    ExactTree,
    MonteCarlo { n_samples: u64, seed: u64 },
    Explicit,
}

#[derive(Clone, Debug)]
enum Storage {
    Dense(Vec<f64>),
    /// p^{d(u,v)} on a tree window, applied by an up/down sweep.
    Tree { parent: Vec<u32>, depth: Vec<u32> },
}

/// Symmetric nonnegative matrix of two-point values over window vertices.
#[derive(Clone, Debug)]
pub struct TwoPointMatrix {
    n: usize,
    pub p: f64,
    pub source: Source,
    pub radius: usize,
    storage: Storage,
    se: Option<Vec<f64>>,
}

impl TwoPointMatrix {
    /// Validates symmetry, unit diagonal and entries in [0,1].
    pub fn from_dense(n: usize, entries: Vec<f64>, p: f64) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::Dimension(n * n, entries.len()));
        }
        for i in 0..n {
            if entries[i * n + i] != 1.0 {
                return invalid(format!("diagonal entry {i} is not 1"));
            }
            for j in 0..n {
                let x = entries[i * n + j];
                if !(0.0..=1.0).contains(&x) {
                    return invalid(format!("entry ({i},{j}) = {x} outside [0,1]"));
                }
                if x != entries[j * n + i] {
                    return invalid(format!("matrix is not symmetric at ({i},{j})"));
                }
            }
        }
        Ok(TwoPointMatrix { n, p, source: Source::Explicit, radius: 0, storage: Storage::Dense(entries), se: None })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, u: usize, v: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a[u * self.n + v],
            Storage::Tree { parent, depth } => {
                let (mut a, mut b, mut d) = (u as u32, v as u32, 0);
                while a != b {
                    if depth[a as usize] >= depth[b as usize] {
                        a = parent[a as usize];
                    } else {
                        b = parent[b as usize];
                    }
                    d += 1;
                }
                self.p.powi(d)
            }
        }
    }

    /// Monte Carlo standard error of an entry (0 for exact matrices).
    pub fn std_error(&self, u: usize, v: usize) -> f64 {
        self.se.as_ref().map_or(0.0, |s| s[u * self.n + v])
    }

    pub fn to_dense(&self) -> Result<Vec<f64>> {
        match &self.storage {
            Storage::Dense(a) => Ok(a.clone()),
            Storage::Tree { .. } => {
                if self.n > MAX_DENSE {
                    return Err(Error::Resource(format!("order {} exceeds dense limit {MAX_DENSE}", self.n)));
                }
                Ok((0..self.n * self.n).map(|i| self.entry(i / self.n, i % self.n)).collect())
            }
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        match &self.storage {
            Storage::Dense(a) => a.par_chunks(n).map(|row| row.iter().zip(x).map(|(r, v)| r * v).sum()).collect(),
            Storage::Tree { parent, .. } => {
                let p = self.p;
                // ids are in BFS order: children after parents
                let mut up = x.to_vec();
                for v in (1..n).rev() {
                    let add = p * up[v];
                    up[parent[v] as usize] += add;
                }
                let mut full = up.clone();
                for v in 1..n {
                    let par = parent[v] as usize;
                    full[v] = up[v] + p * (full[par] - p * up[v]);
                }
                full
            }
        }
    }

    /// One vertex per symmetry class when the symmetry is known (depths of
    /// a tree ball), otherwise every vertex.
    pub fn representatives(&self) -> Vec<usize> {
        match &self.storage {
            Storage::Dense(_) => (0..self.n).collect(),
            Storage::Tree { depth, .. } => {
                let mut seen = vec![];
                let mut out = vec![];
                for (v, &d) in depth.iter().enumerate() {
                    if seen.len() <= d as usize {
                        seen.push(true);
                        out.push(v);
                    }
                }
                out
            }
        }
    }
}

fn tree_parents(w: &GraphWindow) -> Result<(Vec<u32>, Vec<u32>)> {
    if w.n_edges() + 1 != w.n_vertices() {
        return invalid("window is not a tree");
    }
    let n = w.n_vertices();
    let mut parent = vec![0u32; n];
    let depth: Vec<u32> = (0..n as u32).map(|v| w.depth(v) as u32).collect();
    for v in 1..n as u32 {
        parent[v as usize] = *w
            .neighbors(v)
            .iter()
            .find(|&&u| depth[u as usize] + 1 == depth[v as usize])
            .ok_or_else(|| Error::Invalid("window is not a tree".into()))?;
        if parent[v as usize] >= v {
            return invalid("tree window ids are not in BFS order");
        }
    }
    Ok((parent, depth))
}

/// T_p(u,v) = p^{d(u,v)} on a tree window.
pub fn exact_tree_tmatrix(w: &GraphWindow, p: f64) -> Result<TwoPointMatrix> {
    if !matches!(w.family, Family::Tree { .. }) {
        return invalid("exact two-point matrix needs a tree window");
    }
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("p must lie in [0,1], got {p}"));
    }
    let (parent, depth) = tree_parents(w)?;
    Ok(TwoPointMatrix { n: w.n_vertices(), p, source: Source::ExactTree, radius: w.radius, storage: Storage::Tree { parent, depth }, se: None })
}

/// All-pairs empirical two-point matrix; each sample contributes to both
/// (u,v) and (v,u), so symmetry is exact.
pub fn mc_tmatrix(w: &GraphWindow, p: f64, n_samples: u64, seed: u64) -> Result<TwoPointMatrix> {
    let n = w.n_vertices();
    if w.n_edges() > 100_000 || n > MAX_DENSE {
        return Err(Error::Resource(format!("all-pairs mode needs <= 1e5 edges and <= {MAX_DENSE} vertices")));
    }
    if n_samples == 0 || n_samples > u32::MAX as u64 {
        return invalid("n_samples must lie in [1, 2^32)");
    }
    let counts = (0..n_samples)
        .into_par_iter()
        .fold(
            || vec![0u32; n * n],
            |mut acc, i| {
                let mut c = sample_indexed(w, p, seed, i).expect("p validated");
                let labels = c.clusters.labels();
                let mut order: Vec<u32> = (0..n as u32).collect();
                order.sort_unstable_by_key(|&v| labels[v as usize]);
                for group in order.chunk_by(|a, b| labels[*a as usize] == labels[*b as usize]) {
                    for (a, &u) in group.iter().enumerate() {
                        for &v in &group[a + 1..] {
                            let (x, y) = if u < v { (u, v) } else { (v, u) };
                            acc[x as usize * n + y as usize] += 1;
                        }
                    }
                }
                acc
            },
        )
        .reduce(|| vec![0u32; n * n], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        });
    let nf = n_samples as f64;
    let mut t = vec![0.0; n * n];
    let mut se = vec![0.0; n * n];
    for u in 0..n {
        t[u * n + u] = 1.0;
        for v in u + 1..n {
            let q = counts[u * n + v] as f64 / nf;
            let s = (q * (1.0 - q) / nf).sqrt();
            t[u * n + v] = q;
            t[v * n + u] = q;
            se[u * n + v] = s;
            se[v * n + u] = s;
        }
    }
    Ok(TwoPointMatrix { n, p, source: Source::MonteCarlo { n_samples, seed }, radius: w.radius, storage: Storage::Dense(t), se: Some(se) })
}

/// Exact window two-point matrix by summing over all 2^m edge
/// configurations (m <= 24).
pub fn enumeration_tmatrix(w: &GraphWindow, p: f64) -> Result<TwoPointMatrix> {
    let (n, m) = (w.n_vertices(), w.n_edges());
    if m > 24 {
        return Err(Error::Resource(format!("{m} edges is too many to enumerate")));
    }
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("p must lie in [0,1], got {p}"));
    }
    let mut t = vec![0.0; n * n];
    for mask in 0u32..(1 << m) {
        let open = mask.count_ones() as i32;
        let weight = p.powi(open) * (1.0 - p).powi(m as i32 - open);
        if weight == 0.0 {
            continue;
        }
        let mut uf = crate::unionfind::UnionFind::new(n);
        for (e, &(a, b)) in w.edges().iter().enumerate() {
            if mask >> e & 1 == 1 {
                uf.union(a as usize, b as usize);
            }
        }
        let labels = uf.labels();
        for u in 0..n {
            for v in u + 1..n {
                if labels[u] == labels[v] {
                    t[u * n + v] += weight;
                }
            }
        }
    }
    for u in 0..n {
        t[u * n + u] = 1.0;
        for v in u + 1..n {
            let x = t[u * n + v].min(1.0);
            t[u * n + v] = x;
            t[v * n + u] = x;
        }
    }
    let mut out = TwoPointMatrix::from_dense(n, t, p)?;
    out.radius = w.radius;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NormReport {
    pub q: f64,
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Maximum row sum (the windowed susceptibility).
pub fn norm_1(t: &TwoPointMatrix) -> f64 {
    t.matvec(&vec![1.0; t.n]).into_iter().fold(0.0, f64::max)
}

fn unit(mut x: Vec<f64>) -> Vec<f64> {
    let s = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
    x
}

/// Power iteration from the all-ones vector for a symmetric matrix with
/// `shift` added to the diagonal; returns the top eigenvalue of the unshifted matrix.
fn power_iteration(n: usize, apply: &dyn Fn(&[f64]) -> Vec<f64>, shift: f64) -> NormReport {
    if n == 0 {
        return NormReport { q: 2.0, value: 0.0, iterations: 0, residual: 0.0, converged: true };
    }
    let mut x = unit(vec![1.0; n]);
    let mut last = f64::NAN;
    let mut out = NormReport { q: 2.0, value: 0.0, iterations: 0, residual: f64::INFINITY, converged: false };
    for it in 1..=MAX_ITER {
        let mut y = apply(&x);
        y.iter_mut().zip(&x).for_each(|(a, b)| *a += shift * b);
        let lambda: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
        let res = y.iter().zip(&x).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt() / lambda.abs().max(1e-300);
        out = NormReport { q: 2.0, value: lambda - shift, iterations: it, residual: res, converged: false };
        if res < 1e-14 || (lambda - last).abs() <= 1e-13 * lambda.abs() {
            out.converged = true;
            break;
        }
        last = lambda;
        x = unit(y);
    }
    out
}

/// Largest eigenvalue by power iteration with Rayleigh-quotient stopping.
pub fn norm_2(t: &TwoPointMatrix) -> NormReport {
    power_iteration(t.n, &|x| t.matvec(x), 0.0)
}

fn q_norm(x: &[f64], q: f64) -> f64 {
    let m = x.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    if m == 0.0 {
        return 0.0;
    }
    m * x.iter().map(|v| (v.abs() / m).powf(q)).sum::<f64>().powf(1.0 / q)
}

/// q->q norm of a nonnegative symmetric matrix by the nonlinear power
/// method with dual rescaling; `residual` is the gap between the primal and
/// dual lower bounds, which vanishes at the fixed point.
pub fn norm_q(t: &TwoPointMatrix, q: f64) -> Result<NormReport> {
    if !(q > 1.0 && q.is_finite()) {
        return invalid(format!("q must lie in (1,inf), got {q}"));
    }
    let n = t.n;
    if n == 0 {
        return Ok(NormReport { q, value: 0.0, iterations: 0, residual: 0.0, converged: true });
    }
    let qd = q / (q - 1.0);
    let mut x = vec![(n as f64).powf(-1.0 / q); n];
    let mut out = NormReport { q, value: 0.0, iterations: 0, residual: f64::INFINITY, converged: false };
    let mut last = 0.0;
    for it in 1..=MAX_ITER {
        let y = t.matvec(&x);
        let val = q_norm(&y, q);
        let psi: Vec<f64> = y.iter().map(|v| (v / val).powf(q - 1.0)).collect();
        let z = t.matvec(&psi);
        let dual = q_norm(&z, qd);
        let residual = (dual - val).abs() / val;
        out = NormReport { q, value: val.max(dual), iterations: it, residual, converged: false };
        if residual < 1e-12 || (it > 1 && (val - last).abs() < 1e-15 * val) {
            out.converged = residual < 1e-8;
            break;
        }
        last = val;
        x = z.iter().map(|v| (v / dual).powf(qd - 1.0)).collect();
    }
    if !out.converged && out.residual < 1e-8 {
        out.converged = true;
    }
    Ok(out)
}

/// ln T^n(v,v), rescaling whenever the iterate grows past 1e300.
pub fn polygon_ln(t: &TwoPointMatrix, v: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return invalid("polygon order must be >= 1");
    }
    if v >= t.n {
        return invalid(format!("vertex {v} out of range"));
    }
    let mut x = vec![0.0; t.n];
    x[v] = 1.0;
    let mut ln_scale = 0.0;
    for _ in 0..n {
        x = t.matvec(&x);
        let m = x.iter().fold(0.0f64, |a, &b| a.max(b));
        if m > 1e300 {
            x.iter_mut().for_each(|a| *a /= m);
            ln_scale += m.ln();
        }
    }
    Ok(x[v].ln() + ln_scale)
}

/// T^n(v,v); infinite if it exceeds the float range.
pub fn polygon(t: &TwoPointMatrix, v: usize, n: usize) -> Result<f64> {
    polygon_ln(t, v, n).map(f64::exp)
}

/// max over `vertices` of T^n(v,v)^{1/n} at n = n_max.
pub fn growth_rate(t: &TwoPointMatrix, vertices: &[usize], n_max: usize) -> Result<f64> {
    let mut best = 0.0f64;
    for &v in vertices {
        best = best.max((polygon_ln(t, v, n_max)? / n_max as f64).exp());
    }
    Ok(best)
}

/// T^3(v,v) = <T e_v, T T e_v>.
pub fn triangle_at(t: &TwoPointMatrix, v: usize) -> Result<f64> {
    if v >= t.n {
        return invalid(format!("vertex {v} out of range"));
    }
    let mut e = vec![0.0; t.n];
    e[v] = 1.0;
    let a = t.matvec(&e);
    let b = t.matvec(&a);
    Ok(a.iter().zip(&b).map(|(x, y)| x * y).sum())
}

/// max over v of T^3(v,v).
pub fn triangle(t: &TwoPointMatrix) -> f64 {
    t.representatives().into_iter().map(|v| triangle_at(t, v).unwrap_or(0.0)).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum IotaMode {
    Exact,
    /// Upper bound on iota from the best set found.
    Heuristic,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Iota {
    pub value: f64,
    pub certificate: Vec<u32>,
    pub mode: IotaMode,
}

/// Incrementally maintained sum over K x K and row sums into K.
struct SetSum<'a> {
    n: usize,
    a: &'a [f64],
    inside: Vec<bool>,
    into: Vec<f64>,
    total: f64,
    size: usize,
}

impl<'a> SetSum<'a> {
    fn new(n: usize, a: &'a [f64]) -> Self {
        SetSum { n, a, inside: vec![false; n], into: vec![0.0; n], total: 0.0, size: 0 }
    }

    fn toggle(&mut self, x: usize) {
        let row = &self.a[x * self.n..(x + 1) * self.n];
        if self.inside[x] {
            self.into.iter_mut().zip(row).for_each(|(r, t)| *r -= t);
            self.total -= 2.0 * self.into[x] + row[x];
            self.size -= 1;
        } else {
            self.total += 2.0 * self.into[x] + row[x];
            self.into.iter_mut().zip(row).for_each(|(r, t)| *r += t);
            self.size += 1;
        }
        self.inside[x] ^= true;
    }

    /// Sum over K x K after toggling x, without changing K.
    fn toggled_total(&self, x: usize) -> f64 {
        let txx = self.a[x * self.n + x];
        if self.inside[x] {
            self.total - 2.0 * (self.into[x] - txx) - txx
        } else {
            self.total + 2.0 * self.into[x] + txx
        }
    }

    fn members(&self) -> Vec<u32> {
        (0..self.n as u32).filter(|&v| self.inside[v as usize]).collect()
    }
}

fn set_total(n: usize, a: &[f64], k: &[u32]) -> f64 {
    k.iter().map(|&u| k.iter().map(|&v| a[u as usize * n + v as usize]).sum::<f64>()).sum()
}

/// 1 - sup_K sum_{u,v in K} T(u,v) / (chi_bar |K|), exhaustively for
/// n <= 20 and by sweep cuts plus local search otherwise.
pub fn iota(t: &TwoPointMatrix) -> Result<Iota> {
    let n = t.n;
    if n == 0 {
        return invalid("empty matrix");
    }
    let a = t.to_dense()?;
    let chi = norm_1(t);
    let (best, mode) = if n <= EXACT_IOTA_MAX { (iota_exact(n, &a), IotaMode::Exact) } else { (iota_search(t, n, &a), IotaMode::Heuristic) };
    let ratio = set_total(n, &a, &best) / (chi * best.len() as f64);
    Ok(Iota { value: 1.0 - ratio, certificate: best, mode })
}

fn iota_exact(n: usize, a: &[f64]) -> Vec<u32> {
    let mut s = SetSum::new(n, a);
    let mut best = (f64::NEG_INFINITY, 0u64);
    let mut mask = 0u64;
    for i in 1u64..(1 << n) {
        let x = i.trailing_zeros() as usize;
        s.toggle(x);
        mask ^= 1 << x;
        let r = s.total / s.size as f64;
        if r > best.0 {
            best = (r, mask);
        }
    }
    (0..n as u32).filter(|&v| best.1 >> v & 1 == 1).collect()
}

fn iota_search(t: &TwoPointMatrix, n: usize, a: &[f64]) -> Vec<u32> {
    let mut best: (f64, Vec<u32>) = (f64::NEG_INFINITY, vec![]);
    let scan = |order: &[usize], best: &mut (f64, Vec<u32>)| {
        let mut s = SetSum::new(n, a);
        let mut top = (f64::NEG_INFINITY, 0);
        for (i, &x) in order.iter().enumerate() {
            s.toggle(x);
            let r = s.total / s.size as f64;
            if r > top.0 {
                top = (r, i + 1);
            }
        }
        if top.0 > best.0 {
            *best = (top.0, order[..top.1].iter().map(|&v| v as u32).collect());
        }
    };
    let n_centers = if n <= 1000 { n } else { 64 };
    let centers: Vec<usize> = (0..n_centers).map(|i| i * n / n_centers).collect();
    for &c in &centers {
        // balls: superlevel sets of the row of c
        let row = &a[c * n..(c + 1) * n];
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&x, &y| row[y].total_cmp(&row[x]).then(x.cmp(&y)));
        scan(&order, &mut best);
        // half-space towards c against its closest other vertex
        if let Some(b) = (0..n).filter(|&b| b != c).max_by(|&x, &y| row[x].total_cmp(&row[y]).then(y.cmp(&x))) {
            let half: Vec<usize> = (0..n).filter(|&x| a[x * n + c] >= a[x * n + b]).collect();
            scan(&half, &mut best);
        }
    }
    // prefixes of the Perron vector ordering
    let mut x = unit(vec![1.0; n]);
    for _ in 0..200 {
        x = unit(t.matvec(&x));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[j].total_cmp(&x[i]).then(i.cmp(&j)));
    scan(&order, &mut best);
    // single-vertex local search
    let mut s = SetSum::new(n, a);
    for &v in &best.1 {
        s.toggle(v as usize);
    }
    for _ in 0..10 * n {
        let cur = s.total / s.size as f64;
        let mut step = (cur * (1.0 + 1e-12), usize::MAX);
        for v in 0..n {
            let size = if s.inside[v] { s.size - 1 } else { s.size + 1 };
            if size == 0 {
                continue;
            }
            let r = s.toggled_total(v) / size as f64;
            if r > step.0 {
                step = (r, v);
            }
        }
        if step.1 == usize::MAX {
            break;
        }
        s.toggle(step.1);
    }
    s.members()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CheegerReport {
    pub chi_bar: f64,
    pub norm_2: f64,
    pub iota: f64,
    /// chi_bar (1 - iota)
    pub lower: f64,
    /// chi_bar sqrt(1 - iota^2)
    pub upper: f64,
    pub holds: bool,
}

/// chi_bar (1 - iota) <= ||T||_2 <= chi_bar sqrt(1 - iota^2) with exact iota
/// and a dense eigensolve.
pub fn cheeger_sandwich_check(t: &TwoPointMatrix) -> Result<CheegerReport> {
    if t.n > EXACT_IOTA_MAX {
        return invalid(format!("exact iota needs order <= {EXACT_IOTA_MAX}"));
    }
    let io = iota(t)?;
    let chi_bar = norm_1(t);
    let norm = oracles::dense_top_eigenvalue(t.n, &t.to_dense()?);
    let lower = chi_bar * (1.0 - io.value);
    let upper = chi_bar * (1.0 - io.value * io.value).sqrt();
    let tol = 1e-9 * chi_bar;
    Ok(CheegerReport { chi_bar, norm_2: norm, iota: io.value, lower, upper, holds: lower <= norm + tol && norm <= upper + tol })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdjacencyNorm {
    pub windowed: NormReport,
    /// Norm of the infinite graph when known in closed form.
    pub infinite: Option<f64>,
}

/// Top adjacency eigenvalue of the window (shifted power iteration, so
/// bipartite windows converge too).
pub fn adjacency_norm(w: &GraphWindow) -> AdjacencyNorm {
    let n = w.n_vertices();
    let apply = |x: &[f64]| -> Vec<f64> { (0..n as u32).map(|v| w.neighbors(v).iter().map(|&u| x[u as usize]).sum()).collect() };
    let windowed = power_iteration(n, &apply, 1.0);
    let infinite = match w.family {
        Family::Tree { k } => Some(2.0 * ((k - 1) as f64).sqrt()),
        Family::Grid { d } => Some(2.0 * d as f64),
        Family::Cycle { .. } => Some(2.0),
        _ => None,
    };
    AdjacencyNorm { windowed, infinite }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RieszThorinReport {
    pub q: f64,
    pub theta: f64,
    pub norm_q: f64,
    pub norm_1: f64,
    pub norm_2: f64,
    pub bound: f64,
    pub holds: bool,
}

/// ||T||_q <= ||T||_1^{1-theta} ||T||_2^theta with 1/q = (1-theta) + theta/2.
pub fn riesz_thorin_check(t: &TwoPointMatrix, q: f64) -> Result<RieszThorinReport> {
    if !(q > 1.0 && q <= 2.0) {
        return invalid(format!("q must lie in (1,2], got {q}"));
    }
    let theta = 2.0 * (1.0 - 1.0 / q);
    let n1 = norm_1(t);
    let n2 = norm_2(t).value;
    let nq = if q == 2.0 { n2 } else { norm_q(t, q)?.value };
    let bound = n1.powf(1.0 - theta) * n2.powf(theta);
    Ok(RieszThorinReport { q, theta, norm_q: nq, norm_1: n1, norm_2: n2, bound, holds: nq <= bound * (1.0 + 1e-6) })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpansionReport {
    pub k: usize,
    pub p1: f64,
    pub p2: f64,
    /// Per-term growth factor of the series; >= 1 means divergence.
    pub rate: f64,
    pub diverged: bool,
    pub lower: Vec<f64>,
    pub middle: Vec<f64>,
    /// Empty when the series diverges.
    pub upper: Vec<f64>,
    pub terms: usize,
    pub lower_holds: bool,
    pub upper_holds: bool,
}

/// Radial check on the infinite k-regular tree of
/// T_{p1} <= T_{p2} <= sum_m [beta T_{p1} A]^m T_{p1}, beta = (p2-p1)/(1-p1),
/// at distances 0..=d_max.
pub fn expansion_inequality_check(k: usize, p1: f64, p2: f64, d_max: usize) -> Result<ExpansionReport> {
    if k < 3 {
        return invalid("tree degree must be >= 3");
    }
    if !(0.0 <= p1 && p1 <= p2 && p2 < 1.0) {
        return invalid("need 0 <= p1 <= p2 < 1");
    }
    let lower: Vec<f64> = (0..=d_max).map(|d| p1.powi(d as i32)).collect();
    let middle: Vec<f64> = (0..=d_max).map(|d| p2.powi(d as i32)).collect();
    let lower_holds = lower.iter().zip(&middle).all(|(a, b)| a <= b);
    let beta = (p2 - p1) / (1.0 - p1);
    let p22 = 1.0 / ((k - 1) as f64).sqrt();
    let rate = if beta == 0.0 {
        0.0
    } else if p1 >= p22 {
        f64::INFINITY
    } else {
        beta * oracles::tree_l2_norm(k, p1) * 2.0 * ((k - 1) as f64).sqrt()
    };
    let mut report = ExpansionReport { k, p1, p2, rate, diverged: rate >= 1.0, lower, middle, upper: vec![], terms: 0, lower_holds, upper_holds: true };
    if report.diverged {
        return Ok(report);
    }
    // truncated profiles undercount every term, so the computed sum is a lower bound
    let len = d_max + 1 + 80;
    let t1: Vec<f64> = (0..len).map(|d| p1.powi(d as i32)).collect();
    let adj = [0.0, 1.0];
    let mut term = t1.clone();
    let mut sum = t1.clone();
    let mut terms = 1;
    while beta > 0.0 && terms < 10_000 {
        let next = oracles::radial_convolve(k, &t1, &oracles::radial_convolve(k, &adj, &term, len), len);
        term = next.iter().map(|v| beta * v).collect();
        sum.iter_mut().zip(&term).for_each(|(s, t)| *s += t);
        terms += 1;
        let head = term[..=d_max].iter().fold(0.0f64, |a, &b| a.max(b));
        if head * rate / (1.0 - rate) < 1e-12 {
            break;
        }
    }
    sum.truncate(d_max + 1);
    report.upper_holds = report.middle.iter().zip(&sum).all(|(m, u)| *m <= u * (1.0 + 1e-12));
    report.upper = sum;
    report.terms = terms;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionRow {
    pub p: f64,
    pub chi_bar: f64,
    pub chi_bar_se: f64,
    pub iota_upper: f64,
    pub iota_mode: IotaMode,
    pub norm_2: f64,
    pub norm_2_converged: bool,
    pub adjacency_norm: f64,
    pub pc_hat: f64,
    /// (pc - p)/(1 - p) chi_bar sqrt(1 - iota^2) ||A||_2
    pub product: f64,
    pub product_se: f64,
    pub below_one: bool,
    pub window_radius: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionTable {
    pub family: Family,
    pub radius: usize,
    pub pc_hat: f64,
    pub pc_ci: (f64, f64),
    pub adjacency_windowed: f64,
    /// Infinite-graph value when known, otherwise the windowed one.
    pub adjacency_used: f64,
    pub rows: Vec<CriterionRow>,
    /// Overestimating iota shrinks sqrt(1 - iota^2), so heuristic rows can
    /// only understate the product.
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionConfig {
    pub family: Family,
    pub p_grid: Vec<f64>,
    pub radius: usize,
    pub n_samples: u64,
    pub seed: u64,
    /// Critical value to use; estimated when absent (non-tree families).
    pub pc_hat: Option<f64>,
}

/// The per-p table behind the p_c < p_{2->2} criterion. Tree windows use
/// exact matrices, other families Monte Carlo ones.
pub fn criterion_evaluate(cfg: &CriterionConfig) -> Result<CriterionTable> {
    let w = match cfg.family {
        Family::Tree { k } => build_tree(k, cfg.radius)?,
        Family::Tiling { p, q } => build_tiling(p, q, cfg.radius)?,
        Family::Grid { d } => crate::graphs::build_grid(d, cfg.radius)?,
        _ => return invalid("criterion needs a tree, grid or tiling family"),
    };
    let (pc_hat, pc_ci) = match (cfg.pc_hat, &cfg.family) {
        (Some(pc), _) => (pc, (pc, pc)),
        (None, Family::Tree { k }) => {
            let pc = 1.0 / (*k as f64 - 1.0);
            (pc, (pc, pc))
        }
        (None, _) => {
            let radii = [(cfg.radius / 2).max(2), cfg.radius.max(3)];
            let windows: Vec<GraphWindow> = radii
                .iter()
                .map(|&r| match cfg.family {
                    Family::Tiling { p, q } => build_tiling(p, q, r),
                    Family::Grid { d } => crate::graphs::build_grid(d, r),
                    _ => unreachable!(),
                })
                .collect::<Result<_>>()?;
            let e = pc_estimate(&windows, CrossingProxy::Doubling, cfg.n_samples, cfg.seed)?;
            (e.p_hat, (e.ci_low, e.ci_high))
        }
    };
    if let Some(&p) = cfg.p_grid.iter().find(|&&p| !(0.0..pc_hat).contains(&p)) {
        return Err(Error::Contract(format!("grid point {p} is not below the critical estimate {pc_hat}")));
    }
    let adj = adjacency_norm(&w);
    let adjacency_used = adj.infinite.unwrap_or(adj.windowed.value);
    let mut rows = vec![];
    for (i, &p) in cfg.p_grid.iter().enumerate() {
        let t = match cfg.family {
            Family::Tree { .. } => exact_tree_tmatrix(&w, p)?,
            _ => mc_tmatrix(&w, p, cfg.n_samples, cfg.seed.wrapping_add(i as u64))?,
        };
        let sums = t.matvec(&vec![1.0; t.n()]);
        let (argmax, chi_bar) = sums.iter().copied().enumerate().fold((0, 0.0), |a, b| if b.1 > a.1 { b } else { a });
        let chi_bar_se = (0..t.n()).map(|j| t.std_error(argmax, j).powi(2)).sum::<f64>().sqrt();
        let io = iota(&t)?;
        let n2 = norm_2(&t);
        let factor = (pc_hat - p) / (1.0 - p) * (1.0 - io.value * io.value).max(0.0).sqrt() * adjacency_used;
        let product = factor * chi_bar;
        rows.push(CriterionRow {
            p,
            chi_bar,
            chi_bar_se,
            iota_upper: io.value,
            iota_mode: io.mode,
            norm_2: n2.value,
            norm_2_converged: n2.converged,
            adjacency_norm: adjacency_used,
            pc_hat,
            product,
            product_se: factor * chi_bar_se,
            below_one: product < 1.0,
            window_radius: cfg.radius,
        });
    }
    Ok(CriterionTable {
        family: cfg.family.clone(),
        radius: cfg.radius,
        pc_hat,
        pc_ci,
        adjacency_windowed: adj.windowed.value,
        adjacency_used,
        rows,
        note: "iota is an upper bound in heuristic mode; this can only lower the product".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{build_cycle, build_grid};

    fn identity(n: usize) -> TwoPointMatrix {
        let mut a = vec![0.0; n * n];
        (0..n).for_each(|i| a[i * n + i] = 1.0);
        TwoPointMatrix::from_dense(n, a, 0.0).unwrap()
    }

    fn two_by_two(p: f64) -> TwoPointMatrix {
        TwoPointMatrix::from_dense(2, vec![1.0, p, p, 1.0], p).unwrap()
    }

    #[test]
    fn validation() {
        assert!(TwoPointMatrix::from_dense(2, vec![1.0, 0.2, 0.3, 1.0], 0.2).is_err());
        assert!(TwoPointMatrix::from_dense(2, vec![0.9, 0.2, 0.2, 1.0], 0.2).is_err());
        assert!(TwoPointMatrix::from_dense(1, vec![1.0, 0.0], 0.2).is_err());
        assert!(exact_tree_tmatrix(&build_cycle(5).unwrap(), 0.3).is_err());
    }

    #[test]
    fn exact_tree_entries() {
        let w = build_tree(3, 2).unwrap();
        let t0 = exact_tree_tmatrix(&w, 0.0).unwrap().to_dense().unwrap();
        assert_eq!(t0, identity(10).to_dense().unwrap());
        let t1 = exact_tree_tmatrix(&w, 1.0).unwrap().to_dense().unwrap();
        assert!(t1.iter().all(|&x| x == 1.0));
        let t = exact_tree_tmatrix(&w, 0.3).unwrap();
        let leaf = w.sphere(2)[0] as usize;
        assert_eq!(t.entry(0, leaf), 0.3f64.powi(2));
        // sweep matvec agrees with the dense product
        let x: Vec<f64> = (0..10).map(|i| (i as f64).sin()).collect();
        let d = t.to_dense().unwrap();
        let dense = TwoPointMatrix::from_dense(10, d, 0.3).unwrap();
        for (a, b) in t.matvec(&x).iter().zip(dense.matvec(&x)) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn simple_norms() {
        assert_eq!(norm_1(&identity(4)), 1.0);
        let ones = TwoPointMatrix::from_dense(3, vec![1.0; 9], 1.0).unwrap();
        assert_eq!(norm_1(&ones), 3.0);
        let r = norm_2(&two_by_two(0.4));
        assert!(r.converged && (r.value - 1.4).abs() < 1e-12);
        assert!((norm_2(&identity(5)).value - 1.0).abs() < 1e-15);
        for q in [1.25, 1.5, 3.0] {
            assert!((norm_q(&identity(3), q).unwrap().value - 1.0).abs() < 1e-12);
        }
        assert!(norm_q(&identity(3), 1.0).is_err());
    }

    #[test]
    fn permutation_is_an_isometry() {
        // not a two-point matrix (zero diagonal), so bypass validation
        let t = TwoPointMatrix { n: 2, p: 0.0, source: Source::Explicit, radius: 0, storage: Storage::Dense(vec![0.0, 1.0, 1.0, 0.0]), se: None };
        for q in [1.25, 1.5, 3.0] {
            assert!((norm_q(&t, q).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn q_two_matches_power_iteration() {
        let t = exact_tree_tmatrix(&build_tree(3, 5).unwrap(), 0.4).unwrap();
        let a = norm_q(&t, 2.0).unwrap();
        assert!(a.converged);
        assert!((a.value - norm_2(&t).value).abs() < 1e-6 * a.value);
    }

    #[test]
    fn polygon_and_triangle_trivia() {
        let i = identity(3);
        assert_eq!(polygon(&i, 1, 7).unwrap(), 1.0);
        assert_eq!(triangle(&i), 1.0);
        let ones = TwoPointMatrix::from_dense(3, vec![1.0; 9], 1.0).unwrap();
        assert!((triangle(&ones) - 9.0).abs() < 1e-12);
        assert!(polygon(&i, 0, 0).is_err());
        // overflow guard
        let big = TwoPointMatrix::from_dense(400, vec![1.0; 160_000], 1.0).unwrap();
        let ln = polygon_ln(&big, 0, 200).unwrap();
        assert!((ln - 199.0 * 400f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn iota_trivia() {
        let io = iota(&identity(4)).unwrap();
        assert_eq!((io.value, io.mode), (0.0, IotaMode::Exact));
        let io = iota(&two_by_two(0.5)).unwrap();
        assert!(io.value.abs() < 1e-15);
        assert_eq!(io.certificate, vec![0, 1]);
        let t = exact_tree_tmatrix(&build_tree(3, 4).unwrap(), 0.3).unwrap();
        let io = iota(&t).unwrap();
        assert_eq!(io.mode, IotaMode::Heuristic);
        assert!(io.value <= 1.0 - 1.0 / norm_1(&t) + 1e-12);
    }

    #[test]
    fn sandwich_small_cases() {
        for t in [identity(3), two_by_two(0.3)] {
            let r = cheeger_sandwich_check(&t).unwrap();
            assert!(r.holds, "{r:?}");
        }
    }

    #[test]
    fn adjacency_cases() {
        let single = GraphWindow::from_edges(Family::Custom, 1, &[]).unwrap();
        assert!(adjacency_norm(&single).windowed.value.abs() < 1e-12);
        let line = build_grid(1, 50).unwrap();
        let a = adjacency_norm(&line);
        assert!(a.windowed.converged);
        assert!((a.windowed.value - oracles::path_adjacency_norm(101)).abs() < 1e-8);
        assert!((a.windowed.value / 2.0 - 1.0).abs() < 0.01);
    }

    #[test]
    fn riesz_thorin_trivia() {
        let t = exact_tree_tmatrix(&build_tree(3, 4).unwrap(), 0.4).unwrap();
        let r = riesz_thorin_check(&t, 2.0).unwrap();
        assert_eq!(r.theta, 1.0);
        assert!((r.bound - r.norm_q).abs() < 1e-12);
        let r = riesz_thorin_check(&t, 1.0001).unwrap();
        assert!(r.holds && (r.bound - r.norm_1).abs() < 1e-2 * r.norm_1);
    }

    #[test]
    fn expansion_trivia() {
        let r = expansion_inequality_check(3, 0.3, 0.3, 6).unwrap();
        assert!(r.lower_holds && r.upper_holds);
        for (u, l) in r.upper.iter().zip(&r.lower) {
            assert!((u - l).abs() < 1e-15);
        }
        assert!(expansion_inequality_check(3, 0.4, 0.3, 6).is_err());
    }

    #[test]
    fn enumeration_on_four_cycle() {
        let p = 0.3f64;
        let t = enumeration_tmatrix(&build_cycle(4).unwrap(), p).unwrap();
        let adjacent = p + (1.0 - p) * p.powi(3);
        let opposite = 1.0 - (1.0 - p * p).powi(2);
        let w = build_cycle(4).unwrap();
        for u in 0..4u32 {
            for v in 0..4u32 {
                let d = crate::graphs::graph_distance(&w, u, v).unwrap().dist;
                let want = [1.0, adjacent, opposite][d as usize];
                assert!((t.entry(u as usize, v as usize) - want).abs() < 1e-14);
            }
        }
        let tree = build_tree(3, 2).unwrap();
        let a = enumeration_tmatrix(&tree, 0.4).unwrap().to_dense().unwrap();
        let b = exact_tree_tmatrix(&tree, 0.4).unwrap().to_dense().unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-14));
    }

    #[test]
    fn mc_matrix_trivia() {
        let w = build_tree(3, 2).unwrap();
        let t = mc_tmatrix(&w, 0.0, 100, 1).unwrap();
        assert_eq!(t.to_dense().unwrap(), identity(10).to_dense().unwrap());
        assert_eq!(t.std_error(0, 1), 0.0);
        let t = mc_tmatrix(&w, 0.5, 2000, 1).unwrap();
        let d = t.to_dense().unwrap();
        for u in 0..10 {
            assert_eq!(d[u * 10 + u], 1.0);
            for v in 0..10 {
                assert_eq!(d[u * 10 + v], d[v * 10 + u]);
            }
        }
    }
}
