//! Exact values on the k-regular tree and on Z, computed twice where possible.
//!
//! These are the ground truths every Monte Carlo or windowed computation is
//! compared against.

use crate::error::{invalid, Result};
use crate::types::{TailCurve, TailPoint};
use nalgebra::DMatrix;

fn check_k(k: usize) -> Result<()> {
    if k < 3 {
        return invalid(format!("tree degree k must be >= 3, got {k}"));
    }
    Ok(())
}

/// Degree of the k-regular tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TreeFamily {
    k: usize,
}

impl TreeFamily {
    pub fn new(k: usize) -> Result<Self> {
        check_k(k)?;
        Ok(TreeFamily { k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of vertices at distance n from a fixed vertex.
    pub fn sphere_size(&self, n: usize) -> f64 {
        sphere_size(self.k, n)
    }
}

pub fn sphere_size(k: usize, n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        k as f64 * ((k - 1) as f64).powi(n as i32 - 1)
    }
}

/// Unique-path two-point function p^d.
pub fn tree_two_point(_k: usize, p: f64, d: usize) -> f64 {
    p.powi(d as i32)
}

pub fn line_two_point(p: f64, d: i64) -> f64 {
    p.powi(d.unsigned_abs() as i32)
}

/// Expected root cluster size, +inf at and above p_c.
pub fn tree_susceptibility(k: usize, p: f64) -> f64 {
    let b = (k - 1) as f64 * p;
    if b >= 1.0 {
        f64::INFINITY
    } else {
        (1.0 + p) / (1.0 - b)
    }
}

/// Sphere-by-sphere summation of the susceptibility, stopped once the
/// geometric remainder is below `tol`.
pub fn tree_susceptibility_series(k: usize, p: f64, tol: f64) -> f64 {
    let b = (k - 1) as f64 * p;
    if b >= 1.0 {
        return f64::INFINITY;
    }
    let mut sum = 1.0;
    let mut term = k as f64 * p;
    while term > 0.0 {
        sum += term;
        if term * b / (1.0 - b) < tol * sum {
            break;
        }
        term *= b;
    }
    sum
}

/// Derivative of the susceptibility in p.
pub fn tree_susceptibility_derivative(k: usize, p: f64) -> f64 {
    let b = (k - 1) as f64 * p;
    k as f64 / ((1.0 - b) * (1.0 - b))
}

/// Thresholds of the k-regular tree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeThresholds {
    pub p_c: f64,
    pub p_qq: f64,
    pub rho: f64,
    pub gr: f64,
}

/// `q` may be `f64::INFINITY`. Exponents below 2 are refused.
pub fn tree_thresholds(k: usize, q: f64) -> Result<TreeThresholds> {
    check_k(k)?;
    if q.is_nan() || q < 2.0 {
        return invalid(format!("q must lie in [2, inf], got {q}"));
    }
    let gr = (k - 1) as f64;
    let p_qq = if q.is_infinite() { 1.0 / gr } else { gr.powf(-(q - 1.0) / q) };
    Ok(TreeThresholds { p_c: 1.0 / gr, p_qq, rho: 2.0 * gr.sqrt() / k as f64, gr })
}

/// Polygon n = 2 in closed form.
pub fn tree_polygon2_closed(k: usize, p: f64) -> f64 {
    let b = (k - 1) as f64 * p * p;
    if b >= 1.0 {
        return f64::INFINITY;
    }
    1.0 + k as f64 * p * p / (1.0 - b)
}

/// Radial kernel profile on the tree: value at each distance `0..len`.
pub type Profile = Vec<f64>;

/// Convolution of two radial kernels on the k-regular tree, evaluated at
/// distances `0..out_len`. Distances beyond the profile lengths count as zero.
pub fn radial_convolve(k: usize, f: &[f64], g: &[f64], out_len: usize) -> Profile {
    let km = (k - 1) as f64;
    let hmax = f.len().max(g.len());
    let mut out = vec![0.0; out_len];
    for (c, slot) in out.iter_mut().enumerate() {
        let mut s = 0.0;
        for t in 0..=c {
            let branches = if c == 0 {
                k as f64
            } else if t == 0 || t == c {
                km
            } else {
                km - 1.0
            };
            // h = 0: the point on the geodesic itself
            if t < f.len() && c - t < g.len() {
                s += f[t] * g[c - t];
            }
            let mut mult = branches;
            for h in 1..hmax {
                let (a, b) = (t + h, c - t + h);
                if a >= f.len() || b >= g.len() {
                    break;
                }
                s += mult * f[a] * g[b];
                mult *= km;
            }
        }
        *slot = s;
    }
    out
}

/// Result of a radially truncated polygon evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolygonValue {
    pub value: f64,
    /// Estimated neglected mass beyond the truncation distance.
    pub tail_bound: f64,
}

/// T^n(v,v) on the infinite tree by repeated radial convolution of p^d,
/// truncated at distance `d_max`.
pub fn tree_polygon(k: usize, p: f64, n: usize, d_max: usize) -> Result<PolygonValue> {
    check_k(k)?;
    if n == 0 {
        return invalid("polygon order must be >= 1");
    }
    let len = d_max + 1;
    let f: Profile = (0..len).map(|d| p.powi(d as i32)).collect();
    let mut g = f.clone();
    for _ in 1..n {
        g = radial_convolve(k, &f, &g, len);
    }
    // T^n(v,v) = sum over y of T^a(v,y) T^(n-a)(y,v); read it off the profile at 0.
    let value = g[0];
    let r = p * ((k - 1) as f64).sqrt();
    let tail_bound = if r >= 1.0 {
        f64::INFINITY
    } else {
        // last retained shell times the geometric remainder
        let last = sphere_size(k, d_max) * f[d_max] * g[d_max];
        last * r / (1.0 - r)
    };
    Ok(PolygonValue { value, tail_bound })
}

/// Log of the spherical function of the bottom of the adjacency spectrum.
fn ln_phi0(k: usize, n: usize) -> f64 {
    let km = (k - 1) as f64;
    (n as f64 * (k as f64 - 2.0) / k as f64).ln_1p() - 0.5 * n as f64 * km.ln()
}

/// ||T_p||_{2->2} on the infinite k-regular tree, +inf for p >= p_{2->2}.
pub fn tree_l2_norm(k: usize, p: f64) -> f64 {
    let km = (k - 1) as f64;
    let r = p * km.sqrt();
    if r >= 1.0 {
        return f64::INFINITY;
    }
    let kf = k as f64;
    1.0 + kf / km * (r / (1.0 - r) + (kf - 2.0) / kf * r / ((1.0 - r) * (1.0 - r)))
}

/// Same quantity by summing the spherical transform shell by shell.
pub fn tree_l2_norm_series(k: usize, p: f64, tol: f64) -> f64 {
    let r = p * ((k - 1) as f64).sqrt();
    if r >= 1.0 {
        return f64::INFINITY;
    }
    // |S_n| p^n phi0(n) in log space: the factors overflow and underflow
    // separately long before the series converges when r is close to 1
    let mut s = 1.0;
    for n in 1..10_000_000usize {
        let ln_sphere = (k as f64).ln() + (n - 1) as f64 * ((k - 1) as f64).ln();
        let t = (ln_sphere + n as f64 * p.ln() + ln_phi0(k, n)).exp();
        s += t;
        if n > 2 && t < tol * s * (1.0 - r) {
            break;
        }
    }
    s
}

/// Distribution of d(X_0, X_n) for simple random walk on the k-regular tree.
pub fn tree_walk_distance_distribution(k: usize, n: usize) -> Vec<f64> {
    let up = (k - 1) as f64 / k as f64;
    let down = 1.0 / k as f64;
    let mut dist = vec![0.0; n + 1];
    dist[0] = 1.0;
    for step in 0..n {
        let mut next = vec![0.0; n + 1];
        for m in 0..=step.min(n) {
            let w = dist[m];
            if w == 0.0 {
                continue;
            }
            if m == 0 {
                next[1] += w;
            } else {
                next[m + 1] += w * up;
                next[m - 1] += w * down;
            }
        }
        dist = next;
    }
    dist
}

/// E[p^{d(X_0,X_n)}] for simple random walk started at the root.
pub fn tree_walk_two_point(k: usize, p: f64, n: usize) -> f64 {
    tree_walk_distance_distribution(k, n)
        .iter()
        .enumerate()
        .map(|(m, w)| w * p.powi(m as i32))
        .sum()
}

/// Sum of tau over the (k-1)^n descendants n generations below a vertex.
pub fn tree_branching_sum(k: usize, p: f64, n_gen: usize) -> f64 {
    ((k - 1) as f64 * p).powi(n_gen as i32)
}

/// Generation-by-generation twin of [`tree_branching_sum`].
pub fn tree_branching_sum_iterated(k: usize, p: f64, n_gen: usize) -> f64 {
    let mut count = 1.0;
    let mut tau = 1.0;
    for _ in 0..n_gen {
        count *= (k - 1) as f64;
        tau *= p;
    }
    count * tau
}

// Loader's saddle-point binomial density; accurate to a few ulps in log space
// even for n in the millions, unlike lgamma differences.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        let mut lf = 0.0;
        let mut i = 2.0;
        while i <= n {
            lf += f64::ln(i);
            i += 1.0;
        }
        return lf - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        s
    } else {
        x * (x / np).ln() + np - x
    }
}

/// ln P(Bin(n, p) = x).
pub fn ln_binomial_pmf(x: u64, n: u64, p: f64) -> f64 {
    if x > n {
        return f64::NEG_INFINITY;
    }
    let q = 1.0 - p;
    if p == 0.0 {
        return if x == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if q == 0.0 {
        return if x == n { 0.0 } else { f64::NEG_INFINITY };
    }
    let (xf, nf) = (x as f64, n as f64);
    if x == 0 {
        return nf * (-p).ln_1p();
    }
    if x == n {
        return nf * p.ln();
    }
    let lc = stirlerr(nf) - stirlerr(xf) - stirlerr(nf - xf) - bd0(xf, nf * p) - bd0(nf - xf, nf * q);
    let lf = (2.0 * std::f64::consts::PI).ln() + xf.ln() + (-xf / nf).ln_1p();
    lc - 0.5 * lf
}

/// P(|K_root| = n) for n = 1..=n_max via the total-progeny (Dwass) formula:
/// the root has Bin(k,p) children, every other vertex Bin(k-1,p).
pub fn tree_cluster_size_pmf(k: usize, p: f64, n_max: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; n_max + 1];
    for (n, slot) in pmf.iter_mut().enumerate().skip(1) {
        if n == 1 {
            *slot = (k as f64 * (-p).ln_1p()).exp();
            continue;
        }
        let m = (n - 1) as u64;
        let mut s = 0.0;
        for j in 1..=k.min(n - 1) as u64 {
            let lroot = ln_binomial_pmf(j, k as u64, p);
            // forest of j Galton-Watson trees with total size m
            let lforest = (j as f64 / m as f64).ln() + ln_binomial_pmf(m - j, (k as u64 - 1) * m, p);
            s += (lroot + lforest).exp();
        }
        *slot = s;
    }
    pmf
}

/// Twin of [`tree_cluster_size_pmf`] by direct convolution of subtree sizes.
/// Quadratic in `n_max`; intended for moderate sizes.
pub fn tree_cluster_size_pmf_convolution(k: usize, p: f64, n_max: usize) -> Vec<f64> {
    let kk = k - 1;
    let binom = |m: usize, c: usize| ln_binomial_pmf(c as u64, m as u64, p).exp();
    // t[s] = P(subtree size = s); pw[c][s] = c-fold convolution of t
    let mut t = vec![0.0; n_max + 1];
    let mut pw = vec![vec![0.0; n_max + 1]; k + 1];
    pw[0][0] = 1.0;
    for s in 1..=n_max {
        // t[s] needs pw[c][s-1] for c <= k-1, which uses t[1..s-1] only
        t[s] = (0..=kk).map(|c| binom(kk, c) * pw[c][s - 1]).sum();
        for c in 1..=k {
            let v: f64 = (1..=s).map(|i| t[i] * pw[c - 1][s - i]).sum();
            pw[c][s] = v;
        }
    }
    let mut pmf = vec![0.0; n_max + 1];
    for n in 1..=n_max {
        pmf[n] = (0..=k).map(|j| binom(k, j) * pw[j][n - 1]).sum();
    }
    pmf
}

/// Exact P(|K| >= n) for n in `ns` (must be ascending).
pub fn tree_cluster_tail_exact(k: usize, p: f64, ns: &[u64]) -> Result<TailCurve> {
    check_k(k)?;
    if !(0.0..=1.0).contains(&p) {
        return invalid(format!("p must lie in [0,1], got {p}"));
    }
    let n_max = ns.iter().copied().max().unwrap_or(1) as usize;
    let pmf = tree_cluster_size_pmf(k, p, n_max);
    let mut cum = 0.0;
    let mut cdf_below = vec![0.0; n_max + 2];
    for n in 1..=n_max + 1 {
        cdf_below[n] = cum;
        if n <= n_max {
            cum += pmf[n];
        }
    }
    let mut points = vec![];
    for &n in ns {
        let prob = if n <= 1 { 1.0 } else { (1.0 - cdf_below[n as usize]).max(0.0) };
        points.push(TailPoint { n, prob, std_error: 0.0 });
    }
    Ok(TailCurve { points, boundary_touch_fraction: 0.0 })
}

/// Largest eigenvalue of a dense symmetric matrix given row-major.
pub fn dense_top_eigenvalue(n: usize, entries: &[f64]) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let m = DMatrix::from_row_slice(n, n, entries);
    let eig = nalgebra::SymmetricEigen::new(m);
    eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Number of vertices at depth j whose path from a depth-i vertex x leaves
/// the root-to-x path at depth m (m <= min(i,j)), in the tree ball.
fn meet_count(k: usize, i: usize, j: usize, m: usize) -> f64 {
    let km = (k - 1) as f64;
    if m == i {
        if j == i {
            1.0
        } else if i == 0 {
            k as f64 * km.powi(j as i32 - 1)
        } else {
            km.powi((j - i) as i32)
        }
    } else if j == m {
        1.0
    } else if m == 0 {
        km.powi(j as i32)
    } else {
        (km - 1.0) * km.powi((j - m - 1) as i32)
    }
}

/// Symmetrised depth-reduced matrix of a radial kernel on the tree ball of
/// radius `r`. Its top eigenvalue is the Perron value of the full ball matrix
/// because the Perron vector is invariant under the root stabiliser.
pub fn tree_ball_radial_matrix(k: usize, r: usize, kernel: &dyn Fn(usize) -> f64) -> DMatrix<f64> {
    let n = r + 1;
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for meet in 0..=i.min(j) {
                s += meet_count(k, i, j, meet) * kernel(i + j - 2 * meet);
            }
            m[(i, j)] = s * (sphere_size(k, i) / sphere_size(k, j)).sqrt();
        }
    }
    m
}

/// Perron value of a radial kernel restricted to the tree ball.
pub fn tree_ball_radial_norm(k: usize, r: usize, kernel: &dyn Fn(usize) -> f64) -> f64 {
    let m = tree_ball_radial_matrix(k, r, kernel);
    let eig = nalgebra::SymmetricEigen::new(m);
    eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest adjacency eigenvalue of the path on n vertices.
pub fn path_adjacency_norm(n: usize) -> f64 {
    if n <= 1 {
        0.0
    } else {
        2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spot_values() {
        assert_eq!(tree_two_point(3, 0.3, 0), 1.0);
        assert_eq!(tree_two_point(3, 0.0, 2), 0.0);
        assert_eq!(tree_two_point(3, 0.25, 2), 0.0625);
        assert_eq!(line_two_point(0.5, -3), 0.125);
        assert_eq!(line_two_point(1.0, 7), 1.0);
        assert_eq!(tree_susceptibility(3, 0.0), 1.0);
        assert!((tree_susceptibility(3, 0.25) - 2.5).abs() < 1e-15);
        assert!(tree_susceptibility(3, 0.5).is_infinite());
        assert!((tree_susceptibility_series(3, 0.25, 1e-14) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn thresholds() {
        let t = tree_thresholds(3, 2.0).unwrap();
        assert_eq!(t.p_c, 0.5);
        assert!((t.p_qq - 0.5f64.sqrt()).abs() < 1e-15);
        assert!((t.rho - 0.942809041582).abs() < 1e-11);
        assert_eq!(tree_thresholds(3, f64::INFINITY).unwrap().p_qq, 0.5);
        assert!((tree_thresholds(4, 2.0).unwrap().p_c - 1.0 / 3.0).abs() < 1e-15);
        assert!(tree_thresholds(3, 1.5).is_err());
        assert!(tree_thresholds(2, 2.0).is_err());
    }

    #[test]
    fn polygons() {
        assert_eq!(tree_polygon(3, 0.4, 1, 40).unwrap().value, 1.0);
        assert!((tree_polygon2_closed(3, 0.5) - 2.5).abs() < 1e-15);
        let v = tree_polygon(3, 0.5, 2, 150).unwrap();
        assert!((v.value - 2.5).abs() < 1e-12, "{v:?}");
        assert!((tree_polygon(3, 0.0, 3, 10).unwrap().value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn walk_small_cases() {
        assert_eq!(tree_walk_two_point(3, 0.4, 0), 1.0);
        assert!((tree_walk_two_point(3, 0.4, 1) - 0.4).abs() < 1e-15);
        let p: f64 = 0.6;
        assert!((tree_walk_two_point(3, p, 2) - (1.0 / 3.0 + 2.0 / 3.0 * p * p)).abs() < 1e-15);
    }

    #[test]
    fn branching() {
        assert!((tree_branching_sum(3, 0.4, 10) - 0.8f64.powi(10)).abs() < 1e-15);
        assert!((tree_branching_sum(4, 0.2, 1) - 0.6).abs() < 1e-15);
        for k in 3..6 {
            assert!((tree_branching_sum(k, 1.0 / (k - 1) as f64, 50) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn binomial_pmf_matches_direct() {
        let (n, p) = (30u64, 0.37f64);
        let mut total = 0.0;
        for x in 0..=n {
            let mut c = 1.0f64;
            for i in 0..x {
                c = c * (n - i) as f64 / (i + 1) as f64;
            }
            let direct = c * p.powi(x as i32) * (1.0 - p).powi((n - x) as i32);
            let ours = ln_binomial_pmf(x, n, p).exp();
            assert!((ours - direct).abs() <= 1e-13 * direct.max(1e-300), "{x}");
            total += ours;
        }
        assert!((total - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cluster_pmf_twins_agree() {
        for &(k, p) in &[(3, 0.5), (3, 0.3), (4, 0.2), (5, 0.25)] {
            let a = tree_cluster_size_pmf(k, p, 120);
            let b = tree_cluster_size_pmf_convolution(k, p, 120);
            for n in 1..=120 {
                assert!((a[n] - b[n]).abs() <= 1e-10 * b[n], "k={k} p={p} n={n}: {} {}", a[n], b[n]);
            }
        }
        let t = tree_cluster_tail_exact(3, 0.0, &[1, 2]).unwrap();
        assert_eq!(t.points[0].prob, 1.0);
        assert!(t.points[1].prob.abs() < 1e-15);
    }

    #[test]
    fn radial_reduction_of_small_ball_matches_dense_eigensolve() {
        // explicit ball of radius 3 in the 3-regular tree, built by hand
        let (k, r) = (3usize, 3usize);
        let mut parent = vec![usize::MAX];
        let mut depth = vec![0usize];
        let mut frontier = vec![0usize];
        for d in 1..=r {
            let mut next = vec![];
            for &v in &frontier {
                let kids = if v == 0 { k } else { k - 1 };
                for _ in 0..kids {
                    parent.push(v);
                    depth.push(d);
                    next.push(parent.len() - 1);
                }
            }
            frontier = next;
        }
        let n = parent.len();
        let dist = |mut a: usize, mut b: usize| {
            let mut s = 0;
            while a != b {
                if depth[a] >= depth[b] {
                    a = parent[a];
                } else {
                    b = parent[b];
                }
                s += 1;
            }
            s
        };
        let p: f64 = 0.45;
        let mut m = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                m[a * n + b] = p.powi(dist(a, b));
            }
        }
        let dense = dense_top_eigenvalue(n, &m);
        let radial = tree_ball_radial_norm(k, r, &|d| p.powi(d as i32));
        assert!((dense - radial).abs() < 1e-10 * dense, "{dense} {radial}");
    }

    #[test]
    fn l2_norm_closed_form() {
        for &(k, p) in &[(3, 0.3), (3, 0.6), (4, 0.4), (5, 0.2)] {
            let a = tree_l2_norm(k, p);
            let b = tree_l2_norm_series(k, p, 1e-15);
            assert!((a - b).abs() < 1e-10 * a, "{k} {p}: {a} {b}");
        }
        assert!(tree_l2_norm(3, 0.71).is_infinite());
        assert!((path_adjacency_norm(2) - 1.0).abs() < 1e-15);
    }
}
