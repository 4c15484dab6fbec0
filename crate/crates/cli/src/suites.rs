//! Invariant suites behind `verify`. Each check returns a verdict and a one-line
//! detail; the acceptance test runs the same checks.

use std::time::Instant;

use hyperperc::graphs::{build_cycle, build_grid, build_tiling, build_tree, Family, GraphWindow, TreeBall};
use hyperperc::gromov::{self, GraphMagic, HyperbolicMagic};
use hyperperc::hypgeom::{self, HalfSpace, IdealPoint, Isometry, Point, Target};
use hyperperc::operators::{self, CriterionConfig, TwoPointMatrix};
use hyperperc::oracles;
use hyperperc::percolation::{self, CrossingProxy, Difference, Percolable};
use hyperperc::rng::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::CliError;

pub type Outcome = hyperperc::Result<(bool, String)>;

pub struct Ctx {
    fault: bool,
}

impl Ctx {
    /// Offset added to reference constants when this check is the injected fault.
    fn bump(&self) -> f64 {
        if self.fault {
            1e-3
        } else {
            0.0
        }
    }
}

pub struct Check {
    pub suite: &'static str,
    pub name: &'static str,
    /// Acceptance criterion this check belongs to; 0 for supporting invariants.
    pub criterion: u8,
    run: fn(&Ctx) -> Outcome,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub criterion: u8,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub suite: String,
    pub passed: bool,
    pub n_checks: usize,
    pub n_failed: usize,
    pub checks: Vec<CheckResult>,
}

pub const SUITES: &[&str] = &["oracles", "geometry", "magic", "percolation", "operators"];

macro_rules! checks {
    ($suite:literal: $($name:ident => $crit:literal),* $(,)?) => {
        vec![$(Check { suite: $suite, name: stringify!($name), criterion: $crit, run: $name }),*]
    };
}

pub fn checks(suite: &str) -> Option<Vec<Check>> {
    Some(match suite {
        "oracles" => checks!["oracles":
            susceptibility_closed_vs_series => 1,
            l2_norm_closed_vs_series => 1,
            polygon2_closed_vs_convolution => 1,
            branching_sum_closed_vs_iterated => 1,
            cluster_pmf_dwass_vs_convolution => 1,
            threshold_attainment => 2,
            walk_two_point_below_spectral_bound => 3,
            branching_sum_at_most_one => 4,
            dwass_tail_stabilizes => 5,
            susceptibility_pc_identity => 6,
        ],
        "geometry" => checks!["geometry":
            distance_identity_and_length_element => 12,
            triangle_inequality => 12,
            isometry_invariance => 12,
            perturbed_halfspace_inner => 12,
            perturbed_halfspace_outer => 12,
            ideal_triangle_bound => 12,
        ],
        "magic" => checks!["magic":
            support_brute_force => 0,
            supported_fraction_below_fit => 13,
            vertical_geodesic_cloud => 13,
            singleton_cloud => 13,
            random_separated_cloud => 13,
            tiling_vertex_sets => 13,
            isometry_covariance => 13,
        ],
        "percolation" => checks!["percolation":
            thread_count_invariance => 0,
            walk_two_point_mc_vs_dp => 3,
            cluster_tail_mc_slope => 5,
            susceptibility_derivative_mc => 6,
            pc_tree_k3 => 10,
            pc_tree_k4 => 10,
            mc_vs_oracle_matrix => 11,
        ],
        "operators" => checks!["operators":
            cheeger_sandwich => 7,
            radial_oracle_vs_dense => 8,
            growth_rate_vs_norm => 8,
            diagram_bound => 8,
            duality_and_interpolation => 9,
            windowed_norm_exceeds_threshold => 14,
            criterion_tables_complete => 15,
            tree_product_monotone => 15,
        ],
        _ => return None,
    })
}

pub fn run_check(c: &Check, fault: Option<&str>) -> CheckResult {
    let ctx = Ctx { fault: fault == Some(c.name) };
    let t = Instant::now();
    let (passed, detail) = match (c.run)(&ctx) {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CheckResult { suite: c.suite, name: c.name, criterion: c.criterion, passed, detail, seconds: t.elapsed().as_secs_f64() }
}

/// Runs one suite, or every suite for `all`, optionally a single named check.
/// Unknown names are schema errors.
pub fn run_suite(name: &str, only: Option<&str>, fault: Option<&str>) -> Result<Report, CliError> {
    let names: Vec<&str> = if name == "all" { SUITES.to_vec() } else { vec![name] };
    let mut results = vec![];
    for n in names {
        let list = checks(n).ok_or_else(|| CliError::Schema(format!("suite: unknown suite '{n}' (expected one of {}, all)", SUITES.join(", "))))?;
        results.extend(list.iter().filter(|c| only.is_none_or(|o| o == c.name)).map(|c| run_check(c, fault)));
    }
    if let (Some(o), true) = (only, results.is_empty()) {
        return Err(CliError::Schema(format!("only: no check named '{o}' in suite '{name}'")));
    }
    let n_failed = results.iter().filter(|r| !r.passed).count();
    Ok(Report { suite: name.to_string(), passed: n_failed == 0, n_checks: results.len(), n_failed, checks: results })
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

const DEGREES: [usize; 3] = [3, 4, 5];

/// 20 points strictly inside (0, top).
fn grid20(top: f64) -> impl Iterator<Item = f64> {
    (1..=20).map(move |i| top * i as f64 / 21.0)
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Ok((ok, detail))
}

// ---------------------------------------------------------------- oracles

fn susceptibility_closed_vs_series(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        for p in grid20(1.0 / (k - 1) as f64) {
            let closed = oracles::tree_susceptibility(k, p) * (1.0 + ctx.bump());
            worst = worst.max(rel(closed, oracles::tree_susceptibility_series(k, p, 1e-15)));
        }
    }
    verdict(worst <= 1e-9, format!("max relative gap {worst:.2e}"))
}

fn l2_norm_closed_vs_series(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        for p in grid20(1.0 / ((k - 1) as f64).sqrt()) {
            let closed = oracles::tree_l2_norm(k, p) * (1.0 + ctx.bump());
            worst = worst.max(rel(closed, oracles::tree_l2_norm_series(k, p, 1e-15)));
        }
    }
    verdict(worst <= 1e-9, format!("max relative gap {worst:.2e}"))
}

fn polygon2_closed_vs_convolution(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        for p in grid20(1.0 / (k - 1) as f64) {
            let closed = oracles::tree_polygon2_closed(k, p) * (1.0 + ctx.bump());
            let conv = oracles::tree_polygon(k, p, 2, 150)?;
            worst = worst.max(rel(closed, conv.value));
        }
    }
    verdict(worst <= 1e-9, format!("max relative gap {worst:.2e}"))
}

fn branching_sum_closed_vs_iterated(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        for p in grid20(1.0 / (k - 1) as f64) {
            for n in 0..=50 {
                let closed = oracles::tree_branching_sum(k, p, n) * (1.0 + ctx.bump());
                worst = worst.max(rel(closed, oracles::tree_branching_sum_iterated(k, p, n)));
            }
        }
    }
    verdict(worst <= 1e-9, format!("max relative gap {worst:.2e}"))
}

fn cluster_pmf_dwass_vs_convolution(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        for p in grid20(1.0 / (k - 1) as f64) {
            let a = oracles::tree_cluster_size_pmf(k, p, 300);
            let b = oracles::tree_cluster_size_pmf_convolution(k, p, 300);
            for (x, y) in a.iter().zip(&b).skip(1) {
                if x.max(*y) > 1e-250 {
                    worst = worst.max(rel(x * (1.0 + ctx.bump()), *y));
                }
            }
        }
    }
    verdict(worst <= 1e-9, format!("max relative gap {worst:.2e} over sizes 1..=300"))
}

fn threshold_attainment(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        for q in [2.0, 3.0, f64::INFINITY] {
            let th = oracles::tree_thresholds(k, q)?;
            let expo = if q.is_infinite() { 1.0 } else { (q - 1.0) / q };
            for n in 0..=50 {
                let want = ((k - 1) as f64).powf(-expo * n as f64) + ctx.bump();
                worst = worst.max((oracles::tree_two_point(k, th.p_qq, n) - want).abs());
            }
        }
    }
    verdict(worst <= 1e-12, format!("max absolute gap {worst:.2e}"))
}

fn walk_two_point_below_spectral_bound(ctx: &Ctx) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for k in DEGREES {
        let rho = 2.0 * ((k - 1) as f64).sqrt() / k as f64 - ctx.bump();
        let p22 = 1.0 / ((k - 1) as f64).sqrt();
        for p in grid20(p22).chain([p22]) {
            for n in 0..=100 {
                worst = worst.max(oracles::tree_walk_two_point(k, p, n) - rho.powi(n as i32));
            }
        }
    }
    verdict(worst <= 1e-12, format!("max excess over the spectral bound {worst:.2e}"))
}

fn branching_sum_at_most_one(ctx: &Ctx) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut at_pc = 0.0f64;
    for k in DEGREES {
        let pc = 1.0 / (k - 1) as f64;
        for p in grid20(pc) {
            for n in 0..=50 {
                worst = worst.max(oracles::tree_branching_sum(k, p, n) - 1.0);
            }
        }
        for n in 0..=50 {
            at_pc = at_pc.max((oracles::tree_branching_sum(k, pc, n) - 1.0 - ctx.bump()).abs());
        }
    }
    verdict(worst <= 0.0 && at_pc <= 1e-12, format!("max excess {worst:.2e}; gap to 1 at p_c {at_pc:.2e}"))
}

fn dwass_tail_stabilizes(ctx: &Ctx) -> Outcome {
    let ns = [1_000u64, 10_000, 100_000];
    let curve = oracles::tree_cluster_tail_exact(3, 0.5, &ns)?;
    let scaled: Vec<f64> = curve.points.iter().map(|pt| (pt.n as f64).sqrt() * pt.prob).collect();
    let change = rel(scaled[0] * (1.0 + ctx.bump() * 100.0), scaled[2]);
    verdict(change <= 0.10, format!("n^(1/2) P(|K|>=n) at n=1e3,1e4,1e5: {:.5}, {:.5}, {:.5}; relative change {change:.4}", scaled[0], scaled[1], scaled[2]))
}

fn susceptibility_pc_identity(ctx: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for k in DEGREES {
        let pc = 1.0 / (k - 1) as f64;
        for p in grid20(pc) {
            let lhs = (pc - p) * oracles::tree_susceptibility(k, p);
            let rhs = (1.0 + p) / (k - 1) as f64 + ctx.bump();
            worst = worst.max(rel(lhs, rhs));
        }
    }
    verdict(worst <= 1e-12, format!("max relative gap {worst:.2e}"))
}

// ---------------------------------------------------------------- geometry

fn random_point(rng: &mut ChaCha8Rng, d: usize) -> Point {
    let mut c: Vec<f64> = (0..d - 1).map(|_| rng.gen_range(-2.0..2.0)).collect();
    c.push(rng.gen_range(-1.5f64..1.5).exp());
    Point::new(c).expect("finite point")
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Length of the geodesic arc between two points of H², integrating ds = |dx|/y.
fn arc_length(p: &Point, q: &Point) -> f64 {
    let (x1, y1, x2, y2) = (p.coords[0], p.coords[1], q.coords[0], q.coords[1]);
    if (x1 - x2).abs() < 1e-12 {
        return adaptive_simpson(&|y: f64| 1.0 / y, y1.min(y2), y1.max(y2), 1e-13);
    }
    // centre of the boundary-orthogonal circle through both points
    let c = ((x2 * x2 + y2 * y2) - (x1 * x1 + y1 * y1)) / (2.0 * (x2 - x1));
    let t1 = y1.atan2(x1 - c);
    let t2 = y2.atan2(x2 - c);
    adaptive_simpson(&|t: f64| 1.0 / t.sin(), t1.min(t2), t1.max(t2), 1e-13)
}

fn distance_identity_and_length_element(ctx: &Ctx) -> Outcome {
    let mut rng = stream(12, 0);
    let (mut worst_id, mut worst_int) = (0.0f64, 0.0f64);
    for i in 0..1000 {
        let d = if i % 2 == 0 { 2 } else { 3 };
        let (p, q) = (random_point(&mut rng, d), random_point(&mut rng, d));
        let delta2: f64 = p.coords.iter().zip(&q.coords).map(|(a, b)| (a - b) * (a - b)).sum();
        let arcosh = (1.0 + delta2 / (2.0 * p.height() * q.height())).acosh() + ctx.bump();
        let dist = hypgeom::distance(&p, &q)?;
        worst_id = worst_id.max((dist - arcosh).abs());
        if d == 2 {
            worst_int = worst_int.max((dist - arc_length(&p, &q)).abs());
        }
    }
    verdict(worst_id <= 1e-7 && worst_int <= 1e-7, format!("arcosh gap {worst_id:.2e}; length-element gap {worst_int:.2e} (1000 pairs)"))
}

fn triangle_inequality(_: &Ctx) -> Outcome {
    let mut rng = stream(12, 1);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..10_000 {
        let d = 2 + i % 2;
        let (a, b, c) = (random_point(&mut rng, d), random_point(&mut rng, d), random_point(&mut rng, d));
        let excess = hypgeom::distance(&a, &c)? - hypgeom::distance(&a, &b)? - hypgeom::distance(&b, &c)?;
        worst = worst.max(excess);
    }
    verdict(worst <= 1e-9, format!("max excess {worst:.2e} (10^4 triples)"))
}

fn isometry_invariance(_: &Ctx) -> Outcome {
    let mut rng = stream(12, 2);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let d = 2 + i % 2;
        let g = Isometry::random(d, &mut rng);
        let (a, b) = (random_point(&mut rng, d), random_point(&mut rng, d));
        worst = worst.max((hypgeom::distance(&g.apply(&a), &g.apply(&b))? - hypgeom::distance(&a, &b)?).abs());
    }
    verdict(worst <= 1e-9, format!("max distance change {worst:.2e} (10^4 pairs)"))
}

/// Random a, b and r in (0, d(a,b)), plus candidate points x around them.
struct HalfspaceSetup {
    a: Point,
    b: Point,
    r: f64,
}

fn halfspace_setup(rng: &mut ChaCha8Rng) -> HalfspaceSetup {
    loop {
        let (a, b) = (random_point(rng, 2), random_point(rng, 2));
        let dab = hypgeom::distance(&a, &b).expect("same dimension");
        if dab > 0.2 {
            let r = rng.gen_range(0.05..0.95) * dab;
            return HalfspaceSetup { a, b, r };
        }
    }
}

fn nearby_point(rng: &mut ChaCha8Rng, s: &HalfspaceSetup) -> Point {
    let lo = s.a.coords[0].min(s.b.coords[0]) - 2.0;
    let hi = s.a.coords[0].max(s.b.coords[0]) + 2.0;
    let (hlo, hhi) = (s.a.height().min(s.b.height()).ln() - 1.5, s.a.height().max(s.b.height()).ln() + 1.5);
    Point::new(vec![rng.gen_range(lo..hi), rng.gen_range(hlo..hhi).exp()]).expect("finite point")
}

fn perturbed_halfspace_inner(_: &Ctx) -> Outcome {
    let mut rng = stream(12, 3);
    let (mut tested, mut bad) = (0usize, 0usize);
    let mut worst = f64::NEG_INFINITY;
    while tested < 1000 {
        let s = halfspace_setup(&mut rng);
        let h = hypgeom::halfspace(&s.a, &s.b)?;
        let c = hypgeom::geodesic_point(&s.a, &Target::Point(s.b.clone()), s.r)?;
        let hcb = hypgeom::halfspace(&c, &s.b)?;
        for _ in 0..200 {
            let x = nearby_point(&mut rng, &s);
            let dh = hypgeom::distance_to_halfspace(&x, &h)?;
            // points of H(a,b) itself are covered trivially; test the shell
            if dh > 0.0 && dh <= s.r / 2.0 {
                let excess = hypgeom::distance(&x, &s.a)? - hypgeom::distance(&x, &s.b)? - s.r;
                let out = hypgeom::distance_to_halfspace(&x, &hcb)?;
                worst = worst.max(excess.max(out));
                bad += (excess > 1e-9 || out > 1e-9) as usize;
                tested += 1;
                break;
            }
        }
    }
    verdict(bad == 0, format!("{tested} shell points, {bad} outside; worst excess {worst:.2e}"))
}

fn perturbed_halfspace_outer(_: &Ctx) -> Outcome {
    let mut rng = stream(12, 4);
    let (mut tested, mut bad, mut middle) = (0usize, 0usize, 0usize);
    let mut worst = f64::NEG_INFINITY;
    while tested < 1000 {
        let s = halfspace_setup(&mut rng);
        let dab = hypgeom::distance(&s.a, &s.b)?;
        let beyond = hypgeom::geodesic_point(&s.b, &Target::Point(s.a.clone()), dab + s.r)?;
        let hdb = hypgeom::halfspace(&beyond, &s.b)?;
        let hba = hypgeom::halfspace(&s.b, &s.a)?;
        for _ in 0..200 {
            let x = nearby_point(&mut rng, &s);
            if hdb.contains(&x) {
                // the intermediate set {d(x,a) <= d(x,b) - r} does not contain
                // H(d,b) near the ideal ends of its boundary; only count it
                let excess = hypgeom::distance(&x, &s.a)? - hypgeom::distance(&x, &s.b)? + s.r;
                middle += (excess > 1e-9) as usize;
                let short = s.r / 2.0 - hypgeom::distance_to_halfspace(&x, &hba)?;
                worst = worst.max(short);
                bad += (short > 1e-9) as usize;
                tested += 1;
                break;
            }
        }
    }
    verdict(bad == 0, format!("{tested} points of H(d,b), {bad} closer than r/2 to H(b,a) (worst shortfall {worst:.2e}); intermediate set exceeded at {middle}"))
}

/// A point of the ideal triangle with vertices -1, 1 and ∞.
fn ideal_triangle_point(rng: &mut ChaCha8Rng) -> Point {
    let u: f64 = rng.gen_range(-1.0..1.0);
    let floor = (1.0 - u * u).sqrt();
    let h = floor + rng.gen_range(-3.0f64..1.5).exp();
    Point::new(vec![u, h]).expect("finite point")
}

fn ideal_triangle_bound(ctx: &Ctx) -> Outcome {
    let bound = (1.0 + 2f64.sqrt()).ln() - ctx.bump();
    let vertices = [IdealPoint::Finite(vec![-1.0]), IdealPoint::Finite(vec![1.0]), IdealPoint::Infinity];
    let mut rng = stream(12, 5);
    let mut sup = 0.0f64;
    for _ in 0..20_000 {
        let (x, y) = (ideal_triangle_point(&mut rng), ideal_triangle_point(&mut rng));
        let m = vertices.iter().map(|v| hypgeom::distance_to_ray(&x, v, &y)).fold(f64::INFINITY, f64::min);
        sup = sup.max(m);
    }
    verdict(sup <= bound + 1e-9 && sup > 0.8, format!("empirical supremum {sup:.6} (bound {bound:.6}, 2*10^4 pairs)"))
}

// ---------------------------------------------------------------- magic

/// Smallest count over a fine grid of centres, for the brute-force oracle.
fn brute_support_count(a: &[Vec<f64>], x: usize, delta: f64) -> usize {
    let rho = gromov::isolation_radius(a, x).expect("at least two points");
    let outer = rho / delta;
    let inner = delta * rho;
    let region: Vec<&Vec<f64>> = a.iter().filter(|p| dist2(p, &a[x]) <= outer * outer).collect();
    let pitch = inner / 10.0;
    let steps = (outer / pitch).ceil() as i64 + 1;
    let mut best = region.len();
    for i in -steps..=steps {
        for j in -steps..=steps {
            let y = [a[x][0] + i as f64 * pitch, a[x][1] + j as f64 * pitch];
            let left = region.iter().filter(|p| dist2(p, &y) > inner * inner).count();
            best = best.min(left);
        }
    }
    best
}

fn dist2(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
}

fn support_brute_force(_: &Ctx) -> Outcome {
    let grid: Vec<Vec<f64>> = (0..11).flat_map(|i| (0..11).map(move |j| vec![i as f64 * 0.1, j as f64 * 0.1])).collect();
    let line: Vec<Vec<f64>> = (0..15).map(|i| vec![i as f64 * 0.07, 0.0]).collect();
    let mut mismatches = 0;
    let mut tested = 0;
    for cloud in [&grid, &line] {
        for x in (0..cloud.len()).step_by(3) {
            let delta = 0.3;
            let brute = brute_support_count(cloud, x, delta);
            for s in [2, 4, 8, 16, 32] {
                let fast = gromov::is_supported(cloud, x, delta, s)?;
                tested += 1;
                mismatches += (fast.supported != (brute >= s)) as usize;
            }
        }
    }
    verdict(mismatches == 0, format!("{tested} verdicts, {mismatches} disagree with the grid oracle"))
}

fn supported_fraction_below_fit(_: &Ctx) -> Outcome {
    let s_values = [4usize, 8, 16];
    let c_hat = gromov::fit_magic_constant(2, 0.3, 200, 20, Some(&s_values), 130)?;
    let mut worst = 0.0f64;
    let mut monotone = true;
    // fresh clouds, not the ones the constant was fitted on
    for i in 0..20 {
        let cloud = gromov::random_cloud(2, 200, 131, i);
        let f = gromov::supported_fractions(&cloud, 0.3, &s_values)?;
        monotone &= f.windows(2).all(|w| w[1] <= w[0]);
        for (s, fr) in s_values.iter().zip(&f) {
            worst = worst.max(fr * *s as f64 / c_hat);
        }
    }
    verdict(worst <= 1.0 && monotone, format!("C_hat = {c_hat:.3}; max s*fraction/C_hat on held-out clouds {worst:.3}"))
}

/// Independent re-check of a hyperbolic decomposition against its contract.
fn recheck_hyperbolic(a: &[Point], m: &HyperbolicMagic, eps: f64) -> hyperperc::Result<(bool, String)> {
    let mut bad = vec![];
    for w in &m.witnesses {
        let x = &a[w.index];
        let dist = w.halfspaces.iter().map(|h| hypgeom::distance_to_halfspace(x, h)).collect::<hyperperc::Result<Vec<_>>>()?;
        let dmin = dist.into_iter().fold(f64::INFINITY, f64::min);
        let left = a.iter().filter(|p| !w.halfspaces.iter().any(|h| h.contains(p))).count();
        if dmin < 1.0 / eps - 1e-9 || left as f64 > m.params.n_bound || left != w.leftover {
            bad.push(w.index);
        }
    }
    let enough = m.selected.len() as f64 >= (1.0 - eps) * a.len() as f64;
    let two = m.witnesses.iter().filter(|w| w.halfspaces.len() == 2).count();
    Ok((
        bad.is_empty() && enough && m.selected.len() == m.witnesses.len(),
        format!("{}/{} selected ({two} two-half-space witnesses), {} failed re-verification, N = {:.1}", m.selected.len(), a.len(), bad.len(), m.params.n_bound),
    ))
}

fn vertical_cloud() -> Vec<Point> {
    (0..=20).map(|i| Point::new(vec![0.0, (-4.0 * i as f64).exp()]).expect("finite point")).collect()
}

fn vertical_geodesic_cloud(_: &Ctx) -> Outcome {
    let a = vertical_cloud();
    let m = gromov::magic_hyperbolic(&a, 1.0, 0.25, 1)?;
    recheck_hyperbolic(&a, &m, 0.25)
}

fn singleton_cloud(_: &Ctx) -> Outcome {
    let a = vec![Point::new(vec![0.3, 1.7])?];
    let m = gromov::magic_hyperbolic(&a, 1.0, 0.25, 1)?;
    recheck_hyperbolic(&a, &m, 0.25)
}

fn separated_cloud(n: usize, sep: f64, seed: u64) -> Vec<Point> {
    let mut rng = stream(seed, 0);
    let centre = Point::on_axis(2, 1.0);
    let mut pts: Vec<Point> = vec![];
    while pts.len() < n {
        let p = Point::new(vec![rng.gen_range(-20.0..20.0), rng.gen_range(0.05f64..20.0)]).expect("finite point");
        if hypgeom::distance(&p, &centre).unwrap_or(f64::INFINITY) < 5.0 && pts.iter().all(|q| hypgeom::distance(&p, q).unwrap_or(0.0) >= sep) {
            pts.push(p);
        }
    }
    pts
}

fn random_separated_cloud(_: &Ctx) -> Outcome {
    let a = separated_cloud(150, 0.5, 5);
    let m = gromov::magic_hyperbolic(&a, 0.5, 0.25, 1)?;
    recheck_hyperbolic(&a, &m, 0.25)
}

fn recheck_graph(w: &GraphWindow, a: &[u32], m: &GraphMagic) -> hyperperc::Result<(bool, String)> {
    let phi = w.coords().expect("embedded window");
    let images: Vec<&Point> = {
        let mut v = a.to_vec();
        v.sort_unstable();
        v.dedup();
        v.into_iter().map(|i| &phi[i as usize]).collect()
    };
    let mut bad = 0;
    for wit in &m.witnesses {
        let x = &phi[wit.vertex as usize];
        let dmin = wit.halfspaces.iter().map(|h| hypgeom::distance_to_halfspace(x, h)).collect::<hyperperc::Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
        let left = images.iter().filter(|p| !wit.halfspaces.iter().any(|h| h.contains(p))).count();
        bad += (dmin < 1.0 / m.epsilon - 1e-9 || left as f64 > m.n_bound || left != wit.leftover) as usize;
    }
    let enough = m.selected.len() as f64 >= (1.0 - m.epsilon) * images.len() as f64;
    Ok((bad == 0 && enough, format!("{}/{} selected, {bad} failed re-verification", m.selected.len(), images.len())))
}

fn tiling_vertex_sets(_: &Ctx) -> Outcome {
    let w = build_tiling(3, 7, 4)?;
    let all: Vec<u32> = (0..w.n_vertices() as u32).collect();
    let layer: Vec<u32> = all.iter().copied().filter(|&v| w.depth(v) == 3).collect();
    let mut rng = stream(13, 0);
    let half: Vec<u32> = all.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
    let mut ok = true;
    let mut details = vec![];
    for (label, set, eps) in [("window", &all, 0.3), ("sphere 3", &layer, 0.3), ("random half", &half, 0.4)] {
        let m = gromov::magic_graph(&w, set, eps, 2)?;
        let (pass, d) = recheck_graph(&w, set, &m)?;
        ok &= pass;
        details.push(format!("{label}: {d}"));
    }
    verdict(ok, details.join("; "))
}

fn isometry_covariance(_: &Ctx) -> Outcome {
    let a = separated_cloud(60, 0.5, 6);
    let eps = 0.25;
    let m = gromov::magic_hyperbolic(&a, 0.5, eps, 1)?;
    let mut rng = stream(13, 1);
    let mut worst = 0.0f64;
    let mut count_mismatch = 0;
    for _ in 0..5 {
        let g = Isometry::random(2, &mut rng);
        let ga: Vec<Point> = a.iter().map(|p| g.apply(p)).collect();
        for wit in &m.witnesses {
            let gh: Vec<HalfSpace> = wit.halfspaces.iter().map(|h| g.apply_halfspace(h)).collect();
            let x = &ga[wit.index];
            let d = gh.iter().map(|h| hypgeom::distance_to_halfspace(x, h)).collect::<hyperperc::Result<Vec<_>>>()?.into_iter().fold(f64::INFINITY, f64::min);
            worst = worst.max((d - wit.distance).abs());
            let left = ga.iter().filter(|p| !gh.iter().any(|h| h.contains(p))).count();
            count_mismatch += (left != wit.leftover) as usize;
        }
    }
    verdict(worst <= 1e-7 && count_mismatch == 0, format!("max distance drift {worst:.2e}, {count_mismatch} leftover mismatches over 5 isometries"))
}

// ---------------------------------------------------------------- percolation

fn thread_count_invariance(_: &Ctx) -> Outcome {
    let t = TreeBall::new(3, 30)?;
    let run = |threads: usize| -> hyperperc::Result<(f64, f64)> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| hyperperc::Error::Resource(e.to_string()))?;
        pool.install(|| {
            let e = percolation::susceptibility_estimate(&t, 0.4, t.root(), 20_000, 9)?;
            let w = percolation::walk_two_point_estimate(&t, 0.4, 6, 20_000, 9)?;
            Ok((e.value, w.value))
        })
    };
    let (a, b, c) = (run(1)?, run(2)?, run(3)?);
    verdict(a == b && b == c, format!("1/2/3 threads: chi {} {} {}, walk {} {} {}", a.0, b.0, c.0, a.1, b.1, c.1))
}

fn walk_two_point_mc_vs_dp(ctx: &Ctx) -> Outcome {
    let t = TreeBall::new(3, 10)?;
    let e = percolation::walk_two_point_estimate(&t, 0.6, 10, 100_000, 31)?;
    let exact = oracles::tree_walk_two_point(3, 0.6, 10) + ctx.bump() * 10.0;
    let z = e.z_score(exact);
    verdict(z <= 3.5, format!("MC {:.5} ± {:.5} vs DP {exact:.5} (z = {z:.2})", e.value, e.std_error))
}

fn cluster_tail_mc_slope(_: &Ctx) -> Outcome {
    let t = TreeBall::new(3, 2000)?;
    let ns = hyperperc::types::log_grid(100, 10_000, 4);
    let curve = percolation::cluster_tail(&t, 0.5, t.root(), &ns, 1_000_000, 41)?;
    let slope = curve.loglog_slope(100, 10_000).ok_or_else(|| hyperperc::Error::Contract("tail too sparse for a slope".into()))?;
    verdict((slope + 0.5).abs() <= 0.1, format!("log-log slope {slope:.4} over [1e2, 1e4] (boundary touch {:.1e})", curve.boundary_touch_fraction))
}

fn susceptibility_derivative_mc(_: &Ctx) -> Outcome {
    let (k, p) = (3, 0.4);
    let t = TreeBall::new(k, 200)?;
    let c = percolation::susceptibility_derivative_check(&t, p, 0.02, Difference::Central, 1_000_000, 51)?;
    let target = k as f64 / ((1.0 + p) * (1.0 + p));
    let gap = rel(c.ratio, target);
    verdict(gap <= 0.15, format!("ratio {:.4} ± {:.4} vs k/(1+p)^2 = {target:.4} ({:.1}% off, central difference)", c.ratio, c.ratio_se, 100.0 * gap))
}

fn pc_tree(k: usize, seed: u64) -> Outcome {
    let balls: Vec<TreeBall> = [16, 32, 64].iter().map(|&r| TreeBall::new(k, r)).collect::<hyperperc::Result<_>>()?;
    let e = percolation::pc_estimate(&balls, CrossingProxy::Doubling, 100_000, seed)?;
    let truth = 1.0 / (k - 1) as f64;
    verdict((e.p_hat - truth).abs() <= 0.02, format!("p_hat {:.4} (95% band [{:.4}, {:.4}]) vs {truth:.4}", e.p_hat, e.ci_low, e.ci_high))
}

fn pc_tree_k3(_: &Ctx) -> Outcome {
    pc_tree(3, 61)
}

fn pc_tree_k4(_: &Ctx) -> Outcome {
    pc_tree(4, 62)
}

fn mc_vs_oracle_matrix(ctx: &Ctx) -> Outcome {
    let cases = [(3usize, 0.15f64), (3, 0.3), (4, 0.1), (4, 0.2), (5, 0.15)];
    let n = 100_000;
    let mut worst_z = 0.0f64;
    let mut worst_touch = 0.0f64;
    let mut failures = vec![];
    for (i, &(k, p)) in cases.iter().enumerate() {
        let t = TreeBall::new(k, 40)?;
        let seed = 70 + i as u64;
        let far = t.at_distance(2)?;
        let tau = percolation::two_point_estimate(&t, p, &[(t.root(), far)], n, seed)?[0];
        let chi = percolation::susceptibility_estimate(&t, p, t.root(), n, seed)?;
        let kappa = percolation::kappa_estimate(&t, p, 3, n, seed)?;
        let walk = percolation::walk_two_point_estimate(&t, p, 4, n, seed)?;
        let exact = [p * p, oracles::tree_susceptibility(k, p), p.powi(3), oracles::tree_walk_two_point(k, p, 4)];
        for (name, e, x) in [("tau", tau, exact[0]), ("chi", chi, exact[1]), ("kappa", kappa, exact[2]), ("walk", walk, exact[3])] {
            let z = e.z_score(x + ctx.bump());
            worst_z = worst_z.max(z);
            worst_touch = worst_touch.max(e.boundary_touch_fraction);
            if z > 3.5 || e.boundary_touch_fraction >= 1e-3 {
                failures.push(format!("{name}(k={k},p={p}) z={z:.2}"));
            }
        }
    }
    verdict(failures.is_empty(), format!("20 cases, worst z {worst_z:.2}, worst boundary touch {worst_touch:.1e}{}", if failures.is_empty() { String::new() } else { format!("; failing: {}", failures.join(", ")) }))
}

// ---------------------------------------------------------------- operators

fn cheeger_sandwich(_: &Ctx) -> Outcome {
    let tree = build_tree(3, 2)?;
    let line = build_grid(1, 5)?;
    let square = build_cycle(4)?;
    let mut worst = f64::NEG_INFINITY;
    let mut held = true;
    for p in [0.2, 0.4, 0.6] {
        let mats = [operators::exact_tree_tmatrix(&tree, p)?, operators::enumeration_tmatrix(&line, p)?, operators::enumeration_tmatrix(&square, p)?];
        for t in &mats {
            let r = operators::cheeger_sandwich_check(t)?;
            held &= r.holds;
            worst = worst.max((r.lower - r.norm_2).max(r.norm_2 - r.upper) / r.chi_bar);
        }
    }
    verdict(held, format!("9 windows; worst signed violation / chi_bar {worst:.2e} (negative = slack)"))
}

fn radial_oracle_vs_dense(_: &Ctx) -> Outcome {
    let mut worst = 0.0f64;
    for p in [0.3, 0.5, 0.65] {
        let w = build_tree(3, 7)?;
        let t = operators::exact_tree_tmatrix(&w, p)?;
        let dense = oracles::dense_top_eigenvalue(t.n(), &t.to_dense()?);
        let radial = oracles::tree_ball_radial_norm(3, 7, &|d| p.powi(d as i32));
        worst = worst.max(rel(dense, radial));
    }
    verdict(worst <= 1e-9, format!("radial reduction vs dense eigensolve on R=7: max relative gap {worst:.2e}"))
}

fn tree_r12(p: f64) -> hyperperc::Result<TwoPointMatrix> {
    operators::exact_tree_tmatrix(&build_tree(3, 12)?, p)
}

fn growth_rate_vs_norm(_: &Ctx) -> Outcome {
    let mut ok = true;
    let mut parts = vec![];
    for p in [0.3, 0.5, 0.65] {
        let t = tree_r12(p)?;
        let oracle = oracles::tree_ball_radial_norm(3, 12, &|d| p.powi(d as i32));
        let g = operators::growth_rate(&t, &t.representatives(), 200)?;
        let n2 = operators::norm_2(&t);
        let gap = rel(g, oracle);
        ok &= gap <= 0.05 && rel(n2.value, oracle) <= 1e-9;
        parts.push(format!("p={p}: growth {g:.4} vs {oracle:.4} ({:.2}%)", 100.0 * gap));
    }
    verdict(ok, parts.join("; "))
}

fn diagram_bound(_: &Ctx) -> Outcome {
    let mut violations = 0;
    let mut tested = 0;
    for p in [0.3, 0.5, 0.65] {
        let t = tree_r12(p)?;
        let ln_norm = operators::norm_2(&t).value.ln();
        for v in t.representatives() {
            for n in [1, 2, 3, 5, 10, 20, 50, 100, 200] {
                let ln_poly = operators::polygon_ln(&t, v, n)?;
                tested += 1;
                violations += (ln_poly > n as f64 * ln_norm + 1e-9) as usize;
            }
        }
    }
    verdict(violations == 0, format!("{tested} (v, n) pairs, {violations} with T^n(v,v) > ||T||^n"))
}

fn duality_and_interpolation(_: &Ctx) -> Outcome {
    let tree = build_tree(3, 5)?;
    let tiling = build_tiling(3, 7, 2)?;
    let mats = [("tree", operators::mc_tmatrix(&tree, 0.4, 20_000, 91)?), ("tiling", operators::mc_tmatrix(&tiling, 0.2, 20_000, 92)?)];
    let mut worst_dual = 0.0f64;
    let mut held = true;
    for (_, t) in &mats {
        for q in [1.25, 1.5, 2.0] {
            let a = operators::norm_q(t, q)?;
            let b = operators::norm_q(t, q / (q - 1.0))?;
            worst_dual = worst_dual.max((a.value - b.value).abs() / a.value);
            held &= operators::riesz_thorin_check(t, q)?.holds;
        }
    }
    verdict(worst_dual <= 1e-6 && held, format!("max |norm_q - norm_q'|/norm_q {worst_dual:.2e}; Riesz-Thorin {}", if held { "holds" } else { "violated" }))
}

fn windowed_norm_exceeds_threshold(ctx: &Ctx) -> Outcome {
    let p = 0.70;
    let t = operators::exact_tree_tmatrix(&build_tree(3, 14)?, p)?;
    let n2 = operators::norm_2(&t);
    let oracle = oracles::tree_ball_radial_norm(3, 14, &|d| p.powi(d as i32));
    let threshold = (1.0 - p) / (2.0 * 2f64.sqrt() * (0.5f64.sqrt() - p)) + ctx.bump();
    let ok = n2.value > threshold && rel(n2.value, oracle) <= 1e-9;
    verdict(ok, format!("||T||_2 = {:.4} (radial oracle {oracle:.4}) vs threshold {threshold:.4}; margin {:.4}", n2.value, n2.value - threshold))
}

const TREE_GRID: [f64; 4] = [0.30, 0.35, 0.40, 0.45];
const TREE_RADIUS: usize = 8;

fn tree_table() -> hyperperc::Result<operators::CriterionTable> {
    operators::criterion_evaluate(&CriterionConfig { family: Family::Tree { k: 3 }, p_grid: TREE_GRID.to_vec(), radius: TREE_RADIUS, n_samples: 1, seed: 1, pc_hat: None })
}

fn complete(table: &operators::CriterionTable) -> bool {
    table.rows.iter().all(|r| {
        [r.chi_bar, r.chi_bar_se, r.iota_upper, r.norm_2, r.adjacency_norm, r.pc_hat, r.product, r.product_se].iter().all(|v| v.is_finite()) && r.norm_2_converged
    }) && table.pc_ci.0.is_finite()
        && table.pc_ci.1.is_finite()
}

fn criterion_tables_complete(_: &Ctx) -> Outcome {
    let tree = tree_table()?;
    let tiling = operators::criterion_evaluate(&CriterionConfig {
        family: Family::Tiling { p: 3, q: 7 },
        p_grid: vec![0.10, 0.14, 0.18],
        radius: 4,
        n_samples: 10_000,
        seed: 3,
        pc_hat: None,
    })?;
    let ok = complete(&tree) && complete(&tiling) && tree.rows.len() == TREE_GRID.len() && tiling.rows.len() == 3;
    let col = |t: &operators::CriterionTable| t.rows.iter().map(|r| format!("{:.3}", r.product)).collect::<Vec<_>>().join(", ");
    verdict(ok, format!("tree products [{}]; tiling p_hat {:.4}, products [{}]", col(&tree), tiling.pc_hat, col(&tiling)))
}

fn tree_product_monotone(_: &Ctx) -> Outcome {
    let tree = tree_table()?;
    let col: Vec<f64> = tree.rows.iter().map(|r| r.product).collect();
    let ok = col.windows(2).all(|w| w[1] < w[0]);
    verdict(ok, format!("R={TREE_RADIUS} products at p={TREE_GRID:?}: {}", col.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")))
}
