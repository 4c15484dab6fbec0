use hyperperc::graphs::{Family, GraphWindow, TreeBall, WindowFile};
use hyperperc::gromov::{self, PointCloud};
use hyperperc::hypgeom::{HalfSpace, Point};
use hyperperc::operators::{self, CriterionConfig, IotaMode, TwoPointMatrix};
use hyperperc::percolation::{self, Percolable};
use serde::Serialize;

use crate::config::{build_family, explicit_window, Estimator, Loaded, MatrixSource, Pipeline, Quantity};
use crate::CliError;

fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, CliError> {
    // the header is written by hand so that empty tables still name their columns
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(vec![]);
    w.write_record(header).map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn json_bytes<T: Serialize>(v: &T) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(v).expect("results serialise");
    out.push(b'\n');
    out
}

pub fn generate(l: &Loaded) -> Result<Vec<u8>, CliError> {
    let w = explicit_window(&l.config, &l.base)?;
    Ok(json_bytes(&WindowFile::from(&w)))
}

#[derive(Serialize)]
struct PercolateRow {
    experiment: String,
    config_hash: String,
    estimator: &'static str,
    params: String,
    p: Option<f64>,
    value: f64,
    std_error: f64,
    boundary_touch_fraction: f64,
    n_samples: u64,
    seed: u64,
    #[serde(rename = "window_R")]
    window_r: usize,
}

const PERCOLATE_HEADER: &[&str] = &[
    "experiment",
    "config_hash",
    "estimator",
    "params",
    "p",
    "value",
    "std_error",
    "boundary_touch_fraction",
    "n_samples",
    "seed",
    "window_R",
];

struct RowSink<'a> {
    l: &'a Loaded,
    seed: u64,
    rows: Vec<PercolateRow>,
}

impl RowSink<'_> {
    fn push(&mut self, estimator: &'static str, params: String, p: Option<f64>, e: hyperperc::Estimate, n_samples: u64, window_r: usize) {
        self.rows.push(PercolateRow {
            experiment: self.l.experiment.clone(),
            config_hash: self.l.hash.clone(),
            estimator,
            params,
            p,
            value: e.value,
            std_error: e.std_error,
            boundary_touch_fraction: e.boundary_touch_fraction,
            n_samples,
            seed: self.seed,
            window_r,
        });
    }
}

fn run_estimator<G: Percolable>(g: &G, est: &Estimator, p: f64, n: u64, sink: &mut RowSink) -> Result<(), CliError> {
    let seed = sink.seed;
    let r = g.radius();
    match est {
        Estimator::TwoPoint { distances, pairs } => {
            let mut labelled: Vec<(String, (u64, u64))> = vec![];
            let defaults: Vec<usize> = if distances.is_empty() && pairs.is_empty() { (1..=r).collect() } else { distances.clone() };
            for &d in &defaults {
                labelled.push((format!("distance={d}"), (g.root(), g.at_distance(d)?)));
            }
            for &(u, v) in pairs {
                labelled.push((format!("pair={u}-{v}"), (u, v)));
            }
            let list: Vec<(u64, u64)> = labelled.iter().map(|x| x.1).collect();
            let ests = percolation::two_point_estimate(g, p, &list, n, seed)?;
            for ((label, _), e) in labelled.into_iter().zip(ests) {
                sink.push("two_point", label, Some(p), e, n, r);
            }
        }
        Estimator::Susceptibility { vertex } => {
            let v = vertex.unwrap_or(g.root());
            let e = percolation::susceptibility_estimate(g, p, v, n, seed)?;
            sink.push("susceptibility", format!("vertex={v}"), Some(p), e, n, r);
        }
        Estimator::Kappa { n: dist } => {
            let e = percolation::kappa_estimate(g, p, *dist, n, seed)?;
            sink.push("kappa", format!("n={dist}"), Some(p), e, n, r);
        }
        Estimator::ClusterTail { ns } => {
            let curve = percolation::cluster_tail(g, p, g.root(), ns, n, seed)?;
            for pt in curve.points {
                let e = hyperperc::Estimate { value: pt.prob, std_error: pt.std_error, n_samples: n, boundary_touch_fraction: curve.boundary_touch_fraction };
                sink.push("cluster_tail", format!("n={}", pt.n), Some(p), e, n, r);
            }
        }
        Estimator::WalkTwoPoint { steps } => {
            let e = percolation::walk_two_point_estimate(g, p, *steps, n, seed)?;
            sink.push("walk_two_point", format!("steps={steps}"), Some(p), e, n, r);
        }
        Estimator::SusceptibilityDerivative { h, scheme } => {
            let c = percolation::susceptibility_derivative_check(g, p, *h, (*scheme).into(), n, seed)?;
            let label = format!("h={h};scheme={scheme:?};noisy={}", c.noisy).to_lowercase();
            sink.push("susceptibility_derivative", label.clone(), Some(p), c.derivative, n, r);
            let ratio = hyperperc::Estimate { value: c.ratio, std_error: c.ratio_se, n_samples: n, boundary_touch_fraction: c.chi.boundary_touch_fraction };
            sink.push("derivative_ratio", label, Some(p), ratio, n, r);
        }
        Estimator::Pc { .. } => unreachable!("handled per family"),
    }
    Ok(())
}

fn run_pc<G: Percolable>(windows: &[G], proxy: crate::config::Proxy, n: u64, sink: &mut RowSink) -> Result<(), CliError> {
    let e = percolation::pc_estimate(windows, proxy.into(), n, sink.seed)?;
    let name = format!("{proxy:?}").to_lowercase();
    for c in &e.per_radius {
        let est = hyperperc::Estimate { value: c.p_half, std_error: c.std_error, n_samples: n, boundary_touch_fraction: 0.0 };
        sink.push("pc_crossing", format!("proxy={name};slope={}", c.slope), None, est, n, c.radius);
    }
    let r_max = windows.iter().map(|w| w.radius()).max().unwrap_or(0);
    let est = hyperperc::Estimate { value: e.p_hat, std_error: (e.ci_high - e.ci_low) / (2.0 * 1.96), n_samples: n, boundary_touch_fraction: 0.0 };
    sink.push("pc", format!("proxy={name};ci_low={};ci_high={}", e.ci_low, e.ci_high), None, est, n, r_max);
    Ok(())
}

enum Target {
    Tree(TreeBall),
    Window(GraphWindow),
}

pub fn percolate(l: &Loaded) -> Result<Vec<u8>, CliError> {
    let cfg = &l.config;
    let n = cfg.samples()?;
    let ps = cfg.p_values()?;
    if cfg.estimators.is_empty() {
        return Err(CliError::Schema("estimators: need at least one".into()));
    }
    let target = match (&cfg.graph, &cfg.window_file) {
        (Some(Family::Tree { k }), None) => Target::Tree(TreeBall::new(*k, cfg.window_radius()?)?),
        _ => Target::Window(explicit_window(cfg, &l.base)?),
    };
    let mut sink = RowSink { l, seed: cfg.seed, rows: vec![] };
    for est in &cfg.estimators {
        if let Estimator::Pc { radii, proxy } = est {
            match &target {
                Target::Tree(t) => {
                    let balls: Vec<TreeBall> = radii.iter().map(|&r| TreeBall::new(t.k, r)).collect::<hyperperc::Result<_>>()?;
                    run_pc(&balls, *proxy, n, &mut sink)?;
                }
                Target::Window(w) => {
                    let windows: Vec<GraphWindow> = radii.iter().map(|&r| build_family(&w.family, r)).collect::<hyperperc::Result<_>>()?;
                    run_pc(&windows, *proxy, n, &mut sink)?;
                }
            }
            continue;
        }
        for &p in &ps {
            match &target {
                Target::Tree(t) => run_estimator(t, est, p, n, &mut sink)?,
                Target::Window(w) => run_estimator(w, est, p, n, &mut sink)?,
            }
        }
    }
    csv_bytes(&sink.rows, PERCOLATE_HEADER)
}

#[derive(Serialize)]
struct NormRow {
    experiment: String,
    config_hash: String,
    quantity: &'static str,
    q: Option<f64>,
    p: f64,
    value: f64,
    residual: Option<f64>,
    converged: Option<bool>,
    #[serde(rename = "window_R")]
    window_r: usize,
    source: &'static str,
    n_samples: u64,
    seed: u64,
}

const NORM_HEADER: &[&str] =
    &["experiment", "config_hash", "quantity", "q", "p", "value", "residual", "converged", "window_R", "source", "n_samples", "seed"];

fn matrix(w: &GraphWindow, src: MatrixSource, p: f64, n: u64, seed: u64) -> hyperperc::Result<TwoPointMatrix> {
    match src {
        MatrixSource::Exact => operators::exact_tree_tmatrix(w, p),
        MatrixSource::MonteCarlo => operators::mc_tmatrix(w, p, n, seed),
        MatrixSource::Enumeration => operators::enumeration_tmatrix(w, p),
    }
}

pub fn norms(l: &Loaded) -> Result<Vec<u8>, CliError> {
    let cfg = &l.config;
    let w = explicit_window(cfg, &l.base)?;
    let src = cfg.source.unwrap_or(if matches!(w.family, Family::Tree { .. }) { MatrixSource::Exact } else { MatrixSource::MonteCarlo });
    let n = match src {
        MatrixSource::MonteCarlo => cfg.samples()?,
        _ => 0,
    };
    let quantities = if cfg.quantities.is_empty() { vec![Quantity::Norm1, Quantity::Norm2] } else { cfg.quantities.clone() };
    let src_name = match src {
        MatrixSource::Exact => "exact",
        MatrixSource::MonteCarlo => "monte_carlo",
        MatrixSource::Enumeration => "enumeration",
    };
    let mut rows = vec![];
    for p in cfg.p_values()? {
        let t = matrix(&w, src, p, n, cfg.seed)?;
        let mut push = |quantity: &'static str, q: Option<f64>, value: f64, residual: Option<f64>, converged: Option<bool>| {
            rows.push(NormRow {
                experiment: l.experiment.clone(),
                config_hash: l.hash.clone(),
                quantity,
                q,
                p,
                value,
                residual,
                converged,
                window_r: w.radius,
                source: src_name,
                n_samples: n,
                seed: cfg.seed,
            })
        };
        for quantity in &quantities {
            match quantity {
                Quantity::Norm1 => push("norm_1", Some(1.0), operators::norm_1(&t), None, Some(true)),
                Quantity::Norm2 => {
                    let r = operators::norm_2(&t);
                    push("norm_2", Some(2.0), r.value, Some(r.residual), Some(r.converged));
                }
                Quantity::NormQ { q } => {
                    let r = operators::norm_q(&t, *q)?;
                    push("norm_q", Some(*q), r.value, Some(r.residual), Some(r.converged));
                }
                Quantity::RieszThorin { q } => {
                    let r = operators::riesz_thorin_check(&t, *q)?;
                    push("riesz_thorin_norm_q", Some(*q), r.norm_q, None, Some(r.holds));
                    push("riesz_thorin_bound", Some(*q), r.bound, None, Some(r.holds));
                }
                Quantity::Triangle => push("triangle", None, operators::triangle(&t), None, None),
                Quantity::Iota => {
                    let io = operators::iota(&t)?;
                    let name = if io.mode == IotaMode::Exact { "iota" } else { "iota_upper" };
                    push(name, None, io.value, None, None);
                }
                Quantity::Adjacency => {
                    let a = operators::adjacency_norm(&w);
                    push("adjacency_norm", Some(2.0), a.windowed.value, Some(a.windowed.residual), Some(a.windowed.converged));
                    if let Some(v) = a.infinite {
                        push("adjacency_norm_infinite", Some(2.0), v, None, None);
                    }
                }
                Quantity::GrowthRate { n_max } => {
                    let v = operators::growth_rate(&t, &t.representatives(), *n_max)?;
                    push("growth_rate", None, v, None, None);
                }
                Quantity::Cheeger => {
                    let c = operators::cheeger_sandwich_check(&t)?;
                    push("cheeger_lower", None, c.lower, None, Some(c.holds));
                    push("cheeger_norm_2", Some(2.0), c.norm_2, None, Some(c.holds));
                    push("cheeger_upper", None, c.upper, None, Some(c.holds));
                }
            }
        }
    }
    csv_bytes(&rows, NORM_HEADER)
}

#[derive(Serialize)]
struct CriterionCsvRow {
    experiment: String,
    config_hash: String,
    family: String,
    p: f64,
    chi_bar: f64,
    chi_bar_se: f64,
    iota_upper: f64,
    iota_mode: &'static str,
    norm_2: f64,
    norm_2_converged: bool,
    adjacency_norm: f64,
    pc_hat: f64,
    pc_ci_low: f64,
    pc_ci_high: f64,
    product: f64,
    product_se: f64,
    below_one: bool,
    #[serde(rename = "window_R")]
    window_r: usize,
    n_samples: u64,
    seed: u64,
}

const CRITERION_HEADER: &[&str] = &[
    "experiment",
    "config_hash",
    "family",
    "p",
    "chi_bar",
    "chi_bar_se",
    "iota_upper",
    "iota_mode",
    "norm_2",
    "norm_2_converged",
    "adjacency_norm",
    "pc_hat",
    "pc_ci_low",
    "pc_ci_high",
    "product",
    "product_se",
    "below_one",
    "window_R",
    "n_samples",
    "seed",
];

fn family_label(f: &Family) -> String {
    match f {
        Family::Tree { k } => format!("tree(k={k})"),
        Family::Grid { d } => format!("grid(d={d})"),
        Family::Tiling { p, q } => format!("tiling({{{p},{q}}})"),
        Family::Cycle { n } => format!("cycle(n={n})"),
        Family::Custom => "custom".into(),
    }
}

pub fn criterion(l: &Loaded) -> Result<Vec<u8>, CliError> {
    let cfg = &l.config;
    let family = cfg.family()?;
    let n = match family {
        Family::Tree { .. } => cfg.n_samples.unwrap_or(0),
        _ => cfg.samples()?,
    };
    let table = operators::criterion_evaluate(&CriterionConfig {
        family: family.clone(),
        p_grid: cfg.p_values()?,
        radius: cfg.window_radius()?,
        n_samples: n.max(1),
        seed: cfg.seed,
        pc_hat: cfg.pc_hat,
    })?;
    let rows: Vec<CriterionCsvRow> = table
        .rows
        .iter()
        .map(|r| CriterionCsvRow {
            experiment: l.experiment.clone(),
            config_hash: l.hash.clone(),
            family: family_label(&family),
            p: r.p,
            chi_bar: r.chi_bar,
            chi_bar_se: r.chi_bar_se,
            iota_upper: r.iota_upper,
            iota_mode: if r.iota_mode == IotaMode::Exact { "exact" } else { "heuristic" },
            norm_2: r.norm_2,
            norm_2_converged: r.norm_2_converged,
            adjacency_norm: r.adjacency_norm,
            pc_hat: r.pc_hat,
            pc_ci_low: table.pc_ci.0,
            pc_ci_high: table.pc_ci.1,
            product: r.product,
            product_se: r.product_se,
            below_one: r.below_one,
            window_r: r.window_radius,
            n_samples: n,
            seed: cfg.seed,
        })
        .collect();
    csv_bytes(&rows, CRITERION_HEADER)
}

pub fn sweep(l: &Loaded) -> Result<Vec<u8>, CliError> {
    if l.config.p_grid.is_none() {
        return Err(CliError::Schema("p_grid: sweep needs a p grid".into()));
    }
    match l.config.pipeline.unwrap_or_default() {
        Pipeline::Percolate => percolate(l),
        Pipeline::Norms => norms(l),
        Pipeline::Criterion => criterion(l),
    }
}

#[derive(Serialize)]
struct HalfspaceWitness<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    vertex: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    net_vertex: Option<u32>,
    halfspaces: &'a [HalfSpace],
    leftover: usize,
    dist: f64,
}

#[derive(Serialize)]
struct MagicOutput<'a, S: Serialize, P: Serialize> {
    model: &'static str,
    selected: Vec<S>,
    witnesses: Vec<HalfspaceWitness<'a>>,
    epsilon: f64,
    seed: u64,
    params: P,
}

#[derive(Serialize)]
struct EuclideanOutput {
    model: &'static str,
    delta: f64,
    s: usize,
    #[serde(flatten)]
    result: gromov::EuclideanMagic,
}

#[derive(Serialize)]
struct GraphParams {
    c_count: usize,
    delta: f64,
    n_bound: f64,
    net_size: usize,
    inner: gromov::MagicParams,
}

pub fn magic(l: &Loaded) -> Result<Vec<u8>, CliError> {
    let cfg = &l.config;
    let eps = || cfg.epsilon.ok_or_else(|| CliError::Schema("epsilon: missing".into()));
    match &cfg.cloud {
        Some(PointCloud::Euclidean { points }) => {
            let delta = cfg.delta.ok_or_else(|| CliError::Schema("delta: missing".into()))?;
            let s = cfg.s.ok_or_else(|| CliError::Schema("s: missing".into()))?;
            let result = gromov::magic_euclidean(points, delta, s)?;
            Ok(json_bytes(&EuclideanOutput { model: "euclidean", delta, s, result }))
        }
        Some(PointCloud::Hyperbolic { points, separation }) => {
            let eps = eps()?;
            let pts: Vec<Point> = points.iter().map(|c| Point::new(c.clone())).collect::<hyperperc::Result<_>>()?;
            let m = gromov::magic_hyperbolic(&pts, *separation, eps, cfg.seed)?;
            let witnesses = m
                .witnesses
                .iter()
                .map(|w| HalfspaceWitness { index: Some(w.index), vertex: None, net_vertex: None, halfspaces: &w.halfspaces, leftover: w.leftover, dist: w.distance })
                .collect();
            Ok(json_bytes(&MagicOutput { model: "hyperbolic", selected: m.selected.clone(), witnesses, epsilon: eps, seed: cfg.seed, params: m.params }))
        }
        None => {
            let eps = eps()?;
            let w = explicit_window(cfg, &l.base)?;
            let verts: Vec<u32> = cfg.vertices.clone().unwrap_or_else(|| (0..w.n_vertices() as u32).collect());
            let m = gromov::magic_graph(&w, &verts, eps, cfg.seed)?;
            let witnesses = m
                .witnesses
                .iter()
                .map(|x| HalfspaceWitness {
                    index: None,
                    vertex: Some(x.vertex),
                    net_vertex: Some(x.net_vertex),
                    halfspaces: &x.halfspaces,
                    leftover: x.leftover,
                    dist: x.distance,
                })
                .collect();
            let params = GraphParams { c_count: m.c_count, delta: m.delta, n_bound: m.n_bound, net_size: m.net_size, inner: m.inner };
            Ok(json_bytes(&MagicOutput { model: "graph", selected: m.selected.clone(), witnesses, epsilon: eps, seed: cfg.seed, params }))
        }
    }
}
