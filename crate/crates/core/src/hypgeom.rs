//! Poincaré half-space model of H^d: distances, geodesics, half-spaces and
//! isometries. The last coordinate is the height.

use crate::error::{invalid, Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Global tolerance for equality predicates.
pub const TOL: f64 = 1e-9;
const MIN_HEIGHT: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return invalid("a point needs at least one coordinate");
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite coordinate");
        }
        let h = *coords.last().unwrap();
        if h < MIN_HEIGHT {
            return invalid(format!("height must be positive (>= 1e-300), got {h}"));
        }
        Ok(Point { coords })
    }

    /// Point on the vertical axis at the given height.
    pub fn on_axis(d: usize, height: f64) -> Self {
        let mut c = vec![0.0; d];
        c[d - 1] = height;
        Point { coords: c }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn height(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    /// Horizontal part (first d-1 coordinates).
    pub fn base(&self) -> &[f64] {
        &self.coords[..self.coords.len() - 1]
    }
}

/// A point of the boundary R^{d-1} ∪ {∞}.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum IdealPoint {
    Finite(Vec<f64>),
    Infinity,
}

/// Either an interior point or an ideal point.
#[derive(Clone, Debug, PartialEq)]
pub enum Target {
    Point(Point),
    Ideal(IdealPoint),
}

fn sq(v: f64) -> f64 {
    v * v
}

fn base_dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| sq(x - y)).sum()
}

fn same_dim(p: &Point, q: &Point) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension(p.dim(), q.dim()));
    }
    Ok(())
}

/// Hyperbolic distance, via the explicit 2·log formula.
pub fn distance(p: &Point, q: &Point) -> Result<f64> {
    same_dim(p, q)?;
    Ok(dist(p, q))
}

pub(crate) fn dist(p: &Point, q: &Point) -> f64 {
    let h = base_dist2(p.base(), q.base());
    let (y1, y2) = (p.height(), q.height());
    let a = (h + sq(y1 - y2)).sqrt();
    let b = (h + sq(y1 + y2)).sqrt();
    2.0 * ((a + b) / (2.0 * (y1 * y2).sqrt())).ln()
}

/// One primitive isometry of the half-space model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Primitive {
    /// x' -> x' + v
    Translate(Vec<f64>),
    /// x -> c + s (x - c), c on the boundary
    Dilate { center: Vec<f64>, factor: f64 },
    /// Orthogonal map of the first d-1 coordinates, row-major.
    Orthogonal(Vec<f64>),
    /// Inversion in the boundary-orthogonal sphere of the given center and radius.
    Invert { center: Vec<f64>, radius: f64 },
}

/// Composition of primitives, applied first to last.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Isometry {
    pub steps: Vec<Primitive>,
}

fn apply_prim_point(prim: &Primitive, x: &[f64]) -> Vec<f64> {
    let d = x.len();
    match prim {
        Primitive::Translate(v) => {
            let mut y = x.to_vec();
            for i in 0..d - 1 {
                y[i] += v[i];
            }
            y
        }
        Primitive::Dilate { center, factor } => {
            let mut y = x.to_vec();
            for i in 0..d - 1 {
                y[i] = center[i] + factor * (x[i] - center[i]);
            }
            y[d - 1] = factor * x[d - 1];
            y
        }
        Primitive::Orthogonal(m) => {
            let n = d - 1;
            let mut y = vec![0.0; d];
            for i in 0..n {
                y[i] = (0..n).map(|j| m[i * n + j] * x[j]).sum();
            }
            y[d - 1] = x[d - 1];
            y
        }
        Primitive::Invert { center, radius } => {
            let mut r2 = sq(x[d - 1]);
            for i in 0..d - 1 {
                r2 += sq(x[i] - center[i]);
            }
            let s = radius * radius / r2;
            let mut y = vec![0.0; d];
            for i in 0..d - 1 {
                y[i] = center[i] + s * (x[i] - center[i]);
            }
            y[d - 1] = s * x[d - 1];
            y
        }
    }
}

fn apply_prim_ideal(prim: &Primitive, x: &IdealPoint) -> IdealPoint {
    match (prim, x) {
        (_, IdealPoint::Infinity) => match prim {
            Primitive::Invert { center, .. } => IdealPoint::Finite(center.clone()),
            _ => IdealPoint::Infinity,
        },
        (Primitive::Invert { center, radius }, IdealPoint::Finite(b)) => {
            let r2 = base_dist2(b, center);
            if r2 == 0.0 {
                return IdealPoint::Infinity;
            }
            let s = radius * radius / r2;
            IdealPoint::Finite(b.iter().zip(center).map(|(x, c)| c + s * (x - c)).collect())
        }
        (_, IdealPoint::Finite(b)) => {
            let mut v = b.clone();
            v.push(0.0);
            let mut y = apply_prim_point(prim, &v);
            y.pop();
            IdealPoint::Finite(y)
        }
    }
}

/// A hyperplane as a boundary-orthogonal sphere or a vertical plane n·u = t.
enum Boundary {
    Sphere(Vec<f64>, f64),
    Plane(Vec<f64>, f64),
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn map_boundary(prim: &Primitive, b: Boundary) -> Boundary {
    match (prim, b) {
        (Primitive::Translate(v), Boundary::Sphere(c, r)) => Boundary::Sphere(c.iter().zip(v).map(|(x, y)| x + y).collect(), r),
        (Primitive::Translate(v), Boundary::Plane(n, t)) => {
            let t = t + dot(&n, v);
            Boundary::Plane(n, t)
        }
        (Primitive::Dilate { center, factor }, Boundary::Sphere(c, r)) => {
            Boundary::Sphere(c.iter().zip(center).map(|(x, o)| o + factor * (x - o)).collect(), factor * r)
        }
        (Primitive::Dilate { center, factor }, Boundary::Plane(n, t)) => {
            let nc = dot(&n, center);
            Boundary::Plane(n, nc + factor * (t - nc))
        }
        (Primitive::Orthogonal(m), b) => {
            let k = (m.len() as f64).sqrt().round() as usize;
            let rot = |x: &[f64]| -> Vec<f64> { (0..k).map(|i| (0..k).map(|j| m[i * k + j] * x[j]).sum()).collect() };
            match b {
                Boundary::Sphere(c, r) => Boundary::Sphere(rot(&c), r),
                Boundary::Plane(n, t) => Boundary::Plane(rot(&n), t),
            }
        }
        (Primitive::Invert { center: o, radius: rho }, Boundary::Sphere(c, r)) => {
            let q = base_dist2(&c, o) - r * r;
            if q.abs() <= 1e-14 * r * r {
                // the sphere passes through the inversion centre: image is a plane
                let w: Vec<f64> = c.iter().zip(o).map(|(x, y)| x - y).collect();
                let len = dot(&w, &w).sqrt();
                let n: Vec<f64> = w.iter().map(|x| x / len).collect();
                let t = dot(&n, o) + rho * rho / (2.0 * len);
                Boundary::Plane(n, t)
            } else {
                let s = rho * rho / q;
                Boundary::Sphere(c.iter().zip(o).map(|(x, y)| y + s * (x - y)).collect(), s.abs() * r)
            }
        }
        (Primitive::Invert { center: o, radius: rho }, Boundary::Plane(n, t)) => {
            let gap = t - dot(&n, o);
            if gap.abs() <= 1e-14 * (1.0 + t.abs()) {
                Boundary::Plane(n, t)
            } else {
                let s = rho * rho / (2.0 * gap);
                Boundary::Sphere(o.iter().zip(&n).map(|(y, v)| y + s * v).collect(), s.abs())
            }
        }
    }
}

fn inverse_prim(prim: &Primitive) -> Primitive {
    match prim {
        Primitive::Translate(v) => Primitive::Translate(v.iter().map(|x| -x).collect()),
        Primitive::Dilate { center, factor } => Primitive::Dilate { center: center.clone(), factor: 1.0 / factor },
        Primitive::Orthogonal(m) => {
            let n = (m.len() as f64).sqrt().round() as usize;
            let mut t = vec![0.0; m.len()];
            for i in 0..n {
                for j in 0..n {
                    t[j * n + i] = m[i * n + j];
                }
            }
            Primitive::Orthogonal(t)
        }
        inv @ Primitive::Invert { .. } => inv.clone(),
    }
}

impl Isometry {
    pub fn identity() -> Self {
        Isometry::default()
    }

    pub fn then(mut self, prim: Primitive) -> Self {
        self.steps.push(prim);
        self
    }

    /// `self` followed by `other`.
    pub fn compose(mut self, other: &Isometry) -> Self {
        self.steps.extend(other.steps.iter().cloned());
        self
    }

    pub fn inverse(&self) -> Self {
        Isometry { steps: self.steps.iter().rev().map(inverse_prim).collect() }
    }

    pub fn apply(&self, x: &Point) -> Point {
        let mut c = x.coords.clone();
        for s in &self.steps {
            c = apply_prim_point(s, &c);
        }
        Point { coords: c }
    }

    pub fn apply_ideal(&self, x: &IdealPoint) -> IdealPoint {
        let mut c = x.clone();
        for s in &self.steps {
            c = apply_prim_ideal(s, &c);
        }
        c
    }

    pub fn apply_target(&self, x: &Target) -> Target {
        match x {
            Target::Point(p) => Target::Point(self.apply(p)),
            Target::Ideal(i) => Target::Ideal(self.apply_ideal(i)),
        }
    }

    /// Image of a half-space. The bounding sphere or plane is mapped in closed
    /// form (mapping two mirror points loses all precision when an inversion
    /// shrinks a huge sphere); the side is read off the image of an interior
    /// point. The defining pair is carried along.
    pub fn apply_halfspace(&self, h: &HalfSpace) -> HalfSpace {
        let mut b = match &h.shape {
            Shape::Hemisphere { center, radius, .. } => Boundary::Sphere(center.clone(), *radius),
            Shape::Vertical { normal, offset, .. } => Boundary::Plane(normal.clone(), *offset),
        };
        for s in &self.steps {
            b = map_boundary(s, b);
        }
        let inner = self.apply(&h.mirror_pair().0);
        let shape = match b {
            Boundary::Sphere(center, radius) => {
                let r2 = base_dist2(inner.base(), &center) + sq(inner.height());
                Shape::Hemisphere { center, radius, side: if r2 < radius * radius { BallSide::Inside } else { BallSide::Outside } }
            }
            Boundary::Plane(normal, offset) => {
                let s: f64 = normal.iter().zip(inner.base()).map(|(n, v)| n * v).sum::<f64>() - offset;
                Shape::Vertical { normal, offset, side: if s >= 0.0 { PlaneSide::Positive } else { PlaneSide::Negative } }
            }
        };
        HalfSpace { shape, pair: h.pair.as_ref().map(|(a, b)| (self.apply(a), self.apply(b))) }
    }

    /// A random isometry of H^d mixing all primitive kinds.
    pub fn random<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        let n = d - 1;
        let mut iso = Isometry::identity();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        iso = iso.then(Primitive::Translate(v));
        if n >= 1 {
            iso = iso.then(Primitive::Orthogonal(random_orthogonal(n, rng)));
        }
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        iso = iso.then(Primitive::Dilate { center: c, factor: rng.gen_range(0.3f64..3.0) });
        let c: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        iso = iso.then(Primitive::Invert { center: c, radius: rng.gen_range(0.5f64..2.0) });
        iso
    }
}

fn random_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    // Gram-Schmidt on a random matrix; random reflections of each row.
    let mut rows: Vec<Vec<f64>> = vec![];
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for r in &rows {
            let dot: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= dot * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows.concat()
}

/// Endpoint on the boundary of the geodesic ray from `x` through `y`.
pub fn ray_endpoint(x: &Point, y: &Point) -> IdealPoint {
    let l2 = base_dist2(x.base(), y.base());
    if l2 <= sq(1e-15 * (x.height() + y.height())) {
        return if y.height() > x.height() {
            IdealPoint::Infinity
        } else {
            IdealPoint::Finite(x.base().to_vec())
        };
    }
    let l = l2.sqrt();
    let (xh, yh) = (x.height(), y.height());
    let c = (l2 + yh * yh - xh * xh) / (2.0 * l);
    let rho = (c * c + xh * xh).sqrt();
    let s = c + rho;
    IdealPoint::Finite(x.base().iter().zip(y.base()).map(|(a, b)| a + s * (b - a) / l).collect())
}

/// Isometry sending `x` to (0,…,0,1) and the ideal point `xi` to ∞.
pub fn normalize_toward(x: &Point, xi: &IdealPoint) -> Isometry {
    let d = x.dim();
    let mut iso = Isometry::identity();
    let mut cur = x.clone();
    if let IdealPoint::Finite(b) = xi {
        let inv = Primitive::Invert { center: b.clone(), radius: 1.0 };
        cur = Point { coords: apply_prim_point(&inv, &cur.coords) };
        iso = iso.then(inv);
    }
    let shift: Vec<f64> = cur.base().iter().map(|v| -v).collect();
    iso = iso.then(Primitive::Translate(shift));
    iso = iso.then(Primitive::Dilate { center: vec![0.0; d - 1], factor: 1.0 / cur.height() });
    iso
}

/// Isometry sending `x` to (0,…,0,1) and `y` to (0,…,0,e^{d(x,y)}).
pub fn normalize_pair(x: &Point, y: &Point) -> Result<Isometry> {
    same_dim(x, y)?;
    if x == y {
        return invalid("normalize_pair needs distinct points");
    }
    Ok(normalize_toward(x, &ray_endpoint(x, y)))
}

/// Point at hyperbolic distance `t` from `p` along the geodesic toward `target`
/// (continuing past the target if `t` exceeds its distance).
pub fn geodesic_point(p: &Point, target: &Target, t: f64) -> Result<Point> {
    if !(t >= 0.0) || !t.is_finite() {
        return invalid(format!("t must be finite and nonnegative, got {t}"));
    }
    let xi = match target {
        Target::Point(q) => {
            same_dim(p, q)?;
            if q == p {
                return invalid("target equals the starting point");
            }
            ray_endpoint(p, q)
        }
        Target::Ideal(i) => {
            if let IdealPoint::Finite(b) = i {
                if b.len() + 1 != p.dim() {
                    return Err(Error::Dimension(b.len() + 1, p.dim()));
                }
            }
            i.clone()
        }
    };
    if t == 0.0 {
        return Ok(p.clone());
    }
    let g = normalize_toward(p, &xi);
    Ok(g.inverse().apply(&Point::on_axis(p.dim(), t.exp())))
}

pub fn apply_isometry(g: &Isometry, x: &Target) -> Target {
    g.apply_target(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallSide {
    Inside,
    Outside,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlaneSide {
    /// n·x' >= offset
    Positive,
    /// n·x' <= offset
    Negative,
}

/// Geometric representation of a closed half-space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Hemisphere { center: Vec<f64>, radius: f64, side: BallSide },
    Vertical { normal: Vec<f64>, offset: f64, side: PlaneSide },
}

/// Closed half-space. The shape is authoritative; the defining pair, when
/// present, allows cross-validation against d(x,a) <= d(x,b).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HalfSpace {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(Point, Point)>,
}

impl HalfSpace {
    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Hemisphere { center, .. } => center.len() + 1,
            Shape::Vertical { normal, .. } => normal.len() + 1,
        }
    }

    /// Signed level: <= 0 inside (up to scale), used for membership.
    fn level(&self, x: &Point) -> f64 {
        match &self.shape {
            Shape::Hemisphere { center, radius, side } => {
                let r2 = base_dist2(x.base(), center) + sq(x.height());
                let v = (r2 - radius * radius) / (radius * radius);
                match side {
                    BallSide::Inside => v,
                    BallSide::Outside => -v,
                }
            }
            Shape::Vertical { normal, offset, side } => {
                let s: f64 = normal.iter().zip(x.base()).map(|(n, v)| n * v).sum::<f64>() - offset;
                let s = s / x.height().max(1.0).max(offset.abs());
                match side {
                    PlaneSide::Positive => -s,
                    PlaneSide::Negative => s,
                }
            }
        }
    }

    pub fn contains(&self, x: &Point) -> bool {
        self.level(x) <= TOL
    }

    /// Strict membership with the tolerance applied against the point.
    pub fn contains_strictly(&self, x: &Point) -> bool {
        self.level(x) < -TOL
    }

    /// Hyperbolic distance from `x` to the bounding hyperplane.
    pub fn distance_to_boundary(&self, x: &Point) -> f64 {
        match &self.shape {
            Shape::Hemisphere { center, radius, .. } => {
                let r2 = base_dist2(x.base(), center) + sq(x.height());
                ((r2 - radius * radius).abs() / (2.0 * radius * x.height())).asinh()
            }
            Shape::Vertical { normal, offset, .. } => {
                let s: f64 = normal.iter().zip(x.base()).map(|(n, v)| n * v).sum::<f64>() - offset;
                (s.abs() / x.height()).asinh()
            }
        }
    }

    /// The complementary closed half-space (sharing the boundary).
    pub fn complement(&self) -> HalfSpace {
        let shape = match &self.shape {
            Shape::Hemisphere { center, radius, side } => Shape::Hemisphere {
                center: center.clone(),
                radius: *radius,
                side: match side {
                    BallSide::Inside => BallSide::Outside,
                    BallSide::Outside => BallSide::Inside,
                },
            },
            Shape::Vertical { normal, offset, side } => Shape::Vertical {
                normal: normal.clone(),
                offset: *offset,
                side: match side {
                    PlaneSide::Positive => PlaneSide::Negative,
                    PlaneSide::Negative => PlaneSide::Positive,
                },
            },
        };
        HalfSpace { shape, pair: self.pair.as_ref().map(|(a, b)| (b.clone(), a.clone())) }
    }

    /// Mirror image of `x` across the bounding hyperplane.
    pub fn reflect(&self, x: &Point) -> Point {
        match &self.shape {
            Shape::Hemisphere { center, radius, .. } => {
                let r2 = base_dist2(x.base(), center) + sq(x.height());
                let f = radius * radius / r2;
                let mut c: Vec<f64> = x.base().iter().zip(center).map(|(v, c)| c + f * (v - c)).collect();
                c.push(f * x.height());
                Point { coords: c }
            }
            Shape::Vertical { normal, offset, .. } => {
                let s: f64 = normal.iter().zip(x.base()).map(|(n, v)| n * v).sum::<f64>() - offset;
                let mut c: Vec<f64> = x.base().iter().zip(normal).map(|(v, n)| v - 2.0 * s * n).collect();
                c.push(x.height());
                Point { coords: c }
            }
        }
    }

    /// A pair (a, b) of mirror images across the boundary with a inside, so
    /// that the half-space equals H(a, b).
    pub fn mirror_pair(&self) -> (Point, Point) {
        match &self.shape {
            Shape::Hemisphere { center, radius, side } => {
                let (ha, hb) = match side {
                    BallSide::Inside => (0.5 * radius, 2.0 * radius),
                    BallSide::Outside => (2.0 * radius, 0.5 * radius),
                };
                let mk = |h: f64| {
                    let mut c = center.clone();
                    c.push(h);
                    Point { coords: c }
                };
                (mk(ha), mk(hb))
            }
            Shape::Vertical { normal, offset, side } => {
                let s = 1.0 + offset.abs();
                let sign = match side {
                    PlaneSide::Positive => 1.0,
                    PlaneSide::Negative => -1.0,
                };
                let mk = |t: f64| {
                    let mut c: Vec<f64> = normal.iter().map(|v| v * (offset + t)).collect();
                    c.push(s);
                    Point { coords: c }
                };
                (mk(sign * s), mk(-sign * s))
            }
        }
    }
}

/// H(a,b) = {x : d(x,a) <= d(x,b)}.
pub fn halfspace(a: &Point, b: &Point) -> Result<HalfSpace> {
    same_dim(a, b)?;
    if a == b {
        return invalid("halfspace needs distinct points");
    }
    let (ad, bd) = (a.height(), b.height());
    // b_d |x-a|^2 <= a_d |x-b|^2
    let shape = if ((ad - bd) / (ad + bd)).abs() < 1e-14 {
        let diff: Vec<f64> = a.base().iter().zip(b.base()).map(|(x, y)| x - y).collect();
        let len = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        let normal: Vec<f64> = diff.iter().map(|v| v / len).collect();
        let na: f64 = a.base().iter().map(|v| v * v).sum();
        let nb: f64 = b.base().iter().map(|v| v * v).sum();
        Shape::Vertical { normal, offset: (na - nb) / (2.0 * len), side: PlaneSide::Positive }
    } else {
        let den = bd - ad;
        let center: Vec<f64> = a.base().iter().zip(b.base()).map(|(x, y)| (bd * x - ad * y) / den).collect();
        let na: f64 = a.coords.iter().map(|v| v * v).sum();
        let nb: f64 = b.coords.iter().map(|v| v * v).sum();
        let cc: f64 = center.iter().map(|v| v * v).sum();
        let r2 = cc - (bd * na - ad * nb) / den;
        let side = if den > 0.0 { BallSide::Inside } else { BallSide::Outside };
        Shape::Hemisphere { center, radius: r2.max(0.0).sqrt(), side }
    };
    Ok(HalfSpace { shape, pair: Some((a.clone(), b.clone())) })
}

/// 0 inside H, otherwise the distance to its bounding hyperplane.
pub fn distance_to_halfspace(x: &Point, h: &HalfSpace) -> Result<f64> {
    if x.dim() != h.dim() {
        return Err(Error::Dimension(x.dim(), h.dim()));
    }
    if x.coords.iter().any(|c| !c.is_finite()) {
        return invalid("non-finite point");
    }
    if h.contains(x) {
        Ok(0.0)
    } else {
        Ok(h.distance_to_boundary(x))
    }
}

/// Smallest half-space containing the complement of the Euclidean ball
/// B(x, r·x_d): outside of the orthogonal ball centred below x of radius √(r²−1)·x_d.
pub fn ball_exterior_halfspace(x: &Point, r: f64) -> Result<HalfSpace> {
    if !(r > 1.0) || !r.is_finite() {
        return invalid(format!("ball_exterior_halfspace needs finite r > 1, got {r}"));
    }
    Ok(HalfSpace {
        shape: Shape::Hemisphere {
            center: x.base().to_vec(),
            radius: (r * r - 1.0).sqrt() * x.height(),
            side: BallSide::Outside,
        },
        pair: None,
    })
}

/// Smallest orthogonal ball centred below `y` containing B(y, ρ) ∩ H^d.
/// `y` may have height zero.
pub fn ball_covering_halfspace(y: &[f64], rho: f64) -> Result<HalfSpace> {
    if !(rho > 0.0) || !rho.is_finite() {
        return invalid(format!("radius must be positive, got {rho}"));
    }
    let d = y.len();
    if d == 0 || y[d - 1] < 0.0 || y.iter().any(|v| !v.is_finite()) {
        return invalid("ball_covering_halfspace needs a finite centre with nonnegative height");
    }
    Ok(HalfSpace {
        shape: Shape::Hemisphere { center: y[..d - 1].to_vec(), radius: y[d - 1] + rho, side: BallSide::Inside },
        pair: None,
    })
}

/// Half-space H' with d(x,H') = d(x,H) - amount whose boundary is
/// perpendicular to the geodesic from x to H. It contains the closed
/// `amount/2`-neighbourhood of H.
pub fn enlarge_halfspace(x: &Point, h: &HalfSpace, amount: f64) -> Result<HalfSpace> {
    if x.dim() != h.dim() {
        return Err(Error::Dimension(x.dim(), h.dim()));
    }
    let d = distance_to_halfspace(x, h)?;
    if !(amount >= 0.0) || d <= amount {
        return invalid(format!("cannot move a hyperplane at distance {d} closer by {amount}"));
    }
    let mirror = Target::Point(h.reflect(x));
    let t = d - amount;
    let tau = (0.5 * t).min(1.0);
    let a = geodesic_point(x, &mirror, t + tau)?;
    let b = geodesic_point(x, &mirror, t - tau)?;
    halfspace(&a, &b)
}

/// H(y,x) where y continues the ray x→z to twice the distance.
pub fn doubling_halfspace(x: &Point, z: &Point) -> Result<HalfSpace> {
    same_dim(x, z)?;
    if x == z {
        return invalid("doubling_halfspace needs distinct points");
    }
    let y = geodesic_point(x, &Target::Point(z.clone()), 2.0 * dist(x, z))?;
    halfspace(&y, x)
}

/// Distance from `y` to the geodesic ray starting at `x` toward `xi`.
pub fn distance_to_ray(x: &Point, xi: &IdealPoint, y: &Point) -> f64 {
    let g = normalize_toward(x, xi);
    let yy = g.apply(y);
    let u2: f64 = yy.base().iter().map(|v| v * v).sum();
    let h = yy.height();
    if u2 + h * h >= 1.0 {
        (u2.sqrt() / h).asinh()
    } else {
        dist(&yy, &Point::on_axis(y.dim(), 1.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pt(c: &[f64]) -> Point {
        Point::new(c.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let e = std::f64::consts::E;
        assert!((distance(&pt(&[0.0, 1.0]), &pt(&[0.0, e])).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(distance(&pt(&[0.3, 1.0]), &pt(&[0.3, 1.0])).unwrap(), 0.0);
        assert!((distance(&pt(&[0.0, 1.0]), &pt(&[1.0, 1.0])).unwrap() - 1.5f64.acosh()).abs() < 1e-15);
        assert!((1.5f64.acosh() - 0.962424).abs() < 1e-6);
        assert!(distance(&pt(&[0.0, 1.0]), &pt(&[0.0, 0.0, 1.0])).is_err());
        assert!(Point::new(vec![0.0, 1e-301]).is_err());
        assert!(Point::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn geodesic_examples() {
        let e = std::f64::consts::E;
        let p = pt(&[0.0, 1.0]);
        let q = geodesic_point(&p, &Target::Ideal(IdealPoint::Infinity), 2.0).unwrap();
        assert!((q.coords[0]).abs() < 1e-12 && (q.coords[1] - e * e).abs() < 1e-12);
        let q = geodesic_point(&p, &Target::Point(pt(&[0.0, e.powi(5)])), 0.0).unwrap();
        assert_eq!(q, p);
        let q = geodesic_point(&p, &Target::Ideal(IdealPoint::Finite(vec![0.0])), 1.0).unwrap();
        assert!((q.coords[1] - 1.0 / e).abs() < 1e-12 && q.coords[0].abs() < 1e-12);
        assert!(geodesic_point(&p, &Target::Point(p.clone()), 1.0).is_err());
        assert!(geodesic_point(&p, &Target::Ideal(IdealPoint::Infinity), -1.0).is_err());
    }

    #[test]
    fn geodesic_points_lie_at_distance_t() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in [2usize, 3] {
            for _ in 0..200 {
                let a = Point::new((0..d).map(|i| if i + 1 == d { rng.gen_range(0.1..3.0) } else { rng.gen_range(-2.0..2.0) }).collect()).unwrap();
                let b = Point::new((0..d).map(|i| if i + 1 == d { rng.gen_range(0.1..3.0) } else { rng.gen_range(-2.0..2.0) }).collect()).unwrap();
                let t = rng.gen_range(0.0..6.0);
                let q = geodesic_point(&a, &Target::Point(b.clone()), t).unwrap();
                assert!((dist(&a, &q) - t).abs() < 1e-9);
                // collinear: q, a, b on one geodesic
                let dab = dist(&a, &b);
                let dqb = dist(&q, &b);
                assert!((dqb - (dab - t).abs()).abs() < 1e-7, "{dqb} {dab} {t}");
            }
        }
    }

    #[test]
    fn halfspace_examples() {
        let e = std::f64::consts::E;
        let h = halfspace(&pt(&[0.0, e]), &pt(&[0.0, 1.0 / e])).unwrap();
        match &h.shape {
            Shape::Hemisphere { center, radius, side } => {
                assert!(center[0].abs() < 1e-12 && (radius - 1.0).abs() < 1e-12);
                assert_eq!(*side, BallSide::Outside);
            }
            _ => panic!("expected hemisphere"),
        }
        let h = halfspace(&pt(&[1.0, 1.0]), &pt(&[-1.0, 1.0])).unwrap();
        assert_eq!(h.shape, Shape::Vertical { normal: vec![1.0], offset: 0.0, side: PlaneSide::Positive });
        assert!(h.contains(&pt(&[1.0, 1.0])));
        let h = halfspace(&pt(&[0.0, 2.0]), &pt(&[0.0, 0.5])).unwrap();
        assert!(h.contains(&pt(&[0.0, 3.0])));
        assert!(halfspace(&pt(&[0.0, 2.0]), &pt(&[0.0, 2.0])).is_err());
    }

    #[test]
    fn membership_agrees_with_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [2usize, 3, 4] {
            let rp = |rng: &mut ChaCha8Rng| Point::new((0..d).map(|i| if i + 1 == d { rng.gen_range(0.05..4.0) } else { rng.gen_range(-3.0..3.0) }).collect()).unwrap();
            for _ in 0..200 {
                let (a, b) = (rp(&mut rng), rp(&mut rng));
                let h = halfspace(&a, &b).unwrap();
                for _ in 0..50 {
                    let x = rp(&mut rng);
                    let (da, db) = (dist(&x, &a), dist(&x, &b));
                    if (da - db).abs() > 1e-7 {
                        assert_eq!(h.contains(&x), da <= db, "d={d}");
                    }
                }
            }
        }
    }

    #[test]
    fn distance_to_halfspace_examples() {
        let e = std::f64::consts::E;
        let h = halfspace(&pt(&[0.0, 1.0 / e]), &pt(&[0.0, e])).unwrap();
        assert!((distance_to_halfspace(&pt(&[0.0, e]), &h).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(distance_to_halfspace(&pt(&[0.0, 0.5]), &h).unwrap(), 0.0);
        let h1 = ball_exterior_halfspace(&pt(&[0.0, 1.0]), 5f64.sqrt()).unwrap();
        assert!((distance_to_halfspace(&pt(&[0.0, 1.0]), &h1).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ball_halfspaces() {
        let h = ball_exterior_halfspace(&pt(&[0.0, 1.0]), 2f64.sqrt()).unwrap();
        assert!(distance_to_halfspace(&pt(&[0.0, 1.0]), &h).unwrap().abs() < 1e-12);
        let h = ball_exterior_halfspace(&pt(&[3.0, 2.0]), 5f64.sqrt()).unwrap();
        assert_eq!(h.shape, Shape::Hemisphere { center: vec![3.0], radius: 4.0, side: BallSide::Outside });
        assert!(ball_exterior_halfspace(&pt(&[0.0, 1.0]), 1.0).is_err());
        let h = ball_covering_halfspace(&[0.0, 0.0], 1.0).unwrap();
        assert_eq!(h.shape, Shape::Hemisphere { center: vec![0.0], radius: 1.0, side: BallSide::Inside });
        assert!(ball_covering_halfspace(&[0.0, 0.0], 0.0).is_err());
        for delta in [1.0 / 3.0, 0.1, 0.01] {
            let h = ball_covering_halfspace(&[0.0, 0.0], delta).unwrap();
            let dd = distance_to_halfspace(&pt(&[0.0, 1.0]), &h).unwrap();
            assert!(dd >= (1.0 / (3.0 * delta as f64).sqrt()).ln() - 1e-12);
        }
    }

    #[test]
    fn doubling_examples() {
        let e = std::f64::consts::E;
        let h = doubling_halfspace(&pt(&[0.0, e]), &pt(&[0.0, 1.0])).unwrap();
        let (y, _) = h.pair.clone().unwrap();
        assert!((y.height() - 1.0 / e).abs() < 1e-12);
        match h.shape {
            Shape::Hemisphere { radius, .. } => assert!((radius - 1.0).abs() < 1e-12),
            _ => panic!(),
        }
        let h = doubling_halfspace(&pt(&[0.0, 1.0]), &pt(&[0.0, (-2.0f64).exp()])).unwrap();
        let (y, _) = h.pair.clone().unwrap();
        assert!((y.height() - (-4.0f64).exp()).abs() < 1e-12);
        assert!((distance_to_halfspace(&pt(&[0.0, 1.0]), &h).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn isometry_examples() {
        let g = Isometry::identity().then(Primitive::Dilate { center: vec![0.0], factor: 2.0 });
        assert_eq!(g.apply(&pt(&[0.0, 1.0])), pt(&[0.0, 2.0]));
        assert_eq!(Isometry::identity().apply(&pt(&[0.4, 1.3])), pt(&[0.4, 1.3]));
        let inv = Isometry::identity().then(Primitive::Invert { center: vec![1.0], radius: 1.0 });
        assert_eq!(inv.apply_ideal(&IdealPoint::Finite(vec![1.0])), IdealPoint::Infinity);
        assert_eq!(inv.apply_ideal(&IdealPoint::Infinity), IdealPoint::Finite(vec![1.0]));
    }

    #[test]
    fn normalize_pair_sends_to_axis() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in [2usize, 3] {
            for _ in 0..300 {
                let rp = |rng: &mut ChaCha8Rng| Point::new((0..d).map(|i| if i + 1 == d { rng.gen_range(0.05..4.0) } else { rng.gen_range(-3.0..3.0) }).collect()).unwrap();
                let (x, y) = (rp(&mut rng), rp(&mut rng));
                let g = normalize_pair(&x, &y).unwrap();
                let (gx, gy) = (g.apply(&x), g.apply(&y));
                let target = dist(&x, &y).exp();
                assert!(gx.base().iter().all(|v| v.abs() < 1e-9) && (gx.height() - 1.0).abs() < 1e-9);
                assert!(gy.base().iter().all(|v| v.abs() < 1e-9 * target) && (gy.height() - target).abs() < 1e-9 * target);
            }
        }
    }

    #[test]
    fn halfspace_images_follow_isometries() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [2usize, 3] {
            let rp = |rng: &mut ChaCha8Rng| Point::new((0..d).map(|i| if i + 1 == d { rng.gen_range(0.2..3.0) } else { rng.gen_range(-2.0..2.0) }).collect()).unwrap();
            for _ in 0..100 {
                let (a, b) = (rp(&mut rng), rp(&mut rng));
                let h = halfspace(&a, &b).unwrap();
                let g = Isometry::random(d, &mut rng);
                let gh = g.apply_halfspace(&h);
                let direct = halfspace(&g.apply(&a), &g.apply(&b)).unwrap();
                for _ in 0..30 {
                    let x = rp(&mut rng);
                    let gx = g.apply(&x);
                    if direct.distance_to_boundary(&gx) > 1e-6 {
                        assert_eq!(gh.contains(&gx), direct.contains(&gx));
                        assert_eq!(gh.contains(&gx), h.contains(&x));
                    }
                    assert!((gh.distance_to_boundary(&gx) - h.distance_to_boundary(&x)).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn serde_shape() {
        let h = halfspace(&pt(&[1.0, 1.0]), &pt(&[-1.0, 1.0])).unwrap();
        let s = serde_json::to_string(&HalfSpace { pair: None, ..h }).unwrap();
        assert_eq!(s, r#"{"kind":"vertical","normal":[1.0],"offset":0.0,"side":"positive"}"#);
        let p = serde_json::to_string(&pt(&[0.0, 1.0])).unwrap();
        assert_eq!(p, r#"{"coords":[0.0,1.0]}"#);
    }
}
