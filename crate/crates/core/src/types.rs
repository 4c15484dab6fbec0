use serde::{Deserialize, Serialize};

/// Monte Carlo estimate with its truncation diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: u64,
    /// Fraction of samples whose explored cluster met the window boundary.
    pub boundary_touch_fraction: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, std_error: 0.0, n_samples: 0, boundary_touch_fraction: 0.0 }
    }

    /// Distance from `target` in standard errors (0 when both agree exactly).
    pub fn z_score(&self, target: f64) -> f64 {
        let diff = (self.value - target).abs();
        if diff == 0.0 {
            0.0
        } else if self.std_error == 0.0 {
            f64::INFINITY
        } else {
            diff / self.std_error
        }
    }
}

/// Streaming mean/variance accumulator (Welford), mergeable across chunks.
#[derive(Clone, Copy, Debug, Default)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
    pub touched: u64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64) * (o.n as f64) / n as f64,
            touched: self.touched + o.touched,
        }
    }

    pub fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate {
            value: self.mean,
            std_error: (var.max(0.0) / self.n.max(1) as f64).sqrt(),
            n_samples: self.n,
            boundary_touch_fraction: if self.n == 0 { 0.0 } else { self.touched as f64 / self.n as f64 },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub n: u64,
    pub prob: f64,
    pub std_error: f64,
}

/// Survival curve n -> P(|K| >= n).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub points: Vec<TailPoint>,
    pub boundary_touch_fraction: f64,
}

impl TailCurve {
    pub fn prob_at(&self, n: u64) -> Option<f64> {
        self.points.iter().find(|t| t.n == n).map(|t| t.prob)
    }

    /// Least-squares slope of log P against log n over `lo ..= hi`, skipping zeros.
    pub fn loglog_slope(&self, lo: u64, hi: u64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|t| t.n >= lo && t.n <= hi && t.prob > 0.0)
            .map(|t| ((t.n as f64).ln(), t.prob.ln()))
            .collect();
        least_squares(&pts).map(|(slope, _)| slope)
    }

    /// Curvature of the log-log curve: difference between the slopes of the upper
    /// and lower halves of the range. Near zero for a power law, strongly
    /// negative for stretched or exponential decay.
    pub fn loglog_curvature(&self, lo: u64, hi: u64) -> Option<f64> {
        let mid = ((lo as f64) * (hi as f64)).sqrt() as u64;
        Some(self.loglog_slope(mid, hi)? - self.loglog_slope(lo, mid)?)
    }
}

/// (slope, intercept) of the least-squares line through `pts`.
pub fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Log-spaced integer grid from `lo` to `hi` inclusive, `per_decade` points per factor 10.
pub fn log_grid(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let mut out = vec![];
    let steps = (((hi as f64) / (lo as f64)).log10() * per_decade as f64).ceil() as usize;
    for i in 0..=steps {
        let v = ((lo as f64) * 10f64.powf(i as f64 / per_decade as f64)).round() as u64;
        let v = v.min(hi);
        if out.last() != Some(&v) {
            out.push(v);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_merge_matches_sequential() {
        let xs: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - all.mean).abs() < 1e-12);
        assert!((m.m2 - all.m2).abs() < 1e-9);
    }

    #[test]
    fn slope_of_power_law() {
        let pts = log_grid(10, 10_000, 5)
            .into_iter()
            .map(|n| TailPoint { n, prob: 3.0 * (n as f64).powf(-0.5), std_error: 0.0 })
            .collect();
        let c = TailCurve { points: pts, boundary_touch_fraction: 0.0 };
        assert!((c.loglog_slope(10, 10_000).unwrap() + 0.5).abs() < 1e-9);
        assert!(c.loglog_curvature(10, 10_000).unwrap().abs() < 1e-9);
    }
}
