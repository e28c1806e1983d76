//! Composite Gauss-Legendre quadrature over wire spans.
//!
//! The integrands here are smooth away from the source wire and sharply
//! peaked (width comparable to the wire radius) near it, so panels are either
//! uniform or graded towards a designated point. Convergence is checked by
//! panel halving: each refinement level splits every panel in two and the
//! integral is accepted once successive levels agree to the requested
//! relative tolerance.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QuadError {
    #[error(
        "quadrature did not converge within {max_subdivisions} subdivisions \
         (last relative change {last_change:.3e}, tolerance {tolerance:.3e})"
    )]
    NoConvergence {
        max_subdivisions: usize,
        last_change: f64,
        tolerance: f64,
    },
    #[error("quadrature order must be >= 2, got {0}")]
    BadOrder(usize),
    #[error("quadrature tolerance must be positive, got {0}")]
    BadTolerance(f64),
}

/// Panel layout and convergence settings for the impedance integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Gauss-Legendre order per panel.
    pub base_order: usize,
    /// Relative tolerance for the panel-halving convergence check.
    pub rel_tol: f64,
    /// Maximum number of halvings before giving up.
    pub max_subdivisions: usize,
    /// Panel width (m) used next to the integrand peak of self terms.
    /// `None` uses the source wire radius.
    pub near_panel_width: Option<f64>,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            base_order: 16,
            rel_tol: 1e-8,
            max_subdivisions: 6,
            near_panel_width: None,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<(), QuadError> {
        if self.base_order < 2 {
            return Err(QuadError::BadOrder(self.base_order));
        }
        if !(self.rel_tol > 0.0) {
            return Err(QuadError::BadTolerance(self.rel_tol));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
#[derive(Debug, Clone)]
pub struct GlRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GlRule {
    /// Nodes via Newton iteration on the Legendre polynomial; rules are cached
    /// per order.
    pub fn get(order: usize) -> std::sync::Arc<GlRule> {
        static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<GlRule>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().unwrap();
        map.entry(order)
            .or_insert_with(|| std::sync::Arc::new(GlRule::compute(order)))
            .clone()
    }

    fn compute(order: usize) -> GlRule {
        assert!(order >= 2);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..(n + 1) / 2 {
            // Tricomi-style initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GlRule { nodes, weights }
    }

    /// Integrates `f` over a single panel [a, b].
    pub fn integrate_panel(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> Complex64) -> Complex64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut sum = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(self.weights.iter()) {
            sum += f(mid + half * x) * *w;
        }
        sum * half
    }
}

/// Legendre P_n(x) and its derivative.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Uniform panels over [a, b] with width at most `max_width`.
pub fn panels_uniform(a: f64, b: f64, max_width: f64) -> Vec<(f64, f64)> {
    debug_assert!(b > a);
    let n = ((b - a) / max_width).ceil().max(1.0) as usize;
    let w = (b - a) / n as f64;
    (0..n)
        .map(|i| (a + i as f64 * w, a + (i + 1) as f64 * w))
        .collect()
}

/// Panels over [a, b] graded towards `peak`: width `fine_width` inside
/// `peak +- fine_halfwidth`, doubling outward until `max_width` is reached.
/// Falls back to uniform panels when the fine region misses the interval.
pub fn panels_graded(
    a: f64,
    b: f64,
    peak: f64,
    fine_halfwidth: f64,
    fine_width: f64,
    max_width: f64,
) -> Vec<(f64, f64)> {
    debug_assert!(b > a);
    let lo = (peak - fine_halfwidth).max(a);
    let hi = (peak + fine_halfwidth).min(b);
    if lo >= hi {
        return panels_uniform(a, b, max_width);
    }
    let mut cuts = vec![lo, hi];
    // fine region
    let mut x = lo + fine_width;
    while x < hi - 0.5 * fine_width {
        cuts.push(x);
        x += fine_width;
    }
    // geometric growth below
    let mut w = 2.0 * fine_width;
    let mut x = lo;
    while x > a {
        x = (x - w).max(a);
        cuts.push(x);
        w = (2.0 * w).min(max_width);
    }
    // geometric growth above
    let mut w = 2.0 * fine_width;
    let mut x = hi;
    while x < b {
        x = (x + w).min(b);
        cuts.push(x);
        w = (2.0 * w).min(max_width);
    }
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Forces a panel boundary at `x`: any panel whose interior contains `x` is
/// split there. Integrands that are continuous but not smooth at a known
/// point (a current-profile kink) converge at full Gauss-Legendre order only
/// when that point is a panel edge.
pub fn split_at(panels: Vec<(f64, f64)>, x: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(panels.len() + 1);
    for (a, b) in panels {
        let guard = 1e-9 * (b - a);
        if x - a > guard && b - x > guard {
            out.push((a, x));
            out.push((x, b));
        } else {
            out.push((a, b));
        }
    }
    out
}

/// Splits every panel in two.
pub fn refine(panels: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(panels.len() * 2);
    for &(a, b) in panels {
        let m = 0.5 * (a + b);
        out.push((a, m));
        out.push((m, b));
    }
    out
}

pub fn integrate_panels(
    panels: &[(f64, f64)],
    rule: &GlRule,
    mut f: impl FnMut(f64) -> Complex64,
) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    for &(a, b) in panels {
        sum += rule.integrate_panel(a, b, &mut f);
    }
    sum
}

/// Like [`integrate_panels`] but also accumulates the L1 mass
/// sum of w |f|, the scale against which floating-point cancellation noise
/// must be judged.
fn integrate_panels_with_l1(
    panels: &[(f64, f64)],
    rule: &GlRule,
    f: &mut impl FnMut(f64) -> Complex64,
) -> (Complex64, f64) {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut l1 = 0.0;
    for &(a, b) in panels {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in rule.nodes.iter().zip(rule.weights.iter()) {
            let v = f(mid + half * x);
            sum += v * (w * half);
            l1 += v.norm() * (w * half).abs();
        }
    }
    (sum, l1)
}

/// Result of an adaptive integration: value, error estimate (last level
/// change), and the panel count at the accepted level.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveResult {
    pub value: Complex64,
    pub est_error: f64,
    pub panels: usize,
}

/// Integrates `f` starting from `base_panels`, halving panels until two
/// successive levels agree to `spec.rel_tol` relative.
pub fn integrate_adaptive(
    base_panels: Vec<(f64, f64)>,
    spec: &QuadratureSpec,
    mut f: impl FnMut(f64) -> Complex64,
) -> Result<AdaptiveResult, QuadError> {
    spec.validate()?;
    let rule = GlRule::get(spec.base_order);
    let mut panels = base_panels;
    let (mut prev, _) = integrate_panels_with_l1(&panels, &rule, &mut f);
    let mut last_change = f64::INFINITY;
    for _ in 0..spec.max_subdivisions {
        panels = refine(&panels);
        let (next, l1) = integrate_panels_with_l1(&panels, &rule, &mut f);
        // Cancellation-heavy integrands (near-field self terms) bottom out at
        // roundoff noise proportional to the L1 mass, which can exceed
        // rel_tol relative to the cancelled result; accept at that floor, or
        // when refinement has stalled at a level that can only be noise.
        let noise_floor = 1e-12 * l1;
        let scale = next.norm().max(f64::MIN_POSITIVE);
        let prev_change = last_change;
        last_change = (next - prev).norm();
        let stalled = last_change >= 0.25 * prev_change && last_change <= 1e-9 * l1;
        if last_change <= (spec.rel_tol * scale).max(noise_floor) || stalled {
            return Ok(AdaptiveResult {
                value: next,
                est_error: last_change,
                panels: panels.len(),
            });
        }
        prev = next;
    }
    Err(QuadError::NoConvergence {
        max_subdivisions: spec.max_subdivisions,
        last_change,
        tolerance: spec.rel_tol,
    })
}
