//! Closed-form Freedman and Bennett tail bounds, the master bound for a
//! general cgf bound `g`, and its minimization over `θ`.
//!
//! For an adapted sequence whose conditional cgf obeys
//! `log E_{k-1} exp(θ X_k) ≼ g(θ) V_k`, the probability that
//! `λ_max(Y_k) ≥ t` while `λ_max(W_k) ≤ w` at some step is at most
//! `d · inf_θ exp(−θ t + g(θ) w)`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid cgf bound '{label}': g({theta}) = {value}")]
    InvalidCgf {
        label: String,
        theta: f64,
        value: f64,
    },
    #[error("no finite bound: objective is non-finite on the entire search bracket")]
    NoFiniteBound,
}

fn invalid(name: &'static str, value: f64, reason: &'static str) -> BoundError {
    BoundError::InvalidParameter {
        name,
        value,
        reason,
    }
}

/// Parameters of a Freedman-type tail query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailQuery {
    /// Level `t ≥ 0`.
    pub t: f64,
    /// Variance-proxy cap `σ² > 0`.
    pub sigma2: f64,
    /// Uniform bound `R > 0` on `λ_max` of the differences.
    pub r: f64,
    /// Matrix dimension.
    pub d: usize,
}

impl TailQuery {
    pub fn new(t: f64, sigma2: f64, r: f64, d: usize) -> Result<Self, BoundError> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(invalid("t", t, "must be finite and >= 0"));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(invalid("sigma2", sigma2, "must be finite and > 0"));
        }
        if !(r.is_finite() && r > 0.0) {
            return Err(invalid("R", r, "must be finite and > 0"));
        }
        if d == 0 {
            return Err(invalid("d", 0.0, "must be >= 1"));
        }
        Ok(Self { t, sigma2, r, d })
    }
}

/// A probability bound. `value` is the raw formula value and may exceed 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundResult {
    pub value: f64,
    pub theta_star: Option<f64>,
    /// `value > 1`, so [`BoundResult::reported`] returns 1.
    pub clipped: bool,
}

impl BoundResult {
    fn new(value: f64, theta_star: Option<f64>) -> Self {
        Self {
            value,
            theta_star,
            clipped: value > 1.0,
        }
    }

    /// `min(value, 1)`.
    pub fn reported(&self) -> f64 {
        self.value.min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum CgfKind {
    /// `(e^{Rθ} − Rθ − 1)/R²`; `R = 0` is the `θ²/2` limit.
    Freedman {
        scale: f64,
    },
    Custom,
}

/// A cgf bound `g : (0, ∞) → [0, ∞]`.
#[derive(Clone)]
pub struct CgfBoundFn {
    label: String,
    kind: CgfKind,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CgfBoundFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CgfBoundFn")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

/// Probe grid used to validate custom `g`.
const CGF_PROBES: usize = 64;

impl CgfBoundFn {
    /// Wraps a custom `g`. It is probed on a log grid over `[1e-8, 50]` and
    /// rejected if any probe is negative or NaN. `+∞` is allowed.
    pub fn new(
        label: impl Into<String>,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, BoundError> {
        let label = label.into();
        for theta in log_grid(THETA_MIN, THETA_MAX, CGF_PROBES) {
            let value = g(theta);
            if value.is_nan() || value < 0.0 {
                return Err(BoundError::InvalidCgf {
                    label,
                    theta,
                    value,
                });
            }
        }
        Ok(Self {
            label,
            kind: CgfKind::Custom,
            f: Arc::new(g),
        })
    }

    /// `g(θ) = e^θ − θ − 1`, the bound for centered differences with
    /// `λ_max(X) ≤ 1`.
    pub fn freedman() -> Self {
        Self::freedman_scaled(1.0)
    }

    /// `g(θ) = (e^{Rθ} − Rθ − 1)/R²`, the bound for centered differences with
    /// `λ_max(X) ≤ R`. `R = 0` gives `θ²/2`.
    pub fn freedman_scaled(r: f64) -> Self {
        assert!(r.is_finite() && r >= 0.0, "scale must be finite and >= 0");
        let label = if r == 1.0 {
            "freedman: e^theta - theta - 1".to_string()
        } else {
            format!("freedman scaled by R={r}")
        };
        Self {
            label,
            kind: CgfKind::Freedman { scale: r },
            f: Arc::new(move |theta| scaled_freedman_g(theta, r)),
        }
    }

    /// `g(θ) = θ²/2`.
    pub fn sub_gaussian() -> Self {
        Self {
            label: "sub-gaussian: theta^2/2".to_string(),
            kind: CgfKind::Custom,
            f: Arc::new(|theta| 0.5 * theta * theta),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn eval(&self, theta: f64) -> f64 {
        (self.f)(theta)
    }

    /// `R` if this is the built-in Freedman `g` scaled by `R`.
    pub fn freedman_scale(&self) -> Option<f64> {
        match self.kind {
            CgfKind::Freedman { scale } => Some(scale),
            CgfKind::Custom => None,
        }
    }
}

/// `e^x − x − 1` for `x ≥ 0`, accurate near 0.
fn exp_minus_linear(x: f64) -> f64 {
    if x < 1.0 {
        let mut term = 0.5 * x * x;
        let mut sum = term;
        let mut n = 2.0;
        while term > f64::EPSILON * sum * 0.25 {
            n += 1.0;
            term *= x / n;
            sum += term;
        }
        sum
    } else {
        x.exp_m1() - x
    }
}

fn scaled_freedman_g(theta: f64, r: f64) -> f64 {
    if r == 0.0 {
        0.5 * theta * theta
    } else {
        exp_minus_linear(r * theta) / (r * r)
    }
}

/// The Freedman cgf bound `g(θ) = e^θ − θ − 1` for `θ > 0`.
pub fn freedman_g(theta: f64) -> Result<f64, BoundError> {
    if theta.is_nan() || theta <= 0.0 {
        return Err(invalid("theta", theta, "must be > 0"));
    }
    Ok(exp_minus_linear(theta))
}

/// Bennett's function `h(u) = (1+u) log(1+u) − u` for `u ≥ 0`.
pub fn bennett_h(u: f64) -> Result<f64, BoundError> {
    if u.is_nan() || u < 0.0 {
        return Err(invalid("u", u, "must be >= 0"));
    }
    if u < 0.25 {
        // h(u) = Σ_{n≥2} (−u)^n / (n(n−1))
        let mut power = u * u;
        let mut sum = 0.5 * power;
        let mut n = 2.0;
        loop {
            n += 1.0;
            power *= -u;
            let term = power / (n * (n - 1.0));
            sum += term;
            if term.abs() <= f64::EPSILON * 0.25 * sum.abs() {
                break;
            }
        }
        Ok(sum)
    } else {
        Ok((1.0 + u) * u.ln_1p() - u)
    }
}

/// `d · exp(−(t²/2)/(σ² + R t/3))`.
pub fn freedman_tail_bound(q: &TailQuery) -> BoundResult {
    let exponent = -(0.5 * q.t * q.t) / (q.sigma2 + q.r * q.t / 3.0);
    BoundResult::new(q.d as f64 * exponent.exp(), None)
}

/// `d · exp(−(σ²/R²) h(R t/σ²))`, attained at `θ* = log(1 + R t/σ²)/R`.
pub fn bennett_tail_bound(q: &TailQuery) -> BoundResult {
    let u = q.r * q.t / q.sigma2;
    let h = bennett_h(u).expect("u >= 0 for a valid query");
    let value = q.d as f64 * (-(q.sigma2 / (q.r * q.r)) * h).exp();
    let theta_star = (q.t > 0.0).then(|| u.ln_1p() / q.r);
    BoundResult::new(value, theta_star)
}

/// Freedman bound for a `d1 × d2` rectangular martingale via its
/// `(d1 + d2)`-dimensional dilation.
pub fn rectangular_freedman_bound(
    t: f64,
    sigma2: f64,
    r: f64,
    d1: usize,
    d2: usize,
) -> Result<BoundResult, BoundError> {
    if d1 == 0 || d2 == 0 {
        return Err(invalid("d1/d2", 0.0, "must be >= 1"));
    }
    Ok(freedman_tail_bound(&TailQuery::new(t, sigma2, r, d1 + d2)?))
}

/// `d · exp(−θ t + g(θ) w)`. A value `g(θ) = +∞` yields the trivial bound `d`.
pub fn master_bound_at_theta(
    t: f64,
    w: f64,
    theta: f64,
    g: &CgfBoundFn,
    d: usize,
) -> Result<f64, BoundError> {
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(invalid("theta", theta, "must be finite and > 0"));
    }
    if w.is_nan() || w < 0.0 {
        return Err(invalid("w", w, "must be >= 0"));
    }
    if t.is_nan() {
        return Err(invalid("t", t, "must not be NaN"));
    }
    let gv = g.eval(theta);
    if gv == f64::INFINITY {
        return Ok(d as f64);
    }
    Ok(d as f64 * (-theta * t + gv * w).exp())
}

pub const THETA_MIN: f64 = 1e-8;
pub const THETA_MAX: f64 = 50.0;
const COARSE_POINTS: usize = 64;
const LOG_THETA_TOLERANCE: f64 = 1e-10;

/// `n` log-spaced points over `[lo, hi]`, endpoints included.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

/// `d · inf_{θ>0} exp(−θ t + g(θ) w)`.
///
/// The built-in Freedman `g` is minimized in closed form at
/// `θ* = log(1 + R t/w)/R`. Any other `g` is scanned on a 64-point log grid
/// over `[1e-8, 50]` and refined by golden-section search on `log θ`.
/// At `t = 0` the infimum is the `θ → 0` limit `d`, with no minimizer.
pub fn optimize_theta(t: f64, w: f64, g: &CgfBoundFn, d: usize) -> Result<BoundResult, BoundError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(invalid("t", t, "must be finite and >= 0"));
    }
    if !(w.is_finite() && w > 0.0) {
        return Err(invalid("w", w, "must be finite and > 0"));
    }
    if d == 0 {
        return Err(invalid("d", 0.0, "must be >= 1"));
    }
    let df = d as f64;
    if t == 0.0 {
        return Ok(BoundResult::new(df, None));
    }

    if let Some(r) = g.freedman_scale() {
        if r > 0.0 {
            let q = TailQuery::new(t, w, r, d)?;
            return Ok(bennett_tail_bound(&q));
        }
        // θ²/2: minimized at θ* = t/w.
        let theta = t / w;
        return Ok(BoundResult::new(df * (-0.5 * t * t / w).exp(), Some(theta)));
    }

    // Minimize the log-objective so that tiny bounds do not underflow.
    let log_objective = |log_theta: f64| -> Probe {
        let theta = log_theta.exp();
        let gv = g.eval(theta);
        if gv == f64::INFINITY {
            return Probe::InfiniteG;
        }
        let value = -theta * t + gv * w;
        if value.is_finite() {
            Probe::Finite(value)
        } else {
            Probe::NonFinite
        }
    };

    let grid: Vec<f64> = log_grid(THETA_MIN, THETA_MAX, COARSE_POINTS)
        .into_iter()
        .map(f64::ln)
        .collect();
    let probes: Vec<Probe> = grid.iter().map(|&x| log_objective(x)).collect();
    let best = probes
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.finite().map(|v| (i, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let Some((best_idx, best_val)) = best else {
        if probes.iter().all(|p| matches!(p, Probe::InfiniteG)) {
            log::warn!(
                "cgf bound '{}' is +inf on the whole search bracket; returning the trivial bound d",
                g.label()
            );
            return Ok(BoundResult::new(df, None));
        }
        return Err(BoundError::NoFiniteBound);
    };

    let lo = grid[best_idx.saturating_sub(1)];
    let hi = grid[(best_idx + 1).min(grid.len() - 1)];
    let f = |x: f64| log_objective(x).finite().unwrap_or(f64::INFINITY);
    let (refined_x, refined_val) = golden_section(f, lo, hi, LOG_THETA_TOLERANCE);

    let (log_theta, log_value) = if refined_val < best_val {
        (refined_x, refined_val)
    } else {
        (grid[best_idx], best_val)
    };
    Ok(BoundResult::new(
        df * log_value.exp(),
        Some(log_theta.exp()),
    ))
}

#[derive(Debug, Clone, Copy)]
enum Probe {
    Finite(f64),
    InfiniteG,
    NonFinite,
}

impl Probe {
    fn finite(self) -> Option<f64> {
        match self {
            Probe::Finite(v) => Some(v),
            _ => None,
        }
    }
}

/// Golden-section minimization of `f` on `[a, b]`. Returns `(x, f(x))`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fe = f(e);
    while (b - a).abs() > tol {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = f(e);
        }
    }
    let x = 0.5 * (a + b);
    let fx = f(x);
    [(x, fx), (c, fc), (e, fe)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("three candidates")
}

/// Smallest `t` at which the Freedman bound equals `delta`.
///
/// Solves `t²/2 = L (σ² + R t/3)` with `L = log(d/δ)` by its positive root.
/// Returns 0 when `δ ≥ d`, where the bound is already trivial.
pub fn invert_freedman_for_t(delta: f64, sigma2: f64, r: f64, d: usize) -> Result<f64, BoundError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(invalid("delta", delta, "must be finite and > 0"));
    }
    // validates sigma2, r, d
    TailQuery::new(0.0, sigma2, r, d)?;
    let df = d as f64;
    if delta >= df {
        return Ok(0.0);
    }
    let l = (df / delta).ln();
    let b = r * l / 3.0;
    Ok(b + (b * b + 2.0 * l * sigma2).sqrt())
}

/// Comparison of `h(u)` with its Bernstein-type lower bound `(u²/2)/(1 + u/3)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HInequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

impl HInequalityCheck {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Checks `h(u) ≥ (u²/2)/(1 + u/3)`. Negative or NaN `u` reports `ok = false`.
pub fn h_lower_bound_check(u: f64) -> HInequalityCheck {
    let rhs = 0.5 * u * u / (1.0 + u / 3.0);
    match bennett_h(u) {
        Ok(lhs) => HInequalityCheck {
            lhs,
            rhs,
            ok: lhs >= rhs - 1e-12,
        },
        Err(_) => HInequalityCheck {
            lhs: f64::NAN,
            rhs,
            ok: false,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{E, LN_2};

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    fn q(t: f64, s: f64, r: f64, d: usize) -> TailQuery {
        TailQuery::new(t, s, r, d).unwrap()
    }

    #[test]
    fn query_validation() {
        assert!(TailQuery::new(-1.0, 1.0, 1.0, 1).is_err());
        assert!(TailQuery::new(1.0, 0.0, 1.0, 1).is_err());
        assert!(TailQuery::new(1.0, 1.0, 0.0, 1).is_err());
        assert!(TailQuery::new(1.0, 1.0, 1.0, 0).is_err());
        assert!(TailQuery::new(f64::NAN, 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn bennett_h_examples() {
        assert_eq!(bennett_h(0.0).unwrap(), 0.0);
        assert!(rel(bennett_h(E - 1.0).unwrap(), 1.0) < 1e-15);
        assert!(rel(bennett_h(1.0).unwrap(), 2.0 * LN_2 - 1.0) < 1e-15);
        assert!(bennett_h(-0.1).is_err());
        // series branch against the Taylor expansion u²/2 − u³/6 + u⁴/12 − u⁵/20
        let u = 1e-4_f64;
        let taylor = u * u / 2.0 - u.powi(3) / 6.0 + u.powi(4) / 12.0 - u.powi(5) / 20.0;
        assert!(rel(bennett_h(u).unwrap(), taylor) < 1e-14);
        // continuity at the branch point
        let below = bennett_h(0.25 - 1e-12).unwrap();
        let above = bennett_h(0.25).unwrap();
        assert!((below - above).abs() < 1e-12);
    }

    #[test]
    fn freedman_examples() {
        assert_eq!(freedman_tail_bound(&q(0.0, 1.0, 1.0, 7)).value, 7.0);
        assert!(
            rel(
                freedman_tail_bound(&q(1.0, 1.0, 1.0, 1)).value,
                (-3.0_f64 / 8.0).exp()
            ) < 1e-15
        );
        assert!(
            rel(
                freedman_tail_bound(&q(2.0, 4.0, 1.0, 1)).value,
                (-3.0_f64 / 7.0).exp()
            ) < 1e-15
        );
    }

    #[test]
    fn bennett_examples() {
        let b = bennett_tail_bound(&q(0.0, 1.0, 1.0, 3));
        assert_eq!(b.value, 3.0);
        assert!(b.clipped);
        assert_eq!(b.reported(), 1.0);
        assert!(b.theta_star.is_none());
        assert!(
            rel(
                bennett_tail_bound(&q(E - 1.0, 1.0, 1.0, 1)).value,
                (-1.0_f64).exp()
            ) < 1e-15
        );
        let b = bennett_tail_bound(&q(1.0, 1.0, 1.0, 1));
        assert!(rel(b.value, E / 4.0) < 1e-15);
        assert!(rel(b.theta_star.unwrap(), LN_2) < 1e-15);
    }

    #[test]
    fn master_bound_examples() {
        let g = CgfBoundFn::freedman();
        let v = master_bound_at_theta(1.0, 1.0, LN_2, &g, 2).unwrap();
        assert!(rel(v, E / 2.0) < 1e-14);
        assert_eq!(master_bound_at_theta(0.0, 0.0, 0.7, &g, 5).unwrap(), 5.0);
        let inf = CgfBoundFn::new("inf", |_| f64::INFINITY).unwrap();
        assert_eq!(master_bound_at_theta(3.0, 2.0, 1.0, &inf, 4).unwrap(), 4.0);
        assert!(master_bound_at_theta(1.0, 1.0, 0.0, &g, 1).is_err());
        assert!(master_bound_at_theta(1.0, 1.0, -1.0, &g, 1).is_err());
        assert!(master_bound_at_theta(1.0, -1.0, 1.0, &g, 1).is_err());
    }

    #[test]
    fn optimize_theta_examples() {
        let g = CgfBoundFn::freedman();
        let b = optimize_theta(1.0, 1.0, &g, 1).unwrap();
        assert!((b.theta_star.unwrap() - LN_2).abs() < 1e-15);
        assert!(rel(b.value, E / 4.0) < 1e-14);

        let b = optimize_theta(0.0, 1.0, &g, 3).unwrap();
        assert_eq!(b.value, 3.0);
        assert_eq!(b.reported(), 1.0);
        assert!(b.theta_star.is_none());

        let sg = CgfBoundFn::sub_gaussian();
        let b = optimize_theta(2.0, 1.0, &sg, 1).unwrap();
        assert!((b.theta_star.unwrap() - 2.0).abs() < 1e-6);
        assert!(rel(b.value, (-2.0_f64).exp()) < 1e-8);
    }

    #[test]
    fn optimize_theta_generic_matches_closed_form() {
        // same g as the built-in, but opaque to the optimizer
        let opaque = CgfBoundFn::new("opaque freedman", |th| freedman_g(th).unwrap()).unwrap();
        for &(t, w) in &[(1.0, 1.0), (0.3, 2.0), (5.0, 0.5), (10.0, 4.0)] {
            let generic = optimize_theta(t, w, &opaque, 2).unwrap();
            let closed = optimize_theta(t, w, &CgfBoundFn::freedman(), 2).unwrap();
            assert!(rel(generic.value, closed.value) < 1e-8, "t={t} w={w}");
            assert!(rel(generic.theta_star.unwrap(), closed.theta_star.unwrap()) < 1e-4);
        }
    }

    #[test]
    fn optimize_theta_infinite_regions() {
        // g infinite beyond θ = 1: the minimizer must be found in the finite region
        let capped = CgfBoundFn::new("capped", |th| {
            if th > 1.0 {
                f64::INFINITY
            } else {
                0.5 * th * th
            }
        })
        .unwrap();
        let b = optimize_theta(4.0, 1.0, &capped, 1).unwrap();
        let theta = b.theta_star.unwrap();
        assert!(theta <= 1.0);
        assert!(rel(b.value, (-4.0 * theta + 0.5 * theta * theta).exp()) < 1e-12);
        assert!(theta > 0.99);

        let always_inf = CgfBoundFn::new("inf", |_| f64::INFINITY).unwrap();
        let b = optimize_theta(1.0, 1.0, &always_inf, 6).unwrap();
        assert_eq!(b.value, 6.0);
        assert!(b.theta_star.is_none());
    }

    #[test]
    fn optimize_theta_rejects_nan_objective() {
        // bypasses the probe check in `CgfBoundFn::new`
        let nan_everywhere = CgfBoundFn {
            label: "nan".into(),
            kind: CgfKind::Custom,
            f: Arc::new(|_| f64::NAN),
        };
        assert_eq!(
            optimize_theta(1.0, 1.0, &nan_everywhere, 1),
            Err(BoundError::NoFiniteBound)
        );
    }

    #[test]
    fn custom_cgf_validation() {
        assert!(CgfBoundFn::new("neg", |th| -th).is_err());
        assert!(CgfBoundFn::new("nan", |_| f64::NAN).is_err());
        assert!(CgfBoundFn::new("ok", |th| th * th).is_ok());
    }

    #[test]
    fn freedman_g_examples() {
        let v = freedman_g(1e-8).unwrap();
        let taylor = 0.5e-16 + 1e-24 / 6.0;
        assert!(rel(v, taylor) < 1e-14);
        assert!(rel(freedman_g(1.0).unwrap(), E - 2.0) < 1e-15);
        assert!(rel(freedman_g(LN_2).unwrap(), 1.0 - LN_2) < 1e-15);
        assert!(freedman_g(0.0).is_err());
        assert!(freedman_g(-1.0).is_err());
        // continuity at the series switch
        let a = freedman_g(1.0 - 1e-12).unwrap();
        assert!((a - (E - 2.0)).abs() < 1e-11);
    }

    #[test]
    fn rectangular_examples() {
        assert_eq!(
            rectangular_freedman_bound(0.0, 1.0, 1.0, 2, 3)
                .unwrap()
                .value,
            5.0
        );
        let b = rectangular_freedman_bound(1.0, 1.0, 1.0, 1, 1).unwrap();
        assert!(rel(b.value, 2.0 * (-3.0_f64 / 8.0).exp()) < 1e-15);
        assert!(b.clipped);
        let b = rectangular_freedman_bound(2.0, 4.0, 1.0, 1, 1).unwrap();
        assert!(rel(b.value, 2.0 * (-3.0_f64 / 7.0).exp()) < 1e-15);
        assert!(rectangular_freedman_bound(1.0, 1.0, 1.0, 0, 1).is_err());
    }

    #[test]
    fn invert_examples() {
        let t = invert_freedman_for_t((-3.0_f64 / 8.0).exp(), 1.0, 1.0, 1).unwrap();
        assert!((t - 1.0).abs() < 1e-14);
        let t = invert_freedman_for_t(3.0 * (-3.0_f64 / 7.0).exp(), 4.0, 1.0, 3).unwrap();
        assert!((t - 2.0).abs() < 1e-14);
        let t = invert_freedman_for_t(5.0 * (1.0 - 1e-12), 1.0, 1.0, 5).unwrap();
        assert!(t > 0.0 && t < 1e-5);
        assert_eq!(invert_freedman_for_t(5.0, 1.0, 1.0, 5).unwrap(), 0.0);
        assert!(invert_freedman_for_t(0.0, 1.0, 1.0, 1).is_err());
        assert!(invert_freedman_for_t(0.5, -1.0, 1.0, 1).is_err());
    }

    #[test]
    fn h_check_examples() {
        let c = h_lower_bound_check(0.0);
        assert_eq!((c.lhs, c.rhs, c.ok), (0.0, 0.0, true));
        let c = h_lower_bound_check(1.0);
        assert!((c.lhs - 0.386_294_361_119_890_6).abs() < 1e-15);
        assert_eq!(c.rhs, 0.375);
        assert!(c.ok);
        let c = h_lower_bound_check(10.0);
        assert!((c.lhs - (11.0 * 11.0_f64.ln() - 10.0)).abs() < 1e-13);
        assert!((c.lhs - 16.376).abs() < 1e-3);
        assert!((c.rhs - 50.0 / (13.0 / 3.0)).abs() < 1e-13);
        assert!(c.ok);
        assert!(!h_lower_bound_check(-1.0).ok);
    }

    #[test]
    fn dominance_grid() {
        let sigmas = [0.25, 1.0, 4.0];
        let rs = [0.5, 1.0, 2.0];
        let ds = [1, 2, 10];
        for i in 0..=100 {
            let t = i as f64 * 0.1;
            for &s in &sigmas {
                for &r in &rs {
                    for &d in &ds {
                        let query = q(t, s, r, d);
                        let b = bennett_tail_bound(&query).value;
                        let f = freedman_tail_bound(&query).value;
                        assert!(b <= f + 1e-12, "{query:?}: {b} > {f}");
                        let o = optimize_theta(t, s, &CgfBoundFn::freedman_scaled(r), d).unwrap();
                        assert!(rel(o.value, b) < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn h_inequality_dense_grid() {
        for i in 0..10_000 {
            let u = 100.0 * i as f64 / 9_999.0;
            assert!(h_lower_bound_check(u).ok, "u = {u}");
        }
    }

    #[test]
    fn closed_form_theta_is_global_minimizer() {
        let g = CgfBoundFn::freedman();
        for &(t, w) in &[(1.0, 1.0), (0.5, 3.0), (7.0, 1.0)] {
            let b = optimize_theta(t, w, &g, 1).unwrap();
            let at_star = master_bound_at_theta(t, w, b.theta_star.unwrap(), &g, 1).unwrap();
            assert!(rel(at_star, b.value) < 1e-12);
            for theta in log_grid(1e-6, 50.0, 1000) {
                assert!(at_star <= master_bound_at_theta(t, w, theta, &g, 1).unwrap());
            }
        }
    }

    proptest! {
        #[test]
        fn prop_scaling_covariance(t in 0.0..10.0f64, s in 0.1..5.0f64, r in 0.1..3.0f64,
                                   c in 0.1..10.0f64, d in 1usize..20) {
            let a = freedman_tail_bound(&q(t, s, r, d)).value;
            let b = freedman_tail_bound(&q(c * t, c * c * s, c * r, d)).value;
            prop_assert!(rel(a, b) < 1e-12);
            let a = bennett_tail_bound(&q(t, s, r, d)).value;
            let b = bennett_tail_bound(&q(c * t, c * c * s, c * r, d)).value;
            prop_assert!(rel(a, b) < 1e-12);
        }

        #[test]
        fn prop_freedman_monotone(t in 0.01..10.0f64, s in 0.1..5.0f64, r in 0.1..3.0f64,
                                  d in 1usize..20, bump in 1.01..2.0f64) {
            let base = freedman_tail_bound(&q(t, s, r, d)).value;
            prop_assert!(freedman_tail_bound(&q(t * bump, s, r, d)).value < base);
            prop_assert!(freedman_tail_bound(&q(t, s * bump, r, d)).value > base);
            prop_assert!(freedman_tail_bound(&q(t, s, r * bump, d)).value > base);
            let doubled = freedman_tail_bound(&q(t, s, r, 2 * d)).value;
            prop_assert!(rel(doubled, 2.0 * base) < 1e-15);
        }

        #[test]
        fn prop_invert_round_trip(delta in 1e-9..0.999f64, s in 0.1..5.0f64,
                                  r in 0.1..3.0f64, d in 1usize..10) {
            let t = invert_freedman_for_t(delta, s, r, d).unwrap();
            let back = freedman_tail_bound(&q(t, s, r, d)).value;
            prop_assert!(rel(back, delta) < 1e-10);
        }
    }
}
