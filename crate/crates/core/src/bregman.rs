//! Distance-generating functions, Bregman distances and generalized proximal
//! maps.
//!
//! Every prox in this crate has the form
//!
//! ```text
//! prox(f, t, s, c) = argmin_x  f(x) + <s, x> + (1/t) D(x, c)
//! ```
//!
//! which is exactly the shape of both the dual ascent step (with `s = -s^k`,
//! `t = sigma^k`) and the primal block step (with `s` the partial gradient,
//! `t = tau_i^k`).

use crate::error::{ensure_len, Error, Result};

/// Entries of entropy-geometry points are clamped to this floor before logs.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// Slack allowed when testing membership in an indicator's domain.
pub const DOMAIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeometryKind {
    /// `phi(x) = ||x||^2 / 2`, `D(u, v) = ||u - v||^2 / 2`.
    Euclidean,
    /// `phi(x) = sum x_j ln x_j - x_j`, `D(u, v) = sum u ln(u/v) - u + v`.
    /// 1-strongly convex w.r.t. the l1 norm on the unit simplex.
    Entropy,
}

impl GeometryKind {
    pub fn name(self) -> &'static str {
        match self {
            GeometryKind::Euclidean => "euclidean",
            GeometryKind::Entropy => "entropy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "euclidean" => Some(Self::Euclidean),
            "entropy" => Some(Self::Entropy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BregmanGeometry {
    pub kind: GeometryKind,
    pub dim: usize,
}

impl BregmanGeometry {
    pub fn euclidean(dim: usize) -> Self {
        Self {
            kind: GeometryKind::Euclidean,
            dim,
        }
    }

    pub fn entropy(dim: usize) -> Self {
        Self {
            kind: GeometryKind::Entropy,
            dim,
        }
    }

    pub fn distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        ensure_len(self.dim, u.len())?;
        ensure_len(self.dim, v.len())?;
        bregman_dist(self.kind, u, v)
    }

    /// Squared reference norm of `d`: `||d||_2^2` or `||d||_1^2`.
    pub fn ref_norm_sq(&self, d: &[f64]) -> f64 {
        ref_norm_sq(self.kind, d)
    }
}

pub(crate) fn ref_norm_sq(kind: GeometryKind, d: &[f64]) -> f64 {
    match kind {
        GeometryKind::Euclidean => d.iter().map(|v| v * v).sum(),
        GeometryKind::Entropy => {
            let l1: f64 = d.iter().map(|v| v.abs()).sum();
            l1 * l1
        }
    }
}

/// `D(u, v)` for the given geometry. Entropy requires `u >= 0`, `v > 0`.
pub fn bregman_dist(kind: GeometryKind, u: &[f64], v: &[f64]) -> Result<f64> {
    ensure_len(u.len(), v.len())?;
    match kind {
        GeometryKind::Euclidean => Ok(0.5
            * u.iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()),
        GeometryKind::Entropy => {
            if let Some(j) = v.iter().position(|&b| !(b > 0.0)) {
                return Err(Error::Domain(format!(
                    "entropy distance needs a strictly positive center, v[{j}] = {}",
                    v[j]
                )));
            }
            if let Some(j) = u.iter().position(|&a| !(a >= 0.0)) {
                return Err(Error::Domain(format!(
                    "entropy distance needs a nonnegative point, u[{j}] = {}",
                    u[j]
                )));
            }
            Ok(entropy_dist_clamped(u, v))
        }
    }
}

/// Entropy distance with both arguments clamped to the floor; used for
/// metrics where an iterate may have underflowed to zero.
pub(crate) fn entropy_dist_clamped(u: &[f64], v: &[f64]) -> f64 {
    u.iter()
        .zip(v)
        .map(|(&a, &b)| {
            let a = a.max(0.0);
            let b = b.max(ENTROPY_FLOOR);
            let t = if a > 0.0 { a * (a / b).ln() } else { 0.0 };
            t - a + b
        })
        .sum::<f64>()
        .max(0.0)
}

pub(crate) fn bregman_dist_lenient(kind: GeometryKind, u: &[f64], v: &[f64]) -> f64 {
    match kind {
        GeometryKind::Euclidean => bregman_dist(kind, u, v).unwrap_or(f64::NAN),
        GeometryKind::Entropy => entropy_dist_clamped(u, v),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    NonnegOrthant,
}

/// Simple closed convex functions with closed-form proxes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProxFunction {
    Zero,
    /// `lambda ||x||_1`
    L1 { lambda: f64 },
    /// `lambda ||x||_2^2`, modulus `2 lambda`
    SquaredL2 { lambda: f64 },
    /// `lambda ||x||_2^2 + indicator(x >= 0)`, modulus `2 lambda`
    NonnegSquaredL2 { lambda: f64 },
    Nonneg,
    Box { lo: f64, hi: f64 },
    Ball { radius: f64 },
    /// `{x >= 0, sum x = scale}`
    Simplex { scale: f64 },
    /// Indicator of `K* ∩ {||y|| <= bound}`.
    ConeDualBall { cone: Cone, bound: f64 },
}

impl ProxFunction {
    pub fn name(&self) -> &'static str {
        match self {
            ProxFunction::Zero => "zero",
            ProxFunction::L1 { .. } => "l1",
            ProxFunction::SquaredL2 { .. } => "squared_l2",
            ProxFunction::NonnegSquaredL2 { .. } => "nonneg_squared_l2",
            ProxFunction::Nonneg => "nonneg",
            ProxFunction::Box { .. } => "box",
            ProxFunction::Ball { .. } => "ball",
            ProxFunction::Simplex { .. } => "simplex",
            ProxFunction::ConeDualBall { .. } => "cone_dual_ball",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::InvalidParameter(format!(
                "{}: {what} = {v} is not admissible",
                self.name()
            )))
        };
        match *self {
            ProxFunction::Zero | ProxFunction::Nonneg => Ok(()),
            ProxFunction::L1 { lambda }
            | ProxFunction::SquaredL2 { lambda }
            | ProxFunction::NonnegSquaredL2 { lambda } => {
                if lambda.is_finite() && lambda >= 0.0 {
                    Ok(())
                } else {
                    bad("lambda", lambda)
                }
            }
            ProxFunction::Box { lo, hi } => {
                if lo.is_finite() && hi.is_finite() && lo <= hi {
                    Ok(())
                } else {
                    bad("hi - lo", hi - lo)
                }
            }
            ProxFunction::Ball { radius } => {
                if radius.is_finite() && radius > 0.0 {
                    Ok(())
                } else {
                    bad("radius", radius)
                }
            }
            ProxFunction::Simplex { scale } => {
                if scale.is_finite() && scale > 0.0 {
                    Ok(())
                } else {
                    bad("scale", scale)
                }
            }
            ProxFunction::ConeDualBall { bound, .. } => {
                if bound.is_finite() && bound > 0.0 {
                    Ok(())
                } else {
                    bad("bound", bound)
                }
            }
        }
    }

    /// Strong-convexity modulus w.r.t. the euclidean norm.
    pub fn modulus(&self) -> f64 {
        match *self {
            ProxFunction::SquaredL2 { lambda } | ProxFunction::NonnegSquaredL2 { lambda } => {
                2.0 * lambda
            }
            _ => 0.0,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(
            self,
            ProxFunction::Nonneg
                | ProxFunction::Box { .. }
                | ProxFunction::Ball { .. }
                | ProxFunction::Simplex { .. }
                | ProxFunction::ConeDualBall { .. }
        )
    }

    /// Membership in `dom f`, with [`DOMAIN_TOL`] slack.
    pub fn contains(&self, x: &[f64]) -> bool {
        let nonneg = |x: &[f64]| x.iter().all(|&v| v >= -DOMAIN_TOL);
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        match *self {
            ProxFunction::Zero | ProxFunction::L1 { .. } | ProxFunction::SquaredL2 { .. } => {
                x.iter().all(|v| v.is_finite())
            }
            ProxFunction::Nonneg | ProxFunction::NonnegSquaredL2 { .. } => nonneg(x),
            ProxFunction::Box { lo, hi } => x
                .iter()
                .all(|&v| v >= lo - DOMAIN_TOL && v <= hi + DOMAIN_TOL),
            ProxFunction::Ball { radius } => norm(x) <= radius * (1.0 + DOMAIN_TOL) + DOMAIN_TOL,
            ProxFunction::Simplex { scale } => {
                let s: f64 = x.iter().sum();
                nonneg(x) && (s - scale).abs() <= DOMAIN_TOL * scale.max(1.0)
            }
            ProxFunction::ConeDualBall { bound, .. } => {
                nonneg(x) && norm(x) <= bound * (1.0 + DOMAIN_TOL) + DOMAIN_TOL
            }
        }
    }

    /// `f(x)`, `+inf` outside the domain.
    pub fn value(&self, x: &[f64]) -> f64 {
        if !self.contains(x) {
            return f64::INFINITY;
        }
        match *self {
            ProxFunction::L1 { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            ProxFunction::SquaredL2 { lambda } | ProxFunction::NonnegSquaredL2 { lambda } => {
                lambda * x.iter().map(|v| v * v).sum::<f64>()
            }
            _ => 0.0,
        }
    }

    /// Euclidean projection onto `dom f` (identity for finite-valued `f`).
    pub fn project_domain(&self, v: &mut [f64]) {
        match *self {
            ProxFunction::Zero | ProxFunction::L1 { .. } | ProxFunction::SquaredL2 { .. } => {}
            _ => self.prox_euclidean_in_place(v, 0.0),
        }
    }

    /// `prox_{t f}(v)` in the euclidean metric, written over `v`.
    fn prox_euclidean_in_place(&self, v: &mut [f64], t: f64) {
        match *self {
            ProxFunction::Zero => {}
            ProxFunction::L1 { lambda } => {
                let thr = t * lambda;
                for x in v.iter_mut() {
                    *x = soft_threshold(*x, thr);
                }
            }
            ProxFunction::SquaredL2 { lambda } => {
                let c = 1.0 / (1.0 + 2.0 * t * lambda);
                v.iter_mut().for_each(|x| *x *= c);
            }
            ProxFunction::NonnegSquaredL2 { lambda } => {
                let c = 1.0 / (1.0 + 2.0 * t * lambda);
                v.iter_mut().for_each(|x| *x = x.max(0.0) * c);
            }
            ProxFunction::Nonneg => v.iter_mut().for_each(|x| *x = x.max(0.0)),
            ProxFunction::Box { lo, hi } => v.iter_mut().for_each(|x| *x = x.clamp(lo, hi)),
            ProxFunction::Ball { radius } => project_ball(v, radius),
            ProxFunction::Simplex { scale } => project_simplex(v, scale),
            ProxFunction::ConeDualBall { cone, bound } => {
                match cone {
                    Cone::NonnegOrthant => v.iter_mut().for_each(|x| *x = x.max(0.0)),
                }
                // orthant then ball: the two projections commute for this cone
                project_ball(v, bound);
            }
        }
    }
}

pub fn soft_threshold(x: f64, thr: f64) -> f64 {
    if x > thr {
        x - thr
    } else if x < -thr {
        x + thr
    } else {
        0.0
    }
}

pub fn project_ball(v: &mut [f64], radius: f64) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > radius {
        let c = radius / norm;
        v.iter_mut().for_each(|x| *x *= c);
    }
}

/// Euclidean projection onto `{x >= 0, sum x = scale}` by sorting and
/// thresholding. Ties in the sort are broken by index.
pub fn project_simplex(v: &mut [f64], scale: f64) {
    let n = v.len();
    if n == 0 {
        return;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &i) in idx.iter().enumerate() {
        cumsum += v[i];
        let cand = (cumsum - scale) / (j + 1) as f64;
        if v[i] - cand > 0.0 {
            theta = cand;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Generalized prox: `argmin_x f(x) + <s, x> + (1/t) D(x, center)`.
pub fn bregman_prox(
    geom: GeometryKind,
    f: &ProxFunction,
    t: f64,
    s: &[f64],
    center: &[f64],
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; center.len()];
    bregman_prox_into(geom, f, t, s, center, &mut out)?;
    Ok(out)
}

/// Allocation-free form of [`bregman_prox`].
pub fn bregman_prox_into(
    geom: GeometryKind,
    f: &ProxFunction,
    t: f64,
    s: &[f64],
    center: &[f64],
    out: &mut [f64],
) -> Result<()> {
    ensure_len(center.len(), s.len())?;
    ensure_len(center.len(), out.len())?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "prox step must be positive and finite, got {t}"
        )));
    }
    match geom {
        GeometryKind::Euclidean => {
            for ((o, c), g) in out.iter_mut().zip(center).zip(s) {
                *o = c - t * g;
            }
            f.prox_euclidean_in_place(out, t);
            Ok(())
        }
        GeometryKind::Entropy => entropy_prox(f, t, s, center, out),
    }
}

fn entropy_prox(
    f: &ProxFunction,
    t: f64,
    s: &[f64],
    center: &[f64],
    out: &mut [f64],
) -> Result<()> {
    if let Some(j) = center.iter().position(|&c| !(c >= 0.0)) {
        return Err(Error::Domain(format!(
            "entropy prox center must be nonnegative, center[{j}] = {}",
            center[j]
        )));
    }
    let shift = match *f {
        ProxFunction::Zero | ProxFunction::Nonneg | ProxFunction::Simplex { .. } => 0.0,
        ProxFunction::L1 { lambda } => lambda,
        other => {
            return Err(Error::Unsupported(format!(
                "{} has no closed-form prox under the entropy geometry",
                other.name()
            )))
        }
    };
    for ((o, &c), &g) in out.iter_mut().zip(center).zip(s) {
        *o = c.max(ENTROPY_FLOOR).ln() - t * (g + shift);
    }
    match *f {
        ProxFunction::Simplex { scale } => {
            let mx = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for o in out.iter_mut() {
                *o = (*o - mx).exp();
                total += *o;
            }
            let c = scale / total;
            out.iter_mut().for_each(|o| *o *= c);
        }
        _ => out.iter_mut().for_each(|o| *o = o.exp()),
    }
    Ok(())
}

/// Outcome of [`three_point_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct ThreePointReport {
    pub x_plus: Vec<f64>,
    /// `lhs - rhs` of the three-point inequality; nonnegative up to rounding.
    pub residual: f64,
    pub passed: bool,
}

/// Checks `F(x) + t D(x, c) >= F(x+) + t D(x+, c) + t D(x, x+) + mu/2 ||x - x+||^2`
/// at `x = x_test`, where `F = f + <s, .>` and `x+ = argmin F + t D(., c)`.
pub fn three_point_check(
    geom: GeometryKind,
    f: &ProxFunction,
    t: f64,
    s: &[f64],
    center: &[f64],
    x_test: &[f64],
    tol: f64,
) -> Result<ThreePointReport> {
    ensure_len(center.len(), x_test.len())?;
    if !f.contains(x_test) {
        return Err(Error::Domain(format!(
            "test point lies outside dom {}",
            f.name()
        )));
    }
    if geom == GeometryKind::Entropy && x_test.iter().any(|&v| v < 0.0) {
        return Err(Error::Domain(
            "entropy geometry needs a nonnegative test point".into(),
        ));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("t must be positive, got {t}")));
    }
    let x_plus = bregman_prox(geom, f, 1.0 / t, s, center)?;
    let lin = |x: &[f64]| x.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
    let big_f = |x: &[f64]| f.value(x) + lin(x);
    let dist = |u: &[f64], v: &[f64]| bregman_dist_lenient(geom, u, v);
    let diff: Vec<f64> = x_test.iter().zip(&x_plus).map(|(a, b)| a - b).collect();

    let lhs = big_f(x_test) + t * dist(x_test, center);
    let rhs = big_f(&x_plus)
        + t * dist(&x_plus, center)
        + t * dist(x_test, &x_plus)
        + 0.5 * f.modulus() * ref_norm_sq(geom, &diff);
    let residual = lhs - rhs;
    Ok(ThreePointReport {
        x_plus,
        residual,
        passed: residual >= -tol,
    })
}

/// One separable piece of a regularizer: a function on `len` consecutive
/// coordinates with its own geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct ProxTerm {
    pub len: usize,
    pub func: ProxFunction,
    pub geometry: GeometryKind,
}

impl ProxTerm {
    pub fn new(len: usize, func: ProxFunction, geometry: GeometryKind) -> Result<Self> {
        func.validate()?;
        if geometry == GeometryKind::Entropy {
            entropy_prox(&func, 1.0, &[0.0], &[1.0], &mut [0.0])?;
        }
        Ok(Self {
            len,
            func,
            geometry,
        })
    }

    pub fn euclidean(len: usize, func: ProxFunction) -> Result<Self> {
        Self::new(len, func, GeometryKind::Euclidean)
    }

    pub fn prox_into(&self, t: f64, s: &[f64], center: &[f64], out: &mut [f64]) -> Result<()> {
        bregman_prox_into(self.geometry, &self.func, t, s, center, out)
    }
}

/// A regularizer that is a sum of [`ProxTerm`]s over consecutive
/// coordinate segments; used for the dual term `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentedProx {
    parts: Vec<ProxTerm>,
}

impl SegmentedProx {
    pub fn new(parts: Vec<ProxTerm>) -> Result<Self> {
        if parts.is_empty() || parts.iter().any(|p| p.len == 0) {
            return Err(Error::InvalidParameter(
                "a segmented regularizer needs nonempty segments".into(),
            ));
        }
        Ok(Self { parts })
    }

    pub fn single(term: ProxTerm) -> Self {
        Self { parts: vec![term] }
    }

    pub fn parts(&self) -> &[ProxTerm] {
        &self.parts
    }

    pub fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.len).sum()
    }

    fn segments(&self) -> impl Iterator<Item = (std::ops::Range<usize>, &ProxTerm)> {
        let mut off = 0;
        self.parts.iter().map(move |p| {
            let r = off..off + p.len;
            off += p.len;
            (r, p)
        })
    }

    pub fn value(&self, y: &[f64]) -> f64 {
        self.segments().map(|(r, p)| p.func.value(&y[r])).sum()
    }

    pub fn contains(&self, y: &[f64]) -> bool {
        self.segments().all(|(r, p)| p.func.contains(&y[r]))
    }

    pub fn project_domain(&self, y: &mut [f64]) {
        for (r, p) in self.segments() {
            p.func.project_domain(&mut y[r]);
        }
    }

    pub fn prox_into(&self, t: f64, s: &[f64], center: &[f64], out: &mut [f64]) -> Result<()> {
        ensure_len(self.dim(), center.len())?;
        for (r, p) in self.segments() {
            p.prox_into(t, &s[r.clone()], &center[r.clone()], &mut out[r])?;
        }
        Ok(())
    }

    /// Euclidean prox of every segment regardless of its geometry.
    pub fn prox_euclidean_into(
        &self,
        t: f64,
        s: &[f64],
        center: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        ensure_len(self.dim(), center.len())?;
        for (r, p) in self.segments() {
            bregman_prox_into(
                GeometryKind::Euclidean,
                &p.func,
                t,
                &s[r.clone()],
                &center[r.clone()],
                &mut out[r],
            )?;
        }
        Ok(())
    }

    /// Sum of segment distances `D_Y(u, v)`.
    pub fn distance(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        ensure_len(self.dim(), u.len())?;
        ensure_len(self.dim(), v.len())?;
        self.segments()
            .map(|(r, p)| bregman_dist(p.geometry, &u[r.clone()], &v[r]))
            .sum()
    }

    pub(crate) fn distance_lenient(&self, u: &[f64], v: &[f64]) -> f64 {
        self.segments()
            .map(|(r, p)| bregman_dist_lenient(p.geometry, &u[r.clone()], &v[r]))
            .sum()
    }

    pub fn has_entropy(&self) -> bool {
        self.parts.iter().any(|p| p.geometry == GeometryKind::Entropy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn euclidean_distance_examples() {
        let g = BregmanGeometry::euclidean(2);
        assert_eq!(g.distance(&[0.3, -1.0], &[0.3, -1.0]).unwrap(), 0.0);
        assert_eq!(g.distance(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), 0.5);
    }

    #[test]
    fn entropy_distance_is_kl_on_simplex() {
        let g = BregmanGeometry::entropy(2);
        let d = g.distance(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        // scalar oracle: sum u ln(u / v)
        let oracle = 0.5 * (0.5f64 / 0.25).ln() + 0.5 * (0.5f64 / 0.75).ln();
        assert!(close(d, oracle, 1e-15));
        assert!(close(d, 0.143841, 1e-6));
        assert!(matches!(
            g.distance(&[0.5, 0.5], &[0.0, 1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn euclidean_zero_prox_is_gradient_step() {
        let x = bregman_prox(GeometryKind::Euclidean, &ProxFunction::Zero, 0.1, &[-20.0], &[1.0])
            .unwrap();
        assert_eq!(x, vec![3.0]);
    }

    #[test]
    fn l1_prox_matches_grid_search() {
        let f = ProxFunction::L1 { lambda: 1.0 };
        let x = bregman_prox(GeometryKind::Euclidean, &f, 0.5, &[2.0], &[1.0]).unwrap();
        // brute force: min |z| + 2 z + (z - 1)^2 / (2 * 0.5) on a fine grid
        let obj = |z: f64| z.abs() + 2.0 * z + (z - 1.0).powi(2) / (2.0 * 0.5);
        let best = (-40_000..=40_000)
            .map(|k| k as f64 * 1e-4)
            .min_by(|a, b| obj(*a).total_cmp(&obj(*b)))
            .unwrap();
        assert!(close(best, 0.0, 1e-4));
        assert!(close(x[0], best, 1e-4));
        assert_eq!(x[0], 0.0);
    }

    #[test]
    fn simplex_projection_splits_symmetrically() {
        let f = ProxFunction::Simplex { scale: 1.0 };
        let x = bregman_prox(GeometryKind::Euclidean, &f, 1.0, &[0.0, 0.0], &[0.6, 0.6]).unwrap();
        assert!(close(x[0], 0.5, 1e-15) && close(x[1], 0.5, 1e-15));
    }

    #[test]
    fn simplex_projection_ties_and_scale() {
        let mut v = vec![1.0, 1.0, 1.0, -5.0];
        project_simplex(&mut v, 3.0);
        assert_eq!(v, vec![1.0, 1.0, 1.0, 0.0]);
        let mut v = vec![10.0, 0.0, 0.0];
        project_simplex(&mut v, 2.0);
        assert_eq!(v, vec![2.0, 0.0, 0.0]);
    }

    #[test]
    fn entropy_simplex_prox_is_multiplicative_weights() {
        let f = ProxFunction::Simplex { scale: 1.0 };
        // linear term -s with s = (ln 2, 0): weights proportional to (1, 0.5)
        let s = [-(2f64.ln()), 0.0];
        let y = bregman_prox(GeometryKind::Entropy, &f, 1.0, &s, &[0.5, 0.5]).unwrap();
        assert!(close(y[0], 2.0 / 3.0, 1e-15));
        assert!(close(y[1], 1.0 / 3.0, 1e-15));
    }

    #[test]
    fn prox_rejects_bad_inputs() {
        let f = ProxFunction::Zero;
        assert!(matches!(
            bregman_prox(GeometryKind::Euclidean, &f, 0.0, &[1.0], &[1.0]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(matches!(
            bregman_prox(GeometryKind::Entropy, &f, 1.0, &[1.0], &[-1.0]),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            bregman_prox(
                GeometryKind::Entropy,
                &ProxFunction::Ball { radius: 1.0 },
                1.0,
                &[1.0],
                &[1.0]
            ),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cone_dual_ball_projection() {
        let f = ProxFunction::ConeDualBall {
            cone: Cone::NonnegOrthant,
            bound: 5.0,
        };
        let y = bregman_prox(GeometryKind::Euclidean, &f, 1.0, &[0.0; 3], &[-3.0, 6.0, 8.0])
            .unwrap();
        assert!(close(y[0], 0.0, 0.0));
        assert!(close(y[1], 3.0, 1e-14) && close(y[2], 4.0, 1e-14));
    }

    #[test]
    fn three_point_equality_at_minimizer() {
        let f = ProxFunction::L1 { lambda: 0.3 };
        let center = [0.4, -1.2, 2.0];
        let s = [0.1, 0.0, -0.5];
        let t = 2.0;
        let xp = bregman_prox(GeometryKind::Euclidean, &f, 1.0 / t, &s, &center).unwrap();
        let r = three_point_check(GeometryKind::Euclidean, &f, t, &s, &center, &xp, 1e-10).unwrap();
        assert!(r.residual.abs() <= 1e-10);
    }

    #[test]
    fn three_point_is_identity_for_quadratics() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let r = three_point_check(
                GeometryKind::Euclidean,
                &ProxFunction::Zero,
                1.7,
                &[0.0; 4],
                &c,
                &x,
                1e-10,
            )
            .unwrap();
            assert!(r.residual.abs() <= 1e-10, "{}", r.residual);
        }
    }

    #[test]
    fn three_point_rejects_points_outside_domain() {
        let r = three_point_check(
            GeometryKind::Euclidean,
            &ProxFunction::Nonneg,
            1.0,
            &[0.0],
            &[1.0],
            &[-1.0],
            1e-9,
        );
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn segmented_prox_applies_each_geometry() {
        let h = SegmentedProx::new(vec![
            ProxTerm::new(2, ProxFunction::Simplex { scale: 1.0 }, GeometryKind::Entropy).unwrap(),
            ProxTerm::euclidean(1, ProxFunction::Zero).unwrap(),
        ])
        .unwrap();
        let mut out = [0.0; 3];
        h.prox_into(1.0, &[-(2f64.ln()), 0.0, -3.0], &[0.5, 0.5, 1.0], &mut out)
            .unwrap();
        assert!(close(out[0], 2.0 / 3.0, 1e-15));
        assert!(close(out[2], 4.0, 1e-15));
        assert!(h.contains(&out));
        assert_eq!(h.value(&out), 0.0);
        assert_eq!(h.value(&[0.7, 0.7, 0.0]), f64::INFINITY);
    }

    #[test]
    fn entropy_term_rejects_unsupported_function() {
        assert!(ProxTerm::new(2, ProxFunction::Ball { radius: 1.0 }, GeometryKind::Entropy).is_err());
        assert!(ProxTerm::new(2, ProxFunction::Simplex { scale: 1.0 }, GeometryKind::Entropy).is_ok());
    }
}
