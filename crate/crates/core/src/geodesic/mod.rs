//! Conformal metrics e^{2f} (dq1² + dq2²) on the unit 2-torus: factor
//! evaluation with exact derivatives, geodesic flow on the unit cotangent
//! level H = 1/2, areas, pointwise C⁰ sandwiches, and bump mollification
//! of rough factors.

use crate::entropy::{self, EntropyEstimate, EstimatorMethod};
use crate::error::{Error, Result};
use crate::flow::{self, FieldKind, FlowConfig};
use crate::geometry::ResolutionValue;
use crate::ode::{self, State, StepOptions};
use crate::sampling;
use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Value};
use std::f64::consts::TAU;

pub type Vec2 = Vector2<f64>;
pub type Mat2 = Matrix2<f64>;

/// Version of the metric JSON documents under docs/schemas.
pub const METRIC_SCHEMA_VERSION: u64 = 1;

/// |H - 1/2| allowed of states claiming to sit on the unit cotangent level.
pub const ON_LEVEL_TOL: f64 = 1e-9;

/// Largest admissible mollification scale: windows must stay shorter than
/// half a period so no quadrature node is counted twice.
const MAX_MOLLIFY_SCALE: f64 = 0.45;

/// Grid used to certify sup-distance monotonicity of mollified sequences.
const SEQUENCE_CHECK_RESOLUTION: usize = 512;

/// Canonical chart representative in [0, 1). Guards against the rounding
/// of t - floor(t) up to 1.0 for tiny negative t.
fn wrap01(t: f64) -> f64 {
    let w = t - t.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

fn wrap_point(q: &Vec2) -> Vec2 {
    Vec2::new(wrap01(q.x), wrap01(q.y))
}

/// One mode of a finite cosine series: coefficient * cos(2π k·q + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierTerm {
    pub coefficient: f64,
    /// Integer mode vector, so periodicity is exact.
    pub frequency: [i32; 2],
    #[serde(default)]
    pub phase: f64,
}

/// Finite cosine series on the torus; closed-form derivatives of all orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierFactor {
    pub terms: Vec<FourierTerm>,
}

impl FourierFactor {
    fn validate(&self) -> Result<()> {
        for t in &self.terms {
            if !(t.coefficient.is_finite() && t.phase.is_finite()) {
                return Err(Error::spec("cosine terms must have finite entries"));
            }
        }
        Ok(())
    }

    fn jet(&self, q: &Vec2, order: usize) -> (f64, Vec2, Mat2) {
        let mut f = 0.0;
        let mut g = Vec2::zeros();
        let mut h = Mat2::zeros();
        for t in &self.terms {
            let k = Vec2::new(t.frequency[0] as f64, t.frequency[1] as f64);
            let arg = TAU * k.dot(q) + t.phase;
            let (s, c) = arg.sin_cos();
            f += t.coefficient * c;
            if order >= 1 {
                g -= k * (t.coefficient * TAU * s);
            }
            if order >= 2 {
                h -= k * k.transpose() * (t.coefficient * TAU * TAU * c);
            }
        }
        (f, g, h)
    }
}

/// Lacunary cosine sum offset + amplitude * Σ ratioᵏ (cos(2π baseᵏ q1) +
/// cos(2π baseᵏ q2)) / 2. With ratio * base > 1 the partial sums steepen
/// without bound as terms are added, so the factor is treated as values-only
/// data: no derivatives are exposed at any truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeierstrassFactor {
    /// Amplitude decay per term, in (0, 1).
    pub ratio: f64,
    /// Integer frequency growth per term; ratio * base must exceed 1.
    pub base: u32,
    /// Number of partial-sum terms kept.
    pub terms: u32,
    pub amplitude: f64,
    #[serde(default)]
    pub offset: f64,
}

impl WeierstrassFactor {
    fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::spec("amplitude ratio must lie in (0, 1)"));
        }
        if self.base < 2 {
            return Err(Error::spec("frequency base must be an integer >= 2"));
        }
        if self.ratio * self.base as f64 <= 1.0 {
            return Err(Error::spec("ratio * base must exceed 1"));
        }
        if self.terms == 0 {
            return Err(Error::spec("term count must be positive"));
        }
        // Keep every frequency base^k exactly representable.
        let top = (self.base as f64).powi(self.terms as i32 - 1);
        if top > 2f64.powi(52) {
            return Err(Error::spec("term count too large for exact frequencies"));
        }
        if !(self.amplitude.is_finite() && self.offset.is_finite()) {
            return Err(Error::spec("amplitude and offset must be finite"));
        }
        Ok(())
    }

    fn value(&self, q: &Vec2) -> f64 {
        let mut acc = 0.0;
        let mut a = 1.0;
        let mut freq = 1.0;
        for _ in 0..self.terms {
            acc += a * 0.5 * ((TAU * freq * q.x).cos() + (TAU * freq * q.y).cos());
            a *= self.ratio;
            freq *= self.base as f64;
        }
        self.offset + self.amplitude * acc
    }
}

/// exp(-1/(1-u²)) on (-1, 1), with first and second derivatives.
fn bump(u: f64) -> (f64, f64, f64) {
    let r = 1.0 - u * u;
    if r <= 1e-12 {
        return (0.0, 0.0, 0.0);
    }
    let w = 1.0 / r;
    let phi = (-w).exp();
    let s1 = -2.0 * u * w * w;
    let s2 = -2.0 * w * w - 8.0 * u * u * w * w * w;
    (phi, phi * s1, phi * (s2 + s1 * s1))
}

/// One quadrature node inside a bump window: wrapped grid index and the
/// weight with its derivatives in the evaluation coordinate.
struct Node {
    idx: usize,
    w: f64,
    dw: f64,
    d2w: f64,
}

/// Grid nodes within `scale` of the (wrapped) coordinate t, plus the sums
/// of the weights and their derivatives. Never empty: construction enforces
/// scale * m >= 8.
fn window(t: f64, scale: f64, m: usize) -> (Vec<Node>, [f64; 3]) {
    let mf = m as f64;
    let lo = ((t - scale) * mf).ceil() as i64;
    let hi = ((t + scale) * mf).floor() as i64;
    let mut nodes = Vec::with_capacity((hi - lo + 1).max(0) as usize);
    let mut sums = [0.0; 3];
    for k in lo..=hi {
        let u = (t - k as f64 / mf) / scale;
        let (w, dw_du, d2w_du) = bump(u);
        if w == 0.0 {
            continue;
        }
        let dw = dw_du / scale;
        let d2w = d2w_du / (scale * scale);
        sums[0] += w;
        sums[1] += dw;
        sums[2] += d2w;
        nodes.push(Node { idx: k.rem_euclid(m as i64) as usize, w, dw, d2w });
    }
    (nodes, sums)
}

/// Periodic bump average of a base factor sampled on a resolution² grid.
/// The smoothed value is the weight-normalized window sum N/D, which is C^∞
/// in q because the bump vanishes to all orders at the window edge; its
/// derivatives are the exact quotient-rule derivatives of that finite sum,
/// so constants pass through unchanged and derivative formulas need no
/// extra quadrature error beyond the grid sampling itself.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifiedFactor {
    base: Box<ConformalMetric>,
    scale: f64,
    resolution: usize,
    /// Base samples, row-major: cache[i * resolution + j] = f(i/m, j/m).
    cache: Vec<f64>,
}

impl MollifiedFactor {
    pub fn new(base: ConformalMetric, scale: f64, resolution: usize) -> Result<Self> {
        base.validate()?;
        if !(scale > 0.0 && scale <= MAX_MOLLIFY_SCALE) {
            return Err(Error::spec(format!(
                "mollification scale must lie in (0, {MAX_MOLLIFY_SCALE}]"
            )));
        }
        if !(16..=4096).contains(&resolution) {
            return Err(Error::spec("quadrature resolution must lie in [16, 4096]"));
        }
        if scale * (resolution as f64) < 8.0 {
            return Err(Error::Resolution(format!(
                "quadrature grid too coarse for scale {scale}: need scale * resolution >= 8"
            )));
        }
        let cache = base.grid_values(resolution);
        Ok(MollifiedFactor { base: Box::new(base), scale, resolution, cache })
    }

    pub fn base(&self) -> &ConformalMetric {
        &self.base
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Value, gradient and Hessian of N/D up to `order`; q already wrapped.
    fn jet(&self, q: &Vec2, order: usize) -> (f64, Vec2, Mat2) {
        let m = self.resolution;
        let (n1, s1) = window(q.x, self.scale, m);
        let (n2, s2) = window(q.y, self.scale, m);
        let (mut n, mut nx, mut ny) = (0.0, 0.0, 0.0);
        let (mut nxx, mut nxy, mut nyy) = (0.0, 0.0, 0.0);
        for a in &n1 {
            let row = &self.cache[a.idx * m..(a.idx + 1) * m];
            let (mut av, mut bv, mut cv) = (0.0, 0.0, 0.0);
            for b in &n2 {
                let c = row[b.idx];
                av += c * b.w;
                if order >= 1 {
                    bv += c * b.dw;
                }
                if order >= 2 {
                    cv += c * b.d2w;
                }
            }
            n += a.w * av;
            if order >= 1 {
                nx += a.dw * av;
                ny += a.w * bv;
            }
            if order >= 2 {
                nxx += a.d2w * av;
                nxy += a.dw * bv;
                nyy += a.w * cv;
            }
        }
        let d = s1[0] * s2[0];
        let f = n / d;
        if order == 0 {
            return (f, Vec2::zeros(), Mat2::zeros());
        }
        let dd = Vec2::new(s1[1] * s2[0], s1[0] * s2[1]);
        let g = (Vec2::new(nx, ny) - dd * f) / d;
        if order == 1 {
            return (f, g, Mat2::zeros());
        }
        let hn = Mat2::new(nxx, nxy, nxy, nyy);
        let hd = Mat2::new(s1[2] * s2[0], s1[1] * s2[1], s1[1] * s2[1], s1[0] * s2[2]);
        let h = (hn - hd * f - g * dd.transpose() - dd * g.transpose()) / d;
        (f, g, h)
    }

    /// Full r×r sweep of values, factored through the separable structure of
    /// the window sums (one pass per axis) instead of r² window products.
    fn grid(&self, r: usize) -> Vec<f64> {
        let m = self.resolution;
        let rf = r as f64;
        // Transposed cache so both passes run down contiguous columns.
        let mut cache_t = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                cache_t[j * m + i] = self.cache[i * m + j];
            }
        }
        let cols: Vec<(Vec<Node>, [f64; 3])> =
            (0..r).map(|j2| window(j2 as f64 / rf, self.scale, m)).collect();
        // tmp[j2 * m + i] = Σ_j cache[i, j] w2_j for the j2-th column window.
        let mut tmp = vec![0.0; r * m];
        for (j2, (nodes, _)) in cols.iter().enumerate() {
            let out = &mut tmp[j2 * m..(j2 + 1) * m];
            for nd in nodes {
                let col = &cache_t[nd.idx * m..(nd.idx + 1) * m];
                let w = nd.w;
                for i in 0..m {
                    out[i] += w * col[i];
                }
            }
        }
        let mut out = vec![0.0; r * r];
        for i2 in 0..r {
            let (nodes, s1) = window(i2 as f64 / rf, self.scale, m);
            let row = &mut out[i2 * r..(i2 + 1) * r];
            for (j2, cell) in row.iter_mut().enumerate() {
                let col = &tmp[j2 * m..(j2 + 1) * m];
                let mut acc = 0.0;
                for nd in &nodes {
                    acc += nd.w * col[nd.idx];
                }
                *cell = acc / (s1[0] * cols[j2].1[0]);
            }
        }
        out
    }
}

/// A metric e^{2f} (dq1² + dq2²) on the torus [0,1)², described by its
/// conformal factor f.
#[derive(Debug, Clone, PartialEq)]
pub enum ConformalMetric {
    Fourier(FourierFactor),
    Weierstrass(WeierstrassFactor),
    Mollified(MollifiedFactor),
}

impl ConformalMetric {
    /// The flat unit-area torus, f = 0.
    pub fn flat() -> Self {
        ConformalMetric::Fourier(FourierFactor { terms: Vec::new() })
    }

    pub fn constant(c: f64) -> Self {
        ConformalMetric::Fourier(FourierFactor {
            terms: vec![FourierTerm { coefficient: c, frequency: [0, 0], phase: 0.0 }],
        })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ConformalMetric::Fourier(f) => f.validate(),
            ConformalMetric::Weierstrass(w) => w.validate(),
            // Construction already validated, and the cache is private.
            ConformalMetric::Mollified(_) => Ok(()),
        }
    }

    /// Whether derivatives (hence the geodesic field) are available.
    pub fn is_smooth(&self) -> bool {
        !matches!(self, ConformalMetric::Weierstrass(_))
    }

    pub fn value(&self, q: &Vec2) -> f64 {
        let q = wrap_point(q);
        match self {
            ConformalMetric::Fourier(f) => f.jet(&q, 0).0,
            ConformalMetric::Weierstrass(w) => w.value(&q),
            ConformalMetric::Mollified(m) => m.jet(&q, 0).0,
        }
    }

    fn smooth_jet(&self, q: &Vec2, order: usize) -> Result<(f64, Vec2, Mat2)> {
        let q = wrap_point(q);
        match self {
            ConformalMetric::Fourier(f) => Ok(f.jet(&q, order)),
            ConformalMetric::Weierstrass(_) => Err(Error::Unsupported(
                "derivatives of a values-only conformal factor".to_string(),
            )),
            ConformalMetric::Mollified(m) => Ok(m.jet(&q, order)),
        }
    }

    pub fn gradient(&self, q: &Vec2) -> Result<Vec2> {
        Ok(self.smooth_jet(q, 1)?.1)
    }

    pub fn hessian(&self, q: &Vec2) -> Result<Mat2> {
        Ok(self.smooth_jet(q, 2)?.2)
    }

    /// Values on the r×r grid (i/r, j/r), row-major in the first coordinate.
    pub fn grid_values(&self, r: usize) -> Vec<f64> {
        if let ConformalMetric::Mollified(m) = self {
            return m.grid(r);
        }
        let rf = r as f64;
        let mut out = Vec::with_capacity(r * r);
        for i in 0..r {
            for j in 0..r {
                out.push(self.value(&Vec2::new(i as f64 / rf, j as f64 / rf)));
            }
        }
        out
    }

    /// The factor f + c; smoothing commutes with adding constants, so a
    /// mollified factor is rebuilt over the shifted base.
    pub fn shifted(&self, c: f64) -> Result<Self> {
        Ok(match self {
            ConformalMetric::Fourier(f) => {
                let mut terms = f.terms.clone();
                terms.push(FourierTerm { coefficient: c, frequency: [0, 0], phase: 0.0 });
                ConformalMetric::Fourier(FourierFactor { terms })
            }
            ConformalMetric::Weierstrass(w) => {
                let mut w = w.clone();
                w.offset += c;
                ConformalMetric::Weierstrass(w)
            }
            ConformalMetric::Mollified(m) => ConformalMetric::Mollified(
                MollifiedFactor::new(m.base.shifted(c)?, m.scale, m.resolution)?,
            ),
        })
    }
}

/// Point of the cotangent bundle T*T² in the global chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CotangentState {
    #[serde(with = "crate::serde_util::vec2")]
    pub q: Vec2,
    #[serde(with = "crate::serde_util::vec2")]
    pub p: Vec2,
}

impl CotangentState {
    /// The unit-level covector at q with direction `angle`: |p| = e^{f(q)}.
    pub fn unit_level(metric: &ConformalMetric, q: &Vec2, angle: f64) -> Self {
        let q = wrap_point(q);
        let scale = metric.value(&q).exp();
        CotangentState { q, p: Vec2::new(angle.cos(), angle.sin()) * scale }
    }

    /// Kinetic energy e^{-2f(q)} |p|² / 2; equals 1/2 on the unit level.
    pub fn hamiltonian(&self, metric: &ConformalMetric) -> f64 {
        0.5 * (-2.0 * metric.value(&self.q)).exp() * self.p.norm_squared()
    }

    fn assert_on_level(&self, metric: &ConformalMetric) -> Result<f64> {
        let drift = (self.hamiltonian(metric) - 0.5).abs();
        if !(drift <= ON_LEVEL_TOL) {
            return Err(Error::Precondition(format!(
                "state must lie on the unit cotangent level (|H - 1/2| = {drift:.3e})"
            )));
        }
        Ok(drift)
    }
}

fn split_state(y: &State<4>) -> (Vec2, Vec2) {
    (Vec2::new(y[0], y[1]), Vec2::new(y[2], y[3]))
}

fn field_raw(metric: &ConformalMetric, y: &State<4>) -> Result<State<4>> {
    let (q, p) = split_state(y);
    let (f, g, _) = metric.smooth_jet(&q, 1)?;
    let e = (-2.0 * f).exp();
    let p2 = p.norm_squared();
    Ok(SVector::<f64, 4>::new(e * p.x, e * p.y, p2 * e * g.x, p2 * e * g.y))
}

fn jacobian_raw(metric: &ConformalMetric, y: &State<4>) -> Result<SMatrix<f64, 4, 4>> {
    let (q, p) = split_state(y);
    let (f, g, h) = metric.smooth_jet(&q, 2)?;
    let e = (-2.0 * f).exp();
    let p2 = p.norm_squared();
    let mut j = SMatrix::<f64, 4, 4>::zeros();
    j.fixed_view_mut::<2, 2>(0, 0).copy_from(&(p * g.transpose() * (-2.0 * e)));
    j.fixed_view_mut::<2, 2>(0, 2).copy_from(&(Mat2::identity() * e));
    j.fixed_view_mut::<2, 2>(2, 0)
        .copy_from(&((h - g * g.transpose() * 2.0) * (p2 * e)));
    j.fixed_view_mut::<2, 2>(2, 2).copy_from(&(g * p.transpose() * (2.0 * e)));
    Ok(j)
}

/// Right-hand side of the geodesic equations in Hamiltonian form:
/// q' = e^{-2f} p, p' = |p|² e^{-2f} ∇f.
pub fn geodesic_field(metric: &ConformalMetric, state: &CotangentState) -> Result<SVector<f64, 4>> {
    metric.validate()?;
    field_raw(metric, &SVector::<f64, 4>::new(state.q.x, state.q.y, state.p.x, state.p.y))
}

/// Derivative of the geodesic field with respect to (q, p); drives the
/// linearized flow in the stretch estimator. Its trace vanishes.
pub fn geodesic_jacobian(
    metric: &ConformalMetric,
    state: &CotangentState,
) -> Result<SMatrix<f64, 4, 4>> {
    metric.validate()?;
    jacobian_raw(metric, &SVector::<f64, 4>::new(state.q.x, state.q.y, state.p.x, state.p.y))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaReport {
    /// ∫ e^{2f} dq over the unit square, at the finer resolution.
    pub value: f64,
    pub refinement: Vec<ResolutionValue>,
}

fn grid_mean_exp(metric: &ConformalMetric, r: usize) -> f64 {
    let vals = metric.grid_values(r);
    vals.iter().map(|f| (2.0 * f).exp()).sum::<f64>() / vals.len() as f64
}

/// Total area of the metric by periodic trapezoid quadrature (which on a
/// periodic integrand is the plain grid mean), reported at the requested
/// resolution together with a half-resolution value for refinement checks.
pub fn metric_area(metric: &ConformalMetric, resolution: usize) -> Result<AreaReport> {
    metric.validate()?;
    if !(16..=8192).contains(&resolution) {
        return Err(Error::spec("area resolution must lie in [16, 8192]"));
    }
    let coarse = (resolution / 2).max(16);
    let mut refinement = Vec::new();
    if coarse < resolution {
        refinement.push(ResolutionValue { resolution: coarse, value: grid_mean_exp(metric, coarse) });
    }
    let value = grid_mean_exp(metric, resolution);
    refinement.push(ResolutionValue { resolution, value });
    Ok(AreaReport { value, refinement })
}

/// Rescales the factor so the total area is 1: f ↦ f - log(area)/2.
pub fn normalized_to_unit_area(
    metric: &ConformalMetric,
    resolution: usize,
) -> Result<ConformalMetric> {
    let area = metric_area(metric, resolution)?.value;
    metric.shifted(-0.5 * area.ln())
}

/// Outcome of the pointwise factor comparison |f' - f| < δ, which for
/// conformal metrics is equivalent to e^{-2δ} g < g' < e^{2δ} g.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub pass: bool,
    pub delta: f64,
    pub resolution: usize,
    /// max |f' - f| over the grid.
    pub max_gap: f64,
    /// delta - max_gap; positive iff the check passes.
    pub worst_margin: f64,
}

fn grid_sup_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn sandwich_check(
    g: &ConformalMetric,
    g_prime: &ConformalMetric,
    delta: f64,
    resolution: usize,
) -> Result<SandwichReport> {
    g.validate()?;
    g_prime.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Precondition("sandwich width must be positive".to_string()));
    }
    if !(2..=8192).contains(&resolution) {
        return Err(Error::spec("sandwich resolution must lie in [2, 8192]"));
    }
    let max_gap = grid_sup_gap(&g.grid_values(resolution), &g_prime.grid_values(resolution));
    Ok(SandwichReport {
        pass: max_gap < delta,
        delta,
        resolution,
        max_gap,
        worst_margin: delta - max_gap,
    })
}

/// Bump smoothings of one base factor at strictly decreasing scales. The
/// returned members use the given quadrature resolution; their grid
/// sup-distances to the base are certified to decrease strictly along the
/// list, so the tail converges to the base in C⁰.
pub fn mollify_sequence(
    base: &ConformalMetric,
    scales: &[f64],
    resolution: usize,
) -> Result<Vec<ConformalMetric>> {
    base.validate()?;
    let ordered = scales.windows(2).all(|w| w[0] > w[1]);
    if scales.is_empty() || !ordered || !scales.iter().all(|s| *s > 0.0 && s.is_finite()) {
        return Err(Error::Precondition(
            "mollification scales must be positive and strictly decreasing".to_string(),
        ));
    }
    let members: Vec<ConformalMetric> = scales
        .iter()
        .map(|&s| Ok(ConformalMetric::Mollified(MollifiedFactor::new(base.clone(), s, resolution)?)))
        .collect::<Result<_>>()?;
    let base_grid = base.grid_values(SEQUENCE_CHECK_RESOLUTION);
    let mut last = f64::INFINITY;
    for (member, &scale) in members.iter().zip(scales) {
        let dist = grid_sup_gap(&member.grid_values(SEQUENCE_CHECK_RESOLUTION), &base_grid);
        if !(dist < last) {
            return Err(Error::Resolution(format!(
                "sup-distance to the base failed to decrease at scale {scale}: \
                 {dist:.6e} after {last:.6e}; refine the quadrature"
            )));
        }
        last = dist;
    }
    Ok(members)
}

/// Largest certified scale whose smoothing stays within `delta` of the base
/// in grid sup-norm, found by bisection over (8/resolution, 0.45]. Errors if
/// even the smallest admissible scale misses the tolerance.
pub fn mollify_threshold(
    base: &ConformalMetric,
    delta: f64,
    resolution: usize,
    check_resolution: usize,
) -> Result<f64> {
    base.validate()?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::Precondition("tolerance must be positive".to_string()));
    }
    let base_grid = base.grid_values(check_resolution);
    let gap = |scale: f64| -> Result<f64> {
        let m = MollifiedFactor::new(base.clone(), scale, resolution)?;
        Ok(grid_sup_gap(&m.grid(check_resolution), &base_grid))
    };
    let mut lo = 8.0 / resolution as f64;
    let mut hi = MAX_MOLLIFY_SCALE;
    if gap(lo)? >= delta {
        return Err(Error::Resolution(format!(
            "the smallest scale resolvable at quadrature resolution {resolution} \
             already deviates by more than {delta}"
        )));
    }
    if gap(hi)? < delta {
        return Ok(hi);
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? < delta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicSample {
    pub t: f64,
    pub state: CotangentState,
}

/// One geodesic trajectory with conservation diagnostics. Positions are left
/// unwrapped so displacement reads off directly; wrap with the chart when
/// comparing torus points.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicRun {
    pub samples: Vec<GeodesicSample>,
    /// sup |H - 1/2| over accepted steps, measured before projection.
    pub max_h_drift: f64,
    /// sup |p - p(0)|_∞ over accepted steps; a conservation check for
    /// translation-invariant factors, where the momentum is constant.
    pub max_momentum_drift: f64,
    pub accepted_steps: u64,
    pub rejected_steps: u64,
    pub final_state: CotangentState,
}

fn step_options(config: &FlowConfig) -> StepOptions {
    StepOptions {
        rtol: config.rtol,
        atol: config.atol,
        h_max: config.max_step,
        ..StepOptions::default()
    }
}

fn state_of(y: &State<4>) -> CotangentState {
    CotangentState { q: Vec2::new(y[0], y[1]), p: Vec2::new(y[2], y[3]) }
}

/// Runs the geodesic flow from a unit-level state for `config.horizon`,
/// recording samples every `config.sample_interval` and projecting the
/// momentum back to the level whenever |H - 1/2| exceeds the threshold.
pub fn integrate_geodesic(
    metric: &ConformalMetric,
    start: &CotangentState,
    config: &FlowConfig,
) -> Result<GeodesicRun> {
    metric.validate()?;
    if !metric.is_smooth() {
        return Err(Error::Unsupported(
            "geodesic flow of a values-only conformal factor".to_string(),
        ));
    }
    config.validate()?;
    start.assert_on_level(metric)?;
    let start_sample = GeodesicSample { t: 0.0, state: *start };
    if config.horizon == 0.0 {
        return Ok(GeodesicRun {
            samples: vec![start_sample],
            max_h_drift: 0.0,
            max_momentum_drift: 0.0,
            accepted_steps: 0,
            rejected_steps: 0,
            final_state: *start,
        });
    }
    let times = flow::uniform_times(config.horizon, config.sample_interval);
    let y0 = SVector::<f64, 4>::new(start.q.x, start.q.y, start.p.x, start.p.y);
    let p0 = start.p;
    let mut samples = vec![start_sample];
    let mut max_h_drift: f64 = 0.0;
    let mut max_momentum_drift: f64 = 0.0;
    let mut next = 0usize;
    let (end, stats) = ode::integrate(
        |y| field_raw(metric, y),
        0.0,
        y0,
        config.horizon,
        &times,
        &step_options(config),
        |t, y| {
            let state = state_of(y);
            let h = state.hamiltonian(metric);
            let drift = (h - 0.5).abs();
            max_h_drift = max_h_drift.max(drift);
            max_momentum_drift = max_momentum_drift
                .max((state.p.x - p0.x).abs())
                .max((state.p.y - p0.y).abs());
            if next < times.len() && t == times[next] {
                samples.push(GeodesicSample { t, state });
                next += 1;
            }
            if drift > config.projection_threshold {
                let s = 1.0 / (2.0 * h).sqrt();
                y[2] *= s;
                y[3] *= s;
            }
            Ok(())
        },
    )?;
    Ok(GeodesicRun {
        samples,
        max_h_drift,
        max_momentum_drift,
        accepted_steps: stats.accepted,
        rejected_steps: stats.rejected,
        final_state: state_of(&end),
    })
}

const TORUS_SAMPLING_NOTE: &str =
    "uniform in position and momentum direction on the unit level; conformal \
     area weighting recorded, not applied";

/// One linearized run: ln |v(T)| accumulated across renormalizations.
fn stretch_sample(
    metric: &ConformalMetric,
    config: &FlowConfig,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let mut rng = sampling::rng_for(seed, index);
    let q = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
    let angle = TAU * rng.gen::<f64>();
    let start = CotangentState::unit_level(metric, &q, angle);
    let v0 = sampling::unit_direction(&mut rng);
    let mut y0 = SVector::<f64, 8>::zeros();
    y0.fixed_rows_mut::<4>(0)
        .copy_from(&SVector::<f64, 4>::new(start.q.x, start.q.y, start.p.x, start.p.y));
    y0.fixed_rows_mut::<4>(4).copy_from(&v0);

    let mut renorms = flow::uniform_times(config.horizon, config.renorm_interval);
    renorms.pop();
    let mut log_sum = 0.0;
    let mut next = 0usize;
    let (end, _) = ode::integrate(
        |y: &State<8>| {
            let q = Vec2::new(y[0], y[1]);
            let p = Vec2::new(y[2], y[3]);
            let (f, g, h) = metric.smooth_jet(&q, 2)?;
            let e = (-2.0 * f).exp();
            let p2 = p.norm_squared();
            let vq = Vec2::new(y[4], y[5]);
            let vp = Vec2::new(y[6], y[7]);
            let dq = p * e;
            let dp = g * (p2 * e);
            let dvq = p * (-2.0 * e * g.dot(&vq)) + vp * e;
            let dvp = (h * vq - g * (2.0 * g.dot(&vq))) * (p2 * e) + g * (2.0 * e * p.dot(&vp));
            let mut dy = SVector::<f64, 8>::zeros();
            dy.fixed_rows_mut::<2>(0).copy_from(&dq);
            dy.fixed_rows_mut::<2>(2).copy_from(&dp);
            dy.fixed_rows_mut::<2>(4).copy_from(&dvq);
            dy.fixed_rows_mut::<2>(6).copy_from(&dvp);
            Ok(dy)
        },
        0.0,
        y0,
        config.horizon,
        &renorms,
        &step_options(config),
        |t, y| {
            let f = metric.value(&Vec2::new(y[0], y[1]));
            let h = 0.5 * (-2.0 * f).exp() * (y[2] * y[2] + y[3] * y[3]);
            if (h - 0.5).abs() > config.projection_threshold {
                let s = 1.0 / (2.0 * h).sqrt();
                y[2] *= s;
                y[3] *= s;
            }
            if next < renorms.len() && t == renorms[next] {
                let nrm = y.fixed_rows::<4>(4).norm();
                if !(nrm > 0.0 && nrm.is_finite()) {
                    return Err(Error::Integration {
                        t,
                        detail: "stretch vector collapsed during renormalization".to_string(),
                    });
                }
                log_sum += nrm.ln();
                let scaled = y.fixed_rows::<4>(4) / nrm;
                y.fixed_rows_mut::<4>(4).copy_from(&scaled);
                next += 1;
            }
            Ok(())
        },
    )?;
    Ok((log_sum + end.fixed_rows::<4>(4).norm().ln()) / config.horizon)
}

/// Largest-Lyapunov estimate for the geodesic flow: the entropy estimator's
/// stretch ensemble with starts uniform in (position, momentum angle) on the
/// unit cotangent level.
pub fn geodesic_entropy(
    metric: &ConformalMetric,
    config: &FlowConfig,
    ensemble: usize,
    seed: u64,
) -> Result<EntropyEstimate> {
    metric.validate()?;
    if !metric.is_smooth() {
        return Err(Error::Unsupported(
            "stretch estimates need a differentiable conformal factor".to_string(),
        ));
    }
    if ensemble < 2 {
        return Err(Error::Precondition(
            "a Lyapunov ensemble needs at least two samples".to_string(),
        ));
    }
    config.validate()?;
    if config.horizon <= 0.0 {
        return Err(Error::Precondition(
            "a Lyapunov estimate needs a positive horizon".to_string(),
        ));
    }

    let outcomes: Vec<(usize, Result<f64>)> = (0..ensemble)
        .into_par_iter()
        .map(|i| (i, stretch_sample(metric, config, seed, i as u64)))
        .collect();

    let mut kept = Vec::with_capacity(ensemble);
    let mut excluded = 0usize;
    for (i, r) in outcomes {
        match r {
            Ok(v) => kept.push((i, v)),
            Err(e) if entropy::excludable(&e) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if kept.is_empty() {
        return Err(Error::Integration {
            t: 0.0,
            detail: "every ensemble member failed to integrate".to_string(),
        });
    }
    let (per_sample, value, stderr) = entropy::aggregate(kept);
    Ok(EntropyEstimate {
        method: EstimatorMethod::Lyapunov,
        field: FieldKind::Hamiltonian,
        value,
        stderr,
        ensemble,
        per_sample,
        excluded,
        unreliable: 10 * excluded > ensemble,
        seed,
        horizon: config.horizon,
        renorm_interval: Some(config.renorm_interval),
        separation: None,
        segments: None,
        separated_initial: None,
        separated_final: None,
        sampling_measure: TORUS_SAMPLING_NOTE.to_string(),
    })
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MollifiedDoc {
    base: Value,
    scale: f64,
    resolution: usize,
}

fn metric_to_value(metric: &ConformalMetric) -> Value {
    use crate::serde_util::tagged;
    match metric {
        ConformalMetric::Fourier(f) => {
            tagged("fourier", serde_json::to_value(f).expect("serializable"))
        }
        ConformalMetric::Weierstrass(w) => {
            tagged("weierstrass", serde_json::to_value(w).expect("serializable"))
        }
        ConformalMetric::Mollified(m) => tagged(
            "mollified",
            serde_json::to_value(MollifiedDoc {
                base: metric_to_value(&m.base),
                scale: m.scale,
                resolution: m.resolution,
            })
            .expect("serializable"),
        ),
    }
}

fn metric_from_value(v: Value) -> Result<ConformalMetric> {
    let Value::Object(mut obj) = v else {
        return Err(Error::spec("metric specification must be a JSON object"));
    };
    let kind = match obj.remove("kind") {
        Some(Value::String(s)) => s,
        _ => return Err(Error::spec("metric specification needs a string `kind` field")),
    };
    let rest = Value::Object(obj);
    let fail = |e: serde_json::Error| Error::spec(format!("invalid `{kind}` metric: {e}"));
    let metric = match kind.as_str() {
        "fourier" => {
            let d: FourierFactor = serde_json::from_value(rest).map_err(fail)?;
            ConformalMetric::Fourier(d)
        }
        "weierstrass" => {
            let d: WeierstrassFactor = serde_json::from_value(rest).map_err(fail)?;
            ConformalMetric::Weierstrass(d)
        }
        "mollified" => {
            let d: MollifiedDoc = serde_json::from_value(rest).map_err(fail)?;
            ConformalMetric::Mollified(MollifiedFactor::new(
                metric_from_value(d.base)?,
                d.scale,
                d.resolution,
            )?)
        }
        other => return Err(Error::spec(format!("unknown metric kind `{other}`"))),
    };
    metric.validate()?;
    Ok(metric)
}

/// Versioned metric document {"version": 1, "kind": ..., ...}.
pub fn metric_to_json(metric: &ConformalMetric) -> Value {
    crate::serde_util::add_version(metric_to_value(metric), METRIC_SCHEMA_VERSION)
}

pub fn metric_from_json(v: Value) -> Result<ConformalMetric> {
    metric_from_value(crate::serde_util::strip_version(v, "metric", METRIC_SCHEMA_VERSION)?)
}

pub fn metric_from_str(s: &str) -> Result<ConformalMetric> {
    let v: Value =
        serde_json::from_str(s).map_err(|e| Error::spec(format!("invalid JSON: {e}")))?;
    metric_from_json(v)
}
