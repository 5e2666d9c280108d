//! Cumulants, Legendre transforms and the rate-distortion function, with
//! Monte Carlo estimators for their finite-`n` counterparts.
//!
//! The single-letter cumulant `Λ(t) = Σ_x p(x) log Σ_y p(y) e^{tσ(x,y)}`
//! is evaluated exactly on the truncated kernel support. Its Legendre
//! transform gives `R(α)`. Finite-`n` quantities are estimated by sampling
//! an x-graph and many y-graphs and averaging `σ⁽ⁿ⁾`.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

use crate::distortion::{sigma_n, DistortionFn};
use crate::empirical::{local_views, recolored_views, LocalView, SoftCondition, TypePair};
use crate::error::{Error, Result};
use crate::graph::{sample_colors, Geometry, ModelParams};
use crate::kernel::PoissonFiberKernel;
use crate::numeric::{compensated_sum, fmt_f64, golden_section_max, logsumexp, ExtReal};
use crate::rng::{self, StreamRng};

/// Default half-width of the Legendre search bracket.
pub const DEFAULT_T_MAX: f64 = 200.0;

const TAG_CUMULANT: u64 = 1;
const TAG_BRACKETS: u64 = 2;
const TAG_BALL: u64 = 3;
const TAG_INF_FLAG: u64 = 4;

/// A convex function of `t` with `Λ(0) = 0`.
pub trait Cumulant {
    fn value(&self, t: f64) -> f64;

    /// Derivative in `t`; right derivative where the function has kinks.
    fn slope(&self, t: f64) -> f64;

    /// Interval on which the function is defined.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        Ok(())
    }
}

/// A cumulant given by closures, mostly for closed-form examples.
pub struct FnCumulant<F, G> {
    pub value: F,
    pub slope: G,
}

impl<F: Fn(f64) -> f64, G: Fn(f64) -> f64> Cumulant for FnCumulant<F, G> {
    fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }

    fn slope(&self, t: f64) -> f64 {
        (self.slope)(t)
    }
}

/// `Λ(t)` on the truncated, renormalized kernel support.
///
/// Views that `σ` cannot tell apart are merged before evaluation, which
/// turns the double sum over the support into a sum over a handful of
/// classes for the built-in distortions.
#[derive(Debug, Clone)]
pub struct SingleLetter {
    mass: Vec<f64>,
    log_mass: Vec<f64>,
    /// row-major `σ(class_x, class_y)`
    sigma: Vec<f64>,
}

impl SingleLetter {
    pub fn new(sigma: &DistortionFn, kernel: &PoissonFiberKernel) -> Self {
        let masses = kernel.normalized_masses();
        let mut reps: Vec<&LocalView> = Vec::new();
        let mut mass: Vec<f64> = Vec::new();
        let mut by_key: BTreeMap<u64, usize> = BTreeMap::new();
        for (v, &m) in kernel.views().iter().zip(&masses) {
            if m == 0.0 {
                continue;
            }
            match sigma.class_key(v) {
                Some(key) => {
                    let slot = *by_key.entry(key).or_insert_with(|| {
                        reps.push(v);
                        mass.push(0.0);
                        reps.len() - 1
                    });
                    mass[slot] += m;
                }
                None => {
                    reps.push(v);
                    mass.push(m);
                }
            }
        }
        let c = reps.len();
        let mut table = Vec::with_capacity(c * c);
        for x in &reps {
            for y in &reps {
                table.push(sigma.eval(x, y));
            }
        }
        let log_mass = mass.iter().map(|m| m.ln()).collect();
        SingleLetter { mass, log_mass, sigma: table }
    }

    fn classes(&self) -> usize {
        self.mass.len()
    }

    fn row(&self, x: usize) -> &[f64] {
        let c = self.classes();
        &self.sigma[x * c..(x + 1) * c]
    }

    /// `Σ_x p(x) min_y σ(x, y)`: the infimum of `Λ'`.
    pub fn lower_endpoint(&self) -> f64 {
        compensated_sum((0..self.classes()).map(|x| self.mass[x] * self.row(x).iter().copied().fold(f64::INFINITY, f64::min)))
    }

    /// `Σ_x p(x) max_y σ(x, y)`: the supremum of `Λ'`.
    pub fn upper_endpoint(&self) -> f64 {
        compensated_sum((0..self.classes()).map(|x| self.mass[x] * self.row(x).iter().copied().fold(0.0, f64::max)))
    }

    /// `⟨σ, p⊗p⟩ = Λ'(0)`.
    pub fn mean(&self) -> f64 {
        compensated_sum((0..self.classes()).map(|x| {
            self.mass[x] * compensated_sum(self.row(x).iter().zip(&self.mass).map(|(s, q)| s * q))
        }))
    }
}

impl Cumulant for SingleLetter {
    fn value(&self, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        let mut buf = vec![0.0; self.classes()];
        compensated_sum((0..self.classes()).map(|x| {
            for (b, (s, lq)) in buf.iter_mut().zip(self.row(x).iter().zip(&self.log_mass)) {
                *b = lq + t * s;
            }
            self.mass[x] * logsumexp(&buf)
        }))
    }

    fn slope(&self, t: f64) -> f64 {
        let mut buf = vec![0.0; self.classes()];
        compensated_sum((0..self.classes()).map(|x| {
            let row = self.row(x);
            for (b, (s, lq)) in buf.iter_mut().zip(row.iter().zip(&self.log_mass)) {
                *b = lq + t * s;
            }
            let z = logsumexp(&buf);
            let tilted = compensated_sum(buf.iter().zip(row).map(|(b, s)| (b - z).exp() * s));
            self.mass[x] * tilted
        }))
    }
}

/// `Λ(t)` for one `t`.
pub fn single_letter_cumulant(t: f64, sigma: &DistortionFn, kernel: &PoissonFiberKernel) -> f64 {
    SingleLetter::new(sigma, kernel).value(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CumulantKind {
    EmpiricalN,
    SingleLetter,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CumulantPoint {
    pub t: f64,
    pub value: f64,
    /// Jackknife standard error; zero for exact values.
    pub stderr: f64,
}

/// A cumulant tabulated on a grid and interpolated linearly between
/// grid points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CumulantFn {
    pub kind: CumulantKind,
    pub n: Option<usize>,
    pub points: Vec<CumulantPoint>,
    pub convex: bool,
}

/// Slack allowed on second differences before a grid counts as non-convex.
pub const CONVEXITY_TOL: f64 = 1e-8;

impl CumulantFn {
    pub fn new(kind: CumulantKind, n: Option<usize>, mut points: Vec<CumulantPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("cumulant grid"));
        }
        if points.iter().any(|p| !p.t.is_finite() || !p.value.is_finite()) {
            return Err(Error::InvalidParams("cumulant grid must be finite".into()));
        }
        points.sort_by(|a, b| a.t.total_cmp(&b.t));
        if points.windows(2).any(|w| w[0].t == w[1].t) {
            return Err(Error::InvalidParams("duplicate t in cumulant grid".into()));
        }
        let mut f = CumulantFn { kind, n, points, convex: true };
        f.convex = f.worst_curvature().is_none();
        Ok(f)
    }

    /// Tabulate an exact cumulant.
    pub fn tabulate(c: &impl Cumulant, ts: &[f64]) -> Result<Self> {
        let points = ts.iter().map(|&t| CumulantPoint { t, value: c.value(t), stderr: 0.0 }).collect();
        Self::new(CumulantKind::SingleLetter, None, points)
    }

    /// First grid location whose slope change is below `−CONVEXITY_TOL`.
    fn worst_curvature(&self) -> Option<(f64, f64)> {
        let slopes: Vec<f64> = self.points.windows(2).map(|w| (w[1].value - w[0].value) / (w[1].t - w[0].t)).collect();
        slopes
            .windows(2)
            .zip(&self.points[1..])
            .map(|(s, p)| (p.t, s[1] - s[0]))
            .find(|&(_, d)| d < -CONVEXITY_TOL)
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.points.len().saturating_sub(2);
        self.points[1..].partition_point(|p| p.t <= t).min(last)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "value", "stderr"])?;
        for p in &self.points {
            out.write_record([fmt_f64(p.t), fmt_f64(p.value), fmt_f64(p.stderr)])?;
        }
        out.flush()?;
        Ok(())
    }
}

impl Cumulant for CumulantFn {
    fn value(&self, t: f64) -> f64 {
        if self.points.len() == 1 {
            return self.points[0].value;
        }
        let i = self.segment(t);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        a.value + (b.value - a.value) * (t - a.t) / (b.t - a.t)
    }

    fn slope(&self, t: f64) -> f64 {
        if self.points.len() == 1 {
            return 0.0;
        }
        let i = self.segment(t);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        (b.value - a.value) / (b.t - a.t)
    }

    fn domain(&self) -> (f64, f64) {
        (self.points[0].t, self.points[self.points.len() - 1].t)
    }

    fn validate(&self) -> Result<()> {
        if let Some((t, d)) = self.worst_curvature() {
            return Err(Error::NonConvex(t, d));
        }
        let (lo, hi) = self.domain();
        if !(lo <= 0.0 && 0.0 <= hi) {
            return Err(Error::InvalidParams("cumulant grid must contain t = 0".into()));
        }
        let zero = self.value(0.0);
        if zero.abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("cumulant is {zero} at t = 0")));
        }
        Ok(())
    }
}

/// Which values of `t` the Legendre supremum ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Both,
    /// `t ≤ 0` only: the transform of a sublevel constraint `⟨σ,μ⟩ ≤ α`.
    NonPositive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegendreOptions {
    pub t_max: f64,
    pub side: Side,
}

impl Default for LegendreOptions {
    fn default() -> Self {
        LegendreOptions { t_max: DEFAULT_T_MAX, side: Side::Both }
    }
}

/// `sup_t [tα − Λ(t)]`, or `+∞` when the slope of `Λ` never reaches `α`
/// inside `[−t_max, t_max]`.
///
/// The bracket grows by doubling away from zero until the slope passes
/// `α`, then golden-section search refines the maximizer. On a tabulated
/// cumulant the supremum is taken over the grid range.
pub fn legendre<C: Cumulant + ?Sized>(c: &C, alpha: f64, opts: &LegendreOptions) -> Result<ExtReal> {
    c.validate()?;
    if !alpha.is_finite() || !(opts.t_max > 0.0) {
        return Err(Error::InvalidParams("alpha must be finite and t_max positive".into()));
    }
    let (dom_lo, dom_hi) = c.domain();
    let lo = dom_lo.max(-opts.t_max);
    let hi = match opts.side {
        Side::Both => dom_hi.min(opts.t_max),
        Side::NonPositive => dom_hi.min(opts.t_max).min(0.0),
    };
    let objective = |t: f64| t * alpha - c.value(t);
    let tol = 1e-9 * (1.0 + alpha.abs());
    // derivative of the objective is α − Λ'(t)
    let d0 = alpha - c.slope(0.0);
    let d0_left = alpha - left_slope(c, 0.0, lo);

    let (a, b) = if d0 > tol && hi > 0.0 {
        match expand(|t| alpha - c.slope(t), 1.0, hi) {
            Some(bracket) => bracket,
            None => {
                if hi >= opts.t_max && dom_hi >= opts.t_max && alpha - c.slope(hi) > tol {
                    return Ok(ExtReal::PosInf);
                }
                (hi / 2.0, hi)
            }
        }
    } else if d0_left < -tol && lo < 0.0 {
        match expand(|t| c.slope(-t) - alpha, 1.0, -lo) {
            Some((p, q)) => (-q, -p),
            None => {
                if -lo >= opts.t_max && dom_lo <= -opts.t_max && left_slope(c, lo, lo) - alpha > tol {
                    return Ok(ExtReal::PosInf);
                }
                (lo, lo / 2.0)
            }
        }
    } else {
        return Ok(ExtReal::Finite(objective(0.0).max(0.0)));
    };
    let (_, best) = golden_section_max(objective, a.min(b), a.max(b), 1e-13);
    Ok(ExtReal::Finite(best.max(objective(0.0)).max(0.0)))
}

fn left_slope<C: Cumulant + ?Sized>(c: &C, t: f64, lo: f64) -> f64 {
    // smooth cumulants have equal one-sided slopes; grids need the segment to the left
    let h = 1e-9 * (1.0 + t.abs());
    if t - h < lo {
        return c.slope(t);
    }
    c.slope(t - h)
}

/// Double `t` from `start` until `g(t) ≤ 0` or `t` reaches `limit`.
/// Returns a bracket `(previous, current)` around the sign change.
fn expand(g: impl Fn(f64) -> f64, start: f64, limit: f64) -> Option<(f64, f64)> {
    let mut prev = 0.0;
    let mut t = start.min(limit);
    loop {
        if g(t) <= 0.0 {
            return Some((prev, t));
        }
        if t >= limit {
            return None;
        }
        prev = t;
        t = (2.0 * t).min(limit);
    }
}

/// How the y-graphs of a Monte Carlo pair relate to the x-graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    /// Same point cloud, independent colors; edges follow each coloring.
    #[default]
    SharedPoints,
    /// The x-graph's edge set with independent colors.
    SharedEdges,
    /// Fresh points and colors.
    Independent,
}

/// How a cumulant is estimated from the sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// `(1/n) log mean_k exp(n t σ⁽ⁿ⁾(x, y_k))`.
    #[default]
    Plain,
    /// `(1/n) Σ_j log mean_k exp(t σ(x_j, y_{k,j}))`, one log-mean per
    /// vertex. Exact in expectation only when the y-views are independent
    /// across vertices.
    PerVertex,
}

/// Monte Carlo sizes and sampling options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McConfig {
    /// Number of x-graphs `M`.
    pub outer: usize,
    /// Number of y-graphs per x-graph `K`.
    pub inner: usize,
    pub coupling: Coupling,
    pub estimator: Estimator,
    /// Reject x-graphs whose type pair is farther than this from the limit.
    pub soft_tau: Option<f64>,
    pub cap: u32,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            outer: 50,
            inner: 2000,
            coupling: Coupling::SharedPoints,
            estimator: Estimator::Plain,
            soft_tau: None,
            cap: crate::empirical::DEFAULT_CAP,
        }
    }
}

impl McConfig {
    pub fn with_reps(outer: usize, inner: usize) -> Self {
        McConfig { outer, inner, ..Self::default() }
    }

    fn check(&self) -> Result<()> {
        if self.outer == 0 || self.inner == 0 {
            return Err(Error::NoSamples);
        }
        if let Some(tau) = self.soft_tau {
            if !(tau > 0.0) {
                return Err(Error::InvalidParams(format!("soft conditioning tolerance {tau} must be positive")));
            }
        }
        Ok(())
    }
}

const MAX_REJECTIONS: usize = 10_000;

/// Draws x-graphs and their paired y-views.
struct Sampler<'a> {
    params: &'a ModelParams,
    sigma: &'a DistortionFn,
    cfg: &'a McConfig,
    soft: Option<SoftCondition>,
}

struct XSample {
    geometry: Geometry,
    graph: crate::graph::ColoredGeometricGraph,
    views: Vec<LocalView>,
}

impl<'a> Sampler<'a> {
    fn new(params: &'a ModelParams, sigma: &'a DistortionFn, cfg: &'a McConfig) -> Result<Self> {
        params.validate()?;
        cfg.check()?;
        let soft = match cfg.soft_tau {
            Some(tau) => Some(SoftCondition { target: TypePair::limit(params)?, tau }),
            None => None,
        };
        Ok(Sampler { params, sigma, cfg, soft })
    }

    fn x(&self, rng: &mut StreamRng) -> Result<XSample> {
        for _ in 0..MAX_REJECTIONS {
            let geometry = Geometry::sample(self.params.d, self.params.n, self.params.max_radius(), rng);
            let colors = sample_colors(self.params, rng);
            let graph = geometry.color(self.params, colors);
            if self.soft.as_ref().is_none_or(|s| s.accepts(&graph)) {
                let views = local_views(&graph, self.cfg.cap);
                return Ok(XSample { geometry, graph, views });
            }
        }
        Err(Error::InvalidParams(format!(
            "no x-graph within the soft-conditioning tolerance after {MAX_REJECTIONS} draws"
        )))
    }

    fn y(&self, x: &XSample, rng: &mut StreamRng) -> Vec<LocalView> {
        if self.sigma.color_only() {
            // σ ignores the counts, so the edges need not be built
            return sample_colors(self.params, rng).into_iter().map(|c| LocalView::new(c, Vec::new())).collect();
        }
        match self.cfg.coupling {
            Coupling::SharedPoints => {
                let colors = sample_colors(self.params, rng);
                local_views(&x.geometry.color(self.params, colors), self.cfg.cap)
            }
            Coupling::SharedEdges => recolored_views(&x.graph, &sample_colors(self.params, rng), self.cfg.cap),
            Coupling::Independent => {
                let geometry = Geometry::sample(self.params.d, self.params.n, self.params.max_radius(), rng);
                let colors = sample_colors(self.params, rng);
                local_views(&geometry.color(self.params, colors), self.cfg.cap)
            }
        }
    }

    /// `σ⁽ⁿ⁾(x, y_k)` for `k < inner`, or per-vertex values when `per_vertex`.
    fn inner(&self, tag: u64, m: u64, inner: usize, per_vertex: bool) -> Result<(XSample, Vec<Vec<f64>>)> {
        let x = self.x(&mut rng::stream(self.params.seed, &[tag, m, 0]))?;
        let rows = (0..inner as u64)
            .into_par_iter()
            .map(|k| {
                let ys = self.y(&x, &mut rng::stream(self.params.seed, &[tag, m, k + 1]));
                if per_vertex {
                    Ok(x.views.iter().zip(&ys).map(|(a, b)| self.sigma.eval(a, b)).collect())
                } else {
                    Ok(vec![sigma_n(&x.views, &ys, self.sigma)?])
                }
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        Ok((x, rows))
    }
}

/// `(1/n) log mean_k exp(n t s_k)` computed without overflow.
fn log_mean_exp_scaled(values: &[f64], t: f64, n: usize) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let nf = n as f64;
    let scaled: Vec<f64> = values.iter().map(|s| nf * t * s).collect();
    (logsumexp(&scaled) - (values.len() as f64).ln()) / nf
}

/// Leave-one-out jackknife standard error of a mean.
fn jackknife_se(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 2 {
        return f64::NAN;
    }
    let total = compensated_sum(xs.iter().copied());
    let loo: Vec<f64> = xs.iter().map(|x| (total - x) / (m - 1) as f64).collect();
    let mean = compensated_sum(loo.iter().copied()) / m as f64;
    let ss = compensated_sum(loo.iter().map(|v| (v - mean) * (v - mean)));
    ((m - 1) as f64 / m as f64 * ss).sqrt()
}

/// Empirical `H_n` on a grid of `t`, from one set of sampled pairs.
pub fn empirical_cumulant_grid(
    ts: &[f64],
    sigma: &DistortionFn,
    params: &ModelParams,
    cfg: &McConfig,
) -> Result<CumulantFn> {
    let sampler = Sampler::new(params, sigma, cfg)?;
    let per_vertex = cfg.estimator == Estimator::PerVertex;
    let n = params.n;
    // one row of per-t estimates per x-graph
    let rows: Vec<Vec<f64>> = (0..cfg.outer as u64)
        .into_par_iter()
        .map(|m| {
            let (_, samples) = sampler.inner(TAG_CUMULANT, m, cfg.inner, per_vertex)?;
            Ok(ts
                .iter()
                .map(|&t| {
                    if per_vertex {
                        per_vertex_estimate(&samples, t)
                    } else {
                        let s: Vec<f64> = samples.iter().map(|r| r[0]).collect();
                        log_mean_exp_scaled(&s, t, n)
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let points = ts
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let col: Vec<f64> = rows.iter().map(|r| r[i]).collect();
            CumulantPoint { t, value: compensated_sum(col.iter().copied()) / col.len() as f64, stderr: jackknife_se(&col) }
        })
        .collect();
    CumulantFn::new(CumulantKind::EmpiricalN, Some(n), points)
}

fn per_vertex_estimate(samples: &[Vec<f64>], t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let n = samples[0].len();
    let ln_k = (samples.len() as f64).ln();
    let mut buf = vec![0.0; samples.len()];
    compensated_sum((0..n).map(|j| {
        for (b, row) in buf.iter_mut().zip(samples) {
            *b = t * row[j];
        }
        logsumexp(&buf) - ln_k
    })) / n as f64
}

/// Empirical `H_n(t)` with its jackknife standard error.
pub fn empirical_cumulant(t: f64, sigma: &DistortionFn, params: &ModelParams, cfg: &McConfig) -> Result<CumulantPoint> {
    Ok(empirical_cumulant_grid(&[t], sigma, params, cfg)?.points[0])
}

/// Endpoints of the nontrivial range of `R`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Brackets {
    /// Monte Carlo mean over x-graphs of the sample minimum of `σ⁽ⁿ⁾`
    /// over `K` y-graphs.
    pub alpha_min: f64,
    pub alpha_min_stderr: f64,
    /// Same estimate with `2K` y-graphs; the difference to `alpha_min`
    /// shows how far the sample minimum is from the essential infimum.
    pub alpha_min_2k: f64,
    pub bias_diagnostic: f64,
    /// Infimum of `Λ'`, the exact single-letter lower endpoint.
    pub alpha_min_limit: f64,
    /// `⟨σ, p⊗p⟩` on the truncated support.
    pub alpha_av: f64,
    pub n: usize,
    pub outer: usize,
    pub inner: usize,
}

pub fn alpha_brackets(
    sigma: &DistortionFn,
    kernel: &PoissonFiberKernel,
    params: &ModelParams,
    cfg: &McConfig,
) -> Result<Brackets> {
    let sampler = Sampler::new(params, sigma, cfg)?;
    let k = cfg.inner;
    let minima: Vec<(f64, f64)> = (0..cfg.outer as u64)
        .into_par_iter()
        .map(|m| {
            let (_, samples) = sampler.inner(TAG_BRACKETS, m, 2 * k, false)?;
            let min_of = |rows: &[Vec<f64>]| rows.iter().map(|r| r[0]).fold(f64::INFINITY, f64::min);
            Ok((min_of(&samples[..k]), min_of(&samples)))
        })
        .collect::<Result<_>>()?;
    let first: Vec<f64> = minima.iter().map(|p| p.0).collect();
    let second: Vec<f64> = minima.iter().map(|p| p.1).collect();
    let mean = |xs: &[f64]| compensated_sum(xs.iter().copied()) / xs.len() as f64;
    let sl = SingleLetter::new(sigma, kernel);
    let alpha_min = mean(&first);
    let alpha_min_2k = mean(&second);
    Ok(Brackets {
        alpha_min,
        alpha_min_stderr: jackknife_se(&first),
        alpha_min_2k,
        bias_diagnostic: alpha_min - alpha_min_2k,
        alpha_min_limit: sl.lower_endpoint(),
        alpha_av: sl.mean(),
        n: params.n,
        outer: cfg.outer,
        inner: k,
    })
}

/// Direct estimate of `−(1/n) log Q(B(x, α))` for one sampled x-graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallExponent {
    pub alpha: f64,
    pub n: usize,
    pub trials: usize,
    pub hits: usize,
    pub estimate: ExtReal,
    /// Exponent interval from a Clopper–Pearson interval on the hit rate.
    pub ci_low: f64,
    pub ci_high: ExtReal,
    pub confidence: f64,
}

impl BallExponent {
    fn from_counts(alpha: f64, n: usize, hits: usize, trials: usize, confidence: f64) -> Self {
        let nf = n as f64;
        let tail = (1.0 - confidence) / 2.0;
        let k = trials as f64;
        let h = hits as f64;
        let p_lo = if hits == 0 { 0.0 } else { Beta::new(h, k - h + 1.0).expect("valid shape").inverse_cdf(tail) };
        let p_hi = if hits == trials { 1.0 } else { Beta::new(h + 1.0, k - h).expect("valid shape").inverse_cdf(1.0 - tail) };
        let exponent = |p: f64| if p >= 1.0 { ExtReal::Finite(0.0) } else if p <= 0.0 { ExtReal::PosInf } else { ExtReal::Finite(-p.ln() / nf) };
        BallExponent {
            alpha,
            n,
            trials,
            hits,
            estimate: exponent(h / k),
            ci_low: exponent(p_hi).to_f64(),
            ci_high: exponent(p_lo),
            confidence,
        }
    }

    /// Whether `value` lies in the confidence interval.
    pub fn covers(&self, value: f64) -> bool {
        self.ci_low <= value && ExtReal::Finite(value) <= self.ci_high
    }
}

/// Ball-exponent estimates from the first `K` y-graphs of one run, for
/// each `K` in `ks`. Smaller `K` use a prefix of the same draws.
pub fn mc_ball_exponent_ladder(
    params: &ModelParams,
    sigma: &DistortionFn,
    alpha: f64,
    ks: &[usize],
    cfg: &McConfig,
) -> Result<Vec<BallExponent>> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParams(format!("alpha {alpha} must be nonnegative")));
    }
    let max_k = ks.iter().copied().max().unwrap_or(0);
    if max_k == 0 || ks.contains(&0) {
        return Err(Error::NoSamples);
    }
    let cfg = McConfig { outer: 1, inner: max_k, ..cfg.clone() };
    let sampler = Sampler::new(params, sigma, &cfg)?;
    let (_, samples) = sampler.inner(TAG_BALL, 0, max_k, false)?;
    let hit: Vec<bool> = samples.iter().map(|r| r[0] <= alpha).collect();
    Ok(ks
        .iter()
        .map(|&k| {
            let hits = hit[..k].iter().filter(|&&h| h).count();
            if hits == 0 {
                log::warn!("no y-graph within distortion {alpha} among {k} draws; exponent reported as +inf");
            }
            BallExponent::from_counts(alpha, params.n, hits, k, 0.95)
        })
        .collect())
}

/// `−(1/n) log` of the fraction of `K` y-graphs in `B(x, α)`.
pub fn mc_ball_exponent(
    params: &ModelParams,
    sigma: &DistortionFn,
    alpha: f64,
    inner: usize,
    cfg: &McConfig,
) -> Result<BallExponent> {
    Ok(mc_ball_exponent_ladder(params, sigma, alpha, &[inner], cfg)?.remove(0))
}

/// Growth diagnostic for the exceptional lower endpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfDiagnostic {
    pub alpha: f64,
    pub ns: Vec<usize>,
    pub r_n: Vec<f64>,
    pub flag: bool,
}

/// Settings for the `n`-doubling diagnostic near the lower endpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct InfFlagConfig {
    pub params: ModelParams,
    pub mc: McConfig,
    /// Number of doublings after `params.n`.
    pub doublings: usize,
    /// Offset above the single-letter lower endpoint.
    pub delta: f64,
    /// `t`-grid for the finite-`n` cumulants; must include 0.
    pub t_grid: Vec<f64>,
}

/// `R_n(α)` at `α = lower endpoint + δ` along `n, 2n, 4n, …`, flagged when
/// it rises at every doubling and ends at least 50% above where it began.
pub fn alpha_min_inf_diagnostic(sigma: &DistortionFn, kernel: &PoissonFiberKernel, cfg: &InfFlagConfig) -> Result<InfDiagnostic> {
    let alpha = SingleLetter::new(sigma, kernel).lower_endpoint() + cfg.delta;
    let opts = LegendreOptions { t_max: DEFAULT_T_MAX, side: Side::NonPositive };
    let mut ns = Vec::new();
    let mut r_n = Vec::new();
    for i in 0..=cfg.doublings {
        let n = cfg.params.n << i;
        let params = cfg.params.with_n(n).with_seed(rng_seed(cfg.params.seed, i as u64));
        let h = empirical_cumulant_grid(&cfg.t_grid, sigma, &params, &cfg.mc)?;
        ns.push(n);
        r_n.push(legendre(&h, alpha, &opts)?.to_f64());
    }
    let rising = r_n.windows(2).all(|w| w[1] > w[0]);
    let flag = rising && r_n.len() > 1 && r_n[r_n.len() - 1] >= 1.5 * r_n[0];
    Ok(InfDiagnostic { alpha, ns, r_n, flag })
}

fn rng_seed(seed: u64, i: u64) -> u64 {
    rng::derive_seed(seed, &[TAG_INF_FLAG, i])
}

#[derive(Debug, Clone, Default)]
pub struct RdOptions {
    pub t_max: Option<f64>,
    /// Monte Carlo endpoint estimates to attach.
    pub brackets: Option<(ModelParams, McConfig)>,
    pub inf_flag: Option<InfFlagConfig>,
}

/// `R(α)` on a grid with its endpoints.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RDCurve {
    pub alphas: Vec<f64>,
    pub r_values: Vec<ExtReal>,
    /// Zero: the curve is computed exactly on the truncated support.
    pub stderr: Vec<f64>,
    /// Exact single-letter lower endpoint; `R = +∞` below it.
    pub alpha_min: f64,
    /// `⟨σ, p⊗p⟩`; `R = 0` from here on.
    pub alpha_av: f64,
    pub alpha_min_inf_flag: bool,
    pub brackets: Option<Brackets>,
    pub inf_diagnostic: Option<InfDiagnostic>,
}

/// `R(α) = sup_{t ≤ 0} [tα − Λ(t)]` for each `α` of an ascending grid.
pub fn rd_curve(sigma: &DistortionFn, kernel: &PoissonFiberKernel, alphas: &[f64], opts: &RdOptions) -> Result<RDCurve> {
    if alphas.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(Error::InvalidParams("alpha grid must be sorted ascending".into()));
    }
    let sl = SingleLetter::new(sigma, kernel);
    let lopts = LegendreOptions { t_max: opts.t_max.unwrap_or(DEFAULT_T_MAX), side: Side::NonPositive };
    let r_values = alphas.iter().map(|&a| legendre(&sl, a, &lopts)).collect::<Result<Vec<_>>>()?;
    let brackets = match &opts.brackets {
        Some((params, mc)) => Some(alpha_brackets(sigma, kernel, params, mc)?),
        None => None,
    };
    let inf_diagnostic = match &opts.inf_flag {
        Some(cfg) => Some(alpha_min_inf_diagnostic(sigma, kernel, cfg)?),
        None => None,
    };
    Ok(RDCurve {
        alphas: alphas.to_vec(),
        stderr: vec![0.0; alphas.len()],
        r_values,
        alpha_min: sl.lower_endpoint(),
        alpha_av: sl.mean(),
        alpha_min_inf_flag: inf_diagnostic.as_ref().is_some_and(|d| d.flag),
        brackets,
        inf_diagnostic,
    })
}

impl RDCurve {
    /// CSV with header `alpha,R,stderr`; `+∞` is written as `inf`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["alpha", "R", "stderr"])?;
        for ((a, r), s) in self.alphas.iter().zip(&self.r_values).zip(&self.stderr) {
            out.write_record([fmt_f64(*a), r.to_string(), fmt_f64(*s)])?;
        }
        out.flush()?;
        Ok(())
    }
}
