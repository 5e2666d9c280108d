//! Empirical objects computed from realized graphs: local views, the
//! empirical measures built on them, the edge-pair measure and the map
//! `Ψ` from a measure on local views to its type pair `(π, ω)`.

use std::collections::BTreeMap;
use std::fmt::Debug;
use std::io::Write;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, Poisson};

use crate::error::{Error, Result};
use crate::graph::{Alphabet, ColoredGeometricGraph, ModelParams};
use crate::numeric::{compensated_sum, fmt_f64};

/// Default per-color truncation cap for neighbor counts.
pub const DEFAULT_CAP: u32 = 30;

/// A vertex's color together with its neighbor-color tally, each entry
/// saturated at the truncation cap.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LocalView {
    pub color: usize,
    pub counts: Vec<u32>,
}

impl LocalView {
    pub fn new(color: usize, counts: Vec<u32>) -> Self {
        LocalView { color, counts }
    }

    pub fn degree(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }

    /// Canonical rendering `color|c_1,…,c_k`.
    pub fn render(&self, alphabet: &Alphabet) -> String {
        let counts: Vec<String> = self.counts.iter().map(u32::to_string).collect();
        format!("{}|{}", alphabet.label(self.color), counts.join(","))
    }

    pub fn parse(s: &str, alphabet: &Alphabet) -> Result<Self> {
        let (label, counts) = s
            .trim()
            .split_once('|')
            .ok_or_else(|| Error::Parse(format!("local view {s:?} lacks `|`")))?;
        let color = alphabet
            .index_of(label)
            .ok_or_else(|| Error::Parse(format!("unknown color {label:?}")))?;
        let counts: Vec<u32> = counts
            .split(',')
            .map(|c| c.trim().parse().map_err(|_| Error::Parse(format!("bad count in {s:?}"))))
            .collect::<Result<_>>()?;
        if counts.len() != alphabet.len() {
            return Err(Error::Parse(format!("{s:?} has {} counts for {} colors", counts.len(), alphabet.len())));
        }
        Ok(LocalView { color, counts })
    }
}

/// An ordered color pair `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColorPair(pub usize, pub usize);

/// Atoms a [`Measure`] can be placed on.
pub trait Atom: Clone + Ord + Debug {
    fn render(&self, alphabet: &Alphabet) -> String;
}

impl Atom for LocalView {
    fn render(&self, alphabet: &Alphabet) -> String {
        LocalView::render(self, alphabet)
    }
}

impl Atom for (LocalView, LocalView) {
    fn render(&self, alphabet: &Alphabet) -> String {
        format!("{}/{}", self.0.render(alphabet), self.1.render(alphabet))
    }
}

impl Atom for ColorPair {
    fn render(&self, alphabet: &Alphabet) -> String {
        format!("{}/{}", alphabet.label(self.0), alphabet.label(self.1))
    }
}

impl Atom for usize {
    fn render(&self, alphabet: &Alphabet) -> String {
        alphabet.label(*self).to_string()
    }
}

/// Finite nonnegative weights on an explicit support. Atoms may carry zero
/// weight; they still belong to the support.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure<A: Atom> {
    weights: BTreeMap<A, f64>,
    total: f64,
}

impl<A: Atom> Default for Measure<A> {
    fn default() -> Self {
        Measure { weights: BTreeMap::new(), total: 0.0 }
    }
}

impl<A: Atom> Measure<A> {
    /// Build from `(atom, weight)` pairs; repeated atoms accumulate.
    pub fn from_weights(pairs: impl IntoIterator<Item = (A, f64)>) -> Result<Self> {
        let mut weights = BTreeMap::new();
        for (atom, w) in pairs {
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidParams(format!("weight {w} on {atom:?} is not finite and nonnegative")));
            }
            *weights.entry(atom).or_insert(0.0) += w;
        }
        let total = compensated_sum(weights.values().copied());
        Ok(Measure { weights, total })
    }

    pub fn weight(&self, atom: &A) -> f64 {
        self.weights.get(atom).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, atom: &A) -> bool {
        self.weights.contains_key(atom)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&A, f64)> {
        self.weights.iter().map(|(a, &w)| (a, w))
    }

    pub fn is_probability(&self, tol: f64) -> bool {
        (self.total - 1.0).abs() <= tol
    }

    /// Rescale to total mass one.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.total > 0.0) {
            return Err(Error::Empty("measure with zero mass"));
        }
        Ok(Measure {
            weights: self.weights.iter().map(|(a, &w)| (a.clone(), w / self.total)).collect(),
            total: 1.0,
        })
    }

    /// Push-forward under `f`.
    pub fn map<B: Atom>(&self, f: impl Fn(&A) -> B) -> Measure<B> {
        Measure::from_weights(self.iter().map(|(a, w)| (f(a), w))).expect("weights already valid")
    }

    /// `⟨f, μ⟩`.
    pub fn integrate(&self, f: impl Fn(&A) -> f64) -> f64 {
        compensated_sum(self.iter().map(|(a, w)| w * f(a)))
    }

    /// CSV with header `atom_repr,weight`.
    pub fn write_csv<W: Write>(&self, w: W, alphabet: &Alphabet) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["atom_repr", "weight"])?;
        for (atom, weight) in self.iter() {
            out.write_record([atom.render(alphabet), fmt_f64(weight)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Total variation distance `½ Σ |μ − ν|` over the union of supports.
pub fn tv_distance<A: Atom>(mu: &Measure<A>, nu: &Measure<A>) -> f64 {
    let mut diffs: Vec<f64> = mu.iter().map(|(a, w)| (w - nu.weight(a)).abs()).collect();
    diffs.extend(nu.iter().filter(|(a, _)| !mu.contains(a)).map(|(_, w)| w));
    0.5 * compensated_sum(diffs)
}

/// One local view per vertex, in vertex order.
pub fn local_views(g: &ColoredGeometricGraph, cap: u32) -> Vec<LocalView> {
    recolored_views(g, g.colors(), cap)
}

/// Local views of `g`'s edge set under a different coloring.
pub fn recolored_views(g: &ColoredGeometricGraph, colors: &[usize], cap: u32) -> Vec<LocalView> {
    assert_eq!(colors.len(), g.n(), "one color per vertex");
    let k = g.alphabet().len();
    (0..g.n())
        .map(|v| {
            let mut counts = vec![0u32; k];
            for &u in g.neighbors(v) {
                counts[colors[u as usize]] += 1;
            }
            for c in &mut counts {
                *c = (*c).min(cap);
            }
            LocalView { color: colors[v], counts }
        })
        .collect()
}

/// `L_n = (1/n) Σ_v δ_{view_v}`.
pub fn empirical_measure(views: &[LocalView]) -> Result<Measure<LocalView>> {
    if views.is_empty() {
        return Err(Error::Empty("view list"));
    }
    let n = views.len() as f64;
    let mut tally: BTreeMap<&LocalView, usize> = BTreeMap::new();
    for v in views {
        *tally.entry(v).or_insert(0) += 1;
    }
    Measure::from_weights(tally.into_iter().map(|(v, m)| (v.clone(), m as f64 / n)))
}

/// Joint empirical measure of two view sequences on the same vertex set.
pub fn joint_from_views(xs: &[LocalView], ys: &[LocalView]) -> Result<Measure<(LocalView, LocalView)>> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.is_empty() {
        return Err(Error::Empty("view list"));
    }
    let n = xs.len() as f64;
    Measure::from_weights(xs.iter().zip(ys).map(|(x, y)| ((x.clone(), y.clone()), 1.0 / n)))
}

/// `L_{n,[z]} = (1/n) Σ_v δ_{(B_X(z_v), B_Y(z_v))}`.
pub fn joint_empirical(
    gx: &ColoredGeometricGraph,
    gy: &ColoredGeometricGraph,
    cap: u32,
) -> Result<Measure<(LocalView, LocalView)>> {
    if gx.n() != gy.n() {
        return Err(Error::LengthMismatch { left: gx.n(), right: gy.n() });
    }
    joint_from_views(&local_views(gx, cap), &local_views(gy, cap))
}

/// `ω_n(a,b) = (1/n)·#{ordered adjacent pairs with colors (a,b)}`.
pub fn pair_measure(g: &ColoredGeometricGraph) -> Measure<ColorPair> {
    let omega = pair_matrix(g);
    let k = omega.len();
    let atoms = (0..k)
        .flat_map(|a| (0..k).map(move |b| (a, b)))
        .filter(|&(a, b)| omega[a][b] > 0.0)
        .map(|(a, b)| (ColorPair(a, b), omega[a][b]));
    Measure::from_weights(atoms).expect("counts are nonnegative")
}

/// Dense form of [`pair_measure`].
pub fn pair_matrix(g: &ColoredGeometricGraph) -> Vec<Vec<f64>> {
    let k = g.alphabet().len();
    let mut counts = vec![vec![0u64; k]; k];
    let colors = g.colors();
    for (u, v) in g.edges() {
        counts[colors[u]][colors[v]] += 1;
        counts[colors[v]][colors[u]] += 1;
    }
    let n = g.n() as f64;
    counts.into_iter().map(|row| row.into_iter().map(|c| c as f64 / n).collect()).collect()
}

/// Empirical color law `π_n`.
pub fn color_law(g: &ColoredGeometricGraph) -> Vec<f64> {
    let mut counts = vec![0usize; g.alphabet().len()];
    for &c in g.colors() {
        counts[c] += 1;
    }
    counts.into_iter().map(|c| c as f64 / g.n() as f64).collect()
}

/// A color law `π` and symmetric edge-intensity matrix `ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypePair {
    pub alphabet: Alphabet,
    pub pi: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
}

impl TypePair {
    pub fn new(alphabet: Alphabet, pi: Vec<f64>, omega: Vec<Vec<f64>>) -> Result<Self> {
        let k = alphabet.len();
        if pi.len() != k || omega.len() != k || omega.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidParams(format!("type pair shapes do not match {k} colors")));
        }
        if pi.iter().chain(omega.iter().flatten()).any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParams("type pair entries must be finite and nonnegative".into()));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParams(format!("pi sums to {total}")));
        }
        if max_asymmetry(&omega) > 1e-12 {
            return Err(Error::InvalidParams("omega is not symmetric".into()));
        }
        Ok(TypePair { alphabet, pi, omega })
    }

    /// `(π_n, ω_n)` read directly off a graph.
    pub fn of_graph(g: &ColoredGeometricGraph) -> Self {
        TypePair { alphabet: g.alphabet().clone(), pi: color_law(g), omega: pair_matrix(g) }
    }

    /// The limit type pair of a model, `ω(a,b) = v_d·λ(a,b)·π(a)·π(b)`.
    pub fn limit(params: &ModelParams) -> Result<Self> {
        let omega = crate::wsn::omega_limit(&params.lambda, &params.pi, params.d)?;
        TypePair::new(params.alphabet.clone(), params.pi.clone(), omega)
    }

    pub fn k(&self) -> usize {
        self.pi.len()
    }

    /// Sup-norm distance between two type pairs on the same alphabet.
    pub fn sup_distance(&self, other: &TypePair) -> f64 {
        let dp = self.pi.iter().zip(&other.pi).map(|(a, b)| (a - b).abs());
        let dw = self.omega.iter().flatten().zip(other.omega.iter().flatten()).map(|(a, b)| (a - b).abs());
        dp.chain(dw).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("type pair serializes")
    }
}

pub(crate) fn max_asymmetry(m: &[Vec<f64>]) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..m.len() {
        for b in 0..a {
            worst = worst.max((m[a][b] - m[b][a]).abs());
        }
    }
    worst
}

/// Tolerance on `|ω(a,b) − ω(b,a)|` below which a `Ψ`-image is consistent.
pub const CONSISTENCY_TOL: f64 = 1e-9;

/// Result of `Ψ`: the (possibly asymmetric) mean-count matrix and color law.
#[derive(Debug, Clone, PartialEq)]
pub struct PsiImage {
    pub alphabet: Alphabet,
    pub pi: Vec<f64>,
    pub omega: Vec<Vec<f64>>,
    pub consistent: bool,
}

impl PsiImage {
    pub fn into_type_pair(self) -> Result<TypePair> {
        if !self.consistent {
            return Err(Error::InvalidParams("Psi-image is not consistent".into()));
        }
        let mut omega = self.omega;
        // symmetrize the sub-tolerance residue
        for a in 0..omega.len() {
            for b in 0..a {
                let m = 0.5 * (omega[a][b] + omega[b][a]);
                omega[a][b] = m;
                omega[b][a] = m;
            }
        }
        let total: f64 = self.pi.iter().sum();
        let pi = self.pi.iter().map(|p| p / total).collect();
        TypePair::new(self.alphabet, pi, omega)
    }
}

/// `Ψ(μ) = (π, ω)` with `π(a) = μ(color = a)` and
/// `ω(a,b) = Σ_ℓ ℓ(b)·μ(a,ℓ)`.
pub fn psi(mu: &Measure<LocalView>, alphabet: &Alphabet) -> PsiImage {
    let k = alphabet.len();
    let mut pi = vec![Vec::new(); k];
    let mut omega = vec![vec![Vec::new(); k]; k];
    for (view, w) in mu.iter() {
        pi[view.color].push(w);
        for (b, &c) in view.counts.iter().enumerate() {
            omega[view.color][b].push(c as f64 * w);
        }
    }
    let pi: Vec<f64> = pi.into_iter().map(compensated_sum).collect();
    let omega: Vec<Vec<f64>> =
        omega.into_iter().map(|row| row.into_iter().map(compensated_sum).collect()).collect();
    let consistent = max_asymmetry(&omega) <= CONSISTENCY_TOL;
    PsiImage { alphabet: alphabet.clone(), pi, omega, consistent }
}

/// Soft conditioning on `‖Ψ(L) − (π, ω)‖_∞ ≤ τ`.
#[derive(Debug, Clone)]
pub struct SoftCondition {
    pub target: TypePair,
    pub tau: f64,
}

impl SoftCondition {
    pub const DEFAULT_TAU: f64 = 0.05;

    pub fn accepts(&self, g: &ColoredGeometricGraph) -> bool {
        TypePair::of_graph(g).sup_distance(&self.target) <= self.tau
    }
}

/// Neighbor counts of color `b` among color-`a` vertices.
pub fn neighbor_counts(views: &[LocalView], a: usize, b: usize) -> Vec<u32> {
    views.iter().filter(|v| v.color == a).map(|v| v.counts[b]).collect()
}

/// Outcome of a Pearson chi-square goodness-of-fit test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// `(lowest count in bin, observed, expected)`; the last bin is a tail.
    pub bins: Vec<(u32, u64, f64)>,
}

impl ChiSquareTest {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

/// Chi-square test of integer samples against `Poisson(mean)`. Bins are
/// merged left to right until each expects at least five observations; the
/// last bin collects the upper tail. `fitted_params` is subtracted from the
/// degrees of freedom.
pub fn poisson_chi_square(samples: &[u32], mean: f64, fitted_params: usize) -> ChiSquareTest {
    let total = samples.len() as f64;
    let max_obs = samples.iter().copied().max().unwrap_or(0);
    let mut hist = vec![0u64; max_obs as usize + 1];
    for &s in samples {
        hist[s as usize] += 1;
    }
    let pois = (mean > 0.0).then(|| Poisson::new(mean).expect("positive mean"));
    let pmf = |k: u32| match &pois {
        Some(p) => p.pmf(k as u64),
        None => (k == 0) as u8 as f64,
    };

    let mut bins: Vec<(u32, u64, f64)> = Vec::new();
    let (mut start, mut obs, mut exp) = (0u32, 0u64, 0.0f64);
    let mut covered = 0.0;
    let mut k = 0u32;
    loop {
        let p = pmf(k);
        obs += hist.get(k as usize).copied().unwrap_or(0);
        exp += total * p;
        covered += p;
        if exp >= 5.0 {
            bins.push((start, obs, exp));
            start = k + 1;
            obs = 0;
            exp = 0.0;
        }
        k += 1;
        let tail_expect = total * (1.0 - covered).max(0.0);
        if tail_expect < 5.0 && k > max_obs.max(mean.ceil() as u32) {
            break;
        }
        if k > 10_000 {
            break;
        }
    }
    // the remaining partial bin plus the tail k ≥ current
    let tail_obs: u64 = obs + hist.iter().skip(k as usize).sum::<u64>();
    let tail_exp = exp + total * (1.0 - covered).max(0.0);
    match bins.last_mut() {
        Some(last) if tail_exp < 5.0 => {
            last.1 += tail_obs;
            last.2 += tail_exp;
        }
        _ => bins.push((start, tail_obs, tail_exp)),
    }

    let statistic: f64 = bins
        .iter()
        .filter(|b| b.2 > 0.0)
        .map(|&(_, o, e)| (o as f64 - e).powi(2) / e)
        .sum();
    let df = bins.len().saturating_sub(1 + fitted_params);
    let p_value = if df == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(df as f64).expect("df > 0").cdf(statistic)
    };
    ChiSquareTest { statistic, df, p_value, bins }
}
