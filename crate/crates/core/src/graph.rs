//! Sampling colored geometric random graphs on the unit d-torus.
//!
//! Points are i.i.d. uniform on `[0,1)^d` and colors i.i.d. from `π`. Two
//! vertices with colors `a`, `b` are joined when their torus distance is at
//! most `r(a,b) = (λ(a,b)/n)^{1/d}`. A color-`a` vertex then has on average
//! `v_d·λ(a,b)·π(b)` neighbors of color `b`, where `v_d` is the volume of the
//! unit ball, so the ordered-pair edge intensity tends to
//! `v_d·λ(a,b)·π(a)·π(b)`.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::distr::{Distribution, Uniform, weighted::WeightedIndex};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fmt_f64;
use crate::rng::{self, StreamRng};

/// Ordered finite color set. Labels are short identifiers; they appear in
/// canonical atom renderings, so the separators `|`, `,`, `/` and
/// whitespace are not allowed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet(Vec<String>);

impl Alphabet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(Error::InvalidParams("alphabet must contain at least one color".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || l.chars().any(|c| c.is_whitespace() || "|,/\"".contains(c)) {
                return Err(Error::InvalidParams(format!("bad color label {l:?}")));
            }
            if labels[..i].contains(l) {
                return Err(Error::InvalidParams(format!("duplicate color label {l:?}")));
            }
        }
        Ok(Alphabet(labels))
    }

    /// Colors named `0, 1, …, k-1`.
    pub fn numbered(k: usize) -> Self {
        Alphabet((0..k).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn label(&self, color: usize) -> &str {
        &self.0[color]
    }

    pub fn labels(&self) -> &[String] {
        &self.0
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.0.iter().position(|l| l == label)
    }
}

/// Parameters of a CGRG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub d: usize,
    pub n: usize,
    pub alphabet: Alphabet,
    pub pi: Vec<f64>,
    /// Symmetric, dimensionless intensity matrix indexed by color.
    pub lambda: Vec<Vec<f64>>,
    pub seed: u64,
    /// Draw an exact composition `round(n·π)` instead of i.i.d. colors.
    #[serde(default)]
    pub exact_composition: bool,
}

impl ModelParams {
    pub fn new(
        d: usize,
        n: usize,
        alphabet: Alphabet,
        pi: Vec<f64>,
        lambda: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<Self> {
        let p = ModelParams { d, n, alphabet, pi, lambda, seed, exact_composition: false };
        p.validate()?;
        Ok(p)
    }

    /// Same model with every `λ(a,b)` set to `value`.
    pub fn uniform(d: usize, n: usize, pi: Vec<f64>, value: f64, seed: u64) -> Result<Self> {
        let k = pi.len();
        Self::new(d, n, Alphabet::numbered(k), pi, vec![vec![value; k]; k], seed)
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ModelParams { seed, ..self.clone() }
    }

    pub fn with_n(&self, n: usize) -> Self {
        ModelParams { n, ..self.clone() }
    }

    pub fn k(&self) -> usize {
        self.alphabet.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.d == 0 {
            return bad("dimension d must be at least 1".into());
        }
        if self.n == 0 {
            return bad("vertex count n must be at least 1".into());
        }
        let k = self.alphabet.len();
        if self.pi.len() != k {
            return bad(format!("pi has {} entries for {} colors", self.pi.len(), k));
        }
        if self.pi.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return bad("pi entries must be finite and nonnegative".into());
        }
        let total: f64 = self.pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return bad(format!("pi sums to {total}, not 1"));
        }
        if self.lambda.len() != k || self.lambda.iter().any(|row| row.len() != k) {
            return bad(format!("lambda must be a {k}x{k} matrix"));
        }
        for a in 0..k {
            for b in 0..k {
                let v = self.lambda[a][b];
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("lambda[{a}][{b}] = {v} is not finite and nonnegative"));
                }
                if v != self.lambda[b][a] {
                    return bad(format!("lambda is not symmetric at ({a}, {b})"));
                }
            }
        }
        for a in 0..k {
            for b in a..k {
                let r = self.radius(a, b);
                if r >= 0.5 {
                    return Err(Error::RadiusTooLarge {
                        a: self.alphabet.label(a).to_string(),
                        b: self.alphabet.label(b).to_string(),
                        radius: r,
                    });
                }
            }
        }
        Ok(())
    }

    /// Connection radius `(λ(a,b)/n)^{1/d}` for colors `a`, `b`.
    pub fn radius(&self, a: usize, b: usize) -> f64 {
        (self.lambda[a][b] / self.n as f64).powf(1.0 / self.d as f64)
    }

    pub fn radius_table(&self) -> Vec<Vec<f64>> {
        let k = self.k();
        (0..k).map(|a| (0..k).map(|b| self.radius(a, b)).collect()).collect()
    }

    pub fn max_radius(&self) -> f64 {
        self.radius_table().iter().flatten().copied().fold(0.0, f64::max)
    }
}

/// Torus distance with per-coordinate wraparound.
pub fn torus_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    Ok(torus_distance_unchecked(p, q))
}

#[inline]
fn torus_distance_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&x, &y)| {
            let delta = (x - y).abs();
            let w = delta.min(1.0 - delta);
            w * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Volume of the unit ball in dimension `d`, `π^{d/2}/Γ(d/2+1)`.
pub fn ball_volume_coefficient(d: usize) -> f64 {
    // v_d = (2π/d)·v_{d-2}, v_0 = 1, v_1 = 2
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * std::f64::consts::PI / k as f64;
        k += 2;
    }
    v
}

/// A uniform point cloud on the torus together with every vertex pair
/// lying within a search radius. Colorings of the same cloud reuse the
/// candidate list.
#[derive(Debug, Clone)]
pub struct Geometry {
    d: usize,
    coords: Vec<f64>,
    search_radius: f64,
    /// Pairs `(u, v, dist)` with `u < v` and `dist ≤ search_radius`.
    candidates: Vec<(u32, u32, f64)>,
}

impl Geometry {
    pub fn sample(d: usize, n: usize, search_radius: f64, rng: &mut StreamRng) -> Self {
        let unit = Uniform::new(0.0, 1.0).expect("valid range");
        let coords: Vec<f64> = (0..n * d).map(|_| unit.sample(rng)).collect();
        Self::from_coords(d, coords, search_radius)
    }

    pub fn from_coords(d: usize, coords: Vec<f64>, search_radius: f64) -> Self {
        let candidates = candidate_pairs(d, &coords, search_radius);
        Geometry { d, coords, search_radius, candidates }
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn search_radius(&self) -> f64 {
        self.search_radius
    }

    pub fn candidates(&self) -> &[(u32, u32, f64)] {
        &self.candidates
    }

    /// Build the graph for a coloring under the radii of `params`.
    pub fn color(&self, params: &ModelParams, colors: Vec<usize>) -> ColoredGeometricGraph {
        assert_eq!(colors.len(), self.n());
        assert!(params.max_radius() <= self.search_radius);
        let radii = params.radius_table();
        let mut adjacency = vec![Vec::new(); self.n()];
        for &(u, v, dist) in &self.candidates {
            if dist <= radii[colors[u as usize]][colors[v as usize]] {
                adjacency[u as usize].push(v);
                adjacency[v as usize].push(u);
            }
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        ColoredGeometricGraph {
            d: self.d,
            alphabet: params.alphabet.clone(),
            coords: self.coords.clone(),
            colors,
            adjacency,
        }
    }
}

/// All pairs `u < v` within `radius`, found through a cell grid when the
/// grid has at least three cells per axis and by a full scan otherwise.
fn candidate_pairs(d: usize, coords: &[f64], radius: f64) -> Vec<(u32, u32, f64)> {
    let n = coords.len() / d;
    if n < 2 || radius <= 0.0 {
        return Vec::new();
    }
    let mut m = (1.0 / radius).floor() as usize;
    // keep the cell count near n
    let cap = ((4 * n) as f64).powf(1.0 / d as f64).floor() as usize;
    m = m.min(cap.max(1));
    let stencil = 3usize.checked_pow(d as u32);
    if m < 3 || stencil.is_none_or(|s| s > 4 * n) {
        return scan_pairs(d, coords, radius);
    }

    let cell_of = |i: usize| -> Vec<usize> {
        coords[i * d..(i + 1) * d]
            .iter()
            .map(|&x| ((x * m as f64) as usize).min(m - 1))
            .collect()
    };
    let flat = |c: &[usize]| c.iter().fold(0usize, |acc, &ci| acc * m + ci);
    let num_cells = m.pow(d as u32);
    let mut cells: Vec<Vec<u32>> = vec![Vec::new(); num_cells];
    let mut cell_coords = Vec::with_capacity(n);
    for i in 0..n {
        let c = cell_of(i);
        cells[flat(&c)].push(i as u32);
        cell_coords.push(c);
    }
    let offsets: Vec<Vec<isize>> = (0..stencil.unwrap())
        .map(|mut s| {
            (0..d)
                .map(|_| {
                    let o = (s % 3) as isize - 1;
                    s /= 3;
                    o
                })
                .collect()
        })
        .collect();

    let mut out = Vec::new();
    let mut neighbor = vec![0usize; d];
    for u in 0..n {
        let cu = &cell_coords[u];
        let pu = &coords[u * d..(u + 1) * d];
        for off in &offsets {
            for j in 0..d {
                neighbor[j] = (cu[j] as isize + off[j]).rem_euclid(m as isize) as usize;
            }
            for &v in &cells[flat(&neighbor)] {
                if (v as usize) <= u {
                    continue;
                }
                let dist = torus_distance_unchecked(pu, &coords[v as usize * d..(v as usize + 1) * d]);
                if dist <= radius {
                    out.push((u as u32, v, dist));
                }
            }
        }
    }
    out.sort_unstable_by_key(|&(u, v, _)| (u, v));
    out
}

fn scan_pairs(d: usize, coords: &[f64], radius: f64) -> Vec<(u32, u32, f64)> {
    let n = coords.len() / d;
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let dist = torus_distance_unchecked(&coords[u * d..(u + 1) * d], &coords[v * d..(v + 1) * d]);
            if dist <= radius {
                out.push((u as u32, v as u32, dist));
            }
        }
    }
    out
}

/// Colors i.i.d. from `π`, or an exact `round(n·π)` composition in random
/// order when `params.exact_composition` is set.
pub fn sample_colors(params: &ModelParams, rng: &mut StreamRng) -> Vec<usize> {
    let n = params.n;
    if params.exact_composition {
        let mut colors = Vec::with_capacity(n);
        for (a, &count) in exact_counts(&params.pi, n).iter().enumerate() {
            colors.extend(std::iter::repeat_n(a, count));
        }
        colors.shuffle(rng);
        colors
    } else {
        let dist = WeightedIndex::new(&params.pi).expect("pi validated");
        (0..n).map(|_| dist.sample(rng)).collect()
    }
}

/// Largest-remainder rounding of `n·π` to integers summing to `n`.
pub fn exact_counts(pi: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = pi.iter().map(|&p| p * n as f64).collect();
    let mut counts: Vec<usize> = raw.iter().map(|&x| x.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..pi.len()).collect();
    order.sort_by(|&i, &j| (raw[j] - raw[j].floor()).total_cmp(&(raw[i] - raw[i].floor())).then(i.cmp(&j)));
    for &i in order.iter().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

/// Sample a CGRG from the stream keyed by `params.seed`.
pub fn sample_graph(params: &ModelParams) -> Result<ColoredGeometricGraph> {
    params.validate()?;
    let mut rng = rng::stream(params.seed, &[]);
    Ok(sample_graph_with(params, &mut rng))
}

/// Sample a CGRG from an explicit stream. `params` must be valid.
pub fn sample_graph_with(params: &ModelParams, rng: &mut StreamRng) -> ColoredGeometricGraph {
    let geometry = Geometry::sample(params.d, params.n, params.max_radius(), rng);
    let colors = sample_colors(params, rng);
    geometry.color(params, colors)
}

/// A realized CGRG: points on the torus, their colors and a symmetric,
/// irreflexive adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredGeometricGraph {
    d: usize,
    alphabet: Alphabet,
    coords: Vec<f64>,
    colors: Vec<usize>,
    adjacency: Vec<Vec<u32>>,
}

impl ColoredGeometricGraph {
    /// Assemble a graph from explicit parts, checking the structural
    /// invariants (coordinates in `[0,1)`, symmetric irreflexive edges).
    pub fn from_parts(
        d: usize,
        alphabet: Alphabet,
        coords: Vec<f64>,
        colors: Vec<usize>,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        if d == 0 || coords.len() % d != 0 {
            return Err(Error::InvalidParams("coordinate buffer does not match dimension".into()));
        }
        let n = coords.len() / d;
        if colors.len() != n {
            return Err(Error::LengthMismatch { left: n, right: colors.len() });
        }
        if coords.iter().any(|&x| !(0.0..1.0).contains(&x)) {
            return Err(Error::InvalidParams("coordinates must lie in [0,1)".into()));
        }
        if colors.iter().any(|&c| c >= alphabet.len()) {
            return Err(Error::InvalidParams("color index outside the alphabet".into()));
        }
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n || u == v {
                return Err(Error::InvalidParams(format!("bad edge ({u}, {v})")));
            }
            adjacency[u].push(v as u32);
            adjacency[v].push(u as u32);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            if list.len() != before {
                return Err(Error::InvalidParams("duplicate edge".into()));
            }
        }
        Ok(ColoredGeometricGraph { d, alphabet, coords, colors, adjacency })
    }

    pub fn n(&self) -> usize {
        self.colors.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn colors(&self) -> &[usize] {
        &self.colors
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges `(u, v)` with `u < v` in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().map(move |&v| (u, v as usize)).filter(|&(u, v)| u < v))
    }

    /// Write the plain-text graph format: a `d n |X|` header, one line per
    /// vertex `index color x_1 … x_d`, then one line per edge `u v`.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "{} {} {}", self.d, self.n(), self.alphabet.len())?;
        let mut line = String::new();
        for i in 0..self.n() {
            line.clear();
            write!(line, "{} {}", i, self.alphabet.label(self.colors[i])).unwrap();
            for &x in self.point(i) {
                write!(line, " {}", fmt_f64(x)).unwrap();
            }
            writeln!(w, "{line}")?;
        }
        for (u, v) in self.edges() {
            writeln!(w, "{u} {v}")?;
        }
        Ok(())
    }

    /// Parse the format written by [`write_text`](Self::write_text).
    pub fn read_text<R: BufRead>(r: R, alphabet: &Alphabet) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or(Error::Empty("graph file"))??;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header {header:?}"))))
            .collect::<Result<_>>()?;
        let [d, n, k] = nums[..] else {
            return Err(Error::Parse(format!("header must be `d n |X|`, got {header:?}")));
        };
        if k != alphabet.len() {
            return Err(Error::Parse(format!("file has {k} colors, alphabet has {}", alphabet.len())));
        }
        let mut coords = Vec::with_capacity(n * d);
        let mut colors = Vec::with_capacity(n);
        for i in 0..n {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing vertex line {i}")))??;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != d + 2 || toks[0].parse::<usize>().ok() != Some(i) {
                return Err(Error::Parse(format!("bad vertex line {line:?}")));
            }
            let c = alphabet
                .index_of(toks[1])
                .ok_or_else(|| Error::Parse(format!("unknown color {:?}", toks[1])))?;
            colors.push(c);
            for t in &toks[2..] {
                coords.push(t.parse::<f64>().map_err(|_| Error::Parse(format!("bad coordinate {t:?}")))?);
            }
        }
        let mut edges = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let toks: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad edge line {line:?}"))))
                .collect::<Result<_>>()?;
            let [u, v] = toks[..] else {
                return Err(Error::Parse(format!("bad edge line {line:?}")));
            };
            edges.push((u, v));
        }
        Self::from_parts(d, alphabet.clone(), coords, colors, &edges)
    }
}

/// Reference edge rule evaluated over all `O(n²)` pairs.
pub fn edges_by_scan(g: &ColoredGeometricGraph, params: &ModelParams) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for u in 0..g.n() {
        for v in u + 1..g.n() {
            let r = params.radius(g.colors[u], g.colors[v]);
            if torus_distance_unchecked(g.point(u), g.point(v)) <= r {
                out.push((u, v));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn half_half(n: usize, lambda: f64, seed: u64) -> ModelParams {
        ModelParams::uniform(2, n, vec![0.5, 0.5], lambda, seed).unwrap()
    }

    #[test]
    fn torus_distance_wraps() {
        assert!((torus_distance(&[0.1], &[0.9]).unwrap() - 0.2).abs() < 1e-15);
        let diag = torus_distance(&[0.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((diag - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(torus_distance(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!(matches!(torus_distance(&[0.1], &[0.1, 0.2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ball_volumes() {
        let pi = std::f64::consts::PI;
        assert!((ball_volume_coefficient(1) - 2.0).abs() < 1e-15);
        assert!((ball_volume_coefficient(2) - pi).abs() < 1e-15);
        assert!((ball_volume_coefficient(3) - 4.0 * pi / 3.0).abs() < 1e-14);
        assert!((ball_volume_coefficient(4) - pi * pi / 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_vertex_has_no_edges() {
        let g = sample_graph(&half_half(1, 0.1, 3)).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.num_edges(), 0);
    }

    #[test]
    fn hand_evaluated_edge_in_one_dimension() {
        // r = (0.5/2)^1 = 0.25 ≥ |0.1 - 0.2|
        let p = ModelParams::uniform(1, 2, vec![1.0], 0.5, 0).unwrap();
        assert!((p.radius(0, 0) - 0.25).abs() < 1e-15);
        let geo = Geometry::from_coords(1, vec![0.10, 0.20], p.max_radius());
        let g = geo.color(&p, vec![0, 0]);
        assert_eq!(g.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    #[test]
    fn rejects_large_radius() {
        let err = ModelParams::uniform(1, 2, vec![1.0], 1.0, 0).unwrap_err();
        assert!(matches!(err, Error::RadiusTooLarge { .. }));
    }

    #[test]
    fn rejects_invalid_params() {
        assert!(ModelParams::uniform(2, 10, vec![0.6, 0.6], 1.0, 0).is_err());
        let asym = vec![vec![1.0, 0.5], vec![0.4, 1.0]];
        assert!(ModelParams::new(2, 10, Alphabet::numbered(2), vec![0.5, 0.5], asym, 0).is_err());
        assert!(ModelParams::uniform(0, 10, vec![1.0], 1.0, 0).is_err());
        assert!(ModelParams::uniform(2, 0, vec![1.0], 1.0, 0).is_err());
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(["a|b"]).is_err());
    }

    #[test]
    fn zero_lambda_row_gives_isolated_color() {
        let lambda = vec![vec![0.0, 0.0], vec![0.0, 2.0]];
        let p = ModelParams::new(2, 400, Alphabet::numbered(2), vec![0.5, 0.5], lambda, 9).unwrap();
        let g = sample_graph(&p).unwrap();
        for v in 0..g.n() {
            if g.colors()[v] == 0 {
                assert_eq!(g.degree(v), 0);
            }
        }
        assert!(g.num_edges() > 0);
    }

    #[test]
    fn edge_rule_matches_full_scan() {
        let lambda = vec![vec![1.5, 0.4, 0.0], vec![0.4, 3.0, 2.0], vec![0.0, 2.0, 0.7]];
        for seed in 0..20 {
            let p = ModelParams::new(2, 200, Alphabet::numbered(3), vec![0.2, 0.3, 0.5], lambda.clone(), seed)
                .unwrap();
            let g = sample_graph(&p).unwrap();
            assert_eq!(g.edges().collect::<Vec<_>>(), edges_by_scan(&g, &p));
        }
    }

    #[test]
    fn grid_search_matches_scan_across_dimensions() {
        let mut rng = rng::stream(11, &[]);
        for instance in 0..50u64 {
            let d = 1 + (instance % 3) as usize;
            let n = 20 + (instance as usize * 37) % 480;
            let radius = 0.3 * (4.0 / n as f64).powf(1.0 / d as f64);
            let geo = Geometry::sample(d, n, radius, &mut rng);
            let slow = scan_pairs(d, &geo.coords, radius);
            assert_eq!(geo.candidates(), &slow[..], "instance {instance}");
        }
    }

    #[test]
    fn exact_composition_counts() {
        assert_eq!(exact_counts(&[0.5, 0.5], 5), vec![3, 2]);
        assert_eq!(exact_counts(&[0.2, 0.3, 0.5], 10), vec![2, 3, 5]);
        let mut p = half_half(101, 1.0, 5);
        p.exact_composition = true;
        let g = sample_graph(&p).unwrap();
        assert_eq!(g.colors().iter().filter(|&&c| c == 0).count(), 51);
    }

    #[test]
    fn color_frequencies_concentrate() {
        let pi = [0.2, 0.3, 0.5];
        let n = 2000;
        let mut within = 0;
        for seed in 0..100 {
            let p = ModelParams::uniform(2, n, pi.to_vec(), 0.5, seed).unwrap();
            let g = sample_graph(&p).unwrap();
            let ok = (0..3).all(|a| {
                let freq = g.colors().iter().filter(|&&c| c == a).count() as f64 / n as f64;
                (freq - pi[a]).abs() <= 3.0 * (pi[a] * (1.0 - pi[a]) / n as f64).sqrt()
            });
            within += ok as usize;
        }
        assert!(within >= 95, "only {within}/100 runs within 3 sigma");
    }

    #[test]
    fn text_format_round_trips() {
        let p = half_half(60, 1.0, 4);
        let g = sample_graph(&p).unwrap();
        let mut buf = Vec::new();
        g.write_text(&mut buf).unwrap();
        let back = ColoredGeometricGraph::read_text(&buf[..], &p.alphabet).unwrap();
        assert_eq!(back, g);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("2 60 2\n"));
    }

    proptest! {
        #[test]
        fn sampling_is_deterministic(seed in any::<u64>(), n in 10usize..150) {
            let p = half_half(n, 1.0, seed);
            prop_assert_eq!(sample_graph(&p).unwrap(), sample_graph(&p).unwrap());
        }

        #[test]
        fn adjacency_is_symmetric_and_irreflexive(seed in any::<u64>(), n in 10usize..150) {
            let g = sample_graph(&half_half(n, 2.0, seed)).unwrap();
            for u in 0..g.n() {
                prop_assert!(g.point(u).iter().all(|&x| (0.0..1.0).contains(&x)));
                for &v in g.neighbors(u) {
                    prop_assert_ne!(u, v as usize);
                    prop_assert!(g.neighbors(v as usize).binary_search(&(u as u32)).is_ok());
                }
            }
        }

        #[test]
        fn torus_distance_symmetric(p in prop::collection::vec(0.0f64..1.0, 3), q in prop::collection::vec(0.0f64..1.0, 3)) {
            let a = torus_distance(&p, &q).unwrap();
            let b = torus_distance(&q, &p).unwrap();
            prop_assert_eq!(a, b);
            prop_assert!(a <= (3.0f64).sqrt() / 2.0 + 1e-15);
        }
    }
}
