//! The two-class sensor-network model: SG nodes (sensing and processing)
//! and SI nodes (sensing only).
//!
//! Covers the limit edge intensity of a CGRG, the step-shaped
//! rate-distortion function under squared-degree distortion, and fitting
//! model parameters to node/link tables.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::empirical::{local_views, neighbor_counts, poisson_chi_square, ChiSquareTest, TypePair};
use crate::error::{Error, Result};
use crate::graph::{ball_volume_coefficient, Alphabet, ColoredGeometricGraph, ModelParams};
use crate::numeric::{fmt_f64, ExtReal};

pub const SG: &str = "SG";
pub const SI: &str = "SI";

/// The `{SG, SI}` alphabet in that order.
pub fn wsn_alphabet() -> Alphabet {
    Alphabet::new([SG, SI]).expect("distinct labels")
}

/// `ω(a,b) = v_d · λ(a,b) · π(a) · π(b)`.
pub fn omega_limit(lambda: &[Vec<f64>], pi: &[f64], d: usize) -> Result<Vec<Vec<f64>>> {
    let k = pi.len();
    if lambda.len() != k || lambda.iter().any(|r| r.len() != k) {
        return Err(Error::DimensionMismatch { expected: k, got: lambda.len() });
    }
    if d == 0 {
        return Err(Error::InvalidParams("dimension d must be at least 1".into()));
    }
    if lambda.iter().flatten().chain(pi).any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidParams("lambda and pi must be finite and nonnegative".into()));
    }
    let v = ball_volume_coefficient(d);
    Ok((0..k).map(|a| (0..k).map(|b| v * lambda[a][b] * (pi[a] * pi[b])).collect()).collect())
}

fn sg_si_indices(alphabet: &Alphabet) -> Result<(usize, usize)> {
    match (alphabet.len(), alphabet.index_of(SG), alphabet.index_of(SI)) {
        (2, Some(g), Some(i)) => Ok((g, i)),
        _ => Err(Error::InvalidParams(format!(
            "expected the alphabet {{SG, SI}}, got {:?}",
            alphabet.labels()
        ))),
    }
}

/// `2ω(SG,SI) + ω(SG,SG) + ω(SI,SI) + 2ω(SI,SG)`.
pub fn rd_threshold(tp: &TypePair) -> Result<f64> {
    let (g, i) = sg_si_indices(&tp.alphabet)?;
    let w = &tp.omega;
    Ok(2.0 * w[g][i] + w[g][g] + w[i][i] + 2.0 * w[i][g])
}

/// `0` for `α ≥ threshold`, `+∞` below.
pub fn rd_step(alpha: f64, threshold: f64) -> ExtReal {
    if alpha >= threshold {
        ExtReal::Finite(0.0)
    } else {
        ExtReal::PosInf
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WsnNode {
    pub id: String,
    /// Index into the `{SG, SI}` alphabet.
    pub kind: usize,
    pub coords: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub source: String,
    pub d: usize,
    /// Original bounding box, per axis.
    pub bbox_min: Vec<f64>,
    pub bbox_max: Vec<f64>,
    /// True when the axes were rescaled by different factors, which
    /// changes the effective intensities.
    pub anisotropic: bool,
}

/// Node and link tables with coordinates on the unit torus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WsnDataset {
    pub nodes: Vec<WsnNode>,
    pub links: Vec<(usize, usize)>,
    pub metadata: DatasetMetadata,
}

const LARGEST_BELOW_ONE: f64 = 1.0 - f64::EPSILON / 2.0;

impl WsnDataset {
    /// Read `id,type,x_1,…,x_d` and `id_u,id_v` tables. Coordinates are
    /// mapped into `[0,1)` through the bounding box of the nodes.
    pub fn read_csv<N: Read, L: Read>(nodes: N, links: L, source: &str) -> Result<Self> {
        let alphabet = wsn_alphabet();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(nodes);
        let header = rdr.headers()?.clone();
        let d = header.len().saturating_sub(2);
        let expected: Vec<String> =
            ["id".to_string(), "type".to_string()].into_iter().chain((1..=d).map(|i| format!("x_{i}"))).collect();
        if d == 0 || header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!("node header must be id,type,x_1,...,x_d; got {header:?}")));
        }
        let mut raw = Vec::new();
        let mut index = HashMap::new();
        for record in rdr.records() {
            let record = record?;
            let id = record[0].to_string();
            let kind = alphabet
                .index_of(&record[1])
                .ok_or_else(|| Error::Parse(format!("node {id}: type {:?} is neither SG nor SI", &record[1])))?;
            let coords = (2..2 + d)
                .map(|j| {
                    record[j]
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::Parse(format!("node {id}: bad coordinate {:?}", &record[j])))
                })
                .collect::<Result<Vec<f64>>>()?;
            if index.insert(id.clone(), raw.len()).is_some() {
                return Err(Error::Parse(format!("duplicate node id {id}")));
            }
            raw.push(WsnNode { id, kind, coords });
        }
        if raw.is_empty() {
            return Err(Error::Empty("node table"));
        }

        let mut bbox_min = vec![f64::INFINITY; d];
        let mut bbox_max = vec![f64::NEG_INFINITY; d];
        for node in &raw {
            for j in 0..d {
                bbox_min[j] = bbox_min[j].min(node.coords[j]);
                bbox_max[j] = bbox_max[j].max(node.coords[j]);
            }
        }
        let spans: Vec<f64> = (0..d).map(|j| bbox_max[j] - bbox_min[j]).collect();
        for node in &mut raw {
            for j in 0..d {
                let x = if spans[j] > 0.0 { (node.coords[j] - bbox_min[j]) / spans[j] } else { 0.0 };
                node.coords[j] = x.min(LARGEST_BELOW_ONE);
            }
        }
        let positive: Vec<f64> = spans.iter().copied().filter(|&s| s > 0.0).collect();
        let anisotropic = positive.windows(2).any(|w| (w[0] - w[1]).abs() > 1e-12 * w[0].max(w[1]));

        let mut lr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(links);
        let lh = lr.headers()?.clone();
        if lh.iter().collect::<Vec<_>>() != ["id_u", "id_v"] {
            return Err(Error::Parse(format!("link header must be id_u,id_v; got {lh:?}")));
        }
        let mut link_list = Vec::new();
        for record in lr.records() {
            let record = record?;
            let lookup = |s: &str| index.get(s).copied().ok_or_else(|| Error::Parse(format!("link references unknown node {s}")));
            let (u, v) = (lookup(&record[0])?, lookup(&record[1])?);
            link_list.push((u, v));
        }
        let metadata = DatasetMetadata { source: source.to_string(), d, bbox_min, bbox_max, anisotropic };
        Self::new(raw, link_list, metadata)
    }

    /// Checks the link invariants: known endpoints, no self-links, no
    /// duplicates.
    pub fn new(nodes: Vec<WsnNode>, mut links: Vec<(usize, usize)>, metadata: DatasetMetadata) -> Result<Self> {
        let n = nodes.len();
        for l in &mut links {
            if l.0 >= n || l.1 >= n {
                return Err(Error::InvalidParams(format!("link ({}, {}) references a missing node", l.0, l.1)));
            }
            if l.0 == l.1 {
                return Err(Error::InvalidParams(format!("self-link at node {}", nodes[l.0].id)));
            }
            if l.0 > l.1 {
                *l = (l.1, l.0);
            }
        }
        let mut sorted = links.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParams("duplicate link".into()));
        }
        if nodes.iter().any(|node| node.coords.len() != metadata.d || node.coords.iter().any(|x| !(0.0..1.0).contains(x))) {
            return Err(Error::InvalidParams("node coordinates must lie in [0,1)^d".into()));
        }
        Ok(WsnDataset { nodes, links, metadata })
    }

    /// Export a sampled graph whose alphabet is `{SG, SI}`.
    pub fn from_graph(g: &ColoredGeometricGraph, source: &str) -> Result<Self> {
        let (sg, si) = sg_si_indices(g.alphabet())?;
        let nodes = (0..g.n())
            .map(|v| WsnNode {
                id: v.to_string(),
                kind: if g.colors()[v] == sg { 0 } else if g.colors()[v] == si { 1 } else { unreachable!() },
                coords: g.point(v).to_vec(),
            })
            .collect();
        let metadata = DatasetMetadata {
            source: source.to_string(),
            d: g.d(),
            bbox_min: vec![0.0; g.d()],
            bbox_max: vec![1.0; g.d()],
            anisotropic: false,
        };
        Self::new(nodes, g.edges().collect(), metadata)
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    /// The dataset as a graph over the `{SG, SI}` alphabet.
    pub fn to_graph(&self) -> Result<ColoredGeometricGraph> {
        let coords = self.nodes.iter().flat_map(|n| n.coords.iter().copied()).collect();
        let colors = self.nodes.iter().map(|n| n.kind).collect();
        ColoredGeometricGraph::from_parts(self.metadata.d, wsn_alphabet(), coords, colors, &self.links)
    }

    pub fn write_csv<N: Write, L: Write>(&self, nodes: N, links: L) -> Result<()> {
        let alphabet = wsn_alphabet();
        let mut w = csv::Writer::from_writer(nodes);
        let mut header = vec!["id".to_string(), "type".to_string()];
        header.extend((1..=self.metadata.d).map(|i| format!("x_{i}")));
        w.write_record(&header)?;
        for node in &self.nodes {
            let mut row = vec![node.id.clone(), alphabet.label(node.kind).to_string()];
            row.extend(node.coords.iter().map(|&x| fmt_f64(x)));
            w.write_record(&row)?;
        }
        w.flush()?;
        let mut w = csv::Writer::from_writer(links);
        w.write_record(["id_u", "id_v"])?;
        for &(u, v) in &self.links {
            w.write_record([&self.nodes[u].id, &self.nodes[v].id])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Observed versus Poisson neighbor counts for one ordered color pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GofRow {
    pub from: String,
    pub to: String,
    pub mean: f64,
    pub test: ChiSquareTest,
}

/// Parameters fitted to a dataset, with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WsnFit {
    pub n: usize,
    pub d: usize,
    pub pi_hat: Vec<f64>,
    pub omega_hat: Vec<Vec<f64>>,
    /// `None` where a color is absent and the ratio is undefined.
    pub lambda_hat: Vec<Vec<Option<f64>>>,
    pub threshold: f64,
    /// Largest `|omega_limit(λ̂, π̂) − ω̂|` over defined entries.
    pub residual: f64,
    pub goodness_of_fit: Vec<GofRow>,
    /// A sampling model at the fitted values, when every entry is defined
    /// and the radii are admissible. Its seed is 0.
    pub params: Option<ModelParams>,
}

/// `π̂` from type frequencies, `ω̂` from ordered-pair link counts over `n`,
/// `λ̂ = ω̂ / (v_d π̂(a) π̂(b))`.
pub fn fit_from_dataset(ds: &WsnDataset, d: usize) -> Result<WsnFit> {
    let n = ds.n();
    if n == 0 {
        return Err(Error::Empty("dataset"));
    }
    if d != ds.metadata.d {
        return Err(Error::DimensionMismatch { expected: ds.metadata.d, got: d });
    }
    let alphabet = wsn_alphabet();
    let nf = n as f64;
    let mut counts = [0usize; 2];
    for node in &ds.nodes {
        counts[node.kind] += 1;
    }
    let pi_hat: Vec<f64> = counts.iter().map(|&c| c as f64 / nf).collect();
    let mut pair = [[0usize; 2]; 2];
    for &(u, v) in &ds.links {
        let (a, b) = (ds.nodes[u].kind, ds.nodes[v].kind);
        pair[a][b] += 1;
        pair[b][a] += 1;
    }
    let omega_hat: Vec<Vec<f64>> = pair.iter().map(|r| r.iter().map(|&c| c as f64 / nf).collect()).collect();
    let v = ball_volume_coefficient(d);
    let lambda_hat: Vec<Vec<Option<f64>>> = (0..2)
        .map(|a| {
            (0..2)
                .map(|b| {
                    let denom = v * (pi_hat[a] * pi_hat[b]);
                    (denom > 0.0).then(|| omega_hat[a][b] / denom)
                })
                .collect()
        })
        .collect();
    let filled: Vec<Vec<f64>> = lambda_hat.iter().map(|r| r.iter().map(|x| x.unwrap_or(0.0)).collect()).collect();
    let back = omega_limit(&filled, &pi_hat, d)?;
    let residual = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .filter(|&(a, b)| lambda_hat[a][b].is_some())
        .map(|(a, b)| (back[a][b] - omega_hat[a][b]).abs())
        .fold(0.0, f64::max);
    let tp = TypePair { alphabet: alphabet.clone(), pi: pi_hat.clone(), omega: omega_hat.clone() };
    let threshold = rd_threshold(&tp)?;

    let graph = ds.to_graph()?;
    let views = local_views(&graph, u32::MAX);
    let mut goodness_of_fit = Vec::new();
    for a in 0..2 {
        if counts[a] == 0 {
            continue;
        }
        for b in 0..2 {
            let mean = omega_hat[a][b] / pi_hat[a];
            goodness_of_fit.push(GofRow {
                from: alphabet.label(a).to_string(),
                to: alphabet.label(b).to_string(),
                mean,
                test: poisson_chi_square(&neighbor_counts(&views, a, b), mean, 1),
            });
        }
    }

    let params = if lambda_hat.iter().flatten().all(Option::is_some) {
        ModelParams::new(d, n, alphabet, pi_hat.clone(), filled, 0).ok()
    } else {
        None
    };
    Ok(WsnFit { n, d, pi_hat, omega_hat, lambda_hat, threshold, residual, goodness_of_fit, params })
}

impl WsnFit {
    /// Plain-text report of the fitted values and the fit table.
    pub fn report(&self) -> String {
        let labels = [SG, SI];
        let mut s = String::new();
        let _ = writeln!(s, "n = {}, d = {}", self.n, self.d);
        for (a, label) in labels.iter().enumerate() {
            let _ = writeln!(s, "pi_hat[{label}] = {}", fmt_f64(self.pi_hat[a]));
        }
        for (a, la) in labels.iter().enumerate() {
            for (b, lb) in labels.iter().enumerate() {
                let lam = self.lambda_hat[a][b].map_or_else(|| "missing".to_string(), fmt_f64);
                let _ = writeln!(s, "omega_hat[{la},{lb}] = {}  lambda_hat[{la},{lb}] = {lam}", fmt_f64(self.omega_hat[a][b]));
            }
        }
        let _ = writeln!(s, "threshold = {}", fmt_f64(self.threshold));
        let _ = writeln!(s, "residual = {}", fmt_f64(self.residual));
        let _ = writeln!(s, "goodness of fit (neighbor counts vs Poisson):");
        let _ = writeln!(s, "from,to,mean,statistic,df,p_value");
        for row in &self.goodness_of_fit {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                row.from,
                row.to,
                fmt_f64(row.mean),
                fmt_f64(row.test.statistic),
                row.test.df,
                fmt_f64(row.test.p_value)
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortion::DistortionFn;
    use crate::graph::sample_graph;
    use crate::kernel::PoissonFiberKernel;
    use crate::rate_distortion::{rd_curve, RdOptions};
    use std::f64::consts::PI;

    fn tp(omega: [[f64; 2]; 2]) -> TypePair {
        TypePair::new(wsn_alphabet(), vec![0.5, 0.5], omega.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn omega_limit_examples() {
        assert_eq!(omega_limit(&vec![vec![0.0; 2]; 2], &[0.5, 0.5], 2).unwrap(), vec![vec![0.0; 2]; 2]);
        let w = omega_limit(&vec![vec![1.0; 2]; 2], &[0.5, 0.5], 2).unwrap();
        for x in w.iter().flatten() {
            assert!((x - PI / 4.0).abs() < 1e-15);
            assert!((x - 0.78540).abs() < 1e-5);
        }
        assert_eq!(omega_limit(&[vec![1.0]], &[1.0], 1).unwrap(), vec![vec![2.0]]);
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(rd_threshold(&tp([[0.0; 2]; 2])).unwrap(), 0.0);
        let t = rd_threshold(&tp([[0.7854; 2]; 2])).unwrap();
        assert!((t - 4.7124).abs() < 1e-9);
        let t = rd_threshold(&tp([[0.1, 0.3], [0.3, 0.1]])).unwrap();
        assert!((t - 1.4).abs() < 1e-12);
        let other = TypePair::new(Alphabet::numbered(2), vec![0.5, 0.5], vec![vec![0.1; 2]; 2]).unwrap();
        assert!(rd_threshold(&other).is_err());
    }

    #[test]
    fn threshold_is_invariant_under_relabeling() {
        let a = tp([[0.2, 0.35], [0.35, 0.9]]);
        let swapped = TypePair::new(
            Alphabet::new([SI, SG]).unwrap(),
            vec![0.5, 0.5],
            vec![vec![0.9, 0.35], vec![0.35, 0.2]],
        )
        .unwrap();
        assert_eq!(rd_threshold(&a).unwrap(), rd_threshold(&swapped).unwrap());
    }

    #[test]
    fn step_function_boundary() {
        assert_eq!(rd_step(1.5, 1.5), ExtReal::Finite(0.0));
        assert_eq!(rd_step(1.5 - 1e-9, 1.5), ExtReal::PosInf);
        for a in [0.0, 0.3, 10.0] {
            assert_eq!(rd_step(a, 0.0), ExtReal::Finite(0.0));
        }
    }

    fn node(id: &str, kind: usize, x: f64) -> WsnNode {
        WsnNode { id: id.into(), kind, coords: vec![x, x] }
    }

    fn meta() -> DatasetMetadata {
        DatasetMetadata { source: "test".into(), d: 2, bbox_min: vec![0.0; 2], bbox_max: vec![1.0; 2], anisotropic: false }
    }

    #[test]
    fn counting_fit() {
        let nodes = vec![node("a", 0, 0.1), node("b", 0, 0.2), node("c", 1, 0.3), node("d", 1, 0.4)];
        let ds = WsnDataset::new(nodes.clone(), vec![(0, 2)], meta()).unwrap();
        let fit = fit_from_dataset(&ds, 2).unwrap();
        assert_eq!(fit.pi_hat, vec![0.5, 0.5]);
        assert_eq!(fit.omega_hat[0][1], 0.25);
        assert_eq!(fit.omega_hat[1][0], 0.25);
        assert!(fit.residual < 1e-15);
        assert!(fit.report().contains("threshold"));

        let empty = WsnDataset::new(nodes, vec![], meta()).unwrap();
        let fit = fit_from_dataset(&empty, 2).unwrap();
        assert!(fit.lambda_hat.iter().flatten().all(|l| *l == Some(0.0)));
        assert_eq!(fit.threshold, 0.0);
    }

    #[test]
    fn single_type_leaves_cross_terms_missing() {
        let nodes = vec![node("a", 0, 0.1), node("b", 0, 0.2), node("c", 0, 0.3)];
        let ds = WsnDataset::new(nodes, vec![(0, 1)], meta()).unwrap();
        let fit = fit_from_dataset(&ds, 2).unwrap();
        assert!(fit.lambda_hat[0][0].is_some());
        assert_eq!(fit.lambda_hat[0][1], None);
        assert_eq!(fit.lambda_hat[1][1], None);
        assert!(fit.params.is_none());
        assert!(fit.report().contains("missing"));
    }

    #[test]
    fn dataset_invariants() {
        let nodes = vec![node("a", 0, 0.1), node("b", 1, 0.2)];
        assert!(WsnDataset::new(nodes.clone(), vec![(0, 0)], meta()).is_err());
        assert!(WsnDataset::new(nodes.clone(), vec![(0, 5)], meta()).is_err());
        assert!(WsnDataset::new(nodes, vec![(0, 1), (1, 0)], meta()).is_err());
    }

    #[test]
    fn csv_round_trip_and_normalization() {
        let nodes_csv = "id,type,x_1,x_2\nn1,SG,10,100\nn2,SI,30,150\nn3,SI,20,200\n";
        let links_csv = "id_u,id_v\nn1,n2\nn3,n2\n";
        let ds = WsnDataset::read_csv(nodes_csv.as_bytes(), links_csv.as_bytes(), "inline").unwrap();
        assert_eq!(ds.metadata.bbox_min, vec![10.0, 100.0]);
        assert_eq!(ds.metadata.bbox_max, vec![30.0, 200.0]);
        assert!(ds.metadata.anisotropic);
        assert_eq!(ds.nodes[0].coords, vec![0.0, 0.0]);
        assert!(ds.nodes.iter().flat_map(|n| &n.coords).all(|x| (0.0..1.0).contains(x)));
        assert_eq!(ds.links, vec![(0, 1), (1, 2)]);

        let (mut a, mut b) = (Vec::new(), Vec::new());
        ds.write_csv(&mut a, &mut b).unwrap();
        let back = WsnDataset::read_csv(&a[..], &b[..], "inline").unwrap();
        assert_eq!(back.links, ds.links);
        assert_eq!(back.nodes.iter().map(|n| n.kind).collect::<Vec<_>>(), vec![0, 1, 1]);

        let bad = "id,type,x_1,x_2\nn1,XX,0,0\n";
        assert!(WsnDataset::read_csv(bad.as_bytes(), links_csv.as_bytes(), "x").is_err());
        let dangling = "id_u,id_v\nn1,n9\n";
        assert!(WsnDataset::read_csv(nodes_csv.as_bytes(), dangling.as_bytes(), "x").is_err());
    }

    #[test]
    fn fit_round_trip_on_a_sample() {
        let params = ModelParams::new(2, 3000, wsn_alphabet(), vec![0.4, 0.6], vec![vec![1.0, 0.5], vec![0.5, 2.0]], 17).unwrap();
        let g = sample_graph(&params).unwrap();
        let ds = WsnDataset::from_graph(&g, "synthetic").unwrap();
        let fit = fit_from_dataset(&ds, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let rel = (fit.lambda_hat[a][b].unwrap() - params.lambda[a][b]).abs() / params.lambda[a][b];
                assert!(rel < 0.2, "({a},{b}) rel {rel}");
            }
        }
        let back = omega_limit(&fit.params.as_ref().unwrap().lambda, &fit.pi_hat, 2).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                assert!((back[a][b] - fit.omega_hat[a][b]).abs() <= fit.residual + 1e-15);
            }
        }
    }

    #[test]
    fn step_is_the_rd_limit_on_a_bipartite_instance() {
        // no same-type links and equal type frequencies: the threshold
        // coincides with ⟨σ, p⊗p⟩ for squared-degree distortion
        let lambda = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        let params = ModelParams::new(2, 1000, wsn_alphabet(), vec![0.5, 0.5], lambda, 1).unwrap();
        let tp = TypePair::limit(&params).unwrap();
        let threshold = rd_threshold(&tp).unwrap();
        let kernel = PoissonFiberKernel::new(&tp, 30).unwrap();
        let sigma = DistortionFn::squared_degree(2, 30);
        let alphas: Vec<f64> = (1..=10).map(|i| threshold + 0.1 * i as f64).collect();
        let curve = rd_curve(&sigma, &kernel, &alphas, &RdOptions::default()).unwrap();
        assert!((curve.alpha_av - threshold).abs() < 1e-8);
        for r in &curve.r_values {
            assert!(r.finite().unwrap() <= 1e-6);
        }
        let below = rd_curve(&sigma, &kernel, &[threshold - 0.5], &RdOptions::default()).unwrap();
        assert!(below.r_values[0].to_f64() > 1e-3);
    }
}
