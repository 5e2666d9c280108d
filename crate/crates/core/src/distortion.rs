//! Single-letter distortions on pairs of local views, their per-graph
//! average `σ⁽ⁿ⁾` and distortion-ball membership.

use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::empirical::LocalView;
use crate::error::{Error, Result};
use crate::graph::Alphabet;
use crate::kernel::PoissonFiberKernel;
use crate::numeric::compensated_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    /// `1` when the two vertex colors differ, else `0`.
    HammingColor,
    /// Squared difference of total local degrees.
    SquaredDegree,
    /// The same value on every pair.
    Constant,
    /// Explicit lookup table over the truncated support.
    Table,
}

/// A bounded, nonnegative single-letter distortion.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionFn {
    kind: DistortionKind,
    constant: f64,
    table: Option<BTreeMap<(LocalView, LocalView), f64>>,
    bound: f64,
}

/// `(Σ_b x.counts[b] − Σ_b y.counts[b])²`.
pub fn squared_degree(vx: &LocalView, vy: &LocalView) -> f64 {
    let diff = vx.degree() as f64 - vy.degree() as f64;
    diff * diff
}

impl DistortionFn {
    pub fn hamming_color() -> Self {
        DistortionFn { kind: DistortionKind::HammingColor, constant: 0.0, table: None, bound: 1.0 }
    }

    /// Squared degree difference; `bound` is its supremum over views with
    /// `k` colors truncated at `cap`.
    pub fn squared_degree(k: usize, cap: u32) -> Self {
        let max_degree = k as f64 * cap as f64;
        DistortionFn {
            kind: DistortionKind::SquaredDegree,
            constant: 0.0,
            table: None,
            bound: max_degree * max_degree,
        }
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c >= 0.0) || !c.is_finite() {
            return Err(Error::InvalidParams(format!("constant distortion {c} must be finite and nonnegative")));
        }
        Ok(DistortionFn { kind: DistortionKind::Constant, constant: c, table: None, bound: c })
    }

    /// Table distortion, required to cover every pair of the kernel's
    /// truncated support.
    pub fn table(
        entries: BTreeMap<(LocalView, LocalView), f64>,
        kernel: &PoissonFiberKernel,
    ) -> Result<Self> {
        if let Some((pair, v)) = entries.iter().find(|(_, &v)| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams(format!("table value {v} at {pair:?} is not finite and nonnegative")));
        }
        let views = kernel.views();
        for x in views {
            for y in views {
                if !entries.contains_key(&(x.clone(), y.clone())) {
                    return Err(Error::SupportMismatch(format!(
                        "distortion table has no entry for ({}, {})",
                        x.render(kernel.alphabet()),
                        y.render(kernel.alphabet())
                    )));
                }
            }
        }
        let bound = entries.values().copied().fold(0.0, f64::max);
        Ok(DistortionFn { kind: DistortionKind::Table, constant: 0.0, table: Some(entries), bound })
    }

    /// Load a table from CSV with header `view_x,view_y,value`.
    pub fn table_from_csv<R: Read>(reader: R, alphabet: &Alphabet, kernel: &PoissonFiberKernel) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["view_x", "view_y", "value"] {
            return Err(Error::Parse(format!("expected header view_x,view_y,value, got {headers:?}")));
        }
        let mut entries = BTreeMap::new();
        for record in rdr.records() {
            let record = record?;
            let x = LocalView::parse(&record[0], alphabet)?;
            let y = LocalView::parse(&record[1], alphabet)?;
            let v: f64 = record[2]
                .parse()
                .map_err(|_| Error::Parse(format!("bad distortion value {:?}", &record[2])))?;
            if entries.insert((x, y), v).is_some() {
                return Err(Error::Parse(format!("duplicate table entry ({}, {})", &record[0], &record[1])));
            }
        }
        Self::table(entries, kernel)
    }

    pub fn kind(&self) -> DistortionKind {
        self.kind
    }

    /// Supremum over the truncated support.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn eval(&self, x: &LocalView, y: &LocalView) -> f64 {
        match self.kind {
            DistortionKind::HammingColor => (x.color != y.color) as u8 as f64,
            DistortionKind::SquaredDegree => squared_degree(x, y),
            DistortionKind::Constant => self.constant,
            DistortionKind::Table => *self
                .table
                .as_ref()
                .expect("table kind carries a table")
                .get(&(x.clone(), y.clone()))
                .unwrap_or_else(|| panic!("distortion table has no entry for ({x:?}, {y:?})")),
        }
    }

    /// A key such that views with equal keys are interchangeable as either
    /// argument of `σ`. `None` when no such reduction is known.
    pub(crate) fn class_key(&self, v: &LocalView) -> Option<u64> {
        match self.kind {
            DistortionKind::HammingColor => Some(v.color as u64),
            DistortionKind::SquaredDegree => Some(v.degree()),
            DistortionKind::Constant => Some(0),
            DistortionKind::Table => None,
        }
    }

    /// True when `σ` only looks at vertex colors.
    pub fn color_only(&self) -> bool {
        matches!(self.kind, DistortionKind::HammingColor | DistortionKind::Constant)
    }
}

/// `σ⁽ⁿ⁾(x, y) = (1/n) Σ_i σ(x_i, y_i)`.
pub fn sigma_n(xs: &[LocalView], ys: &[LocalView], f: &DistortionFn) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.is_empty() {
        return Err(Error::Empty("view list"));
    }
    if f.kind == DistortionKind::Constant {
        return Ok(f.constant);
    }
    Ok(compensated_sum(xs.iter().zip(ys).map(|(x, y)| f.eval(x, y))) / xs.len() as f64)
}

/// Membership of `y` in the distortion ball `B(x, α)`.
pub fn in_ball(xs: &[LocalView], ys: &[LocalView], f: &DistortionFn, alpha: f64) -> Result<bool> {
    Ok(sigma_n(xs, ys, f)? <= alpha)
}
