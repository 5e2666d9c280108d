//! The Poisson-fiber limit law `p_{πω}` and the entropy functionals built
//! on it.
//!
//! `p_{πω}(a, ℓ) = π(a) · Π_b Poisson(ω(a,b)/π(a))(ℓ(b))`: a color drawn
//! from `π`, then independent Poisson neighbor counts per color. The law is
//! tabulated on count vectors truncated at a cap `L`; the table keeps the
//! exact formula on every cell, so its total mass falls short of one by the
//! Poisson tail beyond `L`.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::distortion::DistortionFn;
use crate::empirical::{psi, Atom, LocalView, Measure, TypePair};
use crate::error::{Error, Result};
use crate::graph::Alphabet;
use crate::numeric::{compensated_sum, fmt_f64, logsumexp, ExtReal};

/// Largest table the kernel will enumerate.
pub const MAX_ATOMS: usize = 5_000_000;

/// Absolute tolerance of the color-marginal and consistency gates of `J₁`.
pub const GATE_TOL: f64 = 1e-9;

fn ln_factorial(l: u32) -> f64 {
    (2..=l as u64).map(|i| (i as f64).ln()).sum()
}

fn ln_poisson_pmf(c: f64, l: u32) -> f64 {
    if c == 0.0 {
        return if l == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    -c + l as f64 * c.ln() - ln_factorial(l)
}

fn intensity(tp: &TypePair, a: usize, b: usize) -> Result<f64> {
    let w = tp.omega[a][b];
    if tp.pi[a] > 0.0 {
        Ok(w / tp.pi[a])
    } else if w == 0.0 {
        Ok(0.0)
    } else {
        Err(Error::NullColor(tp.alphabet.label(a).to_string()))
    }
}

/// `p_{πω}(a, ℓ)`, evaluated in log space.
pub fn p_mass(a: usize, l: &[u32], tp: &TypePair) -> Result<f64> {
    let k = tp.k();
    if a >= k {
        return Err(Error::InvalidParams(format!("color {a} outside alphabet of size {k}")));
    }
    if l.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: l.len() });
    }
    let mut log_mass = tp.pi[a].ln();
    for (b, &count) in l.iter().enumerate() {
        log_mass += ln_poisson_pmf(intensity(tp, a, b)?, count);
    }
    Ok(log_mass.exp())
}

/// `p_{πω}(x) · p_{πω}(y)`.
pub fn product_mass(vx: &LocalView, vy: &LocalView, tp: &TypePair) -> Result<f64> {
    Ok(p_mass(vx.color, &vx.counts, tp)? * p_mass(vy.color, &vy.counts, tp)?)
}

/// Tabulated `p_{πω}` on `{color} × {0..=cap}^k`.
#[derive(Debug, Clone)]
pub struct PoissonFiberKernel {
    type_pair: TypePair,
    cap: u32,
    views: Vec<LocalView>,
    masses: Vec<f64>,
    total: f64,
}

impl PoissonFiberKernel {
    pub fn new(tp: &TypePair, cap: u32) -> Result<Self> {
        let k = tp.k();
        let base = cap as usize + 1;
        let per_color = base
            .checked_pow(k as u32)
            .filter(|&m| m.saturating_mul(k) <= MAX_ATOMS)
            .ok_or_else(|| Error::InvalidParams(format!("kernel table for {k} colors at cap {cap} is too large")))?;

        // log pmf per (a, b, count)
        let mut log_pmf = vec![vec![vec![0.0; base]; k]; k];
        for a in 0..k {
            for b in 0..k {
                let c = intensity(tp, a, b)?;
                for l in 0..base {
                    log_pmf[a][b][l] = ln_poisson_pmf(c, l as u32);
                }
            }
        }

        let mut views = Vec::with_capacity(per_color * k);
        let mut masses = Vec::with_capacity(per_color * k);
        for a in 0..k {
            let log_pi = tp.pi[a].ln();
            for idx in 0..per_color {
                let counts = decode(idx, base, k);
                let log_mass = log_pi + counts.iter().enumerate().map(|(b, &l)| log_pmf[a][b][l as usize]).sum::<f64>();
                views.push(LocalView::new(a, counts));
                masses.push(log_mass.exp());
            }
        }
        let total = compensated_sum(masses.iter().copied());
        Ok(PoissonFiberKernel { type_pair: tp.clone(), cap, views, masses, total })
    }

    pub fn type_pair(&self) -> &TypePair {
        &self.type_pair
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.type_pair.alphabet
    }

    pub fn cap(&self) -> u32 {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    /// Support atoms in table order.
    pub fn views(&self) -> &[LocalView] {
        &self.views
    }

    /// Raw (unnormalized) table masses aligned with [`views`](Self::views).
    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Mass lost to truncation, `1 − Σ table`.
    pub fn deficit(&self) -> f64 {
        1.0 - self.total
    }

    /// Table masses rescaled to sum to one.
    pub fn normalized_masses(&self) -> Vec<f64> {
        self.masses.iter().map(|m| m / self.total).collect()
    }

    /// Table index of a view, `None` outside the truncated support.
    pub fn index_of(&self, v: &LocalView) -> Option<usize> {
        let k = self.type_pair.k();
        if v.color >= k || v.counts.len() != k || v.counts.iter().any(|&c| c > self.cap) {
            return None;
        }
        let base = self.cap as usize + 1;
        let within = v.counts.iter().rev().fold(0usize, |acc, &c| acc * base + c as usize);
        Some(v.color * base.pow(k as u32) + within)
    }

    /// Raw table mass of a view; zero outside the support.
    pub fn mass(&self, v: &LocalView) -> f64 {
        self.index_of(v).map_or(0.0, |i| self.masses[i])
    }

    /// The truncated, renormalized law as a [`Measure`].
    pub fn to_measure(&self) -> Measure<LocalView> {
        Measure::from_weights(self.views.iter().cloned().zip(self.normalized_masses())).expect("masses are valid")
    }

    /// CSV with header `color,count_<label>…,mass` (raw masses).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let alphabet = self.alphabet();
        let mut header = vec!["color".to_string()];
        header.extend(alphabet.labels().iter().map(|l| format!("count_{l}")));
        header.push("mass".into());
        out.write_record(&header)?;
        for (v, &m) in self.views.iter().zip(&self.masses) {
            let mut row = vec![alphabet.label(v.color).to_string()];
            row.extend(v.counts.iter().map(u32::to_string));
            row.push(fmt_f64(m));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn decode(mut idx: usize, base: usize, k: usize) -> Vec<u32> {
    (0..k)
        .map(|_| {
            let c = (idx % base) as u32;
            idx /= base;
            c
        })
        .collect()
}

/// `H(μ‖ν) = Σ μ log(μ/ν)` with `0·log 0 = 0`; `+∞` when `μ` charges a
/// `ν`-null atom. Every atom of `μ`'s support must belong to `ν`'s.
pub fn relative_entropy<A: Atom>(mu: &Measure<A>, nu: &Measure<A>) -> Result<ExtReal> {
    for (name, m) in [("mu", mu), ("nu", nu)] {
        if !m.is_probability(1e-9) {
            return Err(Error::InvalidParams(format!("{name} has total mass {}, not 1", m.total())));
        }
    }
    let mut terms = Vec::with_capacity(mu.len());
    for (atom, w) in mu.iter() {
        if !nu.contains(atom) {
            return Err(Error::SupportMismatch(format!("{atom:?} is outside the reference support")));
        }
        if w == 0.0 {
            continue;
        }
        let v = nu.weight(atom);
        if v == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        terms.push(w * (w / v).ln());
    }
    Ok(ExtReal::Finite(compensated_sum(terms).max(0.0)))
}

/// Whether a marginal passes the `J₁` gates: consistent `Ψ`-image and
/// color law equal to `π`.
fn marginal_gate(marginal: &Measure<LocalView>, tp: &TypePair) -> bool {
    let img = psi(marginal, &tp.alphabet);
    img.consistent && img.pi.iter().zip(&tp.pi).all(|(a, b)| (a - b).abs() <= GATE_TOL)
}

/// `J₁(μ) = H(μ ‖ p⊗p)` when both marginals are consistent with color law
/// `π`, `+∞` otherwise. The reference is the truncated, renormalized
/// kernel.
pub fn rate_j1(mu: &Measure<(LocalView, LocalView)>, kernel: &PoissonFiberKernel) -> Result<ExtReal> {
    if !mu.is_probability(1e-9) {
        return Err(Error::InvalidParams(format!("mu has total mass {}, not 1", mu.total())));
    }
    let tp = kernel.type_pair();
    let first = mu.map(|(x, _)| x.clone());
    let second = mu.map(|(_, y)| y.clone());
    if !marginal_gate(&first, tp) || !marginal_gate(&second, tp) {
        return Ok(ExtReal::PosInf);
    }
    let p = kernel.normalized_masses();
    let mut terms = Vec::with_capacity(mu.len());
    for ((x, y), w) in mu.iter() {
        let (Some(i), Some(j)) = (kernel.index_of(x), kernel.index_of(y)) else {
            return Err(Error::SupportMismatch(format!(
                "({}, {}) is outside the truncated kernel support",
                x.render(kernel.alphabet()),
                y.render(kernel.alphabet())
            )));
        };
        if w == 0.0 {
            continue;
        }
        let nu = p[i] * p[j];
        if nu == 0.0 {
            return Ok(ExtReal::PosInf);
        }
        terms.push(w * (w / nu).ln());
    }
    Ok(ExtReal::Finite(compensated_sum(terms).max(0.0)))
}

/// Per-atom constraint features shared by both coordinates: color
/// indicators centred at `π` (all but the last color) and the
/// antisymmetric mean-count terms whose vanishing means consistency.
fn atom_features(v: &LocalView, pi: &[f64]) -> Vec<f64> {
    let k = pi.len();
    let mut f = Vec::with_capacity(k.saturating_sub(1) + k * (k - 1) / 2);
    for (a, &p) in pi.iter().enumerate().take(k - 1) {
        f.push((v.color == a) as u8 as f64 - p);
    }
    for a in 0..k {
        for b in a + 1..k {
            let fwd = if v.color == a { v.counts[b] as f64 } else { 0.0 };
            let bwd = if v.color == b { v.counts[a] as f64 } else { 0.0 };
            f.push(fwd - bwd);
        }
    }
    f
}

/// `J_σ(t) = inf { J₁(μ) : ⟨σ, μ⟩ = t }` on the truncated pair support.
///
/// Every constraint hidden in `J₁` (both color marginals equal to `π`, both
/// `Ψ`-images symmetric) and the distortion level are linear in `μ`, so the
/// infimum is an I-projection of `p⊗p` onto an affine set. It is computed
/// through its dual, `sup_λ −log E_{p⊗p} exp(λ·f)`, an exponential tilt of
/// the reference whose parameters are found by damped Newton steps.
pub fn contract_j_sigma(t: f64, sigma: &DistortionFn, kernel: &PoissonFiberKernel) -> Result<ExtReal> {
    let p = kernel.normalized_masses();
    let atoms: Vec<usize> = (0..p.len()).filter(|&i| p[i] > 0.0).collect();
    let views = kernel.views();
    let pi = &kernel.type_pair().pi;
    let na = atoms.len();

    let feats: Vec<Vec<f64>> = atoms.iter().map(|&i| atom_features(&views[i], pi)).collect();
    let q = feats.first().map_or(0, Vec::len);
    let m = 2 * q + 1;

    let mut sig = Vec::with_capacity(na * na);
    for &i in &atoms {
        for &j in &atoms {
            sig.push(sigma.eval(&views[i], &views[j]) - t);
        }
    }
    let (lo, hi) = sig.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| (lo.min(s), hi.max(s)));
    let slack = 1e-12 * (1.0 + t.abs());
    if lo > slack || hi < -slack {
        return Ok(ExtReal::PosInf);
    }
    let log_p: Vec<f64> = atoms.iter().map(|&i| p[i].ln()).collect();
    let min_log_ref = 2.0 * log_p.iter().copied().fold(f64::INFINITY, f64::min);

    let pair_feature = |ia: usize, ja: usize, out: &mut [f64]| {
        out[..q].copy_from_slice(&feats[ia]);
        out[q..2 * q].copy_from_slice(&feats[ja]);
        out[2 * q] = sig[ia * na + ja];
    };

    // log Σ ν exp(λ·f), gradient and covariance
    let moments = |lambda: &DVector<f64>, want_hessian: bool| -> (f64, DVector<f64>, DMatrix<f64>) {
        let lx: Vec<f64> = feats.iter().map(|f| f.iter().zip(lambda.iter()).map(|(a, b)| a * b).sum()).collect();
        let ly: Vec<f64> = feats.iter().map(|f| f.iter().zip(lambda.iter().skip(q)).map(|(a, b)| a * b).sum()).collect();
        let ls = lambda[2 * q];
        let mut logits = Vec::with_capacity(na * na);
        for ia in 0..na {
            for ja in 0..na {
                logits.push(log_p[ia] + log_p[ja] + lx[ia] + ly[ja] + ls * sig[ia * na + ja]);
            }
        }
        let log_z = logsumexp(&logits);
        let mut mean = DVector::<f64>::zeros(m);
        let mut second = DMatrix::<f64>::zeros(m, m);
        let mut f = vec![0.0; m];
        for ia in 0..na {
            for ja in 0..na {
                let w = (logits[ia * na + ja] - log_z).exp();
                if w == 0.0 {
                    continue;
                }
                pair_feature(ia, ja, &mut f);
                for r in 0..m {
                    mean[r] += w * f[r];
                    if want_hessian {
                        for c in 0..=r {
                            second[(r, c)] += w * f[r] * f[c];
                        }
                    }
                }
            }
        }
        let mut cov = DMatrix::zeros(m, m);
        if want_hessian {
            for r in 0..m {
                for c in 0..=r {
                    let v = second[(r, c)] - mean[r] * mean[c];
                    cov[(r, c)] = v;
                    cov[(c, r)] = v;
                }
            }
        }
        (log_z, mean, cov)
    };

    let mut lambda = DVector::zeros(m);
    let (mut psi_val, mut grad, mut cov) = moments(&lambda, true);
    let blow_up = -min_log_ref + 50.0;
    for _ in 0..500 {
        if grad.amax() <= 1e-12 {
            break;
        }
        if -psi_val > blow_up {
            return Ok(ExtReal::PosInf);
        }
        let ridge = 1e-12 * (1.0 + cov.diagonal().amax());
        let h = &cov + DMatrix::identity(m, m) * ridge;
        let step = match h.clone().svd(true, true).solve(&(-&grad), 1e-14 * (1.0 + cov.diagonal().amax())) {
            Ok(s) => s,
            Err(_) => -&grad,
        };
        let slope = grad.dot(&step);
        let step = if slope < 0.0 { step } else { -&grad };
        let slope = grad.dot(&step);
        let mut s = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = &lambda + &step * s;
            let (trial_psi, _, _) = moments(&trial, false);
            if trial_psi <= psi_val + 1e-4 * s * slope {
                lambda = trial;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted {
            break;
        }
        let next = moments(&lambda, true);
        psi_val = next.0;
        grad = next.1;
        cov = next.2;
    }
    if grad.amax() > 1e-7 {
        if -psi_val > blow_up || grad.amax() > 1e-3 {
            return Ok(ExtReal::PosInf);
        }
        log::warn!("J_sigma({t}) dual did not fully converge: residual {:e}", grad.amax());
    }
    Ok(ExtReal::Finite((-psi_val).max(0.0)))
}

/// Measure on view pairs given by `p̃⊗p̃` on the truncated support.
pub fn product_measure(kernel: &PoissonFiberKernel) -> Measure<(LocalView, LocalView)> {
    let p = kernel.normalized_masses();
    let views = kernel.views();
    let pairs = (0..views.len())
        .flat_map(|i| (0..views.len()).map(move |j| (i, j)))
        .map(|(i, j)| ((views[i].clone(), views[j].clone()), p[i] * p[j]));
    Measure::from_weights(pairs).expect("masses are valid")
}
