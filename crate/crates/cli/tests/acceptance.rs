//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use cgrg::distortion::DistortionFn;
use cgrg::empirical::{
    empirical_measure, local_views, neighbor_counts, poisson_chi_square, tv_distance, LocalView, TypePair,
};
use cgrg::graph::{sample_graph, Alphabet, ModelParams};
use cgrg::kernel::{product_measure, rate_j1, PoissonFiberKernel};
use cgrg::empirical::Measure;
use cgrg::numeric::{median, ExtReal};
use cgrg::rate_distortion::{
    alpha_brackets, empirical_cumulant_grid, legendre, mc_ball_exponent, rd_curve, single_letter_cumulant,
    LegendreOptions, McConfig, RdOptions, Side, SingleLetter,
};
use cgrg::rng::derive_seed;
use cgrg::wsn::{fit_from_dataset, rd_step, rd_threshold, wsn_alphabet, WsnDataset};
use rayon::prelude::*;

const QUARTER_PI: f64 = std::f64::consts::FRAC_PI_4;

fn base(n: usize, seed: u64) -> ModelParams {
    ModelParams::uniform(2, n, vec![0.5, 0.5], 1.0, seed).unwrap()
}

fn seeds(tag: u64, count: u64) -> Vec<u64> {
    (0..count).map(|i| derive_seed(20_240_601, &[tag, i])).collect()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn edge_intensity() -> Outcome {
    let omegas: Vec<Vec<Vec<f64>>> = seeds(1, 20)
        .into_par_iter()
        .map(|s| TypePair::of_graph(&sample_graph(&base(5000, s)).unwrap()).omega)
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let errs: Vec<f64> = omegas.iter().map(|w| (w[a][b] - QUARTER_PI).abs() / QUARTER_PI).collect();
            worst = worst.max(median(&errs));
        }
    }
    outcome(worst <= 0.10, format!("worst median relative error {worst:.4} (limit 0.10)"))
}

fn poissonization() -> Outcome {
    let g = sample_graph(&base(4000, seeds(2, 1)[0])).unwrap();
    let tp = TypePair::of_graph(&g);
    let views = local_views(&g, 30);
    let mut min_p: f64 = 1.0;
    for a in 0..2 {
        for b in 0..2 {
            let t = poisson_chi_square(&neighbor_counts(&views, a, b), tp.omega[a][b] / tp.pi[a], 1);
            min_p = min_p.min(t.p_value);
        }
    }
    let kernel = PoissonFiberKernel::new(&tp, 30).unwrap();
    let tv = tv_distance(&empirical_measure(&views).unwrap(), &kernel.to_measure());
    outcome(min_p >= 0.01 && tv <= 0.10, format!("smallest chi-square p {min_p:.4} (≥ 0.01), TV {tv:.4} (≤ 0.10)"))
}

fn slln_monotone() -> Outcome {
    let kernel = PoissonFiberKernel::new(&TypePair::limit(&base(10, 0)).unwrap(), 30).unwrap();
    let reference = kernel.to_measure();
    let medians: Vec<f64> = [500usize, 2000, 8000]
        .iter()
        .map(|&n| {
            let tvs: Vec<f64> = seeds(3, 20)
                .into_par_iter()
                .map(|s| {
                    let g = sample_graph(&base(n, s)).unwrap();
                    tv_distance(&empirical_measure(&local_views(&g, 30)).unwrap(), &reference)
                })
                .collect();
            median(&tvs)
        })
        .collect();
    let pass = medians.windows(2).all(|w| w[1] <= w[0]);
    outcome(pass, format!("median TV at n = 500, 2000, 8000: {medians:.4?}"))
}

fn rate_function_zero() -> Outcome {
    let kernel = PoissonFiberKernel::new(&TypePair::limit(&base(10, 0)).unwrap(), 8).unwrap();
    let j = rate_j1(&product_measure(&kernel), &kernel).unwrap();
    let v0 = LocalView::new(0, vec![0, 0]);
    let v1 = LocalView::new(1, vec![0, 0]);
    let skewed = Measure::from_weights([((v0.clone(), v1.clone()), 1.0)]).unwrap();
    let a = LocalView::new(0, vec![0, 1]);
    let inconsistent = Measure::from_weights([
        ((a.clone(), a.clone()), 0.25),
        ((a.clone(), v1.clone()), 0.25),
        ((v1.clone(), a.clone()), 0.25),
        ((v1.clone(), v1.clone()), 0.25),
    ])
    .unwrap();
    let gate_color = rate_j1(&skewed, &kernel).unwrap();
    let gate_psi = rate_j1(&inconsistent, &kernel).unwrap();
    let zero = j.finite().is_some_and(|x| x <= 1e-8);
    let pass = zero && gate_color.is_infinite() && gate_psi.is_infinite();
    outcome(pass, format!("J1(p⊗p) = {j}, color gate {gate_color}, consistency gate {gate_psi}"))
}

fn kl2(w: f64, own: f64, other: f64) -> f64 {
    let term = |m: f64, r: f64| if m > 0.0 { m * (m / r).ln() } else { 0.0 };
    term(1.0 - w, own) + term(w, other)
}

/// Hamming distortion only sees colors, so by data processing the primal
/// reduces to a grid over the two color-switch probabilities.
fn hamming_primal(alpha: f64) -> f64 {
    let objective = |w1: f64, w2: f64| {
        if 0.5 * w1 + 0.5 * w2 > alpha + 1e-15 {
            f64::INFINITY
        } else {
            0.5 * kl2(w1, 0.5, 0.5) + 0.5 * kl2(w2, 0.5, 0.5)
        }
    };
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..=1000 {
        for j in 0..=1000 {
            let v = objective(i as f64 * 1e-3, j as f64 * 1e-3);
            if v < best.0 {
                best = (v, i as f64 * 1e-3);
            }
        }
    }
    for i in -1000..=1000 {
        let w1 = (best.1 + i as f64 * 1e-6).clamp(0.0, 1.0);
        let w2 = (2.0 * alpha - w1).clamp(0.0, 1.0);
        best.0 = best.0.min(objective(w1, w2));
    }
    best.0
}

fn primal_dual() -> Outcome {
    let tp = TypePair::new(Alphabet::numbered(2), vec![0.5, 0.5], vec![vec![0.25; 2]; 2]).unwrap();
    let kernel = PoissonFiberKernel::new(&tp, 2).unwrap();
    let h = DistortionFn::hamming_color();
    let alphas: Vec<f64> = (1..=10).map(|i| 0.045 * i as f64).collect();
    let curve = rd_curve(&h, &kernel, &alphas, &RdOptions::default()).unwrap();
    let mut worst_rd: f64 = 0.0;
    for (a, r) in alphas.iter().zip(&curve.r_values) {
        worst_rd = worst_rd.max((r.to_f64() - hamming_primal(*a)).abs());
    }
    let p = kernel.normalized_masses();
    let views = kernel.views();
    let mut worst_cum: f64 = 0.0;
    for sigma in [h, DistortionFn::squared_degree(2, 2)] {
        for t in [-1.0, 0.3, 1.0] {
            let mut brute = 0.0;
            for (i, x) in views.iter().enumerate() {
                let inner: f64 = views.iter().enumerate().map(|(j, y)| p[j] * (t * sigma.eval(x, y)).exp()).sum();
                brute += p[i] * inner.ln();
            }
            worst_cum = worst_cum.max((single_letter_cumulant(t, &sigma, &kernel) - brute).abs());
        }
    }
    let pass = kernel.len() == 18 && worst_rd <= 1e-3 && worst_cum <= 1e-12;
    outcome(pass, format!("{} atoms, max |dual − primal| {worst_rd:.2e}, max cumulant gap {worst_cum:.2e}", kernel.len()))
}

fn cumulant_convergence() -> Outcome {
    let ts = [-1.0, 0.5, 1.0];
    let h = DistortionFn::hamming_color();
    let kernel = PoissonFiberKernel::new(&TypePair::limit(&base(10, 0)).unwrap(), 30).unwrap();
    let exact: Vec<f64> = ts.iter().map(|&t| single_letter_cumulant(t, &h, &kernel)).collect();
    let cfg = McConfig::default();
    let mut pass = true;
    let mut lines = Vec::new();
    let mut gaps = vec![vec![0.0; 3]; ts.len()];
    let mut last_se = vec![0.0; ts.len()];
    for (ni, &n) in [50usize, 100, 200].iter().enumerate() {
        let runs: Vec<_> =
            seeds(6, 10).iter().map(|&s| empirical_cumulant_grid(&ts, &h, &base(n, s), &cfg).unwrap()).collect();
        for (ti, _) in ts.iter().enumerate() {
            let g: Vec<f64> = runs.iter().map(|c| (c.points[ti].value - exact[ti]).abs()).collect();
            gaps[ti][ni] = median(&g);
            if n == 200 {
                let se: Vec<f64> = runs.iter().map(|c| c.points[ti].stderr).collect();
                last_se[ti] = median(&se);
            }
        }
    }
    for (ti, t) in ts.iter().enumerate() {
        let mono = gaps[ti].windows(2).all(|w| w[1] < w[0]);
        let within = gaps[ti][2] <= 3.0 * last_se[ti];
        pass &= mono && within;
        let shown: Vec<String> = gaps[ti].iter().map(|g| format!("{g:.3e}")).collect();
        lines.push(format!("t={t}: gaps [{}], se {:.3e}", shown.join(", "), last_se[ti]));
    }
    outcome(pass, lines.join("; "))
}

fn ball_exponent() -> Outcome {
    let params = base(150, seeds(7, 1)[0]);
    let h = DistortionFn::hamming_color();
    let kernel = PoissonFiberKernel::new(&TypePair::limit(&params).unwrap(), 30).unwrap();
    let b = alpha_brackets(&h, &kernel, &params, &McConfig::default()).unwrap();
    let alpha = 0.5 * (b.alpha_min + b.alpha_av);
    let sl = SingleLetter::new(&h, &kernel);
    let dual = legendre(&sl, alpha, &LegendreOptions { side: Side::NonPositive, ..LegendreOptions::default() })
        .unwrap()
        .to_f64();
    let est = mc_ball_exponent(&params, &h, alpha, 100_000, &McConfig::default()).unwrap();
    let rel = match est.estimate {
        ExtReal::Finite(e) => (e - dual).abs() / dual,
        ExtReal::PosInf => f64::INFINITY,
    };
    let pass = rel <= 0.25 && est.covers(dual);
    outcome(
        pass,
        format!(
            "alpha {alpha:.4}, estimate {} [{:.4}, {}], dual {dual:.4}, relative gap {rel:.3} (≤ 0.25)",
            est.estimate, est.ci_low, est.ci_high
        ),
    )
}

fn wsn_application() -> Outcome {
    let tp = TypePair::limit(&ModelParams::new(2, 10, wsn_alphabet(), vec![0.5, 0.5], vec![vec![1.0; 2]; 2], 0).unwrap())
        .unwrap();
    let threshold = rd_threshold(&tp).unwrap();
    let expected = 6.0 * QUARTER_PI;
    let steps_ok = rd_step(4.72, threshold) == ExtReal::Finite(0.0) && rd_step(4.70, threshold).is_infinite();
    let fits: Vec<Vec<Vec<f64>>> = seeds(8, 10)
        .into_par_iter()
        .map(|s| {
            let p = ModelParams::new(2, 5000, wsn_alphabet(), vec![0.5, 0.5], vec![vec![1.0; 2]; 2], s).unwrap();
            let ds = WsnDataset::from_graph(&sample_graph(&p).unwrap(), "acceptance").unwrap();
            let fit = fit_from_dataset(&ds, 2).unwrap();
            fit.lambda_hat.iter().map(|r| r.iter().map(|x| x.unwrap_or(f64::NAN)).collect()).collect()
        })
        .collect();
    let mut worst: f64 = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            let errs: Vec<f64> = fits.iter().map(|l| (l[a][b] - 1.0).abs()).collect();
            worst = worst.max(median(&errs));
        }
    }
    let pass = (threshold - expected).abs() < 1e-9 && steps_ok && worst <= 0.15;
    outcome(pass, format!("threshold {threshold:.6}, step ok {steps_ok}, worst median λ error {worst:.4} (≤ 0.15)"))
}

const MODEL: &str = r#"
[model]
d = 2
n = 120
alphabet = ["a", "b"]
pi = [0.5, 0.5]
lambda = [[1.0, 0.5], [0.5, 1.0]]
seed = 99

[output]
dir = "out"
"#;

const EXPERIMENTS: [(&str, &str); 7] = [
    ("generate", "[experiment]\nname = \"generate\"\n"),
    ("stats", "[experiment]\nname = \"stats\"\ncap = 10\n"),
    ("slln-check", "[experiment]\nname = \"slln-check\"\nn_ladder = [100, 200]\nreplicates = 4\ncap = 10\n"),
    (
        "cumulant",
        "[distortion]\nkind = \"squared_degree\"\n[experiment]\nname = \"cumulant\"\nt_grid = [-0.5, 0.0, 0.5]\ncap = 6\n[experiment.sampling]\nouter = 6\ninner = 50\n",
    ),
    (
        "rd-curve",
        "[distortion]\nkind = \"hamming_color\"\n[experiment]\nname = \"rd-curve\"\nalphas = [0.1, 0.3, 0.5]\ncap = 6\n[experiment.brackets]\nouter = 4\ninner = 40\n",
    ),
    (
        "ball-exponent",
        "[distortion]\nkind = \"hamming_color\"\n[experiment]\nname = \"ball-exponent\"\nalpha = \"midpoint\"\ninner = 500\ncap = 6\n[experiment.brackets]\nouter = 4\ninner = 40\n",
    ),
    ("wsn-fit", "[experiment]\nname = \"wsn-fit\"\n"),
];

fn cli(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_cgrg")).args(args).status().map(|s| s.success()).unwrap_or(false)
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let mut failures = Vec::new();
    for (name, body) in EXPERIMENTS {
        let dir = tmp.path().join(name);
        std::fs::create_dir_all(&dir).unwrap();
        let mut model = MODEL.to_string();
        if name == "wsn-fit" {
            model = model.replace("[\"a\", \"b\"]", "[\"SG\", \"SI\"]");
        }
        let cfg = dir.join("run.toml");
        std::fs::write(&cfg, format!("{model}{body}")).unwrap();
        let out = dir.join("out");
        if !cli(&[name, "--config", cfg.to_str().unwrap(), "--threads", "1"]) {
            failures.push(format!("{name}: first run failed"));
            continue;
        }
        let first = snapshot(&out);
        let manifest = dir.join("manifest.json");
        std::fs::copy(out.join("manifest.json"), &manifest).unwrap();
        std::fs::remove_dir_all(&out).unwrap();
        if !cli(&[name, "--config", manifest.to_str().unwrap(), "--threads", "4"]) {
            failures.push(format!("{name}: replay failed"));
            continue;
        }
        if snapshot(&out) != first {
            failures.push(format!("{name}: replay differs"));
        }
    }
    let detail = if failures.is_empty() {
        format!("{} experiments replayed byte-identically at 1 and 4 threads", EXPERIMENTS.len())
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

type Criterion = (u32, &'static str, Duration, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        (1, "edge-intensity limit", Duration::from_secs(60), edge_intensity),
        (2, "poissonization", Duration::from_secs(60), poissonization),
        (3, "empirical view law concentrates", Duration::from_secs(180), slln_monotone),
        (4, "rate function zero and gates", Duration::from_secs(5), rate_function_zero),
        (5, "primal-dual equivalence", Duration::from_secs(120), primal_dual),
        (6, "cumulant convergence", Duration::from_secs(300), cumulant_convergence),
        (7, "ball exponent", Duration::from_secs(600), ball_exponent),
        (8, "sensor network threshold and fit", Duration::from_secs(120), wsn_application),
        (9, "determinism", Duration::from_secs(60), determinism),
    ];
    let mut failed = 0;
    for (id, name, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        if !pass {
            failed += 1;
        }
        println!(
            "{} criterion {id} ({name}): {} [{:.1}s of {}s]",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} of 9 criteria failed");
        std::process::exit(1);
    }
}
