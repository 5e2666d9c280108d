//! Experiment runners. Every file goes into the configured output
//! directory under a fixed name.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use cgrg::distortion::DistortionFn;
use cgrg::empirical::{empirical_measure, local_views, neighbor_counts, poisson_chi_square, tv_distance, TypePair};
use cgrg::graph::{sample_graph, ModelParams};
use cgrg::kernel::PoissonFiberKernel;
use cgrg::numeric::{fmt_f64, median};
use cgrg::rate_distortion::{
    alpha_brackets, empirical_cumulant_grid, legendre, mc_ball_exponent, rd_curve, CumulantFn, LegendreOptions,
    McConfig, RdOptions, Side, SingleLetter, DEFAULT_T_MAX,
};
use cgrg::rng::derive_seed;
use cgrg::wsn::{fit_from_dataset, WsnDataset};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{AlphaChoice, DistortionSpec, Experiment, Manifest, RunConfig, Sampling};
use crate::error::CliError;

const TAG_SLLN: u64 = 11;

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        self.files.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Io(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        w.write_all(body.as_bytes())?;
        w.flush()?;
        Ok(())
    }
}

fn mc_config(s: &Sampling, cap: u32) -> McConfig {
    McConfig {
        outer: s.outer,
        inner: s.inner,
        coupling: s.coupling,
        estimator: s.estimator,
        soft_tau: s.soft_tau,
        cap,
    }
}

fn limit_kernel(model: &ModelParams, cap: u32) -> Result<PoissonFiberKernel, CliError> {
    Ok(PoissonFiberKernel::new(&TypePair::limit(model)?, cap)?)
}

fn distortion(spec: &DistortionSpec, model: &ModelParams, kernel: &PoissonFiberKernel) -> Result<DistortionFn, CliError> {
    Ok(match spec {
        DistortionSpec::HammingColor => DistortionFn::hamming_color(),
        DistortionSpec::SquaredDegree => DistortionFn::squared_degree(model.k(), kernel.cap()),
        DistortionSpec::Constant { value } => DistortionFn::constant(*value)?,
        DistortionSpec::Table { path } => {
            let file = File::open(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            DistortionFn::table_from_csv(file, &model.alphabet, kernel)?
        }
    })
}

/// Run the configured experiment and write its manifest.
pub fn run(cfg: &RunConfig) -> Result<Vec<String>, CliError> {
    cfg.model.validate()?;
    let mut out = Outputs::new(&cfg.output.dir)?;
    let model = &cfg.model;
    let spec = cfg.distortion.as_ref();
    match &cfg.experiment {
        Experiment::Generate {} => generate(model, &mut out)?,
        Experiment::Stats { cap } => stats(model, *cap, &mut out)?,
        Experiment::SllnCheck { n_ladder, replicates, cap } => slln_check(model, n_ladder, *replicates, *cap, &mut out)?,
        Experiment::Cumulant { t_grid, sampling, cap } => {
            let kernel = limit_kernel(model, *cap)?;
            let sigma = distortion(spec.expect("checked"), model, &kernel)?;
            let empirical = empirical_cumulant_grid(t_grid, &sigma, model, &mc_config(sampling, *cap))?;
            empirical.write_csv(out.create("cumulant_empirical.csv")?)?;
            let exact = CumulantFn::tabulate(&SingleLetter::new(&sigma, &kernel), t_grid)?;
            exact.write_csv(out.create("cumulant_single_letter.csv")?)?;
        }
        Experiment::RdCurve { alphas, cap, t_max, brackets } => {
            let kernel = limit_kernel(model, *cap)?;
            let sigma = distortion(spec.expect("checked"), model, &kernel)?;
            let opts = RdOptions {
                t_max: *t_max,
                brackets: brackets.as_ref().map(|s| (model.clone(), mc_config(s, *cap))),
                inf_flag: None,
            };
            let curve = rd_curve(&sigma, &kernel, alphas, &opts)?;
            curve.write_csv(out.create("rd_curve.csv")?)?;
            out.json(
                "rd_summary.json",
                &serde_json::json!({
                    "alpha_min": curve.alpha_min,
                    "alpha_av": curve.alpha_av,
                    "alpha_min_inf_flag": curve.alpha_min_inf_flag,
                    "brackets": curve.brackets,
                }),
            )?;
        }
        Experiment::BallExponent { alpha, inner, coupling, cap, brackets } => {
            let kernel = limit_kernel(model, *cap)?;
            let sigma = distortion(spec.expect("checked"), model, &kernel)?;
            let sl = SingleLetter::new(&sigma, &kernel);
            let (alpha, bracket) = match alpha {
                AlphaChoice::Value(a) => (*a, None),
                AlphaChoice::Named(_) => {
                    let s = brackets.as_ref().expect("checked");
                    let b = alpha_brackets(&sigma, &kernel, model, &mc_config(s, *cap))?;
                    (0.5 * (b.alpha_min + b.alpha_av), Some(b))
                }
            };
            let mc = McConfig { coupling: *coupling, cap: *cap, ..McConfig::with_reps(1, *inner) };
            let est = mc_ball_exponent(model, &sigma, alpha, *inner, &mc)?;
            let dual = legendre(&sl, alpha, &LegendreOptions { t_max: DEFAULT_T_MAX, side: Side::NonPositive })?;
            out.json(
                "ball_exponent.json",
                &serde_json::json!({ "estimate": est, "dual_r": dual, "brackets": bracket }),
            )?;
        }
        Experiment::WsnFit { nodes, links } => wsn_fit(model, nodes.as_deref(), links.as_deref(), &mut out)?,
    }
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        outputs: out.files.clone(),
    };
    out.json("manifest.json", &manifest)?;
    Ok(out.files)
}

fn generate(model: &ModelParams, out: &mut Outputs) -> Result<(), CliError> {
    let g = sample_graph(model)?;
    let mut w = out.create("graph.txt")?;
    g.write_text(&mut w)?;
    w.flush()?;
    out.text("type_pair.json", &(TypePair::of_graph(&g).to_json() + "\n"))
}

fn stats(model: &ModelParams, cap: u32, out: &mut Outputs) -> Result<(), CliError> {
    let g = sample_graph(model)?;
    let views = local_views(&g, cap);
    let l_n = empirical_measure(&views)?;
    l_n.write_csv(out.create("views.csv")?, &model.alphabet)?;
    let tp = TypePair::of_graph(&g);
    let kernel = PoissonFiberKernel::new(&tp, cap)?;
    let tv = tv_distance(&l_n, &kernel.to_measure());
    let mut gof = csv_writer(out.create("gof.csv")?);
    gof.write_record(["from", "to", "mean", "statistic", "df", "p_value"]).map_err(csv_err)?;
    for a in 0..model.k() {
        if tp.pi[a] == 0.0 {
            continue;
        }
        for b in 0..model.k() {
            let mean = tp.omega[a][b] / tp.pi[a];
            let t = poisson_chi_square(&neighbor_counts(&views, a, b), mean, 1);
            gof.write_record([
                model.alphabet.label(a).to_string(),
                model.alphabet.label(b).to_string(),
                fmt_f64(mean),
                fmt_f64(t.statistic),
                t.df.to_string(),
                fmt_f64(t.p_value),
            ])
            .map_err(csv_err)?;
        }
    }
    gof.flush()?;
    out.json(
        "stats.json",
        &serde_json::json!({
            "n": g.n(),
            "edges": g.num_edges(),
            "type_pair": tp,
            "tv_to_kernel": tv,
            "cap": cap,
        }),
    )
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

fn slln_check(model: &ModelParams, ladder: &[usize], replicates: usize, cap: u32, out: &mut Outputs) -> Result<(), CliError> {
    let kernel = limit_kernel(model, cap)?;
    let reference = kernel.to_measure();
    let mut detail = csv_writer(out.create("slln.csv")?);
    detail.write_record(["n", "replicate", "seed", "tv"]).map_err(csv_err)?;
    let mut summary = csv_writer(out.create("slln_summary.csv")?);
    summary.write_record(["n", "median_tv"]).map_err(csv_err)?;
    for &n in ladder {
        let rows: Vec<(u64, f64)> = (0..replicates as u64)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(model.seed, &[TAG_SLLN, n as u64, r]);
                let g = sample_graph(&model.with_n(n).with_seed(seed))?;
                let l_n = empirical_measure(&local_views(&g, cap))?;
                Ok((seed, tv_distance(&l_n, &reference)))
            })
            .collect::<Result<_, cgrg::Error>>()?;
        for (r, (seed, tv)) in rows.iter().enumerate() {
            detail.write_record([n.to_string(), r.to_string(), seed.to_string(), fmt_f64(*tv)]).map_err(csv_err)?;
        }
        let tvs: Vec<f64> = rows.iter().map(|r| r.1).collect();
        summary.write_record([n.to_string(), fmt_f64(median(&tvs))]).map_err(csv_err)?;
    }
    detail.flush()?;
    summary.flush()?;
    Ok(())
}

fn wsn_fit(model: &ModelParams, nodes: Option<&Path>, links: Option<&Path>, out: &mut Outputs) -> Result<(), CliError> {
    let ds = match (nodes, links) {
        (Some(n), Some(l)) => {
            let open = |p: &Path| File::open(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())));
            WsnDataset::read_csv(open(n)?, open(l)?, &n.display().to_string())?
        }
        _ => {
            let g = sample_graph(model)?;
            let ds = WsnDataset::from_graph(&g, "synthetic sample of the configured model")?;
            let mut nw = out.create("nodes.csv")?;
            let mut lw = out.create("links.csv")?;
            ds.write_csv(&mut nw, &mut lw)?;
            nw.flush()?;
            lw.flush()?;
            ds
        }
    };
    let fit = fit_from_dataset(&ds, ds.metadata.d)?;
    out.text("fit_report.txt", &fit.report())?;
    out.json("fit.json", &serde_json::json!({ "fit": fit, "metadata": ds.metadata }))
}
