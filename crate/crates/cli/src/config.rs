//! Run configuration: strict TOML, or a JSON manifest from an earlier run.

use std::path::{Path, PathBuf};

use cgrg::graph::ModelParams;
use cgrg::rate_distortion::{Coupling, Estimator};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionSpec>,
    pub experiment: Experiment,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistortionSpec {
    HammingColor,
    SquaredDegree,
    Constant { value: f64 },
    /// CSV with header `view_x,view_y,value` covering the kernel support.
    Table { path: PathBuf },
}

/// Monte Carlo settings shared by the sampling experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sampling {
    pub outer: usize,
    pub inner: usize,
    #[serde(default)]
    pub coupling: Coupling,
    #[serde(default)]
    pub estimator: Estimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub soft_tau: Option<f64>,
}

fn default_cap() -> u32 {
    cgrg::empirical::DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Generate {},
    Stats {
        #[serde(default = "default_cap")]
        cap: u32,
    },
    SllnCheck {
        n_ladder: Vec<usize>,
        replicates: usize,
        #[serde(default = "default_cap")]
        cap: u32,
    },
    Cumulant {
        t_grid: Vec<f64>,
        sampling: Sampling,
        #[serde(default = "default_cap")]
        cap: u32,
    },
    RdCurve {
        alphas: Vec<f64>,
        #[serde(default = "default_cap")]
        cap: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        t_max: Option<f64>,
        /// Attach Monte Carlo endpoint estimates.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        brackets: Option<Sampling>,
    },
    BallExponent {
        alpha: AlphaChoice,
        inner: usize,
        #[serde(default)]
        coupling: Coupling,
        #[serde(default = "default_cap")]
        cap: u32,
        /// Sampling used to locate the lower endpoint when `alpha` is
        /// `"midpoint"`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        brackets: Option<Sampling>,
    },
    WsnFit {
        /// Node and link tables; a synthetic sample of `model` when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        links: Option<PathBuf>,
    },
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Generate {} => "generate",
            Experiment::Stats { .. } => "stats",
            Experiment::SllnCheck { .. } => "slln-check",
            Experiment::Cumulant { .. } => "cumulant",
            Experiment::RdCurve { .. } => "rd-curve",
            Experiment::BallExponent { .. } => "ball-exponent",
            Experiment::WsnFit { .. } => "wsn-fit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaChoice {
    Value(f64),
    Named(NamedAlpha),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedAlpha {
    /// Halfway between the Monte Carlo lower endpoint and `⟨σ, p⊗p⟩`.
    Midpoint,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub outputs: Vec<String>,
}

impl RunConfig {
    /// Parse a TOML config, or the `config` of a JSON manifest. Relative
    /// input paths are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        let mut cfg: RunConfig = if is_json {
            serde_json::from_str::<Manifest>(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?.config
        } else {
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        cfg.check()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(DistortionSpec::Table { path }) = &mut self.distortion {
            fix(path);
        }
        if let Experiment::WsnFit { nodes, links } = &mut self.experiment {
            nodes.iter_mut().for_each(fix);
            links.iter_mut().for_each(fix);
        }
        fix(&mut self.output.dir);
    }

    /// Structural checks that do not need any computation.
    pub fn check(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        let needs_distortion = matches!(
            self.experiment,
            Experiment::Cumulant { .. } | Experiment::RdCurve { .. } | Experiment::BallExponent { .. }
        );
        if needs_distortion && self.distortion.is_none() {
            return bad("this experiment needs a [distortion] section");
        }
        if !needs_distortion && self.distortion.is_some() {
            return bad("this experiment does not use a [distortion] section");
        }
        match &self.experiment {
            Experiment::SllnCheck { n_ladder, replicates, .. } if n_ladder.is_empty() || *replicates == 0 => {
                bad("slln-check needs a nonempty n_ladder and at least one replicate")
            }
            Experiment::Cumulant { t_grid, .. } if t_grid.is_empty() => bad("cumulant needs a nonempty t_grid"),
            Experiment::RdCurve { alphas, .. } if alphas.is_empty() => bad("rd-curve needs a nonempty alphas grid"),
            Experiment::BallExponent { alpha: AlphaChoice::Named(NamedAlpha::Midpoint), brackets: None, .. } => {
                bad("alpha = \"midpoint\" needs a brackets sampling section")
            }
            Experiment::WsnFit { nodes, links } if nodes.is_some() != links.is_some() => {
                bad("wsn-fit needs both nodes and links, or neither")
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[model]
d = 2
n = 100
alphabet = ["a", "b"]
pi = [0.5, 0.5]
lambda = [[1.0, 1.0], [1.0, 1.0]]
seed = 7

[output]
dir = "out"
"#;

    fn parse(extra: &str) -> Result<RunConfig, toml::de::Error> {
        toml::from_str(&format!("{BASE}{extra}"))
    }

    #[test]
    fn parses_each_experiment() {
        assert!(parse("[experiment]\nname = \"generate\"\n").is_ok());
        let rd = parse(
            "[distortion]\nkind = \"constant\"\nvalue = 0.5\n[experiment]\nname = \"rd-curve\"\nalphas = [0.1, 0.6]\n",
        )
        .unwrap();
        assert_eq!(rd.experiment.name(), "rd-curve");
        assert!(rd.check().is_ok());
        let ball = parse(
            "[distortion]\nkind = \"hamming_color\"\n[experiment]\nname = \"ball-exponent\"\nalpha = \"midpoint\"\ninner = 10\n[experiment.brackets]\nouter = 2\ninner = 3\n",
        )
        .unwrap();
        assert!(matches!(ball.experiment, Experiment::BallExponent { alpha: AlphaChoice::Named(NamedAlpha::Midpoint), .. }));
    }

    #[test]
    fn rejects_unknown_keys_and_missing_seed() {
        assert!(parse("[experiment]\nname = \"generate\"\nextra = 1\n").is_err());
        assert!(parse("[experiment]\nname = \"stats\"\ncap = 3\nfoo = 2\n").is_err());
        assert!(parse("[experiment]\nname = \"generate\"\n[bogus]\nx = 1\n").is_err());
        let no_seed = BASE.replace("seed = 7\n", "") + "[experiment]\nname = \"generate\"\n";
        assert!(toml::from_str::<RunConfig>(&no_seed).is_err());
    }

    #[test]
    fn distortion_section_must_match_experiment() {
        let cfg = parse("[experiment]\nname = \"cumulant\"\nt_grid = [0.0]\n[experiment.sampling]\nouter = 1\ninner = 1\n").unwrap();
        assert!(matches!(cfg.check(), Err(CliError::Config(_))));
    }
}
