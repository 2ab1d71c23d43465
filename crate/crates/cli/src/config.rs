//! Run configuration: command-line flags layered over an optional JSON file.

use anyhow::{bail, Context, Result};
use circlab::studies::Functional;
use circlab::{CircleMap, EnergyParams, QuadratureSpec};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to the command's defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// JSON file with the same fields as the flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Map description, e.g. `identity`, `rotation:rho=0.3`, `cantor_log:s=2`.
    #[arg(long)]
    pub map: Option<String>,
    /// Exponent p (repeatable or comma separated).
    #[arg(long = "p", value_delimiter = ',', allow_negative_numbers = true)]
    pub p: Vec<f64>,
    /// Power exponent alpha (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub alpha: Vec<f64>,
    /// Log exponent lambda (repeatable or comma separated).
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub lambda: Vec<f64>,
    /// Truncation level J.
    #[arg(long)]
    pub levels: Option<u32>,
    /// Functionals to compute: e1, e2, u, v, i1, i2.
    #[arg(long, value_delimiter = ',')]
    pub functionals: Vec<String>,
    /// Directory for report files; without it reports go to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Format printed to stdout.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Outer nodes of the boundary quadrature.
    #[arg(long)]
    pub n_outer: Option<usize>,
    /// Inner nodes per ring of the boundary quadrature.
    #[arg(long)]
    pub n_inner: Option<usize>,
    /// Relative change under refinement accepted as converged.
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// Random disks for the weight check.
    #[arg(long)]
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileQuadrature {
    n_outer: Option<usize>,
    n_inner: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    map: Option<String>,
    p: Option<Vec<f64>>,
    alpha: Option<Vec<f64>>,
    lambda: Option<Vec<f64>>,
    levels: Option<u32>,
    functionals: Option<Vec<String>>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    format: Option<Format>,
    quadrature: Option<FileQuadrature>,
    trials: Option<usize>,
}

/// Command defaults for fields neither flags nor the file set.
pub struct Defaults {
    pub map: &'static str,
    pub p: &'static [f64],
    pub alpha: &'static [f64],
    pub lambda: &'static [f64],
    pub levels: u32,
    pub functionals: &'static [Functional],
}

/// Fully resolved configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub map_desc: String,
    #[serde(skip)]
    pub map: CircleMap,
    pub p: Vec<f64>,
    pub alpha: Vec<f64>,
    pub lambda: Vec<f64>,
    pub levels: u32,
    pub functionals: Vec<Functional>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub format: Format,
    pub quadrature: QuadratureSpec,
    pub trials: usize,
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))
}

fn pick<T>(flag: Vec<T>, file: Option<Vec<T>>, default: &[T]) -> Vec<T>
where
    T: Clone,
{
    if !flag.is_empty() {
        flag
    } else {
        file.unwrap_or_else(|| default.to_vec())
    }
}

impl RunConfig {
    pub fn resolve(command: &str, flags: Flags, defaults: &Defaults) -> Result<Self> {
        let file = match &flags.config {
            Some(path) => read_file(path)?,
            None => FileConfig::default(),
        };
        if let Some(c) = &file.command {
            if c != command {
                bail!("config field `command`: file is for `{c}`, running `{command}`");
            }
        }
        let map_desc = flags
            .map
            .or(file.map)
            .unwrap_or_else(|| defaults.map.to_string());
        let map = CircleMap::parse(&map_desc)
            .with_context(|| format!("field `map`: cannot parse `{map_desc}`"))?;
        let functionals = pick(flags.functionals, file.functionals, &[]);
        let functionals = if functionals.is_empty() {
            defaults.functionals.to_vec()
        } else {
            functionals
                .iter()
                .map(|f| f.parse::<Functional>())
                .collect::<circlab::Result<Vec<_>>>()
                .context("field `functionals`")?
        };
        let fq = file.quadrature.unwrap_or_default();
        let base = QuadratureSpec::default();
        let quadrature = QuadratureSpec {
            n_outer: flags.n_outer.or(fq.n_outer).unwrap_or(base.n_outer),
            n_inner: flags.n_inner.or(fq.n_inner).unwrap_or(base.n_inner),
            tol: flags.quad_tol.or(fq.tol).unwrap_or(base.tol),
            ..base
        };
        quadrature.validate().context("field `quadrature`")?;
        let cfg = Self {
            command: command.to_string(),
            map_desc,
            map,
            p: pick(flags.p, file.p, defaults.p),
            alpha: pick(flags.alpha, file.alpha, defaults.alpha),
            lambda: pick(flags.lambda, file.lambda, defaults.lambda),
            levels: flags.levels.or(file.levels).unwrap_or(defaults.levels),
            functionals,
            out: flags.out.or(file.out),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            format: flags.format.or(file.format).unwrap_or(Format::Json),
            quadrature,
            trials: flags.trials.or(file.trials).unwrap_or(2000),
        };
        for (name, list) in [
            ("p", &cfg.p),
            ("alpha", &cfg.alpha),
            ("lambda", &cfg.lambda),
        ] {
            if list.is_empty() {
                bail!("field `{name}`: needs at least one value");
            }
            if let Some(v) = list.iter().find(|v| !v.is_finite()) {
                bail!("field `{name}`: value {v} is not finite");
            }
        }
        if let Some(p) = cfg.p.iter().find(|&&p| !(p > 1.0)) {
            bail!("field `p`: needs p > 1, got {p}");
        }
        if cfg.levels == 0 {
            bail!("field `levels`: needs J >= 1");
        }
        Ok(cfg)
    }

    /// Points `(p_i, alpha_i, lambda_i)`; lists of length one are broadcast.
    pub fn zipped_params(&self) -> Result<Vec<EnergyParams>> {
        let n = self.p.len().max(self.alpha.len()).max(self.lambda.len());
        for (name, list) in [
            ("p", &self.p),
            ("alpha", &self.alpha),
            ("lambda", &self.lambda),
        ] {
            if list.len() != 1 && list.len() != n {
                bail!(
                    "field `{name}`: {} values, expected 1 or {n} (values are paired by position)",
                    list.len()
                );
            }
        }
        let at = |l: &[f64], i: usize| if l.len() == 1 { l[0] } else { l[i] };
        (0..n)
            .map(|i| {
                Ok(EnergyParams::new(
                    at(&self.p, i),
                    at(&self.alpha, i),
                    at(&self.lambda, i),
                )?)
            })
            .collect()
    }

    /// Every combination of the `p`, `alpha` and `lambda` lists.
    pub fn grid_params(&self) -> Result<Vec<EnergyParams>> {
        let mut out = Vec::new();
        for &p in &self.p {
            for &a in &self.alpha {
                for &l in &self.lambda {
                    out.push(EnergyParams::new(p, a, l)?);
                }
            }
        }
        Ok(out)
    }
}
