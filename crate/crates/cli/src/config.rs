//! Flag parsing and the optional JSON config file. Every flag can also be
//! given in the file under its snake_case name; flags win.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use lcent::convolve::Tier;
use lcent::verify::{log_grid, parse_check_list, CheckId, SweepSpec};
use serde::Deserialize;

use crate::output::Format;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TierArg {
    Direct,
    Fft,
    Auto,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Self {
        match t {
            TierArg::Direct => Tier::Direct,
            TierArg::Fft => Tier::Fft,
            TierArg::Auto => Tier::Auto,
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Family name (see `lcent families`).
    #[arg(long)]
    pub family: Option<String>,
    /// Comma-separated family parameters, e.g. `0.5` or `40,0.3`.
    #[arg(long, allow_hyphen_values = true)]
    pub params: Option<String>,
    /// Pmf JSON file: `{"offset": k0, "weights": [...], "tail_mass_bound": t}`.
    #[arg(long, value_name = "FILE")]
    pub pmf_file: Option<PathBuf>,
    /// Number of summands, or an inclusive range `a..b` for verify.
    #[arg(long)]
    pub n: Option<String>,
    /// Build the family with this standard deviation.
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Comma-separated sigmas or `log:a:b:k` for k log-spaced points.
    #[arg(long)]
    pub sigma_grid: Option<String>,
    /// Comma-separated check ids, or `all`.
    #[arg(long)]
    pub checks: Option<String>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (default stdout).
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Worker threads (at least 1).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seed for the randomised sweeps.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mass allowed to be dropped from infinite tails (default 1e-15).
    #[arg(long)]
    pub tail_tol: Option<f64>,
    /// Target certified error of differential entropies (default 1e-10).
    #[arg(long)]
    pub quad_tol: Option<f64>,
    /// Convolution method.
    #[arg(long, value_enum)]
    pub tier: Option<TierArg>,
    /// Write a plot-ready `x,density` grid of the smoothed density.
    #[arg(long, value_name = "FILE")]
    pub density_out: Option<PathBuf>,
    /// Grid points per unit interval for --density-out (default 4).
    #[arg(long)]
    pub density_points: Option<usize>,
    /// Sweep description (JSON) for verify.
    #[arg(long, value_name = "FILE")]
    pub spec: Option<PathBuf>,
    /// Directory for reproducer files of failing rows.
    #[arg(long, value_name = "DIR")]
    pub reproducer_dir: Option<PathBuf>,
}

/// Contents of `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    family: Option<String>,
    params: Option<ParamsValue>,
    pmf_file: Option<PathBuf>,
    n: Option<NValue>,
    sigma: Option<f64>,
    sigma_grid: Option<GridValue>,
    checks: Option<ChecksValue>,
    format: Option<Format>,
    out: Option<PathBuf>,
    workers: Option<usize>,
    seed: Option<u64>,
    tail_tol: Option<f64>,
    quad_tol: Option<f64>,
    tier: Option<TierArg>,
    density_out: Option<PathBuf>,
    density_points: Option<usize>,
    spec: Option<PathBuf>,
    reproducer_dir: Option<PathBuf>,
    sweep: Option<SweepSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ParamsValue {
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum NValue {
    One(usize),
    Range([usize; 2]),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GridValue {
    List(Vec<f64>),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum ChecksValue {
    List(Vec<String>),
    Text(String),
}

/// Fully resolved settings.
#[derive(Debug, Clone)]
pub struct Settings {
    pub family: Option<String>,
    pub params: Option<Vec<f64>>,
    pub pmf_file: Option<PathBuf>,
    pub n_range: Option<(usize, usize)>,
    pub sigmas: Vec<f64>,
    pub checks: Option<Vec<CheckId>>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub tail_tol: f64,
    pub quad_tol: f64,
    pub tier: Tier,
    pub density_out: Option<PathBuf>,
    pub density_points: usize,
    pub reproducer_dir: Option<PathBuf>,
    pub sweep: Option<SweepSpec>,
}

fn parse_floats(s: &str, what: &str) -> Result<Vec<f64>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().with_context(|| format!("invalid {what} value `{t}`")))
        .collect()
}

fn parse_n(s: &str) -> Result<(usize, usize)> {
    let parse = |t: &str| t.trim().parse::<usize>().with_context(|| format!("invalid --n value `{s}`"));
    match s.split_once("..") {
        Some((a, b)) => {
            let b = b.strip_prefix('=').unwrap_or(b);
            Ok((parse(a)?, parse(b)?))
        }
        None => {
            let n = parse(s)?;
            Ok((n, n))
        }
    }
}

/// `1,2,3` or `log:a:b:k`.
pub fn parse_grid(s: &str) -> Result<Vec<f64>> {
    if let Some(rest) = s.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            bail!("log grid must look like log:a:b:k, got `{s}`");
        }
        let a: f64 = parts[0].parse().with_context(|| format!("invalid grid start in `{s}`"))?;
        let b: f64 = parts[1].parse().with_context(|| format!("invalid grid end in `{s}`"))?;
        let k: usize = parts[2].parse().with_context(|| format!("invalid grid size in `{s}`"))?;
        if !(a > 0.0 && b >= a && a.is_finite() && b.is_finite()) || k == 0 {
            bail!("log grid needs 0 < a <= b and k >= 1, got `{s}`");
        }
        return Ok(log_grid(a, b, k));
    }
    parse_floats(s, "sigma grid")
}

impl Settings {
    pub fn resolve(opts: &Opts, config: Option<&Path>) -> Result<Self> {
        let file: FileConfig = match config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => FileConfig::default(),
        };

        let params = match (&opts.params, file.params) {
            (Some(s), _) => Some(parse_floats(s, "--params")?),
            (None, Some(ParamsValue::List(v))) => Some(v),
            (None, Some(ParamsValue::Text(s))) => Some(parse_floats(&s, "params")?),
            (None, None) => None,
        };
        let n_range = match (&opts.n, file.n) {
            (Some(s), _) => Some(parse_n(s)?),
            (None, Some(NValue::One(n))) => Some((n, n)),
            (None, Some(NValue::Range([a, b]))) => Some((a, b)),
            (None, Some(NValue::Text(s))) => Some(parse_n(&s)?),
            (None, None) => None,
        };
        let grid = match (&opts.sigma_grid, file.sigma_grid) {
            (Some(s), _) => Some(parse_grid(s)?),
            (None, Some(GridValue::List(v))) => Some(v),
            (None, Some(GridValue::Text(s))) => Some(parse_grid(&s)?),
            (None, None) => None,
        };
        let sigma = opts.sigma.or(file.sigma);
        let sigmas = match (sigma, grid) {
            (Some(_), Some(_)) => bail!("give either --sigma or --sigma-grid, not both"),
            (Some(s), None) => vec![s],
            (None, Some(g)) => g,
            (None, None) => Vec::new(),
        };
        let checks = match (&opts.checks, file.checks) {
            (Some(s), _) => Some(parse_check_list(s)?),
            (None, Some(ChecksValue::Text(s))) => Some(parse_check_list(&s)?),
            (None, Some(ChecksValue::List(v))) => Some(parse_check_list(&v.join(","))?),
            (None, None) => None,
        };
        let workers = opts.workers.or(file.workers);
        if workers == Some(0) {
            bail!("--workers must be at least 1");
        }
        let spec_path = opts.spec.clone().or(file.spec);
        let sweep = match (spec_path, file.sweep) {
            (Some(path), _) => {
                let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
                Some(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
            }
            (None, s) => s,
        };
        let positive = |v: f64, name: &str| -> Result<f64> {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                bail!("{name} must be positive, got {v}")
            }
        };
        Ok(Self {
            family: opts.family.clone().or(file.family),
            params,
            pmf_file: opts.pmf_file.clone().or(file.pmf_file),
            n_range,
            sigmas,
            checks,
            format: opts.format.or(file.format).unwrap_or(Format::Table),
            out: opts.out.clone().or(file.out),
            workers,
            seed: opts.seed.or(file.seed),
            tail_tol: positive(opts.tail_tol.or(file.tail_tol).unwrap_or(1e-15), "--tail-tol")?,
            quad_tol: positive(opts.quad_tol.or(file.quad_tol).unwrap_or(1e-10), "--quad-tol")?,
            tier: opts.tier.or(file.tier).unwrap_or(TierArg::Auto).into(),
            density_out: opts.density_out.clone().or(file.density_out),
            density_points: opts.density_points.or(file.density_points).unwrap_or(4),
            reproducer_dir: opts.reproducer_dir.clone().or(file.reproducer_dir),
            sweep,
        })
    }

    /// `--n` for the commands that take a single number of summands.
    pub fn n_single(&self) -> Result<usize> {
        match self.n_range {
            None => Ok(1),
            Some((a, b)) if a == b && a >= 1 => Ok(a),
            Some(_) => bail!("--n must be a single positive integer for this command"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_and_ranges() {
        assert_eq!(parse_grid("1,2.5").unwrap(), vec![1.0, 2.5]);
        let g = parse_grid("log:2:4000:12").unwrap();
        assert_eq!((g.len(), g[0], g[11]), (12, 2.0, 4000.0));
        assert!(parse_grid("log:2:4000").is_err());
        assert_eq!(parse_n("3").unwrap(), (3, 3));
        assert_eq!(parse_n("1..4").unwrap(), (1, 4));
        assert_eq!(parse_n("1..=4").unwrap(), (1, 4));
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"family": "poisson", "params": [3.0], "format": "json", "seed": 9}"#).unwrap();
        let opts = Opts { family: Some("geometric".into()), params: Some("0.5".into()), ..Opts::default() };
        let s = Settings::resolve(&opts, Some(&path)).unwrap();
        assert_eq!(s.family.as_deref(), Some("geometric"));
        assert_eq!(s.params, Some(vec![0.5]));
        assert_eq!(s.format, Format::Json);
        assert_eq!(s.seed, Some(9));
    }
}
