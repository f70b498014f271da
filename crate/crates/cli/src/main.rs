//! `lcent`: entropy of sums of log-concave integer random variables.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use lcent::bounds::{theorem1_precondition, theorem1_rate_value};
use lcent::convolve::{self_convolve, ConvolveConfig};
use lcent::smooth::{differential_entropy, SmoothedDensity};
use lcent::verify::{run_sweep, FamilyGrid, PmfSource, SweepSpec};
use lcent::{stats, Family, FamilySpec, IntegerPmf};

use config::{Opts, Settings};
use output::{emit, Format, Rows};

#[derive(Debug, Parser)]
#[command(name = "lcent", version, about = "Certified entropy computations for sums of log-concave integer random variables")]
struct Cli {
    /// JSON file supplying defaults for any flag (flags take precedence).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Entropy, variance, pmax, nmax, q and the unit-shift TV distance.
    Stats(Opts),
    /// h(S_n + U_1 + ... + U_n) against H(S_n) and the explicit rate.
    Smooth(Opts),
    /// Distribution of S_n as a pmf.
    Convolve(Opts),
    /// Run checks over families, custom pmfs and random pmfs.
    Verify(Opts),
    /// List the built-in families.
    Families(Opts),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (name, opts) = match &cli.command {
        Command::Stats(o) => ("stats", o),
        Command::Smooth(o) => ("smooth", o),
        Command::Convolve(o) => ("convolve", o),
        Command::Verify(o) => ("verify", o),
        Command::Families(o) => ("families", o),
    };
    let settings = Settings::resolve(opts, cli.config.as_deref())?;
    if let Some(w) = settings.workers {
        // The global pool serves the non-sweep commands.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match name {
        "stats" => cmd_stats(&settings),
        "smooth" => cmd_smooth(&settings),
        "convolve" => cmd_convolve(&settings),
        "verify" => cmd_verify(&settings),
        _ => cmd_families(&settings),
    }
}

/// The single distribution named by `--family`/`--params`/`--sigma` or
/// `--pmf-file`.
fn single_source(s: &Settings) -> Result<IntegerPmf> {
    match (&s.family, &s.pmf_file) {
        (Some(_), Some(_)) => bail!("give either --family or --pmf-file, not both"),
        (None, None) => bail!("no input: give --family (with --params or --sigma) or --pmf-file"),
        (None, Some(path)) => Ok(IntegerPmf::read_json(path)?),
        (Some(_), None) => {
            let specs = family_specs(s)?;
            if specs.len() != 1 {
                bail!("this command takes a single distribution; use --sigma or --params, not a grid");
            }
            Ok(specs[0].build(s.tail_tol)?)
        }
    }
}

fn family_specs(s: &Settings) -> Result<Vec<FamilySpec>> {
    let name = s.family.as_deref().context("--family is required")?;
    let family = Family::from_name(name)?;
    let mut specs = Vec::new();
    for &sigma in &s.sigmas {
        specs.push(FamilySpec::with_sigma(family, sigma)?);
    }
    if let Some(p) = &s.params {
        specs.push(FamilySpec::new(family, p.clone())?);
    }
    if specs.is_empty() {
        bail!("family {name} needs --params or --sigma/--sigma-grid");
    }
    Ok(specs)
}

fn convolve_config(s: &Settings) -> ConvolveConfig {
    ConvolveConfig { tail_tol: s.tail_tol, ..ConvolveConfig::default() }
}

fn cmd_stats(s: &Settings) -> Result<ExitCode> {
    let p = single_source(s)?;
    let st = stats(&p)?;
    let mut rows = Rows::new(&["quantity", "value", "error"]);
    let mut add = |q: &str, v: output::Cell, e: output::Cell| rows.push(vec![q.into(), v, e]);
    add("entropy", st.entropy.into(), st.entropy_error.into());
    add("mean", st.mean.into(), st.mean_error.into());
    add("variance", st.variance.into(), st.variance_error.into());
    add("sigma", st.sigma.into(), None::<f64>.into());
    add("pmax", st.pmax.into(), p.entry_error(st.pmax).into());
    add("nmax", st.nmax.into(), None::<f64>.into());
    add("q", st.q.into(), st.q_error.into());
    add("1-q", (1.0 - st.q).into(), st.q_error.into());
    add("tv_shift", st.tv_shift.into(), None::<f64>.into());
    add("stored_mass", st.stored_mass.into(), None::<f64>.into());
    add("tail_mass_bound", st.tail_mass_bound.into(), None::<f64>.into());
    if s.format == Format::Table {
        println!("{}", p.label());
    }
    emit(&rows.render(s.format)?, s.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_smooth(s: &Settings) -> Result<ExitCode> {
    let n = s.n_single()?;
    let sources: Vec<IntegerPmf> = match &s.pmf_file {
        Some(_) => vec![single_source(s)?],
        None => family_specs(s)?.iter().map(|f| f.build(s.tail_tol)).collect::<lcent::Result<_>>()?,
    };
    if s.density_out.is_some() && sources.len() != 1 {
        bail!("--density-out needs a single distribution");
    }
    let mut rows = Rows::new(&[
        "label", "sigma", "n", "h", "H", "gap", "certified_error", "theorem1_rate", "precondition_met",
    ]);
    for p in &sources {
        let sigma = stats(p)?.sigma;
        let sn = self_convolve(p, n, s.tier, &convolve_config(s))?.result;
        let big_h = stats(&sn)?;
        let f = SmoothedDensity::new(&sn, n)?;
        let h = differential_entropy(&f, s.quad_tol)?;
        let met = theorem1_precondition(n as u32, sigma);
        rows.push(vec![
            p.label().into(),
            sigma.into(),
            n.into(),
            h.value.into(),
            big_h.entropy.into(),
            (h.value - big_h.entropy).abs().into(),
            (h.certified_error + big_h.entropy_error).into(),
            met.then(|| theorem1_rate_value(n as u32, sigma)).into(),
            met.into(),
        ]);
        if let Some(path) = &s.density_out {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            f.write_grid_csv(std::io::BufWriter::new(file), s.density_points)
                .with_context(|| format!("writing {}", path.display()))?;
        }
    }
    emit(&rows.render(s.format)?, s.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_convolve(s: &Settings) -> Result<ExitCode> {
    let n = s.n_single()?;
    let p = single_source(s)?;
    let report = self_convolve(&p, n, s.tier, &convolve_config(s))?;
    let r = &report.result;
    let text = match s.format {
        Format::Json => r.to_json() + "\n",
        Format::Csv => {
            let mut rows = Rows::new(&["k", "p"]);
            for (i, &w) in r.weights().iter().enumerate() {
                rows.push(vec![(r.offset() + i as i64).into(), w.into()]);
            }
            rows.render(Format::Csv)?
        }
        Format::Table => {
            let st = stats(r)?;
            let mut rows = Rows::new(&["quantity", "value"]);
            rows.push(vec!["label".into(), r.label().into()]);
            rows.push(vec!["method".into(), format!("{:?}", report.method).to_lowercase().into()]);
            rows.push(vec!["support".into(), format!("{}..={}", r.offset(), r.last()).into()]);
            rows.push(vec!["stored_mass".into(), st.stored_mass.into()]);
            rows.push(vec!["tail_mass_bound".into(), r.tail_mass_bound().into()]);
            rows.push(vec!["max_abs_error_bound".into(), report.max_abs_error_bound.into()]);
            rows.push(vec!["log_concave".into(), report.log_concave.into()]);
            rows.push(vec!["entropy".into(), st.entropy.into()]);
            rows.push(vec!["variance".into(), st.variance.into()]);
            rows.push(vec!["pmax".into(), st.pmax.into()]);
            rows.push(vec!["nmax".into(), st.nmax.into()]);
            rows.render(Format::Table)?
        }
    };
    emit(&text, s.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn sweep_spec(s: &Settings) -> Result<SweepSpec> {
    let mut spec = if let Some(base) = &s.sweep {
        base.clone()
    } else if s.family.is_some() || s.pmf_file.is_some() {
        let mut spec = SweepSpec { n_range: (1, 3), checks: lcent::verify::CheckId::ALL.to_vec(), ..SweepSpec::default() };
        if let Some(name) = &s.family {
            Family::from_name(name)?;
            spec.families.push(FamilyGrid {
                family: name.clone(),
                sigmas: s.sigmas.clone(),
                params: s.params.iter().cloned().collect(),
            });
        }
        if let Some(path) = &s.pmf_file {
            spec.pmfs.push(PmfSource { name: path.display().to_string(), path: Some(path.clone()), pmf: None });
        }
        spec
    } else {
        SweepSpec::default_suite()
    };
    if let Some(c) = &s.checks {
        spec.checks = c.clone();
    }
    if let Some(r) = s.n_range {
        spec.n_range = r;
    }
    if let Some(w) = s.workers {
        spec.workers = w;
    }
    if let Some(seed) = s.seed {
        spec.config.seed = seed;
        if let Some(r) = &mut spec.random {
            r.seed = seed;
        }
        if let Some(r) = &mut spec.random_pairs {
            r.seed = seed.wrapping_add(1);
        }
    }
    spec.config.tail_tol = s.tail_tol;
    spec.config.quad_tol = s.quad_tol;
    spec.config.tier = s.tier;
    if spec.outputs.reproducer_dir.is_none() {
        spec.outputs.reproducer_dir = s.reproducer_dir.clone();
    }
    Ok(spec)
}

fn cmd_verify(s: &Settings) -> Result<ExitCode> {
    let spec = sweep_spec(s)?;
    let start = Instant::now();
    let report = run_sweep(&spec)?;
    let text = match s.format {
        Format::Json => report.to_json(),
        Format::Csv => report.to_csv_string(),
        Format::Table => report.to_table(),
    };
    emit(&text, s.out.as_deref())?;
    let sm = &report.summary;
    eprintln!(
        "{} rows: {} pass, {} fail, {} precondition-skip, {} error ({:.1} s)",
        sm.total,
        sm.pass,
        sm.fail,
        sm.skip,
        sm.error,
        start.elapsed().as_secs_f64()
    );
    for r in &report.reproducers {
        match &r.file {
            Some(f) => eprintln!("reproducer for row {} ({}): {f}", r.row, r.check_id),
            None => eprintln!("failing row {}: {} {} {} n={}", r.row, r.check_id, r.family, r.params, r.n),
        }
    }
    Ok(if report.has_failures() { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

fn cmd_families(s: &Settings) -> Result<ExitCode> {
    let mut rows = Rows::new(&["family", "params", "sigma_grid", "description"]);
    for f in Family::ALL {
        rows.push(vec![
            f.name().into(),
            f.param_names().join(",").into(),
            f.supports_sigma().into(),
            f.description().into(),
        ]);
    }
    emit(&rows.render(s.format)?, s.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}
