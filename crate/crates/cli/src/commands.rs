use std::fs;
use std::path::{Path, PathBuf};

use par_core::baseline::BaselineConfig;
use par_core::harness::{run_scenario, EstimatorSet, MultiBlock, ScenarioSpec};
use par_core::io::{
    check_aligned, ingest_daily_to_monthly_counts, parse_daily_covariate, parse_daily_quotes, read_text, CovariateFile,
    RunManifest, SeriesFile,
};
use par_core::simulate::simulate_with_law;
use par_core::{
    fit_multi_par, fit_par_filter_mle, fit_par_hybrid, CovariateLaw, CovariatePanel, HybridConfig, MultiConfig,
    ParParams, StructuralChangeSpec, TableId,
};

use crate::error::CliError;
use crate::results::{FitReport, IngestSummary, MarketSummary, MultiReport, RunResults, SimulateSummary};
use crate::settings::Settings;
use crate::{ExperimentArgs, FitArgs, FitMultiArgs, IngestArgs, ReportArgs, RunTableArgs, SimulateArgs};

const MANIFEST: &str = "manifest.json";
const RESULTS: &str = "results.json";
const REPORT: &str = "report.txt";
const CONFIG: &str = "config.txt";

fn path_key(p: Option<PathBuf>) -> Option<String> {
    p.map(|p| p.display().to_string())
}

/// Prints the rendered results and, with an output directory, writes the
/// dataset files, results, report, resolved config and manifest.
fn finish(
    mut manifest: RunManifest,
    settings: &Settings,
    seed: u64,
    inputs: &[PathBuf],
    out: Option<&Path>,
    files: Vec<(String, String)>,
    results: RunResults,
) -> Result<(), CliError> {
    let text = results.render();
    print!("{text}");
    let Some(dir) = out else {
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    manifest.config = settings.resolved.clone();
    manifest.master_seed = seed;
    for p in inputs {
        manifest.add_input(p)?;
    }
    let mut written = Vec::new();
    for (name, body) in files {
        fs::write(dir.join(&name), body)?;
        written.push(name);
    }
    fs::write(dir.join(CONFIG), settings.config_text())?;
    fs::write(dir.join(RESULTS), serde_json::to_string_pretty(&results)? + "\n")?;
    fs::write(dir.join(REPORT), &text)?;
    written.extend([CONFIG, RESULTS, REPORT].map(String::from));
    manifest.outputs = written;
    manifest.finish();
    fs::write(dir.join(MANIFEST), manifest.to_json()?)?;
    Ok(())
}

pub fn simulate(a: SimulateArgs) -> Result<(), CliError> {
    let manifest = RunManifest::start("simulate", Default::default(), 0);
    let mut s = Settings::load(
        a.config.as_deref(),
        &[
            "rho",
            "delta",
            "delta0",
            "p",
            "T",
            "seed",
            "covariate-law",
            "change-rho",
            "change-fraction",
        ],
    )?;
    let rho = s
        .list("rho", a.rho)?
        .ok_or_else(|| CliError::Usage("`--rho` is required".into()))?;
    let delta = s.list("delta", a.delta)?.unwrap_or_default();
    s.list("delta", Some(delta.clone()))?;
    let delta0 = s.or("delta0", a.delta0, 100f64.ln())?;
    let p = s.or("p", a.p, rho.len())?;
    if p != rho.len() {
        return Err(CliError::Usage(format!("--p {p} but {} coefficients given", rho.len())));
    }
    let t_len = s.or("T", a.t_len, 100usize)?;
    let seed = s.or("seed", a.seed, 0u64)?;
    let law = s.or("covariate-law", a.covariate_law, CovariateLaw::Normal)?;
    let change = match (
        s.list("change-rho", a.change_rho)?,
        s.opt("change-fraction", a.change_fraction)?,
    ) {
        (Some(r), Some(f)) => Some(StructuralChangeSpec::new(r, f)?),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "`--change-rho` and `--change-fraction` go together".into(),
            ))
        }
    };
    if t_len == 0 {
        return Err(CliError::Usage("--T must be positive".into()));
    }
    let params = ParParams::new(rho, delta0, delta)?;
    let sim = simulate_with_law(&params, change.as_ref(), law, t_len, seed)?;
    let names = (1..=params.delta.len()).map(|j| format!("x{j}")).collect();
    let series = SeriesFile::numbered(sim.series.clone());
    let covariates = CovariateFile::numbered(names, sim.covariates);
    let values = &sim.series.values;
    let summary = SimulateSummary {
        params,
        change,
        covariate_law: law,
        t_len,
        mean_count: values.iter().sum::<u64>() as f64 / t_len as f64,
        max_count: values.iter().copied().max().unwrap_or(0),
        zeros: values.iter().filter(|&&y| y == 0).count(),
    };
    let files = vec![
        ("series.csv".to_string(), series.render()),
        ("covariates.csv".to_string(), covariates.render()),
    ];
    finish(
        manifest,
        &s,
        seed,
        &[],
        Some(&a.out),
        files,
        RunResults::Simulate(summary),
    )
}

fn load_pair(series: &Path, covariates: Option<&Path>) -> Result<(SeriesFile, CovariateFile), CliError> {
    let sf =
        SeriesFile::parse(&read_text(series)?).map_err(|e| CliError::Data(format!("{}: {e}", series.display())))?;
    let cf = match covariates {
        Some(c) => {
            let cf =
                CovariateFile::parse(&read_text(c)?).map_err(|e| CliError::Data(format!("{}: {e}", c.display())))?;
            check_aligned(&sf, &cf).map_err(|e| CliError::Data(format!("{}: {e}", c.display())))?;
            cf
        }
        None => CovariateFile {
            index: sf.index.clone(),
            names: Vec::new(),
            panel: CovariatePanel::empty(sf.series.len()),
        },
    };
    Ok((sf, cf))
}

pub fn fit(a: FitArgs) -> Result<(), CliError> {
    let manifest = RunManifest::start("fit", Default::default(), 0);
    let mut s = Settings::load(a.config.as_deref(), &["series", "covariates", "p", "estimator", "seed"])?;
    let series_path = PathBuf::from(s.required::<String>("series", path_key(a.series))?);
    let cov_path = s
        .opt::<String>("covariates", path_key(a.covariates))?
        .map(PathBuf::from);
    let p = s.or("p", a.p, 1usize)?;
    let estimators = s.or("estimator", a.estimator, EstimatorSet::Hybrid)?;
    let seed = s.or("seed", a.seed, 0u64)?;
    let (sf, cf) = load_pair(&series_path, cov_path.as_deref())?;

    let hybrid = fit_par_hybrid(&sf.series, &cf.panel, p, &HybridConfig::default());
    let want_hybrid = estimators != EstimatorSet::Baseline;
    let hybrid = match hybrid {
        Ok(h) => Some(h),
        Err(e) if want_hybrid => return Err(e.into()),
        Err(_) => None,
    };
    let baseline = if estimators == EstimatorSet::Hybrid {
        None
    } else {
        let config = BaselineConfig {
            seed,
            warm_start: hybrid.as_ref().map(|h| h.params.clone()),
            ..BaselineConfig::default()
        };
        Some(fit_par_filter_mle(&sf.series, &cf.panel, p, &config)?)
    };
    for (name, converged) in [
        ("hybrid", hybrid.as_ref().filter(|_| want_hybrid).map(|h| h.converged)),
        ("baseline", baseline.as_ref().map(|b| b.converged)),
    ] {
        if converged == Some(false) {
            eprintln!("warning: {name} estimator did not converge");
        }
    }
    let report = FitReport {
        label: sf.series.label.clone(),
        p,
        t_len: sf.series.len(),
        covariates: cf.names.clone(),
        hybrid: hybrid.filter(|_| want_hybrid),
        baseline,
    };
    let inputs: Vec<PathBuf> = std::iter::once(series_path).chain(cov_path).collect();
    finish(
        manifest,
        &s,
        seed,
        &inputs,
        a.out.as_deref(),
        Vec::new(),
        RunResults::Fit(report),
    )
}

fn split_paths(text: &str) -> Vec<PathBuf> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(PathBuf::from)
        .collect()
}

fn join_paths(paths: Option<Vec<PathBuf>>) -> Option<String> {
    paths.map(|ps| ps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(","))
}

/// `(series, covariates)` pairs from a directory written by `ingest`.
fn pairs_in_dir(dir: &Path) -> Result<Vec<(PathBuf, PathBuf)>, CliError> {
    let mut pairs = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(label) = name.strip_suffix(".series.csv") {
            let cov = dir.join(format!("{label}.covariates.csv"));
            if !cov.exists() {
                return Err(CliError::Data(format!(
                    "{} has no matching {}",
                    path.display(),
                    cov.display()
                )));
            }
            pairs.push((path, cov));
        }
    }
    pairs.sort();
    if pairs.is_empty() {
        return Err(CliError::Data(format!("no *.series.csv files in {}", dir.display())));
    }
    Ok(pairs)
}

pub fn fit_multi(a: FitMultiArgs) -> Result<(), CliError> {
    let manifest = RunManifest::start("fit-multi", Default::default(), 0);
    let mut s = Settings::load(a.config.as_deref(), &["dir", "series", "covariates", "seed"])?;
    let dir = s.opt::<String>("dir", path_key(a.dir))?;
    let series = s
        .opt::<String>("series", join_paths(a.series))?
        .map(|t| split_paths(&t));
    let covariates = s
        .opt::<String>("covariates", join_paths(a.covariates))?
        .map(|t| split_paths(&t));
    let seed = s.or("seed", a.seed, 0u64)?;

    let pairs: Vec<(PathBuf, Option<PathBuf>)> = match (dir, series, covariates) {
        (Some(d), None, None) => pairs_in_dir(Path::new(&d))?
            .into_iter()
            .map(|(a, b)| (a, Some(b)))
            .collect(),
        (None, Some(ss), None) => ss.into_iter().map(|p| (p, None)).collect(),
        (None, Some(ss), Some(cs)) if ss.len() == cs.len() => ss.into_iter().zip(cs.into_iter().map(Some)).collect(),
        (None, Some(_), Some(_)) => {
            return Err(CliError::Usage("give one covariate file per series file".into()));
        }
        _ => return Err(CliError::Usage("give either `--dir` or `--series` files".into())),
    };
    let mut panel = Vec::new();
    let mut covs = Vec::new();
    let mut names: Option<Vec<String>> = None;
    let mut inputs = Vec::new();
    for (sp, cp) in pairs {
        let (sf, cf) = load_pair(&sp, cp.as_deref())?;
        match &names {
            Some(n) if *n != cf.names => {
                return Err(CliError::Data(format!(
                    "{}: covariate columns differ from the first series",
                    sp.display()
                )));
            }
            _ => names = Some(cf.names.clone()),
        }
        panel.push(sf.series);
        covs.push(cf.panel);
        inputs.push(sp);
        inputs.extend(cp);
    }
    let config = MultiConfig {
        seed,
        ..MultiConfig::default()
    };
    let fit = fit_multi_par(&panel, &covs, &config)?;
    if !fit.converged {
        eprintln!("warning: shared-coefficient fit did not converge");
    }
    let report = MultiReport {
        covariates: names.unwrap_or_default(),
        fit,
    };
    finish(
        manifest,
        &s,
        seed,
        &inputs,
        a.out.as_deref(),
        Vec::new(),
        RunResults::FitMulti(report),
    )
}

pub fn experiment(a: ExperimentArgs) -> Result<(), CliError> {
    let manifest = RunManifest::start("experiment", Default::default(), 0);
    let mut s = Settings::load(
        a.config.as_deref(),
        &[
            "rho",
            "delta",
            "covariate-law",
            "T",
            "replicates",
            "estimator",
            "change-rho",
            "change-fraction",
            "n-series",
            "reversion-sd",
            "custom",
            "seed",
        ],
    )?;
    let rho = s.required("rho", a.rho)?;
    let delta = s.required("delta", a.delta)?;
    let law = s.or("covariate-law", a.covariate_law, CovariateLaw::Normal)?;
    let t_len = s.or("T", a.t_len, 100usize)?;
    let replicates = s.or("replicates", a.replicates, par_core::harness::DEFAULT_REPLICATES)?;
    let change = match (
        s.opt("change-rho", a.change_rho)?,
        s.opt("change-fraction", a.change_fraction)?,
    ) {
        (Some(r), Some(f)) => Some(StructuralChangeSpec {
            rho_during: vec![r],
            window_fraction: f,
        }),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "`--change-rho` and `--change-fraction` go together".into(),
            ))
        }
    };
    let multi = match s.opt("n-series", a.n_series)? {
        Some(n) => Some(MultiBlock {
            n_series: n,
            reversion_sd: s.or("reversion-sd", a.reversion_sd, 10.0)?,
        }),
        None => None,
    };
    let default_set = if change.is_none() && multi.is_none() {
        EstimatorSet::Both
    } else {
        EstimatorSet::Hybrid
    };
    let estimators = s.or("estimator", a.estimator, default_set)?;
    let custom = s.or("custom", a.custom.then_some(true), false)?;
    let seed = s.or("seed", a.seed, 0u64)?;
    let spec = ScenarioSpec {
        replicates,
        change,
        multi,
        custom,
        ..ScenarioSpec::single(rho, delta, law, t_len, estimators)
    };
    spec.validate()?;
    let report = run_scenario(&spec, seed)?;
    finish(
        manifest,
        &s,
        seed,
        &[],
        a.out.as_deref(),
        Vec::new(),
        RunResults::Experiment(report),
    )
}

pub fn run_table(a: RunTableArgs) -> Result<(), CliError> {
    let manifest = RunManifest::start("run-table", Default::default(), 0);
    let mut s = Settings::load(a.config.as_deref(), &["table", "scale", "seed"])?;
    let id: TableId = s.required("table", a.table)?;
    let scale = s.or("scale", a.scale, 1.0)?;
    let seed = s.or("seed", a.seed, 0u64)?;
    let report = par_core::run_table(id, seed, scale)?;
    finish(
        manifest,
        &s,
        seed,
        &[],
        a.out.as_deref(),
        Vec::new(),
        RunResults::RunTable(report),
    )
}

pub fn ingest(a: IngestArgs) -> Result<(), CliError> {
    let manifest = RunManifest::start("ingest", Default::default(), 0);
    let mut s = Settings::load(a.config.as_deref(), &["quotes", "covariate"])?;
    let quotes_path = PathBuf::from(s.required::<String>("quotes", path_key(a.quotes))?);
    let cov_path = PathBuf::from(s.required::<String>("covariate", path_key(a.covariate))?);
    let quotes = parse_daily_quotes(&read_text(&quotes_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", quotes_path.display())))?;
    let (name, covariate) = parse_daily_covariate(&read_text(&cov_path)?)
        .map_err(|e| CliError::Data(format!("{}: {e}", cov_path.display())))?;
    let out = ingest_daily_to_monthly_counts(&quotes, &covariate, &name)?;
    for w in &out.warnings {
        eprintln!("warning: {w}");
    }
    let mut files = Vec::new();
    let mut markets = Vec::new();
    for m in &out.markets {
        let label = &m.counts.series.label;
        if label.contains(['/', '\\']) || label.starts_with('.') {
            return Err(CliError::Data(format!("market label `{label}` cannot name a file")));
        }
        files.push((format!("{label}.series.csv"), m.counts.render()));
        files.push((format!("{label}.covariates.csv"), m.covariates.render()));
        let values = &m.counts.series.values;
        markets.push(MarketSummary {
            label: label.clone(),
            months: values.len(),
            first: m.counts.index.first().cloned().unwrap_or_default(),
            last: m.counts.index.last().cloned().unwrap_or_default(),
            mean_count: values.iter().sum::<u64>() as f64 / values.len().max(1) as f64,
        });
    }
    let summary = IngestSummary {
        covariate: name,
        markets,
        warnings: out.warnings,
    };
    finish(
        manifest,
        &s,
        0,
        &[quotes_path, cov_path],
        Some(&a.out),
        files,
        RunResults::Ingest(summary),
    )
}

pub fn report(a: ReportArgs) -> Result<(), CliError> {
    let manifest = RunManifest::from_json(&read_text(&a.dir.join(MANIFEST))?)?;
    let results: RunResults = serde_json::from_str(&read_text(&a.dir.join(RESULTS))?)?;
    for (path, digest) in &manifest.input_digests {
        match fs::read(path) {
            Ok(bytes) if par_core::io::sha256_hex(&bytes) != *digest => {
                eprintln!("warning: input {path} changed since the run");
            }
            Ok(_) => {}
            Err(_) => eprintln!("warning: input {path} is no longer readable"),
        }
    }
    let text = results.render();
    print!("{text}");
    if a.check {
        let stored = read_text(&a.dir.join(REPORT))?;
        if stored != text {
            return Err(CliError::Data(format!(
                "{} differs from the re-rendered results",
                a.dir.join(REPORT).display()
            )));
        }
    }
    Ok(())
}
