use std::fs;
use std::io::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use icp_core::dataset::{make_blobs, make_synthetic_regression, write_csv, BlobConfig, Noise};
use icp_core::diagnostics::ks::MIN_KS_TRIALS;
use icp_core::diagnostics::{coverage_histogram, ks_test, qq_pairs, CoverageReport, KsMode};
use icp_core::pipeline::{FittedPipeline, Method, PipelineConfig, Source};
use icp_core::{Error, Execution};

use crate::{CompareArgs, NoiseKind, PipelineArgs, RunArgs, SynthArgs, SynthKind, TrialsArgs};

pub fn synth(args: &SynthArgs) -> Result<()> {
    let source = match args.kind {
        SynthKind::Regression => Source::SyntheticRegression {
            n: args.n,
            noise: match args.noise {
                NoiseKind::Homoscedastic => Noise::Homoscedastic { sigma: args.sigma },
                NoiseKind::Heteroscedastic => Noise::Heteroscedastic,
            },
        },
        SynthKind::Blobs => Source::Blobs(BlobConfig {
            priors: args.priors.clone(),
            ..BlobConfig::new(args.n, args.classes)
        }),
    };
    let data = match &source {
        Source::SyntheticRegression { n, noise } => make_synthetic_regression(*n, *noise, args.seed)?,
        Source::Blobs(cfg) => make_blobs(cfg, args.seed)?,
        Source::Csv { .. } => unreachable!(),
    };
    #[derive(Serialize)]
    struct Stamp<'a> {
        generator: &'a Source,
        seed: u64,
    }
    let stamp = serde_json::to_string(&Stamp {
        generator: &source,
        seed: args.seed,
    })?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_csv(&data, &args.out, Some(&stamp))?;
    println!(
        "wrote {} rows x {} features to {}",
        data.n_samples(),
        data.n_features(),
        args.out.display()
    );
    Ok(())
}

fn build_config(args: &PipelineArgs) -> Result<PipelineConfig> {
    let method = args.method.as_deref().map(str::parse::<Method>).transpose()?;
    let mut config = match (&args.config, method) {
        (Some(path), _) => PipelineConfig::from_json_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        (None, Some(method)) => PipelineConfig::new(method, Source::synthetic_for(method.task())),
        (None, None) => bail!("either --config or --method is required"),
    };
    if let Some(method) = method {
        if method.task() != config.method.task() && args.data.is_none() {
            config.source = Source::synthetic_for(method.task());
        }
        config.method = method;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(fractions) = &args.fractions {
        config.fractions = Some(fractions.clone());
    }
    if let (Some(path), Some(target)) = (&args.data, &args.target) {
        config.source = Source::Csv {
            path: path.clone(),
            target: target.clone(),
        };
    }
    if args.sequential {
        config.execution = Execution::Sequential;
    }
    config.validate()?;
    Ok(config)
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_lines(path: &Path, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let file = fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{header}")?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

fn fit(config: &PipelineConfig) -> Result<FittedPipeline> {
    let fitted = FittedPipeline::fit(config)?;
    for warning in fitted.warnings() {
        eprintln!("warning: {warning}");
    }
    Ok(fitted)
}

pub fn run(args: &RunArgs) -> Result<()> {
    let config = build_config(&args.pipeline)?;
    let out_dir = &args.pipeline.out;
    let output = fit(&config)?.run()?;
    create_out_dir(out_dir)?;
    write_json(&out_dir.join("report.json"), &output.report)?;
    output.write_predictions_csv(out_dir.join("predictions.csv"))?;
    write_json(&out_dir.join("config.json"), &config)?;

    let r = &output.report;
    let q: Vec<String> = r
        .q_hat
        .iter()
        .map(|q| if q.is_finite() { format!("{q:.6}") } else { "inf".into() })
        .collect();
    println!(
        "{}: coverage {:.4} on {} points (alpha {}), mean {} {:.4}, q_hat [{}]",
        r.method,
        r.empirical_coverage,
        r.n_val,
        r.alpha,
        r.size_kind,
        r.size.mean,
        q.join(", ")
    );
    if let Some(c) = r.crossing_count {
        println!("band crossings: {c}");
    }
    Ok(())
}

#[derive(Serialize)]
struct BetaJson {
    a: f64,
    b: f64,
    l: usize,
    n_cal: usize,
    alpha: f64,
    mean: f64,
}

#[derive(Serialize)]
struct TrialsSummary<'a> {
    method: &'a str,
    t: usize,
    seed: u64,
    n_cal: usize,
    n_val: usize,
    mean_coverage: f64,
    standard_error: f64,
    expected_coverage: f64,
    mean_size: f64,
    per_class_mean_coverage: &'a Option<Vec<Option<f64>>>,
}

pub fn trials(args: &TrialsArgs) -> Result<()> {
    let mut config = build_config(&args.pipeline)?;
    if let Some(t) = args.trials {
        config.trials = t;
    }
    if args.two_sample {
        config.ks_mode = KsMode::TwoSample;
    }
    let t = config.trials;
    if t < MIN_KS_TRIALS {
        return Err(Error::TooFewTrials(t).into());
    }
    let out_dir = &args.pipeline.out;
    let fitted = fit(&config)?;
    let dist = fitted.trials(t)?;
    let ks = ks_test(&dist, config.ks_mode, config.seed)?;
    create_out_dir(out_dir)?;

    write_lines(
        &out_dir.join("coverages.csv"),
        "trial,coverage",
        dist.coverages.iter().enumerate().map(|(j, c)| format!("{},{c}", j + 1)),
    )?;
    let beta = dist.beta;
    write_json(
        &out_dir.join("beta.json"),
        &BetaJson {
            a: beta.a,
            b: beta.b,
            l: beta.l,
            n_cal: beta.n_cal,
            alpha: beta.alpha,
            mean: beta.mean(),
        },
    )?;
    write_json(&out_dir.join("ks.json"), &ks)?;
    write_lines(
        &out_dir.join("histogram.csv"),
        "bin_left,bin_right,count,beta_pdf_at_midpoint",
        coverage_histogram(&dist.coverages, dist.n_val, &beta)?
            .into_iter()
            .map(|r| format!("{},{},{},{}", r.bin_left, r.bin_right, r.count, r.beta_pdf_at_midpoint)),
    )?;
    write_lines(
        &out_dir.join("qq.csv"),
        "level,empirical,theoretical",
        qq_pairs(&dist.coverages, &beta)?
            .into_iter()
            .map(|p| format!("{},{},{}", p.level, p.empirical, p.theoretical)),
    )?;
    let summary = TrialsSummary {
        method: config.method.name(),
        t,
        seed: config.seed,
        n_cal: beta.n_cal,
        n_val: dist.n_val,
        mean_coverage: dist.mean_coverage(),
        standard_error: dist.standard_error(),
        expected_coverage: beta.mean(),
        mean_size: dist.mean_size(),
        per_class_mean_coverage: &dist.per_class_mean,
    };
    write_json(&out_dir.join("trials.json"), &summary)?;
    write_json(&out_dir.join("config.json"), &config)?;

    println!(
        "{} trials: mean coverage {:.5} (se {:.5}), Beta({}, {}) mean {:.6}",
        t,
        summary.mean_coverage,
        summary.standard_error,
        beta.a,
        beta.b,
        beta.mean()
    );
    println!(
        "KS ({}): D = {:.5}, 5% critical = {:.5}, {}",
        match ks.mode {
            KsMode::OneSample => "one-sample",
            KsMode::TwoSample => "two-sample",
        },
        ks.statistic,
        ks.critical_5pct,
        if ks.pass { "pass" } else { "reject" }
    );
    Ok(())
}

pub fn compare(args: &CompareArgs) -> Result<()> {
    let reports: Vec<CoverageReport> = args
        .reports
        .iter()
        .map(|path| {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("malformed report {}", path.display()))
        })
        .collect::<Result<_>>()?;
    println!(
        "{:<16} {:>6} {:>9} {:>10} {:>12} {:>14}",
        "method", "alpha", "coverage", "size_kind", "mean_size", "min_class_cov"
    );
    for r in &reports {
        let min_class = r
            .min_class_coverage()
            .map_or_else(|| "-".to_string(), |c| format!("{c:.4}"));
        let size = if r.size.mean.is_finite() {
            format!("{:.4}", r.size.mean)
        } else {
            "inf".to_string()
        };
        println!(
            "{:<16} {:>6} {:>9.4} {:>10} {:>12} {:>14}",
            r.method, r.alpha, r.empirical_coverage, r.size_kind, size, min_class
        );
    }
    Ok(())
}
