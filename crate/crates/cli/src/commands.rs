//! One function per subcommand; each returns the directory it wrote.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use labelcraft::data::write_interactions;
use labelcraft::eval::{comparison_csv, MetricsReport};

use crate::config::{ExperimentConfig, Method};
use crate::output::{
    latest_train_run, load_recommender, save_labeler, save_recommender, RunDir, CONFIG_FILE, HISTORY_FILE,
    LABELER_FILE, RECOMMENDER_FILE, SUMMARY_FILE,
};
use crate::pipeline::{evaluate_model, load_dataset, load_split, train_and_evaluate, train_method, MethodRun};
use crate::variant::Variant;

/// Note stored with ablation reports describing the objective letters.
pub const OBJECTIVE_LETTERS: &str =
    "WO drops the watch-time objective, DO the duration-diversity objective, EO the explicit-feedback objective";

/// Rules whose formulation follows a one-line description rather than a full reference definition.
pub const AS_SUMMARIZED_RULES: [&str; 2] = ["d2q", "dvr"];

fn method_notes(methods: &[Method]) -> serde_json::Value {
    let summarized: Vec<&str> = methods
        .iter()
        .map(|m| m.name())
        .filter(|n| AS_SUMMARIZED_RULES.contains(n))
        .collect();
    serde_json::json!({ "as_summarized_rules": summarized })
}

fn write_report(dir: &mut RunDir, stem: &str, report: &MetricsReport) -> anyhow::Result<()> {
    dir.write_json(&format!("{stem}.metrics.json"), report)?;
    dir.write(&format!("{stem}.histogram.csv"), report.duration_histogram.to_csv())?;
    Ok(())
}

fn write_run(dir: &mut RunDir, stem: &str, run: &MethodRun) -> anyhow::Result<()> {
    let name = |f: &str| {
        if stem.is_empty() {
            f.to_string()
        } else {
            format!("{stem}.{f}")
        }
    };
    dir.write_history(&name(HISTORY_FILE), &run.history)?;
    dir.write_json(&name(SUMMARY_FILE), &run.summary())?;
    let p = dir.file(&name(RECOMMENDER_FILE));
    save_recommender(&p, &run.recommender, &run.encoder)?;
    if let Some(l) = &run.labeler {
        let p = dir.file(&name(LABELER_FILE));
        save_labeler(&p, l)?;
    }
    Ok(())
}

/// Writes the configured dataset as CSV.
pub fn cmd_generate(cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    let ds = load_dataset(cfg)?;
    let mut dir = RunDir::create(&cfg.out, "generate", "")?;
    let f = std::fs::File::create(dir.file("interactions.csv"))?;
    write_interactions(std::io::BufWriter::new(f), &ds)?;
    dir.finish(cfg)
}

/// Trains `cfg.method` under `cfg.variant` and stores checkpoints and history.
pub fn cmd_train(cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    let split = load_split(cfg)?;
    let run = train_method(&split, cfg, cfg.method, cfg.variant)?;
    let label = if cfg.variant == Variant::Full {
        cfg.method.name().to_string()
    } else {
        format!("{}-{}", cfg.method.name(), cfg.variant.slug())
    };
    let mut dir = RunDir::create(&cfg.out, "train", &label)?;
    write_run(&mut dir, "", &run)?;
    dir.finish(cfg)
}

/// Evaluates a trained run on the test part rebuilt from its stored config.
///
/// Writes `metrics.json`, `metrics.csv` and `histogram.csv` into a fresh
/// directory under `<run>/evaluations`.
pub fn cmd_evaluate(cfg: &ExperimentConfig, run: Option<&Path>) -> anyhow::Result<PathBuf> {
    let run_dir = match run {
        Some(p) => p.to_path_buf(),
        None => latest_train_run(&cfg.out)?,
    };
    let run_cfg = ExperimentConfig::load(&run_dir.join(CONFIG_FILE))?;
    let (rec, encoder) = load_recommender(&run_dir.join(RECOMMENDER_FILE))?;
    let split = load_split(&run_cfg)?;
    let name = run_cfg.method.name();
    let report = evaluate_model(&split, name, &encoder, &rec, cfg.k, cfg.histogram_bins)?;
    let mut dir = RunDir::create(&run_dir.join("evaluations"), "evaluate", name)?;
    dir.write_json("metrics.json", &report)?;
    dir.write("metrics.csv", comparison_csv(std::slice::from_ref(&report), name)?)?;
    dir.write("histogram.csv", report.duration_histogram.to_csv())?;
    dir.write("pool_histogram.csv", report.pool_histogram.to_csv())?;
    let mut eval_cfg = run_cfg;
    eval_cfg.k = cfg.k;
    eval_cfg.histogram_bins = cfg.histogram_bins;
    dir.finish(&eval_cfg)
}

/// Trains and evaluates every method in `cfg.methods` on one split.
pub fn cmd_compare(cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    anyhow::ensure!(
        cfg.methods.contains(&cfg.reference),
        "reference method {} is not among the compared methods",
        cfg.reference
    );
    let split = load_split(cfg)?;
    let mut dir = RunDir::create(&cfg.out, "compare", "")?;
    let mut reports = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let (run, report) = train_and_evaluate(&split, cfg, m, Variant::Full, m.name())?;
        write_run(&mut dir, m.name(), &run)?;
        write_report(&mut dir, m.name(), &report)?;
        reports.push(report);
    }
    dir.write("comparison.csv", comparison_csv(&reports, cfg.reference.name())?)?;
    dir.write_json("notes.json", &method_notes(&cfg.methods))?;
    dir.finish(cfg)
}

/// One LabelCraft run per τ in the grid, plus the best baseline value of each metric.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> anyhow::Result<PathBuf> {
    anyhow::ensure!(!cfg.tau_grid.is_empty(), "tau_grid must not be empty");
    let split = load_split(cfg)?;
    let mut dir = RunDir::create(&cfg.out, "sweep", "")?;
    let mut curve = String::from("tau,nwtg,neg,ds\n");
    for &tau in &cfg.tau_grid {
        let mut c = cfg.clone();
        c.train.objective.tau = tau;
        let stem = format!("tau{tau}");
        let (run, report) = train_and_evaluate(&split, &c, Method::LabelCraft, c.variant, &stem)?;
        dir.write_history(&format!("{stem}.{HISTORY_FILE}"), &run.history)?;
        write_report(&mut dir, &stem, &report)?;
        let _ = writeln!(curve, "{tau},{:.6},{:.6},{:.6}", report.nwtg, report.neg, report.ds);
    }
    dir.write("sweep.csv", &curve)?;

    let mut baselines = Vec::new();
    for &m in cfg.sweep_baselines.iter().filter(|m| **m != Method::LabelCraft) {
        let (_, report) = train_and_evaluate(&split, cfg, m, Variant::Full, m.name())?;
        write_report(&mut dir, m.name(), &report)?;
        baselines.push(report);
    }
    if !baselines.is_empty() {
        let mut refs = String::from("metric,best_method,value\n");
        let best = |f: fn(&MetricsReport) -> f64| {
            baselines
                .iter()
                .max_by(|a, b| f(a).total_cmp(&f(b)))
                .map(|r| (r.method.clone(), f(r)))
                .expect("nonempty")
        };
        for (metric, f) in [
            ("nwtg", (|r: &MetricsReport| r.nwtg) as fn(&MetricsReport) -> f64),
            ("neg", |r| r.neg),
            ("ds", |r| r.ds),
        ] {
            let (m, v) = best(f);
            let _ = writeln!(refs, "{metric},{m},{v:.6}");
        }
        dir.write("reference.csv", &refs)?;
        dir.write_json("notes.json", &method_notes(&cfg.sweep_baselines))?;
    }
    dir.finish(cfg)
}

/// LabelCraft under each variant plus the full model; the table reports improvements of the full model.
pub fn cmd_ablate(cfg: &ExperimentConfig, variants: &[Variant]) -> anyhow::Result<PathBuf> {
    anyhow::ensure!(!variants.is_empty(), "no ablation variants selected");
    let split = load_split(cfg)?;
    let label = if variants.len() == 1 { variants[0].slug() } else { "all" };
    let mut selected = vec![Variant::Full];
    selected.extend(variants.iter().copied().filter(|&v| v != Variant::Full));
    let mut dir = RunDir::create(&cfg.out, "ablate", label)?;
    let mut reports = Vec::with_capacity(variants.len());
    for &v in &selected {
        let (run, report) =
            train_and_evaluate(&split, cfg, Method::LabelCraft, v, v.name()).with_context(|| format!("variant {v}"))?;
        dir.write_history(&format!("{}.{HISTORY_FILE}", v.slug()), &run.history)?;
        dir.write_json(&format!("{}.{SUMMARY_FILE}", v.slug()), &run.summary())?;
        write_report(&mut dir, v.slug(), &report)?;
        reports.push(report);
    }
    dir.write("ablation.csv", comparison_csv(&reports, Variant::Full.name())?)?;
    dir.write_json(
        "notes.json",
        &serde_json::json!({ "objective_letters": OBJECTIVE_LETTERS }),
    )?;
    dir.finish(cfg)
}
