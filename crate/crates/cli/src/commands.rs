use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use circle::alignment::{baseline_projections, baseline_realign_with, concatenate_representations, infer_alignment};
use circle::evaluation::{evaluate_features, EvalReport};
use circle::{evaluate, fit_with, load_dataset, save_dataset, synthesize, Dataset64, Model64, SynthSpec, TrainConfig, ViewFormat};
use clap::Parser;

use crate::args::*;
use crate::error::CliError;
use crate::manifest::{RunManifest, MANIFEST_FILE};

pub const MODEL_FILE: &str = "model.bin";
pub const CURVE_FILE: &str = "curve.csv";
pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const ABLATION_RUNS_FILE: &str = "ablation_runs.csv";

const METRIC_HEADER: &str = "acc,nmi,ari,p80,p50,p20,instance,cluster";

pub fn run(cli: Cli, argv: &[String]) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(a) => synth(&a, argv),
        Command::Train(a) => train(&a, argv),
        Command::Eval(a) => eval(&a, argv),
        Command::Sweep(a) => sweep(&a, argv),
        Command::Ablate(a) => ablate(&a, argv),
        Command::Replay(a) => replay(&a),
    }
}

fn json<T: serde::Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).expect("config types serialize")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Creates `out`, refusing to write into any input directory.
fn prepare_out(out: &Path, inputs: &[&Path]) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let canon = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let out_c = canon(out);
    for input in inputs {
        let in_c = canon(input);
        let input_dir = if in_c.is_file() { in_c.parent().map(Path::to_path_buf).unwrap_or_default() } else { in_c };
        if out_c == input_dir {
            return Err(CliError::Usage(format!(
                "--out {} must differ from the input directory",
                out.display()
            )));
        }
    }
    Ok(())
}

fn load(dir: &Path) -> Result<Dataset64, CliError> {
    Ok(load_dataset(dir)?)
}

fn synth(a: &SynthArgs, argv: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    if a.dims.len() != a.views {
        return Err(CliError::Usage(format!("--dims lists {} dimensions for --views {}", a.dims.len(), a.views)));
    }
    let spec = SynthSpec {
        num_views: a.views,
        num_clusters: a.clusters,
        samples_per_cluster: a.per_cluster,
        latent_dim: a.latent_dim,
        dims: a.dims.clone(),
        noise_std: a.noise,
        unaligned_fraction: a.unaligned,
        seed: a.seed,
    };
    spec.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data: Dataset64 = synthesize(&spec)?;
    prepare_out(&a.out, &[])?;
    let format = match a.format {
        Format::Csv => ViewFormat::Csv,
        Format::Binary => ViewFormat::Binary,
    };
    save_dataset(&a.out, &data, format)?;
    let mut m = RunManifest::new("synth", argv);
    m.config = json(&spec);
    m.seeds = vec![a.seed];
    m.outputs.insert("dataset".into(), a.out.clone());
    m.finish(&a.out, start.elapsed().as_secs_f64())?;
    println!("wrote {} samples x {} views to {}", data.num_samples(), data.num_views(), a.out.display());
    Ok(())
}

fn train(a: &TrainCmd, argv: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    let config = a.train.config(a.seed).map_err(CliError::Usage)?;
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let data = load(&a.data)?;
    prepare_out(&a.out, &[&a.data])?;
    let verbose = a.verbose;
    let (model, curve) = fit_with(&data, &config, |r| {
        if verbose {
            eprintln!("epoch {:>4}  L_REC {:.6}  L_CGC {:.6}  total {:.6}", r.epoch, r.reconstruction, r.contrastive, r.total);
        }
    })?;
    model.save(a.out.join(MODEL_FILE))?;
    curve.write_csv(a.out.join(CURVE_FILE))?;
    let mut m = RunManifest::new("train", argv);
    m.config = json(&config);
    m.seeds = vec![a.seed];
    m.inputs.insert("data".into(), a.data.clone());
    m.outputs.insert("model".into(), a.out.join(MODEL_FILE));
    m.outputs.insert("curve".into(), a.out.join(CURVE_FILE));
    m.finish(&a.out, start.elapsed().as_secs_f64())?;
    let last = curve.epochs.last().expect("at least one epoch");
    println!(
        "trained {} epochs: L_REC {:.6} L_CGC {:.6} total {:.6}",
        curve.len(),
        last.reconstruction,
        last.contrastive,
        last.total
    );
    Ok(())
}

fn eval(a: &EvalCmd, argv: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    let config = a.eval.config();
    if config.seeds.is_empty() {
        return Err(CliError::Usage("--eval-seeds needs at least one seed".into()));
    }
    let data = load(&a.data)?;
    let mut inputs = vec![a.data.as_path()];
    if let Some(model) = &a.model {
        inputs.push(model.as_path());
    }
    prepare_out(&a.out, &inputs)?;
    let mut m = RunManifest::new("eval", argv);
    m.inputs.insert("data".into(), a.data.clone());

    let (report, alignment) = match a.baseline {
        Some(Baseline::PcaHungarian) => {
            let dim = a.baseline_dim.unwrap_or_else(|| data.view_dims().into_iter().min().unwrap_or(1));
            let alignment = baseline_realign_with(&data, dim, config.keep_known)?;
            let z = concatenate_representations(&baseline_projections(&data, dim)?, &alignment)?;
            let mut report = evaluate_features(&z, &alignment, &data, &config)?;
            report.notes.push(format!("baseline: per-view PCA to {dim} dimensions, Hungarian realignment on raw features"));
            m.config = serde_json::json!({ "eval": json(&config), "baseline": "pca-hungarian", "baseline_dim": dim });
            (report, alignment)
        }
        None => {
            let path = a
                .model
                .as_ref()
                .ok_or_else(|| CliError::Usage("--model is required unless --baseline is given".into()))?;
            let model = Model64::load(path)?;
            m.inputs.insert("model".into(), path.clone());
            let report = evaluate(&model, &data, &config)?;
            m.config = serde_json::json!({ "eval": json(&config) });
            let alignment = if a.dump_alignment {
                Some(infer_alignment(&model, &data, config.align_mode, config.keep_known)?)
            } else {
                None
            };
            (report, alignment.unwrap_or_else(|| empty_alignment(&config)))
        }
    };
    if a.dump_alignment {
        alignment.write_csv(&a.out)?;
    }
    write_report(&a.out.join(REPORT_FILE), &report)?;
    m.seeds = config.seeds.clone();
    m.outputs.insert("report".into(), a.out.join(REPORT_FILE));
    m.finish(&a.out, start.elapsed().as_secs_f64())?;
    println!(
        "ACC {:.4}  NMI {:.4}  ARI {:.4}  cluster-rate {:.4}  instance-rate {:.4}",
        report.clustering.acc, report.clustering.nmi, report.clustering.ari, report.alignment.cluster, report.alignment.instance
    );
    Ok(())
}

fn empty_alignment(config: &circle::EvalConfig) -> circle::AlignmentResult<f64> {
    circle::AlignmentResult {
        mode: config.align_mode,
        keep_known: config.keep_known,
        maps: Vec::new(),
        distances: Vec::new(),
    }
}

fn write_report(path: &Path, report: &EvalReport) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).map_err(|e| CliError::Internal(e.to_string()))?;
    write_text(path, &(text + "\n"))
}

fn metric_fields(r: &EvalReport) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        r.clustering.acc,
        r.clustering.nmi,
        r.clustering.ari,
        r.classification.p80,
        r.classification.p50,
        r.classification.p20,
        r.alignment.instance,
        r.alignment.cluster
    )
}

fn mean_fields(reports: &[&EvalReport]) -> String {
    if reports.is_empty() {
        return ",,,,,,,".into();
    }
    let n = reports.len() as f64;
    let avg = |f: &dyn Fn(&EvalReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n;
    format!(
        "{},{},{},{},{},{},{},{}",
        avg(&|r| r.clustering.acc),
        avg(&|r| r.clustering.nmi),
        avg(&|r| r.clustering.ari),
        avg(&|r| r.classification.p80),
        avg(&|r| r.classification.p50),
        avg(&|r| r.classification.p20),
        avg(&|r| r.alignment.instance),
        avg(&|r| r.alignment.cluster)
    )
}

/// Parses `a,b,c` or an inclusive `start:stop:step` range.
pub fn parse_values(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Usage(format!("--values {spec}: {m}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
    let values = if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("range must be start:stop:step".into()));
        }
        let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad("range needs step > 0 and stop >= start".into()));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
        // Rounded to 12 significant digits so 0.1 steps print cleanly.
        (0..count).map(|i| format!("{:.12}", start + i as f64 * step).parse().unwrap()).collect()
    } else {
        spec.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err(bad("no values".into()));
    }
    Ok(values)
}

fn check_axis_value(axis: Axis, v: f64) -> Result<(), CliError> {
    let ok = match axis {
        Axis::Unaligned => (0.0..1.0).contains(&v),
        Axis::Lambda => v >= 0.0 && v.is_finite(),
        Axis::K | Axis::Dz | Axis::Batch => v >= 1.0 && v.fract() == 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--values: {v} is not valid for axis {axis:?}")))
    }
}

/// Runs `count` cells on up to `jobs` threads; results come back in cell order.
fn run_cells<R: Send>(count: usize, jobs: usize, cell: impl Fn(usize) -> R + Sync) -> Vec<R> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = (0..count).map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..jobs.min(count).max(1) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= count {
                    break;
                }
                let r = cell(i);
                *slots[i].lock().unwrap() = Some(r);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().unwrap().expect("every cell ran")).collect()
}

/// Trains and evaluates one configuration, writing its artifacts to `dir`.
fn train_and_eval(data: &Dataset64, config: &TrainConfig, eval: &circle::EvalConfig, dir: &Path) -> Result<EvalReport, CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let (model, curve) = fit_with(data, config, |_| {})?;
    curve.write_csv(dir.join(CURVE_FILE))?;
    let report = evaluate(&model, data, eval)?;
    write_report(&dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

fn status(r: &Result<EvalReport, CliError>) -> String {
    match r {
        Ok(_) => "ok".into(),
        Err(e) => format!("\"failed: {}\"", e.to_string().replace('"', "'")),
    }
}

fn sweep(a: &SweepCmd, argv: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    let values = parse_values(&a.values)?;
    for &v in &values {
        check_axis_value(a.axis, v)?;
    }
    if a.seeds.is_empty() {
        return Err(CliError::Usage("--seeds needs at least one seed".into()));
    }
    let base_config = a.train.config(0).map_err(CliError::Usage)?;
    base_config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let eval = a.eval.config();
    let data = load(&a.data)?;
    let aligned = data.restore_alignment();
    prepare_out(&a.out, &[&a.data])?;

    let axis_name = format!("{:?}", a.axis).to_lowercase();
    let cells: Vec<(f64, u64)> = values.iter().flat_map(|&v| a.seeds.iter().map(move |&s| (v, s))).collect();
    let results = run_cells(cells.len(), a.jobs, |i| {
        let (value, seed) = cells[i];
        let mut config = TrainConfig { seed, ..base_config.clone() };
        let mut cell_data = None;
        match a.axis {
            Axis::Unaligned => cell_data = Some(aligned.apply_misalignment(value, seed)),
            Axis::Lambda => config.lambda = value,
            Axis::K => config.k = value as usize,
            Axis::Dz => config.latent_dim = value as usize,
            Axis::Batch => config.batch_size = value as usize,
        }
        let dir = a.out.join("cells").join(format!("{axis_name}={value}")).join(format!("seed={seed}"));
        let result = match cell_data {
            Some(Err(e)) => Err(CliError::from(e)),
            Some(Ok(d)) => train_and_eval(&d, &config, &eval, &dir),
            None => train_and_eval(&data, &config, &eval, &dir),
        };
        eprintln!("{axis_name}={value} seed={seed}: {}", status(&result).trim_matches('"'));
        result
    });

    let mut csv = format!("axis,value,seed,status,{METRIC_HEADER}\n");
    for ((value, seed), r) in cells.iter().zip(&results) {
        let metrics = r.as_ref().map(metric_fields).unwrap_or_else(|_| ",,,,,,,".into());
        writeln!(csv, "{axis_name},{value},{seed},{},{metrics}", status(r)).unwrap();
    }
    for &value in &values {
        let ok: Vec<&EvalReport> = cells
            .iter()
            .zip(&results)
            .filter(|((v, _), _)| *v == value)
            .filter_map(|(_, r)| r.as_ref().ok())
            .collect();
        let st = if ok.is_empty() { "failed" } else { "ok" };
        writeln!(csv, "{axis_name},{value},mean,{st},{}", mean_fields(&ok)).unwrap();
    }
    write_text(&a.out.join(SWEEP_FILE), &csv)?;

    let mut m = RunManifest::new("sweep", argv);
    m.config = serde_json::json!({
        "axis": axis_name,
        "values": values,
        "train": json(&base_config),
        "eval": json(&eval),
        "jobs": a.jobs,
    });
    m.seeds = a.seeds.clone();
    m.inputs.insert("data".into(), a.data.clone());
    m.outputs.insert("sweep".into(), a.out.join(SWEEP_FILE));
    m.finish(&a.out, start.elapsed().as_secs_f64())?;
    let failed = results.iter().filter(|r| r.is_err()).count();
    println!("{} cells, {failed} failed; wrote {}", cells.len(), a.out.join(SWEEP_FILE).display());
    Ok(())
}

pub const VARIANTS: [&str; 3] = ["rec-only", "cgc-only", "full"];

fn variant_config(name: &str, base: &TrainConfig) -> TrainConfig {
    match name {
        "rec-only" => TrainConfig { lambda: 0.0, reconstruction: true, ..base.clone() },
        "cgc-only" => TrainConfig { reconstruction: false, ..base.clone() },
        _ => TrainConfig { reconstruction: true, ..base.clone() },
    }
}

fn ablate(a: &AblateCmd, argv: &[String]) -> Result<(), CliError> {
    let start = Instant::now();
    if a.seeds.is_empty() {
        return Err(CliError::Usage("--seeds needs at least one seed".into()));
    }
    let base = a.train.config(0).map_err(CliError::Usage)?;
    base.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if base.lambda == 0.0 || a.train.no_reconstruction {
        return Err(CliError::Usage("ablation needs --lambda > 0 and the reconstruction term enabled".into()));
    }
    let eval = a.eval.config();
    let data = load(&a.data)?;
    prepare_out(&a.out, &[&a.data])?;

    let cells: Vec<(&str, u64)> = VARIANTS.iter().flat_map(|&v| a.seeds.iter().map(move |&s| (v, s))).collect();
    let results = run_cells(cells.len(), a.jobs, |i| {
        let (variant, seed) = cells[i];
        let config = TrainConfig { seed, ..variant_config(variant, &base) };
        let dir = a.out.join("cells").join(variant).join(format!("seed={seed}"));
        let r = train_and_eval(&data, &config, &eval, &dir);
        eprintln!("{variant} seed={seed}: {}", status(&r).trim_matches('"'));
        r
    });

    let mut runs = format!("variant,seed,status,{METRIC_HEADER}\n");
    for ((variant, seed), r) in cells.iter().zip(&results) {
        let metrics = r.as_ref().map(metric_fields).unwrap_or_else(|_| ",,,,,,,".into());
        writeln!(runs, "{variant},{seed},{},{metrics}", status(r)).unwrap();
    }
    let mut summary = format!("variant,runs,{METRIC_HEADER}\n");
    for variant in VARIANTS {
        let ok: Vec<&EvalReport> = cells
            .iter()
            .zip(&results)
            .filter(|((v, _), _)| *v == variant)
            .filter_map(|(_, r)| r.as_ref().ok())
            .collect();
        writeln!(summary, "{variant},{},{}", ok.len(), mean_fields(&ok)).unwrap();
    }
    write_text(&a.out.join(ABLATION_RUNS_FILE), &runs)?;
    write_text(&a.out.join(ABLATION_FILE), &summary)?;

    let mut m = RunManifest::new("ablate", argv);
    let variants: serde_json::Map<String, serde_json::Value> =
        VARIANTS.iter().map(|v| (v.to_string(), json(&variant_config(v, &base)))).collect();
    m.config = serde_json::json!({ "variants": variants, "eval": json(&eval), "jobs": a.jobs });
    m.seeds = a.seeds.clone();
    m.inputs.insert("data".into(), a.data.clone());
    m.outputs.insert("ablation".into(), a.out.join(ABLATION_FILE));
    m.outputs.insert("runs".into(), a.out.join(ABLATION_RUNS_FILE));
    m.finish(&a.out, start.elapsed().as_secs_f64())?;
    print!("{summary}");
    Ok(())
}

/// Recorded argv with its `--out` value replaced.
pub fn retarget(argv: &[String], out: &Path) -> Result<Vec<String>, CliError> {
    let mut res = Vec::with_capacity(argv.len());
    let mut replaced = false;
    let mut it = argv.iter();
    while let Some(arg) = it.next() {
        if arg == "--out" {
            it.next();
            res.push("--out".to_string());
            res.push(out.to_string_lossy().into_owned());
            replaced = true;
        } else if arg.starts_with("--out=") {
            res.push(format!("--out={}", out.display()));
            replaced = true;
        } else {
            res.push(arg.clone());
        }
    }
    if replaced {
        Ok(res)
    } else {
        Err(CliError::Data("recorded arguments have no --out".into()))
    }
}

fn replay(a: &ReplayCmd) -> Result<(), CliError> {
    let recorded = RunManifest::load(&a.manifest)?;
    if recorded.command == "replay" {
        return Err(CliError::Usage("cannot replay a replay".into()));
    }
    let argv = retarget(&recorded.argv, &a.out)?;
    let cli = Cli::try_parse_from(std::iter::once("circle".to_string()).chain(argv.iter().cloned()))
        .map_err(|e| CliError::Data(format!("manifest arguments no longer parse: {e}")))?;
    run(cli, &argv)?;
    let fresh = RunManifest::load(&a.out.join(MANIFEST_FILE))?;
    let mut diffs = Vec::new();
    for (file, sum) in &recorded.checksums {
        match fresh.checksums.get(file) {
            Some(s) if s == sum => {}
            Some(_) => diffs.push(format!("{file} differs")),
            None => diffs.push(format!("{file} missing")),
        }
    }
    for file in fresh.checksums.keys().filter(|f| !recorded.checksums.contains_key(*f)) {
        diffs.push(format!("{file} is new"));
    }
    if diffs.is_empty() {
        println!("replay reproduced {} artifacts", recorded.checksums.len());
        Ok(())
    } else {
        Err(CliError::Internal(format!("replay diverged: {}", diffs.join(", "))))
    }
}
