use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use kersize_core::bounds::{builtin_predictions, kersize as compute_kersize, single_kersize, BuiltinMap, THETA};
use kersize_core::dataset::dataset_from_collection;
use kersize_core::demo::{self, MicroscopyDemo, SuperresDemo};
use kersize_core::forward::NoiseKind;
use kersize_core::io::{self, format_f64, read_collection, read_json, read_predictions, read_vectors, write_json};
use kersize_core::sampling::MeasurementSource;
use kersize_core::symmetric::{kernel_projection, skersize_with};
use kersize_core::{
    build_feasible_sets, forward::LinearOperator, loss as compute_loss, verify_bounds, Error, FeasibleSetCollection,
    InnerExponent, MeasurementVector, NoiseSpec, NormSpec, Predictions, ProjectionMode, Result,
};
use serde_json::{Map, Value};

use crate::config::{load_model, load_run_config};
use crate::{Mode, NormArgs};

pub enum Outcome {
    Ok,
    Violation,
}

/// The manifest norm with any command-line overrides applied.
fn resolve_norm(base: &NormSpec, args: &NormArgs) -> Result<NormSpec> {
    let inner = match &args.q {
        Some(q) => InnerExponent::parse(q)?,
        None => base.inner(),
    };
    let p = args.p.unwrap_or(base.p());
    let mask = match &args.mask {
        Some(idx) => NormSpec::from_indices(inner, base.dim(), idx, p)?.mask().to_vec(),
        None => base.mask().to_vec(),
    };
    NormSpec::new(inner, mask, p)
}

fn print_value(label: &str, v: f64) {
    println!("{label}: {v:.8}");
}

/// Merges `fields` into the JSON object at `path`, creating it if needed.
fn merge_json(path: &Path, fields: Map<String, Value>) -> Result<()> {
    let mut doc = if path.exists() {
        match read_json::<Value>(path)? {
            Value::Object(m) => m,
            _ => return Err(Error::Data(format!("{} is not a JSON object", path.display()))),
        }
    } else {
        Map::new()
    };
    for (k, v) in fields {
        doc.insert(k, v);
    }
    write_json(path, &Value::Object(doc))
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

pub fn sample(config: &Path, out: Option<PathBuf>, n_max: Option<usize>, seed: Option<u64>) -> Result<Outcome> {
    let cfg = load_run_config(config)?;
    let mut sampler = cfg
        .sampler
        .clone()
        .ok_or_else(|| Error::Usage("config needs a `sampler` section".into()))?;
    if let Some(n) = n_max {
        sampler.n_max = n;
        sampler.budget = sampler.budget.max(n);
    }
    if let Some(s) = seed {
        sampler.seed = s;
    }
    let source = match (&cfg.generate, &cfg.paths.input) {
        (Some(g), None) => MeasurementSource::Generate { count: g.count },
        (None, Some(input)) => {
            let rows = read_vectors(input)?;
            let list = rows
                .into_iter()
                .enumerate()
                .map(|(k, y)| Ok((format!("{k:04}"), MeasurementVector::new(y)?)))
                .collect::<Result<Vec<_>>>()?;
            MeasurementSource::Given(list)
        }
        (Some(_), Some(_)) => return Err(Error::Usage("give either `generate` or `paths.input`, not both".into())),
        (None, None) => return Err(Error::Usage("config needs `generate` or `paths.input`".into())),
    };
    let out_dir = out
        .or(cfg.paths.output.clone())
        .ok_or_else(|| Error::Usage("no output directory: pass --out or set paths.output".into()))?;
    let norm = match &cfg.norm {
        Some(n) => n.clone(),
        None => NormSpec::euclidean(cfg.model.d1(), 2.0)?,
    };
    let built = build_feasible_sets(&cfg.model, source, &sampler)?;
    io::write_collection(&out_dir, &built.collection, &norm)?;
    if let Some(truth) = &built.ground_truth {
        let preds: Predictions = built
            .collection
            .ids()
            .map(String::from)
            .zip(truth.iter().cloned())
            .collect();
        io::write_predictions(&out_dir.join("ground_truth"), &preds)?;
    }
    for w in &built.warnings {
        eprintln!("warning: {w}");
    }
    let counts = built.collection.counts();
    if counts.iter().all(|&n| n <= 1) {
        eprintln!("warning: every feasible set has at most one member; the kernel size is zero");
    }
    print_counts(&built.collection);
    println!("wrote {}", out_dir.display());
    Ok(Outcome::Ok)
}

fn print_counts(c: &FeasibleSetCollection) {
    let counts = c.counts();
    let min = counts.iter().min().copied().unwrap_or(0);
    let max = counts.iter().max().copied().unwrap_or(0);
    let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
    println!("K: {}", c.len());
    println!("N(k): min {min}, max {max}, mean {mean:.2}");
}

pub fn kersize(dir: &Path, args: &NormArgs, out: Option<PathBuf>) -> Result<Outcome> {
    let (c, base) = read_collection(dir)?;
    let norm = resolve_norm(&base, args)?;
    let r = compute_kersize(&c, &norm)?;
    let out = out.unwrap_or_else(|| dir.to_path_buf());
    ensure_dir(&out)?;

    let header: Vec<String> = ["id", "n_k", "half_kersize_single"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<(String, Vec<Option<f64>>)> = c
        .entries()
        .iter()
        .zip(&r.contributions)
        .map(|(e, &v)| {
            (
                e.id.clone(),
                vec![Some(e.members.len() as f64), Some(0.5 * single_kersize(v, norm.p()))],
            )
        })
        .collect();
    io::write_table(&out.join("per_measurement.csv"), &header, &rows)?;

    let mut fields = Map::new();
    fields.insert("norm".into(), to_value(&norm));
    fields.insert("k".into(), to_value(&c.len()));
    fields.insert("m".into(), to_value(&c.total_members()));
    fields.insert("uniform".into(), to_value(&c.is_uniform()));
    fields.insert("kersize".into(), to_value(&r.kersize));
    fields.insert("half_kersize".into(), to_value(&r.half()));
    merge_json(&out.join("bounds.json"), fields)?;

    if !c.is_uniform() {
        eprintln!("warning: feasible sets differ in size; the upper bound is not certified");
    }
    print_value("kersize", r.kersize);
    print_value("half_kersize", r.half());
    Ok(Outcome::Ok)
}

fn dir_name(dir: &Path) -> Result<String> {
    dir.file_name()
        .and_then(|n| n.to_str())
        .map(String::from)
        .ok_or_else(|| Error::Usage(format!("cannot derive a map name from {}", dir.display())))
}

pub fn loss(dir: &Path, pred_dir: &Path, name: Option<String>, args: &NormArgs, out: Option<PathBuf>) -> Result<Outcome> {
    let (c, base) = read_collection(dir)?;
    let norm = resolve_norm(&base, args)?;
    let name = match name {
        Some(n) => n,
        None => dir_name(pred_dir)?,
    };
    let dataset = dataset_from_collection(&c);
    let nonempty: Vec<&str> = c.entries().iter().filter(|e| !e.members.is_empty()).map(|e| e.id.as_str()).collect();
    let preds = read_predictions(pred_dir, nonempty)?;
    let l = compute_loss(&dataset, &preds, &norm)?;
    let out = out.unwrap_or_else(|| dir.to_path_buf());
    ensure_dir(&out)?;
    let path = out.join("bounds.json");
    let mut losses = match path.exists().then(|| read_json::<Value>(&path)).transpose()? {
        Some(Value::Object(mut m)) => match m.remove("losses") {
            Some(Value::Object(l)) => l,
            _ => Map::new(),
        },
        _ => Map::new(),
    };
    losses.insert(name.clone(), to_value(&l));
    let mut fields = Map::new();
    fields.insert("losses".into(), Value::Object(losses));
    merge_json(&path, fields)?;
    print_value(&format!("loss[{name}]"), l);
    Ok(Outcome::Ok)
}

pub fn validate(
    dir: &Path,
    pred_dirs: &[PathBuf],
    strict: bool,
    args: &NormArgs,
    out: Option<PathBuf>,
) -> Result<Outcome> {
    let (c, base) = read_collection(dir)?;
    let norm = resolve_norm(&base, args)?;
    let mut maps: BTreeMap<String, Predictions> = BuiltinMap::ALL
        .iter()
        .map(|&m| (m.name().to_string(), builtin_predictions(&c, m)))
        .collect();
    let nonempty: Vec<&str> = c.entries().iter().filter(|e| !e.members.is_empty()).map(|e| e.id.as_str()).collect();
    for pd in pred_dirs {
        let name = dir_name(pd)?;
        if name == THETA || maps.contains_key(&name) {
            return Err(Error::Usage(format!("prediction directory name `{name}` clashes with another map")));
        }
        maps.insert(name, read_predictions(pd, nonempty.iter().copied())?);
    }
    let report = verify_bounds(&c, &maps, &norm)?;
    let out = out.unwrap_or_else(|| dir.to_path_buf());
    ensure_dir(&out)?;
    let (header, rows) = demo::scatter_rows(&report);
    io::write_table(&out.join("scatter.csv"), &header, &rows)?;
    let fields = match to_value(&report) {
        Value::Object(m) => m,
        _ => unreachable!("reports serialize to objects"),
    };
    merge_json(&out.join("bounds.json"), fields)?;

    let a = &report.aggregate;
    print_value("kersize", a.kersize);
    print_value("half_kersize", a.half_kersize);
    for (name, l) in &a.losses {
        let ok = a.inequality_flags.lower_ok_by_map[name];
        println!("loss[{name}]: {l:.8} lower_ok={ok}");
    }
    match a.inequality_flags.theta_upper_ok {
        Some(ok) => println!("theta_upper_ok: {ok}"),
        None => println!("theta_upper_ok: not certified (feasible sets differ in size)"),
    }
    let bad = report.per_measurement.iter().filter(|m| !m.lower_ok).count();
    println!("per-measurement lower_ok failures: {bad}");
    if report.has_violation() {
        eprintln!("warning: bound violation detected");
        if strict {
            return Ok(Outcome::Violation);
        }
    }
    Ok(Outcome::Ok)
}

pub fn skersize(
    dir: &Path,
    config: Option<PathBuf>,
    matrix: Option<PathBuf>,
    eps: f64,
    mode: Mode,
    args: &NormArgs,
    out: Option<PathBuf>,
) -> Result<Outcome> {
    let (c, base) = read_collection(dir)?;
    let (op, noise, bounds): (LinearOperator, NoiseSpec, Option<Vec<[f64; 2]>>) = match (config, matrix) {
        (Some(cfg), None) => {
            let model = load_model(&cfg)?;
            if model.noise().kind() != NoiseKind::Additive {
                return Err(Error::Unsupported("the symmetric kernel size needs additive noise".into()));
            }
            let op = model
                .linear_operator()
                .ok_or_else(|| Error::Unsupported("the symmetric kernel size needs a linear forward model".into()))?;
            (op, model.noise().clone(), Some(model.signal_bounds().to_vec()))
        }
        (None, Some(m)) => (LinearOperator::dense(io::read_matrix(&m)?), NoiseSpec::additive(eps)?, None),
        _ => return Err(Error::Usage("pass exactly one of --config and --matrix".into())),
    };
    if op.d1() != c.d1() || op.d2() != c.d2() {
        return Err(Error::Data(format!(
            "model maps {} -> {} but the dataset has d1 = {}, d2 = {}",
            op.d1(),
            op.d2(),
            c.d1(),
            c.d2()
        )));
    }
    let norm = resolve_norm(&base, args)?;
    let mode = match mode {
        Mode::Signal => ProjectionMode::SignalOnly,
        Mode::Joint => ProjectionMode::Joint,
    };
    let dataset = dataset_from_collection(&c);
    let proj = kernel_projection(&op, mode, None);
    let result = skersize_with(&dataset, &op, &noise, &proj, &norm)?;

    let out = out.unwrap_or_else(|| dir.join("skersize"));
    ensure_dir(&out)?;
    let ids: Vec<&str> = dataset.pairs().iter().map(|p| dataset.id_of(p)).collect();
    io::write_v_norms(&out.join("v_norms.csv"), &ids, &result.v_norms)?;
    io::write_collection(&out.join("symmetrized"), &result.symmetrized.to_collection()?, &norm)?;
    let violations = result.noise_violations.iter().filter(|&&v| v).count();
    let out_of_box = bounds.as_deref().map(|b| result.out_of_box(b));
    let mut fields = Map::new();
    fields.insert("mode".into(), to_value(&mode));
    fields.insert("norm".into(), to_value(&norm));
    fields.insert("pairs".into(), to_value(&dataset.len()));
    fields.insert("skersize".into(), to_value(&result.skersize));
    fields.insert("upper_bound".into(), to_value(&(2.0 * result.skersize)));
    fields.insert("svd_tol".into(), to_value(&proj.svd_tol));
    fields.insert("noise_violations".into(), to_value(&violations));
    fields.insert("out_of_box".into(), to_value(&out_of_box));
    merge_json(&out.join("skersize.json"), fields)?;

    print_value("skersize", result.skersize);
    print_value("upper_bound", 2.0 * result.skersize);
    if violations > 0 {
        eprintln!("warning: {violations} reflected pairs have noise outside the noise set");
    }
    if let Some(n) = out_of_box.filter(|&n| n > 0) {
        eprintln!("warning: {n} reflected signals leave the signal box");
    }
    Ok(Outcome::Ok)
}

pub fn demo(name: &str, out: Option<PathBuf>, seed: Option<u64>, k: Option<usize>, n_max: Option<usize>) -> Result<Outcome> {
    let out = out.unwrap_or_else(|| PathBuf::from(format!("demo-{name}")));
    match name {
        "microscopy" => {
            let mut cfg = MicroscopyDemo::default();
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.k = k.unwrap_or(cfg.k);
            cfg.n = n_max.unwrap_or(cfg.n);
            let results = demo::run_microscopy(&cfg)?;
            demo::write_microscopy(&out, &results)?;
            let mut halves = Vec::new();
            for (i, r) in results.iter().enumerate() {
                for w in &r.warnings {
                    eprintln!("warning: setup {}: {w}", i + 1);
                }
                let a = &r.report.aggregate;
                let losses: Vec<String> = a.losses.iter().map(|(n, l)| format!("{n}={}", fmt8(*l))).collect();
                println!(
                    "setup {}: background={} emission={} N={} half_kersize={} {} lower_ok={}",
                    i + 1,
                    r.setup.background,
                    r.setup.emission,
                    r.members,
                    fmt8(a.half_kersize),
                    losses.join(" "),
                    a.inequality_flags.lower_ok
                );
                halves.push(a.half_kersize);
            }
            let increasing = halves.windows(2).all(|w| w[0] < w[1]);
            println!("half_kersize increasing across setups: {increasing}");
            println!("wrote {}", out.display());
            Ok(Outcome::Ok)
        }
        "superres" => {
            let mut cfg = SuperresDemo::default();
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.images = k.unwrap_or(cfg.images);
            let result = demo::run_superres(&cfg)?;
            demo::write_superres(&out, &result)?;
            let r = &result.report;
            print_value("skersize", r.skersize);
            print_value("upper_bound", r.upper);
            for m in &r.maps {
                println!(
                    "{}: rmse_input={} rmse_symmetrized={} lower_ok={} within_upper={}",
                    m.name,
                    fmt8(m.input),
                    fmt8(m.symmetrized),
                    m.lower_ok,
                    m.within_upper
                );
            }
            println!("max measurement error of reflections: {}", format_f64(r.max_measurement_error));
            println!("reflections outside [0, r_max]: {}", r.out_of_box);
            println!("wrote {}", out.display());
            Ok(Outcome::Ok)
        }
        other => Err(Error::Usage(format!("unknown demo `{other}` (expected microscopy or superres)"))),
    }
}

fn fmt8(v: f64) -> String {
    format!("{v:.8}")
}
