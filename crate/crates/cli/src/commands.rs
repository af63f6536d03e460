use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use tvsvm::cpd::{check_kernel, CpdReport, Verdict};
use tvsvm::data::{
    featurize as featurize_videos, load_csv, load_skeletons, make_two_moons, make_xor_gaussians, save_csv,
    Dataset, NormalizeMode, Normalizer,
};
use tvsvm::gradcheck::{run_gradcheck, GradcheckConfig};
use tvsvm::kernel::parse_kernel_list;
use tvsvm::svm::ModelFile;
use tvsvm::train::InitMethod;
use tvsvm::{KernelFamily, KernelSpec, Matrix};

use crate::config::{resolve_seed, sha256_file, ConfigFile, DataSection, Manifest};
use crate::error::{CliError, Result};
use crate::metrics::Confusion;
use crate::{EvalArgs, FeaturizeArgs, Generator, GradcheckArgs, KernelcheckArgs, ReportFormat, SynthArgs, TrainArgs};

// Like `println!`, but a closed stdout (e.g. `| head`) is not an error.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

fn kernels_or_all(arg: &Option<String>) -> Result<Vec<KernelSpec>> {
    match arg {
        Some(s) => {
            let k = parse_kernel_list(s).map_err(usage)?;
            if k.is_empty() {
                return Err(CliError::Usage("empty kernel list".into()));
            }
            Ok(k)
        }
        None => Ok(KernelFamily::ALL.map(KernelSpec::default_for).to_vec()),
    }
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| CliError::Usage(format!("bad {what} entry `{t}`"))))
        .collect()
}

/// `"8,1"` → `[8, 1]`; `"none"` or `""` → no combining layer.
pub fn parse_mkl_layers(s: &str) -> Result<Vec<usize>> {
    match s.trim() {
        "" | "none" => Ok(Vec::new()),
        other => parse_usize_list(other, "--mkl-layers"),
    }
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    load_csv(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn check_digest(path: &Path, expected: Option<&str>) -> Result<String> {
    let digest = sha256_file(path)?;
    if let Some(expected) = expected {
        if expected != digest {
            return Err(CliError::Data(format!(
                "{} does not match the sha256 recorded in the config",
                path.display()
            )));
        }
    }
    Ok(digest)
}

pub fn train(a: TrainArgs) -> Result<()> {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    let mut cfg = file.train.clone();
    cfg.seed = resolve_seed(a.seed, file.has_seed.then_some(file.train.seed), 0)?;
    if a.freeze_svs {
        cfg.freeze_svs = true;
    }
    if let Some(k) = &a.kernels {
        cfg.kernels = parse_kernel_list(k).map_err(usage)?;
    }
    if let Some(m) = &a.mkl_layers {
        cfg.mkl_layers = parse_mkl_layers(m)?;
    }
    if let Some(v) = a.n_svs {
        cfg.n_svs = v;
    }
    if let Some(v) = a.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = a.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = a.c {
        cfg.c = v;
    }
    if let Some(v) = a.lr0 {
        cfg.lr0 = v;
    }
    if let Some(v) = &a.init {
        cfg.init = v.parse::<InitMethod>().map_err(usage)?;
    }
    if let Some(v) = a.activation {
        cfg.activation = v.into();
    }
    cfg.validate()?;
    let normalize = match &a.normalize {
        Some(s) => s.parse::<NormalizeMode>().map_err(usage)?,
        None => file.data.normalize.unwrap_or_default(),
    };

    // A recorded digest is only binding when the path also comes from the config.
    let (data_path, expected) = match (a.data, &file.data.path) {
        (Some(p), _) => (p, None),
        (None, Some(p)) => (p.clone(), file.data.sha256.as_deref()),
        (None, None) => return Err(CliError::Usage("no training data: pass --data or set data.path".into())),
    };
    let digest = check_digest(&data_path, expected)?;
    let (val_path, val_expected) = match (a.val, &file.data.val) {
        (Some(p), _) => (Some(p), None),
        (None, Some(p)) => (Some(p.clone()), file.data.val_sha256.as_deref()),
        (None, None) => (None, None),
    };
    let val_digest = val_path.as_deref().map(|p| check_digest(p, val_expected)).transpose()?;

    let raw_train = read_dataset(&data_path)?;
    let normalizer = Normalizer::fit(&raw_train.x, normalize)?;
    let train_set = normalizer.apply_dataset(&raw_train)?;
    let val_set = match &val_path {
        Some(p) => {
            let v = read_dataset(p)?;
            if v.dim() != train_set.dim() {
                return Err(CliError::Data(format!(
                    "validation data has {} features, training data {}",
                    v.dim(),
                    train_set.dim()
                )));
            }
            Some(normalizer.apply_dataset(&v)?)
        }
        None => None,
    };

    let report = tvsvm::train(&train_set, val_set.as_ref(), &cfg)?;
    if a.verbose {
        for e in &report.epochs {
            let val = e.val_accuracy.map(|v| format!(" val_acc={v:.4}")).unwrap_or_default();
            say!(
                "epoch {:>5} J={:.6} reg={:.6} loss={:.6} lr={:.3e} train_acc={:.4}{val}",
                e.epoch, e.objective.total, e.objective.regularizer, e.objective.loss, e.lr, e.train_accuracy
            );
        }
    }

    fs::create_dir_all(&a.out).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
    let model_file = ModelFile {
        classifier: report.model.clone(),
        normalizer: (normalize != NormalizeMode::None).then_some(normalizer),
    };
    model_file.save(a.out.join(MODEL_FILE))?;
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    fs::write(a.out.join(REPORT_FILE), csv)?;
    let absolute = |p: &Path| fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf());
    let data = DataSection {
        path: Some(absolute(&data_path)),
        sha256: Some(digest),
        val: val_path.as_deref().map(absolute),
        val_sha256: val_digest,
        normalize: Some(normalize),
    };
    fs::write(a.out.join(MANIFEST_FILE), Manifest::new(data, cfg).to_toml()?)?;

    let last = report.epochs.last();
    say!(
        "trained {} epochs in {:.2}s; final J={} train_acc={}{}",
        report.epochs.len(),
        report.wall_clock_secs,
        last.map_or("n/a".into(), |e| format!("{:.6}", e.objective.total)),
        last.map_or("n/a".into(), |e| format!("{:.4}", e.train_accuracy)),
        last.and_then(|e| e.val_accuracy).map(|v| format!(" val_acc={v:.4}")).unwrap_or_default(),
    );
    say!("wrote {}", a.out.display());
    if report.diverged {
        return Err(CliError::Numerical(format!(
            "training diverged after {} finite epochs; partial results written",
            report.epochs.len()
        )));
    }
    Ok(())
}

pub fn eval(a: EvalArgs) -> Result<()> {
    let file = ModelFile::load(&a.model).map_err(|e| CliError::Data(format!("{}: {e}", a.model.display())))?;
    let data = read_dataset(&a.data)?;
    let x = match &file.normalizer {
        Some(n) => n.apply(&data.x)?,
        None => data.x.clone(),
    };
    let mut predicted = Vec::with_capacity(data.len());
    for row in x.iter_rows() {
        predicted.push(file.classifier.predict(row)?);
    }
    let c = Confusion::new(&data.y, &predicted);
    say!("samples {}", c.total());
    say!("accuracy {}", c.accuracy());
    say!("macro_accuracy {}", c.macro_accuracy());
    for (label, n, acc) in c.per_class() {
        say!("class {label} n={n} accuracy {acc}");
    }
    say!("confusion (rows: true, columns: predicted)");
    let _ = write!(std::io::stdout(), "{c}");
    Ok(())
}

pub fn gradcheck(a: GradcheckArgs) -> Result<()> {
    let kernels = kernels_or_all(&a.kernels)?;
    let depths = parse_usize_list(&a.mkl_layers, "--mkl-layers")?;
    if depths.is_empty() || a.trials == 0 || a.n_svs == 0 {
        return Err(CliError::Usage("need at least one depth, trial and support vector".into()));
    }
    let config = GradcheckConfig {
        kernels,
        depths,
        trials: a.trials,
        max_support: a.n_svs,
        seed: resolve_seed(a.seed, None, 0)?,
        mode: a.mode.into(),
        tolerance: a.tol,
        corrupt_gradient: a.corrupt_gradient,
        ..GradcheckConfig::default()
    };
    let report = run_gradcheck(&config).map_err(|e| CliError::Numerical(e.to_string()))?;
    for r in &report.instances {
        say!(
            "{} {} depth={} frozen={} N={} D={} n={} params={} max_rel_err={:.3e} worst={}",
            if r.passed { "PASS" } else { "FAIL" },
            r.kernel,
            r.depth,
            r.frozen,
            r.n_support,
            r.dim,
            r.n_samples,
            r.n_params,
            r.max_rel_error,
            r.worst
        );
    }
    let failed = report.failures().count();
    say!(
        "{} of {} instances passed at tolerance {:e}",
        report.instances.len() - failed,
        report.instances.len(),
        report.tolerance
    );
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{failed} gradient checks failed")))
    }
}

fn random_points(n: usize, dim: usize, seed: u64) -> Matrix {
    use rand::Rng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(n, dim, |_, _| rng.random_range(0.0..1.0))
}

#[derive(serde::Serialize)]
struct KernelRecord<'a> {
    kernel: String,
    points: usize,
    #[serde(flatten)]
    report: &'a CpdReport,
}

pub fn kernelcheck(a: KernelcheckArgs) -> Result<()> {
    let kernels = kernels_or_all(&a.kernels)?;
    if a.points < 2 || a.trials == 0 || a.dim == 0 {
        return Err(CliError::Usage("need at least 2 points, 1 trial and dimension 1".into()));
    }
    let seed = resolve_seed(a.seed, None, 0)?;
    let points = random_points(a.points, a.dim, seed);
    let mut failures = Vec::new();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for spec in &kernels {
        let report = check_kernel(spec, &points, a.trials, seed).map_err(|e| CliError::Numerical(e.to_string()))?;
        if !report.passed() {
            failures.push(spec.to_string());
        }
        match a.format {
            ReportFormat::Text => {
                let verdict = match report.verdict {
                    Verdict::PassedSampled => "PassedSampled",
                    Verdict::FailedWithWitness => "FailedWithWitness",
                };
                writeln!(
                    out,
                    "{spec}: {verdict} trials={} min_quadratic_form={:.6e} min_eig_after_berg={:.6e}",
                    report.trials, report.min_quadratic_form, report.min_eig_after_berg
                )?;
                if let Some(w) = &report.witness {
                    writeln!(out, "  witness c={:?} quadratic_form={:.6e}", w.c, w.quadratic_form)?;
                }
            }
            ReportFormat::Records => {
                let rec = KernelRecord {
                    kernel: spec.to_string(),
                    points: a.points,
                    report: &report,
                };
                writeln!(out, "{}", serde_json::to_string(&rec).map_err(usage)?)?;
            }
        }
    }
    if failures.is_empty() || a.advisory {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("not c.p.d. on the sampled points: {}", failures.join(", "))))
    }
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let seed = resolve_seed(a.seed, None, 0)?;
    let d = match a.generator {
        Generator::TwoMoons => make_two_moons(a.n, a.noise, seed),
        Generator::XorGaussians => make_xor_gaussians(a.n, a.noise, seed),
    }
    .map_err(usage)?;
    save_csv(&d, &a.out)?;
    say!("wrote {} rows to {}", d.len(), a.out.display());
    Ok(())
}

pub fn featurize(a: FeaturizeArgs) -> Result<()> {
    if a.chunks == 0 {
        return Err(CliError::Usage("--chunks must be positive".into()));
    }
    let videos = load_skeletons(&a.skeletons).map_err(|e| CliError::Data(format!("{}: {e}", a.skeletons.display())))?;
    let d = featurize_videos(&videos, a.chunks)?;
    save_csv(&d, &a.out)?;
    say!("wrote {} videos x {} features to {}", d.len(), d.dim(), a.out.display());
    Ok(())
}
