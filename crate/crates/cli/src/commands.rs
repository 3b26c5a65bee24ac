//! One function per subcommand. Each reads its inputs from the output
//! layout, writes its artifacts and a manifest, and returns the manifest.

use std::path::Path;

use liw::attack::{batch_generate, write_result_log};
use liw::eval::{
    emit_report, emit_sweep, evaluate, hardware_loop_eval, practical_eval, sweep, EvalReport, PsrStats,
};
use liw::model::{train, Checkpoint, Classifier};
use liw::waveform::Dataset;
use liw::{Error, Result};

use crate::config::{Layout, RunConfig};
use crate::manifest::{list_files, Manifest};

pub struct Context {
    pub config: RunConfig,
    pub layout: Layout,
    pub jobs: usize,
}

impl Context {
    fn manifest(&self, command: &str) -> Result<Manifest> {
        Ok(Manifest::new(command, self.config.fingerprint()?))
    }

    fn finish(&self, m: Manifest) -> Result<Manifest> {
        for w in &m.warnings {
            log::warn!("{w}");
        }
        m.write(&self.layout.manifest(&m.command))?;
        Ok(m)
    }
}

fn missing(path: &Path, what: &str, producer: &str) -> Error {
    Error::Io(std::io::Error::new(
        std::io::ErrorKind::NotFound,
        format!("{what} not found at {}; run `liw {producer}` first", path.display()),
    ))
}

fn load_dataset(path: &Path, producer: &str) -> Result<Dataset> {
    if !path.exists() {
        return Err(missing(path, "dataset", producer));
    }
    Dataset::load(path)
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    if !path.exists() {
        return Err(missing(path, "checkpoint", "train"));
    }
    Checkpoint::load(path)
}

fn parent_dir(path: &Path) -> Result<()> {
    if let Some(p) = path.parent() {
        std::fs::create_dir_all(p)?;
    }
    Ok(())
}

fn save_dataset(ds: &Dataset, path: &Path, m: &mut Manifest, root: &Path) -> Result<()> {
    parent_dir(path)?;
    ds.save(path)?;
    m.output(root, path)?;
    m.output(root, &Dataset::sidecar_path(path))
}

fn input_dataset(m: &mut Manifest, root: &Path, path: &Path) -> Result<()> {
    m.input(root, path)?;
    m.input(root, &Dataset::sidecar_path(path))
}

/// Synthesizes the training and held-out test datasets.
pub fn cmd_synth(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("synth")?;
    let root = &ctx.layout.root;
    let train_ds = Dataset::synthesize(&ctx.config.train_spec())?;
    save_dataset(&train_ds, &ctx.layout.train_data(), &mut m, root)?;
    let test_ds = Dataset::synthesize(&ctx.config.test_spec())?;
    save_dataset(&test_ds, &ctx.layout.test_data(), &mut m, root)?;
    log::info!("synthesized {} training and {} test frames", train_ds.len(), test_ds.len());
    ctx.finish(m)
}

/// Trains the classifier on the training set.
pub fn cmd_train(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("train")?;
    let root = &ctx.layout.root;
    let path = ctx.layout.train_data();
    let ds = load_dataset(&path, "synth")?;
    input_dataset(&mut m, root, &path)?;
    let arch = ctx.config.model.arch(ds.frame_len(), ds.num_classes());
    let model = Classifier::new(arch, ctx.config.init_seed())?;
    let ckpt = train(model, &ds, &ctx.config.train_config())?;
    let out = ctx.layout.checkpoint();
    parent_dir(&out)?;
    ckpt.save(&out)?;
    m.output(root, &out)?;
    let metrics = out.with_file_name("metrics.json");
    let mut text = serde_json::to_string_pretty(&ckpt.metrics).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(&metrics, text)?;
    m.output(root, &metrics)?;
    ctx.finish(m)
}

/// The originals the attack, channel and sweep stages start from: test
/// frames at the source SNR, optionally thinned to an evenly strided subset.
fn source_frames(ctx: &Context, test: &Dataset) -> Result<Dataset> {
    let src = test.filter_snr(ctx.config.pipeline.source_snr_db);
    if src.is_empty() {
        return Err(Error::Degenerate(format!(
            "no test frames tagged {} dB",
            ctx.config.pipeline.source_snr_db
        )));
    }
    let cap = ctx.config.pipeline.max_attack_frames;
    if cap == 0 || cap >= src.len() {
        return Ok(src);
    }
    let n = src.len();
    Ok(src.with_frames((0..cap).map(|i| src.frames[i * n / cap].clone()).collect()))
}

/// Generates the LIW dataset from the source frames.
pub fn cmd_attack(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("attack")?;
    let root = &ctx.layout.root;
    let ckpt_path = ctx.layout.checkpoint();
    let ckpt = load_checkpoint(&ckpt_path)?;
    m.input(root, &ckpt_path)?;
    let test_path = ctx.layout.test_data();
    let test = load_dataset(&test_path, "synth")?;
    input_dataset(&mut m, root, &test_path)?;

    let source = source_frames(ctx, &test)?;
    let (liw, records, warnings) = batch_generate(&ckpt, &source, &ctx.config.attack, ctx.jobs)?;
    m.warnings.extend(warnings);
    save_dataset(&source, &ctx.layout.source_data(), &mut m, root)?;
    save_dataset(&liw, &ctx.layout.liw_data(), &mut m, root)?;
    let log_path = ctx.layout.attack_log();
    write_result_log(&log_path, &records)?;
    m.output(root, &log_path)?;
    let fooled = records.iter().filter(|r| r.success).count();
    log::info!("attack succeeded on {fooled} of {} frames", records.len());
    ctx.finish(m)
}

fn emit(report: &EvalReport, dir: &Path, m: &mut Manifest, root: &Path) -> Result<()> {
    emit_report(report, dir)?;
    m.warnings.extend(report.warnings.iter().cloned());
    log::info!(
        "{}: accuracy {:.4} over {} frames",
        dir.file_name().unwrap_or_default().to_string_lossy(),
        report.overall_accuracy,
        report.total
    );
    m.output_dir(root, dir)
}

fn with_psr(mut r: EvalReport, source: &Dataset, liw: &Dataset) -> Result<EvalReport> {
    r.psr_stats = PsrStats::between(&source.frames, &liw.frames)?;
    Ok(r)
}

/// Ideal accuracy on the test set and, when attack artifacts exist, ideal
/// and channel accuracy of the LIW and of the originals they came from.
pub fn cmd_eval(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("eval")?;
    let root = &ctx.layout.root;
    let ckpt_path = ctx.layout.checkpoint();
    let ckpt = load_checkpoint(&ckpt_path)?;
    m.input(root, &ckpt_path)?;
    let test_path = ctx.layout.test_data();
    let test = load_dataset(&test_path, "synth")?;
    input_dataset(&mut m, root, &test_path)?;
    m.warnings.extend(ckpt.check_dataset(&test)?);
    let model = &ckpt.model;

    emit(&evaluate(model, &test)?, &ctx.layout.eval_dir("clean"), &mut m, root)?;

    let (src_path, liw_path) = (ctx.layout.source_data(), ctx.layout.liw_data());
    if !liw_path.exists() {
        m.warnings.push("no LIW dataset; run `liw attack` to evaluate LIW".into());
        return ctx.finish(m);
    }
    let source = load_dataset(&src_path, "attack")?;
    let liw = load_dataset(&liw_path, "attack")?;
    input_dataset(&mut m, root, &src_path)?;
    input_dataset(&mut m, root, &liw_path)?;
    let ch = ctx.config.channel_config();
    emit(&with_psr(evaluate(model, &liw)?, &source, &liw)?, &ctx.layout.eval_dir("liw"), &mut m, root)?;
    emit(&practical_eval(model, &source, &ch)?, &ctx.layout.eval_dir("practical_clean"), &mut m, root)?;
    let r = with_psr(practical_eval(model, &liw, &ch)?, &source, &liw)?;
    emit(&r, &ctx.layout.eval_dir("practical_liw"), &mut m, root)?;
    ctx.finish(m)
}

/// Channel-SNR x PSR surface.
pub fn cmd_sweep(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("sweep")?;
    let root = &ctx.layout.root;
    let spec = ctx.config.sweep_spec();
    let ckpt_path = spec.checkpoint.clone().unwrap_or_else(|| ctx.layout.checkpoint());
    let ckpt = load_checkpoint(&ckpt_path)?;
    m.input(root, &ckpt_path)?;
    let source = match &spec.dataset {
        Some(p) => {
            let ds = load_dataset(p, "synth")?;
            input_dataset(&mut m, root, p)?;
            ds
        }
        None => {
            let p = ctx.layout.test_data();
            let ds = load_dataset(&p, "synth")?;
            input_dataset(&mut m, root, &p)?;
            source_frames(ctx, &ds)?
        }
    };
    m.warnings.extend(ckpt.check_dataset(&source)?);
    let table = sweep(&ckpt.model, &source, &spec)?;
    m.warnings.extend(table.warnings.iter().cloned());
    let dir = ctx.layout.sweep_dir();
    emit_sweep(&table, &dir)?;
    let mut text = serde_json::to_string_pretty(&table).map_err(|e| Error::Config(e.to_string()))?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)?;
    m.output_dir(root, &dir)?;
    ctx.finish(m)
}

/// Splice, transmit, split and evaluate, for the LIW and their originals.
pub fn cmd_hwloop(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("hwloop")?;
    let root = &ctx.layout.root;
    let ckpt_path = ctx.layout.checkpoint();
    let ckpt = load_checkpoint(&ckpt_path)?;
    m.input(root, &ckpt_path)?;
    let (src_path, liw_path) = (ctx.layout.source_data(), ctx.layout.liw_data());
    let source = load_dataset(&src_path, "attack")?;
    let liw = load_dataset(&liw_path, "attack")?;
    input_dataset(&mut m, root, &src_path)?;
    input_dataset(&mut m, root, &liw_path)?;
    let ch = ctx.config.channel_config();
    emit(&hardware_loop_eval(&ckpt.model, &source, &ch)?, &ctx.layout.hwloop_dir("clean"), &mut m, root)?;
    let r = with_psr(hardware_loop_eval(&ckpt.model, &liw, &ch)?, &source, &liw)?;
    emit(&r, &ctx.layout.hwloop_dir("liw"), &mut m, root)?;
    ctx.finish(m)
}

fn fmt_acc(v: &serde_json::Value) -> String {
    v.as_f64().map_or("-".into(), |a| format!("{a:.4}"))
}

/// Collects every evaluation summary under the output root into one
/// markdown file.
pub fn cmd_report(ctx: &Context) -> Result<Manifest> {
    let mut m = ctx.manifest("report")?;
    let root = &ctx.layout.root;
    let mut summaries = Vec::new();
    for base in ["eval", "hwloop"] {
        let dir = root.join(base);
        if dir.is_dir() {
            summaries.extend(
                list_files(&dir)?
                    .into_iter()
                    .filter(|p| p.file_name().is_some_and(|n| n == "summary.json")),
            );
        }
    }
    let sweep_csv = ctx.layout.sweep_dir().join("sweep.csv");
    if summaries.is_empty() && !sweep_csv.exists() {
        return Err(missing(&root.join("eval"), "evaluation output", "eval"));
    }

    let mut out = String::from("# LIW run report\n\n");
    out.push_str(&format!("config sha256: `{}`\n\n", ctx.config.fingerprint()?));
    out.push_str("| artifact | mode | accuracy | frames | mean PSR (dB) |\n|---|---|---|---|---|\n");
    let mut curves = String::new();
    for path in &summaries {
        m.input(root, path)?;
        let v: serde_json::Value = serde_json::from_slice(&std::fs::read(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let name = path
            .parent()
            .and_then(|p| p.strip_prefix(root).ok())
            .map_or_else(String::new, |p| p.to_string_lossy().replace('\\', "/"));
        let psr = v["psr_stats"]["mean"].as_f64().map_or("-".into(), |p| format!("{p:.2}"));
        out.push_str(&format!(
            "| {name} | {} | {} | {} | {psr} |\n",
            v["mode"].as_str().unwrap_or("-"),
            fmt_acc(&v["overall_accuracy"]),
            v["total"],
        ));
        if let Some(bins) = v["per_snr"].as_array().filter(|b| b.len() > 1) {
            curves.push_str(&format!("\n## {name}: accuracy by SNR\n\n| SNR (dB) | accuracy | frames |\n|---|---|---|\n"));
            for b in bins {
                curves.push_str(&format!("| {} | {} | {} |\n", b["snr_db"], fmt_acc(&b["accuracy"]), b["n"]));
            }
        }
    }
    out.push_str(&curves);
    if sweep_csv.exists() {
        m.input(root, &sweep_csv)?;
        out.push_str("\n## Sweep\n\n| channel SNR (dB) | PSR (dB) | accuracy | frames | flagged |\n|---|---|---|---|---|\n");
        let text = std::fs::read_to_string(&sweep_csv)?;
        for line in text.lines().skip(1) {
            out.push_str(&format!("| {} |\n", line.replace(',', " | ")));
        }
    }
    let path = ctx.layout.report();
    std::fs::write(&path, out)?;
    m.output(root, &path)?;
    ctx.finish(m)
}
