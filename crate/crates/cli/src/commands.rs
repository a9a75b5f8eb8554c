use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use tvdmd_core::harness::{emit_report, ingest_csv, run_stream_observed, write_dataset_csv};
use tvdmd_core::{
    gen_ltv, run_stream, AnyModel, Dataset, Layout, LtvSpec, ModeKind, ModelKind, ReportFormat, RunSpec,
    StreamConfig, StreamReport, TruncationPolicy,
};

use crate::args::{
    resolve, DataArgs, FormatArg, GenCmd, KindArg, LayoutArg, LtvArgs, ModeArg, ModelArg, ModelArgs, SpectrumCmd,
    StreamCmd,
};
use crate::CliError;

type Result<T> = std::result::Result<T, CliError>;

fn layout(l: Option<LayoutArg>) -> Layout {
    match l {
        Some(LayoutArg::RowsAreChannels) => Layout::RowsAreChannels,
        _ => Layout::RowsAreSamples,
    }
}

fn format(f: Option<FormatArg>) -> ReportFormat {
    match f {
        Some(FormatArg::Json) => ReportFormat::Json,
        _ => ReportFormat::Csv,
    }
}

fn out_path(out: Option<PathBuf>) -> Result<PathBuf> {
    out.ok_or_else(|| CliError::Usage("--out is required".into()))
}

fn ltv_spec(a: &LtvArgs) -> LtvSpec {
    let d = LtvSpec::default();
    LtvSpec {
        n: a.n.unwrap_or(d.n),
        l: a.l.unwrap_or(d.l),
        m: a.m.unwrap_or(d.m),
        epsilon: a.epsilon.unwrap_or(d.epsilon),
        omega: a.omega.unwrap_or(d.omega),
        seed: a.seed.unwrap_or(d.seed),
        stability_margin: a.margin.unwrap_or(d.stability_margin),
    }
}

/// Dataset plus the generator seed when synthesized.
fn load_data(d: &DataArgs) -> Result<(Dataset, Option<u64>)> {
    let Some(path) = &d.data else {
        let spec = ltv_spec(&d.ltv);
        return Ok((gen_ltv(&spec)?.0, Some(spec.seed)));
    };
    let g = &d.ltv;
    if g.n.or(g.l).or(g.m).is_some() || g.epsilon.or(g.omega).or(g.margin).is_some() || g.seed.is_some() {
        return Err(CliError::Usage("generator flags cannot be combined with --data".into()));
    }
    let data = ingest_csv(path, layout(d.layout))?;
    let data = match d.input_channels.unwrap_or(0) {
        0 => data,
        l => data.split_inputs(l)?,
    };
    Ok((data, None))
}

fn truncation(abs: Option<f64>, rel: Option<f64>, rank: Option<usize>, what: &str) -> Result<TruncationPolicy> {
    match (abs, rel, rank) {
        (None, None, None) => Ok(TruncationPolicy::None),
        (Some(t), None, None) => Ok(TruncationPolicy::Absolute(t)),
        (None, Some(t), None) => Ok(TruncationPolicy::Relative(t)),
        (None, None, Some(r)) => Ok(TruncationPolicy::FixedRank(r)),
        _ => Err(CliError::Usage(format!("give at most one {what} truncation flag"))),
    }
}

fn model_kind(m: ModelArg) -> ModelKind {
    match m {
        ModelArg::Dmd => ModelKind::Dmd,
        ModelArg::Dmdc => ModelKind::Dmdc,
        ModelArg::Online => ModelKind::Online,
        ModelArg::Onlinec => ModelKind::Onlinec,
    }
}

fn run_spec(a: &ModelArgs, model: ModelArg, mode: ModeArg, record_timing: bool) -> Result<RunSpec> {
    let window = a.window.unwrap_or(40);
    let config = match mode {
        ModeArg::Weighted => StreamConfig::weighted(a.rho.unwrap_or(0.9)),
        ModeArg::Windowed => StreamConfig::windowed(window),
    }
    .with_truncation(truncation(a.sigma_thr, a.rel_thr, a.rank, "operator")?)
    .with_dt(a.dt.unwrap_or(1.0))
    .with_full(!a.reduced_only);
    config.validate()?;
    let state_truncation = truncation(a.state_sigma_thr, None, a.state_rank, "state")?;
    state_truncation.validate()?;
    Ok(RunSpec {
        model: model_kind(model),
        config,
        state_truncation,
        init_window: a.init_window.unwrap_or(window),
        horizon: a.horizon.unwrap_or(10),
        alpha: a.alpha,
        exact_seed: a.exact_seed,
        nrmse_channel: a.nrmse_channel,
        record_timing,
    })
}

fn or_default<T: Copy>(v: &[T], d: T) -> Vec<T> {
    if v.is_empty() {
        vec![d]
    } else {
        v.to_vec()
    }
}

fn single_spec(a: &ModelArgs, record_timing: bool) -> Result<RunSpec> {
    if a.model.len() > 1 || a.mode.len() > 1 {
        return Err(CliError::Usage("a single --model and --mode are expected; use compare for several".into()));
    }
    let model = a.model.first().copied().unwrap_or(ModelArg::Dmd);
    let mode = a.mode.first().copied().unwrap_or(ModeArg::Weighted);
    run_spec(a, model, mode, record_timing)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Data(format!("{}: {e}", path.display()))
}

pub fn gen(cmd: GenCmd) -> Result<()> {
    let config = cmd.config.clone();
    let cmd = resolve(cmd, config.as_deref())?;
    let out = out_path(cmd.out)?;
    let spec = ltv_spec(&cmd.ltv);
    let (data, _) = gen_ltv(&spec)?;
    write_dataset_csv(&out, &data, layout(cmd.layout))?;
    eprintln!("tvdmd: {} snapshots of {} states and {} inputs -> {}", data.len(), data.n(), data.l(), out.display());
    Ok(())
}

pub fn stream(cmd: StreamCmd) -> Result<()> {
    let config = cmd.config.clone();
    let cmd = resolve(cmd, config.as_deref())?;
    let out = out_path(cmd.out)?;
    let spec = single_spec(&cmd.model, cmd.record_timing)?;
    let (data, seed) = load_data(&cmd.data)?;
    let mut report = run_stream(&spec, &data)?;
    report.meta.seed = seed;
    emit_report(&report, format(cmd.format), &out)?;
    let rebuilds = report.records.iter().filter(|r| r.rebuild).count();
    eprintln!("tvdmd: {} steps, {rebuilds} rebuilds -> {}", report.records.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct Cell {
    label: String,
    report: StreamReport,
}

pub fn compare(cmd: StreamCmd) -> Result<()> {
    let config = cmd.config.clone();
    let cmd = resolve(cmd, config.as_deref())?;
    let out = out_path(cmd.out)?;
    let mut specs = Vec::new();
    for model in or_default(&cmd.model.model, ModelArg::Dmd) {
        for mode in or_default(&cmd.model.mode, ModeArg::Weighted) {
            let label = format!("{}_{}", model_kind(model), mode_name(mode));
            specs.push((label, run_spec(&cmd.model, model, mode, cmd.record_timing)?));
        }
    }
    let (data, seed) = load_data(&cmd.data)?;
    let cells = specs
        .into_par_iter()
        .map(|(label, spec)| {
            let mut report = run_stream(&spec, &data)?;
            report.meta.seed = seed;
            Ok(Cell { label, report })
        })
        .collect::<Result<Vec<Cell>>>()?;

    let file = File::create(&out).map_err(io_err(&out))?;
    match format(cmd.format) {
        ReportFormat::Json => {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &cells).map_err(|e| CliError::Data(e.to_string()))?;
            writeln!(w).and_then(|()| w.flush()).map_err(io_err(&out))?;
        }
        ReportFormat::Csv => {
            let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", out.display()));
            let mut w = csv::Writer::from_writer(file);
            let mut head = vec!["k".to_string()];
            for c in &cells {
                for f in ["rank", "nrmse", "frob_error"] {
                    head.push(format!("{}_{f}", c.label));
                }
            }
            w.write_record(&head).map_err(csv_err)?;
            for (i, r0) in cells[0].report.records.iter().enumerate() {
                let mut row = vec![r0.k.to_string()];
                for c in &cells {
                    let r = &c.report.records[i];
                    row.push(r.rank.to_string());
                    row.push(r.nrmse.map(|v| v.to_string()).unwrap_or_default());
                    row.push(r.frob_error.to_string());
                }
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush().map_err(io_err(&out))?;
        }
    }
    eprintln!("tvdmd: {} runs -> {}", cells.len(), out.display());
    Ok(())
}

fn mode_name(m: ModeArg) -> &'static str {
    match m {
        ModeArg::Weighted => "weighted",
        ModeArg::Windowed => "windowed",
    }
}

/// JSON cannot carry infinities; they become `null`.
fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

#[derive(Serialize)]
struct SpectrumDump {
    k: usize,
    kind: &'static str,
    eigenvalues: Vec<[f64; 2]>,
    continuous: Vec<[Option<f64>; 2]>,
    /// One entry per eigenvalue, each a list of `[re, im]` components.
    modes: Vec<Vec<[f64; 2]>>,
}

pub fn spectrum(cmd: SpectrumCmd) -> Result<()> {
    let config = cmd.config.clone();
    let cmd = resolve(cmd, config.as_deref())?;
    let out = out_path(cmd.out)?;
    let spec = single_spec(&cmd.model, false)?;
    let (data, _) = load_data(&cmd.data)?;
    let kind = match cmd.kind {
        Some(KindArg::Projected) => ModeKind::Projected,
        _ => ModeKind::Exact,
    };
    let mut at: Option<(usize, AnyModel)> = None;
    run_stream_observed(&spec, &data, |k, model| {
        if cmd.step.is_none_or(|s| s == k) {
            at = Some((k, model.clone()));
        }
        cmd.step.is_none_or(|s| k < s)
    })?;
    let Some((k, model)) = at.filter(|(k, _)| cmd.step.is_none_or(|s| s == *k)) else {
        return Err(CliError::Usage(format!(
            "step {} is outside the streamed range starting at {}",
            cmd.step.unwrap_or_default(),
            spec.init_window - 1
        )));
    };
    let s = model.spectrum(kind, spec.config.dt)?;
    let dump = SpectrumDump {
        k,
        kind: if kind == ModeKind::Exact { "exact" } else { "projected" },
        eigenvalues: s.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
        continuous: s.cont_eigenvalues.iter().map(|z| [finite(z.re), finite(z.im)]).collect(),
        modes: s.modes.column_iter().map(|c| c.iter().map(|z| [z.re, z.im]).collect()).collect(),
    };
    let file = File::create(&out).map_err(io_err(&out))?;
    match format(cmd.format) {
        ReportFormat::Json => {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, &dump).map_err(|e| CliError::Data(e.to_string()))?;
            writeln!(w).and_then(|()| w.flush()).map_err(io_err(&out))?;
        }
        ReportFormat::Csv => {
            let csv_err = |e: csv::Error| CliError::Data(format!("{}: {e}", out.display()));
            let mut w = csv::Writer::from_writer(file);
            let dim = s.modes.nrows();
            let mut head: Vec<String> = ["index", "re", "im", "modulus", "cont_re", "cont_im"].map(String::from).to_vec();
            for i in 1..=dim {
                head.push(format!("phi{i}_re"));
                head.push(format!("phi{i}_im"));
            }
            w.write_record(&head).map_err(csv_err)?;
            for (i, (z, c)) in s.eigenvalues.iter().zip(&s.cont_eigenvalues).enumerate() {
                let mut row = vec![
                    (i + 1).to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                    z.norm().to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                ];
                for phi in s.modes.column(i).iter() {
                    row.push(phi.re.to_string());
                    row.push(phi.im.to_string());
                }
                w.write_record(&row).map_err(csv_err)?;
            }
            w.flush().map_err(io_err(&out))?;
        }
    }
    eprintln!("tvdmd: {} eigenvalues at step {k} -> {}", s.eigenvalues.len(), out.display());
    Ok(())
}
