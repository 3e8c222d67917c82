use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::builtins::{builtin, BUILTIN_NAMES};
use super::config::{load_config, ConfigError, Format, RunConfig};
use super::output::{write_plot_data, write_trajectory};
use super::{
    CheckArgs, CliError, Command, DeriveArgs, FormatArg, SimulateArgs, Source, SweepArgs, EXIT_AUDIT_FAILED, EXIT_OK,
};
use crate::audit::{full_audit, AuditReport};
use crate::dynamics::{integrate, Trajectory};
use crate::expr::{EvalContext, Params};
use crate::model::{euler_identity_check, homogeneity_check, positivity_scan, ConstructionMode, StateSampler};

pub(super) fn dispatch(command: Command, out: &mut dyn Write) -> Result<u8, CliError> {
    match command {
        Command::Simulate(args) => simulate(args, out),
        Command::Check(args) => check(args, out),
        Command::DeriveR(args) => derive_r(args, out),
        Command::Sweep(args) => sweep(args, out),
        Command::List => list(out),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn emit(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(io_err(Path::new("<stdout>")))
}

fn load(source: &Source) -> Result<RunConfig, CliError> {
    let mut cfg = match (&source.config, &source.builtin) {
        (Some(path), _) => load_config(path)?,
        (None, Some(name)) => {
            let b = builtin(name, &Params::new())?;
            RunConfig {
                name: b.name.to_string(),
                system: b.system,
                initial: b.initial,
                t_end: b.t_end,
                integrator: b.integrator,
                audit: Default::default(),
                output: Default::default(),
            }
        }
        (None, None) => return Err(CliError::Usage("one of --config or --builtin is required".into())),
    };
    cfg.apply_overrides(&source.set)?;
    Ok(cfg)
}

fn apply_t_end(cfg: &mut RunConfig, t_end: Option<f64>) -> Result<(), CliError> {
    if let Some(t) = t_end {
        if !(t.is_finite() && t > cfg.initial.t) {
            return Err(ConfigError::Schema {
                path: "t_end".into(),
                message: format!("must exceed t0 = {}, got {t}", cfg.initial.t),
            }
            .into());
        }
        cfg.t_end = t;
    }
    Ok(())
}

fn format_of(arg: Option<FormatArg>, cfg: &RunConfig) -> Format {
    match arg {
        Some(FormatArg::Csv) => Format::Csv,
        Some(FormatArg::Jsonl) => Format::Jsonl,
        None => cfg.output.format,
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("run");
    path.with_file_name(format!("{stem}{suffix}"))
}

fn write_audit(path: &Path, report: &AuditReport) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(report).expect("audit report serializes");
    std::fs::write(path, text + "\n").map_err(io_err(path))
}

fn section_line(name: &str, pass: bool, error: Option<&str>) -> String {
    match error {
        Some(e) => format!("  {name:<20} ERROR  {e}\n"),
        None => format!("  {name:<20} {}\n", if pass { "pass" } else { "FAIL" }),
    }
}

fn audit_summary(report: &AuditReport) -> String {
    let mut s = String::from("audit:\n");
    s += &section_line("energy_balance", report.energy_balance.pass(), report.energy_balance.error());
    s += &section_line("euler_identity", report.euler_identity.pass(), report.euler_identity.error());
    s += &section_line("positivity", report.positivity.pass(), report.positivity.error());
    s += &section_line("stationarity", report.stationarity.pass(), report.stationarity.error());
    if let Some(c) = &report.conservative_limit {
        s += &section_line("conservative_limit", c.pass(), c.error());
    }
    s += &format!("  overall              {}\n", if report.pass { "pass" } else { "FAIL" });
    s
}

fn worker_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1);
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {jobs} workers: {e}")))
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let mut cfg = load(&args.source)?;
    apply_t_end(&mut cfg, args.t_end)?;
    let format = format_of(args.format, &cfg);
    let path = args
        .out
        .or_else(|| cfg.output.path.clone())
        .unwrap_or_else(|| PathBuf::from(format!("{}.{}", cfg.name, format.extension())));
    let pool = worker_pool(args.jobs)?;
    let traj = integrate(&cfg.system, &cfg.initial, cfg.t_end, &cfg.integrator)?;
    write_trajectory(&path, &traj, format).map_err(io_err(&path))?;
    let report = pool.install(|| full_audit(&cfg.system, &traj, &cfg.audit));
    let audit_path = with_suffix(&path, ".audit.json");
    write_audit(&audit_path, &report)?;
    let mut msg = format!(
        "wrote {} ({} samples, {} steps, {} rejected)\nwrote {}\n",
        path.display(),
        traj.len(),
        traj.meta.steps_taken,
        traj.meta.steps_rejected,
        audit_path.display()
    );
    if args.plot_data {
        let dir = with_suffix(&path, "_plot");
        let files = write_plot_data(&dir, &traj).map_err(io_err(&dir))?;
        let _ = writeln!(msg, "wrote {} series files to {}", files.len(), dir.display());
    }
    msg += &audit_summary(&report);
    emit(out, &msg)?;
    Ok(if report.pass { EXIT_OK } else { EXIT_AUDIT_FAILED })
}

/// One line of the `check` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    /// `None` for informational rows.
    pub pass: Option<bool>,
    pub detail: String,
}

fn check_rows(cfg: &RunConfig) -> Result<Vec<CheckRow>, CliError> {
    let sys = &cfg.system;
    let spec = sys.dissipation();
    let (samples, seed) = (cfg.audit.check_samples, cfg.audit.seed);
    let mut rows = Vec::new();
    for (i, term) in spec.terms().iter().enumerate() {
        let r = homogeneity_check(term, sys.dof(), sys.params(), samples, seed)?;
        rows.push(CheckRow {
            name: format!("homogeneity[{i}] n={}", term.degree),
            pass: Some(r.pass),
            detail: format!("{}: max relative violation {:e}", term.field.source(), r.max_violation),
        });
    }
    let pos = positivity_scan(spec, sys.dof(), sys.params(), samples, seed)?;
    rows.push(CheckRow {
        name: "positivity".into(),
        pass: Some(pos.pass),
        detail: format!("min D {:e}", pos.min_value),
    });
    let euler = euler_identity_check(spec, sys.dof(), sys.params(), samples, seed)?;
    rows.push(CheckRow {
        name: "euler identity".into(),
        pass: Some(euler.max_violation <= cfg.audit.euler),
        detail: format!("max |v.dR/dv - D|/(1+|D|) {:e}", euler.max_violation),
    });

    let mut sampler = StateSampler::new(sys.dof(), seed);
    let potential = spec.potential();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..samples {
        let (q, v) = sampler.state();
        let ctx = EvalContext::new(&q, &v, sys.params());
        let d = spec.eval_d(&ctx)?;
        if d > 1e-10 {
            let ratio = potential.eval(&ctx)? / d;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
        }
    }
    if lo.is_finite() {
        let terms = spec.terms();
        let (pass, expected) = match (spec.mode(), terms) {
            (ConstructionMode::ClosedForm, [t]) => {
                let n = t.degree;
                let err = (lo * n - 1.0).abs().max((hi * n - 1.0).abs());
                (Some(err <= 1e-12), format!(" (expected 1/{n} = {})", 1.0 / n))
            }
            _ => (None, String::new()),
        };
        rows.push(CheckRow { name: "R/D ratio".into(), pass, detail: format!("min {lo} max {hi}{expected}") });
    }
    Ok(rows)
}

fn check(args: CheckArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let cfg = load(&args.source)?;
    let rows = check_rows(&cfg)?;
    let mut s = format!("{:<24} {:<6} detail\n", "check", "result");
    for r in &rows {
        let verdict = match r.pass {
            Some(true) => "pass",
            Some(false) => "FAIL",
            None => "-",
        };
        let _ = writeln!(s, "{:<24} {:<6} {}", r.name, verdict, r.detail);
    }
    emit(out, &s)?;
    Ok(if rows.iter().all(|r| r.pass != Some(false)) { EXIT_OK } else { EXIT_AUDIT_FAILED })
}

/// Text report of `R`, its terms and `dR/dv` at `(q, v)`.
pub fn derive_r_report(cfg: &RunConfig, q: &[f64], v: &[f64]) -> Result<String, CliError> {
    let dof = cfg.system.dof();
    if q.len() != dof || v.len() != dof {
        return Err(CliError::Usage(format!(
            "state needs {dof} coordinates and {dof} velocities, got {} and {}",
            q.len(),
            v.len()
        )));
    }
    let spec = cfg.system.dissipation();
    let ctx = EvalContext::new(q, v, cfg.system.params());
    let at_state = |e: crate::model::ModelError| CliError::Usage(format!("at q = {q:?}, v = {v:?}: {e}"));
    let mut s = format!("state: q = {q:?}, v = {v:?}\n");
    let r = match spec.mode() {
        ConstructionMode::ClosedForm => {
            s += "mode: closed form (R = sum D_n / n)\n";
            let terms = spec.term_values(&ctx).map_err(at_state)?;
            if terms.is_empty() {
                s += "(no dissipation terms)\n";
            } else {
                let _ = writeln!(s, "{:<4} {:<28} {:>8} {:>24} {:>24}", "term", "expr", "degree", "D_n", "D_n/n");
                for (i, t) in terms.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "{:<4} {:<28} {:>8} {:>24} {:>24}",
                        i + 1,
                        t.expr,
                        t.degree,
                        format!("{:?}", t.d),
                        format!("{:?}", t.contribution)
                    );
                }
            }
            spec.eval_r_closed(&ctx).map_err(at_state)?
        }
        ConstructionMode::Quadrature => {
            s += "mode: quadrature (R = int_0^1 D(q, u v) / u du)\n";
            let outcome = spec.eval_r_quadrature(&ctx).map_err(at_state)?;
            let _ = writeln!(
                s,
                "quadrature: value {:?}, {} panels, change on refinement {:e}",
                outcome.value, outcome.panels, outcome.change
            );
            if let Some(w) = &outcome.warning {
                let _ = writeln!(s, "warning: {w}");
            }
            outcome.value
        }
    };
    let d = spec.eval_d(&ctx).map_err(at_state)?;
    let grad = spec.grad_r_v(&ctx).map_err(at_state)?;
    let _ = writeln!(s, "R = {r:?}");
    let _ = writeln!(s, "D = {d:?}");
    if d != 0.0 {
        let _ = writeln!(s, "R/D = {:?}", r / d);
    } else {
        s += "R/D = undefined (D = 0)\n";
    }
    let _ = writeln!(s, "dR/dv = {grad:?}");
    Ok(s)
}

fn derive_r(args: DeriveArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let cfg = load(&args.source)?;
    let report = derive_r_report(&cfg, &args.q, &args.v)?;
    emit(out, &report)?;
    Ok(EXIT_OK)
}

/// `<stem>_<param>_<index>`.
pub fn sweep_file_stem(stem: &str, param: &str, index: usize) -> String {
    format!("{stem}_{param}_{index}")
}

struct RunOutcome {
    traj: Option<Trajectory>,
    report: Option<AuditReport>,
    error: Option<String>,
}

fn sweep_one(cfg: &RunConfig, param: &str, value: f64, path: &Path, format: Format) -> RunOutcome {
    let run = || -> Result<(Trajectory, AuditReport), CliError> {
        let mut cfg = cfg.clone();
        cfg.apply_overrides(&[(param.to_string(), value)])?;
        let traj = integrate(&cfg.system, &cfg.initial, cfg.t_end, &cfg.integrator)?;
        write_trajectory(path, &traj, format).map_err(io_err(path))?;
        let report = full_audit(&cfg.system, &traj, &cfg.audit);
        Ok((traj, report))
    };
    match run() {
        Ok((traj, report)) => RunOutcome { traj: Some(traj), report: Some(report), error: None },
        Err(e) => RunOutcome { traj: None, report: None, error: Some(e.to_string()) },
    }
}

fn csv_quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn sweep(args: SweepArgs, out: &mut dyn Write) -> Result<u8, CliError> {
    let mut cfg = load(&args.source)?;
    apply_t_end(&mut cfg, args.t_end)?;
    if !cfg.system.params().contains_key(&args.param) {
        let known: Vec<&str> = cfg.system.params().keys().map(String::as_str).collect();
        return Err(CliError::Usage(format!("unknown parameter `{}` (known: {})", args.param, known.join(", "))));
    }
    let format = format_of(args.format, &cfg);
    let dir = args
        .out_dir
        .or_else(|| cfg.output.path.as_ref().and_then(|p| p.parent()).map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let stem = cfg
        .output
        .path
        .as_ref()
        .and_then(|p| p.file_stem())
        .and_then(|s| s.to_str())
        .map_or_else(|| cfg.name.clone(), String::from);
    let pool = worker_pool(args.jobs)?;
    let paths: Vec<PathBuf> = (0..args.values.len())
        .map(|i| dir.join(format!("{}.{}", sweep_file_stem(&stem, &args.param, i), format.extension())))
        .collect();
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        args.values
            .par_iter()
            .zip(paths.par_iter())
            .map(|(&value, path)| sweep_one(&cfg, &args.param, value, path, format))
            .collect()
    });

    let dof = cfg.system.dof();
    let mut summary = format!("index,{},status,t", args.param);
    for j in 1..=dof {
        let _ = write!(summary, ",q{j}");
    }
    for j in 1..=dof {
        let _ = write!(summary, ",v{j}");
    }
    summary += ",max_energy_defect,audit_pass,file,message\n";
    let (mut errors, mut failures) = (0, 0);
    for (i, ((value, outcome), path)) in args.values.iter().zip(&outcomes).zip(&paths).enumerate() {
        let _ = write!(summary, "{i},{value:?}");
        match (&outcome.traj, &outcome.report) {
            (Some(traj), Some(report)) => {
                let last = &traj.last().state;
                let status = if report.pass { "ok" } else { "audit_failed" };
                failures += usize::from(!report.pass);
                let _ = write!(summary, ",{status},{:?}", last.t);
                for x in last.q.iter().chain(&last.v) {
                    let _ = write!(summary, ",{x:?}");
                }
                let defect = report.energy_balance.done().map_or(f64::NAN, |e| e.max_defect);
                let _ = writeln!(summary, ",{defect:?},{},{},", report.pass, csv_quote(&path.display().to_string()));
            }
            _ => {
                errors += 1;
                let _ = write!(summary, ",error,");
                summary += &",".repeat(2 * dof);
                let _ = writeln!(summary, ",,,,{}", csv_quote(outcome.error.as_deref().unwrap_or("unknown error")));
            }
        }
    }
    let summary_path = dir.join(format!("{stem}_{}_summary.csv", args.param));
    std::fs::write(&summary_path, &summary).map_err(io_err(&summary_path))?;
    emit(
        out,
        &format!(
            "{} runs ({} audit failures, {} errors); summary in {}\n",
            args.values.len(),
            failures,
            errors,
            summary_path.display()
        ),
    )?;
    Ok(if errors > 0 {
        super::EXIT_ERROR
    } else if failures > 0 {
        EXIT_AUDIT_FAILED
    } else {
        EXIT_OK
    })
}

fn list(out: &mut dyn Write) -> Result<u8, CliError> {
    let mut s = String::new();
    for name in BUILTIN_NAMES {
        let b = builtin(name, &Params::new())?;
        let params: Vec<String> = b.system.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
        let _ = writeln!(s, "{name:<20} {}  [{}]", b.summary, params.join(", "));
    }
    emit(out, &s)?;
    Ok(EXIT_OK)
}
