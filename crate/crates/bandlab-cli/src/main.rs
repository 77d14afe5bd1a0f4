//! `bandlab`: kernels, exact checks and Monte Carlo estimators from a JSON run config.
//!
//! Exit status: 0 on success, 1 on invalid input, 2 when a computation fails
//! or a check does not pass.

use bandlab::config::{Format, RunConfig};
use bandlab::experiments::{exact_checks, Check, EstimatorReport};
use bandlab::graphcalc::{
    catalog, graph_kernel, graphs_from_json, graphs_to_json, renormalize_self_energy, scaling_order, self_energy_symbol,
    AtomicGraph, CatalogTag, EvalContext, KernelSet,
};
use bandlab::io::{write_atomic, Cell, Series, Table};
use bandlab::kernels::{b_field, sminus_kernel, splus_kernel, theta_kernel, LatticeKernel, SelfEnergyKernel};
use bandlab::profile::build_profile;
use bandlab::spectral::m_sc;
use bandlab::{Error, C64};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const OUT_ENV: &str = "BANDLAB_OUT";
const DEFAULT_OUT: &str = "bandlab-out";

#[derive(Parser, Debug)]
#[command(name = "bandlab", version, about = "Random band matrix laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Run configuration (JSON).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override `experiment.seed`.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Override `experiment.samples`.
    #[arg(long, global = true, value_name = "N")]
    samples: Option<usize>,
    /// Output directory; falls back to `output.dir`, then $BANDLAB_OUT, then `bandlab-out`.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for sample fan-out.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Cmd {
    /// Theta, S+, S- and B tables plus the Theta momentum profile.
    Kernels,
    /// Exact identities; stops at the first violation.
    Verify,
    /// The Monte Carlo estimators listed in `experiment.estimators`.
    Mc,
    /// Quantum diffusion fit.
    Diffusion,
    /// Graph catalogs, scaling orders and renormalized self-energies.
    Graphs,
    /// Summary of every report found in the output directory.
    Report,
}

enum Failure {
    Input(String),
    Compute(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_validation() {
            Failure::Input(e.to_string())
        } else {
            Failure::Compute(e.to_string())
        }
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Compute(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::Input("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Compute(format!("thread pool: {e}")))?;
    }
    if cli.cmd == Cmd::Report {
        let cfg = cli.config.as_deref().map(load).transpose()?;
        return report(&out_dir(cli, cfg.as_ref()));
    }
    let path = cli.config.as_deref().ok_or_else(|| Failure::Input("--config PATH is required".into()))?;
    let cfg = load(path)?;
    let cfg = apply_overrides(cli, cfg)?;
    let out = out_dir(cli, Some(&cfg));
    match cli.cmd {
        Cmd::Kernels => kernels(&cfg, &out.join("kernels")),
        Cmd::Verify => verify(&cfg, &out.join("verify")),
        Cmd::Mc => {
            let mut failed = Vec::new();
            for &est in &cfg.experiment.estimators {
                let r = cfg.run(est)?;
                summarize(&r);
                emit(&r, &out.join("mc"), &cfg.output.formats)?;
                failed.extend(r.checks.iter().filter(|c| !c.pass).map(|c| format!("{}/{}", r.estimator, c.name)));
            }
            checks_outcome(&failed)
        }
        Cmd::Diffusion => {
            let r = cfg.run(bandlab::config::Estimator::DiffusionFit)?;
            summarize(&r);
            emit(&r, &out.join("diffusion"), &cfg.output.formats)?;
            let failed: Vec<String> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
            checks_outcome(&failed)
        }
        Cmd::Graphs => graphs(&cfg, &out.join("graphs")),
        Cmd::Report => unreachable!(),
    }
}

fn load(path: &Path) -> std::result::Result<RunConfig, Failure> {
    Ok(RunConfig::from_path(path)?)
}

fn apply_overrides(cli: &Cli, mut cfg: RunConfig) -> std::result::Result<RunConfig, Failure> {
    if let Some(s) = cli.seed {
        cfg.experiment.seed = s;
    }
    if let Some(n) = cli.samples {
        cfg.experiment.samples = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.output.dir.clone()))
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

fn checks_outcome(failed: &[String]) -> Outcome {
    match failed.first() {
        None => Ok(()),
        Some(first) => Err(Failure::Compute(format!("{} check(s) failed, first: {first}", failed.len()))),
    }
}

fn summarize(r: &EstimatorReport) {
    let failed = r.checks.iter().filter(|c| !c.pass).count();
    println!(
        "{}: {} stats, {}/{} checks passed ({:.2}s)",
        r.estimator,
        r.stats.len(),
        r.checks.len() - failed,
        r.checks.len(),
        r.runtime_seconds
    );
}

fn write_json<T: serde::Serialize>(path: &Path, v: &T) -> Outcome {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Failure::Compute(e.to_string()))?;
    text.push('\n');
    Ok(write_atomic(path, text.as_bytes())?)
}

fn emit(r: &EstimatorReport, dir: &Path, formats: &[Format]) -> Outcome {
    for f in formats {
        match f {
            Format::Csv => {
                r.stats_table().write(&dir.join(format!("{}.stats.csv", r.estimator)))?;
                r.checks_table().write(&dir.join(format!("{}.checks.csv", r.estimator)))?;
            }
            Format::Json => write_json(&dir.join(format!("{}.json", r.estimator)), r)?,
            Format::Plotdata => {
                for s in &r.series {
                    write_atomic(&dir.join(format!("{}.{}.plot.csv", r.estimator, s.name)), &s.to_csv()?)?;
                }
            }
        }
    }
    Ok(())
}

fn z_label(z: C64) -> String {
    format!("{}{:+}i", z.re, z.im)
}

fn kernel_table(k: &LatticeKernel, cfg: &RunConfig, name: &str, z: Option<C64>) -> bandlab::Result<Table> {
    let g = &cfg.geometry;
    let mut cols: Vec<String> = (1..=g.d).map(|i| format!("x{i}")).collect();
    cols.extend(["re".into(), "im".into()]);
    let mut t = Table::new(cols).meta("kernel", name).meta("d", g.d).meta("L", g.l).meta("W", g.w);
    if let Some(z) = z {
        t = t.meta("z", z_label(z));
    }
    for row in k.value_rows() {
        let d = g.d;
        let mut cells: Vec<Cell> = row[..d].iter().map(|&v| Cell::Int(v as i64)).collect();
        cells.extend(row[d..].iter().map(|&v| Cell::Num(v)));
        t.push(cells)?;
    }
    Ok(t)
}

fn kernels(cfg: &RunConfig, dir: &Path) -> Outcome {
    let geom = cfg.geometry()?;
    let profile = build_profile(&cfg.profile, &geom)?;
    let csv = cfg.wants(Format::Csv);
    let mut summary = Table::new(["z", "kernel", "row_sum_re", "row_sum_im"]).meta("d", geom.d()).meta("L", geom.l()).meta("W", geom.w());
    if csv {
        kernel_table(&b_field(&geom), cfg, "B", None)?.write(&dir.join("B.csv"))?;
    }
    for (i, z) in cfg.points().into_iter().enumerate() {
        let pt = m_sc(z)?;
        let named = [
            ("theta", theta_kernel(&profile, &pt)?),
            ("splus", splus_kernel(&profile, &pt)?),
            ("sminus", sminus_kernel(&profile, &pt)?),
        ];
        for (name, k) in &named {
            let s = k.row_sum();
            summary.push(vec![Cell::Text(z_label(z)), Cell::Text((*name).into()), Cell::Num(s.re), Cell::Num(s.im)])?;
            if csv {
                kernel_table(k, cfg, name, Some(z))?.write(&dir.join(format!("z{i}_{name}.csv")))?;
            }
        }
        if cfg.wants(Format::Plotdata) {
            let theta = &named[0].1;
            let mut s = Series::new("theta_momentum", "p_norm", "theta_symbol");
            for row in theta.symbol_rows() {
                let d = geom.d();
                s.push(row[..d].iter().map(|p| p * p).sum::<f64>().sqrt(), row[d]);
            }
            write_atomic(&dir.join(format!("z{i}_theta_momentum.plot.csv")), &s.to_csv()?)?;
        }
    }
    if csv {
        summary.write(&dir.join("row_sums.csv"))?;
    }
    if cfg.wants(Format::Json) {
        write_json(&dir.join("row_sums.json"), &summary)?;
    }
    println!("kernels: {} point(s) written to {}", cfg.points().len(), dir.display());
    Ok(())
}

fn verify(cfg: &RunConfig, dir: &Path) -> Outcome {
    let checks = exact_checks(&cfg.mc_config()?)?;
    let mut t = Table::new(["name", "value", "threshold", "pass"]);
    for c in &checks {
        t.push(vec![
            Cell::Text(c.name.clone()),
            Cell::Num(c.value),
            Cell::Num(c.threshold),
            Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
        ])?;
    }
    if cfg.wants(Format::Csv) {
        t.write(&dir.join("checks.csv"))?;
    }
    if cfg.wants(Format::Json) {
        write_json(&dir.join("checks.json"), &checks)?;
    }
    match checks.iter().find(|c| !c.pass) {
        None => {
            println!("verify: {} checks passed", checks.len());
            Ok(())
        }
        Some(Check { name, value, threshold, .. }) => {
            Err(Failure::Compute(format!("verify failed at {name}: {value:e} > {threshold:e}")))
        }
    }
}

fn tag_name(tag: CatalogTag) -> &'static str {
    match tag {
        CatalogTag::A2 => "A2",
        CatalogTag::A3 => "A3",
        CatalogTag::E6 => "E6",
    }
}

fn graphs(cfg: &RunConfig, dir: &Path) -> Outcome {
    let mut sets: Vec<(String, Vec<AtomicGraph>)> = Vec::new();
    for &tag in &cfg.experiment.catalogs {
        sets.push((tag_name(tag).into(), catalog(tag)?));
    }
    if let Some(path) = &cfg.experiment.graphs {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("config error at `experiment.graphs`: {}: {e}", path.display())))?;
        let gs = graphs_from_json(&text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
        sets.push(("file".into(), gs));
    }

    let mut orders = Table::new(["catalog", "graph", "internal", "order", "warnings"]);
    for (name, gs) in &sets {
        for g in gs {
            let o = scaling_order(g);
            orders.push(vec![
                Cell::Text(name.clone()),
                Cell::Text(g.name.clone()),
                Cell::Int(g.internal_count() as i64),
                Cell::Int(o.order),
                Cell::Text(o.warnings.join("; ")),
            ])?;
        }
        if cfg.wants(Format::Json) {
            write_atomic(&dir.join(format!("catalog_{name}.json")), graphs_to_json(gs)?.as_bytes())?;
        }
    }
    if cfg.wants(Format::Csv) {
        orders.write(&dir.join("scaling_orders.csv"))?;
    }

    if cfg.experiment.catalogs.contains(&CatalogTag::E6) {
        let geom = cfg.geometry()?;
        let profile = build_profile(&cfg.profile, &geom)?;
        let d = geom.d();
        let mut cols: Vec<String> = ["z", "graph", "row_sum", "symbol0", "c0"].map(String::from).to_vec();
        cols.extend((0..d).map(|i| format!("q{i}{i}")));
        let mut table = Table::new(cols).meta("d", d).meta("L", geom.l()).meta("W", geom.w());
        for z in cfg.points() {
            let pt = m_sc(z)?;
            let ks = KernelSet::new(&profile, &pt)?;
            let ctx = EvalContext::new(&ks).with_budget(cfg.experiment.budget);
            for g in catalog(CatalogTag::E6)? {
                let e = SelfEnergyKernel::new(graph_kernel(&g, &ctx, "x", "y")?, 6, g.name.clone())?;
                let r = renormalize_self_energy(&e, &profile)?;
                let mut row = vec![
                    Cell::Text(z_label(z)),
                    Cell::Text(g.name.clone()),
                    Cell::Num(r.kernel.row_sum().norm()),
                    Cell::Num(r.kernel.symbol()[0].norm()),
                ];
                // Too few small momenta for the quadratic fit: leave its cells empty.
                match self_energy_symbol(&r) {
                    Ok(sym) => {
                        row.push(Cell::Num(sym.c0));
                        row.extend((0..d).map(|i| Cell::Num(sym.quad[i][i])));
                    }
                    Err(Error::FitDegenerate(_)) => row.extend((0..=d).map(|_| Cell::Text(String::new()))),
                    Err(e) => return Err(e.into()),
                }
                table.push(row)?;
            }
        }
        if cfg.wants(Format::Csv) {
            table.write(&dir.join("e6_renormalized.csv"))?;
        }
    }
    let total: usize = sets.iter().map(|(_, g)| g.len()).sum();
    println!("graphs: {total} graph(s) in {} set(s) written to {}", sets.len(), dir.display());
    Ok(())
}

fn collect_json(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_json(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    Ok(())
}

fn report(dir: &Path) -> Outcome {
    let mut files = Vec::new();
    collect_json(dir, &mut files).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    files.sort();
    let mut t = Table::new(["file", "estimator", "config", "seed", "samples", "checks", "failed"]);
    for f in &files {
        let Ok(text) = std::fs::read_to_string(f) else { continue };
        let Ok(r) = serde_json::from_str::<EstimatorReport>(&text) else { continue };
        let rel = f.strip_prefix(dir).unwrap_or(f).display().to_string();
        t.push(vec![
            Cell::Text(rel),
            Cell::Text(r.estimator.clone()),
            Cell::Text(r.config_hash.clone()),
            Cell::Int(r.seed as i64),
            Cell::Int(r.samples as i64),
            Cell::Int(r.checks.len() as i64),
            Cell::Int(r.checks.iter().filter(|c| !c.pass).count() as i64),
        ])?;
    }
    t.write(&dir.join("summary.csv"))?;
    println!("report: {} report(s) summarized in {}", t.rows.len(), dir.join("summary.csv").display());
    Ok(())
}
