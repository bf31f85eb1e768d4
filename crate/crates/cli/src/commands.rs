use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use rayon::prelude::*;
use rds_core::chain::{rng_for_seed, simulate_trajectory};
use rds_core::fluctuations::{propagate_covariance, write_clt_csv, CltRow};
use rds_core::fluid::{solve_fluid, FluidParams, FluidSolution};
use rds_core::graph::{explore_to, generate_er};
use rds_core::hitting::{hitting_distribution, hitting_full, seed_curves, survival_table, write_seed_curves};
use rds_core::montecarlo::{
    clt_report, lln_report, write_clt_summary, write_lln, write_summaries, CltReport, ExperimentConfig,
    ReplicateSummary,
};
use rds_core::output::CsvWriter;
use rds_core::{Error, ModelParams, RateSource, Result, Trajectory};

use crate::config::Resolver;
use crate::{figures, Cli, Command, Engine};

/// Replicates simulated per parallel batch when streaming trajectories.
const BATCH: usize = 64;

pub struct Context {
    pub out: PathBuf,
    pub timestamp: bool,
}

impl Context {
    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParams(msg.into())
}

pub fn run(cli: Cli) -> Result<()> {
    if let Some(threads) = cli.common.threads {
        if threads == 0 {
            return Err(invalid("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidParams(format!("thread pool: {e}")))?;
    }
    let mut r = Resolver::load(cli.common.config.as_deref())?;
    let out = r.get_unrecorded("out", cli.common.out, PathBuf::from("out"))?;
    let ctx = Context {
        out,
        timestamp: !cli.common.no_timestamp,
    };
    match cli.command {
        Command::Simulate(a) => simulate(a, &mut r, &ctx),
        Command::Ode(a) => ode(a, &mut r, &ctx),
        Command::Hitprob(a) => hitprob(a, &mut r, &ctx),
        Command::Survival(a) => survival(a, &mut r, &ctx),
        Command::Clt(a) => clt(a, &mut r, &ctx),
        Command::Compare(a) => compare(a, &mut r, &ctx),
        Command::Figures(a) => figures::run(a, &mut r, &ctx),
    }
}

fn report(path: &Path) {
    println!("wrote {}", path.display());
}

fn simulate(a: crate::SimulateArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let n = r.get("n", a.n, 1000usize)?;
    let lambda = r.get("lambda", a.lambda, 2.0)?;
    let c = r.get("c", a.c, 3usize)?;
    let a0 = r.get("a0", a.a0, 0.005)?;
    let replicates = r.get("replicates", a.replicates, 1usize)?;
    let seed = r.get("seed", a.seed, 0u64)?;
    let horizon = r.get("horizon", a.horizon, n)?;
    let engine = r.get("engine", a.engine, Engine::Chain)?;
    let dump = r.get("dump-graph", a.dump_graph.then_some(true), false)?;
    r.finish()?;
    if dump && engine == Engine::Chain {
        return Err(invalid("--dump-graph needs --engine graph"));
    }
    if replicates == 0 {
        return Err(invalid("replicates must be at least 1"));
    }
    if horizon > n {
        return Err(invalid(format!("horizon {horizon} exceeds population {n}")));
    }
    let params = ModelParams::from_fraction(n, lambda, c, a0)?;
    let fluid = solve_fluid(&FluidParams::new(lambda, c, a0)?, 1e-4)?;
    let comments = r.header("simulate", ctx.timestamp);
    let traj_path = ctx.path("trajectories.csv");
    let mut w = CsvWriter::create(&traj_path, &comments, "replicate,n,A,B,reseed")?;
    let graph_dir = ctx.path("graphs");
    if dump {
        std::fs::create_dir_all(&graph_dir).map_err(|source| Error::Io {
            path: graph_dir.clone(),
            source,
        })?;
    }
    let mut summaries = Vec::with_capacity(replicates);
    for start in (1..=replicates).step_by(BATCH) {
        let end = (start + BATCH - 1).min(replicates);
        let batch: Vec<Trajectory> = (start..=end)
            .into_par_iter()
            .map(|rep| {
                let s = seed.wrapping_add(rep as u64);
                match engine {
                    Engine::Chain => simulate_trajectory(&params, s, horizon),
                    Engine::Graph => {
                        let mut rng = rng_for_seed(s);
                        let g = generate_er(n, lambda, &mut rng)?;
                        if dump {
                            g.write_edge_list(&graph_dir.join(format!("graph_{rep}.txt")))?;
                        }
                        explore_to(&g, &params, horizon, &mut rng)
                    }
                }
            })
            .collect::<Result<_>>()?;
        for (i, traj) in batch.iter().enumerate() {
            let rep = start + i;
            for s in &traj.states {
                w.line(format_args!("{},{},{},{},{}", rep, s.n, s.a, s.b, u8::from(traj.is_reseed(s.n))))?;
            }
            let full = traj.horizon() == n;
            summaries.push(ReplicateSummary::of(rep, seed.wrapping_add(rep as u64), traj, full.then_some(&fluid)));
        }
    }
    w.finish()?;
    report(&traj_path);
    let summary_path = ctx.path("summary.csv");
    write_summaries(&summary_path, &comments, &summaries)?;
    report(&summary_path);
    Ok(())
}

fn ode(a: crate::OdeArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let lambda = r.get("lambda", a.lambda, 2.0)?;
    let c = r.get("c", a.c, 3usize)?;
    let a0 = r.get("a0", a.a0, 0.005)?;
    let dt = r.get("dt", a.dt, 1e-4)?;
    r.finish()?;
    let sol = solve_fluid(&FluidParams::new(lambda, c, a0)?, dt)?;
    let path = ctx.path("ode.csv");
    sol.write_csv(&path, &r.header("ode", ctx.timestamp))?;
    println!("{}", sol.summary_line());
    report(&path);
    Ok(())
}

fn hitprob(a: crate::HitprobArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let n = r.get("n", a.n, 60usize)?;
    let lambda = r.get("lambda", a.lambda, 2.0)?;
    let c = r.get("c", a.c, 3usize)?;
    let n0 = r.get("n0", a.n0, 50usize.min(n))?;
    let m = r.get_opt("m", a.m)?;
    let ell = r.get_opt("ell", a.ell)?;
    r.finish()?;
    let params = ModelParams::new(n, lambda, c, 1)?;
    let table = match (m, ell) {
        (Some(m), Some(ell)) => hitting_distribution(n0, m, ell, &params)?,
        (None, None) => hitting_full(n0, &params)?,
        _ => return Err(invalid("m and ell must be given together")),
    };
    let path = ctx.path("hitprob.csv");
    table.table.write_csv(&path, &r.header("hitprob", ctx.timestamp), "u")?;
    let (m, ell) = (m.unwrap_or(0), ell.unwrap_or(1));
    println!("u({m},{ell})={}", table.get(m, ell));
    report(&path);
    Ok(())
}

fn survival(a: crate::SurvivalArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let n = r.get("n", a.n, 1000usize)?;
    let lambda = r.get("lambda", a.lambda, 2.0)?;
    let c = r.get("c", a.c, 3usize)?;
    let cmax = r.get("cmax", a.cmax, 10usize)?;
    let n0 = r.get("n0", a.n0, 100usize.min(n))?;
    r.finish()?;
    if cmax == 0 {
        return Err(invalid("cmax must be at least 1"));
    }
    let params = ModelParams::new(n, lambda, c, 1)?;
    let comments = r.header("survival", ctx.timestamp);
    let table_path = ctx.path("survival_table.csv");
    survival_table(n0, &params)?.table.write_csv(&table_path, &comments, "v")?;
    let curve_path = ctx.path("survival.csv");
    write_seed_curves(&curve_path, &comments, &seed_curves(&params, cmax, n0)?)?;
    report(&table_path);
    report(&curve_path);
    Ok(())
}

fn parse_sigma0(raw: &str) -> Result<Matrix2<f64>> {
    let v: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| invalid(format!("sigma0: {e}")))?;
    match v.as_slice() {
        [s11, s12, s22] => Ok(Matrix2::new(*s11, *s12, *s12, *s22)),
        _ => Err(invalid("sigma0 needs three values s11,s12,s22")),
    }
}

/// Both theory variants next to the empirical covariance at each checkpoint.
pub fn clt_rows(fluid: &FluidSolution, cfg: &ExperimentConfig, report: &CltReport) -> Result<Vec<CltRow>> {
    let mut rows = Vec::new();
    for source in [RateSource::Paper, RateSource::Oracle] {
        let series = propagate_covariance(fluid, cfg.sigma0, source, cfg.dt)?;
        rows.extend(report.rows.iter().map(|row| CltRow {
            t: row.t,
            theory: series.at(row.t),
            empirical: Some(row.cov_emp),
            source,
        }));
    }
    Ok(rows)
}

fn print_clt(report: &CltReport) {
    println!(
        "N={} survivors={}/{} excluded={:.4} (tau >= floor(N*{:.6}))",
        report.population,
        report.survivors,
        report.replicates,
        report.exclusion_fraction(),
        report.conditioned_on
    );
    for row in &report.rows {
        println!(
            "t={:.6} var_emp={:.6} var_theory={:.6} ratio={:.4} stderr={:.6}",
            row.t, row.var_emp, row.var_theory, row.ratio, row.stderr
        );
    }
}

fn clt(a: crate::CltArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let n = r.get("n", a.n, 4000usize)?;
    let lambda = r.get("lambda", a.lambda, 2.0)?;
    let c = r.get("c", a.c, 3usize)?;
    let a0 = r.get("a0", a.a0, 0.005)?;
    let mut cfg = ExperimentConfig::new(lambda, c, a0, vec![n]);
    cfg.replicates = r.get("replicates", a.replicates, 2000usize)?;
    cfg.seed_base = r.get("seed", a.seed, 0u64)?;
    cfg.dt = r.get("dt", a.dt, 1e-4)?;
    cfg.rate_source = r.get("rates", a.rates, "oracle".to_string())?.parse()?;
    let checkpoints: Vec<f64> = r.get_list("checkpoints", a.checkpoints, "0.1,0.2,0.3,0.4,0.5")?;
    let condition_on = r.get_opt("condition-on", a.condition_on)?;
    cfg.sigma0 = parse_sigma0(&r.get("sigma0", a.sigma0, "0,0,0".to_string())?)?;
    r.finish()?;
    let fluid = cfg.solve_fluid()?;
    let report = clt_report(&cfg, n, &checkpoints, condition_on)?;
    let comments = r.header("clt", ctx.timestamp);
    let summary = ctx.path("clt_summary.csv");
    write_clt_summary(&summary, &comments, &report.rows)?;
    let full = ctx.path("clt.csv");
    write_clt_csv(&full, &comments, &clt_rows(&fluid, &cfg, &report)?)?;
    print_clt(&report);
    report_paths(&[summary, full]);
    Ok(())
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        report(p);
    }
}

fn compare(a: crate::CompareArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let lambda = r.get("lambda", a.lambda, 2.0)?;
    let c = r.get("c", a.c, 3usize)?;
    let a0 = r.get("a0", a.a0, 0.005)?;
    let ns: Vec<usize> = r.get_list("ns", a.ns, "1000,4000")?;
    let mut cfg = ExperimentConfig::new(lambda, c, a0, ns.clone());
    cfg.replicates = r.get("replicates", a.replicates, 100usize)?;
    cfg.seed_base = r.get("seed", a.seed, 0u64)?;
    cfg.dt = r.get("dt", a.dt, 1e-4)?;
    cfg.rate_source = r.get("rates", a.rates, "oracle".to_string())?.parse()?;
    let checkpoints: Vec<f64> = r.get_list("checkpoints", a.checkpoints, "0.4")?;
    r.finish()?;
    let comments = r.header("compare", ctx.timestamp);
    let lln = lln_report(&cfg)?;
    let lln_path = ctx.path("lln.csv");
    write_lln(&lln_path, &comments, &lln)?;
    for row in &lln {
        println!("N={} median_sup_err={:.6} p90_sup_err={:.6}", row.population, row.median_sup_err, row.p90_sup_err);
    }
    for w in lln.windows(2) {
        println!(
            "median ratio N={}->{}: {:.4}",
            w[0].population,
            w[1].population,
            w[0].median_sup_err / w[1].median_sup_err
        );
    }
    let largest = *ns.last().expect("validated non-empty");
    let report = clt_report(&cfg, largest, &checkpoints, None)?;
    let clt_path = ctx.path("clt_summary.csv");
    write_clt_summary(&clt_path, &comments, &report.rows)?;
    print_clt(&report);
    report_paths(&[lln_path, clt_path]);
    Ok(())
}
