//! Data behind every figure and table, plus the discrepancy reports.

use nalgebra::Matrix2;
use rds_core::chain::simulate_trajectory;
use rds_core::fluctuations::{compare_rates, empirical_fluctuation, simulate_fluctuation, write_rate_comparison};
use rds_core::fluid::{find_zc, phi, solve_fluid, FluidParams};
use rds_core::hitting::{hitting_full, seed_curves, survival_table, write_seed_curves};
use rds_core::output::CsvWriter;
use rds_core::{chain::rng_for_seed, ModelParams, RateSource, Result};

use crate::commands::Context;
use crate::config::Resolver;
use crate::FiguresArgs;

/// Published absorption times for λ = 2, c = 1..=6.
pub const PUBLISHED_T0: [f64; 6] = [0.426, 0.775, 0.818, 0.827, 0.829, 0.829];

/// Initial fractions for which the t0 table is produced.
pub const T0_TABLE_A0: [f64; 2] = [0.005, 0.1];

const LAMBDA: f64 = 2.0;
const A0: f64 = 0.005;
/// Grid points skipped between rows of the path files.
const THIN: usize = 10;

pub fn run(a: FiguresArgs, r: &mut Resolver, ctx: &Context) -> Result<()> {
    let seed = r.get("seed", a.seed, 0u64)?;
    let dt = r.get("dt", a.dt, 1e-4)?;
    r.finish()?;
    let header = r.header("figures", ctx.timestamp);
    let with = |extra: &[String]| -> Vec<String> { header.iter().chain(extra).cloned().collect() };
    let mut written = Vec::new();

    // t0 table
    let path = ctx.path("t0_table.csv");
    let mut w = CsvWriter::create(&path, &with(&[format!("lambda={LAMBDA}")]), "c,a0,t0,published_t0,diff")?;
    for a0 in T0_TABLE_A0 {
        for (i, published) in PUBLISHED_T0.iter().enumerate() {
            let c = i + 1;
            let t0 = solve_fluid(&FluidParams::new(LAMBDA, c, a0)?, dt)?.t0;
            w.line(format_args!("{c},{a0},{t0},{published},{}", t0 - published))?;
            println!("t0 a0={a0} c={c}: {t0:.4} (published {published}, diff {:+.4})", t0 - published);
        }
    }
    w.finish()?;
    written.push(path);

    // z_c against the bracket (1 - 1/λ, 1)
    let path = ctx.path("zc_bracket.csv");
    let mut w = CsvWriter::create(&path, &header, "lambda,c,zc,bracket_lo,phi_at_bracket_lo,zc_in_bracket")?;
    let mut outside = 0;
    let mut cases = 0;
    for lambda in [1.5, 2.0, 3.0, 5.0] {
        for c in 1..=6 {
            let lo = 1.0 - 1.0 / lambda;
            let at_lo = phi(lo, lambda, c);
            match find_zc(lambda, c) {
                Some(z) => {
                    let inside = z > lo && z < 1.0;
                    cases += 1;
                    outside += usize::from(!inside);
                    w.line(format_args!("{lambda},{c},{z},{lo},{at_lo},{inside}"))?;
                }
                None => w.line(format_args!("{lambda},{c},,{lo},{at_lo},"))?,
            }
        }
    }
    w.finish()?;
    println!("zc bracket (1-1/lambda, 1): root outside in {outside} of {cases} cases with a root");
    written.push(path);

    // published diffusion rates against the moment oracle
    let fluid = solve_fluid(&FluidParams::new(LAMBDA, 3, A0)?, dt)?;
    let cmp = compare_rates(&fluid);
    let path = ctx.path("rates_divergence.csv");
    write_rate_comparison(&path, &with(&[format!("lambda={LAMBDA}"), "c=3".into(), format!("a0={A0}")]), &cmp)?;
    let max_diff = |f: fn(&rds_core::fluctuations::RateComparison) -> f64| cmp.iter().map(f).fold(0.0, f64::max);
    println!(
        "rates lambda=2 c=3: max|m11 diff|={:.3e} max|m12 diff|={:.4} max|m22 diff|={:.4} paper non-PSD at {} of {} points",
        max_diff(|r| (r.paper.m11 - r.oracle.m11).abs()),
        max_diff(|r| (r.paper.m12 - r.oracle.m12).abs()),
        max_diff(|r| (r.paper.m22 - r.oracle.m22).abs()),
        cmp.iter().filter(|r| !r.paper.is_psd()).count(),
        cmp.len()
    );
    written.push(path);

    // hitting and survival tables, seed curves
    let small = ModelParams::new(60, LAMBDA, 3, 1)?;
    let tag = |n: usize, c: usize, n0: usize| vec![format!("N={n}"), format!("lambda={LAMBDA}"), format!("c={c}"), format!("n0={n0}")];
    let path = ctx.path("fig2_hitprob.csv");
    hitting_full(50, &small)?.table.write_csv(&path, &with(&tag(60, 3, 50)), "u")?;
    written.push(path);
    let path = ctx.path("fig3_survival.csv");
    survival_table(50, &small)?.table.write_csv(&path, &with(&tag(60, 3, 50)), "v")?;
    written.push(path);
    let path = ctx.path("survival.csv");
    let big = ModelParams::new(1000, LAMBDA, 1, 1)?;
    write_seed_curves(&path, &with(&[format!("N=1000"), format!("lambda={LAMBDA}")]), &seed_curves(&big, 10, 100)?)?;
    written.push(path);

    // sample paths next to the fluid limit for c = 1..=4
    let traj_path = ctx.path("fig4_trajectories.csv");
    let ode_path = ctx.path("fig4_ode.csv");
    let tags = with(&["N=1000".into(), format!("lambda={LAMBDA}"), format!("a0={A0}"), format!("replicate_seed={}", seed + 1)]);
    let mut tw = CsvWriter::create(&traj_path, &tags, "c,n,A,B,reseed")?;
    let mut ow = CsvWriter::create(&ode_path, &tags, "c,t,a,b")?;
    for c in 1..=4 {
        let params = ModelParams::from_fraction(1000, LAMBDA, c, A0)?;
        let traj = simulate_trajectory(&params, seed + 1, 1000)?;
        for s in &traj.states {
            tw.line(format_args!("{c},{},{},{},{}", s.n, s.a, s.b, u8::from(traj.is_reseed(s.n))))?;
        }
        let sol = solve_fluid(&FluidParams::new(LAMBDA, c, A0)?, dt)?;
        for i in (0..sol.len()).step_by(THIN) {
            ow.line(format_args!("{c},{},{},{}", sol.times[i], sol.a[i], sol.b[i]))?;
        }
    }
    tw.finish()?;
    ow.finish()?;
    written.push(traj_path);
    written.push(ode_path);

    // one rescaled deviation path, N = 1000, c = 3, and one limit path
    let params = ModelParams::from_fraction(1000, LAMBDA, 3, A0)?;
    let mut chosen = None;
    for rep in 1..=1000u64 {
        let traj = simulate_trajectory(&params, seed + rep, 1000)?;
        if let Some(path) = empirical_fluctuation(&traj, &fluid, fluid.t0)? {
            chosen = Some((rep, path));
            break;
        }
    }
    if let Some((rep, emp)) = chosen {
        let path = ctx.path("fig5_fluctuation.csv");
        let tags = with(&["N=1000".into(), format!("lambda={LAMBDA}"), "c=3".into(), format!("a0={A0}"), format!("replicate_seed={}", seed + rep)]);
        let mut w = CsvWriter::create(&path, &tags, "t,w1,w2")?;
        for i in (0..emp.times.len()).step_by(THIN) {
            w.line(format_args!("{},{},{}", emp.times[i], emp.w[i].x, emp.w[i].y))?;
        }
        w.finish()?;
        written.push(path);
    }
    let limit = simulate_fluctuation(&fluid, Matrix2::zeros(), RateSource::Oracle, dt, &mut rng_for_seed(seed))?;
    let path = ctx.path("fig5_limit_path.csv");
    let tags = with(&[format!("lambda={LAMBDA}"), "c=3".into(), format!("a0={A0}"), "rates=oracle".into()]);
    let mut w = CsvWriter::create(&path, &tags, "t,w1,w2")?;
    for i in (0..limit.times.len()).step_by(THIN) {
        w.line(format_args!("{},{},{}", limit.times[i], limit.w[i].x, limit.w[i].y))?;
    }
    w.finish()?;
    written.push(path);

    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(())
}
