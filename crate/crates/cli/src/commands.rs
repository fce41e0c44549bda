//! Subcommand bodies. Each returns the primary table plus any extra files.

use std::f64::consts::LN_2;
use std::path::PathBuf;

use hopcap::hopopt::{self, StationarySet};
use hopcap::macmodel;
use hopcap::simulator::{self, PeriodRecord, PowerPolicy, SimConfig};
use hopcap::{waterfill, DiscreteWaterfillTable, FadingModel, HopProblem, Maximizer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{GridSpec, GridVariable, PolicySpec, RunConfig};
use crate::error::CliError;
use crate::output::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateUnit {
    Nats,
    Bits,
}

impl RateUnit {
    fn convert(self, nats: f64) -> f64 {
        match self {
            RateUnit::Nats => nats,
            RateUnit::Bits => nats / LN_2,
        }
    }

    fn suffix(self) -> &'static str {
        match self {
            RateUnit::Nats => "nats",
            RateUnit::Bits => "bits",
        }
    }
}

pub struct Context {
    pub cfg: RunConfig,
    pub unit: RateUnit,
    pub grid: Option<String>,
    pub seed: Option<u64>,
    pub horizon: Option<u64>,
}

impl Context {
    fn grid(&self) -> Result<GridSpec, CliError> {
        match (&self.grid, &self.cfg.grid) {
            (Some(text), base) => GridSpec::with_override(base.as_ref(), text),
            (None, Some(g)) => Ok(g.clone()),
            (None, None) => Err(CliError::validation("missing [grid] table (or --grid)")),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed.or(self.cfg.seed).unwrap_or(0)
    }

    fn col(&self, name: &str) -> String {
        format!("{name}_{}", self.unit.suffix())
    }
}

/// Extra artifact written next to the main output.
pub struct Extra {
    pub path: PathBuf,
    pub table: Table,
}

fn discrete_table(model: &FadingModel) -> Option<DiscreteWaterfillTable> {
    model
        .is_discrete()
        .then(|| DiscreteWaterfillTable::build(model).ok())
        .flatten()
}

pub fn waterfill(ctx: &Context, pis: &[f64]) -> Result<Table, CliError> {
    let model = ctx.cfg.model()?;
    let pis = if pis.is_empty() {
        let grid = ctx.grid()?;
        if grid.variable != GridVariable::Pi {
            return Err(CliError::validation(
                "waterfill needs --pi values or a grid with variable = \"pi\"",
            ));
        }
        grid.values()?
    } else {
        pis.to_vec()
    };
    let c = model.alpha_over_sigma2();
    let mut t = Table::new(&["pi", "lambda", &ctx.col("gamma"), "cutoff_h", "water_level"]);
    t.note("unit", ctx.unit.suffix());
    for pi in pis {
        let sol = waterfill::solve(&model, pi)?;
        t.push(vec![
            pi.into(),
            sol.lambda.into(),
            ctx.unit.convert(sol.gamma).into(),
            (sol.lambda / c).into(),
            sol.water_level().into(),
        ]);
    }
    Ok(t)
}

fn maximizer_label(set: &StationarySet) -> String {
    match set.maximizer {
        Maximizer::Point(i) => format!("point {}", i + 1),
        Maximizer::Boundary(b) => format!("boundary {b}"),
    }
}

fn stationary_rows(ctx: &Context, set: &StationarySet) -> Table {
    let mut t = Table::new(&[
        "d_m",
        "pi",
        "lambda",
        &ctx.col("gamma"),
        &ctx.col("psi"),
        "segment",
        "maximizer",
    ]);
    for (i, p) in set.points.iter().enumerate() {
        t.push(vec![
            p.d.into(),
            p.pi.into(),
            p.lambda.into(),
            ctx.unit.convert(p.gamma).into(),
            ctx.unit.convert(p.psi).into(),
            p.segment.into(),
            (set.maximizer == Maximizer::Point(i)).into(),
        ]);
    }
    t
}

pub fn optimize(ctx: &Context) -> Result<Table, CliError> {
    let problem = ctx.cfg.problem()?;
    let opt = hopopt::optimize(&problem, &ctx.cfg.scan()?)?;
    let mut t = stationary_rows(ctx, &opt.stationary);
    t.note("unit", ctx.unit.suffix());
    t.note("pt_prime_w", problem.pt_prime);
    t.note("eta", problem.eta);
    t.note("d_opt_m", opt.d_opt);
    t.note("pi_opt", opt.pi_opt);
    t.note("lambda_opt", opt.lambda_opt);
    t.note(ctx.col("gamma_opt"), ctx.unit.convert(opt.gamma_opt));
    t.note(ctx.col("psi_opt"), ctx.unit.convert(opt.psi_opt));
    t.note("unique", opt.unique);
    t.note("d0_m", problem.d0);
    t.note("far_field", opt.far_field);
    if let Ok(profile) = ctx.cfg.profile() {
        let theta = profile.throughput(opt.gamma_opt);
        t.note("theta_opt_bps", theta);
        t.note("transport_opt_bit_m_per_s", theta * opt.d_opt);
    }
    Ok(t)
}

pub fn stationary_points(ctx: &Context) -> Result<Table, CliError> {
    let problem = ctx.cfg.problem()?;
    let set = hopopt::stationary_points(&problem, &ctx.cfg.scan()?)?;
    let mut t = stationary_rows(ctx, &set);
    t.note("unit", ctx.unit.suffix());
    t.note("count", set.points.len());
    t.note("maximizer", maximizer_label(&set));
    t.note("unique", set.unique);
    Ok(t)
}

pub fn sweep(ctx: &Context) -> Result<Table, CliError> {
    let base = ctx.cfg.problem()?;
    let grid = ctx.grid()?;
    let values = grid.values()?;
    let scan = ctx.cfg.scan()?;
    let table = discrete_table(&base.model);
    let mut t = Table::new(&[
        "pt_prime_w",
        "d_m",
        "pi",
        "lambda",
        &ctx.col("gamma"),
        &ctx.col("psi"),
        "segment",
    ]);
    t.note("unit", ctx.unit.suffix());
    t.note("eta", base.eta);
    for (i, scale) in grid.pt_prime_scales.iter().enumerate() {
        let problem =
            HopProblem::new(base.model.clone(), base.eta, scale * base.pt_prime, base.d0)?;
        for &v in &values {
            let (d, pi) = match grid.variable {
                GridVariable::D => (v, problem.pi_at(v)),
                GridVariable::Pi => (problem.d_at(v), v),
            };
            let sol = waterfill::solve(&problem.model, pi)?;
            t.push(vec![
                problem.pt_prime.into(),
                d.into(),
                pi.into(),
                sol.lambda.into(),
                ctx.unit.convert(sol.gamma).into(),
                ctx.unit.convert(d * sol.gamma).into(),
                table.as_ref().map(|tb| tb.segment(pi) + 1).into(),
            ]);
        }
        match hopopt::optimize(&problem, &scan) {
            Ok(opt) => {
                t.note(format!("pt_prime_w[{i}]"), problem.pt_prime);
                t.note(format!("d_opt_m[{i}]"), opt.d_opt);
                t.note(format!("pi_opt[{i}]"), opt.pi_opt);
                t.note(
                    format!("{}[{i}]", ctx.col("psi_opt")),
                    ctx.unit.convert(opt.psi_opt),
                );
                t.note(format!("unique[{i}]"), opt.unique);
            }
            Err(hopcap::Error::NoStationaryPoint(b)) => {
                t.note(format!("d_opt_m[{i}]"), format!("boundary {b}"));
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(t)
}

pub fn simulate(
    ctx: &Context,
    trace_path: Option<PathBuf>,
) -> Result<(Table, Option<Extra>), CliError> {
    let cfg = &ctx.cfg;
    let spec = &cfg.simulate;
    let problem = cfg.problem()?;
    let profile = cfg.profile()?;
    let (policy, d) = match spec.policy {
        PolicySpec::WaterfillOptimal => {
            let opt = hopopt::optimize(&problem, &cfg.scan()?)?;
            (
                PowerPolicy::Waterfill {
                    lambda: opt.lambda_opt,
                },
                opt.d_opt,
            )
        }
        PolicySpec::Waterfill => {
            let d = spec.d_m.ok_or_else(|| {
                CliError::validation("simulate.d_m is required for policy = \"waterfill\"")
            })?;
            let sol = waterfill::solve(&problem.model, problem.pi_at(d))?;
            (PowerPolicy::from_solution(&sol), d)
        }
        PolicySpec::Constant => {
            let d = spec.d_m.ok_or_else(|| {
                CliError::validation("simulate.d_m is required for policy = \"constant\"")
            })?;
            let power = spec.power_w.ok_or_else(|| {
                CliError::validation("simulate.power_w is required for policy = \"constant\"")
            })?;
            (PowerPolicy::Constant { power }, d)
        }
    };
    let config = SimConfig {
        profile,
        model: problem.model.clone(),
        policy,
        d,
        eta: problem.eta,
        horizon: ctx.horizon.unwrap_or(spec.horizon),
        seed: ctx.seed(),
        relinquish_overhead: spec.relinquish_overhead_s,
    };
    let target = simulator::analytic_targets(&config)?;
    let mut trace = trace_path
        .as_ref()
        .map(|_| Table::new(&["period_type", "duration_s", "energy_j", "bits"]));
    let report = match (&mut trace, spec.replications) {
        (None, r) => simulator::run_replicated(&config, r)?,
        (Some(tr), 1) => simulator::run_with_trace(&config, |p: &PeriodRecord| {
            tr.push(vec![
                p.kind.as_str().into(),
                p.duration_s.into(),
                p.energy_j.into(),
                p.bits.into(),
            ]);
        })?,
        (Some(_), _) => {
            return Err(CliError::validation(
                "--trace needs simulate.replications = 1",
            ))
        }
    };

    let mut t = Table::new(&[
        "quantity", "estimate", "std_err", "ci_low", "ci_high", "target", "z_score",
    ]);
    t.note("seed", config.seed);
    t.note("horizon", config.horizon);
    t.note("replications", spec.replications);
    t.note("d_m", d);
    match policy {
        PowerPolicy::Waterfill { lambda } => t.note("lambda", lambda),
        PowerPolicy::Constant { power } => t.note("power_w", power),
    }
    t.note("idle", report.periods.idle);
    t.note("collision", report.periods.collision);
    t.note("success", report.periods.success);
    t.note("silent", report.periods.silent);
    t.note("elapsed_s", report.elapsed_s);
    for (name, est, tgt) in [
        ("theta_bps", report.theta_hat, target.theta),
        ("power_w", report.power_hat, target.power),
    ] {
        t.push(vec![
            name.into(),
            est.value.into(),
            est.std_err.into(),
            est.ci_low.into(),
            est.ci_high.into(),
            tgt.into(),
            est.z_score(tgt).into(),
        ]);
    }
    let extra = trace_path
        .zip(trace)
        .map(|(path, table)| Extra { path, table });
    Ok((t, extra))
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

pub fn compare_ftt(ctx: &Context) -> Result<Table, CliError> {
    let spec = ctx
        .cfg
        .ftt
        .as_ref()
        .ok_or_else(|| CliError::validation("missing [ftt] table"))?;
    let mut tuples = spec.tuples.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed());
    for _ in 0..spec.random_tuples {
        let a = log_uniform(&mut rng, 1e-2, 1e2);
        let b = log_uniform(&mut rng, 1e-2, 1e2);
        let (h1, h2) = if a >= b { (a, b) } else { (b, a) };
        let (mut p1, mut p2) = (
            log_uniform(&mut rng, 1e-2, 1e2),
            log_uniform(&mut rng, 1e-2, 1e2),
        );
        if h1 * p1 < h2 * p2 {
            std::mem::swap(&mut p1, &mut p2);
        }
        tuples.push([h1, h2, p1, p2]);
    }
    if tuples.is_empty() {
        return Err(CliError::validation(
            "ftt: no tuples given and random_tuples = 0",
        ));
    }
    let mut t = Table::new(&[
        "h1",
        "h2",
        "p1_w",
        "p2_w",
        "l_p_bits",
        "l_t_bits",
        "energy_j",
        "total_time_s",
        "ftt_at_least_fp",
    ]);
    let mut violations = 0;
    for [h1, h2, p1, p2] in tuples.iter().copied() {
        let c = simulator::compare_ftt_fp(h1, h2, p1, p2, spec.l_bits, spec.w_hz)?;
        let ok = c.l_t >= c.l_p * (1.0 - 1e-9);
        violations += usize::from(!ok);
        t.push(vec![
            h1.into(),
            h2.into(),
            p1.into(),
            p2.into(),
            c.l_p.into(),
            c.l_t.into(),
            c.energy_j.into(),
            c.total_time_s.into(),
            ok.into(),
        ]);
    }
    t.note("tuples", tuples.len());
    t.note("violations", violations);
    t.note("seed", ctx.seed());
    Ok(t)
}

pub fn single_cell_bound(ctx: &Context) -> Result<Table, CliError> {
    let spec = ctx
        .cfg
        .reuse
        .as_ref()
        .ok_or_else(|| CliError::validation("missing [reuse] table"))?;
    let eta = ctx.cfg.eta()?;
    if spec.k_points == 0 || spec.k_max < 2 {
        return Err(CliError::validation(
            "reuse: need k_points >= 1 and k_max >= 2",
        ));
    }
    if spec.p_w.is_empty() {
        return Err(CliError::validation(
            "reuse.p_w: need at least one power level",
        ));
    }
    let mut ks: Vec<u64> = (0..spec.k_points)
        .map(|i| {
            let t = if spec.k_points == 1 {
                0.0
            } else {
                i as f64 / (spec.k_points - 1) as f64
            };
            (2.0 * (spec.k_max as f64 / 2.0).powf(t)).round() as u64
        })
        .collect();
    ks.dedup();
    let (k_star, best) = macmodel::best_reuse(spec.area_m2, eta, spec.k_max)?;
    let mut t = Table::new(&[
        "k",
        "p_w",
        &ctx.col("c_k"),
        &ctx.col("bound"),
        &ctx.col("c_times_r"),
        &ctx.col("bound_times_r"),
    ]);
    t.note("unit", ctx.unit.suffix());
    t.note("area_m2", spec.area_m2);
    t.note("eta", eta);
    t.note("k_star", k_star);
    t.note(ctx.col("best_bound_times_r"), ctx.unit.convert(best));
    t.note("r_model", "sqrt(2A/K) illustrative");
    for &p in &spec.p_w {
        for &k in &ks {
            let b = macmodel::spatial_reuse_bound(k, p, spec.noise_w, spec.area_m2, eta)?;
            let r = macmodel::reuse_radius(k, spec.area_m2);
            t.push(vec![
                k.into(),
                p.into(),
                ctx.unit.convert(b.c_k).into(),
                ctx.unit.convert(b.power_free_bound).into(),
                ctx.unit.convert(b.c_k * r).into(),
                ctx.unit.convert(b.power_free_bound * r).into(),
            ]);
        }
    }
    Ok(t)
}
