use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use potts_core::blocks::{
    verify_locally_sparse, SparsityMode, DEFAULT_BLOCK_BUDGET, DEFAULT_PATH_BUDGET,
};
use potts_core::counting::{estimate_partition, AnchorOrder};
use potts_core::decay::{
    default_depth, depth_for_eps, marginal_distribution, MargOptions, DEFAULT_DEPTH_COEFF,
};
use potts_core::exact::{exact_all_marginals, exact_partition};
use potts_core::graph::{generate, parse_instance, write_instance, Family};
use potts_core::randstats::{expected_contraction, verify_gnp_properties};
use potts_core::sampling::sample_batch;
use potts_core::saw::{verify_contraction, DEFAULT_WALK_BUDGET};
use potts_core::{Beta, Error, Instance, PottsParams};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(
    name = "potts",
    version,
    about = "Correlation-decay marginals and partition functions for the anti-ferromagnetic Potts model"
)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated graph in instance-file format.
    Gen(GenArgs),
    /// Exact partition function and marginals by enumeration.
    Exact(ExactArgs),
    /// Estimated marginal distribution of one vertex.
    Marginal(MarginalArgs),
    /// Estimated partition function.
    Partition(PartitionArgs),
    /// Approximate Gibbs samples, one per line.
    Sample(SampleArgs),
    /// Contraction of the walk sums `max_v E_δ(v, ℓ)`.
    VerifyContraction(ContractionArgs),
    /// Block sizes along simple paths.
    VerifySparse(SparseArgs),
    /// Contraction, sparsity and colorability of one sampled G(n, d/n).
    VerifyGnp(GnpArgs),
    /// `E[δ(X)]` for `X ~ Bin(n, Δ/n)`.
    ExpectedContraction(ExpectedArgs),
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    q: usize,
    /// Decimal with at most 9 fractional digits, `0 <= beta < 1`.
    #[arg(long)]
    beta: String,
}

impl ModelArgs {
    fn params(&self) -> potts_core::Result<PottsParams> {
        PottsParams::new(self.q, Beta::parse(&self.beta)?)
    }
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, alias = "instance-file")]
    instance: PathBuf,
}

#[derive(Args)]
struct DepthArgs {
    /// Root depth `L`.
    #[arg(long, conflicts_with_all = ["depth_coeff", "eps"], allow_negative_numbers = true)]
    depth: Option<i64>,
    /// `L = ⌈c ln n⌉`.
    #[arg(long)]
    depth_coeff: Option<f64>,
    /// `L = ⌈c (ln n + ln 1/eps)⌉`.
    #[arg(long)]
    eps: Option<f64>,
}

impl DepthArgs {
    fn resolve(&self, n: usize) -> potts_core::Result<i64> {
        let c = self.depth_coeff.unwrap_or(DEFAULT_DEPTH_COEFF);
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "--depth-coeff must be positive, got {c}"
            )));
        }
        Ok(match (self.depth, self.eps) {
            (Some(l), _) => l,
            (None, Some(eps)) if eps > 0.0 && eps < 1.0 => depth_for_eps(n, eps, c),
            (None, Some(eps)) => {
                return Err(Error::InvalidArgument(format!(
                    "--eps must lie in (0, 1), got {eps}"
                )))
            }
            (None, None) => default_depth(n, c),
        })
    }
}

#[derive(Args)]
struct BudgetArgs {
    /// Largest block the recursion may build.
    #[arg(long, default_value_t = DEFAULT_BLOCK_BUDGET)]
    block_budget: usize,
    /// Cap on recursive calls.
    #[arg(long)]
    call_budget: Option<u64>,
    /// Wall-clock limit in seconds.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl BudgetArgs {
    fn options(&self) -> MargOptions {
        MargOptions {
            block_budget: self.block_budget,
            call_budget: self.call_budget,
            deadline: self
                .time_limit
                .map(|s| Instant::now() + Duration::from_secs_f64(s.max(0.0))),
            ..MargOptions::default()
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    Path,
    Cycle,
    Complete,
    Star,
    Caterpillar,
    Gnp,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: FamilyName,
    /// Vertex count (spine length for caterpillars).
    #[arg(long, default_value_t = 0)]
    n: usize,
    /// Leaves of a star, bristles per spine vertex of a caterpillar.
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Expected degree for gnp.
    #[arg(long, default_value_t = 0.0)]
    d: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Tsv,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    /// Also report the marginal table of every vertex.
    #[arg(long)]
    marginals: bool,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct MarginalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    vertex: usize,
    #[command(flatten)]
    depth: DepthArgs,
    #[command(flatten)]
    budget: BudgetArgs,
}

#[derive(Args)]
struct PartitionArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    depth: DepthArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    /// Pin vertices in a seeded random order instead of ascending ids.
    #[arg(long)]
    order_seed: Option<u64>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    depth: DepthArgs,
    #[command(flatten)]
    budget: BudgetArgs,
    #[arg(long, default_value_t = 1)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ContractionArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    l_max: usize,
    #[arg(long, default_value_t = DEFAULT_WALK_BUDGET)]
    walk_budget: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeName {
    Exhaustive,
    Sampled,
}

#[derive(Args)]
struct SparseArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long)]
    l_max: usize,
    #[arg(long, value_enum, default_value = "exhaustive")]
    mode: ModeName,
    /// Sampled paths per start vertex and length (sampled mode).
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_PATH_BUDGET)]
    path_budget: u64,
}

#[derive(Args)]
struct GnpArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    l_max: usize,
    /// Sampled paths per start vertex and length for the sparsity check.
    #[arg(long, default_value_t = 20)]
    trials: usize,
}

#[derive(Args)]
struct ExpectedArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    n: u64,
    /// Mean degree `Δ`.
    #[arg(long)]
    delta: f64,
}

/// Rounds every float to 12 significant digits; integral values print as
/// integers.
fn round_numbers(v: &mut Value) {
    match v {
        Value::Number(num) => {
            if let Some(x) = num.as_f64().filter(|_| num.is_f64()) {
                let r: f64 = format!("{x:.11e}").parse().unwrap_or(x);
                *v = if r.fract() == 0.0 && r.abs() < 1e15 {
                    json!(r as i64)
                } else {
                    json!(r)
                };
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_numbers),
        Value::Object(map) => map.values_mut().for_each(round_numbers),
        _ => {}
    }
}

fn emit(mut v: Value) -> anyhow::Result<()> {
    round_numbers(&mut v);
    println!("{}", serde_json::to_string_pretty(&v)?);
    Ok(())
}

fn load(inst: &InstanceArgs, params: PottsParams) -> anyhow::Result<Instance> {
    let text = std::fs::read_to_string(&inst.instance)
        .with_context(|| format!("reading {}", inst.instance.display()))?;
    let file = parse_instance(&text, Some(params.q))?;
    Ok(Instance::new(file.graph, params, &file.pins)?)
}

fn sig12(x: f64) -> String {
    let mut v = json!(x);
    round_numbers(&mut v);
    v.to_string()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen(a) => {
            let family = match a.family {
                FamilyName::Path => Family::Path(a.n),
                FamilyName::Cycle => Family::Cycle(a.n),
                FamilyName::Complete => Family::Complete(a.n),
                FamilyName::Star => Family::Star(a.k),
                FamilyName::Caterpillar => Family::Caterpillar {
                    spine: a.n,
                    bristles: a.k,
                },
                FamilyName::Gnp => Family::Gnp {
                    n: a.n,
                    d: a.d,
                    seed: a.seed,
                },
            };
            print!("{}", write_instance(&generate(family)?, &[]));
        }
        Command::Exact(a) => {
            let inst = load(&a.instance, a.model.params()?)?;
            let z = exact_partition(&inst)?;
            if z == 0.0 {
                return Err(
                    Error::Infeasible("no configuration has positive weight".into()).into(),
                );
            }
            let table = if a.marginals {
                Some(exact_all_marginals(&inst)?)
            } else {
                None
            };
            match a.format {
                Format::Json => {
                    let mut out = json!({ "z": z, "log_z": z.ln(), "q": inst.q(), "beta": a.model.beta, "n": inst.n() });
                    if let Some(t) = table {
                        out["marginals"] = json!(t);
                    }
                    emit(out)?;
                }
                Format::Tsv => {
                    let mut out = format!("z\t{}\nlog_z\t{}\n", sig12(z), sig12(z.ln()));
                    if let Some(t) = table {
                        out.push_str("vertex");
                        for c in 1..=inst.q() {
                            let _ = write!(out, "\tcolor_{c}");
                        }
                        out.push('\n');
                        for (v, row) in t.iter().enumerate() {
                            let _ = write!(out, "{v}");
                            for p in row {
                                let _ = write!(out, "\t{}", sig12(*p));
                            }
                            out.push('\n');
                        }
                    }
                    print!("{out}");
                }
            }
        }
        Command::Marginal(a) => {
            let inst = load(&a.instance, a.model.params()?)?;
            if a.vertex >= inst.n() {
                return Err(Error::InvalidArgument(format!(
                    "vertex {} out of range (n = {})",
                    a.vertex,
                    inst.n()
                ))
                .into());
            }
            let depth = a.depth.resolve(inst.n())?;
            let est = marginal_distribution(&inst, a.vertex, depth, &a.budget.options())?;
            emit(json!({
                "vertex": est.vertex,
                "depth": est.depth,
                "marginals": est.marginals,
                "raw": est.raw,
                "diagnostics": est.diagnostics,
            }))?;
        }
        Command::Partition(a) => {
            let inst = load(&a.instance, a.model.params()?)?;
            let depth = a.depth.resolve(inst.n())?;
            let order = a
                .order_seed
                .map_or(AnchorOrder::Ascending, AnchorOrder::Shuffled);
            let est = estimate_partition(&inst, depth, order, &a.budget.options())?;
            emit(json!({
                "log_z": est.log_z,
                "z": est.z(),
                "depth": est.depth_used,
                "anchor_weight_log": est.anchor_weight_log,
                "anchor": est.anchor.iter().map(|&c| c as usize + 1).collect::<Vec<_>>(),
                "diagnostics": est.diagnostics,
            }))?;
        }
        Command::Sample(a) => {
            let inst = load(&a.instance, a.model.params()?)?;
            let depth = a.depth.resolve(inst.n())?;
            let batch = sample_batch(&inst, depth, a.seed, a.samples, &a.budget.options())?;
            let mut out = String::new();
            for s in &batch.samples {
                let line: Vec<String> = s
                    .colors
                    .iter()
                    .map(|&c| (c as usize + 1).to_string())
                    .collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
            print!("{out}");
            let min_mass = batch
                .samples
                .iter()
                .map(|s| s.min_pre_normalization_sum)
                .fold(f64::INFINITY, f64::min);
            let mut footer = json!({
                "samples": batch.samples.len(),
                "seed": batch.seed,
                "depth": batch.depth,
                "min_pre_normalization_sum": if min_mass.is_finite() { json!(min_mass) } else { Value::Null },
            });
            round_numbers(&mut footer);
            println!("{footer}");
        }
        Command::VerifyContraction(a) => {
            let params = a.model.params()?;
            let inst = load(&a.instance, params)?;
            let report =
                verify_contraction(inst.graph(), a.l_max, &|d| params.delta(d), a.walk_budget)?;
            if let Some(w) = &report.warning {
                eprintln!("warning: {w}");
            }
            emit(serde_json::to_value(report)?)?;
        }
        Command::VerifySparse(a) => {
            let params = a.model.params()?;
            let inst = load(&a.instance, params)?;
            let mode = match a.mode {
                ModeName::Exhaustive => SparsityMode::Exhaustive,
                ModeName::Sampled => SparsityMode::Sampled {
                    trials: a.trials,
                    seed: a.seed,
                },
            };
            emit(serde_json::to_value(verify_locally_sparse(
                inst.graph(),
                params,
                a.l_max,
                mode,
                a.path_budget,
            )?)?)?;
        }
        Command::VerifyGnp(a) => {
            let report =
                verify_gnp_properties(a.n, a.d, a.model.params()?, a.seed, a.l_max, a.trials)?;
            if let Some(w) = &report.contraction.warning {
                eprintln!("warning: {w}");
            }
            emit(serde_json::to_value(report)?)?;
        }
        Command::ExpectedContraction(a) => {
            let params = a.model.params()?;
            let value = expected_contraction(a.n, a.delta, params)?;
            emit(json!({
                "n": a.n,
                "delta": a.delta,
                "q": params.q,
                "beta": a.model.beta,
                "value": value,
                "inverse_delta": 1.0 / a.delta,
                "below_inverse_delta": value < 1.0 / a.delta,
            }))?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Infeasible(_)) => 3,
        Some(Error::Budget(_)) => 4,
        Some(Error::Invariant(_)) => 5,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
