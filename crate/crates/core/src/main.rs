//! Command-line front end: every computation reachable with reproducible
//! seeds, CSV results on stdout, and a JSON run manifest on stderr (or a
//! file via --manifest).
//!
//! Exit codes: 0 success, 1 domain infeasibility (e.g. an unreachable
//! distortion budget), 2 input/schema/usage errors.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use isac_cd::coding::{self, DistortionVariant, SchemeConfig};
use isac_cd::estimator;
use isac_cd::gaussian::{self, DpcParams, FadingParams, QuadOpts, StateDist};
use isac_cd::model::{validate_model_json, IsacModel, Policy};
use isac_cd::solver::{self, AscentOpts, OptimizerMode, SolveOpts};
use isac_cd::spectrum::{self, AxisSplit, ProcessModel};

const EXIT_INFEASIBLE: i32 = 1;
const EXIT_INPUT: i32 = 2;

#[derive(Parser)]
#[command(name = "isac-cd", version, about = "Capacity-distortion analysis for action-dependent ISAC channels")]
struct Cli {
    /// Worker thread cap (default: all cores; env ISAC_CD_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Write the run manifest to this file instead of stderr.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a model file against the schema and report every violation.
    Validate(ValidateArgs),
    /// Solve for capacity at one or more distortion budgets.
    Capacity(CapacityArgs),
    /// Dump the optimal estimator table as CSV.
    Estimator(EstimatorArgs),
    /// Estimate spectral inf/sup information rates by simulation.
    Spectrum(SpectrumArgs),
    /// Closed-form Gaussian examples.
    #[command(subcommand)]
    Gaussian(GaussianCommand),
    /// Run the random-coding Monte Carlo experiment.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Model JSON file.
    model: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Exhaustive,
    Ascent,
}

#[derive(Args)]
struct CapacityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Single distortion budget.
    #[arg(long, conflicts_with = "dgrid")]
    d: Option<f64>,
    /// Budget grid start:stop:count (inclusive, strictly increasing).
    #[arg(long)]
    dgrid: Option<String>,
    /// Auxiliary alphabet size (default |X| * |S_e| + 1).
    #[arg(long)]
    u_size: Option<usize>,
    #[arg(long, value_enum, default_value = "ascent")]
    mode: ModeArg,
    /// Simplex grid resolution for the action distribution in exhaustive
    /// mode (grid step 1/resolution).
    #[arg(long, default_value_t = 20)]
    pa_grid: usize,
    /// Ascent restarts.
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Ascent iterations per restart.
    #[arg(long, default_value_t = 400)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the best policy of the last grid point to this JSON file.
    #[arg(long)]
    save_policy: Option<PathBuf>,
}

#[derive(Args)]
struct EstimatorArgs {
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long)]
    model: PathBuf,
    /// Policy JSON; uniform when omitted.
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Tail mass for the quantile surrogate.
    #[arg(long, default_value_t = 0.005)]
    delta: f64,
    /// Comma-separated joint axes for the input block.
    #[arg(long, default_value = "a,u")]
    axes_a: String,
    /// Comma-separated joint axes for the output block.
    #[arg(long, default_value = "y,s_d")]
    axes_b: String,
    /// Optional conditioning axes.
    #[arg(long)]
    axes_c: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write raw density samples (one per line) to this CSV file.
    #[arg(long)]
    samples_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GaussianCommand {
    /// Dirty-paper boundary point of the additive-interference channel.
    Dpc(DpcArgs),
    /// Capacity-distortion curve of the ergodic fading channel.
    Fading(FadingArgs),
    /// Inner bound for a two-component fading mixture.
    MixedFading(MixedFadingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Units {
    Nats,
    Bits,
}

impl Units {
    fn convert(&self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / std::f64::consts::LN_2,
        }
    }

    fn label(&self) -> &'static str {
        match self {
            Units::Nats => "nats",
            Units::Bits => "bits",
        }
    }
}

#[derive(Args)]
struct DpcArgs {
    #[arg(long)]
    px: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long = "sigma-z")]
    sigma_z: f64,
    #[arg(long = "sigma-e")]
    sigma_e: f64,
    #[arg(long = "sigma-s")]
    sigma_s: f64,
    #[arg(long, value_enum, default_value = "nats")]
    units: Units,
}

#[derive(Args)]
struct FadingArgs {
    #[arg(long)]
    px: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long = "sigma-z")]
    sigma_z: f64,
    #[arg(long = "sigma-s")]
    sigma_s: f64,
    /// State distribution: `gaussian[:variance]` or `points:v@p,v@p,...`.
    #[arg(long, default_value = "gaussian")]
    dist: String,
    /// Distortion grid start:stop:count.
    #[arg(long)]
    dgrid: String,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long, value_enum, default_value = "nats")]
    units: Units,
}

#[derive(Args)]
struct MixedFadingArgs {
    #[arg(long)]
    px: f64,
    #[arg(long)]
    sigma: f64,
    #[arg(long = "sigma-z")]
    sigma_z: f64,
    #[arg(long = "sigma-s1")]
    sigma_s1: f64,
    #[arg(long = "sigma-s2")]
    sigma_s2: f64,
    #[arg(long, default_value = "gaussian")]
    dist1: String,
    #[arg(long, default_value = "gaussian")]
    dist2: String,
    /// Weight of the first component.
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    dgrid: String,
    #[arg(long, default_value_t = 64)]
    nodes: usize,
    #[arg(long, value_enum, default_value = "nats")]
    units: Units,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    Average,
    Maximal,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long)]
    n: usize,
    /// Message rate in bits/symbol; default objective - 4 gamma.
    #[arg(long)]
    rate_bits: Option<f64>,
    /// Bin rate in bits/symbol; default leakage + 2 gamma.
    #[arg(long)]
    bin_rate_bits: Option<f64>,
    /// Threshold slack in nats.
    #[arg(long, default_value_t = 0.05)]
    gamma: f64,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "average")]
    variant: VariantArg,
    /// Distortion target for the tail summary (default: the policy's
    /// single-letter distortion).
    #[arg(long)]
    d_target: Option<f64>,
    /// Monte Carlo samples for eta values beyond the enumeration cap.
    #[arg(long, default_value_t = 2000)]
    eta_mc: usize,
}

fn main() {
    let started = Instant::now();
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();

    let threads = cli
        .threads
        .or_else(|| {
            std::env::var("ISAC_CD_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    if threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let (subcommand, seed, outcome) = match &cli.command {
        Command::Validate(args) => ("validate", None, run_validate(args)),
        Command::Capacity(args) => ("capacity", Some(args.seed), run_capacity(args)),
        Command::Estimator(args) => ("estimator", None, run_estimator(args)),
        Command::Spectrum(args) => ("spectrum", Some(args.seed), run_spectrum(args)),
        Command::Gaussian(cmd) => match cmd {
            GaussianCommand::Dpc(args) => ("gaussian dpc", None, run_dpc(args)),
            GaussianCommand::Fading(args) => ("gaussian fading", None, run_fading(args)),
            GaussianCommand::MixedFading(args) => {
                ("gaussian mixed-fading", None, run_mixed_fading(args))
            }
        },
        Command::Simulate(args) => ("simulate", Some(args.seed), run_simulate(args)),
    };

    let (exit, output) = match outcome {
        Ok(csv) => (0, csv),
        Err(e) => {
            eprintln!("error: {}", e.message);
            (e.exit, String::new())
        }
    };
    // headers are only written after the computation succeeded, so failed
    // runs never emit partial CSV
    print!("{output}");

    let manifest = serde_json::json!({
        "tool": "isac-cd",
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": subcommand,
        "argv": argv,
        "seed": seed,
        "duration_seconds": started.elapsed().as_secs_f64(),
        "exit_code": exit,
    });
    let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    match &cli.manifest {
        Some(path) => {
            if let Err(e) = std::fs::write(path, manifest) {
                eprintln!("error: cannot write manifest: {e}");
            }
        }
        None => eprintln!("{manifest}"),
    }
    std::process::exit(exit);
}

struct CliError {
    exit: i32,
    message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_INPUT,
            message: message.into(),
        }
    }

    fn infeasible(message: impl Into<String>) -> Self {
        Self {
            exit: EXIT_INFEASIBLE,
            message: message.into(),
        }
    }
}

type CliResult = Result<String, CliError>;

fn load_model(path: &PathBuf) -> Result<IsacModel, CliError> {
    IsacModel::load(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn fmt(v: f64) -> String {
    format!("{v:.10}")
}

fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(CliError::input(format!(
            "grid `{spec}` must be start:stop:count"
        )));
    }
    let start: f64 = parts[0]
        .parse()
        .map_err(|_| CliError::input(format!("bad grid start `{}`", parts[0])))?;
    let stop: f64 = parts[1]
        .parse()
        .map_err(|_| CliError::input(format!("bad grid stop `{}`", parts[1])))?;
    let count: usize = parts[2]
        .parse()
        .map_err(|_| CliError::input(format!("bad grid count `{}`", parts[2])))?;
    if count == 0 || (count > 1 && stop <= start) {
        return Err(CliError::input(format!("grid `{spec}` must increase")));
    }
    Ok((0..count)
        .map(|i| {
            if count == 1 {
                start
            } else {
                start + (stop - start) * i as f64 / (count - 1) as f64
            }
        })
        .collect())
}

fn parse_state_dist(spec: &str, sigma_s: f64) -> Result<StateDist, CliError> {
    if spec == "gaussian" {
        return Ok(StateDist::Gaussian { variance: sigma_s });
    }
    if let Some(var) = spec.strip_prefix("gaussian:") {
        let variance: f64 = var
            .parse()
            .map_err(|_| CliError::input(format!("bad gaussian variance `{var}`")))?;
        return Ok(StateDist::Gaussian { variance });
    }
    if let Some(points) = spec.strip_prefix("points:") {
        let mut support = Vec::new();
        for pair in points.split(',') {
            let (v, p) = pair
                .split_once('@')
                .ok_or_else(|| CliError::input(format!("bad point `{pair}`, want value@prob")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| CliError::input(format!("bad point value `{v}`")))?;
            let p: f64 = p
                .parse()
                .map_err(|_| CliError::input(format!("bad point probability `{p}`")))?;
            support.push((v, p));
        }
        return Ok(StateDist::Finite(support));
    }
    Err(CliError::input(format!(
        "state distribution `{spec}` must be gaussian[:variance] or points:v@p,..."
    )))
}

fn run_validate(args: &ValidateArgs) -> CliResult {
    let text = std::fs::read_to_string(&args.model)
        .map_err(|e| CliError::input(format!("{}: {e}", args.model.display())))?;
    let report = validate_model_json(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", args.model.display())))?;
    let mut out = String::from("path,message\n");
    for v in &report.violations {
        writeln!(out, "{},{}", v.path, v.message.replace(',', ";")).unwrap();
    }
    if report.is_empty() {
        Ok(out)
    } else {
        // print the report, then fail with an input error
        print!("{out}");
        Err(CliError::input(format!(
            "{} violated {} invariant(s)",
            args.model.display(),
            report.violations.len()
        )))
    }
}

fn run_capacity(args: &CapacityArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let grid = match (&args.d, &args.dgrid) {
        (Some(d), None) => vec![*d],
        (None, Some(spec)) => parse_grid(spec)?,
        _ => return Err(CliError::input("provide exactly one of --d or --dgrid")),
    };
    let mode = match args.mode {
        ModeArg::Exhaustive => OptimizerMode::Exhaustive {
            p_a_grid: args.pa_grid,
        },
        ModeArg::Ascent => OptimizerMode::Ascent(AscentOpts {
            restarts: args.restarts,
            iters: args.iters,
            ..AscentOpts::default()
        }),
    };
    let opts = SolveOpts {
        u_size: args.u_size,
        mode,
        seed: args.seed,
        ..SolveOpts::default()
    };
    let mode_name = match args.mode {
        ModeArg::Exhaustive => "exhaustive",
        ModeArg::Ascent => "ascent",
    };
    let restarts = match args.mode {
        ModeArg::Exhaustive => 0,
        ModeArg::Ascent => args.restarts,
    };

    let mut out = String::from("D,C_nats,C_bits,feasible,optimizer_mode,restarts_used,seed\n");
    let mut last_policy: Option<Policy> = None;
    let curve = solver::cd_curve(&model, &grid, &opts).map_err(map_solve_err)?;
    for p in &curve.points {
        writeln!(
            out,
            "{},{},{},true,{},{},{}",
            fmt(p.d),
            fmt(p.c_nats),
            fmt(p.c_nats / std::f64::consts::LN_2),
            mode_name,
            restarts,
            args.seed
        )
        .unwrap();
        last_policy = Some(p.policy.clone());
    }
    if let (Some(path), Some(policy)) = (&args.save_policy, &last_policy) {
        std::fs::write(path, policy.to_json(&model))
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

fn map_solve_err(e: solver::SolveError) -> CliError {
    match e {
        solver::SolveError::Infeasible { .. } => CliError::infeasible(e.to_string()),
        other => CliError::input(other.to_string()),
    }
}

fn run_estimator(args: &EstimatorArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let opt = estimator::optimal_estimator(&model);
    let al = &model.alphabets;
    let mut out = String::from("a,x,s_e,z,s_hat,posterior_expected_d\n");
    let mut flat = 0;
    for a in 0..al.a {
        for x in 0..al.x {
            for s_e in 0..al.s_e {
                for z in 0..al.z {
                    writeln!(
                        out,
                        "{a},{x},{s_e},{z},{},{}",
                        opt.table.get(a, x, s_e, z),
                        fmt(opt.posterior_expected[flat])
                    )
                    .unwrap();
                    flat += 1;
                }
            }
        }
    }
    if !opt.unreachable.is_empty() {
        eprintln!(
            "note: {} observation tuple(s) are unreachable and fall back to s_hat = 0:",
            opt.unreachable.len()
        );
        for (a, x, s_e, z) in &opt.unreachable {
            eprintln!("  a={a} x={x} s_e={s_e} z={z}");
        }
    }
    Ok(out)
}

fn parse_axes(spec: &str) -> Vec<String> {
    spec.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn run_spectrum(args: &SpectrumArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let policy = match &args.policy {
        Some(path) => Policy::load(path, &model)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?,
        None => Policy::uniform(&model, model.alphabets.x * model.alphabets.s_e + 1),
    };
    let joint = model
        .assemble_joint(&policy)
        .map_err(|e| CliError::input(e.to_string()))?;
    let a = parse_axes(&args.axes_a);
    let b = parse_axes(&args.axes_b);
    let a_refs: Vec<&str> = a.iter().map(|s| s.as_str()).collect();
    let b_refs: Vec<&str> = b.iter().map(|s| s.as_str()).collect();
    let split = match &args.axes_c {
        Some(c) => {
            let c = parse_axes(c);
            let c_refs: Vec<&str> = c.iter().map(|s| s.as_str()).collect();
            AxisSplit::conditional(&a_refs, &b_refs, &c_refs)
        }
        None => AxisSplit::new(&a_refs, &b_refs),
    };
    let process = ProcessModel::Iid { joint, split };

    let mut out =
        String::from("n,samples,delta,inf_rate_nats,sup_rate_nats,mean_density_nats,sd_density\n");
    // the requested delta plus the fixed sensitivity pair
    let mut deltas = vec![args.delta, 0.001, 0.01];
    deltas.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    for delta in deltas {
        let est = spectrum::estimate_spectral_rates(&process, args.n, args.samples, delta, args.seed)
            .map_err(|e| CliError::input(e.to_string()))?;
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            est.n,
            est.samples,
            delta,
            fmt(est.inf_rate),
            fmt(est.sup_rate),
            fmt(est.mean_density),
            fmt(est.sd_density)
        )
        .unwrap();
    }
    if let Some(path) = &args.samples_out {
        let samples = spectrum::density_samples(&process, args.n, args.samples, args.seed)
            .map_err(|e| CliError::input(e.to_string()))?;
        let mut body = String::from("density_nats\n");
        for s in samples {
            writeln!(body, "{}", fmt(s)).unwrap();
        }
        std::fs::write(path, body)
            .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

fn run_dpc(args: &DpcArgs) -> CliResult {
    let params = DpcParams {
        p_x: args.px,
        sigma: args.sigma,
        sigma_z: args.sigma_z,
        sigma_e: args.sigma_e,
        sigma_s: args.sigma_s,
    };
    let b = gaussian::dpc_boundary(&params).map_err(|e| CliError::input(e.to_string()))?;
    let u = args.units;
    let mut out = format!(
        "rate_{},distortion,coeff_z,coeff_x,coeff_se\n",
        u.label()
    );
    writeln!(
        out,
        "{},{},{},{},{}",
        fmt(u.convert(b.rate)),
        fmt(b.distortion),
        fmt(b.coeff_z),
        fmt(b.coeff_x),
        fmt(b.coeff_se)
    )
    .unwrap();
    Ok(out)
}

fn run_fading(args: &FadingArgs) -> CliResult {
    let params = FadingParams {
        p_x: args.px,
        sigma: args.sigma,
        sigma_z: args.sigma_z,
        sigma_s: args.sigma_s,
        s_dist: parse_state_dist(&args.dist, args.sigma_s)?,
    };
    let grid = parse_grid(&args.dgrid)?;
    let quad = QuadOpts {
        nodes: args.nodes,
        ..QuadOpts::default()
    };
    let curve =
        gaussian::fading_cd_curve(&params, &grid, &quad).map_err(map_gaussian_err)?;
    let u = args.units;
    let mut out = format!("D,C_{},alpha_star,feasible\n", u.label());
    for p in &curve.points {
        if p.feasible {
            writeln!(
                out,
                "{},{},{},true",
                fmt(p.d),
                fmt(u.convert(p.c_nats)),
                fmt(p.alpha_star)
            )
            .unwrap();
        } else {
            writeln!(out, "{},,,false", fmt(p.d)).unwrap();
        }
    }
    Ok(out)
}

fn map_gaussian_err(e: gaussian::GaussianError) -> CliError {
    match e {
        gaussian::GaussianError::Infeasible { .. } => CliError::infeasible(e.to_string()),
        other => CliError::input(other.to_string()),
    }
}

fn run_mixed_fading(args: &MixedFadingArgs) -> CliResult {
    let p1 = FadingParams {
        p_x: args.px,
        sigma: args.sigma,
        sigma_z: args.sigma_z,
        sigma_s: args.sigma_s1,
        s_dist: parse_state_dist(&args.dist1, args.sigma_s1)?,
    };
    let p2 = FadingParams {
        p_x: args.px,
        sigma: args.sigma,
        sigma_z: args.sigma_z,
        sigma_s: args.sigma_s2,
        s_dist: parse_state_dist(&args.dist2, args.sigma_s2)?,
    };
    let grid = parse_grid(&args.dgrid)?;
    let quad = QuadOpts {
        nodes: args.nodes,
        ..QuadOpts::default()
    };
    let u = args.units;
    let mut out = format!("D,C_{},alpha_star,feasible\n", u.label());
    for &d in &grid {
        match gaussian::mixed_fading_rate(&p1, &p2, args.beta, d, &quad) {
            Ok(point) => writeln!(
                out,
                "{},{},{},true",
                fmt(d),
                fmt(u.convert(point.c_nats)),
                fmt(point.alpha_star)
            )
            .unwrap(),
            Err(gaussian::GaussianError::Infeasible { .. }) => {
                writeln!(out, "{},,,false", fmt(d)).unwrap();
            }
            Err(e) => return Err(CliError::input(e.to_string())),
        }
    }
    Ok(out)
}

fn run_simulate(args: &SimulateArgs) -> CliResult {
    let model = load_model(&args.model)?;
    let policy = Policy::load(&args.policy, &model)
        .map_err(|e| CliError::input(format!("{}: {e}", args.policy.display())))?;
    let report = solver::evaluate_policy(&model, &policy)
        .map_err(|e| CliError::input(e.to_string()))?;
    let ln2 = std::f64::consts::LN_2;
    let rate_bits = args
        .rate_bits
        .unwrap_or(((report.objective - 4.0 * args.gamma) / ln2).max(0.01));
    let bin_rate_bits = args
        .bin_rate_bits
        .unwrap_or((report.i_use + 2.0 * args.gamma) / ln2);
    let variant = match args.variant {
        VariantArg::Average => DistortionVariant::Average,
        VariantArg::Maximal => DistortionVariant::Maximal,
    };
    let config = SchemeConfig {
        model,
        policy,
        n: args.n,
        rate_bits,
        bin_rate_bits,
        gamma: args.gamma,
        trials: args.trials,
        seed: args.seed,
        variant,
        eta_mc_samples: args.eta_mc,
    };
    let d_target = args.d_target.unwrap_or(report.distortion);
    let exp = coding::run_experiment(&config, d_target).map_err(|e| match e {
        coding::CodingError::ResourceCap { .. } => CliError::input(e.to_string()),
        other => CliError::input(other.to_string()),
    })?;

    let mut out = String::from("trial,decoded_ok,distortion,in_B\n");
    for (t, o) in exp.outcomes.iter().enumerate() {
        writeln!(
            out,
            "{t},{},{},{}",
            o.decoded_ok as u8,
            fmt(o.distortion),
            o.in_b as u8
        )
        .unwrap();
    }
    out.push('\n');
    out.push_str("metric,value\n");
    let tail = exp.distortion_tail_fraction(d_target + args.gamma);
    for (k, v) in [
        ("n", exp.n as f64),
        ("messages", exp.messages as f64),
        ("bin_size", exp.bin_size as f64),
        ("rate_bits", rate_bits),
        ("bin_rate_bits", bin_rate_bits),
        ("gamma_nats", args.gamma),
        ("error_rate", exp.error_rate),
        ("mean_distortion", exp.mean_distortion),
        ("bin_failure_rate", exp.bin_failure_rate),
        ("d_target", d_target),
        ("tail_fraction_at_d_plus_gamma", tail),
        ("t1_threshold_nats", exp.t1_threshold),
        ("b1_threshold", exp.b1_threshold),
        ("b2_threshold", exp.b2_threshold),
        ("single_letter_distortion", exp.dbar),
    ] {
        writeln!(out, "{k},{}", fmt(v)).unwrap();
    }
    writeln!(out, "threshold_note,{}", exp.threshold_note.replace(',', ";")).unwrap();
    Ok(out)
}
