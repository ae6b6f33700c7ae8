//! `netfactor` command-line front end.
//!
//! Exit status: 0 success, 1 clean negative (mismatch, no hit, fidelity below
//! threshold), 2 input or usage error.

mod scenario;

use clap::{Args, Parser, Subcommand};
use netfactor::io;
use netfactor::network::CanonicalInstance;
use netfactor::rank::{
    forced_row_combination, nonneg_rank_bounds, numerical_rank, BoundsConfig, ForcedCombination, LowerWitness,
    DEFAULT_RANK_TOL,
};
use netfactor::search::{
    als_search, square_cross_reduced_search, square_cross_task, square_network, SearchConfig, NO_HIT_BANNER,
};
use netfactor::sim::{
    client_state, fidelity, forward_flow, lifted_success_probability, project_assignment, run_protocol,
    BranchPolicy,
};
use netfactor::verify::{verify_assignment, DEFAULT_TOL};
use netfactor::{DenseTensor, Domain, Error, Result, Scalar};
use scenario::{scenario, Scenario, SCENARIOS};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "netfactor", version, about = "Tensor-factorization analysis of distribution tasks over networks")]
struct Cli {
    /// Worker threads for multi-start searches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List built-in scenarios and instances, or export one as JSON files.
    Instances(InstancesArgs),
    /// Check that an assignment realizes a task.
    Verify(VerifyArgs),
    /// Multi-start search for a factorization.
    Search(SearchArgs),
    /// Rank, non-negative rank bounds and witnesses of a matrix.
    Analyze(AnalyzeArgs),
    /// Run a protocol, or project an assignment, and report client states.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct Inputs {
    /// Built-in scenario supplying any input not given as a file.
    #[arg(long)]
    builtin: Option<String>,
    #[arg(long)]
    network: Option<PathBuf>,
    #[arg(long)]
    task: Option<PathBuf>,
    /// Report destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InstancesArgs {
    #[arg(long)]
    builtin: Option<String>,
    /// Canonical instance to print as network JSON, e.g. `square:2,2`.
    #[arg(long)]
    instance: Option<String>,
    /// Directory for exported scenario files, or file for an instance.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    assignment: Option<PathBuf>,
    /// Relative residual accepted as a match.
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Scalar domain; defaults to the task's.
    #[arg(long)]
    domain: Option<Domain>,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, env = "NETFACTOR_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    max_sweeps: usize,
    /// Relative residual counted as a hit.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    /// Search the fifteen-parameter reduced family of the square cross task.
    #[arg(long)]
    reduced: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    builtin: Option<String>,
    /// Matrix in task format with two clients (rows, columns).
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative singular-value threshold.
    #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
    tol: f64,
    /// Skip the non-negative analysis.
    #[arg(long)]
    rank_only: bool,
    #[arg(long, default_value_t = 100)]
    restarts: usize,
    #[arg(long, env = "NETFACTOR_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long)]
    assignment: Option<PathBuf>,
    #[arg(long)]
    protocol: Option<PathBuf>,
    /// Branches pass when fidelity to the task is at least `1 - tol`.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also compare classical and quantum success probabilities of the
    /// assignment read as a deterministic protocol with uniform inputs.
    #[arg(long)]
    lifted: bool,
}

enum Outcome {
    Success,
    Negative,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Instances(a) => cmd_instances(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Search(a) => cmd_search(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_scenario(name: Option<&str>) -> Result<Scenario> {
    name.map(scenario).transpose().map(Option::unwrap_or_default)
}

fn pick<T>(file: Option<&Path>, read: impl Fn(&Path) -> Result<T>, builtin: Option<T>, what: &str) -> Result<T> {
    match file {
        Some(p) => read(p),
        None => builtin.ok_or_else(|| Error::InvalidParameter(format!("no {what} given"))),
    }
}

fn source_name(file: Option<&Path>, builtin: Option<&str>) -> String {
    match (file, builtin) {
        (Some(p), _) => p.display().to_string(),
        (None, Some(b)) => format!("builtin:{b}"),
        (None, None) => "-".into(),
    }
}

fn emit(out: Option<&Path>, report: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, report)?,
        None => print!("{report}"),
    }
    Ok(())
}

fn complex(z: Scalar) -> String {
    format!("{:.6e}{:+.6e}i", z.re, z.im)
}

fn cmd_instances(args: InstancesArgs) -> Result<Outcome> {
    if let Some(inst) = &args.instance {
        let which: CanonicalInstance = inst.parse()?;
        let net = netfactor::network::canonical_instance(which)?;
        emit(args.out.as_deref(), &io::network_json(&net)?)?;
        return Ok(Outcome::Success);
    }
    let Some(name) = &args.builtin else {
        let mut r = String::from("scenarios:\n");
        for (n, d) in SCENARIOS {
            writeln!(r, "  {n:<16}{d}").unwrap();
        }
        r.push_str("instances:\n");
        for n in ["single-edge:D", "channel:L,I,R", "butterfly", "square:DI,DC", "ternary-square", "star:N,D"] {
            writeln!(r, "  {n}").unwrap();
        }
        emit(args.out.as_deref(), &r)?;
        return Ok(Outcome::Success);
    };
    let s = scenario(name)?;
    let dir = args
        .out
        .ok_or_else(|| Error::InvalidParameter("--out directory required to export a scenario".into()))?;
    std::fs::create_dir_all(&dir)?;
    let mut written = String::new();
    let mut put = |file: &str, body: String| -> Result<()> {
        std::fs::write(dir.join(file), body)?;
        writeln!(written, "{file}").unwrap();
        Ok(())
    };
    if let Some(n) = &s.network {
        put("network.json", io::network_json(n)?)?;
    }
    if let Some(t) = &s.task {
        put("task.json", io::task_json(t)?)?;
    }
    if let Some(a) = &s.assignment {
        put("assignment.json", io::assignment_json(a)?)?;
    }
    if let Some(p) = &s.protocol {
        put("protocol.json", io::protocol_json(p)?)?;
    }
    if let Some(m) = &s.matrix {
        let doc = netfactor::task::task_from_matrix(m, m.domain())?;
        put("matrix.json", io::task_json(&doc)?)?;
    }
    print!("{written}");
    Ok(Outcome::Success)
}

fn cmd_verify(args: VerifyArgs) -> Result<Outcome> {
    let inp = &args.inputs;
    let s = load_scenario(inp.builtin.as_deref())?;
    let network = pick(inp.network.as_deref(), io::read_network, s.network, "network")?;
    let task = pick(inp.task.as_deref(), io::read_task, s.task, "task")?;
    let assignment = pick(args.assignment.as_deref(), io::read_assignment, s.assignment, "assignment")?;
    let report = verify_assignment(&network, &task, &assignment, args.tol)?;

    let mut r = String::from("command: verify\n");
    writeln!(r, "network: {}", source_name(inp.network.as_deref(), inp.builtin.as_deref())).unwrap();
    writeln!(r, "task: {}", source_name(inp.task.as_deref(), inp.builtin.as_deref())).unwrap();
    writeln!(r, "assignment: {}", source_name(args.assignment.as_deref(), inp.builtin.as_deref())).unwrap();
    writeln!(r, "domain: {}", task.domain()).unwrap();
    writeln!(r, "tol: {:e}", args.tol).unwrap();
    writeln!(r, "matched: {}", report.matched).unwrap();
    writeln!(r, "residual: {:.6e}", report.residual).unwrap();
    writeln!(r, "scale: {}", complex(report.scale)).unwrap();
    writeln!(r, "domain_violations: {}", report.domain_violations.len()).unwrap();
    for v in &report.domain_violations {
        writeln!(r, "  {v}").unwrap();
    }
    emit(inp.out.as_deref(), &r)?;
    Ok(if report.matched { Outcome::Success } else { Outcome::Negative })
}

fn cmd_search(args: SearchArgs) -> Result<Outcome> {
    let inp = &args.inputs;
    let s = load_scenario(inp.builtin.as_deref())?;
    let config = SearchConfig {
        restarts: args.restarts,
        max_sweeps: args.max_sweeps,
        seed: args.seed,
        success_tol: args.tol,
        ..SearchConfig::default()
    };
    let mut r = String::from("command: search\n");
    let result = if args.reduced {
        let network = inp.network.as_deref().map(io::read_network).transpose()?.or(s.network);
        let task = inp.task.as_deref().map(io::read_task).transpose()?.or(s.task);
        if network.is_some_and(|n| n != square_network()) || task.is_some_and(|t| t != square_cross_task()) {
            return Err(Error::InvalidParameter(
                "the reduced search applies only to the square cross task".into(),
            ));
        }
        writeln!(r, "mode: reduced square family").unwrap();
        square_cross_reduced_search(&config)?
    } else {
        let network = pick(inp.network.as_deref(), io::read_network, s.network, "network")?;
        let task = pick(inp.task.as_deref(), io::read_task, s.task, "task")?;
        let domain = args.domain.unwrap_or(task.domain());
        writeln!(r, "network: {}", source_name(inp.network.as_deref(), inp.builtin.as_deref())).unwrap();
        writeln!(r, "task: {}", source_name(inp.task.as_deref(), inp.builtin.as_deref())).unwrap();
        writeln!(r, "domain: {domain}").unwrap();
        als_search(&network, &task, domain, &config)?
    };
    writeln!(r, "restarts: {}", config.restarts).unwrap();
    writeln!(r, "seed: {}", config.seed).unwrap();
    writeln!(r, "max_sweeps: {}", config.max_sweeps).unwrap();
    writeln!(r, "success_tol: {:e}", config.success_tol).unwrap();
    writeln!(r, "hit: {}", result.hit).unwrap();
    writeln!(r, "best_restart: {}", result.best_restart).unwrap();
    writeln!(r, "best_residual: {:.6e}", result.best_residual).unwrap();
    if !result.hit {
        writeln!(r, "{NO_HIT_BANNER}").unwrap();
    }
    r.push('\n');
    r.push_str(&result.table());
    emit(inp.out.as_deref(), &r)?;
    Ok(if result.hit { Outcome::Success } else { Outcome::Negative })
}

fn matrix_rows(m: &DenseTensor) -> Vec<String> {
    let d = m.dims();
    (0..d[0])
        .map(|i| {
            (0..d[1])
                .map(|j| format!("{:.6e}", m.get(&[i, j]).expect("in range").re))
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect()
}

fn cmd_analyze(args: AnalyzeArgs) -> Result<Outcome> {
    let s = load_scenario(args.builtin.as_deref())?;
    let m = pick(
        args.matrix.as_deref(),
        |p| Ok(io::read_task(p)?.tensor().clone()),
        s.matrix,
        "matrix",
    )?;
    if m.rank() != 2 {
        return Err(Error::InvalidTask(format!("expected a matrix, got rank {}", m.rank())));
    }
    let mut r = String::from("command: analyze\n");
    writeln!(r, "matrix: {}", source_name(args.matrix.as_deref(), args.builtin.as_deref())).unwrap();
    let dims = m.dims();
    writeln!(r, "shape: {}x{}", dims[0], dims[1]).unwrap();
    let rank = numerical_rank(&m, args.tol)?;
    writeln!(r, "rank: {}", rank.rank).unwrap();
    let sv: Vec<String> = rank.singular_values.iter().map(|v| format!("{v:.6e}")).collect();
    writeln!(r, "singular_values: {}", sv.join(" ")).unwrap();

    let real = m.data().iter().all(|z| z.im == 0.0);
    if dims[0] == 4 && real {
        match forced_row_combination(&m, 1e-10) {
            Ok(ForcedCombination::Coefficients {
                lambda,
                mu,
                nu,
                residual,
                negative,
            }) => {
                writeln!(
                    r,
                    "forced_row_combination: lambda={lambda:.6e} mu={mu:.6e} nu={nu:.6e} residual={residual:.3e} negative={negative}"
                )
                .unwrap();
            }
            Ok(ForcedCombination::RowsDependent) => writeln!(r, "forced_row_combination: first rows dependent").unwrap(),
            Err(e) => writeln!(r, "forced_row_combination: none ({e})").unwrap(),
        }
    }
    if args.rank_only {
        emit(args.out.as_deref(), &r)?;
        return Ok(Outcome::Success);
    }

    let config = BoundsConfig {
        search: SearchConfig {
            restarts: args.restarts,
            seed: args.seed,
            ..SearchConfig::default()
        },
        rank_tol: args.tol,
    };
    let b = nonneg_rank_bounds(&m, &config)?;
    match &b.lower_witness {
        LowerWitness::Rank(_) => writeln!(r, "lower_witness: rank").unwrap(),
        LowerWitness::FoolingSet(fs) => {
            let cells: Vec<String> = fs.witness.iter().map(|(i, j)| format!("({i},{j})")).collect();
            writeln!(r, "lower_witness: fooling set of size {}: {}", fs.size, cells.join(" ")).unwrap();
        }
    }
    writeln!(r, "nonneg_rank_bounds: [{}, {}]", b.lower, b.upper).unwrap();
    writeln!(r, "inconclusive_gap: {}", b.inconclusive_gap).unwrap();
    writeln!(r, "upper_witness_left:").unwrap();
    for row in matrix_rows(&b.upper_witness.0) {
        writeln!(r, "  {row}").unwrap();
    }
    writeln!(r, "upper_witness_right:").unwrap();
    for row in matrix_rows(&b.upper_witness.1) {
        writeln!(r, "  {row}").unwrap();
    }
    emit(args.out.as_deref(), &r)?;
    Ok(Outcome::Success)
}

fn cmd_simulate(args: SimulateArgs) -> Result<Outcome> {
    let inp = &args.inputs;
    let s = load_scenario(inp.builtin.as_deref())?;
    let network = pick(inp.network.as_deref(), io::read_network, s.network, "network")?;
    let task = inp.task.as_deref().map(io::read_task).transpose()?.or(s.task);
    let protocol = args.protocol.as_deref().map(io::read_protocol).transpose()?;
    let protocol = protocol.or(if args.assignment.is_some() { None } else { s.protocol });
    let threshold = 1.0 - args.tol;
    let mut r = String::from("command: simulate\n");
    writeln!(r, "network: {}", source_name(inp.network.as_deref(), inp.builtin.as_deref())).unwrap();
    let mut pass = true;

    if let Some(steps) = protocol {
        writeln!(r, "mode: protocol ({} steps)", steps.len()).unwrap();
        let run = run_protocol(&network, &steps, &BranchPolicy::All)?;
        for (key, factor) in &run.normalizations {
            writeln!(r, "normalization {key}: {factor:.6e}").unwrap();
        }
        writeln!(r, "branches: {}", run.branches.len()).unwrap();
        for b in &run.branches {
            let record: Vec<String> = b.outcomes.iter().map(|(k, o)| format!("{k}={o}")).collect();
            write!(r, "branch [{}] probability={:.6e}", record.join(","), b.probability).unwrap();
            if let Some(t) = &task {
                let f = fidelity(&client_state(&b.state, &t.client_ids())?, t.tensor())?;
                write!(r, " fidelity={f:.12}").unwrap();
                pass &= f >= threshold;
            }
            r.push('\n');
        }
        writeln!(r, "total_probability: {:.12}", run.total_probability()).unwrap();
        pass &= !run.branches.is_empty();
    } else {
        let assignment = pick(args.assignment.as_deref(), io::read_assignment, s.assignment, "protocol or assignment")?;
        writeln!(r, "mode: projection").unwrap();
        let state = project_assignment(&network, &assignment)?;
        writeln!(r, "client_norm_sqr: {:.6e}", state.norm_sqr()).unwrap();
        if let Some(t) = &task {
            let f = fidelity(state.amplitudes(), t.tensor())?;
            writeln!(r, "fidelity: {f:.12}").unwrap();
            pass &= f >= threshold;
        }
        if args.lifted {
            let flow = forward_flow(&network);
            let sources: usize = network
                .clients()
                .iter()
                .filter(|c| network.client_edge(c).is_ok_and(|e| flow[&e.label] == **c))
                .map(|c| network.client_edge(c).map(|e| e.dim).unwrap_or(1))
                .product();
            let uniform = vec![1.0 / sources as f64; sources];
            let p = lifted_success_probability(&network, &assignment, &flow, &uniform)?;
            writeln!(r, "lifted_classical: {:.12}", p.classical).unwrap();
            writeln!(r, "lifted_contraction: {:.12}", p.contraction).unwrap();
            writeln!(r, "lifted_quantum: {:.12}", p.quantum).unwrap();
            pass &= p.agree(1e-10);
        }
    }
    writeln!(r, "pass: {pass}").unwrap();
    emit(inp.out.as_deref(), &r)?;
    Ok(if pass { Outcome::Success } else { Outcome::Negative })
}
