//! Command-line front end: parameter solving, experiment runs, manipulation
//! attacks, exact privacy audits, and top-t post-processing.
//!
//! Exit codes: 0 on success, 1 on i/o or input-file errors, 2 on infeasible
//! or out-of-regime parameters.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use shufflehist::adversary::{self, AttackSpec, Strategy};
use shufflehist::audit;
use shufflehist::error::{Error, Result};
use shufflehist::harness::{
    self, dump_first_trial_messages, run_experiment, ExecMode, ExperimentConfig, Protocol,
};
use shufflehist::params::{self, Mode};
use shufflehist::protocol::{Dataset, ProtocolParams};
use shufflehist::topk;

#[derive(Parser)]
#[command(
    name = "shufflehist",
    about = "Shuffle-model differentially private histograms: simulate, solve, audit, attack",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve for the flip probability and error bounds at a given budget.
    SolveParams(SolveArgs),
    /// Run a multi-trial protocol experiment and emit CSV/JSON results.
    Run(RunArgs),
    /// Run coupled honest/corrupted executions under a manipulation attack.
    Attack(AttackArgs),
    /// Exact privacy audit of the reduced mechanism over a parameter grid.
    AuditPrivacy(AuditArgs),
    /// Top-t selection metrics from a prior run's JSON output.
    Topk(TopkArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    #[arg(long)]
    n: usize,
    /// Fabricated messages per user; defaults to the smallest feasible value.
    #[arg(long)]
    k: Option<u32>,
    /// per-bin | max
    #[arg(long, default_value = "per-bin")]
    mode: String,
    /// Dimension (required for --mode max).
    #[arg(long)]
    d: Option<usize>,
    /// Confidence level override (default 1/10 per-bin, 1/(10 d) max).
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Args)]
struct DatasetArgs {
    /// Vocabulary file, one token per line (line number = bin id).
    #[arg(long, requires = "records", conflicts_with = "zipf")]
    vocab: Option<PathBuf>,
    /// Record file, one token per line.
    #[arg(long, requires = "vocab")]
    records: Option<PathBuf>,
    /// Skip unknown record tokens instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Synthetic Zipf dataset: N,D,S (users, bins, exponent).
    #[arg(long)]
    zipf: Option<String>,
}

impl DatasetArgs {
    fn load(&self, seed: u64) -> Result<(Dataset, String, usize)> {
        match (&self.zipf, &self.vocab, &self.records) {
            (Some(spec), None, None) => {
                let parts: Vec<&str> = spec.split(',').collect();
                if parts.len() != 3 {
                    return Err(Error::Parse(format!("--zipf wants N,D,S, got {spec:?}")));
                }
                let n: usize = parse_num(parts[0], "zipf N")?;
                let d: usize = parse_num(parts[1], "zipf D")?;
                let s: f64 = parts[2]
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad zipf exponent {:?}", parts[2])))?;
                let data = harness::synth_zipf(n, d, s, seed)?;
                Ok((data, format!("zipf:{n},{d},{s},seed={seed}"), 0))
            }
            (None, Some(vocab), Some(records)) => {
                let corpus = harness::load_corpus(vocab, records, self.lenient)?;
                let label = format!("corpus:{}", vocab.display());
                let skipped = corpus.skipped;
                Ok((corpus.dataset, label, skipped))
            }
            _ => Err(Error::Parse(
                "provide either --zipf N,D,S or --vocab F --records F".into(),
            )),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// flip | flip2 | flip3 | had | flip-amplified
    #[arg(long)]
    protocol: String,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Comma-separated k sweep; defaults to the smallest feasible k.
    #[arg(long)]
    k: Option<String>,
    /// Hash repetitions (flip3 only); defaults to ceil(log2 d).
    #[arg(long)]
    v: Option<u32>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Output prefix; writes <PREFIX>.csv and <PREFIX>.json.
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated top-t sizes to evaluate inline.
    #[arg(long)]
    t: Option<String>,
    /// auto | messages | columns
    #[arg(long, default_value = "auto")]
    exec: String,
    /// Per-trial in-memory message budget in bytes.
    #[arg(long, default_value_t = 1 << 30)]
    max_bytes: u64,
    /// Force storing per-trial estimates in the JSON (for `topk`).
    #[arg(long)]
    store_estimates: bool,
    /// Confidence-floor override for the maximum-error schedule.
    #[arg(long)]
    beta: Option<f64>,
    /// Write the first trial's shuffled messages in sparse text form.
    #[arg(long)]
    dump_messages: Option<PathBuf>,
    /// Attack to run inside the experiment (honest-lie | flood-bit | had-flood).
    #[arg(long, requires = "attack_target", requires = "attack_m")]
    attack_strategy: Option<String>,
    #[arg(long)]
    attack_target: Option<u32>,
    #[arg(long)]
    attack_m: Option<usize>,
}

#[derive(Args)]
struct AttackArgs {
    /// flip | had
    #[arg(long)]
    protocol: String,
    /// honest-lie | flood-bit | had-flood
    #[arg(long)]
    strategy: String,
    /// Target bin (1-based).
    #[arg(long)]
    target: u32,
    /// Coalition size.
    #[arg(long)]
    m: usize,
    #[arg(long)]
    eps: f64,
    #[arg(long)]
    delta: f64,
    /// Fabricated messages per user (flip; defaults to smallest feasible).
    #[arg(long)]
    k: Option<u32>,
    #[arg(long, default_value_t = 1000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    dataset: DatasetArgs,
    /// Output prefix; writes <PREFIX>.csv and <PREFIX>.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AuditArgs {
    /// Largest noise size m to audit.
    #[arg(long, default_value_t = 200)]
    m_max: u64,
    #[arg(long, default_value_t = 25)]
    m_min: u64,
    #[arg(long, default_value_t = 25)]
    m_step: u64,
    /// Grid, e.g. "q=0.2,0.3,0.45,eps=1,2,delta=0.01,0.005".
    #[arg(long)]
    grid: String,
    /// Enumeration cap override (default 200).
    #[arg(long)]
    cap: Option<usize>,
    /// Also run the concentration and pointwise-domination checks.
    #[arg(long)]
    full: bool,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TopkArgs {
    /// Comma-separated candidate-set sizes.
    #[arg(long)]
    t: String,
    /// A prior run's JSON output (must contain stored estimates).
    #[arg(long)]
    input: PathBuf,
    /// Output CSV path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad {what}: {s:?}")))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_num(t, what))
        .collect()
}

fn parse_mode(mode: &str, d: Option<usize>) -> Result<Mode> {
    match mode {
        "per-bin" => Ok(Mode::PerBin),
        "max" => {
            let d = d.ok_or_else(|| Error::Parse("--mode max requires --d".into()))?;
            Ok(Mode::Maximum { d })
        }
        other => Err(Error::Parse(format!("unknown mode {other:?}"))),
    }
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "honest-lie" => Ok(Strategy::HonestLie),
        "flood-bit" => Ok(Strategy::FloodBit),
        "had-flood" => Ok(Strategy::HadFlood),
        other => Err(Error::Parse(format!("unknown strategy {other:?}"))),
    }
}

fn parse_exec(s: &str) -> Result<ExecMode> {
    match s {
        "auto" => Ok(ExecMode::Auto),
        "messages" => Ok(ExecMode::Messages),
        "columns" => Ok(ExecMode::Columns),
        other => Err(Error::Parse(format!("unknown exec mode {other:?}"))),
    }
}

fn cmd_solve(args: SolveArgs) -> Result<()> {
    let mode = parse_mode(&args.mode, args.d)?;
    let k = match args.k {
        Some(k) => k,
        None => params::min_k(args.eps, args.delta, args.n, mode)?,
    };
    let sol = params::solve_q_with_beta(args.eps, args.delta, args.n, k, mode, args.beta)?;
    let mut out = serde_json::json!({
        "eps": args.eps,
        "delta": args.delta,
        "n": args.n,
        "mode": args.mode,
        "k": sol.k,
        "min_k": params::min_k(args.eps, args.delta, args.n, mode)?,
        "q": sol.q,
        "q_hat": sol.q_hat,
        "q_tilde": sol.q_tilde,
        "scale": sol.scale,
        "beta": sol.beta,
        "bound": sol.bound,
    });
    if matches!(mode, Mode::PerBin) {
        out["bound_tight"] = serde_json::json!(params::error_bound_per_bin_tight(
            args.eps, args.delta, args.n, k
        )?);
    }
    println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let protocol = Protocol::parse(&args.protocol)?;
    let (data, label, skipped) = args.dataset.load(args.seed)?;
    let mut config = ExperimentConfig::new(protocol, args.eps, args.delta, args.seed);
    config.trials = args.trials;
    config.v_count = args.v;
    config.beta = args.beta;
    config.exec = parse_exec(&args.exec)?;
    config.max_message_bytes = args.max_bytes;
    if args.store_estimates {
        config.store_estimates = Some(true);
    }
    if let Some(ks) = &args.k {
        config.k_list = parse_list(ks, "k")?;
    }
    if let Some(ts) = &args.t {
        config.t_list = parse_list(ts, "t")?;
    }
    if let Some(strategy) = &args.attack_strategy {
        config.attack = Some(AttackSpec {
            target: args.attack_target.expect("clap requires"),
            m: args.attack_m.expect("clap requires"),
            strategy: parse_strategy(strategy)?,
        });
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} unknown records (lenient mode)");
    }
    if let Some(path) = &args.dump_messages {
        dump_first_trial_messages(&config, &data, path)?;
        eprintln!("wrote messages to {}", path.display());
    }
    let result = run_experiment(&config, &data, &label)?;
    let (csv, json) = harness::write_outputs(&result, &args.out)?;
    for resolved in &result.meta.resolved {
        let rows: Vec<f64> = result
            .rows
            .iter()
            .filter(|r| r.k == resolved.k)
            .map(|r| r.max_error)
            .collect();
        eprintln!(
            "{} k={} q={} median max error {:.6} bound {}",
            resolved.protocol,
            resolved.k,
            resolved.q.map(|q| format!("{q:.6}")).unwrap_or_default(),
            shufflehist::stats::median(&rows),
            resolved
                .bound
                .map(|b| format!("{b:.6}"))
                .unwrap_or_default(),
        );
    }
    eprintln!("wrote {} and {}", csv.display(), json.display());
    Ok(())
}

fn cmd_attack(args: AttackArgs) -> Result<()> {
    let strategy = parse_strategy(&args.strategy)?;
    let (data, label, _) = args.dataset.load(args.seed)?;
    let (n, d) = (data.n(), data.d());
    let spec = AttackSpec {
        target: args.target,
        m: args.m,
        strategy,
    };
    let mut csv = String::from("# shufflehist-attack v1\n");
    csv.push_str("trial,protocol,strategy,m,z_target_honest,z_target_corrupt,bias,bound\n");
    let meta;
    match (args.protocol.as_str(), strategy) {
        ("flip", Strategy::HonestLie | Strategy::FloodBit) => {
            let mode = Mode::Maximum { d };
            let k = match args.k {
                Some(k) => k,
                None => params::min_k(args.eps, args.delta, n, mode)?,
            };
            let sol = params::solve_q(args.eps, args.delta, n, k, mode)?;
            let params = ProtocolParams::new(n, d, args.eps, args.delta, k, sol.q)?;
            let report =
                adversary::run_attacked_flip(&data, &params, &spec, args.seed, args.trials)?;
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},flip,{},{},{},{},{},{}\n",
                    row.trial,
                    args.strategy,
                    args.m,
                    row.z_honest,
                    row.z_corrupt,
                    row.bias,
                    report.bound
                ));
            }
            meta = serde_json::json!({
                "schema": "shufflehist-attack v1",
                "dataset": label,
                "protocol": "flip",
                "spec": spec,
                "params": params,
                "bound": report.bound,
                "mean_bias": report.mean_bias(),
                "max_abs_bias": report.max_abs_bias(),
                "trials": args.trials,
                "seed": args.seed,
                "rows": report.rows,
            });
        }
        ("had", Strategy::HadFlood) => {
            let hp = adversary::had_params(args.eps, args.delta, n, d)?;
            let report = adversary::run_attacked_had(
                &data,
                &hp,
                spec.target,
                spec.m,
                args.seed,
                args.trials,
            )?;
            for row in &report.rows {
                csv.push_str(&format!(
                    "{},had,had-flood,{},{},{},{},{}\n",
                    row.trial, args.m, row.z_honest, row.z_corrupt, row.bias, report.expected_bias
                ));
            }
            // side-by-side robustness comparison against the flip protocol
            // under the same privacy budget
            let flip_mode = Mode::Maximum { d };
            let flip_k = params::min_k(args.eps, args.delta, n, flip_mode)?;
            let flip_sol = params::solve_q(args.eps, args.delta, n, flip_k, flip_mode)?;
            let flip_per_user = params::robustness_bound(n, flip_k, flip_sol.q, 1)?;
            let had_per_user = (hp.k as f64 + 1.0) / n as f64;
            let mean_bias: f64 =
                report.rows.iter().map(|r| r.bias).sum::<f64>() / report.rows.len() as f64;
            meta = serde_json::json!({
                "schema": "shufflehist-attack v1",
                "dataset": label,
                "protocol": "had",
                "spec": spec,
                "had_params": hp,
                "expected_bias": report.expected_bias,
                "trial_sd": report.trial_sd,
                "mean_bias": mean_bias,
                "per_corrupt_user_bias": {
                    "had": had_per_user,
                    "flip_bound": flip_per_user,
                    "ratio_had_over_flip": had_per_user / flip_per_user,
                    "flip_k": flip_k,
                    "flip_q": flip_sol.q,
                },
                "trials": args.trials,
                "seed": args.seed,
                "rows": report.rows,
            });
        }
        (p, s) => {
            return Err(Error::Parse(format!(
                "strategy {s:?} does not apply to protocol {p:?}"
            )))
        }
    }
    let csv_path = args.out.with_extension("csv");
    let json_path = args.out.with_extension("json");
    std::fs::write(&csv_path, csv)?;
    std::fs::write(
        &json_path,
        format!("{}\n", serde_json::to_string_pretty(&meta).expect("json")),
    )?;
    eprintln!("wrote {} and {}", csv_path.display(), json_path.display());
    Ok(())
}

fn parse_grid(grid: &str) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let mut q = Vec::new();
    let mut eps = Vec::new();
    let mut delta = Vec::new();
    let mut current = '\0';
    for tok in grid.split(',') {
        let tok = tok.trim();
        if tok.is_empty() {
            continue;
        }
        let value = match tok.split_once('=') {
            Some((key, v)) => {
                current = match key.trim() {
                    "q" => 'q',
                    "eps" => 'e',
                    "delta" => 'd',
                    other => return Err(Error::Parse(format!("unknown grid variable {other:?}"))),
                };
                v
            }
            None => tok,
        };
        let parsed = parse_num(value, "grid value")?;
        match current {
            'q' => q.push(parsed),
            'e' => eps.push(parsed),
            'd' => delta.push(parsed),
            _ => return Err(Error::Parse(format!("value {tok:?} before any variable"))),
        }
    }
    if q.is_empty() || eps.is_empty() || delta.is_empty() {
        return Err(Error::Parse("grid needs q=..., eps=..., delta=...".into()));
    }
    Ok((q, eps, delta))
}

fn cmd_audit(args: AuditArgs) -> Result<()> {
    let (qs, epss, deltas) = parse_grid(&args.grid)?;
    let cap = args.cap.unwrap_or(audit::DEFAULT_ENUM_CAP);
    if args.m_step == 0 || args.m_min == 0 || args.m_min > args.m_max {
        return Err(Error::Parse(
            "need 0 < m-min <= m-max and m-step >= 1".into(),
        ));
    }
    let ms: Vec<u64> = (args.m_min..=args.m_max)
        .step_by(args.m_step as usize)
        .collect();
    let mut points = Vec::new();
    for &m in &ms {
        for &q in &qs {
            for &eps in &epss {
                points.push((m, q, eps));
            }
        }
    }
    let tight: Vec<f64> = points
        .par_iter()
        .map(|&(m, q, eps)| audit::audit_b_with_cap(m, q, eps, cap))
        .collect::<Result<_>>()?;
    let mut out = String::from(if args.full {
        "# shufflehist-audit v1 (full)\n\
         m,q,eps,delta_target,delta_tight,pass,hypothesis,conc_outside,good_noise_ok,worst_ratio\n"
    } else {
        "# shufflehist-audit v1\nm,q,eps,delta_target,delta_tight,pass\n"
    });
    for (&(m, q, eps), &dt) in points.iter().zip(&tight) {
        for &delta in &deltas {
            let pass = dt <= delta;
            if args.full {
                let set = audit::ConcentrationSet::new(m, q, delta)?;
                let hyp = set.domination_hypothesis_holds(eps);
                let (_, outside) = audit::check_noise_concentration_with_cap(m, q, delta, cap)?;
                let gn = audit::check_good_noise_with_cap(m, q, eps, delta, cap)?;
                out.push_str(&format!(
                    "{m},{q},{eps},{delta},{dt},{pass},{hyp},{outside},{},{}\n",
                    gn.pass, gn.worst_ratio
                ));
            } else {
                out.push_str(&format!("{m},{q},{eps},{delta},{dt},{pass}\n"));
            }
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => {
            std::io::stdout().write_all(out.as_bytes())?;
        }
    }
    Ok(())
}

fn json_f64_list(value: &serde_json::Value) -> Option<Vec<f64>> {
    value
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_f64()).collect())
}

fn cmd_topk(args: TopkArgs) -> Result<()> {
    let ts: Vec<usize> = parse_list(&args.t, "t")?;
    let text = std::fs::read_to_string(&args.input)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("bad JSON: {e}")))?;
    let hist = value
        .get("true_hist")
        .and_then(json_f64_list)
        .ok_or_else(|| {
            Error::Parse("run JSON lacks true_hist; re-run with --store-estimates".into())
        })?;
    let estimates: Vec<Vec<f64>> = value
        .get("estimates")
        .and_then(|e| e.as_array())
        .map(|rows| rows.iter().filter_map(json_f64_list).collect())
        .ok_or_else(|| {
            Error::Parse("run JSON lacks estimates; re-run with --store-estimates".into())
        })?;
    let trials = value
        .pointer("/meta/config/trials")
        .and_then(|v| v.as_u64())
        .unwrap_or(estimates.len() as u64) as usize;
    let resolved = value
        .pointer("/meta/resolved")
        .and_then(|v| v.as_array())
        .cloned()
        .unwrap_or_default();
    let mut out = String::from("# shufflehist-topk v1\nt,alpha_observed,alpha_bound,f1\n");
    for (sweep, chunk) in estimates.chunks(trials).enumerate() {
        let alpha_bound = resolved
            .get(sweep)
            .and_then(|r| r.get("alpha_bound"))
            .and_then(|v| v.as_f64());
        for &t in &ts {
            let mut alpha_max = 0.0f64;
            let mut f1_sum = 0.0f64;
            for z in chunk {
                let cands = topk::top_t(z, t)?;
                alpha_max = alpha_max.max(topk::alpha_gap(&cands, &hist, t)?);
                f1_sum += topk::f1_score(&cands, &hist, t)?;
            }
            let f1_mean = f1_sum / chunk.len() as f64;
            out.push_str(&format!(
                "{t},{alpha_max},{},{f1_mean}\n",
                alpha_bound.map(|b| b.to_string()).unwrap_or_default()
            ));
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, out)?,
        None => {
            std::io::stdout().write_all(out.as_bytes())?;
        }
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Parse(_) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::SolveParams(args) => cmd_solve(args),
        Cmd::Run(args) => cmd_run(args),
        Cmd::Attack(args) => cmd_attack(args),
        Cmd::AuditPrivacy(args) => cmd_audit(args),
        Cmd::Topk(args) => cmd_topk(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
