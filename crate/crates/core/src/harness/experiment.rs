//! Multi-trial protocol sweeps with seeded reproducibility.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{self, AttackSpec, HadParams, Strategy};
use crate::compact::{self, CountMinConfig, HashFamily};
use crate::error::{Error, Result};
use crate::harness::output::{ExperimentMeta, ExperimentResult, ResultRow, TopkMetrics};
use crate::params::{self, Mode};
use crate::protocol::{self, Dataset, ProtocolParams};
use crate::rng::{fisher_yates, stream, trial_seed, StreamDomain};
use crate::topk;

/// Which protocol variant an experiment runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    /// Dense bit-string messages.
    Flip,
    /// Index-list messages; identical estimates to `Flip` under equal seeds.
    Flip2,
    /// Count-min domain hashing over `Flip2`.
    Flip3,
    /// Hadamard-response baseline.
    Had,
    /// No fabricated messages; privacy from amplification by shuffling.
    FlipAmplified,
}

impl Protocol {
    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Flip => "flip",
            Protocol::Flip2 => "flip2",
            Protocol::Flip3 => "flip3",
            Protocol::Had => "had",
            Protocol::FlipAmplified => "flip-amplified",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "flip" => Ok(Protocol::Flip),
            "flip2" => Ok(Protocol::Flip2),
            "flip3" => Ok(Protocol::Flip3),
            "had" => Ok(Protocol::Had),
            "flip-amplified" => Ok(Protocol::FlipAmplified),
            other => Err(Error::Parse(format!("unknown protocol {other:?}"))),
        }
    }
}

/// How trials are executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExecMode {
    /// Materialize messages when they fit the memory budget, otherwise fall
    /// back to column simulation (flip3 only; flip/flip2 refuse instead).
    Auto,
    /// Always materialize messages; error above the budget.
    Messages,
    /// Column simulation: sample per-bin counts directly. Identical output
    /// law, no per-message structure.
    Columns,
}

/// Experiment description. `k_list` empty means "smallest feasible k".
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub eps: f64,
    pub delta: f64,
    pub k_list: Vec<u32>,
    /// Hash repetitions (flip3); default `ceil(log2 d)`.
    pub v_count: Option<u32>,
    pub trials: u64,
    pub seed: u64,
    /// Override for the maximum-mode confidence floor.
    pub beta: Option<f64>,
    pub t_list: Vec<usize>,
    pub attack: Option<AttackSpec>,
    /// In-memory message budget for one trial, in bytes.
    pub max_message_bytes: u64,
    pub exec: ExecMode,
    /// Force storing per-trial estimates in the JSON (needed by `topk`).
    /// Default: store when `d * trials * sweep <= 2^22`.
    pub store_estimates: Option<bool>,
}

impl ExperimentConfig {
    pub fn new(protocol: Protocol, eps: f64, delta: f64, seed: u64) -> Self {
        ExperimentConfig {
            protocol,
            eps,
            delta,
            k_list: Vec::new(),
            v_count: None,
            trials: 100,
            seed,
            beta: None,
            t_list: Vec::new(),
            attack: None,
            max_message_bytes: 1 << 30,
            exec: ExecMode::Auto,
            store_estimates: None,
        }
    }
}

/// Fully resolved per-sweep-entry parameters; the single source every bound
/// column is copied from.
#[derive(Clone, Debug, Serialize)]
pub struct ResolvedParams {
    pub protocol: &'static str,
    pub k: u32,
    pub q: Option<f64>,
    pub scale: Option<f64>,
    /// 90%-confidence maximum-error bound (absent for the Hadamard baseline).
    pub bound: Option<f64>,
    /// Top-t approximation bound at the solved parameters.
    pub alpha_bound: Option<f64>,
    pub robustness_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count_min: Option<CountMinConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub had: Option<HadParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_local: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps_shuffle: Option<f64>,
}

enum SweepPlan {
    Flip {
        params: ProtocolParams,
        dense: bool,
        columns: bool,
    },
    Flip3 {
        params: ProtocolParams,
        cm: CountMinConfig,
        family: HashFamily,
        columns: bool,
    },
    Had {
        hp: HadParams,
    },
}

struct SweepEntry {
    resolved: ResolvedParams,
    plan: SweepPlan,
}

fn dense_bytes(params: &ProtocolParams) -> u64 {
    params.message_count() as u64 * (params.d as u64).div_ceil(64) * 8
}

fn sparse_bytes(params: &ProtocolParams) -> u64 {
    let per_msg = 4.0 * (1.0 + params.d as f64 * params.q) + 16.0;
    (params.message_count() as f64 * per_msg) as u64
}

fn resolve_flip_like(
    config: &ExperimentConfig,
    data: &Dataset,
    k: Option<u32>,
) -> Result<SweepEntry> {
    let (n, d) = (data.n(), data.d());
    let mode = Mode::Maximum { d };
    let (params, scale, bound, eps_local, eps_shuffle) = match config.protocol {
        Protocol::FlipAmplified => {
            if matches!(k, Some(k) if k != 0) {
                return Err(Error::Domain(
                    "the amplified variant fixes k = 0; drop the k override".into(),
                ));
            }
            let sol = params::amplification_params(config.eps, config.delta, n, d)?;
            let params = ProtocolParams::new(n, d, config.eps, config.delta, 0, sol.q)?;
            (
                params,
                params.scale(),
                sol.bound,
                Some(sol.eps_local),
                Some(sol.eps_shuffle),
            )
        }
        _ => {
            let k = match k {
                Some(k) => k,
                None => params::min_k(config.eps, config.delta, n, mode)?,
            };
            let sol = params::solve_q_with_beta(config.eps, config.delta, n, k, mode, config.beta)?;
            let params = ProtocolParams::new(n, d, config.eps, config.delta, k, sol.q)?;
            (params, sol.scale, sol.bound, None, None)
        }
    };
    let dense = config.protocol == Protocol::Flip;
    let columns = match config.exec {
        ExecMode::Columns => true,
        ExecMode::Messages | ExecMode::Auto => {
            let bytes = if dense {
                dense_bytes(&params)
            } else {
                sparse_bytes(&params)
            };
            if bytes > config.max_message_bytes {
                let hint = if dense {
                    "use --protocol flip2 (index lists) or --exec columns"
                } else {
                    "use --protocol flip3 (count-min) or --exec columns"
                };
                return Err(Error::Resource(format!(
                    "one trial needs ~{bytes} message bytes, over the {} budget; {hint}",
                    config.max_message_bytes
                )));
            }
            false
        }
    };
    let alpha = topk::alpha_bound(n, params.k, params.q, d);
    let rb = config
        .attack
        .map(|a| params::robustness_bound(n, params.k, params.q, a.m))
        .transpose()?;
    Ok(SweepEntry {
        resolved: ResolvedParams {
            protocol: config.protocol.name(),
            k: params.k,
            q: Some(params.q),
            scale: Some(scale),
            bound: Some(bound),
            alpha_bound: Some(alpha),
            robustness_bound: rb,
            count_min: None,
            had: None,
            eps_local,
            eps_shuffle,
        },
        plan: SweepPlan::Flip {
            params,
            dense,
            columns,
        },
    })
}

fn resolve_flip3(config: &ExperimentConfig, data: &Dataset, k: Option<u32>) -> Result<SweepEntry> {
    let (n, d) = (data.n(), data.d());
    let cm = compact::cm_config(config.eps, config.delta, n, d, config.v_count, k)?;
    let family = HashFamily::new(cm.v_count, d, cm.d_hat, config.seed)?;
    // params at the hashed dimension, per repetition
    let params = ProtocolParams::new(n, cm.d_hat, cm.eps_rep, cm.delta_rep, cm.k, cm.q)?;
    let columns = match config.exec {
        ExecMode::Columns => true,
        ExecMode::Messages | ExecMode::Auto => {
            let bytes = cm.v_count as u64 * sparse_bytes(&params);
            if bytes > config.max_message_bytes {
                if config.exec == ExecMode::Messages {
                    return Err(Error::Resource(format!(
                        "one trial needs ~{bytes} message bytes, over the {} budget; \
                         use --exec columns or auto",
                        config.max_message_bytes
                    )));
                }
                true
            } else {
                false
            }
        }
    };
    Ok(SweepEntry {
        resolved: ResolvedParams {
            protocol: config.protocol.name(),
            k: cm.k,
            q: Some(cm.q),
            scale: Some(cm.scale),
            bound: Some(cm.width),
            alpha_bound: None,
            robustness_bound: None,
            count_min: Some(cm),
            had: None,
            eps_local: None,
            eps_shuffle: None,
        },
        plan: SweepPlan::Flip3 {
            params,
            cm,
            family,
            columns,
        },
    })
}

fn resolve_had(config: &ExperimentConfig, data: &Dataset, k: Option<u32>) -> Result<SweepEntry> {
    let mut hp = adversary::had_params(config.eps, config.delta, data.n(), data.d())?;
    if let Some(k) = k {
        hp.k = k;
    }
    let per_msg = hp.tau as u64 * 4 + 32;
    let bytes = (hp.n * (hp.k as usize + 1)) as u64 * per_msg;
    if bytes > config.max_message_bytes {
        return Err(Error::Resource(format!(
            "one trial needs ~{bytes} message bytes, over the {} budget",
            config.max_message_bytes
        )));
    }
    Ok(SweepEntry {
        resolved: ResolvedParams {
            protocol: config.protocol.name(),
            k: hp.k,
            q: None,
            scale: None,
            bound: None,
            alpha_bound: None,
            robustness_bound: None,
            count_min: None,
            had: Some(hp),
            eps_local: None,
            eps_shuffle: None,
        },
        plan: SweepPlan::Had { hp },
    })
}

fn run_flip3_trial(
    data: &Dataset,
    params: &ProtocolParams,
    cm: &CountMinConfig,
    family: &HashFamily,
    columns: bool,
    master: u64,
) -> Result<Vec<f64>> {
    if columns {
        // hashed item counts per repetition, then exact column laws
        let per_rep: Vec<Vec<f64>> = (1..=cm.v_count)
            .map(|v| {
                let mut counts = vec![0u64; cm.d_hat];
                for &item in data.items() {
                    counts[family.hash(v, item) as usize - 1] += 1;
                }
                let mut rng = stream(master, StreamDomain::Column, v as u64, 0);
                let ones =
                    protocol::sample_column_counts(&counts, params.n, params.k, params.q, &mut rng);
                compact::analyze_repetition(&ones, params.n, params.k, params.q)
            })
            .collect();
        Ok(compact::compose_min(family, &per_rep))
    } else {
        let mut messages = Vec::with_capacity(data.n() * cm.v_count as usize * (cm.k as usize + 1));
        for (u, &item) in data.items().iter().enumerate() {
            let mut rng = stream(master, StreamDomain::Flip, u as u64, 0);
            messages.extend(compact::randomize_cm(item, family, cm.k, cm.q, &mut rng)?);
        }
        let mut shuffle_rng = stream(master, StreamDomain::Shuffle, 0, 0);
        fisher_yates(&mut messages, &mut shuffle_rng);
        Ok(compact::analyze_cm(&messages, family, params, true)?.z)
    }
}

fn run_had_trial(data: &Dataset, hp: &HadParams, master: u64) -> Result<Vec<f64>> {
    let mut messages = Vec::with_capacity(hp.n * (hp.k as usize + 1));
    for (u, &item) in data.items().iter().enumerate() {
        let x = protocol::OneHotInput::new(item, hp.d)?;
        let mut rng = stream(master, StreamDomain::Hadamard, u as u64, 0);
        messages.extend(adversary::randomize_had(&x, hp, &mut rng));
    }
    let mut shuffle_rng = stream(master, StreamDomain::Shuffle, 0, 0);
    fisher_yates(&mut messages, &mut shuffle_rng);
    adversary::analyze_had(&messages, hp)
}

fn validate_attack(config: &ExperimentConfig, data: &Dataset) -> Result<()> {
    let Some(attack) = &config.attack else {
        return Ok(());
    };
    attack.validate(data.n(), data.d())?;
    match (config.protocol, attack.strategy) {
        (Protocol::Flip | Protocol::Flip2, Strategy::HonestLie | Strategy::FloodBit) => Ok(()),
        (Protocol::Had, Strategy::HadFlood) => Ok(()),
        (p, s) => Err(Error::Domain(format!(
            "strategy {s:?} does not apply to protocol {}",
            p.name()
        ))),
    }
}

/// Run the configured sweep: for every k in the sweep and every trial, run
/// the protocol, compare against the exact histogram, and attach bounds from
/// the parameter module. Fails before trial 0 on infeasible configurations.
pub fn run_experiment(
    config: &ExperimentConfig,
    data: &Dataset,
    dataset_label: &str,
) -> Result<ExperimentResult> {
    if config.trials == 0 {
        return Err(Error::Domain("trials must be at least 1".into()));
    }
    validate_attack(config, data)?;
    if config.attack.is_some()
        && matches!(config.protocol, Protocol::Flip3 | Protocol::FlipAmplified)
    {
        return Err(Error::Domain(format!(
            "attack runs are not wired up for {}; use flip, flip2, or had",
            config.protocol.name()
        )));
    }
    let ks: Vec<Option<u32>> = if config.k_list.is_empty() {
        vec![None]
    } else {
        config.k_list.iter().map(|&k| Some(k)).collect()
    };
    let entries: Vec<SweepEntry> = ks
        .iter()
        .map(|&k| match config.protocol {
            Protocol::Flip | Protocol::Flip2 | Protocol::FlipAmplified => {
                resolve_flip_like(config, data, k)
            }
            Protocol::Flip3 => resolve_flip3(config, data, k),
            Protocol::Had => resolve_had(config, data, k),
        })
        .collect::<Result<_>>()?;

    let hist = data.histogram();
    let store = config.store_estimates.unwrap_or_else(|| {
        (data.d() as u64)
            .saturating_mul(config.trials)
            .saturating_mul(entries.len() as u64)
            <= 1 << 22
    });

    let mut rows = Vec::new();
    let mut estimates: Vec<Vec<f64>> = Vec::new();
    for (sweep_idx, entry) in entries.iter().enumerate() {
        let sweep_stride = 1_000_003u64; // disjoint trial-seed blocks per sweep entry
        let outcome: Vec<(ResultRow, Vec<f64>)> = (0..config.trials)
            .into_par_iter()
            .map(|t| -> Result<(ResultRow, Vec<f64>)> {
                let master = trial_seed(config.seed, sweep_idx as u64 * sweep_stride + t);
                let started = Instant::now();
                let (z, attack_bias) = match (&entry.plan, &config.attack) {
                    (
                        SweepPlan::Flip {
                            params,
                            dense,
                            columns,
                        },
                        None,
                    ) => {
                        let est = if *columns {
                            protocol::run_protocol_columns(data, params, master)?
                        } else if *dense {
                            protocol::run_protocol(data, params, master)?
                        } else {
                            protocol::run_protocol_sparse(data, params, master)?
                        };
                        (est.z, None)
                    }
                    (SweepPlan::Flip { params, .. }, Some(spec)) => {
                        let (hon, cor) = adversary::attacked_estimates(data, params, spec, master)?;
                        let target = spec.target as usize - 1;
                        let bias = cor[target] - hon[target];
                        (cor, Some(bias))
                    }
                    (
                        SweepPlan::Flip3 {
                            params,
                            cm,
                            family,
                            columns,
                        },
                        _,
                    ) => (
                        run_flip3_trial(data, params, cm, family, *columns, master)?,
                        None,
                    ),
                    (SweepPlan::Had { hp }, None) => (run_had_trial(data, hp, master)?, None),
                    (SweepPlan::Had { hp }, Some(spec)) => {
                        let (hon, cor) = adversary::had_attacked_estimates(
                            data,
                            hp,
                            spec.target,
                            spec.m,
                            master,
                        )?;
                        let target = spec.target as usize - 1;
                        let bias = cor[target] - hon[target];
                        (cor, Some(bias))
                    }
                };
                let runtime_ms = started.elapsed().as_secs_f64() * 1e3;
                let max_error = z
                    .iter()
                    .zip(&hist)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                let topk_metrics: Vec<TopkMetrics> = config
                    .t_list
                    .iter()
                    .map(|&t| -> Result<TopkMetrics> {
                        let cands = topk::top_t(&z, t)?;
                        Ok(TopkMetrics {
                            t,
                            alpha_observed: topk::alpha_gap(&cands, &hist, t)?,
                            alpha_bound: entry.resolved.alpha_bound,
                            f1: topk::f1_score(&cands, &hist, t)?,
                        })
                    })
                    .collect::<Result<_>>()?;
                let row = ResultRow {
                    trial: t,
                    protocol: entry.resolved.protocol,
                    k: entry.resolved.k,
                    q: entry.resolved.q,
                    max_error,
                    bound: entry.resolved.bound,
                    runtime_ms,
                    topk: topk_metrics,
                    attack_bias,
                    attack_bound: entry.resolved.robustness_bound,
                };
                Ok((row, z))
            })
            .collect::<Result<_>>()?;
        for (row, z) in outcome {
            rows.push(row);
            if store {
                estimates.push(z);
            }
        }
    }

    Ok(ExperimentResult {
        meta: ExperimentMeta {
            schema: crate::harness::output::CSV_SCHEMA_VERSION
                .trim_start_matches("# ")
                .to_string(),
            dataset: dataset_label.to_string(),
            n: data.n(),
            d: data.d(),
            config: config.clone(),
            resolved: entries.into_iter().map(|e| e.resolved).collect(),
        },
        rows,
        true_hist: if store { Some(hist) } else { None },
        estimates: if store { Some(estimates) } else { None },
    })
}

/// Write the first trial's shuffled messages in the sparse text form
/// (`v:i1,i2,...`; the label is present only for flip3).
pub fn dump_first_trial_messages(
    config: &ExperimentConfig,
    data: &Dataset,
    path: &std::path::Path,
) -> Result<()> {
    use std::io::Write;
    let master = trial_seed(config.seed, 0);
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    match config.protocol {
        Protocol::Flip | Protocol::Flip2 | Protocol::FlipAmplified => {
            let entry = resolve_flip_like(config, data, config.k_list.first().copied())?;
            let SweepPlan::Flip { params, .. } = entry.plan else {
                unreachable!()
            };
            let batch = protocol::SparseBatch::generate(data, &params, master);
            let mut order: Vec<u32> = (0..batch.len() as u32).collect();
            let mut rng = stream(master, StreamDomain::Shuffle, 0, 0);
            fisher_yates(&mut order, &mut rng);
            for &slot in &order {
                let msg = compact::SparseMessage::from_zero_based(
                    params.d,
                    batch.message(slot as usize).to_vec(),
                );
                writeln!(file, "{}", compact::format_message(None, &msg))?;
            }
        }
        Protocol::Flip3 => {
            let entry = resolve_flip3(config, data, config.k_list.first().copied())?;
            let SweepPlan::Flip3 { cm, family, .. } = entry.plan else {
                unreachable!()
            };
            let mut messages = Vec::new();
            for (u, &item) in data.items().iter().enumerate() {
                let mut rng = stream(master, StreamDomain::Flip, u as u64, 0);
                messages.extend(compact::randomize_cm(item, &family, cm.k, cm.q, &mut rng)?);
            }
            let mut rng = stream(master, StreamDomain::Shuffle, 0, 0);
            fisher_yates(&mut messages, &mut rng);
            for lm in &messages {
                writeln!(
                    file,
                    "{}",
                    compact::format_message(Some(lm.label), &lm.message)
                )?;
            }
        }
        Protocol::Had => {
            return Err(Error::Domain(
                "the Hadamard baseline does not use the sparse text form".into(),
            ))
        }
    }
    Ok(())
}
