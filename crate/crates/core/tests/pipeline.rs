//! Cross-module integration: experiment orchestration, output determinism,
//! message dump/load, and attack wiring.

use shufflehist::adversary::{AttackSpec, Strategy};
use shufflehist::compact;
use shufflehist::harness::{
    self, dump_first_trial_messages, run_experiment, ExperimentConfig, Protocol,
};
use shufflehist::params;
use shufflehist::protocol::{self, Dataset, ProtocolParams};
use shufflehist::{stream, trial_seed, StreamDomain};

fn tmp_path(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join("shufflehist-pipeline");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(format!("{name}-{}", std::process::id()))
}

/// Blank the runtime column (the one measured field) so byte comparison
/// checks everything else.
fn mask_runtime_csv(csv: &str) -> String {
    csv.lines()
        .map(|line| {
            if line.starts_with('#') || line.starts_with("trial,") {
                line.to_string()
            } else {
                let mut cols: Vec<&str> = line.split(',').collect();
                if cols.len() > 6 {
                    cols[6] = "";
                }
                cols.join(",")
            }
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn experiment_output_deterministic() {
    let data = harness::synth_zipf(500, 32, 1.2, 7).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip2, 1.0, 0.01, 7);
    config.trials = 20;
    config.k_list = vec![2, 3];
    config.t_list = vec![5];
    let a = run_experiment(&config, &data, "zipf").unwrap();
    let b = run_experiment(&config, &data, "zipf").unwrap();
    assert_eq!(mask_runtime_csv(&a.to_csv()), mask_runtime_csv(&b.to_csv()));
    // estimates are bit-identical, not just close
    let (ea, eb) = (a.estimates.unwrap(), b.estimates.unwrap());
    assert_eq!(ea.len(), eb.len());
    for (za, zb) in ea.iter().zip(&eb) {
        for (x, y) in za.iter().zip(zb) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
    }
}

#[test]
fn experiment_row_count_and_bound_columns() {
    let data = harness::synth_zipf(400, 16, 1.2, 3).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip2, 1.0, 0.01, 3);
    config.trials = 7;
    config.k_list = vec![2, 4];
    let result = run_experiment(&config, &data, "zipf").unwrap();
    assert_eq!(result.rows.len(), 7 * 2);
    for resolved in &result.meta.resolved {
        let expect = params::error_bound_max(1.0, 0.01, 400, resolved.k, 16).unwrap();
        assert_eq!(resolved.bound.unwrap().to_bits(), expect.to_bits());
        for row in result.rows.iter().filter(|r| r.k == resolved.k) {
            assert_eq!(row.bound.unwrap().to_bits(), expect.to_bits());
            assert_eq!(row.q.unwrap().to_bits(), resolved.q.unwrap().to_bits());
        }
    }
}

#[test]
fn experiment_rejects_infeasible_before_trials() {
    let data = harness::synth_zipf(10, 4, 1.2, 3).unwrap();
    // n = 10 needs k = 75; k = 1 is infeasible and must fail fast
    let mut config = ExperimentConfig::new(Protocol::Flip2, 1.0, 0.01, 3);
    config.k_list = vec![1];
    assert!(matches!(
        run_experiment(&config, &data, "zipf"),
        Err(shufflehist::Error::Infeasible(_))
    ));
}

#[test]
fn dense_budget_refusal_suggests_sparse() {
    let data = harness::synth_zipf(2000, 4096, 1.2, 3).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip, 1.0, 0.01, 3);
    config.trials = 1;
    config.max_message_bytes = 1 << 16;
    let err = run_experiment(&config, &data, "zipf").unwrap_err();
    match err {
        shufflehist::Error::Resource(msg) => assert!(msg.contains("flip2")),
        other => panic!("expected resource error, got {other}"),
    }
}

#[test]
fn message_dump_matches_pipeline_counts() {
    let data = harness::synth_zipf(300, 24, 1.2, 11).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip2, 1.0, 0.01, 11);
    config.trials = 1;
    config.k_list = vec![3];
    let path = tmp_path("dump.txt");
    dump_first_trial_messages(&config, &data, &path).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    let sol = params::solve_q(1.0, 0.01, 300, 3, params::Mode::Maximum { d: 24 }).unwrap();
    let params = ProtocolParams::new(300, 24, 1.0, 0.01, 3, sol.q).unwrap();
    let mut counts = [0u64; 24];
    let mut total = 0usize;
    for line in text.lines() {
        let (label, msg) = compact::parse_message(line, 24).unwrap();
        assert_eq!(label, None);
        for &j in msg.ones() {
            counts[j as usize - 1] += 1;
        }
        total += 1;
    }
    assert_eq!(total, params.message_count());
    // analyzer over the dumped multiset reproduces the pipeline's estimate
    let est = protocol::run_protocol_sparse(&data, &params, trial_seed(11, 0)).unwrap();
    let m = params.message_count() as f64;
    for (j, &c) in counts.iter().enumerate() {
        let z = (c as f64 - m * params.q) / (params.n as f64 * (1.0 - 2.0 * params.q));
        assert_eq!(z.to_bits(), est.z[j].to_bits());
    }
}

#[test]
fn labeled_dump_for_count_min() {
    let data = harness::synth_zipf(60, 50, 1.2, 13).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip3, 6.0, 0.005, 13);
    config.trials = 1;
    config.v_count = Some(3);
    let path = tmp_path("dump-cm.txt");
    dump_first_trial_messages(&config, &data, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cm = compact::cm_config(6.0, 0.005, 60, 50, Some(3), None).unwrap();
    let mut labels = std::collections::HashMap::new();
    for line in text.lines() {
        let (label, _) = compact::parse_message(line, cm.d_hat).unwrap();
        *labels.entry(label.unwrap()).or_insert(0usize) += 1;
    }
    assert_eq!(labels.len(), 3);
    for (_, count) in labels {
        assert_eq!(count, 60 * (cm.k as usize + 1));
    }
}

#[test]
fn attack_in_run_populates_bias_columns() {
    let data = Dataset::new(vec![1; 300], 8).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip2, 1.0, 0.01, 17);
    config.trials = 25;
    config.attack = Some(AttackSpec {
        target: 8,
        m: 15,
        strategy: Strategy::FloodBit,
    });
    let result = run_experiment(&config, &data, "fixture").unwrap();
    for row in &result.rows {
        let bias = row.attack_bias.expect("bias column");
        let bound = row.attack_bound.expect("bound column");
        assert!(bias.abs() <= bound + 1e-12);
        assert!(
            bias > 0.0,
            "flood-bit on an empty bin pushes the estimate up"
        );
    }
}

#[test]
fn attack_in_run_rejects_bad_pairings() {
    let data = Dataset::new(vec![1; 300], 8).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Had, 1.0, 0.01, 17);
    config.attack = Some(AttackSpec {
        target: 8,
        m: 15,
        strategy: Strategy::FloodBit,
    });
    assert!(run_experiment(&config, &data, "fixture").is_err());
}

#[test]
fn had_attack_in_run() {
    let data = Dataset::new(vec![1; 256], 4).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Had, 1.0, 0.01, 23);
    config.trials = 30;
    config.attack = Some(AttackSpec {
        target: 4,
        m: 16,
        strategy: Strategy::HadFlood,
    });
    let result = run_experiment(&config, &data, "fixture").unwrap();
    let mean: f64 = result
        .rows
        .iter()
        .map(|r| r.attack_bias.unwrap())
        .sum::<f64>()
        / 30.0;
    let expected = 16.0 / 256.0 * (result.meta.resolved[0].k as f64 + 1.0);
    assert!(
        (mean - expected).abs() < 0.3 * expected,
        "mean {mean} vs {expected}"
    );
}

#[test]
fn flip3_message_and_column_modes_agree_statistically() {
    // a wide budget keeps the per-repetition flip probability away from 1/2
    // so the messages mode stays affordable
    let data = harness::synth_zipf(400, 64, 1.3, 31).unwrap();
    let hist = data.histogram();
    for exec in [harness::ExecMode::Messages, harness::ExecMode::Columns] {
        let mut config = ExperimentConfig::new(Protocol::Flip3, 8.0, 0.005, 31);
        config.trials = 4;
        config.v_count = Some(2);
        config.exec = exec;
        let result = run_experiment(&config, &data, "zipf").unwrap();
        let width = result.meta.resolved[0].bound.unwrap();
        for row in &result.rows {
            assert!(
                row.max_error <= width,
                "{exec:?}: max error {} above width {width}",
                row.max_error
            );
        }
        // estimates exist and are near the histogram on the heavy bin
        let est = result.estimates.as_ref().unwrap();
        for z in est {
            assert!((z[0] - hist[0]).abs() <= width);
        }
    }
}

#[test]
fn count_min_label_concentration_bound() {
    // Corrupt users pour all V(k+1) messages into label 1; the shift of that
    // repetition's estimate is bounded by (m/n) V (k+1) / (1 - 2q).
    let (n, d, v_count) = (50usize, 16usize, 3u32);
    let cm = compact::cm_config(6.0, 0.005, n, d, Some(v_count), None).unwrap();
    let family = compact::HashFamily::new(v_count, d, cm.d_hat, 5).unwrap();
    let m = 6usize;
    let target_hashed = family.hash(1, 1);

    let mut honest_counts = vec![0u64; cm.d_hat];
    let mut corrupt_counts = vec![0u64; cm.d_hat];
    for u in 0..n {
        let mut rng = stream(99, StreamDomain::Flip, u as u64, 0);
        let msgs =
            compact::randomize_cm(1 + (u % d) as u32, &family, cm.k, cm.q, &mut rng).unwrap();
        for lm in msgs.iter().filter(|lm| lm.label == 1) {
            for &j in lm.message.ones() {
                honest_counts[j as usize - 1] += 1;
                if u >= m {
                    corrupt_counts[j as usize - 1] += 1;
                }
            }
        }
    }
    // coalition: every one of the V(k+1) per-user messages lands on label 1
    // with the target bit set
    let per_user = v_count as usize * (cm.k as usize + 1);
    for _ in 0..m {
        for _ in 0..per_user {
            corrupt_counts[target_hashed as usize - 1] += 1;
        }
    }
    let zh = compact::analyze_repetition(&honest_counts, n, cm.k, cm.q);
    let zc = compact::analyze_repetition(&corrupt_counts, n, cm.k, cm.q);
    let bound = m as f64 / n as f64 * per_user as f64 / (1.0 - 2.0 * cm.q);
    for (a, b) in zh.iter().zip(&zc) {
        assert!((a - b).abs() <= bound + 1e-12);
    }
    // and the target cell actually moves, so the test is not vacuous
    let t = target_hashed as usize - 1;
    assert!((zh[t] - zc[t]).abs() > 0.0);
}

#[test]
fn store_estimates_gate() {
    let data = harness::synth_zipf(200, 16, 1.2, 7).unwrap();
    let mut config = ExperimentConfig::new(Protocol::Flip2, 1.0, 0.01, 7);
    config.trials = 5;
    let with = run_experiment(&config, &data, "zipf").unwrap();
    assert!(with.estimates.is_some());
    config.store_estimates = Some(false);
    let without = run_experiment(&config, &data, "zipf").unwrap();
    assert!(without.estimates.is_none());
    assert!(without.true_hist.is_none());
}
