//! Property tests for the structural invariants.

use proptest::prelude::*;

use shufflehist::audit::{exact_output_distribution, hockey_stick_delta, OneHotPair};
use shufflehist::bits::BitMessage;
use shufflehist::compact::{format_message, parse_message, to_dense, to_sparse, SparseMessage};
use shufflehist::protocol::{analyze_flip, randomize_flip, shuffle, OneHotInput, ProtocolParams};
use shufflehist::topk::{alpha_gap, top_t};
use shufflehist::{stream, StreamDomain};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sparse_dense_roundtrip(d in 1usize..200, seed in any::<u64>()) {
        let mut rng = stream(seed, StreamDomain::Noise, 0, 0);
        let msg = shufflehist::protocol::randomize_bits(
            &BitMessage::zero(d), 0.3, &mut rng).unwrap();
        let sparse = to_sparse(&msg);
        prop_assert_eq!(to_dense(&sparse).unwrap(), msg);
    }

    #[test]
    fn message_text_roundtrip(d in 1usize..100, label in proptest::option::of(1u32..50), seed in any::<u64>()) {
        let mut rng = stream(seed, StreamDomain::Noise, 1, 0);
        let dense = shufflehist::protocol::randomize_bits(
            &BitMessage::zero(d), 0.2, &mut rng).unwrap();
        let msg = to_sparse(&dense);
        let line = format_message(label, &msg);
        let (parsed_label, parsed) = parse_message(&line, d).unwrap();
        prop_assert_eq!(parsed_label, label);
        prop_assert_eq!(parsed, msg);
    }

    #[test]
    fn analyzer_permutation_invariance(
        n in 2usize..20,
        d in 1usize..16,
        k in 0u32..3,
        seed in any::<u64>(),
    ) {
        let q = 0.2;
        let params = ProtocolParams::new(n, d, 1.0, 0.009, k, q).unwrap();
        let mut rng = stream(seed, StreamDomain::Noise, 2, 0);
        let per_user: Vec<Vec<BitMessage>> = (0..n)
            .map(|u| {
                let item = (u % d) as u32 + 1;
                let x = OneHotInput::new(item, d).unwrap();
                randomize_flip(&x, k, q, &mut rng).unwrap()
            })
            .collect();
        let batch_a = shuffle(per_user.clone(), &mut rng).unwrap();
        let batch_b = shuffle(per_user, &mut rng).unwrap();
        let za = analyze_flip(&batch_a, &params).unwrap();
        let zb = analyze_flip(&batch_b, &params).unwrap();
        // different permutations, bit-identical estimates
        for (a, b) in za.z.iter().zip(&zb.z) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn top_t_displacement_bound(
        hist_raw in proptest::collection::vec(0.0f64..1.0, 3..24),
        noise in proptest::collection::vec(-0.2f64..0.2, 3..24),
        t_frac in 0.1f64..0.9,
    ) {
        let d = hist_raw.len().min(noise.len());
        let total: f64 = hist_raw[..d].iter().sum::<f64>().max(1e-9);
        let hist: Vec<f64> = hist_raw[..d].iter().map(|h| h / total).collect();
        let z: Vec<f64> = hist.iter().zip(&noise[..d]).map(|(h, e)| h + e).collect();
        let t = ((d as f64 * t_frac) as usize).clamp(1, d);
        let max_err = z.iter().zip(&hist).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let cands = top_t(&z, t).unwrap();
        let gap = alpha_gap(&cands, &hist, t).unwrap();
        prop_assert!(gap <= 2.0 * max_err + 1e-12, "gap {} vs 2*err {}", gap, 2.0 * max_err);
    }

    #[test]
    fn candidate_validation(d in 1usize..30, t_over in 1usize..5) {
        let values = vec![0.5; d];
        prop_assert!(top_t(&values, d + t_over).is_err());
    }
}

proptest! {
    // the exact law is O(m^3) to build, keep the cases small
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn hockey_stick_zero_on_self_and_monotone(
        m in 0u64..12,
        q in 0.05f64..0.45,
    ) {
        let p01 = exact_output_distribution(OneHotPair::Item2, m, q).unwrap();
        let p10 = exact_output_distribution(OneHotPair::Item1, m, q).unwrap();
        prop_assert_eq!(hockey_stick_delta(&p01, &p01, 0.7).unwrap(), 0.0);
        let mut last = f64::INFINITY;
        for step in 0..6 {
            let eps = step as f64 * 0.4;
            let delta = hockey_stick_delta(&p01, &p10, eps).unwrap();
            prop_assert!(delta <= last + 1e-15);
            prop_assert!(delta >= 0.0);
            last = delta;
        }
    }
}

#[test]
fn sparse_message_rejects_unsorted() {
    assert!(SparseMessage::new(5, vec![3, 2]).is_err());
}
