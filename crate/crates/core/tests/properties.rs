//! Randomized invariants over generated distributions and partitions.

use approx::assert_relative_eq;
use proptest::prelude::*;

use calibrated_losses::bounds::concentration_bound;
use calibrated_losses::calibrate::{is_approx_calibrated, ApproxCalibrationParams};
use calibrated_losses::calibration::{
    coarsen, conditional_inverse_mean, is_calibrated, level_sets,
};
use calibrated_losses::distribution::{kl_divergence, l1_distance, Distribution};
use calibrated_losses::io::{parse_json, parse_tsv, to_json, to_tsv};
use calibrated_losses::losses::{builtin_catalog, expected_loss, LocalLoss};
use calibrated_losses::sampling::{rng_from_seed, InverseCdf};
use calibrated_losses::scoring::{divergence, ConcaveGenerator};

fn dist(max_n: usize) -> impl Strategy<Value = Distribution> {
    prop::collection::vec(0.01f64..1.0, 1..=max_n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        Distribution::new(w.iter().map(|v| v / s).collect()).unwrap()
    })
}

fn pair(max_n: usize) -> impl Strategy<Value = (Distribution, Distribution)> {
    (1..=max_n).prop_flat_map(|n| {
        let side = prop::collection::vec(0.01f64..1.0, n);
        (side.clone(), side).prop_map(|(a, b)| {
            let norm = |w: Vec<f64>| {
                let s: f64 = w.iter().sum();
                Distribution::new(w.iter().map(|v| v / s).collect()).unwrap()
            };
            (norm(a), norm(b))
        })
    })
}

/// A distribution together with a random partition of its domain (block labels per element).
fn with_partition(max_n: usize) -> impl Strategy<Value = (Distribution, Vec<Vec<usize>>)> {
    dist(max_n).prop_flat_map(|p| {
        let n = p.len();
        prop::collection::vec(0..n, n).prop_map(move |labels| {
            let mut blocks: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (x, &b) in labels.iter().enumerate() {
                blocks[b].push(x);
            }
            blocks.retain(|b| !b.is_empty());
            (p.clone(), blocks)
        })
    })
}

proptest! {
    #[test]
    fn coarsenings_are_calibrated((p, blocks) in with_partition(10)) {
        let q = coarsen(&p, &blocks).unwrap();
        prop_assert!(is_calibrated(&q, &p, 1e-9).unwrap().calibrated);
        assert_relative_eq!(q.probs().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for level in level_sets(&q).levels() {
            let v = conditional_inverse_mean(&p, &level.members).unwrap();
            assert_relative_eq!(v, 1.0 / level.value, max_relative = 1e-9);
        }
    }

    #[test]
    fn calibrated_candidates_never_beat_the_truth((p, blocks) in with_partition(8)) {
        let q = coarsen(&p, &blocks).unwrap();
        for loss in builtin_catalog().into_iter().chain([LocalLoss::loglog_scaled()]) {
            if loss.name() == "loglog" {
                continue; // ln ln z is negative below e and not admissible at these masses
            }
            let gap = expected_loss(&loss, &q, &p).unwrap() - expected_loss(&loss, &p, &p).unwrap();
            prop_assert!(gap >= -1e-9, "{} gap {}", loss.name(), gap);
        }
    }

    #[test]
    fn level_sets_partition_the_domain(q in dist(12)) {
        let ls = level_sets(&q);
        let mut seen: Vec<usize> = ls.levels().iter().flat_map(|l| l.members.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..q.len()).collect::<Vec<_>>());
        for l in ls.levels() {
            for &x in &l.members {
                prop_assert_eq!(q.get(x), l.value);
            }
        }
    }

    #[test]
    fn divergences_are_nonnegative((p, q) in pair(16)) {
        for g in ConcaveGenerator::all_builtin() {
            prop_assert!(divergence(&g, &p, &q).unwrap() >= -1e-12);
        }
        let kl = kl_divergence(&p, &q).unwrap();
        prop_assert!(kl >= 0.5 * l1_distance(&p, &q).unwrap().powi(2) - 1e-12);
    }

    #[test]
    fn losses_decrease_in_q(a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        for loss in builtin_catalog() {
            prop_assert!(loss.value_at(hi) <= loss.value_at(lo) + 1e-12);
        }
    }

    #[test]
    fn counts_sum_and_respect_support(p in dist(8), m in 1u64..500, seed in any::<u64>()) {
        let mut probs = p.probs().to_vec();
        probs[0] = 0.0;
        let s: f64 = probs.iter().sum();
        prop_assume!(s > 0.0);
        let p = Distribution::new(probs.iter().map(|v| v / s).collect()).unwrap();
        let counts = InverseCdf::new(&p).counts(m, &mut rng_from_seed(seed));
        prop_assert_eq!(counts.iter().sum::<u64>(), m);
        prop_assert_eq!(counts[0], 0);
    }

    #[test]
    fn io_round_trips(p in dist(10)) {
        let back = parse_json(&to_json(&p).unwrap()).unwrap();
        prop_assert_eq!(back.probs(), p.probs());
        let back = parse_tsv(&to_tsv(&p)).unwrap();
        prop_assert!(back.approx_eq(&p, 1e-15));
    }

    #[test]
    fn exact_calibration_certifies((p, blocks) in with_partition(10), a1 in 0.01f64..0.5, a2 in 0.01f64..0.5) {
        let q = coarsen(&p, &blocks).unwrap();
        let params = ApproxCalibrationParams::new(a1, a2, 0.1).unwrap();
        prop_assert!(is_approx_calibrated(&q, &p, &params).unwrap().passed);
    }

    #[test]
    fn sample_count_grows_as_delta_shrinks(d1 in 0.001f64..0.5, d2 in 0.001f64..0.5) {
        let (small, large) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
        let loss = LocalLoss::loglog();
        let a = concentration_bound(&loss, 0.1, small, 1e6, 1.0).unwrap();
        let b = concentration_bound(&loss, 0.1, large, 1e6, 1.0).unwrap();
        prop_assert!(a.ln_m.unwrap() >= b.ln_m.unwrap());
    }
}
