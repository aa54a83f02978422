use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use statrs::distribution::{ContinuousCDF, Normal};

use mpqmc::driving::{TupleSchedule, UniformStream};
use mpqmc::finite_chain::{sample_index, transition_matrix, weights_from_log_masses, Construction};
use mpqmc::proposals::normal::inv_cdf;
use mpqmc::runner::fmt_float;
use mpqmc::samplers::{regularize_cov, WeightedEstimate};

const CONSTRUCTIONS: [Construction; 4] =
    [Construction::Barker, Construction::Peskun, Construction::SuwaTodo, Construction::Tjelmeland];

fn log_masses() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![9 => -30.0..30.0f64, 1 => Just(f64::NEG_INFINITY)], 2..12)
        .prop_filter("some finite mass", |v| v.iter().any(|m| m.is_finite()))
}

proptest! {
    #[test]
    fn weights_are_a_distribution(lm in log_masses(), shift in -500.0..500.0f64) {
        let w = weights_from_log_masses(&lm).unwrap();
        let s: f64 = w.w.iter().sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
        for (wi, m) in w.w.iter().zip(&lm) {
            prop_assert!(*wi >= 0.0);
            if *m == f64::NEG_INFINITY {
                prop_assert_eq!(*wi, 0.0);
            }
        }
        let shifted: Vec<f64> = lm.iter().map(|m| m + shift).collect();
        let w2 = weights_from_log_masses(&shifted).unwrap();
        for (a, b) in w.w.iter().zip(&w2.w) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constructions_keep_the_weights(lm in log_masses()) {
        let w = weights_from_log_masses(&lm).unwrap();
        let n = w.len();
        let barker = transition_matrix(Construction::Barker, &lm).unwrap().weighted_rejection(&w);
        for c in CONSTRUCTIONS {
            let a = transition_matrix(c, &lm).unwrap();
            prop_assert_eq!(a.size(), n);
            for i in 0..n {
                let s: f64 = a.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12, "{:?} row {} sums to {}", c, i, s);
                prop_assert!(a.row(i).iter().all(|&v| v >= 0.0));
            }
            for j in 0..n {
                let flow: f64 = (0..n).map(|i| w.w[i] * a.get(i, j)).sum();
                prop_assert!((flow - w.w[j]).abs() < 1e-10, "{:?} column {}", c, j);
            }
            if matches!(c, Construction::SuwaTodo | Construction::Tjelmeland) {
                prop_assert!(a.weighted_rejection(&w) <= barker + 1e-12, "{:?} rejects more than Barker", c);
            }
            if c != Construction::SuwaTodo {
                for i in 0..n {
                    for j in 0..n {
                        prop_assert!((w.w[i] * a.get(i, j) - w.w[j] * a.get(j, i)).abs() < 1e-12, "{:?} not reversible", c);
                    }
                }
            }
        }
    }

    #[test]
    fn peskun_dominates_uniform_proposal_barker(lm in log_masses()) {
        let w = weights_from_log_masses(&lm).unwrap();
        let n = w.len();
        let a = transition_matrix(Construction::Peskun, &lm).unwrap();
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let s = w.w[i] + w.w[j];
                if s > 0.0 {
                    let barker = w.w[j] / s / (n - 1) as f64;
                    prop_assert!(a.get(i, j) >= barker - 1e-15, "entry ({}, {})", i, j);
                }
            }
        }
    }

    #[test]
    fn index_draw_respects_support(lm in log_masses(), u in 1e-12..1.0f64) {
        let w = weights_from_log_masses(&lm).unwrap();
        let j = sample_index(&w.w, u);
        prop_assert!(w.w[j] > 0.0);
        let below: f64 = w.w[..j].iter().sum();
        prop_assert!(below < u + 1e-12);
    }

    #[test]
    fn index_draw_is_monotone(lm in log_masses(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let w = weights_from_log_masses(&lm).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(sample_index(&w.w, lo) <= sample_index(&w.w, hi));
    }

    #[test]
    fn telescoping_estimate(
        values in prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 3), 1..40),
    ) {
        let mut e = WeightedEstimate::empty(1);
        let mut sums = Vec::new();
        for vals in &values {
            let w = [0.2, 0.5, 0.3];
            let pts: Vec<DVector<f64>> = vals.iter().map(|v| DVector::from_element(1, *v)).collect();
            sums.push(e.update(&w, &pts)[0]);
        }
        let avg = sums.iter().sum::<f64>() / sums.len() as f64;
        prop_assert_eq!(e.ell, values.len());
        prop_assert!((e.mu[0] - avg).abs() < 1e-10);
    }

    #[test]
    fn regularized_cov_is_bounded(entries in prop::collection::vec(-1e4..1e4f64, 9)) {
        let a = DMatrix::from_row_slice(3, 3, &entries);
        let (c, _) = regularize_cov(&(&a * a.transpose()));
        prop_assert!((&c - c.transpose()).amax() == 0.0);
        for v in c.symmetric_eigen().eigenvalues.iter() {
            prop_assert!(*v >= 1e-6 * (1.0 - 1e-6) && *v <= 1e6 * (1.0 + 1e-6), "eigenvalue {}", v);
        }
    }

    #[test]
    fn float_text_round_trips(x in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let back: f64 = fmt_float(x).parse().unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn inverse_cdf_inverts(u in 1e-300..1.0f64) {
        let z = inv_cdf(u);
        let p = Normal::new(0.0, 1.0).unwrap().cdf(z);
        // statrs' cdf is only good to about 1e-10 relative; exact quantiles are pinned in the unit tests.
        prop_assert!((p - u).abs() <= 1e-9 * u, "u {} z {} p {}", u, z, p);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schedule_tuples_distinct(seed in any::<u64>(), d in 1usize..7) {
        let sch = TupleSchedule::new(UniformStream::lfsr(10, seed).unwrap(), d).unwrap();
        let mut seen = HashSet::new();
        let mut uses: HashMap<u64, usize> = HashMap::new();
        for k in 1..sch.len() {
            let t = sch.tuple(k).unwrap();
            prop_assert!(seen.insert(t.iter().map(|v| v.to_bits()).collect::<Vec<_>>()));
            for v in t {
                *uses.entry(v.to_bits()).or_default() += 1;
            }
        }
        prop_assert_eq!(uses.len() as u64, sch.trimmed_len());
        prop_assert!(uses.values().all(|&c| c == d));
    }

    #[test]
    fn stream_values_in_open_unit(seed in any::<u64>(), m in 10u32..14) {
        let s = UniformStream::lfsr(m, seed).unwrap();
        let len = s.len().unwrap();
        prop_assert_eq!(len, (1u64 << m) - 1);
        let vals = s.prefix(len as usize);
        prop_assert!(vals.iter().all(|&v| v > 0.0 && v < 1.0));
        let distinct: HashSet<u64> = vals.iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(distinct.len() as u64, len);
    }
}
