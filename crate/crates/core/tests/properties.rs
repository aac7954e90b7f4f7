use proptest::prelude::*;

use topicforge::engines::bp::{bp_update_entry, sbp_iteration};
use topicforge::io::{read_trace, write_trace};
use topicforge::math::digamma;
use topicforge::{
    perplexity, Corpus, EngineKind, Hyperparams, MessageState, TopicModel, TracePoint, TrainConfig, Trainer,
};

/// Random small corpora with every document non-empty.
fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    (1usize..6, 1usize..8)
        .prop_flat_map(|(d, w)| {
            let cells = proptest::collection::vec(0u32..4, d * w);
            (Just(d), Just(w), cells)
        })
        .prop_map(|(d, w, counts)| {
            let mut triples: Vec<(usize, usize, u32)> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, &c)| (i / w, i % w, c))
                .collect();
            for doc in 0..d {
                if !triples.iter().any(|t| t.0 == doc) {
                    triples.push((doc, doc % w, 1));
                }
            }
            Corpus::from_triples(d, w, triples).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn docword_round_trip(corpus in corpus_strategy()) {
        let mut buf = Vec::new();
        corpus.write_docword(&mut buf).unwrap();
        let back = Corpus::parse_docword(&buf[..], None).unwrap();
        prop_assert_eq!(back.num_docs(), corpus.num_docs());
        prop_assert_eq!(back.vocab_size(), corpus.vocab_size());
        prop_assert_eq!(back.entries(), corpus.entries());
    }

    #[test]
    fn perplexity_ignores_topic_labels(
        corpus in corpus_strategy(),
        k in 1usize..5,
        seed in any::<u64>(),
        rotate in 0usize..5,
    ) {
        let hyper = Hyperparams::new(k, 0.1, 0.1).unwrap();
        let model = MessageState::init_random(&corpus, &hyper, seed).topic_model(&hyper);
        let shift = rotate % k;
        let permute = |m: &[f64]| {
            m.chunks_exact(k)
                .flat_map(|row| (0..k).map(move |t| row[(t + shift) % k]))
                .collect::<Vec<_>>()
        };
        let permuted = TopicModel { num_topics: k, theta: permute(&model.theta), phi: permute(&model.phi) };
        let a = perplexity(&model, &corpus).unwrap();
        let b = perplexity(&permuted, &corpus).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }

    #[test]
    fn perplexity_is_at_least_one(corpus in corpus_strategy(), k in 1usize..4, seed in any::<u64>()) {
        let hyper = Hyperparams::new(k, 0.01, 0.01).unwrap();
        let model = MessageState::init_random(&corpus, &hyper, seed).topic_model(&hyper);
        prop_assert!(perplexity(&model, &corpus).unwrap() >= 1.0 - 1e-12);
    }

    #[test]
    fn engines_keep_invariants(corpus in corpus_strategy(), k in 1usize..4, seed in 0u64..1000) {
        let n = corpus.total_tokens() as f64;
        for kind in EngineKind::ALL {
            let mut config = TrainConfig::new(k);
            config.seed = seed;
            let mut trainer = Trainer::new(kind, &corpus, config).unwrap();
            for _ in 0..5 {
                trainer.step().unwrap();
                if let Some(state) = trainer.message_state() {
                    for msg in state.messages().chunks_exact(k) {
                        prop_assert!((msg.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
                        prop_assert!(msg.iter().all(|&v| v >= 0.0));
                    }
                    prop_assert!((state.topic_total().iter().sum::<f64>() - n).abs() <= 1e-6);
                    prop_assert!(state.accumulator_drift(&corpus) <= 1e-8);
                }
                if let Some(gs) = trainer.gibbs_state() {
                    prop_assert!(gs.counts_consistent(&corpus));
                }
                prop_assert!(trainer.model().normalization_error() <= 1e-10);
            }
        }
    }

    #[test]
    fn sbp_does_not_depend_on_update_order(
        corpus in corpus_strategy(),
        k in 1usize..4,
        seed in any::<u64>(),
        order_seed in any::<u64>(),
    ) {
        let hyper = Hyperparams::new(k, 0.01, 0.01).unwrap();
        let mut state = MessageState::init_random(&corpus, &hyper, seed);
        let snapshot = state.clone();
        let mut ids: Vec<usize> = (0..corpus.num_entries()).collect();
        // Visit the snapshot in a scrambled order.
        ids.sort_by_key(|&i| (i as u64).wrapping_mul(order_seed | 1).rotate_left(17));
        let mut expected = vec![0.0; corpus.num_entries() * k];
        for &i in &ids {
            let m = bp_update_entry(&snapshot, &corpus, i, &hyper).unwrap();
            expected[i * k..(i + 1) * k].copy_from_slice(&m);
        }
        sbp_iteration(&mut state, &corpus, &hyper, &mut Vec::new()).unwrap();
        for (a, b) in state.messages().iter().zip(&expected) {
            prop_assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn folds_partition_documents(d in 2usize..60, n in 2usize..10, seed in any::<u64>()) {
        prop_assume!(n <= d);
        let corpus = Corpus::from_triples(d, 1, (0..d).map(|doc| (doc, 0, 1))).unwrap();
        let folds = corpus.split_folds(n, seed).unwrap();
        prop_assert_eq!(folds.len(), n);
        let mut seen = vec![0; d];
        for f in &folds {
            for &doc in &f.test_doc_ids {
                seen[doc] += 1;
            }
            prop_assert_eq!(f.test_doc_ids.len() + f.train_doc_ids.len(), d);
            let sizes_ok = f.test_doc_ids.len() == d / n || f.test_doc_ids.len() == d / n + 1;
            prop_assert!(sizes_ok);
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
    }

    #[test]
    fn trace_csv_round_trip(points in proptest::collection::vec((1.0f64..1e6, 0.0f64..1e3), 0..20)) {
        let trace: Vec<TracePoint> = points
            .iter()
            .enumerate()
            .map(|(i, &(p, s))| TracePoint { iteration: i + 1, elapsed_seconds: s, perplexity: p })
            .collect();
        let mut buf = Vec::new();
        write_trace(&mut buf, &trace, false).unwrap();
        let back = read_trace(&buf[..]).unwrap();
        prop_assert_eq!(back.len(), trace.len());
        for (a, b) in back.iter().zip(&trace) {
            prop_assert_eq!(a.iteration, b.iteration);
            prop_assert_eq!(a.perplexity, b.perplexity);
            prop_assert_eq!(a.elapsed_seconds, 0.0);
        }
    }

    #[test]
    fn digamma_recurrence(x in 1e-3f64..1e3) {
        let lhs = digamma(x + 1.0);
        let rhs = digamma(x) + 1.0 / x;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1.0));
    }
}
