//! Property tests for the invariants of each module.

mod common;

use proptest::prelude::*;
use segdiag::attributes::{psi_word, Attribute, SlenUnit, TrainingStats};
use segdiag::baseline::{segment_fmm, MatchDict};
use segdiag::bucketing::{bucket_f1, corpus_f1, evaluate_run, make_buckets};
use segdiag::corpus::{derive_labels, parse_segmented_str, spans_of, to_segmented_text, Sentence, Tag};
use segdiag::crossdata::{distance_edges, psi, relative_gap};
use segdiag::measures::spearman;
use segdiag::stats::{chi2_sf, friedman};

use common::{sentence_from, ALPHABET};

fn sentence() -> impl Strategy<Value = Sentence> {
    prop::collection::vec((0..ALPHABET.len(), any::<bool>()), 1..12).prop_map(|cells| {
        let chars: Vec<char> = cells.iter().map(|&(c, _)| ALPHABET[c]).collect();
        let boundaries: Vec<bool> = cells.iter().map(|&(_, b)| b).collect();
        sentence_from(&chars, &boundaries)
    })
}

fn corpus(max: usize) -> impl Strategy<Value = Vec<Sentence>> {
    prop::collection::vec(sentence(), 1..max)
}

/// A gold corpus and a prediction over the same characters.
fn gold_and_pred() -> impl Strategy<Value = (Vec<Sentence>, Vec<Sentence>)> {
    corpus(12).prop_flat_map(|gold| {
        let flags: Vec<_> = gold
            .iter()
            .map(|s| prop::collection::vec(any::<bool>(), s.char_len()))
            .collect();
        (Just(gold), flags).prop_map(|(gold, flags)| {
            let pred = gold
                .iter()
                .zip(&flags)
                .map(|(s, f)| sentence_from(s.chars(), f))
                .collect();
            (gold, pred)
        })
    })
}

proptest! {
    #[test]
    fn segmented_text_round_trips(sents in corpus(10)) {
        let (back, report) = parse_segmented_str(&to_segmented_text(&sents), None);
        prop_assert_eq!(back, sents.clone());
        prop_assert_eq!(report.sentences, sents.len());
    }

    #[test]
    fn spans_tile_sentences_with_canonical_labels(s in sentence()) {
        let spans = spans_of(std::slice::from_ref(&s));
        let mut next = 0;
        for span in &spans {
            prop_assert_eq!(span.start, next);
            prop_assert!(span.labels.is_canonical());
            prop_assert_eq!(span.labels.len(), span.end - span.start);
            next = span.end;
        }
        prop_assert_eq!(next, s.char_len());
    }

    #[test]
    fn derived_labels_have_expected_tag_counts(n in 1usize..40) {
        let tags = derive_labels(n).unwrap();
        let count = |t: Tag| tags.tags().iter().filter(|&&x| x == t).count();
        if n == 1 {
            prop_assert_eq!(count(Tag::S), 1);
        } else {
            prop_assert_eq!((count(Tag::B), count(Tag::E), count(Tag::M), count(Tag::S)), (1, 1, n - 2, 0));
        }
    }

    #[test]
    fn psi_is_invariant_to_duplicating_training_data(train in corpus(8), test in corpus(6), k in 2usize..5) {
        let once = TrainingStats::build(&train).unwrap();
        let repeated: Vec<Sentence> = (0..k).flat_map(|_| train.iter().cloned()).collect();
        let many = TrainingStats::build(&repeated).unwrap();
        for span in spans_of(&test) {
            prop_assert_eq!(psi_word(&span.text, &span.labels, &once), psi_word(&span.text, &span.labels, &many));
        }
        let spans = spans_of(&test);
        let (a, b) = (psi(&once, &spans).unwrap(), psi(&many, &spans).unwrap());
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
    }

    #[test]
    fn bucket_counts_add_up((gold, pred) in gold_and_pred(), train in corpus(8), n in 2usize..6) {
        let stats = TrainingStats::build(&train).unwrap();
        let run = evaluate_run(&gold, &pred, &stats, SlenUnit::Char).unwrap();
        let total = corpus_f1(&gold, &pred).unwrap();
        for attr in Attribute::ALL {
            let values: Vec<f64> = run.gold.iter().map(|s| s.attrs.get(attr)).collect();
            let spec = make_buckets(&values, n, attr).unwrap();
            let buckets = bucket_f1(&run.gold, &run.pred, &spec);
            prop_assert_eq!(buckets.iter().map(|b| b.gold_count).sum::<usize>(), total.gold_count);
            prop_assert_eq!(buckets.iter().map(|b| b.pred_count).sum::<usize>(), total.pred_count);
            prop_assert_eq!(buckets.iter().map(|b| b.match_count).sum::<usize>(), total.match_count);
            prop_assert!(buckets.iter().all(|b| b.gold_count > 0));
        }
    }

    #[test]
    fn bucket_assignment_is_monotone(values in prop::collection::vec(0.0f64..10.0, 1..50), n in 2usize..7) {
        let spec = make_buckets(&values, n, Attribute::WFre).unwrap();
        prop_assert!(spec.len() <= n);
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        for w in sorted.windows(2) {
            prop_assert!(spec.assign(w[0]) <= spec.assign(w[1]));
        }
    }

    #[test]
    fn spearman_ignores_monotone_transforms(
        pairs in prop::collection::vec((-5i32..5, -5i32..5), 2..20),
        scale in 0.1f64..10.0,
    ) {
        let x: Vec<f64> = pairs.iter().map(|p| p.0 as f64).collect();
        let y: Vec<f64> = pairs.iter().map(|p| p.1 as f64).collect();
        let tx: Vec<f64> = x.iter().map(|v| (v * scale).exp()).collect();
        let base = spearman(&x, &y).unwrap();
        let moved = spearman(&tx, &y).unwrap();
        match (base, moved) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
        if let Some(r) = base {
            prop_assert!((-1.0..=1.0).contains(&r));
            let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((spearman(&flipped, &y).unwrap().unwrap() + r).abs() < 1e-12);
        }
    }

    #[test]
    fn fmm_tiles_and_uses_dictionary_words(
        dict_words in prop::collection::vec(prop::collection::vec(0..ALPHABET.len(), 1..4), 1..10),
        text in prop::collection::vec(0..ALPHABET.len(), 1..20),
    ) {
        let words: Vec<String> = dict_words.iter().map(|w| w.iter().map(|&c| ALPHABET[c]).collect()).collect();
        let dict = MatchDict::new(words.clone()).unwrap();
        let chars: Vec<char> = text.iter().map(|&c| ALPHABET[c]).collect();
        let ranges = segment_fmm(&chars, &dict);
        let mut next = 0;
        for r in &ranges {
            prop_assert_eq!(r.start, next);
            prop_assert!(r.end > r.start);
            if r.len() > 1 {
                let w: String = chars[r.clone()].iter().collect();
                prop_assert!(dict.contains(&w));
            }
            next = r.end;
        }
        prop_assert_eq!(next, chars.len());
    }

    #[test]
    fn training_merge_is_associative_and_commutative(a in corpus(5), b in corpus(5), c in corpus(5)) {
        let (a, b, c) = (
            TrainingStats::build(&a).unwrap(),
            TrainingStats::build(&b).unwrap(),
            TrainingStats::build(&c).unwrap(),
        );
        prop_assert_eq!(a.merge(&b).merge(&c), a.merge(&b.merge(&c)));
        prop_assert_eq!(a.merge(&b), b.merge(&a));
    }

    #[test]
    fn relative_gap_is_antitone_in_transfer(ujj in 0.01f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(relative_gap(ujj, hi).unwrap() <= relative_gap(ujj, lo).unwrap());
        prop_assert_eq!(relative_gap(ujj, ujj), Some(0.0));
    }

    #[test]
    fn edge_weights_are_symmetric(cells in prop::collection::vec(0.01f64..1.0, 16)) {
        let z: Vec<Vec<Option<f64>>> = cells.chunks(4).map(|r| r.iter().map(|&v| Some(v)).collect()).collect();
        let w = distance_edges(&z).unwrap();
        for (i, row) in w.iter().enumerate() {
            prop_assert_eq!(row[i], Some(2.0));
            for (j, cell) in row.iter().enumerate() {
                prop_assert_eq!(*cell, w[j][i]);
            }
        }
    }

    #[test]
    fn friedman_outputs_are_well_formed(cells in prop::collection::vec(0u8..5, 12), k in 2usize..5) {
        let n = cells.len() / k;
        prop_assume!(n >= 2);
        let table: Vec<Vec<f64>> = cells.chunks(k).take(n).map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        let r = friedman(&table).unwrap();
        prop_assert!(r.statistic >= 0.0);
        prop_assert!((0.0..=1.0).contains(&r.p_value));
        prop_assert_eq!(r.dof, k - 1);
    }

    #[test]
    fn chi2_survival_is_decreasing(x in 0.0f64..50.0, dx in 0.01f64..5.0, dof in 1usize..20) {
        let (a, b) = (chi2_sf(x, dof).unwrap(), chi2_sf(x + dx, dof).unwrap());
        prop_assert!(b <= a);
        prop_assert!((0.0..=1.0).contains(&b));
    }
}
