use proptest::prelude::*;

use svs_core::evalkit::{generate_corpus, CorpusSpec};
use svs_core::nnet::{build_window_matrix, mlpg, WindowSet};
use svs_core::score::{parse_musicxml, write_musicxml, NoteExpansion, ParseOptions, Span};
use svs_core::timing::integerize;
use svs_core::Seq;

fn spans_from(lengths: &[usize]) -> Vec<Span> {
    let mut t = 0;
    lengths
        .iter()
        .map(|&l| {
            let s = Span { start: t, end: t + l };
            t += l;
            s
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expansion_adjoint_is_transpose(
        notes in prop::collection::vec((1usize..8, any::<bool>()), 1..12),
        seed in prop::collection::vec(-50.0f64..50.0, 100),
    ) {
        let lengths: Vec<usize> = notes.iter().map(|n| n.0).collect();
        let mut rest: Vec<bool> = notes.iter().map(|n| n.1).collect();
        rest[0] = false;
        let spans = spans_from(&lengths);
        let e = NoteExpansion::new(&spans, &rest);
        let x: Vec<f64> = seed.iter().take(e.pitched()).copied().collect();
        let y: Vec<f64> = (0..e.frames()).map(|t| seed[(t * 7 + 3) % seed.len()]).collect();
        let ex = e.expand(&x);
        let ety = e.adjoint(&y);
        let lhs: f64 = ex.iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&ety).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn mlpg_recovers_consistent_statics(
        c in prop::collection::vec(-500.0f64..500.0, 1..48),
        vars in prop::collection::vec(0.1f64..10.0, 3),
    ) {
        // means produced by the windows themselves have an exact solution
        let windows = WindowSet::standard();
        let w = build_window_matrix(c.len(), &windows);
        let stacked = w.apply(&c);
        let means = Seq::from_vec(c.len(), 3, stacked);
        let out = mlpg(&means, &vars, &windows).unwrap();
        for (a, b) in out.column(0).iter().zip(&c) {
            prop_assert!((a - b).abs() <= 1e-8 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn integerize_keeps_total(real in prop::collection::vec(0.0f64..40.0, 1..8)) {
        let total = real.iter().sum::<f64>().round() as usize;
        let frames = integerize(&real, total);
        prop_assert_eq!(frames.iter().sum::<usize>(), total);
        if total >= real.len() {
            prop_assert!(frames.iter().all(|&f| f >= 1));
        }
    }
}

#[test]
fn musicxml_round_trip_on_synthetic_corpus() {
    let corpus = generate_corpus(&CorpusSpec {
        songs: 4,
        notes_per_song: 12,
        ..Default::default()
    })
    .unwrap();
    for song in corpus.generate().unwrap() {
        let xml = write_musicxml(&song.score);
        let back = parse_musicxml(xml.as_bytes(), &ParseOptions::default()).unwrap();
        assert_eq!(back.note_lengths(), song.score.note_lengths());
        assert_eq!(back.rest_flags(), song.score.rest_flags());
        assert_eq!(back.pitched_cents(), song.score.pitched_cents());
        let syllables = |s: &svs_core::score::Score| -> Vec<String> {
            s.notes.iter().map(|n| n.syllable.clone()).collect()
        };
        assert_eq!(syllables(&back), syllables(&song.score));
    }
}
