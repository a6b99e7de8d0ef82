mod common;

use std::collections::HashMap;
use std::io::Write;

use argctx::corpus::{
    make_folds, parse_corpus, parse_csv_bytes, parse_jsonl_bytes, validate_corpus, Adu, AduKey, Corpus, CorpusFormat,
    Discussion, Label,
};
use argctx::embeddings::{average_pool, load_precomputed, read_word_vectors, PrecomputedAduEmbeddings};
use argctx::error::Error;
use common::TABLE1;
use proptest::prelude::*;

fn table1() -> Corpus {
    parse_corpus(std::path::Path::new(TABLE1), CorpusFormat::Csv).unwrap()
}

#[test]
fn table1_fixture() {
    let c = table1();
    let r = validate_corpus(&c);
    assert_eq!((r.n_adus, r.n_speakers, r.n_discussions), (5, 2, 1));
    let labels: Vec<Option<Label>> = c.adus().map(|a| a.label).collect();
    use Label::*;
    assert_eq!(labels, [Some(Claim), Some(Evidence), Some(Warrant), Some(Claim), Some(Claim)]);
}

fn arb_corpus() -> impl Strategy<Value = Corpus> {
    let adu = (
        "[a-z0-9]{1,4}",
        "[A-Za-z][A-Za-z0-9 ,.;:'\"!?()-]{0,40}",
        proptest::option::of(0usize..3),
    );
    proptest::collection::vec(proptest::collection::vec(adu, 1..8), 1..5).prop_map(|ds| {
        let discussions = ds
            .into_iter()
            .enumerate()
            .map(|(d, rows)| {
                let id = format!("disc{d}");
                Discussion {
                    adus: rows
                        .into_iter()
                        .enumerate()
                        .map(|(i, (speaker, text, label))| Adu {
                            discussion_id: id.clone(),
                            global_index: i,
                            speaker_id: speaker,
                            text,
                            label: label.and_then(Label::from_index),
                        })
                        .collect(),
                    id,
                }
            })
            .collect();
        Corpus::new(discussions).unwrap()
    })
}

proptest! {
    #[test]
    fn csv_round_trip(c in arb_corpus()) {
        prop_assert_eq!(parse_csv_bytes(c.to_csv_string().as_bytes()).unwrap(), c);
    }

    #[test]
    fn jsonl_round_trip(c in arb_corpus()) {
        prop_assert_eq!(parse_jsonl_bytes(c.to_jsonl_string().as_bytes()).unwrap(), c);
    }

    #[test]
    fn folds_partition_discussions(c in arb_corpus(), seed in 0u64..1000) {
        let k = c.discussions().len();
        let plan = make_folds(&c, k, seed).unwrap();
        let mut sizes = plan.fold_sizes();
        sizes.sort();
        prop_assert_eq!(sizes, vec![1; k]);
        prop_assert_eq!(make_folds(&c, k, seed).unwrap(), plan);
    }

    #[test]
    fn average_pool_is_permutation_invariant(
        vs in proptest::collection::vec(proptest::collection::vec(-100.0f64..100.0, 4), 1..12),
        rot in 0usize..12,
    ) {
        let mut rotated = vs.clone();
        rotated.rotate_left(rot % vs.len());
        let a = average_pool(&vs).unwrap();
        let b = average_pool(&rotated).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        let v = vs[0].clone();
        let same = average_pool(&[v.clone(), v.clone(), v.clone()]).unwrap();
        for (x, y) in same.iter().zip(&v) {
            prop_assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    }
}

#[test]
fn missing_column_and_bad_label_are_parse_errors() {
    let e = parse_csv_bytes(b"discussion_id,speaker_id,text\nd,1,hi\n").unwrap_err();
    assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");
    let e = parse_csv_bytes(b"discussion_id,speaker_id,text,label\nd,1,hi,claim\nd,1,yo,rebuttal\n").unwrap_err();
    assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
}

#[test]
fn average_pool_matches_summation_oracle() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(10);
    let vs: Vec<Vec<f64>> = (0..10).map(|_| (0..768).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let got = average_pool(&vs).unwrap();
    for j in 0..768 {
        let mut s = 0.0;
        for v in &vs {
            s += v[j];
        }
        let want = s / 10.0;
        assert!((got[j] - want).abs() <= 1e-12 * want.abs().max(1e-300));
    }
    assert_eq!(average_pool(&[vec![1.0, 3.0], vec![3.0, 5.0]]).unwrap(), [2.0, 4.0]);
}

#[test]
fn word_vector_file_spot_check() {
    let mut text = String::new();
    for i in 0..2000 {
        let v: Vec<String> = (0..100).map(|j| format!("{}", (i * 100 + j) as f64 / 7.0)).collect();
        text.push_str(&format!("tok{i} {}\n", v.join(" ")));
    }
    let t = read_word_vectors(text.as_bytes()).unwrap();
    assert_eq!((t.dim(), t.len()), (100, 2000));
    for i in [0usize, 777, 1999] {
        let raw = text.lines().nth(i).unwrap();
        let want: Vec<f64> = raw.split(' ').skip(1).map(|x| x.parse().unwrap()).collect();
        assert_eq!(t.get(&format!("tok{i}")).unwrap(), want.as_slice());
    }
}

fn embeddings_for(c: &Corpus, dim: usize) -> PrecomputedAduEmbeddings {
    let map: HashMap<AduKey, Vec<Vec<f64>>> = c
        .adus()
        .map(|a| (a.key(), vec![vec![a.global_index as f64; dim], vec![1.0; dim]]))
        .collect();
    PrecomputedAduEmbeddings::from_map(dim, map).unwrap()
}

#[test]
fn precomputed_embeddings_cover_table1() {
    let c = table1();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("emb.jsonl");
    std::fs::write(&path, embeddings_for(&c, 768).to_jsonl()).unwrap();
    let e = load_precomputed(&path, &c, Some(768)).unwrap();
    assert_eq!(e.dim(), 768);
    let key = AduKey {
        discussion_id: "table1".into(),
        global_index: 3,
    };
    assert_eq!(e.pooled(&key).unwrap(), vec![2.0; 768]);

    let full = embeddings_for(&c, 768).to_jsonl();
    let missing: String = full.lines().filter(|l| !l.contains("\"global_index\":2")).map(|l| format!("{l}\n")).collect();
    std::fs::write(&path, &missing).unwrap();
    let err = load_precomputed(&path, &c, Some(768)).unwrap_err();
    assert!(matches!(err, Error::Coverage(_)), "{err}");
    assert!(err.to_string().contains("(table1, 2)"), "{err}");

    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(embeddings_for(&c, 767).to_jsonl().as_bytes()).unwrap();
    let err = load_precomputed(&path, &c, Some(768)).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("expected 768, got 767"), "{msg}");
}
