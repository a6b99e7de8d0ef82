mod common;

use argctx::corpus::{parse_corpus, Adu, CorpusFormat};
use argctx::embeddings::WordVectorTable;
use argctx::features::{
    compute_idf, handcrafted_text, tokenize, IdfTable, LexiconBundle, HANDCRAFTED_DIM, SCALAR_NAMES, WORD_VECTOR_DIM,
};
use common::{LEXICONS, TABLE1};
use proptest::prelude::*;

fn lexicons() -> LexiconBundle {
    LexiconBundle::load_dir(std::path::Path::new(LEXICONS)).unwrap()
}

fn vectors() -> WordVectorTable {
    let mut t = WordVectorTable::new(WORD_VECTOR_DIM);
    for (i, w) in ["the", "family", "story", "because", "book", "good"].iter().enumerate() {
        let v: Vec<f64> = (0..WORD_VECTOR_DIM).map(|j| ((i * 31 + j * 7) % 13) as f64 / 13.0 - 0.5).collect();
        t.insert(w, &v).unwrap();
    }
    t
}

fn adu(i: usize, text: &str) -> Adu {
    Adu {
        discussion_id: "t".into(),
        global_index: i,
        speaker_id: "s".into(),
        text: text.into(),
        label: None,
    }
}

#[test]
fn table1_row2_golden() {
    let corpus = parse_corpus(std::path::Path::new(TABLE1), CorpusFormat::Csv).unwrap();
    let idf = compute_idf(&corpus).unwrap();
    let row2 = &corpus.discussions()[0].adus[1];
    let v = handcrafted_text(&row2.text, &lexicons(), &idf, &vectors()).unwrap();
    assert_eq!(v.0.len(), HANDCRAFTED_DIM);
    // 22 tokens: 19 words plus two commas and the full stop.
    assert_eq!(tokenize(&row2.text).len(), 22);
    assert_eq!(v.scalar("n_words"), 19.0);
    assert_eq!(v.scalar("n_symbols"), 3.0);
    // "because" once and "and" twice.
    assert_eq!(v.scalar("n_connectives"), 3.0);
    assert_eq!(v.scalar("n_capitals"), 1.0);
}

#[test]
fn numbers_and_symbols() {
    let idf = IdfTable::from_adus(&[adu(0, "12 + 30")]);
    let v = handcrafted_text("12 + 30", &lexicons(), &idf, &vectors()).unwrap();
    assert_eq!(v.scalar("n_numbers"), 2.0);
    assert_eq!(v.scalar("n_symbols"), 1.0);
    assert_eq!(v.scalar("n_capitals"), 0.0);
    assert_eq!(v.scalar("stopword_ratio"), 0.0);
}

#[test]
fn all_oov_text() {
    let idf = IdfTable::from_adus(&[adu(0, "zzq xqy")]);
    let v = handcrafted_text("zzq xqy", &lexicons(), &idf, &vectors()).unwrap();
    assert!(v.word_vector().iter().all(|&x| x == 0.0));
    assert_eq!(v.scalar("oov_ratio"), 1.0);
}

#[test]
fn idf_toy_corpus() {
    let adus = [adu(0, "a cat"), adu(1, "a dog"), adu(2, "a cat sat"), adu(3, "a bird")];
    let idf = IdfTable::from_adus(&adus);
    assert!((idf.idf("cat") - 2f64.ln()).abs() < 1e-15);
    assert_eq!(idf.idf("a"), 0.0);
    assert_eq!(idf.idf("never-seen"), 4f64.ln());
    assert_eq!(idf.idf("dog"), 4f64.ln());
}

const WORDS: [&str; 14] = [
    "the", "family", "story", "because", "book", "good", "Think", "and", "42", "3.5", "zzq", "I'd", "bad", "People",
];
const PUNCT: [&str; 4] = [".", ",", "!", "?"];

fn arb_tokens() -> impl Strategy<Value = Vec<String>> {
    let tok = prop_oneof![
        4 => proptest::sample::select(WORDS.to_vec()).prop_map(String::from),
        1 => proptest::sample::select(PUNCT.to_vec()).prop_map(String::from),
    ];
    proptest::collection::vec(tok, 1..30)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn vector_contract(toks in arb_tokens()) {
        let text = toks.join(" ");
        let idf = IdfTable::from_adus(&[adu(0, &text), adu(1, "the book")]);
        let v = handcrafted_text(&text, &lexicons(), &idf, &vectors()).unwrap();
        prop_assert_eq!(v.0.len(), HANDCRAFTED_DIM);
        prop_assert!(v.0.iter().all(|x| x.is_finite()));
        for name in ["stopword_ratio", "oov_ratio", "familiarity_coverage"] {
            let r = v.scalar(name);
            prop_assert!((0.0..=1.0).contains(&r), "{} = {}", name, r);
        }
    }

    #[test]
    fn scalars_ignore_token_order(toks in arb_tokens(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut shuffled = toks.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let (a, b) = (toks.join(" "), shuffled.join(" "));
        let idf = IdfTable::from_adus(&[adu(0, &a), adu(1, "the story")]);
        let va = handcrafted_text(&a, &lexicons(), &idf, &vectors()).unwrap();
        let vb = handcrafted_text(&b, &lexicons(), &idf, &vectors()).unwrap();
        for (x, y) in va.0.iter().zip(&vb.0) {
            prop_assert!(close(*x, *y), "{} vs {}", x, y);
        }
    }

    #[test]
    fn duplicated_text_scaling(toks in arb_tokens()) {
        let text = toks.join(" ");
        let twice = format!("{text} {text}");
        let idf = IdfTable::from_adus(&[adu(0, &text), adu(1, "good book")]);
        let lex = lexicons();
        let wv = vectors();
        let one = handcrafted_text(&text, &lex, &idf, &wv).unwrap();
        let two = handcrafted_text(&twice, &lex, &idf, &wv).unwrap();
        for (x, y) in one.word_vector().iter().zip(two.word_vector()) {
            prop_assert!(close(*x, *y));
        }
        for name in ["stopword_ratio", "avg_familiarity", "avg_chars_per_word", "idf_min", "idf_max"] {
            prop_assert!(close(one.scalar(name), two.scalar(name)), "{}", name);
        }
        for name in ["n_words", "n_connectives", "n_numbers", "n_symbols", "n_subjective", "n_polar"] {
            prop_assert_eq!(2.0 * one.scalar(name), two.scalar(name), "{}", name);
        }
    }
}

#[test]
fn scalar_names_cover_the_vector() {
    assert_eq!(WORD_VECTOR_DIM + SCALAR_NAMES.len(), HANDCRAFTED_DIM);
}
