use std::collections::HashMap;

use argctx::corpus::{Corpus, Label};
use argctx::synth::{chain_next, generate, SynthConfig};

fn config(local: f64, speaker: f64, seed: u64) -> SynthConfig {
    SynthConfig {
        n_discussions: 50,
        adus_per_discussion: 200,
        local_signal_strength: local,
        speaker_signal_strength: speaker,
        seed,
        ..SynthConfig::default()
    }
}

/// Plug-in mutual information in nats.
fn mutual_information<X: std::hash::Hash + Eq + Clone, Y: std::hash::Hash + Eq + Clone>(pairs: &[(X, Y)]) -> f64 {
    let n = pairs.len() as f64;
    let mut joint: HashMap<(X, Y), f64> = HashMap::new();
    let mut px: HashMap<X, f64> = HashMap::new();
    let mut py: HashMap<Y, f64> = HashMap::new();
    for (x, y) in pairs {
        *joint.entry((x.clone(), y.clone())).or_default() += 1.0;
        *px.entry(x.clone()).or_default() += 1.0;
        *py.entry(y.clone()).or_default() += 1.0;
    }
    joint
        .iter()
        .map(|((x, y), c)| {
            let p = c / n;
            p * (p / (px[x] / n * py[y] / n)).ln()
        })
        .sum()
}

fn proportions(c: &Corpus) -> [f64; 3] {
    let h = c.label_histogram();
    let n = h.total() as f64;
    Label::ALL.map(|l| h.get(l) as f64 / n)
}

#[test]
fn no_signal_means_no_dependence() {
    let c = generate(&config(0.0, 0.0, 1)).unwrap();
    assert_eq!(c.adu_count(), 10_000);
    let mut prev = Vec::new();
    let mut speaker = Vec::new();
    for d in c.discussions() {
        for w in d.adus.windows(2) {
            prev.push((w[0].label.unwrap(), w[1].label.unwrap()));
        }
        for a in &d.adus {
            let s = a.speaker_id.rsplit('s').next().unwrap().to_string();
            speaker.push((s, a.label.unwrap()));
        }
    }
    let mi_prev = mutual_information(&prev);
    let mi_speaker = mutual_information(&speaker);
    assert!(mi_prev < 0.01, "previous-label MI {mi_prev}");
    assert!(mi_speaker < 0.01, "speaker MI {mi_speaker}");
}

#[test]
fn full_local_signal_is_predicted_by_previous_label() {
    let c = generate(&config(1.0, 0.0, 2)).unwrap();
    let (mut hit, mut n) = (0, 0);
    for d in c.discussions() {
        for w in d.adus.windows(2) {
            n += 1;
            hit += usize::from(w[1].label == w[0].label.map(chain_next));
        }
    }
    assert_eq!(hit, n);
}

#[test]
fn base_proportions_are_reproduced() {
    let want = SynthConfig::default().base_label_distribution;
    let p = proportions(&generate(&config(0.0, 0.0, 3)).unwrap());
    for (got, want) in p.iter().zip(want) {
        assert!((got - want).abs() <= 0.015, "{p:?}");
    }
}

#[test]
fn seed_changes_stay_within_sampling_noise() {
    let want = SynthConfig::default().base_label_distribution;
    let a = proportions(&generate(&config(0.0, 0.0, 4)).unwrap());
    let b = proportions(&generate(&config(0.0, 0.0, 5)).unwrap());
    assert_ne!(a, b);
    for k in 0..3 {
        let sigma = (want[k] * (1.0 - want[k]) * 2.0 / 10_000.0).sqrt();
        assert!((a[k] - b[k]).abs() <= 3.0 * sigma, "{a:?} vs {b:?}");
    }
}
