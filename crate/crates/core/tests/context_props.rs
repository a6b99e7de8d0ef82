use argctx::context::{assemble_example, local_context, speaker_context, AduEncoder, ContextSpec, LocalPosition};
use argctx::corpus::{Adu, Discussion};
use argctx::error::Result;
use proptest::prelude::*;

fn arb_discussion() -> impl Strategy<Value = Discussion> {
    proptest::collection::vec(0u8..4, 1..30).prop_map(|speakers| Discussion {
        id: "d".into(),
        adus: speakers
            .into_iter()
            .enumerate()
            .map(|(i, s)| Adu {
                discussion_id: "d".into(),
                global_index: i,
                speaker_id: format!("s{s}"),
                text: format!("adu {i}"),
                label: None,
            })
            .collect(),
    })
}

fn arb_position() -> impl Strategy<Value = LocalPosition> {
    proptest::sample::select(LocalPosition::ALL.to_vec())
}

struct IndexEncoder;

impl AduEncoder for IndexEncoder {
    fn dim(&self) -> usize {
        2
    }
    fn speaker_dim(&self) -> usize {
        1
    }
    fn encode(&self, adu: &Adu) -> Result<Vec<f64>> {
        Ok(vec![adu.global_index as f64 + 1.0, 1.0])
    }
    fn encode_speaker(&self, adu: &Adu) -> Result<Vec<f64>> {
        Ok(vec![adu.global_index as f64])
    }
}

proptest! {
    #[test]
    fn speaker_context_matches_filter_sort_take(d in arb_discussion(), t in 0usize..30, k in 0usize..41) {
        let t = t % d.adus.len();
        let got: Vec<usize> = speaker_context(&d, t, k).unwrap().iter().map(|a| a.global_index).collect();
        let mut same: Vec<usize> = d.adus.iter()
            .filter(|a| a.global_index < t && a.speaker_id == d.adus[t].speaker_id)
            .map(|a| a.global_index)
            .collect();
        same.sort();
        let want = same[same.len().saturating_sub(k)..].to_vec();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn local_context_bounds(d in arb_discussion(), t in 0usize..30, size in 0usize..7, pos in arb_position()) {
        let t = t % d.adus.len();
        let lc = local_context(&d, t, size, pos).unwrap();
        let idx = lc.indices();
        prop_assert!(idx.len() <= size);
        prop_assert_eq!(lc.slot_indices().len(), size);
        prop_assert!(!idx.contains(&t));
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
        match pos {
            LocalPosition::Prior => prop_assert!(idx.iter().all(|&i| i < t && t - i <= size)),
            LocalPosition::Next => prop_assert!(idx.iter().all(|&i| i > t && i - t <= size)),
            LocalPosition::Both => prop_assert!(idx.iter().all(|&i| i.abs_diff(t) <= size)),
        }
        // Only ADUs that exist in the discussion may be missing.
        let available = match pos {
            LocalPosition::Prior => t.min(size),
            LocalPosition::Next => (d.adus.len() - 1 - t).min(size),
            LocalPosition::Both => (d.adus.len() - 1).min(size),
        };
        prop_assert_eq!(idx.len(), available);
    }

    #[test]
    fn assembly_is_total_and_deterministic(d in arb_discussion(), size in 0usize..7, pos in arb_position(), k in 0usize..41) {
        let spec = ContextSpec::local(size, pos).with_speaker(k);
        for t in 0..d.adus.len() {
            let a = assemble_example(&d, t, &spec, &IndexEncoder).unwrap();
            let b = assemble_example(&d, t, &spec, &IndexEncoder).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.flat().len(), 2 * (size + 1));
            prop_assert_eq!(a.mask_flags().len(), size);
            for (slot, present) in a.local_slots.iter().zip(&a.local_present) {
                prop_assert_eq!(*present, slot[1] == 1.0);
            }
        }
    }
}

#[test]
fn speaker_truncation_keeps_all_earlier_turns() {
    let adus = (0..12)
        .map(|i| Adu {
            discussion_id: "d".into(),
            global_index: i,
            speaker_id: if i % 2 == 0 { "a".into() } else { "b".into() },
            text: "x".into(),
            label: None,
        })
        .collect();
    let d = Discussion { id: "d".into(), adus };
    let got: Vec<usize> = speaker_context(&d, 10, 40).unwrap().iter().map(|a| a.global_index).collect();
    assert_eq!(got, [0, 2, 4, 6, 8]);
}
