//! Local and speaker context around a target ADU.
//!
//! Local context is the window of ADUs around the target regardless of who
//! spoke them. Speaker context is the target speaker's own earlier ADUs in the
//! same discussion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Adu, Discussion};
use crate::error::{Error, Result};

pub const MAX_LOCAL_SIZE: usize = 6;
pub const MAX_SPEAKER_SIZE: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum LocalPosition {
    Prior,
    Next,
    #[default]
    Both,
}

impl LocalPosition {
    pub const ALL: [LocalPosition; 3] = [LocalPosition::Prior, LocalPosition::Next, LocalPosition::Both];

    pub fn as_str(self) -> &'static str {
        match self {
            LocalPosition::Prior => "prior",
            LocalPosition::Next => "next",
            LocalPosition::Both => "both",
        }
    }

    /// Number of (prior, next) slots for a window of `size` ADUs. Odd `Both`
    /// sizes give the extra slot to the prior side.
    pub fn slots(self, size: usize) -> (usize, usize) {
        match self {
            LocalPosition::Prior => (size, 0),
            LocalPosition::Next => (0, size),
            LocalPosition::Both => (size.div_ceil(2), size / 2),
        }
    }
}

impl fmt::Display for LocalPosition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LocalPosition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_lowercase().as_str() {
            "prior" => Ok(LocalPosition::Prior),
            "next" => Ok(LocalPosition::Next),
            "both" => Ok(LocalPosition::Both),
            other => Err(Error::Config(format!("unknown local position {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextSpec {
    #[serde(default)]
    pub local_size: usize,
    #[serde(default)]
    pub local_position: LocalPosition,
    #[serde(default)]
    pub speaker_size: usize,
    #[serde(default)]
    pub local_attention: bool,
    #[serde(default)]
    pub speaker_attention: bool,
}

impl Default for ContextSpec {
    fn default() -> Self {
        ContextSpec::none()
    }
}

impl ContextSpec {
    /// No context: the baseline model.
    pub fn none() -> ContextSpec {
        ContextSpec {
            local_size: 0,
            local_position: LocalPosition::Both,
            speaker_size: 0,
            local_attention: false,
            speaker_attention: false,
        }
    }

    pub fn local(size: usize, position: LocalPosition) -> ContextSpec {
        ContextSpec {
            local_size: size,
            local_position: position,
            ..ContextSpec::none()
        }
    }

    pub fn speaker(size: usize) -> ContextSpec {
        ContextSpec {
            speaker_size: size,
            ..ContextSpec::none()
        }
    }

    /// Attention over the maximal local window (both sides, six ADUs).
    pub fn local_attention() -> ContextSpec {
        ContextSpec {
            local_size: MAX_LOCAL_SIZE,
            local_position: LocalPosition::Both,
            local_attention: true,
            ..ContextSpec::none()
        }
    }

    /// Attention over the maximal speaker history (forty ADUs).
    pub fn speaker_attention() -> ContextSpec {
        ContextSpec {
            speaker_size: MAX_SPEAKER_SIZE,
            speaker_attention: true,
            ..ContextSpec::none()
        }
    }

    pub fn with_speaker(mut self, size: usize) -> ContextSpec {
        self.speaker_size = size;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.local_size > MAX_LOCAL_SIZE {
            return Err(Error::Config(format!(
                "local_size {} exceeds the maximum of {MAX_LOCAL_SIZE}",
                self.local_size
            )));
        }
        if self.speaker_size > MAX_SPEAKER_SIZE {
            return Err(Error::Config(format!(
                "speaker_size {} exceeds the maximum of {MAX_SPEAKER_SIZE}",
                self.speaker_size
            )));
        }
        if self.local_attention
            && (self.local_position != LocalPosition::Both || self.local_size != MAX_LOCAL_SIZE)
        {
            return Err(Error::Config(format!(
                "local attention requires position both and size {MAX_LOCAL_SIZE}"
            )));
        }
        if self.speaker_attention && self.speaker_size != MAX_SPEAKER_SIZE {
            return Err(Error::Config(format!(
                "speaker attention requires speaker_size {MAX_SPEAKER_SIZE}"
            )));
        }
        Ok(())
    }

    pub fn has_local(&self) -> bool {
        self.local_size > 0
    }

    pub fn has_speaker(&self) -> bool {
        self.speaker_size > 0
    }

    /// (prior, next) slot counts of the local window.
    pub fn local_slots(&self) -> (usize, usize) {
        self.local_position.slots(self.local_size)
    }
}

/// One context ADU and the slot it occupies in the local layout. Slots
/// `0..n_prior` hold prior context oldest to newest, slots `n_prior..` hold next
/// context nearest to farthest.
#[derive(Debug, Clone, Copy)]
pub struct ContextAdu<'a> {
    pub adu: &'a Adu,
    pub slot: usize,
}

#[derive(Debug, Clone)]
pub struct LocalContext<'a> {
    pub n_prior_slots: usize,
    pub n_next_slots: usize,
    /// Context ADUs in discussion order.
    pub entries: Vec<ContextAdu<'a>>,
}

impl<'a> LocalContext<'a> {
    pub fn adus(&self) -> Vec<&'a Adu> {
        self.entries.iter().map(|e| e.adu).collect()
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.adu.global_index).collect()
    }

    pub fn n_slots(&self) -> usize {
        self.n_prior_slots + self.n_next_slots
    }

    /// Discussion index per slot, `None` for padding.
    pub fn slot_indices(&self) -> Vec<Option<usize>> {
        let mut slots = vec![None; self.n_slots()];
        for e in &self.entries {
            slots[e.slot] = Some(e.adu.global_index);
        }
        slots
    }
}

fn check_target(discussion: &Discussion, target_index: usize) -> Result<()> {
    if target_index >= discussion.adus.len() {
        return Err(Error::Data(format!(
            "target index {target_index} out of range for discussion {:?} with {} ADUs",
            discussion.id,
            discussion.adus.len()
        )));
    }
    Ok(())
}

/// Local window of `size` ADUs around the target, never including it.
///
/// For `Both`, a side that runs into the discussion boundary hands its unused
/// share to the other side (prior first). Borrowed ADUs occupy the vacant
/// slots of the short side, so every returned ADU has a slot.
pub fn local_context<'a>(
    discussion: &'a Discussion,
    target_index: usize,
    size: usize,
    position: LocalPosition,
) -> Result<LocalContext<'a>> {
    check_target(discussion, target_index)?;
    let (n_prior, n_next) = position.slots(size);
    let avail_prior = target_index;
    let avail_next = discussion.adus.len() - 1 - target_index;

    let mut take_prior = n_prior.min(avail_prior);
    let mut take_next = n_next.min(avail_next);
    let (own_prior, own_next) = (take_prior, take_next);
    if position == LocalPosition::Both {
        let mut spare = size - take_prior - take_next;
        let extra = spare.min(avail_prior - take_prior);
        take_prior += extra;
        spare -= extra;
        take_next += spare.min(avail_next - take_next);
    }

    // Vacant slots of each side, nearest to the target first.
    let mut vacant_prior = (0..n_prior - own_prior).rev();
    let mut vacant_next = n_prior + own_next..n_prior + n_next;

    let mut entries = Vec::with_capacity(take_prior + take_next);
    for rank in 1..=take_prior {
        let slot = if rank <= own_prior {
            n_prior - rank
        } else {
            vacant_next.next().expect("borrowed prior ADU has a vacant next slot")
        };
        entries.push(ContextAdu {
            adu: &discussion.adus[target_index - rank],
            slot,
        });
    }
    for rank in 1..=take_next {
        let slot = if rank <= own_next {
            n_prior + rank - 1
        } else {
            vacant_prior.next().expect("borrowed next ADU has a vacant prior slot")
        };
        entries.push(ContextAdu {
            adu: &discussion.adus[target_index + rank],
            slot,
        });
    }
    entries.sort_by_key(|e| e.adu.global_index);
    Ok(LocalContext {
        n_prior_slots: n_prior,
        n_next_slots: n_next,
        entries,
    })
}

/// The `k` closest earlier ADUs by the target's speaker, in discussion order.
pub fn speaker_context(discussion: &Discussion, target_index: usize, k: usize) -> Result<Vec<&Adu>> {
    check_target(discussion, target_index)?;
    let speaker = &discussion.adus[target_index].speaker_id;
    let mut out: Vec<&Adu> = discussion.adus[..target_index]
        .iter()
        .rev()
        .filter(|a| &a.speaker_id == speaker)
        .take(k)
        .collect();
    out.reverse();
    Ok(out)
}

/// Which ADUs feed one training or prediction example.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExamplePlan {
    pub target: usize,
    pub n_prior_slots: usize,
    /// Discussion index per local slot, `None` for padding.
    pub local_slots: Vec<Option<usize>>,
    /// Speaker history indices in discussion order; may be empty.
    pub speaker: Vec<usize>,
}

pub fn plan_example(discussion: &Discussion, target_index: usize, spec: &ContextSpec) -> Result<ExamplePlan> {
    let local = local_context(discussion, target_index, spec.local_size, spec.local_position)?;
    let speaker = speaker_context(discussion, target_index, spec.speaker_size)?
        .into_iter()
        .map(|a| a.global_index)
        .collect();
    Ok(ExamplePlan {
        target: target_index,
        n_prior_slots: local.n_prior_slots,
        local_slots: local.slot_indices(),
        speaker,
    })
}

/// Fixed-size per-ADU encoders: the main vector and the reduced speaker vector.
pub trait AduEncoder {
    fn dim(&self) -> usize;
    fn speaker_dim(&self) -> usize;
    fn encode(&self, adu: &Adu) -> Result<Vec<f64>>;
    fn encode_speaker(&self, adu: &Adu) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssembledInput {
    pub target: Vec<f64>,
    pub n_prior_slots: usize,
    /// One vector per local slot; zeros where `local_present` is false.
    pub local_slots: Vec<Vec<f64>>,
    pub local_present: Vec<bool>,
    /// Unpadded speaker history; empty when the speaker has no earlier ADUs.
    pub speaker: Vec<Vec<f64>>,
}

impl AssembledInput {
    pub fn speaker_is_empty(&self) -> bool {
        self.speaker.is_empty()
    }

    /// `[prior slots oldest..newest, target, next slots nearest..farthest]`.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.target.len() * (self.local_slots.len() + 1));
        for s in &self.local_slots[..self.n_prior_slots] {
            out.extend_from_slice(s);
        }
        out.extend_from_slice(&self.target);
        for s in &self.local_slots[self.n_prior_slots..] {
            out.extend_from_slice(s);
        }
        out
    }

    /// One 0/1 presence flag per local slot.
    pub fn mask_flags(&self) -> Vec<f64> {
        self.local_present.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect()
    }
}

pub fn assemble_example(
    discussion: &Discussion,
    target_index: usize,
    spec: &ContextSpec,
    encoder: &dyn AduEncoder,
) -> Result<AssembledInput> {
    spec.validate()?;
    let plan = plan_example(discussion, target_index, spec)?;
    let dim = encoder.dim();
    let encode = |adu: &Adu| -> Result<Vec<f64>> {
        let v = encoder.encode(adu)?;
        if v.len() != dim {
            return Err(Error::dim(format!("encoding of {}", adu.key()), dim, v.len()));
        }
        Ok(v)
    };
    let target = encode(&discussion.adus[target_index])?;
    let mut local_slots = Vec::with_capacity(plan.local_slots.len());
    for slot in &plan.local_slots {
        local_slots.push(match slot {
            Some(i) => encode(&discussion.adus[*i])?,
            None => vec![0.0; dim],
        });
    }
    let sdim = encoder.speaker_dim();
    let mut speaker = Vec::with_capacity(plan.speaker.len());
    for &i in &plan.speaker {
        let adu = &discussion.adus[i];
        let v = encoder.encode_speaker(adu)?;
        if v.len() != sdim {
            return Err(Error::dim(format!("speaker encoding of {}", adu.key()), sdim, v.len()));
        }
        speaker.push(v);
    }
    Ok(AssembledInput {
        target,
        n_prior_slots: plan.n_prior_slots,
        local_present: plan.local_slots.iter().map(Option::is_some).collect(),
        local_slots,
        speaker,
    })
}
