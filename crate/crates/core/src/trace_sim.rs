//! Synthetic activity traces for exercising the decision engine.
//!
//! Each trace renders one performed-subset of a definition: one event per
//! performed atomic in definition order, optionally followed by a trailing
//! behavior observation. A separate direct-scan labeller provides the
//! expected verdict for every generated trace.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activity_model::{ComplexActivityDefinition, MAX_ENUMERATION_ATOMICS};
use crate::edscca::{ActivityTrace, Branch, Outcome, TraceEvent, Verdict};
use crate::error::{Error, Result};
use crate::labels::Behavior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsetPolicy {
    /// Every performed-subset, in enumeration order.
    All,
    /// `n` distinct subsets drawn without replacement, emitted in
    /// enumeration order.
    RandomN(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub subset_policy: SubsetPolicy,
    /// Behavior observed after the last performed atomic.
    pub behavior_tail: Option<Behavior>,
    /// Probability of performing an atomic on a wrong context.
    pub mismatch_rate: f64,
    /// Behavior recorded on the atomic-activity events themselves.
    pub action_behavior: Behavior,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            seed: 0,
            subset_policy: SubsetPolicy::All,
            behavior_tail: None,
            mismatch_rate: 0.0,
            action_behavior: Behavior::Standing,
        }
    }
}

/// Subset masks selected by the policy, ascending.
fn subset_masks(n_atomics: usize, config: &SimConfig) -> Result<Vec<u64>> {
    if n_atomics > MAX_ENUMERATION_ATOMICS {
        return Err(Error::Capacity(format!(
            "cannot simulate subsets of {} atomics (limit {})",
            n_atomics, MAX_ENUMERATION_ATOMICS
        )));
    }
    let total = 1usize << n_atomics;
    match config.subset_policy {
        SubsetPolicy::All => Ok((0..total as u64).collect()),
        SubsetPolicy::RandomN(n) => {
            if n > total {
                return Err(Error::validation(format!(
                    "asked for {} distinct subsets but only {} exist",
                    n, total
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut picks: Vec<u64> = index::sample(&mut rng, total, n)
                .into_iter()
                .map(|i| i as u64)
                .collect();
            picks.sort_unstable();
            Ok(picks)
        }
    }
}

/// Render one performed-subset (bit `i` selects `atomics[i]`) as a trace.
/// The empty subset yields an empty trace regardless of the tail.
pub fn render(
    def: &ComplexActivityDefinition,
    mask: u64,
    config: &SimConfig,
    rng: &mut impl Rng,
) -> ActivityTrace {
    let zone = def.zone();
    let contexts = def.contexts();
    let mut events = Vec::new();
    let mut t = 0i64;
    for (i, a) in def.atomics().iter().enumerate() {
        if mask & (1 << i) == 0 {
            continue;
        }
        let paired = def.context_for(&a.id).expect("validated pairing");
        let ctx = if contexts.len() > 1 && rng.random_bool(config.mismatch_rate) {
            let others: Vec<&str> = contexts
                .iter()
                .filter(|c| c.id != paired.id)
                .map(|c| c.id.as_str())
                .collect();
            others[rng.random_range(0..others.len())]
        } else {
            paired.id.as_str()
        };
        events.push(TraceEvent::action(
            &a.id,
            ctx,
            config.action_behavior,
            zone,
            t,
        ));
        t += 1;
    }
    if !events.is_empty() {
        if let Some(tail) = config.behavior_tail {
            events.push(TraceEvent::observation(tail, zone, t));
        }
    }
    ActivityTrace {
        zone: zone.to_string(),
        events,
    }
}

/// Generate traces for the subsets selected by `config`. The trace for subset
/// `mask` draws its mismatches from stream `mask` of the seeded generator, so
/// traces do not depend on each other.
pub fn generate(def: &ComplexActivityDefinition, config: &SimConfig) -> Result<Vec<ActivityTrace>> {
    if !(0.0..=1.0).contains(&config.mismatch_rate) {
        return Err(Error::validation(format!(
            "mismatch rate {} outside [0, 1]",
            config.mismatch_rate
        )));
    }
    let masks = subset_masks(def.atomic_count(), config)?;
    Ok(masks
        .iter()
        .map(|&mask| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(mask);
            render(def, mask, config, &mut rng)
        })
        .collect())
}

/// Expected verdict for a trace of `def`, computed by scanning the events
/// directly against the definition.
pub fn label_trace(def: &ComplexActivityDefinition, trace: &ActivityTrace) -> Result<Verdict> {
    let mut hits = vec![false; def.atomic_count()];
    for e in &trace.events {
        let Some(a) = e.atomic_id.as_deref() else {
            continue;
        };
        let Some(pos) = def.atomics().iter().position(|x| x.id == a) else {
            return Err(Error::validation(format!("unknown atomic '{}'", a)));
        };
        let on_pair = e.context_id.as_deref() == def.context_for(a).map(|c| c.id.as_str());
        hits[pos] |= on_pair;
    }
    let start_ok = def
        .atomics()
        .iter()
        .zip(&hits)
        .all(|(a, hit)| !a.is_start || *hit);
    let end_ok = def
        .atomics()
        .iter()
        .zip(&hits)
        .all(|(a, hit)| !a.is_end || *hit);

    // walk backwards over the lying tail, remembering atomics seen inside it
    let mut atomics_in_tail = 0;
    let mut tail_len = 0;
    for e in trace.events.iter().rev() {
        if e.behavior != Behavior::Lying {
            break;
        }
        tail_len += 1;
        if e.atomic_id.is_some() {
            atomics_in_tail += 1;
        }
    }
    let onset_has_atomic = tail_len > 0
        && trace.events[trace.events.len() - tail_len]
            .atomic_id
            .is_some();
    let trailing_lying = tail_len > 0;
    let no_further_atomics = atomics_in_tail - usize::from(onset_has_atomic) == 0;

    let branch = match (start_ok, end_ok) {
        (true, false) => Branch::StartOnly,
        (true, true) => Branch::Completed,
        (false, true) => Branch::EndOnly,
        (false, false) => Branch::NoActivity,
    };
    let emergency = (start_ok != end_ok) && trailing_lying && no_further_atomics;
    Ok(Verdict {
        outcome: if emergency {
            Outcome::Emergency
        } else {
            Outcome::NonEmergency
        },
        branch,
        reason: format!(
            "start_ok={} end_ok={} trailing_lying={} no_further_atomics={}",
            start_ok, end_ok, trailing_lying, no_further_atomics
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lunch() -> ComplexActivityDefinition {
        ComplexActivityDefinition::eating_lunch()
    }

    #[test]
    fn all_policy_counts() {
        let traces = generate(&lunch(), &SimConfig::default()).unwrap();
        assert_eq!(traces.len(), 64);
        assert!(traces[0].events.is_empty());
        assert_eq!(traces[63].events.len(), 6);
    }

    #[test]
    fn empty_subset_ignores_tail() {
        let cfg = SimConfig {
            behavior_tail: Some(Behavior::Lying),
            ..Default::default()
        };
        let traces = generate(&lunch(), &cfg).unwrap();
        assert!(traces[0].events.is_empty());
        assert_eq!(traces[1].events.len(), 2);
        assert_eq!(traces[1].events[1].behavior, Behavior::Lying);
    }

    #[test]
    fn random_policy_is_seeded() {
        let cfg = SimConfig {
            seed: 42,
            subset_policy: SubsetPolicy::RandomN(10),
            mismatch_rate: 0.3,
            ..Default::default()
        };
        let a = generate(&lunch(), &cfg).unwrap();
        assert_eq!(a.len(), 10);
        assert_eq!(a, generate(&lunch(), &cfg).unwrap());
        let other = SimConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(a, generate(&lunch(), &other).unwrap());
        let none = SimConfig {
            subset_policy: SubsetPolicy::RandomN(0),
            ..cfg
        };
        assert!(generate(&lunch(), &none).unwrap().is_empty());
    }

    #[test]
    fn bad_configs() {
        let cfg = SimConfig {
            mismatch_rate: 1.5,
            ..Default::default()
        };
        assert!(generate(&lunch(), &cfg).is_err());
        let cfg = SimConfig {
            subset_policy: SubsetPolicy::RandomN(65),
            ..Default::default()
        };
        assert!(generate(&lunch(), &cfg).is_err());
    }

    #[test]
    fn full_mismatch_never_uses_pair() {
        let cfg = SimConfig {
            mismatch_rate: 1.0,
            ..Default::default()
        };
        let d = lunch();
        for t in generate(&d, &cfg).unwrap() {
            for e in &t.events {
                let a = e.atomic_id.as_deref().unwrap();
                assert_ne!(
                    e.context_id.as_deref(),
                    Some(d.context_for(a).unwrap().id.as_str())
                );
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let d = lunch();
        let full = render(
            &d,
            0b111111,
            &SimConfig {
                behavior_tail: Some(Behavior::Standing),
                ..Default::default()
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let v = label_trace(&d, &full).unwrap();
        assert_eq!(
            (v.outcome, v.branch),
            (Outcome::NonEmergency, Branch::Completed)
        );

        let start_only = render(
            &d,
            0b000011,
            &SimConfig {
                behavior_tail: Some(Behavior::Lying),
                ..Default::default()
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let v = label_trace(&d, &start_only).unwrap();
        assert_eq!(
            (v.outcome, v.branch),
            (Outcome::Emergency, Branch::StartOnly)
        );

        let none = ActivityTrace {
            zone: "kitchen".into(),
            events: vec![],
        };
        let v = label_trace(&d, &none).unwrap();
        assert_eq!(
            (v.outcome, v.branch),
            (Outcome::NonEmergency, Branch::NoActivity)
        );
    }
}
