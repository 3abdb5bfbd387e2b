//! Emergency detection over symbolic activity traces.
//!
//! A trace is matched against semantic definitions kept in a knowledge base.
//! Whether the start markers and the end markers of the matched activity were
//! performed on their paired contexts selects one of four branches:
//!
//! | start | end | branch | outcome                                  |
//! |-------|-----|--------|------------------------------------------|
//! | yes   | no  | iii    | emergency iff the user ends up lying idle |
//! | yes   | yes | iv     | no emergency, activity completed          |
//! | no    | yes | v      | emergency iff the user ends up lying idle |
//! | no    | no  | vi     | no emergency, no activity performed       |
//!
//! "Lying idle" means the trace ends in a run of lying events and no atomic
//! activity is performed after that run begins.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::activity_model::ComplexActivityDefinition;
use crate::error::{Error, Result};
use crate::labels::Behavior;
use crate::zone_model::{LyingRule, ZoneMap};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Atomic activity performed at this step, if any. Events without one
    /// are plain behavior observations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atomic_id: Option<String>,
    /// Context attribute the atomic activity was performed on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_id: Option<String>,
    pub behavior: Behavior,
    pub zone: String,
    pub timestamp: i64,
}

impl TraceEvent {
    pub fn action(
        atomic: &str,
        context: &str,
        behavior: Behavior,
        zone: &str,
        timestamp: i64,
    ) -> Self {
        TraceEvent {
            atomic_id: Some(atomic.into()),
            context_id: Some(context.into()),
            behavior,
            zone: zone.into(),
            timestamp,
        }
    }

    pub fn observation(behavior: Behavior, zone: &str, timestamp: i64) -> Self {
        TraceEvent {
            atomic_id: None,
            context_id: None,
            behavior,
            zone: zone.into(),
            timestamp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityTrace {
    pub zone: String,
    #[serde(default)]
    pub events: Vec<TraceEvent>,
}

impl ActivityTrace {
    pub fn new(zone: impl Into<String>, events: Vec<TraceEvent>) -> Result<Self> {
        let t = ActivityTrace {
            zone: zone.into(),
            events,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.events.windows(2).enumerate() {
            if w[1].timestamp < w[0].timestamp {
                return Err(Error::validation(format!(
                    "trace timestamps decrease at event {}",
                    i + 2
                )));
            }
        }
        if let Some(i) = self
            .events
            .iter()
            .position(|e| e.atomic_id.is_none() && e.context_id.is_some())
        {
            return Err(Error::validation(format!(
                "event {} names a context without an atomic activity",
                i + 1
            )));
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    fn atomic_ids(&self) -> impl Iterator<Item = &str> {
        self.events.iter().filter_map(|e| e.atomic_id.as_deref())
    }
}

/// Parse a JSON array of traces, validating each.
pub fn traces_from_json(text: &str) -> Result<Vec<ActivityTrace>> {
    let traces: Vec<ActivityTrace> = serde_json::from_str(text)?;
    for t in &traces {
        t.validate()?;
    }
    Ok(traces)
}

pub fn traces_to_json(traces: &[ActivityTrace]) -> String {
    serde_json::to_string_pretty(traces).expect("traces serialize")
}

/// The ten characteristic sets of a complex activity, bound to a zone.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticDefinition {
    pub name: String,
    pub zone: String,
    pub atomics: BTreeSet<String>,
    pub contexts: BTreeSet<String>,
    pub other_atomics: BTreeSet<String>,
    pub other_contexts: BTreeSet<String>,
    pub core_atomics: BTreeSet<String>,
    pub core_contexts: BTreeSet<String>,
    pub start_atomics: BTreeSet<String>,
    pub end_atomics: BTreeSet<String>,
    pub start_contexts: BTreeSet<String>,
    pub end_contexts: BTreeSet<String>,
    /// atomic id -> paired context id
    pub pairs: BTreeMap<String, String>,
}

impl SemanticDefinition {
    pub fn from_definition(def: &ComplexActivityDefinition) -> Self {
        let mut s = SemanticDefinition {
            name: def.name().to_string(),
            zone: def.zone().to_string(),
            atomics: BTreeSet::new(),
            contexts: BTreeSet::new(),
            other_atomics: BTreeSet::new(),
            other_contexts: BTreeSet::new(),
            core_atomics: BTreeSet::new(),
            core_contexts: BTreeSet::new(),
            start_atomics: BTreeSet::new(),
            end_atomics: BTreeSet::new(),
            start_contexts: BTreeSet::new(),
            end_contexts: BTreeSet::new(),
            pairs: BTreeMap::new(),
        };
        for a in def.atomics() {
            let ctx = def
                .context_for(&a.id)
                .expect("validated definitions pair every atomic")
                .id
                .clone();
            s.atomics.insert(a.id.clone());
            s.contexts.insert(ctx.clone());
            if a.is_core {
                s.core_atomics.insert(a.id.clone());
                s.core_contexts.insert(ctx.clone());
            } else {
                s.other_atomics.insert(a.id.clone());
                s.other_contexts.insert(ctx.clone());
            }
            if a.is_start {
                s.start_atomics.insert(a.id.clone());
                s.start_contexts.insert(ctx.clone());
            }
            if a.is_end {
                s.end_atomics.insert(a.id.clone());
                s.end_contexts.insert(ctx.clone());
            }
            s.pairs.insert(a.id.clone(), ctx);
        }
        s
    }

    pub fn key(&self) -> KbKey {
        KbKey {
            start_atomics: self.start_atomics.clone(),
            start_contexts: self.start_contexts.clone(),
            zone: self.zone.clone(),
        }
    }
}

/// Semantic definition of `def` as observed in the trace's zone. An empty
/// zone on the trace keeps the definition's own zone.
pub fn sdca_build(trace: &ActivityTrace, def: &ComplexActivityDefinition) -> SemanticDefinition {
    let mut s = SemanticDefinition::from_definition(def);
    if !trace.zone.is_empty() {
        s.zone = trace.zone.clone();
    }
    s
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct KbKey {
    pub start_atomics: BTreeSet<String>,
    pub start_contexts: BTreeSet<String>,
    pub zone: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(from = "Vec<SemanticDefinition>", into = "Vec<SemanticDefinition>")]
pub struct KnowledgeBase {
    entries: BTreeMap<KbKey, SemanticDefinition>,
}

impl From<Vec<SemanticDefinition>> for KnowledgeBase {
    fn from(v: Vec<SemanticDefinition>) -> Self {
        let mut kb = KnowledgeBase::default();
        for s in v {
            kb.insert(s);
        }
        kb
    }
}

impl From<KnowledgeBase> for Vec<SemanticDefinition> {
    fn from(kb: KnowledgeBase) -> Self {
        kb.entries.into_values().collect()
    }
}

impl KnowledgeBase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert unless an entry with the same key exists. Returns whether the
    /// knowledge base changed.
    pub fn insert(&mut self, sdca: SemanticDefinition) -> bool {
        match self.entries.entry(sdca.key()) {
            std::collections::btree_map::Entry::Occupied(_) => false,
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(sdca);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &SemanticDefinition> {
        self.entries.values()
    }

    pub fn from_definitions<'a>(
        defs: impl IntoIterator<Item = &'a ComplexActivityDefinition>,
    ) -> Self {
        let mut kb = KnowledgeBase::new();
        for d in defs {
            kb.insert(SemanticDefinition::from_definition(d));
        }
        kb
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("knowledge base serializes")
    }
}

/// Functional insert: the returned knowledge base holds `sdca` unless its key
/// was already present.
pub fn kb_insert(kb: &KnowledgeBase, sdca: SemanticDefinition) -> KnowledgeBase {
    let mut next = kb.clone();
    next.insert(sdca);
    next
}

/// Entry whose start atomics and start contexts are all covered by the
/// trace's earliest atomic events in the same zone. The window is as wide as
/// the entry's start set. Among several matches the largest start set wins,
/// then key order.
pub fn match_start<'a>(
    kb: &'a KnowledgeBase,
    trace: &ActivityTrace,
) -> Option<&'a SemanticDefinition> {
    let actions: Vec<(&str, Option<&str>)> = trace
        .events
        .iter()
        .filter_map(|e| e.atomic_id.as_deref().map(|a| (a, e.context_id.as_deref())))
        .collect();
    kb.entries()
        .filter(|s| s.zone == trace.zone)
        .filter(|s| {
            let window = &actions[..s.start_atomics.len().min(actions.len())];
            let seen_atomics: BTreeSet<&str> = window.iter().map(|(a, _)| *a).collect();
            let seen_contexts: BTreeSet<&str> = window.iter().filter_map(|(_, c)| *c).collect();
            s.start_atomics
                .iter()
                .all(|a| seen_atomics.contains(a.as_str()))
                && s.start_contexts
                    .iter()
                    .all(|c| seen_contexts.contains(c.as_str()))
        })
        .fold(None, |best: Option<&SemanticDefinition>, s| match best {
            Some(b) if b.start_atomics.len() >= s.start_atomics.len() => Some(b),
            _ => Some(s),
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Emergency,
    NonEmergency,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Emergency => "emergency",
            Outcome::NonEmergency => "non-emergency",
        })
    }
}

/// Which rule produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Branch {
    /// start performed, end not
    #[serde(rename = "iii")]
    StartOnly,
    /// start and end performed
    #[serde(rename = "iv")]
    Completed,
    /// end performed, start not
    #[serde(rename = "v")]
    EndOnly,
    /// neither performed
    #[serde(rename = "vi")]
    NoActivity,
    /// no semantic definition applied; lying-vs-zone rule only
    #[serde(rename = "zone-rule")]
    ZoneRule,
}

impl Branch {
    pub fn for_markers(start_ok: bool, end_ok: bool) -> Branch {
        match (start_ok, end_ok) {
            (true, false) => Branch::StartOnly,
            (true, true) => Branch::Completed,
            (false, true) => Branch::EndOnly,
            (false, false) => Branch::NoActivity,
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::StartOnly => "iii",
            Branch::Completed => "iv",
            Branch::EndOnly => "v",
            Branch::NoActivity => "vi",
            Branch::ZoneRule => "zone-rule",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub branch: Branch,
    pub reason: String,
}

/// How many start (or end) markers must be seen on their contexts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MarkerMatch {
    #[default]
    All,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionConfig {
    pub markers: MarkerMatch,
    pub lying: LyingRule,
}

fn markers_met(
    sdca: &SemanticDefinition,
    markers: &BTreeSet<String>,
    trace: &ActivityTrace,
    mode: MarkerMatch,
) -> bool {
    let performed = |a: &String| {
        let ctx = sdca.pairs.get(a);
        trace
            .events
            .iter()
            .any(|e| e.atomic_id.as_ref() == Some(a) && e.context_id.as_ref() == ctx)
    };
    match mode {
        MarkerMatch::All => !markers.is_empty() && markers.iter().all(performed),
        MarkerMatch::Any => markers.iter().any(performed),
    }
}

/// Index where the trailing lying run begins, if the trace ends lying and no
/// atomic activity follows that onset.
fn idle_lying_onset(events: &[TraceEvent]) -> Option<usize> {
    let onset = events
        .iter()
        .rposition(|e| e.behavior != Behavior::Lying)
        .map_or(0, |i| i + 1);
    if onset == events.len() {
        return None;
    }
    if events[onset + 1..].iter().any(|e| e.atomic_id.is_some()) {
        return None;
    }
    Some(onset)
}

pub fn edscca_decide(sdca: &SemanticDefinition, trace: &ActivityTrace) -> Result<Verdict> {
    edscca_decide_with(sdca, trace, &DecisionConfig::default())
}

pub fn edscca_decide_with(
    sdca: &SemanticDefinition,
    trace: &ActivityTrace,
    config: &DecisionConfig,
) -> Result<Verdict> {
    trace.validate()?;
    if let Some(unknown) = trace.atomic_ids().find(|a| !sdca.atomics.contains(*a)) {
        return Err(Error::validation(format!(
            "trace references atomic '{}' unknown to '{}'",
            unknown, sdca.name
        )));
    }
    let start_ok = markers_met(sdca, &sdca.start_atomics, trace, config.markers);
    let end_ok = markers_met(sdca, &sdca.end_atomics, trace, config.markers);
    let branch = Branch::for_markers(start_ok, end_ok);

    let (outcome, reason) = match branch {
        Branch::Completed => (
            Outcome::NonEmergency,
            format!("'{}' completed from start to end", sdca.name),
        ),
        Branch::NoActivity => (
            Outcome::NonEmergency,
            format!("no start or end activity of '{}' performed", sdca.name),
        ),
        _ => {
            let mismatches: Vec<String> = trace
                .events
                .iter()
                .filter_map(|e| {
                    let a = e.atomic_id.as_ref()?;
                    (sdca.pairs.get(a) != e.context_id.as_ref()).then(|| {
                        format!("{} on {}", a, e.context_id.as_deref().unwrap_or("nothing"))
                    })
                })
                .collect();
            let half = if start_ok {
                "started but not finished"
            } else {
                "finished without a start"
            };
            let detail = if mismatches.is_empty() {
                String::new()
            } else {
                format!("; mismatched {}", mismatches.join(", "))
            };
            match idle_lying_onset(&trace.events) {
                Some(onset) => {
                    let lie =
                        trace.events.last().unwrap().timestamp - trace.events[onset].timestamp;
                    if lie >= config.lying.min_lie_duration as i64 {
                        (
                            Outcome::Emergency,
                            format!(
                                "'{}' {}, user lying with no further activity{}",
                                sdca.name, half, detail
                            ),
                        )
                    } else {
                        (
                            Outcome::NonEmergency,
                            format!(
                                "'{}' {}, lying for {} < {}{}",
                                sdca.name, half, lie, config.lying.min_lie_duration, detail
                            ),
                        )
                    }
                }
                None => (
                    Outcome::NonEmergency,
                    format!("'{}' {}, user not lying idle{}", sdca.name, half, detail),
                ),
            }
        }
    };
    Ok(Verdict {
        outcome,
        branch,
        reason,
    })
}

/// Decide without a semantic definition: the trace must end in a lying run
/// inside a zone where lying is incompatible, lasting at least the minimum
/// lie duration.
pub fn zone_rule(zones: &ZoneMap, trace: &ActivityTrace, rule: &LyingRule) -> Verdict {
    let events = &trace.events;
    let zone_of = |e: &TraceEvent| {
        if e.zone.is_empty() {
            trace.zone.clone()
        } else {
            e.zone.clone()
        }
    };
    let onset = events
        .iter()
        .rposition(|e| {
            e.behavior != Behavior::Lying
                || zones.behavior_compatible_or_default(&zone_of(e), Behavior::Lying)
        })
        .map_or(0, |i| i + 1);
    if onset == events.len() {
        return Verdict {
            outcome: Outcome::NonEmergency,
            branch: Branch::ZoneRule,
            reason: "no trailing lying outside a bedroom-equivalent zone".into(),
        };
    }
    let lie = events.last().unwrap().timestamp - events[onset].timestamp;
    let zone = zone_of(&events[onset]);
    if lie >= rule.min_lie_duration as i64 {
        Verdict {
            outcome: Outcome::Emergency,
            branch: Branch::ZoneRule,
            reason: format!("lying in '{}' for {}", zone, lie),
        }
    } else {
        Verdict {
            outcome: Outcome::NonEmergency,
            branch: Branch::ZoneRule,
            reason: format!(
                "lying in '{}' for {} < {}",
                zone, lie, rule.min_lie_duration
            ),
        }
    }
}

/// Full decision path for one trace: knowledge-base match, then the nearest
/// same-zone definition that knows every performed atomic (most shared start
/// atomics, then most shared atomics), then the zone rule. Traces without
/// atomic events go straight to the zone rule.
pub fn classify_trace(
    kb: &KnowledgeBase,
    zones: &ZoneMap,
    trace: &ActivityTrace,
    config: &DecisionConfig,
) -> Result<Verdict> {
    trace.validate()?;
    if let Some(sdca) = match_start(kb, trace) {
        return edscca_decide_with(sdca, trace, config);
    }
    let performed: BTreeSet<&str> = trace.atomic_ids().collect();
    if performed.is_empty() {
        return Ok(zone_rule(zones, trace, &config.lying));
    }
    let overlap = |set: &BTreeSet<String>| {
        set.iter()
            .filter(|a| performed.contains(a.as_str()))
            .count()
    };
    let nearest = kb
        .entries()
        .filter(|s| s.zone == trace.zone)
        .filter(|s| performed.iter().all(|a| s.atomics.contains(*a)))
        .map(|s| ((overlap(&s.start_atomics), overlap(&s.atomics)), s))
        .fold(
            None,
            |best: Option<((usize, usize), &SemanticDefinition)>, cand| match best {
                Some(b) if b.0 >= cand.0 => Some(b),
                _ => Some(cand),
            },
        );
    match nearest {
        Some((_, sdca)) => edscca_decide_with(sdca, trace, config),
        None => Ok(zone_rule(zones, trace, &config.lying)),
    }
}
