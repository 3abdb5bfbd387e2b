//! Complex activities as weighted atomic-activity / context-attribute pairs.
//!
//! An instance of a complex activity is the subset of its atomic activities
//! the user actually performed (each on its paired context attribute). With
//! `a` atomics of which `c` are core there are `2^a` instances in total,
//! `2^(a-c)` of them contain every core atomic and therefore reach the goal,
//! and the remaining `2^(a-c) * (2^c - 1)` do not.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest atomic count the closed-form counters accept (`2^62` fits in u64).
pub const MAX_COUNT_ATOMICS: usize = 62;
/// Largest atomic count for which instances are materialized.
pub const MAX_ENUMERATION_ATOMICS: usize = 20;

const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;
const MAX_JOINT_ID: u8 = 20;

/// A macro or micro task inside a complex activity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicActivity {
    pub id: String,
    pub label: String,
    pub weight: f64,
    #[serde(rename = "start", default)]
    pub is_start: bool,
    #[serde(rename = "end", default)]
    pub is_end: bool,
    #[serde(rename = "core", default)]
    pub is_core: bool,
    /// Skeleton joint pairs (ids 1..=20) that move while this task is done.
    #[serde(default)]
    pub joint_pairs: Vec<(u8, u8)>,
}

/// The environment parameter an atomic activity acts on.
///
/// Marker flags always mirror the paired atomic; the weight defaults to the
/// paired atomic's weight when the definition file omits it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextAttribute {
    pub id: String,
    pub label: String,
    pub paired_atomic: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(skip)]
    is_start: bool,
    #[serde(skip)]
    is_end: bool,
    #[serde(skip)]
    is_core: bool,
}

impl ContextAttribute {
    pub fn new(
        id: impl Into<String>,
        label: impl Into<String>,
        paired_atomic: impl Into<String>,
    ) -> Self {
        ContextAttribute {
            id: id.into(),
            label: label.into(),
            paired_atomic: paired_atomic.into(),
            weight: None,
            is_start: false,
            is_end: false,
            is_core: false,
        }
    }

    pub fn weight(&self) -> f64 {
        self.weight.unwrap_or(0.0)
    }

    pub fn is_start(&self) -> bool {
        self.is_start
    }

    pub fn is_end(&self) -> bool {
        self.is_end
    }

    pub fn is_core(&self) -> bool {
        self.is_core
    }
}

#[derive(Deserialize)]
struct DefinitionFile {
    name: String,
    zone: String,
    atomics: Vec<AtomicActivity>,
    contexts: Vec<ContextAttribute>,
}

/// A validated complex activity.
///
/// Construct with [`ComplexActivityDefinition::new`] or by deserializing; both
/// paths run the same validation, so every value of this type satisfies the
/// structural invariants (1:1 pairing, at least one start/end/core atomic,
/// weights in (0, 1] summing to one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DefinitionFile")]
pub struct ComplexActivityDefinition {
    name: String,
    zone: String,
    atomics: Vec<AtomicActivity>,
    contexts: Vec<ContextAttribute>,
}

impl TryFrom<DefinitionFile> for ComplexActivityDefinition {
    type Error = Error;

    fn try_from(f: DefinitionFile) -> Result<Self> {
        ComplexActivityDefinition::new(f.name, f.zone, f.atomics, f.contexts)
    }
}

impl ComplexActivityDefinition {
    pub fn new(
        name: impl Into<String>,
        zone: impl Into<String>,
        atomics: Vec<AtomicActivity>,
        mut contexts: Vec<ContextAttribute>,
    ) -> Result<Self> {
        let name = name.into();
        let zone = zone.into();
        if atomics.is_empty() {
            return Err(Error::validation(format!(
                "'{}': no atomic activities",
                name
            )));
        }
        if contexts.len() != atomics.len() {
            return Err(Error::validation(format!(
                "'{}': {} atomic activities but {} context attributes; each atomic pairs with exactly one context",
                name,
                atomics.len(),
                contexts.len()
            )));
        }

        let mut ids = HashSet::new();
        for a in &atomics {
            if !ids.insert(a.id.as_str()) {
                return Err(Error::validation(format!("duplicate atomic id '{}'", a.id)));
            }
            if !(a.weight.is_finite() && a.weight > 0.0 && a.weight <= 1.0) {
                return Err(Error::validation(format!(
                    "atomic '{}' weight {} outside (0, 1]",
                    a.id, a.weight
                )));
            }
            for &(j1, j2) in &a.joint_pairs {
                if !(1..=MAX_JOINT_ID).contains(&j1) || !(1..=MAX_JOINT_ID).contains(&j2) {
                    return Err(Error::validation(format!(
                        "atomic '{}' joint pair ({}, {}) outside 1..=20",
                        a.id, j1, j2
                    )));
                }
            }
        }

        let mut ctx_ids = HashSet::new();
        let mut paired = HashSet::new();
        for c in &mut contexts {
            if ids.contains(c.id.as_str()) || !ctx_ids.insert(c.id.clone()) {
                return Err(Error::validation(format!(
                    "duplicate context id '{}'",
                    c.id
                )));
            }
            let atomic = atomics
                .iter()
                .find(|a| a.id == c.paired_atomic)
                .ok_or_else(|| {
                    Error::validation(format!(
                        "context '{}' pairs with unknown atomic '{}'",
                        c.id, c.paired_atomic
                    ))
                })?;
            if !paired.insert(c.paired_atomic.clone()) {
                return Err(Error::validation(format!(
                    "atomic '{}' is paired with more than one context",
                    c.paired_atomic
                )));
            }
            match c.weight {
                Some(w) if !(w.is_finite() && w > 0.0 && w <= 1.0) => {
                    return Err(Error::validation(format!(
                        "context '{}' weight {} outside (0, 1]",
                        c.id, w
                    )));
                }
                Some(_) => {}
                None => c.weight = Some(atomic.weight),
            }
            c.is_start = atomic.is_start;
            c.is_end = atomic.is_end;
            c.is_core = atomic.is_core;
        }

        if !atomics.iter().any(|a| a.is_core) {
            return Err(Error::validation(format!(
                "'{}': no core atomic activity",
                name
            )));
        }
        if !atomics.iter().any(|a| a.is_start) {
            return Err(Error::validation(format!(
                "'{}': no start atomic activity",
                name
            )));
        }
        if !atomics.iter().any(|a| a.is_end) {
            return Err(Error::validation(format!(
                "'{}': no end atomic activity",
                name
            )));
        }
        let total: f64 = atomics.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::validation(format!(
                "'{}': atomic weights sum to {}, expected 1",
                name, total
            )));
        }

        Ok(ComplexActivityDefinition {
            name,
            zone,
            atomics,
            contexts,
        })
    }

    /// Equal-weight definition with atomics `At1..At{n}` paired to `Ct1..Ct{n}`.
    /// Index slices are zero-based positions into the atomics list.
    pub fn uniform(
        name: &str,
        zone: &str,
        n: usize,
        core: &[usize],
        start: &[usize],
        end: &[usize],
    ) -> Result<Self> {
        let weight = if n == 0 { 1.0 } else { 1.0 / n as f64 };
        let atomics = (0..n)
            .map(|i| AtomicActivity {
                id: format!("At{}", i + 1),
                label: format!("atomic {}", i + 1),
                weight,
                is_start: start.contains(&i),
                is_end: end.contains(&i),
                is_core: core.contains(&i),
                joint_pairs: Vec::new(),
            })
            .collect();
        let contexts = (0..n)
            .map(|i| {
                ContextAttribute::new(
                    format!("Ct{}", i + 1),
                    format!("context {}", i + 1),
                    format!("At{}", i + 1),
                )
            })
            .collect();
        Self::new(name, zone, atomics, contexts)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("definition serializes")
    }

    /// The eating-lunch definition bundled with the crate.
    pub fn eating_lunch() -> Self {
        Self::from_json(include_str!("../fixtures/eating_lunch.json"))
            .expect("bundled fixture is valid")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn zone(&self) -> &str {
        &self.zone
    }

    pub fn atomics(&self) -> &[AtomicActivity] {
        &self.atomics
    }

    pub fn contexts(&self) -> &[ContextAttribute] {
        &self.contexts
    }

    pub fn atomic(&self, id: &str) -> Option<&AtomicActivity> {
        self.atomics.iter().find(|a| a.id == id)
    }

    /// Context attribute paired with the given atomic id.
    pub fn context_for(&self, atomic_id: &str) -> Option<&ContextAttribute> {
        self.contexts.iter().find(|c| c.paired_atomic == atomic_id)
    }

    /// a_t
    pub fn atomic_count(&self) -> usize {
        self.atomics.len()
    }

    /// b_t
    pub fn context_count(&self) -> usize {
        self.contexts.len()
    }

    /// c_t
    pub fn core_atomic_count(&self) -> usize {
        self.atomics.iter().filter(|a| a.is_core).count()
    }

    /// d_t
    pub fn core_context_count(&self) -> usize {
        self.contexts.iter().filter(|c| c.is_core).count()
    }

    pub fn core_ids(&self) -> BTreeSet<&str> {
        self.atomics
            .iter()
            .filter(|a| a.is_core)
            .map(|a| a.id.as_str())
            .collect()
    }

    fn core_mask(&self) -> u64 {
        self.atomics
            .iter()
            .enumerate()
            .filter(|(_, a)| a.is_core)
            .fold(0, |m, (i, _)| m | (1 << i))
    }

    fn mask_of<S: AsRef<str>>(&self, performed: &[S]) -> Result<u64> {
        let mut mask = 0u64;
        for id in performed {
            let id = id.as_ref();
            let pos = self
                .atomics
                .iter()
                .position(|a| a.id == id)
                .ok_or_else(|| {
                    Error::validation(format!("'{}' is not an atomic of '{}'", id, self.name))
                })?;
            mask |= 1 << pos;
        }
        Ok(mask)
    }

    fn weight_of_mask(&self, mask: u64) -> f64 {
        self.atomics
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.weight)
            .sum()
    }

    fn ids_of_mask(&self, mask: u64) -> Vec<String> {
        self.atomics
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, a)| a.id.clone())
            .collect()
    }

    /// α: every way the activity can be performed, false starts included.
    pub fn alpha_count(&self) -> Result<u64> {
        alpha(self.atomic_count())
    }

    /// β: instances that contain every core atomic.
    pub fn beta_count(&self) -> Result<u64> {
        beta(self.atomic_count(), self.core_atomic_count())
    }

    /// γ: instances missing at least one core atomic.
    pub fn gamma_count(&self) -> Result<u64> {
        gamma(self.atomic_count(), self.core_atomic_count())
    }

    pub fn counts(&self) -> Result<InstanceCountSummary> {
        Ok(InstanceCountSummary {
            alpha: self.alpha_count()?,
            beta: self.beta_count()?,
            gamma: self.gamma_count()?,
            a_t: self.atomic_count(),
            b_t: self.context_count(),
            c_t: self.core_atomic_count(),
            d_t: self.core_context_count(),
        })
    }

    /// Sum of the weights of the performed atomics. Duplicate ids count once.
    pub fn instance_weight<S: AsRef<str>>(&self, performed: &[S]) -> Result<f64> {
        Ok(self.weight_of_mask(self.mask_of(performed)?))
    }

    /// Weight an instance must reach to be considered properly performed:
    /// the summed weight of the core atomics.
    pub fn threshold_weight(&self) -> f64 {
        self.weight_of_mask(self.core_mask())
    }

    /// True iff every core atomic was performed.
    pub fn goal_reached<S: AsRef<str>>(&self, performed: &[S]) -> Result<bool> {
        let core = self.core_mask();
        Ok(self.mask_of(performed)? & core == core)
    }

    pub fn instance(&self, mask: u64) -> ActivityInstance {
        let core = self.core_mask();
        ActivityInstance {
            performed: self.ids_of_mask(mask),
            instance_weight: self.weight_of_mask(mask),
            goal_reached: mask & core == core,
        }
    }

    /// Every performed-subset, in binary counting order over the atomics list
    /// (bit `i` of the counter selects `atomics[i]`).
    pub fn enumerate_instances(&self) -> Result<Vec<ActivityInstance>> {
        let n = self.atomic_count();
        if n > MAX_ENUMERATION_ATOMICS {
            return Err(Error::Capacity(format!(
                "refusing to enumerate 2^{} instances (limit 2^{})",
                n, MAX_ENUMERATION_ATOMICS
            )));
        }
        Ok((0..1u64 << n).map(|mask| self.instance(mask)).collect())
    }
}

/// 2^a
pub fn alpha(a_t: usize) -> Result<u64> {
    if a_t > MAX_COUNT_ATOMICS {
        return Err(Error::Capacity(format!(
            "a_t = {} exceeds {}; 2^a_t overflows",
            a_t, MAX_COUNT_ATOMICS
        )));
    }
    Ok(1u64 << a_t)
}

/// 2^(a - c)
pub fn beta(a_t: usize, c_t: usize) -> Result<u64> {
    check_core(a_t, c_t)?;
    alpha(a_t - c_t)
}

/// 2^(a - c) * (2^c - 1)
pub fn gamma(a_t: usize, c_t: usize) -> Result<u64> {
    check_core(a_t, c_t)?;
    Ok(alpha(a_t - c_t)? * (alpha(c_t)? - 1))
}

fn check_core(a_t: usize, c_t: usize) -> Result<()> {
    alpha(a_t)?;
    if c_t > a_t {
        return Err(Error::validation(format!(
            "core count {} exceeds atomic count {}",
            c_t, a_t
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceCountSummary {
    pub alpha: u64,
    pub beta: u64,
    pub gamma: u64,
    pub a_t: usize,
    pub b_t: usize,
    pub c_t: usize,
    pub d_t: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActivityInstance {
    /// Performed atomic ids in definition order.
    pub performed: Vec<String>,
    pub instance_weight: f64,
    pub goal_reached: bool,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lunch() -> ComplexActivityDefinition {
        ComplexActivityDefinition::eating_lunch()
    }

    #[test]
    fn table_counts() {
        let c = lunch().counts().unwrap();
        assert_eq!((c.alpha, c.beta, c.gamma), (64, 4, 60));
        assert_eq!((c.a_t, c.b_t, c.c_t, c.d_t), (6, 6, 4, 4));
    }

    #[test]
    fn closed_forms_small() {
        assert_eq!(alpha(1).unwrap(), 2);
        assert_eq!(alpha(3).unwrap(), 8);
        assert_eq!(beta(4, 4).unwrap(), 1);
        assert_eq!(beta(4, 1).unwrap(), 8);
        assert_eq!(gamma(3, 2).unwrap(), 6);
        // no cores: every subset reaches the (empty) goal
        assert_eq!(gamma(5, 0).unwrap(), 0);
    }

    #[test]
    fn overflow_guard() {
        assert!(alpha(62).is_ok());
        assert!(matches!(alpha(63), Err(Error::Capacity(_))));
        assert!(matches!(beta(3, 4), Err(Error::Validation(_))));
    }

    #[test]
    fn weights() {
        let d = lunch();
        let all: Vec<&str> = d.atomics().iter().map(|a| a.id.as_str()).collect();
        assert!((d.instance_weight(&all).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(d.instance_weight::<&str>(&[]).unwrap(), 0.0);
        let core = ["At2", "At3", "At4", "At6"];
        assert!((d.instance_weight(&core).unwrap() - 0.84).abs() < 1e-12);
        assert!((d.threshold_weight() - 0.84).abs() < 1e-12);
        assert!(d.instance_weight(&["At9"]).is_err());
    }

    #[test]
    fn goal_predicate() {
        let d = lunch();
        assert!(d
            .goal_reached(&["At1", "At2", "At3", "At4", "At5", "At6"])
            .unwrap());
        assert!(!d.goal_reached::<&str>(&[]).unwrap());
        assert!(!d.goal_reached(&["At1", "At5"]).unwrap());
    }

    #[test]
    fn thresholds_for_small_defs() {
        let one = ComplexActivityDefinition::uniform("one", "z", 1, &[0], &[0], &[0]).unwrap();
        assert_eq!(one.threshold_weight(), 1.0);
        let insts = one.enumerate_instances().unwrap();
        assert_eq!(insts.len(), 2);
        assert!(insts[0].performed.is_empty() && !insts[0].goal_reached);
        assert_eq!(insts[1].performed, vec!["At1"]);
        assert!(insts[1].goal_reached);

        let atomics = vec![
            AtomicActivity {
                id: "a".into(),
                label: "a".into(),
                weight: 0.6,
                is_start: true,
                is_end: false,
                is_core: true,
                joint_pairs: vec![],
            },
            AtomicActivity {
                id: "b".into(),
                label: "b".into(),
                weight: 0.4,
                is_start: false,
                is_end: true,
                is_core: true,
                joint_pairs: vec![],
            },
        ];
        let contexts = vec![
            ContextAttribute::new("ca", "ca", "a"),
            ContextAttribute::new("cb", "cb", "b"),
        ];
        let two = ComplexActivityDefinition::new("two", "z", atomics, contexts).unwrap();
        assert!((two.threshold_weight() - 1.0).abs() < 1e-12);
        assert!(two.contexts()[1].is_end() && two.contexts()[1].is_core());
        assert_eq!(two.contexts()[0].weight(), 0.6);
    }

    #[test]
    fn lunch_enumeration() {
        let insts = lunch().enumerate_instances().unwrap();
        assert_eq!(insts.len(), 64);
        assert_eq!(insts.iter().filter(|i| i.goal_reached).count(), 4);
        assert!(insts[0].performed.is_empty());
        assert_eq!(insts[63].performed.len(), 6);
        // bit 0 <-> At1
        assert_eq!(insts[1].performed, vec!["At1"]);
        assert_eq!(insts[2].performed, vec!["At2"]);
    }

    #[test]
    fn enumeration_cap() {
        let d = ComplexActivityDefinition::uniform("big", "z", 21, &[0], &[0], &[20]).unwrap();
        assert!(matches!(d.enumerate_instances(), Err(Error::Capacity(_))));
        assert_eq!(d.alpha_count().unwrap(), 1 << 21);
    }

    #[test]
    fn contexts_inherit_markers() {
        let d = lunch();
        let core: Vec<&str> = d
            .contexts()
            .iter()
            .filter(|c| c.is_core())
            .map(|c| c.id.as_str())
            .collect();
        assert_eq!(core, ["Ct2", "Ct3", "Ct4", "Ct6"]);
        assert_eq!(d.context_for("At5").unwrap().id, "Ct5");
        assert!((d.contexts()[2].weight() - 0.25).abs() < 1e-12);
    }

    fn base_json() -> serde_json::Value {
        serde_json::from_str(include_str!("../fixtures/eating_lunch.json")).unwrap()
    }

    fn parse(v: &serde_json::Value) -> Result<ComplexActivityDefinition> {
        ComplexActivityDefinition::from_json(&v.to_string())
    }

    #[test]
    fn validation_errors() {
        let mut v = base_json();
        v["atomics"][0]["weight"] = 0.5.into();
        assert!(parse(&v).unwrap_err().to_string().contains("sum"));

        let mut v = base_json();
        v["atomics"][1]["joint_pairs"][0][0] = 21.into();
        assert!(parse(&v).is_err());

        let mut v = base_json();
        v["contexts"][5]["paired_atomic"] = "At1".into();
        assert!(parse(&v).is_err());

        let mut v = base_json();
        v["contexts"].as_array_mut().unwrap().pop();
        assert!(parse(&v).is_err());

        let mut v = base_json();
        for a in v["atomics"].as_array_mut().unwrap() {
            a["core"] = false.into();
        }
        assert!(parse(&v).unwrap_err().to_string().contains("core"));

        let mut v = base_json();
        v["atomics"] = serde_json::json!([]);
        v["contexts"] = serde_json::json!([]);
        assert!(parse(&v).is_err());
    }

    #[test]
    fn json_roundtrip() {
        let d = lunch();
        let again = ComplexActivityDefinition::from_json(&d.to_json()).unwrap();
        assert_eq!(d, again);
    }
}
