//! Named zones of the living space and the lying rule.
//!
//! Lying is only expected in bedroom-like zones; anywhere else it is
//! incompatible with the zone and, if it persists, marks an emergency.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::SensorRecord;
use crate::error::{Error, Result};
use crate::labels::{Activity, Behavior};

/// Zone names treated as bedroom-equivalent when a map is inferred from data.
pub const DEFAULT_BEDROOM_ZONES: &[&str] = &["bedroom"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Zone {
    pub name: String,
    #[serde(default)]
    pub allowed_activities: BTreeSet<Activity>,
    #[serde(default)]
    pub allowed_behaviors: BTreeSet<Behavior>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ZoneMap {
    zones: BTreeMap<String, Zone>,
    bedroom_equivalent: BTreeSet<String>,
    /// When set, a behavior missing from a zone's `allowed_behaviors` is also
    /// incompatible there, on top of the lying rule.
    #[serde(default)]
    restrict_to_allowed: bool,
}

impl ZoneMap {
    pub fn new(
        zones: impl IntoIterator<Item = Zone>,
        bedroom_equivalent: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for z in zones {
            if map.contains_key(&z.name) {
                return Err(Error::validation(format!("duplicate zone '{}'", z.name)));
            }
            map.insert(z.name.clone(), z);
        }
        let bedroom_equivalent: BTreeSet<String> = bedroom_equivalent.into_iter().collect();
        if let Some(missing) = bedroom_equivalent.iter().find(|b| !map.contains_key(*b)) {
            return Err(Error::validation(format!(
                "bedroom-equivalent zone '{}' is not in the map",
                missing
            )));
        }
        Ok(ZoneMap {
            zones: map,
            bedroom_equivalent,
            restrict_to_allowed: false,
        })
    }

    pub fn with_restrict_to_allowed(mut self, on: bool) -> Self {
        self.restrict_to_allowed = on;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: ZoneMap = serde_json::from_str(text)?;
        let restrict = raw.restrict_to_allowed;
        Ok(
            ZoneMap::new(raw.zones.into_values(), raw.bedroom_equivalent)?
                .with_restrict_to_allowed(restrict),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("zone map serializes")
    }

    pub fn zones(&self) -> impl Iterator<Item = &Zone> {
        self.zones.values()
    }

    pub fn zone(&self, name: &str) -> Option<&Zone> {
        self.zones.get(name)
    }

    pub fn zone_names(&self) -> Vec<&str> {
        self.zones.keys().map(String::as_str).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.zones.is_empty()
    }

    pub fn len(&self) -> usize {
        self.zones.len()
    }

    pub fn is_bedroom_equivalent(&self, zone: &str) -> bool {
        self.bedroom_equivalent.contains(zone)
    }

    /// Whether `behavior` is acceptable in `zone`. Fails for unknown zones.
    pub fn behavior_compatible(&self, zone: &str, behavior: Behavior) -> Result<bool> {
        let z = self
            .zones
            .get(zone)
            .ok_or_else(|| Error::validation(format!("unknown zone '{}'", zone)))?;
        let default_ok = behavior != Behavior::Lying || self.is_bedroom_equivalent(zone);
        if self.restrict_to_allowed {
            Ok(default_ok && z.allowed_behaviors.contains(&behavior))
        } else {
            Ok(default_ok)
        }
    }

    /// Like [`behavior_compatible`](Self::behavior_compatible) but zones
    /// missing from the map fall back to the lying rule alone.
    pub fn behavior_compatible_or_default(&self, zone: &str, behavior: Behavior) -> bool {
        match self.behavior_compatible(zone, behavior) {
            Ok(ok) => ok,
            Err(_) => behavior != Behavior::Lying || self.is_bedroom_equivalent(zone),
        }
    }
}

/// One zone per distinct label, with the ground-truth activities and
/// behaviors observed there.
pub fn zones_from_dataset(records: &[SensorRecord]) -> ZoneMap {
    let mut zones: BTreeMap<String, Zone> = BTreeMap::new();
    for r in records {
        let z = zones.entry(r.zone.clone()).or_insert_with(|| Zone {
            name: r.zone.clone(),
            allowed_activities: BTreeSet::new(),
            allowed_behaviors: BTreeSet::new(),
        });
        if let Some(a) = r.activity {
            z.allowed_activities.insert(a);
        }
        if let Some(b) = r.behavior {
            z.allowed_behaviors.insert(b);
        }
    }
    let bedrooms: Vec<String> = zones
        .keys()
        .filter(|k| DEFAULT_BEDROOM_ZONES.contains(&k.to_ascii_lowercase().as_str()))
        .cloned()
        .collect();
    ZoneMap::new(zones.into_values(), bedrooms).expect("inferred zones are consistent")
}

/// Parameters of the emergency rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LyingRule {
    /// Minimum length, in timestamp units (seconds), of an incompatible lying
    /// run before it counts as an emergency. Zero flags any such run.
    pub min_lie_duration: u64,
}
