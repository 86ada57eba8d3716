//! Instances of the pricing game: organizations, their machines and jobs.
//!
//! The on-disk form is a strict JSON document:
//!
//! ```json
//! {"objective":"sum_energy","alpha":3.0,
//!  "organizations":[{"id":"O1","machines":1,"jobs":[{"volume":1,"deadline":1.0}]}]}
//! ```
//!
//! Unknown keys are rejected. Organization order defines the canonical
//! index used by [`Coalition`] and by every payoff vector.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of organizations an instance may hold; coalitions are bitsets.
pub const MAX_ORGANIZATIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Total completion time of non-preemptive jobs on identical machines.
    SumCompletion,
    /// Energy under continuous speed scaling with power `s^alpha`.
    SumEnergy,
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Objective::SumCompletion => "sum_completion",
            Objective::SumEnergy => "sum_energy",
        })
    }
}

fn unit_volume() -> f64 {
    1.0
}

/// A job released at time 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Job {
    #[serde(default = "unit_volume")]
    pub volume: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deadline: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proc_time: Option<f64>,
}

impl Job {
    pub fn unit_with_deadline(deadline: f64) -> Self {
        Job {
            volume: 1.0,
            deadline: Some(deadline),
            proc_time: None,
        }
    }

    pub fn with_proc_time(proc_time: f64) -> Self {
        Job {
            volume: 1.0,
            deadline: None,
            proc_time: Some(proc_time),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Organization {
    pub id: String,
    /// Number of identical machines owned by the organization.
    pub machines: usize,
    #[serde(default)]
    pub jobs: Vec<Job>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub objective: Objective,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub organizations: Vec<Organization>,
}

/// One broken invariant, located by a field path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Parses and validates an instance document.
pub fn parse_instance(text: &str) -> Result<Instance> {
    let inst: Instance = serde_json::from_str(text).map_err(|e| Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let violations = validate_instance(&inst);
    if violations.is_empty() {
        Ok(inst)
    } else {
        Err(Error::Invalid(violations))
    }
}

/// Returns every invariant the instance breaks; empty when it is valid.
pub fn validate_instance(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = inst.organizations.len();
    if n == 0 {
        out.push(Violation::new(
            "organizations",
            "at least one organization is required",
        ));
    }
    if n > MAX_ORGANIZATIONS {
        out.push(Violation::new(
            "organizations",
            format!("at most {MAX_ORGANIZATIONS} organizations are supported"),
        ));
    }
    match inst.alpha {
        Some(a) if !(a > 1.0 && a.is_finite()) => {
            out.push(Violation::new("alpha", "alpha must exceed 1"))
        }
        None if inst.objective == Objective::SumEnergy => out.push(Violation::new(
            "alpha",
            "alpha is required for the energy objective",
        )),
        _ => {}
    }

    let mut seen = HashSet::new();
    for (k, org) in inst.organizations.iter().enumerate() {
        if !seen.insert(org.id.as_str()) {
            out.push(Violation::new(
                "organizations",
                format!("duplicate id {}", org.id),
            ));
        }
        let at = format!("organizations[{k}]");
        if org.machines < 1 {
            out.push(Violation::new(&at, "machine_count must be ≥ 1"));
        }
        for (i, job) in org.jobs.iter().enumerate() {
            let at = format!("{at}.jobs[{i}]");
            if !(job.volume > 0.0 && job.volume.is_finite()) {
                out.push(Violation::new(&at, "volume must be > 0"));
            }
            if let Some(d) = job.deadline {
                if !(d > 0.0 && d.is_finite()) {
                    out.push(Violation::new(&at, "deadline must be > 0"));
                }
            }
            if let Some(p) = job.proc_time {
                if !(p > 0.0 && p.is_finite()) {
                    out.push(Violation::new(&at, "proc_time must be > 0"));
                }
            }
            match inst.objective {
                Objective::SumEnergy if job.deadline.is_none() => {
                    out.push(Violation::new(&at, "deadline missing for energy objective"))
                }
                Objective::SumCompletion if job.proc_time.is_none() => out.push(Violation::new(
                    &at,
                    "proc_time missing for completion-time objective",
                )),
                _ => {}
            }
        }
    }
    out
}

/// Canonical JSON form accepted back by [`parse_instance`].
pub fn serialize_instance(inst: &Instance) -> String {
    serde_json::to_string_pretty(inst).expect("instance serialization is infallible")
}

impl Instance {
    pub fn org_count(&self) -> usize {
        self.organizations.len()
    }

    /// Exponent of the power function. Only meaningful for the energy objective.
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(2.0)
    }

    /// Copy of the instance with a different `alpha`, validated.
    pub fn with_alpha(&self, alpha: f64) -> Result<Instance> {
        let mut inst = self.clone();
        inst.alpha = Some(alpha);
        let violations = validate_instance(&inst);
        if violations.is_empty() {
            Ok(inst)
        } else {
            Err(Error::Invalid(violations))
        }
    }

    /// The coalition of every organization.
    pub fn grand_coalition(&self) -> Coalition {
        Coalition::full(self.org_count())
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.organizations.iter().position(|o| o.id == id)
    }

    /// Resolves a comma-separated list of organization ids.
    pub fn coalition_from_ids(&self, ids: &str) -> Result<Coalition> {
        let mut c = Coalition::empty();
        for id in ids.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let k = self
                .index_of(id)
                .ok_or_else(|| Error::UnknownOrganization(id.to_string()))?;
            c = c.with(k);
        }
        Ok(c)
    }

    pub fn check_coalition(&self, c: Coalition) -> Result<()> {
        match c.members().find(|&k| k >= self.org_count()) {
            Some(index) => Err(Error::IndexOutOfRange {
                index,
                count: self.org_count(),
            }),
            None => Ok(()),
        }
    }

    pub fn ids(&self, c: Coalition) -> Vec<String> {
        c.members()
            .map(|k| self.organizations[k].id.clone())
            .collect()
    }
}

/// A set of organization indices, stored as a bitset.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Coalition(u64);

impl Coalition {
    pub const fn empty() -> Self {
        Coalition(0)
    }

    pub fn full(n: usize) -> Self {
        assert!(n <= MAX_ORGANIZATIONS);
        if n == MAX_ORGANIZATIONS {
            Coalition(u64::MAX)
        } else {
            Coalition((1u64 << n) - 1)
        }
    }

    pub fn singleton(k: usize) -> Self {
        Coalition::empty().with(k)
    }

    pub fn from_bits(bits: u64) -> Self {
        Coalition(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn with(self, k: usize) -> Self {
        assert!(k < MAX_ORGANIZATIONS, "organization index {k} too large");
        Coalition(self.0 | (1u64 << k))
    }

    pub fn without(self, k: usize) -> Self {
        if k >= MAX_ORGANIZATIONS {
            return self;
        }
        Coalition(self.0 & !(1u64 << k))
    }

    pub fn contains(self, k: usize) -> bool {
        k < MAX_ORGANIZATIONS && self.0 & (1u64 << k) != 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: Coalition) -> Self {
        Coalition(self.0 | other.0)
    }

    pub fn intersection(self, other: Coalition) -> Self {
        Coalition(self.0 & other.0)
    }

    pub fn difference(self, other: Coalition) -> Self {
        Coalition(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Coalition) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in increasing index order.
    pub fn members(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let k = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(k)
            }
        })
    }

    /// Every sub-coalition, the empty set and `self` included.
    pub fn subsets(self) -> impl Iterator<Item = Coalition> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full {
                None
            } else {
                Some((cur.wrapping_sub(full)) & full)
            };
            Some(Coalition(cur))
        })
    }
}

impl FromIterator<usize> for Coalition {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(Coalition::empty(), Coalition::with)
    }
}

impl fmt::Debug for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.members()).finish()
    }
}

impl Serialize for Coalition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.members())
    }
}

impl<'de> Deserialize<'de> for Coalition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let members = Vec::<usize>::deserialize(d)?;
        if let Some(&k) = members.iter().find(|&&k| k >= MAX_ORGANIZATIONS) {
            return Err(serde::de::Error::custom(format!(
                "organization index {k} too large"
            )));
        }
        Ok(members.into_iter().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const EXAMPLE1: &str = r#"{
        "objective": "sum_energy",
        "alpha": 3.0,
        "organizations": [
            {"id": "O1", "machines": 1, "jobs": [JOBS19]},
            {"id": "O2", "machines": 1, "jobs": [JOBS7]},
            {"id": "O3", "machines": 1, "jobs": [{"deadline": 1.0}]},
            {"id": "O4", "machines": 1, "jobs": [{"volume": 1, "deadline": 1.0}]}
        ]
    }"#;

    fn example1_text() -> String {
        let jobs = |n: usize| vec![r#"{"deadline": 1}"#; n].join(",");
        EXAMPLE1
            .replace("JOBS19", &jobs(19))
            .replace("JOBS7", &jobs(7))
    }

    #[test]
    fn parses_example1() {
        let inst = parse_instance(&example1_text()).unwrap();
        assert_eq!(inst.org_count(), 4);
        assert_eq!(inst.organizations[0].jobs.len(), 19);
        assert_eq!(inst.organizations[1].jobs.len(), 7);
        assert!(inst.organizations[2].jobs.iter().all(|j| j.volume == 1.0));
        assert!(validate_instance(&inst).is_empty());
    }

    #[test]
    fn rejects_alpha_one() {
        let text = example1_text().replace("3.0", "1.0");
        match parse_instance(&text) {
            Err(Error::Invalid(v)) => {
                assert!(v.iter().any(|x| x.rule == "alpha must exceed 1"), "{v:?}")
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn empty_job_list_is_valid() {
        let text = r#"{"objective":"sum_energy","alpha":2,"organizations":[
            {"id":"A","machines":2,"jobs":[]},{"id":"B","machines":1}]}"#;
        let inst = parse_instance(text).unwrap();
        assert!(inst.organizations[1].jobs.is_empty());
    }

    #[test]
    fn duplicate_ids_and_zero_machines() {
        let inst = Instance {
            objective: Objective::SumCompletion,
            alpha: None,
            organizations: vec![
                Organization {
                    id: "O1".into(),
                    machines: 1,
                    jobs: vec![],
                },
                Organization {
                    id: "O1".into(),
                    machines: 0,
                    jobs: vec![],
                },
            ],
        };
        let v: Vec<String> = validate_instance(&inst)
            .iter()
            .map(ToString::to_string)
            .collect();
        assert!(
            v.contains(&"organizations: duplicate id O1".to_string()),
            "{v:?}"
        );
        assert!(
            v.iter().any(|s| s.ends_with("machine_count must be ≥ 1")),
            "{v:?}"
        );
    }

    #[test]
    fn missing_deadline_for_energy() {
        let text = r#"{"objective":"sum_energy","alpha":2,"organizations":[
            {"id":"A","machines":1,"jobs":[{"proc_time":1}]}]}"#;
        let err = parse_instance(text).unwrap_err().to_string();
        assert!(
            err.contains("deadline missing for energy objective"),
            "{err}"
        );
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = "{\"objective\":\"sum_energy\",\n\"alpah\":2,\"organizations\":[]}";
        match parse_instance(text) {
            Err(Error::Syntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
        let err = parse_instance("{\"objective\": ").unwrap_err();
        assert!(matches!(err, Error::Syntax { .. }));
    }

    #[test]
    fn coalition_ids_resolve_in_canonical_order() {
        let inst = parse_instance(&example1_text()).unwrap();
        let c = inst.coalition_from_ids("O4,O2").unwrap();
        assert_eq!(c.members().collect::<Vec<_>>(), vec![1, 3]);
        assert!(inst.coalition_from_ids("O9").is_err());
    }

    #[test]
    fn subsets_enumerates_all() {
        let c: Coalition = [0, 2, 5].into_iter().collect();
        let subs: Vec<Coalition> = c.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|s| s.is_subset(c)));
        assert_eq!(Coalition::empty().subsets().count(), 1);
    }

    fn arb_instance() -> impl Strategy<Value = Instance> {
        let job = (
            1u32..5,
            prop::option::of(1u32..40),
            prop::option::of(1u32..40),
        )
            .prop_map(|(v, d, p)| Job {
                volume: v as f64,
                deadline: d.map(|d| d as f64 / 4.0),
                proc_time: p.map(|p| p as f64 * 0.5),
            });
        let org = (1usize..4, prop::collection::vec(job, 0..4));
        (
            prop::bool::ANY,
            prop::option::of(11u32..40),
            prop::collection::vec(org, 1..5),
        )
            .prop_map(|(energy, alpha, orgs)| Instance {
                objective: if energy {
                    Objective::SumEnergy
                } else {
                    Objective::SumCompletion
                },
                alpha: alpha.map(|a| a as f64 / 10.0),
                organizations: orgs
                    .into_iter()
                    .enumerate()
                    .map(|(k, (machines, jobs))| Organization {
                        id: format!("O{}", k + 1),
                        machines,
                        jobs,
                    })
                    .collect(),
            })
    }

    proptest! {
        #[test]
        fn parse_serialize_roundtrip(inst in arb_instance()) {
            let text = serialize_instance(&inst);
            match parse_instance(&text) {
                Ok(parsed) => {
                    prop_assert_eq!(&parsed, &inst);
                    prop_assert_eq!(serialize_instance(&parsed), text);
                    prop_assert!(validate_instance(&parsed).is_empty());
                }
                Err(Error::Invalid(_)) => prop_assert!(!validate_instance(&inst).is_empty()),
                Err(e) => prop_assert!(false, "unexpected error {}", e),
            }
        }
    }
}
