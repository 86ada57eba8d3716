//! Optimal-cost schedulers for a pooled set of jobs and machines.
//!
//! Low-level oracles work on anonymous jobs `0..n` and machines `0..m` and
//! return a [`MachineSchedule`]. [`coalition_cost`] pools the jobs and
//! machines of a coalition, picks the cheapest exact oracle and maps the
//! result back to organizations.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{Coalition, Instance, Objective};

pub mod brute;
pub mod convex;
pub mod energy;
pub mod spt;

pub use brute::{brute_force_sum_completion, grid_energy_oracle};
pub use convex::schedule_energy_general;
pub use energy::{
    schedule_energy_balanced, schedule_energy_common_deadline, schedule_energy_single_machine_yds,
    EnergyJob,
};
pub use spt::schedule_sum_completion;

/// A maximal piece of a job running on one machine.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub job: usize,
    pub machine: usize,
    pub start: f64,
    pub end: f64,
    /// Processor speed; absent for the completion-time objective.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

impl Segment {
    pub fn len(&self) -> f64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}

/// Schedule over anonymous jobs and machines.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MachineSchedule {
    pub per_machine_cost: Vec<f64>,
    pub segments: Vec<Segment>,
}

impl MachineSchedule {
    pub fn empty(machines: usize) -> Self {
        MachineSchedule {
            per_machine_cost: vec![0.0; machines],
            segments: Vec::new(),
        }
    }

    pub fn total_cost(&self) -> f64 {
        self.per_machine_cost.iter().sum()
    }

    /// Work done on `job`: speed times length, or plain length without speeds.
    pub fn work_of(&self, job: usize) -> f64 {
        self.segments
            .iter()
            .filter(|s| s.job == job)
            .map(|s| s.len() * s.speed.unwrap_or(1.0))
            .sum()
    }
}

/// Which oracle produced a schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Empty,
    Spt,
    CommonDeadline,
    Balanced,
    Yds,
    Convex,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JobRef {
    pub org: usize,
    pub index: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub job: JobRef,
    /// Organization owning the machine.
    pub org: usize,
    /// Machine index local to `org`.
    pub machine: usize,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
}

/// Optimal schedule of a coalition with costs attributed to machine owners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub total_cost: f64,
    pub per_org_cost: BTreeMap<usize, f64>,
    pub method: Method,
    pub placement: Vec<Placement>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    /// Relative accuracy of the convex energy solver.
    pub tol: f64,
    pub max_iter: usize,
    /// Common-deadline energy without migration: integral balanced loads.
    pub no_migration: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            tol: 1e-9,
            max_iter: 100_000,
            no_migration: false,
        }
    }
}

/// Optimal cost of scheduling every job of `coalition` on every machine of
/// `coalition`. The empty coalition costs 0.
pub fn coalition_cost(
    inst: &Instance,
    coalition: Coalition,
    cfg: &OracleConfig,
) -> Result<ScheduleOutcome> {
    inst.check_coalition(coalition)?;

    let mut jobs = Vec::new();
    let mut machines = Vec::new();
    for k in coalition.members() {
        let org = &inst.organizations[k];
        jobs.extend(
            org.jobs
                .iter()
                .enumerate()
                .map(|(i, j)| (JobRef { org: k, index: i }, j)),
        );
        machines.extend((0..org.machines).map(|local| (k, local)));
    }
    let m = machines.len();

    let (schedule, method) = if jobs.is_empty() || m == 0 {
        (MachineSchedule::empty(m), Method::Empty)
    } else {
        match inst.objective {
            Objective::SumCompletion => {
                let p: Vec<f64> = jobs
                    .iter()
                    .map(|(_, j)| j.proc_time.expect("validated instance"))
                    .collect();
                (schedule_sum_completion(&p, m), Method::Spt)
            }
            Objective::SumEnergy => {
                let alpha = inst.alpha();
                let ej: Vec<EnergyJob> = jobs
                    .iter()
                    .map(|(_, j)| EnergyJob {
                        volume: j.volume,
                        deadline: j.deadline.expect("validated instance"),
                    })
                    .collect();
                let d0 = ej[0].deadline;
                let common = ej.iter().all(|j| j.deadline == d0 && j.volume == 1.0);
                if common && cfg.no_migration {
                    (
                        schedule_energy_balanced(ej.len(), m, d0, alpha),
                        Method::Balanced,
                    )
                } else if common {
                    (
                        schedule_energy_common_deadline(ej.len(), m, d0, alpha),
                        Method::CommonDeadline,
                    )
                } else if m == 1 {
                    (schedule_energy_single_machine_yds(&ej, alpha), Method::Yds)
                } else {
                    (schedule_energy_general(&ej, m, alpha, cfg)?, Method::Convex)
                }
            }
        }
    };

    let mut per_org_cost: BTreeMap<usize, f64> = coalition.members().map(|k| (k, 0.0)).collect();
    for (mi, cost) in schedule.per_machine_cost.iter().enumerate() {
        *per_org_cost.get_mut(&machines[mi].0).unwrap() += cost;
    }
    let total_cost = per_org_cost.values().sum();
    let placement = schedule
        .segments
        .iter()
        .map(|s| Placement {
            job: jobs[s.job].0,
            org: machines[s.machine].0,
            machine: machines[s.machine].1,
            start: s.start,
            end: s.end,
            speed: s.speed,
        })
        .collect();

    Ok(ScheduleOutcome {
        total_cost,
        per_org_cost,
        method,
        placement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Job, Organization};

    fn example1(alpha: f64) -> Instance {
        let org = |id: &str, n: usize| Organization {
            id: id.into(),
            machines: 1,
            jobs: vec![Job::unit_with_deadline(1.0); n],
        };
        Instance {
            objective: Objective::SumEnergy,
            alpha: Some(alpha),
            organizations: vec![org("O1", 19), org("O2", 7), org("O3", 1), org("O4", 1)],
        }
    }

    fn c(m: &[usize]) -> Coalition {
        m.iter().copied().collect()
    }

    #[test]
    fn example1_costs() {
        let cfg = OracleConfig::default();
        let inst = example1(2.0);
        let all = coalition_cost(&inst, c(&[0, 1, 2, 3]), &cfg).unwrap();
        assert_eq!(all.total_cost, 196.0);
        assert_eq!(all.method, Method::CommonDeadline);
        assert!(all.per_org_cost.values().all(|&v| v == 49.0));
        assert_eq!(
            coalition_cost(&inst, c(&[2, 3]), &cfg).unwrap().total_cost,
            2.0
        );
        let empty = coalition_cost(&inst, Coalition::empty(), &cfg).unwrap();
        assert_eq!(empty.total_cost, 0.0);
        assert!(empty.placement.is_empty());

        let inst3 = example1(3.0);
        let all3 = coalition_cost(&inst3, c(&[0, 1, 2, 3]), &cfg).unwrap();
        assert!((all3.total_cost - 1372.0).abs() < 1e-9);
    }

    #[test]
    fn grand_schedule_runs_seven_jobs_per_machine() {
        let inst = example1(2.0);
        let out = coalition_cost(&inst, c(&[0, 1, 2, 3]), &OracleConfig::default()).unwrap();
        for org in 0..4 {
            let work: f64 = out
                .placement
                .iter()
                .filter(|p| p.org == org)
                .map(|p| (p.end - p.start) * p.speed.unwrap())
                .sum();
            assert!((work - 7.0).abs() < 1e-12, "org {org} work {work}");
        }
    }

    #[test]
    fn additivity_is_exact_for_closed_forms() {
        let inst = example1(2.5);
        for bits in 1u64..16 {
            let out = coalition_cost(&inst, Coalition::from_bits(bits), &OracleConfig::default())
                .unwrap();
            assert_eq!(out.total_cost, out.per_org_cost.values().sum::<f64>());
        }
    }

    #[test]
    fn dispatch_picks_yds_and_convex() {
        let inst = Instance {
            objective: Objective::SumEnergy,
            alpha: Some(2.0),
            organizations: vec![
                Organization {
                    id: "A".into(),
                    machines: 1,
                    jobs: vec![Job::unit_with_deadline(1.0), Job::unit_with_deadline(3.0)],
                },
                Organization {
                    id: "B".into(),
                    machines: 1,
                    jobs: vec![],
                },
            ],
        };
        let cfg = OracleConfig::default();
        let solo = coalition_cost(&inst, c(&[0]), &cfg).unwrap();
        assert_eq!(solo.method, Method::Yds);
        assert!((solo.total_cost - 1.5).abs() < 1e-12);
        let both = coalition_cost(&inst, c(&[0, 1]), &cfg).unwrap();
        assert_eq!(both.method, Method::Convex);
        // each job alone on a machine at speeds 1 and 1/3
        assert!(
            (both.total_cost - (1.0 + 1.0 / 3.0)).abs() < 1e-8,
            "{}",
            both.total_cost
        );
        let share_a = both.per_org_cost[&0];
        let share_b = both.per_org_cost[&1];
        assert!((share_a + share_b - both.total_cost).abs() < 1e-12);
    }

    #[test]
    fn no_migration_uses_integral_loads() {
        let inst = example1(2.0);
        let cfg = OracleConfig {
            no_migration: true,
            ..OracleConfig::default()
        };
        let out = coalition_cost(&inst, c(&[1, 3]), &cfg).unwrap();
        assert_eq!(out.method, Method::Balanced);
        assert_eq!(out.total_cost, 32.0);
    }

    #[test]
    fn out_of_range_coalition_rejected() {
        let inst = example1(2.0);
        assert!(coalition_cost(&inst, c(&[7]), &OracleConfig::default()).is_err());
    }
}
