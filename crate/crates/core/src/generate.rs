//! Seeded random instances for property tests, benchmarks and the CLI.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::instance::{Instance, Job, Objective, Organization};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Deadlines {
    /// Every job shares this deadline.
    Common(f64),
    /// Deadlines drawn from `{0.5, 1.0, ..., max}`.
    HalfSteps { max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub objective: Objective,
    pub alpha: f64,
    pub orgs: (usize, usize),
    pub machines: (usize, usize),
    pub jobs: (usize, usize),
    pub deadlines: Deadlines,
    /// Integer processing times are drawn from `1..=max_proc_time`.
    pub max_proc_time: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            objective: Objective::SumEnergy,
            alpha: 2.0,
            orgs: (2, 4),
            machines: (1, 2),
            jobs: (0, 6),
            deadlines: Deadlines::Common(1.0),
            max_proc_time: 9,
        }
    }
}

pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, p: &GenParams) -> Instance {
    let n = rng.gen_range(p.orgs.0..=p.orgs.1);
    let organizations = (0..n)
        .map(|k| {
            let machines = rng.gen_range(p.machines.0..=p.machines.1);
            let count = rng.gen_range(p.jobs.0..=p.jobs.1);
            let jobs = (0..count)
                .map(|_| match p.objective {
                    Objective::SumCompletion => {
                        Job::with_proc_time(f64::from(rng.gen_range(1..=p.max_proc_time)))
                    }
                    Objective::SumEnergy => Job::unit_with_deadline(match p.deadlines {
                        Deadlines::Common(d) => d,
                        Deadlines::HalfSteps { max } => {
                            let steps = (max * 2.0).floor().max(1.0) as u32;
                            f64::from(rng.gen_range(1..=steps)) * 0.5
                        }
                    }),
                })
                .collect();
            Organization {
                id: format!("O{}", k + 1),
                machines,
                jobs,
            }
        })
        .collect();
    Instance {
        objective: p.objective,
        alpha: match p.objective {
            Objective::SumEnergy => Some(p.alpha),
            Objective::SumCompletion => None,
        },
        organizations,
    }
}
