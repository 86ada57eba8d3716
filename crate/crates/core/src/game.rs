//! The cost-savings game and alliance detection.
//!
//! For a coalition `C` the price `p(C)` is the sum of its members' local
//! costs, `Cost(C)` is the optimal cooperative cost and the value is the
//! saving `v(C) = p(C) - Cost(C)`.
//!
//! For a coalition `S` the pivotal set `A` holds the members whose departure
//! strictly lowers `v(S)`. Members outside `A` are paid nothing; a member
//! `j` of `A` is paid
//!
//! ```text
//! x_j = Cost(S∖{j}) + p({j}) - (Cost(A) + Σ_{k∈A} Cost(S∖{k})) / |A|
//! ```
//!
//! and the alliance is feasible when every such payment is nonnegative.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use once_cell::sync::OnceCell;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::instance::{Coalition, Instance, Objective};
use crate::oracles::{coalition_cost, OracleConfig, ScheduleOutcome};

/// Relative equality tolerance when every cost comes from a closed form.
pub const CLOSED_FORM_EQ_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub oracle: OracleConfig,
    /// Absolute tolerance for value comparisons; derived from the data when `None`.
    pub eq_tol: Option<f64>,
}

/// `Cost(C)`, `p(C)` and `v(C)` of one coalition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoalitionValue {
    pub cost: f64,
    pub price: f64,
    pub value: f64,
}

type Slot = Arc<OnceCell<Arc<ScheduleOutcome>>>;

/// Memoized characteristic function of one instance.
///
/// Safe to share between threads; every coalition is scheduled at most once.
pub struct GameCache<'a> {
    inst: &'a Instance,
    cfg: GameConfig,
    memo: Mutex<HashMap<Coalition, Slot>>,
    evaluations: AtomicUsize,
}

impl<'a> GameCache<'a> {
    pub fn new(inst: &'a Instance, cfg: GameConfig) -> Self {
        GameCache {
            inst,
            cfg,
            memo: Mutex::new(HashMap::new()),
            evaluations: AtomicUsize::new(0),
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.inst
    }

    pub fn config(&self) -> &GameConfig {
        &self.cfg
    }

    /// Number of oracle calls made so far, one per distinct non-empty coalition.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::SeqCst)
    }

    /// Optimal cooperative schedule of `c`.
    pub fn outcome(&self, c: Coalition) -> Result<Arc<ScheduleOutcome>> {
        self.inst.check_coalition(c)?;
        let slot = {
            let mut memo = self.memo.lock().unwrap();
            memo.entry(c).or_default().clone()
        };
        slot.get_or_try_init(|| {
            if !c.is_empty() {
                self.evaluations.fetch_add(1, Ordering::SeqCst);
            }
            coalition_cost(self.inst, c, &self.cfg.oracle).map(Arc::new)
        })
        .cloned()
    }

    pub fn cost(&self, c: Coalition) -> Result<f64> {
        if c.is_empty() {
            return Ok(0.0);
        }
        Ok(self.outcome(c)?.total_cost)
    }

    /// Cost of organization `k` scheduling its own jobs on its own machines.
    pub fn localcost(&self, k: usize) -> Result<f64> {
        self.cost(Coalition::singleton(k))
    }

    pub fn price(&self, c: Coalition) -> Result<f64> {
        c.members().map(|k| self.localcost(k)).sum()
    }

    pub fn value(&self, c: Coalition) -> Result<f64> {
        Ok(self.entry(c)?.value)
    }

    pub fn entry(&self, c: Coalition) -> Result<CoalitionValue> {
        let cost = self.cost(c)?;
        let price = self.price(c)?;
        let value = if c.len() <= 1 { 0.0 } else { price - cost };
        Ok(CoalitionValue { cost, price, value })
    }

    /// Whether some sub-coalition of `s` goes through the iterative solver.
    fn solver_in_play(&self, s: Coalition) -> bool {
        if self.inst.objective != Objective::SumEnergy {
            return false;
        }
        let mut jobs = s
            .members()
            .flat_map(|k| self.inst.organizations[k].jobs.iter());
        match jobs.next() {
            None => false,
            Some(first) => {
                !(first.volume == 1.0
                    && jobs.all(|j| j.volume == 1.0 && j.deadline == first.deadline))
            }
        }
    }

    /// Absolute tolerance for comparisons among values of sub-coalitions of `s`.
    pub fn eq_tol(&self, s: Coalition) -> Result<f64> {
        if let Some(t) = self.cfg.eq_tol {
            return Ok(t);
        }
        let rel = if self.solver_in_play(s) {
            10.0 * self.cfg.oracle.tol
        } else {
            CLOSED_FORM_EQ_TOL
        };
        let e = self.entry(s)?;
        Ok(rel * 1f64.max(e.value.abs()).max(e.price.abs()))
    }

    /// Members of `s` whose removal strictly lowers `v(s)`.
    pub fn pivotal_set(&self, s: Coalition) -> Result<Coalition> {
        let vs = self.value(s)?;
        let tol = self.eq_tol(s)?;
        let mut a = Coalition::empty();
        for j in s.members() {
            if vs - self.value(s.without(j))? > tol {
                a = a.with(j);
            }
        }
        Ok(a)
    }

    /// Payment vector over all organizations (zero outside the pivotal set)
    /// and whether every pivotal payment is nonnegative.
    pub fn theorem5_imputation(&self, s: Coalition) -> Result<(Vec<f64>, bool)> {
        let a = self.pivotal_set(s)?;
        let x = self.payments(s, a)?;
        let tol = self.eq_tol(s)?;
        let feasible = a.members().all(|j| x[j] >= -tol);
        Ok((x, feasible))
    }

    fn payments(&self, s: Coalition, a: Coalition) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.inst.org_count()];
        if a.is_empty() {
            return Ok(x);
        }
        let mut pool = self.cost(a)?;
        for k in a.members() {
            pool += self.cost(s.without(k))?;
        }
        let share = pool / a.len() as f64;
        for j in a.members() {
            x[j] = self.cost(s.without(j))? + self.localcost(j)? - share;
        }
        Ok(x)
    }

    /// `p(A) ≥ Cost(A)` for the pivotal set `A` of `s`.
    pub fn corollary6_gate(&self, s: Coalition) -> Result<bool> {
        let a = self.pivotal_set(s)?;
        Ok(self.price(a)? >= self.cost(a)? - self.eq_tol(s)?)
    }

    /// Decides whether `s` can form a stable alliance and computes the payments.
    pub fn detect_alliance(&self, s: Coalition) -> Result<AllianceReport> {
        self.inst.check_coalition(s)?;
        let members: Vec<usize> = s.members().collect();

        let locals: Vec<f64> = members
            .par_iter()
            .map(|&k| self.localcost(k))
            .collect::<Result<_>>()?;
        let without: Vec<f64> = members
            .par_iter()
            .map(|&k| self.cost(s.without(k)))
            .collect::<Result<_>>()?;
        let cost_s = self.cost(s)?;
        let price_s: f64 = locals.iter().sum();
        let value_s = if s.len() <= 1 { 0.0 } else { price_s - cost_s };
        let tol = self.eq_tol(s)?;

        let mut pivotal = Coalition::empty();
        for &k in &members {
            if value_s - self.value(s.without(k))? > tol {
                pivotal = pivotal.with(k);
            }
        }

        let price_a = self.price(pivotal)?;
        let cost_a = self.cost(pivotal)?;
        let aggregate_gate = price_a >= cost_a - tol;

        let mut report = AllianceReport {
            coalition: s,
            feasible: false,
            aggregate_gate,
            per_member_gate: false,
            violating: Vec::new(),
            pivotal,
            imputation: None,
            grand_value: value_s,
            cost: cost_s,
            price: price_s,
            pivotal_price: price_a,
            pivotal_cost: cost_a,
            localcosts: members
                .iter()
                .copied()
                .zip(locals.iter().copied())
                .collect(),
            leave_one_out_costs: members
                .iter()
                .copied()
                .zip(without.iter().copied())
                .collect(),
            efficiency_gap: None,
            incentive: Vec::new(),
            no_savings: value_s.abs() <= tol,
            eq_tol: tol,
        };
        if !aggregate_gate {
            return Ok(report);
        }

        let x = self.payments(s, pivotal)?;
        report.violating = pivotal.members().filter(|&j| x[j] < -tol).collect();
        report.per_member_gate = report.violating.is_empty();
        report.feasible = report.per_member_gate;
        report.efficiency_gap = Some(value_s - pivotal.members().map(|j| x[j]).sum::<f64>());

        let shares = self.outcome(s)?;
        report.incentive = members
            .iter()
            .zip(&locals)
            .map(|(&k, &local)| {
                let share = shares.per_org_cost.get(&k).copied().unwrap_or(0.0);
                Incentive {
                    org: k,
                    share,
                    payment: x[k],
                    localcost: local,
                    satisfied: share - x[k] <= local + tol,
                }
            })
            .collect();
        report.imputation = Some(x);
        Ok(report)
    }
}

/// Whether organization `org` gains by joining: `share - payment ≤ localcost`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Incentive {
    pub org: usize,
    /// Cost incurred on the organization's machines in the cooperative schedule.
    pub share: f64,
    pub payment: f64,
    pub localcost: f64,
    pub satisfied: bool,
}

/// Outcome of alliance detection on one coalition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AllianceReport {
    pub coalition: Coalition,
    pub feasible: bool,
    /// `p(A) ≥ Cost(A)`.
    pub aggregate_gate: bool,
    /// Every pivotal payment is nonnegative.
    pub per_member_gate: bool,
    /// Pivotal members with a negative payment.
    pub violating: Vec<usize>,
    pub pivotal: Coalition,
    /// One entry per organization of the instance; absent when the aggregate gate fails.
    pub imputation: Option<Vec<f64>>,
    /// `v(S)`.
    pub grand_value: f64,
    pub cost: f64,
    pub price: f64,
    pub pivotal_price: f64,
    pub pivotal_cost: f64,
    pub localcosts: BTreeMap<usize, f64>,
    pub leave_one_out_costs: BTreeMap<usize, f64>,
    /// `v(S)` minus the total payment.
    pub efficiency_gap: Option<f64>,
    pub incentive: Vec<Incentive>,
    pub no_savings: bool,
    pub eq_tol: f64,
}

impl AllianceReport {
    pub fn total_payment(&self) -> f64 {
        self.imputation
            .as_ref()
            .map(|x| self.pivotal.members().map(|j| x[j]).sum())
            .unwrap_or(0.0)
    }
}
