//! Bargaining-set checks for a payoff vector.
//!
//! An objection of `i` against `j` is a coalition `P ∋ i`, `P ∌ j` and a
//! payoff `y` on `P` with `y(P) ≤ v(P)`, `y ≥ x` on `P` and `y_i > x_i`. It is
//! countered by `Q ∋ j`, `Q ∌ i` whenever `v(Q)` covers `y` on `Q ∩ P` plus
//! `x` on `Q ∖ P`. A payoff vector is stable when every objection can be
//! countered.
//!
//! Strict inequalities are decided with an explicit margin `epsilon`: the
//! search looks for `y` with `y_i ≥ x_i + ε` that beats every counter by `ε`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::GameCache;
use crate::instance::Coalition;

/// Largest coalition for which counters are enumerated.
pub const MAX_COUNTER_MEMBERS: usize = 20;
/// Largest coalition for the full objection search.
pub const MAX_SEARCH_MEMBERS: usize = 12;
/// Up to this many members the search solves its feasibility systems by
/// vertex enumeration; above it, by linear programming.
pub const VERTEX_SEARCH_MEMBERS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Objection {
    pub objector: usize,
    pub target: usize,
    pub coalition: Coalition,
    /// Payoff of each member of `coalition`.
    pub payoff: BTreeMap<usize, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterObjection {
    pub coalition: Coalition,
    pub payoff: BTreeMap<usize, f64>,
}

/// Search result for one ordered pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairOutcome {
    pub objector: usize,
    pub target: usize,
    /// Coalitions with excess above epsilon that were examined.
    pub candidates: usize,
    pub justified: Option<Objection>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMethod {
    VertexEnumeration,
    LinearProgram,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub coalition: Coalition,
    pub payoff: Vec<f64>,
    /// Members that do not change `v(S)` are paid nothing.
    pub lemma1_ok: bool,
    /// Every member of the pivotal set has a nonnegative closed-form payment.
    pub condition3_ok: bool,
    pub individually_rational: bool,
    /// `x(S) ≤ v(S)`.
    pub budget_ok: bool,
    pub pivotal: Coalition,
    /// Row/column order of `lemma2_matrix`.
    pub members: Vec<usize>,
    /// Entry `[a][b]` checks the pairwise bound with objector `members[a]`
    /// and target `members[b]`; `None` unless both are pivotal and distinct.
    pub lemma2_matrix: Vec<Vec<Option<bool>>>,
    pub justified_objection: Option<Objection>,
    pub pairs: Vec<PairOutcome>,
    pub epsilon: f64,
    pub method: SearchMethod,
    pub eq_tol: f64,
}

impl StabilityReport {
    /// No justified objection was found at this epsilon.
    pub fn stable(&self) -> bool {
        self.justified_objection.is_none()
    }

    /// Any failed check, including pairwise bounds that are only sufficient.
    pub fn has_violation(&self) -> bool {
        !self.stable()
            || !self.lemma1_ok
            || !self.individually_rational
            || !self.budget_ok
            || self
                .lemma2_matrix
                .iter()
                .flatten()
                .any(|e| *e == Some(false))
    }
}

fn check_payoff(cache: &GameCache<'_>, x: &[f64]) -> Result<()> {
    let n = cache.instance().org_count();
    if x.len() != n {
        return Err(Error::PayoffLength {
            actual: x.len(),
            expected: n,
        });
    }
    Ok(())
}

/// `v(C) - x(C)`.
pub fn excess(cache: &GameCache<'_>, c: Coalition, x: &[f64]) -> Result<f64> {
    check_payoff(cache, x)?;
    Ok(cache.value(c)? - c.members().map(|k| x[k]).sum::<f64>())
}

/// Pairwise bound for pivotal `i`, `j` of `s`: when it holds, `j` can counter
/// any objection of `i` through `S∖{j}` with `S∖{i}`.
pub fn lemma2_check(
    cache: &GameCache<'_>,
    s: Coalition,
    x: &[f64],
    i: usize,
    j: usize,
) -> Result<bool> {
    check_payoff(cache, x)?;
    let bound = cache.localcost(j)? - cache.localcost(i)? - cache.cost(s.without(i))?
        + cache.cost(s.without(j))?;
    Ok(x[j] - x[i] <= bound + cache.eq_tol(s)?)
}

impl Objection {
    /// Replays every defining inequality against `x` and `v`.
    pub fn is_valid(&self, cache: &GameCache<'_>, x: &[f64]) -> Result<bool> {
        let p = self.coalition;
        if !p.contains(self.objector) || p.contains(self.target) {
            return Ok(false);
        }
        if self.payoff.keys().copied().collect::<Coalition>() != p {
            return Ok(false);
        }
        let v = cache.value(p)?;
        let total: f64 = self.payoff.values().sum();
        let budget_ok = total <= v + 1e-12 * v.abs().max(1.0);
        let dominates = self.payoff.iter().all(|(&k, &y)| y >= x[k]);
        Ok(budget_ok && dominates && self.payoff[&self.objector] > x[self.objector])
    }
}

/// Looks for a counter-objection of the target among all coalitions of `s`
/// that contain the target and not the objector.
pub fn counter_exists(
    cache: &GameCache<'_>,
    s: Coalition,
    x: &[f64],
    obj: &Objection,
) -> Result<Option<CounterObjection>> {
    check_payoff(cache, x)?;
    if s.len() > MAX_COUNTER_MEMBERS {
        return Err(Error::SizeCap {
            what: "coalition size for counter enumeration",
            actual: s.len(),
            cap: MAX_COUNTER_MEMBERS,
        });
    }
    let (i, j, p) = (obj.objector, obj.target, obj.coalition);
    let rest = s.without(i).without(j);
    for sub in rest.subsets() {
        let q = sub.with(j);
        let need: f64 = q
            .members()
            .map(|k| if p.contains(k) { obj.payoff[&k] } else { x[k] })
            .sum();
        let v = cache.value(q)?;
        if v >= need {
            let mut payoff: BTreeMap<usize, f64> = q
                .members()
                .map(|k| (k, if p.contains(k) { obj.payoff[&k] } else { x[k] }))
                .collect();
            *payoff.get_mut(&j).unwrap() += v - need;
            return Ok(Some(CounterObjection {
                coalition: q,
                payoff,
            }));
        }
    }
    Ok(None)
}

/// Covering system on the members of `P` (as positions `0..dim`):
/// `u ≥ 0`, `Σ u = budget`, and `Σ_{k∈T} u_k ≥ c_T` for each row.
#[derive(Clone, Debug)]
pub(crate) struct Covering {
    pub dim: usize,
    pub budget: f64,
    pub rows: Vec<(u64, f64)>,
}

impl Covering {
    fn row_sum(mask: u64, u: &[f64]) -> f64 {
        (0..u.len())
            .filter(|&k| mask >> k & 1 == 1)
            .map(|k| u[k])
            .sum()
    }

    fn satisfied(&self, u: &[f64], slack: f64) -> bool {
        u.iter().all(|&x| x >= -slack)
            && (u.iter().sum::<f64>() - self.budget).abs() <= slack
            && self
                .rows
                .iter()
                .all(|&(m, c)| Covering::row_sum(m, u) >= c - slack)
    }

    /// Tries every vertex of `{Σu = budget}` cut by `dim - 1` tight inequalities.
    pub fn solve_vertices(&self) -> Option<Vec<f64>> {
        let d = self.dim;
        let slack = 1e-9 * self.budget.abs().max(1.0);
        // every inequality as (coefficient mask, rhs); u_k ≥ 0 first
        let ineq: Vec<(u64, f64)> = (0..d)
            .map(|k| (1u64 << k, 0.0))
            .chain(self.rows.iter().copied())
            .collect();
        let mut pick: Vec<usize> = (0..d.saturating_sub(1)).collect();
        if d == 0 {
            return None;
        }
        loop {
            let mut a = vec![vec![1.0; d]];
            let mut b = vec![self.budget];
            for &r in &pick {
                let (mask, c) = ineq[r];
                a.push((0..d).map(|k| f64::from((mask >> k & 1) as u8)).collect());
                b.push(c);
            }
            if let Some(u) = gauss_solve(a, b) {
                if self.satisfied(&u, slack) {
                    return Some(u);
                }
            }
            if !next_combination(&mut pick, ineq.len()) {
                return None;
            }
        }
    }

    /// Minimizes `Σ u` under the covering rows; feasible iff the minimum
    /// fits the budget.
    pub fn solve_lp(&self) -> Result<Option<Vec<f64>>> {
        use microlp::{ComparisonOp, OptimizationDirection, Problem};
        let mut lp = Problem::new(OptimizationDirection::Minimize);
        let vars: Vec<_> = (0..self.dim)
            .map(|_| lp.add_var(1.0, (0.0, f64::INFINITY)))
            .collect();
        for &(mask, c) in &self.rows {
            let expr: Vec<_> = (0..self.dim)
                .filter(|&k| mask >> k & 1 == 1)
                .map(|k| (vars[k], 1.0))
                .collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Ge, c);
        }
        let sol = match lp.solve() {
            Ok(outcome) => outcome
                .into_solution()
                .map_err(|e| Error::Lp(format!("{e:?}")))?,
            Err(microlp::Error::Infeasible) => return Ok(None),
            Err(e) => return Err(Error::Lp(e.to_string())),
        };
        let mut u: Vec<f64> = vars.iter().map(|&v| sol.var_value(v).max(0.0)).collect();
        let used: f64 = u.iter().sum();
        if used > self.budget {
            return Ok(None);
        }
        // leftover budget goes to the first coordinate; covering rows stay satisfied
        u[0] += self.budget - used;
        Ok(Some(u))
    }
}

fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let r = pick.len();
    for idx in (0..r).rev() {
        if pick[idx] < n - r + idx {
            pick[idx] += 1;
            for k in idx + 1..r {
                pick[k] = pick[k - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                let (upper, lower) = a.split_at_mut(r);
                for (dst, src) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *dst -= f * src;
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

struct Search<'c, 'a> {
    cache: &'c GameCache<'a>,
    s: Coalition,
    x: &'c [f64],
    epsilon: f64,
    method: SearchMethod,
    values: HashMap<Coalition, f64>,
}

impl Search<'_, '_> {
    fn excess(&self, c: Coalition) -> f64 {
        self.values[&c] - c.members().map(|k| self.x[k]).sum::<f64>()
    }

    /// Builds the blocking system for objector `i`, target `j` through `p`,
    /// or `None` when some counter cannot be blocked by any payoff.
    fn system(&self, i: usize, j: usize, p: Coalition) -> Option<(Vec<usize>, Covering)> {
        let members: Vec<usize> = p.members().collect();
        let pos = |k: usize| members.iter().position(|&m| m == k).unwrap();
        let mut rows: BTreeMap<u64, f64> = BTreeMap::new();
        rows.insert(1u64 << pos(i), self.epsilon);
        for sub in self.s.without(i).without(j).subsets() {
            let q = sub.with(j);
            let c = self.excess(q) + self.epsilon;
            if c <= 0.0 {
                continue;
            }
            let shared = q.intersection(p);
            if shared.is_empty() {
                return None;
            }
            let mask = shared.members().fold(0u64, |m, k| m | 1u64 << pos(k));
            let e = rows.entry(mask).or_insert(c);
            *e = e.max(c);
        }
        let covering = Covering {
            dim: members.len(),
            budget: self.excess(p),
            rows: rows.into_iter().collect(),
        };
        Some((members, covering))
    }

    fn pair(&self, i: usize, j: usize) -> Result<PairOutcome> {
        let mut candidates = 0;
        for sub in self.s.without(i).without(j).subsets() {
            let p = sub.with(i);
            if self.excess(p) <= self.epsilon {
                continue;
            }
            candidates += 1;
            let Some((members, system)) = self.system(i, j, p) else {
                continue;
            };
            let solution = match self.method {
                SearchMethod::VertexEnumeration => system.solve_vertices(),
                SearchMethod::LinearProgram => system.solve_lp()?,
            };
            if let Some(u) = solution {
                let payoff = members
                    .iter()
                    .zip(&u)
                    .map(|(&k, &uk)| (k, self.x[k] + uk.max(0.0)))
                    .collect();
                return Ok(PairOutcome {
                    objector: i,
                    target: j,
                    candidates,
                    justified: Some(Objection {
                        objector: i,
                        target: j,
                        coalition: p,
                        payoff,
                    }),
                });
            }
        }
        Ok(PairOutcome {
            objector: i,
            target: j,
            candidates,
            justified: None,
        })
    }
}

fn search_pairs(
    cache: &GameCache<'_>,
    s: Coalition,
    x: &[f64],
    epsilon: f64,
    method: Option<SearchMethod>,
) -> Result<(Vec<PairOutcome>, SearchMethod)> {
    check_payoff(cache, x)?;
    if !(epsilon > 0.0) {
        return Err(Error::Argument("epsilon must be positive".into()));
    }
    if s.len() > MAX_SEARCH_MEMBERS {
        return Err(Error::SizeCap {
            what: "coalition size for objection search",
            actual: s.len(),
            cap: MAX_SEARCH_MEMBERS,
        });
    }
    let method = method.unwrap_or(if s.len() <= VERTEX_SEARCH_MEMBERS {
        SearchMethod::VertexEnumeration
    } else {
        SearchMethod::LinearProgram
    });
    let values = s
        .subsets()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|c| Ok((c, cache.value(c)?)))
        .collect::<Result<HashMap<_, _>>>()?;
    let search = Search {
        cache,
        s,
        x,
        epsilon,
        method,
        values,
    };
    let pairs: Vec<(usize, usize)> = s
        .members()
        .flat_map(|i| s.members().filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let outcomes = pairs
        .par_iter()
        .map(|&(i, j)| search.pair(i, j))
        .collect::<Result<Vec<_>>>()?;
    debug_assert!(std::ptr::eq(search.cache, cache));
    Ok((outcomes, method))
}

/// First justified objection (in objector, target, coalition order) found at
/// margin `epsilon`, if any.
pub fn justified_objection_search(
    cache: &GameCache<'_>,
    s: Coalition,
    x: &[f64],
    epsilon: f64,
) -> Result<Option<Objection>> {
    search_with(cache, s, x, epsilon, None)
}

/// As [`justified_objection_search`] with a forced feasibility method.
pub fn search_with(
    cache: &GameCache<'_>,
    s: Coalition,
    x: &[f64],
    epsilon: f64,
    method: Option<SearchMethod>,
) -> Result<Option<Objection>> {
    let (pairs, _) = search_pairs(cache, s, x, epsilon, method)?;
    Ok(pairs.into_iter().find_map(|p| p.justified))
}

/// All stability checks of `x` on coalition `s`.
pub fn stability_report(
    cache: &GameCache<'_>,
    s: Coalition,
    x: &[f64],
    epsilon: f64,
) -> Result<StabilityReport> {
    check_payoff(cache, x)?;
    let tol = cache.eq_tol(s)?;
    let vs = cache.value(s)?;
    let pivotal = cache.pivotal_set(s)?;
    let members: Vec<usize> = s.members().collect();

    let mut lemma1_ok = true;
    for &j in &members {
        if !pivotal.contains(j) && x[j].abs() > tol {
            lemma1_ok = false;
        }
    }

    let condition3_ok = if pivotal.is_empty() {
        true
    } else {
        let mut pool = cache.cost(pivotal)?;
        for k in pivotal.members() {
            pool += cache.cost(s.without(k))?;
        }
        let share = pool / pivotal.len() as f64;
        pivotal
            .members()
            .map(|j| Ok(cache.cost(s.without(j))? + cache.localcost(j)? >= share - tol))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .all(|b| b)
    };

    let individually_rational = members.iter().all(|&k| x[k] >= -tol);
    let budget_ok = members.iter().map(|&k| x[k]).sum::<f64>() <= vs + tol;

    let mut lemma2_matrix = vec![vec![None; members.len()]; members.len()];
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            if i != j && pivotal.contains(i) && pivotal.contains(j) {
                lemma2_matrix[a][b] = Some(lemma2_check(cache, s, x, i, j)?);
            }
        }
    }

    let (pairs, method) = search_pairs(cache, s, x, epsilon, None)?;
    let justified_objection = pairs.iter().find_map(|p| p.justified.clone());

    Ok(StabilityReport {
        coalition: s,
        payoff: x.to_vec(),
        lemma1_ok,
        condition3_ok,
        individually_rational,
        budget_ok,
        pivotal,
        members,
        lemma2_matrix,
        justified_objection,
        pairs,
        epsilon,
        method,
        eq_tol: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameConfig;
    use crate::instance::{Instance, Job, Objective, Organization};

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
    fn excess_examples() {
        let inst = example1(2.0);
        let g = GameCache::new(&inst, GameConfig::default());
        let x = [168.0, 0.0, 24.0, 24.0];
        assert_eq!(excess(&g, c(&[1, 3]), &x).unwrap(), -6.0);
        assert_eq!(excess(&g, Coalition::empty(), &x).unwrap(), 0.0);
        assert_eq!(excess(&g, c(&[1]), &x).unwrap(), 0.0);
        assert!(excess(&g, c(&[1]), &x[..3]).is_err());
    }

    #[test]
    fn lemma2_examples() {
        let inst = example1(2.0);
        let g = GameCache::new(&inst, GameConfig::default());
        let s = c(&[1, 3]);
        let x = [0.0, 9.0, 0.0, 9.0];
        assert!(lemma2_check(&g, s, &x, 1, 3).unwrap());
        assert!(lemma2_check(&g, s, &x, 3, 1).unwrap());
        let skewed = [0.0, 8.0, 0.0, 10.0];
        assert!(!lemma2_check(&g, s, &skewed, 1, 3).unwrap());
        assert!(lemma2_check(&g, s, &skewed, 3, 1).unwrap());
    }

    #[test]
    fn singleton_objections_are_impossible() {
        // v({k}) = 0 cannot fund y_k > x_k ≥ 0
        let inst = example1(2.0);
        let g = GameCache::new(&inst, GameConfig::default());
        let x = [0.0, 8.0, 0.0, 10.0];
        assert!(excess(&g, c(&[1]), &x).unwrap() < 0.0);
        assert!(justified_objection_search(&g, c(&[1, 3]), &x, 1e-3)
            .unwrap()
            .is_none());
    }

    #[test]
    fn counter_found_in_three_player_game() {
        // three orgs with one machine; A has 4 unit jobs, B and C are idle.
        // v({A,B}) = v({A,C}) = 16 - 8 = 8, v(S) = 16 - 16/3
        let org = |id: &str, n: usize| Organization {
            id: id.into(),
            machines: 1,
            jobs: vec![Job::unit_with_deadline(1.0); n],
        };
        let inst = Instance {
            objective: Objective::SumEnergy,
            alpha: Some(2.0),
            organizations: vec![org("A", 4), org("B", 0), org("C", 0)],
        };
        let g = GameCache::new(&inst, GameConfig::default());
        let s = c(&[0, 1, 2]);
        let x = [4.0, 3.0, 3.0];
        // B objects against C with {A,B}: y = (4.5, 3.5)
        let obj = Objection {
            objector: 1,
            target: 2,
            coalition: c(&[0, 1]),
            payoff: [(0, 4.5), (1, 3.5)].into_iter().collect(),
        };
        assert!(obj.is_valid(&g, &x).unwrap());
        // C answers with {A,C}: 8 ≥ 4.5 + 3
        let counter = counter_exists(&g, s, &x, &obj).unwrap().unwrap();
        assert_eq!(counter.coalition, c(&[0, 2]));
        assert_eq!(counter.payoff[&0], 4.5);
        assert_eq!(counter.payoff[&2], 3.5);

        // enumeration agrees with a direct check of both candidate counters
        for step in 0..=20 {
            let ya = 4.0 + 0.1 * f64::from(step);
            let probe = Objection {
                payoff: [(0, ya), (1, 8.0 - ya)].into_iter().collect(),
                ..obj.clone()
            };
            let direct = g.value(c(&[0, 2])).unwrap() >= ya + x[2] || x[2] <= 0.0;
            assert_eq!(counter_exists(&g, s, &x, &probe).unwrap().is_some(), direct);
        }
    }

    #[test]
    fn vertex_and_lp_agree_on_small_systems() {
        let systems = [
            Covering {
                dim: 2,
                budget: 5.0,
                rows: vec![(0b01, 1.0), (0b10, 3.0)],
            },
            Covering {
                dim: 2,
                budget: 3.0,
                rows: vec![(0b01, 1.0), (0b10, 3.0)],
            },
            Covering {
                dim: 3,
                budget: 4.0,
                rows: vec![(0b011, 3.0), (0b110, 3.0), (0b100, 0.5)],
            },
            Covering {
                dim: 3,
                budget: 3.2,
                rows: vec![(0b011, 3.0), (0b110, 3.0), (0b001, 0.5)],
            },
            Covering {
                dim: 1,
                budget: 2.0,
                rows: vec![(0b1, 2.5)],
            },
        ];
        for sys in &systems {
            let v = sys.solve_vertices();
            let l = sys.solve_lp().unwrap();
            assert_eq!(v.is_some(), l.is_some(), "{sys:?}");
            for u in v.iter().chain(l.iter()) {
                assert!(sys.satisfied(u, 1e-9), "{sys:?} {u:?}");
            }
        }
    }
}
