//! Exhaustive reference oracles for tests. Both refuse anything beyond desk
//! scale.

use super::energy::EnergyJob;
use crate::error::{Error, Result};

pub const MAX_BRUTE_JOBS: usize = 8;
pub const MAX_BRUTE_MACHINES: usize = 3;
const MAX_LATTICE_POINTS: usize = 5_000_000;

fn check_size(n: usize, m: usize) -> Result<()> {
    if n > MAX_BRUTE_JOBS {
        return Err(Error::SizeCap {
            what: "job count",
            actual: n,
            cap: MAX_BRUTE_JOBS,
        });
    }
    if m > MAX_BRUTE_MACHINES {
        return Err(Error::SizeCap {
            what: "machine count",
            actual: m,
            cap: MAX_BRUTE_MACHINES,
        });
    }
    if m == 0 {
        return Err(Error::Argument("at least one machine is required".into()));
    }
    Ok(())
}

/// Minimum total completion time over every assignment of jobs to machines,
/// each machine running its jobs shortest first.
pub fn brute_force_sum_completion(proc_times: &[f64], m: usize) -> Result<f64> {
    check_size(proc_times.len(), m)?;
    let n = proc_times.len();
    let mut best = f64::INFINITY;
    let mut assign = vec![0usize; n];
    let mut per_machine: Vec<Vec<f64>> = vec![Vec::new(); m];
    for code in 0..m.pow(n as u32) {
        let mut c = code;
        for a in assign.iter_mut() {
            *a = c % m;
            c /= m;
        }
        per_machine.iter_mut().for_each(Vec::clear);
        for (j, &a) in assign.iter().enumerate() {
            per_machine[a].push(proc_times[j]);
        }
        let mut total = 0.0;
        for jobs in per_machine.iter_mut() {
            jobs.sort_by(f64::total_cmp);
            let mut t = 0.0;
            for p in jobs.iter() {
                t += p;
                total += t;
            }
        }
        best = best.min(total);
    }
    Ok(if n == 0 { 0.0 } else { best })
}

/// Minimum energy over a lattice of work splits: every job sends a multiple
/// of `step * volume` to each window before its deadline. Each window's
/// energy for fixed works is found by bisection on the occupation times.
/// The result upper-bounds the true optimum and converges as `step → 0`.
pub fn grid_energy_oracle(jobs: &[EnergyJob], m: usize, alpha: f64, step: f64) -> Result<f64> {
    check_size(jobs.len(), m)?;
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::Argument("grid step must lie in (0, 1]".into()));
    }
    let q = (1.0 / step).round() as usize;

    let mut bounds: Vec<f64> = jobs.iter().map(|j| j.deadline).collect();
    bounds.sort_by(f64::total_cmp);
    bounds.dedup();
    bounds.insert(0, 0.0);
    let windows: Vec<usize> = jobs
        .iter()
        .map(|j| {
            bounds
                .iter()
                .filter(|&&b| b > 0.0 && b <= j.deadline)
                .count()
        })
        .collect();

    // per job: all ways to write q as an ordered sum over its windows
    let splits: Vec<Vec<Vec<usize>>> = windows.iter().map(|&k| compositions(q, k)).collect();
    let points = splits
        .iter()
        .try_fold(1usize, |acc, s| acc.checked_mul(s.len()))
        .unwrap_or(usize::MAX);
    if points > MAX_LATTICE_POINTS {
        return Err(Error::SizeCap {
            what: "lattice size",
            actual: points,
            cap: MAX_LATTICE_POINTS,
        });
    }

    let k = bounds.len() - 1;
    let mut choice = vec![0usize; jobs.len()];
    let mut best = f64::INFINITY;
    let mut window_work: Vec<Vec<f64>> = vec![Vec::new(); k];
    loop {
        window_work.iter_mut().for_each(Vec::clear);
        for (j, job) in jobs.iter().enumerate() {
            for (t, &units) in splits[j][choice[j]].iter().enumerate() {
                if units > 0 {
                    window_work[t].push(job.volume * units as f64 / q as f64);
                }
            }
        }
        let energy: f64 = window_work
            .iter()
            .enumerate()
            .map(|(t, works)| window_energy_bisect(works, m, bounds[t + 1] - bounds[t], alpha))
            .sum();
        best = best.min(energy);

        // odometer over the product of splits
        let mut j = 0;
        loop {
            if j == jobs.len() {
                return Ok(if jobs.is_empty() { 0.0 } else { best });
            }
            choice[j] += 1;
            if choice[j] < splits[j].len() {
                break;
            }
            choice[j] = 0;
            j += 1;
        }
    }
}

fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in 0..=total {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `min Σ w^α / τ^(α-1)` subject to `Σ τ ≤ m·len` and `0 < τ ≤ len`.
/// Stationarity gives `τ_j = min(len, c·w_j)` for one scale `c`.
fn window_energy_bisect(works: &[f64], m: usize, len: f64, alpha: f64) -> f64 {
    let energy = |tau: &dyn Fn(f64) -> f64| -> f64 {
        works
            .iter()
            .map(|&w| w.powf(alpha) / tau(w).powf(alpha - 1.0))
            .sum()
    };
    if works.len() <= m {
        return energy(&|_| len);
    }
    let capacity = m as f64 * len;
    let used = |c: f64| works.iter().map(|&w| (c * w).min(len)).sum::<f64>();
    let (mut lo, mut hi) = (
        0.0,
        len / works.iter().copied().fold(f64::INFINITY, f64::min),
    );
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if used(mid) > capacity {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    energy(&|w| (lo * w).min(len))
}
