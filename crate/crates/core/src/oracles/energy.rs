//! Energy-optimal speed scaling for jobs released at time 0.
//!
//! Power at speed `s` is `s^alpha`. Migration between machines is allowed,
//! but a job never runs on two machines at once.

use super::{MachineSchedule, Segment};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyJob {
    pub volume: f64,
    pub deadline: f64,
}

/// A job's share of one time window: it occupies `duration` time at `speed`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Piece {
    pub job: usize,
    pub duration: f64,
    pub speed: f64,
}

/// McNaughton wrap-around of `pieces` into `[start, start + len)` on `m`
/// machines. Requires every duration ≤ `len` and their sum ≤ `m * len`.
pub(crate) fn wrap_around(
    pieces: &[Piece],
    m: usize,
    start: f64,
    len: f64,
    alpha: f64,
    out: &mut MachineSchedule,
) {
    let mut machine = 0usize;
    let mut offset = 0.0f64;
    let emit = |out: &mut MachineSchedule, job, machine: usize, from: f64, to: f64, speed: f64| {
        if to > from {
            out.per_machine_cost[machine] += speed.powf(alpha) * (to - from);
            out.segments.push(Segment {
                job,
                machine,
                start: start + from,
                end: start + to,
                speed: Some(speed),
            });
        }
    };
    for p in pieces.iter().filter(|p| p.duration > 0.0) {
        let d = p.duration.min(len);
        if offset + d <= len {
            emit(out, p.job, machine, offset, offset + d, p.speed);
            offset += d;
        } else {
            let first = len - offset;
            // the tail lands on the next machine before `offset`, so no overlap
            emit(out, p.job, machine, offset, len, p.speed);
            machine += 1;
            offset = d - first;
            if machine < m {
                emit(out, p.job, machine, 0.0, offset, p.speed);
            } else {
                // rounding residue past the last machine
                debug_assert!(
                    offset <= 1e-9 * len.max(1.0),
                    "capacity exceeded by {offset}"
                );
                machine = m - 1;
                offset = len;
            }
        }
        if offset >= len && machine + 1 < m {
            machine += 1;
            offset = 0.0;
        }
    }
}

/// `n` unit jobs sharing `deadline` on `m` machines with migration.
///
/// With `n ≥ m` every machine carries load `n/m` at speed `n/(m·deadline)`;
/// otherwise each job runs alone at speed `1/deadline`.
pub fn schedule_energy_common_deadline(
    n: usize,
    m: usize,
    deadline: f64,
    alpha: f64,
) -> MachineSchedule {
    assert!(m >= 1 && deadline > 0.0);
    let mut out = MachineSchedule::empty(m);
    if n == 0 {
        return out;
    }
    let speed = if n >= m {
        n as f64 / (m as f64 * deadline)
    } else {
        1.0 / deadline
    };
    let pieces: Vec<Piece> = (0..n)
        .map(|job| Piece {
            job,
            duration: if n >= m {
                m as f64 * deadline / n as f64
            } else {
                deadline
            },
            speed,
        })
        .collect();
    wrap_around(&pieces, m, 0.0, deadline, alpha, &mut out);
    if n >= m {
        // every machine is busy for the whole window; use the exact value
        let per = speed.powf(alpha) * deadline;
        out.per_machine_cost.iter_mut().for_each(|c| *c = per);
    }
    out
}

/// `n` unit jobs sharing `deadline` without migration: loads differ by at most
/// one job and each machine runs its load at constant speed.
pub fn schedule_energy_balanced(n: usize, m: usize, deadline: f64, alpha: f64) -> MachineSchedule {
    assert!(m >= 1 && deadline > 0.0);
    let mut out = MachineSchedule::empty(m);
    let (q, r) = (n / m, n % m);
    let mut job = 0;
    for machine in 0..m {
        let load = q + usize::from(machine < r);
        if load == 0 {
            continue;
        }
        let speed = load as f64 / deadline;
        let slot = deadline / load as f64;
        for i in 0..load {
            out.segments.push(Segment {
                job,
                machine,
                start: i as f64 * slot,
                end: (i + 1) as f64 * slot,
                speed: Some(speed),
            });
            job += 1;
        }
        out.per_machine_cost[machine] = speed.powf(alpha) * deadline;
    }
    out
}

/// Single machine, releases 0: critical-prefix peeling.
///
/// Jobs are sorted by deadline. From the current time `t0` the prefix with
/// the largest density `work / (deadline - t0)` is run at that constant speed
/// in EDF order; on equal density the longer prefix wins.
pub fn schedule_energy_single_machine_yds(jobs: &[EnergyJob], alpha: f64) -> MachineSchedule {
    let mut order: Vec<usize> = (0..jobs.len()).collect();
    order.sort_by(|&a, &b| jobs[a].deadline.total_cmp(&jobs[b].deadline));

    let mut out = MachineSchedule::empty(1);
    let mut t0 = 0.0f64;
    let mut first = 0usize;
    while first < order.len() {
        let mut best = (f64::NEG_INFINITY, first);
        let mut work = 0.0;
        for (k, &j) in order.iter().enumerate().skip(first) {
            work += jobs[j].volume;
            let density = work / (jobs[j].deadline - t0);
            if density >= best.0 * (1.0 - 1e-12) {
                best = (density, k);
            }
        }
        let (speed, last) = best;
        let mut t = t0;
        for &j in &order[first..=last] {
            let d = jobs[j].volume / speed;
            out.segments.push(Segment {
                job: j,
                machine: 0,
                start: t,
                end: t + d,
                speed: Some(speed),
            });
            t += d;
        }
        let end = jobs[order[last]].deadline;
        out.per_machine_cost[0] += speed.powf(alpha) * (end - t0);
        t0 = end;
        first = last + 1;
    }
    out
}

/// Optimal occupation of one window of length `len` on `m` machines by jobs
/// with fixed `works`: the largest jobs get a machine of their own while they
/// exceed the average of what remains, the rest share the remaining machines
/// at one common speed. Returns each job's speed; a job with no work gets the
/// marginal speed it would run at.
pub(crate) fn window_speeds(works: &[f64], m: usize, len: f64) -> Vec<f64> {
    let n = works.len();
    let mut speeds = vec![0.0; n];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| works[b].total_cmp(&works[a]));
    let mut remaining: f64 = works.iter().sum();
    let mut free = m;
    for (k, &j) in order.iter().enumerate() {
        if n - k <= free {
            for &i in &order[k..] {
                speeds[i] = works[i] / len;
            }
            return speeds;
        }
        if free > 1 && works[j] * free as f64 > remaining {
            speeds[j] = works[j] / len;
            remaining = (remaining - works[j]).max(0.0);
            free -= 1;
        } else {
            let shared = remaining / (free as f64 * len);
            for &i in &order[k..] {
                speeds[i] = shared;
            }
            return speeds;
        }
    }
    speeds
}

/// Energy of one window given per-job speeds from [`window_speeds`].
pub(crate) fn window_energy(works: &[f64], speeds: &[f64], alpha: f64) -> f64 {
    works
        .iter()
        .zip(speeds)
        .filter(|(w, _)| **w > 0.0)
        .map(|(w, s)| w * s.powf(alpha - 1.0))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(deadlines: &[f64]) -> Vec<EnergyJob> {
        deadlines
            .iter()
            .map(|&d| EnergyJob {
                volume: 1.0,
                deadline: d,
            })
            .collect()
    }

    fn assert_valid(s: &MachineSchedule, jobs: &[EnergyJob]) {
        for (j, job) in jobs.iter().enumerate() {
            assert!(
                (s.work_of(j) - job.volume).abs() < 1e-9,
                "job {j} work {}",
                s.work_of(j)
            );
            for g in s.segments.iter().filter(|g| g.job == j) {
                assert!(g.end <= job.deadline + 1e-9);
                assert!(g.len() > 0.0 && g.speed.unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn common_deadline_examples() {
        assert_eq!(
            schedule_energy_common_deadline(28, 4, 1.0, 3.0).total_cost(),
            1372.0
        );
        assert_eq!(
            schedule_energy_common_deadline(9, 3, 1.0, 2.0).total_cost(),
            27.0
        );
        assert_eq!(
            schedule_energy_common_deadline(3, 2, 1.0, 2.0).total_cost(),
            4.5
        );
        let few = schedule_energy_common_deadline(2, 5, 2.0, 2.0);
        assert!((few.total_cost() - 2.0 * 2f64.powf(-1.0)).abs() < 1e-15);
    }

    #[test]
    fn common_deadline_wraps_without_overlap() {
        let s = schedule_energy_common_deadline(3, 2, 1.0, 2.0);
        assert_valid(&s, &unit(&[1.0; 3]));
        // job 1 is split across both machines at [2/3,1) and [0,1/3)
        let pieces: Vec<_> = s.segments.iter().filter(|g| g.job == 1).collect();
        assert_eq!(pieces.len(), 2);
        assert!(pieces[1].end <= pieces[0].start + 1e-12);
        let wrapped = s.per_machine_cost.iter().sum::<f64>();
        assert!((wrapped - 4.5).abs() < 1e-12);
    }

    #[test]
    fn balanced_loads() {
        let s = schedule_energy_balanced(5, 2, 1.0, 2.0);
        assert_eq!(s.per_machine_cost, vec![9.0, 4.0]);
        assert_valid(&s, &unit(&[1.0; 5]));
    }

    #[test]
    fn yds_examples() {
        let a = schedule_energy_single_machine_yds(&unit(&[1.0, 2.0]), 2.0);
        assert!((a.total_cost() - 2.0).abs() < 1e-12);
        let b = schedule_energy_single_machine_yds(&unit(&[1.0, 3.0]), 2.0);
        assert!((b.total_cost() - 1.5).abs() < 1e-12);
        assert_valid(&b, &unit(&[1.0, 3.0]));
        let c = schedule_energy_single_machine_yds(&unit(&[2.0]), 2.0);
        assert!((c.total_cost() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn yds_equal_density_takes_longer_prefix() {
        // densities 1/1 and 2/2 tie: one interval at speed 1
        let s = schedule_energy_single_machine_yds(&unit(&[1.0, 2.0]), 3.0);
        assert!(s.segments.iter().all(|g| g.speed == Some(1.0)));
    }

    #[test]
    fn yds_general_volumes() {
        let jobs = [
            EnergyJob {
                volume: 3.0,
                deadline: 4.0,
            },
            EnergyJob {
                volume: 2.0,
                deadline: 1.0,
            },
            EnergyJob {
                volume: 0.5,
                deadline: 5.0,
            },
        ];
        let s = schedule_energy_single_machine_yds(&jobs, 2.0);
        assert_valid(&s, &jobs);
        // [0,1] at speed 2, [1,4] at speed 1, [4,5] at speed 1/2
        assert!((s.total_cost() - (4.0 + 3.0 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn window_speeds_dedicates_large_jobs() {
        let s = window_speeds(&[6.0, 1.0, 1.0], 2, 2.0);
        assert_eq!(s, vec![3.0, 1.0, 1.0]);
        // 1 + 1e-16 rounds to 1, which once left no machine for the last job
        let s = window_speeds(&[1.0, 1e-16, 0.0], 2, 1.0);
        assert!(s.iter().all(|v| v.is_finite()), "{s:?}");
        let s = window_speeds(&[1.0, 1.0, 1.0], 2, 1.0);
        assert_eq!(s, vec![1.5, 1.5, 1.5]);
        let s = window_speeds(&[2.0, 0.0], 3, 1.0);
        assert_eq!(s, vec![2.0, 0.0]);
    }
}
