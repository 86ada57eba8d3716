//! `P || ΣC_j` by shortest processing time first.

use super::{MachineSchedule, Segment};

/// Optimal total completion time of non-preemptive jobs on `m` identical
/// machines.
///
/// Jobs are sorted by processing time (ties keep input order) and dealt to
/// machines round-robin, so the `m` longest jobs finish last on distinct
/// machines, the next `m` second to last, and so on.
pub fn schedule_sum_completion(proc_times: &[f64], m: usize) -> MachineSchedule {
    assert!(m >= 1, "at least one machine is required");
    let mut order: Vec<usize> = (0..proc_times.len()).collect();
    order.sort_by(|&a, &b| proc_times[a].total_cmp(&proc_times[b]));

    let mut clock = vec![0.0; m];
    let mut out = MachineSchedule::empty(m);
    for (rank, &job) in order.iter().enumerate() {
        let machine = rank % m;
        let start = clock[machine];
        let end = start + proc_times[job];
        clock[machine] = end;
        out.per_machine_cost[machine] += end;
        out.segments.push(Segment {
            job,
            machine,
            start,
            end,
            speed: None,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(
            schedule_sum_completion(&[1.0, 2.0, 3.0], 1).total_cost(),
            10.0
        );
        assert_eq!(
            schedule_sum_completion(&[3.0, 1.0, 2.0], 2).total_cost(),
            7.0
        );
        assert_eq!(schedule_sum_completion(&[5.0, 9.0], 3).total_cost(), 14.0);
        let empty = schedule_sum_completion(&[], 2);
        assert_eq!(empty.total_cost(), 0.0);
        assert!(empty.segments.is_empty());
    }

    #[test]
    fn ties_follow_input_order() {
        let s = schedule_sum_completion(&[2.0, 2.0, 2.0], 2);
        let jobs: Vec<(usize, usize)> = s.segments.iter().map(|g| (g.job, g.machine)).collect();
        assert_eq!(jobs, vec![(0, 0), (1, 1), (2, 0)]);
    }
}
