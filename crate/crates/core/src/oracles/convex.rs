//! Migratory multi-machine energy minimization as a convex program.
//!
//! Time is cut at the distinct deadlines into windows. Each job spreads its
//! volume over the windows that end no later than its deadline; the works
//! `w[j][t]` are the variables. For fixed works the optimal occupation of a
//! window is closed-form (see [`window_speeds`]), which leaves a smooth convex
//! objective over a product of simplices. The stationarity conditions only
//! involve speeds, so the minimizer is the same for every `alpha`; descent
//! runs on the `alpha = 2` objective with a fixed step, and stops once the
//! Frank-Wolfe duality gap at the requested `alpha` certifies relative
//! accuracy `tol`.
//!
//! The partial derivative of the objective in `w[j][t]` is `alpha * s^(alpha-1)`
//! where `s` is the speed job `j` runs at (or would run at) in window `t`.

use super::energy::{window_energy, window_speeds, wrap_around, EnergyJob, Piece};
use super::{MachineSchedule, OracleConfig};
use crate::error::{Error, Result};

struct Layout {
    /// Window boundaries `0 = b[0] < b[1] < ... < b[K]`.
    bounds: Vec<f64>,
    /// First flat index of each job's variables.
    offset: Vec<usize>,
    /// Windows available to each job are `0..windows[j]`.
    windows: Vec<usize>,
    /// Per window: (job, flat index).
    members: Vec<Vec<(usize, usize)>>,
    len: usize,
}

impl Layout {
    fn new(jobs: &[EnergyJob]) -> Self {
        let mut cuts: Vec<f64> = jobs.iter().map(|j| j.deadline).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut bounds = vec![0.0];
        bounds.extend(cuts);

        let mut offset = Vec::with_capacity(jobs.len());
        let mut windows = Vec::with_capacity(jobs.len());
        let mut members = vec![Vec::new(); bounds.len() - 1];
        let mut len = 0;
        for (j, job) in jobs.iter().enumerate() {
            let k = bounds.partition_point(|&b| b < job.deadline);
            offset.push(len);
            windows.push(k);
            for (t, m) in members.iter_mut().enumerate().take(k) {
                m.push((j, len + t));
            }
            len += k;
        }
        Layout {
            bounds,
            offset,
            windows,
            members,
            len,
        }
    }

    fn width(&self, t: usize) -> f64 {
        self.bounds[t + 1] - self.bounds[t]
    }

    fn vars<'a>(&self, j: usize, w: &'a [f64]) -> &'a [f64] {
        &w[self.offset[j]..self.offset[j] + self.windows[j]]
    }
}

struct Objective<'a> {
    layout: &'a Layout,
    m: usize,
    alpha: f64,
}

impl Objective<'_> {
    fn value(&self, w: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let mut total = 0.0;
        let mut works = Vec::new();
        let mut grad = grad;
        for (t, members) in self.layout.members.iter().enumerate() {
            works.clear();
            works.extend(members.iter().map(|&(_, i)| w[i]));
            let speeds = window_speeds(&works, self.m, self.layout.width(t));
            total += window_energy(&works, &speeds, self.alpha);
            if let Some(g) = grad.as_deref_mut() {
                for (&(_, i), s) in members.iter().zip(&speeds) {
                    g[i] = self.alpha * s.powf(self.alpha - 1.0);
                }
            }
        }
        total
    }

    /// `max over feasible v of <grad, w - v>`, an upper bound on `f(w) - f*`.
    fn fw_gap(&self, jobs: &[EnergyJob], w: &[f64], grad: &[f64]) -> f64 {
        (0..jobs.len())
            .map(|j| {
                let wj = self.layout.vars(j, w);
                let gj = self.layout.vars(j, grad);
                let low = gj.iter().copied().fold(f64::INFINITY, f64::min);
                wj.iter().zip(gj).map(|(x, g)| x * (g - low)).sum::<f64>()
            })
            .sum()
    }
}

/// Euclidean projection of `v` onto `{x ≥ 0, Σx = total}`.
pub(crate) fn project_simplex(v: &mut [f64], total: f64) {
    if v.len() == 1 {
        v[0] = total;
        return;
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - total) / (k + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter_mut().for_each(|x| *x = (*x - theta).max(0.0));
}

/// Minimum energy to finish every job by its deadline on `m` machines with
/// preemption and migration, to relative accuracy `cfg.tol`.
pub fn schedule_energy_general(
    jobs: &[EnergyJob],
    m: usize,
    alpha: f64,
    cfg: &OracleConfig,
) -> Result<MachineSchedule> {
    if m == 0 {
        return Err(Error::Argument("at least one machine is required".into()));
    }
    if !(cfg.tol > 0.0) {
        return Err(Error::Argument("tol must be positive".into()));
    }
    if let Some(j) = jobs
        .iter()
        .find(|j| !(j.deadline > 0.0) || !(j.volume > 0.0))
    {
        return Err(Error::Argument(format!(
            "job with deadline {} and volume {} cannot be scheduled",
            j.deadline, j.volume
        )));
    }
    if jobs.is_empty() {
        return Ok(MachineSchedule::empty(m));
    }

    let layout = Layout::new(jobs);
    let target = Objective {
        layout: &layout,
        m,
        alpha,
    };
    // the optimal works do not depend on alpha; at alpha = 2 the gradient is
    // piecewise linear with a known Lipschitz constant
    let quadratic = Objective {
        layout: &layout,
        m,
        alpha: 2.0,
    };
    let lipschitz = layout
        .members
        .iter()
        .enumerate()
        .map(|(t, mem)| 2.0 * (mem.len().saturating_sub(m) + 1) as f64 / layout.width(t))
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;

    // start with each job's volume spread evenly over its time span
    let mut w = vec![0.0; layout.len];
    for (j, job) in jobs.iter().enumerate() {
        for t in 0..layout.windows[j] {
            w[layout.offset[j] + t] = job.volume * layout.width(t) / job.deadline;
        }
    }

    let mut grad = vec![0.0; layout.len];
    let mut iterations = 0;
    loop {
        let f = target.value(&w, Some(&mut grad));
        let gap = target.fw_gap(jobs, &w, &grad);
        if gap <= cfg.tol * f {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                best: f,
                gap,
            });
        }
        iterations += 1;
        quadratic.value(&w, Some(&mut grad));
        for (j, job) in jobs.iter().enumerate() {
            let range = layout.offset[j]..layout.offset[j] + layout.windows[j];
            for i in range.clone() {
                w[i] -= step * grad[i];
            }
            project_simplex(&mut w[range], job.volume);
        }
    }

    Ok(realize(jobs, &layout, &w, m, alpha))
}

/// Places the optimal works window by window with McNaughton's rule.
fn realize(
    jobs: &[EnergyJob],
    layout: &Layout,
    w: &[f64],
    m: usize,
    alpha: f64,
) -> MachineSchedule {
    let mut out = MachineSchedule::empty(m);
    let mut works = Vec::new();
    let mut pieces = Vec::new();
    for (t, members) in layout.members.iter().enumerate() {
        let len = layout.width(t);
        works.clear();
        works.extend(members.iter().map(|&(_, i)| w[i]));
        let speeds = window_speeds(&works, m, len);
        pieces.clear();
        for ((&(j, _), &work), &speed) in members.iter().zip(&works).zip(&speeds) {
            if work > 1e-13 * jobs[j].volume && speed > 0.0 {
                pieces.push(Piece {
                    job: j,
                    duration: (work / speed).min(len),
                    speed,
                });
            }
        }
        wrap_around(&pieces, m, layout.bounds[t], len, alpha, &mut out);
    }
    out
}
