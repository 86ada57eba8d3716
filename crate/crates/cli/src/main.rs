// negated float comparisons are how NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use alliance_core::generate::{random_instance, Deadlines, GenParams};
use alliance_core::instance::{parse_instance, serialize_instance};
use alliance_core::report::{Parameters, Payload, Report, SchedulePayload, ValueTable};
use alliance_core::stability::stability_report;
use alliance_core::{
    coalition_cost, Coalition, Error, GameCache, GameConfig, Instance, Objective, OracleConfig,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

/// Detect stable scheduling alliances between organizations.
///
/// Reports are written to standard output as JSON, a short summary to
/// standard error.
#[derive(Parser, Debug)]
#[command(name = "alliance", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether a coalition can form a stable alliance
    Analyze(GameArgs),
    /// Print p(C), Cost(C) and v(C) for a coalition
    Value(GameArgs),
    /// Print the optimal schedule of a coalition
    Schedule(GameArgs),
    /// Check a payoff vector for objections and violated conditions
    Verify(VerifyArgs),
    /// Write a seeded random instance to standard output
    Random(RandomArgs),
}

#[derive(Args, Debug)]
struct GameArgs {
    /// Instance file (JSON)
    instance: PathBuf,
    /// Comma-separated organization ids (defaults to all)
    #[arg(long)]
    coalition: Option<String>,
    /// Replace the instance's alpha
    #[arg(long = "alpha-override")]
    alpha_override: Option<f64>,
    /// Relative accuracy of the iterative energy solver
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Absolute tolerance for equality tests between values
    #[arg(long = "eq-tol")]
    eq_tol: Option<f64>,
    /// Forbid migration on common-deadline energy instances
    #[arg(long = "no-migration")]
    no_migration: bool,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Payoffs, one per coalition member in instance order (or one per organization)
    #[arg(long, allow_hyphen_values = true)]
    imputation: String,
    /// Margin that realizes strict inequalities in the objection search
    #[arg(long, default_value_t = 1e-3)]
    epsilon: f64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ObjectiveArg {
    SumCompletion,
    SumEnergy,
}

#[derive(Args, Debug)]
struct RandomArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = ObjectiveArg::SumEnergy)]
    objective: ObjectiveArg,
    /// Number of organizations
    #[arg(long, default_value_t = 4)]
    orgs: usize,
    #[arg(long = "max-machines", default_value_t = 2)]
    max_machines: usize,
    #[arg(long = "max-jobs", default_value_t = 6)]
    max_jobs: usize,
    #[arg(long, default_value_t = 2.0)]
    alpha: f64,
    /// Draw deadlines from {0.5, 1, ..., max} instead of a common deadline 1
    #[arg(long = "max-deadline")]
    max_deadline: Option<f64>,
}

struct Loaded {
    inst: Instance,
    coalition: Coalition,
    cfg: GameConfig,
    params: Parameters,
}

fn load(args: &GameArgs) -> anyhow::Result<Loaded> {
    let text = fs::read_to_string(&args.instance)
        .with_context(|| format!("cannot read {}", args.instance.display()))?;
    let mut inst = parse_instance(&text)?;
    if let Some(alpha) = args.alpha_override {
        inst = inst.with_alpha(alpha)?;
    }
    let coalition = match &args.coalition {
        Some(ids) => inst.coalition_from_ids(ids)?,
        None => inst.grand_coalition(),
    };
    if !(args.tol > 0.0) {
        bail!("--tol must be positive");
    }
    if args.eq_tol.is_some_and(|t| !(t >= 0.0)) {
        bail!("--eq-tol must be nonnegative");
    }
    let cfg = GameConfig {
        oracle: OracleConfig {
            tol: args.tol,
            no_migration: args.no_migration,
            ..OracleConfig::default()
        },
        eq_tol: args.eq_tol,
    };
    let params = Parameters {
        tol: args.tol,
        eq_tol: args.eq_tol,
        epsilon: None,
        no_migration: args.no_migration,
    };
    Ok(Loaded {
        inst,
        coalition,
        cfg,
        params,
    })
}

fn ids(inst: &Instance, c: Coalition) -> String {
    format!("{{{}}}", inst.ids(c).join(","))
}

/// Spreads a payoff list over all organizations. A list as long as the
/// coalition is read in member order; a list of length N is taken as is.
fn payoff_vector(inst: &Instance, s: Coalition, list: &str) -> anyhow::Result<Vec<f64>> {
    let values = list
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .with_context(|| format!("bad payoff {v:?}"))
        })
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let n = inst.org_count();
    if values.len() == s.len() {
        let mut x = vec![0.0; n];
        for (k, v) in s.members().zip(values) {
            x[k] = v;
        }
        Ok(x)
    } else if values.len() == n {
        Ok(values)
    } else if s.len() == n {
        bail!("imputation has {} entries, expected {n}", values.len())
    } else {
        bail!(
            "imputation has {} entries, expected {} (coalition) or {n} (organizations)",
            values.len(),
            s.len()
        )
    }
}

fn emit(report: &Report) {
    println!("{}", report.to_json());
}

fn analyze(args: &GameArgs) -> anyhow::Result<u8> {
    let Loaded {
        inst,
        coalition,
        cfg,
        params,
    } = load(args)?;
    let g = GameCache::new(&inst, cfg);
    let r = g.detect_alliance(coalition)?;
    eprintln!(
        "coalition {}: v = {}, pivotal {}",
        ids(&inst, coalition),
        r.grand_value,
        ids(&inst, r.pivotal)
    );
    match &r.imputation {
        Some(x) => {
            let shown: Vec<String> = coalition
                .members()
                .map(|k| format!("{}={}", inst.organizations[k].id, x[k]))
                .collect();
            eprintln!("payments {}", shown.join(" "));
        }
        None => eprintln!("p(A) < Cost(A): no payments"),
    }
    eprintln!("{}", if r.feasible { "feasible" } else { "infeasible" });
    let code = if r.feasible { 0 } else { EXIT_VIOLATION };
    emit(&Report::new("analyze", &inst, params, Payload::Alliance(r)));
    Ok(code)
}

fn value(args: &GameArgs) -> anyhow::Result<u8> {
    let Loaded {
        inst,
        coalition,
        cfg,
        params,
    } = load(args)?;
    let g = GameCache::new(&inst, cfg);
    let v = g.entry(coalition)?;
    eprintln!(
        "coalition {}: p = {}, Cost = {}, v = {}",
        ids(&inst, coalition),
        v.price,
        v.cost,
        v.value
    );
    let table = ValueTable {
        coalition,
        ids: inst.ids(coalition),
        value: v,
    };
    emit(&Report::new("value", &inst, params, Payload::Value(table)));
    Ok(0)
}

fn schedule(args: &GameArgs) -> anyhow::Result<u8> {
    let Loaded {
        inst,
        coalition,
        cfg,
        params,
    } = load(args)?;
    let outcome = coalition_cost(&inst, coalition, &cfg.oracle)?;
    eprintln!(
        "coalition {}: cost {} by {:?}, {} pieces",
        ids(&inst, coalition),
        outcome.total_cost,
        outcome.method,
        outcome.placement.len()
    );
    let payload = SchedulePayload {
        coalition,
        ids: inst.ids(coalition),
        outcome,
    };
    emit(&Report::new(
        "schedule",
        &inst,
        params,
        Payload::Schedule(payload),
    ));
    Ok(0)
}

fn verify(args: &VerifyArgs) -> anyhow::Result<u8> {
    let Loaded {
        inst,
        coalition,
        cfg,
        mut params,
    } = load(&args.game)?;
    let x = payoff_vector(&inst, coalition, &args.imputation)?;
    if !(args.epsilon > 0.0) {
        bail!("--epsilon must be positive");
    }
    params.epsilon = Some(args.epsilon);
    let g = GameCache::new(&inst, cfg);
    let r = stability_report(&g, coalition, &x, args.epsilon)?;
    eprintln!(
        "coalition {}: lemma1 {}, condition3 {}, rational {}, budget {}",
        ids(&inst, coalition),
        r.lemma1_ok,
        r.condition3_ok,
        r.individually_rational,
        r.budget_ok
    );
    for (a, row) in r.lemma2_matrix.iter().enumerate() {
        for (b, cell) in row.iter().enumerate() {
            if *cell == Some(false) {
                let (i, j) = (r.members[a], r.members[b]);
                eprintln!(
                    "pairwise bound fails for i={} j={}",
                    inst.organizations[i].id, inst.organizations[j].id
                );
            }
        }
    }
    match &r.justified_objection {
        Some(o) => eprintln!(
            "justified objection of {} against {} through {}",
            inst.organizations[o.objector].id,
            inst.organizations[o.target].id,
            ids(&inst, o.coalition)
        ),
        None => eprintln!("no justified objection at epsilon {}", args.epsilon),
    }
    let code = if r.has_violation() { EXIT_VIOLATION } else { 0 };
    emit(&Report::new("verify", &inst, params, Payload::Stability(r)));
    Ok(code)
}

fn random(args: &RandomArgs) -> anyhow::Result<u8> {
    if args.orgs == 0 || args.orgs > 64 || args.max_machines == 0 {
        bail!("need 1 to 64 organizations and at least one machine");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let params = GenParams {
        objective: match args.objective {
            ObjectiveArg::SumCompletion => Objective::SumCompletion,
            ObjectiveArg::SumEnergy => Objective::SumEnergy,
        },
        alpha: args.alpha,
        orgs: (args.orgs, args.orgs),
        machines: (1, args.max_machines),
        jobs: (0, args.max_jobs),
        deadlines: match args.max_deadline {
            Some(max) => Deadlines::HalfSteps { max },
            None => Deadlines::Common(1.0),
        },
        ..GenParams::default()
    };
    let inst = random_instance(&mut rng, &params);
    let violations = alliance_core::instance::validate_instance(&inst);
    if !violations.is_empty() {
        return Err(Error::Invalid(violations).into());
    }
    println!("{}", serialize_instance(&inst));
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::NoConvergence { .. } | Error::Lp(_)) => EXIT_SOLVER,
        _ => EXIT_FAILURE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_FAILURE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Value(a) => value(a),
        Command::Schedule(a) => schedule(a),
        Command::Verify(a) => verify(a),
        Command::Random(a) => random(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alliance_core::{Job, Organization};

    fn three() -> Instance {
        Instance {
            objective: Objective::SumCompletion,
            alpha: None,
            organizations: ["A", "B", "C"]
                .iter()
                .map(|id| Organization {
                    id: id.to_string(),
                    machines: 1,
                    jobs: vec![Job::with_proc_time(1.0)],
                })
                .collect(),
        }
    }

    #[test]
    fn payoffs_follow_coalition_members() {
        let inst = three();
        let s = inst.coalition_from_ids("A,C").unwrap();
        assert_eq!(
            payoff_vector(&inst, s, "1, 2").unwrap(),
            vec![1.0, 0.0, 2.0]
        );
        assert_eq!(
            payoff_vector(&inst, s, "1,2,3").unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert_eq!(
            payoff_vector(&inst, s, "-1,2").unwrap(),
            vec![-1.0, 0.0, 2.0]
        );
        assert!(payoff_vector(&inst, s, "1").is_err());
        assert!(payoff_vector(&inst, s, "1,x").is_err());
    }

    #[test]
    fn solver_failures_exit_2() {
        let e: anyhow::Error = Error::NoConvergence {
            iterations: 1,
            best: 1.0,
            gap: 1.0,
        }
        .into();
        assert_eq!(exit_code(&e), EXIT_SOLVER);
        assert_eq!(exit_code(&Error::Lp("x".into()).into()), EXIT_SOLVER);
        assert_eq!(
            exit_code(&Error::UnknownOrganization("Z".into()).into()),
            EXIT_FAILURE
        );
        assert_eq!(exit_code(&anyhow::anyhow!("io")), EXIT_FAILURE);
    }
}
