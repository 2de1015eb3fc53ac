use std::fs;
use std::path::Path;

use anyhow::Context;
use dosefind_core::rules::DoseOutcome;
use dosefind_core::sim::report::{results_csv, scenario_block, sweep_csv, sweep_table};
use dosefind_core::sim::{
    builtin_for_target, builtin_scenarios, builtin_selector, run_simulation_with,
    scenarios_from_toml, scenarios_to_toml, sensitivity_sweep, CohortSize,
    OperatingCharacteristics, Scenario, SimConfig, SweepAxis,
};
use dosefind_core::table::DecisionTable;
use dosefind_core::{DesignRegistry, DesignSpec, TrialState};
use dosefind_service::ServiceConfig;

use crate::{
    Axis, Command, CompareArgs, NextArgs, ReportFormat, RunArgs, ScenarioArgs, ServeArgs, SimArgs,
    SweepArgs, TableArgs, TableFormat,
};

pub enum Failure {
    /// Bad flags or parameters: exit code 2.
    Usage(String),
    /// Anything that fails after the inputs were accepted: exit code 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

pub fn run(cmd: Command) -> Outcome {
    match cmd {
        Command::Table(a) => table(a),
        Command::Next(a) => next(a),
        Command::Simulate(a) => simulate(a),
        Command::Compare(a) => compare(a),
        Command::Scenarios(a) => scenarios(a),
        Command::Sweep(a) => sweep(a),
        Command::Serve(a) => serve(a),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn table(a: TableArgs) -> Outcome {
    let registry = DesignRegistry::standard();
    let name = registry.resolve(&a.design).map_err(usage)?;
    let iv = &a.interval;
    let spec = DesignSpec::new(name, iv.pt, iv.eps_lo, iv.eps_hi, a.n_doses);
    let t = DecisionTable::build_with(&registry, &spec, a.max_n).map_err(usage)?;
    let text = match a.format {
        TableFormat::Grid => t.to_grid(),
        TableFormat::Csv => t.to_csv(),
        TableFormat::Json => serde_json::to_string_pretty(&t).map_err(anyhow::Error::from)? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn read_history(path: &Path, n_doses: usize) -> anyhow::Result<Vec<(usize, DoseOutcome)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .with_context(|| format!("{}: missing column `{name}`", path.display()))
    };
    let (cd, cn, cx) = (col("dose")?, col("n")?, col("x")?);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let field = |c: usize| -> anyhow::Result<u32> {
            rec.get(c)
                .unwrap_or("")
                .parse()
                .with_context(|| format!("{} row {}: not a count", path.display(), i + 1))
        };
        let dose = field(cd)? as usize;
        anyhow::ensure!(
            (1..=n_doses).contains(&dose),
            "{} row {}: dose {dose} outside 1..={n_doses}",
            path.display(),
            i + 1
        );
        let outcome = DoseOutcome::new(field(cn)?, field(cx)?)
            .with_context(|| format!("{} row {}", path.display(), i + 1))?;
        rows.push((dose, outcome));
    }
    Ok(rows)
}

fn next(a: NextArgs) -> Outcome {
    if a.x > a.n {
        return Err(usage(format!("--x {} exceeds --n {}", a.x, a.n)));
    }
    if a.n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    if a.dose == 0 || a.dose > a.n_doses {
        return Err(usage(format!("--dose must lie in 1..={}", a.n_doses)));
    }
    let iv = &a.interval;
    let spec = DesignSpec::new(&a.design, iv.pt, iv.eps_lo, iv.eps_hi, a.n_doses);
    let design = DesignRegistry::standard().build(&spec).map_err(usage)?;
    let mut outcomes = vec![DoseOutcome::default(); a.n_doses];
    let current = DoseOutcome::new(a.n, a.x).map_err(usage)?;
    if let Some(path) = &a.history_file {
        for (dose, o) in read_history(path, a.n_doses)? {
            if dose == a.dose && o != current {
                return Err(Failure::Runtime(anyhow::anyhow!(
                    "{}: dose {dose} has {}/{}, but --x/--n give {}/{}",
                    path.display(),
                    o.n_dlt,
                    o.n_treated,
                    a.x,
                    a.n
                )));
            }
            outcomes[dose - 1] = outcomes[dose - 1].add(o);
        }
    }
    outcomes[a.dose - 1] = current;
    let state = TrialState::from_history(outcomes, a.dose).map_err(usage)?;
    let step = design.decide(&state, None).map_err(usage)?;
    println!("{}", step.decision);
    Ok(())
}

fn load_scenarios(sel: &str) -> Outcome<Vec<Scenario>> {
    if let Some(rest) = sel.strip_prefix("builtin:") {
        if let Some(v) = builtin_selector(sel) {
            return Ok(v);
        }
        if let Some(s) = builtin_scenarios().into_iter().find(|s| s.id == rest) {
            return Ok(vec![s]);
        }
        return Err(usage(format!(
            "unknown scenario selector `{sel}`; use builtin:all, builtin:pt0.1, builtin:pt0.17, builtin:pt0.3 or builtin:1 to builtin:42"
        )));
    }
    let text = fs::read_to_string(sel).with_context(|| format!("reading {sel}"))?;
    let v = scenarios_from_toml(&text).map_err(anyhow::Error::from)?;
    if v.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("{sel}: no scenarios")));
    }
    Ok(v)
}

fn parse_cohort(s: &str) -> Outcome<CohortSize> {
    if s.eq_ignore_ascii_case("random") {
        return Ok(CohortSize::Random { min: 2, max: 5 });
    }
    s.parse()
        .map(CohortSize::Fixed)
        .map_err(|_| usage(format!("--cohort-size must be a count or `random`, got `{s}`")))
}

fn config_for(design: &str, s: &Scenario, run: &RunArgs, cohort: CohortSize) -> SimConfig {
    SimConfig {
        design: DesignSpec::new(design, s.p_target, run.eps_lo, run.eps_hi, s.n_doses()),
        max_patients: run.max_patients,
        cohort,
        n_trials: run.n_trials,
        seed: run.seed,
        consecutive_stop: run.consecutive_stop,
        truncate_final_cohort: run.truncate_final_cohort,
    }
}

/// Runs every design on every scenario, grouped by scenario.
fn run_grid(designs: &[String], run: &RunArgs) -> Outcome<Vec<Vec<OperatingCharacteristics>>> {
    let registry = DesignRegistry::standard();
    let names: Vec<&str> = designs
        .iter()
        .map(|d| registry.resolve(d).map_err(usage))
        .collect::<Outcome<_>>()?;
    if names.is_empty() {
        return Err(usage("no designs given"));
    }
    let cohort = parse_cohort(&run.cohort_size)?;
    let scenarios = load_scenarios(&run.scenarios)?;
    // reject bad parameters before any simulation starts
    for s in &scenarios {
        for name in &names {
            let cfg = config_for(name, s, run, cohort);
            cfg.validate().map_err(usage)?;
            registry.build(&cfg.design).map_err(usage)?;
        }
    }
    scenarios
        .iter()
        .map(|s| {
            names
                .iter()
                .map(|name| {
                    run_simulation_with(&registry, s, &config_for(name, s, run, cohort))
                        .with_context(|| format!("scenario {} with {name}", s.id))
                        .map_err(Failure::from)
                })
                .collect()
        })
        .collect()
}

fn report(groups: &[Vec<OperatingCharacteristics>], run: &RunArgs) -> Outcome {
    let text = match run.format {
        ReportFormat::Text => groups
            .iter()
            .map(|g| scenario_block(g))
            .collect::<Vec<_>>()
            .join("\n"),
        ReportFormat::Csv => results_csv(&groups.concat()),
        ReportFormat::Json => {
            serde_json::to_string_pretty(&groups.concat()).map_err(anyhow::Error::from)? + "\n"
        }
    };
    emit(run.out.as_deref(), &text)
}

fn simulate(a: SimArgs) -> Outcome {
    let groups = run_grid(std::slice::from_ref(&a.design), &a.run)?;
    report(&groups, &a.run)
}

fn compare(a: CompareArgs) -> Outcome {
    let groups = run_grid(&a.designs, &a.run)?;
    report(&groups, &a.run)
}

fn scenarios(a: ScenarioArgs) -> Outcome {
    let v = load_scenarios(&a.select)?;
    emit(a.out.as_deref(), &scenarios_to_toml(&v))
}

fn sweep(a: SweepArgs) -> Outcome {
    let scenarios = match &a.scenarios {
        Some(sel) => load_scenarios(sel)?,
        None => builtin_for_target(a.pt),
    };
    if scenarios.is_empty() {
        return Err(usage(format!("no built-in scenarios at target {}", a.pt)));
    }
    if let Some(s) = scenarios.iter().find(|s| (s.p_target - a.pt).abs() > 1e-12) {
        return Err(usage(format!("scenario {} has target {}, not {}", s.id, s.p_target, a.pt)));
    }
    let eps = a.eps.unwrap_or(0.2 * a.pt);
    let mut base = SimConfig::new(DesignSpec::new(&a.design, a.pt, eps, eps, scenarios[0].n_doses()));
    base.n_trials = a.n_trials;
    base.seed = a.seed;
    base.validate().map_err(usage)?;
    DesignRegistry::standard().build(&base.design).map_err(usage)?;
    let axis = match a.axis {
        Axis::Ei => SweepAxis::EiWidth,
        Axis::Cohort => SweepAxis::CohortSize,
    };
    let rows = sensitivity_sweep(axis, &base, &scenarios).map_err(anyhow::Error::from)?;
    let text = match a.format {
        ReportFormat::Text => sweep_table(&rows),
        ReportFormat::Csv => sweep_csv(&rows),
        ReportFormat::Json => serde_json::to_string_pretty(&rows).map_err(anyhow::Error::from)? + "\n",
    };
    emit(a.out.as_deref(), &text)
}

fn serve(a: ServeArgs) -> Outcome {
    let mut cfg = ServiceConfig::from_env().map_err(usage)?;
    if let Some(dir) = a.data_dir {
        cfg.data_dir = dir;
    }
    if let Some(bind) = a.bind {
        cfg.bind = bind;
    }
    match a.workers {
        Some(0) => return Err(usage("--workers must be at least 1")),
        Some(w) => cfg.workers = w,
        None => {}
    }
    tracing_subscriber::fmt().with_writer(std::io::stderr).init();
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(dosefind_service::serve(cfg))
        .map_err(|e| Failure::Runtime(e.into()))
}
