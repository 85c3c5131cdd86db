use std::collections::HashMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use reachcare::assignment::{
    build_lp, solve_assignment_with, write_assignment_csv, write_relaxations_csv, AssignmentOptions, Backend,
};
use reachcare::lp::write_lp_text;
use reachcare::metrics::{compute_all, summarize, write_measures_csv, write_measures_geojson, Scope};
use reachcare::model::{
    generate_synthetic_world, load_params, load_scenario, write_hospitals, write_scenario, CoverageMode, Profile,
    ScenarioInstance, SystemParameters,
};
use reachcare::policy::{
    monte_carlo, pareto_filter, parse_grid, run_sweep_with, write_monte_carlo_csv, write_pareto_csv,
    write_sweep_csv, ParetoCandidate, TransformKind,
};
use reachcare::spatial::CovariateSurface;
use reachcare::svcm::{
    attach_bands, difference_test, evaluate_models, fit_svcm, location_test, significance_map,
    write_coefficients_csv, write_fit_json, write_significance_geojson, BasisKind, BasisSpec, EvaluateOptions,
    InferenceOptions, Sign, SignificanceMap, SvcmOptions,
};
use serde_json::{json, Value};

use crate::args::{
    BackendArg, Format, InferArgs, MonteCarloArgs, ReportArgs, ScenarioArgs, SolveArgs, SweepArgs, SynthArgs,
    TestKind,
};
use crate::error::CliError;
use crate::manifest::{check, DigestStatus, Manifest};

fn out_dir(dir: &Path) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir.to_path_buf())
}

fn parameters(a: &ScenarioArgs, m: &mut Manifest) -> Result<SystemParameters, CliError> {
    let mut p = match &a.params {
        Some(path) => {
            m.input(path)?;
            load_params(path)?
        }
        None => SystemParameters::default(),
    };
    if let Some(v) = a.mi_max {
        p.mi_max = v;
    }
    if let Some(v) = a.mi_max_limited {
        p.mi_max_limited = v;
    }
    if let Some(v) = a.pc {
        p.pc = v;
    }
    if let Some(v) = a.lc {
        p.lc = v;
    }
    if let Some(v) = a.cc {
        p.cc = v;
    }
    if let Some(c) = &a.coverage {
        p.coverage = c.parse::<CoverageMode>().map_err(|e| CliError::input(format!("--coverage: {e}")))?;
    }
    p.validate()?;
    Ok(p)
}

fn scenario_file(a: &ScenarioArgs, explicit: &Option<PathBuf>, name: &str) -> Result<PathBuf, CliError> {
    match (explicit, &a.scenario) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(dir)) => Ok(dir.join(name)),
        (None, None) => Err(CliError::input(format!("{name}: pass --scenario DIR or the file itself"))),
    }
}

fn load(a: &ScenarioArgs, m: &mut Manifest) -> Result<ScenarioInstance, CliError> {
    let params = parameters(a, m)?;
    let tracts = scenario_file(a, &a.tracts, "tracts.csv")?;
    let physicians = scenario_file(a, &a.physicians, "physicians.csv")?;
    let distances = match (&a.distances, &a.scenario) {
        (Some(p), _) => Some(p.clone()),
        (None, Some(dir)) if !a.great_circle && dir.join("distances.csv").exists() => Some(dir.join("distances.csv")),
        _ => None,
    };
    let s = load_scenario(&tracts, &physicians, distances.as_deref(), params)?;
    m.input(&tracts)?;
    m.input(&physicians)?;
    if let Some(d) = &distances {
        m.input(d)?;
    }
    m.parameters = Some(serde_json::to_value(s.params)?);
    if let Some(seed) = a.arc_order_seed {
        m.seeds.insert("arc_order".into(), seed);
    }
    Ok(s)
}

fn options(a: &ScenarioArgs) -> AssignmentOptions {
    AssignmentOptions {
        backend: match a.backend {
            BackendArg::Network => Backend::Network,
            BackendArg::Simplex => Backend::Simplex,
        },
        arc_order_seed: a.arc_order_seed,
        audit: true,
    }
}

fn state_summary(s: &ScenarioInstance, sol: &reachcare::assignment::AssignmentSolution) -> Result<Value, CliError> {
    let all = compute_all(s, sol)?;
    let mut out = serde_json::Map::new();
    for m in &all {
        let st = summarize(m);
        out.insert(
            m.scope.as_str().into(),
            json!({"coverage": st.coverage, "travel_cost": st.travel_cost, "congestion": st.congestion}),
        );
    }
    Ok(Value::Object(out))
}

pub fn synth(a: &SynthArgs, command: Value) -> Result<(), CliError> {
    let dir = out_dir(&a.common.out)?;
    let profile: Profile = a.profile.parse().map_err(CliError::Input)?;
    let n_phys = a.physicians.unwrap_or((a.tracts * 5).div_ceil(4));
    let world = generate_synthetic_world(a.seed, a.tracts, n_phys, profile)?;
    write_scenario(&world.scenario, &dir)?;
    write_hospitals(&world.hospitals, &dir.join("hospitals.csv"))?;
    let params = toml::to_string(&ParamsToml::from(world.scenario.params))
        .map_err(|e| CliError::input(e.to_string()))?;
    std::fs::write(dir.join("params.toml"), params)?;

    let mut m = Manifest::new(command);
    m.seeds.insert("synth".into(), a.seed);
    m.parameters = Some(serde_json::to_value(world.scenario.params)?);
    for f in ["tracts.csv", "physicians.csv", "distances.csv", "hospitals.csv", "params.toml"] {
        m.output(&dir, f)?;
    }
    m.summary = json!({
        "tracts": world.scenario.tracts.len(),
        "physicians": world.scenario.physicians.len(),
        "arcs": world.scenario.distances.len(),
        "hospitals": world.hospitals.len(),
        "tracts_without_arcs": world.scenario.zero_arc_tracts().len(),
    });
    m.write(&dir)?;
    Ok(())
}

/// Parameter file layout read back by `--params`.
#[derive(serde::Serialize)]
struct ParamsToml {
    mi_max: f64,
    mi_max_limited: f64,
    pc: f64,
    lc: f64,
    cc: f64,
    coverage: String,
}

impl From<SystemParameters> for ParamsToml {
    fn from(p: SystemParameters) -> Self {
        Self {
            mi_max: p.mi_max,
            mi_max_limited: p.mi_max_limited,
            pc: p.pc,
            lc: p.lc,
            cc: p.cc,
            coverage: p.coverage.to_string(),
        }
    }
}

pub fn solve(a: &SolveArgs, command: Value) -> Result<(), CliError> {
    let dir = out_dir(&a.common.out)?;
    let mut m = Manifest::new(command);
    let s = load(&a.scenario, &mut m)?;
    let sol = match solve_assignment_with(&s, &options(&a.scenario)) {
        Ok(sol) => sol,
        Err(e) => {
            let err = CliError::from(e);
            if let CliError::Infeasible(msg) = &err {
                m.summary = json!({"status": "infeasible", "message": msg});
                m.write(&dir)?;
            }
            return Err(err);
        }
    };
    write_assignment_csv(&s, &sol, &dir.join("assignment.csv"))?;
    write_relaxations_csv(&s, &sol, &dir.join("relaxations.csv"))?;
    let all = compute_all(&s, &sol)?;
    write_measures_csv(&s, &all, &dir.join("measures.csv"))?;
    write_measures_geojson(&s, &all, &dir.join("measures.geojson"))?;
    for f in ["assignment.csv", "relaxations.csv", "measures.csv", "measures.geojson"] {
        m.output(&dir, f)?;
    }
    if let Some(path) = &a.dump_lp {
        // the phase-two program: coverage held at what phase one achieved
        let mut lp = build_lp(&s);
        lp.lp.set_rhs(lp.coverage_row, sol.assigned_medicaid + sol.assigned_other);
        let f = File::create(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        write_lp_text(&lp.lp, BufWriter::new(f))?;
        m.output_path(path)?;
    }
    m.summary = json!({
        "status": "optimal",
        "achieved_coverage_fraction": sol.achieved_coverage_fraction,
        "total_distance": sol.total_distance,
        "objective": sol.objective,
        "relaxed_physicians": sol.relaxation_report.len(),
        "unserved_tracts": sol.unserved_tracts.len(),
        "state": state_summary(&s, &sol)?,
    });
    m.write(&dir)?;
    Ok(())
}

pub fn sweep(a: &SweepArgs, command: Value) -> Result<(), CliError> {
    let dir = out_dir(&a.common.out)?;
    let mut m = Manifest::new(command);
    let kinds = a
        .kind
        .iter()
        .map(|k| k.parse::<TransformKind>().map_err(CliError::Input))
        .collect::<Result<Vec<_>, _>>()?;
    let custom = a.grid.as_deref().map(parse_grid).transpose()?;
    let s = load(&a.scenario, &mut m)?;
    let opts = options(&a.scenario);
    let results = kinds
        .iter()
        .map(|&k| {
            let grid = custom.clone().unwrap_or_else(|| k.default_grid());
            run_sweep_with(&s, k, &grid, &opts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_sweep_csv(&results, &dir.join("sweep.csv"))?;
    let candidates: Vec<ParetoCandidate> = results
        .iter()
        .flat_map(|r| {
            r.points
                .iter()
                .map(move |p| ParetoCandidate::from_sweep_point(format!("{}={}", r.kind, p.lambda), p))
        })
        .collect();
    let retained = pareto_filter(&candidates, a.epsilon);
    write_pareto_csv(&candidates, &retained, &dir.join("pareto.csv"))?;
    m.output(&dir, "sweep.csv")?;
    m.output(&dir, "pareto.csv")?;
    m.summary = json!({
        "points": candidates.len(),
        "pareto": retained.iter().map(|&k| candidates[k].label.clone()).collect::<Vec<_>>(),
    });
    m.write(&dir)?;
    Ok(())
}

pub fn montecarlo(a: &MonteCarloArgs, command: Value) -> Result<(), CliError> {
    let dir = out_dir(&a.common.out)?;
    let mut m = Manifest::new(command);
    let s = load(&a.scenario, &mut m)?;
    m.seeds.insert("montecarlo".into(), a.seed);
    let summary = monte_carlo(&s, a.draws, a.seed, &options(&a.scenario))?;
    write_monte_carlo_csv(&s, &summary, &dir.join("montecarlo.csv"))?;
    let mut state = serde_json::Map::new();
    for st in &summary.scopes {
        state.insert(
            st.scope.as_str().into(),
            json!({
                "coverage_mean": st.state_coverage_mean(),
                "coverage_se": st.state_coverage_se(),
                "coverage": st.state_coverage,
                "travel_cost": st.state_travel_cost,
                "congestion": st.state_congestion,
            }),
        );
    }
    let doc = json!({"draws": summary.n_draws, "seed": summary.seed, "state": state});
    std::fs::write(dir.join("montecarlo_summary.json"), serde_json::to_string_pretty(&doc)?)?;
    m.output(&dir, "montecarlo.csv")?;
    m.output(&dir, "montecarlo_summary.json")?;
    m.summary = json!({
        "draws": summary.n_draws,
        "medicaid_coverage_mean": summary.scope(Scope::Medicaid).state_coverage_mean(),
        "medicaid_coverage_se": summary.scope(Scope::Medicaid).state_coverage_se(),
    });
    m.write(&dir)?;
    Ok(())
}

/// Per-tract values of `<measure>_<scope>`, NaN where not applicable.
struct MeasureTable {
    by_scope: HashMap<Scope, [Vec<f64>; 3]>,
    population: HashMap<Scope, Vec<f64>>,
}

impl MeasureTable {
    fn from_solve(s: &ScenarioInstance, a: &ScenarioArgs) -> Result<Self, CliError> {
        let sol = solve_assignment_with(s, &options(a))?;
        let all = compute_all(s, &sol)?;
        Ok(Self {
            by_scope: all.iter().map(|m| (m.scope, [m.coverage(), m.travel_cost(), m.congestion()])).collect(),
            population: Self::populations(s),
        })
    }

    fn from_csv(s: &ScenarioInstance, path: &Path) -> Result<Self, CliError> {
        let file = path.display().to_string();
        let row_of: HashMap<i64, usize> = s.tracts.iter().map(|t| (t.external_id, t.index)).collect();
        let n = s.tracts.len();
        let mut by_scope: HashMap<Scope, [Vec<f64>; 3]> = Scope::ALL
            .iter()
            .map(|&sc| (sc, [vec![f64::NAN; n], vec![f64::NAN; n], vec![f64::NAN; n]]))
            .collect();
        let mut rdr = csv::Reader::from_path(path).map_err(|e| CliError::input(format!("{file}: {e}")))?;
        for (k, rec) in rdr.records().enumerate() {
            let line = k + 2;
            let rec = rec.map_err(|e| CliError::input(format!("{file}: {e}")))?;
            let bad = |what: &str| CliError::input(format!("{file}: line {line}: {what}"));
            if rec.len() != 5 {
                return Err(bad("expected tract_id,scope,coverage,travel_cost,congestion"));
            }
            let id: i64 = rec[0].trim().parse().map_err(|_| bad("bad tract_id"))?;
            let i = *row_of.get(&id).ok_or_else(|| bad("tract not in scenario"))?;
            let scope = Scope::ALL
                .into_iter()
                .find(|sc| sc.as_str() == rec[1].trim())
                .ok_or_else(|| bad("unknown scope"))?;
            let slot = by_scope.get_mut(&scope).expect("all scopes present");
            for c in 0..3 {
                let raw = rec[2 + c].trim();
                slot[c][i] = if raw == "NA" {
                    f64::NAN
                } else {
                    raw.parse().map_err(|_| bad("bad number"))?
                };
            }
        }
        Ok(Self {
            by_scope,
            population: Self::populations(s),
        })
    }

    fn populations(s: &ScenarioInstance) -> HashMap<Scope, Vec<f64>> {
        Scope::ALL
            .iter()
            .map(|&sc| (sc, s.tracts.iter().map(|t| sc.population(t)).collect()))
            .collect()
    }

    fn parse(name: &str) -> Result<(usize, Scope), CliError> {
        let bad = || CliError::input(format!("measure `{name}`: expected <coverage|tc|cg>_<medicaid|other|overall>"));
        let (measure, scope) = name.rsplit_once('_').ok_or_else(bad)?;
        let k = match measure {
            "coverage" | "cov" => 0,
            "tc" | "travel_cost" => 1,
            "cg" | "congestion" => 2,
            _ => return Err(bad()),
        };
        let scope = Scope::ALL.into_iter().find(|s| s.as_str() == scope).ok_or_else(bad)?;
        Ok((k, scope))
    }

    fn get(&self, name: &str) -> Result<(Vec<f64>, &[f64]), CliError> {
        let (k, scope) = Self::parse(name)?;
        Ok((self.by_scope[&scope][k].clone(), &self.population[&scope]))
    }
}

fn covariate(s: &ScenarioInstance, name: &str) -> Result<CovariateSurface, CliError> {
    if !s.tracts.iter().any(|t| t.covariates.contains_key(name)) {
        return Err(CliError::input(format!("no tract carries covariate `{name}`")));
    }
    let values = s
        .tracts
        .iter()
        .map(|t| t.covariates.get(name).copied().unwrap_or(f64::NAN))
        .collect();
    Ok(CovariateSurface::new(name, values))
}

fn map_summary(map: &SignificanceMap) -> Value {
    json!({
        "positive": map.count(Sign::Positive),
        "negative": map.count(Sign::Negative),
        "none": map.count(Sign::None),
        "shape": map.coefficients.first().map(|c| c.shape),
    })
}

pub fn infer(a: &InferArgs, command: Value) -> Result<(), CliError> {
    let dir = out_dir(&a.common.out)?;
    let mut m = Manifest::new(command);
    let s = load(&a.scenario, &mut m)?;
    // validate names before any expensive work
    MeasureTable::parse(&a.response)?;
    if let Some(o) = &a.other {
        MeasureTable::parse(o)?;
    }
    let kind: BasisKind = a.basis.parse().map_err(|e| CliError::input(format!("--basis: {e}")))?;
    if a.basis_size < 4 {
        return Err(CliError::input("--basis-size must be at least 4"));
    }
    let table = match &a.measures {
        Some(p) => {
            m.input(p)?;
            MeasureTable::from_csv(&s, p)?
        }
        None => MeasureTable::from_solve(&s, &a.scenario)?,
    };
    let (y, weights) = table.get(&a.response)?;
    let sites: Vec<_> = s.tracts.iter().map(|t| t.centroid).collect();
    let ids: Vec<i64> = s.tracts.iter().map(|t| t.external_id).collect();
    let basis = BasisSpec {
        kind,
        knots_per_dim: a.basis_size - 2,
        ..BasisSpec::default()
    };
    let opts = InferenceOptions {
        alpha: a.alpha,
        n_boot: a.n_boot,
        seed: a.seed,
        fit: SvcmOptions {
            basis,
            max_cycles: a.max_cycles,
            response_name: a.response.clone(),
            ..SvcmOptions::default()
        },
    };
    m.seeds.insert("bootstrap".into(), a.seed);

    match a.test {
        TestKind::Model => {
            if a.covariates.is_empty() {
                return Err(CliError::input("--test model needs --covariates"));
            }
            let covs = a.covariates.iter().map(|c| covariate(&s, c)).collect::<Result<Vec<_>, _>>()?;
            let mut fit = fit_svcm(&y, &covs, &sites, &opts.fit)?;
            attach_bands(&mut fit, a.alpha, a.n_boot, a.seed)?;
            write_fit_json(&fit, &dir.join("fit.json"))?;
            write_coefficients_csv(&fit, &ids, &dir.join("coefficients.csv"))?;
            let map = significance_map(&fit)?;
            write_significance_geojson(&map, &ids, &dir.join("significance.geojson"))?;
            for f in ["fit.json", "coefficients.csv", "significance.geojson"] {
                m.output(&dir, f)?;
            }
            if let Some(text) = &a.candidates {
                let names: Vec<&str> = a.covariates.iter().map(String::as_str).collect();
                let candidates = text
                    .split(';')
                    .map(|set| {
                        set.split(',')
                            .map(|c| {
                                let c = c.trim();
                                names
                                    .iter()
                                    .position(|n| *n == c)
                                    .ok_or_else(|| CliError::input(format!("candidate covariate `{c}` not in --covariates")))
                            })
                            .collect::<Result<Vec<_>, _>>()
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let table = evaluate_models(
                    &candidates,
                    &y,
                    &covs,
                    &sites,
                    &EvaluateOptions {
                        inference: opts.clone(),
                        ..EvaluateOptions::default()
                    },
                )?;
                std::fs::write(dir.join("models.json"), serde_json::to_string_pretty(&table)?)?;
                m.output(&dir, "models.json")?;
            }
            m.summary = json!({
                "sites": fit.y.len(),
                "dropped": fit.dropped,
                "converged": fit.converged,
                "cycles": fit.cycles,
                "aic": fit.aic,
                "surfaces": fit.surfaces.iter().map(|sf| sf.name.clone()).collect::<Vec<_>>(),
            });
        }
        TestKind::Difference | TestKind::Location => {
            let map = if a.test == TestKind::Difference {
                let other = a.other.as_deref().ok_or_else(|| CliError::input("--test difference needs --other"))?;
                let (o, _) = table.get(other)?;
                difference_test(&y, &o, &sites, &opts)?
            } else {
                location_test(&y, a.mu0, Some(weights), &sites, &opts)?
            };
            write_significance_geojson(&map, &ids, &dir.join("significance.geojson"))?;
            m.output(&dir, "significance.geojson")?;
            m.summary = map_summary(&map);
        }
    }
    m.write(&dir)?;
    Ok(())
}

pub fn report(a: &ReportArgs) -> Result<(), CliError> {
    let m = Manifest::read(&a.run)?;
    let checks: Vec<(String, &str, DigestStatus)> = m
        .inputs
        .iter()
        .map(|d| (d.path.display().to_string(), "input", check(d, &a.run)))
        .chain(m.outputs.iter().map(|d| (d.path.display().to_string(), "output", check(d, &a.run))))
        .collect();
    let clean = checks.iter().all(|c| c.2 == DigestStatus::Ok);
    match a.format {
        Format::Json => {
            let doc = json!({
                "manifest": m,
                "checks": checks.iter().map(|(p, role, st)| json!({"path": p, "role": role, "status": st})).collect::<Vec<_>>(),
                "clean": clean,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Format::Text => {
            let sub = m.command.get("subcommand").and_then(Value::as_str).unwrap_or("?");
            println!("{} {} {sub}", m.tool, m.version);
            for (k, v) in &m.seeds {
                println!("seed {k} = {v}");
            }
            for (p, role, st) in &checks {
                println!("{role:6} {:8} {p}", format!("{st:?}").to_lowercase());
            }
            println!("{}", serde_json::to_string_pretty(&m.summary)?);
        }
    }
    if clean {
        Ok(())
    } else {
        Err(CliError::input("some recorded files no longer match their digests"))
    }
}
