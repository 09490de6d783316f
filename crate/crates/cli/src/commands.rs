use std::fs;

use infogen::bounds::{
    evaluate, result_json, Analysis, BoundFamily, BoundId, BoundParams, BoundQuery, BoundResult,
    GammaChoice, MomentOrder,
};
use infogen::measures::{
    self, central_moment_root, maximal_leakage, moment_root_infinity, MeasureReport,
    DEFAULT_REPORT_ALPHAS, DEFAULT_REPORT_ORDERS,
};
use infogen::prob::{JointModel, ProbError};
use infogen::problem::{ProblemError, ProblemSpec, Setup};
use infogen::verify::{
    coverage_monte_carlo, run_suite, CheckKind, CoverageOptions, McEstimate, SuiteConfig, Verifier,
};
use serde_json::{json, Value};

use crate::output::{self, num};
use crate::{Axis, BoundArgs, CliError, Common, Format, MeasuresArgs, ParamArgs, SweepArgs, VerifyArgs};

/// Standard errors allowed between a Monte Carlo estimate and δ.
const MC_SIGMAS: f64 = 3.0;

fn load(common: &Common) -> Result<Setup, CliError> {
    let path = common.problem.display().to_string();
    let spec_err = |message: String| CliError::Spec {
        path: path.clone(),
        message,
    };
    let text = fs::read_to_string(&common.problem).map_err(|e| spec_err(e.to_string()))?;
    let spec = ProblemSpec::from_json_str(&text).map_err(|e| spec_err(e.to_string()))?;
    spec.setup(common.n).map_err(|e| spec_err(e.to_string()))
}

fn build(setup: &Setup, budget: usize) -> Result<JointModel, CliError> {
    setup.build_model_with_budget(budget).map_err(|e| match e {
        ProblemError::Prob(ProbError::EnumerationTooLarge { atoms, budget }) => CliError::Usage(format!(
            "model has {atoms} joint atoms, over the budget of {budget}; \
             raise --budget, lower --n, or use `verify --mc --epsilon X`"
        )),
        other => CliError::Usage(other.to_string()),
    })
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn params(setup: &Setup, p: &ParamArgs) -> BoundParams {
    BoundParams {
        delta: p.delta,
        m: p.m,
        alpha: p.alpha,
        gamma: p.gamma,
        sigma: setup.sigma.value,
        n: setup.n,
    }
}

pub fn measures(args: &MeasuresArgs) -> Result<(), CliError> {
    let setup = load(&args.common)?;
    let model = build(&setup, args.common.budget)?;
    let analysis = Analysis::new(&model);
    let report = MeasureReport::compute(
        &model,
        analysis.profile(),
        &DEFAULT_REPORT_ORDERS,
        &DEFAULT_REPORT_ALPHAS,
    )
    .map_err(usage)?;
    let text = match args.common.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&serde_json::to_value(&report).map_err(usage)?),
        Format::Csv => {
            let rows: Vec<Vec<String>> = report
                .entries()
                .into_iter()
                .map(|(k, v)| vec![k, num(v)])
                .collect();
            output::csv(&["measure", "value"], &rows)?
        }
    };
    output::emit(args.common.out.as_deref(), &text)
}

fn scale_result(mut r: BoundResult, scale: f64) -> BoundResult {
    if scale != 1.0 && r.feasible {
        r.epsilon *= scale;
        r.detail.insert("epsilon_scale".into(), json!(scale));
    }
    r
}

pub fn bound(args: &BoundArgs) -> Result<(), CliError> {
    let setup = load(&args.common)?;
    let model = build(&setup, args.common.budget)?;
    let analysis = Analysis::new(&model);
    let mut p = params(&setup, &args.params);
    if args.bound == BoundId::StrongConverse && p.gamma.is_none() {
        p.gamma = Some(GammaChoice::Optimize);
    }
    let query = BoundQuery::new(args.bound, p);
    let mut result = scale_result(evaluate(&analysis, &query).map_err(usage)?, args.epsilon_scale);
    if setup.sigma.degenerate {
        result.detail.insert("sigma_degenerate".into(), json!(true));
    }
    let text = match args.common.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&result_json(&result)),
        Format::Csv => output::csv(
            &["bound_id", "epsilon", "feasible"],
            &[vec![
                result.bound_id.to_string(),
                num(result.epsilon),
                result.feasible.to_string(),
            ]],
        )?,
    };
    output::emit(args.common.out.as_deref(), &text)
}

fn suite_config(args: &VerifyArgs) -> Result<SuiteConfig, CliError> {
    let checks = args
        .suite
        .iter()
        .map(|s| s.parse::<CheckKind>().map_err(CliError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    if args.delta_grid.is_empty() {
        return Err(usage("--delta-grid must not be empty"));
    }
    let mut config = SuiteConfig {
        checks,
        deltas: args.delta_grid.clone(),
        coverage: CoverageOptions {
            epsilon_scale: args.epsilon_scale,
            detail: args.detail,
        },
        ..SuiteConfig::default()
    };
    if !args.bounds.is_empty() {
        config.bounds = args.bounds.clone();
    }
    if let Some(MomentOrder::Finite(m)) = args.params.m {
        config.orders = vec![m];
    }
    if let Some(a) = args.params.alpha {
        config.alphas = vec![a];
    }
    Ok(config)
}

fn mc_estimable(id: BoundId) -> bool {
    !id.is_data_dependent() && id.family() != BoundFamily::Average
}

fn mc_json(est: &McEstimate, delta: f64, query: &BoundQuery, exact: Option<f64>) -> (Value, bool) {
    let pass = est.estimate - MC_SIGMAS * est.std_error <= delta;
    let mut v = serde_json::to_value(est).expect("estimate serializes");
    v["delta"] = json!(delta);
    v["params"] = serde_json::to_value(query.params).expect("params serialize");
    v["pass"] = json!(pass);
    if let Some(x) = exact {
        v["exact_violation_mass"] = json!(x);
        v["agrees_with_exact"] = json!(est.agrees_with(x, MC_SIGMAS));
    }
    (v, pass)
}

pub fn verify(args: &VerifyArgs) -> Result<(), CliError> {
    let setup = load(&args.common)?;
    let config = suite_config(args)?;
    let base = BoundParams::new(setup.sigma.value, setup.n);

    let model = match setup.build_model_with_budget(args.common.budget) {
        Ok(m) => Some(m),
        Err(ProblemError::Prob(ProbError::EnumerationTooLarge { .. })) if args.mc => None,
        Err(_) => Some(build(&setup, args.common.budget)?),
    };

    let mut report = serde_json::Map::new();
    report.insert("n".into(), json!(setup.n));
    report.insert("sigma".into(), json!(setup.sigma.value));
    report.insert("sigma_degenerate".into(), json!(setup.sigma.degenerate));
    let mut pass = true;
    let mut failures: Vec<String> = Vec::new();

    let verifier = match &model {
        Some(m) => Some(Verifier::new(&setup, m).map_err(usage)?),
        None => None,
    };
    if let Some(v) = &verifier {
        let suite = run_suite(v, &config).map_err(usage)?;
        pass &= suite.pass;
        failures.extend(suite.failures());
        report.insert("exact".into(), serde_json::to_value(&suite).map_err(usage)?);
    } else {
        report.insert("exact".into(), Value::Null);
    }

    if args.mc {
        let mut estimates = Vec::new();
        let queries: Vec<BoundQuery> = config
            .coverage_queries(base)
            .into_iter()
            .filter(|q| mc_estimable(q.bound_id))
            .collect();
        for q in &queries {
            let delta = q.params.delta.unwrap_or(f64::NAN);
            let (epsilon, exact) = match &verifier {
                Some(v) => {
                    let eps = evaluate(v.analysis(), q).map_err(usage)?.epsilon * args.epsilon_scale;
                    let exact = v.coverage(q, config.coverage).map_err(usage)?.violation_mass;
                    (eps, Some(exact))
                }
                None => {
                    let eps = args.epsilon.ok_or_else(|| {
                        usage(
                            "model exceeds the atom budget; Monte Carlo coverage needs an \
                             externally supplied --epsilon",
                        )
                    })?;
                    (eps * args.epsilon_scale, None)
                }
            };
            let est = coverage_monte_carlo(&setup, q.bound_id, epsilon, args.samples, args.seed)
                .map_err(usage)?;
            let (v, ok) = mc_json(&est, delta, q, exact);
            if !ok {
                failures.push(format!("monte_carlo:{}@delta={delta}", q.bound_id));
            }
            pass &= ok;
            estimates.push(v);
        }
        report.insert("monte_carlo".into(), Value::Array(estimates));
    }
    report.insert("pass".into(), json!(pass));
    report.insert("failures".into(), json!(failures));

    let text = match args.common.format.unwrap_or(Format::Json) {
        Format::Json => output::json(&Value::Object(report)),
        Format::Csv => {
            let rows: Vec<Vec<String>> = failures.iter().map(|f| vec![f.clone(), "false".into()]).collect();
            let mut rows = rows;
            rows.push(vec!["all".into(), pass.to_string()]);
            output::csv(&["check", "pass"], &rows)?
        }
    };
    output::emit(args.common.out.as_deref(), &text)?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Failed(failures.join(", ")))
    }
}

struct SweepRow {
    value: String,
    bound_id: BoundId,
    epsilon: f64,
    feasible: bool,
    mi: f64,
    moment: f64,
    leakage: f64,
    max_info: f64,
    reason: String,
}

const SWEEP_HEADER: [&str; 10] = [
    "axis", "value", "bound_id", "epsilon", "feasible", "I", "M_m", "L", "I_max", "reason",
];

fn parse_axis_value(axis: Axis, raw: &str) -> Result<f64, String> {
    let raw = raw.trim();
    match axis {
        Axis::M => match raw.parse::<MomentOrder>()? {
            MomentOrder::Finite(m) => Ok(m),
            MomentOrder::Infinity => Ok(f64::INFINITY),
        },
        Axis::N => raw
            .parse::<usize>()
            .map(|n| n as f64)
            .map_err(|_| format!("invalid n {raw:?}")),
        _ => raw.parse::<f64>().map_err(|_| format!("invalid value {raw:?}")),
    }
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Delta => "delta",
        Axis::M => "m",
        Axis::Alpha => "alpha",
        Axis::N => "n",
        Axis::Beta => "beta",
    }
}

/// Setup for one axis value, when the axis changes the model.
fn axis_setup(base: &Setup, axis: Axis, value: f64) -> Result<Option<Setup>, String> {
    match axis {
        Axis::N => base.with_n(value as usize).map(Some).map_err(|e| e.to_string()),
        Axis::Beta => base.with_beta(value).map(Some).map_err(|e| e.to_string()),
        _ => Ok(None),
    }
}

fn sweep_cells(
    setup: &Setup,
    model: &JointModel,
    axis: Axis,
    value: f64,
    label: &str,
    args: &SweepArgs,
) -> Vec<SweepRow> {
    let analysis = Analysis::new(model);
    let mut p = params(setup, &args.params);
    match axis {
        Axis::Delta => p.delta = Some(value),
        Axis::M if value.is_infinite() => p.m = Some(MomentOrder::Infinity),
        Axis::M => p.m = Some(MomentOrder::Finite(value)),
        Axis::Alpha => p.alpha = Some(value),
        Axis::N | Axis::Beta => {}
    }
    if p.gamma.is_none() {
        p.gamma = Some(GammaChoice::Optimize);
    }
    let mi = analysis.mutual_information();
    let moment = match p.m.unwrap_or(MomentOrder::Finite(2.0)) {
        MomentOrder::Finite(m) => central_moment_root(analysis.profile(), m).unwrap_or(f64::NAN),
        MomentOrder::Infinity => moment_root_infinity(analysis.profile()),
    };
    let leakage = maximal_leakage(model);
    let max_info = measures::max_information(analysis.profile());

    args.bounds
        .iter()
        .map(|&id| {
            let (epsilon, feasible, reason) = match evaluate(&analysis, &BoundQuery::new(id, p)) {
                Ok(r) => {
                    let reason = if r.feasible { String::new() } else { "infeasible".into() };
                    (r.epsilon, r.feasible, reason)
                }
                Err(e) => (f64::INFINITY, false, e.to_string()),
            };
            SweepRow {
                value: label.to_string(),
                bound_id: id,
                epsilon,
                feasible,
                mi,
                moment,
                leakage,
                max_info,
                reason,
            }
        })
        .collect()
}

fn invalid_rows(label: &str, bounds: &[BoundId], reason: &str) -> Vec<SweepRow> {
    bounds
        .iter()
        .map(|&id| SweepRow {
            value: label.to_string(),
            bound_id: id,
            epsilon: f64::INFINITY,
            feasible: false,
            mi: f64::NAN,
            moment: f64::NAN,
            leakage: f64::NAN,
            max_info: f64::NAN,
            reason: reason.to_string(),
        })
        .collect()
}

pub fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    if args.values.is_empty() || args.values.iter().all(|v| v.trim().is_empty()) {
        return Err(usage("--values must list at least one value"));
    }
    let setup = load(&args.common)?;
    let base_model = match args.axis {
        Axis::N | Axis::Beta => None,
        _ => Some(build(&setup, args.common.budget)?),
    };

    let mut rows = Vec::new();
    for raw in &args.values {
        let label = raw.trim();
        let value = match parse_axis_value(args.axis, label) {
            Ok(v) => v,
            Err(e) => {
                rows.extend(invalid_rows(label, &args.bounds, &e));
                continue;
            }
        };
        match (&base_model, axis_setup(&setup, args.axis, value)) {
            (Some(model), _) => {
                rows.extend(sweep_cells(&setup, model, args.axis, value, label, args));
            }
            (None, Ok(Some(s))) => match build(&s, args.common.budget) {
                Ok(model) => rows.extend(sweep_cells(&s, &model, args.axis, value, label, args)),
                Err(e) => rows.extend(invalid_rows(label, &args.bounds, &e.to_string())),
            },
            (None, Err(e)) => rows.extend(invalid_rows(label, &args.bounds, &e)),
            (None, Ok(None)) => unreachable!("model-changing axes always return a setup"),
        }
    }

    let axis = axis_name(args.axis);
    let text = match args.common.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        axis.to_string(),
                        r.value.clone(),
                        r.bound_id.to_string(),
                        num(r.epsilon),
                        r.feasible.to_string(),
                        num(r.mi),
                        num(r.moment),
                        num(r.leakage),
                        num(r.max_info),
                        r.reason.clone(),
                    ]
                })
                .collect();
            output::csv(&SWEEP_HEADER, &table)?
        }
        Format::Json => {
            let items: Vec<Value> = rows
                .iter()
                .map(|r| {
                    json!({
                        "axis": axis,
                        "value": r.value,
                        "bound_id": r.bound_id,
                        "epsilon": if r.epsilon.is_finite() { json!(r.epsilon) } else { json!("inf") },
                        "feasible": r.feasible,
                        "I": r.mi,
                        "M_m": r.moment,
                        "L": r.leakage,
                        "I_max": r.max_info,
                        "reason": r.reason,
                    })
                })
                .collect();
            output::json(&Value::Array(items))
        }
    };
    output::emit(args.common.out.as_deref(), &text)
}
