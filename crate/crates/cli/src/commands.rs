//! Subcommand implementations. Each produces a JSON document, a CSV table and
//! the list of failed inequalities.

use ricci_core::bounds::{
    admissible_lambda, average_l2_bonnet_myers, bonnet_myers, commutation_check,
    exponential_concentration, gaussian_concentration, log_sobolev_check, random_distributions,
    random_functions, spectral_report, variance_bound, Analysis, BoundsError, ALL_PAIRS_CAP,
};
use ricci_core::chain::n_step;
use ricci_core::curvature::{
    contraction_check, default_mode, kappa_global, CurvatureError, CurvatureReport, PairMode,
};
use ricci_core::transport::w1_sparse;
use ricci_core::{averaging, lipschitz_constant, Chain};
use serde_json::{json, Map, Value};
use thiserror::Error;

use crate::report::{num, nums, opt, Table};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: unreadable file, malformed data, invalid flag values.
    #[error("{0}")]
    Input(String),
    /// A hypothesis of the requested computation does not hold for this chain.
    #[error("{0}")]
    Check(String),
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::InvalidArgument(_)
            | BoundsError::TooLarge(_)
            | BoundsError::LambdaTooLarge { .. } => CliError::Input(e.to_string()),
            other => CliError::Check(other.to_string()),
        }
    }
}

impl From<CurvatureError> for CliError {
    fn from(e: CurvatureError) -> Self {
        match e {
            CurvatureError::InvalidDelta(_) | CurvatureError::Metric(_) => {
                CliError::Input(e.to_string())
            }
            other => CliError::Check(other.to_string()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub doc: Value,
    pub table: Table,
    pub failures: Vec<String>,
}

pub const CURVATURE_COLUMNS: &[&str] = &[
    "x",
    "y",
    "dist",
    "w1",
    "kappa",
    "kappa_delta",
    "kappa_plus",
    "kappa_minus",
    "unstability",
];
pub const SPECTRAL_COLUMNS: &[&str] = &["index", "modulus"];
pub const BOUNDS_COLUMNS: &[&str] = &["kind", "x", "y", "value", "bound", "holds"];
pub const CONCENTRATION_COLUMNS: &[&str] = &["function", "t", "exact", "bound"];
pub const LOG_SOBOLEV_COLUMNS: &[&str] = &[
    "function",
    "var_lhs",
    "var_rhs",
    "ent_lhs",
    "ent_rhs",
    "v_var_rhs",
    "v_ent_rhs",
    "holds",
];
pub const EXPCONC_COLUMNS: &[&str] = &["x", "distance", "pull", "limit", "holds"];
pub const CHECK_COLUMNS: &[&str] = &["check", "status", "detail"];

const RANDOM_FUNCTIONS: usize = 20;
const RANDOM_PAIRS: usize = 50;
const DECAY_STEPS: usize = 10;
const DECAY_CAP: usize = 256;

fn id(chain: &Chain, i: usize) -> Value {
    Value::String(chain.space().point(i).to_owned())
}

pub fn resolve_point(chain: &Chain, name: &str) -> Result<usize, CliError> {
    chain
        .space()
        .index_of(name)
        .ok_or_else(|| CliError::Input(format!("unknown point {name:?}")))
}

fn chain_summary(chain: &Chain) -> Value {
    json!({ "points": chain.len(), "dt": opt(chain.dt()) })
}

pub fn analysis(chain: &Chain) -> Result<Analysis<'_>, CliError> {
    Ok(Analysis::new(chain)?)
}

// ---------------------------------------------------------------- curvature

pub fn curvature_report(
    chain: &Chain,
    geodesic: Option<f64>,
    delta: f64,
) -> Result<CurvatureReport, CliError> {
    let mode = match geodesic {
        Some(eps) => PairMode::Geodesic(eps),
        None if chain.len() <= ALL_PAIRS_CAP => PairMode::AllPairs,
        None => default_mode(chain),
    };
    Ok(kappa_global(chain, mode, delta)?)
}

pub fn curvature(chain: &Chain, geodesic: Option<f64>, delta: f64) -> Result<Outcome, CliError> {
    let r = curvature_report(chain, geodesic, delta)?;
    let mut table = Table::new(CURVATURE_COLUMNS);
    let mut pairs = Vec::with_capacity(r.pairs.len());
    for p in &r.pairs {
        let row = vec![
            id(chain, p.x),
            id(chain, p.y),
            num(p.dist),
            num(p.w1),
            num(p.kappa),
            num(p.kappa_delta),
            num(p.kappa_plus),
            num(p.kappa_minus),
            opt(p.unstability),
        ];
        pairs.push(Value::Object(
            CURVATURE_COLUMNS
                .iter()
                .map(|c| c.to_string())
                .zip(row.iter().cloned())
                .collect(),
        ));
        table.push(row);
    }
    let mode = match r.mode {
        PairMode::AllPairs => json!("all_pairs"),
        PairMode::Geodesic(eps) => json!({ "geodesic": num(eps) }),
    };
    let doc = json!({
        "command": "curvature",
        "chain": chain_summary(chain),
        "mode": mode,
        "delta": num(r.delta),
        "global_kappa": num(r.global_kappa),
        "rate_kappa": opt(chain.dt().map(|dt| r.global_kappa / dt)),
        "max_unstability": opt(r.max_unstability()),
        "pairs": pairs,
    });
    Ok(Outcome {
        doc,
        table,
        failures: vec![],
    })
}

// ---------------------------------------------------------------- spectral

pub fn spectral(a: &Analysis) -> Result<Outcome, CliError> {
    let r = spectral_report(a)?;
    let mut failures = Vec::new();
    if r.radius_holds == Some(false) {
        failures.push(format!(
            "spectral radius {} exceeds 1 - kappa = {}",
            r.spectral_radius,
            1.0 - r.kappa_used
        ));
    }
    let poincare = match &r.poincare {
        Some(p) => {
            if !p.holds {
                failures.push("Poincaré inequality Var f <= local or Dirichlet bound fails".into());
            }
            json!({
                "var": nums(&p.var),
                "local_rhs": nums(&p.local_rhs),
                "dirichlet_rhs": nums(&p.dirichlet_rhs),
                "holds": p.holds,
            })
        }
        None => Value::Null,
    };
    let note = if r.reversible {
        Value::Null
    } else {
        json!("chain is not reversible; Poincaré inequalities skipped")
    };
    let mut table = Table::new(SPECTRAL_COLUMNS);
    for (i, m) in r.eigenvalue_moduli.iter().enumerate() {
        table.push(vec![json!(i), num(*m)]);
    }
    let doc = json!({
        "command": "spectral",
        "chain": chain_summary(a.chain),
        "eigenvalue_moduli": nums(&r.eigenvalue_moduli),
        "spectral_radius": num(r.spectral_radius),
        "kappa": num(r.kappa_used),
        "one_minus_kappa": num(1.0 - r.kappa_used),
        "reversible": r.reversible,
        "radius_holds": r.radius_holds,
        "poincare": poincare,
        "note": note,
    });
    Ok(Outcome {
        doc,
        table,
        failures,
    })
}

// ---------------------------------------------------------------- bounds

pub fn bounds(a: &Analysis) -> Result<Outcome, CliError> {
    let chain = a.chain;
    let bm = bonnet_myers(a)?;
    let var = variance_bound(a)?;
    let mut failures = Vec::new();
    if !bm.holds {
        failures.push(format!(
            "Bonnet-Myers: diameter {} vs bound {}",
            bm.diam_actual, bm.diam_bound
        ));
    }
    if !var.holds {
        failures.push(format!(
            "variance: extremal {} exceeds {}",
            var.extremal_var, var.bound
        ));
    }
    let mut table = Table::new(BOUNDS_COLUMNS);
    for &(x, y, d, b) in &bm.per_pair {
        table.push(vec![
            json!("pair"),
            id(chain, x),
            id(chain, y),
            num(d),
            num(b),
            json!(b.is_nan() || d <= b + 1e-9),
        ]);
    }
    for &(x, l, r) in &bm.per_point {
        table.push(vec![
            json!("point"),
            id(chain, x),
            Value::Null,
            num(l),
            num(r),
            json!(l <= r + 1e-9),
        ]);
    }
    table.push(vec![
        json!("diameter"),
        Value::Null,
        Value::Null,
        num(bm.diam_actual),
        num(bm.diam_bound),
        json!(bm.diam_actual <= bm.diam_bound + 1e-9),
    ]);
    table.push(vec![
        json!("mean_distance"),
        Value::Null,
        Value::Null,
        num(bm.mean_distance),
        num(bm.mean_distance_bound),
        json!(bm.mean_distance <= bm.mean_distance_bound + 1e-9),
    ]);
    table.push(vec![
        json!("variance"),
        Value::Null,
        Value::Null,
        num(var.extremal_var),
        num(var.bound),
        json!(var.holds),
    ]);
    let doc = json!({
        "command": "bounds",
        "chain": chain_summary(chain),
        "bonnet_myers": {
            "kappa": num(bm.kappa),
            "diameter": num(bm.diam_actual),
            "diameter_bound": num(bm.diam_bound),
            "mean_distance": num(bm.mean_distance),
            "mean_distance_bound": num(bm.mean_distance_bound),
            "per_point": bm.per_point.iter().map(|&(x, l, r)| json!({"x": id(chain, x), "mean_distance": num(l), "bound": num(r)})).collect::<Vec<_>>(),
            "holds": bm.holds,
        },
        "variance": {
            "sigma2": num(var.sigma2),
            "n": num(var.n),
            "kappa": num(var.kappa),
            "bound": num(var.bound),
            "pointwise_bound": num(var.pointwise_bound),
            "extremal_var": num(var.extremal_var),
            "certificate": format!("{:?}", var.extremal_certificate),
            "local_certificates": certificates(a),
            "witness": nums(&var.witness),
            "statdim": num(var.statdim),
            "holds": var.holds,
        },
    });
    Ok(Outcome {
        doc,
        table,
        failures,
    })
}

fn certificates(a: &Analysis) -> Value {
    let mut counts = Map::new();
    for s in &a.stats {
        let key = format!("{:?}", s.certificate);
        let c = counts.get(&key).and_then(Value::as_u64).unwrap_or(0);
        counts.insert(key, json!(c + 1));
    }
    Value::Object(counts)
}

// ---------------------------------------------------------------- concentration

pub fn concentration(a: &Analysis, origin: usize) -> Result<Outcome, CliError> {
    let chain = a.chain;
    let space = chain.space();
    let dist: Vec<f64> = (0..chain.len()).map(|x| space.dist(origin, x)).collect();
    let witness = variance_bound(a)?.witness;
    let name = space.point(origin);
    let functions = [
        (format!("distance_to:{name}"), dist.clone()),
        (
            format!("-distance_to:{name}"),
            dist.iter().map(|v| -v).collect(),
        ),
        ("extremal_witness".to_string(), witness),
    ];
    let mut table = Table::new(CONCENTRATION_COLUMNS);
    let mut docs = Vec::new();
    let mut failures = Vec::new();
    for (label, f) in &functions {
        let r = gaussian_concentration(a, f)?;
        if !r.holds {
            failures.push(format!(
                "Gaussian concentration: exact tail of {label} exceeds its bound"
            ));
        }
        for row in &r.rows {
            table.push(vec![
                json!(label),
                num(row.t),
                num(row.exact),
                num(row.bound),
            ]);
        }
        docs.push(json!({
            "function": label,
            "d2": num(r.d2),
            "c": num(r.c),
            "sigma_inf": num(r.sigma_inf),
            "t_max": num(r.t_max),
            "mean": num(r.mean),
            "holds": r.holds,
            "rows": r.rows.iter().map(|row| json!({"t": num(row.t), "exact": num(row.exact), "bound": num(row.bound)})).collect::<Vec<_>>(),
        }));
    }
    let doc =
        json!({ "command": "concentration", "chain": chain_summary(chain), "functions": docs });
    Ok(Outcome {
        doc,
        table,
        failures,
    })
}

// ---------------------------------------------------------------- log-Sobolev

pub fn log_sobolev(a: &Analysis, lambda: Option<f64>) -> Result<Outcome, CliError> {
    let chain = a.chain;
    let lambda_max = admissible_lambda(a)?;
    let lambda = lambda.unwrap_or(lambda_max);
    let mut table = Table::new(LOG_SOBOLEV_COLUMNS);
    let mut failures = Vec::new();
    let mut docs = Vec::new();
    let mut first = None;
    for (i, z) in random_functions(chain.len(), RANDOM_FUNCTIONS, 0x105, 1.0)
        .into_iter()
        .enumerate()
    {
        let f: Vec<f64> = z.iter().map(|v| v.exp()).collect();
        let r = log_sobolev_check(a, &f, lambda)?;
        if !r.holds {
            failures.push(format!(
                "log-Sobolev: random function {i} violates Var or Ent bound"
            ));
        }
        table.push(vec![
            json!(i),
            num(r.var_lhs),
            num(r.var_rhs),
            num(r.ent_lhs),
            num(r.ent_rhs),
            opt(r.v_var_rhs),
            opt(r.v_ent_rhs),
            json!(r.holds),
        ]);
        docs.push(json!({
            "function": i,
            "var_lhs": num(r.var_lhs),
            "var_rhs": num(r.var_rhs),
            "ent_lhs": num(r.ent_lhs),
            "ent_rhs": num(r.ent_rhs),
            "v_var_rhs": opt(r.v_var_rhs),
            "v_ent_rhs": opt(r.v_ent_rhs),
            "holds": r.holds,
        }));
        first.get_or_insert(r);
    }
    let first = first.expect("at least one function");
    if first.v_envelope_holds == Some(false) {
        failures.push("V(x) exceeds its envelope (4/kappa)E[sigma^2/n] + 2C J(x)/kappa".into());
    }
    let doc = json!({
        "command": "logsobolev",
        "chain": chain_summary(chain),
        "lambda": num(lambda),
        "lambda_max": num(lambda_max),
        "constant": num(first.constant),
        "reversible": a.invariant.reversible,
        "v_profile": first.v_profile.as_deref().map_or(Value::Null, nums),
        "v_envelope": first.v_envelope.as_deref().map_or(Value::Null, nums),
        "v_envelope_holds": first.v_envelope_holds,
        "functions": docs,
    });
    Ok(Outcome {
        doc,
        table,
        failures,
    })
}

// ---------------------------------------------------------------- attracting point

pub fn expconc(
    a: &Analysis,
    origin: usize,
    radius: f64,
    s: Option<f64>,
) -> Result<Outcome, CliError> {
    let chain = a.chain;
    let space = chain.space();
    let r = exponential_concentration(a, origin, radius, s)?;
    let mut failures = Vec::new();
    if r.lhs > r.rhs * (1.0 + 1e-9) {
        failures.push(format!(
            "exponential moment {} exceeds (4 + J(o)^2/s^2) e^(m/D) = {}",
            r.lhs, r.rhs
        ));
    }
    for &(x, t, b) in &r.lemma_violations {
        failures.push(format!(
            "pull at {}: T1(m_x, o) = {t} exceeds d(x,o) - rho = {b}",
            space.point(x)
        ));
    }
    let mut table = Table::new(EXPCONC_COLUMNS);
    for x in (0..chain.len()).filter(|&x| space.dist(x, origin) >= radius) {
        let t: f64 = chain
            .row(x)
            .iter()
            .map(|&(y, p)| p * space.dist(y, origin))
            .sum();
        let limit = space.dist(x, origin) - r.rho;
        table.push(vec![
            id(chain, x),
            num(space.dist(x, origin)),
            num(t),
            num(limit),
            json!(t <= limit + 1e-9),
        ]);
    }
    let average = match average_l2_bonnet_myers(a, origin, radius) {
        Ok(l2) => {
            if !l2.holds {
                failures.push(format!("average distance {} exceeds {}", l2.lhs, l2.rhs));
            }
            json!({"lhs": num(l2.lhs), "rhs": num(l2.rhs), "holds": l2.holds})
        }
        Err(e) => json!({"skipped": e.to_string()}),
    };
    let doc = json!({
        "command": "expconc",
        "chain": chain_summary(chain),
        "origin": id(chain, origin),
        "radius": num(radius),
        "s": num(r.s),
        "rho": num(r.rho),
        "rho_point": id(chain, r.rho_point),
        "decay_distance": num(r.d),
        "m": num(r.m),
        "moment": num(r.lhs),
        "moment_bound": num(r.rhs),
        "lemma_violations": r.lemma_violations.len(),
        "holds": r.holds,
        "average_l2": average,
    });
    Ok(Outcome {
        doc,
        table,
        failures,
    })
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    fn as_str(&self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    pub detail: String,
}

fn check(name: &'static str, result: Result<Result<String, String>, String>) -> Check {
    match result {
        Ok(Ok(detail)) => Check {
            name,
            status: Status::Pass,
            detail,
        },
        Ok(Err(detail)) => Check {
            name,
            status: Status::Fail,
            detail,
        },
        Err(reason) => Check {
            name,
            status: Status::Skip,
            detail: reason,
        },
    }
}

/// Pass with `ok`, fail with the first failure message.
fn verdict(failures: Vec<String>, ok: String) -> Result<String, String> {
    match failures.into_iter().next() {
        None => Ok(ok),
        Some(f) => Err(f),
    }
}

fn skip_unless(cond: bool, reason: &str) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(reason.to_owned())
    }
}

pub struct VerifyOptions {
    pub all: bool,
    pub origin: Option<usize>,
    pub radius: Option<f64>,
    pub lambda: Option<f64>,
}

pub fn run_checks(a: &Analysis, opts: &VerifyOptions) -> Vec<Check> {
    let chain = a.chain;
    let n = chain.len();
    let kappa = a.kappa;
    let positive = kappa > 0.0;
    let mut checks = vec![Check {
        name: "transport_certificates",
        status: Status::Pass,
        detail: format!(
            "{} pairs solved with certified duality gap",
            a.curvature.pairs.len()
        ),
    }];

    checks.push(check(
        "w1_contraction",
        Ok((|| {
            let ds = random_distributions(n, 2 * RANDOM_PAIRS, 4, 0xc0);
            for (i, pair) in ds.chunks(2).enumerate() {
                let r = contraction_check(chain, kappa, &pair[0], &pair[1])
                    .map_err(|e| e.to_string())?;
                if !r.holds {
                    return Err(format!(
                        "instance {i}: W1 after one step {} > (1 - kappa) W1 = {}",
                        r.lhs, r.rhs
                    ));
                }
            }
            Ok(format!("{RANDOM_PAIRS} random pairs"))
        })()),
    ));

    checks.push(check(
        "lipschitz_contraction",
        Ok((|| {
            let scale = chain.space().diameter().max(1.0);
            for (i, f) in random_functions(n, RANDOM_FUNCTIONS, 0x11, scale)
                .iter()
                .enumerate()
            {
                let lf = lipschitz_constant(chain.space(), f);
                let lmf = lipschitz_constant(chain.space(), &averaging(chain, f));
                if lmf > (1.0 - kappa) * lf * (1.0 + 1e-9) + 1e-9 {
                    return Err(format!(
                        "function {i}: ||Mf||_Lip = {lmf} > (1 - kappa) ||f||_Lip = {}",
                        (1.0 - kappa) * lf
                    ));
                }
            }
            Ok(format!("{RANDOM_FUNCTIONS} random functions"))
        })()),
    ));

    let outcome =
        |r: Result<Outcome, CliError>, ok: &str| -> Result<Result<String, String>, String> {
            match r {
                Ok(o) => Ok(verdict(o.failures, ok.to_owned())),
                Err(CliError::Check(e)) => Err(e),
                Err(CliError::Input(e)) => Err(e),
            }
        };

    checks.push(check(
        "spectral",
        skip_unless(positive, "curvature is not positive")
            .and_then(|_| outcome(spectral(a), "spectral radius <= 1 - kappa; Poincaré holds")),
    ));

    if opts.all {
        checks.push(check(
            "bonnet_myers_and_variance",
            skip_unless(positive, "curvature is not positive")
                .and_then(|_| {
                    skip_unless(a.invariant.unique, "invariant distribution is not unique")
                })
                .and_then(|_| {
                    outcome(
                        bounds(a),
                        "diameter, mean distance and variance bounds hold",
                    )
                }),
        ));
        checks.push(check(
            "gaussian_concentration",
            skip_unless(positive, "curvature is not positive")
                .and_then(|_| {
                    skip_unless(a.invariant.unique, "invariant distribution is not unique")
                })
                .and_then(|_| {
                    outcome(
                        concentration(a, opts.origin.unwrap_or(0)),
                        "exact tails below the bound on the full grid",
                    )
                }),
        ));
        checks.push(check(
            "decay_to_equilibrium",
            skip_unless(positive, "curvature is not positive")
                .and_then(|_| {
                    skip_unless(a.invariant.unique, "invariant distribution is not unique")
                })
                .and_then(|_| skip_unless(n <= DECAY_CAP, "chain too large for dense powers"))
                .map(|_| decay(a)),
        ));
        let unstable = a.curvature.max_unstability().is_some();
        checks.push(check(
            "commutation",
            skip_unless(
                positive && unstable,
                "unstability undefined (some pair has kappa <= 0)",
            )
            .and_then(|_| {
                let lambda = match opts.lambda {
                    Some(l) => l,
                    None => admissible_lambda(a).map_err(|e| e.to_string())?,
                };
                let scale = chain.space().diameter().max(1.0);
                for (i, f) in random_functions(n, RANDOM_FUNCTIONS, 0x43, scale)
                    .iter()
                    .enumerate()
                {
                    let bad = commutation_check(a, f, lambda).map_err(|e| e.to_string())?;
                    if let Some(&(x, l, r)) = bad.first() {
                        return Ok(Err(format!(
                            "function {i} at {}: D(Mf) = {l} > (1 - kappa/2) M(Df) = {r}",
                            chain.space().point(x)
                        )));
                    }
                }
                Ok(Ok(format!(
                    "{RANDOM_FUNCTIONS} random functions at lambda = {lambda}"
                )))
            }),
        ));
        checks.push(check(
            "log_sobolev",
            skip_unless(
                positive && unstable,
                "unstability undefined (some pair has kappa <= 0)",
            )
            .and_then(|_| skip_unless(a.invariant.unique, "invariant distribution is not unique"))
            .and_then(|_| {
                outcome(
                    log_sobolev(a, opts.lambda),
                    "variance and entropy bounds hold",
                )
            }),
        ));
        match (opts.origin, opts.radius) {
            (Some(o), Some(r)) => checks.push(check(
                "exponential_concentration",
                match expconc(a, o, r, None) {
                    Ok(out) => Ok(verdict(
                        out.failures,
                        "moment bound and pull inequality hold".into(),
                    )),
                    Err(e) => Ok(Err(e.to_string())),
                },
            )),
            _ => checks.push(check(
                "exponential_concentration",
                Err("needs --origin and --radius".into()),
            )),
        }
    }
    checks
}

fn decay(a: &Analysis) -> Result<String, String> {
    let chain = a.chain;
    let nu = a.invariant.nu.support();
    for step in 1..=DECAY_STEPS {
        let p = n_step(chain, step);
        for x in 0..chain.len() {
            let t = w1_sparse(p.row(x), &nu, chain.space())
                .map_err(|e| e.to_string())?
                .cost;
            let bound = (1.0 - a.kappa).powi(step as i32) * a.stats[x].jump / a.kappa;
            if t > bound + 1e-9 {
                return Err(format!(
                    "step {step} from {}: T1 = {t} > (1 - kappa)^n J(x)/kappa = {bound}",
                    chain.space().point(x)
                ));
            }
        }
    }
    Ok(format!(
        "T1(m_x^n, nu) <= (1 - kappa)^n J(x)/kappa for n <= {DECAY_STEPS}"
    ))
}

pub fn checks_outcome(chain: &Chain, checks: &[Check]) -> Outcome {
    let mut table = Table::new(CHECK_COLUMNS);
    let mut failures = Vec::new();
    let mut list = Vec::new();
    for c in checks {
        if c.status == Status::Fail {
            failures.push(format!("{}: {}", c.name, c.detail));
        }
        table.push(vec![
            json!(c.name),
            json!(c.status.as_str()),
            json!(c.detail),
        ]);
        list.push(json!({"check": c.name, "status": c.status.as_str(), "detail": c.detail}));
    }
    let doc = json!({
        "command": "verify",
        "chain": chain_summary(chain),
        "passed": failures.is_empty(),
        "checks": list,
    });
    Outcome {
        doc,
        table,
        failures,
    }
}

/// Every section in one document; sections whose hypotheses fail are
/// recorded as skipped.
pub fn report(
    chain: &Chain,
    a: &Analysis,
    geodesic: Option<f64>,
    delta: f64,
    opts: &VerifyOptions,
) -> Result<Outcome, CliError> {
    let mut doc = Map::new();
    doc.insert("command".into(), json!("report"));
    doc.insert("chain".into(), chain_summary(chain));
    let mut failures = Vec::new();
    let mut section = |name: &str, r: Result<Outcome, CliError>| match r {
        Ok(o) => {
            failures.extend(o.failures.iter().map(|f| format!("{name}: {f}")));
            doc.insert(name.into(), o.doc);
        }
        Err(CliError::Input(e)) | Err(CliError::Check(e)) => {
            doc.insert(name.into(), json!({"skipped": e}));
        }
    };
    section("curvature", curvature(chain, geodesic, delta));
    section("spectral", spectral(a));
    section("bounds", bounds(a));
    section("concentration", concentration(a, opts.origin.unwrap_or(0)));
    section("logsobolev", log_sobolev(a, opts.lambda));
    if let (Some(o), Some(r)) = (opts.origin, opts.radius) {
        section("expconc", expconc(a, o, r, None));
    }
    let checks = checks_outcome(chain, &run_checks(a, opts));
    failures.extend(checks.failures.iter().cloned());
    doc.insert("checks".into(), checks.doc["checks"].clone());
    doc.insert("passed".into(), json!(failures.is_empty()));
    Ok(Outcome {
        doc: Value::Object(doc),
        table: checks.table,
        failures,
    })
}
