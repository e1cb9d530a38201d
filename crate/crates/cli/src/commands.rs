use std::path::Path;

use num_complex::Complex64;
use qrl_core::complexity::{counting_check, qk_c, qk_eps, PrefixFreeMachine};
use qrl_core::entropy::{
    eigenmass_concentration_test, entropy_rate_series, flattened_entropy, flattened_entropy_bound,
};
use qrl_core::limits::limits;
use qrl_core::measurement::{build_premeasure, lln_statistic, sample, BasisGenerator, MeasurementSystem};
use qrl_core::oracles::{run_checks, Check, SweepConfig};
use qrl_core::qtests::{
    build_chapter4_mlt, chapter4_n_of_m, evaluate, level_trace, lln_schnorr_test, smb_test, Members, QTest,
};
use qrl_core::states::{
    bernoulli_prefix, chapter4_prefix, check_coherence, tracial_prefix, Generator, StateDescriptor, StatePrefix,
};
use qrl_core::{BitString, QrlError, Rational};
use serde_json::{json, Value};

use crate::report::{emit, render, Config, Format, Report};
use crate::{Builder, Failure, Out, StateArg, StateKind, TestArgs};

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn config(command: &str) -> Config {
    let mut c = Config::new(command);
    c.param("limits", format!("{:?}", limits()));
    c
}

fn load_descriptor(cfg: &mut Config, key: &str, path: &Path, n: Option<usize>) -> Result<StateDescriptor, Failure> {
    let bytes = read(path)?;
    cfg.input(key, &bytes);
    let mut d: StateDescriptor = serde_json::from_slice(&bytes)
        .map_err(|e| QrlError::Parse(format!("state descriptor {}: {e}", path.display())))?;
    if let Some(n) = n {
        d.n = n;
    }
    cfg.param("N", d.n);
    Ok(d)
}

fn load_state(cfg: &mut Config, arg: &StateArg) -> Result<StatePrefix, Failure> {
    Ok(load_descriptor(cfg, "state", &arg.state, arg.big_n)?.build()?)
}

fn load_basis(cfg: &mut Config, spec: &str) -> Result<MeasurementSystem, Failure> {
    cfg.param("basis", spec);
    let parse_file = |cfg: &mut Config, path: &str| -> Result<Value, Failure> {
        let bytes = read(Path::new(path))?;
        cfg.input("basis", &bytes);
        serde_json::from_slice(&bytes).map_err(|e| Failure::Core(QrlError::Parse(format!("basis {path}: {e}"))))
    };
    let generator = match spec.split_once(':') {
        None if spec == "standard" => BasisGenerator::Standard,
        None if spec == "hadamard" => BasisGenerator::Hadamard,
        Some(("periodic", path)) => {
            let vectors: Vec<[Complex64; 2]> = serde_json::from_value(parse_file(cfg, path)?)
                .map_err(|e| QrlError::Parse(format!("periodic basis vectors: {e}")))?;
            BasisGenerator::Periodic { vectors }
        }
        Some(("explicit", path)) => {
            let bases: Vec<[[Complex64; 2]; 2]> = serde_json::from_value(parse_file(cfg, path)?)
                .map_err(|e| QrlError::Parse(format!("explicit bases: {e}")))?;
            BasisGenerator::Explicit { bases }
        }
        _ => return Err(QrlError::Parse(format!("unknown basis `{spec}`")).into()),
    };
    Ok(MeasurementSystem::new(generator)?)
}

fn parse_rational(cfg: &mut Config, key: &str, s: Option<&str>) -> Result<Rational, Failure> {
    let s = s.ok_or_else(|| Failure::Core(QrlError::Parse(format!("--{key} is required"))))?;
    let r: Rational = s.parse()?;
    cfg.param(key, r.to_string());
    Ok(r)
}

fn finish(cfg: &Config, report: Report, out: &Out, default: Format) -> Result<(), Failure> {
    let bytes = render(cfg, &report, out.format.unwrap_or(default), out.pretty)?;
    emit(&bytes, out.out.as_deref())?;
    if out.pretty {
        for (k, v) in &report.summary {
            eprintln!("{k}: {v}");
        }
        eprintln!("pass: {}", report.violation.is_none());
    }
    match report.violation {
        Some(v) => Err(Failure::Violation(v)),
        None => Ok(()),
    }
}

fn num(x: f64) -> Value {
    json!(x)
}

pub fn state_build(
    kind: StateKind,
    n: usize,
    x: Option<String>,
    p: Option<f64>,
    f: Option<String>,
    out: Option<std::path::PathBuf>,
) -> Result<(), Failure> {
    let missing = |k: &str| Failure::Core(QrlError::Parse(format!("--{k} is required for this kind")));
    let generator = match kind {
        StateKind::Tracial => Generator::Tracial {},
        StateKind::Classical => Generator::Classical { x: x.ok_or_else(|| missing("x"))?.parse()? },
        StateKind::Bernoulli => Generator::Bernoulli { p: p.ok_or_else(|| missing("p"))? },
        StateKind::Chapter4 => Generator::Chapter4 {},
        StateKind::DiagonalF => Generator::DiagonalF { f: f.ok_or_else(|| missing("f"))?.parse()? },
    };
    let d = StateDescriptor { generator, n };
    d.build()?;
    let mut bytes = serde_json::to_vec_pretty(&d).map_err(|e| Failure::Io(e.to_string()))?;
    bytes.push(b'\n');
    emit(&bytes, out.as_deref())
}

pub fn state_coherence(arg: &StateArg, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("state coherence");
    let s = load_state(&mut cfg, arg)?;
    let r = check_coherence(&s);
    let mut rep = Report::default();
    rep.set("depth", s.depth()).set("max_deviation", r.max_deviation).set("failures", &r.failures);
    rep.table(&["n", "deviation"]);
    for (n, d) in &r.levels {
        rep.row(vec![json!(n), num(*d)]);
    }
    if !r.pass {
        rep.fail(format!("coherence fails at levels {:?}", r.failures));
    }
    finish(&cfg, rep, out, Format::Json)
}

pub fn state_dump(arg: &StateArg, level: usize, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("state dump");
    cfg.param("level", level);
    let s = load_state(&mut cfg, arg)?;
    let rho = s.level(level)?;
    let m = rho.matrix();
    let mut rep = Report::default();
    rep.set("level", level).set("dim", rho.dim());
    rep.table(&["i", "j", "re", "im"]);
    for i in 0..rho.dim() {
        for j in 0..rho.dim() {
            let z = m.get(i, j);
            if z != Complex64::new(0.0, 0.0) {
                rep.row(vec![json!(i), json!(j), num(z.re), num(z.im)]);
            }
        }
    }
    finish(&cfg, rep, out, Format::Json)
}

fn member_sets(t: &QTest) -> Vec<&qrl_core::qtests::QSigmaSet> {
    match t.members() {
        Members::Sets(v) => v.iter().collect(),
        Members::Projections(_) => Vec::new(),
    }
}

fn optional_state(cfg: &mut Config, args: &TestArgs) -> Result<Option<StatePrefix>, Failure> {
    match &args.state {
        Some(p) => Ok(Some(load_descriptor(cfg, "state", p, args.big_n)?.build()?)),
        None => Ok(None),
    }
}

pub fn test_cmd(args: &TestArgs, run: bool, out: &Out) -> Result<(), Failure> {
    let mut cfg = config(if run { "test run" } else { "test build" });
    let mut rep = Report::default();
    match args.builder {
        Builder::Chapter4 => {
            cfg.param("builder", "chapter4").param("m", args.m);
            let t = build_chapter4_mlt(args.m, limits().factored_max_block)?;
            let state = match optional_state(&mut cfg, args)? {
                Some(s) => Some(s),
                None if run => Some(chapter4_prefix(t.n)?),
                None => None,
            };
            rep.set("m", args.m)
                .set("N", t.n)
                .set("tau", t.tau)
                .set("tau_below_2^-m", t.tau < 2f64.powi(-(args.m as i32)));
            rep.table(&["index", "N", "tau", "trace"]);
            let mut last = None;
            for (j, g) in member_sets(&t.test).into_iter().enumerate() {
                let tr = match &state {
                    Some(s) => Some(evaluate(s, g)?),
                    None => None,
                };
                last = tr;
                rep.row(vec![json!(j), json!(chapter4_n_of_m(j)), num(g.tau()), json!(tr)]);
            }
            if run {
                rep.set("trace", last);
            }
        }
        Builder::Lln => {
            let delta = parse_rational(&mut cfg, "delta", args.delta.as_deref())?;
            cfg.param("builder", "lln").param("n_max", args.n_max);
            let t = lln_schnorr_test(&delta, args.n_max)?;
            let state = match optional_state(&mut cfg, args)? {
                Some(s) => Some(s),
                None if run => Some(tracial_prefix(args.n_max)?),
                None => None,
            };
            rep.set("delta", delta.to_string()).set("declared_mass", t.test.declared_mass());
            rep.table(&["n", "count", "tau", "chernoff", "trace"]);
            let Members::Projections(ps) = t.test.members() else { unreachable!() };
            for (l, p) in t.levels.iter().zip(ps) {
                let tr = trace_if(state.as_ref(), p)?;
                rep.row(vec![json!(l.n), json!(l.count.to_string()), num(l.tau), num(l.chernoff), json!(tr)]);
            }
        }
        Builder::Smb => {
            let delta = parse_rational(&mut cfg, "delta", args.delta.as_deref())?;
            let p = args.p.ok_or_else(|| Failure::Core(QrlError::Parse("--p is required".into())))?;
            cfg.param("builder", "smb").param("n_max", args.n_max).param("p", p);
            let t = smb_test(p, &delta, args.n_max)?;
            let state = match optional_state(&mut cfg, args)? {
                Some(s) => Some(s),
                None if run => Some(bernoulli_prefix(p, args.n_max)?),
                None => None,
            };
            rep.set("p", p).set("delta", delta.to_string()).set("declared_mass", t.test.declared_mass());
            rep.table(&["n", "mu_mass", "chernoff", "chernoff_holds", "hoeffding", "trace"]);
            let Members::Projections(ps) = t.test.members() else { unreachable!() };
            for (l, proj) in t.levels.iter().zip(ps) {
                let tr = trace_if(state.as_ref(), proj)?;
                rep.row(vec![
                    json!(l.n),
                    num(l.mu_mass),
                    num(l.chernoff),
                    json!(l.chernoff_holds),
                    num(l.hoeffding),
                    json!(tr),
                ]);
            }
        }
        Builder::Eigenmass => {
            let eps = parse_rational(&mut cfg, "eps", args.eps.as_deref())?;
            let delta = parse_rational(&mut cfg, "delta", args.delta.as_deref())?;
            cfg.param("builder", "eigenmass").param("m", args.m);
            let state = optional_state(&mut cfg, args)?
                .ok_or_else(|| Failure::Core(QrlError::Parse("--state is required for eigenmass".into())))?;
            let t = eigenmass_concentration_test(&state, &eps, &delta, args.m)?;
            rep.set("found", t.is_some());
            rep.table(&["m", "n", "k", "top_mass", "trace", "tau"]);
            for w in t.iter().flat_map(|t| &t.witnesses) {
                rep.row(vec![json!(w.m), json!(w.n), json!(w.k), num(w.top_mass), num(w.trace), num(w.tau)]);
            }
        }
    }
    finish(&cfg, rep, out, Format::Json)
}

fn trace_if(state: Option<&StatePrefix>, p: &qrl_core::qtests::SpecialProjection) -> Result<Option<f64>, Failure> {
    match state {
        Some(s) if p.qubits() <= s.depth() => Ok(Some(level_trace(s, p)?)),
        _ => Ok(None),
    }
}

pub fn measure_premeasure(arg: &StateArg, basis: &str, depth: usize, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("measure premeasure");
    cfg.param("depth", depth);
    let s = load_state(&mut cfg, arg)?;
    let b = load_basis(&mut cfg, basis)?;
    let t = build_premeasure(&s, &b, depth)?;
    let mut rep = Report::default();
    rep.set("depth", depth).set("max_additivity_deviation", t.max_additivity_deviation);
    rep.table(&["tau", "p"]);
    for (tau, p) in t.rows() {
        rep.row(vec![json!(tau.to_string()), num(p)]);
    }
    finish(&cfg, rep, out, Format::Csv)
}

pub fn measure_sample(arg: &StateArg, basis: &str, n: usize, seed: u64, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("measure sample");
    cfg.param("n", n);
    cfg.seed = Some(seed);
    let s = load_state(&mut cfg, arg)?;
    let b = load_basis(&mut cfg, basis)?;
    let x = sample(&s, &b, n, seed)?;
    let mut rep = Report::default();
    rep.set("n", n).set("ones", x.ones());
    rep.table(&["bits"]);
    rep.row(vec![json!(x.to_string())]);
    finish(&cfg, rep, out, Format::Csv)
}

pub fn measure_lln(arg: &StateArg, seed: Option<u64>, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("measure lln");
    cfg.seed = seed;
    let s = load_state(&mut cfg, arg)?;
    let mut rep = Report::default();
    rep.table(&["n", "expected_frequency"]);
    for n in 1..=s.materialized_depth() {
        rep.row(vec![json!(n), num(lln_statistic(s.level(n)?))]);
    }
    if let Some(seed) = seed {
        let x: BitString = sample(&s, &MeasurementSystem::standard(), s.depth(), seed)?;
        rep.set("sampled_length", x.len()).set("sampled_frequency", x.ones() as f64 / x.len().max(1) as f64);
    }
    finish(&cfg, rep, out, Format::Csv)
}

fn load_machine(cfg: &mut Config, path: &Path) -> Result<PrefixFreeMachine, Failure> {
    let bytes = read(path)?;
    cfg.input("machine", &bytes);
    let s = String::from_utf8(bytes).map_err(|e| QrlError::Parse(format!("machine file: {e}")))?;
    Ok(PrefixFreeMachine::from_json(&s)?)
}

pub fn qk_validate(machine: &Path, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("qk validate");
    let m = load_machine(&mut cfg, machine)?;
    let r = m.validate();
    let mut rep = Report::default();
    rep.set("programs", m.programs.len());
    if let Value::Object(fields) = serde_json::to_value(&r).map_err(|e| Failure::Io(e.to_string()))? {
        rep.summary.extend(fields);
    }
    if !r.valid {
        rep.fail("machine is not a valid prefix-free table");
    }
    finish(&cfg, rep, out, Format::Json)
}

pub fn qk_eval(machine: &Path, arg: &StateArg, level: usize, eps: f64, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("qk eval");
    cfg.param("level", level).param("eps", eps);
    let m = load_machine(&mut cfg, machine)?;
    let s = load_state(&mut cfg, arg)?;
    let rho = s.level(level)?;
    let qk = qk_eps(&m, rho, eps)?;
    let qkc = if m.declared_measure.is_some() { Some(qk_c(&m, rho, eps)?) } else { None };
    let mut rep = Report::default();
    rep.set("level", level)
        .set("eps", eps)
        .set("qk_eps", if qk.is_finite() { json!(qk) } else { json!("inf") })
        .set("qk_c", qkc.map(|v| if v.is_finite() { json!(v) } else { json!("inf") }))
        .set("tracial_lower_bound", level as f64 + eps.log2());
    finish(&cfg, rep, out, Format::Json)
}

pub fn qk_count(machine: &Path, s: usize, b: f64, eps: f64, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("qk count");
    cfg.param("s", s).param("B", b).param("eps", eps);
    let m = load_machine(&mut cfg, machine)?;
    let r = counting_check(&m, s, b, eps)?;
    let mut rep = Report::default();
    rep.set("found", r.found).set("bound", r.bound).set("within_bound", r.pass);
    if !r.pass {
        rep.fail(format!("{} vectors exceed the bound {}", r.found, r.bound));
    }
    finish(&cfg, rep, out, Format::Json)
}

pub fn entropy_report(arg: &StateArg, ms: &[usize], out: &Out) -> Result<(), Failure> {
    let mut cfg = config("entropy report");
    cfg.param("m", ms);
    let s = load_state(&mut cfg, arg)?;
    let r = entropy_rate_series(&s)?;
    let mut rep = Report::default();
    rep.set("liminf_estimate", r.liminf_estimate)
        .set("label", r.label)
        .set("rate_nondecreasing", r.rate_nondecreasing)
        .set("excess_strictly_decreasing", r.excess_strictly_decreasing);
    let mut cols: Vec<String> = ["n", "H", "H/n", "H-n"].iter().map(|c| c.to_string()).collect();
    cols.extend(ms.iter().map(|m| format!("S_{m}")));
    rep.columns = cols;
    for row in &r.rows {
        let mut v = vec![json!(row.n), num(row.h), num(row.rate), num(row.excess)];
        for &m in ms {
            let sv = if m < row.n && row.n <= s.materialized_depth() {
                Some(flattened_entropy_bound(s.level(row.n)?, m)?.s)
            } else {
                None
            };
            v.push(json!(sv));
        }
        rep.row(v);
    }
    finish(&cfg, rep, out, Format::Csv)
}

pub fn entropy_bound(arg: &StateArg, m: usize, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("entropy bound");
    cfg.param("m", m);
    let s = load_state(&mut cfg, arg)?;
    let mut rep = Report::default();
    rep.set("m", m);
    rep.table(&["n", "S", "H", "bound", "flattened_H", "holds"]);
    let mut bad = Vec::new();
    for n in m + 1..=s.materialized_depth() {
        let b = flattened_entropy_bound(s.level(n)?, m)?;
        let flat = if m >= 1 { Some(flattened_entropy(b.s, m, n)) } else { None };
        if !b.holds {
            bad.push(n);
        }
        rep.row(vec![json!(n), num(b.s), num(b.entropy), num(b.bound), json!(flat), json!(b.holds)]);
    }
    if !bad.is_empty() {
        rep.fail(format!("bound fails at levels {bad:?}"));
    }
    finish(&cfg, rep, out, Format::Json)
}

pub fn oracle_run(check: &str, seed: u64, scale: usize, out: &Out) -> Result<(), Failure> {
    let mut cfg = config("oracle run");
    cfg.param("check", check).param("scale", scale);
    cfg.seed = Some(seed);
    let c: Check = check.parse()?;
    let d = SweepConfig::default();
    let sc = |x: usize| (x * scale / 100).max(1);
    let sizes = SweepConfig {
        lina_families: sc(d.lina_families),
        lina_samples: sc(d.lina_samples),
        lemma30_trials: sc(d.lemma30_trials),
        kron_trials: sc(d.kron_trials),
        dn_trials: sc(d.dn_trials),
        atomic_trials: sc(d.atomic_trials),
    };
    let outcomes = run_checks(c, seed, &sizes)?;
    let mut rep = Report::default();
    rep.table(&["name", "trials", "violations", "worst_margin", "inconclusive", "passed"]);
    for o in &outcomes {
        rep.row(vec![
            json!(o.name),
            json!(o.trials),
            json!(o.violations),
            num(o.worst_margin),
            json!(o.inconclusive),
            json!(o.passed()),
        ]);
        if !o.passed() {
            rep.fail(format!("{}: {} violations, inconclusive {}", o.name, o.violations, o.inconclusive));
        }
    }
    rep.set("details", outcomes.iter().map(|o| (o.name.clone(), o.details.clone())).collect::<Vec<_>>());
    finish(&cfg, rep, out, Format::Json)
}
