use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::{json, Value as Json};
use treeharm_core::builder::{build_frequently_universal, build_x_class_witness, verify_memberships};
use treeharm_core::density::{
    disjointness_audit, hit_set, lower_density_estimate, provably_disjoint, upper_density_estimate,
};
use treeharm_core::gen;
use treeharm_core::genericity::{build_vector_universal, combine_and_verify};
use treeharm_core::harmonic::{boundary_trace, martingale_check, DocumentFormat};
use treeharm_core::l0::{DyadicTargets, StepFunctionDocument, Targets};
use treeharm_core::measure::audit_measures;
use treeharm_core::rational::{self, Q};
use treeharm_core::schedule::{self, hit_levels, Schedule};
use treeharm_core::tree::validate;
use treeharm_core::{check_harmonic, Ball, StepFunction, Tree, ValueSpace, Weights};

use crate::config::{load_function, load_tree_args, parse_fractions, parse_indices, read_text, RunConfig};
use crate::report::{annotate, emit, to_report, write_text, Outcome};
use crate::{
    AnalyzeArgs, BuildArgs, BuildXArgs, ExportArgs, Format, GenTreeArgs, ScheduleArgs, SpanArgs, TargetArgs,
    VerifyArgs,
};

impl From<Format> for DocumentFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Dense => DocumentFormat::Dense,
            Format::Compact => DocumentFormat::Compact,
            Format::Auto => DocumentFormat::Auto,
        }
    }
}

fn finish(report: Json, out: Option<&Path>, failures: Vec<String>) -> Result<Outcome> {
    let report = annotate(report);
    let stdout = emit(&report, out)?;
    Ok(Outcome { report, stdout, failures })
}

fn load_target(tree: &Tree, space: ValueSpace, args: &TargetArgs, seed: u64) -> Result<StepFunction> {
    match &args.target {
        Some(path) => {
            let doc: StepFunctionDocument = serde_json::from_str(&read_text(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            StepFunction::from_document(tree, space, &doc).with_context(|| format!("reading target {}", path.display()))
        }
        None => Ok(DyadicTargets::new(space, seed).target(tree, args.target_index)?),
    }
}

fn parse_q(s: &str, what: &str) -> Result<Q> {
    rational::parse(s).with_context(|| format!("bad {what} {s:?}"))
}

pub fn cmd_gen_tree(a: &GenTreeArgs) -> Result<Outcome> {
    let tree = match (a.seed, a.max_branching) {
        (Some(seed), Some(b)) => gen::random_tree(&mut gen::rng(seed), b, a.depth),
        (Some(seed), None) => gen::random_homogeneous(&mut gen::rng(seed), a.branching, a.depth),
        (None, Some(_)) => bail!("--max-branching needs --seed"),
        (None, None) => {
            let w = match &a.weights {
                Some(w) => Weights::Explicit(parse_fractions(w)?),
                None => Weights::Uniform,
            };
            Tree::homogeneous(a.branching, a.depth, w)?
        }
    };
    write_text(&a.out, &tree.to_json()?)?;
    let diagnostics: Vec<String> = validate(&tree).iter().map(|d| d.to_string()).collect();
    let report = json!({
        "out": a.out.display().to_string(),
        "depth": tree.depth(),
        "vertices": tree.vertex_count(),
        "homogeneous": tree.is_homogeneous(),
        "shapes": tree.shapes().len(),
        "diagnostics": diagnostics,
    });
    finish(report, None, diagnostics)
}

/// Rows are listed in full up to this many steps.
const SCHEDULE_ROWS: u64 = 1 << 12;

pub fn cmd_schedule(a: &ScheduleArgs) -> Result<Outcome> {
    let k_max = a.horizon;
    if k_max == 0 {
        bail!("--horizon must be at least 1");
    }
    let mut failures = Vec::new();
    let sched = Schedule::new(k_max);
    let mut dyadic = Vec::new();
    let mut n = 0u32;
    while n < 63 && (1u64 << n) <= k_max {
        let r = schedule::r(1 << n)?;
        let expected = (1u64 << (n + 1)) - 1;
        if r != expected {
            failures.push(format!("r(2^{n}) = {r}, expected {expected}"));
        }
        dyadic.push(json!({"N": n, "k": 1u64 << n, "r": r, "expected": expected, "holds": r == expected}));
        n += 1;
    }
    let bound = *sched.r.last().expect("horizon >= 1");
    let mut levels = Vec::new();
    for m in 1..=4u32 {
        let hl = hit_levels(m, bound)?;
        let expected = rational::pow2_neg(m + 1);
        for c in &hl.checkpoints {
            if c.density != expected {
                failures.push(format!("m = {m}: density {} at r_(2^{}), expected {expected}", c.density, c.exponent));
            }
        }
        levels.push(to_report(&hl)?);
    }
    let rows: Option<Vec<Json>> = (k_max <= SCHEDULE_ROWS)
        .then(|| sched.steps().map(|s| json!({"k": s.k, "ell": s.n, "r": s.r})).collect());
    let report = json!({
        "horizon": k_max,
        "r_horizon": bound,
        "rows": rows,
        "dyadic": dyadic,
        "hit_levels": levels,
    });
    finish(report, a.out.as_deref(), failures)
}

pub fn cmd_build(a: &BuildArgs) -> Result<Outcome> {
    let space = a.space.value_space()?;
    let tree = load_tree_args(&a.tree, a.depth)?;
    let mut config = RunConfig::new(&a.tree, space, a.depth, a.targets_seed)?;
    config.out = a.out.clone();
    config.log = a.log.clone();
    let targets = DyadicTargets::new(space, a.targets_seed);
    let build = build_frequently_universal(&tree, &targets, a.depth)?;
    let mut failures = Vec::new();
    for s in build.log.steps.iter().filter(|s| !s.member) {
        failures.push(format!("step {}: distance {} at level {} is not below {}", s.k, s.achieved_distance, s.r, s.radius));
    }
    let violations = check_harmonic(&tree, &build.f);
    failures.extend(violations.iter().map(|v| v.to_string()));
    let rechecked = verify_memberships(&tree, &build.f, &targets)?;
    failures.extend(rechecked.iter().filter(|m| !m.holds).map(|m| format!("membership at r = {} fails on re-check", m.r)));
    if let Some(out) = &a.out {
        write_text(out, &build.f.to_json(&tree, a.format.into())?)?;
    }
    let report = json!({
        "config": config,
        "node_count": build.f.node_count(),
        "harmonic": violations.is_empty(),
        "memberships_rechecked": rechecked.iter().all(|m| m.holds),
        "log": build.log,
    });
    finish(report, a.log.as_deref(), failures)
}

pub fn cmd_build_x(a: &BuildXArgs) -> Result<Outcome> {
    let space = a.space.value_space()?;
    let tree = load_tree_args(&a.tree, a.depth)?;
    let target = load_target(&tree, space, &a.target, a.targets_seed)?;
    let eps = parse_q(&a.epsilon, "epsilon")?;
    let w = build_x_class_witness(&tree, &target, &eps, a.m, a.depth)?;
    let mut failures = Vec::new();
    if !w.report.holds {
        failures.push(format!("hit fraction {} at N0 = {} is not above {}", w.report.fraction, w.report.checkpoint, w.report.threshold));
    }
    failures.extend(check_harmonic(&tree, &w.f).iter().map(|v| v.to_string()));

    // A second ball far from the first: its hit fraction at N0 must stay
    // below 1/m.
    let near = Ball::new(target.clone(), eps.clone())?;
    let mut audit = Json::Null;
    let mut shift = Q::from_integer(1.into());
    let limit = Q::from_integer((1u64 << 32).into());
    while shift <= limit {
        let c = space.splat(shift.clone());
        let far = Ball::new(target.map(space, |v| v.add(&c)), eps.clone())?;
        if provably_disjoint(&tree, &far, &near)?.0 {
            let n0 = w.report.checkpoint as u64;
            let au = disjointness_audit(&tree, &w.f, &far, &near, n0)?;
            let (far_fraction, bound) = au.complement_bound(n0).expect("checkpoint within horizon");
            let below = far_fraction < Q::new(1.into(), (a.m as i64).into());
            if !au.passed() || far_fraction > bound || !below {
                failures.push(format!("disjointness audit fails at N0 = {n0}: far fraction {far_fraction}, bound {bound}"));
            }
            audit = json!({
                "shift": rational::format(&shift),
                "far_fraction": rational::format(&far_fraction),
                "complement_bound": rational::format(&bound),
                "below_one_over_m": below,
                "passed": au.passed(),
                "audit": au,
            });
            break;
        }
        shift *= Q::from_integer(2.into());
    }
    if let Some(out) = &a.out {
        write_text(out, &w.f.to_json(&tree, DocumentFormat::Auto)?)?;
    }
    let report = json!({
        "epsilon": rational::format(&eps),
        "target_level": target.level(),
        "witness": w.report,
        "disjointness": audit,
    });
    finish(report, a.report.as_deref(), failures)
}

pub fn cmd_span(a: &SpanArgs) -> Result<Outcome> {
    let tree = load_tree_args(&a.tree, a.depth)?;
    let space = ValueSpace::product(a.dim)?;
    let targets = DyadicTargets::new(space, a.targets_seed);
    let (f, log) = build_vector_universal(&tree, a.dim, &targets, a.depth)?;
    let coefficients = parse_fractions(&a.coefficients)?;
    let h = match &a.target {
        Some(path) => {
            let doc: StepFunctionDocument = serde_json::from_str(&read_text(path)?)
                .with_context(|| format!("parsing {}", path.display()))?;
            StepFunction::from_document(&tree, ValueSpace::Scalar, &doc)?
        }
        None => StepFunction::zero(ValueSpace::Scalar),
    };
    let horizon = a.horizon.unwrap_or(f.depth() as u64);
    let (_, span) = combine_and_verify(&tree, &f, &coefficients, &h, a.m, horizon, Some(&targets))?;
    let mut failures = Vec::new();
    if !log.all_members() {
        failures.push("vector build has a failed membership".to_string());
    }
    if !span.inclusion_holds() {
        failures.push(format!("inclusion fails at n = {:?}", span.exceptions));
    }
    if !span.guarantees_met() {
        failures.push("a guaranteed level is missing from the left set".to_string());
    }
    let report = json!({
        "dim": a.dim,
        "depth": f.depth(),
        "build_members": log.all_members(),
        "inclusion_holds": span.inclusion_holds(),
        "guarantees_met": span.guarantees_met(),
        "span": span,
    });
    finish(report, a.out.as_deref(), failures)
}

pub fn cmd_analyze(a: &AnalyzeArgs) -> Result<Outcome> {
    let (tree, f) = load_function(&a.tree, &a.function)?;
    let target = load_target(&tree, f.space(), &a.target, a.targets_seed)?;
    let eps = parse_q(&a.epsilon, "epsilon")?;
    let horizon = a.horizon.unwrap_or(f.depth() as u64);
    let hits = hit_set(&tree, &f, &target, &eps, horizon)?;
    let checkpoints = a.checkpoints.as_deref().map(parse_indices).transpose()?;
    let lower = lower_density_estimate(&hits, checkpoints.as_deref())?;
    let upper = upper_density_estimate(&hits, checkpoints.as_deref())?;
    let theta = a.theta.as_deref().map(parse_indices).transpose()?.map(|t| hits.restrict(&t));
    if let Some(path) = &a.csv {
        let mut csv = String::from("n,distance,distance_approx,hit,density\n");
        for (n, d) in hits.distances.iter().enumerate() {
            let n = n as u64;
            writeln!(
                csv,
                "{n},{d},{},{},{}",
                rational::approx(d),
                hits.contains(n),
                hits.profile[n as usize]
            )?;
        }
        write_text(path, &csv)?;
    }
    let report = json!({
        "epsilon": rational::format(&eps),
        "target_level": target.level(),
        "hits": hits,
        "lower_density": lower,
        "upper_density": upper,
        "theta_hits": theta,
    });
    finish(report, a.out.as_deref(), vec![])
}

pub fn cmd_verify(a: &VerifyArgs) -> Result<Outcome> {
    let (tree, f) = load_function(&a.tree, &a.function)?;
    let mut failures = Vec::new();
    let tree_diagnostics: Vec<String> = validate(&tree).iter().map(|d| d.to_string()).collect();
    failures.extend(tree_diagnostics.iter().cloned());
    let harmonicity: Vec<String> = check_harmonic(&tree, &f).iter().map(|v| v.to_string()).collect();
    failures.extend(harmonicity.iter().cloned());

    let top = f.interior_depth().map_or(f.depth(), |i| (i + 1).min(f.depth()));
    let mut checked = 0u64;
    let mut broken = Vec::new();
    for m in 1..=top {
        for n in 0..m {
            checked += 1;
            if !martingale_check(&tree, &f, n, m)? {
                broken.push([n, m]);
            }
        }
    }
    if !broken.is_empty() {
        failures.push(format!("martingale identity fails for {} of {checked} level pairs", broken.len()));
    }
    let measures = audit_measures(&tree);
    failures.extend(measures.failures.iter().cloned());

    let memberships = match a.targets_seed {
        Some(seed) => {
            let ms = verify_memberships(&tree, &f, &DyadicTargets::new(f.space(), seed))?;
            failures.extend(ms.iter().filter(|m| !m.holds).map(|m| format!("membership at r = {} fails", m.r)));
            Some(ms)
        }
        None => None,
    };
    let report = json!({
        "function": a.function.display().to_string(),
        "depth": f.depth(),
        "tree": tree_diagnostics,
        "harmonicity": harmonicity,
        "martingale": {"checked": checked, "failures": broken},
        "measures": {"levels": measures.totals.len(), "failures": measures.failures},
        "memberships": memberships,
        "passed": failures.is_empty(),
    });
    finish(report, a.out.as_deref(), failures)
}

pub fn cmd_export(a: &ExportArgs) -> Result<Outcome> {
    let (tree, f) = load_function(&a.tree, &a.function)?;
    let text = match a.trace {
        Some(n) => serde_json::to_string_pretty(&boundary_trace(&tree, &f, n)?.to_document(&tree))?,
        None => f.to_json(&tree, a.format.into())?,
    };
    let stdout = match &a.out {
        Some(p) => {
            write_text(p, &text)?;
            None
        }
        None => Some(text),
    };
    Ok(Outcome { report: Json::Null, stdout, failures: vec![] })
}

