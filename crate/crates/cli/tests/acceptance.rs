//! Acceptance criteria 1-11, one line per criterion.

use std::fs;
use std::panic;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use treeharm_cli::{cmd_build, BuildArgs, Format, SpaceArgs, SpaceKind, TreeArgs};
use treeharm_core::builder::{build_frequently_universal, build_x_class_witness, extend_step, translate, verify_memberships};
use treeharm_core::density::{disjointness_audit, hit_set, provably_disjoint};
use treeharm_core::gen;
use treeharm_core::genericity::{build_vector_universal, combine_and_verify, constant_tail_harmonic, densify, shifted_hit_equality};
use treeharm_core::harmonic::{all_traces, boundary_trace};
use treeharm_core::l0::{conditional_expectation, DyadicTargets, Targets};
use treeharm_core::measure::{audit_measures, level_partition, refinement_map, sector_measure};
use treeharm_core::rational::{int, pow2_neg, q};
use treeharm_core::schedule::{count_ell, ell, hit_levels, r, Schedule};
use treeharm_core::{
    check_harmonic, Ball, HarmonicFunction, StepFunction, Tree, Value, ValueSpace, Vertex, VertexEnumeration, Weights, Q,
};

type Check = fn() -> Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn t2(depth: usize) -> Tree {
    Tree::homogeneous(2, depth, Weights::Uniform).unwrap()
}

fn scalar(x: Q) -> Value {
    Value::scalar(x)
}

fn c1_scheduler() -> Result<String, String> {
    let start = Instant::now();
    let sched = Schedule::new(1 << 20);
    for n in 0..=20u32 {
        let k = 1u64 << n;
        let expected = (1u64 << (n + 1)) - 1;
        ensure!(r(k).unwrap() == expected, "r(2^{n}) = {}", r(k).unwrap());
        ensure!(sched.r[k as usize - 1] == expected, "partial sum at 2^{n}");
    }
    for n in 1..=16u32 {
        for m in 1..=n {
            let brute = (1..=1u64 << n).filter(|&k| {
                let mut v = 0;
                let mut k = k;
                while k % 2 == 0 {
                    k /= 2;
                    v += 1;
                }
                v + 1 == m
            });
            let c = brute.count() as u64;
            ensure!(c == 1 << (n - m), "brute count N={n} m={m}: {c}");
            ensure!(count_ell(n, m).unwrap() == c, "count_ell({n},{m})");
        }
        for k in 1..(1u64 << n) {
            ensure!(ell(k + (1 << n)).unwrap() == ell(k).unwrap(), "shift at k={k}, N={n}");
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(5), "took {took:?}");
    Ok(format!("{took:.2?}"))
}

fn c2_checkpoints() -> Result<String, String> {
    let mut checked = 0;
    for m in 1..=4u32 {
        let hl = hit_levels(m, r(1 << 18).unwrap()).unwrap();
        for n in m..=18 {
            let cp = hl
                .checkpoints
                .iter()
                .find(|c| c.exponent == n)
                .ok_or(format!("no checkpoint m={m} N={n}"))?;
            ensure!(cp.horizon == (1u64 << (n + 1)) - 1, "horizon m={m} N={n}");
            ensure!(cp.count == 1 << (n - m), "count m={m} N={n}");
            ensure!(cp.density == pow2_neg(m + 1), "density {} at m={m} N={n}", cp.density);
            checked += 1;
        }
    }
    Ok(format!("{checked} checkpoints"))
}

fn c3_measures() -> Result<String, String> {
    let mut rng = gen::rng(3);
    let mut trees = vec![t2(10), Tree::homogeneous(3, 8, Weights::Uniform).unwrap(), Tree::homogeneous(4, 6, Weights::Uniform).unwrap()];
    for b in 2..=4 {
        trees.push(gen::random_homogeneous(&mut rng, b, 10 - 2 * (b - 2)));
        trees.push(gen::random_tree(&mut rng, b, 10 - 2 * (b - 2)));
    }
    for t in &trees {
        let audit = audit_measures(t);
        ensure!(audit.passed(), "{:?}", audit.failures);
        for n in 0..=t.depth() {
            let p = level_partition(t, n).unwrap();
            ensure!(p.total() == int(1), "level {n} total {}", p.total());
            if n < t.depth() {
                let pushed = refinement_map(t, n, n + 1).unwrap().push_forward(&level_partition(t, n + 1).unwrap()).unwrap();
                ensure!(pushed == p, "fibers at level {n}");
            }
        }
    }
    // depth 10 at branching 4 through shape classes only
    let big = Tree::homogeneous(4, 10, Weights::Explicit(vec![q(1, 10), q(2, 10), q(3, 10), q(4, 10)])).unwrap();
    ensure!(audit_measures(&big).passed(), "branching 4 depth 10");
    Ok(format!("{} trees", trees.len() + 1))
}

fn c4_martingale() -> Result<String, String> {
    let mut rng = gen::rng(4);
    let mut pairs = 0;
    for i in 0..50 {
        let t = if i % 2 == 0 { gen::random_homogeneous(&mut rng, 2, 10) } else { gen::random_tree(&mut rng, 2, 10) };
        let space = if i % 5 == 0 { ValueSpace::product(2).unwrap() } else { ValueSpace::Scalar };
        let f = gen::random_harmonic(&t, space, 10, &mut rng);
        ensure!(check_harmonic(&t, &f).is_empty(), "generator produced a non-harmonic function");
        let traces = all_traces(&t, &f, 10).unwrap();
        for m in 1..=10 {
            for n in 0..m {
                ensure!(conditional_expectation(&t, &traces[m], n).unwrap() == traces[n], "instance {i}: E[w_{m} | M_{n}] != w_{n}");
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs"))
}

fn c5_extension() -> Result<String, String> {
    let mut rng = gen::rng(5);
    for i in 0..100u64 {
        let s = (i % 4) as usize;
        let n = 1 + (i / 4 % 4) as usize;
        let t = match i % 3 {
            0 => gen::random_tree(&mut rng, 3, s + n),
            1 => gen::random_homogeneous(&mut rng, 2, s + n + 1),
            _ => t2(s + n),
        };
        let space = if i % 7 == 0 { ValueSpace::product(2).unwrap() } else { ValueSpace::Scalar };
        let phi = gen::random_harmonic(&t, space, s, &mut rng);
        let h = gen::random_step(&mut rng, &t, space, (i as usize) % (s + n + 1));
        let (psi, rep) = extend_step(&t, &phi, &h, n).map_err(|e| format!("instance {i}: {e}"))?;
        ensure!(psi.truncate(s).unwrap() == phi, "instance {i}: not an extension");
        ensure!(psi.depth() == s + n && psi.interior_depth() == Some(s + n - 1), "instance {i}: depth");
        ensure!(check_harmonic(&t, &psi).is_empty(), "instance {i}: harmonicity");
        let bound = pow2_neg(n as u32);
        for v in t.level_range(s).map(Vertex) {
            let w = rep.sacrificed(&t, v).unwrap();
            let geo = t.geodesic(v, w).unwrap();
            let p = geo.windows(2).fold(int(1), |acc, e| acc * t.weight(e[0], e[1]));
            ensure!(p <= bound, "instance {i}: path probability {p} at {}", v.0);
            ensure!(sector_measure(&t, w).unwrap() <= sector_measure(&t, v).unwrap() * &bound, "instance {i}: sector mass");
        }
        let d = treeharm_core::l0_distance(&t, &boundary_trace(&t, &psi, s + n).unwrap(), &h).unwrap();
        ensure!(d == rep.achieved_distance && d < bound, "instance {i}: distance {d}");
    }
    Ok("100 instances".into())
}

fn c6_build() -> Result<String, String> {
    let start = Instant::now();
    let t = t2(31);
    let targets = DyadicTargets::new(ValueSpace::Scalar, 0);
    let b = build_frequently_universal(&t, &targets, 31).map_err(|e| e.to_string())?;
    ensure!(b.log.steps.len() == 16, "{} steps", b.log.steps.len());
    ensure!(b.log.all_members(), "logged membership fails");
    let ms = verify_memberships(&t, &b.f, &targets).unwrap();
    ensure!(ms.len() == 16 && ms.iter().all(|m| m.holds), "re-verified membership fails");
    ensure!(check_harmonic(&t, &b.f).is_empty(), "not harmonic");
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(30), "took {took:?}");
    Ok(format!("16 memberships, {took:.2?}"))
}

fn c7_translation() -> Result<String, String> {
    let t = t2(16);
    let targets = DyadicTargets::new(ValueSpace::Scalar, 0);
    let f0 = build_frequently_universal(&t, &targets, 15).unwrap().f;
    let depth = f0.depth() as u64;
    ensure!(depth == 15, "depth {depth}");
    let mut rng = gen::rng(7);
    let mut compared = 0;
    for trial in 0..6 {
        let phi = gen::random_harmonic(&t, ValueSpace::Scalar, 1 + trial % 4, &mut rng);
        let n0 = phi.constant_tail_level(&t) as u64;
        let g = translate(&t, &f0, &phi).unwrap();
        ensure!(check_harmonic(&t, &g).is_empty(), "translate not harmonic");
        let shift = boundary_trace(&t, &phi, n0 as usize).unwrap();
        for k in 1..=8 {
            let h = targets.target(&t, k).unwrap();
            for eps in [q(1, 2), q(1, 4), pow2_neg(ell(k).unwrap())] {
                let lhs = hit_set(&t, &g, &h, &eps, depth).unwrap().window(n0, depth);
                let rhs = hit_set(&t, &f0, &h.sub(&shift).unwrap(), &eps, depth).unwrap().window(n0, depth);
                ensure!(lhs == rhs, "trial {trial}, k {k}: {lhs:?} != {rhs:?}");
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} hit sets equal beyond n0"))
}

fn c8_x_witness() -> Result<String, String> {
    let t = t2(16);
    let target = StepFunction::from_sector_values(&t, ValueSpace::Scalar, 1, vec![scalar(int(2)), scalar(int(-1))]).unwrap();
    let mut out = Vec::new();
    for (m, eps) in [(2u32, q(1, 4)), (4, q(1, 4)), (4, q(1, 8))] {
        let w = build_x_class_witness(&t, &target, &eps, m, 16).map_err(|e| e.to_string())?;
        let n0 = w.report.checkpoint as u64;
        let one_over_m = Q::new(1.into(), (m as i64).into());
        ensure!(w.report.fraction > int(1) - &one_over_m, "m={m}: fraction {} at N0={n0}", w.report.fraction);
        let near = Ball::new(target.clone(), eps.clone()).unwrap();
        let far = Ball::new(target.map(ValueSpace::Scalar, |v| v.add(&scalar(int(4)))), eps.clone()).unwrap();
        ensure!(provably_disjoint(&t, &far, &near).unwrap().0, "balls not disjoint");
        let audit = disjointness_audit(&t, &w.f, &far, &near, n0).unwrap();
        ensure!(audit.passed(), "m={m}: audit {audit:?}");
        let (far_fraction, bound) = audit.complement_bound(n0).unwrap();
        ensure!(far_fraction <= bound && far_fraction < one_over_m, "m={m}: far fraction {far_fraction}");
        out.push(format!("m={m} N0={n0} {}", w.report.fraction));
    }
    Ok(out.join(", "))
}

fn c9_span() -> Result<String, String> {
    let t = t2(31);
    let space = ValueSpace::product(4).unwrap();
    let targets = DyadicTargets::new(space, 0);
    let (f, log) = build_vector_universal(&t, 4, &targets, 31).map_err(|e| e.to_string())?;
    ensure!(log.all_members(), "vector build membership fails");
    let mut rng = gen::rng(9);
    let mut nonempty = 0;
    for trial in 0..20u64 {
        let s = 1 + (trial % 4) as usize;
        let mut a: Vec<Q> = (0..s).map(|_| gen::random_value(&mut rng, ValueSpace::Scalar).0.remove(0)).collect();
        if a[s - 1] == int(0) {
            a[s - 1] = q(3, 2);
        }
        let h = if trial % 2 == 0 {
            StepFunction::zero(ValueSpace::Scalar)
        } else {
            gen::random_step(&mut rng, &t, ValueSpace::Scalar, 1)
        };
        let m = 1 + (trial % 4) as u32;
        let (g, rep) = combine_and_verify(&t, &f, &a, &h, m, 31, Some(&targets)).map_err(|e| e.to_string())?;
        ensure!(check_harmonic(&t, &g).is_empty(), "trial {trial}: combination not harmonic");
        ensure!(rep.inclusion_holds(), "trial {trial}: exceptions {:?}", rep.exceptions);
        ensure!(rep.guarantees_met(), "trial {trial}: guaranteed {:?} vs {:?}", rep.guaranteed, rep.vee_hits);
        if !rep.guaranteed.is_empty() {
            ensure!(!rep.vee_hits.is_empty(), "trial {trial}: empty left set");
            nonempty += 1;
        }
    }
    Ok(format!("20 vectors, zero exceptions, {nonempty} with guaranteed hits"))
}

fn c10_densify() -> Result<String, String> {
    let t = t2(15);
    let targets = DyadicTargets::new(ValueSpace::product(3).unwrap(), 0);
    let (f, _) = build_vector_universal(&t, 3, &targets, 15).map_err(|e| e.to_string())?;
    let depth = f.depth();
    let phis = vec![
        constant_tail_harmonic(&t, 2, depth, |x| int(x.0 as i64 % 3)).unwrap(),
        constant_tail_harmonic(&t, 1, depth, |x| if x.0 == 1 { int(5) } else { q(-1, 2) }).unwrap(),
        constant_tail_harmonic(&t, 3, depth, |x| q(x.0 as i64, 7)).unwrap(),
    ];
    let d = densify(&t, &f, &phis, &VertexEnumeration::full(&t)).map_err(|e| e.to_string())?;
    for c in &d.components {
        ensure!(c.holds, "component {}: {} + {} not below {}", c.index, c.sum, c.tail_bound, c.bound);
    }
    ensure!(check_harmonic(&t, d.sum.as_function()).is_empty(), "F + G not harmonic");
    let space = ValueSpace::product(3).unwrap();
    let centers = [
        StepFunction::zero(space),
        StepFunction::constant(space, Value(vec![int(1), q(-1, 2), int(0)])).unwrap(),
        d.sum.trace(&t, depth).unwrap(),
    ];
    let mut checks = 0;
    for center in centers {
        for radius in [q(1, 2), q(1, 8)] {
            let ball = Ball::new(center.clone(), radius).unwrap();
            let check = shifted_hit_equality(&t, &d, &f, &ball, depth as u64).unwrap();
            ensure!(check.equal(), "{:?} != {:?}", check.shifted, check.translated);
            checks += 1;
        }
    }
    Ok(format!("L = {}, {checks} shifted hit sets equal", d.shift_level))
}

fn c11_determinism() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let args = |tag: &str| BuildArgs {
        tree: TreeArgs { tree: None, branching: 2, weights: Some("1/3,2/3".into()) },
        space: SpaceArgs { space: SpaceKind::Product, dim: 2 },
        depth: 15,
        targets_seed: 11,
        out: Some(dir.path().join(format!("f-{tag}.json"))),
        log: Some(dir.path().join(format!("log-{tag}.json"))),
        format: Format::Auto,
    };
    for tag in ["a", "b"] {
        let outcome = cmd_build(&args(tag)).map_err(|e| e.to_string())?;
        ensure!(outcome.passed(), "{:?}", outcome.failures);
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    ensure!(read("f-a.json") == read("f-b.json"), "function files differ");
    ensure!(read("log-a.json") == read("log-b.json"), "logs differ");
    let f = HarmonicFunction::from_json(&Tree::homogeneous(2, 15, Weights::Explicit(vec![q(1, 3), q(2, 3)])).unwrap(), &String::from_utf8(read("f-a.json")).unwrap())
        .map_err(|e| e.to_string())?;
    Ok(format!("{} bytes + {} bytes identical, {} nodes", read("f-a.json").len(), read("log-a.json").len(), f.node_count()))
}

fn main() -> ExitCode {
    let criteria: [(&str, Check); 11] = [
        ("scheduler identities", c1_scheduler),
        ("checkpoint density", c2_checkpoints),
        ("measure consistency", c3_measures),
        ("martingale", c4_martingale),
        ("extension step", c5_extension),
        ("frequently universal build", c6_build),
        ("translation density mechanics", c7_translation),
        ("X-class witness", c8_x_witness),
        ("span inclusion", c9_span),
        ("densification", c10_densify),
        ("determinism", c11_determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = panic::catch_unwind(check).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let took = start.elapsed();
        match result {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{took:.2?}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {msg} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
