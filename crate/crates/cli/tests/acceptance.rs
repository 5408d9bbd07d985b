//! Acceptance checks for the bundled elevator experiment and the oracle-backed
//! properties. Prints one PASS/FAIL line per criterion.

#[path = "../../core/tests/support/oracles.rs"]
mod oracles;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use osd_core::cidg::{compute_postdominators, derive_control_dependences};
use osd_core::executor::{enumerate_inputs, parse_domains, Coverage, HaltReason, DEFAULT_BUDGET, DEFAULT_ENUMERATION_CAP};
use osd_core::localizer::{
    align, build_comparison_matrix, coverage_distance, find_divergence, generate_bug_report, select_nearest_pass,
    PathStep,
};
use osd_core::pipeline::localize_against;
use osd_core::statechart::build_transition_table;
use osd_core::{
    analyze, localize, parse_model, run_test, Analysis, Expr, LocalizeError, ProgramModel, StateChart, StateLabel,
    TestCase, TestSuite, Verdict,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)
}

fn read(name: &str) -> String {
    std::fs::read_to_string(corpus(name)).unwrap()
}

fn elevator() -> ProgramModel {
    parse_model(&read("elevator.json")).unwrap()
}

fn elevator_analysis(m: &ProgramModel) -> Analysis {
    let suite = enumerate_inputs(
        &parse_domains("floor=0..2,req=0..2").unwrap(),
        m.expect().unwrap(),
        DEFAULT_ENUMERATION_CAP,
    )
    .unwrap();
    analyze(m, &suite, Some("Control"), DEFAULT_BUDGET).unwrap()
}

const EXPECTED_TABLE: [(&str, &str, &str); 9] = [
    ("<0,0>", "+++++-----------", "Pass"),
    ("<0,1>", "++++-+++++----++", "Fail"),
    ("<0,2>", "++++-+++--+---++", "Pass"),
    ("<1,0>", "++++-+-----+++++", "Pass"),
    ("<1,1>", "+++++-----------", "Pass"),
    ("<1,2>", "++++-+++--+---++", "Pass"),
    ("<2,0>", "++++-+-----+++++", "Pass"),
    ("<2,1>", "++++-+-----+++++", "Pass"),
    ("<2,2>", "+++++-----------", "Pass"),
];

fn decision_table() -> Check {
    let m = elevator();
    let a = elevator_analysis(&m);
    let order: Vec<&str> = a.table.node_order.iter().map(|n| n.as_str()).collect();
    ensure!(
        order == ["CE5", "E6", "S7", "S8", "S9", "S10", "S11", "S12", "S13", "S14", "S15", "S16", "S17", "S18", "S19", "S20"],
        "node order {order:?}"
    );
    ensure!(a.table.rows.len() == 9, "{} rows", a.table.rows.len());
    for (row, (id, marks, verdict)) in a.table.rows.iter().zip(EXPECTED_TABLE) {
        ensure!(row.case_id == id, "row {} where {id} expected", row.case_id);
        ensure!(row.marks == marks, "{id}: marks {} != {marks}", row.marks);
        ensure!(format!("{:?}", row.verdict) == verdict, "{id}: verdict {:?}", row.verdict);
    }
    Ok(())
}

fn nearest_pass() -> Check {
    let m = elevator();
    let a = elevator_analysis(&m);
    let sel = select_nearest_pass(&a.traces).map_err(|e| e.to_string())?;
    ensure!(sel.failing == "<0,1>", "failing {}", sel.failing);
    ensure!(sel.distance == 3, "distance {}", sel.distance);
    let witnesses: BTreeSet<&str> = sel.witnesses.iter().map(|w| w.case_id.as_str()).collect();
    ensure!(witnesses == BTreeSet::from(["<0,2>", "<1,2>"]), "witnesses {witnesses:?}");
    ensure!(witnesses.contains(sel.chosen.as_str()), "chosen {} not a witness", sel.chosen);
    let expected = [
        ("<0,0>", 8), ("<0,2>", 3), ("<1,0>", 7), ("<1,1>", 8), ("<1,2>", 3), ("<2,0>", 7), ("<2,1>", 7), ("<2,2>", 8),
    ];
    let got: Vec<(&str, usize)> = sel.candidates.iter().map(|c| (c.case_id.as_str(), c.distance)).collect();
    ensure!(got == expected, "distances {got:?}");
    Ok(())
}

fn divergence() -> Check {
    let m = elevator();
    let a = elevator_analysis(&m);
    let sel = select_nearest_pass(&a.traces).map_err(|e| e.to_string())?;
    for witness in ["<0,2>", "<1,2>"] {
        let loc = localize_against(&m, &a, &sel, witness).map_err(|e| e.to_string())?;
        let fail_only: Vec<(&str, StateLabel)> = loc.report.fail_only.iter().map(|s| (s.node.as_str(), s.state)).collect();
        let pass_only: Vec<&str> = loc.report.pass_only.iter().map(|s| s.node.as_str()).collect();
        ensure!(
            fail_only == [("S13", StateLabel::Gu), ("S14", StateLabel::Do)],
            "{witness}: fail_only {fail_only:?}"
        );
        ensure!(pass_only == ["S15"], "{witness}: pass_only {pass_only:?}");
    }
    Ok(())
}

fn bug_report() -> Check {
    let m = elevator();
    let loc = localize(&m, &elevator_analysis(&m), None).map_err(|e| e.to_string())?;
    ensure!(loc.report.error_lines() == [13, 14], "lines {:?}", loc.report.error_lines());
    let text = loc.report.to_text(&m);
    ensure!(text.contains("Error detected at line 13 and 14"), "text report:\n{text}");
    let out = Command::new(env!("CARGO_BIN_EXE_osd"))
        .args(["localize", "--model"])
        .arg(corpus("elevator.json"))
        .args(["--enumerate", "floor=0..2,req=0..2", "--class", "Control"])
        .env_remove("OSD_FORMAT")
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "cli exit {:?}", out.status.code());
    ensure!(String::from_utf8_lossy(&out.stdout).contains("Error detected at line 13 and 14"), "cli report lacks lines");
    Ok(())
}

fn transition_table() -> Check {
    let chart = StateChart::from_json(&read("elevator_chart.json")).map_err(|e| e.to_string())?;
    let rows = build_transition_table(&chart);
    let expected = [
        ("Id", "(== req floor)", [0, 0, 1, 0], "Id"),
        ("Id", "(> req floor)", [1, 0, 0, 0], "Gu"),
        ("Id", "(< req floor)", [0, 1, 0, 0], "Gd"),
        ("Gu", "(> req floor)", [1, 0, 0, 0], "Gu"),
        ("Gu", "(not (> req floor))", [0, 0, 1, 0], "Do"),
        ("Do", "(< timer 10)", [0, 0, 1, 1], "Do"),
        ("Do", "(not (< timer 10))", [0, 0, 1, 0], "Id"),
        ("Gd", "(< req floor)", [0, 1, 0, 0], "Gd"),
        ("Gd", "(not (< req floor))", [0, 0, 1, 0], "Do"),
    ];
    ensure!(rows.len() == expected.len(), "{} rows", rows.len());
    for (i, (row, (from, cond, action, to))) in rows.iter().zip(expected).enumerate() {
        let got = (row.initial.to_string(), row.condition.to_string(), row.action.bits(), row.final_state.to_string());
        ensure!(got == (from.to_string(), cond.to_string(), action, to.to_string()), "row {i}: {got:?}");
    }
    Ok(())
}

fn control_dependence_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0x05d_c1d9);
    let mut edges = 0;
    for i in 0..200 {
        let m = oracles::random_model(&mut rng, 30);
        let pdt = compute_postdominators(&m).map_err(|e| e.to_string())?;
        let got: BTreeSet<_> = derive_control_dependences(&m, &pdt)
            .into_iter()
            .map(|e| (e.governing.to_string(), e.dependent.to_string(), e.branch))
            .collect();
        let want = oracles::brute_control_dependences(&m);
        ensure!(got == want, "graph {i}: derived {got:?} oracle {want:?}");
        edges += want.len();
    }
    ensure!(edges > 0, "no control dependences generated");
    Ok(())
}

fn alignment_oracle() -> Check {
    let mut rng = StdRng::seed_from_u64(0xa119);
    let states = [StateLabel::Id, StateLabel::Gu, StateLabel::Gd, StateLabel::Do];
    for i in 0..500 {
        let seq = |rng: &mut StdRng| -> Vec<(u8, StateLabel)> {
            let len = rng.gen_range(0..=12);
            (0..len).map(|_| (rng.gen_range(0..4), states[rng.gen_range(0..4)])).collect()
        };
        let (a, b) = (seq(&mut rng), seq(&mut rng));
        let path = align(&a, &b);
        let matched = path.iter().filter(|s| matches!(s, PathStep::Match { .. })).count();
        let want = oracles::brute_lcs_len(&a, &b);
        ensure!(matched == want, "pair {i}: aligned {matched}, LCS {want}");
        ensure!(path.len() == a.len() + b.len() - matched, "pair {i}: path does not cover both sequences");
    }
    Ok(())
}

fn properties() -> Check {
    let mut rng = StdRng::seed_from_u64(8);
    for _ in 0..10_000 {
        let n = rng.gen_range(0..=20);
        let mut v = || (0..n).map(|_| rng.gen_bool(0.5)).collect::<Vec<bool>>();
        let (x, y, z) = (v(), v(), v());
        let d = |a: &[bool], b: &[bool]| coverage_distance(a, b).unwrap();
        ensure!(d(&x, &x) == 0, "d(x,x) != 0");
        ensure!(d(&x, &y) == d(&y, &x), "asymmetric");
        ensure!(d(&x, &z) <= d(&x, &y) + d(&y, &z), "triangle inequality");
    }

    let m = elevator();
    let suite = TestSuite::from_json(&read("elevator_suite.json")).map_err(|e| e.to_string())?;
    let mut cases: Vec<(ProgramModel, TestCase)> = suite.cases.iter().map(|c| (m.clone(), c.clone())).collect();
    for seed in 0..200u64 {
        let rm = oracles::random_model(&mut StdRng::seed_from_u64(seed), 20);
        let tc = TestCase {
            id: format!("r{seed}"),
            assignments: [("a".to_string(), (seed % 4) as i64), ("b".to_string(), (seed / 4 % 4) as i64)].into_iter().collect(),
            inputs: vec![],
            expect: Expr::parse("(> c 0)").unwrap(),
        };
        cases.push((rm, tc));
    }
    for (model, tc) in &cases {
        let t = run_test(model, tc, 2_000).map_err(|e| e.to_string())?;
        let again = run_test(model, tc, 2_000).map_err(|e| e.to_string())?;
        ensure!(t.to_json() == again.to_json(), "{}: rerun differs", tc.id);
        for (id, cov) in &t.coverage {
            ensure!((*cov == Coverage::Executed) == t.executed.contains(id), "{}: coverage of {id} incoherent", tc.id);
        }
        if t.halt_reason == HaltReason::HaltFlag {
            for budget in [t.steps, t.steps + 1, 2 * t.steps + 100] {
                let longer = run_test(model, tc, budget).map_err(|e| e.to_string())?;
                ensure!(longer == t, "{}: budget {budget} changes the trace", tc.id);
            }
        }
    }
    Ok(())
}

fn degenerate() -> Check {
    let out = Command::new(env!("CARGO_BIN_EXE_osd"))
        .args(["localize", "--model"])
        .arg(corpus("elevator.json"))
        .arg("--suite")
        .arg(corpus("elevator_all_pass_suite.json"))
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(out.status.code() == Some(2), "all-pass exit {:?}", out.status.code());
    ensure!(String::from_utf8_lossy(&out.stderr).contains("no failing test"), "all-pass stderr");

    let m = elevator();
    let a = elevator_analysis(&m);
    let all_pass: Vec<_> = a.traces.iter().filter(|t| t.verdict == Verdict::Pass).cloned().collect();
    ensure!(select_nearest_pass(&all_pass) == Err(LocalizeError::NoFailingTest), "all-pass selection");
    let all_fail: Vec<_> = a
        .traces
        .iter()
        .cloned()
        .map(|mut t| {
            t.verdict = Verdict::Fail;
            t
        })
        .collect();
    ensure!(select_nearest_pass(&all_fail) == Err(LocalizeError::NoPassingTest), "all-fail selection");

    let pass = a.traces.iter().find(|t| t.case_id == "<0,2>").unwrap().clone();
    let mut fail = pass.clone();
    fail.case_id = "twin".into();
    fail.verdict = Verdict::Fail;
    let traces = vec![pass.clone(), fail.clone()];
    let sel = select_nearest_pass(&traces).map_err(|e| e.to_string())?;
    ensure!(sel.distance == 0, "identical runs at distance {}", sel.distance);
    let div = find_divergence(&build_comparison_matrix(&pass, &fail));
    ensure!(div.fail_only.is_empty() && div.pass_only.is_empty(), "divergence {div:?}");
    let report = generate_bug_report(&m, &sel, &div, &traces).map_err(|e| e.to_string())?;
    ensure!(report.fail_only.is_empty() && report.pass_only.is_empty(), "report not empty");
    ensure!(report.error_lines().is_empty(), "report names lines");
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("decision table reproduces the expected grid", decision_table),
        ("nearest passing witnesses and distances", nearest_pass),
        ("divergence for both tied witnesses", divergence),
        ("bug report names lines 13 and 14", bug_report),
        ("transition table rows", transition_table),
        ("control dependence vs brute force on 200 random CFGs", control_dependence_oracle),
        ("alignment vs brute-force LCS on 500 random pairs", alignment_oracle),
        ("metric, determinism, coherence and budget properties", properties),
        ("degenerate suites and identical runs", degenerate),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(()) => println!("PASS criterion {}: {name}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {why}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
