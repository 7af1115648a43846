//! One PASS/FAIL line per acceptance criterion. Checks run modulo a large
//! prime; the documented failures are then confirmed in rational
//! arithmetic. The test itself fails only if the set of failing checks
//! differs from the documented one.

use std::collections::BTreeSet;
use std::io::Write;

use alfeld_core::field::Ctx;
use alfeld_core::geometry::{AlfeldSplit, Tetrahedron};
use alfeld_core::identities::{verify_identity, Identity, TRIALS};
use alfeld_core::linalg::Rational;
use alfeld_core::report::{run, RunConfig, Suite};
use alfeld_core::spaces::{expected_dimension, Forge, Label};
use alfeld_core::verify::{Report, Verdict};

struct Criterion {
    n: usize,
    what: &'static str,
    suite: Suite,
    /// `(check_id, r)` of failures that are findings, not bugs.
    documented: &'static [(&'static str, i64)],
}

const CRITERIA: [Criterion; 8] = [
    Criterion {
        n: 1,
        what: "space dimensions equal their closed forms",
        suite: Suite::Spaces,
        documented: &[("dimension/Z2_1", 1)],
    },
    Criterion { n: 2, what: "local sequences are exact", suite: Suite::Exactness, documented: &[] },
    Criterion { n: 3, what: "dof sets are unisolvent with the expected block counts", suite: Suite::Dofs, documented: &[] },
    Criterion {
        n: 4,
        what: "interpolants commute with the operators",
        suite: Suite::Commute,
        documented: &[("commuting/U/1", 4)],
    },
    Criterion {
        n: 5,
        what: "identities, face exactness and the BGG derivation",
        suite: Suite::Identities,
        documented: &[("identity/face-ibp-fn", 4), ("identity/trf-rotf", 4)],
    },
    Criterion { n: 6, what: "supersmoothness at the split vertices", suite: Suite::Supersmooth, documented: &[] },
    Criterion { n: 7, what: "bubble potentials exist", suite: Suite::Bubbles, documented: &[] },
    Criterion { n: 8, what: "global dimensions, exactness and commuting on meshes", suite: Suite::Global, documented: &[] },
];

fn failures(reports: &[Report]) -> BTreeSet<(String, i64)> {
    reports
        .iter()
        .filter(|r| r.verdict == Verdict::Fail && !r.exploratory)
        .map(|r| (r.check_id.clone(), r.params.r))
        .collect()
}

fn find<'a>(reports: &'a [Report], id: &str, r: i64) -> &'a Report {
    reports.iter().find(|x| x.check_id == id && x.params.r == r).unwrap_or_else(|| panic!("missing {id} r={r}"))
}

/// Diagnostics backing each documented failure, partly in exact arithmetic.
fn confirm(n: usize, reports: &[Report]) {
    match n {
        1 => {
            let rep = find(reports, "dimension/Z2_1", 1);
            // Z2_1 contains the global linear vector fields, so its
            // dimension is at least 12; the closed form gives 3
            assert_eq!(expected_dimension(Label::parse("Z2").unwrap(), 1), Some(3));
            let f = Forge::<Rational>::from_split(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
            assert_eq!(f.space(Label::parse("Z2").unwrap(), 1).unwrap().dim(), 12);
            assert_eq!(rep.witnesses["dim"], 12);
        }
        4 => {
            let rep = find(reports, "commuting/U/1", 4);
            assert_eq!(rep.witnesses["agree"], 0);
            assert!(rep.note.contains("no interpolant on U1 can commute"), "{}", rep.note);
            let r6 = find(reports, "commuting/U/1", 6);
            assert!(r6.passed());
        }
        5 => {
            let c = Ctx::<Rational>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
            for id in [Identity::TraceRotF, Identity::FaceIbpFn] {
                let rep = verify_identity(&c, id, 11).unwrap();
                assert_eq!(rep.witnesses["passed"], 0);
                assert_eq!(rep.witnesses["passed with opposite sign"], (4 * TRIALS) as i64);
            }
        }
        _ => {}
    }
}

#[test]
fn acceptance() {
    let cfg = RunConfig::default();
    let mut mismatched = Vec::new();
    let mut lines = Vec::new();
    for c in &CRITERIA {
        let doc = run(c.suite.name(), &[c.suite], &cfg).unwrap();
        let got = failures(&doc.reports);
        let want: BTreeSet<(String, i64)> = c.documented.iter().map(|(s, r)| (s.to_string(), *r)).collect();
        let claimed = doc.reports.iter().filter(|r| !r.exploratory).count();
        let verdict = if got.is_empty() { "PASS" } else { "FAIL" };
        let mut line = format!(
            "criterion {}: {verdict}  {} ({} of {} claimed checks pass)",
            c.n,
            c.what,
            claimed - got.len(),
            claimed
        );
        if !got.is_empty() {
            let ids: Vec<String> = got.iter().map(|(s, r)| format!("{s} r={r}")).collect();
            line += &format!("; failing: {}", ids.join(", "));
        }
        lines.push(line);
        if got != want {
            mismatched.push(format!("criterion {}: failures {got:?}, documented {want:?}", c.n));
        } else {
            confirm(c.n, &doc.reports);
        }
    }
    // written past the test harness capture so the lines show in plain runs
    let mut out = std::io::stdout().lock();
    for l in &lines {
        writeln!(out, "{l}").unwrap();
    }
    assert!(mismatched.is_empty(), "{}", mismatched.join("\n"));
}
