//! Suites of checks, run once per prime field (or exactly), merged into
//! one versioned JSON document plus a plain-text table.

use std::fmt::Write as _;
use std::time::Instant;

use alfeld_linalg::{par, rational_to_string, Fp0, Fp1, Fp2, Fp3, Rational, Scalar, PRIMES};
use serde::Serialize;

use crate::dofs::{check_unisolvent, window};
use crate::error::{CoreError, Result};
use crate::geometry::{AlfeldSplit, Tetrahedron};
use crate::identities::{bgg_derive, face_exactness_check, verify_identity, Identity};
use crate::mesh::{check_global, check_global_commuting, MeshComplex, MeshForge, BUILTIN};
use crate::spaces::{expected_dimension, Family, Forge, Label};
use crate::verify::{
    characterize_u1, check_bubble_potentials, check_commuting, check_exactness, check_supersmoothness, sequence,
    Chain, Report, Verdict,
};

/// Version of the JSON layout.
pub const SCHEMA: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Spaces,
    Exactness,
    Dofs,
    Commute,
    Identities,
    Supersmooth,
    Bubbles,
    Global,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::Spaces,
        Suite::Exactness,
        Suite::Dofs,
        Suite::Commute,
        Suite::Identities,
        Suite::Supersmooth,
        Suite::Bubbles,
        Suite::Global,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Spaces => "spaces",
            Suite::Exactness => "exactness",
            Suite::Dofs => "dofs",
            Suite::Commute => "commute",
            Suite::Identities => "identities",
            Suite::Supersmooth => "supersmooth",
            Suite::Bubbles => "bubbles",
            Suite::Global => "global",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    /// Inclusive range of the degree parameter; each suite has its own
    /// default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degrees: Option<(i64, i64)>,
    /// Barycentric coordinates of the split point.
    #[serde(serialize_with = "ser_bary")]
    pub split: [Rational; 4],
    pub seed: u64,
    /// Number of primes each check is repeated over.
    pub primes: usize,
    /// Run in rational arithmetic instead.
    pub exact: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<String>,
    /// Restrict to one family or chain (`V`, `Z`, `U`, `BGG`, ...).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    /// Seeded inputs per commuting square.
    pub count: usize,
}

fn ser_bary<Ser: serde::Serializer>(b: &[Rational; 4], s: Ser) -> std::result::Result<Ser::Ok, Ser::Error> {
    s.serialize_str(&b.iter().map(rational_to_string).collect::<Vec<_>>().join(","))
}

impl Default for RunConfig {
    fn default() -> Self {
        let q = alfeld_linalg::q(1, 4);
        RunConfig {
            degrees: None,
            split: [q.clone(), q.clone(), q.clone(), q],
            seed: 7,
            primes: 1,
            exact: false,
            mesh: None,
            family: None,
            count: 10,
        }
    }
}

impl RunConfig {
    fn range(&self, lo: i64, hi: i64) -> Vec<i64> {
        let (a, b) = self.degrees.unwrap_or((lo, hi));
        (a..=b).collect()
    }

    fn wants(&self, names: &[&str]) -> bool {
        match &self.family {
            None => true,
            Some(f) => names.iter().any(|n| n.eq_ignore_ascii_case(f)),
        }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Summary {
    pub checks: usize,
    pub passed: usize,
    pub failed: usize,
    /// Failures outside the claimed ranges; they do not affect the status.
    pub exploratory_failed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct Document {
    pub schema: u32,
    pub command: String,
    pub config: RunConfig,
    pub summary: Summary,
    pub reports: Vec<Report>,
}

impl Document {
    /// True iff every non-exploratory check passed.
    pub fn ok(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable") + "\n"
    }

    /// Plain-text table, one row per check.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<44} {:>3}  {:>8}  witnesses", "", "check", "r", "ms");
        for r in &self.reports {
            let v = match (r.verdict, r.exploratory) {
                (Verdict::Pass, false) => "PASS",
                (Verdict::Fail, false) => "FAIL",
                (Verdict::Pass, true) => "pass*",
                (Verdict::Fail, true) => "fail*",
            };
            let w: Vec<String> = r.witnesses.iter().take(8).map(|(k, v)| format!("{k}={v}")).collect();
            let more = if r.witnesses.len() > 8 { " ..." } else { "" };
            let _ = writeln!(s, "{v:<6} {:<44} {:>3}  {:>8}  {}{more}", r.check_id, r.params.r, r.millis, w.join(" "));
            if !r.note.is_empty() && r.verdict == Verdict::Fail {
                let _ = writeln!(s, "       note: {}", r.note);
            }
        }
        let m = &self.summary;
        let _ = writeln!(
            s,
            "{} checks, {} passed, {} failed, {} exploratory failures (* = outside the claimed range)",
            m.checks, m.passed, m.failed, m.exploratory_failed
        );
        s
    }
}

type Task<'a> = Box<dyn Fn() -> Result<Vec<Report>> + Send + Sync + 'a>;

/// Turn an error into a failing report so one broken check does not hide
/// the others.
fn run_tasks<S: Scalar>(forge: &Forge<S>, tasks: Vec<(String, i64, bool, Task<'_>)>) -> Vec<Report> {
    par::map(&tasks, |(id, r, exploratory, t)| match t() {
        Ok(v) => v,
        Err(e) => {
            let mut rep = Report::new(id.clone(), &forge.ctx, *r, None, "check raised an error");
            rep.exploratory = *exploratory;
            rep.note(e.to_string());
            vec![rep.finish(false, Instant::now())]
        }
    })
    .into_iter()
    .flatten()
    .collect()
}

fn task<'a>(id: String, r: i64, exploratory: bool, f: impl Fn() -> Result<Vec<Report>> + Send + Sync + 'a) -> (String, i64, bool, Task<'a>) {
    (id, r, exploratory, Box::new(f))
}

fn dimension_report<S: Scalar>(forge: &Forge<S>, label: Label, deg: i64, r: i64) -> Result<Vec<Report>> {
    let t0 = Instant::now();
    let expected = expected_dimension(label, deg);
    let mut rep = Report::new(
        format!("dimension/{label}_{deg}"),
        &forge.ctx,
        r,
        None,
        format!("dim {label}_{deg} equals its closed form"),
    );
    let dim = forge.space(label, deg)?.dim();
    rep.wit("dim", dim);
    let ok = match expected {
        Some(e) => {
            rep.wit("expected", e);
            dim as i64 == e
        }
        None => {
            rep.exploratory = true;
            rep.note("no closed form at this degree");
            true
        }
    };
    Ok(vec![rep.finish(ok, t0)])
}

fn suite_spaces<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    let mut tasks = Vec::new();
    for deg in cfg.range(1, 7) {
        for label in Label::all() {
            if label.family == Family::U || !cfg.wants(&[&format!("{:?}", label.family)]) {
                continue;
            }
            if expected_dimension(label, deg).is_none() {
                continue;
            }
            tasks.push(task(format!("dimension/{label}_{deg}"), deg, false, move || dimension_report(forge, label, deg, deg)));
        }
    }
    if cfg.wants(&["U", "elasticity"]) {
        for r in cfg.range(4, 6) {
            if r < 4 {
                continue;
            }
            for k in 0..4u8 {
                for ring in [false, true] {
                    let label = Label::new(Family::U, k).with_ring(ring);
                    let deg = Chain::U.degree(k as usize, r);
                    tasks.push(task(format!("dimension/{label}_{deg}"), r, false, move || dimension_report(forge, label, deg, r)));
                }
            }
            if r <= 5 {
                for ring in [false, true] {
                    tasks.push(task("characterization/U1".into(), r, false, move || Ok(vec![characterize_u1(forge, r, ring)?])));
                }
            }
        }
    }
    tasks
}

fn suite_exactness<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    let groups: [(&[&str], &[&str], (i64, i64)); 4] = [
        (&["V", "Vo"], &["V", "de-rham"], (3, 6)),
        (&["Z", "Zo"], &["Z", "stokes"], (4, 5)),
        (&["BGG", "BGGo"], &["BGG"], (4, 5)),
        (&["U", "Uo"], &["U", "elasticity"], (4, 5)),
    ];
    let mut tasks = Vec::new();
    for (names, aliases, (lo, hi)) in groups {
        if !cfg.wants(aliases) {
            continue;
        }
        for r in cfg.range(lo, hi) {
            for &name in names {
                tasks.push(task(format!("exactness/{name}"), r, r < lo, move || {
                    Ok(vec![check_exactness(forge, &sequence(forge, name, r)?)?])
                }));
            }
        }
    }
    tasks
}

fn suite_dofs<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    let mut tasks = Vec::new();
    for (chain, (lo, hi)) in [(Chain::V, (5, 6)), (Chain::Z, (4, 5)), (Chain::U, (4, 6))] {
        if !cfg.wants(&[&format!("{chain:?}")]) {
            continue;
        }
        for r in cfg.range(lo, hi) {
            for label in chain.labels() {
                let (min, off) = window(label).expect("chain labels have dofs");
                let deg = r + off;
                // U0, U2, U3 are claimed at r = 4, 5; the U1 set only at r = 6
                let claimed = r >= min
                    && match (chain, label.k) {
                        (Chain::U, 1) => r >= 6,
                        (Chain::U, _) => r <= 5,
                        _ => true,
                    };
                tasks.push(task(format!("unisolvency/{label}"), r, !claimed, move || {
                    let t0 = Instant::now();
                    let mut rep = Report::new(
                        format!("unisolvency/{label}"),
                        &forge.ctx,
                        r,
                        None,
                        format!("the dofs of {label}_{deg} are unisolvent and their block counts match their closed forms"),
                    );
                    rep.exploratory = !claimed;
                    let u = check_unisolvent(forge, label, deg.max(0) as usize)?;
                    rep.wit("dim", u.dim);
                    rep.wit("dofs", u.dofs);
                    rep.wit("rank", u.rank);
                    for (name, n, e) in &u.blocks {
                        rep.wit(format!("block {name}"), *n);
                        rep.wit(format!("block {name} expected"), *e);
                    }
                    if u.dofs > u.dim && u.rank == u.dim {
                        rep.note(format!("{} functionals for a space of dimension {}: the set spans but is redundant", u.dofs, u.dim));
                    }
                    Ok(vec![rep.finish(u.nonsingular() && u.counts_match(), t0)])
                }));
            }
        }
    }
    tasks
}

fn suite_commute<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    let mut tasks = Vec::new();
    let (seed, count) = (cfg.seed, cfg.count);
    for (chain, default) in [(Chain::V, vec![5]), (Chain::Z, vec![5]), (Chain::U, vec![4, 6])] {
        if !cfg.wants(&[&format!("{chain:?}")]) {
            continue;
        }
        let rs = match cfg.degrees {
            Some(_) => cfg.range(0, 0),
            None => default,
        };
        for r in rs {
            tasks.push(task(format!("commuting/{chain:?}"), r, false, move || check_commuting(forge, chain, r, seed, count)));
        }
    }
    tasks
}

fn suite_identities<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    let mut tasks = Vec::new();
    let seed = cfg.seed;
    for id in Identity::ALL {
        tasks.push(task(format!("identity/{}", id.id()), 4, false, move || Ok(vec![verify_identity(&forge.ctx, id, seed)?])));
    }
    for r in cfg.range(4, 7) {
        if r < 0 {
            continue;
        }
        for face in 0..4 {
            tasks.push(task(format!("face-exactness/{face}"), r, false, move || {
                Ok(vec![face_exactness_check(&forge.ctx, face, r as usize, seed)?])
            }));
        }
    }
    let bgg_r = cfg.degrees.map(|(a, _)| a).unwrap_or(5);
    for ring in [false, true] {
        tasks.push(task("bgg".into(), bgg_r, bgg_r < 4, move || {
            let mut rep = bgg_derive(forge, bgg_r, ring)?.report;
            rep.exploratory = bgg_r < 4;
            Ok(vec![rep])
        }));
    }
    tasks
}

fn suite_supersmooth<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    cfg.range(2, 6)
        .into_iter()
        .map(|r| task("supersmooth".into(), r, !(2..=6).contains(&r), move || check_supersmoothness(forge, r)))
        .collect()
}

fn suite_bubbles<'a, S: Scalar>(forge: &'a Forge<S>, cfg: &RunConfig) -> Vec<(String, i64, bool, Task<'a>)> {
    let (seed, count) = (cfg.seed, cfg.count);
    cfg.range(2, 3)
        .into_iter()
        .map(|r| task("bubble".into(), r, false, move || check_bubble_potentials(forge, r, seed, count)))
        .collect()
}

fn global_reports<S: Scalar>(cfg: &RunConfig) -> Result<Vec<Report>> {
    let names: Vec<String> = match &cfg.mesh {
        Some(m) => vec![m.clone()],
        None => BUILTIN.iter().map(|s| s.to_string()).collect(),
    };
    let mut out = Vec::new();
    for name in names {
        let mf = MeshForge::<S>::new(MeshComplex::load(&name)?)?;
        let mut jobs: Vec<(Chain, i64)> = Vec::new();
        for (chain, lo, hi) in [(Chain::V, 4, 5), (Chain::Z, 4, 5), (Chain::U, 4, 5)] {
            if cfg.wants(&[&format!("{chain:?}")]) {
                jobs.extend(cfg.range(lo, hi).into_iter().map(|r| (chain, r)));
            }
        }
        out.extend(
            par::map(&jobs, |&(chain, r)| check_global(&mf, chain, r))
                .into_iter()
                .collect::<Result<Vec<_>>>()?,
        );
        if cfg.mesh.is_some() || name == "two-tets" {
            for chain in [Chain::V, Chain::Z] {
                if cfg.wants(&[&format!("{chain:?}")]) {
                    for r in cfg.degrees.map(|_| cfg.range(0, 0)).unwrap_or(vec![5]) {
                        out.extend(check_global_commuting(&mf, chain, r, cfg.seed, cfg.count)?);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// All reports of one suite in the field `S`.
pub fn suite_reports<S: Scalar>(suite: Suite, cfg: &RunConfig) -> Result<Vec<Report>> {
    if suite == Suite::Global {
        return global_reports::<S>(cfg);
    }
    let split = AlfeldSplit::with_point(Tetrahedron::canonical(), &cfg.split)?;
    let forge = Forge::<S>::from_split(&split)?;
    let tasks = match suite {
        Suite::Spaces => suite_spaces(&forge, cfg),
        Suite::Exactness => suite_exactness(&forge, cfg),
        Suite::Dofs => suite_dofs(&forge, cfg),
        Suite::Commute => suite_commute(&forge, cfg),
        Suite::Identities => suite_identities(&forge, cfg),
        Suite::Supersmooth => suite_supersmooth(&forge, cfg),
        Suite::Bubbles => suite_bubbles(&forge, cfg),
        Suite::Global => unreachable!(),
    };
    Ok(run_tasks(&forge, tasks))
}

fn in_field(cfg: &RunConfig, suite: Suite, which: usize) -> Result<Vec<Report>> {
    match which {
        0 => suite_reports::<Fp0>(suite, cfg),
        1 => suite_reports::<Fp1>(suite, cfg),
        2 => suite_reports::<Fp2>(suite, cfg),
        _ => suite_reports::<Fp3>(suite, cfg),
    }
}

/// Combine the per-prime runs of one check: it passes only if every run
/// passes with identical witnesses.
fn merge(runs: Vec<Vec<Report>>, label: &str) -> Vec<Report> {
    let mut it = runs.into_iter();
    let mut first = it.next().unwrap_or_default();
    for other in it {
        for (a, b) in first.iter_mut().zip(other) {
            a.millis += b.millis;
            if b.verdict == Verdict::Fail {
                a.verdict = Verdict::Fail;
            }
            if a.witnesses != b.witnesses {
                a.verdict = Verdict::Fail;
                a.note("witnesses differ between primes");
            }
        }
    }
    for a in &mut first {
        a.params.field = label.to_string();
    }
    first
}

/// Run suites and assemble the document.
pub fn run(command: &str, suites: &[Suite], cfg: &RunConfig) -> Result<Document> {
    if !cfg.exact && !(1..=PRIMES.len()).contains(&cfg.primes) {
        return Err(CoreError::Precondition(format!("--primes must be between 1 and {}", PRIMES.len())));
    }
    let mut reports = Vec::new();
    for &suite in suites {
        if cfg.exact {
            let mut v = suite_reports::<Rational>(suite, cfg)?;
            for r in &mut v {
                r.params.field = "exact".into();
            }
            reports.extend(v);
        } else {
            let runs = (0..cfg.primes).map(|p| in_field(cfg, suite, p)).collect::<Result<Vec<_>>>()?;
            let label = format!("mod {} prime{}", cfg.primes, if cfg.primes > 1 { "s" } else { "" });
            reports.extend(merge(runs, &label));
        }
    }
    reports.sort_by(|a, b| (&a.check_id, a.params.r, &a.params.split).cmp(&(&b.check_id, b.params.r, &b.params.split)));
    let mut summary = Summary { checks: reports.len(), ..Default::default() };
    for r in &reports {
        match (r.verdict, r.exploratory) {
            (Verdict::Pass, _) => summary.passed += 1,
            (Verdict::Fail, false) => summary.failed += 1,
            (Verdict::Fail, true) => summary.exploratory_failed += 1,
        }
    }
    Ok(Document { schema: SCHEMA, command: command.to_string(), config: cfg.clone(), summary, reports })
}

/// Parse `a..b`, `a..=b` or a single degree.
pub fn parse_degrees(s: &str) -> Result<(i64, i64)> {
    let bad = || CoreError::Precondition(format!("bad degree range {s}"));
    let num = |t: &str| t.trim().parse::<i64>().map_err(|_| bad());
    let (a, b) = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?, num(b)?)
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?, num(b)?)
    } else {
        let v = num(s)?;
        (v, v)
    };
    if a > b {
        return Err(bad());
    }
    Ok((a, b))
}

/// Parse `a,b,c,d` barycentric coordinates.
pub fn parse_split(s: &str) -> Result<[Rational; 4]> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(CoreError::InvalidSplit(format!("expected four coordinates, got {s}")));
    }
    let mut out: [Rational; 4] = Default::default();
    for (o, p) in out.iter_mut().zip(parts) {
        *o = alfeld_linalg::parse_rational(p.trim())?;
    }
    AlfeldSplit::with_point(Tetrahedron::canonical(), &out)?;
    Ok(out)
}
