//! Exactness of the local sequences, commuting interpolation squares,
//! supersmoothness at vertices, bubble potentials and the constraint
//! characterization of `U1`.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use alfeld_linalg::{par, rank, rational_to_string, solve_any, Matrix, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus;
use crate::dofs::{dof_set, window, Interpolator};
use crate::error::{CoreError, Result};
use crate::field::{BrokenField, Ctx, GlobalField, Shape};
use crate::poly::{dim, Poly};
use crate::spaces::{bubble_mu, gens, tensor_v, Builder, FESpace, FieldCache, Forge, Gen, Label, Proj, Q};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Clone, Debug, Serialize)]
pub struct Params {
    pub r: i64,
    pub split: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Arithmetic the check ran in, filled in by the report layer.
    #[serde(skip_serializing_if = "String::is_empty")]
    pub field: String,
}

/// Outcome of one check. `exploratory` checks are outside the range where a
/// claim is made and do not affect the exit status.
#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub check_id: String,
    pub params: Params,
    pub verdict: Verdict,
    pub exploratory: bool,
    pub claim: String,
    pub witnesses: BTreeMap<String, i64>,
    #[serde(skip_serializing_if = "String::is_empty")]
    pub note: String,
    #[serde(skip)]
    pub millis: u64,
}

impl Report {
    pub fn new<S: Scalar>(id: impl Into<String>, ctx: &Ctx<S>, r: i64, seed: Option<u64>, claim: impl Into<String>) -> Self {
        Report {
            check_id: id.into(),
            params: Params { r, split: split_string(ctx), seed, field: String::new() },
            verdict: Verdict::Fail,
            exploratory: false,
            claim: claim.into(),
            witnesses: BTreeMap::new(),
            note: String::new(),
            millis: 0,
        }
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    pub fn wit(&mut self, key: impl Into<String>, v: impl TryInto<i64>) {
        self.witnesses.insert(key.into(), v.try_into().unwrap_or(i64::MAX));
    }

    pub fn note(&mut self, s: impl AsRef<str>) {
        if !self.note.is_empty() {
            self.note.push_str("; ");
        }
        self.note.push_str(s.as_ref());
    }

    pub fn finish(mut self, ok: bool, t0: Instant) -> Self {
        self.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        self.millis = t0.elapsed().as_millis() as u64;
        self
    }
}

/// Barycentric coordinates of the split point, comma separated.
pub fn split_string<S: Scalar>(ctx: &Ctx<S>) -> String {
    ctx.split.z_bary.iter().map(rational_to_string).collect::<Vec<_>>().join(",")
}

/// A global polynomial field with small random integer coefficients.
pub fn random_global<S: Scalar>(ctx: &Ctx<S>, shape: Shape, deg: usize, rng: &mut ChaCha8Rng) -> BrokenField<S> {
    let n = dim(4, deg);
    let comps = (0..shape.ncomp())
        .map(|_| Poly { nv: 4, deg, c: (0..n).map(|_| S::from_i64(rng.gen_range(-9..=9))).collect() })
        .collect();
    GlobalField { shape, deg, comps }.embed(ctx)
}

/// A random integer combination of basis fields.
pub fn random_member<S: Scalar>(sp: &FESpace<S>, rng: &mut ChaCha8Rng) -> BrokenField<S> {
    let mut out = BrokenField::<S>::zeros(sp.shape, sp.deg);
    for b in &sp.basis {
        let a = S::from_i64(rng.gen_range(-9..=9));
        for (o, x) in out.data.iter_mut().zip(&b.data) {
            o.add_mul_assign(&a, x);
        }
    }
    out
}

fn same<S: Scalar>(a: &BrokenField<S>, b: &BrokenField<S>) -> bool {
    a.to_matrix().sub(&b.to_matrix()).is_zero()
}

/// Maps between the slots of a sequence. Product slots are handled by the
/// maps that need them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Op {
    Grad,
    Curl,
    Div,
    Eps,
    Inc,
    /// `(u, v) -> grad u - mskw v`
    GradMskw,
    /// `z -> curl Xi^-1 curl z`
    CurlXiCurl,
    /// `w -> (2 vskw w, div w)`
    VskwDiv,
}

impl Op {
    pub fn apply<S: Scalar>(self, ctx: &Ctx<S>, x: &[BrokenField<S>]) -> Result<Vec<BrokenField<S>>> {
        use calculus::{curl, div, eps, grad, inc};
        Ok(match self {
            Op::Grad => vec![grad(ctx, &x[0])?],
            Op::Curl => vec![curl(ctx, &x[0])?],
            Op::Div => vec![div(ctx, &x[0])?],
            Op::Eps => vec![eps(ctx, &x[0])?],
            Op::Inc => vec![inc(ctx, &x[0])?.sym()],
            Op::GradMskw => vec![grad(ctx, &x[0])?.sub(&x[1].mskw())],
            Op::CurlXiCurl => vec![curl(ctx, &curl(ctx, &x[0])?.xi_inv())?],
            Op::VskwDiv => vec![x[0].vskw().scale(&S::from_i64(2)), div(ctx, &x[0])?],
        })
    }
}

/// One slot of a sequence: a space or a product of spaces.
#[derive(Clone, Debug)]
pub struct Slot<S> {
    pub name: String,
    pub parts: Vec<Arc<FESpace<S>>>,
}

impl<S: Scalar> Slot<S> {
    pub fn dim(&self) -> usize {
        self.parts.iter().map(|p| p.dim()).sum()
    }

    /// Basis of the product, each element with zeros in the other parts.
    pub fn basis(&self) -> Vec<Vec<BrokenField<S>>> {
        let zeros: Vec<BrokenField<S>> = self.parts.iter().map(|p| BrokenField::zeros(p.shape, p.deg)).collect();
        let mut out = Vec::new();
        for (k, p) in self.parts.iter().enumerate() {
            for b in &p.basis {
                let mut e = zeros.clone();
                e[k] = b.clone();
                out.push(e);
            }
        }
        out
    }
}

/// A finite sequence of spaces and maps with the exactness that is claimed
/// for it.
#[derive(Clone, Debug)]
pub struct SequenceSpec<S> {
    pub name: String,
    pub r: i64,
    pub slots: Vec<Slot<S>>,
    pub ops: Vec<Op>,
    /// Expected kernel dimension of the first map, if claimed.
    pub kernel: Option<usize>,
    /// Whether the last map is claimed onto.
    pub onto: bool,
    /// First slot index from which exactness in the middle is claimed.
    pub from: usize,
    /// Smallest `r` for which the claim is made.
    pub min_r: i64,
    pub claim: String,
}

/// The space `X (x) V` of a catalog space, memoized in the forge.
pub fn tensor_space<S: Scalar>(forge: &Forge<S>, label: Label, deg: i64) -> Result<Arc<FESpace<S>>> {
    let x = forge.space(label, deg)?;
    let shape = match x.shape {
        Shape::Scalar => Shape::Vector,
        Shape::Vector => Shape::Matrix,
        s => return Err(CoreError::Shape(format!("{s:?} (x) V"))),
    };
    let name = format!("{label}_{deg}(x)V");
    forge.memo(&name.clone(), || Ok(FESpace { name, deg: x.deg, shape, basis: tensor_v(&x) }))
}

fn plain<S: Scalar>(forge: &Forge<S>, l: &str, deg: i64) -> Result<Slot<S>> {
    let label = Label::parse(l)?;
    Ok(Slot { name: format!("{label}_{deg}"), parts: vec![forge.space(label, deg)?] })
}

fn tensored<S: Scalar>(forge: &Forge<S>, ls: &[(&str, i64)]) -> Result<Slot<S>> {
    let mut parts = Vec::new();
    let mut names = Vec::new();
    for &(l, d) in ls {
        let label = Label::parse(l)?;
        parts.push(tensor_space(forge, label, d)?);
        names.push(format!("{label}_{d}(x)V"));
    }
    Ok(Slot { name: names.join(" x "), parts })
}

/// Names accepted by [`sequence`].
pub const SEQUENCES: [&str; 8] = ["V", "Vo", "Z", "Zo", "BGG", "BGGo", "U", "Uo"];

/// A sequence of the catalog at parameter `r`.
pub fn sequence<S: Scalar>(forge: &Forge<S>, name: &str, r: i64) -> Result<SequenceSpec<S>> {
    use Op::*;
    let f = forge;
    let de_rham = [Grad, Curl, Div].to_vec();
    let spec = |slots, ops, kernel, onto, from, min_r, claim: &str| SequenceSpec {
        name: name.to_string(),
        r,
        slots,
        ops,
        kernel,
        onto,
        from,
        min_r,
        claim: claim.to_string(),
    };
    Ok(match name {
        "V" => spec(
            vec![plain(f, "V0", r)?, plain(f, "V1", r - 1)?, plain(f, "V2", r - 2)?, plain(f, "V3", r - 3)?],
            de_rham,
            Some(1),
            true,
            1,
            3,
            "R -> V0_r -> V1_{r-1} -> V2_{r-2} -> V3_{r-3} -> 0 is exact",
        ),
        "Vo" => {
            let full = r >= 5;
            spec(
                vec![plain(f, "V0o", r)?, plain(f, "V1o", r - 1)?, plain(f, "V2o", r - 2)?, plain(f, "V3o", r - 3)?],
                de_rham,
                if full { Some(0) } else { None },
                true,
                if full { 1 } else { 2 },
                3,
                if full {
                    "0 -> V0o_r -> V1o_{r-1} -> V2o_{r-2} -> V3o_{r-3} -> 0 is exact"
                } else {
                    "V1o_{r-1} -> V2o_{r-2} -> V3o_{r-3} -> 0 is exact"
                },
            )
        }
        "Z" => spec(
            vec![plain(f, "Z0", r + 1)?, plain(f, "Z1", r)?, plain(f, "Z2", r - 1)?, plain(f, "Z3", r - 2)?],
            de_rham,
            Some(1),
            true,
            1,
            4,
            "R -> Z0_{r+1} -> Z1_r -> Z2_{r-1} -> Z3_{r-2} -> 0 is exact",
        ),
        "Zo" => spec(
            vec![plain(f, "Z0o", r + 1)?, plain(f, "Z1o", r)?, plain(f, "Z2o", r - 1)?, plain(f, "Z3o", r - 2)?],
            de_rham,
            Some(0),
            true,
            1,
            4,
            "0 -> Z0o_{r+1} -> Z1o_r -> Z2o_{r-1} -> Z3o_{r-2} -> 0 is exact",
        ),
        "BGG" => spec(
            vec![
                tensored(f, &[("Z0", r + 1), ("V0", r)])?,
                tensored(f, &[("Z1", r)])?,
                tensored(f, &[("V2", r - 2)])?,
                tensored(f, &[("Z3", r - 2), ("V3", r - 3)])?,
            ],
            vec![GradMskw, CurlXiCurl, VskwDiv],
            Some(6),
            true,
            1,
            4,
            "[Z0_{r+1};V0_r](x)V -> Z1_r(x)V -> V2_{r-2}(x)V -> [Z3_{r-2};V3_{r-3}](x)V -> 0 is exact with a 6-dimensional leading kernel",
        ),
        "BGGo" => spec(
            vec![
                tensored(f, &[("Z0o", r + 1), ("V0o", r)])?,
                tensored(f, &[("Z1o", r)])?,
                tensored(f, &[("V2o", r - 2)])?,
                tensored(f, &[("Z3hat", r - 2), ("V3o", r - 3)])?,
            ],
            vec![GradMskw, CurlXiCurl, VskwDiv],
            Some(0),
            false,
            1,
            4,
            "0 -> [Z0o_{r+1};V0o_r](x)V -> Z1o_r(x)V -> V2o_{r-2}(x)V -> [Z3hat_{r-2};V3o_{r-3}](x)V is exact",
        ),
        "U" => spec(
            vec![plain(f, "U0", r + 1)?, plain(f, "U1", r)?, plain(f, "U2", r - 2)?, plain(f, "U3", r - 3)?],
            vec![Eps, Inc, Div],
            Some(6),
            true,
            1,
            4,
            "R -> U0_{r+1} -> U1_r -> U2_{r-2} -> U3_{r-3} -> 0 is exact (R = rigid motions)",
        ),
        "Uo" => spec(
            vec![plain(f, "U0o", r + 1)?, plain(f, "U1o", r)?, plain(f, "U2o", r - 2)?, plain(f, "U3o", r - 3)?],
            vec![Eps, Inc, Div],
            Some(0),
            true,
            1,
            4,
            "0 -> U0o_{r+1} -> U1o_r -> U2o_{r-2} -> U3o_{r-3} -> 0 is exact",
        ),
        _ => return Err(CoreError::UnknownLabel(format!("sequence {name}"))),
    })
}

/// Flatten the parts of an element into one coefficient vector.
fn flat<S: Scalar>(x: &[BrokenField<S>]) -> Vec<S> {
    x.iter().flat_map(|p| p.data.iter().cloned()).collect()
}

/// Check that a sequence is a complex into the stated spaces and compute
/// kernel and image dimensions of every map.
pub fn check_exactness<S: Scalar>(forge: &Forge<S>, spec: &SequenceSpec<S>) -> Result<Report> {
    let t0 = Instant::now();
    let ctx = &*forge.ctx;
    let mut rep = Report::new(format!("exactness/{}", spec.name), ctx, spec.r, None, spec.claim.clone());
    rep.exploratory = spec.r < spec.min_r;
    let mut ok = true;
    for s in &spec.slots {
        rep.wit(format!("dim {}", s.name), s.dim());
    }
    let mut ranks = Vec::new();
    let mut images: Vec<Vec<Vec<BrokenField<S>>>> = Vec::new();
    for (k, op) in spec.ops.iter().enumerate() {
        let basis = spec.slots[k].basis();
        let imgs: Vec<Vec<BrokenField<S>>> =
            par::map(&basis, |x| op.apply(ctx, x)).into_iter().collect::<Result<_>>()?;
        let target = &spec.slots[k + 1];
        for (p, part) in target.parts.iter().enumerate() {
            let fs: Vec<BrokenField<S>> = imgs.iter().map(|x| x[p].clone()).collect();
            if !part.contains_all(&fs) {
                ok = false;
                rep.note(format!("map {k} leaves {}", part.name));
            }
        }
        let rk = if imgs.is_empty() {
            0
        } else {
            let n = imgs[0].iter().map(|p| p.data.len()).sum();
            rank(&Matrix::from_rows(imgs.iter().map(|x| flat(x)).collect(), n))
        };
        rep.wit(format!("rank {k}"), rk);
        ranks.push(rk);
        images.push(imgs);
    }
    // complex property
    for k in 1..spec.ops.len() {
        let zero = par::map(&images[k - 1], |x| spec.ops[k].apply(ctx, x))
            .into_iter()
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(|x| x.iter().all(|p| p.is_zero()));
        if !zero {
            ok = false;
            rep.note(format!("maps {} and {k} do not compose to zero", k - 1));
        }
    }
    for (k, &rk) in ranks.iter().enumerate() {
        let ker = spec.slots[k].dim() - rk;
        rep.wit(format!("kernel {k}"), ker);
        if k == 0 {
            if let Some(e) = spec.kernel {
                if ker != e {
                    ok = false;
                    rep.note(format!("kernel of the first map is {ker}, expected {e}"));
                }
            }
        } else if k >= spec.from && ker != ranks[k - 1] {
            ok = false;
            rep.note(format!("not exact at {}: kernel {ker}, image {}", spec.slots[k].name, ranks[k - 1]));
        }
    }
    let last = spec.slots.last().unwrap().dim();
    if spec.onto && *ranks.last().unwrap() != last {
        ok = false;
        rep.note(format!("last map not onto: rank {} of {last}", ranks.last().unwrap()));
    }
    Ok(rep.finish(ok, t0))
}

/// The three chains with dof-based interpolants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Chain {
    V,
    Z,
    U,
}

impl Chain {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "V" | "v" => Ok(Chain::V),
            "Z" | "z" => Ok(Chain::Z),
            "U" | "u" => Ok(Chain::U),
            _ => Err(CoreError::UnknownLabel(format!("chain {s}"))),
        }
    }

    pub fn labels(self) -> [Label; 4] {
        let f = match self {
            Chain::V => "V",
            Chain::Z => "Z",
            Chain::U => "U",
        };
        std::array::from_fn(|k| Label::parse(&format!("{f}{k}")).unwrap())
    }

    pub fn ops(self) -> [Op; 3] {
        match self {
            Chain::U => [Op::Eps, Op::Inc, Op::Div],
            _ => [Op::Grad, Op::Curl, Op::Div],
        }
    }

    /// Space degree of slot `k` at parameter `r`.
    pub fn degree(self, k: usize, r: i64) -> i64 {
        r + window(self.labels()[k]).unwrap().1
    }

    /// Squares for which commuting is claimed at `r`.
    pub fn claimed(self, k: usize, r: i64) -> bool {
        match self {
            Chain::V => r >= 5,
            Chain::Z => r >= 4,
            Chain::U => r >= if k == 2 { 6 } else { 4 },
        }
    }
}

/// `Pi_{k+1} D u = D Pi_k u` on seeded global polynomials `u` of degree one
/// above the domain space (at least `r + 1`).
pub fn check_square<S: Scalar>(
    forge: &Forge<S>,
    chain: Chain,
    k: usize,
    r: i64,
    seed: u64,
    count: usize,
) -> Result<Report> {
    let t0 = Instant::now();
    let ctx = &*forge.ctx;
    let labels = chain.labels();
    let op = chain.ops()[k];
    let (la, lb) = (labels[k], labels[k + 1]);
    let (da, db) = (chain.degree(k, r), chain.degree(k + 1, r));
    let mut rep = Report::new(
        format!("commuting/{chain:?}/{k}"),
        ctx,
        r,
        Some(seed),
        format!("Pi[{lb}_{db}] {op:?} = {op:?} Pi[{la}_{da}]"),
    );
    rep.exploratory = !chain.claimed(k, r);
    let make = |l: Label, d: i64| -> Result<Interpolator<S>> {
        let d = usize::try_from(d).map_err(|_| CoreError::Precondition(format!("{l} at negative degree")))?;
        Interpolator::new(ctx, Arc::new(dof_set(forge, l, d)?), forge.space(l, d as i64)?)
    };
    let pa = make(la, da)?;
    let pb = make(lb, db)?;
    let d = (r + 1).max(da + 1) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<BrokenField<S>> = (0..count).map(|_| random_global(ctx, la.shape(), d, &mut rng)).collect();
    let du: Vec<BrokenField<S>> = inputs.iter().map(|u| Ok(op.apply(ctx, std::slice::from_ref(u))?.remove(0))).collect::<Result<_>>()?;
    let lhs = pb.interpolate(ctx, &du)?;
    let pu = pa.interpolate(ctx, &inputs)?;
    let mut agree = 0;
    for (l, p) in lhs.iter().zip(&pu) {
        let rhs = op.apply(ctx, std::slice::from_ref(p))?.remove(0);
        if same(l, &rhs) {
            agree += 1;
        }
    }
    rep.wit("inputs", count);
    rep.wit("input degree", d);
    rep.wit("agree", agree);
    for (name, p) in [("domain", &pa), ("target", &pb)] {
        rep.wit(format!("{name} dofs"), p.dofs.len());
        rep.wit(format!("{name} dim"), p.space.dim());
        if p.rows.len() < p.dofs.len() {
            let consistent = p.consistent(ctx, if name == "domain" { &inputs } else { &du })?;
            rep.wit(format!("{name} dofs consistent"), consistent as i64);
            rep.note(format!(
                "{} dofs of {} are redundant; the interpolant uses the first {} independent ones",
                p.dofs.len() - p.rows.len(),
                p.space.name,
                p.rows.len()
            ));
        }
    }
    let ok = agree == count;
    if !ok && op == Op::Inc {
        // inc of anything is divergence free, so a failure is structural if
        // the target interpolant destroys that
        let nz = lhs
            .iter()
            .map(|l| calculus::div(ctx, l).map(|d| !d.is_zero()))
            .collect::<Result<Vec<bool>>>()?
            .into_iter()
            .filter(|&b| b)
            .count();
        rep.wit("target interpolants with nonzero div", nz);
        if nz > 0 {
            rep.note(format!(
                "div of the {lb} interpolant of inc u is nonzero for {nz} inputs although div inc u = 0; \
                 inc of any {la} interpolant is divergence free, so no interpolant on {la} can commute here"
            ));
        }
    }
    Ok(rep.finish(ok, t0))
}

/// All three squares of a chain.
pub fn check_commuting<S: Scalar>(forge: &Forge<S>, chain: Chain, r: i64, seed: u64, count: usize) -> Result<Vec<Report>> {
    (0..3).map(|k| check_square(forge, chain, k, r, seed, count)).collect()
}

fn all_vanish<S: Scalar>(ctx: &Ctx<S>, fs: &[BrokenField<S>], g: &Gen<S>) -> bool {
    par::map(fs, |f| {
        let fc = FieldCache::new(ctx, f.clone());
        let mut out = Vec::new();
        g(&fc, &mut out);
        out.iter().all(|x| x.is_zero())
    })
    .into_iter()
    .all(|b| b)
}

/// Extra smoothness at the vertices of the parent, for one degree.
pub fn check_supersmoothness<S: Scalar>(forge: &Forge<S>, r: i64) -> Result<Vec<Report>> {
    let ctx = &*forge.ctx;
    let mut out = Vec::new();
    let mut item = |id: &str, claim: &str, range: (i64, i64), fs: &dyn Fn() -> Result<Vec<BrokenField<S>>>, g: Gen<S>| -> Result<()> {
        let t0 = Instant::now();
        let mut rep = Report::new(format!("supersmooth/{id}"), ctx, r, None, claim);
        rep.exploratory = r < range.0 || r > range.1;
        let fs = fs()?;
        rep.wit("basis", fs.len());
        let ok = all_vanish(ctx, &fs, &g);
        out.push(rep.finish(ok, t0));
        Ok(())
    };
    let basis = |l: &'static str| {
        move || -> Result<Vec<BrokenField<S>>> { Ok(forge.space(Label::parse(l)?, r)?.basis.clone()) }
    };
    let ru = r.max(0) as usize;
    item("S0", "S0_r is C2 at the vertices", (2, 6), &basis("S0"), gens::vertex_jump(Q::Id, 2))?;
    item("S0o", "S0o_r has vanishing second derivatives at the vertices", (2, 6), &basis("S0o"), gens::vertex_zero(Q::Id, 2))?;
    item("S1", "S1_r is C1 at the vertices", (2, 6), &basis("S1"), gens::vertex_jump(Q::Id, 1))?;
    item("S1o", "S1o_r has vanishing first derivatives at the vertices", (2, 6), &basis("S1o"), gens::vertex_zero(Q::Id, 1))?;
    let curl_c0 = || -> Result<Vec<BrokenField<S>>> {
        let mut b = Builder::new(ctx, Shape::Vector, ru);
        b.c0().add(gens::vertex_jump(Q::Curl, 0));
        Ok(b.build("C0 with curl continuous at vertices").basis)
    };
    item("curl-c0", "a C0 vector field with curl continuous at the vertices is C1 there", (2, 5), &curl_c0, gens::vertex_jump(Q::Id, 1))?;
    let c1 = || -> Result<Vec<BrokenField<S>>> {
        let mut b = Builder::new(ctx, Shape::Scalar, ru);
        b.c0().add(gens::facet_jump(ctx, Q::Grad, Proj::Full));
        Ok(b.build("C1").basis)
    };
    item("c1-c2", "a C1 scalar field is C2 at the vertices", (3, 5), &c1, gens::vertex_jump(Q::Id, 2))?;
    Ok(out)
}

/// Solve `D u = w` with `u = mu sum_l mu^l gamma_{r-l}`, `gamma_j` global
/// vector polynomials of degree `j`. Among all solutions the one with the
/// least-index pivots is returned.
pub fn bubble_potential<S: Scalar>(ctx: &Ctx<S>, op: Op, w: &BrokenField<S>, r: usize) -> Result<Option<BrokenField<S>>> {
    let mu = bubble_mu::<S>();
    let mut ansatz = Vec::new();
    let mut pow = mu.clone();
    for l in 0..=r {
        for g in crate::spaces::global_polys(ctx, Shape::Vector, r - l) {
            let mut comps = Vec::new();
            for c in 0..3 {
                comps.push(g.component(c).mul_scalar_field(&pow));
            }
            ansatz.push(BrokenField::from_components(Shape::Vector, &comps));
        }
        pow = pow.mul_scalar_field(&mu);
    }
    let imgs: Vec<BrokenField<S>> = par::map(&ansatz, |a| Ok(op.apply(ctx, std::slice::from_ref(a))?.remove(0)))
        .into_iter()
        .collect::<Result<_>>()?;
    let deg = imgs.iter().map(|f| f.deg).max().unwrap().max(w.deg);
    let n = w.to_degree(deg).data.len();
    let cols: Vec<Vec<S>> = imgs.iter().map(|f| f.to_degree(deg).data).collect();
    let m = Matrix::from_columns(&cols, n);
    let Some(c) = solve_any(&m, &w.to_degree(deg).data)? else {
        return Ok(None);
    };
    let mut u = BrokenField::<S>::zeros(Shape::Vector, r + 1);
    for (a, f) in c.iter().zip(&ansatz) {
        if !a.is_zero() {
            for (o, x) in u.data.iter_mut().zip(&f.data) {
                o.add_mul_assign(a, x);
            }
        }
    }
    Ok(Some(u))
}

/// Bubble potentials for seeded div-free members of `W2o_r` (under curl)
/// and members of `W3o_r` (under div).
pub fn check_bubble_potentials<S: Scalar>(forge: &Forge<S>, r: i64, seed: u64, count: usize) -> Result<Vec<Report>> {
    let ctx = &*forge.ctx;
    let ru = r as usize;
    let mut out = Vec::new();
    let w2o = forge.space(Label::parse("W2o")?, r)?;
    let divfree = {
        let mut b = Builder::from_basis(ctx, Shape::Vector, ru, w2o.basis.clone());
        b.add(gens::zero(Q::Div));
        b.build(format!("W2o_{r} div-free"))
    };
    let w3o = forge.space(Label::parse("W3o")?, r)?;
    for (id, op, sp, claim) in [
        ("curl", Op::Curl, &divfree, "every div-free w in W2o_r is curl of a bubble potential mu sum mu^l gamma_{r-l}"),
        ("div", Op::Div, &*w3o, "every w in W3o_r is div of a bubble potential mu sum mu^l gamma_{r-l}"),
    ] {
        let t0 = Instant::now();
        let mut rep = Report::new(format!("bubble/{id}"), ctx, r, Some(seed), claim);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut solved = 0;
        for _ in 0..count {
            let w = random_member(sp, &mut rng);
            if let Some(u) = bubble_potential(ctx, op, &w, ru)? {
                if same(&op.apply(ctx, &[u])?[0], &w) {
                    solved += 1;
                }
            }
        }
        rep.wit("space dim", sp.dim());
        rep.wit("members", count);
        rep.wit("solved", solved);
        out.push(rep.finish(solved == count, t0));
    }
    Ok(out)
}

/// The constraint space `M1_r`: symmetric, continuous, broken `P_r`, with
/// `(curl u)'` in `W1_{r-1} (x) V`, `C1` at the vertices and `inc u`
/// continuous at the vertices. The ringed version has zero trace and
/// vanishing first derivatives of `u` and values of `inc u` at the vertices.
pub fn constraint_u1<S: Scalar>(ctx: &Ctx<S>, r: usize, ring: bool) -> FESpace<S> {
    let mut b = Builder::new(ctx, Shape::Sym, r);
    b.c0().add(gens::facet_jump(ctx, Q::CurlT, Proj::Tangential));
    if ring {
        b.boundary_zero()
            .add(gens::boundary_trace(ctx, Q::CurlT, Proj::Tangential))
            .add(gens::vertex_zero(Q::Id, 1))
            .add(gens::vertex_zero(Q::Inc, 0));
    } else {
        b.add(gens::vertex_jump(Q::Id, 1)).add(gens::vertex_jump(Q::Inc, 0));
    }
    b.build(format!("M1{}_{r}", if ring { "o" } else { "" }))
}

/// `M1_r = U1_r` as column spaces (and the ringed analogue).
pub fn characterize_u1<S: Scalar>(forge: &Forge<S>, r: i64, ring: bool) -> Result<Report> {
    let t0 = Instant::now();
    let ctx = &*forge.ctx;
    let lbl = if ring { "U1o" } else { "U1" };
    let mut rep = Report::new(
        format!("characterize/{lbl}"),
        ctx,
        r,
        None,
        format!("{lbl}_r equals the space cut out by its smoothness constraints"),
    );
    rep.exploratory = r < 4;
    let u = forge.space(Label::parse(lbl)?, r)?;
    let m = constraint_u1(ctx, r as usize, ring);
    rep.wit("dim U", u.dim());
    rep.wit("dim M", m.dim());
    let ok = u.dim() == m.dim() && m.contains_all(&u.basis);
    Ok(rep.finish(ok, t0))
}
