//! Named finite element spaces on the split, built as nullspaces of their
//! defining constraints inside the broken space.
//!
//! Construction is two-stage. Coefficient identifications (C0 continuity,
//! vanishing boundary traces, vertex values) are applied structurally with a
//! union-find over coefficient indices. The remaining constraints are
//! evaluated on the resulting basis and their nullspace is taken.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::rc::Rc;
use std::sync::{Arc, Mutex};

use alfeld_linalg::{independent_columns, nullspace_basis, par, rank, Matrix, Scalar};

use crate::calculus::{self, vertex_jet};
use crate::error::{CoreError, Result};
use crate::field::{conv3, BrokenField, Ctx, GlobalField, Shape};
use crate::geometry::{self, FACES};
use crate::poly::{self, monomials, Poly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    W,
    L,
    S,
    V,
    Z,
    U,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Plain,
    Ring,
    /// Z3 with vanishing vertex values.
    Hat,
    /// Z3 with mean zero.
    Tilde,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub family: Family,
    pub k: u8,
    pub variant: Variant,
}

impl Label {
    pub const fn new(family: Family, k: u8) -> Self {
        Label { family, k, variant: Variant::Plain }
    }

    pub const fn ring(family: Family, k: u8) -> Self {
        Label { family, k, variant: Variant::Ring }
    }

    pub fn is_ring(&self) -> bool {
        self.variant == Variant::Ring
    }

    pub fn plain(&self) -> Self {
        Label { variant: Variant::Plain, ..*self }
    }

    pub fn with_ring(&self, ring: bool) -> Self {
        Label { variant: if ring { Variant::Ring } else { Variant::Plain }, ..*self }
    }

    pub fn shape(&self) -> Shape {
        match (self.family, self.k) {
            (Family::U, 0) | (Family::U, 3) => Shape::Vector,
            (Family::U, _) => Shape::Sym,
            (_, 0) | (_, 3) => Shape::Scalar,
            _ => Shape::Vector,
        }
    }

    /// Parse names such as `W1`, `V2o`, `Z3hat`, `Z3tilde`, `U1o`.
    pub fn parse(s: &str) -> Result<Self> {
        let bad = || CoreError::UnknownLabel(s.to_string());
        let mut chars = s.chars();
        let family = match chars.next().ok_or_else(bad)? {
            'W' => Family::W,
            'L' => Family::L,
            'S' => Family::S,
            'V' => Family::V,
            'Z' => Family::Z,
            'U' => Family::U,
            _ => return Err(bad()),
        };
        let k = chars.next().and_then(|c| c.to_digit(10)).ok_or_else(bad)? as u8;
        if k > 3 {
            return Err(bad());
        }
        let variant = match chars.as_str() {
            "" => Variant::Plain,
            "o" => Variant::Ring,
            "hat" if family == Family::Z && k == 3 => Variant::Hat,
            "tilde" if family == Family::Z && k == 3 => Variant::Tilde,
            _ => return Err(bad()),
        };
        Ok(Label { family, k, variant })
    }

    /// Every label of the catalog.
    pub fn all() -> Vec<Label> {
        let mut out = Vec::new();
        for family in [Family::W, Family::L, Family::S, Family::V, Family::Z, Family::U] {
            for k in 0..4 {
                out.push(Label::new(family, k));
                out.push(Label::ring(family, k));
            }
        }
        out.push(Label { family: Family::Z, k: 3, variant: Variant::Hat });
        out.push(Label { family: Family::Z, k: 3, variant: Variant::Tilde });
        out
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fam = format!("{:?}", self.family);
        let suffix = match self.variant {
            Variant::Plain => "",
            Variant::Ring => "o",
            Variant::Hat => "hat",
            Variant::Tilde => "tilde",
        };
        write!(f, "{fam}{}{suffix}", self.k)
    }
}

/// A finite element space: linearly independent broken fields.
#[derive(Clone, Debug)]
pub struct FESpace<S> {
    pub name: String,
    pub deg: usize,
    pub shape: Shape,
    pub basis: Vec<BrokenField<S>>,
}

impl<S: Scalar> FESpace<S> {
    pub fn empty(name: impl Into<String>, shape: Shape, deg: usize) -> Self {
        FESpace { name: name.into(), deg, shape, basis: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Span of the given fields, keeping the first independent ones.
    pub fn span(name: impl Into<String>, shape: Shape, deg: usize, fields: Vec<BrokenField<S>>) -> Self {
        let fields: Vec<_> = fields.into_iter().map(|f| f.to_degree(deg)).collect();
        let keep = independent_subset(&fields);
        let basis = keep.into_iter().map(|i| fields[i].clone()).collect();
        FESpace { name: name.into(), deg, shape, basis }
    }

    /// Basis as the columns of a matrix over the ambient coefficients.
    pub fn matrix(&self) -> Matrix<S> {
        columns_matrix(&self.basis, self.shape, self.deg)
    }

    /// Exact column-space membership of one field.
    pub fn contains(&self, f: &BrokenField<S>) -> bool {
        self.contains_all(std::slice::from_ref(f))
    }

    /// Whether every field lies in the span of the basis.
    pub fn contains_all(&self, fs: &[BrokenField<S>]) -> bool {
        if fs.is_empty() {
            return true;
        }
        let deg = self.deg.max(fs.iter().map(|f| f.deg).max().unwrap());
        let mut all: Vec<BrokenField<S>> = self.basis.iter().map(|b| b.to_degree(deg)).collect();
        let base = rank_of(&all);
        all.extend(fs.iter().map(|f| f.to_degree(deg)));
        rank_of(&all) == base
    }

    /// Images of the basis under a map, spanned.
    pub fn image(
        &self,
        name: impl Into<String>,
        f: impl Fn(&BrokenField<S>) -> Result<BrokenField<S>> + Sync + Send,
    ) -> Result<FESpace<S>> {
        let imgs: Vec<BrokenField<S>> =
            par::map(&self.basis, |b| f(b)).into_iter().collect::<Result<_>>()?;
        let (shape, deg) = match imgs.first() {
            Some(g) => (g.shape, imgs.iter().map(|g| g.deg).max().unwrap()),
            None => (self.shape, self.deg.saturating_sub(1)),
        };
        Ok(FESpace::span(name, shape, deg, imgs))
    }
}

pub fn columns_matrix<S: Scalar>(fs: &[BrokenField<S>], shape: Shape, deg: usize) -> Matrix<S> {
    let n = crate::field::ambient_dim(shape, deg);
    let cols: Vec<Vec<S>> = fs.iter().map(|f| f.to_degree(deg).data).collect();
    Matrix::from_columns(&cols, n)
}

/// Rank of a list of fields of a common shape and degree.
pub fn rank_of<S: Scalar>(fs: &[BrokenField<S>]) -> usize {
    if fs.is_empty() {
        return 0;
    }
    let n = fs[0].data.len();
    // rows = fields is cheaper when there are fewer fields than coefficients
    let m = Matrix::from_rows(fs.iter().map(|f| f.data.clone()).collect(), n);
    rank(&m)
}

/// Indices of the first linearly independent fields.
pub fn independent_subset<S: Scalar>(fs: &[BrokenField<S>]) -> Vec<usize> {
    if fs.is_empty() {
        return Vec::new();
    }
    let n = fs[0].data.len();
    let cols: Vec<Vec<S>> = fs.iter().map(|f| f.data.clone()).collect();
    independent_columns(&Matrix::from_columns(&cols, n))
}

/// Derived quantities used by constraints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Q {
    Id,
    Grad,
    Curl,
    Div,
    /// `(curl u)'`
    CurlT,
    Inc,
    GradCurl,
    Skw,
    /// `sym grad u`
    Eps,
    /// `(curl eps(u))'`
    EpsCurlT,
}

impl Q {
    /// Number of derivatives taken.
    pub fn order(self) -> usize {
        match self {
            Q::Id | Q::Skw => 0,
            Q::Grad | Q::Curl | Q::Div | Q::CurlT | Q::Eps => 1,
            Q::Inc | Q::GradCurl | Q::EpsCurlT => 2,
        }
    }
}

/// Memoized derived fields of one field.
pub struct FieldCache<'a, S: Scalar> {
    pub ctx: &'a Ctx<S>,
    memo: RefCell<HashMap<Q, Rc<BrokenField<S>>>>,
}

impl<'a, S: Scalar> FieldCache<'a, S> {
    pub fn new(ctx: &'a Ctx<S>, f: BrokenField<S>) -> Self {
        let mut m = HashMap::new();
        m.insert(Q::Id, Rc::new(f.to_matrix()));
        FieldCache { ctx, memo: RefCell::new(m) }
    }

    pub fn get(&self, q: Q) -> Rc<BrokenField<S>> {
        if let Some(f) = self.memo.borrow().get(&q) {
            return f.clone();
        }
        let ctx = self.ctx;
        let f = match q {
            Q::Id => unreachable!(),
            Q::Grad => calculus::grad(ctx, &self.get(Q::Id)),
            Q::Curl => calculus::curl(ctx, &self.get(Q::Id)),
            Q::Div => calculus::div(ctx, &self.get(Q::Id)),
            Q::CurlT => Ok(self.get(Q::Curl).transpose()),
            Q::Inc => calculus::curl(ctx, &self.get(Q::CurlT)),
            Q::GradCurl => calculus::grad(ctx, &self.get(Q::Curl)),
            Q::Skw => Ok(self.get(Q::Id).skw()),
            Q::Eps => Ok(self.get(Q::Grad).sym().to_matrix()),
            Q::EpsCurlT => calculus::curl(ctx, &self.get(Q::Eps)).map(|c| c.transpose()),
        }
        .expect("shape checked by the recipe");
        let f = Rc::new(f);
        self.memo.borrow_mut().insert(q, f.clone());
        f
    }
}

/// Which part of a vector (or of each matrix row) a trace constraint sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Proj {
    Full,
    Tangential,
    Normal,
}

pub type Gen<S> = Arc<dyn Fn(&FieldCache<S>, &mut Vec<S>) + Send + Sync>;

/// Directions of a projection on the interior facet `f`.
fn facet_dirs<S: Scalar>(ctx: &Ctx<S>, f: &[usize; 3], proj: Proj) -> Vec<[S; 3]> {
    let p = &ctx.split.points;
    let t1 = geometry::sub(&p[f[0]], &p[f[2]]);
    let t2 = geometry::sub(&p[f[1]], &p[f[2]]);
    dirs(proj, &t1, &t2)
}

/// Directions of a projection on the boundary face opposite vertex `i`.
fn face_dirs<S: Scalar>(ctx: &Ctx<S>, i: usize, proj: Proj) -> Vec<[S; 3]> {
    let p = &ctx.split.points;
    let [a, b, c] = FACES[i];
    let t1 = geometry::sub(&p[b], &p[a]);
    let t2 = geometry::sub(&p[c], &p[a]);
    dirs(proj, &t1, &t2)
}

fn dirs<S: Scalar>(proj: Proj, t1: &geometry::Vec3, t2: &geometry::Vec3) -> Vec<[S; 3]> {
    let vs = match proj {
        Proj::Full => vec![geometry::v3(1, 0, 0), geometry::v3(0, 1, 0), geometry::v3(0, 0, 1)],
        Proj::Tangential => vec![t1.clone(), t2.clone()],
        Proj::Normal => vec![geometry::cross(t1, t2)],
    };
    vs.iter().map(|v| conv3(v).expect("geometry converts")).collect()
}

/// Project per-component traces and append all coefficients.
fn push_projected<S: Scalar>(tr: &[Poly<S>], dirs: &[[S; 3]], out: &mut Vec<S>) {
    if tr.len() == 1 {
        out.extend(tr[0].c.iter().cloned());
        return;
    }
    for row in tr.chunks(3) {
        for d in dirs {
            let n = row[0].c.len();
            for t in 0..n {
                let mut acc = S::zero();
                for c in 0..3 {
                    acc.add_mul_assign(&row[c].c[t], &d[c]);
                }
                out.push(acc);
            }
        }
    }
}

pub mod gens {
    //! Constraint generators.
    use super::*;

    /// Jump of `q` across every interior facet.
    pub fn facet_jump<S: Scalar>(ctx: &Ctx<S>, q: Q, proj: Proj) -> Gen<S> {
        let facets = ctx.split.interior_facets();
        let dirs: Vec<Vec<[S; 3]>> = facets.iter().map(|f| facet_dirs(ctx, f, proj)).collect();
        Arc::new(move |fc, out| {
            let f = fc.get(q);
            for (k, fa) in facets.iter().enumerate() {
                let sides = fc.ctx.split.subtets_containing(fa);
                let a = f.trace_on(&fc.ctx.split, sides[0], fa);
                let b = f.trace_on(&fc.ctx.split, sides[1], fa);
                let d: Vec<Poly<S>> = a.iter().zip(&b).map(|(x, y)| x.sub(y)).collect();
                push_projected(&d, &dirs[k], out);
            }
        })
    }

    /// Trace of `q` on the boundary of the parent.
    pub fn boundary_trace<S: Scalar>(ctx: &Ctx<S>, q: Q, proj: Proj) -> Gen<S> {
        let dirs: Vec<Vec<[S; 3]>> = (0..4).map(|i| face_dirs(ctx, i, proj)).collect();
        Arc::new(move |fc, out| {
            let f = fc.get(q);
            for i in 0..4 {
                let tr = f.trace_on(&fc.ctx.split, i, &FACES[i]);
                push_projected(&tr, &dirs[i], out);
            }
        })
    }

    /// Differences of the order-`k` derivatives of `q` between the subtets
    /// meeting at each parent vertex.
    pub fn vertex_jump<S: Scalar>(q: Q, k: usize) -> Gen<S> {
        Arc::new(move |fc, out| {
            let f = fc.get(q);
            let ctx = fc.ctx;
            for i in 0..4 {
                let subs = ctx.split.subtets_containing(&[i]);
                for c in 0..f.ncomp() {
                    let jets: Vec<Vec<S>> = subs
                        .iter()
                        .map(|&s| {
                            let m = ctx.split.local_index(s, i).unwrap();
                            vertex_jet(ctx, s, f.comp(s, c), f.deg, m, k)
                        })
                        .collect();
                    for other in &jets[1..] {
                        out.extend(jets[0].iter().zip(other).map(|(x, y)| x.sub(y)));
                    }
                }
            }
        })
    }

    /// The order-`k` derivatives of `q` at each parent vertex, from every
    /// subtet meeting there.
    pub fn vertex_zero<S: Scalar>(q: Q, k: usize) -> Gen<S> {
        Arc::new(move |fc, out| {
            let f = fc.get(q);
            let ctx = fc.ctx;
            for i in 0..4 {
                for s in ctx.split.subtets_containing(&[i]) {
                    let m = ctx.split.local_index(s, i).unwrap();
                    for c in 0..f.ncomp() {
                        out.extend(vertex_jet(ctx, s, f.comp(s, c), f.deg, m, k));
                    }
                }
            }
        })
    }

    /// Integral of every component of `q`.
    pub fn mean<S: Scalar>(q: Q) -> Gen<S> {
        Arc::new(move |fc, out| {
            let f = fc.get(q);
            out.extend(calculus::integrate_components(fc.ctx, &f));
        })
    }

    /// Vanishing of `q` pointwise.
    pub fn zero<S: Scalar>(q: Q) -> Gen<S> {
        Arc::new(move |fc, out| {
            out.extend(fc.get(q).data.iter().cloned());
        })
    }

    /// `L^2` orthogonality to the given fields.
    pub fn orthogonal<S: Scalar>(ctx: &Ctx<S>, to: &[BrokenField<S>], deg: usize) -> Gen<S> {
        let rows: Vec<Vec<S>> = to.iter().map(|k| calculus::moment_row(ctx, &k.to_matrix(), deg)).collect();
        Arc::new(move |fc, out| {
            let f = fc.get(Q::Id);
            for r in &rows {
                out.push(crate::field::dot(r, &f.data));
            }
        })
    }
}

/// Structural identifications on coefficient indices.
struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind { parent: (0..=n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // keep the larger index as root so the zero sentinel stays root
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.parent[lo] = hi;
        }
    }
}

/// Constraint assembly for one space.
pub struct Builder<'a, S: Scalar> {
    ctx: &'a Ctx<S>,
    shape: Shape,
    deg: usize,
    uf: UnionFind,
    base: Option<Vec<BrokenField<S>>>,
    gens: Vec<Gen<S>>,
}

impl<'a, S: Scalar> Builder<'a, S> {
    pub fn new(ctx: &'a Ctx<S>, shape: Shape, deg: usize) -> Self {
        let n = crate::field::ambient_dim(shape, deg);
        Builder { ctx, shape, deg, uf: UnionFind::new(n), base: None, gens: Vec::new() }
    }

    /// Start from the span of given fields instead of the broken space.
    pub fn from_basis(ctx: &'a Ctx<S>, shape: Shape, deg: usize, base: Vec<BrokenField<S>>) -> Self {
        let mut b = Self::new(ctx, shape, deg);
        b.base = Some(base.into_iter().map(|f| f.to_degree(deg)).collect());
        b
    }

    fn idx(&self, s: usize, c: usize, m: usize) -> usize {
        (s * self.shape.ncomp() + c) * poly::dim(4, self.deg) + m
    }

    fn zero_idx(&self) -> usize {
        self.uf.parent.len() - 1
    }

    /// Full continuity across interior facets.
    pub fn c0(&mut self) -> &mut Self {
        let split = self.ctx.split.clone();
        let t3 = monomials(3, self.deg);
        let t4 = monomials(4, self.deg);
        for f in split.interior_facets() {
            let sides = split.subtets_containing(&f);
            let la: Vec<usize> = f.iter().map(|&l| split.local_index(sides[0], l).unwrap()).collect();
            let lb: Vec<usize> = f.iter().map(|&l| split.local_index(sides[1], l).unwrap()).collect();
            for e in &t3.exps {
                let (mut ea, mut eb) = ([0u8; 4], [0u8; 4]);
                for t in 0..3 {
                    ea[la[t]] = e[t];
                    eb[lb[t]] = e[t];
                }
                let (ia, ib) = (t4.index(&ea), t4.index(&eb));
                for c in 0..self.shape.ncomp() {
                    let (x, y) = (self.idx(sides[0], c, ia), self.idx(sides[1], c, ib));
                    self.uf.union(x, y);
                }
            }
        }
        self
    }

    /// Zero trace of every component on the boundary.
    pub fn boundary_zero(&mut self) -> &mut Self {
        let t4 = monomials(4, self.deg);
        for s in 0..4 {
            // face opposite x_s is the local face opposite z
            for (m, e) in t4.exps.iter().enumerate() {
                if e[0] == 0 {
                    for c in 0..self.shape.ncomp() {
                        let z = self.zero_idx();
                        let i = self.idx(s, c, m);
                        self.uf.union(i, z);
                    }
                }
            }
        }
        self
    }

    /// Continuity of values at the parent vertices.
    pub fn vertex_equal(&mut self) -> &mut Self {
        self.vertex_values(false)
    }

    /// Vanishing values at the parent vertices.
    pub fn vertex_zero_values(&mut self) -> &mut Self {
        self.vertex_values(true)
    }

    fn vertex_values(&mut self, zero: bool) -> &mut Self {
        let split = self.ctx.split.clone();
        let t4 = monomials(4, self.deg);
        for i in 0..4 {
            let subs = split.subtets_containing(&[i]);
            for c in 0..self.shape.ncomp() {
                let ids: Vec<usize> = subs
                    .iter()
                    .map(|&s| {
                        let mut e = [0u8; 4];
                        e[split.local_index(s, i).unwrap()] = self.deg as u8;
                        self.idx(s, c, t4.index(&e))
                    })
                    .collect();
                for &x in &ids[1..] {
                    self.uf.union(ids[0], x);
                }
                if zero {
                    let z = self.zero_idx();
                    self.uf.union(ids[0], z);
                }
            }
        }
        self
    }

    pub fn add(&mut self, g: Gen<S>) -> &mut Self {
        self.gens.push(g);
        self
    }

    /// Initial basis after structural identifications.
    fn initial(&mut self) -> Vec<BrokenField<S>> {
        if let Some(b) = &self.base {
            return b.clone();
        }
        let n = self.zero_idx();
        let z = self.uf.find(n);
        let mut classes: Vec<Vec<usize>> = Vec::new();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        for i in 0..n {
            let r = self.uf.find(i);
            if r == z {
                continue;
            }
            let k = *slot.entry(r).or_insert_with(|| {
                classes.push(Vec::new());
                classes.len() - 1
            });
            classes[k].push(i);
        }
        classes
            .into_iter()
            .map(|cl| {
                let mut f = BrokenField::zeros(self.shape, self.deg);
                for i in cl {
                    f.data[i] = S::one();
                }
                f
            })
            .collect()
    }

    pub fn build(&mut self, name: impl Into<String>) -> FESpace<S> {
        let init = self.initial();
        let name = name.into();
        if self.gens.is_empty() || init.is_empty() {
            let basis = if self.base.is_some() {
                let keep = independent_subset(&init);
                keep.into_iter().map(|i| init[i].clone()).collect()
            } else {
                init
            };
            return FESpace { name, deg: self.deg, shape: self.shape, basis };
        }
        let ctx = self.ctx;
        let gens = &self.gens;
        let cols: Vec<Vec<S>> = par::map(&init, |f| {
            let fc = FieldCache::new(ctx, f.clone());
            let mut out = Vec::new();
            for g in gens {
                g(&fc, &mut out);
            }
            out
        });
        let rows = cols[0].len();
        let c = Matrix::from_columns(&cols, rows);
        let ns = nullspace_basis(&c);
        let basis = combine(&init, &ns);
        FESpace { name, deg: self.deg, shape: self.shape, basis }
    }
}

/// Fields `sum_i n[i][j] f_i`, one per column of `n`.
pub fn combine<S: Scalar>(fs: &[BrokenField<S>], n: &Matrix<S>) -> Vec<BrokenField<S>> {
    let k = n.cols();
    (0..k)
        .map(|j| {
            let mut out: BrokenField<S> = BrokenField::zeros(fs[0].shape, fs[0].deg);
            for (i, f) in fs.iter().enumerate() {
                let a = n.get(i, j);
                if a.is_zero() {
                    continue;
                }
                for (o, x) in out.data.iter_mut().zip(&f.data) {
                    if !x.is_zero() {
                        o.add_mul_assign(a, x);
                    }
                }
            }
            out
        })
        .collect()
}

/// Vector (or symmetric) fields whose components range over a scalar or
/// vector space: `X (x) V` for vector `X` means matrices with rows in `X`.
pub fn tensor_v<S: Scalar>(x: &FESpace<S>) -> Vec<BrokenField<S>> {
    let mut out = Vec::new();
    match x.shape {
        Shape::Scalar => {
            for i in 0..3 {
                for b in &x.basis {
                    let mut f = BrokenField::zeros(Shape::Vector, x.deg);
                    for s in 0..4 {
                        f.comp_mut(s, i).clone_from_slice(b.comp(s, 0));
                    }
                    out.push(f);
                }
            }
        }
        Shape::Vector => {
            for i in 0..3 {
                for b in &x.basis {
                    let z = BrokenField::zeros(Shape::Vector, x.deg);
                    let mut rows = [z.clone(), z.clone(), z];
                    rows[i] = b.clone();
                    out.push(BrokenField::from_rows(&rows));
                }
            }
        }
        s => panic!("tensor with V of {s:?}"),
    }
    out
}

/// Memoized space construction on one split.
pub struct Forge<S: Scalar> {
    pub ctx: Arc<Ctx<S>>,
    cache: Mutex<HashMap<(Label, usize), Arc<FESpace<S>>>>,
    extra: Mutex<HashMap<String, Arc<FESpace<S>>>>,
}

impl<S: Scalar> Forge<S> {
    pub fn new(ctx: Arc<Ctx<S>>) -> Self {
        Forge { ctx, cache: Mutex::new(HashMap::new()), extra: Mutex::new(HashMap::new()) }
    }

    pub fn from_split(split: &geometry::AlfeldSplit) -> Result<Self> {
        Ok(Self::new(Arc::new(Ctx::new(split)?)))
    }

    /// The space with the given label and degree; negative degrees give the
    /// zero space.
    pub fn space(&self, label: Label, r: i64) -> Result<Arc<FESpace<S>>> {
        if r < 0 {
            return Ok(Arc::new(FESpace::empty(format!("{label}_{r}"), label.shape(), 0)));
        }
        let r = r as usize;
        if let Some(s) = self.cache.lock().unwrap().get(&(label, r)) {
            return Ok(s.clone());
        }
        let s = Arc::new(self.build(label, r)?);
        self.cache.lock().unwrap().insert((label, r), s.clone());
        Ok(s)
    }

    /// Memoize an auxiliary space under a free-form key.
    pub fn memo(
        &self,
        key: &str,
        f: impl FnOnce() -> Result<FESpace<S>>,
    ) -> Result<Arc<FESpace<S>>> {
        if let Some(s) = self.extra.lock().unwrap().get(key) {
            return Ok(s.clone());
        }
        let s = Arc::new(f()?);
        self.extra.lock().unwrap().insert(key.to_string(), s.clone());
        Ok(s)
    }

    fn build(&self, label: Label, r: usize) -> Result<FESpace<S>> {
        use Family::{L, U, V, W, Z};
        use Family::S as Sf;
        let ctx = &*self.ctx;
        let ring = label.is_ring();
        let name = format!("{label}_{r}");
        let shape = label.shape();
        let mut b = Builder::new(ctx, shape, r);
        let k = label.k;
        let sp = match (label.family, k, label.variant) {
            (W, 0, _) | (L, 0, _) => {
                b.c0();
                if ring {
                    b.boundary_zero();
                }
                b.build(name)
            }
            (W, 1, _) => {
                b.add(gens::facet_jump(ctx, Q::Id, Proj::Tangential));
                if ring {
                    b.add(gens::boundary_trace(ctx, Q::Id, Proj::Tangential));
                }
                b.build(name)
            }
            (W, 2, _) => {
                b.add(gens::facet_jump(ctx, Q::Id, Proj::Normal));
                if ring {
                    b.add(gens::boundary_trace(ctx, Q::Id, Proj::Normal));
                }
                b.build(name)
            }
            (W, 3, _) => {
                if ring {
                    b.add(gens::mean(Q::Id));
                }
                b.build(name)
            }
            (L, 1, _) | (L, 2, _) => {
                b.c0();
                if ring {
                    b.boundary_zero();
                }
                b.build(name)
            }
            (L, 3, _) | (Sf, 3, _) => {
                b.c0();
                if ring {
                    b.add(gens::mean(Q::Id));
                }
                b.build(name)
            }
            (Sf, 0, _) | (V, 0, _) | (Z, 0, _) => {
                b.c0().add(gens::facet_jump(ctx, Q::Grad, Proj::Full));
                if ring {
                    b.boundary_zero().add(gens::boundary_trace(ctx, Q::Grad, Proj::Full));
                }
                b.build(name)
            }
            (Sf, 1, _) => {
                b.c0().add(gens::facet_jump(ctx, Q::Curl, Proj::Full));
                if ring {
                    b.boundary_zero().add(gens::boundary_trace(ctx, Q::Curl, Proj::Full));
                }
                b.build(name)
            }
            (Sf, 2, _) => {
                b.c0().add(gens::facet_jump(ctx, Q::Div, Proj::Full));
                if ring {
                    b.boundary_zero();
                }
                b.build(name)
            }
            (V, 1, _) | (Z, 2, _) => {
                b.c0();
                if ring {
                    b.boundary_zero().add(gens::vertex_zero(Q::Id, 1));
                } else {
                    b.add(gens::vertex_jump(Q::Id, 1));
                }
                b.build(name)
            }
            (V, 2, _) => {
                b.add(gens::facet_jump(ctx, Q::Id, Proj::Normal));
                if ring {
                    b.add(gens::boundary_trace(ctx, Q::Id, Proj::Normal));
                    b.vertex_zero_values();
                } else {
                    b.vertex_equal();
                }
                b.build(name)
            }
            (V, 3, _) => return Ok((*self.space(Label::new(W, 3).with_ring(ring), r as i64)?).clone().renamed(name)),
            (Z, 1, _) => {
                b.c0().add(gens::facet_jump(ctx, Q::Curl, Proj::Full));
                if ring {
                    b.boundary_zero()
                        .add(gens::boundary_trace(ctx, Q::Curl, Proj::Full))
                        .add(gens::vertex_zero(Q::Curl, 1));
                } else {
                    b.add(gens::vertex_jump(Q::Curl, 1));
                }
                b.build(name)
            }
            (Z, 3, Variant::Plain) => {
                b.vertex_equal();
                b.build(name)
            }
            (Z, 3, Variant::Ring) => {
                b.vertex_zero_values().add(gens::mean(Q::Id));
                b.build(name)
            }
            (Z, 3, Variant::Hat) => {
                b.vertex_zero_values();
                b.build(name)
            }
            (Z, 3, Variant::Tilde) => {
                b.vertex_equal().add(gens::mean(Q::Id));
                b.build(name)
            }
            (U, 0, _) => {
                let z = self.space(Label::new(Z, 0).with_ring(ring), r as i64)?;
                FESpace { name, deg: r, shape, basis: tensor_v(&z) }
            }
            (U, 1, _) => {
                let z = self.space(Label::new(Z, 1).with_ring(ring), r as i64)?;
                let syms: Vec<BrokenField<S>> = tensor_v(&z).iter().map(|f| f.sym()).collect();
                FESpace::span(name, shape, r, syms)
            }
            (U, 2, _) => {
                let v = self.space(Label::new(V, 2).with_ring(ring), r as i64)?;
                let mut bb = Builder::from_basis(ctx, Shape::Matrix, r, tensor_v(&v));
                bb.add(gens::zero(Q::Skw));
                let m = bb.build(name.clone());
                let basis = m.basis.iter().map(|f| f.sym()).collect();
                FESpace { name, deg: r, shape, basis }
            }
            (U, 3, _) => {
                let v = self.space(Label::new(V, 3), r as i64)?;
                let t = tensor_v(&v);
                if ring {
                    let rig = rigid_motions(ctx);
                    let mut bb = Builder::from_basis(ctx, Shape::Vector, r, t);
                    bb.add(gens::orthogonal(ctx, &rig, r));
                    bb.build(name)
                } else {
                    FESpace { name, deg: r, shape, basis: t }
                }
            }
            _ => return Err(CoreError::UnknownLabel(label.to_string())),
        };
        Ok(sp)
    }
}

impl<S: Scalar> FESpace<S> {
    pub fn renamed(mut self, name: String) -> Self {
        self.name = name;
        self
    }
}

/// A global polynomial (same formula on every subtet) of one component.
pub fn global_poly<S: Scalar>(ctx: &Ctx<S>, p: Poly<S>) -> BrokenField<S> {
    GlobalField { shape: Shape::Scalar, deg: p.deg, comps: vec![p] }.embed(ctx)
}

/// Cartesian coordinate functions as a vector field.
pub fn position<S: Scalar>(ctx: &Ctx<S>) -> BrokenField<S> {
    let vs = &ctx.split.parent.vertices;
    let comps = (0..3)
        .map(|k| {
            let c: Vec<S> = (0..4).map(|m| S::from_rational(&vs[m][k]).expect("coordinate")).collect();
            Poly::linear(&c)
        })
        .collect();
    GlobalField { shape: Shape::Vector, deg: 1, comps }.embed(ctx)
}

/// Basis of the rigid motions `a + b x x`: three translations, then the
/// rotations about the three axes.
pub fn rigid_motions<S: Scalar>(ctx: &Ctx<S>) -> Vec<BrokenField<S>> {
    let x = position(ctx);
    let mut out = Vec::new();
    for i in 0..3 {
        let mut f = BrokenField::zeros(Shape::Vector, 0);
        for s in 0..4 {
            f.comp_mut(s, i)[0] = S::one();
        }
        out.push(f.to_degree(1));
    }
    for i in 0..3 {
        let mut b = [S::zero(), S::zero(), S::zero()];
        b[i] = S::one();
        // b x x = mskw(b) x
        let mut bv = BrokenField::zeros(Shape::Vector, 0);
        for s in 0..4 {
            bv.comp_mut(s, i)[0] = S::one();
        }
        out.push(bv.mskw().mat_vec_field(&x));
    }
    out
}

impl<S: Scalar> BrokenField<S> {
    /// Pointwise matrix-vector product of a matrix field and a vector field.
    pub fn mat_vec_field(&self, v: &BrokenField<S>) -> BrokenField<S> {
        let m = self.to_matrix();
        let mut rows = Vec::new();
        for i in 0..3 {
            let mut acc: Option<BrokenField<S>> = None;
            for j in 0..3 {
                let t = v.component(j).mul_scalar_field(&m.component(3 * i + j));
                acc = Some(match acc {
                    None => t,
                    Some(a) => a.add(&t),
                });
            }
            rows.push(acc.unwrap());
        }
        BrokenField::from_components(Shape::Vector, &rows)
    }
}

/// The piecewise linear bubble with value 1 at z and 0 at the vertices.
pub fn bubble_mu<S: Scalar>() -> BrokenField<S> {
    let mut f = BrokenField::zeros(Shape::Scalar, 1);
    for s in 0..4 {
        f.comp_mut(s, 0)[0] = S::one();
    }
    f
}

/// Face bubble: product of the parent barycentrics of the vertices of face
/// `i`, as a polynomial in the parent barycentrics.
pub fn face_bubble<S: Scalar>(i: usize) -> Poly<S> {
    let mut e = [0u8; 4];
    for v in FACES[i] {
        e[v] = 1;
    }
    Poly::monomial(4, e)
}

/// The mean-free quadratics with `l_i(x_j) = delta_ij`.
pub fn ell_basis<S: Scalar>() -> [Poly<S>; 4] {
    std::array::from_fn(|i| {
        let others: Vec<usize> = (0..4).filter(|&j| j != i).collect();
        let (j, k) = (others[0], others[1]);
        let li = Poly::lambda(4, i).to_degree(2);
        let bubble = Poly::lambda(4, j).mul(&Poly::lambda(4, k));
        li.sub(&bubble.scale(&S::from_i64(5)))
    })
}

/// Global polynomials of degree `k` (all components) as broken fields.
pub fn global_polys<S: Scalar>(ctx: &Ctx<S>, shape: Shape, k: usize) -> Vec<BrokenField<S>> {
    let t = monomials(4, k);
    let mut out = Vec::new();
    for c in 0..shape.ncomp() {
        for e in &t.exps {
            let mut comps = vec![Poly::zero(4, k); shape.ncomp()];
            comps[c] = Poly::monomial(4, *e);
            out.push(GlobalField { shape, deg: k, comps }.embed(ctx));
        }
    }
    out
}

/// Closed-form dimension of a catalog space, or `None` outside the range
/// where a formula is available.
pub fn expected_dimension(label: Label, r: i64) -> Option<i64> {
    use Family::*;
    let w3 = |r: i64| 2 * (r + 1) * (r + 2) * (r + 3) / 3;
    let l0 = |r: i64| 5 + 10 * (r - 1) + 5 * (r - 2) * (r - 1) + 2 * (r - 3) * (r - 2) * (r - 1) / 3;
    let l0o = |r: i64| 1 + 4 * (r - 1) + 3 * (r - 2) * (r - 1) + 2 * (r - 3) * (r - 2) * (r - 1) / 3;
    let s0 = |r: i64| (r + 3) * (r + 2) * (r + 1) / 6 + (r - 3) * (r - 2) * (r - 1) / 2;
    let s0o = |r: i64| (2 * (r - 4) * (r - 3) * (r - 2) / 3).max(0);
    let v1o = |r: i64| (2 * r * r * r - 3 * r * r + 7 * r - 15).max(0);
    let ring = label.is_ring();
    let v = match (label.family, label.k, label.variant) {
        _ if r < 1 && label.family != U => return None,
        (W, 0, _) | (L, 0, _) => {
            if ring {
                l0o(r)
            } else {
                l0(r)
            }
        }
        (W, 1, _) => {
            if ring {
                4 * (r + 1) + 6 * (r - 1) * (r + 1) + 2 * (r - 2) * (r - 1) * (r + 1)
            } else {
                10 * (r + 1) + 10 * (r - 1) * (r + 1) + 2 * (r - 2) * (r - 1) * (r + 1)
            }
        }
        (W, 2, _) => {
            if ring {
                3 * (r + 1) * (r + 2) + 2 * (r - 1) * (r + 1) * (r + 2)
            } else {
                5 * (r + 1) * (r + 2) + 2 * (r - 1) * (r + 1) * (r + 2)
            }
        }
        (W, 3, _) | (V, 3, _) => w3(r) - ring as i64,
        (L, 1, _) | (L, 2, _) => 3 * if ring { l0o(r) } else { l0(r) },
        (L, 3, _) => l0(r) - ring as i64,
        (S, 0, _) | (V, 0, _) | (Z, 0, _) => {
            if ring {
                s0o(r)
            } else {
                s0(r)
            }
        }
        (V, 1, _) => {
            if ring {
                v1o(r)
            } else {
                6 * (r * r + 1) + v1o(r)
            }
        }
        (V, 2, _) => {
            if ring {
                2 * r * r * r + 7 * r * r + 7 * r - 10
            } else {
                2 * r * r * r + 9 * r * r + 13 * r - 6
            }
        }
        (Z, 1, _) if r >= 4 => {
            if ring {
                (2 * r - 3) * (r - 3) * (r - 2)
            } else {
                2 * r * r * r - 3 * r * r + 13 * r - 4
            }
        }
        (Z, 2, Variant::Ring) if r >= 2 => 2 * r * r * r - 3 * r * r + 7 * r - 15,
        (Z, 2, Variant::Plain) => 2 * r * r * r + 3 * r * r + 7 * r - 9,
        (Z, 3, Variant::Ring) if r >= 2 => w3(r) - 13,
        (Z, 3, Variant::Plain) => w3(r) - 8,
        (Z, 3, Variant::Hat) => w3(r) - 12,
        (Z, 3, Variant::Tilde) => w3(r) - 9,
        (U, 0, _) if r >= 5 => {
            let q = r - 1;
            if ring {
                2 * (q - 3) * (q - 2) * (q - 1)
            } else {
                2 * q * q * q + 16 * q + 12
            }
        }
        (U, 1, _) if r >= 4 => {
            if ring {
                4 * r * r * r - 21 * r * r + 29 * r - 6
            } else {
                4 * r * r * r - 3 * r * r + 17 * r - 6
            }
        }
        (U, 2, _) if r >= 2 => {
            let q = r + 2;
            if ring {
                q * (q - 1) * (4 * q - 11)
            } else {
                4 * q * q * q - 9 * q * q + 5 * q - 12
            }
        }
        (U, 3, _) if r >= 1 => {
            let q = r + 3;
            if ring {
                2 * q * q * q - 6 * q * q + 4 * q - 6
            } else {
                2 * q * (q - 1) * (q - 2)
            }
        }
        _ => return None,
    };
    Some(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AlfeldSplit, Tetrahedron};
    use alfeld_linalg::Fp0;

    fn forge() -> Forge<Fp0> {
        Forge::from_split(&AlfeldSplit::new(Tetrahedron::reference())).unwrap()
    }

    #[test]
    fn label_round_trip() {
        for l in Label::all() {
            assert_eq!(Label::parse(&l.to_string()).unwrap(), l);
        }
        assert!(Label::parse("Q1").is_err());
    }

    #[test]
    fn spot_dimensions() {
        let f = forge();
        let d = |s: &str, r| f.space(Label::parse(s).unwrap(), r).unwrap().dim();
        assert_eq!(d("W3", 2), 40);
        assert_eq!(d("S0", 3), 20);
        assert_eq!(d("S0", 5), 68);
        assert_eq!(d("V1o", 1), 0);
        assert_eq!(d("V2", 2), 72);
        assert_eq!(d("Z3", 2), 32);
        assert_eq!(d("W1", 2), 60);
    }
}
