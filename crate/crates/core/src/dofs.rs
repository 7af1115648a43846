//! Degrees of freedom as ordered blocks of linear functionals on the broken
//! space, with unisolvency matrices and canonical interpolation.
//!
//! Every functional is one of three kinds: a Cartesian derivative of a
//! derived quantity at a parent vertex, a moment of the trace of a derived
//! quantity on an edge or face against multiplier polynomials, or an
//! interior moment against a broken field. Projections such as `w . n` or
//! `Q u n` are folded into the multipliers, so a face functional is always
//! `sum_c mean_F(q_c m_c)`.
//!
//! Edge and face moments use the normalized measure (the integral of 1 is
//! 1) and direction vectors that are not normalized. Both only rescale a
//! functional or recombine a block, which leaves unisolvency and the
//! interpolant unchanged.

use std::collections::HashMap;
use std::sync::Arc;

use alfeld_linalg::{independent_columns, independent_rows, par, Lu, Matrix, Scalar};

use crate::calculus::{self, cartesian_indices, simplex_moment_row, vertex_jet};
use crate::error::{CoreError, Result};
use crate::field::{conv3, dot, restrict_poly, BrokenField, Ctx, Shape, SYM_IJ};
use crate::geometry::{self, edges_of_face, EDGES, FACES};
use crate::poly::{monomials, Poly};
use crate::spaces::{rigid_motions, FESpace, FieldCache, Family, Forge, Label, Q};

/// Moment of a trace against multipliers, one polynomial per component of
/// the quantity.
#[derive(Clone, Debug)]
pub struct Item<S> {
    pub sub: usize,
    pub labels: Vec<usize>,
    pub mult: Vec<(usize, Poly<S>)>,
}

#[derive(Clone, Debug)]
pub enum Kind<S> {
    /// Derivatives of the given orders of selected components at every
    /// parent vertex, optionally skipping one `(component, axes)` entry.
    Jets { q: Q, orders: Vec<usize>, comps: Vec<usize>, skip: Option<(usize, Vec<usize>)> },
    Moments { q: Q, items: Vec<Item<S>> },
    Interior { q: Q, kappas: Vec<BrokenField<S>> },
}

impl<S: Scalar> Kind<S> {
    pub fn len(&self) -> usize {
        match self {
            Kind::Jets { orders, comps, skip, .. } => {
                let per: usize = orders.iter().map(|&k| (k + 1) * (k + 2) / 2).sum();
                4 * (per * comps.len() - skip.is_some() as usize)
            }
            Kind::Moments { items, .. } => items.len(),
            Kind::Interior { kappas, .. } => kappas.len(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Block<S> {
    pub name: &'static str,
    /// The closed-form count of the block.
    pub expected: i64,
    pub parts: Vec<Kind<S>>,
}

impl<S: Scalar> Block<S> {
    pub fn len(&self) -> usize {
        self.parts.iter().map(|k| k.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug)]
pub struct DofSet<S> {
    pub label: Label,
    /// Polynomial degree of the space.
    pub deg: usize,
    pub blocks: Vec<Block<S>>,
}

/// Prepared rows of one block kind for a fixed input degree.
enum Prepared<S> {
    Jets { q: Q, qdeg: usize, orders: Vec<usize>, comps: Vec<usize>, skip: Option<(usize, Vec<usize>)> },
    Moments { q: Q, qdeg: usize, items: Vec<(usize, Vec<usize>, Vec<(usize, Vec<S>)>)> },
    Interior { q: Q, rows: Vec<Vec<S>> },
}

impl<S: Scalar> DofSet<S> {
    pub fn len(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(name, functionals, expected count)` per block.
    pub fn counts(&self) -> Vec<(&'static str, usize, i64)> {
        self.blocks.iter().map(|b| (b.name, b.len(), b.expected)).collect()
    }

    fn prepare(&self, ctx: &Ctx<S>, deg: usize) -> Vec<Prepared<S>> {
        let mut out = Vec::new();
        for b in &self.blocks {
            for k in &b.parts {
                out.push(match k {
                    Kind::Jets { q, orders, comps, skip } => Prepared::Jets {
                        q: *q,
                        qdeg: deg.saturating_sub(q.order()),
                        orders: orders.clone(),
                        comps: comps.clone(),
                        skip: skip.clone(),
                    },
                    Kind::Moments { q, items } => {
                        let qdeg = deg.saturating_sub(q.order());
                        let items = items
                            .iter()
                            .map(|it| {
                                let loc: Vec<usize> = it
                                    .labels
                                    .iter()
                                    .map(|&l| ctx.split.local_index(it.sub, l).expect("simplex in subtet"))
                                    .collect();
                                let rows = it
                                    .mult
                                    .iter()
                                    .map(|(c, p)| (*c, simplex_moment_row(ctx, p, qdeg)))
                                    .collect();
                                (it.sub, loc, rows)
                            })
                            .collect();
                        Prepared::Moments { q: *q, qdeg, items }
                    }
                    Kind::Interior { q, kappas } => {
                        let qdeg = deg.saturating_sub(q.order());
                        let rows = par::map(kappas, |k| calculus::moment_row(ctx, k, qdeg));
                        Prepared::Interior { q: *q, rows }
                    }
                });
            }
        }
        out
    }

    fn eval_one(&self, ctx: &Ctx<S>, prep: &[Prepared<S>], f: &BrokenField<S>) -> Vec<S> {
        let fc = FieldCache::new(ctx, f.clone());
        let mut out = Vec::with_capacity(self.len());
        for p in prep {
            match p {
                Prepared::Jets { q, qdeg, orders, comps, skip } => {
                    let g = fc.get(*q);
                    for a in 0..4 {
                        let s = ctx.split.subtets_containing(&[a])[0];
                        let m = ctx.split.local_index(s, a).unwrap();
                        for &k in orders {
                            let idx = cartesian_indices(k);
                            for &c in comps {
                                let jet = vertex_jet(ctx, s, g.comp(s, c), *qdeg, m, k);
                                for (axes, v) in idx.iter().zip(jet) {
                                    if let Some((sc, sa)) = skip {
                                        if *sc == c && sa == axes {
                                            continue;
                                        }
                                    }
                                    out.push(v);
                                }
                            }
                        }
                    }
                }
                Prepared::Moments { q, qdeg, items } => {
                    let g = fc.get(*q);
                    let mut traces: HashMap<(usize, Vec<usize>, usize), Vec<S>> = HashMap::new();
                    for (sub, loc, rows) in items {
                        let mut acc = S::zero();
                        for (c, row) in rows {
                            let t = traces
                                .entry((*sub, loc.clone(), *c))
                                .or_insert_with(|| restrict_poly(g.comp(*sub, *c), *qdeg, loc).c);
                            acc.add_assign(&dot(row, t));
                        }
                        out.push(acc);
                    }
                }
                Prepared::Interior { q, rows } => {
                    let g = fc.get(*q);
                    for r in rows {
                        out.push(dot(r, &g.data));
                    }
                }
            }
        }
        out
    }

    /// Dof values of each field as the columns of a matrix. All fields must
    /// have the same degree.
    pub fn evaluate(&self, ctx: &Ctx<S>, fields: &[BrokenField<S>]) -> Matrix<S> {
        if fields.is_empty() {
            return Matrix::zeros(self.len(), 0);
        }
        let deg = fields[0].deg;
        assert!(fields.iter().all(|f| f.deg == deg), "mixed degrees");
        let prep = self.prepare(ctx, deg);
        let cols = par::map(fields, |f| self.eval_one(ctx, &prep, f));
        Matrix::from_columns(&cols, self.len())
    }

    /// `M[i][j] = dof_i(basis_j)`.
    pub fn unisolvency_matrix(&self, ctx: &Ctx<S>, space: &FESpace<S>) -> Matrix<S> {
        self.evaluate(ctx, &space.basis)
    }
}

/// Canonical interpolation into a space.
pub struct Interpolator<S: Scalar> {
    pub dofs: Arc<DofSet<S>>,
    pub space: Arc<FESpace<S>>,
    /// Rows of the dof set used; all of them unless the set is redundant.
    pub rows: Vec<usize>,
    lu: Lu<S>,
}

impl<S: Scalar> Interpolator<S> {
    /// Factor the unisolvency matrix. A redundant dof set (more functionals
    /// than the dimension) is reduced to its first independent rows.
    pub fn new(ctx: &Ctx<S>, dofs: Arc<DofSet<S>>, space: Arc<FESpace<S>>) -> Result<Self> {
        let m = dofs.unisolvency_matrix(ctx, &space);
        let n = space.dim();
        if dofs.len() < n {
            return Err(CoreError::CountMismatch { label: dofs.label.to_string(), dofs: dofs.len(), dim: n });
        }
        let rows: Vec<usize> = if dofs.len() == n { (0..n).collect() } else { independent_rows(&m) };
        if rows.len() != n {
            return Err(alfeld_linalg::LinalgError::Singular { rank: rows.len(), size: n }.into());
        }
        let lu = Lu::factor(&m.select_rows(&rows))?;
        Ok(Interpolator { dofs, space, rows, lu })
    }

    /// Coefficients in the space basis of the interpolants of the inputs.
    pub fn coefficients(&self, ctx: &Ctx<S>, inputs: &[BrokenField<S>]) -> Result<Vec<Vec<S>>> {
        let vals = self.dofs.evaluate(ctx, inputs);
        let mut out = Vec::with_capacity(inputs.len());
        for j in 0..inputs.len() {
            let b: Vec<S> = self.rows.iter().map(|&i| vals.get(i, j).clone()).collect();
            out.push(self.lu.solve(&b)?);
        }
        Ok(out)
    }

    pub fn interpolate(&self, ctx: &Ctx<S>, inputs: &[BrokenField<S>]) -> Result<Vec<BrokenField<S>>> {
        let coeffs = self.coefficients(ctx, inputs)?;
        Ok(coeffs.iter().map(|c| self.combine(c)).collect())
    }

    pub fn combine(&self, c: &[S]) -> BrokenField<S> {
        let mut out = BrokenField::<S>::zeros(self.space.shape, self.space.deg);
        for (a, b) in c.iter().zip(&self.space.basis) {
            if a.is_zero() {
                continue;
            }
            for (o, x) in out.data.iter_mut().zip(&b.data) {
                o.add_mul_assign(a, x);
            }
        }
        out
    }

    /// Whether the full (possibly redundant) dof vector of each input is
    /// matched by its interpolant, i.e. the dropped functionals agree.
    pub fn consistent(&self, ctx: &Ctx<S>, inputs: &[BrokenField<S>]) -> Result<bool> {
        let vals = self.dofs.evaluate(ctx, inputs);
        let interp = self.interpolate(ctx, inputs)?;
        let back = self.dofs.evaluate(ctx, &interp);
        Ok(vals == back)
    }
}

/// Matrix layout indices of the symmetric components.
pub const SYM_COMPS: [usize; 6] = [0, 4, 8, 5, 2, 1];

/// Geometry of the parent in the working field.
struct Geo<S> {
    /// Outward face normals, not normalized.
    n: [[S; 3]; 4],
    t: [[[S; 3]; 2]; 4],
    /// Tangential gradients of the face barycentrics, in the order of
    /// [`FACES`].
    fg: [[[S; 3]; 3]; 4],
    /// Edge vectors `x_j - x_0` of each face, in the order of [`FACES`].
    fd: [[[S; 3]; 3]; 4],
    et: [[S; 3]; 6],
    en: [[[S; 3]; 2]; 6],
}

impl<S: Scalar> Geo<S> {
    fn new(ctx: &Ctx<S>) -> Result<Self> {
        let tet = &ctx.split.parent;
        let grads = tet.gradients();
        let z = || -> [S; 3] { std::array::from_fn(|_| S::zero()) };
        let mut g = Geo {
            n: std::array::from_fn(|_| z()),
            t: std::array::from_fn(|_| [z(), z()]),
            fg: std::array::from_fn(|_| [z(), z(), z()]),
            fd: std::array::from_fn(|_| [z(), z(), z()]),
            et: std::array::from_fn(|_| z()),
            en: std::array::from_fn(|_| [z(), z()]),
        };
        for f in 0..4 {
            let fr = ctx.split.face_frame(f, false)?;
            g.n[f] = conv3(&fr.n)?;
            g.t[f] = [conv3(&fr.t1)?, conv3(&fr.t2)?];
            let qm = fr.q();
            for (k, &v) in FACES[f].iter().enumerate() {
                let gr = &grads[v];
                let pg: geometry::Vec3 =
                    std::array::from_fn(|i| (0..3).map(|j| &qm[i][j] * &gr[j]).sum());
                g.fg[f][k] = conv3(&pg)?;
                g.fd[f][k] = conv3(&geometry::sub(&tet.vertices[v], &tet.vertices[FACES[f][0]]))?;
            }
        }
        for e in 0..6 {
            let fr = ctx.split.edge_frame(e);
            g.et[e] = conv3(&fr.t)?;
            g.en[e] = [conv3(&fr.n_plus)?, conv3(&fr.n_minus)?];
        }
        Ok(g)
    }
}

/// Monomial basis of `P_k` on a simplex with `nv` vertices; empty for `k < 0`.
fn pk<S: Scalar>(nv: usize, k: i64) -> Vec<Poly<S>> {
    if k < 0 {
        return Vec::new();
    }
    monomials(nv, k as usize).exps.iter().map(|e| Poly::monomial(nv, *e)).collect()
}

fn unit<S: Scalar>(c: usize) -> [S; 3] {
    std::array::from_fn(|i| if i == c { S::one() } else { S::zero() })
}

/// `p d` as a vector of polynomials.
fn vc<S: Scalar>(d: &[S; 3], p: &Poly<S>) -> Vec<Poly<S>> {
    d.iter().map(|x| p.scale(x)).collect()
}

/// `v w'` for a polynomial vector and a constant vector.
fn outer<S: Scalar>(v: &[Poly<S>], w: &[S; 3]) -> Vec<Poly<S>> {
    let mut out = Vec::with_capacity(9);
    for vi in v {
        for wj in w {
            out.push(vi.scale(wj));
        }
    }
    out
}

fn sym9<S: Scalar>(m: &[Poly<S>]) -> Vec<Poly<S>> {
    let half = S::from_ratio(1, 2);
    let mut out = Vec::with_capacity(9);
    for i in 0..3 {
        for j in 0..3 {
            out.push(m[3 * i + j].add(&m[3 * j + i]).scale(&half));
        }
    }
    out
}

fn add_vec<S: Scalar>(a: &[Poly<S>], b: &[Poly<S>]) -> Vec<Poly<S>> {
    a.iter().zip(b).map(|(x, y)| x.add(y)).collect()
}

/// Surface gradient of a face polynomial.
fn fgrad<S: Scalar>(g: &Geo<S>, f: usize, p: &Poly<S>) -> Vec<Poly<S>> {
    let mut out = vec![Poly::zero(3, p.deg.saturating_sub(1)); 3];
    for k in 0..3 {
        let d = p.d_lambda(k);
        out = add_vec(&out, &vc(&g.fg[f][k], &d));
    }
    out
}

/// Surface gradient of a polynomial vector: entry `(i, j)` is the
/// derivative of component `i` along direction `j`.
fn fgrad_vec<S: Scalar>(g: &Geo<S>, f: usize, v: &[Poly<S>]) -> Vec<Poly<S>> {
    let mut out = Vec::with_capacity(9);
    for vi in v {
        out.extend(fgrad(g, f, vi));
    }
    out
}

fn face_bubble3<S: Scalar>() -> Poly<S> {
    Poly::monomial(3, [1, 1, 1, 0])
}

/// Position relative to the first vertex of a face, in face barycentrics.
fn face_pos<S: Scalar>(g: &Geo<S>, f: usize) -> Vec<Poly<S>> {
    (0..3)
        .map(|c| Poly::linear(&[g.fd[f][0][c].clone(), g.fd[f][1][c].clone(), g.fd[f][2][c].clone()]))
        .collect()
}

fn cross_pv<S: Scalar>(a: &[S; 3], v: &[Poly<S>]) -> Vec<Poly<S>> {
    vec![
        v[2].scale(&a[1]).sub(&v[1].scale(&a[2])),
        v[0].scale(&a[2]).sub(&v[2].scale(&a[0])),
        v[1].scale(&a[0]).sub(&v[0].scale(&a[1])),
    ]
}

/// Coefficient vector of a polynomial vector written in degree `d`.
fn flat<S: Scalar>(v: &[Poly<S>], d: usize) -> Vec<S> {
    v.iter().flat_map(|p| p.to_degree(d).c).collect()
}

/// First independent members of `cands` modulo the span of `sub`.
fn complement<S: Scalar>(sub: &[Vec<Poly<S>>], cands: Vec<Vec<Poly<S>>>) -> Vec<Vec<Poly<S>>> {
    if cands.is_empty() {
        return cands;
    }
    let d = sub.iter().chain(&cands).flat_map(|v| v.iter().map(|p| p.deg)).max().unwrap();
    let cols: Vec<Vec<S>> = sub.iter().chain(&cands).map(|v| flat(v, d)).collect();
    let n = cols[0].len();
    let piv = independent_columns(&Matrix::from_columns(&cols, n));
    let ns = sub.len();
    let keep: Vec<usize> = piv.into_iter().filter(|&i| i >= ns).map(|i| i - ns).collect();
    let mut cands: Vec<Option<Vec<Poly<S>>>> = cands.into_iter().map(Some).collect();
    keep.into_iter().map(|i| cands[i].take().unwrap()).collect()
}

fn independent<S: Scalar>(cands: Vec<Vec<Poly<S>>>) -> Vec<Vec<Poly<S>>> {
    complement(&[], cands)
}

fn item<S: Scalar>(sub: usize, labels: &[usize], mult: Vec<Poly<S>>) -> Item<S> {
    let mult = mult.into_iter().enumerate().filter(|(_, p)| !p.is_zero()).collect();
    Item { sub, labels: labels.to_vec(), mult }
}

/// Tangent polynomial vectors `p t_1, p t_2`.
fn tangent_polys<S: Scalar>(g: &Geo<S>, f: usize, k: i64) -> Vec<Vec<Poly<S>>> {
    let mut out = Vec::new();
    for p in pk::<S>(3, k) {
        for t in &g.t[f] {
            out.push(vc(t, &p));
        }
    }
    out
}

/// The face Raviart-Thomas space `[P_{k-1}]^2 + x P_{k-1}`.
fn rt_face<S: Scalar>(g: &Geo<S>, f: usize, k: i64) -> Vec<Vec<Poly<S>>> {
    let mut c = tangent_polys(g, f, k - 1);
    let x = face_pos(g, f);
    for p in pk::<S>(3, k - 1) {
        c.push(x.iter().map(|xi| xi.mul(&p)).collect());
    }
    independent(c)
}

/// In-plane rigid motions of a face.
fn rigid_face<S: Scalar>(g: &Geo<S>, f: usize) -> Vec<Vec<Poly<S>>> {
    let one = Poly::constant(3, S::one());
    vec![vc(&g.t[f][0], &one), vc(&g.t[f][1], &one), cross_pv(&g.n[f], &face_pos(g, f))]
}

/// `eps_F(b_F^2 kappa)` for tangent `kappa` in `[P_k(F)]^2`.
fn eps_bubble2<S: Scalar>(g: &Geo<S>, f: usize, k: i64) -> Vec<Vec<Poly<S>>> {
    let b2 = face_bubble3::<S>().mul(&face_bubble3());
    tangent_polys(g, f, k)
        .into_iter()
        .map(|v| {
            let w: Vec<Poly<S>> = v.iter().map(|p| p.mul(&b2)).collect();
            sym9(&fgrad_vec(g, f, &w))
        })
        .collect()
}

/// `grad_F(b_F [P_k(F)]^2)` as tangent-tangent matrices.
fn grad_bubble_vec<S: Scalar>(g: &Geo<S>, f: usize, k: i64) -> Vec<Vec<Poly<S>>> {
    let b = face_bubble3::<S>();
    tangent_polys(g, f, k)
        .into_iter()
        .map(|v| {
            let w: Vec<Poly<S>> = v.iter().map(|p| p.mul(&b)).collect();
            fgrad_vec(g, f, &w)
        })
        .collect()
}

/// `grad_F(b_F^2 P_k(F))`.
fn grad_bubble2<S: Scalar>(g: &Geo<S>, f: usize, k: i64) -> Vec<Vec<Poly<S>>> {
    let b2 = face_bubble3::<S>().mul(&face_bubble3());
    pk::<S>(3, k).iter().map(|p| fgrad(g, f, &p.mul(&b2))).collect()
}

fn edge_sub<S: Scalar>(ctx: &Ctx<S>, e: usize) -> usize {
    ctx.split.subtets_containing(&EDGES[e])[0]
}

/// Edge moments of every Cartesian component against `P_k(e)`; the
/// multipliers are mapped through `wrap` (vector to quantity layout).
fn edge_vec_items<S: Scalar>(
    ctx: &Ctx<S>,
    k: i64,
    wrap: impl Fn(usize, Vec<Poly<S>>) -> Vec<Vec<Poly<S>>>,
) -> Vec<Item<S>> {
    let mut out = Vec::new();
    for e in 0..6 {
        let s = edge_sub(ctx, e);
        for c in 0..3 {
            for p in pk::<S>(2, k) {
                for m in wrap(e, vc(&unit(c), &p)) {
                    out.push(item(s, &EDGES[e], m));
                }
            }
        }
    }
    out
}

/// Moments on the edges of each face, seen from the subtet of that face.
fn face_edge_items<S: Scalar>(
    k: i64,
    mult: impl Fn(usize, &Poly<S>) -> Vec<Vec<Poly<S>>>,
) -> Vec<Item<S>> {
    let mut out = Vec::new();
    for f in 0..4 {
        for e in edges_of_face(f) {
            for p in pk::<S>(2, k) {
                for m in mult(f, &p) {
                    out.push(item(f, &EDGES[e], m));
                }
            }
        }
    }
    out
}

fn face_items<S: Scalar>(mults: impl Fn(usize) -> Vec<Vec<Poly<S>>>) -> Vec<Item<S>> {
    let mut out = Vec::new();
    for f in 0..4 {
        for m in mults(f) {
            out.push(item(f, &FACES[f], m));
        }
    }
    out
}

fn block<S>(name: &'static str, expected: i64, parts: Vec<Kind<S>>) -> Block<S> {
    Block { name, expected, parts }
}

fn moments<S>(q: Q, items: Vec<Item<S>>) -> Vec<Kind<S>> {
    vec![Kind::Moments { q, items }]
}

fn jets<S>(q: Q, orders: &[usize], comps: &[usize]) -> Kind<S> {
    Kind::Jets { q, orders: orders.to_vec(), comps: comps.to_vec(), skip: None }
}

/// Lowest family parameter `r` for which each family is available, and the
/// offset between `r` and the space degree.
pub fn window(label: Label) -> Option<(i64, i64)> {
    use Family::*;
    if label.is_ring() {
        return None;
    }
    Some(match (label.family, label.k) {
        (V, 0) => (5, 0),
        (V, 1) => (5, -1),
        (V, 2) => (5, -2),
        (V, 3) => (5, -3),
        (Z, 0) => (4, 1),
        (Z, 1) => (4, 0),
        (Z, 2) => (4, -1),
        (Z, 3) => (4, -2),
        (U, 0) => (4, 1),
        (U, 1) => (4, 0),
        (U, 2) => (4, -2),
        (U, 3) => (4, -3),
        _ => return None,
    })
}

/// Family parameter `r` of a family at a space degree.
pub fn family_r(label: Label, deg: usize) -> Result<i64> {
    let (lo, off) = window(label).ok_or_else(|| CoreError::UnknownLabel(format!("no dofs for {label}")))?;
    let r = deg as i64 - off;
    if r < lo {
        return Err(CoreError::UnsupportedRange {
            what: format!("dofs of {label}"),
            bound: format!("degree >= {}", lo + off),
            r: deg,
        });
    }
    Ok(r)
}

/// Spaces with interior moment multipliers, cached in the forge.
struct Images<'a, S: Scalar> {
    forge: &'a Forge<S>,
}

impl<'a, S: Scalar> Images<'a, S> {
    fn space(&self, l: &str, r: i64) -> Result<Arc<FESpace<S>>> {
        self.forge.space(Label::parse(l)?, r)
    }

    /// Image of a space under a derived quantity, in matrix layout.
    fn image(&self, l: &str, r: i64, q: Q) -> Result<Vec<BrokenField<S>>> {
        let key = format!("image {l} {r} {q:?}");
        let sp = self.space(l, r)?;
        let ctx = &*self.forge.ctx;
        let im = self.forge.memo(&key, || {
            sp.image(key.clone(), |b| Ok((*FieldCache::new(ctx, b.clone()).get(q)).clone()))
        })?;
        Ok(im.basis.clone())
    }

    fn basis(&self, l: &str, r: i64) -> Result<Vec<BrokenField<S>>> {
        Ok(self.space(l, r)?.basis.iter().map(|b| b.to_matrix()).collect())
    }
}

/// The dof set of a space, by label and space degree.
pub fn dof_set<S: Scalar>(forge: &Forge<S>, label: Label, deg: usize) -> Result<DofSet<S>> {
    let r = family_r(label, deg)?;
    let ctx = &*forge.ctx;
    let g = Geo::new(ctx)?;
    let im = Images { forge };
    let blocks = match (label.family, label.k) {
        (Family::V, 0) => v0_dofs(ctx, &g, &im, r)?,
        (Family::Z, 0) => v0_dofs(ctx, &g, &im, r + 1)?,
        (Family::V, 1) => v1_dofs(ctx, &g, &im, r)?,
        (Family::V, 2) => v2_dofs(&g, &im, r)?,
        (Family::V, 3) => v3_dofs(&im, r)?,
        (Family::Z, 1) => z1_dofs(ctx, &g, &im, r)?,
        (Family::Z, 2) => z2_dofs(ctx, &im, r)?,
        (Family::Z, 3) => z3_dofs(&im, r)?,
        (Family::U, 0) => u0_dofs(ctx, &g, &im, r)?,
        (Family::U, 1) => u1_dofs(ctx, &g, &im, r)?,
        (Family::U, 2) => u2_dofs(&g, &im, r)?,
        (Family::U, 3) => u3_dofs(ctx, &im, r)?,
        _ => return Err(CoreError::UnknownLabel(label.to_string())),
    };
    Ok(DofSet { label, deg, blocks })
}

fn v0_dofs<S: Scalar>(ctx: &Ctx<S>, g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    let mut edge_val = Vec::new();
    let mut edge_dn = Vec::new();
    for e in 0..6 {
        let s = edge_sub(ctx, e);
        for p in pk::<S>(2, r - 6) {
            edge_val.push(item(s, &EDGES[e], vec![p]));
        }
        for n in &g.en[e] {
            for p in pk::<S>(2, r - 5) {
                edge_dn.push(item(s, &EDGES[e], vc(n, &p)));
            }
        }
    }
    Ok(vec![
        block("vertex D^a, |a|<=2", 40, vec![jets(Q::Id, &[0, 1, 2], &[0])]),
        block("edge values", 6 * (r - 5), moments(Q::Id, edge_val)),
        block("edge normal derivatives", 12 * (r - 4), moments(Q::Grad, edge_dn)),
        block(
            "face values",
            2 * (r - 5) * (r - 4),
            moments(Q::Id, face_items(|_| pk::<S>(3, r - 6).into_iter().map(|p| vec![p]).collect())),
        ),
        block(
            "face normal derivatives",
            2 * (r - 3) * (r - 2),
            moments(Q::Grad, face_items(|f| pk::<S>(3, r - 4).iter().map(|p| vc(&g.n[f], p)).collect())),
        ),
        block(
            "interior grad . grad",
            2 * (r - 4) * (r - 3) * (r - 2) / 3,
            vec![Kind::Interior { q: Q::Grad, kappas: im.image("V0o", r, Q::Grad)? }],
        ),
    ])
}

fn v1_dofs<S: Scalar>(ctx: &Ctx<S>, g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    Ok(vec![
        block("vertex D^a, |a|<=1", 48, vec![jets(Q::Id, &[0, 1], &[0, 1, 2])]),
        block("edge moments", 18 * (r - 4), moments(Q::Id, edge_vec_items(ctx, r - 5, |_, m| vec![m]))),
        block(
            "edge normal curl",
            12 * (r - 3),
            moments(Q::Curl, face_edge_items(r - 4, |f, p| vec![vc(&g.n[f], p)])),
        ),
        block(
            "face normal moments",
            2 * (r - 2) * (r - 3),
            moments(Q::Id, face_items(|f| pk::<S>(3, r - 4).iter().map(|p| vc(&g.n[f], p)).collect())),
        ),
        block("face tangential moments", 4 * (r - 3) * (r - 5), moments(Q::Id, face_items(|f| rt_face(g, f, r - 5)))),
        block(
            "interior against grad",
            2 * (r - 4) * (r - 3) * (r - 2) / 3,
            vec![Kind::Interior { q: Q::Id, kappas: im.image("V0o", r, Q::Grad)? }],
        ),
        block(
            "interior curl against curl",
            (4 * r * r * r - 9 * r * r + 5 * r - 33) / 3,
            vec![Kind::Interior { q: Q::Curl, kappas: im.image("V1o", r - 1, Q::Curl)? }],
        ),
    ])
}

fn v2_dofs<S: Scalar>(g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    Ok(vec![
        block("vertex values", 12, vec![jets(Q::Id, &[0], &[0, 1, 2])]),
        block("edge normal moments", 12 * (r - 3), moments(Q::Id, face_edge_items(r - 4, |f, p| vec![vc(&g.n[f], p)]))),
        block(
            "face normal moments",
            2 * (r - 3) * (r - 4),
            moments(Q::Id, face_items(|f| pk::<S>(3, r - 5).iter().map(|p| vc(&g.n[f], p)).collect())),
        ),
        block(
            "interior against curl",
            (4 * r * r * r - 9 * r * r + 5 * r - 33) / 3,
            vec![Kind::Interior { q: Q::Id, kappas: im.image("V1o", r - 1, Q::Curl)? }],
        ),
        block(
            "interior div . div",
            2 * (r - 2) * (r - 1) * r / 3 - 1,
            vec![Kind::Interior { q: Q::Div, kappas: im.image("V2o", r - 2, Q::Div)? }],
        ),
    ])
}

fn mean_kappa<S: Scalar>() -> BrokenField<S> {
    BrokenField::from_data(Shape::Scalar, 0, vec![S::one(); 4])
}

fn v3_dofs<S: Scalar>(im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    Ok(vec![
        block("mean", 1, vec![Kind::Interior { q: Q::Id, kappas: vec![mean_kappa()] }]),
        block(
            "interior moments",
            2 * r * (r - 1) * (r - 2) / 3 - 1,
            vec![Kind::Interior { q: Q::Id, kappas: im.basis("V3o", r - 3)? }],
        ),
    ])
}

fn z1_dofs<S: Scalar>(ctx: &Ctx<S>, g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    // div curl = 0 makes d_3 (curl)_3 redundant at each vertex
    let curl_jets = Kind::Jets { q: Q::Curl, orders: vec![1], comps: vec![0, 1, 2], skip: Some((2, vec![2])) };
    Ok(vec![
        block("vertex D^a w, D^b curl w", 80, vec![jets(Q::Id, &[0, 1], &[0, 1, 2]), curl_jets]),
        block("edge moments", 18 * (r - 3), moments(Q::Id, edge_vec_items(ctx, r - 4, |_, m| vec![m]))),
        block("edge curl moments", 18 * (r - 4), moments(Q::Curl, edge_vec_items(ctx, r - 5, |_, m| vec![m]))),
        block(
            "face normal moments",
            2 * (r - 2) * (r - 1),
            moments(Q::Id, face_items(|f| pk::<S>(3, r - 3).iter().map(|p| vc(&g.n[f], p)).collect())),
        ),
        block("face tangential moments", 4 * (r - 2) * (r - 4), moments(Q::Id, face_items(|f| rt_face(g, f, r - 4)))),
        block("face tangential curl", 4 * (r - 3) * (r - 2), moments(Q::Curl, face_items(|f| tangent_polys(g, f, r - 4)))),
        block(
            "interior against grad",
            2 * (r - 3) * (r - 2) * (r - 1) / 3,
            vec![Kind::Interior { q: Q::Id, kappas: im.image("Z0o", r + 1, Q::Grad)? }],
        ),
        block(
            "interior curl against curl",
            (r - 3) * (r - 2) * (4 * r - 7) / 3,
            vec![Kind::Interior { q: Q::Curl, kappas: im.image("Z1o", r, Q::Curl)? }],
        ),
    ])
}

fn z2_dofs<S: Scalar>(ctx: &Ctx<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    let mut face = Vec::new();
    for f in 0..4 {
        for c in 0..3 {
            for p in pk::<S>(3, r - 4) {
                face.push(item(f, &FACES[f], vc(&unit(c), &p)));
            }
        }
    }
    Ok(vec![
        block("vertex D^a, |a|<=1", 48, vec![jets(Q::Id, &[0, 1], &[0, 1, 2])]),
        block("edge moments", 18 * (r - 4), moments(Q::Id, edge_vec_items(ctx, r - 5, |_, m| vec![m]))),
        block("face moments", 6 * (r - 3) * (r - 2), moments(Q::Id, face)),
        block(
            "interior against curl",
            (r - 3) * (r - 2) * (4 * r - 7) / 3,
            vec![Kind::Interior { q: Q::Id, kappas: im.image("Z1o", r, Q::Curl)? }],
        ),
        block(
            "interior div against div",
            2 * (r + 1) * r * (r - 1) / 3 - 13,
            vec![Kind::Interior { q: Q::Div, kappas: im.image("Z2o", r - 1, Q::Div)? }],
        ),
    ])
}

fn z3_dofs<S: Scalar>(im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    Ok(vec![
        block("vertex values", 4, vec![jets(Q::Id, &[0], &[0])]),
        block("mean", 1, vec![Kind::Interior { q: Q::Id, kappas: vec![mean_kappa()] }]),
        block(
            "interior moments",
            2 * (r + 1) * r * (r - 1) / 3 - 13,
            vec![Kind::Interior { q: Q::Id, kappas: im.basis("Z3o", r - 2)? }],
        ),
    ])
}

fn u0_dofs<S: Scalar>(ctx: &Ctx<S>, g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    let dn = edge_vec_items(ctx, r - 4, |e, m| g.en[e].iter().map(|n| outer(&m, n)).collect());
    Ok(vec![
        block("vertex D^a, |a|<=2", 120, vec![jets(Q::Id, &[0, 1, 2], &[0, 1, 2])]),
        block("edge moments", 18 * (r - 4), moments(Q::Id, edge_vec_items(ctx, r - 5, |_, m| vec![m]))),
        block("edge normal derivatives", 36 * (r - 3), moments(Q::Grad, dn)),
        block(
            "face eps_Fn",
            2 * (r - 4) * (r - 3),
            moments(Q::Eps, face_items(|f| grad_bubble2(g, f, r - 5).iter().map(|k| outer(k, &g.n[f])).collect())),
        ),
        block("face eps_F", 4 * (r - 4) * (r - 3), moments(Q::Grad, face_items(|f| eps_bubble2(g, f, r - 5)))),
        block(
            "face d_n(w . n)",
            2 * (r - 2) * (r - 1),
            moments(Q::Grad, face_items(|f| pk::<S>(3, r - 3).iter().map(|p| outer(&vc(&g.n[f], p), &g.n[f])).collect())),
        ),
        block(
            "face (curl eps)'_FF",
            4 * (r - 2) * (r - 1),
            moments(Q::EpsCurlT, face_items(|f| grad_bubble_vec(g, f, r - 3))),
        ),
        block(
            "interior eps : eps",
            2 * (r - 3) * (r - 2) * (r - 1),
            vec![Kind::Interior { q: Q::Eps, kappas: im.image("U0o", r + 1, Q::Eps)? }],
        ),
    ])
}

fn u1_dofs<S: Scalar>(ctx: &Ctx<S>, g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    let mut e1 = Vec::new();
    for e in 0..6 {
        let s = edge_sub(ctx, e);
        for &(i, j) in &SYM_IJ {
            for p in pk::<S>(2, r - 4) {
                let mut m = vec![Poly::zero(2, 0); 9];
                m[3 * i + j] = p.clone();
                m[3 * j + i] = p.clone();
                e1.push(item(s, &EDGES[e], m));
            }
        }
    }
    let e2 = edge_vec_items(ctx, r - 3, |e, m| vec![outer(&m, &g.et[e])]);
    let f2 = face_edge_items(r - 4, |f, p| (0..3).map(|c| outer(&vc(&unit(c), p), &g.n[f])).collect());
    let p1: Vec<Vec<Poly<S>>> = pk::<S>(3, 1).into_iter().map(|p| vec![p]).collect();
    let f3a = face_items(|f| {
        let c = complement(&p1, pk::<S>(3, r - 5).into_iter().map(|p| vec![p]).collect());
        c.iter().map(|p| outer(&vc(&g.n[f], &p[0]), &g.n[f])).collect()
    });
    let f3b = face_items(|f| {
        let c = complement(&rigid_face(g, f), tangent_polys(g, f, r - 5));
        c.iter().map(|k| outer(k, &g.n[f])).collect()
    });
    let a = |r: i64| (r - 4) * (r - 3) / 2;
    Ok(vec![
        block("vertex D^a, |a|<=1", 96, vec![jets(Q::Id, &[0, 1], &SYM_COMPS)]),
        block("vertex inc", 24, vec![jets(Q::Inc, &[0], &SYM_COMPS)]),
        block("edge moments", 36 * (r - 3), moments(Q::Id, e1)),
        block("edge (curl u)' t", 18 * (r - 2), moments(Q::CurlT, e2)),
        block("edge inc n", 36 * (r - 3), moments(Q::Inc, f2)),
        block("face inc_nn", 4 * (a(r) - 3), moments(Q::Inc, f3a)),
        block("face inc_Fn", 4 * (2 * a(r) - 3), moments(Q::Inc, f3b)),
        block("face u_FF", 8 * a(r), moments(Q::Id, face_items(|f| eps_bubble2(g, f, r - 5)))),
        block("face (curl u)'_FF", 4 * (r - 2) * (r - 1), moments(Q::CurlT, face_items(|f| grad_bubble_vec(g, f, r - 3)))),
        block(
            "face u_Fn",
            4 * a(r),
            moments(Q::Id, face_items(|f| grad_bubble2(g, f, r - 5).iter().map(|k| outer(k, &g.n[f])).collect())),
        ),
        block(
            "face u_nn",
            2 * (r - 2) * (r - 1),
            moments(Q::Id, face_items(|f| pk::<S>(3, r - 3).iter().map(|p| outer(&vc(&g.n[f], p), &g.n[f])).collect())),
        ),
        block(
            "interior inc : inc",
            2 * r * r * r - 9 * r * r + 7 * r + 6,
            vec![Kind::Interior { q: Q::Inc, kappas: im.image("U1o", r, Q::Inc)? }],
        ),
        block(
            "interior u : eps",
            2 * (r - 3) * (r - 2) * (r - 1),
            vec![Kind::Interior { q: Q::Id, kappas: im.image("U0o", r + 1, Q::Eps)? }],
        ),
    ])
}

fn u2_dofs<S: Scalar>(g: &Geo<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    let b = face_edge_items(r - 4, |f, p| (0..3).map(|c| outer(&vc(&unit(c), p), &g.n[f])).collect());
    let c = face_items(|f| {
        let mut out = Vec::new();
        for c in 0..3 {
            for p in pk::<S>(3, r - 5) {
                out.push(outer(&vc(&unit(c), &p), &g.n[f]));
            }
        }
        out
    });
    Ok(vec![
        block("vertex values", 24, vec![jets(Q::Id, &[0], &SYM_COMPS)]),
        block("edge sigma n", 36 * (r - 3), moments(Q::Id, b)),
        block("face sigma n", 6 * (r - 3) * (r - 4), moments(Q::Id, c)),
        block(
            "interior against inc",
            2 * r * r * r - 9 * r * r + 7 * r + 6,
            vec![Kind::Interior { q: Q::Id, kappas: im.image("U1o", r, Q::Inc)? }],
        ),
        block(
            "interior div against U3o",
            2 * r * r * r - 6 * r * r + 4 * r - 6,
            vec![Kind::Interior { q: Q::Div, kappas: im.basis("U3o", r - 3)? }],
        ),
    ])
}

fn u3_dofs<S: Scalar>(ctx: &Ctx<S>, im: &Images<S>, r: i64) -> Result<Vec<Block<S>>> {
    Ok(vec![
        block("rigid motions", 6, vec![Kind::Interior { q: Q::Id, kappas: rigid_motions(ctx) }]),
        block(
            "interior moments",
            2 * r * r * r - 6 * r * r + 4 * r - 6,
            vec![Kind::Interior { q: Q::Id, kappas: im.basis("U3o", r - 3)? }],
        ),
    ])
}

/// Shorthand for the space a dof set belongs to.
pub fn space_of<S: Scalar>(forge: &Forge<S>, label: Label, deg: usize) -> Result<Arc<FESpace<S>>> {
    forge.space(label, deg as i64)
}

/// Outcome of a unisolvency check.
#[derive(Clone, Debug, serde::Serialize)]
pub struct Unisolvency {
    pub label: String,
    pub deg: usize,
    pub dim: usize,
    pub dofs: usize,
    pub rank: usize,
    /// `(block, functionals, expected count)`.
    pub blocks: Vec<(String, usize, i64)>,
}

impl Unisolvency {
    pub fn counts_match(&self) -> bool {
        self.blocks.iter().all(|(_, n, e)| *n as i64 == *e)
    }

    pub fn nonsingular(&self) -> bool {
        self.dofs == self.dim && self.rank == self.dim
    }
}

pub fn check_unisolvent<S: Scalar>(forge: &Forge<S>, label: Label, deg: usize) -> Result<Unisolvency> {
    let dofs = dof_set(forge, label, deg)?;
    let space = space_of(forge, label, deg)?;
    let m = dofs.unisolvency_matrix(&forge.ctx, &space);
    Ok(Unisolvency {
        label: label.to_string(),
        deg,
        dim: space.dim(),
        dofs: dofs.len(),
        rank: alfeld_linalg::rank(&m),
        blocks: dofs.counts().into_iter().map(|(n, a, e)| (n.to_string(), a, e)).collect(),
    })
}
