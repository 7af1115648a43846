//! Small conforming tetrahedral meshes with an Alfeld split of every
//! element, global spaces assembled from the local ones by interface
//! constraints, and the global complex checks.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::time::Instant;

use alfeld_linalg::{independent_columns, nullspace_basis, par, parse_rational, q, rank, Matrix, Rational, Scalar};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calculus::vertex_jet;
use crate::dofs::{dof_set, Interpolator};
use crate::error::{CoreError, Result};
use crate::field::{conv, conv3, BrokenField, Ctx, GlobalField, Shape};
use crate::geometry::{self, v3, AlfeldSplit, Tetrahedron, Vec3, EDGES, FACES};
use crate::identities::{operator_matrix, Coords};
use crate::poly::Poly;
use crate::spaces::{FESpace, FieldCache, Forge, Label, Proj, Q};
use crate::verify::{Chain, Op, Report};

/// Names of the built-in meshes.
pub const BUILTIN: [&str; 3] = ["single-tet", "two-tets", "cube-6"];

/// Largest mesh accepted, in elements.
pub const MAX_ELEMENTS: usize = 6;

#[derive(Clone, Debug)]
pub struct MeshComplex {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub tets: Vec<[usize; 4]>,
    /// Barycentric split point of each element.
    pub split_points: Vec<[Rational; 4]>,
    /// Sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// Sorted vertex triples.
    pub faces: Vec<[usize; 3]>,
    pub contractible: bool,
}

fn sorted<const N: usize>(mut a: [usize; N]) -> [usize; N] {
    a.sort_unstable();
    a
}

impl MeshComplex {
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        tets: Vec<[usize; 4]>,
        split_points: Vec<Option<[Rational; 4]>>,
    ) -> Result<Self> {
        let bad = |s: String| CoreError::Mesh(s);
        if tets.is_empty() {
            return Err(bad("no tetrahedra".into()));
        }
        if tets.len() > MAX_ELEMENTS {
            return Err(bad(format!("{} elements, at most {MAX_ELEMENTS} supported", tets.len())));
        }
        let mut edges = BTreeSet::new();
        let mut faces: BTreeMap<[usize; 3], Vec<usize>> = BTreeMap::new();
        for (e, t) in tets.iter().enumerate() {
            if t.iter().any(|&v| v >= vertices.len()) {
                return Err(bad(format!("tetrahedron {e} refers to a missing vertex")));
            }
            if sorted(*t).windows(2).any(|w| w[0] == w[1]) {
                return Err(bad(format!("tetrahedron {e} repeats a vertex")));
            }
            Tetrahedron::new(t.map(|v| vertices[v].clone()))
                .map_err(|_| bad(format!("tetrahedron {e} is degenerate")))?;
            for [a, b] in EDGES {
                edges.insert(sorted([t[a], t[b]]));
            }
            for f in FACES {
                faces.entry(sorted(f.map(|i| t[i]))).or_default().push(e);
            }
        }
        if faces.values().any(|v| v.len() == 2 && v[0] == v[1]) {
            return Err(bad("duplicate tetrahedron".into()));
        }
        for (f, owners) in &faces {
            if owners.len() > 2 {
                return Err(bad(format!("face {f:?} is shared by {} tetrahedra", owners.len())));
            }
            if owners.len() == 2 {
                // the two elements must lie on opposite sides of the face
                let p = f.map(|v| vertices[v].clone());
                let n = geometry::cross(&geometry::sub(&p[1], &p[0]), &geometry::sub(&p[2], &p[0]));
                let side = |e: usize| {
                    let apex = tets[e].iter().find(|v| !f.contains(v)).unwrap();
                    geometry::dot(&n, &geometry::sub(&vertices[*apex], &p[0]))
                };
                let (s0, s1) = (side(owners[0]), side(owners[1]));
                if s0.clone() * s1 >= q(0, 1) {
                    return Err(bad(format!("elements {owners:?} overlap across face {f:?}")));
                }
            }
        }
        let splits = split_points
            .into_iter()
            .chain(std::iter::repeat(None))
            .take(tets.len())
            .map(|s| s.unwrap_or_else(|| [q(1, 4), q(1, 4), q(1, 4), q(1, 4)]))
            .collect();
        let used: BTreeSet<usize> = tets.iter().flatten().copied().collect();
        if used.len() != vertices.len() {
            return Err(bad("unused vertex".into()));
        }
        let mut m = MeshComplex {
            name: name.into(),
            vertices,
            tets,
            split_points: splits,
            edges: edges.into_iter().collect(),
            faces: faces.into_keys().collect(),
            contractible: false,
        };
        // a face-connected mesh with Euler characteristic 1 is treated as
        // contractible; every built-in mesh is a ball
        m.contractible = m.euler() == 1 && m.face_connected();
        m.splits()?;
        Ok(m)
    }

    /// `(#0, #1, #2, #3)`.
    pub fn counts(&self) -> [usize; 4] {
        [self.vertices.len(), self.edges.len(), self.faces.len(), self.tets.len()]
    }

    pub fn euler(&self) -> i64 {
        let c = self.counts();
        c[0] as i64 - c[1] as i64 + c[2] as i64 - c[3] as i64
    }

    fn face_connected(&self) -> bool {
        let n = self.tets.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(e) = stack.pop() {
            for (o, seen_o) in seen.iter_mut().enumerate() {
                let shared = self.tets[e].iter().filter(|v| self.tets[o].contains(v)).count();
                if !*seen_o && shared == 3 {
                    *seen_o = true;
                    stack.push(o);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn splits(&self) -> Result<Vec<AlfeldSplit>> {
        self.tets
            .iter()
            .zip(&self.split_points)
            .map(|(t, b)| AlfeldSplit::with_point(Tetrahedron::new(t.map(|v| self.vertices[v].clone()))?, b))
            .collect()
    }

    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "single-tet" => Self::new(name, Tetrahedron::canonical().vertices.to_vec(), vec![[0, 1, 2, 3]], vec![]),
            "two-tets" => {
                let mut v = Tetrahedron::canonical().vertices.to_vec();
                v.push(v3(0, 0, -3));
                Self::new(name, v, vec![[0, 1, 2, 3], [0, 1, 2, 4]], vec![])
            }
            "cube-6" => {
                // vertex k of the unit cube has coordinates given by its bits
                let v: Vec<Vec3> = (0..8).map(|k| v3(k & 1, (k >> 1) & 1, (k >> 2) & 1)).collect();
                let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
                let tets = perms
                    .iter()
                    .map(|p| {
                        let a = 1 << p[0];
                        let b = a | (1 << p[1]);
                        [0, a, b, 7]
                    })
                    .collect();
                Self::new(name, v, tets, vec![])
            }
            _ => Err(CoreError::Mesh(format!("unknown mesh {name}; built-in meshes are {}", BUILTIN.join(", ")))),
        }
    }

    /// Parse the text format (see the README):
    ///
    /// ```text
    /// # comment
    /// vertex 0 0 0
    /// vertex 1/2 0 0
    /// ...
    /// tet 0 1 2 3
    /// tet 0 1 2 4 split 1/4 1/4 1/4 1/4
    /// ```
    pub fn parse(name: &str, text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut tets = Vec::new();
        let mut splits = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| CoreError::Mesh(format!("line {}: {m}", ln + 1));
            let words: Vec<&str> = line.split_whitespace().collect();
            let rat = |w: &str| parse_rational(w).map_err(|_| err(&format!("bad number {w}")));
            match words[0] {
                "vertex" => {
                    if words.len() != 4 {
                        return Err(err("vertex needs three coordinates"));
                    }
                    vertices.push([rat(words[1])?, rat(words[2])?, rat(words[3])?]);
                }
                "tet" => {
                    if words.len() != 5 && !(words.len() == 10 && words[5] == "split") {
                        return Err(err("expected tet a b c d [split l0 l1 l2 l3]"));
                    }
                    let mut t = [0usize; 4];
                    for k in 0..4 {
                        t[k] = words[1 + k].parse().map_err(|_| err(&format!("bad index {}", words[1 + k])))?;
                    }
                    tets.push(t);
                    splits.push(if words.len() == 10 {
                        Some([rat(words[6])?, rat(words[7])?, rat(words[8])?, rat(words[9])?])
                    } else {
                        None
                    });
                }
                w => return Err(err(&format!("unknown keyword {w}"))),
            }
        }
        Self::new(name, vertices, tets, splits)
    }

    /// A built-in name or a path to a mesh file.
    pub fn load(spec: &str) -> Result<Self> {
        if BUILTIN.contains(&spec) {
            return Self::builtin(spec);
        }
        let text = std::fs::read_to_string(spec).map_err(|e| CoreError::Mesh(format!("{spec}: {e}")))?;
        Self::parse(spec, &text)
    }

    /// Position of global vertex `g` in element `e`.
    fn local(&self, e: usize, g: usize) -> usize {
        self.tets[e].iter().position(|&v| v == g).expect("vertex of element")
    }
}

/// Closed forms of the global dimensions, as functions of the counts.
/// Slot `k` of family `V` is `V^k_{r-k}`, of `Z` is `Z^k_{r+1-k}`, of `U` is
/// `U^0_{r+1}, U^1_r, U^2_{r-2}, U^3_{r-3}`. The `U` forms need the interior
/// counts `n`.
pub fn global_formula(chain: Chain, k: usize, r: i64, c: [usize; 4], n: Option<[i64; 4]>) -> Option<i64> {
    let [c0, c1, c2, c3] = c.map(|x| x as i64);
    // the closed forms carry halves and thirds; use sixths throughout
    let six = match (chain, k) {
        (Chain::V, 0) => 60 * c0 + 6 * (3 * r - 13) * c1 + 6 * (r * r - 7 * r + 13) * c2 + 4 * (r - 4) * (r - 3) * (r - 2) * c3,
        (Chain::V, 1) => 72 * c0 + 18 * (r - 4) * c1 + 9 * (r - 2) * (r - 3) * c2 + 6 * (2 * r * r * r - 9 * r * r + 19 * r - 27) * c3,
        (Chain::V, 2) => 18 * c0 + 3 * (r + 2) * (r - 3) * c2 + 6 * (2 * r * r * r - 5 * r * r + 3 * r - 12) * c3,
        (Chain::V, 3) => 4 * r * (r - 1) * (r - 2) * c3,
        (Chain::Z, 0) => 60 * c0 + 6 * (3 * r - 10) * c1 + 6 * (r * r - 5 * r + 7) * c2 + 4 * (r - 3) * (r - 2) * (r - 1) * c3,
        (Chain::Z, 1) => {
            120 * c0 + 18 * (2 * r - 7) * c1 + 15 * (r - 2) * (r - 3) * c2
                + (4 * (r - 3) * (r - 2) * (r - 1) + 2 * (r - 3) * (r - 2) * (4 * r - 7)) * c3
        }
        (Chain::Z, 2) => {
            72 * c0 + 18 * (r - 4) * c1 + 9 * (r - 2) * (r - 3) * c2
                + (2 * (r - 3) * (r - 2) * (4 * r - 7) + 4 * (r + 1) * r * (r - 1) - 78) * c3
        }
        (Chain::Z, 3) => 6 * c0 + (4 * (r + 1) * r * (r - 1) - 72) * c3,
        (Chain::U, _) => {
            let n = n?;
            6 * match k {
                // three copies of the scalar form
                0 => 3 * (10 * c0 + (3 * r - 10) * c1 + (r * r - 5 * r + 7) * c2) + n[0] * c3,
                1 => 30 * c0 + 3 * (3 * r - 8) * c1 + 3 * (3 * r * r - 11 * r + 4) * c2 / 2 + n[1] * c3,
                2 => 6 * c0 + 3 * (r - 3) * (r + 2) * c2 / 2 + n[2] * c3,
                _ => n[3] * c3,
            }
        }
        _ => return None,
    };
    (six % 6 == 0).then_some(six / 6)
}

/// Interior counts of the `U` forms: local dimension minus the vertex, edge
/// and face parts of the closed forms on one element.
pub fn interior_counts(local_dims: [i64; 4], r: i64) -> [i64; 4] {
    let zero = [0i64; 4];
    std::array::from_fn(|k| {
        let outer = global_formula(Chain::U, k, r, [4, 6, 4, 1], Some(zero)).expect("integral");
        local_dims[k] - outer
    })
}

/// Inter-element continuity of a global space: traces on shared faces and
/// jets up to an order at shared vertices.
#[derive(Clone, Debug)]
pub struct Continuity {
    pub faces: Vec<(Q, Proj)>,
    pub vertices: Vec<(Q, usize)>,
}

/// Continuity defining the global space of a label.
pub fn continuity(label: Label) -> Result<Continuity> {
    use crate::spaces::Family::*;
    let c = |faces: &[(Q, Proj)], vertices: &[(Q, usize)]| Continuity { faces: faces.to_vec(), vertices: vertices.to_vec() };
    let full = Proj::Full;
    Ok(match (label.family, label.k) {
        (V, 0) | (Z, 0) | (U, 0) => c(&[(Q::Id, full), (Q::Grad, full)], &[(Q::Id, 2)]),
        (V, 1) | (Z, 2) => c(&[(Q::Id, full)], &[(Q::Id, 1)]),
        (V, 2) | (U, 2) => c(&[(Q::Id, Proj::Normal)], &[(Q::Id, 0)]),
        (V, 3) | (U, 3) => c(&[], &[]),
        (Z, 1) => c(&[(Q::Id, full), (Q::Curl, full)], &[(Q::Id, 1), (Q::Curl, 1)]),
        (Z, 3) => c(&[], &[(Q::Id, 0)]),
        // characterization of the symmetric space
        (U, 1) => c(&[(Q::Id, full), (Q::CurlT, Proj::Tangential)], &[(Q::Id, 1), (Q::Inc, 0)]),
        _ => return Err(CoreError::UnknownLabel(format!("no global space for {label}"))),
    })
}

/// A pair of elements that share a face or a vertex.
#[derive(Clone, Debug)]
enum Link {
    Face { face: [usize; 3], a: usize, b: usize },
    Vertex { vertex: usize, a: usize, b: usize },
}

/// The elements of a mesh with their local spaces.
pub struct MeshForge<S: Scalar> {
    pub mesh: MeshComplex,
    pub forges: Vec<Forge<S>>,
    links: Vec<Link>,
    /// Face vectors `(p1 - p0, p2 - p0, normal)` of every face, in global
    /// coordinates.
    face_vecs: BTreeMap<[usize; 3], [[S; 3]; 3]>,
}

impl<S: Scalar> MeshForge<S> {
    pub fn new(mesh: MeshComplex) -> Result<Self> {
        let splits = mesh.splits()?;
        let forges = par::map(&splits, Forge::from_split).into_iter().collect::<Result<Vec<_>>>()?;
        let mut links = Vec::new();
        let mut face_vecs = BTreeMap::new();
        for f in &mesh.faces {
            let owners: Vec<usize> = (0..mesh.tets.len()).filter(|&e| f.iter().all(|v| mesh.tets[e].contains(v))).collect();
            if owners.len() == 2 {
                links.push(Link::Face { face: *f, a: owners[0], b: owners[1] });
            }
            let p = f.map(|v| mesh.vertices[v].clone());
            let a = geometry::sub(&p[1], &p[0]);
            let b = geometry::sub(&p[2], &p[0]);
            let n = geometry::cross(&a, &b);
            face_vecs.insert(*f, [conv3(&a)?, conv3(&b)?, conv3(&n)?]);
        }
        for v in 0..mesh.vertices.len() {
            let owners: Vec<usize> = (0..mesh.tets.len()).filter(|&e| mesh.tets[e].contains(&v)).collect();
            for &b in &owners[1..] {
                links.push(Link::Vertex { vertex: v, a: owners[0], b });
            }
        }
        Ok(MeshForge { mesh, forges, links, face_vecs })
    }

    pub fn len(&self) -> usize {
        self.forges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forges.is_empty()
    }

    pub fn ctx(&self, e: usize) -> &Ctx<S> {
        &self.forges[e].ctx
    }

    /// Interface data of a field on element `e` for one link.
    fn link_data(&self, e: usize, link: &Link, cont: &Continuity, f: &BrokenField<S>, out: &mut Vec<S>) {
        let ctx = self.ctx(e);
        let cache = FieldCache::new(ctx, f.clone());
        match link {
            Link::Face { face, .. } => {
                let labels = face.map(|g| self.mesh.local(e, g));
                // the face opposite local vertex i lies in subtet i
                let s = (0..4).find(|i| !labels.contains(i)).unwrap();
                let [a, b, n] = &self.face_vecs[face];
                for &(qn, proj) in &cont.faces {
                    let g = cache.get(qn);
                    let parts: Vec<BrokenField<S>> = match (proj, g.shape) {
                        (Proj::Full, _) | (_, Shape::Scalar) => vec![(*g).clone()],
                        (Proj::Normal, Shape::Vector) => vec![g.dot_const(n)],
                        (Proj::Normal, _) => vec![g.mat_vec_const(n)],
                        (Proj::Tangential, Shape::Vector) => vec![g.dot_const(a), g.dot_const(b)],
                        (Proj::Tangential, _) => vec![g.mat_vec_const(a), g.mat_vec_const(b)],
                    };
                    for p in parts {
                        for t in p.trace_on(&ctx.split, s, &labels) {
                            out.extend(t.c);
                        }
                    }
                }
            }
            Link::Vertex { vertex, .. } => {
                let lv = self.mesh.local(e, *vertex);
                let s = (lv + 1) % 4;
                let m = ctx.split.local_index(s, lv).expect("vertex of subtet");
                for &(qn, order) in &cont.vertices {
                    let g = cache.get(qn);
                    for c in 0..g.ncomp() {
                        for k in 0..=order {
                            out.extend(vertex_jet(ctx, s, g.comp(s, c), g.deg, m, k));
                        }
                    }
                }
            }
        }
    }

    /// Interface constraint matrix over stacked local coordinates.
    pub fn constraints(&self, locals: &[Arc<FESpace<S>>], cont: &Continuity) -> Matrix<S> {
        let offsets = offsets(locals);
        let n: usize = offsets[self.len()];
        let ends = |l: &Link| match l {
            Link::Face { a, b, .. } | Link::Vertex { a, b, .. } => (*a, *b),
        };
        // row blocks: one per link, sized by the data of any field
        let mut sizes = Vec::new();
        for l in &self.links {
            let (a, _) = ends(l);
            let mut d = Vec::new();
            self.link_data(a, l, cont, &BrokenField::zeros(locals[a].shape, locals[a].deg), &mut d);
            sizes.push(d.len());
        }
        let rows: usize = sizes.iter().sum();
        let jobs: Vec<(usize, usize)> = (0..self.len()).flat_map(|e| (0..locals[e].dim()).map(move |j| (e, j))).collect();
        let cols: Vec<Vec<S>> = par::map(&jobs, |&(e, j)| {
            let mut col = Vec::with_capacity(rows);
            let f = &locals[e].basis[j];
            for (l, &sz) in self.links.iter().zip(&sizes) {
                let (a, b) = ends(l);
                if e == a || e == b {
                    let start = col.len();
                    self.link_data(e, l, cont, f, &mut col);
                    debug_assert_eq!(col.len() - start, sz);
                    if e == b {
                        for x in &mut col[start..] {
                            *x = x.neg();
                        }
                    }
                } else {
                    col.extend(std::iter::repeat_n(S::zero(), sz));
                }
            }
            col
        });
        debug_assert_eq!(cols.len(), n);
        Matrix::from_columns(&cols, rows)
    }
}

fn offsets<S: Scalar>(locals: &[Arc<FESpace<S>>]) -> Vec<usize> {
    let mut o = vec![0];
    for l in locals {
        o.push(o.last().unwrap() + l.dim());
    }
    o
}

/// A global space: columns of `basis` are stacked local coordinates.
pub struct GlobalSpace<S: Scalar> {
    pub name: String,
    pub label: Label,
    pub deg: usize,
    pub locals: Vec<Arc<FESpace<S>>>,
    pub offsets: Vec<usize>,
    pub basis: Matrix<S>,
    pub continuity: Continuity,
}

impl<S: Scalar> GlobalSpace<S> {
    pub fn dim(&self) -> usize {
        self.basis.cols()
    }

    /// Restriction of stacked coordinates to element `e`.
    pub fn restrict(&self, coords: &[S], e: usize) -> BrokenField<S> {
        let sp = &self.locals[e];
        let mut out = BrokenField::<S>::zeros(sp.shape, sp.deg);
        for (a, b) in coords[self.offsets[e]..self.offsets[e + 1]].iter().zip(&sp.basis) {
            if !a.is_zero() {
                for (o, x) in out.data.iter_mut().zip(&b.data) {
                    o.add_mul_assign(a, x);
                }
            }
        }
        out
    }
}

fn local_spaces<S: Scalar>(mf: &MeshForge<S>, label: Label, deg: i64) -> Result<Vec<Arc<FESpace<S>>>> {
    mf.forges.iter().map(|f| f.space(label, deg)).collect()
}

fn null_or_identity<S: Scalar>(c: &Matrix<S>, n: usize) -> Matrix<S> {
    if c.rows() == 0 {
        Matrix::identity(n)
    } else {
        nullspace_basis(c)
    }
}

/// Global space by constraint assembly.
pub fn global_space<S: Scalar>(mf: &MeshForge<S>, label: Label, deg: i64) -> Result<GlobalSpace<S>> {
    if label.variant != crate::spaces::Variant::Plain {
        return Err(CoreError::UnknownLabel(format!("global spaces are unringed, got {label}")));
    }
    let cont = continuity(label)?;
    let locals = local_spaces(mf, label, deg)?;
    let offs = offsets(&locals);
    let c = mf.constraints(&locals, &cont);
    let basis = null_or_identity(&c, offs[mf.len()]);
    Ok(GlobalSpace {
        name: format!("{label}_{deg}(mesh)"),
        label,
        deg: deg.max(0) as usize,
        locals,
        offsets: offs,
        basis,
        continuity: cont,
    })
}

/// Global `sym(Z1_r (x) V)` in local `U1_r` coordinates.
pub fn global_u1_sym<S: Scalar>(mf: &MeshForge<S>, z1: &GlobalSpace<S>, r: i64) -> Result<GlobalSpace<S>> {
    let u1 = Label::parse("U1")?;
    let locals = local_spaces(mf, u1, r)?;
    let offs = offsets(&locals);
    // per element and row i: local Z1 coords -> local U1 coords of sym(e_i v')
    let mut maps = Vec::new();
    for e in 0..mf.len() {
        let coords = Coords::new(locals[e].clone())?;
        let mut row = Vec::new();
        for i in 0..3 {
            row.push(operator_matrix(&z1.locals[e], &coords, |v| {
                let z = BrokenField::zeros(Shape::Vector, v.deg);
                let mut rows = [z.clone(), z.clone(), z];
                rows[i] = v.clone();
                Ok(BrokenField::from_rows(&rows).sym())
            })?);
        }
        maps.push(row);
    }
    let mut cols = Vec::new();
    for j in 0..z1.dim() {
        let n = z1.basis.column(j);
        for i in 0..3 {
            let mut col = Vec::with_capacity(offs[mf.len()]);
            for e in 0..mf.len() {
                col.extend(maps[e][i].mul_vec(&n[z1.offsets[e]..z1.offsets[e + 1]])?);
            }
            cols.push(col);
        }
    }
    let all = Matrix::from_columns(&cols, offs[mf.len()]);
    let keep = if cols.is_empty() { vec![] } else { independent_columns(&all) };
    Ok(GlobalSpace {
        name: format!("sym(Z1_{r}(x)V)(mesh)"),
        label: u1,
        deg: r as usize,
        locals,
        offsets: offs,
        basis: all.select_columns(&keep),
        continuity: continuity(u1)?,
    })
}

/// Local operator matrices of every element, from local coordinates of
/// `from` to local coordinates of `to`.
pub fn local_blocks<S: Scalar>(
    mf: &MeshForge<S>,
    op: Op,
    from: &[Arc<FESpace<S>>],
    to: &[Arc<FESpace<S>>],
) -> Result<Vec<Matrix<S>>> {
    (0..mf.len())
        .map(|e| {
            let ctx = mf.ctx(e);
            let coords = Coords::new(to[e].clone())?;
            operator_matrix(&from[e], &coords, |b| Ok(op.apply(ctx, std::slice::from_ref(b))?.remove(0)))
        })
        .collect()
}

/// Block-diagonal product with columns of stacked local coordinates.
pub fn apply_blocks<S: Scalar>(blocks: &[Matrix<S>], offsets: &[usize], m: &Matrix<S>) -> Result<Matrix<S>> {
    let rows: usize = blocks.iter().map(|b| b.rows()).sum();
    let cols: Vec<Vec<S>> = (0..m.cols())
        .map(|j| {
            let n = m.column(j);
            let mut col = Vec::with_capacity(rows);
            for (e, d) in blocks.iter().enumerate() {
                col.extend(d.mul_vec(&n[offsets[e]..offsets[e + 1]])?);
            }
            Ok(col)
        })
        .collect::<Result<_>>()?;
    Ok(Matrix::from_columns(&cols, rows))
}

/// Global operator in stacked local coordinates of the target.
pub fn global_operator<S: Scalar>(mf: &MeshForge<S>, op: Op, from: &GlobalSpace<S>, to: &GlobalSpace<S>) -> Result<Matrix<S>> {
    apply_blocks(&local_blocks(mf, op, &from.locals, &to.locals)?, &from.offsets, &from.basis)
}

/// Whether every column (stacked local coordinates) satisfies the
/// interface constraints of `to`.
fn glued<S: Scalar>(mf: &MeshForge<S>, to: &GlobalSpace<S>, m: &Matrix<S>) -> Result<bool> {
    if m.cols() == 0 {
        return Ok(true);
    }
    let c = mf.constraints(&to.locals, &to.continuity);
    if c.rows() == 0 {
        return Ok(true);
    }
    Ok(c.mul(m)?.is_zero())
}

fn chain_slots<S: Scalar>(mf: &MeshForge<S>, chain: Chain, r: i64) -> Result<Vec<GlobalSpace<S>>> {
    let labels = chain.labels();
    let mut out = Vec::new();
    for k in 0..4 {
        let deg = chain.degree(k, r);
        if chain == Chain::U && k == 1 {
            let z1 = global_space(mf, Label::parse("Z1")?, r)?;
            out.push(global_u1_sym(mf, &z1, r)?);
        } else {
            out.push(global_space(mf, labels[k], deg)?);
        }
    }
    Ok(out)
}

fn mesh_report<S: Scalar>(mf: &MeshForge<S>, id: String, r: i64, seed: Option<u64>, claim: String) -> Report {
    let mut rep = Report::new(id, mf.ctx(0), r, seed, claim);
    rep.params.split = format!("mesh {}", mf.mesh.name);
    rep
}

/// Global dimensions against the closed forms, the alternating sum, the
/// interior-count identity for `U`, exactness by ranks and membership of
/// every image in the next global space.
pub fn check_global<S: Scalar>(mf: &MeshForge<S>, chain: Chain, r: i64) -> Result<Report> {
    let t0 = Instant::now();
    let mesh = &mf.mesh;
    let (kernel, euler, lo) = match chain {
        Chain::V => (1, 1, 5),
        Chain::Z => (1, 1, 4),
        Chain::U => (6, 6, 4),
    };
    let mut rep = mesh_report(
        mf,
        format!("global/{chain:?}"),
        r,
        None,
        match (chain, r) {
            (Chain::V, 4) => "global V complex at r = 4: div onto V3".to_string(),
            _ => format!(
                "global {chain:?} complex is exact with kernel of dimension {kernel}, dimensions match the closed forms and alternate to {euler}"
            ),
        },
    );
    if !mesh.contractible {
        return Err(CoreError::Precondition(format!("mesh {} is not contractible", mesh.name)));
    }
    let div_only = chain == Chain::V && r == 4;
    rep.exploratory = r < lo && !div_only;
    let slots = chain_slots(mf, chain, r)?;
    let dims: Vec<i64> = slots.iter().map(|s| s.dim() as i64).collect();
    let counts = mesh.counts();
    for (k, c) in counts.iter().enumerate() {
        rep.wit(format!("#{k}"), *c);
    }
    let n = if chain == Chain::U {
        let f = &mf.forges[0];
        let local: [i64; 4] = std::array::from_fn(|k| {
            let l = chain.labels()[k];
            f.space(l, chain.degree(k, r)).map(|s| s.dim() as i64).unwrap_or(-1)
        });
        let n = interior_counts(local, r);
        for (k, v) in n.iter().enumerate() {
            rep.wit(format!("N{k}"), *v);
        }
        let holds = n[0] + n[2] == n[1] + n[3] - 6;
        rep.wit("N0 + N2 = N1 + N3 - 6", holds as i64);
        if !holds {
            rep.note("interior count identity fails");
        }
        Some(n)
    } else {
        None
    };
    let mut ok = true;
    let mut dims_ok = true;
    for k in 0..4 {
        rep.wit(format!("dim {k}"), dims[k]);
        if let Some(f) = global_formula(chain, k, r, counts, n) {
            rep.wit(format!("formula {k}"), f);
            dims_ok &= f == dims[k];
        }
    }
    let alt = dims[0] - dims[1] + dims[2] - dims[3];
    rep.wit("alternating sum", alt);
    let mut ranks = Vec::new();
    let mut members = true;
    let mut compositions = true;
    let mut prev: Option<Matrix<S>> = None;
    for k in 0..3 {
        let blocks = local_blocks(mf, chain.ops()[k], &slots[k].locals, &slots[k + 1].locals)?;
        let m = apply_blocks(&blocks, &slots[k].offsets, &slots[k].basis)?;
        members &= glued(mf, &slots[k + 1], &m)?;
        if let Some(p) = &prev {
            compositions &= apply_blocks(&blocks, &slots[k].offsets, p)?.is_zero();
        }
        let rk = if m.cols() == 0 { 0 } else { rank(&m) };
        rep.wit(format!("rank {k}"), rk);
        ranks.push(rk as i64);
        prev = Some(m);
    }
    rep.wit("images in next space", members as i64);
    rep.wit("compositions zero", compositions as i64);
    let ker0 = dims[0] - ranks[0];
    rep.wit("kernel 0", ker0);
    let exact_mid = [dims[1] - ranks[1] == ranks[0], dims[2] - ranks[2] == ranks[1]];
    let onto = ranks[2] == dims[3];
    rep.wit("onto", onto as i64);
    if div_only {
        ok &= onto && members && compositions;
        rep.note("only surjectivity of div is claimed at r = 4");
    } else {
        ok &= dims_ok && alt == euler && ker0 == kernel && exact_mid.iter().all(|&b| b) && onto && members && compositions;
        if !dims_ok {
            rep.note("a dimension differs from its closed form");
        }
    }
    if chain == Chain::U {
        // cross-check U1 against its characterization by continuity
        let char_sp = global_space(mf, Label::parse("U1")?, r)?;
        let both = slots[1].basis.hstack(&char_sp.basis)?;
        let same = rank(&both) == slots[1].dim() && slots[1].dim() == char_sp.dim();
        rep.wit("U1 characterization dim", char_sp.dim());
        rep.wit("U1 characterization agrees", same as i64);
        ok &= same;
    }
    Ok(rep.finish(ok, t0))
}

/// Physical polynomial with the given monomial coefficients, written on an
/// element in its barycentric coordinates.
pub fn cartesian_field<S: Scalar>(ctx: &Ctx<S>, shape: Shape, deg: usize, coeffs: &[i64]) -> Result<BrokenField<S>> {
    let verts = &ctx.split.parent.vertices;
    let xs: Vec<Poly<S>> = (0..3)
        .map(|k| Ok(Poly::linear(&verts.iter().map(|v| conv(&v[k])).collect::<Result<Vec<S>>>()?)))
        .collect::<Result<_>>()?;
    let one = Poly::linear(&[S::one(), S::one(), S::one(), S::one()]);
    let exps = cartesian_exponents(deg);
    let nc = shape.ncomp();
    if coeffs.len() != nc * exps.len() {
        return Err(CoreError::Shape(format!("{} coefficients for {nc} x {}", coeffs.len(), exps.len())));
    }
    let pow = |p: &Poly<S>, k: usize| (0..k).fold(Poly::constant(4, S::one()), |acc, _| acc.mul(p));
    let monos: Vec<Poly<S>> = exps
        .iter()
        .map(|&[a, b, c]| pow(&xs[0], a).mul(&pow(&xs[1], b)).mul(&pow(&xs[2], c)).mul(&pow(&one, deg - a - b - c)))
        .collect();
    let comps = (0..nc)
        .map(|i| {
            let mut acc = Poly::constant(4, S::zero()).to_degree(deg);
            for (m, &a) in monos.iter().zip(&coeffs[i * exps.len()..]) {
                if a != 0 {
                    acc = acc.add(&m.scale(&S::from_i64(a)));
                }
            }
            acc
        })
        .collect();
    Ok(GlobalField { shape, deg, comps }.embed(ctx))
}

/// Exponents `(a, b, c)` with `a + b + c <= deg`.
pub fn cartesian_exponents(deg: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for t in 0..=deg {
        for a in (0..=t).rev() {
            for b in (0..=t - a).rev() {
                out.push([a, b, t - a - b]);
            }
        }
    }
    out
}

/// Global commuting squares: the elementwise canonical interpolants of a
/// physical polynomial glue into the global space and commute with the
/// operators.
pub fn check_global_commuting<S: Scalar>(mf: &MeshForge<S>, chain: Chain, r: i64, seed: u64, count: usize) -> Result<Vec<Report>> {
    let labels = chain.labels();
    let slots = chain_slots(mf, chain, r)?;
    let mut out = Vec::new();
    for k in 0..3 {
        let t0 = Instant::now();
        let op = chain.ops()[k];
        let (la, lb) = (labels[k], labels[k + 1]);
        let (da, db) = (chain.degree(k, r), chain.degree(k + 1, r));
        let mut rep = mesh_report(
            mf,
            format!("global-commuting/{chain:?}/{k}"),
            r,
            Some(seed),
            format!("global Pi[{lb}_{db}] {op:?} = {op:?} Pi[{la}_{da}] and both interpolants glue"),
        );
        rep.exploratory = !chain.claimed(k, r);
        let interp = |l: Label, d: i64| -> Result<Vec<Interpolator<S>>> {
            let d = usize::try_from(d).map_err(|_| CoreError::Precondition(format!("{l} at negative degree")))?;
            mf.forges
                .iter()
                .map(|f| Interpolator::new(&f.ctx, Arc::new(dof_set(f, l, d)?), f.space(l, d as i64)?))
                .collect()
        };
        let pa = interp(la, da)?;
        let pb = interp(lb, db)?;
        let deg = (r + 1).max(da + 1) as usize;
        let nmono = cartesian_exponents(deg).len() * la.shape().ncomp();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
        let (mut agree, mut glue) = (0, 0);
        for _ in 0..count {
            let coeffs: Vec<i64> = (0..nmono).map(|_| rng.gen_range(-9..=9)).collect();
            let mut ca = Vec::new();
            let mut cb = Vec::new();
            let mut square = true;
            for e in 0..mf.len() {
                let ctx = mf.ctx(e);
                let u = cartesian_field(ctx, la.shape(), deg, &coeffs)?;
                let du = op.apply(ctx, std::slice::from_ref(&u))?.remove(0);
                let a = pa[e].coefficients(ctx, std::slice::from_ref(&u))?.remove(0);
                let b = pb[e].coefficients(ctx, std::slice::from_ref(&du))?.remove(0);
                let lhs = pb[e].combine(&b);
                let rhs = op.apply(ctx, &[pa[e].combine(&a)])?.remove(0);
                square &= lhs.to_matrix().sub(&rhs.to_matrix()).is_zero();
                ca.extend(a);
                cb.extend(b);
            }
            let g = glued(mf, &slots[k], &Matrix::from_columns(&[ca], slots[k].offsets[mf.len()]))?
                && glued(mf, &slots[k + 1], &Matrix::from_columns(&[cb], slots[k + 1].offsets[mf.len()]))?;
            agree += square as usize;
            glue += g as usize;
        }
        rep.wit("inputs", count);
        rep.wit("input degree", deg);
        rep.wit("agree", agree);
        rep.wit("interpolants glued", glue);
        out.push(rep.finish(agree == count && glue == count, t0));
    }
    Ok(out)
}

/// Restriction of every global basis field to each element lies in the
/// local space, checked by column-space membership.
pub fn check_restrictions<S: Scalar>(mf: &MeshForge<S>, g: &GlobalSpace<S>) -> Result<bool> {
    for e in 0..mf.len() {
        let fields: Vec<BrokenField<S>> = (0..g.dim()).map(|j| g.restrict(&g.basis.column(j), e)).collect();
        if !g.locals[e].contains_all(&fields) {
            return Ok(false);
        }
    }
    Ok(true)
}
