//! Tetrahedra, Alfeld splits, subsimplex tables and frames.
//!
//! Labels 0..=3 are the vertices of the parent tetrahedron and label 4 is the
//! split point z. Subtetrahedron `T_i` is `[z, x_j (j != i)]`, so it is the
//! cone from z over the face opposite `x_i`.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use alfeld_linalg::{q, Rational};

use crate::error::{CoreError, Result};

pub type Vec3 = [Rational; 3];

/// Label of the split point.
pub const Z: usize = 4;

/// Edges of the parent, lexicographic.
pub const EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];

/// Face `i` is opposite vertex `i`.
pub const FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

pub fn v3(x: i64, y: i64, z: i64) -> Vec3 {
    [q(x, 1), q(y, 1), q(z, 1)]
}

pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [&a[0] + &b[0], &a[1] + &b[1], &a[2] + &b[2]]
}

pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [&a[0] - &b[0], &a[1] - &b[1], &a[2] - &b[2]]
}

pub fn scale(a: &Vec3, s: &Rational) -> Vec3 {
    [&a[0] * s, &a[1] * s, &a[2] * s]
}

pub fn dot(a: &Vec3, b: &Vec3) -> Rational {
    &a[0] * &b[0] + &a[1] * &b[1] + &a[2] * &b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        &a[1] * &b[2] - &a[2] * &b[1],
        &a[2] * &b[0] - &a[0] * &b[2],
        &a[0] * &b[1] - &a[1] * &b[0],
    ]
}

pub fn det3(a: &Vec3, b: &Vec3, c: &Vec3) -> Rational {
    dot(a, &cross(b, c))
}

/// Exact square root of a nonnegative rational, if it is a perfect square.
pub fn rational_sqrt(x: &Rational) -> Option<Rational> {
    if x.is_negative() {
        return None;
    }
    let isqrt = |n: &BigInt| {
        let s = n.sqrt();
        (&s * &s == *n).then_some(s)
    };
    Some(Rational::new(isqrt(x.numer())?, isqrt(x.denom())?))
}

/// Gradients of the barycentric coordinates of a simplex with vertices `v`.
fn bary_gradients(v: &[Vec3; 4]) -> Option<[Vec3; 4]> {
    let e = [sub(&v[1], &v[0]), sub(&v[2], &v[0]), sub(&v[3], &v[0])];
    let det = det3(&e[0], &e[1], &e[2]);
    if det.is_zero() {
        return None;
    }
    // rows of the inverse of the matrix with columns e0,e1,e2
    let g1 = scale(&cross(&e[1], &e[2]), &det.recip());
    let g2 = scale(&cross(&e[2], &e[0]), &det.recip());
    let g3 = scale(&cross(&e[0], &e[1]), &det.recip());
    let g0 = scale(&add(&add(&g1, &g2), &g3), &q(-1, 1));
    Some([g0, g1, g2, g3])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tetrahedron {
    pub vertices: [Vec3; 4],
}

impl Tetrahedron {
    pub fn new(vertices: [Vec3; 4]) -> Result<Self> {
        let t = Tetrahedron { vertices };
        if t.signed_volume().is_zero() {
            return Err(CoreError::Degenerate);
        }
        Ok(t)
    }

    /// (0,0,0),(1,0,0),(0,1,0),(0,0,1).
    pub fn reference() -> Self {
        Tetrahedron {
            vertices: [v3(0, 0, 0), v3(1, 0, 0), v3(0, 1, 0), v3(0, 0, 1)],
        }
    }

    /// (0,0,0),(1,0,0),(0,2,0),(0,0,3). Every face has a rational unit
    /// normal; the oblique one is (6,3,2)/7.
    pub fn canonical() -> Self {
        Tetrahedron {
            vertices: [v3(0, 0, 0), v3(1, 0, 0), v3(0, 2, 0), v3(0, 0, 3)],
        }
    }

    pub fn signed_volume(&self) -> Rational {
        let v = &self.vertices;
        det3(&sub(&v[1], &v[0]), &sub(&v[2], &v[0]), &sub(&v[3], &v[0])) / q(6, 1)
    }

    pub fn volume(&self) -> Rational {
        self.signed_volume().abs()
    }

    pub fn point(&self, bary: &[Rational; 4]) -> Vec3 {
        let mut p = v3(0, 0, 0);
        for (b, x) in bary.iter().zip(&self.vertices) {
            p = add(&p, &scale(x, b));
        }
        p
    }

    pub fn barycentric(&self, p: &Vec3) -> [Rational; 4] {
        let g = bary_gradients(&self.vertices).expect("nondegenerate");
        let d = sub(p, &self.vertices[0]);
        let l1 = dot(&g[1], &d);
        let l2 = dot(&g[2], &d);
        let l3 = dot(&g[3], &d);
        let l0 = q(1, 1) - &l1 - &l2 - &l3;
        [l0, l1, l2, l3]
    }

    pub fn centroid(&self) -> Vec3 {
        self.point(&[q(1, 4), q(1, 4), q(1, 4), q(1, 4)])
    }

    /// Gradients of the parent barycentric coordinates.
    pub fn gradients(&self) -> [Vec3; 4] {
        bary_gradients(&self.vertices).expect("nondegenerate")
    }

    /// Outward (non-unit) normal of the face opposite vertex `i`: the cross
    /// product of two face edges, oriented away from `x_i`.
    pub fn face_normal(&self, i: usize) -> Vec3 {
        let [a, b, c] = FACES[i].map(|k| &self.vertices[k]);
        let n = cross(&sub(b, a), &sub(c, a));
        if dot(&n, &sub(&self.vertices[i], a)).is_positive() {
            scale(&n, &q(-1, 1))
        } else {
            n
        }
    }

    /// The vertices of face `i` ordered counterclockwise seen from outside,
    /// so the boundary runs a -> b -> c -> a with the right-hand rule about
    /// the outward normal.
    pub fn face_cycle(&self, i: usize) -> [usize; 3] {
        let [a, b, c] = FACES[i];
        let n = cross(
            &sub(&self.vertices[b], &self.vertices[a]),
            &sub(&self.vertices[c], &self.vertices[a]),
        );
        if dot(&n, &self.face_normal(i)).is_positive() {
            [a, b, c]
        } else {
            [a, c, b]
        }
    }
}

#[derive(Clone, Debug)]
pub struct AlfeldSplit {
    pub parent: Tetrahedron,
    pub z: Vec3,
    pub z_bary: [Rational; 4],
    /// Labels 0..=3 are the parent vertices, 4 is z.
    pub points: [Vec3; 5],
    /// `subtets[i] = [4, j...]` with `j != i` ascending.
    pub subtets: [[usize; 4]; 4],
    sub_volumes: [Rational; 4],
    sub_grads: [[Vec3; 4]; 4],
}

impl AlfeldSplit {
    /// Split at the barycenter.
    pub fn new(parent: Tetrahedron) -> Self {
        let b = [q(1, 4), q(1, 4), q(1, 4), q(1, 4)];
        Self::with_point(parent, &b).expect("barycenter is interior")
    }

    /// Split at the point with the given barycentric coordinates. They must
    /// sum to one and be strictly positive.
    pub fn with_point(parent: Tetrahedron, z_bary: &[Rational; 4]) -> Result<Self> {
        let sum: Rational = z_bary.iter().sum();
        if !sum.is_one() {
            return Err(CoreError::InvalidSplit(format!(
                "barycentric coordinates sum to {sum}"
            )));
        }
        if z_bary.iter().any(|b| !b.is_positive()) {
            return Err(CoreError::InvalidSplit(
                "split point is not strictly inside the tetrahedron".into(),
            ));
        }
        let z = parent.point(z_bary);
        let points = [
            parent.vertices[0].clone(),
            parent.vertices[1].clone(),
            parent.vertices[2].clone(),
            parent.vertices[3].clone(),
            z.clone(),
        ];
        let mut subtets = [[0usize; 4]; 4];
        for (i, st) in subtets.iter_mut().enumerate() {
            st[0] = Z;
            let mut k = 1;
            for j in 0..4 {
                if j != i {
                    st[k] = j;
                    k += 1;
                }
            }
        }
        let mut sub_volumes: [Rational; 4] = Default::default();
        let mut sub_grads: [[Vec3; 4]; 4] = Default::default();
        for i in 0..4 {
            let v = subtets[i].map(|l| points[l].clone());
            let d = det3(&sub(&v[1], &v[0]), &sub(&v[2], &v[0]), &sub(&v[3], &v[0]));
            sub_volumes[i] = d.abs() / q(6, 1);
            sub_grads[i] = bary_gradients(&v).ok_or(CoreError::Degenerate)?;
        }
        Ok(AlfeldSplit {
            parent,
            z,
            z_bary: z_bary.clone(),
            points,
            subtets,
            sub_volumes,
            sub_grads,
        })
    }

    /// Split of a point given in Cartesian coordinates.
    pub fn at_point(parent: Tetrahedron, z: &Vec3) -> Result<Self> {
        let b = parent.barycentric(z);
        Self::with_point(parent, &b)
    }

    pub fn sub_volume(&self, i: usize) -> &Rational {
        &self.sub_volumes[i]
    }

    /// Gradient of local barycentric `m` on subtet `i`.
    pub fn sub_gradient(&self, i: usize, m: usize) -> &Vec3 {
        &self.sub_grads[i][m]
    }

    /// Position of `label` in the local vertex list of subtet `i`.
    pub fn local_index(&self, i: usize, label: usize) -> Option<usize> {
        self.subtets[i].iter().position(|&l| l == label)
    }

    /// Subtets whose closure contains all the given labels.
    pub fn subtets_containing(&self, labels: &[usize]) -> Vec<usize> {
        (0..4).filter(|&i| labels.iter().all(|&l| l != i)).collect()
    }

    /// The six interior facets `[j, k, z]`, in the order of [`EDGES`].
    pub fn interior_facets(&self) -> [[usize; 3]; 6] {
        EDGES.map(|[j, k]| [j, k, Z])
    }

    /// Interior facets containing vertex `i`.
    pub fn interior_facets_at(&self, i: usize) -> Vec<[usize; 3]> {
        self.interior_facets()
            .into_iter()
            .filter(|f| f.contains(&i))
            .collect()
    }

    /// Normal of the interior facet `[j, k, z]`, pointing from the subtet
    /// with the smaller index into the other one.
    pub fn interior_facet_normal(&self, f: &[usize; 3]) -> Vec3 {
        let n = cross(
            &sub(&self.points[f[1]], &self.points[f[2]]),
            &sub(&self.points[f[0]], &self.points[f[2]]),
        );
        let sides = self.subtets_containing(f);
        // the subtet `T_m` has vertex x_{m'} off the facet, where {m, m'} are
        // the labels not on the facet
        let off = sides[1];
        if dot(&n, &sub(&self.points[off], &self.points[f[2]])).is_positive() {
            n
        } else {
            scale(&n, &q(-1, 1))
        }
    }

    /// The piecewise linear bubble: local barycentric of z on every subtet.
    pub fn mu_at(&self, p: &Vec3) -> Option<Rational> {
        for i in 0..4 {
            let v0 = &self.points[Z];
            let d = sub(p, v0);
            let l: Vec<Rational> = (1..4).map(|m| dot(&self.sub_grads[i][m], &d)).collect();
            let l0 = q(1, 1) - l.iter().sum::<Rational>();
            if l0 >= Rational::zero() && l.iter().all(|x| !x.is_negative()) {
                return Some(l0);
            }
        }
        None
    }

    pub fn face_frame(&self, face: usize, exact: bool) -> Result<FaceFrame> {
        FaceFrame::new(&self.parent, face, exact)
    }

    pub fn edge_frame(&self, edge: usize) -> EdgeFrame {
        EdgeFrame::new(&self.parent, edge)
    }
}

/// Frame `(t1, t2, n)` of a boundary face.
///
/// With `unit` set the vectors are orthonormal and right-handed. Otherwise
/// `n` is the cross-product normal, `t1` an edge vector and `t2 = n x t1`:
/// pairwise orthogonal but not normalized.
#[derive(Clone, Debug)]
pub struct FaceFrame {
    pub face: usize,
    pub n: Vec3,
    pub t1: Vec3,
    pub t2: Vec3,
    pub unit: bool,
}

impl FaceFrame {
    pub fn new(tet: &Tetrahedron, face: usize, exact: bool) -> Result<Self> {
        let nn = tet.face_normal(face);
        if !exact {
            let [a, b, _] = FACES[face];
            let t1 = sub(&tet.vertices[b], &tet.vertices[a]);
            let t2 = cross(&nn, &t1);
            return Ok(FaceFrame { face, n: nn, t1, t2, unit: false });
        }
        let len = rational_sqrt(&dot(&nn, &nn)).ok_or(CoreError::FrameUnavailable(face))?;
        let n = scale(&nn, &len.recip());
        let t1 = pythagorean_tangent(&nn).ok_or(CoreError::FrameUnavailable(face))?;
        let t2 = cross(&n, &t1);
        Ok(FaceFrame { face, n, t1, t2, unit: true })
    }

    pub fn tangents(&self) -> [&Vec3; 2] {
        [&self.t1, &self.t2]
    }

    /// `nn'/|n|^2`.
    pub fn p(&self) -> [[Rational; 3]; 3] {
        let s = dot(&self.n, &self.n).recip();
        std::array::from_fn(|i| std::array::from_fn(|j| &self.n[i] * &self.n[j] * &s))
    }

    /// `I - P`.
    pub fn q(&self) -> [[Rational; 3]; 3] {
        let p = self.p();
        std::array::from_fn(|i| {
            std::array::from_fn(|j| if i == j { q(1, 1) - &p[i][j] } else { -p[i][j].clone() })
        })
    }
}

/// First unit vector orthogonal to `n` with rational length, searching
/// integer vectors shell by shell in the max norm.
fn pythagorean_tangent(n: &Vec3) -> Option<Vec3> {
    // scale n to a primitive integer vector
    let den = n.iter().fold(BigInt::one(), |acc, x| num_integer::lcm(acc, x.denom().clone()));
    let ni: Vec<BigInt> = n.iter().map(|x| (x * Rational::from(den.clone())).to_integer()).collect();
    const MAX_SHELL: i64 = 40;
    for k in 1..=MAX_SHELL {
        let xs = (0..=k).chain((1..=k).map(|x| -x));
        for x in xs {
            for y in -k..=k {
                for z in -k..=k {
                    if x.abs().max(y.abs()).max(z.abs()) != k {
                        continue;
                    }
                    let d = &ni[0] * x + &ni[1] * y + &ni[2] * z;
                    if !d.is_zero() {
                        continue;
                    }
                    let n2 = x * x + y * y + z * z;
                    let r = (n2 as f64).sqrt().round() as i64;
                    if r * r == n2 {
                        return Some([q(x, r), q(y, r), q(z, r)]);
                    }
                }
            }
        }
    }
    None
}

/// Tangent and two cross directions of a parent edge. Not normalized:
/// `n_plus` is the outward normal of the first face containing the edge and
/// `n_minus = t x n_plus`.
#[derive(Clone, Debug)]
pub struct EdgeFrame {
    pub edge: usize,
    pub t: Vec3,
    pub n_plus: Vec3,
    pub n_minus: Vec3,
}

impl EdgeFrame {
    pub fn new(tet: &Tetrahedron, edge: usize) -> Self {
        let [a, b] = EDGES[edge];
        let t = sub(&tet.vertices[b], &tet.vertices[a]);
        let f = (0..4).find(|&f| FACES[f].contains(&a) && FACES[f].contains(&b)).unwrap();
        let n_plus = tet.face_normal(f);
        let n_minus = cross(&t, &n_plus);
        EdgeFrame { edge, t, n_plus, n_minus }
    }
}

/// Faces of the parent containing edge `e`.
pub fn faces_of_edge(e: usize) -> Vec<usize> {
    let [a, b] = EDGES[e];
    (0..4).filter(|&f| FACES[f].contains(&a) && FACES[f].contains(&b)).collect()
}

/// Edges of the parent contained in face `f`.
pub fn edges_of_face(f: usize) -> Vec<usize> {
    (0..6)
        .filter(|&e| EDGES[e].iter().all(|v| FACES[f].contains(v)))
        .collect()
}

/// Index of the edge joining two parent vertices.
pub fn edge_index(a: usize, b: usize) -> usize {
    let (a, b) = (a.min(b), a.max(b));
    EDGES.iter().position(|e| *e == [a, b]).expect("edge")
}
