//! Broken (piecewise polynomial) fields on an Alfeld split.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use alfeld_linalg::{Rational, Scalar};

use crate::error::{CoreError, Result};
use crate::geometry::{AlfeldSplit, Vec3};
use crate::poly::{self, monomials, Poly};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
pub enum Shape {
    Scalar,
    Vector,
    Matrix,
    Sym,
}

/// Storage order of the symmetric components.
pub const SYM_IJ: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1)];

/// Component of the symmetric storage holding entry `(i, j)`.
pub fn sym_index(i: usize, j: usize) -> usize {
    let (a, b) = (i.min(j), i.max(j));
    SYM_IJ.iter().position(|&p| p == (a, b) || p == (b, a)).unwrap()
}

impl Shape {
    pub fn ncomp(self) -> usize {
        match self {
            Shape::Scalar => 1,
            Shape::Vector => 3,
            Shape::Matrix => 9,
            Shape::Sym => 6,
        }
    }
}

/// Field-specific copy of the split geometry and integration tables.
pub struct Ctx<S: Scalar> {
    pub split: AlfeldSplit,
    /// `grads[s][m][k]`: derivative along axis `k` of local barycentric `m`
    /// on subtet `s`.
    pub grads: [[[S; 3]; 4]; 4],
    pub vols: [S; 4],
    pub volume: S,
    pub z_bary: [S; 4],
    ints: Vec<S>,
    weights: Mutex<HashMap<(usize, usize), Arc<Vec<S>>>>,
}

pub fn conv<S: Scalar>(x: &Rational) -> Result<S> {
    Ok(S::from_rational(x)?)
}

pub fn conv3<S: Scalar>(v: &Vec3) -> Result<[S; 3]> {
    Ok([conv(&v[0])?, conv(&v[1])?, conv(&v[2])?])
}

impl<S: Scalar> Ctx<S> {
    pub fn new(split: &AlfeldSplit) -> Result<Self> {
        let mut grads: [[[S; 3]; 4]; 4] = std::array::from_fn(|_| {
            std::array::from_fn(|_| std::array::from_fn(|_| S::zero()))
        });
        let mut vols: [S; 4] = std::array::from_fn(|_| S::zero());
        for s in 0..4 {
            for m in 0..4 {
                grads[s][m] = conv3(split.sub_gradient(s, m))?;
            }
            vols[s] = conv(split.sub_volume(s))?;
        }
        let volume = conv(&split.parent.volume())?;
        let z_bary = [
            conv(&split.z_bary[0])?,
            conv(&split.z_bary[1])?,
            conv(&split.z_bary[2])?,
            conv(&split.z_bary[3])?,
        ];
        Ok(Ctx {
            split: split.clone(),
            grads,
            vols,
            volume,
            z_bary,
            ints: (0..=4 * poly::MAX_DEG as i64).map(S::from_i64).collect(),
            weights: Mutex::new(HashMap::new()),
        })
    }

    #[inline]
    pub fn int(&self, k: usize) -> &S {
        &self.ints[k]
    }

    /// Mean-value weights for `(nv, deg)` converted to the field.
    pub fn weights(&self, nv: usize, deg: usize) -> Arc<Vec<S>> {
        let mut w = self.weights.lock().unwrap();
        w.entry((nv, deg))
            .or_insert_with(|| {
                Arc::new(
                    poly::mean_weights(nv, deg)
                        .iter()
                        .map(|x| S::from_rational(x).expect("factorial ratio"))
                        .collect(),
                )
            })
            .clone()
    }

    /// Mean value of a polynomial over its simplex.
    pub fn mean(&self, p: &Poly<S>) -> S {
        let w = self.weights(p.nv, p.deg);
        dot(&w, &p.c)
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    let mut acc = S::zero();
    for (x, y) in a.iter().zip(b) {
        if !y.is_zero() {
            acc.add_mul_assign(x, y);
        }
    }
    acc
}

/// Piecewise polynomial field. Coefficients are laid out as
/// `[subtet][component][monomial]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BrokenField<S> {
    pub shape: Shape,
    pub deg: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> BrokenField<S> {
    pub fn zeros(shape: Shape, deg: usize) -> Self {
        BrokenField { shape, deg, data: vec![S::zero(); 4 * shape.ncomp() * poly::dim(4, deg)] }
    }

    pub fn from_data(shape: Shape, deg: usize, data: Vec<S>) -> Self {
        assert_eq!(data.len(), ambient_dim(shape, deg));
        BrokenField { shape, deg, data }
    }

    #[inline]
    pub fn nm(&self) -> usize {
        poly::dim(4, self.deg)
    }

    pub fn ncomp(&self) -> usize {
        self.shape.ncomp()
    }

    #[inline]
    pub fn comp(&self, s: usize, c: usize) -> &[S] {
        let nm = self.nm();
        let o = (s * self.ncomp() + c) * nm;
        &self.data[o..o + nm]
    }

    #[inline]
    pub fn comp_mut(&mut self, s: usize, c: usize) -> &mut [S] {
        let nm = self.nm();
        let o = (s * self.ncomp() + c) * nm;
        &mut self.data[o..o + nm]
    }

    pub fn poly(&self, s: usize, c: usize) -> Poly<S> {
        Poly { nv: 4, deg: self.deg, c: self.comp(s, c).to_vec() }
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// Field whose components are the given scalar-per-component fields.
    pub fn from_components(shape: Shape, comps: &[BrokenField<S>]) -> Self {
        assert_eq!(comps.len(), shape.ncomp());
        let deg = comps.iter().map(|c| c.deg).max().unwrap_or(0);
        let comps: Vec<_> = comps.iter().map(|c| c.to_degree(deg)).collect();
        let mut out = Self::zeros(shape, deg);
        for s in 0..4 {
            for (k, c) in comps.iter().enumerate() {
                out.comp_mut(s, k).clone_from_slice(c.comp(s, 0));
            }
        }
        out
    }

    /// Scalar field of one component.
    pub fn component(&self, c: usize) -> Self {
        let mut out = Self::zeros(Shape::Scalar, self.deg);
        for s in 0..4 {
            out.comp_mut(s, 0).clone_from_slice(self.comp(s, c));
        }
        out
    }

    /// Field with the same polynomial on every subtet, given one polynomial
    /// per component per subtet.
    pub fn from_polys(shape: Shape, deg: usize, polys: &[Vec<Poly<S>>]) -> Self {
        let mut out = Self::zeros(shape, deg);
        for s in 0..4 {
            for c in 0..shape.ncomp() {
                let p = polys[s][c].to_degree(deg);
                out.comp_mut(s, c).clone_from_slice(&p.c);
            }
        }
        out
    }

    pub fn add(&self, o: &Self) -> Self {
        assert_eq!(self.shape, o.shape);
        let d = self.deg.max(o.deg);
        let (a, b) = (self.to_degree(d), o.to_degree(d));
        let data = a.data.iter().zip(&b.data).map(|(x, y)| x.add(y)).collect();
        BrokenField { shape: self.shape, deg: d, data }
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(&S::one().neg()))
    }

    pub fn scale(&self, k: &S) -> Self {
        BrokenField {
            shape: self.shape,
            deg: self.deg,
            data: self.data.iter().map(|x| x.mul(k)).collect(),
        }
    }

    pub fn to_degree(&self, deg: usize) -> Self {
        if deg == self.deg {
            return self.clone();
        }
        assert!(deg > self.deg, "cannot lower degree {} to {deg}", self.deg);
        let mut out = Self::zeros(self.shape, deg);
        for s in 0..4 {
            for c in 0..self.ncomp() {
                let p = self.poly(s, c).to_degree(deg);
                out.comp_mut(s, c).clone_from_slice(&p.c);
            }
        }
        out
    }

    /// Multiply every component by a scalar broken field.
    pub fn mul_scalar_field(&self, w: &BrokenField<S>) -> Self {
        assert_eq!(w.shape, Shape::Scalar);
        let deg = self.deg + w.deg;
        let mut out = Self::zeros(self.shape, deg);
        for s in 0..4 {
            let ws = w.poly(s, 0);
            for c in 0..self.ncomp() {
                let p = self.poly(s, c).mul(&ws);
                out.comp_mut(s, c).clone_from_slice(&p.c);
            }
        }
        out
    }

    /// Symmetric storage to full matrix; other shapes unchanged.
    pub fn to_matrix(&self) -> Self {
        if self.shape != Shape::Sym {
            return self.clone();
        }
        let mut out = Self::zeros(Shape::Matrix, self.deg);
        for s in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    let k = sym_index(i, j);
                    out.comp_mut(s, 3 * i + j).clone_from_slice(self.comp(s, k));
                }
            }
        }
        out
    }

    /// Symmetric part of a matrix field, in symmetric storage.
    pub fn sym(&self) -> Self {
        let m = self.to_matrix();
        let half = S::from_ratio(1, 2);
        let mut out = Self::zeros(Shape::Sym, self.deg);
        for s in 0..4 {
            for (k, &(i, j)) in SYM_IJ.iter().enumerate() {
                let a = m.comp(s, 3 * i + j);
                let b = m.comp(s, 3 * j + i);
                let o = out.comp_mut(s, k);
                for t in 0..a.len() {
                    o[t] = a[t].add(&b[t]).mul(&half);
                }
            }
        }
        out
    }

    /// Skew part of a matrix field.
    pub fn skw(&self) -> Self {
        let m = self.to_matrix();
        m.sub(&m.sym().to_matrix())
    }

    pub fn transpose(&self) -> Self {
        let m = self.to_matrix();
        let mut out = Self::zeros(Shape::Matrix, self.deg);
        for s in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    out.comp_mut(s, 3 * i + j).clone_from_slice(m.comp(s, 3 * j + i));
                }
            }
        }
        out
    }

    pub fn trace(&self) -> Self {
        let m = self.to_matrix();
        let mut out = Self::zeros(Shape::Scalar, self.deg);
        for s in 0..4 {
            for i in 0..3 {
                let src = m.comp(s, 4 * i).to_vec();
                for (o, x) in out.comp_mut(s, 0).iter_mut().zip(&src) {
                    o.add_assign(x);
                }
            }
        }
        out
    }

    /// Scalar field times the identity matrix.
    pub fn times_identity(&self) -> Self {
        assert_eq!(self.shape, Shape::Scalar);
        let mut out = Self::zeros(Shape::Matrix, self.deg);
        for s in 0..4 {
            for i in 0..3 {
                out.comp_mut(s, 4 * i).clone_from_slice(self.comp(s, 0));
            }
        }
        out
    }

    /// Row `i` of a matrix field as a vector field.
    pub fn row(&self, i: usize) -> Self {
        let m = self.to_matrix();
        let mut out = Self::zeros(Shape::Vector, self.deg);
        for s in 0..4 {
            for j in 0..3 {
                out.comp_mut(s, j).clone_from_slice(m.comp(s, 3 * i + j));
            }
        }
        out
    }

    pub fn from_rows(rows: &[BrokenField<S>; 3]) -> Self {
        let deg = rows.iter().map(|r| r.deg).max().unwrap();
        let rows: Vec<_> = rows.iter().map(|r| r.to_degree(deg)).collect();
        let mut out = Self::zeros(Shape::Matrix, deg);
        for s in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    out.comp_mut(s, 3 * i + j).clone_from_slice(rows[i].comp(s, j));
                }
            }
        }
        out
    }

    /// `mskw(v) w = v x w`.
    pub fn mskw(&self) -> Self {
        assert_eq!(self.shape, Shape::Vector);
        let mut out = Self::zeros(Shape::Matrix, self.deg);
        // [[0,-v3,v2],[v3,0,-v1],[-v2,v1,0]]
        let entries = [(1, 2, 0), (2, 0, 1), (0, 1, 2)];
        for s in 0..4 {
            for &(i, j, k) in &entries {
                let v = self.comp(s, k).to_vec();
                out.comp_mut(s, 3 * j + i).clone_from_slice(&v);
                let neg: Vec<S> = v.iter().map(|x| x.neg()).collect();
                out.comp_mut(s, 3 * i + j).clone_from_slice(&neg);
            }
        }
        out
    }

    /// `vskw = mskw^{-1} o skw`.
    pub fn vskw(&self) -> Self {
        let k = self.skw();
        let mut out = Self::zeros(Shape::Vector, self.deg);
        for s in 0..4 {
            // v1 = K32, v2 = K13, v3 = K21
            out.comp_mut(s, 0).clone_from_slice(k.comp(s, 7));
            out.comp_mut(s, 1).clone_from_slice(k.comp(s, 2));
            out.comp_mut(s, 2).clone_from_slice(k.comp(s, 3));
        }
        out
    }

    /// `M' - tr(M) I`.
    pub fn xi(&self) -> Self {
        self.transpose().sub(&self.trace().times_identity())
    }

    /// `M' - tr(M)/2 I`, the inverse of [`Self::xi`].
    pub fn xi_inv(&self) -> Self {
        let t = self.trace().scale(&S::from_ratio(1, 2));
        self.transpose().sub(&t.times_identity())
    }

    /// Matrix field with rows `v_i a'` for a constant vector `a`, i.e. the
    /// outer product `v a'` of a vector field with a constant.
    pub fn outer_const(&self, a: &[S; 3]) -> Self {
        assert_eq!(self.shape, Shape::Vector);
        let mut out = Self::zeros(Shape::Matrix, self.deg);
        for s in 0..4 {
            for i in 0..3 {
                for j in 0..3 {
                    let v: Vec<S> = self.comp(s, i).iter().map(|x| x.mul(&a[j])).collect();
                    out.comp_mut(s, 3 * i + j).clone_from_slice(&v);
                }
            }
        }
        out
    }

    /// `M a` for a constant vector `a`.
    pub fn mat_vec_const(&self, a: &[S; 3]) -> Self {
        let m = self.to_matrix();
        let mut out = Self::zeros(Shape::Vector, self.deg);
        for s in 0..4 {
            for i in 0..3 {
                let mut acc = vec![S::zero(); m.nm()];
                for j in 0..3 {
                    if a[j].is_zero() {
                        continue;
                    }
                    for (o, x) in acc.iter_mut().zip(m.comp(s, 3 * i + j)) {
                        o.add_mul_assign(x, &a[j]);
                    }
                }
                out.comp_mut(s, i).clone_from_slice(&acc);
            }
        }
        out
    }

    /// `a' v` for a vector field and a constant vector.
    pub fn dot_const(&self, a: &[S; 3]) -> Self {
        assert_eq!(self.shape, Shape::Vector);
        let mut out = Self::zeros(Shape::Scalar, self.deg);
        for s in 0..4 {
            let mut acc = vec![S::zero(); self.nm()];
            for j in 0..3 {
                for (o, x) in acc.iter_mut().zip(self.comp(s, j)) {
                    o.add_mul_assign(x, &a[j]);
                }
            }
            out.comp_mut(s, 0).clone_from_slice(&acc);
        }
        out
    }

    /// Trace on the subsimplex with the given labels, seen from subtet `s`.
    /// The returned polynomials are in the barycentric coordinates of the
    /// subsimplex, in the order of `labels`.
    pub fn trace_on(&self, split: &AlfeldSplit, s: usize, labels: &[usize]) -> Vec<Poly<S>> {
        let loc: Vec<usize> = labels
            .iter()
            .map(|&l| split.local_index(s, l).expect("label not in subtet"))
            .collect();
        (0..self.ncomp())
            .map(|c| restrict_poly(self.comp(s, c), self.deg, &loc))
            .collect()
    }
}

/// Restriction of a subtet polynomial to the face spanned by local vertices
/// `loc` (in that order).
pub fn restrict_poly<S: Scalar>(coeffs: &[S], deg: usize, loc: &[usize]) -> Poly<S> {
    let nv = loc.len();
    let src = monomials(4, deg);
    let dst = monomials(nv, deg);
    let c = dst
        .exps
        .iter()
        .map(|e| {
            let mut a = [0u8; 4];
            for (t, &l) in loc.iter().enumerate() {
                a[l] = e[t];
            }
            coeffs[src.index(&a)].clone()
        })
        .collect();
    Poly { nv, deg, c }
}

pub fn ambient_dim(shape: Shape, deg: usize) -> usize {
    4 * shape.ncomp() * poly::dim(4, deg)
}

/// A polynomial on the whole parent tetrahedron, per component, in parent
/// barycentric coordinates.
#[derive(Clone, Debug)]
pub struct GlobalField<S> {
    pub shape: Shape,
    pub deg: usize,
    pub comps: Vec<Poly<S>>,
}

impl<S: Scalar> GlobalField<S> {
    /// The broken field equal to this polynomial on every subtet.
    pub fn embed(&self, ctx: &Ctx<S>) -> BrokenField<S> {
        let mut out = BrokenField::zeros(self.shape, self.deg);
        for s in 0..4 {
            let forms = embedding_forms(ctx, s);
            for (c, p) in self.comps.iter().enumerate() {
                let q = p.to_degree(self.deg).compose_linear(&forms);
                out.comp_mut(s, c).clone_from_slice(&q.c);
            }
        }
        out
    }
}

/// Parent barycentrics as linear forms in the local barycentrics of subtet
/// `s`: `lambda_m = zeta_m mu + lambda^s_{loc(m)}`.
pub fn embedding_forms<S: Scalar>(ctx: &Ctx<S>, s: usize) -> Vec<Poly<S>> {
    (0..4)
        .map(|m| {
            let mut c = vec![S::zero(); 4];
            c[0] = ctx.z_bary[m].clone();
            if let Some(l) = ctx.split.local_index(s, m) {
                c[l] = c[l].add(&S::one());
            }
            Poly::linear(&c)
        })
        .collect()
}

/// Convert a rational field to another scalar field.
pub fn convert_field<S: Scalar>(f: &BrokenField<Rational>) -> Result<BrokenField<S>> {
    let data = f
        .data
        .iter()
        .map(|x| S::from_rational(x).map_err(CoreError::from))
        .collect::<Result<Vec<_>>>()?;
    Ok(BrokenField { shape: f.shape, deg: f.deg, data })
}
