//! Pointwise matrix algebra, surface calculus on a face and the identities
//! the elasticity construction rests on, checked on seeded polynomials.
//! Also the operator matrices of the two-row BGG diagram.

use std::sync::Arc;
use std::time::Instant;

use alfeld_linalg::{independent_rows, Lu, Matrix, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::calculus::{self, partials};
use crate::error::{CoreError, Result};
use crate::field::{conv, conv3, BrokenField, Ctx, Shape};
use crate::geometry::{self, FACES};
use crate::poly::Poly;
use crate::spaces::{global_poly, FESpace, Forge, Label};
use crate::verify::{random_global, tensor_space, Report};

/// Pointwise algebraic maps on vector and matrix fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum AlgebraicMap {
    Xi,
    XiInv,
    Mskw,
    Vskw,
    TwoVskw,
    Sym,
    Skw,
    Transpose,
    Trace,
}

pub fn apply_algebraic<S: Scalar>(map: AlgebraicMap, f: &BrokenField<S>) -> Result<BrokenField<S>> {
    use AlgebraicMap::*;
    let matrix = matches!(f.shape, Shape::Matrix | Shape::Sym);
    let ok = match map {
        Mskw => f.shape == Shape::Vector,
        _ => matrix,
    };
    if !ok {
        return Err(CoreError::Shape(format!("{map:?} of {:?}", f.shape)));
    }
    Ok(match map {
        Xi => f.to_matrix().xi(),
        XiInv => f.to_matrix().xi_inv(),
        Mskw => f.mskw(),
        Vskw => f.to_matrix().vskw(),
        TwoVskw => f.to_matrix().vskw().scale(&S::from_i64(2)),
        Sym => f.sym(),
        Skw => f.to_matrix().skw(),
        Transpose => f.to_matrix().transpose(),
        Trace => f.to_matrix().trace(),
    })
}

/// `inc u` for a symmetric field, returned in symmetric storage after
/// checking that the skew part vanishes.
pub fn inc_sym<S: Scalar>(ctx: &Ctx<S>, u: &BrokenField<S>) -> Result<BrokenField<S>> {
    if u.shape != Shape::Sym && !u.skw().is_zero() {
        return Err(CoreError::Shape("inc of a non-symmetric field".into()));
    }
    let w = calculus::inc(ctx, u)?;
    if !w.skw().is_zero() {
        return Err(CoreError::Precondition("inc u is not symmetric".into()));
    }
    Ok(w.sym())
}

/// `sym grad v`.
pub fn deff<S: Scalar>(ctx: &Ctx<S>, v: &BrokenField<S>) -> Result<BrokenField<S>> {
    calculus::eps(ctx, v)
}

/// Derivative of every component in a constant direction.
pub fn dd<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>, d: &[S; 3]) -> BrokenField<S> {
    let deg = f.deg.saturating_sub(1);
    let mut out = BrokenField::zeros(f.shape, deg);
    if f.deg == 0 {
        return out;
    }
    for s in 0..4 {
        for c in 0..f.ncomp() {
            let p = partials(ctx, s, f.comp(s, c), f.deg);
            let o = out.comp_mut(s, c);
            for k in 0..3 {
                if d[k].is_zero() {
                    continue;
                }
                for (x, y) in o.iter_mut().zip(&p[k]) {
                    x.add_mul_assign(y, &d[k]);
                }
            }
        }
    }
    out
}

type F<S> = BrokenField<S>;

/// Surface calculus on one boundary face with an orthonormal right-handed
/// rational frame `(t1, t2, n)`. Tangential vectors and matrices are held by
/// their frame components; derivatives are taken in 3D along the frame
/// directions, which on the face are the surface derivatives.
pub struct FaceCalc<'a, S: Scalar> {
    pub ctx: &'a Ctx<S>,
    pub face: usize,
    /// `b[0] = t1`, `b[1] = t2`, `b[2] = n`.
    pub b: [[S; 3]; 3],
    pub area: S,
    /// Boundary edges oriented by the right-hand rule about `n`, with their
    /// edge vectors.
    pub edges: Vec<([usize; 2], [S; 3])>,
}

impl<'a, S: Scalar> FaceCalc<'a, S> {
    pub fn new(ctx: &'a Ctx<S>, face: usize) -> Result<Self> {
        let split = &ctx.split;
        let fr = split.face_frame(face, true)?;
        let b = [conv3(&fr.t1)?, conv3(&fr.t2)?, conv3(&fr.n)?];
        let raw = split.parent.face_normal(face);
        let area = conv(&(geometry::dot(&raw, &fr.n) / crate::linalg::q(2, 1)))?;
        let cyc = split.parent.face_cycle(face);
        let p = &split.parent.vertices;
        let mut edges = Vec::new();
        for k in 0..3 {
            let (a, c) = (cyc[k], cyc[(k + 1) % 3]);
            edges.push(([a, c], conv3(&geometry::sub(&p[c], &p[a]))?));
        }
        Ok(FaceCalc { ctx, face, b, area, edges })
    }

    /// Derivative along frame direction `k` (0, 1 tangential, 2 normal).
    pub fn d(&self, f: &F<S>, k: usize) -> F<S> {
        dd(self.ctx, f, &self.b[k])
    }

    /// Frame component `b_a . v`.
    pub fn vc(&self, v: &F<S>, a: usize) -> F<S> {
        v.dot_const(&self.b[a])
    }

    /// Frame component `b_a' u b_c`.
    pub fn mc(&self, u: &F<S>, a: usize, c: usize) -> F<S> {
        u.to_matrix().mat_vec_const(&self.b[c]).dot_const(&self.b[a])
    }

    /// Tangential block `u_FF`.
    pub fn ff(&self, u: &F<S>) -> [[F<S>; 2]; 2] {
        std::array::from_fn(|a| std::array::from_fn(|c| self.mc(u, a, c)))
    }

    pub fn grad_f(&self, phi: &F<S>) -> [F<S>; 2] {
        [self.d(phi, 0), self.d(phi, 1)]
    }

    /// `rot_F phi = (d_t2 phi) t1 - (d_t1 phi) t2`.
    pub fn rot_f(&self, phi: &F<S>) -> [F<S>; 2] {
        [self.d(phi, 1), self.d(phi, 0).scale(&S::one().neg())]
    }

    /// `curl_F w = d_t1 w2 - d_t2 w1`.
    pub fn curl_f(&self, w: &[F<S>; 2]) -> F<S> {
        self.d(&w[1], 0).sub(&self.d(&w[0], 1))
    }

    /// Row-wise `grad_F`.
    pub fn grad_f_vec(&self, w: &[F<S>; 2]) -> [[F<S>; 2]; 2] {
        std::array::from_fn(|a| self.grad_f(&w[a]))
    }

    /// Row-wise `rot_F` of a row vector.
    pub fn rot_f_vec(&self, q: &[F<S>; 2]) -> [[F<S>; 2]; 2] {
        std::array::from_fn(|a| self.rot_f(&q[a]))
    }

    /// Row-wise `curl_F` of a tangential matrix, a row vector.
    pub fn curl_f_mat(&self, u: &[[F<S>; 2]; 2]) -> [F<S>; 2] {
        std::array::from_fn(|a| self.curl_f(&u[a]))
    }

    pub fn tr_f(&self, u: &[[F<S>; 2]; 2]) -> F<S> {
        u[0][0].add(&u[1][1])
    }

    pub fn dev_f(&self, u: &[[F<S>; 2]; 2]) -> [[F<S>; 2]; 2] {
        let h = self.tr_f(u).scale(&S::from_ratio(1, 2));
        std::array::from_fn(|a| std::array::from_fn(|c| if a == c { u[a][c].sub(&h) } else { u[a][c].clone() }))
    }

    /// `eps_F w = sym grad_F w`.
    pub fn eps_f(&self, w: &[F<S>; 2]) -> [[F<S>; 2]; 2] {
        let g = self.grad_f_vec(w);
        let half = S::from_ratio(1, 2);
        std::array::from_fn(|a| std::array::from_fn(|c| g[a][c].add(&g[c][a]).scale(&half)))
    }

    /// 3D vector with the given frame components.
    pub fn from_frame(&self, comps: &[F<S>; 3]) -> F<S> {
        let cart: Vec<F<S>> = (0..3)
            .map(|i| {
                let mut acc = comps[0].scale(&self.b[0][i]);
                for a in 1..3 {
                    acc = acc.add(&comps[a].scale(&self.b[a][i]));
                }
                acc
            })
            .collect();
        F::from_components(Shape::Vector, &cart)
    }

    /// Integral over the face of a scalar field.
    pub fn int_face(&self, g: &F<S>) -> S {
        let p = &g.trace_on(&self.ctx.split, self.face, &FACES[self.face])[0];
        self.ctx.mean(p).mul(&self.area)
    }

    /// `int_dF g (b_k . t) ds`, summed over the oriented boundary.
    pub fn int_boundary(&self, g: &F<S>, k: usize) -> S {
        let mut acc = S::zero();
        for (e, d) in &self.edges {
            let w = crate::field::dot(&self.b[k], d);
            if w.is_zero() {
                continue;
            }
            let p = &g.trace_on(&self.ctx.split, self.face, e)[0];
            acc.add_mul_assign(&self.ctx.mean(p), &w);
        }
        acc
    }

    /// Restriction of a scalar field to the face.
    pub fn on_face(&self, g: &F<S>) -> Poly<S> {
        g.trace_on(&self.ctx.split, self.face, &FACES[self.face]).remove(0)
    }
}

/// Identities checked on seeded polynomial fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Identity {
    /// `div Xi M = 2 vskw curl M`
    DivXi,
    /// `Xi grad v = -curl mskw v`
    XiGrad,
    /// `curl Xi^-1 curl` kills `grad v` and `mskw v`
    CurlXiCurlKernel,
    /// `vskw curl Xi^-1 curl M = 0`
    VskwCurlXiCurl,
    /// `tr curl u = 0` for symmetric `u`
    TraceCurlSym,
    /// `s'(curl u)n = curl_F (u_Fs)'`
    NormalCurl,
    /// `[(curl u)']_Fn = curl_F u_FF`
    CurlTransposeFn,
    /// `(inc u)_nn = curl_F (curl_F u_FF)'`
    IncNn,
    /// `(inc u)_Fn = curl_F [(curl u)']_FF`
    IncFn,
    /// `tr_F curl u = -curl_F (u_Fn)'`
    TraceFCurl,
    /// `2 (curl eps v)' = grad curl v`
    CurlEps,
    /// `2 [(curl eps v)']_FF = grad_F (curl v)_F`
    CurlEpsFf,
    /// `curl v = n curl_F v_F + rot_F (v.n) + n x d_n v`
    CurlSplit,
    /// `2 [eps v]_nF = 2 [eps(v)_Fn]' = grad_F (v.n) + d_n v_F`
    EpsNf,
    /// `tr_F (rot_F v_F') = curl_F v_F`
    TraceRotF,
    /// face integration by parts for `(inc u)_nn`
    FaceIbpNn,
    /// face integration by parts for `(inc u)_Fn`
    FaceIbpFn,
}

impl Identity {
    pub const ALL: [Identity; 17] = [
        Identity::DivXi,
        Identity::XiGrad,
        Identity::CurlXiCurlKernel,
        Identity::VskwCurlXiCurl,
        Identity::TraceCurlSym,
        Identity::NormalCurl,
        Identity::CurlTransposeFn,
        Identity::IncNn,
        Identity::IncFn,
        Identity::TraceFCurl,
        Identity::CurlEps,
        Identity::CurlEpsFf,
        Identity::CurlSplit,
        Identity::EpsNf,
        Identity::TraceRotF,
        Identity::FaceIbpNn,
        Identity::FaceIbpFn,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Identity::DivXi => "div-xi",
            Identity::XiGrad => "xi-grad",
            Identity::CurlXiCurlKernel => "curl-xi-curl-kernel",
            Identity::VskwCurlXiCurl => "vskw-curl-xi-curl",
            Identity::TraceCurlSym => "trace-curl-sym",
            Identity::NormalCurl => "normal-curl",
            Identity::CurlTransposeFn => "curlt-fn",
            Identity::IncNn => "inc-nn",
            Identity::IncFn => "inc-fn",
            Identity::TraceFCurl => "trf-curl",
            Identity::CurlEps => "curl-eps",
            Identity::CurlEpsFf => "curl-eps-ff",
            Identity::CurlSplit => "curl-split",
            Identity::EpsNf => "eps-nf",
            Identity::TraceRotF => "trf-rotf",
            Identity::FaceIbpNn => "face-ibp-nn",
            Identity::FaceIbpFn => "face-ibp-fn",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|i| i.id() == s).ok_or_else(|| CoreError::UnknownLabel(format!("identity {s}")))
    }

    pub fn statement(self) -> &'static str {
        match self {
            Identity::DivXi => "div Xi M = 2 vskw curl M",
            Identity::XiGrad => "Xi grad v = -curl mskw v",
            Identity::CurlXiCurlKernel => "curl Xi^-1 curl grad v = 0 and curl Xi^-1 curl mskw v = 0",
            Identity::VskwCurlXiCurl => "vskw curl Xi^-1 curl M = 0",
            Identity::TraceCurlSym => "tr curl u = 0 for symmetric u",
            Identity::NormalCurl => "s'(curl u)n = curl_F (u_Fs)' for s in {t1, t2, n, t1+2t2-3n}",
            Identity::CurlTransposeFn => "[(curl u)']_Fn = curl_F u_FF",
            Identity::IncNn => "(inc u)_nn = curl_F (curl_F u_FF)' for symmetric u",
            Identity::IncFn => "(inc u)_Fn = curl_F [(curl u)']_FF for symmetric u",
            Identity::TraceFCurl => "tr_F curl u = -curl_F (u_Fn)' for symmetric u",
            Identity::CurlEps => "2 (curl eps v)' = grad curl v",
            Identity::CurlEpsFf => "2 [(curl eps v)']_FF = grad_F (curl v)_F",
            Identity::CurlSplit => "curl v = n curl_F v_F + rot_F (v.n) + n x d_n v with d_n v = (grad v) n",
            Identity::EpsNf => "2 [eps v]_nF = 2 [eps(v)_Fn]' = grad_F (v.n) + d_n v_F with d_n v = (grad v) n",
            Identity::TraceRotF => "tr_F (rot_F v_F') = curl_F v_F",
            Identity::FaceIbpNn => "int_F (inc u)_nn phi = int_F u_FF : rot_F (rot_F phi)' + int_dF (curl_F u_FF) t phi + int_dF u_FF t . (rot_F phi)'",
            Identity::FaceIbpFn => "int_F (inc u)_Fn . q = int_F [(curl u)']_FF : dev_F rot_F q - 1/2 int_F u_nF . rot_F curl_F q' + int_dF [(curl u)']_FF t . q' - 1/2 int_dF (u_nF . t) curl_F q'",
        }
    }

    pub fn on_faces(self) -> bool {
        !matches!(
            self,
            Identity::DivXi
                | Identity::XiGrad
                | Identity::CurlXiCurlKernel
                | Identity::VskwCurlXiCurl
                | Identity::TraceCurlSym
                | Identity::CurlEps
        )
    }
}

/// Difference of two lists of fields, `None` if they agree.
fn diff<S: Scalar>(a: &[F<S>], b: &[F<S>]) -> Option<usize> {
    let nz: usize = a
        .iter()
        .zip(b)
        .map(|(x, y)| x.to_matrix().sub(&y.to_matrix()).data.iter().filter(|c| !c.is_zero()).count())
        .sum();
    (nz > 0).then_some(nz)
}

/// Outcome of one identity on one input: `(lhs - rhs)` nonzero coefficient
/// count, and the same for the sign-flipped variant where one is tracked.
struct Trial {
    mismatch: Option<usize>,
    flipped: Option<Option<usize>>,
}

fn trial<S: Scalar>(ctx: &Ctx<S>, id: Identity, fc: Option<&FaceCalc<S>>, rng: &mut ChaCha8Rng) -> Result<Trial> {
    use calculus::{curl, div, eps, grad};
    let deg = 4;
    let plain = |m: Option<usize>| Trial { mismatch: m, flipped: None };
    let two = S::from_i64(2);
    let half = S::from_ratio(1, 2);
    let neg = |f: &F<S>| f.scale(&S::one().neg());
    Ok(match id {
        Identity::DivXi => {
            let m = random_global(ctx, Shape::Matrix, deg, rng);
            plain(diff(&[div(ctx, &m.xi())?], &[curl(ctx, &m)?.vskw().scale(&two)]))
        }
        Identity::XiGrad => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            plain(diff(&[grad(ctx, &v)?.xi()], &[neg(&curl(ctx, &v.mskw())?)]))
        }
        Identity::CurlXiCurlKernel => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            let op = |m: &F<S>| -> Result<F<S>> { curl(ctx, &curl(ctx, m)?.xi_inv()) };
            let a = op(&grad(ctx, &v)?)?;
            let b = op(&v.mskw())?;
            let z = F::zeros(Shape::Matrix, 0);
            plain(diff(&[a, b], &[z.clone(), z]))
        }
        Identity::VskwCurlXiCurl => {
            let m = random_global(ctx, Shape::Matrix, deg, rng);
            let w = curl(ctx, &curl(ctx, &m)?.xi_inv())?.vskw();
            plain(diff(&[w], &[F::zeros(Shape::Vector, 0)]))
        }
        Identity::TraceCurlSym => {
            let u = random_global(ctx, Shape::Sym, deg, rng);
            plain(diff(&[curl(ctx, &u)?.trace()], &[F::zeros(Shape::Scalar, 0)]))
        }
        Identity::CurlEps => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            let l = curl(ctx, &eps(ctx, &v)?)?.transpose().scale(&two);
            plain(diff(&[l], &[grad(ctx, &curl(ctx, &v)?)?]))
        }
        _ => {
            let f = fc.expect("face identity needs a frame");
            face_trial(ctx, id, f, rng, deg, &two, &half)?
        }
    })
}

fn face_trial<S: Scalar>(
    ctx: &Ctx<S>,
    id: Identity,
    f: &FaceCalc<S>,
    rng: &mut ChaCha8Rng,
    deg: usize,
    two: &S,
    half: &S,
) -> Result<Trial> {
    use calculus::{curl, eps, grad, inc};
    let plain = |m: Option<usize>| Trial { mismatch: m, flipped: None };
    let neg = |x: &F<S>| x.scale(&S::one().neg());
    Ok(match id {
        Identity::NormalCurl => {
            let u = random_global(ctx, Shape::Matrix, deg, rng);
            let cu = curl(ctx, &u)?;
            let mut bad = 0;
            let mixed: [S; 3] = std::array::from_fn(|i| {
                f.b[0][i].add(&f.b[1][i].mul(two)).sub(&f.b[2][i].mul(&S::from_i64(3)))
            });
            for s in [f.b[0].clone(), f.b[1].clone(), f.b[2].clone(), mixed] {
                let lhs = cu.mat_vec_const(&f.b[2]).dot_const(&s);
                // u_Fs has components s' u t_i
                let w: [F<S>; 2] = std::array::from_fn(|i| u.mat_vec_const(&f.b[i]).dot_const(&s));
                bad += diff(&[lhs], &[f.curl_f(&w)]).unwrap_or(0);
            }
            plain((bad > 0).then_some(bad))
        }
        Identity::CurlTransposeFn => {
            let u = random_global(ctx, Shape::Matrix, deg, rng);
            let ct = curl(ctx, &u)?.transpose();
            let lhs: Vec<F<S>> = (0..2).map(|a| f.mc(&ct, 2, a)).collect();
            let rhs = f.curl_f_mat(&f.ff(&u));
            plain(diff(&lhs, &rhs))
        }
        Identity::IncNn => {
            let u = random_global(ctx, Shape::Sym, deg, rng);
            let lhs = f.mc(&inc(ctx, &u)?, 2, 2);
            let rhs = f.curl_f(&f.curl_f_mat(&f.ff(&u)));
            plain(diff(&[lhs], &[rhs]))
        }
        Identity::IncFn => {
            let u = random_global(ctx, Shape::Sym, deg, rng);
            let x = inc(ctx, &u)?;
            let lhs: Vec<F<S>> = (0..2).map(|a| f.mc(&x, 2, a)).collect();
            let ct = curl(ctx, &u)?.transpose();
            let rhs = f.curl_f_mat(&f.ff(&ct));
            plain(diff(&lhs, &rhs))
        }
        Identity::TraceFCurl => {
            let u = random_global(ctx, Shape::Sym, deg, rng);
            let lhs = f.tr_f(&f.ff(&curl(ctx, &u)?));
            let w: [F<S>; 2] = std::array::from_fn(|i| f.mc(&u, 2, i));
            plain(diff(&[lhs], &[neg(&f.curl_f(&w))]))
        }
        Identity::CurlEpsFf => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            let ct = curl(ctx, &eps(ctx, &v)?)?.transpose().scale(two);
            let lhs = f.ff(&ct);
            let cv = curl(ctx, &v)?;
            let rhs = f.grad_f_vec(&[f.vc(&cv, 0), f.vc(&cv, 1)]);
            plain(diff(&lhs.concat(), &rhs.concat()))
        }
        Identity::CurlSplit => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            let lhs = curl(ctx, &v)?;
            let vf = [f.vc(&v, 0), f.vc(&v, 1)];
            let z = F::zeros(Shape::Scalar, 0);
            let a = f.from_frame(&[z.clone(), z.clone(), f.curl_f(&vf)]);
            let r = f.rot_f(&f.vc(&v, 2));
            let b = f.from_frame(&[r[0].clone(), r[1].clone(), z]);
            let dn = grad(ctx, &v)?.mat_vec_const(&f.b[2]);
            let c = cross_const(&f.b[2], &dn);
            plain(diff(&[lhs], &[a.add(&b).add(&c)]))
        }
        Identity::EpsNf => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            let e = eps(ctx, &v)?;
            let nf: Vec<F<S>> = (0..2).map(|a| f.mc(&e, a, 2).scale(two)).collect();
            let fnt: Vec<F<S>> = (0..2).map(|a| f.mc(&e, 2, a).scale(two)).collect();
            let gn = f.grad_f(&f.vc(&v, 2));
            let dn = grad(ctx, &v)?.mat_vec_const(&f.b[2]);
            let rhs: Vec<F<S>> = (0..2).map(|a| gn[a].add(&f.vc(&dn, a))).collect();
            let m = diff(&nf, &rhs).unwrap_or(0) + diff(&fnt, &rhs).unwrap_or(0);
            plain((m > 0).then_some(m))
        }
        Identity::TraceRotF => {
            let v = random_global(ctx, Shape::Vector, deg, rng);
            let vf = [f.vc(&v, 0), f.vc(&v, 1)];
            let lhs = f.tr_f(&f.rot_f_vec(&vf));
            let rhs = f.curl_f(&vf);
            Trial { mismatch: diff(&[lhs.clone()], &[rhs.clone()]), flipped: Some(diff(&[lhs], &[neg(&rhs)])) }
        }
        Identity::FaceIbpNn => {
            let u = random_global(ctx, Shape::Sym, deg, rng);
            let phi = random_global(ctx, Shape::Scalar, deg - 1, rng);
            let lhs = f.int_face(&f.mc(&inc(ctx, &u)?, 2, 2).mul_scalar_field(&phi));
            let uff = f.ff(&u);
            let rho = f.rot_f(&phi);
            let rr = f.rot_f_vec(&rho);
            let mut rhs = S::zero();
            for a in 0..2 {
                for c in 0..2 {
                    rhs.add_assign(&f.int_face(&uff[a][c].mul_scalar_field(&rr[a][c])));
                }
            }
            let cf = f.curl_f_mat(&uff);
            for k in 0..2 {
                rhs.add_assign(&f.int_boundary(&cf[k].mul_scalar_field(&phi), k));
            }
            for a in 0..2 {
                for c in 0..2 {
                    rhs.add_assign(&f.int_boundary(&uff[a][c].mul_scalar_field(&rho[a]), c));
                }
            }
            plain((lhs != rhs).then_some(1))
        }
        Identity::FaceIbpFn => {
            let u = random_global(ctx, Shape::Sym, deg, rng);
            let q = [random_global(ctx, Shape::Scalar, deg - 1, rng), random_global(ctx, Shape::Scalar, deg - 1, rng)];
            let x = inc(ctx, &u)?;
            let mut lhs = S::zero();
            for a in 0..2 {
                lhs.add_assign(&f.int_face(&f.mc(&x, 2, a).mul_scalar_field(&q[a])));
            }
            let c = f.ff(&curl(ctx, &u)?.transpose());
            let dev = f.dev_f(&f.rot_f_vec(&q));
            let s = f.curl_f(&q);
            let rs = f.rot_f(&s);
            let unf: [F<S>; 2] = std::array::from_fn(|a| f.mc(&u, a, 2));
            let mut t1 = S::zero();
            for a in 0..2 {
                for b in 0..2 {
                    t1.add_assign(&f.int_face(&c[a][b].mul_scalar_field(&dev[a][b])));
                }
            }
            let mut t2 = S::zero();
            for a in 0..2 {
                t2.add_assign(&f.int_face(&unf[a].mul_scalar_field(&rs[a])));
            }
            let mut t3 = S::zero();
            for a in 0..2 {
                for b in 0..2 {
                    t3.add_assign(&f.int_boundary(&c[a][b].mul_scalar_field(&q[a]), b));
                }
            }
            let mut t4 = S::zero();
            for a in 0..2 {
                t4.add_assign(&f.int_boundary(&unf[a].mul_scalar_field(&s), a));
            }
            // stated signs, then with both 1/2 terms flipped
            let rest = t1.add(&t3);
            let halves = t2.add(&t4).mul(half);
            let stated = rest.sub(&halves);
            let flipped = rest.add(&halves);
            Trial { mismatch: (lhs != stated).then_some(1), flipped: Some((lhs != flipped).then_some(1)) }
        }
        _ => unreachable!("not a face identity"),
    })
}

/// `n x w` for a constant `n`.
pub fn cross_const<S: Scalar>(n: &[S; 3], w: &F<S>) -> F<S> {
    let comps: Vec<F<S>> = (0..3)
        .map(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let mut row = [S::zero(), S::zero(), S::zero()];
            row[k] = n[j].clone();
            row[j] = n[k].neg();
            w.dot_const(&row)
        })
        .collect();
    F::from_components(Shape::Vector, &comps)
}

/// Number of seeded inputs per identity (and per face for face identities).
pub const TRIALS: usize = 20;

/// Evaluate one identity on `TRIALS` seeded inputs, on every face of the
/// parent for the surface identities.
pub fn verify_identity<S: Scalar>(ctx: &Ctx<S>, id: Identity, seed: u64) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new(format!("identity/{}", id.id()), ctx, 4, Some(seed), id.statement());
    let faces: Vec<Option<FaceCalc<S>>> = if id.on_faces() {
        (0..4).map(|i| FaceCalc::new(ctx, i).map(Some)).collect::<Result<_>>()?
    } else {
        vec![None]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut passed, mut total, mut flipped_ok, mut tracked) = (0, 0, 0, false);
    let mut first_bad = None;
    for k in 0..TRIALS {
        for fc in &faces {
            let t = trial(ctx, id, fc.as_ref(), &mut rng)?;
            total += 1;
            match t.mismatch {
                None => passed += 1,
                Some(nz) if first_bad.is_none() => first_bad = Some((k, fc.as_ref().map(|f| f.face), nz)),
                _ => {}
            }
            if let Some(fl) = t.flipped {
                tracked = true;
                if fl.is_none() {
                    flipped_ok += 1;
                }
            }
        }
    }
    rep.wit("inputs", total);
    rep.wit("passed", passed);
    if tracked {
        rep.wit("passed with opposite sign", flipped_ok);
    }
    if let Some((k, face, nz)) = first_bad {
        let at = face.map(|f| format!(" on face {f}")).unwrap_or_default();
        rep.note(format!("first discrepancy at input {k}{at}: {nz} nonzero coefficients in lhs - rhs"));
        if tracked && flipped_ok == total {
            rep.note(match id {
                Identity::TraceRotF => "holds on every input as tr_F (rot_F v_F') = -curl_F v_F",
                _ => "holds on every input with both 1/2 terms taken with a plus sign",
            });
        }
    }
    Ok(rep.finish(passed == total, t0))
}

/// Hypothesis space of the 2D face exactness statement and its conclusion
/// space, on face `face` at degree `r`.
pub struct FaceExactness<S> {
    /// Symmetric `u_FF` (components `u11, u12, u22`, each in `P_r(F)`) with
    /// `curl_F (curl_F u_FF)' = 0`, `u_FF = 0` and `t . curl_F u_FF = 0` on
    /// the boundary of the face.
    pub hypothesis: Vec<[Poly<S>; 3]>,
    /// `eps_F(b_F^2 phi)` for `phi` in `[P_{r-5}(F)]^2`.
    pub conclusion: Vec<[Poly<S>; 3]>,
}

fn face_monomials<S: Scalar>(ctx: &Ctx<S>, face: usize, k: usize) -> Vec<F<S>> {
    let t = crate::poly::monomials(3, k);
    t.exps
        .iter()
        .map(|e| {
            let mut e4 = [0u8; 4];
            for (m, &v) in FACES[face].iter().enumerate() {
                e4[v] = e[m];
            }
            global_poly(ctx, Poly::monomial(4, e4))
        })
        .collect()
}

fn flat3<S: Scalar>(p: &[Poly<S>; 3]) -> Vec<S> {
    p.iter().flat_map(|q| q.c.iter().cloned()).collect()
}

pub fn face_exactness_spaces<S: Scalar>(ctx: &Ctx<S>, face: usize, r: usize) -> Result<FaceExactness<S>> {
    let f = FaceCalc::new(ctx, face)?;
    let mons = face_monomials(ctx, face, r);
    let z = F::zeros(Shape::Scalar, r);
    // unknowns: (component, monomial) with components u11, u12, u22
    let mut unknowns: Vec<[F<S>; 3]> = Vec::new();
    for c in 0..3 {
        for m in &mons {
            let mut u = [z.clone(), z.clone(), z.clone()];
            u[c] = m.clone();
            unknowns.push(u);
        }
    }
    let constraints = |u: &[F<S>; 3]| -> Vec<S> {
        let uff = [[u[0].clone(), u[1].clone()], [u[1].clone(), u[2].clone()]];
        let c = f.curl_f_mat(&uff);
        let mut out = f.on_face(&f.curl_f(&c)).c;
        for (e, d) in &f.edges {
            for x in u {
                out.extend(x.trace_on(&ctx.split, face, e)[0].c.iter().cloned());
            }
            let t0 = crate::field::dot(&f.b[0], d);
            let t1 = crate::field::dot(&f.b[1], d);
            let tc = c[0].scale(&t0).add(&c[1].scale(&t1));
            out.extend(tc.trace_on(&ctx.split, face, e)[0].c.iter().cloned());
        }
        out
    };
    let rows: Vec<Vec<S>> = alfeld_linalg::par::map(&unknowns, |u| constraints(u));
    let m = Matrix::from_columns(&rows, rows[0].len());
    let ns = alfeld_linalg::nullspace_basis(&m);
    let restrict = |u: &[F<S>; 3]| -> [Poly<S>; 3] { std::array::from_fn(|c| f.on_face(&u[c]).to_degree(r)) };
    let hypothesis = (0..ns.cols())
        .map(|j| {
            let mut acc = [z.clone(), z.clone(), z.clone()];
            for (i, u) in unknowns.iter().enumerate() {
                let a = ns.get(i, j);
                if !a.is_zero() {
                    for c in 0..3 {
                        acc[c] = acc[c].add(&u[c].scale(a));
                    }
                }
            }
            restrict(&acc)
        })
        .collect();
    let mut conclusion = Vec::new();
    if r >= 5 {
        let mut e4 = [0u8; 4];
        for &v in &FACES[face] {
            e4[v] = 2;
        }
        let b2 = global_poly(ctx, Poly::monomial(4, e4));
        for m in face_monomials(ctx, face, r - 5) {
            let bm = m.mul_scalar_field(&b2);
            for a in 0..2 {
                let zz = F::zeros(Shape::Scalar, bm.deg);
                let mut w = [zz.clone(), zz];
                w[a] = bm.clone();
                let e = f.eps_f(&w);
                conclusion.push(restrict(&[e[0][0].clone(), e[0][1].clone(), e[1][1].clone()]));
            }
        }
    }
    Ok(FaceExactness { hypothesis, conclusion })
}

/// Seeded members of the hypothesis space are `eps_F(b_F^2 phi)`.
pub fn face_exactness_check<S: Scalar>(ctx: &Ctx<S>, face: usize, r: usize, seed: u64) -> Result<Report> {
    let t0 = Instant::now();
    let mut rep = Report::new(
        format!("face-exactness/{face}"),
        ctx,
        r as i64,
        Some(seed),
        "a symmetric u_FF in P_r(F) with curl_F (curl_F u_FF)' = 0, u_FF = 0 and t . curl_F u_FF = 0 on the boundary is eps_F(b_F^2 phi), phi in [P_{r-5}(F)]^2",
    );
    let sp = face_exactness_spaces(ctx, face, r)?;
    rep.wit("hypothesis dim", sp.hypothesis.len());
    let cols: Vec<Vec<S>> = sp.conclusion.iter().map(flat3).collect();
    let n = 3 * crate::poly::dim(3, r);
    let cm = Matrix::from_columns(&cols, n);
    rep.wit("conclusion dim", if cols.is_empty() { 0 } else { alfeld_linalg::rank(&cm) });
    if sp.hypothesis.is_empty() {
        rep.note("hypothesis space is empty at this degree");
        return Ok(rep.finish(true, t0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut solved = 0;
    let members = 10;
    for _ in 0..members {
        let mut w = vec![S::zero(); n];
        for h in &sp.hypothesis {
            let a = S::from_i64(rand::Rng::gen_range(&mut rng, -9..=9));
            for (o, x) in w.iter_mut().zip(flat3(h)) {
                o.add_mul_assign(&a, &x);
            }
        }
        if !cols.is_empty() && alfeld_linalg::solve_any(&cm, &w)?.is_some() {
            solved += 1;
        } else if w.iter().all(|x| x.is_zero()) {
            solved += 1;
        }
    }
    rep.wit("members", members);
    rep.wit("solved", solved);
    Ok(rep.finish(solved == members, t0))
}

/// Coordinates of fields in the basis of a space.
pub struct Coords<S: Scalar> {
    space: Arc<FESpace<S>>,
    m: Matrix<S>,
    rows: Vec<usize>,
    lu: Option<Lu<S>>,
}

impl<S: Scalar> Coords<S> {
    pub fn new(space: Arc<FESpace<S>>) -> Result<Self> {
        let m = space.matrix();
        if space.dim() == 0 {
            return Ok(Coords { space, m, rows: Vec::new(), lu: None });
        }
        let rows = independent_rows(&m);
        let lu = Lu::factor(&m.select_rows(&rows))?;
        Ok(Coords { space, m, rows, lu: Some(lu) })
    }

    /// Coordinates of `f`, or an error if it is not in the space.
    pub fn of(&self, f: &F<S>) -> Result<Vec<S>> {
        let outside = || CoreError::Precondition(format!("field not in {}", self.space.name));
        if f.deg > self.space.deg {
            // only admissible if the excess degree is spurious
            return Err(outside());
        }
        let data = f.to_degree(self.space.deg).data;
        let Some(lu) = &self.lu else {
            return if data.iter().all(|x| x.is_zero()) { Ok(Vec::new()) } else { Err(outside()) };
        };
        let b: Vec<S> = self.rows.iter().map(|&i| data[i].clone()).collect();
        let c = lu.solve(&b)?;
        if self.m.mul_vec(&c)? != data {
            return Err(outside());
        }
        Ok(c)
    }
}

/// Matrix of a map between spaces, column by column.
pub fn operator_matrix<S: Scalar>(
    from: &FESpace<S>,
    to: &Coords<S>,
    f: impl Fn(&F<S>) -> Result<F<S>> + Sync + Send,
) -> Result<Matrix<S>> {
    let cols: Vec<Vec<S>> = alfeld_linalg::par::map(&from.basis, |b| to.of(&f(b)?))
        .into_iter()
        .collect::<Result<_>>()?;
    Ok(Matrix::from_columns(&cols, to.space.dim()))
}

/// Operator matrices of the two-row diagram and of the derived sequence.
pub struct BggDerived<S: Scalar> {
    /// `grad, curl, div` on the `Z (x) V` row.
    pub top: [Matrix<S>; 3],
    /// `grad, curl, div` on the `V (x) V` row.
    pub bottom: [Matrix<S>; 3],
    /// `-mskw, Xi, 2 vskw` from the bottom row to the top row.
    pub connectors: [Matrix<S>; 3],
    /// `[grad, -mskw]`, `curl Xi^-1 curl`, `[2 vskw; div]`.
    pub derived: [Matrix<S>; 3],
    pub report: Report,
}

/// Build the diagram at `r`, check `top_{i+1} s_i = s_{i+1} bottom_i`,
/// invert `s_1` and compose the derived operators.
pub fn bgg_derive<S: Scalar>(forge: &Forge<S>, r: i64, ring: bool) -> Result<BggDerived<S>> {
    let t0 = Instant::now();
    let ctx = &*forge.ctx;
    let o = if ring { "o" } else { "" };
    let mut rep = Report::new(
        format!("bgg/{}", if ring { "ring" } else { "plain" }),
        ctx,
        r,
        None,
        "Xi is a bijection from V1_{r-1}(x)V to Z2_{r-1}(x)V, the diagram commutes and the derived operators form a complex",
    );
    let l = |s: &str| Label::parse(s);
    let z3 = if ring { "Z3hat".to_string() } else { "Z3".to_string() };
    let top_sp = [
        tensor_space(forge, l(&format!("Z0{o}"))?, r + 1)?,
        tensor_space(forge, l(&format!("Z1{o}"))?, r)?,
        tensor_space(forge, l(&format!("Z2{o}"))?, r - 1)?,
        tensor_space(forge, l(&z3)?, r - 2)?,
    ];
    let bot_sp = [
        tensor_space(forge, l(&format!("V0{o}"))?, r)?,
        tensor_space(forge, l(&format!("V1{o}"))?, r - 1)?,
        tensor_space(forge, l(&format!("V2{o}"))?, r - 2)?,
        tensor_space(forge, l(&format!("V3{o}"))?, r - 3)?,
    ];
    let top_c: Vec<Coords<S>> = top_sp.iter().map(|s| Coords::new(s.clone())).collect::<Result<_>>()?;
    let bot_c: Vec<Coords<S>> = bot_sp.iter().map(|s| Coords::new(s.clone())).collect::<Result<_>>()?;
    let d = |k: usize| {
        move |b: &F<S>| -> Result<F<S>> {
            match k {
                0 => calculus::grad(ctx, b),
                1 => calculus::curl(ctx, b),
                _ => calculus::div(ctx, b),
            }
        }
    };
    let mut top = Vec::new();
    let mut bottom = Vec::new();
    for k in 0..3 {
        top.push(operator_matrix(&top_sp[k], &top_c[k + 1], d(k))?);
        bottom.push(operator_matrix(&bot_sp[k], &bot_c[k + 1], d(k))?);
    }
    let conn = [
        operator_matrix(&bot_sp[0], &top_c[1], |b| Ok(b.mskw().scale(&S::one().neg())))?,
        operator_matrix(&bot_sp[1], &top_c[2], |b| Ok(b.xi()))?,
        operator_matrix(&bot_sp[2], &top_c[3], |b| Ok(b.vskw().scale(&S::from_i64(2))))?,
    ];
    let mut ok = true;
    for k in 0..2 {
        let res = top[k + 1].mul(&conn[k])?;
        let other = conn[k + 1].mul(&bottom[k])?;
        let zero = res == other;
        rep.wit(format!("square {k} commutes"), zero as i64);
        ok &= zero;
    }
    let s1 = &conn[1];
    rep.wit("s1 rows", s1.rows());
    rep.wit("s1 cols", s1.cols());
    let s1_rank = alfeld_linalg::rank(s1);
    rep.wit("s1 rank", s1_rank);
    if s1.rows() != s1.cols() || s1_rank != s1.cols() {
        rep.note("s1 is not a bijection");
        return Err(CoreError::Precondition(format!(
            "bijection hypothesis violated: s1 is {}x{} of rank {s1_rank}",
            s1.rows(),
            s1.cols()
        )));
    }
    // s1^-1 by columns
    let lu = Lu::factor(s1)?;
    let n = s1.rows();
    let inv_cols: Vec<Vec<S>> = (0..n)
        .map(|j| {
            let mut e = vec![S::zero(); n];
            e[j] = S::one();
            lu.solve(&e)
        })
        .collect::<std::result::Result<_, _>>()?;
    let s1_inv = Matrix::from_columns(&inv_cols, n);
    let d0 = top[0].hstack(&conn[0])?;
    let d1 = bottom[1].mul(&s1_inv)?.mul(&top[1])?;
    let d2 = conn[2].vstack(&bottom[2])?;
    // the derived middle map agrees with curl Xi^-1 curl applied directly
    let direct = operator_matrix(&top_sp[1], &bot_c[2], |b| calculus::curl(ctx, &calculus::curl(ctx, b)?.xi_inv()))?;
    let agrees = direct == d1;
    rep.wit("middle map matches curl Xi^-1 curl", agrees as i64);
    ok &= agrees;
    let c01 = d1.mul(&d0)?.is_zero();
    let c12 = d2.mul(&d1)?.is_zero();
    rep.wit("composition 0 zero", c01 as i64);
    rep.wit("composition 1 zero", c12 as i64);
    ok &= c01 && c12;
    let report = rep.finish(ok, t0);
    let v3 = |v: Vec<Matrix<S>>| -> [Matrix<S>; 3] { v.try_into().ok().expect("three maps") };
    Ok(BggDerived { top: v3(top), bottom: v3(bottom), connectors: conn, derived: [d0, d1, d2], report })
}
