//! Differential operators, integrals and vertex jets of broken fields.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use alfeld_linalg::Scalar;

use crate::error::{CoreError, Result};
use crate::field::{BrokenField, Ctx, Shape};
use crate::poly::{self, monomials, Poly};

/// The three Cartesian partial derivatives of one subtet polynomial.
pub fn partials<S: Scalar>(ctx: &Ctx<S>, s: usize, c: &[S], deg: usize) -> [Vec<S>; 3] {
    if deg == 0 {
        return std::array::from_fn(|_| vec![S::zero()]);
    }
    let lo = monomials(4, deg - 1);
    let raise = lo.raise();
    let g = &ctx.grads[s];
    let mut out: [Vec<S>; 3] = std::array::from_fn(|_| vec![S::zero(); lo.len()]);
    for (b, (e, r)) in lo.exps.iter().zip(raise).enumerate() {
        for j in 0..4 {
            let v = &c[r[j] as usize];
            if v.is_zero() {
                continue;
            }
            let dv = v.mul(ctx.int(e[j] as usize + 1));
            for k in 0..3 {
                if !g[j][k].is_zero() {
                    out[k][b].add_mul_assign(&dv, &g[j][k]);
                }
            }
        }
    }
    out
}

fn out_deg(deg: usize) -> usize {
    deg.saturating_sub(1)
}

/// Gradient: scalar to vector, vector to matrix with `(grad v)_ij = d_j v_i`.
pub fn grad<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>) -> Result<BrokenField<S>> {
    let shape = match f.shape {
        Shape::Scalar => Shape::Vector,
        Shape::Vector => Shape::Matrix,
        s => return Err(CoreError::Shape(format!("grad of {s:?}"))),
    };
    let mut out = BrokenField::zeros(shape, out_deg(f.deg));
    for s in 0..4 {
        for i in 0..f.ncomp() {
            let d = partials(ctx, s, f.comp(s, i), f.deg);
            for (k, dk) in d.into_iter().enumerate() {
                out.comp_mut(s, 3 * i + k).clone_from_slice(&dk);
            }
        }
    }
    Ok(out)
}

/// Curl of a vector field, or row-wise curl of a matrix field.
pub fn curl<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>) -> Result<BrokenField<S>> {
    let f = f.to_matrix();
    let rows = match f.shape {
        Shape::Vector => 1,
        Shape::Matrix => 3,
        s => return Err(CoreError::Shape(format!("curl of {s:?}"))),
    };
    let mut out = BrokenField::zeros(f.shape, out_deg(f.deg));
    for s in 0..4 {
        for r in 0..rows {
            let d: Vec<[Vec<S>; 3]> =
                (0..3).map(|j| partials(ctx, s, f.comp(s, 3 * r + j), f.deg)).collect();
            // (curl v)_0 = d1 v2 - d2 v1, etc.
            for i in 0..3 {
                let (a, b) = ((i + 1) % 3, (i + 2) % 3);
                let v: Vec<S> = d[b][a].iter().zip(&d[a][b]).map(|(x, y)| x.sub(y)).collect();
                out.comp_mut(s, 3 * r + i).clone_from_slice(&v);
            }
        }
    }
    Ok(out)
}

/// Divergence of a vector field, or row-wise divergence of a matrix field.
pub fn div<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>) -> Result<BrokenField<S>> {
    let f = f.to_matrix();
    let (rows, shape) = match f.shape {
        Shape::Vector => (1, Shape::Scalar),
        Shape::Matrix => (3, Shape::Vector),
        s => return Err(CoreError::Shape(format!("div of {s:?}"))),
    };
    let mut out = BrokenField::zeros(shape, out_deg(f.deg));
    for s in 0..4 {
        for r in 0..rows {
            let mut acc = vec![S::zero(); out.nm()];
            for j in 0..3 {
                let d = partials(ctx, s, f.comp(s, 3 * r + j), f.deg);
                for (a, x) in acc.iter_mut().zip(&d[j]) {
                    a.add_assign(x);
                }
            }
            out.comp_mut(s, r).clone_from_slice(&acc);
        }
    }
    Ok(out)
}

/// Symmetric gradient, in symmetric storage.
pub fn eps<S: Scalar>(ctx: &Ctx<S>, v: &BrokenField<S>) -> Result<BrokenField<S>> {
    if v.shape != Shape::Vector {
        return Err(CoreError::Shape(format!("eps of {:?}", v.shape)));
    }
    Ok(grad(ctx, v)?.sym())
}

/// `inc u = curl (curl u)'`.
pub fn inc<S: Scalar>(ctx: &Ctx<S>, u: &BrokenField<S>) -> Result<BrokenField<S>> {
    if !matches!(u.shape, Shape::Sym | Shape::Matrix) {
        return Err(CoreError::Shape(format!("inc of {:?}", u.shape)));
    }
    curl(ctx, &curl(ctx, u)?.transpose())
}

/// Integral over the parent tetrahedron of a scalar field.
pub fn integrate<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>) -> S {
    assert_eq!(f.shape, Shape::Scalar);
    let w = ctx.weights(4, f.deg);
    let mut acc = S::zero();
    for s in 0..4 {
        let m = crate::field::dot(&w, f.comp(s, 0));
        acc.add_mul_assign(&m, &ctx.vols[s]);
    }
    acc
}

/// Integral of every component.
pub fn integrate_components<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>) -> Vec<S> {
    (0..f.ncomp()).map(|c| integrate(ctx, &f.component(c))).collect()
}

/// Index table for products of monomials: `table[a * n_b + b]` is the index
/// of `alpha_a + beta_b` in degree `da + db`.
pub fn product_table(nv: usize, da: usize, db: usize) -> Arc<Vec<u32>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize, usize), Arc<Vec<u32>>>>> =
        OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&(nv, da, db)) {
        return t.clone();
    }
    let (ta, tb, tc) = (monomials(nv, da), monomials(nv, db), monomials(nv, da + db));
    let mut out = Vec::with_capacity(ta.len() * tb.len());
    for ea in &ta.exps {
        for eb in &tb.exps {
            let mut e = [0u8; 4];
            for k in 0..nv {
                e[k] = ea[k] + eb[k];
            }
            out.push(tc.index(&e) as u32);
        }
    }
    let t = Arc::new(out);
    cache.lock().unwrap().insert((nv, da, db), t.clone());
    t
}

/// Row vector of the functional `f -> int_T f : kappa` on fields of shape
/// `kappa.shape` and degree `deg`, in broken coefficient layout.
pub fn moment_row<S: Scalar>(ctx: &Ctx<S>, kappa: &BrokenField<S>, deg: usize) -> Vec<S> {
    let nm = poly::dim(4, deg);
    let nk = kappa.nm();
    let table = product_table(4, kappa.deg, deg);
    let w = ctx.weights(4, deg + kappa.deg);
    let nc = kappa.ncomp();
    let mut row = vec![S::zero(); 4 * nc * nm];
    for s in 0..4 {
        for c in 0..nc {
            let kc = kappa.comp(s, c);
            let o = (s * nc + c) * nm;
            let out = &mut row[o..o + nm];
            for b in 0..nk {
                if kc[b].is_zero() {
                    continue;
                }
                let kv = kc[b].mul(&ctx.vols[s]);
                let t = &table[b * nm..(b + 1) * nm];
                for a in 0..nm {
                    out[a].add_mul_assign(&kv, &w[t[a] as usize]);
                }
            }
        }
    }
    // symmetric storage pairs off-diagonal entries twice in M : N
    if kappa.shape == Shape::Sym {
        let two = S::from_i64(2);
        for s in 0..4 {
            for c in 3..6 {
                let o = (s * 6 + c) * nm;
                for x in &mut row[o..o + nm] {
                    *x = x.mul(&two);
                }
            }
        }
    }
    row
}

/// `int_T f : g`.
pub fn pairing<S: Scalar>(ctx: &Ctx<S>, f: &BrokenField<S>, g: &BrokenField<S>) -> S {
    assert_eq!(f.shape, g.shape);
    let row = moment_row(ctx, g, f.deg);
    crate::field::dot(&row, &f.data)
}

/// Mean of `p q` over a simplex with `nv` vertices, as a row acting on the
/// coefficients of `p` (degree `deg`).
pub fn simplex_moment_row<S: Scalar>(ctx: &Ctx<S>, q: &Poly<S>, deg: usize) -> Vec<S> {
    let nv = q.nv;
    let n = poly::dim(nv, deg);
    let table = product_table(nv, q.deg, deg);
    let w = ctx.weights(nv, deg + q.deg);
    let mut row = vec![S::zero(); n];
    for (b, qb) in q.c.iter().enumerate() {
        if qb.is_zero() {
            continue;
        }
        let t = &table[b * n..(b + 1) * n];
        for a in 0..n {
            row[a].add_mul_assign(qb, &w[t[a] as usize]);
        }
    }
    row
}

/// Sorted Cartesian multi-indices of order `k`, as lists of axes.
pub fn cartesian_indices(k: usize) -> Vec<Vec<usize>> {
    fn rec(k: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..3 {
            cur.push(a);
            rec(k, a, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, 0, &mut Vec::new(), &mut out);
    out
}

/// All Cartesian derivatives of exact order `k` of a subtet polynomial at
/// local vertex `m`, in the order of [`cartesian_indices`].
pub fn vertex_jet<S: Scalar>(
    ctx: &Ctx<S>,
    s: usize,
    c: &[S],
    deg: usize,
    m: usize,
    k: usize,
) -> Vec<S> {
    let idx = cartesian_indices(k);
    if k > deg {
        return vec![S::zero(); idx.len()];
    }
    let t = monomials(4, deg);
    // derivative d^beta/d lambda^beta at vertex m for a sequence of
    // barycentric variables j_1..j_k
    let lam = |seq: &[usize]| -> S {
        let mut e = [0u8; 4];
        for &j in seq {
            e[j] += 1;
        }
        let mut f = S::one();
        for j in 0..4 {
            if j == m {
                continue;
            }
            for q in 1..=e[j] as usize {
                f = f.mul(ctx.int(q));
            }
        }
        let base = deg - k;
        for q in base + 1..=base + e[m] as usize {
            f = f.mul(ctx.int(q));
        }
        e[m] += base as u8;
        c[t.index(&e)].mul(&f)
    };
    let g = &ctx.grads[s];
    let nseq = 4usize.pow(k as u32);
    let mut lam_vals = Vec::with_capacity(nseq);
    let mut seqs = Vec::with_capacity(nseq);
    for code in 0..nseq {
        let seq: Vec<usize> = (0..k).map(|i| (code >> (2 * i)) & 3).collect();
        lam_vals.push(lam(&seq));
        seqs.push(seq);
    }
    idx.iter()
        .map(|axes| {
            let mut acc = S::zero();
            for (seq, v) in seqs.iter().zip(&lam_vals) {
                if v.is_zero() {
                    continue;
                }
                let mut f = v.clone();
                for (j, a) in seq.iter().zip(axes) {
                    f = f.mul(&g[*j][*a]);
                }
                acc = acc.add(&f);
            }
            acc
        })
        .collect()
}

/// Value of a subtet polynomial at local vertex `m`.
pub fn vertex_value<S: Scalar>(c: &[S], deg: usize, m: usize) -> S {
    let mut e = [0u8; 4];
    e[m] = deg as u8;
    c[monomials(4, deg).index(&e)].clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::GlobalField;
    use crate::geometry::{AlfeldSplit, Tetrahedron};
    use alfeld_linalg::{q, Rational};

    fn ctx() -> Ctx<Rational> {
        Ctx::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap()
    }

    fn linear_x(ctx: &Ctx<Rational>) -> BrokenField<Rational> {
        // x, y, z in parent barycentrics of the canonical tet
        let vs = &ctx.split.parent.vertices;
        let comps = (0..3)
            .map(|k| Poly::linear(&[vs[0][k].clone(), vs[1][k].clone(), vs[2][k].clone(), vs[3][k].clone()]))
            .collect();
        GlobalField { shape: Shape::Vector, deg: 1, comps }.embed(ctx)
    }

    #[test]
    fn div_of_position_is_three() {
        let c = ctx();
        let x = linear_x(&c);
        let d = div(&c, &x).unwrap();
        for s in 0..4 {
            assert_eq!(d.comp(s, 0), &[q(3, 1)]);
        }
        assert!(curl(&c, &x).unwrap().is_zero());
    }

    #[test]
    fn volume_integral() {
        let c = ctx();
        let one = BrokenField::from_data(Shape::Scalar, 0, vec![q(1, 1); 4]);
        assert_eq!(integrate(&c, &one), q(1, 1));
    }

    #[test]
    fn jets_of_quadratic() {
        let c = ctx();
        let x = linear_x(&c);
        // f = x * y has Hessian entry d_x d_y = 1
        let f = x.component(0).mul_scalar_field(&x.component(1));
        for s in 0..4 {
            for m in 0..4 {
                let h = vertex_jet(&c, s, f.comp(s, 0), 2, m, 2);
                assert_eq!(h, vec![q(0, 1), q(1, 1), q(0, 1), q(0, 1), q(0, 1), q(0, 1)]);
            }
        }
    }
}
