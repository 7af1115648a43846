use alfeld_core::calculus::{curl, div, eps, grad, inc, integrate};
use alfeld_core::field::{Ctx, Shape};
use alfeld_core::geometry::{AlfeldSplit, Tetrahedron};
use alfeld_core::identities::{apply_algebraic, AlgebraicMap};
use alfeld_core::linalg::{q, Fp0, Rational};
use alfeld_core::mesh::{cartesian_exponents, cartesian_field};
use alfeld_core::verify::random_global;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fact(n: usize) -> BigInt {
    (1..=n).fold(BigInt::from(1), |a, k| a * k)
}

/// Integral of x^a y^b z^c over {x + y/2 + z/3 <= 1, x,y,z >= 0}, by the
/// Dirichlet formula after scaling y by 2 and z by 3.
fn monomial_integral(a: usize, b: usize, c: usize) -> Rational {
    let num = fact(a) * fact(b) * fact(c) * BigInt::from(2).pow(b as u32 + 1) * BigInt::from(3).pow(c as u32 + 1);
    Rational::new(num, fact(a + b + c + 3))
}

fn split_at(w: [i64; 4]) -> AlfeldSplit {
    let s: i64 = w.iter().sum();
    AlfeldSplit::with_point(Tetrahedron::canonical(), &w.map(|x| q(x, s))).unwrap()
}

fn unit(deg: usize, idx: usize) -> Vec<i64> {
    let mut c = vec![0; cartesian_exponents(deg).len()];
    c[idx] = 1;
    c
}

#[test]
fn quadrature_matches_closed_form() {
    let ctx = Ctx::<Rational>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    for deg in 0..=4 {
        for (i, &[a, b, c]) in cartesian_exponents(deg).iter().enumerate() {
            if a + b + c != deg {
                continue;
            }
            let f = cartesian_field(&ctx, Shape::Scalar, deg, &unit(deg, i)).unwrap();
            assert_eq!(integrate(&ctx, &f), monomial_integral(a, b, c), "x^{a} y^{b} z^{c}");
        }
    }
}

#[test]
fn volume_of_canonical_tet() {
    let t = Tetrahedron::canonical();
    assert_eq!(t.volume(), q(1, 1));
    let s = AlfeldSplit::new(t);
    assert_eq!((0..4).map(|i| s.sub_volume(i).clone()).sum::<Rational>(), q(1, 1));
}

#[test]
fn gradient_of_coordinate_is_constant() {
    let ctx = Ctx::<Rational>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    // x*y: grad = (y, x, 0)
    let exps = cartesian_exponents(2);
    let ixy = exps.iter().position(|e| *e == [1, 1, 0]).unwrap();
    let f = cartesian_field(&ctx, Shape::Scalar, 2, &unit(2, ixy)).unwrap();
    let g = grad(&ctx, &f).unwrap();
    let e1 = cartesian_exponents(1);
    let ix = e1.iter().position(|e| *e == [1, 0, 0]).unwrap();
    let iy = e1.iter().position(|e| *e == [0, 1, 0]).unwrap();
    let mut want = vec![0; 3 * e1.len()];
    want[iy] = 1;
    want[e1.len() + ix] = 1;
    let w = cartesian_field(&ctx, Shape::Vector, 1, &want).unwrap();
    assert!(g.sub(&w).is_zero());
}

#[test]
fn mskw_of_first_axis() {
    let ctx = Ctx::<Rational>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    let mut c = vec![0; 3];
    c[0] = 1;
    let v = cartesian_field(&ctx, Shape::Vector, 0, &c).unwrap();
    let m = apply_algebraic(AlgebraicMap::Mskw, &v).unwrap();
    let want = [0, 0, 0, 0, 0, -1, 0, 1, 0];
    let w = cartesian_field(&ctx, Shape::Matrix, 0, &want).unwrap();
    assert!(m.sub(&w).is_zero());
}

#[test]
fn xi_of_identity() {
    let ctx = Ctx::<Rational>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    let id = cartesian_field(&ctx, Shape::Matrix, 0, &[1, 0, 0, 0, 1, 0, 0, 0, 1]).unwrap();
    let x = apply_algebraic(AlgebraicMap::Xi, &id).unwrap();
    assert!(x.add(&id.scale(&q(2, 1))).is_zero());
    assert!(apply_algebraic(AlgebraicMap::XiInv, &x).unwrap().sub(&id).is_zero());
}

#[test]
fn shape_errors() {
    let ctx = Ctx::<Fp0>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let s = random_global(&ctx, Shape::Scalar, 2, &mut rng);
    assert!(apply_algebraic(AlgebraicMap::Xi, &s).is_err());
    assert!(curl(&ctx, &s).is_err());
    let v = random_global(&ctx, Shape::Vector, 2, &mut rng);
    assert!(inc(&ctx, &v).is_err());
    assert!(eps(&ctx, &s).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn quadrature_independent_of_split(w in prop::array::uniform4(1i64..6), idx in 0usize..10) {
        let ctx = Ctx::<Rational>::new(&split_at(w)).unwrap();
        let exps = cartesian_exponents(3);
        let i = 10 + idx; // a degree-3 monomial
        let [a, b, c] = exps[i];
        let f = cartesian_field(&ctx, Shape::Scalar, 3, &unit(3, i)).unwrap();
        prop_assert_eq!(integrate(&ctx, &f), monomial_integral(a, b, c));
    }

    #[test]
    fn sub_volumes_sum(w in prop::array::uniform4(1i64..9)) {
        let s = split_at(w);
        let total: Rational = (0..4).map(|i| s.sub_volume(i).clone()).sum();
        prop_assert_eq!(total, s.parent.volume());
        let back = s.parent.barycentric(&s.z);
        prop_assert_eq!(&back, &s.z_bary);
    }

    #[test]
    fn complex_property(seed in any::<u64>(), deg in 2usize..6, w in prop::array::uniform4(1i64..5)) {
        let ctx = Ctx::<Fp0>::new(&split_at(w)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_global(&ctx, Shape::Scalar, deg, &mut rng);
        prop_assert!(curl(&ctx, &grad(&ctx, &f).unwrap()).unwrap().is_zero());
        let v = random_global(&ctx, Shape::Vector, deg, &mut rng);
        prop_assert!(div(&ctx, &curl(&ctx, &v).unwrap()).unwrap().is_zero());
    }

    #[test]
    fn elasticity_complex_property(seed in any::<u64>(), deg in 2usize..5) {
        let ctx = Ctx::<Fp0>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_global(&ctx, Shape::Vector, deg, &mut rng);
        prop_assert!(inc(&ctx, &eps(&ctx, &v).unwrap()).unwrap().is_zero());
        let u = random_global(&ctx, Shape::Matrix, deg, &mut rng).sym();
        let iu = inc(&ctx, &u).unwrap();
        prop_assert!(div(&ctx, &iu).unwrap().is_zero());
        let m = iu.to_matrix();
        prop_assert!(m.sub(&m.transpose()).is_zero());
    }

    #[test]
    fn algebraic_inverses(seed in any::<u64>(), deg in 0usize..4) {
        let ctx = Ctx::<Fp0>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = random_global(&ctx, Shape::Matrix, deg, &mut rng);
        let back = apply_algebraic(AlgebraicMap::XiInv, &apply_algebraic(AlgebraicMap::Xi, &m).unwrap()).unwrap();
        prop_assert!(back.sub(&m).is_zero());
        let v = random_global(&ctx, Shape::Vector, deg, &mut rng);
        let vv = apply_algebraic(AlgebraicMap::Vskw, &apply_algebraic(AlgebraicMap::Mskw, &v).unwrap()).unwrap();
        prop_assert!(vv.sub(&v).is_zero());
        let t = m.transpose().transpose();
        prop_assert!(t.sub(&m).is_zero());
    }
}
