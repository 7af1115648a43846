use alfeld_linalg::*;
use proptest::prelude::*;

fn qm(rows: &[&[i64]]) -> ExactMatrix {
    let c = rows[0].len();
    Matrix::from_rows(rows.iter().map(|r| r.iter().map(|&x| q(x, 1)).collect()).collect(), c)
}

#[test]
fn small_ranks() {
    assert_eq!(rank(&ExactMatrix::identity(3)), 3);
    assert_eq!(rank_exact(&ExactMatrix::identity(3)), 3);
    let m = qm(&[&[1, 2], &[2, 4]]);
    assert_eq!(rank(&m), 1);
    assert_eq!(rank_exact(&m), 1);
    for p in PRIMES {
        assert_eq!(modular_rank(&m, p).unwrap(), 1);
        assert_eq!(modular_rank(&ExactMatrix::identity(5), p).unwrap(), 5);
    }
}

#[test]
fn small_nullspaces() {
    let z = ExactMatrix::zeros(2, 3);
    assert_eq!(nullspace_basis(&z), ExactMatrix::identity(3));
    let n = nullspace_basis(&qm(&[&[1, 1]]));
    assert_eq!(n.cols(), 1);
    assert_eq!(n.get(0, 0), &(-n.get(1, 0).clone()));
}

#[test]
fn small_solve() {
    let m = qm(&[&[2, 0], &[0, 4]]);
    let x = solve_exact(&m, &[q(1, 1), q(1, 1)]).unwrap();
    assert_eq!(x, vec![q(1, 2), q(1, 4)]);
    let b = vec![q(3, 7), q(-1, 2)];
    assert_eq!(solve_exact(&ExactMatrix::identity(2), &b).unwrap(), b);
    let sing = qm(&[&[1, 2], &[2, 4]]);
    assert!(matches!(solve_exact(&sing, &b), Err(LinalgError::Singular { rank: 1, size: 2 })));
}

#[test]
fn prime_field_arithmetic() {
    let a = Fp0::from_i64(-5);
    let b = Fp0::from_rational(&q(3, 7)).unwrap();
    assert_eq!(a.add(&Fp0::from_i64(5)), Fp0::zero());
    assert_eq!(b.mul(&Fp0::from_i64(7)), Fp0::from_i64(3));
    assert_eq!(a.inv().unwrap().mul(&a), Fp0::one());
    assert_eq!(Fp0::from_i64(-1).value(), PRIMES[0] - 1);
    for p in PRIMES {
        assert!(p > 1u64 << 60);
        assert!(is_probable_prime(p));
    }
    assert!(!is_probable_prime(PRIMES[0] - 2));
}

#[test]
fn modular_rank_rejects_composites_and_bad_denominators() {
    assert!(matches!(modular_rank(&ExactMatrix::identity(2), 15), Err(LinalgError::BadModulus(15))));
    let m = Matrix::from_rows(vec![vec![q(1, 7)]], 1);
    assert!(matches!(modular_rank(&m, 7), Err(LinalgError::DenominatorVanishes { prime: 7 })));
}

#[test]
fn parse_forms() {
    assert_eq!(parse_rational("3/7").unwrap(), q(3, 7));
    assert_eq!(parse_rational("-0.25").unwrap(), q(-1, 4));
    assert_eq!(parse_rational(" 5 ").unwrap(), q(5, 1));
    assert!(parse_rational("1/0").is_err());
    assert!(parse_rational("abc").is_err());
    assert_eq!(rational_to_string(&q(-6, 4)), "-3/2");
}

#[test]
fn sequential_and_parallel_paths_agree() {
    let m = Matrix::<Fp1>::from_fn(90, 70, |i, j| Fp1::from_i64(((i * 31 + j * 17) % 11) as i64 - 5));
    par::set_enabled(false);
    let a = nullspace_basis(&m);
    par::set_enabled(true);
    let b = nullspace_basis(&m);
    assert_eq!(a, b);
}

fn arb_matrix() -> impl Strategy<Value = ExactMatrix> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
        proptest::collection::vec((-3i64..4, 1i64..4), r * c).prop_map(move |v| {
            // Low-rank structure is common: zero out a random-looking subset.
            Matrix::from_vec(r, c, v.into_iter().map(|(n, d)| q(n, d)).collect())
        })
    })
}

fn reduce<S: Scalar>(m: &ExactMatrix) -> Matrix<S> {
    m.reduce::<S>().unwrap()
}

proptest! {
    #[test]
    fn rank_nullity(m in arb_matrix()) {
        let n = nullspace_basis(&m);
        prop_assert_eq!(rank(&m) + n.cols(), m.cols());
        prop_assert!(m.mul(&n).unwrap().is_zero());
    }

    #[test]
    fn bareiss_matches_elimination(m in arb_matrix()) {
        prop_assert_eq!(rank_exact(&m), rank(&m));
        let mut a = m.clone();
        let mut b = m.clone();
        let pa = fraction_free_rref(&mut a, true);
        let pb = gauss_jordan(&mut b, true);
        prop_assert_eq!(pa, pb);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn modular_rank_bounded(m in arb_matrix()) {
        let r = rank(&m);
        let agree = PRIMES[..3].iter().filter(|&&p| {
            let mr = modular_rank(&m, p).unwrap();
            assert!(mr <= r);
            mr == r
        }).count();
        prop_assert!(agree >= 2);
        prop_assert_eq!(rank(&reduce::<Fp2>(&m)), r);
    }

    #[test]
    fn solve_reproduces_rhs(m in arb_matrix(), seed in 0i64..1000) {
        let n = m.rows().min(m.cols());
        let sq = m.select_rows(&(0..n).collect::<Vec<_>>()).select_columns(&(0..n).collect::<Vec<_>>());
        let b: Vec<Rational> = (0..n as i64).map(|i| q((i * 7 + seed) % 5 - 2, 1)).collect();
        match solve_exact(&sq, &b) {
            Ok(x) => prop_assert_eq!(sq.mul_vec(&x).unwrap(), b),
            Err(LinalgError::Singular { .. }) => prop_assert!(rank(&sq) < n),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        }
    }

    #[test]
    fn independent_columns_span(m in arb_matrix()) {
        let idx = independent_columns(&m);
        prop_assert_eq!(idx.len(), rank(&m));
        prop_assert_eq!(rank(&m.select_columns(&idx)), idx.len());
        prop_assert_eq!(independent_rows(&m).len(), idx.len());
    }
}
