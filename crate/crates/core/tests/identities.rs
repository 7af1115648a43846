use alfeld_core::field::Ctx;
use alfeld_core::geometry::{AlfeldSplit, Tetrahedron};
use alfeld_core::identities::{bgg_derive, face_exactness_check, face_exactness_spaces, verify_identity, Identity, TRIALS};
use alfeld_core::linalg::{rank, Fp0, Matrix, Rational};
use alfeld_core::spaces::Forge;

fn ctx() -> Ctx<Fp0> {
    Ctx::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap()
}

#[test]
fn identity_ids_round_trip() {
    for id in Identity::ALL {
        assert_eq!(Identity::parse(id.id()).unwrap(), id);
    }
    assert!(Identity::parse("nope").is_err());
}

#[test]
fn pointwise_and_face_identities() {
    let c = ctx();
    for id in Identity::ALL {
        let rep = verify_identity(&c, id, 11).unwrap();
        let n = if id.on_faces() { 4 * TRIALS } else { TRIALS } as i64;
        assert_eq!(rep.witnesses["inputs"], n);
        match id {
            // both hold only with a sign change, on every input
            Identity::TraceRotF | Identity::FaceIbpFn => {
                assert!(!rep.passed(), "{}", id.id());
                assert_eq!(rep.witnesses["passed with opposite sign"], n, "{}", id.id());
            }
            _ => assert!(rep.passed(), "{} {}", id.id(), rep.note),
        }
    }
}

#[test]
fn identities_hold_in_exact_arithmetic() {
    let c = Ctx::<Rational>::new(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    for id in [Identity::ALL[0], Identity::ALL[1]] {
        assert!(verify_identity(&c, id, 3).unwrap().passed());
    }
}

#[test]
fn face_exactness() {
    let c = ctx();
    let empty = face_exactness_check(&c, 0, 4, 1).unwrap();
    assert!(empty.passed());
    assert_eq!(empty.witnesses["hypothesis dim"], 0);
    for (r, d) in [(5, 2), (6, 6)] {
        for face in 0..4 {
            let rep = face_exactness_check(&c, face, r, 1).unwrap();
            assert!(rep.passed());
            assert_eq!(rep.witnesses["hypothesis dim"], d);
            assert_eq!(rep.witnesses["conclusion dim"], d);
        }
    }
}

#[test]
fn conclusion_lies_in_hypothesis() {
    let c = ctx();
    let sp = face_exactness_spaces(&c, 0, 6).unwrap();
    let flat = |p: &[alfeld_core::poly::Poly<Fp0>; 3]| p.iter().flat_map(|q| q.c.clone()).collect::<Vec<_>>();
    let h: Vec<Vec<Fp0>> = sp.hypothesis.iter().map(flat).collect();
    let both: Vec<Vec<Fp0>> = h.iter().cloned().chain(sp.conclusion.iter().map(flat)).collect();
    let n = h[0].len();
    assert_eq!(rank(&Matrix::from_columns(&both, n)), rank(&Matrix::from_columns(&h, n)));
}

#[test]
fn bgg_derivation() {
    let forge = Forge::<Fp0>::from_split(&AlfeldSplit::new(Tetrahedron::canonical())).unwrap();
    for ring in [false, true] {
        let d = bgg_derive(&forge, 4, ring).unwrap();
        let rep = &d.report;
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.witnesses["s1 rows"], rep.witnesses["s1 rank"]);
        assert_eq!(rep.witnesses["s1 cols"], rep.witnesses["s1 rank"]);
    }
}
