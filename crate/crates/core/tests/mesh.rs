use std::collections::BTreeSet;

use alfeld_core::linalg::Fp0;
use alfeld_core::mesh::{check_global, global_formula, MeshComplex, MeshForge, BUILTIN, MAX_ELEMENTS};
use alfeld_core::verify::Chain;
use alfeld_core::CoreError;
use proptest::prelude::*;

/// Edge and face counts straight from the element list.
fn enumerate(m: &MeshComplex) -> [usize; 4] {
    let mut e = BTreeSet::new();
    let mut f = BTreeSet::new();
    for t in &m.tets {
        for a in 0..4 {
            for b in a + 1..4 {
                let mut p = [t[a], t[b]];
                p.sort();
                e.insert(p);
                for c in b + 1..4 {
                    let mut q = [t[a], t[b], t[c]];
                    q.sort();
                    f.insert(q);
                }
            }
        }
    }
    [m.vertices.len(), e.len(), f.len(), m.tets.len()]
}

#[test]
fn builtin_counts() {
    let want = [[4, 6, 4, 1], [5, 9, 7, 2], [8, 19, 18, 6]];
    for (name, w) in BUILTIN.iter().zip(want) {
        let m = MeshComplex::builtin(name).unwrap();
        assert_eq!(m.counts(), w, "{name}");
        assert_eq!(enumerate(&m), w, "{name}");
        assert_eq!(m.euler(), 1);
        assert!(m.contractible);
    }
}

#[test]
fn formula_spot_values() {
    // hand evaluation of the V closed forms at r = 5
    assert_eq!(global_formula(Chain::V, 0, 5, [5, 9, 7, 2], None), Some(97));
    assert_eq!(global_formula(Chain::V, 0, 5, [4, 6, 4, 1], None), Some(68));
    assert_eq!(global_formula(Chain::V, 3, 5, [5, 9, 7, 2], None), Some(80));
    // Z^3_{r-2} on one element at r = 4: 6*4 + (4*5*4*3 - 72)/6 = 32
    assert_eq!(global_formula(Chain::Z, 3, 4, [4, 6, 4, 1], None), Some(32));
    assert_eq!(global_formula(Chain::U, 0, 4, [4, 6, 4, 1], None), None);
}

#[test]
fn parse_and_errors() {
    let text = "# two elements\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 2 0\nvertex 0 0 3\nvertex 0 0 -3\n\
                tet 0 1 2 3\ntet 0 1 2 4 split 1/5 1/5 1/5 2/5\n";
    let m = MeshComplex::parse("t", text).unwrap();
    assert_eq!(m.counts(), [5, 9, 7, 2]);
    assert_eq!(m.split_points[1][3], alfeld_core::linalg::q(2, 5));

    let bad = [
        "vertex 0 0\n",
        "vertex 0 0 0\nfoo 1\n",
        "vertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nvertex 0 0 1\ntet 0 1 2 7\n",
        "vertex 0 0 0\nvertex 1 0 0\nvertex 2 0 0\nvertex 0 0 1\ntet 0 1 2 3\n",
        "vertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nvertex 0 0 1\ntet 0 1 2 3 split 1 0 0 0\n",
        "vertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nvertex 0 0 1\ntet 0 1 2 3\ntet 0 1 2 3\n",
        "",
    ];
    for b in bad {
        assert!(MeshComplex::parse("bad", b).is_err(), "{b:?}");
    }
    assert!(matches!(MeshComplex::load("no-such-mesh"), Err(CoreError::Mesh(_))));
}

#[test]
fn element_cap() {
    let mut text = String::new();
    for k in 0..=MAX_ELEMENTS as i64 + 1 {
        text += &format!("vertex {k} 0 0\nvertex {k} 1 0\nvertex {k} 0 1\nvertex {k}/1 1 1\n");
    }
    for k in 0..=MAX_ELEMENTS {
        let b = 4 * k;
        text += &format!("tet {} {} {} {}\n", b, b + 1, b + 2, b + 4);
    }
    assert!(MeshComplex::parse("big", &text).is_err());
}

#[test]
fn load_from_file() {
    let p = std::env::temp_dir().join(format!("alfeld-mesh-{}.txt", std::process::id()));
    std::fs::write(&p, "vertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nvertex 0 0 1\ntet 0 1 2 3\n").unwrap();
    let m = MeshComplex::load(p.to_str().unwrap()).unwrap();
    std::fs::remove_file(&p).ok();
    assert_eq!(m.counts(), [4, 6, 4, 1]);
}

#[test]
fn global_de_rham_two_tets() {
    let mf = MeshForge::<Fp0>::new(MeshComplex::builtin("two-tets").unwrap()).unwrap();
    let rep = check_global(&mf, Chain::V, 5).unwrap();
    assert!(rep.passed(), "{rep:?}");
    assert_eq!(rep.witnesses["dim 0"], 97);
    assert_eq!(rep.witnesses["dim 3"], 80);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// The alternating sum of the de Rham closed forms is the Euler
    /// characteristic of the counts.
    #[test]
    fn alternating_sum_is_euler(c in prop::array::uniform4(1usize..40), r in 4i64..9) {
        let euler = c[0] as i64 - c[1] as i64 + c[2] as i64 - c[3] as i64;
        for chain in [Chain::V, Chain::Z] {
            let s: i64 = (0..4).map(|k| {
                let d = global_formula(chain, k, r, c, None).unwrap();
                if k % 2 == 0 { d } else { -d }
            }).sum();
            prop_assert_eq!(s, euler);
        }
    }
}
