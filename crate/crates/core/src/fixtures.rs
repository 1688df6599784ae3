//! Sample triangulations used by the test suite, the docs, and the CLI
//! examples. All data is validated on construction.

use crate::tri::{FacePairing, Perm4, Triangulation};

fn pairings(raw: &[(usize, u8, usize, u8, Perm4)]) -> Vec<FacePairing> {
    let mut out = Vec::new();
    for &(tet, face, to_tet, to_face, perm) in raw {
        out.push(FacePairing { tet, face, to_tet, to_face, perm });
        let mut inv = [0u8; 4];
        for i in 0..4 {
            inv[perm[i] as usize] = i as u8;
        }
        out.push(FacePairing { tet: to_tet, face: to_face, to_tet: tet, to_face: face, perm: inv });
    }
    out
}

/// A single truncated tetrahedron, nothing glued: big boundary a 4-holed
/// sphere, small boundary four discs.
pub fn single_tetrahedron() -> Triangulation {
    Triangulation::new("tetrahedron", 1, Vec::new()).expect("valid fixture")
}

/// The figure-eight knot complement: two ideal tetrahedra, one torus cusp,
/// two edge classes of valence six.
pub fn figure_eight() -> Triangulation {
    let raw = [
        (0, 0, 1, 0, [0, 1, 3, 2]),
        (0, 1, 1, 2, [1, 2, 3, 0]),
        (0, 2, 1, 1, [2, 3, 1, 0]),
        (0, 3, 1, 3, [2, 1, 0, 3]),
    ];
    Triangulation::new("figure-eight", 2, pairings(&raw)).expect("valid fixture")
}

/// The 5_2 knot complement: three ideal tetrahedra, one torus cusp. The
/// complete structure makes all three tetrahedra isometric, with shapes in
/// the cubic field of discriminant -23; H_1 of the double cyclic cover has
/// 7-torsion (knot determinant 7), which pins this manifold down among the
/// census manifolds of equal volume.
pub fn five_two() -> Triangulation {
    let raw = [
        (0, 0, 1, 0, [0, 3, 2, 1]),
        (0, 1, 1, 1, [3, 1, 2, 0]),
        (0, 2, 2, 2, [0, 3, 2, 1]),
        (0, 3, 2, 3, [1, 0, 2, 3]),
        (1, 2, 2, 1, [0, 2, 1, 3]),
        (1, 3, 2, 0, [1, 2, 3, 0]),
    ];
    Triangulation::new("5_2", 3, pairings(&raw)).expect("valid fixture")
}

/// Two tetrahedra glued along two face pairs. The boundary has a big part of
/// four hexagons and a small part of two discs and one annulus; every edge
/// class is an open chain.
pub fn annulus_fixture() -> Triangulation {
    let raw = [(0, 0, 1, 0, [0, 2, 1, 3]), (0, 2, 1, 2, [1, 0, 2, 3])];
    Triangulation::new("two-discs-one-annulus", 2, pairings(&raw)).expect("valid fixture")
}

/// Two tetrahedra glued along all four faces into a pillow-like closed
/// pseudomanifold whose vertex links include a sphere and a torus.
pub fn pillow_sphere_cusp() -> Triangulation {
    let raw = [
        (0, 0, 1, 0, [0, 2, 1, 3]),
        (0, 1, 1, 1, [2, 1, 0, 3]),
        (0, 2, 1, 2, [1, 0, 2, 3]),
        (0, 3, 1, 3, [1, 0, 2, 3]),
    ];
    Triangulation::new("pillow", 2, pairings(&raw)).expect("valid fixture")
}

/// All named fixtures, for data-driven tests.
pub fn all() -> Vec<Triangulation> {
    vec![
        single_tetrahedron(),
        figure_eight(),
        five_two(),
        annulus_fixture(),
        pillow_sphere_cusp(),
    ]
}
