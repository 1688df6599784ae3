//! Gluing symplectics for triangulated framed 3-manifolds.
//!
//! From an ideal triangulation by truncated tetrahedra this crate computes
//! the canonical branched double cover of the boundary, its odd and twisted
//! homology with the intersection form, the Neumann-Zagier gluing system with
//! exact verification of its symplectic identities, framed flat PGL(2,C)
//! connections and the non-abelianization map from twisted GL(1,C)
//! connections, and numerical hyperbolic shapes and volumes.
//!
//! The pipeline runs in stages: `M` (disjoint truncated tetrahedra), `M0`
//! (face interiors glued, defect annuli along the new edges), and `Mprime`
//! (edges filled in). Integer lattice work is exact throughout; only the
//! shape solver and connection arithmetic are floating point.

pub mod zlat;
pub mod tri;
pub mod surface;
pub mod oddhom;
pub mod pathalg;
pub mod gluesys;
pub mod moduli;
pub mod hypgeo;
pub mod fixtures;
pub mod report;
pub mod cli;
