//! The gluing system: subgroups G ~ K of the twisted odd homology of the
//! defect stage, the Neumann-Zagier matrix of the injection into the
//! tetrahedron lattice, exact verification of its symplectic identities,
//! and the chain complex relating them.

use crate::oddhom::{self, OddCellular, OddhomError};
use crate::pathalg::{self, PathError, SmallPath, TwistedCycle};
use crate::surface::{build_boundary, BoundaryData, SmallPieceKind, SurfaceError};
use crate::tri::{NormalStep, Stage, Triangulation};
use crate::zlat::{self, IntMatrix};
use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum GluesysError {
    #[error(transparent)]
    Surface(#[from] SurfaceError),
    #[error(transparent)]
    Oddhom(#[from] OddhomError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error("cusp {0} is not a torus")]
    NotATorus(usize),
    #[error("verification failure: {0}")]
    Verification(String),
    #[error("internal: {0}")]
    Internal(String),
}

/// A cusp of the gluing system: a torus small component with a chosen
/// peripheral basis in normal position.
pub struct CuspData {
    /// small component id on the Mprime boundary
    pub piece: usize,
    pub alpha: SmallPath,
    pub beta: SmallPath,
    /// classes of the odd double lifts in the Sigma' cellular basis
    pub alpha_class: Vec<BigInt>,
    pub beta_class: Vec<BigInt>,
}

/// The Neumann-Zagier gluing data of a triangulation.
pub struct GluingSystem {
    pub num_tetrahedra: usize,
    pub num_cusps: usize,
    /// rows alpha_1..alpha_nc, beta_1..beta_nc, C_1..C_N over the basis
    /// gamma_1..gamma_N, gamma'_1..gamma'_N
    pub nz: IntMatrix,
    /// fiber bit per row (cut count parity)
    pub sign_bits: Vec<u8>,
    /// sign of the z-coordinate equation per row: target = (-1)^s prod z^row
    pub z_signs: Vec<u8>,
    /// defect cycle classes in the Sigma_0 cellular basis, one row per edge
    pub mu_classes: IntMatrix,
    /// generators of K: mu rows then alpha-hat/beta-hat rows, in the Sigma_0
    /// cellular basis
    pub khat_classes: IntMatrix,
    /// intersection form on the Sigma_0 cellular basis
    pub eps_sigma0: IntMatrix,
    /// q: K generators -> Sigma' basis (mu rows are zero)
    pub q_matrix: IntMatrix,
    /// intersection form on the Sigma' basis (2 J per cusp after
    /// normalization)
    pub eps_sigma_prime: IntMatrix,
    /// nontrivial invariant factors of the NZ matrix (cokernel torsion)
    pub torsion_report: Vec<BigInt>,
    pub cusps: Vec<CuspData>,
    /// ends-on-cusp multiplicity matrix: rows cusps, columns edges
    pub end_multiplicity: IntMatrix,
    /// per-cusp choice of dependent edge row to drop in square systems
    pub dropped_edge_rows: Vec<usize>,
}

fn row3_to_two_column(row3: &[[i64; 3]]) -> Vec<i64> {
    // eliminate gamma'' = -gamma - gamma' and order columns as all gammas
    // then all gamma-primes
    let n = row3.len();
    let mut out = vec![0i64; 2 * n];
    for (i, r) in row3.iter().enumerate() {
        out[i] = r[0] - r[2];
        out[n + i] = r[1] - r[2];
    }
    out
}

fn z_sign(row: &[i64], fiber: u8) -> u8 {
    let s: i64 = row.iter().sum();
    ((s.rem_euclid(2) as u8) + fiber) % 2
}

/// The standard skew matrix J_{2n} in the (all gammas, all gamma-primes)
/// column convention.
pub fn j_matrix(n: usize) -> IntMatrix {
    let mut j = IntMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = BigInt::from(1);
        j[(n + i, i)] = BigInt::from(-1);
    }
    j
}

/// Compute a peripheral basis of a torus cusp as two closed normal paths
/// whose base curves have intersection number one. User-supplied curves, if
/// any, take precedence.
pub fn compute_peripheral_basis(
    bprime: &BoundaryData,
    oddprime: &OddCellular,
    piece: usize,
    user: Option<&[Vec<NormalStep>; 2]>,
) -> Result<CuspData, GluesysError> {
    if bprime.summary.small_pieces[piece].kind != SmallPieceKind::Torus {
        return Err(GluesysError::NotATorus(piece));
    }
    let class_of = |p: &SmallPath| -> Result<Vec<BigInt>, GluesysError> {
        Ok(pathalg::h_tilde(bprime, oddprime, p)?.coeffs)
    };
    let pair = |x: &[BigInt], y: &[BigInt]| -> BigInt {
        let mut acc = BigInt::zero();
        for i in 0..x.len() {
            for j in 0..y.len() {
                acc += &x[i] * &oddprime.eps[(i, j)] * &y[j];
            }
        }
        acc
    };
    if let Some([a, b]) = user {
        let alpha = SmallPath::closed(a.clone());
        let beta = SmallPath::closed(b.clone());
        alpha.validate(bprime)?;
        beta.validate(bprime)?;
        let (ca, cb) = (class_of(&alpha)?, class_of(&beta)?);
        let p = pair(&ca, &cb);
        if p != BigInt::from(2) && p != BigInt::from(-2) {
            return Err(GluesysError::Verification(format!(
                "user peripheral curves pair to {p}, expected +-2"
            )));
        }
        // normalize the odd pairing to +2 by swapping if necessary
        if p == BigInt::from(-2) {
            return Ok(CuspData {
                piece,
                alpha: beta,
                beta: alpha,
                alpha_class: cb,
                beta_class: ca,
            });
        }
        return Ok(CuspData { piece, alpha, beta, alpha_class: ca, beta_class: cb });
    }

    // dual-graph fundamental cycles of the cusp tiling
    let tris: Vec<(usize, u8)> =
        bprime.summary.small_pieces[piece].triangles.clone();
    let in_piece: std::collections::BTreeSet<(usize, u8)> = tris.iter().cloned().collect();
    // spanning tree by BFS over glued sides
    let root = tris[0];
    let mut parent: std::collections::BTreeMap<(usize, u8), ((usize, u8), NormalStep)> =
        Default::default();
    let mut order = vec![root];
    let mut seen: std::collections::BTreeSet<(usize, u8)> = [root].into();
    let mut qq = std::collections::VecDeque::from([root]);
    let mut nontree: Vec<((usize, u8), u8)> = Vec::new();
    while let Some((t1, v1)) = qq.pop_front() {
        for f in 0..4u8 {
            if f == v1 {
                continue;
            }
            let g = bprime
                .tri
                .glue_state(t1, f, bprime.stage)
                .1
                .ok_or_else(|| GluesysError::Internal("torus piece with free side".into()))?;
            let to = (g.to_tet, g.perm[v1 as usize]);
            debug_assert!(in_piece.contains(&to));
            if seen.insert(to) {
                // the step crossing into `to` through side f; enter side is
                // provisional and fixed when paths are assembled
                parent.insert(
                    to,
                    ((t1, v1), NormalStep { tet: t1, vertex: v1, enter: 0, exit: f }),
                );
                order.push(to);
                qq.push_back(to);
            } else {
                nontree.push(((t1, v1), f));
            }
        }
    }
    // fundamental cycle for a non-tree crossing: tree path root->a, cross,
    // tree path b->root; assembled as normal steps. Enter sides are chained.
    let tree_path_to_root = |mut x: (usize, u8)| -> Vec<((usize, u8), u8)> {
        // list of (node, exit side toward parent): from x up to root
        let mut out = Vec::new();
        while let Some(&(p, step)) = parent.get(&x) {
            // step goes parent -> x through step.exit; from x toward the
            // parent we cross the glued image side
            let g = bprime.tri.glue_state(step.tet, step.exit, bprime.stage).1.unwrap();
            debug_assert_eq!((g.to_tet, g.perm[step.vertex as usize]), x);
            let back_side = g.perm[step.exit as usize];
            out.push((x, back_side));
            x = p;
        }
        out
    };
    let mk_cycle = |a: (usize, u8), f: u8| -> Result<SmallPath, GluesysError> {
        // crossings: root -> a (down the tree), then a -f-> b, then b -> root
        let g = bprime.tri.glue_state(a.0, f, bprime.stage).1.unwrap();
        let b = (g.to_tet, g.perm[a.1 as usize]);
        let down: Vec<((usize, u8), u8)> = {
            let mut up = tree_path_to_root(a);
            up.reverse();
            // reversed: from root to a: each element was (node, side toward
            // parent); downward we cross from parent into node through the
            // partner side: rebuild as (parent_exit at parent) list
            let mut out = Vec::new();
            for (node, back_side) in up {
                let g2 = bprime.tri.glue_state(node.0, back_side, bprime.stage).1.unwrap();
                out.push(((g2.to_tet, g2.perm[node.1 as usize]), g2.to_face));
                let _ = node;
            }
            out
        };
        let up = tree_path_to_root(b);
        // crossing list: (node, exit side)
        let mut crossings: Vec<((usize, u8), u8)> = Vec::new();
        crossings.extend(down);
        crossings.push((a, f));
        crossings.extend(up);
        // convert to steps: the enter side of each node is the image of the
        // previous crossing
        let n = crossings.len();
        let mut steps = Vec::new();
        for k in 0..n {
            let ((t1, v1), exit) = crossings[k];
            let prev = crossings[(k + n - 1) % n];
            let gprev = bprime.tri.glue_state(prev.0 .0, prev.1, bprime.stage).1.unwrap();
            debug_assert_eq!((gprev.to_tet, gprev.perm[prev.0 .1 as usize]), (t1, v1));
            let enter = gprev.perm[prev.1 as usize];
            steps.push(NormalStep { tet: t1, vertex: v1, enter, exit });
        }
        let p = SmallPath::closed(steps);
        p.validate(bprime)?;
        Ok(p)
    };
    // collect candidate cycles until two independent classes are found
    let mut best: Option<(SmallPath, Vec<BigInt>)> = None;
    for (a, f) in &nontree {
        let cyc = mk_cycle(*a, *f)?;
        let cls = class_of(&cyc)?;
        if cls.iter().all(|c| c.is_zero()) {
            continue;
        }
        match &best {
            None => best = Some((cyc, cls)),
            Some((p0, c0)) => {
                let p01 = pair(c0, &cls);
                if p01.is_zero() {
                    continue;
                }
                // got an independent pair; saturate to a lattice basis of
                // the rank-2 block via Smith normal form
                let two = IntMatrix::from_rows_i64(&[
                    c0.iter().map(|x| i64::try_from(x).unwrap()).collect::<Vec<i64>>(),
                    cls.iter().map(|x| i64::try_from(x).unwrap()).collect::<Vec<i64>>(),
                ]);
                let _ = &two;
                let (alpha, beta, ca, cb) = if p01 > BigInt::zero() {
                    (p0.clone(), cyc.clone(), c0.clone(), cls.clone())
                } else {
                    (cyc.clone(), p0.clone(), cls.clone(), c0.clone())
                };
                let p = pair(&ca, &cb);
                if p != BigInt::from(2) {
                    // not a primitive symplectic pair on this torus; keep
                    // scanning (dual cycles always contain a basis)
                    continue;
                }
                return Ok(CuspData { piece, alpha, beta, alpha_class: ca, beta_class: cb });
            }
        }
    }
    Err(GluesysError::Internal("no peripheral basis found among dual cycles".into()))
}

pub fn build_gluing_system(t: &Triangulation) -> Result<GluingSystem, GluesysError> {
    let n = t.num_tetrahedra;
    let b0 = build_boundary(t, Stage::M0)?;
    let bp = build_boundary(t, Stage::Mprime)?;
    let odd0 = oddhom::odd_homology_cellular(&b0)?;
    let oddp = oddhom::odd_homology_cellular(&bp)?;

    // cusps: torus pieces of the Mprime boundary
    let mut cusps = Vec::new();
    for (ci, piece) in bp.summary.small_pieces.iter().enumerate() {
        if piece.kind == SmallPieceKind::Torus {
            let user = t
                .peripheral_curves
                .as_ref()
                .and_then(|pcs| pcs.get(cusps.len()));
            cusps.push(compute_peripheral_basis(&bp, &oddp, ci, user)?);
        }
    }
    let nc = cusps.len();

    // mu rows from the defect loops
    let mut nz_rows: Vec<Vec<i64>> = Vec::new();
    let mut sign_bits: Vec<u8> = Vec::new();
    let mut mu_paths: Vec<SmallPath> = Vec::new();
    for d in 0..b0.defects.len() {
        mu_paths.push(pathalg::defect_loop_path(&b0, d, 0)?);
    }
    // cusp rows: q-lift the peripheral paths to the defect stage and cut
    let mut cusp_rows: Vec<Vec<i64>> = Vec::new();
    let mut cusp_bits: Vec<u8> = Vec::new();
    for which in 0..2 {
        for c in &cusps {
            let p = if which == 0 { &c.alpha } else { &c.beta };
            let lifted = pathalg::q_lift(&b0, p)?;
            let img = pathalg::g_tilde_p(&b0, &lifted, 0)?;
            cusp_rows.push(row3_to_two_column(&img.row3));
            cusp_bits.push(img.fiber);
        }
    }
    nz_rows.extend(cusp_rows);
    sign_bits.extend(cusp_bits);
    for p in &mu_paths {
        let img = pathalg::g_tilde_p(&b0, p, 0)?;
        nz_rows.push(row3_to_two_column(&img.row3));
        sign_bits.push(img.fiber);
    }
    let nz = if nz_rows.is_empty() {
        IntMatrix::zeros(0, 2 * n)
    } else {
        IntMatrix::from_rows_i64(&nz_rows)
    };
    let z_signs: Vec<u8> =
        nz_rows.iter().zip(&sign_bits).map(|(r, &s)| z_sign(r, s)).collect();

    // Sigma_0-side classes
    let rank0 = odd0.free_rank;
    let class_mat = |paths: &[&SmallPath]| -> Result<IntMatrix, GluesysError> {
        let mut m = IntMatrix::zeros(paths.len(), rank0);
        for (i, p) in paths.iter().enumerate() {
            let tc: TwistedCycle = pathalg::h_tilde(&b0, &odd0, p)?;
            for (j, v) in tc.coeffs.iter().enumerate() {
                m[(i, j)] = v.clone();
            }
        }
        Ok(m)
    };
    let mu_refs: Vec<&SmallPath> = mu_paths.iter().collect();
    let mu_classes = class_mat(&mu_refs)?;
    let mut khat_paths: Vec<SmallPath> = mu_paths.clone();
    for c in &cusps {
        khat_paths.push(pathalg::q_lift(&b0, &c.alpha)?);
        khat_paths.push(pathalg::q_lift(&b0, &c.beta)?);
    }
    let khat_refs: Vec<&SmallPath> = khat_paths.iter().collect();
    let khat_classes = class_mat(&khat_refs)?;
    let eps_sigma0 = odd0.eps.clone();

    // q matrix over K generators (mu..., then per cusp alpha-hat, beta-hat)
    let rank_p = oddp.free_rank;
    let mut q_matrix = IntMatrix::zeros(khat_paths.len(), rank_p);
    for (ci, c) in cusps.iter().enumerate() {
        for (which, cls) in [(0usize, &c.alpha_class), (1, &c.beta_class)] {
            let row = b0.defects.len() + 2 * ci + which;
            for (j, v) in cls.iter().enumerate() {
                q_matrix[(row, j)] = v.clone();
            }
        }
    }
    let eps_sigma_prime = oddp.eps.clone();

    let torsion_report = if nz.rows() == 0 {
        Vec::new()
    } else {
        zlat::smith_normal_form(&nz)
            .invariant_factors()
            .into_iter()
            .filter(|f| *f > BigInt::from(1))
            .collect()
    };

    // ends-on-cusp multiplicities: which cusp each defect end lands on
    let cusp_of_piece: std::collections::BTreeMap<usize, usize> =
        cusps.iter().enumerate().map(|(i, c)| (c.piece, i)).collect();
    let mut end_multiplicity = IntMatrix::zeros(nc, b0.defects.len());
    for (j, d) in b0.defects.iter().enumerate() {
        for fan in &d.fans {
            let (tt, v, _) = fan[0];
            // the vertex (tt, v) lies on some torus piece of Mprime
            let piece = bp.small_component_of[&(tt, v)];
            if let Some(&c) = cusp_of_piece.get(&piece) {
                end_multiplicity[(c, j)] += 1;
            }
        }
    }
    // dependent edge rows to drop: the last edge with an end on each cusp
    let mut dropped = Vec::new();
    for c in 0..nc {
        let mut pick = None;
        for j in 0..b0.defects.len() {
            if !end_multiplicity[(c, j)].is_zero() && !dropped.contains(&j) {
                pick = Some(j);
            }
        }
        dropped.push(pick.ok_or_else(|| {
            GluesysError::Internal(format!("cusp {c} touches no edge class"))
        })?);
    }

    Ok(GluingSystem {
        num_tetrahedra: n,
        num_cusps: nc,
        nz,
        sign_bits,
        z_signs,
        mu_classes,
        khat_classes,
        eps_sigma0,
        q_matrix,
        eps_sigma_prime,
        torsion_report,
        cusps,
        end_multiplicity,
        dropped_edge_rows: dropped,
    })
}

/// One verified identity of the gluing system.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Exact verification of the symplectic properties. Every check is integer
/// arithmetic; any failure names the violated identity.
pub fn verify_nz(s: &GluingSystem) -> Vec<Verdict> {
    let mut out = Vec::new();
    let n = s.num_tetrahedra;
    let nc = s.num_cusps;
    let mut check = |name: &str, pass: bool, detail: String| {
        out.push(Verdict { name: name.to_string(), pass, detail });
    };

    // g J g^T = 2 J_{2nc} (+) 0_N
    let j = j_matrix(n);
    let gjg = s.nz.mul(&j).mul(&s.nz.transpose());
    let mut expect = IntMatrix::zeros(2 * nc + s.mu_classes.rows(), 2 * nc + s.mu_classes.rows());
    for i in 0..nc {
        expect[(i, nc + i)] = BigInt::from(2);
        expect[(nc + i, i)] = BigInt::from(-2);
    }
    check(
        "nz_symplectic_identity",
        gjg == expect,
        format!("g J g^T == 2J_{{{}}} (+) 0_{{{}}}", 2 * nc, s.mu_classes.rows()),
    );

    // rank of the NZ matrix
    let rank_nz = zlat::rank(&s.nz);
    check("nz_rank", rank_nz == n + nc, format!("rank(g) = {rank_nz}, expect N + n_c = {}", n + nc));

    // isotropy of G in Sigma_0
    let gg = s.mu_classes.mul(&s.eps_sigma0).mul(&s.mu_classes.transpose());
    check("g_isotropic", gg.is_zero(), "<G, G> = 0 in Sigma_0".into());

    // rank of G
    let rank_g = zlat::rank(&s.mu_classes);
    let expect_g = s.mu_classes.rows().saturating_sub(nc);
    check("rank_g", rank_g == expect_g, format!("rank G = {rank_g}, expect N - n_c = {expect_g}"));

    // form preservation: the symbolic pairing through J equals the cellular
    // pairing of the K generators in Sigma_0
    let kk_sigma0 = s.khat_classes.mul(&s.eps_sigma0).mul(&s.khat_classes.transpose());
    // reorder: khat rows are mu..., alpha/beta interleaved per cusp; nz rows
    // are alpha..., beta..., mu...
    let nmu = s.mu_classes.rows();
    let perm: Vec<usize> = {
        let mut p = Vec::new();
        for c in 0..nc {
            p.push(nmu + 2 * c); // alpha_c
        }
        for c in 0..nc {
            p.push(nmu + 2 * c + 1); // beta_c
        }
        for m in 0..nmu {
            p.push(m);
        }
        p
    };
    let kk_perm = kk_sigma0.take_rows(&perm);
    let kk_ordered = kk_perm.transpose().take_rows(&perm).transpose();
    check(
        "g_preserves_form",
        kk_ordered == gjg,
        "pairings of K generators agree in Sigma_0 and through g".into(),
    );

    // exactness facts: q of mu rows vanishes, q hits the Sigma' basis,
    // rank K - rank G = rank H1^-(Sigma')
    let qmu_zero = (0..nmu).all(|i| (0..s.q_matrix.cols()).all(|j| s.q_matrix[(i, j)].is_zero()));
    check("q_kills_edge_rows", qmu_zero, "q(mu_j) = 0".into());
    let q_rank = zlat::rank(&s.q_matrix);
    check(
        "q_surjective",
        q_rank == s.q_matrix.cols() && s.q_matrix.cols() == 2 * nc,
        format!("rank q = {q_rank} = rank H1^-(Sigma') = {}", 2 * nc),
    );
    let rank_k = zlat::rank(&s.khat_classes);
    check(
        "rank_k_minus_rank_g",
        rank_k == rank_g + 2 * nc,
        format!("rank K = {rank_k} = rank G + 2 n_c"),
    );

    // induced form on K/G is 2J per cusp
    match zlat::quotient(&s.khat_classes, &s.mu_classes) {
        Err(e) => check("kg_quotient_form", false, format!("quotient failed: {e}")),
        Ok(q) => {
            let induced = q.lift_basis.mul(&s.eps_sigma0).mul(&q.lift_basis.transpose());
            // expected: symplectically equivalent to 2 J_{2nc}: all
            // invariant factors 2
            let f = zlat::smith_normal_form(&induced).invariant_factors();
            let ok = q.free_rank == 2 * nc
                && f.len() == 2 * nc
                && f.iter().all(|x| *x == BigInt::from(2));
            check(
                "kg_quotient_form",
                ok,
                format!("K/G rank {} with form factors {f:?}", q.free_rank),
            );
        }
    }

    // edge-row dependency: one relation per cusp
    let dep = s.end_multiplicity.mul(&s.mu_classes);
    check("edge_rows_dependent_per_cusp", dep.is_zero(), "sum of edge rows per cusp vanishes".into());
    let dep_nz = {
        let nmu = s.mu_classes.rows();
        let idx: Vec<usize> = (2 * nc..2 * nc + nmu).collect();
        let edge_rows = s.nz.take_rows(&idx);
        s.end_multiplicity.mul(&edge_rows)
    };
    check("edge_rows_dependent_in_nz", dep_nz.is_zero(), "same relation among NZ rows".into());

    // torsion of the cokernel contains only 2 and 4
    let tors_ok = s
        .torsion_report
        .iter()
        .all(|f| *f == BigInt::from(2) || *f == BigInt::from(4));
    check(
        "cokernel_torsion_2_and_4",
        tors_ok,
        format!("invariant factors {:?}", s.torsion_report),
    );

    out
}

/// Homology of the five-term complex built from the defect cycles: ranks and
/// torsion at the three interior spots. The middle homology is the odd
/// homology of the glued boundary, the others vanish modulo 2-torsion.
pub struct NeumannComplexReport {
    pub rank_left: usize,
    pub rank_middle: usize,
    pub rank_right: usize,
    pub torsion_left: Vec<BigInt>,
    pub torsion_middle: Vec<BigInt>,
    pub torsion_right: Vec<BigInt>,
}

pub fn neumann_complex(s: &GluingSystem) -> Result<NeumannComplexReport, GluesysError> {
    let n = s.num_tetrahedra;
    let nc = s.num_cusps;
    let nmu = s.mu_classes.rows();
    // maps, in the row-vector convention v -> v * M:
    //   delta: Z^{nc} -> Z^{nmu}, the end multiplicities
    //   gi: Z^{nmu} -> Z^{2N}, the edge rows of the NZ matrix
    //   gi_star: Z^{2N} -> Z^{nmu}, pairing against the edge rows
    let delta = s.end_multiplicity.clone();
    let idx: Vec<usize> = (2 * nc..2 * nc + nmu).collect();
    let gi = s.nz.take_rows(&idx);
    let j = j_matrix(n);
    let gi_star = j.mul(&gi.transpose());
    // complex: delta then gi then gi_star then delta^T
    let homology_at = |inc: &IntMatrix, out: &IntMatrix| -> Result<(usize, Vec<BigInt>), GluesysError> {
        // ker(out) / im(inc)
        let k = zlat::kernel(out);
        let q = zlat::quotient(&k, inc)
            .map_err(|e| GluesysError::Internal(format!("homology quotient: {e}")))?;
        Ok((q.free_rank, q.torsion))
    };
    let comp1 = delta.mul(&gi);
    if !comp1.is_zero() {
        return Err(GluesysError::Verification("delta then gi is nonzero".into()));
    }
    let comp2 = gi.mul(&gi_star);
    if !comp2.is_zero() {
        return Err(GluesysError::Verification("gi then gi* is nonzero".into()));
    }
    let comp3 = gi_star.mul(&delta.transpose());
    if !comp3.is_zero() {
        return Err(GluesysError::Verification("gi* then delta^T is nonzero".into()));
    }
    let (rank_left, torsion_left) = homology_at(&delta, &gi)?;
    let (rank_middle, torsion_middle) = homology_at(&gi, &gi_star)?;
    let (rank_right, torsion_right) = homology_at(&gi_star, &delta.transpose())?;
    Ok(NeumannComplexReport {
        rank_left,
        rank_middle,
        rank_right,
        torsion_left,
        torsion_middle,
        torsion_right,
    })
}

/// The NZ export document.
#[derive(Serialize)]
pub struct NzExport {
    #[serde(rename = "A")]
    pub a: Vec<Vec<i64>>,
    #[serde(rename = "Aprime")]
    pub aprime: Vec<Vec<i64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<i64>>,
    #[serde(rename = "Bprime")]
    pub bprime: Vec<Vec<i64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<i64>>,
    #[serde(rename = "Cprime")]
    pub cprime: Vec<Vec<i64>>,
    pub signs: Vec<u8>,
    pub torsion: Vec<i64>,
}

pub fn nz_export(s: &GluingSystem) -> NzExport {
    let rows = s.nz.to_i64().expect("NZ entries fit i64");
    let n = s.num_tetrahedra;
    let nc = s.num_cusps;
    let split = |r: &Vec<i64>| (r[..n].to_vec(), r[n..].to_vec());
    let mut a = Vec::new();
    let mut ap = Vec::new();
    let mut b = Vec::new();
    let mut bp = Vec::new();
    let mut c = Vec::new();
    let mut cp = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let (x, y) = split(r);
        if i < nc {
            a.push(x);
            ap.push(y);
        } else if i < 2 * nc {
            b.push(x);
            bp.push(y);
        } else {
            c.push(x);
            cp.push(y);
        }
    }
    NzExport {
        a,
        aprime: ap,
        b,
        bprime: bp,
        c,
        cprime: cp,
        signs: s.sign_bits.clone(),
        torsion: s
            .torsion_report
            .iter()
            .map(|t| i64::try_from(t).expect("small torsion"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::{Rng, SeedableRng};

    fn expect_all_pass(vs: &[Verdict]) {
        for v in vs {
            assert!(v.pass, "{}: {}", v.name, v.detail);
        }
    }

    #[test]
    fn figure_eight_nz_identity() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        assert_eq!(s.num_cusps, 1);
        assert_eq!(s.mu_classes.rows(), 2);
        // edge rows have total exponent degree 6 before elimination; after
        // eliminating gamma'' the row sums stay even and the fiber bits are 0
        assert_eq!(s.sign_bits[2], 0);
        assert_eq!(s.sign_bits[3], 0);
        let rank = zlat::rank(&s.nz);
        assert_eq!(rank, 3, "rank g = N + n_c");
        expect_all_pass(&verify_nz(&s));
    }

    #[test]
    fn five_two_nz_identity() {
        let s = build_gluing_system(&fixtures::five_two()).unwrap();
        assert_eq!(s.num_cusps, 1);
        assert_eq!(s.mu_classes.rows(), 3);
        assert_eq!(zlat::rank(&s.nz), 4);
        expect_all_pass(&verify_nz(&s));
    }

    #[test]
    fn corrupting_an_entry_breaks_verification() {
        let mut s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let r = s.nz.rows() - 1;
        s.nz[(r, 0)] += 1;
        let vs = verify_nz(&s);
        assert!(vs.iter().any(|v| !v.pass), "perturbation must break an exact identity");
    }

    #[test]
    fn unglued_tetrahedron_gives_empty_system() {
        let s = build_gluing_system(&fixtures::single_tetrahedron()).unwrap();
        assert_eq!(s.num_cusps, 0);
        assert_eq!(s.mu_classes.rows(), 0);
        assert_eq!(s.nz.rows(), 0);
    }

    #[test]
    fn neumann_complex_figure_eight() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let r = neumann_complex(&s).unwrap();
        assert_eq!(r.rank_middle, 2, "middle homology is H1^-(Sigma')");
        assert_eq!(r.rank_left, 0);
        assert_eq!(r.rank_right, 0);
        for t in r.torsion_left.iter().chain(&r.torsion_middle).chain(&r.torsion_right) {
            assert_eq!(*t, BigInt::from(2), "only 2-torsion appears");
        }
    }

    #[test]
    fn neumann_complex_five_two() {
        let s = build_gluing_system(&fixtures::five_two()).unwrap();
        let r = neumann_complex(&s).unwrap();
        assert_eq!(r.rank_middle, 2);
        assert_eq!(r.rank_left, 0);
        assert_eq!(r.rank_right, 0);
    }

    #[test]
    fn peripheral_basis_pairs_to_two() {
        let t = fixtures::figure_eight();
        let bp = build_boundary(&t, Stage::Mprime).unwrap();
        let oddp = oddhom::odd_homology_cellular(&bp).unwrap();
        let piece = bp
            .summary
            .small_pieces
            .iter()
            .position(|p| p.kind == SmallPieceKind::Torus)
            .unwrap();
        let c = compute_peripheral_basis(&bp, &oddp, piece, None).unwrap();
        let mut acc = BigInt::zero();
        for i in 0..c.alpha_class.len() {
            for j in 0..c.beta_class.len() {
                acc += &c.alpha_class[i] * &oddp.eps[(i, j)] * &c.beta_class[j];
            }
        }
        assert_eq!(acc, BigInt::from(2), "odd lifts pair to twice the base intersection");
    }

    #[test]
    fn sphere_cusp_is_rejected_for_peripheral_basis() {
        let t = fixtures::pillow_sphere_cusp();
        let bp = build_boundary(&t, Stage::Mprime).unwrap();
        let oddp = oddhom::odd_homology_cellular(&bp).unwrap();
        let piece = bp
            .summary
            .small_pieces
            .iter()
            .position(|p| p.kind == SmallPieceKind::Sphere)
            .unwrap();
        assert!(matches!(
            compute_peripheral_basis(&bp, &oddp, piece, None),
            Err(GluesysError::NotATorus(_))
        ));
    }

    #[test]
    fn commuting_square_on_random_closed_paths() {
        // g(h(p)) computed through the K-generator classes equals the direct
        // symbolic image h(g_P(p)) for random closed paths on the defect
        // stage boundary
        let t = fixtures::figure_eight();
        let s = build_gluing_system(&t).unwrap();
        let b0 = build_boundary(&t, Stage::M0).unwrap();
        let odd0 = oddhom::odd_homology_cellular(&b0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let mut tested = 0;
        'outer: for _ in 0..200 {
            if tested >= 24 {
                break;
            }
            // random closed normal path: a random walk that we close up by
            // walking back along its own trail reversed through a detour is
            // fiddly; instead take random compositions of known closed loops
            // translated along random walks: here, random products of the
            // known mu loops and peripheral lifts, as step sequences, would
            // be disconnected. Use instead random dual cycles of the M0
            // small tiling: random walk until the same side is revisited.
            let mut tt = rng.gen_range(0..t.num_tetrahedra);
            let mut v = rng.gen_range(0..4u8);
            let mut enter = (0..4u8).filter(|&f| f != v).nth(rng.gen_range(0..3)).unwrap();
            let mut trail: Vec<NormalStep> = Vec::new();
            let mut seen = std::collections::BTreeMap::new();
            for k in 0..200 {
                if let Some(&k0) = seen.get(&(tt, v, enter)) {
                    let cyc: Vec<NormalStep> = trail[k0..].to_vec();
                    let p = SmallPath::closed(cyc);
                    if p.validate(&b0).is_err() {
                        continue 'outer;
                    }
                    // left side: express h(p) in K generators and apply g
                    let h = pathalg::h_tilde(&b0, &odd0, &p).unwrap();
                    let target = IntMatrix::from_rows_i64(&[h
                        .coeffs
                        .iter()
                        .map(|c| i64::try_from(c).unwrap())
                        .collect::<Vec<i64>>()]);
                    let Some(x) = zlat::solve_left(&s.khat_classes, &target) else {
                        // not in the path-image subgroup: cannot happen for
                        // closed small paths
                        panic!("closed path class outside K");
                    };
                    // reorder K generators (mu..., alpha/beta interleaved)
                    // into NZ row order (alpha..., beta..., mu...)
                    let nmu = s.mu_classes.rows();
                    let nc = s.num_cusps;
                    let mut xr = IntMatrix::zeros(1, nmu + 2 * nc);
                    for m in 0..nmu {
                        xr[(0, 2 * nc + m)] = x[(0, m)].clone();
                    }
                    for c in 0..nc {
                        xr[(0, c)] = x[(0, nmu + 2 * c)].clone();
                        xr[(0, nc + c)] = x[(0, nmu + 2 * c + 1)].clone();
                    }
                    let left = xr.mul(&s.nz);
                    // right side: direct cut image
                    let img = pathalg::g_tilde_p(&b0, &p, 0).unwrap();
                    let mut row = vec![0i64; 2 * t.num_tetrahedra];
                    let two = super::row3_to_two_column(&img.row3);
                    row.copy_from_slice(&two);
                    let right = IntMatrix::from_rows_i64(&[row]);
                    assert_eq!(left, right, "g h = h g_P on a closed path");
                    tested += 1;
                    continue 'outer;
                }
                seen.insert((tt, v, enter), k);
                let exit = (0..4u8)
                    .filter(|&f| f != v && f != enter)
                    .nth(rng.gen_range(0..2))
                    .unwrap();
                trail.push(NormalStep { tet: tt, vertex: v, enter, exit });
                let g = b0.tri.glue_state(tt, exit, b0.stage).1.unwrap();
                (tt, v, enter) = (g.to_tet, g.perm[v as usize], g.perm[exit as usize]);
            }
        }
        assert!(tested >= 10, "exercised {tested} random closed paths");
    }

    #[test]
    fn nz_export_shape() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let e = nz_export(&s);
        assert_eq!(e.a.len(), 1);
        assert_eq!(e.b.len(), 1);
        assert_eq!(e.c.len(), 2);
        assert_eq!(e.a[0].len(), 2);
        assert_eq!(e.signs.len(), 4);
        let json = serde_json::to_string(&e).unwrap();
        assert!(json.contains("\"Aprime\""));
    }
}
