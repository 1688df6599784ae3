//! Numerical hyperbolic structures: solving the gluing equations on the
//! tetrahedron shape variety, volumes via the Bloch-Wigner function, and the
//! volume-variation identity.

use crate::gluesys::GluingSystem;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, thiserror::Error)]
pub enum HypgeoError {
    #[error("dilogarithm argument at a singular point")]
    Domain,
    #[error("no converged solution after {0} restarts")]
    NumericFailure(usize),
    #[error("iterates degenerate toward 0 or 1")]
    DegenerateShape,
    #[error("bad options: {0}")]
    BadOptions(String),
}

// even-index Bernoulli numbers B_2..B_36 (B_0 = 1, B_1 = -1/2 handled
// explicitly in the series)
const BERNOULLI_EVEN: [f64; 18] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
    -7709321041217.0 / 510.0,
    2577687858367.0 / 6.0,
    -26315271553053477373.0 / 1919190.0,
];

const PI2_6: f64 = std::f64::consts::PI * std::f64::consts::PI / 6.0;

/// The dilogarithm, by the Bernoulli series in -ln(1-z) after reduction to
/// |z| <= 1, Re z <= 1/2.
pub fn dilog(z: Complex64) -> Complex64 {
    if z == Complex64::new(0.0, 0.0) {
        return Complex64::new(0.0, 0.0);
    }
    if z == Complex64::new(1.0, 0.0) {
        return Complex64::new(PI2_6, 0.0);
    }
    if z.norm() > 1.0 {
        let li = dilog(1.0 / z);
        let l = (-z).ln();
        return -li - Complex64::new(PI2_6, 0.0) - 0.5 * l * l;
    }
    if z.re > 0.5 {
        let li = dilog(1.0 - z);
        return Complex64::new(PI2_6, 0.0) - z.ln() * (1.0 - z).ln() - li;
    }
    // Li2(z) = sum_{n>=0} B_n u^{n+1} / (n+1)!  with u = -ln(1-z)
    let u = -(1.0 - z).ln();
    let u2 = u * u;
    let mut term = u; // n = 0: B_0 u / 1!
    let mut acc = term;
    // n = 1: B_1 u^2 / 2! = -u^2 / 4
    acc -= u2 / 4.0;
    // even n = 2k: B_2k u^{2k+1} / (2k+1)!
    let mut upow = u * u2; // u^3
    let mut fact = 6.0; // 3!
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        term = b * upow / fact;
        acc += term;
        if term.norm() < 1e-18 * acc.norm().max(1.0) {
            break;
        }
        let n = 2 * (k + 1) + 1;
        upow *= u2;
        fact *= ((n + 1) * (n + 2)) as f64;
    }
    acc
}

/// The Bloch-Wigner function D(z) = Im Li2(z) + arg(1-z) ln|z|.
pub fn bloch_wigner(z: Complex64) -> Result<f64, HypgeoError> {
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0) {
        return Err(HypgeoError::Domain);
    }
    if z.im == 0.0 {
        // single-valued and vanishing on the real line
        return Ok(0.0);
    }
    Ok(dilog(z).im + (1.0 - z).arg() * z.norm().ln())
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub retries: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: 1e-12, max_iter: 100, retries: 30, seed: 1 }
    }
}

/// Per-cusp equation targets: squared eigenvalues along the peripheral
/// basis; `None` leaves that equation out of the system.
#[derive(Debug, Clone, Copy, Default)]
pub struct CuspTarget {
    pub l2: Option<Complex64>,
    pub m2: Option<Complex64>,
}

impl CuspTarget {
    pub fn complete() -> Self {
        CuspTarget { l2: Some(Complex64::new(1.0, 0.0)), m2: Some(Complex64::new(1.0, 0.0)) }
    }
}

#[derive(Debug, Clone)]
pub struct ShapeSolution {
    pub shapes: Vec<Complex64>,
    pub residual_norm: f64,
    /// achieved (l^2, m^2) per cusp
    pub completeness_targets: Vec<(Complex64, Complex64)>,
    pub converged: bool,
    /// all distinct converged solutions found across restarts
    pub all_found: Vec<Vec<Complex64>>,
}

pub struct EquationRow {
    pub coef: Vec<i64>,
    pub z_sign: u8,
    pub target: Complex64,
}

/// The value of a signed shape product (-1)^s prod z^a z'^b.
pub fn row_value(coef: &[i64], z_sign: u8, shapes: &[Complex64]) -> Complex64 {
    let n = shapes.len();
    let mut v = Complex64::new(if z_sign == 1 { -1.0 } else { 1.0 }, 0.0);
    for (i, z) in shapes.iter().enumerate() {
        let zp = 1.0 / (1.0 - z);
        v *= z.powi(coef[i] as i32) * zp.powi(coef[n + i] as i32);
    }
    v
}

/// Assemble the solver rows: cusp equations with the requested targets plus
/// the edge equations minus the dependent row dropped per cusp.
pub fn equation_rows(s: &GluingSystem, targets: &[CuspTarget]) -> Result<Vec<EquationRow>, HypgeoError> {
    if targets.len() != s.num_cusps {
        return Err(HypgeoError::BadOptions(format!(
            "{} targets for {} cusps",
            targets.len(),
            s.num_cusps
        )));
    }
    let rows = s.nz.to_i64().expect("NZ entries fit i64");
    let mut out = Vec::new();
    let nc = s.num_cusps;
    for (c, t) in targets.iter().enumerate() {
        if let Some(l2) = t.l2 {
            out.push(EquationRow { coef: rows[c].clone(), z_sign: s.z_signs[c], target: l2 });
        }
        if let Some(m2) = t.m2 {
            out.push(EquationRow {
                coef: rows[nc + c].clone(),
                z_sign: s.z_signs[nc + c],
                target: m2,
            });
        }
    }
    for j in 0..s.mu_classes.rows() {
        if s.dropped_edge_rows.contains(&j) {
            continue;
        }
        out.push(EquationRow {
            coef: rows[2 * nc + j].clone(),
            z_sign: s.z_signs[2 * nc + j],
            target: Complex64::new(1.0, 0.0),
        });
    }
    Ok(out)
}

fn residuals(rows: &[EquationRow], shapes: &[Complex64]) -> Vec<Complex64> {
    rows.iter().map(|r| row_value(&r.coef, r.z_sign, shapes) - r.target).collect()
}

fn norm(rs: &[Complex64]) -> f64 {
    rs.iter().map(|r| r.norm_sqr()).sum::<f64>().sqrt()
}

/// Solve the complex least-squares system J d = -r by normal equations with
/// Gaussian elimination.
fn gauss_newton_step(jac: &[Vec<Complex64>], r: &[Complex64]) -> Option<Vec<Complex64>> {
    let m = jac.len();
    let n = jac[0].len();
    // A = J^H J (+ tiny ridge), b = -J^H r
    let mut a = vec![vec![Complex64::new(0.0, 0.0); n + 1]; n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..m {
                acc += jac[k][i].conj() * jac[k][j];
            }
            a[i][j] = acc;
        }
        a[i][i] += Complex64::new(1e-14, 0.0);
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..m {
            acc += jac[k][i].conj() * r[k];
        }
        a[i][n] = -acc;
    }
    // partial-pivot elimination
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| {
            a[x][col].norm().partial_cmp(&a[y][col].norm()).unwrap()
        })?;
        if a[piv][col].norm() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        let d = a[col][col];
        for j in col..=n {
            a[col][j] /= d;
        }
        for row in 0..n {
            if row != col {
                let f = a[row][col];
                if f.norm() > 0.0 {
                    for j in col..=n {
                        let t = f * a[col][j];
                        a[row][j] -= t;
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n]).collect())
}

fn newton_from(
    rows: &[EquationRow],
    start: &[Complex64],
    opts: &SolveOptions,
) -> Option<(Vec<Complex64>, f64)> {
    let n = start.len();
    let mut z: Vec<Complex64> = start.to_vec();
    let mut r = residuals(rows, &z);
    let mut rn = norm(&r);
    for _ in 0..opts.max_iter {
        if rn < opts.tol {
            return Some((z, rn));
        }
        let jac: Vec<Vec<Complex64>> = rows
            .iter()
            .zip(&r)
            .map(|(row, ri)| {
                let v = ri + row.target;
                (0..n)
                    .map(|i| {
                        let a = row.coef[i] as f64;
                        let b = row.coef[n + i] as f64;
                        v * (a / z[i] + b / (1.0 - z[i]))
                    })
                    .collect()
            })
            .collect();
        let dz = gauss_newton_step(&jac, &r)?;
        let mut lam = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let znew: Vec<Complex64> =
                z.iter().zip(&dz).map(|(zi, di)| zi + lam * di).collect();
            if znew.iter().any(|zi| {
                zi.norm() < 1e-8 || (zi - Complex64::new(1.0, 0.0)).norm() < 1e-8 || !zi.is_finite()
            }) {
                lam /= 2.0;
                continue;
            }
            let rnew = residuals(rows, &znew);
            let rnn = norm(&rnew);
            if rnn < rn {
                z = znew;
                r = rnew;
                rn = rnn;
                improved = true;
                break;
            }
            lam /= 2.0;
        }
        if !improved {
            return if rn < opts.tol { Some((z, rn)) } else { None };
        }
    }
    if rn < opts.tol {
        Some((z, rn))
    } else {
        None
    }
}

/// Multi-start damped Newton on the signed shape products.
pub fn solve_shapes(
    s: &GluingSystem,
    targets: &[CuspTarget],
    opts: &SolveOptions,
) -> Result<ShapeSolution, HypgeoError> {
    let rows = equation_rows(s, targets)?;
    let n = s.num_tetrahedra;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut found: Vec<(Vec<Complex64>, f64)> = Vec::new();
    for _ in 0..opts.retries {
        let start: Vec<Complex64> = (0..n)
            .map(|_| {
                // uniform in the upper half disk around 1/2 + i/2
                loop {
                    let x: f64 = rng.gen_range(-0.5..0.5);
                    let y: f64 = rng.gen_range(-0.5..0.5);
                    if x * x + y * y < 0.25 {
                        return Complex64::new(0.5 + x, (0.5 + y).max(0.05));
                    }
                }
            })
            .collect();
        if let Some((z, rn)) = newton_from(&rows, &start, opts) {
            if !found
                .iter()
                .any(|(w, _)| w.iter().zip(&z).all(|(a, b)| (a - b).norm() < 1e-7))
            {
                found.push((z, rn));
            }
        }
    }
    if found.is_empty() {
        return Err(HypgeoError::NumericFailure(opts.retries));
    }
    // prefer geometric solutions: all shapes in the upper half plane
    let pick = found
        .iter()
        .position(|(z, _)| z.iter().all(|zi| zi.im > 1e-9))
        .unwrap_or(0);
    let (shapes, residual_norm) = found[pick].clone();
    let completeness = achieved_holonomies(s, &shapes);
    Ok(ShapeSolution {
        shapes: shapes.clone(),
        residual_norm,
        completeness_targets: completeness,
        converged: true,
        all_found: found.into_iter().map(|(z, _)| z).collect(),
    })
}

/// Continue a known solution to nearby targets.
pub fn continue_solution(
    s: &GluingSystem,
    targets: &[CuspTarget],
    start: &[Complex64],
    opts: &SolveOptions,
) -> Result<ShapeSolution, HypgeoError> {
    let rows = equation_rows(s, targets)?;
    let (shapes, residual_norm) =
        newton_from(&rows, start, opts).ok_or(HypgeoError::NumericFailure(1))?;
    let completeness = achieved_holonomies(s, &shapes);
    Ok(ShapeSolution {
        shapes: shapes.clone(),
        residual_norm,
        completeness_targets: completeness,
        converged: true,
        all_found: vec![shapes],
    })
}

/// The achieved (l^2, m^2) of a shape assignment, per cusp.
pub fn achieved_holonomies(s: &GluingSystem, shapes: &[Complex64]) -> Vec<(Complex64, Complex64)> {
    let rows = s.nz.to_i64().expect("NZ entries fit i64");
    let nc = s.num_cusps;
    (0..nc)
        .map(|c| {
            (
                row_value(&rows[c], s.z_signs[c], shapes),
                row_value(&rows[nc + c], s.z_signs[nc + c], shapes),
            )
        })
        .collect()
}

/// Hyperbolic volume of a shape solution.
pub fn volume(sol: &ShapeSolution) -> Result<f64, HypgeoError> {
    let mut v = 0.0;
    for z in &sol.shapes {
        v += bloch_wigner(*z)?;
    }
    Ok(v)
}

/// Finite-difference volume variation against the K2 one-form along the
/// family x_alpha = exp(i s) at the base point `s0` for the first cusp, with
/// step `h`. The K2 form of the cusp is
/// `1/2 sum_ij (eps^{-1})^{ij} x_i ^ x_j = (eps^{-1})^{ab} x_alpha ^ x_beta`
/// with (eps^{-1})^{ab} = -1/2 for the pairing <alpha, beta> = 2; along this
/// family |x_alpha| stays one and arg x_alpha moves at unit rate, so
/// eta evaluates to 1/2 log|x_beta|.
pub struct DvolReport {
    pub finite_difference: f64,
    pub eta_value: f64,
    pub relative_discrepancy: f64,
}

pub fn dvol_check(
    s: &GluingSystem,
    s0: f64,
    h: f64,
    opts: &SolveOptions,
) -> Result<DvolReport, HypgeoError> {
    if s.num_cusps != 1 {
        return Err(HypgeoError::BadOptions("volume variation check needs one cusp".into()));
    }
    let complete = solve_shapes(s, &[CuspTarget::complete()], opts)?;
    let mut cur = complete.shapes.clone();
    let solve_at = |u: f64, start: &[Complex64]| -> Result<ShapeSolution, HypgeoError> {
        let t = CuspTarget { l2: Some(Complex64::new(0.0, u).exp()), m2: None };
        continue_solution(s, &[t], start, opts)
    };
    // walk from the complete structure to s0 in a few continuation steps
    let steps = 8;
    for k in 1..=steps {
        let u = s0 * (k as f64) / (steps as f64);
        cur = solve_at(u, &cur)?.shapes;
    }
    let base = solve_at(s0, &cur)?;
    let plus = solve_at(s0 + h, &base.shapes)?;
    let minus = solve_at(s0 - h, &base.shapes)?;
    let vol_plus = volume(&plus)?;
    let vol_minus = volume(&minus)?;
    let fd = (vol_plus - vol_minus) / (2.0 * h);
    // eta(a ^ b) = log|a| d arg b - log|b| d arg a, applied to the K2 form
    // of the cusp lattice; the tangent of x_beta comes from the same central
    // difference as the volume
    let (l2, m2) = base.completeness_targets[0];
    let (_, m2p) = plus.completeness_targets[0];
    let (_, m2m) = minus.completeness_targets[0];
    let eta = {
        let mut eps = crate::zlat::IntMatrix::zeros(2, 2);
        eps[(0, 0)] = 0.into();
        eps[(0, 1)] = 2.into();
        eps[(1, 0)] = (-2).into();
        let w = crate::moduli::k2_form(&eps, &["x_alpha".into(), "x_beta".into()])
            .map_err(|e| HypgeoError::BadOptions(format!("k2 form: {e}")))?;
        let point = [l2, m2];
        let tangent = [Complex64::new(0.0, 1.0) * l2, (m2p - m2m) / (2.0 * h)];
        crate::moduli::eta(&w, &point, &tangent)
            .map_err(|e| HypgeoError::BadOptions(format!("eta: {e}")))?
    };
    let denom = fd.abs().max(eta.abs()).max(1e-300);
    Ok(DvolReport {
        finite_difference: fd,
        eta_value: eta,
        relative_discrepancy: (fd - eta).abs() / denom,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::gluesys::build_gluing_system;

    #[test]
    fn dilog_special_values() {
        let pi = std::f64::consts::PI;
        // Li2(1) = pi^2/6, Li2(-1) = -pi^2/12, Li2(1/2) = pi^2/12 - ln^2(2)/2
        assert!((dilog(Complex64::new(1.0, 0.0)).re - pi * pi / 6.0).abs() < 1e-14);
        assert!((dilog(Complex64::new(-1.0, 0.0)).re + pi * pi / 12.0).abs() < 1e-14);
        let half = dilog(Complex64::new(0.5, 0.0)).re;
        let expect = pi * pi / 12.0 - 0.5 * (2.0f64).ln().powi(2);
        assert!((half - expect).abs() < 1e-14);
        // Li2(i) = -pi^2/48 + i Catalan
        let li_i = dilog(Complex64::new(0.0, 1.0));
        assert!((li_i.re + pi * pi / 48.0).abs() < 1e-14);
        assert!((li_i.im - 0.915_965_594_177_219).abs() < 1e-13);
    }

    #[test]
    fn bloch_wigner_symmetries() {
        let z = Complex64::new(0.3, 0.8);
        let d = bloch_wigner(z).unwrap();
        // antisymmetry under conjugation
        assert!((bloch_wigner(z.conj()).unwrap() + d).abs() < 1e-14);
        // vanishing on the real line
        assert_eq!(bloch_wigner(Complex64::new(0.7, 0.0)).unwrap(), 0.0);
        assert_eq!(bloch_wigner(Complex64::new(-2.3, 0.0)).unwrap(), 0.0);
        assert_eq!(bloch_wigner(Complex64::new(42.0, 0.0)).unwrap(), 0.0);
        // five-term style identity: D(z) = D(1 - 1/z) = D(1/(1-z))
        let r1 = bloch_wigner(1.0 - 1.0 / z).unwrap();
        let r2 = bloch_wigner(1.0 / (1.0 - z)).unwrap();
        assert!((d - r1).abs() < 1e-13);
        assert!((d - r2).abs() < 1e-13);
        assert!(matches!(bloch_wigner(Complex64::new(1.0, 0.0)), Err(HypgeoError::Domain)));
    }

    #[test]
    fn figure_eight_complete_structure() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let sol =
            solve_shapes(&s, &[CuspTarget::complete()], &SolveOptions::default()).unwrap();
        let want = Complex64::new(0.5, 3.0f64.sqrt() / 2.0);
        for z in &sol.shapes {
            assert!((z - want).norm() < 1e-9, "shape {z} vs exp(i pi/3)");
        }
        assert!(sol.residual_norm < 1e-12);
        let v = volume(&sol).unwrap();
        assert!((v - 2.029883212819307).abs() < 1e-9, "volume {v}");
        // mirror solution has negated volume
        let mirror = ShapeSolution {
            shapes: sol.shapes.iter().map(|z| z.conj()).collect(),
            ..sol.clone()
        };
        assert!((volume(&mirror).unwrap() + v).abs() < 1e-12);
    }

    #[test]
    fn five_two_volume_self_consistent() {
        let s = build_gluing_system(&fixtures::five_two()).unwrap();
        let sol =
            solve_shapes(&s, &[CuspTarget::complete()], &SolveOptions::default()).unwrap();
        let v = volume(&sol).unwrap();
        assert!(v > 0.0);
        // all three tetrahedra are isometric at the complete structure
        for z in &sol.shapes[1..] {
            assert!((z - sol.shapes[0]).norm() < 1e-9);
        }
        // the shape generates the cubic field: z^3 - z^2 + 1 = 0 up to the
        // slot relabeling z -> 1/(1-z) etc.; check the volume instead
        assert!((v - 2.828122088330783).abs() < 1e-9, "volume {v}");
    }

    #[test]
    fn deformed_targets_give_nearby_solution() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let opts = SolveOptions::default();
        let complete = solve_shapes(&s, &[CuspTarget::complete()], &opts).unwrap();
        let t = CuspTarget { l2: None, m2: Some(Complex64::new(0.0, 0.02).exp()) };
        let sol = continue_solution(&s, &[t], &complete.shapes, &opts).unwrap();
        assert!(sol.residual_norm < 1e-12);
        let dist: f64 = sol
            .shapes
            .iter()
            .zip(&complete.shapes)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(dist < 0.1 && dist > 1e-6);
        // the achieved m^2 hits the target
        let (_, m2) = sol.completeness_targets[0];
        assert!((m2 - t.m2.unwrap()).norm() < 1e-12);
    }

    #[test]
    fn volume_invariant_under_dropped_row_choice() {
        let t = fixtures::figure_eight();
        let mut s = build_gluing_system(&t).unwrap();
        let opts = SolveOptions::default();
        let v1 = volume(&solve_shapes(&s, &[CuspTarget::complete()], &opts).unwrap()).unwrap();
        s.dropped_edge_rows = vec![0];
        let v2 = volume(&solve_shapes(&s, &[CuspTarget::complete()], &opts).unwrap()).unwrap();
        assert!((v1 - v2).abs() < 1e-9);
    }

    #[test]
    fn dvol_matches_eta_and_is_second_order() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let opts = SolveOptions::default();
        let r1 = dvol_check(&s, 0.2, 1e-4, &opts).unwrap();
        assert!(
            r1.relative_discrepancy < 1e-6,
            "fd {} vs eta {}",
            r1.finite_difference,
            r1.eta_value
        );
        let r2 = dvol_check(&s, 0.2, 2e-4, &opts).unwrap();
        // halving the step shrinks the discrepancy about fourfold
        let ratio = r2.relative_discrepancy / r1.relative_discrepancy.max(1e-18);
        assert!(ratio > 2.0, "second order in h: ratio {ratio}");
    }

    #[test]
    fn degenerate_start_reports_failure() {
        let s = build_gluing_system(&fixtures::figure_eight()).unwrap();
        let rows = equation_rows(&s, &[CuspTarget::complete()]).unwrap();
        // a real starting point stays real under Newton (real equations),
        // so it cannot converge to the geometric solution
        let out = newton_from(
            &rows,
            &[Complex64::new(0.3, 0.0), Complex64::new(0.7, 0.0)],
            &SolveOptions::default(),
        );
        if let Some((z, _)) = out {
            assert!(z.iter().all(|zi| zi.im.abs() < 1e-6), "stays on the real locus");
        }
    }
}
