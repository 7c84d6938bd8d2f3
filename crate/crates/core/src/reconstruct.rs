//! Reconstruction of the indefinite Einstein-Weyl structure on the parameter
//! space from a disk family: null-cone fitting from boundary tangency,
//! orthonormal frame normalization against the conic normal form, cubic
//! horizontal-lift fitting on the fiber, and assembly of the unique
//! torsion-free compatible connection, with curvature audits.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cp1::{Chart, PointCP1};
use crate::embedding::EmbeddingN;
use crate::error::{ReconstructError, SolveError};
use crate::fourier::ThetaGrid;
use crate::solver::{solve_disk, SolvedDisk, SolverConfig, VariationSeries};
use crate::standard::StandardDiskParams;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconstructConfig {
    /// Grid spacing of the field box in all three directions.
    pub fd_step: f64,
    /// Nodes per lambda axis (odd).
    pub nx: usize,
    /// Nodes along t (odd).
    pub nt: usize,
    pub center_lambda_re: f64,
    pub center_lambda_im: f64,
    pub center_t: f64,
    pub cone_tol: f64,
    pub frame_tol: f64,
    /// Interior fiber samples for the cubic lift fit.
    pub zeta_samples: usize,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        ReconstructConfig {
            fd_step: 0.05,
            nx: 17,
            nt: 9,
            center_lambda_re: 0.0,
            center_lambda_im: 0.0,
            center_t: 0.0,
            cone_tol: 1e-6,
            frame_tol: 1e-6,
            zeta_samples: 16,
        }
    }
}

impl ReconstructConfig {
    pub fn node_lambda(&self, i: usize, j: usize) -> C64 {
        let half = (self.nx - 1) as f64 / 2.0;
        C64::new(
            self.center_lambda_re + self.fd_step * (i as f64 - half),
            self.center_lambda_im + self.fd_step * (j as f64 - half),
        )
    }

    pub fn node_t(&self, k: usize) -> f64 {
        let half = (self.nt - 1) as f64 / 2.0;
        self.center_t + self.fd_step * (k as f64 - half)
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.nx + j) * self.nt + k
    }
}

/// Null cone at one parameter point: covector samples along the boundary and
/// the fitted inverse-metric representative.
#[derive(Debug, Clone)]
pub struct NullConeSample {
    pub covectors: Vec<Vector3<f64>>,
    /// Inverse metric on covectors, normalized to det = -1, signature (-++).
    pub q: Matrix3<f64>,
    pub fit_residual: f64,
}

/// Orthonormal frame data at a node.
#[derive(Debug, Clone)]
pub struct FrameField {
    /// Coframe rows: e^i = coframe[(i, a)] dx^a.
    pub coframe: Matrix3<f64>,
    /// Frame columns: e_i = frame[(a, i)] d/dx^a.
    pub frame: Matrix3<f64>,
    pub fit_residual: f64,
    pub gram_residual: f64,
}

/// One reconstructed node before cross-node assembly.
#[derive(Debug, Clone)]
pub struct FieldNode {
    pub lambda: C64,
    pub t: f64,
    pub q: Matrix3<f64>,
    pub g: Matrix3<f64>,
    pub coframe: Matrix3<f64>,
    pub frame: Matrix3<f64>,
    pub alphas: [f64; 4],
    pub betas: [f64; 4],
    pub cone_residual: f64,
    pub frame_residual: f64,
    pub lift_residual: f64,
}

/// Connection data at an interior node.
#[derive(Debug, Clone)]
pub struct ConnectionNode {
    /// Gamma^i_{jk} in frame indices (omega^i_j evaluated on e_k).
    pub gamma_frame: [[[f64; 3]; 3]; 3],
    /// Coordinate Christoffels (nabla_{d_a} d_b = Gamma^c_{ba} d_c).
    pub gamma_coord: [[[f64; 3]; 3]; 3],
    /// Weyl 1-form in coordinate components.
    pub a_form: [f64; 3],
    pub f_scalar: f64,
    pub mu_residual: f64,
    pub torsion_residual: f64,
    pub compat_residual: f64,
}

#[derive(Debug, Clone)]
pub struct MetricConnectionField {
    pub cfg: ReconstructConfig,
    pub nodes: Vec<FieldNode>,
    /// None on the margin (width 1).
    pub conn: Vec<Option<ConnectionNode>>,
    /// Einstein-Weyl residuals, None on the margin (width 2).
    pub ew: Vec<Option<f64>>,
}

/// The fixed Cayley fiber chart zeta = i(1-z)/(1+z): |z| = 1 -> R u {inf},
/// increasing theta -> increasing zeta, interior -> upper half plane.
/// Returned in homogeneous form (num, den).
pub fn cayley(z: C64) -> (C64, C64) {
    (C64::new(0.0, 1.0) * (1.0 - z), 1.0 + z)
}

pub fn cayley_deriv(z: C64) -> C64 {
    let d = 1.0 + z;
    C64::new(0.0, -2.0) / (d * d)
}

/// Conic normal form [(1+zeta^2), (1-zeta^2), 2 zeta] in homogeneous zeta.
fn conic_profile(num: C64, den: C64) -> [C64; 3] {
    [
        den * den + num * num,
        den * den - num * num,
        2.0 * num * den,
    ]
}

/// Real projective representative of the conic profile at a boundary angle.
fn conic_profile_real(theta: f64) -> Vector3<f64> {
    let z = (C64::new(0.0, 1.0) * theta).exp();
    let (num, den) = cayley(z);
    let prof = conic_profile(num, den);
    // On |z| = 1 the three entries share a common phase: divide it out.
    let scale = prof[0] + prof[1]; // = 2 den^2, nonzero away from z = -1
    if scale.norm() > 1e-12 {
        let v = Vector3::new(
            (prof[0] / scale).re,
            (prof[1] / scale).re,
            (prof[2] / scale).re,
        );
        v / v.norm()
    } else {
        // z = -1: zeta = infinity, profile direction e^1 - e^2
        Vector3::new(1.0, -1.0, 0.0) / 2.0f64.sqrt()
    }
}

/// Null covectors along the boundary from the tangency condition: the
/// covector applied to direction v is Im[conj(w') * dG1(v)], with w' the
/// transported boundary tangent and dG1 the transported first-component
/// variation. Rows are unit-normalized.
pub fn boundary_covectors(
    sol: &SolvedDisk<'_>,
    vars: &[VariationSeries; 3],
) -> Result<Vec<Vector3<f64>>, SolveError> {
    let vel = sol.boundary_velocity()?;
    let vel_vals = sol.grid.sample(&vel);
    let dvals: Vec<Vec<C64>> = (0..3)
        .map(|k| sol.transported_first_variation(&vars[k], Some(k)))
        .collect();
    let n = sol.grid.n;
    let mut out = Vec::with_capacity(n);
    for kk in 0..n {
        let w = vel_vals[kk].conj();
        let mut row = Vector3::new(
            (w * dvals[0][kk]).im,
            (w * dvals[1][kk]).im,
            (w * dvals[2][kk]).im,
        );
        let norm = row.norm();
        if norm > 1e-14 {
            row /= norm;
        }
        out.push(row);
    }
    Ok(out)
}

/// Least-squares fit of the quadratic form Q with Q(l, l) = 0 for all
/// boundary covectors; det-normalized to -1 with signature check.
pub fn fit_null_cone(
    covectors: &[Vector3<f64>],
    where_str: &str,
) -> Result<NullConeSample, ReconstructError> {
    let mut normal = nalgebra::SMatrix::<f64, 6, 6>::zeros();
    for l in covectors {
        let row = nalgebra::SVector::<f64, 6>::from([
            l[0] * l[0],
            l[1] * l[1],
            l[2] * l[2],
            2.0 * l[0] * l[1],
            2.0 * l[0] * l[2],
            2.0 * l[1] * l[2],
        ]);
        normal += row * row.transpose();
    }
    let eig = nalgebra::SymmetricEigen::new(normal);
    let mut idx: Vec<usize> = (0..6).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let smallest = eig.eigenvalues[idx[0]].abs();
    let second = eig.eigenvalues[idx[1]].abs();
    if second < 1e-10 || smallest > 1e-3 * second {
        return Err(ReconstructError::DegenerateCone(format!(
            "{where_str}: eigengap {smallest:.3e} / {second:.3e}"
        )));
    }
    let v = eig.eigenvectors.column(idx[0]);
    let mut q = Matrix3::new(v[0], v[3], v[4], v[3], v[1], v[5], v[4], v[5], v[2]);
    let det = q.determinant();
    if det.abs() < 1e-14 {
        return Err(ReconstructError::DegenerateCone(format!(
            "{where_str}: det ~ 0"
        )));
    }
    if det > 0.0 {
        q = -q;
    }
    let scale = (-1.0 / q.determinant()).powf(1.0 / 3.0);
    q *= scale;
    let eigq = nalgebra::SymmetricEigen::new(q);
    let negs = eigq.eigenvalues.iter().filter(|&&e| e < 0.0).count();
    if negs != 1 {
        return Err(ReconstructError::BadSignature(where_str.to_string()));
    }
    let fit_residual = covectors
        .iter()
        .map(|l| (l.transpose() * q * l)[0].abs())
        .fold(0.0, f64::max);
    Ok(NullConeSample {
        covectors: covectors.to_vec(),
        q,
        fit_residual,
    })
}

/// Solves for the coframe S (rows e^i) aligning the boundary covectors with
/// the conic normal form at the Cayley fiber chart:
/// l(theta) ~ (1+zeta^2) e^1 + (1-zeta^2) e^2 + 2 zeta e^3.
pub fn normalize_frame(
    covectors: &[Vector3<f64>],
    thetas: &[f64],
    q: &Matrix3<f64>,
    frame_tol: f64,
    where_str: &str,
) -> Result<FrameField, ReconstructError> {
    assert_eq!(covectors.len(), thetas.len());
    // Unknown x = 9 coframe entries, layout x[3 i + a] = S[(i, a)];
    // constraints l_k x (sum_i p_i e^i) = 0.
    let mut normal = nalgebra::SMatrix::<f64, 9, 9>::zeros();
    for (l, &th) in covectors.iter().zip(thetas) {
        let p = conic_profile_real(th);
        let mut rows = [[0.0f64; 9]; 3];
        for i in 0..3 {
            for a in 0..3 {
                let col = 3 * i + a;
                match a {
                    0 => {
                        rows[1][col] += l[2] * p[i];
                        rows[2][col] += -l[1] * p[i];
                    }
                    1 => {
                        rows[0][col] += -l[2] * p[i];
                        rows[2][col] += l[0] * p[i];
                    }
                    _ => {
                        rows[0][col] += l[1] * p[i];
                        rows[1][col] += -l[0] * p[i];
                    }
                }
            }
        }
        for r in rows {
            let rv = nalgebra::SVector::<f64, 9>::from(r);
            normal += rv * rv.transpose();
        }
    }
    let eig = nalgebra::SymmetricEigen::new(normal);
    let mut idx: Vec<usize> = (0..9).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let v = eig.eigenvectors.column(idx[0]);
    let mut s = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);

    // Scale so that S Q S^T = diag(-1, 1, 1).
    let gram = s * q * s.transpose();
    let c = (-gram[(0, 0)] + gram[(1, 1)] + gram[(2, 2)]) / 3.0;
    if c <= 0.0 {
        return Err(ReconstructError::FitFailure(where_str.to_string(), c));
    }
    s /= c.sqrt();
    // Polish S so that S Q S^T = eta exactly: S <- (I + (eta - G) eta / 2) S
    // converges quadratically from the least-squares solution.
    let target = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
    for _ in 0..4 {
        let gram = s * q * s.transpose();
        let corr = Matrix3::identity() + 0.5 * (target - gram) * target;
        s = corr * s;
    }
    // Time orientation: e^1(d/dt) > 0.
    if s[(0, 2)] < 0.0 {
        s = -s;
    }
    let gram = s * q * s.transpose();
    let gram_residual = (gram - target).norm();

    let mut fit_residual = 0.0f64;
    for (l, &th) in covectors.iter().zip(thetas) {
        let p = conic_profile_real(th);
        let cvec = s.transpose() * p;
        let cross = l.cross(&cvec);
        fit_residual = fit_residual.max(cross.norm() / (l.norm() * cvec.norm()));
    }
    if fit_residual > (frame_tol * 1e3).max(1e-6) {
        return Err(ReconstructError::FitFailure(
            where_str.to_string(),
            fit_residual,
        ));
    }
    let frame = s
        .try_inverse()
        .ok_or_else(|| ReconstructError::FitFailure(where_str.to_string(), f64::INFINITY))?;
    Ok(FrameField {
        coframe: s,
        frame,
        fit_residual,
        gram_residual,
    })
}

/// Transported variation of both Z-components at an interior fiber point.
fn transported_interior_variation(
    sol: &SolvedDisk<'_>,
    vars: &[VariationSeries; 3],
    z: C64,
    k: usize,
) -> (C64, C64) {
    let m_id = sol.nt.fwd.mul(&sol.nt.inv);
    let f1 = sol.phi1.eval_holomorphic(z);
    let f2 = sol.phi2.eval_holomorphic(z);
    let dm = sol.nt.fwd.mul(&sol.nt.d_inv[k]);
    let d1 = vars[k].dphi1.eval_holomorphic(z) + m_id.apply_dot(&dm, f1);
    let d2 = vars[k].dphi2.eval_holomorphic(z)
        + m_id.conj_transport().apply_dot(&dm.conj_transport(), f2);
    (d1, d2)
}

/// Complexified 3-plane distribution at an interior fiber point: the two
/// horizontal generators as coefficients (c1, c2, c3, a) on
/// (d_x1, d_x2, d_t, d_z); the vertical d_zbar completes the basis.
pub fn sample_distribution(
    sol: &SolvedDisk<'_>,
    vars: &[VariationSeries; 3],
    z: C64,
    where_str: &str,
) -> Result<[nalgebra::SVector<C64, 4>; 2], ReconstructError> {
    // padded square so the SVD exposes the full right-singular basis
    let mut sys = nalgebra::SMatrix::<C64, 4, 4>::zeros();
    for k in 0..3 {
        let (d1, d2) = transported_interior_variation(sol, vars, z, k);
        sys[(0, k)] = d1;
        sys[(1, k)] = d2;
    }
    sys[(0, 3)] = sol.phi1.eval_holomorphic_deriv(z);
    sys[(1, 3)] = sol.phi2.eval_holomorphic_deriv(z);
    let svd = sys.svd(false, true);
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    if svd.singular_values[idx[1]] < 1e-8 * svd.singular_values[idx[0]] {
        return Err(ReconstructError::RankFailure(where_str.to_string()));
    }
    let vt = svd.v_t.as_ref().expect("svd v_t");
    let mut out = [nalgebra::SVector::<C64, 4>::zeros(); 2];
    for (r, basis) in out.iter_mut().enumerate() {
        for c in 0..4 {
            (*basis)[c] = vt[(idx[2 + r], c)].conj();
        }
    }
    Ok(out)
}

/// Result of the cubic lift fit at a node.
#[derive(Debug, Clone)]
pub struct LiftFit {
    pub alphas: [f64; 4],
    pub betas: [f64; 4],
    /// max of the pointwise lift residual, imaginary leakage and cubic misfit
    pub residual: f64,
}

/// Fits alpha(zeta), beta(zeta): at interior samples, the frame vectors
/// Gm1 = -e1 + e2 + zeta e3 and Gm2 = zeta(e1 + e2) - e3 lift into the
/// distribution with a d_zeta correction; the corrections are cubic in zeta.
pub fn fit_lift_cubic(
    sol: &SolvedDisk<'_>,
    vars: &[VariationSeries; 3],
    frame: &Matrix3<f64>,
    n_samples: usize,
    check_overfit: bool,
    where_str: &str,
) -> Result<LiftFit, ReconstructError> {
    let mut zetas = Vec::with_capacity(n_samples);
    let mut avals = Vec::with_capacity(n_samples);
    let mut bvals = Vec::with_capacity(n_samples);
    let mut residual = 0.0f64;
    for sidx in 0..n_samples {
        let th = sidx as f64 * std::f64::consts::TAU / n_samples as f64;
        let z = 0.5 * (C64::new(0.0, 1.0) * th).exp();
        let (num, den) = cayley(z);
        let zeta = num / den;
        let f1p = sol.phi1.eval_holomorphic_deriv(z);
        let f2p = sol.phi2.eval_holomorphic_deriv(z);
        let mut d1 = [C64::new(0.0, 0.0); 3];
        let mut d2 = [C64::new(0.0, 0.0); 3];
        for k in 0..3 {
            let (a, b) = transported_interior_variation(sol, vars, z, k);
            d1[k] = a;
            d2[k] = b;
        }
        // frame legs in (complexified) coordinate components
        let e = |i: usize| Vector3::new(frame[(0, i)], frame[(1, i)], frame[(2, i)]);
        let mut dir1 = [C64::new(0.0, 0.0); 3];
        let mut dir2 = [C64::new(0.0, 0.0); 3];
        for a in 0..3 {
            dir1[a] = C64::new(-e(0)[a] + e(1)[a], 0.0) + zeta * e(2)[a];
            dir2[a] = zeta * (e(0)[a] + e(1)[a]) - e(2)[a];
        }
        // pushforward along the direction, then least-squares d_z correction
        let mut push = |dir: &[C64; 3]| -> (C64, f64) {
            let g1: C64 = (0..3).map(|a| dir[a] * d1[a]).sum();
            let g2: C64 = (0..3).map(|a| dir[a] * d2[a]).sum();
            let denom = f1p.norm_sqr() + f2p.norm_sqr();
            let corr = -(f1p.conj() * g1 + f2p.conj() * g2) / denom;
            let r1 = g1 + corr * f1p;
            let r2 = g2 + corr * f2p;
            (corr, (r1.norm_sqr() + r2.norm_sqr()).sqrt())
        };
        let (a1, r1) = push(&dir1);
        let (a2, r2) = push(&dir2);
        residual = residual.max(r1).max(r2);
        // alpha d_zeta = a d_z  =>  alpha = a * dzeta/dz
        let dzdz = cayley_deriv(z);
        zetas.push(zeta);
        avals.push(a1 * dzdz);
        bvals.push(a2 * dzdz);
    }
    let fit = |vals: &[C64], deg: usize| -> Vec<C64> {
        let n = vals.len();
        let mut m = nalgebra::DMatrix::<C64>::zeros(n, deg + 1);
        let mut rhs = nalgebra::DVector::<C64>::zeros(n);
        for (r, (&zt, &v)) in zetas.iter().zip(vals).enumerate() {
            let mut p = C64::new(1.0, 0.0);
            for cidx in 0..=deg {
                m[(r, cidx)] = p;
                p *= zt;
            }
            rhs[r] = v;
        }
        let svd = m.svd(true, true);
        let sol = svd.solve(&rhs, 1e-13).expect("vandermonde solve");
        sol.iter().cloned().collect()
    };
    let ac = fit(&avals, 3);
    let bc = fit(&bvals, 3);
    let mut imag_leak = 0.0f64;
    let mut alphas = [0.0; 4];
    let mut betas = [0.0; 4];
    for i in 0..4 {
        alphas[i] = ac[i].re;
        betas[i] = bc[i].re;
        imag_leak = imag_leak.max(ac[i].im.abs()).max(bc[i].im.abs());
    }
    let mut cubic_res = 0.0f64;
    for (k, &zt) in zetas.iter().enumerate() {
        let pa: C64 = (0..4).map(|i| ac[i] * zt.powu(i as u32)).sum();
        let pb: C64 = (0..4).map(|i| bc[i] * zt.powu(i as u32)).sum();
        cubic_res = cubic_res
            .max((pa - avals[k]).norm())
            .max((pb - bvals[k]).norm());
    }
    residual = residual.max(imag_leak).max(cubic_res);
    if check_overfit {
        let a5 = fit(&avals, 5);
        let scale = ac.iter().map(|c| c.norm()).fold(1e-9, f64::max);
        let quartic = (a5[4].norm() + a5[5].norm()) / scale;
        if quartic > 1e-4 {
            return Err(ReconstructError::FitFailure(
                format!("{where_str}: lift is not cubic"),
                quartic,
            ));
        }
    }
    Ok(LiftFit {
        alphas,
        betas,
        residual,
    })
}

/// Reconstructs a single node: solve, variations, cone, frame, lifts.
pub fn reconstruct_node(
    emb: &EmbeddingN,
    grid: &ThetaGrid,
    scfg: &SolverConfig,
    rcfg: &ReconstructConfig,
    lambda: C64,
    t: f64,
) -> Result<FieldNode, ReconstructError> {
    let to_rec = |e: SolveError| ReconstructError::RankFailure(format!("solve failed: {e}"));
    let lam_pt = PointCP1 {
        chart: Chart::Zero,
        value: lambda,
    };
    let sol = solve_disk(emb, grid, scfg, lam_pt, t, None).map_err(to_rec)?;
    let vars: [VariationSeries; 3] = [
        sol.variation_node_param(0).map_err(to_rec)?,
        sol.variation_node_param(1).map_err(to_rec)?,
        sol.variation_node_param(2).map_err(to_rec)?,
    ];
    let here = format!("lambda = {lambda}, t = {t}");
    let covs = boundary_covectors(&sol, &vars).map_err(to_rec)?;
    let cone = fit_null_cone(&covs, &here)?;
    let frame = normalize_frame(&covs, &sol.grid.thetas, &cone.q, rcfg.frame_tol, &here)?;
    let lift = fit_lift_cubic(&sol, &vars, &frame.frame, rcfg.zeta_samples, false, &here)?;
    let g = cone
        .q
        .try_inverse()
        .ok_or_else(|| ReconstructError::DegenerateCone(here.clone()))?;
    Ok(FieldNode {
        lambda,
        t,
        q: cone.q,
        g,
        coframe: frame.coframe,
        frame: frame.frame,
        alphas: lift.alphas,
        betas: lift.betas,
        cone_residual: cone.fit_residual,
        frame_residual: frame.fit_residual,
        lift_residual: lift.residual,
    })
}

/// psi^i_{j,0} frame components from the cubic lift coefficients, in the
/// p3 = 0 gauge: p = psi^1_2, q = psi^1_3, s = psi^2_3.
pub fn psi_from_lifts(al: &[f64; 4], be: &[f64; 4]) -> ([f64; 3], [f64; 3], [f64; 3]) {
    let p = [
        (al[1] + be[0] - be[2] - al[3]) / 2.0,
        (-al[1] - be[0] - be[2] - al[3]) / 2.0,
        0.0,
    ];
    let q = [
        (-al[0] + al[2] + be[1] - be[3]) / 2.0,
        (al[0] - al[2] + be[1] - be[3]) / 2.0,
        -al[3] - be[0],
    ];
    let s = [
        (-al[0] - al[2] + be[1] + be[3]) / 2.0,
        (al[0] + al[2] + be[1] + be[3]) / 2.0,
        al[3] - be[0],
    ];
    (p, q, s)
}

/// The forward map (used in tests): horizontal-lift cubic coefficients from
/// psi components, derived from the connection form and the lift formula.
pub fn lifts_from_psi(p: &[f64; 3], q: &[f64; 3], s: &[f64; 3]) -> ([f64; 4], [f64; 4]) {
    let al = [
        (-s[0] - q[0] + s[1] + q[1]) / 2.0,
        (s[2] + q[2]) / 2.0 + p[0] - p[1],
        -p[2] + (-s[0] + q[0] + s[1] - q[1]) / 2.0,
        (s[2] - q[2]) / 2.0,
    ];
    let be = [
        -(s[2] + q[2]) / 2.0,
        (s[0] + q[0] + s[1] + q[1]) / 2.0 + p[2],
        -(p[0] + p[1]) - (s[2] - q[2]) / 2.0,
        (s[0] - q[0] + s[1] - q[1]) / 2.0,
    ];
    (al, be)
}

/// Assembles the connection at interior nodes of a reconstructed grid.
/// Returns the per-node connection (None on the margin) and the worst
/// mu-relation violation.
pub fn assemble_connection(
    cfg: &ReconstructConfig,
    nodes: &[FieldNode],
) -> (Vec<Option<ConnectionNode>>, f64) {
    let (nx, nt) = (cfg.nx, cfg.nt);
    let h = cfg.fd_step;
    let mut conn: Vec<Option<ConnectionNode>> = vec![None; nodes.len()];
    let mut worst_mu = 0.0f64;
    let idx = |i: usize, j: usize, k: usize| cfg.index(i, j, k);
    for i in 1..nx - 1 {
        for j in 1..nx - 1 {
            for k in 1..nt - 1 {
                let node = &nodes[idx(i, j, k)];
                let ds = [
                    (nodes[idx(i + 1, j, k)].coframe - nodes[idx(i - 1, j, k)].coframe)
                        / (2.0 * h),
                    (nodes[idx(i, j + 1, k)].coframe - nodes[idx(i, j - 1, k)].coframe)
                        / (2.0 * h),
                    (nodes[idx(i, j, k + 1)].coframe - nodes[idx(i, j, k - 1)].coframe)
                        / (2.0 * h),
                ];
                let dg = [
                    (nodes[idx(i + 1, j, k)].g - nodes[idx(i - 1, j, k)].g) / (2.0 * h),
                    (nodes[idx(i, j + 1, k)].g - nodes[idx(i, j - 1, k)].g) / (2.0 * h),
                    (nodes[idx(i, j, k + 1)].g - nodes[idx(i, j, k - 1)].g) / (2.0 * h),
                ];
                let cn = connection_at(node, &ds, &dg);
                worst_mu = worst_mu.max(cn.mu_residual);
                conn[idx(i, j, k)] = Some(cn);
            }
        }
    }
    (conn, worst_mu)
}

/// The pointwise connection assembly given coframe and metric derivatives.
pub fn connection_at(
    node: &FieldNode,
    ds: &[Matrix3<f64>; 3],
    dg: &[Matrix3<f64>; 3],
) -> ConnectionNode {
    let s = &node.coframe;
    let e = &node.frame;
    // structure 2-forms (de^i)_{kl} on the frame pairs (2,3), (3,1), (1,2)
    let pairs = [(1usize, 2usize), (2, 0), (0, 1)];
    let mut de = [[0.0f64; 3]; 3]; // de[i][pair]
    for i in 0..3 {
        for (pi, &(kf, lf)) in pairs.iter().enumerate() {
            let mut acc = 0.0;
            for b in 0..3 {
                for a in 0..3 {
                    acc += ds[b][(i, a)] * (e[(b, kf)] * e[(a, lf)] - e[(b, lf)] * e[(a, kf)]);
                }
            }
            de[i][pi] = acc;
        }
    }
    let (p0, q0, s0) = psi_from_lifts(&node.alphas, &node.betas);
    // mu_{ij} = mu_{ij}^l lambda_l including the coframe exterior derivatives
    let mu23 = [q0[1] - p0[2] + de[0][0], s0[1] + de[1][0], s0[2] + de[2][0]];
    let mu31 = [-q0[0] + de[0][1], p0[2] - s0[0] + de[1][1], q0[2] + de[2][1]];
    let mu12 = [p0[0] + de[0][2], -p0[1] + de[1][2], -q0[1] - s0[0] + de[2][2]];
    // paper-proved identities; violations signal an upstream bug
    let mu_residual = [
        (-mu23[0] - mu31[1]).abs(),
        (mu31[1] - mu12[2]).abs(),
        (mu12[1] + mu31[2]).abs(),
        (mu23[2] + mu12[0]).abs(),
        (mu31[0] + mu23[1]).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);

    let f = 0.5 * mu12[2];
    let phi = [mu31[2], mu12[0], mu23[1]];
    let pf = [p0[0], p0[1], p0[2] - f];
    let qf = [q0[0], q0[1] + f, q0[2]];
    let sf = [s0[0] + f, s0[1], s0[2]];

    let mut gamma_frame = [[[0.0f64; 3]; 3]; 3];
    for k in 0..3 {
        gamma_frame[0][0][k] = phi[k];
        gamma_frame[0][1][k] = pf[k];
        gamma_frame[0][2][k] = qf[k];
        gamma_frame[1][0][k] = pf[k];
        gamma_frame[1][1][k] = phi[k];
        gamma_frame[1][2][k] = sf[k];
        gamma_frame[2][0][k] = qf[k];
        gamma_frame[2][1][k] = -sf[k];
        gamma_frame[2][2][k] = phi[k];
    }

    // coordinate Christoffels: G^c_{ba} = E^c_i (d_a S^i_b + G^i_{jk} S^j_b S^k_a)
    let mut gamma_coord = [[[0.0f64; 3]; 3]; 3];
    let mut torsion_residual = 0.0f64;
    for c in 0..3 {
        for b in 0..3 {
            for a in 0..3 {
                let mut acc = 0.0;
                for i in 0..3 {
                    let mut inner = ds[a][(i, b)];
                    for jf in 0..3 {
                        for kf in 0..3 {
                            inner += gamma_frame[i][jf][kf] * s[(jf, b)] * s[(kf, a)];
                        }
                    }
                    acc += e[(c, i)] * inner;
                }
                gamma_coord[c][b][a] = acc;
            }
        }
    }
    for c in 0..3 {
        for b in 0..3 {
            for a in 0..b {
                torsion_residual =
                    torsion_residual.max((gamma_coord[c][b][a] - gamma_coord[c][a][b]).abs());
            }
        }
    }

    // Weyl form a = -2 phi in coordinates
    let mut a_form = [0.0f64; 3];
    for bcoord in 0..3 {
        a_form[bcoord] = -2.0 * (0..3).map(|kf| phi[kf] * s[(kf, bcoord)]).sum::<f64>();
    }

    // compatibility: d_a g_{bc} - G^d_{ba} g_{dc} - G^d_{ca} g_{bd} = a_a g_{bc}
    let mut compat_residual = 0.0f64;
    for a in 0..3 {
        for b in 0..3 {
            for cc in 0..3 {
                let mut v = dg[a][(b, cc)];
                for d in 0..3 {
                    v -= gamma_coord[d][b][a] * node.g[(d, cc)];
                    v -= gamma_coord[d][cc][a] * node.g[(b, d)];
                }
                v -= a_form[a] * node.g[(b, cc)];
                compat_residual = compat_residual.max(v.abs());
            }
        }
    }

    ConnectionNode {
        gamma_frame,
        gamma_coord,
        a_form,
        f_scalar: f,
        mu_residual,
        torsion_residual,
        compat_residual,
    }
}

/// Einstein-Weyl residual at margin-2 interior nodes by finite-differencing
/// the coordinate Christoffels: || R_(bd) - Lambda g_bd ||_F / (1 + |Lambda|).
pub fn ew_residuals(
    cfg: &ReconstructConfig,
    nodes: &[FieldNode],
    conn: &[Option<ConnectionNode>],
) -> Vec<Option<f64>> {
    let (nx, nt) = (cfg.nx, cfg.nt);
    let h = cfg.fd_step;
    let idx = |i: usize, j: usize, k: usize| cfg.index(i, j, k);
    let mut out: Vec<Option<f64>> = vec![None; nodes.len()];
    if nx < 5 || nt < 5 {
        return out;
    }
    for i in 2..nx - 2 {
        for j in 2..nx - 2 {
            for k in 2..nt - 2 {
                let g = &nodes[idx(i, j, k)].g;
                let gamma = |ii: usize, jj: usize, kk: usize| -> &[[[f64; 3]; 3]; 3] {
                    &conn[idx(ii, jj, kk)].as_ref().expect("interior").gamma_coord
                };
                let g0 = gamma(i, j, k);
                let diff = |pl: &[[[f64; 3]; 3]; 3], mi: &[[[f64; 3]; 3]; 3]| {
                    let mut out = [[[0.0f64; 3]; 3]; 3];
                    for c in 0..3 {
                        for b in 0..3 {
                            for a in 0..3 {
                                out[c][b][a] = (pl[c][b][a] - mi[c][b][a]) / (2.0 * h);
                            }
                        }
                    }
                    out
                };
                let dgam = [
                    diff(gamma(i + 1, j, k), gamma(i - 1, j, k)),
                    diff(gamma(i, j + 1, k), gamma(i, j - 1, k)),
                    diff(gamma(i, j, k + 1), gamma(i, j, k - 1)),
                ];
                // R^c_{b a d} = d_a G^c_{bd} - d_d G^c_{ba}
                //             + G^c_{ea} G^e_{bd} - G^c_{ed} G^e_{ba};
                // Ricci_{bd} = R^a_{b a d}.
                let mut ricci = Matrix3::<f64>::zeros();
                for b in 0..3 {
                    for d in 0..3 {
                        let mut acc = 0.0;
                        for a in 0..3 {
                            let mut r = dgam[a][a][b][d] - dgam[d][a][b][a];
                            for ee in 0..3 {
                                r += g0[a][ee][a] * g0[ee][b][d] - g0[a][ee][d] * g0[ee][b][a];
                            }
                            acc += r;
                        }
                        ricci[(b, d)] = acc;
                    }
                }
                let sym = 0.5 * (ricci + ricci.transpose());
                let ginv = &nodes[idx(i, j, k)].q;
                let lambda_scalar = (ginv * sym).trace() / 3.0;
                let dev = (sym - lambda_scalar * g).norm() / (1.0 + lambda_scalar.abs());
                out[idx(i, j, k)] = Some(dev);
            }
        }
    }
    out
}

/// Full reconstruction over the configured field box.
pub fn reconstruct_field(
    emb: &EmbeddingN,
    scfg: &SolverConfig,
    rcfg: &ReconstructConfig,
) -> Result<MetricConnectionField, ReconstructError> {
    let coords: Vec<(usize, usize, usize)> = (0..rcfg.nx)
        .flat_map(|i| (0..rcfg.nx).flat_map(move |j| (0..rcfg.nt).map(move |k| (i, j, k))))
        .collect();
    let results: Vec<Result<(usize, FieldNode), ReconstructError>> = coords
        .par_iter()
        .map(|&(i, j, k)| {
            let grid = ThetaGrid::new(scfg.m_modes);
            let node = reconstruct_node(
                emb,
                &grid,
                scfg,
                rcfg,
                rcfg.node_lambda(i, j),
                rcfg.node_t(k),
            )?;
            Ok((rcfg.index(i, j, k), node))
        })
        .collect();
    let mut nodes: Vec<Option<FieldNode>> = vec![None; coords.len()];
    for r in results {
        let (idx, node) = r?;
        nodes[idx] = Some(node);
    }
    let nodes: Vec<FieldNode> = nodes.into_iter().map(|n| n.unwrap()).collect();
    let (conn, _) = assemble_connection(rcfg, &nodes);
    let ew = ew_residuals(rcfg, &nodes, &conn);
    Ok(MetricConnectionField {
        cfg: rcfg.clone(),
        nodes,
        conn,
        ew,
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FieldResiduals {
    pub cone: f64,
    pub frame: f64,
    pub lift: f64,
    pub mu: f64,
    pub torsion: f64,
    pub compat: f64,
    pub ew: f64,
}

impl MetricConnectionField {
    pub fn worst_residuals(&self) -> FieldResiduals {
        let mut r = FieldResiduals::default();
        for n in &self.nodes {
            r.cone = r.cone.max(n.cone_residual);
            r.frame = r.frame.max(n.frame_residual);
            r.lift = r.lift.max(n.lift_residual);
        }
        for c in self.conn.iter().flatten() {
            r.mu = r.mu.max(c.mu_residual);
            r.torsion = r.torsion.max(c.torsion_residual);
            r.compat = r.compat.max(c.compat_residual);
        }
        for e in self.ew.iter().flatten() {
            r.ew = r.ew.max(*e);
        }
        r
    }
}

/// Analytic standard-model metric at (lambda, t): the pullback of
/// |dB|^2 - dA dC through the boundary-circle parameters, det-normalized
/// to -1. Differentiation is by central differences of the closed forms.
pub fn standard_metric_oracle(lambda: C64, t: f64) -> Matrix3<f64> {
    let abc_full = |lam: C64, tt: f64| -> [f64; 4] {
        let params = StandardDiskParams::new(
            PointCP1 {
                chart: Chart::Zero,
                value: lam,
            },
            tt,
        );
        let c = crate::standard::std_boundary_circle(params);
        [c.a, c.b.re, c.b.im, c.c]
    };
    let h = 1e-5;
    let mut jac = [[0.0f64; 3]; 4];
    for (col, (dl, dt)) in [
        (C64::new(h, 0.0), 0.0),
        (C64::new(0.0, h), 0.0),
        (C64::new(0.0, 0.0), h),
    ]
    .into_iter()
    .enumerate()
    {
        let plus = abc_full(lambda + dl, t + dt);
        let minus = abc_full(lambda - dl, t - dt);
        for row in 0..4 {
            jac[row][col] = (plus[row] - minus[row]) / (2.0 * h);
        }
    }
    // g = |dB|^2 - dA dC
    let mut g = Matrix3::<f64>::zeros();
    for a in 0..3 {
        for b in 0..3 {
            g[(a, b)] = jac[1][a] * jac[1][b] + jac[2][a] * jac[2][b]
                - 0.5 * (jac[0][a] * jac[3][b] + jac[0][b] * jac[3][a]);
        }
    }
    let det = g.determinant();
    assert!(det < 0.0, "standard metric oracle lost its signature");
    g * (-1.0 / det).powf(1.0 / 3.0)
}
