//! Geodesics of the reconstructed Weyl connection and the incidence sets of
//! the disk family (null surfaces S_p, time-like curves C_p, null curves
//! C_{p,v}, closed space-like curves C_{p,q}), plus the cross-validation
//! binding the two descriptions of the same geodesics.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cp1::{chordal, Chart, PointCP1, PointZ};
use crate::embedding::EmbeddingN;
use crate::error::{GeodesicError, SolveError};
use crate::fourier::ThetaGrid;
use crate::reconstruct::MetricConnectionField;
use crate::solver::{solve_disk, SolvedDisk, SolverConfig};
use crate::standard::std_line_through;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalType {
    Timelike,
    Spacelike,
    Null,
}

/// Sign of g(v, v) with a relative classification band for null.
pub fn classify(g: &Matrix3<f64>, v: &Vector3<f64>, band: f64) -> Result<CausalType, GeodesicError> {
    let n2 = v.norm_squared();
    if n2 == 0.0 {
        return Err(GeodesicError::ZeroVector);
    }
    let gv = (v.transpose() * g * v)[0];
    if gv.abs() < band * n2 {
        Ok(CausalType::Null)
    } else if gv < 0.0 {
        Ok(CausalType::Timelike)
    } else {
        Ok(CausalType::Spacelike)
    }
}

/// Trilinear interpolation of the connection and metric over the field box.
pub struct FieldInterp<'a> {
    pub field: &'a MetricConnectionField,
}

impl<'a> FieldInterp<'a> {
    pub fn new(field: &'a MetricConnectionField) -> Self {
        FieldInterp { field }
    }

    /// Domain where a full interpolation cell of connection nodes exists.
    pub fn contains(&self, x: &[f64; 3]) -> bool {
        self.locate(x).is_some()
    }

    fn locate(&self, x: &[f64; 3]) -> Option<(usize, usize, usize, f64, f64, f64)> {
        let cfg = &self.field.cfg;
        let h = cfg.fd_step;
        let half_x = (cfg.nx - 1) as f64 / 2.0;
        let half_t = (cfg.nt - 1) as f64 / 2.0;
        let fx = (x[0] - cfg.center_lambda_re) / h + half_x;
        let fy = (x[1] - cfg.center_lambda_im) / h + half_x;
        let ft = (x[2] - cfg.center_t) / h + half_t;
        let (i, j, k) = (fx.floor() as i64, fy.floor() as i64, ft.floor() as i64);
        // connection nodes live on margin-1 interior; need the full cell
        let lo = 1i64;
        if i < lo
            || j < lo
            || k < lo
            || i + 1 > (cfg.nx - 2) as i64
            || j + 1 > (cfg.nx - 2) as i64
            || k + 1 > (cfg.nt - 2) as i64
        {
            return None;
        }
        Some((
            i as usize,
            j as usize,
            k as usize,
            fx - i as f64,
            fy - j as f64,
            ft - k as f64,
        ))
    }

    pub fn gamma_at(&self, x: &[f64; 3]) -> Option<[[[f64; 3]; 3]; 3]> {
        let (i, j, k, wx, wy, wt) = self.locate(x)?;
        let cfg = &self.field.cfg;
        let mut out = [[[0.0f64; 3]; 3]; 3];
        for (di, wi) in [(0usize, 1.0 - wx), (1, wx)] {
            for (dj, wj) in [(0usize, 1.0 - wy), (1, wy)] {
                for (dk, wk) in [(0usize, 1.0 - wt), (1, wt)] {
                    let w = wi * wj * wk;
                    let g = self.field.conn[cfg.index(i + di, j + dj, k + dk)]
                        .as_ref()?
                        .gamma_coord;
                    for c in 0..3 {
                        for b in 0..3 {
                            for a in 0..3 {
                                out[c][b][a] += w * g[c][b][a];
                            }
                        }
                    }
                }
            }
        }
        Some(out)
    }

    pub fn metric_at(&self, x: &[f64; 3]) -> Option<Matrix3<f64>> {
        let (i, j, k, wx, wy, wt) = self.locate(x)?;
        let cfg = &self.field.cfg;
        let mut out = Matrix3::zeros();
        for (di, wi) in [(0usize, 1.0 - wx), (1, wx)] {
            for (dj, wj) in [(0usize, 1.0 - wy), (1, wy)] {
                for (dk, wk) in [(0usize, 1.0 - wt), (1, wt)] {
                    out += wi * wj * wk * self.field.nodes[cfg.index(i + di, j + dj, k + dk)].g;
                }
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicTrace {
    /// (position, velocity) samples along the affine parameter.
    pub samples: Vec<([f64; 3], [f64; 3])>,
    pub causal: CausalType,
    /// Where the trace left the field domain, if it did.
    pub exit: Option<[f64; 3]>,
    pub step_rejections: usize,
}

/// Classical 4th-order integration of the geodesic spray
/// dx/ds = y, dy/ds = -Gamma^c_{ab} y^a y^b, with step-halving control.
pub fn integrate_geodesic(
    field: &MetricConnectionField,
    x0: [f64; 3],
    v0: [f64; 3],
    length: f64,
    step: f64,
    band: f64,
) -> Result<GeodesicTrace, GeodesicError> {
    let interp = FieldInterp::new(field);
    let g0 = interp
        .metric_at(&x0)
        .ok_or(GeodesicError::LeftDomain(x0[0], x0[1], x0[2]))?;
    let causal = classify(&g0, &Vector3::from(v0), band)?;

    let accel = |x: &[f64; 3], y: &[f64; 3]| -> Option<[f64; 3]> {
        let gam = interp.gamma_at(x)?;
        let mut a = [0.0f64; 3];
        for c in 0..3 {
            for bi in 0..3 {
                for ai in 0..3 {
                    a[c] -= gam[c][bi][ai] * y[bi] * y[ai];
                }
            }
        }
        Some(a)
    };
    let rk4 = |x: &[f64; 3], y: &[f64; 3], h: f64| -> Option<([f64; 3], [f64; 3])> {
        let add = |p: &[f64; 3], q: &[f64; 3], s: f64| {
            [p[0] + s * q[0], p[1] + s * q[1], p[2] + s * q[2]]
        };
        let k1x = *y;
        let k1y = accel(x, y)?;
        let k2x = add(y, &k1y, h / 2.0);
        let k2y = accel(&add(x, &k1x, h / 2.0), &add(y, &k1y, h / 2.0))?;
        let k3x = add(y, &k2y, h / 2.0);
        let k3y = accel(&add(x, &k2x, h / 2.0), &add(y, &k2y, h / 2.0))?;
        let k4x = add(y, &k3y, h);
        let k4y = accel(&add(x, &k3x, h), &add(y, &k3y, h))?;
        let mut xn = *x;
        let mut yn = *y;
        for c in 0..3 {
            xn[c] += h / 6.0 * (k1x[c] + 2.0 * k2x[c] + 2.0 * k3x[c] + k4x[c]);
            yn[c] += h / 6.0 * (k1y[c] + 2.0 * k2y[c] + 2.0 * k3y[c] + k4y[c]);
        }
        Some((xn, yn))
    };

    let mut samples = vec![(x0, v0)];
    let mut x = x0;
    let mut y = v0;
    let mut s = 0.0;
    let mut h = step;
    let mut rejections = 0usize;
    let mut exit = None;
    let err_tol = 1e-10;
    while s < length {
        let h_eff = h.min(length - s);
        let full = rk4(&x, &y, h_eff);
        let half = rk4(&x, &y, h_eff / 2.0)
            .and_then(|(xm, ym)| rk4(&xm, &ym, h_eff / 2.0));
        match (full, half) {
            (Some((xf, _)), Some((xh, yh))) => {
                let err = ((xf[0] - xh[0]).powi(2)
                    + (xf[1] - xh[1]).powi(2)
                    + (xf[2] - xh[2]).powi(2))
                .sqrt();
                if err > err_tol && h_eff > 1e-5 {
                    h = h_eff / 2.0;
                    rejections += 1;
                    continue;
                }
                x = xh;
                y = yh;
                s += h_eff;
                samples.push((x, y));
                if err < err_tol / 32.0 {
                    h = (h_eff * 2.0).min(step);
                }
            }
            _ => {
                exit = Some(x);
                break;
            }
        }
    }
    Ok(GeodesicTrace {
        samples,
        causal,
        exit,
        step_rejections: rejections,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IncidenceKind {
    SP,
    CP,
    CPV,
    CPQ,
}

/// A computed incidence set: polyline(s) of parameter points.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IncidenceSet {
    pub kind: IncidenceKind,
    /// Rows of (lambda, t) points; one row for curves, t-rows for surfaces.
    pub rows: Vec<Vec<(PointCP1, f64)>>,
    pub closed: bool,
    pub closure_gap: f64,
    /// Worst defining-membership residual over stored points.
    pub membership_residual: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeodesicConfig {
    pub incidence_tol: f64,
    pub closure_tol: f64,
    pub classification_band: f64,
    pub directions: usize,
    pub max_newton: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig {
            incidence_tol: 1e-8,
            closure_tol: 1e-5,
            classification_band: 1e-10,
            directions: 48,
            max_newton: 40,
        }
    }
}

/// Incidence machinery over one embedding: every equation is posed in the
/// frame transported by the current iterate's own transporter, so all
/// quantities stay O(1).
pub struct IncidenceLab<'a> {
    pub emb: &'a EmbeddingN,
    pub scfg: &'a SolverConfig,
    pub grid: &'a ThetaGrid,
    pub gcfg: GeodesicConfig,
}

struct NodeState<'a> {
    sol: SolvedDisk<'a>,
    dphi: [crate::solver::VariationSeries; 3],
}

impl<'a> IncidenceLab<'a> {
    pub fn new(emb: &'a EmbeddingN, scfg: &'a SolverConfig, grid: &'a ThetaGrid) -> Self {
        IncidenceLab {
            emb,
            scfg,
            grid,
            gcfg: GeodesicConfig::default(),
        }
    }

    fn solve_at(
        &self,
        lambda: PointCP1,
        t: f64,
        warm: Option<&crate::fourier::FourierSeries>,
    ) -> Result<NodeState<'a>, SolveError> {
        let sol = solve_disk(self.emb, self.grid, self.scfg, lambda, t, warm)?;
        let dphi = [
            sol.variation_node_param(0)?,
            sol.variation_node_param(1)?,
            sol.variation_node_param(2)?,
        ];
        Ok(NodeState { sol, dphi })
    }

    /// C_p for p off N: for each t the unique disk with p in its interior.
    /// Unknowns (lambda, z) solving (Phi1(z), Phi2(z)) = transported p.
    pub fn incidence_c_p(
        &self,
        p: PointZ,
        ts: &[f64],
    ) -> Result<IncidenceSet, GeodesicError> {
        let margin = 10.0 * self.gcfg.incidence_tol;
        if self.emb.graph_residual(p) < margin {
            return Err(GeodesicError::BadAnchor(format!(
                "p is within {margin:.1e} of N"
            )));
        }
        let p1 = p.first.to_c();
        let p2c = p.second;
        let mut rows = vec![Vec::with_capacity(ts.len())];
        let mut worst = 0.0f64;
        let mut seed_lambda: Option<PointCP1> = None;
        let mut warm: Option<crate::fourier::FourierSeries> = None;
        for &t in ts {
            // standard-model seed unless continuing
            let lam0 = match &seed_lambda {
                Some(l) => *l,
                None => {
                    let l = std_line_through(p1, p2c.to_c(), t, C64::new(0.1, 0.1))
                        .or_else(|| std_line_through(p1, p2c.to_c(), t, -p1))
                        .ok_or_else(|| {
                            GeodesicError::FoliationFailure(t, "no standard seed".into())
                        })?;
                    PointCP1::from_c(l)
                }
            };
            let (lam, st) = self.newton_point_on_disk(lam0, t, p, warm.as_ref())?;
            // residual: transported target vs boundary/interior value
            let tp1 = st.sol.nt.fwd.apply_point(p.first);
            let z = invert_first(&st.sol, tp1.to_c())
                .ok_or_else(|| GeodesicError::FoliationFailure(t, "inversion stalled".into()))?;
            if z.norm() > 1.0 - 1e-7 {
                return Err(GeodesicError::FoliationFailure(
                    t,
                    format!("p not interior (|z| = {})", z.norm()),
                ));
            }
            let val = st.sol.point_at(z);
            worst = worst.max(crate::cp1::dist_z(val, p));
            warm = Some(st.sol.u.clone());
            seed_lambda = Some(lam);
            rows[0].push((lam, t));
        }
        Ok(IncidenceSet {
            kind: IncidenceKind::CP,
            rows,
            closed: false,
            closure_gap: f64::INFINITY,
            membership_residual: worst,
        })
    }

    /// Newton for the unique lambda at level t with p inside the disk.
    fn newton_point_on_disk(
        &self,
        lam0: PointCP1,
        t: f64,
        p: PointZ,
        warm: Option<&crate::fourier::FourierSeries>,
    ) -> Result<(PointCP1, NodeState<'a>), GeodesicError> {
        let mut lam = lam0;
        let mut warm_u = warm.cloned();
        for _ in 0..self.gcfg.max_newton {
            let st = self
                .solve_at(lam, t, warm_u.as_ref())
                .map_err(|e| GeodesicError::FoliationFailure(t, e.to_string()))?;
            warm_u = Some(st.sol.u.clone());
            // target: transported p
            let tp1 = st.sol.nt.fwd.apply_point(p.first).to_c();
            let tp2 = st
                .sol
                .nt
                .fwd
                .conj_transport()
                .apply_point(p.second)
                .to_c();
            let z = match invert_first(&st.sol, tp1) {
                Some(z) => z,
                None => {
                    return Err(GeodesicError::FoliationFailure(
                        t,
                        "first-component inversion failed".into(),
                    ))
                }
            };
            // residual: second component mismatch at z
            let r = st.sol.phi2.eval_holomorphic(z) - tp2;
            if r.norm() < self.gcfg.incidence_tol {
                return Ok((lam, st));
            }
            // d/d(lambda params) of [Phi2(z(lam)) - tp2] where z(lam) solves
            // Phi1(z) = tp1:
            //   dz = (dT(p1) - dPhi1(z)) / Phi1'(z),
            //   dr = dPhi2(z) + Phi2'(z) dz - dT2(p2).
            let f1p = st.sol.phi1.eval_holomorphic_deriv(z);
            let f2p = st.sol.phi2.eval_holomorphic_deriv(z);
            let mut cols = [C64::new(0.0, 0.0); 2];
            for k in 0..2 {
                let dt1 = st.sol.nt.fwd.apply_dot(&st.sol.nt.d_fwd[k], tp_pre(&st.sol, p, true));
                let dt2 = st
                    .sol
                    .nt
                    .fwd
                    .conj_transport()
                    .apply_dot(&st.sol.nt.d_fwd[k].conj_transport(), tp_pre(&st.sol, p, false));
                let dphi1 = st.dphi[k].dphi1.eval_holomorphic(z);
                let dphi2 = st.dphi[k].dphi2.eval_holomorphic(z);
                let dz = (dt1 - dphi1) / f1p;
                cols[k] = dphi2 + f2p * dz - dt2;
            }
            // 2x2 real solve for (d Re lam, d Im lam)
            let a = cols[0];
            let b = cols[1];
            let det = a.re * b.im - a.im * b.re;
            if det.abs() < 1e-14 {
                return Err(GeodesicError::FoliationFailure(t, "singular step".into()));
            }
            let dx = (r.re * b.im - r.im * b.re) / det;
            let dy = (a.re * r.im - a.im * r.re) / det;
            lam = step_lambda(lam, -dx, -dy);
        }
        Err(GeodesicError::FoliationFailure(t, "newton stalled".into()))
    }

    /// S_p for p on N (given by its first coordinate): t-rows of the circle
    /// of disks through p, parametrized by the boundary angle theta0.
    pub fn incidence_s_p(
        &self,
        p_first: PointCP1,
        ts: &[f64],
        n_angles: usize,
    ) -> Result<IncidenceSet, GeodesicError> {
        let p = self.emb.n_point(p_first);
        if self.emb.graph_residual(p) > self.gcfg.incidence_tol {
            return Err(GeodesicError::BadAnchor("p is not on N".into()));
        }
        let mut rows = Vec::with_capacity(ts.len());
        let mut worst = 0.0f64;
        for &t in ts {
            let mut row = Vec::with_capacity(n_angles);
            let mut warm: Option<crate::fourier::FourierSeries> = None;
            let mut seed: Option<PointCP1> = None;
            for a in 0..n_angles {
                let th0 = a as f64 * std::f64::consts::TAU / n_angles as f64;
                let lam0 = match &seed {
                    Some(l) => *l,
                    None => standard_boundary_seed(p_first, t, th0)
                        .ok_or_else(|| GeodesicError::FoliationFailure(t, "no seed".into()))?,
                };
                let (lam, st, res) =
                    self.newton_boundary_through(lam0, t, th0, p_first, warm.as_ref())?;
                worst = worst.max(res);
                warm = Some(st.sol.u.clone());
                seed = Some(lam);
                row.push((lam, t));
            }
            rows.push(row);
        }
        Ok(IncidenceSet {
            kind: IncidenceKind::SP,
            rows,
            closed: true,
            closure_gap: 0.0,
            membership_residual: worst,
        })
    }

    /// Newton in lambda for Phi1(theta0) = T(p1) at fixed (t, theta0).
    fn newton_boundary_through(
        &self,
        lam0: PointCP1,
        t: f64,
        th0: f64,
        p_first: PointCP1,
        warm: Option<&crate::fourier::FourierSeries>,
    ) -> Result<(PointCP1, NodeState<'a>, f64), GeodesicError> {
        let mut lam = lam0;
        let mut warm_u = warm.cloned();
        for _ in 0..self.gcfg.max_newton {
            let st = self
                .solve_at(lam, t, warm_u.as_ref())
                .map_err(|e| GeodesicError::FoliationFailure(t, e.to_string()))?;
            warm_u = Some(st.sol.u.clone());
            let w = p_first.value_in(lam.chart);
            if !w.re.is_finite() || w.norm() > 1e8 {
                return Err(GeodesicError::FoliationFailure(t, "anchor at chart pole".into()));
            }
            let target = st.sol.nt.fwd.apply(w);
            let r = st.sol.phi1.eval(th0) - target;
            if r.norm() < self.gcfg.incidence_tol {
                // audit: the physical boundary point equals p
                let bp = st.sol.point_at((C64::new(0.0, 1.0) * th0).exp());
                let res = chordal(bp.first, p_first);
                return Ok((lam, st, res));
            }
            let mut cols = [C64::new(0.0, 0.0); 2];
            for k in 0..2 {
                let dphi1 = st.dphi[k].dphi1.eval(th0);
                let dt1 = st.sol.nt.fwd.apply_dot(&st.sol.nt.d_fwd[k], w);
                cols[k] = dphi1 - dt1;
            }
            let (a, b) = (cols[0], cols[1]);
            let det = a.re * b.im - a.im * b.re;
            if det.abs() < 1e-14 {
                return Err(GeodesicError::FoliationFailure(t, "singular step".into()));
            }
            let dx = (r.re * b.im - r.im * b.re) / det;
            let dy = (a.re * r.im - a.im * r.re) / det;
            lam = step_lambda(lam, -dx, -dy);
        }
        Err(GeodesicError::FoliationFailure(t, "newton stalled".into()))
    }

    /// C_{p,v}: for each t the disk through p whose boundary tangent at p is
    /// positively parallel to v = e^{i psi} in the first-factor chart.
    /// Unknowns (lambda, theta0).
    pub fn incidence_c_pv(
        &self,
        p_first: PointCP1,
        psi: f64,
        ts: &[f64],
    ) -> Result<IncidenceSet, GeodesicError> {
        let mut rows = vec![Vec::with_capacity(ts.len())];
        let mut worst = 0.0f64;
        let mut cont: Option<(PointCP1, f64)> = None;
        let mut warm: Option<crate::fourier::FourierSeries> = None;
        for &t in ts {
            let (lam0, th0_seed) = match cont {
                Some(c) => c,
                None => standard_adapted_seed(p_first, psi, t)
                    .ok_or_else(|| GeodesicError::FoliationFailure(t, "no seed".into()))?,
            };
            let (lam, th0, st, res) =
                self.newton_adapted(lam0, th0_seed, t, p_first, psi, warm.as_ref())?;
            worst = worst.max(res);
            warm = Some(st.sol.u.clone());
            cont = Some((lam, th0));
            rows[0].push((lam, t));
        }
        Ok(IncidenceSet {
            kind: IncidenceKind::CPV,
            rows,
            closed: false,
            closure_gap: f64::INFINITY,
            membership_residual: worst,
        })
    }

    /// Newton for (lambda, theta0): Phi1(theta0) = T(p1) and the boundary
    /// tangent at theta0 aligned with (and positively parallel to) T_* v.
    #[allow(clippy::too_many_arguments)]
    fn newton_adapted(
        &self,
        lam0: PointCP1,
        th0_seed: f64,
        t: f64,
        p_first: PointCP1,
        psi: f64,
        warm: Option<&crate::fourier::FourierSeries>,
    ) -> Result<(PointCP1, f64, NodeState<'a>, f64), GeodesicError> {
        let mut lam = lam0;
        let mut th0 = th0_seed;
        let mut warm_u = warm.cloned();
        let vdir = (C64::new(0.0, 1.0) * psi).exp();
        for _ in 0..self.gcfg.max_newton {
            let st = self
                .solve_at(lam, t, warm_u.as_ref())
                .map_err(|e| GeodesicError::FoliationFailure(t, e.to_string()))?;
            warm_u = Some(st.sol.u.clone());
            let w = p_first.value_in(lam.chart);
            let target = st.sol.nt.fwd.apply(w);
            let wdir = st.sol.nt.fwd.deriv(w) * vdir;
            let vel = st.sol.phi1.derivative();
            let r12 = st.sol.phi1.eval(th0) - target;
            let velv = vel.eval(th0);
            let r3 = (wdir.conj() * velv).im;
            if r12.norm() < self.gcfg.incidence_tol
                && r3.abs() < self.gcfg.incidence_tol
            {
                if (wdir.conj() * velv).re <= 0.0 {
                    return Err(GeodesicError::FoliationFailure(
                        t,
                        "converged to the anti-adapted branch".into(),
                    ));
                }
                let bp = st.sol.point_at((C64::new(0.0, 1.0) * th0).exp());
                let res = chordal(bp.first, p_first);
                return Ok((lam, th0, st, res));
            }
            // 3x3 real Newton on (Re lam, Im lam, theta0)
            let accel = vel.derivative().eval(th0);
            let mut jac = Matrix3::<f64>::zeros();
            for k in 0..2 {
                let dphi1 = st.dphi[k].dphi1.eval(th0);
                let dt1 = st.sol.nt.fwd.apply_dot(&st.sol.nt.d_fwd[k], w);
                let c12 = dphi1 - dt1;
                jac[(0, k)] = c12.re;
                jac[(1, k)] = c12.im;
                let dvel: C64 = st.dphi[k].dphi1.derivative().eval(th0);
                let dwdir = st.sol.nt.fwd.deriv_dot(&st.sol.nt.d_fwd[k], w) * vdir;
                jac[(2, k)] = (dwdir.conj() * velv).im + (wdir.conj() * dvel).im;
            }
            jac[(0, 2)] = velv.re;
            jac[(1, 2)] = velv.im;
            jac[(2, 2)] = (wdir.conj() * accel).im;
            let rhs = Vector3::new(r12.re, r12.im, r3);
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| GeodesicError::FoliationFailure(t, "singular step".into()))?;
            lam = step_lambda(lam, -delta[0], -delta[1]);
            th0 -= delta[2];
        }
        Err(GeodesicError::FoliationFailure(t, "newton stalled".into()))
    }

    /// C_{p,q}: sweep of adapted directions at p, each solved for the unique
    /// member whose boundary also passes through q. Unknowns
    /// (lambda, theta0, theta1, t); closed iff the sweep returns to its start.
    pub fn incidence_c_pq(
        &self,
        p_first: PointCP1,
        q_first: PointCP1,
    ) -> Result<IncidenceSet, GeodesicError> {
        let nd = self.gcfg.directions;
        let mut pts: Vec<(PointCP1, f64)> = Vec::with_capacity(nd + 1);
        let mut worst = 0.0f64;
        let mut cont: Option<(PointCP1, f64, f64, f64)> = None;
        let mut warm: Option<crate::fourier::FourierSeries> = None;
        for d in 0..=nd {
            let psi = d as f64 * std::f64::consts::TAU / nd as f64;
            let seed = match cont {
                Some(c) => c,
                None => standard_two_point_seed(p_first, q_first, psi)
                    .ok_or_else(|| GeodesicError::FoliationFailure(0.0, "no pencil seed".into()))?,
            };
            let (lam, th0, th1, t, st, res) =
                self.newton_two_point(seed, p_first, q_first, psi, warm.as_ref())?;
            worst = worst.max(res);
            warm = Some(st.sol.u.clone());
            cont = Some((lam, th0, th1, t));
            pts.push((lam, t));
        }
        let first = pts[0];
        let last = *pts.last().unwrap();
        let gap = (chordal(first.0, last.0).powi(2) + (first.1 - last.1).powi(2)).sqrt();
        let closed = gap < self.gcfg.closure_tol;
        Ok(IncidenceSet {
            kind: IncidenceKind::CPQ,
            rows: vec![pts],
            closed,
            closure_gap: gap,
            membership_residual: worst,
        })
    }

    /// 5-dimensional Newton for the two-point incidence: boundary through p
    /// with adapted direction psi, also through q.
    #[allow(clippy::too_many_arguments)]
    fn newton_two_point(
        &self,
        seed: (PointCP1, f64, f64, f64),
        p_first: PointCP1,
        q_first: PointCP1,
        psi: f64,
        warm: Option<&crate::fourier::FourierSeries>,
    ) -> Result<(PointCP1, f64, f64, f64, NodeState<'a>, f64), GeodesicError> {
        let (mut lam, mut th0, mut th1, mut t) = seed;
        let mut warm_u = warm.cloned();
        let vdir = (C64::new(0.0, 1.0) * psi).exp();
        for _ in 0..self.gcfg.max_newton {
            let st = self
                .solve_at(lam, t, warm_u.as_ref())
                .map_err(|e| GeodesicError::FoliationFailure(t, e.to_string()))?;
            warm_u = Some(st.sol.u.clone());
            let wp = p_first.value_in(lam.chart);
            let wq = q_first.value_in(lam.chart);
            let tp = st.sol.nt.fwd.apply(wp);
            let tq = st.sol.nt.fwd.apply(wq);
            let wdir = st.sol.nt.fwd.deriv(wp) * vdir;
            let vel = st.sol.phi1.derivative();
            let rp = st.sol.phi1.eval(th0) - tp;
            let rq = st.sol.phi1.eval(th1) - tq;
            let velp = vel.eval(th0);
            let r3 = (wdir.conj() * velp).im;
            if rp.norm() < self.gcfg.incidence_tol
                && rq.norm() < self.gcfg.incidence_tol
                && r3.abs() < self.gcfg.incidence_tol
            {
                if (wdir.conj() * velp).re <= 0.0 {
                    return Err(GeodesicError::FoliationFailure(
                        t,
                        "anti-adapted branch".into(),
                    ));
                }
                let bp = st.sol.point_at((C64::new(0.0, 1.0) * th0).exp());
                let bq = st.sol.point_at((C64::new(0.0, 1.0) * th1).exp());
                let res = chordal(bp.first, p_first).max(chordal(bq.first, q_first));
                return Ok((lam, th0, th1, t, st, res));
            }
            // 5x5 real Newton on (Re lam, Im lam, theta0, theta1, t)
            let accel = vel.derivative().eval(th0);
            let mut jac = nalgebra::SMatrix::<f64, 5, 5>::zeros();
            for k in 0..3 {
                let kcol = if k < 2 { k } else { 4 };
                let dphi1_p = st.dphi[k].dphi1.eval(th0);
                let dphi1_q = st.dphi[k].dphi1.eval(th1);
                let dtp = st.sol.nt.fwd.apply_dot(&st.sol.nt.d_fwd[k], wp);
                let dtq = st.sol.nt.fwd.apply_dot(&st.sol.nt.d_fwd[k], wq);
                let cp = dphi1_p - dtp;
                let cq = dphi1_q - dtq;
                jac[(0, kcol)] = cp.re;
                jac[(1, kcol)] = cp.im;
                jac[(3, kcol)] = cq.re;
                jac[(4, kcol)] = cq.im;
                let dvel: C64 = st.dphi[k].dphi1.derivative().eval(th0);
                let dwdir = st.sol.nt.fwd.deriv_dot(&st.sol.nt.d_fwd[k], wp) * vdir;
                jac[(2, kcol)] = (dwdir.conj() * velp).im + (wdir.conj() * dvel).im;
            }
            let velq = vel.eval(th1);
            jac[(0, 2)] = velp.re;
            jac[(1, 2)] = velp.im;
            jac[(2, 2)] = (wdir.conj() * accel).im;
            jac[(3, 3)] = velq.re;
            jac[(4, 3)] = velq.im;
            let rhs = nalgebra::SVector::<f64, 5>::from([rp.re, rp.im, r3, rq.re, rq.im]);
            let delta = jac
                .lu()
                .solve(&rhs)
                .ok_or_else(|| GeodesicError::FoliationFailure(t, "singular step".into()))?;
            lam = step_lambda(lam, -delta[0], -delta[1]);
            th0 -= delta[2];
            th1 -= delta[3];
            t -= delta[4];
        }
        Err(GeodesicError::FoliationFailure(t, "newton stalled".into()))
    }
}

/// Advances a chart-aware lambda by a real 2-step, re-charting when the
/// value grows past the overlap band.
fn step_lambda(lam: PointCP1, dx: f64, dy: f64) -> PointCP1 {
    let mut v = lam.value + C64::new(dx, dy);
    let mut chart = lam.chart;
    if v.norm() > 1.4 {
        v = v.inv();
        chart = match chart {
            Chart::Zero => Chart::One,
            Chart::One => Chart::Zero,
        };
    }
    PointCP1 { chart, value: v }
}

fn invert_first(sol: &SolvedDisk<'_>, target: C64) -> Option<C64> {
    // Newton for Phi1(z) = target, seeded at the standard value z = target
    // scaled into the disk.
    let mut z = if target.norm() > 1.0 {
        target / target.norm() * 0.99
    } else {
        target
    };
    for _ in 0..60 {
        let r = sol.phi1.eval_holomorphic(z) - target;
        if r.norm() < 1e-12 {
            return Some(z);
        }
        let d = sol.phi1.eval_holomorphic_deriv(z);
        if d.norm() < 1e-14 {
            return None;
        }
        z -= r / d;
        if z.norm() > 1.3 {
            z /= z.norm() * 1.05;
        }
    }
    None
}

/// Standard-model seed for the boundary-through-p problem: the closed-form
/// lambda with T_(lambda,t)(w) = e^{i theta0}.
fn standard_boundary_seed(p_first: PointCP1, t: f64, th0: f64) -> Option<PointCP1> {
    for chart in [Chart::Zero, Chart::One] {
        let w = p_first.value_in(chart);
        if !w.re.is_finite() || w.norm() > 1e6 {
            continue;
        }
        let r = t.exp();
        let e = (C64::new(0.0, 1.0) * th0).exp();
        // chart 0: r(w - l)/(conj(l) w + 1) = e  =>  r w - e = r l + e w conj(l)
        // chart 1: (r m w - r)/(w + conj(m)) = e  =>  r m w - e conj(m) = r + e w
        let (a, b, c) = match chart {
            Chart::Zero => (C64::new(r, 0.0), e * w, r * w - e),
            Chart::One => (r * w, -e, C64::new(r, 0.0) + e * w),
        };
        // a l + b conj(l) = c
        let det = a.norm_sqr() - b.norm_sqr();
        if det.abs() < 1e-9 {
            continue;
        }
        let l = (c * a.conj() - c.conj() * b) / det;
        if l.norm() <= 1.3 {
            return Some(PointCP1 { chart, value: l });
        }
    }
    None
}

/// Standard seed for the adapted problem: lambda and theta0 with the
/// boundary circle through p tangent to e^{i psi} positively.
fn standard_adapted_seed(p_first: PointCP1, psi: f64, t: f64) -> Option<(PointCP1, f64)> {
    // scan theta0 for best alignment on the standard model, then refine by
    // bisection on the alignment angle
    let mut best: Option<(f64, f64, PointCP1)> = None;
    let n = 128;
    for a in 0..n {
        let th0 = a as f64 * std::f64::consts::TAU / n as f64;
        let lam = standard_boundary_seed(p_first, t, th0)?;
        // standard boundary tangent at theta0 in the first factor:
        // d/dtheta [ S(e^{i theta}) ] at theta0 where S = T^{-1}
        let nt = crate::embedding::NodeTransport::new(lam, t);
        let e = (C64::new(0.0, 1.0) * th0).exp();
        let tangent = nt.inv.deriv(e) * (C64::new(0.0, 1.0) * e);
        let w = p_first.value_in(lam.chart);
        let _ = w;
        let vdir = (C64::new(0.0, 1.0) * psi).exp();
        let mis = (vdir.conj() * tangent).im.atan2((vdir.conj() * tangent).re);
        let score = mis.abs();
        if best.as_ref().map(|b| score < b.0).unwrap_or(true) {
            best = Some((score, th0, lam));
        }
    }
    best.map(|(_, th0, lam)| (lam, th0))
}

/// Standard pencil seed for the two-point problem: the circle through p and q
/// whose tangent at p is e^{i psi}, mapped to (lambda, theta0, theta1, t).
fn standard_two_point_seed(
    p_first: PointCP1,
    q_first: PointCP1,
    psi: f64,
) -> Option<(PointCP1, f64, f64, f64)> {
    let p = p_first.to_c();
    let q = q_first.to_c();
    if !p.re.is_finite() || !q.re.is_finite() {
        return None;
    }
    // pencil of circles through p, q: two-dimensional nullspace of the
    // membership conditions in (A, ReB, ImB, C)
    let mut m = nalgebra::SMatrix::<f64, 4, 4>::zeros();
    for (row, w) in [p, q].iter().enumerate() {
        m[(row, 0)] = w.norm_sqr();
        m[(row, 1)] = -2.0 * w.re;
        m[(row, 2)] = -2.0 * w.im;
        m[(row, 3)] = 1.0;
    }
    let svd = m.svd(false, true);
    let vt = svd.v_t.as_ref()?;
    let mut idx: Vec<usize> = (0..4).collect();
    idx.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    let c1 = vt.row(idx[0]);
    let c2 = vt.row(idx[1]);
    // tangent direction at p of the circle (A, B, C): i (A p - B); align with
    // e^{i psi}: solve Im[conj(v) i (A(s) p - B(s))] = 0 linear in (cos, sin)
    let vdir = (C64::new(0.0, 1.0) * psi).exp();
    let tang = |c: nalgebra::SMatrixView<f64, 1, 4, 1, 4>| {
        C64::new(0.0, 1.0) * (c[0] * p - C64::new(c[1], c[2]))
    };
    let t1 = (vdir.conj() * tang(c1)).im;
    let t2 = (vdir.conj() * tang(c2)).im;
    let (cs, sn) = (t2, -t1);
    let norm = cs.hypot(sn);
    if norm < 1e-14 {
        return None;
    }
    let mut abc = [0.0f64; 4];
    for i in 0..4 {
        abc[i] = (cs * c1[i] + sn * c2[i]) / norm;
    }
    // orientation: positive alignment
    let tangent = C64::new(0.0, 1.0) * (abc[0] * p - C64::new(abc[1], abc[2]));
    let mut abc = abc;
    if (vdir.conj() * tangent).re < 0.0 {
        for v in &mut abc {
            *v = -*v;
        }
    }
    // normalize |B|^2 - AC = 1
    let nq = abc[1] * abc[1] + abc[2] * abc[2] - abc[0] * abc[3];
    if nq <= 0.0 {
        return None;
    }
    let s = nq.sqrt();
    let (a, b, c) = (abc[0] / s, C64::new(abc[1] / s, abc[2] / s), abc[3] / s);
    // (lambda, t) from the circle parameters
    let t = ((a + c) / 2.0).asinh();
    let lam = if a - c >= 0.0 {
        let mm = b / (a - c);
        let lam_abs = if mm.norm() < 1e-12 {
            0.0
        } else {
            (-1.0 + (1.0 + 4.0 * mm.norm_sqr()).sqrt()) / (2.0 * mm.norm())
        };
        PointCP1 {
            chart: Chart::Zero,
            value: if mm.norm() < 1e-12 {
                C64::new(0.0, 0.0)
            } else {
                mm / mm.norm() * lam_abs
            },
        }
    } else {
        let mm = b.conj() / (c - a);
        let mu_abs = if mm.norm() < 1e-12 {
            0.0
        } else {
            (-1.0 + (1.0 + 4.0 * mm.norm_sqr()).sqrt()) / (2.0 * mm.norm())
        };
        PointCP1 {
            chart: Chart::One,
            value: if mm.norm() < 1e-12 {
                C64::new(0.0, 0.0)
            } else {
                mm / mm.norm() * mu_abs
            },
        }
    };
    // boundary angles: theta = arg T(w)
    let nt = crate::embedding::NodeTransport::new(lam, t);
    let wp = p_first.value_in(lam.chart);
    let wq = q_first.value_in(lam.chart);
    let th0 = nt.fwd.apply(wp).arg();
    let th1 = nt.fwd.apply(wq).arg();
    Some((lam, th0, th1, t))
}

/// Parameter-free deviation between an incidence polyline and an integrated
/// geodesic seeded from it: max over trace samples inside the common range of
/// the distance to the polyline.
pub fn cross_validate(
    field: &MetricConnectionField,
    polyline: &[(PointCP1, f64)],
    band: f64,
) -> Result<CrossValidation, GeodesicError> {
    let interp = FieldInterp::new(field);
    // polyline in chart-0 coordinates, restricted to the field domain
    let pts: Vec<[f64; 3]> = polyline
        .iter()
        .filter(|(l, _)| l.chart == Chart::Zero || l.value.norm() > 0.7)
        .map(|(l, t)| {
            let v = l.to_c();
            [v.re, v.im, *t]
        })
        .filter(|x| x[0].is_finite() && interp.contains(x))
        .collect();
    if pts.len() < 5 {
        return Err(GeodesicError::BadAnchor(
            "incidence set does not cross the field domain".into(),
        ));
    }
    let mid = pts.len() / 2;
    let x0 = pts[mid];
    let mut v0 = [0.0f64; 3];
    let mut arc = 0.0;
    for c in 0..3 {
        v0[c] = pts[mid + 1][c] - pts[mid - 1][c];
    }
    let vnorm = (v0[0].powi(2) + v0[1].powi(2) + v0[2].powi(2)).sqrt();
    for c in 0..3 {
        v0[c] /= vnorm;
    }
    for w in pts.windows(2) {
        arc += ((w[1][0] - w[0][0]).powi(2)
            + (w[1][1] - w[0][1]).powi(2)
            + (w[1][2] - w[0][2]).powi(2))
        .sqrt();
    }
    let g0 = interp.metric_at(&x0).expect("interior");
    let causal = classify(&g0, &Vector3::from(v0), band)?;
    let mut worst = 0.0f64;
    let mut causal_drift = 0.0f64;
    for dir in [1.0f64, -1.0] {
        let v = [dir * v0[0], dir * v0[1], dir * v0[2]];
        let trace = integrate_geodesic(field, x0, v, arc, 0.01, band)?;
        for (x, vel) in &trace.samples {
            worst = worst.max(dist_to_polyline(x, &pts));
            if let Some(g) = interp.metric_at(x) {
                let vv = Vector3::from(*vel);
                let gv = (vv.transpose() * g * vv)[0];
                if causal == CausalType::Null {
                    causal_drift = causal_drift.max(gv.abs() / vv.norm_squared());
                }
            }
        }
    }
    Ok(CrossValidation {
        deviation: worst,
        causal,
        null_drift: causal_drift,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossValidation {
    pub deviation: f64,
    pub causal: CausalType,
    pub null_drift: f64,
}

fn dist_to_polyline(x: &[f64; 3], pts: &[[f64; 3]]) -> f64 {
    let mut best = f64::INFINITY;
    for w in pts.windows(2) {
        best = best.min(dist_to_segment(x, &w[0], &w[1]));
    }
    best
}

fn dist_to_segment(x: &[f64; 3], a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ax = [x[0] - a[0], x[1] - a[1], x[2] - a[2]];
    let ab2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let tproj = if ab2 > 0.0 {
        ((ax[0] * ab[0] + ax[1] * ab[1] + ax[2] * ab[2]) / ab2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut d2 = 0.0;
    for c in 0..3 {
        let delta = x[c] - (a[c] + tproj * ab[c]);
        d2 += delta * delta;
    }
    d2.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reconstruct::{reconstruct_field, ReconstructConfig};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scfg() -> SolverConfig {
        SolverConfig {
            m_modes: 16,
            ..Default::default()
        }
    }

    fn standard_field() -> MetricConnectionField {
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let rcfg = ReconstructConfig {
            fd_step: 0.05,
            nx: 13,
            nt: 9,
            ..Default::default()
        };
        reconstruct_field(&emb, &cfg, &rcfg).expect("field")
    }

    #[test]
    fn classify_standard_directions() {
        // cone 4 |dl|^2 = dt^2: d_t timelike, d_x spacelike, (1/2, 0, 1) null
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let rcfg = ReconstructConfig::default();
        let node =
            crate::reconstruct::reconstruct_node(&emb, &grid, &cfg, &rcfg, c(0.0, 0.0), 0.0)
                .unwrap();
        let band = 1e-10;
        assert_eq!(
            classify(&node.g, &Vector3::new(0.0, 0.0, 1.0), band).unwrap(),
            CausalType::Timelike
        );
        assert_eq!(
            classify(&node.g, &Vector3::new(1.0, 0.0, 0.0), band).unwrap(),
            CausalType::Spacelike
        );
        assert_eq!(
            classify(&node.g, &Vector3::new(0.5, 0.0, 1.0), band).unwrap(),
            CausalType::Null
        );
        assert!(classify(&node.g, &Vector3::zeros(), band).is_err());
    }

    #[test]
    fn flat_field_gives_straight_lines() {
        let rcfg = ReconstructConfig {
            nx: 9,
            nt: 9,
            fd_step: 0.05,
            ..Default::default()
        };
        let eta = Matrix3::new(-1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        let mut nodes = Vec::new();
        for i in 0..rcfg.nx {
            for j in 0..rcfg.nx {
                for k in 0..rcfg.nt {
                    nodes.push(crate::reconstruct::FieldNode {
                        lambda: rcfg.node_lambda(i, j),
                        t: rcfg.node_t(k),
                        q: eta,
                        g: eta,
                        coframe: Matrix3::identity(),
                        frame: Matrix3::identity(),
                        alphas: [0.0; 4],
                        betas: [0.0; 4],
                        cone_residual: 0.0,
                        frame_residual: 0.0,
                        lift_residual: 0.0,
                    });
                }
            }
        }
        let (conn, _) = crate::reconstruct::assemble_connection(&rcfg, &nodes);
        let ew = crate::reconstruct::ew_residuals(&rcfg, &nodes, &conn);
        let field = MetricConnectionField {
            cfg: rcfg,
            nodes,
            conn,
            ew,
        };
        let trace =
            integrate_geodesic(&field, [0.0, 0.0, 0.0], [0.05, 0.02, 0.01], 2.0, 0.05, 1e-10)
                .unwrap();
        for (i, (x, _)) in trace.samples.iter().enumerate() {
            // straight line through origin: x proportional to v0
            let s = i as f64;
            let _ = s;
            let crossness = (x[0] * 0.02 - x[1] * 0.05).abs() + (x[1] * 0.01 - x[2] * 0.02).abs();
            assert!(crossness < 1e-12, "bent line at {x:?}");
        }
    }

    #[test]
    fn timelike_center_line_is_geodesic() {
        // C_(w,-w) = {(w, t)}: integrating from the origin along d_t stays
        // on lambda = 0.
        let field = standard_field();
        let trace =
            integrate_geodesic(&field, [0.0, 0.0, -0.15], [0.0, 0.0, 1.0], 0.3, 0.02, 1e-10)
                .unwrap();
        assert_eq!(trace.causal, CausalType::Timelike);
        for (x, _) in &trace.samples {
            assert!(x[0].abs() < 1e-9 && x[1].abs() < 1e-9, "left the line: {x:?}");
        }
    }

    #[test]
    fn c_p_is_vertical_for_center_points() {
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let lab = IncidenceLab::new(&emb, &cfg, &grid);
        let w = c(0.21, -0.13);
        let p = PointZ::from_c(w, -w);
        let ts: Vec<f64> = (0..7).map(|k| -0.3 + 0.1 * k as f64).collect();
        let set = lab.incidence_c_p(p, &ts).expect("c_p");
        for (lam, _) in &set.rows[0] {
            assert!((lam.to_c() - w).norm() < 1e-8, "curve strayed from {w}");
        }
        assert!(set.membership_residual < 1e-8);
    }

    #[test]
    fn c_p_rejects_points_near_n() {
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let lab = IncidenceLab::new(&emb, &cfg, &grid);
        // a point on Z_R
        let p = emb.n_point(PointCP1::from_c(c(0.9, 0.1)));
        assert!(matches!(
            lab.incidence_c_p(p, &[0.0]),
            Err(GeodesicError::BadAnchor(_))
        ));
    }

    #[test]
    fn s_p_standard_circles_through_point() {
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let lab = IncidenceLab::new(&emb, &cfg, &grid);
        let w = PointCP1::from_c(c(0.8, 0.3));
        let ts = [-0.4, 0.0, 0.4];
        let set = lab.incidence_s_p(w, &ts, 12).expect("s_p");
        assert!(set.membership_residual < 1e-8);
        // each returned disk's standard boundary circle passes through w
        for row in &set.rows {
            for (lam, t) in row {
                let circ = crate::standard::std_boundary_circle(
                    crate::standard::StandardDiskParams::new(*lam, *t),
                );
                assert!(circ.membership(w).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn c_pv_orientation_matters() {
        let emb = EmbeddingN::single_bump(1e-3, 2, 1, c(0.1, 0.0));
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let lab = IncidenceLab::new(&emb, &cfg, &grid);
        let w = PointCP1::from_c(c(0.75, -0.2));
        let ts = [-0.2, 0.0, 0.2];
        let fwd = lab.incidence_c_pv(w, 0.7, &ts).expect("c_pv");
        let rev = lab
            .incidence_c_pv(w, 0.7 + std::f64::consts::PI, &ts)
            .expect("c_pv reversed");
        // v and -v give different geodesics
        let d = chordal(fwd.rows[0][1].0, rev.rows[0][1].0);
        assert!(d > 1e-3, "orientation did not change the geodesic: {d}");
        assert!(fwd.membership_residual < 1e-7);
    }

    #[test]
    fn c_pq_standard_is_closed_circle_pencil() {
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let mut lab = IncidenceLab::new(&emb, &cfg, &grid);
        lab.gcfg.directions = 24;
        let p = PointCP1::from_c(c(0.6, 0.1));
        let q = PointCP1::from_c(c(-0.3, 0.4));
        let set = lab.incidence_c_pq(p, q).expect("c_pq");
        assert!(set.closed, "gap = {}", set.closure_gap);
        assert!(set.closure_gap < 1e-6);
        assert!(set.membership_residual < 1e-8);
        // every member circle passes through both anchors
        for (lam, t) in &set.rows[0] {
            let circ = crate::standard::std_boundary_circle(
                crate::standard::StandardDiskParams::new(*lam, *t),
            );
            assert!(circ.membership(p).abs() < 1e-7);
            assert!(circ.membership(q).abs() < 1e-7);
        }
    }

    #[test]
    fn c_pq_antipodal_is_great_circle_pencil() {
        // antipodal anchors: the pencil lies in the t = 0 slice.
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let mut lab = IncidenceLab::new(&emb, &cfg, &grid);
        lab.gcfg.directions = 16;
        let p = PointCP1::from_c(c(1.0, 0.0));
        let q = PointCP1::from_c(c(-1.0, 0.0));
        let set = lab.incidence_c_pq(p, q).expect("c_pq");
        assert!(set.closed);
        for (_, t) in &set.rows[0] {
            assert!(t.abs() < 1e-8, "great-circle pencil left t = 0: {t}");
        }
    }

    #[test]
    fn cross_validate_center_line() {
        let field = standard_field();
        let emb = EmbeddingN::standard();
        let cfg = scfg();
        let grid = ThetaGrid::new(cfg.m_modes);
        let lab = IncidenceLab::new(&emb, &cfg, &grid);
        let w = c(0.05, 0.02);
        let p = PointZ::from_c(w, -w);
        let ts: Vec<f64> = (0..13).map(|k| -0.15 + 0.025 * k as f64).collect();
        let set = lab.incidence_c_p(p, &ts).expect("c_p");
        let cv = cross_validate(&field, &set.rows[0], 1e-10).expect("cross");
        assert_eq!(cv.causal, CausalType::Timelike);
        assert!(cv.deviation < 1e-3, "deviation {}", cv.deviation);
    }
}
