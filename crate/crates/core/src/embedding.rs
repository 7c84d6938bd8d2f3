//! The perturbed totally real submanifold N = {(eta, conj(phi(eta))^{-1})}
//! with phi = phi0 . (id + eps * chi(|w|) * P(w, conj w)), its transported
//! local graph functions h^T over the working annulus, and their Wirtinger /
//! parameter derivatives. All evaluations are closed-form.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cp1::{tau, Chart, Moebius, PointCP1, PointZ};
use crate::error::SolveError;

/// One bi-Laurent bump monomial c * w^m * conj(w)^n.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BumpTerm {
    pub m: i32,
    pub n: i32,
    pub c_re: f64,
    pub c_im: f64,
}

impl BumpTerm {
    pub fn coeff(&self) -> C64 {
        C64::new(self.c_re, self.c_im)
    }
}

/// Radial C-infinity cutoff, supported on [inner, outer], identically 1 on
/// [plateau_lo, plateau_hi].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub plateau_lo: f64,
    pub plateau_hi: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff {
            inner: 0.5,
            plateau_lo: 0.75,
            plateau_hi: 4.0 / 3.0,
            outer: 2.0,
        }
    }
}

fn smooth_f(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn smooth_step(s: f64) -> (f64, f64) {
    // psi(s) = f(s) / (f(s) + f(1-s)), psi' via f'(s) = f(s)/s^2.
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= 1.0 {
        return (1.0, 0.0);
    }
    let f = smooth_f(s);
    let g = smooth_f(1.0 - s);
    let fp = f / (s * s);
    let gp = g / ((1.0 - s) * (1.0 - s));
    let den = f + g;
    ((f / den), (fp * g + f * gp) / (den * den))
}

impl Cutoff {
    /// (chi(rho), chi'(rho))
    pub fn chi(&self, rho: f64) -> (f64, f64) {
        if rho <= self.inner || rho >= self.outer {
            (0.0, 0.0)
        } else if rho < self.plateau_lo {
            let w = self.plateau_lo - self.inner;
            let (v, d) = smooth_step((rho - self.inner) / w);
            (v, d / w)
        } else if rho <= self.plateau_hi {
            (1.0, 0.0)
        } else {
            let w = self.outer - self.plateau_hi;
            let (v, d) = smooth_step((self.outer - rho) / w);
            (v, -d / w)
        }
    }
}

/// Diagnostics from [`EmbeddingN::validate`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingReport {
    /// sup |phi - phi0| over the bump band (the C^0 part of the norm).
    pub sup_h: f64,
    /// sup of first Wirtinger derivatives of the displacement.
    pub sup_dh: f64,
    /// sup of second derivatives (finite-differenced).
    pub sup_d2h: f64,
    /// min over the band of the Jacobian |rho_w|^2 - |rho_wbar|^2.
    pub min_jacobian: f64,
}

/// The perturbed embedding; N = {(eta, tau(phi(eta)))} with
/// phi = moebius . (id + epsilon * chi * P).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmbeddingN {
    pub moebius: Moebius,
    pub epsilon: f64,
    pub terms: Vec<BumpTerm>,
    pub cutoff: Cutoff,
}

impl EmbeddingN {
    pub fn standard() -> Self {
        EmbeddingN {
            moebius: Moebius::identity(),
            epsilon: 0.0,
            terms: Vec::new(),
            cutoff: Cutoff::default(),
        }
    }

    pub fn single_bump(epsilon: f64, m: i32, n: i32, c: C64) -> Self {
        EmbeddingN {
            moebius: Moebius::identity(),
            epsilon,
            terms: vec![BumpTerm {
                m,
                n,
                c_re: c.re,
                c_im: c.im,
            }],
            cutoff: Cutoff::default(),
        }
    }

    pub fn is_standard(&self) -> bool {
        let m = &self.moebius;
        let id_like = (m.a - C64::new(1.0, 0.0)).norm() < 1e-15
            && m.b.norm() < 1e-15
            && m.c.norm() < 1e-15
            && (m.d - C64::new(1.0, 0.0)).norm() < 1e-15;
        (self.epsilon == 0.0 || self.terms.is_empty()) && id_like
    }

    /// P(w, conj w) and its Wirtinger derivatives.
    fn bump_jet(&self, w: C64) -> (C64, C64, C64) {
        let wb = w.conj();
        let mut p = C64::new(0.0, 0.0);
        let mut pw = C64::new(0.0, 0.0);
        let mut pwb = C64::new(0.0, 0.0);
        for t in &self.terms {
            let c = t.coeff();
            let wm = w.powi(t.m);
            let wbn = wb.powi(t.n);
            p += c * wm * wbn;
            if t.m != 0 {
                pw += c * (t.m as f64) * w.powi(t.m - 1) * wbn;
            }
            if t.n != 0 {
                pwb += c * (t.n as f64) * wm * wb.powi(t.n - 1);
            }
        }
        (p, pw, pwb)
    }

    /// rho(w) = w + eps chi(|w|) P and its Wirtinger derivatives; finite w.
    pub fn rho_jet(&self, w: C64) -> (C64, C64, C64) {
        let rho = w.norm();
        let (chi, dchi) = self.cutoff.chi(rho);
        if chi == 0.0 && dchi == 0.0 {
            return (w, C64::new(1.0, 0.0), C64::new(0.0, 0.0));
        }
        let (p, pw, pwb) = self.bump_jet(w);
        let e = self.epsilon;
        let val = w + e * chi * p;
        // d|w|/dw = conj(w)/(2|w|), d|w|/dwbar = w/(2|w|)
        let dw = C64::new(1.0, 0.0) + e * (dchi * (w.conj() / (2.0 * rho)) * p + chi * pw);
        let dwb = e * (dchi * (w / (2.0 * rho)) * p + chi * pwb);
        (val, dw, dwb)
    }

    /// Whether the bump vanishes identically at this point of CP^1.
    fn bump_is_zero_at(&self, p: PointCP1) -> bool {
        if self.epsilon == 0.0 || self.terms.is_empty() {
            return true;
        }
        match p.chart {
            Chart::Zero => {
                let r = p.value.norm();
                r <= self.cutoff.inner || r >= self.cutoff.outer
            }
            Chart::One => {
                let r = p.value.norm();
                // |w| = 1/r
                r <= 1.0 / self.cutoff.outer || r >= 1.0 / self.cutoff.inner
            }
        }
    }

    /// phi as a chart-safe map on CP^1.
    pub fn apply(&self, p: PointCP1) -> PointCP1 {
        if self.bump_is_zero_at(p) {
            self.moebius.apply(p)
        } else {
            let w = p.to_c();
            let (r, _, _) = self.rho_jet(w);
            self.moebius.apply(PointCP1::from_c(r))
        }
    }

    /// The point of N over eta1 (first-factor identification of N with CP^1).
    pub fn n_point(&self, eta1: PointCP1) -> PointZ {
        PointZ::new(eta1, tau(self.apply(eta1)))
    }

    /// Chart-graph residual |eta2 - tau(phi(eta1))| / (1 + |eta2|^2),
    /// evaluated in eta2's own chart. Zero exactly on N.
    pub fn graph_residual(&self, p: PointZ) -> f64 {
        let target = tau(self.apply(p.first));
        let tv = target.value_in(p.second.chart);
        if !tv.re.is_finite() || !tv.im.is_finite() {
            return 1.0;
        }
        (p.second.value - tv).norm() / (1.0 + p.second.value.norm_sqr())
    }

    /// Jacobian and norm audit over an azimuthal x radial band grid.
    /// Fails if the perturbed map stops being an immersion.
    pub fn validate(&self, epsilon_max: f64) -> Result<EmbeddingReport, SolveError> {
        if self.epsilon.abs() > epsilon_max {
            return Err(SolveError::Refused(format!(
                "epsilon = {} exceeds the configured bound {}",
                self.epsilon, epsilon_max
            )));
        }
        let mut rep = EmbeddingReport {
            sup_h: 0.0,
            sup_dh: 0.0,
            sup_d2h: 0.0,
            min_jacobian: f64::INFINITY,
        };
        let (na, nr) = (128usize, 64usize);
        let fd = 1e-5;
        for i in 0..na {
            let ang = i as f64 * std::f64::consts::TAU / na as f64;
            for j in 0..nr {
                let rho = 0.45 + (2.15 - 0.45) * j as f64 / (nr - 1) as f64;
                let w = C64::new(0.0, ang).exp() * rho;
                let (val, dw, dwb) = self.rho_jet(w);
                let jac = dw.norm_sqr() - dwb.norm_sqr();
                rep.min_jacobian = rep.min_jacobian.min(jac);
                rep.sup_h = rep.sup_h.max((val - w).norm());
                rep.sup_dh = rep
                    .sup_dh
                    .max((dw - C64::new(1.0, 0.0)).norm() + dwb.norm());
                // second derivatives by centered differences of the first jet
                let (_, dw_e, dwb_e) = self.rho_jet(w + C64::new(fd, 0.0));
                let (_, dw_w, dwb_w) = self.rho_jet(w - C64::new(fd, 0.0));
                let d2 = ((dw_e - dw_w).norm() + (dwb_e - dwb_w).norm()) / (2.0 * fd);
                rep.sup_d2h = rep.sup_d2h.max(d2);
            }
        }
        if rep.min_jacobian <= 0.0 {
            return Err(SolveError::Refused(format!(
                "perturbation is not an embedding: min Jacobian {} <= 0",
                rep.min_jacobian
            )));
        }
        Ok(rep)
    }
}

/// 2x2 complex matrix acting projectively; kept unnormalized so that entries
/// stay linear in parameter derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2 {
    pub fn from_moebius(m: &Moebius) -> Self {
        Mat2 {
            a: m.a,
            b: m.b,
            c: m.c,
            d: m.d,
        }
    }

    pub fn apply(&self, w: C64) -> C64 {
        (self.a * w + self.b) / (self.c * w + self.d)
    }

    pub fn apply_point(&self, p: PointCP1) -> PointCP1 {
        let (u, v) = p.homogeneous();
        PointCP1::from_homogeneous(self.a * u + self.b * v, self.c * u + self.d * v)
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn deriv(&self, w: C64) -> C64 {
        let den = self.c * w + self.d;
        self.det() / (den * den)
    }

    pub fn adjugate(&self) -> Self {
        Mat2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// tau M tau as a matrix.
    pub fn conj_transport(&self) -> Self {
        Mat2 {
            a: self.d.conj(),
            b: self.c.conj(),
            c: self.b.conj(),
            d: self.a.conj(),
        }
    }

    pub fn mul(&self, rhs: &Mat2) -> Self {
        Mat2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// d/ds of w -> M(s)(w) at fixed w, given dM/ds.
    pub fn apply_dot(&self, dm: &Mat2, w: C64) -> C64 {
        let den = self.c * w + self.d;
        ((dm.a * w + dm.b) * den - (self.a * w + self.b) * (dm.c * w + dm.d)) / (den * den)
    }

    /// d/ds of the holomorphic derivative M(s)'(w) at fixed w.
    pub fn deriv_dot(&self, dm: &Mat2, w: C64) -> C64 {
        let den = self.c * w + self.d;
        let dden = dm.c * w + dm.d;
        let ddet = dm.a * self.d + self.a * dm.d - dm.b * self.c - self.b * dm.c;
        (ddet * den - 2.0 * self.det() * dden) / (den * den * den)
    }
}

/// Transporter data at one node: T, its inverse S and the second-component
/// pullback V = tau S tau, together with d/d(x1, x2, t).
#[derive(Debug, Clone)]
pub struct NodeTransport {
    pub lambda: PointCP1,
    pub t: f64,
    pub fwd: Mat2,
    pub d_fwd: [Mat2; 3],
    pub inv: Mat2,
    pub d_inv: [Mat2; 3],
    pub second_pullback: Mat2,
    pub d_second_pullback: [Mat2; 3],
}

impl NodeTransport {
    /// Transporter at (lambda, t), differentiated in the node's own chart
    /// coordinates (Re lambda, Im lambda, t).
    pub fn new(lambda: PointCP1, t: f64) -> Self {
        let r = t.exp();
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let (fwd, d_fwd) = match lambda.chart {
            Chart::Zero => {
                let l = lambda.value;
                let f = Mat2 {
                    a: C64::new(r, 0.0),
                    b: -r * l,
                    c: l.conj(),
                    d: one,
                };
                let dx1 = Mat2 {
                    a: zero,
                    b: C64::new(-r, 0.0),
                    c: one,
                    d: zero,
                };
                let dx2 = Mat2 {
                    a: zero,
                    b: -i * r,
                    c: -i,
                    d: zero,
                };
                let dt = Mat2 {
                    a: C64::new(r, 0.0),
                    b: -r * l,
                    c: zero,
                    d: zero,
                };
                (f, [dx1, dx2, dt])
            }
            Chart::One => {
                let m = lambda.value;
                let f = Mat2 {
                    a: r * m,
                    b: C64::new(-r, 0.0),
                    c: one,
                    d: m.conj(),
                };
                let dx1 = Mat2 {
                    a: C64::new(r, 0.0),
                    b: zero,
                    c: zero,
                    d: one,
                };
                let dx2 = Mat2 {
                    a: i * r,
                    b: zero,
                    c: zero,
                    d: -i,
                };
                let dt = Mat2 {
                    a: r * m,
                    b: C64::new(-r, 0.0),
                    c: zero,
                    d: zero,
                };
                (f, [dx1, dx2, dt])
            }
        };
        let inv = fwd.adjugate();
        let d_inv = [
            d_fwd[0].adjugate(),
            d_fwd[1].adjugate(),
            d_fwd[2].adjugate(),
        ];
        let second_pullback = inv.conj_transport();
        let d_second_pullback = [
            d_inv[0].conj_transport(),
            d_inv[1].conj_transport(),
            d_inv[2].conj_transport(),
        ];
        NodeTransport {
            lambda,
            t,
            fwd,
            d_fwd,
            inv,
            d_inv,
            second_pullback,
            d_second_pullback,
        }
    }

    pub fn fwd_moebius(&self) -> Moebius {
        Moebius::new(self.fwd.a, self.fwd.b, self.fwd.c, self.fwd.d)
            .expect("transporter is nondegenerate")
    }

    /// Physical point from a transported-frame point: (S eta1, V eta2).
    pub fn pull_back(&self, p: PointZ) -> PointZ {
        PointZ::new(
            self.inv.apply_point(p.first),
            self.second_pullback.apply_point(p.second),
        )
    }
}

/// The transported local graph h^T(eta) = T(phi(S(eta))) - eta over the
/// working annulus, with Wirtinger and parameter derivatives.
pub struct TransportedGraph<'a> {
    pub emb: &'a EmbeddingN,
    pub nt: &'a NodeTransport,
    /// Mobius-only composite T phi0 S used where the bump vanishes.
    pure: Mat2,
    d_pure: [Mat2; 3],
    /// |h| beyond this is reported as a graph failure.
    pub h_bound: f64,
}

impl<'a> TransportedGraph<'a> {
    pub fn new(emb: &'a EmbeddingN, nt: &'a NodeTransport) -> Self {
        let phi0 = Mat2::from_moebius(&emb.moebius);
        let pure = nt.fwd.mul(&phi0).mul(&nt.inv);
        let d_pure = [
            nt.d_fwd[0]
                .mul(&phi0)
                .mul(&nt.inv)
                .add(&nt.fwd.mul(&phi0).mul(&nt.d_inv[0])),
            nt.d_fwd[1]
                .mul(&phi0)
                .mul(&nt.inv)
                .add(&nt.fwd.mul(&phi0).mul(&nt.d_inv[1])),
            nt.d_fwd[2]
                .mul(&phi0)
                .mul(&nt.inv)
                .add(&nt.fwd.mul(&phi0).mul(&nt.d_inv[2])),
        ];
        TransportedGraph {
            emb,
            nt,
            pure,
            d_pure,
            h_bound: 1.0,
        }
    }

    fn bump_active(&self, eta: C64) -> Option<C64> {
        // Returns the finite chart-0 parameter w = S(eta) when the bump can
        // be nonzero there.
        if self.emb.epsilon == 0.0 || self.emb.terms.is_empty() {
            return None;
        }
        let w_pt = self.nt.inv.apply_point(PointCP1::from_c(eta));
        let w = match w_pt.chart {
            Chart::Zero => w_pt.value,
            Chart::One => {
                if w_pt.value.norm() <= 1.0 / self.emb.cutoff.outer {
                    return None;
                }
                w_pt.value.inv()
            }
        };
        let r = w.norm();
        if r <= self.emb.cutoff.inner || r >= self.emb.cutoff.outer {
            None
        } else {
            Some(w)
        }
    }

    /// h^T(eta); GraphFailure when the transported sphere is not graph-like
    /// over this eta.
    pub fn eval(&self, eta: C64) -> Result<C64, SolveError> {
        let (h, _, _) = self.jet(eta)?;
        Ok(h)
    }

    /// (h, h_eta, h_etabar) at a finite annulus point.
    pub fn jet(&self, eta: C64) -> Result<(C64, C64, C64), SolveError> {
        let out = match self.bump_active(eta) {
            None => {
                let val = self.pure.apply(eta);
                (val - eta, self.pure.deriv(eta) - 1.0, C64::new(0.0, 0.0))
            }
            Some(w) => {
                let (rho, rho_w, rho_wb) = self.emb.rho_jet(w);
                let phi0 = Mat2::from_moebius(&self.emb.moebius);
                let phi_val = phi0.apply(rho);
                let phi_d = phi0.deriv(rho);
                let s_d = self.nt.inv.deriv(eta);
                let t_d = self.nt.fwd.deriv(phi_val);
                let val = self.nt.fwd.apply(phi_val);
                let h_eta = t_d * phi_d * rho_w * s_d - 1.0;
                let h_etab = t_d * phi_d * rho_wb * s_d.conj();
                (val - eta, h_eta, h_etab)
            }
        };
        if !out.0.re.is_finite() || !out.0.im.is_finite() || out.0.norm() > self.h_bound {
            return Err(SolveError::GraphFailure(format!(
                "|h^T({eta})| = {:.3e}",
                out.0.norm()
            )));
        }
        Ok(out)
    }

    /// d h^T / d param_k at fixed eta, param in (Re lambda, Im lambda, t).
    pub fn dparam(&self, eta: C64, k: usize) -> Result<C64, SolveError> {
        let out = match self.bump_active(eta) {
            None => self.pure.apply_dot(&self.d_pure[k], eta),
            Some(w) => {
                let (rho, rho_w, rho_wb) = self.emb.rho_jet(w);
                let phi0 = Mat2::from_moebius(&self.emb.moebius);
                let phi_val = phi0.apply(rho);
                let phi_d = phi0.deriv(rho);
                let t_d = self.nt.fwd.deriv(phi_val);
                let ds = self.nt.inv.apply_dot(&self.nt.d_inv[k], eta);
                let dt_term = self.nt.fwd.apply_dot(&self.nt.d_fwd[k], phi_val);
                dt_term + t_d * phi_d * (rho_w * ds + rho_wb * ds.conj())
            }
        };
        if !out.re.is_finite() || !out.im.is_finite() {
            return Err(SolveError::GraphFailure(format!(
                "dh^T/dparam not finite at eta = {eta}"
            )));
        }
        Ok(out)
    }

    /// The spec's one-complex-variable Newton inversion of the transported
    /// first-coordinate projection, seeded at eta. Agrees with the exact
    /// Mobius inverse; kept as the stated contract and as a guard probe.
    pub fn invert_first_coordinate(&self, eta: C64) -> Result<C64, SolveError> {
        let mut w = eta;
        for _ in 0..40 {
            let val = self.nt.fwd.apply(w) - eta;
            if val.norm() < 1e-13 * (1.0 + eta.norm()) {
                return Ok(w);
            }
            let d = self.nt.fwd.deriv(w);
            if d.norm() < 1e-300 {
                break;
            }
            w -= val / d;
            if !w.re.is_finite() || !w.im.is_finite() {
                break;
            }
        }
        Err(SolveError::GraphFailure(format!(
            "first-coordinate projection not invertible near eta = {eta}"
        )))
    }
}

impl Mat2 {
    fn add(&self, rhs: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a + rhs.a,
            b: self.b + rhs.b,
            c: self.c + rhs.c,
            d: self.d + rhs.d,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cp1::psl_action;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cutoff_shape() {
        let cut = Cutoff::default();
        assert_eq!(cut.chi(0.4).0, 0.0);
        assert_eq!(cut.chi(2.3).0, 0.0);
        assert_eq!(cut.chi(1.0).0, 1.0);
        assert_eq!(cut.chi(0.8).0, 1.0);
        let (v, d) = cut.chi(0.6);
        assert!(v > 0.0 && v < 1.0 && d > 0.0);
        // chi' against finite differences
        let fd = (cut.chi(0.6 + 1e-6).0 - cut.chi(0.6 - 1e-6).0) / 2e-6;
        assert!((fd - d).abs() < 1e-6 * (1.0 + d.abs()));
    }

    #[test]
    fn standard_graph_is_zero() {
        let emb = EmbeddingN::standard();
        let nt = NodeTransport::new(PointCP1::from_c(c(0.3, -0.2)), 0.7);
        let g = TransportedGraph::new(&emb, &nt);
        for k in 0..12 {
            let eta = c(0.0, k as f64 * 0.5).exp() * (0.6 + 0.1 * (k % 5) as f64);
            assert!(g.eval(eta).unwrap().norm() < 1e-13);
        }
    }

    #[test]
    fn identity_transport_graph_is_closed_form() {
        // T = id, phi0 = id, single bump: h(eta) = eps chi(|eta|) c eta^m conj(eta)^n.
        let emb = EmbeddingN::single_bump(1e-3, 2, 1, c(0.8, -0.3));
        let nt = NodeTransport::new(PointCP1::from_c(c(0.0, 0.0)), 0.0);
        let g = TransportedGraph::new(&emb, &nt);
        for k in 0..10 {
            let eta = c(0.0, 0.61 * k as f64).exp() * (0.55 + 0.15 * (k % 4) as f64);
            let chi = emb.cutoff.chi(eta.norm()).0;
            let expect = 1e-3 * chi * c(0.8, -0.3) * eta * eta * eta.conj();
            assert!((g.eval(eta).unwrap() - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn rescaling_identity_h_r() {
        // At lambda = 0 the transported graph is exactly h^r(z) = r h(z/r).
        let emb = EmbeddingN::single_bump(1e-3, 1, 2, c(0.5, 0.4));
        let t = 0.4f64;
        let r = t.exp();
        let nt = NodeTransport::new(PointCP1::from_c(c(0.0, 0.0)), t);
        let g = TransportedGraph::new(&emb, &nt);
        let id_nt = NodeTransport::new(PointCP1::from_c(c(0.0, 0.0)), 0.0);
        let g0 = TransportedGraph::new(&emb, &id_nt);
        let mut saw_nonzero = false;
        for k in 0..10 {
            let eta = c(0.0, 0.37 * k as f64).exp() * (0.8 + 0.1 * (k % 5) as f64);
            let ht = g.eval(eta).unwrap();
            let hr = r * g0.eval(eta / r).unwrap();
            saw_nonzero |= hr.norm() > 1e-6;
            assert!((ht - hr).norm() < 1e-14 + 1e-12 * hr.norm());
        }
        assert!(saw_nonzero, "test samples missed the bump support");
    }

    #[test]
    fn graph_point_lies_on_transported_n() {
        let emb = EmbeddingN::single_bump(2e-3, 2, -1, c(0.6, 0.2));
        let lam = PointCP1::from_c(c(0.25, 0.1));
        let nt = NodeTransport::new(lam, 0.4);
        let g = TransportedGraph::new(&emb, &nt);
        let t_moeb = nt.fwd_moebius();
        for k in 0..8 {
            let eta = c(0.0, 0.8 * k as f64).exp() * 1.05;
            let h = g.eval(eta).unwrap();
            // (eta, tau(eta + h)) must be psl_action(T) of a point of N
            let q = PointZ::new(PointCP1::from_c(eta), tau(PointCP1::from_c(eta + h)));
            let w = nt.inv.apply_point(q.first);
            let on_n = emb.n_point(w);
            let moved = psl_action(&t_moeb, on_n);
            assert!(crate::cp1::dist_z(moved, q) < 1e-12);
        }
    }

    #[test]
    fn wirtinger_jet_matches_finite_differences() {
        let emb = EmbeddingN::single_bump(5e-3, 2, 1, c(0.8, -0.1));
        let nt = NodeTransport::new(PointCP1::from_c(c(0.2, -0.3)), 0.5);
        let g = TransportedGraph::new(&emb, &nt);
        let eta = c(0.9, 0.35);
        let (_, h_eta, h_etab) = g.jet(eta).unwrap();
        let s = 1e-6;
        let hx = (g.eval(eta + c(s, 0.0)).unwrap() - g.eval(eta - c(s, 0.0)).unwrap()) / (2.0 * s);
        let hy = (g.eval(eta + c(0.0, s)).unwrap() - g.eval(eta - c(0.0, s)).unwrap()) / (2.0 * s);
        // f_x = f_eta + f_etabar, f_y = i (f_eta - f_etabar)
        let fd_eta = (hx - hy * C64::new(0.0, 1.0)) / 2.0;
        let fd_etab = (hx + hy * C64::new(0.0, 1.0)) / 2.0;
        assert!((fd_eta - h_eta).norm() < 1e-8);
        assert!((fd_etab - h_etab).norm() < 1e-8);
    }

    #[test]
    fn parameter_derivative_matches_finite_differences() {
        let emb = EmbeddingN::single_bump(5e-3, 1, 1, c(0.3, 0.7));
        let lam = c(0.15, -0.22);
        let t0 = 0.35;
        let eta = c(1.1, -0.2);
        let nt = NodeTransport::new(PointCP1::from_c(lam), t0);
        let g = TransportedGraph::new(&emb, &nt);
        let s = 1e-6;
        for k in 0..3 {
            let an = g.dparam(eta, k).unwrap();
            let mut dl = [c(0.0, 0.0); 3];
            dl[k] = c(1.0, 0.0);
            let shift = |sign: f64| {
                let lam_s = lam + sign * s * (dl[0] + C64::new(0.0, 1.0) * dl[1]);
                let t_s = t0 + sign * s * dl[2].re;
                let nt_s = NodeTransport::new(PointCP1::from_c(lam_s), t_s);
                let g_s = TransportedGraph::new(&emb, &nt_s);
                g_s.eval(eta).unwrap()
            };
            let fd = (shift(1.0) - shift(-1.0)) / (2.0 * s);
            assert!((fd - an).norm() < 1e-7, "param {k}: fd={fd}, an={an}");
        }
    }

    #[test]
    fn newton_inversion_matches_exact_inverse() {
        let emb = EmbeddingN::single_bump(1e-3, 2, 0, c(1.0, 0.0));
        let nt = NodeTransport::new(PointCP1::from_c(c(0.3, 0.4)), -0.6);
        let g = TransportedGraph::new(&emb, &nt);
        let eta = c(0.8, 0.5);
        let w = g.invert_first_coordinate(eta).unwrap();
        let exact = nt.inv.apply(eta);
        assert!((w - exact).norm() < 1e-10);
    }

    #[test]
    fn validate_refuses_large_epsilon() {
        let emb = EmbeddingN::single_bump(0.1, 1, 1, c(1.0, 0.0));
        assert!(emb.validate(0.02).is_err());
        let ok = EmbeddingN::single_bump(1e-3, 1, 1, c(1.0, 0.0));
        let rep = ok.validate(0.02).unwrap();
        assert!(rep.min_jacobian > 0.9);
        assert!(rep.sup_h > 0.0 && rep.sup_h < 5e-3);
    }

    #[test]
    fn graph_residual_zero_on_n() {
        let emb = EmbeddingN::single_bump(1e-3, 2, 1, c(0.4, 0.2));
        for k in 0..8 {
            let eta = PointCP1::from_c(c(0.0, 0.9 * k as f64).exp() * 1.2);
            let p = emb.n_point(eta);
            assert!(emb.graph_residual(p) < 1e-15);
        }
        let off = PointZ::from_c(c(1.0, 0.0), c(1.1, 0.0));
        assert!(emb.graph_residual(off) > 1e-3);
    }
}
