//! Closed-form standard family of holomorphic disks on (Z, Z_R): disk maps,
//! boundary circles, incidence, and t -> +/-infinity limits. Everything here
//! is analytic and serves as the oracle for the numerical solver.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::cp1::{
    chordal, dist_z, psl_action, tau, transporter, Chart, CircleABC, PointCP1, PointZ,
};

/// Parameters (lambda, t) of a standard disk; r = e^t.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StandardDiskParams {
    pub lambda: PointCP1,
    pub t: f64,
}

impl StandardDiskParams {
    pub fn new(lambda: PointCP1, t: f64) -> Self {
        assert!(t.is_finite(), "standard disks require finite t");
        StandardDiskParams { lambda, t }
    }
}

/// The disk map f(lambda, t; z) for |z| <= 1, chart-aware.
///
/// Chart 0:  ( (z + r l)/(-conj(l) z + r),  (r z - l)/(r conj(l) z + 1) ).
/// Chart 1 (m = 1/l):  ( (conj(m) z + r)/(-z + r m),  (r conj(m) z - 1)/(r z + m) ),
/// glued by z_1 = (l_1/conj(l_1)) z_2.
pub fn std_disk_map(params: StandardDiskParams, z: C64) -> PointZ {
    let r = params.t.exp();
    match params.lambda.chart {
        Chart::Zero => {
            let l = params.lambda.value;
            let first = PointCP1::from_homogeneous(z + r * l, -l.conj() * z + r);
            let second = PointCP1::from_homogeneous(r * z - l, r * l.conj() * z + 1.0);
            PointZ::new(first, second)
        }
        Chart::One => {
            let m = params.lambda.value;
            let first = PointCP1::from_homogeneous(m.conj() * z + r, -z + r * m);
            let second = PointCP1::from_homogeneous(r * m.conj() * z - 1.0, r * z + m);
            PointZ::new(first, second)
        }
    }
}

/// Oriented boundary circle of the standard disk, in the chart-0 (A, B, C)
/// normalization; orientation induced by increasing theta.
pub fn std_boundary_circle(params: StandardDiskParams) -> CircleABC {
    let r = params.t.exp();
    match params.lambda.chart {
        Chart::Zero => {
            let l = params.lambda.value;
            let den = r * (1.0 + l.norm_sqr());
            CircleABC::new(
                (r * r - l.norm_sqr()) / den,
                (r * r + 1.0) * l / den,
                (r * r * l.norm_sqr() - 1.0) / den,
            )
            .expect("standard boundary circle is nondegenerate")
        }
        Chart::One => {
            // Same closed form in the chart-1 coordinate, converted to the
            // chart-0 parameters by (A', B', C') -> (C', conj B', A').
            let m = params.lambda.value;
            let den = r * (1.0 + m.norm_sqr());
            let a1 = (r * r - m.norm_sqr()) / den;
            let b1 = (r * r + 1.0) * m / den;
            let c1 = (r * r * m.norm_sqr() - 1.0) / den;
            CircleABC::new(c1, b1.conj(), a1).expect("standard boundary circle is nondegenerate")
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Containment {
    Interior,
    Boundary,
    Outside,
}

/// Incidence of a point with the closed standard disk, decided by inverting
/// the first-component Mobius map (the transporter) and testing |z|.
pub fn std_contains(params: StandardDiskParams, p: PointZ, tol: f64) -> Containment {
    let t = transporter(params.lambda, params.t);
    let z_pt = t.apply(p.first);
    if z_pt.chart == Chart::One && z_pt.value.norm() < 1.0 {
        return Containment::Outside;
    }
    let z = z_pt.to_c();
    // p must lie on the twistor line: second components must agree.
    let on_line = std_disk_map(params, z);
    if chordal(on_line.second, p.second) > tol {
        return Containment::Outside;
    }
    let m = z.norm();
    if m < 1.0 - tol {
        Containment::Interior
    } else if m <= 1.0 + tol {
        Containment::Boundary
    } else {
        Containment::Outside
    }
}

/// A projective line in Z together with a marked point: the t -> +/-infinity
/// degenerations of the standard family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum LimitLine {
    /// {lambda} x CP^1
    FirstFactor(PointCP1),
    /// CP^1 x {mu}
    SecondFactor(PointCP1),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkedLine {
    pub line: LimitLine,
    pub marked: PointZ,
}

fn neg(p: PointCP1) -> PointCP1 {
    let (u, v) = p.homogeneous();
    PointCP1::from_homogeneous(-u, v)
}

/// Limit of D_{(lambda, t)} as t -> +inf ({lambda} x CP^1 marked at
/// (lambda, tau lambda)) or t -> -inf (CP^1 x {-lambda} marked at
/// (-tau lambda, -lambda)).
pub fn std_limit_disk(lambda: PointCP1, plus_infinity: bool) -> MarkedLine {
    if plus_infinity {
        MarkedLine {
            line: LimitLine::FirstFactor(lambda),
            marked: PointZ::new(lambda, tau(lambda)),
        }
    } else {
        MarkedLine {
            line: LimitLine::SecondFactor(neg(lambda)),
            marked: PointZ::new(neg(tau(lambda)), neg(lambda)),
        }
    }
}

/// Chordal distance from a point of Z to a limit line.
pub fn dist_to_line(line: &LimitLine, p: PointZ) -> f64 {
    match line {
        LimitLine::FirstFactor(l) => chordal(p.first, *l),
        LimitLine::SecondFactor(m) => chordal(p.second, *m),
    }
}

/// Solves for the chart-0 lambda with p on the twistor line of (lambda, t),
/// by Newton on  (r^2 p2 - p1)|l|^2 - (r^2+1) l - (r^2+1) p1 p2 conj(l)
///               + (r^2 p1 - p2) = 0.
/// Both components of p must be finite in chart 0. Returns None if Newton
/// stalls from the given seed.
pub fn std_line_through(p1: C64, p2: C64, t: f64, seed: C64) -> Option<C64> {
    let r2 = (2.0 * t).exp();
    let qa = r2 * p2 - p1;
    let qb = -(r2 + 1.0);
    let qc = -(r2 + 1.0) * p1 * p2;
    let qd = r2 * p1 - p2;
    let f = |l: C64| qa * l.norm_sqr() + qb * l + qc * l.conj() + qd;
    // Wirtinger derivatives: f_l = qa conj(l) + qb, f_lbar = qa l + qc.
    let mut l = seed;
    for _ in 0..60 {
        let val = f(l);
        if val.norm() < 1e-13 * (1.0 + l.norm_sqr()) {
            return Some(l);
        }
        let fl = qa * l.conj() + qb;
        let flb = qa * l + qc;
        // Solve the real-linear system fl * dl + flb * conj(dl) = -val.
        let det = fl.norm_sqr() - flb.norm_sqr();
        if det.abs() < 1e-300 {
            return None;
        }
        let dl = (-val * fl.conj() + val.conj() * flb) / det;
        l += dl;
        if !l.re.is_finite() || !l.im.is_finite() || l.norm() > 1e8 {
            return None;
        }
    }
    None
}
