//! Exact arithmetic on the Riemann sphere: two-chart points, Mobius maps,
//! oriented circles, the real structures sigma/tau and the transporter family.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::ops::Mul;

use crate::error::GeomError;

pub type C64 = Complex64;

/// Which inhomogeneous coordinate a [`PointCP1`] value lives in.
/// Chart 0 stores eta, chart 1 stores 1/eta.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    Zero,
    One,
}

/// Point on CP^1 kept in whichever chart has |value| <= 1 (always <= 2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointCP1 {
    pub chart: Chart,
    pub value: C64,
}

impl PointCP1 {
    pub fn from_c(z: C64) -> Self {
        Self::from_homogeneous(z, C64::new(1.0, 0.0))
    }

    pub fn infinity() -> Self {
        PointCP1 {
            chart: Chart::One,
            value: C64::new(0.0, 0.0),
        }
    }

    /// [u : v] with eta = u/v; picks the chart so |value| <= 1.
    pub fn from_homogeneous(u: C64, v: C64) -> Self {
        if u.norm_sqr() <= v.norm_sqr() {
            PointCP1 {
                chart: Chart::Zero,
                value: u / v,
            }
        } else {
            PointCP1 {
                chart: Chart::One,
                value: v / u,
            }
        }
    }

    /// Homogeneous representative (u, v), eta = u/v.
    pub fn homogeneous(&self) -> (C64, C64) {
        match self.chart {
            Chart::Zero => (self.value, C64::new(1.0, 0.0)),
            Chart::One => (C64::new(1.0, 0.0), self.value),
        }
    }

    /// Representation in the other chart (value -> 1/value).
    pub fn switch_chart(&self) -> Self {
        let chart = match self.chart {
            Chart::Zero => Chart::One,
            Chart::One => Chart::Zero,
        };
        PointCP1 {
            chart,
            value: self.value.inv(),
        }
    }

    pub fn is_infinity(&self) -> bool {
        self.chart == Chart::One && self.value.norm() == 0.0
    }

    /// Chart-0 value; infinite if the point is at infinity.
    pub fn to_c(&self) -> C64 {
        match self.chart {
            Chart::Zero => self.value,
            Chart::One => self.value.inv(),
        }
    }

    /// Value in the requested chart, even if it is the far one.
    pub fn value_in(&self, chart: Chart) -> C64 {
        if self.chart == chart {
            self.value
        } else {
            self.value.inv()
        }
    }
}

/// tau(eta) = conj(eta)^{-1}; exact on homogeneous coordinates.
pub fn tau(p: PointCP1) -> PointCP1 {
    let (u, v) = p.homogeneous();
    PointCP1::from_homogeneous(v.conj(), u.conj())
}

/// Chordal distance |u1 v2 - u2 v1| / sqrt((|u1|^2+|v1|^2)(|u2|^2+|v2|^2)),
/// normalized to 1 for antipodal pairs.
pub fn chordal(p: PointCP1, q: PointCP1) -> f64 {
    let (u1, v1) = p.homogeneous();
    let (u2, v2) = q.homogeneous();
    let num = (u1 * v2 - u2 * v1).norm();
    let den = ((u1.norm_sqr() + v1.norm_sqr()) * (u2.norm_sqr() + v2.norm_sqr())).sqrt();
    num / den
}

/// Stereographic projection onto the unit sphere, 0 -> north pole (0,0,1).
pub fn stereographic(p: PointCP1) -> [f64; 3] {
    match p.chart {
        Chart::Zero => {
            let l = p.value;
            let d = 1.0 + l.norm_sqr();
            [2.0 * l.re / d, 2.0 * l.im / d, (1.0 - l.norm_sqr()) / d]
        }
        Chart::One => {
            let w = p.value;
            let d = 1.0 + w.norm_sqr();
            [2.0 * w.re / d, -2.0 * w.im / d, (w.norm_sqr() - 1.0) / d]
        }
    }
}

/// Inverse of [`stereographic`]; input need not be exactly unit norm.
pub fn stereographic_inv(x: [f64; 3]) -> PointCP1 {
    if x[2] >= 0.0 {
        // eta = (x1 + i x2) / (1 + x3)
        PointCP1::from_homogeneous(C64::new(x[0], x[1]), C64::new(1.0 + x[2], 0.0))
    } else {
        PointCP1 {
            chart: Chart::One,
            value: C64::new(x[0], -x[1]) / (1.0 - x[2]),
        }
    }
}

/// Mobius transformation eta -> (a eta + b)/(c eta + d), stored with |det| = 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Moebius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Moebius {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Result<Self, GeomError> {
        let det = a * d - b * c;
        if det.norm() < 1e-300 {
            return Err(GeomError::DegenerateMoebius);
        }
        let s = det.norm().sqrt();
        Ok(Moebius {
            a: a / s,
            b: b / s,
            c: c / s,
            d: d / s,
        })
    }

    pub fn identity() -> Self {
        Moebius {
            a: C64::new(1.0, 0.0),
            b: C64::new(0.0, 0.0),
            c: C64::new(0.0, 0.0),
            d: C64::new(1.0, 0.0),
        }
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    pub fn inverse(&self) -> Self {
        Moebius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// tau . T . tau, again a Mobius map: [[conj d, conj c], [conj b, conj a]].
    pub fn conj_transport(&self) -> Self {
        Moebius {
            a: self.d.conj(),
            b: self.c.conj(),
            c: self.b.conj(),
            d: self.a.conj(),
        }
    }

    /// Chart-safe application via homogeneous coordinates; poles land in chart 1.
    pub fn apply(&self, p: PointCP1) -> PointCP1 {
        let (u, v) = p.homogeneous();
        PointCP1::from_homogeneous(self.a * u + self.b * v, self.c * u + self.d * v)
    }

    /// Plain chart-0 evaluation; caller guarantees the result stays finite.
    pub fn apply_c(&self, w: C64) -> C64 {
        (self.a * w + self.b) / (self.c * w + self.d)
    }

    /// Holomorphic derivative at a finite chart-0 point.
    pub fn deriv_c(&self, w: C64) -> C64 {
        let den = self.c * w + self.d;
        self.det() / (den * den)
    }
}

impl Mul for Moebius {
    type Output = Moebius;

    fn mul(self, rhs: Self) -> Self {
        // det is multiplicative, so the product is already |det| = 1.
        Moebius {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }
}

/// Point of Z = CP^1 x CP^1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PointZ {
    pub first: PointCP1,
    pub second: PointCP1,
}

impl PointZ {
    pub fn new(first: PointCP1, second: PointCP1) -> Self {
        PointZ { first, second }
    }

    pub fn from_c(a: C64, b: C64) -> Self {
        PointZ {
            first: PointCP1::from_c(a),
            second: PointCP1::from_c(b),
        }
    }
}

/// Product chordal distance on Z.
pub fn dist_z(p: PointZ, q: PointZ) -> f64 {
    chordal(p.first, q.first).hypot(chordal(p.second, q.second))
}

/// The antiholomorphic involution sigma(eta1, eta2) = (tau(eta2), tau(eta1)).
pub fn sigma(p: PointZ) -> PointZ {
    PointZ {
        first: tau(p.second),
        second: tau(p.first),
    }
}

/// phi_* (eta1, eta2) = (phi(eta1), tau phi tau (eta2)); commutes with sigma
/// and preserves Z_R.
pub fn psl_action(phi: &Moebius, p: PointZ) -> PointZ {
    PointZ {
        first: phi.apply(p.first),
        second: phi.conj_transport().apply(p.second),
    }
}

/// Transporter T(lambda, t) with psl_action(T) mapping the standard disk
/// D_{(lambda,t)} onto D_{(0,0)}. In chart 0 the matrix is
/// [[r, -r lambda], [conj lambda, 1]] with r = e^t, up to normalization.
pub fn transporter(lambda: PointCP1, t: f64) -> Moebius {
    let r = t.exp();
    match lambda.chart {
        Chart::Zero => {
            let l = lambda.value;
            Moebius::new(
                C64::new(r, 0.0),
                -r * l,
                l.conj(),
                C64::new(1.0, 0.0),
            )
            .expect("transporter is nondegenerate for finite t")
        }
        Chart::One => {
            let m = lambda.value;
            Moebius::new(
                r * m,
                C64::new(-r, 0.0),
                C64::new(1.0, 0.0),
                m.conj(),
            )
            .expect("transporter is nondegenerate for finite t")
        }
    }
}

/// Oriented circle A|w|^2 - B conj(w) - conj(B) w + C = 0, |B|^2 - AC = 1.
/// (A,B,C) and (-A,-B,-C) are the two orientations of the same circle.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CircleABC {
    pub a: f64,
    pub b: C64,
    pub c: f64,
}

impl CircleABC {
    pub fn new(a: f64, b: C64, c: f64) -> Result<Self, GeomError> {
        let n = b.norm_sqr() - a * c;
        if n <= 0.0 {
            return Err(GeomError::DegenerateCircle);
        }
        let s = n.sqrt();
        Ok(CircleABC {
            a: a / s,
            b: b / s,
            c: c / s,
        })
    }

    pub fn flipped(&self) -> Self {
        CircleABC {
            a: -self.a,
            b: -self.b,
            c: -self.c,
        }
    }

    /// Signed membership; zero on the circle, negative on the disk side the
    /// orientation encloses. Chart-1 points are evaluated with the exact
    /// chart-1 parameters (C, conj B, A), which rescales by |value|^2 > 0.
    pub fn membership(&self, w: PointCP1) -> f64 {
        match w.chart {
            Chart::Zero => {
                let z = w.value;
                self.a * z.norm_sqr() - 2.0 * (self.b * z.conj()).re + self.c
            }
            Chart::One => {
                let v = w.value;
                self.c * v.norm_sqr() - 2.0 * (self.b.conj() * v.conj()).re + self.a
            }
        }
    }

    /// Oriented circle through three finite chart-0 points, oriented so the
    /// traversal w1 -> w2 -> w3 is positive.
    pub fn through(w1: C64, w2: C64, w3: C64) -> Result<Self, GeomError> {
        let pts = [w1, w2, w3];
        for i in 0..3 {
            for j in (i + 1)..3 {
                if (pts[i] - pts[j]).norm() < 1e-14 {
                    return Err(GeomError::CoincidentPoints);
                }
            }
        }
        // Rows of the homogeneous system in (A, Re B, Im B, C), padded square
        // so the SVD exposes the nullvector.
        let mut m = nalgebra::DMatrix::<f64>::zeros(4, 4);
        for (i, w) in pts.iter().enumerate() {
            m[(i, 0)] = w.norm_sqr();
            m[(i, 1)] = -2.0 * w.re;
            m[(i, 2)] = -2.0 * w.im;
            m[(i, 3)] = 1.0;
        }
        let svd = m.svd(false, true);
        let vt = svd.v_t.as_ref().expect("svd with v_t");
        let mut best = 0;
        for k in 1..4 {
            if svd.singular_values[k] < svd.singular_values[best] {
                best = k;
            }
        }
        let null = vt.row(best);
        let (a, b, c) = (null[0], C64::new(null[1], null[2]), null[3]);
        let mut circ = CircleABC::new(a, b, c)?;
        // Positive traversal w1 -> w2 -> w3 keeps the enclosed (negative
        // membership) side on the left. For a counterclockwise triple that
        // side is the bounded disk, i.e. A > 0; clockwise gives A < 0.
        let cross = ((w2 - w1).conj() * (w3 - w1)).im;
        let scale = (w2 - w1).norm() * (w3 - w1).norm();
        if cross.abs() > 1e-9 * scale {
            if circ.a * cross < 0.0 {
                circ = circ.flipped();
            }
        } else {
            // Near-collinear triple: the chord is the tangent.
            let tangent = C64::new(0.0, 1.0) * (circ.a * w1 - circ.b);
            if (tangent.conj() * (w2 - w1)).re < 0.0 {
                circ = circ.flipped();
            }
        }
        Ok(circ)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn moebius_identity_fixes_point() {
        let p = PointCP1::from_c(c(0.3, 0.1));
        let q = Moebius::identity().apply(p);
        assert!(chordal(p, q) < 1e-15);
    }

    #[test]
    fn moebius_diagonal_action() {
        // diag(e^{-t}, e^{t}) with t = 0.5 sends eta = 1 to e^{-2t}.
        let t = 0.5f64;
        let m = Moebius::new(c((-t).exp(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(t.exp(), 0.0))
            .unwrap();
        let q = m.apply(PointCP1::from_c(c(1.0, 0.0)));
        assert!((q.to_c() - c((-1.0f64).exp(), 0.0)).norm() < 1e-15);
        assert!((q.to_c().re - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn moebius_inversion() {
        let m = Moebius::new(c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let q = m.apply(PointCP1::from_c(c(2.0, 0.0)));
        assert!((q.to_c() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn moebius_pole_goes_to_infinity() {
        let m = Moebius::new(c(1.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(-2.0, 0.0)).unwrap();
        let q = m.apply(PointCP1::from_c(c(2.0, 0.0)));
        assert!(q.is_infinity());
    }

    #[test]
    fn sigma_fixed_point_on_z_r() {
        // (2, 0.5) satisfies eta2 = conj(eta1)^{-1}, so it is sigma-fixed.
        let p = PointZ::from_c(c(2.0, 0.0), c(0.5, 0.0));
        let q = sigma(p);
        assert!(dist_z(p, q) < 1e-15);
    }

    #[test]
    fn sigma_pole_case() {
        let p = PointZ::from_c(c(0.0, 0.0), c(0.7, -0.2));
        let q = sigma(p);
        assert!(chordal(q.first, tau(PointCP1::from_c(c(0.7, -0.2)))) < 1e-15);
        assert!(q.second.is_infinity());
    }

    #[test]
    fn sigma_direct_evaluation() {
        let p = PointZ::from_c(c(1.0, 1.0), c(3.0, 0.0));
        let q = sigma(p);
        // tau(3) = 1/3 and tau(1+i) = 1/(1-i) = (1+i)/2.
        assert!((q.first.to_c() - c(1.0 / 3.0, 0.0)).norm() < 1e-15);
        assert!((q.second.to_c() - c(0.5, 0.5)).norm() < 1e-15);
    }

    #[test]
    fn psl_action_diagonal_scaling() {
        // tau phi tau of diag(e^{-1/2}, e^{1/2}) is the inverse scaling by e.
        let m = Moebius::new(c((-0.5f64).exp(), 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.5f64.exp(), 0.0))
            .unwrap();
        let p = PointZ::from_c(c(0.2, 0.0), c(0.7, 0.0));
        let q = psl_action(&m, p);
        assert!((q.first.to_c() - 0.2 * (-1.0f64).exp()).norm() < 1e-15);
        assert!((q.second.to_c() - 0.7 * 1.0f64.exp()).norm() < 1e-14);
    }

    #[test]
    fn psl_action_preserves_z_r() {
        let m = Moebius::new(c(1.1, 0.3), c(0.2, -0.4), c(0.05, 0.1), c(0.9, 0.0)).unwrap();
        for k in 0..8 {
            let eta = c(0.6 * (k as f64 * 0.7).cos(), 0.6 * (k as f64 * 0.7).sin()) + c(0.3, 0.0);
            let p = PointZ::new(PointCP1::from_c(eta), tau(PointCP1::from_c(eta)));
            let q = psl_action(&m, p);
            // image still satisfies eta2 = tau(eta1)
            assert!(chordal(q.second, tau(q.first)) < 1e-14);
        }
    }

    #[test]
    fn transporter_special_cases() {
        let id = transporter(PointCP1::from_c(c(0.0, 0.0)), 0.0);
        let p = PointCP1::from_c(c(0.37, -0.2));
        assert!(chordal(id.apply(p), p) < 1e-15);

        // (0, t): eta -> e^t eta.
        let t = 0.8;
        let m = transporter(PointCP1::from_c(c(0.0, 0.0)), t);
        let q = m.apply(PointCP1::from_c(c(0.1, 0.2)));
        assert!((q.to_c() - c(0.1, 0.2) * t.exp()).norm() < 1e-14);
    }

    #[test]
    fn circle_membership_unit_circle() {
        let circ = CircleABC::new(1.0, c(0.0, 0.0), -1.0).unwrap();
        for k in 0..16 {
            let th = k as f64 * std::f64::consts::TAU / 16.0;
            let w = PointCP1::from_c(c(th.cos(), th.sin()));
            assert!(circ.membership(w).abs() < 1e-14);
        }
        assert!((circ.membership(PointCP1::from_c(c(0.0, 0.0))) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn circle_membership_scaled_radius() {
        let t = 0.6f64;
        let circ = CircleABC::new(t.exp(), c(0.0, 0.0), -(-t).exp()).unwrap();
        let w = PointCP1::from_c(c((-t).exp(), 0.0));
        assert!(circ.membership(w).abs() < 1e-14);
    }

    #[test]
    fn circle_through_unit_samples() {
        let w = |th: f64| c(th.cos(), th.sin());
        let circ = CircleABC::through(w(0.0), w(2.1), w(4.2)).unwrap();
        assert!((circ.a - 1.0).abs() < 1e-12);
        assert!(circ.b.norm() < 1e-12);
        assert!((circ.c + 1.0).abs() < 1e-12);
        // reversed traversal flips orientation
        let rev = CircleABC::through(w(4.2), w(2.1), w(0.0)).unwrap();
        assert!((rev.a + 1.0).abs() < 1e-12);
    }

    #[test]
    fn stereographic_special_points() {
        let n = stereographic(PointCP1::from_c(c(0.0, 0.0)));
        assert!((n[2] - 1.0).abs() < 1e-15 && n[0].abs() < 1e-15);
        let s = stereographic(PointCP1::infinity());
        assert!((s[2] + 1.0).abs() < 1e-15);
        let e = stereographic(PointCP1::from_c(c(1.0, 0.0)));
        assert!((e[0] - 1.0).abs() < 1e-15 && e[1].abs() < 1e-15 && e[2].abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn composition_matches_sequential(ar in -2.0..2.0f64, ai in -2.0..2.0f64,
                                          br in -2.0..2.0f64, bi in -2.0..2.0f64,
                                          cr in -2.0..2.0f64, ci in -2.0..2.0f64,
                                          pr in -3.0..3.0f64, pi in -3.0..3.0f64) {
            let s = Moebius::new(c(ar, ai), c(br, bi), c(0.3, 0.1), c(1.0, 0.4));
            let t = Moebius::new(c(1.0, cr), c(ci, 0.2), c(br, 0.0), c(ar.abs() + 1.5, 0.0));
            if let (Ok(s), Ok(t)) = (s, t) {
                let p = PointCP1::from_c(c(pr, pi));
                let lhs = (s * t).apply(p);
                let rhs = s.apply(t.apply(p));
                prop_assert!(chordal(lhs, rhs) < 1e-12);
            }
        }

        #[test]
        fn sigma_is_involution(ar in -3.0..3.0f64, ai in -3.0..3.0f64,
                               br in -3.0..3.0f64, bi in -3.0..3.0f64) {
            let p = PointZ::from_c(c(ar, ai), c(br, bi));
            let q = sigma(sigma(p));
            prop_assert!(dist_z(p, q) < 1e-14);
        }

        #[test]
        fn chart_switch_round_trip(re in -2.0..2.0f64, im in -2.0..2.0f64) {
            prop_assume!(re.hypot(im) > 1e-6);
            let p = PointCP1::from_c(c(re, im));
            let q = p.switch_chart().switch_chart();
            prop_assert_eq!(p.chart, q.chart);
            prop_assert!((p.value - q.value).norm() <= 1e-15 * (1.0 + p.value.norm()));
        }

        #[test]
        fn membership_sign_flip(aa in 0.3..2.0f64, br in -1.0..1.0f64, bi in -1.0..1.0f64,
                                wr in -2.0..2.0f64, wi in -2.0..2.0f64) {
            let cc = (br * br + bi * bi - 1.0) / aa;
            if let Ok(circ) = CircleABC::new(aa, c(br, bi), cc) {
                let w = PointCP1::from_c(c(wr, wi));
                let m1 = circ.membership(w);
                let m2 = circ.flipped().membership(w);
                prop_assert!((m1 + m2).abs() < 1e-12 * (1.0 + m1.abs()));
            }
        }

        #[test]
        fn transporter_inverse_is_identity(lr in -0.9..0.9f64, li in -0.9..0.9f64,
                                           t in -2.0..2.0f64,
                                           pr in -1.5..1.5f64, pi in -1.5..1.5f64) {
            let tr = transporter(PointCP1::from_c(c(lr, li)), t);
            let p = PointCP1::from_c(c(pr, pi));
            let q = tr.inverse().apply(tr.apply(p));
            prop_assert!(chordal(p, q) < 1e-12);
        }

        #[test]
        fn stereographic_round_trip(re in -4.0..4.0f64, im in -4.0..4.0f64) {
            let p = PointCP1::from_c(c(re, im));
            let x = stereographic(p);
            let norm: f64 = x.iter().map(|v| v * v).sum();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            let q = stereographic_inv(x);
            prop_assert!(chordal(p, q) < 1e-12);
        }
    }
}
