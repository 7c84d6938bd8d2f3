//! Truncated Fourier series a_l e^{il theta}, l in [-m_modes, m_modes], with
//! FFT-backed evaluation on uniform theta grids. The grid is oversampled
//! (4 * m_modes points) so the nonlinear boundary operators stay alias-free.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FourierSeries {
    /// Coefficient of e^{il theta} at index l + m_modes.
    pub coeffs: Vec<C64>,
    pub m_modes: usize,
}

impl FourierSeries {
    pub fn zero(m_modes: usize) -> Self {
        FourierSeries {
            coeffs: vec![C64::new(0.0, 0.0); 2 * m_modes + 1],
            m_modes,
        }
    }

    pub fn coeff(&self, l: i64) -> C64 {
        let m = self.m_modes as i64;
        if l < -m || l > m {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(l + m) as usize]
        }
    }

    pub fn set_coeff(&mut self, l: i64, v: C64) {
        let m = self.m_modes as i64;
        assert!(l >= -m && l <= m, "mode {l} out of range");
        self.coeffs[(l + m) as usize] = v;
    }

    /// Constant Fourier coefficient a_0 (the projection called p in the
    /// boundary equations).
    pub fn mean(&self) -> C64 {
        self.coeff(0)
    }

    /// Sum over the negative modes of |a_l|; the holomorphic-extendability
    /// residual.
    pub fn neg_mode_norm(&self) -> f64 {
        (1..=self.m_modes as i64)
            .map(|l| self.coeff(-l).norm())
            .sum()
    }

    /// l2 norm of all coefficients.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn eval(&self, theta: f64) -> C64 {
        let e = C64::new(0.0, theta).exp();
        let m = self.m_modes as i64;
        // Horner in e^{i theta} for l >= 0 and in e^{-i theta} for l < 0.
        let mut pos = C64::new(0.0, 0.0);
        for l in (0..=m).rev() {
            pos = pos * e + self.coeff(l);
        }
        let einv = e.conj();
        let mut neg = C64::new(0.0, 0.0);
        for l in (1..=m).rev() {
            neg = neg * einv + self.coeff(-l);
        }
        pos + neg * einv
    }

    /// d/dtheta, as a series.
    pub fn derivative(&self) -> FourierSeries {
        let mut out = FourierSeries::zero(self.m_modes);
        let m = self.m_modes as i64;
        for l in -m..=m {
            out.set_coeff(l, self.coeff(l) * C64::new(0.0, l as f64));
        }
        out
    }

    /// Holomorphic extension sum_{l >= 0} a_l z^l evaluated inside the disk.
    /// Meaningful when the negative modes vanish.
    pub fn eval_holomorphic(&self, z: C64) -> C64 {
        let m = self.m_modes as i64;
        let mut acc = C64::new(0.0, 0.0);
        for l in (0..=m).rev() {
            acc = acc * z + self.coeff(l);
        }
        acc
    }

    /// d/dz of the holomorphic extension.
    pub fn eval_holomorphic_deriv(&self, z: C64) -> C64 {
        let m = self.m_modes as i64;
        let mut acc = C64::new(0.0, 0.0);
        for l in (1..=m).rev() {
            acc = acc * z + self.coeff(l) * (l as f64);
        }
        acc
    }

    /// Ratio of coefficient energy in the last octave of modes to the total;
    /// a cheap spectral-decay monitor.
    pub fn tail_energy_ratio(&self) -> f64 {
        let m = self.m_modes as i64;
        let cut = (m / 2).max(1);
        let total: f64 = self.coeffs.iter().map(|c| c.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let tail: f64 = (cut..=m)
            .map(|l| self.coeff(l).norm_sqr() + self.coeff(-l).norm_sqr())
            .sum();
        tail / total
    }
}

/// Shared FFT machinery for one grid size.
pub struct ThetaGrid {
    pub n: usize,
    pub m_modes: usize,
    pub thetas: Vec<f64>,
    fwd: Arc<dyn rustfft::Fft<f64>>,
}

impl ThetaGrid {
    /// Grid with n = 4 * m_modes points (power-of-two friendly oversampling).
    pub fn new(m_modes: usize) -> Self {
        let n = (4 * m_modes).max(8);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let thetas = (0..n)
            .map(|k| k as f64 * std::f64::consts::TAU / n as f64)
            .collect();
        ThetaGrid {
            n,
            m_modes,
            thetas,
            fwd,
        }
    }

    /// Sample a series on the grid.
    pub fn sample(&self, s: &FourierSeries) -> Vec<C64> {
        // Direct synthesis via the inverse DFT relation: pad coefficients
        // into bins and run one FFT of conjugates; cheaper and exact enough
        // here is plain Horner on e^{i theta} per point.
        self.thetas.iter().map(|&th| s.eval(th)).collect()
    }

    /// Pointwise values -> truncated coefficients (l in [-m, m]) by forward FFT.
    pub fn analyze(&self, values: &[C64]) -> FourierSeries {
        assert_eq!(values.len(), self.n);
        let mut buf = values.to_vec();
        self.fwd.process(&mut buf);
        let mut out = FourierSeries::zero(self.m_modes);
        let n = self.n;
        let scale = 1.0 / n as f64;
        let m = self.m_modes as i64;
        for l in -m..=m {
            let idx = ((l % n as i64) + n as i64) as usize % n;
            out.set_coeff(l, buf[idx] * scale);
        }
        out
    }
}
