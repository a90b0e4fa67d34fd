//! Fundamental solutions of `JΨ' + S_λ(t)Ψ + isΨ = 0`, `Ψ(0) = I`.
//!
//! The system is integrated in the form `Ψ' = J(S_λ(t) + isI)Ψ` with classical
//! fourth-order Runge–Kutta on a uniform grid. Each run is paired with a run at
//! twice the step count; the difference divided by 15 is the Richardson error
//! estimate, and the step count doubles until the estimate meets the tolerance.

use std::ops::{Add, Mul, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CoefficientFamily, ParamPoint, PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorOptions {
    /// Initial number of RK4 steps on `[0, 2π]`.
    pub steps: usize,
    pub tol: f64,
    /// Ceiling on the step count of a single run.
    pub max_steps: usize,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        IntegratorOptions { steps: 2048, tol: 1e-9, max_steps: 1 << 22 }
    }
}

impl IntegratorOptions {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || !(self.tol > 0.0) || self.max_steps < self.steps {
            return Err(Error::Invalid(format!("bad integrator options {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalSolution {
    pub point: ParamPoint,
    pub shift: f64,
    /// `Ψ_z(2π)`.
    pub monodromy: DMatrix<Complex64>,
    pub steps: usize,
    pub error_estimate: f64,
    pub symplectic_residual: f64,
}

/// Real monodromy `Ψ_λ(2π)` for `s = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RealMonodromy {
    pub point: ParamPoint,
    pub monodromy: DMatrix<f64>,
    pub steps: usize,
    pub error_estimate: f64,
}

/// Field arithmetic needed by the stepper; implemented for `f64` and `Complex64`.
pub trait Scalar: Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Send + Sync {
    fn real(x: f64) -> Self;
    /// `i·s`, which must be zero for real scalars.
    fn imag_unit_times(s: f64) -> Self;
    fn modulus(self) -> f64;
    fn scale(self, x: f64) -> Self;
}

impl Scalar for f64 {
    fn real(x: f64) -> Self {
        x
    }
    fn imag_unit_times(s: f64) -> Self {
        assert!(s == 0.0, "real integration requires a zero spectral shift");
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
}

impl Scalar for Complex64 {
    fn real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn imag_unit_times(s: f64) -> Self {
        Complex64::new(0.0, s)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
}

/// Largest half-node count kept in memory; finer runs evaluate `S` on the fly.
const SAMPLE_CACHE_LIMIT: usize = 1 << 18;

/// Samples of `S_λ` at the half-step nodes `k·π/M`, `k = 0..=2M`, of an `M`-step run.
struct CoefficientSamples<'a> {
    family: &'a CoefficientFamily,
    point: ParamPoint,
    steps: usize,
    data: Option<Vec<f64>>,
    constant: Option<Vec<f64>>,
}

impl<'a> CoefficientSamples<'a> {
    fn new(family: &'a CoefficientFamily, point: ParamPoint, steps: usize) -> Result<Self> {
        let d = family.dim();
        if !family.is_time_dependent() {
            let mut c = vec![0.0; d * d];
            family.fill(point, 0.0, &mut c)?;
            return Ok(CoefficientSamples { family, point, steps, data: None, constant: Some(c) });
        }
        let mut samples = CoefficientSamples { family, point, steps, data: None, constant: None };
        if 2 * steps < SAMPLE_CACHE_LIMIT {
            let nodes = 2 * steps + 1;
            let mut data = vec![0.0; nodes * d * d];
            for k in 0..nodes {
                let t = PERIOD * k as f64 / (2 * steps) as f64;
                family.fill(point, t, &mut data[k * d * d..(k + 1) * d * d])?;
            }
            samples.data = Some(data);
        }
        Ok(samples)
    }

    /// Doubles the resolution, reusing existing samples at even nodes.
    fn refine(&mut self) -> Result<()> {
        let d2 = self.family.dim().pow(2);
        let new_steps = 2 * self.steps;
        if let Some(old) = self.data.take() {
            if 2 * new_steps < SAMPLE_CACHE_LIMIT {
                let nodes = 2 * new_steps + 1;
                let mut data = vec![0.0; nodes * d2];
                for k in 0..nodes {
                    let dst = &mut data[k * d2..(k + 1) * d2];
                    if k % 2 == 0 {
                        dst.copy_from_slice(&old[(k / 2) * d2..(k / 2 + 1) * d2]);
                    } else {
                        let t = PERIOD * k as f64 / (2 * new_steps) as f64;
                        self.family.fill(self.point, t, dst)?;
                    }
                }
                self.data = Some(data);
            }
        }
        self.steps = new_steps;
        Ok(())
    }

    /// `S` at half-node `k` of a run with `steps` steps (`steps` divides the cached resolution).
    fn at<'b>(&'b self, steps: usize, k: usize, scratch: &'b mut [f64]) -> Result<&'b [f64]> {
        if let Some(c) = &self.constant {
            return Ok(c);
        }
        let d2 = self.family.dim().pow(2);
        if let Some(data) = &self.data {
            let stride = self.steps / steps;
            let idx = k * stride;
            return Ok(&data[idx * d2..(idx + 1) * d2]);
        }
        let t = PERIOD * k as f64 / (2 * steps) as f64;
        self.family.fill(self.point, t, scratch)?;
        Ok(scratch)
    }
}

/// `out = J (S x + i s x)` for a column-major `d × d` block `x`.
fn apply_field<T: Scalar>(s_mat: &[f64], shift: T, half: usize, x: &[T], out: &mut [T], tmp: &mut [T]) {
    let d = 2 * half;
    for col in 0..d {
        let xc = &x[col * d..(col + 1) * d];
        for row in 0..d {
            let mut acc = shift * xc[row];
            for k in 0..d {
                let a = s_mat[k * d + row];
                if a != 0.0 {
                    acc = acc + xc[k].scale(a);
                }
            }
            tmp[row] = acc;
        }
        let oc = &mut out[col * d..(col + 1) * d];
        for i in 0..half {
            oc[i] = T::real(0.0) - tmp[i + half];
            oc[i + half] = tmp[i];
        }
    }
}

/// One RK4 run with `steps` steps; optionally records the trajectory.
fn rk4_run<T: Scalar>(
    samples: &CoefficientSamples<'_>,
    shift: f64,
    steps: usize,
    mut record: Option<&mut Vec<(f64, Vec<T>)>>,
) -> Result<Vec<T>> {
    let half = samples.family.half_dim();
    let d = 2 * half;
    let d2 = d * d;
    let shift_t = T::imag_unit_times(shift);
    let h = PERIOD / steps as f64;
    let mut y = vec![T::real(0.0); d2];
    for i in 0..d {
        y[i * d + i] = T::real(1.0);
    }
    let mut k1 = vec![T::default(); d2];
    let mut k2 = vec![T::default(); d2];
    let mut k3 = vec![T::default(); d2];
    let mut k4 = vec![T::default(); d2];
    let mut stage = vec![T::default(); d2];
    let mut tmp = vec![T::default(); d];
    let mut scratch = vec![0.0; d2];
    if let Some(rec) = record.as_deref_mut() {
        rec.push((0.0, y.clone()));
    }
    for step in 0..steps {
        {
            let s0 = samples.at(steps, 2 * step, &mut scratch)?;
            apply_field(s0, shift_t, half, &y, &mut k1, &mut tmp);
        }
        {
            let s_mid = samples.at(steps, 2 * step + 1, &mut scratch)?;
            for i in 0..d2 {
                stage[i] = y[i] + k1[i].scale(0.5 * h);
            }
            apply_field(s_mid, shift_t, half, &stage, &mut k2, &mut tmp);
            for i in 0..d2 {
                stage[i] = y[i] + k2[i].scale(0.5 * h);
            }
            apply_field(s_mid, shift_t, half, &stage, &mut k3, &mut tmp);
        }
        {
            let s1 = samples.at(steps, 2 * step + 2, &mut scratch)?;
            for i in 0..d2 {
                stage[i] = y[i] + k3[i].scale(h);
            }
            apply_field(s1, shift_t, half, &stage, &mut k4, &mut tmp);
        }
        for i in 0..d2 {
            y[i] = y[i] + (k1[i] + k2[i].scale(2.0) + k3[i].scale(2.0) + k4[i]).scale(h / 6.0);
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push((h * (step + 1) as f64, y.clone()));
        }
    }
    Ok(y)
}

fn integrate<T: Scalar>(family: &CoefficientFamily, p: ParamPoint, shift: f64, opts: &IntegratorOptions) -> Result<(Vec<T>, usize, f64)> {
    opts.validate()?;
    let mut coarse_steps = opts.steps;
    let mut samples = CoefficientSamples::new(family, p, 2 * coarse_steps)?;
    let mut coarse = rk4_run::<T>(&samples, shift, coarse_steps, None)?;
    loop {
        let fine_steps = 2 * coarse_steps;
        let fine = rk4_run::<T>(&samples, shift, fine_steps, None)?;
        let estimate = coarse.iter().zip(&fine).map(|(a, b)| (*a - *b).modulus()).fold(0.0, f64::max) / 15.0;
        if !estimate.is_finite() {
            return Err(Error::NonConvergence { estimate, steps: fine_steps });
        }
        if estimate <= opts.tol {
            return Ok((fine, fine_steps, estimate));
        }
        if 2 * fine_steps > opts.max_steps {
            return Err(Error::NonConvergence { estimate, steps: fine_steps });
        }
        samples.refine()?;
        coarse = fine;
        coarse_steps = fine_steps;
    }
}

/// `Ψ_z(2π)` for `z = (λ, s)` with error diagnostics.
pub fn fundamental_solution(
    family: &CoefficientFamily,
    p: ParamPoint,
    shift: f64,
    opts: &IntegratorOptions,
) -> Result<FundamentalSolution> {
    let d = family.dim();
    let (y, steps, estimate) = integrate::<Complex64>(family, p, shift, opts)?;
    let monodromy = DMatrix::from_vec(d, d, y);
    let symplectic_residual = symplectic_residual(&monodromy);
    Ok(FundamentalSolution { point: p, shift, monodromy, steps, error_estimate: estimate, symplectic_residual })
}

/// Real monodromy matrix `M_λ = Ψ_λ(2π)`, integrated in real arithmetic.
pub fn real_monodromy(family: &CoefficientFamily, p: ParamPoint, opts: &IntegratorOptions) -> Result<RealMonodromy> {
    let d = family.dim();
    let (y, steps, estimate) = integrate::<f64>(family, p, 0.0, opts)?;
    Ok(RealMonodromy { point: p, monodromy: DMatrix::from_vec(d, d, y), steps, error_estimate: estimate })
}

/// The standard symplectic matrix `[[0, -I], [I, 0]]` of size `2n`.
pub fn standard_j(half: usize) -> DMatrix<f64> {
    let d = 2 * half;
    let mut j = DMatrix::zeros(d, d);
    for i in 0..half {
        j[(i, i + half)] = -1.0;
        j[(i + half, i)] = 1.0;
    }
    j
}

/// Max-norm of `ΨᵀJΨ − J` (plain transpose, also for complex `Ψ`).
pub fn symplectic_residual(psi: &DMatrix<Complex64>) -> f64 {
    let d = psi.nrows();
    assert!(d % 2 == 0 && psi.ncols() == d, "expected an even square matrix");
    let j = standard_j(d / 2).map(|x| Complex64::new(x, 0.0));
    let r = psi.transpose() * &j * psi - &j;
    r.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn symplectic_residual_real(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let j = standard_j(d / 2);
    (m.transpose() * &j * m - &j).amax()
}

/// Trajectory `Ψ(t)` on a uniform grid of `steps` RK4 steps, for debugging dumps.
pub fn trajectory(family: &CoefficientFamily, p: ParamPoint, shift: f64, steps: usize) -> Result<Vec<(f64, DMatrix<Complex64>)>> {
    if steps == 0 {
        return Err(Error::Invalid("trajectory needs at least one step".into()));
    }
    let d = family.dim();
    let samples = CoefficientSamples::new(family, p, steps)?;
    let mut rec = Vec::with_capacity(steps + 1);
    rk4_run::<Complex64>(&samples, shift, steps, Some(&mut rec))?;
    Ok(rec.into_iter().map(|(t, y)| (t, DMatrix::from_vec(d, d, y))).collect())
}
