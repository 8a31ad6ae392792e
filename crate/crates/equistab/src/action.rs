//! Loop representations and the discretized Lagrange action.
//!
//! Three interchangeable representations of a periodic trajectory are
//! provided, together with the action functional, its analytic gradient and
//! Hessian in each one:
//!
//! * [`TrigLoop`] — full-period trigonometric series, the canonical internal
//!   form. The kinetic integral is evaluated in closed form, the potential
//!   integral by composite trapezoid quadrature.
//! * [`FundamentalPath`] — endpoints plus sine coefficients on the time
//!   segment `[0, pi]`; the exchange format for fundamental-domain data.
//! * [`SampledLoop`] — uniform time grid over the full period with forward
//!   differences; the pointwise discretization.
//!
//! Flat coefficient vectors are ordered mode-major, then body, then
//! coordinate: `index = mode * n * d + body * d + coord`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::{self, ProblemSpec};
use crate::error::{Error, Result};
use crate::symmetry::{Configuration, ReducedSpace};

/// Full-period loop as a truncated trigonometric series.
///
/// `x(t) = a0 + sum_k [ a_k cos(k w t) + b_k sin(k w t) ]` with `w = 2 pi / T`.
/// Mode blocks are stored in the order `a0, a1, b1, a2, b2, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrigLoop {
    n: usize,
    d: usize,
    k_max: usize,
    period: f64,
    coeffs: DVector<f64>,
}

impl TrigLoop {
    pub fn new(n: usize, d: usize, k_max: usize, period: f64, coeffs: DVector<f64>) -> Result<Self> {
        let expected = (2 * k_max + 1) * n * d;
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            n,
            d,
            k_max,
            period,
            coeffs,
        })
    }

    pub fn zeros(n: usize, d: usize, k_max: usize, period: f64) -> Self {
        Self {
            n,
            d,
            k_max,
            period,
            coeffs: DVector::zeros((2 * k_max + 1) * n * d),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn omega(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coeffs
    }

    /// Number of mode blocks, `2 K + 1`.
    pub fn mode_count(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn flat_index(&self, mode: usize, body: usize, coord: usize) -> usize {
        (mode * self.n + body) * self.d + coord
    }

    /// The `n x d` coefficient block of one mode.
    pub fn mode_block(&self, mode: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.d);
        for i in 0..self.n {
            for c in 0..self.d {
                out[(i, c)] = self.coeffs[self.flat_index(mode, i, c)];
            }
        }
        out
    }

    pub fn set_mode_block(&mut self, mode: usize, block: &DMatrix<f64>) {
        for i in 0..self.n {
            for c in 0..self.d {
                let idx = self.flat_index(mode, i, c);
                self.coeffs[idx] = block[(i, c)];
            }
        }
    }

    pub fn set_coeff(&mut self, mode: usize, body: usize, coord: usize, value: f64) {
        let idx = self.flat_index(mode, body, coord);
        self.coeffs[idx] = value;
    }

    /// Positions of all bodies at time `t` (rows are bodies).
    pub fn position(&self, t: f64) -> DMatrix<f64> {
        let basis = trig_basis(self.k_max, self.omega(), t);
        self.combine(&basis)
    }

    /// Velocities of all bodies at time `t`, by term-wise differentiation.
    pub fn velocity(&self, t: f64) -> DMatrix<f64> {
        let basis = trig_basis_deriv(self.k_max, self.omega(), t);
        self.combine(&basis)
    }

    fn combine(&self, basis: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.d);
        for (mode, &phi) in basis.iter().enumerate() {
            if phi == 0.0 {
                continue;
            }
            for i in 0..self.n {
                for c in 0..self.d {
                    out[(i, c)] += phi * self.coeffs[self.flat_index(mode, i, c)];
                }
            }
        }
        out
    }

    /// Uniform sampling on `m` grid points (the duplicate endpoint dropped).
    pub fn sample(&self, m: usize) -> SampledLoop {
        let h = self.period / m as f64;
        let points = (0..m).map(|k| self.position(k as f64 * h)).collect();
        SampledLoop {
            n: self.n,
            d: self.d,
            period: self.period,
            points,
        }
    }

    /// Minimum pairwise body separation over `samples` uniform times.
    pub fn min_separation(&self, samples: usize) -> f64 {
        let mut min = f64::INFINITY;
        for q in 0..samples {
            let t = q as f64 * self.period / samples as f64;
            let c = Configuration::new(self.position(t));
            min = min.min(c.min_pairwise_distance());
        }
        min
    }

    /// Largest body-position norm over a coarse time grid, used for
    /// normalizing residuals.
    pub fn max_norm(&self, samples: usize) -> f64 {
        let mut max: f64 = 0.0;
        for q in 0..samples {
            let t = q as f64 * self.period / samples as f64;
            max = max.max(self.position(t).norm());
        }
        max
    }
}

/// Fundamental-domain path: endpoints plus sine modes on `[0, pi]`.
///
/// `y(t) = x0 + (t/pi) (x1 - x0) + sum_k A_k sin(k t)`, so `y(0) = x0` and
/// `y(pi) = x1` hold exactly. Blocks are stored `x0, x1, A_1 .. A_F`.
#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalPath {
    n: usize,
    d: usize,
    f_max: usize,
    coeffs: DVector<f64>,
}

impl FundamentalPath {
    pub fn new(n: usize, d: usize, f_max: usize, coeffs: DVector<f64>) -> Result<Self> {
        let expected = (f_max + 2) * n * d;
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Self {
            n,
            d,
            f_max,
            coeffs,
        })
    }

    pub fn zeros(n: usize, d: usize, f_max: usize) -> Self {
        Self {
            n,
            d,
            f_max,
            coeffs: DVector::zeros((f_max + 2) * n * d),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn f_max(&self) -> usize {
        self.f_max
    }

    pub fn coeffs(&self) -> &DVector<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DVector<f64> {
        &mut self.coeffs
    }

    pub fn mode_count(&self) -> usize {
        self.f_max + 2
    }

    pub fn flat_index(&self, mode: usize, body: usize, coord: usize) -> usize {
        (mode * self.n + body) * self.d + coord
    }

    pub fn mode_block(&self, mode: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.d);
        for i in 0..self.n {
            for c in 0..self.d {
                out[(i, c)] = self.coeffs[self.flat_index(mode, i, c)];
            }
        }
        out
    }

    pub fn set_mode_block(&mut self, mode: usize, block: &DMatrix<f64>) {
        for i in 0..self.n {
            for c in 0..self.d {
                let idx = self.flat_index(mode, i, c);
                self.coeffs[idx] = block[(i, c)];
            }
        }
    }

    pub fn set_coeff(&mut self, mode: usize, body: usize, coord: usize, value: f64) {
        let idx = self.flat_index(mode, body, coord);
        self.coeffs[idx] = value;
    }

    pub fn position(&self, t: f64) -> DMatrix<f64> {
        let basis = fundamental_basis(self.f_max, t);
        self.combine(&basis)
    }

    pub fn velocity(&self, t: f64) -> DMatrix<f64> {
        let basis = fundamental_basis_deriv(self.f_max, t);
        self.combine(&basis)
    }

    fn combine(&self, basis: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.n, self.d);
        for (mode, &phi) in basis.iter().enumerate() {
            if phi == 0.0 {
                continue;
            }
            for i in 0..self.n {
                for c in 0..self.d {
                    out[(i, c)] += phi * self.coeffs[self.flat_index(mode, i, c)];
                }
            }
        }
        out
    }

    pub fn min_separation(&self, samples: usize) -> f64 {
        let mut min = f64::INFINITY;
        for q in 0..=samples {
            let t = q as f64 * PI / samples as f64;
            let c = Configuration::new(self.position(t));
            min = min.min(c.min_pairwise_distance());
        }
        min
    }
}

/// Loop sampled on a uniform grid over one period, endpoint dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledLoop {
    n: usize,
    d: usize,
    period: f64,
    points: Vec<DMatrix<f64>>,
}

impl SampledLoop {
    pub fn new(n: usize, d: usize, period: f64, points: Vec<DMatrix<f64>>) -> Result<Self> {
        for p in &points {
            if p.nrows() != n || p.ncols() != d {
                return Err(Error::DimensionMismatch {
                    expected: n * d,
                    got: p.nrows() * p.ncols(),
                });
            }
        }
        Ok(Self {
            n,
            d,
            period,
            points,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn grid_size(&self) -> usize {
        self.points.len()
    }

    pub fn step(&self) -> f64 {
        self.period / self.points.len() as f64
    }

    pub fn point(&self, k: usize) -> &DMatrix<f64> {
        &self.points[k % self.points.len()]
    }

    pub fn points(&self) -> &[DMatrix<f64>] {
        &self.points
    }

    pub fn flat_index(&self, k: usize, body: usize, coord: usize) -> usize {
        (k * self.n + body) * self.d + coord
    }

    pub fn min_separation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| Configuration::new(p.clone()).min_pairwise_distance())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Trig basis values `[1, cos wt, sin wt, cos 2wt, sin 2wt, ...]`.
pub(crate) fn trig_basis(k_max: usize, omega: f64, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * k_max + 1);
    out.push(1.0);
    for k in 1..=k_max {
        let (s, c) = (k as f64 * omega * t).sin_cos();
        out.push(c);
        out.push(s);
    }
    out
}

pub(crate) fn trig_basis_deriv(k_max: usize, omega: f64, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * k_max + 1);
    out.push(0.0);
    for k in 1..=k_max {
        let kw = k as f64 * omega;
        let (s, c) = (kw * t).sin_cos();
        out.push(-kw * s);
        out.push(kw * c);
    }
    out
}

/// Fundamental basis `[1 - t/pi, t/pi, sin t, sin 2t, ...]`.
pub(crate) fn fundamental_basis(f_max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f_max + 2);
    out.push(1.0 - t / PI);
    out.push(t / PI);
    for k in 1..=f_max {
        out.push((k as f64 * t).sin());
    }
    out
}

pub(crate) fn fundamental_basis_deriv(f_max: usize, t: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(f_max + 2);
    out.push(-1.0 / PI);
    out.push(1.0 / PI);
    for k in 1..=f_max {
        out.push(k as f64 * (k as f64 * t).cos());
    }
    out
}

/// Quadrature rule: node times and weights.
struct Quadrature {
    times: Vec<f64>,
    weights: Vec<f64>,
}

/// Periodic composite trapezoid on `[0, T)` (uniform weights).
fn periodic_quadrature(period: f64, nodes: usize) -> Quadrature {
    let h = period / nodes as f64;
    Quadrature {
        times: (0..nodes).map(|q| q as f64 * h).collect(),
        weights: vec![h; nodes],
    }
}

/// Composite trapezoid on `[0, pi]` with `nodes + 1` points.
fn segment_quadrature(nodes: usize) -> Quadrature {
    let h = PI / nodes as f64;
    let times = (0..=nodes).map(|q| q as f64 * h).collect();
    let mut weights = vec![h; nodes + 1];
    weights[0] = 0.5 * h;
    weights[nodes] = 0.5 * h;
    Quadrature { times, weights }
}

fn check_node(c: &Configuration, spec: &ProblemSpec, t: f64) -> Result<()> {
    let min = c.min_pairwise_distance();
    if min < spec.min_separation() {
        return Err(Error::CollisionalPath {
            time: t,
            min_separation: min,
            limit: spec.min_separation(),
        });
    }
    Ok(())
}

/// Action of a full-period loop: closed-form kinetic integral plus trapezoid
/// potential integral on `4 M` nodes.
pub fn action_full(lp: &TrigLoop, spec: &ProblemSpec) -> Result<f64> {
    let quad = periodic_quadrature(lp.period(), spec.quadrature_nodes());
    let mut total = kinetic_full(lp, spec);
    for (&t, &w) in quad.times.iter().zip(&quad.weights) {
        let c = Configuration::new(lp.position(t));
        check_node(&c, spec, t)?;
        total += w * dynamics::potential_unchecked(&c, spec);
    }
    Ok(total)
}

/// Closed-form kinetic integral of a trig loop (Parseval).
fn kinetic_full(lp: &TrigLoop, spec: &ProblemSpec) -> f64 {
    let omega = lp.omega();
    let mut sum = 0.0;
    for k in 1..=lp.k_max() {
        let kw = k as f64 * omega;
        let mut mode_sum = 0.0;
        for i in 0..lp.n() {
            let m = spec.mass(i);
            for c in 0..lp.d() {
                let a = lp.coeffs()[lp.flat_index(2 * k - 1, i, c)];
                let b = lp.coeffs()[lp.flat_index(2 * k, i, c)];
                mode_sum += m * (a * a + b * b);
            }
        }
        sum += kw * kw * mode_sum;
    }
    0.25 * lp.period() * sum
}

/// Gradient of [`action_full`] with respect to the trig coefficients.
pub fn grad_action_full(lp: &TrigLoop, spec: &ProblemSpec) -> Result<DVector<f64>> {
    let dim = lp.coeffs().len();
    let mut grad = DVector::zeros(dim);

    // Kinetic part, diagonal in the coefficients.
    let omega = lp.omega();
    for k in 1..=lp.k_max() {
        let kw = k as f64 * omega;
        let factor = 0.5 * lp.period() * kw * kw;
        for i in 0..lp.n() {
            let m = spec.mass(i);
            for c in 0..lp.d() {
                let ia = lp.flat_index(2 * k - 1, i, c);
                let ib = lp.flat_index(2 * k, i, c);
                grad[ia] += factor * m * lp.coeffs()[ia];
                grad[ib] += factor * m * lp.coeffs()[ib];
            }
        }
    }

    let quad = periodic_quadrature(lp.period(), spec.quadrature_nodes());
    for (&t, &w) in quad.times.iter().zip(&quad.weights) {
        let c = Configuration::new(lp.position(t));
        check_node(&c, spec, t)?;
        let gu = dynamics::grad_potential_unchecked(&c, spec);
        let basis = trig_basis(lp.k_max(), omega, t);
        accumulate_grad(&mut grad, &gu, &basis, w, lp.n(), lp.d());
    }
    Ok(grad)
}

/// Hessian of [`action_full`] with respect to the trig coefficients.
pub fn hess_action_full(lp: &TrigLoop, spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    let dim = lp.coeffs().len();
    let nd = lp.n() * lp.d();
    let mut hess = DMatrix::zeros(dim, dim);

    let omega = lp.omega();
    for k in 1..=lp.k_max() {
        let kw = k as f64 * omega;
        let factor = 0.5 * lp.period() * kw * kw;
        for i in 0..lp.n() {
            let m = spec.mass(i);
            for c in 0..lp.d() {
                let ia = lp.flat_index(2 * k - 1, i, c);
                let ib = lp.flat_index(2 * k, i, c);
                hess[(ia, ia)] += factor * m;
                hess[(ib, ib)] += factor * m;
            }
        }
    }

    let quad = periodic_quadrature(lp.period(), spec.quadrature_nodes());
    for (&t, &w) in quad.times.iter().zip(&quad.weights) {
        let c = Configuration::new(lp.position(t));
        check_node(&c, spec, t)?;
        let hu = dynamics::hess_potential_unchecked(&c, spec);
        let basis = trig_basis(lp.k_max(), omega, t);
        accumulate_hess(&mut hess, &hu, &basis, w, nd);
    }
    Ok(hess)
}

fn accumulate_grad(
    grad: &mut DVector<f64>,
    gu: &DMatrix<f64>,
    basis: &[f64],
    weight: f64,
    n: usize,
    d: usize,
) {
    for (mode, &phi) in basis.iter().enumerate() {
        let wphi = weight * phi;
        if wphi == 0.0 {
            continue;
        }
        for i in 0..n {
            for c in 0..d {
                grad[(mode * n + i) * d + c] += wphi * gu[(i, c)];
            }
        }
    }
}

fn accumulate_hess(
    hess: &mut DMatrix<f64>,
    hu: &DMatrix<f64>,
    basis: &[f64],
    weight: f64,
    nd: usize,
) {
    let modes = basis.len();
    for ma in 0..modes {
        for mb in ma..modes {
            let c = weight * basis[ma] * basis[mb];
            if c == 0.0 {
                continue;
            }
            for a in 0..nd {
                for b in 0..nd {
                    hess[(ma * nd + a, mb * nd + b)] += c * hu[(a, b)];
                }
            }
        }
    }
    // Mirror the strictly upper mode blocks.
    if modes > 1 {
        for ma in 0..modes {
            for mb in (ma + 1)..modes {
                for a in 0..nd {
                    for b in 0..nd {
                        hess[(mb * nd + b, ma * nd + a)] = hess[(ma * nd + a, mb * nd + b)];
                    }
                }
            }
        }
    }
}

/// Fundamental-domain action: integral of the Lagrangian over `[0, pi]` with
/// closed-form kinetic part and trapezoid potential part.
pub fn action_fundamental(path: &FundamentalPath, spec: &ProblemSpec) -> Result<f64> {
    let quad = segment_quadrature(spec.quadrature_nodes());
    let mut total = kinetic_fundamental(path, spec);
    for (&t, &w) in quad.times.iter().zip(&quad.weights) {
        let c = Configuration::new(path.position(t));
        check_node(&c, spec, t)?;
        total += w * dynamics::potential_unchecked(&c, spec);
    }
    Ok(total)
}

fn kinetic_fundamental(path: &FundamentalPath, spec: &ProblemSpec) -> f64 {
    // Ramp and sine velocities are orthogonal on [0, pi].
    let mut sum = 0.0;
    for i in 0..path.n() {
        let m = spec.mass(i);
        for c in 0..path.d() {
            let v = (path.coeffs()[path.flat_index(1, i, c)]
                - path.coeffs()[path.flat_index(0, i, c)])
                / PI;
            sum += m * PI * v * v;
            for k in 1..=path.f_max() {
                let a = path.coeffs()[path.flat_index(k + 1, i, c)];
                let kf = k as f64;
                sum += m * 0.5 * PI * kf * kf * a * a;
            }
        }
    }
    0.5 * sum
}

/// Gradient of [`action_fundamental`].
pub fn grad_action_fundamental(path: &FundamentalPath, spec: &ProblemSpec) -> Result<DVector<f64>> {
    let dim = path.coeffs().len();
    let mut grad = DVector::zeros(dim);

    for i in 0..path.n() {
        let m = spec.mass(i);
        for c in 0..path.d() {
            let i0 = path.flat_index(0, i, c);
            let i1 = path.flat_index(1, i, c);
            let v = (path.coeffs()[i1] - path.coeffs()[i0]) / PI;
            grad[i0] += -m * v;
            grad[i1] += m * v;
            for k in 1..=path.f_max() {
                let ia = path.flat_index(k + 1, i, c);
                let kf = k as f64;
                grad[ia] += m * 0.5 * PI * kf * kf * path.coeffs()[ia];
            }
        }
    }

    let quad = segment_quadrature(spec.quadrature_nodes());
    for (&t, &w) in quad.times.iter().zip(&quad.weights) {
        let c = Configuration::new(path.position(t));
        check_node(&c, spec, t)?;
        let gu = dynamics::grad_potential_unchecked(&c, spec);
        let basis = fundamental_basis(path.f_max(), t);
        accumulate_grad(&mut grad, &gu, &basis, w, path.n(), path.d());
    }
    Ok(grad)
}

/// Hessian of [`action_fundamental`].
pub fn hess_action_fundamental(path: &FundamentalPath, spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    let dim = path.coeffs().len();
    let nd = path.n() * path.d();
    let mut hess = DMatrix::zeros(dim, dim);

    for i in 0..path.n() {
        let m = spec.mass(i);
        for c in 0..path.d() {
            let i0 = path.flat_index(0, i, c);
            let i1 = path.flat_index(1, i, c);
            hess[(i0, i0)] += m / PI;
            hess[(i1, i1)] += m / PI;
            hess[(i0, i1)] -= m / PI;
            hess[(i1, i0)] -= m / PI;
            for k in 1..=path.f_max() {
                let ia = path.flat_index(k + 1, i, c);
                let kf = k as f64;
                hess[(ia, ia)] += m * 0.5 * PI * kf * kf;
            }
        }
    }

    let quad = segment_quadrature(spec.quadrature_nodes());
    for (&t, &w) in quad.times.iter().zip(&quad.weights) {
        let c = Configuration::new(path.position(t));
        check_node(&c, spec, t)?;
        let hu = dynamics::hess_potential_unchecked(&c, spec);
        let basis = fundamental_basis(path.f_max(), t);
        accumulate_hess(&mut hess, &hu, &basis, w, nd);
    }
    Ok(hess)
}

/// Pointwise action on a uniform periodic grid: forward differences for the
/// kinetic part, left-endpoint quadrature for the potential part.
pub fn action_points(sampled: &SampledLoop, spec: &ProblemSpec) -> Result<f64> {
    let m = sampled.grid_size();
    let h = sampled.step();
    let mut total = 0.0;
    for k in 0..m {
        let x = sampled.point(k);
        let xn = sampled.point(k + 1);
        let c = Configuration::new(x.clone());
        check_node(&c, spec, k as f64 * h)?;
        let mut kin = 0.0;
        for i in 0..sampled.n() {
            let mass = spec.mass(i);
            for cc in 0..sampled.d() {
                let diff = (xn[(i, cc)] - x[(i, cc)]) / h;
                kin += mass * diff * diff;
            }
        }
        total += h * (0.5 * kin + dynamics::potential_unchecked(&c, spec));
    }
    Ok(total)
}

/// Gradient of [`action_points`] with respect to the grid positions.
pub fn grad_action_points(sampled: &SampledLoop, spec: &ProblemSpec) -> Result<DVector<f64>> {
    let m = sampled.grid_size();
    let h = sampled.step();
    let nd = sampled.n() * sampled.d();
    let mut grad = DVector::zeros(m * nd);
    for k in 0..m {
        let x = sampled.point(k);
        let prev = sampled.point(k + m - 1);
        let next = sampled.point(k + 1);
        let c = Configuration::new(x.clone());
        check_node(&c, spec, k as f64 * h)?;
        let gu = dynamics::grad_potential_unchecked(&c, spec);
        for i in 0..sampled.n() {
            let mass = spec.mass(i);
            for cc in 0..sampled.d() {
                let idx = sampled.flat_index(k, i, cc);
                grad[idx] += mass * (2.0 * x[(i, cc)] - prev[(i, cc)] - next[(i, cc)]) / h
                    + h * gu[(i, cc)];
            }
        }
    }
    Ok(grad)
}

/// Hessian of [`action_points`]: block-circulant tridiagonal kinetic part
/// plus block-diagonal `h * hess(U)`.
pub fn hess_action_points(sampled: &SampledLoop, spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    let m = sampled.grid_size();
    let h = sampled.step();
    let nd = sampled.n() * sampled.d();
    let mut hess = DMatrix::zeros(m * nd, m * nd);
    for k in 0..m {
        let c = Configuration::new(sampled.point(k).clone());
        check_node(&c, spec, k as f64 * h)?;
        let hu = dynamics::hess_potential_unchecked(&c, spec);
        let next = (k + 1) % m;
        for i in 0..sampled.n() {
            let mass = spec.mass(i);
            for cc in 0..sampled.d() {
                let row = sampled.flat_index(k, i, cc);
                hess[(row, row)] += 2.0 * mass / h;
                let col = sampled.flat_index(next, i, cc);
                hess[(row, col)] -= mass / h;
                hess[(col, row)] -= mass / h;
            }
        }
        for a in 0..nd {
            for b in 0..nd {
                hess[(k * nd + a, k * nd + b)] += h * hu[(a, b)];
            }
        }
    }
    Ok(hess)
}

/// Kinetic-only pointwise Hessian, exposed for spectrum checks.
pub fn hess_points_kinetic(n: usize, d: usize, masses: &[f64], m: usize, period: f64) -> DMatrix<f64> {
    let h = period / m as f64;
    let nd = n * d;
    let mut hess = DMatrix::zeros(m * nd, m * nd);
    for k in 0..m {
        let next = (k + 1) % m;
        for i in 0..n {
            for cc in 0..d {
                let row = (k * n + i) * d + cc;
                let col = (next * n + i) * d + cc;
                hess[(row, row)] += 2.0 * masses[i] / h;
                hess[(row, col)] -= masses[i] / h;
                hess[(col, row)] -= masses[i] / h;
            }
        }
    }
    hess
}

/// Reduced action in the fundamental-domain convention: the full-period
/// action of the equivariant loop `B z`, divided by the quotient order `l`.
pub fn action_reduced(z: &DVector<f64>, rs: &ReducedSpace, spec: &ProblemSpec) -> Result<f64> {
    let lp = rs.loop_from(z);
    Ok(action_full(&lp, spec)? / spec.quotient_order() as f64)
}

/// Gradient of [`action_reduced`]: `B^T grad / l` by the chain rule.
pub fn grad_action_reduced(
    z: &DVector<f64>,
    rs: &ReducedSpace,
    spec: &ProblemSpec,
) -> Result<DVector<f64>> {
    let lp = rs.loop_from(z);
    let g = grad_action_full(&lp, spec)?;
    Ok(rs.basis().transpose() * g / spec.quotient_order() as f64)
}

/// Hessian of [`action_reduced`]: `B^T H B / l`.
pub fn hess_action_reduced(
    z: &DVector<f64>,
    rs: &ReducedSpace,
    spec: &ProblemSpec,
) -> Result<DMatrix<f64>> {
    let lp = rs.loop_from(z);
    let h = hess_action_full(&lp, spec)?;
    let bt_h = rs.basis().transpose() * h;
    Ok(bt_h * rs.basis() / spec.quotient_order() as f64)
}

/// Max-norm residual of the discrete Euler-Lagrange equations on an `m`-point
/// grid: `m_i (x_{k+1} - 2 x_k + x_{k-1}) / h^2 - grad U_i(x_k)`.
pub fn el_residual(lp: &TrigLoop, spec: &ProblemSpec, m: usize) -> Result<f64> {
    let sampled = lp.sample(m);
    let h = sampled.step();
    let mut max = 0.0_f64;
    for k in 0..m {
        let x = sampled.point(k);
        let prev = sampled.point(k + m - 1);
        let next = sampled.point(k + 1);
        let c = Configuration::new(x.clone());
        check_node(&c, spec, k as f64 * h)?;
        let gu = dynamics::grad_potential_unchecked(&c, spec);
        for i in 0..sampled.n() {
            let mass = spec.mass(i);
            for cc in 0..sampled.d() {
                let acc = (next[(i, cc)] - 2.0 * x[(i, cc)] + prev[(i, cc)]) / (h * h);
                max = max.max((mass * acc - gu[(i, cc)]).abs());
            }
        }
    }
    Ok(max)
}

/// Least-squares fit `design * x = rhs`, solved column-wise via SVD.
pub(crate) fn fit_least_squares(design: &DMatrix<f64>, rhs: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = design.clone().svd(true, true);
    let mut out = DMatrix::zeros(design.ncols(), rhs.ncols());
    for j in 0..rhs.ncols() {
        let col = rhs.column(j).into_owned();
        let sol = svd.solve(&col, 1e-12).expect("svd solve");
        out.set_column(j, &sol);
    }
    out
}

/// Fit a trig loop to time-stamped configurations by least squares.
///
/// The sample times need not be uniform but should cover the period well;
/// at least `2 k_max + 1` samples are required.
pub fn fit_loop(
    n: usize,
    d: usize,
    k_max: usize,
    period: f64,
    samples: &[(f64, DMatrix<f64>)],
) -> Result<TrigLoop> {
    let modes = 2 * k_max + 1;
    if samples.len() < modes {
        return Err(Error::DimensionMismatch {
            expected: modes,
            got: samples.len(),
        });
    }
    let omega = 2.0 * PI / period;
    let mut design = DMatrix::zeros(samples.len(), modes);
    let mut rhs = DMatrix::zeros(samples.len(), n * d);
    for (row, (t, x)) in samples.iter().enumerate() {
        let basis = trig_basis(k_max, omega, *t);
        for (m, &phi) in basis.iter().enumerate() {
            design[(row, m)] = phi;
        }
        for i in 0..n {
            for c in 0..d {
                rhs[(row, i * d + c)] = x[(i, c)];
            }
        }
    }
    let fitted = fit_least_squares(&design, &rhs);
    let mut coeffs = DVector::zeros(modes * n * d);
    for m in 0..modes {
        for i in 0..n {
            for c in 0..d {
                coeffs[(m * n + i) * d + c] = fitted[(m, i * d + c)];
            }
        }
    }
    TrigLoop::new(n, d, k_max, period, coeffs)
}

/// Sample a loop on `[0, pi]` and fit the fundamental form: endpoints are
/// pinned exactly, sine coefficients by sampled least squares.
pub fn restrict(lp: &TrigLoop, spec: &ProblemSpec) -> FundamentalPath {
    let f_max = spec.fundamental_modes();
    let n = lp.n();
    let d = lp.d();
    let x0 = lp.position(0.0);
    let x1 = lp.position(PI);

    let samples = (16 * (f_max + 2)).max(256);
    let mut design = DMatrix::zeros(samples, f_max);
    let mut rhs = DMatrix::zeros(samples, n * d);
    for s in 0..samples {
        let t = (s as f64 + 0.5) * PI / samples as f64;
        for k in 1..=f_max {
            design[(s, k - 1)] = (k as f64 * t).sin();
        }
        let x = lp.position(t);
        let ramp0 = 1.0 - t / PI;
        let ramp1 = t / PI;
        for i in 0..n {
            for c in 0..d {
                rhs[(s, i * d + c)] = x[(i, c)] - ramp0 * x0[(i, c)] - ramp1 * x1[(i, c)];
            }
        }
    }
    let sines = fit_least_squares(&design, &rhs);

    let mut path = FundamentalPath::zeros(n, d, f_max);
    path.set_mode_block(0, &x0);
    path.set_mode_block(1, &x1);
    for k in 1..=f_max {
        let mut block = DMatrix::zeros(n, d);
        for i in 0..n {
            for c in 0..d {
                block[(i, c)] = sines[(k - 1, i * d + c)];
            }
        }
        path.set_mode_block(k + 1, &block);
    }
    path
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::SymmetryGroup;
    use approx::assert_relative_eq;

    fn trivial_spec(n: usize, d: usize) -> ProblemSpec {
        ProblemSpec::new(
            vec![1.0; n],
            d,
            SymmetryGroup::trivial(n, d),
            8,
            8,
            64,
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn trig_loop_evaluates_series() {
        let mut lp = TrigLoop::zeros(1, 2, 2, 2.0 * PI);
        // x(t) = (cos t + 0.5 sin 2t, 3)
        lp.set_coeff(0, 0, 1, 3.0);
        lp.set_coeff(1, 0, 0, 1.0);
        lp.set_coeff(4, 0, 0, 0.5);
        let t = 0.7;
        let x = lp.position(t);
        assert_relative_eq!(x[(0, 0)], t.cos() + 0.5 * (2.0 * t).sin(), epsilon = 1e-14);
        assert_relative_eq!(x[(0, 1)], 3.0, epsilon = 1e-14);
        let v = lp.velocity(t);
        assert_relative_eq!(v[(0, 0)], -t.sin() + (2.0 * t).cos(), epsilon = 1e-14);
        assert_relative_eq!(v[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn fundamental_path_pins_endpoints() {
        let mut path = FundamentalPath::zeros(2, 2, 3);
        let x0 = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]);
        let x1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        path.set_mode_block(0, &x0);
        path.set_mode_block(1, &x1);
        path.set_coeff(2, 0, 0, 0.3);
        assert_relative_eq!((path.position(0.0) - &x0).norm(), 0.0, epsilon = 1e-15);
        assert_relative_eq!((path.position(PI) - &x1).norm(), 0.0, epsilon = 1e-13);
    }

    #[test]
    fn constant_two_body_fundamental_action_is_pi() {
        // Static pair at distance 1: zero kinetic part, potential 1.
        let mut path = FundamentalPath::zeros(2, 2, 4);
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]);
        path.set_mode_block(0, &x);
        path.set_mode_block(1, &x);
        let spec = trivial_spec(2, 2);
        let a = action_fundamental(&path, &spec).unwrap();
        assert_relative_eq!(a, PI, epsilon = 1e-12);
    }

    #[test]
    fn constant_sampled_loop_action_is_period_times_potential() {
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]);
        let period = 2.0 * PI;
        let sampled = SampledLoop::new(2, 2, period, vec![x; 32]).unwrap();
        let spec = trivial_spec(2, 2);
        let a = action_points(&sampled, &spec).unwrap();
        assert_relative_eq!(a, period, epsilon = 1e-12);
    }

    #[test]
    fn collisional_loop_is_rejected() {
        let lp = TrigLoop::zeros(2, 2, 2, 2.0 * PI);
        let spec = trivial_spec(2, 2);
        assert!(matches!(
            action_full(&lp, &spec),
            Err(Error::CollisionalPath { .. })
        ));
    }

    #[test]
    fn kinetic_points_hessian_is_psd_with_translation_kernel() {
        let n = 2;
        let d = 2;
        let m = 16;
        let h = hess_points_kinetic(n, d, &[1.0, 3.0], m, 2.0 * PI);
        let eig = h.symmetric_eigenvalues();
        let mut vals: Vec<f64> = eig.iter().cloned().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Positive semidefinite with nullity exactly n*d (constant shifts).
        assert!(vals[0] > -1e-10);
        let zero_count = vals.iter().filter(|v| v.abs() < 1e-10).count();
        assert_eq!(zero_count, n * d);
    }
}
