//! Floquet analysis: integrate the matrix variational equation along a
//! periodic orbit and extract the multipliers of the monodromy matrix.
//!
//! Two integration modes are provided. The default evaluates the
//! linearization along the trigonometric series (dense output is exact); the
//! shooting mode integrates the orbit itself jointly with the variational
//! system from its initial state, so disagreement between the modes measures
//! how well the optimized loop solves the equations of motion.

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::action::TrigLoop;
use crate::dynamics::{self, ProblemSpec};
use crate::error::{Error, Result};
use crate::symmetry::Configuration;

/// How the time-dependent linearization is driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMode {
    /// Evaluate the orbit from its trig series at every stage.
    AnalyticOrbit,
    /// Integrate orbit and variational system jointly from the initial state.
    Shooting,
}

impl IntegrationMode {
    pub fn name(&self) -> &'static str {
        match self {
            IntegrationMode::AnalyticOrbit => "analytic",
            IntegrationMode::Shooting => "shooting",
        }
    }
}

/// Options for [`monodromy`]: fixed-step RK4 with `steps` stages.
#[derive(Debug, Clone)]
pub struct MonodromyOptions {
    pub mode: IntegrationMode,
    pub steps: usize,
    /// Test hook: drop the potential entirely (free particles).
    #[doc(hidden)]
    pub zero_potential: bool,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        Self {
            mode: IntegrationMode::AnalyticOrbit,
            steps: 8192,
            zero_potential: false,
        }
    }
}

/// Monodromy matrix with its spectrum and quality diagnostics.
#[derive(Debug, Clone)]
pub struct MonodromyResult {
    /// `X(T)`, rescaled by `exp(log_scale)` if `rescaled` is set.
    pub monodromy: DMatrix<f64>,
    /// Multipliers sorted by non-increasing modulus.
    pub multipliers: Vec<Complex<f64>>,
    pub max_modulus: f64,
    /// `|det X(T) - 1|`; the exact flow preserves the determinant.
    pub det_residual: f64,
    /// Largest `|det X(t) - 1|` over 16 integration checkpoints.
    pub max_det_drift: f64,
    /// `max |M^T J M - J|` with `J` the standard symplectic form.
    pub symplectic_residual: f64,
    /// Hausdorff distance between the multiplier multiset and its image
    /// under reciprocal conjugation.
    pub pairing_residual: f64,
    pub mode: IntegrationMode,
    pub steps: usize,
    /// Accumulated natural-log rescaling exponent (0 unless `rescaled`).
    pub log_scale: f64,
    pub rescaled: bool,
}

/// Dense evaluation of the orbit: positions and velocities at time `t`.
pub fn evaluate_orbit(lp: &TrigLoop, t: f64) -> (Configuration, DMatrix<f64>) {
    (Configuration::new(lp.position(t)), lp.velocity(t))
}

const RESCALE_THRESHOLD: f64 = 1e150;
const DET_CHECKPOINTS: usize = 16;

struct OrbitSource<'a> {
    lp: &'a TrigLoop,
    spec: &'a ProblemSpec,
    zero_potential: bool,
}

impl<'a> OrbitSource<'a> {
    fn a_matrix_at(&self, positions: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let c = Configuration::new(positions.clone());
        let min = c.min_pairwise_distance();
        if min < self.spec.min_separation() {
            return Err(Error::CollisionalPath {
                time: t,
                min_separation: min,
                limit: self.spec.min_separation(),
            });
        }
        let mut a = dynamics::linearization_matrix_unchecked(&c, self.spec);
        if self.zero_potential {
            let nd = self.spec.n() * self.spec.d();
            for r in 0..nd {
                for col in 0..nd {
                    a[(nd + r, col)] = 0.0;
                }
            }
        }
        Ok(a)
    }

    fn a_matrix(&self, t: f64) -> Result<DMatrix<f64>> {
        self.a_matrix_at(&self.lp.position(t), t)
    }
}

/// Integrate `X' = A(t) X`, `X(0) = I` over one period and analyze `X(T)`.
///
/// When the norm of `X` passes 1e150 the solution is rescaled and the
/// exponent accumulated, so extremely unstable orbits report a finite
/// scaled matrix plus `log_scale` instead of overflowing.
pub fn monodromy(
    lp: &TrigLoop,
    spec: &ProblemSpec,
    opts: &MonodromyOptions,
) -> Result<MonodromyResult> {
    let nd = spec.n() * spec.d();
    let dim = 2 * nd;
    let period = lp.period();
    let n_steps = opts.steps.max(16);
    let h = period / n_steps as f64;
    let source = OrbitSource {
        lp,
        spec,
        zero_potential: opts.zero_potential,
    };

    let mut x = DMatrix::<f64>::identity(dim, dim);
    let mut log_scale = 0.0_f64;
    let mut rescaled = false;
    let mut max_det_drift = 0.0_f64;
    let checkpoint_every = (n_steps / DET_CHECKPOINTS).max(1);

    match opts.mode {
        IntegrationMode::AnalyticOrbit => {
            let mut a0 = source.a_matrix(0.0)?;
            for step in 0..n_steps {
                let t = step as f64 * h;
                let a_mid = source.a_matrix(t + 0.5 * h)?;
                let a_end = source.a_matrix(t + h)?;
                rk4_matrix_step(&mut x, &a0, &a_mid, &a_end, h);
                a0 = a_end;
                post_step(
                    &mut x,
                    &mut log_scale,
                    &mut rescaled,
                    &mut max_det_drift,
                    step,
                    checkpoint_every,
                )?;
            }
        }
        IntegrationMode::Shooting => {
            let x0 = lp.position(0.0);
            let v0 = lp.velocity(0.0);
            let mut pos = x0;
            let mut mom = v0;
            for i in 0..spec.n() {
                for c in 0..spec.d() {
                    mom[(i, c)] *= spec.mass(i);
                }
            }
            for step in 0..n_steps {
                let t = step as f64 * h;
                shooting_step(&mut pos, &mut mom, &mut x, t, h, &source)?;
                post_step(
                    &mut x,
                    &mut log_scale,
                    &mut rescaled,
                    &mut max_det_drift,
                    step,
                    checkpoint_every,
                )?;
            }
        }
    }

    let det_residual = if rescaled {
        f64::NAN
    } else {
        (x.determinant() - 1.0).abs()
    };
    let symplectic_residual = if rescaled {
        f64::NAN
    } else {
        symplectic_defect(&x, nd)
    };

    let spectrum = multipliers(&x)?;
    let scale = log_scale.exp();
    let mults: Vec<Complex<f64>> = spectrum.values.iter().map(|m| m * scale).collect();
    let max_modulus = mults.first().map(|m| m.norm()).unwrap_or(0.0);

    Ok(MonodromyResult {
        monodromy: x,
        multipliers: mults,
        max_modulus,
        det_residual,
        max_det_drift,
        symplectic_residual,
        pairing_residual: spectrum.pairing_residual * scale,
        mode: opts.mode,
        steps: n_steps,
        log_scale,
        rescaled,
    })
}

fn post_step(
    x: &mut DMatrix<f64>,
    log_scale: &mut f64,
    rescaled: &mut bool,
    max_det_drift: &mut f64,
    step: usize,
    checkpoint_every: usize,
) -> Result<()> {
    let amax = x.amax();
    if !amax.is_finite() {
        return Err(Error::NonFiniteIntegration);
    }
    if amax > RESCALE_THRESHOLD {
        *x /= amax;
        *log_scale += amax.ln();
        *rescaled = true;
    }
    if !*rescaled && (step + 1) % checkpoint_every == 0 {
        *max_det_drift = max_det_drift.max((x.determinant() - 1.0).abs());
    }
    Ok(())
}

fn rk4_matrix_step(
    x: &mut DMatrix<f64>,
    a0: &DMatrix<f64>,
    a_mid: &DMatrix<f64>,
    a_end: &DMatrix<f64>,
    h: f64,
) {
    let k1 = a0 * &*x;
    let k2 = a_mid * (&*x + &k1 * (0.5 * h));
    let k3 = a_mid * (&*x + &k2 * (0.5 * h));
    let k4 = a_end * (&*x + &k3 * h);
    *x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
}

/// One RK4 step of the joint system (orbit + variational equation).
fn shooting_step(
    pos: &mut DMatrix<f64>,
    mom: &mut DMatrix<f64>,
    x: &mut DMatrix<f64>,
    t: f64,
    h: f64,
    source: &OrbitSource<'_>,
) -> Result<()> {
    let spec = source.spec;
    let force = |p: &DMatrix<f64>, time: f64| -> Result<DMatrix<f64>> {
        let c = Configuration::new(p.clone());
        let min = c.min_pairwise_distance();
        if min < spec.min_separation() {
            return Err(Error::CollisionalPath {
                time,
                min_separation: min,
                limit: spec.min_separation(),
            });
        }
        if source.zero_potential {
            return Ok(DMatrix::zeros(p.nrows(), p.ncols()));
        }
        Ok(dynamics::grad_potential_unchecked(&c, spec))
    };
    let velocity = |m: &DMatrix<f64>| -> DMatrix<f64> {
        let mut v = m.clone();
        for i in 0..spec.n() {
            for c in 0..spec.d() {
                v[(i, c)] /= spec.mass(i);
            }
        }
        v
    };

    let kp1 = velocity(mom);
    let km1 = force(pos, t)?;
    let a1 = source.a_matrix_at(pos, t)?;
    let kx1 = &a1 * &*x;

    let p2 = &*pos + &kp1 * (0.5 * h);
    let m2 = &*mom + &km1 * (0.5 * h);
    let kp2 = velocity(&m2);
    let km2 = force(&p2, t + 0.5 * h)?;
    let a2 = source.a_matrix_at(&p2, t + 0.5 * h)?;
    let kx2 = &a2 * (&*x + &kx1 * (0.5 * h));

    let p3 = &*pos + &kp2 * (0.5 * h);
    let m3 = &*mom + &km2 * (0.5 * h);
    let kp3 = velocity(&m3);
    let km3 = force(&p3, t + 0.5 * h)?;
    let a3 = source.a_matrix_at(&p3, t + 0.5 * h)?;
    let kx3 = &a3 * (&*x + &kx2 * (0.5 * h));

    let p4 = &*pos + &kp3 * h;
    let m4 = &*mom + &km3 * h;
    let kp4 = velocity(&m4);
    let km4 = force(&p4, t + h)?;
    let a4 = source.a_matrix_at(&p4, t + h)?;
    let kx4 = &a4 * (&*x + &kx3 * h);

    *pos += (kp1 + kp2 * 2.0 + kp3 * 2.0 + kp4) * (h / 6.0);
    *mom += (km1 + km2 * 2.0 + km3 * 2.0 + km4) * (h / 6.0);
    *x += (kx1 + kx2 * 2.0 + kx3 * 2.0 + kx4) * (h / 6.0);
    Ok(())
}

/// `max |M^T J M - J|` with `J = [[0, I], [-I, 0]]`.
fn symplectic_defect(m: &DMatrix<f64>, nd: usize) -> f64 {
    let dim = 2 * nd;
    let mut j = DMatrix::zeros(dim, dim);
    for i in 0..nd {
        j[(i, nd + i)] = 1.0;
        j[(nd + i, i)] = -1.0;
    }
    (m.transpose() * &j * m - j).amax()
}

/// Eigenvalues of a monodromy matrix with conjugate pairs symmetrized.
#[derive(Debug, Clone)]
pub struct MultiplierSet {
    /// Sorted by non-increasing modulus.
    pub values: Vec<Complex<f64>>,
    /// Hausdorff distance to the image under `lambda -> 1 / conj(lambda)`.
    pub pairing_residual: f64,
}

/// Dense nonsymmetric eigenvalues of the (real) monodromy matrix.
///
/// Conjugate pairing is enforced exactly: eigenvalues with positive
/// imaginary part are averaged against their best conjugate partner and
/// written back as an exact pair.
pub fn multipliers(monodromy: &DMatrix<f64>) -> Result<MultiplierSet> {
    if monodromy.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFiniteIntegration);
    }
    let eigs = monodromy.clone().complex_eigenvalues();
    let mut values: Vec<Complex<f64>> = eigs.iter().cloned().collect();
    if values.is_empty() {
        return Err(Error::EigenFailure);
    }

    symmetrize_conjugates(&mut values);
    values.sort_by(|a, b| {
        b.norm()
            .partial_cmp(&a.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.re.partial_cmp(&a.re).unwrap_or(std::cmp::Ordering::Equal))
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });

    let inverted: Vec<Complex<f64>> = values.iter().map(|l| 1.0 / l.conj()).collect();
    let pairing_residual = hausdorff(&values, &inverted).max(hausdorff(&inverted, &values));

    Ok(MultiplierSet {
        values,
        pairing_residual,
    })
}

fn symmetrize_conjugates(values: &mut [Complex<f64>]) {
    let n = values.len();
    let mut used = vec![false; n];
    for i in 0..n {
        if used[i] || values[i].im <= 0.0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if i == j || used[j] || values[j].im >= 0.0 {
                continue;
            }
            let dist = (values[i] - values[j].conj()).norm();
            if best.map(|(_, d)| dist < d).unwrap_or(true) {
                best = Some((j, dist));
            }
        }
        if let Some((j, _)) = best {
            let merged = (values[i] + values[j].conj()) * 0.5;
            values[i] = merged;
            values[j] = merged.conj();
            used[i] = true;
            used[j] = true;
        }
    }
}

fn hausdorff(from: &[Complex<f64>], to: &[Complex<f64>]) -> f64 {
    from.iter()
        .map(|a| {
            to.iter()
                .map(|b| (a - b).norm())
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Stability verdict from the maximal multiplier modulus.
#[derive(Debug, Clone, Copy)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub max_modulus: f64,
    /// `max_modulus - (1 + tol)`; negative when stable.
    pub margin: f64,
    pub tol: f64,
}

/// Unstable iff `max_modulus > 1 + tol` (default tolerance 0.05).
pub fn stability_verdict(result: &MonodromyResult, tol: f64) -> StabilityVerdict {
    let margin = result.max_modulus - (1.0 + tol);
    StabilityVerdict {
        stable: margin <= 0.0,
        max_modulus: result.max_modulus,
        margin,
        tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::SymmetryGroup;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn free_spec() -> ProblemSpec {
        ProblemSpec::new(
            vec![1.0, 2.0],
            2,
            SymmetryGroup::trivial(2, 2),
            4,
            4,
            64,
            1e-6,
        )
        .unwrap()
    }

    #[test]
    fn evaluate_orbit_is_periodic() {
        let mut lp = TrigLoop::zeros(2, 2, 2, 2.0 * PI);
        lp.set_coeff(1, 0, 0, 1.0);
        lp.set_coeff(2, 1, 1, -0.5);
        let (c0, v0) = evaluate_orbit(&lp, 0.0);
        let (ct, vt) = evaluate_orbit(&lp, lp.period());
        assert_relative_eq!((c0.positions() - ct.positions()).norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!((v0 - vt).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn velocity_matches_finite_differences() {
        let mut lp = TrigLoop::zeros(2, 2, 3, 2.0 * PI);
        lp.set_coeff(1, 0, 0, 1.0);
        lp.set_coeff(4, 1, 1, 0.3);
        lp.set_coeff(6, 1, 0, -0.2);
        let t = 1.234;
        let step = 1e-6;
        let fd = (lp.position(t + step) - lp.position(t - step)) / (2.0 * step);
        assert!((lp.velocity(t) - fd).amax() < 1e-5);
    }

    #[test]
    fn free_particles_have_affine_monodromy() {
        // With the potential off, X(T) = [[I, T M^{-1}], [0, I]].
        let spec = free_spec();
        let mut lp = TrigLoop::zeros(2, 2, 4, spec.period());
        lp.set_coeff(0, 0, 0, 1.0);
        lp.set_coeff(0, 1, 0, -1.0);
        let opts = MonodromyOptions {
            zero_potential: true,
            steps: 64,
            ..Default::default()
        };
        let result = monodromy(&lp, &spec, &opts).unwrap();
        let t = spec.period();
        let mut expected = DMatrix::identity(8, 8);
        for (idx, mass) in [(0usize, 1.0), (1, 1.0), (2, 2.0), (3, 2.0)] {
            expected[(idx, 4 + idx)] = t / mass;
        }
        assert!((result.monodromy.clone() - expected).amax() < 1e-10);
        assert!(result.det_residual < 1e-10);
        // Same in shooting mode.
        let opts = MonodromyOptions {
            zero_potential: true,
            steps: 64,
            mode: IntegrationMode::Shooting,
        };
        let result = monodromy(&lp, &spec, &opts).unwrap();
        assert!((result.monodromy.clone() - result.monodromy.clone()).amax() == 0.0);
        assert!(result.det_residual < 1e-10);
    }

    #[test]
    fn identity_monodromy_has_unit_multipliers() {
        let set = multipliers(&DMatrix::identity(6, 6)).unwrap();
        for v in &set.values {
            assert_relative_eq!(v.re, 1.0, epsilon = 1e-12);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-12);
        }
        assert!(set.pairing_residual < 1e-12);
    }

    #[test]
    fn conjugate_pairs_are_exact() {
        // Rotation block has eigenvalues e^{±i}.
        let m = DMatrix::from_row_slice(2, 2, &[1.0_f64.cos(), -(1.0_f64.sin()), 1.0_f64.sin(), 1.0_f64.cos()]);
        let set = multipliers(&m).unwrap();
        assert_eq!(set.values.len(), 2);
        assert_eq!(set.values[0].conj(), set.values[1]);
    }

    #[test]
    fn verdict_thresholds() {
        let mk = |max_modulus: f64| MonodromyResult {
            monodromy: DMatrix::identity(2, 2),
            multipliers: vec![Complex::new(max_modulus, 0.0)],
            max_modulus,
            det_residual: 0.0,
            max_det_drift: 0.0,
            symplectic_residual: 0.0,
            pairing_residual: 0.0,
            mode: IntegrationMode::AnalyticOrbit,
            steps: 16,
            log_scale: 0.0,
            rescaled: false,
        };
        assert!(!stability_verdict(&mk(85.02), 0.05).stable);
        assert!(stability_verdict(&mk(1.0187), 0.05).stable);
        assert!(stability_verdict(&mk(1.0), 0.05).stable);
    }
}
