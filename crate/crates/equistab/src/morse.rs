//! Discrete Morse indices of the action Hessian at a critical point.
//!
//! The fundamental-domain index counts negative eigenvalues of the Hessian
//! restricted to the equivariant subspace (reduced coordinates); the
//! full-period index uses the pointwise Hessian on an `M`-point grid with no
//! symmetry constraint. Known near-null directions of the continuous
//! problem — uniform translations, the time shift and rigid rotations — are
//! deflated before counting so the integer index is stable under grid and
//! threshold changes; the symmetry modes are reported in `near_zero_count`
//! rather than the index.

use nalgebra::{DMatrix, DVector};

use crate::action::{el_residual, grad_action_reduced, hess_action_points, hess_action_reduced, TrigLoop};
use crate::dynamics::ProblemSpec;
use crate::error::{Error, Result};
use crate::symmetry::ReducedSpace;

/// Which discretization the index was computed on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MorseDomain {
    Fundamental,
    Period,
}

impl MorseDomain {
    pub fn name(&self) -> &'static str {
        match self {
            MorseDomain::Fundamental => "fundamental",
            MorseDomain::Period => "period",
        }
    }
}

/// Near-zero threshold: automatic (`1e-8 * max |lambda|`) or fixed.
#[derive(Debug, Clone, Copy)]
pub enum EpsZero {
    Auto,
    Fixed(f64),
}

/// Signed eigenvalue counts of a discretized action Hessian.
#[derive(Debug, Clone)]
pub struct MorseResult {
    pub domain: MorseDomain,
    /// Number of eigenvalues below `-eps_zero`.
    pub index: usize,
    /// Ascending eigenvalues, deflated symmetry directions excluded.
    pub eigenvalues: Vec<f64>,
    /// Largest negative eigenvalue; absent iff the index is zero.
    pub max_negative: Option<f64>,
    /// Eigenvalues with `|lambda| <= eps_zero`, plus deflated time-shift and
    /// rotation directions.
    pub near_zero_count: usize,
    /// Threshold actually used.
    pub eps_zero: f64,
    /// Symmetry directions removed before the eigensolve (translations are
    /// not included in `near_zero_count`; shift/rotation modes are).
    pub deflated_translations: usize,
    pub deflated_symmetries: usize,
}

const CRITICAL_GRAD_LIMIT: f64 = 1e-6;
const EL_RESIDUAL_LIMIT: f64 = 1e-3;

/// Negative-eigenvalue count of a symmetric matrix.
///
/// Returns the index, the ascending spectrum and the largest negative
/// eigenvalue. The matrix must be symmetric within `1e-8 * max |H|`.
pub fn count_negative(h: &DMatrix<f64>, eps_zero: f64) -> Result<(usize, Vec<f64>, Option<f64>)> {
    let scale = h.amax();
    let asym = (h - h.transpose()).amax();
    if asym > 1e-8 * scale.max(1.0) {
        return Err(Error::NotSymmetric { residual: asym });
    }
    let sym = (h + h.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let index = values.iter().filter(|&&v| v < -eps_zero).count();
    let max_negative = if index > 0 { Some(values[index - 1]) } else { None };
    Ok((index, values, max_negative))
}

fn resolve_eps(eps: EpsZero, values: &[f64]) -> f64 {
    match eps {
        EpsZero::Fixed(e) => e,
        EpsZero::Auto => {
            let max = values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            1e-8 * max
        }
    }
}

fn assemble_result(
    domain: MorseDomain,
    mut values: Vec<f64>,
    eps: EpsZero,
    deflated_translations: usize,
    deflated_symmetries: usize,
) -> MorseResult {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let eps_zero = resolve_eps(eps, &values);
    let index = values.iter().filter(|&&v| v < -eps_zero).count();
    let max_negative = if index > 0 { Some(values[index - 1]) } else { None };
    let near_zero_count =
        values.iter().filter(|v| v.abs() <= eps_zero).count() + deflated_symmetries;
    MorseResult {
        domain,
        index,
        eigenvalues: values,
        max_negative,
        near_zero_count,
        eps_zero,
        deflated_translations,
        deflated_symmetries,
    }
}

/// Morse index on the fundamental domain: the reduced Hessian
/// `B^T H B / l` at a critical point of the reduced action.
pub fn morse_fundamental(
    z: &DVector<f64>,
    rs: &ReducedSpace,
    spec: &ProblemSpec,
    eps: EpsZero,
) -> Result<MorseResult> {
    let grad_norm = grad_action_reduced(z, rs, spec)?.norm();
    if grad_norm > CRITICAL_GRAD_LIMIT {
        return Err(Error::NotCritical {
            residual: grad_norm,
            limit: CRITICAL_GRAD_LIMIT,
        });
    }
    let hess = hess_action_reduced(z, rs, spec)?;
    let sym = (&hess + hess.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Ok(assemble_result(MorseDomain::Fundamental, values, eps, 0, 0))
}

/// Morse index over the full period: the pointwise Hessian on an `M`-point
/// grid. Uniform translations are projected out; the time-shift and rigid
/// rotation directions are deflated and reported in `near_zero_count`.
pub fn morse_period(
    lp: &TrigLoop,
    spec: &ProblemSpec,
    grid: usize,
    eps: EpsZero,
) -> Result<MorseResult> {
    let residual = el_residual(lp, spec, grid)?;
    if residual > EL_RESIDUAL_LIMIT {
        return Err(Error::NotCritical {
            residual,
            limit: EL_RESIDUAL_LIMIT,
        });
    }

    let sampled = lp.sample(grid);
    let mut hess = hess_action_points(&sampled, spec)?;

    let dim = hess.nrows();
    let mut row_norm = 0.0_f64;
    for r in 0..dim {
        let mut sum = 0.0;
        for c in 0..dim {
            sum += hess[(r, c)].abs();
        }
        row_norm = row_norm.max(sum);
    }

    let directions = symmetry_directions(lp, spec, grid);
    let candidates = orthonormalize(directions, 1e-8);
    // Only deflate directions that really are near-null for this Hessian;
    // a genuine negative direction never passes this gate.
    let basis: Vec<DVector<f64>> = candidates
        .into_iter()
        .filter(|v| {
            let hv = &hess * v;
            v.dot(&hv).abs() <= 1e-6 * row_norm && hv.norm() <= 1e-3 * row_norm
        })
        .collect();
    let translations = spec.d().min(basis.len());
    let deflated = basis.len();

    // Shift the accepted near-null directions far into the positive
    // spectrum, then drop exactly that many top eigenvalues.
    let mu = 10.0 * row_norm.max(1.0);
    for v in &basis {
        hess += v * v.transpose() * mu;
    }

    let sym = (&hess + hess.transpose()) * 0.5;
    let mut values: Vec<f64> = sym.symmetric_eigenvalues().iter().cloned().collect();
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let shifted = values.iter().filter(|&&v| v > 0.5 * mu).count();
    debug_assert_eq!(shifted, deflated, "deflation shifted unexpected modes");
    values.truncate(values.len() - shifted);

    Ok(assemble_result(
        MorseDomain::Period,
        values,
        eps,
        translations,
        deflated.saturating_sub(translations),
    ))
}

/// Known near-null directions of the pointwise Hessian: the `d` uniform
/// translations, the time shift (sampled velocity), the rigid rotations,
/// and for relative equilibria the two eccentricity directions of the
/// homographic family (exact zero modes of the fixed-period action).
fn symmetry_directions(lp: &TrigLoop, spec: &ProblemSpec, grid: usize) -> Vec<DVector<f64>> {
    let n = spec.n();
    let d = spec.d();
    let dim = grid * n * d;
    let mut out = Vec::new();

    for c in 0..d {
        let mut v = DVector::zeros(dim);
        for k in 0..grid {
            for i in 0..n {
                v[(k * n + i) * d + c] = 1.0;
            }
        }
        out.push(v);
    }

    let mut shift = DVector::zeros(dim);
    for k in 0..grid {
        let vel = lp.velocity(k as f64 * lp.period() / grid as f64);
        for i in 0..n {
            for c in 0..d {
                shift[(k * n + i) * d + c] = vel[(i, c)];
            }
        }
    }
    out.push(shift);

    let generators: Vec<Vec<(usize, usize, f64)>> = if d == 2 {
        // (x, y) -> (-y, x)
        vec![vec![(0, 1, -1.0), (1, 0, 1.0)]]
    } else {
        vec![
            vec![(1, 2, -1.0), (2, 1, 1.0)], // about x
            vec![(0, 2, 1.0), (2, 0, -1.0)], // about y
            vec![(0, 1, -1.0), (1, 0, 1.0)], // about z
        ]
    };
    for gen in generators {
        let mut v = DVector::zeros(dim);
        for k in 0..grid {
            let x = lp.position(k as f64 * lp.period() / grid as f64);
            for i in 0..n {
                for &(row, col, sign) in &gen {
                    v[(k * n + i) * d + row] += sign * x[(i, col)];
                }
            }
        }
        out.push(v);
    }

    if let Some(omega) = detect_relative_equilibrium(lp) {
        out.extend(eccentricity_directions(lp, grid, omega));
    }
    out
}

/// A relative equilibrium satisfies `v(t) = omega J x(t)` with `J` the
/// in-plane quarter turn. Returns `omega` when the residual is small.
fn detect_relative_equilibrium(lp: &TrigLoop) -> Option<f64> {
    let samples = 32;
    let j_apply = |x: &DMatrix<f64>| {
        let mut out = x.clone();
        for i in 0..x.nrows() {
            out[(i, 0)] = -x[(i, 1)];
            out[(i, 1)] = x[(i, 0)];
        }
        out
    };
    let x0 = lp.position(0.0);
    let v0 = lp.velocity(0.0);
    // Out-of-plane motion disqualifies (rotation in the xy-plane only).
    if lp.d() == 3 {
        for q in 0..samples {
            let t = q as f64 * lp.period() / samples as f64;
            let x = lp.position(t);
            for i in 0..lp.n() {
                if x[(i, 2)].abs() > 1e-9 {
                    return None;
                }
            }
        }
    }
    let jx0 = j_apply(&x0);
    let denom = jx0.norm_squared();
    if denom < 1e-20 {
        return None;
    }
    let omega = v0.dot(&jx0) / denom;
    let mut scale = 0.0_f64;
    let mut residual = 0.0_f64;
    for q in 0..samples {
        let t = q as f64 * lp.period() / samples as f64;
        let x = lp.position(t);
        let v = lp.velocity(t);
        scale = scale.max(v.norm());
        residual = residual.max((v - j_apply(&x) * omega).norm());
    }
    (residual <= 1e-8 * scale.max(1e-12)).then_some(omega)
}

/// First-order eccentricity perturbations of a circular homographic orbit:
/// `delta x(t) = [-cos(w t + phase) I + 2 sin(w t + phase) J] x(t)`.
fn eccentricity_directions(lp: &TrigLoop, grid: usize, omega: f64) -> Vec<DVector<f64>> {
    let n = lp.n();
    let d = lp.d();
    let dim = grid * n * d;
    let mut out = Vec::new();
    for phase in [0.0, std::f64::consts::FRAC_PI_2] {
        let mut v = DVector::zeros(dim);
        for k in 0..grid {
            let t = k as f64 * lp.period() / grid as f64;
            let x = lp.position(t);
            let (s, c) = (omega * t + phase).sin_cos();
            for i in 0..n {
                v[(k * n + i) * d] = -c * x[(i, 0)] - 2.0 * s * x[(i, 1)];
                v[(k * n + i) * d + 1] = -c * x[(i, 1)] + 2.0 * s * x[(i, 0)];
            }
        }
        out.push(v);
    }
    out
}

/// Modified Gram-Schmidt dropping directions that become linearly dependent
/// (for relative equilibria the time shift and a rotation coincide).
fn orthonormalize(directions: Vec<DVector<f64>>, rel_tol: f64) -> Vec<DVector<f64>> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for mut v in directions {
        let original = v.norm();
        if original == 0.0 {
            continue;
        }
        for b in &basis {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        if v.norm() > rel_tol * original {
            let norm = v.norm();
            basis.push(v / norm);
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn count_negative_trivial_cases() {
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 3.0]));
        let (idx, _, maxneg) = count_negative(&h, 1e-8).unwrap();
        assert_eq!(idx, 0);
        assert!(maxneg.is_none());

        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.0, 5.0]));
        let (idx, vals, maxneg) = count_negative(&h, 1e-8).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(maxneg, Some(-1.0));
        assert_eq!(vals, vec![-1.0, 0.0, 5.0]);
    }

    #[test]
    fn count_negative_rejects_asymmetric_input() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(
            count_negative(&h, 1e-8),
            Err(Error::NotSymmetric { .. })
        ));
    }

    /// LDL^T inertia, an independent oracle for the negative count.
    fn ldlt_negative_count(h: &DMatrix<f64>) -> usize {
        let n = h.nrows();
        let mut a = h.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut negatives = 0;
        for k in 0..n {
            // Diagonal pivoting: bring the largest remaining diagonal in.
            let mut best = k;
            for j in k..n {
                if a[(perm[j], perm[j])].abs() > a[(perm[best], perm[best])].abs() {
                    best = j;
                }
            }
            perm.swap(k, best);
            let p = perm[k];
            let pivot = a[(p, p)];
            if pivot < 0.0 {
                negatives += 1;
            }
            if pivot.abs() < 1e-300 {
                continue;
            }
            for i in (k + 1)..n {
                let pi = perm[i];
                let factor = a[(pi, p)] / pivot;
                for j in (k + 1)..n {
                    let pj = perm[j];
                    let upd = factor * a[(p, pj)];
                    a[(pi, pj)] -= upd;
                }
            }
        }
        negatives
    }

    #[test]
    fn count_negative_matches_ldlt_inertia() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let raw = DMatrix::from_fn(50, 50, |_, _| rng.gen_range(-1.0..1.0));
            let h = (&raw + raw.transpose()) * 0.5;
            let (idx, _, _) = count_negative(&h, 0.0).unwrap();
            assert_eq!(idx, ldlt_negative_count(&h));
        }
    }

    #[test]
    fn orthonormalize_drops_dependent_directions() {
        let a = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![2.0, 0.0, 0.0]);
        let c = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        let basis = orthonormalize(vec![a, b, c], 1e-8);
        assert_eq!(basis.len(), 2);
        for v in &basis {
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        assert!(basis[0].dot(&basis[1]).abs() < 1e-12);
    }
}
