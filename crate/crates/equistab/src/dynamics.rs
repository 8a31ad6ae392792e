//! Newtonian n-body dynamics: potential, first and second derivatives, the
//! first-order vector field and its time-dependent linearization.
//!
//! Units are gravitational (G = 1) throughout. The potential is
//! `U(x) = sum_{j<i} m_j m_i / |x_j - x_i|`, so the equations of motion read
//! `m_i x_i'' = dU/dx_i` and the first-order system is `x' = M^{-1} y`,
//! `y' = grad U(x)` with `y` the conjugate momenta.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::symmetry::{Configuration, SymmetryGroup};

/// Immutable problem definition: masses, dimension, symmetry group and
/// discretization parameters.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    masses: Vec<f64>,
    d: usize,
    group: SymmetryGroup,
    trig_modes: usize,
    fundamental_modes: usize,
    grid_size: usize,
    min_separation: f64,
}

impl ProblemSpec {
    /// Validates masses, dimensions and mass compatibility with the group:
    /// a permutation that maps bodies of unequal mass onto each other breaks
    /// the invariance of the action and is rejected.
    pub fn new(
        masses: Vec<f64>,
        d: usize,
        group: SymmetryGroup,
        trig_modes: usize,
        fundamental_modes: usize,
        grid_size: usize,
        min_separation: f64,
    ) -> Result<Self> {
        let n = masses.len();
        if n < 2 {
            return Err(Error::SchemaError {
                context: format!("need at least 2 bodies, got {n}"),
            });
        }
        if d != 2 && d != 3 {
            return Err(Error::SchemaError {
                context: format!("space dimension must be 2 or 3, got {d}"),
            });
        }
        if masses.iter().any(|m| !m.is_finite() || *m <= 0.0) {
            return Err(Error::SchemaError {
                context: "masses must be positive and finite".into(),
            });
        }
        if group.n() != n || group.d() != d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: group.n() * group.d(),
            });
        }
        if trig_modes < 1 || fundamental_modes < 1 {
            return Err(Error::SchemaError {
                context: "truncation orders K and F must be at least 1".into(),
            });
        }
        if grid_size < 8 {
            return Err(Error::SchemaError {
                context: format!("time grid size must be at least 8, got {grid_size}"),
            });
        }
        if !(min_separation > 0.0) {
            return Err(Error::SchemaError {
                context: "min separation must be positive".into(),
            });
        }
        // Masses must be constant within each sigma-orbit of the group.
        for g in group.elements() {
            for i in 0..n {
                let j = g.sigma.apply(i);
                if (masses[i] - masses[j]).abs() > 0.0 {
                    return Err(Error::MassOrbitMismatch {
                        body_a: i + 1,
                        mass_a: masses[i],
                        body_b: j + 1,
                        mass_b: masses[j],
                    });
                }
            }
        }
        Ok(Self {
            masses,
            d,
            group,
            trig_modes,
            fundamental_modes,
            grid_size,
            min_separation,
        })
    }

    pub fn n(&self) -> usize {
        self.masses.len()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn group(&self) -> &SymmetryGroup {
        &self.group
    }

    /// Quotient order `l = |G| / |ker tau|`.
    pub fn quotient_order(&self) -> usize {
        self.group.quotient_order()
    }

    /// Full period `T = l * pi` (derived, never stored independently).
    pub fn period(&self) -> f64 {
        self.quotient_order() as f64 * PI
    }

    /// Trig truncation order K.
    pub fn trig_modes(&self) -> usize {
        self.trig_modes
    }

    /// Fundamental-domain sine modes F.
    pub fn fundamental_modes(&self) -> usize {
        self.fundamental_modes
    }

    /// Time grid size M.
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// Number of potential quadrature nodes, `4 M`.
    pub fn quadrature_nodes(&self) -> usize {
        4 * self.grid_size
    }

    /// Collision guard distance (delta).
    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }
}

/// Phase-space state: positions and conjugate momenta `y = M x'`.
#[derive(Debug, Clone)]
pub struct PhaseState {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    min_separation: f64,
}

impl PhaseState {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>) -> Result<Self> {
        if x.shape() != y.shape() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows() * x.ncols(),
                got: y.nrows() * y.ncols(),
            });
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteIntegration);
        }
        let min_separation = Configuration::new(x.clone()).min_pairwise_distance();
        Ok(Self {
            x,
            y,
            min_separation,
        })
    }

    /// From positions and velocities: `y_i = m_i v_i`.
    pub fn from_velocities(x: DMatrix<f64>, v: &DMatrix<f64>, masses: &[f64]) -> Result<Self> {
        let mut y = v.clone();
        for i in 0..y.nrows() {
            for c in 0..y.ncols() {
                y[(i, c)] *= masses[i];
            }
        }
        Self::new(x, y)
    }

    pub fn min_separation(&self) -> f64 {
        self.min_separation
    }

    /// Total energy `H = y^T M^{-1} y / 2 - U(x)`, conserved along the flow.
    pub fn energy(&self, spec: &ProblemSpec) -> Result<f64> {
        let c = Configuration::new(self.x.clone());
        let u = potential(&c, spec)?;
        let mut kin = 0.0;
        for i in 0..self.x.nrows() {
            for cc in 0..self.x.ncols() {
                kin += self.y[(i, cc)] * self.y[(i, cc)] / spec.mass(i);
            }
        }
        Ok(0.5 * kin - u)
    }
}

fn check_separation(c: &Configuration, spec: &ProblemSpec) -> Result<()> {
    let min = c.min_pairwise_distance();
    if min < spec.min_separation() {
        return Err(Error::CollisionalConfiguration {
            min_separation: min,
            limit: spec.min_separation(),
        });
    }
    Ok(())
}

/// Newtonian potential `U = sum_{j<i} m_j m_i / r_ij`. Strictly positive.
pub fn potential(c: &Configuration, spec: &ProblemSpec) -> Result<f64> {
    check_separation(c, spec)?;
    Ok(potential_unchecked(c, spec))
}

pub(crate) fn potential_unchecked(c: &Configuration, spec: &ProblemSpec) -> f64 {
    let n = spec.n();
    let mut u = 0.0;
    for i in 0..n {
        for j in 0..i {
            u += spec.mass(i) * spec.mass(j) / c.distance(i, j);
        }
    }
    u
}

/// Gradient of the potential: row `i` is
/// `sum_{j != i} m_i m_j (x_j - x_i) / r_ij^3`.
pub fn grad_potential(c: &Configuration, spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    check_separation(c, spec)?;
    Ok(grad_potential_unchecked(c, spec))
}

pub(crate) fn grad_potential_unchecked(c: &Configuration, spec: &ProblemSpec) -> DMatrix<f64> {
    let n = spec.n();
    let d = spec.d();
    let x = c.positions();
    let mut g = DMatrix::zeros(n, d);
    for i in 0..n {
        for j in 0..i {
            let r = c.distance(i, j);
            let f = spec.mass(i) * spec.mass(j) / (r * r * r);
            for cc in 0..d {
                let diff = x[(j, cc)] - x[(i, cc)];
                g[(i, cc)] += f * diff;
                g[(j, cc)] -= f * diff;
            }
        }
    }
    g
}

/// Hessian of the potential as an `(n d) x (n d)` symmetric matrix in
/// body-major ordering. The off-diagonal block `(i, j)` is
/// `m_i m_j (I / r^3 - 3 r r^T / r^5)` with `r = x_i - x_j`, and each
/// diagonal block is the negated sum of its row's off-diagonal blocks, so
/// block rows sum to zero (translation invariance).
pub fn hess_potential(c: &Configuration, spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    check_separation(c, spec)?;
    Ok(hess_potential_unchecked(c, spec))
}

pub(crate) fn hess_potential_unchecked(c: &Configuration, spec: &ProblemSpec) -> DMatrix<f64> {
    let n = spec.n();
    let d = spec.d();
    let x = c.positions();
    let mut h = DMatrix::zeros(n * d, n * d);
    let mut pair = vec![0.0; d * d];
    for i in 0..n {
        for j in 0..i {
            let r = c.distance(i, j);
            let r3 = r * r * r;
            let r5 = r3 * r * r;
            let mm = spec.mass(i) * spec.mass(j);
            // pair = m_i m_j (3 r r^T / r^5 - I / r^3); the (i,i) and (j,j)
            // blocks gain +pair, the (i,j) and (j,i) blocks gain -pair.
            for a in 0..d {
                let ra = x[(i, a)] - x[(j, a)];
                for b in 0..d {
                    let rb = x[(i, b)] - x[(j, b)];
                    let mut v = 3.0 * ra * rb / r5;
                    if a == b {
                        v -= 1.0 / r3;
                    }
                    pair[a * d + b] = mm * v;
                }
            }
            for a in 0..d {
                for b in 0..d {
                    let v = pair[a * d + b];
                    h[(i * d + a, i * d + b)] += v;
                    h[(j * d + a, j * d + b)] += v;
                    h[(i * d + a, j * d + b)] -= v;
                    h[(j * d + a, i * d + b)] -= v;
                }
            }
        }
    }
    h
}

/// Right-hand side of the first-order system: `(M^{-1} y, grad U(x))`.
pub fn vector_field(s: &PhaseState, spec: &ProblemSpec) -> Result<PhaseState> {
    let c = Configuration::new(s.x.clone());
    check_separation(&c, spec)?;
    let mut xdot = s.y.clone();
    for i in 0..xdot.nrows() {
        for cc in 0..xdot.ncols() {
            xdot[(i, cc)] /= spec.mass(i);
        }
    }
    let ydot = grad_potential_unchecked(&c, spec);
    PhaseState::new(xdot, ydot)
}

/// Linearization `A(x) = [[0, M^{-1}], [hess U(x), 0]]` of the first-order
/// system, a `(2 n d) x (2 n d)` matrix with zero trace.
pub fn linearization_matrix(c: &Configuration, spec: &ProblemSpec) -> Result<DMatrix<f64>> {
    check_separation(c, spec)?;
    Ok(linearization_matrix_unchecked(c, spec))
}

pub(crate) fn linearization_matrix_unchecked(c: &Configuration, spec: &ProblemSpec) -> DMatrix<f64> {
    let nd = spec.n() * spec.d();
    let mut a = DMatrix::zeros(2 * nd, 2 * nd);
    for i in 0..spec.n() {
        for cc in 0..spec.d() {
            let idx = i * spec.d() + cc;
            a[(idx, nd + idx)] = 1.0 / spec.mass(i);
        }
    }
    let hu = hess_potential_unchecked(c, spec);
    for r in 0..nd {
        for col in 0..nd {
            a[(nd + r, col)] = hu[(r, col)];
        }
    }
    a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DVector;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn spec(masses: Vec<f64>, d: usize) -> ProblemSpec {
        let n = masses.len();
        ProblemSpec::new(masses, d, SymmetryGroup::trivial(n, d), 8, 8, 64, 1e-6).unwrap()
    }

    fn random_config(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Configuration {
        loop {
            let m = DMatrix::from_fn(n, d, |_, _| rng.gen_range(-1.0..1.0));
            let c = Configuration::new(m);
            if c.min_pairwise_distance() > 0.3 {
                return c;
            }
        }
    }

    /// Independent pairwise summation used as the potential oracle.
    fn potential_oracle(c: &Configuration, masses: &[f64]) -> f64 {
        let n = masses.len();
        let mut total = 0.0;
        for a in 0..n {
            for b in 0..n {
                if b < a {
                    let mut d2 = 0.0;
                    for k in 0..c.d() {
                        let diff = c.positions()[(a, k)] - c.positions()[(b, k)];
                        d2 += diff * diff;
                    }
                    total += masses[a] * masses[b] / d2.sqrt();
                }
            }
        }
        total
    }

    #[test]
    fn potential_two_bodies_at_unit_distance() {
        let c = Configuration::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]));
        assert_relative_eq!(potential(&c, &spec(vec![1.0, 1.0], 2)).unwrap(), 1.0);
    }

    #[test]
    fn potential_equilateral_triangle() {
        let s = 1.7;
        let h = s * 3.0_f64.sqrt() / 2.0;
        let c = Configuration::new(DMatrix::from_row_slice(
            3,
            2,
            &[0.0, 0.0, s, 0.0, s / 2.0, h],
        ));
        let u = potential(&c, &spec(vec![1.0; 3], 2)).unwrap();
        assert_relative_eq!(u, 3.0 / s, epsilon = 1e-14);
    }

    #[test]
    fn potential_matches_independent_summation() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let sp = spec(vec![1.0, 2.0, 0.5, 1.5], 3);
        for _ in 0..10 {
            let c = random_config(&mut rng, 4, 3);
            let u = potential(&c, &sp).unwrap();
            let oracle = potential_oracle(&c, sp.masses());
            assert_relative_eq!(u, oracle, max_relative = 1e-14);
        }
    }

    #[test]
    fn collision_guard_triggers() {
        let c = Configuration::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1e-9, 0.0]));
        assert!(matches!(
            potential(&c, &spec(vec![1.0, 1.0], 2)),
            Err(Error::CollisionalConfiguration { .. })
        ));
    }

    #[test]
    fn force_between_two_unit_masses() {
        let c = Configuration::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]));
        let g = grad_potential(&c, &spec(vec![1.0, 1.0], 2)).unwrap();
        assert_relative_eq!(g[(0, 0)], -1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(1, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(g[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn lagrange_triangle_centripetal_balance() {
        // Equilateral triangle with side 3^(1/3) at unit angular velocity:
        // grad U = -m x (omega = 1).
        let side = 3.0_f64.cbrt();
        let r = side / 3.0_f64.sqrt();
        let mut m = DMatrix::zeros(3, 2);
        for i in 0..3 {
            let th = 2.0 * PI * i as f64 / 3.0;
            m[(i, 0)] = r * th.cos();
            m[(i, 1)] = r * th.sin();
        }
        let c = Configuration::new(m.clone());
        let g = grad_potential(&c, &spec(vec![1.0; 3], 2)).unwrap();
        assert_relative_eq!((g + m).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for &(n, d) in &[(2usize, 2usize), (3, 2), (4, 3)] {
            let sp = spec(vec![1.0; n], d);
            let c = random_config(&mut rng, n, d);
            let g = grad_potential(&c, &sp).unwrap();
            let step = 1e-6;
            for i in 0..n {
                for cc in 0..d {
                    let mut plus = c.positions().clone();
                    let mut minus = c.positions().clone();
                    plus[(i, cc)] += step;
                    minus[(i, cc)] -= step;
                    let fd = (potential(&Configuration::new(plus), &sp).unwrap()
                        - potential(&Configuration::new(minus), &sp).unwrap())
                        / (2.0 * step);
                    assert_relative_eq!(g[(i, cc)], fd, max_relative = 1e-6, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn hessian_diagonal_block_for_aligned_pair() {
        // Two unit masses on the x-axis at distance 1: the (i,i) block is
        // diag(2, -1) and the off-diagonal block its negative.
        let c = Configuration::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));
        let h = hess_potential(&c, &spec(vec![1.0, 1.0], 2)).unwrap();
        assert_relative_eq!(h[(0, 0)], 2.0, epsilon = 1e-14);
        assert_relative_eq!(h[(1, 1)], -1.0, epsilon = 1e-14);
        assert_relative_eq!(h[(0, 1)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(h[(0, 2)], -2.0, epsilon = 1e-14);
        assert_relative_eq!(h[(1, 3)], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hessian_matches_finite_differences_of_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sp = spec(vec![1.0, 2.0, 1.0], 2);
        let c = random_config(&mut rng, 3, 2);
        let h = hess_potential(&c, &sp).unwrap();
        let step = 1e-5;
        for j in 0..3 {
            for cc in 0..2 {
                let mut plus = c.positions().clone();
                let mut minus = c.positions().clone();
                plus[(j, cc)] += step;
                minus[(j, cc)] -= step;
                let gp = grad_potential(&Configuration::new(plus), &sp).unwrap();
                let gm = grad_potential(&Configuration::new(minus), &sp).unwrap();
                for i in 0..3 {
                    for aa in 0..2 {
                        let fd = (gp[(i, aa)] - gm[(i, aa)]) / (2.0 * step);
                        assert_relative_eq!(
                            h[(i * 2 + aa, j * 2 + cc)],
                            fd,
                            max_relative = 1e-5,
                            epsilon = 1e-7
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn hessian_block_rows_sum_to_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sp = spec(vec![1.0, 2.0, 0.5], 3);
        let c = random_config(&mut rng, 3, 3);
        let h = hess_potential(&c, &sp).unwrap();
        for i in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    let mut sum = 0.0;
                    for j in 0..3 {
                        sum += h[(i * 3 + a, j * 3 + b)];
                    }
                    assert!(sum.abs() < 1e-10, "block row sum {sum}");
                }
            }
        }
    }

    #[test]
    fn vector_field_with_zero_momenta() {
        let sp = spec(vec![1.0, 1.0], 2);
        let x = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]);
        let s = PhaseState::new(x.clone(), DMatrix::zeros(2, 2)).unwrap();
        let dot = vector_field(&s, &sp).unwrap();
        assert_relative_eq!(dot.x.norm(), 0.0, epsilon = 1e-15);
        let c = Configuration::new(x);
        let g = grad_potential(&c, &sp).unwrap();
        assert_relative_eq!((dot.y - g).norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn linearization_has_zero_trace_and_inverse_mass_block() {
        let sp = spec(vec![2.0, 1.0], 2);
        let c = Configuration::new(DMatrix::from_row_slice(2, 2, &[0.5, 0.0, -0.5, 0.0]));
        let a = linearization_matrix(&c, &sp).unwrap();
        assert_eq!(a.trace(), 0.0);
        assert_relative_eq!(a[(0, 4)], 0.5, epsilon = 1e-15);
        assert_relative_eq!(a[(2, 6)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn linearization_matches_vector_field_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sp = spec(vec![1.0, 1.5], 2);
        let c = random_config(&mut rng, 2, 2);
        let y = DMatrix::from_fn(2, 2, |_, _| rng.gen_range(-0.5..0.5));
        let a = linearization_matrix(&c, &sp).unwrap();
        let nd = 4;
        let flat = |m: &DMatrix<f64>| -> DVector<f64> {
            DVector::from_iterator(nd, (0..2).flat_map(|i| (0..2).map(move |cc| (i, cc))).map(|(i, cc)| m[(i, cc)]))
        };
        let step = 1e-6;
        for idx in 0..2 * nd {
            let mut xp = c.positions().clone();
            let mut xm = c.positions().clone();
            let mut yp = y.clone();
            let mut ym = y.clone();
            if idx < nd {
                xp[(idx / 2, idx % 2)] += step;
                xm[(idx / 2, idx % 2)] -= step;
            } else {
                let j = idx - nd;
                yp[(j / 2, j % 2)] += step;
                ym[(j / 2, j % 2)] -= step;
            }
            let fp = vector_field(&PhaseState::new(xp, yp).unwrap(), &sp).unwrap();
            let fm = vector_field(&PhaseState::new(xm, ym).unwrap(), &sp).unwrap();
            let dx = (flat(&fp.x) - flat(&fm.x)) / (2.0 * step);
            let dy = (flat(&fp.y) - flat(&fm.y)) / (2.0 * step);
            for r in 0..nd {
                assert_relative_eq!(a[(r, idx)], dx[r], max_relative = 1e-6, epsilon = 1e-7);
                assert_relative_eq!(a[(nd + r, idx)], dy[r], max_relative = 1e-6, epsilon = 1e-7);
            }
        }
    }
}
