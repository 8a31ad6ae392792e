//! Finite symmetry groups acting on loops: space rotation `rho`, body
//! permutation `sigma` and time-circle action `tau` per element.
//!
//! The action convention, fixed once for the whole crate, is
//!
//! ```text
//! (g . x)_i(t) = rho(g) * x_{sigma(g)^{-1}(i)}( tau(g)^{-1} t ).
//! ```
//!
//! Time actions are stored as exact rationals of the full period, so kernel
//! detection and coset ordering are exact. Equivariance is imposed at the
//! level of trigonometric coefficients by group averaging: the projector
//! `P = (1/|G|) sum_g L_g` is block-diagonal across modes, and its range
//! yields the orthonormal reduced basis `B` used by the optimizer.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_rational::Ratio;

use crate::action::{fit_least_squares, trig_basis, FundamentalPath, TrigLoop};
use crate::dynamics::ProblemSpec;
use crate::error::{Error, Result};

const RHO_ORTHO_TOL: f64 = 1e-12;
const RHO_MATCH_TOL: f64 = 1e-10;

/// Action of a group element on the time circle `R / T Z`, stored as an
/// exact rational fraction of the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TimeAction {
    /// `t -> t + frac * T`.
    Rotation(Ratio<i64>),
    /// `t -> frac * T - t`.
    Reflection(Ratio<i64>),
}

fn normalize_fraction(frac: Ratio<i64>) -> Ratio<i64> {
    let one = Ratio::from_integer(1);
    let mut f = frac - frac.floor();
    if f >= one {
        f -= one;
    }
    f
}

impl TimeAction {
    pub fn rotation(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::SchemaError {
                context: "time action denominator must be nonzero".into(),
            });
        }
        Ok(TimeAction::Rotation(normalize_fraction(Ratio::new(num, den))))
    }

    pub fn reflection(num: i64, den: i64) -> Result<Self> {
        if den == 0 {
            return Err(Error::SchemaError {
                context: "time action denominator must be nonzero".into(),
            });
        }
        Ok(TimeAction::Reflection(normalize_fraction(Ratio::new(num, den))))
    }

    pub fn identity() -> Self {
        TimeAction::Rotation(Ratio::from_integer(0))
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, TimeAction::Rotation(f) if f.numer() == &0)
    }

    pub fn fraction(&self) -> Ratio<i64> {
        match self {
            TimeAction::Rotation(f) | TimeAction::Reflection(f) => *f,
        }
    }

    pub fn is_reflection(&self) -> bool {
        matches!(self, TimeAction::Reflection(_))
    }

    /// Composition `self . other` (apply `other` first).
    pub fn compose(&self, other: &TimeAction) -> TimeAction {
        use TimeAction::*;
        match (self, other) {
            (Rotation(f), Rotation(g)) => Rotation(normalize_fraction(f + g)),
            (Rotation(f), Reflection(c)) => Reflection(normalize_fraction(f + c)),
            (Reflection(c), Rotation(f)) => Reflection(normalize_fraction(c - f)),
            (Reflection(c), Reflection(e)) => Rotation(normalize_fraction(c - e)),
        }
    }

    pub fn inverse(&self) -> TimeAction {
        match self {
            TimeAction::Rotation(f) => TimeAction::Rotation(normalize_fraction(-f)),
            TimeAction::Reflection(c) => TimeAction::Reflection(*c),
        }
    }

    /// Apply to a time value, wrapping into `[0, T)`.
    pub fn apply(&self, t: f64, period: f64) -> f64 {
        let frac = ratio_to_f64(self.fraction());
        let raw = match self {
            TimeAction::Rotation(_) => t + frac * period,
            TimeAction::Reflection(_) => frac * period - t,
        };
        raw.rem_euclid(period)
    }

    pub fn inverse_apply(&self, t: f64, period: f64) -> f64 {
        self.inverse().apply(t, period)
    }
}

impl fmt::Display for TimeAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeAction::Rotation(r) => write!(f, "rotation {}/{}", r.numer(), r.denom()),
            TimeAction::Reflection(r) => write!(f, "reflection {}/{}", r.numer(), r.denom()),
        }
    }
}

pub(crate) fn ratio_to_f64(r: Ratio<i64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

/// Permutation of body labels, stored as 0-based images.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    /// From one-line notation with 1-based images.
    pub fn from_one_line(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        let mut map = Vec::with_capacity(n);
        for &img in images {
            if img < 1 || img > n || seen[img - 1] {
                return Err(Error::SchemaError {
                    context: format!("invalid permutation {images:?}"),
                });
            }
            seen[img - 1] = true;
            map.push(img - 1);
        }
        Ok(Self { map })
    }

    pub fn one_line(&self) -> Vec<usize> {
        self.map.iter().map(|&i| i + 1).collect()
    }

    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.map[i]
    }

    /// `sigma^{-1}(i)`.
    pub fn preimage(&self, i: usize) -> usize {
        self.map.iter().position(|&j| j == i).expect("bijection")
    }

    pub fn is_identity(&self) -> bool {
        self.map.iter().enumerate().all(|(i, &j)| i == j)
    }

    /// Composition `(self . other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        Permutation {
            map: (0..self.map.len()).map(|i| self.map[other.map[i]]).collect(),
        }
    }

    pub fn inverse(&self) -> Permutation {
        let mut map = vec![0; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            map[j] = i;
        }
        Permutation { map }
    }
}

/// One group element: orthogonal `rho`, permutation `sigma`, time action `tau`.
#[derive(Debug, Clone)]
pub struct GroupElement {
    pub rho: DMatrix<f64>,
    pub sigma: Permutation,
    pub tau: TimeAction,
}

impl GroupElement {
    pub fn identity(n: usize, d: usize) -> Self {
        Self {
            rho: DMatrix::identity(d, d),
            sigma: Permutation::identity(n),
            tau: TimeAction::identity(),
        }
    }

    pub fn new(rho: DMatrix<f64>, sigma: Permutation, tau: TimeAction) -> Self {
        Self { rho, sigma, tau }
    }

    pub fn dimension(&self) -> usize {
        self.rho.nrows()
    }

    pub fn body_count(&self) -> usize {
        self.sigma.size()
    }

    /// Deviation of `rho^T rho` from the identity, in max norm.
    pub fn orthogonality_residual(&self) -> f64 {
        let gram = self.rho.transpose() * &self.rho;
        let d = self.rho.nrows();
        let mut max = 0.0_f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                max = max.max((gram[(i, j)] - target).abs());
            }
        }
        max
    }

    pub fn compose(&self, other: &GroupElement) -> GroupElement {
        GroupElement {
            rho: &self.rho * &other.rho,
            sigma: self.sigma.compose(&other.sigma),
            tau: self.tau.compose(&other.tau),
        }
    }

    pub fn inverse(&self) -> GroupElement {
        GroupElement {
            rho: self.rho.transpose(),
            sigma: self.sigma.inverse(),
            tau: self.tau.inverse(),
        }
    }

    pub fn approx_eq(&self, other: &GroupElement, rho_tol: f64) -> bool {
        if self.sigma != other.sigma || self.tau != other.tau {
            return false;
        }
        self.rho
            .iter()
            .zip(other.rho.iter())
            .all(|(a, b)| (a - b).abs() <= rho_tol)
    }

    pub fn is_identity(&self, rho_tol: f64) -> bool {
        self.approx_eq(
            &GroupElement::identity(self.body_count(), self.dimension()),
            rho_tol,
        )
    }
}

/// Positions of all bodies, one row per body.
#[derive(Debug, Clone, PartialEq)]
pub struct Configuration {
    positions: DMatrix<f64>,
}

impl Configuration {
    pub fn new(positions: DMatrix<f64>) -> Self {
        Self { positions }
    }

    pub fn n(&self) -> usize {
        self.positions.nrows()
    }

    pub fn d(&self) -> usize {
        self.positions.ncols()
    }

    pub fn positions(&self) -> &DMatrix<f64> {
        &self.positions
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let mut d2 = 0.0;
        for c in 0..self.d() {
            let diff = self.positions[(i, c)] - self.positions[(j, c)];
            d2 += diff * diff;
        }
        d2.sqrt()
    }

    pub fn min_pairwise_distance(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.n() {
            for j in 0..i {
                min = min.min(self.distance(i, j));
            }
        }
        min
    }

    /// Mass-weighted center `sum m_i x_i / sum m_i`.
    pub fn center_of_mass(&self, masses: &[f64]) -> DVector<f64> {
        let mut com = DVector::zeros(self.d());
        let total: f64 = masses.iter().sum();
        for i in 0..self.n() {
            for c in 0..self.d() {
                com[c] += masses[i] * self.positions[(i, c)];
            }
        }
        com / total
    }
}

/// Apply a group element to a configuration: `(g . x)_i = rho x_{sigma^{-1}(i)}`.
pub fn act_on_configuration(g: &GroupElement, c: &Configuration) -> Result<Configuration> {
    if g.dimension() != c.d() || g.body_count() != c.n() {
        return Err(Error::DimensionMismatch {
            expected: g.body_count() * g.dimension(),
            got: c.n() * c.d(),
        });
    }
    let inv = g.sigma.inverse();
    let mut out = DMatrix::zeros(c.n(), c.d());
    for i in 0..c.n() {
        let src = inv.apply(i);
        for a in 0..c.d() {
            let mut v = 0.0;
            for b in 0..c.d() {
                v += g.rho[(a, b)] * c.positions()[(src, b)];
            }
            out[(i, a)] = v;
        }
    }
    Ok(Configuration::new(out))
}

/// A finite group closed under composition, with kernel, quotient order and
/// per-segment coset representatives.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    elements: Vec<GroupElement>,
    generators: Vec<GroupElement>,
    kernel_tau: Vec<usize>,
    quotient_order: usize,
    coset_reps: Vec<usize>,
    n: usize,
    d: usize,
}

impl SymmetryGroup {
    /// The trivial group (order 1, `l = 1`, `T = pi`).
    pub fn trivial(n: usize, d: usize) -> Self {
        Self {
            elements: vec![GroupElement::identity(n, d)],
            generators: vec![],
            kernel_tau: vec![0],
            quotient_order: 1,
            coset_reps: vec![0],
            n,
            d,
        }
    }

    /// Closure of the generators under composition.
    ///
    /// Element identity is decided by exact `sigma`/`tau` match and `rho`
    /// within 1e-10. Closure failing to terminate below `cap` signals an
    /// input that does not generate a finite group at these tolerances. The
    /// time actions must tile the period by segments of length pi starting
    /// from `[0, pi]`; groups violating this have no usable fundamental
    /// domain and are rejected as inconsistent.
    pub fn build(n: usize, d: usize, generators: Vec<GroupElement>, cap: usize) -> Result<Self> {
        for (index, g) in generators.iter().enumerate() {
            if g.dimension() != d || g.body_count() != n {
                return Err(Error::DimensionMismatch {
                    expected: n * d,
                    got: g.body_count() * g.dimension(),
                });
            }
            let residual = g.orthogonality_residual();
            if residual > RHO_ORTHO_TOL {
                return Err(Error::NonOrthogonalRho { index, residual });
            }
        }

        let mut elements = vec![GroupElement::identity(n, d)];
        let mut frontier: Vec<usize> = Vec::new();
        for g in &generators {
            if find_element(&elements, g).is_none() {
                elements.push(g.clone());
                frontier.push(elements.len() - 1);
            }
        }

        while let Some(idx) = frontier.pop() {
            // Products with every known element, both orders.
            let mut i = 0;
            while i < elements.len() {
                for (a, b) in [(idx, i), (i, idx)] {
                    let prod = elements[a].compose(&elements[b]);
                    if find_element(&elements, &prod).is_none() {
                        if elements.len() >= cap {
                            return Err(Error::GroupNotClosed { cap });
                        }
                        elements.push(prod);
                        frontier.push(elements.len() - 1);
                    }
                }
                i += 1;
            }
        }

        // A closed finite set of invertible components contains all inverses;
        // failure here means tolerance drift inside the closure.
        for g in &elements {
            if find_element(&elements, &g.inverse()).is_none() {
                return Err(Error::InconsistentTau {
                    detail: "closure is missing an inverse element".into(),
                });
            }
        }

        let kernel_tau: Vec<usize> = elements
            .iter()
            .enumerate()
            .filter(|(_, g)| g.tau.is_identity())
            .map(|(i, _)| i)
            .collect();
        let order = elements.len();
        let kernel_order = kernel_tau.len();
        if order % kernel_order != 0 {
            return Err(Error::InconsistentTau {
                detail: format!("kernel order {kernel_order} does not divide group order {order}"),
            });
        }
        let quotient_order = order / kernel_order;

        let coset_reps = find_coset_reps(&elements, quotient_order)?;

        Ok(Self {
            elements,
            generators,
            kernel_tau,
            quotient_order,
            coset_reps,
            n,
            d,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn element(&self, i: usize) -> &GroupElement {
        &self.elements[i]
    }

    pub fn generators(&self) -> &[GroupElement] {
        &self.generators
    }

    pub fn kernel_order(&self) -> usize {
        self.kernel_tau.len()
    }

    pub fn kernel_elements(&self) -> impl Iterator<Item = &GroupElement> {
        self.kernel_tau.iter().map(|&i| &self.elements[i])
    }

    /// `l = |G| / |ker tau|`; the full period is `l * pi`.
    pub fn quotient_order(&self) -> usize {
        self.quotient_order
    }

    pub fn period(&self) -> f64 {
        self.quotient_order as f64 * PI
    }

    /// Representative mapping the fundamental domain onto period segment `k`.
    pub fn coset_rep(&self, k: usize) -> &GroupElement {
        &self.elements[self.coset_reps[k]]
    }
}

fn find_element(elements: &[GroupElement], g: &GroupElement) -> Option<usize> {
    elements.iter().position(|e| e.approx_eq(g, RHO_MATCH_TOL))
}

/// Segment `k` is reachable from the fundamental domain `[0, pi]` either by
/// the rotation `k/l` or by the reflection `(k+1)/l`; one of them must exist
/// in the group for every segment (property of the fundamental domain).
fn find_coset_reps(elements: &[GroupElement], l: usize) -> Result<Vec<usize>> {
    let mut reps = Vec::with_capacity(l);
    for k in 0..l {
        let rot = TimeAction::Rotation(normalize_fraction(Ratio::new(k as i64, l as i64)));
        let refl = TimeAction::Reflection(normalize_fraction(Ratio::new(k as i64 + 1, l as i64)));
        let found = elements
            .iter()
            .position(|g| g.tau == rot)
            .or_else(|| elements.iter().position(|g| g.tau == refl));
        match found {
            Some(i) => reps.push(i),
            None => {
                return Err(Error::InconsistentTau {
                    detail: format!(
                        "no element maps the fundamental domain onto period segment {k} of {l}"
                    ),
                })
            }
        }
    }
    Ok(reps)
}

/// Ready-made time actions covering the cyclic, dihedral and brake families.
pub mod presets {
    use super::TimeAction;

    /// Cyclic family: a single generator advancing time by `1/l` of the period.
    pub fn cyclic(l: i64) -> TimeAction {
        TimeAction::rotation(1, l).expect("nonzero order")
    }

    /// Dihedral family of even order `2m`: the rotation generator advances
    /// time by `1/m` of the period; pair it with [`dihedral_reflection`].
    pub fn dihedral_rotation(order: i64) -> TimeAction {
        assert!(order >= 2 && order % 2 == 0, "dihedral order must be even");
        TimeAction::rotation(2, order).expect("nonzero order")
    }

    /// Reflection generator of the dihedral family (axis through t = 0).
    pub fn dihedral_reflection() -> TimeAction {
        TimeAction::reflection(0, 1).expect("nonzero order")
    }

    /// Brake family: time reversal through t = 0.
    pub fn brake() -> TimeAction {
        TimeAction::reflection(0, 1).expect("nonzero order")
    }
}

/// Linear operator on trig coefficients realizing the loop action of one
/// group element: block-diagonal across modes.
#[derive(Debug, Clone)]
pub struct CoefficientAction {
    n: usize,
    d: usize,
    k_max: usize,
    /// `nd x nd` matrix combining `rho` and `sigma^{-1}`.
    spatial: DMatrix<f64>,
    /// Per mode `k`: 2x2 mixing `[caa, cab, cba, cbb]` of the (cos, sin) pair.
    time_blocks: Vec<[f64; 4]>,
}

impl CoefficientAction {
    pub fn apply(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let nd = self.n * self.d;
        let mut out = DVector::zeros(coeffs.len());
        let s = &self.spatial;

        let a0 = coeffs.rows(0, nd);
        out.rows_mut(0, nd).copy_from(&(s * a0));

        for k in 1..=self.k_max {
            let [caa, cab, cba, cbb] = self.time_blocks[k - 1];
            let ia = (2 * k - 1) * nd;
            let ib = 2 * k * nd;
            let sa = s * coeffs.rows(ia, nd);
            let sb = s * coeffs.rows(ib, nd);
            out.rows_mut(ia, nd).copy_from(&(&sa * caa + &sb * cab));
            out.rows_mut(ib, nd).copy_from(&(&sa * cba + &sb * cbb));
        }
        out
    }

    /// The full dense matrix; mostly useful in tests.
    pub fn dense(&self) -> DMatrix<f64> {
        let nd = self.n * self.d;
        let dim = (2 * self.k_max + 1) * nd;
        let mut out = DMatrix::zeros(dim, dim);
        out.view_mut((0, 0), (nd, nd)).copy_from(&self.spatial);
        for k in 1..=self.k_max {
            let [caa, cab, cba, cbb] = self.time_blocks[k - 1];
            let ia = (2 * k - 1) * nd;
            let ib = 2 * k * nd;
            out.view_mut((ia, ia), (nd, nd)).copy_from(&(&self.spatial * caa));
            out.view_mut((ia, ib), (nd, nd)).copy_from(&(&self.spatial * cab));
            out.view_mut((ib, ia), (nd, nd)).copy_from(&(&self.spatial * cba));
            out.view_mut((ib, ib), (nd, nd)).copy_from(&(&self.spatial * cbb));
        }
        out
    }
}

/// The coefficient-space operator `L_g` with `coeffs(g . x) = L_g coeffs(x)`.
///
/// Time rotation by fraction `f` mixes the order-`k` (cos, sin) pair by a
/// 2x2 rotation of angle `2 pi k f`; time reflection mixes it by a 2x2
/// reflection (negating sines for the axis through zero); `rho` and
/// `sigma` act blockwise on body and coordinate indices.
pub fn coefficient_action(g: &GroupElement, spec: &ProblemSpec) -> Result<CoefficientAction> {
    if g.dimension() != spec.d() || g.body_count() != spec.n() {
        return Err(Error::DimensionMismatch {
            expected: spec.n() * spec.d(),
            got: g.body_count() * g.dimension(),
        });
    }
    Ok(coefficient_action_unchecked(g, spec.n(), spec.d(), spec.trig_modes()))
}

fn coefficient_action_unchecked(
    g: &GroupElement,
    n: usize,
    d: usize,
    k_max: usize,
) -> CoefficientAction {
    let nd = n * d;
    let mut spatial = DMatrix::zeros(nd, nd);
    let inv = g.sigma.inverse();
    for i in 0..n {
        let src = inv.apply(i);
        for a in 0..d {
            for b in 0..d {
                spatial[(i * d + a, src * d + b)] = g.rho[(a, b)];
            }
        }
    }

    let mut time_blocks = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let frac = normalize_fraction(g.tau.fraction() * Ratio::from_integer(k as i64));
        let angle = 2.0 * PI * ratio_to_f64(frac);
        let (s, c) = angle.sin_cos();
        let block = match g.tau {
            TimeAction::Rotation(_) => [c, -s, s, c],
            TimeAction::Reflection(_) => [c, s, s, -c],
        };
        time_blocks.push(block);
    }

    CoefficientAction {
        n,
        d,
        k_max,
        spatial,
        time_blocks,
    }
}

/// Apply a group element to a whole loop via its coefficient operator.
pub fn apply_element_to_loop(g: &GroupElement, lp: &TrigLoop, spec: &ProblemSpec) -> Result<TrigLoop> {
    let op = coefficient_action(g, spec)?;
    TrigLoop::new(
        lp.n(),
        lp.d(),
        lp.k_max(),
        lp.period(),
        op.apply(lp.coeffs()),
    )
}

/// Orthogonal projector onto the equivariant coefficient subspace together
/// with an orthonormal basis of its range.
#[derive(Debug, Clone)]
pub struct ReducedSpace {
    n: usize,
    d: usize,
    k_max: usize,
    period: f64,
    /// `D x r` with orthonormal columns spanning the equivariant subspace.
    basis: DMatrix<f64>,
    proj_mode0: DMatrix<f64>,
    proj_modes: Vec<DMatrix<f64>>,
}

/// Group-average projector `P = (1/|G|) sum_g L_g`, assembled per mode block
/// and optionally intersected with the zero-center-of-mass subspace.
///
/// The basis is obtained from the eigenvectors of each symmetric idempotent
/// block; range membership is decided by eigenvalues above 1/2 (they cluster
/// at 0 and 1 up to closure roundoff).
pub fn equivariance_projector(spec: &ProblemSpec, fix_center_of_mass: bool) -> ReducedSpace {
    let n = spec.n();
    let d = spec.d();
    let nd = n * d;
    let k_max = spec.trig_modes();
    let group = spec.group();
    let order = group.order() as f64;

    let ops: Vec<CoefficientAction> = group
        .elements()
        .iter()
        .map(|g| coefficient_action_unchecked(g, n, d, k_max))
        .collect();

    let com = if fix_center_of_mass {
        Some(com_projector(spec))
    } else {
        None
    };

    let mut proj_mode0 = DMatrix::zeros(nd, nd);
    for op in &ops {
        proj_mode0 += &op.spatial;
    }
    proj_mode0 /= order;
    if let Some(c) = &com {
        proj_mode0 = c * proj_mode0;
    }
    symmetrize(&mut proj_mode0);

    let mut proj_modes = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut p = DMatrix::zeros(2 * nd, 2 * nd);
        for op in &ops {
            let [caa, cab, cba, cbb] = op.time_blocks[k - 1];
            let s = &op.spatial;
            for r in 0..nd {
                for c in 0..nd {
                    let v = s[(r, c)];
                    p[(r, c)] += caa * v;
                    p[(r, nd + c)] += cab * v;
                    p[(nd + r, c)] += cba * v;
                    p[(nd + r, nd + c)] += cbb * v;
                }
            }
        }
        p /= order;
        if let Some(c) = &com {
            let mut c2 = DMatrix::zeros(2 * nd, 2 * nd);
            c2.view_mut((0, 0), (nd, nd)).copy_from(c);
            c2.view_mut((nd, nd), (nd, nd)).copy_from(c);
            p = c2 * p;
        }
        symmetrize(&mut p);
        proj_modes.push(p);
    }

    // Range basis, mode block by mode block.
    let dim = (2 * k_max + 1) * nd;
    let mut columns: Vec<DVector<f64>> = Vec::new();
    for v in block_range_basis(&proj_mode0) {
        let mut col = DVector::zeros(dim);
        col.rows_mut(0, nd).copy_from(&v);
        columns.push(col);
    }
    for (k, p) in proj_modes.iter().enumerate() {
        let ia = (2 * (k + 1) - 1) * nd;
        let ib = 2 * (k + 1) * nd;
        for v in block_range_basis(p) {
            let mut col = DVector::zeros(dim);
            col.rows_mut(ia, nd).copy_from(&v.rows(0, nd));
            col.rows_mut(ib, nd).copy_from(&v.rows(nd, nd));
            columns.push(col);
        }
    }
    let mut basis = DMatrix::zeros(dim, columns.len());
    for (j, col) in columns.iter().enumerate() {
        basis.set_column(j, col);
    }

    ReducedSpace {
        n,
        d,
        k_max,
        period: spec.period(),
        basis,
        proj_mode0,
        proj_modes,
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Projector onto `sum_i m_i v_i = 0`, acting per coordinate.
fn com_projector(spec: &ProblemSpec) -> DMatrix<f64> {
    let n = spec.n();
    let d = spec.d();
    let nd = n * d;
    let m2: f64 = spec.masses().iter().map(|m| m * m).sum();
    let mut c = DMatrix::identity(nd, nd);
    for i in 0..n {
        for j in 0..n {
            let w = spec.mass(i) * spec.mass(j) / m2;
            for a in 0..d {
                c[(i * d + a, j * d + a)] -= w;
            }
        }
    }
    c
}

/// Orthonormal eigenvectors of a symmetric idempotent block with eigenvalue
/// above 1/2, in a deterministic order.
fn block_range_basis(p: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let eig = p.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut out = Vec::new();
    for &i in &order {
        let lambda = eig.eigenvalues[i];
        if lambda > 0.5 {
            debug_assert!((lambda - 1.0).abs() < 1e-8, "projector eigenvalue {lambda}");
            out.push(eig.eigenvectors.column(i).into_owned());
        }
    }
    out
}

impl ReducedSpace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn full_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// `B z`, the full coefficient vector of a reduced point.
    pub fn expand(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.basis * z
    }

    /// `B^T v`, the reduced coordinates of (the projection of) `v`.
    pub fn reduce(&self, v: &DVector<f64>) -> DVector<f64> {
        self.basis.transpose() * v
    }

    pub fn loop_from(&self, z: &DVector<f64>) -> TrigLoop {
        TrigLoop::new(self.n, self.d, self.k_max, self.period, self.expand(z))
            .expect("basis dimensions are consistent")
    }

    /// Apply the projector blockwise.
    pub fn apply_projector(&self, v: &DVector<f64>) -> DVector<f64> {
        let nd = self.n * self.d;
        let mut out = DVector::zeros(v.len());
        out.rows_mut(0, nd)
            .copy_from(&(&self.proj_mode0 * v.rows(0, nd)));
        for k in 1..=self.k_max {
            let ia = (2 * k - 1) * nd;
            let pair = {
                let mut pair = DVector::zeros(2 * nd);
                pair.rows_mut(0, nd).copy_from(&v.rows(ia, nd));
                pair.rows_mut(nd, nd).copy_from(&v.rows(ia + nd, nd));
                pair
            };
            let mapped = &self.proj_modes[k - 1] * pair;
            out.rows_mut(ia, 2 * nd).copy_from(&mapped);
        }
        out
    }

    /// Dense projector matrix, mostly for tests.
    pub fn projector_dense(&self) -> DMatrix<f64> {
        let nd = self.n * self.d;
        let dim = self.full_dim();
        let mut p = DMatrix::zeros(dim, dim);
        p.view_mut((0, 0), (nd, nd)).copy_from(&self.proj_mode0);
        for k in 1..=self.k_max {
            let ia = (2 * k - 1) * nd;
            p.view_mut((ia, ia), (2 * nd, 2 * nd))
                .copy_from(&self.proj_modes[k - 1]);
        }
        p
    }
}

/// Result of unfolding a fundamental path to a full-period loop.
#[derive(Debug, Clone)]
pub struct Unfolded {
    pub trig_loop: TrigLoop,
    /// Largest discontinuity across segment joints before fitting.
    pub joint_mismatch: f64,
    /// Largest pointwise deviation of the fitted loop from the concatenation.
    pub fit_residual: f64,
}

/// Position of the symmetrized full-period trajectory at time `t`, evaluated
/// through the coset representative of segment `k`.
fn eval_segment(
    path: &FundamentalPath,
    group: &SymmetryGroup,
    segment: usize,
    t: f64,
) -> DMatrix<f64> {
    let rep = group.coset_rep(segment);
    let period = group.period();
    let mut s = rep.tau.inverse_apply(t, period);
    // Map into the fundamental domain, tolerating roundoff at the edges.
    if s > PI {
        if s > period - 1e-9 {
            s = 0.0;
        } else {
            s = s.min(PI);
        }
    }
    let y = path.position(s);
    let inv = rep.sigma.inverse();
    let n = path.n();
    let d = path.d();
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        let src = inv.apply(i);
        for a in 0..d {
            let mut v = 0.0;
            for b in 0..d {
                v += rep.rho[(a, b)] * y[(src, b)];
            }
            out[(i, a)] = v;
        }
    }
    out
}

const UNFOLD_JOINT_TOL: f64 = 1e-8;

/// Unfold a fundamental path to the full period: concatenate the coset
/// translates segment by segment, then fit the truncated trig basis by
/// sampled least squares and project onto the equivariant subspace.
pub fn unfold(path: &FundamentalPath, spec: &ProblemSpec) -> Result<Unfolded> {
    let group = spec.group();
    let l = group.quotient_order();
    let n = spec.n();
    let d = spec.d();
    if path.n() != n || path.d() != d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: path.n() * path.d(),
        });
    }
    let period = group.period();

    // Continuity across all joints, including the wrap at t = 0 (= T).
    let mut joint_mismatch = 0.0_f64;
    for k in 0..l {
        let t = k as f64 * PI;
        let left_seg = (k + l - 1) % l;
        let t_left = if k == 0 { period } else { t };
        let left = eval_segment(path, group, left_seg, t_left);
        let right = eval_segment(path, group, k, t);
        joint_mismatch = joint_mismatch.max((left - right).norm());
    }
    if joint_mismatch > UNFOLD_JOINT_TOL {
        return Err(Error::DiscontinuousUnfold {
            mismatch: joint_mismatch,
        });
    }

    // Sampled least-squares fit of the concatenation.
    let k_max = spec.trig_modes();
    let modes = 2 * k_max + 1;
    let per_segment = (16 * modes).div_ceil(l).max(8);
    let samples = l * per_segment;
    let omega = 2.0 * PI / period;
    let mut design = DMatrix::zeros(samples, modes);
    let mut rhs = DMatrix::zeros(samples, n * d);
    let mut times = Vec::with_capacity(samples);
    for seg in 0..l {
        for s in 0..per_segment {
            let row = seg * per_segment + s;
            let t = seg as f64 * PI + (s as f64 + 0.5) * PI / per_segment as f64;
            times.push((row, seg, t));
            let basis = trig_basis(k_max, omega, t);
            for (m, &phi) in basis.iter().enumerate() {
                design[(row, m)] = phi;
            }
            let x = eval_segment(path, group, seg, t);
            for i in 0..n {
                for c in 0..d {
                    rhs[(row, i * d + c)] = x[(i, c)];
                }
            }
        }
    }
    let fitted = fit_least_squares(&design, &rhs);

    // Repack (modes x nd) into the flat mode-major layout and average over
    // the group so the result is equivariant by construction.
    let mut coeffs = DVector::zeros(modes * n * d);
    for m in 0..modes {
        for i in 0..n {
            for c in 0..d {
                coeffs[(m * n + i) * d + c] = fitted[(m, i * d + c)];
            }
        }
    }
    let rs = equivariance_projector(spec, false);
    let coeffs = rs.apply_projector(&coeffs);
    let lp = TrigLoop::new(n, d, k_max, period, coeffs)?;

    let mut fit_residual = 0.0_f64;
    for &(_, seg, t) in &times {
        let x = lp.position(t);
        let y = eval_segment(path, group, seg, t);
        fit_residual = fit_residual.max((x - y).norm());
    }

    Ok(Unfolded {
        trig_loop: lp,
        joint_mismatch,
        fit_residual,
    })
}

/// Max residual of the defining relation `(g . x)(t) = x(t)` over the group
/// and 256 sample times, normalized by the largest configuration norm.
pub fn check_equivariance(lp: &TrigLoop, spec: &ProblemSpec) -> f64 {
    let group = spec.group();
    let samples = 256;
    let period = lp.period();
    let mut scale = 0.0_f64;
    let mut residual = 0.0_f64;
    let positions: Vec<DMatrix<f64>> = (0..samples)
        .map(|q| lp.position(q as f64 * period / samples as f64))
        .collect();
    for x in &positions {
        scale = scale.max(x.norm());
    }
    for g in group.elements() {
        if g.is_identity(RHO_MATCH_TOL) {
            continue;
        }
        let inv_sigma = g.sigma.inverse();
        for (q, x) in positions.iter().enumerate() {
            let t = q as f64 * period / samples as f64;
            let s = g.tau.inverse_apply(t, period);
            let y = lp.position(s);
            for i in 0..lp.n() {
                let src = inv_sigma.apply(i);
                for a in 0..lp.d() {
                    let mut v = 0.0;
                    for b in 0..lp.d() {
                        v += g.rho[(a, b)] * y[(src, b)];
                    }
                    residual = residual.max((v - x[(i, a)]).abs());
                }
            }
        }
    }
    if scale == 0.0 {
        0.0
    } else {
        residual / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::restrict;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn rotation_matrix(theta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()])
    }

    /// Fig.-1-style group: central inversion with a half-period time shift.
    fn antisymmetric_group(n: usize) -> SymmetryGroup {
        let gen = GroupElement::new(
            -DMatrix::identity(2, 2),
            Permutation::identity(n),
            TimeAction::rotation(1, 2).unwrap(),
        );
        SymmetryGroup::build(n, 2, vec![gen], 64).unwrap()
    }

    fn spec_with_group(group: SymmetryGroup, k: usize) -> ProblemSpec {
        let n = group.n();
        ProblemSpec::new(vec![1.0; n], group.d(), group, k, k, 64, 1e-6).unwrap()
    }

    #[test]
    fn time_action_composition_table() {
        let rot = |n, d| TimeAction::rotation(n, d).unwrap();
        let refl = |n, d| TimeAction::reflection(n, d).unwrap();
        assert_eq!(rot(1, 3).compose(&rot(1, 3)), rot(2, 3));
        assert_eq!(rot(2, 3).compose(&rot(2, 3)), rot(1, 3));
        assert_eq!(rot(1, 4).compose(&refl(0, 1)), refl(1, 4));
        assert_eq!(refl(0, 1).compose(&rot(1, 4)), refl(3, 4));
        assert_eq!(refl(1, 4).compose(&refl(1, 4)), rot(0, 1));
        assert!(refl(1, 4).compose(&refl(1, 4)).is_identity());
        assert_eq!(rot(1, 3).inverse(), rot(2, 3));
        assert_eq!(refl(1, 3).inverse(), refl(1, 3));
    }

    #[test]
    fn time_action_application() {
        let t = 1.0;
        let period = 2.0 * PI;
        let rot = TimeAction::rotation(1, 2).unwrap();
        assert_relative_eq!(rot.apply(t, period), t + PI);
        let refl = TimeAction::reflection(0, 1).unwrap();
        assert_relative_eq!(refl.apply(t, period), period - t);
        assert_relative_eq!(rot.inverse_apply(rot.apply(t, period), period), t, epsilon = 1e-12);
    }

    #[test]
    fn empty_generators_give_trivial_group() {
        let g = SymmetryGroup::build(3, 2, vec![], 16).unwrap();
        assert_eq!(g.order(), 1);
        assert_eq!(g.quotient_order(), 1);
        assert_relative_eq!(g.period(), PI);
    }

    #[test]
    fn antisymmetric_group_has_order_two() {
        let g = antisymmetric_group(3);
        assert_eq!(g.order(), 2);
        assert_eq!(g.kernel_order(), 1);
        assert_eq!(g.quotient_order(), 2);
        assert_relative_eq!(g.period(), 2.0 * PI);
        assert!(g.coset_rep(0).is_identity(1e-12));
        assert_eq!(g.coset_rep(1).tau, TimeAction::rotation(1, 2).unwrap());
    }

    #[test]
    fn nontrivial_kernel_group() {
        // Five-fold spatial rotation with two rings of bodies in the kernel,
        // plus the antisymmetry generator.
        let kappa = GroupElement::new(
            rotation_matrix(2.0 * PI / 5.0),
            Permutation::from_one_line(&[2, 3, 4, 5, 1, 7, 8, 9, 10, 6]).unwrap(),
            TimeAction::identity(),
        );
        let r = GroupElement::new(
            -DMatrix::identity(2, 2),
            Permutation::identity(10),
            TimeAction::rotation(1, 2).unwrap(),
        );
        let g = SymmetryGroup::build(10, 2, vec![kappa, r], 64).unwrap();
        assert_eq!(g.kernel_order(), 5);
        assert_eq!(g.quotient_order(), 2);
        assert_eq!(g.order(), 10);
    }

    #[test]
    fn dihedral_group_builds_with_reflection_reps() {
        // Choreography-with-reflection generators (three bodies).
        let r = GroupElement::new(
            DMatrix::identity(2, 2),
            Permutation::from_one_line(&[2, 3, 1]).unwrap(),
            presets::dihedral_rotation(6),
        );
        let s = GroupElement::new(
            -DMatrix::identity(2, 2),
            Permutation::from_one_line(&[1, 3, 2]).unwrap(),
            presets::dihedral_reflection(),
        );
        let g = SymmetryGroup::build(3, 2, vec![r, s], 64).unwrap();
        assert_eq!(g.order(), 6);
        assert_eq!(g.quotient_order(), 6);
        // Odd segments are reached by reflections, even ones by rotations.
        for k in 0..6 {
            let rep = g.coset_rep(k);
            assert_eq!(rep.tau.is_reflection(), k % 2 == 1, "segment {k}");
        }
    }

    #[test]
    fn brake_group_is_accepted() {
        let r = GroupElement::new(
            DMatrix::identity(2, 2),
            Permutation::identity(2),
            presets::brake(),
        );
        let g = SymmetryGroup::build(2, 2, vec![r], 16).unwrap();
        assert_eq!(g.order(), 2);
        assert_eq!(g.quotient_order(), 2);
        assert!(g.coset_rep(1).tau.is_reflection());
    }

    #[test]
    fn misaligned_reflection_axes_are_rejected() {
        // A reflection whose axis does not pass through a segment boundary
        // cannot tile the period from [0, pi].
        let r = GroupElement::new(
            DMatrix::identity(2, 2),
            Permutation::identity(2),
            TimeAction::reflection(1, 4).unwrap(),
        );
        let err = SymmetryGroup::build(2, 2, vec![r], 16).unwrap_err();
        assert!(matches!(err, Error::InconsistentTau { .. }));
    }

    #[test]
    fn non_orthogonal_rho_is_rejected() {
        let g = GroupElement::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]),
            Permutation::identity(2),
            TimeAction::identity(),
        );
        assert!(matches!(
            SymmetryGroup::build(2, 2, vec![g], 16),
            Err(Error::NonOrthogonalRho { .. })
        ));
    }

    #[test]
    fn infinite_group_hits_cap() {
        // An irrational-angle rotation never closes.
        let g = GroupElement::new(
            rotation_matrix(1.0),
            Permutation::identity(2),
            TimeAction::identity(),
        );
        assert!(matches!(
            SymmetryGroup::build(2, 2, vec![g], 64),
            Err(Error::GroupNotClosed { cap: 64 })
        ));
    }

    #[test]
    fn group_axioms_hold_numerically() {
        let g = antisymmetric_group(2);
        for a in g.elements() {
            for b in g.elements() {
                let prod = a.compose(b);
                assert!(find_element(g.elements(), &prod).is_some());
            }
            assert!(find_element(g.elements(), &a.inverse()).is_some());
        }
    }

    #[test]
    fn configuration_action_examples() {
        let c = Configuration::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]));
        let id = GroupElement::identity(2, 2);
        assert_eq!(act_on_configuration(&id, &c).unwrap(), c);

        let flip = GroupElement::new(
            -DMatrix::identity(2, 2),
            Permutation::identity(2),
            TimeAction::identity(),
        );
        let flipped = act_on_configuration(&flip, &c).unwrap();
        assert_relative_eq!(flipped.positions()[(0, 0)], -1.0);
        assert_relative_eq!(flipped.positions()[(1, 0)], 1.0);

        let swap = GroupElement::new(
            DMatrix::identity(2, 2),
            Permutation::from_one_line(&[2, 1]).unwrap(),
            TimeAction::identity(),
        );
        let c2 = Configuration::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
        let swapped = act_on_configuration(&swap, &c2).unwrap();
        assert_relative_eq!(swapped.positions()[(0, 1)], 1.0);
        assert_relative_eq!(swapped.positions()[(1, 0)], 1.0);
    }

    #[test]
    fn coefficient_action_identity_and_half_turn() {
        let spec = spec_with_group(antisymmetric_group(2), 3);
        let id_op = coefficient_action(&GroupElement::identity(2, 2), &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = DVector::from_fn(spec_dim(&spec), |_, _| rng.gen_range(-1.0..1.0));
        assert_relative_eq!((id_op.apply(&v) - &v).norm(), 0.0, epsilon = 1e-14);

        // Pure half-period time rotation sends the k = 1 pair (a, b) to (-a, -b).
        let shift = GroupElement::new(
            DMatrix::identity(2, 2),
            Permutation::identity(2),
            TimeAction::rotation(1, 2).unwrap(),
        );
        let op = coefficient_action(&shift, &spec).unwrap();
        let w = op.apply(&v);
        let nd = 4;
        for idx in 0..2 * nd {
            assert_relative_eq!(w[nd + idx], -v[nd + idx], epsilon = 1e-14);
        }
    }

    fn spec_dim(spec: &ProblemSpec) -> usize {
        (2 * spec.trig_modes() + 1) * spec.n() * spec.d()
    }

    #[test]
    fn projector_is_idempotent_and_commutes_with_actions() {
        let spec = spec_with_group(antisymmetric_group(3), 4);
        let rs = equivariance_projector(&spec, true);
        let p = rs.projector_dense();
        let p2 = &p * &p;
        assert!((p2 - &p).amax() < 1e-10);
        assert!((p.transpose() - &p).amax() < 1e-12);
        for g in spec.group().elements() {
            let l = coefficient_action(g, &spec).unwrap().dense();
            assert!((&p * &l - &p).amax() < 1e-10, "P L_g = P");
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..100 {
            let v = DVector::from_fn(spec_dim(&spec), |_, _| rng.gen_range(-1.0..1.0));
            let pv = rs.apply_projector(&v);
            let ppv = rs.apply_projector(&pv);
            assert!((ppv - pv).amax() < 1e-10);
        }
    }

    #[test]
    fn constant_mode_vanishes_under_antisymmetry() {
        // Averaging over the central inversion with time shift forces a0 = -a0.
        let spec = spec_with_group(antisymmetric_group(3), 4);
        let rs = equivariance_projector(&spec, false);
        let nd = 6;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v = DVector::from_fn(spec_dim(&spec), |_, _| rng.gen_range(-1.0..1.0));
        let pv = rs.apply_projector(&v);
        assert!(pv.rows(0, nd).amax() < 1e-14, "constant mode survives");
        // Even modes vanish too, odd modes survive.
        assert!(pv.rows(3 * nd, 2 * nd).amax() < 1e-14, "k = 2 survives");
        assert!(pv.rows(nd, 2 * nd).amax() > 1e-3, "k = 1 killed");
    }

    #[test]
    fn trivial_group_projector_is_identity() {
        let spec = spec_with_group(SymmetryGroup::trivial(2, 2), 3);
        let rs = equivariance_projector(&spec, false);
        assert_eq!(rs.dim(), rs.full_dim());
        let p = rs.projector_dense();
        assert!((p - DMatrix::identity(rs.full_dim(), rs.full_dim())).amax() < 1e-12);
    }

    #[test]
    fn basis_loops_are_equivariant() {
        let spec = spec_with_group(antisymmetric_group(3), 5);
        let rs = equivariance_projector(&spec, true);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let z = DVector::from_fn(rs.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let lp = rs.loop_from(&z);
            assert!(check_equivariance(&lp, &spec) < 1e-10);
        }
    }

    #[test]
    fn perturbed_coefficient_breaks_equivariance() {
        let spec = spec_with_group(antisymmetric_group(3), 5);
        let rs = equivariance_projector(&spec, true);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = DVector::from_fn(rs.dim(), |_, _| rng.gen_range(-1.0..1.0));
        let mut lp = rs.loop_from(&z);
        let idx = lp.flat_index(0, 0, 0);
        lp.coeffs_mut()[idx] += 0.1;
        assert!(check_equivariance(&lp, &spec) > 1e-3);
    }

    #[test]
    fn unfold_round_trips_representable_paths() {
        // Antisymmetric class: odd sine modes are shared by both forms.
        let group = antisymmetric_group(2);
        let spec = ProblemSpec::new(vec![1.0, 1.0], 2, group, 6, 6, 64, 1e-6).unwrap();
        let mut path = FundamentalPath::zeros(2, 2, 6);
        let block1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, -1.0, -0.4]);
        let block3 = DMatrix::from_row_slice(2, 2, &[0.2, -0.1, -0.2, 0.1]);
        path.set_mode_block(2, &block1);
        path.set_mode_block(4, &block3);
        let unfolded = unfold(&path, &spec).unwrap();
        assert!(unfolded.joint_mismatch < 1e-12);
        assert!(unfolded.fit_residual < 1e-10);
        assert!(check_equivariance(&unfolded.trig_loop, &spec) < 1e-10);
        let back = restrict(&unfolded.trig_loop, &spec);
        assert!((back.coeffs() - path.coeffs()).amax() < 1e-8);
    }

    #[test]
    fn unfold_rejects_discontinuous_paths() {
        let group = antisymmetric_group(2);
        let spec = ProblemSpec::new(vec![1.0, 1.0], 2, group, 6, 6, 64, 1e-6).unwrap();
        let mut path = FundamentalPath::zeros(2, 2, 6);
        // Antisymmetry requires x1 = -x0; violate it.
        let x0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 0.0]);
        path.set_mode_block(0, &x0);
        path.set_mode_block(1, &x0);
        assert!(matches!(
            unfold(&path, &spec),
            Err(Error::DiscontinuousUnfold { .. })
        ));
    }

    #[test]
    fn random_admissible_paths_unfold_equivariantly() {
        let spec = spec_with_group(antisymmetric_group(3), 6);
        let rs = equivariance_projector(&spec, true);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let z = DVector::from_fn(rs.dim(), |_, _| rng.gen_range(-1.0..1.0));
            let lp = rs.loop_from(&z);
            let path = restrict(&lp, &spec);
            let unfolded = unfold(&path, &spec).unwrap();
            assert!(check_equivariance(&unfolded.trig_loop, &spec) < 1e-8);
        }
    }

    #[test]
    fn equivariance_of_trivial_group_is_zero() {
        let spec = spec_with_group(SymmetryGroup::trivial(2, 2), 3);
        let mut lp = TrigLoop::zeros(2, 2, 3, PI);
        lp.coeffs_mut()[0] = 1.0;
        assert_eq!(check_equivariance(&lp, &spec), 0.0);
    }
}
