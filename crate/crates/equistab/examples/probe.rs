// Scratch probe for the classical relative equilibria (dev only).
use equistab::action::{action_fundamental, action_reduced, restrict};
use equistab::floquet::{monodromy, IntegrationMode, MonodromyOptions};
use equistab::morse::{morse_fundamental, morse_period, EpsZero};
use equistab::optimizer::newton_refine;
use equistab::symmetry::{equivariance_projector, GroupElement, Permutation, TimeAction};
use equistab::{ProblemSpec, SymmetryGroup, TrigLoop};
use nalgebra::DMatrix;
use std::f64::consts::PI;

fn antisymmetric_spec(n: usize, k: usize, m: usize) -> ProblemSpec {
    let gen = GroupElement::new(
        -DMatrix::identity(2, 2),
        Permutation::identity(n),
        TimeAction::rotation(1, 2).unwrap(),
    );
    let group = SymmetryGroup::build(n, 2, vec![gen], 64).unwrap();
    ProblemSpec::new(vec![1.0; n], 2, group, k, k, m, 1e-6).unwrap()
}

fn circulating(points: &[(f64, f64)], k_max: usize, period: f64) -> TrigLoop {
    // x_i(t) = R(t) p_i
    let n = points.len();
    let mut lp = TrigLoop::zeros(n, 2, k_max, period);
    for (i, &(px, py)) in points.iter().enumerate() {
        lp.set_coeff(1, i, 0, px);
        lp.set_coeff(1, i, 1, py);
        lp.set_coeff(2, i, 0, -py);
        lp.set_coeff(2, i, 1, px);
    }
    lp
}

fn analyze(name: &str, spec: &ProblemSpec, lp: &TrigLoop) {
    let rs = equivariance_projector(spec, true);
    let z0 = rs.reduce(lp.coeffs());
    let (z, rep) = newton_refine(&z0, &rs, spec, 1e-10).unwrap();
    let lp = rs.loop_from(&z);
    println!("== {name}");
    println!("  action (fund) = {:.6}, grad = {:.3e}", rep.action_value, rep.gradient_norm);
    let path = restrict(&lp, spec);
    let f2 = action_fundamental(&path, spec).unwrap();
    println!("  f2(restrict)  = {:.6}  (vs reduced {:.6})", f2, action_reduced(&z, &rs, spec).unwrap());

    let mf = morse_fundamental(&z, &rs, spec, EpsZero::Auto).unwrap();
    println!("  morse fund: index {}, near-zero {}, eps {:.2e}, low eigs {:?}",
        mf.index, mf.near_zero_count, mf.eps_zero,
        &mf.eigenvalues[..6.min(mf.eigenvalues.len())]);
    for grid in [256usize, 512] {
        let mp = morse_period(&lp, spec, grid, EpsZero::Auto).unwrap();
        println!("  morse period (M={grid}): index {}, near-zero {}, deflated {}+{}, eps {:.2e}, low eigs {:?}",
            mp.index, mp.near_zero_count, mp.deflated_translations, mp.deflated_symmetries, mp.eps_zero,
            &mp.eigenvalues[..6.min(mp.eigenvalues.len())]);
    }
    for steps in [4096usize, 8192] {
        let mono = monodromy(&lp, spec, &MonodromyOptions { steps, ..Default::default() }).unwrap();
        println!("  floquet (N={steps}): max |mult| = {:.4}, det res = {:.2e}, sympl = {:.2e}, pairing = {:.2e}",
            mono.max_modulus, mono.det_residual, mono.symplectic_residual, mono.pairing_residual);
    }
    let mono = monodromy(&lp, spec, &MonodromyOptions { steps: 8192, mode: IntegrationMode::Shooting, ..Default::default() }).unwrap();
    println!("  floquet shooting: max |mult| = {:.4}", mono.max_modulus);
}

fn main() {
    // Lagrange equilateral triangle, omega = 1, side 3^(1/3).
    let r = 3.0_f64.cbrt() / 3.0_f64.sqrt();
    let tri: Vec<(f64, f64)> = (0..3)
        .map(|i| {
            let th = 2.0 * PI * i as f64 / 3.0;
            (r * th.cos(), r * th.sin())
        })
        .collect();
    let spec = antisymmetric_spec(3, 24, 256);
    analyze("lagrange", &spec, &circulating(&tri, 24, 2.0 * PI));
    println!("  closed form fund action = {:.6}", 1.5 * PI * 3.0_f64.powf(2.0 / 3.0));

    // Euler collinear configuration: bodies at -a, 0, a with a = (5/4)^(1/3).
    let a = (5.0_f64 / 4.0).cbrt();
    let line = vec![(-a, 0.0), (0.0, 0.0), (a, 0.0)];
    analyze("euler", &spec, &circulating(&line, 24, 2.0 * PI));
    let k = a * a; // kinetic = a^2 (two bodies at radius a, unit omega)
    let u = 5.0 / (2.0 * a);
    println!("  closed form fund action = {:.6}", PI * (k + u));

    // Kepler circular two-body.
    let s = 2.0_f64.cbrt();
    let pair = vec![(s / 2.0, 0.0), (-s / 2.0, 0.0)];
    let spec2 = antisymmetric_spec(2, 24, 256);
    analyze("kepler", &spec2, &circulating(&pair, 24, 2.0 * PI));
    println!("  closed form full action = {:.6} (fund = {:.6})",
        2.0 * PI * 3.0 * 2.0_f64.powf(-4.0 / 3.0),
        PI * 3.0 * 2.0_f64.powf(-4.0 / 3.0));
}
