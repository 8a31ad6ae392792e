// Convergence study of the fourth benchmark orbit (dev only).
use equistab::action::{el_residual, fit_loop};
use equistab::floquet::{monodromy, IntegrationMode, MonodromyOptions};
use equistab::io::parse_problem;
use equistab::morse::{morse_fundamental, morse_period, EpsZero};
use equistab::optimizer::{multi_start, newton_refine, SolveOptions};
use equistab::symmetry::equivariance_projector;

fn main() {
    let spec = parse_problem(
        &std::fs::read_to_string("crates/equistab/fixtures/lagrange3.json").unwrap(),
    )
    .unwrap();
    let rs = equivariance_projector(&spec, true);
    let opts = SolveOptions {
        base_seed: 2,
        starts: 1,
        tol: 1e-11,
        threads: 1,
        ..Default::default()
    };
    let best = multi_start(&spec, &rs, &opts).best.unwrap();
    let lp = rs.loop_from(&best.z);
    println!(
        "K=24 orbit: action {:.6}, grad {:.2e}, EL(1024) {:.2e}",
        best.report.action_value,
        best.report.gradient_norm,
        el_residual(&lp, &spec, 1024).unwrap()
    );
    for steps in [8192usize, 16384, 32768] {
        let mono = monodromy(&lp, &spec, &MonodromyOptions { steps, ..Default::default() }).unwrap();
        println!("  analytic N={steps}: max {:.6} det {:.1e}", mono.max_modulus, mono.det_residual);
    }
    let mono = monodromy(&lp, &spec, &MonodromyOptions { steps: 16384, mode: IntegrationMode::Shooting, ..Default::default() }).unwrap();
    println!("  shooting N=16384: max {:.6}", mono.max_modulus);
    println!("  multipliers:");
    let mono = monodromy(&lp, &spec, &MonodromyOptions { steps: 16384, ..Default::default() }).unwrap();
    for m in &mono.multipliers {
        println!("    {:+.6} {:+.6}i  |.| {:.6}", m.re, m.im, m.norm());
    }

    // Re-fit at higher truncation and re-refine to probe K-convergence.
    for k in [32usize, 40] {
        let mut pf = equistab::io::ProblemFile::from_spec(&spec);
        pf.trig_modes = k;
        pf.fundamental_modes = k;
        let spec_k = pf.to_spec().unwrap();
        let rs_k = equivariance_projector(&spec_k, true);
        let samples: Vec<(f64, nalgebra::DMatrix<f64>)> = (0..2048)
            .map(|q| {
                let t = q as f64 * spec.period() / 2048.0;
                (t, lp.position(t))
            })
            .collect();
        let fitted = fit_loop(3, 2, k, spec_k.period(), &samples).unwrap();
        let z0 = rs_k.reduce(fitted.coeffs());
        let polish = equistab::optimizer::MinimizeOptions { first_order: false, ..Default::default() };
        let z0 = match equistab::optimizer::minimize(&z0, &rs_k, &spec_k, &polish) {
            Ok((z, _)) => z,
            Err(equistab::Error::MaxIterations { best, .. }) => nalgebra::DVector::from_vec(best.0.clone()),
            Err(e) => panic!("{e}"),
        };
        let (z, rep) = newton_refine(&z0, &rs_k, &spec_k, 1e-11).unwrap();
        let lpk = rs_k.loop_from(&z);
        println!(
            "K={k}: action {:.6}, grad {:.2e}, EL(1024) {:.2e}",
            rep.action_value,
            rep.gradient_norm,
            el_residual(&lpk, &spec_k, 1024).unwrap()
        );
        for steps in [16384usize] {
            let mono = monodromy(&lpk, &spec_k, &MonodromyOptions { steps, ..Default::default() }).unwrap();
            println!("  analytic N={steps}: max {:.6}", mono.max_modulus);
            let mono = monodromy(&lpk, &spec_k, &MonodromyOptions { steps, mode: IntegrationMode::Shooting, ..Default::default() }).unwrap();
            println!("  shooting N={steps}: max {:.6}", mono.max_modulus);
        }
        let mf = morse_fundamental(&z, &rs_k, &spec_k, EpsZero::Auto).unwrap();
        let mp = morse_period(&lpk, &spec_k, 256, EpsZero::Auto).unwrap();
        println!("  morse {}/{}", mf.index, mp.index);
    }
}
