// Multi-start survey of a problem file: catalogs distinct critical points
// by action value with their indicators (dev tool).
use equistab::floquet::{monodromy, MonodromyOptions};
use equistab::io::parse_problem;
use equistab::morse::{morse_fundamental, morse_period, EpsZero};
use equistab::optimizer::{multi_start, SolveOptions};
use equistab::symmetry::equivariance_projector;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args.next().expect("usage: scan <problem.json> [starts] [base_seed]");
    let starts: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(40);
    let base_seed: u64 = args.next().map(|s| s.parse().unwrap()).unwrap_or(1);

    let spec = parse_problem(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rs = equivariance_projector(&spec, true);
    println!("reduced dimension {}", rs.dim());

    let opts = SolveOptions {
        base_seed,
        starts,
        tol: 1e-10,
        threads: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        ..Default::default()
    };
    let result = multi_start(&spec, &rs, &opts);

    let mut found: Vec<(f64, u64)> = Vec::new();
    for (seed, outcome) in &result.outcomes {
        if let Some((action, grad)) = outcome {
            if *grad > 1e-8 {
                continue;
            }
            if !found.iter().any(|(a, _)| (a - action).abs() < 1e-4) {
                found.push((*action, *seed));
            }
        }
    }
    found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    println!("distinct critical points:");
    for (action, seed) in &found {
        // Recompute the full indicator set for this seed's orbit.
        let one = SolveOptions {
            base_seed: *seed,
            starts: 1,
            tol: 1e-10,
            threads: 1,
            ..Default::default()
        };
        let best = multi_start(&spec, &rs, &one).best.unwrap();
        let lp = rs.loop_from(&best.z);
        let mf = morse_fundamental(&best.z, &rs, &spec, EpsZero::Auto)
            .map(|m| m.index as i64)
            .unwrap_or(-1);
        let mp = morse_period(&lp, &spec, spec.grid_size(), EpsZero::Auto)
            .map(|m| m.index as i64)
            .unwrap_or(-1);
        let mono = monodromy(&lp, &spec, &MonodromyOptions::default()).unwrap();
        println!(
            "  action {:.4}  seed {:3}  morse {}/{}  max|mult| {:.4}  minsep {:.3}",
            action, seed, mf, mp, mono.max_modulus, best.report.min_separation_seen
        );
    }
}
