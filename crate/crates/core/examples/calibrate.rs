// Temporary calibration driver (removed before release): measures per-method
// errors, K00 recovery and sweep shape for candidate seeds/epochs.
use soundfield::acoustics::point_source_coeffs;
use soundfield::harness::{radius_sweep, run_experiment, Method};
use soundfield::specfun::ModeIndex;
use soundfield::ExperimentConfig64;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let scenario: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(1);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(300_000);
    let seed: u64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(0);
    let do_sweep: bool = args.get(4).map(|s| s == "sweep").unwrap_or(false);

    let mut config = if scenario == 1 {
        ExperimentConfig64::paper_scenario_1(seed)
    } else {
        ExperimentConfig64::paper_scenario_2(seed)
    };
    config.train.epochs = epochs;
    if let Ok(lr) = std::env::var("CAL_LR") {
        config.train.learning_rate = lr.parse().unwrap();
    }

    let t0 = Instant::now();
    let report = run_experiment(&config).unwrap();
    let dt = t0.elapsed().as_secs_f64();
    print!("scenario {scenario} seed {seed} epochs {epochs} [{dt:.0}s]:");
    for m in &report.methods {
        match m.epsilon_db() {
            Some(e) => print!(" {}={e:.2}", m.method.name()),
            None => print!(" {}=FAILED", m.method.name()),
        }
    }
    // K error on flagged orders
    let exact = point_source_coeffs(config.frequency, &config.medium, &config.source, report.order)
        .unwrap();
    if let Some(merged) = &report.coefficients.field_merged {
        for &u in &report.nulls.flagged_orders() {
            for v in -(u as i64)..=u as i64 {
                let mode = ModeIndex::new(u, v).unwrap();
                let got = merged.get(mode).unwrap();
                let want = exact.get(mode).unwrap();
                print!(" K{}{}err={:.3}", u, v, (got - want).norm() / want.norm());
            }
        }
    }
    if let Some(last) = report.loss_history.last() {
        print!(" ldata={:.2e} lpde={:.2e}", last.data, last.pde);
    }
    println!();

    if do_sweep {
        let radii: Vec<f64> = (0..13).map(|i| 0.02 + 0.005 * i as f64).collect();
        let sweep = radius_sweep(&config, &radii).unwrap();
        print!("sweep:");
        for p in &sweep {
            print!(" {:.3}:{:.1}", p.radius, p.epsilon_db);
        }
        println!();
    }
    let _ = Method::Osma;
}
