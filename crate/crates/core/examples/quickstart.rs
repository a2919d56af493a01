//! Minimizes the log-transformed Branin function and prints the outcome.

use blossom::objectives::{log_transform, make_benchmark};
use blossom::{run, BlossomConfig};

fn main() -> blossom::Result<()> {
    let seed = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0);
    let bench = log_transform(&make_benchmark("branin")?)?;
    let cfg = BlossomConfig {
        seed,
        ..BlossomConfig::default()
    };
    let mut f = |x: &[f64]| bench.eval(x);
    let result = run(&mut f, &bench.domain, &cfg)?;
    for s in &result.trace {
        println!(
            "{:>4} {:<22} y={:<12.4e} best={:<12.4e} radius={:?} regret={:?} t={:.1}s",
            s.iteration,
            s.phase.as_str(),
            s.y,
            s.incumbent_y,
            s.region_radius,
            s.regret_estimate,
            s.wall_time_s
        );
    }
    println!(
        "terminated: {} after {} evaluations; recommended {:?} with y = {:e}",
        result.terminated_reason.as_str(),
        result.total_evals,
        result.recommendation,
        result.recommended_y
    );
    Ok(())
}
