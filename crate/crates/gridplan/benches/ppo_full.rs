//! Full-scale PPO run on each 24x24 layout: the mean score of the last 100
//! episodes must beat the first 100. Run with `cargo bench -p gridplan`.

use std::process::ExitCode;
use std::time::Instant;

use gridplan_core::maps::{generate, Layout};
use gridplan_core::rl::{train, PpoConfig};

fn main() -> ExitCode {
    let config = PpoConfig { episodes: 2000, ..PpoConfig::default() };
    let mut ok = true;
    for layout in Layout::ALL {
        let map = generate(layout, 24);
        let started = Instant::now();
        let (_, curves) = match train(&map, &config, 2024) {
            Ok(r) => r,
            Err(e) => {
                println!("FAIL {}: {e}", map.name());
                ok = false;
                continue;
            }
        };
        let (first, last) = (curves.mean_score_first(100), curves.mean_score_last(100));
        let verdict = if last > first { "PASS" } else { "FAIL" };
        ok &= last > first;
        println!(
            "{verdict} {}: first-100 mean {first:.3}, last-100 mean {last:.3}, success last 100 {:.0}% ({:.1} s)",
            map.name(),
            100.0 * curves.success_rate_last(100),
            started.elapsed().as_secs_f64()
        );
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
