use std::process::ExitCode;
use std::time::Instant;

use vortex_core::acceptance::ALL;

fn main() -> ExitCode {
    let mut failed = Vec::new();
    for check in ALL {
        let t = Instant::now();
        let r = check();
        println!("{r} ({:.1}s)", t.elapsed().as_secs_f64());
        if !r.passed {
            failed.push(r.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: {} of {} criteria passed", ALL.len(), ALL.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
