//! Registers seeded synthetic pairs and prints accuracy per case.
//!
//! cargo run --release --example sweep -- [seeds] [regular|adaptive|both]

use meshreg::metrics::mutual_distance_stats;
use meshreg::optimizer::{register_detailed, Placement, RegistrationConfig};
use meshreg::synth::{synth_pair, ShapeFamily, SynthConfig};
use meshreg::Exec;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let which = args.get(2).map(String::as_str).unwrap_or("both");
    let placements: Vec<Placement> = match which {
        "regular" => vec![Placement::Regular],
        "adaptive" => vec![Placement::Adaptive],
        _ => vec![Placement::Regular, Placement::Adaptive],
    };
    let cases = [
        ("translate", SynthConfig { peak: 0.0, translation: [3.0, 0.0], ..Default::default() }),
        ("bend", SynthConfig::default()),
        ("occlude", SynthConfig { occlusion: 0.15, ..Default::default() }),
    ];
    println!("case,family,seed,placement,before_mean,mean,max,variance,iters,work,secs,stops");
    for (name, base) in &cases {
        for family in [ShapeFamily::Ellipse, ShapeFamily::Star, ShapeFamily::Polyline] {
            for seed in 0..seeds {
                let cfg = SynthConfig { family, ..base.clone() };
                let pair = synth_pair(&cfg, seed).unwrap();
                let before = mutual_distance_stats(&pair.source, &pair.target).unwrap();
                for &placement in &placements {
                    let rc = RegistrationConfig { placement, exec: Exec::Sequential, ..Default::default() };
                    match register_detailed(pair.source.values(), pair.target.values(), &rc) {
                        Ok(r) => {
                            let m = r.report.metrics;
                            println!(
                                "{name},{family:?},{seed},{placement:?},{:.3},{:.3},{:.3},{:.3},{},{},{:.2},{}",
                                before.mean,
                                m.mean,
                                m.max,
                                m.variance,
                                r.report.total_iterations(),
                                r.report.gradient_pixel_work,
                                r.report.wall_time.as_secs_f64(),
                                r.report.levels.iter().map(|l| format!("{:?}/{}", l.stop, l.iterations)).collect::<Vec<_>>().join(" ")
                            );
                        }
                        Err(e) => println!("{name},{family:?},{seed},{placement:?},error,{e}"),
                    }
                }
            }
        }
    }
}
