use crn_core::engine;
use crn_core::protocols::*;
use crn_core::topology::*;
use crn_core::EngineConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).map_or(1, |s| s.parse().unwrap());
    let lo: f64 = args.get(2).map_or(0.1, |s| s.parse().unwrap());
    let hi: f64 = args.get(3).map_or(0.3, |s| s.parse().unwrap());
    let seeds: u64 = args.get(4).map_or(10, |s| s.parse().unwrap());
    let p = DeploymentParams {
        num_sus: 30, num_pus: 4, area_width: 18.0, area_height: 18.0,
        d_s: 4.0, d_i: 8.0, pu_tx_range: 3.0, pu_if_range: 6.0,
        num_channels: k, num_radios: 3, loss_min: lo, loss_max: hi,
        source: 0, destination: 29,
    };
    let cfg = EngineConfig::default();
    let kinds = [ProtocolKind::Exor, ProtocolKind::Single];
    let mut sums = [0.0f64; 2];
    let mut ok = 0u64;
    for seed in 0..seeds {
        let dep = match generate(&p, 1000 + seed) { Ok(d) => d, Err(_) => continue };
        let proc = ChannelProcess::uniform(4, k, 0.3, 5.0, 7 + seed).unwrap();
        ok += 1;
        for (idx, kind) in kinds.iter().enumerate() {
            let m = engine::run(&dep, &proc, &policy_for(*kind), &cfg, 2000, 99 + seed).unwrap();
            sums[idx] += m.throughput;
        }
    }
    println!("K={k} loss=[{lo},{hi}] n={ok}: Exor {:.4} Single {:.4}", sums[0]/ok as f64, sums[1]/ok as f64);
}
