use crn_core::engine;
use crn_core::protocols::*;
use crn_core::topology::*;
use crn_core::EngineConfig;
use std::sync::atomic::Ordering::Relaxed;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).map_or(1, |s| s.parse().unwrap());
    let seeds: u64 = args.get(2).map_or(5, |s| s.parse().unwrap());
    let slots: u64 = 2000;
    let p = DeploymentParams {
        num_sus: 30, num_pus: 4, area_width: 18.0, area_height: 18.0,
        d_s: 4.0, d_i: 8.0, pu_tx_range: 3.0, pu_if_range: 6.0,
        num_channels: k, num_radios: 3, loss_min: 0.1, loss_max: 0.3,
        source: 0, destination: 29,
    };
    let cfg = EngineConfig::default();
    for seed in 0..seeds {
        let dep = match generate(&p, 1000 + seed) { Ok(d) => d, Err(_) => continue };
        let proc = ChannelProcess::uniform(4, k, 0.3, 5.0, 7 + seed).unwrap();
        for kind in [ProtocolKind::Exor, ProtocolKind::Single] {
            for a in [&engine::DBG_SRC, &engine::DBG_BCASTS, &engine::DBG_DEMANDS, &engine::DBG_ZERO_SLOTS, &engine::DBG_DST_RX] {
                a.store(0, Relaxed);
            }
            let m = engine::run(&dep, &proc, &policy_for(kind), &cfg, slots, 99 + seed).unwrap();
            println!(
                "seed {seed} {kind:?}: demands/slot {:.2} bcasts/slot {:.3} src/slot {:.3} zero_slots {} thr {:.4}",
                engine::DBG_DEMANDS.load(Relaxed) as f64 / slots as f64,
                engine::DBG_BCASTS.load(Relaxed) as f64 / slots as f64,
                engine::DBG_SRC.load(Relaxed) as f64 / slots as f64,
                engine::DBG_ZERO_SLOTS.load(Relaxed),
                m.throughput,
            );
        }
    }
}
