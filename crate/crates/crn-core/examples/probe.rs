use crn_core::engine;
use crn_core::protocols::*;
use crn_core::topology::*;
use crn_core::EngineConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let k: usize = args.get(1).map_or(3, |s| s.parse().unwrap());
    let r: usize = args.get(2).map_or(3, |s| s.parse().unwrap());
    let pu_tx: f64 = args.get(3).map_or(3.0, |s| s.parse().unwrap());
    let pu_if: f64 = args.get(4).map_or(6.0, |s| s.parse().unwrap());
    let seeds: u64 = args.get(5).map_or(10, |s| s.parse().unwrap());
    let slots: u64 = args.get(6).map_or(2000, |s| s.parse().unwrap());
    let area: f64 = std::env::var("CRN_AREA").ok().and_then(|v| v.parse().ok()).unwrap_or(18.0);
    let p = DeploymentParams {
        num_sus: 30, num_pus: 4, area_width: area, area_height: area,
        d_s: 4.0, d_i: 8.0, pu_tx_range: pu_tx, pu_if_range: pu_if,
        num_channels: k, num_radios: r, loss_min: 0.1, loss_max: 0.3,
        source: 0, destination: 29,
    };
    let mut cfg = EngineConfig::default();
    if let Ok(mc) = std::env::var("CRN_MC") {
        cfg.max_candidates = mc.parse().unwrap();
    }
    let kinds = [ProtocolKind::Ornc, ProtocolKind::More, ProtocolKind::Exor, ProtocolKind::Single];
    let mut sums = [0.0f64; 4];
    let mut ok = 0u64;
    let s0: u64 = std::env::var("CRN_S0").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    for seed in s0..s0 + seeds {
        let dep = match generate(&p, 1000 + seed) { Ok(d) => d, Err(_) => continue };
        let proc = ChannelProcess::uniform(4, k, 0.3, 5.0, 7 + seed).unwrap();
        ok += 1;
        for (idx, kind) in kinds.iter().enumerate() {
            use std::sync::atomic::Ordering::Relaxed;
            engine::DBG_SRC.store(0, Relaxed);
            engine::DBG_BCASTS.store(0, Relaxed);
            engine::DBG_DST_RX.store(0, Relaxed);
            engine::DBG_DST_INNOV.store(0, Relaxed);
            engine::DBG_DEMANDS.store(0, Relaxed);
            engine::DBG_ZERO_SLOTS.store(0, Relaxed);
            engine::DBG_LASTHOP.store(0, Relaxed);
            engine::DBG_RX_ALL.store(0, Relaxed);
            engine::DBG_STARVED.store(0, Relaxed);
            engine::DBG_RX_INNOV.store(0, Relaxed);
            let m = engine::run(&dep, &proc, &policy_for(*kind), &cfg, slots, 99 + seed).unwrap();
            assert!(m.audit.clean(), "{kind:?} audit {:?}", m.audit);
            sums[idx] += m.throughput;
            if std::env::var("CRN_DEBUG").is_ok() {
                eprintln!(
                    "seed {seed} {kind:?}: dem/slot {:.2} zero {} lasthop {} src_tx/slot {:.3} bcasts/slot {:.3} dst_rx {} dst_innov {} rx {}/{} starved {} thr {:.4}",
                    engine::DBG_DEMANDS.load(Relaxed) as f64 / slots as f64,
                    engine::DBG_ZERO_SLOTS.load(Relaxed),
                    engine::DBG_LASTHOP.load(Relaxed),
                    engine::DBG_SRC.load(Relaxed) as f64 / slots as f64,
                    engine::DBG_BCASTS.load(Relaxed) as f64 / slots as f64,
                    engine::DBG_DST_RX.load(Relaxed),
                    engine::DBG_DST_INNOV.load(Relaxed),
                    engine::DBG_RX_INNOV.load(Relaxed),
                    engine::DBG_RX_ALL.load(Relaxed),
                    engine::DBG_STARVED.load(Relaxed),
                    m.throughput,
                );
            }
        }
    }
    print!("K={k} R={r} pu=({pu_tx},{pu_if}) n={ok}:");
    for (idx, kind) in kinds.iter().enumerate() {
        print!("  {kind:?} {:.4}", sums[idx] / ok as f64);
    }
    println!();
}
