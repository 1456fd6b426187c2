//! Hyperparameter probe on the hard part of the task: distinguishing the
//! sign of the winding for c = 1 textures under full augmentation.
//! Run with QTOPO_PROGRESS=1 to stream per-epoch metrics.

use qtopo::nn::{self, ActKind, NetConfig, Network};
use qtopo::rng;
use qtopo::spin::{self, texture, AugmentOpts};
use rand::Rng;

fn build_samples(n_per_sign: usize, tag: u64) -> Vec<(qtopo::spin::SpinTexture, usize)> {
    let mut out = Vec::new();
    for sign in [1.0f64, -1.0] {
        for k in 0..n_per_sign {
            let mut rng = rng::stream(0xBEEF ^ tag, &[sign.to_bits(), k as u64]);
            let m = sign * rng.gen_range(0.1..1.9);
            let t = texture(1, m, 40).unwrap();
            let t = spin::augment(&t, rng.gen(), AugmentOpts::ALL).unwrap();
            let class = nn::class_index(t.meta.label);
            out.push((t, class));
        }
    }
    out
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(3e-3);
    let gain: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let batch: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(8);
    let epochs: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(100);
    let act = args
        .get(5)
        .and_then(|s| ActKind::parse(s))
        .unwrap_or(ActKind::Arctan);
    let seed: u64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(42);
    let w0: usize = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(10);
    let w1: usize = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(20);
    let w2: usize = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(40);

    let train = build_samples(300, 1);
    let val = build_samples(80, 2);
    let mut cfg = NetConfig::qcnn(seed);
    cfg.lr = lr;
    cfg.first_layer_gain = gain;
    cfg.batch_size = batch;
    cfg.activation = act;
    cfg.widths = [w0, w1, w2];
    let mut net = Network::build(&cfg);
    let encode = nn::encoder_for(cfg.arch);

    println!(
        "lr={lr} gain={gain} batch={batch} act={} seed={seed}",
        act.name()
    );
    let records = nn::train(&mut net, &train, &val, |s| encode(&s.0), |s| s.1, epochs).unwrap();
    let best = records
        .iter()
        .map(|r| r.val_acc)
        .fold(0.0f64, f64::max);
    let escape = records.iter().find(|r| r.val_acc > 0.9).map(|r| r.epoch);
    println!("best val_acc {best:.3}, first epoch above 0.9: {escape:?}");
}
