//! Micro-probes: (a) overfit capacity on a tiny signed set, (b) sign
//! learning without the rotation augmentation.

use qtopo::nn::{self, NetConfig, Network};
use qtopo::rng;
use qtopo::spin::{self, texture, AugmentOpts};
use rand::Rng;

fn samples(n: usize, opts: AugmentOpts, tag: u64) -> Vec<(qtopo::spin::SpinTexture, usize)> {
    let mut out = Vec::new();
    for sign in [1.0f64, -1.0] {
        for k in 0..n {
            let mut rng = rng::stream(0xCAFE ^ tag, &[sign.to_bits(), k as u64]);
            let m = sign * rng.gen_range(0.1..1.9);
            let t = texture(1, m, 40).unwrap();
            let t = spin::augment(&t, rng.gen(), opts).unwrap();
            let class = nn::class_index(t.meta.label).min(8);
            out.push((t, class));
        }
    }
    out
}

fn run(name: &str, train: &[(qtopo::spin::SpinTexture, usize)], epochs: usize, lr: f64) {
    let mut cfg = NetConfig::qcnn(7);
    cfg.lr = lr;
    cfg.batch_size = 8;
    cfg.dropout = 0.0;
    let mut net = Network::build(&cfg);
    let encode = nn::encoder_for(cfg.arch);
    let records = nn::train(&mut net, train, &[], |s| encode(&s.0), |s| s.1, epochs).unwrap();
    let last = records.last().unwrap();
    let best = records.iter().map(|r| r.train_acc).fold(0.0f64, f64::max);
    println!(
        "{name}: final train_acc {:.3} loss {:.4}, best train_acc {best:.3}",
        last.train_acc, last.train_loss
    );
}

fn main() {
    // (a) 16 samples, full augmentation, crank it
    let tiny = samples(8, AugmentOpts::ALL, 1);
    run("overfit-16-rotated (500 epochs, lr 1e-2)", &tiny, 500, 1e-2);

    // (b) 200 samples, no rotation
    let norot = samples(
        100,
        AugmentOpts {
            translate: true,
            rotate: false,
            noise: true,
        },
        2,
    );
    run("no-rotation-200 (60 epochs, lr 3e-3)", &norot, 60, 3e-3);
}
