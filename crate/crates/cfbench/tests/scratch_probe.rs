// temporary tuning diagnostics on the real data bundle; deleted before finishing
use cfbench::cfgen::*;
use cfbench::dataio::*;
use cfbench::metrics::*;
use cfbench::models::*;
use std::path::Path;

fn load_split(dir: &Path, img: &str, lbl: &str) -> LabeledDataset {
    let images = load_idx_images(&dir.join(img)).unwrap();
    let labels = load_idx_labels(&dir.join(lbl)).unwrap();
    filter_and_normalize(&images, &labels, 4, 9).unwrap()
}

fn pctl(sorted: &[f64], q: f64) -> f64 {
    sorted[(q * (sorted.len() - 1) as f64).round() as usize]
}

#[test]
#[ignore]
fn tune_models() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist-mini");
    let train = load_split(&dir, "train-images-idx3-ubyte", "train-labels-idx1-ubyte");
    let test = load_split(&dir, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");
    println!("train {} test {}", train.len(), test.len());

    for (epochs, batch, lr) in [
        (2usize, 32usize, 0.1),
        (3, 32, 0.1),
        (4, 32, 0.1),
        (5, 32, 0.1),
        (3, 64, 0.2),
        (6, 64, 0.1),
        (8, 64, 0.05),
    ] {
        let t0 = std::time::Instant::now();
        let clf = train_classifier(
            &train,
            &TrainConfig { epochs, batch_size: batch, lr, seed: 42 },
        )
        .unwrap();
        let acc = classifier_accuracy(&clf, &test).unwrap();
        let mut probs: Vec<f64> = (0..test.len())
            .map(|i| {
                let p = clf.prob(test.image(i)).unwrap();
                let y = test.label(i);
                if y == 1 { p } else { 1.0 - p } // prob of TRUE class
            })
            .collect();
        probs.sort_by(f64::total_cmp);
        // wrong-class probability = 1 - true-class prob; show saturation
        println!(
            "clf epochs {epochs} batch {batch} lr {lr}: acc {:.4} ({:?}) true-class prob p10 {:.4} p50 {:.5} p90 {:.6}",
            acc,
            t0.elapsed(),
            pctl(&probs, 0.1),
            pctl(&probs, 0.5),
            pctl(&probs, 0.9),
        );
    }

    for (epochs, lr, mom) in [
        (20usize, 1.0, 0.9),
        (20, 2.0, 0.9),
        (40, 1.0, 0.9),
        (40, 2.0, 0.9),
        (60, 2.0, 0.9),
    ] {
        let t0 = std::time::Instant::now();
        let ae = train_autoencoder_tuned(
            &train,
            16,
            &TrainConfig { epochs, batch_size: 32, lr, seed: 42 },
            mom,
        )
        .unwrap();
        let mse = reconstruction_mse(&ae, &test).unwrap();
        // background behavior: count reconstruction pixels > 1e-3 where x0 == 0
        let mut bg_above = 0usize;
        let mut bg_total = 0usize;
        let mut recon_sparsity = 0.0;
        for i in 0..40.min(test.len()) {
            let x = test.image(i);
            let r = ae.reconstruct(x).unwrap();
            for (a, b) in x.iter().zip(&r) {
                if *a == 0.0 {
                    bg_total += 1;
                    if *b > 1e-3 {
                        bg_above += 1;
                    }
                }
            }
            recon_sparsity += sparsity(x, &r, 1e-3).unwrap();
        }
        println!(
            "ae epochs {epochs} lr {lr} mom {mom}: test mse {:.5} ({:?}) bg>1e-3 {:.3} recon-sparsity {:.3}",
            mse,
            t0.elapsed(),
            bg_above as f64 / bg_total as f64,
            recon_sparsity / 40.0,
        );
    }
}
