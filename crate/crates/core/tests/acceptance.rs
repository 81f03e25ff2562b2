//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails. Oracles here are written independently of
//! the library code they check.

use std::process::Command;
use std::time::{Duration, Instant};

use depthbins::binning::{
    adjust_range, bin_centers, combine, local_variance, locate_target_bin, partition_range,
};
use depthbins::conv::{Conv2d, Padding};
use depthbins::degrade::{add_gaussian_noise, bicubic_resample, cubic_weights, make_lr, DegradeSpec};
use depthbins::gradcheck::{grad_combine_l1, random_instance, GradInstance};
use depthbins::io::{encode_raw, write_depth, RunConfig};
use depthbins::loss::{chamfer_bins, combine_losses, metrics, total_loss};
use depthbins::probhead::{deform_modulate, project_candidates, relu_softmax, softmax_channels, ProbHeadWeights};
use depthbins::refine::{
    run_stages, small_encoder_provider, FeatureProvider, NoDegradation, ProbabilityEstimator, StageFeatures,
    StageInputs,
};
use depthbins::{
    BinIndexMap, BinPartition, CandidateVolume, DegradationMap, DepthMap, FeatureMap, HyperParams,
    ProbabilityVolume, Validate,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn rel_err(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.abs().max(f64::MIN_POSITIVE)
}

// ---------------------------------------------------------------- oracles

/// Direct convolution; `replicate` selects edge replication over zeros.
fn naive_conv(conv: &Conv2d, input: &FeatureMap, replicate: bool) -> Vec<f64> {
    let (h, w) = (input.height() as isize, input.width() as isize);
    let k = conv.kernel();
    let r = (k / 2) as isize;
    let mut out = Vec::with_capacity(conv.out_channels() * (h * w) as usize);
    for o in 0..conv.out_channels() {
        for y in 0..h {
            for x in 0..w {
                let mut acc = conv.bias(o);
                for i in 0..conv.in_channels() {
                    for ky in 0..k {
                        for kx in 0..k {
                            let (mut sy, mut sx) = (y + ky as isize - r, x + kx as isize - r);
                            if replicate {
                                sy = sy.clamp(0, h - 1);
                                sx = sx.clamp(0, w - 1);
                            } else if sy < 0 || sx < 0 || sy >= h || sx >= w {
                                continue;
                            }
                            acc += conv.weight(o, i, ky, kx) * input.get(i, sy as usize, sx as usize);
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    out
}

fn relu_vec(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x.max(0.0)).collect()
}

/// Bilinear read with zeros outside the grid.
fn bilinear_oracle(plane: &[f64], h: usize, w: usize, y: f64, x: f64) -> f64 {
    let (y0, x0) = (y.floor(), x.floor());
    let (fy, fx) = (y - y0, x - x0);
    let mut acc = 0.0;
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            let (yy, xx) = (y0 + dy, x0 + dx);
            if yy >= 0.0 && xx >= 0.0 && (yy as usize) < h && (xx as usize) < w {
                acc += wy * wx * plane[yy as usize * w + xx as usize];
            }
        }
    }
    acc
}

fn random_features(rng: &mut ChaCha8Rng, c: usize, h: usize, w: usize, amp: f64) -> FeatureMap {
    FeatureMap::new(c, h, w, (0..c * h * w).map(|_| rng.random_range(-amp..amp)).collect()).unwrap()
}

fn random_centers(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize) -> CandidateVolume {
    let plane = h * w;
    let mut data = vec![0.0; n * plane];
    for p in 0..plane {
        let mut c: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..20.0)).collect();
        c.sort_by(f64::total_cmp);
        for (i, v) in c.into_iter().enumerate() {
            data[i * plane + p] = v;
        }
    }
    CandidateVolume::new(n, h, w, data).unwrap()
}

fn random_probs(rng: &mut ChaCha8Rng, n: usize, h: usize, w: usize) -> ProbabilityVolume {
    let plane = h * w;
    let mut data = vec![0.0; n * plane];
    for p in 0..plane {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(-4.0f64..4.0).exp()).collect();
        let s: f64 = raw.iter().sum();
        for (i, v) in raw.into_iter().enumerate() {
            data[i * plane + p] = v / s;
        }
    }
    ProbabilityVolume::new(n, h, w, data).unwrap()
}

// ------------------------------------------------------------- criteria

fn bin_algebra() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for trial in 0..1000 {
        let n = [1, 2, 32, 64][trial % 4];
        let (h, w) = (rng.random_range(1..=4), rng.random_range(1..=4));
        let plane = h * w;
        let lo: Vec<f64> = (0..plane).map(|_| rng.random_range(0.0..10.0)).collect();
        let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(1.0..10.0)).collect();
        let part = ok(partition_range(h, w, lo.clone(), hi.clone(), n))?;
        let centers = bin_centers(&part);
        for p in 0..plane {
            let width = (hi[p] - lo[p]) / n as f64;
            ensure!(part.edge(0, p) == lo[p], "u_0 != v_min at trial {trial}");
            ensure!(part.edge(n, p) == hi[p], "u_N != v_max at trial {trial}");
            for i in 0..n {
                let e = rel_err(part.edge(i + 1, p) - part.edge(i, p), width, width);
                worst = worst.max(e);
                ensure!(e <= 1e-12, "edge step off by {e:e} at trial {trial}");
                let c = centers.center(i, p);
                let mid = lo[p] + (i as f64 + 0.5) * width;
                let e = rel_err(c, mid, hi[p]);
                ensure!(e <= 1e-12, "centre {i} off by {e:e} at trial {trial}");
                if i > 0 {
                    ensure!(c > centers.center(i - 1, p), "centres not increasing at trial {trial}");
                }
            }
        }
        let probs = random_probs(&mut rng, n, h, w);
        let x = ok(combine(&centers, &probs))?;
        let idx = ok(locate_target_bin(&part, &x))?;
        for p in 0..plane {
            let cs: Vec<f64> = centers.pixel(p).collect();
            let (cmin, cmax) = (cs[0], cs[n - 1]);
            let v = x.values()[p];
            ensure!(cmin <= v && v <= cmax, "combine outside centre hull at trial {trial}");
            let b = idx.get(p);
            ensure!(b < n, "bin index {b} out of range");
            ensure!(
                part.edge(b, p) <= v && v <= part.edge(b + 1, p),
                "combined depth {v} outside its bin {b} at trial {trial}"
            );
        }
    }
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(10), "took {t:?}");
    Ok(format!("1000 partitions, worst step error {worst:.1e}, {t:.2?}"))
}

fn variance_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for trial in 0..100 {
        let vals: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..5.0)).collect();
        let deg = ok(DegradationMap::new(8, 8, vals.clone()))?;
        for k in [1usize, 3, 5] {
            let stats = ok(local_variance(&deg, k))?;
            let r = (k / 2) as isize;
            for y in 0..8isize {
                for x in 0..8isize {
                    let mut win = Vec::new();
                    for yy in y - r..=y + r {
                        for xx in x - r..=x + r {
                            if (0..8).contains(&yy) && (0..8).contains(&xx) {
                                win.push(vals[(yy * 8 + xx) as usize]);
                            }
                        }
                    }
                    let m = win.iter().sum::<f64>() / win.len() as f64;
                    let var = win.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / win.len() as f64;
                    let p = (y * 8 + x) as usize;
                    let e = (stats.variance[p] - var).abs().max((stats.sigma[p] - var.sqrt()).abs());
                    worst = worst.max(e);
                    ensure!(e <= 1e-10, "trial {trial} k={k} ({y},{x}): error {e:e}");
                }
            }
        }
    }
    Ok(format!("100 maps x k in {{1,3,5}}, worst {worst:.1e}"))
}

fn range_adjustment() -> Outcome {
    // Edges 1.0, 1.25, 1.5, 1.75, 2.0; bin 2 is [1.5, 1.75].
    let part = ok(BinPartition::broadcast(4, 1, 1, 1.0, 2.0))?;
    let target = ok(BinIndexMap::new(4, 1, 1, vec![2]))?;
    let same = ok(adjust_range(&part, &target, &[0.0], 0.2))?;
    ensure!(
        same.v_min()[0] == part.edge(2, 0) && same.v_max()[0] == part.edge(3, 0),
        "sigma 0 gave [{}, {}]",
        same.v_min()[0],
        same.v_max()[0]
    );
    let wide = ok(adjust_range(&part, &target, &[0.5], 0.2))?;
    let (lo, hi) = (wide.v_min()[0], wide.v_max()[0]);
    ensure!((lo - 1.4).abs() < 1e-12 && (hi - 1.85).abs() < 1e-12, "hand value gave [{lo}, {hi}]");
    let low = ok(BinPartition::broadcast(4, 1, 1, 0.0, 1.0))?;
    let first = ok(BinIndexMap::new(4, 1, 1, vec![0]))?;
    let clamped = ok(adjust_range(&low, &first, &[1.0], 0.2))?;
    ensure!(
        clamped.v_min()[0] == 0.0 && (clamped.v_max()[0] - 0.45).abs() < 1e-12,
        "clamp gave [{}, {}]",
        clamped.v_min()[0],
        clamped.v_max()[0]
    );
    Ok("sigma=0 exact, [1.5,1.75] -> [1.4,1.85], lower clamp at 0".into())
}

/// One-hot on the candidate nearest to the ground truth.
struct Oracle<'a> {
    gt: &'a DepthMap,
}

impl ProbabilityEstimator for Oracle<'_> {
    fn estimate_probs(&self, centers: &CandidateVolume, _inputs: &StageInputs) -> depthbins::Result<ProbabilityVolume> {
        let idx = (0..self.gt.len())
            .map(|p| {
                let z = self.gt.values()[p];
                let mut best = (0, f64::INFINITY);
                for (n, c) in centers.pixel(p).enumerate() {
                    if (c - z).abs() < best.1 {
                        best = (n, (c - z).abs());
                    }
                }
                best.0
            })
            .collect();
        ProbabilityVolume::one_hot(&BinIndexMap::new(centers.n_bins(), centers.height(), centers.width(), idx)?)
    }
}

fn oracle_convergence() -> Outcome {
    let start = Instant::now();
    let (n, s, range) = (32usize, 4usize, 10.0);
    let bound = range / (2.0 * (n as f64).powi(s as i32));
    let hp = HyperParams { n_bins: n, n_stages: s, ..Default::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for scene in 0..20 {
        let base = rng.random_range(20.0..200.0);
        let gt = ok(DepthMap::from_fn(32, 32, |_, _| base + rng.random_range(0.0..range)))?;
        let x1 = ok(DepthMap::from_fn(32, 32, |_, _| base + rng.random_range(0.0..range)))?;
        let part = ok(partition_range(32, 32, vec![base; 1024], vec![base + range; 1024], n))?;
        let prior = ok(ProbabilityVolume::one_hot(&ok(locate_target_bin(&part, &gt))?))?;
        let features =
            StageFeatures { context: FeatureMap::zeros(1, 32, 32), layer_feats: vec![FeatureMap::zeros(1, 32, 32)] };
        let oracle = Oracle { gt: &gt };
        let stages: Vec<&Oracle> = vec![&oracle; s];
        let (out, _) = ok(run_stages(&x1, part, prior, &features, &x1, &NoDegradation, &stages, &hp))?;
        let err = out.values().iter().zip(gt.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        worst = worst.max(err);
        ensure!(err <= bound, "scene {scene}: error {err:e} > {bound:e}");
    }
    let t = start.elapsed();
    ensure!(bound <= 4.77e-6, "bound {bound:e}");
    ensure!(t < Duration::from_secs(30), "took {t:?}");
    Ok(format!("20 scenes, worst {worst:.2e} <= {bound:.3e}, {t:.2?}"))
}

fn probability_head() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_sum = 0.0f64;
    let mut worst_shift = 0.0f64;
    for draw in 0..100 {
        let (n, hid, ctx) = (rng.random_range(1..=8), rng.random_range(1..=6), rng.random_range(0..=4));
        let (h, w) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let weights = ProbHeadWeights::seeded(n, hid, ctx, draw);
        let centers = random_centers(&mut rng, n, h, w);
        let feats = random_features(&mut rng, ctx, h, w, 2.0);
        let deg = ok(DegradationMap::new(h, w, (0..h * w).map(|_| rng.random_range(0.0..3.0)).collect()))?;
        let probs = ok(weights.estimate(&centers, &feats, &deg))?;
        ok(probs.validate())?;
        for p in 0..h * w {
            let s: f64 = (0..n).map(|i| probs.prob(i, p)).sum();
            worst_sum = worst_sum.max((s - 1.0).abs());
        }

        let logits = random_features(&mut rng, n, h, w, 30.0);
        let plane = h * w;
        let shifts: Vec<f64> = (0..plane).map(|_| rng.random_range(-50.0..50.0)).collect();
        let shifted: Vec<f64> = logits.data().iter().enumerate().map(|(i, v)| v + shifts[i % plane]).collect();
        let shifted = ok(FeatureMap::new(n, h, w, shifted))?;
        let a = softmax_channels(&logits);
        let b = softmax_channels(&shifted);
        for (x, y) in a.iter().zip(&b) {
            worst_shift = worst_shift.max((x - y).abs());
        }
        let with_relu = ok(relu_softmax(&logits))?;
        ensure!(
            with_relu.probs().iter().zip(&a).all(|(x, y)| x.to_bits() == y.to_bits()),
            "ReLU changed softmax output at draw {draw}"
        );
    }
    ensure!(worst_sum <= 1e-9, "sum error {worst_sum:e}");
    ensure!(worst_shift <= 1e-12, "shift error {worst_shift:e}");
    Ok(format!("sums within {worst_sum:.1e}, shift {worst_shift:.1e}, ReLU bit-identical"))
}

fn deform_weights(hid: usize, dy: f64, dx: f64, delta: bool) -> ProbHeadWeights {
    let mut w = ProbHeadWeights::zeros(2, hid, 0);
    let kk = 9;
    let off_bias: Vec<f64> = (0..kk).flat_map(|_| [dy, dx]).collect();
    w.offset_conv = Conv2d::new(1, 2 * kk, 3, vec![0.0; 2 * kk * 9], off_bias).unwrap();
    // sigmoid(40) rounds to exactly 1.
    w.modulation_conv = Conv2d::new(1, kk, 3, vec![0.0; kk * 9], vec![40.0; kk]).unwrap();
    let mut k = vec![0.0; hid * hid * 9];
    if delta {
        for c in 0..hid {
            k[(c * hid + c) * 9 + 4] = 1.0;
        }
    }
    w.deform = Conv2d::new(hid, hid, 3, k, vec![0.0; hid]).unwrap();
    w
}

fn deformable_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (hid, h, w) = (3, 7, 6);
    let hidden = random_features(&mut rng, hid, h, w, 1.0);
    let deg = ok(DegradationMap::new(h, w, (0..h * w).map(|_| rng.random_range(0.0..2.0)).collect()))?;

    let doubled = ok(deform_modulate(&hidden, &deg, &deform_weights(hid, 0.0, 0.0, true)))?;
    ensure!(
        doubled.data().iter().zip(hidden.data()).all(|(a, b)| *a == 2.0 * b),
        "delta kernel did not double exactly"
    );
    let same = ok(deform_modulate(&hidden, &deg, &deform_weights(hid, 0.0, 0.0, false)))?;
    ensure!(same == hidden, "zero kernel changed the hidden state");

    let half = ok(deform_modulate(&hidden, &deg, &deform_weights(hid, 0.5, 0.5, true)))?;
    let mut worst = 0.0f64;
    for c in 0..hid {
        for y in 0..h {
            for x in 0..w {
                let want = hidden.get(c, y, x) + bilinear_oracle(hidden.channel(c), h, w, y as f64 + 0.5, x as f64 + 0.5);
                worst = worst.max((half.get(c, y, x) - want).abs());
            }
        }
    }
    ensure!(worst <= 1e-12, "half-pixel error {worst:e}");
    Ok(format!("2H exact, H exact, half-pixel {worst:.1e}"))
}

fn convolution_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut check = |conv: &Conv2d, rng: &mut ChaCha8Rng, pad: Padding| -> Result<(), String> {
        let input = random_features(rng, conv.in_channels(), 8, 8, 1.0);
        let fast = ok(conv.forward_padded(&input, pad))?;
        let slow = naive_conv(conv, &input, pad == Padding::Replicate);
        for (a, b) in fast.data().iter().zip(&slow) {
            worst = worst.max((a - b).abs());
        }
        count += 1;
        Ok(())
    };
    let head = ProbHeadWeights::seeded(6, 5, 4, 11);
    for (_, conv) in head.named_convs() {
        check(conv, &mut rng, Padding::Zeros)?;
    }
    let enc = ok(small_encoder_provider(12, 5))?;
    for conv in enc.layers() {
        check(conv, &mut rng, Padding::Replicate)?;
    }

    // Composed: candidate projection and the full encoder.
    let centers = random_centers(&mut rng, 6, 8, 8);
    let fast = ok(project_candidates(&centers, &head))?;
    let mut slow = centers.as_features();
    for conv in &head.proj {
        slow = FeatureMap::new(conv.out_channels(), 8, 8, relu_vec(naive_conv(conv, &slow, false))).unwrap();
    }
    for (a, b) in fast.data().iter().zip(slow.data()) {
        worst = worst.max((a - b).abs());
    }
    let color = FeatureMap::new(3, 8, 8, (0..192).map(|_| rng.random_range(0.0..1.0)).collect()).unwrap();
    let lr = ok(DepthMap::from_fn(8, 8, |_, _| rng.random_range(50.0..150.0)))?;
    let produced = ok(enc.produce(&color, &lr))?;
    let max = lr.values().iter().copied().fold(0.0, f64::max);
    let depth_plane: Vec<f64> = lr.values().iter().map(|v| v / max).collect();
    let mut feat = FeatureMap::new(4, 8, 8, [color.data(), &depth_plane].concat()).unwrap();
    for (i, conv) in enc.layers().iter().enumerate() {
        feat = FeatureMap::new(conv.out_channels(), 8, 8, relu_vec(naive_conv(conv, &feat, true))).unwrap();
        for (a, b) in produced.layer_feats[i].data().iter().zip(feat.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure!(worst <= 1e-10, "max error {worst:e}");
    Ok(format!("{count} convs + composed paths, worst {worst:.1e}"))
}

fn loss_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a: Vec<f64> = (0..rng.random_range(1..=64)).map(|_| rng.random_range(0.0..20.0)).collect();
        let b: Vec<f64> = (0..rng.random_range(1..=64)).map(|_| rng.random_range(0.0..20.0)).collect();
        let nn = |from: &[f64], to: &[f64]| -> f64 {
            from.iter().map(|x| to.iter().map(|y| (x - y) * (x - y)).fold(f64::INFINITY, f64::min)).sum()
        };
        let brute = nn(&b, &a) + nn(&a, &b);
        let fast = ok(chamfer_bins(&a, &b))?;
        worst = worst.max(rel_err(fast, brute, brute.max(1e-300)));
    }
    ensure!(worst <= 1e-10, "chamfer relative error {worst:e}");

    // L_rec = 1 (pred off by 1 everywhere), L_bin = 0.75.
    let hand = combine_losses(1.0, 0.75, 0.1);
    ensure!((hand - 1.075).abs() < 1e-12, "hand value {hand}");
    // Through total_loss: gt 0 and pred 1 give L_rec = 1; centres
    // {0, sqrt(0.75)} against {0} give Chamfer 0 + (0 + 0.75) = 0.75.
    let gt = ok(DepthMap::filled(1, 1, 0.0))?;
    let pred = ok(DepthMap::filled(1, 1, 1.0))?;
    let centers = ok(CandidateVolume::new(2, 1, 1, vec![0.0, 0.75f64.sqrt()]))?;
    let hp = HyperParams { alpha: 0.1, ..Default::default() };
    let total = ok(total_loss(&pred, &gt, &centers, &hp))?;
    ensure!((total - 1.075).abs() < 1e-12, "total_loss gave {total}");

    let at = |alpha: f64| -> Result<f64, String> {
        ok(total_loss(&pred, &gt, &centers, &HyperParams { alpha, ..Default::default() }))
    };
    let (l0, l1, l2) = (at(0.0)?, at(0.5)?, at(1.0)?);
    ensure!(
        ((l1 - l0) * 2.0 - (l2 - l0)).abs() < 1e-12 && (l0 - 1.0).abs() < 1e-12 && (l2 - 1.75).abs() < 1e-12,
        "not linear in alpha: {l0} {l1} {l2}"
    );
    Ok(format!("200 pairs worst {worst:.1e}, total 1.075, linear in alpha"))
}

fn metrics_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..100 {
        let (h, w) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let gt = ok(DepthMap::from_fn(h, w, |_, _| rng.random_range(1.0..100.0)))?;
        let pred = ok(DepthMap::from_fn(h, w, |_, _| rng.random_range(1.0..100.0)))?;
        let m = ok(metrics(&pred, &gt))?;
        ensure!(m.rmse >= m.mae, "trial {trial}: rmse {} < mae {}", m.rmse, m.mae);
        ensure!(m.delta1 <= m.delta2 && m.delta2 <= m.delta3, "trial {trial}: deltas {m:?}");
    }
    let gt = ok(DepthMap::from_values(1, 2, vec![20.0, 40.0]))?;
    let pred = ok(DepthMap::from_values(1, 2, vec![1.05 * 20.0, 40.0]))?;
    let m = ok(metrics(&pred, &gt))?;
    ensure!(m.delta1 == 50.0, "boundary pixel counted: delta1 = {}", m.delta1);
    let same = ok(metrics(&gt, &gt))?;
    ensure!(
        same.rmse == 0.0 && same.mae == 0.0 && same.delta1 == 100.0,
        "identity gave {same:?}"
    );
    Ok("orderings on 100 pairs, boundary excluded, identity exact".into())
}

/// Independent loss for finite differences.
fn oracle_loss(inst: &GradInstance, logits: &[f64]) -> f64 {
    let n = inst.logits.channels();
    let plane = inst.logits.plane_len();
    let mut total = 0.0;
    for p in 0..plane {
        let m = (0..n).map(|i| logits[i * plane + p]).fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = (0..n).map(|i| (logits[i * plane + p] - m).exp()).collect();
        let s: f64 = e.iter().sum();
        let x: f64 = (0..n).map(|i| e[i] / s * inst.centers.center(i, p)).sum();
        total += (x - inst.gt.values()[p]).abs();
    }
    total / plane as f64
}

fn gradient_check() -> Outcome {
    let step = 1e-4;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut worst_rel, mut worst_sum) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let grad = ok(grad_combine_l1(&inst.logits, &inst.centers, &inst.gt))?;
        let mut theta = inst.logits.data().to_vec();
        for i in 0..theta.len() {
            let orig = theta[i];
            theta[i] = orig + step;
            let plus = oracle_loss(&inst, &theta);
            theta[i] = orig - step;
            let minus = oracle_loss(&inst, &theta);
            theta[i] = orig;
            let num = (plus - minus) / (2.0 * step);
            let rel = (num - grad[i]).abs() / num.abs().max(grad[i].abs()).max(1e-12);
            worst_rel = worst_rel.max(rel);
        }
        let n = inst.logits.channels();
        let plane = inst.logits.plane_len();
        for p in 0..plane {
            worst_sum = worst_sum.max((0..n).map(|i| grad[i * plane + p]).sum::<f64>().abs());
        }
    }
    ensure!(worst_rel <= 1e-5, "max relative error {worst_rel:e}");
    ensure!(worst_sum <= 1e-12, "per-pixel gradient sum {worst_sum:e}");
    Ok(format!("100 instances, rel {worst_rel:.1e}, zero-sum {worst_sum:.1e}"))
}

fn degradation_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let gt = ok(DepthMap::from_fn(9, 7, |_, _| rng.random_range(10.0..90.0)))?;
    let same = ok(bicubic_resample(&gt, 9, 7))?;
    ensure!(encode_raw(&same) == encode_raw(&gt), "bicubic at scale 1 not bit-exact");
    let spec1 = DegradeSpec { scale: 1.0, ..Default::default() };
    ensure!(encode_raw(&ok(make_lr(&gt, &spec1))?) == encode_raw(&gt), "make_lr at scale 1 not bit-exact");
    ensure!(cubic_weights(0.5) == [-0.0625, 0.5625, 0.5625, -0.0625], "half-pixel weights {:?}", cubic_weights(0.5));

    let a = ok(add_gaussian_noise(&gt, 0.0, 0.07, 42))?;
    let b = ok(add_gaussian_noise(&gt, 0.0, 0.07, 42))?;
    let c = ok(add_gaussian_noise(&gt, 0.0, 0.07, 43))?;
    ensure!(encode_raw(&a) == encode_raw(&b), "same seed differs");
    ensure!(encode_raw(&a) != encode_raw(&c), "different seeds agree");

    let dir = ok(tempfile::tempdir())?;
    let gt_path = dir.path().join("gt.raw");
    let lr_path = dir.path().join("lr.raw");
    ok(write_depth(&gt, &gt_path))?;
    let bin = env!("CARGO_BIN_EXE_depthbins");
    let status = ok(Command::new(bin)
        .args(["degrade", "--in"])
        .arg(&gt_path)
        .args(["--scale", "1", "--out"])
        .arg(&lr_path)
        .status())?;
    ensure!(status.success(), "degrade exited with {status}");
    let out = ok(Command::new(bin).args(["eval", "--json", "--pred"]).arg(&lr_path).arg("--gt").arg(&gt_path).output())?;
    ensure!(out.status.success(), "eval exited with {}", out.status);
    let line = String::from_utf8_lossy(&out.stdout).trim().to_string();
    let json: serde_json::Value = ok(serde_json::from_str(&line))?;
    ensure!(json["rmse"].as_f64() == Some(0.0), "eval reported {line}");
    Ok("scale-1 identity, cubic weights, CLI rmse 0.0, seeded noise".into())
}

fn smoke_scene() -> (DepthMap, FeatureMap) {
    let gt = DepthMap::from_fn(64, 64, |y, x| {
        let (fy, fx) = (y as f64, x as f64);
        let disc = (fy - 40.0).powi(2) + (fx - 22.0).powi(2) < 120.0;
        if disc {
            90.0 + 0.2 * fx
        } else if (8..24).contains(&y) && (36..56).contains(&x) {
            120.0
        } else {
            180.0 + 0.5 * fx - 0.3 * fy
        }
    })
    .unwrap();
    let plane = 64 * 64;
    let mut color = vec![0.0; 3 * plane];
    for p in 0..plane {
        let d = gt.values()[p] / 200.0;
        color[p] = d;
        color[plane + p] = 1.0 - d;
        color[2 * plane + p] = 0.5 + 0.1 * (((p % 64) / 8 + (p / 64) / 8) % 2) as f64;
    }
    (gt, FeatureMap::new(3, 64, 64, color).unwrap())
}

fn end_to_end_smoke() -> Outcome {
    let (gt, color) = smoke_scene();
    let lr = ok(make_lr(&gt, &DegradeSpec { scale: 4.0, ..Default::default() }))?;
    let cfg = RunConfig::default();
    let start = Instant::now();
    let (out, trace) = ok(cfg.run(&color, &lr))?;
    let t = start.elapsed();
    ensure!(t < Duration::from_secs(5), "took {t:?}");
    ok(out.validate())?;
    ensure!(out.shape() == gt.shape(), "output shape {}", out.shape());
    ensure!(trace.per_stage_depths.len() == cfg.hyper.n_stages, "trace has {} stages", trace.per_stage_depths.len());
    for (i, (d, part)) in trace.per_stage_depths.iter().zip(&trace.per_stage_partitions).enumerate() {
        for p in 0..d.len() {
            if d.valid_mask()[p] {
                let v = d.values()[p];
                ensure!(
                    part.v_min()[p] <= v && v <= part.v_max()[p],
                    "stage {} pixel {p}: {v} outside [{}, {}]",
                    i + 1,
                    part.v_min()[p],
                    part.v_max()[p]
                );
            }
        }
    }
    let (again, _) = ok(cfg.run(&color, &lr))?;
    ensure!(encode_raw(&out) == encode_raw(&again), "two runs differ");
    let m = ok(metrics(&out, &gt))?;
    Ok(format!("64x64 in {t:.2?}, in-range, deterministic, rmse {:.3}", m.rmse))
}

fn main() {
    let criteria: [Criterion; 12] = [
        ("bin algebra", bin_algebra),
        ("variance oracle", variance_oracle),
        ("range adjustment", range_adjustment),
        ("oracle convergence", oracle_convergence),
        ("probability head", probability_head),
        ("deformable identity", deformable_identity),
        ("convolution oracles", convolution_oracles),
        ("loss suite", loss_suite),
        ("metrics suite", metrics_suite),
        ("gradient check", gradient_check),
        ("degradation pipeline", degradation_pipeline),
        ("end-to-end smoke", end_to_end_smoke),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<22} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<22} {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
