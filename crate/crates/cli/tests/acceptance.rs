//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use boxprompt_core::cfpg::{box_center_point, generate_point, CfpgConfig};
use boxprompt_core::clustering::kmeans_fit;
use boxprompt_core::distance::distance_transform;
use boxprompt_core::gmm::{self, GmmFitConfig};
use boxprompt_core::graphcut::GridGraph;
use boxprompt_core::maxflow::max_flow_st;
use boxprompt_core::mbo::{refine_mask, MboConfig};
use boxprompt_core::metrics::{aggregate, iou, EvalRecord, DEFAULT_THRESHOLDS};
use boxprompt_core::regions::convexity;
use boxprompt_core::synth::{corrupt_mask, generate, SceneFamily, SceneSpec, Shape};
use boxprompt_core::{BinaryMask, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

fn within(limit: Duration, elapsed: Duration, mut o: Outcome) -> Outcome {
    if elapsed > limit {
        o.ok = false;
        o.detail = format!("{}; took {:.2?}, limit {:.0?}", o.detail, elapsed, limit);
    }
    o
}

fn random_mask(rng: &mut ChaCha8Rng, w: u32, h: u32) -> BinaryMask {
    let density = rng.random_range(0.05..0.98);
    BinaryMask::from_fn(w, h, |_, _| rng.random_bool(density))
}

fn distance_exact() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for case in 0..500 {
        let (w, h) = (rng.random_range(1..=64), rng.random_range(1..=64));
        let mask = random_mask(&mut rng, w, h);
        let bg: Vec<(i64, i64)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|&(x, y)| !mask.get(x, y))
            .map(|(x, y)| (i64::from(x), i64::from(y)))
            .collect();
        let field = match distance_transform(&mask) {
            Ok(f) => f,
            Err(Error::NoBackground) if bg.is_empty() => continue,
            Err(e) => return outcome(false, format!("case {case}: {e}")),
        };
        for y in 0..h {
            for x in 0..w {
                let sq = bg
                    .iter()
                    .map(|&(bx, by)| (bx - i64::from(x)).pow(2) + (by - i64::from(y)).pow(2))
                    .min()
                    .unwrap();
                let got = field.get(x, y);
                if got != (sq as f64).sqrt() {
                    return outcome(
                        false,
                        format!("case {case} ({x}, {y}): {got} vs sqrt({sq})"),
                    );
                }
            }
        }
    }
    outcome(true, "500 masks match brute force exactly")
}

fn enumerate_min_cut(n: usize, s: usize, t: usize, edges: &[(usize, usize, f64)]) -> f64 {
    let inner: Vec<usize> = (0..n).filter(|&v| v != s && v != t).collect();
    let mut best = f64::INFINITY;
    for bits in 0u32..(1 << inner.len()) {
        let mut side = vec![false; n];
        side[s] = true;
        for (k, &v) in inner.iter().enumerate() {
            side[v] = bits >> k & 1 == 1;
        }
        let cut: f64 = edges
            .iter()
            .filter(|&&(a, b, _)| side[a] && !side[b])
            .map(|e| e.2)
            .sum();
        best = best.min(cut);
    }
    best
}

fn max_flow_correct() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for case in 0..500 {
        let n = rng.random_range(2..=10);
        let m = rng.random_range(0..=n * (n - 1));
        let edges: Vec<(usize, usize, f64)> = (0..m)
            .filter_map(|_| {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                (a != b).then(|| (a, b, rng.random_range(0.0..10.0)))
            })
            .collect();
        let (flow, side) = max_flow_st(n, 0, n - 1, &edges);
        let best = enumerate_min_cut(n, 0, n - 1, &edges);
        let cut: f64 = edges
            .iter()
            .filter(|&&(a, b, _)| side[a] && !side[b])
            .map(|e| e.2)
            .sum();
        if (flow - best).abs() > 1e-9 || (cut - best).abs() > 1e-9 {
            return outcome(
                false,
                format!("network {case}: flow {flow}, cut {cut}, optimum {best}"),
            );
        }
    }
    let mut worst = 0.0f64;
    for case in 0..60 {
        let (w, h) = (rng.random_range(1..=32), rng.random_range(1..=32));
        let n = (w * h) as usize;
        let mut unary = || -> Vec<f64> { (0..n).map(|_| rng.random_range(0.0..5.0)).collect() };
        let (source, sink) = (unary(), unary());
        let links = (0..n)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..3.0)))
            .collect();
        let g = GridGraph::from_capacities(w, h, source, sink, links).unwrap();
        let (flow, mask) = g.solve();
        let e = g.cut_energy(&mask).unwrap();
        let rel = (e - flow).abs() / flow.abs().max(1e-12);
        if rel > 1e-6 {
            return outcome(
                false,
                format!("grid {case} {w}x{h}: energy {e} vs flow {flow}"),
            );
        }
        worst = worst.max(rel);
    }
    outcome(
        true,
        format!("500 networks match enumeration; 60 grids, worst duality gap {worst:.1e}"),
    )
}

fn exhaustive_inertia(points: &[[f64; 3]], k: usize) -> f64 {
    let n = points.len();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut sums = vec![([0.0; 3], 0usize); k];
        for (p, &l) in points.iter().zip(&labels) {
            for c in 0..3 {
                sums[l].0[c] += p[c];
            }
            sums[l].1 += 1;
        }
        if sums.iter().all(|s| s.1 > 0) {
            let inertia: f64 = points
                .iter()
                .zip(&labels)
                .map(|(p, &l)| {
                    (0..3)
                        .map(|c| (p[c] - sums[l].0[c] / sums[l].1 as f64).powi(2))
                        .sum::<f64>()
                })
                .sum();
            best = best.min(inertia);
        }
        let mut i = 0;
        while i < n {
            labels[i] += 1;
            if labels[i] < k {
                break;
            }
            labels[i] = 0;
            i += 1;
        }
        if i == n {
            return best;
        }
    }
}

fn kmeans_optimal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..200 {
        let k = if case % 2 == 0 { 2 } else { 3 };
        let n = rng.random_range(k + 1..=if k == 2 { 12 } else { 9 });
        let centers: Vec<[f64; 3]> = (0..k)
            .map(|c| {
                let base = 0.15 + 0.7 * c as f64 / (k - 1) as f64;
                std::array::from_fn(|_| base + rng.random_range(-0.05..0.05))
            })
            .collect();
        let points: Vec<[f64; 3]> = (0..n)
            .map(|i| {
                let c = centers[i % k];
                std::array::from_fn(|d| c[d] + rng.random_range(-0.04..0.04))
            })
            .collect();
        let model = kmeans_fit(&points, k, case, 100, 0.0).unwrap();
        let best = exhaustive_inertia(&points, k);
        if (model.inertia - best).abs() > 1e-9 * best.max(1e-12) + 1e-15 {
            return outcome(
                false,
                format!("set {case}: inertia {} vs optimum {best}", model.inertia),
            );
        }
    }
    outcome(true, "200 sets reach the exhaustive optimum")
}

fn em_monotone() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    let mut steps = 0;
    for case in 0..150u64 {
        let blobs = rng.random_range(1..=4);
        let means: Vec<[f64; 3]> = (0..blobs)
            .map(|_| std::array::from_fn(|_| rng.random_range(0.0..1.0)))
            .collect();
        let spread = rng.random_range(0.005..0.1);
        let n = rng.random_range(20..600);
        let pixels: Vec<[f64; 3]> = (0..n)
            .map(|_| {
                let m = means[rng.random_range(0..blobs)];
                std::array::from_fn(|d| (m[d] + rng.random_range(-spread..spread)).clamp(0.0, 1.0))
            })
            .collect();
        let cfg = GmmFitConfig {
            components: rng.random_range(1..=5),
            max_iter: 40,
            tol: 0.0,
            seed: case,
            ..GmmFitConfig::default()
        };
        let first = match gmm::fit(&pixels, &cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("fit {case}: {e}")),
        };
        let again = gmm::refit(&first.model, &pixels[..n / 2], &cfg).unwrap();
        for report in [&first, &again] {
            for w in report.log_likelihood.windows(2) {
                steps += 1;
                worst = worst.min(w[1] - w[0]);
                if w[1] - w[0] < -1e-9 {
                    return outcome(
                        false,
                        format!("fit {case}: log-likelihood fell by {}", w[0] - w[1]),
                    );
                }
            }
            for z in &pixels {
                let s: f64 = report.model.posterior(z).iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return outcome(false, format!("fit {case}: posterior sums to {s}"));
                }
            }
        }
    }
    outcome(
        true,
        format!("300 fits, {steps} steps, smallest change {worst:.1e}"),
    )
}

fn cfpg_benchmark() -> Outcome {
    let family = SceneFamily::cfpg_benchmark();
    let cfg = CfpgConfig::default();
    let (mut hits, mut baseline) = (0, 0);
    for i in 0..200 {
        let scene = family.generate(0, i).unwrap();
        let p = generate_point(&scene.image, &scene.jittered_box, &cfg).unwrap();
        let (x, y) = p.pixel();
        hits += usize::from(scene.gt_mask.get(x, y));
        let (cx, cy) = box_center_point(&scene.jittered_box).pixel();
        baseline += usize::from(scene.gt_mask.get(cx, cy));
    }
    outcome(
        hits >= 190 && baseline < hits,
        format!("point inside object in {hits}/200 scenes; box centre {baseline}/200"),
    )
}

fn mbo_benchmark() -> Outcome {
    let family = SceneFamily::mbo_benchmark();
    let cfg = MboConfig::default();
    let (mut improved, mut gain, mut descent_violations) = (0, 0.0, 0);
    for i in 0..100 {
        let scene = family.generate(0, i).unwrap();
        let coarse = corrupt_mask(&scene.gt_mask, 3, 0.05, i).unwrap();
        let out = refine_mask(&scene.image, &coarse, &cfg).unwrap();
        let before = iou(&coarse, &scene.gt_mask).unwrap().iou;
        let after = iou(&out.mask, &scene.gt_mask).unwrap().iou;
        improved += usize::from(after > before);
        gain += after - before;
        descent_violations += out
            .log
            .iter()
            .filter(|l| l.energy_after > l.energy_before + 1e-9 * l.energy_before.abs())
            .count();
    }
    let mean = gain / 100.0;
    outcome(
        improved >= 90 && mean >= 0.05 && descent_violations == 0,
        format!("IoU improved in {improved}/100, mean gain {mean:.4}, {descent_violations} energy increases"),
    )
}

fn metrics_exact() -> Outcome {
    let recs = [
        EvalRecord::from_counts("a", 10, 10),
        EvalRecord::from_counts("b", 0, 200),
    ];
    let r = aggregate(&recs, &DEFAULT_THRESHOLDS).unwrap();
    if (r.miou - 0.5).abs() > 1e-12 || (r.oiou - 10.0 / 210.0).abs() > 1e-12 {
        return outcome(false, format!("miou {} oiou {}", r.miou, r.oiou));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let thresholds: Vec<f64> = (1..20).map(|t| t as f64 / 20.0).collect();
    for case in 0..1000 {
        let n = rng.random_range(1..50);
        let recs: Vec<EvalRecord> = (0..n)
            .map(|_| {
                let u = rng.random_range(0..100u64);
                EvalRecord::from_counts("", rng.random_range(0..=u), u)
            })
            .collect();
        let r = aggregate(&recs, &thresholds).unwrap();
        if r.precision.0.windows(2).any(|w| w[1].1 > w[0].1) {
            return outcome(false, format!("set {case}: Pr@X not monotone"));
        }
    }
    outcome(true, "hand case exact; Pr@X monotone on 1000 sets")
}

fn convexity_bounds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for case in 0..1000 {
        let (w, h) = (rng.random_range(1..=20u32), rng.random_range(1..=20u32));
        let density = rng.random_range(0.05..1.0);
        let mut px: Vec<(u32, u32)> = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .filter(|_| rng.random_bool(density))
            .collect();
        if px.is_empty() {
            px.push((0, 0));
        }
        let (_, k) = convexity(&px);
        if !(k > 0.0 && k <= 1.0) {
            return outcome(false, format!("region {case}: kappa {k}"));
        }
        let (x0, y0) = (rng.random_range(0..50u32), rng.random_range(0..50u32));
        let rect: Vec<(u32, u32)> = (y0..y0 + h)
            .flat_map(|y| (x0..x0 + w).map(move |x| (x, y)))
            .collect();
        let (_, k) = convexity(&rect);
        if k != 1.0 {
            return outcome(false, format!("{w}x{h} rectangle: kappa {k}"));
        }
    }
    let (_, k) = convexity(&[(0, 0), (0, 1), (1, 1)]);
    outcome(
        (k - 6.0 / 7.0).abs() <= 1e-9,
        format!("L-tromino kappa {k}"),
    )
}

fn run(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_boxprompt"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

fn pipeline(dir: &Path, count: usize) -> Result<(), String> {
    run(
        dir,
        &[
            "synth",
            "--preset",
            "mbo",
            "--count",
            &count.to_string(),
            "--seed",
            "0",
            "--out",
            "scenes",
        ],
    )?;
    for sub in ["prompts", "refined", "logs"] {
        std::fs::create_dir(dir.join(sub)).map_err(|e| e.to_string())?;
    }
    for i in 0..count {
        let name = format!("scene_{i:04}");
        let image = format!("scenes/images/{name}.png");
        run(
            dir,
            &[
                "cfpg",
                "--image",
                &image,
                "--boxes",
                &format!("scenes/boxes/{name}.json"),
                "--out",
                &format!("prompts/{name}.json"),
            ],
        )?;
        run(
            dir,
            &[
                "refine",
                "--image",
                &image,
                "--mask",
                &format!("scenes/coarse/{name}.png"),
                "--out",
                &format!("refined/{name}.png"),
                "--log",
                &format!("logs/{name}.json"),
            ],
        )?;
    }
    run(
        dir,
        &[
            "eval",
            "--pred",
            "refined",
            "--gt",
            "scenes/masks",
            "--out",
            "report.json",
        ],
    )
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for d in [a.path(), b.path()] {
        if let Err(e) = pipeline(d, 8) {
            return outcome(false, e);
        }
    }
    let (fa, fb) = (files_under(a.path()), files_under(b.path()));
    if fa != fb {
        return outcome(false, "runs produced different file sets");
    }
    for f in &fa {
        if std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap() {
            return outcome(false, format!("{} differs", f.display()));
        }
    }
    outcome(
        true,
        format!("{} files byte-identical across two runs", fa.len()),
    )
}

fn performance() -> Outcome {
    let spec = SceneSpec {
        width: 512,
        height: 512,
        shape: Shape::Ellipse {
            semi_major: 150.0,
            semi_minor: 90.0,
            angle_deg: 30.0,
        },
        center: None,
        object_color: [190.0, 170.0, 150.0],
        object_noise: 10.0,
        background_color: [70.0, 90.0, 80.0],
        background_noise: 12.0,
        gradient: (25.0, -10.0),
        distractors: 3,
        jitter: 0.15,
        seed: 0,
    };
    let scene = generate(&spec).unwrap();
    let coarse = corrupt_mask(&scene.gt_mask, 3, 0.05, 0).unwrap();
    let start = Instant::now();
    let p = generate_point(&scene.image, &scene.jittered_box, &CfpgConfig::default()).unwrap();
    let cfpg_time = start.elapsed();
    let out = refine_mask(&scene.image, &coarse, &MboConfig::default()).unwrap();
    let total = start.elapsed();
    let (x, y) = p.pixel();
    let gained =
        iou(&out.mask, &scene.gt_mask).unwrap().iou > iou(&coarse, &scene.gt_mask).unwrap().iou;
    within(
        Duration::from_secs(5),
        total,
        outcome(
            scene.gt_mask.get(x, y) && gained,
            format!(
                "512x512: point {:?}, {:.2?} CFPG, {total:.2?} total",
                (x, y),
                cfpg_time
            ),
        ),
    )
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("distance transform exactness", 10, distance_exact),
        ("max-flow correctness and duality", 30, max_flow_correct),
        ("k-means optimality", 5, kmeans_optimal),
        ("EM monotonicity", 60, em_monotone),
        ("point generator benchmark", 60, cfpg_benchmark),
        ("mask refinement benchmark", 180, mbo_benchmark),
        ("metric exactness", 60, metrics_exact),
        ("convexity bounds", 60, convexity_bounds),
        ("pipeline determinism", 120, determinism),
        ("performance floor", 5, performance),
    ];
    let mut failed = 0;
    for (i, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        let o = within(Duration::from_secs(*limit), start.elapsed(), o);
        failed += usize::from(!o.ok);
        println!(
            "{} criterion {:>2} {name}: {} ({:.2?})",
            if o.ok { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
