mod common;

use common::*;
use hybrid_splat::logit;
use hybrid_splat::raster::{brute_force_render, render, render_backward, GaussianSnapshot, RenderGrads, RenderOptions};
use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn max_abs_diff(a: &Array3<f64>, b: &Array3<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn tiled_render_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pose = camera(64, 64);
    for n in [1, 20, 200, 500] {
        let gs = random_gaussians(&mut rng, n, 1);
        let snap = GaussianSnapshot::from_gaussians(&gs, 1).unwrap();
        let opts = RenderOptions::default().with_background([0.2, 0.1, 0.0]);
        let fast = render(&snap, &pose, &opts).unwrap();
        let slow = brute_force_render(&snap, &pose, &opts).unwrap();
        let d = max_abs_diff(&fast.color, &slow.color);
        assert!(d <= 1e-5, "n = {n}: {d}");
        if n == 1 {
            assert_eq!(fast.color, slow.color);
            assert_eq!(fast.alpha, slow.alpha);
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let probes = rasterizer_probes(&mut rng, 12, 8);
    for (class, a, fd) in probes {
        assert!(rel_err(a, fd) <= 1e-3, "{class}: analytic {a} fd {fd}");
    }
}

#[test]
fn zero_upstream_gives_zero_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let gs = random_gaussians(&mut rng, 30, 1);
    let snap = GaussianSnapshot::from_gaussians(&gs, 1).unwrap();
    let pose = camera(32, 32);
    let g = render_backward(&snap, &pose, &RenderOptions::default(), &RenderGrads::color(Array3::zeros((32, 32, 3)))).unwrap();
    assert!(g.positions.iter().flatten().chain(g.covariances.iter().flatten()).all(|&v| v == 0.0));
    assert!(g.opacities.iter().chain(g.sh.iter().flatten()).all(|&v| v == 0.0));
}

#[test]
fn upstream_shape_mismatch_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let snap = GaussianSnapshot::from_gaussians(&random_gaussians(&mut rng, 3, 0), 0).unwrap();
    let pose = camera(32, 32);
    assert!(render_backward(&snap, &pose, &RenderOptions::default(), &RenderGrads::color(Array3::zeros((16, 32, 3)))).is_err());
    assert!(render_backward(&snap, &pose, &RenderOptions::default(), &RenderGrads::scalar(Array2::zeros((32, 32)))).is_err());
}

#[test]
fn red_opacity_gradient_is_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut g = random_gaussians(&mut rng, 1, 0);
    g[0].position = [0.0, 0.0, 2.0];
    g[0].sh[0] = [1.5, -1.8, -1.8];
    g[0].opacity_logit = logit(0.5);
    let snap = GaussianSnapshot::from_gaussians(&g, 0).unwrap();
    let pose = camera(32, 32);
    let mut up = Array3::zeros((32, 32, 3));
    up.slice_mut(ndarray::s![.., .., 0]).fill(1.0);
    let sg = render_backward(&snap, &pose, &RenderOptions::default(), &RenderGrads::color(up)).unwrap();
    assert!(sg.opacities[0] > 0.0);
}

#[test]
fn deterministic_across_thread_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let gs = random_gaussians(&mut rng, 300, 1);
    let snap = GaussianSnapshot::from_gaussians(&gs, 1).unwrap();
    let pose = camera(64, 48);
    let opts = RenderOptions::default();
    let up = RenderGrads::color(Array3::from_elem((48, 64, 3), 1.0));
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| (render(&snap, &pose, &opts).unwrap().color, render_backward(&snap, &pose, &opts, &up).unwrap()))
    };
    let (c1, g1) = run(1);
    let (c4, g4) = run(4);
    assert_eq!(c1, c4);
    assert_eq!(g1, g4);
}

#[test]
fn alpha_monotone_in_opacity() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut gs = random_gaussians(&mut rng, 60, 0);
    let pose = camera(32, 32);
    let opts = RenderOptions::default();
    let mut prev = render(&GaussianSnapshot::from_gaussians(&gs, 0).unwrap(), &pose, &opts).unwrap().alpha;
    for step in 0..10 {
        gs[7].opacity_logit += 0.5 + step as f64 * 0.1;
        let next = render(&GaussianSnapshot::from_gaussians(&gs, 0).unwrap(), &pose, &opts).unwrap().alpha;
        assert!(next.iter().zip(prev.iter()).all(|(a, b)| *a >= *b - 1e-15));
        prev = next;
    }
}

#[test]
fn ones_payload_reproduces_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let gs = random_gaussians(&mut rng, 150, 1);
    let snap = GaussianSnapshot::from_gaussians(&gs, 1).unwrap().with_payload(vec![1.0; 150]).unwrap();
    let out = render(&snap, &camera(40, 40), &RenderOptions::default().with_payload(true)).unwrap();
    assert_eq!(out.scalar.unwrap(), out.alpha);
}

#[test]
fn empty_pixels_show_background() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let gs = random_gaussians(&mut rng, 5, 0);
    let snap = GaussianSnapshot::from_gaussians(&gs, 0).unwrap();
    let bg = [0.3, 0.6, 0.9];
    let out = render(&snap, &camera(64, 64), &RenderOptions::default().with_background(bg)).unwrap();
    for ((y, x), &n) in out.contrib_count.indexed_iter() {
        if n == 0 {
            assert_eq!(out.alpha[[y, x]], 0.0);
            assert_eq!([out.color[[y, x, 0]], out.color[[y, x, 1]], out.color[[y, x, 2]]], bg);
        }
    }
}

#[test]
fn splat_weights_reproduce_payload_render() {
    use hybrid_splat::raster::splat_weights;
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let gs = random_gaussians(&mut rng, 120, 0);
    let payload: Vec<f64> = (0..120).map(|i| (i % 7) as f64 / 7.0).collect();
    let snap = GaussianSnapshot::from_gaussians(&gs, 0).unwrap().with_payload(payload.clone()).unwrap();
    let pose = camera(40, 36);
    let opts = RenderOptions::default().with_payload(true);
    let out = render(&snap, &pose, &opts).unwrap();
    let sw = splat_weights(&snap, &pose, &opts, 1).unwrap();
    assert_eq!(sw.len(), 40 * 36);
    for k in 0..sw.len() {
        let (y, x) = sw.pixels[k];
        assert!((sw.splat(k, &payload) - out.scalar.as_ref().unwrap()[[y, x]]).abs() < 1e-12);
        assert!((sw.alpha(k) - out.alpha[[y, x]]).abs() < 1e-12);
    }
    assert_eq!(splat_weights(&snap, &pose, &opts, 3).unwrap().len(), 14 * 12);
}
