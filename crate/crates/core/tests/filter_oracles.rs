//! Frame metrics checked against straightforward re-implementations.

use nudge_core::frame_pipeline::{laplacian_variance, ssim, FilterConfig, GrayImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    let data = (0..w * h).map(|_| rng.random::<u8>()).collect();
    GrayImage::new(w, h, data).unwrap()
}

fn at(img: &GrayImage, x: usize, y: usize) -> f64 {
    img.pixels()[y * img.width() + x] as f64
}

/// Convolves with the full 3x3 Laplacian kernel, then takes the mean squared deviation.
fn laplacian_oracle(img: &GrayImage) -> f64 {
    const K: [[f64; 3]; 3] = [[0.0, 1.0, 0.0], [1.0, -4.0, 1.0], [0.0, 1.0, 0.0]];
    let mut responses = Vec::new();
    for y in 1..img.height() - 1 {
        for x in 1..img.width() - 1 {
            let mut acc = 0.0;
            for (dy, row) in K.iter().enumerate() {
                for (dx, k) in row.iter().enumerate() {
                    acc += k * at(img, x + dx - 1, y + dy - 1);
                }
            }
            responses.push(acc);
        }
    }
    let n = responses.len() as f64;
    let mean = responses.iter().sum::<f64>() / n;
    responses.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n
}

fn ssim_oracle(a: &GrayImage, b: &GrayImage) -> f64 {
    let c1 = (0.01 * 255.0f64).powi(2);
    let c2 = (0.03 * 255.0f64).powi(2);
    let xs: Vec<f64> = a.pixels().iter().map(|&p| p as f64).collect();
    let ys: Vec<f64> = b.pixels().iter().map(|&p| p as f64).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut vx = 0.0;
    let mut vy = 0.0;
    let mut cov = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
        cov += (x - mx) * (y - my);
    }
    vx /= n;
    vy /= n;
    cov /= n;
    ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
}

#[test]
fn laplacian_variance_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1a9);
    for _ in 0..100 {
        let img = random_image(&mut rng, 9, 9);
        let got = laplacian_variance(&img).unwrap();
        let want = laplacian_oracle(&img);
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }
}

#[test]
fn ssim_matches_direct_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x551);
    let cfg = FilterConfig::default();
    for i in 0..100 {
        let a = random_image(&mut rng, 16, 16);
        // mix in correlated pairs so the high-similarity range is covered too
        let b = if i % 2 == 0 {
            random_image(&mut rng, 16, 16)
        } else {
            let noise: Vec<u8> = a
                .pixels()
                .iter()
                .map(|&p| p.saturating_add(rng.random_range(0..8)))
                .collect();
            GrayImage::new(16, 16, noise).unwrap()
        };
        let got = ssim(&a, &b, &cfg).unwrap();
        let want = ssim_oracle(&a, &b);
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }
}

#[test]
fn degenerate_images() {
    let flat = GrayImage::filled(12, 12, 77).unwrap();
    assert_eq!(laplacian_variance(&flat).unwrap(), 0.0);
    assert_eq!(ssim(&flat, &flat, &FilterConfig::default()).unwrap(), 1.0);
}
