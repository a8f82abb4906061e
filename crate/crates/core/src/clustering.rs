//! KMeans++ seeding and Lloyd iterations over colour vectors.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, Color, RasterImage};

pub const DEFAULT_MAX_ITER: usize = 50;
pub const DEFAULT_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Color>,
    /// Cluster index of every input pixel.
    pub assignment: Vec<usize>,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    /// Inertia after the initial assignment and after every Lloyd step.
    pub inertia_trace: Vec<f64>,
}

impl ClusterModel {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

pub(crate) fn sq_dist(a: &Color, b: &Color) -> f64 {
    let d0 = a[0] - b[0];
    let d1 = a[1] - b[1];
    let d2 = a[2] - b[2];
    d0 * d0 + d1 * d1 + d2 * d2
}

fn color_key(c: &Color) -> [u64; 3] {
    [c[0].to_bits(), c[1].to_bits(), c[2].to_bits()]
}

/// Distinct colours in order of first appearance, stopping once `limit` are found.
fn distinct_colors(pixels: &[Color], limit: usize) -> Vec<Color> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for p in pixels {
        if seen.insert(color_key(p)) {
            out.push(*p);
            if out.len() >= limit {
                break;
            }
        }
    }
    out
}

/// Index of the nearest centroid; ties go to the lowest index.
fn nearest(p: &Color, centroids: &[Color]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

/// D²-weighted KMeans++ seeding.
pub fn kmeans_pp_init(pixels: &[Color], k: usize, seed: u64) -> Result<Vec<Color>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let distinct = distinct_colors(pixels, k).len();
    if distinct < k {
        return Err(Error::DegenerateInput(format!(
            "{distinct} distinct colours cannot seed {k} clusters"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = Vec::with_capacity(k);
    centroids.push(pixels[rng.random_range(0..pixels.len())]);

    let mut d2: Vec<f64> = pixels.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        // total > 0 because at least one distinct colour is still unpicked.
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            acc += w;
            pick = Some(i);
            if acc > target {
                break;
            }
        }
        let c = pixels[pick.expect("positive D² mass")];
        for (d, p) in d2.iter_mut().zip(pixels) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// KMeans++ initialisation followed by Lloyd iterations.
///
/// When the data holds fewer than `k` distinct colours the distinct colours
/// seed the first clusters and the rest duplicate the first centroid, so a
/// uniform input yields identical centroids with every pixel in cluster 0.
/// No Lloyd step runs in that case.
/// A cluster that empties during Lloyd is re-seeded at the pixel farthest
/// from its current centroid.
pub fn kmeans_fit(
    pixels: &[Color],
    k: usize,
    seed: u64,
    max_iter: usize,
    tol: f64,
) -> Result<ClusterModel> {
    if k == 0 || max_iter == 0 {
        return Err(Error::InvalidParameter(
            "k and max_iter must be at least 1".into(),
        ));
    }
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} < 0")));
    }
    if pixels.is_empty() {
        return Err(Error::EmptyInput("no pixels to cluster".into()));
    }

    let (mut centroids, degenerate) = match kmeans_pp_init(pixels, k, seed) {
        Ok(c) => (c, false),
        Err(Error::DegenerateInput(_)) => {
            let mut c = distinct_colors(pixels, k);
            c.resize(k, c[0]);
            (c, true)
        }
        Err(e) => return Err(e),
    };

    let mut assignment = vec![0usize; pixels.len()];
    let mut dists = vec![0.0; pixels.len()];
    let assign = |centroids: &[Color], assignment: &mut [usize], dists: &mut [f64]| -> f64 {
        let mut inertia = 0.0;
        for ((p, a), d) in pixels
            .iter()
            .zip(assignment.iter_mut())
            .zip(dists.iter_mut())
        {
            let (j, dj) = nearest(p, centroids);
            *a = j;
            *d = dj;
            inertia += dj;
        }
        inertia
    };

    let mut inertia = assign(&centroids, &mut assignment, &mut dists);
    let mut trace = vec![inertia];
    // Every colour already sits on its own centroid.
    let iterations = if degenerate { 0 } else { max_iter };

    for _ in 0..iterations {
        let mut sums = vec![[0.0; 3]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in pixels.iter().zip(&assignment) {
            counts[a] += 1;
            for c in 0..3 {
                sums[a][c] += p[c];
            }
        }

        let mut next = centroids.clone();
        for j in 0..k {
            if counts[j] > 0 {
                let n = counts[j] as f64;
                next[j] = [sums[j][0] / n, sums[j][1] / n, sums[j][2] / n];
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let mut far = 0;
                for i in 1..pixels.len() {
                    if dists[i] > dists[far] {
                        far = i;
                    }
                }
                next[j] = pixels[far];
                dists[far] = 0.0;
            }
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        inertia = assign(&centroids, &mut assignment, &mut dists);
        trace.push(inertia);
        if shift < tol {
            break;
        }
    }

    Ok(ClusterModel {
        k,
        centroids,
        assignment,
        inertia,
        inertia_trace: trace,
    })
}

/// Converts a two-cluster labeling of `roi` into a foreground map.
///
/// The foreground cluster is the one with the larger share of its members in
/// the central 50% x 50% window; ties go to the smaller cluster, then to
/// cluster 0.
pub fn binarize_roi(roi: &RasterImage, model: &ClusterModel) -> Result<BinaryMask> {
    if model.k != 2 {
        return Err(Error::InvalidParameter(format!(
            "binarization needs k = 2, got {}",
            model.k
        )));
    }
    if model.assignment.len() != roi.len() {
        return Err(Error::InvalidParameter(format!(
            "assignment covers {} pixels, ROI has {}",
            model.assignment.len(),
            roi.len()
        )));
    }

    let (w, h) = roi.dims();
    let (cx0, cx1) = (w / 4, w - w / 4);
    let (cy0, cy1) = (h / 4, h - h / 4);
    let mut members = [0u64; 2];
    let mut central = [0u64; 2];
    for y in 0..h {
        for x in 0..w {
            let a = model.assignment[y as usize * w as usize + x as usize];
            members[a] += 1;
            if (cx0..cx1).contains(&x) && (cy0..cy1).contains(&y) {
                central[a] += 1;
            }
        }
    }

    // central[j] / members[j], compared exactly; an empty cluster scores 0.
    let frac = |j: usize| (central[j], members[j].max(1));
    let (a0, b0) = frac(0);
    let (a1, b1) = frac(1);
    let fg = match (a1 * b0).cmp(&(a0 * b1)) {
        std::cmp::Ordering::Greater => 1,
        std::cmp::Ordering::Less => 0,
        std::cmp::Ordering::Equal => {
            if members[1] < members[0] {
                1
            } else {
                0
            }
        }
    };

    BinaryMask::from_bits(w, h, model.assignment.iter().map(|&a| a == fg).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gray(v: f64) -> Color {
        [v, v, v]
    }

    /// Minimum inertia over every 2-partition, by enumeration.
    fn best_two_partition(points: &[Color]) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for bits in 1u32..(1 << n) - 1 {
            let mut cost = 0.0;
            for side in [true, false] {
                let members: Vec<&Color> = (0..n)
                    .filter(|&i| ((bits >> i) & 1 == 1) == side)
                    .map(|i| &points[i])
                    .collect();
                let m = members.len() as f64;
                let mut mean = [0.0; 3];
                for p in &members {
                    for c in 0..3 {
                        mean[c] += p[c] / m;
                    }
                }
                cost += members.iter().map(|p| sq_dist(p, &mean)).sum::<f64>();
            }
            best = best.min(cost);
        }
        best
    }

    #[test]
    fn pp_init_picks_one_centroid_per_group() {
        let mut px = vec![gray(0.0); 50];
        px.extend(vec![gray(1.0); 50]);
        for seed in 0..20 {
            let mut c = kmeans_pp_init(&px, 2, seed).unwrap();
            c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
            assert_eq!(c, vec![gray(0.0), gray(1.0)]);
        }
    }

    #[test]
    fn pp_init_single_cluster_samples_a_pixel() {
        let px = vec![gray(0.1), gray(0.5), gray(0.9)];
        let c = kmeans_pp_init(&px, 1, 7).unwrap();
        assert_eq!(c.len(), 1);
        assert!(px.contains(&c[0]));
    }

    #[test]
    fn pp_init_rejects_too_few_distinct_colours() {
        let px = vec![gray(0.1), gray(0.5), gray(0.9), gray(0.5)];
        assert!(matches!(
            kmeans_pp_init(&px, 4, 0),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn two_value_data_converges_exactly() {
        let mut px = vec![gray(0.0); 4];
        px.extend(vec![gray(1.0); 4]);
        let m = kmeans_fit(&px, 2, 0, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let mut c = m.centroids.clone();
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert_eq!(c, vec![gray(0.0), gray(1.0)]);
        assert_eq!(m.inertia, 0.0);
    }

    #[test]
    fn gray_ramp_matches_enumerated_partition() {
        let px: Vec<Color> = [0.01, 0.02, 0.03, 0.10, 0.11, 0.12]
            .iter()
            .map(|&v| gray(v))
            .collect();
        let m = kmeans_fit(&px, 2, 0, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert_eq!(m.assignment[0], m.assignment[1]);
        assert_eq!(m.assignment[1], m.assignment[2]);
        assert_eq!(m.assignment[3], m.assignment[4]);
        assert_eq!(m.assignment[4], m.assignment[5]);
        assert_ne!(m.assignment[0], m.assignment[3]);
        let lo = m.centroids[m.assignment[0]][0];
        let hi = m.centroids[m.assignment[3]][0];
        assert!((lo - 0.02).abs() < 1e-12 && (hi - 0.11).abs() < 1e-12);
        assert!((m.inertia - best_two_partition(&px)).abs() < 1e-12);
    }

    #[test]
    fn uniform_data_puts_everything_in_cluster_zero() {
        let px = vec![gray(0.4); 30];
        let m = kmeans_fit(&px, 2, 3, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert_eq!(m.centroids, vec![gray(0.4), gray(0.4)]);
        assert!(m.assignment.iter().all(|&a| a == 0));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let px = vec![gray(0.4); 3];
        assert!(kmeans_fit(&px, 0, 0, 10, 1e-4).is_err());
        assert!(kmeans_fit(&px, 2, 0, 0, 1e-4).is_err());
        assert!(kmeans_fit(&px, 2, 0, 10, -1.0).is_err());
        assert!(kmeans_fit(&[], 2, 0, 10, 1e-4).is_err());
    }

    fn square_scene() -> RasterImage {
        RasterImage::from_fn(60, 60, |x, y| {
            if (20..40).contains(&x) && (20..40).contains(&y) {
                [230, 220, 210]
            } else {
                [20, 30, 25]
            }
        })
    }

    #[test]
    fn binarize_picks_the_central_square() {
        let roi = square_scene();
        let m = kmeans_fit(&roi.colors(), 2, 0, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let bin = binarize_roi(&roi, &m).unwrap();
        // Brute-force expectation: the square is exactly the bright pixels.
        let expected = BinaryMask::from_fn(60, 60, |x, y| roi.pixel(x, y)[0] > 128);
        assert_eq!(bin, expected);
    }

    #[test]
    fn binarize_split_halves_is_deterministic() {
        let roi = RasterImage::from_fn(60, 40, |x, _| if x < 30 { [0; 3] } else { [255; 3] });
        let m = kmeans_fit(&roi.colors(), 2, 0, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        let bin = binarize_roi(&roi, &m).unwrap();
        // Equal central share and equal size: cluster 0 wins.
        let expected =
            BinaryMask::from_bits(60, 40, m.assignment.iter().map(|&a| a == 0).collect()).unwrap();
        assert_eq!(bin, expected);
        assert_eq!(bin, binarize_roi(&roi, &m).unwrap());
        assert_eq!(bin.count(), 1200);
    }

    #[test]
    fn binarize_uniform_roi_is_all_foreground() {
        let roi = RasterImage::from_fn(16, 16, |_, _| [90, 90, 90]);
        let m = kmeans_fit(&roi.colors(), 2, 0, DEFAULT_MAX_ITER, DEFAULT_TOL).unwrap();
        assert!(binarize_roi(&roi, &m).unwrap().all());
    }

    proptest! {
        #[test]
        fn inertia_never_increases(
            raw in prop::collection::vec((0u8..=255, 0u8..=255, 0u8..=255), 4..200),
            k in 1usize..5,
            seed in 0u64..1000,
        ) {
            let px: Vec<Color> = raw
                .iter()
                .map(|&(r, g, b)| [f64::from(r) / 255.0, f64::from(g) / 255.0, f64::from(b) / 255.0])
                .collect();
            let m = kmeans_fit(&px, k, seed, DEFAULT_MAX_ITER, 0.0).unwrap();
            for w in m.inertia_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0));
            }
            for (p, &a) in px.iter().zip(&m.assignment) {
                let (j, _) = nearest(p, &m.centroids);
                prop_assert_eq!(j, a);
            }
            let again = kmeans_fit(&px, k, seed, DEFAULT_MAX_ITER, 0.0).unwrap();
            prop_assert_eq!(m, again);
        }
    }
}
