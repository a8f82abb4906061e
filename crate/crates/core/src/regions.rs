//! Region statistics over watershed labels: area, convexity and centroid.

use std::collections::BTreeMap;

use crate::raster::{BoundingBox, PointPrompt};
use crate::watershed::LabelMap;

pub const MIN_AREA_THRESHOLD: f64 = 16.0;
pub const AREA_THRESHOLD_FRACTION: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct RegionStats {
    pub label: i32,
    pub area: u64,
    /// Area of the convex hull of the member pixels' corner points.
    pub hull_area: f64,
    /// `area / hull_area`, in `(0, 1]`.
    pub convexity: f64,
    /// Mean of member pixel coordinates.
    pub centroid: (f64, f64),
    pub bbox: BoundingBox,
    pub pixels: Vec<(u32, u32)>,
}

impl RegionStats {
    pub fn from_pixels(label: i32, pixels: Vec<(u32, u32)>) -> Self {
        assert!(!pixels.is_empty(), "region must be nonempty");
        let (hull_area, convexity) = convexity(&pixels);
        let n = pixels.len() as f64;
        let (sx, sy) = pixels.iter().fold((0.0, 0.0), |(sx, sy), &(x, y)| {
            (sx + f64::from(x), sy + f64::from(y))
        });
        let mut bbox = BoundingBox::new(u32::MAX, u32::MAX, 0, 0);
        for &(x, y) in &pixels {
            bbox.x1 = bbox.x1.min(x);
            bbox.y1 = bbox.y1.min(y);
            bbox.x2 = bbox.x2.max(x + 1);
            bbox.y2 = bbox.y2.max(y + 1);
        }
        Self {
            label,
            area: pixels.len() as u64,
            hull_area,
            convexity,
            centroid: (sx / n, sy / n),
            bbox,
            pixels,
        }
    }
}

/// `max(16, 0.5% of the ROI area)`.
pub fn default_area_threshold(roi_area: u64) -> f64 {
    MIN_AREA_THRESHOLD.max(AREA_THRESHOLD_FRACTION * roi_area as f64)
}

/// One [`RegionStats`] per label `>= 1`, in label order.
pub fn connected_components(labels: &LabelMap) -> Vec<RegionStats> {
    let mut members: BTreeMap<i32, Vec<(u32, u32)>> = BTreeMap::new();
    for y in 0..labels.height() {
        for x in 0..labels.width() {
            let l = labels.get(x, y);
            if l >= 1 {
                members.entry(l).or_default().push((x, y));
            }
        }
    }
    members
        .into_iter()
        .map(|(label, px)| RegionStats::from_pixels(label, px))
        .collect()
}

fn cross(o: (i64, i64), a: (i64, i64), b: (i64, i64)) -> i64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull (counter-clockwise, no collinear points) by monotone chain.
pub(crate) fn convex_hull(mut pts: Vec<(i64, i64)>) -> Vec<(i64, i64)> {
    pts.sort_unstable();
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(i64, i64)> = Vec::with_capacity(2 * pts.len());
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Twice the signed shoelace area.
fn shoelace2(poly: &[(i64, i64)]) -> i64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum()
}

/// Hull area over every member pixel's four corners, and `area / hull_area`.
pub fn convexity(pixels: &[(u32, u32)]) -> (f64, f64) {
    // Only the leftmost and rightmost pixel of each row can contribute hull corners.
    let mut rows: BTreeMap<u32, (u32, u32)> = BTreeMap::new();
    for &(x, y) in pixels {
        let e = rows.entry(y).or_insert((x, x));
        e.0 = e.0.min(x);
        e.1 = e.1.max(x);
    }
    let mut corners = Vec::with_capacity(rows.len() * 4);
    for (&y, &(lo, hi)) in &rows {
        let (y, lo, hi) = (i64::from(y), i64::from(lo), i64::from(hi));
        corners.extend([(lo, y), (lo, y + 1), (hi + 1, y), (hi + 1, y + 1)]);
    }
    let hull = convex_hull(corners);
    let hull_area = shoelace2(&hull).abs() as f64 / 2.0;
    (hull_area, pixels.len() as f64 / hull_area)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection<'a> {
    pub region: &'a RegionStats,
    /// No region exceeded the area threshold; the largest one was taken instead.
    pub fallback: bool,
}

/// Highest convexity among regions with `area > area_threshold`, ties to the
/// larger area and then the smaller label. Falls back to the largest region
/// when none passes; `None` only for an empty list.
pub fn select_region(stats: &[RegionStats], area_threshold: f64) -> Option<Selection<'_>> {
    let passing = stats
        .iter()
        .filter(|r| r.area as f64 > area_threshold)
        .max_by(|a, b| {
            a.convexity
                .total_cmp(&b.convexity)
                .then(a.area.cmp(&b.area))
                .then(b.label.cmp(&a.label))
        });
    if let Some(region) = passing {
        return Some(Selection {
            region,
            fallback: false,
        });
    }
    stats
        .iter()
        .max_by(|a, b| a.area.cmp(&b.area).then(b.label.cmp(&a.label)))
        .map(|region| Selection {
            region,
            fallback: true,
        })
}

/// Region centroid as a foreground point in the region's own frame.
pub fn centroid(region: &RegionStats) -> PointPrompt {
    PointPrompt::foreground(region.centroid.0, region.centroid.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rect(x0: u32, y0: u32, w: u32, h: u32) -> Vec<(u32, u32)> {
        (y0..y0 + h)
            .flat_map(|y| (x0..x0 + w).map(move |x| (x, y)))
            .collect()
    }

    fn stat(label: i32, area: u64, kappa: f64) -> RegionStats {
        RegionStats {
            label,
            area,
            hull_area: area as f64 / kappa,
            convexity: kappa,
            centroid: (0.0, 0.0),
            bbox: BoundingBox::new(0, 0, 1, 1),
            pixels: vec![],
        }
    }

    /// Gift-wrapping hull over all four corners of every pixel, then shoelace.
    fn oracle_hull_area(pixels: &[(u32, u32)]) -> f64 {
        let mut pts: Vec<(i64, i64)> = pixels
            .iter()
            .flat_map(|&(x, y)| {
                let (x, y) = (i64::from(x), i64::from(y));
                [(x, y), (x + 1, y), (x, y + 1), (x + 1, y + 1)]
            })
            .collect();
        pts.sort_unstable();
        pts.dedup();
        let start = pts[0];
        let mut hull = vec![start];
        let mut cur = start;
        loop {
            let mut cand = if pts[0] == cur { pts[1] } else { pts[0] };
            for &p in &pts {
                if p == cur {
                    continue;
                }
                let c = cross(cur, cand, p);
                let farther = (p.0 - cur.0).pow(2) + (p.1 - cur.1).pow(2)
                    > (cand.0 - cur.0).pow(2) + (cand.1 - cur.1).pow(2);
                if c < 0 || (c == 0 && farther) {
                    cand = p;
                }
            }
            if cand == start {
                break;
            }
            hull.push(cand);
            cur = cand;
        }
        shoelace2(&hull).abs() as f64 / 2.0
    }

    #[test]
    fn components_count_areas() {
        let mut labels = vec![0; 10 * 10];
        for (x, y) in rect(0, 0, 4, 3) {
            labels[(y * 10 + x) as usize] = 1;
        }
        for (x, y) in rect(5, 2, 5, 6) {
            labels[(y * 10 + x) as usize] = 2;
        }
        labels[99] = -1;
        let stats = connected_components(&LabelMap::from_labels(10, 10, labels).unwrap());
        assert_eq!(
            stats.iter().map(|s| s.area).collect::<Vec<_>>(),
            vec![12, 30]
        );
        assert!(connected_components(&LabelMap::from_labels(3, 3, vec![0; 9]).unwrap()).is_empty());
    }

    #[test]
    fn rectangle_is_fully_convex() {
        let s = RegionStats::from_pixels(1, rect(3, 2, 4, 6));
        assert_eq!(s.area, 24);
        assert_eq!(s.hull_area, 24.0);
        assert_eq!(s.convexity, 1.0);
    }

    #[test]
    fn l_tromino_convexity() {
        let (hull, kappa) = convexity(&[(0, 0), (1, 0), (0, 1)]);
        assert_eq!(hull, 3.5);
        assert!((kappa - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn single_pixel_is_unit_square() {
        assert_eq!(convexity(&[(7, 9)]), (1.0, 1.0));
    }

    #[test]
    fn selection_prefers_convexity_over_area() {
        let stats = vec![stat(1, 100, 0.95), stat(2, 5000, 0.60)];
        let s = select_region(&stats, 16.0).unwrap();
        assert_eq!(s.region.label, 1);
        assert!(!s.fallback);
    }

    #[test]
    fn selection_falls_back_to_largest() {
        let stats = vec![stat(1, 10, 0.9)];
        let s = select_region(&stats, 16.0).unwrap();
        assert_eq!(s.region.label, 1);
        assert!(s.fallback);
        assert!(select_region(&[], 16.0).is_none());
    }

    #[test]
    fn selection_ties_go_to_larger_then_lower_label() {
        let stats = vec![stat(1, 40, 0.9), stat(2, 80, 0.9)];
        assert_eq!(select_region(&stats, 16.0).unwrap().region.label, 2);
        let stats = vec![stat(3, 80, 0.9), stat(2, 80, 0.9)];
        assert_eq!(select_region(&stats, 16.0).unwrap().region.label, 2);
    }

    #[test]
    fn centroids() {
        let c = centroid(&RegionStats::from_pixels(1, rect(0, 0, 3, 3)));
        assert_eq!((c.x, c.y), (1.0, 1.0));
        let c = centroid(&RegionStats::from_pixels(1, rect(0, 0, 4, 1)));
        assert_eq!((c.x, c.y), (1.5, 0.0));
        let c = centroid(&RegionStats::from_pixels(1, vec![(0, 0), (1, 0), (0, 1)]));
        assert!((c.x - 1.0 / 3.0).abs() < 1e-15 && (c.y - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn area_threshold_rule() {
        assert_eq!(default_area_threshold(100), 16.0);
        assert_eq!(default_area_threshold(10_000), 50.0);
    }

    fn ellipse(cx: f64, cy: f64, a: f64, b: f64, angle: f64) -> Vec<(u32, u32)> {
        let (s, c) = angle.sin_cos();
        (0..64u32)
            .flat_map(|y| (0..64u32).map(move |x| (x, y)))
            .filter(|&(x, y)| {
                let (dx, dy) = (f64::from(x) - cx, f64::from(y) - cy);
                let (u, v) = (c * dx + s * dy, -s * dx + c * dy);
                (u / a).powi(2) + (v / b).powi(2) <= 1.0
            })
            .collect()
    }

    proptest! {
        #[test]
        fn convexity_bounded_and_matches_oracle(
            pts in prop::collection::btree_set((0u32..20, 0u32..20), 1..60)
        ) {
            let pixels: Vec<(u32, u32)> = pts.into_iter().collect();
            let (hull, kappa) = convexity(&pixels);
            prop_assert_eq!(hull, oracle_hull_area(&pixels));
            prop_assert!(kappa > 0.0 && kappa <= 1.0);
        }

        #[test]
        fn solid_rectangles_have_unit_convexity(x in 0u32..50, y in 0u32..50, w in 1u32..30, h in 1u32..30) {
            prop_assert_eq!(convexity(&rect(x, y, w, h)).1, 1.0);
        }

        #[test]
        fn selection_is_scale_consistent(
            regions in prop::collection::vec(prop::collection::btree_set((0u32..12, 0u32..12), 17..80), 1..5)
        ) {
            let stats: Vec<RegionStats> = regions
                .iter()
                .enumerate()
                .map(|(i, px)| RegionStats::from_pixels(i as i32 + 1, px.iter().copied().collect()))
                .collect();
            let scaled: Vec<RegionStats> = regions
                .iter()
                .enumerate()
                .map(|(i, px)| {
                    let up = px
                        .iter()
                        .flat_map(|&(x, y)| [(2 * x, 2 * y), (2 * x + 1, 2 * y), (2 * x, 2 * y + 1), (2 * x + 1, 2 * y + 1)])
                        .collect();
                    RegionStats::from_pixels(i as i32 + 1, up)
                })
                .collect();
            let a = select_region(&stats, 16.0).unwrap();
            let b = select_region(&scaled, 16.0).unwrap();
            prop_assert_eq!(a.region.label, b.region.label);
            prop_assert!(!a.fallback && !b.fallback);
        }

        #[test]
        fn convex_centroid_lies_inside(
            cx in 20.0f64..44.0, cy in 20.0f64..44.0,
            a in 3.0f64..15.0, b in 3.0f64..15.0, angle in 0.0f64..std::f64::consts::PI,
        ) {
            let px = ellipse(cx, cy, a, b, angle);
            let r = RegionStats::from_pixels(1, px.clone());
            let p = centroid(&r).pixel();
            prop_assert!(px.contains(&p));
        }
    }
}
