use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfmap_core::{
    build_local_frame, cap_mask, dilate, fit_plane_pca, largest_circle_mask, roi_mask, triangle_mask, BinaryMask,
    GridSpec, LocalFrame, MaskFrame, MaskWarning, Plane, Vec3,
};

/// Test coordinates of grid point `(x, y)` and of measurement points,
/// computed from first principles.
enum Coords {
    Xy,
    Local(Plane, LocalFrame),
}

impl Coords {
    fn cell(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            Coords::Xy => (x, y),
            Coords::Local(plane, frame) => {
                let n = plane.normal;
                let z = (plane.offset - n.x * x - n.y * y) / n.z;
                let d = Vec3::new(x, y, z) - frame.origin;
                (d.dot(&frame.x_axis()), d.dot(&frame.y_axis()))
            }
        }
    }

    fn point(&self, p: &Vec3) -> (f64, f64) {
        match self {
            Coords::Xy => (p.x, p.y),
            Coords::Local(plane, frame) => {
                let d = plane.project(p) - frame.origin;
                (d.dot(&frame.x_axis()), d.dot(&frame.y_axis()))
            }
        }
    }

    fn frame(&self) -> MaskFrame<'_> {
        match self {
            Coords::Xy => MaskFrame::InertialXy,
            Coords::Local(plane, frame) => MaskFrame::Local { plane, frame },
        }
    }
}

fn oracle_mask(spec: &GridSpec, coords: &Coords, inside: impl Fn(f64, f64) -> bool) -> BinaryMask {
    BinaryMask::from_fn(*spec, |i, j| {
        let (u, v) = coords.cell(spec.x(i), spec.y(j));
        inside(u, v)
    })
}

/// Barycentric point-in-triangle test on a closed triangle; signs are
/// compared against the orientation instead of dividing.
fn in_triangle(t: &[(f64, f64); 3], u: f64, v: f64) -> bool {
    let [a, b, c] = *t;
    let det = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    let l1 = (b.0 - u) * (c.1 - v) - (c.0 - u) * (b.1 - v);
    let l2 = (c.0 - u) * (a.1 - v) - (a.0 - u) * (c.1 - v);
    let l3 = (a.0 - u) * (b.1 - v) - (b.0 - u) * (a.1 - v);
    let s = det.signum();
    l1 * s >= 0.0 && l2 * s >= 0.0 && l3 * s >= 0.0
}

fn chebyshev_dilation(mask: &BinaryMask, steps: usize) -> BinaryMask {
    let set: Vec<(usize, usize)> = mask.iter_set().collect();
    BinaryMask::from_fn(*mask.spec(), |i, j| {
        set.iter().any(|&(a, b)| a.abs_diff(i) <= steps && b.abs_diff(j) <= steps)
    })
}

fn diff(a: &BinaryMask, b: &BinaryMask) -> Vec<(usize, usize)> {
    let spec = a.spec();
    (0..spec.ny)
        .flat_map(|j| (0..spec.nx).map(move |i| (i, j)))
        .filter(|&(i, j)| a.get(i, j) != b.get(i, j))
        .collect()
}

struct Config {
    spec: GridSpec,
    points: Vec<Vec3>,
    coords: Coords,
}

/// Random grid and points; points may fall outside the grid to exercise
/// clipping. Every other configuration uses the local plane frame.
fn random_config(rng: &mut ChaCha8Rng, count: usize, local: bool) -> Config {
    let nx = rng.random_range(20..60);
    let ny = rng.random_range(15..50);
    let step = rng.random_range(0.5..2.0);
    let (x0, y0) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
    let spec = GridSpec::new(x0, x0 + nx as f64 * step, y0, y0 + ny as f64 * step, nx, ny).unwrap();
    loop {
        let (cx, cy) = (
            x0 + rng.random_range(-0.2..1.2) * nx as f64 * step,
            y0 + rng.random_range(-0.2..1.2) * ny as f64 * step,
        );
        let extent = rng.random_range(3.0..25.0);
        let points: Vec<Vec3> = (0..count)
            .map(|_| {
                Vec3::new(
                    cx + rng.random_range(-extent..extent),
                    cy + rng.random_range(-extent..extent),
                    rng.random_range(-10.0..10.0),
                )
            })
            .collect();
        let coords = if local {
            let Ok(plane) = fit_plane_pca(&points) else { continue };
            if plane.normal.z < 0.3 {
                continue;
            }
            let Ok(frame) = build_local_frame(&plane, &points[0]) else { continue };
            Coords::Local(plane, frame)
        } else {
            Coords::Xy
        };
        return Config { spec, points, coords };
    }
}

#[test]
fn triangle_matches_barycentric_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in 0..100 {
        let c = random_config(&mut rng, 3, k % 2 == 1);
        let built = triangle_mask(&c.spec, &c.points, c.coords.frame()).unwrap();
        assert_eq!(built.warning, None);
        let t = [c.coords.point(&c.points[0]), c.coords.point(&c.points[1]), c.coords.point(&c.points[2])];
        let oracle = oracle_mask(&c.spec, &c.coords, |u, v| in_triangle(&t, u, v));
        assert_eq!(diff(&built.mask, &oracle), vec![], "config {k}");
    }
}

#[test]
fn triangle_boundaries_are_closed() {
    // integer vertices on a unit grid put many cells exactly on edges
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let spec = GridSpec::new(0.0, 30.0, 0.0, 30.0, 30, 30).unwrap();
    let mut on_edge = 0;
    for _ in 0..100 {
        let pts: Vec<Vec3> = (0..3)
            .map(|_| Vec3::new(rng.random_range(-3..33) as f64, rng.random_range(-3..33) as f64, 0.0))
            .collect();
        let built = triangle_mask(&spec, &pts, MaskFrame::InertialXy).unwrap();
        let t = [(pts[0].x, pts[0].y), (pts[1].x, pts[1].y), (pts[2].x, pts[2].y)];
        let det = (t[1].0 - t[0].0) * (t[2].1 - t[0].1) - (t[2].0 - t[0].0) * (t[1].1 - t[0].1);
        if det == 0.0 {
            assert_eq!(built.warning, Some(MaskWarning::DegenerateTriangle));
            assert!(built.mask.is_clear());
            continue;
        }
        let oracle = oracle_mask(&spec, &Coords::Xy, |u, v| in_triangle(&t, u, v));
        assert_eq!(diff(&built.mask, &oracle), vec![]);
        on_edge += oracle
            .iter_set()
            .filter(|&(i, j)| {
                let (u, v) = (i as f64, j as f64);
                [(0, 1), (1, 2), (2, 0)].iter().any(|&(a, b)| {
                    (t[b].0 - t[a].0) * (v - t[a].1) - (t[b].1 - t[a].1) * (u - t[a].0) == 0.0
                })
            })
            .count();
    }
    assert!(on_edge > 100, "only {on_edge} boundary cells exercised");
}

#[test]
fn roi_matches_box_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k in 0..100 {
        let c = random_config(&mut rng, 3 + k % 4, k % 2 == 1);
        let m = roi_mask(&c.spec, &c.points, c.coords.frame()).unwrap();
        let pc: Vec<_> = c.points.iter().map(|p| c.coords.point(p)).collect();
        let lo_u = pc.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
        let hi_u = pc.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
        let lo_v = pc.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let hi_v = pc.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let oracle = oracle_mask(&c.spec, &c.coords, |u, v| u >= lo_u && u <= hi_u && v >= lo_v && v <= hi_v);
        assert_eq!(diff(&m, &oracle), vec![], "config {k}");
    }
}

#[test]
fn largest_circle_matches_disk_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for k in 0..100 {
        let c = random_config(&mut rng, 3 + k % 4, k % 2 == 1);
        let m = largest_circle_mask(&c.spec, &c.points, c.coords.frame()).unwrap();
        let pc: Vec<_> = c.points.iter().map(|p| c.coords.point(p)).collect();
        let n = pc.len() as f64;
        let cu = pc.iter().map(|p| p.0).sum::<f64>() / n;
        let cv = pc.iter().map(|p| p.1).sum::<f64>() / n;
        let r2 = pc.iter().map(|p| (p.0 - cu).powi(2) + (p.1 - cv).powi(2)).fold(0.0, f64::max);
        let oracle = oracle_mask(&c.spec, &c.coords, |u, v| (u - cu).powi(2) + (v - cv).powi(2) <= r2);
        assert_eq!(diff(&m, &oracle), vec![], "config {k}");
    }
}

#[test]
fn cap_matches_disk_union_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..100 {
        let c = random_config(&mut rng, 3 + k % 4, k % 2 == 1);
        let radius = rng.random_range(1.0..8.0);
        let m = cap_mask(&c.spec, &c.points, radius, c.coords.frame()).unwrap();
        let pc: Vec<_> = c.points.iter().map(|p| c.coords.point(p)).collect();
        let oracle = oracle_mask(&c.spec, &c.coords, |u, v| {
            pc.iter().any(|p| ((u - p.0).powi(2) + (v - p.1).powi(2)).sqrt() <= radius)
        });
        assert_eq!(diff(&m, &oracle), vec![], "config {k}");
    }
}

#[test]
fn dilation_matches_chebyshev_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for k in 0..100 {
        let spec = GridSpec::new(0.0, 30.0, 0.0, 20.0, rng.random_range(5..30), rng.random_range(5..20)).unwrap();
        let density = rng.random_range(0.0..0.1);
        let m = BinaryMask::from_fn(spec, |_, _| rng.random_bool(density));
        let steps = rng.random_range(0..5);
        assert_eq!(diff(&dilate(&m, steps), &chebyshev_dilation(&m, steps)), vec![], "config {k}");
    }
}

#[test]
fn masks_are_independent_of_point_order() {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let c = random_config(&mut rng, 3, false);
        let base = triangle_mask(&c.spec, &c.points, MaskFrame::InertialXy).unwrap().mask;
        for perm in perms {
            let q: Vec<Vec3> = perm.iter().map(|&k| c.points[k]).collect();
            assert_eq!(triangle_mask(&c.spec, &q, MaskFrame::InertialXy).unwrap().mask, base);
            assert_eq!(
                roi_mask(&c.spec, &q, MaskFrame::InertialXy).unwrap(),
                roi_mask(&c.spec, &c.points, MaskFrame::InertialXy).unwrap()
            );
            assert_eq!(
                cap_mask(&c.spec, &q, 4.0, MaskFrame::InertialXy).unwrap(),
                cap_mask(&c.spec, &c.points, 4.0, MaskFrame::InertialXy).unwrap()
            );
        }
    }
}

#[test]
fn local_triangle_is_independent_of_which_point_fixes_the_axes() {
    // reordering changes e_x, which rotates the test coordinates in-plane;
    // membership is geometric and must not change
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let c = random_config(&mut rng, 3, true);
        let Coords::Local(plane, frame) = &c.coords else { unreachable!() };
        let base = triangle_mask(&c.spec, &c.points, MaskFrame::Local { plane, frame }).unwrap().mask;
        for perm in [[1, 2, 0], [2, 0, 1], [1, 0, 2]] {
            let q: Vec<Vec3> = perm.iter().map(|&k| c.points[k]).collect();
            let frame_q = build_local_frame(plane, &q[0]).unwrap();
            let m = triangle_mask(&c.spec, &q, MaskFrame::Local { plane, frame: &frame_q }).unwrap().mask;
            assert_eq!(diff(&m, &base), vec![]);
        }
    }
}

#[test]
fn containment_between_mask_kinds() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for k in 0..50 {
        let c = random_config(&mut rng, 3, k % 2 == 1);
        let f = c.coords.frame();
        let tri = triangle_mask(&c.spec, &c.points, f).unwrap().mask;
        let roi = roi_mask(&c.spec, &c.points, f).unwrap();
        let circle = largest_circle_mask(&c.spec, &c.points, f).unwrap();
        assert!(tri.is_subset_of(&roi));
        assert!(tri.is_subset_of(&circle));
        assert!(tri.is_subset_of(&dilate(&tri, 1)));
    }
}

#[test]
fn measurement_cells_are_covered() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let spec = GridSpec::new(0.0, 100.0, 0.0, 100.0, 50, 50).unwrap();
    for _ in 0..50 {
        let pts: Vec<Vec3> = (0..3)
            .map(|_| Vec3::new(rng.random_range(20.0..80.0), rng.random_range(20.0..80.0), 0.0))
            .collect();
        let cap = cap_mask(&spec, &pts, 5.0, MaskFrame::InertialXy).unwrap();
        let circle = dilate(&largest_circle_mask(&spec, &pts, MaskFrame::InertialXy).unwrap(), 1);
        for p in &pts {
            let (i, j) = spec.coord_to_nearest_index(p.x, p.y).unwrap();
            assert!(cap.get(i, j) && circle.get(i, j));
        }
    }
}

#[test]
fn points_outside_the_grid_clip_cleanly() {
    let spec = GridSpec::new(0.0, 10.0, 0.0, 10.0, 10, 10).unwrap();
    let far = [Vec3::new(100.0, 100.0, 0.0), Vec3::new(120.0, 100.0, 0.0), Vec3::new(100.0, 130.0, 0.0)];
    assert!(triangle_mask(&spec, &far, MaskFrame::InertialXy).unwrap().mask.is_clear());
    assert!(cap_mask(&spec, &far, 5.0, MaskFrame::InertialXy).unwrap().is_clear());
    // a triangle covering the whole grid sets every cell
    let huge = [Vec3::new(-100.0, -100.0, 0.0), Vec3::new(300.0, -100.0, 0.0), Vec3::new(-100.0, 300.0, 0.0)];
    assert_eq!(triangle_mask(&spec, &huge, MaskFrame::InertialXy).unwrap().mask.count(), 100);
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dilation_composes(bits in prop::collection::vec(prop::bool::weighted(0.05), 24 * 17), a in 0usize..4, b in 0usize..4) {
        let spec = GridSpec::new(0.0, 24.0, 0.0, 17.0, 24, 17).unwrap();
        let m = BinaryMask::from_fn(spec, |i, j| bits[j * 24 + i]);
        let twice = dilate(&dilate(&m, a), b);
        prop_assert_eq!(twice, dilate(&m, a + b));
        prop_assert!(m.is_subset_of(&dilate(&m, a)));
    }

    #[test]
    fn dilation_is_monotone(bits in prop::collection::vec(prop::bool::weighted(0.05), 20 * 20), extra in prop::collection::vec(prop::bool::weighted(0.05), 20 * 20), s in 0usize..4) {
        let spec = GridSpec::new(0.0, 20.0, 0.0, 20.0, 20, 20).unwrap();
        let small = BinaryMask::from_fn(spec, |i, j| bits[j * 20 + i]);
        let large = BinaryMask::from_fn(spec, |i, j| bits[j * 20 + i] || extra[j * 20 + i]);
        prop_assert!(dilate(&small, s).is_subset_of(&dilate(&large, s)));
    }
}
