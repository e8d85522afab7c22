use std::io::Cursor;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use surfmap_core::sample::{read_jsonl, write_jsonl};
use surfmap_core::{
    fit_plane_pca, grid_from_snapshots, masked_map_update, snapshot, BinaryMask, CovarianceParams, Field, GridSpec,
    HeightGrid, KfParams, MapUpdater, Mapper, MapperConfig, MaskKind, MaskSpec, MeasurementSample, Pose, SampleOutcome,
    Snapshot, Vec3,
};

fn spec() -> GridSpec {
    GridSpec::new(0.0, 40.0, 0.0, 30.0, 20, 15).unwrap()
}

fn random_points(rng: &mut ChaCha8Rng) -> Vec<Vec3> {
    loop {
        let pts: Vec<Vec3> = (0..3)
            .map(|_| Vec3::new(rng.random_range(0.0..40.0), rng.random_range(0.0..30.0), rng.random_range(0.0..5.0)))
            .collect();
        if let Ok(plane) = fit_plane_pca(&pts) {
            if plane.normal.z > 0.3 {
                return pts;
            }
        }
    }
}

fn same_bits(a: &HeightGrid, b: &HeightGrid) -> bool {
    a.cells()
        .iter()
        .zip(b.cells())
        .all(|(x, y)| x.z_hat.to_bits() == y.z_hat.to_bits() && x.p_hat.to_bits() == y.p_hat.to_bits())
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn only_masked_cells_change(bits in prop::collection::vec(any::<bool>(), 20 * 15), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts = random_points(&mut rng);
        let plane = fit_plane_pca(&pts).unwrap();
        let mask = BinaryMask::from_fn(spec(), |i, j| bits[j * 20 + i]);
        let before = HeightGrid::new(spec(), 1.0, 1e6).unwrap();
        let mut after = before.clone();
        let stats = masked_map_update(&mut after, &plane, &pts, &mask, &CovarianceParams::default(), &KfParams::default()).unwrap();
        prop_assert_eq!(stats.cells_touched, mask.count());
        for j in 0..15 {
            for i in 0..20 {
                let (b, a) = (before.cell(i, j).unwrap(), after.cell(i, j).unwrap());
                let changed = b.p_hat.to_bits() != a.p_hat.to_bits() || b.z_hat.to_bits() != a.z_hat.to_bits();
                prop_assert_eq!(changed, mask.get(i, j), "cell ({}, {})", i, j);
            }
        }
        if let Some((lo, hi)) = stats.r_range {
            let p = CovarianceParams::default();
            prop_assert!(lo >= p.r_min && hi <= p.r_max && lo <= hi);
        }
    }

    #[test]
    fn pooled_update_equals_sequential(seed in any::<u64>(), workers in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let seq = MapUpdater::new(CovarianceParams::default(), KfParams::default(), 1).unwrap();
        let par = MapUpdater::new(CovarianceParams::default(), KfParams::default(), workers).unwrap();
        let mut a = HeightGrid::new(spec(), 0.0, 1e6).unwrap();
        let mut b = a.clone();
        for _ in 0..5 {
            let pts = random_points(&mut rng);
            let plane = fit_plane_pca(&pts).unwrap();
            let density = rng.random_range(0.0..1.0);
            let mask = BinaryMask::from_fn(spec(), |_, _| rng.random_bool(density));
            let sa = seq.apply(&mut a, &plane, &pts, &mask).unwrap();
            let sb = par.apply(&mut b, &plane, &pts, &mask).unwrap();
            prop_assert_eq!(sa, sb);
        }
        prop_assert!(same_bits(&a, &b));
    }
}

#[test]
fn empty_mask_is_a_no_op() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pts = random_points(&mut rng);
    let plane = fit_plane_pca(&pts).unwrap();
    let before = HeightGrid::new(spec(), 2.0, 5.0).unwrap();
    let mut grid = before.clone();
    let stats = masked_map_update(
        &mut grid,
        &plane,
        &pts,
        &BinaryMask::empty(spec()),
        &CovarianceParams::default(),
        &KfParams::default(),
    )
    .unwrap();
    assert_eq!(stats.cells_touched, 0);
    assert_eq!(stats.r_range, None);
    assert!(same_bits(&before, &grid));
}

#[test]
fn mask_shape_must_match_grid() {
    let pts = random_points(&mut ChaCha8Rng::seed_from_u64(5));
    let plane = fit_plane_pca(&pts).unwrap();
    let other = GridSpec::new(0.0, 40.0, 0.0, 30.0, 10, 15).unwrap();
    let mut grid = HeightGrid::new(spec(), 0.0, 1.0).unwrap();
    let r = masked_map_update(
        &mut grid,
        &plane,
        &pts,
        &BinaryMask::full(other),
        &CovarianceParams::default(),
        &KfParams::default(),
    );
    assert!(r.is_err());
}

fn sample_at(t: f64, pts: Vec<Vec3>) -> MeasurementSample {
    MeasurementSample {
        timestamp: t,
        pose: Pose::identity_at(Vec3::new(0.0, 0.0, 100.0)),
        points: pts,
    }
}

/// A sample stream sliding over a tilted plane.
fn stream(n: usize) -> Vec<MeasurementSample> {
    (0..n)
        .map(|k| {
            let s = 0.7 * k as f64;
            let pts = [(5.0, 5.0), (12.0, 7.0), (8.0, 13.0)]
                .iter()
                .map(|&(x, y)| {
                    let (x, y) = (x + s * 0.6, y + s * 0.3);
                    Vec3::new(x, y, 0.1 * x + 0.05 * y + 2.0)
                })
                .collect();
            sample_at(0.01 * k as f64, pts)
        })
        .collect()
}

fn run(samples: &[MeasurementSample], config: &MapperConfig) -> Mapper {
    let mut mapper = Mapper::new(HeightGrid::new(spec(), 0.0, 1e6).unwrap(), config).unwrap();
    for (k, s) in samples.iter().enumerate() {
        mapper.process(k + 1, s);
    }
    mapper
}

#[test]
fn replayed_stream_gives_identical_grid() {
    let samples = stream(40);
    let mut buf = Vec::new();
    write_jsonl(&mut buf, &samples).unwrap();
    let back = read_jsonl(Cursor::new(buf)).unwrap();
    assert_eq!(back, samples);
    let config = MapperConfig::default();
    let a = run(&samples, &config);
    let b = run(&back, &config);
    assert!(same_bits(a.grid(), b.grid()));
    assert_eq!(a.log().len(), b.log().len());
}

#[test]
fn samples_at_one_pose_update_once() {
    let one = stream(1).pop().unwrap();
    let samples = vec![one; 25];
    let mapper = run(&samples, &MapperConfig::default());
    assert_eq!(mapper.applied_updates(), 1);
    assert_eq!(mapper.log().len(), 1);
}

#[test]
fn touched_cells_match_the_mask() {
    let samples = stream(30);
    for kind in MaskKind::ALL {
        let config = MapperConfig {
            mask: MaskSpec { kind, ..MaskSpec::default() },
            ..MapperConfig::default()
        };
        let mapper = run(&samples, &config);
        assert!(mapper.applied_updates() > 3);
        for rec in mapper.log() {
            assert!(rec.stats.cells_touched > 0, "{kind:?}");
        }
    }
}

#[test]
fn degenerate_samples_are_skipped_and_logged() {
    let collinear = sample_at(0.0, vec![Vec3::new(1.0, 1.0, 0.0), Vec3::new(2.0, 2.0, 0.0), Vec3::new(3.0, 3.0, 0.0)]);
    let mut mapper = Mapper::new(HeightGrid::new(spec(), 0.0, 1e6).unwrap(), &MapperConfig::default()).unwrap();
    assert!(matches!(mapper.process(1, &collinear), SampleOutcome::Skipped(_)));
    assert_eq!(mapper.applied_updates(), 0);
    assert!(mapper.log()[0].csv_row().contains("skipped"));
    let cells = mapper.grid().cells();
    assert!(cells.iter().all(|c| c.z_hat == 0.0 && c.p_hat == 1e6));
}

#[test]
fn snapshots_round_trip_through_both_formats() {
    let mapper = run(&stream(20), &MapperConfig::default());
    let grid = mapper.grid();
    let dir = tempfile::tempdir().unwrap();
    for field in [Field::Height, Field::Covariance] {
        let snap = snapshot(grid, field);
        let mut csv = Vec::new();
        snap.write_csv(&mut csv).unwrap();
        let from_csv = Snapshot::read_csv(Cursor::new(csv)).unwrap();
        assert_eq!(from_csv.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
                   snap.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        let path = dir.path().join(format!("{}.bin", field.name()));
        snap.write_binary(&path).unwrap();
        assert_eq!(Snapshot::read_binary(&path).unwrap(), snap);
    }
    let back = grid_from_snapshots(&snapshot(grid, Field::Height), &snapshot(grid, Field::Covariance)).unwrap();
    assert!(same_bits(grid, &back));
}
