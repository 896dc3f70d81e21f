use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use funceq::models;
use funceq::picard::{picard_eval, picard_eval_many, picard_grid, PicardConfig};
use funceq::problem::validate;

static SERIAL: Mutex<()> = Mutex::new(());

/// fish(0.1, 0.3) at x = 0.5 with K = 25 from zero. Frozen after the recursive value and
/// grid mode (m = 100000, K = 200) agreed to 2.3e-11.
const FISH_GOLDEN: f64 = 0.07744366202463814;

#[test]
fn fish_golden_value() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let p = models::fish(0.1, 0.3).unwrap().problem;
    let v = picard_eval(&p, &PicardConfig::recursive(25), 0.5).unwrap();
    assert!((v - FISH_GOLDEN).abs() <= 1e-14, "{v:?}");
}

#[test]
fn recursive_and_grid_modes_agree_within_bound() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for m in [
        models::fish(0.1, 0.3).unwrap(),
        models::manufactured_smooth(0.2).unwrap(),
        models::manufactured_nonsmooth(0.3).unwrap(),
    ] {
        let report = validate(&m.problem, 1000).unwrap();
        let q = report.contraction_product;
        let bound = report.apriori_bound.unwrap();
        let (k, grid_size) = (14u32, 512usize);
        let grid = picard_grid(&m.problem, &PicardConfig::grid(k, grid_size)).unwrap();
        let xs: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..=1.0)).collect();
        let rec = picard_eval_many(&m.problem, &PicardConfig::recursive(k), &xs).unwrap();
        let allowed = q.powi(k as i32) * bound + 2.0 * bound / grid_size as f64;
        for (x, r) in xs.iter().zip(rec) {
            let g = grid.solution.eval(*x).unwrap();
            assert!((r - g).abs() <= allowed, "{} at {x}: {r} vs {g}", m.problem.name);
        }
    }
}

#[test]
fn grid_updates_decay_geometrically() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    for m in [
        models::fish(0.1, 0.3).unwrap(),
        models::manufactured_smooth(0.2).unwrap(),
        models::manufactured_nonsmooth(0.45).unwrap(),
    ] {
        let q = validate(&m.problem, 1000).unwrap().contraction_product;
        let r = picard_grid(&m.problem, &PicardConfig::grid(40, 1024)).unwrap();
        let tail = &r.updates[20..];
        // c fitted as the smallest constant with update_k <= c q^k over the tail
        let c = tail
            .iter()
            .enumerate()
            .map(|(j, u)| u / q.powi(20 + j as i32))
            .fold(0.0, f64::max);
        assert!(c.is_finite());
        let first = r.updates[20] / q.powi(20);
        // the fitted constant is attained at the first tail point: the decay is at least geometric
        assert!(c <= first * (1.0 + 1e-9) + 1e-300, "{}: c {c} first {first}", m.problem.name);
    }
}

#[test]
fn recursive_cost_doubles_per_level() {
    let _serial = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let p = models::manufactured_smooth(0.2).unwrap().problem;
    let xs: Vec<f64> = (0..9).map(|j| j as f64 / 8.0).collect();
    let time = |k: u32| {
        let mut samples: Vec<f64> = (0..3)
            .map(|_| {
                let start = Instant::now();
                picard_eval_many(&p, &PicardConfig::recursive(k), &xs).unwrap();
                start.elapsed().as_secs_f64()
            })
            .collect();
        samples.sort_by(f64::total_cmp);
        samples[1]
    };
    let times: Vec<f64> = (10..=20).map(time).collect();
    for (k, w) in (10..).zip(times.windows(2)) {
        assert!(w[1] / w[0] >= 1.8, "K {k} -> {}: {:?}", k + 1, times);
    }
}
