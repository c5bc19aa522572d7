use conclab::extremal::Side;
use conclab::harness::{clopper_pearson, estimate_tail, exact_tail, ProductLaw, TestFunction, CI_LEVEL};
use conclab::measures::ScalarLaw;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn clopper_pearson_coverage() {
    let trials = 200u64;
    let batches = 1000;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for q in [0.01, 0.05, 0.1, 0.25, 0.5] {
        let mut covered = 0;
        for _ in 0..batches {
            let hits = (0..trials).filter(|_| rng.random::<f64>() < q).count() as u64;
            let (lo, hi) = clopper_pearson(hits, trials, CI_LEVEL).unwrap();
            if lo <= q && q <= hi {
                covered += 1;
            }
        }
        assert!(covered as f64 / batches as f64 >= 0.985, "q = {q}: {covered}/{batches}");
    }
}

#[test]
fn two_point_norm_tail_covered() {
    let (n, theta, alpha) = (20, 0.3, 1.7);
    let law = ProductLaw::iid(ScalarLaw::two_point(theta, alpha).unwrap(), n).unwrap();
    let f = TestFunction::EuclideanNorm;
    // Median count 6; the events are S ≥ 9 and S ≤ 4.
    let cases = [(Side::Upper, alpha * (9f64.sqrt() - 6f64.sqrt())), (Side::Lower, alpha * (6f64.sqrt() - 4f64.sqrt()))];
    for (side, t) in cases {
        let exact = exact_tail(&f, &law, t, side).unwrap().unwrap().estimate;
        assert!(exact > 0.05 && exact < 0.5);
        let reps = 1000;
        let covered = (0..reps)
            .filter(|&r| {
                let est = estimate_tail(&f, &law, t, side, 1000, 1_000 + r).unwrap();
                est.ci_low <= exact && exact <= est.ci_high
            })
            .count();
        assert!(covered >= 985, "{side:?}: {covered}/{reps}");
    }
}
