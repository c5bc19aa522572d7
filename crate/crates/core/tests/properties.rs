use conclab::binomial::{self, BinomQuery};
use conclab::convex_distance::{dist_c, directional_lower_bound, PointSet};
use conclab::envelopes::{self, DominantTerm, EnvelopeParams};
use conclab::extremal::{ExtremalInstance, Side};
use conclab::harness::clopper_pearson;
use conclab::harness::suites::grid_golden_min;
use conclab::measures::{make_exp_power, make_two_point, ScalarLaw};
use conclab::talagrand::{choice_of_l, h_cost, min_basic, remark_bound};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn tails_decrease_in_threshold(n in 1u64..2000, theta in 0.001f64..0.999) {
        let mut prev = 0.0f64;
        for k in 0..=n.min(200) {
            let l = binomial::ln_tail(n, theta, k);
            prop_assert!(l <= prev + 1e-12);
            prev = l;
        }
    }

    #[test]
    fn pmf_sums_to_one(n in 1u64..500, theta in 0.001f64..0.999) {
        let s: f64 = (0..=n).map(|k| binomial::pmf(n, theta, k)).sum();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cdf_and_tail_complement(n in 1u64..3000, theta in 0.001f64..0.999, frac in 0.0f64..1.0) {
        let k = ((n as f64) * frac) as u64 + 1;
        let total = binomial::ln_tail(n, theta, k).exp() + binomial::ln_cdf(n, theta, k - 1).exp();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn chernoff_dominates_tail(n in 10u64..100_000, theta in 0.0001f64..0.5, excess in 0.0f64..3.0) {
        let k = ((n as f64 * theta) * (1.0 + excess)).ceil() as u64;
        prop_assume!(k <= n);
        let q = BinomQuery::new(n, theta, k).unwrap();
        prop_assert!(binomial::ln_chernoff_upper(q) >= binomial::ln_tail(n, theta, k) - 1e-9);
    }

    #[test]
    fn median_norm_sandwich(n in 1u64..5000, theta in 0.001f64..0.999, alpha in 0.1f64..10.0) {
        let inst = ExtremalInstance::with_alpha(n, theta, alpha).unwrap();
        let mean = n as f64 * theta;
        prop_assert!(inst.median_norm >= alpha * mean.floor().sqrt() * (1.0 - 1e-15));
        prop_assert!(inst.median_norm <= alpha * mean.ceil().sqrt() * (1.0 + 1e-15));
    }

    #[test]
    fn norm_tails_decrease_in_t(n in 10u64..3000, theta in 0.01f64..0.5, t1 in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let inst = ExtremalInstance::with_alpha(n, theta, 1.0).unwrap();
        for side in [Side::Upper, Side::Lower] {
            prop_assert!(inst.ln_norm_tail(t1 + dt, side) <= inst.ln_norm_tail(t1, side) + 1e-12);
        }
    }

    #[test]
    fn two_point_norm_at_most_k(theta in 1e-6f64..0.5, k in 0.1f64..10.0, p in 1.0f64..2.0) {
        let law = make_two_point(theta, k, p).unwrap();
        prop_assert!(law.psi_p_norm(p).unwrap().norm <= k * (1.0 + 1e-9));
    }

    #[test]
    fn truncation_preserves_mass(
        values in prop::collection::vec(-10i32..10, 1..8),
        level in 0.5f64..8.0,
    ) {
        let m = values.len() as i64;
        let atoms = values.iter().map(|&v| (v as f64, BigRational::new(BigInt::from(1), BigInt::from(m))));
        let law = ScalarLaw::finite(atoms).unwrap();
        let cut = law.truncate(level).unwrap();
        match cut {
            ScalarLaw::FiniteDiscrete(fd) => {
                prop_assert_eq!(fd.total_mass(), BigRational::from_integer(BigInt::from(1)));
                prop_assert!(fd.atoms().iter().all(|a| a.value.abs() <= level));
            }
            _ => prop_assert!(false, "finite law stays finite"),
        }
    }

    #[test]
    fn subgaussian_envelope_homogeneous(k in 0.1f64..10.0, s in 0.1f64..10.0, t in 0.01f64..50.0, n in 1.0f64..1e6) {
        let a = EnvelopeParams::new(k, 2.0, n).unwrap().with(envelopes::C, 0.3).unwrap();
        let b = EnvelopeParams::new(k * s, 2.0, n).unwrap().with(envelopes::C, 0.3).unwrap();
        let va = envelopes::ln_subgaussian_envelope(&a, t).unwrap();
        let vb = envelopes::ln_subgaussian_envelope(&b, t * s).unwrap();
        prop_assert!((va - vb).abs() <= 1e-12 * (1.0 + va.abs()));
    }

    #[test]
    fn envelopes_decrease_in_t(k in 0.1f64..5.0, p in 1.0f64..1.99, n in 2.0f64..1e6) {
        let sg = EnvelopeParams::new(k, 2.0, n).unwrap().with(envelopes::C, 0.5).unwrap();
        let pp = EnvelopeParams::new(k, p, n).unwrap().with(envelopes::C_P, 0.5).unwrap();
        let mut prev = (f64::INFINITY, f64::INFINITY);
        let mut flips = 0;
        let mut last_tag: Option<DominantTerm> = None;
        for i in 1..200 {
            let t = k * 0.05 * i as f64;
            let a = envelopes::ln_subgaussian_envelope(&sg, t).unwrap();
            let b = envelopes::psip_envelope(&pp, t).unwrap();
            prop_assert!(a <= prev.0 + 1e-12 && b.ln_sum <= prev.1 + 1e-12);
            prev = (a, b.ln_sum);
            if last_tag.is_some_and(|tag| tag != b.dominant) {
                flips += 1;
            }
            last_tag = Some(b.dominant);
        }
        prop_assert!(flips <= 1);
    }

    #[test]
    fn min_basic_matches_numeric(a in -5.0f64..5.0, gap in 0.0f64..6.0, c in 0.05f64..5.0) {
        let b = a - gap;
        let closed = min_basic(a, b, c).unwrap();
        let numeric = grid_golden_min(|l| -l * b - (1.0 - l) * a + c * (1.0 - l).powi(2));
        prop_assert!((closed.value - numeric).abs() < 1e-9);
        let l = closed.lambda_star;
        let at_star = -l * b - (1.0 - l) * a + c * (1.0 - l).powi(2);
        prop_assert!((at_star - closed.value).abs() < 1e-9);
    }

    #[test]
    fn h_cost_is_min_basic_and_remark_dominates(
        h_t in -3.0f64..3.0, up in 0.0f64..3.0, kappa in 0.1f64..3.0, dt in -2.0f64..2.0, extra in 1.0f64..4.0,
    ) {
        prop_assume!(dt != 0.0);
        let h_y = h_t + up;
        let h = h_cost(h_t, h_y, kappa, dt).unwrap();
        let mb = min_basic(h_y, h_t, kappa * dt * dt).unwrap().value;
        prop_assert!((h - mb).abs() < 1e-12 * (1.0 + h.abs()));
        let q = 4.0 * kappa * dt * dt * extra;
        prop_assert!(remark_bound(h_t, h_y, kappa, dt, q).unwrap() >= h - 1e-12);
    }

    #[test]
    fn choice_of_l_monotone(n in 1u64..1_000_000, d1 in 0.001f64..0.5, d2 in 0.001f64..0.5, k in 0.1f64..5.0) {
        let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        prop_assert!(choice_of_l(n, lo, k).unwrap() <= choice_of_l(n, hi, k).unwrap());
        prop_assert!(choice_of_l(n, lo, k).unwrap() <= choice_of_l(n + 1, lo, k).unwrap());
    }

    #[test]
    fn convex_distance_invariants(
        pts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 1..8),
        x in prop::collection::vec(-3.0f64..3.0, 3),
        dir in prop::collection::vec(0.01f64..1.0, 3),
    ) {
        let a = PointSet::new(pts.clone()).unwrap();
        let cert = dist_c(&x, &a).unwrap();
        cert.verify(&conclab::convex_distance::difference_set(&x, &a).unwrap(), 1e-9).unwrap();
        let nearest = pts
            .iter()
            .map(|y| y.iter().zip(&x).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt())
            .fold(f64::INFINITY, f64::min);
        prop_assert!(cert.distance <= nearest + 1e-9);
        prop_assert!(directional_lower_bound(&x, &a, &dir).unwrap() <= cert.distance + 1e-9);
        prop_assert_eq!(cert.distance == 0.0, a.contains(&x));
        prop_assert_eq!(dist_c(&pts[0], &a).unwrap().distance, 0.0);
        let mut rev = pts.clone();
        rev.reverse();
        let other = dist_c(&x, &PointSet::new(rev).unwrap()).unwrap();
        prop_assert!((other.distance - cert.distance).abs() < 1e-8 * (1.0 + cert.distance));
    }

    #[test]
    fn clopper_pearson_brackets_estimate(trials in 1u64..100_000, frac in 0.0f64..=1.0) {
        let hits = ((trials as f64) * frac).round() as u64;
        let (lo, hi) = clopper_pearson(hits, trials, 0.99).unwrap();
        let p = hits as f64 / trials as f64;
        prop_assert!(lo <= p + 1e-15 && p <= hi + 1e-15 && 0.0 <= lo && hi <= 1.0);
    }
}

/// Kolmogorov–Smirnov distance of the exponential-power sampler at fixed seeds.
#[test]
fn sampler_ks_statistic() {
    for (p, seed) in [(1.0, 1u64), (1.5, 2), (2.0, 3)] {
        let law = make_exp_power(p, 1.3).unwrap();
        let m = 20_000;
        let mut xs = law.sample(m, seed);
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = law.cdf(x);
                (f - i as f64 / m as f64).abs().max(((i + 1) as f64 / m as f64 - f).abs())
            })
            .fold(0.0f64, f64::max);
        assert!(d < 1.63 / (m as f64).sqrt(), "p = {p}: D = {d}");
    }
}
