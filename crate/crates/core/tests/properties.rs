use num_traits::{One, Zero};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use iet_core::accel::{accelerate_iem, balance_holds};
use iet_core::birkhoff::{
    birkhoff_sum, cascade, decompose_birkhoff, evaluate_decomposition, sum_operator, PiecewiseBV, Poly,
};
use iet_core::iem::{random_admissible, random_lengths};
use iet_core::num::{fmt_q, parse_q, q, qi};
use iet_core::rauzy::{inverse_step_combo, step_combo};
use iet_core::suspension::{random_tau, surface_summary};
use iet_core::{iterate, rauzy_step, CombinatorialData, Iem, IntMatrix, Q};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_iem(r: &mut ChaCha8Rng, d: usize, bits: u32) -> Iem {
    Iem::new(random_admissible(r, d), random_lengths(r, d, bits)).unwrap()
}

fn random_point(r: &mut ChaCha8Rng, t: &Iem) -> Q {
    t.total() * q(r.random_range(0..1 << 30), 1 << 30)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rationals_print_and_parse_back(n in -1_000_000i64..1_000_000, d in 1i64..1_000_000) {
        let x = q(n, d);
        prop_assert_eq!(parse_q(&fmt_q(&x)).unwrap(), x);
    }

    #[test]
    fn inverse_map_undoes_the_map(seed in any::<u64>(), d in 2usize..8) {
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 40);
        let inv = t.inverse();
        for _ in 0..20 {
            let x = random_point(&mut r, &t);
            let y = t.evaluate(&x).unwrap();
            prop_assert!(y >= Q::zero() && y < t.total());
            prop_assert_eq!(inv.evaluate(&y).unwrap(), x);
        }
    }

    #[test]
    fn omega_is_antisymmetric_and_translation_is_omega_lambda(seed in any::<u64>(), d in 2usize..9) {
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 32);
        let w = t.combo().omega();
        let neg: Vec<Vec<_>> = w.rows().into_iter().map(|r| r.into_iter().map(|x| -x).collect()).collect();
        prop_assert_eq!(w.transpose().rows(), neg);
        prop_assert_eq!(w.mul_vec_q(t.lengths()), t.delta());
    }

    #[test]
    fn rauzy_steps_are_unimodular_and_invertible(seed in any::<u64>(), d in 2usize..8) {
        let mut r = rng(seed);
        let mut t = random_iem(&mut r, d, 64);
        for _ in 0..30 {
            let Ok((next, arrow)) = rauzy_step(&t) else { break };
            prop_assert!(next.combo().is_admissible());
            prop_assert_eq!(arrow.v().det(), num_bigint::BigInt::one());
            prop_assert_eq!(arrow.v().mul_vec_q(next.lengths()), t.lengths().to_vec());
            prop_assert_eq!(&inverse_step_combo(next.combo(), arrow.eps).0, t.combo());
            prop_assert_eq!(&step_combo(t.combo(), arrow.eps).0, next.combo());
            t = next;
        }
    }

    #[test]
    fn induced_map_is_the_first_return(seed in any::<u64>(), d in 2usize..6) {
        // T⁽ⁿ⁾ is the first return of T to [0, λ⁽ⁿ⁾*)
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 48);
        let o = iterate(&t, 12);
        let lam = o.lambda_at(o.len()).unwrap();
        let tn = Iem::new(o.end_vertex().clone(), lam).unwrap();
        for _ in 0..10 {
            let x = random_point(&mut r, &tn);
            let mut y = t.evaluate(&x).unwrap();
            while y >= tn.total() {
                y = t.evaluate(&y).unwrap();
            }
            prop_assert_eq!(tn.evaluate(&x).unwrap(), y);
        }
    }

    #[test]
    fn accelerated_orbits_balance_and_preserve_omega(seed in any::<u64>(), d in 2usize..6) {
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 96);
        let a = accelerate_iem(&t, d - 1, 2 * d + 2, 100_000).unwrap();
        let w0 = t.combo().omega();
        for k in 0..=a.levels() {
            prop_assert_eq!(balance_holds(&a, k), Some(true));
            // ᵗQ Ω⁽⁰⁾ Q = Ω⁽ᵏ⁾
            let qk = a.q0(k);
            prop_assert_eq!(qk.transpose().mul(&w0).mul(qk), a.vertex(k).omega());
        }
        let gap = if d == 2 { 2 } else { 2 * d - 3 };
        for k in 0..a.levels().saturating_sub(gap) {
            prop_assert!(a.check_positivity(k).unwrap().positive);
        }
    }

    #[test]
    fn surface_bookkeeping(seed in any::<u64>(), d in 2usize..12) {
        let c = random_admissible(&mut rng(seed), d);
        let s = surface_summary(&c).unwrap();
        prop_assert_eq!(s.half_lengths.iter().sum::<usize>(), d - 1);
        prop_assert_eq!(d, 2 * s.genus + s.nu - 1);
        prop_assert_eq!(2 * s.genus - 2, s.singularities.iter().sum::<usize>());
        prop_assert_eq!(s.cycles.iter().map(Vec::len).sum::<usize>(), 2 * d - 2);
    }

    #[test]
    fn suspension_dynamics_keep_area(seed in any::<u64>(), d in 2usize..7) {
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 30);
        let Some((s, _)) = random_tau(&mut r, &t, 16, 10_000) else { return Ok(()) };
        let a = s.area();
        prop_assert!(a > Q::zero());
        let (n, eps) = s.step().unwrap();
        prop_assert_eq!(n.area(), a.clone());
        prop_assert_eq!(n.inverse_step().unwrap(), (s.clone(), eps));
        let f = s.flow_by_factor(&q(r.random_range(1..100), r.random_range(1..100))).unwrap();
        prop_assert_eq!(f.area(), a.clone());
        prop_assert_eq!(s.flow(0.0).unwrap(), s.clone());
        prop_assert_eq!(surface_summary(n.combo()).unwrap().genus, surface_summary(s.combo()).unwrap().genus);
    }

    #[test]
    fn special_sums_compose_and_conserve(seed in any::<u64>(), d in 2usize..6) {
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 64);
        let a = accelerate_iem(&t, d - 1, 2, 100_000).unwrap();
        // the cost is linear in the return times; skip the heavy tail of huge partial quotients
        prop_assume!(a.q0(2).sum_norm() < num_bigint::BigInt::from(20_000));
        let lam = a.lambda(0).unwrap();
        let polys = (0..d).map(|_| Poly::from_ints(&[r.random_range(-4..=4), r.random_range(-4..=4)])).collect();
        let f = PiecewiseBV::from_polys(&lam, polys);
        let s01 = sum_operator(&a, 0, 1, &f).unwrap();
        let s02 = sum_operator(&a, 0, 2, &f).unwrap();
        prop_assert_eq!(sum_operator(&a, 1, 2, &s01).unwrap(), s02.clone());
        prop_assert_eq!(s02.total_integral(), f.total_integral());
        prop_assert!(s02.variation() <= f.variation());
        let ones = PiecewiseBV::constants(&lam, &vec![qi(1); d]);
        let times: Vec<Q> = a.q0(2).column_sums().into_iter().map(Q::from_integer).collect();
        prop_assert_eq!(sum_operator(&a, 0, 2, &ones).unwrap(), PiecewiseBV::constants(&a.lambda(2).unwrap(), &times));
    }

    #[test]
    fn decomposition_matches_direct_sums(seed in any::<u64>(), d in 3usize..5, n in 1u64..3000) {
        let mut r = rng(seed);
        let t = random_iem(&mut r, d, 80);
        let a = accelerate_iem(&t, d - 1, 30, 100_000).unwrap();
        let c: Vec<Q> = (0..d).map(|_| qi(r.random_range(-9..=9))).collect();
        let f = PiecewiseBV::constants(t.lengths(), &c);
        let x = random_point(&mut r, &t);
        let terms = decompose_birkhoff(&a, &x, n).unwrap();
        prop_assert!(terms.iter().map(|t| t.count).sum::<u64>() > 0);
        let top = terms.iter().map(|t| t.level).max().unwrap();
        let sums = cascade(&a, &f, top).unwrap();
        prop_assert_eq!(evaluate_decomposition(&a, &sums, &terms).unwrap(), birkhoff_sum(&t, &f, &x, n).unwrap());
    }

    #[test]
    fn charpoly_constant_term_is_the_determinant(seed in any::<u64>()) {
        let mut r = rng(seed);
        let rows: Vec<Vec<i64>> = (0..4).map(|_| (0..4).map(|_| r.random_range(-6..=6)).collect()).collect();
        let m = IntMatrix::from_rows(&rows);
        let p = m.charpoly();
        // highest degree first; for even size the constant term is det A
        prop_assert!(p[0].is_one());
        prop_assert_eq!(p[1].clone(), -m.trace());
        prop_assert_eq!(p[4].clone(), m.det());
    }
}

#[test]
fn admissible_sampler_reaches_every_admissible_pair() {
    let letters = ['A', 'B', 'C', 'D', 'E'];
    let mut all = std::collections::BTreeSet::new();
    for p in 0..120usize {
        // p-th permutation in the factorial number system
        let (mut pool, mut code, mut bottom) = (letters.to_vec(), p, String::new());
        for base in (1..=5).rev() {
            let f: usize = (1..base).product();
            bottom.push(pool.remove(code / f));
            code %= f;
        }
        let c = CombinatorialData::from_words("ABCDE", &bottom).unwrap();
        if c.is_admissible() {
            all.insert(bottom);
        }
    }
    let mut r = rng(1);
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..3000 {
        let c = random_admissible(&mut r, 5);
        assert!(c.is_admissible());
        seen.insert(c.row_string(1));
    }
    assert_eq!(seen, all);
}
