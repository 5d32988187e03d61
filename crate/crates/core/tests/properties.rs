use eprb_core::behavior::{chsh_delta, chsh_delta_free_sum, correlations, validate, DEFAULT_TOL};
use eprb_core::boxes::{deterministic_box, is_local, pr_box, DeterministicAssignment, Variant};
use eprb_core::hardy::{classify, hardy_sets, HardyClass};
use eprb_core::linsys::{
    behavior_from_free, build_matrix, solve_dependent, solve_dependent_generic, FreeSet, DependentSet,
};
use eprb_core::quantum::{behavior_from_model, QuantumModel, Settings};
use eprb_core::{Behavior, Outcome, Setting};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn free_set() -> impl Strategy<Value = FreeSet> {
    prop::array::uniform8(0.0..=1.0f64).prop_map(FreeSet::from_array)
}

/// Four independently normalized blocks; generally signaling.
fn normalized_behavior() -> impl Strategy<Value = Behavior> {
    prop::array::uniform4(prop::array::uniform4(1e-3..1.0f64)).prop_map(|blocks| {
        let blocks = blocks.map(|w| {
            let s: f64 = w.iter().sum();
            w.map(|x| x / s)
        });
        Behavior::from_blocks(blocks).unwrap()
    })
}

/// Outcome and setting relabelings that map no-signaling behaviors onto
/// no-signaling behaviors.
#[derive(Debug, Clone, Copy)]
struct Relabel {
    swap_a: bool,
    swap_b: bool,
    flip_a: [bool; 2],
    flip_b: [bool; 2],
}

fn relabel() -> impl Strategy<Value = Relabel> {
    (any::<bool>(), any::<bool>(), any::<[bool; 2]>(), any::<[bool; 2]>())
        .prop_map(|(swap_a, swap_b, flip_a, flip_b)| Relabel { swap_a, swap_b, flip_a, flip_b })
}

fn apply(r: Relabel, b: &Behavior) -> Behavior {
    let pick = |s: Setting, swap: bool| if swap { s.other() } else { s };
    let flip = |o: Outcome, f: bool| if f { o.flip() } else { o };
    Behavior::from_fn(|a, bs, m, n| {
        let a2 = pick(a, r.swap_a);
        let b2 = pick(bs, r.swap_b);
        b.get(a2, b2, flip(m, r.flip_a[a2.index()]), flip(n, r.flip_b[b2.index()]))
    })
    .unwrap()
}

fn mix(parts: &[(f64, Behavior)]) -> Behavior {
    let total: f64 = parts.iter().map(|(w, _)| w).sum();
    Behavior::from_fn(|a, b, m, n| parts.iter().map(|(w, p)| w * p.get(a, b, m, n)).sum::<f64>() / total)
        .unwrap()
}

/// Random mixture of deterministic boxes, relabeled PR boxes and a random
/// quantum behavior.
fn no_signaling_behavior() -> impl Strategy<Value = Behavior> {
    (
        prop::collection::vec((0.0..1.0f64, 0usize..16), 1..4),
        prop::collection::vec((0.0..1.0f64, relabel()), 0..3),
        0.0..1.0f64,
        any::<u64>(),
    )
        .prop_map(|(dets, prs, wq, seed)| {
            let all = DeterministicAssignment::all();
            let mut parts: Vec<(f64, Behavior)> =
                dets.into_iter().map(|(w, i)| (w + 1e-3, deterministic_box(all[i]))).collect();
            parts.extend(prs.into_iter().map(|(w, r)| (w, apply(r, &pr_box(Variant::Primary)))));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            parts.push((wq, behavior_from_model(&QuantumModel::random(&mut rng)).unwrap()));
            mix(&parts)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn solved_system_satisfies_every_row(u in free_set()) {
        let v = solve_dependent(&u);
        let b = behavior_from_free(&u).unwrap();
        prop_assert_eq!(DependentSet::of_behavior(&b), v);
        prop_assert!(build_matrix().max_residual(b.as_array()) < 1e-12);
        prop_assert!(solve_dependent_generic(&u).unwrap().max_abs_diff(&v) < 1e-12);
        let restated = u.p4 + u.p5 + u.p9 - u.p1 - u.p8 - u.p12 - u.p14 - u.p15;
        prop_assert!((2.0 * v.p13 - 1.0 - restated).abs() < 1e-15);
    }

    #[test]
    fn solver_is_affine(u1 in free_set(), u2 in free_set(), alpha in 0.0..=1.0f64) {
        let (a1, a2) = (u1.to_array(), u2.to_array());
        let mixed = FreeSet::from_array(std::array::from_fn(|i| alpha * a1[i] + (1.0 - alpha) * a2[i]));
        let (v1, v2) = (solve_dependent(&u1).to_array(), solve_dependent(&u2).to_array());
        let expect = DependentSet::from_array(std::array::from_fn(|i| alpha * v1[i] + (1.0 - alpha) * v2[i]));
        prop_assert!(solve_dependent(&mixed).max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn delta_forms_agree_and_are_bounded(b in normalized_behavior()) {
        let c = correlations(&b);
        prop_assert!((c.delta() - chsh_delta_free_sum(&b)).abs() < 1e-12);
        let d = chsh_delta(&b).unwrap();
        prop_assert!(d.abs() <= 4.0 + 1e-12);
        for x in [c.c11, c.c12, c.c21, c.c22] {
            prop_assert!(x.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn singlet_symmetries(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = behavior_from_model(&QuantumModel::singlet(Settings::random(&mut rng)).unwrap()).unwrap();
        for (i, j) in [(1, 4), (2, 3), (5, 8), (6, 7), (9, 12), (10, 11), (13, 16), (14, 15)] {
            prop_assert!((b.p(i) - b.p(j)).abs() < 1e-12, "p{} != p{}", i, j);
        }
    }

    #[test]
    fn quantum_behaviors_never_signal(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = behavior_from_model(&QuantumModel::random(&mut rng)).unwrap();
        let r = validate(&b, 1e-12).unwrap();
        prop_assert!(r.all_passed(), "{}", r);
        prop_assert!(b.as_array().iter().all(|&p| p >= -1e-12));
    }

    #[test]
    fn product_states_obey_local_bound(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = behavior_from_model(&QuantumModel::random_product(&mut rng)).unwrap();
        prop_assert!(chsh_delta(&b).unwrap().abs() <= 2.0 + 1e-9);
    }

    #[test]
    fn classification_is_monotone(w1 in -0.1..0.7f64, w2 in -0.1..0.7f64) {
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        prop_assert!(classify(lo, DEFAULT_TOL) <= classify(hi, DEFAULT_TOL));
        if classify(lo, DEFAULT_TOL) == HardyClass::GeneralProbabilisticOnly {
            prop_assert_ne!(classify(hi, DEFAULT_TOL), HardyClass::QuantumConsistent);
        }
    }

    #[test]
    fn behavior_json_round_trip(p in prop::array::uniform16(-1e3..1e3f64)) {
        let b = Behavior::new(p).unwrap();
        let back = Behavior::from_json_str(&b.to_json_string()).unwrap();
        prop_assert_eq!(back.as_array().map(f64::to_bits), p.map(f64::to_bits));
    }

    #[test]
    fn free_set_json_round_trip(u in free_set()) {
        let back: FreeSet = serde_json::from_str(&serde_json::to_string(&u).unwrap()).unwrap();
        prop_assert_eq!(back, u);
    }

    #[test]
    fn model_json_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = QuantumModel::random(&mut rng);
        prop_assert_eq!(QuantumModel::from_json_str(&m.to_json_string()).unwrap(), m);
    }

    #[test]
    fn witness_bound_holds_for_all_sets(b in no_signaling_behavior()) {
        prop_assert!(validate(&b, 1e-12).unwrap().all_passed());
        for set in hardy_sets() {
            prop_assert!(2.0 * b.at(set.witness) - 1.0 <= set.zero_sum(&b) + 1e-12, "{}", set);
        }
    }

    #[test]
    fn hardy_identities_under_zero_premises(u in free_set(), k in 0usize..8) {
        let set = hardy_sets()[k];
        let mut v = u.to_array();
        for z in set.zero_targets {
            let i = eprb_core::linsys::FREE.iter().position(|&f| f == z).unwrap();
            v[i] = 0.0;
        }
        let b = behavior_from_free(&FreeSet::from_array(v)).unwrap();
        let w = b.at(set.witness);
        prop_assert!((chsh_delta(&b).unwrap() + 2.0 + 4.0 * w).abs() < 1e-12);
        prop_assert!((set.sigma(&b) - (1.0 - 2.0 * w)).abs() < 1e-12);
    }

    #[test]
    fn deterministic_mixtures_are_local(weights in prop::array::uniform16(0.0..1.0f64)) {
        prop_assume!(weights.iter().sum::<f64>() > 1e-3);
        let parts: Vec<(f64, Behavior)> = DeterministicAssignment::all()
            .iter()
            .zip(weights)
            .map(|(&d, w)| (w, deterministic_box(d)))
            .collect();
        let b = mix(&parts);
        prop_assert!(chsh_delta(&b).unwrap().abs() <= 2.0 + 1e-12);
        prop_assert!(is_local(&b, DEFAULT_TOL).unwrap().local);
    }

    #[test]
    fn relabeled_pr_boxes_are_nonlocal(r in relabel()) {
        let b = apply(r, &pr_box(Variant::Primary));
        prop_assert!(validate(&b, 1e-15).unwrap().all_passed());
        let v = is_local(&b, DEFAULT_TOL).unwrap();
        prop_assert!(!v.local);
        prop_assert_eq!(v.witness.unwrap().value, 4.0);
    }
}
