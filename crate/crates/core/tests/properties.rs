use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use coarse_sigma::dirseq::{check_equivalence, check_morphism, direct_limit, ConcreteSequence, DirectSequence, Morphism, SetFunction, Verdict};
use coarse_sigma::examples::{random_tree_model, RandomModelParams};
use coarse_sigma::functor::{induced_morphism_on, rebase, ControlFunction, ControlledMap, Direction, PointMap};
use coarse_sigma::rips::{build_rips, Ball, TruncationParams};
use coarse_sigma::sigma::{ind_sigma, ScaleWindow};
use coarse_sigma::space::{metric_wedge, PointLabel, Rational, SpacePresentation};

fn r(n: i64) -> Rational {
    Rational::integer(n)
}

fn random_space(seed: u64) -> SpacePresentation {
    random_tree_model(&mut ChaCha8Rng::seed_from_u64(seed), RandomModelParams::default())
}

fn random_sequence(seed: u64) -> ConcreteSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sizes: Vec<usize> = (0..rng.gen_range(2..6)).map(|_| rng.gen_range(1..5)).collect();
    let bondings = sizes
        .windows(2)
        .map(|w| SetFunction::new((0..w[0]).map(|_| rng.gen_range(0..w[1])).collect(), w[1]).unwrap())
        .collect();
    ConcreteSequence::from_sizes(1, &sizes, bondings).unwrap()
}

fn edge_set(space: &SpacePresentation, scale: u32, trunc: TruncationParams) -> BTreeSet<(PointLabel, PointLabel)> {
    let g = build_rips(space, scale, trunc).unwrap();
    let label = |v| space.label(g.ball().point(v)).unwrap();
    g.edges()
        .into_iter()
        .map(|(u, v)| {
            let (a, b) = (label(u), label(v));
            if a <= b { (a, b) } else { (b, a) }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_models_are_metrics(seed in any::<u64>()) {
        let x = random_space(seed);
        let points = x.enumerate_ball(r(1000));
        for &a in &points {
            prop_assert_eq!(x.norm(a).unwrap(), x.distance(x.basepoint(), a).unwrap());
            for &b in &points {
                let ab = x.distance(a, b).unwrap();
                prop_assert_eq!(ab, x.distance(b, a).unwrap());
                prop_assert_eq!(ab.is_zero(), a == b);
                for &c in &points {
                    prop_assert!(x.distance(a, c).unwrap() <= ab + x.distance(b, c).unwrap());
                }
            }
        }
    }

    #[test]
    fn open_book_satisfies_triangle_inequality(rays in 1usize..5, picks in prop::collection::vec(any::<prop::sample::Index>(), 3..8)) {
        let b = SpacePresentation::open_book(rays, Rational::new(1, 2)).unwrap();
        let ball = b.enumerate_ball(r(6));
        let pts: Vec<_> = picks.iter().map(|i| ball[i.index(ball.len())]).collect();
        for &p in &pts {
            for &q in &pts {
                for &s in &pts {
                    prop_assert!(b.distance(p, s).unwrap() <= b.distance(p, q).unwrap() + b.distance(q, s).unwrap());
                }
            }
        }
    }

    #[test]
    fn balls_are_monotone(seed in any::<u64>(), small in 0i64..12, extra in 0i64..12) {
        let x = random_space(seed);
        let inner: BTreeSet<_> = x.enumerate_ball(r(small)).into_iter().collect();
        let outer: BTreeSet<_> = x.enumerate_ball(r(small + extra)).into_iter().collect();
        prop_assert!(inner.is_subset(&outer));
        prop_assert!(inner.iter().all(|&p| x.norm(p).unwrap() <= r(small)));
    }

    #[test]
    fn wedge_distance_passes_through_the_wedge_point(seed in any::<u64>(), t in -20i64..20) {
        let a = random_space(seed);
        let z = SpacePresentation::lattice(1).unwrap();
        let w = metric_wedge(vec![a.clone(), z.clone()]).unwrap();
        let zp = z.point(&PointLabel::Coord(r(t))).unwrap();
        let q = w.point(&PointLabel::summand(2, z.label(zp).unwrap())).unwrap();
        for p in a.enumerate_ball(r(1000)) {
            let wp = w.point(&PointLabel::summand(1, a.label(p).unwrap())).unwrap();
            prop_assert_eq!(w.distance(wp, q).unwrap(), a.norm(p).unwrap() + z.norm(zp).unwrap());
        }
    }

    #[test]
    fn rips_edges_grow_with_scale(seed in any::<u64>(), scale in 1u32..4) {
        let x = random_space(seed);
        let trunc = TruncationParams::new(r(40));
        let lower = edge_set(&x, scale, trunc);
        let upper = edge_set(&x, scale + 1, trunc);
        prop_assert!(lower.is_subset(&upper));
        prop_assert_eq!(&lower, &edge_set(&x, scale, trunc));
    }

    #[test]
    fn ball_edges_respect_scale(seed in any::<u64>(), scale in 1i64..6) {
        let x = random_space(seed);
        let ball = Ball::new(&x, r(30));
        for e in ball.edges_within(r(scale)).edges() {
            prop_assert_eq!(ball.distance(e.a as usize, e.b as usize), e.distance);
            prop_assert!(e.distance <= r(scale));
        }
    }

    #[test]
    fn morphisms_from_bondings_compose(seed in any::<u64>(), a in 0u32..3, b in 0u32..3) {
        let seq = random_sequence(seed);
        let end = seq.end();
        let fa = Morphism::from_bondings(&seq, |i| (i + a).min(end)).unwrap();
        let fb = Morphism::from_bondings(&seq, |i| (i + b).min(end)).unwrap();
        prop_assert!(check_morphism(&fa, &seq, &seq).passes());
        let composite = fa.then(&fb).unwrap();
        prop_assert!(check_morphism(&composite, &seq, &seq).passes());
        let direct = Morphism::from_bondings(&seq, |i| composite.index(i).unwrap()).unwrap();
        for i in seq.levels() {
            prop_assert_eq!(composite.map(i), direct.map(i));
        }
        let id = Morphism::identity(&seq);
        let left = id.then(&fa).unwrap();
        prop_assert_eq!(left.map(seq.start()), fa.map(seq.start()));
    }

    #[test]
    fn limit_is_a_universal_cocone(seed in any::<u64>(), sink in 1usize..4, h_seed in any::<u64>()) {
        let seq = random_sequence(seed);
        let limit = direct_limit(&DirectSequence::Concrete(seq.clone())).unwrap();
        let n = limit.len().unwrap();
        // cocone condition
        for i in seq.start()..seq.end() {
            let b = seq.bonding(i).unwrap();
            for x in 0..seq.size(i).unwrap() {
                prop_assert_eq!(limit.class_of(i, x), limit.class_of(i + 1, b.apply(x)));
            }
        }
        // every class is named by a member
        for (k, class) in limit.classes.iter().enumerate() {
            prop_assert_eq!(limit.class_of(class.level, class.element), Some(k));
        }
        // an arbitrary cocone through the last level factors through the limit
        let mut rng = ChaCha8Rng::seed_from_u64(h_seed);
        let last = seq.size(seq.end()).unwrap();
        let h: Vec<usize> = (0..last).map(|_| rng.gen_range(0..sink)).collect();
        let mut factor: BTreeMap<usize, usize> = BTreeMap::new();
        for i in seq.levels() {
            let to_end = seq.compose(i, seq.end()).unwrap();
            for x in 0..seq.size(i).unwrap() {
                let c = limit.class_of(i, x).unwrap();
                let value = h[to_end.apply(x)];
                prop_assert_eq!(*factor.entry(c).or_insert(value), value);
            }
        }
        prop_assert_eq!(factor.len(), n);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn discrete_book_sizes_survive_doubling_the_radius(rays in 1usize..8) {
        let d = SpacePresentation::discrete_open_book(Some(rays)).unwrap();
        let window = ScaleWindow::new(1, 4).unwrap();
        let near = ind_sigma(&d, window, TruncationParams::new(r(40))).unwrap();
        let far = ind_sigma(&d, window, TruncationParams::new(r(80))).unwrap();
        prop_assert_eq!(near.sizes(), far.sizes());
        prop_assert_eq!(near.sizes(), (1..=4).map(|n| n.min(rays)).collect::<Vec<_>>());
    }

    #[test]
    fn random_rebase_is_an_equivalence(rays in 1usize..6, pick in any::<prop::sample::Index>()) {
        let d = SpacePresentation::discrete_open_book(Some(rays)).unwrap();
        let candidates = d.enumerate_ball(r(9));
        let y0 = candidates[pick.index(candidates.len())];
        // the excised ball around y0 must still separate the rays at the top scale
        let moved = rebase(&d, y0, ScaleWindow::new(1, 4).unwrap(), TruncationParams::new(r(96))).unwrap();
        prop_assert_eq!(moved.report.verdict, Verdict::Pass, "{:?}", moved.report);
        prop_assert!(check_equivalence(&moved.forward, &moved.backward, &moved.original.to_direct_sequence(), &moved.moved.to_direct_sequence()).verdict == Verdict::Pass);
    }

    #[test]
    fn induced_morphisms_commute_with_bondings(rays in 1usize..6, shift in 0u32..3) {
        let d = SpacePresentation::discrete_open_book(Some(rays)).unwrap();
        let trunc = TruncationParams::new(r(56));
        let source = ind_sigma(&d, ScaleWindow::new(1, 4).unwrap(), trunc).unwrap();
        let target = ind_sigma(&d, ScaleWindow::new(1, 4 + shift + 1).unwrap(), trunc).unwrap();
        let id = ControlledMap::new(d.clone(), d, PointMap::Identity, ControlFunction::shift(shift));
        let m = induced_morphism_on(&id, Direction::Forward, &source, &target, 1..=4, None).unwrap();
        prop_assert!(check_morphism(&m, &source.to_direct_sequence(), &target.to_direct_sequence()).passes());
    }
}
