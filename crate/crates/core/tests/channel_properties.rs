use poprec::channel::{apply_channel, realize_pattern, sample_pattern, trace_likelihood, PatternEntry};
use poprec::{BitString, ChannelParams, PackedBits, SeedTree, Trace};
use proptest::prelude::*;

fn bits(len: usize) -> impl Strategy<Value = BitString> {
    prop::collection::vec(any::<bool>(), len).prop_map(|v| BitString::from_bools(v).unwrap())
}

fn trace_of(v: &[bool]) -> Trace {
    Trace::new(PackedBits::from_bools(v.iter().copied()))
}

fn all_traces(max_len: usize) -> impl Iterator<Item = Trace> {
    (0..=max_len).flat_map(|len| (0..1u64 << len).map(move |v| Trace::new(PackedBits::from_u64_msb_first(v, len))))
}

fn channel() -> impl Strategy<Value = ChannelParams> {
    (0.0..0.6f64, 0.0..0.6f64).prop_map(|(q, qi)| ChannelParams::new(q, qi).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn deletion_only_likelihood_sums_to_one(x in (1usize..7).prop_flat_map(bits), q in 0.0..0.9f64) {
        let c = ChannelParams::new(q, 0.0).unwrap();
        let total: f64 = all_traces(x.len()).map(|y| trace_likelihood(&x, &y, &c).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-9, "{total}");
    }

    #[test]
    fn likelihood_factorises_over_concatenation(
        x1 in (1usize..5).prop_flat_map(bits),
        x2 in (1usize..5).prop_flat_map(bits),
        y in prop::collection::vec(any::<bool>(), 0..9),
        c in channel(),
    ) {
        let joint = trace_likelihood(&x1.concat(&x2), &trace_of(&y), &c).unwrap();
        let split: f64 = (0..=y.len())
            .map(|k| {
                trace_likelihood(&x1, &trace_of(&y[..k]), &c).unwrap()
                    * trace_likelihood(&x2, &trace_of(&y[k..]), &c).unwrap()
            })
            .sum();
        prop_assert!((joint - split).abs() <= 1e-12 + 1e-9 * joint, "{joint} vs {split}");
    }

    #[test]
    fn realized_pattern_keeps_surviving_bits(x in (1usize..40).prop_flat_map(bits), c in channel(), seed in any::<u64>()) {
        let mut rng = SeedTree::new(seed).stream("p", 0);
        let r = sample_pattern(x.len(), &c, &mut rng).unwrap();
        let y = realize_pattern(&r, &x, &mut rng).unwrap();
        prop_assert_eq!(y.len(), r.len());
        for (k, e) in r.entries().iter().enumerate() {
            if let PatternEntry::Index(i) = *e {
                prop_assert_eq!(y.get(k), x.get(i as usize));
            }
        }
    }

    #[test]
    fn concatenated_sources_give_concatenated_patterns(
        x1 in (1usize..20).prop_flat_map(bits),
        x2 in (1usize..20).prop_flat_map(bits),
        seed in any::<u64>(),
    ) {
        // with no randomness, the channel is the identity on both halves
        let c = ChannelParams::noiseless();
        let mut rng = SeedTree::new(seed).stream("c", 0);
        let joint = apply_channel(&x1.concat(&x2), &c, &mut rng);
        let halves = apply_channel(&x1, &c, &mut rng).concat(&apply_channel(&x2, &c, &mut rng));
        prop_assert_eq!(joint, halves);
    }
}

#[test]
fn empirical_frequencies_match_likelihood() {
    let c = ChannelParams::new(0.3, 0.25).unwrap();
    let x: BitString = "101".parse().unwrap();
    let samples = 200_000;
    let mut rng = SeedTree::new(9).stream("freq", 0);
    let counts = poprec::stats::histogram((0..samples).map(|_| apply_channel(&x, &c, &mut rng)));
    for y in all_traces(4) {
        let p = trace_likelihood(&x, &y, &c).unwrap();
        let observed = *counts.get(&y).unwrap_or(&0) as f64 / samples as f64;
        let sd = (p * (1.0 - p) / samples as f64).sqrt();
        assert!((observed - p).abs() <= 5.0 * sd + 1e-6, "y={y}: {observed} vs {p}");
    }
}

#[test]
fn mean_trace_length_is_alpha_n() {
    let c = ChannelParams::new(0.2, 0.3).unwrap();
    let mut rng = SeedTree::new(4).stream("len", 0);
    let x = BitString::random(2000, &mut rng).unwrap();
    let m = 200;
    let mean = (0..m).map(|_| apply_channel(&x, &c, &mut rng).len()).sum::<usize>() as f64 / m as f64;
    let expected = c.alpha() * 2000.0;
    assert!((mean - expected).abs() / expected < 0.01, "{mean} vs {expected}");
}
