use molcomm::capacity::{blahut_arimoto, discretize_channel, InputGrid, TransitionMatrix};
use molcomm::modulation::{
    modulation_rate, symbol_error_probabilities, total_error, ModulationScheme,
};
use molcomm::montecarlo::{sample_link_output, sample_transmitter};
use molcomm::{BacteriumParams, DiffusionChannelParams, LinkParams, NodeParams, VarianceMode};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn arb_bacterium() -> impl Strategy<Value = BacteriumParams> {
    (1u32..200, 0.05f64..20.0, 0.05f64..20.0, 0.0f64..0.2)
        .prop_map(|(n, g, k, rg)| BacteriumParams::new(n, g, k, rg).unwrap())
}

fn arb_link() -> impl Strategy<Value = LinkParams> {
    (arb_bacterium(), 1u32..300, 1e-4f64..1.0, 0.1f64..5.0, 0.01f64..2.0, any::<bool>()).prop_map(
        |(b, n, alpha, d, r, literal)| {
            let node = NodeParams::new(n, b, alpha).unwrap();
            let mode = if literal { VarianceMode::PaperLiteral } else { VarianceMode::Consistent };
            LinkParams::symmetric(node, DiffusionChannelParams::new(d, r).unwrap()).with_mode(mode)
        },
    )
}

/// A link and a received concentration strictly inside its admissible range.
fn arb_operating_point() -> impl Strategy<Value = (LinkParams, f64)> {
    (arb_link(), 0.0f64..0.999).prop_map(|(l, f)| {
        let a0 = f * l.max_admissible_concentration();
        (l, a0)
    })
}

fn arb_stochastic_rows(max_k: usize, max_b: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2..=max_k, 2..=max_b).prop_flat_map(|(k, b)| {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, b), k).prop_map(|rows| {
            rows.into_iter()
                .map(|mut r| {
                    r[0] += 1e-3;
                    let s: f64 = r.iter().sum();
                    r.iter_mut().for_each(|x| *x /= s);
                    r
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn binding_is_monotone_and_bounded(b in arb_bacterium(), a in 0.0f64..1e4, da in 1e-6f64..1e3) {
        let p = b.binding_probability(a).unwrap();
        prop_assert!((0.0..1.0).contains(&p));
        prop_assert!(b.binding_probability(a + da * (1.0 + a)).unwrap() > p || p > 1.0 - 1e-12);
        if a > 0.0 {
            let stiffer = BacteriumParams::new(b.receptors(), b.gain(), b.dissociation() * 1.5, b.gain_noise_rel_var()).unwrap();
            prop_assert!(stiffer.binding_probability(a).unwrap() < p);
        }
    }

    #[test]
    fn binding_inverse_round_trips(b in arb_bacterium(), p in 0.0f64..0.999) {
        let a = b.concentration_for_probability(p).unwrap();
        let back = b.binding_probability(a).unwrap();
        prop_assert!((back - p).abs() <= 1e-12 * p.max(f64::MIN_POSITIVE), "{p} -> {a} -> {back}");
    }

    #[test]
    fn received_mean_is_the_target((l, a0) in arb_operating_point()) {
        let mean = l.received_concentration_stats(a0).unwrap().mean;
        prop_assert!((mean - a0).abs() <= 1e-12 * a0, "{mean} vs {a0}");
    }

    #[test]
    fn receiver_variance_vanishes_at_zero(l in arb_link()) {
        let y = l.receiver_output_moments(0.0).unwrap();
        prop_assert_eq!((y.mean, y.variance), (0.0, 0.0));
        prop_assert_eq!(l.normalized_output_std(0.0).unwrap(), 0.0);
    }

    #[test]
    fn receptor_noise_is_symmetric_with_peak_at_half(b in arb_bacterium(), n in 1u32..300, p in 0.0f64..1.0) {
        let node = NodeParams::new(n, b, 1.0).unwrap();
        let v = node.activation_variance(p);
        let mirrored = node.activation_variance(1.0 - p);
        prop_assert!((v - mirrored).abs() <= 1e-9 * v.max(1e-300));
        prop_assert!(v <= node.activation_variance(0.5) * (1.0 + 1e-12));
    }

    #[test]
    fn transmitter_noise_never_reduces_receiver_variance((l, a0) in arb_operating_point()) {
        let l = l.with_mode(VarianceMode::Consistent);
        let p0 = l.receiver().bacterium().binding_probability(a0).unwrap();
        let total = l.receiver_output_moments(p0).unwrap().variance;
        prop_assert!(total >= l.receiver().activation_variance(p0) * (1.0 - 1e-12));
        prop_assert!(total >= 0.0);
    }

    #[test]
    fn means_scale_with_colony_size((l, f) in (arb_link(), 0.0f64..0.99), k in 2u32..5) {
        let bigger = l.with_bacteria(l.receiver().bacteria() * k).unwrap();
        let p0 = f * l.max_admissible_probability();
        let y = l.receiver_output_moments(p0).unwrap().mean;
        let y_k = bigger.receiver_output_moments(p0).unwrap().mean;
        prop_assert!((y_k - f64::from(k) * y).abs() <= 1e-12 * y_k.max(1e-300));
        let a1 = l.transmitter().bacterium().concentration_for_probability(0.3).unwrap();
        let x = l.transmitter_output_moments(a1).unwrap().mean;
        let x_k = bigger.transmitter_output_moments(a1).unwrap().mean;
        prop_assert!((x_k - f64::from(k) * x).abs() <= 1e-12 * x_k);
    }

    #[test]
    fn input_grid_is_uniform(p_max in 1e-3f64..0.9999, k in 2usize..400) {
        let g = InputGrid::uniform(p_max, k).unwrap();
        let levels = g.levels();
        prop_assert_eq!(levels[0], 0.0);
        prop_assert_eq!(levels[k - 1], p_max);
        let step = p_max / (k - 1) as f64;
        for w in levels.windows(2) {
            prop_assert!(((w[1] - w[0]) - step).abs() <= 1e-12);
        }
    }

    #[test]
    fn discretized_rows_are_stochastic(l in arb_link(), f in 0.05f64..1.0, k in 2usize..40, b in 2usize..400) {
        let p_max = f * l.max_admissible_probability();
        prop_assume!(p_max > 0.0);
        let ch = discretize_channel(&l, &InputGrid::uniform(p_max, k).unwrap(), b).unwrap();
        for i in 0..k {
            let row = ch.matrix().row(i);
            prop_assert!(row.iter().all(|&x| x >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn blahut_arimoto_bounds(rows in arb_stochastic_rows(6, 8)) {
        let m = TransitionMatrix::from_rows(&rows).unwrap();
        let r = blahut_arimoto(&m, 1e-9, 5000).unwrap();
        let ceiling = (rows.len().min(rows[0].len()) as f64).log2();
        prop_assert!(r.capacity_bits >= 0.0 && r.capacity_bits <= ceiling + 1e-12);
        prop_assert!((r.input_distribution.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(r.upper_bound_gap >= -1e-12);
        for w in r.lower_bound_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12, "lower bound fell from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn symbol_error_falls_as_spacing_grows(sigma in 1e-3f64..1.0, lo in 0.05f64..0.5, gain in 1.01f64..1.9) {
        let noise = move |p: f64| if p == 0.0 { 0.0 } else { sigma };
        let narrow = symbol_error_probabilities(&noise, &ModulationScheme::uniform(2, lo).unwrap()).unwrap();
        let wide = symbol_error_probabilities(&noise, &ModulationScheme::uniform(2, lo * gain).unwrap()).unwrap();
        prop_assert_eq!(narrow[0], 0.0);
        prop_assert!(wide[1] < narrow[1] || narrow[1] == 0.0);
    }

    #[test]
    fn modulation_report_invariants(l in arb_link(), f in 0.05f64..1.0, m in 2usize..12, raw in prop::collection::vec(0.01f64..1.0, 12)) {
        let p_max = f * l.max_admissible_probability();
        prop_assume!(p_max > 1e-6);
        let s: f64 = raw[..m].iter().sum();
        let weights: Vec<f64> = raw[..m].iter().map(|w| w / s).collect();
        let scheme = ModulationScheme::uniform(m, p_max).unwrap().with_weights(weights.clone()).unwrap();
        let report = modulation_rate(&l, &scheme).unwrap();
        let direct: f64 = weights.iter().zip(&report.per_symbol_error).map(|(w, e)| w * e).sum();
        prop_assert!((report.total_error - direct).abs() <= 1e-12);
        prop_assert!((total_error(&scheme, &report.per_symbol_error).unwrap() - direct).abs() <= 1e-12);
        prop_assert!(report.rate_bits >= -1e-12 && report.rate_bits <= (m as f64).log2() + 1e-12);
        prop_assert!(report.total_error >= report.region_error - 1e-12);
        prop_assert!(report.per_symbol_error.iter().all(|e| (0.0..=1.0).contains(e)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn draws_stay_within_receptor_counts((l, a0) in arb_operating_point(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = l.transmitter().receptor_total() as u64;
        let a1 = l.stimulus_concentration(a0).unwrap();
        for _ in 0..20 {
            prop_assert!(sample_transmitter(a1, &l, &mut rng).unwrap() <= total);
            prop_assert!(sample_link_output(a0, &l, &mut rng).unwrap() <= l.receiver().receptor_total() as u64);
        }
    }
}
