use bwconv_core::accel::{simulate_layer_block, FilterBank, SimOptions, WindowScheme};
use bwconv_core::fxp::{mul_qq, saturate_truncate, FxSample, QFormat, RoundMode};
use bwconv_core::golden::{binarize_det, hard_sigmoid, conv_layer_golden};
use bwconv_core::metrics::{efficiency_report, LayerSpec};
use bwconv_core::netmodel::{evaluate_network, plan_blocks, split_kernel, NetLayer};
use bwconv_core::power::{core_power, device_power, ActivityModel, IoModel};
use bwconv_core::{AccelConfig, BinaryFilter, Calibration, ChannelAffine, FeatureMap, FilterSet, NetworkSpec, Padding};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
struct Layer {
    n_in: usize,
    n_out: usize,
    h: usize,
    w: usize,
    k: usize,
    padding: Padding,
    seed: u64,
}

fn layer() -> impl Strategy<Value = Layer> {
    (1usize..=7, any::<bool>(), 1usize..=8, 1usize..=8, any::<u64>())
        .prop_flat_map(|(k, zero, n_in, n_out, seed)| {
            let padding = if zero && k % 2 == 1 { Padding::ZeroPad } else { Padding::Valid };
            (Just(k), Just(padding), Just(n_in), Just(n_out), k..=16usize, k..=16usize, Just(seed))
        })
        .prop_map(|(k, padding, n_in, n_out, h, w, seed)| Layer {
            n_in,
            n_out,
            h,
            w,
            k,
            padding,
            seed,
        })
}

fn data(l: &Layer) -> (FeatureMap, FilterSet, Vec<ChannelAffine>) {
    let mut rng = ChaCha8Rng::seed_from_u64(l.seed);
    let input = FeatureMap::random(l.n_in, l.h, l.w, &mut rng);
    let filters = FilterSet::random(l.n_out, l.n_in, l.k, &mut rng);
    let affine = (0..l.n_out).map(|_| ChannelAffine::random(&mut rng)).collect();
    (input, filters, affine)
}

fn q(fmt: QFormat) -> impl Strategy<Value = FxSample> {
    (fmt.min_raw()..=fmt.max_raw()).prop_map(move |r| FxSample::new(r, fmt).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn simulator_matches_golden(l in layer()) {
        let cfg = AccelConfig::default();
        let (input, filters, affine) = data(&l);
        let gold = conv_layer_golden(&input, &filters, &affine, l.padding).unwrap();
        let sim = simulate_layer_block(&cfg, &input, &filters, &affine, l.padding, &SimOptions::default()).unwrap();
        prop_assert_eq!(&sim.output, &gold.output);
        prop_assert!(sim.report.max_active_banks <= 7);
        prop_assert!(sim.report.check_total());
    }

    #[test]
    fn circular_shift_equals_realign(l in layer()) {
        let cfg = AccelConfig::with_channels(8);
        let (input, filters, affine) = data(&l);
        let run = |scheme| {
            let opts = SimOptions { scheme, ..Default::default() };
            simulate_layer_block(&cfg, &input, &filters, &affine, l.padding, &opts).unwrap()
        };
        let a = run(WindowScheme::CircularShift);
        let b = run(WindowScheme::Realign);
        prop_assert_eq!(a.sums, b.sums);
        prop_assert_eq!(a.report.total_cycles, b.report.total_cycles);
    }

    #[test]
    fn shift_period_is_native(k in 1usize..=7, n_out in 1usize..=8, seed: u64) {
        let cfg = AccelConfig::with_channels(8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let filters = FilterSet::random(n_out, 3, k, &mut rng);
        let mut bank = FilterBank::load(&cfg, &filters).unwrap();
        let orig = bank.clone();
        let native = bank.mode().native;
        for i in 1..=native {
            bank.shift_weights();
            if i < native && k > 1 {
                prop_assert_eq!(bank.shift_offset(), i);
            }
        }
        prop_assert_eq!(bank.shift_offset(), 0);
        for u in 0..bank.n_sop() {
            for n in 0..bank.n_in() {
                prop_assert_eq!(bank.word(u, n), orig.word(u, n));
            }
        }
    }

    #[test]
    fn products_are_exact(a in q(QFormat::Q2_9), b in q(QFormat::Q7_9)) {
        let p = mul_qq(a, b);
        prop_assert_eq!(p.to_rational(), a.to_rational() * b.to_rational());
    }

    #[test]
    fn truncation_is_monotone(a in q(QFormat::Q10_18), b in q(QFormat::Q10_18)) {
        let (lo, hi) = if a.raw() <= b.raw() { (a, b) } else { (b, a) };
        let (tl, _) = saturate_truncate(lo, QFormat::Q2_9);
        let (th, _) = saturate_truncate(hi, QFormat::Q2_9);
        prop_assert!(tl.raw() <= th.raw());
        prop_assert!(tl.to_real::<f64>() <= lo.to_real::<f64>().max(QFormat::Q2_9.min_raw() as f64 / 512.0));
    }

    #[test]
    fn quantize_roundtrip(a in q(QFormat::Q2_9)) {
        for mode in [RoundMode::Truncate, RoundMode::Nearest] {
            let (b, sat) = FxSample::quantize(a.to_real::<f64>(), QFormat::Q2_9, mode);
            prop_assert_eq!(b, a);
            prop_assert!(!sat);
        }
    }

    #[test]
    fn binarization(w in -4.0f64..4.0) {
        prop_assert_eq!(binarize_det(w), if w >= 0.0 { 1 } else { -1 });
        let s = hard_sigmoid(w);
        prop_assert!((0.0..=1.0).contains(&s));
    }

    #[test]
    fn efficiency_factors_bounded(
        n_in in 1usize..=64, n_out in 1usize..=128, h in 7usize..=300, k in prop::sample::select(vec![1usize, 3, 5, 7]), zero: bool,
    ) {
        let cfg = AccelConfig::default();
        let padding = if zero { Padding::ZeroPad } else { Padding::Valid };
        let l = LayerSpec::new(n_in, n_out, h, h, k, padding);
        let r = efficiency_report::<f64>(&cfg, &l, 480e6, Some(0.153), Some(1.33)).unwrap();
        prop_assert!(r.theta_real <= r.theta_peak * (1.0 + 1e-12));
        for e in [r.eta_tile, r.eta_ch_idle, r.eta_border] {
            prop_assert!(e > 0.0 && e <= 1.0);
        }
    }

    #[test]
    fn device_power_dominates(u1 in 0.0f64..=1.0, u2 in 0.0f64..=1.0) {
        let cal = Calibration::builtin();
        let io = IoModel::default();
        let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
        for pt in cal.all() {
            prop_assert!(device_power(pt, &io, lo) >= core_power(pt, lo));
            prop_assert!(core_power(pt, lo) <= core_power(pt, hi));
            prop_assert!(device_power(pt, &io, lo) <= device_power(pt, &io, hi));
        }
    }

    #[test]
    fn plan_covers_layer_once(
        n_in in 1usize..=100, n_out in 1usize..=150, h in 1usize..=200, k in prop::sample::select(vec![1usize, 3, 5, 7]),
    ) {
        let cfg = AccelConfig::default();
        let l = LayerSpec::new(n_in, n_out, h.max(k), 8.max(k), k, Padding::ZeroPad);
        let p = plan_blocks(&l, &cfg).unwrap();
        let mut hits = vec![0u8; n_in * n_out * l.h_im];
        for e in &p.entries {
            prop_assert!(e.inputs.len() <= cfg.n_ch);
            prop_assert!(e.rows.len() <= cfg.h_max(e.inputs.len()));
            for i in e.inputs.clone() {
                for o in e.outputs.clone() {
                    for y in e.rows.clone() {
                        hits[(i * n_out + o) * l.h_im + y] += 1;
                    }
                }
            }
        }
        prop_assert!(hits.iter().all(|&c| c == 1));
        let tiles: usize = p.input_blocks.iter().map(|b| l.h_im.div_ceil(cfg.h_max(b.len()))).sum();
        prop_assert_eq!(p.entries.len(), tiles * p.output_blocks.len());
    }

    #[test]
    fn split_reassembles(k in 8usize..=14, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = BinaryFilter::random(k, &mut rng);
        let s = split_kernel(&f).unwrap();
        for r in 0..k {
            for c in 0..k {
                prop_assert_eq!(s.effective_weight(r, c), f.weight(r, c) as i32);
            }
        }
    }

    #[test]
    fn network_identities(
        layers in prop::collection::vec((1usize..=96, 4usize..=64, prop::sample::select(vec![1usize, 3, 5, 7, 11])), 1..5),
        high: bool,
    ) {
        let mut ch = 3;
        let net_layers: Vec<NetLayer> = layers
            .iter()
            .enumerate()
            .map(|(i, &(n_out, h, k))| {
                let spec = LayerSpec::new(ch, n_out, h.max(k), h.max(k), k, Padding::ZeroPad);
                ch = n_out;
                NetLayer { name: format!("l{i}"), spec }
            })
            .collect();
        let net = NetworkSpec::new("p", (3, 64, 64), net_layers).unwrap();
        let pt = Calibration::builtin().lookup("multi32", if high { 1.2 } else { 0.6 }).unwrap();
        let r = evaluate_network(&net, &AccelConfig::default(), &pt, &ActivityModel::default()).unwrap();
        prop_assert_eq!(r.ops, r.layers.iter().map(|l| l.ops).sum::<u64>());
        prop_assert!((r.fps * r.ops as f64 / r.theta - 1.0).abs() < 1e-9);
        prop_assert!((r.energy * r.en_eff / r.ops as f64 - 1.0).abs() < 1e-9);
        prop_assert!(r.utilization > 0.0 && r.utilization <= 1.0 + 1e-9);
    }
}
