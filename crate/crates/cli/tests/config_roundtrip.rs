use lcnn::nnmodel::Activation;
use lcnn::par::Exec;
use lcnn_cli::config::{BetaSchedule, Competitor, DataSpec, Noise, PriorSpec, SynthSpec, Target};
use lcnn_cli::ExperimentConfig;
use proptest::prelude::*;

fn config() -> impl Strategy<Value = ExperimentConfig> {
    (
        (
            1usize..5,
            1usize..6,
            0.1f64..4.0,
            any::<bool>(),
            0.1f64..3.0,
            0.1f64..3.0,
        ),
        (
            proptest::option::of(1usize..8),
            0usize..500,
            0u8..3,
            1e-3f64..1.0,
        ),
        (
            proptest::option::of(1e-3f64..50.0),
            any::<bool>(),
            any::<u64>(),
            any::<bool>(),
        ),
        (
            any::<bool>(),
            16usize..512,
            1e-4f64..0.5,
            proptest::option::of(proptest::collection::vec(-1.0f64..1.0, 6)),
        ),
    )
        .prop_map(
            |(
                (k, d, v, tanh, a, c),
                (m, n, noise, scale),
                (beta, zero, seed, seq),
                (qc, qr, qt, probe),
            )| {
                let mut cfg = ExperimentConfig::default();
                cfg.network.k = k;
                cfg.network.d = d;
                cfg.network.v = v;
                cfg.network.activation = if tanh {
                    Activation::Tanh { a, c }
                } else {
                    Activation::SquaredRelu { a }
                };
                cfg.prior = m.map_or(PriorSpec::Continuous, |m| PriorSpec::Discrete { m });
                cfg.data = DataSpec::Synthetic(SynthSpec {
                    n,
                    target: if noise == 0 {
                        Target::Sine { amplitude: scale }
                    } else {
                        Target::Teacher
                    },
                    noise: match noise {
                        0 => Noise::None,
                        1 => Noise::Gaussian { sigma: scale },
                        _ => Noise::Bounded { half_width: scale },
                    },
                });
                cfg.beta = beta.map_or(BetaSchedule::FourthRoot, |value| BetaSchedule::Fixed {
                    value,
                });
                cfg.competitor = if zero {
                    Competitor::Zero
                } else {
                    Competitor::Teacher
                };
                cfg.seed = seed;
                cfg.exec = if seq {
                    Exec::Sequential
                } else {
                    Exec::Parallel
                };
                cfg.sampler.quadrature_check = qc;
                cfg.sampler.quadrature_resolution = qr;
                cfg.sampler.quadrature_tolerance = qt;
                cfg.sampler.probe = probe.map(|p| p[..d].to_vec());
                cfg
            },
        )
}

proptest! {
    #[test]
    fn serialize_then_parse_is_lossless(cfg in config()) {
        let text = cfg.to_json();
        let back = ExperimentConfig::from_json(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back.to_json(), text);
    }
}
