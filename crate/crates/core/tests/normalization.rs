use deinterleave::pdw::{column, normalize_train, PulseDescriptorWord, PulseTrain};
use proptest::prelude::*;

fn pulse() -> impl Strategy<Value = PulseDescriptorWord> {
    (
        0.0..1.0f64,
        8e9..12e9f64,
        1e-7..1e-5f64,
        0.0..359.99f64,
        -80.0..-20.0f64,
    )
        .prop_map(|(t, f, pw, aoa, amp)| PulseDescriptorWord::new(t, f, pw, aoa, amp).unwrap())
}

fn train() -> impl Strategy<Value = PulseTrain> {
    prop::collection::vec(pulse(), 2..60).prop_map(|p| PulseTrain::new("t", p, None).unwrap())
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn map_train(t: &PulseTrain, f: impl Fn(&PulseDescriptorWord) -> PulseDescriptorWord) -> PulseTrain {
    PulseTrain::new("t", t.pulses().iter().map(f).collect(), None).unwrap()
}

proptest! {
    #[test]
    fn columns_have_their_ranges_and_moments(t in train()) {
        let z = normalize_train(&t);
        let toa = z.column(column::TOA);
        prop_assert!(toa.iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert_eq!(toa[0], 0.0);
        prop_assert_eq!(*toa.last().unwrap(), 1.0);
        for (p, v) in t.pulses().iter().zip(z.column(column::AOA)) {
            prop_assert_eq!(v, p.aoa / 360.0);
        }
        for c in [column::FREQUENCY, column::PULSE_WIDTH, column::AMPLITUDE] {
            let (m, s) = mean_std(&z.column(c));
            prop_assert!(m.abs() < 1e-6 && (s - 1.0).abs() < 1e-6, "column {c}: mean {m}, std {s}");
        }
    }

    #[test]
    fn independent_of_units_and_offsets(t in train(), scale in 0.1..10.0f64, shift in -5.0..5.0f64) {
        let moved = map_train(&t, |p| PulseDescriptorWord {
            toa: p.toa * scale + shift.abs(),
            frequency: p.frequency * scale,
            pulse_width: p.pulse_width * scale,
            amplitude: p.amplitude * scale + shift,
            ..*p
        });
        let (a, b) = (normalize_train(&t), normalize_train(&moved));
        for (x, y) in a.rows().iter().zip(b.rows()) {
            for c in 0..5 {
                prop_assert!((x[c] - y[c]).abs() < 1e-9, "column {c}: {} vs {}", x[c], y[c]);
            }
        }
    }

    #[test]
    fn z_scored_columns_renormalize_to_themselves(t in train()) {
        let z = normalize_train(&t);
        for c in [column::FREQUENCY, column::PULSE_WIDTH, column::AMPLITUDE] {
            let x = z.column(c);
            let (m, s) = mean_std(&x);
            for v in &x {
                prop_assert!(((v - m) / s - v).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn constant_columns_become_zero(t in train()) {
        let flat = map_train(&t, |p| PulseDescriptorWord { frequency: 9e9, amplitude: -50.0, ..*p });
        let z = normalize_train(&flat);
        prop_assert!(z.column(column::FREQUENCY).iter().all(|&v| v == 0.0));
        prop_assert!(z.column(column::AMPLITUDE).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn single_pulse_train_is_finite() {
    let p = PulseDescriptorWord::new(0.5, 9e9, 1e-6, 180.0, -50.0).unwrap();
    let z = normalize_train(&PulseTrain::new("one", vec![p], None).unwrap());
    assert_eq!(z.rows(), &[[0.0, 0.0, 0.0, 0.5, 0.0]]);
}
