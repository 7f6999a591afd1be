use deinterleave::clustering::{cluster_embeddings, HdbscanConfig};
use deinterleave::metrics::adjusted_mutual_information;
use deinterleave::models::identity_embed;
use deinterleave::pdw::{normalize_train, LabelVector, Partition, PulseTrain};
use deinterleave::simulator::{generate_emitter_pulses, generate_trains, EmitterSpec, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn mean_aoa_converges_at_the_standard_error_rate() {
    let mut spec = EmitterSpec::constant(1e-3, 9e9, 1e-6, 120.0, -50.0);
    spec.aoa_std = 2.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seconds in [1.0, 10.0, 100.0] {
        let pulses = generate_emitter_pulses(&spec, seconds, &mut rng);
        let n = pulses.len() as f64;
        let mean = pulses.iter().map(|p| p.aoa).sum::<f64>() / n;
        let se = spec.aoa_std / n.sqrt();
        assert!(
            (mean - spec.aoa_mean).abs() < 3.0 * se,
            "{n} pulses: mean {mean}, se {se}"
        );
    }
}

#[test]
fn paper_scale_trains_have_the_stated_shape() {
    let cfg = ScenarioConfig {
        n_trains: 6,
        ..ScenarioConfig::paper()
    };
    for t in generate_trains(&cfg, "train").unwrap() {
        assert_eq!(t.len(), 1000);
        let k = t.n_emitters().unwrap();
        assert!((2..=20).contains(&k), "{k} emitters");
    }
}

#[test]
fn two_emitters_in_disjoint_bands_separate_on_raw_features() {
    let a = EmitterSpec::constant(1.0e-3, 9.0e9, 1e-6, 90.0, -50.0);
    let b = EmitterSpec::constant(1.3e-3, 11.0e9, 1e-6, 90.0, -50.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pulses = Vec::new();
    let mut labels = Vec::new();
    for (label, spec) in [a, b].iter().enumerate() {
        for p in generate_emitter_pulses(spec, 0.05, &mut rng) {
            pulses.push(p);
            labels.push(label as i64);
        }
    }
    let train = PulseTrain::new("two", pulses, Some(LabelVector::new(labels))).unwrap();
    let z = identity_embed(&normalize_train(&train));
    let pred = cluster_embeddings(z.as_slice(), z.dim(), &HdbscanConfig::new(5)).unwrap();
    let ami = adjusted_mutual_information(&Partition::from_labels(&pred), &train.truth().unwrap()).unwrap();
    assert_eq!(pred.n_clusters(), 2);
    assert!((ami - 1.0).abs() < 1e-12, "AMI {ami}");
}

#[test]
fn desk_emitters_overlap_in_single_features() {
    // In a large share of desk trains some pair of emitters has carriers
    // within 5% of the band, so frequency alone cannot separate them.
    let cfg = ScenarioConfig {
        n_trains: 200,
        ..ScenarioConfig::desk()
    };
    let trains = generate_trains(&cfg, "train").unwrap();
    let overlapping = trains
        .iter()
        .filter(|t| {
            let labels = t.labels().unwrap().as_slice();
            let k = t.n_emitters().unwrap();
            let mut means = vec![(0.0, 0usize); k];
            for (p, &l) in t.pulses().iter().zip(labels) {
                means[l as usize].0 += p.frequency;
                means[l as usize].1 += 1;
            }
            let f: Vec<f64> = means.iter().map(|(s, c)| s / *c as f64).collect();
            (0..k).any(|i| (i + 1..k).any(|j| (f[i] - f[j]).abs() < 0.05e9))
        })
        .count();
    assert!(
        overlapping * 3 > trains.len(),
        "{overlapping} of {} trains",
        trains.len()
    );
}
