//! Property tests for the invariants that hold over arbitrary inputs.

use proptest::prelude::*;

use qnas_core::noise::{apply_readout_error, DeviceModel};
use qnas_core::prune::{select_mask, PruneMask};
use qnas_core::qcompile::normalize_angle;
use qnas_core::qstate::{
    expectation, run_circuit, Circuit, Pauli, PauliString, RunMode,
};

fn gate_line(kind_idx: usize, wire: usize, angle: f64, slot: Option<usize>) -> String {
    let kinds = ["RX", "RY", "RZ", "U1", "H", "SX", "X", "S", "T"];
    let kind = kinds[kind_idx % kinds.len()];
    let has_param = kind_idx % kinds.len() <= 3;
    match (has_param, slot) {
        (false, _) => format!("{kind} {wire}"),
        (true, Some(s)) => format!("{kind} {wire} @{s}"),
        (true, None) => format!("{kind} {wire} {angle}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn circuit_text_round_trips(
        spec in prop::collection::vec((0usize..9, 0usize..4, -3.0f64..3.0), 1..24)
    ) {
        let mut slot = 0usize;
        let lines: Vec<String> = spec
            .iter()
            .map(|&(k, w, a)| {
                let use_slot = k % 2 == 0 && k % 9 <= 3;
                let s = if use_slot {
                    slot += 1;
                    Some(slot - 1)
                } else {
                    None
                };
                gate_line(k, w, a, s)
            })
            .collect();
        let text = lines.join("\n");
        let circuit = Circuit::from_text(&text, Some(4)).unwrap();
        let again = Circuit::from_text(&circuit.to_text(), Some(4)).unwrap();
        prop_assert_eq!(&circuit, &again);
        prop_assert_eq!(circuit.to_text(), again.to_text());
    }

    #[test]
    fn norm_and_expectation_bounds(
        seed in 0u64..5000,
        len in 1usize..40,
        coeff in -3.0f64..3.0
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (circuit, params) =
            qnas_core::qstate::random_circuit(3, len, &qnas_core::qstate::ALL_KINDS, &mut rng);
        let state = run_circuit(&circuit, &params, RunMode::Dynamic).unwrap();
        prop_assert!((state.norm() - 1.0).abs() < 1e-9);
        let obs = PauliString::new([(0, Pauli::X), (2, Pauli::Z)], coeff);
        let e = expectation(&state, &obs);
        prop_assert!(e.abs() <= coeff.abs() + 1e-9);
    }

    #[test]
    fn repair_always_injective_and_preserves_first(
        mapping in prop::collection::vec(0usize..8, 1..8)
    ) {
        let repaired = qnas_core::evo::repair_mapping(&mapping, 8).unwrap();
        let mut seen = [false; 8];
        for &p in &repaired {
            prop_assert!(!seen[p], "repair left duplicates");
            seen[p] = true;
        }
        // first occurrences survive
        let mut first_seen = std::collections::BTreeSet::new();
        for (orig, rep) in mapping.iter().zip(&repaired) {
            if first_seen.insert(*orig) {
                prop_assert_eq!(orig, rep);
            }
        }
        // already-injective inputs are fixed points
        let again = qnas_core::evo::repair_mapping(&repaired, 8).unwrap();
        prop_assert_eq!(repaired, again);
    }

    #[test]
    fn readout_channel_is_stochastic(
        probs in prop::collection::vec(0.0f64..1.0, 4),
        p10 in 0.0f64..1.0,
        p01 in 0.0f64..1.0
    ) {
        let total: f64 = probs.iter().sum();
        prop_assume!(total > 1e-9);
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let text = format!("[topology]\nqubits = 2\n0 1\n[readout]\n* {p10} {p01}\n");
        let device = DeviceModel::from_text(&text).unwrap();
        let out = apply_readout_error(&probs, &device, &[0, 1]);
        prop_assert!(out.iter().all(|&p| p >= -1e-12));
        prop_assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prune_masks_stay_monotone_and_sized(
        params in prop::collection::vec(-7.0f64..7.0, 1..24),
        r1 in 0.0f64..1.0,
        r2 in 0.0f64..1.0
    ) {
        let lo = r1.min(r2);
        let hi = r1.max(r2);
        let m1 = select_mask(&params, lo, &PruneMask::empty(params.len()));
        let m2 = select_mask(&params, hi, &m1);
        prop_assert_eq!(m1.count(), (lo * params.len() as f64).floor() as usize);
        prop_assert_eq!(m2.count(), (hi * params.len() as f64).floor() as usize);
        for (a, b) in m1.pruned.iter().zip(&m2.pruned) {
            prop_assert!(!a || *b, "mask lost a pruned slot");
        }
    }

    #[test]
    fn angle_normalization_lands_in_range(a in -50.0f64..50.0) {
        let n = normalize_angle(a);
        prop_assert!((-std::f64::consts::PI..std::f64::consts::PI).contains(&n));
        // congruent modulo 2π
        let k = (a - n) / (2.0 * std::f64::consts::PI);
        prop_assert!((k - k.round()).abs() < 1e-9);
    }
}
