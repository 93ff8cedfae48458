mod common;

use fpma_core::device::diode_forward;
use fpma_core::mcam::{self, cam_array, hamming_rank, TernaryQuery};
use fpma_core::metrics::{bench_report, search_energy, step_trace, TimingParams};
use fpma_core::solver::{assemble_network, ml_currents_ideal, solve_network, MlTermination, RowDrive};
use fpma_core::{Array, CellState, DeviceParams, MCAMBit, Parasitics, StLevel, SwitchingCharge, Workload};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

fn random_nor_array(rows: usize, cols: usize, parasitics: Parasitics, rng: &mut ChaCha8Rng) -> Array {
    let mut a = Array::new(rows, cols, DeviceParams::default(), parasitics).unwrap();
    for r in 0..rows {
        for c in 0..cols {
            a.program_cell(r, c, CellState::ALL[rng.random_range(0..4)]).unwrap();
        }
    }
    a.set_mode(StLevel::High);
    a
}

fn random_drives(rows: usize, rng: &mut ChaCha8Rng) -> Vec<RowDrive> {
    (0..rows)
        .map(|_| match rng.random_range(0..3) {
            0 => RowDrive::Open,
            1 => RowDrive::Driven(0.0),
            _ => RowDrive::Driven(1.5),
        })
        .collect()
}

#[test]
fn assembled_matrix_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let parasitics = Parasitics {
            r_wire_per_cell: if rng.random_bool(0.5) { rng.random_range(1.0..1e4) } else { 0.0 },
            r_sense: rng.random_range(1e2..1e7),
        };
        let (rows, cols) = (rng.random_range(1..7), rng.random_range(1..7));
        let a = random_nor_array(rows, cols, parasitics, &mut rng);
        let drives = random_drives(rows, &mut rng);
        let term = MlTermination { preset: 0.0, r_sense: parasitics.r_sense };
        let net = assemble_network(&a, &drives, term).unwrap();
        let assignment: Vec<bool> = (0..net.branches.len()).map(|_| rng.random_bool(0.5)).collect();
        let (g, _) = net.system(&assignment);
        assert_eq!(g, g.transpose());
        assert!(g.clone().cholesky().is_some());
    }
}

#[test]
fn solver_conserves_current_and_is_self_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..300 {
        let parasitics = Parasitics {
            r_wire_per_cell: rng.random_range(0.0..5e3),
            r_sense: rng.random_range(0.0..5e6),
        };
        let a = random_nor_array(6, 5, parasitics, &mut rng);
        let drives = random_drives(6, &mut rng);
        let term = MlTermination {
            preset: if rng.random_bool(0.5) { 0.0 } else { 1.5 },
            r_sense: parasitics.r_sense,
        };
        let s1 = solve_network(&a, &drives, term).unwrap();
        let s2 = solve_network(&a, &drives, term).unwrap();
        assert!(s1.max_residual < 1e-12);
        assert_eq!(s1.ml_currents, s2.ml_currents);
        assert_eq!(s1.iterations, s2.iterations);
        for b in &s1.branch_currents {
            if b.bias.abs() > fpma_core::solver::ZERO_BIAS_BAND {
                assert_eq!(b.forward, diode_forward(b.state, b.bias));
            }
        }
    }
}

#[test]
fn adding_a_mismatch_never_lowers_ml_current() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..200 {
        let rows = 6;
        let word = random_word(rows, &mut rng);
        let query = random_binary_word(rows, &mut rng);
        let r = rng.random_range(0..rows);
        let mut worse = word.clone();
        worse[r] = flip(query[r]);
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &[word, worse]).unwrap();
        let q = TernaryQuery::new(query);
        for en in [true, false] {
            let i = mcam::search_step(&a, &q, en).unwrap();
            assert!(i[1] >= i[0]);
        }
    }
}

/// Every stored word of height `h` as one column, checked against every query.
#[test]
fn step_decomposition_exhaustive_up_to_six_rows() {
    let p = DeviceParams::default();
    for h in 1..=6 {
        let words = all_words(h);
        let a = cam_array(p, Parasitics::IDEAL, &words).unwrap();
        for query in &words {
            let results = mcam::search(&a, &TernaryQuery::new(query.clone())).unwrap();
            for (stored, r) in words.iter().zip(&results) {
                for (en, got, n) in [(true, r.i_step1, r.n_active1), (false, r.i_step0, r.n_active0)] {
                    let m = stored
                        .iter()
                        .zip(query)
                        .filter(|(&s, &q)| active(q, en) && s != MCAMBit::X && s != q)
                        .count();
                    let expected = m as f64 * p.i_on() + (n - m) as f64 * p.i_off;
                    assert!(rel_close(got, expected, 1e-12), "h={h} {stored:?} {query:?}");
                }
                assert_eq!(r.matched, r.hamming_estimate == 0);
                assert!(r.hamming_estimate <= r.n_active1 + r.n_active0);
            }
        }
    }
}

#[test]
fn two_step_totality() {
    for query in all_words(5) {
        let q = TernaryQuery::new(query.clone());
        for (row, &b) in query.iter().enumerate() {
            let in1 = mcam::step_drives(&DeviceParams::default(), &q, true)[row] != RowDrive::Open;
            let in0 = mcam::step_drives(&DeviceParams::default(), &q, false)[row] != RowDrive::Open;
            if b == MCAMBit::X {
                assert!(!in1 && !in0);
            } else {
                assert!(in1 ^ in0);
            }
        }
    }
}

#[test]
fn rank_agrees_with_true_distance() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..200 {
        let stored: Vec<Vec<MCAMBit>> = (0..8).map(|_| random_word(8, &mut rng)).collect();
        let query = random_word(8, &mut rng);
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &stored).unwrap();
        let rank = hamming_rank(&mcam::search(&a, &TernaryQuery::new(query.clone())).unwrap());
        let mut oracle: Vec<usize> = (0..8).collect();
        oracle.sort_by_key(|&c| distance(&stored[c], &query));
        assert_eq!(rank, oracle);
    }
}

#[test]
fn solver_crosstalk_instance_on_three_by_three() {
    let inst = mcam::find_crosstalk_instance(DeviceParams::default(), 3, 3, 1e6)
        .unwrap()
        .expect("instance");
    let oracle: Vec<bool> = inst.stored.iter().map(|w| matches(w, &inst.query.bits)).collect();
    assert!(mcam::ranking_inverted(&inst.one_shot_loaded, &oracle));
    assert!(!mcam::ranking_inverted(&inst.one_shot_ideal, &oracle));
    assert!(inst.two_step.iter().map(|r| r.matched).eq(oracle));
}

#[test]
fn per_bit_energy_independent_of_width() {
    // Same column pattern repeated across the width.
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    let base: Vec<Vec<MCAMBit>> = (0..4).map(|_| random_word(16, &mut rng)).collect();
    let query = TernaryQuery::new(random_word(16, &mut rng));
    let timing = TimingParams::default();
    let per_bit = |copies: usize| {
        let stored: Vec<_> = (0..copies).flat_map(|_| base.clone()).collect();
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &stored).unwrap();
        let traces = [step_trace(&a, &query, true).unwrap(), step_trace(&a, &query, false).unwrap()];
        search_energy(&traces, &timing).per_bit()
    };
    let one = per_bit(1);
    for copies in [2, 4, 16] {
        assert!(rel_close(per_bit(copies), one, 1e-12));
    }
}

#[test]
fn energy_additive_over_workload_concatenation() {
    let a = Array::new(8, 8, DeviceParams::default(), Parasitics::IDEAL).unwrap();
    let t = TimingParams::default();
    let c = SwitchingCharge::default();
    let w = Workload { num_searches: 24, num_writes: 0, seed: 5, distinct_queries: 8 };
    let r1 = bench_report(&a, &w, &t, &c).unwrap();
    let r3 = bench_report(&a, &Workload { num_searches: 72, ..w }, &t, &c).unwrap();
    assert!(rel_close(r3.search_energy_total, 3.0 * r1.search_energy_total, 1e-12));
    assert!(r1.search_energy_total >= 0.0 && r1.write_energy_total >= 0.0);
}

proptest! {
    #[test]
    fn x_neutrality(word in proptest::collection::vec(0usize..3, 6), query in proptest::collection::vec(0usize..3, 6), row in 0usize..6) {
        let stored: Vec<MCAMBit> = word.iter().map(|&k| MCAMBit::ALL[k]).collect();
        let query = TernaryQuery::new(query.iter().map(|&k| MCAMBit::ALL[k]).collect());
        let mut with_x = stored.clone();
        with_x[row] = MCAMBit::X;
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &[stored, with_x]).unwrap();
        for en in [true, false] {
            let i = mcam::search_step(&a, &query, en).unwrap();
            prop_assert!(i[1] <= i[0]);
        }
    }

    #[test]
    fn mismatch_monotone_energy(word in proptest::collection::vec(0usize..2, 8), flips in proptest::collection::vec(any::<bool>(), 8)) {
        let query: Vec<MCAMBit> = word.iter().map(|&k| MCAMBit::ALL[k]).collect();
        let t = TimingParams::default();
        // Stored = query with a growing prefix of the chosen bits flipped.
        let mut energies = Vec::new();
        for upto in 0..=8 {
            let stored: Vec<MCAMBit> = (0..8).map(|i| if i < upto && flips[i] { flip(query[i]) } else { query[i] }).collect();
            let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &[stored]).unwrap();
            let q = TernaryQuery::new(query.clone());
            let traces = [step_trace(&a, &q, true).unwrap(), step_trace(&a, &q, false).unwrap()];
            energies.push(search_energy(&traces, &t).energy);
        }
        prop_assert!(energies.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn ideal_and_network_agree_with_zero_parasitics(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_nor_array(5, 5, Parasitics::IDEAL, &mut rng);
        let drives = random_drives(5, &mut rng);
        let ideal = ml_currents_ideal(&a, &drives, 0.0).unwrap();
        let sol = solve_network(&a, &drives, MlTermination { preset: 0.0, r_sense: 0.0 }).unwrap();
        for (x, y) in ideal.iter().zip(&sol.ml_currents) {
            prop_assert!(rel_close(*x, *y, 1e-12));
        }
    }
}
