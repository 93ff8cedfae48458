//! MirrorBit-diode ternary CAM search.
//!
//! A stored word lives on one match line (column), one symbol per row. A
//! search runs in two steps so that rows at equal potential never share a
//! match line: first every row searching `1` is driven at `v_read` with the
//! match lines preset to 0 V, then every row searching `0` is grounded with
//! the match lines preset to `v_read`. Matching cells are reverse biased in
//! their active step and conduct `i_off`; each mismatch adds `i_on - i_off`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::array::{Array, ArrayMode, MCAMBit, Parasitics, StLevel};
use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::solver::{self, MlTermination, RowDrive, Solution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SwitchState {
    ClosedAtVread,
    ClosedAtGnd,
    Open,
}

/// Search-line switch for one row. `en` is high during the search-all-ones step.
pub fn switch_state(en: bool, bit: MCAMBit) -> SwitchState {
    match (en, bit) {
        (true, MCAMBit::One) => SwitchState::ClosedAtVread,
        (false, MCAMBit::Zero) => SwitchState::ClosedAtGnd,
        _ => SwitchState::Open,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TernaryQuery {
    pub bits: Vec<MCAMBit>,
}

impl TernaryQuery {
    pub fn new(bits: Vec<MCAMBit>) -> Self {
        Self { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Rows active in the given step.
    pub fn active_rows(&self, en: bool) -> usize {
        self.bits
            .iter()
            .filter(|&&b| switch_state(en, b) != SwitchState::Open)
            .count()
    }
}

impl FromStr for TernaryQuery {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(Self::new(MCAMBit::parse_word(s)?))
    }
}

impl fmt::Display for TernaryQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&MCAMBit::format_word(&self.bits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub ml_index: usize,
    /// |ML current| during search-all-ones (A).
    pub i_step1: f64,
    /// |ML current| during search-all-zeros (A).
    pub i_step0: f64,
    pub n_active1: usize,
    pub n_active0: usize,
    pub matched: bool,
    pub hamming_estimate: usize,
}

fn check_query(array: &Array, query: &TernaryQuery) -> Result<()> {
    array.require_mode(ArrayMode::Nor)?;
    if query.len() != array.rows() {
        return Err(Error::Length {
            expected: array.rows(),
            actual: query.len(),
        });
    }
    Ok(())
}

pub fn step_drives(params: &DeviceParams, query: &TernaryQuery, en: bool) -> Vec<RowDrive> {
    query
        .bits
        .iter()
        .map(|&b| match switch_state(en, b) {
            SwitchState::ClosedAtVread => RowDrive::Driven(params.v_read),
            SwitchState::ClosedAtGnd => RowDrive::Driven(0.0),
            SwitchState::Open => RowDrive::Open,
        })
        .collect()
}

/// Sense-amplifier preset for a step: ground for search-ones, `v_read` for search-zeros.
pub fn step_preset(params: &DeviceParams, en: bool) -> f64 {
    if en {
        0.0
    } else {
        params.v_read
    }
}

/// Magnitudes of the match-line currents in one search step.
pub fn search_step(array: &Array, query: &TernaryQuery, en: bool) -> Result<Vec<f64>> {
    check_query(array, query)?;
    let drives = step_drives(&array.params, query, en);
    let preset = step_preset(&array.params, en);
    let currents = if array.parasitics.is_ideal() {
        solver::ml_currents_ideal(array, &drives, preset)?
    } else {
        let term = MlTermination {
            preset,
            r_sense: array.parasitics.r_sense,
        };
        solver::solve_network(array, &drives, term)?.ml_currents
    };
    Ok(currents.into_iter().map(f64::abs).collect())
}

/// Full network solution of one search step, for inspection and dumps.
pub fn search_step_solution(array: &Array, query: &TernaryQuery, en: bool) -> Result<(solver::Network, Solution)> {
    check_query(array, query)?;
    let drives = step_drives(&array.params, query, en);
    let term = MlTermination {
        preset: step_preset(&array.params, en),
        r_sense: array.parasitics.r_sense,
    };
    let network = solver::assemble_network(array, &drives, term)?;
    let solution = solver::solve_assembled(&network, array.cols(), term)?;
    Ok((network, solution))
}

/// Mismatch count implied by one step current, clamped to `[0, n_active]`.
fn step_mismatches(params: &DeviceParams, current: f64, n_active: usize) -> usize {
    let excess = (current - n_active as f64 * params.i_off) / params.i_diff();
    excess.round().clamp(0.0, n_active as f64) as usize
}

fn step_matches(params: &DeviceParams, current: f64, n_active: usize) -> bool {
    current <= n_active as f64 * params.i_off + params.i_diff() / 2.0
}

/// Two-step ternary search over every match line.
pub fn search(array: &Array, query: &TernaryQuery) -> Result<Vec<SearchResult>> {
    let step1 = search_step(array, query, true)?;
    let step0 = search_step(array, query, false)?;
    let n1 = query.active_rows(true);
    let n0 = query.active_rows(false);
    let params = &array.params;
    Ok(step1
        .into_iter()
        .zip(step0)
        .enumerate()
        .map(|(ml_index, (i1, i0))| {
            let hamming_estimate = step_mismatches(params, i1, n1) + step_mismatches(params, i0, n0);
            // Thresholding and rounding share the same i_diff/2 boundary, except at an exact tie.
            let matched = step_matches(params, i1, n1) && step_matches(params, i0, n0) && hamming_estimate == 0;
            SearchResult {
                ml_index,
                i_step1: i1,
                i_step0: i0,
                n_active1: n1,
                n_active0: n0,
                matched,
                hamming_estimate,
            }
        })
        .collect())
}

/// All non-X rows driven at once into match lines held at 0 V through `r_sense`.
pub fn one_shot_search(array: &Array, query: &TernaryQuery, r_sense: f64) -> Result<Vec<f64>> {
    check_query(array, query)?;
    let v_read = array.params.v_read;
    let drives: Vec<RowDrive> = query
        .bits
        .iter()
        .map(|b| match b {
            MCAMBit::One => RowDrive::Driven(v_read),
            MCAMBit::Zero => RowDrive::Driven(0.0),
            MCAMBit::X => RowDrive::Open,
        })
        .collect();
    let term = MlTermination { preset: 0.0, r_sense };
    let solution = solver::solve_network(array, &drives, term)?;
    Ok(solution.ml_currents.into_iter().map(f64::abs).collect())
}

/// Match-line indices by ascending Hamming estimate, ties in index order.
pub fn hamming_rank(results: &[SearchResult]) -> Vec<usize> {
    let mut order: Vec<&SearchResult> = results.iter().collect();
    order.sort_by_key(|r| r.hamming_estimate);
    order.into_iter().map(|r| r.ml_index).collect()
}

pub fn write_results_csv(results: &[SearchResult], mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "ml_index,i_step1_A,i_step0_A,match,hamming_estimate")?;
    for r in results {
        writeln!(
            w,
            "{},{:.12e},{:.12e},{},{}",
            r.ml_index, r.i_step1, r.i_step0, r.matched as u8, r.hamming_estimate
        )?;
    }
    Ok(())
}

/// True when some non-matching column senses strictly less one-shot current
/// than some matching column.
pub fn ranking_inverted(one_shot: &[f64], matched: &[bool]) -> bool {
    let tol = 1e-9;
    one_shot.iter().zip(matched).any(|(&im, &m)| {
        m && one_shot
            .iter()
            .zip(matched)
            .any(|(&ik, &k)| !k && ik < im * (1.0 - tol))
    })
}

#[derive(Debug, Clone)]
pub struct CrosstalkInstance {
    /// Stored word per match line.
    pub stored: Vec<Vec<MCAMBit>>,
    pub query: TernaryQuery,
    pub r_sense: f64,
    pub one_shot_loaded: Vec<f64>,
    pub one_shot_ideal: Vec<f64>,
    pub two_step: Vec<SearchResult>,
}

/// Builds a NOR-mode array holding `stored` (one word per column).
pub fn cam_array(
    params: DeviceParams,
    parasitics: Parasitics,
    stored: &[Vec<MCAMBit>],
) -> Result<Array> {
    let rows = stored.first().map_or(0, Vec::len);
    let mut array = Array::new(rows, stored.len(), params, parasitics)?;
    for (col, word) in stored.iter().enumerate() {
        array.mcam_write_column(col, word)?;
    }
    array.set_mode(StLevel::High);
    Ok(array)
}

fn ternary_words(len: usize) -> Vec<Vec<MCAMBit>> {
    (0..3usize.pow(len as u32))
        .map(|mut k| {
            (0..len)
                .map(|_| {
                    let b = MCAMBit::ALL[k % 3];
                    k /= 3;
                    b
                })
                .collect()
        })
        .collect()
}

/// Exhaustive search for a stored/query pair on a `rows x cols` array where a
/// one-shot read with sense resistance `r_sense` ranks a mismatching column
/// below a matching one, the two-step read at the same `r_sense` still
/// classifies every column correctly, and the one-shot ranking is consistent
/// once `r_sense` is zero.
pub fn find_crosstalk_instance(
    params: DeviceParams,
    rows: usize,
    cols: usize,
    r_sense: f64,
) -> Result<Option<CrosstalkInstance>> {
    let words = ternary_words(rows);
    let queries = ternary_words(rows);
    let mut choice = vec![0usize; cols];
    let loaded = Parasitics {
        r_wire_per_cell: 0.0,
        r_sense,
    };
    loop {
        let stored: Vec<Vec<MCAMBit>> = choice.iter().map(|&i| words[i].clone()).collect();
        let ideal_array = cam_array(params, Parasitics::IDEAL, &stored)?;
        let loaded_array = cam_array(params, loaded, &stored)?;
        for bits in &queries {
            let query = TernaryQuery::new(bits.clone());
            let ideal = search(&ideal_array, &query)?;
            let matched: Vec<bool> = ideal.iter().map(|r| r.matched).collect();
            if !matched.iter().any(|&m| m) || matched.iter().all(|&m| m) {
                continue;
            }
            let one_shot_loaded = one_shot_search(&loaded_array, &query, r_sense)?;
            if !ranking_inverted(&one_shot_loaded, &matched) {
                continue;
            }
            let one_shot_ideal = one_shot_search(&ideal_array, &query, 0.0)?;
            if ranking_inverted(&one_shot_ideal, &matched) {
                continue;
            }
            let two_step = search(&loaded_array, &query)?;
            if two_step.iter().map(|r| r.matched).ne(matched.iter().copied()) {
                continue;
            }
            return Ok(Some(CrosstalkInstance {
                stored,
                query,
                r_sense,
                one_shot_loaded,
                one_shot_ideal,
                two_step,
            }));
        }
        // Odometer over column word choices.
        let mut k = 0;
        loop {
            if k == cols {
                return Ok(None);
            }
            choice[k] += 1;
            if choice[k] < words.len() {
                break;
            }
            choice[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ws: &[&str]) -> Vec<Vec<MCAMBit>> {
        ws.iter().map(|w| MCAMBit::parse_word(w).unwrap()).collect()
    }

    fn q(s: &str) -> TernaryQuery {
        s.parse().unwrap()
    }

    #[test]
    fn switch_truth_table() {
        assert_eq!(switch_state(true, MCAMBit::One), SwitchState::ClosedAtVread);
        assert_eq!(switch_state(false, MCAMBit::One), SwitchState::Open);
        assert_eq!(switch_state(false, MCAMBit::Zero), SwitchState::ClosedAtGnd);
        assert_eq!(switch_state(true, MCAMBit::Zero), SwitchState::Open);
        assert_eq!(switch_state(true, MCAMBit::X), SwitchState::Open);
        assert_eq!(switch_state(false, MCAMBit::X), SwitchState::Open);
    }

    #[test]
    fn step_currents_single_column() {
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &words(&["01X"])).unwrap();
        let query = q("010");
        let s1 = search_step(&a, &query, true).unwrap()[0];
        let s0 = search_step(&a, &query, false).unwrap()[0];
        assert!((s1 - 24e-9).abs() < 1e-20);
        assert!((s0 - 48e-9).abs() < 1e-20);
        assert_eq!(search_step(&a, &q("XXX"), true).unwrap(), vec![0.0]);
        assert_eq!(search_step(&a, &q("XXX"), false).unwrap(), vec![0.0]);
    }

    #[test]
    fn all_x_column_always_matches() {
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &words(&["XXXX"])).unwrap();
        for query in ["0000", "1111", "0101", "1X0X"] {
            let r = search(&a, &q(query)).unwrap()[0];
            assert!(r.matched);
            assert!((r.i_step1 - r.n_active1 as f64 * 24e-9).abs() < 1e-18);
            assert!((r.i_step0 - r.n_active0 as f64 * 24e-9).abs() < 1e-18);
        }
    }

    #[test]
    fn five_by_five_exact_match() {
        let stored = words(&["01101", "1X001", "00110", "11X10", "0101X"]);
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &stored).unwrap();
        let results = search(&a, &TernaryQuery::new(stored[3].iter().map(|&b| if b == MCAMBit::X { MCAMBit::One } else { b }).collect())).unwrap();
        let matched: Vec<usize> = results.iter().filter(|r| r.matched).map(|r| r.ml_index).collect();
        assert_eq!(matched, vec![3]);
        let min1 = results.iter().map(|r| r.i_step1).fold(f64::INFINITY, f64::min);
        let min0 = results.iter().map(|r| r.i_step0).fold(f64::INFINITY, f64::min);
        assert_eq!(results[3].i_step1, min1);
        assert_eq!(results[3].i_step0, min0);
        assert_eq!(hamming_rank(&results)[0], 3);
    }

    #[test]
    fn one_flip_costs_i_diff() {
        let p = DeviceParams::default();
        let a = cam_array(p, Parasitics::IDEAL, &words(&["0110", "0111"])).unwrap();
        let r = search(&a, &q("0110")).unwrap();
        let exact = r[0].i_step1 + r[0].i_step0;
        let flipped = r[1].i_step1 + r[1].i_step0;
        assert!(((flipped - exact) - p.i_diff()).abs() / p.i_diff() < 1e-12);
        assert_eq!(r[1].hamming_estimate, 1);
        assert!(!r[1].matched);
    }

    #[test]
    fn mode_and_length_errors() {
        let mut a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &words(&["01"])).unwrap();
        assert!(matches!(search(&a, &q("011")), Err(Error::Length { .. })));
        a.set_mode(StLevel::Low);
        assert!(matches!(search(&a, &q("01")), Err(Error::Mode { .. })));
    }

    #[test]
    fn one_shot_without_zero_bits_equals_step_one() {
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &words(&["01X", "110", "X01"])).unwrap();
        let query = q("1X1");
        assert_eq!(one_shot_search(&a, &query, 0.0).unwrap(), search_step(&a, &query, true).unwrap());
        assert_eq!(one_shot_search(&a, &q("XXX"), 0.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn rank_is_stable() {
        let mk = |i, h| SearchResult {
            ml_index: i,
            i_step1: 0.0,
            i_step0: 0.0,
            n_active1: 0,
            n_active0: 0,
            matched: h == 0,
            hamming_estimate: h,
        };
        let results = [mk(0, 2), mk(1, 1), mk(2, 1), mk(3, 0), mk(4, 2)];
        assert_eq!(hamming_rank(&results), vec![3, 1, 2, 0, 4]);
    }

    #[test]
    fn csv_format() {
        let a = cam_array(DeviceParams::default(), Parasitics::IDEAL, &words(&["01", "10"])).unwrap();
        let mut out = Vec::new();
        write_results_csv(&search(&a, &q("01")).unwrap(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ml_index,i_step1_A,i_step0_A,match,hamming_estimate");
        assert_eq!(lines[1], "0,2.400000000000e-8,2.400000000000e-8,1,0");
        assert!(lines[2].ends_with(",0,2"));
    }

    #[test]
    fn query_parsing() {
        let query: TernaryQuery = "1x0X".parse().unwrap();
        assert_eq!(query.to_string(), "1X0X");
        assert_eq!(query.active_rows(true), 1);
        assert_eq!(query.active_rows(false), 1);
        assert!("10a".parse::<TernaryQuery>().is_err());
    }
}
