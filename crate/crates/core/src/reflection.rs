//! Reflecting-element circuit response and the simplified frequency-selective
//! reflection model.
//!
//! Each element is an equivalent parallel resonator: `L1` in parallel with the
//! series branch `L2 + C + R`, where `C` is the varactor capacitance. The
//! reflection coefficient against free space follows from the element
//! impedance. Sweeping `C` shows that each carrier frequency is only tunable
//! over a narrow capacitance window, which motivates modelling an element as
//! serving at most one band with a freely tunable phase while every other band
//! sees a fixed unit reflection.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{CVec, Error, Result, C64};

const TWO_PI: f64 = 2.0 * PI;

/// Varactor / resonator constants of one reflecting element.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Parallel inductance (H).
    pub l1: f64,
    /// Series inductance (H).
    pub l2: f64,
    /// Loss resistance (ohm).
    pub r: f64,
    /// Free-space impedance (ohm).
    #[serde(default = "default_z0")]
    pub z0: f64,
}

fn default_z0() -> f64 {
    377.0
}

impl Default for CircuitParams {
    /// SMV1231-079 surface-mount varactor.
    fn default() -> Self {
        Self {
            l1: 2.5e-9,
            l2: 0.7e-9,
            r: 1.0,
            z0: 377.0,
        }
    }
}

impl CircuitParams {
    pub fn new(l1: f64, l2: f64, r: f64, z0: f64) -> Result<Self> {
        let p = Self { l1, l2, r, z0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0 && self.r >= 0.0 && self.z0 > 0.0) {
            return Err(Error::Domain(format!(
                "circuit parameters need L1 > 0, L2 > 0, R >= 0, Z0 > 0 (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Carrier frequencies of the S bands, strictly descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrequencyPlan(Vec<f64>);

impl FrequencyPlan {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        if frequencies.is_empty() {
            return Err(Error::Domain("frequency plan is empty".into()));
        }
        if frequencies.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
            return Err(Error::Domain("frequencies must be positive and finite".into()));
        }
        if frequencies.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::Domain(
                "frequencies must be strictly descending (f_1 > f_2 > ...)".into(),
            ));
        }
        Ok(Self(frequencies))
    }

    /// The three-band plan of the reference deployment (2.605, 2.345, 1.885 GHz).
    pub fn reference() -> Self {
        Self(vec![2.605e9, 2.345e9, 1.885e9])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for FrequencyPlan {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FrequencyPlan> for Vec<f64> {
    fn from(p: FrequencyPlan) -> Self {
        p.0
    }
}

/// Element impedance `Z(C, f)`.
pub fn impedance(params: &CircuitParams, c: f64, f: f64) -> Result<C64> {
    if !(c > 0.0) || !(f > 0.0) {
        return Err(Error::Domain(format!(
            "impedance needs C > 0 and f > 0 (got C = {c}, f = {f})"
        )));
    }
    let jw = C64::new(0.0, TWO_PI * f);
    let branch = jw * params.l2 + (jw * c).inv() + params.r;
    let parallel = jw * params.l1;
    Ok(parallel * branch / (parallel + branch))
}

/// Reflection coefficient `(Z - Z0) / (Z + Z0)`.
pub fn reflection_coefficient(params: &CircuitParams, c: f64, f: f64) -> Result<C64> {
    let z = impedance(params, c, f)?;
    let den = z + params.z0;
    if den.norm() < 1e-12 {
        return Err(Error::Numerical(format!(
            "|Z + Z0| vanishes at C = {c}, f = {f}"
        )));
    }
    Ok((z - params.z0) / den)
}

/// Capacitance sweep used to characterise the tunable windows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    /// Lower end of the sweep (F).
    pub c_min: f64,
    /// Upper end of the sweep (F).
    pub c_max: f64,
    pub points: usize,
    /// Fraction of a band's total phase swing its tunable window must cover.
    pub span_fraction: f64,
    /// Largest tolerated overlap between two raw windows, as a fraction of the
    /// shorter one.
    pub max_overlap: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            c_min: 0.5e-12,
            c_max: 6e-12,
            points: 2000,
            span_fraction: 0.75,
            max_overlap: 0.5,
        }
    }
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points.max(2);
        (0..n)
            .map(|i| self.c_min + (self.c_max - self.c_min) * i as f64 / (n - 1) as f64)
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.c_min > 0.0 && self.c_max > self.c_min) || self.points < 2 {
            return Err(Error::Config(format!("invalid capacitance sweep {self:?}")));
        }
        if !(self.span_fraction > 0.0 && self.span_fraction <= 1.0) {
            return Err(Error::Config("span_fraction must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Unwrapped phase of the reflection coefficient along a capacitance grid.
pub fn phase_response(params: &CircuitParams, grid: &[f64], f: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(grid.len());
    let mut prev: Option<f64> = None;
    for &c in grid {
        let raw = reflection_coefficient(params, c, f)?.arg();
        let next = match prev {
            None => raw,
            // smallest increment modulo 2pi
            Some(p) => p + ((raw - p) + PI).rem_euclid(TWO_PI) - PI,
        };
        out.push(next);
        prev = Some(next);
    }
    Ok(out)
}

/// Phase swing (max - min of the unwrapped phase, radians) over `[c_lo, c_hi]`.
pub fn phase_swing(params: &CircuitParams, f: f64, c_lo: f64, c_hi: f64, points: usize) -> Result<f64> {
    let spec = SweepSpec {
        c_min: c_lo,
        c_max: c_hi,
        points,
        ..SweepSpec::default()
    };
    let ph = phase_response(params, &spec.grid(), f)?;
    let (lo, hi) = min_max(&ph);
    Ok(hi - lo)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)))
}

/// Closed capacitance interval in farads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapInterval {
    pub lo: f64,
    pub hi: f64,
}

impl CapInterval {
    pub fn contains(&self, c: f64) -> bool {
        c >= self.lo && c <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Tunable capacitance window per band plus the residual ("gray") set in which
/// no band is tunable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacitancePartition {
    pub frequencies: Vec<f64>,
    /// `intervals[s]` is the window of band `s` (same order as the plan).
    pub intervals: Vec<CapInterval>,
    /// Sweep pieces outside every window, ascending.
    pub gray: Vec<CapInterval>,
}

impl CapacitancePartition {
    /// Band whose window contains `c`, if any.
    pub fn band_of(&self, c: f64) -> Option<usize> {
        self.intervals.iter().position(|iv| iv.contains(c))
    }

    /// Plain-text table, one row per band plus the gray set.
    pub fn table(&self) -> String {
        let mut out = String::from("band  frequency_ghz  c_lo_pf  c_hi_pf\n");
        for (s, (f, iv)) in self.frequencies.iter().zip(&self.intervals).enumerate() {
            out.push_str(&format!(
                "{:<5} {:>13.4} {:>8.4} {:>8.4}\n",
                s + 1,
                f / 1e9,
                iv.lo * 1e12,
                iv.hi * 1e12
            ));
        }
        for iv in &self.gray {
            out.push_str(&format!(
                "{:<5} {:>13} {:>8.4} {:>8.4}\n",
                "gray",
                "-",
                iv.lo * 1e12,
                iv.hi * 1e12
            ));
        }
        out
    }
}

/// Shortest window `[grid[lo], grid[hi]]` over which the phase covers at least
/// `target` radians.
fn minimal_window(grid: &[f64], phase: &[f64], target: f64) -> (usize, usize) {
    let n = grid.len();
    let mut best = (0, n - 1);
    let mut best_width = f64::INFINITY;
    for lo in 0..n {
        let (mut pmin, mut pmax) = (phase[lo], phase[lo]);
        for hi in lo..n {
            pmin = pmin.min(phase[hi]);
            pmax = pmax.max(phase[hi]);
            let width = grid[hi] - grid[lo];
            if width >= best_width {
                break;
            }
            if pmax - pmin >= target {
                best = (lo, hi);
                best_width = width;
                break;
            }
        }
    }
    best
}

/// Splits the capacitance sweep into one tunable window per band and a
/// residual gray set.
pub fn partition_capacitance(
    params: &CircuitParams,
    plan: &FrequencyPlan,
    sweep: &SweepSpec,
) -> Result<CapacitancePartition> {
    params.validate()?;
    sweep.validate()?;
    let grid = sweep.grid();

    let mut raw = Vec::with_capacity(plan.len());
    for &f in plan.as_slice() {
        let phase = phase_response(params, &grid, f)?;
        let (pmin, pmax) = min_max(&phase);
        let (lo, hi) = minimal_window(&grid, &phase, sweep.span_fraction * (pmax - pmin));
        raw.push(CapInterval {
            lo: grid[lo],
            hi: grid[hi],
        });
    }

    // resolve overlaps between neighbours in capacitance order
    let mut order: Vec<usize> = (0..raw.len()).collect();
    order.sort_by(|&a, &b| raw[a].lo.total_cmp(&raw[b].lo));
    let mut intervals = raw.clone();
    for pair in order.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let overlap = raw[a].hi.min(raw[b].hi) - raw[b].lo;
        if overlap <= 0.0 {
            continue;
        }
        let shorter = raw[a].width().min(raw[b].width());
        let frac = if shorter > 0.0 { overlap / shorter } else { 1.0 };
        if frac > sweep.max_overlap {
            let (fa, fb) = (plan.as_slice()[a], plan.as_slice()[b]);
            return Err(Error::PartitionOverlap {
                f_hi: fa.max(fb),
                f_lo: fa.min(fb),
                overlap: 100.0 * frac,
            });
        }
        let mid = 0.5 * (raw[b].lo + raw[a].hi.min(raw[b].hi));
        let step = (sweep.c_max - sweep.c_min) / (sweep.points - 1) as f64;
        intervals[a].hi = intervals[a].hi.min(mid);
        intervals[b].lo = intervals[b].lo.max(mid + 0.5 * step);
    }

    let mut gray = Vec::new();
    let mut cursor = sweep.c_min;
    for &i in &order {
        let iv = intervals[i];
        if iv.lo > cursor {
            gray.push(CapInterval { lo: cursor, hi: iv.lo });
        }
        cursor = cursor.max(iv.hi);
    }
    if cursor < sweep.c_max {
        gray.push(CapInterval {
            lo: cursor,
            hi: sweep.c_max,
        });
    }

    Ok(CapacitancePartition {
        frequencies: plan.as_slice().to_vec(),
        intervals,
        gray,
    })
}

/// Maps a phase into `(0, 2pi]`; a zero phase is reported as `2pi`.
pub fn wrap_phase(phi: f64) -> f64 {
    let r = phi.rem_euclid(TWO_PI);
    if r <= 0.0 || r >= TWO_PI {
        TWO_PI
    } else {
        r
    }
}

/// Ideal phases and binary service selection of the whole surface.
///
/// The selection is kept as one optional BS index per element, so a column of
/// the binary selection matrix can never hold more than one 1.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionState {
    /// `phi[(s, m)]` in `(0, 2pi]`.
    phi: DMatrix<f64>,
    /// Served BS of each element.
    selection: Vec<Option<usize>>,
}

impl ReflectionState {
    /// All phases at `2pi` (unit reflection), no element selected.
    pub fn new(num_bs: usize, num_elements: usize) -> Self {
        Self {
            phi: DMatrix::from_element(num_bs, num_elements, TWO_PI),
            selection: vec![None; num_elements],
        }
    }

    pub fn from_parts(phi: DMatrix<f64>, selection: Vec<Option<usize>>) -> Result<Self> {
        if phi.ncols() != selection.len() {
            return Err(Error::Dimension(format!(
                "phase matrix has {} columns but selection has {} entries",
                phi.ncols(),
                selection.len()
            )));
        }
        if let Some(bad) = selection.iter().flatten().find(|&&s| s >= phi.nrows()) {
            return Err(Error::Dimension(format!("selected BS {bad} out of range")));
        }
        Ok(Self {
            phi: phi.map(wrap_phase),
            selection,
        })
    }

    /// Builds a state from a binary S x M selection matrix; fails if any column
    /// selects more than one BS or holds a non-binary entry.
    pub fn from_matrix(phi: DMatrix<f64>, a: &DMatrix<u8>) -> Result<Self> {
        if a.shape() != phi.shape() {
            return Err(Error::Dimension("phase and selection shapes differ".into()));
        }
        let mut selection = vec![None; a.ncols()];
        for m in 0..a.ncols() {
            for s in 0..a.nrows() {
                match a[(s, m)] {
                    0 => {}
                    1 if selection[m].is_none() => selection[m] = Some(s),
                    1 => {
                        return Err(Error::Domain(format!(
                            "element {m} selects more than one BS"
                        )))
                    }
                    v => return Err(Error::Domain(format!("non-binary selection entry {v}"))),
                }
            }
        }
        Self::from_parts(phi, selection)
    }

    pub fn num_bs(&self) -> usize {
        self.phi.nrows()
    }

    pub fn num_elements(&self) -> usize {
        self.phi.ncols()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn phase(&self, s: usize, m: usize) -> f64 {
        self.phi[(s, m)]
    }

    pub fn set_phase(&mut self, s: usize, m: usize, phi: f64) {
        self.phi[(s, m)] = wrap_phase(phi);
    }

    pub fn selection(&self) -> &[Option<usize>] {
        &self.selection
    }

    pub fn selected(&self, s: usize, m: usize) -> bool {
        self.selection[m] == Some(s)
    }

    pub fn set_selection(&mut self, m: usize, s: Option<usize>) {
        assert!(s.is_none_or(|s| s < self.num_bs()));
        self.selection[m] = s;
    }

    /// Row `s` of the selection matrix as booleans.
    pub fn selection_row(&self, s: usize) -> Vec<bool> {
        self.selection.iter().map(|&x| x == Some(s)).collect()
    }

    /// Binary S x M selection matrix.
    pub fn a_matrix(&self) -> DMatrix<u8> {
        let mut a = DMatrix::zeros(self.num_bs(), self.num_elements());
        for (m, s) in self.selection.iter().enumerate() {
            if let Some(s) = s {
                a[(*s, m)] = 1;
            }
        }
        a
    }

    /// Column-encoded selection string, one character per element: the 1-based
    /// BS index, or `0` for an unselected element.
    pub fn selection_code(&self) -> String {
        self.selection
            .iter()
            .map(|s| match s {
                Some(s) if *s < 9 => char::from(b'1' + *s as u8),
                Some(_) => '+',
                None => '0',
            })
            .collect()
    }
}

/// Practical reflection vector of BS `s`: `exp(j phi_{s,m} a_{s,m})`.
pub fn practical_reflection(state: &ReflectionState, s: usize) -> CVec {
    CVec::from_iterator(
        state.num_elements(),
        (0..state.num_elements()).map(|m| {
            if state.selected(s, m) {
                C64::from_polar(1.0, state.phase(s, m))
            } else {
                C64::new(1.0, 0.0)
            }
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn varactor() -> CircuitParams {
        CircuitParams::default()
    }

    #[test]
    fn impedance_matches_high_precision_value() {
        // 40-digit evaluation of the circuit formula
        let z = impedance(&varactor(), 1.5e-12, 2.345e9).unwrap();
        assert_relative_eq!(z.re, 293.738_182_078_544_2, max_relative = 1e-12);
        assert_relative_eq!(z.im, -521.976_661_937_888_1, max_relative = 1e-12);
    }

    #[test]
    fn series_resonance_shorts_the_element() {
        let p = CircuitParams { r: 0.0, ..varactor() };
        let c = 1.5e-12;
        let f = 1.0 / (TWO_PI * (p.l2 * c).sqrt());
        let z = impedance(&p, c, f).unwrap();
        assert!(z.norm() < 1e-9, "{z}");
    }

    #[test]
    fn huge_parallel_inductance_leaves_series_branch() {
        let p = CircuitParams { l1: 1.0, ..varactor() };
        let (c, f) = (1.7e-12, 2.0e9);
        let jw = C64::new(0.0, TWO_PI * f);
        let branch = jw * p.l2 + (jw * c).inv() + p.r;
        let z = impedance(&p, c, f).unwrap();
        assert!((z - branch).norm() / branch.norm() < 1e-6);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(impedance(&varactor(), 0.0, 1e9), Err(Error::Domain(_))));
        assert!(matches!(impedance(&varactor(), 1e-12, -1.0), Err(Error::Domain(_))));
        assert!(CircuitParams::new(-1.0, 1e-9, 1.0, 377.0).is_err());
        assert!(FrequencyPlan::new(vec![1e9, 2e9]).is_err());
        assert!(FrequencyPlan::new(vec![]).is_err());
    }

    #[test]
    fn reflection_coefficient_matches_high_precision_value() {
        let t = reflection_coefficient(&varactor(), 1.0e-12, 2.605e9).unwrap();
        assert_relative_eq!(t.re, -0.417_466_022_900_261_7, max_relative = 1e-11);
        assert_relative_eq!(t.im, 0.819_250_607_123_677_6, max_relative = 1e-11);
    }

    #[test]
    fn lossless_element_reflects_fully() {
        let p = CircuitParams { r: 0.0, ..varactor() };
        for i in 0..40 {
            for j in 0..25 {
                let c = 0.3e-12 + 0.2e-12 * i as f64;
                let f = 0.5e9 + 0.15e9 * j as f64;
                let t = reflection_coefficient(&p, c, f).unwrap();
                assert!((t.norm() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn single_band_partition_has_complementary_gray_set() {
        let plan = FrequencyPlan::new(vec![2.345e9]).unwrap();
        let sweep = SweepSpec::default();
        let part = partition_capacitance(&varactor(), &plan, &sweep).unwrap();
        assert_eq!(part.intervals.len(), 1);
        let covered: f64 = part.intervals[0].width() + part.gray.iter().map(|g| g.width()).sum::<f64>();
        assert_relative_eq!(covered, sweep.c_max - sweep.c_min, max_relative = 1e-12);
    }

    #[test]
    fn close_frequencies_are_rejected() {
        let plan = FrequencyPlan::new(vec![2.346e9, 2.345e9]).unwrap();
        let err = partition_capacitance(&varactor(), &plan, &SweepSpec::default()).unwrap_err();
        assert!(matches!(err, Error::PartitionOverlap { .. }), "{err}");
    }

    #[test]
    fn wrap_phase_lands_in_half_open_interval() {
        assert_eq!(wrap_phase(0.0), TWO_PI);
        assert_eq!(wrap_phase(TWO_PI), TWO_PI);
        assert_relative_eq!(wrap_phase(-PI / 2.0), 1.5 * PI);
        assert_relative_eq!(wrap_phase(5.0 * PI), PI, epsilon = 1e-12);
    }

    #[test]
    fn reflection_vector_cases() {
        let mut st = ReflectionState::new(2, 3);
        assert!(practical_reflection(&st, 0).iter().all(|&t| t == C64::new(1.0, 0.0)));
        st.set_selection(1, Some(0));
        st.set_phase(0, 1, PI);
        st.set_phase(1, 1, 0.3);
        let t0 = practical_reflection(&st, 0);
        assert!((t0[1] + 1.0).norm() < 1e-15);
        // element 1 does not serve BS 1, its stale phase is ignored
        assert_eq!(practical_reflection(&st, 1)[1], C64::new(1.0, 0.0));
    }

    #[test]
    fn selection_matrix_round_trip_and_rejection() {
        let phi = DMatrix::from_element(2, 3, 1.0);
        let a = DMatrix::from_row_slice(2, 3, &[1, 0, 0, 0, 0, 1]);
        let st = ReflectionState::from_matrix(phi.clone(), &a).unwrap();
        assert_eq!(st.a_matrix(), a);
        assert_eq!(st.selection_code(), "102");
        let bad = DMatrix::from_row_slice(2, 3, &[1, 0, 0, 1, 0, 0]);
        assert!(ReflectionState::from_matrix(phi.clone(), &bad).is_err());
        let nonbin = DMatrix::from_row_slice(2, 3, &[2, 0, 0, 0, 0, 0]);
        assert!(ReflectionState::from_matrix(phi, &nonbin).is_err());
    }
}
