//! Sampled càdlàg paths with an explicit jump registry, and right-continuous
//! staircase functions.
//!
//! Between grid points a path is constant on `[t_k, t_{k+1})` except for the
//! registered jumps, which take effect at their own (possibly off-grid) times.

use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::TimeGrid;

/// A discontinuity recorded at insertion time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordedJump {
    pub time: f64,
    pub left_limit: f64,
    pub right_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CadlagPath {
    grid: Arc<TimeGrid>,
    values: Vec<f64>,
    jumps: Vec<RecordedJump>,
}

impl CadlagPath {
    pub fn new(grid: Arc<TimeGrid>, values: Vec<f64>, mut jumps: Vec<RecordedJump>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "path has {} values for {} grid points",
                values.len(),
                grid.len()
            ));
        }
        if jumps
            .iter()
            .any(|j| !(j.time > 0.0 && j.time <= grid.horizon()))
        {
            return invalid("recorded jump outside (0, T]");
        }
        jumps.sort_by(|a, b| a.time.total_cmp(&b.time));
        Ok(Self { grid, values, jumps })
    }

    pub fn constant(grid: Arc<TimeGrid>, value: f64) -> Self {
        let values = vec![value; grid.len()];
        Self {
            grid,
            values,
            jumps: Vec::new(),
        }
    }

    /// Path with values `f(t_k)` on the grid and no registered jumps.
    pub fn from_fn(grid: Arc<TimeGrid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.points().iter().map(|&t| f(t)).collect();
        Self {
            grid,
            values,
            jumps: Vec::new(),
        }
    }

    pub fn grid(&self) -> &Arc<TimeGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn jumps(&self) -> &[RecordedJump] {
        &self.jumps
    }

    pub fn horizon(&self) -> f64 {
        self.grid.horizon()
    }

    /// Latest registered jump with time in `(lo, hi]` (or `(lo, hi)` when
    /// `inclusive` is false).
    fn last_jump_in(&self, lo: f64, hi: f64, inclusive: bool) -> Option<&RecordedJump> {
        let end = if inclusive {
            self.jumps.partition_point(|j| j.time <= hi)
        } else {
            self.jumps.partition_point(|j| j.time < hi)
        };
        self.jumps[..end].last().filter(|j| j.time > lo)
    }

    /// Right-continuous value at `t`.
    pub fn evaluate(&self, t: f64) -> Result<f64> {
        let k = self
            .grid
            .locate(t)
            .ok_or_else(|| Error::InvalidInput(format!("t = {t} outside [0, {}]", self.horizon())))?;
        let grid_t = self.grid.time(k);
        if grid_t == t {
            return Ok(self.values[k]);
        }
        Ok(self
            .last_jump_in(grid_t, t, true)
            .map_or(self.values[k], |j| j.right_value))
    }

    /// Left limit at `t`; equals the value at 0 for `t = 0`.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        let k = self
            .grid
            .locate(t)
            .ok_or_else(|| Error::InvalidInput(format!("t = {t} outside [0, {}]", self.horizon())))?;
        if t == 0.0 {
            return Ok(self.values[0]);
        }
        if let Some(j) = self.jumps.iter().rev().find(|j| j.time == t) {
            return Ok(j.left_limit);
        }
        let grid_t = self.grid.time(k);
        let base = if grid_t == t { k - 1 } else { k };
        Ok(self
            .last_jump_in(self.grid.time(base), t, false)
            .map_or(self.values[base], |j| j.right_value))
    }

    /// `∫_0^T Y_t dt` under the piecewise-constant reading of the path.
    pub fn integral(&self) -> f64 {
        let pts = self.grid.points();
        let mut jumps = self.jumps.iter().peekable();
        let mut total = 0.0;
        for k in 0..pts.len() - 1 {
            let (mut t, end) = (pts[k], pts[k + 1]);
            let mut v = self.values[k];
            while let Some(j) = jumps.next_if(|j| j.time < end) {
                total += v * (j.time - t);
                t = j.time;
                v = j.right_value;
            }
            // A jump exactly at the grid point `end` is part of values[k + 1].
            while jumps.next_if(|j| j.time == end).is_some() {}
            total += v * (end - t);
        }
        total
    }

    /// Write `time,value,is_jump,left_limit` rows: every grid point plus one
    /// row per registered jump, in time order.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "value", "is_jump", "left_limit"])?;
        self.write_rows(&mut w, None)?;
        w.flush()?;
        Ok(())
    }

    fn write_rows<W: Write>(&self, w: &mut csv::Writer<W>, prefix: Option<&[String]>) -> Result<()> {
        let mut jumps = self.jumps.iter().peekable();
        for (k, &t) in self.grid.points().iter().enumerate() {
            while let Some(j) = jumps.next_if(|j| j.time <= t) {
                let mut row: Vec<String> = prefix.map(|p| p.to_vec()).unwrap_or_default();
                row.extend([
                    j.time.to_string(),
                    j.right_value.to_string(),
                    "true".into(),
                    j.left_limit.to_string(),
                ]);
                w.write_record(&row)?;
            }
            let mut row: Vec<String> = prefix.map(|p| p.to_vec()).unwrap_or_default();
            row.extend([
                t.to_string(),
                self.values[k].to_string(),
                "false".into(),
                self.left_limit(t)?.to_string(),
            ]);
            w.write_record(&row)?;
        }
        Ok(())
    }
}

/// Long-format CSV with a leading `path_id` column.
pub fn write_paths_long<'a, W: Write>(
    paths: impl IntoIterator<Item = (u64, &'a CadlagPath)>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "time", "value", "is_jump", "left_limit"])?;
    for (id, path) in paths {
        path.write_rows(&mut w, Some(&[id.to_string()]))?;
    }
    w.flush()?;
    Ok(())
}

/// Long-format CSV with leading `path_id` and `component` columns.
pub fn write_system_paths_long<'a, W: Write>(
    paths: impl IntoIterator<Item = (u64, usize, &'a CadlagPath)>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "component", "time", "value", "is_jump", "left_limit"])?;
    for (id, comp, path) in paths {
        path.write_rows(&mut w, Some(&[id.to_string(), comp.to_string()]))?;
    }
    w.flush()?;
    Ok(())
}

/// Piecewise-constant, right-continuous function: `levels[k]` on
/// `[breakpoints[k], breakpoints[k + 1])` and `terminal` at `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircasePath {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
    terminal: f64,
}

impl StaircasePath {
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || levels.len() + 1 != breakpoints.len() {
            return invalid("a staircase needs n + 1 breakpoints for n levels, n >= 1");
        }
        if breakpoints[0] != 0.0 {
            return invalid("staircase breakpoints must start at 0");
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return invalid("staircase breakpoints must be strictly increasing");
        }
        let terminal = levels[levels.len() - 1];
        Ok(Self {
            breakpoints,
            levels,
            terminal,
        })
    }

    pub fn constant(horizon: f64, level: f64) -> Self {
        Self {
            breakpoints: vec![0.0, horizon],
            levels: vec![level],
            terminal: level,
        }
    }

    /// Replace the value at `T`, which otherwise repeats the last level.
    pub fn with_terminal(mut self, value: f64) -> Self {
        self.terminal = value;
        self
    }

    pub fn terminal(&self) -> f64 {
        self.terminal
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn horizon(&self) -> f64 {
        self.breakpoints[self.breakpoints.len() - 1]
    }

    pub fn interval_count(&self) -> usize {
        self.levels.len()
    }

    pub fn evaluate(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0 && t <= self.horizon()) {
            return invalid(format!("t = {t} outside [0, {}]", self.horizon()));
        }
        if t == self.horizon() {
            return Ok(self.terminal);
        }
        let k = self.breakpoints.partition_point(|&b| b <= t) - 1;
        Ok(self.levels[k])
    }

    /// Values at every point of `grid` (which must share the horizon).
    pub fn sample_on(&self, grid: &TimeGrid) -> Result<Vec<f64>> {
        if grid.horizon() != self.horizon() {
            return Err(Error::IncompatibleGrid(format!(
                "staircase horizon {} differs from grid horizon {}",
                self.horizon(),
                grid.horizon()
            )));
        }
        grid.points().iter().map(|&t| self.evaluate(t)).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["start", "end", "level"])?;
        for (k, level) in self.levels.iter().enumerate() {
            w.write_record([
                self.breakpoints[k].to_string(),
                self.breakpoints[k + 1].to_string(),
                level.to_string(),
            ])?;
        }
        let horizon = self.horizon().to_string();
        w.write_record([horizon.as_str(), horizon.as_str(), &self.terminal.to_string()])?;
        w.flush()?;
        Ok(())
    }
}

/// Pointwise maximum; breakpoints are the union of the inputs' breakpoints.
pub fn pointwise_max(paths: &[StaircasePath]) -> Result<StaircasePath> {
    let first = paths
        .first()
        .ok_or_else(|| Error::InvalidInput("pointwise_max of an empty list".into()))?;
    let horizon = first.horizon();
    if paths.iter().any(|p| p.horizon() != horizon) {
        return Err(Error::IncompatibleGrid(
            "staircases must share the same horizon".into(),
        ));
    }
    let mut breakpoints: Vec<f64> = paths
        .iter()
        .flat_map(|p| p.breakpoints.iter().copied())
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();
    let levels = breakpoints[..breakpoints.len() - 1]
        .iter()
        .map(|&t| {
            paths
                .iter()
                .map(|p| p.evaluate(t).expect("breakpoint inside horizon"))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    let terminal = paths.iter().map(|p| p.terminal).fold(f64::NEG_INFINITY, f64::max);
    Ok(StaircasePath::new(breakpoints, levels)?.with_terminal(terminal))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jump_path() -> CadlagPath {
        let grid = Arc::new(TimeGrid::new(vec![0.0, 0.5, 1.0]).unwrap());
        CadlagPath::new(
            grid,
            vec![1.0, 3.0, 3.0],
            vec![RecordedJump {
                time: 0.5,
                left_limit: 1.0,
                right_value: 3.0,
            }],
        )
        .unwrap()
    }

    #[test]
    fn constant_path_evaluates_to_constant() {
        let p = CadlagPath::constant(Arc::new(TimeGrid::uniform(2.0, 7).unwrap()), 4.25);
        for t in [0.0, 0.1, 1.0, 1.99, 2.0] {
            assert_eq!(p.evaluate(t).unwrap(), 4.25);
            assert_eq!(p.left_limit(t).unwrap(), 4.25);
        }
    }

    #[test]
    fn right_value_and_left_limit_at_jump() {
        let p = jump_path();
        assert_eq!(p.evaluate(0.5).unwrap(), 3.0);
        assert_eq!(p.left_limit(0.5).unwrap(), 1.0);
        assert_eq!(p.evaluate(0.49).unwrap(), 1.0);
        assert!(p.evaluate(1.5).is_err());
        assert!(p.evaluate(-0.1).is_err());
    }

    #[test]
    fn off_grid_jump_takes_effect_at_its_time() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 4).unwrap());
        let p = CadlagPath::new(
            grid,
            vec![0.0, 0.0, 2.0, 2.0, 2.0],
            vec![RecordedJump {
                time: 0.3,
                left_limit: 0.0,
                right_value: 2.0,
            }],
        )
        .unwrap();
        assert_eq!(p.evaluate(0.29).unwrap(), 0.0);
        assert_eq!(p.evaluate(0.3).unwrap(), 2.0);
        assert_eq!(p.evaluate(0.4).unwrap(), 2.0);
        assert_eq!(p.left_limit(0.3).unwrap(), 0.0);
        assert_eq!(p.left_limit(0.5).unwrap(), 2.0);
    }

    #[test]
    fn integral_accounts_for_off_grid_jumps() {
        let grid = Arc::new(TimeGrid::new(vec![0.0, 1.0, 2.0]).unwrap());
        let p = CadlagPath::new(
            grid,
            vec![1.0, 2.0, 2.0],
            vec![RecordedJump {
                time: 0.25,
                left_limit: 1.0,
                right_value: 2.0,
            }],
        )
        .unwrap();
        assert_eq!(p.integral(), 0.25 + 2.0 * 0.75 + 2.0);
        assert_eq!(jump_path().integral(), 0.5 + 1.5);
    }

    #[test]
    fn length_mismatch_rejected() {
        let grid = Arc::new(TimeGrid::uniform(1.0, 4).unwrap());
        assert!(CadlagPath::new(grid, vec![0.0; 4], vec![]).is_err());
    }

    #[test]
    fn csv_has_jump_rows() {
        let mut buf = Vec::new();
        jump_path().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "time,value,is_jump,left_limit");
        assert_eq!(lines[2], "0.5,3,true,1");
        assert_eq!(lines[3], "0.5,3,false,1");
        assert_eq!(lines.len(), 5);
    }

    #[test]
    fn max_of_zero_and_nonpositive_is_zero() {
        let zero = StaircasePath::constant(1.0, 0.0);
        let s = StaircasePath::new(vec![0.0, 0.3, 1.0], vec![-1.0, -0.5]).unwrap();
        let m = pointwise_max(&[zero, s]).unwrap();
        assert!(m.levels().iter().all(|&l| l == 0.0));
    }

    #[test]
    fn max_enumerated_example() {
        let s1 = StaircasePath::new(vec![0.0, 0.5, 1.0], vec![1.0, 3.0]).unwrap();
        let s2 = StaircasePath::constant(1.0, 2.0);
        let m = pointwise_max(&[s1, s2]).unwrap();
        assert_eq!(m.breakpoints(), &[0.0, 0.5, 1.0]);
        assert_eq!(m.levels(), &[2.0, 3.0]);
    }

    #[test]
    fn max_rejects_empty_and_mismatched() {
        assert!(pointwise_max(&[]).is_err());
        let a = StaircasePath::constant(1.0, 0.0);
        let b = StaircasePath::constant(2.0, 0.0);
        assert!(pointwise_max(&[a, b]).is_err());
    }

    fn staircase() -> impl Strategy<Value = StaircasePath> {
        proptest::collection::vec((1u32..1000, -5.0f64..5.0), 1..6).prop_map(|cuts| {
            let mut pts: Vec<f64> = cuts.iter().map(|c| c.0 as f64 / 1000.0).collect();
            pts.push(0.0);
            pts.push(1.0);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let levels = (0..pts.len() - 1).map(|k| cuts[k % cuts.len()].1).collect();
            StaircasePath::new(pts, levels).unwrap()
        })
    }

    proptest! {
        #[test]
        fn max_is_idempotent_commutative_associative(a in staircase(), b in staircase(), c in staircase()) {
            prop_assert_eq!(pointwise_max(&[a.clone(), a.clone()]).unwrap(), a.clone());
            let ab = pointwise_max(&[a.clone(), b.clone()]).unwrap();
            let ba = pointwise_max(&[b.clone(), a.clone()]).unwrap();
            let ab_c = pointwise_max(&[ab.clone(), c.clone()]).unwrap();
            let bc = pointwise_max(&[b.clone(), c.clone()]).unwrap();
            let a_bc = pointwise_max(&[a.clone(), bc]).unwrap();
            for k in 0..=200 {
                let t = k as f64 / 200.0;
                prop_assert_eq!(ab.evaluate(t).unwrap(), ba.evaluate(t).unwrap());
                prop_assert_eq!(ab_c.evaluate(t).unwrap(), a_bc.evaluate(t).unwrap());
                let expect = a.evaluate(t).unwrap().max(b.evaluate(t).unwrap());
                prop_assert_eq!(ab.evaluate(t).unwrap(), expect);
            }
        }

        #[test]
        fn staircase_is_right_continuous(a in staircase()) {
            for &b in &a.breakpoints()[..a.breakpoints().len() - 1] {
                let at = a.evaluate(b).unwrap();
                let after = a.evaluate((b + 1e-9).min(1.0)).unwrap();
                prop_assert_eq!(at, after);
            }
        }
    }
}
