//! Binary grid tasks: image completion and object arrangement.
//!
//! The agent sweeps a cursor over the cells in row-major order and makes a
//! binary decision at each one. Both tasks score a configuration by the
//! fraction of cells agreeing with the target.

use serde::{Deserialize, Serialize};

use super::shapes::GridTarget;
use super::{EnvError, Environment, Extrapolate, ParseError, StepOutcome};

/// Row-major binary matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<bool>,
}

impl Grid {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![false; width * height],
        }
    }

    /// Builds a grid from rows; every row must have the same length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, EnvError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.as_ref().len());
        let mut cells = Vec::with_capacity(width * height);
        for row in rows {
            let row = row.as_ref();
            if row.len() != width {
                return Err(EnvError::InvalidConfig(format!(
                    "ragged rows: expected width {width}, got {}",
                    row.len()
                )));
            }
            for &v in row {
                match v {
                    0 => cells.push(false),
                    1 => cells.push(true),
                    other => {
                        return Err(EnvError::InvalidConfig(format!("non-binary cell value {other}")))
                    }
                }
            }
        }
        Ok(Self { width, height, cells })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn get(&self, index: usize) -> bool {
        self.cells[index]
    }

    pub fn set(&mut self, index: usize, value: bool) {
        self.cells[index] = value;
    }

    pub fn at(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.width + col]
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    pub fn ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn same_shape(&self, other: &Grid) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Number of cells equal in both grids. Shapes must match.
    pub fn matches(&self, other: &Grid) -> usize {
        self.cells.iter().zip(&other.cells).filter(|(a, b)| a == b).count()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[bool]> {
        self.cells.chunks(self.width.max(1))
    }
}

/// Fraction of cells where `cells` agrees with `target`.
pub fn grid_eval(cells: &Grid, target: &Grid) -> Result<f64, EnvError> {
    if !cells.same_shape(target) {
        return Err(EnvError::DimensionMismatch {
            expected_w: target.width,
            expected_h: target.height,
            got_w: cells.width,
            got_h: cells.height,
        });
    }
    Ok(cells.matches(target) as f64 / target.len() as f64)
}

pub fn render_grid(grid: &Grid) -> String {
    let rows: Vec<String> = grid
        .rows()
        .map(|r| {
            let vals: Vec<&str> = r.iter().map(|&c| if c { "1" } else { "0" }).collect();
            format!("[{}]", vals.join(","))
        })
        .collect();
    format!("[{}]", rows.join(",\n"))
}

/// Extracts the first well-formed `width` x `height` nested list from `text`.
pub fn parse_grid(text: &str, width: usize, height: usize) -> Result<Grid, ParseError> {
    let bytes = text.as_bytes();
    let mut first_err = None;
    let mut start = 0;
    while let Some(off) = text[start..].find('[') {
        let pos = start + off;
        match parse_matrix_at(bytes, pos) {
            Some(Ok(rows)) => {
                let got_h = rows.len();
                let got_w = rows.first().map_or(0, Vec::len);
                if got_h == height && rows.iter().all(|r| r.len() == width) {
                    let flat: Vec<bool> = rows.into_iter().flatten().collect();
                    return Ok(Grid {
                        width,
                        height,
                        cells: flat,
                    });
                }
                first_err.get_or_insert(ParseError::WrongDimensions {
                    expected_w: width,
                    expected_h: height,
                    got_w,
                    got_h,
                });
            }
            Some(Err(e)) => {
                first_err.get_or_insert(e);
            }
            None => {}
        }
        start = pos + 1;
    }
    Err(first_err.unwrap_or(ParseError::NotFound))
}

/// Parses `[[..],[..],...]` starting at `pos`. `None` when the text there is
/// not a nested list at all, `Some(Err)` for a nested list with bad entries.
fn parse_matrix_at(b: &[u8], pos: usize) -> Option<Result<Vec<Vec<bool>>, ParseError>> {
    let skip_ws = |mut i: usize| {
        while i < b.len() && (b[i].is_ascii_whitespace() || b[i] == b'\\') {
            i += 1;
        }
        i
    };
    let mut i = skip_ws(pos + 1);
    if i >= b.len() || b[i] != b'[' {
        return None;
    }
    let mut rows = Vec::new();
    let mut bad = None;
    loop {
        // row
        i = skip_ws(i);
        if i >= b.len() || b[i] != b'[' {
            return None;
        }
        i += 1;
        let mut row = Vec::new();
        loop {
            i = skip_ws(i);
            let tok_start = i;
            while i < b.len() && !matches!(b[i], b',' | b']') && !b[i].is_ascii_whitespace() {
                if b[i] == b'[' {
                    return None;
                }
                i += 1;
            }
            let tok = std::str::from_utf8(&b[tok_start..i]).ok()?;
            match tok {
                "0" => row.push(false),
                "1" => row.push(true),
                "" => return None,
                other => {
                    bad.get_or_insert_with(|| other.to_string());
                    row.push(false);
                }
            }
            i = skip_ws(i);
            match b.get(i) {
                Some(b',') => i += 1,
                Some(b']') => {
                    i += 1;
                    break;
                }
                _ => return None,
            }
        }
        rows.push(row);
        i = skip_ws(i);
        match b.get(i) {
            Some(b',') => i += 1,
            Some(b']') => break,
            _ => return None,
        }
    }
    Some(match bad {
        Some(tok) => Err(ParseError::NonBinary(tok)),
        None => Ok(rows),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridMode {
    /// Action 1 flips the cell under the cursor.
    Image,
    /// Action 1 drops an object; only drops that improve the score are executed.
    Arrangement,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEnvConfig {
    pub target: GridTarget,
    pub mode: GridMode,
    pub bonus: f64,
    pub delta: f64,
    pub horizon: usize,
}

impl GridEnvConfig {
    pub fn image(target: GridTarget) -> Self {
        Self {
            target,
            mode: GridMode::Image,
            bonus: 1.0,
            delta: 0.95,
            horizon: 500,
        }
    }

    pub fn arrangement(target: GridTarget) -> Self {
        Self {
            target,
            mode: GridMode::Arrangement,
            bonus: 1.0,
            delta: 0.99,
            horizon: 50,
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(EnvError::InvalidConfig(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if self.horizon == 0 {
            return Err(EnvError::InvalidConfig("horizon must be at least 1".into()));
        }
        if self.target.grid.is_empty() {
            return Err(EnvError::InvalidConfig("target grid is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GridState {
    pub cells: Grid,
    pub cursor: usize,
}

#[derive(Debug, Clone)]
pub struct GridEnv {
    config: GridEnvConfig,
}

pub const KEEP: usize = 0;
pub const ACT: usize = 1;

impl GridEnv {
    pub fn new(config: GridEnvConfig) -> Result<Self, EnvError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &GridEnvConfig {
        &self.config
    }

    pub fn target(&self) -> &Grid {
        &self.config.target.grid
    }

    pub fn mode(&self) -> GridMode {
        self.config.mode
    }

    fn fraction(&self, cells: &Grid) -> f64 {
        cells.matches(self.target()) as f64 / self.target().len() as f64
    }

    fn bonus_earned(&self, cells: &Grid) -> bool {
        match self.config.mode {
            GridMode::Image => self.fraction(cells) > self.config.delta,
            // compare counts, not fractions
            GridMode::Arrangement => cells.matches(self.target()) == self.target().len(),
        }
    }

    fn check_state(&self, state: &GridState) -> Result<(), EnvError> {
        let t = self.target();
        if !state.cells.same_shape(t) || state.cursor >= t.len() {
            return Err(EnvError::DimensionMismatch {
                expected_w: t.width(),
                expected_h: t.height(),
                got_w: state.cells.width(),
                got_h: state.cells.height(),
            });
        }
        Ok(())
    }
}

impl Environment for GridEnv {
    type State = GridState;
    type Pattern = Grid;

    fn id(&self) -> String {
        let t = self.target();
        let mode = match self.config.mode {
            GridMode::Image => "image",
            GridMode::Arrangement => "arrangement",
        };
        format!("{mode}-{}x{}-{}", t.width(), t.height(), self.config.target.name)
    }

    fn num_actions(&self) -> usize {
        2
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&self) -> GridState {
        GridState {
            cells: Grid::zeros(self.target().width(), self.target().height()),
            cursor: 0,
        }
    }

    fn legal_actions(&self, _state: &GridState) -> Vec<usize> {
        vec![KEEP, ACT]
    }

    fn step(&self, state: &GridState, action: usize) -> Result<StepOutcome<GridState>, EnvError> {
        self.check_state(state)?;
        if action > ACT {
            return Err(EnvError::IllegalAction {
                action: format!("#{action}"),
                state: format!("cursor {}", state.cursor),
            });
        }
        let before = self.fraction(&state.cells);
        let mut proposed = state.cells.clone();
        let c = state.cursor;
        match (self.config.mode, action) {
            (GridMode::Image, ACT) => proposed.set(c, !proposed.get(c)),
            (GridMode::Arrangement, ACT) => proposed.set(c, true),
            _ => {}
        }
        let after = self.fraction(&proposed);
        let committed = match self.config.mode {
            GridMode::Image => true,
            GridMode::Arrangement => proposed.matches(self.target()) > state.cells.matches(self.target()),
        };
        let cells = if committed { proposed } else { state.cells.clone() };
        let delta = after - before;
        let terminal = self.bonus_earned(&cells);
        let bonus = if terminal { self.config.bonus } else { 0.0 };
        Ok(StepOutcome {
            next: GridState {
                cells,
                cursor: (c + 1) % self.target().len(),
            },
            reward: delta + bonus,
            bonus,
            terminal,
            rejected_delta: if committed { 0.0 } else { delta },
        })
    }

    fn evaluate(&self, state: &GridState) -> f64 {
        self.fraction(&state.cells)
    }

    fn pattern_of(&self, state: &GridState) -> Grid {
        state.cells.clone()
    }

    fn evaluate_pattern(&self, pattern: &Grid) -> f64 {
        grid_eval(pattern, self.target()).unwrap_or(0.0)
    }

    fn is_solution(&self, candidate: &Grid) -> bool {
        candidate.same_shape(self.target()) && self.fraction(candidate) > self.config.delta
    }

    fn render_pattern(&self, pattern: &Grid) -> String {
        render_grid(pattern)
    }

    fn parse_pattern(&self, text: &str) -> Result<Grid, ParseError> {
        parse_grid(text, self.target().width(), self.target().height())
    }

    fn check_candidate(&self, pattern: &Grid) -> Result<(), ParseError> {
        let t = self.target();
        if !pattern.same_shape(t) {
            return Err(ParseError::WrongDimensions {
                expected_w: t.width(),
                expected_h: t.height(),
                got_w: pattern.width(),
                got_h: pattern.height(),
            });
        }
        Ok(())
    }

    fn policy_action(&self, solution: &Grid, state: &GridState) -> Option<usize> {
        let want = solution.get(state.cursor);
        let have = state.cells.get(state.cursor);
        let act = match self.config.mode {
            GridMode::Image => want != have,
            GridMode::Arrangement => want && !have,
        };
        Some(if act { ACT } else { KEEP })
    }

    fn state_key(&self, state: &GridState) -> String {
        format!("{}@{}", render_grid(&state.cells), state.cursor)
    }

    fn features(&self, state: &GridState) -> Vec<f64> {
        let w = state.cells.width();
        let h = state.cells.height();
        let mut v = self.gate_features(state);
        let row = state.cursor / w;
        let col = state.cursor % w;
        v.push(if h > 1 { row as f64 / (h - 1) as f64 } else { 0.0 });
        v.push(if w > 1 { col as f64 / (w - 1) as f64 } else { 0.0 });
        v
    }

    fn gate_features(&self, state: &GridState) -> Vec<f64> {
        state.cells.cells().iter().map(|&c| if c { 1.0 } else { 0.0 }).collect()
    }

    fn match_fraction(&self, pattern: &Grid) -> Option<f64> {
        pattern.same_shape(self.target()).then(|| self.fraction(pattern))
    }

    fn cell_count(&self) -> Option<usize> {
        Some(self.target().len())
    }
}

impl Extrapolate for GridEnv {
    /// Correctly placed ones over target ones, so an empty grid scores zero.
    fn completion_fraction(&self, pattern: &Grid) -> f64 {
        let t = self.target();
        let total = t.ones();
        if total == 0 {
            return 1.0;
        }
        let hit = t.cells().iter().zip(pattern.cells()).filter(|(&a, &b)| a && b).count();
        hit as f64 / total as f64
    }

    fn correct_completion(&self, _pattern: &Grid) -> Grid {
        self.target().clone()
    }

    /// Target shifted one column right, merged with the ones already present.
    fn corrupted_completion(&self, pattern: &Grid) -> Grid {
        let t = self.target();
        let mut out = pattern.clone();
        for r in 0..t.height() {
            for c in 0..t.width().saturating_sub(1) {
                if t.at(r, c) {
                    out.set(r * t.width() + c + 1, true);
                }
            }
        }
        out
    }

    fn partial_target(&self, fraction: f64) -> Grid {
        let t = self.target();
        let keep = (fraction.clamp(0.0, 1.0) * t.ones() as f64).round() as usize;
        let mut out = Grid::zeros(t.width(), t.height());
        for i in (0..t.len()).filter(|&i| t.get(i)).take(keep) {
            out.set(i, true);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::shapes::target_shape;

    fn image_env() -> GridEnv {
        GridEnv::new(GridEnvConfig::image(target_shape("oval10", 10, 10).unwrap())).unwrap()
    }

    fn arrange_env() -> GridEnv {
        GridEnv::new(GridEnvConfig::arrangement(target_shape("diamond5", 5, 5).unwrap())).unwrap()
    }

    fn grid_with_ones(w: usize, h: usize, ones: &[usize]) -> Grid {
        let mut g = Grid::zeros(w, h);
        for &i in ones {
            g.set(i, true);
        }
        g
    }

    #[test]
    fn eval_examples() {
        let t = Grid::from_rows(&[[0u8, 1], [1, 0]]).unwrap();
        assert_eq!(grid_eval(&t, &t).unwrap(), 1.0);

        let twenty = grid_with_ones(10, 10, &(0..20).collect::<Vec<_>>());
        assert!((grid_eval(&Grid::zeros(10, 10), &twenty).unwrap() - 0.80).abs() < 1e-15);

        let d = target_shape("diamond5", 5, 5).unwrap().grid;
        let mut off = d.clone();
        off.set(0, !off.get(0));
        assert_eq!(grid_eval(&off, &d).unwrap(), 24.0 / 25.0);

        assert!(matches!(
            grid_eval(&Grid::zeros(3, 3), &d),
            Err(EnvError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn image_step_rewards() {
        let env = image_env();
        // cell (2,3) is on in the oval; flipping it on from zeros is an improvement
        let state = GridState {
            cells: Grid::zeros(10, 10),
            cursor: 23,
        };
        let out = env.step(&state, ACT).unwrap();
        assert!((out.reward - 0.01).abs() < 1e-12);
        assert_eq!(out.next.cursor, 24);
        assert!(!out.terminal);

        let keep = env.step(&GridState { cells: Grid::zeros(10, 10), cursor: 0 }, KEEP).unwrap();
        assert_eq!(keep.reward, 0.0);

        // cursor wraps
        let last = env.step(&GridState { cells: Grid::zeros(10, 10), cursor: 99 }, KEEP).unwrap();
        assert_eq!(last.next.cursor, 0);
    }

    #[test]
    fn image_bonus_needs_strictly_more_than_delta() {
        let env = image_env();
        let target = env.target().clone();
        // 5 mismatches remaining; fixing one leaves 4 → 0.96 > 0.95
        let wrong: Vec<usize> = (0..100).filter(|&i| target.get(i)).take(6).collect();
        let mut cells = target.clone();
        for &i in &wrong {
            cells.set(i, false);
        }
        let out = env.step(&GridState { cells: cells.clone(), cursor: wrong[0] }, ACT).unwrap();
        assert_eq!(grid_eval(&out.next.cells, &target).unwrap(), 0.95);
        assert!(!out.terminal);
        let out2 = env.step(&GridState { cells: out.next.cells, cursor: wrong[1] }, ACT).unwrap();
        assert!(out2.terminal);
        assert_eq!(out2.bonus, 1.0);
    }

    #[test]
    fn arrangement_rejects_bad_drops() {
        let env = arrange_env();
        // (0,0) is empty in the diamond
        let state = env.reset();
        let out = env.step(&state, ACT).unwrap();
        assert!((out.reward + 1.0 / 25.0).abs() < 1e-15);
        assert_eq!(out.next.cells, state.cells);
        assert!((out.rejected_delta + 1.0 / 25.0).abs() < 1e-15);

        // (0,2) is part of the diamond
        let out = env.step(&GridState { cursor: 2, ..state.clone() }, ACT).unwrap();
        assert!((out.reward - 1.0 / 25.0).abs() < 1e-15);
        assert!(out.next.cells.get(2));
        assert_eq!(out.rejected_delta, 0.0);
    }

    #[test]
    fn arrangement_bonus_on_exact_match_only() {
        let env = arrange_env();
        let target = env.target().clone();
        let last = (0..25).rev().find(|&i| target.get(i)).unwrap();
        let mut cells = target.clone();
        cells.set(last, false);
        let out = env.step(&GridState { cells, cursor: last }, ACT).unwrap();
        assert!(out.terminal);
        assert_eq!(out.next.cells, target);
    }

    #[test]
    fn acceptance_threshold() {
        let env = image_env();
        let target = env.target().clone();
        assert!(env.is_solution(&target));
        let mut c = target.clone();
        for i in 0..5 {
            c.set(i * 11, !c.get(i * 11));
        }
        assert_eq!(c.matches(&target), 95);
        assert!(!env.is_solution(&c));

        let arr = arrange_env();
        let mut d = arr.target().clone();
        d.set(0, true);
        assert!(!arr.is_solution(&d));
    }

    #[test]
    fn policy_rules() {
        let img = image_env();
        let sol = img.target().clone();
        let state = GridState { cells: Grid::zeros(10, 10), cursor: 23 };
        assert_eq!(img.policy_action(&sol, &state), Some(ACT));
        let state = GridState { cells: Grid::zeros(10, 10), cursor: 0 };
        assert_eq!(img.policy_action(&sol, &state), Some(KEEP));
        // image flips wrong ones off, arrangement never removes
        let mut cells = Grid::zeros(10, 10);
        cells.set(0, true);
        assert_eq!(img.policy_action(&sol, &GridState { cells, cursor: 0 }), Some(ACT));

        let arr = arrange_env();
        let mut cells = Grid::zeros(5, 5);
        cells.set(0, true);
        assert_eq!(arr.policy_action(arr.target(), &GridState { cells, cursor: 0 }), Some(KEEP));
    }

    #[test]
    fn render_parse_round_trip() {
        let g = Grid::from_rows(&[[0u8, 1], [1, 0]]).unwrap();
        let text = render_grid(&g);
        assert_eq!(text, "[[0,1],\n[1,0]]");
        assert_eq!(parse_grid(&text, 2, 2).unwrap(), g);
    }

    #[test]
    fn parse_errors_are_distinct() {
        assert_eq!(parse_grid("nothing here", 2, 2), Err(ParseError::NotFound));
        assert!(matches!(
            parse_grid("[[0,1,0],[1,0,0]]", 2, 2),
            Err(ParseError::WrongDimensions { got_w: 3, got_h: 2, .. })
        ));
        assert_eq!(parse_grid("[[0,2],[1,0]]", 2, 2), Err(ParseError::NonBinary("2".into())));
    }

    #[test]
    fn parse_extracts_matrix_from_prose() {
        let text = "Sure! The shape looks like a square [note].\nAnswer:\n  [[1, 1],\n   [1, 1]]\nDone.";
        let g = parse_grid(text, 2, 2).unwrap();
        assert_eq!(g.ones(), 4);
        // a wrong-size matrix before the right one is skipped
        let text = "[[1]] then [[0,0],[0,1]]";
        assert_eq!(parse_grid(text, 2, 2).unwrap().ones(), 1);
    }

    #[test]
    fn feature_dimensions() {
        let env = image_env();
        let s = GridState { cells: Grid::zeros(10, 10), cursor: 99 };
        let f = env.features(&s);
        assert_eq!(f.len(), 102);
        assert_eq!(&f[100..], &[1.0, 1.0]);
        assert_eq!(env.gate_features(&s).len(), 100);
    }

    #[test]
    fn scripted_rules() {
        let env = image_env();
        assert_eq!(env.completion_fraction(&Grid::zeros(10, 10)), 0.0);
        let half = env.partial_target(0.5);
        assert_eq!(half.ones(), 7);
        assert_eq!(env.completion_fraction(&half), 0.5);
        let bad = env.corrupted_completion(&half);
        assert!(!env.is_solution(&bad));
        for i in 0..100 {
            if half.get(i) {
                assert!(bad.get(i));
            }
        }
    }
}
