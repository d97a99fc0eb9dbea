//! Trajectories over a discretized spatio-temporal grid.
//!
//! A [`Universe`] is a `rows × cols` spatial grid crossed with `slots` time
//! slots. Every location label is an [`StPoint`] `(cell, slot)`, and a
//! [`Trajectory`] is a non-empty sequence of labels whose slots strictly
//! increase. A [`Dataset`] is an ordered multiset of trajectories.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Universe {
    rows: u32,
    cols: u32,
    slots: u32,
}

impl Universe {
    pub fn new(rows: u32, cols: u32, slots: u32) -> Result<Self> {
        if rows == 0 || cols == 0 || slots == 0 {
            return Err(Error::param(
                "universe",
                format!("rows, cols and slots must be >= 1 (got {rows}x{cols}x{slots})"),
            ));
        }
        if (rows as u64) * (cols as u64) > u32::MAX as u64 {
            return Err(Error::param("universe", "cell count does not fit in 32 bits"));
        }
        Ok(Self { rows, cols, slots })
    }

    pub fn rows(&self) -> u32 {
        self.rows
    }

    pub fn cols(&self) -> u32 {
        self.cols
    }

    pub fn slots(&self) -> u32 {
        self.slots
    }

    pub fn cell_count(&self) -> u32 {
        self.rows * self.cols
    }

    pub fn label_count(&self) -> u64 {
        self.cell_count() as u64 * self.slots as u64
    }

    pub fn contains(&self, p: StPoint) -> bool {
        p.cell < self.cell_count() && p.slot < self.slots
    }

    /// Every label of the universe in `(slot, cell)` order.
    pub fn labels(&self) -> impl Iterator<Item = StPoint> + '_ {
        let cells = self.cell_count();
        (0..self.slots).flat_map(move |slot| (0..cells).map(move |cell| StPoint { cell, slot }))
    }

    /// Labels whose slot is strictly later than `after` (all labels for `None`).
    pub fn labels_after(&self, after: Option<u32>) -> impl Iterator<Item = StPoint> + '_ {
        let first = after.map_or(0, |s| s + 1);
        let cells = self.cell_count();
        (first..self.slots).flat_map(move |slot| (0..cells).map(move |cell| StPoint { cell, slot }))
    }

    pub fn header(&self) -> String {
        format!("universe rows={} cols={} slots={}", self.rows, self.cols, self.slots)
    }

    fn parse_header(line: &str, line_no: usize) -> Result<Self> {
        let mut parts = line.split_whitespace();
        if parts.next() != Some("universe") {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected header `universe rows=<r> cols=<c> slots=<T>`".into(),
            });
        }
        let (mut rows, mut cols, mut slots) = (None, None, None);
        for part in parts {
            let (key, value) = part.split_once('=').ok_or_else(|| Error::Parse {
                line: line_no,
                msg: format!("malformed header field `{part}`"),
            })?;
            let value: u32 = value.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("header field `{key}` is not a non-negative integer"),
            })?;
            match key {
                "rows" => rows = Some(value),
                "cols" => cols = Some(value),
                "slots" => slots = Some(value),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unknown header field `{key}`"),
                    })
                }
            }
        }
        match (rows, cols, slots) {
            (Some(r), Some(c), Some(t)) => Universe::new(r, c, t).map_err(|e| Error::Parse {
                line: line_no,
                msg: e.to_string(),
            }),
            _ => Err(Error::Parse {
                line: line_no,
                msg: "header must declare rows, cols and slots".into(),
            }),
        }
    }
}

impl fmt::Display for Universe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}x{}", self.rows, self.cols, self.slots)
    }
}

/// A discretized spatio-temporal location. Ordered by `(slot, cell)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StPoint {
    pub cell: u32,
    pub slot: u32,
}

impl StPoint {
    pub const fn new(cell: u32, slot: u32) -> Self {
        Self { cell, slot }
    }
}

impl Ord for StPoint {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.slot, self.cell).cmp(&(other.slot, other.cell))
    }
}

impl PartialOrd for StPoint {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for StPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.cell, self.slot)
    }
}

impl FromStr for StPoint {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (cell, slot) = s
            .split_once(':')
            .ok_or_else(|| format!("expected `cell:slot`, got `{s}`"))?;
        let cell = cell
            .parse()
            .map_err(|_| format!("bad cell index in `{s}`"))?;
        let slot = slot
            .parse()
            .map_err(|_| format!("bad time slot in `{s}`"))?;
        Ok(StPoint { cell, slot })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Trajectory(Vec<StPoint>);

impl Trajectory {
    pub fn new(points: Vec<StPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyTrajectory);
        }
        if let Some(w) = points.windows(2).find(|w| w[1].slot <= w[0].slot) {
            return Err(Error::Ordering {
                line: 0,
                prev: w[0].slot,
                next: w[1].slot,
            });
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[StPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn has_prefix(&self, prefix: &[StPoint]) -> bool {
        self.0.starts_with(prefix)
    }
}

impl fmt::Display for Trajectory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, p) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    universe: Universe,
    trajectories: Vec<Trajectory>,
}

impl Dataset {
    pub fn new(universe: Universe, trajectories: Vec<Trajectory>) -> Result<Self> {
        for (i, t) in trajectories.iter().enumerate() {
            if let Some(p) = t.points().iter().find(|p| !universe.contains(**p)) {
                return Err(Error::Domain {
                    line: i + 1,
                    point: p.to_string(),
                    universe: universe.to_string(),
                });
            }
        }
        Ok(Self {
            universe,
            trajectories,
        })
    }

    pub fn empty(universe: Universe) -> Self {
        Self {
            universe,
            trajectories: Vec::new(),
        }
    }

    /// Parses the discretized file format, taking the universe from the header.
    pub fn parse(text: &str) -> Result<Self> {
        parse_dataset(text, None)
    }

    pub fn universe(&self) -> &Universe {
        &self.universe
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn max_length(&self) -> usize {
        self.trajectories.iter().map(Trajectory::len).max().unwrap_or(0)
    }

    /// Entry `i` holds the number of trajectories of length `i + 1`.
    pub fn length_histogram(&self) -> Vec<u64> {
        let mut hist = vec![0u64; self.max_length()];
        for t in &self.trajectories {
            hist[t.len() - 1] += 1;
        }
        hist
    }

    /// The neighbouring dataset obtained by deleting one trajectory.
    pub fn remove_one(&self, index: usize) -> Result<Dataset> {
        if index >= self.trajectories.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.trajectories.len(),
            });
        }
        let mut trajectories = self.trajectories.clone();
        trajectories.remove(index);
        Ok(Dataset {
            universe: self.universe,
            trajectories,
        })
    }

    /// Number of trajectories starting with `prefix`, by linear scan.
    pub fn prefix_count(&self, prefix: &[StPoint]) -> u64 {
        self.trajectories.iter().filter(|t| t.has_prefix(prefix)).count() as u64
    }

    pub fn to_text(&self) -> String {
        let mut out = self.universe.header();
        out.push('\n');
        for t in &self.trajectories {
            out.push_str(&t.to_string());
            out.push('\n');
        }
        out
    }
}

/// Parses a discretized dataset. `universe` overrides the header when given;
/// the header may then be omitted.
pub fn parse_dataset(text: &str, universe: Option<&Universe>) -> Result<Dataset> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l)).peekable();
    let header_universe = match lines.peek() {
        Some((_, l)) if l.trim_start().starts_with("universe") => {
            let (n, l) = lines.next().unwrap();
            Some(Universe::parse_header(l, n)?)
        }
        _ => None,
    };
    let universe = match (universe, header_universe) {
        (Some(u), _) => *u,
        (None, Some(u)) => u,
        (None, None) => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing `universe` header and no universe supplied".into(),
            })
        }
    };

    let mut trajectories = Vec::new();
    for (line_no, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut points = Vec::new();
        for token in line.split(' ') {
            let p: StPoint = token.parse().map_err(|msg| Error::Parse { line: line_no, msg })?;
            if !universe.contains(p) {
                return Err(Error::Domain {
                    line: line_no,
                    point: p.to_string(),
                    universe: universe.to_string(),
                });
            }
            if let Some(prev) = points.last().map(|q: &StPoint| q.slot) {
                if p.slot <= prev {
                    return Err(Error::Ordering {
                        line: line_no,
                        prev,
                        next: p.slot,
                    });
                }
            }
            points.push(p);
        }
        trajectories.push(Trajectory(points));
    }
    Ok(Dataset {
        universe,
        trajectories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawSample {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawTrace {
    samples: Vec<RawSample>,
}

impl RawTrace {
    pub fn new(samples: Vec<RawSample>) -> Result<Self> {
        if samples.windows(2).any(|w| w[1].t < w[0].t) {
            return Err(Error::Precondition(
                "raw trace timestamps must be non-decreasing".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[RawSample] {
        &self.samples
    }
}

/// Parses raw traces: one `x,y,t` sample per line, traces separated by blank lines.
pub fn parse_raw_traces(text: &str) -> Result<Vec<RawTrace>> {
    let mut traces = Vec::new();
    let mut current = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if !current.is_empty() {
                traces.push(RawTrace::new(std::mem::take(&mut current))?);
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = if fields.len() == 3 {
            fields.iter().map(|f| f.parse().ok()).collect()
        } else {
            None
        };
        let v = parsed.ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected `x,y,t`, got `{line}`"),
        })?;
        current.push(RawSample {
            x: v[0],
            y: v[1],
            t: v[2],
        });
    }
    if !current.is_empty() {
        traces.push(RawTrace::new(current)?);
    }
    Ok(traces)
}

/// Axis-aligned spatial bounds. Points on the upper edges belong to the last row/column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    fn cell_of(&self, universe: &Universe, x: f64, y: f64) -> Option<u32> {
        if !(x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y) {
            return None;
        }
        let index = |v: f64, lo: f64, hi: f64, n: u32| -> u32 {
            let i = ((v - lo) / (hi - lo) * n as f64).floor() as u32;
            i.min(n - 1)
        };
        let col = index(x, self.min_x, self.max_x, universe.cols());
        let row = index(y, self.min_y, self.max_y, universe.rows());
        Some(row * universe.cols() + col)
    }
}

/// Maps a raw trace onto the grid. Repeated `(cell, slot)` samples collapse;
/// a later sample in an already used slot is dropped.
pub fn discretize(
    trace: &RawTrace,
    universe: &Universe,
    bbox: &BBox,
    time_origin: f64,
    slot_width: f64,
) -> Result<Trajectory> {
    if !(bbox.max_x > bbox.min_x && bbox.max_y > bbox.min_y) {
        return Err(Error::param("bbox", "bounding box is degenerate"));
    }
    if slot_width.is_nan() || slot_width <= 0.0 {
        return Err(Error::param("slot_width", "must be > 0"));
    }
    let mut points: Vec<StPoint> = Vec::new();
    for s in trace.samples() {
        let Some(cell) = bbox.cell_of(universe, s.x, s.y) else {
            continue;
        };
        let slot = ((s.t - time_origin) / slot_width).floor();
        if slot < 0.0 || slot >= universe.slots() as f64 {
            continue;
        }
        let slot = slot as u32;
        match points.last() {
            Some(last) if last.slot >= slot => continue,
            _ => points.push(StPoint { cell, slot }),
        }
    }
    Trajectory::new(points)
}
