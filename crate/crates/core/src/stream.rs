//! Feature-evolvable stream simulation and dataset ingestion.
//!
//! A stream runs for `T1` rounds in the old space `S1`; its last `B` of those
//! rounds also carry the new-space view, and then `T2` rounds arrive in `S2`
//! only. The new space is produced by a seeded random linear projection of the
//! original features, so both views of an overlap round come from one row.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::predictor::Label;

/// Labeled batch data that a stream is cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub dim: usize,
    pub rows: Vec<(Vec<f64>, Label)>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, dim: usize, rows: Vec<(Vec<f64>, Label)>) -> Result<Self> {
        let name = name.into();
        if let Some((i, _)) = rows.iter().enumerate().find(|(_, (x, _))| x.len() != dim) {
            return Err(Error::Input(format!(
                "dataset '{name}': row {i} has dimension {} instead of {dim}",
                rows[i].0.len()
            )));
        }
        Ok(Self { name, dim, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Writes `f0,..,f{d-1},label` rows with a header line.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(|e| csv_err(path, e))?;
        for (x, y) in &self.rows {
            let mut rec: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            rec.push(y.as_i8().to_string());
            w.write_record(&rec).map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Input(format!("{}: {other:?}", path.display())),
    }
}

/// Shape of the two interleaved spirals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwissParams {
    /// Radius at angle zero.
    pub inner_radius: f64,
    /// Radial growth per radian.
    pub growth: f64,
    /// Number of full windings per arm.
    pub turns: f64,
    pub noise_std: f64,
}

impl Default for SwissParams {
    fn default() -> Self {
        Self {
            inner_radius: 0.5,
            growth: 0.5,
            turns: 1.5,
            noise_std: 0.1,
        }
    }
}

impl SwissParams {
    pub fn radius(&self, theta: f64) -> f64 {
        self.inner_radius + self.growth * theta
    }
}

/// Two-spiral dataset with the default shape and the given noise level.
pub fn make_swiss(n: usize, noise_std: f64, seed: u64) -> Result<Dataset> {
    make_swiss_with(
        n,
        SwissParams {
            noise_std,
            ..SwissParams::default()
        },
        seed,
    )
}

/// `n / 2` points per class along `r = a + b theta`; the negative arm is the
/// positive one rotated by `pi`.
pub fn make_swiss_with(n: usize, params: SwissParams, seed: u64) -> Result<Dataset> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::Input(format!("swiss size must be even and >= 2, got {n}")));
    }
    if !(params.noise_std >= 0.0) || !(params.turns > 0.0) || !(params.growth > 0.0) {
        return Err(Error::Config(format!("invalid spiral parameters {params:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = 2.0 * PI * params.turns;
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { Label::Positive } else { Label::Negative };
        let theta = span * rng.gen::<f64>();
        let phase = if label == Label::Positive { 0.0 } else { PI };
        let r = params.radius(theta);
        let mut x = vec![r * (theta + phase).cos(), r * (theta + phase).sin()];
        if params.noise_std > 0.0 {
            for v in &mut x {
                let z: f64 = StandardNormal.sample(&mut rng);
                *v += params.noise_std * z;
            }
        }
        rows.push((x, label));
    }
    Dataset::new("swiss", 2, rows)
}

/// Fixed `d2 x d1` matrix mapping original rows into the new feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix(pub DMatrix<f64>);

impl ProjectionMatrix {
    /// Independent standard normal entries.
    pub fn random(d1: usize, d2: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self(DMatrix::from_fn(d2, d1, |_, _| StandardNormal.sample(&mut rng)))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (&self.0 * DVector::from_column_slice(x)).iter().copied().collect()
    }

    pub fn output_dim(&self) -> usize {
        self.0.nrows()
    }
}

/// Maps every row through a seeded Gaussian random matrix.
pub fn random_projection(d: &Dataset, d2: usize, seed: u64) -> Result<Dataset> {
    if d2 == 0 {
        return Err(Error::Config("projected dimension must be >= 1".into()));
    }
    project_with(d, &ProjectionMatrix::random(d.dim, d2, seed))
}

pub fn project_with(d: &Dataset, matrix: &ProjectionMatrix) -> Result<Dataset> {
    if matrix.0.ncols() != d.dim {
        return Err(Error::Input(format!(
            "projection expects dimension {}, dataset has {}",
            matrix.0.ncols(),
            d.dim
        )));
    }
    let rows = d.rows.iter().map(|(x, y)| (matrix.apply(x), *y)).collect();
    Dataset::new(format!("{}-projected", d.name), matrix.output_dim(), rows)
}

/// Period lengths of one feature-evolution cycle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSchedule {
    pub t1: usize,
    pub overlap: usize,
    pub t2: usize,
    pub label_prob: f64,
}

impl StreamSchedule {
    pub fn new(t1: usize, overlap: usize, t2: usize, label_prob: f64) -> Result<Self> {
        let s = Self {
            t1,
            overlap,
            t2,
            label_prob,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.overlap < 1 || self.overlap >= self.t1 {
            return Err(Error::Config(format!(
                "overlap B must satisfy 1 <= B < T1 (B = {}, T1 = {})",
                self.overlap, self.t1
            )));
        }
        if self.t2 < 1 {
            return Err(Error::Config("T2 must be >= 1".into()));
        }
        if !(self.label_prob > 0.0 && self.label_prob <= 1.0) {
            return Err(Error::Config(format!(
                "label probability must lie in (0, 1], got {}",
                self.label_prob
            )));
        }
        Ok(())
    }

    pub fn total(&self) -> usize {
        self.t1 + self.t2
    }

    pub fn period(&self, step: usize) -> Period {
        if step <= self.t1 - self.overlap {
            Period::Old
        } else if step <= self.t1 {
            Period::Overlap
        } else {
            Period::New
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Period {
    Old,
    Overlap,
    New,
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Period::Old => "s1",
            Period::Overlap => "overlap",
            Period::New => "s2",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    S1Only(Vec<f64>),
    Overlap { s1: Vec<f64>, s2: Vec<f64> },
    S2Only(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamEvent {
    pub step: usize,
    pub payload: Payload,
    pub revealed_label: Option<Label>,
    /// Ground truth, used for evaluation only.
    pub true_label: Label,
}

impl StreamEvent {
    pub fn s1(&self) -> Option<&[f64]> {
        match &self.payload {
            Payload::S1Only(x) | Payload::Overlap { s1: x, .. } => Some(x),
            Payload::S2Only(_) => None,
        }
    }

    pub fn s2(&self) -> Option<&[f64]> {
        match &self.payload {
            Payload::S2Only(x) | Payload::Overlap { s2: x, .. } => Some(x),
            Payload::S1Only(_) => None,
        }
    }

    pub fn period(&self) -> Period {
        match self.payload {
            Payload::S1Only(_) => Period::Old,
            Payload::Overlap { .. } => Period::Overlap,
            Payload::S2Only(_) => Period::New,
        }
    }
}

/// An event sequence together with the matrix that produced its new space.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub schedule: StreamSchedule,
    pub events: Vec<StreamEvent>,
    pub projection: ProjectionMatrix,
    /// When set, `S1` holds the projected view and `S2` the original features.
    pub swapped: bool,
}

impl Stream {
    pub fn d1(&self) -> usize {
        if self.swapped {
            self.projection.output_dim()
        } else {
            self.projection.0.ncols()
        }
    }

    pub fn d2(&self) -> usize {
        if self.swapped {
            self.projection.0.ncols()
        } else {
            self.projection.output_dim()
        }
    }

    pub fn init_events(&self) -> &[StreamEvent] {
        &self.events[..self.schedule.t1]
    }

    pub fn new_space_events(&self) -> &[StreamEvent] {
        &self.events[self.schedule.t1..]
    }
}

pub(crate) fn sub_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Cuts one evolution cycle out of `base` after a seeded shuffle.
pub fn generate_stream(base: &Dataset, schedule: StreamSchedule, d2: usize, seed: u64) -> Result<Stream> {
    generate_stream_with(base, schedule, d2, seed, false)
}

pub fn generate_stream_with(
    base: &Dataset,
    schedule: StreamSchedule,
    d2: usize,
    seed: u64,
    swap_spaces: bool,
) -> Result<Stream> {
    schedule.validate()?;
    if d2 == 0 {
        return Err(Error::Config("projected dimension must be >= 1".into()));
    }
    let needed = schedule.total();
    if base.len() < needed {
        return Err(Error::Input(format!(
            "dataset '{}' has {} rows but the schedule needs n >= T1 + T2 = {needed}",
            base.name,
            base.len()
        )));
    }
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.shuffle(&mut sub_rng(seed, 1));
    let projection = ProjectionMatrix::random(base.dim, d2, sub_rng(seed, 2).gen());
    let mut label_rng = sub_rng(seed, 3);

    let events = order[..needed]
        .iter()
        .enumerate()
        .map(|(i, &row)| {
            let step = i + 1;
            let (x, y) = &base.rows[row];
            // (old view, new view)
            let (old, new) = if swap_spaces {
                (projection.apply(x), x.clone())
            } else {
                (x.clone(), projection.apply(x))
            };
            let payload = match schedule.period(step) {
                Period::Old => Payload::S1Only(old),
                Period::Overlap => Payload::Overlap { s1: old, s2: new },
                Period::New => Payload::S2Only(new),
            };
            let revealed = label_rng.gen::<f64>() < schedule.label_prob;
            StreamEvent {
                step,
                payload,
                revealed_label: revealed.then_some(*y),
                true_label: *y,
            }
        })
        .collect();

    Ok(Stream {
        schedule,
        events,
        projection,
        swapped: swap_spaces,
    })
}

/// Reads a numeric CSV with the label in the last column.
///
/// Two distinct label values are mapped to `-1` (smaller) and `+1` (larger);
/// a lone value maps to `-1` when it is `<= 0` and to `+1` otherwise.
pub fn load_dataset(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_err(path, e))?;
    let mut raw: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut dim = None;
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1 + has_header as usize;
        let rec = rec.map_err(|e| Error::Input(format!("{}:{line}: {e}", path.display())))?;
        if rec.len() < 2 {
            return Err(Error::Input(format!(
                "{}:{line}: need at least one feature and a label",
                path.display()
            )));
        }
        let values = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Input(format!("{}:{line}: '{f}' is not a finite number", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        let d = values.len() - 1;
        match dim {
            None => dim = Some(d),
            Some(prev) if prev != d => {
                return Err(Error::Input(format!(
                    "{}:{line}: expected {prev} features, found {d}",
                    path.display()
                )))
            }
            _ => {}
        }
        let mut values = values;
        let label = values.pop().expect("at least two columns");
        raw.push((values, label));
    }
    let dim = dim.ok_or_else(|| Error::Input(format!("{}: no data rows", path.display())))?;

    let mut distinct: Vec<f64> = Vec::new();
    for (_, y) in &raw {
        if !distinct.contains(y) {
            distinct.push(*y);
        }
    }
    if distinct.len() > 2 {
        return Err(Error::Input(format!(
            "{}: labels must be binary, found {} distinct values",
            path.display(),
            distinct.len()
        )));
    }
    distinct.sort_by(f64::total_cmp);
    let to_label = |y: f64| {
        if distinct.len() == 2 {
            if y == distinct[0] {
                Label::Negative
            } else {
                Label::Positive
            }
        } else {
            Label::from_score(y - 0.5)
        }
    };
    let rows = raw.into_iter().map(|(x, y)| (x, to_label(y))).collect();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(name, dim, rows)
}

/// Writes `step,period,labeled,true_label` per event, optionally followed by
/// the feature columns of both views (empty cells where a view is absent).
pub fn write_stream_trace(stream: &Stream, path: &Path, dump_features: bool) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let (d1, d2) = (stream.d1(), stream.d2());
    let mut header = String::from("step,period,labeled,true_label");
    if dump_features {
        for j in 0..d1 {
            header.push_str(&format!(",s1_{j}"));
        }
        for j in 0..d2 {
            header.push_str(&format!(",s2_{j}"));
        }
    }
    let io = |e| Error::io(path, e);
    writeln!(out, "{header}").map_err(io)?;
    for ev in &stream.events {
        let mut line = format!(
            "{},{},{},{}",
            ev.step,
            ev.period(),
            ev.revealed_label.is_some() as u8,
            ev.true_label.as_i8()
        );
        if dump_features {
            push_view(&mut line, ev.s1(), d1);
            push_view(&mut line, ev.s2(), d2);
        }
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

fn push_view(line: &mut String, view: Option<&[f64]>, dim: usize) {
    match view {
        Some(x) => x.iter().for_each(|v| line.push_str(&format!(",{v}"))),
        None => (0..dim).for_each(|_| line.push(',')),
    }
}
