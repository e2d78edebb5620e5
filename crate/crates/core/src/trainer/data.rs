use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diffcore::Matrix;
use crate::losses::{LossBatch, LossKind};

use super::TrainError;

/// One control-rate step of logged experience.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Vec<f64>,
    pub tau_run: Vec<f64>,
    pub s_next: Vec<f64>,
    /// Desired next state over the task's target dimensions.
    pub s_desired: Vec<f64>,
    pub t_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Babble,
    Rollout(LossKind),
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Babble => f.write_str("babble"),
            Source::Rollout(k) => write!(f, "{k}"),
        }
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "babble" {
            Ok(Source::Babble)
        } else {
            s.parse().map(Source::Rollout)
        }
    }
}

/// Where a transition came from. Babbling rows carry a desired state taken
/// from the evaluation reference, but it did not drive the action, so
/// objectives that compare against `s*` skip them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub iteration: usize,
    pub source: Source,
}

impl Provenance {
    pub fn desired_valid(&self) -> bool {
        matches!(self.source, Source::Rollout(_))
    }
}

/// Append-only transition store.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    transitions: Vec<Transition>,
    provenance: Vec<Provenance>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn provenance(&self) -> &[Provenance] {
        &self.provenance
    }

    pub fn push(&mut self, t: Transition, p: Provenance) {
        self.transitions.push(t);
        self.provenance.push(p);
    }

    /// `D ← D ∪ other`, preserving order.
    pub fn extend(&mut self, other: &Dataset) {
        self.transitions.extend_from_slice(&other.transitions);
        self.provenance.extend_from_slice(&other.provenance);
    }

    /// Indices of rows passing `keep`.
    pub fn select(&self, keep: impl Fn(&Provenance) -> bool) -> Vec<usize> {
        (0..self.len()).filter(|&i| keep(&self.provenance[i])).collect()
    }

    pub fn batch(&self, rows: &[usize]) -> Result<LossBatch, TrainError> {
        let width = |f: fn(&Transition) -> &[f64], w: usize| {
            let data: Vec<f64> = rows.iter().flat_map(|&i| f(&self.transitions[i]).iter().copied()).collect();
            Matrix::from_vec(rows.len(), w, data)
        };
        let first = rows.first().map(|&i| &self.transitions[i]);
        let (ns, na, nd) = first.map(|t| (t.s.len(), t.tau_run.len(), t.s_desired.len())).unwrap_or((0, 0, 0));
        Ok(LossBatch::new(
            width(|t| &t.s, ns),
            width(|t| &t.s_desired, nd),
            width(|t| &t.s_next, ns),
            width(|t| &t.tau_run, na),
        )?)
    }

    /// CSV dump. Columns: `iteration,source,t_index`, then `s_i`, `tau_i`,
    /// `s_next_i`, `s_desired_i` for every component. Floats are written in
    /// shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<(), TrainError> {
        let io = |e: csv::Error| TrainError::Io(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        let (ns, na, nd) = self
            .transitions
            .first()
            .map(|t| (t.s.len(), t.tau_run.len(), t.s_desired.len()))
            .unwrap_or((0, 0, 0));
        let mut header = vec!["iteration".to_string(), "source".into(), "t_index".into()];
        header.extend((0..ns).map(|i| format!("s_{i}")));
        header.extend((0..na).map(|i| format!("tau_{i}")));
        header.extend((0..ns).map(|i| format!("s_next_{i}")));
        header.extend((0..nd).map(|i| format!("s_desired_{i}")));
        w.write_record(&header).map_err(io)?;
        for (t, p) in self.transitions.iter().zip(&self.provenance) {
            let mut rec = vec![p.iteration.to_string(), p.source.to_string(), t.t_index.to_string()];
            rec.extend(t.s.iter().chain(&t.tau_run).chain(&t.s_next).chain(&t.s_desired).map(|x| x.to_string()));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| TrainError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read_csv(path: &Path) -> Result<Self, TrainError> {
        let bad = |m: String| TrainError::CorruptDataset(format!("{}: {m}", path.display()));
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => TrainError::Io(format!("{}: {e}", path.display())),
            _ => bad(e.to_string()),
        })?;
        let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
        let count = |prefix: &str| header.iter().filter(|h| h.starts_with(prefix) && h[prefix.len()..].parse::<usize>().is_ok()).count();
        let (ns, na, nd) = (count("s_"), count("tau_"), count("s_desired_"));
        let ns_next = count("s_next_");
        if header.len() < 3 || &header[0] != "iteration" || &header[1] != "source" || &header[2] != "t_index" || ns != ns_next {
            return Err(bad("unexpected header".into()));
        }
        if header.len() != 3 + 2 * ns + na + nd {
            return Err(bad("unexpected column count".into()));
        }
        let mut out = Dataset::new();
        for (line, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let row = line + 2;
            let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("row {row}: missing column {i}")));
            let iteration = field(0)?.parse().map_err(|_| bad(format!("row {row}: bad iteration")))?;
            let source = field(1)?.parse().map_err(|e| bad(format!("row {row}: {e}")))?;
            let t_index = field(2)?.parse().map_err(|_| bad(format!("row {row}: bad t_index")))?;
            let nums = (3..rec.len())
                .map(|i| field(i)?.parse::<f64>().map_err(|_| bad(format!("row {row}: bad number in column {i}"))))
                .collect::<Result<Vec<f64>, _>>()?;
            if nums.len() != 2 * ns + na + nd {
                return Err(bad(format!("row {row}: wrong field count")));
            }
            let (s, rest) = nums.split_at(ns);
            let (tau, rest) = rest.split_at(na);
            let (next, desired) = rest.split_at(ns);
            out.push(
                Transition { s: s.to_vec(), tau_run: tau.to_vec(), s_next: next.to_vec(), s_desired: desired.to_vec(), t_index },
                Provenance { iteration, source },
            );
        }
        Ok(out)
    }
}
