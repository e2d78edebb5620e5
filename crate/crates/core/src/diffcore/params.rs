use std::ops::Range;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)
}

/// A named, contiguous slice of a [`ParamStore`] that can be frozen as a unit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
    pub frozen: bool,
}

/// Flat parameter vector partitioned into segments.
///
/// Every store carries a process-unique identity; graph leaves remember which
/// store they were read from so that [`Graph::backward`](super::Graph::backward)
/// only reports gradients for the store it is asked about. Cloning a store
/// yields a new identity.
#[derive(Debug)]
pub struct ParamStore {
    id: u64,
    values: Vec<f64>,
    segments: Vec<Segment>,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        Self { id: fresh_id(), values: self.values.clone(), segments: self.segments.clone() }
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        Self::new()
    }
}

impl ParamStore {
    pub fn new() -> Self {
        Self { id: fresh_id(), values: Vec::new(), segments: Vec::new() }
    }

    /// Rebuilds a store from serialized parts.
    pub fn from_parts(values: Vec<f64>, segments: Vec<Segment>) -> Self {
        let mut end = 0;
        for s in &segments {
            assert_eq!(s.range.start, end, "segments must tile the store contiguously");
            end = s.range.end;
        }
        assert_eq!(end, values.len(), "segments must cover every value");
        Self { id: fresh_id(), values, segments }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    /// Appends a segment initialized with `values` and returns its index.
    pub fn push_segment(&mut self, name: impl Into<String>, values: &[f64]) -> usize {
        let start = self.values.len();
        self.values.extend_from_slice(values);
        self.segments.push(Segment { name: name.into(), range: start..self.values.len(), frozen: false });
        self.segments.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn segment(&self, index: usize) -> &Segment {
        &self.segments[index]
    }

    pub fn set_frozen(&mut self, index: usize, frozen: bool) {
        self.segments[index].frozen = frozen;
    }

    pub fn freeze_all(&mut self) {
        self.segments.iter_mut().for_each(|s| s.frozen = true);
    }

    pub fn unfreeze_all(&mut self) {
        self.segments.iter_mut().for_each(|s| s.frozen = false);
    }

    pub fn all_frozen(&self) -> bool {
        self.segments.iter().all(|s| s.frozen)
    }

    /// Frozen flag per segment, for save/restore around a training phase.
    pub fn frozen_flags(&self) -> Vec<bool> {
        self.segments.iter().map(|s| s.frozen).collect()
    }

    pub fn restore_frozen_flags(&mut self, flags: &[bool]) {
        assert_eq!(flags.len(), self.segments.len());
        for (s, &f) in self.segments.iter_mut().zip(flags) {
            s.frozen = f;
        }
    }

    /// Segment containing the flat index `i`.
    pub fn segment_of(&self, i: usize) -> Option<usize> {
        self.segments.iter().position(|s| s.range.contains(&i))
    }

    pub fn is_frozen_at(&self, i: usize) -> bool {
        self.segment_of(i).map(|s| self.segments[s].frozen).unwrap_or(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segments_tile_and_freeze() {
        let mut p = ParamStore::new();
        let a = p.push_segment("a", &[1.0, 2.0]);
        let b = p.push_segment("b", &[3.0]);
        assert_eq!(p.segment(b).range, 2..3);
        p.set_frozen(a, true);
        assert!(p.is_frozen_at(1));
        assert!(!p.is_frozen_at(2));
        assert!(!p.all_frozen());
        let q = p.clone();
        assert_ne!(p.id(), q.id());
        assert_eq!(p.values(), q.values());
    }
}
