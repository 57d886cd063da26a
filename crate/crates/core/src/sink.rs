//! Consumers of sampled edges.

/// Receives sampled edges `(u, v)` with `u < v`, in batches.
///
/// Batches arrive from several workers one at a time; their order is
/// unspecified.
pub trait EdgeSink: Send {
    fn push_batch(&mut self, edges: &[(u32, u32)]);
}

impl EdgeSink for Vec<(u32, u32)> {
    fn push_batch(&mut self, edges: &[(u32, u32)]) {
        self.extend_from_slice(edges);
    }
}

impl<S: EdgeSink + ?Sized> EdgeSink for &mut S {
    fn push_batch(&mut self, edges: &[(u32, u32)]) {
        (**self).push_batch(edges)
    }
}

/// Counts edges without storing them.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct CountSink {
    pub edges: u64,
}

impl EdgeSink for CountSink {
    fn push_batch(&mut self, edges: &[(u32, u32)]) {
        self.edges += edges.len() as u64;
    }
}

/// 64-bit mix of one edge used by [`ChecksumSink`].
#[inline]
pub fn edge_hash(u: u32, v: u32) -> u64 {
    crate::rng::mix64(((u as u64) << 32) | v as u64)
}

/// Order-independent checksum: the wrapping sum of [`edge_hash`] over all edges.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct ChecksumSink {
    pub edges: u64,
    pub checksum: u64,
}

impl ChecksumSink {
    pub fn add(&mut self, u: u32, v: u32) {
        self.edges += 1;
        self.checksum = self.checksum.wrapping_add(edge_hash(u, v));
    }
}

impl EdgeSink for ChecksumSink {
    fn push_batch(&mut self, edges: &[(u32, u32)]) {
        for &(u, v) in edges {
            self.add(u, v);
        }
    }
}

/// Forwards to two sinks.
pub struct TeeSink<A, B>(pub A, pub B);

impl<A: EdgeSink, B: EdgeSink> EdgeSink for TeeSink<A, B> {
    fn push_batch(&mut self, edges: &[(u32, u32)]) {
        self.0.push_batch(edges);
        self.1.push_batch(edges);
    }
}

const BUFFER: usize = 8192;

/// Per-worker edge buffer flushed into a shared sink.
pub(crate) struct EdgeBuffer<'a> {
    buf: Vec<(u32, u32)>,
    count: u64,
    sink: &'a (dyn Fn(&[(u32, u32)]) + Sync),
}

impl<'a> EdgeBuffer<'a> {
    pub fn new(sink: &'a (dyn Fn(&[(u32, u32)]) + Sync)) -> Self {
        Self {
            buf: Vec::with_capacity(BUFFER),
            count: 0,
            sink,
        }
    }

    /// Emits the edge between two distinct vertices.
    #[inline]
    pub fn push(&mut self, u: u32, v: u32) {
        debug_assert_ne!(u, v);
        self.buf.push(if u < v { (u, v) } else { (v, u) });
        if self.buf.len() == BUFFER {
            self.flush();
        }
    }

    pub fn flush(&mut self) {
        if self.buf.is_empty() {
            return;
        }
        self.count += self.buf.len() as u64;
        (self.sink)(&self.buf);
        self.buf.clear();
    }

    /// Flushes and returns the number of edges emitted through this buffer.
    pub fn finish(mut self) -> u64 {
        self.flush();
        self.count
    }
}
