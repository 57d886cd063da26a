//! Recursive enumeration of cell pairs and the two-stage parallel schedule.
//!
//! Starting from the root pair, a pair of neighbouring cells on level `l`
//! handles all bucket pairs whose comparison level is `l`, then recurses into
//! the child pairs. Child pairs that are no longer neighbours handle every
//! bucket pair with comparison level at least their own level and stop there.
//! Every unordered vertex pair thus lands in exactly one processing event.

use std::ops::Range;
use std::sync::Mutex;

use crate::index::{GridCell, LevelSchedule, SpatialIndex};
use crate::rng::event_key;
use crate::sink::{EdgeBuffer, EdgeSink};

/// Per-event edge sampling of one model. Ranges are index positions.
pub(crate) trait Kernel: Sync {
    /// All pairs `a < b` inside `r` (one bucket, one cell).
    fn within(&self, r: Range<usize>, key: u64, out: &mut EdgeBuffer);

    /// All pairs of `ra x rb` for neighbouring cells.
    fn across(&self, ra: Range<usize>, rb: Range<usize>, key: u64, out: &mut EdgeBuffer);

    /// Pairs of `ra x rb` (buckets `i`, `j`) for distant cells.
    #[allow(clippy::too_many_arguments)]
    fn distant(
        &self,
        i: usize,
        j: usize,
        ra: Range<usize>,
        rb: Range<usize>,
        sep: Separation,
        key: u64,
        out: &mut EdgeBuffer,
    );

    /// False when distant cells can never be connected (threshold variants).
    fn samples_distant(&self) -> bool;
}

/// Two distant cells on `level`, `steps` cell widths apart along their
/// farthest axis. Distant pairs are children of neighbouring cells, so
/// `steps` is 1 or 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Separation {
    pub level: u32,
    pub steps: u64,
}

impl Separation {
    /// Lower bound on the distance of any two points of the cells.
    #[inline]
    pub fn min_dist(&self) -> f64 {
        self.steps as f64 / (1u64 << self.level) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskKind {
    /// Process one cell pair without recursion.
    Neighbor,
    Distant,
    /// Process and recurse.
    Subtree,
}

#[derive(Debug, Clone, Copy)]
struct Task {
    kind: TaskKind,
    level: u32,
    a: GridCell,
    b: GridCell,
}

pub(crate) struct Engine<'a, K> {
    index: &'a SpatialIndex,
    schedule: &'a LevelSchedule,
    kernel: &'a K,
    seed: u64,
    dim: usize,
}

impl<'a, K: Kernel> Engine<'a, K> {
    pub fn new(index: &'a SpatialIndex, schedule: &'a LevelSchedule, kernel: &'a K, seed: u64) -> Self {
        Self {
            index,
            schedule,
            kernel,
            seed,
            dim: index.dim(),
        }
    }

    /// Samples all edges with `workers` tasks on the current rayon pool.
    pub fn run(&self, workers: usize, sink: &mut dyn EdgeSink) -> u64 {
        if self.index.is_empty() {
            return 0;
        }
        let sink = Mutex::new(sink);
        let push = |e: &[(u32, u32)]| sink.lock().unwrap().push_batch(e);
        let workers = workers.max(1);
        if workers == 1 {
            let mut out = EdgeBuffer::new(&push);
            self.visit(0, &GridCell::ROOT, &GridCell::ROOT, &mut out);
            return out.finish();
        }

        let cut = self.cut_level(workers);
        let mut tasks = Vec::new();
        self.collect(0, GridCell::ROOT, GridCell::ROOT, cut, &mut tasks);
        let (mut heavy, mut light, mut constant) = (Vec::new(), Vec::new(), Vec::new());
        for t in tasks {
            match t.kind {
                TaskKind::Subtree if t.a == t.b => heavy.push(t),
                TaskKind::Subtree => light.push(t),
                _ => constant.push(t),
            }
        }
        let counts = Mutex::new(0u64);
        rayon::scope(|s| {
            for w in 0..workers {
                let (heavy, light, constant) = (&heavy, &light, &constant);
                let (push, counts) = (&push, &counts);
                s.spawn(move |_| {
                    let mut out = EdgeBuffer::new(push);
                    for class in [heavy, light, constant] {
                        for t in class.iter().skip(w).step_by(workers) {
                            self.run_task(t, &mut out);
                        }
                    }
                    *counts.lock().unwrap() += out.finish();
                });
            }
        });
        counts.into_inner().unwrap()
    }

    /// Smallest level with at least two cells per worker.
    fn cut_level(&self, workers: usize) -> u32 {
        let mut level = 0;
        while level < self.schedule.max_depth() && (1u64 << (self.dim as u32 * level)) < 2 * workers as u64 {
            level += 1;
        }
        level
    }

    fn run_task(&self, t: &Task, out: &mut EdgeBuffer) {
        match t.kind {
            TaskKind::Neighbor => self.process_neighbor(t.level, &t.a, &t.b, out),
            TaskKind::Distant => self.process_distant(t.level, &t.a, &t.b, out),
            TaskKind::Subtree => self.visit(t.level, &t.a, &t.b, out),
        }
    }

    #[inline]
    fn occupied(&self, level: u32, a: &GridCell, b: &GridCell) -> bool {
        self.index.occupied(level, a.code) && (a == b || self.index.occupied(level, b.code))
    }

    /// Occupied children of `a` on `level + 1`, written to `buf`.
    #[inline]
    fn occupied_children(&self, level: u32, a: &GridCell, buf: &mut [GridCell; 32]) -> usize {
        let mut len = 0;
        for x in 0..1u64 << self.dim {
            let c = a.child(self.dim, x);
            if self.index.occupied(level + 1, c.code) {
                buf[len] = c;
                len += 1;
            }
        }
        len
    }

    /// Calls `f(child_a, child_b, neighbours)` for every pair of occupied
    /// children, each unordered pair once when `a == b`.
    #[inline]
    fn for_child_pairs(&self, level: u32, a: &GridCell, b: &GridCell, mut f: impl FnMut(GridCell, GridCell, bool)) {
        let child = level + 1;
        let mut ca = [GridCell::ROOT; 32];
        let na = self.occupied_children(level, a, &mut ca);
        if a == b {
            for x in 0..na {
                for y in x..na {
                    let near = x == y || ca[x].gap(&ca[y], self.dim, child) <= 1;
                    f(ca[x], ca[y], near);
                }
            }
            return;
        }
        let mut cb = [GridCell::ROOT; 32];
        let nb = self.occupied_children(level, b, &mut cb);
        for x in &ca[..na] {
            for y in &cb[..nb] {
                f(*x, *y, x.gap(y, self.dim, child) <= 1);
            }
        }
    }

    fn visit(&self, level: u32, a: &GridCell, b: &GridCell, out: &mut EdgeBuffer) {
        if !self.occupied(level, a, b) {
            return;
        }
        self.process_neighbor(level, a, b, out);
        if level >= self.schedule.max_depth() {
            return;
        }
        self.for_child_pairs(level, a, b, |ca, cb, near| {
            if near {
                self.visit(level + 1, &ca, &cb, out);
            } else if self.kernel.samples_distant() {
                self.process_distant(level + 1, &ca, &cb, out);
            }
        });
    }

    fn collect(&self, level: u32, a: GridCell, b: GridCell, cut: u32, tasks: &mut Vec<Task>) {
        if !self.occupied(level, &a, &b) {
            return;
        }
        if level >= cut {
            tasks.push(Task { kind: TaskKind::Subtree, level, a, b });
            return;
        }
        tasks.push(Task { kind: TaskKind::Neighbor, level, a, b });
        self.for_child_pairs(level, &a, &b, |ca, cb, near| {
            if near {
                self.collect(level + 1, ca, cb, cut, tasks);
            } else if self.kernel.samples_distant() {
                tasks.push(Task {
                    kind: TaskKind::Distant,
                    level: level + 1,
                    a: ca,
                    b: cb,
                });
            }
        });
    }

    #[inline]
    fn key(&self, level: u32, a: &GridCell, b: &GridCell, i: usize, j: usize) -> u64 {
        event_key(self.seed, level, a.code, b.code, i as u32, j as u32)
    }

    fn process_neighbor(&self, level: u32, a: &GridCell, b: &GridCell, out: &mut EdgeBuffer) {
        for &(i, j) in self.schedule.buckets_for_cell_pair(level, true) {
            let (i, j) = (i as usize, j as usize);
            let ra = self.index.range(i, level, a.code);
            if a == b {
                if i == j {
                    if ra.len() >= 2 {
                        self.kernel.within(ra, self.key(level, a, b, i, j), out);
                    }
                } else {
                    let rb = self.index.range(j, level, a.code);
                    if !ra.is_empty() && !rb.is_empty() {
                        self.kernel.across(ra, rb, self.key(level, a, b, i, j), out);
                    }
                }
                continue;
            }
            let rb = self.index.range(j, level, b.code);
            if !ra.is_empty() && !rb.is_empty() {
                self.kernel.across(ra, rb, self.key(level, a, b, i, j), out);
            }
            if i != j {
                let ra = self.index.range(j, level, a.code);
                let rb = self.index.range(i, level, b.code);
                if !ra.is_empty() && !rb.is_empty() {
                    self.kernel.across(ra, rb, self.key(level, a, b, j, i), out);
                }
            }
        }
    }

    fn process_distant(&self, level: u32, a: &GridCell, b: &GridCell, out: &mut EdgeBuffer) {
        let gap = a.gap(b, self.dim, level);
        debug_assert!((2..=3).contains(&gap));
        let sep = Separation { level, steps: gap - 1 };
        for &(i, j) in self.schedule.buckets_for_cell_pair(level, false) {
            let (i, j) = (i as usize, j as usize);
            let ra = self.index.range(i, level, a.code);
            let rb = self.index.range(j, level, b.code);
            if !ra.is_empty() && !rb.is_empty() {
                let key = self.key(level, a, b, i, j);
                self.kernel.distant(i, j, ra, rb, sep, key, out);
            }
            if i != j {
                let ra = self.index.range(j, level, a.code);
                let rb = self.index.range(i, level, b.code);
                if !ra.is_empty() && !rb.is_empty() {
                    let key = self.key(level, a, b, j, i);
                    self.kernel.distant(j, i, ra, rb, sep, key, out);
                }
            }
        }
    }
}
