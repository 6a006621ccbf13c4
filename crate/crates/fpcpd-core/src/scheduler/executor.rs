//! Shared-memory executor for one block's entry updates.
//!
//! Blocks arrive at a high rate (one per inner loop step, tens of
//! microseconds of work each), so a conventional fork-join per block
//! would dominate the runtime. The executor keeps a fixed set of worker
//! threads that spin briefly on a job sequence number and fall back to
//! yielding, giving dispatch latency in the low microseconds.
//!
//! Entries of a block touch pairwise disjoint factor rows, so the split
//! of a block across workers never changes the result: every individual
//! update reads and writes memory no other update touches.

use std::cell::UnsafeCell;
use std::marker::PhantomData;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use crate::scheduler::{Block, Entry};
use crate::tensor::Matrix;

/// Spin iterations before a waiting worker starts yielding its timeslice.
const SPIN_LIMIT: u32 = 4096;

type RawJob = *const (dyn Fn(usize) + Sync + 'static);

struct Shared {
    /// Bumped once per published job; workers watch for changes.
    seq: AtomicU64,
    /// Valid whenever `seq` is ahead of a worker's last seen value.
    job: UnsafeCell<Option<RawJob>>,
    /// Workers still running the current job.
    pending: AtomicUsize,
    panicked: AtomicBool,
    shutdown: AtomicBool,
}

// `job` is written by the coordinating thread strictly before the
// release bump of `seq` and read by workers strictly after the acquire
// load of `seq`; `pending` serializes job lifetimes.
unsafe impl Send for Shared {}
unsafe impl Sync for Shared {}

/// Reusable pool that applies an item-indexed closure across worker
/// threads, one contiguous chunk per worker.
///
/// `new(threads)` treats `threads` as an upper bound and never keeps more
/// workers than the machine has cores; because block entries are
/// conflict-free and all per-item randomness is derived from the item's
/// position, the worker count affects wall time only, never results.
pub struct BlockExecutor {
    shared: Arc<Shared>,
    handles: Vec<JoinHandle<()>>,
}

impl BlockExecutor {
    pub fn new(threads: usize) -> Self {
        let hw = std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1);
        let effective = threads.max(1).min(hw);
        let shared = Arc::new(Shared {
            seq: AtomicU64::new(0),
            job: UnsafeCell::new(None),
            pending: AtomicUsize::new(0),
            panicked: AtomicBool::new(false),
            shutdown: AtomicBool::new(false),
        });
        let handles = (0..effective.saturating_sub(1))
            .map(|slot| {
                let shared = Arc::clone(&shared);
                std::thread::Builder::new()
                    .name(format!("fpcpd-worker-{slot}"))
                    .spawn(move || worker_loop(shared, slot + 1))
                    .expect("spawn worker thread")
            })
            .collect();
        Self { shared, handles }
    }

    /// Number of participating threads, including the calling thread.
    pub fn threads(&self) -> usize {
        self.handles.len() + 1
    }

    /// Apply `f` to every index in `0..n_items` exactly once, splitting
    /// the range into one contiguous chunk per thread. Blocks until all
    /// chunks are done; panics if `f` panicked on any thread.
    pub fn run<F>(&self, n_items: usize, f: F)
    where
        F: Fn(usize) + Sync,
    {
        if self.handles.is_empty() || n_items <= 1 {
            for idx in 0..n_items {
                f(idx);
            }
            return;
        }
        let parts = self.threads();
        let dispatch = move |slot: usize| {
            let (lo, hi) = chunk_range(n_items, parts, slot);
            for idx in lo..hi {
                f(idx);
            }
        };

        let job_ref: &(dyn Fn(usize) + Sync) = &dispatch;
        // Erase the stack lifetime; workers only dereference the pointer
        // between the seq bump and their pending decrement, and we do not
        // return (or unwind) past the wait below.
        let raw: RawJob = unsafe {
            std::mem::transmute::<&(dyn Fn(usize) + Sync), RawJob>(job_ref)
        };
        unsafe {
            *self.shared.job.get() = Some(raw);
        }
        self.shared
            .pending
            .store(self.handles.len(), Ordering::Relaxed);
        self.shared.seq.fetch_add(1, Ordering::Release);

        let own = panic::catch_unwind(AssertUnwindSafe(|| dispatch(0)));

        let mut spins: u32 = 0;
        while self.shared.pending.load(Ordering::Acquire) != 0 {
            spins = spins.wrapping_add(1);
            if spins < SPIN_LIMIT {
                std::hint::spin_loop();
            } else {
                std::thread::yield_now();
            }
        }

        if let Err(payload) = own {
            panic::resume_unwind(payload);
        }
        if self.shared.panicked.swap(false, Ordering::Relaxed) {
            panic!("worker thread panicked while executing a block");
        }
    }
}

impl Drop for BlockExecutor {
    fn drop(&mut self) {
        self.shared.shutdown.store(true, Ordering::Release);
        for handle in self.handles.drain(..) {
            let _ = handle.join();
        }
    }
}

fn worker_loop(shared: Arc<Shared>, slot: usize) {
    let mut last_seq = 0u64;
    loop {
        let mut spins: u32 = 0;
        let seq = loop {
            if shared.shutdown.load(Ordering::Acquire) {
                return;
            }
            let s = shared.seq.load(Ordering::Acquire);
            if s != last_seq {
                break s;
            }
            spins = spins.wrapping_add(1);
            if spins < SPIN_LIMIT {
                std::hint::spin_loop();
            } else {
                std::thread::yield_now();
            }
        };
        last_seq = seq;
        let raw = unsafe { (*shared.job.get()).expect("job published before seq bump") };
        let result = panic::catch_unwind(AssertUnwindSafe(|| {
            let f = unsafe { &*raw };
            f(slot);
        }));
        if result.is_err() {
            shared.panicked.store(true, Ordering::Relaxed);
        }
        shared.pending.fetch_sub(1, Ordering::Release);
    }
}

/// Contiguous chunk of `0..n` assigned to `slot` out of `parts`.
fn chunk_range(n: usize, parts: usize, slot: usize) -> (usize, usize) {
    let base = n / parts;
    let rem = n % parts;
    let lo = slot * base + slot.min(rem);
    let len = base + usize::from(slot < rem);
    (lo, lo + len)
}

/// Apply `update` once per entry of `block`, concurrently across the
/// executor's threads. `update` receives the entry's position within the
/// block (used to derive per-entry randomness) and the entry itself.
///
/// The caller must uphold the interchangeability contract: for a block
/// built by `build_plan`, `update` may mutate only factor rows `i`, `j`,
/// `k` of its own entry, which distinct entries never share.
pub fn run_block_parallel<F>(exec: &BlockExecutor, block: &Block, update: F)
where
    F: Fn(usize, &Entry) + Sync,
{
    let entries = &block.entries;
    exec.run(entries.len(), |slot| update(slot, &entries[slot]));
}

/// Raw row view over a standard-layout matrix, shareable across the
/// executor's threads.
///
/// Exists to let block updates mutate disjoint factor rows in place; any
/// two concurrent `row_mut` calls must target different rows, which the
/// block construction guarantees.
pub(crate) struct SharedRows<'a> {
    ptr: *mut f64,
    rows: usize,
    cols: usize,
    _marker: PhantomData<&'a mut f64>,
}

unsafe impl Send for SharedRows<'_> {}
unsafe impl Sync for SharedRows<'_> {}

impl<'a> SharedRows<'a> {
    pub fn new(m: &'a mut Matrix) -> Self {
        let rows = m.nrows();
        let cols = m.ncols();
        let slice = m
            .as_slice_mut()
            .expect("factor matrices use standard layout");
        Self {
            ptr: slice.as_mut_ptr(),
            rows,
            cols,
            _marker: PhantomData,
        }
    }

    /// # Safety
    /// No other reference to row `r` may exist for the duration of the
    /// returned borrow; concurrent callers must pass distinct `r`.
    #[allow(clippy::mut_from_ref)]
    pub unsafe fn row_mut(&self, r: usize) -> &mut [f64] {
        debug_assert!(r < self.rows);
        std::slice::from_raw_parts_mut(self.ptr.add(r * self.cols), self.cols)
    }
}

/// Raw element view over a slice, shareable across the executor's
/// threads. Same contract as [`SharedRows`], at element granularity.
pub(crate) struct SharedSlice<'a> {
    ptr: *mut f64,
    len: usize,
    _marker: PhantomData<&'a mut f64>,
}

unsafe impl Send for SharedSlice<'_> {}
unsafe impl Sync for SharedSlice<'_> {}

impl<'a> SharedSlice<'a> {
    pub fn new(buf: &'a mut [f64]) -> Self {
        Self {
            ptr: buf.as_mut_ptr(),
            len: buf.len(),
            _marker: PhantomData,
        }
    }

    /// # Safety
    /// Each index may be written by at most one concurrent caller.
    pub unsafe fn set(&self, idx: usize, value: f64) {
        debug_assert!(idx < self.len);
        *self.ptr.add(idx) = value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::build_plan;
    use std::sync::atomic::{AtomicUsize, Ordering};

    #[test]
    fn runs_every_item_exactly_once() {
        let exec = BlockExecutor::new(4);
        for n in [0usize, 1, 2, 3, 7, 100, 1001] {
            let counts: Vec<AtomicUsize> = (0..n).map(|_| AtomicUsize::new(0)).collect();
            exec.run(n, |idx| {
                counts[idx].fetch_add(1, Ordering::Relaxed);
            });
            assert!(counts.iter().all(|c| c.load(Ordering::Relaxed) == 1));
        }
    }

    #[test]
    fn reusable_many_times() {
        let exec = BlockExecutor::new(2);
        let total = AtomicUsize::new(0);
        for _ in 0..2000 {
            exec.run(8, |_| {
                total.fetch_add(1, Ordering::Relaxed);
            });
        }
        assert_eq!(total.load(Ordering::Relaxed), 16000);
    }

    #[test]
    fn chunk_ranges_partition() {
        for n in 0..40 {
            for parts in 1..6 {
                let mut covered = Vec::new();
                for slot in 0..parts {
                    let (lo, hi) = chunk_range(n, parts, slot);
                    covered.extend(lo..hi);
                }
                assert_eq!(covered, (0..n).collect::<Vec<_>>());
            }
        }
    }

    #[test]
    fn propagates_worker_panic_and_stays_usable() {
        let exec = BlockExecutor::new(2);
        if exec.threads() < 2 {
            return; // single-core machine: nothing to exercise
        }
        let result = std::panic::catch_unwind(AssertUnwindSafe(|| {
            exec.run(64, |idx| {
                if idx == 63 {
                    panic!("boom");
                }
            });
        }));
        assert!(result.is_err());
        let count = AtomicUsize::new(0);
        exec.run(10, |_| {
            count.fetch_add(1, Ordering::Relaxed);
        });
        assert_eq!(count.load(Ordering::Relaxed), 10);
    }

    /// Row-local updates through `SharedRows` give the same bytes no
    /// matter how the block is split across threads.
    #[test]
    fn parallel_equals_sequential_for_row_local_updates() {
        let plan = build_plan((3, 3, 3)).unwrap();

        let run_with = |threads: usize| -> (Matrix, Matrix, Matrix) {
            let exec = BlockExecutor::new(threads);
            let mut a = Matrix::from_shape_fn((3, 2), |(r, c)| (r * 2 + c) as f64 + 0.5);
            let mut b = a.clone();
            let mut c = a.clone();
            {
                let ra = SharedRows::new(&mut a);
                let rb = SharedRows::new(&mut b);
                let rc = SharedRows::new(&mut c);
                for block in &plan.blocks {
                    run_block_parallel(&exec, block, |slot, e| {
                        let row_a = unsafe { ra.row_mut(e.i) };
                        let row_b = unsafe { rb.row_mut(e.j) };
                        let row_c = unsafe { rc.row_mut(e.k) };
                        for r in 0..2 {
                            row_a[r] += 0.125 * (slot as f64 + 1.0) * row_b[r];
                            row_b[r] *= 0.5;
                            row_c[r] -= 0.25 * row_a[r];
                        }
                    });
                }
            }
            (a, b, c)
        };

        let single = run_with(1);
        let multi = run_with(4);
        assert_eq!(single.0, multi.0);
        assert_eq!(single.1, multi.1);
        assert_eq!(single.2, multi.2);
    }

    #[test]
    fn single_entry_block_matches_direct_call() {
        let plan = build_plan((1, 1, 1)).unwrap();
        let exec = BlockExecutor::new(3);
        let hits = AtomicUsize::new(0);
        run_block_parallel(&exec, &plan.blocks[0], |slot, e| {
            assert_eq!((slot, e.i, e.j, e.k), (0, 0, 0, 0));
            hits.fetch_add(1, Ordering::Relaxed);
        });
        assert_eq!(hits.load(Ordering::Relaxed), 1);
    }
}
