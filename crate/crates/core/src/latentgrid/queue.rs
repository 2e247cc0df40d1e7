use std::collections::VecDeque;
use std::sync::Mutex;

use super::{LatentField, LatentGridError, PatchGenerator, PixelRect};
use crate::satmap::CdnTile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JobId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JobState {
    Queued,
    Running,
    Done,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthesisJob {
    pub id: JobId,
    pub patch_rect: PixelRect,
    pub state: JobState,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompletedJob {
    pub id: JobId,
    pub patch_rect: PixelRect,
    pub tile: CdnTile,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlushReport {
    /// Outputs in FIFO submission order.
    pub completed: Vec<CompletedJob>,
    /// Number of `generate_batch` invocations.
    pub batches: usize,
}

/// Runs `jobs` front to back in stacks of at most `batch_size`.
///
/// Outputs are keyed by job id and returned in submission order no matter
/// how the generator schedules work inside a batch.
pub fn flush_queue(
    jobs: impl IntoIterator<Item = SynthesisJob>,
    generator: &dyn PatchGenerator,
    field: &LatentField,
    batch_size: usize,
) -> Result<FlushReport, LatentGridError> {
    if batch_size == 0 {
        return Err(LatentGridError::ZeroBatch);
    }
    let mut pending: VecDeque<SynthesisJob> = jobs.into_iter().collect();
    let mut report = FlushReport::default();
    while !pending.is_empty() {
        let n = batch_size.min(pending.len());
        let mut batch: Vec<SynthesisJob> = pending.drain(..n).collect();
        for job in &mut batch {
            job.state = JobState::Running;
        }
        let rects: Vec<PixelRect> = batch.iter().map(|j| j.patch_rect).collect();
        let tiles = generator.generate_batch(field, &rects);
        assert_eq!(tiles.len(), batch.len(), "generator returned a short batch");
        report.batches += 1;
        for (mut job, tile) in batch.into_iter().zip(tiles) {
            job.state = JobState::Done;
            report.completed.push(CompletedJob {
                id: job.id,
                patch_rect: job.patch_rect,
                tile,
            });
        }
    }
    Ok(report)
}

/// FIFO of patch synthesis jobs shared between producers.
#[derive(Debug)]
pub struct JobQueue {
    patch_size: u32,
    inner: Mutex<QueueInner>,
}

#[derive(Debug, Default)]
struct QueueInner {
    next_id: u64,
    pending: VecDeque<SynthesisJob>,
}

impl JobQueue {
    pub fn new(patch_size: u32) -> Self {
        Self {
            patch_size,
            inner: Mutex::new(QueueInner::default()),
        }
    }

    /// Appends a job; the rectangle must be exactly one patch.
    pub fn enqueue(&self, patch_rect: PixelRect) -> Result<JobId, LatentGridError> {
        if patch_rect.w != self.patch_size || patch_rect.h != self.patch_size {
            return Err(LatentGridError::PatchSize {
                expected: self.patch_size,
                got: patch_rect,
            });
        }
        let mut inner = self.inner.lock().unwrap();
        let id = JobId(inner.next_id);
        inner.next_id += 1;
        inner.pending.push_back(SynthesisJob {
            id,
            patch_rect,
            state: JobState::Queued,
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.inner.lock().unwrap().pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drains everything queued so far.
    pub fn flush(
        &self,
        generator: &dyn PatchGenerator,
        field: &LatentField,
        batch_size: usize,
    ) -> Result<FlushReport, LatentGridError> {
        if batch_size == 0 {
            return Err(LatentGridError::ZeroBatch);
        }
        let jobs: Vec<SynthesisJob> = self.inner.lock().unwrap().pending.drain(..).collect();
        flush_queue(jobs, generator, field, batch_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latentgrid::{sample_field, ReceptiveField};
    use crate::satmap::Raster;
    use std::sync::atomic::{AtomicUsize, Ordering};

    /// Fills each patch with its own origin so outputs are easy to trace.
    struct Stamp {
        calls: AtomicUsize,
    }

    impl PatchGenerator for Stamp {
        fn patch_size(&self) -> u32 {
            4
        }
        fn receptive_field(&self) -> ReceptiveField {
            ReceptiveField::new(0)
        }
        fn generate(&self, _: &LatentField, r: PixelRect) -> CdnTile {
            let mut t = CdnTile::void(r.w as usize, r.h as usize);
            t.height_m = Raster::filled(r.w as usize, r.h as usize, (r.x + r.y) as u16);
            t
        }
        fn generate_batch(&self, f: &LatentField, rects: &[PixelRect]) -> Vec<CdnTile> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            rects.iter().rev().map(|r| self.generate(f, *r)).rev().collect()
        }
    }

    #[test]
    fn empty_flush_never_calls_generator() {
        let g = Stamp { calls: AtomicUsize::new(0) };
        let f = sample_field(0, 4, 4, 4).unwrap();
        let q = JobQueue::new(4);
        let report = q.flush(&g, &f, 8).unwrap();
        assert!(report.completed.is_empty());
        assert_eq!(report.batches, 0);
        assert_eq!(g.calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn batch_size_does_not_change_outputs() {
        let g = Stamp { calls: AtomicUsize::new(0) };
        let f = sample_field(0, 4, 4, 4).unwrap();
        let run = |bs| {
            let q = JobQueue::new(4);
            for k in 0..17 {
                q.enqueue(PixelRect::new(4 * k, 0, 4, 4)).unwrap();
            }
            q.flush(&g, &f, bs).unwrap()
        };
        let a = run(1);
        let b = run(8);
        assert_eq!(a.completed, b.completed);
        assert_eq!(a.batches, 17);
        assert_eq!(b.batches, 3);
        let ids: Vec<u64> = a.completed.iter().map(|c| c.id.0).collect();
        assert_eq!(ids, (0..17).collect::<Vec<_>>());
    }

    #[test]
    fn wrong_patch_size_and_zero_batch_are_rejected() {
        let q = JobQueue::new(4);
        assert!(matches!(
            q.enqueue(PixelRect::new(0, 0, 4, 5)),
            Err(LatentGridError::PatchSize { .. })
        ));
        let g = Stamp { calls: AtomicUsize::new(0) };
        let f = sample_field(0, 4, 4, 4).unwrap();
        assert_eq!(q.flush(&g, &f, 0).unwrap_err(), LatentGridError::ZeroBatch);
    }

    #[test]
    fn concurrent_producers_get_unique_ids() {
        let q = JobQueue::new(4);
        std::thread::scope(|s| {
            for t in 0..4 {
                let q = &q;
                s.spawn(move || {
                    for k in 0..25 {
                        q.enqueue(PixelRect::new(4 * k, 4 * t, 4, 4)).unwrap();
                    }
                });
            }
        });
        assert_eq!(q.len(), 100);
        let g = Stamp { calls: AtomicUsize::new(0) };
        let f = sample_field(0, 4, 4, 4).unwrap();
        let done = q.flush(&g, &f, 7).unwrap().completed;
        let mut ids: Vec<u64> = done.iter().map(|c| c.id.0).collect();
        let sorted = {
            let mut s = ids.clone();
            s.sort();
            s
        };
        assert_eq!(ids, sorted, "FIFO order follows enqueue order");
        ids.dedup();
        assert_eq!(ids.len(), 100);
        assert!(q.is_empty());
    }
}
