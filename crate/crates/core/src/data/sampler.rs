use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::TransferTask;
use crate::error::Result;
use crate::model::LabeledBatch;
use crate::neuralcore::Matrix;

/// Shuffled pass over one domain that reshuffles and wraps when exhausted.
#[derive(Debug, Clone)]
struct DomainCursor {
    order: Vec<usize>,
    pos: usize,
    rng: ChaCha8Rng,
}

impl DomainCursor {
    fn new(len: usize, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut order: Vec<usize> = (0..len).collect();
        order.shuffle(&mut rng);
        Self { order, pos: 0, rng }
    }

    fn take(&mut self, count: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            if self.pos == self.order.len() {
                self.order.shuffle(&mut self.rng);
                self.pos = 0;
            }
            let n = (count - out.len()).min(self.order.len() - self.pos);
            out.extend_from_slice(&self.order[self.pos..self.pos + n]);
            self.pos += n;
        }
        out
    }
}

/// One training iteration's worth of data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub sources: Vec<LabeledBatch>,
    pub target: Matrix,
}

/// Draws `batch_size` rows from every source and from the target per iteration.
///
/// Each domain has its own shuffle stream. The target always uses stream 0 and
/// source `i` uses stream `i + 1`, so two tasks with the same target and seed
/// see the same target batches regardless of how the sources are arranged.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    batch_size: usize,
    iterations_per_epoch: usize,
    sources: Vec<DomainCursor>,
    target: DomainCursor,
}

impl BatchSampler {
    pub fn new(
        task: &TransferTask,
        batch_size: usize,
        iterations_per_epoch: usize,
        seed: u64,
    ) -> Self {
        assert!(batch_size >= 1, "batch_size must be >= 1");
        let sources = task
            .sources
            .iter()
            .enumerate()
            .map(|(i, s)| DomainCursor::new(s.len(), seed, i as u64 + 1))
            .collect();
        Self {
            batch_size,
            iterations_per_epoch,
            sources,
            target: DomainCursor::new(task.target.len(), seed, 0),
        }
    }

    pub fn iterations_per_epoch(&self) -> usize {
        self.iterations_per_epoch
    }

    pub fn next_batch(&mut self, task: &TransferTask) -> Result<TrainingBatch> {
        let mut sources = Vec::with_capacity(self.sources.len());
        for (cursor, ds) in self.sources.iter_mut().zip(&task.sources) {
            let idx = cursor.take(self.batch_size);
            sources.push(LabeledBatch {
                features: ds.features.select_rows(&idx)?,
                labels: idx.iter().map(|&i| ds.labels[i]).collect(),
            });
        }
        let idx = self.target.take(self.batch_size);
        Ok(TrainingBatch {
            sources,
            target: task.target.features.select_rows(&idx)?,
        })
    }

    /// The batches of one epoch.
    pub fn epoch<'a>(
        &'a mut self,
        task: &'a TransferTask,
    ) -> impl Iterator<Item = Result<TrainingBatch>> + 'a {
        (0..self.iterations_per_epoch).map(move |_| self.next_batch(task))
    }
}
