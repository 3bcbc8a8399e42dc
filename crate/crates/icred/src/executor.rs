use icred_core::trainer::Executor;

/// Splits jobs into contiguous chunks over scoped threads. Results come back
/// in job order, so anything reduced from them does not depend on the thread
/// count.
#[derive(Debug, Clone, Copy)]
pub struct ThreadedExecutor {
    threads: usize,
}

impl ThreadedExecutor {
    /// `threads` is clamped to at least one.
    pub fn new(threads: usize) -> Self {
        ThreadedExecutor {
            threads: threads.max(1),
        }
    }

    pub fn threads(&self) -> usize {
        self.threads
    }
}

impl Executor for ThreadedExecutor {
    fn map<T: Send>(&self, jobs: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        let workers = self.threads.min(jobs);
        if workers <= 1 {
            return (0..jobs).map(f).collect();
        }
        let chunk = jobs.div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let range = w * chunk..((w + 1) * chunk).min(jobs);
                    scope.spawn(move || range.map(f).collect::<Vec<T>>())
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().unwrap_or_else(|panic| std::panic::resume_unwind(panic)))
                .collect()
        })
    }
}
