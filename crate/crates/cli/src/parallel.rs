use dbprior_core::exec::SampleMap;
use rayon::prelude::*;

use crate::error::{CliError, Result};

/// Environment variable capping the worker count.
pub const THREADS_VAR: &str = "GGCE_THREADS";

/// Runs per-sample work on a private rayon pool; results keep index order.
pub struct RayonMap {
    pool: rayon::ThreadPool,
}

impl RayonMap {
    pub fn new(threads: Option<usize>) -> Result<Self> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(n) = threads {
            b = b.num_threads(n);
        }
        let pool = b.build().map_err(|e| CliError::Config(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    /// Pool sized by `GGCE_THREADS`, or rayon's default when unset.
    pub fn from_env() -> Result<Self> {
        let threads = match std::env::var(THREADS_VAR) {
            Err(_) => None,
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => return Err(CliError::Config(format!("{THREADS_VAR}='{v}' is not a positive integer"))),
            },
        };
        Self::new(threads)
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl SampleMap for RayonMap {
    fn map<T: Send>(&self, count: usize, f: &(dyn Fn(usize) -> T + Sync)) -> Vec<T> {
        self.pool.install(|| (0..count).into_par_iter().map(f).collect())
    }
}
