//! Driver for the spectra-mi pipeline: configuration, stage commands and
//! thread-pool setup shared by the `spectra-mi` binary and its tests.

pub mod commands;
pub mod config;

pub use commands::{cmd_all, cmd_eval, cmd_report, cmd_spectrogram, cmd_synth, cmd_train, Layout};
pub use config::RunConfig;

/// Environment variable capping worker threads; 0 or unset means one per core.
pub const THREADS_ENV: &str = "SPECTRA_MI_THREADS";

/// Parses a `SPECTRA_MI_THREADS` value. `None` means automatic.
pub fn parse_thread_cap(value: Option<&str>) -> anyhow::Result<Option<usize>> {
    match value.map(str::trim) {
        None | Some("") => Ok(None),
        Some(v) => match v.parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => anyhow::bail!("{THREADS_ENV} must be a non-negative integer, got {v:?}"),
        },
    }
}

/// Sizes the global worker pool from `SPECTRA_MI_THREADS`. Returns the
/// number of threads in use.
pub fn init_thread_pool() -> anyhow::Result<usize> {
    let cap = parse_thread_cap(std::env::var(THREADS_ENV).ok().as_deref())?;
    #[cfg(feature = "parallel")]
    {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = cap {
            builder = builder.num_threads(n);
        }
        // A pool may already exist when called twice in one process.
        let _ = builder.build_global();
        Ok(rayon::current_num_threads())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = cap;
        Ok(1)
    }
}
