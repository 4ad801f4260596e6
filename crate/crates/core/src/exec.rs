//! Execution policy for data-parallel inner loops.
//!
//! Every hot loop in the crate ranges over independent lines or modes and is
//! dispatched through [`Exec`]. `Exec::Seq` runs in the calling thread;
//! `Exec::Par` (with the default `parallel` feature) fans out over rayon.
//! Results are bitwise identical either way: no floating-point reduction
//! order depends on the policy.

/// How to run data-parallel loops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exec {
    /// Single-threaded.
    Seq,
    /// Rayon thread pool.
    #[cfg(feature = "parallel")]
    Par,
}

impl Default for Exec {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            Exec::Par
        }
        #[cfg(not(feature = "parallel"))]
        {
            Exec::Seq
        }
    }
}

impl Exec {
    /// Policy for a requested worker count (1 = sequential).
    pub fn with_threads(threads: usize) -> Exec {
        #[cfg(feature = "parallel")]
        {
            if threads == 1 {
                Exec::Seq
            } else {
                Exec::Par
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = threads;
            Exec::Seq
        }
    }
}

/// Run `f` for every chunk index in `0..n_chunks`.
///
/// `f` must be safe to call concurrently for distinct indices.
pub fn for_each_chunk<F>(exec: Exec, n_chunks: usize, f: F)
where
    F: Fn(usize) + Sync + Send,
{
    match exec {
        Exec::Seq => {
            for i in 0..n_chunks {
                f(i);
            }
        }
        #[cfg(feature = "parallel")]
        Exec::Par => {
            use rayon::prelude::*;
            (0..n_chunks).into_par_iter().for_each(f);
        }
    }
}

/// Apply `f` to disjoint mutable chunks of `data`, each of length `chunk`
/// (the last may be shorter). Chunk index is passed alongside.
pub fn for_each_slice_chunk<T, F>(exec: Exec, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    match exec {
        Exec::Seq => {
            for (i, c) in data.chunks_mut(chunk).enumerate() {
                f(i, c);
            }
        }
        #[cfg(feature = "parallel")]
        Exec::Par => {
            use rayon::prelude::*;
            data.par_chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
        }
    }
}
