//! Element-parallel loops. With the `parallel` feature the chunks are handed
//! to rayon, otherwise they run in order on the calling thread. Each chunk is
//! written by exactly one closure call, so results do not depend on
//! scheduling.

use crate::error::Result;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Calls `f(index, chunk)` for every `chunk_len`-sized chunk of `data`.
pub fn try_for_each_chunk<T, F>(data: &mut [T], chunk_len: usize, f: F) -> Result<()>
where
    T: Send,
    F: Fn(usize, &mut [T]) -> Result<()> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .try_for_each(|(e, c)| f(e, c))
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len).enumerate().try_for_each(|(e, c)| f(e, c))
    }
}

/// Infallible variant of [`try_for_each_chunk`].
pub fn for_each_chunk<T, F>(data: &mut [T], chunk_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(chunk_len).enumerate().for_each(|(e, c)| f(e, c));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(chunk_len).enumerate().for_each(|(e, c)| f(e, c));
    }
}

/// Runs `f` on a pool with `threads` workers (or the global pool when
/// `None`). Without the `parallel` feature this just calls `f`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    {
        match threads {
            Some(n) => rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("thread pool")
                .install(f),
            None => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}

/// Number of worker threads loops will use.
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunks_see_their_own_index() {
        let mut v = vec![0usize; 40];
        for_each_chunk(&mut v, 4, |e, c| c.iter_mut().for_each(|x| *x = e));
        for (k, x) in v.iter().enumerate() {
            assert_eq!(*x, k / 4);
        }
    }

    #[test]
    fn errors_propagate() {
        let mut v = vec![0u8; 12];
        let r = try_for_each_chunk(&mut v, 3, |e, _| {
            if e == 2 {
                Err(crate::Error::NonFiniteWaveSpeed)
            } else {
                Ok(())
            }
        });
        assert!(r.is_err());
    }

    #[test]
    fn explicit_pool_size() {
        let n = with_threads(Some(2), current_threads);
        if cfg!(feature = "parallel") {
            assert_eq!(n, 2);
        } else {
            assert_eq!(n, 1);
        }
    }
}
