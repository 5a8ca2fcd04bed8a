//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the plain entry points dispatch to
//! rayon; without it they run sequentially. The explicit `*_seq` / `*_par`
//! variants exist so benches can compare both paths in one binary.

/// Map `f` over `items`, preserving order.
pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        map_par(items, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_seq(items, f)
    }
}

pub fn map_seq<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

#[cfg(feature = "parallel")]
pub fn map_par<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Fill `out[i] = f(i)` for every index.
pub fn fill<R, F>(out: &mut [R], f: F)
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        fill_par(out, f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        fill_seq(out, f)
    }
}

pub fn fill_seq<R, F>(out: &mut [R], f: F)
where
    F: Fn(usize) -> R,
{
    for (i, o) in out.iter_mut().enumerate() {
        *o = f(i);
    }
}

#[cfg(feature = "parallel")]
pub fn fill_par<R, F>(out: &mut [R], f: F)
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    use rayon::prelude::*;
    // Rows are cheap; chunking keeps scheduling overhead below the work.
    out.par_chunks_mut(1024).enumerate().for_each(|(c, chunk)| {
        let base = c * 1024;
        for (k, o) in chunk.iter_mut().enumerate() {
            *o = f(base + k);
        }
    });
}

/// Configure the global worker pool. A no-op without the `parallel` feature.
pub fn set_jobs(jobs: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_preserves_order() {
        let xs: Vec<u32> = (0..5000).collect();
        let ys = map(&xs, |x| x * 2);
        assert_eq!(ys, map_seq(&xs, |x| x * 2));
        assert_eq!(ys[4999], 9998);
    }

    #[test]
    fn fill_matches_sequential() {
        let mut a = vec![0usize; 3000];
        let mut b = vec![0usize; 3000];
        fill(&mut a, |i| i * i);
        fill_seq(&mut b, |i| i * i);
        assert_eq!(a, b);
    }
}
