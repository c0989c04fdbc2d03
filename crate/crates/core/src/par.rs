//! Thin dispatch layer over rayon. With the `parallel` feature disabled every
//! helper degrades to the equivalent sequential iterator, preserving output order.

#[cfg(feature = "parallel")]
mod internal {
    use rayon::prelude::*;

    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        (0..n).into_par_iter().map(f).collect()
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Send + Sync,
    {
        items.par_iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

#[cfg(not(feature = "parallel"))]
mod internal {
    pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Send + Sync,
    {
        (0..n).map(f).collect()
    }

    pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
    where
        S: Sync,
        T: Send,
        F: Fn(&S) -> T + Send + Sync,
    {
        items.iter().map(f).collect()
    }

    pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Send + Sync,
    {
        data.chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
    }
}

pub use internal::*;

/// Whether the crate was built with the rayon backend.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_range_preserves_order() {
        let v = map_range(1000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn chunks_see_their_index() {
        let mut data = vec![0usize; 30];
        for_each_chunk_mut(&mut data, 7, |ci, c| c.iter_mut().for_each(|x| *x = ci));
        assert_eq!(data[0], 0);
        assert_eq!(data[7], 1);
        assert_eq!(data[29], 4);
    }
}
