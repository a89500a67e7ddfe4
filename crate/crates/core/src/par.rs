// Thin switch between rayon and sequential iteration so the library also
// builds for single-threaded targets.

#[cfg(feature = "parallel")]
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..count).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..count).map(f).collect()
}

/// Folds `items` into per-chunk accumulators and merges them. `merge` must be
/// associative and commutative for the result to be schedule independent.
#[cfg(feature = "parallel")]
pub(crate) fn fold_reduce<I, A, F, M, Z>(items: &[I], zero: Z, fold: F, merge: M) -> A
where
    I: Sync,
    A: Send,
    Z: Fn() -> A + Sync + Send,
    F: Fn(A, &I) -> A + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().fold(&zero, &fold).reduce(&zero, &merge)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn fold_reduce<I, A, F, M, Z>(items: &[I], zero: Z, fold: F, _merge: M) -> A
where
    Z: Fn() -> A,
    F: Fn(A, &I) -> A,
    M: Fn(A, A) -> A,
{
    items.iter().fold(zero(), fold)
}
