use alloc::vec::Vec;

/// Strategy for evaluating independent work items `0..n`.
///
/// Results are returned in item order regardless of execution order, so a
/// parallel implementation produces byte-identical output to [`Serial`] as
/// long as each item is a pure function of its index.
pub trait Runner: Sync {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T>;
}

/// Evaluates items one after another on the calling thread.
pub struct Serial;

impl Runner for Serial {
    fn run<T: Send, F: Fn(usize) -> T + Sync>(&self, n: usize, f: F) -> Vec<T> {
        (0..n).map(f).collect()
    }
}
