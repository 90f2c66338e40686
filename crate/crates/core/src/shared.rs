//! Parameter storage that tolerates unsynchronised concurrent writes.
//!
//! Every scalar is an `f32` stored as the bits of an `AtomicU32` and accessed
//! with relaxed ordering. Concurrent SGD workers can read and write the same
//! rows without locks; a read-modify-write by two threads may lose one of the
//! updates, which is the usual Hogwild trade-off. On common targets a relaxed
//! load/store compiles to a plain move, so the single-threaded cost is nil.

use std::sync::atomic::{AtomicU32, Ordering};

pub struct SharedF32s(Box<[AtomicU32]>);

impl SharedF32s {
    pub fn filled(len: usize, value: f32) -> Self {
        (0..len).map(|_| value).collect()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> f32 {
        f32::from_bits(self.0[idx].load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, idx: usize, value: f32) {
        self.0[idx].store(value.to_bits(), Ordering::Relaxed);
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn to_vec(&self) -> Vec<f32> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    /// Returns a copy with `extra` appended.
    pub fn extended(&self, extra: impl IntoIterator<Item = f32>) -> Self {
        (0..self.len()).map(|i| self.get(i)).chain(extra).collect()
    }

    pub fn bits_eq(&self, other: &SharedF32s) -> bool {
        self.len() == other.len()
            && (0..self.len()).all(|i| self.get(i).to_bits() == other.get(i).to_bits())
    }
}

impl FromIterator<f32> for SharedF32s {
    fn from_iter<T: IntoIterator<Item = f32>>(iter: T) -> Self {
        SharedF32s(iter.into_iter().map(|v| AtomicU32::new(v.to_bits())).collect())
    }
}

impl From<Vec<f32>> for SharedF32s {
    fn from(values: Vec<f32>) -> Self {
        values.into_iter().collect()
    }
}

impl Clone for SharedF32s {
    fn clone(&self) -> Self {
        self.to_vec().into()
    }
}

impl std::fmt::Debug for SharedF32s {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.to_vec()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extended_keeps_prefix_bits() {
        let a: SharedF32s = vec![1.5, -0.0, f32::MIN_POSITIVE].into();
        let b = a.extended([7.0]);
        assert_eq!(b.len(), 4);
        for i in 0..3 {
            assert_eq!(a.get(i).to_bits(), b.get(i).to_bits());
        }
        assert_eq!(b.get(3), 7.0);
    }

    #[test]
    fn concurrent_writes_do_not_tear() {
        let v = SharedF32s::filled(16, 0.0);
        std::thread::scope(|s| {
            for t in 0..4 {
                let v = &v;
                s.spawn(move || {
                    for _ in 0..1000 {
                        for i in 0..16 {
                            v.set(i, t as f32);
                        }
                    }
                });
            }
        });
        for i in 0..16 {
            assert!((0..4).any(|t| v.get(i) == t as f32));
        }
    }
}
