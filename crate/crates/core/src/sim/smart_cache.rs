//! Stencil window over a linear stream. The cache holds bufferLen
//! elements; tuple p goes out once element p + MPOff has arrived (or the
//! stream has ended), so every input is consumed exactly once.

use std::collections::VecDeque;

use crate::eval::Value;
use crate::pipeline::{BoundaryPolicy, SmartCacheSpec};

#[derive(Debug, Clone)]
pub struct SmartCacheState {
    pub spec: SmartCacheSpec,
    window: VecDeque<Value>,
    /// Stream index of window[0].
    base: usize,
    pub consumed: usize,
    pub emitted: usize,
    zero: Option<Value>,
}

/// What the cache wants to do next.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Want {
    Consume,
    Emit,
    Done,
}

impl SmartCacheState {
    pub fn new(spec: SmartCacheSpec) -> SmartCacheState {
        SmartCacheState { spec, window: VecDeque::new(), base: 0, consumed: 0, emitted: 0, zero: None }
    }

    pub fn want(&self) -> Want {
        let size = self.spec.size;
        if self.emitted >= size {
            return Want::Done;
        }
        let need = (self.emitted as i64 + self.spec.mp_off).min(size as i64 - 1) as usize;
        if self.consumed > need {
            Want::Emit
        } else {
            Want::Consume
        }
    }

    pub fn consume(&mut self, v: Value) {
        if self.zero.is_none() {
            self.zero = Some(Value::zero(v.base_type()));
        }
        self.window.push_back(v);
        self.consumed += 1;
        debug_assert!(self.window.len() <= self.spec.buffer_len);
    }

    /// Value for offset slot `j` of the current tuple.
    pub fn value(&self, j: usize) -> Value {
        let size = self.spec.size as i64;
        let mut q = self.emitted as i64 + self.spec.offsets[j];
        if q < 0 || q >= size {
            match self.spec.policy {
                BoundaryPolicy::Clamp => q = q.clamp(0, size - 1),
                BoundaryPolicy::Zero => return self.zero.expect("consumed something"),
            }
        }
        self.window[q as usize - self.base]
    }

    /// Marks the current tuple sent and drops what no later tuple needs.
    pub fn advance(&mut self) {
        self.emitted += 1;
        let keep_from = (self.emitted as i64 - self.spec.mn_off).max(0) as usize;
        // Clamping keeps the first element alive until no tuple can reach
        // below zero, which the bound above already guarantees.
        while self.base < keep_from && !self.window.is_empty() {
            self.window.pop_front();
            self.base += 1;
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }
}

/// Runs a cache over a whole input without channels; one tuple per
/// position, values in offset order.
pub fn smart_cache_run(spec: &SmartCacheSpec, input: &[Value]) -> Vec<Vec<Value>> {
    assert_eq!(input.len(), spec.size, "input length must equal Size");
    let mut st = SmartCacheState::new(spec.clone());
    let mut out = Vec::with_capacity(spec.size);
    let mut next = input.iter();
    loop {
        match st.want() {
            Want::Done => return out,
            Want::Consume => st.consume(*next.next().expect("input")),
            Want::Emit => {
                out.push((0..spec.offsets.len()).map(|j| st.value(j)).collect());
                st.advance();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ints(v: &[i32]) -> Vec<Value> {
        v.iter().map(|&i| Value::Int(i)).collect()
    }

    #[test]
    fn three_point_clamped() {
        let spec = SmartCacheSpec::new("x", 5, &[-1, 0, 1], BoundaryPolicy::Clamp);
        let got = smart_cache_run(&spec, &ints(&[1, 2, 3, 4, 5]));
        let want: Vec<Vec<Value>> =
            [[1, 1, 2], [1, 2, 3], [2, 3, 4], [3, 4, 5], [4, 5, 5]].iter().map(|t| ints(t)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn zero_offset_is_identity() {
        let spec = SmartCacheSpec::new("x", 4, &[0], BoundaryPolicy::Clamp);
        assert_eq!(spec.mp_off, 0);
        let got = smart_cache_run(&spec, &ints(&[7, 8, 9, 10]));
        assert_eq!(got, vec![ints(&[7]), ints(&[8]), ints(&[9]), ints(&[10])]);
    }

    #[test]
    fn zero_policy_fills_outside() {
        let spec = SmartCacheSpec::new("x", 3, &[-2, 2], BoundaryPolicy::Zero);
        let got = smart_cache_run(&spec, &ints(&[1, 2, 3]));
        assert_eq!(got, vec![ints(&[0, 3]), ints(&[0, 0]), ints(&[1, 0])]);
    }

    #[test]
    fn window_never_exceeds_buffer_len() {
        let spec = SmartCacheSpec::new("x", 50, &[-7, 3, 11], BoundaryPolicy::Clamp);
        let mut st = SmartCacheState::new(spec.clone());
        let mut i = 0;
        while st.want() != Want::Done {
            if st.want() == Want::Consume {
                st.consume(Value::Int(i));
                i += 1;
            } else {
                st.advance();
            }
            assert!(st.window_len() <= spec.buffer_len);
        }
        assert_eq!(st.emitted, 50);
        assert_eq!(st.consumed, 50);
    }
}
