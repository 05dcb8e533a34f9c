//! Bounded blocking FIFO channels.

use std::collections::VecDeque;

use super::SimError;
use crate::eval::Value;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pop {
    Value(Value),
    /// Nothing queued yet; the reader must wait.
    Empty,
    EndOfStream,
}

#[derive(Debug, Clone)]
pub struct Channel {
    pub name: String,
    pub capacity: usize,
    queue: VecDeque<Value>,
    pub closed: bool,
    pub pushes: u64,
    pub pops: u64,
}

impl Channel {
    pub fn new(name: impl Into<String>, capacity: usize) -> Channel {
        assert!(capacity >= 1, "channel capacity must be positive");
        Channel { name: name.into(), capacity, queue: VecDeque::new(), closed: false, pushes: 0, pops: 0 }
    }

    /// Ok(false) when full: the writer must wait.
    pub fn push(&mut self, v: Value) -> Result<bool, SimError> {
        if self.closed {
            return Err(SimError::WriteAfterClose { channel: self.name.clone() });
        }
        if self.queue.len() >= self.capacity {
            return Ok(false);
        }
        self.queue.push_back(v);
        self.pushes += 1;
        Ok(true)
    }

    pub fn pop(&mut self) -> Pop {
        match self.queue.pop_front() {
            Some(v) => {
                self.pops += 1;
                Pop::Value(v)
            }
            None if self.closed => Pop::EndOfStream,
            None => Pop::Empty,
        }
    }

    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifo_order() {
        let mut c = Channel::new("c", 4);
        for i in 1..=3 {
            assert!(c.push(Value::Int(i)).unwrap());
        }
        let got: Vec<Pop> = (0..3).map(|_| c.pop()).collect();
        assert_eq!(got, [1, 2, 3].map(|i| Pop::Value(Value::Int(i))));
    }

    #[test]
    fn empty_then_end_of_stream() {
        let mut c = Channel::new("c", 1);
        assert_eq!(c.pop(), Pop::Empty);
        c.close();
        assert_eq!(c.pop(), Pop::EndOfStream);
    }

    #[test]
    fn third_write_on_capacity_two_blocks() {
        let mut c = Channel::new("c", 2);
        assert!(c.push(Value::Int(1)).unwrap());
        assert!(c.push(Value::Int(2)).unwrap());
        assert!(!c.push(Value::Int(3)).unwrap());
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn write_after_close_is_an_error() {
        let mut c = Channel::new("c", 1);
        c.close();
        assert!(matches!(c.push(Value::Int(1)), Err(SimError::WriteAfterClose { .. })));
    }
}
