//! Processes connected by channels, and the scheduler that interleaves
//! them.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::channel::{Channel, Pop};
use super::SimError;
use crate::eval::Value;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Counters {
    pub global_reads: u64,
    pub global_writes: u64,
    pub channel_pushes: u64,
    pub channel_pops: u64,
    pub stall_cycles: u64,
}

impl Counters {
    pub fn add(&mut self, o: &Counters) {
        self.global_reads += o.global_reads;
        self.global_writes += o.global_writes;
        self.channel_pushes += o.channel_pushes;
        self.channel_pops += o.channel_pops;
        self.stall_cycles += o.stall_cycles;
    }
}

/// Device global memory. Writes of a launch land in the back buffer and
/// become visible when the launch ends; a read ordered after a writer of
/// the same launch sees the back buffer.
#[derive(Debug, Clone, Default)]
pub struct Memory {
    arrays: BTreeMap<String, (Vec<Value>, Vec<Value>)>,
}

impl Memory {
    pub fn insert(&mut self, name: &str, data: Vec<Value>) {
        self.arrays.insert(name.to_string(), (data.clone(), data));
    }

    pub fn front(&self, name: &str) -> Option<&[Value]> {
        self.arrays.get(name).map(|a| a.0.as_slice())
    }

    pub fn front_mut(&mut self, name: &str) -> Option<&mut [Value]> {
        self.arrays.get_mut(name).map(|a| a.0.as_mut_slice())
    }

    pub fn back(&self, name: &str) -> Option<&[Value]> {
        self.arrays.get(name).map(|a| a.1.as_slice())
    }

    pub fn back_mut(&mut self, name: &str) -> Option<&mut [Value]> {
        self.arrays.get_mut(name).map(|a| a.1.as_mut_slice())
    }

    pub fn begin(&mut self, name: &str) {
        if let Some((f, b)) = self.arrays.get_mut(name) {
            b.clone_from(f);
        }
    }

    pub fn commit(&mut self, name: &str) {
        if let Some((f, b)) = self.arrays.get_mut(name) {
            std::mem::swap(f, b);
        }
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.arrays.keys()
    }

    pub fn into_fronts(self) -> BTreeMap<String, Vec<Value>> {
        self.arrays.into_iter().map(|(k, (f, _))| (k, f)).collect()
    }
}

/// What a process sees of the world during one step.
pub struct Ctx<'a> {
    pub channels: &'a mut [Channel],
    pub mem: &'a mut Memory,
    /// Per kernel, the next position it will write; positions below it
    /// are final.
    pub progress: &'a mut BTreeMap<String, usize>,
}

impl Ctx<'_> {
    pub fn push(&mut self, ch: usize, v: Value, c: &mut Counters) -> Result<bool, SimError> {
        let ok = self.channels[ch].push(v)?;
        if ok {
            c.channel_pushes += 1;
        }
        Ok(ok)
    }

    pub fn pop(&mut self, ch: usize, c: &mut Counters) -> Pop {
        let p = self.channels[ch].pop();
        if let Pop::Value(_) = p {
            c.channel_pops += 1;
        }
        p
    }

    pub fn close(&mut self, ch: usize) {
        self.channels[ch].close();
    }

    pub fn channel_name(&self, ch: usize) -> String {
        self.channels[ch].name.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Progress,
    Blocked,
    Done,
}

pub trait Process {
    fn name(&self) -> &str;
    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError>;
    fn counters(&self) -> &Counters;
    fn counters_mut(&mut self) -> &mut Counters;

    /// A value handed back to the host when the process is done.
    fn result(&self) -> Option<Value> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Schedule {
    RoundRobin,
    Random(u64),
}

impl Schedule {
    /// `rr` or `random:<seed>`.
    pub fn parse(s: &str) -> Option<Schedule> {
        if s == "rr" {
            return Some(Schedule::RoundRobin);
        }
        s.strip_prefix("random:")?.parse().ok().map(Schedule::Random)
    }
}

impl std::fmt::Display for Schedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Schedule::RoundRobin => f.write_str("rr"),
            Schedule::Random(s) => write!(f, "random:{s}"),
        }
    }
}

pub struct Scheduler {
    rng: Option<ChaCha8Rng>,
    next: usize,
    /// Process steps taken so far, across launches.
    pub steps: u64,
    pub max_steps: u64,
}

impl Scheduler {
    pub fn new(schedule: Schedule, max_steps: u64) -> Scheduler {
        let rng = match schedule {
            Schedule::RoundRobin => None,
            Schedule::Random(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Scheduler { rng, next: 0, steps: 0, max_steps }
    }

    /// Steps processes until all are done. A full sweep in which every
    /// live process is blocked, with nothing moving in between, is a
    /// deadlock.
    pub fn run(&mut self, procs: &mut [Box<dyn Process + '_>], ctx: &mut Ctx) -> Result<(), SimError> {
        let n = procs.len();
        let mut done = vec![false; n];
        let mut alive = n;
        let mut stuck = vec![false; n];
        let mut nstuck = 0;
        self.next = 0;
        while alive > 0 {
            let i = match &mut self.rng {
                Some(rng) => {
                    let k = rng.gen_range(0..alive);
                    (0..n).filter(|&i| !done[i]).nth(k).expect("live process")
                }
                None => {
                    while done[self.next % n] {
                        self.next += 1;
                    }
                    let i = self.next % n;
                    self.next += 1;
                    i
                }
            };
            self.steps += 1;
            if self.steps > self.max_steps {
                return Err(SimError::StepLimit(self.max_steps));
            }
            match procs[i].step(ctx)? {
                Status::Blocked => {
                    procs[i].counters_mut().stall_cycles += 1;
                    if !stuck[i] {
                        stuck[i] = true;
                        nstuck += 1;
                    }
                    if nstuck == alive {
                        let blocked = (0..n).filter(|&j| !done[j]).map(|j| procs[j].name().to_string()).collect();
                        return Err(SimError::Deadlock { blocked });
                    }
                }
                s => {
                    if s == Status::Done {
                        done[i] = true;
                        alive -= 1;
                    }
                    if nstuck > 0 {
                        stuck.iter_mut().for_each(|x| *x = false);
                        nstuck = 0;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Pushes a list of values into a channel, then closes it.
pub struct Feeder {
    pub name: String,
    pub values: Vec<Value>,
    pub channel: usize,
    pub at: usize,
    pub counters: Counters,
}

impl Feeder {
    pub fn new(name: &str, values: Vec<Value>, channel: usize) -> Feeder {
        Feeder { name: name.to_string(), values, channel, at: 0, counters: Counters::default() }
    }
}

impl Process for Feeder {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError> {
        if self.at == self.values.len() {
            ctx.close(self.channel);
            return Ok(Status::Done);
        }
        if ctx.push(self.channel, self.values[self.at], &mut self.counters)? {
            self.at += 1;
            Ok(Status::Progress)
        } else {
            Ok(Status::Blocked)
        }
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn counters_mut(&mut self) -> &mut Counters {
        &mut self.counters
    }
}

/// Pops up to `limit` values (or until the stream ends) and keeps them.
pub struct Drain {
    pub name: String,
    pub channel: usize,
    pub limit: Option<usize>,
    pub got: Vec<Value>,
    pub counters: Counters,
}

impl Drain {
    pub fn new(name: &str, channel: usize, limit: Option<usize>) -> Drain {
        Drain { name: name.to_string(), channel, limit, got: Vec::new(), counters: Counters::default() }
    }
}

impl Process for Drain {
    fn name(&self) -> &str {
        &self.name
    }

    fn step(&mut self, ctx: &mut Ctx) -> Result<Status, SimError> {
        if self.limit.is_some_and(|l| self.got.len() >= l) {
            return Ok(Status::Done);
        }
        match ctx.pop(self.channel, &mut self.counters) {
            Pop::Value(v) => {
                self.got.push(v);
                Ok(Status::Progress)
            }
            Pop::Empty => Ok(Status::Blocked),
            Pop::EndOfStream => Ok(Status::Done),
        }
    }

    fn counters(&self) -> &Counters {
        &self.counters
    }

    fn counters_mut(&mut self) -> &mut Counters {
        &mut self.counters
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(cap: usize, limit: Option<usize>, schedule: Schedule) -> Result<(), SimError> {
        let mut chans = vec![Channel::new("c", cap)];
        let mut mem = Memory::default();
        let mut progress = BTreeMap::new();
        let mut ctx = Ctx { channels: &mut chans, mem: &mut mem, progress: &mut progress };
        let vals: Vec<Value> = (0..10).map(Value::Int).collect();
        let mut procs: Vec<Box<dyn Process>> =
            vec![Box::new(Feeder::new("producer", vals, 0)), Box::new(Drain::new("consumer", 0, limit))];
        Scheduler::new(schedule, 10_000).run(&mut procs, &mut ctx)
    }

    #[test]
    fn feeder_and_drain_finish() {
        for s in [Schedule::RoundRobin, Schedule::Random(3)] {
            assert!(run(1, None, s).is_ok());
        }
    }

    #[test]
    fn consumer_that_never_reads_deadlocks_the_producer() {
        let err = run(1, Some(0), Schedule::RoundRobin).unwrap_err();
        assert_eq!(err, SimError::Deadlock { blocked: vec!["producer".into()] });
    }

    #[test]
    fn schedule_parse() {
        assert_eq!(Schedule::parse("rr"), Some(Schedule::RoundRobin));
        assert_eq!(Schedule::parse("random:42"), Some(Schedule::Random(42)));
        assert_eq!(Schedule::parse("random:x"), None);
        assert_eq!(Schedule::Random(7).to_string(), "random:7");
    }
}
