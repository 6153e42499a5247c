#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod canon;
pub mod ctmc;
pub mod gluing;
pub mod graph;
pub mod greg;
pub mod matching;
pub mod morphism;
pub mod odeint;
pub mod rewrite;
