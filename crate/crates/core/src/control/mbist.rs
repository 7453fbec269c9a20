//! March C- memory self-test over the byte-wide SRAM model.
//!
//! Elements: up(w0); up(r0,w1); up(r1,w0); down(r0,w1); down(r1,w0); any(r0),
//! with 0 = 0x00 and 1 = 0xFF per byte. The run stops at the first
//! miscompare.

use serde::{Deserialize, Serialize};

use crate::sram::Sram;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MbistResult {
    pub pass: bool,
    pub first_fault_addr: Option<usize>,
    pub addresses: usize,
}

const ZERO: u8 = 0x00;
const ONE: u8 = 0xFF;

pub fn mbist_run(mem: &mut Sram) -> MbistResult {
    let n = mem.len();
    let fail = |addr| MbistResult {
        pass: false,
        first_fault_addr: Some(addr),
        addresses: n,
    };
    for a in 0..n {
        mem.write(a, ZERO);
    }
    let elements: [(bool, u8, u8); 4] = [
        (true, ZERO, ONE),
        (true, ONE, ZERO),
        (false, ZERO, ONE),
        (false, ONE, ZERO),
    ];
    for (up, expect, write) in elements {
        let order: Box<dyn Iterator<Item = usize>> = if up {
            Box::new(0..n)
        } else {
            Box::new((0..n).rev())
        };
        for a in order {
            if mem.read(a) != Some(expect) {
                return fail(a);
            }
            mem.write(a, write);
        }
    }
    for a in 0..n {
        if mem.read(a) != Some(ZERO) {
            return fail(a);
        }
    }
    MbistResult {
        pass: true,
        first_fault_addr: None,
        addresses: n,
    }
}
