//! Program format of the processor sequencer. The processor is modeled as a
//! script runner, one instruction per processor clock; execution lives in
//! the system kernel.

use serde::{Deserialize, Serialize};

use super::IrqCause;
use crate::arrays::LocalInstr;
use crate::noc::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqWord {
    Literal(u32),
    /// Next four mailbox bytes, little-endian. Waits until they arrive.
    Mailbox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op")]
pub enum SeqInstr {
    /// Writes the active bank unless `bank` is given.
    WriteReg {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bank: Option<u8>,
        addr: u32,
        value: u32,
    },
    ReadReg {
        addr: u32,
    },
    SendNoC {
        dst: NodeId,
        #[serde(default)]
        tag: u32,
        word: SeqWord,
    },
    /// Waits for a packet at the processor node and forwards its payload to
    /// the host over AXI.
    AwaitNoC,
    /// Starts a program on a compute array without waiting for it. Waits
    /// only if the array is still running a previous program.
    RunCA {
        ca: usize,
        program: Vec<LocalInstr>,
    },
    /// Waits for `irq_in` high.
    WaitIrq,
    RaiseIrqOut {
        cause: IrqCause,
    },
    Halt,
}

impl SeqInstr {
    pub fn name(&self) -> &'static str {
        match self {
            Self::WriteReg { .. } => "WriteReg",
            Self::ReadReg { .. } => "ReadReg",
            Self::SendNoC { .. } => "SendNoC",
            Self::AwaitNoC => "AwaitNoC",
            Self::RunCA { .. } => "RunCA",
            Self::WaitIrq => "WaitIrq",
            Self::RaiseIrqOut { .. } => "RaiseIrqOut",
            Self::Halt => "Halt",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeqTraceEntry {
    pub cycle: u64,
    pub pc: usize,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<u32>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_program() {
        let text = r#"[
            {"op": "WriteReg", "addr": 16, "value": 2},
            {"op": "WriteReg", "bank": 1, "addr": 16, "value": 4},
            {"op": "SendNoC", "dst": 2, "word": {"literal": 5}},
            {"op": "SendNoC", "dst": 3, "tag": 1, "word": "mailbox"},
            {"op": "AwaitNoC"},
            {"op": "RunCA", "ca": 0, "program": [{"op": "RecvNoC"}]},
            {"op": "RaiseIrqOut", "cause": "SoftError"},
            {"op": "Halt"}
        ]"#;
        let prog: Vec<SeqInstr> = serde_json::from_str(text).unwrap();
        assert_eq!(prog.len(), 8);
        assert_eq!(
            prog[3],
            SeqInstr::SendNoC {
                dst: 3,
                tag: 1,
                word: SeqWord::Mailbox
            }
        );
        let back: Vec<SeqInstr> =
            serde_json::from_str(&serde_json::to_string(&prog).unwrap()).unwrap();
        assert_eq!(back, prog);
    }
}
