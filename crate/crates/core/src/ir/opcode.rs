//! The LLVM 16 opcode vocabulary.
//!
//! Order follows `llvm/IR/Instruction.def` (terminators, unary, binary,
//! logical, memory, casts, funclet pads, other), which fixes the one-hot slot
//! of every opcode in instruction feature vectors. `UserOp1`/`UserOp2` have no
//! textual form but keep their slots so the numbering matches LLVM's.

use serde::{Deserialize, Serialize};

macro_rules! opcodes {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum Opcode {
            $($variant,)*
            /// Catch-all for opcodes outside the vocabulary (lenient parsing only).
            Other,
        }

        impl Opcode {
            pub const ALL: &'static [Opcode] = &[$(Opcode::$variant,)* Opcode::Other];

            pub fn mnemonic(self) -> &'static str {
                match self {
                    $(Opcode::$variant => $text,)*
                    Opcode::Other => "other",
                }
            }

            /// Looks up a textual mnemonic. Pseudo opcodes without a textual
            /// form are never returned.
            pub fn from_mnemonic(s: &str) -> Option<Opcode> {
                let op = match s {
                    $($text => Some(Opcode::$variant),)*
                    _ => None,
                };
                op.filter(|o| !matches!(o, Opcode::UserOp1 | Opcode::UserOp2))
            }
        }
    };
}

opcodes! {
    Ret => "ret",
    Br => "br",
    Switch => "switch",
    IndirectBr => "indirectbr",
    Invoke => "invoke",
    Resume => "resume",
    Unreachable => "unreachable",
    CleanupRet => "cleanupret",
    CatchRet => "catchret",
    CatchSwitch => "catchswitch",
    CallBr => "callbr",
    FNeg => "fneg",
    Add => "add",
    FAdd => "fadd",
    Sub => "sub",
    FSub => "fsub",
    Mul => "mul",
    FMul => "fmul",
    UDiv => "udiv",
    SDiv => "sdiv",
    FDiv => "fdiv",
    URem => "urem",
    SRem => "srem",
    FRem => "frem",
    Shl => "shl",
    LShr => "lshr",
    AShr => "ashr",
    And => "and",
    Or => "or",
    Xor => "xor",
    Alloca => "alloca",
    Load => "load",
    Store => "store",
    GetElementPtr => "getelementptr",
    Fence => "fence",
    AtomicCmpXchg => "cmpxchg",
    AtomicRmw => "atomicrmw",
    Trunc => "trunc",
    ZExt => "zext",
    SExt => "sext",
    FPToUI => "fptoui",
    FPToSI => "fptosi",
    UIToFP => "uitofp",
    SIToFP => "sitofp",
    FPTrunc => "fptrunc",
    FPExt => "fpext",
    PtrToInt => "ptrtoint",
    IntToPtr => "inttoptr",
    BitCast => "bitcast",
    AddrSpaceCast => "addrspacecast",
    CleanupPad => "cleanuppad",
    CatchPad => "catchpad",
    ICmp => "icmp",
    FCmp => "fcmp",
    Phi => "phi",
    Call => "call",
    Select => "select",
    UserOp1 => "<userop1>",
    UserOp2 => "<userop2>",
    VAArg => "va_arg",
    ExtractElement => "extractelement",
    InsertElement => "insertelement",
    ShuffleVector => "shufflevector",
    ExtractValue => "extractvalue",
    InsertValue => "insertvalue",
    LandingPad => "landingpad",
    Freeze => "freeze",
}

impl Opcode {
    /// Slot of this opcode in the one-hot vocabulary.
    pub fn index(self) -> usize {
        Opcode::ALL.iter().position(|&o| o == self).unwrap()
    }

    pub fn is_terminator(self) -> bool {
        matches!(
            self,
            Opcode::Ret
                | Opcode::Br
                | Opcode::Switch
                | Opcode::IndirectBr
                | Opcode::Invoke
                | Opcode::Resume
                | Opcode::Unreachable
                | Opcode::CleanupRet
                | Opcode::CatchRet
                | Opcode::CatchSwitch
                | Opcode::CallBr
        )
    }

    pub fn is_binary(self) -> bool {
        let i = self.index();
        (Opcode::Add.index()..=Opcode::Xor.index()).contains(&i)
    }

    pub fn is_cast(self) -> bool {
        let i = self.index();
        (Opcode::Trunc.index()..=Opcode::AddrSpaceCast.index()).contains(&i)
    }

    /// Exception-handling instructions; recognized but reported as outside
    /// the supported subset.
    pub fn is_exception_handling(self) -> bool {
        matches!(
            self,
            Opcode::Invoke
                | Opcode::Resume
                | Opcode::LandingPad
                | Opcode::CleanupRet
                | Opcode::CatchRet
                | Opcode::CatchSwitch
                | Opcode::CleanupPad
                | Opcode::CatchPad
        )
    }
}

impl std::fmt::Display for Opcode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.mnemonic())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_has_67_opcodes_plus_other() {
        assert_eq!(Opcode::ALL.len(), 68);
        assert_eq!(Opcode::Ret.index(), 0);
        assert_eq!(Opcode::Freeze.index(), 66);
        assert_eq!(Opcode::Other.index(), 67);
    }

    #[test]
    fn mnemonics_round_trip() {
        for &op in Opcode::ALL {
            if matches!(op, Opcode::UserOp1 | Opcode::UserOp2 | Opcode::Other) {
                assert_eq!(Opcode::from_mnemonic(op.mnemonic()), None);
            } else {
                assert_eq!(Opcode::from_mnemonic(op.mnemonic()), Some(op));
            }
        }
        assert_eq!(Opcode::from_mnemonic("frob"), None);
    }

    #[test]
    fn terminator_classification() {
        let terms = Opcode::ALL.iter().filter(|o| o.is_terminator()).count();
        assert_eq!(terms, 11);
        assert!(Opcode::Add.is_binary() && Opcode::Xor.is_binary());
        assert!(!Opcode::FNeg.is_binary());
        assert!(Opcode::BitCast.is_cast());
    }
}
