//! Closed attribute vocabulary for functions, arguments and globals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

macro_rules! closed_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),* $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant,)*
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)*];

            pub fn keyword(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)*
                }
            }

            pub fn from_keyword(s: &str) -> Option<$name> {
                match s {
                    $($text => Some($name::$variant),)*
                    _ => None,
                }
            }
        }
    };
}

closed_enum! {
    Linkage {
        Private => "private",
        Internal => "internal",
        AvailableExternally => "available_externally",
        LinkOnce => "linkonce",
        Weak => "weak",
        Common => "common",
        Appending => "appending",
        ExternWeak => "extern_weak",
        LinkOnceOdr => "linkonce_odr",
        WeakOdr => "weak_odr",
        External => "external",
    }
}

closed_enum! {
    Visibility {
        Default => "default",
        Hidden => "hidden",
        Protected => "protected",
    }
}

closed_enum! {
    /// Calling conventions with a dedicated vocabulary slot; everything else
    /// (numbered `cc N`, target-specific conventions) is `Other`.
    CallingConv {
        C => "ccc",
        Fast => "fastcc",
        Cold => "coldcc",
        Swift => "swiftcc",
        Other => "cc_other",
    }
}

closed_enum! {
    /// Attribute vocabulary. The last entry is the catch-all slot; any
    /// attribute token outside the vocabulary maps to it.
    AttrKind {
        Private => "private",
        Internal => "internal",
        AvailableExternally => "available_externally",
        LinkOnce => "linkonce",
        Weak => "weak",
        Common => "common",
        Appending => "appending",
        ExternWeak => "extern_weak",
        LinkOnceOdr => "linkonce_odr",
        WeakOdr => "weak_odr",
        External => "external",
        Default => "default",
        Hidden => "hidden",
        Protected => "protected",
        Ccc => "ccc",
        Fastcc => "fastcc",
        Coldcc => "coldcc",
        Swiftcc => "swiftcc",
        DsoLocal => "dso_local",
        NoInline => "noinline",
        AlwaysInline => "alwaysinline",
        OptNone => "optnone",
        NoUnwind => "nounwind",
        NoRecurse => "norecurse",
        WillReturn => "willreturn",
        NoSync => "nosync",
        NoFree => "nofree",
        MustProgress => "mustprogress",
        UwTable => "uwtable",
        NoReturn => "noreturn",
        Memory => "memory",
        NoUndef => "noundef",
        NonNull => "nonnull",
        NoAlias => "noalias",
        NoCapture => "nocapture",
        ReadOnly => "readonly",
        WriteOnly => "writeonly",
        ZeroExt => "zeroext",
        SignExt => "signext",
        Other => "other",
    }
}

impl AttrKind {
    pub fn index(self) -> usize {
        AttrKind::ALL.iter().position(|&a| a == self).unwrap()
    }

    /// Maps an attribute token to its vocabulary slot. Pre-16 memory
    /// attributes (`readnone`, `argmemonly`, ...) fold into `memory`; note
    /// that `readonly`/`writeonly` keep their own slots since they are also
    /// parameter attributes.
    pub fn classify(token: &str) -> AttrKind {
        if let Some(k) = AttrKind::from_keyword(token) {
            return k;
        }
        match token {
            "readnone" | "argmemonly" | "inaccessiblememonly" | "inaccessiblemem_or_argmemonly" => {
                AttrKind::Memory
            }
            _ => AttrKind::Other,
        }
    }
}

impl From<Linkage> for AttrKind {
    fn from(l: Linkage) -> Self {
        AttrKind::from_keyword(l.keyword()).unwrap()
    }
}

impl From<Visibility> for AttrKind {
    fn from(v: Visibility) -> Self {
        AttrKind::from_keyword(v.keyword()).unwrap()
    }
}

impl From<CallingConv> for AttrKind {
    fn from(c: CallingConv) -> Self {
        match c {
            CallingConv::C => AttrKind::Ccc,
            CallingConv::Fast => AttrKind::Fastcc,
            CallingConv::Cold => AttrKind::Coldcc,
            CallingConv::Swift => AttrKind::Swiftcc,
            CallingConv::Other => AttrKind::Other,
        }
    }
}

/// A set of vocabulary entries attached to a function, argument or global.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AttributeSet {
    pub entries: BTreeSet<AttrKind>,
}

impl AttributeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, kind: AttrKind) {
        self.entries.insert(kind);
    }

    pub fn insert_token(&mut self, token: &str) {
        self.entries.insert(AttrKind::classify(token));
    }

    pub fn extend(&mut self, other: &AttributeSet) {
        self.entries.extend(other.entries.iter().copied());
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, kind: AttrKind) -> bool {
        self.entries.contains(&kind)
    }
}

impl FromIterator<AttrKind> for AttributeSet {
    fn from_iter<T: IntoIterator<Item = AttrKind>>(iter: T) -> Self {
        AttributeSet {
            entries: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_forty_wide_and_ends_with_other() {
        assert_eq!(AttrKind::ALL.len(), 40);
        assert_eq!(*AttrKind::ALL.last().unwrap(), AttrKind::Other);
    }

    #[test]
    fn unknown_tokens_map_to_other() {
        assert_eq!(AttrKind::classify("nounwind"), AttrKind::NoUnwind);
        assert_eq!(AttrKind::classify("readnone"), AttrKind::Memory);
        assert_eq!(AttrKind::classify("sanitize_address"), AttrKind::Other);
        assert_eq!(AttrKind::classify("\"frame-pointer\""), AttrKind::Other);
    }

    #[test]
    fn linkage_maps_into_vocabulary() {
        for &l in Linkage::ALL {
            assert_eq!(AttrKind::from(l).keyword(), l.keyword());
        }
    }
}
