use serde::{Deserialize, Serialize};

/// Tagged outcome of a membership search.
///
/// `CertifiedMember` carries a checkable witness of membership; `RefutedAtLevel`
/// carries a witness of non-membership found at a matrix level; `Undecided`
/// records the budget that ran out and says nothing about membership.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Certificate<C, W> {
    ExactMember,
    CertifiedMember(C),
    RefutedAtLevel { witness: W, level: usize },
    Undecided { budget: usize, residual: f64 },
}

impl<C, W> Certificate<C, W> {
    pub fn is_member(&self) -> bool {
        matches!(self, Self::ExactMember | Self::CertifiedMember(_))
    }

    pub fn is_refuted(&self) -> bool {
        matches!(self, Self::RefutedAtLevel { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::ExactMember => "exact",
            Self::CertifiedMember(_) => "member",
            Self::RefutedAtLevel { .. } => "refute",
            Self::Undecided { .. } => "undecided",
        }
    }
}
