use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disagreement {
    None,
    /// 1-based position of the input that lost the vote.
    OneDissenter(u8),
    Split,
}

/// Bitwise majority of three replicas.
pub fn tmr_vote(a: u64, b: u64, c: u64) -> (u64, Disagreement) {
    let value = (a & b) | (a & c) | (b & c);
    let verdict = match (a == value, b == value, c == value) {
        (true, true, true) => Disagreement::None,
        (false, true, true) => Disagreement::OneDissenter(1),
        (true, false, true) => Disagreement::OneDissenter(2),
        (true, true, false) => Disagreement::OneDissenter(3),
        _ => Disagreement::Split,
    };
    (value, verdict)
}
