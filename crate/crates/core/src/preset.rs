//! Built-in incumbent: the Johns Hopkins Fall Risk Assessment Tool.

use crate::scorecard::{Crossing, Scorecard};

/// Risk-factor rows and published point values, in scorecard order.
pub const JHFRAT_ITEMS: [(&str, f64); 18] = [
    ("Age 60-69 years", 1.0),
    ("Age 70-79 years", 2.0),
    ("Age >= 80 years", 3.0),
    ("Incontinence", 2.0),
    ("Urgency/frequency", 2.0),
    ("Altered awareness", 1.0),
    ("Impulsive", 2.0),
    ("Lack of understanding", 4.0),
    ("One equipment present", 1.0),
    ("Two equipment present", 2.0),
    ("Three or more equipment present", 3.0),
    ("Fall within 6 months", 5.0),
    ("One high fall risk drug", 3.0),
    ("Two or more high fall risk drugs", 5.0),
    ("Sedation procedure", 7.0),
    ("Requires assistance", 2.0),
    ("Unsteady gait", 2.0),
    ("Visual/auditory impairment", 2.0),
];

/// Low `< 6 <=` Moderate `< 14 <=` High under the `>=` crossing convention.
pub const JHFRAT_THRESHOLDS: [f64; 2] = [6.0, 14.0];

/// Upper bound placed on every optimized coefficient (the High band's lower edge, 13).
pub const JHFRAT_COEFFICIENT_CAP: f64 = 13.0;

/// Hierarchical items: age bands, care equipment counts, medication levels.
pub const JHFRAT_MONOTONE_PAIRS: [(usize, usize); 6] = [(0, 1), (1, 2), (8, 9), (9, 10), (12, 13), (13, 14)];

#[derive(Debug, Clone)]
pub struct Preset {
    pub feature_names: Vec<String>,
    pub scorecard: Scorecard,
    pub monotone_pairs: Vec<(usize, usize)>,
}

pub fn jhfrat() -> Preset {
    Preset {
        feature_names: JHFRAT_ITEMS.iter().map(|(n, _)| n.to_string()).collect(),
        scorecard: Scorecard {
            beta: JHFRAT_ITEMS.iter().map(|(_, w)| *w).collect(),
            tau: JHFRAT_THRESHOLDS.to_vec(),
            crossing: Crossing::AtOrAbove,
        },
        monotone_pairs: JHFRAT_MONOTONE_PAIRS.to_vec(),
    }
}

pub fn feature_index(name: &str) -> Option<usize> {
    JHFRAT_ITEMS.iter().position(|(n, _)| *n == name)
}
