use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{CapBound, CapReference, MipConfig, PerformanceCap};
use crate::dataset::Dataset;
use crate::error::{config, Error, Result};
use crate::loss::LossParams;
use crate::preset::{JHFRAT_COEFFICIENT_CAP, JHFRAT_THRESHOLDS};
use crate::scorecard::Scorecard;

/// Named optimization variants for the three-category fall-risk setting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Symmetric,
    Asymmetric,
    FpCap,
    FnfpCap,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Symmetric, Variant::Asymmetric, Variant::FpCap, Variant::FnfpCap];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Symmetric => "symmetric",
            Variant::Asymmetric => "asymmetric",
            Variant::FpCap => "fp_cap",
            Variant::FnfpCap => "fnfp_cap",
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}")))
    }
}

/// Integer weights in `[0, 13]`, the standard thresholds held fixed, the
/// dataset's monotone pairs, and the variant's loss and caps.
///
/// The capped variants keep the incumbent's count of over-triaged low-risk
/// patients (`fp_cap`), or of under-triaged high-risk patients together with
/// absolute over-triage rates of 30% (low to moderate) and 5% (low to high)
/// (`fnfp_cap`). Both need the incumbent scorecard.
pub fn variant_preset(variant: Variant, incumbent: Option<&Scorecard>, d: &Dataset) -> Result<MipConfig> {
    if d.num_categories != 3 {
        return config("the variant presets are defined for three categories");
    }
    let loss = match variant {
        Variant::Symmetric => LossParams::symmetric(),
        _ => LossParams::new(3.0, 1.0, 1.0)?,
    };
    let mut cfg = MipConfig::new(d.dim(), 0.0, JHFRAT_COEFFICIENT_CAP, JHFRAT_THRESHOLDS.to_vec(), loss);
    cfg.monotone_pairs = d.monotone_pairs.clone();
    let relative = |truth, predicted| -> Result<PerformanceCap> {
        let Some(card) = incumbent else {
            return config(format!("variant {} needs an incumbent scorecard", variant.name()));
        };
        Ok(PerformanceCap {
            truth,
            predicted,
            bound: CapBound::MaxCount(0.0),
            reference: CapReference::Incumbent(card.clone()),
        })
    };
    let absolute = |predicted, rate| PerformanceCap {
        truth: 1,
        predicted,
        bound: CapBound::MaxRate(rate),
        reference: CapReference::Absolute,
    };
    match variant {
        Variant::Symmetric | Variant::Asymmetric => {}
        Variant::FpCap => {
            cfg.caps = vec![relative(1, 2)?, relative(1, 3)?];
        }
        Variant::FnfpCap => {
            cfg.caps = vec![relative(3, 1)?, relative(3, 2)?, absolute(2, 0.30), absolute(3, 0.05)];
        }
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Instance;

    fn data() -> Dataset {
        Dataset::unnamed(vec![Instance::labeled(vec![1.0, 0.0], 1), Instance::labeled(vec![1.0, 1.0], 3)], 2, 3)
            .unwrap()
    }

    #[test]
    fn variants() {
        let d = data();
        let inc = Scorecard::new(vec![2.0, 5.0], vec![6.0, 14.0]).unwrap();
        let sym = variant_preset(Variant::Symmetric, None, &d).unwrap();
        assert_eq!(sym.loss, LossParams::symmetric());
        assert_eq!(sym.upper, vec![13.0, 13.0]);
        let asym = variant_preset(Variant::Asymmetric, None, &d).unwrap();
        assert_eq!((asym.loss.alpha_under, asym.loss.alpha_over), (3.0, 1.0));
        assert!(variant_preset(Variant::FpCap, None, &d).is_err());
        let fp = variant_preset(Variant::FpCap, Some(&inc), &d).unwrap();
        assert_eq!(fp.caps.len(), 2);
        let fnfp = variant_preset(Variant::FnfpCap, Some(&inc), &d).unwrap();
        let rates: Vec<_> = fnfp.caps.iter().map(|c| (c.truth, c.predicted, c.bound)).collect();
        assert!(rates.contains(&(1, 2, CapBound::MaxRate(0.30))));
        assert!(rates.contains(&(1, 3, CapBound::MaxRate(0.05))));
        assert_eq!("fnfp_cap".parse::<Variant>().unwrap(), Variant::FnfpCap);
        assert!("nope".parse::<Variant>().is_err());
    }
}
