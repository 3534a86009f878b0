//! Ablation variants, each a single modification of the full training setup.

use labelcraft::objectives::{ScaleMode, DIVERSITY, EXPLICIT, WATCH};
use labelcraft::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    #[default]
    Full,
    /// Plain min-max scaling instead of the piecewise scale.
    NoScaling,
    /// Equal objective weights.
    NoBalancing,
    NoWatchInput,
    NoDurationInput,
    NoExplicitInput,
    /// Watch-time objective removed.
    NoWatchObjective,
    /// Duration-diversity objective removed.
    NoDiversityObjective,
    /// Explicit-feedback objective removed.
    NoExplicitObjective,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Full,
        Variant::NoScaling,
        Variant::NoBalancing,
        Variant::NoWatchInput,
        Variant::NoDurationInput,
        Variant::NoExplicitInput,
        Variant::NoWatchObjective,
        Variant::NoDiversityObjective,
        Variant::NoExplicitObjective,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoScaling => "w/o S",
            Variant::NoBalancing => "w/o B",
            Variant::NoWatchInput => "w/o WI",
            Variant::NoDurationInput => "w/o DI",
            Variant::NoExplicitInput => "w/o EI",
            Variant::NoWatchObjective => "w/o WO",
            Variant::NoDiversityObjective => "w/o DO",
            Variant::NoExplicitObjective => "w/o EO",
        }
    }

    /// File-system friendly name.
    pub fn slug(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoScaling => "wo-s",
            Variant::NoBalancing => "wo-b",
            Variant::NoWatchInput => "wo-wi",
            Variant::NoDurationInput => "wo-di",
            Variant::NoExplicitInput => "wo-ei",
            Variant::NoWatchObjective => "wo-wo",
            Variant::NoDiversityObjective => "wo-do",
            Variant::NoExplicitObjective => "wo-eo",
        }
    }

    /// Applies the modification to `cfg`.
    pub fn apply(self, cfg: &mut TrainConfig) {
        match self {
            Variant::Full => {}
            Variant::NoScaling => cfg.scale_mode = ScaleMode::MinMax,
            Variant::NoBalancing => cfg.objective.balancing = false,
            Variant::NoWatchInput => cfg.label_inputs.watch_time = false,
            Variant::NoDurationInput => cfg.label_inputs.duration = false,
            Variant::NoExplicitInput => cfg.label_inputs.explicit = false,
            Variant::NoWatchObjective => cfg.objective.include[WATCH] = false,
            Variant::NoDiversityObjective => cfg.objective.include[DIVERSITY] = false,
            Variant::NoExplicitObjective => cfg.objective.include[EXPLICIT] = false,
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = anyhow::Error;

    /// Accepts `w/o DO`, `wo-do`, `wo_do` or `do` in any case.
    fn from_str(s: &str) -> anyhow::Result<Self> {
        let t: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric() || *c == '/')
            .collect();
        let key = t.strip_prefix("w/o").or_else(|| t.strip_prefix("wo")).unwrap_or(&t);
        Variant::ALL
            .into_iter()
            .find(|v| v.slug().trim_start_matches("wo-") == key)
            .ok_or_else(|| {
                let names: Vec<&str> = Variant::ALL.iter().map(|v| v.slug()).collect();
                anyhow::anyhow!("unknown variant '{s}' (expected one of {})", names.join(", "))
            })
    }
}

impl Serialize for Variant {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Variant {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spellings_parse() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
            assert_eq!(v.slug().parse::<Variant>().unwrap(), v);
        }
        assert_eq!("WO_DO".parse::<Variant>().unwrap(), Variant::NoDiversityObjective);
        assert_eq!("eo".parse::<Variant>().unwrap(), Variant::NoExplicitObjective);
        assert!("w/o X".parse::<Variant>().is_err());
        assert!("".parse::<Variant>().is_err());
    }

    #[test]
    fn objective_letters_map_by_meaning() {
        let mut c = TrainConfig::default();
        Variant::NoDiversityObjective.apply(&mut c);
        assert_eq!(c.objective.include, [true, true, false]);
        let mut c = TrainConfig::default();
        Variant::NoExplicitObjective.apply(&mut c);
        assert_eq!(c.objective.include, [true, false, true]);
        let mut c = TrainConfig::default();
        Variant::NoWatchObjective.apply(&mut c);
        assert_eq!(c.objective.include, [false, true, true]);
    }

    #[test]
    fn each_variant_changes_one_thing() {
        let base = TrainConfig::default();
        for v in Variant::ALL {
            let mut c = base.clone();
            v.apply(&mut c);
            assert_eq!(c == base, v == Variant::Full, "{v}");
        }
    }
}
