use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    generate_reference, plant_clusters, DirectionMode, LabeledDataset, ReferenceProfile,
    SynthConfig,
};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynFamily {
    Syn1,
    Syn2,
    Syn3,
    Syn4,
    Syn5,
}

impl SynFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            SynFamily::Syn1 => "syn1",
            SynFamily::Syn2 => "syn2",
            SynFamily::Syn3 => "syn3",
            SynFamily::Syn4 => "syn4",
            SynFamily::Syn5 => "syn5",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Widespread,
    Localized,
    Noise,
    Subtle,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Widespread => "widespread",
            Variant::Localized => "localized",
            Variant::Noise => "noise",
            Variant::Subtle => "subtle",
        }
    }

    /// `(sigma, alpha, vars_per_cluster, overlap_count)`
    fn params(self) -> (f64, f64, usize, usize) {
        match self {
            Variant::Widespread => (0.05, 0.3, 21, 6),
            Variant::Localized => (0.05, 0.3, 6, 0),
            Variant::Noise => (0.2, 0.3, 21, 6),
            Variant::Subtle => (0.05, 0.2, 21, 6),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeMode {
    Equal,
    Unequal,
}

/// A named dataset recipe: `syn1`, `syn2`, or `syn{3,4,5}-<variant>-k<K>-<equal|unequal>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Preset {
    pub family: SynFamily,
    pub variant: Option<Variant>,
    pub k: usize,
    pub sizes: SizeMode,
}

impl Preset {
    pub fn syn1() -> Self {
        Preset {
            family: SynFamily::Syn1,
            variant: None,
            k: 3,
            sizes: SizeMode::Equal,
        }
    }

    pub fn syn2() -> Self {
        Preset {
            family: SynFamily::Syn2,
            ..Preset::syn1()
        }
    }

    pub fn patterned(
        family: SynFamily,
        variant: Variant,
        k: usize,
        sizes: SizeMode,
    ) -> Result<Self> {
        if matches!(family, SynFamily::Syn1 | SynFamily::Syn2) {
            return Err(Error::Config(format!(
                "{} has no variants",
                family.as_str()
            )));
        }
        if !(2..=6).contains(&k) {
            return Err(Error::Config(format!("K must be in 2..=6, got {k}")));
        }
        Ok(Preset {
            family,
            variant: Some(variant),
            k,
            sizes,
        })
    }

    /// Variant column used in reports, e.g. `widespread-equal` (`base` for syn1/syn2).
    pub fn variant_label(&self) -> String {
        match self.variant {
            Some(v) => format!(
                "{}-{}",
                v.as_str(),
                match self.sizes {
                    SizeMode::Equal => "equal",
                    SizeMode::Unequal => "unequal",
                }
            ),
            None => "base".into(),
        }
    }

    pub fn config(&self, seed: u64) -> SynthConfig {
        match self.variant {
            None => {
                let (n_controls, n_patients, n_variables) = match self.family {
                    SynFamily::Syn1 => (600, 600, 145),
                    _ => (600, 900, 100),
                };
                SynthConfig {
                    n_controls,
                    n_patients,
                    n_variables,
                    n_clusters: 3,
                    cluster_sizes: vec![n_patients / 3; 3],
                    direction_mode: DirectionMode::Decrease,
                    // 0.2 * Normal(1, 0.1) == 20% reduction +- Normal(0, 0.02)
                    sigma: 0.1,
                    alpha: 0.2,
                    vars_per_cluster: 25,
                    overlap_count: 0,
                    reference_profile: ReferenceProfile::UnitNormal,
                    seed,
                    fixed_severity: Some(1.0),
                }
            }
            Some(v) => {
                let (sigma, alpha, vars_per_cluster, overlap_count) = v.params();
                let n_patients = 600;
                let cluster_sizes = match self.sizes {
                    SizeMode::Equal => equal_sizes(n_patients, self.k),
                    SizeMode::Unequal => unequal_sizes(n_patients, self.k),
                };
                SynthConfig {
                    n_controls: 508,
                    n_patients,
                    n_variables: 150,
                    n_clusters: self.k,
                    cluster_sizes,
                    direction_mode: match self.family {
                        SynFamily::Syn3 => DirectionMode::Increase,
                        SynFamily::Syn4 => DirectionMode::Decrease,
                        _ => DirectionMode::Mixed,
                    },
                    sigma,
                    alpha,
                    vars_per_cluster,
                    overlap_count,
                    reference_profile: ReferenceProfile::SurrogateMorphometry,
                    seed,
                    fixed_severity: None,
                }
            }
        }
    }

    /// Every patterned preset (syn3-5 x 4 variants x K 2..=6 x equal/unequal) plus syn1, syn2.
    pub fn all() -> Vec<Preset> {
        let mut out = vec![Preset::syn1(), Preset::syn2()];
        for fam in [SynFamily::Syn3, SynFamily::Syn4, SynFamily::Syn5] {
            for v in [
                Variant::Widespread,
                Variant::Localized,
                Variant::Noise,
                Variant::Subtle,
            ] {
                for k in 2..=6 {
                    for s in [SizeMode::Equal, SizeMode::Unequal] {
                        out.push(Preset {
                            family: fam,
                            variant: Some(v),
                            k,
                            sizes: s,
                        });
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            None => f.write_str(self.family.as_str()),
            Some(v) => write!(
                f,
                "{}-{}-k{}-{}",
                self.family.as_str(),
                v.as_str(),
                self.k,
                match self.sizes {
                    SizeMode::Equal => "equal",
                    SizeMode::Unequal => "unequal",
                }
            ),
        }
    }
}

impl Serialize for Preset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Preset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let unknown = || Error::Config(format!("unknown preset `{s}`"));
        let parts: Vec<&str> = s.trim().split('-').collect();
        let family = match parts[0] {
            "syn1" => SynFamily::Syn1,
            "syn2" => SynFamily::Syn2,
            "syn3" => SynFamily::Syn3,
            "syn4" => SynFamily::Syn4,
            "syn5" => SynFamily::Syn5,
            _ => return Err(unknown()),
        };
        match (family, parts.len()) {
            (SynFamily::Syn1, 1) => Ok(Preset::syn1()),
            (SynFamily::Syn2, 1) => Ok(Preset::syn2()),
            (SynFamily::Syn1 | SynFamily::Syn2, _) => Err(unknown()),
            (_, 4) => {
                let variant = match parts[1] {
                    "widespread" => Variant::Widespread,
                    "localized" => Variant::Localized,
                    "noise" => Variant::Noise,
                    "subtle" => Variant::Subtle,
                    _ => return Err(unknown()),
                };
                let k = parts[2]
                    .strip_prefix('k')
                    .and_then(|k| k.parse().ok())
                    .ok_or_else(unknown)?;
                let sizes = match parts[3] {
                    "equal" => SizeMode::Equal,
                    "unequal" => SizeMode::Unequal,
                    _ => return Err(unknown()),
                };
                Preset::patterned(family, variant, k, sizes)
            }
            _ => Err(unknown()),
        }
    }
}

fn equal_sizes(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|c| n / k + usize::from(c < n % k)).collect()
}

/// Sizes in ratio `k : k-1 : ... : 1`, rounded by largest remainder.
pub fn unequal_sizes(n: usize, k: usize) -> Vec<usize> {
    let total: usize = (1..=k).sum();
    let weights: Vec<usize> = (1..=k).rev().collect();
    let mut sizes: Vec<usize> = weights.iter().map(|w| n * w / total).collect();
    let mut rema: Vec<(usize, usize)> = weights
        .iter()
        .enumerate()
        .map(|(c, w)| ((n * w) % total, c))
        .collect();
    rema.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let short = n - sizes.iter().sum::<usize>();
    for &(_, c) in rema.iter().take(short) {
        sizes[c] += 1;
    }
    sizes
}

/// Build a preset dataset. Controls and base patients come from independent
/// streams of the same reference profile.
pub fn make_preset(preset: &Preset, seed: u64) -> Result<LabeledDataset> {
    let cfg = preset.config(seed);
    let controls = generate_reference(
        &cfg.reference_profile,
        cfg.n_controls,
        cfg.n_variables,
        rng::derive(seed, "controls", 0),
    )?;
    let base = generate_reference(
        &cfg.reference_profile,
        cfg.n_patients,
        cfg.n_variables,
        rng::derive(seed, "patients", 0),
    )?;
    let mut ds = plant_clusters(&controls, &base, &cfg)?;
    ds.provenance.preset = preset.to_string();
    if preset.variant.is_none() {
        ds.provenance.note = Some(
            "approximation: disjoint 25-variable clusters with 20% +- N(0, 0.02) reductions".into(),
        );
    }
    Ok(ds)
}
