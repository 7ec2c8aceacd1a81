//! JSON descriptions of indicator systems and their conversion into the
//! forms the `bounds` and `oracle` runners consume.

use std::fs;
use std::path::Path;

use serde::Deserialize;
use steinchen::bounds::{IndicatorSystem, MomentSource, MonotoneRelation};
use steinchen::oracle::JointTable;

use crate::CliError;

/// Widest joint table the loader will synthesise for a family described by
/// marginals alone (the table is dense, `2^n` entries).
const AUTO_JOINT_CAP: usize = 16;

/// Widest joint table whose independence is verified outcome by outcome.
const INDEPENDENCE_SCAN_CAP: usize = 20;

/// Number of indicators, given either as a count or as a list of labels.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Indices {
    Count(usize),
    Labels(Vec<String>),
}

/// On-disk system description.
///
/// `joint` lists `(bitmask, probability)` pairs (bit `a` = indicator `a`
/// fired); `moments` is the symmetric matrix `E[X_a X_b]` with marginals on
/// the diagonal. When neither is given the family is taken as independent.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SystemSpec {
    indices: Option<Indices>,
    marginals: Option<Vec<f64>>,
    neighbourhoods: Option<Vec<Vec<usize>>>,
    outer_neighbourhoods: Option<Vec<Vec<usize>>>,
    joint: Option<Vec<(u32, f64)>>,
    moments: Option<Vec<Vec<f64>>>,
    local_dependence: Option<bool>,
    monotone: Option<String>,
}

/// A parsed and validated system, ready for the runners.
#[derive(Debug)]
pub struct LoadedSystem {
    /// Built whenever the moment data fits in memory; absent only for a
    /// large family described by marginals alone.
    pub system: Option<IndicatorSystem>,
    pub marginals: Vec<f64>,
    /// Established independence: verified outcome by outcome from the
    /// joint law, or implied by asserted singleton neighbourhoods whose
    /// pair moments factorise.
    pub independent: bool,
    /// Monotone-coupling direction the description asserts, if any.
    pub monotone: Option<MonotoneRelation>,
    /// Declared (or defaulted singleton) neighbourhoods, for runners that
    /// work without a built system.
    pub hoods: Vec<Vec<usize>>,
    pub has_outer: bool,
    pub n: usize,
}

pub fn load_system(path: &Path) -> Result<LoadedSystem, CliError> {
    let text = fs::read_to_string(path).map_err(|e| {
        CliError::Config(format!("cannot read system file {}: {e}", path.display()))
    })?;
    let spec: SystemSpec = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!("system file {} is not valid: {e}", path.display()))
    })?;
    build(spec)
}

fn build(spec: SystemSpec) -> Result<LoadedSystem, CliError> {
    let declared_n = match &spec.indices {
        Some(Indices::Count(n)) => Some(*n),
        Some(Indices::Labels(l)) => Some(l.len()),
        None => None,
    };
    let n = declared_n
        .or(spec.marginals.as_ref().map(Vec::len))
        .ok_or_else(|| {
            CliError::Config("system needs `indices` or `marginals` to fix its size".into())
        })?;
    if n == 0 {
        return Err(CliError::Config("system must have at least one indicator".into()));
    }
    if let Some(m) = &spec.marginals {
        if m.len() != n {
            return Err(CliError::Config(format!(
                "system declares {n} indicators but {} marginals",
                m.len()
            )));
        }
    }
    let monotone = match spec.monotone.as_deref() {
        None => None,
        Some("negative") => Some(MonotoneRelation::Negative),
        Some("positive") => Some(MonotoneRelation::Positive),
        Some(other) => {
            return Err(CliError::Config(format!(
                "monotone must be \"negative\" or \"positive\", got \"{other}\""
            )))
        }
    };
    let hoods: Vec<Vec<usize>> = spec
        .neighbourhoods
        .clone()
        .unwrap_or_else(|| (0..n).map(|a| vec![a]).collect());
    let singleton_hoods = hoods.iter().enumerate().all(|(a, h)| h == &vec![a]);
    let asserted = spec.local_dependence.unwrap_or(false);
    let outer = spec.outer_neighbourhoods.clone();
    let has_outer = outer.is_some();

    if let Some(entries) = spec.joint {
        let table = JointTable::from_sparse(n, entries)?;
        let marginals = match spec.marginals {
            Some(m) => m,
            None => table.marginals(),
        };
        let independent = joint_is_independent(&table, &marginals);
        let system = IndicatorSystem::new(
            marginals.clone(),
            hoods.clone(),
            outer,
            MomentSource::FullJoint(table),
            asserted,
        )?;
        return Ok(LoadedSystem {
            system: Some(system),
            marginals,
            independent,
            monotone,
            hoods,
            has_outer,
            n,
        });
    }

    if let Some(moments) = spec.moments {
        let marginals = spec.marginals.ok_or_else(|| {
            CliError::Config("a pair-moment system needs explicit `marginals`".into())
        })?;
        let factorises = moments_factorise(&moments, &marginals);
        if asserted && singleton_hoods && !factorises {
            return Err(CliError::Config(
                "singleton neighbourhoods with asserted local dependence claim \
                 independence, but the pair moments do not factorise"
                    .into(),
            ));
        }
        let system = IndicatorSystem::new(
            marginals.clone(),
            hoods.clone(),
            outer,
            MomentSource::Pairwise(moments),
            asserted,
        )?;
        return Ok(LoadedSystem {
            system: Some(system),
            marginals,
            independent: asserted && singleton_hoods && factorises,
            monotone,
            hoods,
            has_outer,
            n,
        });
    }

    // Marginals alone: an independent family.
    let marginals = spec.marginals.ok_or_else(|| {
        CliError::Config("a system without `joint` or `moments` needs `marginals`".into())
    })?;
    let system = if n <= AUTO_JOINT_CAP {
        let table = JointTable::independent(&marginals)?;
        Some(IndicatorSystem::new(
            marginals.clone(),
            hoods.clone(),
            outer,
            MomentSource::FullJoint(table),
            true,
        )?)
    } else {
        None
    };
    Ok(LoadedSystem {
        system,
        marginals,
        independent: true,
        monotone,
        hoods,
        has_outer,
        n,
    })
}

/// Outcome-by-outcome check that the joint law is the product of its
/// marginals. Families too wide to scan are reported as not verified.
fn joint_is_independent(table: &JointTable, marginals: &[f64]) -> bool {
    let n = table.n();
    if n > INDEPENDENCE_SCAN_CAP {
        return false;
    }
    let dense = table.dense_probs();
    for (mask, &prob) in dense.iter().enumerate() {
        let mut expected = 1.0;
        for (a, &p) in marginals.iter().enumerate() {
            expected *= if mask >> a & 1 == 1 { p } else { 1.0 - p };
        }
        if (prob - expected).abs() > 1e-12 {
            return false;
        }
    }
    true
}

fn moments_factorise(moments: &[Vec<f64>], marginals: &[f64]) -> bool {
    let n = marginals.len();
    if moments.len() != n || moments.iter().any(|r| r.len() != n) {
        return false;
    }
    (0..n).all(|a| {
        (0..n).all(|b| a == b || (moments[a][b] - marginals[a] * marginals[b]).abs() <= 1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(json: &str) -> Result<LoadedSystem, CliError> {
        build(serde_json::from_str(json).expect("test JSON must parse"))
    }

    #[test]
    fn marginals_alone_give_a_verified_independent_table() {
        let s = parse(r#"{"marginals": [0.1, 0.2, 0.3]}"#).unwrap();
        assert_eq!(s.n, 3);
        assert!(s.independent);
        let sys = s.system.expect("small families get a synthetic table");
        assert!(sys.joint().is_some());
    }

    #[test]
    fn large_independent_families_skip_the_table() {
        let marginals: Vec<f64> = (0..30).map(|i| 0.01 + 0.001 * i as f64).collect();
        let json = format!("{{\"marginals\": {marginals:?}}}");
        let s = parse(&json).unwrap();
        assert!(s.system.is_none() && s.independent);
    }

    #[test]
    fn joint_tables_are_scanned_for_independence() {
        let dependent = parse(
            r#"{"indices": 2, "joint": [[0, 0.5], [3, 0.5]],
                "neighbourhoods": [[0, 1], [0, 1]]}"#,
        )
        .unwrap();
        assert!(!dependent.independent, "perfectly correlated pair");
        let product = parse(
            r#"{"indices": 2,
                "joint": [[0, 0.72], [1, 0.08], [2, 0.18], [3, 0.02]]}"#,
        )
        .unwrap();
        assert!(product.independent, "0.1 x 0.2 product law");
    }

    #[test]
    fn contradictory_independence_claims_are_rejected() {
        let err = parse(
            r#"{"marginals": [0.2, 0.2], "local_dependence": true,
                "moments": [[0.2, 0.09], [0.09, 0.2]]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn monotone_field_is_validated() {
        let s = parse(r#"{"marginals": [0.1], "monotone": "negative"}"#).unwrap();
        assert_eq!(s.monotone, Some(MonotoneRelation::Negative));
        assert!(parse(r#"{"marginals": [0.1], "monotone": "sideways"}"#).is_err());
    }

    #[test]
    fn size_mismatches_are_config_errors() {
        assert!(parse(r#"{"indices": 3, "marginals": [0.1]}"#).is_err());
        assert!(parse(r#"{"indices": 0}"#).is_err());
        assert!(parse(r#"{"indices": ["a", "b"]}"#).is_err(), "labels but no moments");
    }
}
