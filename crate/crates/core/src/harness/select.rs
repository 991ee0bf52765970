use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::simulator::{condition_grid, Condition, Factor, EFFECT_LEVELS};

fn parse_effect(value: &str) -> Option<(f64, f64)> {
    match value {
        "nuisance" => Some(EFFECT_LEVELS[0]),
        "effect" => Some(EFFECT_LEVELS[1]),
        _ => {
            let (a, b) = value.split_once('/')?;
            Some((a.parse().ok()?, b.parse().ok()?))
        }
    }
}

fn matches(cond: &Condition, factor: &str, value: &str) -> Result<bool> {
    let bad = |f: &'static str| Error::InvalidCondition {
        factor: f,
        value: value.to_string(),
    };
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    Ok(match factor {
        "n_indicators" => cond.n_indicators == value.parse::<usize>().map_err(|_| bad("n_indicators"))?,
        "crp_quality" => close(cond.crp_quality, value.parse().map_err(|_| bad("crp_quality"))?),
        "n_sites" => cond.n_sites == value.parse::<usize>().map_err(|_| bad("n_sites"))?,
        "site_size" => cond.site_size == value.parse::<usize>().map_err(|_| bad("site_size"))?,
        "l1_effects" | "l2_effects" => {
            let name = if factor == "l1_effects" { "l1_effects" } else { "l2_effects" };
            let (a, b) = parse_effect(value).ok_or_else(|| bad(name))?;
            let e = if factor == "l1_effects" { cond.l1_effects } else { cond.l2_effects };
            close(e.0, a) && close(e.1, b)
        }
        _ => {
            let known: Vec<&str> = Factor::ALL.iter().map(|f| f.name()).collect();
            return Err(Error::Config(format!(
                "unknown factor '{factor}' (valid: {})",
                known.join(", ")
            )));
        }
    })
}

/// Resolves a condition selector to sorted grid ids.
///
/// Items are comma-separated: `all`, an id (`76`), an inclusive range
/// (`0-7`) or a factor filter (`crp_quality=0.8`, `l2_effects=1.5/3`,
/// `l1_effects=nuisance`). Ids and ranges are united; filters then restrict
/// the selection (all conditions when no ids are given).
pub fn select_conditions(selector: &str) -> Result<Vec<usize>> {
    let grid = condition_grid();
    let n = grid.len();
    let mut ids: Option<BTreeSet<usize>> = None;
    let mut filters = Vec::new();
    for item in selector.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        if item == "all" {
            ids.get_or_insert_with(BTreeSet::new).extend(0..n);
        } else if let Some((f, v)) = item.split_once('=') {
            filters.push((f.trim().to_string(), v.trim().to_string()));
        } else {
            let range = match item.split_once('-') {
                Some((a, b)) => a.parse::<usize>().ok().zip(b.parse::<usize>().ok()),
                None => item.parse::<usize>().ok().map(|a| (a, a)),
            };
            match range {
                Some((a, b)) if a <= b && b < n => {
                    ids.get_or_insert_with(BTreeSet::new).extend(a..=b);
                }
                _ => {
                    return Err(Error::Config(format!(
                        "bad condition selector '{item}' (ids are 0..{})",
                        n - 1
                    )))
                }
            }
        }
    }
    for (f, v) in &filters {
        let mut any = false;
        for cond in &grid {
            any |= matches(cond, f, v)?;
        }
        if !any {
            let factor = Factor::ALL.iter().find(|x| x.name() == f).expect("checked by matches").name();
            return Err(Error::InvalidCondition {
                factor,
                value: v.clone(),
            });
        }
    }
    let base = ids.unwrap_or_else(|| (0..n).collect());
    let mut out = Vec::new();
    for id in base {
        let mut keep = true;
        for (f, v) in &filters {
            keep &= matches(&grid[id], f, v)?;
        }
        if keep {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("selector '{selector}' matches no condition")));
    }
    Ok(out)
}
