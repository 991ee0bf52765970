//! Compressed view of a dataset used by the EM kernels.
//!
//! Individuals sharing a response pattern share their response
//! log-likelihood, and individuals of one site sharing a covariate vector
//! share their class-membership probabilities, so both are evaluated once
//! per distinct value.

use std::collections::HashMap;

use crate::model::Dataset;

#[derive(Debug, Clone)]
pub(crate) struct CovariateGroup {
    pub site: usize,
    pub x: Vec<f64>,
    pub members: Vec<usize>,
}

#[derive(Debug, Clone)]
pub(crate) struct DataIndex {
    pub n_individuals: usize,
    pub site_offsets: Vec<usize>,
    /// Zero-based category codes per distinct pattern.
    pub patterns: Vec<Vec<usize>>,
    pub pattern_of: Vec<usize>,
    pub groups: Vec<CovariateGroup>,
    /// Range of `groups` belonging to each site.
    pub site_groups: Vec<std::ops::Range<usize>>,
    pub z: Vec<Vec<f64>>,
}

impl DataIndex {
    pub fn new(data: &Dataset) -> Self {
        let mut pattern_ids: HashMap<Vec<u16>, usize> = HashMap::new();
        let mut patterns = Vec::new();
        let mut pattern_of = Vec::with_capacity(data.n_individuals());
        for (_, row) in data.individuals() {
            let next = patterns.len();
            let id = *pattern_ids.entry(row.y.clone()).or_insert(next);
            if id == next {
                patterns.push(row.y.iter().map(|&v| v as usize - 1).collect());
            }
            pattern_of.push(id);
        }

        let site_offsets = data.site_offsets();
        let mut groups = Vec::new();
        let mut site_groups = Vec::with_capacity(data.n_sites());
        for (j, site) in data.sites.iter().enumerate() {
            let start = groups.len();
            let mut local: HashMap<Vec<u64>, usize> = HashMap::new();
            for (r, row) in site.rows.iter().enumerate() {
                let key: Vec<u64> = row.x.iter().map(|v| v.to_bits()).collect();
                let next = groups.len();
                let g = *local.entry(key).or_insert(next);
                if g == next {
                    groups.push(CovariateGroup {
                        site: j,
                        x: row.x.clone(),
                        members: Vec::new(),
                    });
                }
                groups[g].members.push(site_offsets[j] + r);
            }
            site_groups.push(start..groups.len());
        }

        Self {
            n_individuals: data.n_individuals(),
            site_offsets,
            patterns,
            pattern_of,
            groups,
            site_groups,
            z: data.sites.iter().map(|s| s.z.clone()).collect(),
        }
    }

    pub fn n_sites(&self) -> usize {
        self.site_groups.len()
    }
}
