//! Dataset and truth CSV files.
//!
//! Dataset: header `site_id,y1..yK,x1..xP1,z1..zP2`, one row per individual,
//! indicators coded `1..S_k`, site covariates repeated on every row of a site.
//!
//! Truth: a `site_id,row,true_c` section, a blank line, then a
//! `site_id,true_w` section. Rows and classes are one-based.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{Dataset, Individual, Site, Truth};

/// A dataset together with its column names.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub dataset: Dataset,
    pub indicators: Vec<String>,
    pub level1_covariates: Vec<String>,
    pub level2_covariates: Vec<String>,
}

fn csv_error(line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        line: line as usize,
        message: message.into(),
    }
}

fn map_csv(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    csv_error(line, e.to_string())
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile> {
    read_dataset_from(std::fs::File::open(path)?)
}

pub fn read_dataset_from(reader: impl Read) -> Result<DatasetFile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(map_csv)?.clone();
    if header.get(0) != Some("site_id") {
        return Err(csv_error(1, "first column must be site_id"));
    }
    let (mut ys, mut xs, mut zs) = (Vec::new(), Vec::new(), Vec::new());
    for name in header.iter().skip(1) {
        let stage = match name.chars().next() {
            Some('y') => 0,
            Some('x') => 1,
            Some('z') => 2,
            _ => return Err(csv_error(1, format!("column '{name}' must start with y, x or z"))),
        };
        let later_seen = [!xs.is_empty() || !zs.is_empty(), !zs.is_empty(), false];
        if later_seen[stage] {
            return Err(csv_error(1, format!("column '{name}' out of order; expected y.., x.., z..")));
        }
        [&mut ys, &mut xs, &mut zs][stage].push(name.to_string());
    }
    if ys.is_empty() {
        return Err(csv_error(1, "no indicator columns"));
    }
    let (k, p1) = (ys.len(), xs.len());

    let mut sites: Vec<Site> = Vec::new();
    let mut site_of: HashMap<String, usize> = HashMap::new();
    for record in rdr.records() {
        let record = record.map_err(map_csv)?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(csv_error(line, "empty site_id"));
        }
        let y = (0..k)
            .map(|i| {
                let v = &record[1 + i];
                match v.parse::<u16>() {
                    Ok(code) if code >= 1 => Ok(code),
                    _ => Err(csv_error(line, format!("{}: '{v}' is not a category code >= 1", ys[i]))),
                }
            })
            .collect::<Result<Vec<u16>>>()?;
        let parse_f = |offset: usize, names: &[String]| {
            (0..names.len())
                .map(|i| {
                    let v = &record[offset + i];
                    v.parse::<f64>()
                        .ok()
                        .filter(|f| f.is_finite())
                        .ok_or_else(|| csv_error(line, format!("{}: '{v}' is not a number", names[i])))
                })
                .collect::<Result<Vec<f64>>>()
        };
        let x = parse_f(1 + k, &xs)?;
        let z = parse_f(1 + k + p1, &zs)?;
        let j = *site_of.entry(id.clone()).or_insert_with(|| {
            sites.push(Site {
                id: id.clone(),
                z: z.clone(),
                rows: Vec::new(),
            });
            sites.len() - 1
        });
        if sites[j].z != z {
            return Err(csv_error(line, format!("site {id}: site covariates differ between rows")));
        }
        sites[j].rows.push(Individual { y, x });
    }
    if sites.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(DatasetFile {
        dataset: Dataset::new(sites),
        indicators: ys,
        level1_covariates: xs,
        level2_covariates: zs,
    })
}

fn default_names(prefix: char, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

impl DatasetFile {
    /// Wraps a dataset with default column names `y1.., x1.., z1..`.
    pub fn with_default_names(dataset: Dataset) -> Self {
        let first = dataset.individuals().next();
        let (k, p1, p2) = first.map_or((0, 0, 0), |(s, i)| (i.y.len(), i.x.len(), s.z.len()));
        Self {
            dataset,
            indicators: default_names('y', k),
            level1_covariates: default_names('x', p1),
            level2_covariates: default_names('z', p2),
        }
    }
}

pub fn write_dataset(path: &Path, file: &DatasetFile) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset_to(&mut out, file)?;
    out.flush()?;
    Ok(())
}

pub fn write_dataset_to(out: impl Write, file: &DatasetFile) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    let mut header = vec!["site_id".to_string()];
    header.extend(file.indicators.iter().cloned());
    header.extend(file.level1_covariates.iter().cloned());
    header.extend(file.level2_covariates.iter().cloned());
    w.write_record(&header).map_err(map_csv)?;
    for site in &file.dataset.sites {
        for ind in &site.rows {
            let mut row = vec![site.id.clone()];
            row.extend(ind.y.iter().map(u16::to_string));
            row.extend(ind.x.iter().map(f64::to_string));
            row.extend(site.z.iter().map(f64::to_string));
            w.write_record(&row).map_err(map_csv)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_truth(path: &Path, dataset: &Dataset) -> Result<()> {
    let truth = dataset
        .truth
        .as_ref()
        .ok_or_else(|| Error::InvalidData("dataset carries no true memberships".into()))?;
    let mut out = String::from("site_id,row,true_c\n");
    let mut i = 0;
    for site in &dataset.sites {
        for r in 0..site.rows.len() {
            out.push_str(&format!("{},{},{}\n", site.id, r + 1, truth.level1[i] + 1));
            i += 1;
        }
    }
    out.push_str("\nsite_id,true_w\n");
    for (site, w) in dataset.sites.iter().zip(&truth.level2) {
        out.push_str(&format!("{},{}\n", site.id, w + 1));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a truth file written for `dataset` (same site order).
pub fn read_truth(path: &Path, dataset: &Dataset) -> Result<Truth> {
    let text = std::fs::read_to_string(path)?;
    let site_index: HashMap<&str, usize> =
        dataset.sites.iter().enumerate().map(|(j, s)| (s.id.as_str(), j)).collect();
    let offsets = dataset.site_offsets();
    let mut level1 = vec![usize::MAX; dataset.n_individuals()];
    let mut level2 = vec![usize::MAX; dataset.n_sites()];
    let mut section = 0;
    for (n, line) in text.lines().enumerate() {
        let line_no = (n + 1) as u64;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with("site_id") {
            section += 1;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let site = *site_index
            .get(fields[0])
            .ok_or_else(|| csv_error(line_no, format!("unknown site '{}'", fields[0])))?;
        let num = |s: &str| {
            s.parse::<usize>()
                .ok()
                .filter(|v| *v >= 1)
                .ok_or_else(|| csv_error(line_no, format!("'{s}' is not a positive integer")))
        };
        match (section, fields.len()) {
            (1, 3) => {
                let row = num(fields[1])? - 1;
                if row >= dataset.sites[site].rows.len() {
                    return Err(csv_error(line_no, "row beyond site size"));
                }
                level1[offsets[site] + row] = num(fields[2])? - 1;
            }
            (2, 2) => level2[site] = num(fields[1])? - 1,
            _ => return Err(csv_error(line_no, "unexpected field count")),
        }
    }
    if level1.contains(&usize::MAX) || level2.contains(&usize::MAX) {
        return Err(Error::InvalidData("truth file does not cover every row and site".into()));
    }
    Ok(Truth { level1, level2 })
}
