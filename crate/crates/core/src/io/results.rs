//! Run-directory persistence: partition point estimate, traces, optional
//! similarity matrix, posterior draws, and provenance metadata.

use crate::error::{Error, Result};
use crate::io::csv::{read_partition_csv, write_partition_csv};
use crate::partition::{Partition, SimilarityMatrix};
use crate::real::Real;
use crate::sampler::PosteriorDraws;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const PARTITION_FILE: &str = "partition.csv";
const TRACES_FILE: &str = "traces.csv";
const SIMILARITY_FILE: &str = "similarity.bin";
const METADATA_FILE: &str = "metadata.toml";
const DRAWS_PARTITIONS_FILE: &str = "draws_partitions.csv";
const DRAWS_PARAMS_FILE: &str = "draws_params.json";

/// Everything a fit leaves on disk, minus the raw draws.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultBundle<T: Real> {
    pub point_estimate: Partition,
    pub similarity: Option<SimilarityMatrix<T>>,
    pub k_trace: Vec<usize>,
    pub alpha_trace: Vec<T>,
    pub logdensity_trace: Vec<T>,
    pub nu_acceptance_rate: T,
    pub provenance: Provenance,
}

/// Provenance recorded with every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: String,
    pub mode: String,
    pub n_obs: usize,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior_from: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct Metadata {
    provenance: Provenance,
    nu_acceptance_rate: f64,
}

/// FNV-1a 64-bit hash, used for the similarity checksum and config hashes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Hash a config document for provenance.
pub fn config_hash(text: &str) -> String {
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

// Similarity binary layout: magic "ZETA", u64 LE n, n*n f64 LE row-major,
// u64 LE FNV-1a checksum of all preceding payload bytes (n field + matrix).
fn write_similarity<T: Real>(z: &SimilarityMatrix<T>, path: &Path) -> Result<()> {
    let mut payload = Vec::with_capacity(8 + z.n() * z.n() * 8);
    payload.extend_from_slice(&(z.n() as u64).to_le_bytes());
    for v in z.entries() {
        payload.extend_from_slice(&v.to_f64().unwrap().to_le_bytes());
    }
    let checksum = fnv1a64(&payload);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(b"ZETA").map_err(|e| Error::io(path, e))?;
    f.write_all(&payload).map_err(|e| Error::io(path, e))?;
    f.write_all(&checksum.to_le_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn read_similarity<T: Real>(path: &Path) -> Result<SimilarityMatrix<T>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::io(path, e))?
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 20 || &bytes[0..4] != b"ZETA" {
        return Err(Error::corrupt(path, "missing ZETA magic"));
    }
    let payload = &bytes[4..bytes.len() - 8];
    let stored = u64::from_le_bytes(bytes[bytes.len() - 8..].try_into().unwrap());
    if fnv1a64(payload) != stored {
        return Err(Error::corrupt(path, "checksum mismatch"));
    }
    let n = u64::from_le_bytes(payload[0..8].try_into().unwrap()) as usize;
    if payload.len() != 8 + n * n * 8 {
        return Err(Error::corrupt(path, format!("payload size wrong for n = {n}")));
    }
    let entries: Vec<T> = payload[8..]
        .chunks_exact(8)
        .map(|c| crate::real::cv::<T>(f64::from_le_bytes(c.try_into().unwrap())))
        .collect();
    SimilarityMatrix::from_entries(n, entries)
}

/// Write a [`ResultBundle`] into a directory (created if missing).
pub fn write_results<T: Real>(bundle: &ResultBundle<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_partition_csv(&bundle.point_estimate, dir.join(PARTITION_FILE))?;

    let traces_path = dir.join(TRACES_FILE);
    let mut out = String::from("draw,k,alpha,logdensity\n");
    for i in 0..bundle.k_trace.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            i + 1,
            bundle.k_trace[i],
            bundle.alpha_trace[i],
            bundle.logdensity_trace[i]
        ));
    }
    std::fs::write(&traces_path, out).map_err(|e| Error::io(&traces_path, e))?;

    if let Some(z) = &bundle.similarity {
        write_similarity(z, &dir.join(SIMILARITY_FILE))?;
    }

    let meta = Metadata {
        provenance: bundle.provenance.clone(),
        nu_acceptance_rate: bundle.nu_acceptance_rate.to_f64().unwrap(),
    };
    let meta_path = dir.join(METADATA_FILE);
    let text = toml::to_string_pretty(&meta)
        .map_err(|e| Error::Config(format!("metadata serialization failed: {e}")))?;
    std::fs::write(&meta_path, text).map_err(|e| Error::io(&meta_path, e))?;
    Ok(())
}

/// Read a [`ResultBundle`] back from a run directory.
pub fn read_results<T: Real>(dir: impl AsRef<Path>) -> Result<ResultBundle<T>> {
    let dir = dir.as_ref();
    let point_estimate = read_partition_csv(dir.join(PARTITION_FILE))?;

    let traces_path = dir.join(TRACES_FILE);
    let text = std::fs::read_to_string(&traces_path).map_err(|e| Error::io(&traces_path, e))?;
    let mut k_trace = Vec::new();
    let mut alpha_trace = Vec::new();
    let mut logdensity_trace = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(Error::Parse { line: idx + 1, message: "expected 4 trace cells".into() });
        }
        k_trace.push(cells[1].parse::<usize>().map_err(|_| Error::Parse {
            line: idx + 1,
            message: "bad K value".into(),
        })?);
        let parse = |s: &str| {
            s.parse::<T>()
                .map_err(|_| Error::Parse { line: idx + 1, message: "bad trace value".into() })
        };
        alpha_trace.push(parse(cells[2])?);
        logdensity_trace.push(parse(cells[3])?);
    }

    let sim_path = dir.join(SIMILARITY_FILE);
    let similarity = if sim_path.exists() { Some(read_similarity(&sim_path)?) } else { None };

    let meta_path = dir.join(METADATA_FILE);
    let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Metadata = toml::from_str(&text)
        .map_err(|e| Error::corrupt(&meta_path, format!("bad metadata: {e}")))?;

    Ok(ResultBundle {
        point_estimate,
        similarity,
        k_trace,
        alpha_trace,
        logdensity_trace,
        nu_acceptance_rate: crate::real::cv::<T>(meta.nu_acceptance_rate),
        provenance: meta.provenance,
    })
}

/// Persist full posterior draws alongside the bundle.
pub fn write_draws<T: Real>(draws: &PosteriorDraws<T>, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let part_path = dir.join(DRAWS_PARTITIONS_FILE);
    let mut out = String::new();
    for p in &draws.partitions {
        let row: Vec<String> = p.iter().map(|l| l.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(&part_path, out).map_err(|e| Error::io(&part_path, e))?;

    #[derive(Serialize)]
    #[serde(bound(serialize = ""))]
    struct DrawsJson<'a, T: Real> {
        cluster_params: &'a Vec<Vec<crate::model::ClusterParams<T>>>,
        alpha_trace: &'a Vec<T>,
        k_trace: &'a Vec<usize>,
        logdensity_trace: &'a Vec<T>,
        nu_acceptance_rate: T,
    }
    let json_path = dir.join(DRAWS_PARAMS_FILE);
    let payload = DrawsJson {
        cluster_params: &draws.cluster_params,
        alpha_trace: &draws.alpha_trace,
        k_trace: &draws.k_trace,
        logdensity_trace: &draws.logdensity_trace,
        nu_acceptance_rate: draws.nu_acceptance_rate,
    };
    let file = std::fs::File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    serde_json::to_writer(std::io::BufWriter::new(file), &payload)
        .map_err(|e| Error::Config(format!("draws serialization failed: {e}")))?;
    Ok(())
}

/// Read posterior draws back from a run directory.
pub fn read_draws<T: Real>(dir: impl AsRef<Path>) -> Result<PosteriorDraws<T>> {
    let dir = dir.as_ref();
    let part_path = dir.join(DRAWS_PARTITIONS_FILE);
    let text = std::fs::read_to_string(&part_path).map_err(|e| Error::io(&part_path, e))?;
    let mut partitions = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let labels: std::result::Result<Vec<u32>, _> =
            line.split(',').map(|c| c.parse::<u32>()).collect();
        partitions.push(labels.map_err(|_| Error::Parse {
            line: idx + 1,
            message: "bad partition label".into(),
        })?);
    }

    #[derive(Deserialize)]
    #[serde(bound(deserialize = ""))]
    struct DrawsJson<T: Real> {
        cluster_params: Vec<Vec<crate::model::ClusterParams<T>>>,
        alpha_trace: Vec<T>,
        k_trace: Vec<usize>,
        logdensity_trace: Vec<T>,
        nu_acceptance_rate: T,
    }
    let json_path = dir.join(DRAWS_PARAMS_FILE);
    let file = std::fs::File::open(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let parsed: DrawsJson<T> = serde_json::from_reader(std::io::BufReader::new(file))
        .map_err(|e| Error::corrupt(&json_path, format!("bad draws file: {e}")))?;

    let draws = PosteriorDraws {
        partitions,
        cluster_params: parsed.cluster_params,
        alpha_trace: parsed.alpha_trace,
        k_trace: parsed.k_trace,
        logdensity_trace: parsed.logdensity_trace,
        nu_acceptance_rate: parsed.nu_acceptance_rate,
    };
    if draws.partitions.len() != draws.cluster_params.len()
        || draws.partitions.len() != draws.alpha_trace.len()
    {
        return Err(Error::corrupt(dir, "draws files disagree on the number of draws"));
    }
    Ok(draws)
}

/// Full directory layout for a run.
pub fn run_dir_files(dir: impl AsRef<Path>) -> Vec<PathBuf> {
    let dir = dir.as_ref();
    [PARTITION_FILE, TRACES_FILE, METADATA_FILE, DRAWS_PARTITIONS_FILE, DRAWS_PARAMS_FILE]
        .iter()
        .map(|f| dir.join(f))
        .collect()
}
