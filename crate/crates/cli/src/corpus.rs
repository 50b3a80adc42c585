//! Built-in benchmark corpus: registry maps crossed with seeded target grids.

use std::f64::consts::PI;
use std::io::Write;

use anyhow::{bail, Result};
use hadamard_core::linalg::{norm2, DenseMatrix};
use hadamard_core::maps::DifferentiableMap;
use hadamard_core::{solve_pointwise, DescentConfig, MapInstance, SolveReport, SolveStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const TARGETS_PER_ENTRY: usize = 20;
pub const TARGET_RANGE: f64 = 10.0;
pub const BENCH_CSV_HEADER: &str =
    "map,n,target_id,converged,iters,final_mu,path_len,bound_2M_mu0,bound_ok";

/// Corpus names accepted by `bench`.
pub const CORPUS_NAMES: &[&str] = &[
    "default",
    "all",
    "affine",
    "sine_perturbed",
    "coupled_sine",
    "cubic",
    "arctan_drift",
    "exp_spiral",
    "arctan_flat",
];

pub struct CorpusEntry {
    pub label: String,
    pub map: MapInstance,
    /// The map satisfies a uniform inverse bound and carries its analytic `M`.
    pub compliant: bool,
    pub targets: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct BenchRow {
    pub map: String,
    pub n: usize,
    pub target_id: usize,
    pub converged: bool,
    pub iters: usize,
    pub final_mu: f64,
    pub path_len: f64,
    pub bound_2M_mu0: Option<f64>,
    pub bound_ok: bool,
}

pub struct BenchRun {
    pub row: BenchRow,
    pub report: SolveReport,
    pub compliant: bool,
}

fn rng_for(seed: u64, entry: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(entry as u64);
    rng
}

fn box_targets(rng: &mut ChaCha8Rng, n: usize, half_width: f64) -> Vec<Vec<f64>> {
    (0..TARGETS_PER_ENTRY)
        .map(|_| (0..n).map(|_| rng.random_range(-half_width..half_width)).collect())
        .collect()
}

/// Householder reflection through a random direction.
fn random_reflection(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix {
    let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let vv = norm2(&v).powi(2);
    let mut q = DenseMatrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            q[(i, j)] -= 2.0 * v[i] * v[j] / vv;
        }
    }
    q
}

/// `U diag(s) V` with reflections `U`, `V`, so `||A⁻¹||₂ = 1 / min s` exactly.
fn seeded_affine(rng: &mut ChaCha8Rng, n: usize) -> Result<(MapInstance, f64)> {
    let s: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..3.0)).collect();
    let u = random_reflection(rng, n);
    let v = random_reflection(rng, n);
    let a = u.matmul(&DenseMatrix::from_diagonal(&s)).matmul(&v);
    let offset: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let bound = 1.0 / s.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((MapInstance::affine(a, offset)?.with_known_inverse_bound(Some(bound)), bound))
}

enum Family {
    Affine(usize),
    Sine(f64, usize),
    Coupled(f64, usize),
    Cubic(usize),
    ArctanDrift(f64, usize),
    ExpSpiral,
    ArctanFlat(usize),
}

fn families(name: &str) -> Option<Vec<Family>> {
    use Family::*;
    let affine = vec![Affine(2), Affine(8)];
    let sine = vec![Sine(0.25, 1), Sine(0.25, 4), Sine(0.25, 16), Sine(0.5, 1), Sine(0.5, 4), Sine(0.5, 16)];
    let coupled = vec![Coupled(0.5, 8)];
    let cubic = vec![Cubic(1), Cubic(4)];
    let drift = vec![ArctanDrift(1.0, 1), ArctanDrift(1.0, 8)];
    Some(match name {
        "affine" => affine,
        "sine_perturbed" => sine,
        "coupled_sine" => coupled,
        "cubic" => cubic,
        "arctan_drift" => drift,
        "exp_spiral" => vec![ExpSpiral],
        "arctan_flat" => vec![ArctanFlat(2)],
        "default" | "all" => {
            let mut v: Vec<Family> = [affine, sine, coupled, cubic, drift].into_iter().flatten().collect();
            if name == "all" {
                v.extend([ExpSpiral, ArctanFlat(2)]);
            }
            v
        }
        _ => return None,
    })
}

/// Builds a named corpus. Targets are drawn from a per-entry stream of `seed`.
pub fn build_corpus(name: &str, seed: u64) -> Result<Vec<CorpusEntry>> {
    let Some(families) = families(name) else {
        bail!("unknown corpus `{name}`; expected one of {}", CORPUS_NAMES.join(", "));
    };
    let mut entries = Vec::with_capacity(families.len());
    for (index, family) in families.into_iter().enumerate() {
        let mut rng = rng_for(seed, index);
        let entry = match family {
            Family::Affine(n) => {
                let (map, _) = seeded_affine(&mut rng, n)?;
                CorpusEntry { label: "affine".into(), targets: box_targets(&mut rng, n, TARGET_RANGE), map, compliant: true }
            }
            Family::Sine(k, n) => CorpusEntry {
                label: format!("sine_perturbed[k={k}]"),
                map: MapInstance::sine_perturbed(n, k)?,
                compliant: true,
                targets: box_targets(&mut rng, n, TARGET_RANGE),
            },
            Family::Coupled(k, n) => CorpusEntry {
                label: format!("coupled_sine[k={k}]"),
                map: MapInstance::coupled_sine(n, k)?,
                compliant: true,
                targets: box_targets(&mut rng, n, TARGET_RANGE),
            },
            Family::Cubic(n) => CorpusEntry {
                label: "cubic".into(),
                map: MapInstance::cubic(n)?,
                compliant: true,
                targets: box_targets(&mut rng, n, TARGET_RANGE),
            },
            Family::ArctanDrift(a, n) => CorpusEntry {
                label: format!("arctan_drift[a={a}]"),
                map: MapInstance::arctan_drift(n, a)?,
                compliant: true,
                targets: box_targets(&mut rng, n, TARGET_RANGE),
            },
            Family::ExpSpiral => {
                // tiny radii: preimages sit far out where the jacobian nearly vanishes
                let targets = (0..TARGETS_PER_ENTRY)
                    .map(|_| {
                        let r = rng.random_range(-30.0..-15.0_f64).exp();
                        let th = rng.random_range(-PI..PI);
                        vec![r * th.cos(), r * th.sin()]
                    })
                    .collect();
                CorpusEntry { label: "exp_spiral".into(), map: MapInstance::exp_spiral(), compliant: false, targets }
            }
            Family::ArctanFlat(n) => CorpusEntry {
                label: "arctan_flat".into(),
                map: MapInstance::arctan_flat(n)?,
                compliant: false,
                targets: box_targets(&mut rng, n, 3.0),
            },
        };
        entries.push(entry);
    }
    Ok(entries)
}

/// Solves every target from `x0 = 0`. Rows come back in corpus order.
pub fn run_corpus(entries: &[CorpusEntry], config: &DescentConfig) -> Result<Vec<BenchRun>> {
    let jobs: Vec<(&CorpusEntry, usize)> =
        entries.iter().flat_map(|e| (0..e.targets.len()).map(move |j| (e, j))).collect();
    jobs.par_iter()
        .map(|&(entry, target_id)| {
            let y = &entry.targets[target_id];
            let n = entry.map.spec().dimension;
            let report = solve_pointwise(&entry.map, y, &vec![0.0; n], config)?;
            let converged = report.status == SolveStatus::Converged;
            let bound = if entry.compliant {
                entry
                    .map
                    .known_inverse_bound()
                    .map(|m| report.trace.path_length_bound(m, config.decrease_fraction))
            } else {
                None
            };
            let path_len = report.trace.cumulative_path_length;
            let bound_ok = bound.is_some_and(|b| path_len <= b * (1.0 + 1e-9));
            let row = BenchRow {
                map: entry.label.clone(),
                n,
                target_id,
                converged,
                iters: report.trace.iterations(),
                final_mu: report.residual_norm,
                path_len,
                bound_2M_mu0: bound,
                bound_ok,
            };
            Ok(BenchRun { row, report, compliant: entry.compliant })
        })
        .collect()
}

/// Every compliant run converged within its path bound.
pub fn corpus_passes(runs: &[BenchRun]) -> bool {
    runs.iter().filter(|r| r.compliant).all(|r| r.row.converged && r.row.bound_ok)
}

pub fn write_bench_csv<W: Write>(runs: &[BenchRun], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    if runs.is_empty() {
        out.write_record(BENCH_CSV_HEADER.split(','))?;
    }
    for run in runs {
        out.serialize(&run.row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_bench_csv<R: std::io::Read>(reader: R) -> Result<Vec<BenchRow>> {
    Ok(csv::Reader::from_reader(reader).deserialize().collect::<Result<_, _>>()?)
}
