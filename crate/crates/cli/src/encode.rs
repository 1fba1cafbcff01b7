use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use elane_core::dataio::write_field_pgm;
use elane_core::elm::order_and_pad;
use serde::Serialize;

use crate::common::{emit, ensure_dir, write_file, GridArgs};
use crate::CliResult;

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Annotation file: one lane per line of alternating x y values.
    pub labels: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Number of lane slots.
    #[arg(long, default_value_t = 4)]
    pub capacity: usize,
    /// Directory for the PGM fields and manifest.json.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct SlotEntry {
    slot: usize,
    exists: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    field: Option<String>,
    rows: Vec<usize>,
}

#[derive(Debug, Serialize)]
struct Manifest {
    grid: String,
    sigma: f64,
    capacity: usize,
    exists: Vec<bool>,
    slots: Vec<SlotEntry>,
}

pub(crate) fn run(args: &EncodeArgs, stdout: &mut dyn Write) -> CliResult {
    let p = args.grid.heaviside()?;
    let lanes = args.grid.load_lanes(&args.labels)?;
    let stack = order_and_pad(&lanes, args.capacity, args.grid.grid, p)?;

    let slots = stack
        .slots()
        .iter()
        .enumerate()
        .map(|(i, s)| SlotEntry {
            slot: i,
            exists: s.exists,
            field: s.exists.then(|| format!("slot_{i}.pgm")),
            rows: s.range.set_rows().collect(),
        })
        .collect();
    let manifest = Manifest {
        grid: args.grid.grid.to_string(),
        sigma: p.sigma(),
        capacity: stack.capacity(),
        exists: stack.exists(),
        slots,
    };

    if let Some(dir) = &args.out {
        ensure_dir(dir)?;
        for (entry, slot) in manifest.slots.iter().zip(stack.slots()) {
            if let Some(name) = &entry.field {
                write_file(dir, name, &write_field_pgm(&slot.psi))?;
            }
        }
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        write_file(dir, "manifest.json", &json)?;
    }
    emit(stdout, &manifest)
}
