//! Regenerates the synthetic observation files under `data/approx/`.
//!
//! The accuracy curves are hand-shaped smooth functions plus small noise; no
//! value in these files was measured. MACs come from the cost model so that the files stay consistent
//! with `vitcube macs`.
//!
//! ```text
//! cargo run -p vitcube --example approx_data -- data/approx
//! ```

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vitcube::config::{parse_base, DEFAULT_BASE_TOML};
use vitcube_core::cost_model::{macs_of, resolve_arch, ArchFactors, BaseConfig};

const HEADER: &str = "id,r,d_i,d_m,w,macs,top1,top5";

struct Sheet {
    lines: Vec<String>,
}

impl Sheet {
    fn new(what: &str) -> Self {
        Self {
            lines: vec![
                format!("# approximate/synthetic: {what}"),
                "# generated by crates/vitcube/examples/approx_data.rs; not measured accuracies".into(),
                HEADER.into(),
            ],
        }
    }

    fn push(&mut self, base: &BaseConfig, id: String, f: ArchFactors, top1: f64) {
        let macs = macs_of(&resolve_arch(&f, base).unwrap(), base).unwrap().total;
        let top5 = 100.0 - (100.0 - top1) * 0.28;
        self.lines.push(format!("{id},{:.2},{:.2},{:.2},{:.2},{macs},{top1:.2},{top5:.2}", f.r, f.d_i, f.d_m, f.w));
    }

    fn text(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn resolution_1d(base: &BaseConfig, rng: &mut ChaCha8Rng) -> Sheet {
    let mut sheet = Sheet::new("top-1 accuracy (%) against the resolution factor");
    for k in 0..15 {
        let r = 0.6 + 0.1 * k as f64;
        for rep in 0..2 {
            let f = ArchFactors {
                r,
                d_i: round2(rng.gen_range(1.3..2.3)),
                d_m: round2(rng.gen_range(0.8..1.6)),
                w: round2(rng.gen_range(0.8..1.2)),
            };
            let rise = 5.0 * (1.0 - (-(r - 0.5) / 0.35).exp());
            let fall = 4.0 * (r - 1.6).max(0.0).powi(2);
            let top1 = 78.5 + rise - fall + 0.8 * (f.w - 1.0) + rng.gen_range(-0.2..0.2);
            sheet.push(base, format!("res-{k:02}-{rep}"), f, top1);
        }
    }
    sheet
}

fn resolution_width_2d(base: &BaseConfig, rng: &mut ChaCha8Rng) -> Sheet {
    let mut sheet = Sheet::new("top-1 accuracy (%) over resolution and width, depths fixed at 1");
    for i in 0..6 {
        for j in 0..7 {
            let (r, w) = (0.8 + 0.1 * i as f64, 0.7 + 0.1 * j as f64);
            let top1 = 82.5 - 30.0 * (r - 1.1).powi(2) - 20.0 * (w - 1.0).powi(2) + rng.gen_range(-0.15..0.15);
            sheet.push(base, format!("rw-{i}-{j}"), ArchFactors { r, d_i: 1.0, d_m: 1.0, w }, top1);
        }
    }
    sheet
}

fn resolution_vitdepth_2d(base: &BaseConfig, rng: &mut ChaCha8Rng) -> Sheet {
    let mut sheet = Sheet::new("top-1 accuracy (%) over resolution and ViT-block depth, width fixed at 1");
    for i in 0..6 {
        for j in 0..9 {
            let (r, d_m) = (0.8 + 0.1 * i as f64, 0.8 + 0.1 * j as f64);
            let top1 = 82.3 - 25.0 * (r - 1.05).powi(2) - 8.0 * (d_m - 1.08).powi(2) + rng.gen_range(-0.15..0.15);
            sheet.push(base, format!("rdm-{i}-{j}"), ArchFactors { r, d_i: 1.0, d_m, w: 1.0 }, top1);
        }
    }
    sheet
}

/// Random factor tuples scored by a smooth accuracy model in which
/// resolution and width matter more than either depth.
fn population(base: &BaseConfig, rng: &mut ChaCha8Rng) -> Sheet {
    let mut sheet = Sheet::new("random architectures with a smooth accuracy model, for pareto and fit-rule");
    for k in 0..160 {
        let f = ArchFactors {
            r: round2(rng.gen_range(0.5..1.3)),
            d_i: round2(rng.gen_range(0.6..2.0)),
            d_m: round2(rng.gen_range(0.6..1.6)),
            w: round2(rng.gen_range(0.5..1.1)),
        };
        let score = 0.5 * f.r.ln() + 0.4 * f.w.ln() + 0.08 * f.d_i.ln() + 0.08 * f.d_m.ln();
        let top1 = 100.0 * (0.5 + 0.36 / (1.0 + (-(1.5 + 3.0 * score)).exp())) + rng.gen_range(-0.4..0.4);
        sheet.push(base, format!("pop-{k:03}"), f, top1);
    }
    sheet
}

fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "data/approx".into()));
    std::fs::create_dir_all(&dir).unwrap();
    let base = parse_base(DEFAULT_BASE_TOML).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let sheets = [
        ("resolution_1d.csv", resolution_1d(&base, &mut rng)),
        ("resolution_width_2d.csv", resolution_width_2d(&base, &mut rng)),
        ("resolution_vitdepth_2d.csv", resolution_vitdepth_2d(&base, &mut rng)),
        ("population.csv", population(&base, &mut rng)),
    ];
    for (name, sheet) in sheets {
        let path = dir.join(name);
        std::fs::write(&path, sheet.text()).unwrap();
        println!("wrote {} ({} rows)", path.display(), sheet.lines.len() - 3);
    }
}
