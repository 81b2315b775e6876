//! Seeded synthetic datasets for benchmarks, demos and tests.

use std::f64::consts::PI;

use crate::ingest::{CleanTable, NameFeatures};
use crate::numeric::{Matrix, RandomStream};

/// Friedman #1: ten uniform features on `[0, 1]`, of which the first five
/// enter `10·sin(π·x1·x2) + 20·(x3 − 0.5)² + 10·x4 + 5·x5 + ε`.
pub fn friedman1(n: usize, noise_std: f64, seed: u64) -> CleanTable {
    let mut stream = RandomStream::new(seed);
    let d = 10;
    let mut data = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| stream.next_uniform()).collect();
        let clean = 10.0 * (PI * row[0] * row[1]).sin()
            + 20.0 * (row[2] - 0.5).powi(2)
            + 10.0 * row[3]
            + 5.0 * row[4];
        y.push(clean + noise_std * stream.next_normal());
        data.extend(row);
    }
    let x = Matrix::from_vec(n, d, data).expect("finite synthetic values");
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    CleanTable::from_matrix(x, y, names, "y")
}

const NETS: [&str; 8] = ["acs", "bcu", "dia", "fof", "nbo", "pcu", "sra", "tbo"];
const SPACE_GROUPS: [u32; 9] = [2, 14, 15, 62, 139, 191, 221, 225, 227];
const GROUPS: [(&str, f64); 7] = [
    ("H", 0.0),
    ("NH2", 0.35),
    ("OH", 0.2),
    ("CH3", -0.1),
    ("F", 0.1),
    ("NO2", 0.25),
    ("COOH", 0.3),
];

pub const MOF_HEADERS: [&str; 13] = [
    "MOFname",
    "void_fraction",
    "void_volume [cm^3/g]",
    "largest_cavity_diameter [A]",
    "pore_limiting_diameter [A]",
    "surface_area [m^2/g]",
    "weight [u]",
    "volume [A^3]",
    "henry_coefficient_CO2 [mol/kg/Pa]",
    "heat_adsorption_CO2 [kcal/mol]",
    "functional_groups",
    "CO2_uptake [mol/kg]",
    "CO2/N2_selectivity",
];

fn pick<'a, T>(stream: &mut RandomStream, items: &'a [T]) -> &'a T {
    &items[stream.next_below(items.len())]
}

/// A MOF-like descriptor table in the default column layout.
///
/// Roughly `dirty_fraction` of the rows carry one defect (missing value,
/// null token, negative descriptor, impossible void fraction or malformed
/// name) so that cleaning has something to remove.
pub fn mof_csv(n: usize, dirty_fraction: f64, seed: u64) -> String {
    let mut stream = RandomStream::new(seed);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(MOF_HEADERS).expect("in-memory write");
    for _ in 0..n {
        let name = NameFeatures {
            metal_units: 1 + stream.next_below(12) as u32,
            linker1_count: 1 + stream.next_below(30) as u32,
            linker2_count: 1 + stream.next_below(30) as u32,
            net_code: pick(&mut stream, &NETS).to_string(),
            space_group: *pick(&mut stream, &SPACE_GROUPS),
        };
        let vf = 0.1 + 0.8 * stream.next_uniform();
        let density = 0.3 + 1.7 * stream.next_uniform();
        let void_volume = vf / density;
        let lcd = 3.0 + 20.0 * vf + 0.5 * stream.next_normal().abs();
        let pld = lcd * (0.4 + 0.55 * stream.next_uniform());
        let surface_area = 500.0 + 4000.0 * vf * (0.6 + 0.6 * stream.next_uniform());
        let weight = 500.0
            + 300.0 * name.metal_units as f64
            + 150.0 * (name.linker1_count + name.linker2_count) as f64
            + 50.0 * stream.next_uniform();
        let volume = weight * 1.660_539 / density;
        let (group, group_effect) = *pick(&mut stream, &GROUPS);
        let henry = 1e-6 * (0.8 * stream.next_normal()).exp() * (1.0 + 3.0 * group_effect);
        let heat = 4.0 + 8.0 * (1.0 - vf) + 2.0 * group_effect + 0.5 * stream.next_normal();
        let linker_gap = name.linker1_count as f64 - name.linker2_count as f64;
        let uptake = (2.0 * (PI * vf).sin() * (1.0 + 0.4 * group_effect)
            + 0.05 * heat
            + 0.3 * (henry * 1e6 + 1.0).ln()
            + 0.02 * linker_gap * linker_gap / 30.0
            + 0.1 * stream.next_normal())
        .max(0.0);
        let selectivity = 10.0 * (0.4 * uptake + 0.3 * stream.next_normal()).exp();

        let mut record: Vec<String> = vec![
            name.to_string(),
            vf.to_string(),
            void_volume.to_string(),
            lcd.to_string(),
            pld.to_string(),
            surface_area.to_string(),
            weight.to_string(),
            volume.to_string(),
            henry.to_string(),
            heat.to_string(),
            group.to_string(),
            uptake.to_string(),
            selectivity.to_string(),
        ];
        if stream.next_uniform() < dirty_fraction {
            match stream.next_below(6) {
                0 => record[3] = "NaN".into(),
                1 => record[5] = "NA".into(),
                2 => record[5] = format!("-{}", record[5]),
                3 => record[1] = (1.0 + vf).to_string(),
                4 => record[0] = format!("mof_{}", stream.next_below(1000)),
                _ => record[11] = String::new(),
            }
        }
        w.write_record(&record).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}
