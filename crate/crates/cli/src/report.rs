//! Design tables and set outline files.

use std::fmt::Write as _;
use std::path::Path;

use rpi_core::conditions::CandidateSolution;
use rpi_core::error::{Error, Result};
use rpi_core::polyhedron::{enumerate_vertices, polygon_area, projected_polygon, volume};
use rpi_core::Polyhedron;

pub struct SetMetrics {
    pub volume: Option<f64>,
    pub projection_area: Option<f64>,
}

pub fn set_metrics(set: &Polyhedron) -> Result<SetMetrics> {
    let volume = match volume(set) {
        Ok(v) => Some(v.value),
        Err(Error::UnsupportedDimension(_)) => None,
        Err(e) => return Err(e),
    };
    let projection_area = if set.dim() >= 2 { Some(polygon_area(&projected_polygon(set, [0, 1])?)) } else { None };
    Ok(SetMetrics { volume, projection_area })
}

fn cell(v: Option<f64>) -> String {
    v.map_or("n/a".into(), |x| format!("{x:.4}"))
}

fn gains_text(c: &CandidateSolution<f64>) -> Vec<String> {
    let g = &c.gains;
    (0..g.n_v())
        .map(|i| {
            let vals: Vec<String> = g.k[i]
                .as_slice()
                .iter()
                .chain(g.kbar[i].as_slice())
                .chain(g.khat[i].as_slice())
                .map(|v| format!("{v:.5}"))
                .collect();
            format!("[{}]", vals.join(" "))
        })
        .collect()
}

pub fn design_table(c: &CandidateSolution<f64>, objective: f64, lambda_star: f64, theta: f64) -> Result<String> {
    let outer = set_metrics(&c.invariant_set()?)?;
    let inner = set_metrics(&c.ultimate_set()?)?;
    let mut s = String::new();
    let lr = c.l_r() as f64;
    let _ = writeln!(s, "objective J              {objective:.6}");
    let _ = writeln!(s, "lambda                   {lambda_star:.6}");
    let _ = writeln!(s, "sum(rho)/l_r             {:.6}", c.rho.iter().sum::<f64>() / lr);
    if !c.gammas.is_empty() {
        let _ = writeln!(s, "mean gamma               {:.6}", c.gammas.iter().sum::<f64>() / c.gammas.len() as f64);
    }
    let _ = writeln!(
        s,
        "{:>6} | {:>10} | {:>19} | {:>10} | {:>20} | [K K̄ K̂]",
        "θ", "Λ Volume", "Λ Projection Area", "Λ⁰ Volume", "Λ⁰ Projection Area"
    );
    let gains = gains_text(c);
    let _ = writeln!(
        s,
        "{:>6} | {:>10} | {:>19} | {:>10} | {:>20} | {}",
        if theta.is_nan() { "-".into() } else { format!("{theta}") },
        cell(outer.volume),
        cell(outer.projection_area),
        cell(inner.volume),
        cell(inner.projection_area),
        gains[0]
    );
    for g in &gains[1..] {
        let _ = writeln!(s, "{:>6} | {:>10} | {:>19} | {:>10} | {:>20} | {g}", "", "", "", "", "");
    }
    Ok(s)
}

pub fn print_design(c: &CandidateSolution<f64>, objective: f64, lambda_star: f64, theta: f64) -> Result<()> {
    print!("{}", design_table(c, objective, lambda_star, theta)?);
    Ok(())
}

fn write_points(path: &Path, points: &[Vec<f64>]) -> Result<()> {
    let mut s = String::new();
    for p in points {
        let cols: Vec<String> = p.iter().map(|v| format!("{v:.16e}")).collect();
        let _ = writeln!(s, "{}", cols.join(" "));
    }
    std::fs::write(path, s).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// `lambda{,0}_projection.txt` (closed x₁–x₂ polygon) and `lambda{,0}_vertices.txt`.
pub fn write_outlines(c: &CandidateSolution<f64>, dir: &Path) -> Result<()> {
    for (name, set) in [("lambda", c.invariant_set()?), ("lambda0", c.ultimate_set()?)] {
        if set.dim() >= 2 {
            let mut poly: Vec<Vec<f64>> = projected_polygon(&set, [0, 1])?.iter().map(|p| p.to_vec()).collect();
            if let Some(first) = poly.first().cloned() {
                poly.push(first);
            }
            write_points(&dir.join(format!("{name}_projection.txt")), &poly)?;
        }
        if set.dim() <= 4 {
            write_points(&dir.join(format!("{name}_vertices.txt")), &enumerate_vertices(&set)?)?;
        }
    }
    Ok(())
}
