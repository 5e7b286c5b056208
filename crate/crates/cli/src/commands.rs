//! The four subcommands. Each returns a [`Table`]; writing it is the
//! caller's job.

use rayon::prelude::*;
use tbscatter::heff::{self, DEFECT_TOLERANCE};
use tbscatter::scattering::{self, SweepRow};
use tbscatter::tracker::{self, PathPoint, StepFlag};
use tbscatter::{Complex64, EffectiveHamiltonian, Error};

use crate::config::RunConfig;
use crate::table::{Cell, Table};
use crate::CliError;

/// Conductance sweep over `[grid]`.
///
/// Columns, in order: `E, k, conductance, T_1..T_K, arg_t_1..arg_t_K,
/// open_channels, status, closed_levels`. `T_q` is the total transmission
/// out of lead-0 channel `q`, `arg_t_q` the phase of `t_qq`, and
/// `closed_levels` lists the closed-billiard energies whose nearest grid
/// point is this row (for overlaying the closed spectrum on the curve).
pub fn sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    let grid = cfg.grid()?.points();
    let mode = cfg.mode();
    let sys = cfg.geometry().open_system().map_err(|e| CliError::Config(format!("{}: {e}", cfg.geometry_section())))?;
    let n_in = scattering::lead0_channels(sys.coupling()).len();
    let results: Vec<Result<Option<SweepRow>, Error>> = grid
        .par_iter()
        .map(|&e| match scattering::sweep_point(&sys, e, mode) {
            Ok(r) => Ok(Some(r)),
            // Exactly on a level that no channel sees; S exists but G does not.
            Err(Error::SingularResolvent { .. }) => Ok(None),
            Err(err) => Err(err),
        })
        .collect();
    let rows: Vec<Option<SweepRow>> = results.into_iter().collect::<Result<_, _>>()?;

    let mut columns: Vec<String> = vec!["E".into(), "k".into(), "conductance".into()];
    columns.extend((1..=n_in).map(|q| format!("T_{q}")));
    columns.extend((1..=n_in).map(|q| format!("arg_t_{q}")));
    columns.extend(["open_channels".into(), "status".into(), "closed_levels".into()]);

    let mut closed: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut levels = sys.energies().to_vec();
    levels.sort_by(f64::total_cmp);
    for e in levels.into_iter().filter(|e| (lo..=hi).contains(e)) {
        let i = (0..grid.len()).min_by(|&a, &b| (grid[a] - e).abs().total_cmp(&(grid[b] - e).abs())).unwrap_or(0);
        closed[i].push(e);
    }

    let mut table = Table { command: "sweep", columns, ..Default::default() };
    for ((row, levels), &e) in rows.into_iter().zip(closed).zip(&grid) {
        let Some(row) = row else {
            let mut cells = vec![Cell::Num(e), Cell::Num(f64::NAN), Cell::Num(f64::NAN)];
            cells.extend((0..2 * n_in).map(|_| Cell::Num(f64::NAN)));
            cells.push(Cell::Int(sys.coupling().open_channels(e).len()));
            cells.push(Cell::Text("singular-resolvent".into()));
            cells.push(Cell::List(levels));
            table.push(cells);
            continue;
        };
        let mut cells = vec![Cell::Num(row.energy), Cell::Num(row.k), Cell::Num(row.conductance)];
        cells.extend(row.transmission.iter().map(|&x| Cell::Num(x)));
        cells.extend(row.phase.iter().map(|&x| Cell::Num(x)));
        cells.push(Cell::Int(row.open_channels));
        cells.push(Cell::Text(row.status.label().into()));
        cells.push(Cell::List(levels));
        table.push(cells);
    }
    Ok(table)
}

/// Poles of `H_eff(E)` at `energy` (default 0). Coalesced poles are
/// reported once, with their multiplicity and the `defective` flag set.
pub fn poles(cfg: &RunConfig) -> Result<Table, CliError> {
    let energy = cfg.energy_or(0.0);
    let h = EffectiveHamiltonian::for_geometry(&cfg.geometry(), energy, cfg.mode())?;
    let ps = heff::eigensystem(&h)?;
    let mut table = Table::new("poles", &["index", "re", "im", "width", "multiplicity", "defective", "self_overlap"]);
    table.notes.push(format!("energy = {energy}"));
    table.notes.push(format!("trace defect = {:e}", (ps.sum() - h.trace()).norm()));

    let n = ps.len();
    let mut used = vec![false; n];
    let mut index = 0;
    for a in 0..n {
        if used[a] {
            continue;
        }
        let mut members = vec![a];
        if ps.defect[a] {
            let za = ps.poles[a];
            members.extend((a + 1..n).filter(|&b| {
                !used[b] && ps.defect[b] && (za - ps.poles[b]).norm() < DEFECT_TOLERANCE * (1.0 + za.norm())
            }));
        }
        for &m in &members {
            used[m] = true;
        }
        let z = members.iter().map(|&m| ps.poles[m]).sum::<Complex64>() / members.len() as f64;
        let overlap = members.iter().map(|&m| ps.self_overlap[m]).fold(f64::INFINITY, f64::min);
        index += 1;
        table.push(vec![
            Cell::Int(index),
            Cell::Num(z.re),
            Cell::Num(z.im),
            Cell::Num(width(z)),
            Cell::Int(members.len()),
            Cell::Bool(ps.defect[a]),
            Cell::Num(overlap),
        ]);
    }
    Ok(table)
}

/// Pole trajectories along `[path]`, one row per (step, branch).
pub fn track(cfg: &RunConfig) -> Result<Table, CliError> {
    let path = cfg.track_path()?;
    let g = cfg.geometry();
    let traj = tracker::trace_poles(&g, &path, cfg.mode())?;
    let (gl, gr) = g.strengths();
    let mut table = Table::new("track", &["step", "v_l", "v_r", "E", "branch", "re", "im", "width"]);
    table.notes.push(format!("trace defect = {:e}", traj.trace_defect()));
    for f in &traj.flags {
        table.notes.push(match f {
            StepFlag::Ambiguous { step, optimal, greedy } => {
                format!("ambiguous matching at step {step}: optimal {optimal:?}, greedy {greedy:?}")
            }
            StepFlag::Jump { step, branch, ratio } => {
                format!("discontinuity at step {step}, branch {}: displacement {ratio:.3}x the median", branch + 1)
            }
        });
    }
    for (s, pt) in traj.params.iter().enumerate() {
        let (v_l, v_r, e) = match *pt {
            PathPoint::Coupling { v_l, v_r } => (v_l, v_r, path.energy),
            PathPoint::Energy(e) => (gl, gr, e),
        };
        for (b, branch) in traj.branches.iter().enumerate() {
            let z = branch[s];
            table.push(vec![
                Cell::Int(s),
                Cell::Num(v_l),
                Cell::Num(v_r),
                Cell::Num(e),
                Cell::Int(b + 1),
                Cell::Num(z.re),
                Cell::Num(z.im),
                Cell::Num(width(z)),
            ]);
        }
    }
    Ok(table)
}

/// `-2 Im z`, with a real pole giving `+0` rather than `-0`.
fn width(z: Complex64) -> f64 {
    -2.0 * z.im + 0.0
}
