//! CSV emitters with shortest round-trip number formatting and LF endings.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::models::ChRun;
use crate::ode::{ResidualEntry, Trajectory};

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    let mut buf = ryu::Buffer::new();
    buf.format(x).to_owned()
}

fn push_number(line: &mut String, x: f64) {
    line.push(',');
    line.push_str(&format_number(x));
}

/// Rows `t,level,x_0..,y_0..` for every trajectory in turn. The header
/// spans the widest trajectory; narrower levels leave trailing cells empty.
pub fn trajectory_csv(trajectories: &[Trajectory]) -> String {
    let dim = trajectories.iter().map(Trajectory::dim).max().unwrap_or(0);
    let mut out = String::from("t,level");
    for i in 0..dim {
        let _ = write!(out, ",x_{i}");
    }
    for i in 0..dim {
        let _ = write!(out, ",y_{i}");
    }
    out.push('\n');
    for tr in trajectories {
        let pad = dim - tr.dim();
        for ((t, x), y) in tr.times.iter().zip(&tr.xs).zip(&tr.ys) {
            out.push_str(&format_number(*t));
            let _ = write!(out, ",{}", tr.level);
            x.iter().for_each(|&v| push_number(&mut out, v));
            out.extend(std::iter::repeat_n(',', pad));
            y.iter().for_each(|&v| push_number(&mut out, v));
            out.extend(std::iter::repeat_n(',', pad));
            out.push('\n');
        }
    }
    out
}

pub fn residual_csv(entries: &[ResidualEntry]) -> String {
    let mut out = String::from("t,j,i,residual\n");
    for e in entries {
        out.push_str(&format_number(e.t));
        let _ = write!(out, ",{},{}", e.j, e.i);
        push_number(&mut out, e.residual);
        out.push('\n');
    }
    out
}

/// Rows `t,a0,a1,b1,…,aN,bN,energy`.
pub fn ch_csv(run: &ChRun) -> String {
    let modes = run.states.first().map_or(0, |s| s.modes());
    let mut out = String::from("t,a0");
    for m in 1..=modes {
        let _ = write!(out, ",a{m},b{m}");
    }
    out.push_str(",energy\n");
    for ((t, s), e) in run.times.iter().zip(&run.states).zip(&run.energies) {
        out.push_str(&format_number(*t));
        s.coeffs().iter().for_each(|&v| push_number(&mut out, v));
        push_number(&mut out, *e);
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, text)
}
